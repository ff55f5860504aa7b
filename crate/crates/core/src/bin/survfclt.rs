fn main() -> std::process::ExitCode {
    survfclt::cli::run(std::env::args_os())
}
