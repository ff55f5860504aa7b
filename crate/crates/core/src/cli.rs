//! Command line interface. Exit codes: 0 when every verdict passes, 2 when a
//! verdict fails, 1 on any error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::depgen::{gen_censored_sample, DependenceModel};
use crate::error::{Error, Result};
use crate::estimators::{estimate, CensoredSample};
use crate::harness::config::{ExperimentConfig, OUTPUT_DIR_ENV};
use crate::harness::experiment::{run_fclt_experiment, RunOptions};
use crate::harness::report::write_report;
use crate::hermite::{default_rank_grid, hermite_rank, EventClass, IndicatorSpec};
use crate::limits::{
    simulate_lrd_limit, weak_limit_sample, zeta_for_model, Coupling, LimitSample,
    WeakLimitSimulator, DEFAULT_SUBGRID, DEFAULT_SURROGATE_LEN, DEFAULT_ZETA_SUBGRID,
};
use crate::rng::RngStream;

#[derive(Debug, Parser)]
#[command(
    name = "survfclt",
    version,
    about = "Nelson-Aalen / Kaplan-Meier estimation and limit-theorem verification for dependent censored data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nelson-Aalen and Kaplan-Meier step functions of a `time,event` CSV.
    Estimate {
        input: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Simulate a censored sample from a model file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Hermite coefficients and ranks of a model's indicator families.
    Hermite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 64)]
        grid_points: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run a verification experiment.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Simulate the limit process of a model.
    Limits {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Evaluation times; defaults to H-quantiles 0.1, 0.25, 0.5, 0.75, 0.9.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn out_dir(flag: Option<PathBuf>, fallback: PathBuf) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or(fallback)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(io(path))
}

/// A model file is either a bare model or an experiment config with `[model]`.
pub fn load_model(path: &Path) -> Result<DependenceModel> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let config_err = |e: toml::de::Error| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let value: toml::Table = toml::from_str(&text).map_err(config_err)?;
    let model: DependenceModel = match value.get("model") {
        Some(m) => m.clone().try_into().map_err(config_err)?,
        None => toml::from_str(&text).map_err(config_err)?,
    };
    model.validate().map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(model)
}

fn cmd_estimate(input: &Path, dir: PathBuf) -> Result<ExitCode> {
    let file = File::open(input).map_err(io(input))?;
    let sample = CensoredSample::read_csv(BufReader::new(file), input)?;
    let (na, km) = estimate(&sample);
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    for (name, f) in [("nelson_aalen.csv", &na), ("kaplan_meier.csv", &km)] {
        let path = dir.join(name);
        let mut w = create(&path)?;
        f.write_csv(&mut w)?;
        w.flush().map_err(io(&path))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(
    config: &Path,
    n: usize,
    seed: u64,
    stream: u64,
    output: Option<PathBuf>,
) -> Result<ExitCode> {
    let model = load_model(config)?;
    let sample = gen_censored_sample(&model, n, &RngStream::new(seed, stream))?;
    match output {
        Some(path) => {
            let mut w = create(&path)?;
            sample.write_csv(&mut w)?;
            w.flush().map_err(io(&path))?;
        }
        None => sample.write_csv(std::io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_hermite(
    config: &Path,
    k_max: usize,
    tol: f64,
    points: usize,
    dir: PathBuf,
) -> Result<ExitCode> {
    let model = load_model(config)?;
    let spec = IndicatorSpec::from_model(&model, EventClass::Any);
    let grid = default_rank_grid(&model.lifetime, points);
    let expansion = hermite_rank(&spec, &grid, k_max, tol)?;
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    let families = [
        Some(&expansion.any),
        Some(&expansion.event),
        expansion.censored.as_ref(),
    ];
    for e in families.into_iter().flatten() {
        let path = dir.join(format!("hermite_{}.csv", e.family.label()));
        let mut w = create(&path)?;
        e.write_csv(&mut w)?;
        w.flush().map_err(io(&path))?;
        println!("wrote {}", path.display());
    }
    let path = dir.join("hermite_summary.json");
    let mut w = create(&path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&expansion.summary)?).map_err(io(&path))?;
    w.flush().map_err(io(&path))?;
    println!("wrote {}", path.display());
    println!(
        "rank {} (r0 {}, r1 {})",
        expansion.summary.rank,
        expansion
            .summary
            .r0
            .map_or("-".to_string(), |r| r.to_string()),
        expansion.summary.r1
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(
    config: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
    dir: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = dir.unwrap_or_else(|| cfg.output_dir());
    let report = run_fclt_experiment(&cfg, RunOptions { threads })?;
    for v in &report.verdicts {
        println!(
            "{} {}: {:.6} vs {:.6}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.statistic,
            v.threshold
        );
    }
    for path in write_report(&report, &dir)? {
        println!("wrote {}", path.display());
    }
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn write_limit(sample: &LimitSample, dir: &Path, stem: &str) -> Result<()> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = create(&csv_path)?;
    sample.write_csv(&mut w)?;
    w.flush().map_err(io(&csv_path))?;
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = create(&json_path)?;
    writeln!(w, "{}", sample.metadata_json()?).map_err(io(&json_path))?;
    w.flush().map_err(io(&json_path))?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn cmd_limits(
    config: &Path,
    replications: usize,
    seed: u64,
    grid: Option<Vec<f64>>,
    dir: PathBuf,
) -> Result<ExitCode> {
    let model = load_model(config)?;
    let truth = model.true_model()?;
    let grid = grid.unwrap_or_else(|| {
        [0.1, 0.25, 0.5, 0.75, 0.9]
            .iter()
            .map(|&q| truth.h_quantile(q))
            .collect()
    });
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    if model.is_long_range() {
        let rank_grid = default_rank_grid(&model.lifetime, 64);
        let (zeta, _) = zeta_for_model(&model, &grid, &rank_grid, 8, 1e-6, DEFAULT_ZETA_SUBGRID)?;
        let na = simulate_lrd_limit(
            &zeta.substitution,
            zeta.r,
            &model,
            &grid,
            replications,
            seed,
            DEFAULT_SURROGATE_LEN,
        )?;
        write_limit(&na, &dir, "limit_nelson_aalen")?;
    } else {
        let sim = WeakLimitSimulator::new(&truth, &grid, DEFAULT_SUBGRID, Coupling::Split)?;
        let (na, km) = weak_limit_sample(&truth, &sim, replications, seed);
        write_limit(&na, &dir, "limit_nelson_aalen")?;
        write_limit(&km, &dir, "limit_kaplan_meier")?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Estimate { input, out_dir: d } => {
            cmd_estimate(&input, out_dir(d, PathBuf::from(".")))
        }
        Command::Generate {
            config,
            n,
            seed,
            stream,
            output,
        } => cmd_generate(&config, n, seed, stream, output),
        Command::Hermite {
            config,
            k_max,
            tol,
            grid_points,
            out_dir: d,
        } => cmd_hermite(
            &config,
            k_max,
            tol,
            grid_points,
            out_dir(d, PathBuf::from(".")),
        ),
        Command::Verify {
            config,
            seed,
            threads,
            out_dir: d,
        } => cmd_verify(&config, seed, threads, d),
        Command::Limits {
            config,
            replications,
            seed,
            grid,
            out_dir: d,
        } => cmd_limits(
            &config,
            replications,
            seed,
            grid,
            out_dir(d, PathBuf::from(".")),
        ),
    }
}

/// Parse arguments and run, mapping errors to exit code 1.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
