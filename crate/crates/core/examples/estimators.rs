//! Nelson-Aalen and Kaplan-Meier estimates of a small censored sample, with
//! the two Nelson-Aalen routes side by side.

use survfclt::estimators::{estimate, nelson_aalen_integral, CensoredSample};

fn main() -> survfclt::Result<()> {
    let sample = CensoredSample::from_pairs([
        (0.5, true),
        (1.0, true),
        (1.0, false),
        (2.5, true),
        (3.0, false),
        (4.0, true),
    ])?;
    let (na, km) = estimate(&sample);
    let na_integral = nelson_aalen_integral(&sample);

    println!("{:>6} {:>10} {:>10} {:>10}", "t", "Λ_n", "integral", "S_n");
    for &t in na.jump_times() {
        println!(
            "{t:>6.2} {:>10.6} {:>10.6} {:>10.6}",
            na.eval(t),
            na_integral.eval(t),
            km.eval(t)
        );
    }
    println!(
        "S_n(4) = {}, product integral of Λ_n = {}",
        km.eval(4.0),
        na.product_integral(4.0)
    );

    na.write_csv(std::io::stdout().lock())?;
    Ok(())
}
