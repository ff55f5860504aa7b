//! A reduced verification run in each regime, printing the verdicts.

use std::path::Path;

use survfclt::harness::config::ExperimentConfig;
use survfclt::harness::experiment::{run_fclt_experiment, RunOptions};

fn main() -> survfclt::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["iid.toml", "mixing.toml", "lrd.toml"] {
        let mut cfg = ExperimentConfig::from_file(&dir.join(name))?;
        cfg.n /= 4;
        let report = run_fclt_experiment(&cfg, RunOptions::default())?;
        println!(
            "== {name} (n = {}, R = {}): pass = {}",
            cfg.n, cfg.replications, report.pass
        );
        for v in &report.verdicts {
            println!(
                "  {} {}: {:.4} vs {:.4}",
                if v.pass { "PASS" } else { "FAIL" },
                v.name,
                v.statistic,
                v.threshold
            );
        }
    }
    Ok(())
}
