//! Media recommendation study on a synthetic user-item world: compares query
//! strategies by the max-rank percentile of each user's recommended menu on
//! held-out items.
//!
//! `cargo run --release --example media_experiment -- strategy=random seeds=1,2 out=results/media`
//!
//! Every `key=value` argument overrides one experiment setting; `out=DIR`
//! also writes the CSV report.

use prefelicit::harness::{run_experiment, ExperimentSpec, MEDIA_METRIC};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut settings = vec![
        ("experiment".to_owned(), "media".to_owned()),
        ("n_users".to_owned(), "10".to_owned()),
        ("n_items".to_owned(), "40".to_owned()),
        ("rounds".to_owned(), "10".to_owned()),
        ("seeds".to_owned(), "1,2,3".to_owned()),
    ];
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or_else(|| format!("expected key=value, got {arg}"))?;
        settings.push((k.to_owned(), v.to_owned()));
    }
    let strategies = if settings.iter().any(|(k, _)| k == "strategy") { vec![None] } else { ["utility", "random", "none"].map(Some).to_vec() };
    for strategy in strategies {
        let mut s = settings.clone();
        if let Some(st) = strategy {
            s.push(("strategy".into(), st.into()));
        }
        let spec = ExperimentSpec::from_settings(&s)?;
        let report = run_experiment(&spec)?;
        let curve: Vec<String> = report.aggregate(MEDIA_METRIC).iter().map(|a| format!("{:.3}", a.mean)).collect();
        println!("{:>8}: {}", spec.strategy.as_str(), curve.join(" "));
        if let Some(dir) = &spec.out {
            report.write(&spec, &dir.join(spec.strategy.as_str()))?;
        }
    }
    Ok(())
}
