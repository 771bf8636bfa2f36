//! Admissions shortlist study on the bundled applicant table: one committee
//! ranking, a neural preference model over applicant features, and query
//! strategies compared by Precision@k and NDCG@k of the predicted shortlist.
//!
//! `cargo run --release --example admissions_experiment -- rounds=40 seeds=1,2`
//!
//! Every `key=value` argument overrides one experiment setting
//! (`data=PATH` loads another applicant CSV, `out=DIR` writes reports).

use prefelicit::harness::{admissions_metric_names, run_experiment, ExperimentSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut settings = vec![("experiment".to_owned(), "admissions".to_owned()), ("rounds".to_owned(), "30".to_owned()), ("seeds".to_owned(), "1,2".to_owned())];
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or_else(|| format!("expected key=value, got {arg}"))?;
        settings.push((k.to_owned(), v.to_owned()));
    }
    let strategies = if settings.iter().any(|(k, _)| k == "strategy") { vec![None] } else { ["utility", "entropy", "random", "cluster"].map(Some).to_vec() };
    for strategy in strategies {
        let mut s = settings.clone();
        if let Some(st) = strategy {
            s.push(("strategy".into(), st.into()));
        }
        let spec = ExperimentSpec::from_settings(&s)?;
        let report = run_experiment(&spec)?;
        let (precision, ndcg) = admissions_metric_names(spec.top_k);
        let last = |m: &str| report.aggregate(m).last().map(|a| (a.mean, a.stderr)).unwrap_or_default();
        let (p, p_se) = last(&precision);
        let (n, n_se) = last(&ndcg);
        println!("{:>8}: {precision} {p:.3} ± {p_se:.3}   {ndcg} {n:.3} ± {n_se:.3}", spec.strategy.as_str());
        if let Some(dir) = &spec.out {
            report.write(&spec, &dir.join(spec.strategy.as_str()))?;
        }
    }
    Ok(())
}
