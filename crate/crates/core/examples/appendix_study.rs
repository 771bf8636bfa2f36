//! Rating-trained versus comparison-trained matrix factorisation: both models
//! see the same training ratings (as scores or as pairwise comparisons) and
//! are scored by Kendall tau against a hidden per-user ranking.
//!
//! `cargo run --release --example appendix_study -- seeds=1,2,3 fractions=0.2,0.5,0.8`
//!
//! `data=PATH` uses a MovieLens `ratings.dat` / `ratings.csv` instead of the
//! synthetic ratings; `max_users` and `max_items` bound the subsample.

use prefelicit::harness::{run_experiment, ExperimentSpec, TAU_COMPARISON, TAU_RATING};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut settings = vec![("experiment".to_owned(), "appendix".to_owned()), ("seeds".to_owned(), "1,2,3,4,5".to_owned())];
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or_else(|| format!("expected key=value, got {arg}"))?;
        settings.push((k.to_owned(), v.to_owned()));
    }
    let spec = ExperimentSpec::from_settings(&settings)?;
    let report = run_experiment(&spec)?;
    println!("train fraction   tau (ratings)   tau (comparisons)");
    let rating = report.aggregate(TAU_RATING);
    let comparison = report.aggregate(TAU_COMPARISON);
    for ((f, r), c) in spec.fractions.iter().zip(&rating).zip(&comparison) {
        println!("{f:>14.2}   {:.3} ± {:.3}   {:.3} ± {:.3}", r.mean, r.stderr, c.mean, c.stderr);
    }
    if let Some(dir) = &spec.out {
        report.write(&spec, dir)?;
    }
    Ok(())
}
