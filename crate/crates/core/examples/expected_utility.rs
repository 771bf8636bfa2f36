//! Expected menu utility under a Plackett-Luce score vector: Monte Carlo
//! against exact enumeration, and greedy menu selection for the max-based
//! (media) and top-k overlap (admissions) utilities.
//!
//! `cargo run --release --example expected_utility`

use prefelicit::plackett::ScoreVector;
use prefelicit::utility::{best_menu_with_value, exact_expected_utility, expected_utility_mc, AdmissionsUtility, McConfig, MediaUtility, UtilityFunction};
use prefelicit::{ItemId, Menu};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scores = ScoreVector::from_log_scores(&[1.5, 1.4, 0.2, 0.0, -0.3, -1.0, -1.2])?;
    let media = MediaUtility::default();
    let admissions = AdmissionsUtility { k: 3 };
    let utilities: [&dyn UtilityFunction; 2] = [&media, &admissions];

    let menu = Menu::from_items([ItemId(0), ItemId(2)], 2)?;
    for u in utilities {
        let exact = exact_expected_utility(&menu, &scores, u)?;
        print!("{:>10}: exact {exact:.4}", u.name());
        for samples in [100, 1_000, 10_000] {
            let mc = expected_utility_mc(&menu, &scores, u, &McConfig { samples, seed: 5, ..McConfig::default() })?;
            print!("  R={samples}: {mc:.4}");
        }
        println!();
    }

    for u in utilities {
        for size in 1..=3 {
            let (best, value) = best_menu_with_value(&scores, u, size, &McConfig { samples: 4_000, seed: 9, ..McConfig::default() })?;
            let ids: Vec<usize> = best.sorted_items().iter().map(|i| i.0).collect();
            println!("{:>10} best menu of size {size}: {ids:?} (expected utility {value:.3})", u.name());
        }
    }
    Ok(())
}
