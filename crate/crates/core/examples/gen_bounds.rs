//! Regenerates the frozen task-bounds file. Run from the repository root:
//!
//!   cargo run --release -p llambo-core --example gen_bounds \
//!       > crates/core/data/bounds/synthetic.json

use llambo_core::objectives::{estimate_bounds, BoundsEntry, BoundsFile, SyntheticForm};

fn main() {
    let n_samples = 1_000_000;
    let seed = 0;
    let mut entries = Vec::new();
    for form in [
        SyntheticForm::Rosenbrock,
        SyntheticForm::Griewank,
        SyntheticForm::KTablet,
    ] {
        for d in [2usize, 5, 15] {
            let (lo, hi) = estimate_bounds(form, d, n_samples, seed);
            entries.push(BoundsEntry {
                name: form.name().to_string(),
                d,
                s_star_min: 0.0,
                s_star_max: hi,
                sampled_min: lo,
            });
            eprintln!("{}-{d}d: sampled [{lo:.6e}, {hi:.6e}]", form.name());
        }
    }
    let file = BoundsFile {
        n_samples,
        seed,
        entries,
    };
    println!("{}", serde_json::to_string_pretty(&file).unwrap());
}
