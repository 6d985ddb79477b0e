//! Compares the complexity of charting songs against same-size random
//! samples of the whole corpus.
//!
//! Run with `cargo run --release --example popularity`.

use songplexity::pipeline::{compute_profiles, run_popularity_comparison, Config};
use songplexity::synth::{generate_corpus, SynthSpec};

fn main() -> songplexity::Result<()> {
    // charting songs get half the entropy jitter of the rest
    let spec = SynthSpec { n_songs: 2000, hot100_fraction: 0.2, hot100_spread: 0.5, seed: 5, ..SynthSpec::default() };
    let (songs, truth) = generate_corpus(&spec)?;
    let config = Config { bootstrap_n: 500, ..Config::default() };
    let profiles = compute_profiles(&songs, &truth.calibration, &config.codec);

    println!("feature   mean(all) mean(hot)  var(all)  var(hot)  variance CI of samples  position");
    for row in run_popularity_comparison(&profiles, &config, 42)? {
        let c = &row.comparison;
        let ci = c.variance_ci.unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{:<9} {:>9.3} {:>9.3} {:>9.4} {:>9.4}  [{:.4}, {:.4}]        {:?}",
            row.feature.to_string(),
            c.population_mean,
            c.cohort_mean,
            c.population_variance.unwrap_or(f64::NAN),
            c.cohort_variance.unwrap_or(f64::NAN),
            ci.0,
            ci.1,
            c.variance_position
        );
    }
    Ok(())
}
