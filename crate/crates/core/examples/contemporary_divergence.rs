//! How far each charting song's codeword usage sits from the other charting
//! songs of its year.
//!
//! Run with `cargo run --release --example contemporary_divergence`.

use songplexity::infotheory::{kl_divergence, kl_smoothing_bound, Distribution};
use songplexity::pipeline::{run_divergence, Config};
use songplexity::synth::{generate_corpus, SynthSpec};

fn main() -> songplexity::Result<()> {
    // same proportions, ten times the length: any KL here is smoothing alone
    let short = Distribution::from_counts([(0, 10.0), (1, 5.0), (2, 5.0)])?;
    let long = Distribution::from_counts([(0, 100.0), (1, 50.0), (2, 50.0)])?;
    println!(
        "same usage: KL {:.4} bits, smoothing bound {:.4}",
        kl_divergence(&short, &long, 1.0)?,
        kl_smoothing_bound(20.0, 200.0, 3, 1.0)
    );
    let other = Distribution::from_counts([(3, 10.0), (4, 10.0)])?;
    println!("no shared symbols: KL {:.3} bits", kl_divergence(&short, &other, 1.0)?);

    let spec = SynthSpec { n_songs: 4000, hot100_fraction: 0.2, year_range: (1990, 1999), seed: 12, ..SynthSpec::default() };
    let (songs, truth) = generate_corpus(&spec)?;
    let config = Config { bootstrap_n: 300, ..Config::default() };
    let report = run_divergence(&songs, &truth.calibration, &config, 7)?;
    for row in report.yearly.iter().filter(|r| r.year % 3 == 0) {
        println!(
            "{} {:<8} mean KL {:.3} [{:.3}, {:.3}] over {} songs",
            row.year,
            row.feature.to_string(),
            row.mean_kl,
            row.ci_low,
            row.ci_high,
            row.count
        );
    }
    println!("{} year/feature cells skipped", report.skipped);
    Ok(())
}
