//! Yearly complexity means and per-epoch trend lines over a corpus with a
//! planted upward drift in pitch complexity.
//!
//! Run with `cargo run --release --example epoch_trends`.

use songplexity::pipeline::{compute_profiles, run_trends, Cohort, Config};
use songplexity::synth::{generate_corpus, Generator, SynthSpec};

fn main() -> songplexity::Result<()> {
    let spec = SynthSpec {
        n_songs: 3000,
        pitch: Generator::Entropy { alphabet: 16, bits: 1.5, slope_per_year: 0.02, jitter_sd: 0.1 },
        seed: 9,
        ..SynthSpec::default()
    };
    let (songs, truth) = generate_corpus(&spec)?;
    let config = Config { bootstrap_n: 300, ..Config::default() };
    let profiles = compute_profiles(&songs, &truth.calibration, &config.codec);
    let report = run_trends(&profiles, &config, 3)?;

    let pitch_all = |cohort: Cohort, feature| cohort == Cohort::All && feature == songplexity::codec::Feature::Pitch;
    for row in report.yearly.iter().filter(|r| pitch_all(r.cohort, r.feature)).step_by(10) {
        println!("{} pitch mean {:.3} [{:.3}, {:.3}] over {} songs", row.year, row.mean, row.ci_low, row.ci_high, row.count);
    }
    for row in report.fits.iter().filter(|r| r.cohort == Cohort::All) {
        let e = row.fit.epoch;
        println!(
            "{:<8} {}-{}: slope {:+.4} bits/year, 95% CI [{:+.4}, {:+.4}]",
            row.feature.to_string(),
            e.start,
            e.end,
            row.fit.slope,
            row.fit.slope_ci.0,
            row.fit.slope_ci.1
        );
    }
    Ok(())
}
