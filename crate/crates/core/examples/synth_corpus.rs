//! Writes a synthetic corpus to JSONL and recovers its planted complexities.
//!
//! Run with `cargo run --release --example synth_corpus`.

use songplexity::corpus::read_corpus;
use songplexity::pipeline::compute_profiles;
use songplexity::synth::{write_generated_corpus, Generator, SynthSpec};

fn main() -> songplexity::Result<()> {
    let spec = SynthSpec {
        n_songs: 200,
        segments_per_song: 2000,
        pitch: Generator::Entropy { alphabet: 4, bits: 1.5, slope_per_year: 0.0, jitter_sd: 0.15 },
        timbre: Generator::Markov { matrix: vec![vec![0.9, 0.1], vec![0.4, 0.6]], symbols: vec![] },
        rhythm: Generator::Deterministic { cycle: vec![2, 4, 1] },
        seed: 4,
        ..SynthSpec::default()
    };
    let mut jsonl = Vec::new();
    let truth = write_generated_corpus(&spec, &mut jsonl)?;
    println!("{} songs, {} bytes of JSONL", truth.songs.len(), jsonl.len());

    let songs = read_corpus(jsonl.as_slice())?;
    let profiles = compute_profiles(&songs, &truth.calibration, &spec.codec);
    for (planted, measured) in truth.songs.iter().zip(&profiles).take(5) {
        let m = measured.profile.as_array().map(|b| b.unwrap_or(f64::NAN));
        println!(
            "{} planted {:.3?}\n{:>w$} measured {:.3?}",
            planted.id,
            planted.planted_bits,
            "",
            m,
            w = planted.id.len()
        );
    }
    Ok(())
}
