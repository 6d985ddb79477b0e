//! Genre deviation table and the genre dendrogram for a corpus with two
//! planted families of genres.
//!
//! Run with `cargo run --release --example genre_clusters`.

use songplexity::pipeline::{compute_profiles, run_genres, Config};
use songplexity::synth::{generate_corpus, GenrePlan, SynthSpec};

fn main() -> songplexity::Result<()> {
    let plan = |label: &str, offsets| GenrePlan { label: label.into(), weight: 1.0, offsets };
    let genres = vec![
        plan("blues", [0.0, 0.0, 0.0, 0.0]),
        plan("country", [0.05, 0.0, 0.0, 0.0]),
        plan("folk", [0.0, 0.05, 0.0, 0.0]),
        plan("jazz", [0.8, 0.0, 0.0, 0.6]),
        plan("fusion", [0.85, 0.0, 0.0, 0.6]),
        plan("bebop", [0.8, 0.05, 0.0, 0.65]),
    ];
    let spec = SynthSpec { n_songs: 3000, genres, seed: 21, ..SynthSpec::default() };
    let (songs, truth) = generate_corpus(&spec)?;
    let config = Config { min_genre_songs: 100, genre_bootstrap_n: 200, ..Config::default() };
    let profiles = compute_profiles(&songs, &truth.calibration, &config.codec);
    let report = run_genres(&profiles, &config, 1)?;

    for row in report.rows.iter().filter(|r| r.feature == songplexity::codec::Feature::Pitch) {
        println!(
            "{:<8} pitch deviation {:+.3} ({:?}), KS D {:.3} p {:.2e}, community {:?}",
            row.genre, row.deviation, row.position, row.ks_d, row.ks_p, row.community
        );
    }
    let cut = &report.clustering.cut;
    println!("best cut k={} silhouette {:.3}", cut.k, cut.silhouette);
    println!("{}", report.clustering.tree.to_newick());
    Ok(())
}
