//! Filters a small hand-written corpus and tags chart songs.
//!
//! Run with `cargo run --example corpus_filtering`.

use songplexity::corpus::{
    assign_genre, filter_corpus, match_charts, read_charts, read_corpus, FilterConfig,
};

const CORPUS: &str = r#"{"id":"a1","title":"Café del Mar","artist":"Energy 52","year":1993,"duration":3.0,"tempo":128.0,"time_signature":4,"terms":[{"term":"trance","weight":0.8},{"term":"electronic","weight":0.9}],"segments":[{"start":0.0,"loudness_max":-8.0,"pitches":[1,0,0,0,0,0,0,0,0,0,0,0],"timbre":[0,0,0,0,0,0,0,0,0,0,0,0]}]}
{"id":"a2","title":"cafe del mar","artist":"ENERGY 52","year":1999,"duration":3.0,"tempo":128.0,"time_signature":4,"terms":[{"term":"electronic","weight":1.0}],"segments":[]}
{"id":"a3","title":"Studio Interview","artist":"Somebody","year":1985,"duration":3.0,"tempo":90.0,"time_signature":4,"terms":[{"term":"rock","weight":1.0}],"segments":[]}
{"id":"a4","title":"Early Blues","artist":"Old Band","year":1951,"duration":3.0,"tempo":80.0,"time_signature":4,"terms":[{"term":"blues","weight":1.0}],"segments":[]}
{"id":"a5","title":"Night Drive","artist":"Synth Club","year":2004,"duration":3.0,"tempo":110.0,"time_signature":4,"terms":[{"term":"synthpop","weight":0.7}],"segments":[]}
"#;

const CHARTS: &str = "title,artist\n\"Night Drive\",\"synth club\"\n";

fn main() -> songplexity::Result<()> {
    let mut songs = read_corpus(CORPUS.as_bytes())?;
    let charts = read_charts(CHARTS.as_bytes())?;
    let matched = match_charts(&mut songs, &charts);
    println!("{} songs read, {matched} matched a chart entry", songs.len());

    let (kept, report) = filter_corpus(songs, &FilterConfig::default());
    println!("{report:#?}");
    for song in &kept {
        println!(
            "kept {} ({:?}) genre={} hot100={}",
            song.id,
            song.title,
            assign_genre(song).unwrap_or("-"),
            song.hot100
        );
    }
    Ok(())
}
