//! Encodes one song's segments into the four codeword streams and shows how
//! the symbols decode back.
//!
//! Run with `cargo run --example codewords`.

use songplexity::codec::{
    decode_loudness, decode_pitch, encode_pitch, unpack_trits, CodecConfig, TimbreCalibration,
};
use songplexity::corpus::{Segment, SongRecord};
use songplexity::infotheory::song_codewords;

fn main() -> songplexity::Result<()> {
    let config = CodecConfig::default();
    // terciles of every used timbre component at -1 and 1
    let calibration = TimbreCalibration::new(vec![-1.0; 11], vec![1.0; 11], 0)?;

    let chords = [[1.0, 0.1, 0.2, 0.0, 0.9, 0.0, 0.1, 0.8, 0.0, 0.2, 0.0, 0.1], [0.2, 0.0, 1.0, 0.1, 0.0, 0.7, 0.0, 0.1, 0.0, 0.9, 0.0, 0.2]];
    let segments: Vec<Segment> = (0..8)
        .map(|i| Segment {
            start: i as f64 * 0.25,
            loudness_max: -6.0 - 4.0 * (i % 3) as f64,
            pitches: chords[i % 2].to_vec(),
            timbre: (0..12).map(|c| ((i * 7 + c * 3) % 5) as f64 - 2.0).collect(),
        })
        .collect();
    let song = SongRecord {
        id: "demo".into(),
        title: "Demo".into(),
        artist: "Example".into(),
        year: Some(1990),
        duration: Some(2.0),
        tempo: 120.0,
        time_signature: 4,
        terms: vec![],
        segments,
        hot100: false,
    };

    for seq in song_codewords(&song, &calibration, &config).into_iter().flatten() {
        println!("{:>8}: {:?}", seq.feature.to_string(), seq.symbols);
    }

    let c_major = encode_pitch(&chords[0], config.pitch_threshold);
    println!("pitch symbol {c_major:#014b} decodes to {:?}", decode_pitch(c_major));
    println!("loudness symbol 18 decodes to {} dB", decode_loudness(18, &config));
    println!("timbre symbol 12345 unpacks to trits {:?}", unpack_trits(12345));
    Ok(())
}
