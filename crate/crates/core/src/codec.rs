//! Segment features to discrete codewords.
//!
//! | feature  | symbol                                                    | per    |
//! |----------|-----------------------------------------------------------|--------|
//! | pitch    | 12-bit mask of chroma bins at or above a threshold        | segment|
//! | timbre   | 11 components, each a trit from calibrated terciles, base 3 | segment|
//! | loudness | `floor(loudness_max / width)`, offset to be non-negative  | segment|
//! | rhythm   | inter-onset gap in sixteenth notes, rounded and capped    | gap    |
//!
//! Each encoder has a matching decoder used by the synthetic corpus
//! generator to plant exact symbols.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Segment, SongRecord, CHROMA_BINS, TIMBRE_DIMS};
use crate::error::{Error, Result};

pub type Codeword = u32;

/// Timbre components that survive the dropped one.
pub const TIMBRE_USED: usize = TIMBRE_DIMS - 1;
/// `3^11`, the number of distinct timbre codewords.
pub const TIMBRE_ALPHABET: u32 = 177_147;
pub const PITCH_ALPHABET: u32 = 1 << CHROMA_BINS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Pitch,
    Loudness,
    Timbre,
    Rhythm,
}

impl Feature {
    /// Report column order.
    pub const ALL: [Feature; 4] = [Feature::Pitch, Feature::Loudness, Feature::Timbre, Feature::Rhythm];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Pitch => "pitch",
            Feature::Loudness => "loudness",
            Feature::Timbre => "timbre",
            Feature::Rhythm => "rhythm",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordSequence {
    pub feature: Feature,
    pub symbols: Vec<Codeword>,
    /// Exclusive upper bound on symbols, when the feature has one.
    pub alphabet_hint: Option<u32>,
}

impl CodewordSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub pitch_threshold: f64,
    pub loudness_bin_width: f64,
    /// Raw loudness bin mapped to symbol 0; quieter segments clamp to it.
    pub loudness_min_bin: i32,
    pub rhythm_cap: u32,
    pub timbre_drop_component: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            pitch_threshold: 0.5,
            loudness_bin_width: 5.0,
            loudness_min_bin: -20,
            rhythm_cap: 64,
            timbre_drop_component: 0,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch_threshold > 0.0 && self.pitch_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pitch_threshold must lie in (0,1], got {}",
                self.pitch_threshold
            )));
        }
        if !(self.loudness_bin_width.is_finite() && self.loudness_bin_width > 0.0) {
            return Err(Error::InvalidArgument("loudness_bin_width must be > 0".into()));
        }
        if self.rhythm_cap < 1 {
            return Err(Error::InvalidArgument("rhythm_cap must be >= 1".into()));
        }
        if self.timbre_drop_component >= TIMBRE_DIMS {
            return Err(Error::InvalidArgument(format!(
                "timbre_drop_component must be < {TIMBRE_DIMS}"
            )));
        }
        Ok(())
    }

    /// Indices of the timbre components that are encoded, in order.
    pub fn timbre_components(&self) -> impl Iterator<Item = usize> + '_ {
        (0..TIMBRE_DIMS).filter(move |&c| c != self.timbre_drop_component)
    }
}

/// Per-component tercile boundaries for the 11 encoded timbre components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimbreCalibration {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Which raw component was dropped when these were computed.
    pub dropped_component: usize,
}

impl TimbreCalibration {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, dropped_component: usize) -> Result<Self> {
        if lower.len() != TIMBRE_USED || upper.len() != TIMBRE_USED {
            return Err(Error::Calibration(format!("expected {TIMBRE_USED} components")));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::Calibration("lower threshold above upper".into()));
        }
        Ok(Self { lower, upper, dropped_component })
    }

    pub fn trit(&self, component: usize, value: f64) -> u32 {
        if value < self.lower[component] {
            0
        } else if value < self.upper[component] {
            1
        } else {
            2
        }
    }
}

/// Nearest-rank quantile of sorted data: the value at 1-based rank
/// `ceil(n * num / den)`.
fn nearest_rank(sorted: &[f64], num: usize, den: usize) -> f64 {
    let n = sorted.len();
    let rank = (n * num).div_ceil(den).max(1);
    sorted[rank - 1]
}

/// Tercile thresholds over every segment of every song in the sample.
pub fn calibrate_timbre(sample: &[SongRecord], config: &CodecConfig) -> Result<TimbreCalibration> {
    let segments: Vec<&Segment> = sample.iter().flat_map(|s| &s.segments).collect();
    if segments.is_empty() {
        return Err(Error::Calibration("sample has no segments".into()));
    }
    let mut lower = Vec::with_capacity(TIMBRE_USED);
    let mut upper = Vec::with_capacity(TIMBRE_USED);
    for c in config.timbre_components() {
        let mut values: Vec<f64> = segments.iter().map(|s| s.timbre[c]).collect();
        values.sort_by(f64::total_cmp);
        lower.push(nearest_rank(&values, 1, 3));
        upper.push(nearest_rank(&values, 2, 3));
    }
    TimbreCalibration::new(lower, upper, config.timbre_drop_component)
}

fn require_segments(song: &SongRecord, feature: Feature) -> Result<()> {
    if song.segments.is_empty() {
        Err(Error::EmptySequence(feature))
    } else {
        Ok(())
    }
}

pub fn encode_pitch(chroma: &[f64], threshold: f64) -> Codeword {
    chroma
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .fold(0, |acc, (k, _)| acc | (1 << k))
}

/// Chroma vector of 0/1 salience reproducing `symbol` under any threshold.
pub fn decode_pitch(symbol: Codeword) -> Vec<f64> {
    (0..CHROMA_BINS).map(|k| f64::from((symbol >> k) & 1)).collect()
}

pub fn pitch_codewords(song: &SongRecord, config: &CodecConfig) -> Result<CodewordSequence> {
    require_segments(song, Feature::Pitch)?;
    Ok(CodewordSequence {
        feature: Feature::Pitch,
        symbols: song.segments.iter().map(|s| encode_pitch(&s.pitches, config.pitch_threshold)).collect(),
        alphabet_hint: Some(PITCH_ALPHABET),
    })
}

/// Packs trits least-significant first.
pub fn pack_trits(trits: &[u32]) -> Codeword {
    trits.iter().rev().fold(0, |acc, &t| acc * 3 + t)
}

pub fn unpack_trits(mut symbol: Codeword) -> [u32; TIMBRE_USED] {
    let mut trits = [0; TIMBRE_USED];
    for t in trits.iter_mut() {
        *t = symbol % 3;
        symbol /= 3;
    }
    trits
}

pub fn encode_timbre(timbre: &[f64], calibration: &TimbreCalibration, config: &CodecConfig) -> Codeword {
    let mut trits = [0; TIMBRE_USED];
    for (i, c) in config.timbre_components().enumerate() {
        trits[i] = calibration.trit(i, timbre[c]);
    }
    pack_trits(&trits)
}

/// A timbre vector that encodes to `symbol`. Each used component is placed
/// strictly inside its bin; the dropped component is set to `fill`.
pub fn decode_timbre(
    symbol: Codeword,
    calibration: &TimbreCalibration,
    config: &CodecConfig,
    fill: f64,
) -> Result<Vec<f64>> {
    if symbol >= TIMBRE_ALPHABET {
        return Err(Error::Spec(format!("timbre symbol {symbol} exceeds alphabet")));
    }
    let trits = unpack_trits(symbol);
    let mut v = vec![fill; TIMBRE_DIMS];
    for (i, c) in config.timbre_components().enumerate() {
        let (lo, hi) = (calibration.lower[i], calibration.upper[i]);
        v[c] = match trits[i] {
            0 => lo - 1.0,
            1 if lo < hi => 0.5 * (lo + hi),
            1 => return Err(Error::Spec(format!("component {i} has an empty middle bin"))),
            _ => hi + 1.0,
        };
    }
    Ok(v)
}

pub fn timbre_codewords(
    song: &SongRecord,
    calibration: &TimbreCalibration,
    config: &CodecConfig,
) -> Result<CodewordSequence> {
    require_segments(song, Feature::Timbre)?;
    Ok(CodewordSequence {
        feature: Feature::Timbre,
        symbols: song.segments.iter().map(|s| encode_timbre(&s.timbre, calibration, config)).collect(),
        alphabet_hint: Some(TIMBRE_ALPHABET),
    })
}

pub fn loudness_raw_bin(loudness_max: f64, width: f64) -> i64 {
    (loudness_max / width).floor() as i64
}

pub fn encode_loudness(loudness_max: f64, config: &CodecConfig) -> Codeword {
    let raw = loudness_raw_bin(loudness_max, config.loudness_bin_width);
    (raw - i64::from(config.loudness_min_bin)).clamp(0, i64::from(u32::MAX)) as Codeword
}

/// Bin centre for `symbol`.
pub fn decode_loudness(symbol: Codeword, config: &CodecConfig) -> f64 {
    let raw = i64::from(symbol) + i64::from(config.loudness_min_bin);
    (raw as f64 + 0.5) * config.loudness_bin_width
}

pub fn loudness_codewords(song: &SongRecord, config: &CodecConfig) -> Result<CodewordSequence> {
    require_segments(song, Feature::Loudness)?;
    Ok(CodewordSequence {
        feature: Feature::Loudness,
        symbols: song.segments.iter().map(|s| encode_loudness(s.loudness_max, config)).collect(),
        alphabet_hint: None,
    })
}

/// Duration of a sixteenth note in seconds.
pub fn sixteenth_seconds(tempo: f64) -> f64 {
    60.0 / (tempo * 4.0)
}

pub fn rhythm_codewords(song: &SongRecord, config: &CodecConfig) -> Result<CodewordSequence> {
    let unavailable = |reason: &str| Error::FeatureUnavailable { feature: Feature::Rhythm, reason: reason.into() };
    if song.tempo.is_nan() || song.tempo <= 0.0 {
        return Err(unavailable("tempo is zero"));
    }
    if song.segments.len() < 2 {
        return Err(unavailable("fewer than two segments"));
    }
    let grid = sixteenth_seconds(song.tempo);
    let cap = f64::from(config.rhythm_cap);
    let symbols = song
        .segments
        .windows(2)
        .map(|w| ((w[1].start - w[0].start) / grid).round().clamp(0.0, cap) as Codeword)
        .collect();
    Ok(CodewordSequence { feature: Feature::Rhythm, symbols, alphabet_hint: Some(config.rhythm_cap + 1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Term;
    use proptest::prelude::*;

    fn seg(start: f64, loudness_max: f64, pitches: Vec<f64>, timbre: Vec<f64>) -> Segment {
        Segment { start, loudness_max, pitches, timbre }
    }

    fn song_with(segments: Vec<Segment>, tempo: f64) -> SongRecord {
        SongRecord {
            id: "s".into(),
            title: "t".into(),
            artist: "a".into(),
            year: Some(1990),
            duration: Some(10.0),
            tempo,
            time_signature: 4,
            terms: vec![Term { term: "rock".into(), weight: 1.0 }],
            segments,
            hot100: false,
        }
    }

    fn flat_song(n: usize) -> SongRecord {
        song_with((0..n).map(|i| seg(i as f64 * 0.5, -10.0, vec![0.0; 12], vec![0.0; 12])).collect(), 120.0)
    }

    #[test]
    fn pitch_encoding_cases() {
        assert_eq!(encode_pitch(&[0.0; 12], 0.5), 0);
        assert_eq!(encode_pitch(&[1.0; 12], 0.5), 4095);
        let mut chroma = vec![0.0; 12];
        chroma[0] = 1.0;
        chroma[1] = 0.2;
        chroma[2] = 0.6;
        assert_eq!(encode_pitch(&chroma, 0.5), 5);
    }

    #[test]
    fn empty_song_errors() {
        let s = flat_song(0);
        let c = CodecConfig::default();
        assert!(matches!(pitch_codewords(&s, &c), Err(Error::EmptySequence(Feature::Pitch))));
        assert!(matches!(loudness_codewords(&s, &c), Err(Error::EmptySequence(Feature::Loudness))));
        let cal = TimbreCalibration::new(vec![0.0; 11], vec![1.0; 11], 0).unwrap();
        assert!(matches!(timbre_codewords(&s, &cal, &c), Err(Error::EmptySequence(Feature::Timbre))));
    }

    #[test]
    fn calibration_nearest_rank() {
        // component 1 (first used) takes values 1..=9 across nine segments
        let segs = (1..=9)
            .map(|v| {
                let mut t = vec![0.0; 12];
                t[1] = v as f64;
                seg(v as f64, -5.0, vec![0.0; 12], t)
            })
            .collect();
        let cal = calibrate_timbre(&[song_with(segs, 120.0)], &CodecConfig::default()).unwrap();
        assert_eq!(cal.lower[0], 3.0);
        assert_eq!(cal.upper[0], 6.0);
        // constant components collapse to a single threshold
        assert_eq!(cal.lower[3], 0.0);
        assert_eq!(cal.upper[3], 0.0);
        assert_eq!(cal.trit(3, 0.0), 2);
        assert_eq!(cal.trit(3, -1.0), 0);
    }

    #[test]
    fn calibration_is_order_independent() {
        let mk = |vals: &[f64]| {
            song_with(
                vals.iter()
                    .enumerate()
                    .map(|(i, &v)| seg(i as f64, -5.0, vec![0.0; 12], vec![v; 12]))
                    .collect(),
                120.0,
            )
        };
        let a = mk(&[5.0, 1.0, 7.0]);
        let b = mk(&[2.0, 9.0]);
        let joined = mk(&[5.0, 1.0, 7.0, 2.0, 9.0]);
        let c = CodecConfig::default();
        let ab = calibrate_timbre(&[a.clone(), b.clone()], &c).unwrap();
        assert_eq!(ab, calibrate_timbre(&[b, a], &c).unwrap());
        assert_eq!(ab, calibrate_timbre(&[joined], &c).unwrap());
    }

    #[test]
    fn calibration_needs_segments() {
        assert!(matches!(calibrate_timbre(&[], &CodecConfig::default()), Err(Error::Calibration(_))));
    }

    #[test]
    fn timbre_packing() {
        let cal = TimbreCalibration::new(vec![0.0; 11], vec![1.0; 11], 0).unwrap();
        let c = CodecConfig::default();
        assert_eq!(encode_timbre(&[-1.0; 12], &cal, &c), 0);
        assert_eq!(encode_timbre(&[5.0; 12], &cal, &c), TIMBRE_ALPHABET - 1);
        let mut v = vec![-1.0; 12];
        v[0] = 0.5; // dropped component is ignored
        assert_eq!(encode_timbre(&v, &cal, &c), 0);
        v[1] = 0.5;
        assert_eq!(encode_timbre(&v, &cal, &c), 1);
    }

    #[test]
    fn loudness_bins() {
        assert_eq!(loudness_raw_bin(0.0, 5.0), 0);
        assert_eq!(loudness_raw_bin(-7.3, 5.0), -2);
        assert_eq!(loudness_raw_bin(-30.0, 5.0), -6);
        let c = CodecConfig::default();
        assert_eq!(encode_loudness(-7.3, &c), 18);
        assert_eq!(encode_loudness(-500.0, &c), 0);
    }

    #[test]
    fn rhythm_cases() {
        let c = CodecConfig::default();
        let mk = |gap: f64| song_with(vec![seg(0.0, 0.0, vec![0.0; 12], vec![0.0; 12]), seg(gap, 0.0, vec![0.0; 12], vec![0.0; 12])], 120.0);
        assert_eq!(rhythm_codewords(&mk(0.5), &c).unwrap().symbols, [4]);
        assert_eq!(rhythm_codewords(&mk(0.0), &c).unwrap().symbols, [0]);
        assert_eq!(rhythm_codewords(&mk(100.0), &c).unwrap().symbols, [64]);
        // 0.0625 s is half a sixteenth at 120 bpm; half rounds away from zero
        assert_eq!(rhythm_codewords(&mk(0.0625), &c).unwrap().symbols, [1]);
        let mut zero_tempo = mk(0.5);
        zero_tempo.tempo = 0.0;
        assert!(matches!(rhythm_codewords(&zero_tempo, &c), Err(Error::FeatureUnavailable { .. })));
        assert!(matches!(rhythm_codewords(&flat_song(1), &c), Err(Error::FeatureUnavailable { .. })));
    }

    #[test]
    fn sequence_lengths() {
        let s = flat_song(7);
        let c = CodecConfig::default();
        assert_eq!(pitch_codewords(&s, &c).unwrap().len(), 7);
        assert_eq!(loudness_codewords(&s, &c).unwrap().len(), 7);
        assert_eq!(rhythm_codewords(&s, &c).unwrap().len(), 6);
    }

    #[test]
    fn config_validation() {
        assert!(CodecConfig::default().validate().is_ok());
        assert!(CodecConfig { pitch_threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(CodecConfig { rhythm_cap: 0, ..Default::default() }.validate().is_err());
        assert!(CodecConfig { timbre_drop_component: 12, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn pitch_roundtrip(symbol in 0u32..PITCH_ALPHABET, threshold in 0.01f64..=1.0) {
            prop_assert_eq!(encode_pitch(&decode_pitch(symbol), threshold), symbol);
        }

        #[test]
        fn timbre_roundtrip(symbol in 0u32..TIMBRE_ALPHABET, drop in 0usize..12) {
            let c = CodecConfig { timbre_drop_component: drop, ..Default::default() };
            let cal = TimbreCalibration::new(vec![-2.0; 11], vec![3.0; 11], drop).unwrap();
            let v = decode_timbre(symbol, &cal, &c, 0.0).unwrap();
            prop_assert_eq!(encode_timbre(&v, &cal, &c), symbol);
        }

        #[test]
        fn loudness_roundtrip(symbol in 0u32..40, width in 0.5f64..10.0) {
            let c = CodecConfig { loudness_bin_width: width, ..Default::default() };
            prop_assert_eq!(encode_loudness(decode_loudness(symbol, &c), &c), symbol);
        }

        #[test]
        fn pitch_scaling_on_same_side(bits in 0u32..PITCH_ALPHABET, hi in 0.6f64..1.0, lo in 0.0f64..0.4, scale in 0.85f64..1.0) {
            let chroma: Vec<f64> = (0..12).map(|k| if (bits >> k) & 1 == 1 { hi } else { lo }).collect();
            let scaled: Vec<f64> = chroma.iter().map(|v| v * scale).collect();
            // hi*scale >= 0.51 and lo*scale < 0.4 keep every bin on its side of 0.5
            prop_assert_eq!(encode_pitch(&chroma, 0.5), encode_pitch(&scaled, 0.5));
        }
    }
}
