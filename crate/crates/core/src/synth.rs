//! Synthetic corpora with planted, analytically known complexity.
//!
//! Generators emit codewords directly; segment features are then built with
//! the codec decoders so that re-encoding recovers exactly the planted
//! symbols. Timbre is decoded against a fixed planted calibration (every
//! component split at 0 and 1), which must also be used when analysing the
//! corpus.

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{
    decode_loudness, decode_pitch, decode_timbre, sixteenth_seconds, CodecConfig, Codeword, Feature,
    TimbreCalibration, PITCH_ALPHABET, TIMBRE_ALPHABET, TIMBRE_USED,
};
use crate::corpus::{Segment, SongRecord, Term};
use crate::error::{Error, Result};
use crate::stats::stream_rng;

/// How one feature's codeword stream is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Generator {
    /// Repeats `cycle` forever; conditional entropy 0 as long as no symbol
    /// repeats inside the cycle.
    Deterministic { cycle: Vec<Codeword> },
    /// Stationary Markov chain over states `0..n`, state `i` emitting
    /// `symbols[i]` (identity when empty).
    Markov {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        symbols: Vec<Codeword>,
    },
    /// Independent draws from `probs` over states `0..n`.
    Iid {
        probs: Vec<f64>,
        #[serde(default)]
        symbols: Vec<Codeword>,
    },
    /// Independent draws over `alphabet` states from a distribution whose
    /// entropy is set per song to
    /// `bits + slope_per_year * (year - year_range.0) + genre offset + jitter`,
    /// clamped to `[0, log2 alphabet]`. The jitter is normal with standard
    /// deviation `jitter_sd` (scaled by `hot100_spread` for charting songs).
    Entropy {
        alphabet: usize,
        bits: f64,
        #[serde(default)]
        slope_per_year: f64,
        #[serde(default)]
        jitter_sd: f64,
    },
}

impl Generator {
    fn states(&self) -> usize {
        match self {
            Generator::Deterministic { cycle } => cycle.len(),
            Generator::Markov { matrix, .. } => matrix.len(),
            Generator::Iid { probs, .. } => probs.len(),
            Generator::Entropy { alphabet, .. } => *alphabet,
        }
    }

    fn symbol_map(&self) -> Vec<Codeword> {
        let explicit = match self {
            Generator::Deterministic { cycle } => return cycle.clone(),
            Generator::Markov { symbols, .. } | Generator::Iid { symbols, .. } => symbols,
            Generator::Entropy { .. } => return (0..self.states() as Codeword).collect(),
        };
        if explicit.is_empty() {
            (0..self.states() as Codeword).collect()
        } else {
            explicit.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenrePlan {
    pub label: String,
    /// Relative share of songs.
    pub weight: f64,
    /// Added to the target bits of `Entropy` generators, per feature in
    /// pitch, loudness, timbre, rhythm order.
    #[serde(default)]
    pub offsets: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_songs: usize,
    pub segments_per_song: usize,
    /// Inclusive year range.
    pub year_range: (i32, i32),
    pub pitch: Generator,
    pub loudness: Generator,
    pub timbre: Generator,
    pub rhythm: Generator,
    pub hot100_fraction: f64,
    /// Multiplier on the entropy jitter of charting songs.
    #[serde(default = "one")]
    pub hot100_spread: f64,
    pub genres: Vec<GenrePlan>,
    #[serde(default = "default_tempo")]
    pub tempo: f64,
    #[serde(default)]
    pub codec: CodecConfig,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn default_tempo() -> f64 {
    120.0
}

impl Default for SynthSpec {
    fn default() -> Self {
        let entropy = |alphabet, bits| Generator::Entropy { alphabet, bits, slope_per_year: 0.0, jitter_sd: 0.15 };
        Self {
            n_songs: 1000,
            segments_per_song: 200,
            year_range: (1960, 2010),
            pitch: entropy(16, 2.5),
            loudness: entropy(8, 2.0),
            timbre: entropy(8, 1.0),
            rhythm: entropy(8, 1.8),
            hot100_fraction: 0.1,
            hot100_spread: 1.0,
            genres: ["electronic", "jazz", "rock"]
                .iter()
                .map(|l| GenrePlan { label: l.to_string(), weight: 1.0, offsets: [0.0; 4] })
                .collect(),
            tempo: default_tempo(),
            codec: CodecConfig::default(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn generator(&self, feature: Feature) -> &Generator {
        match feature {
            Feature::Pitch => &self.pitch,
            Feature::Loudness => &self.loudness,
            Feature::Timbre => &self.timbre,
            Feature::Rhythm => &self.rhythm,
        }
    }

    /// Checks probabilities and that every planted symbol is encodable.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Spec(m));
        self.codec.validate()?;
        if self.segments_per_song < 2 {
            return err("segments_per_song must be >= 2".into());
        }
        if self.year_range.0 > self.year_range.1 {
            return err("empty year range".into());
        }
        if !(0.0..=1.0).contains(&self.hot100_fraction) {
            return err("hot100_fraction must lie in [0,1]".into());
        }
        if self.tempo.is_nan() || self.tempo <= 0.0 {
            return err("tempo must be > 0".into());
        }
        if self.genres.is_empty() || self.genres.iter().any(|g| g.weight.is_nan() || g.weight < 0.0) || self.genres.iter().all(|g| g.weight == 0.0) {
            return err("genre plan needs at least one positive weight".into());
        }
        for f in Feature::ALL {
            let g = self.generator(f);
            if g.states() == 0 {
                return err(format!("{f} generator has no states"));
            }
            match g {
                Generator::Markov { matrix, .. } => check_stochastic(matrix)?,
                Generator::Iid { probs, .. } => check_probs(probs)?,
                Generator::Entropy { alphabet, bits, .. } => {
                    if !(bits.is_finite() && *bits >= 0.0 && *bits <= (*alphabet as f64).log2() + 1e-12) {
                        return err(format!("{f} target {bits} bits not reachable with {alphabet} symbols"));
                    }
                }
                Generator::Deterministic { .. } => {}
            }
            let map = g.symbol_map();
            if map.len() != g.states() {
                return err(format!("{f} symbol map has {} entries for {} states", map.len(), g.states()));
            }
            let bound = match f {
                Feature::Pitch => PITCH_ALPHABET,
                Feature::Timbre => TIMBRE_ALPHABET,
                Feature::Rhythm => self.codec.rhythm_cap + 1,
                Feature::Loudness => u32::MAX,
            };
            if let Some(s) = map.iter().find(|&&s| s >= bound) {
                return err(format!("{f} symbol {s} outside the codec alphabet"));
            }
        }
        Ok(())
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Spec(format!("invalid probability vector {probs:?}")));
    }
    Ok(())
}

fn check_stochastic(matrix: &[Vec<f64>]) -> Result<()> {
    let n = matrix.len();
    for row in matrix {
        if row.len() != n {
            return Err(Error::Spec("transition matrix must be square".into()));
        }
        check_probs(row)?;
    }
    Ok(())
}

fn entropy_bits(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

/// Strong connectivity of the positive-entry graph.
fn is_irreducible(matrix: &[Vec<f64>]) -> bool {
    let n = matrix.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { matrix[i][j] } else { matrix[j][i] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary distribution of an irreducible row-stochastic matrix, from
/// `π P = π, Σ π = 1` by Gaussian elimination.
pub fn stationary_distribution(matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_stochastic(matrix)?;
    if matrix.is_empty() {
        return Err(Error::Spec("empty transition matrix".into()));
    }
    if !is_irreducible(matrix) {
        return Err(Error::Reducible);
    }
    let n = matrix.len();
    // rows: (P^T - I) with the last equation replaced by Σ π = 1
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| matrix[j][i] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        for row in 0..n {
            if row != col {
                let factor = a[row][col] / p;
                if factor != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                        *x -= factor * p;
                    }
                }
            }
        }
    }
    Ok((0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect())
}

/// `Σ_x π(x) H(P[x, ·])` for an irreducible chain.
pub fn analytic_conditional_entropy(matrix: &[Vec<f64>]) -> Result<f64> {
    let pi = stationary_distribution(matrix)?;
    Ok(pi.iter().zip(matrix).map(|(p, row)| p * entropy_bits(row)).sum())
}

/// Distribution over `alphabet` states with the given entropy: one state at
/// `t + (1 - t)/K`, the others at `(1 - t)/K`, with `t` found by bisection.
pub fn distribution_with_entropy(alphabet: usize, bits: f64) -> Vec<f64> {
    let k = alphabet as f64;
    let make = |t: f64| {
        let rest = (1.0 - t) / k;
        let mut p = vec![rest; alphabet];
        p[0] = t + rest;
        p
    };
    if alphabet == 1 || bits <= 0.0 {
        return make(1.0);
    }
    if bits >= k.log2() {
        return make(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if entropy_bits(&make(mid)) > bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    make(0.5 * (lo + hi))
}

fn sample_index<R: Rng>(rng: &mut R, cumulative: &[f64]) -> usize {
    let u: f64 = rng.random();
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

/// Draws `len` states from a Markov chain started at stationarity.
pub fn sample_markov<R: Rng>(rng: &mut R, matrix: &[Vec<f64>], len: usize) -> Result<Vec<usize>> {
    let pi = stationary_distribution(matrix)?;
    let rows: Vec<Vec<f64>> = matrix.iter().map(|r| cumulative(r)).collect();
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return Ok(out);
    }
    let mut state = sample_index(rng, &cumulative(&pi));
    out.push(state);
    for _ in 1..len {
        state = sample_index(rng, &rows[state]);
        out.push(state);
    }
    Ok(out)
}

pub fn sample_iid<R: Rng>(rng: &mut R, probs: &[f64], len: usize) -> Vec<usize> {
    let c = cumulative(probs);
    (0..len).map(|_| sample_index(rng, &c)).collect()
}

/// Ground truth for one generated song.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSong {
    pub id: String,
    pub year: i32,
    pub genre: String,
    pub hot100: bool,
    /// Analytic conditional entropy of each feature's generator, in pitch,
    /// loudness, timbre, rhythm order.
    pub planted_bits: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub calibration: TimbreCalibration,
    pub songs: Vec<PlantedSong>,
}

/// The timbre calibration synthetic corpora are decoded against.
pub fn planted_calibration(codec: &CodecConfig) -> TimbreCalibration {
    TimbreCalibration::new(vec![0.0; TIMBRE_USED], vec![1.0; TIMBRE_USED], codec.timbre_drop_component)
        .expect("fixed thresholds are valid")
}

struct FeatureDraw {
    symbols: Vec<Codeword>,
    bits: f64,
}

fn draw_feature<R: Rng>(
    rng: &mut R,
    spec: &SynthSpec,
    feature: Feature,
    len: usize,
    year: i32,
    offset: f64,
    spread: f64,
) -> Result<FeatureDraw> {
    let g = spec.generator(feature);
    let map = g.symbol_map();
    let (states, bits) = match g {
        Generator::Deterministic { cycle } => ((0..len).map(|i| i % cycle.len()).collect(), 0.0),
        Generator::Markov { matrix, .. } => (sample_markov(rng, matrix, len)?, analytic_conditional_entropy(matrix)?),
        Generator::Iid { probs, .. } => (sample_iid(rng, probs, len), entropy_bits(probs)),
        Generator::Entropy { alphabet, bits, slope_per_year, jitter_sd } => {
            let z: f64 = StandardNormal.sample(rng);
            let target = (bits
                + slope_per_year * f64::from(year - spec.year_range.0)
                + offset
                + jitter_sd * spread * z)
                .clamp(0.0, (*alphabet as f64).log2());
            let probs = distribution_with_entropy(*alphabet, target);
            (sample_iid(rng, &probs, len), entropy_bits(&probs))
        }
    };
    Ok(FeatureDraw { symbols: states.into_iter().map(|s| map[s]).collect(), bits })
}

fn generate_song(spec: &SynthSpec, index: usize, calibration: &TimbreCalibration) -> Result<(SongRecord, PlantedSong)> {
    let mut rng = stream_rng(spec.seed, index as u64);
    let year = rng.random_range(spec.year_range.0..=spec.year_range.1);
    let total_weight: f64 = spec.genres.iter().map(|g| g.weight).sum();
    let genre_probs: Vec<f64> = spec.genres.iter().map(|g| g.weight / total_weight).collect();
    let genre = &spec.genres[sample_index(&mut rng, &cumulative(&genre_probs))];
    let hot100 = rng.random::<f64>() < spec.hot100_fraction;
    let spread = if hot100 { spec.hot100_spread } else { 1.0 };

    let n = spec.segments_per_song;
    let mut draws = Vec::with_capacity(4);
    for f in Feature::ALL {
        let len = if f == Feature::Rhythm { n - 1 } else { n };
        draws.push(draw_feature(&mut rng, spec, f, len, year, genre.offsets[f.index()], spread)?);
    }
    let grid = sixteenth_seconds(spec.tempo);
    let mut start = 0.0;
    let mut segments = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            start += f64::from(draws[3].symbols[i - 1]) * grid;
        }
        segments.push(Segment {
            start,
            loudness_max: decode_loudness(draws[1].symbols[i], &spec.codec),
            pitches: decode_pitch(draws[0].symbols[i]),
            timbre: decode_timbre(draws[2].symbols[i], calibration, &spec.codec, 0.0)?,
        });
    }
    let id = format!("synth-{index:07}");
    let song = SongRecord {
        id: id.clone(),
        title: format!("Synthetic Song {index}"),
        artist: format!("Synthetic Artist {index}"),
        year: Some(year),
        duration: Some(start + 1.0),
        tempo: spec.tempo,
        time_signature: 4,
        terms: vec![Term { term: genre.label.clone(), weight: 1.0 }],
        segments,
        hot100,
    };
    let planted = PlantedSong {
        id,
        year,
        genre: genre.label.clone(),
        hot100,
        planted_bits: std::array::from_fn(|i| draws[i].bits),
    };
    Ok((song, planted))
}

/// Generates the corpus and its ground-truth manifest. Identical specs give
/// identical output.
pub fn generate_corpus(spec: &SynthSpec) -> Result<(Vec<SongRecord>, GroundTruth)> {
    let mut songs = Vec::with_capacity(spec.n_songs);
    let truth = generate_chunked(spec, |chunk| {
        songs.extend(chunk);
        Ok(())
    })?;
    Ok((songs, truth))
}

/// Streams the corpus as JSONL into `writer`, holding at most one batch of
/// songs in memory. Output is identical to serializing [`generate_corpus`].
pub fn write_generated_corpus<W: std::io::Write>(spec: &SynthSpec, mut writer: W) -> Result<GroundTruth> {
    let truth = generate_chunked(spec, |chunk| crate::corpus::write_corpus(&mut writer, &chunk))?;
    writer.flush()?;
    Ok(truth)
}

fn generate_chunked<F>(spec: &SynthSpec, mut sink: F) -> Result<GroundTruth>
where
    F: FnMut(Vec<SongRecord>) -> Result<()>,
{
    spec.validate()?;
    let calibration = planted_calibration(&spec.codec);
    let mut planted = Vec::with_capacity(spec.n_songs);
    let mut start = 0;
    while start < spec.n_songs {
        let end = (start + crate::corpus::CHUNK_RECORDS).min(spec.n_songs);
        let pairs: Vec<(SongRecord, PlantedSong)> =
            (start..end).into_par_iter().map(|i| generate_song(spec, i, &calibration)).collect::<Result<_>>()?;
        let (songs, truth): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        planted.extend(truth);
        sink(songs)?;
        start = end;
    }
    Ok(GroundTruth { spec: spec.clone(), calibration, songs: planted })
}
