//! Transition models, entropies and KL divergence over codewords. All
//! logarithms are base 2.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::codec::{
    loudness_codewords, pitch_codewords, rhythm_codewords, timbre_codewords, CodecConfig, Codeword,
    CodewordSequence, Feature, TimbreCalibration,
};
use crate::corpus::SongRecord;
use crate::error::{Error, Result};

/// First-order transition counts of a codeword sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionModel {
    pub pair_counts: BTreeMap<(Codeword, Codeword), u64>,
    pub source_counts: BTreeMap<Codeword, u64>,
    pub total: u64,
}

impl TransitionModel {
    pub fn from_symbols(symbols: &[Codeword]) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "transition model needs at least 2 symbols, got {}",
                symbols.len()
            )));
        }
        let mut model = TransitionModel::default();
        for w in symbols.windows(2) {
            *model.pair_counts.entry((w[0], w[1])).or_insert(0) += 1;
            *model.source_counts.entry(w[0]).or_insert(0) += 1;
            model.total += 1;
        }
        Ok(model)
    }

    /// Pairwise count addition.
    pub fn merge(mut self, other: &TransitionModel) -> TransitionModel {
        for (&k, &c) in &other.pair_counts {
            *self.pair_counts.entry(k).or_insert(0) += c;
        }
        for (&k, &c) in &other.source_counts {
            *self.source_counts.entry(k).or_insert(0) += c;
        }
        self.total += other.total;
        self
    }

    /// Empirical distribution of the successor symbol.
    pub fn target_distribution(&self) -> Distribution {
        let mut d = Distribution::default();
        for (&(_, y), &c) in &self.pair_counts {
            d.add(y, c as f64);
        }
        d
    }
}

pub fn transition_model(seq: &CodewordSequence) -> Result<TransitionModel> {
    TransitionModel::from_symbols(&seq.symbols)
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// `H(Y|X) = -Σ_x p(x) Σ_y p(y|x) log2 p(y|x)` in bits.
pub fn conditional_entropy(model: &TransitionModel) -> Result<f64> {
    if model.total == 0 {
        return Err(Error::InsufficientData("empty transition model".into()));
    }
    let total = model.total as f64;
    let mut h = 0.0;
    let mut pairs = model.pair_counts.iter().peekable();
    for (&x, &cx) in &model.source_counts {
        let cx = cx as f64;
        let mut inner = 0.0;
        while let Some((&(px, _), &cxy)) = pairs.peek() {
            if px != x {
                break;
            }
            let p = cxy as f64 / cx;
            inner -= xlog2x(p);
            pairs.next();
        }
        h += (cx / total) * inner;
    }
    Ok(h.max(0.0))
}

/// Conditional entropy of a symbol slice, `None` when it has fewer than two
/// symbols.
pub fn sequence_complexity(symbols: &[Codeword]) -> Option<f64> {
    TransitionModel::from_symbols(symbols).ok().and_then(|m| conditional_entropy(&m).ok())
}

/// Categorical distribution kept as non-negative masses plus their total,
/// so it can be re-estimated with pseudo-counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Distribution {
    counts: BTreeMap<Codeword, f64>,
    total: f64,
}

impl Distribution {
    /// From observation counts; zero entries are dropped.
    pub fn from_counts<I: IntoIterator<Item = (Codeword, f64)>>(counts: I) -> Result<Self> {
        let mut d = Distribution::default();
        for (k, c) in counts {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidArgument(format!("invalid mass {c} for symbol {k}")));
            }
            d.add(k, c);
        }
        if d.total <= 0.0 {
            return Err(Error::InsufficientData("distribution has no mass".into()));
        }
        Ok(d)
    }

    /// From probabilities that sum to one; the total mass is taken as 1.
    pub fn from_probs<I: IntoIterator<Item = (Codeword, f64)>>(probs: I) -> Result<Self> {
        let d = Self::from_counts(probs)?;
        if (d.total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {}", d.total)));
        }
        Ok(d)
    }

    fn add(&mut self, k: Codeword, c: f64) {
        if c > 0.0 {
            *self.counts.entry(k).or_insert(0.0) += c;
            self.total += c;
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn support(&self) -> impl Iterator<Item = Codeword> + '_ {
        self.counts.keys().copied()
    }

    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, k: Codeword) -> f64 {
        self.counts.get(&k).copied().unwrap_or(0.0)
    }

    pub fn prob(&self, k: Codeword) -> f64 {
        self.count(k) / self.total
    }

    pub fn probs(&self) -> impl Iterator<Item = (Codeword, f64)> + '_ {
        self.counts.iter().map(move |(&k, &c)| (k, c / self.total))
    }
}

pub fn shannon_entropy(dist: &Distribution) -> f64 {
    -dist.probs().map(|(_, p)| xlog2x(p)).sum::<f64>()
}

/// Pooled symbol frequencies over all sequences.
pub fn codeword_distribution(seqs: &[&CodewordSequence]) -> Result<Distribution> {
    let mut d = Distribution::default();
    for s in seqs {
        for &sym in &s.symbols {
            d.add(sym, 1.0);
        }
    }
    if d.total == 0.0 {
        return Err(Error::InsufficientData("all sequences are empty".into()));
    }
    Ok(d)
}

/// `KL(p || q)` in bits after adding `alpha` to every symbol of the union
/// support of `p` and `q`.
pub fn kl_divergence(p: &Distribution, q: &Distribution, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("smoothing must be >= 0, got {alpha}")));
    }
    let mut support: Vec<Codeword> = p.support().chain(q.support()).collect();
    support.sort_unstable();
    support.dedup();
    let k = support.len() as f64;
    let p_norm = p.total + alpha * k;
    let q_norm = q.total + alpha * k;
    let mut kl = 0.0;
    for sym in support {
        let ps = (p.count(sym) + alpha) / p_norm;
        if ps == 0.0 {
            continue;
        }
        let qs = (q.count(sym) + alpha) / q_norm;
        if qs == 0.0 {
            return Err(Error::DivergenceUndefined(sym));
        }
        kl += ps * (ps / qs).log2();
    }
    Ok(kl.max(0.0))
}

/// Largest KL that additive smoothing alone can produce between two
/// distributions with identical proportions over `support` symbols but total
/// masses `p_total` and `q_total`.
///
/// The smoothed ratio `p̃/q̃` is monotone in the shared proportion, so its
/// extremes sit at proportion 0 and 1; KL never exceeds the log of the
/// largest ratio.
pub fn kl_smoothing_bound(p_total: f64, q_total: f64, support: usize, alpha: f64) -> f64 {
    let k = support as f64;
    let at_zero = (q_total + alpha * k) / (p_total + alpha * k);
    let at_one = (p_total + alpha) * (q_total + alpha * k) / ((q_total + alpha) * (p_total + alpha * k));
    at_zero.max(at_one).max(1.0).log2()
}

/// Conditional entropies of one song's four codeword streams. A feature whose
/// codewords cannot be formed, or that has fewer than two symbols, is `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ComplexityProfile {
    pub pitch_bits: Option<f64>,
    pub loudness_bits: Option<f64>,
    pub timbre_bits: Option<f64>,
    pub rhythm_bits: Option<f64>,
}

impl ComplexityProfile {
    pub fn get(&self, feature: Feature) -> Option<f64> {
        match feature {
            Feature::Pitch => self.pitch_bits,
            Feature::Loudness => self.loudness_bits,
            Feature::Timbre => self.timbre_bits,
            Feature::Rhythm => self.rhythm_bits,
        }
    }

    pub fn set(&mut self, feature: Feature, value: Option<f64>) {
        match feature {
            Feature::Pitch => self.pitch_bits = value,
            Feature::Loudness => self.loudness_bits = value,
            Feature::Timbre => self.timbre_bits = value,
            Feature::Rhythm => self.rhythm_bits = value,
        }
    }

    pub fn as_array(&self) -> [Option<f64>; 4] {
        Feature::ALL.map(|f| self.get(f))
    }
}

/// All four codeword streams of a song, `None` where a codec precondition
/// fails.
pub fn song_codewords(
    song: &SongRecord,
    calibration: &TimbreCalibration,
    config: &CodecConfig,
) -> [Option<CodewordSequence>; 4] {
    [
        pitch_codewords(song, config).ok(),
        loudness_codewords(song, config).ok(),
        timbre_codewords(song, calibration, config).ok(),
        rhythm_codewords(song, config).ok(),
    ]
}

pub fn complexity_profile(
    song: &SongRecord,
    calibration: &TimbreCalibration,
    config: &CodecConfig,
) -> ComplexityProfile {
    let streams = song_codewords(song, calibration, config);
    let mut profile = ComplexityProfile::default();
    for (f, seq) in Feature::ALL.into_iter().zip(&streams) {
        profile.set(f, seq.as_ref().and_then(|s| sequence_complexity(&s.symbols)));
    }
    profile
}
