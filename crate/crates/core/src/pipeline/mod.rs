//! Corpus studies: complexity distributions, popularity contrast, epoch
//! trends, contemporary divergence of charting songs, and genre profiles.
//!
//! Each study is a pure function of its inputs and the configured seed;
//! [`commands`] wraps them into file-producing commands.

pub mod commands;
pub mod config;
pub mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{self, ClusterTree, Cut, GenreProfile, Point};
use crate::codec::{CodecConfig, Codeword, Feature, TimbreCalibration};
use crate::corpus::{assign_genre, SongRecord};
use crate::error::{Error, Result};
use crate::infotheory::{
    complexity_profile, kl_divergence, kl_smoothing_bound, song_codewords, ComplexityProfile, Distribution,
};
use crate::stats::{self, ks_two_sample, mean_variance, ols_fit, pearson, resample_statistics, BootstrapOptions, Epoch, Statistic, TrendFit};

pub use config::{Config, EpochSet};

/// splitmix64 finalizer over `seed` and a tag path, giving independent seeds
/// for each bootstrap in a study.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut x = seed;
    for &p in parts {
        x = x.wrapping_add(p.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

const TAG_POPULARITY: u64 = 1;
const TAG_YEARLY: u64 = 2;
const TAG_FIT: u64 = 3;
const TAG_DIVERGENCE: u64 = 4;
const TAG_GENRE: u64 = 5;
const TAG_KS: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SongProfile {
    pub id: String,
    pub year: Option<i32>,
    pub genre: Option<String>,
    pub hot100: bool,
    pub profile: ComplexityProfile,
}

pub fn compute_profiles(songs: &[SongRecord], calibration: &TimbreCalibration, codec: &CodecConfig) -> Vec<SongProfile> {
    songs
        .par_iter()
        .map(|s| SongProfile {
            id: s.id.clone(),
            year: s.year,
            genre: assign_genre(s).map(str::to_string),
            hot100: s.hot100,
            profile: complexity_profile(s, calibration, codec),
        })
        .collect()
}

fn feature_values<'a, I: IntoIterator<Item = &'a SongProfile>>(rows: I, feature: Feature) -> Vec<f64> {
    rows.into_iter().filter_map(|r| r.profile.get(feature)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub feature: Feature,
    pub bin_start: f64,
    pub bin_end: f64,
    pub count_all: usize,
    pub count_hot100: usize,
}

fn bin_index(value: f64, width: f64) -> usize {
    // nudge so values sitting on a boundary land in the bin they open
    ((value / width) + 1e-9).floor().max(0.0) as usize
}

/// Dense histograms from 0 up to the largest observed value.
pub fn histograms(profiles: &[SongProfile], config: &Config) -> Vec<HistogramBin> {
    let mut out = Vec::new();
    for f in Feature::ALL {
        let width = if f == Feature::Timbre { config.timbre_histogram_bin_width } else { config.histogram_bin_width };
        let mut all: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for r in profiles {
            if let Some(v) = r.profile.get(f) {
                let e = all.entry(bin_index(v, width)).or_default();
                e.0 += 1;
                e.1 += r.hot100 as usize;
            }
        }
        let Some(&max) = all.keys().next_back() else { continue };
        for b in 0..=max {
            let (count_all, count_hot100) = all.get(&b).copied().unwrap_or_default();
            out.push(HistogramBin {
                feature: f,
                bin_start: b as f64 * width,
                bin_end: (b + 1) as f64 * width,
                count_all,
                count_hot100,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub profiles: Vec<SongProfile>,
    pub histograms: Vec<HistogramBin>,
}

pub fn run_complexity(songs: &[SongRecord], calibration: &TimbreCalibration, config: &Config) -> Result<ComplexityReport> {
    if songs.is_empty() {
        return Err(Error::InsufficientData("empty corpus".into()));
    }
    let profiles = compute_profiles(songs, calibration, &config.codec);
    let histograms = histograms(&profiles, config);
    Ok(ComplexityReport { profiles, histograms })
}

/// Where a cohort statistic falls relative to a bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Below,
    Inside,
    Above,
}

impl Position {
    pub fn of(x: f64, low: f64, high: f64) -> Self {
        if x < low {
            Position::Below
        } else if x > high {
            Position::Above
        } else {
            Position::Inside
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortComparison {
    pub n_population: usize,
    pub n_cohort: usize,
    pub population_mean: f64,
    pub population_variance: Option<f64>,
    pub cohort_mean: f64,
    pub cohort_variance: Option<f64>,
    pub diff_mean: f64,
    pub diff_variance: Option<f64>,
    /// Interval of the mean over same-size random samples of the population.
    pub mean_ci: (f64, f64),
    pub variance_ci: Option<(f64, f64)>,
    pub mean_position: Position,
    pub variance_position: Option<Position>,
    /// Bootstrap interval of the cohort's own variance.
    pub cohort_variance_ci: Option<(f64, f64)>,
    /// The cohort and population variance intervals do not overlap.
    pub variance_ci_disjoint: Option<bool>,
}

/// Compares a cohort's mean and variance against `n_resamples` random
/// samples of the cohort's size drawn (with replacement) from the
/// population.
pub fn compare_cohort(population: &[f64], cohort: &[f64], n_resamples: usize, level: f64, seed: u64) -> Result<CohortComparison> {
    if population.is_empty() || cohort.is_empty() {
        return Err(Error::InsufficientData("cohort comparison needs non-empty samples".into()));
    }
    let (pm, pv) = mean_variance(population)?;
    let (cm, cv) = mean_variance(cohort)?;
    let n = cohort.len();
    let draws = |stat: Statistic, s: u64| resample_statistics(population, n, n_resamples, s, move |x| stat.compute(x));
    let mean_ci = stats::percentile_interval(draws(Statistic::Mean, seed), level)?;
    let variance_ci = if n > 1 {
        Some(stats::percentile_interval(draws(Statistic::Variance, derive_seed(seed, &[1])), level)?)
    } else {
        None
    };
    let cohort_variance_ci = if n > 1 {
        let d = resample_statistics(cohort, n, n_resamples, derive_seed(seed, &[2]), |x| Statistic::Variance.compute(x));
        Some(stats::percentile_interval(d, level)?)
    } else {
        None
    };
    let variance_ci_disjoint = match (variance_ci, cohort_variance_ci) {
        (Some(p), Some(c)) => Some(c.1 < p.0 || c.0 > p.1),
        _ => None,
    };
    Ok(CohortComparison {
        n_population: population.len(),
        n_cohort: n,
        population_mean: pm,
        population_variance: pv,
        cohort_mean: cm,
        cohort_variance: cv,
        diff_mean: cm - pm,
        diff_variance: cv.zip(pv).map(|(c, p)| c - p),
        mean_ci,
        variance_ci,
        mean_position: Position::of(cm, mean_ci.0, mean_ci.1),
        variance_position: cv.zip(variance_ci).map(|(v, ci)| Position::of(v, ci.0, ci.1)),
        cohort_variance_ci,
        variance_ci_disjoint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopularityRow {
    pub feature: Feature,
    pub comparison: CohortComparison,
}

/// Hot 100 songs against same-size random samples of the whole corpus, per
/// feature.
pub fn run_popularity_comparison(profiles: &[SongProfile], config: &Config, seed: u64) -> Result<Vec<PopularityRow>> {
    if !profiles.iter().any(|r| r.hot100) {
        return Err(Error::InsufficientData("no Hot 100 songs in corpus".into()));
    }
    let mut rows = Vec::new();
    for f in Feature::ALL {
        let all = feature_values(profiles, f);
        let hot = feature_values(profiles.iter().filter(|r| r.hot100), f);
        if hot.is_empty() {
            continue;
        }
        let s = derive_seed(seed, &[TAG_POPULARITY, f.index() as u64]);
        rows.push(PopularityRow { feature: f, comparison: compare_cohort(&all, &hot, config.bootstrap_n, config.ci_level, s)? });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    All,
    Hot100,
}

impl Cohort {
    pub fn name(self) -> &'static str {
        match self {
            Cohort::All => "all",
            Cohort::Hot100 => "hot100",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearlyRow {
    pub year: i32,
    pub cohort: Cohort,
    pub feature: Feature,
    pub count: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub cohort: Cohort,
    pub feature: Feature,
    pub fit: TrendFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub yearly: Vec<YearlyRow>,
    pub fits: Vec<FitRow>,
}

fn yearly_row(year: i32, cohort: Cohort, feature: Feature, values: &[f64], config: &Config, seed: u64) -> Result<YearlyRow> {
    let (mean, _) = mean_variance(values)?;
    let draws = resample_statistics(values, values.len(), config.bootstrap_n, seed, |x| Statistic::Mean.compute(x));
    let (ci_low, ci_high) = stats::percentile_interval(draws, config.ci_level)?;
    Ok(YearlyRow { year, cohort, feature, count: values.len(), mean, ci_low, ci_high })
}

/// Fits every configured epoch that has at least two distinct years of data.
fn epoch_fits(points: &[(i32, f64)], epochs: &[Epoch], options: BootstrapOptions, tag: &[u64]) -> Vec<TrendFit> {
    epochs
        .iter()
        .enumerate()
        .filter_map(|(i, &e)| {
            let mut path = tag.to_vec();
            path.push(i as u64);
            let opts = BootstrapOptions { seed: derive_seed(options.seed, &path), ..options };
            ols_fit(points, e, &opts).ok()
        })
        .collect()
}

/// Yearly means with bootstrap intervals, per cohort and feature, plus OLS
/// trends per epoch fitted over per-song points. Songs without a year are
/// left out.
pub fn run_trends(profiles: &[SongProfile], config: &Config, seed: u64) -> Result<TrendReport> {
    let dated: Vec<&SongProfile> = profiles.iter().filter(|r| r.year.is_some()).collect();
    if dated.is_empty() {
        return Err(Error::InsufficientData("no songs with a year".into()));
    }
    let epochs = config.epochs.fitted();
    let options = BootstrapOptions { n_resamples: config.bootstrap_n, level: config.ci_level, seed };
    let mut yearly = Vec::new();
    let mut fits = Vec::new();
    for cohort in [Cohort::All, Cohort::Hot100] {
        for f in Feature::ALL {
            let points: Vec<(i32, f64)> = dated
                .iter()
                .filter(|r| cohort == Cohort::All || r.hot100)
                .filter_map(|r| r.profile.get(f).map(|v| (r.year.unwrap(), v)))
                .collect();
            let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
            for &(y, v) in &points {
                by_year.entry(y).or_default().push(v);
            }
            for (year, values) in &by_year {
                let s = derive_seed(seed, &[TAG_YEARLY, cohort as u64, f.index() as u64, *year as u64]);
                yearly.push(yearly_row(*year, cohort, f, values, config, s)?);
            }
            for fit in epoch_fits(&points, &epochs, options, &[TAG_FIT, cohort as u64, f.index() as u64]) {
                fits.push(FitRow { cohort, feature: f, fit });
            }
        }
    }
    Ok(TrendReport { yearly, fits })
}

/// KL divergence of every member of a cohort against the pooled codewords
/// of the cohort, with the member itself left out of the pool unless
/// `include_self`. Returns `(kl, smoothing bound)` per member.
pub fn cohort_divergences(members: &[Distribution], alpha: f64, include_self: bool) -> Result<Vec<(f64, f64)>> {
    if members.len() < 2 {
        return Err(Error::InsufficientData("divergence cohort needs at least 2 songs".into()));
    }
    let mut pool: BTreeMap<Codeword, f64> = BTreeMap::new();
    for m in members {
        for (sym, _) in m.probs() {
            *pool.entry(sym).or_insert(0.0) += m.count(sym);
        }
    }
    members
        .iter()
        .map(|m| {
            let others = pool.iter().map(|(&sym, &c)| (sym, if include_self { c } else { c - m.count(sym) }));
            let q = Distribution::from_counts(others.map(|(s, c)| (s, c.max(0.0))))?;
            let mut support: Vec<Codeword> = m.support().chain(q.support()).collect();
            support.sort_unstable();
            support.dedup();
            let kl = kl_divergence(m, &q, alpha)?;
            Ok((kl, kl_smoothing_bound(m.total(), q.total(), support.len(), alpha)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRow {
    pub year: i32,
    pub feature: Feature,
    pub count: usize,
    pub mean_kl: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Largest KL smoothing alone could produce for any song in the year.
    pub smoothing_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SongDivergence {
    pub id: String,
    pub year: i32,
    pub feature: Feature,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub alpha: f64,
    pub yearly: Vec<DivergenceRow>,
    pub fits: Vec<(Feature, TrendFit)>,
    pub songs: Vec<SongDivergence>,
    /// (year, feature) cells skipped for having fewer than two Hot 100 songs.
    pub skipped: usize,
}

/// Same-year divergence of Hot 100 songs.
pub fn run_divergence(songs: &[SongRecord], calibration: &TimbreCalibration, config: &Config, seed: u64) -> Result<DivergenceReport> {
    let mut by_year: BTreeMap<i32, Vec<&SongRecord>> = BTreeMap::new();
    for s in songs.iter().filter(|s| s.hot100) {
        if let Some(y) = s.year {
            by_year.entry(y).or_default().push(s);
        }
    }
    if by_year.is_empty() {
        return Err(Error::InsufficientData("no dated Hot 100 songs".into()));
    }
    let alpha = config.kl_alpha;
    let mut yearly = Vec::new();
    let mut per_song = Vec::new();
    let mut skipped = 0;
    for (&year, members) in &by_year {
        let streams: Vec<_> = members.par_iter().map(|s| song_codewords(s, calibration, &config.codec)).collect();
        for f in Feature::ALL {
            let mut ids = Vec::new();
            let mut dists = Vec::new();
            for (song, st) in members.iter().zip(&streams) {
                if let Some(seq) = st[f.index()].as_ref().filter(|s| !s.is_empty()) {
                    ids.push(&song.id);
                    dists.push(Distribution::from_counts(seq.symbols.iter().map(|&s| (s, 1.0)))?);
                }
            }
            if dists.len() < 2 {
                skipped += 1;
                continue;
            }
            let kls = cohort_divergences(&dists, alpha, false)?;
            let values: Vec<f64> = kls.iter().map(|k| k.0).collect();
            let s = derive_seed(seed, &[TAG_DIVERGENCE, f.index() as u64, year as u64]);
            let row = yearly_row(year, Cohort::Hot100, f, &values, config, s)?;
            yearly.push(DivergenceRow {
                year,
                feature: f,
                count: row.count,
                mean_kl: row.mean,
                ci_low: row.ci_low,
                ci_high: row.ci_high,
                smoothing_epsilon: kls.iter().map(|k| k.1).fold(0.0, f64::max),
            });
            per_song.extend(ids.into_iter().zip(values).map(|(id, kl)| SongDivergence { id: id.clone(), year, feature: f, kl }));
        }
    }
    let epochs = config.epochs.fitted();
    let options = BootstrapOptions { n_resamples: config.bootstrap_n, level: config.ci_level, seed };
    let mut fits = Vec::new();
    for f in Feature::ALL {
        let points: Vec<(i32, f64)> = per_song.iter().filter(|d| d.feature == f).map(|d| (d.year, d.kl)).collect();
        for fit in epoch_fits(&points, &epochs, options, &[TAG_DIVERGENCE, 100, f.index() as u64]) {
            fits.push((f, fit));
        }
    }
    Ok(DivergenceReport { alpha, yearly, fits, songs: per_song, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenreRow {
    pub genre: String,
    pub feature: Feature,
    pub count: usize,
    pub mean: f64,
    pub variance: Option<f64>,
    /// Mean of the means of same-size random samples of all songs.
    pub bootstrap_mean: f64,
    pub deviation: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub position: Position,
    pub ks_d: f64,
    pub ks_p: f64,
    pub community: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub a: Feature,
    pub b: Feature,
    pub n: usize,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    pub profiles: Vec<GenreProfile>,
    /// Points clustered, in leaf order (standardized if configured).
    pub points: Vec<Point>,
    pub tree: ClusterTree,
    pub cut: Cut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenreReport {
    pub rows: Vec<GenreRow>,
    pub correlations: Vec<CorrelationRow>,
    pub clustering: Clustering,
}

/// Pearson correlation between each pair of features over songs where both
/// are present. The diagonal is exactly 1 and the table is symmetric.
pub fn correlation_table(profiles: &[SongProfile]) -> Vec<CorrelationRow> {
    let mut r = [[None; 4]; 4];
    let mut n = [[0usize; 4]; 4];
    for (i, a) in Feature::ALL.into_iter().enumerate() {
        for (j, b) in Feature::ALL.into_iter().enumerate().skip(i) {
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                profiles.iter().filter_map(|p| p.profile.get(a).zip(p.profile.get(b))).unzip();
            n[i][j] = xs.len();
            n[j][i] = xs.len();
            let value = pearson(&xs, &ys).ok().map(|v| if i == j { 1.0 } else { v });
            r[i][j] = value;
            r[j][i] = value;
        }
    }
    let mut out = Vec::with_capacity(16);
    for (i, a) in Feature::ALL.into_iter().enumerate() {
        for (j, b) in Feature::ALL.into_iter().enumerate() {
            out.push(CorrelationRow { a, b, n: n[i][j], r: r[i][j] });
        }
    }
    out
}

/// Agglomerative clustering of genres with more than `min_genre_songs`
/// songs and the silhouette-optimal cut.
pub fn run_cluster(profiles: &[SongProfile], config: &Config) -> Result<Clustering> {
    let genre_profiles = cluster::genre_profiles(
        profiles.iter().filter_map(|p| p.genre.as_deref().map(|g| (g, &p.profile))),
        config.min_genre_songs,
    );
    if genre_profiles.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} genre(s) with more than {} songs; clustering needs 2",
            genre_profiles.len(),
            config.min_genre_songs
        )));
    }
    let tree = cluster::agglomerate(&genre_profiles, config.linkage, config.standardize)?;
    let raw: Vec<Point> = genre_profiles.iter().map(|g| g.mean_profile).collect();
    let points = if config.standardize { cluster::standardize(&raw) } else { raw };
    let n = genre_profiles.len();
    let cut = if n == 2 {
        cluster::cut_tree(&tree, &points, 2..=2)?
    } else {
        let default = cluster::default_k_range(n);
        let lo = config.k_min.unwrap_or(*default.start());
        let hi = config.k_max.unwrap_or(*default.end()).min(n);
        cluster::cut_tree(&tree, &points, lo..=hi)?
    };
    Ok(Clustering { profiles: genre_profiles, points, tree, cut })
}

/// Genre deviation table, KS tests against random samples, feature
/// correlations, and the genre clustering.
pub fn run_genres(profiles: &[SongProfile], config: &Config, seed: u64) -> Result<GenreReport> {
    let clustering = run_cluster(profiles, config)?;
    let community: BTreeMap<&str, usize> = clustering
        .tree
        .leaves
        .iter()
        .zip(&clustering.cut.assignment)
        .map(|(g, &c)| (g.as_str(), c))
        .collect();
    let mut rows = Vec::new();
    for (gi, gp) in clustering.profiles.iter().enumerate() {
        let members: Vec<&SongProfile> = profiles.iter().filter(|p| p.genre.as_deref() == Some(gp.genre.as_str())).collect();
        for f in Feature::ALL {
            let population = feature_values(profiles, f);
            let values = feature_values(members.iter().copied(), f);
            let (mean, variance) = mean_variance(&values)?;
            let n = values.len();
            let s = derive_seed(seed, &[TAG_GENRE, gi as u64, f.index() as u64]);
            let means = resample_statistics(&population, n, config.genre_bootstrap_n, s, |x| Statistic::Mean.compute(x));
            let bootstrap_mean = means.iter().sum::<f64>() / means.len() as f64;
            let (ci_low, ci_high) = stats::percentile_interval(means, config.ci_level)?;
            let mut rng_sample = Vec::with_capacity(n);
            {
                use rand::Rng;
                let mut rng = stats::stream_rng(derive_seed(seed, &[TAG_KS, gi as u64, f.index() as u64]), 0);
                rng_sample.extend((0..n).map(|_| population[rng.random_range(0..population.len())]));
            }
            let ks = ks_two_sample(&values, &rng_sample)?;
            rows.push(GenreRow {
                genre: gp.genre.clone(),
                feature: f,
                count: n,
                mean,
                variance,
                bootstrap_mean,
                deviation: mean - bootstrap_mean,
                ci_low,
                ci_high,
                position: Position::of(mean, ci_low, ci_high),
                ks_d: ks.statistic,
                ks_p: ks.p_value,
                community: community.get(gp.genre.as_str()).copied(),
            });
        }
    }
    Ok(GenreReport { rows, correlations: correlation_table(profiles), clustering })
}
