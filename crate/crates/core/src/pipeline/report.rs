//! File outputs. Every table is CSV with a header row; structured outputs
//! are pretty-printed JSON. Nothing written depends on wall-clock time, so
//! the same inputs and seed give byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{Clustering, ComplexityReport, DivergenceReport, GenreReport, PopularityRow, Position, SongProfile, TrendReport};
use crate::codec::{CodewordSequence, Feature};
use crate::error::Result;

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(dir, name)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ProfileCsv<'a> {
    song_id: &'a str,
    year: Option<i32>,
    genre: Option<&'a str>,
    hot100: bool,
    pitch_bits: Option<f64>,
    loudness_bits: Option<f64>,
    timbre_bits: Option<f64>,
    rhythm_bits: Option<f64>,
}

pub fn write_profiles(dir: &Path, profiles: &[SongProfile]) -> Result<()> {
    write_rows(
        dir,
        "profiles.csv",
        profiles.iter().map(|p| ProfileCsv {
            song_id: &p.id,
            year: p.year,
            genre: p.genre.as_deref(),
            hot100: p.hot100,
            pitch_bits: p.profile.pitch_bits,
            loudness_bits: p.profile.loudness_bits,
            timbre_bits: p.profile.timbre_bits,
            rhythm_bits: p.profile.rhythm_bits,
        }),
    )
}

pub fn write_complexity(dir: &Path, report: &ComplexityReport) -> Result<()> {
    write_profiles(dir, &report.profiles)?;
    write_rows(dir, "histograms.csv", &report.histograms)
}

#[derive(Serialize)]
struct PopularityCsv {
    feature: Feature,
    n_population: usize,
    n_hot100: usize,
    population_mean: f64,
    population_variance: Option<f64>,
    hot100_mean: f64,
    hot100_variance: Option<f64>,
    diff_mean: f64,
    diff_variance: Option<f64>,
    mean_ci_low: f64,
    mean_ci_high: f64,
    variance_ci_low: Option<f64>,
    variance_ci_high: Option<f64>,
    mean_position: Position,
    variance_position: Option<Position>,
    hot100_variance_ci_low: Option<f64>,
    hot100_variance_ci_high: Option<f64>,
    variance_ci_disjoint: Option<bool>,
}

pub fn write_popularity(dir: &Path, rows: &[PopularityRow]) -> Result<()> {
    write_rows(
        dir,
        "popularity.csv",
        rows.iter().map(|r| {
            let c = &r.comparison;
            PopularityCsv {
                feature: r.feature,
                n_population: c.n_population,
                n_hot100: c.n_cohort,
                population_mean: c.population_mean,
                population_variance: c.population_variance,
                hot100_mean: c.cohort_mean,
                hot100_variance: c.cohort_variance,
                diff_mean: c.diff_mean,
                diff_variance: c.diff_variance,
                mean_ci_low: c.mean_ci.0,
                mean_ci_high: c.mean_ci.1,
                variance_ci_low: c.variance_ci.map(|v| v.0),
                variance_ci_high: c.variance_ci.map(|v| v.1),
                mean_position: c.mean_position,
                variance_position: c.variance_position,
                hot100_variance_ci_low: c.cohort_variance_ci.map(|v| v.0),
                hot100_variance_ci_high: c.cohort_variance_ci.map(|v| v.1),
                variance_ci_disjoint: c.variance_ci_disjoint,
            }
        }),
    )
}

#[derive(Serialize)]
struct FitCsv<'a> {
    cohort: &'a str,
    feature: Feature,
    epoch_start: i32,
    epoch_end: i32,
    end_inclusive: bool,
    n_points: usize,
    slope: f64,
    intercept: f64,
    slope_ci_low: f64,
    slope_ci_high: f64,
}

fn fit_csv<'a>(cohort: &'a str, feature: Feature, fit: &crate::stats::TrendFit) -> FitCsv<'a> {
    FitCsv {
        cohort,
        feature,
        epoch_start: fit.epoch.start,
        epoch_end: fit.epoch.end,
        end_inclusive: fit.epoch.closed,
        n_points: fit.n_points,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci_low: fit.slope_ci.0,
        slope_ci_high: fit.slope_ci.1,
    }
}

pub fn write_trends(dir: &Path, report: &TrendReport) -> Result<()> {
    write_rows(dir, "trends.csv", &report.yearly)?;
    write_rows(dir, "trend_fits.csv", report.fits.iter().map(|f| fit_csv(f.cohort.name(), f.feature, &f.fit)))
}

pub fn write_divergence(dir: &Path, report: &DivergenceReport) -> Result<()> {
    write_rows(dir, "divergence.csv", &report.yearly)?;
    write_rows(dir, "divergence_songs.csv", &report.songs)?;
    write_rows(dir, "divergence_fits.csv", report.fits.iter().map(|(f, fit)| fit_csv("hot100", *f, fit)))
}

#[derive(Serialize)]
struct CommunityCsv<'a> {
    genre: &'a str,
    song_count: usize,
    community: usize,
    pitch_bits: f64,
    loudness_bits: f64,
    timbre_bits: f64,
    rhythm_bits: f64,
}

#[derive(Serialize)]
struct SilhouetteCsv {
    k: usize,
    silhouette: f64,
    chosen: bool,
}

#[derive(Serialize)]
struct Dendrogram<'a> {
    leaves: &'a [String],
    merges: &'a [crate::cluster::Merge],
    k: usize,
    silhouette: f64,
}

pub fn write_clustering(dir: &Path, c: &Clustering) -> Result<()> {
    let by_name: BTreeMap<&str, &crate::cluster::GenreProfile> = c.profiles.iter().map(|g| (g.genre.as_str(), g)).collect();
    write_rows(
        dir,
        "communities.csv",
        c.tree.leaves.iter().zip(&c.cut.assignment).map(|(g, &community)| {
            let p = by_name[g.as_str()];
            CommunityCsv {
                genre: g,
                song_count: p.song_count,
                community,
                pitch_bits: p.mean_profile[0],
                loudness_bits: p.mean_profile[1],
                timbre_bits: p.mean_profile[2],
                rhythm_bits: p.mean_profile[3],
            }
        }),
    )?;
    write_rows(
        dir,
        "silhouette.csv",
        c.cut.scores.iter().map(|&(k, silhouette)| SilhouetteCsv { k, silhouette, chosen: k == c.cut.k }),
    )?;
    write_json(
        &dir.join("dendrogram.json"),
        &Dendrogram { leaves: &c.tree.leaves, merges: &c.tree.merges, k: c.cut.k, silhouette: c.cut.silhouette },
    )?;
    std::fs::write(dir.join("dendrogram.nwk"), c.tree.to_newick() + "\n")?;
    Ok(())
}

pub fn write_genres(dir: &Path, report: &GenreReport) -> Result<()> {
    write_rows(dir, "genres.csv", &report.rows)?;
    write_rows(dir, "correlations.csv", &report.correlations)?;
    write_clustering(dir, &report.clustering)
}

#[derive(Serialize)]
struct CodewordCsv<'a> {
    song_id: &'a str,
    feature: Feature,
    position: usize,
    symbol: u32,
}

/// Streams `codewords.csv`, one row per codeword.
pub struct CodewordWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl CodewordWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        Ok(Self { inner: csv_writer(dir, "codewords.csv")? })
    }

    pub fn write(&mut self, song_id: &str, streams: &[Option<CodewordSequence>; 4]) -> Result<()> {
        for seq in streams.iter().flatten() {
            for (position, &symbol) in seq.symbols.iter().enumerate() {
                self.inner.serialize(CodewordCsv { song_id, feature: seq.feature, position, symbol })?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config: BTreeMap<&'static str, String>,
    /// sha256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, InputDigest>,
    pub calibration: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn profiles_csv_leaves_absent_features_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = SongProfile {
            id: "a".into(),
            year: None,
            genre: Some("rock".into()),
            hot100: true,
            profile: crate::infotheory::ComplexityProfile { pitch_bits: Some(0.5), ..Default::default() },
        };
        write_profiles(dir.path(), &[p]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("profiles.csv")).unwrap();
        assert_eq!(
            text,
            "song_id,year,genre,hot100,pitch_bits,loudness_bits,timbre_bits,rhythm_bits\na,,rock,true,0.5,,,\n"
        );
    }
}
