//! The file-in, file-out commands behind the command-line tool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::report::{self, InputDigest, Manifest};
use super::{compute_profiles, derive_seed, ComplexityReport, Config, SongProfile};
use crate::codec::{calibrate_timbre, CodecConfig, TimbreCalibration};
use crate::corpus::{self, CorpusIndex, FilterReport, SongRecord};
use crate::error::{Error, Result};
use crate::infotheory::song_codewords;
use crate::stats::stream_rng;
use crate::synth::{self, SynthSpec};

const TAG_CALIBRATION: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Calibrate,
    Complexity,
    ComparePopularity,
    Trends,
    Divergence,
    Genres,
    Cluster,
    Synth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Calibrate => "calibrate",
            Command::Complexity => "complexity",
            Command::ComparePopularity => "compare-popularity",
            Command::Trends => "trends",
            Command::Divergence => "divergence",
            Command::Genres => "genres",
            Command::Cluster => "cluster",
            Command::Synth => "synth",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub input: Option<PathBuf>,
    pub charts: Option<PathBuf>,
    pub config: Config,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// `synth` only: JSON generator spec.
    pub synth_spec: Option<PathBuf>,
    /// `synth` only: overrides the song count of the `--spec` file.
    pub synth_songs: Option<usize>,
}

/// A filtered corpus with chart flags applied, read from disk on demand.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub index: CorpusIndex,
    /// Positions of the kept records, ordered by id.
    pub kept: Vec<usize>,
    pub chart_matches: usize,
    pub filter: FilterReport,
}

impl LoadedCorpus {
    pub fn n_read(&self) -> usize {
        self.index.len()
    }

    /// All kept songs in memory.
    pub fn songs(&self) -> Result<Vec<SongRecord>> {
        self.index.load(&self.kept)
    }

    pub fn headers(&self) -> impl Iterator<Item = &SongRecord> + '_ {
        self.kept.iter().map(|&i| &self.index.headers[i])
    }

    /// Complexity profiles of the kept songs, loaded in bounded batches.
    pub fn profiles(&self, calibration: &TimbreCalibration, codec: &CodecConfig) -> Result<Vec<SongProfile>> {
        let mut out = Vec::with_capacity(self.kept.len());
        self.index.for_each_chunk(&self.kept, |chunk| {
            out.extend(compute_profiles(&chunk, calibration, codec));
            Ok(())
        })?;
        Ok(out)
    }
}

pub fn load_corpus(opts: &RunOptions) -> Result<LoadedCorpus> {
    let input = opts.input.as_deref().ok_or_else(|| Error::InvalidArgument("--input is required".into()))?;
    let mut index = CorpusIndex::build(input)?;
    let chart_matches = match &opts.charts {
        Some(path) => corpus::match_charts(&mut index.headers, &corpus::read_charts_file(path)?),
        None => 0,
    };
    let (kept, filter) = corpus::filter_indices(&index.headers, &opts.config.filter);
    Ok(LoadedCorpus { index, kept, chart_matches, filter })
}

/// Positions of the songs to calibrate on out of `n`, or `None` for all.
fn calibration_positions(n: usize, config: &Config, seed: u64) -> Option<Vec<usize>> {
    if n <= config.calibration_sample {
        return None;
    }
    let mut rng = stream_rng(derive_seed(seed, &[TAG_CALIBRATION]), 0);
    let mut idx = rand::seq::index::sample(&mut rng, n, config.calibration_sample).into_vec();
    idx.sort_unstable();
    Some(idx)
}

fn read_calibration(path: &Path, config: &Config) -> Result<TimbreCalibration> {
    let cal: TimbreCalibration = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if cal.dropped_component != config.codec.timbre_drop_component {
        return Err(Error::Calibration(format!(
            "calibration drops component {}, config drops {}",
            cal.dropped_component, config.codec.timbre_drop_component
        )));
    }
    Ok(cal)
}

/// Reads the configured calibration file, or calibrates on a seeded sample
/// of at most `calibration_sample` songs. Returns the calibration and a
/// description of where it came from.
pub fn resolve_calibration(songs: &[SongRecord], config: &Config, seed: u64) -> Result<(TimbreCalibration, String)> {
    if let Some(path) = &config.calibration_path {
        return Ok((read_calibration(path, config)?, format!("file {}", path.display())));
    }
    match calibration_positions(songs.len(), config, seed) {
        None => Ok((calibrate_timbre(songs, &config.codec)?, format!("all {} songs", songs.len()))),
        Some(idx) => {
            let sample: Vec<SongRecord> = idx.iter().map(|&i| songs[i].clone()).collect();
            Ok((calibrate_timbre(&sample, &config.codec)?, format!("sample of {} songs", sample.len())))
        }
    }
}

/// [`resolve_calibration`] over a corpus on disk; picks the same sample.
pub fn resolve_calibration_indexed(corpus: &LoadedCorpus, config: &Config, seed: u64) -> Result<(TimbreCalibration, String)> {
    if let Some(path) = &config.calibration_path {
        return Ok((read_calibration(path, config)?, format!("file {}", path.display())));
    }
    let n = corpus.kept.len();
    match calibration_positions(n, config, seed) {
        None => Ok((calibrate_timbre(&corpus.songs()?, &config.codec)?, format!("all {n} songs"))),
        Some(idx) => {
            let positions: Vec<usize> = idx.iter().map(|&i| corpus.kept[i]).collect();
            let sample = corpus.index.load(&positions)?;
            Ok((calibrate_timbre(&sample, &config.codec)?, format!("sample of {} songs", sample.len())))
        }
    }
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    songs_read: usize,
    songs_kept: usize,
    chart_matches: usize,
    hot100_kept: usize,
    removed: &'a FilterReport,
    genre_counts: BTreeMap<String, usize>,
}

struct Run<'a> {
    opts: &'a RunOptions,
    outputs: Vec<String>,
    inputs: BTreeMap<String, InputDigest>,
    calibration: String,
}

impl<'a> Run<'a> {
    fn new(opts: &'a RunOptions) -> Result<Self> {
        std::fs::create_dir_all(&opts.out)?;
        let mut inputs = BTreeMap::new();
        let roles = [
            ("input", &opts.input),
            ("charts", &opts.charts),
            ("config", &opts.config_path),
            ("calibration", &opts.config.calibration_path),
            ("synth_spec", &opts.synth_spec),
        ];
        for (role, path) in roles {
            if let Some(p) = path {
                inputs.insert(role.to_string(), InputDigest { path: p.display().to_string(), sha256: report::sha256_file(p)? });
            }
        }
        Ok(Self { opts, outputs: Vec::new(), inputs, calibration: String::new() })
    }

    fn dir(&self) -> &Path {
        &self.opts.out
    }

    fn produced(&mut self, names: &[&str]) {
        self.outputs.extend(names.iter().map(|s| s.to_string()));
    }

    fn finish(mut self, command: Command) -> Result<Manifest> {
        self.outputs.sort();
        let manifest = Manifest {
            command: command.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.opts.seed,
            threads: self.opts.threads,
            config: self.opts.config.to_pairs(),
            inputs: self.inputs,
            calibration: self.calibration,
            outputs: self.outputs,
        };
        report::write_json(&self.opts.out.join("run_manifest.json"), &manifest)?;
        Ok(manifest)
    }

    fn calibrated(&mut self, corpus: &LoadedCorpus) -> Result<TimbreCalibration> {
        let (cal, source) = resolve_calibration_indexed(corpus, &self.opts.config, self.opts.seed)?;
        self.calibration = source;
        Ok(cal)
    }
}

/// Runs `command` and writes its outputs plus `run_manifest.json` under
/// `opts.out`.
pub fn run(command: Command, opts: &RunOptions) -> Result<Manifest> {
    opts.config.validate()?;
    let mut run = Run::new(opts)?;
    let config = &opts.config;
    let seed = opts.seed;
    if command == Command::Synth {
        synth_command(&mut run)?;
        return run.finish(command);
    }
    let loaded = load_corpus(opts)?;
    match command {
        Command::Ingest => {
            let hot100_kept = loaded.headers().filter(|s| s.hot100).count();
            let mut file = std::io::BufWriter::new(std::fs::File::create(run.dir().join("corpus.jsonl"))?);
            loaded.index.for_each_chunk(&loaded.kept, |chunk| corpus::write_corpus(&mut file, &chunk))?;
            let headers: Vec<SongRecord> = loaded.headers().cloned().collect();
            let summary = IngestSummary {
                songs_read: loaded.n_read(),
                songs_kept: loaded.kept.len(),
                chart_matches: loaded.chart_matches,
                hot100_kept,
                removed: &loaded.filter,
                genre_counts: corpus::genre_counts(&headers),
            };
            report::write_json(&run.dir().join("filter_report.json"), &summary)?;
            run.produced(&["corpus.jsonl", "filter_report.json"]);
        }
        Command::Calibrate => {
            let cal = run.calibrated(&loaded)?;
            report::write_json(&run.dir().join("calibration.json"), &cal)?;
            run.produced(&["calibration.json"]);
        }
        Command::Complexity => {
            let cal = run.calibrated(&loaded)?;
            if loaded.kept.is_empty() {
                return Err(Error::InsufficientData("empty corpus".into()));
            }
            let profiles = loaded.profiles(&cal, &config.codec)?;
            let histograms = super::histograms(&profiles, config);
            report::write_complexity(run.dir(), &ComplexityReport { profiles, histograms })?;
            run.produced(&["profiles.csv", "histograms.csv"]);
            if config.dump_codewords {
                let mut w = report::CodewordWriter::create(run.dir())?;
                loaded.index.for_each_chunk(&loaded.kept, |chunk| {
                    for s in &chunk {
                        w.write(&s.id, &song_codewords(s, &cal, &config.codec))?;
                    }
                    Ok(())
                })?;
                w.finish()?;
                run.produced(&["codewords.csv"]);
            }
        }
        Command::ComparePopularity => {
            let cal = run.calibrated(&loaded)?;
            let profiles = loaded.profiles(&cal, &config.codec)?;
            let rows = super::run_popularity_comparison(&profiles, config, seed)?;
            report::write_popularity(run.dir(), &rows)?;
            run.produced(&["popularity.csv"]);
        }
        Command::Trends => {
            let cal = run.calibrated(&loaded)?;
            let profiles = loaded.profiles(&cal, &config.codec)?;
            let rep = super::run_trends(&profiles, config, seed)?;
            report::write_trends(run.dir(), &rep)?;
            run.produced(&["trends.csv", "trend_fits.csv"]);
        }
        Command::Divergence => {
            let cal = run.calibrated(&loaded)?;
            let charting: Vec<usize> = loaded
                .kept
                .iter()
                .copied()
                .filter(|&i| loaded.index.headers[i].hot100 && loaded.index.headers[i].year.is_some())
                .collect();
            let rep = super::run_divergence(&loaded.index.load(&charting)?, &cal, config, seed)?;
            report::write_divergence(run.dir(), &rep)?;
            run.produced(&["divergence.csv", "divergence_songs.csv", "divergence_fits.csv"]);
        }
        Command::Genres => {
            let cal = run.calibrated(&loaded)?;
            let profiles = loaded.profiles(&cal, &config.codec)?;
            let rep = super::run_genres(&profiles, config, seed)?;
            report::write_genres(run.dir(), &rep)?;
            run.produced(&[
                "genres.csv",
                "correlations.csv",
                "communities.csv",
                "silhouette.csv",
                "dendrogram.json",
                "dendrogram.nwk",
            ]);
        }
        Command::Cluster => {
            let cal = run.calibrated(&loaded)?;
            let profiles = loaded.profiles(&cal, &config.codec)?;
            let c = super::run_cluster(&profiles, config)?;
            report::write_clustering(run.dir(), &c)?;
            run.produced(&["communities.csv", "silhouette.csv", "dendrogram.json", "dendrogram.nwk"]);
        }
        Command::Synth => unreachable!("handled above"),
    }
    run.finish(command)
}

fn synth_command(run: &mut Run) -> Result<()> {
    let opts = run.opts;
    let mut spec = match &opts.synth_spec {
        Some(path) => serde_json::from_str::<SynthSpec>(&std::fs::read_to_string(path)?)?,
        None => SynthSpec { seed: opts.seed, codec: opts.config.codec.clone(), ..SynthSpec::default() },
    };
    if let Some(n) = opts.synth_songs {
        spec.n_songs = n;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(run.dir().join("corpus.jsonl"))?);
    let truth = synth::write_generated_corpus(&spec, file)?;
    report::write_json(&run.dir().join("ground_truth.json"), &truth)?;
    report::write_json(&run.dir().join("calibration.json"), &truth.calibration)?;
    run.calibration = "planted".into();
    run.produced(&["corpus.jsonl", "ground_truth.json", "calibration.json"]);
    Ok(())
}
