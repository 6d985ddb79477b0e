//! Flat `key = value` run configuration.
//!
//! ```text
//! # codec
//! pitch_threshold = 0.5
//! loudness_bin_width = 5
//! epochs = 1960, 1964, 1983, 1991, 2010
//! linkage = average
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::cluster::Linkage;
use crate::codec::CodecConfig;
use crate::corpus::{FilterConfig, FIRST_YEAR, LAST_YEAR};
use crate::error::{Error, Result};
use crate::stats::Epoch;

/// Year boundaries of the analysis periods. Each boundary year belongs to
/// the period it opens; the last period includes its closing year.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochSet {
    pub boundaries: Vec<i32>,
    /// Whether trend lines are fitted over the first span too.
    pub fit_first: bool,
}

impl Default for EpochSet {
    fn default() -> Self {
        Self { boundaries: vec![FIRST_YEAR, 1964, 1983, 1991, LAST_YEAR], fit_first: false }
    }
}

impl EpochSet {
    pub fn new(boundaries: Vec<i32>, fit_first: bool) -> Result<Self> {
        if boundaries.len() < 2 || boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "epoch boundaries must be strictly increasing with at least two years, got {boundaries:?}"
            )));
        }
        Ok(Self { boundaries, fit_first })
    }

    pub fn spans(&self) -> Vec<Epoch> {
        let last = self.boundaries.len() - 2;
        self.boundaries
            .windows(2)
            .enumerate()
            .map(|(i, w)| Epoch { start: w[0], end: w[1], closed: i == last })
            .collect()
    }

    /// Spans that get trend fits.
    pub fn fitted(&self) -> Vec<Epoch> {
        let skip = usize::from(!self.fit_first && self.boundaries.len() > 2);
        self.spans().into_iter().skip(skip).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub codec: CodecConfig,
    pub filter: FilterConfig,
    pub kl_alpha: f64,
    /// Resamples for the popularity comparison, yearly CIs and trend CIs.
    pub bootstrap_n: usize,
    /// Resamples for the per-genre deviation table.
    pub genre_bootstrap_n: usize,
    pub ci_level: f64,
    pub epochs: EpochSet,
    pub min_genre_songs: usize,
    pub linkage: Linkage,
    pub standardize: bool,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub histogram_bin_width: f64,
    pub timbre_histogram_bin_width: f64,
    /// Songs drawn to calibrate timbre terciles when no calibration file is
    /// given.
    pub calibration_sample: usize,
    pub calibration_path: Option<PathBuf>,
    pub dump_codewords: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            codec: CodecConfig::default(),
            filter: FilterConfig::default(),
            kl_alpha: 1.0,
            bootstrap_n: 1000,
            genre_bootstrap_n: 100,
            ci_level: 0.95,
            epochs: EpochSet::default(),
            min_genre_songs: 5000,
            linkage: Linkage::Average,
            standardize: false,
            k_min: None,
            k_max: None,
            histogram_bin_width: 0.1,
            timbre_histogram_bin_width: 0.02,
            calibration_sample: 10_000,
            calibration_path: None,
            dump_codewords: false,
        }
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn parse_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|s| parse_num(s.trim())).collect()
}

fn opt_usize(v: &str) -> std::result::Result<Option<usize>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(v).map(Some)
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            config.set(key.trim(), value.trim()).map_err(err)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "pitch_threshold" => self.codec.pitch_threshold = parse_num(v)?,
            "loudness_bin_width" => self.codec.loudness_bin_width = parse_num(v)?,
            "loudness_min_bin" => self.codec.loudness_min_bin = parse_num(v)?,
            "rhythm_cap" => self.codec.rhythm_cap = parse_num(v)?,
            "timbre_drop_component" => self.codec.timbre_drop_component = parse_num(v)?,
            "kl_alpha" => self.kl_alpha = parse_num(v)?,
            "bootstrap_n" => self.bootstrap_n = parse_num(v)?,
            "genre_bootstrap_n" => self.genre_bootstrap_n = parse_num(v)?,
            "ci_level" => self.ci_level = parse_num(v)?,
            "epochs" => {
                self.epochs = EpochSet::new(parse_list(v)?, self.epochs.fit_first).map_err(|e| e.to_string())?
            }
            "fit_first_span" => self.epochs.fit_first = parse_bool(v)?,
            "min_genre_songs" => self.min_genre_songs = parse_num(v)?,
            "linkage" => self.linkage = v.parse().map_err(|e: Error| e.to_string())?,
            "standardize" => self.standardize = parse_bool(v)?,
            "k_min" => self.k_min = opt_usize(v)?,
            "k_max" => self.k_max = opt_usize(v)?,
            "histogram_bin_width" => self.histogram_bin_width = parse_num(v)?,
            "timbre_histogram_bin_width" => self.timbre_histogram_bin_width = parse_num(v)?,
            "year_range" => {
                self.filter.year_range = if v == "off" {
                    None
                } else {
                    match parse_list::<i32>(v)?.as_slice() {
                        [lo, hi] if lo <= hi => Some((*lo, *hi)),
                        _ => return Err(format!("year_range must be \"lo, hi\" or \"off\", got {v:?}")),
                    }
                }
            }
            "commentary_tokens" => {
                self.filter.commentary_tokens =
                    v.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
            }
            "calibration_sample" => self.calibration_sample = parse_num(v)?,
            "calibration_path" => self.calibration_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "dump_codewords" => self.dump_codewords = parse_bool(v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.kl_alpha.is_finite() && self.kl_alpha >= 0.0) {
            return bad("kl_alpha must be >= 0");
        }
        if self.bootstrap_n == 0 || self.genre_bootstrap_n == 0 {
            return bad("bootstrap counts must be >= 1");
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad("ci_level must lie in (0,1)");
        }
        if !(self.histogram_bin_width > 0.0 && self.timbre_histogram_bin_width > 0.0) {
            return bad("histogram bin widths must be > 0");
        }
        if self.calibration_sample == 0 {
            return bad("calibration_sample must be >= 1");
        }
        Ok(())
    }

    /// Every setting as text, keyed by its config name.
    pub fn to_pairs(&self) -> BTreeMap<&'static str, String> {
        let opt = |v: Option<usize>| v.map_or("auto".to_string(), |k| k.to_string());
        let join = |v: &[i32]| v.iter().map(|y| y.to_string()).collect::<Vec<_>>().join(",");
        BTreeMap::from([
            ("pitch_threshold", self.codec.pitch_threshold.to_string()),
            ("loudness_bin_width", self.codec.loudness_bin_width.to_string()),
            ("loudness_min_bin", self.codec.loudness_min_bin.to_string()),
            ("rhythm_cap", self.codec.rhythm_cap.to_string()),
            ("timbre_drop_component", self.codec.timbre_drop_component.to_string()),
            ("kl_alpha", self.kl_alpha.to_string()),
            ("bootstrap_n", self.bootstrap_n.to_string()),
            ("genre_bootstrap_n", self.genre_bootstrap_n.to_string()),
            ("ci_level", self.ci_level.to_string()),
            ("epochs", join(&self.epochs.boundaries)),
            ("fit_first_span", self.epochs.fit_first.to_string()),
            ("min_genre_songs", self.min_genre_songs.to_string()),
            ("linkage", self.linkage.name().to_string()),
            ("standardize", self.standardize.to_string()),
            ("k_min", opt(self.k_min)),
            ("k_max", opt(self.k_max)),
            ("histogram_bin_width", self.histogram_bin_width.to_string()),
            ("timbre_histogram_bin_width", self.timbre_histogram_bin_width.to_string()),
            (
                "year_range",
                self.filter.year_range.map_or("off".to_string(), |(lo, hi)| format!("{lo},{hi}")),
            ),
            ("commentary_tokens", self.filter.commentary_tokens.join(",")),
            ("calibration_sample", self.calibration_sample.to_string()),
            (
                "calibration_path",
                self.calibration_path.as_ref().map_or(String::new(), |p| p.display().to_string()),
            ),
            ("dump_codewords", self.dump_codewords.to_string()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_epochs() {
        let spans = EpochSet::default().spans();
        assert_eq!(spans.len(), 4);
        assert!(spans[1].contains(1964) && !spans[0].contains(1964));
        assert!(spans[2].contains(1983) && !spans[1].contains(1983));
        assert!(spans[3].contains(1991) && spans[3].contains(2010));
        let fitted = EpochSet::default().fitted();
        assert_eq!(fitted.iter().map(|e| (e.start, e.end)).collect::<Vec<_>>(), [(1964, 1983), (1983, 1991), (1991, 2010)]);
    }

    #[test]
    fn parse_roundtrip() {
        let text = "# comment\npitch_threshold = 0.4\nepochs = 1960, 1980, 2010\nlinkage = complete\nstandardize = true\nk_max = 9\nyear_range = off\n\n";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.codec.pitch_threshold, 0.4);
        assert_eq!(c.epochs.boundaries, [1960, 1980, 2010]);
        assert_eq!(c.linkage, Linkage::Complete);
        assert!(c.standardize);
        assert_eq!(c.k_max, Some(9));
        assert_eq!(c.filter.year_range, None);
        let text: String = c.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(Config::parse(&text).unwrap(), c);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Config::parse("nonsense"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(Config::parse("\nfoo = 1"), Err(Error::Config { line: 2, .. })));
        assert!(Config::parse("epochs = 1990, 1980").is_err());
        assert!(Config::parse("ci_level = 1.5").is_err());
        assert!(Config::parse("pitch_threshold = 0").is_err());
    }
}
