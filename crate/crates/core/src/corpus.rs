//! Song records, the JSONL ingestion format, and corpus filtering.
//!
//! One song per line:
//!
//! ```text
//! {"id":"S1","title":"Hey Jude","artist":"The Beatles","year":1968,"duration":431.0,
//!  "tempo":73.0,"time_signature":4,"terms":[{"term":"rock","weight":1.0}],
//!  "segments":[{"start":0.0,"loudness_max":-12.5,"pitches":[..12..],"timbre":[..12..]}]}
//! ```
//!
//! `year` and `duration` may be `null`. An optional `hot100` boolean is
//! written only when set, so filtered corpora keep their chart flags.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const CHROMA_BINS: usize = 12;
pub const TIMBRE_DIMS: usize = 12;

/// Title tokens marking interviews, commentary tracks and the like.
pub const COMMENTARY_TOKENS: [&str; 6] = [
    "interview",
    "commentary",
    "introduction",
    "discuss",
    "conference",
    "intro",
];

pub const FIRST_YEAR: i32 = 1960;
pub const LAST_YEAR: i32 = 2010;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: f64,
    pub loudness_max: f64,
    pub pitches: Vec<f64>,
    pub timbre: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SongRecord {
    pub id: String,
    pub title: String,
    pub artist: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub duration: Option<f64>,
    pub tempo: f64,
    pub time_signature: u32,
    pub terms: Vec<Term>,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub hot100: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl SongRecord {
    /// Checks every field invariant of the record schema.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(d) = self.duration {
            if !(d.is_finite() && d > 0.0) {
                return Err(format!("duration must be > 0, got {d}"));
            }
        }
        if !(self.tempo.is_finite() && self.tempo >= 0.0) {
            return Err(format!("tempo must be >= 0, got {}", self.tempo));
        }
        for t in &self.terms {
            if !(0.0..=1.0).contains(&t.weight) {
                return Err(format!("term {:?} weight {} outside [0,1]", t.term, t.weight));
            }
        }
        let mut prev = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.pitches.len() != CHROMA_BINS {
                return Err(format!(
                    "segment {i}: pitches has {} entries, expected {CHROMA_BINS}",
                    seg.pitches.len()
                ));
            }
            if seg.timbre.len() != TIMBRE_DIMS {
                return Err(format!(
                    "segment {i}: timbre has {} entries, expected {TIMBRE_DIMS}",
                    seg.timbre.len()
                ));
            }
            if let Some(p) = seg.pitches.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(format!("segment {i}: pitch value {p} outside [0,1]"));
            }
            if seg.timbre.iter().any(|v| !v.is_finite()) {
                return Err(format!("segment {i}: non-finite timbre value"));
            }
            if !seg.loudness_max.is_finite() {
                return Err(format!("segment {i}: non-finite loudness_max"));
            }
            if !(seg.start.is_finite() && seg.start >= 0.0) {
                return Err(format!("segment {i}: start must be finite and >= 0"));
            }
            if seg.start < prev {
                return Err(format!("segment {i}: start {} precedes previous segment", seg.start));
            }
            prev = seg.start;
        }
        Ok(())
    }
}

/// Parses one ingestion record.
pub fn parse_song(record_text: &str) -> Result<SongRecord> {
    parse_song_at(record_text, 0)
}

fn parse_song_at(record_text: &str, line: usize) -> Result<SongRecord> {
    let song: SongRecord = serde_json::from_str(record_text).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => Error::Schema { line, message: e.to_string() },
            _ => Error::Parse { line, message: e.to_string() },
        }
    })?;
    song.validate().map_err(|message| Error::Schema { line, message })?;
    Ok(song)
}

pub fn serialize_song(song: &SongRecord) -> String {
    serde_json::to_string(song).expect("song records always serialize")
}

/// Reads a whole JSONL corpus. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<SongRecord>> {
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    lines
        .par_iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_song_at(l, i + 1))
        .collect()
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<SongRecord>> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut writer: W, songs: &[SongRecord]) -> Result<()> {
    for song in songs {
        writeln!(writer, "{}", serialize_song(song))?;
    }
    writer.flush()?;
    Ok(())
}

/// Records parsed per parallel batch when streaming a corpus file.
pub const CHUNK_RECORDS: usize = 2048;

/// A corpus file indexed for random access: the byte span of every record
/// plus a copy of it without segments. Full records are re-read on demand,
/// so memory stays proportional to the metadata rather than the audio
/// features.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    path: std::path::PathBuf,
    spans: Vec<(u64, usize, usize)>,
    /// Records in file order with `segments` emptied.
    pub headers: Vec<SongRecord>,
}

impl CorpusIndex {
    /// Validates every record of the file while indexing it.
    pub fn build(path: &Path) -> Result<Self> {
        use std::io::BufReader;
        let mut reader = BufReader::with_capacity(1 << 20, std::fs::File::open(path)?);
        let mut spans = Vec::new();
        let mut headers = Vec::new();
        let mut batch: Vec<(usize, String)> = Vec::with_capacity(CHUNK_RECORDS);
        let mut offset = 0u64;
        let mut line_no = 0usize;
        let mut buf = Vec::new();
        let flush = |batch: &mut Vec<(usize, String)>, headers: &mut Vec<SongRecord>| -> Result<()> {
            let parsed: Vec<SongRecord> = batch
                .par_iter()
                .map(|(line, text)| {
                    let mut song = parse_song_at(text, *line)?;
                    song.segments = Vec::new();
                    Ok(song)
                })
                .collect::<Result<_>>()?;
            headers.extend(parsed);
            batch.clear();
            Ok(())
        };
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let text = std::str::from_utf8(&buf)
                .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            if !text.trim().is_empty() {
                spans.push((offset, n, line_no));
                batch.push((line_no, text.to_string()));
                if batch.len() == CHUNK_RECORDS {
                    flush(&mut batch, &mut headers)?;
                }
            }
            offset += n as u64;
        }
        flush(&mut batch, &mut headers)?;
        Ok(Self { path: path.to_path_buf(), spans, headers })
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Full records at the given positions, in the order given. The
    /// `hot100` flag is taken from the header, so chart matches applied to
    /// [`CorpusIndex::headers`] carry over.
    pub fn load(&self, positions: &[usize]) -> Result<Vec<SongRecord>> {
        use std::io::{Read, Seek, SeekFrom};
        let mut file = std::fs::File::open(&self.path)?;
        let mut texts = Vec::with_capacity(positions.len());
        for &i in positions {
            let (offset, len, line) = self.spans[i];
            file.seek(SeekFrom::Start(offset))?;
            let mut raw = vec![0u8; len];
            file.read_exact(&mut raw)?;
            let text = String::from_utf8(raw).map_err(|e| Error::Parse { line, message: e.to_string() })?;
            texts.push((i, line, text));
        }
        texts
            .par_iter()
            .map(|(i, line, text)| {
                let mut song = parse_song_at(text, *line)?;
                song.hot100 = self.headers[*i].hot100;
                Ok(song)
            })
            .collect()
    }

    /// Loads `positions` in batches of [`CHUNK_RECORDS`], handing each batch
    /// to `f` in order.
    pub fn for_each_chunk<F>(&self, positions: &[usize], mut f: F) -> Result<()>
    where
        F: FnMut(Vec<SongRecord>) -> Result<()>,
    {
        for chunk in positions.chunks(CHUNK_RECORDS) {
            f(self.load(chunk)?)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub commentary_tokens: Vec<String>,
    pub year_range: Option<(i32, i32)>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            commentary_tokens: COMMENTARY_TOKENS.iter().map(|s| s.to_string()).collect(),
            year_range: Some((FIRST_YEAR, LAST_YEAR)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub removed_duplicates: usize,
    pub removed_missing_metadata: usize,
    pub removed_commentary: usize,
    pub removed_out_of_range: usize,
    pub output_count: usize,
}

impl FilterReport {
    pub fn removed(&self) -> usize {
        self.removed_duplicates
            + self.removed_missing_metadata
            + self.removed_commentary
            + self.removed_out_of_range
    }

    /// Combines reports of disjoint shards.
    pub fn merge(self, other: FilterReport) -> FilterReport {
        FilterReport {
            input_count: self.input_count + other.input_count,
            removed_duplicates: self.removed_duplicates + other.removed_duplicates,
            removed_missing_metadata: self.removed_missing_metadata
                + other.removed_missing_metadata,
            removed_commentary: self.removed_commentary + other.removed_commentary,
            removed_out_of_range: self.removed_out_of_range + other.removed_out_of_range,
            output_count: self.output_count + other.output_count,
        }
    }
}

/// Applies, in order: duplicate removal, missing-metadata removal,
/// commentary-title removal and the year-range restriction. The output is
/// sorted by id.
pub fn filter_corpus(songs: Vec<SongRecord>, config: &FilterConfig) -> (Vec<SongRecord>, FilterReport) {
    let (keep, report) = filter_indices(&songs, config);
    let mut slots: Vec<Option<SongRecord>> = songs.into_iter().map(Some).collect();
    let out = keep.into_iter().map(|i| slots[i].take().expect("indices are distinct")).collect();
    (out, report)
}

/// [`filter_corpus`] as positions into `songs`, in output order. Segments
/// are never inspected, so records loaded without them filter identically.
pub fn filter_indices(songs: &[SongRecord], config: &FilterConfig) -> (Vec<usize>, FilterReport) {
    let mut report = FilterReport { input_count: songs.len(), ..Default::default() };

    // Earliest year wins, absent years last, then smallest id.
    let keys: Vec<String> = songs.iter().map(|s| normalize_key(&s.title, &s.artist)).collect();
    let mut order: Vec<usize> = (0..songs.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .cmp(&keys[b])
            .then_with(|| year_order(songs[a].year).cmp(&year_order(songs[b].year)))
            .then_with(|| songs[a].id.cmp(&songs[b].id))
    });
    let mut seen: HashSet<&str> = HashSet::new();
    let mut kept = Vec::with_capacity(order.len());
    for i in order {
        if seen.insert(&keys[i]) {
            kept.push(i);
        } else {
            report.removed_duplicates += 1;
        }
    }

    let tokens: HashSet<String> =
        config.commentary_tokens.iter().map(|t| fold_text(t).to_lowercase()).collect();
    let mut out = Vec::with_capacity(kept.len());
    for i in kept {
        let song = &songs[i];
        if song.terms.is_empty() || song.duration.is_none() {
            report.removed_missing_metadata += 1;
        } else if is_commentary(&song.title, &tokens) {
            report.removed_commentary += 1;
        } else if matches!((config.year_range, song.year), (Some((lo, hi)), Some(y)) if y < lo || y > hi)
        {
            report.removed_out_of_range += 1;
        } else {
            out.push(i);
        }
    }
    out.sort_by(|&a, &b| songs[a].id.cmp(&songs[b].id));
    report.output_count = out.len();
    (out, report)
}

fn year_order(year: Option<i32>) -> (bool, i32) {
    match year {
        Some(y) => (false, y),
        None => (true, 0),
    }
}

fn is_commentary(title: &str, tokens: &HashSet<String>) -> bool {
    fold_text(title)
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .any(|w| !w.is_empty() && tokens.contains(w))
}

/// The strongest-weighted term, ties going to the lexicographically
/// smallest term.
pub fn assign_genre(song: &SongRecord) -> Option<&str> {
    song.terms
        .iter()
        .max_by(|a, b| {
            a.weight
                .total_cmp(&b.weight)
                .then_with(|| b.term.cmp(&a.term))
        })
        .map(|t| t.term.as_str())
}

/// Strips diacritics by decomposing and dropping combining marks.
fn fold_text(s: &str) -> String {
    s.nfd().filter(|c| !unicode_normalization::char::is_combining_mark(*c)).collect()
}

fn normalize_part(s: &str) -> String {
    let folded: String = fold_text(s)
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `"title|artist"` after lowercasing, accent folding, punctuation removal
/// and whitespace collapsing.
pub fn normalize_key(title: &str, artist: &str) -> String {
    format!("{}|{}", normalize_part(title), normalize_part(artist))
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ChartEntry {
    pub title: String,
    pub artist: String,
}

/// Reads the `title,artist` chart CSV.
pub fn read_charts<R: std::io::Read>(reader: R) -> Result<Vec<ChartEntry>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "title" || &headers[1] != "artist" {
        return Err(Error::Schema {
            line: 1,
            message: format!("chart CSV header must be \"title,artist\", got {:?}", headers),
        });
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_charts_file(path: &Path) -> Result<Vec<ChartEntry>> {
    read_charts(std::fs::File::open(path)?)
}

/// Sets `hot100` on every song whose normalized key appears in the chart
/// list, and clears it on the rest. Returns the number of flagged songs.
pub fn match_charts(songs: &mut [SongRecord], chart_entries: &[ChartEntry]) -> usize {
    let keys: HashSet<String> =
        chart_entries.iter().map(|e| normalize_key(&e.title, &e.artist)).collect();
    let mut flagged = 0;
    for song in songs.iter_mut() {
        song.hot100 = keys.contains(&normalize_key(&song.title, &song.artist));
        flagged += song.hot100 as usize;
    }
    flagged
}

/// Songs per genre label, songs without terms excluded.
pub fn genre_counts(songs: &[SongRecord]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for s in songs {
        if let Some(g) = assign_genre(s) {
            *counts.entry(g.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(start: f64) -> Segment {
        Segment { start, loudness_max: -10.0, pitches: vec![0.5; 12], timbre: vec![1.0; 12] }
    }

    pub(crate) fn song(id: &str, title: &str, artist: &str, year: Option<i32>) -> SongRecord {
        SongRecord {
            id: id.into(),
            title: title.into(),
            artist: artist.into(),
            year,
            duration: Some(200.0),
            tempo: 120.0,
            time_signature: 4,
            terms: vec![Term { term: "rock".into(), weight: 1.0 }],
            segments: vec![segment(0.0), segment(0.5)],
            hot100: false,
        }
    }

    #[test]
    fn parses_empty_segment_list() {
        let text = r#"{"id":"a","title":"t","artist":"x","year":null,"duration":null,"tempo":0,"time_signature":0,"terms":[],"segments":[]}"#;
        let s = parse_song(text).unwrap();
        assert!(s.segments.is_empty());
        assert_eq!(s.year, None);
        assert_eq!(s.duration, None);
        assert!(!s.hot100);
    }

    #[test]
    fn short_pitch_vector_is_schema_error() {
        let text = format!(
            r#"{{"id":"a","title":"t","artist":"x","year":1970,"duration":3.0,"tempo":100,"time_signature":4,"terms":[],"segments":[{{"start":0,"loudness_max":-3,"pitches":{:?},"timbre":{:?}}}]}}"#,
            vec![0.0; 11],
            vec![0.0; 12]
        );
        assert!(matches!(parse_song(&text), Err(Error::Schema { .. })));
    }

    #[test]
    fn index_matches_whole_read() {
        let songs: Vec<SongRecord> =
            (0..5).map(|i| song(&format!("id{i}"), &format!("T{i}"), "Ä", Some(1970 + i))).collect();
        let mut text = String::from("\n");
        for s in &songs {
            text.push_str(&serialize_song(s));
            text.push_str("\r\n\n");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, &text).unwrap();
        let mut index = CorpusIndex::build(&path).unwrap();
        assert_eq!(index.len(), 5);
        assert!(index.headers.iter().all(|h| h.segments.is_empty()));
        index.headers[3].hot100 = true;
        let loaded = index.load(&[4, 3, 0]).unwrap();
        assert_eq!(loaded[0], songs[4]);
        assert_eq!(loaded[2], songs[0]);
        assert!(loaded[1].hot100);
        let mut seen = 0;
        index.for_each_chunk(&[0, 1, 2, 3, 4], |c| { seen += c.len(); Ok(()) }).unwrap();
        assert_eq!(seen, 5);
        assert_eq!(read_corpus_file(&path).unwrap(), songs);
    }

    #[test]
    fn index_reports_bad_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let good = serialize_song(&song("a", "t", "x", Some(1970)));
        std::fs::write(&path, format!("{good}\n\n{{\"id\": 1}}\n")).unwrap();
        assert!(matches!(CorpusIndex::build(&path), Err(Error::Schema { line: 3, .. })));
    }

    #[test]
    fn malformed_text_reports_line() {
        let corpus = "\n{\"id\": \n";
        match read_corpus(corpus.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsorted_segments_rejected() {
        let mut s = song("a", "t", "x", Some(1970));
        s.segments[0].start = 3.0;
        assert!(matches!(parse_song(&serialize_song(&s)), Err(Error::Schema { .. })));
    }

    #[test]
    fn commentary_titles() {
        let tokens: HashSet<String> = COMMENTARY_TOKENS.iter().map(|s| s.to_string()).collect();
        assert!(is_commentary("Artist Interview, Pt. 2", &tokens));
        assert!(is_commentary("INTRO", &tokens));
        assert!(!is_commentary("Introspection", &tokens));
        assert!(!is_commentary("Discussion", &tokens));
    }

    #[test]
    fn filter_empty_input() {
        let (out, report) = filter_corpus(vec![], &FilterConfig::default());
        assert!(out.is_empty());
        assert_eq!(report, FilterReport::default());
    }

    #[test]
    fn filter_applies_rules_in_order() {
        let mut no_terms = song("c", "Other", "Y", Some(1980));
        no_terms.terms.clear();
        let mut no_duration = song("d", "Another", "Y", Some(1980));
        no_duration.duration = None;
        let songs = vec![
            song("b", "Hey Jude", "The Beatles", Some(1970)),
            song("a", "hey jude!", "the beatles", Some(1968)),
            song("z", "Hey Jude", "The Beatles", None),
            no_terms,
            no_duration,
            song("e", "Artist Interview, Pt. 2", "Y", Some(1990)),
            song("f", "Introspection", "Y", Some(1990)),
            song("g", "Old One", "Y", Some(1955)),
            song("h", "Undated", "Y", None),
        ];
        let (out, report) = filter_corpus(songs, &FilterConfig::default());
        let ids: Vec<&str> = out.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["a", "f", "h"]);
        assert_eq!(report.removed_duplicates, 2);
        assert_eq!(report.removed_missing_metadata, 2);
        assert_eq!(report.removed_commentary, 1);
        assert_eq!(report.removed_out_of_range, 1);
        assert_eq!(report.input_count - report.removed(), report.output_count);
    }

    #[test]
    fn year_filter_can_be_disabled() {
        let config = FilterConfig { year_range: None, ..Default::default() };
        let (out, _) = filter_corpus(vec![song("g", "Old One", "Y", Some(1955))], &config);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn genre_assignment() {
        let mut s = song("a", "t", "x", None);
        s.terms = vec![Term { term: "jazz".into(), weight: 0.9 }, Term { term: "bop".into(), weight: 0.5 }];
        assert_eq!(assign_genre(&s), Some("jazz"));
        s.terms = vec![Term { term: "rock".into(), weight: 0.7 }, Term { term: "pop".into(), weight: 0.7 }];
        assert_eq!(assign_genre(&s), Some("pop"));
        s.terms.clear();
        assert_eq!(assign_genre(&s), None);
    }

    #[test]
    fn key_normalization() {
        assert_eq!(normalize_key("Hey Jude", "The Beatles"), "hey jude|the beatles");
        assert_eq!(normalize_key("", ""), "|");
        assert_eq!(normalize_key("Café", "X"), "cafe|x");
        assert_eq!(normalize_key("  Hey   Jude! ", "THE  Beatles"), "hey jude|the beatles");
    }

    #[test]
    fn chart_matching() {
        let mut songs = vec![song("a", "Hey Jude!", "The Beatles", Some(1968)), song("b", "Yesterday", "The Beatles", Some(1965))];
        let charts = read_charts("title,artist\nhey jude,the beatles\n".as_bytes()).unwrap();
        assert_eq!(match_charts(&mut songs, &charts), 1);
        assert!(songs[0].hot100 && !songs[1].hot100);
        assert_eq!(match_charts(&mut songs, &[]), 0);
        assert!(!songs[0].hot100);
    }

    #[test]
    fn chart_header_checked() {
        assert!(read_charts("name,artist\na,b\n".as_bytes()).is_err());
    }

    #[test]
    fn report_merge_is_additive() {
        let a = FilterReport { input_count: 5, removed_duplicates: 1, output_count: 4, ..Default::default() };
        let b = FilterReport { input_count: 3, removed_commentary: 2, output_count: 1, ..Default::default() };
        let m = a.merge(b);
        assert_eq!(m.input_count - m.removed(), m.output_count);
    }
}
