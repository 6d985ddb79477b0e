//! The command-line tool driven as a subprocess.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_songplexity"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn small_spec(dir: &Path) {
    let spec = r#"{
        "n_songs": 240, "segments_per_song": 40, "year_range": [1960, 2010],
        "pitch": {"kind": "entropy", "alphabet": 16, "bits": 2.0, "slope_per_year": 0.0, "jitter_sd": 0.2},
        "loudness": {"kind": "iid", "probs": [0.5, 0.25, 0.25], "symbols": [3, 4, 5]},
        "timbre": {"kind": "markov", "matrix": [[0.9, 0.1], [0.5, 0.5]], "symbols": []},
        "rhythm": {"kind": "deterministic", "cycle": [1, 2]},
        "hot100_fraction": 0.25,
        "genres": [{"label": "rock", "weight": 1.0, "offsets": [0.5, 0, 0, 0]}, {"label": "jazz", "weight": 1.0}],
        "seed": 11
    }"#;
    std::fs::write(dir.join("spec.json"), spec).unwrap();
}

#[test]
fn full_command_cycle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_spec(dir);
    let out = run(dir, &["synth", "--spec", "spec.json", "--out", "syn", "--threads", "1"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("corpus.jsonl"));
    let truth: serde_json::Value = serde_json::from_str(&read(dir.join("syn/ground_truth.json"))).unwrap();
    assert_eq!(truth["songs"].as_array().unwrap().len(), 240);
    // timbre planted from the [[0.9,0.1],[0.5,0.5]] chain
    let timbre_bits = truth["songs"][0]["planted_bits"][2].as_f64().unwrap();
    assert!((timbre_bits - 0.5575).abs() < 1e-4);

    std::fs::write(
        dir.join("run.cfg"),
        "# study settings\ncalibration_path = syn/calibration.json\nmin_genre_songs = 50\nbootstrap_n = 100\ngenre_bootstrap_n = 50\ndump_codewords = true\n",
    )
    .unwrap();
    let common = ["--input", "syn/corpus.jsonl", "--config", "run.cfg", "--seed", "4"];
    let expected: &[(&str, &[&str])] = &[
        ("ingest", &["corpus.jsonl", "filter_report.json"]),
        ("calibrate", &["calibration.json"]),
        ("complexity", &["profiles.csv", "histograms.csv", "codewords.csv"]),
        ("compare-popularity", &["popularity.csv"]),
        ("trends", &["trends.csv", "trend_fits.csv"]),
        ("divergence", &["divergence.csv", "divergence_fits.csv"]),
        ("genres", &["genres.csv", "correlations.csv", "communities.csv", "dendrogram.json", "dendrogram.nwk"]),
        ("cluster", &["communities.csv", "dendrogram.json"]),
    ];
    for (cmd, files) in expected {
        let out_dir = format!("out_{cmd}");
        let mut args = vec![*cmd, "--out", &out_dir];
        args.extend(common);
        run(dir, &args);
        for f in files.iter().chain(&["run_manifest.json"]) {
            assert!(dir.join(&out_dir).join(f).is_file(), "{cmd} did not write {f}");
        }
    }

    let profiles = read(dir.join("out_complexity/profiles.csv"));
    let mut lines = profiles.lines();
    assert_eq!(lines.next(), Some("song_id,year,genre,hot100,pitch_bits,loudness_bits,timbre_bits,rhythm_bits"));
    assert_eq!(lines.count(), 240);
    let codewords = read(dir.join("out_complexity/codewords.csv"));
    assert!(codewords.starts_with("song_id,feature,position,symbol\n"));
    // 40 pitch + 40 loudness + 40 timbre + 39 rhythm symbols per song
    assert_eq!(codewords.lines().count(), 1 + 240 * 159);

    let manifest: serde_json::Value = serde_json::from_str(&read(dir.join("out_trends/run_manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "trends");
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["config"]["bootstrap_n"], "100");
    assert_eq!(manifest["inputs"]["input"]["sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["calibration"].as_str().unwrap().contains("calibration.json"));

    // a configured calibration file is passed through unchanged
    let planted: serde_json::Value = serde_json::from_str(&read(dir.join("syn/calibration.json"))).unwrap();
    let calibrated: serde_json::Value = serde_json::from_str(&read(dir.join("out_calibrate/calibration.json"))).unwrap();
    assert_eq!(planted, calibrated);

    let ingested = read(dir.join("out_ingest/corpus.jsonl"));
    assert_eq!(ingested, read(dir.join("syn/corpus.jsonl")));
}

#[test]
fn ingest_applies_charts_and_filters() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let seg = r#"{"start":0.0,"loudness_max":-10.0,"pitches":[1,0,0,0,0,0,0,0,0,0,0,0],"timbre":[0,0,0,0,0,0,0,0,0,0,0,0]}"#;
    let rec = |id: &str, title: &str, artist: &str, year: &str, terms: &str| {
        format!(
            r#"{{"id":"{id}","title":"{title}","artist":"{artist}","year":{year},"duration":100.0,"tempo":120.0,"time_signature":4,"terms":{terms},"segments":[{seg}]}}"#
        )
    };
    let rock = r#"[{"term":"rock","weight":0.9}]"#;
    let corpus = [
        rec("s1", "Café del Mar", "Energy 52", "1993", rock),
        rec("s2", "cafe del mar", "ENERGY 52", "1999", rock),
        rec("s3", "Artist Interview", "Someone", "1980", rock),
        rec("s4", "Old Tune", "Band", "1950", rock),
        rec("s5", "No Tags", "Band", "1980", "[]"),
        rec("s6", "Undated", "Band", "null", rock),
    ]
    .join("\n");
    std::fs::write(dir.join("c.jsonl"), corpus + "\n").unwrap();
    std::fs::write(dir.join("charts.csv"), "title,artist\n\"CAFE DEL MAR\",Energy  52\n").unwrap();
    run(dir, &["ingest", "--input", "c.jsonl", "--charts", "charts.csv", "--out", "o"]);
    let report: serde_json::Value = serde_json::from_str(&read(dir.join("o/filter_report.json"))).unwrap();
    assert_eq!(report["songs_read"], 6);
    assert_eq!(report["songs_kept"], 2);
    assert_eq!(report["chart_matches"], 2);
    assert_eq!(report["hot100_kept"], 1);
    let removed = &report["removed"];
    assert_eq!(removed["removed_duplicates"], 1);
    assert_eq!(removed["removed_missing_metadata"], 1);
    assert_eq!(removed["removed_commentary"], 1);
    assert_eq!(removed["removed_out_of_range"], 1);
    let kept = read(dir.join("o/corpus.jsonl"));
    let ids: Vec<String> = kept
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids, ["s1", "s6"]);
    assert!(kept.lines().next().unwrap().contains("\"hot100\":true"));
}

#[test]
fn errors_exit_nonzero_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let fail = |args: &[&str]| {
        let out = bin().current_dir(dir).args(args).output().unwrap();
        assert!(!out.status.success(), "{args:?} succeeded");
        String::from_utf8_lossy(&out.stderr).to_string()
    };
    assert!(fail(&["complexity", "--out", "o"]).contains("--input"));
    std::fs::write(dir.join("bad.cfg"), "pitch_threshold = 0.5\nbogus = 1\n").unwrap();
    std::fs::write(dir.join("c.jsonl"), "{\"id\": 3}\n").unwrap();
    assert!(fail(&["complexity", "--input", "c.jsonl", "--config", "bad.cfg"]).contains("line 2"));
    assert!(fail(&["complexity", "--input", "c.jsonl", "--out", "o"]).contains("line 1"));
    assert!(fail(&["frobnicate"]).contains("unrecognized subcommand"));
}

#[test]
fn default_synth_runs_through_genres() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run(dir, &["synth", "--songs", "300", "--seed", "8", "--out", "s"]);
    std::fs::write(dir.join("g.cfg"), "calibration_path = s/calibration.json\nmin_genre_songs = 20\n").unwrap();
    run(dir, &["genres", "--input", "s/corpus.jsonl", "--config", "g.cfg", "--out", "g"]);
    let communities = read(dir.join("g/communities.csv"));
    assert_eq!(communities.lines().count(), 4);
    let newick = read(dir.join("g/dendrogram.nwk"));
    assert!(newick.trim_end().ends_with(';'));
}

#[test]
fn sampled_calibration_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // continuous timbre values, so different samples give different terciles
    let mut x = 7u64;
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64 * 100.0 - 50.0
    };
    let corpus: String = (0..200)
        .map(|i| {
            let segs: Vec<String> = (0..5)
                .map(|j| {
                    let timbre: Vec<String> = (0..12).map(|_| format!("{:.4}", next())).collect();
                    format!(
                        r#"{{"start":{j}.0,"loudness_max":-10.0,"pitches":[1,0,0,0,0,0,0,0,0,0,0,0],"timbre":[{}]}}"#,
                        timbre.join(",")
                    )
                })
                .collect();
            format!(
                r#"{{"id":"s{i:03}","title":"t{i}","artist":"a","year":1990,"duration":5.0,"tempo":120.0,"time_signature":4,"terms":[{{"term":"rock","weight":1.0}}],"segments":[{}]}}"#,
                segs.join(",")
            ) + "\n"
        })
        .collect();
    std::fs::create_dir(dir.join("s")).unwrap();
    std::fs::write(dir.join("s/corpus.jsonl"), corpus).unwrap();
    std::fs::write(dir.join("c.cfg"), "calibration_sample = 50\n").unwrap();
    let calibrate = |out: &str, seed: &str| {
        run(dir, &["calibrate", "--input", "s/corpus.jsonl", "--config", "c.cfg", "--seed", seed, "--out", out]);
        read(dir.join(out).join("calibration.json"))
    };
    let first = calibrate("a", "9");
    assert_eq!(first, calibrate("b", "9"));
    assert_ne!(first, calibrate("c", "10"));
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.join("a/run_manifest.json"))).unwrap();
    assert_eq!(manifest["calibration"], "sample of 50 songs");
}
