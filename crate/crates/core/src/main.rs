use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use songplexity::pipeline::commands::{run, Command, RunOptions};
use songplexity::pipeline::Config;

/// Information-theoretic complexity of songs.
#[derive(Debug, Parser)]
#[command(name = "songplexity", version)]
struct Cli {
    /// Song corpus, one JSON record per line.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Chart list CSV with a title,artist header.
    #[arg(long, global = true)]
    charts: Option<PathBuf>,
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Parse, chart-match and filter a corpus.
    Ingest,
    /// Compute timbre tercile thresholds.
    Calibrate,
    /// Per-song conditional entropies and histograms.
    Complexity,
    /// Hot 100 songs against random samples of the corpus.
    ComparePopularity,
    /// Yearly means and per-epoch trend fits.
    Trends,
    /// Same-year KL divergence of Hot 100 songs.
    Divergence,
    /// Genre deviations, KS tests, correlations and clustering.
    Genres,
    /// Genre clustering only.
    Cluster,
    /// Generate a synthetic corpus with planted complexity.
    Synth {
        /// JSON generator spec (default spec when absent).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Number of songs, overriding the `--spec` file.
        #[arg(long)]
        songs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> songplexity::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| songplexity::Error::InvalidArgument(e.to_string()))?;
    }
    let config = match &cli.config {
        Some(p) => Config::parse(&std::fs::read_to_string(p)?)?,
        None => Config::default(),
    };
    let (command, synth_spec, synth_songs) = match cli.command {
        Cmd::Ingest => (Command::Ingest, None, None),
        Cmd::Calibrate => (Command::Calibrate, None, None),
        Cmd::Complexity => (Command::Complexity, None, None),
        Cmd::ComparePopularity => (Command::ComparePopularity, None, None),
        Cmd::Trends => (Command::Trends, None, None),
        Cmd::Divergence => (Command::Divergence, None, None),
        Cmd::Genres => (Command::Genres, None, None),
        Cmd::Cluster => (Command::Cluster, None, None),
        Cmd::Synth { spec, songs } => (Command::Synth, spec, songs),
    };
    let opts = RunOptions {
        input: cli.input,
        charts: cli.charts,
        config,
        config_path: cli.config,
        seed: cli.seed,
        out: cli.out,
        threads: cli.threads,
        synth_spec,
        synth_songs,
    };
    let manifest = run(command, &opts)?;
    for name in &manifest.outputs {
        println!("{}", opts.out.join(name).display());
    }
    Ok(())
}
