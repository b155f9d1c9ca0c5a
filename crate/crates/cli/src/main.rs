use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use kanjidist::config::{EngineConfig, DEFAULT_MAX_LEVEL};
use kanjidist_cli::app::{exit_code, load_config, load_engine, parse_kanji, read_set, EXIT_BAD_ARGS};
use kanjidist_cli::commands::{self, Feature, MapMode, MatrixFormat};

#[derive(Parser)]
#[command(name = "kanjidist", version, about = "Visual distances between kanji")]
struct Cli {
    /// Engine config (flat TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Decomposition store, overriding the config.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Kanji list restricting the corpus, overriding the config.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Worker threads for batch work (default: number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory of kanjiVG SVG files into a decomposition store.
    Ingest {
        svg_dir: PathBuf,
        out_store: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_LEVEL)]
        max_level: usize,
    },
    /// Distance between two kanji.
    Dist {
        kanji1: String,
        kanji2: String,
        /// Print the optimal component matching as JSON.
        #[arg(long)]
        explain: bool,
    },
    /// Nearest neighbors of a kanji within the corpus.
    Knn {
        kanji: String,
        k: usize,
        /// Add the distance bracket of each neighbor.
        #[arg(long)]
        brackets: bool,
    },
    /// Two-dimensional map of a kanji set, written as JSON and SVG.
    Map {
        set_file: PathBuf,
        #[arg(long, value_enum, default_value_t = MapMode::Focused)]
        mode: MapMode,
        #[arg(long)]
        center: Option<String>,
        /// Output path without extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute and save the distance matrix of a kanji set.
    Matrix {
        set_file: PathBuf,
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
        format: MatrixFormat,
    },
    /// Fit the weights (or one psi) of the component distance to judgment data.
    Fit {
        csv: PathBuf,
        /// Fit psi for this feature instead of the weights.
        #[arg(long, value_enum)]
        psi: Option<Feature>,
        /// Write the updated config here.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Write the default config.
    InitConfig { out: PathBuf },
    /// Serve the JSON API for the explorer.
    Serve {
        #[arg(long, default_value_t = 8787)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn config_for(cli: &Cli) -> anyhow::Result<EngineConfig> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(s) = &cli.store {
        config.store = s.clone();
    }
    if let Some(c) = &cli.corpus {
        config.corpus = Some(c.clone());
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Ingest { svg_dir, out_store, max_level } => {
            let report = commands::ingest(svg_dir, out_store, *max_level)?;
            for f in &report.failures {
                eprintln!("failed: {}: {}", f.file.display(), f.error);
            }
            println!("{} kanji ingested, {} failed", report.count, report.failures.len());
        }
        Command::Dist { kanji1, kanji2, explain } => {
            let (c1, c2) = (parse_kanji(kanji1)?, parse_kanji(kanji2)?);
            let engine = load_engine(&config_for(&cli)?)?;
            print!("{}", commands::dist(&engine, c1, c2, *explain)?);
        }
        Command::Knn { kanji, k, brackets } => {
            let c = parse_kanji(kanji)?;
            let engine = load_engine(&config_for(&cli)?)?;
            print!("{}", commands::knn(&engine, c, *k, *brackets)?);
        }
        Command::Map { set_file, mode, center, out } => {
            let center = center.as_deref().map(parse_kanji).transpose()?;
            let set = read_set(set_file)?;
            let engine = load_engine(&config_for(&cli)?)?;
            let output = commands::map(&engine, &set, *mode, center)?;
            let stem = out.clone().unwrap_or_else(|| PathBuf::from(commands::default_map_stem(*mode, center)));
            let (json, svg) = (stem.with_extension("json"), stem.with_extension("svg"));
            std::fs::write(&json, output.json).with_context(|| format!("writing {}", json.display()))?;
            std::fs::write(&svg, output.svg).with_context(|| format!("writing {}", svg.display()))?;
            println!("{}\n{}", json.display(), svg.display());
        }
        Command::Matrix { set_file, out, format } => {
            let set = read_set(set_file)?;
            let engine = load_engine(&config_for(&cli)?)?;
            print!("{}", commands::matrix(&engine, &set, out, *format)?);
        }
        Command::Fit { csv, psi, write_config } => {
            let (updated, summary) = commands::fit(&config_for(&cli)?, csv, *psi)?;
            print!("{summary}");
            if let Some(path) = write_config {
                updated.save(path).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::InitConfig { out } => {
            config_for(&cli)?.save(out).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Serve { port, host } => {
            let engine = load_engine(&config_for(&cli)?)?;
            let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
            runtime.block_on(kanjidist_cli::serve::serve(engine, host, *port))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_ARGS } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
