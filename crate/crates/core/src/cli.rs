//! Command-line front end. `run` never exits the process; it returns the
//! exit code so tests can drive it in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::corpus::{parse_corpus, validate_corpus, Corpus, CorpusFormat};
use crate::embeddings::load_word_vectors;
use crate::error::{Error, Result};
use crate::experiment::cv::cross_validate;
use crate::experiment::data::{NoObserver, Observe, Partition};
use crate::experiment::sweep::{cell_rows, read_rows, sweep, write_rows, Cell, SweepGrid};
use crate::experiment::train::{carve_dev, train};
use crate::experiment::{render_report, ExperimentConfig, Resources};
use crate::features::{compute_idf, handcrafted, LexiconBundle, SCALAR_NAMES, WORD_VECTOR_DIM};
use crate::synth::{write_synth, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "argctx", about = "Context-aware argument component classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print corpus statistics as JSON.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Write the 114 handcrafted features of every ADU as CSV.
    Featurize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicons: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus and word vectors.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one model on the whole corpus and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// k-fold cross-validation.
    Cv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validate every cell of a context grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a results table from a results CSV.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn json_pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn load_experiment(path: &Path, seed: Option<u64>) -> Result<(ExperimentConfig, Corpus, Resources)> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.training.seed = s;
    }
    let corpus = cfg.load_corpus()?;
    let res = Resources::load(&cfg, &corpus)?;
    Ok((cfg, corpus, res))
}

fn featurize(corpus: &Path, lexicons: &Path, vectors: &Path, out: &Path) -> Result<()> {
    let corpus = parse_corpus(corpus, CorpusFormat::from_path(corpus))?;
    let lex = LexiconBundle::load_dir(lexicons)?;
    let wv = load_word_vectors(vectors)?;
    let idf = compute_idf(&corpus)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["discussion_id", "global_index", "speaker_id", "label"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..WORD_VECTOR_DIM).map(|i| format!("wv_{i}")));
    header.extend(SCALAR_NAMES.iter().map(|s| s.to_string()));
    let csv_err = |e: csv::Error| Error::Data(format!("writing features: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for adu in corpus.adus() {
        let v = handcrafted(adu, &lex, &idf, &wv)?;
        let mut rec = vec![
            adu.discussion_id.clone(),
            adu.global_index.to_string(),
            adu.speaker_id.clone(),
            adu.label.map_or(String::new(), |l| l.as_str().to_string()),
        ];
        rec.extend(v.0.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    write_file(out, w.into_inner().map_err(|e| Error::Data(e.to_string()))?)
}

fn dispatch(cmd: Command, stdout: &mut dyn Write) -> Result<()> {
    let say = |out: &mut dyn Write, s: &str| out.write_all(s.as_bytes()).map_err(|e| Error::io("<stdout>", e));
    match cmd {
        Command::Validate { corpus } => {
            let c = parse_corpus(&corpus, CorpusFormat::from_path(&corpus))?;
            say(stdout, &json_pretty(&validate_corpus(&c)))
        }
        Command::Featurize {
            corpus,
            lexicons,
            vectors,
            out,
        } => featurize(&corpus, &lexicons, &vectors, &out),
        Command::Synth { config, out, seed } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let mut cfg = SynthConfig::from_json(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let corpus = write_synth(&cfg, &out)?;
            say(stdout, &format!("wrote {} ADUs to {}\n", corpus.adu_count(), out.display()))
        }
        Command::Train { config, out, seed } => {
            let (cfg, corpus, res) = load_experiment(&config, seed)?;
            let (tr, dev) = carve_dev(Partition::whole(corpus.discussions()), cfg.training.dev_fraction);
            let trained = train(&cfg, &res, &tr, &dev, cfg.training.seed, Observe::none())?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            trained.checkpoint(&cfg).save(&out.join("model.ckpt"))?;
            let log = serde_json::json!({
                "experiment": cfg,
                "seed": cfg.training.seed,
                "best_epoch": trained.best_epoch,
                "training_log": trained.log,
            });
            write_file(&out.join("training_log.json"), json_pretty(&log))?;
            say(stdout, &format!("best epoch {}; checkpoint in {}\n", trained.best_epoch, out.display()))
        }
        Command::Cv {
            config,
            out,
            jobs,
            seed,
        } => {
            let (cfg, corpus, res) = load_experiment(&config, seed)?;
            let outcome = cross_validate(&cfg, &corpus, &res, jobs, &NoObserver)?;
            let metrics = serde_json::json!({
                "experiment": cfg,
                "seed": outcome.seed,
                "report": outcome.report,
                "folds": outcome.folds,
            });
            write_file(&out.join("metrics.json"), json_pretty(&metrics))?;
            let cell = Cell {
                pipeline: cfg.pipeline,
                context: cfg.context,
            };
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            write_rows(&out.join("results.csv"), &cell_rows(&cell, &outcome))?;
            let r = &outcome.report;
            say(
                stdout,
                &format!(
                    "kappa {:.4}  precision {:.4}  recall {:.4}  f_score {:.4}  (seed {})\n",
                    r.kappa, r.precision, r.recall, r.f_score, outcome.seed
                ),
            )
        }
        Command::Sweep {
            config,
            grid,
            out_dir,
            jobs,
            seed,
        } => {
            let (cfg, corpus, res) = load_experiment(&config, seed)?;
            let grid = SweepGrid::load(&grid)?;
            let done = sweep(&cfg, &grid, &corpus, &res, &out_dir, jobs)?;
            say(
                stdout,
                &format!(
                    "{} result rows in {} ({} cells reused)\n",
                    done.rows.len(),
                    done.results.display(),
                    done.resumed
                ),
            )
        }
        Command::Report { results } => say(stdout, &render_report(&read_rows(&results)?)?),
    }
}

/// Runs the tool on `argv` (including the program name) and returns the exit
/// code: 0 success, 1 usage error, 2 data error, 3 numerical failure.
pub fn run_with(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => {
                    let _ = write!(stderr, "{}", e.render());
                    1
                }
                _ => {
                    let msg = e.render().to_string();
                    let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
                    let rest: String = msg.lines().skip(1).map(|l| format!("{l}\n")).collect();
                    let _ = write!(stderr, "ERROR[1]: {first}\n{rest}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            let _ = writeln!(stderr, "ERROR[{code}]: {e}");
            code
        }
    }
}

pub fn run(argv: &[String]) -> i32 {
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}
