use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use ctcd::ctc::{beam_nbest, PosteriorGrid};
use ctcd::harness::{
    evaluate, load_data, read_matrix_csv, run_matrix, summarize, train, write_run, Method, RunConfig,
};
use ctcd::models::{Checkpoint, Encoder};
use ctcd::synthdata::{read_dataset, write_dataset};
use ctcd::{Error, Result};

#[derive(Parser)]
#[command(name = "ctcd", version, about = "Knowledge distillation for CTC acoustic models on toy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file (`section.key = value` lines); defaults apply without one.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory, overriding `train.out_dir`.
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
            config.set(k.trim(), v.trim())?;
        }
        if let Some(d) = &self.out_dir {
            config.out_dir = d.clone();
        }
        config.apply_env()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the train and eval datasets described by `task.*`.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// CTC-only training on the ground truth.
    TrainBaseline {
        #[command(flatten)]
        config: ConfigArgs,
        /// Train with the `teacher.*` architecture, to produce a teacher.
        #[arg(long)]
        teacher: bool,
    },
    /// Distillation run.
    TrainKd {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_parser = parse_method)]
        method: Method,
    },
    /// Greedy-decode a dataset and print pooled WER and TER.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Label id of the word separator.
        #[arg(long, default_value_t = 0)]
        space: usize,
    },
    /// Print the prefix-beam n-best list for each utterance.
    Nbest {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(short, long, default_value_t = ctcd::ctc::DEFAULT_NBEST)]
        n: usize,
        #[arg(long, default_value_t = ctcd::ctc::DEFAULT_BEAM_WIDTH)]
        beam: usize,
        /// Only this utterance id.
        #[arg(long)]
        utterance: Option<String>,
    },
    /// Every scenario × method × seed; writes matrix.csv and summary.md.
    Matrix {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Summarise a matrix.csv as a markdown table.
    Report {
        #[arg(long)]
        matrix: PathBuf,
    },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s.parse::<Method>() {
        Ok(Method::Baseline) => Err("use train-baseline for the baseline".into()),
        Ok(m) => Ok(m),
        Err(e) => Err(e.to_string()),
    }
}

fn load_encoder(path: &Path) -> Result<Encoder> {
    Encoder::from_checkpoint(&Checkpoint::load(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { config } => {
            let config = config.load()?;
            let mut plain = config.clone();
            plain.train_data = None;
            plain.eval_data = None;
            let (train_set, eval_set) = load_data(&plain)?;
            std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::File {
                path: config.out_dir.clone(),
                source: e,
            })?;
            let train_path = config.train_data.clone().unwrap_or(config.out_dir.join("train.ctcd"));
            let eval_path = config.eval_data.clone().unwrap_or(config.out_dir.join("eval.ctcd"));
            write_dataset(&train_set, &train_path)?;
            write_dataset(&eval_set, &eval_path)?;
            println!("{} training utterances -> {}", train_set.len(), train_path.display());
            println!("{} held-out utterances -> {}", eval_set.len(), eval_path.display());
        }
        Command::TrainBaseline { config, teacher } => {
            let mut config = config.load()?;
            if teacher {
                config.student = config.teacher.clone();
            }
            train_and_write(&config, Method::Baseline)?;
        }
        Command::TrainKd { config, method } => {
            let config = config.load()?;
            train_and_write(&config, method)?;
        }
        Command::Eval {
            checkpoint,
            data,
            space,
        } => {
            let encoder = load_encoder(&checkpoint)?;
            let report = evaluate(&encoder, &read_dataset(&data)?, space)?;
            print!("{}", report.to_text());
        }
        Command::Nbest {
            checkpoint,
            data,
            n,
            beam,
            utterance,
        } => {
            let encoder = load_encoder(&checkpoint)?;
            let dataset = read_dataset(&data)?;
            let mut found = false;
            for u in &dataset.utterances {
                if utterance.as_ref().is_some_and(|id| id != &u.id) {
                    continue;
                }
                found = true;
                let grid = PosteriorGrid::from_logits(&encoder.infer(&u.features)?.logits)?;
                println!("{}", u.id);
                for (rank, (seq, score)) in beam_nbest(&grid, beam, n).iter().enumerate() {
                    let labels: Vec<String> = seq.labels().iter().map(usize::to_string).collect();
                    println!("  {} {score:.6} [{}]", rank + 1, labels.join(" "));
                }
            }
            if let (Some(id), false) = (utterance, found) {
                return Err(Error::Usage(format!("no utterance `{id}` in {}", data.display())));
            }
        }
        Command::Matrix { config } => {
            let config = config.load()?;
            config.validate()?;
            let (train_set, eval_set) = load_data(&config)?;
            let rows = run_matrix(&config, &train_set, &eval_set, Some(&config.out_dir))?;
            print!("{}", summarize(&rows));
        }
        Command::Report { matrix } => {
            print!("{}", summarize(&read_matrix_csv(&matrix)?));
        }
    }
    Ok(())
}

fn train_and_write(config: &RunConfig, method: Method) -> Result<()> {
    let (train_set, eval_set) = load_data(config)?;
    let outcome = train(config, method, &train_set, &eval_set)?;
    write_run(&config.out_dir, &outcome)?;
    info!("wrote {}", config.out_dir.display());
    if let Some(e) = &outcome.report.eval {
        let wer = e.wer.map_or("nan".to_string(), |w| format!("{w:.4}"));
        println!("{method} seed {}: WER {wer} TER {:.4}", config.seed, e.ter);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
