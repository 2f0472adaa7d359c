use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcmp_core::harness::{
    replay, run_episode, scenario_roadmap, sweep, write_outputs, ExperimentConfig, PredictorKind, RunLog, Scenario,
};
use pcmp_core::planner::Pipeline;
use pcmp_core::prediction::{generate_training_data, Head, TrainHyperparams, TrainedModelSet, TrainingDataset};
use pcmp_core::{Error, Result};

#[derive(Parser)]
#[command(name = "pcmp", version, about = "Risk-aware path planning among predicted moving obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the scenario roadmap as JSON.
    GenGraph(Common),
    /// Write a training dataset as CSV.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20_000)]
        sequences: usize,
    },
    /// Train prediction models from a dataset CSV.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Heads to train: regression, classification or both.
        #[arg(long, default_value = "both")]
        heads: String,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run one episode and write its metrics as JSON.
    Simulate(Common),
    /// Sweep the risk parameter and write CSV, JSON log and plot CSV.
    Experiment(Common),
    /// Re-run an experiment from its log and compare the CSV output.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated risk parameters.
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<f64>>,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    pipeline: Option<Pipeline>,
    #[arg(long)]
    predictor: Option<PredictorKind>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    targets: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str::<ExperimentConfig>(&text)?
            }
            None => {
                let seed = self.seed.ok_or_else(|| Error::Config("a master seed is required (--seed or --config)".into()))?;
                ExperimentConfig::scenario(self.scenario.unwrap_or(Scenario::A), seed)
            }
        };
        if let Some(s) = self.scenario {
            cfg.apply_scenario(s);
        }
        if let Some(seed) = self.seed {
            cfg.experiment.master_seed = seed;
        }
        if let Some(r) = &self.r {
            cfg.experiment.r_values.clone_from(r);
        }
        if let Some(p) = self.pipeline {
            cfg.experiment.pipeline = p;
        }
        if let Some(p) = self.predictor {
            cfg.experiment.predictor = p;
        }
        if let Some(m) = &self.model {
            cfg.experiment.model = Some(m.clone());
        }
        if let Some(n) = self.repeats {
            cfg.experiment.repeats = n;
        }
        if let Some(n) = self.targets {
            cfg.experiment.targets = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn heads(spec: &str) -> Result<Vec<Head>> {
    match spec {
        "regression" => Ok(vec![Head::Regression]),
        "classification" => Ok(vec![Head::Classification]),
        "both" => Ok(vec![Head::Regression, Head::Classification]),
        other => Err(Error::Config(format!("unknown heads '{other}'"))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph(c) => {
            let cfg = c.resolve()?;
            write(&c.out, &scenario_roadmap(&cfg)?.to_json()?)?;
        }
        Command::GenData { common, sequences } => {
            let cfg = common.resolve()?;
            let data = generate_training_data(&cfg.world, &cfg.prediction, sequences, cfg.experiment.master_seed)?;
            let mut buf = Vec::new();
            data.write_csv(&mut buf)?;
            write(&common.out, &String::from_utf8(buf).expect("csv output is utf-8"))?;
        }
        Command::Train { common, data, heads: spec, epochs } => {
            let cfg = common.resolve()?;
            let file = std::fs::File::open(&data).map_err(|e| Error::io(&data, e))?;
            let dataset = TrainingDataset::read_csv(file, cfg.world.map, &cfg.prediction)?;
            let mut hyper = TrainHyperparams::default();
            if let Some(e) = epochs {
                hyper.max_epochs = e;
            }
            let hash = TrainedModelSet::hash_for(&(&cfg.world, &cfg.prediction, &hyper))?;
            let set =
                TrainedModelSet::train(&dataset, &heads(&spec)?, &cfg.prediction, &hyper, cfg.experiment.master_seed, hash)?;
            write(&common.out, &serde_json::to_string(&set)?)?;
        }
        Command::Simulate(c) => {
            let cfg = c.resolve()?;
            let r = cfg.experiment.r_values.first().copied().unwrap_or(0.0);
            let models = match &cfg.experiment.model {
                Some(p) if cfg.experiment.predictor == PredictorKind::Trained => Some(TrainedModelSet::load(p)?),
                _ => None,
            };
            let metrics = run_episode(&cfg, r, models.as_ref())?;
            let doc = serde_json::json!({ "config_hash": cfg.hash()?, "config": cfg, "metrics": metrics });
            write(&c.out, &serde_json::to_string_pretty(&doc)?)?;
        }
        Command::Experiment(c) => {
            let cfg = c.resolve()?;
            let result = sweep(&cfg, None)?;
            let log = RunLog::new(cfg, result.rows, result.episodes)?;
            let paths = write_outputs(&c.out, &log)?;
            for row in &log.rows {
                println!(
                    "r={} collisions={} avoided={:.1}% detour={:.2}%",
                    row.r, row.collisions, row.avoided_pct, row.detour_pct
                );
            }
            println!("wrote {}", paths.comparison_csv.display());
        }
        Command::Replay { log, out } => {
            let report = replay(&log)?;
            if let Some(dir) = out {
                write_outputs(&dir, &report.log)?;
            }
            for (line, a, b) in &report.differences {
                println!("line {line}: logged `{a}` replayed `{b}`");
            }
            if !report.identical {
                return Err(Error::Precondition(format!("replay differs in {} lines", report.differences.len())));
            }
            println!("replay identical");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}
