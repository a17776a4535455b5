//! `fedgnids`: synthetic data, partitioning, federated training, evaluation and reports.
//!
//! Progress goes to stderr; set `FEDGNIDS_LOG=info` (or `debug`) to see it.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fedgnids::adversary::AttackConfig;
use fedgnids::experiment::{
    build_global_graph, evaluate, load_events, partition, prepare, train, ExperimentConfig, History,
    Precision, Prepared, RunStatus, RunSummary,
};
use fedgnids::fed::Scheme;
use fedgnids::graph::Label;
use fedgnids::io::{
    read_json, read_model, synth_dataset, write_blocks_csv, write_edge_csv, write_json, write_model,
    write_partition_csv, write_pr_curve, write_weights_csv, SynthSpec,
};
use fedgnids::{Error, Scalar};

const ARTIFACTS: [&str; 7] = [
    "model.bin",
    "model.json",
    "weights.csv",
    "history.json",
    "metrics.json",
    "pr_curve.csv",
    "config.toml",
];

#[derive(Parser)]
#[command(name = "fedgnids", version, about = "Federated graph intrusion detection experiments")]
struct Cli {
    /// Base seed, overriding the one in the config or spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic block-model dataset with planted attack edges.
    Synth {
        /// TOML file with synth settings; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory for edges.csv, blocks.csv and id_map.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the node-to-client assignment of a config's dataset.
    Partition {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV (`node_id,client_id`).
        #[arg(long)]
        out: PathBuf,
    },
    /// Federated training without an attacker.
    Train(TrainArgs),
    /// Federated training with poisoned clients.
    Attack {
        #[command(flatten)]
        train: TrainArgs,
        /// 1-based malicious clients, comma separated.
        #[arg(long, value_delimiter = ',')]
        clients: Vec<usize>,
        /// Per-snapshot replay probability.
        #[arg(long)]
        p: Option<f64>,
        /// Scale factor on submitted parameters.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Score the test split of a trained run.
    Eval {
        /// Run directory written by `train` or `attack`.
        #[arg(long)]
        run: PathBuf,
        /// Config to use instead of the run's config.toml.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare evaluated runs in one table keyed by scheme.
    Report {
        /// Run directories or metrics.json files.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Client worker threads (0: one per core).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEDGNIDS_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth { spec, out } => synth(spec.as_deref(), &out, seed),
        Command::Partition { config, out } => write_partition(&config, &out, seed),
        Command::Train(args) => {
            let mut cfg = training_config(&args, seed)?;
            if cfg.attack.take().is_some() {
                log::warn!("ignoring [attack]; use `fedgnids attack` to train under it");
            }
            run_training(cfg)
        }
        Command::Attack {
            train,
            clients,
            p,
            gamma,
        } => {
            let mut cfg = training_config(&train, seed)?;
            let base = cfg.attack.take();
            let clients = if clients.is_empty() {
                base.as_ref().map(|a| a.malicious_clients.clone()).unwrap_or_default()
            } else {
                clients.into_iter().collect()
            };
            if clients.is_empty() {
                bail!("no malicious clients: pass --clients or set attack.malicious_clients");
            }
            let attack = AttackConfig {
                malicious_clients: clients,
                p: p.or(base.as_ref().map(|a| a.p)).unwrap_or(1.0),
                gamma: gamma.or(base.as_ref().map(|a| a.gamma)).unwrap_or(1.0),
            };
            cfg.attack = Some(attack);
            run_training(cfg)
        }
        Command::Eval { run, config } => eval(&run, config.as_deref(), seed),
        Command::Report { runs, format, out } => report_cmd(&runs, format, out.as_deref()),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn synth(spec: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec: SynthSpec = match spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let data = synth_dataset(&spec)?;
    fs::create_dir_all(out)?;
    write_edge_csv(&out.join("edges.csv"), &data.events, &data.ids)?;
    write_blocks_csv(&out.join("blocks.csv"), &data)?;
    data.ids.write_csv(&out.join("id_map.csv"))?;
    fs::write(out.join("spec.toml"), toml::to_string(&spec)?)?;
    let malicious = data.events.iter().filter(|e| e.label == Label::Malicious).count();
    println!(
        "{} events ({malicious} malicious) over {} nodes written to {}",
        data.events.len(),
        spec.nodes,
        out.display()
    );
    Ok(())
}

fn write_partition(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let events = load_events(&cfg)?;
    let graph = build_global_graph(&cfg, &events)?;
    let pm = partition(&cfg, &graph, &events.ids)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_partition_csv(out, &pm, &events.ids)?;
    println!("client sizes {:?} written to {}", pm.sizes(), out.display());
    Ok(())
}

fn training_config(args: &TrainArgs, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&args.config, seed)?;
    if let Some(s) = args.scheme {
        cfg.federation.scheme = s;
    }
    if let Some(w) = args.workers {
        cfg.federation.workers = w;
    }
    if let Some(out) = &args.out {
        cfg.output = std::path::absolute(out)?;
    }
    Ok(cfg)
}

fn run_training(cfg: ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    let out = cfg.output.clone();
    fs::create_dir_all(&out)?;
    for name in ARTIFACTS {
        let p = out.join(name);
        if p.exists() {
            fs::remove_file(&p)?;
        }
    }
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let prep = prepare(&cfg)?;
    log::info!(
        "{} nodes, {} windows, clients {:?}",
        prep.graph.nodes.len(),
        prep.windows,
        prep.clients.iter().map(|c| c.owned.len()).collect::<Vec<_>>()
    );
    match cfg.precision {
        Precision::F32 => train_into::<f32>(&cfg, &prep, &out),
        Precision::F64 => train_into::<f64>(&cfg, &prep, &out),
    }
}

fn train_into<T: Scalar>(cfg: &ExperimentConfig, prep: &Prepared, out: &Path) -> Result<()> {
    let trained = train::<T>(cfg, prep)?;
    write_json(&out.join("history.json"), &trained.history)?;
    let Some(outcome) = &trained.outcome else {
        let why = trained.history.diagnosis.unwrap_or_else(|| "NaN".into());
        bail!("{why}; history written to {}", out.display());
    };
    write_model(out, "model", outcome.params())?;
    write_weights_csv(&out.join("weights.csv"), &outcome.weight_log)?;
    let h = &trained.history;
    println!(
        "{} finished {} iterations{} -> {}",
        h.scheme,
        h.iterations,
        if h.stopped_early { " (early stop)" } else { "" },
        out.display()
    );
    Ok(())
}

fn eval(run: &Path, config: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let cfg_path = config.map_or_else(|| run.join("config.toml"), Path::to_path_buf);
    let cfg = load_config(&cfg_path, seed)?;
    let history: History = read_json(&run.join("history.json"))
        .with_context(|| format!("no training history in {}", run.display()))?;
    let curve = run.join("pr_curve.csv");
    if curve.exists() {
        fs::remove_file(&curve)?;
    }
    let summary = match history.status {
        RunStatus::Nan => RunSummary::new(&history, cfg.attack.as_ref(), None),
        RunStatus::Completed => {
            let prep = prepare(&cfg)?;
            let ev = match cfg.precision {
                Precision::F32 => evaluate(&cfg, &prep, &read_model::<f32>(run, "model")?),
                Precision::F64 => evaluate(&cfg, &prep, &read_model::<f64>(run, "model")?),
            };
            match ev {
                Ok(ev) => {
                    write_pr_curve(&curve, &ev.curve)?;
                    RunSummary::new(&history, cfg.attack.as_ref(), Some(ev.report))
                }
                // finite weights can still overflow once multiplied out
                Err(e @ Error::NonFiniteScores { .. }) => {
                    let mut s = RunSummary::new(&history, cfg.attack.as_ref(), None);
                    s.status = RunStatus::Nan;
                    s.diagnosis = Some(e.to_string());
                    s
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    write_json(&run.join("metrics.json"), &summary)?;
    match &summary.metrics {
        Some(m) => println!(
            "{}: AP {:.4} AUC {:.4} precision {:.4} recall {:.4}{}",
            summary.scheme,
            m.ap,
            m.auc,
            m.precision,
            m.recall,
            m.sr.map_or(String::new(), |s| format!(" SR {s:.4}"))
        ),
        None => println!(
            "{}: diverged, no metrics ({})",
            summary.scheme,
            summary.diagnosis.as_deref().unwrap_or("NaN")
        ),
    }
    Ok(())
}

fn report_cmd(runs: &[PathBuf], format: Format, out: Option<&Path>) -> Result<()> {
    let mut summaries = Vec::with_capacity(runs.len());
    for r in runs {
        let path = if r.is_dir() { r.join("metrics.json") } else { r.clone() };
        let s: RunSummary = read_json(&path).with_context(|| format!("reading {}", path.display()))?;
        summaries.push(s);
    }
    let rows = report::build(&summaries);
    let text = match format {
        Format::Markdown => report::markdown(&rows),
        Format::Csv => report::csv(&rows)?,
    };
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
