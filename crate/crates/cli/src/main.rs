use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use gfacs::aco::{run_aco, AcoConfig, AcoError, UpdateRule, TRACE_HEADER};
use gfacs::experiment::{generate_instance, instance_seed, run_ablation, run_arm, run_experiment, Arm, ExperimentConfig};
use gfacs::gfn_train::{train_prior, LossKind, TrainConfig, TELEMETRY_HEADER};
use gfacs::heatmap::Heatmap;
use gfacs::io::{instance_to_json, parse_instance_json, parse_tsplib, read_text, write_text};
use gfacs::local_search::{LocalSearch, LsConfig};
use gfacs::parallel::with_threads;
use gfacs::problems::{Instance, ProblemKind};
use gfacs::seed::{rng_from_seed, role_seed};

#[derive(Parser)]
#[command(name = "gfacs", version, about = "Ant colony optimization with GFlowNet-trained priors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate random instances as JSON.
    Generate {
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[command(flatten)]
        opts: Opts,
    },
    /// Train a prior for one instance and write the heatmap JSON.
    TrainPrior {
        /// Per-epoch telemetry CSV.
        #[arg(long)]
        telemetry: Option<PathBuf>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run ant colony search on one instance; prints SearchResult JSON.
    Solve {
        /// uniform, heuristic, gfacs_tb, gfacs_vargrad, ... or a heatmap JSON file.
        #[arg(long, default_value = "heuristic")]
        prior: String,
        /// Per-round trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run a prior-comparison experiment and write CSV tables.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        arms: Option<Vec<Arm>>,
        #[arg(long)]
        instances: Option<usize>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run the ablation arms and write CSV tables.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        instances: Option<usize>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Convert a TSPLIB EUC_2D file to instance JSON.
    ParseTsplib {
        /// Use the nearest-integer distance convention.
        #[arg(long)]
        rounded: bool,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args, Default)]
struct Opts {
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    ants: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, value_parser = parse_rule)]
    rule: Option<UpdateRule>,
    #[arg(long, overrides_with = "no_ls")]
    ls: bool,
    #[arg(long, overrides_with = "ls")]
    no_ls: bool,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    k_samples: Option<usize>,
    #[arg(long, value_parser = parse_loss)]
    loss: Option<LossKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rule(s: &str) -> Result<UpdateRule, String> {
    s.parse()
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "tb" => Ok(LossKind::Tb),
        "vargrad" => Ok(LossKind::Vargrad),
        other => Err(format!("unknown loss `{other}` (expected tb or vargrad)")),
    }
}

/// Exit 2 for configuration problems, 1 for failures while running.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

type Res<T> = Result<T, Failure>;

fn config<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

impl Opts {
    fn ls_flag(&self) -> Option<bool> {
        match (self.ls, self.no_ls) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }

    fn apply_train(&self, t: &mut TrainConfig) {
        if let Some(v) = self.beta_min {
            t.beta_min = v;
        }
        if let Some(v) = self.beta_max {
            t.beta_max = v;
        }
        if let Some(v) = self.epochs {
            t.n_epoch = v;
            t.n_flat = t.n_flat.min(v.saturating_sub(1));
        }
        if let Some(v) = self.k_samples {
            t.k_samples = v;
        }
        if let Some(v) = self.loss {
            t.loss = v;
        }
    }

    fn apply_aco(&self, a: &mut AcoConfig) {
        if let Some(v) = self.ants {
            a.n_ants = v;
        }
        if let Some(v) = self.rounds {
            a.n_rounds = v;
        }
        if let Some(v) = self.rule {
            a.rule = v;
        }
        if let Some(v) = self.ls_flag() {
            a.use_ls = v;
        }
        if let Some(v) = self.seed {
            a.seed = v;
        }
    }

    fn train_config(&self, kind: ProblemKind) -> Res<TrainConfig> {
        let mut t = TrainConfig::for_problem(kind);
        self.apply_train(&mut t);
        t.check().map_err(config)?;
        Ok(t)
    }

    fn aco_config(&self) -> Res<AcoConfig> {
        let mut a = AcoConfig::default();
        self.apply_aco(&mut a);
        a.check().map_err(config)?;
        Ok(a)
    }

    fn load_instance(&self) -> Res<Instance> {
        let path = self.instance.as_ref().ok_or_else(|| config(anyhow!("--instance is required")))?;
        let text = read_text(path).map_err(config)?;
        let doc = parse_instance_json(&text).with_context(|| path.display().to_string()).map_err(config)?;
        if let Some(k) = self.problem.filter(|&k| k != doc.instance.kind()) {
            return Err(config(anyhow!("--problem {k} does not match instance kind {}", doc.instance.kind())));
        }
        Ok(doc.instance)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => write_text(p, text).map_err(runtime),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn experiment_config(path: Option<&Path>, opts: &Opts, instances: Option<usize>) -> Res<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = read_text(p).map_err(config)?;
            serde_json::from_str::<ExperimentConfig>(&text).with_context(|| p.display().to_string()).map_err(config)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(k) = opts.problem {
        cfg.problem = k;
    }
    if let Some(n) = opts.size {
        cfg.size = n;
    }
    if let Some(n) = instances {
        cfg.n_test_instances = n;
    }
    if let Some(s) = opts.seed {
        cfg.master_seed = s;
    }
    let mut train = cfg.train_config();
    opts.apply_train(&mut train);
    cfg.train = Some(train);
    let seed = cfg.aco.seed;
    opts.apply_aco(&mut cfg.aco);
    cfg.aco.seed = seed;
    if let Some(o) = &opts.out {
        cfg.out_dir = Some(o.display().to_string());
    }
    cfg.check().map_err(config)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Res<()> {
    match cli.cmd {
        Cmd::Generate { count, opts } => {
            let kind = opts.problem.ok_or_else(|| config(anyhow!("--problem is required")))?;
            let size = opts.size.ok_or_else(|| config(anyhow!("--size is required")))?;
            let master = opts.seed.unwrap_or(0);
            let mut docs = Vec::with_capacity(count);
            for i in 0..count {
                let seed = instance_seed(master, i);
                let inst = generate_instance(kind, size, seed).map_err(config)?;
                docs.push(instance_to_json(&inst, Some(seed)));
            }
            match (&opts.out, count) {
                (Some(p), 1) if p.extension().is_some_and(|e| e == "json") => emit(Some(p), &docs[0]),
                (Some(dir), _) => {
                    for (i, d) in docs.iter().enumerate() {
                        emit(Some(&dir.join(format!("{kind}{size}_{i:03}.json"))), d)?;
                    }
                    Ok(())
                }
                (None, _) => docs.iter().try_for_each(|d| emit(None, d)),
            }
        }
        Cmd::TrainPrior { telemetry, opts } => {
            let inst = opts.load_instance()?;
            let train = opts.train_config(inst.kind())?;
            let mut ls = LocalSearch::auto(LsConfig::default());
            if opts.ls_flag() == Some(false) {
                ls = LocalSearch::none();
            }
            let mut rng = rng_from_seed(role_seed(opts.seed.unwrap_or(0), "train", 0));
            let trained = train_prior(&inst, &train, &ls, &mut rng).map_err(runtime)?;
            if let Some(p) = telemetry {
                let mut s = format!("# gfacs telemetry v1\n{TELEMETRY_HEADER}\n");
                for r in &trained.telemetry {
                    s.push_str(&r.csv_row());
                    s.push('\n');
                }
                write_text(&p, &s).map_err(runtime)?;
            }
            emit(opts.out.as_deref(), &serde_json::to_string(&trained.heatmap).map_err(runtime)?)
        }
        Cmd::Solve { prior, trace, opts } => {
            let inst = opts.load_instance()?;
            let aco = opts.aco_config()?;
            let train = opts.train_config(inst.kind())?;
            let ls = LocalSearch::auto(LsConfig::default());
            let result = match prior.parse::<Arm>() {
                Ok(arm) => run_arm(&inst, arm, &train, &aco, &ls),
                Err(arm_err) => {
                    let path = Path::new(&prior);
                    if !path.is_file() {
                        return Err(config(anyhow!("{arm_err}, and no heatmap file `{prior}` exists")));
                    }
                    let text = read_text(path).map_err(config)?;
                    let eta: Heatmap = serde_json::from_str(&text).with_context(|| prior.clone()).map_err(config)?;
                    run_aco(&inst, &eta, &aco, &ls)
                }
            };
            let result = result.map_err(|e| match e {
                AcoError::Config(_) | AcoError::Dimension { .. } => config(e),
                AcoError::Train(_) => runtime(e),
            })?;
            if let Some(p) = trace {
                let mut s = format!("# gfacs trace v1\n{TRACE_HEADER}\n");
                for row in result.trace_rows() {
                    s.push_str(&row);
                    s.push('\n');
                }
                write_text(&p, &s).map_err(runtime)?;
            }
            emit(opts.out.as_deref(), &serde_json::to_string_pretty(&result).map_err(runtime)?)
        }
        Cmd::Bench { config: path, arms, instances, opts } => {
            let mut cfg = experiment_config(path.as_deref(), &opts, instances)?;
            if let Some(a) = arms {
                cfg.arms = a;
                cfg.check().map_err(config)?;
            }
            let report = run_experiment(&cfg).map_err(runtime)?;
            finish(&cfg, &report, false)
        }
        Cmd::Ablate { config: path, instances, opts } => {
            let cfg = experiment_config(path.as_deref(), &opts, instances)?;
            let report = run_ablation(&cfg).map_err(runtime)?;
            finish(&cfg, &report, true)
        }
        Cmd::ParseTsplib { rounded, opts } => {
            let path = opts.instance.as_ref().ok_or_else(|| config(anyhow!("--instance is required")))?;
            let text = read_text(path).map_err(config)?;
            let tsp = parse_tsplib(&text, rounded).with_context(|| path.display().to_string()).map_err(config)?;
            emit(opts.out.as_deref(), &instance_to_json(&Instance::Tsp(tsp), None))
        }
    }
}

fn finish(cfg: &ExperimentConfig, report: &gfacs::experiment::Report, ablation: bool) -> Res<()> {
    match &cfg.out_dir {
        Some(dir) => report.write(Path::new(dir), ablation).map_err(runtime)?,
        None => print!("{}", if ablation { report.ablation_csv() } else { report.summary_csv() }),
    }
    let failures: usize = report.summaries.iter().map(|s| s.failures).sum();
    if failures > 0 {
        eprintln!("warning: {failures} run(s) failed; see the status column of results.csv");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match std::env::var("GFACS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                eprintln!("error: GFACS_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        },
        Err(_) => None,
    };
    match with_threads(threads, || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
