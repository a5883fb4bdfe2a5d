//! Seeded experiment orchestration: prior comparisons and ablations over a
//! generated (or loaded) test set, written as deterministic CSV tables.
//!
//! Seeds: instance `i` is generated from `role_seed(master, "instance", i)`.
//! Every arm solving instance `i` with model seed `s` uses the search seed
//! `derive_seed(master, [tag("run"), i, s])`, so arms are paired per
//! instance and independent of which arms are enabled.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aco::{run_aco, run_gfacs, AcoConfig, AcoError, SearchResult};
use crate::gfn_train::{LossKind, TrainConfig};
use crate::heatmap::{heuristic_prior, uniform_prior};
use crate::io::{csv_table, read_instance, write_text, IoError};
use crate::local_search::{LocalSearch, LsConfig};
use crate::metrics::{summarize, Summary};
use crate::parallel::map_indexed;
use crate::problems::{gen_bpp, gen_cvrp, gen_smtwtp, gen_tsp, Instance, ProblemError, ProblemKind};
use crate::seed::{derive_seed, rng_from_seed, role_seed, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Uniform,
    Heuristic,
    GfacsTb,
    GfacsVargrad,
    GfacsNoOffPolicy,
    GfacsNoReshaping,
    GfacsNoSharedNorm,
    GfacsNoSharedNormVargrad,
}

impl Arm {
    pub const ALL: [Arm; 8] = [
        Arm::Uniform,
        Arm::Heuristic,
        Arm::GfacsTb,
        Arm::GfacsVargrad,
        Arm::GfacsNoOffPolicy,
        Arm::GfacsNoReshaping,
        Arm::GfacsNoSharedNorm,
        Arm::GfacsNoSharedNormVargrad,
    ];

    /// Ablation rows, in table order.
    pub const ABLATION: [Arm; 5] = [
        Arm::GfacsTb,
        Arm::GfacsNoOffPolicy,
        Arm::GfacsNoReshaping,
        Arm::GfacsNoSharedNorm,
        Arm::GfacsNoSharedNormVargrad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Uniform => "uniform",
            Arm::Heuristic => "heuristic",
            Arm::GfacsTb => "gfacs_tb",
            Arm::GfacsVargrad => "gfacs_vargrad",
            Arm::GfacsNoOffPolicy => "gfacs_no_off_policy",
            Arm::GfacsNoReshaping => "gfacs_no_reshaping",
            Arm::GfacsNoSharedNorm => "gfacs_no_shared_norm",
            Arm::GfacsNoSharedNormVargrad => "gfacs_no_shared_norm_vargrad",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Arm::Uniform => "Uniform prior",
            Arm::Heuristic => "Heuristic prior",
            Arm::GfacsTb => "GFACS",
            Arm::GfacsVargrad => "GFACS (VarGrad)",
            Arm::GfacsNoOffPolicy => "- Off-policy",
            Arm::GfacsNoReshaping => "- Energy reshaping",
            Arm::GfacsNoSharedNorm => "- Shared energy norm.",
            Arm::GfacsNoSharedNormVargrad => "  + VarGrad",
        }
    }

    /// Training configuration of a learned arm, `None` for fixed priors.
    pub fn train_config(self, base: &TrainConfig) -> Option<TrainConfig> {
        let b = base.clone();
        Some(match self {
            Arm::Uniform | Arm::Heuristic => return None,
            Arm::GfacsTb => TrainConfig { loss: LossKind::Tb, ..b },
            Arm::GfacsVargrad => TrainConfig { loss: LossKind::Vargrad, ..b },
            Arm::GfacsNoOffPolicy => TrainConfig { off_policy: false, ..b },
            Arm::GfacsNoReshaping => TrainConfig { energy_reshaping: false, ..b },
            Arm::GfacsNoSharedNorm => TrainConfig { shared_normalization: false, ..b },
            Arm::GfacsNoSharedNormVargrad => {
                TrainConfig { shared_normalization: false, loss: LossKind::Vargrad, ..b }
            }
        })
    }
}

impl FromStr for Arm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        Arm::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Arm::ALL.iter().map(|a| a.as_str()).collect();
            format!("unknown arm `{s}` (expected one of {})", names.join(", "))
        })
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub size: usize,
    pub n_test_instances: usize,
    /// Instance JSON files; when non-empty they replace generation.
    pub instance_files: Vec<String>,
    pub arms: Vec<Arm>,
    pub model_seeds: usize,
    /// `None` uses the per-problem defaults.
    pub train: Option<TrainConfig>,
    pub aco: AcoConfig,
    pub ls: LsConfig,
    pub out_dir: Option<String>,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemKind::Tsp,
            size: 50,
            n_test_instances: 10,
            instance_files: Vec::new(),
            arms: vec![Arm::Uniform, Arm::GfacsTb],
            model_seeds: 1,
            train: None,
            aco: AcoConfig::default(),
            ls: LsConfig::default(),
            out_dir: None,
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_else(|| TrainConfig::for_problem(self.problem))
    }

    pub fn check(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Config(m));
        if self.arms.is_empty() {
            return err("arms must not be empty".into());
        }
        if self.model_seeds == 0 {
            return err("model_seeds must be positive".into());
        }
        if self.instance_files.is_empty() && self.n_test_instances == 0 {
            return err("n_test_instances must be positive".into());
        }
        self.train_config().check().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.aco.check().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.ls.check().map_err(ExperimentError::Config)
    }
}

/// Generates instance `index` of a seeded test set.
pub fn generate_instance(kind: ProblemKind, size: usize, seed: u64) -> Result<Instance, ProblemError> {
    let mut rng = rng_from_seed(seed);
    Ok(match kind {
        ProblemKind::Tsp => Instance::Tsp(gen_tsp(size, &mut rng)?),
        ProblemKind::Cvrp => Instance::Cvrp(gen_cvrp(size, &mut rng)?),
        ProblemKind::Smtwtp => Instance::Smtwtp(gen_smtwtp(size, &mut rng)?),
        ProblemKind::Bpp => Instance::Bpp(gen_bpp(size, &mut rng)?),
    })
}

pub fn instance_seed(master: u64, index: usize) -> u64 {
    role_seed(master, "instance", index as u64)
}

/// Search seed shared by all arms on one (instance, model seed) pair.
pub fn run_seed(master: u64, instance: usize, model_seed: usize) -> u64 {
    derive_seed(master, &[tag("run"), instance as u64, model_seed as u64])
}

pub fn load_test_set(cfg: &ExperimentConfig) -> Result<Vec<Instance>, ExperimentError> {
    if !cfg.instance_files.is_empty() {
        let insts = cfg
            .instance_files
            .iter()
            .map(|p| read_instance(Path::new(p)))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(bad) = insts.iter().find(|i| i.kind() != cfg.problem) {
            return Err(ExperimentError::Config(format!("instance of kind {} in a {} experiment", bad.kind(), cfg.problem)));
        }
        return Ok(insts);
    }
    (0..cfg.n_test_instances)
        .map(|i| generate_instance(cfg.problem, cfg.size, instance_seed(cfg.master_seed, i)).map_err(Into::into))
        .collect()
}

/// Solves one instance with one arm.
pub fn run_arm(inst: &Instance, arm: Arm, train: &TrainConfig, aco: &AcoConfig, ls: &LocalSearch) -> Result<SearchResult, AcoError> {
    match arm.train_config(train) {
        None => {
            let eta = if arm == Arm::Uniform {
                uniform_prior(inst.n_nodes()).expect("instances have at least two nodes")
            } else {
                heuristic_prior(inst)
            };
            run_aco(inst, &eta, aco, ls)
        }
        Some(t) => run_gfacs(inst, &t, aco, ls),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub instance_id: usize,
    pub arm: Arm,
    pub model_seed: usize,
    pub best_energy: Option<f64>,
    /// Mean per-round ant diversity.
    pub diversity: Option<f64>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub energy: Option<Summary>,
    /// Summary of per-model-seed means over instances.
    pub seed_means: Option<Summary>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<ArmSummary>,
}

/// Runs every arm on every test instance. A failing run is recorded in its
/// row and the remaining runs continue.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.check()?;
    let insts = load_test_set(cfg)?;
    let train = cfg.train_config();
    let ls = LocalSearch::auto(cfg.ls.clone());
    let jobs: Vec<(usize, usize, Arm)> = (0..insts.len())
        .flat_map(|i| (0..cfg.model_seeds).flat_map(move |s| cfg.arms.iter().map(move |&a| (i, s, a))))
        .collect();
    let rows = map_indexed(jobs.len(), |j| {
        let (i, s, arm) = jobs[j];
        let aco = AcoConfig { seed: run_seed(cfg.master_seed, i, s), ..cfg.aco.clone() };
        match run_arm(&insts[i], arm, &train, &aco, &ls) {
            Ok(r) => ResultRow {
                instance_id: i,
                arm,
                model_seed: s,
                best_energy: Some(r.best_energy),
                diversity: Some(r.diversity_trace.iter().sum::<f64>() / r.diversity_trace.len() as f64),
                wall_ms: r.wall_ms,
                error: None,
            },
            Err(e) => ResultRow {
                instance_id: i,
                arm,
                model_seed: s,
                best_energy: None,
                diversity: None,
                wall_ms: 0.0,
                error: Some(e.to_string()),
            },
        }
    });
    let summaries = cfg.arms.iter().map(|&arm| summarize_arm(&rows, arm, cfg.model_seeds)).collect();
    Ok(Report { rows, summaries })
}

fn summarize_arm(rows: &[ResultRow], arm: Arm, model_seeds: usize) -> ArmSummary {
    let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.arm == arm).collect();
    let energies: Vec<f64> = mine.iter().filter_map(|r| r.best_energy).collect();
    let seed_means: Vec<f64> = (0..model_seeds)
        .filter_map(|s| {
            let e: Vec<f64> = mine.iter().filter(|r| r.model_seed == s).filter_map(|r| r.best_energy).collect();
            summarize(&e).map(|x| x.mean)
        })
        .collect();
    ArmSummary {
        arm,
        energy: summarize(&energies),
        seed_means: summarize(&seed_means),
        failures: mine.iter().filter(|r| r.error.is_some()).count(),
    }
}

/// Runs the ablation arms, ignoring `cfg.arms`.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    run_experiment(&ExperimentConfig { arms: Arm::ABLATION.to_vec(), ..cfg.clone() })
}

fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const RESULTS_HEADER: [&str; 6] = ["instance_id", "arm", "model_seed", "best_energy", "diversity", "status"];
pub const SUMMARY_HEADER: [&str; 8] = ["arm", "n", "mean", "min", "max", "std", "seed_mean_std", "failures"];
pub const TIMING_HEADER: [&str; 4] = ["instance_id", "arm", "model_seed", "wall_ms"];
pub const ABLATION_HEADER: [&str; 5] = ["arm", "method", "mean", "std", "n"];

impl Report {
    pub fn results_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.instance_id.to_string(),
                    r.arm.to_string(),
                    r.model_seed.to_string(),
                    num(r.best_energy),
                    num(r.diversity),
                    r.error.clone().map(|e| format!("error: {e}")).unwrap_or_else(|| "ok".into()),
                ]
            })
            .collect();
        csv_table("results", &RESULTS_HEADER, &rows)
    }

    pub fn summary_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .summaries
            .iter()
            .map(|s| {
                let e = s.energy;
                vec![
                    s.arm.to_string(),
                    e.map(|x| x.n).unwrap_or(0).to_string(),
                    num(e.map(|x| x.mean)),
                    num(e.map(|x| x.min)),
                    num(e.map(|x| x.max)),
                    num(e.map(|x| x.std)),
                    num(s.seed_means.map(|x| x.std)),
                    s.failures.to_string(),
                ]
            })
            .collect();
        csv_table("summary", &SUMMARY_HEADER, &rows)
    }

    /// Wall-clock times; unlike the other tables this one is not reproducible.
    pub fn timing_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![r.instance_id.to_string(), r.arm.to_string(), r.model_seed.to_string(), format!("{:.3}", r.wall_ms)])
            .collect();
        csv_table("timing", &TIMING_HEADER, &rows)
    }

    pub fn ablation_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .summaries
            .iter()
            .map(|s| {
                vec![
                    s.arm.to_string(),
                    s.arm.label().trim().to_string(),
                    num(s.energy.map(|x| x.mean)),
                    num(s.energy.map(|x| x.std)),
                    s.energy.map(|x| x.n).unwrap_or(0).to_string(),
                ]
            })
            .collect();
        csv_table("ablation", &ABLATION_HEADER, &rows)
    }

    pub fn mean_energy(&self, arm: Arm) -> Option<f64> {
        self.summaries.iter().find(|s| s.arm == arm)?.energy.map(|e| e.mean)
    }

    /// Writes `results.csv`, `summary.csv` and `timing.csv` (plus
    /// `ablation.csv` when `ablation`) into `dir`.
    pub fn write(&self, dir: &Path, ablation: bool) -> Result<(), IoError> {
        write_text(&dir.join("results.csv"), &self.results_csv())?;
        write_text(&dir.join("summary.csv"), &self.summary_csv())?;
        write_text(&dir.join("timing.csv"), &self.timing_csv())?;
        if ablation {
            write_text(&dir.join("ablation.csv"), &self.ablation_csv())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let train = TrainConfig { n_epoch: 2, steps_per_epoch: 1, k_samples: 4, ..TrainConfig::for_problem(ProblemKind::Tsp) };
        ExperimentConfig {
            size: 8,
            n_test_instances: 3,
            train: Some(train),
            aco: AcoConfig { n_ants: 4, n_rounds: 2, ..AcoConfig::default() },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn arm_names_round_trip() {
        for a in Arm::ALL {
            assert_eq!(a.as_str().parse::<Arm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.as_str()));
        }
        assert!("gfacs".parse::<Arm>().is_err());
    }

    #[test]
    fn row_cardinality_and_determinism() {
        let cfg = tiny();
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 6);
        assert_eq!(a.summaries.len(), 2);
        let csv = a.results_csv();
        assert!(csv.starts_with("# gfacs results v1\ninstance_id,arm,model_seed,best_energy,diversity,status\n"));
        assert_eq!(csv.lines().count(), 2 + 6);
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(csv, b.results_csv());
        assert_eq!(a.summary_csv(), b.summary_csv());
    }

    #[test]
    fn seeds_are_paired_across_arm_sets() {
        let cfg = tiny();
        let only_uniform = ExperimentConfig { arms: vec![Arm::Uniform], ..cfg.clone() };
        let both = run_experiment(&cfg).unwrap();
        let one = run_experiment(&only_uniform).unwrap();
        let pick = |r: &Report| r.rows.iter().filter(|x| x.arm == Arm::Uniform).map(|x| x.best_energy).collect::<Vec<_>>();
        assert_eq!(pick(&both), pick(&one));
    }

    #[test]
    fn bad_config_rejected() {
        assert!(ExperimentConfig { arms: vec![], ..tiny() }.check().is_err());
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"nope": 1}"#);
        assert!(err.is_err());
    }
}
