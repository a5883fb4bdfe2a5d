//! Pheromone trails, the three deposit rules and the ant colony loop.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::construct::{sample_with_logits, solution_from_actions, EdgeLogits};
use crate::gfn_train::{train_prior, TrainConfig, TrainError, TrainRecord};
use crate::heatmap::Heatmap;
use crate::local_search::LocalSearch;
use crate::matrix::SquareMatrix;
use crate::metrics::diversity;
use crate::parallel::map_indexed;
use crate::problems::{energy_unchecked, Instance, Solution};
use crate::seed::{derive_seed, rng_from_seed, role_seed};

/// Smallest pheromone value; evaporation alone never reaches zero.
pub const TAU_FLOOR: f64 = 1e-100;
/// Energies below this are treated as this when computing `C / f`.
pub const ENERGY_FLOOR: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AcoError {
    #[error("invalid ACO config: {0}")]
    Config(String),
    #[error("heatmap is {got}x{got}, instance needs {want}x{want}")]
    Dimension { got: usize, want: usize },
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Strictly positive pheromone matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pheromone(SquareMatrix);

impl Pheromone {
    /// Entries are floored at [`TAU_FLOOR`].
    pub fn new(m: SquareMatrix) -> Self {
        Pheromone(m.map(|v| if v.is_finite() { v.max(TAU_FLOOR) } else { TAU_FLOOR }))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    fn evaporate(&mut self, gamma: f64) {
        for v in self.0.as_mut_slice() {
            *v = ((1.0 - gamma) * *v).max(TAU_FLOOR);
        }
    }

    fn deposit(&mut self, sol: &Solution, amount: f64) {
        let both = sol.kind().is_undirected();
        for (i, j) in sol.transitions() {
            self.0.add(i, j, amount);
            if both && i != j {
                self.0.add(j, i, amount);
            }
        }
    }

    fn clamp(&mut self, lo: f64, hi: f64) {
        for v in self.0.as_mut_slice() {
            *v = v.clamp(lo, hi);
        }
    }
}

pub fn init_pheromone(n: usize) -> Pheromone {
    Pheromone(SquareMatrix::filled(n, 1.0))
}

fn quality(c: f64, energy: f64) -> f64 {
    c / energy.max(ENERGY_FLOOR)
}

/// `rho <- (1 - gamma) rho + sum_k C / f_k` on the edges of each solution.
pub fn deposit_ant_system(rho: &mut Pheromone, solutions: &[Solution], energies: &[f64], gamma: f64, c: f64) {
    assert_eq!(solutions.len(), energies.len());
    rho.evaporate(gamma);
    for (s, &e) in solutions.iter().zip(energies) {
        rho.deposit(s, quality(c, e));
    }
}

/// Ant System plus `elite_weight * C / f(best)` on the best-so-far edges.
pub fn deposit_elitist(
    rho: &mut Pheromone,
    solutions: &[Solution],
    energies: &[f64],
    best: (&Solution, f64),
    gamma: f64,
    c: f64,
    elite_weight: f64,
) {
    deposit_ant_system(rho, solutions, energies, gamma, c);
    if elite_weight > 0.0 {
        rho.deposit(best.0, elite_weight * quality(c, best.1));
    }
}

/// MAX-MIN update: evaporate, deposit on one solution (best-so-far when
/// `use_global`, otherwise iteration-best) and clamp to `[tau_min, tau_max]`.
#[allow(clippy::too_many_arguments)]
pub fn deposit_maxmin(
    rho: &mut Pheromone,
    iteration_best: (&Solution, f64),
    best_so_far: (&Solution, f64),
    gamma: f64,
    c: f64,
    tau_min: f64,
    tau_max: f64,
    use_global: bool,
) {
    rho.evaporate(gamma);
    let (s, e) = if use_global { best_so_far } else { iteration_best };
    rho.deposit(s, quality(c, e));
    rho.clamp(tau_min.max(TAU_FLOOR), tau_max.max(TAU_FLOOR));
}

/// Default MAX-MIN limits `tau_max = C / (gamma f_best)`, `tau_min = tau_max / 2N`.
pub fn maxmin_limits(best_energy: f64, gamma: f64, c: f64, n: usize) -> (f64, f64) {
    let hi = quality(c, best_energy) / gamma;
    (hi / (2 * n.max(1)) as f64, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    #[default]
    #[serde(alias = "as")]
    AntSystem,
    Elitist,
    #[serde(alias = "max_min", alias = "mmas")]
    Maxmin,
}

impl std::str::FromStr for UpdateRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "as" | "ant_system" => Ok(UpdateRule::AntSystem),
            "elitist" => Ok(UpdateRule::Elitist),
            "maxmin" | "max_min" | "mmas" => Ok(UpdateRule::Maxmin),
            other => Err(format!("unknown update rule `{other}` (expected as, elitist or maxmin)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcoConfig {
    pub n_ants: usize,
    pub n_rounds: usize,
    pub gamma: f64,
    pub deposit_c: f64,
    pub rule: UpdateRule,
    /// Elitist weight; `None` means `n_ants / 10`.
    pub elite_weight: Option<f64>,
    /// MAX-MIN limits; `None` derives them from the best-so-far energy.
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub use_ls: bool,
    /// Refine every ant instead of only the iteration best.
    pub ls_all_ants: bool,
    pub seed: u64,
}

impl Default for AcoConfig {
    fn default() -> Self {
        AcoConfig {
            n_ants: 100,
            n_rounds: 100,
            gamma: 0.1,
            deposit_c: 1.0,
            rule: UpdateRule::AntSystem,
            elite_weight: None,
            tau_min: None,
            tau_max: None,
            use_ls: true,
            ls_all_ants: false,
            seed: 0,
        }
    }
}

impl AcoConfig {
    pub fn check(&self) -> Result<(), AcoError> {
        let err = |m: String| Err(AcoError::Config(m));
        if self.n_ants == 0 {
            return err("n_ants must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.deposit_c > 0.0 && self.deposit_c.is_finite()) {
            return err(format!("deposit_c must be positive, got {}", self.deposit_c));
        }
        if let Some(w) = self.elite_weight {
            if !(w >= 0.0) {
                return err(format!("elite_weight must be non-negative, got {w}"));
            }
        }
        match (self.tau_min, self.tau_max) {
            (Some(lo), Some(hi)) if !(lo > 0.0 && lo < hi) => err(format!("need 0 < tau_min < tau_max, got {lo} / {hi}")),
            (Some(_), None) | (None, Some(_)) => err("tau_min and tau_max must be given together".into()),
            _ => Ok(()),
        }
    }

    pub fn elite_weight(&self) -> f64 {
        self.elite_weight.unwrap_or(self.n_ants as f64 / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_solution: Solution,
    pub best_energy: f64,
    /// Best-so-far energy after each round.
    pub best_trace: Vec<f64>,
    /// Mean energy of each round's ants.
    pub mean_trace: Vec<f64>,
    pub diversity_trace: Vec<f64>,
    pub round_ms: Vec<f64>,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_telemetry: Option<Vec<TrainRecord>>,
}

pub const TRACE_HEADER: &str = "round,best,mean,diversity,wall_ms";

impl SearchResult {
    /// Per-round trace rows (without header).
    pub fn trace_rows(&self) -> Vec<String> {
        (0..self.best_trace.len())
            .map(|r| {
                format!(
                    "{},{},{},{},{:.3}",
                    r, self.best_trace[r], self.mean_trace[r], self.diversity_trace[r], self.round_ms[r]
                )
            })
            .collect()
    }
}

/// Runs `max(T, 1)` rounds of `K` ants on `eta * rho`. With `T = 0` a
/// single batch is drawn from the prior and no pheromone update happens.
pub fn run_aco(inst: &Instance, eta: &Heatmap, cfg: &AcoConfig, ls: &LocalSearch) -> Result<SearchResult, AcoError> {
    cfg.check()?;
    let n = inst.n_nodes();
    if eta.dim() != n {
        return Err(AcoError::Dimension { got: eta.dim(), want: n });
    }
    let clock = Stopwatch::start();
    let mut rng = rng_from_seed(role_seed(cfg.seed, "aco", 0));
    let mut rho = init_pheromone(n);
    let refine = cfg.use_ls && !ls.is_identity();
    let mut best: Option<(Solution, f64)> = None;
    let mut out_best = Vec::new();
    let mut out_mean = Vec::new();
    let mut out_div = Vec::new();
    let mut out_ms = Vec::new();
    let rounds = cfg.n_rounds.max(1);
    for round in 0..rounds {
        let round_clock = Stopwatch::start();
        let logits = EdgeLogits::new(eta, &rho, 1.0);
        let base = rng.next_u64();
        let mut ants: Vec<(Solution, f64)> = map_indexed(cfg.n_ants, |k| {
            let mut r = rng_from_seed(derive_seed(base, &[k as u64]));
            let t = sample_with_logits(inst, &logits, &mut r);
            let s = solution_from_actions(inst, &t.actions);
            let e = energy_unchecked(inst, &s);
            (s, e)
        });
        if refine {
            let ls_base = rng.next_u64();
            let targets: Vec<usize> = if cfg.ls_all_ants { (0..ants.len()).collect() } else { vec![argmin(&ants)] };
            let refined = map_indexed(targets.len(), |t| {
                let mut r = rng_from_seed(derive_seed(ls_base, &[t as u64]));
                let s = ls.refine_with_perturbation(inst, &ants[targets[t]].0, &logits, &mut r);
                let e = energy_unchecked(inst, &s);
                (s, e)
            });
            for (t, x) in targets.into_iter().zip(refined) {
                if x.1 <= ants[t].1 {
                    ants[t] = x;
                }
            }
        }
        let ib = argmin(&ants);
        if best.as_ref().is_none_or(|b| ants[ib].1 < b.1) {
            best = Some(ants[ib].clone());
        }
        let (best_sol, best_e) = best.as_ref().expect("at least one ant");
        let mean = ants.iter().map(|a| a.1).sum::<f64>() / ants.len() as f64;
        let sols: Vec<Solution> = ants.iter().map(|a| a.0.clone()).collect();
        out_best.push(*best_e);
        out_mean.push(mean);
        out_div.push(diversity(&sols));
        if cfg.n_rounds > 0 {
            let energies: Vec<f64> = ants.iter().map(|a| a.1).collect();
            match cfg.rule {
                UpdateRule::AntSystem => deposit_ant_system(&mut rho, &sols, &energies, cfg.gamma, cfg.deposit_c),
                UpdateRule::Elitist => deposit_elitist(
                    &mut rho,
                    &sols,
                    &energies,
                    (best_sol, *best_e),
                    cfg.gamma,
                    cfg.deposit_c,
                    cfg.elite_weight(),
                ),
                UpdateRule::Maxmin => {
                    let (lo, hi) = match (cfg.tau_min, cfg.tau_max) {
                        (Some(lo), Some(hi)) => (lo, hi),
                        _ => maxmin_limits(*best_e, cfg.gamma, cfg.deposit_c, inst.size()),
                    };
                    let use_global = (round + 1) % 10 == 0;
                    deposit_maxmin(&mut rho, (&sols[ib], ants[ib].1), (best_sol, *best_e), cfg.gamma, cfg.deposit_c, lo, hi, use_global);
                }
            }
        }
        out_ms.push(round_clock.elapsed_ms());
    }
    let (best_solution, best_energy) = best.expect("at least one round");
    Ok(SearchResult {
        best_solution,
        best_energy,
        best_trace: out_best,
        mean_trace: out_mean,
        diversity_trace: out_div,
        round_ms: out_ms,
        wall_ms: clock.elapsed_ms(),
        train_telemetry: None,
    })
}

fn argmin(ants: &[(Solution, f64)]) -> usize {
    ants.iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("non-empty")
}

/// Trains a prior for `inst`, then runs [`run_aco`] on it. The training
/// stream is derived from `aco_cfg.seed`.
pub fn run_gfacs(inst: &Instance, train_cfg: &TrainConfig, aco_cfg: &AcoConfig, ls: &LocalSearch) -> Result<SearchResult, AcoError> {
    aco_cfg.check()?;
    let clock = Stopwatch::start();
    let mut rng = rng_from_seed(role_seed(aco_cfg.seed, "train", 0));
    let trained = train_prior(inst, train_cfg, ls, &mut rng)?;
    let mut res = run_aco(inst, &trained.heatmap, aco_cfg, ls)?;
    res.wall_ms = clock.elapsed_ms();
    res.train_telemetry = Some(trained.telemetry);
    Ok(res)
}
