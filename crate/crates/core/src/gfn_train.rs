//! Off-policy GFlowNet training of per-instance edge logits.
//!
//! Each step samples `K` trajectories from the current prior (exploration),
//! refines their solutions with local search, reshapes the exploration
//! energies toward the refined ones, and builds an exploitation batch by
//! resampling symmetric trajectories of the refined solutions. Energies are
//! mean-centred per batch and the trajectory-balance residual
//!
//! ```text
//! r = log P_F(tau) + log Z + log h(x) + beta * E~(x)
//! ```
//!
//! is squared and averaged. Gradients are analytic: for a step leaving node
//! `i` with feasible set `F`, `d log p(j) / d theta[i][k] = [k == j] - p(k)`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::construct::{log_count_symmetric, replay_steps, sample_backward_actions, sample_with_logits, solution_from_actions, EdgeLogits, Trajectory};
use crate::heatmap::{init_learnable, to_heatmap, Heatmap, PriorInit, TrainState, THETA_CLAMP};
use crate::local_search::LocalSearch;
use crate::matrix::SquareMatrix;
use crate::parallel::map_indexed;
use crate::problems::{energy_unchecked, Instance, ProblemKind, Solution};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss: {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Tb,
    #[serde(alias = "var_grad")]
    Vargrad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    pub n_epoch: usize,
    /// Trailing epochs held at `beta_max`.
    pub n_flat: usize,
    pub steps_per_epoch: usize,
    /// Samples per instance per batch (`K`).
    pub k_samples: usize,
    /// Instances sharing one loss evaluation (`M`).
    pub m_instances: usize,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub lr: f64,
    pub lr_log_z: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub loss: LossKind,
    pub init: PriorInit,
    /// Train on the local-search exploitation batch as well.
    pub off_policy: bool,
    pub energy_reshaping: bool,
    pub shared_normalization: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta_min: 200.0,
            beta_max: 1000.0,
            n_epoch: 50,
            n_flat: 5,
            steps_per_epoch: 4,
            k_samples: 30,
            m_instances: 1,
            alpha_start: 0.5,
            alpha_end: 1.0,
            lr: 0.01,
            lr_log_z: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            loss: LossKind::Tb,
            init: PriorInit::Uniform,
            off_policy: true,
            energy_reshaping: true,
            shared_normalization: true,
        }
    }
}

impl TrainConfig {
    /// Defaults with the inverse-temperature range used for `kind`.
    pub fn for_problem(kind: ProblemKind) -> Self {
        let (beta_min, beta_max) = match kind {
            ProblemKind::Tsp => (200.0, 1000.0),
            ProblemKind::Cvrp => (500.0, 2000.0),
            ProblemKind::Smtwtp => (10.0, 20.0),
            ProblemKind::Bpp => (1000.0, 2000.0),
        };
        TrainConfig { beta_min, beta_max, ..TrainConfig::default() }
    }

    pub fn check(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::Config(m));
        if !(self.beta_min <= self.beta_max) || self.beta_min < 0.0 {
            return err(format!("need 0 <= beta_min <= beta_max, got {} / {}", self.beta_min, self.beta_max));
        }
        if self.k_samples < 2 {
            return err(format!("k_samples must be >= 2, got {}", self.k_samples));
        }
        if self.n_epoch == 0 || self.steps_per_epoch == 0 || self.m_instances == 0 {
            return err("n_epoch, steps_per_epoch and m_instances must be positive".into());
        }
        for a in [self.alpha_start, self.alpha_end] {
            if !(0.0..=1.0).contains(&a) {
                return err(format!("alpha must lie in [0, 1], got {a}"));
            }
        }
        if !(self.lr > 0.0 && self.lr_log_z >= 0.0) {
            return err("learning rates must be positive".into());
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.n_epoch * self.steps_per_epoch
    }
}

/// Log-shaped annealing from `beta_min` (epoch 1) to `beta_max`, reached at
/// epoch `n_epoch - n_flat` and held afterwards.
pub fn beta_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let ramp = cfg.n_epoch.saturating_sub(cfg.n_flat) as f64;
    let frac = if ramp <= 1.0 { 1.0 } else { ((epoch.max(1) as f64).ln() / ramp.ln()).min(1.0) };
    cfg.beta_min + (cfg.beta_max - cfg.beta_min) * frac
}

/// Linear from `alpha_start` at epoch 1 to `alpha_end` at `n_epoch`.
pub fn alpha_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    if cfg.n_epoch <= 1 {
        return cfg.alpha_start;
    }
    let t = (epoch.clamp(1, cfg.n_epoch) - 1) as f64 / (cfg.n_epoch - 1) as f64;
    cfg.alpha_start + (cfg.alpha_end - cfg.alpha_start) * t
}

/// `alpha * E(refined) + (1 - alpha) * E(original)`.
pub fn reshape_energy(energy: f64, refined: f64, alpha: f64) -> f64 {
    alpha * refined + (1.0 - alpha) * energy
}

/// Subtracts the sample mean.
pub fn shared_energy_normalize(energies: &[f64]) -> Vec<f64> {
    if energies.is_empty() {
        return Vec::new();
    }
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    energies.iter().map(|e| e - mean).collect()
}

/// One training sample. The loss reads `reshaped_energy`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub traj: Trajectory,
    pub solution: Solution,
    pub energy: f64,
    pub reshaped_energy: f64,
    pub log_h: f64,
}

/// Copy of `batch` with `reshaped_energy` mean-centred.
pub fn normalize_batch(batch: &[Experience]) -> Vec<Experience> {
    let e: Vec<f64> = batch.iter().map(|x| x.reshaped_energy).collect();
    batch
        .iter()
        .zip(shared_energy_normalize(&e))
        .map(|(x, n)| Experience { reshaped_energy: n, ..x.clone() })
        .collect()
}

/// Samples `k` on-policy experiences and their local-search counterparts.
///
/// Exploration energies are reshaped with `alpha`; the exploitation batch
/// holds the refined solutions with backward-sampled trajectories.
pub fn collect_experiences<R: RngCore + ?Sized>(
    inst: &Instance,
    state: &TrainState,
    k: usize,
    ls: &LocalSearch,
    alpha: f64,
    rng: &mut R,
) -> (Vec<Experience>, Vec<Experience>) {
    let logits = EdgeLogits::from_prior(&to_heatmap(state));
    let base = rng.next_u64();
    let pairs = map_indexed(k, |i| {
        let mut rng = rng_from_seed(derive_seed(base, &[i as u64]));
        let traj = sample_with_logits(inst, &logits, &mut rng);
        let sol = solution_from_actions(inst, &traj.actions);
        let e = energy_unchecked(inst, &sol);
        let refined = ls.refine(inst, &sol, &logits, &mut rng);
        let e_hat = energy_unchecked(inst, &refined);
        let back = sample_backward_actions(inst, &refined, &mut rng).expect("local search keeps solutions valid");
        let back_lp = replay_steps(inst, &logits, &back, |_| {}).expect("backward trajectory is feasible");
        let explore = Experience {
            traj,
            log_h: log_count_symmetric(&sol),
            solution: sol,
            energy: e,
            reshaped_energy: reshape_energy(e, e_hat, alpha),
        };
        let exploit = Experience {
            traj: Trajectory { actions: back, log_pf: back_lp },
            log_h: log_count_symmetric(&refined),
            solution: refined,
            energy: e_hat,
            reshaped_energy: e_hat,
        };
        (explore, exploit)
    });
    pairs.into_iter().unzip()
}

/// Experiences of one instance together with its parameters.
pub struct InstanceBatch<'a> {
    pub inst: &'a Instance,
    pub state: &'a TrainState,
    pub experiences: &'a [Experience],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// Gradient for each instance's `theta`.
    pub grad_theta: Vec<SquareMatrix>,
    /// Gradient for each instance's `log_z` (zero for VarGrad).
    pub grad_log_z: Vec<f64>,
}

/// `log P_F` and its sparse gradient `(flat index, d log P_F / d theta)`.
fn score(inst: &Instance, state: &TrainState, logits: &EdgeLogits, actions: &[usize]) -> (f64, Vec<(usize, f64)>) {
    let n = logits.dim();
    let mut grad = Vec::new();
    let lp = replay_steps(inst, logits, actions, |step| {
        let Some(i) = step.from else { return };
        for (k, (&j, &p)) in step.feasible.iter().zip(step.probs).enumerate() {
            let g = if k == step.chosen { 1.0 - p } else { -p };
            if state.theta.get(i, j).abs() <= THETA_CLAMP {
                grad.push((i * n + j, g));
            }
        }
    })
    .expect("experience trajectories are feasible");
    (lp, grad)
}

fn scored(batch: &InstanceBatch<'_>) -> Vec<(f64, Vec<(usize, f64)>)> {
    let logits = EdgeLogits::from_prior(&to_heatmap(batch.state));
    map_indexed(batch.experiences.len(), |k| score(batch.inst, batch.state, &logits, &batch.experiences[k].traj.actions))
}

fn non_finite(m: usize, k: usize, x: &Experience, log_pf: f64, log_z: f64) -> TrainError {
    TrainError::NonFinite(format!(
        "instance {m} sample {k}: log_pf={log_pf} log_z={log_z} log_h={} energy={} reshaped={} actions={:?}",
        x.log_h, x.energy, x.reshaped_energy, x.traj.actions
    ))
}

/// Conditional trajectory-balance loss over `M` instances of `K` samples,
/// `(1 / MK) * sum r^2`, with analytic gradients.
pub fn tb_loss_and_grads(batches: &[InstanceBatch<'_>], beta: f64) -> Result<LossOutput, TrainError> {
    let total: usize = batches.iter().map(|b| b.experiences.len()).sum();
    let scale = 1.0 / total.max(1) as f64;
    let mut loss = 0.0;
    let mut grad_theta = Vec::with_capacity(batches.len());
    let mut grad_log_z = Vec::with_capacity(batches.len());
    for (m, b) in batches.iter().enumerate() {
        let mut g = SquareMatrix::filled(b.state.dim(), 0.0);
        let mut gz = 0.0;
        for (k, (x, (lp, sc))) in b.experiences.iter().zip(scored(b)).enumerate() {
            let r = lp + b.state.log_z + x.log_h + beta * x.reshaped_energy;
            if !r.is_finite() {
                return Err(non_finite(m, k, x, lp, b.state.log_z));
            }
            loss += scale * r * r;
            gz += 2.0 * scale * r;
            let c = 2.0 * scale * r;
            let slice = g.as_mut_slice();
            for (idx, v) in sc {
                slice[idx] += c * v;
            }
        }
        grad_theta.push(g);
        grad_log_z.push(gz);
    }
    Ok(LossOutput { loss, grad_theta, grad_log_z })
}

/// VarGrad: per instance, the unbiased sample variance of
/// `c = log P_F + log h + beta * E~`, averaged over instances.
pub fn vargrad_loss_and_grads(batches: &[InstanceBatch<'_>], beta: f64) -> Result<LossOutput, TrainError> {
    let mut loss = 0.0;
    let mut grad_theta = Vec::with_capacity(batches.len());
    let inv_m = 1.0 / batches.len().max(1) as f64;
    for (m, b) in batches.iter().enumerate() {
        let kk = b.experiences.len();
        if kk < 2 {
            return Err(TrainError::Config(format!("VarGrad needs at least 2 samples, got {kk}")));
        }
        let sc = scored(b);
        let mut c = Vec::with_capacity(kk);
        for (k, (x, (lp, _))) in b.experiences.iter().zip(&sc).enumerate() {
            let v = lp + x.log_h + beta * x.reshaped_energy;
            if !v.is_finite() {
                return Err(non_finite(m, k, x, *lp, f64::NAN));
            }
            c.push(v);
        }
        let mean = c.iter().sum::<f64>() / kk as f64;
        let denom = (kk - 1) as f64;
        loss += inv_m * c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / denom;
        let mut g = SquareMatrix::filled(b.state.dim(), 0.0);
        let slice = g.as_mut_slice();
        for (ck, (_, s)) in c.iter().zip(sc) {
            let coef = inv_m * 2.0 * (ck - mean) / denom;
            for (idx, v) in s {
                slice[idx] += coef * v;
            }
        }
        grad_theta.push(g);
    }
    let grad_log_z = vec![0.0; batches.len()];
    Ok(LossOutput { loss, grad_theta, grad_log_z })
}

/// One bias-corrected Adam update of `theta` (rate `lr`) and `log_z`
/// (rate `lr_log_z`); `theta` is clamped to the exponent range afterwards.
pub fn adam_step(state: &mut TrainState, grad_theta: &SquareMatrix, grad_log_z: f64, cfg: &TrainConfig) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let theta = state.theta.as_mut_slice();
    let m = state.m_theta.as_mut_slice();
    let v = state.v_theta.as_mut_slice();
    for (((th, m), v), &g) in theta.iter_mut().zip(m).zip(v).zip(grad_theta.as_slice()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *th -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        *th = th.clamp(-THETA_CLAMP, THETA_CLAMP);
    }
    state.m_log_z = b1 * state.m_log_z + (1.0 - b1) * grad_log_z;
    state.v_log_z = b2 * state.v_log_z + (1.0 - b2) * grad_log_z * grad_log_z;
    state.log_z -= cfg.lr_log_z * (state.m_log_z / c1) / ((state.v_log_z / c2).sqrt() + eps);
}

/// Per-epoch training telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub beta: f64,
    pub alpha: f64,
    pub loss_explore: f64,
    pub loss_exploit: f64,
    pub best_energy: f64,
    pub wall_ms: f64,
}

pub const TELEMETRY_HEADER: &str = "epoch,beta,alpha,loss_explore,loss_exploit,best_energy,wall_ms";

impl TrainRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3}",
            self.epoch, self.beta, self.alpha, self.loss_explore, self.loss_exploit, self.best_energy, self.wall_ms
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainedPrior {
    pub heatmap: Heatmap,
    pub state: TrainState,
    pub telemetry: Vec<TrainRecord>,
}

fn loss_for(kind: LossKind, batches: &[InstanceBatch<'_>], beta: f64) -> Result<LossOutput, TrainError> {
    match kind {
        LossKind::Tb => tb_loss_and_grads(batches, beta),
        LossKind::Vargrad => vargrad_loss_and_grads(batches, beta),
    }
}

/// Trains one prior per instance. Instances are processed in groups of
/// `m_instances` that share each loss evaluation.
pub fn train_priors<R: RngCore + ?Sized>(
    insts: &[Instance],
    cfg: &TrainConfig,
    ls: &LocalSearch,
    rng: &mut R,
) -> Result<Vec<TrainedPrior>, TrainError> {
    cfg.check()?;
    let mut out = Vec::with_capacity(insts.len());
    for group in insts.chunks(cfg.m_instances) {
        out.extend(train_group(group, cfg, ls, rng)?);
    }
    Ok(out)
}

fn batches<'a>(group: &'a [Instance], states: &'a [TrainState], data: &'a [Vec<Experience>]) -> Vec<InstanceBatch<'a>> {
    group
        .iter()
        .zip(states)
        .zip(data)
        .map(|((inst, state), d)| InstanceBatch { inst, state, experiences: d })
        .collect()
}

fn average(a: &SquareMatrix, b: &SquareMatrix) -> SquareMatrix {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| 0.5 * (x + y)).collect();
    SquareMatrix::from_vec(a.dim(), data).expect("same shape")
}

fn train_group<R: RngCore + ?Sized>(
    group: &[Instance],
    cfg: &TrainConfig,
    ls: &LocalSearch,
    rng: &mut R,
) -> Result<Vec<TrainedPrior>, TrainError> {
    let mut states: Vec<TrainState> = group.iter().map(|i| init_learnable(i, cfg.init)).collect();
    let mut telemetry: Vec<Vec<TrainRecord>> = vec![Vec::new(); group.len()];
    let mut best = vec![f64::INFINITY; group.len()];
    for epoch in 1..=cfg.n_epoch {
        let clock = Stopwatch::start();
        let beta = beta_schedule(epoch, cfg);
        let alpha = if cfg.energy_reshaping { alpha_schedule(epoch, cfg) } else { 0.0 };
        let mut sums = vec![(0.0, 0.0); group.len()];
        for _ in 0..cfg.steps_per_epoch {
            let mut explore = Vec::with_capacity(group.len());
            let mut exploit = Vec::with_capacity(group.len());
            for (m, inst) in group.iter().enumerate() {
                let (a, b) = collect_experiences(inst, &states[m], cfg.k_samples, ls, alpha, rng);
                for x in a.iter().chain(&b) {
                    best[m] = best[m].min(x.energy);
                }
                if cfg.shared_normalization {
                    explore.push(normalize_batch(&a));
                    exploit.push(normalize_batch(&b));
                } else {
                    explore.push(a);
                    exploit.push(b);
                }
            }
            let lx = loss_for(cfg.loss, &batches(group, &states, &explore), beta)?;
            let (grad_theta, grad_log_z, loss_exploit) = if cfg.off_policy {
                let lp = loss_for(cfg.loss, &batches(group, &states, &exploit), beta)?;
                let g: Vec<SquareMatrix> = lx.grad_theta.iter().zip(&lp.grad_theta).map(|(a, b)| average(a, b)).collect();
                let gz: Vec<f64> = lx.grad_log_z.iter().zip(&lp.grad_log_z).map(|(a, b)| 0.5 * (a + b)).collect();
                (g, gz, lp.loss)
            } else {
                (lx.grad_theta.clone(), lx.grad_log_z.clone(), f64::NAN)
            };
            for (m, s) in states.iter_mut().enumerate() {
                adam_step(s, &grad_theta[m], grad_log_z[m], cfg);
                sums[m].0 += lx.loss;
                sums[m].1 += loss_exploit;
            }
        }
        let per = cfg.steps_per_epoch as f64;
        let wall_ms = clock.elapsed_ms();
        for m in 0..group.len() {
            telemetry[m].push(TrainRecord {
                epoch,
                beta,
                alpha,
                loss_explore: sums[m].0 / per,
                loss_exploit: sums[m].1 / per,
                best_energy: best[m],
                wall_ms,
            });
        }
    }
    Ok(states
        .into_iter()
        .zip(telemetry)
        .map(|(state, telemetry)| TrainedPrior { heatmap: to_heatmap(&state), state, telemetry })
        .collect())
}

/// Trains the prior of a single instance.
pub fn train_prior<R: RngCore + ?Sized>(
    inst: &Instance,
    cfg: &TrainConfig,
    ls: &LocalSearch,
    rng: &mut R,
) -> Result<TrainedPrior, TrainError> {
    let cfg = TrainConfig { m_instances: 1, ..cfg.clone() };
    Ok(train_priors(std::slice::from_ref(inst), &cfg, ls, rng)?.swap_remove(0))
}
