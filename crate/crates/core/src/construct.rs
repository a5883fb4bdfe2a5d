//! Forward sampling policy, trajectory probabilities, backward sampling over
//! symmetric trajectories, and symmetry counting.
//!
//! The forward policy picks the next node `j` from the current node `i`
//! with probability proportional to `(rho[i][j] * eta[i][j])^delta` over
//! the feasible actions; `delta = 1` except during repair. All arithmetic
//! is done in the log domain. For TSP the first action (the start city) is
//! uniform over all cities and contributes `-ln N` to the log-probability,
//! which makes the forward and backward trajectory spaces coincide.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aco::Pheromone;
use crate::heatmap::Heatmap;
use crate::matrix::SquareMatrix;
use crate::problems::{validate, Instance, PartialState, ProblemError, Solution};

/// A complete action sequence and its forward log-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub actions: Vec<usize>,
    pub log_pf: f64,
}

/// Edge log-weights `delta * (ln eta + ln rho)`.
#[derive(Debug, Clone)]
pub struct EdgeLogits(SquareMatrix);

impl EdgeLogits {
    pub fn new(eta: &Heatmap, rho: &Pheromone, delta: f64) -> Self {
        assert_eq!(eta.dim(), rho.dim(), "heatmap and pheromone dimensions differ");
        let n = eta.dim();
        EdgeLogits(SquareMatrix::from_fn(n, |i, j| delta * (eta.get(i, j).ln() + rho.get(i, j).ln())))
    }

    /// Prior only (`rho = 1`, `delta = 1`), as used during training.
    pub fn from_prior(eta: &Heatmap) -> Self {
        EdgeLogits(eta.matrix().map(f64::ln))
    }

    pub fn from_log_weights(m: SquareMatrix) -> Self {
        EdgeLogits(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// Normalized transition probabilities over `feasible`; returns `ln` of the
/// normalizer relative to the max logit (for exact log-probabilities).
fn transition_probs(logits: &EdgeLogits, from: Option<usize>, feasible: &[usize], probs: &mut Vec<f64>) -> (f64, f64) {
    probs.clear();
    match from {
        None => {
            let p = 1.0 / feasible.len() as f64;
            probs.resize(feasible.len(), p);
            (0.0, (feasible.len() as f64).ln())
        }
        Some(i) => {
            let max = feasible.iter().map(|&j| logits.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for &j in feasible {
                let w = (logits.get(i, j) - max).exp();
                probs.push(w);
                sum += w;
            }
            for p in probs.iter_mut() {
                *p /= sum;
            }
            (max, sum.ln())
        }
    }
}

#[inline]
fn step_logprob(logits: &EdgeLogits, from: Option<usize>, to: usize, max: f64, log_sum: f64) -> f64 {
    match from {
        None => -log_sum,
        Some(i) => logits.get(i, to) - max - log_sum,
    }
}

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left `acc` slightly below 1: take the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Continues `state` to a terminal state by sampling; returns the summed
/// log-probability of the sampled actions.
pub fn rollout<R: Rng + ?Sized>(state: &mut PartialState<'_>, logits: &EdgeLogits, rng: &mut R) -> f64 {
    let mut feasible = Vec::new();
    let mut probs = Vec::new();
    let mut log_pf = 0.0;
    loop {
        state.feasible_into(&mut feasible);
        if feasible.is_empty() {
            return log_pf;
        }
        let from = state.current();
        let (max, log_sum) = transition_probs(logits, from, &feasible, &mut probs);
        let k = categorical(&probs, rng);
        let a = feasible[k];
        log_pf += step_logprob(logits, from, a, max, log_sum);
        state.apply(a).expect("sampled action is feasible");
    }
}

/// Samples one complete trajectory from the forward policy.
pub fn sample_trajectory<R: Rng + ?Sized>(inst: &Instance, eta: &Heatmap, rho: &Pheromone, rng: &mut R) -> Trajectory {
    sample_with_logits(inst, &EdgeLogits::new(eta, rho, 1.0), rng)
}

pub fn sample_with_logits<R: Rng + ?Sized>(inst: &Instance, logits: &EdgeLogits, rng: &mut R) -> Trajectory {
    assert_eq!(logits.dim(), inst.n_nodes(), "edge matrix does not match instance");
    let mut state = PartialState::new(inst);
    let log_pf = rollout(&mut state, logits, rng);
    Trajectory { actions: state.actions().to_vec(), log_pf }
}

/// Argmax decoding (TSP starts at city 0). Debugging aid only.
pub fn greedy_trajectory(inst: &Instance, logits: &EdgeLogits) -> Trajectory {
    let mut state = PartialState::new(inst);
    let mut feasible = Vec::new();
    let mut probs = Vec::new();
    let mut log_pf = 0.0;
    loop {
        state.feasible_into(&mut feasible);
        if feasible.is_empty() {
            break;
        }
        let from = state.current();
        let (max, log_sum) = transition_probs(logits, from, &feasible, &mut probs);
        let k = probs
            .iter()
            .enumerate()
            .fold(0, |best, (k, &p)| if p > probs[best] { k } else { best });
        let a = feasible[k];
        log_pf += step_logprob(logits, from, a, max, log_sum);
        state.apply(a).expect("feasible");
    }
    Trajectory { actions: state.actions().to_vec(), log_pf }
}

/// One replayed decision: the node we left, the feasible set, its
/// probabilities and the index of the chosen action within it.
pub struct Step<'s> {
    pub from: Option<usize>,
    pub feasible: &'s [usize],
    pub probs: &'s [f64],
    pub chosen: usize,
}

/// Replays `actions`, calling `visit` at every decision; returns the exact
/// log-probability. Errors if an action is masked or the sequence is
/// incomplete.
pub fn replay_steps(
    inst: &Instance,
    logits: &EdgeLogits,
    actions: &[usize],
    mut visit: impl FnMut(Step<'_>),
) -> Result<f64, ProblemError> {
    let mut state = PartialState::new(inst);
    let mut feasible = Vec::new();
    let mut probs = Vec::new();
    let mut log_pf = 0.0;
    for &a in actions {
        state.feasible_into(&mut feasible);
        let Ok(k) = feasible.binary_search(&a) else {
            return Err(ProblemError::InfeasibleAction { action: a, step: state.step() });
        };
        let from = state.current();
        let (max, log_sum) = transition_probs(logits, from, &feasible, &mut probs);
        log_pf += step_logprob(logits, from, a, max, log_sum);
        visit(Step { from, feasible: &feasible, probs: &probs, chosen: k });
        state.apply(a)?;
    }
    if !state.is_terminal() {
        return Err(ProblemError::Incomplete { done: state.placed(), total: inst.size() });
    }
    Ok(log_pf)
}

/// Exact forward log-probability of a complete trajectory.
pub fn trajectory_logprob(inst: &Instance, eta: &Heatmap, rho: &Pheromone, actions: &[usize]) -> Result<f64, ProblemError> {
    replay_steps(inst, &EdgeLogits::new(eta, rho, 1.0), actions, |_| {})
}

/// Canonical solution built by a complete action sequence.
pub fn solution_of(inst: &Instance, actions: &[usize]) -> Result<Solution, ProblemError> {
    let state = PartialState::replay(inst, actions)?;
    if !state.is_terminal() {
        return Err(ProblemError::Incomplete { done: state.placed(), total: inst.size() });
    }
    Ok(solution_from_actions(inst, actions))
}

/// Like [`solution_of`] without replaying; `actions` must be complete.
pub(crate) fn solution_from_actions(inst: &Instance, actions: &[usize]) -> Solution {
    let sol = match inst {
        Instance::Tsp(_) => Solution::Tsp { tour: actions.to_vec() },
        Instance::Cvrp(_) => Solution::Cvrp {
            routes: actions.split(|&a| a == 0).filter(|r| !r.is_empty()).map(<[usize]>::to_vec).collect(),
        },
        Instance::Smtwtp(_) => Solution::Smtwtp { order: actions.iter().map(|&a| a - 1).collect() },
        Instance::Bpp(_) => Solution::Bpp { order: actions.iter().map(|&a| a - 1).collect() },
    };
    sol.canonical()
}

/// Draws one of the `h(x)` action sequences that build `sol`, uniformly.
pub fn sample_backward_actions<R: Rng + ?Sized>(inst: &Instance, sol: &Solution, rng: &mut R) -> Result<Vec<usize>, ProblemError> {
    validate(inst, sol).map_err(ProblemError::Validation)?;
    Ok(match sol {
        Solution::Tsp { tour } => {
            let n = tour.len();
            let start = rng.gen_range(0..n);
            let forward = rng.gen::<bool>();
            (0..n)
                .map(|k| if forward { tour[(start + k) % n] } else { tour[(start + n - k) % n] })
                .collect()
        }
        Solution::Cvrp { routes } => {
            let mut routes = routes.clone();
            routes.shuffle(rng);
            let mut out = Vec::new();
            for (r, route) in routes.iter_mut().enumerate() {
                if route.len() > 1 && rng.gen::<bool>() {
                    route.reverse();
                }
                if r > 0 {
                    out.push(0);
                }
                out.extend_from_slice(route);
            }
            out
        }
        Solution::Smtwtp { order } | Solution::Bpp { order } => order.iter().map(|&j| j + 1).collect(),
    })
}

/// Backward sample scored under the forward policy `(eta, rho)`.
pub fn sample_backward_trajectory<R: Rng + ?Sized>(
    inst: &Instance,
    sol: &Solution,
    eta: &Heatmap,
    rho: &Pheromone,
    rng: &mut R,
) -> Result<Trajectory, ProblemError> {
    let actions = sample_backward_actions(inst, sol, rng)?;
    let log_pf = trajectory_logprob(inst, eta, rho, &actions)?;
    Ok(Trajectory { actions, log_pf })
}

/// `h(x)`: the number of trajectories that construct `sol`.
///
/// `2N` for a TSP cycle (1 when `N = 1`), `K! * 2^(K-S)` for CVRP with `K`
/// routes of which `S` serve a single customer, 1 for SMTWTP and BPP.
/// Saturates at `u64::MAX`; training uses [`log_count_symmetric`].
pub fn count_symmetric(sol: &Solution) -> u64 {
    match sol {
        Solution::Tsp { tour } => {
            let n = tour.len() as u64;
            if n > 1 {
                2 * n
            } else {
                1
            }
        }
        Solution::Cvrp { routes } => {
            let k = routes.len() as u64;
            let s = routes.iter().filter(|r| r.len() == 1).count() as u64;
            let fact = (1..=k).fold(1u64, |a, b| a.saturating_mul(b));
            let pow = if k - s >= 64 { u64::MAX } else { 1u64 << (k - s) };
            fact.saturating_mul(pow)
        }
        Solution::Smtwtp { .. } | Solution::Bpp { .. } => 1,
    }
}

pub fn log_count_symmetric(sol: &Solution) -> f64 {
    match sol {
        Solution::Cvrp { routes } => {
            let k = routes.len();
            let s = routes.iter().filter(|r| r.len() == 1).count();
            (1..=k).map(|i| (i as f64).ln()).sum::<f64>() + (k - s) as f64 * std::f64::consts::LN_2
        }
        other => (count_symmetric(other) as f64).ln(),
    }
}
