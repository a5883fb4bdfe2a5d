use rand::Rng;

use crate::aco::Pheromone;
use crate::construct::{rollout, sample_backward_actions, solution_from_actions, EdgeLogits};
use crate::heatmap::Heatmap;
use crate::parallel::map_indexed;
use crate::problems::{energy_unchecked, Instance, PartialState, ProblemError, Solution};
use crate::seed::{derive_seed, rng_from_seed};

use super::LsConfig;

/// Drops the last `n_destroy` actions of a uniformly drawn symmetric
/// trajectory of `sol` and replays the remaining prefix.
pub fn destroy<'a, R: Rng + ?Sized>(
    inst: &'a Instance,
    sol: &Solution,
    n_destroy: usize,
    rng: &mut R,
) -> Result<PartialState<'a>, ProblemError> {
    let actions = sample_backward_actions(inst, sol, rng)?;
    if n_destroy >= actions.len() {
        return Err(ProblemError::InvalidSize { got: actions.len(), min: n_destroy + 1 });
    }
    PartialState::replay(inst, &actions[..actions.len() - n_destroy])
}

/// Completes `partial` with the policy sharpened to `(rho * eta)^delta_r`.
pub fn repair<R: Rng + ?Sized>(
    partial: PartialState<'_>,
    eta: &Heatmap,
    rho: &Pheromone,
    delta_r: f64,
    rng: &mut R,
) -> Solution {
    repair_with_logits(partial, &EdgeLogits::new(eta, rho, delta_r), rng)
}

pub(crate) fn repair_with_logits<R: Rng + ?Sized>(mut partial: PartialState<'_>, logits: &EdgeLogits, rng: &mut R) -> Solution {
    rollout(&mut partial, logits, rng);
    solution_from_actions(partial.instance(), partial.actions())
}

/// Inverse temperature of round `r` (0-based) out of `rounds`: linear from
/// 1 to `delta_max`.
pub fn delta_for_round(r: usize, rounds: usize, delta_max: f64) -> f64 {
    if rounds <= 1 {
        1.0
    } else {
        1.0 + (delta_max - 1.0) * r as f64 / (rounds - 1) as f64
    }
}

/// Default destruction size: a quarter of the elements, rounded up.
pub fn default_n_destroy(inst: &Instance) -> usize {
    inst.size().div_ceil(4)
}

/// Evolutionary destroy-and-repair: each round, every survivor spawns
/// `batch_width` repaired children; parents and children are ranked by
/// energy and the `top_k` distinct best survive. Returns the survivors,
/// best first. `rounds = 0` returns the input unchanged.
pub fn destroy_and_repair<R: Rng + ?Sized>(
    inst: &Instance,
    sols: &[Solution],
    eta: &Heatmap,
    rho: &Pheromone,
    cfg: &LsConfig,
    rng: &mut R,
) -> Vec<Solution> {
    destroy_and_repair_logits(inst, sols, &EdgeLogits::new(eta, rho, 1.0), cfg, rng)
}

pub(crate) fn destroy_and_repair_logits<R: Rng + ?Sized>(
    inst: &Instance,
    sols: &[Solution],
    base: &EdgeLogits,
    cfg: &LsConfig,
    rng: &mut R,
) -> Vec<Solution> {
    if cfg.rounds == 0 || sols.is_empty() {
        return sols.to_vec();
    }
    let n_destroy = cfg.n_destroy.unwrap_or_else(|| default_n_destroy(inst));
    let mut pool: Vec<(Solution, f64)> = sols.iter().map(|s| (s.clone(), energy_unchecked(inst, s))).collect();
    for r in 0..cfg.rounds {
        let delta = delta_for_round(r, cfg.rounds, cfg.delta_max);
        let logits = EdgeLogits::from_log_weights(
            crate::matrix::SquareMatrix::from_fn(base.dim(), |i, j| delta * base.get(i, j)),
        );
        let round_seed = rng.next_u64();
        let width = cfg.batch_width;
        let children = map_indexed(pool.len() * width, |c| {
            let parent = &pool[c / width].0;
            let mut rng = rng_from_seed(derive_seed(round_seed, &[c as u64]));
            let mut actions = sample_backward_actions(inst, parent, &mut rng).expect("pool holds valid solutions");
            let keep = actions.len().saturating_sub(n_destroy).max(1);
            actions.truncate(keep);
            let partial = PartialState::replay(inst, &actions).expect("prefix of a valid trajectory");
            let child = repair_with_logits(partial, &logits, &mut rng);
            let e = energy_unchecked(inst, &child);
            (child, e)
        });
        pool.extend(children);
        pool.sort_by(|a, b| a.1.total_cmp(&b.1));
        pool.dedup_by(|a, b| a.0 == b.0);
        pool.truncate(cfg.top_k.max(1));
    }
    pool.into_iter().map(|(s, _)| s).collect()
}
