//! Solution refinement: 2-opt with double-bridge kicks for TSP, a
//! relocate/swap/2-opt descent for CVRP, and generic destroy-and-repair.

mod cvrp;
mod destroy_repair;
mod two_opt;

pub use cvrp::cvrp_local_search;
pub use destroy_repair::{default_n_destroy, delta_for_round, destroy, destroy_and_repair, repair};
pub use two_opt::{perturb, two_opt};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::construct::EdgeLogits;
use crate::problems::{energy_unchecked, tour_length, Instance, ProblemKind, Solution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LsConfig {
    /// Cap on applied improving moves (2-opt, CVRP descent).
    pub max_iters: usize,
    /// Double-bridge kicks applied to the refined TSP tour at inference.
    pub n_perturb: usize,
    /// Actions dropped by destroy; `None` means a quarter of the elements.
    pub n_destroy: Option<usize>,
    pub rounds: usize,
    pub top_k: usize,
    pub delta_max: f64,
    pub batch_width: usize,
}

impl Default for LsConfig {
    fn default() -> Self {
        LsConfig {
            max_iters: 10_000,
            n_perturb: 5,
            n_destroy: None,
            rounds: 10,
            top_k: 1,
            delta_max: 5.0,
            batch_width: 10,
        }
    }
}

impl LsConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.top_k > self.batch_width.max(1) {
            return Err(format!("top_k ({}) exceeds batch_width ({})", self.top_k, self.batch_width));
        }
        if !(self.delta_max >= 1.0) {
            return Err(format!("delta_max must be >= 1, got {}", self.delta_max));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsKind {
    /// Identity: solutions pass through unchanged.
    None,
    TwoOpt,
    CvrpMoves,
    DestroyRepair,
    /// 2-opt for TSP, CVRP moves for CVRP, destroy-and-repair otherwise.
    #[default]
    Auto,
}

/// A local-search operator bound to its configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalSearch {
    pub kind: LsKind,
    #[serde(default)]
    pub cfg: LsConfig,
}

impl LocalSearch {
    pub fn none() -> Self {
        LocalSearch { kind: LsKind::None, cfg: LsConfig::default() }
    }

    pub fn auto(cfg: LsConfig) -> Self {
        LocalSearch { kind: LsKind::Auto, cfg }
    }

    pub fn resolve(&self, problem: ProblemKind) -> LsKind {
        match (self.kind, problem) {
            (LsKind::Auto, ProblemKind::Tsp) => LsKind::TwoOpt,
            (LsKind::Auto, ProblemKind::Cvrp) => LsKind::CvrpMoves,
            (LsKind::Auto, _) => LsKind::DestroyRepair,
            (LsKind::TwoOpt, k) if k != ProblemKind::Tsp => LsKind::DestroyRepair,
            (LsKind::CvrpMoves, k) if k != ProblemKind::Cvrp => LsKind::DestroyRepair,
            (k, _) => k,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kind == LsKind::None
    }

    /// One refinement pass, as used for training experiences. `logits`
    /// drive destroy-and-repair and are ignored by the other operators.
    pub fn refine<R: Rng + ?Sized>(&self, inst: &Instance, sol: &Solution, logits: &EdgeLogits, rng: &mut R) -> Solution {
        match (self.resolve(inst.kind()), inst, sol) {
            (LsKind::None, ..) => sol.clone(),
            (LsKind::TwoOpt, Instance::Tsp(p), Solution::Tsp { tour }) => {
                Solution::Tsp { tour: two_opt(p, tour.clone(), self.cfg.max_iters) }.canonical()
            }
            (LsKind::CvrpMoves, Instance::Cvrp(p), Solution::Cvrp { routes }) => {
                Solution::Cvrp { routes: cvrp_local_search(p, routes.clone(), self.cfg.max_iters) }.canonical()
            }
            _ => destroy_repair::destroy_and_repair_logits(inst, std::slice::from_ref(sol), logits, &self.cfg, rng)
                .swap_remove(0),
        }
    }

    /// Refinement used at inference: [`refine`](Self::refine) followed, for
    /// TSP, by `n_perturb` double-bridge kicks each re-optimized by 2-opt
    /// and kept only if they improve.
    pub fn refine_with_perturbation<R: Rng + ?Sized>(
        &self,
        inst: &Instance,
        sol: &Solution,
        logits: &EdgeLogits,
        rng: &mut R,
    ) -> Solution {
        let refined = self.refine(inst, sol, logits, rng);
        let (LsKind::TwoOpt, Instance::Tsp(p), Solution::Tsp { tour }) = (self.resolve(inst.kind()), inst, &refined) else {
            return refined;
        };
        let mut best = tour.clone();
        let mut best_len = tour_length(p, &best);
        for _ in 0..self.cfg.n_perturb {
            let cand = two_opt(p, perturb(&best, rng), self.cfg.max_iters);
            let len = tour_length(p, &cand);
            if len < best_len {
                best = cand;
                best_len = len;
            }
        }
        let out = Solution::Tsp { tour: best }.canonical();
        debug_assert!(energy_unchecked(inst, &out) <= energy_unchecked(inst, sol) + 1e-9);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::uniform_prior;
    use crate::problems::gen_tsp;
    use crate::seed::rng_from_seed;

    #[test]
    fn resolve_per_kind() {
        let ls = LocalSearch::default();
        assert_eq!(ls.resolve(ProblemKind::Tsp), LsKind::TwoOpt);
        assert_eq!(ls.resolve(ProblemKind::Cvrp), LsKind::CvrpMoves);
        assert_eq!(ls.resolve(ProblemKind::Bpp), LsKind::DestroyRepair);
        assert_eq!(LocalSearch::none().resolve(ProblemKind::Tsp), LsKind::None);
    }

    #[test]
    fn perturbation_never_worse() {
        let inst = Instance::Tsp(gen_tsp(40, &mut rng_from_seed(1)).unwrap());
        let logits = EdgeLogits::from_prior(&uniform_prior(40).unwrap());
        let ls = LocalSearch::default();
        let start = Solution::Tsp { tour: (0..40).collect() };
        let mut rng = rng_from_seed(2);
        let a = ls.refine(&inst, &start, &logits, &mut rng);
        let b = ls.refine_with_perturbation(&inst, &start, &logits, &mut rng);
        assert!(energy_unchecked(&inst, &a) <= energy_unchecked(&inst, &start));
        assert!(energy_unchecked(&inst, &b) <= energy_unchecked(&inst, &a) + 1e-12);
    }

    #[test]
    fn config_check() {
        assert!(LsConfig::default().check().is_ok());
        assert!(LsConfig { top_k: 11, ..LsConfig::default() }.check().is_err());
        assert!(LsConfig { delta_max: 0.5, ..LsConfig::default() }.check().is_err());
    }
}
