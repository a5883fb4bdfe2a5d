//! Ant colony optimization guided by edge priors trained as GFlowNets.
//!
//! A per-instance prior `eta` is trained with an off-policy
//! trajectory-balance objective so that its sampling distribution is
//! proportional to `exp(-beta * E(x))`, then used as the heuristic matrix of
//! an ant colony search. Four problems are supported: TSP, CVRP, SMTWTP and
//! BPP.

pub mod aco;
pub mod clock;
pub mod construct;
pub mod experiment;
pub mod gfn_train;
pub mod heatmap;
pub mod io;
pub mod local_search;
pub mod matrix;
pub mod metrics;
pub mod parallel;
pub mod problems;
pub mod seed;

pub use aco::{run_aco, run_gfacs, AcoConfig, Pheromone, SearchResult, UpdateRule};
pub use gfn_train::{train_prior, LossKind, TrainConfig, TrainedPrior};
pub use heatmap::Heatmap;
pub use local_search::{LocalSearch, LsConfig};
pub use problems::{energy, Instance, ProblemKind, Solution};
