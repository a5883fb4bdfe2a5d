//! wasm-bindgen bindings for the browser demo. Every entry point takes and
//! returns JSON strings; the `*_json` functions are the plain-Rust versions
//! used by the bindings and by the native tests.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use gfacs::experiment::{generate_instance, run_arm, Arm};
use gfacs::io::{instance_to_json, parse_instance_json};
use gfacs::{AcoConfig, LocalSearch, LsConfig, ProblemKind, SearchResult, TrainConfig};

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct SolveRequest {
    pub prior: String,
    pub ants: usize,
    pub rounds: usize,
    pub epochs: usize,
    pub use_ls: bool,
    pub seed: u64,
}

impl Default for SolveRequest {
    fn default() -> Self {
        SolveRequest { prior: "heuristic".into(), ants: 20, rounds: 20, epochs: 10, use_ls: true, seed: 0 }
    }
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub arm: String,
    pub best_energy: f64,
    pub best_trace: Vec<f64>,
    pub diversity: f64,
}

pub fn generate_json(problem: &str, size: usize, seed: u64) -> Result<String, String> {
    let kind: ProblemKind = problem.parse()?;
    let inst = generate_instance(kind, size, seed).map_err(|e| e.to_string())?;
    Ok(instance_to_json(&inst, Some(seed)))
}

fn solve_inner(instance: &str, req: &SolveRequest, arm: Arm) -> Result<SearchResult, String> {
    let inst = parse_instance_json(instance).map_err(|e| e.to_string())?.instance;
    let train = TrainConfig {
        n_epoch: req.epochs.max(1),
        n_flat: 0,
        steps_per_epoch: 1,
        k_samples: 16,
        ..TrainConfig::for_problem(inst.kind())
    };
    let aco = AcoConfig { n_ants: req.ants, n_rounds: req.rounds, use_ls: req.use_ls, seed: req.seed, ..AcoConfig::default() };
    let ls = LocalSearch::auto(LsConfig { n_perturb: 1, rounds: 3, ..LsConfig::default() });
    run_arm(&inst, arm, &train, &aco, &ls).map_err(|e| e.to_string())
}

pub fn solve_json(instance: &str, request: &str) -> Result<String, String> {
    let req: SolveRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let arm: Arm = req.prior.parse()?;
    let res = solve_inner(instance, &req, arm)?;
    serde_json::to_string(&res).map_err(|e| e.to_string())
}

/// Runs the uniform, heuristic and trained priors with the same seed.
pub fn compare_json(instance: &str, request: &str) -> Result<String, String> {
    let req: SolveRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let out = [Arm::Uniform, Arm::Heuristic, Arm::GfacsTb]
        .into_iter()
        .map(|arm| {
            let r = solve_inner(instance, &req, arm)?;
            Ok(Comparison {
                arm: arm.to_string(),
                best_energy: r.best_energy,
                diversity: r.diversity_trace.iter().sum::<f64>() / r.diversity_trace.len() as f64,
                best_trace: r.best_trace,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn generate(problem: &str, size: usize, seed: u64) -> Result<String, JsValue> {
    generate_json(problem, size, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve(instance: &str, request: &str) -> Result<String, JsValue> {
    solve_json(instance, request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn compare(instance: &str, request: &str) -> Result<String, JsValue> {
    compare_json(instance, request).map_err(|e| JsValue::from_str(&e))
}
