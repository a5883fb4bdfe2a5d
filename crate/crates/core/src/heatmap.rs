//! Prior edge weights: uniform, hand-crafted, or learned log-parameters.

use serde::{Deserialize, Serialize};

use crate::matrix::SquareMatrix;
use crate::problems::Instance;

/// Distance clamp for reciprocal priors.
pub const EPS: f64 = 1e-10;
/// Logits are clamped to `[-THETA_CLAMP, THETA_CLAMP]` before exponentiation.
pub const THETA_CLAMP: f64 = 30.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HeatmapError {
    #[error("heatmap dimension must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("heatmap has {got} weights, expected {n}x{n}")]
    Shape { n: usize, got: usize },
    #[error("heatmap entry ({i}, {j}) = {value} is not strictly positive and finite")]
    NonPositive { i: usize, j: usize, value: f64 },
}

/// Strictly positive prior edge weights. The diagonal is never sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HeatmapFile", into = "HeatmapFile")]
pub struct Heatmap(SquareMatrix);

#[derive(Serialize, Deserialize)]
struct HeatmapFile {
    n: usize,
    w: Vec<f64>,
}

impl TryFrom<HeatmapFile> for Heatmap {
    type Error = HeatmapError;
    fn try_from(f: HeatmapFile) -> Result<Self, Self::Error> {
        let got = f.w.len();
        let m = SquareMatrix::from_vec(f.n, f.w).ok_or(HeatmapError::Shape { n: f.n, got })?;
        Heatmap::new(m)
    }
}

impl From<Heatmap> for HeatmapFile {
    fn from(h: Heatmap) -> Self {
        HeatmapFile { n: h.0.dim(), w: h.0.as_slice().to_vec() }
    }
}

impl Heatmap {
    pub fn new(m: SquareMatrix) -> Result<Self, HeatmapError> {
        let n = m.dim();
        if n < 2 {
            return Err(HeatmapError::TooSmall(n));
        }
        for i in 0..n {
            for j in 0..n {
                let v = m.get(i, j);
                if !(v > 0.0 && v.is_finite()) {
                    return Err(HeatmapError::NonPositive { i, j, value: v });
                }
            }
        }
        Ok(Heatmap(m))
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

    /// Multiplies every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Heatmap, HeatmapError> {
        Heatmap::new(self.0.map(|x| x * c))
    }
}

pub fn uniform_prior(n: usize) -> Result<Heatmap, HeatmapError> {
    Heatmap::new(SquareMatrix::filled(n, 1.0))
}

/// Classic ACO visibility: reciprocal distance for routing, earliest due
/// date for SMTWTP, largest item first for BPP.
pub fn heuristic_prior(inst: &Instance) -> Heatmap {
    let n = inst.n_nodes();
    let m = match inst {
        Instance::Tsp(_) | Instance::Cvrp(_) => SquareMatrix::from_fn(n, |i, j| {
            if i == j {
                1.0
            } else {
                1.0 / inst.edge_length(i, j).unwrap().max(EPS)
            }
        }),
        Instance::Smtwtp(p) => SquareMatrix::from_fn(n, |_, j| if j == 0 { 1.0 } else { 1.0 / p.due[j - 1].max(EPS) }),
        Instance::Bpp(p) => SquareMatrix::from_fn(n, |_, j| if j == 0 { 1.0 } else { p.sizes[j - 1] as f64 }),
    };
    Heatmap::new(m).expect("heuristic weights are positive and finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorInit {
    #[default]
    Uniform,
    FromHeuristic,
}

/// Learnable per-instance log-heatmap, log-partition and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub theta: SquareMatrix,
    pub log_z: f64,
    pub m_theta: SquareMatrix,
    pub v_theta: SquareMatrix,
    pub m_log_z: f64,
    pub v_log_z: f64,
    pub step: u64,
}

impl TrainState {
    pub fn from_theta(theta: SquareMatrix) -> Self {
        let n = theta.dim();
        TrainState {
            theta,
            log_z: 0.0,
            m_theta: SquareMatrix::filled(n, 0.0),
            v_theta: SquareMatrix::filled(n, 0.0),
            m_log_z: 0.0,
            v_log_z: 0.0,
            step: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }
}

pub fn init_learnable(inst: &Instance, init: PriorInit) -> TrainState {
    let n = inst.n_nodes();
    let theta = match init {
        PriorInit::Uniform => SquareMatrix::filled(n, 0.0),
        PriorInit::FromHeuristic => heuristic_prior(inst).matrix().map(|w| w.ln().clamp(-THETA_CLAMP, THETA_CLAMP)),
    };
    TrainState::from_theta(theta)
}

pub fn to_heatmap(state: &TrainState) -> Heatmap {
    Heatmap(state.theta.map(|t| t.clamp(-THETA_CLAMP, THETA_CLAMP).exp()))
}
