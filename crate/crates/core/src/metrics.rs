//! Edge-set diversity, optimality gaps and summary statistics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::problems::Solution;

/// Edges of a solution. Routing edges are undirected and stored as
/// `(min, max)`; sequencing edges are directed and include the edge out of
/// the dummy start node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    pub edges: BTreeSet<(usize, usize)>,
    pub directed: bool,
}

impl EdgeSet {
    pub fn of(sol: &Solution) -> Self {
        let directed = !sol.kind().is_undirected();
        let edges = sol
            .transitions()
            .into_iter()
            .map(|(i, j)| if directed { (i, j) } else { (i.min(j), i.max(j)) })
            .collect();
        EdgeSet { edges, directed }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn jaccard_sets(a: &EdgeSet, b: &EdgeSet) -> f64 {
    let inter = a.edges.intersection(&b.edges).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// `1 - |E(a) ∩ E(b)| / |E(a) ∪ E(b)|`.
///
/// # Panics
/// If the solutions are of different kinds.
pub fn jaccard_distance(a: &Solution, b: &Solution) -> f64 {
    assert_eq!(a.kind(), b.kind(), "jaccard_distance across problem kinds");
    jaccard_sets(&EdgeSet::of(a), &EdgeSet::of(b))
}

/// Mean Jaccard distance over ordered pairs `i != j`; 0 for fewer than two
/// solutions.
pub fn diversity(solutions: &[Solution]) -> f64 {
    let k = solutions.len();
    if k < 2 {
        return 0.0;
    }
    let sets: Vec<EdgeSet> = solutions.iter().map(EdgeSet::of).collect();
    let mut sum = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            sum += jaccard_sets(&sets[i], &sets[j]);
        }
    }
    2.0 * sum / (k * (k - 1)) as f64
}

/// `100 * (obj - reference) / reference`; `None` unless `reference > 0`.
pub fn optimality_gap(obj: f64, reference: f64) -> Option<f64> {
    (reference > 0.0).then(|| 100.0 * (obj - reference) / reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (0 for `n < 2`).
    pub std: f64,
}

/// Summary of the finite entries of `xs`; `None` if there are none.
pub fn summarize(xs: &[f64]) -> Option<Summary> {
    let v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Some(Summary {
        n,
        mean,
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        std: var.sqrt(),
    })
}
