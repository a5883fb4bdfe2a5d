//! Problem instances, random generators, energies and feasibility.
//!
//! Every problem is exposed to the constructive policy as a walk over an
//! `n_nodes() x n_nodes()` edge matrix:
//!
//! | kind   | node 0            | other nodes          |
//! |--------|-------------------|----------------------|
//! | TSP    | city 0            | cities `1..N`        |
//! | CVRP   | depot             | customers `1..=N`    |
//! | SMTWTP | dummy start       | job `j` is node `j+1`|
//! | BPP    | dummy start       | item `i` is node `i+1`|

mod generate;
mod state;
mod validate;

pub use generate::{gen_bpp, gen_cvrp, gen_smtwtp, gen_tsp};
pub use state::PartialState;
pub use validate::Violation;

use serde::{Deserialize, Serialize};
use std::fmt;

pub type Point = [f64; 2];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProblemError {
    #[error("invalid size {got}: need at least {min}")]
    InvalidSize { got: usize, min: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid solution: {}", join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("action {action} is not feasible at step {step}")]
    InfeasibleAction { action: usize, step: usize },
    #[error("trajectory is incomplete ({done} of {total} elements placed)")]
    Incomplete { done: usize, total: usize },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Tsp,
    Cvrp,
    Smtwtp,
    Bpp,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Tsp => "tsp",
            ProblemKind::Cvrp => "cvrp",
            ProblemKind::Smtwtp => "smtwtp",
            ProblemKind::Bpp => "bpp",
        }
    }

    /// Routing problems use undirected edges; sequencing problems directed.
    pub fn is_undirected(self) -> bool {
        matches!(self, ProblemKind::Tsp | ProblemKind::Cvrp)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsp" => Ok(ProblemKind::Tsp),
            "cvrp" => Ok(ProblemKind::Cvrp),
            "smtwtp" => Ok(ProblemKind::Smtwtp),
            "bpp" => Ok(ProblemKind::Bpp),
            other => Err(format!("unknown problem kind `{other}`")),
        }
    }
}

/// How Euclidean distances are turned into edge costs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    #[default]
    Exact,
    /// TSPLIB `EUC_2D` convention: nearest integer of the Euclidean distance.
    Euc2dRounded,
}

#[inline]
fn euclid(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TspInstance {
    pub coords: Vec<Point>,
    #[serde(default)]
    pub distance: DistanceMode,
}

impl TspInstance {
    pub fn new(coords: Vec<Point>) -> Result<Self, ProblemError> {
        let inst = TspInstance { coords, distance: DistanceMode::Exact };
        inst.check()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let d = euclid(self.coords[i], self.coords[j]);
        match self.distance {
            DistanceMode::Exact => d,
            DistanceMode::Euc2dRounded => (d + 0.5).floor(),
        }
    }

    fn check(&self) -> Result<(), ProblemError> {
        if self.coords.len() < 2 {
            return Err(ProblemError::InvalidSize { got: self.coords.len(), min: 2 });
        }
        check_points("coords", &self.coords)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvrpInstance {
    pub depot: Point,
    pub coords: Vec<Point>,
    pub demands: Vec<u32>,
    pub capacity: u32,
}

impl CvrpInstance {
    pub fn new(depot: Point, coords: Vec<Point>, demands: Vec<u32>, capacity: u32) -> Result<Self, ProblemError> {
        let inst = CvrpInstance { depot, coords, demands, capacity };
        inst.check()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Node-space coordinate: 0 is the depot, `c` is customer `c - 1`.
    pub fn node(&self, i: usize) -> Point {
        if i == 0 {
            self.depot
        } else {
            self.coords[i - 1]
        }
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        euclid(self.node(i), self.node(j))
    }

    /// Demand of node `i` (0 for the depot).
    pub fn demand(&self, i: usize) -> u32 {
        if i == 0 {
            0
        } else {
            self.demands[i - 1]
        }
    }

    fn check(&self) -> Result<(), ProblemError> {
        if self.coords.is_empty() {
            return Err(ProblemError::InvalidSize { got: 0, min: 1 });
        }
        if self.demands.len() != self.coords.len() {
            return Err(ProblemError::InvalidInstance(format!(
                "demands has {} entries for {} customers",
                self.demands.len(),
                self.coords.len()
            )));
        }
        if self.capacity == 0 {
            return Err(ProblemError::InvalidInstance("capacity must be positive".into()));
        }
        for (i, &d) in self.demands.iter().enumerate() {
            if d == 0 || d > self.capacity {
                return Err(ProblemError::InvalidInstance(format!(
                    "demands[{i}] = {d} outside 1..={}",
                    self.capacity
                )));
            }
        }
        check_points("depot", &[self.depot])?;
        check_points("coords", &self.coords)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmtwtpInstance {
    pub due: Vec<f64>,
    pub weight: Vec<f64>,
    pub proc: Vec<f64>,
}

impl SmtwtpInstance {
    pub fn new(due: Vec<f64>, weight: Vec<f64>, proc: Vec<f64>) -> Result<Self, ProblemError> {
        let inst = SmtwtpInstance { due, weight, proc };
        inst.check()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.due.len()
    }

    pub fn is_empty(&self) -> bool {
        self.due.is_empty()
    }

    /// Weighted tardiness of `job` finishing at `completion`.
    pub fn tardiness(&self, job: usize, completion: f64) -> f64 {
        self.weight[job] * (completion - self.due[job]).max(0.0)
    }

    fn check(&self) -> Result<(), ProblemError> {
        let n = self.due.len();
        if n == 0 {
            return Err(ProblemError::InvalidSize { got: 0, min: 1 });
        }
        if self.weight.len() != n || self.proc.len() != n {
            return Err(ProblemError::InvalidInstance(format!(
                "due/weight/proc lengths differ: {}/{}/{}",
                n,
                self.weight.len(),
                self.proc.len()
            )));
        }
        for (name, v) in [("due", &self.due), ("weight", &self.weight), ("proc", &self.proc)] {
            if let Some(i) = v.iter().position(|x| !x.is_finite() || *x < 0.0) {
                return Err(ProblemError::InvalidInstance(format!("{name}[{i}] must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BppInstance {
    pub sizes: Vec<u32>,
    pub bin_capacity: u32,
}

impl BppInstance {
    pub fn new(sizes: Vec<u32>, bin_capacity: u32) -> Result<Self, ProblemError> {
        let inst = BppInstance { sizes, bin_capacity };
        inst.check()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Next-fit packing of `order` (item indices): returns the bins.
    pub fn next_fit(&self, order: &[usize]) -> Vec<Vec<usize>> {
        let mut bins: Vec<Vec<usize>> = Vec::new();
        let mut load = 0;
        for &item in order {
            let s = self.sizes[item];
            if bins.is_empty() || load + s > self.bin_capacity {
                bins.push(Vec::new());
                load = 0;
            }
            bins.last_mut().unwrap().push(item);
            load += s;
        }
        bins
    }

    fn check(&self) -> Result<(), ProblemError> {
        if self.sizes.is_empty() {
            return Err(ProblemError::InvalidSize { got: 0, min: 1 });
        }
        if self.bin_capacity == 0 {
            return Err(ProblemError::InvalidInstance("bin_capacity must be positive".into()));
        }
        for (i, &s) in self.sizes.iter().enumerate() {
            if s == 0 || s > self.bin_capacity {
                return Err(ProblemError::InvalidInstance(format!(
                    "sizes[{i}] = {s} outside 1..={}",
                    self.bin_capacity
                )));
            }
        }
        Ok(())
    }
}

fn check_points(name: &str, pts: &[Point]) -> Result<(), ProblemError> {
    match pts.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
        Some(i) => Err(ProblemError::InvalidInstance(format!("{name}[{i}] is not finite"))),
        None => Ok(()),
    }
}

/// A problem instance of any supported kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Tsp(TspInstance),
    Cvrp(CvrpInstance),
    Smtwtp(SmtwtpInstance),
    Bpp(BppInstance),
}

impl Instance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Instance::Tsp(_) => ProblemKind::Tsp,
            Instance::Cvrp(_) => ProblemKind::Cvrp,
            Instance::Smtwtp(_) => ProblemKind::Smtwtp,
            Instance::Bpp(_) => ProblemKind::Bpp,
        }
    }

    /// Number of cities, customers, jobs or items.
    pub fn size(&self) -> usize {
        match self {
            Instance::Tsp(p) => p.len(),
            Instance::Cvrp(p) => p.len(),
            Instance::Smtwtp(p) => p.len(),
            Instance::Bpp(p) => p.len(),
        }
    }

    /// Dimension of the edge matrices (heatmap, pheromone).
    pub fn n_nodes(&self) -> usize {
        match self {
            Instance::Tsp(p) => p.len(),
            _ => self.size() + 1,
        }
    }

    /// Re-checks every structural invariant of the payload.
    pub fn check(&self) -> Result<(), ProblemError> {
        match self {
            Instance::Tsp(p) => p.check(),
            Instance::Cvrp(p) => p.check(),
            Instance::Smtwtp(p) => p.check(),
            Instance::Bpp(p) => p.check(),
        }
    }

    /// Edge cost between two nodes for routing problems; `None` otherwise.
    pub fn edge_length(&self, i: usize, j: usize) -> Option<f64> {
        match self {
            Instance::Tsp(p) => Some(p.dist(i, j)),
            Instance::Cvrp(p) => Some(p.dist(i, j)),
            _ => None,
        }
    }
}

/// A complete solution, stored in a canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Solution {
    /// Hamiltonian cycle as a city permutation.
    Tsp { tour: Vec<usize> },
    /// Routes of customer node indices (`1..=N`); depot legs are implicit.
    Cvrp { routes: Vec<Vec<usize>> },
    /// Job processing order (job indices `0..N`).
    Smtwtp { order: Vec<usize> },
    /// Item order (item indices `0..N`), packed next-fit.
    Bpp { order: Vec<usize> },
}

impl Solution {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Solution::Tsp { .. } => ProblemKind::Tsp,
            Solution::Cvrp { .. } => ProblemKind::Cvrp,
            Solution::Smtwtp { .. } => ProblemKind::Smtwtp,
            Solution::Bpp { .. } => ProblemKind::Bpp,
        }
    }

    /// Canonical representative of the solution's symmetry class.
    ///
    /// TSP tours start at city 0 and run toward the smaller neighbour; CVRP
    /// routes are oriented first < last and sorted by their first customer.
    pub fn canonical(self) -> Solution {
        match self {
            Solution::Tsp { tour } => Solution::Tsp { tour: canonical_cycle(tour) },
            Solution::Cvrp { routes } => {
                let mut routes: Vec<Vec<usize>> = routes
                    .into_iter()
                    .filter(|r| !r.is_empty())
                    .map(|mut r| {
                        if r.first() > r.last() {
                            r.reverse();
                        }
                        r
                    })
                    .collect();
                routes.sort();
                Solution::Cvrp { routes }
            }
            other => other,
        }
    }

    /// Directed node-space transitions of the canonical construction,
    /// including depot legs (CVRP) and the dummy-start edge (SMTWTP, BPP).
    pub fn transitions(&self) -> Vec<(usize, usize)> {
        match self {
            Solution::Tsp { tour } => {
                let n = tour.len();
                (0..n).map(|i| (tour[i], tour[(i + 1) % n])).collect()
            }
            Solution::Cvrp { routes } => {
                let mut out = Vec::new();
                for r in routes {
                    let mut prev = 0;
                    for &c in r {
                        out.push((prev, c));
                        prev = c;
                    }
                    out.push((prev, 0));
                }
                out
            }
            Solution::Smtwtp { order } | Solution::Bpp { order } => {
                let mut prev = 0;
                order
                    .iter()
                    .map(|&j| {
                        let e = (prev, j + 1);
                        prev = j + 1;
                        e
                    })
                    .collect()
            }
        }
    }
}

fn canonical_cycle(mut tour: Vec<usize>) -> Vec<usize> {
    let n = tour.len();
    if n < 3 {
        if let Some(p) = tour.iter().position(|&c| c == 0) {
            tour.rotate_left(p);
        }
        return tour;
    }
    let start = tour.iter().enumerate().min_by_key(|(_, &c)| c).map(|(i, _)| i).unwrap_or(0);
    tour.rotate_left(start);
    if tour[1] > tour[n - 1] {
        tour[1..].reverse();
    }
    tour
}

/// Energy of a valid solution; errors if the solution is invalid.
pub fn energy(inst: &Instance, sol: &Solution) -> Result<f64, ProblemError> {
    validate(inst, sol).map_err(ProblemError::Validation)?;
    Ok(energy_unchecked(inst, sol))
}

/// Energy without validation. Callers must pass a solution that matches
/// the instance kind.
pub fn energy_unchecked(inst: &Instance, sol: &Solution) -> f64 {
    match (inst, sol) {
        (Instance::Tsp(p), Solution::Tsp { tour }) => tour_length(p, tour),
        (Instance::Cvrp(p), Solution::Cvrp { routes }) => routes.iter().map(|r| route_length(p, r)).sum(),
        (Instance::Smtwtp(p), Solution::Smtwtp { order }) => {
            let mut t = 0.0;
            order
                .iter()
                .map(|&j| {
                    t += p.proc[j];
                    p.tardiness(j, t)
                })
                .sum()
        }
        (Instance::Bpp(p), Solution::Bpp { order }) => p
            .next_fit(order)
            .iter()
            .map(|bin| {
                let load: u32 = bin.iter().map(|&i| p.sizes[i]).sum();
                p.bin_capacity as f64 / load as f64
            })
            .sum(),
        _ => f64::NAN,
    }
}

pub fn tour_length(p: &TspInstance, tour: &[usize]) -> f64 {
    let n = tour.len();
    if n == 0 {
        return 0.0;
    }
    let mut e = p.dist(tour[n - 1], tour[0]);
    for w in tour.windows(2) {
        e += p.dist(w[0], w[1]);
    }
    e
}

/// Length of one CVRP route including both depot legs.
pub fn route_length(p: &CvrpInstance, route: &[usize]) -> f64 {
    let (Some(&first), Some(&last)) = (route.first(), route.last()) else {
        return 0.0;
    };
    let mut e = p.dist(0, first) + p.dist(last, 0);
    for w in route.windows(2) {
        e += p.dist(w[0], w[1]);
    }
    e
}

pub use validate::validate;

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> TspInstance {
        TspInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn tsp_energy_examples() {
        let two = Instance::Tsp(TspInstance::new(vec![[0.0, 0.0], [0.0, 1.0]]).unwrap());
        assert_eq!(energy(&two, &Solution::Tsp { tour: vec![0, 1] }).unwrap(), 2.0);
        let sq = Instance::Tsp(square());
        assert_eq!(energy(&sq, &Solution::Tsp { tour: vec![0, 1, 2, 3] }).unwrap(), 4.0);
    }

    #[test]
    fn bpp_full_bin_contributes_one() {
        let inst = Instance::Bpp(BppInstance::new(vec![100, 50], 150).unwrap());
        assert_eq!(energy(&inst, &Solution::Bpp { order: vec![0, 1] }).unwrap(), 1.0);
        // 100 then 50 fit; but 100, 60 would open two bins
        let inst = Instance::Bpp(BppInstance::new(vec![100, 60], 150).unwrap());
        let e = energy(&inst, &Solution::Bpp { order: vec![0, 1] }).unwrap();
        assert!((e - (1.5 + 2.5)).abs() < 1e-12);
    }

    #[test]
    fn smtwtp_single_job() {
        let inst = Instance::Smtwtp(SmtwtpInstance::new(vec![0.5], vec![0.8], vec![1.5]).unwrap());
        let e = energy(&inst, &Solution::Smtwtp { order: vec![0] }).unwrap();
        assert!((e - 0.8 * (1.5 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn canonical_tsp_direction_and_rotation() {
        let a = Solution::Tsp { tour: vec![2, 3, 0, 1] }.canonical();
        let b = Solution::Tsp { tour: vec![1, 0, 3, 2] }.canonical();
        assert_eq!(a, b);
        assert_eq!(a, Solution::Tsp { tour: vec![0, 1, 2, 3] });
    }

    #[test]
    fn canonical_cvrp() {
        let s = Solution::Cvrp { routes: vec![vec![5, 2], vec![3], vec![4, 1]] }.canonical();
        assert_eq!(s, Solution::Cvrp { routes: vec![vec![1, 4], vec![2, 5], vec![3]] });
    }

    #[test]
    fn rounded_distance_mode() {
        let mut p = TspInstance::new(vec![[0.0, 0.0], [3.0, 4.4]]).unwrap();
        p.distance = DistanceMode::Euc2dRounded;
        assert_eq!(p.dist(0, 1), 5.0);
    }

    #[test]
    fn instance_checks() {
        assert!(matches!(TspInstance::new(vec![[0.0, 0.0]]), Err(ProblemError::InvalidSize { .. })));
        assert!(CvrpInstance::new([0.0, 0.0], vec![[0.1, 0.1]], vec![51], 50).is_err());
        assert!(BppInstance::new(vec![151], 150).is_err());
        assert!(SmtwtpInstance::new(vec![1.0], vec![], vec![1.0]).is_err());
    }
}
