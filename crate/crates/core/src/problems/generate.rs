use rand::Rng;

use super::{BppInstance, CvrpInstance, Point, ProblemError, SmtwtpInstance, TspInstance};

pub const CVRP_CAPACITY: u32 = 50;
pub const CVRP_DEMAND_RANGE: (u32, u32) = (1, 9);
pub const BPP_CAPACITY: u32 = 150;
pub const BPP_SIZE_RANGE: (u32, u32) = (20, 100);

fn unit_point<R: Rng + ?Sized>(rng: &mut R) -> Point {
    [rng.gen::<f64>(), rng.gen::<f64>()]
}

/// `n` cities drawn uniformly from the unit square.
pub fn gen_tsp<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<TspInstance, ProblemError> {
    if n < 2 {
        return Err(ProblemError::InvalidSize { got: n, min: 2 });
    }
    TspInstance::new((0..n).map(|_| unit_point(rng)).collect())
}

/// Depot and `n` customers in the unit square, demands in `1..=9`, capacity 50.
pub fn gen_cvrp<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CvrpInstance, ProblemError> {
    if n < 1 {
        return Err(ProblemError::InvalidSize { got: n, min: 1 });
    }
    let depot = unit_point(rng);
    let coords = (0..n).map(|_| unit_point(rng)).collect();
    let (lo, hi) = CVRP_DEMAND_RANGE;
    let demands = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    CvrpInstance::new(depot, coords, demands, CVRP_CAPACITY)
}

/// Due dates `U[0, n]`, weights `U[0, 1]`, processing times `U[0, 2]`.
pub fn gen_smtwtp<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SmtwtpInstance, ProblemError> {
    if n < 1 {
        return Err(ProblemError::InvalidSize { got: n, min: 1 });
    }
    let due = (0..n).map(|_| rng.gen::<f64>() * n as f64).collect();
    let weight = (0..n).map(|_| rng.gen::<f64>()).collect();
    let proc = (0..n).map(|_| rng.gen::<f64>() * 2.0).collect();
    SmtwtpInstance::new(due, weight, proc)
}

/// Item sizes in `20..=100`, bin capacity 150.
pub fn gen_bpp<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<BppInstance, ProblemError> {
    if n < 1 {
        return Err(ProblemError::InvalidSize { got: n, min: 1 });
    }
    let (lo, hi) = BPP_SIZE_RANGE;
    BppInstance::new((0..n).map(|_| rng.gen_range(lo..=hi)).collect(), BPP_CAPACITY)
}
