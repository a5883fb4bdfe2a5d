use rand::Rng;

use crate::problems::TspInstance;

/// Moves must gain more than this to be applied.
pub(crate) const IMPROVEMENT_EPS: f64 = 1e-10;

/// Change in tour length from reversing `tour[i+1..=j]`.
#[inline]
pub(crate) fn two_opt_delta(inst: &TspInstance, tour: &[usize], i: usize, j: usize) -> f64 {
    let n = tour.len();
    let (a, b, c, d) = (tour[i], tour[i + 1], tour[j], tour[(j + 1) % n]);
    inst.dist(a, c) + inst.dist(b, d) - inst.dist(a, b) - inst.dist(c, d)
}

/// First-improvement 2-opt, scanning `(i, j)` row-major. Stops when a full
/// pass finds no improving exchange or after `max_iters` applied moves.
pub fn two_opt(inst: &TspInstance, mut tour: Vec<usize>, max_iters: usize) -> Vec<usize> {
    let n = tour.len();
    if n < 4 {
        return tour;
    }
    let mut moves = 0;
    loop {
        let mut improved = false;
        for i in 0..n - 2 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if two_opt_delta(inst, &tour, i, j) < -IMPROVEMENT_EPS {
                    tour[i + 1..=j].reverse();
                    improved = true;
                    moves += 1;
                    if moves >= max_iters {
                        return tour;
                    }
                }
            }
        }
        if !improved {
            return tour;
        }
    }
}

/// Double-bridge kick: cuts the tour into `A B C D` (each at least two
/// cities) and reconnects as `A D C B`, replacing exactly four edges.
/// Tours shorter than 8 are returned unchanged.
pub fn perturb<R: Rng + ?Sized>(tour: &[usize], rng: &mut R) -> Vec<usize> {
    let n = tour.len();
    if n < 8 {
        return tour.to_vec();
    }
    let p1 = rng.gen_range(2..=n - 6);
    let p2 = rng.gen_range(p1 + 2..=n - 4);
    let p3 = rng.gen_range(p2 + 2..=n - 2);
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&tour[..p1]);
    out.extend_from_slice(&tour[p3..]);
    out.extend_from_slice(&tour[p2..p3]);
    out.extend_from_slice(&tour[p1..p2]);
    out
}
