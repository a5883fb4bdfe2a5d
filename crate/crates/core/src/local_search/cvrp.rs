use crate::problems::CvrpInstance;

use super::two_opt::IMPROVEMENT_EPS;

/// Node at position `k` of `route` padded with the depot at both ends:
/// `k = 0` and `k = len + 1` are the depot.
#[inline]
fn at(route: &[usize], k: usize) -> usize {
    if k == 0 || k > route.len() {
        0
    } else {
        route[k - 1]
    }
}

fn load(inst: &CvrpInstance, route: &[usize]) -> u32 {
    route.iter().map(|&c| inst.demand(c)).sum()
}

enum Move {
    /// Reverse padded positions `i+1..=j` of a route.
    TwoOpt { r: usize, i: usize, j: usize },
    /// Take the customer at padded position `p` of `from`, insert it in `to`
    /// between padded positions `q` and `q + 1`.
    Relocate { from: usize, p: usize, to: usize, q: usize },
    Swap { r1: usize, p1: usize, r2: usize, p2: usize },
}

fn find_improving(inst: &CvrpInstance, routes: &[Vec<usize>], loads: &[u32]) -> Option<Move> {
    let d = |a: usize, b: usize| inst.dist(a, b);

    for (r, route) in routes.iter().enumerate() {
        let m = route.len();
        for i in 0..m {
            for j in i + 2..=m {
                let (a, b, c, e) = (at(route, i), at(route, i + 1), at(route, j), at(route, j + 1));
                if d(a, c) + d(b, e) - d(a, b) - d(c, e) < -IMPROVEMENT_EPS {
                    return Some(Move::TwoOpt { r, i, j });
                }
            }
        }
    }

    for (from, src) in routes.iter().enumerate() {
        for p in 1..=src.len() {
            let u = at(src, p);
            let (prev, next) = (at(src, p - 1), at(src, p + 1));
            let removal = d(prev, next) - d(prev, u) - d(u, next);
            for (to, dst) in routes.iter().enumerate() {
                if to == from || loads[to] + inst.demand(u) > inst.capacity {
                    continue;
                }
                for q in 0..=dst.len() {
                    let (x, y) = (at(dst, q), at(dst, q + 1));
                    if removal + d(x, u) + d(u, y) - d(x, y) < -IMPROVEMENT_EPS {
                        return Some(Move::Relocate { from, p, to, q });
                    }
                }
            }
        }
    }

    for r1 in 0..routes.len() {
        for r2 in r1 + 1..routes.len() {
            let (a, b) = (&routes[r1], &routes[r2]);
            for p1 in 1..=a.len() {
                let u = at(a, p1);
                let (pu, nu) = (at(a, p1 - 1), at(a, p1 + 1));
                for p2 in 1..=b.len() {
                    let v = at(b, p2);
                    let (du, dv) = (inst.demand(u), inst.demand(v));
                    if loads[r1] - du + dv > inst.capacity || loads[r2] - dv + du > inst.capacity {
                        continue;
                    }
                    let (pv, nv) = (at(b, p2 - 1), at(b, p2 + 1));
                    let delta = d(pu, v) + d(v, nu) - d(pu, u) - d(u, nu) + d(pv, u) + d(u, nv) - d(pv, v) - d(v, nv);
                    if delta < -IMPROVEMENT_EPS {
                        return Some(Move::Swap { r1, p1, r2, p2 });
                    }
                }
            }
        }
    }
    None
}

/// First-improvement descent over intra-route 2-opt, inter-route relocate
/// and inter-route swap, in that order. Capacity is never violated; routes
/// emptied by a relocation are dropped.
pub fn cvrp_local_search(inst: &CvrpInstance, mut routes: Vec<Vec<usize>>, max_iters: usize) -> Vec<Vec<usize>> {
    let mut loads: Vec<u32> = routes.iter().map(|r| load(inst, r)).collect();
    for _ in 0..max_iters {
        let Some(mv) = find_improving(inst, &routes, &loads) else {
            break;
        };
        match mv {
            Move::TwoOpt { r, i, j } => routes[r][i..j].reverse(),
            Move::Relocate { from, p, to, q } => {
                let u = routes[from].remove(p - 1);
                routes[to].insert(q, u);
                loads[from] -= inst.demand(u);
                loads[to] += inst.demand(u);
                if routes[from].is_empty() {
                    routes.remove(from);
                    loads.remove(from);
                }
            }
            Move::Swap { r1, p1, r2, p2 } => {
                let (u, v) = (routes[r1][p1 - 1], routes[r2][p2 - 1]);
                routes[r1][p1 - 1] = v;
                routes[r2][p2 - 1] = u;
                loads[r1] = loads[r1] - inst.demand(u) + inst.demand(v);
                loads[r2] = loads[r2] - inst.demand(v) + inst.demand(u);
            }
        }
    }
    routes
}
