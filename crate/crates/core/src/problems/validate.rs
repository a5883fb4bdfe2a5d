use std::fmt;

use super::{Instance, Solution};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    KindMismatch,
    OutOfRange { element: usize },
    DuplicateVisit { element: usize },
    Missing { count: usize },
    /// Route (CVRP) whose demand exceeds the vehicle capacity.
    Capacity { route: usize, load: u32, capacity: u32 },
    /// Two consecutive depot visits, i.e. an empty route.
    EmptyRoute { route: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::KindMismatch => write!(f, "kind mismatch"),
            Violation::OutOfRange { element } => write!(f, "out of range: {element}"),
            Violation::DuplicateVisit { element } => write!(f, "duplicate visit: {element}"),
            Violation::Missing { count } => write!(f, "missing: {count} elements not visited"),
            Violation::Capacity { route, load, capacity } => {
                write!(f, "capacity: route {route} carries {load} > {capacity}")
            }
            Violation::EmptyRoute { route } => write!(f, "consecutive depot visits: route {route} is empty"),
        }
    }
}

/// Checks that each element of `lo..lo+n` appears exactly once in `seq`.
fn check_permutation<'a>(seq: impl Iterator<Item = &'a usize>, lo: usize, n: usize, out: &mut Vec<Violation>) {
    let mut seen = vec![false; n];
    let mut count = 0;
    for &e in seq {
        if e < lo || e >= lo + n {
            out.push(Violation::OutOfRange { element: e });
        } else if std::mem::replace(&mut seen[e - lo], true) {
            out.push(Violation::DuplicateVisit { element: e });
        } else {
            count += 1;
        }
    }
    if count < n {
        out.push(Violation::Missing { count: n - count });
    }
}

/// Validates a solution against an instance; returns every violation found.
pub fn validate(inst: &Instance, sol: &Solution) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    match (inst, sol) {
        (Instance::Tsp(p), Solution::Tsp { tour }) => check_permutation(tour.iter(), 0, p.len(), &mut v),
        (Instance::Cvrp(p), Solution::Cvrp { routes }) => {
            check_permutation(routes.iter().flatten(), 1, p.len(), &mut v);
            for (r, route) in routes.iter().enumerate() {
                if route.is_empty() {
                    v.push(Violation::EmptyRoute { route: r });
                }
                let load: u32 = route.iter().filter(|&&c| c >= 1 && c <= p.len()).map(|&c| p.demand(c)).sum();
                if load > p.capacity {
                    v.push(Violation::Capacity { route: r, load, capacity: p.capacity });
                }
            }
        }
        (Instance::Smtwtp(p), Solution::Smtwtp { order }) => check_permutation(order.iter(), 0, p.len(), &mut v),
        (Instance::Bpp(p), Solution::Bpp { order }) => check_permutation(order.iter(), 0, p.len(), &mut v),
        _ => v.push(Violation::KindMismatch),
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}
