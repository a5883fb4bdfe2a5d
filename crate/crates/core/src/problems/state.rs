use super::{Instance, ProblemError};

/// A partially constructed solution: the state of the construction MDP.
///
/// Actions are node indices (see the module table). TSP starts with no
/// current node, so its first action picks the start city; every other kind
/// starts at node 0.
#[derive(Debug, Clone)]
pub struct PartialState<'a> {
    inst: &'a Instance,
    visited: Vec<bool>,
    placed: usize,
    current: Option<usize>,
    /// CVRP: capacity left in the running route. BPP: load of the open bin.
    load: u32,
    open_bins: usize,
    /// SMTWTP: completion time of the last scheduled job.
    time: f64,
    /// SMTWTP: weighted tardiness accumulated so far.
    tardiness: f64,
    actions: Vec<usize>,
}

impl<'a> PartialState<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let (current, load) = match inst {
            Instance::Tsp(_) => (None, 0),
            Instance::Cvrp(p) => (Some(0), p.capacity),
            _ => (Some(0), 0),
        };
        PartialState {
            inst,
            visited: vec![false; inst.n_nodes()],
            placed: 0,
            current,
            load,
            open_bins: 0,
            time: 0.0,
            tardiness: 0.0,
            actions: Vec::with_capacity(inst.n_nodes() * 2),
        }
    }

    /// Replays `actions` from the initial state.
    pub fn replay(inst: &'a Instance, actions: &[usize]) -> Result<Self, ProblemError> {
        let mut s = PartialState::new(inst);
        for &a in actions {
            s.apply(a)?;
        }
        Ok(s)
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn current(&self) -> Option<usize> {
        self.current
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Number of actions taken so far.
    pub fn step(&self) -> usize {
        self.actions.len()
    }

    pub fn placed(&self) -> usize {
        self.placed
    }

    pub fn is_visited(&self, node: usize) -> bool {
        self.visited[node]
    }

    pub fn is_terminal(&self) -> bool {
        self.placed == self.inst.size()
    }

    /// CVRP capacity left in the current route.
    pub fn remaining_capacity(&self) -> Option<u32> {
        matches!(self.inst, Instance::Cvrp(_)).then_some(self.load)
    }

    /// BPP load of the open bin, and number of bins opened so far.
    pub fn open_bin(&self) -> Option<(u32, usize)> {
        matches!(self.inst, Instance::Bpp(_)).then_some((self.load, self.open_bins))
    }

    /// SMTWTP weighted tardiness of the scheduled prefix.
    pub fn partial_tardiness(&self) -> f64 {
        self.tardiness
    }

    pub fn is_feasible(&self, a: usize) -> bool {
        if self.is_terminal() || a >= self.visited.len() {
            return false;
        }
        match self.inst {
            Instance::Tsp(_) => !self.visited[a],
            Instance::Cvrp(p) => {
                if a == 0 {
                    self.current != Some(0)
                } else {
                    !self.visited[a] && p.demand(a) <= self.load
                }
            }
            Instance::Smtwtp(_) | Instance::Bpp(_) => a != 0 && !self.visited[a],
        }
    }

    /// Writes the feasible actions into `out` (cleared first), ascending.
    pub fn feasible_into(&self, out: &mut Vec<usize>) {
        out.clear();
        if self.is_terminal() {
            return;
        }
        out.extend((0..self.visited.len()).filter(|&a| self.is_feasible(a)));
    }

    pub fn feasible_actions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.feasible_into(&mut out);
        out
    }

    pub fn apply(&mut self, a: usize) -> Result<(), ProblemError> {
        if !self.is_feasible(a) {
            return Err(ProblemError::InfeasibleAction { action: a, step: self.actions.len() });
        }
        match self.inst {
            Instance::Tsp(_) => {
                self.visited[a] = true;
                self.placed += 1;
            }
            Instance::Cvrp(p) => {
                if a == 0 {
                    self.load = p.capacity;
                } else {
                    self.visited[a] = true;
                    self.placed += 1;
                    self.load -= p.demand(a);
                }
            }
            Instance::Smtwtp(p) => {
                self.visited[a] = true;
                self.placed += 1;
                self.time += p.proc[a - 1];
                self.tardiness += p.tardiness(a - 1, self.time);
            }
            Instance::Bpp(p) => {
                self.visited[a] = true;
                self.placed += 1;
                let s = p.sizes[a - 1];
                if self.open_bins == 0 || self.load + s > p.bin_capacity {
                    self.open_bins += 1;
                    self.load = s;
                } else {
                    self.load += s;
                }
            }
        }
        self.current = Some(a);
        self.actions.push(a);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{CvrpInstance, TspInstance};

    #[test]
    fn tsp_masking() {
        let inst = Instance::Tsp(TspInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap());
        let mut s = PartialState::new(&inst);
        assert_eq!(s.feasible_actions(), vec![0, 1, 2]);
        s.apply(0).unwrap();
        assert_eq!(s.feasible_actions(), vec![1, 2]);
        assert!(s.apply(0).is_err());
        s.apply(2).unwrap();
        s.apply(1).unwrap();
        assert!(s.is_terminal());
        assert!(s.feasible_actions().is_empty());
    }

    #[test]
    fn cvrp_capacity_mask() {
        let inst = Instance::Cvrp(
            CvrpInstance::new([0.5, 0.5], vec![[0.0, 0.0], [1.0, 1.0], [0.2, 0.2]], vec![6, 3, 5], 10).unwrap(),
        );
        let mut s = PartialState::new(&inst);
        // depot masked at the depot
        assert_eq!(s.feasible_actions(), vec![1, 2, 3]);
        s.apply(1).unwrap();
        // capacity left 4: customer 2 (demand 3) and depot
        assert_eq!(s.remaining_capacity(), Some(4));
        assert_eq!(s.feasible_actions(), vec![0, 2]);
        s.apply(0).unwrap();
        assert_eq!(s.feasible_actions(), vec![2, 3]);
        s.apply(3).unwrap();
        s.apply(2).unwrap();
        assert!(s.is_terminal());
        assert!(s.feasible_actions().is_empty());
    }
}
