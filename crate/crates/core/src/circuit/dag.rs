use super::Circuit;

/// Qubit-dependency DAG over gate indices.
///
/// There is an arc `g1 -> g2` iff `g2` is the next gate touching some qubit
/// after `g1`. Gates weigh 1, barriers and measures weigh 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitDag {
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    weights: Vec<usize>,
}

impl CircuitDag {
    pub fn build(c: &Circuit) -> Self {
        let n = c.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        let mut last: Vec<Option<usize>> = vec![None; c.num_qubits()];
        for (i, g) in c.gates().iter().enumerate() {
            for &q in &g.qubits {
                if let Some(p) = last[q] {
                    if !preds[i].contains(&p) {
                        preds[i].push(p);
                        succs[p].push(i);
                    }
                }
                last[q] = Some(i);
            }
        }
        let weights = c
            .gates()
            .iter()
            .map(|g| usize::from(g.has_duration()))
            .collect();
        Self {
            preds,
            succs,
            weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.succs[node]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.succs[from].contains(&to)
    }

    pub fn weight(&self, node: usize) -> usize {
        self.weights[node]
    }

    /// Kahn's algorithm; `None` means a cycle, which `build` never produces.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        self.topological_order_by(|ready| {
            ready
                .iter()
                .enumerate()
                .min_by_key(|(_, &n)| n)
                .map(|(i, _)| i)
                .unwrap()
        })
    }

    /// Kahn's algorithm where `pick` chooses which ready node to emit next
    /// (returns an index into the ready list).
    pub fn topological_order_by(
        &self,
        mut pick: impl FnMut(&[usize]) -> usize,
    ) -> Option<Vec<usize>> {
        let n = self.node_count();
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while !ready.is_empty() {
            let node = ready.swap_remove(pick(&ready));
            order.push(node);
            for &s in &self.succs[node] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(s);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Length of the heaviest path ending at each node (node included).
    /// Gate order is topological so one forward sweep suffices.
    pub fn longest_to(&self) -> Vec<usize> {
        let mut head = vec![0usize; self.node_count()];
        for i in 0..self.node_count() {
            let best = self.preds[i].iter().map(|&p| head[p]).max().unwrap_or(0);
            head[i] = best + self.weights[i];
        }
        head
    }

    /// Length of the heaviest path starting at each node (node included).
    pub fn longest_from(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut tail = vec![0usize; n];
        for i in (0..n).rev() {
            let best = self.succs[i].iter().map(|&s| tail[s]).max().unwrap_or(0);
            tail[i] = best + self.weights[i];
        }
        tail
    }

    pub fn depth(&self) -> usize {
        self.longest_to().into_iter().max().unwrap_or(0)
    }

    /// Length of the heaviest path through each node.
    pub fn longest_through(&self) -> Vec<usize> {
        let head = self.longest_to();
        let tail = self.longest_from();
        (0..self.node_count())
            .map(|i| head[i] + tail[i] - self.weights[i])
            .collect()
    }

    /// Nodes lying on at least one maximum-length path.
    pub fn critical_nodes(&self) -> Vec<bool> {
        let through = self.longest_through();
        let depth = through.iter().copied().max().unwrap_or(0);
        through
            .iter()
            .map(|&t| depth > 0 && t == depth)
            .collect()
    }
}

/// Longest DAG path counting unit-duration gates.
pub fn circuit_depth(c: &Circuit) -> usize {
    CircuitDag::build(c).depth()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    #[test]
    fn disjoint_qubits_have_no_edges() {
        let c = Circuit::from_gates(2, [Gate::x(0), Gate::x(1)]).unwrap();
        let d = CircuitDag::build(&c);
        assert_eq!(d.node_count(), 2);
        assert_eq!(d.edge_count(), 0);
    }

    #[test]
    fn sequential_dependency() {
        let c = Circuit::from_gates(2, [Gate::cx(0, 1), Gate::x(1)]).unwrap();
        let d = CircuitDag::build(&c);
        assert!(d.has_edge(0, 1));
        assert_eq!(d.edge_count(), 1);
    }

    #[test]
    fn depth_examples() {
        assert_eq!(circuit_depth(&Circuit::new(1).unwrap()), 0);
        let c = Circuit::from_gates(1, [Gate::x(0), Gate::x(0), Gate::x(0)]).unwrap();
        assert_eq!(circuit_depth(&c), 3);
    }

    #[test]
    fn barriers_and_measures_have_no_depth() {
        let mut c = Circuit::with_clbits(2, 2).unwrap();
        c.extend([
            Gate::x(0),
            Gate::barrier(vec![0, 1]),
            Gate::x(1),
            Gate::measure(0, 0),
            Gate::measure(1, 1),
        ])
        .unwrap();
        // barrier orders x(1) after x(0)
        assert_eq!(circuit_depth(&c), 2);
    }

    #[test]
    fn cnot_on_both_qubits_adds_single_edge() {
        let c = Circuit::from_gates(2, [Gate::cx(0, 1), Gate::cx(0, 1)]).unwrap();
        assert_eq!(CircuitDag::build(&c).edge_count(), 1);
    }

    #[test]
    fn critical_nodes_of_two_chains() {
        // chain of 5 on q0, chain of 3 on q1
        let mut gates = vec![Gate::x(0); 5];
        gates.extend(vec![Gate::x(1); 3]);
        let c = Circuit::from_gates(2, gates).unwrap();
        let crit = CircuitDag::build(&c).critical_nodes();
        assert_eq!(crit, [vec![true; 5], vec![false; 3]].concat());
    }
}
