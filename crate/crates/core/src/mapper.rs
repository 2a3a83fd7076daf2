//! Placement enumeration, infidelity ranking and binary-tree codes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::device::DeviceModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("{n_logical} logical qubits do not fit on {num_physical} physical qubits")]
    TooManyLogical {
        n_logical: usize,
        num_physical: usize,
    },
    #[error(
        "signature stage2 code `{code}` has no leaf: device offers {leaves} mappings, \
         codes are {depth} symbols over c/d"
    )]
    UnknownCode {
        code: String,
        leaves: usize,
        depth: usize,
    },
    #[error("physical qubit set {0:?} is not a ranked mapping")]
    MappingNotFound(Vec<usize>),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mapping {
    /// Entry `i` is the physical qubit of logical qubit `i`.
    pub assignment: Vec<usize>,
    pub infidelity_overhead: f64,
    /// 1-based position after sorting.
    pub rank: usize,
}

impl Mapping {
    /// The physical qubit set, ascending.
    pub fn physical_set(&self) -> Vec<usize> {
        let mut s = self.assignment.clone();
        s.sort_unstable();
        s
    }
}

/// All connected induced subgraphs on `k` vertices, each as a sorted vertex
/// list, via the ESU algorithm.
pub fn connected_subsets(dev: &DeviceModel, k: usize) -> Vec<Vec<usize>> {
    let n = dev.num_physical();
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    for v in 0..n {
        let ext: Vec<usize> = dev.neighbors(v).iter().copied().filter(|&u| u > v).collect();
        esu_extend(dev, k, v, &mut vec![v], ext, &mut out);
    }
    for s in &mut out {
        s.sort_unstable();
    }
    out.sort();
    out
}

fn esu_extend(
    dev: &DeviceModel,
    k: usize,
    root: usize,
    sub: &mut Vec<usize>,
    mut ext: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if sub.len() == k {
        out.push(sub.clone());
        return;
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in dev.neighbors(w) {
            let exclusive = u > root
                && !sub.contains(&u)
                && u != w
                && !sub.iter().any(|&s| dev.are_coupled(s, u));
            if exclusive && !next.contains(&u) {
                next.push(u);
            }
        }
        sub.push(w);
        esu_extend(dev, k, root, sub, next, out);
        sub.pop();
    }
}

/// Product of the 2-qubit infidelities of every device edge inside `set`.
pub fn infidelity_overhead(dev: &DeviceModel, set: &[usize]) -> f64 {
    dev.edges()
        .iter()
        .filter(|e| set.contains(&e.qubits[0]) && set.contains(&e.qubits[1]))
        .map(|e| e.infidelity_2q)
        .product()
}

/// One mapping per connected `n_logical`-subset, sorted by overhead then by
/// vertex list. Logical qubit `i` goes to the `i`-th smallest physical qubit.
pub fn enumerate_mappings(n_logical: usize, dev: &DeviceModel) -> Vec<Mapping> {
    let mut ranked: Vec<(f64, Vec<usize>)> = connected_subsets(dev, n_logical)
        .into_iter()
        .map(|s| (infidelity_overhead(dev, &s), s))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    ranked
        .into_iter()
        .enumerate()
        .map(|(i, (overhead, set))| Mapping {
            assignment: set,
            infidelity_overhead: overhead,
            rank: i + 1,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingTree {
    pub depth: usize,
    pub leaves: Vec<Mapping>,
    pub codes: Vec<String>,
}

/// `ceil(log2 n)`, with `tree_depth(1) == 0`.
pub fn tree_depth(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Code of leaf `i` (0-based): `i` in binary over `depth` bits, `0 -> c`,
/// `1 -> d`.
pub fn leaf_code(i: usize, depth: usize) -> String {
    (0..depth)
        .rev()
        .map(|bit| if (i >> bit) & 1 == 0 { 'c' } else { 'd' })
        .collect()
}

pub fn build_tree(mappings: Vec<Mapping>) -> MappingTree {
    let depth = tree_depth(mappings.len());
    let codes = (0..mappings.len()).map(|i| leaf_code(i, depth)).collect();
    MappingTree {
        depth,
        leaves: mappings,
        codes,
    }
}

impl MappingTree {
    pub fn for_device(n_logical: usize, dev: &DeviceModel) -> Result<Self, MappingError> {
        if n_logical > dev.num_physical() {
            return Err(MappingError::TooManyLogical {
                n_logical,
                num_physical: dev.num_physical(),
            });
        }
        Ok(build_tree(enumerate_mappings(n_logical, dev)))
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Leaf for `code`. The empty code selects the lowest-overhead mapping.
    pub fn lookup(&self, code: &str) -> Result<&Mapping, MappingError> {
        if code.is_empty() {
            if let Some(m) = self.leaves.first() {
                return Ok(m);
            }
        }
        self.codes
            .iter()
            .position(|c| c == code)
            .map(|i| &self.leaves[i])
            .ok_or_else(|| MappingError::UnknownCode {
                code: code.to_string(),
                leaves: self.leaves.len(),
                depth: self.depth,
            })
    }

    pub fn code_of_set(&self, set: &[usize]) -> Result<&str, MappingError> {
        let mut s = set.to_vec();
        s.sort_unstable();
        self.leaves
            .iter()
            .position(|m| m.physical_set() == s)
            .map(|i| self.codes[i].as_str())
            .ok_or(MappingError::MappingNotFound(s))
    }
}

/// Selects the leaf for `code` and places `c` onto the device's physical
/// register (unrouted).
pub fn embed_stage2(
    c: &Circuit,
    dev: &DeviceModel,
    code: &str,
) -> Result<(Mapping, Circuit), MappingError> {
    let tree = MappingTree::for_device(c.num_qubits(), dev)?;
    let m = tree.lookup(code)?.clone();
    let placed = c.relabeled(dev.num_physical(), &m.assignment)?;
    Ok((m, placed))
}

/// Code of the leaf whose physical set equals the qubits `placed` touches.
pub fn extract_stage2(
    placed: &Circuit,
    dev: &DeviceModel,
    n_logical: usize,
) -> Result<String, MappingError> {
    let tree = MappingTree::for_device(n_logical, dev)?;
    tree.code_of_set(&placed.active_qubits()).map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::device::{fakelagos_preset, line_device};

    #[test]
    fn fakelagos_four_qubit_mappings() {
        let d = fakelagos_preset();
        let ms = enumerate_mappings(4, &d);
        assert_eq!(ms.len(), 6);
        assert_eq!(ms[1].assignment, vec![1, 3, 5, 6]);
        for w in ms.windows(2) {
            assert!(w[0].infidelity_overhead < w[1].infidelity_overhead);
        }
        assert_eq!(enumerate_mappings(2, &d).len(), 6);
        assert_eq!(enumerate_mappings(7, &d).len(), 1);
        assert_eq!(enumerate_mappings(3, &d).len(), 7);
    }

    #[test]
    fn tree_codes() {
        let tree = MappingTree::for_device(4, &fakelagos_preset()).unwrap();
        assert_eq!(tree.codes, ["ccc", "ccd", "cdc", "cdd", "dcc", "dcd"]);
        assert_eq!(tree_depth(1), 0);
        assert_eq!(leaf_code(0, 0), "");
        assert_eq!(tree_depth(8), 3);
        assert_eq!(tree_depth(9), 4);
    }

    #[test]
    fn embed_and_extract() {
        let d = fakelagos_preset();
        let c = Circuit::from_gates(4, [Gate::cx(0, 1), Gate::cx(2, 3), Gate::x(1)]).unwrap();
        let (m, placed) = embed_stage2(&c, &d, "ccd").unwrap();
        assert_eq!(m.rank, 2);
        assert_eq!(placed.active_qubits(), vec![1, 3, 5, 6]);
        assert_eq!(extract_stage2(&placed, &d, 4).unwrap(), "ccd");
        assert!(matches!(
            embed_stage2(&c, &d, "ddd"),
            Err(MappingError::UnknownCode { leaves: 6, .. })
        ));
        let (m1, _) = embed_stage2(&c, &d, "").unwrap();
        assert_eq!(m1.rank, 1);
    }

    #[test]
    fn disconnected_set_is_not_found() {
        let d = fakelagos_preset();
        let c = Circuit::from_gates(7, [Gate::x(0), Gate::x(2), Gate::x(4), Gate::x(6)]).unwrap();
        assert!(matches!(
            extract_stage2(&c, &d, 4),
            Err(MappingError::MappingNotFound(_))
        ));
    }

    #[test]
    fn line_subsets() {
        let d = line_device(5, 0.01).unwrap();
        assert_eq!(connected_subsets(&d, 3), vec![vec![0, 1, 2], vec![1, 2, 3], vec![2, 3, 4]]);
    }
}
