//! Greedy scan partitioning into contiguous blocks of at most `block_size`
//! qubits, and reassembly of synthesized blocks.

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, GateKind};
use crate::linalg::{circuit_unitary, LinalgError, UnitaryMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("gate {index} touches {width} qubits, more than the block size {block_size}")]
    GateTooWide {
        index: usize,
        width: usize,
        block_size: usize,
    },
    #[error("block size must be 2 or 3, got {0}")]
    BadBlockSize(usize),
    #[error("measure at gate {0} cannot be placed in a block")]
    MeasureInBlock(usize),
    #[error("expected {expected} synthesized blocks, got {got}")]
    BlockCountMismatch { expected: usize, got: usize },
    #[error("block {block} has {expected} qubits but its synthesis has {got}")]
    BlockArityMismatch {
        block: usize,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubCircuit {
    /// 0-based position in the partition.
    pub index: usize,
    /// Sorted logical qubits of the block.
    pub qubits: Vec<usize>,
    /// Gates over the source circuit's qubit labels.
    pub gates: Vec<Gate>,
}

impl SubCircuit {
    /// The block as a circuit over local qubits `0..qubits.len()`.
    pub fn local_circuit(&self) -> Result<Circuit, CircuitError> {
        let mut c = Circuit::new(self.qubits.len())?;
        for g in &self.gates {
            c.push(g.remapped(|q| self.local_index(q).expect("qubit outside block")))?;
        }
        Ok(c)
    }

    pub fn local_index(&self, q: usize) -> Option<usize> {
        self.qubits.binary_search(&q).ok()
    }

    /// Target unitary `U_{T_i}` of the block.
    pub fn target_unitary(&self) -> Result<UnitaryMatrix, PartitionError> {
        Ok(circuit_unitary(&self.local_circuit()?)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub num_qubits: usize,
    pub blocks: Vec<SubCircuit>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Concatenated block gates, which is the source gate list minus barriers.
    pub fn flattened(&self) -> Circuit {
        let mut c = Circuit::new(self.num_qubits).expect("partition has qubits");
        for b in &self.blocks {
            c.extend(b.gates.iter().cloned()).expect("gates validated");
        }
        c
    }
}

/// Left-to-right scan: a gate joins the current block while the union of
/// touched qubits stays within `block_size`, otherwise it opens a new block.
/// Source barriers are dropped; measures are rejected.
pub fn scan_partition(c: &Circuit, block_size: usize) -> Result<Partition, PartitionError> {
    if !(2..=3).contains(&block_size) {
        return Err(PartitionError::BadBlockSize(block_size));
    }
    let mut blocks: Vec<SubCircuit> = Vec::new();
    let mut current: Option<SubCircuit> = None;
    for (i, g) in c.gates().iter().enumerate() {
        match g.kind {
            GateKind::Barrier { .. } => continue,
            GateKind::Measure { .. } => return Err(PartitionError::MeasureInBlock(i)),
            _ => {}
        }
        if g.qubits.len() > block_size {
            return Err(PartitionError::GateTooWide {
                index: i,
                width: g.qubits.len(),
                block_size,
            });
        }
        if let Some(block) = current.as_mut() {
            let extra = g
                .qubits
                .iter()
                .filter(|q| !block.qubits.contains(q))
                .count();
            if block.qubits.len() + extra <= block_size {
                for &q in &g.qubits {
                    if !block.qubits.contains(&q) {
                        block.qubits.push(q);
                    }
                }
                block.qubits.sort_unstable();
                block.gates.push(g.clone());
                continue;
            }
            blocks.push(current.take().unwrap());
        }
        let mut qubits = g.qubits.clone();
        qubits.sort_unstable();
        current = Some(SubCircuit {
            index: blocks.len(),
            qubits,
            gates: vec![g.clone()],
        });
    }
    blocks.extend(current);
    Ok(Partition {
        num_qubits: c.num_qubits(),
        blocks,
    })
}

/// Concatenates synthesized blocks in order, relabeling local qubits back to
/// each block's logical qubits. A seam barrier over all qubits, carrying the
/// index of the block it opens, separates consecutive blocks.
pub fn assemble(p: &Partition, synthesized: &[Circuit]) -> Result<Circuit, PartitionError> {
    if synthesized.len() != p.blocks.len() {
        return Err(PartitionError::BlockCountMismatch {
            expected: p.blocks.len(),
            got: synthesized.len(),
        });
    }
    let mut out = Circuit::new(p.num_qubits)?;
    let all: Vec<usize> = (0..p.num_qubits).collect();
    for (block, synth) in p.blocks.iter().zip(synthesized) {
        if synth.num_qubits() != block.qubits.len() {
            return Err(PartitionError::BlockArityMismatch {
                block: block.index,
                expected: block.qubits.len(),
                got: synth.num_qubits(),
            });
        }
        if block.index > 0 {
            out.push(Gate::seam(all.clone(), block.index))?;
        }
        for g in synth.gates() {
            out.push(g.remapped(|q| block.qubits[q]))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hs_distance;

    fn fig2_like() -> Circuit {
        Circuit::from_gates(
            4,
            [
                Gate::cx(0, 1),
                Gate::cx(1, 2),
                Gate::x(0),
                Gate::cx(2, 3),
                Gate::cx(1, 3),
                Gate::x(2),
                Gate::cx(0, 1),
                Gate::cx(0, 2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn small_circuit_is_one_block() {
        let c = Circuit::from_gates(2, [Gate::cx(0, 1), Gate::x(1), Gate::cx(1, 0)]).unwrap();
        let p = scan_partition(&c, 3).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.blocks[0].qubits, vec![0, 1]);
    }

    #[test]
    fn four_qubit_circuit_splits_into_three_blocks() {
        let p = scan_partition(&fig2_like(), 3).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.blocks[0].qubits, vec![0, 1, 2]);
        assert_eq!(p.blocks[1].qubits, vec![1, 2, 3]);
        assert_eq!(p.blocks[2].qubits, vec![0, 1, 2]);
        assert!(p.blocks.iter().all(|b| b.qubits.len() <= 3));
    }

    #[test]
    fn errors() {
        let c = Circuit::from_gates(3, [Gate::cx(0, 1)]).unwrap();
        assert_eq!(scan_partition(&c, 4), Err(PartitionError::BadBlockSize(4)));
        let p = scan_partition(&c, 2).unwrap();
        assert_eq!(
            assemble(&p, &[]),
            Err(PartitionError::BlockCountMismatch {
                expected: 1,
                got: 0
            })
        );
        let wrong = Circuit::new(3).unwrap();
        assert!(matches!(
            assemble(&p, &[wrong]),
            Err(PartitionError::BlockArityMismatch { .. })
        ));
    }

    #[test]
    fn identity_synthesis_reproduces_circuit() {
        let c = fig2_like();
        let p = scan_partition(&c, 3).unwrap();
        let locals: Vec<Circuit> = p.blocks.iter().map(|b| b.local_circuit().unwrap()).collect();
        let out = assemble(&p, &locals).unwrap();
        let stripped = out.filtered(|g| !g.is_barrier());
        assert_eq!(stripped.gates(), c.gates());
        assert_eq!(out.count_gates(crate::circuit::CountKind::Barrier), 2);
        let d = hs_distance(&circuit_unitary(&out).unwrap(), &circuit_unitary(&c).unwrap()).unwrap();
        assert!(d < 1e-10);
    }

    #[test]
    fn single_block_assemble_is_relabel() {
        let c = Circuit::from_gates(4, [Gate::cx(3, 1), Gate::x(3)]).unwrap();
        let p = scan_partition(&c, 3).unwrap();
        assert_eq!(p.blocks[0].qubits, vec![1, 3]);
        let local = p.blocks[0].local_circuit().unwrap();
        assert_eq!(local.gates(), &[Gate::cx(1, 0), Gate::x(1)]);
        assert_eq!(assemble(&p, &[local]).unwrap().gates(), c.gates());
    }
}
