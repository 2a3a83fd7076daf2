//! Circuit intermediate representation.
//!
//! A [`Circuit`] is an ordered list of [`Gate`]s over `num_qubits` qubits. The
//! gate order is always a valid topological order of the dependency DAG, so
//! every pass in the pipeline can treat the list as the program.

mod dag;
mod qasm;

pub use dag::{circuit_depth, CircuitDag};
pub use qasm::{emit_qasm, parse_qasm, QasmError};

use std::f64::consts::TAU;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("duplicate qubit {0} in gate")]
    DuplicateQubit(usize),
    #[error("gate `{kind}` expects {expected} qubits, got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite U3 angle")]
    NonFiniteAngle,
    #[error("classical bit {clbit} out of range ({num_clbits} declared)")]
    ClbitOutOfRange { clbit: usize, num_clbits: usize },
    #[error("a circuit needs at least one qubit")]
    NoQubits,
}

/// Gate operation without its operands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    U3 { theta: f64, phi: f64, lambda: f64 },
    X,
    Cnot,
    Swap,
    /// Ordering-only node. `seam` carries the partition block index that
    /// starts right after this barrier.
    Barrier { seam: Option<usize> },
    Measure { clbit: usize },
}

/// Which pass produced a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GateTag {
    #[default]
    Original,
    WatermarkX,
    RoutingSwap,
}

/// Counting categories for [`Circuit::count_gates`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountKind {
    U3,
    X,
    Cnot,
    Swap,
    Barrier,
    Measure,
    /// CNOT + SWAP gates, SWAP counted once.
    TwoQubit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub tag: GateTag,
}

impl Gate {
    pub fn u3(qubit: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Self::new(GateKind::U3 { theta, phi, lambda }, vec![qubit])
    }

    pub fn x(qubit: usize) -> Self {
        Self::new(GateKind::X, vec![qubit])
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self::new(GateKind::Cnot, vec![control, target])
    }

    pub fn swap(a: usize, b: usize) -> Self {
        Self::new(GateKind::Swap, vec![a, b])
    }

    pub fn barrier(qubits: Vec<usize>) -> Self {
        Self::new(GateKind::Barrier { seam: None }, qubits)
    }

    pub fn seam(qubits: Vec<usize>, block: usize) -> Self {
        Self::new(GateKind::Barrier { seam: Some(block) }, qubits)
    }

    pub fn measure(qubit: usize, clbit: usize) -> Self {
        Self::new(GateKind::Measure { clbit }, vec![qubit])
    }

    pub fn new(kind: GateKind, qubits: Vec<usize>) -> Self {
        Self {
            kind,
            qubits,
            tag: GateTag::Original,
        }
    }

    pub fn with_tag(mut self, tag: GateTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            GateKind::U3 { .. } => "u3",
            GateKind::X => "x",
            GateKind::Cnot => "cx",
            GateKind::Swap => "swap",
            GateKind::Barrier { .. } => "barrier",
            GateKind::Measure { .. } => "measure",
        }
    }

    pub fn is_barrier(&self) -> bool {
        matches!(self.kind, GateKind::Barrier { .. })
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self.kind, GateKind::Cnot | GateKind::Swap)
    }

    /// Unit-duration gates contribute to depth; barriers and measures do not.
    pub fn has_duration(&self) -> bool {
        !matches!(
            self.kind,
            GateKind::Barrier { .. } | GateKind::Measure { .. }
        )
    }

    /// Same gate with every qubit passed through `f`.
    pub fn remapped(&self, f: impl Fn(usize) -> usize) -> Self {
        Self {
            kind: self.kind,
            qubits: self.qubits.iter().map(|&q| f(q)).collect(),
            tag: self.tag,
        }
    }

    fn validate(&self, num_qubits: usize, num_clbits: usize) -> Result<(), CircuitError> {
        let expected = match self.kind {
            GateKind::U3 { .. } | GateKind::X | GateKind::Measure { .. } => Some(1),
            GateKind::Cnot | GateKind::Swap => Some(2),
            GateKind::Barrier { .. } => None,
        };
        if let Some(expected) = expected {
            if self.qubits.len() != expected {
                return Err(CircuitError::Arity {
                    kind: self.name(),
                    expected,
                    got: self.qubits.len(),
                });
            }
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    qubit: q,
                    num_qubits,
                });
            }
            if self.qubits[..i].contains(&q) {
                return Err(CircuitError::DuplicateQubit(q));
            }
        }
        match self.kind {
            GateKind::U3 { theta, phi, lambda } => {
                if !(theta.is_finite() && phi.is_finite() && lambda.is_finite()) {
                    return Err(CircuitError::NonFiniteAngle);
                }
            }
            GateKind::Measure { clbit } if clbit >= num_clbits => {
                return Err(CircuitError::ClbitOutOfRange { clbit, num_clbits });
            }
            _ => {}
        }
        Ok(())
    }
}

/// Reduce an angle into `[0, 2π)`.
pub fn canonical_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub name: String,
    num_qubits: usize,
    num_clbits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self, CircuitError> {
        Self::with_clbits(num_qubits, 0)
    }

    pub fn with_clbits(num_qubits: usize, num_clbits: usize) -> Result<Self, CircuitError> {
        if num_qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        Ok(Self {
            name: String::new(),
            num_qubits,
            num_clbits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(
        num_qubits: usize,
        gates: impl IntoIterator<Item = Gate>,
    ) -> Result<Self, CircuitError> {
        let mut c = Self::new(num_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_clbits(&self) -> usize {
        self.num_clbits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends a gate. U3 angles are reduced into `[0, 2π)`.
    pub fn push(&mut self, mut gate: Gate) -> Result<(), CircuitError> {
        gate.validate(self.num_qubits, self.num_clbits)?;
        if let GateKind::U3 { theta, phi, lambda } = gate.kind {
            gate.kind = GateKind::U3 {
                theta: canonical_angle(theta),
                phi: canonical_angle(phi),
                lambda: canonical_angle(lambda),
            };
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<(), CircuitError> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Inserts a gate at `index`. The caller keeps the topological-order
    /// invariant.
    pub fn insert(&mut self, index: usize, gate: Gate) -> Result<(), CircuitError> {
        gate.validate(self.num_qubits, self.num_clbits)?;
        self.gates.insert(index, gate);
        Ok(())
    }

    pub fn set_num_clbits(&mut self, n: usize) {
        self.num_clbits = self.num_clbits.max(n);
    }

    /// Copy with gates filtered by `keep`.
    pub fn filtered(&self, keep: impl Fn(&Gate) -> bool) -> Self {
        Self {
            name: self.name.clone(),
            num_qubits: self.num_qubits,
            num_clbits: self.num_clbits,
            gates: self.gates.iter().filter(|g| keep(g)).cloned().collect(),
        }
    }

    /// Relabels every qubit through `map` onto a `num_qubits`-wide register.
    pub fn relabeled(&self, num_qubits: usize, map: &[usize]) -> Result<Self, CircuitError> {
        let mut out = Self::with_clbits(num_qubits, self.num_clbits)?;
        out.name = self.name.clone();
        for g in &self.gates {
            out.push(g.remapped(|q| map[q]))?;
        }
        Ok(out)
    }

    pub fn count_gates(&self, kind: CountKind) -> usize {
        self.gates
            .iter()
            .filter(|g| match kind {
                CountKind::U3 => matches!(g.kind, GateKind::U3 { .. }),
                CountKind::X => matches!(g.kind, GateKind::X),
                CountKind::Cnot => matches!(g.kind, GateKind::Cnot),
                CountKind::Swap => matches!(g.kind, GateKind::Swap),
                CountKind::Barrier => g.is_barrier(),
                CountKind::Measure => matches!(g.kind, GateKind::Measure { .. }),
                CountKind::TwoQubit => g.is_two_qubit(),
            })
            .count()
    }

    /// CNOT count, optionally charging every SWAP as three CNOTs.
    pub fn cnot_count(&self, decompose_swaps: bool) -> usize {
        let cx = self.count_gates(CountKind::Cnot);
        if decompose_swaps {
            cx + 3 * self.count_gates(CountKind::Swap)
        } else {
            cx
        }
    }

    pub fn depth(&self) -> usize {
        circuit_depth(self)
    }

    /// Qubits touched by any gate, barriers included, ascending.
    pub fn active_qubits(&self) -> Vec<usize> {
        let mut used = vec![false; self.num_qubits];
        for g in &self.gates {
            for &q in &g.qubits {
                used[q] = true;
            }
        }
        (0..self.num_qubits).filter(|&q| used[q]).collect()
    }

    /// Concatenation of two circuits over the same register.
    pub fn concat(&self, other: &Circuit) -> Result<Self, CircuitError> {
        let mut out = self.clone();
        out.num_clbits = out.num_clbits.max(other.num_clbits);
        out.extend(other.gates.iter().cloned())?;
        Ok(out)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_qasm(self))
    }
}
