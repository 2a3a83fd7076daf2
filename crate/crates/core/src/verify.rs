//! Ownership check of a suspect circuit against the owner's secret.
//!
//! The owner keeps the original circuit, the signature, the device and the
//! pipeline configuration. Verification re-partitions the original, undoes
//! routing on the suspect and reads each stage back.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{parse_qasm, emit_qasm, Circuit, CircuitError, Gate, GateKind, QasmError};
use crate::device::DeviceModel;
use crate::linalg::{LinalgError, circuit_unitary, hs_distance, mat2_mul, u3_matrix, u3_params, Mat2, X_MATRIX};
use crate::mapper::MappingTree;
use crate::metrics::{account_constraints, MetricsError, Stage};
use crate::pipeline::{Pipeline, PipelineConfig, PipelineError};
use crate::route::extract_stage3;
use crate::signature::SignatureMessage;
use crate::synth::{leading_digit, EMBED_FLOOR};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("secret: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("secret: original circuit: {0}")]
    Qasm(#[from] QasmError),
    #[error("secret bundle: {0}")]
    Json(#[from] serde_json::Error),
    #[error("suspect has {got} qubits but the device has {available}")]
    NotOnDevice { got: usize, available: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// What the owner keeps.
#[derive(Debug, Clone)]
pub struct Secret {
    pub original: Circuit,
    pub signature: SignatureMessage,
    pub device: DeviceModel,
    pub config: PipelineConfig,
}

/// On-disk form of [`Secret`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecretBundle {
    pub original_qasm: String,
    pub signature: SignatureMessage,
    pub device: DeviceModel,
    pub config: PipelineConfig,
}

impl SecretBundle {
    pub fn new(secret: &Secret) -> Self {
        Self {
            original_qasm: emit_qasm(&secret.original),
            signature: secret.signature.clone(),
            device: secret.device.clone(),
            config: secret.config.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, VerifyError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn secret(&self) -> Result<Secret, VerifyError> {
        Ok(Secret {
            original: parse_qasm(&self.original_qasm)?,
            signature: self.signature.clone(),
            device: self.device.clone(),
            config: self.config.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Match,
    Partial,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail")]
pub enum VerifyFlag {
    /// Stage-1 blocks could not be recovered; the reason follows.
    StructureUnrecognized(String),
    /// No usable seam barriers; blocks were aligned by replayed gate counts.
    GateCountAlignment,
    /// The device has nontrivial automorphisms, so a relabeled copy may read
    /// as a different stage-2 leaf.
    AutomorphismAmbiguity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCheck {
    pub stage: Stage,
    pub expected: String,
    pub observed: String,
    pub matched: Vec<bool>,
    pub p: f64,
}

impl StageCheck {
    pub fn unsatisfied(&self) -> usize {
        self.matched.iter().filter(|&&m| !m).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub stages: Vec<StageCheck>,
    /// Per-block distances of the recovered stage-1 blocks.
    pub deltas: Vec<Option<f64>>,
    pub total: usize,
    pub unsatisfied: usize,
    pub ppa: f64,
    pub verdict: Verdict,
    pub flags: Vec<VerifyFlag>,
}

impl VerificationOutcome {
    pub fn stage(&self, stage: Stage) -> &StageCheck {
        self.stages.iter().find(|s| s.stage == stage).expect("all stages present")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }
}

fn verdict(total: usize, unsatisfied: usize) -> Verdict {
    if unsatisfied == 0 {
        Verdict::Match
    } else if unsatisfied < total {
        Verdict::Partial
    } else {
        Verdict::NoMatch
    }
}

/// Logical circuit behind a routed physical one: SWAPs are undone into the
/// layout, X·X on one logical qubit cancels, measures are dropped.
/// `assignment[i]` is the starting physical home of logical `i`.
fn deroute(suspect: &Circuit, assignment: &[usize]) -> Result<Circuit, CircuitError> {
    let n = assignment.len();
    let mut occupant: Vec<Option<usize>> = vec![None; suspect.num_qubits()];
    for (l, &p) in assignment.iter().enumerate() {
        occupant[p] = Some(l);
    }
    let mut out: Vec<Option<Gate>> = Vec::new();
    let mut chain: Vec<Vec<usize>> = vec![Vec::new(); n];
    for g in suspect.gates() {
        match g.kind {
            GateKind::Swap => {
                occupant.swap(g.qubits[0], g.qubits[1]);
                continue;
            }
            GateKind::Measure { .. } => continue,
            _ => {}
        }
        let Some(qs) = g.qubits.iter().map(|&q| occupant[q]).collect::<Option<Vec<usize>>>() else {
            continue;
        };
        if matches!(g.kind, GateKind::X) {
            let l = qs[0];
            if let Some(&prev) = chain[l].last() {
                if matches!(out[prev].as_ref().map(|g| g.kind), Some(GateKind::X)) {
                    out[prev] = None;
                    chain[l].pop();
                    continue;
                }
            }
        }
        let mut mapped = Gate::new(g.kind, qs.clone());
        mapped.tag = g.tag;
        for &l in &qs {
            chain[l].push(out.len());
        }
        out.push(Some(mapped));
    }
    Circuit::from_gates(n, out.into_iter().flatten())
}

fn is_full_seam(g: &Gate, n: usize) -> Option<usize> {
    match g.kind {
        GateKind::Barrier { seam: Some(k) } if g.qubits.len() == n => Some(k),
        _ => None,
    }
}

/// Splits at full-width seams; `None` unless exactly `blocks` segments in
/// order come out.
fn split_at_seams(c: &Circuit, blocks: usize) -> Option<Vec<Vec<Gate>>> {
    let n = c.num_qubits();
    let mut segments: Vec<Vec<Gate>> = vec![Vec::new()];
    for g in c.gates() {
        if let Some(k) = is_full_seam(g, n) {
            if k != segments.len() {
                return None;
            }
            segments.push(Vec::new());
        } else if !g.is_barrier() {
            segments.last_mut().unwrap().push(g.clone());
        }
    }
    (segments.len() == blocks).then_some(segments)
}

fn split_by_counts(c: &Circuit, counts: &[usize]) -> Option<Vec<Vec<Gate>>> {
    let gates: Vec<&Gate> = c.gates().iter().filter(|g| !g.is_barrier()).collect();
    if gates.len() != counts.iter().sum::<usize>() {
        return None;
    }
    let mut out = Vec::new();
    let mut at = 0;
    for &k in counts {
        out.push(gates[at..at + k].iter().map(|&g| g.clone()).collect());
        at += k;
    }
    Some(out)
}

pub fn verify(suspect: &Circuit, secret: &Secret) -> Result<VerificationOutcome, VerifyError> {
    let dev = &secret.device;
    if suspect.num_qubits() > dev.num_physical() {
        return Err(VerifyError::NotOnDevice {
            got: suspect.num_qubits(),
            available: dev.num_physical(),
        });
    }
    let sig = &secret.signature;
    let p = secret.config.coincidence;
    let n_logical = secret.original.num_qubits();
    let pipeline = Pipeline::new(&secret.original, dev, secret.config.clone())?;
    let tree = MappingTree::for_device(n_logical, dev).map_err(PipelineError::from)?;
    let mut flags = Vec::new();
    if !dev.automorphisms().is_empty() {
        flags.push(VerifyFlag::AutomorphismAmbiguity);
    }

    // stage 2
    let active = suspect.active_qubits();
    let observed_code = tree.code_of_set(&active).ok().map(str::to_string);
    let stage2 = StageCheck {
        stage: Stage::Stage2,
        expected: sig.stage2.clone(),
        observed: observed_code.clone().unwrap_or_default(),
        matched: match &observed_code {
            Some(code) if code.len() == sig.stage2.len() => {
                sig.stage2.chars().zip(code.chars()).map(|(a, b)| a == b).collect()
            }
            _ => vec![false; sig.stage2.len()],
        },
        p: p.stage2,
    };

    // stage 3
    let found = extract_stage3(suspect);
    let stage3 = StageCheck {
        stage: Stage::Stage3,
        expected: "e".repeat(sig.stage3_e),
        observed: "e".repeat(found),
        matched: (0..sig.stage3_e).map(|i| i < found).collect(),
        p: p.stage3,
    };

    // stage 1
    let partition = pipeline.partition();
    let symbols = sig.stage1_symbols();
    let mut deltas = vec![None; partition.len()];
    let mut observed1 = vec!['?'; partition.len()];
    if !symbols.is_empty() {
        let assignment = match observed_code.as_deref() {
            Some(code) => Some(tree.lookup(code).map_err(PipelineError::from)?.assignment.clone()),
            None if active.len() == n_logical => Some(active.clone()),
            None => None,
        };
        let segments = match assignment {
            None => {
                flags.push(VerifyFlag::StructureUnrecognized(format!(
                    "suspect touches {} qubits, expected {n_logical}",
                    active.len()
                )));
                None
            }
            Some(assignment) => {
                let logical = deroute(suspect, &assignment)?;
                match split_at_seams(&logical, partition.len()) {
                    Some(s) => Some(s),
                    None => {
                        flags.push(VerifyFlag::GateCountAlignment);
                        let replay = pipeline.prepare(&SignatureMessage {
                            stage3_e: 0,
                            ..sig.clone()
                        })?;
                        let counts: Vec<usize> = replay.blocks.iter().map(|b| b.circuit.len()).collect();
                        let s = split_by_counts(&logical, &counts);
                        if s.is_none() {
                            flags.push(VerifyFlag::StructureUnrecognized(
                                "gate counts do not align with the replayed blocks".into(),
                            ));
                        }
                        s
                    }
                }
            }
        };
        if let Some(segments) = segments {
            for (i, (block, seg)) in partition.blocks.iter().zip(segments).enumerate() {
                let local: Option<Vec<Gate>> = seg
                    .iter()
                    .map(|g| {
                        let qs = g.qubits.iter().map(|&q| block.local_index(q)).collect::<Option<Vec<_>>>()?;
                        Some(g.remapped(|q| qs[g.qubits.iter().position(|&x| x == q).unwrap()]))
                    })
                    .collect();
                let Some(local) = local else {
                    flags.push(VerifyFlag::StructureUnrecognized(format!(
                        "segment {i} leaves the qubits of block {i}"
                    )));
                    continue;
                };
                let c = Circuit::from_gates(block.qubits.len(), local)?;
                let u_t = block.target_unitary().map_err(PipelineError::from)?;
                let delta = hs_distance(&circuit_unitary(&c)?, &u_t)?;
                deltas[i] = Some(delta);
                if (EMBED_FLOOR..secret.config.synthesis.epsilon).contains(&delta) {
                    if let Some(d) = leading_digit(delta) {
                        observed1[i] = crate::signature::Stage1Symbol::from_digit(d).as_char();
                    }
                }
            }
        }
    }
    let stage1 = StageCheck {
        stage: Stage::Stage1,
        expected: sig.stage1.clone(),
        observed: if symbols.is_empty() {
            String::new()
        } else {
            observed1.iter().collect()
        },
        matched: symbols
            .iter()
            .zip(&observed1)
            .map(|(s, &o)| s.as_char() == o)
            .collect(),
        p: p.stage1,
    };

    let stages = vec![stage1, stage2, stage3];
    let unsatisfied = [stages[0].unsatisfied(), stages[1].unsatisfied(), stages[2].unsatisfied()];
    let account = account_constraints(sig, unsatisfied, p);
    let total = account.total();
    let b = account.unsatisfied();
    Ok(VerificationOutcome {
        stages,
        deltas,
        total,
        unsatisfied: b,
        ppa: account.ppa()?,
        verdict: verdict(total, b),
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Perturbation {
    StripBarriers,
    /// Relabels qubits by the first nontrivial device automorphism.
    RelabelQubits,
    /// Fuses each run of adjacent single-qubit gates into one U3.
    MergeSingleQubitRuns,
}

fn gate_matrix(g: &Gate) -> Option<Mat2> {
    match g.kind {
        GateKind::U3 { theta, phi, lambda } => Some(u3_matrix(theta, phi, lambda)),
        GateKind::X => Some(X_MATRIX),
        _ => None,
    }
}

pub fn merge_single_qubit_runs(c: &Circuit) -> Circuit {
    let mut out = Circuit::with_clbits(c.num_qubits(), c.num_clbits()).expect("same register");
    out.name = c.name.clone();
    let mut pending: Vec<Option<Mat2>> = vec![None; c.num_qubits()];
    let flush = |q: usize, pending: &mut Vec<Option<Mat2>>, out: &mut Circuit| {
        if let Some(m) = pending[q].take() {
            let (t, p, l) = u3_params(&m);
            out.push(Gate::u3(q, t, p, l)).expect("qubit in range");
        }
    };
    for g in c.gates() {
        if let Some(m) = gate_matrix(g) {
            let q = g.qubits[0];
            pending[q] = Some(match pending[q] {
                Some(acc) => mat2_mul(&m, &acc),
                None => m,
            });
            continue;
        }
        for &q in &g.qubits {
            flush(q, &mut pending, &mut out);
        }
        out.push(g.clone()).expect("qubit in range");
    }
    for q in 0..c.num_qubits() {
        flush(q, &mut pending, &mut out);
    }
    out
}

/// Applies `perturbation` to the suspect, then [`verify`].
pub fn robustness_probe(
    suspect: &Circuit,
    secret: &Secret,
    perturbation: Perturbation,
) -> Result<VerificationOutcome, VerifyError> {
    let perturbed = match perturbation {
        Perturbation::StripBarriers => suspect.filtered(|g| !g.is_barrier()),
        Perturbation::MergeSingleQubitRuns => merge_single_qubit_runs(suspect),
        Perturbation::RelabelQubits => match secret.device.automorphisms().first() {
            Some(sigma) => suspect.relabeled(suspect.num_qubits(), sigma)?,
            None => suspect.clone(),
        },
    };
    verify(&perturbed, secret)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateTag;

    #[test]
    fn verdicts() {
        assert_eq!(verdict(0, 0), Verdict::Match);
        assert_eq!(verdict(5, 0), Verdict::Match);
        assert_eq!(verdict(5, 2), Verdict::Partial);
        assert_eq!(verdict(5, 5), Verdict::NoMatch);
    }

    #[test]
    fn deroute_cancels_pairs() {
        let c = Circuit::from_gates(
            3,
            [
                Gate::cx(1, 2),
                Gate::x(1).with_tag(GateTag::WatermarkX),
                Gate::swap(1, 2),
                Gate::x(2).with_tag(GateTag::WatermarkX),
                Gate::cx(2, 0),
            ],
        )
        .unwrap();
        let l = deroute(&c, &[0, 1, 2]).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.gates()[1].qubits, vec![1, 0]);
    }

    #[test]
    fn merge_keeps_unitary() {
        let c = Circuit::from_gates(
            2,
            [
                Gate::u3(0, 0.3, 0.1, -0.4),
                Gate::x(0),
                Gate::cx(0, 1),
                Gate::u3(1, 1.1, 0.2, 0.3),
                Gate::u3(1, -0.7, 0.5, 2.0),
            ],
        )
        .unwrap();
        let m = merge_single_qubit_runs(&c);
        assert_eq!(m.len(), 3);
        let d = hs_distance(&circuit_unitary(&c).unwrap(), &circuit_unitary(&m).unwrap()).unwrap();
        assert!(d < 1e-12);
    }
}
