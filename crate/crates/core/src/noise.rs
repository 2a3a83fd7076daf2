//! Statevector simulation with Pauli-trajectory depolarizing noise.
//!
//! Every shot draws from its own `ChaCha8Rng` seeded with the run seed and
//! using the shot index as stream, so results do not depend on how shots
//! are batched across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::device::DeviceModel;
use crate::linalg::{apply_gate, kernels, LinalgError, C64, MAX_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("no basis state has probability ≥ 1 − 1e-6 (best {0:.6})")]
    NondeterministicOutput(f64),
    #[error("{0} qubits exceeds the simulator limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("gate {0} follows a measurement on the same qubit")]
    MidCircuitMeasure(usize),
    #[error("2-qubit gate {index} on ({a}, {b}) is not on a device edge")]
    NotOnDevice { index: usize, a: usize, b: usize },
    #[error("circuit has {got} qubits but the noise model covers {covered}")]
    WidthMismatch { got: usize, covered: usize },
    #[error("expected output `{0}` does not match the circuit's classical register")]
    BadExpected(String),
    #[error("shots must be ≥ 1")]
    NoShots,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// `two_qubit[a][b]`: depolarizing probability of a 2-qubit gate on
    /// `(a, b)`; `None` off the coupling graph.
    pub two_qubit: Vec<Vec<Option<f64>>>,
    pub one_qubit: f64,
    pub readout_flip: Vec<f64>,
    pub shots: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub const DEFAULT_SHOTS: usize = 10_000;

    /// Probabilities taken from the device calibration.
    pub fn from_device(dev: &DeviceModel, shots: usize, seed: u64) -> Self {
        let n = dev.num_physical();
        let mut two_qubit = vec![vec![None; n]; n];
        for e in dev.edges() {
            let [a, b] = e.qubits;
            two_qubit[a][b] = Some(e.infidelity_2q);
            two_qubit[b][a] = Some(e.infidelity_2q);
        }
        Self {
            two_qubit,
            one_qubit: dev.infidelity_1q(),
            readout_flip: (0..n).map(|q| dev.readout_error(q)).collect(),
            shots,
            seed,
        }
    }

    /// All-to-all coupling with zero error.
    pub fn noiseless(num_qubits: usize, shots: usize, seed: u64) -> Self {
        Self {
            two_qubit: vec![vec![Some(0.0); num_qubits]; num_qubits],
            one_qubit: 0.0,
            readout_flip: vec![0.0; num_qubits],
            shots,
            seed,
        }
    }
}

/// Unitary part and measured `(qubit, clbit)` pairs. Without measures every
/// qubit is read into the clbit of the same index.
struct Program {
    num_qubits: usize,
    gates: Vec<Gate>,
    reads: Vec<(usize, usize)>,
    width: usize,
}

fn compile(c: &Circuit) -> Result<Program, NoiseError> {
    if c.num_qubits() > MAX_QUBITS {
        return Err(NoiseError::TooManyQubits(c.num_qubits()));
    }
    let mut measured = vec![false; c.num_qubits()];
    let mut gates = Vec::new();
    let mut reads = Vec::new();
    for (i, g) in c.gates().iter().enumerate() {
        match g.kind {
            GateKind::Measure { clbit } => {
                measured[g.qubits[0]] = true;
                reads.push((g.qubits[0], clbit));
            }
            GateKind::Barrier { .. } => {}
            _ => {
                if g.qubits.iter().any(|&q| measured[q]) {
                    return Err(NoiseError::MidCircuitMeasure(i));
                }
                gates.push(g.clone());
            }
        }
    }
    let width = if reads.is_empty() {
        reads = (0..c.num_qubits()).map(|q| (q, q)).collect();
        c.num_qubits()
    } else {
        c.num_clbits()
    };
    Ok(Program {
        num_qubits: c.num_qubits(),
        gates,
        reads,
        width,
    })
}

impl Program {
    fn outcome(&self, basis: usize) -> u64 {
        let mut bits = 0u64;
        for &(q, cl) in &self.reads {
            if basis >> q & 1 == 1 {
                bits |= 1 << cl;
            } else {
                bits &= !(1 << cl);
            }
        }
        bits
    }

    fn format(&self, bits: u64) -> String {
        (0..self.width)
            .rev()
            .map(|i| if bits >> i & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    fn parse(&self, s: &str) -> Option<u64> {
        if s.len() != self.width {
            return None;
        }
        let mut bits = 0u64;
        for (i, ch) in s.chars().rev().enumerate() {
            match ch {
                '1' => bits |= 1 << i,
                '0' => {}
                _ => return None,
            }
        }
        Some(bits)
    }

    fn zero_state(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); 1 << self.num_qubits];
        v[0] = C64::new(1.0, 0.0);
        v
    }
}

/// Final statevector of the noiseless circuit from `|0…0⟩`.
pub fn ideal_state(c: &Circuit) -> Result<Vec<C64>, NoiseError> {
    let prog = compile(c)?;
    let mut v = prog.zero_state();
    for g in &prog.gates {
        apply_gate(&mut v, g)?;
    }
    Ok(v)
}

/// The classical bitstring (highest clbit first) the noiseless circuit
/// produces from `|0…0⟩`.
pub fn ideal_output(c: &Circuit) -> Result<String, NoiseError> {
    let prog = compile(c)?;
    let v = ideal_state(c)?;
    let (best, p) = v
        .iter()
        .map(|a| a.norm_sqr())
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty state");
    if p < 1.0 - 1e-6 {
        return Err(NoiseError::NondeterministicOutput(p));
    }
    Ok(prog.format(prog.outcome(best)))
}

fn apply_pauli(v: &mut [C64], q: usize, p: usize) {
    match p {
        1 => kernels::apply_x(v, q),
        2 => kernels::apply_y(v, q),
        3 => kernels::apply_z(v, q),
        _ => {}
    }
}

/// Error probability of each gate under `noise`.
fn gate_probabilities(prog: &Program, noise: &NoiseSpec) -> Result<Vec<f64>, NoiseError> {
    if prog.num_qubits > noise.two_qubit.len() {
        return Err(NoiseError::WidthMismatch {
            got: prog.num_qubits,
            covered: noise.two_qubit.len(),
        });
    }
    prog.gates
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if g.is_two_qubit() {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                noise.two_qubit[a][b].ok_or(NoiseError::NotOnDevice { index: i, a, b })
            } else {
                Ok(noise.one_qubit)
            }
        })
        .collect()
}

fn sample_basis(probs: &[f64], r: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Worker pool sized by `QCWM_THREADS`, all cores when unset.
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("QCWM_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Monte-Carlo histogram of measured outcomes.
fn run_shots(prog: &Program, noise: &NoiseSpec) -> Result<Vec<u64>, NoiseError> {
    if noise.shots == 0 {
        return Err(NoiseError::NoShots);
    }
    let probs = gate_probabilities(prog, noise)?;
    // prefix[k] is the state before gate k
    let mut prefix = Vec::with_capacity(prog.gates.len() + 1);
    let mut v = prog.zero_state();
    for g in &prog.gates {
        prefix.push(v.clone());
        apply_gate(&mut v, g)?;
    }
    let ideal_probs: Vec<f64> = v.iter().map(|a| a.norm_sqr()).collect();
    prefix.push(v);
    let readout: Vec<f64> = prog
        .reads
        .iter()
        .map(|&(q, _)| noise.readout_flip.get(q).copied().unwrap_or(0.0))
        .collect();

    let shot = |s: usize| -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(s as u64);
        let errors: Vec<usize> = probs
            .iter()
            .zip(&prog.gates)
            .map(|(&p, g)| {
                if p > 0.0 && rng.random::<f64>() < p {
                    let choices = if g.qubits.len() == 2 { 15 } else { 3 };
                    rng.random_range(1..=choices)
                } else {
                    0
                }
            })
            .collect();
        let basis = match errors.iter().position(|&e| e != 0) {
            None => sample_basis(&ideal_probs, rng.random::<f64>()),
            Some(first) => {
                let mut v = prefix[first + 1].clone();
                for k in first..prog.gates.len() {
                    if k > first {
                        apply_gate(&mut v, &prog.gates[k]).expect("validated");
                    }
                    let e = errors[k];
                    if e != 0 {
                        let g = &prog.gates[k];
                        apply_pauli(&mut v, g.qubits[0], e % 4);
                        if g.qubits.len() == 2 {
                            apply_pauli(&mut v, g.qubits[1], e / 4);
                        }
                    }
                }
                let p: Vec<f64> = v.iter().map(|a| a.norm_sqr()).collect();
                sample_basis(&p, rng.random::<f64>())
            }
        };
        let mut bits = prog.outcome(basis);
        for (&(_, cl), &flip) in prog.reads.iter().zip(&readout) {
            if flip > 0.0 && rng.random::<f64>() < flip {
                bits ^= 1 << cl;
            }
        }
        bits
    };
    Ok(thread_pool().install(|| (0..noise.shots).into_par_iter().map(shot).collect()))
}

/// Probability of successful trials: the fraction of noisy shots that read
/// out the noiseless result.
pub fn pst(c: &Circuit, noise: &NoiseSpec) -> Result<f64, NoiseError> {
    let expected = ideal_output(c)?;
    pst_against(c, noise, &expected)
}

/// PST against a given correct output, for circuits that only approximate
/// the reference (their own noiseless output is not exactly deterministic).
pub fn pst_against(c: &Circuit, noise: &NoiseSpec, expected: &str) -> Result<f64, NoiseError> {
    let prog = compile(c)?;
    let want = prog
        .parse(expected)
        .ok_or_else(|| NoiseError::BadExpected(expected.to_string()))?;
    let outcomes = run_shots(&prog, noise)?;
    let hits = outcomes.iter().filter(|&&b| b == want).count();
    Ok(hits as f64 / noise.shots as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::line_device;

    #[test]
    fn ideal_outputs() {
        let c = Circuit::from_gates(1, [Gate::x(0)]).unwrap();
        assert_eq!(ideal_output(&c).unwrap(), "1");
        let h = Circuit::from_gates(1, [Gate::u3(0, std::f64::consts::FRAC_PI_2, 0.0, std::f64::consts::PI)])
            .unwrap();
        assert!(matches!(ideal_output(&h), Err(NoiseError::NondeterministicOutput(_))));
        let mut m = Circuit::with_clbits(2, 2).unwrap();
        m.extend([Gate::x(1), Gate::measure(1, 0), Gate::measure(0, 1)]).unwrap();
        assert_eq!(ideal_output(&m).unwrap(), "01");
    }

    #[test]
    fn noiseless_is_exact() {
        let c = Circuit::from_gates(2, [Gate::x(0), Gate::cx(0, 1)]).unwrap();
        let p = pst(&c, &NoiseSpec::noiseless(2, 500, 1)).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn single_cnot_is_reproducible() {
        let d = line_device(2, 0.2).unwrap();
        let c = Circuit::from_gates(2, [Gate::cx(0, 1)]).unwrap();
        let spec = NoiseSpec::from_device(&d, 2000, 42);
        let a = pst(&c, &spec).unwrap();
        let b = pst(&c, &spec).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.84).abs() < 0.03, "{a}");
    }

    #[test]
    fn off_device_gate_is_rejected() {
        let d = line_device(3, 0.01).unwrap();
        let c = Circuit::from_gates(3, [Gate::cx(0, 2)]).unwrap();
        assert!(matches!(
            pst(&c, &NoiseSpec::from_device(&d, 10, 0)),
            Err(NoiseError::NotOnDevice { .. })
        ));
    }

    #[test]
    fn readout_flips() {
        let d = line_device(1, 0.0).unwrap().with_readout_error(vec![0.5]).unwrap();
        let c = Circuit::new(1).unwrap();
        let p = pst(&c, &NoiseSpec::from_device(&d, 4000, 3)).unwrap();
        assert!((p - 0.5).abs() < 0.05);
    }
}
