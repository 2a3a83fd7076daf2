//! Dense complex unitaries over at most seven qubits.
//!
//! Basis ordering: qubit 0 is the least-significant bit of the basis index,
//! so `tensor(a, b)` places `a` on the higher qubits.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};

pub type C64 = Complex64;
pub type Mat2 = [[C64; 2]; 2];

pub const MAX_QUBITS: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("tensor product would exceed 2^{MAX_QUBITS}")]
    DimensionOverflow,
    #[error("{0} qubits exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("measure gates have no unitary")]
    MeasureInUnitary,
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
        [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
    ]
}

pub const X_MATRIX: Mat2 = [[ZERO, ONE], [ONE, ZERO]];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// U3 angles `(θ, φ, λ)` reproducing a 2×2 unitary up to global phase.
pub fn u3_params(u: &Mat2) -> (f64, f64, f64) {
    let theta = 2.0 * u[1][0].norm().atan2(u[0][0].norm());
    let tiny = 1e-14;
    if u[0][0].norm() > tiny {
        let alpha = u[0][0].arg();
        let sum = u[1][1].arg() - alpha;
        if u[1][0].norm() > tiny {
            let phi = u[1][0].arg() - alpha;
            (theta, phi, sum - phi)
        } else {
            (theta, 0.0, sum)
        }
    } else {
        let alpha = u[1][0].arg();
        (theta, 0.0, (-u[0][1]).arg() - alpha)
    }
}

/// State-vector kernels. Each acts on one column of amplitudes.
pub mod kernels {
    use super::{Mat2, C64};

    pub fn apply_1q(v: &mut [C64], q: usize, u: &Mat2) {
        let bit = 1usize << q;
        for i in 0..v.len() {
            if i & bit == 0 {
                let (a, b) = (v[i], v[i | bit]);
                v[i] = u[0][0] * a + u[0][1] * b;
                v[i | bit] = u[1][0] * a + u[1][1] * b;
            }
        }
    }

    pub fn apply_x(v: &mut [C64], q: usize) {
        let bit = 1usize << q;
        for i in 0..v.len() {
            if i & bit == 0 {
                v.swap(i, i | bit);
            }
        }
    }

    pub fn apply_cnot(v: &mut [C64], control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..v.len() {
            if i & cb != 0 && i & tb == 0 {
                v.swap(i, i | tb);
            }
        }
    }

    pub fn apply_swap(v: &mut [C64], a: usize, b: usize) {
        let (ab, bb) = (1usize << a, 1usize << b);
        for i in 0..v.len() {
            if i & ab != 0 && i & bb == 0 {
                v.swap(i, (i & !ab) | bb);
            }
        }
    }

    pub fn apply_y(v: &mut [C64], q: usize) {
        let bit = 1usize << q;
        let i_unit = C64::new(0.0, 1.0);
        for i in 0..v.len() {
            if i & bit == 0 {
                let (a, b) = (v[i], v[i | bit]);
                v[i] = -i_unit * b;
                v[i | bit] = i_unit * a;
            }
        }
    }

    pub fn apply_z(v: &mut [C64], q: usize) {
        let bit = 1usize << q;
        for (i, a) in v.iter_mut().enumerate() {
            if i & bit != 0 {
                *a = -*a;
            }
        }
    }
}

/// Applies a unitary gate to one amplitude column. Barriers are no-ops.
pub fn apply_gate(v: &mut [C64], g: &Gate) -> Result<(), LinalgError> {
    match g.kind {
        GateKind::U3 { theta, phi, lambda } => {
            kernels::apply_1q(v, g.qubits[0], &u3_matrix(theta, phi, lambda))
        }
        GateKind::X => kernels::apply_x(v, g.qubits[0]),
        GateKind::Cnot => kernels::apply_cnot(v, g.qubits[0], g.qubits[1]),
        GateKind::Swap => kernels::apply_swap(v, g.qubits[0], g.qubits[1]),
        GateKind::Barrier { .. } => {}
        GateKind::Measure { .. } => return Err(LinalgError::MeasureInUnitary),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    m: DMatrix<C64>,
}

impl UnitaryMatrix {
    pub fn identity(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    /// Wraps a matrix after checking `U†U = I` within Frobenius norm 1e-10.
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self, LinalgError> {
        let d = m.nrows();
        if m.ncols() != d {
            return Err(LinalgError::DimensionMismatch(d, m.ncols()));
        }
        if !d.is_power_of_two() {
            return Err(LinalgError::NotPowerOfTwo(d));
        }
        if d > 1 << MAX_QUBITS {
            return Err(LinalgError::TooManyQubits(d.trailing_zeros() as usize));
        }
        let u = Self { m };
        let dev = u.unitarity_deviation();
        if dev > 1e-10 {
            return Err(LinalgError::NotUnitary(dev));
        }
        Ok(u)
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let d = rows.len();
        Self::from_matrix(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.dim() != rhs.dim() {
            return Err(LinalgError::DimensionMismatch(self.dim(), rhs.dim()));
        }
        Ok(Self { m: &self.m * &rhs.m })
    }

    /// `‖U†U − I‖_F`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        (self.m.adjoint() * &self.m - DMatrix::<C64>::identity(d, d)).norm()
    }

    pub fn scaled(&self, phase: C64) -> Self {
        Self {
            m: &self.m * phase,
        }
    }

    /// Left-multiplies by a gate in place: `U ← G·U`.
    pub fn apply_gate(&mut self, g: &Gate) -> Result<(), LinalgError> {
        let d = self.dim();
        if let Some(&q) = g.qubits.iter().find(|&&q| q >= self.num_qubits()) {
            return Err(LinalgError::DimensionMismatch(d, 1 << (q + 1)));
        }
        for col in self.m.as_mut_slice().chunks_mut(d) {
            apply_gate(col, g)?;
        }
        Ok(())
    }

    /// Max entrywise distance after removing the best global phase.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        let t: C64 = self
            .m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let phase = if t.norm() > 0.0 { t / t.norm() } else { ONE };
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max entrywise distance.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Embeds a single gate on `n` qubits.
pub fn gate_unitary(g: &Gate, n: usize) -> Result<UnitaryMatrix, LinalgError> {
    if n > MAX_QUBITS {
        return Err(LinalgError::TooManyQubits(n));
    }
    let mut u = UnitaryMatrix::identity(n);
    u.apply_gate(g)?;
    Ok(u)
}

/// Ordered product of gate unitaries, later gates on the left.
pub fn circuit_unitary(c: &Circuit) -> Result<UnitaryMatrix, LinalgError> {
    if c.num_qubits() > MAX_QUBITS {
        return Err(LinalgError::TooManyQubits(c.num_qubits()));
    }
    let mut u = UnitaryMatrix::identity(c.num_qubits());
    for g in c.gates() {
        u.apply_gate(g)?;
    }
    Ok(u)
}

/// `Tr(A†B)`.
pub fn hs_inner(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<C64, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a.m.iter().zip(b.m.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// `Δ(U_C, U_T) = 1 − |Tr(U_C† U_T)| / 2^n`, clamped into `[0, 1]`.
pub fn hs_distance(u_c: &UnitaryMatrix, u_t: &UnitaryMatrix) -> Result<f64, LinalgError> {
    let t = hs_inner(u_c, u_t)?;
    Ok((1.0 - t.norm() / u_c.dim() as f64).clamp(0.0, 1.0))
}

/// Kronecker product; `a` occupies the higher qubits.
pub fn tensor(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<UnitaryMatrix, LinalgError> {
    if a.num_qubits() + b.num_qubits() > MAX_QUBITS {
        return Err(LinalgError::DimensionOverflow);
    }
    Ok(UnitaryMatrix {
        m: a.m.kronecker(&b.m),
    })
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn random_unitary<R: rand::Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> UnitaryMatrix {
    use rand_distr::{Distribution, StandardNormal};
    let d = 1usize << num_qubits;
    let z = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix { m: q }
}
