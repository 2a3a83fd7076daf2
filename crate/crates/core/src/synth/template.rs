//! Parameterized `{U3, CNOT}` templates and their analytic cost gradient.

use crate::circuit::{Circuit, Gate, GateKind};
use crate::linalg::{mat2_mul, u3_matrix, u3_params, Mat2, UnitaryMatrix, C64, X_MATRIX};

/// An initial U3 layer on every qubit, then per CNOT a U3 on each of its two
/// qubits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    pub num_qubits: usize,
    pub cnots: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    U3 { qubit: usize, param: usize },
    Cnot { control: usize, target: usize },
}

impl Template {
    pub fn new(num_qubits: usize, cnots: Vec<(usize, usize)>) -> Self {
        Self { num_qubits, cnots }
    }

    pub fn num_params(&self) -> usize {
        3 * self.num_qubits + 6 * self.cnots.len()
    }

    pub fn cnot_count(&self) -> usize {
        self.cnots.len()
    }

    /// Depth of the CNOT skeleton alone.
    pub fn cnot_depth(&self) -> usize {
        let mut level = vec![0usize; self.num_qubits];
        for &(a, b) in &self.cnots {
            let l = level[a].max(level[b]) + 1;
            level[a] = l;
            level[b] = l;
        }
        level.into_iter().max().unwrap_or(0)
    }

    pub fn extended(&self, pair: (usize, usize)) -> Self {
        let mut t = self.clone();
        t.cnots.push(pair);
        t
    }

    pub fn shrunk(&self) -> Option<Self> {
        let mut t = self.clone();
        t.cnots.pop()?;
        Some(t)
    }

    fn slots(&self) -> Vec<Slot> {
        let mut out = Vec::with_capacity(self.num_qubits + 3 * self.cnots.len());
        let mut p = 0;
        for q in 0..self.num_qubits {
            out.push(Slot::U3 { qubit: q, param: p });
            p += 3;
        }
        for &(c, t) in &self.cnots {
            out.push(Slot::Cnot {
                control: c,
                target: t,
            });
            out.push(Slot::U3 { qubit: c, param: p });
            out.push(Slot::U3 { qubit: t, param: p + 3 });
            p += 6;
        }
        out
    }

    /// Circuit realising `params`. U3s equal to the identity up to phase are
    /// left out.
    pub fn to_circuit(&self, params: &[f64]) -> Circuit {
        let mut c = Circuit::new(self.num_qubits).expect("template has qubits");
        for s in self.slots() {
            let g = match s {
                Slot::U3 { qubit, param } => {
                    let (th, ph, la) = (params[param], params[param + 1], params[param + 2]);
                    if is_identity_up_to_phase(&u3_matrix(th, ph, la)) {
                        continue;
                    }
                    Gate::u3(qubit, th, ph, la)
                }
                Slot::Cnot { control, target } => Gate::cx(control, target),
            };
            c.push(g).expect("template gate valid");
        }
        c
    }

    /// Template with the CNOT skeleton of `c`, and parameters reproducing `c`
    /// exactly. Single-qubit gates are folded into the last U3 slot on their
    /// qubit.
    pub fn from_circuit(c: &Circuit) -> Option<(Self, Vec<f64>)> {
        let n = c.num_qubits();
        let mut cnots = Vec::new();
        for g in c.gates() {
            match g.kind {
                GateKind::Cnot => cnots.push((g.qubits[0], g.qubits[1])),
                GateKind::Swap | GateKind::Measure { .. } => return None,
                _ => {}
            }
        }
        let t = Self::new(n, cnots);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let mut slot_mats: Vec<Mat2> = vec![[[one, zero], [zero, one]]; t.num_params() / 3];
        let mut last_slot: Vec<usize> = (0..n).collect();
        let mut next = n;
        for g in c.gates() {
            let m = match g.kind {
                GateKind::U3 { theta, phi, lambda } => u3_matrix(theta, phi, lambda),
                GateKind::X => X_MATRIX,
                GateKind::Cnot => {
                    last_slot[g.qubits[0]] = next;
                    last_slot[g.qubits[1]] = next + 1;
                    next += 2;
                    continue;
                }
                _ => continue,
            };
            let s = last_slot[g.qubits[0]];
            slot_mats[s] = mat2_mul(&m, &slot_mats[s]);
        }
        let mut params = Vec::with_capacity(t.num_params());
        for m in &slot_mats {
            let (a, b, l) = u3_params(m);
            params.extend([a, b, l]);
        }
        Some((t, params))
    }
}

fn is_identity_up_to_phase(u: &Mat2) -> bool {
    let tol = 1e-13;
    if u[0][1].norm() > tol || u[1][0].norm() > tol {
        return false;
    }
    (u[1][1] - u[0][0]).norm() < tol
}

/// Partial derivatives of the U3 matrix in `(θ, φ, λ)`.
fn u3_derivatives(theta: f64, phi: f64, lambda: f64) -> [Mat2; 3] {
    let (s, c) = (theta / 2.0).sin_cos();
    let i = C64::new(0.0, 1.0);
    let zero = C64::new(0.0, 0.0);
    let el = C64::from_polar(1.0, lambda);
    let ep = C64::from_polar(1.0, phi);
    let epl = C64::from_polar(1.0, phi + lambda);
    [
        [
            [C64::new(-s / 2.0, 0.0), -el * (c / 2.0)],
            [ep * (c / 2.0), -epl * (s / 2.0)],
        ],
        [[zero, zero], [i * ep * s, i * epl * c]],
        [[zero, -i * el * s], [zero, i * epl * c]],
    ]
}

/// Row-major `d×d` matrices with in-place gate application.
#[derive(Clone)]
struct Flat {
    d: usize,
    a: Vec<C64>,
}

impl Flat {
    fn identity(d: usize) -> Self {
        let mut a = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            a[i * d + i] = C64::new(1.0, 0.0);
        }
        Self { d, a }
    }

    fn adjoint_of(u: &UnitaryMatrix) -> Self {
        let d = u.dim();
        let m = u.matrix();
        let mut a = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                a.push(m[(j, i)].conj());
            }
        }
        Self { d, a }
    }

    fn left_u3(&mut self, q: usize, u: &Mat2) {
        let d = self.d;
        let bit = 1 << q;
        for i0 in (0..d).filter(|i| i & bit == 0) {
            let i1 = i0 | bit;
            for j in 0..d {
                let x = self.a[i0 * d + j];
                let y = self.a[i1 * d + j];
                self.a[i0 * d + j] = u[0][0] * x + u[0][1] * y;
                self.a[i1 * d + j] = u[1][0] * x + u[1][1] * y;
            }
        }
    }

    fn left_cnot(&mut self, c: usize, t: usize) {
        let d = self.d;
        for i in (0..d).filter(|i| i & (1 << c) != 0 && i & (1 << t) == 0) {
            let k = i | (1 << t);
            for j in 0..d {
                self.a.swap(i * d + j, k * d + j);
            }
        }
    }

    fn right_u3(&mut self, q: usize, u: &Mat2) {
        let d = self.d;
        let bit = 1 << q;
        for i in 0..d {
            for c0 in (0..d).filter(|c| c & bit == 0) {
                let c1 = c0 | bit;
                let x = self.a[i * d + c0];
                let y = self.a[i * d + c1];
                self.a[i * d + c0] = x * u[0][0] + y * u[1][0];
                self.a[i * d + c1] = x * u[0][1] + y * u[1][1];
            }
        }
    }

    fn right_cnot(&mut self, c: usize, t: usize) {
        let d = self.d;
        for col in (0..d).filter(|i| i & (1 << c) != 0 && i & (1 << t) == 0) {
            let k = col | (1 << t);
            for i in 0..d {
                self.a.swap(i * d + col, i * d + k);
            }
        }
    }
}

/// `R[y][x] = Σ_r (P·Q)[(r,y),(r,x)]`, so that `Tr(G·P·Q) = Σ u_xy R_yx`
/// for a single-qubit `G = u` on qubit `q`.
fn reduced(p: &Flat, q_mat: &Flat, q: usize) -> Mat2 {
    let d = p.d;
    let bit = 1 << q;
    let lowmask = bit - 1;
    let mut r = [[C64::new(0.0, 0.0); 2]; 2];
    for rest in 0..d / 2 {
        let base = ((rest >> q) << (q + 1)) | (rest & lowmask);
        let idx = [base, base | bit];
        for y in 0..2 {
            let row = &p.a[idx[y] * d..idx[y] * d + d];
            for x in 0..2 {
                let col = idx[x];
                let mut s = C64::new(0.0, 0.0);
                for (j, pv) in row.iter().enumerate() {
                    s += pv * q_mat.a[j * d + col];
                }
                r[y][x] += s;
            }
        }
    }
    r
}

/// Fixed target against which templates are scored.
pub struct Objective<'a> {
    pub template: &'a Template,
    target: &'a UnitaryMatrix,
    target_adj: Flat,
    slots: Vec<Slot>,
    frozen: Vec<bool>,
}

impl<'a> Objective<'a> {
    pub fn new(template: &'a Template, target: &'a UnitaryMatrix) -> Self {
        Self {
            template,
            target,
            target_adj: Flat::adjoint_of(target),
            slots: template.slots(),
            frozen: Vec::new(),
        }
    }

    /// Parameters marked `true` get a zero gradient and so keep their value.
    pub fn with_frozen(mut self, frozen: Vec<bool>) -> Self {
        self.frozen = frozen;
        self
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    fn forward(&self, params: &[f64], keep: bool) -> (Flat, Vec<Flat>) {
        let mut p = Flat::identity(self.dim());
        let mut prefixes = Vec::new();
        for s in &self.slots {
            if keep {
                prefixes.push(p.clone());
            }
            match *s {
                Slot::U3 { qubit, param } => {
                    let u = u3_matrix(params[param], params[param + 1], params[param + 2]);
                    p.left_u3(qubit, &u);
                }
                Slot::Cnot { control, target } => p.left_cnot(control, target),
            }
        }
        (p, prefixes)
    }

    /// `Tr(U_T† U_C)`.
    pub fn trace(&self, params: &[f64]) -> C64 {
        let (p, _) = self.forward(params, false);
        let m = self.target.matrix();
        let d = self.dim();
        let mut t = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                t += m[(i, j)].conj() * p.a[i * d + j];
            }
        }
        t
    }

    /// `Δ = 1 − |Tr(U_T† U_C)| / d`.
    pub fn delta(&self, params: &[f64]) -> f64 {
        (1.0 - self.trace(params).norm() / self.dim() as f64).clamp(0.0, 1.0)
    }

    /// Smooth cost `1 − |t|²/d²`, which shares its minimisers with `Δ`.
    pub fn cost(&self, params: &[f64]) -> f64 {
        let d = self.dim() as f64;
        1.0 - self.trace(params).norm_sqr() / (d * d)
    }

    pub fn cost_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        let (_, prefixes) = self.forward(params, true);
        let mut q = self.target_adj.clone();
        let mut dt = vec![C64::new(0.0, 0.0); params.len()];
        let mut trace = None;
        for (k, s) in self.slots.iter().enumerate().rev() {
            match *s {
                Slot::U3 { qubit, param } => {
                    let (th, ph, la) = (params[param], params[param + 1], params[param + 2]);
                    let r = reduced(&prefixes[k], &q, qubit);
                    let u = u3_matrix(th, ph, la);
                    if trace.is_none() {
                        trace = Some(contract(&u, &r));
                    }
                    for (off, du) in u3_derivatives(th, ph, la).iter().enumerate() {
                        dt[param + off] = contract(du, &r);
                    }
                    q.right_u3(qubit, &u);
                }
                Slot::Cnot { control, target } => q.right_cnot(control, target),
            }
        }
        let t = trace.unwrap_or_else(|| self.trace(params));
        let dd = (d * d) as f64;
        let cost = 1.0 - t.norm_sqr() / dd;
        let grad = dt
            .iter()
            .enumerate()
            .map(|(i, g)| match self.frozen.get(i) {
                Some(true) => 0.0,
                _ => -2.0 * (t.conj() * g).re / dd,
            })
            .collect();
        (cost, grad)
    }
}

fn contract(u: &Mat2, r: &Mat2) -> C64 {
    u[0][0] * r[0][0] + u[0][1] * r[1][0] + u[1][0] * r[0][1] + u[1][1] * r[1][1]
}
