//! Approximate `{U3, CNOT}` synthesis of ≤3-qubit unitaries with control over
//! the leading decimal digit of the achieved distance.
//!
//! Templates grow one CNOT layer at a time (beam search over qubit pairs) and
//! are fitted with L-BFGS on the analytic gradient of `1 − |Tr(U_T† U_C)|²/d²`.
//! To embed a stage-1 symbol the fitted point is pushed along seeded random
//! rays until `Δ` lands in a decade band whose leading digit has the
//! requested parity.

pub mod optimize;
pub mod template;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::linalg::{circuit_unitary, hs_distance, LinalgError, UnitaryMatrix};
use crate::signature::Stage1Symbol;

pub use template::{Objective, Template};

/// Distances below this are round-off and carry no digit.
pub const PARITY_FLOOR: f64 = 1e-14;

/// Smallest `Δ` accepted as carrying a deliberate digit when embedding.
pub const EMBED_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("target dimension {0} is not 2, 4 or 8")]
    BadDimension(usize),
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error(
        "no template with ≤ {layers} CNOT layers reached Δ < {target:e} (best {best_delta:e})"
    )]
    SynthesisBudgetExceeded {
        layers: usize,
        target: f64,
        best_delta: f64,
    },
    #[error("could not steer Δ into a band with the parity of `{}` below ε = {epsilon:e}", symbol.as_char())]
    EmbeddingFailed { symbol: Stage1Symbol, epsilon: f64 },
    #[error("Δ = {0:e} is below the round-off floor, its leading digit is undefined")]
    ParityUndefined(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub epsilon: f64,
    pub max_cnot_layers: usize,
    pub restarts: usize,
    pub max_iters: u64,
    pub seed: u64,
    /// Templates kept per layer of the search.
    pub beam_width: usize,
    /// Local qubit pairs CNOTs may act on. Every pair when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<(usize, usize)>>,
    /// Try removing single-qubit gates after fitting.
    #[serde(default)]
    pub prune: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            max_cnot_layers: 14,
            restarts: 8,
            max_iters: 2000,
            seed: 0,
            beam_width: 3,
            coupling: None,
            prune: false,
        }
    }
}

impl SynthesisConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(SynthError::InvalidConfig(format!(
                "epsilon {} outside (0, 0.5)",
                self.epsilon
            )));
        }
        if self.restarts == 0 {
            return Err(SynthError::InvalidConfig("restarts must be ≥ 1".into()));
        }
        if self.beam_width == 0 {
            return Err(SynthError::InvalidConfig("beam_width must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSynthesisResult {
    /// Circuit over the block's local qubits.
    pub circuit: Circuit,
    pub delta: f64,
    /// First nonzero decimal digit of `delta`; `None` at round-off scale.
    pub leading_digit: Option<u8>,
    pub symbol: Option<Stage1Symbol>,
    pub template: Template,
    pub params: Vec<f64>,
}

impl BlockSynthesisResult {
    pub fn cnot_count(&self) -> usize {
        self.template.cnot_count()
    }
}

/// First nonzero digit of the decimal significand.
pub fn leading_digit(x: f64) -> Option<u8> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let s = format!("{x:e}");
    s.bytes().next().map(|b| b - b'0')
}

/// Distance from the significand of `x` to the nearest digit boundary, as
/// a fraction of one digit step.
fn digit_margin(x: f64) -> f64 {
    let s = format!("{x:.12e}");
    let mant: f64 = s.split('e').next().unwrap().parse().unwrap();
    let frac = mant - mant.floor();
    frac.min(1.0 - frac)
}

pub fn symbol_of_delta(delta: f64) -> Result<Stage1Symbol, SynthError> {
    if delta < PARITY_FLOOR {
        return Err(SynthError::ParityUndefined(delta));
    }
    Ok(Stage1Symbol::from_digit(leading_digit(delta).expect("positive")))
}

/// `Δ(U_C, U_T)` and the stage-1 symbol its leading digit encodes.
pub fn extract_stage1(
    u_c: &UnitaryMatrix,
    u_t: &UnitaryMatrix,
) -> Result<(f64, Stage1Symbol), SynthError> {
    let delta = hs_distance(u_c, u_t)?;
    Ok((delta, symbol_of_delta(delta)?))
}

fn carries(delta: f64, symbol: Stage1Symbol, epsilon: f64) -> bool {
    delta >= EMBED_FLOOR
        && delta < epsilon
        && digit_margin(delta) > 0.02
        && leading_digit(delta).is_some_and(|d| symbol.accepts(d))
}

fn check_target(u_t: &UnitaryMatrix) -> Result<usize, SynthError> {
    match u_t.dim() {
        2 | 4 | 8 => Ok(u_t.num_qubits()),
        d => Err(SynthError::BadDimension(d)),
    }
}

fn pairs(n: usize, cfg: &SynthesisConfig) -> Vec<(usize, usize)> {
    if let Some(c) = &cfg.coupling {
        return c.iter().map(|&(a, b)| (a.min(b), a.max(b))).filter(|&(a, b)| a != b && b < n).collect();
    }
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            out.push((a, b));
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Fit {
    template: Template,
    params: Vec<f64>,
    delta: f64,
    /// Parameters pinned at zero by [`prune`].
    frozen: Vec<bool>,
}

fn random_params(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect()
}

/// Warm start (if any), then random restarts until `target` is reached or
/// `restarts` random starts are spent.
fn fit_template(
    u_t: &UnitaryMatrix,
    template: Template,
    warm: Option<Vec<f64>>,
    restarts: usize,
    target: f64,
    cfg: &SynthesisConfig,
    rng: &mut ChaCha8Rng,
) -> Fit {
    let obj = Objective::new(&template, u_t);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut consider = |init: Vec<f64>| {
        let (p, d) = optimize::minimize(&obj, init, cfg.max_iters, target * 1e-3);
        if best.as_ref().is_none_or(|b| d < b.1) {
            best = Some((p, d));
        }
        d < target
    };
    let budget = if warm.is_some() { restarts } else { restarts.max(1) };
    let mut done = warm.is_some_and(&mut consider);
    let mut spent = 0;
    while !done && spent < budget {
        done = consider(random_params(template.num_params(), rng));
        spent += 1;
    }
    let (params, delta) = best.expect("at least one start");
    Fit {
        template: template.clone(),
        params,
        delta,
        frozen: Vec::new(),
    }
}

/// Drops single-qubit gates one at a time, keeping each removal whose
/// re-optimized fit stays below `limit`.
fn prune(u_t: &UnitaryMatrix, mut fit: Fit, limit: f64, cfg: &SynthesisConfig) -> Fit {
    let limit = limit.max(fit.delta);
    let n = fit.template.num_params();
    let mut frozen = vec![false; n];
    for slot in (0..n).step_by(3) {
        let mut mask = frozen.clone();
        mask[slot..slot + 3].fill(true);
        let mut init = fit.params.clone();
        init[slot..slot + 3].fill(0.0);
        let obj = Objective::new(&fit.template, u_t).with_frozen(mask.clone());
        let (mut p, _) = optimize::minimize(&obj, init, cfg.max_iters, limit * 1e-3);
        for (x, &f) in p.iter_mut().zip(&mask) {
            if f {
                *x = 0.0;
            }
        }
        let d = obj.delta(&p);
        if d < limit {
            fit.params = p;
            fit.delta = d;
            frozen = mask;
        }
    }
    fit.frozen = frozen;
    fit
}

/// Beam search over CNOT skeletons with at most `max_layers` CNOTs for a
/// template reaching `Δ < target`. Among successes in the first successful
/// layer the shallowest skeleton wins, then the lowest `Δ`.
fn search(
    u_t: &UnitaryMatrix,
    target: f64,
    max_layers: usize,
    cfg: &SynthesisConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Fit, SynthError> {
    let n = check_target(u_t)?;
    let root = fit_template(u_t, Template::new(n, vec![]), None, cfg.restarts, target, cfg, rng);
    if root.delta < target {
        return Ok(root);
    }
    let mut best_delta = root.delta;
    let mut beam = vec![root];
    let max_layers = if n == 1 { 0 } else { max_layers };
    for _layer in 1..=max_layers {
        let mut cands: Vec<Fit> = Vec::new();
        for b in &beam {
            for &pair in &pairs(n, cfg) {
                let mut init = b.params.clone();
                init.extend([0.0; 6]);
                cands.push(fit_template(
                    u_t,
                    b.template.extended(pair),
                    Some(init),
                    0,
                    target,
                    cfg,
                    rng,
                ));
            }
        }
        cands.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        if cands[0].delta >= target {
            let retry = fit_template(
                u_t,
                cands[0].template.clone(),
                None,
                cfg.restarts,
                target,
                cfg,
                rng,
            );
            if retry.delta < cands[0].delta {
                cands.insert(0, retry);
            }
        }
        if cands[0].delta < target {
            let pick = (0..cands.len())
                .filter(|&i| cands[i].delta < target)
                .min_by(|&i, &j| {
                    (cands[i].template.cnot_depth(), cands[i].delta)
                        .partial_cmp(&(cands[j].template.cnot_depth(), cands[j].delta))
                        .expect("finite distances")
                })
                .expect("one success");
            return Ok(cands.swap_remove(pick));
        }
        best_delta = best_delta.min(cands[0].delta);
        let mut next: Vec<Fit> = Vec::new();
        for c in cands {
            if next.len() == cfg.beam_width {
                break;
            }
            if !next.iter().any(|f| f.template == c.template) {
                next.push(c);
            }
        }
        beam = next;
    }
    Err(SynthError::SynthesisBudgetExceeded {
        layers: max_layers,
        target,
        best_delta,
    })
}

fn seeded(cfg: &SynthesisConfig, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    rng
}

/// Builds the result from fitted parameters, recomputing `Δ` on the emitted
/// circuit.
fn finish(
    u_t: &UnitaryMatrix,
    template: Template,
    params: Vec<f64>,
    symbol: Option<Stage1Symbol>,
) -> Result<BlockSynthesisResult, SynthError> {
    let circuit = template.to_circuit(&params);
    let delta = hs_distance(&circuit_unitary(&circuit)?, u_t)?;
    let leading = (delta >= PARITY_FLOOR).then(|| leading_digit(delta)).flatten();
    Ok(BlockSynthesisResult {
        circuit,
        delta,
        leading_digit: leading,
        symbol,
        template,
        params,
    })
}

/// Lowest-CNOT template with `Δ < cfg.epsilon`.
pub fn synthesize(
    u_t: &UnitaryMatrix,
    cfg: &SynthesisConfig,
) -> Result<BlockSynthesisResult, SynthError> {
    synthesize_within(u_t, cfg, cfg.epsilon, cfg.max_cnot_layers)
}

/// [`synthesize`] with an explicit distance target and layer budget.
pub fn synthesize_within(
    u_t: &UnitaryMatrix,
    cfg: &SynthesisConfig,
    target: f64,
    max_layers: usize,
) -> Result<BlockSynthesisResult, SynthError> {
    cfg.validate()?;
    let fit = search(u_t, target, max_layers, cfg, &mut seeded(cfg, 0))?;
    let fit = if cfg.prune { prune(u_t, fit, target, cfg) } else { fit };
    let obj = Objective::new(&fit.template, u_t);
    let (polished, d) = optimize::minimize(&obj, fit.params.clone(), cfg.max_iters, PARITY_FLOOR);
    let params = if d < fit.delta { polished } else { fit.params };
    finish(u_t, fit.template, params, None)
}

/// The fixed skeleton `template` at `params`, pruned against `target` when
/// `cfg.prune` is set.
pub fn synthesize_on(
    u_t: &UnitaryMatrix,
    template: Template,
    params: Vec<f64>,
    target: f64,
    cfg: &SynthesisConfig,
) -> Result<BlockSynthesisResult, SynthError> {
    check_target(u_t)?;
    let delta = Objective::new(&template, u_t).delta(&params);
    let fit = Fit {
        template,
        params,
        delta,
        frozen: Vec::new(),
    };
    let fit = if cfg.prune { prune(u_t, fit, target, cfg) } else { fit };
    finish(u_t, fit.template, fit.params, None)
}

/// Decade bands `[d·10^m, (d+1)·10^m)` below `epsilon` and above `floor`
/// whose digit has the parity of `symbol`. The default band comes first.
pub fn candidate_bands(symbol: Stage1Symbol, epsilon: f64, floor: f64) -> Vec<(f64, f64)> {
    let top = epsilon.log10().floor() as i32;
    let m0 = top - 2;
    let d0 = match symbol {
        Stage1Symbol::A => 3.0,
        Stage1Symbol::B => 2.0,
    };
    let band = |d: f64, m: i32| (d * 10f64.powi(m), (d + 1.0) * 10f64.powi(m));
    let fits = |(lo, hi): (f64, f64)| lo > floor * 1.05 && hi <= epsilon * (1.0 + 1e-12);
    let default = band(d0, m0);
    let mut out = Vec::new();
    if fits(default) {
        out.push(default);
    }
    for m in (m0 - 3)..=top {
        for d in 1..=9u8 {
            let b = band(d as f64, m);
            if symbol.accepts(d) && fits(b) && b != default {
                out.push(b);
            }
        }
    }
    out
}

/// Moves from `base` along seeded random directions until `Δ` sits well
/// inside `band`.
fn ray_into_band(
    obj: &Objective<'_>,
    base: &[f64],
    band: (f64, f64),
    symbol: Stage1Symbol,
    epsilon: f64,
    frozen: &[bool],
    rng: &mut ChaCha8Rng,
) -> Option<Vec<f64>> {
    let (lo, hi) = band;
    let w = hi - lo;
    let center = 0.5 * (lo + hi);
    let inside = |x: f64| x >= lo + 0.15 * w && x <= hi - 0.15 * w && carries(x, symbol, epsilon);
    let at = |v: &[f64], t: f64| -> Vec<f64> { base.iter().zip(v).map(|(b, d)| b + t * d).collect() };
    for _ in 0..24 {
        let mut v: Vec<f64> = (0..base.len()).map(|_| rng.sample(StandardNormal)).collect();
        for (x, _) in v.iter_mut().zip(frozen).filter(|(_, &f)| f) {
            *x = 0.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let mut t_lo = 0.0;
        let mut t = 1e-4;
        let mut t_hi = None;
        while t < 8.0 {
            let p = at(&v, t);
            let d = obj.delta(&p);
            if inside(d) {
                return Some(p);
            }
            if d > center {
                t_hi = Some(t);
                break;
            }
            t_lo = t;
            t *= 2.0;
        }
        let Some(mut t_hi) = t_hi else { continue };
        for _ in 0..80 {
            let mid = 0.5 * (t_lo + t_hi);
            let p = at(&v, mid);
            let d = obj.delta(&p);
            if inside(d) {
                return Some(p);
            }
            if d < center {
                t_lo = mid;
            } else {
                t_hi = mid;
            }
        }
    }
    None
}

fn steer(
    u_t: &UnitaryMatrix,
    fit: &Fit,
    symbol: Stage1Symbol,
    cfg: &SynthesisConfig,
    rng: &mut ChaCha8Rng,
) -> Option<BlockSynthesisResult> {
    let accept = |template: Template, params: Vec<f64>| {
        finish(u_t, template, params, Some(symbol))
            .ok()
            .filter(|r| carries(r.delta, symbol, cfg.epsilon))
    };
    if carries(fit.delta, symbol, cfg.epsilon) {
        if let Some(r) = accept(fit.template.clone(), fit.params.clone()) {
            return Some(r);
        }
    }
    let obj = Objective::new(&fit.template, u_t);
    for band in candidate_bands(symbol, cfg.epsilon, fit.delta) {
        if let Some(p) = ray_into_band(&obj, &fit.params, band, symbol, cfg.epsilon, &fit.frozen, rng) {
            if let Some(r) = accept(fit.template.clone(), p) {
                return Some(r);
            }
        }
    }
    None
}

fn steer_with_fallback(
    u_t: &UnitaryMatrix,
    fit: Fit,
    symbol: Stage1Symbol,
    cfg: &SynthesisConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BlockSynthesisResult, SynthError> {
    if let Some(r) = steer(u_t, &fit, symbol, cfg, rng) {
        return Ok(r);
    }
    let n = fit.template.num_qubits;
    for pair in pairs(n, cfg) {
        let mut init = fit.params.clone();
        init.extend([0.0; 6]);
        let grown = fit_template(
            u_t,
            fit.template.extended(pair),
            Some(init),
            cfg.restarts,
            cfg.epsilon,
            cfg,
            rng,
        );
        if let Some(r) = steer(u_t, &grown, symbol, cfg, rng) {
            return Ok(r);
        }
    }
    if let Some(shrunk) = fit.template.shrunk() {
        let mut init = fit.params.clone();
        init.truncate(shrunk.num_params());
        let fitted = fit_template(u_t, shrunk, Some(init), cfg.restarts, cfg.epsilon, cfg, rng);
        if fitted.delta < cfg.epsilon {
            if let Some(r) = steer(u_t, &fitted, symbol, cfg, rng) {
                return Ok(r);
            }
        }
    }
    Err(SynthError::EmbeddingFailed {
        symbol,
        epsilon: cfg.epsilon,
    })
}

/// Synthesis whose `Δ` has a leading digit of the parity `symbol` asks for,
/// with `Δ < cfg.epsilon`.
pub fn embed_stage1(
    u_t: &UnitaryMatrix,
    symbol: Stage1Symbol,
    cfg: &SynthesisConfig,
) -> Result<BlockSynthesisResult, SynthError> {
    embed_stage1_within(u_t, symbol, cfg, cfg.max_cnot_layers)
}

pub fn embed_stage1_within(
    u_t: &UnitaryMatrix,
    symbol: Stage1Symbol,
    cfg: &SynthesisConfig,
    max_layers: usize,
) -> Result<BlockSynthesisResult, SynthError> {
    cfg.validate()?;
    let mut rng = seeded(cfg, 1 + symbol as u64);
    let fit = search(u_t, cfg.epsilon, max_layers, cfg, &mut rng)?;
    let fit = if cfg.prune { prune(u_t, fit, cfg.epsilon * 1e-2, cfg) } else { fit };
    steer_with_fallback(u_t, fit, symbol, cfg, &mut rng)
}

/// Stage-1 embedding on a fixed skeleton, starting from `init` (for example
/// the exact parameters of the source block).
pub fn embed_stage1_on(
    u_t: &UnitaryMatrix,
    template: Template,
    init: Vec<f64>,
    symbol: Stage1Symbol,
    cfg: &SynthesisConfig,
) -> Result<BlockSynthesisResult, SynthError> {
    cfg.validate()?;
    check_target(u_t)?;
    let mut rng = seeded(cfg, 3 + symbol as u64);
    let fit = fit_template(u_t, template, Some(init), cfg.restarts, EMBED_FLOOR, cfg, &mut rng);
    let fit = if cfg.prune { prune(u_t, fit, cfg.epsilon * 1e-2, cfg) } else { fit };
    steer_with_fallback(u_t, fit, symbol, cfg, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::linalg::random_unitary;

    #[test]
    fn leading_digits() {
        assert_eq!(leading_digit(2.21e-6), Some(2));
        assert_eq!(leading_digit(5.49e-6), Some(5));
        assert_eq!(leading_digit(9.999e-3), Some(9));
        assert_eq!(leading_digit(1e-4), Some(1));
        assert_eq!(leading_digit(0.0), None);
        assert_eq!(symbol_of_delta(2.21e-6), Ok(Stage1Symbol::B));
        assert_eq!(symbol_of_delta(5.49e-6), Ok(Stage1Symbol::A));
        assert_eq!(symbol_of_delta(3e-16), Err(SynthError::ParityUndefined(3e-16)));
    }

    #[test]
    fn default_bands() {
        let a = candidate_bands(Stage1Symbol::A, 1e-2, 0.0);
        assert!((a[0].0 - 3e-4).abs() < 1e-18 && (a[0].1 - 4e-4).abs() < 1e-18);
        let b = candidate_bands(Stage1Symbol::B, 1e-2, 0.0);
        assert!((b[0].0 - 2e-4).abs() < 1e-18);
        for (lo, hi) in a.iter().chain(&b) {
            assert!(*hi <= 1e-2 * (1.0 + 1e-12) && lo < hi);
        }
        assert!(candidate_bands(Stage1Symbol::B, 1e-2, 8.5e-3).is_empty());
        assert_eq!(candidate_bands(Stage1Symbol::A, 1e-2, 8.5e-3).len(), 1);
    }

    #[test]
    fn identity_needs_no_cnot() {
        let r = synthesize(&UnitaryMatrix::identity(3), &SynthesisConfig::default()).unwrap();
        assert_eq!(r.cnot_count(), 0);
        assert!(r.delta <= 1e-10);
    }

    #[test]
    fn native_cnot() {
        let c = Circuit::from_gates(2, [Gate::cx(0, 1)]).unwrap();
        let u = circuit_unitary(&c).unwrap();
        let cfg = SynthesisConfig::default();
        let r = synthesize_within(&u, &cfg, 1e-9, 3).unwrap();
        assert_eq!(r.cnot_count(), 1);
        assert!(r.delta <= 1e-8);
    }

    #[test]
    fn embed_on_identity() {
        let cfg = SynthesisConfig::default();
        for sym in [Stage1Symbol::A, Stage1Symbol::B] {
            let u = UnitaryMatrix::identity(3);
            let r = embed_stage1(&u, sym, &cfg).unwrap();
            let (d, s) = extract_stage1(&circuit_unitary(&r.circuit).unwrap(), &u).unwrap();
            assert_eq!(s, sym);
            assert!(d < cfg.epsilon);
            assert_eq!(r.symbol, Some(sym));
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(2, &mut rng);
        let cfg = SynthesisConfig::default().with_seed(9);
        let a = embed_stage1(&u, Stage1Symbol::B, &cfg).unwrap();
        let b = embed_stage1(&u, Stage1Symbol::B, &cfg).unwrap();
        assert_eq!(a.circuit, b.circuit);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SynthesisConfig::default().with_epsilon(0.7);
        assert!(matches!(
            synthesize(&UnitaryMatrix::identity(1), &cfg),
            Err(SynthError::InvalidConfig(_))
        ));
    }
}
