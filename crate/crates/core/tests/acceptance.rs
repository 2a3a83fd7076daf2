//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use qcwm_core::device::{fakelagos_preset, line_device, Edge};
use qcwm_core::linalg::{circuit_unitary, hs_distance, random_unitary, UnitaryMatrix};
use qcwm_core::mapper::{connected_subsets, embed_stage2, extract_stage2, enumerate_mappings, MappingTree};
use qcwm_core::metrics::{compare_report, ppa};
use qcwm_core::noise::{pst, NoiseSpec};
use qcwm_core::route::{embed_stage3, extract_stage3};
use qcwm_core::synth::{embed_stage1, extract_stage1};
use qcwm_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn textbook_distance(u: &UnitaryMatrix, v: &UnitaryMatrix) -> f64 {
    let d = u.dim();
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            tr += u.get(i, j).conj() * v.get(i, j);
        }
    }
    1.0 - tr.norm() / d as f64
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = 1 + i % 3;
        let u = random_unitary(n, &mut rng);
        let v = random_unitary(n, &mut rng);
        let got = hs_distance(&u, &v).map_err(|e| e.to_string())?;
        worst = worst.max((got - textbook_distance(&u, &v)).abs());
        let same = hs_distance(&u, &u).map_err(|e| e.to_string())?;
        ensure(same.abs() <= 1e-15, || format!("Δ(U,U) = {same:e}"))?;
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let id = UnitaryMatrix::identity(1);
    let x = circuit_unitary(&Circuit::from_gates(1, [Gate::x(0)]).unwrap()).unwrap();
    let d = hs_distance(&id, &x).unwrap();
    ensure((d - 1.0).abs() <= 1e-15, || format!("Δ(I, X) = {d}"))?;
    Ok(format!("100 pairs, max deviation {worst:.1e}; Δ(U,U)=0, Δ(I,X)=1"))
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = SynthesisConfig::default();
    let mut runs = 0;
    let mut worst = 0.0f64;
    for i in 0..50 {
        let n = if i < 25 { 2 } else { 3 };
        let u = random_unitary(n, &mut rng);
        for sym in [Stage1Symbol::A, Stage1Symbol::B] {
            let cfg = cfg.clone().with_seed(i as u64);
            let r = embed_stage1(&u, sym, &cfg).map_err(|e| format!("target {i} {sym:?}: {e}"))?;
            let uc = circuit_unitary(&r.circuit).unwrap();
            let (delta, got) = extract_stage1(&uc, &u).map_err(|e| format!("target {i}: {e}"))?;
            ensure(got == sym, || format!("target {i}: wanted {sym:?}, read {got:?} (Δ = {delta:e})"))?;
            ensure(delta < 1e-2, || format!("target {i}: Δ = {delta:e} ≥ ε"))?;
            worst = worst.max(delta);
            runs += 1;
        }
    }
    Ok(format!("{runs}/{runs} recovered, max Δ {worst:.2e}"))
}

fn random_connected_graph(rng: &mut ChaCha8Rng) -> DeviceModel {
    let n = rng.random_range(2..=8);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for a in 0..n {
        for b in a + 1..n {
            if !edges.contains(&(a, b)) && rng.random_bool(0.25) {
                edges.push((a, b));
            }
        }
    }
    let edges = edges
        .into_iter()
        .map(|(a, b)| Edge::new(a, b, rng.random_range(0.001..0.05)))
        .collect();
    DeviceModel::new("random", n, edges).unwrap()
}

fn brute_force_subsets(dev: &DeviceModel, k: usize) -> Vec<Vec<usize>> {
    let n = dev.num_physical();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|&q| mask >> q & 1 == 1).collect();
        let mut seen = vec![set[0]];
        let mut frontier = vec![set[0]];
        while let Some(q) = frontier.pop() {
            for &r in &set {
                if !seen.contains(&r) && dev.are_coupled(q, r) {
                    seen.push(r);
                    frontier.push(r);
                }
            }
        }
        if seen.len() == k {
            out.push(set);
        }
    }
    out
}

fn criterion_3() -> Check {
    let dev = fakelagos_preset();
    let maps = enumerate_mappings(4, &dev);
    ensure(maps.len() == 6, || format!("{} mappings", maps.len()))?;
    let tree = MappingTree::for_device(4, &dev).map_err(|e| e.to_string())?;
    let want = ["ccc", "ccd", "cdc", "cdd", "dcc", "dcd"];
    ensure(tree.codes == want, || format!("codes {:?}", tree.codes))?;
    let c = Circuit::from_gates(4, [Gate::cx(0, 1), Gate::cx(1, 2), Gate::cx(2, 3)]).unwrap();
    for code in want {
        let (m, placed) = embed_stage2(&c, &dev, code).map_err(|e| e.to_string())?;
        let back = extract_stage2(&placed, &dev, 4).map_err(|e| e.to_string())?;
        ensure(back == code, || format!("{code} read back as {back} ({:?})", m.assignment))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for g in 0..20 {
        let d = random_connected_graph(&mut rng);
        for k in 1..=d.num_physical() {
            let mut got = connected_subsets(&d, k);
            got.iter_mut().for_each(|s| s.sort_unstable());
            got.sort();
            let mut want = brute_force_subsets(&d, k);
            want.sort();
            ensure(got == want, || format!("graph {g}, k = {k}: {} vs {} subsets", got.len(), want.len()))?;
        }
    }
    Ok("6 mappings, codes ccc..dcd, 6/6 round trips, 20 random graphs agree".into())
}

fn criterion_4() -> Check {
    let dev = fakelagos_preset();
    let cfg = PipelineConfig::default().with_shots(1);
    let mut cases = 0;
    let mut max_dev = 0.0f64;
    for c in benchmarks::all() {
        let p = Pipeline::new(&c, &dev, cfg.clone()).map_err(|e| e.to_string())?;
        for code in p.tree().codes.clone() {
            let sig = SignatureMessage::new("", code.clone(), 0).unwrap();
            let prepared = p.prepare(&sig).map_err(|e| format!("{}: {e}", c.name))?;
            let before = circuit_unitary(&prepared.routed.circuit).unwrap();
            let d0 = prepared.routed.circuit.depth();
            for e in 0..=prepared.stage3_capacity() {
                let w = embed_stage3(&prepared.routed, e).map_err(|err| err.to_string())?;
                let after = circuit_unitary(&w).unwrap();
                let diff = before.max_abs_diff(&after);
                max_dev = max_dev.max(diff);
                ensure(diff <= 1e-10, || format!("{} {code} e={e}: unitary moved by {diff:e}", c.name))?;
                let got = extract_stage3(&w);
                ensure(got == e, || format!("{} {code}: embedded {e}, read {got}", c.name))?;
                let dd = w.depth() - d0;
                ensure(dd <= e, || format!("{} {code} e={e}: depth +{dd}", c.name))?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (benchmark, code, e) cases, max unitary deviation {max_dev:.1e}"))
}

fn brute_force_ppa(c: usize, b: usize, p: f64) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << c) {
        let unsat = mask.count_ones() as usize;
        if unsat <= b {
            total += p.powi((c - unsat) as i32) * (1.0 - p).powi(unsat as i32);
        }
    }
    total
}

fn criterion_5() -> Check {
    ensure(ppa(2, 0, 0.5).unwrap() == 0.25, || "ppa(2,0,.5)".into())?;
    ensure(ppa(4, 0, 0.5).unwrap() == 0.0625, || "ppa(4,0,.5)".into())?;
    let mut worst = 0.0f64;
    for c in 0..=12 {
        for b in 0..=c {
            for p in [0.1, 0.5, 0.9] {
                let got = ppa(c, b, p).unwrap();
                let want = brute_force_ppa(c, b, p);
                let rel = (got - want).abs() / want;
                worst = worst.max(rel);
                ensure(rel <= 1e-12, || format!("ppa({c},{b},{p}) = {got} vs {want}"))?;
            }
        }
    }
    Ok(format!("closed forms exact, brute force max relative error {worst:.1e}"))
}

/// PST of one CNOT from |00⟩ under depolarizing probability `p`: the trial
/// succeeds unless a Pauli with an X or Y factor lands after the gate.
fn single_cnot_oracle(p: f64) -> f64 {
    let mut keeps = 0;
    for a in 0..4 {
        for b in 0..4 {
            if (a, b) == (0, 0) {
                continue;
            }
            // 0 = I, 1 = X, 2 = Y, 3 = Z; only I and Z leave |00⟩ in place
            if matches!(a, 0 | 3) && matches!(b, 0 | 3) {
                keeps += 1;
            }
        }
    }
    (1.0 - p) + p * keeps as f64 / 15.0
}

fn criterion_6() -> Check {
    for c in benchmarks::all() {
        let v = pst(&c, &NoiseSpec::noiseless(c.num_qubits(), 10_000, 6)).map_err(|e| e.to_string())?;
        ensure(v == 1.0, || format!("{}: noiseless PST {v}", c.name))?;
    }
    let p = 0.1;
    let dev = line_device(2, p).unwrap();
    let c = Circuit::from_gates(2, [Gate::cx(0, 1)]).unwrap();
    let spec = NoiseSpec::from_device(&dev, 10_000, 6);
    let got = pst(&c, &spec).map_err(|e| e.to_string())?;
    let want = single_cnot_oracle(p);
    let sigma = (want * (1.0 - want) / 10_000.0).sqrt();
    ensure((got - want).abs() <= 3.0 * sigma, || format!("single CNOT PST {got} vs {want} ± {:.4}", 3.0 * sigma))?;
    let again = pst(&c, &spec).unwrap();
    ensure(again == got, || "PST not reproducible".into())?;
    let decod = benchmarks::load("decod24-v2_43").unwrap();
    let p = Pipeline::new(&decod, &fakelagos_preset(), PipelineConfig::default()).map_err(|e| e.to_string())?;
    let base = p.baseline().map_err(|e| e.to_string())?;
    let noise = NoiseSpec::from_device(&fakelagos_preset(), 10_000, 9);
    let r1 = qcwm_core::noise::pst_against(&base.circuit, &noise, p.expected_output()).unwrap();
    let r2 = qcwm_core::noise::pst_against(&base.circuit, &noise, p.expected_output()).unwrap();
    ensure(r1 == r2, || "device PST not reproducible".into())?;
    Ok(format!("noiseless 6/6 = 1.0; single CNOT {got:.4} vs oracle {want:.4} (3σ {:.4}); reproducible", 3.0 * sigma))
}

fn criterion_7() -> Check {
    let dev = fakelagos_preset();
    let cfg = PipelineConfig::default().with_seed(7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut base_b = Vec::new();
    for c in benchmarks::all() {
        let p = Pipeline::new(&c, &dev, cfg.clone()).map_err(|e| e.to_string())?;
        let base = p.baseline().map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let (sig, prepared) = p.random_signature(&mut rng).map_err(|e| e.to_string())?;
            let out = p.finish(&prepared, sig.stage3_e).map_err(|e| e.to_string())?;
            let suspect = parse_qasm(&emit_qasm(&out.circuit)).map_err(|e| e.to_string())?;
            let secret = Secret {
                original: c.clone(),
                signature: sig.clone(),
                device: dev.clone(),
                config: cfg.clone(),
            };
            let v = verify(&suspect, &secret).map_err(|e| e.to_string())?;
            ensure(v.unsatisfied == 0 && v.verdict == Verdict::Match, || {
                format!("{} {sig}: b = {} ({:?})", c.name, v.unsatisfied, v.verdict)
            })?;
            let vb = verify(&base.circuit, &secret).map_err(|e| e.to_string())?;
            ensure(vb.unsatisfied >= 1, || format!("{} {sig}: baseline matched", c.name))?;
            base_b.push(vb.unsatisfied as f64 / vb.total as f64);
        }
    }
    let mean = base_b.iter().sum::<f64>() / base_b.len() as f64;
    Ok(format!("18/18 Match; baseline mean b/C = {mean:.2}"))
}

fn criterion_8() -> Check {
    let dev = fakelagos_preset();
    let cfg = PipelineConfig::default().with_seed(8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut depth, mut cnot, mut pst_drop) = (Vec::new(), Vec::new(), Vec::new());
    println!("    {:<14} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>8}", "benchmark", "depth", "wm", "cnot", "wm", "pst", "wm", "ppa");
    for c in benchmarks::all() {
        let p = Pipeline::new(&c, &dev, cfg.clone()).map_err(|e| e.to_string())?;
        let base = p.baseline().map_err(|e| e.to_string())?;
        let mut rows = Vec::new();
        for _ in 0..10 {
            let (sig, prepared) = p.random_signature(&mut rng).map_err(|e| e.to_string())?;
            let out = p.finish(&prepared, sig.stage3_e).map_err(|e| e.to_string())?;
            let d = compare_report(&base.report, &out.report).map_err(|e| e.to_string())?;
            ensure(out.report.ppa < base.report.ppa, || format!("{}: PPA {} not below {}", c.name, out.report.ppa, base.report.ppa))?;
            depth.push(d.depth_pct);
            cnot.push(d.cnot_pct);
            pst_drop.push(-100.0 * d.pst_abs);
            rows.push(out.report);
        }
        let mean = |f: &dyn Fn(&WatermarkReport) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
        println!(
            "    {:<14} {:>6} {:>6.1} {:>6} {:>6.1} {:>7.4} {:>7.4} {:>8.4}",
            c.name,
            base.report.depth,
            mean(&|r| r.depth as f64),
            base.report.cnot,
            mean(&|r| r.cnot as f64),
            base.report.pst,
            mean(&|r| r.pst),
            mean(&|r| r.ppa),
        );
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (d, x, s) = (avg(&depth), avg(&cnot), avg(&pst_drop));
    let summary = format!("mean depth {d:+.2}%, mean CNOT {x:+.2}%, mean PST drop {s:.2} pt");
    ensure(d <= 13.0, || format!("{summary}: depth overhead above 13%"))?;
    ensure(s <= 7.0, || format!("{summary}: PST drop above 7 pt"))?;
    Ok(summary)
}

fn main() {
    let criteria: [(&str, fn() -> Check, Duration); 8] = [
        ("distance oracle", criterion_1, Duration::from_secs(1)),
        ("stage-1 round trip", criterion_2, Duration::from_secs(300)),
        ("mapping enumeration", criterion_3, Duration::from_secs(10)),
        ("stage-3 identity", criterion_4, Duration::from_secs(120)),
        ("PPA closed forms", criterion_5, Duration::from_secs(5)),
        ("PST properties", criterion_6, Duration::from_secs(60)),
        ("end-to-end ownership", criterion_7, Duration::from_secs(900)),
        ("overhead trend", criterion_8, Duration::from_secs(1800)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let result = result.and_then(|detail| {
            if took > *budget {
                Err(format!("{detail}; took {took:.1?}, budget {budget:?}"))
            } else {
                Ok(detail)
            }
        });
        match result {
            Ok(detail) => println!("{id} [{name}]: PASS ({took:.2?}) {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id} [{name}]: FAIL ({took:.2?}) {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
