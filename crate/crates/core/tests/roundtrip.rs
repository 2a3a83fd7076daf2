use qcwm_core::device::fakelagos_preset;
use qcwm_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn secret(c: &Circuit, sig: &SignatureMessage, cfg: &PipelineConfig) -> Secret {
    Secret {
        original: c.clone(),
        signature: sig.clone(),
        device: fakelagos_preset(),
        config: cfg.clone(),
    }
}

#[test]
fn every_benchmark_round_trips() {
    let dev = fakelagos_preset();
    let cfg = PipelineConfig::default().with_seed(11).with_shots(2000);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for c in benchmarks::all() {
        let p = Pipeline::new(&c, &dev, cfg.clone()).unwrap();
        let base = p.baseline().unwrap();
        for _ in 0..3 {
            let (sig, prepared) = p.random_signature(&mut rng).unwrap();
            let out = p.finish(&prepared, sig.stage3_e).unwrap();
            let suspect = parse_qasm(&emit_qasm(&out.circuit)).unwrap();
            let s = secret(&c, &sig, &cfg);
            let v = verify(&suspect, &s).unwrap();
            assert_eq!(v.verdict, Verdict::Match, "{} {sig}: {v:#?}", c.name);
            assert_eq!(v.unsatisfied, 0);
            let vb = verify(&base.circuit, &s).unwrap();
            assert!(vb.unsatisfied >= 1, "{} {sig}: baseline matched fully", c.name);
        }
    }
}
