use criterion::{criterion_group, criterion_main, Criterion};
use qcwm_bench::{circuit, haar, lagos};
use qcwm_core::noise::{pst, NoiseSpec};
use qcwm_core::synth::{embed_stage1, synthesize};
use qcwm_core::{Pipeline, PipelineConfig, SignatureMessage, Stage1Symbol, SynthesisConfig};

fn synthesis(c: &mut Criterion) {
    let u = haar(2, 7);
    let cfg = SynthesisConfig::default();
    c.bench_function("synthesize 2q haar", |b| b.iter(|| synthesize(&u, &cfg).unwrap()));
    c.bench_function("embed stage1 2q haar", |b| {
        b.iter(|| embed_stage1(&u, Stage1Symbol::A, &cfg).unwrap())
    });
}

fn pipeline(c: &mut Criterion) {
    let source = circuit("fredkin_n3");
    let dev = lagos();
    let config = PipelineConfig::default().with_shots(1000);
    let sig = SignatureMessage::empty();
    let mut group = c.benchmark_group("fredkin_n3");
    group.sample_size(10);
    group.bench_function("embed", |b| {
        b.iter(|| {
            Pipeline::new(&source, &dev, config.clone())
                .unwrap()
                .embed(&sig)
                .unwrap()
        })
    });
    let routed = Pipeline::new(&source, &dev, config.clone())
        .unwrap()
        .embed(&sig)
        .unwrap()
        .circuit;
    let noise = NoiseSpec::from_device(&dev, 1000, 0);
    group.bench_function("pst 1000 shots", |b| b.iter(|| pst(&routed, &noise).unwrap()));
    group.finish();
}

criterion_group!(benches, synthesis, pipeline);
criterion_main!(benches);
