use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use num_complex::Complex64;
use renorm_bench::small_config;
use renorm_core::renorm::BlockEngine;
use renorm_core::tuple::enumerate_tuples;
use renorm_core::{Model, SignatureString};

fn blocks(c: &mut Criterion) {
    let model = Model::new(&small_config()).unwrap();
    let z = Complex64::new(-2.0, 0.3);
    let mut group = c.benchmark_group("block");
    for s in ["ab,a*b*", "ab,ab*,a*b,a*b*", "ab,ab,a*b*,a*b*"] {
        let s: SignatureString = s.parse().unwrap();
        // A fresh engine per iteration so the block cache starts empty.
        group.bench_function(s.to_string(), |b| {
            b.iter_batched(
                || BlockEngine::new(model.clone()),
                |engine| black_box(engine.block(&s, z).unwrap()),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();

    c.bench_function("summands n=2 k=4 (warm cache)", |b| {
        let engine = BlockEngine::new(model.clone());
        let tuples = enumerate_tuples(2, 4).unwrap();
        b.iter(|| {
            for t in &tuples {
                black_box(engine.summand(t, z).unwrap());
            }
        })
    });

    c.bench_function("counter-terms to order 4", |b| {
        b.iter_batched(
            || BlockEngine::new(model.clone()),
            |engine| black_box(engine.self_energy_by_order(4).unwrap()),
            BatchSize::SmallInput,
        )
    });

    c.bench_function("direct resolvent N=2", |b| {
        let engine = BlockEngine::new(model.clone());
        b.iter(|| black_box(engine.direct_resolvent(2, z).unwrap()))
    });
}

criterion_group!(benches, blocks);
criterion_main!(benches);
