use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use froblab_core::make_field;

fn arithmetic(c: &mut Criterion) {
    for (p, k) in [(3u64, 8u32), (2, 16), (1_000_003, 1), (5, 12)] {
        let ctx = make_field(p, k, 1).unwrap();
        let q = ctx.q();
        let xs: Vec<u64> = (0..1024u64).map(|i| (i * 2_654_435_761) % q).collect();
        let label = ctx.label();
        c.bench_function(&format!("mul {label}"), |b| {
            b.iter(|| xs.windows(2).fold(0, |acc, w| acc ^ ctx.mul_idx(black_box(w[0]), w[1])))
        });
        c.bench_function(&format!("frob {label}"), |b| {
            b.iter(|| xs.iter().fold(0, |acc, &x| acc ^ ctx.frob_idx(black_box(x))))
        });
        c.bench_function(&format!("is_square {label}"), |b| {
            b.iter(|| xs.iter().filter(|&&x| ctx.is_square_idx(black_box(x))).count())
        });
    }
}

criterion_group!(benches, arithmetic);
criterion_main!(benches);
