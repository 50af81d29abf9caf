use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fedtriad_core::data::synth_digits;
use fedtriad_core::he::{generate_primes, CkksContext, CkksParams, NttTable};
use fedtriad_core::numerics::{local_train, Architecture, TrainSchedule};
use fedtriad_core::smc::{shamir_split, SmcConfig};
use fedtriad_core::RngStream;

fn ntt(c: &mut Criterion) {
    for n in [4096usize, 16384] {
        let p = generate_primes(&[60], n).unwrap()[0];
        let table = NttTable::new(p, n).unwrap();
        let mut rng = RngStream::new(0, "bench:ntt");
        let mut a: Vec<u64> = (0..n).map(|_| rng.below_u64(p)).collect();
        c.bench_function(&format!("ntt_forward_inverse_{n}"), |b| {
            b.iter(|| {
                table.forward(black_box(&mut a));
                table.inverse(black_box(&mut a));
            })
        });
    }
}

fn ckks_encrypt(c: &mut Criterion) {
    let ctx = CkksContext::new(CkksParams::with_degree(4096)).unwrap();
    let mut rng = RngStream::new(1, "bench:ckks");
    let keys = ctx.keygen(&mut rng);
    let values: Vec<f64> = (0..ctx.slots()).map(|_| rng.gaussian()).collect();
    c.bench_function("ckks_encrypt_4096", |b| {
        b.iter(|| ctx.encrypt_values(black_box(&values), &keys.public, &mut rng).unwrap())
    });
    let ct = ctx.encrypt_values(&values, &keys.public, &mut rng).unwrap();
    c.bench_function("ckks_decrypt_4096", |b| {
        b.iter(|| ctx.decrypt_values(black_box(&ct), &keys.secret, values.len()).unwrap())
    });
}

fn shamir(c: &mut Criterion) {
    let cfg = SmcConfig::with_shares(7);
    let mut rng = RngStream::new(2, "bench:shamir");
    let secret: Vec<u64> = (0..10_000).map(|_| rng.below_u64(cfg.prime)).collect();
    c.bench_function("shamir_split_7x10000", |b| b.iter(|| shamir_split(black_box(&secret), &cfg, &mut rng)));
}

fn training(c: &mut Criterion) {
    let data = synth_digits(400, 3).unwrap();
    let arch = Architecture::Mlp { inputs: 784, hidden: 64, classes: 10 };
    let model = arch.init(&mut RngStream::new(3, "bench:init"));
    let schedule = TrainSchedule { epochs: 1, lr: 0.1, batch_size: 64 };
    c.bench_function("local_train_mlp_400x1epoch", |b| {
        b.iter(|| local_train(&model, &arch, black_box(&data.samples), &schedule, &mut RngStream::new(4, "t"), 0).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = ntt, ckks_encrypt, shamir, training
}
criterion_main!(benches);
