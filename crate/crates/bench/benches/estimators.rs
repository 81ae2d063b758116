use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use teflow::estimators::{ksg_mi, symbolic_te, KsgConfig, TeConfig};
use teflow::inference::{surrogate_test, SurrogateSpec};
use teflow::network::{centralities, estimate_te_network, DirectedWeightedGraph, NetworkSpec};
use teflow::synth::{gen_coupled_chain, gen_gaussian_pair, CoupledChainSpec};

fn chain(length: usize, seed: u64) -> teflow::synth::CoupledChain {
    gen_coupled_chain(&CoupledChainSpec {
        n_symbols: 5,
        coupling: 0.5,
        lag: 1,
        length,
        seed,
    })
    .unwrap()
}

fn bench_symbolic_te(c: &mut Criterion) {
    let mut g = c.benchmark_group("symbolic_te");
    for t in [600usize, 10_000, 50_000] {
        let ch = chain(t, 1);
        g.bench_with_input(BenchmarkId::from_parameter(t), &ch, |b, ch| {
            b.iter(|| symbolic_te(black_box(&ch.source), black_box(&ch.target), &TeConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn bench_surrogate(c: &mut Criterion) {
    let ch = chain(600, 2);
    let spec = SurrogateSpec::default();
    c.bench_function("surrogate_test/600x200", |b| {
        b.iter(|| surrogate_test(&ch.source, &ch.target, &TeConfig::default(), black_box(&spec)).unwrap())
    });
}

fn bench_ksg(c: &mut Criterion) {
    let mut g = c.benchmark_group("ksg_mi");
    g.sample_size(20);
    for n in [1_000usize, 10_000] {
        let (x, y, _) = gen_gaussian_pair(0.5, n, 3).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &(x, y), |b, (x, y)| {
            b.iter(|| ksg_mi(black_box(x), black_box(y), &KsgConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn bench_network(c: &mut Criterion) {
    let n = 10;
    let series: Vec<Vec<Option<u32>>> = (0..n)
        .map(|i| chain(600, 10 + i as u64).target.symbols.into_iter().map(Some).collect())
        .collect();
    let labels: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let spec = NetworkSpec::default();
    let mut g = c.benchmark_group("network");
    g.sample_size(10);
    g.bench_function("estimate_te_network/10x600", |b| {
        b.iter(|| estimate_te_network(black_box(&series), &labels, &spec).unwrap())
    });

    let pairs: Vec<(usize, usize)> = (0..100).flat_map(|i| [(i, (i + 1) % 100), (i, (i * 7 + 3) % 100)]).filter(|(a, b)| a != b).collect();
    let mut uniq = pairs.clone();
    uniq.sort_unstable();
    uniq.dedup();
    let graph = DirectedWeightedGraph::from_pairs(100, &uniq).unwrap();
    g.bench_function("centralities/100", |b| b.iter(|| centralities(black_box(&graph))));
    g.finish();
}

criterion_group!(benches, bench_symbolic_te, bench_surrogate, bench_ksg, bench_network);
criterion_main!(benches);
