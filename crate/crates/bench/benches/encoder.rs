use std::hint::black_box;

use aesgrad_core::aesthetics::{personalize, PersonalizationConfig};
use aesgrad_core::autodiff::Graph;
use aesgrad_core::clip::{encode_text, EncoderConfig};
use aesgrad_core::corpus::PromptCorpus;
use aesgrad_core::harness::{
    run_experiment, synthetic_images, Execution, ExperimentSetup, ToyWorld, TrialInstance, WorldOptions,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn text_tower(c: &mut Criterion) {
    let inst = TrialInstance::<f32>::new(EncoderConfig::toy_default(), 0).unwrap();
    let mut group = c.benchmark_group("text_tower");
    group.bench_function("forward", |b| {
        b.iter(|| inst.weights.text_conditioning(black_box(&inst.tokens)).unwrap())
    });
    group.bench_function("forward_backward", |b| {
        b.iter(|| {
            let (_, rec) = encode_text(&inst.weights, black_box(&inst.tokens)).unwrap();
            let mut graph: Graph<f32> = rec.graph;
            let e = graph.constant(inst.aesthetic.vector().clone());
            let obj = graph.dot(rec.conditioning, e).unwrap();
            graph.backward(obj).unwrap()
        })
    });
    group.finish();
}

fn vision_tower(c: &mut Criterion) {
    let inst = TrialInstance::<f32>::new(EncoderConfig::toy_default(), 0).unwrap();
    let image = synthetic_images(inst.weights.config(), 1, 3).remove(0);
    c.bench_function("vision_tower/encode_image", |b| {
        b.iter(|| inst.weights.encode_image(black_box(&image)).unwrap())
    });
}

fn personalization(c: &mut Criterion) {
    let inst = TrialInstance::<f32>::new(EncoderConfig::toy_default(), 0).unwrap();
    let mut group = c.benchmark_group("personalize");
    group.sample_size(20);
    for iterations in [1usize, 10] {
        let cfg = PersonalizationConfig {
            iterations,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(iterations), &cfg, |b, cfg| {
            b.iter(|| personalize(&inst.weights, &inst.tokens, &inst.aesthetic, cfg, 0).unwrap())
        });
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let world = ToyWorld::<f32>::build(&WorldOptions::default(), 0).unwrap();
    let corpus = PromptCorpus::table();
    let pcfg = PersonalizationConfig::default();
    let setup = ExperimentSetup {
        weights: &world.weights,
        vocab: &world.vocab,
        corpus: &corpus,
        aesthetic: &world.aesthetic,
        scorer: &world.scorer,
        generator: &world.generator,
        personalization: &pcfg,
        seeds_per_prompt: 6,
        keyword: None,
        master_seed: 0,
    };
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    for (name, exec) in [("serial", Execution::Serial), ("parallel", Execution::Parallel)] {
        group.bench_function(name, |b| b.iter(|| run_experiment(&setup, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, text_tower, vision_tower, personalization, experiment);
criterion_main!(benches);
