//! The generate → score pipeline and the experiment report.

use aesgrad_core::aesthetics::{build_aesthetic_embedding, PersonalizationConfig};
use aesgrad_core::corpus::PromptCorpus;
use aesgrad_core::harness::{
    emit_report, run_experiment, scores_csv, toy_generate, Condition, Execution, ExperimentReport, ExperimentSetup,
    ToyGeneratorWeights, ToyWorld, WorldOptions,
};
use aesgrad_core::make_aligned_scorer;
use aesgrad_core::tensor::{l2_normalize, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(dim: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_vec((0..dim).map(|_| StandardNormal.sample(rng)).collect())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn generated_scores_track_conditioning_alignment() {
    let dim = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let e = build_aesthetic_embedding(&[gaussian(dim, &mut rng)], "e", "t").unwrap();
    let scorer = make_aligned_scorer(&e, 4.0, 5.0).unwrap();
    let gen = ToyGeneratorWeights::<f64>::init(dim, 0.05, 4).unwrap();
    let (mut alignment, mut scores) = (Vec::new(), Vec::new());
    for i in 0..100u64 {
        let c = l2_normalize(&gaussian(dim, &mut rng)).unwrap();
        alignment.push(aesgrad_core::tensor::dot(&c, e.vector()).unwrap());
        scores.push(scorer.score(&toy_generate(&c, &gen, i).unwrap()).unwrap());
    }
    let rho = spearman(&alignment, &scores);
    assert!(rho > 0.5, "spearman {rho}");
}

#[test]
fn aligned_scorer_centres_on_its_bias() {
    let dim = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let e = build_aesthetic_embedding(&[gaussian(dim, &mut rng)], "e", "t").unwrap();
    let b = 5.0;
    let scorer = make_aligned_scorer(&e, 4.0, b).unwrap();
    let n = 4000;
    let scores: Vec<f64> = (0..n)
        .map(|_| scorer.score(&l2_normalize(&gaussian(dim, &mut rng)).unwrap()).unwrap())
        .collect();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se = sd / (n as f64).sqrt();
    assert!((mean - b).abs() < 3.0 * se, "mean {mean}, se {se}");
}

struct Fixture {
    world: ToyWorld<f32>,
    corpus: PromptCorpus,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            world: ToyWorld::build(&WorldOptions::default(), 0).unwrap(),
            corpus: PromptCorpus::table(),
        }
    }

    fn run(&self, pcfg: &PersonalizationConfig, keyword: Option<&str>, exec: Execution) -> ExperimentReport {
        let setup = ExperimentSetup {
            weights: &self.world.weights,
            vocab: &self.world.vocab,
            corpus: &self.corpus,
            aesthetic: &self.world.aesthetic,
            scorer: &self.world.scorer,
            generator: &self.world.generator,
            personalization: pcfg,
            seeds_per_prompt: 4,
            keyword,
            master_seed: 0,
        };
        run_experiment(&setup, exec).unwrap()
    }
}

#[test]
fn report_is_complete_and_execution_independent() {
    let fx = Fixture::new();
    let pcfg = PersonalizationConfig::default();
    let serial = fx.run(&pcfg, Some("aivazovsky"), Execution::Serial);
    let parallel = fx.run(&pcfg, Some("aivazovsky"), Execution::Parallel);
    assert_eq!(serial, parallel);

    let prompts = fx.corpus.len();
    assert_eq!(serial.generations.len(), prompts * 3 * 4);
    assert_eq!(serial.prompts.len(), prompts);
    assert_eq!(serial.conditions.len(), 3);
    for c in [Condition::Original, Condition::Personalized, Condition::Keyword] {
        let s = serial.condition(c).unwrap();
        assert_eq!(s.scores.count, prompts * 4);
        assert!(s.scores.mean.is_finite() && s.scores.std >= 0.0);
    }
    assert!(serial.vision_frozen);
    let st = &serial.sign_test;
    assert_eq!(st.wins + st.losses + st.ties, prompts);
    assert!((0.0..=1.0).contains(&st.p_value));

    let csv = scores_csv(&serial).unwrap();
    assert_eq!(csv.lines().count(), prompts * 3 * 4 + 1);
}

#[test]
fn original_scores_do_not_depend_on_personalization() {
    let fx = Fixture::new();
    let a = fx.run(&PersonalizationConfig::default(), None, Execution::Parallel);
    let b = fx.run(
        &PersonalizationConfig {
            epsilon: 3e-4,
            iterations: 4,
            ..Default::default()
        },
        Some("glowwave"),
        Execution::Parallel,
    );
    assert_eq!(a.scores(Condition::Original), b.scores(Condition::Original));
    assert_ne!(a.scores(Condition::Personalized), b.scores(Condition::Personalized));
}

#[test]
fn emitted_files_are_stable_and_well_formed() {
    let fx = Fixture::new();
    let report = fx.run(
        &PersonalizationConfig::default(),
        Some("cloudcore"),
        Execution::Parallel,
    );
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = emit_report(&report, a.path()).unwrap();
    let again = fx.run(&PersonalizationConfig::default(), Some("cloudcore"), Execution::Serial);
    let files_b = emit_report(&again, b.path()).unwrap();
    assert_eq!(files_a.len(), 3);
    for (x, y) in files_a.iter().zip(&files_b) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }

    let svg = std::fs::read_to_string(a.path().join("histogram.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let groups: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("g"))
        .filter_map(|n| n.attribute("class"))
        .collect();
    assert_eq!(groups, ["original", "personalized", "keyword"]);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["prompts"].as_array().unwrap().len(), fx.corpus.len());
    assert_eq!(summary["config"]["seeds_per_prompt"], 4);
    assert!(summary["sign_test"]["p_value"].is_number());
}
