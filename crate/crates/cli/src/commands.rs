use std::fs;
use std::path::Path;

use aesgrad_core::aesthetics::build_aesthetic_embedding;
use aesgrad_core::clip::MiniClipWeights;
use aesgrad_core::config::{encoder_preset, RunConfig};
use aesgrad_core::corpus::PromptCorpus;
use aesgrad_core::format::{
    decode_aesc, decode_aese, decode_weights, encode_raw, load_aesthetic, load_weights, parse_csv_embeddings,
    parse_image, parse_raw_embeddings, save_aesthetic, save_scorer, save_weights, sniff, FileKind, FORMAT_VERSION,
};
use aesgrad_core::harness::{derive_seed, emit_report, run_experiment, tags, Execution, ExperimentSetup};
use aesgrad_core::{
    make_aligned_scorer, personalize as run_personalize, personalized_conditioning, similarity, Error, Result, Tensor,
};
use serde::Serialize;

use crate::{ConfigSource, EmbedArgs, ExperimentArgs, InitWeightsArgs, InspectArgs, MakeScorerArgs, PersonalizeArgs};

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

impl ConfigSource {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::preset(&self.preset)?,
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }
}

pub fn embed(args: EmbedArgs) -> Result<()> {
    let created_at = args
        .created_at
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let mut embeddings = Vec::new();
    if args.images {
        let weights = match &args.weights {
            Some(p) => load_weights(p)?,
            None => MiniClipWeights::init(encoder_preset("toy-default")?, derive_seed(args.seed, &[tags::WEIGHTS]))?,
        };
        let side = weights.config().image_side;
        for path in &args.inputs {
            let image = parse_image(&read(path)?, is_csv(path), side)?;
            embeddings.push(weights.encode_image(&image)?);
        }
    } else {
        for path in &args.inputs {
            let bytes = read(path)?;
            if is_csv(path) {
                let text =
                    String::from_utf8(bytes).map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
                embeddings.extend(parse_csv_embeddings(&text, args.dim)?);
            } else {
                let dim = args
                    .dim
                    .ok_or_else(|| Error::Input(format!("--dim is required for raw file {}", path.display())))?;
                embeddings.extend(parse_raw_embeddings(&bytes, dim)?);
            }
        }
    }
    let e = build_aesthetic_embedding(&embeddings, &args.name, &created_at)?;
    save_aesthetic(&args.out, &e)?;
    println!("K={}", e.metadata.source_count);
    println!("dim={}", e.dim());
    println!("digest={}", e.metadata.source_digest);
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct PersonalizeSummary<'a> {
    prompt: &'a str,
    epsilon: f64,
    iterations: usize,
    optimizer: aesgrad_core::Optimizer,
    similarity_initial: f64,
    similarity_final: f64,
    similarity_gain: f64,
    drift: f64,
    weights_checksum: String,
    vision_frozen: bool,
    aesthetic: &'a str,
    master_seed: u64,
}

pub fn personalize(args: PersonalizeArgs) -> Result<()> {
    let mut cfg = args.source.load()?;
    if args.weights.is_some() {
        cfg.paths.weights = args.weights.clone();
    }
    if args.aesthetic.is_some() {
        cfg.paths.aesthetic = args.aesthetic.clone();
    }
    let p = &mut cfg.personalization;
    if let Some(x) = args.epsilon {
        p.epsilon = x;
    }
    if let Some(x) = args.iters {
        p.iterations = x;
    }
    if let Some(x) = args.optimizer {
        p.optimizer = x;
    }
    if let Some(x) = args.temperature {
        p.sgld_temperature = x;
    }
    p.normalize_text_in_loss |= args.normalize_text;
    cfg.validate()?;

    let world = cfg.build_world()?;
    let pcfg = &cfg.personalization;
    let tokens = world
        .vocab
        .tokenize(&args.prompt, world.weights.config().context_length)?;
    let c = world.weights.text_conditioning(&tokens)?;
    let seed = derive_seed(cfg.master_seed, &[tags::PERSONALIZE, 0]);
    let (personal, trace) = run_personalize(&world.weights, &tokens, &world.aesthetic, pcfg, seed)?;
    let c_prime = personalized_conditioning(&personal, &tokens)?;

    let normalize = pcfg.normalize_text_in_loss;
    let before = f64::from(similarity(&c, &world.aesthetic, normalize)?);
    let after = f64::from(similarity(&c_prime, &world.aesthetic, normalize)?);

    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("c.vec"), encode_raw(c.data()))?;
    fs::write(args.out_dir.join("c_prime.vec"), encode_raw(c_prime.data()))?;
    let mut csv = String::from("step,similarity,grad_norm\n");
    for s in &trace.steps {
        let g = s.grad_norm.map(|g| g.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{g}\n", s.step, s.similarity));
    }
    fs::write(args.out_dir.join("trace.csv"), csv)?;

    let summary = PersonalizeSummary {
        prompt: &args.prompt,
        epsilon: pcfg.epsilon,
        iterations: pcfg.iterations,
        optimizer: pcfg.optimizer,
        similarity_initial: before,
        similarity_final: after,
        similarity_gain: after - before,
        drift: trace.drift,
        weights_checksum: world.weights.checksum(),
        vision_frozen: personal.vision_checksum() == world.weights.vision_checksum(),
        aesthetic: &world.aesthetic.metadata.name,
        master_seed: cfg.master_seed,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    fs::write(args.out_dir.join("summary.json"), json)?;

    println!("similarity {before:.6} -> {after:.6} (gain {:+.6})", after - before);
    println!("drift {:.6}", trace.drift);
    println!("wrote {}", args.out_dir.display());
    Ok(())
}

pub fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = args.source.load()?;
    if args.keyword.is_some() {
        cfg.experiment.keyword = args.keyword.clone();
    }
    if let Some(n) = args.seeds_per_prompt {
        cfg.experiment.seeds_per_prompt = n;
    }
    cfg.validate()?;
    let out_dir = args
        .out_dir
        .or_else(|| cfg.paths.output_dir.clone())
        .unwrap_or_else(|| "report".into());

    let world = cfg.build_world()?;
    let corpus = PromptCorpus::table();
    let setup = ExperimentSetup {
        weights: &world.weights,
        vocab: &world.vocab,
        corpus: &corpus,
        aesthetic: &world.aesthetic,
        scorer: &world.scorer,
        generator: &world.generator,
        personalization: &cfg.personalization,
        seeds_per_prompt: cfg.experiment.seeds_per_prompt,
        keyword: cfg.experiment.keyword.as_deref(),
        master_seed: cfg.master_seed,
    };
    let execution = if args.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let report = run_experiment(&setup, execution)?;
    let files = emit_report(&report, &out_dir)?;

    for s in &report.conditions {
        println!(
            "{:<13} n={:<4} mean={:.4} std={:.4} median={:.4}",
            s.condition.as_str(),
            s.scores.count,
            s.scores.mean,
            s.scores.std,
            s.scores.median
        );
    }
    let st = &report.sign_test;
    println!(
        "personalized > original on {}/{} prompts (ties {}), p={:.3e}",
        st.wins,
        report.prompts.len(),
        st.ties,
        st.p_value
    );
    if let Some(k) = &report.keyword_sign_test {
        println!(
            "keyword > original on {}/{} prompts, p={:.3e}",
            k.wins,
            report.prompts.len(),
            k.p_value
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn print_vector_stats(v: &Tensor<f32>) {
    println!("dim: {}", v.len());
    println!("‖e‖={:.6}", v.norm());
}

pub fn inspect(args: InspectArgs) -> Result<()> {
    let bytes = read(&args.path)?;
    match sniff(&bytes)? {
        FileKind::Aesthetic => {
            let e = decode_aese(&bytes, !args.no_check)?;
            println!("format: AESE (aesthetic embedding)");
            println!("version: {FORMAT_VERSION}");
            print_vector_stats(e.vector());
            println!("name: {}", e.metadata.name);
            println!("K: {}", e.metadata.source_count);
            println!("created_at: {}", e.metadata.created_at);
            println!("source_digest: {}", e.metadata.source_digest);
        }
        FileKind::Scorer => {
            let s = decode_aesc(&bytes, None)?;
            println!("format: AESC (aesthetic scorer)");
            println!("version: {FORMAT_VERSION}");
            println!("dim: {}", s.dim());
            println!("‖w‖={:.6}", s.w().norm());
            println!("bias: {}", s.bias());
            println!("name: {}", s.metadata.name);
        }
        FileKind::Weights => {
            let w = decode_weights(&bytes)?;
            let c = w.config();
            println!("format: MCLP (encoder weights)");
            println!("version: {FORMAT_VERSION}");
            println!("dim: {}", c.d_joint);
            println!(
                "config: vocab {} context {} d_model {} layers {} heads {} image {} patch {}",
                c.vocab_size, c.context_length, c.d_model, c.n_layers, c.n_heads, c.image_side, c.patch_side
            );
            println!("parameters: {}", w.parameter_count());
            println!("checksum: {}", w.checksum());
        }
    }
    Ok(())
}

pub fn init_weights(args: InitWeightsArgs) -> Result<()> {
    let cfg = encoder_preset(&args.encoder)?;
    let w = MiniClipWeights::<f32>::init(cfg, derive_seed(args.seed, &[tags::WEIGHTS]))?;
    save_weights(&args.out, &w)?;
    println!("{} parameters, checksum {}", w.parameter_count(), w.checksum());
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn make_scorer(args: MakeScorerArgs) -> Result<()> {
    let e = load_aesthetic(&args.aesthetic, true)?;
    let s = make_aligned_scorer(&e, args.gain, args.bias)?;
    save_scorer(&args.out, &s)?;
    println!("scorer {} (dim {}, bias {})", s.metadata.name, s.dim(), s.bias());
    println!("wrote {}", args.out.display());
    Ok(())
}
