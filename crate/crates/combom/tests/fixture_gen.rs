//! Regenerates the committed fixtures: the replay cache, the recorded
//! replay metrics, and the enumerated true fronts for the synthetic
//! problems. Run manually after changing prompt rendering or the fixture
//! datasets:
//!
//! ```text
//! cargo test -p combom --test fixture_gen -- --ignored
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use combom::config::{ReplayExpectation, ReplayFixture};
use combom::core::SubsetMask;
use combom::eval::{evaluate_mask, EvalConfig, ExemplarPool};
use combom::llm::{
    load_instances, render_prompt, CacheKeyFields, Instance, ResponseCache, SamplingBackend,
    SamplingParams, OPTION_LETTERS,
};
use combom::problems::{SyntheticFamily, SyntheticProblem, TrueFrontFixture};

const FIXTURE_MASKS: [&str; 3] = ["000000", "101001", "111111"];
const FIXTURE_SAMPLES: usize = 8;

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture_sampling() -> SamplingParams {
    SamplingParams {
        n_samples: FIXTURE_SAMPLES,
        model_name: "fixture-model".into(),
        ..SamplingParams::default()
    }
}

fn fixture_eval_config() -> EvalConfig {
    EvalConfig {
        n_bins: 10,
        domain: "elementary arithmetic".into(),
        sampling: fixture_sampling(),
    }
}

/// Deterministic pseudo-model: the chance of answering correctly grows with
/// the number of selected exemplars, with per-instance variation; the
/// surface form of each answer cycles through the parseable variants and an
/// occasional unparseable one.
fn synth_completion(mask: &SubsetMask, inst: &Instance, sample: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(mask.to_bitstring().as_bytes());
    hasher.update(inst.id.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha12Rng::from_seed(seed);

    let density = mask.count_ones() as f64 / mask.dim() as f64;
    let wobble: f64 = rng.random_range(-0.22..0.22);
    let p_correct = (0.34 + 0.38 * density + wobble).clamp(0.05, 0.95);

    // Per-sample stream so adding samples never reshuffles earlier ones.
    let mut sample_rng = ChaCha12Rng::from_seed({
        let mut h = Sha256::new();
        h.update(seed);
        h.update((sample as u64).to_le_bytes());
        let d = h.finalize();
        let mut s = [0u8; 32];
        s.copy_from_slice(&d);
        s
    });

    if sample_rng.random::<f64>() < 0.04 {
        return "I am not sure about this one.".to_string();
    }
    let letter = if sample_rng.random::<f64>() < p_correct {
        inst.answer
    } else {
        let wrong: Vec<char> = OPTION_LETTERS[..inst.options.len()]
            .iter()
            .copied()
            .filter(|&c| c != inst.answer)
            .collect();
        wrong[sample_rng.random_range(0..wrong.len())]
    };
    match sample % 4 {
        0 => format!("({letter})"),
        1 => format!("{letter}"),
        2 => format!("The answer is: {letter}"),
        _ => format!("{letter}."),
    }
}

#[test]
#[ignore = "regenerates committed fixtures in the source tree"]
fn regenerate_fixtures() {
    let dir = fixtures_dir();
    let pool_instances = load_instances(&dir.join("datasets/arith_pool.jsonl")).unwrap();
    let format_exemplar = load_instances(&dir.join("datasets/arith_format.jsonl"))
        .unwrap()
        .remove(0);
    let valset = load_instances(&dir.join("datasets/arith_val.jsonl")).unwrap();
    let pool = ExemplarPool {
        pool: pool_instances,
        format_exemplar,
    };
    let cfg = fixture_eval_config();

    // Rebuild the replay cache from scratch.
    let cache_dir = dir.join("replay_cache");
    if cache_dir.exists() {
        std::fs::remove_dir_all(&cache_dir).unwrap();
    }
    let cache = ResponseCache::new(&cache_dir);
    for mask_bits in FIXTURE_MASKS {
        let mask = SubsetMask::from_bitstring(mask_bits).unwrap();
        let exemplars = pool.select(&mask).unwrap();
        for inst in &valset {
            let prompt = render_prompt(
                &inst.question,
                &inst.options,
                &exemplars,
                &pool.format_exemplar,
                &cfg.domain,
            )
            .unwrap();
            for sample in 0..cfg.sampling.n_samples {
                let fields = CacheKeyFields::new(&prompt, &cfg.sampling, sample);
                cache
                    .write(&fields, &synth_completion(&mask, inst, sample))
                    .unwrap();
            }
        }
    }

    // Record the metrics the replay pipeline produces for each mask.
    let backend = SamplingBackend::replay(ResponseCache::new(&cache_dir));
    let mut entries = Vec::new();
    for mask_bits in FIXTURE_MASKS {
        let mask = SubsetMask::from_bitstring(mask_bits).unwrap();
        let (value, _) = evaluate_mask(&mask, &valset, &pool, &backend, &cfg).unwrap();
        entries.push(ReplayExpectation {
            mask: mask_bits.to_string(),
            acc: value.acc(),
            ece: value.ece(),
        });
    }
    std::fs::write(
        dir.join("replay_expected.json"),
        serde_json::to_string_pretty(&ReplayFixture { entries }).unwrap(),
    )
    .unwrap();

    // Enumerated true fronts for the shipped synthetic problems.
    let fronts_dir = dir.join("true_fronts");
    std::fs::create_dir_all(&fronts_dir).unwrap();
    for (family, seed, name) in [
        (SyntheticFamily::P1, 101u64, "p1_m10.json"),
        (SyntheticFamily::P2, 102, "p2_m10.json"),
        (SyntheticFamily::P3, 103, "p3_m10.json"),
    ] {
        let problem = SyntheticProblem::new(family, 10, seed, 0.0).unwrap();
        let fixture = TrueFrontFixture::from_problem(&problem).unwrap();
        std::fs::write(
            fronts_dir.join(name),
            serde_json::to_string_pretty(&fixture).unwrap(),
        )
        .unwrap();
    }

    println!("fixtures regenerated under {}", dir.display());
}
