//! Objective evaluation: turn M sampled completions per validation instance
//! into per-instance confidence/correctness, then aggregate accuracy and
//! expected calibration error.
//!
//! Clustering is instantiated as option-letter equality for multiple-choice
//! tasks. The equivalence rule is a parameter so richer semantic rules can
//! slot in later; unparseable samples form singleton invalid clusters that
//! can only be predicted when every sample is invalid.

use serde::{Deserialize, Serialize};

use crate::core::{ObjectiveValue, SubsetMask};
use crate::error::{Error, Result};
use crate::llm::{extract_answer, render_prompt, AnswerLabel, Instance, SamplingBackend, SamplingParams};

/// Maps a raw sample to a cluster label. Samples with equal `Valid` labels
/// share a cluster; `Invalid` samples never merge.
pub trait EquivalenceRule {
    fn label(&self, sample: &str) -> ClusterLabel;
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ClusterLabel {
    Valid(String),
    Invalid,
}

/// Option-letter equality: the multiple-choice instantiation of semantic
/// clustering.
#[derive(Clone, Copy, Debug, Default)]
pub struct OptionLetterRule;

impl EquivalenceRule for OptionLetterRule {
    fn label(&self, sample: &str) -> ClusterLabel {
        match extract_answer(sample) {
            AnswerLabel::Option(c) => ClusterLabel::Valid(c.to_string()),
            AnswerLabel::Invalid => ClusterLabel::Invalid,
        }
    }
}

/// One cluster: its label and the sample indices it holds, in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub label: ClusterLabel,
    pub indices: Vec<usize>,
}

/// Partition samples by the equivalence rule. Clusters are ordered by their
/// earliest sample index; invalid samples stay singletons.
pub fn cluster_samples<R: EquivalenceRule>(samples: &[String], rule: &R) -> Result<Vec<Cluster>> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples to cluster".into()));
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        match rule.label(sample) {
            ClusterLabel::Invalid => clusters.push(Cluster {
                label: ClusterLabel::Invalid,
                indices: vec![i],
            }),
            label => match clusters.iter_mut().find(|c| c.label == label) {
                Some(cluster) => cluster.indices.push(i),
                None => clusters.push(Cluster {
                    label,
                    indices: vec![i],
                }),
            },
        }
    }
    Ok(clusters)
}

/// Predicted label and self-consistency confidence: largest cluster wins,
/// size ties break on the earliest sample index, invalid clusters lose to
/// any valid cluster.
pub fn confidence_and_answer(clusters: &[Cluster], m: usize) -> Result<(ClusterLabel, f64)> {
    if clusters.is_empty() || m == 0 {
        return Err(Error::InvalidParameter("empty clustering".into()));
    }
    let covered: usize = clusters.iter().map(|c| c.indices.len()).sum();
    if covered != m {
        return Err(Error::InvalidParameter(format!(
            "clusters cover {covered} samples, expected {m}"
        )));
    }
    let pick = |cs: &[Cluster]| -> Option<(ClusterLabel, usize)> {
        let mut best: Option<(&Cluster, usize)> = None;
        for c in cs {
            let size = c.indices.len();
            let first = c.indices[0];
            let better = match &best {
                None => true,
                Some((b, _)) => {
                    size > b.indices.len() || (size == b.indices.len() && first < b.indices[0])
                }
            };
            if better {
                best = Some((c, size));
            }
        }
        best.map(|(c, s)| (c.label.clone(), s))
    };
    let valid: Vec<Cluster> = clusters
        .iter()
        .filter(|c| c.label != ClusterLabel::Invalid)
        .cloned()
        .collect();
    let (label, size) = if valid.is_empty() {
        pick(clusters).expect("non-empty clusters")
    } else {
        pick(&valid).expect("non-empty valid clusters")
    };
    Ok((label, size as f64 / m as f64))
}

/// Per-instance evaluation record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceResult {
    pub query_id: String,
    pub samples: Vec<String>,
    /// Partition of the sample indices, clusters in first-occurrence order.
    pub clusters: Vec<Vec<usize>>,
    pub predicted: String,
    pub confidence: f64,
    pub correct: bool,
}

/// One calibration bin: count, mean confidence, mean accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub count: usize,
    pub mean_confidence: f64,
    pub mean_accuracy: f64,
}

/// Equal-width binning of `(confidence, correct)` pairs over `(0, 1]`, with
/// confidence 0 folded into the first bin.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BinTable {
    pub k: usize,
    pub bins: Vec<BinRecord>,
    pub total: usize,
}

/// Bin index for a confidence: bins are `((k-1)/K, k/K]`, zero goes to bin 1.
fn bin_index(confidence: f64, k: usize) -> usize {
    if confidence <= 0.0 {
        return 0;
    }
    let idx = (confidence * k as f64).ceil() as usize;
    idx.saturating_sub(1).min(k - 1)
}

impl BinTable {
    pub fn build(pairs: &[(f64, bool)], k: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyValidationSet);
        }
        if k == 0 {
            return Err(Error::InvalidParameter("bin count must be >= 1".into()));
        }
        for &(c, _) in pairs {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidParameter(format!(
                    "confidence {c} outside [0, 1]"
                )));
            }
        }
        let mut counts = vec![0usize; k];
        let mut conf_sums = vec![0.0f64; k];
        let mut acc_sums = vec![0.0f64; k];
        for &(c, correct) in pairs {
            let b = bin_index(c, k);
            counts[b] += 1;
            conf_sums[b] += c;
            acc_sums[b] += if correct { 1.0 } else { 0.0 };
        }
        let bins = (0..k)
            .map(|b| BinRecord {
                count: counts[b],
                mean_confidence: if counts[b] > 0 {
                    conf_sums[b] / counts[b] as f64
                } else {
                    0.0
                },
                mean_accuracy: if counts[b] > 0 {
                    acc_sums[b] / counts[b] as f64
                } else {
                    0.0
                },
            })
            .collect();
        Ok(Self {
            k,
            bins,
            total: pairs.len(),
        })
    }

    /// Weighted average absolute confidence/accuracy gap over the bins.
    pub fn ece(&self) -> f64 {
        self.bins
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| {
                (b.count as f64 / self.total as f64)
                    * (b.mean_accuracy - b.mean_confidence).abs()
            })
            .sum()
    }
}

/// Expected calibration error over `(confidence, correct)` pairs with K
/// equal-width bins.
pub fn expected_calibration_error(pairs: &[(f64, bool)], k: usize) -> Result<f64> {
    Ok(BinTable::build(pairs, k)?.ece())
}

/// Full evaluation artifact behind one objective observation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub ece: f64,
    pub instances: Vec<InstanceResult>,
    pub bins: BinTable,
}

impl EvalReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// Evaluation controls: calibration bins and the prompt domain string.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_bins: usize,
    pub domain: String,
    pub sampling: SamplingParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_bins: 10,
            domain: "general knowledge".into(),
            sampling: SamplingParams::default(),
        }
    }
}

/// The exemplar pool plus the reserved format exemplar, which is always in
/// the prompt and never part of the searchable pool.
#[derive(Clone, Debug)]
pub struct ExemplarPool {
    pub pool: Vec<Instance>,
    pub format_exemplar: Instance,
}

impl ExemplarPool {
    pub fn size(&self) -> usize {
        self.pool.len()
    }

    /// Exemplars selected by the mask, ascending pool index.
    pub fn select(&self, mask: &SubsetMask) -> Result<Vec<&Instance>> {
        if mask.dim() != self.pool.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pool.len(),
                got: mask.dim(),
            });
        }
        Ok(mask.selected_indices().into_iter().map(|j| &self.pool[j]).collect())
    }
}

/// Evaluate one mask over the validation set: render the prompt per
/// instance, draw the configured number of samples, cluster, score, and
/// aggregate. Instances run in dataset order; a generator failure aborts the
/// evaluation carrying the failing instance id.
pub fn evaluate_mask(
    mask: &SubsetMask,
    valset: &[Instance],
    pool: &ExemplarPool,
    backend: &SamplingBackend,
    cfg: &EvalConfig,
) -> Result<(ObjectiveValue, EvalReport)> {
    if valset.is_empty() {
        return Err(Error::EmptyValidationSet);
    }
    let exemplars = pool.select(mask)?;
    let rule = OptionLetterRule;
    let m = cfg.sampling.n_samples;

    let mut instances = Vec::with_capacity(valset.len());
    let mut pairs = Vec::with_capacity(valset.len());
    for inst in valset {
        let prompt = render_prompt(
            &inst.question,
            &inst.options,
            &exemplars,
            &pool.format_exemplar,
            &cfg.domain,
        )?;
        let samples = backend
            .sample_completions(&prompt, &cfg.sampling)
            .map_err(|e| Error::EvalFailure {
                query_id: inst.id.clone(),
                detail: e.to_string(),
            })?;
        let clusters = cluster_samples(&samples, &rule)?;
        let (label, confidence) = confidence_and_answer(&clusters, m)?;
        let predicted = match &label {
            ClusterLabel::Valid(s) => s.clone(),
            ClusterLabel::Invalid => "INVALID".to_string(),
        };
        let correct = matches!(&label, ClusterLabel::Valid(s) if s.starts_with(inst.answer));
        pairs.push((confidence, correct));
        instances.push(InstanceResult {
            query_id: inst.id.clone(),
            samples,
            clusters: clusters.iter().map(|c| c.indices.clone()).collect(),
            predicted,
            confidence,
            correct,
        });
    }

    let acc = instances.iter().filter(|i| i.correct).count() as f64 / instances.len() as f64;
    let bins = BinTable::build(&pairs, cfg.n_bins)?;
    let ece = bins.ece();
    let value = ObjectiveValue::from_acc_ece(acc, ece)?;
    Ok((
        value,
        EvalReport {
            acc,
            ece,
            instances,
            bins,
        },
    ))
}

/// LLM-backed problem: the objective of the real campaign. Deterministic in
/// replay mode; the wall time is the measured evaluation cost.
pub struct LlmProblem {
    pub valset: Vec<Instance>,
    pub pool: ExemplarPool,
    pub backend: SamplingBackend,
    pub cfg: EvalConfig,
}

impl LlmProblem {
    /// Evaluate and keep the full report.
    pub fn evaluate_with_report(
        &self,
        mask: &SubsetMask,
    ) -> Result<(ObjectiveValue, EvalReport)> {
        evaluate_mask(mask, &self.valset, &self.pool, &self.backend, &self.cfg)
    }
}

impl crate::problems::Problem for LlmProblem {
    fn dim(&self) -> usize {
        self.pool.size()
    }

    fn evaluate(
        &self,
        mask: &SubsetMask,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<crate::problems::Evaluation> {
        let start = std::time::Instant::now();
        let (value, _) = self.evaluate_with_report(mask)?;
        Ok(crate::problems::Evaluation {
            value,
            wall_ms: start.elapsed().as_millis() as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{CacheKeyFields, ResponseCache};

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn clustering_identical_labels() {
        let clusters = cluster_samples(&strs(&["A", "A", "A", "A"]), &OptionLetterRule).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn clustering_uses_letter_extraction() {
        let clusters =
            cluster_samples(&strs(&["(A)", "A.", "B", "A"]), &OptionLetterRule).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].label, ClusterLabel::Valid("A".into()));
        assert_eq!(clusters[0].indices, vec![0, 1, 3]);
        assert_eq!(clusters[1].label, ClusterLabel::Valid("B".into()));
        assert_eq!(clusters[1].indices, vec![2]);
    }

    #[test]
    fn clustering_all_invalid_predicts_first_singleton() {
        let clusters = cluster_samples(&strs(&["??", "??"]), &OptionLetterRule).unwrap();
        assert_eq!(clusters.len(), 2);
        let (label, conf) = confidence_and_answer(&clusters, 2).unwrap();
        assert_eq!(label, ClusterLabel::Invalid);
        assert_eq!(conf, 0.5);
    }

    #[test]
    fn invalid_never_beats_a_valid_cluster() {
        let clusters =
            cluster_samples(&strs(&["??", "!!", "not sure", "B"]), &OptionLetterRule).unwrap();
        let (label, conf) = confidence_and_answer(&clusters, 4).unwrap();
        assert_eq!(label, ClusterLabel::Valid("B".into()));
        assert_eq!(conf, 0.25);
    }

    #[test]
    fn confidence_examples() {
        // All same label.
        let clusters = cluster_samples(&vec!["C".to_string(); 16], &OptionLetterRule).unwrap();
        let (_, conf) = confidence_and_answer(&clusters, 16).unwrap();
        assert_eq!(conf, 1.0);

        // 8-8 tie: earliest-index cluster wins.
        let mut samples = vec!["B".to_string(); 8];
        samples.extend(vec!["A".to_string(); 8]);
        samples.swap(0, 8); // A appears first now
        let clusters = cluster_samples(&samples, &OptionLetterRule).unwrap();
        let (label, conf) = confidence_and_answer(&clusters, 16).unwrap();
        assert_eq!(label, ClusterLabel::Valid("A".into()));
        assert_eq!(conf, 0.5);

        // Sizes {7, 6, 3} over 16.
        let mut samples = vec!["A".to_string(); 7];
        samples.extend(vec!["B".to_string(); 6]);
        samples.extend(vec!["C".to_string(); 3]);
        let clusters = cluster_samples(&samples, &OptionLetterRule).unwrap();
        let (label, conf) = confidence_and_answer(&clusters, 16).unwrap();
        assert_eq!(label, ClusterLabel::Valid("A".into()));
        assert_eq!(conf, 7.0 / 16.0);
    }

    /// Straightforward per-bin averaging, written independently of BinTable.
    fn ece_oracle(pairs: &[(f64, bool)], k: usize) -> f64 {
        let mut total = 0.0;
        for b in 1..=k {
            let lo = (b as f64 - 1.0) / k as f64;
            let hi = b as f64 / k as f64;
            let members: Vec<&(f64, bool)> = pairs
                .iter()
                .filter(|(c, _)| {
                    if b == 1 {
                        *c <= hi
                    } else {
                        *c > lo && *c <= hi
                    }
                })
                .collect();
            if members.is_empty() {
                continue;
            }
            let conf: f64 =
                members.iter().map(|(c, _)| c).sum::<f64>() / members.len() as f64;
            let acc: f64 = members.iter().filter(|(_, ok)| *ok).count() as f64
                / members.len() as f64;
            total += members.len() as f64 / pairs.len() as f64 * (acc - conf).abs();
        }
        total
    }

    #[test]
    fn ece_closed_form_cases() {
        let perfect: Vec<(f64, bool)> = (0..10).map(|_| (1.0, true)).collect();
        assert_eq!(expected_calibration_error(&perfect, 10).unwrap(), 0.0);

        let overconfident = vec![(0.9, false), (0.9, false)];
        let e = expected_calibration_error(&overconfident, 10).unwrap();
        assert!((e - 0.9).abs() < 1e-15);

        assert!(matches!(
            expected_calibration_error(&[], 10),
            Err(Error::EmptyValidationSet)
        ));
        assert!(expected_calibration_error(&[(1.2, true)], 10).is_err());
    }

    #[test]
    fn ece_matches_hand_binning_oracle_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(14);
        for _ in 0..10 {
            let pairs: Vec<(f64, bool)> = (0..200)
                .map(|_| (rng.random::<f64>(), rng.random::<bool>()))
                .collect();
            let ours = expected_calibration_error(&pairs, 10).unwrap();
            let oracle = ece_oracle(&pairs, 10);
            assert!((ours - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn ece_edge_binning_and_weighting_invariances() {
        // Confidence 0 folds into bin 1; bin edges are right-inclusive.
        assert_eq!(bin_index(0.0, 10), 0);
        assert_eq!(bin_index(0.05, 10), 0);
        assert_eq!(bin_index(0.1, 10), 0);
        assert_eq!(bin_index(0.1000001, 10), 1);
        assert_eq!(bin_index(1.0, 10), 9);

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(15);
        let pairs: Vec<(f64, bool)> = (0..50)
            .map(|_| (rng.random::<f64>(), rng.random::<bool>()))
            .collect();
        let base = expected_calibration_error(&pairs, 10).unwrap();

        // Duplicating every pair leaves the ece unchanged.
        let mut doubled = pairs.clone();
        doubled.extend(pairs.iter().copied());
        let dup = expected_calibration_error(&doubled, 10).unwrap();
        assert!((base - dup).abs() < 1e-12);

        // Permutation invariance (up to summation-order rounding).
        let mut reversed = pairs.clone();
        reversed.reverse();
        let rev = expected_calibration_error(&reversed, 10).unwrap();
        assert!((rev - base).abs() < 1e-12);

        // If every confidence is 1, ece = 1 - acc exactly.
        let all_sure: Vec<(f64, bool)> = (0..40).map(|i| (1.0, i % 3 == 0)).collect();
        let acc = all_sure.iter().filter(|(_, ok)| *ok).count() as f64 / 40.0;
        let e = expected_calibration_error(&all_sure, 10).unwrap();
        assert!((e - (1.0 - acc)).abs() < 1e-15);
    }

    fn pool_with(m: usize) -> ExemplarPool {
        let instance = |id: &str, q: &str, answer: char| Instance {
            id: id.into(),
            question: q.into(),
            options: vec!["yes".into(), "no".into(), "maybe".into()],
            answer,
        };
        ExemplarPool {
            pool: (0..m)
                .map(|i| instance(&format!("pool{i}"), &format!("Pool question {i}?"), 'A'))
                .collect(),
            format_exemplar: instance("fmt", "Format question?", 'B'),
        }
    }

    fn seeded_backend(
        valset: &[Instance],
        pool: &ExemplarPool,
        mask: &SubsetMask,
        cfg: &EvalConfig,
        answers: impl Fn(&Instance, usize) -> String,
    ) -> SamplingBackend {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.keep());
        let exemplars = pool.select(mask).unwrap();
        for inst in valset {
            let prompt = render_prompt(
                &inst.question,
                &inst.options,
                &exemplars,
                &pool.format_exemplar,
                &cfg.domain,
            )
            .unwrap();
            for s in 0..cfg.sampling.n_samples {
                let fields = CacheKeyFields::new(&prompt, &cfg.sampling, s);
                cache.write(&fields, &answers(inst, s)).unwrap();
            }
        }
        SamplingBackend::replay(cache)
    }

    #[test]
    fn evaluate_mask_all_correct_is_perfectly_calibrated() {
        let pool = pool_with(4);
        let valset: Vec<Instance> = (0..5)
            .map(|i| Instance {
                id: format!("q{i}"),
                question: format!("Question {i}?"),
                options: vec!["x".into(), "y".into()],
                answer: 'A',
            })
            .collect();
        let mask = SubsetMask::from_bitstring("1010").unwrap();
        let mut cfg = EvalConfig::default();
        cfg.sampling.n_samples = 16;
        let backend = seeded_backend(&valset, &pool, &mask, &cfg, |_, _| "(A)".into());
        let (value, report) = evaluate_mask(&mask, &valset, &pool, &backend, &cfg).unwrap();
        assert_eq!(value.acc(), 1.0);
        assert_eq!(value.ece(), 0.0);
        assert_eq!(report.instances.len(), 5);
        assert!(report.instances.iter().all(|i| i.confidence == 1.0));
    }

    #[test]
    fn evaluate_mask_worked_binning_example() {
        // Confidences (1.0, 1.0, 0.5, 0.5) with correctness (T, F, T, F):
        // acc = 0.5, ece = 0.5*|0.5-1.0| + 0.5*|0.5-0.5| = 0.25.
        let pool = pool_with(3);
        let valset: Vec<Instance> = (0..4)
            .map(|i| Instance {
                id: format!("q{i}"),
                question: format!("Question {i}?"),
                options: vec!["x".into(), "y".into()],
                answer: 'A',
            })
            .collect();
        let mask = SubsetMask::from_bitstring("110").unwrap();
        let mut cfg = EvalConfig::default();
        cfg.sampling.n_samples = 16;
        let backend = seeded_backend(&valset, &pool, &mask, &cfg, |inst, s| {
            match inst.id.as_str() {
                "q0" => "(A)".to_string(),                                  // conf 1.0, correct
                "q1" => "(B)".to_string(),                                  // conf 1.0, wrong
                "q2" => if s < 8 { "(A)".into() } else { "(B)".into() },     // conf 0.5, correct
                _ => if s < 8 { "(B)".into() } else { "(A)".into() },        // conf 0.5, wrong
            }
        });
        let (value, report) = evaluate_mask(&mask, &valset, &pool, &backend, &cfg).unwrap();
        assert!((value.acc() - 0.5).abs() < 1e-15);
        assert!((value.ece() - 0.25).abs() < 1e-15);
        // The stored ece must be recomputable from the bins.
        assert!((report.bins.ece() - report.ece).abs() < 1e-12);
        assert_eq!(report.bins.total, 4);
    }

    #[test]
    fn evaluate_mask_empty_mask_uses_format_exemplar_only() {
        let pool = pool_with(4);
        let valset = vec![Instance {
            id: "q0".into(),
            question: "Only question?".into(),
            options: vec!["x".into(), "y".into()],
            answer: 'B',
        }];
        let mask = SubsetMask::zeros(4).unwrap();
        let mut cfg = EvalConfig::default();
        cfg.sampling.n_samples = 4;
        let backend = seeded_backend(&valset, &pool, &mask, &cfg, |_, _| "(B)".into());
        let (value, report) = evaluate_mask(&mask, &valset, &pool, &backend, &cfg).unwrap();
        assert_eq!(value.acc(), 1.0);
        // Prompt rendered with zero exemplars: format block + query only.
        let selected = pool.select(&mask).unwrap();
        assert!(selected.is_empty());
        assert_eq!(report.instances[0].confidence, 1.0);
    }

    #[test]
    fn evaluate_mask_failure_carries_query_id() {
        let pool = pool_with(2);
        let valset = vec![Instance {
            id: "the-failing-one".into(),
            question: "Q?".into(),
            options: vec!["x".into()],
            answer: 'A',
        }];
        let mask = SubsetMask::from_bitstring("01").unwrap();
        let cfg = EvalConfig::default();
        // Empty replay cache: every lookup misses.
        let dir = tempfile::tempdir().unwrap();
        let backend = SamplingBackend::replay(ResponseCache::new(dir.path()));
        let err = evaluate_mask(&mask, &valset, &pool, &backend, &cfg).unwrap_err();
        match err {
            Error::EvalFailure { query_id, .. } => assert_eq!(query_id, "the-failing-one"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn evaluate_order_permutation_leaves_objective_unchanged() {
        let pool = pool_with(3);
        let valset: Vec<Instance> = (0..6)
            .map(|i| Instance {
                id: format!("q{i}"),
                question: format!("Question {i}?"),
                options: vec!["x".into(), "y".into(), "z".into()],
                answer: 'C',
            })
            .collect();
        let mask = SubsetMask::from_bitstring("011").unwrap();
        let mut cfg = EvalConfig::default();
        cfg.sampling.n_samples = 8;
        let backend = seeded_backend(&valset, &pool, &mask, &cfg, |inst, s| {
            let bias = inst.id.as_bytes()[1] as usize % 3;
            if s % 3 == bias { "(C)".into() } else { "(A)".into() }
        });
        let (v1, _) = evaluate_mask(&mask, &valset, &pool, &backend, &cfg).unwrap();
        let mut shuffled = valset.clone();
        shuffled.reverse();
        let (v2, _) = evaluate_mask(&mask, &shuffled, &pool, &backend, &cfg).unwrap();
        assert_eq!(v1.acc(), v2.acc());
        assert!((v1.ece() - v2.ece()).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn report_metrics_stay_in_unit_interval(
            flags in proptest::collection::vec(proptest::bool::ANY, 1..60),
            confs in proptest::collection::vec(0.0f64..=1.0, 60)
        ) {
            let pairs: Vec<(f64, bool)> = flags
                .iter()
                .zip(&confs)
                .map(|(&ok, &c)| (c, ok))
                .collect();
            let e = expected_calibration_error(&pairs, 10).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&e));
        }
    }
}
