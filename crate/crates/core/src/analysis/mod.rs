//! End-to-end experiments: corpus preparation, the figure datasets, the
//! classification suite and the per-k regression tables.

mod report;
mod synth;

pub use report::{
    load, report_all, write_classification, write_correlation, write_fig1, write_fig2, write_fig4, write_manifest,
    write_regressions, Loaded, Report,
};
pub use synth::{generate_synthetic_corpus, SyntheticSpec};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constituency::{decompose, DecomposeError, DistanceConvention, SentencePlan};
use crate::error::{Error, Result};
use crate::features::{design_matrix, extract_features_with, joachims_transform, zscore, Feature, PairwiseExample, RankingPair, Slot};
use crate::rng::{derive_seed, Purpose};
use crate::stats::{crossval_accuracy, fit_logistic, mcnemar, rfecv, stars, CvReport, FitOptions, McNemar, ZScoreMode};
use crate::treebank::Corpus;
use crate::variants::{generate_variants, variant_count, Strategy, VariantSet, DEFAULT_CAP};

/// Regression cells with fewer pairs than this are reported as insufficient.
pub const MIN_REGRESSION_PAIRS: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub cap: usize,
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    pub strategies: Vec<Strategy>,
    pub zscore: ZScoreMode,
    pub folds: usize,
    /// Seeded draws averaged per sentence for stochastic strategies.
    pub random_draws: usize,
    /// Constituent count for the regression tables.
    pub fit_k: usize,
    pub convention: DistanceConvention,
    pub exclude_punct: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cap: DEFAULT_CAP,
            seed: 0,
            k_min: 2,
            k_max: 6,
            strategies: Strategy::ALL.to_vec(),
            zscore: ZScoreMode::Fold,
            folds: 10,
            random_draws: 10,
            fit_k: 5,
            convention: DistanceConvention::Intervening,
            exclude_punct: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cap < 2 {
            return Err(Error::Config(format!("cap must be at least 2, got {}", self.cap)));
        }
        if !(2 <= self.k_min && self.k_min <= self.k_max && self.k_max <= 6) {
            return Err(Error::Config(format!(
                "k-range {}..{} must lie within 2..6",
                self.k_min, self.k_max
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.random_draws == 0 {
            return Err(Error::Config("random-draws must be positive".into()));
        }
        if self.fit_k < 2 {
            return Err(Error::Config("fit-k must be at least 2".into()));
        }
        Ok(())
    }

    pub fn k_range(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.k_max
    }
}

/// An experiment-eligible sentence.
#[derive(Clone, Debug)]
pub struct Item {
    pub id: String,
    pub plan: SentencePlan,
}

/// Eligible sentences in corpus order plus counts of everything skipped.
#[derive(Clone, Debug, Default)]
pub struct Experiment {
    pub items: Vec<Item>,
    pub skipped: BTreeMap<String, usize>,
    pub parse_diagnostics: usize,
}

impl Experiment {
    pub fn with_k(&self, k: usize) -> impl Iterator<Item = &Item> {
        self.items.iter().filter(move |i| i.plan.k() == k)
    }
}

pub const PUNCT_DEPRELS: &[&str] = &["punct", "PUNCT"];

/// Filters a parsed corpus down to projective, decomposable sentences.
pub fn prepare(corpus: &Corpus, config: &ExperimentConfig) -> Experiment {
    let mut exp = Experiment {
        parse_diagnostics: corpus.diagnostics.len(),
        ..Default::default()
    };
    for sentence in &corpus.sentences {
        let stripped;
        let tree = if config.exclude_punct {
            match sentence.tree.without_deprels(PUNCT_DEPRELS) {
                Some(t) => {
                    stripped = t;
                    &stripped
                }
                None => {
                    *exp.skipped.entry("punctuation root".into()).or_default() += 1;
                    continue;
                }
            }
        } else {
            &sentence.tree
        };
        match decompose(tree) {
            Ok(plan) => exp.items.push(Item {
                id: sentence.id.clone(),
                plan,
            }),
            Err(DecomposeError::NonProjective) => *exp.skipped.entry("non-projective".into()).or_default() += 1,
            Err(DecomposeError::Ineligible(reason)) => *exp.skipped.entry(reason.to_string()).or_default() += 1,
        }
    }
    exp
}

pub fn variants_for(item: &Item, config: &ExperimentConfig) -> Result<VariantSet> {
    generate_variants(&item.plan, config.cap, derive_seed(config.seed, &item.id, Purpose::Variants))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramRow {
    pub k: usize,
    pub references: usize,
    pub reference_pct: f64,
    pub variants: usize,
    pub variant_pct: f64,
}

/// Percentages of reference sentences and of variants by constituent count.
pub fn constituent_count_histogram(exp: &Experiment, cap: usize) -> Vec<HistogramRow> {
    let mut refs: BTreeMap<usize, usize> = BTreeMap::new();
    for item in &exp.items {
        *refs.entry(item.plan.k()).or_default() += 1;
    }
    let vars: BTreeMap<usize, usize> = refs.iter().map(|(&k, &n)| (k, n * variant_count(k, cap))).collect();
    let total_refs: usize = refs.values().sum();
    let total_vars: usize = vars.values().sum();
    let pct = |n: usize, total: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    refs.iter()
        .map(|(&k, &n)| HistogramRow {
            k,
            references: n,
            reference_pct: pct(n, total_refs),
            variants: vars[&k],
            variant_pct: pct(vars[&k], total_vars),
        })
        .collect()
}

/// Mean constituent length at each position over reference sentences with `k` constituents.
pub fn position_length_profile(exp: &Experiment, k: usize) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; k];
    let mut n = 0usize;
    for item in exp.with_k(k) {
        for (s, len) in sums.iter_mut().zip(item.plan.lengths()) {
            *s += len as f64;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!("no reference sentence with {k} constituents")));
    }
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

/// Total dependency length divided by sentence length for each strategy;
/// stochastic strategies average `random_draws` seeded draws.
pub fn sentence_strategy_dls(item: &Item, config: &ExperimentConfig) -> BTreeMap<Strategy, f64> {
    let n = item.plan.tree().len() as f64;
    config
        .strategies
        .iter()
        .map(|&s| {
            let value = if s.is_stochastic() {
                let purpose = if s == Strategy::Random { Purpose::RandomOrder } else { Purpose::LeastEffort };
                let total: usize = (0..config.random_draws)
                    .map(|d| {
                        let seed = derive_seed(config.seed, &format!("{}#{d}", item.id), purpose);
                        item.plan.total_dl(&s.order(&item.plan, seed), config.convention)
                    })
                    .sum();
                total as f64 / config.random_draws as f64
            } else {
                item.plan.total_dl(&s.order(&item.plan, 0), config.convention) as f64
            };
            (s, value / n)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub k: usize,
    pub sentences: usize,
    pub means: BTreeMap<Strategy, f64>,
}

/// Per-k mean normalized dependency length for each configured strategy.
pub fn strategy_curves(exp: &Experiment, config: &ExperimentConfig) -> Vec<CurveRow> {
    let per_sentence: Vec<(usize, BTreeMap<Strategy, f64>)> = exp
        .items
        .par_iter()
        .filter(|i| config.k_range().contains(&i.plan.k()))
        .map(|i| (i.plan.k(), sentence_strategy_dls(i, config)))
        .collect();
    let mut rows: BTreeMap<usize, (usize, BTreeMap<Strategy, f64>)> = BTreeMap::new();
    for (k, values) in per_sentence {
        let entry = rows.entry(k).or_default();
        entry.0 += 1;
        for (s, v) in values {
            *entry.1.entry(s).or_default() += v;
        }
    }
    rows.into_iter()
        .map(|(k, (n, sums))| CurveRow {
            k,
            sentences: n,
            means: sums.into_iter().map(|(s, v)| (s, v / n as f64)).collect(),
        })
        .collect()
}

/// Reference/variant pairs for every eligible sentence, transformed into
/// balanced pairwise examples.
pub fn pairwise_dataset(exp: &Experiment, config: &ExperimentConfig) -> Result<Vec<PairwiseExample>> {
    let per_item: Vec<Result<Vec<RankingPair>>> = exp
        .items
        .par_iter()
        .map(|item| {
            let set = variants_for(item, config)?;
            let reference = extract_features_with(&item.plan, &set.reference_order, config.convention);
            Ok(set
                .sampled_variants
                .iter()
                .map(|v| RankingPair {
                    pair_id: item.id.clone(),
                    reference: reference.clone(),
                    variant: extract_features_with(&item.plan, v, config.convention),
                })
                .collect())
        })
        .collect();
    let mut pairs = Vec::new();
    for p in per_item {
        pairs.extend(p?);
    }
    let transformed = joachims_transform(&pairs);
    for d in &transformed.diagnostics {
        log::warn!("{d}");
    }
    Ok(transformed.examples)
}

/// Pearson correlation between sentence length and constituent count.
pub fn length_count_correlation(exp: &Experiment) -> Result<f64> {
    let lengths: Vec<f64> = exp.items.iter().map(|i| i.plan.tree().len() as f64).collect();
    let counts: Vec<f64> = exp.items.iter().map(|i| i.plan.k() as f64).collect();
    crate::stats::pearson(&lengths, &counts)
}

#[derive(Clone, Debug, Serialize)]
pub struct AccuracyRow {
    pub predictors: Vec<String>,
    pub accuracy: f64,
    /// Comparison against the preceding row of the same table.
    pub mcnemar: Option<McNemar>,
    pub stars: String,
    #[serde(skip)]
    pub cv: CvReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationSuite {
    pub pairs: usize,
    pub dependency_length: Vec<AccuracyRow>,
    pub constituent_length: Vec<AccuracyRow>,
}

impl ClassificationSuite {
    pub fn row(&self, predictors: &[Feature]) -> Option<&AccuracyRow> {
        let names: Vec<String> = predictors.iter().map(|f| f.name()).collect();
        self.dependency_length
            .iter()
            .chain(&self.constituent_length)
            .find(|r| r.predictors == names)
    }
}

pub const LAST: Slot = Slot::FromEnd(1);
pub const SECOND_LAST: Slot = Slot::FromEnd(2);

pub fn dependency_length_rows() -> Vec<Vec<Feature>> {
    vec![
        vec![Feature::TotalDl],
        vec![Feature::Dl(SECOND_LAST)],
        vec![Feature::Dl(LAST)],
        vec![Feature::Dl(LAST), Feature::Dl(SECOND_LAST)],
    ]
}

pub fn constituent_length_rows() -> Vec<Vec<Feature>> {
    vec![
        vec![Feature::Len(SECOND_LAST)],
        vec![Feature::Len(LAST)],
        vec![Feature::Len(LAST), Feature::Len(SECOND_LAST)],
    ]
}

fn accuracy_table(
    examples: &[PairwiseExample],
    rows: Vec<Vec<Feature>>,
    folds: usize,
    seed: u64,
    mode: ZScoreMode,
) -> Result<Vec<AccuracyRow>> {
    let mut out: Vec<AccuracyRow> = Vec::new();
    for features in rows {
        let (x, y) = design_matrix(examples, &features)?;
        let cv = crossval_accuracy(&x, &y, folds, seed, mode)?;
        let test = match out.last() {
            Some(prev) => Some(mcnemar(&cv.predictions, &prev.cv.predictions, &y)?),
            None => None,
        };
        out.push(AccuracyRow {
            predictors: features.iter().map(|f| f.name()).collect(),
            accuracy: cv.mean_accuracy,
            stars: test.as_ref().map(|t| stars(t.p_two_tailed)).unwrap_or("").to_string(),
            mcnemar: test,
            cv,
        });
    }
    Ok(out)
}

/// Cross-validated accuracy of the dependency-length and constituent-length
/// predictor sets on the full pairwise dataset.
pub fn run_classification_suite(examples: &[PairwiseExample], config: &ExperimentConfig) -> Result<ClassificationSuite> {
    let has_both = examples.iter().any(|e| e.label == 1) && examples.iter().any(|e| e.label == 0);
    if examples.len() < config.folds.max(2) || !has_both {
        return Err(Error::InsufficientData(format!(
            "{} pairwise examples cannot support {}-fold classification",
            examples.len(),
            config.folds
        )));
    }
    let seed = derive_seed(config.seed, "classification", Purpose::Folds);
    Ok(ClassificationSuite {
        pairs: examples.len(),
        dependency_length: accuracy_table(examples, dependency_length_rows(), config.folds, seed, config.zscore)?,
        constituent_length: accuracy_table(examples, constituent_length_rows(), config.folds, seed, config.zscore)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionKind {
    DependencyLength,
    ConstituentLength,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientRow {
    pub predictor: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z_value: f64,
    pub p_value: f64,
    pub significant: bool,
    pub stars: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RfecvPoint {
    pub features: Vec<String>,
    pub accuracy: f64,
    pub rank_deficient: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegressionReport {
    pub kind: RegressionKind,
    pub k: usize,
    pub pairs: usize,
    /// `ok`, `insufficient data`, or an error description.
    pub status: String,
    pub rfecv_curve: Vec<RfecvPoint>,
    pub selected: Vec<String>,
    pub rows: Vec<CoefficientRow>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub log_likelihood: Option<f64>,
    pub ridge: Option<f64>,
}

impl RegressionReport {
    fn empty(kind: RegressionKind, k: usize, pairs: usize, status: String) -> Self {
        RegressionReport {
            kind,
            k,
            pairs,
            status,
            rfecv_curve: Vec::new(),
            selected: Vec::new(),
            rows: Vec::new(),
            converged: None,
            iterations: None,
            log_likelihood: None,
            ridge: None,
        }
    }

    pub fn estimate(&self, predictor: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.predictor == predictor).map(|r| r.estimate)
    }
}

/// Positional regression on the `k`-constituent subset: RFECV picks the
/// predictors, then a globally z-scored fit reports the coefficients.
pub fn run_regression(
    examples: &[PairwiseExample],
    kind: RegressionKind,
    config: &ExperimentConfig,
) -> Result<RegressionReport> {
    let k = config.fit_k;
    let subset: Vec<PairwiseExample> = examples.iter().filter(|e| e.k == k).cloned().collect();
    if subset.len() < MIN_REGRESSION_PAIRS {
        return Ok(RegressionReport::empty(kind, k, subset.len(), "insufficient data".into()));
    }
    let (dl, len) = Feature::positional(k);
    let candidates = match kind {
        RegressionKind::DependencyLength => dl,
        RegressionKind::ConstituentLength => len,
    };
    let (x, y) = design_matrix(&subset, &candidates)?;
    let seed = derive_seed(config.seed, &format!("rfecv-{kind:?}"), Purpose::Folds);
    let selection = rfecv(&x, &y, config.folds, seed, config.zscore)?;
    let mut report = RegressionReport::empty(kind, k, subset.len(), "ok".into());
    report.rfecv_curve = selection
        .curve
        .iter()
        .map(|s| RfecvPoint {
            features: s.features.iter().map(|&c| candidates[c].name()).collect(),
            accuracy: s.accuracy,
            rank_deficient: s.rank_deficient,
        })
        .collect();
    if selection.selected.is_empty() {
        report.status = "no full-rank feature set".into();
        return Ok(report);
    }
    let selected: Vec<Feature> = selection.selected.iter().map(|&c| candidates[c]).collect();
    report.selected = selected.iter().map(|f| f.name()).collect();
    let (xs, ys) = design_matrix(&subset, &selected)?;
    let z = zscore(&xs, None)?;
    let names: Vec<String> = z.stats.kept.iter().map(|&c| selected[c].name()).collect();
    let fit = fit_logistic(&z.matrix, &ys, &FitOptions::with_names(names))?;
    report.rows = fit
        .names
        .iter()
        .zip(&fit.coefficients)
        .zip(&fit.std_errors)
        .zip(fit.z_values.iter().zip(fit.p_values()))
        .map(|(((name, &b), &se), (&zv, p))| CoefficientRow {
            predictor: name.clone(),
            estimate: b,
            std_error: se,
            z_value: zv,
            p_value: p,
            significant: p < 0.001,
            stars: stars(p).to_string(),
        })
        .collect();
    report.converged = Some(fit.converged);
    report.iterations = Some(fit.iterations);
    report.log_likelihood = Some(fit.log_likelihood);
    report.ridge = Some(fit.ridge);
    Ok(report)
}
