//! Predictor extraction and the pairwise ranking transform.
//!
//! Each reference/variant pair becomes one [`PairwiseExample`] whose
//! `delta` is a feature-vector difference. Orientation alternates with the
//! emission ordinal so the two labels stay balanced.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constituency::{DistanceConvention, Order, SentencePlan};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub total_dl: usize,
    /// Verb distance per position, left to right; the last entry is verb-adjacent.
    pub constituent_dl: Vec<usize>,
    pub constituent_length: Vec<usize>,
}

impl FeatureVector {
    pub fn k(&self) -> usize {
        self.constituent_dl.len()
    }

    /// Flat layout: `[total_dl, dl_1..dl_k, len_1..len_k]`.
    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.total_dl)
            .chain(self.constituent_dl.iter().copied())
            .chain(self.constituent_length.iter().copied())
            .map(|v| v as f64)
            .collect()
    }
}

pub fn extract_features(plan: &SentencePlan, order: &Order) -> FeatureVector {
    extract_features_with(plan, order, DistanceConvention::Intervening)
}

pub fn extract_features_with(plan: &SentencePlan, order: &Order, convention: DistanceConvention) -> FeatureVector {
    let mut constituent_dl = plan.positional_dls(order);
    if convention == DistanceConvention::Positional {
        constituent_dl.iter_mut().for_each(|d| *d += 1);
    }
    FeatureVector {
        total_dl: plan.total_dl(order, convention),
        constituent_dl,
        constituent_length: plan.positional_lengths(order),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseExample {
    pub delta: Vec<f64>,
    /// 1 when `delta = φ(reference) − φ(variant)`, 0 for the reverse.
    pub label: u8,
    pub pair_id: String,
    pub k: usize,
}

/// A reference/variant feature pair awaiting transformation.
#[derive(Clone, Debug)]
pub struct RankingPair {
    pub pair_id: String,
    pub reference: FeatureVector,
    pub variant: FeatureVector,
}

#[derive(Clone, Debug, Default)]
pub struct Transformed {
    pub examples: Vec<PairwiseExample>,
    pub diagnostics: Vec<String>,
}

/// One example per well-formed pair; even ordinals are reference-minus-variant
/// (label 1), odd ordinals variant-minus-reference (label 0).
pub fn joachims_transform(pairs: &[RankingPair]) -> Transformed {
    let mut out = Transformed::default();
    for pair in pairs {
        if pair.reference.k() != pair.variant.k() {
            out.diagnostics.push(format!(
                "pair {}: reference has {} constituents, variant {}",
                pair.pair_id,
                pair.reference.k(),
                pair.variant.k()
            ));
            continue;
        }
        let ordinal = out.examples.len();
        out.examples.push(orient(pair, ordinal % 2 == 0));
    }
    out
}

/// Builds the example for `pair` in the requested orientation.
pub fn orient(pair: &RankingPair, reference_first: bool) -> PairwiseExample {
    let r = pair.reference.to_vec();
    let v = pair.variant.to_vec();
    let (a, b, label) = if reference_first { (&r, &v, 1) } else { (&v, &r, 0) };
    PairwiseExample {
        delta: a.iter().zip(b).map(|(x, y)| x - y).collect(),
        label,
        pair_id: pair.pair_id.clone(),
        k: pair.reference.k(),
    }
}

/// Position of a constituent counted from either end of the preverbal region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    /// 1-based from the sentence start.
    FromStart(usize),
    /// 1 is the verb-adjacent constituent.
    FromEnd(usize),
}

impl Slot {
    fn resolve(self, k: usize) -> Option<usize> {
        match self {
            Slot::FromStart(i) if (1..=k).contains(&i) => Some(i - 1),
            Slot::FromEnd(i) if (1..=k).contains(&i) => Some(k - i),
            _ => None,
        }
    }
}

/// A named predictor column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    TotalDl,
    Dl(Slot),
    Len(Slot),
}

impl Feature {
    pub fn value(self, ex: &PairwiseExample) -> Option<f64> {
        let k = ex.k;
        match self {
            Feature::TotalDl => Some(ex.delta[0]),
            Feature::Dl(slot) => slot.resolve(k).map(|i| ex.delta[1 + i]),
            Feature::Len(slot) => slot.resolve(k).map(|i| ex.delta[1 + k + i]),
        }
    }

    pub fn name(self) -> String {
        fn slot(s: Slot) -> String {
            match s {
                Slot::FromStart(i) => format!("pos{i}"),
                Slot::FromEnd(1) => "last".into(),
                Slot::FromEnd(2) => "2nd_last".into(),
                Slot::FromEnd(i) => format!("{i}th_last"),
            }
        }
        match self {
            Feature::TotalDl => "total_dl".into(),
            Feature::Dl(s) => format!("dl_{}", slot(s)),
            Feature::Len(s) => format!("len_{}", slot(s)),
        }
    }

    /// Positional dl and length columns for a fixed `k`.
    pub fn positional(k: usize) -> (Vec<Feature>, Vec<Feature>) {
        (
            (1..=k).map(|i| Feature::Dl(Slot::FromStart(i))).collect(),
            (1..=k).map(|i| Feature::Len(Slot::FromStart(i))).collect(),
        )
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Design matrix (rows = examples) and labels for the chosen features.
pub fn design_matrix(examples: &[PairwiseExample], features: &[Feature]) -> Result<(DMatrix<f64>, Vec<u8>)> {
    let mut x = DMatrix::zeros(examples.len(), features.len());
    for (r, ex) in examples.iter().enumerate() {
        for (c, f) in features.iter().enumerate() {
            x[(r, c)] = f.value(ex).ok_or_else(|| {
                Error::Contract(format!("feature {f} undefined for pair {} with k = {}", ex.pair_id, ex.k))
            })?;
        }
    }
    Ok((x, examples.iter().map(|e| e.label).collect()))
}

/// Column means and sample standard deviations of the kept columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats {
    /// Indices (into the input matrix) of columns that survived.
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Standardized {
    pub matrix: DMatrix<f64>,
    pub stats: ZScoreStats,
    pub dropped: Vec<usize>,
    pub diagnostics: Vec<String>,
}

/// Centers each column and divides by its sample (n−1) standard deviation.
/// With `fit_stats` the stored statistics (and column selection) are reused.
pub fn zscore(x: &DMatrix<f64>, fit_stats: Option<&ZScoreStats>) -> Result<Standardized> {
    let ncols = x.ncols();
    let mut diagnostics = Vec::new();
    let stats = match fit_stats {
        Some(s) => {
            if s.kept.iter().any(|&c| c >= ncols) {
                return Err(Error::Contract("stored z-score statistics do not fit this matrix".into()));
            }
            s.clone()
        }
        None => {
            if x.nrows() < 2 {
                return Err(Error::InsufficientData("z-scoring needs at least two rows".into()));
            }
            let mut stats = ZScoreStats {
                kept: Vec::new(),
                means: Vec::new(),
                sds: Vec::new(),
            };
            for c in 0..ncols {
                let col = x.column(c);
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                let sd = var.sqrt();
                if sd <= 1e-12 * (1.0 + mean.abs()) {
                    diagnostics.push(format!("column {c} has zero variance and was dropped"));
                    continue;
                }
                stats.kept.push(c);
                stats.means.push(mean);
                stats.sds.push(sd);
            }
            stats
        }
    };
    let dropped = (0..ncols).filter(|c| !stats.kept.contains(c)).collect();
    let mut matrix = DMatrix::zeros(x.nrows(), stats.kept.len());
    for (j, &c) in stats.kept.iter().enumerate() {
        let (m, s) = (stats.means[j], stats.sds[j]);
        for r in 0..x.nrows() {
            matrix[(r, j)] = (x[(r, c)] - m) / s;
        }
    }
    Ok(Standardized {
        matrix,
        stats,
        dropped,
        diagnostics,
    })
}

/// Writes examples of a single `k` as CSV:
/// `total_dl,dl_pos1..k,len_pos1..k,label,pair_id`.
pub fn write_feature_csv<W: Write>(out: W, examples: &[PairwiseExample], k: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["total_dl".to_string()];
    header.extend((1..=k).map(|i| format!("dl_pos{i}")));
    header.extend((1..=k).map(|i| format!("len_pos{i}")));
    header.push("label".into());
    header.push("pair_id".into());
    w.write_record(&header)?;
    for ex in examples {
        if ex.k != k {
            return Err(Error::Contract(format!("pair {} has k = {}, expected {k}", ex.pair_id, ex.k)));
        }
        let mut row: Vec<String> = ex.delta.iter().map(|v| format!("{}", *v as i64)).collect();
        row.push(ex.label.to_string());
        row.push(ex.pair_id.clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
