use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::zscore;
use crate::stats::crossval::{crossval_with, ZScoreMode};
use crate::stats::logistic::{fit_logistic, FitOptions, RegressionFit};

/// Penalty used to score and rank candidate sets that are rank deficient.
pub const RANK_RIDGE: f64 = 1e-4;

#[derive(Clone, Debug, Serialize)]
pub struct RfecvStep {
    /// Column indices (into the input matrix) in the candidate set.
    pub features: Vec<usize>,
    pub accuracy: f64,
    /// The set has exactly collinear columns; it was scored with a ridge
    /// and is never selected.
    pub rank_deficient: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RfecvReport {
    /// One entry per feature-set size, largest first.
    pub curve: Vec<RfecvStep>,
    pub selected: Vec<usize>,
    /// Columns in elimination order.
    pub eliminated: Vec<usize>,
}

impl RfecvReport {
    pub fn accuracy_at(&self, size: usize) -> Option<f64> {
        self.curve.iter().find(|s| s.features.len() == size).map(|s| s.accuracy)
    }
}

fn columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |r, c| x[(r, cols[c])])
}

/// Full-data fit on standardized columns; falls back to a ridge when the
/// columns are collinear.
fn ranking_fit(sub: &DMatrix<f64>, y: &[u8]) -> Result<(RegressionFit, Vec<usize>, bool)> {
    let z = zscore(sub, None)?;
    match fit_logistic(&z.matrix, y, &FitOptions::default()) {
        Ok(fit) => Ok((fit, z.stats.kept, false)),
        Err(Error::RankDeficient { .. }) => {
            let opts = FitOptions {
                ridge: RANK_RIDGE,
                ..Default::default()
            };
            Ok((fit_logistic(&z.matrix, y, &opts)?, z.stats.kept, true))
        }
        Err(e) => Err(e),
    }
}

/// Recursive feature elimination with cross-validated model selection.
///
/// At every size the current set is scored by k-fold accuracy, then the
/// feature with the smallest absolute standardized coefficient in a
/// full-data fit is removed. The smallest full-rank set within 1e-9 of the
/// best accuracy is selected.
pub fn rfecv(x: &DMatrix<f64>, y: &[u8], folds: usize, seed: u64, mode: ZScoreMode) -> Result<RfecvReport> {
    if x.ncols() < 2 {
        return Err(Error::Config("feature elimination needs at least 2 candidate features".into()));
    }
    let mut current: Vec<usize> = (0..x.ncols()).collect();
    let mut curve = Vec::new();
    let mut eliminated = Vec::new();
    while !current.is_empty() {
        let sub = columns(x, &current);
        let (fit, kept, rank_deficient) = ranking_fit(&sub, y)?;
        let cv_opts = FitOptions {
            ridge: if rank_deficient { RANK_RIDGE } else { 0.0 },
            ..Default::default()
        };
        let cv = crossval_with(&sub, y, folds, seed, mode, &cv_opts)?;
        curve.push(RfecvStep {
            features: current.clone(),
            accuracy: cv.mean_accuracy,
            rank_deficient,
        });
        if current.len() == 1 {
            break;
        }
        // dropped zero-variance columns count as zero weight
        let mut weight = vec![0.0; current.len()];
        for (j, &c) in kept.iter().enumerate() {
            weight[c] = fit.coefficients[j + 1].abs();
        }
        let weakest = (0..current.len())
            .min_by(|&a, &b| weight[a].total_cmp(&weight[b]))
            .expect("non-empty");
        eliminated.push(current.remove(weakest));
    }
    let candidates: Vec<&RfecvStep> = curve.iter().filter(|s| !s.rank_deficient).collect();
    let best = candidates.iter().map(|s| s.accuracy).fold(f64::NEG_INFINITY, f64::max);
    let selected = candidates
        .iter()
        .rev()
        .find(|s| s.accuracy >= best - 1e-9)
        .map(|s| s.features.clone())
        .unwrap_or_default();
    Ok(RfecvReport {
        curve,
        selected,
        eliminated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::logistic::sigmoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn informative_plus_noise(rng: &mut impl Rng, n: usize, informative: usize) -> (DMatrix<f64>, Vec<u8>) {
        let x = DMatrix::from_fn(n, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..n)
            .map(|r| u8::from(rng.gen::<f64>() < sigmoid(1.5 * x[(r, informative)])))
            .collect();
        (x, y)
    }

    #[test]
    fn informative_feature_is_retained() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut retained = 0;
        for run in 0..100u64 {
            let informative = rng.gen_range(0..5);
            let (x, y) = informative_plus_noise(&mut rng, 400, informative);
            let report = rfecv(&x, &y, 10, run, ZScoreMode::Fold).unwrap();
            assert_eq!(report.curve.len(), 5);
            if report.selected.contains(&informative) {
                retained += 1;
            }
        }
        assert!(retained >= 95, "{retained}");
    }

    #[test]
    fn noise_curve_is_flat_at_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let n = 10_000;
        let x = DMatrix::from_fn(n, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<bool>())).collect();
        let report = rfecv(&x, &y, 10, 1, ZScoreMode::Fold).unwrap();
        for step in &report.curve {
            assert!((step.accuracy - 0.5).abs() < 0.02, "{step:?}");
        }
    }

    #[test]
    fn collinear_sets_are_scored_but_not_selected() {
        // columns sum to zero, like positional length deltas
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 2000;
        let mut x = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        for r in 0..n {
            x[(r, 2)] = -x[(r, 0)] - x[(r, 1)];
        }
        let y: Vec<u8> = (0..n).map(|r| u8::from(rng.gen::<f64>() < sigmoid(2.0 * x[(r, 0)]))).collect();
        let report = rfecv(&x, &y, 5, 0, ZScoreMode::Fold).unwrap();
        assert!(report.curve[0].rank_deficient);
        assert!(report.curve[1..].iter().all(|s| !s.rank_deficient));
        assert!(report.selected.len() < 3);
        assert!(!report.selected.is_empty());
    }

    #[test]
    fn needs_two_features() {
        let x = DMatrix::zeros(10, 1);
        assert!(matches!(rfecv(&x, &[0; 10], 2, 0, ZScoreMode::Fold), Err(Error::Config(_))));
    }
}
