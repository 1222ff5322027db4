use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::zscore;
use crate::stats::logistic::{fit_logistic, FitOptions, SEPARATION_RIDGE};

/// Where z-score statistics are estimated during cross-validation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZScoreMode {
    /// On each training fold, reused for its test fold.
    #[default]
    Fold,
    /// Once on the whole dataset.
    Global,
}

impl std::str::FromStr for ZScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold" => Ok(ZScoreMode::Fold),
            "global" => Ok(ZScoreMode::Global),
            other => Err(Error::Config(format!("unknown z-score mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Held-out prediction for every example, in input order.
    pub predictions: Vec<u8>,
    pub fold_of: Vec<usize>,
    /// Folds whose training split held a single class and were fit with a ridge.
    pub flagged_folds: Vec<usize>,
    pub diagnostics: Vec<String>,
}

/// Seeded shuffled assignment of `n` examples to `folds` folds of near-equal size.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (rank, &i) in idx.iter().enumerate() {
        fold_of[i] = rank % folds;
    }
    fold_of
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |r, c| x[(rows[r], c)])
}

struct FoldResult {
    test_rows: Vec<usize>,
    predictions: Vec<u8>,
    accuracy: f64,
    flagged: bool,
    diagnostics: Vec<String>,
}

/// K-fold accuracy of a logistic classifier on raw (unstandardized) `x`.
pub fn crossval_accuracy(x: &DMatrix<f64>, y: &[u8], folds: usize, seed: u64, mode: ZScoreMode) -> Result<CvReport> {
    crossval_with(x, y, folds, seed, mode, &FitOptions::default())
}

/// [`crossval_accuracy`] with explicit per-fold fit options.
pub fn crossval_with(
    x: &DMatrix<f64>,
    y: &[u8],
    folds: usize,
    seed: u64,
    mode: ZScoreMode,
    fit_options: &FitOptions,
) -> Result<CvReport> {
    let n = x.nrows();
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::InsufficientData(format!("{n} examples for {folds} folds")));
    }
    if y.len() != n {
        return Err(Error::Contract(format!("{} labels for {n} rows", y.len())));
    }
    let fold_of = fold_assignment(n, folds, seed);
    let global = match mode {
        ZScoreMode::Global => Some(zscore(x, None)?),
        ZScoreMode::Fold => None,
    };

    let results: Vec<Result<FoldResult>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (test_rows, train_rows): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            let y_train: Vec<u8> = train_rows.iter().map(|&i| y[i]).collect();
            let (train_x, test_x, mut diagnostics) = match &global {
                Some(z) => (
                    select_rows(&z.matrix, &train_rows),
                    select_rows(&z.matrix, &test_rows),
                    Vec::new(),
                ),
                None => {
                    let train = zscore(&select_rows(x, &train_rows), None)?;
                    let test = zscore(&select_rows(x, &test_rows), Some(&train.stats))?;
                    (train.matrix, test.matrix, train.diagnostics)
                }
            };
            let single_class = y_train.iter().all(|&v| v == y_train[0]);
            let mut opts = FitOptions {
                names: None,
                ..fit_options.clone()
            };
            if single_class {
                diagnostics.push(format!("fold {f}: training split has a single class"));
                opts.ridge = opts.ridge.max(SEPARATION_RIDGE);
            }
            let fit = fit_logistic(&train_x, &y_train, &opts)?;
            let predictions = fit.predict(&test_x);
            let correct = predictions
                .iter()
                .zip(&test_rows)
                .filter(|(p, &i)| **p == y[i])
                .count();
            Ok(FoldResult {
                accuracy: correct as f64 / test_rows.len() as f64,
                test_rows,
                predictions,
                flagged: single_class,
                diagnostics,
            })
        })
        .collect();

    let mut report = CvReport {
        fold_accuracies: Vec::with_capacity(folds),
        mean_accuracy: 0.0,
        predictions: vec![0; n],
        fold_of,
        flagged_folds: Vec::new(),
        diagnostics: global.map(|g| g.diagnostics).unwrap_or_default(),
    };
    for (f, result) in results.into_iter().enumerate() {
        let result = result?;
        for (&row, &p) in result.test_rows.iter().zip(&result.predictions) {
            report.predictions[row] = p;
        }
        report.fold_accuracies.push(result.accuracy);
        if result.flagged {
            report.flagged_folds.push(f);
        }
        report.diagnostics.extend(result.diagnostics);
    }
    report.mean_accuracy = report.fold_accuracies.iter().sum::<f64>() / folds as f64;
    Ok(report)
}
