//! Statistics engine: logistic regression with inference, k-fold
//! cross-validation, McNemar's test, recursive feature elimination and
//! Pearson correlation.

mod crossval;
mod logistic;
mod mcnemar;
mod rfecv;

pub use crossval::{crossval_accuracy, crossval_with, fold_assignment, CvReport, ZScoreMode};
pub use logistic::{fit_logistic, log_likelihood, sigmoid, FitOptions, RegressionFit, SEPARATION_RIDGE};
pub use mcnemar::{mcnemar, mcnemar_counts, McNemar, EXACT_THRESHOLD};
pub use rfecv::{rfecv, RfecvReport, RfecvStep, RANK_RIDGE};

use crate::error::{Error, Result};

/// Two-tailed standard-normal tail probability of `z`.
pub fn normal_two_tailed(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Significance marker used in regression and accuracy tables.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else {
        ""
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a zero-variance variable".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
