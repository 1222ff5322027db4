//! Logistic regression by iteratively reweighted least squares.
//!
//! Standard errors come from the inverse observed information at the
//! solution. When the likelihood has no finite maximum (complete or
//! quasi-complete separation) the fit is repeated with a tiny ridge penalty
//! and flagged.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::normal_two_tailed;

/// Penalty used when separation forces a regularized refit.
pub const SEPARATION_RIDGE: f64 = 1e-6;
/// Linear predictors beyond this magnitude mean fitted probabilities are
/// numerically 0 or 1.
const ETA_LIMIT: f64 = 30.0;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub ridge: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the largest absolute coefficient change.
    pub tolerance: f64,
    /// Predictor names, one per column (intercept excluded).
    pub names: Option<Vec<String>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ridge: 0.0,
            max_iterations: 100,
            tolerance: 1e-8,
            names: None,
        }
    }
}

impl FitOptions {
    pub fn with_names(names: Vec<String>) -> Self {
        FitOptions {
            names: Some(names),
            ..Default::default()
        }
    }
}

/// Coefficients are ordered intercept first, then one per predictor column.
#[derive(Clone, Debug, Serialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z_values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Penalty actually applied (0 unless requested or separation was detected).
    pub ridge: f64,
    pub separation: bool,
}

impl RegressionFit {
    pub fn p_values(&self) -> Vec<f64> {
        self.z_values.iter().map(|z| normal_two_tailed(*z)).collect()
    }

    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Vec<f64> {
        assert_eq!(x.ncols() + 1, self.coefficients.len(), "column count mismatch");
        (0..x.nrows())
            .map(|r| {
                self.coefficients[0]
                    + (0..x.ncols()).map(|c| x[(r, c)] * self.coefficients[c + 1]).sum::<f64>()
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.linear_predictor(x).into_iter().map(sigmoid).collect()
    }

    /// Label 1 iff the fitted probability exceeds 0.5.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<u8> {
        self.predict_proba(x).into_iter().map(|p| u8::from(p > 0.5)).collect()
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Bernoulli log-likelihood of `beta` (intercept first) on `x`, `y`.
pub fn log_likelihood(x: &DMatrix<f64>, y: &[u8], beta: &[f64]) -> f64 {
    let design = Design::new(x);
    design.log_likelihood(y, beta)
}

/// Row-major copy of the design with a leading intercept column.
struct Design {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    fn new(x: &DMatrix<f64>) -> Self {
        let rows = x.nrows();
        let cols = x.ncols() + 1;
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.push(1.0);
            data.extend((0..x.ncols()).map(|c| x[(r, c)]));
        }
        Design { rows, cols, data }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn eta(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn log_likelihood(&self, y: &[u8], beta: &[f64]) -> f64 {
        self.eta(beta)
            .iter()
            .zip(y)
            .map(|(&e, &yi)| f64::from(yi) * e - softplus(e))
            .sum()
    }

    /// `X'WX` and `X'(y − μ)` at the given linear predictor.
    fn information_and_score(&self, y: &[u8], eta: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.cols;
        let mut info = DMatrix::zeros(p, p);
        let mut score = DVector::zeros(p);
        for r in 0..self.rows {
            let mu = sigmoid(eta[r]);
            let w = mu * (1.0 - mu);
            let resid = f64::from(y[r]) - mu;
            let row = self.row(r);
            for i in 0..p {
                score[i] += row[i] * resid;
                let wi = w * row[i];
                for j in i..p {
                    info[(i, j)] += wi * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                info[(i, j)] = info[(j, i)];
            }
        }
        (info, score)
    }

    /// Columns that are (numerically) linear combinations of earlier ones.
    fn collinear_columns(&self) -> Vec<usize> {
        let p = self.cols;
        let mut gram = DMatrix::<f64>::zeros(p, p);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..p {
                for j in i..p {
                    gram[(i, j)] += row[i] * row[j];
                }
            }
        }
        let scale: Vec<f64> = (0..p).map(|i| gram[(i, i)].sqrt()).collect();
        let mut bad = Vec::new();
        // incremental Cholesky on the scaled Gram matrix; tiny pivots mark collinearity
        let mut l = DMatrix::<f64>::zeros(p, p);
        let mut active: Vec<usize> = Vec::new();
        for j in 0..p {
            if scale[j] == 0.0 {
                bad.push(j);
                continue;
            }
            let g = |a: usize, b: usize| {
                let (i, k) = (a.min(b), a.max(b));
                gram[(i, k)] / (scale[a] * scale[b])
            };
            let mut row = vec![0.0; active.len()];
            for (m, &a) in active.iter().enumerate() {
                let s: f64 = (0..m).map(|t| l[(m, t)] * row[t]).sum();
                row[m] = (g(j, a) - s) / l[(m, m)];
            }
            let pivot = 1.0 - row.iter().map(|v| v * v).sum::<f64>();
            if pivot < 1e-10 {
                bad.push(j);
                continue;
            }
            let m = active.len();
            for (t, v) in row.into_iter().enumerate() {
                l[(m, t)] = v;
            }
            l[(m, m)] = pivot.sqrt();
            active.push(j);
        }
        bad
    }
}

struct IrlsOutcome {
    beta: Vec<f64>,
    converged: bool,
    iterations: usize,
    separated: bool,
}

fn irls(design: &Design, y: &[u8], ridge: f64, opts: &FitOptions) -> IrlsOutcome {
    let p = design.cols;
    let mut beta = vec![0.0; p];
    let penalized = |b: &[f64]| design.log_likelihood(y, b) - 0.5 * ridge * b.iter().map(|v| v * v).sum::<f64>();
    let mut objective = penalized(&beta);
    for iteration in 1..=opts.max_iterations {
        let eta = design.eta(&beta);
        let (mut info, mut score) = design.information_and_score(y, &eta);
        for i in 0..p {
            info[(i, i)] += ridge;
            score[i] -= ridge * beta[i];
        }
        let Some(chol) = info.cholesky() else {
            return IrlsOutcome {
                beta,
                converged: false,
                iterations: iteration,
                separated: true,
            };
        };
        let step = chol.solve(&score);
        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut halvings = 0;
        loop {
            candidate = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let value = penalized(&candidate);
            if value.is_finite() && value >= objective - 1e-12 * objective.abs().max(1.0) {
                objective = value;
                break;
            }
            halvings += 1;
            if halvings > 40 {
                // no ascent direction left
                return IrlsOutcome {
                    beta,
                    converged: true,
                    iterations: iteration,
                    separated: false,
                };
            }
            scale *= 0.5;
        }
        let change = step.iter().map(|s| (scale * s).abs()).fold(0.0, f64::max);
        beta = candidate;
        if change < opts.tolerance {
            return IrlsOutcome {
                beta,
                converged: true,
                iterations: iteration,
                separated: false,
            };
        }
        if ridge == 0.0 && design.eta(&beta).iter().any(|e| e.abs() > ETA_LIMIT) {
            return IrlsOutcome {
                beta,
                converged: false,
                iterations: iteration,
                separated: true,
            };
        }
    }
    IrlsOutcome {
        beta,
        converged: false,
        iterations: opts.max_iterations,
        separated: false,
    }
}

/// Maximum-likelihood logit fit with an intercept added in front of `x`.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[u8], opts: &FitOptions) -> Result<RegressionFit> {
    if y.len() != x.nrows() {
        return Err(Error::Contract(format!(
            "{} labels for {} design rows",
            y.len(),
            x.nrows()
        )));
    }
    if y.is_empty() {
        return Err(Error::InsufficientData("no observations to fit".into()));
    }
    if opts.ridge < 0.0 {
        return Err(Error::Config("ridge penalty must be non-negative".into()));
    }
    let names: Vec<String> = std::iter::once("(Intercept)".to_string())
        .chain(match &opts.names {
            Some(n) if n.len() == x.ncols() => n.clone(),
            Some(n) => {
                return Err(Error::Contract(format!(
                    "{} names for {} columns",
                    n.len(),
                    x.ncols()
                )))
            }
            None => (1..=x.ncols()).map(|i| format!("x{i}")).collect(),
        })
        .collect();
    let design = Design::new(x);
    // a positive penalty makes the information matrix definite
    let collinear = if opts.ridge == 0.0 {
        design.collinear_columns()
    } else {
        Vec::new()
    };
    if !collinear.is_empty() {
        return Err(Error::RankDeficient {
            columns: collinear.into_iter().map(|c| names[c].clone()).collect(),
        });
    }

    let mut ridge = opts.ridge;
    let mut outcome = irls(&design, y, ridge, opts);
    let separation = outcome.separated;
    if separation && ridge == 0.0 {
        log::debug!("separation detected; refitting with ridge {SEPARATION_RIDGE}");
        ridge = SEPARATION_RIDGE;
        outcome = irls(&design, y, ridge, opts);
    }

    let eta = design.eta(&outcome.beta);
    let (mut info, _) = design.information_and_score(y, &eta);
    for i in 0..design.cols {
        info[(i, i)] += ridge;
    }
    let covariance = info
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| info.try_inverse())
        .ok_or_else(|| Error::Undefined("information matrix is singular".into()))?;
    let std_errors: Vec<f64> = (0..design.cols).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
    let z_values = outcome
        .beta
        .iter()
        .zip(&std_errors)
        .map(|(b, s)| b / s)
        .collect();
    Ok(RegressionFit {
        names,
        log_likelihood: design.log_likelihood(y, &outcome.beta),
        coefficients: outcome.beta,
        std_errors,
        z_values,
        converged: outcome.converged,
        iterations: outcome.iterations,
        ridge,
        separation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn simulate(rng: &mut impl Rng, n: usize, beta: &[f64]) -> (DMatrix<f64>, Vec<u8>) {
        let p = beta.len() - 1;
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..n)
            .map(|r| {
                let eta = beta[0] + (0..p).map(|c| x[(r, c)] * beta[c + 1]).sum::<f64>();
                u8::from(rng.gen::<f64>() < sigmoid(eta))
            })
            .collect();
        (x, y)
    }

    /// Standard errors from a finite-difference Hessian of the log-likelihood.
    pub(crate) fn finite_difference_se(x: &DMatrix<f64>, y: &[u8], beta: &[f64]) -> Vec<f64> {
        let p = beta.len();
        let f = |b: &[f64]| log_likelihood(x, y, b);
        let second = |i: usize, j: usize, h: f64| {
            let shift = |di: f64, dj: f64| {
                let mut b = beta.to_vec();
                b[i] += di;
                b[j] += dj;
                f(&b)
            };
            (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h)
        };
        let mut hess = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                // Richardson extrapolation removes the O(h²) term
                let h = 1e-2;
                let v = (4.0 * second(i, j, h / 2.0) - second(i, j, h)) / 3.0;
                hess[(i, j)] = -v;
                hess[(j, i)] = -v;
            }
        }
        let inv = hess.try_inverse().unwrap();
        (0..p).map(|i| inv[(i, i)].sqrt()).collect()
    }

    #[test]
    fn recovers_known_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = [0.5, -1.0, 2.0];
        let (x, y) = simulate(&mut rng, 50_000, &truth);
        let fit = fit_logistic(&x, &y, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(!fit.separation);
        for (b, t) in fit.coefficients.iter().zip(truth) {
            assert!((b - t).abs() < 0.05, "{b} vs {t}");
        }
        for (z, (b, s)) in fit.z_values.iter().zip(fit.coefficients.iter().zip(&fit.std_errors)) {
            assert_eq!(*z, b / s);
        }
    }

    #[test]
    fn standard_errors_match_finite_difference_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let p = rng.gen_range(1..=4);
            let beta: Vec<f64> = (0..=p).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let (x, y) = simulate(&mut rng, 2000, &beta);
            let fit = fit_logistic(&x, &y, &FitOptions::default()).unwrap();
            assert!(fit.converged);
            let fd = finite_difference_se(&x, &y, &fit.coefficients);
            for (a, b) in fit.std_errors.iter().zip(&fd) {
                assert!(((a - b) / b).abs() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn fitted_probabilities_average_base_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y) = simulate(&mut rng, 3000, &[-0.7, 0.8, 0.3]);
        let fit = fit_logistic(&x, &y, &FitOptions::default()).unwrap();
        let mean_p = fit.predict_proba(&x).iter().sum::<f64>() / 3000.0;
        let base = y.iter().map(|&v| f64::from(v)).sum::<f64>() / 3000.0;
        assert!((mean_p - base).abs() < 1e-9);
    }

    #[test]
    fn null_model_z_values_are_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut clean = 0;
        for _ in 0..100 {
            let (x, _) = simulate(&mut rng, 500, &[0.0, 0.0, 0.0]);
            let y: Vec<u8> = (0..500).map(|_| u8::from(rng.gen::<bool>())).collect();
            let fit = fit_logistic(&x, &y, &FitOptions::default()).unwrap();
            if fit.z_values[1..].iter().all(|z| z.abs() < 3.0) {
                clean += 1;
            }
        }
        assert!(clean >= 95, "{clean}");
    }

    #[test]
    fn intercept_only_balanced() {
        let x = DMatrix::zeros(10, 0);
        let y = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let fit = fit_logistic(&x, &y, &FitOptions::default()).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.std_errors[0] - (4.0f64 / 10.0).sqrt() * 1.0).abs() < 1e-12);
    }

    #[test]
    fn separation_falls_back_to_ridge() {
        let x = DMatrix::from_column_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = vec![0, 0, 0, 1, 1, 1];
        let fit = fit_logistic(&x, &y, &FitOptions::default()).unwrap();
        assert!(fit.separation);
        assert_eq!(fit.ridge, SEPARATION_RIDGE);
        assert!(fit.coefficients[1] > 5.0);
        assert!(fit.std_errors.iter().all(|s| *s > 0.0 && s.is_finite()));
        assert_eq!(fit.predict(&x), y);
    }

    #[test]
    fn collinear_columns_are_named() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 1.0, 3.0, 6.0, 0.0, 4.0, 8.0, 2.0]);
        let y = vec![0, 1, 0, 1];
        let opts = FitOptions::with_names(vec!["a".into(), "b".into(), "c".into()]);
        match fit_logistic(&x, &y, &opts) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["b".to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        let constant = DMatrix::from_column_slice(4, 1, &[2.0, 2.0, 2.0, 2.0]);
        assert!(matches!(
            fit_logistic(&constant, &y, &FitOptions::default()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn label_count_must_match() {
        let x = DMatrix::zeros(3, 1);
        assert!(matches!(
            fit_logistic(&x, &[0, 1], &FitOptions::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn positive_rescaling_keeps_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let (x, y) = simulate(&mut rng, 800, &[0.2, 1.0, -0.5, 0.3]);
            let base = fit_logistic(&x, &y, &FitOptions::default()).unwrap();
            let col = rng.gen_range(0..3);
            let factor = rng.gen_range(0.1..10.0);
            let mut scaled = x.clone();
            scaled.column_mut(col).scale_mut(factor);
            let refit = fit_logistic(&scaled, &y, &FitOptions::default()).unwrap();
            assert_eq!(base.predict(&x), refit.predict(&scaled));
            let ratio = base.coefficients[col + 1] / refit.coefficients[col + 1];
            assert!((ratio - factor).abs() < 1e-6 * factor);
        }
    }
}
