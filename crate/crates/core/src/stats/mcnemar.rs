use serde::Serialize;

use crate::error::{Error, Result};

/// Discordant-pair totals below this use the exact binomial test.
pub const EXACT_THRESHOLD: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McNemar {
    /// Continuity-corrected chi-square statistic (reported for both branches).
    pub statistic: f64,
    pub p_two_tailed: f64,
    /// `a` correct, `b` wrong.
    pub n01: usize,
    /// `a` wrong, `b` correct.
    pub n10: usize,
    pub exact: bool,
}

/// Paired comparison of two classifiers' predictions against `truth`.
pub fn mcnemar(pred_a: &[u8], pred_b: &[u8], truth: &[u8]) -> Result<McNemar> {
    if pred_a.len() != truth.len() || pred_b.len() != truth.len() {
        return Err(Error::Contract("prediction and truth vectors differ in length".into()));
    }
    let (mut n01, mut n10) = (0, 0);
    for ((a, b), t) in pred_a.iter().zip(pred_b).zip(truth) {
        match (a == t, b == t) {
            (true, false) => n01 += 1,
            (false, true) => n10 += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(n01, n10))
}

pub fn mcnemar_counts(n01: usize, n10: usize) -> McNemar {
    let n = n01 + n10;
    if n == 0 {
        return McNemar {
            statistic: 0.0,
            p_two_tailed: 1.0,
            n01,
            n10,
            exact: true,
        };
    }
    let corrected = (n01.abs_diff(n10) as f64 - 1.0).max(0.0);
    let statistic = corrected * corrected / n as f64;
    if n < EXACT_THRESHOLD {
        McNemar {
            statistic,
            p_two_tailed: exact_two_tailed(n01.min(n10), n),
            n01,
            n10,
            exact: true,
        }
    } else {
        McNemar {
            statistic,
            p_two_tailed: statrs::function::erf::erfc((statistic / 2.0).sqrt()),
            n01,
            n10,
            exact: false,
        }
    }
}

/// `min(1, 2·P[X ≤ m])` for `X ~ Binomial(n, 1/2)`.
fn exact_two_tailed(m: usize, n: usize) -> f64 {
    let mut coef = 1.0f64;
    let mut tail = 1.0f64;
    for i in 1..=m {
        coef = coef * (n - i + 1) as f64 / i as f64;
        tail += coef;
    }
    (2.0 * tail * 0.5f64.powi(n as i32)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integer binomial tail divided by 2^n.
    fn binomial_oracle(m: usize, n: usize) -> f64 {
        let mut pascal = vec![vec![0u64; n + 1]; n + 1];
        for i in 0..=n {
            pascal[i][0] = 1;
            for j in 1..=i {
                pascal[i][j] = pascal[i - 1][j - 1] + if j < i { pascal[i - 1][j] } else { 0 };
            }
        }
        let tail: u64 = (0..=m).map(|j| pascal[n][j]).sum();
        (2.0 * tail as f64 / (1u64 << n) as f64).min(1.0)
    }

    /// `2·(1 − Φ(√s))` by composite Simpson integration of the normal density.
    fn chi_square_oracle(s: f64) -> f64 {
        let a = s.sqrt();
        let b = a + 40.0;
        let steps = 200_000;
        let h = (b - a) / steps as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut sum = phi(a) + phi(b);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * phi(a + i as f64 * h);
        }
        2.0 * sum * h / 3.0
    }

    #[test]
    fn identical_classifiers() {
        let r = mcnemar(&[1, 0, 1], &[1, 0, 1], &[1, 1, 0]).unwrap();
        assert_eq!((r.n01, r.n10, r.statistic, r.p_two_tailed), (0, 0, 0.0, 1.0));
    }

    #[test]
    fn counts_orientation() {
        let truth = [1, 1, 0, 0, 1];
        let a = [1, 1, 0, 1, 0];
        let b = [0, 1, 1, 1, 1];
        let r = mcnemar(&a, &b, &truth).unwrap();
        assert_eq!((r.n01, r.n10), (2, 1));
        assert!(mcnemar(&a, &b[..4], &truth).is_err());
    }

    #[test]
    fn exact_branch_examples() {
        let r = mcnemar_counts(10, 0);
        assert!(r.exact);
        assert!((r.p_two_tailed - 2.0 * 0.5f64.powi(10)).abs() < 1e-15);
        assert!((r.p_two_tailed - 0.001953125).abs() < 1e-12);
    }

    #[test]
    fn chi_square_branch_example() {
        let r = mcnemar_counts(100, 60);
        assert!(!r.exact);
        assert!((r.statistic - 9.50625).abs() < 1e-12);
        assert!((r.p_two_tailed - 0.00205).abs() < 5e-5, "{}", r.p_two_tailed);
    }

    #[test]
    fn exact_branch_matches_integer_oracle() {
        for n in 1..EXACT_THRESHOLD {
            for n01 in 0..=n {
                let r = mcnemar_counts(n01, n - n01);
                assert!(r.exact);
                let oracle = binomial_oracle(n01.min(n - n01), n);
                assert!((r.p_two_tailed - oracle).abs() < 1e-12, "n={n} n01={n01}");
            }
        }
    }

    #[test]
    fn chi_square_branch_matches_quadrature() {
        for (n01, n10) in [(25, 0), (13, 12), (20, 10), (100, 60), (60, 100), (400, 350), (1000, 900), (70, 30)] {
            let r = mcnemar_counts(n01, n10);
            assert!(!r.exact);
            let oracle = chi_square_oracle(r.statistic);
            assert!((r.p_two_tailed - oracle).abs() < 1e-9, "{n01}/{n10}: {} vs {oracle}", r.p_two_tailed);
        }
    }
}
