//! Small descriptive statistics and the exact sign test used to compare
//! paired experiment arms.

use statrs::distribution::{Binomial, DiscreteCDF};

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Quantile with linear interpolation between order statistics
/// (`q = 0` is the minimum, `q = 1` the maximum).
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(xs: &[f64]) -> Option<f64> {
    quantile(xs, 0.5)
}

/// Summary of one experiment arm. Statistics cover successful trials only.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub failures: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub max: f64,
}

impl Summary {
    /// `None` entries are failed trials. Statistics are `NaN` if every
    /// trial failed.
    pub fn from_outcomes(outcomes: &[Option<f64>]) -> Self {
        let ok: Vec<f64> = outcomes.iter().flatten().copied().collect();
        let nan = f64::NAN;
        Summary {
            trials: outcomes.len(),
            failures: outcomes.len() - ok.len(),
            mean: mean(&ok).unwrap_or(nan),
            median: median(&ok).unwrap_or(nan),
            q25: quantile(&ok, 0.25).unwrap_or(nan),
            q75: quantile(&ok, 0.75).unwrap_or(nan),
            max: quantile(&ok, 1.0).unwrap_or(nan),
        }
    }
}

/// `P(X ≥ k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let dist = Binomial::new(0.5, n as u64).expect("p = 1/2 is valid");
    dist.sf(k as u64 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    /// Pairs where the first arm is strictly smaller.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// One-sided p-value for "the first arm tends to be smaller".
    pub p_value: f64,
}

/// Exact one-sided sign test on paired outcomes. A failed trial (`None`)
/// ranks above every success; two failures tie.
pub fn sign_test(first: &[Option<f64>], second: &[Option<f64>]) -> SignTest {
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (a, b) in first.iter().zip(second) {
        let a = a.unwrap_or(f64::INFINITY);
        let b = b.unwrap_or(f64::INFINITY);
        if a < b {
            wins += 1;
        } else if a > b {
            losses += 1;
        } else {
            ties += 1;
        }
    }
    SignTest {
        wins,
        losses,
        ties,
        p_value: binomial_upper_tail(wins + losses, wins),
    }
}
