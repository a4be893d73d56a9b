//! Summary statistics for Monte-Carlo outputs.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of `ln curve[t-1]` against `ln t` over `t` in `[ceil(T/4), T]`.
/// `None` if the curve is not positive on that window.
pub fn loglog_slope(curve: &[f64]) -> Option<f64> {
    let big_t = curve.len();
    let start = big_t.div_ceil(4).max(1);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in start..=big_t {
        let v = curve[t - 1];
        if v <= 0.0 {
            return None;
        }
        x.push((t as f64).ln());
        y.push(v.ln());
    }
    (x.len() >= 2).then(|| ols_slope(&x, &y))
}

/// Pointwise mean of equally long curves.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let len = curves.first().map_or(0, Vec::len);
    (0..len).map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64).collect()
}

/// Upper `level` quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile(level: f64, df: f64) -> f64 {
    // statrs loses accuracy in the far tail of df; the normal limit is exact to 1e-6 there.
    if df > 1e5 {
        return Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(level);
    }
    StudentsT::new(0.0, 1.0, df).expect("valid t distribution").inverse_cdf(level)
}

/// One-sided test of `mean(diffs) > 0` at confidence `level`: returns the
/// t statistic and whether it exceeds the critical value.
pub fn one_sided_positive(diffs: &[f64], level: f64) -> (f64, bool) {
    let se = std_error(diffs);
    let m = mean(diffs);
    let stat = if se > 0.0 {
        m / se
    } else if m > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    (stat, stat > t_quantile(level, (diffs.len() - 1).max(1) as f64))
}
