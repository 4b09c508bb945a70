//! Summary statistics used to judge experiment outcomes.

use ggml_precoding::linalg::RngStream;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Lower `(1 − confidence)` percentile of the bootstrap distribution of the
/// mean of `diffs` (paired differences), from `resamples` resamples.
pub fn bootstrap_mean_lower_bound(diffs: &[f64], resamples: usize, confidence: f64, seed: u64) -> f64 {
    assert!(!diffs.is_empty() && resamples > 0);
    let n = diffs.len();
    let mut rng = RngStream::new(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..n).map(|_| diffs[(rng.next_u64() % n as u64) as usize]).sum();
            s / n as f64
        })
        .collect();
    ggml_precoding::channel::empirical_quantile(&mut means, 1.0 - confidence)
}

/// Least-squares line `y = a + b·x` and its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert!(x.len() == y.len() && x.len() >= 2);
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    LinearFit {
        intercept,
        slope,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_r_squared() {
        // fitted 0.3 + 0.8x leaves residuals (0.2, −0.6, 0.6, −0.2): ss_res 0.8, ss_tot 4
        let f = linear_fit(&[0.0, 1.0, 2.0, 3.0], &[0.5, 0.5, 2.5, 2.5]);
        assert!((f.slope - 0.8).abs() < 1e-12 && (f.intercept - 0.3).abs() < 1e-12);
        assert!((f.r_squared - 0.8).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_bounds() {
        assert!((bootstrap_mean_lower_bound(&[0.3; 10], 200, 0.95, 1) - 0.3).abs() < 1e-15);
        let d: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -0.2 }).collect();
        let lo = bootstrap_mean_lower_bound(&d, 2000, 0.95, 2);
        assert!(lo > 0.0 && lo < mean(&d));
        let centered: Vec<f64> = d.iter().map(|x| x - mean(&d)).collect();
        assert!(bootstrap_mean_lower_bound(&centered, 2000, 0.95, 2) < 0.0);
    }
}
