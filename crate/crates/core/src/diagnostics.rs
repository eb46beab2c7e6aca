//! Single-chain convergence summaries: effective sample size and split R-hat.

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn autocorrelation(x: &[f64], mean: f64, var: f64, lag: usize) -> f64 {
    let n = x.len();
    let s: f64 = (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum();
    s / (n as f64 * var)
}

/// Effective sample size using Geyer's initial monotone sequence estimator.
///
/// Constant series report the raw length.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let (mean, var) = mean_var(x);
    if var <= 0.0 {
        return n as f64;
    }
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = autocorrelation(x, mean, var, lag) + autocorrelation(x, mean, var, lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64 * (n as f64).log10())
}

/// Potential scale reduction from the two halves of one chain.
pub fn split_rhat(x: &[f64]) -> f64 {
    let half = x.len() / 2;
    if half < 2 {
        return f64::NAN;
    }
    let (a, b) = (&x[..half], &x[x.len() - half..]);
    let h = half as f64;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    // unbiased within-chain variances
    let w = 0.5 * (va + vb) * h / (h - 1.0);
    if w <= 0.0 {
        return 1.0;
    }
    let grand = 0.5 * (ma + mb);
    let between = h * ((ma - grand).powi(2) + (mb - grand).powi(2));
    let var_plus = (h - 1.0) / h * w + between / h;
    (var_plus / w).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ess_of_white_noise_is_near_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let ess = effective_sample_size(&x);
        assert!(ess > 3000.0 && ess < 5500.0, "{ess}");
        assert!((split_rhat(&x) - 1.0).abs() < 0.02);
    }

    #[test]
    fn ess_of_ar1_matches_theory() {
        // AR(1) with φ = 0.9: n (1 − φ)/(1 + φ) ≈ n / 19
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = vec![0.0; 40_000];
        for t in 1..x.len() {
            let e: f64 = rng.random::<f64>() - 0.5;
            x[t] = 0.9 * x[t - 1] + e;
        }
        let ess = effective_sample_size(&x);
        let expected = 40_000.0 / 19.0;
        assert!((ess / expected - 1.0).abs() < 0.25, "{ess} vs {expected}");
    }

    #[test]
    fn trending_chain_has_large_rhat() {
        let x: Vec<f64> = (0..1000).map(|t| t as f64).collect();
        assert!(split_rhat(&x) > 1.5);
        assert_eq!(effective_sample_size(&[2.0; 100]), 100.0);
    }
}
