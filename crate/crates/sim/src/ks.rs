//! Kolmogorov-Smirnov statistics with asymptotic p-values.

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// p-value for statistic `d` at effective sample size `n`, with the Stephens correction.
pub fn ks_pvalue(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample test against a continuous CDF; `n_eff` defaults to the sample size.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64, n_eff: Option<f64>) -> KsResult {
    let mut x = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len() as f64;
    let mut d = 0.0_f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    KsResult { statistic: d, p_value: ks_pvalue(d, n_eff.unwrap_or(n)) }
}

/// Two-sample statistic `sup |F_a − F_b|`.
pub fn ks_statistic_two(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap());
    y.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample test; `ess` replaces the sample sizes for autocorrelated draws.
pub fn ks_two_sample(a: &[f64], b: &[f64], ess: Option<(f64, f64)>) -> KsResult {
    let d = ks_statistic_two(a, b);
    let (ea, eb) = ess.unwrap_or((a.len() as f64, b.len() as f64));
    KsResult { statistic: d, p_value: ks_pvalue(d, ea * eb / (ea + eb)) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn survival_reference_points() {
        // Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(1.63) - 0.0098).abs() < 5e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn uniform_sample_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let r = ks_one_sample(&x, |v| v.clamp(0.0, 1.0), None);
        assert!(r.p_value > 0.01, "{r:?}");
        let shifted: Vec<f64> = x.iter().map(|v| v * 0.9).collect();
        assert!(ks_one_sample(&shifted, |v| v.clamp(0.0, 1.0), None).p_value < 1e-6);
    }

    #[test]
    fn two_sample_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_statistic_two(&a, &a), 0.0);
        assert_eq!(ks_statistic_two(&a, &[4.0, 5.0]), 1.0);
        assert_eq!(ks_statistic_two(&[1.0, 3.0], &[2.0, 4.0]), 0.5);
    }
}
