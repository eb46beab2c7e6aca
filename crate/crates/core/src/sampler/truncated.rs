//! Exact draws from the truncated full conditionals, used once plain rejection has
//! run out of attempts.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

const MAX_TRIES: usize = 100_000;

/// `N(0, 1)` restricted to `(a, b)`; either end may be infinite.
pub(crate) fn std_normal_between<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Option<f64> {
    if !(a < b) {
        return None;
    }
    if b <= 0.0 {
        return std_normal_between(rng, -b, -a).map(|z| -z);
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..MAX_TRIES {
        if a <= 0.0 && b - a >= 1.0 {
            let z: f64 = StandardNormal.sample(rng);
            if z > a && z < b {
                return Some(z);
            }
        } else if a <= 0.0 {
            let z = rng.random_range(a..b);
            if rng.random::<f64>() < (-0.5 * z * z).exp() {
                return Some(z);
            }
        } else if 0.5 * (b * b - a * a) < 1.0 {
            let z = rng.random_range(a..b);
            if rng.random::<f64>() < (0.5 * (a * a - z * z)).exp() {
                return Some(z);
            }
        } else {
            // exponential envelope on the right tail
            let e: f64 = Exp1.sample(rng);
            let z = a + e / lambda;
            if z < b && rng.random::<f64>() < (-0.5 * (z - lambda).powi(2)).exp() {
                return Some(z);
            }
        }
    }
    None
}

/// `N(mean, sd²)` restricted to `(lo, hi)`.
pub(crate) fn normal_between<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> Option<f64> {
    std_normal_between(rng, (lo - mean) / sd, (hi - mean) / sd).map(|z| mean + sd * z)
}

/// `IG(shape, scale)` restricted to `(floor, ∞)`; needs `shape ≥ 1`.
///
/// The reciprocal is `Gamma(shape, rate = scale)` on `(0, 1/floor)`. Left of the
/// mode its log-density lies under the tangent at the cut, giving an exponential
/// envelope; otherwise the untruncated gamma is accepted often enough.
pub(crate) fn inverse_gamma_above<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64, floor: f64) -> Option<f64> {
    if !(shape >= 1.0 && scale > 0.0) {
        return None;
    }
    let gamma = Gamma::new(shape, 1.0 / scale).ok()?;
    if !(floor > 0.0) {
        return Some(1.0 / gamma.sample(rng));
    }
    let c = 1.0 / floor;
    let log_f = |y: f64| (shape - 1.0) * y.ln() - scale * y;
    let lambda = (shape - 1.0) / c - scale;
    for _ in 0..MAX_TRIES {
        let y = if lambda > 0.0 {
            let u: f64 = rng.random();
            let w = -(u * (-lambda * c).exp_m1()).ln_1p() / lambda;
            let y = c - w;
            if !(y > 0.0) {
                continue;
            }
            let log_env = log_f(c) - lambda * w;
            if rng.random::<f64>().ln() >= log_f(y) - log_env {
                continue;
            }
            y
        } else {
            let y = gamma.sample(rng);
            if y >= c {
                continue;
            }
            y
        };
        if y > 0.0 {
            return Some(1.0 / y);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma_inc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_cdf(x: f64) -> f64 {
        // Φ via the regularized incomplete gamma: Φ(x) = (1 ± P(1/2, x²/2))/2
        let p = gamma_inc(0.5, 0.5 * x * x).unwrap();
        if x >= 0.0 { 0.5 * (1.0 + p) } else { 0.5 * (1.0 - p) }
    }

    fn ks(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws.len() as f64;
        draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn truncated_normal_matches_its_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (a, b) in [(-0.3, 0.2), (-2.0, 1.5), (1.0, 1.4), (3.0, f64::INFINITY), (6.0, 9.0), (f64::NEG_INFINITY, -4.0)] {
            let draws: Vec<f64> = (0..20_000).map(|_| std_normal_between(&mut rng, a, b).unwrap()).collect();
            assert!(draws.iter().all(|&z| z > a && z < b));
            let (fa, fb) = (normal_cdf(a), normal_cdf(b));
            // upper tails compared through the survival function to keep precision
            let d = if a > 0.0 {
                let (sa, sb) = (1.0 - fa, 1.0 - fb);
                ks(draws, |x| (sa - (1.0 - normal_cdf(x))) / (sa - sb))
            } else {
                ks(draws, |x| (normal_cdf(x) - fa) / (fb - fa))
            };
            assert!(d < 1.95 / (20_000f64).sqrt(), "({a}, {b}): {d}");
        }
        assert!(std_normal_between(&mut rng, 1.0, 1.0).is_none());
    }

    #[test]
    fn truncated_inverse_gamma_matches_its_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // (shape, scale, floor): deep tail, near the mode, inactive floor
        for (shape, scale, floor) in [(34.0, 0.15, 0.6), (5.0, 1.0, 0.3), (3.0, 0.5, 1e-6), (1.0, 0.2, 0.5)] {
            let draws: Vec<f64> =
                (0..20_000).map(|_| inverse_gamma_above(&mut rng, shape, scale, floor).unwrap()).collect();
            assert!(draws.iter().all(|&x| x > floor), "({shape}, {scale}, {floor})");
            // P(X ≤ x | X > L) = (P(Y < 1/L) − P(Y < 1/x)) / P(Y < 1/L), Y = 1/X
            let lower = |x: f64| gamma_inc(shape, scale / x).unwrap();
            let total = lower(floor);
            let d = ks(draws, |x| (total - lower(x)) / total);
            assert!(d < 1.95 / (20_000f64).sqrt(), "({shape}, {scale}, {floor}): {d}");
        }
    }
}
