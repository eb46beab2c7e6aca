//! Adaptive Gauss-Kronrod integration and the reference posteriors built on it.

use relirate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// K15 estimate and |K15 − G7| for each component of a vector integrand.
fn kronrod<const K: usize>(f: &mut impl FnMut(f64) -> [f64; K], a: f64, b: f64) -> ([f64; K], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; K];
    let mut g = [0.0; K];
    for j in 0..8 {
        let pts: &[f64] = if j == 7 { &[0.0] } else { &[-1.0, 1.0] };
        for &s in pts {
            let v = f(c + s * h * XGK[j]);
            for m in 0..K {
                k[m] += WGK[j] * v[m];
                if j % 2 == 1 {
                    g[m] += WG[j / 2] * v[m];
                }
            }
        }
    }
    let mut err = 0.0_f64;
    for m in 0..K {
        k[m] *= h;
        err = err.max((k[m] - g[m] * h).abs());
    }
    (k, err)
}

/// Interval budget of one global adaptive integration.
const MAX_INTERVALS: usize = 4000;

struct Piece<const K: usize> {
    a: f64,
    b: f64,
    est: [f64; K],
    err: f64,
}

/// Integrates a vector-valued function across the panels `breaks[i]..breaks[i+1]`,
/// bisecting the worst interval until the summed error estimate is below `tol`.
pub fn integrate_panels<const K: usize>(mut f: impl FnMut(f64) -> [f64; K], breaks: &[f64], tol: f64) -> [f64; K] {
    let mut pieces: Vec<Piece<K>> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (est, err) = kronrod(&mut f, w[0], w[1]);
            Piece { a: w[0], b: w[1], est, err }
        })
        .collect();
    while !pieces.is_empty() && pieces.len() < MAX_INTERVALS {
        let total_err: f64 = pieces.iter().map(|p| p.err).sum();
        if total_err <= tol {
            break;
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .expect("at least one panel");
        let Piece { a, b, .. } = pieces.swap_remove(worst);
        let m = 0.5 * (a + b);
        for (lo, hi) in [(a, m), (m, b)] {
            let (est, mut err) = kronrod(&mut f, lo, hi);
            if m <= a || m >= b {
                err = 0.0;
            }
            pieces.push(Piece { a: lo, b: hi, est, err });
        }
    }
    let mut total = [0.0; K];
    for p in &pieces {
        for k in 0..K {
            total[k] += p.est[k];
        }
    }
    total
}

/// Scalar convenience wrapper over `[a, b]` split into `panels` equal pieces.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let breaks: Vec<f64> = (0..=panels).map(|k| a + (b - a) * k as f64 / panels as f64).collect();
    integrate_panels(|x| [f(x)], &breaks, tol)[0]
}

fn ln_gamma(x: f64) -> f64 {
    // Stirling series after shifting the argument above 10; independent of the core's Lanczos form.
    let mut shift = 0.0;
    let mut x = x;
    while x < 10.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let x2 = x * x;
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x2 * x2 * x)
        - 1.0 / (1680.0 * x2 * x2 * x2 * x)
}

/// A beta distribution whose CDF is evaluated by integrating its density.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureBeta {
    pub a: f64,
    pub b: f64,
    offset: f64,
    total: f64,
}

/// Target absolute error of a CDF value.
pub const CDF_TOL: f64 = 1e-13;

impl QuadratureBeta {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!("beta shapes must be positive, got ({a}, {b})")));
        }
        let offset = if a >= 1.0 && b >= 1.0 && a + b > 2.0 {
            let mode = (a - 1.0) / (a + b - 2.0);
            log_kernel(a, b, mode)
        } else {
            0.0
        };
        let mut q = QuadratureBeta { a, b, offset, total: 1.0 };
        q.total = q.raw_mass(0.0, 1.0, 0.0);
        q.total = q.raw_mass(0.0, 1.0, CDF_TOL * q.total);
        Ok(q)
    }

    fn breaks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (a, b) = (self.a, self.b);
        let mean = a / (a + b);
        let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
        let mut pts = vec![lo, hi];
        for j in -12..=12 {
            let t = mean + j as f64 * sd * 0.5;
            if t > lo && t < hi {
                pts.push(t);
            }
        }
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();
        pts
    }

    /// Unnormalized mass on `[lo, hi]`, split at 1/2 so each singular end gets its substitution.
    fn raw_mass(&self, lo: f64, hi: f64, tol: f64) -> f64 {
        let (a, b, off) = (self.a, self.b, self.offset);
        let mut total = 0.0;
        let (l, r) = (lo, hi.min(0.5));
        if r > l {
            total += if a < 1.0 {
                // u = t^a
                let f = |u: f64| ((b - 1.0) * (-u.powf(1.0 / a)).ln_1p() - off).exp() / a;
                let (ul, ur) = (l.powf(a), r.powf(a));
                integrate_panels(|u| [f(u)], &self.breaks_sub(ul, ur), tol)[0]
            } else {
                integrate_panels(|t| [(log_kernel(a, b, t) - off).exp()], &self.breaks(l, r), tol)[0]
            };
        }
        let (l, r) = (lo.max(0.5), hi);
        if r > l {
            total += if b < 1.0 {
                // v = (1 − t)^b
                let f = |v: f64| ((a - 1.0) * (-v.powf(1.0 / b)).ln_1p() - off).exp() / b;
                let (vl, vr) = ((1.0 - r).powf(b), (1.0 - l).powf(b));
                integrate_panels(|v| [f(v)], &self.breaks_sub(vl, vr), tol)[0]
            } else {
                integrate_panels(|t| [(log_kernel(a, b, t) - off).exp()], &self.breaks(l, r), tol)[0]
            };
        }
        total
    }

    fn breaks_sub(&self, lo: f64, hi: f64) -> Vec<f64> {
        (0..=16).map(|k| lo + (hi - lo) * k as f64 / 16.0).collect()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let tol = CDF_TOL * self.total;
        if x <= self.a / (self.a + self.b) {
            (self.raw_mass(0.0, x, tol) / self.total).clamp(0.0, 1.0)
        } else {
            (1.0 - self.raw_mass(x, 1.0, tol) / self.total).clamp(0.0, 1.0)
        }
    }

    /// Quantile by bisection on the quadrature CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn normalizer_ln(&self) -> f64 {
        self.total.ln() + self.offset
    }
}

fn log_kernel(a: f64, b: f64, t: f64) -> f64 {
    (a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p()
}

/// Ln of the beta function by Stirling's series, for cross-checks.
pub fn ln_beta_reference(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Reference assessment of a beta-binomial posterior, computed without the core's
/// incomplete-beta routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleAssessment {
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub relative_precision: f64,
}

pub fn exact_conjugate_oracle(y: u64, n: u64, a: f64, b: f64, level: f64) -> Result<OracleAssessment> {
    if y > n {
        return Err(Error::invalid(format!("events {y} exceed trials {n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level {level} outside (0, 1)")));
    }
    let post = QuadratureBeta::new(a + y as f64, b + (n - y) as f64)?;
    let tail = 0.5 * (1.0 - level);
    let median = post.quantile(0.5);
    let ci_low = post.quantile(tail);
    let ci_high = post.quantile(1.0 - tail);
    let width = ci_high - ci_low;
    let relative_precision = median.min(1.0 - median) / width;
    Ok(OracleAssessment { median, ci_low, ci_high, relative_precision })
}

/// Posterior moments of the two regional rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoNodeMoments {
    pub mean: [f64; 2],
    pub var: [f64; 2],
}

/// Posterior of `(π₁, π₂)` for two neighboring regions with fixed `σ²` and `τ²`.
///
/// With `beta0 = None` the intercept has a flat prior and is integrated out, leaving
/// `η₁ − η₂ ~ N(0, τ² + 2σ²)`; with `Some(b)` the pair is Gaussian around `b` with
/// variance `σ² + τ²/4` and covariance `−τ²/4`. Moments are found by nested adaptive
/// quadrature over a box of ±`12` Laplace standard deviations around the mode.
pub fn quadrature_posterior_2node(
    y: [u64; 2],
    n: [u64; 2],
    sigma2: f64,
    tau2: f64,
    beta0: Option<f64>,
    tol: f64,
) -> Result<TwoNodeMoments> {
    if y[0] > n[0] || y[1] > n[1] {
        return Err(Error::invalid("events exceed trials"));
    }
    if !(sigma2 > 0.0 && tau2 >= 0.0) {
        return Err(Error::invalid("variances must be positive"));
    }
    // Gaussian part as a precision matrix and mean.
    let (prec, centre) = match beta0 {
        None => {
            let v = tau2 + 2.0 * sigma2;
            ([[1.0 / v, -1.0 / v], [-1.0 / v, 1.0 / v]], [0.0, 0.0])
        }
        Some(b) => {
            let (d, c) = (sigma2 + tau2 / 4.0, -tau2 / 4.0);
            let det = d * d - c * c;
            ([[d / det, -c / det], [-c / det, d / det]], [b, b])
        }
    };
    let yf = [y[0] as f64, y[1] as f64];
    let nf = [n[0] as f64, n[1] as f64];
    let logpost = |e: [f64; 2]| {
        let mut s = 0.0;
        for k in 0..2 {
            s += yf[k] * e[k] - nf[k] * softplus(e[k]);
        }
        let d = [e[0] - centre[0], e[1] - centre[1]];
        s - 0.5 * (prec[0][0] * d[0] * d[0] + 2.0 * prec[0][1] * d[0] * d[1] + prec[1][1] * d[1] * d[1])
    };

    // Newton's method for the mode.
    let mut e = [0.0; 2];
    for k in 0..2 {
        e[k] = ((yf[k] + 0.5) / (nf[k] - yf[k] + 0.5)).ln();
    }
    let mut hess = [[0.0; 2]; 2];
    for _ in 0..200 {
        let mut g = [0.0; 2];
        let mut h = prec;
        for k in 0..2 {
            let p = expit(e[k]);
            let d = [e[0] - centre[0], e[1] - centre[1]];
            g[k] = yf[k] - nf[k] * p - (prec[k][0] * d[0] + prec[k][1] * d[1]);
            h[k][k] += nf[k] * p * (1.0 - p);
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = [(h[1][1] * g[0] - h[0][1] * g[1]) / det, (h[0][0] * g[1] - h[1][0] * g[0]) / det];
        e[0] += step[0].clamp(-2.0, 2.0);
        e[1] += step[1].clamp(-2.0, 2.0);
        hess = h;
        if step[0].abs() + step[1].abs() < 1e-12 {
            break;
        }
    }
    let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
    if !(det > 0.0) {
        return Err(Error::NoConvergence { what: "two-node posterior mode", iterations: 200 });
    }
    let sd = [(hess[1][1] / det).sqrt(), (hess[0][0] / det).sqrt()];
    let peak = logpost(e);
    let half = 12.0;
    let breaks = |k: usize| -> Vec<f64> { (0..=24).map(|j| e[k] + sd[k] * (-half + j as f64)).collect() };
    let (b0, b1) = (breaks(0), breaks(1));

    // [mass, E π₁, E π₁², E π₂, E π₂²]
    let outer = integrate_panels(
        |x1| {
            let p1 = expit(x1);
            let inner = integrate_panels(
                |x2| {
                    let w = (logpost([x1, x2]) - peak).exp();
                    let p2 = expit(x2);
                    [w, w * p2, w * p2 * p2]
                },
                &b1,
                tol,
            );
            [inner[0], inner[0] * p1, inner[0] * p1 * p1, inner[1], inner[2]]
        },
        &b0,
        tol,
    );
    let z = outer[0];
    let m1 = outer[1] / z;
    let m2 = outer[3] / z;
    Ok(TwoNodeMoments { mean: [m1, m2], var: [outer[2] / z - m1 * m1, outer[4] / z - m2 * m2] })
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_gaussians() {
        let v = integrate(|x| x * x * x - x, 0.0, 2.0, 1, 1e-14);
        assert!((v - 2.0).abs() < 1e-13);
        let g = integrate(|x| (-0.5 * x * x).exp(), -12.0, 12.0, 8, 1e-14);
        assert!((g - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn beta_normalizer_matches_stirling() {
        for &(a, b) in &[(2.0, 3.0), (0.5, 0.5), (16.01, 1600.0), (0.3, 40.0), (250.0, 0.7)] {
            let q = QuadratureBeta::new(a, b).unwrap();
            assert!((q.normalizer_ln() - ln_beta_reference(a, b)).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn uniform_and_symmetric_cases() {
        let u = QuadratureBeta::new(1.0, 1.0).unwrap();
        assert!((u.cdf(0.3) - 0.3).abs() < 1e-13);
        let s = QuadratureBeta::new(0.5, 0.5).unwrap();
        // arcsine law
        let x: f64 = 0.2;
        let exact = 2.0 / std::f64::consts::PI * x.sqrt().asin();
        assert!((s.cdf(x) - exact).abs() < 1e-11);
        assert!((s.quantile(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_node_prior_limit() {
        // With no data the fixed-intercept posterior is the Gaussian prior.
        let m = quadrature_posterior_2node([0, 0], [0, 0], 0.05, 0.2, Some(0.0), 1e-12).unwrap();
        assert!((m.mean[0] - 0.5).abs() < 1e-10 && (m.mean[1] - 0.5).abs() < 1e-10);
    }
}
