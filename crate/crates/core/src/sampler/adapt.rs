/// Acceptance band targeted by the burn-in adaptation of the `η` proposals.
pub const TARGET_ACCEPTANCE: (f64, f64) = (0.3, 0.5);

const MIN_SCALE: f64 = 1e-4;
const MAX_SCALE: f64 = 50.0;

/// New proposal sd after a window with the given acceptance rate.
pub fn adapt_proposal_scale(scale: f64, acceptance: f64) -> f64 {
    let (lo, hi) = TARGET_ACCEPTANCE;
    let factor = if acceptance > hi || acceptance < lo {
        (2.0 * (acceptance - 0.5 * (lo + hi))).exp()
    } else {
        1.0
    };
    (scale * factor).clamp(MIN_SCALE, MAX_SCALE)
}

/// Rescales each region's proposal from its accept count over `window` iterations;
/// counts are reset.
pub fn adapt_proposals(scales: &mut [f64], accepted: &mut [usize], window: usize) {
    for (s, a) in scales.iter_mut().zip(accepted.iter_mut()) {
        *s = adapt_proposal_scale(*s, *a as f64 / window as f64);
        *a = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_of_adjustment() {
        assert!(adapt_proposal_scale(0.5, 0.9) > 0.5);
        assert!(adapt_proposal_scale(0.5, 0.1) < 0.5);
        assert_eq!(adapt_proposal_scale(0.5, 0.4), 0.5);
    }

    #[test]
    fn window_counts_reset() {
        let mut s = vec![1.0, 1.0];
        let mut a = vec![90, 10];
        adapt_proposals(&mut s, &mut a, 100);
        assert!(s[0] > 1.0 && s[1] < 1.0);
        assert_eq!(a, vec![0, 0]);
    }
}
