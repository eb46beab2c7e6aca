//! Multi-year pooling experiment: how many counties become reliable when adjacent
//! years are combined.

use std::collections::{BTreeMap, BTreeSet};

use relirate::reliability::{assess_conjugate, prior_from_rate};
use relirate::{BetaPrior, CountRecord, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationRow {
    pub stratum: String,
    pub window_years: usize,
    pub windows: usize,
    pub regions: usize,
    /// Mean over windows of the share of regions rated reliable.
    pub reliable_fraction: f64,
    /// Reliable region count per window, by first year.
    pub reliable_counts: Vec<(i32, usize)>,
}

/// Pools `y` and `n` over every run of `window_years` consecutive years and rates each
/// pooled region with a beta prior worth `a0` cases at the stratum's overall rate.
/// Regions with no trials in a window count as unreliable.
pub fn aggregation_experiment(data: &[CountRecord], window_years: usize, a0: f64, level: f64) -> Result<Vec<AggregationRow>> {
    if window_years == 0 {
        return Err(Error::invalid("window must cover at least one year"));
    }
    let mut by_stratum: BTreeMap<&str, Vec<&CountRecord>> = BTreeMap::new();
    for r in data {
        r.validate()?;
        by_stratum.entry(r.stratum.as_str()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (stratum, rows) in by_stratum {
        let (ys, ns) = rows.iter().fold((0u64, 0u64), |(y, n), r| (y + r.events, n + r.trials));
        if ns == 0 || ys == 0 || ys == ns {
            return Err(Error::invalid(format!("stratum `{stratum}` has a degenerate overall rate")));
        }
        let prior: BetaPrior<f64> = prior_from_rate(ys as f64 / ns as f64, a0)?;
        let years: BTreeSet<i32> = rows.iter().map(|r| r.year).collect();
        let regions: BTreeSet<&str> = rows.iter().map(|r| r.region_id.as_str()).collect();
        let (first, last) = (*years.first().unwrap(), *years.last().unwrap());
        if (last - first + 1) < window_years as i32 {
            return Err(Error::invalid(format!("stratum `{stratum}` spans fewer than {window_years} years")));
        }
        let mut counts = Vec::new();
        for start in first..=(last + 1 - window_years as i32) {
            let end = start + window_years as i32;
            let mut pooled: BTreeMap<&str, (u64, u64)> = regions.iter().map(|r| (*r, (0, 0))).collect();
            for r in rows.iter().filter(|r| r.year >= start && r.year < end) {
                let e = pooled.get_mut(r.region_id.as_str()).unwrap();
                e.0 += r.events;
                e.1 += r.trials;
            }
            let mut reliable = 0;
            for &(y, n) in pooled.values() {
                if n > 0 && assess_conjugate(&CountRecord::counts(y, n)?, &prior, level)?.reliable {
                    reliable += 1;
                }
            }
            counts.push((start, reliable));
        }
        let reliable_fraction =
            counts.iter().map(|(_, c)| *c as f64 / regions.len() as f64).sum::<f64>() / counts.len() as f64;
        out.push(AggregationRow {
            stratum: stratum.to_owned(),
            window_years,
            windows: counts.len(),
            regions: regions.len(),
            reliable_fraction,
            reliable_counts: counts,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(region: &str, year: i32, y: u64, n: u64) -> CountRecord {
        CountRecord::new(region, "s", year, y, n).unwrap()
    }

    #[test]
    fn full_window_with_large_counts_is_all_reliable() {
        let data: Vec<_> = (2010..2015).flat_map(|t| [rec("a", t, 300, 3000), rec("b", t, 200, 2100)]).collect();
        let rows = aggregation_experiment(&data, 5, 5.0, 0.95).unwrap();
        assert_eq!(rows[0].windows, 1);
        assert_eq!(rows[0].reliable_fraction, 1.0);
    }

    #[test]
    fn too_long_window_is_an_error() {
        let data = vec![rec("a", 2010, 3, 30), rec("a", 2011, 4, 30)];
        assert!(aggregation_experiment(&data, 3, 5.0, 0.95).is_err());
        assert!(aggregation_experiment(&data, 0, 5.0, 0.95).is_err());
    }
}
