use relirate::informativeness::a0_trace;
use relirate::sampler::StallCounts;
use relirate::summary::assess_draws;
use relirate::{
    a_hat_binomial, fit, fit_restricted, fit_standard, AdjacencyGraph, CountRecord, Error, Info, ModelConfig,
    VariancePrior,
};
use relirate_sim::{pa, quadrature_posterior_2node, simulate, SimScenario, TrueRates};

fn short(cfg: ModelConfig) -> ModelConfig {
    cfg.with_iterations(12_000, 4_000, 4)
}

fn hispanic(seed: u64) -> Vec<CountRecord> {
    pa::simulate_stratum(&pa::HISPANIC, &[2019], seed).unwrap().records
}

#[test]
fn identical_inputs_give_identical_draws() {
    let g = pa::graph();
    let data = hispanic(1);
    let cfg = short(ModelConfig::restricted(5.0).with_seed(42));
    let a = fit(&data, &g, &cfg).unwrap();
    let b = fit(&data, &g, &cfg).unwrap();
    assert_eq!(a, b);
    let c = fit(&data, &g, &cfg.clone().with_seed(43)).unwrap();
    assert_ne!(a.beta0, c.beta0);
}

#[test]
fn default_run_retains_five_thousand_draws() {
    assert_eq!(ModelConfig::default().retained(), 5000);
}

#[test]
fn spatial_effects_sum_to_zero_in_every_draw() {
    let g = pa::graph();
    let d = fit_standard(&hispanic(2), &g, &short(ModelConfig::default().with_seed(1))).unwrap();
    for t in 0..d.n_draws() {
        let s: f64 = d.z.iter().map(|z| z[t]).sum();
        assert!(s.abs() < 1e-8, "draw {t}: {s}");
    }
}

#[test]
fn disconnected_graph_centers_each_component() {
    let ids = ["a", "b", "c", "d", "e", "f"];
    let g = AdjacencyGraph::build(&ids, &[("a", "b"), ("b", "c"), ("d", "e")]).unwrap();
    let data: Vec<CountRecord> = ids
        .iter()
        .zip([4, 9, 2, 7, 1, 3])
        .map(|(id, y)| CountRecord::new(*id, "s", 2019, y, 80).unwrap())
        .collect();
    let d = fit(&data, &g, &short(ModelConfig::default().with_seed(5))).unwrap();
    let f = d.region_index("f").unwrap();
    assert!(d.z[f].iter().all(|v| *v == 0.0));
    for t in 0..d.n_draws() {
        let s1: f64 = ["a", "b", "c"].iter().map(|r| d.z[d.region_index(r).unwrap()][t]).sum();
        let s2: f64 = ["d", "e"].iter().map(|r| d.z[d.region_index(r).unwrap()][t]).sum();
        assert!(s1.abs() < 1e-8 && s2.abs() < 1e-8);
    }
    assert_eq!(d.meta.n_components, 3);
}

#[test]
fn permuting_regions_permutes_draws() {
    let g = pa::graph();
    let data = hispanic(3);
    let cfg = short(ModelConfig::restricted(5.0).with_seed(9));
    let a = fit(&data, &g, &cfg).unwrap();

    let mut ids: Vec<String> = g.ids().to_vec();
    ids.reverse();
    let edges: Vec<(String, String)> =
        g.edges().iter().map(|&(i, j)| (g.id(j).to_owned(), g.id(i).to_owned())).collect();
    let g2 = AdjacencyGraph::build(&ids, &edges).unwrap();
    let mut shuffled = data.clone();
    shuffled.rotate_left(17);
    let b = fit(&shuffled, &g2, &cfg).unwrap();

    assert_eq!(a.beta0, b.beta0);
    assert_eq!(a.tau2, b.tau2);
    for (i, id) in a.region_ids.iter().enumerate() {
        let j = b.region_index(id).unwrap();
        assert_eq!(a.pi[i], b.pi[j], "{id}");
    }
}

#[test]
fn restricted_draws_satisfy_the_bound() {
    let g = pa::graph();
    for seed in 0..3 {
        let d = fit_restricted(&hispanic(seed), &g, &ModelConfig::restricted(5.0).with_seed(seed)).unwrap();
        assert_eq!(d.n_draws(), 5000);
        for t in 0..d.n_draws() {
            let a0 = a_hat_binomial(&Info::new(d.beta0[t], d.sigma2[t], d.tau2[t], 3)).unwrap();
            assert!(a0 < 5.0, "draw {t}: {a0}");
            assert_eq!(a0, d.a0_hat[t]);
        }
    }
}

#[test]
fn all_zero_counts_stay_finite_and_low() {
    let g = pa::graph();
    let data: Vec<CountRecord> =
        g.ids().iter().map(|id| CountRecord::new(id.clone(), "s", 2019, 0, 50).unwrap()).collect();
    let d = fit_standard(&data, &g, &short(ModelConfig::default().with_seed(4))).unwrap();
    let a = assess_draws(&d, 0.95).unwrap();
    // a flat intercept puts the prior median of every rate at 1/2
    assert!(a.iter().all(|r| r.assessment.median.is_finite() && r.assessment.median < 0.5));
    assert!(a.iter().all(|r| r.assessment.median < 0.05));
}

#[test]
fn credible_intervals_cover_planted_rates() {
    let g = pa::graph();
    let (mut covered, mut total) = (0, 0);
    for seed in 0..20 {
        let scenario = SimScenario {
            rates: TrueRates::Generative { beta0: -2.2, sigma2: 0.01, tau2: 0.1 },
            ..SimScenario::uniform(g.clone(), 0.1, 400, 100 + seed)
        };
        let sim = simulate(&scenario).unwrap();
        let cfg = ModelConfig::default().with_seed(seed).with_iterations(20_000, 5_000, 5);
        let a = assess_draws(&fit_standard(&sim.records, &g, &cfg).unwrap(), 0.95).unwrap();
        for (r, truth) in a.iter().zip(&sim.truth) {
            total += 1;
            if r.assessment.ci_low <= *truth && *truth <= r.assessment.ci_high {
                covered += 1;
            }
        }
    }
    let rate = covered as f64 / total as f64;
    assert!(rate >= 0.9, "coverage {rate}");
}

// With no trials the spatial effects keep their prior, `Cov(z) = τ² Q⁺` on the
// sum-zero subspace; for the path a-b-c, Q⁺ has diagonal (5, 2, 5)/9.
#[test]
fn path_of_three_recovers_car_covariance() {
    let g = AdjacencyGraph::build(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
    let data: Vec<CountRecord> =
        ["a", "b", "c"].iter().map(|id| CountRecord::new(*id, "s", 2019, 0, 0).unwrap()).collect();
    let mut cfg = ModelConfig::default().with_seed(8).with_iterations(220_000, 20_000, 2);
    cfg.sigma2_prior = VariancePrior::fixed(1.0);
    cfg.tau2_prior = VariancePrior::fixed(2.0);
    let d = fit(&data, &g, &cfg).unwrap();
    let n = d.n_draws() as f64;
    let cov = |i: usize, j: usize| d.z[i].iter().zip(&d.z[j]).map(|(a, b)| a * b).sum::<f64>() / n;
    let expected = [[10.0 / 9.0, -2.0 / 9.0, -8.0 / 9.0], [-2.0 / 9.0, 4.0 / 9.0, -2.0 / 9.0]];
    for i in 0..2 {
        for j in 0..3 {
            assert!((cov(i, j) - expected[i][j]).abs() < 0.05, "cov({i},{j}) = {} vs {}", cov(i, j), expected[i][j]);
        }
    }
    assert_eq!(d.meta.zero_trial_regions.len(), 3);
}

#[test]
fn two_node_posterior_matches_quadrature() {
    let g = AdjacencyGraph::build(&["A", "B"], &[("A", "B")]).unwrap();
    let settings = [([5u64, 5], [50u64, 50], 0.1, 0.5), ([2, 9], [40, 60], 0.05, 1.0), ([20, 3], [100, 30], 0.2, 0.2)];
    for (y, n, s2, t2) in settings {
        let data = vec![
            CountRecord::new("A", "s", 2019, y[0], n[0]).unwrap(),
            CountRecord::new("B", "s", 2019, y[1], n[1]).unwrap(),
        ];
        let mut cfg = ModelConfig::default().with_seed(11).with_iterations(200_000, 20_000, 2);
        cfg.sigma2_prior = VariancePrior::fixed(s2);
        cfg.tau2_prior = VariancePrior::fixed(t2);
        let d = fit(&data, &g, &cfg).unwrap();
        let q = quadrature_posterior_2node(y, n, s2, t2, None, 1e-10).unwrap();
        for k in 0..2 {
            let m = d.pi[k].iter().sum::<f64>() / d.n_draws() as f64;
            let v = d.pi[k].iter().map(|p| (p - m).powi(2)).sum::<f64>() / d.n_draws() as f64;
            assert!((m - q.mean[k]).abs() < 0.005, "{y:?} mean {m} vs {}", q.mean[k]);
            assert!((v / q.var[k] - 1.0).abs() < 0.1, "{y:?} var {v} vs {}", q.var[k]);
        }
    }
}

#[test]
fn proposal_scales_freeze_after_burn_in() {
    let g = pa::graph();
    let data = hispanic(6);
    let a = fit(&data, &g, &ModelConfig::default().with_seed(2).with_iterations(12_000, 6_000, 6)).unwrap();
    let b = fit(&data, &g, &ModelConfig::default().with_seed(2).with_iterations(30_000, 6_000, 6)).unwrap();
    assert_eq!(a.meta.proposal_sd, b.meta.proposal_sd);
    assert_eq!(a.beta0[..], b.beta0[..a.n_draws()]);
    assert!(b.meta.acceptance.iter().all(|r| (0.15..0.75).contains(r)), "{:?}", b.meta.acceptance);
}

#[test]
fn near_empty_constraint_region_stalls_without_the_exact_fallback() {
    let g = pa::graph();
    let mut cfg = short(ModelConfig::restricted(0.05).with_seed(1));
    cfg.exact_truncation = false;
    let err = fit(&hispanic(0), &g, &cfg).unwrap_err();
    assert!(err.is_diagnostic(), "{err}");
}

#[test]
fn exact_fallback_keeps_a_tight_bound() {
    let g = pa::graph();
    let d = fit(&hispanic(0), &g, &short(ModelConfig::restricted(0.05).with_seed(1))).unwrap();
    assert!(a0_trace(&d, 3).unwrap().iter().all(|&a| a < 0.05));
    let t = &d.meta.truncated;
    assert!(t.sigma2 + t.tau2 + t.beta0 > 0, "{t:?}");
    assert_eq!(d.meta.stalls, StallCounts::default());
}

#[test]
fn input_errors() {
    let g = pa::graph();
    let data = hispanic(0);
    let cfg = short(ModelConfig::default());
    assert!(matches!(fit(&data[1..], &g, &cfg), Err(Error::DimensionMismatch { .. })));
    let mut other_year = data.clone();
    other_year[5].year = 2018;
    assert!(matches!(fit(&other_year, &g, &cfg), Err(Error::InvalidInput(_))));
    let mut dup = data.clone();
    dup[3].region_id = dup[4].region_id.clone();
    assert!(matches!(fit(&dup, &g, &cfg), Err(Error::DuplicateNode(_))));
    let mut stranger = data.clone();
    stranger[0].region_id = "99999".into();
    assert!(matches!(fit(&stranger, &g, &cfg), Err(Error::UnknownNode(_))));
    assert!(fit_standard(&data, &g, &ModelConfig::restricted(5.0)).is_err());
    assert!(fit_restricted(&data, &g, &cfg).is_err());
    assert!(fit(&data, &g, &cfg.clone().with_iterations(100, 100, 1)).is_err());
}
