//! Worked examples: closed-form values checked against independent
//! computations in the test code.

mod common;

use ricci_core::bounds::{
    admissible_lambda, average_l2_bonnet_myers, exponential_concentration, log_sobolev_check,
    Analysis, BoundsError,
};
use ricci_core::chain::{build_chain, invariant_distribution};
use ricci_core::curvature::{default_mode, kappa_decomposition, kappa_global, PairMode};
use ricci_core::gallery::{
    generate, generate_with, superpose, tensorize, two_point_mixing, Graph, Preset,
};
use ricci_core::metric::{numbered_points, FiniteMetricSpace};
use ricci_core::transport::w1_sparse;
use ricci_core::Chain;

fn global(c: &Chain) -> f64 {
    kappa_global(c, default_mode(c), 0.0).unwrap().global_kappa
}

fn all_pairs(c: &Chain) -> f64 {
    kappa_global(c, PairMode::AllPairs, 0.0)
        .unwrap()
        .global_kappa
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn cube_and_multinomial_sizes() {
    let c = generate(&Preset::Cube { n: 4 }).unwrap();
    assert_eq!(c.len(), 16);
    assert!((global(&c) - 0.25).abs() < 1e-12);
    let m = generate(&Preset::Multinomial { n: 4, d: 2 }).unwrap();
    assert_eq!(m.len(), 15);
    assert!((all_pairs(&m) - 0.25).abs() < 1e-9);
}

#[test]
fn binomial_curvature_and_invariant_law() {
    for (n, p) in [(20usize, 0.1), (40, 0.05), (12, 0.5)] {
        let c = generate(&Preset::Binomial { n, p }).unwrap();
        assert!((all_pairs(&c) - 1.0 / n as f64).abs() < 1e-9);
        let nu = invariant_distribution(&c).unwrap().nu;
        for k in 0..=n {
            let exact =
                choose(n as u64, k as u64) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
            assert!(
                (nu.weight(k) - exact).abs() < 1e-12,
                "N={n} k={k}: {} vs {exact}",
                nu.weight(k)
            );
        }
    }
}

#[test]
fn ou_neighbour_curvature() {
    for n in [4usize, 8, 10] {
        let c = generate(&Preset::DiscreteOu { n }).unwrap();
        let r = kappa_global(&c, PairMode::Geodesic(1.0), 0.0).unwrap();
        for p in &r.pairs {
            assert!((p.kappa - 1.0 / (2 * n) as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn geometric_walks() {
    for alpha in [0.3, 0.5, 0.8] {
        let c = generate(&Preset::GeometricReset { alpha, k: 60 }).unwrap();
        assert!((all_pairs(&c) - alpha).abs() < 1e-9);
    }
    let c = generate(&Preset::GeometricReflect { p: 0.7, k: 60 }).unwrap();
    let r = kappa_global(&c, PairMode::Geodesic(1.0), 0.0).unwrap();
    assert!((r.pair(0, 1).unwrap().kappa - 0.7).abs() < 1e-12);
    for n in 1..59 {
        assert!(r.pair(n, n + 1).unwrap().kappa.abs() < 1e-12, "pair {n}");
    }
}

#[test]
fn glauber_cycle_curvature_bound() {
    let beta: f64 = 0.2;
    let c = generate(&Preset::Glauber {
        graph: Graph::cycle(5),
        beta,
        h: 0.0,
    })
    .unwrap();
    let bound = (1.0 - 2.0 * beta.tanh()) / 5.0;
    assert!(global(&c) >= bound - 1e-12);
}

#[test]
fn pow2_invariant_mass_at_powers_of_two() {
    let j = 8;
    let c = generate(&Preset::Pow2Jump { j }).unwrap();
    let nu = invariant_distribution(&c).unwrap().nu;
    let nu1 = nu.weight(0);
    // 2^i is entered only from 2^(i-1), so its mass is the doubling-path weight
    // ν(1)·Π_{l<i} 1/(4·4^l) = ν(1)·2^{-i(i+1)}.
    for i in 1..j as i32 {
        let k = 1usize << i;
        let path = nu1 * 2f64.powi(-i * (i + 1));
        assert!((nu.weight(k - 1) / path - 1.0).abs() < 1e-9, "k={k}");
        let stated = nu1 / 4.0 * 2f64.powi(-i * (i - 1));
        if i == 1 {
            assert!((nu.weight(k - 1) / stated - 1.0).abs() < 1e-9);
        } else {
            // The closed form with exponent i(i-1) overshoots the path weight by 4^(i-1).
            assert!((stated / path - 4f64.powi(i - 1)).abs() < 1e-6 * 4f64.powi(i - 1));
        }
    }
    let r = kappa_global(&c, PairMode::AllPairs, 0.0).unwrap();
    let top = c.len();
    for p in r.pairs.iter().filter(|p| 2 * (p.y + 1) <= top) {
        assert!(p.kappa >= 0.5 - 1e-12, "({}, {}): {}", p.x, p.y, p.kappa);
    }
}

#[test]
fn birth_death_rates() {
    let c = generate(&Preset::LinearRates {
        alpha: 1.0,
        beta: 1.5,
        dt: Some(1e-3),
        k: 120,
    })
    .unwrap();
    let rate = global(&c) / 1e-3;
    assert!((rate - 0.5).abs() <= 0.005, "{rate}");
    let c = generate(&Preset::MmInfty {
        lambda: 3.0,
        mu: 1.0,
        dt: Some(1e-3),
        k: 60,
    })
    .unwrap();
    let rate = all_pairs(&c) / 1e-3;
    assert!((rate - 1.0).abs() <= 0.01, "{rate}");
}

#[test]
fn mm_infty_v_profile_envelope() {
    let (lambda, mu) = (3.0, 1.0);
    let c = generate(&Preset::MmInfty {
        lambda,
        mu,
        dt: Some(1e-3),
        k: 60,
    })
    .unwrap();
    let a = Analysis::new(&c).unwrap();
    let l = admissible_lambda(&a).unwrap();
    let f: Vec<f64> = (0..c.len())
        .map(|k| 1.0 + (k as f64 / 10.0).sin().abs())
        .collect();
    let r = log_sobolev_check(&a, &f, l).unwrap();
    assert!(r.holds);
    let v = r.v_profile.unwrap();
    for (x, vx) in v.iter().enumerate() {
        let env = 8.0 * lambda / mu + 2.0 * (lambda + x as f64 * mu) / mu;
        assert!(*vx <= env * 1.01, "V({x}) = {vx} exceeds {env}");
    }
    assert_eq!(r.v_envelope_holds, Some(true));
}

#[test]
fn superposition_examples() {
    let id = build_chain(
        FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap(),
        vec![vec![(0, 1.0)], vec![(1, 1.0)]],
        None,
    )
    .unwrap();
    let mix = two_point_mixing(0.5).unwrap();
    let half = superpose(&[id.clone(), mix.clone()], &[0.5, 0.5]).unwrap();
    assert!(all_pairs(&half) >= 0.5 - 1e-12);
    assert_eq!(
        superpose(std::slice::from_ref(&mix), &[1.0])
            .unwrap()
            .rows(),
        mix.rows()
    );
    let cube = generate(&Preset::Cube { n: 3 }).unwrap();
    let same = superpose(&[cube.clone(), cube.clone()], &[0.3, 0.7]).unwrap();
    assert!((global(&same) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn tensor_examples() {
    let id = build_chain(
        FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap(),
        vec![vec![(0, 1.0)], vec![(1, 1.0)]],
        None,
    )
    .unwrap();
    let mix = two_point_mixing(0.5).unwrap();
    assert_eq!(
        tensorize(std::slice::from_ref(&mix), &[1.0])
            .unwrap()
            .rows(),
        mix.rows()
    );
    let frozen = tensorize(&[mix.clone(), id.clone()], &[1.0, 0.0]).unwrap();
    assert!(all_pairs(&frozen).abs() < 1e-12);
    let both = tensorize(&[mix, id], &[0.5, 0.5]).unwrap();
    assert!(all_pairs(&both) >= -1e-12);
}

#[test]
fn glauber_path_decomposition_matches_brute_force() {
    let c = generate(&Preset::Glauber {
        graph: Graph::path(3),
        beta: 0.4,
        h: 0.2,
    })
    .unwrap();
    for x in 0..c.len() {
        for y in x + 1..c.len() {
            let (plus, minus, u) = kappa_decomposition(&c, x, y).unwrap();
            let w = w1_sparse(c.row(x), c.row(y), c.space()).unwrap().cost;
            let d = c.space().dist(x, y);
            let brute = common::brute_force_w1(c.row(x), c.row(y), c.space());
            assert!((w - brute).abs() < 1e-12, "({x},{y}): {w} vs {brute}");
            assert!((plus - minus - (1.0 - brute / d)).abs() < 1e-12);
            assert!(minus >= 0.0 && plus >= 0.0);
            if let Some(u) = u {
                assert!((u - minus / (plus - minus)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn attracting_walk_examples() {
    for p in [0.55, 0.6, 0.7, 0.9] {
        let c = generate(&Preset::GeometricReflect { p, k: 200 }).unwrap();
        let a = Analysis::new(&c).unwrap();
        let r = exponential_concentration(&a, 0, 1.0, Some(2.0)).unwrap();
        assert!((r.rho - (2.0 * p - 1.0)).abs() < 1e-12);
        assert!((r.d - 4.0 / (2.0 * p - 1.0)).abs() < 1e-9);
        assert!(r.holds, "p={p}: {r:?}");
    }
    let c = generate_with(&Preset::GeometricReflect { p: 0.4, k: 200 }, Some(1.0))
        .unwrap()
        .chain;
    let a = Analysis::new(&c).unwrap();
    assert!(matches!(
        exponential_concentration(&a, 0, 1.0, None),
        Err(BoundsError::NonPositiveRho { .. })
    ));
}

#[test]
fn reset_walk_moment_against_geometric_law() {
    let alpha = 0.6;
    let c = generate(&Preset::GeometricReset { alpha, k: 60 }).unwrap();
    let a = Analysis::new(&c).unwrap();
    let r = exponential_concentration(&a, 0, 1.0, None).unwrap();
    assert!((r.rho - (2.0 * alpha - 1.0)).abs() < 1e-12);
    let moment: f64 = (0..=60)
        .map(|n| {
            let w = if n < 60 {
                alpha * (1.0 - alpha).powi(n)
            } else {
                (1.0 - alpha).powi(60)
            };
            w * (n as f64 / r.d).exp()
        })
        .sum();
    assert!((moment - r.lhs).abs() < 1e-9, "{moment} vs {}", r.lhs);
    assert!(r.holds);
}

#[test]
fn average_distance_to_origin() {
    for n in [10usize, 20] {
        let c = generate(&Preset::DiscreteOu { n }).unwrap();
        let a = Analysis::new(&c).unwrap();
        let o = c.space().index_of("0").unwrap();
        let r = average_l2_bonnet_myers(&a, o, 1.0).unwrap();
        // ν(k) ∝ C(2N, N + k), so the mean distance is a direct binomial sum.
        let total = 4f64.powi(n as i32);
        let mean: f64 = (0..=2 * n)
            .map(|i| choose(2 * n as u64, i as u64) / total * (i as f64 - n as f64).abs())
            .sum();
        assert!((r.lhs - mean).abs() < 1e-12);
        assert!(
            r.holds && r.lhs < 2.0 * (n as f64).sqrt() && r.rhs < 2.0 * n as f64,
            "{r:?}"
        );
    }
}
