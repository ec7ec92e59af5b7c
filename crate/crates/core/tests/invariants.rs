//! Spectral, variance and concentration bounds checked on every gallery chain.

mod common;

use ricci_core::bounds::{gaussian_concentration, spectral_report, variance_bound, Analysis};
use ricci_core::gallery::{generate, two_point_mixing, Preset};
use ricci_core::{averaging, VarCertificate};

#[test]
fn spectral_radius_below_one_minus_kappa() {
    for (name, c) in common::gallery() {
        let a = Analysis::new(&c).unwrap();
        let r = spectral_report(&a).unwrap();
        if a.kappa > 0.0 {
            assert_eq!(
                r.radius_holds,
                Some(true),
                "{name}: {} vs {}",
                r.spectral_radius,
                1.0 - a.kappa
            );
        }
        if let Some(p) = &r.poincare {
            assert!(p.holds, "{name}: Poincaré fails");
            assert_eq!(p.var.len(), 20);
        }
        assert_eq!(
            r.poincare.is_some(),
            a.invariant.reversible && a.kappa > 0.0,
            "{name}"
        );
    }
}

#[test]
fn spectral_radius_equality_cases() {
    for n in 2..=5 {
        let c = generate(&Preset::Cube { n }).unwrap();
        let r = spectral_report(&Analysis::new(&c).unwrap()).unwrap();
        assert!((r.spectral_radius - (1.0 - 1.0 / n as f64)).abs() < 1e-9);
    }
    let c = two_point_mixing(0.3).unwrap();
    let a = Analysis::new(&c).unwrap();
    assert!((spectral_report(&a).unwrap().spectral_radius - (1.0 - a.kappa)).abs() < 1e-12);
}

#[test]
fn extremal_variance_below_bound() {
    let mut exact = 0;
    for (name, c) in common::gallery() {
        let a = Analysis::new(&c).unwrap();
        if a.kappa <= 0.0 || !a.invariant.unique {
            continue;
        }
        let r = variance_bound(&a).unwrap();
        assert!(r.pointwise_bound <= r.bound + 1e-12, "{name}");
        if a.stats
            .iter()
            .all(|s| s.certificate == VarCertificate::Exact)
        {
            assert!(r.holds, "{name}: {} > {}", r.extremal_var, r.bound);
            exact += 1;
        }
    }
    assert!(exact >= 10);
}

#[test]
fn variance_splits_along_one_step() {
    // Var_ν f = ∫Var_{m_x} f dν + Var_ν(Mf) whenever ν is invariant.
    let mut rng = common::rng(3);
    for (name, c) in common::gallery() {
        let a = Analysis::new(&c).unwrap();
        let nu = &a.invariant.nu;
        for _ in 0..5 {
            let f = common::normal_vec(&mut rng, c.len(), 1.0);
            let local: f64 = (0..c.len())
                .map(|x| nu.weight(x) * c.row_distribution(x).variance(&f))
                .sum();
            let total = local + nu.variance(&averaging(&c, &f));
            assert!(
                (nu.variance(&f) - total).abs() < 1e-9 * (1.0 + total),
                "{name}"
            );
        }
    }
}

#[test]
fn tails_below_gaussian_bound() {
    for (name, c) in common::gallery() {
        let a = Analysis::new(&c).unwrap();
        if a.kappa <= 0.0 || !a.invariant.unique {
            continue;
        }
        let witness = variance_bound(&a).unwrap().witness;
        let mut fs = vec![witness];
        for o in [0, c.len() / 2, c.len() - 1] {
            let d: Vec<f64> = (0..c.len()).map(|x| c.space().dist(o, x)).collect();
            fs.push(d.iter().map(|v| -v).collect());
            fs.push(d);
        }
        for f in fs {
            let r = gaussian_concentration(&a, &f).unwrap();
            assert!(r.holds, "{name}");
            assert_eq!(r.rows.len(), 55);
        }
    }
}
