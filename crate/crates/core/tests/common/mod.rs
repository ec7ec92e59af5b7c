#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use ricci_core::gallery::{generate, two_point_mixing, Graph, Preset};
use ricci_core::transport::Distribution;
use ricci_core::Chain;

pub fn presets() -> Vec<Preset> {
    vec![
        Preset::Cube { n: 3 },
        Preset::Cube { n: 4 },
        Preset::DiscreteOu { n: 4 },
        Preset::DiscreteOu { n: 8 },
        Preset::Multinomial { n: 4, d: 2 },
        Preset::Binomial { n: 20, p: 0.1 },
        Preset::binomial_lambda(40, 2.0),
        Preset::Glauber {
            graph: Graph::cycle(5),
            beta: 0.2,
            h: 0.0,
        },
        Preset::Glauber {
            graph: Graph::path(4),
            beta: 0.3,
            h: 0.1,
        },
        Preset::GeometricReflect { p: 0.7, k: 60 },
        Preset::GeometricReset { alpha: 0.3, k: 60 },
        Preset::GeometricReset { alpha: 0.5, k: 60 },
        Preset::MmInfty {
            lambda: 3.0,
            mu: 1.0,
            dt: Some(1e-3),
            k: 60,
        },
        Preset::LinearRates {
            alpha: 1.0,
            beta: 1.5,
            dt: Some(1e-3),
            k: 120,
        },
        Preset::Pow2Jump { j: 6 },
    ]
}

/// Every gallery chain used by the suite-wide checks, with a label.
pub fn gallery() -> Vec<(String, Chain)> {
    let mut out: Vec<(String, Chain)> = presets()
        .iter()
        .map(|p| (format!("{p:?}"), generate(p).expect("gallery preset")))
        .collect();
    out.push((
        "two_point_mixing(0.3)".into(),
        two_point_mixing(0.3).unwrap(),
    ));
    out
}

pub fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x7e57_0000 ^ salt)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

/// A random probability vector on a random subset of about `k` points.
pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Distribution {
    use rand::Rng;
    let mut w = vec![0.0; n];
    for _ in 0..k.max(1) {
        w[rng.random_range(0..n)] += rng.random::<f64>() + 1e-3;
    }
    Distribution::normalized(w).unwrap()
}

/// Exact W₁ by enumerating every basic solution of the transportation
/// polytope; only for tiny supports.
pub fn brute_force_w1(
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
    space: &ricci_core::FiniteMetricSpace,
) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let (m, n) = (mu.len(), nu.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let size = m + n - 1;
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..size).collect();
    loop {
        // Constraints: all row sums and the first n-1 column sums.
        let mut a = DMatrix::<f64>::zeros(size, size);
        let mut b = DVector::<f64>::zeros(size);
        for (col, &c) in pick.iter().enumerate() {
            let (i, j) = cells[c];
            a[(i, col)] = 1.0;
            if j + 1 < n {
                a[(m + j, col)] = 1.0;
            }
        }
        for i in 0..m {
            b[i] = mu[i].1;
        }
        for j in 0..n - 1 {
            b[m + j] = nu[j].1;
        }
        if let Some(x) = a.clone().lu().solve(&b) {
            let ok = (a * &x - &b).amax() < 1e-12 && x.iter().all(|v| *v >= -1e-12);
            if ok {
                let cost: f64 = pick
                    .iter()
                    .zip(x.iter())
                    .map(|(&c, v)| v * space.dist(mu[cells[c].0].0, nu[cells[c].1].0))
                    .sum();
                best = best.min(cost);
            }
        }
        // Next combination.
        let mut i = size;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < cells.len() - size + i {
                break;
            }
        }
        pick[i] += 1;
        for k in i + 1..size {
            pick[k] = pick[k - 1] + 1;
        }
        if i == 0 && pick[0] > cells.len() - size {
            return best;
        }
    }
}
