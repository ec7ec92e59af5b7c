//! Lipschitz constants and the largest variance of a 1-Lipschitz function
//! under a finitely supported measure.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::metric::FiniteMetricSpace;
use crate::transport::Distribution;

/// Largest support handled by exact vertex enumeration.
pub const EXACT_SUPPORT_CAP: usize = 12;

const HEURISTIC_SEED: u64 = 0x5eed_1a5c;
const GAUSSIAN_STARTS: usize = 32;
const ASCENT_SWEEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxVarMode {
    Exact,
    Heuristic,
}

/// How much a reported maximal variance can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarCertificate {
    /// The value is the true maximum.
    Exact,
    /// The value is attained by the returned function but may not be maximal.
    LowerBound,
    /// The value is at least the true maximum (σ² used in place of maxVar).
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LipschitzError {
    #[error("support of size {size} exceeds the exact enumeration cap of {cap}")]
    SupportTooLarge { size: usize, cap: usize },
    #[error("measure has {0} points but the space has {1}")]
    SizeMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxVar {
    pub value: f64,
    /// Maximiser on the whole space, zero at the first support point.
    pub f: Vec<f64>,
    pub certificate: VarCertificate,
}

/// max over x ≠ y of |f(x) − f(y)| / d(x, y); 0 on fewer than two points.
pub fn lipschitz_constant(space: &FiniteMetricSpace, f: &[f64]) -> f64 {
    let n = space.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in i + 1..n {
                best = best.max((f[i] - f[j]).abs() / space.dist(i, j));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// sup of Var_μ f over 1-Lipschitz f.
pub fn max_var_lipschitz(
    space: &FiniteMetricSpace,
    measure: &Distribution,
    mode: MaxVarMode,
) -> Result<MaxVar, LipschitzError> {
    if measure.len() != space.len() {
        return Err(LipschitzError::SizeMismatch(measure.len(), space.len()));
    }
    let support = measure.support();
    let pts: Vec<usize> = support.iter().map(|a| a.0).collect();
    let w: Vec<f64> = support.iter().map(|a| a.1).collect();
    let k = pts.len();
    let d = |a: usize, b: usize| space.dist(pts[a], pts[b]);

    let (local, certificate) = if k == 1 {
        (vec![0.0], VarCertificate::Exact)
    } else if let Some(coord) = line_coordinate(k, &d) {
        (coord, VarCertificate::Exact)
    } else {
        match mode {
            MaxVarMode::Exact => {
                if k > EXACT_SUPPORT_CAP {
                    return Err(LipschitzError::SupportTooLarge {
                        size: k,
                        cap: EXACT_SUPPORT_CAP,
                    });
                }
                (enumerate_vertices(k, &w, &d), VarCertificate::Exact)
            }
            MaxVarMode::Heuristic => (ascend(k, &w, &d), VarCertificate::LowerBound),
        }
    };
    let shift = local[0];
    let local: Vec<f64> = local.iter().map(|v| v - shift).collect();
    let value = weighted_variance(&w, &local);
    let f = (0..space.len())
        .map(|x| {
            pts.iter()
                .zip(&local)
                .map(|(&p, &v)| v + space.dist(x, p))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(MaxVar {
        value,
        f,
        certificate,
    })
}

fn weighted_variance(w: &[f64], f: &[f64]) -> f64 {
    let mean: f64 = w.iter().zip(f).map(|(a, b)| a * b).sum();
    w.iter()
        .zip(f)
        .map(|(a, b)| a * (b - mean) * (b - mean))
        .sum()
}

/// If the points embed isometrically in ℝ, returns the embedding.
///
/// On such supports every 1-Lipschitz f has |f(y) − f(z)| ≤ |c(y) − c(z)|
/// pairwise, so the coordinate itself maximises the variance.
fn line_coordinate(k: usize, d: &impl Fn(usize, usize) -> f64) -> Option<Vec<f64>> {
    let a = (0..k).max_by(|&x, &y| d(0, x).total_cmp(&d(0, y)))?;
    let c: Vec<f64> = (0..k).map(|z| d(a, 0) - d(a, z)).collect();
    let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for y in 0..k {
        for z in y + 1..k {
            if ((c[y] - c[z]).abs() - d(y, z)).abs() > 1e-9 * scale.max(1.0) {
                return None;
            }
        }
    }
    Some(c)
}

/// Depth-first enumeration of the vertices of the Lipschitz polytope with
/// f(0) = 0. A vertex has a spanning tree of tight pairs, so growing the tree
/// one point at a time, each new value is the lower or upper end of its
/// feasible interval given the points already placed.
fn enumerate_vertices(k: usize, w: &[f64], d: &impl Fn(usize, usize) -> f64) -> Vec<f64> {
    struct Search<'a, D> {
        k: usize,
        w: &'a [f64],
        d: &'a D,
        seen: HashSet<(u32, Vec<i64>)>,
        best: f64,
        best_f: Vec<f64>,
        vals: Vec<f64>,
    }
    impl<D: Fn(usize, usize) -> f64> Search<'_, D> {
        fn key(&self, mask: u32) -> (u32, Vec<i64>) {
            let v = (0..self.k)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| (self.vals[i] * 1e9).round() as i64)
                .collect();
            (mask, v)
        }
        fn run(&mut self, mask: u32) {
            if !self.seen.insert(self.key(mask)) {
                return;
            }
            if mask.count_ones() as usize == self.k {
                let v = weighted_variance(self.w, &self.vals);
                if v > self.best {
                    self.best = v;
                    self.best_f = self.vals.clone();
                }
                return;
            }
            for b in 0..self.k {
                if mask & (1 << b) != 0 {
                    continue;
                }
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in (0..self.k).filter(|a| mask & (1 << a) != 0) {
                    let dab = (self.d)(a, b);
                    lo = lo.max(self.vals[a] - dab);
                    hi = hi.min(self.vals[a] + dab);
                }
                for v in [lo, hi] {
                    self.vals[b] = v;
                    self.run(mask | (1 << b));
                }
                self.vals[b] = 0.0;
            }
        }
    }
    let mut s = Search {
        k,
        w,
        d,
        seen: HashSet::new(),
        best: -1.0,
        best_f: vec![0.0; k],
        vals: vec![0.0; k],
    };
    s.run(1);
    s.best_f
}

/// Largest 1-Lipschitz minorant of f on the support.
fn lipschitz_minorant(f: &[f64], d: &impl Fn(usize, usize) -> f64) -> Vec<f64> {
    (0..f.len())
        .map(|x| {
            (0..f.len())
                .map(|y| f[y] + d(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn ascend(k: usize, w: &[f64], d: &impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for p in 0..k {
        let g: Vec<f64> = (0..k).map(|z| d(p, z)).collect();
        starts.push(g.iter().map(|v| -v).collect());
        starts.push(g);
    }
    let diam = (0..k)
        .flat_map(|a| (0..k).map(move |b| (a, b)))
        .map(|(a, b)| d(a, b))
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(HEURISTIC_SEED);
    for _ in 0..GAUSSIAN_STARTS {
        starts.push(
            (0..k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    diam * z
                })
                .collect::<Vec<f64>>(),
        );
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_f = vec![0.0; k];
    for start in starts {
        let mut f = lipschitz_minorant(&start, d);
        let mut v = weighted_variance(w, &f);
        // Var is convex in each coordinate, so the best value of f(b) with the
        // others fixed is an endpoint of its feasible interval.
        for _ in 0..ASCENT_SWEEPS {
            let mut improved = false;
            for b in 0..k {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in (0..k).filter(|&a| a != b) {
                    lo = lo.max(f[a] - d(a, b));
                    hi = hi.min(f[a] + d(a, b));
                }
                for cand in [lo, hi] {
                    let kept = f[b];
                    f[b] = cand;
                    let vc = weighted_variance(w, &f);
                    if vc > v * (1.0 + 1e-14) {
                        v = vc;
                        improved = true;
                    } else {
                        f[b] = kept;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if v > best {
            best = v;
            best_f = f;
        }
    }
    best_f
}
