//! Finite metric spaces.
//!
//! A [`FiniteMetricSpace`] is a list of point identifiers together with an
//! exact distance table. Tables are either dense (validated against the
//! metric axioms on construction) or computed on the fly from integer
//! lattice coordinates with a scaled L¹ norm, which lets the gallery build
//! hypercube-like state spaces without materialising a quadratic table.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

/// Absolute slack allowed when checking the triangle inequality.
pub const TRIANGLE_TOL: f64 = 1e-12;

/// Relative slack for "Σ d(xᵢ, xᵢ₊₁) = d(x, y)" in geodesic-chain checks.
pub const GEODESIC_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric violation: {0}")]
    MetricViolation(Violation),
    #[error("graph is disconnected: no path between {0} and {1}")]
    DisconnectedGraph(String, String),
    #[error("invalid edge {index}: {reason}")]
    BadEdge { index: usize, reason: String },
    #[error("distance table has shape mismatch: {0}")]
    Shape(String),
    #[error("duplicate point id {0:?}")]
    DuplicatePoint(String),
    #[error("empty point set")]
    Empty,
    #[error("invalid scale eps = {0}; must be positive and finite")]
    InvalidEps(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotFinite {
        i: usize,
        j: usize,
        value: f64,
    },
    Negative {
        i: usize,
        j: usize,
        value: f64,
    },
    NonZeroDiagonal {
        i: usize,
        value: f64,
    },
    ZeroOffDiagonal {
        i: usize,
        j: usize,
    },
    Asymmetric {
        i: usize,
        j: usize,
        dij: f64,
        dji: f64,
    },
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        excess: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NotFinite { i, j, value } => write!(f, "d({i},{j}) = {value} is not finite"),
            Violation::Negative { i, j, value } => write!(f, "d({i},{j}) = {value} is negative"),
            Violation::NonZeroDiagonal { i, value } => {
                write!(f, "d({i},{i}) = {value} is not zero")
            }
            Violation::ZeroOffDiagonal { i, j } => write!(f, "d({i},{j}) = 0 for distinct points"),
            Violation::Asymmetric { i, j, dij, dji } => {
                write!(f, "d({i},{j}) = {dij} but d({j},{i}) = {dji}")
            }
            Violation::Triangle { i, j, k, excess } => {
                write!(f, "d({i},{k}) exceeds d({i},{j}) + d({j},{k}) by {excess}")
            }
        }
    }
}

/// Input accepted by [`FiniteMetricSpace::build`].
#[derive(Debug, Clone)]
pub enum MetricSource {
    /// Full symmetric distance matrix.
    Matrix(Vec<Vec<f64>>),
    /// Undirected weighted edges `(u, v, w)`; the space gets the shortest-path metric.
    Edges(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone)]
enum Table {
    Dense(Vec<f64>),
    /// d(x, y) = scale · Σ |xᵢ − yᵢ|
    Lattice {
        coords: Vec<Vec<i64>>,
        scale: f64,
    },
}

/// Point set with an exact pairwise distance table. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    points: Vec<String>,
    index: HashMap<String, usize>,
    table: Table,
    geodesic_scale: Option<f64>,
}

/// Outcome of [`FiniteMetricSpace::is_epsilon_geodesic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicCheck {
    pub holds: bool,
    /// A pair with no admissible chain, when `holds` is false.
    pub violation: Option<(usize, usize)>,
}

fn index_points(points: &[String]) -> Result<HashMap<String, usize>, MetricError> {
    if points.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut index = HashMap::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if index.insert(p.clone(), i).is_some() {
            return Err(MetricError::DuplicatePoint(p.clone()));
        }
    }
    Ok(index)
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties on index
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl FiniteMetricSpace {
    pub fn build(points: Vec<String>, source: MetricSource) -> Result<Self, MetricError> {
        match source {
            MetricSource::Matrix(m) => Self::from_matrix(points, m),
            MetricSource::Edges(e) => Self::from_edges(points, &e),
        }
    }

    /// Validates `matrix` against every metric axiom (triangle inequality to
    /// within [`TRIANGLE_TOL`]).
    pub fn from_matrix(points: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let index = index_points(&points)?;
        let n = points.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(MetricError::Shape(format!("expected a {n}x{n} matrix")));
        }
        let mut dense = Vec::with_capacity(n * n);
        for row in &matrix {
            dense.extend_from_slice(row);
        }
        validate_dense(n, &dense).map_err(MetricError::MetricViolation)?;
        Ok(FiniteMetricSpace {
            points,
            index,
            table: Table::Dense(dense),
            geodesic_scale: None,
        })
    }

    /// Shortest-path metric of a connected graph with positive edge weights.
    pub fn from_edges(
        points: Vec<String>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, MetricError> {
        let index = index_points(&points)?;
        let n = points.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut max_w: f64 = 0.0;
        for (k, &(u, v, w)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(MetricError::BadEdge {
                    index: k,
                    reason: format!("endpoint out of range ({u}, {v})"),
                });
            }
            if u == v {
                return Err(MetricError::BadEdge {
                    index: k,
                    reason: "self-loop".into(),
                });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(MetricError::BadEdge {
                    index: k,
                    reason: format!("weight {w} is not positive and finite"),
                });
            }
            adj[u].push((v, w));
            adj[v].push((u, w));
            max_w = max_w.max(w);
        }
        let mut dense = vec![f64::INFINITY; n * n];
        for s in 0..n {
            let dist = &mut dense[s * n..(s + 1) * n];
            dist[s] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(HeapItem(0.0, s));
            while let Some(HeapItem(d, u)) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &(v, w) in &adj[u] {
                    let nd = d + w;
                    if nd < dist[v] {
                        dist[v] = nd;
                        heap.push(HeapItem(nd, v));
                    }
                }
            }
            if let Some(t) = dist.iter().position(|d| !d.is_finite()) {
                return Err(MetricError::DisconnectedGraph(
                    points[s].clone(),
                    points[t].clone(),
                ));
            }
        }
        // Dijkstra from both ends can differ in the last ulp; keep the table symmetric.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = dense[i * n + j].min(dense[j * n + i]);
                dense[i * n + j] = v;
                dense[j * n + i] = v;
            }
        }
        let geodesic_scale = if n > 1 { Some(max_w) } else { None };
        Ok(FiniteMetricSpace {
            points,
            index,
            table: Table::Dense(dense),
            geodesic_scale,
        })
    }

    /// Scaled L¹ metric on distinct integer coordinate vectors.
    ///
    /// `geodesic_scale`, when given, records a scale at which the caller knows the
    /// space is geodesic (e.g. 1 for a full hypercube); curvature scans use it to
    /// skip the cubic geodesic check.
    pub fn from_lattice(
        points: Vec<String>,
        coords: Vec<Vec<i64>>,
        scale: f64,
        geodesic_scale: Option<f64>,
    ) -> Result<Self, MetricError> {
        let index = index_points(&points)?;
        if coords.len() != points.len() {
            return Err(MetricError::Shape(format!(
                "{} coordinate vectors for {} points",
                coords.len(),
                points.len()
            )));
        }
        let dim = coords[0].len();
        if coords.iter().any(|c| c.len() != dim) {
            return Err(MetricError::Shape(
                "coordinate vectors of unequal length".into(),
            ));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(MetricError::Shape(format!(
                "lattice scale {scale} must be positive"
            )));
        }
        let mut seen = HashMap::with_capacity(coords.len());
        for (i, c) in coords.iter().enumerate() {
            if let Some(j) = seen.insert(c.clone(), i) {
                return Err(MetricError::MetricViolation(Violation::ZeroOffDiagonal {
                    i: j,
                    j: i,
                }));
            }
        }
        Ok(FiniteMetricSpace {
            points,
            index,
            table: Table::Lattice { coords, scale },
            geodesic_scale,
        })
    }

    /// Points `0..n` on the real line at the given positions.
    pub fn line(points: Vec<String>, positions: &[i64]) -> Result<Self, MetricError> {
        let coords = positions.iter().map(|&p| vec![p]).collect();
        let mut sorted = positions.to_vec();
        sorted.sort_unstable();
        let max_gap = sorted
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64)
            .fold(0.0, f64::max);
        let hint = if sorted.len() > 1 {
            Some(max_gap)
        } else {
            None
        };
        Self::from_lattice(points, coords, 1.0, hint)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &str {
        &self.points[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.table {
            Table::Dense(d) => d[i * self.points.len() + j],
            Table::Lattice { coords, scale } => {
                let l1: i64 = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                scale * l1 as f64
            }
        }
    }

    /// Scale at which the space is geodesic by construction, if known.
    pub fn geodesic_hint(&self) -> Option<f64> {
        self.geodesic_scale
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.dist(i, j));
            }
        }
        best
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.dist(i, j)).collect())
            .collect()
    }

    /// Dense copy of this space (drops any geodesic hint).
    pub fn to_dense(&self) -> FiniteMetricSpace {
        let n = self.len();
        let mut dense = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                dense.push(self.dist(i, j));
            }
        }
        FiniteMetricSpace {
            points: self.points.clone(),
            index: self.index.clone(),
            table: Table::Dense(dense),
            geodesic_scale: None,
        }
    }

    /// Whether every pair is joined by a chain of hops of length ≤ `eps` whose
    /// lengths add up to the distance.
    ///
    /// For each source x the points are visited in order of increasing d(x, ·);
    /// a point z is reachable when some already reachable w with d(w, z) ≤ eps
    /// lies on a geodesic from x to z.
    pub fn is_epsilon_geodesic(&self, eps: f64) -> Result<GeodesicCheck, MetricError> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(MetricError::InvalidEps(eps));
        }
        let n = self.len();
        for x in 0..n {
            let preds = self.geodesic_predecessors(x, eps);
            if let Some(y) = preds.iter().position(|p| p.is_none()) {
                return Ok(GeodesicCheck {
                    holds: false,
                    violation: Some((x.min(y), x.max(y))),
                });
            }
        }
        Ok(GeodesicCheck {
            holds: true,
            violation: None,
        })
    }

    /// Like [`is_epsilon_geodesic`](Self::is_epsilon_geodesic) but trusts a
    /// geodesic hint recorded at construction when it covers `eps`.
    pub fn check_epsilon_geodesic(&self, eps: f64) -> Result<GeodesicCheck, MetricError> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(MetricError::InvalidEps(eps));
        }
        match self.geodesic_scale {
            Some(h) if h <= eps => Ok(GeodesicCheck {
                holds: true,
                violation: None,
            }),
            _ => self.is_epsilon_geodesic(eps),
        }
    }

    /// A chain x = x₀, …, xₙ = y with hops ≤ eps realising d(x, y), ties broken
    /// by lowest predecessor index. `None` when no such chain exists.
    pub fn geodesic_chain(&self, x: usize, y: usize, eps: f64) -> Option<Vec<usize>> {
        let preds = self.geodesic_predecessors(x, eps);
        preds[y]?;
        let mut path = vec![y];
        let mut cur = y;
        while cur != x {
            cur = preds[cur].expect("predecessor chain is closed");
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// preds[z] = Some(w): w precedes z on an eps-chain from x (preds[x] = Some(x)).
    fn geodesic_predecessors(&self, x: usize, eps: f64) -> Vec<Option<usize>> {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.dist(x, a).total_cmp(&self.dist(x, b)).then(a.cmp(&b)));
        let mut preds: Vec<Option<usize>> = vec![None; n];
        preds[x] = Some(x);
        let mut reached: Vec<usize> = vec![x];
        for &z in order.iter().skip_while(|&&z| z == x) {
            if z == x {
                continue;
            }
            let dxz = self.dist(x, z);
            let slack = GEODESIC_REL_TOL * dxz.max(1e-300);
            let mut best: Option<usize> = None;
            for &w in &reached {
                let dwz = self.dist(w, z);
                if dwz <= eps * (1.0 + GEODESIC_REL_TOL)
                    && self.dist(x, w) + dwz <= dxz + slack
                    && best.is_none_or(|b| w < b)
                {
                    best = Some(w);
                }
            }
            if best.is_some() {
                preds[z] = best;
                reached.push(z);
            }
        }
        preds
    }
}

impl PartialEq for FiniteMetricSpace {
    fn eq(&self, other: &Self) -> bool {
        let n = self.len();
        self.points == other.points
            && (0..n)
                .all(|i| (0..n).all(|j| self.dist(i, j).to_bits() == other.dist(i, j).to_bits()))
    }
}

fn validate_dense(n: usize, d: &[f64]) -> Result<(), Violation> {
    for i in 0..n {
        for j in 0..n {
            let v = d[i * n + j];
            if !v.is_finite() {
                return Err(Violation::NotFinite { i, j, value: v });
            }
            if v < 0.0 {
                return Err(Violation::Negative { i, j, value: v });
            }
        }
    }
    for i in 0..n {
        if d[i * n + i] != 0.0 {
            return Err(Violation::NonZeroDiagonal {
                i,
                value: d[i * n + i],
            });
        }
        for j in (i + 1)..n {
            let (dij, dji) = (d[i * n + j], d[j * n + i]);
            if dij != dji {
                return Err(Violation::Asymmetric { i, j, dij, dji });
            }
            if dij == 0.0 {
                return Err(Violation::ZeroOffDiagonal { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let dij = d[i * n + j];
            for k in 0..n {
                let excess = d[i * n + k] - dij - d[j * n + k];
                if excess > TRIANGLE_TOL {
                    return Err(Violation::Triangle { i, j, k, excess });
                }
            }
        }
    }
    Ok(())
}

/// Convenience for numeric point ids `"0"`, `"1"`, ….
pub fn numbered_points(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> FiniteMetricSpace {
        FiniteMetricSpace::from_edges(numbered_points(3), &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn cube_edges(n: usize) -> Vec<(usize, usize, f64)> {
        let mut e = Vec::new();
        for x in 0..(1usize << n) {
            for b in 0..n {
                let y = x ^ (1 << b);
                if x < y {
                    e.push((x, y, 1.0));
                }
            }
        }
        e
    }

    #[test]
    fn path_graph_distances() {
        let s = path3();
        assert_eq!(s.dist(0, 2), 2.0);
        assert_eq!(s.dist(2, 0), 2.0);
        assert_eq!(s.dist(1, 1), 0.0);
    }

    #[test]
    fn triangle_failure_is_rejected() {
        let m = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        let err = FiniteMetricSpace::from_matrix(numbered_points(3), m).unwrap_err();
        assert!(
            matches!(
                err,
                MetricError::MetricViolation(Violation::Triangle { .. })
            ),
            "{err}"
        );
    }

    #[test]
    fn asymmetry_and_zero_distance_are_rejected() {
        let m = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(
            FiniteMetricSpace::from_matrix(numbered_points(2), m),
            Err(MetricError::MetricViolation(Violation::Asymmetric { .. }))
        ));
        let m = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(matches!(
            FiniteMetricSpace::from_matrix(numbered_points(2), m),
            Err(MetricError::MetricViolation(
                Violation::ZeroOffDiagonal { .. }
            ))
        ));
        let m = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(matches!(
            FiniteMetricSpace::from_matrix(numbered_points(2), m),
            Err(MetricError::MetricViolation(Violation::Negative { .. }))
        ));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let err = FiniteMetricSpace::from_edges(numbered_points(3), &[(0, 1, 1.0)]).unwrap_err();
        assert!(matches!(err, MetricError::DisconnectedGraph(..)));
    }

    #[test]
    fn bad_edges_are_rejected() {
        assert!(matches!(
            FiniteMetricSpace::from_edges(numbered_points(2), &[(0, 1, 0.0)]),
            Err(MetricError::BadEdge { .. })
        ));
        assert!(matches!(
            FiniteMetricSpace::from_edges(numbered_points(2), &[(0, 5, 1.0)]),
            Err(MetricError::BadEdge { .. })
        ));
    }

    #[test]
    fn hamming_cube_from_edges() {
        let s = FiniteMetricSpace::from_edges(numbered_points(8), &cube_edges(3)).unwrap();
        for x in 0..8usize {
            for y in 0..8usize {
                assert_eq!(s.dist(x, y), (x ^ y).count_ones() as f64);
            }
        }
        assert_eq!(s.diameter(), 3.0);
        assert!(s.is_epsilon_geodesic(1.0).unwrap().holds);
    }

    #[test]
    fn two_far_points_are_not_geodesic() {
        let s = FiniteMetricSpace::from_matrix(
            numbered_points(2),
            vec![vec![0.0, 3.0], vec![3.0, 0.0]],
        )
        .unwrap();
        let check = s.is_epsilon_geodesic(1.0).unwrap();
        assert!(!check.holds);
        assert_eq!(check.violation, Some((0, 1)));
        assert!(s.is_epsilon_geodesic(3.0).unwrap().holds);
        assert!(s.geodesic_chain(0, 1, 1.0).is_none());
    }

    #[test]
    fn invalid_eps() {
        let s = path3();
        assert!(matches!(
            s.is_epsilon_geodesic(0.0),
            Err(MetricError::InvalidEps(_))
        ));
        assert!(matches!(
            s.is_epsilon_geodesic(f64::NAN),
            Err(MetricError::InvalidEps(_))
        ));
    }

    #[test]
    fn geodesic_chain_prefers_low_indices() {
        // 4-cycle 0-1-3-2-0: two geodesics from 0 to 3, through 1 or through 2.
        let s = FiniteMetricSpace::from_edges(
            numbered_points(4),
            &[(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)],
        )
        .unwrap();
        assert_eq!(s.geodesic_chain(0, 3, 1.0).unwrap(), vec![0, 1, 3]);
    }

    #[test]
    fn lattice_matches_dense_hamming() {
        let coords: Vec<Vec<i64>> = (0..8)
            .map(|x: i64| (0..3).map(|b| (x >> (2 - b)) & 1).collect())
            .collect();
        let lat =
            FiniteMetricSpace::from_lattice(numbered_points(8), coords, 1.0, Some(1.0)).unwrap();
        let dense = lat.to_dense();
        assert_eq!(lat, dense);
        assert!(dense.is_epsilon_geodesic(1.0).unwrap().holds);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = FiniteMetricSpace::from_matrix(
            vec!["a".into(), "a".into()],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        );
        assert!(matches!(err, Err(MetricError::DuplicatePoint(_))));
    }
}
