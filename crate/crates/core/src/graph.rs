//! Directed interaction graphs and the row-stochastic weight matrices built
//! from them.
//!
//! An edge `(i, j)` means node `i` uses information sent by node `j`, so
//! information flows `j -> i` and row `i` of the weight matrix holds the
//! weights node `i` places on its in-neighbors.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of rejected draws after which `random_digraph` gives up.
pub const MAX_GRAPH_DRAWS: usize = 64;

/// Modulus tolerance used when comparing eigenvalues.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

/// Row-sum tolerance for row-stochastic matrices.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Adjacency {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidAdjacency("node count must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidAdjacency(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidAdjacency(format!("self-loop at node {i}")));
            }
            set.insert((i, j));
        }
        Ok(Self { n, edges: set })
    }

    /// Complete digraph: every ordered pair of distinct nodes.
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.edges.range((i, 0)..(i + 1, 0)).count()
    }

    pub fn max_in_degree(&self) -> usize {
        (0..self.n).map(|i| self.in_degree(i)).max().unwrap_or(0)
    }

    /// Edge-list text: `n=<int>` followed by one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for (i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("expected 'n=<int>' header, got '{header}'")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let parse = |p: Option<&str>| -> Result<usize> {
                p.and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad edge line '{line}'")))
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!("bad edge line '{line}'")));
            }
            edges.push((i, j));
        }
        Self::new(n, edges)
    }
}

/// Square interaction matrix `W` driving `x_{t+1} = W x_t + noise_t`.
///
/// Matrices built by [`laplacian_weights`] or [`TopologyMatrix::from_weights`]
/// are validated as non-negative and row-stochastic. [`TopologyMatrix::scaled`]
/// and [`TopologyMatrix::unchecked`] produce experimental matrices (for
/// example `0.9 W`) with the structural check disabled; `is_validated`
/// reports which kind a value is.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyMatrix<T: Real> {
    weights: DMatrix<T>,
    gamma: Option<T>,
    d_max: usize,
    validated: bool,
}

impl<T: Real> TopologyMatrix<T> {
    /// Validates an explicit weight matrix: square, entries in `[0, 1]`, row
    /// sums equal to one.
    pub fn from_weights(weights: DMatrix<T>) -> Result<Self> {
        check_row_stochastic(&weights)?;
        let n = weights.nrows();
        let d_max = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && weights[(i, j)] > T::zero()).count())
            .max()
            .unwrap_or(0);
        Ok(Self { weights, gamma: None, d_max, validated: true })
    }

    /// Wraps an arbitrary square matrix without structural checks.
    pub fn unchecked(weights: DMatrix<T>) -> Result<Self> {
        if weights.nrows() != weights.ncols() || weights.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "weight matrix must be square and non-empty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        let n = weights.nrows();
        let d_max = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && weights[(i, j)] != T::zero()).count())
            .max()
            .unwrap_or(0);
        Ok(Self { weights, gamma: None, d_max, validated: false })
    }

    /// `factor * W`, marked as unvalidated. Used to study `ρ(W) ≠ 1` regimes.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            weights: &self.weights * factor,
            gamma: self.gamma,
            d_max: self.d_max,
            validated: false,
        }
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<T> {
        &self.weights
    }

    pub fn gamma(&self) -> Option<T> {
        self.gamma
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Row-major CSV, one matrix row per line.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.weights)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::from_weights(matrix_from_csv(text)?)
    }

    /// Parses a CSV matrix, validating it when it is row-stochastic and
    /// otherwise falling back to an unvalidated matrix.
    pub fn from_csv_lenient(text: &str) -> Result<Self> {
        let m = matrix_from_csv(text)?;
        match Self::from_weights(m.clone()) {
            Ok(w) => Ok(w),
            Err(Error::InvalidTopology(_)) => Self::unchecked(m),
            Err(e) => Err(e),
        }
    }
}

fn check_row_stochastic<T: Real>(w: &DMatrix<T>) -> Result<()> {
    if w.nrows() != w.ncols() || w.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "weight matrix must be square and non-empty, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    let tol = T::tolerance(ROW_SUM_TOLERANCE);
    for i in 0..w.nrows() {
        let mut sum = T::zero();
        for j in 0..w.ncols() {
            let v = w[(i, j)];
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::InvalidTopology(format!(
                    "entry ({i}, {j}) = {v} outside [0, 1]"
                )));
            }
            sum += v;
        }
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidTopology(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

pub(crate) fn matrix_to_csv<T: Real>(m: &DMatrix<T>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub(crate) fn matrix_from_csv<T: Real>(text: &str) -> Result<DMatrix<T>> {
    let rows: Vec<Vec<T>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|line| {
            line.split(',')
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| Error::Parse(format!("bad matrix entry '{cell}'")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("matrix CSV rows are empty or ragged".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Laplacian-rule weights: `w_ij = γ a_ij / d_max` off the diagonal and
/// `w_ii = 1 − Σ_{j≠i} w_ij`.
pub fn laplacian_weights<T: Real>(adj: &Adjacency, gamma: T) -> Result<TopologyMatrix<T>> {
    if !(gamma > T::zero() && gamma <= T::one()) {
        return Err(Error::InvalidGamma(gamma.as_f64()));
    }
    let n = adj.n();
    let d_max = adj.max_in_degree();
    if d_max == 0 {
        if n == 1 {
            return Ok(TopologyMatrix {
                weights: DMatrix::identity(1, 1),
                gamma: Some(gamma),
                d_max: 0,
                validated: true,
            });
        }
        return Err(Error::EmptyGraph { n });
    }
    let step = gamma / T::from_count(d_max);
    let mut w = DMatrix::zeros(n, n);
    for &(i, j) in adj.edges() {
        w[(i, j)] = step;
    }
    for i in 0..n {
        let off: T = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).fold(T::zero(), |a, b| a + b);
        w[(i, i)] = T::one() - off;
    }
    let topo = TopologyMatrix { weights: w, gamma: Some(gamma), d_max, validated: true };
    if gamma == T::one() {
        if let Ok(s) = spectral_summary(&topo) {
            if !s.leading_is_simple {
                log::warn!("gamma = 1 gives a weight matrix with several unit-modulus eigenvalues");
            }
        }
    }
    Ok(topo)
}

/// Directed Erdős–Rényi graph conditioned on having a spanning tree.
///
/// Pairs are visited in row-major order `(i, j)`, `i ≠ j`, each kept with
/// probability `edge_prob`. Draws are repeated until the spanning-tree test
/// passes, at most [`MAX_GRAPH_DRAWS`] times.
pub fn random_digraph(n: usize, edge_prob: f64, seed: u64) -> Result<Adjacency> {
    if n == 0 {
        return Err(Error::InvalidAdjacency("node count must be positive".into()));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge probability must lie in (0, 1], got {edge_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GRAPH_DRAWS {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random::<f64>() < edge_prob {
                    edges.push((i, j));
                }
            }
        }
        let adj = Adjacency::new(n, edges)?;
        if has_spanning_tree(&adj) {
            return Ok(adj);
        }
    }
    Err(Error::SpanningTreeUnreachable { attempts: MAX_GRAPH_DRAWS, edge_prob })
}

/// True when some root's information reaches every node following edges
/// `(i, j)` in the direction `j -> i`.
pub fn has_spanning_tree(adj: &Adjacency) -> bool {
    let n = adj.n();
    let mut succ = vec![Vec::new(); n];
    for &(i, j) in adj.edges() {
        succ[j].push(i);
    }
    (0..n).any(|root| {
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut stack = vec![root];
        let mut count = 1;
        while let Some(j) = stack.pop() {
            for &i in &succ[j] {
                if !seen[i] {
                    seen[i] = true;
                    count += 1;
                    stack.push(i);
                }
            }
        }
        count == n
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary<T> {
    /// Eigenvalue moduli, largest first.
    pub eigen_moduli: Vec<T>,
    pub spectral_radius: T,
    /// Exactly one eigenvalue attains the spectral radius (within 1e-9).
    pub leading_is_simple: bool,
}

pub fn spectral_summary<T: Real>(w: &TopologyMatrix<T>) -> Result<SpectralSummary<T>> {
    eigen_summary(w.weights())
}

/// Spectral summary of an arbitrary square matrix.
pub fn eigen_summary<T: Real>(m: &DMatrix<T>) -> Result<SpectralSummary<T>> {
    let n = m.nrows();
    let schur = nalgebra::Schur::try_new(m.clone(), T::default_epsilon(), 10_000 * n.max(1))
        .ok_or(Error::EigenFailure)?;
    let mut moduli: Vec<T> = schur.complex_eigenvalues().iter().map(|z| (z.re * z.re + z.im * z.im).sqrt()).collect();
    if moduli.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    moduli.sort_by(|a, b| b.partial_cmp(a).expect("finite moduli"));
    let radius = moduli[0];
    let tol = T::tolerance(EIGEN_TOLERANCE);
    let at_radius = moduli.iter().filter(|&&v| (radius - v).abs() <= tol).count();
    Ok(SpectralSummary { eigen_moduli: moduli, spectral_radius: radius, leading_is_simple: at_radius == 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn two_cycle() -> Adjacency {
        Adjacency::new(2, [(0, 1), (1, 0)]).unwrap()
    }

    #[test]
    fn laplacian_two_cycle_gamma_one_is_swap() {
        let w = laplacian_weights(&two_cycle(), 1.0).unwrap();
        assert_eq!(w.weights(), &dmatrix![0.0, 1.0; 1.0, 0.0]);
    }

    #[test]
    fn laplacian_two_cycle_half_gamma() {
        let w = laplacian_weights(&two_cycle(), 0.5).unwrap();
        assert_eq!(w.weights(), &dmatrix![0.5, 0.5; 0.5, 0.5]);
    }

    #[test]
    fn laplacian_rejects_bad_gamma_and_empty_graph() {
        assert_eq!(laplacian_weights(&two_cycle(), 0.0), Err(Error::InvalidGamma(0.0)));
        assert_eq!(laplacian_weights(&two_cycle(), 1.5), Err(Error::InvalidGamma(1.5)));
        let empty = Adjacency::new(3, []).unwrap();
        assert_eq!(laplacian_weights::<f64>(&empty, 0.5), Err(Error::EmptyGraph { n: 3 }));
        let single = Adjacency::new(1, []).unwrap();
        assert_eq!(laplacian_weights::<f64>(&single, 0.5).unwrap().weights()[(0, 0)], 1.0);
    }

    #[test]
    fn laplacian_random_seven_nodes_row_sums() {
        let adj = random_digraph(7, 0.4, 3).unwrap();
        let w = laplacian_weights(&adj, 0.5).unwrap();
        for i in 0..7 {
            let s: f64 = w.weights().row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            for j in 0..7 {
                if i != j {
                    assert_eq!(w.weights()[(i, j)] > 0.0, adj.contains(i, j));
                }
            }
        }
    }

    #[test]
    fn adjacency_rejects_self_loops_and_range() {
        assert!(Adjacency::new(2, [(1, 1)]).is_err());
        assert!(Adjacency::new(2, [(0, 2)]).is_err());
        assert!(Adjacency::new(0, []).is_err());
    }

    #[test]
    fn random_digraph_cases() {
        let single = random_digraph(1, 0.3, 9).unwrap();
        assert!(single.edges().is_empty());
        assert!(has_spanning_tree(&single));
        assert_eq!(random_digraph(4, 1.0, 0).unwrap().edges().len(), 12);
        assert_eq!(random_digraph(7, 0.4, 42).unwrap(), random_digraph(7, 0.4, 42).unwrap());
        assert!(random_digraph(3, 0.0, 1).is_err());
    }

    #[test]
    fn random_digraph_gives_up_when_sparse() {
        let err = random_digraph(40, 1e-6, 5).unwrap_err();
        assert_eq!(err, Error::SpanningTreeUnreachable { attempts: 64, edge_prob: 1e-6 });
    }

    #[test]
    fn spanning_tree_cases() {
        let star = Adjacency::new(5, (1..5).map(|i| (i, 0))).unwrap();
        assert!(has_spanning_tree(&star));
        // Reversing the star leaves every leaf without a path to the others.
        let reversed = Adjacency::new(5, (1..5).map(|i| (0, i))).unwrap();
        assert!(!has_spanning_tree(&reversed));
        let disjoint = Adjacency::new(4, [(0, 1), (1, 0), (2, 3), (3, 2)]).unwrap();
        assert!(!has_spanning_tree(&disjoint));
        assert!(has_spanning_tree(&Adjacency::complete(5).unwrap()));
    }

    #[test]
    fn spectral_examples() {
        let avg = TopologyMatrix::from_weights(dmatrix![0.5, 0.5; 0.5, 0.5]).unwrap();
        let s: SpectralSummary<f64> = spectral_summary(&avg).unwrap();
        assert!((s.eigen_moduli[0] - 1.0).abs() < 1e-12 && s.eigen_moduli[1].abs() < 1e-12);
        assert!(s.leading_is_simple);

        let swap = TopologyMatrix::from_weights(dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap();
        let s: SpectralSummary<f64> = spectral_summary(&swap).unwrap();
        assert!((s.eigen_moduli[0] - 1.0).abs() < 1e-12 && (s.eigen_moduli[1] - 1.0).abs() < 1e-12);
        assert!(!s.leading_is_simple);
    }

    #[test]
    fn spectral_seven_node_instance_is_primitive() {
        let adj = random_digraph(7, 0.4, 42).unwrap();
        let w = laplacian_weights(&adj, 0.5).unwrap();
        let s: SpectralSummary<f64> = spectral_summary(&w).unwrap();
        assert!((s.spectral_radius - 1.0).abs() < 1e-9);
        assert_eq!(s.spectral_radius, s.eigen_moduli[0]);
        assert!(s.leading_is_simple);
    }

    #[test]
    fn edge_list_and_csv_io() {
        let adj = random_digraph(5, 0.5, 11).unwrap();
        assert_eq!(Adjacency::parse_edge_list(&adj.to_edge_list()).unwrap(), adj);
        assert!(Adjacency::parse_edge_list("5\n0 1\n").is_err());
        let w: TopologyMatrix<f64> = laplacian_weights(&adj, 0.5).unwrap();
        let back = TopologyMatrix::<f64>::from_csv(&w.to_csv()).unwrap();
        assert_eq!(back.weights(), w.weights());
        assert!(TopologyMatrix::<f64>::from_csv("0.5,0.4\n0.5,0.5\n").is_err());
    }

    #[test]
    fn scaled_matrix_is_unvalidated() {
        let w = laplacian_weights(&two_cycle(), 0.5).unwrap().scaled(0.9);
        assert!(!w.is_validated());
        let s: SpectralSummary<f64> = spectral_summary(&w).unwrap();
        assert!((s.spectral_radius - 0.9).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let adj = random_digraph(6, 0.5, 2).unwrap();
        let w = laplacian_weights::<f32>(&adj, 0.5).unwrap();
        let s = spectral_summary(&w).unwrap();
        assert!((s.spectral_radius - 1.0).abs() < 1e-4);
    }
}
