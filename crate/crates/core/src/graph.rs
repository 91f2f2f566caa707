//! Network topologies, graph Laplacians and random link-failure models.
//!
//! A [`Topology`] fixes the node count and the set of realizable edges. A
//! [`LinkFailureModel`] describes which of those edges are active at each
//! iteration; the per-iteration Laplacians are i.i.d. with an analytic mean
//! that [`mean_laplacian`] returns in closed form.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::{Error, Result};

/// Absolute tolerance for symmetry, PSD and connectivity checks.
pub const SPECTRAL_TOL: f64 = 1e-9;

/// Undirected simple graph on nodes `0..n`.
///
/// Edges are stored with the smaller endpoint first, in insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Topology {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidTopology(
                "graph must have at least one node".into(),
            ));
        }
        let mut seen = HashSet::new();
        let mut normalized = Vec::new();
        for (u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::InvalidTopology(format!(
                    "edge ({u}, {v}) references a node outside [0, {n_nodes})"
                )));
            }
            if u == v {
                return Err(Error::InvalidTopology(format!("self-loop at node {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::InvalidTopology(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            normalized.push(e);
        }
        Ok(Self {
            n_nodes,
            edges: normalized,
        })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        Self::new(n.max(1), (1..n).map(|i| (i - 1, i))).expect("path graph is valid")
    }

    /// Cycle on `n >= 3` nodes.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidTopology(format!(
                "ring needs at least 3 nodes, got {n}"
            )));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Self {
        let n = n.max(1);
        Self::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
            .expect("complete graph is valid")
    }

    /// k-regular circulant graph: node `i` links to `i ± 1, ..., i ± k/2 (mod n)`.
    pub fn circulant(n: usize, degree: usize) -> Result<Self> {
        if degree == 0 || !degree.is_multiple_of(2) {
            return Err(Error::InvalidTopology(format!(
                "circulant degree must be positive and even, got {degree}"
            )));
        }
        if degree >= n {
            return Err(Error::InvalidTopology(format!(
                "circulant degree {degree} must be below the node count {n}"
            )));
        }
        let half = degree / 2;
        Self::new(
            n,
            (0..n).flat_map(|i| (1..=half).map(move |k| (i, (i + k) % n))),
        )
    }

    /// Parses the plain-text edge-list format.
    ///
    /// One edge per line as two whitespace-separated 0-based node indices.
    /// `#` starts a comment. An optional `N <count>` line fixes the node
    /// count; otherwise it is one more than the largest index.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: String| Error::EdgeList { line: line_no, msg };
            if fields.len() != 2 {
                return Err(bad(format!("expected two fields, found {}", fields.len())));
            }
            if fields[0] == "N" {
                if declared.is_some() {
                    return Err(bad("node count declared twice".into()));
                }
                let n = fields[1]
                    .parse::<usize>()
                    .map_err(|e| bad(format!("bad node count `{}`: {e}", fields[1])))?;
                declared = Some(n);
                continue;
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| bad(format!("bad node index `{s}`: {e}")))
            };
            edges.push((parse(fields[0])?, parse(fields[1])?));
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        let n = match declared {
            Some(n) if n < inferred => {
                return Err(Error::InvalidTopology(format!(
                    "declared N = {n} but an edge references node {}",
                    inferred - 1
                )))
            }
            Some(n) => n,
            None => inferred,
        };
        Self::new(n, edges)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::EdgeList {
            line: 0,
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_edge_list(&text)
    }

    /// Serializes in the edge-list format, with an `N` header.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("N {}\n", self.n_nodes);
        for (u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// |𝓜|, the number of realizable edges.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }
}

/// Symmetric N×N graph Laplacian (possibly edge-weighted, as for means).
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: DMatrix<f64>,
}

impl LaplacianMatrix {
    /// Wraps a square matrix. Symmetry is checked by [`spectral`].
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Ok(Self {
            entries: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    /// Laplacian of a subset of a topology's edges, each with its own weight.
    pub fn weighted(n: usize, edges: impl IntoIterator<Item = ((usize, usize), f64)>) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for ((u, v), w) in edges {
            m[(u, u)] += w;
            m[(v, v)] += w;
            m[(u, v)] -= w;
            m[(v, u)] -= w;
        }
        Self { entries: m }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.entries[(i, j)]).collect())
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: &self.entries * c,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        (&self.entries * v).iter().copied().collect()
    }

    /// xᵀ L x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_row_sum(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }
}

/// L = D − A for the given topology.
pub fn laplacian(topology: &Topology) -> LaplacianMatrix {
    LaplacianMatrix::weighted(
        topology.n_nodes(),
        topology.edges().iter().map(|&e| (e, 1.0)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Algebraic connectivity λ2 (0 for a single node).
    pub lambda2: f64,
    /// Largest eigenvalue λN.
    pub lambda_n: f64,
    pub connected_on_average: bool,
}

impl SpectralSummary {
    pub fn eigenratio(&self) -> f64 {
        self.lambda_n / self.lambda2
    }
}

/// Eigen-decomposition of a Laplacian.
///
/// Rejects inputs whose asymmetry exceeds [`SPECTRAL_TOL`] or whose
/// smallest eigenvalue is below `-SPECTRAL_TOL`.
pub fn spectral(l: &LaplacianMatrix) -> Result<SpectralSummary> {
    let asym = l.max_asymmetry();
    if asym > SPECTRAL_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = l.n();
    if n == 0 {
        return Err(Error::NotSquare { rows: 0, cols: 0 });
    }
    let sym = (l.as_matrix() + l.as_matrix().transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    if eig[0] < -SPECTRAL_TOL {
        return Err(Error::NotPositiveSemidefinite(eig[0]));
    }
    let lambda2 = if n >= 2 { eig[1].max(0.0) } else { 0.0 };
    let lambda_n = eig[n - 1].max(0.0);
    Ok(SpectralSummary {
        eigenvalues: eig,
        lambda2,
        lambda_n,
        connected_on_average: lambda2 > SPECTRAL_TOL,
    })
}

/// User-supplied link process, e.g. spatially correlated failures.
///
/// Implementations must draw realizations i.i.d. across calls; the mean
/// Laplacian is derived from the per-edge activation probabilities.
pub trait EdgeSampler: Send + Sync {
    /// Pushes the indices (into `base.edges()`) of the edges active this
    /// iteration onto `active`, which arrives empty.
    fn sample(&self, base: &Topology, rng: &mut dyn RngCore, active: &mut Vec<usize>);

    /// Marginal activation probability of each realizable edge.
    fn edge_probabilities(&self, base: &Topology) -> Vec<f64>;
}

#[derive(Clone)]
pub enum FailureKind {
    Fixed,
    Erasure { p_fail: f64 },
    Gossip,
    Custom(Arc<dyn EdgeSampler>),
}

impl fmt::Debug for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureKind::Fixed => write!(f, "Fixed"),
            FailureKind::Erasure { p_fail } => write!(f, "Erasure {{ p_fail: {p_fail} }}"),
            FailureKind::Gossip => write!(f, "Gossip"),
            FailureKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Distribution over per-iteration Laplacians L(i) on a fixed edge set.
#[derive(Debug, Clone)]
pub struct LinkFailureModel {
    kind: FailureKind,
    base: Topology,
}

impl LinkFailureModel {
    pub fn fixed(base: Topology) -> Self {
        Self {
            kind: FailureKind::Fixed,
            base,
        }
    }

    /// Each edge independently fails with probability `p_fail` per iteration.
    pub fn erasure(base: Topology, p_fail: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_fail) {
            return Err(Error::InvalidProbability(p_fail));
        }
        Ok(Self {
            kind: FailureKind::Erasure { p_fail },
            base,
        })
    }

    /// Exactly one uniformly chosen edge is active per iteration.
    pub fn gossip(base: Topology) -> Self {
        Self {
            kind: FailureKind::Gossip,
            base,
        }
    }

    pub fn custom(base: Topology, sampler: Arc<dyn EdgeSampler>) -> Self {
        Self {
            kind: FailureKind::Custom(sampler),
            base,
        }
    }

    pub fn kind(&self) -> &FailureKind {
        &self.kind
    }

    pub fn base(&self) -> &Topology {
        &self.base
    }

    pub fn n_nodes(&self) -> usize {
        self.base.n_nodes()
    }

    /// Marginal probability that each realizable edge is active.
    pub fn edge_probabilities(&self) -> Vec<f64> {
        let m = self.base.n_edges();
        match &self.kind {
            FailureKind::Fixed => vec![1.0; m],
            FailureKind::Erasure { p_fail } => vec![1.0 - p_fail; m],
            FailureKind::Gossip => vec![if m == 0 { 0.0 } else { 1.0 / m as f64 }; m],
            FailureKind::Custom(s) => s.edge_probabilities(&self.base),
        }
    }

    /// E|M(i)|, the expected number of active edges per iteration.
    pub fn expected_active_edges(&self) -> f64 {
        self.edge_probabilities().iter().sum()
    }

    /// Draws the active edge set M(i) as indices into `base().edges()`.
    pub fn sample_active_edges<R: RngCore>(&self, rng: &mut R, active: &mut Vec<usize>) {
        active.clear();
        let m = self.base.n_edges();
        match &self.kind {
            FailureKind::Fixed => active.extend(0..m),
            FailureKind::Erasure { p_fail } => {
                let keep = 1.0 - p_fail;
                for e in 0..m {
                    if rng.random_bool(keep) {
                        active.push(e);
                    }
                }
            }
            FailureKind::Gossip => {
                if m > 0 {
                    active.push(rng.random_range(0..m));
                }
            }
            FailureKind::Custom(s) => s.sample(&self.base, rng, active),
        }
    }
}

/// Analytic mean L̄ = E[L(i)].
pub fn mean_laplacian(model: &LinkFailureModel) -> Result<LaplacianMatrix> {
    if matches!(model.kind(), FailureKind::Gossip) && model.base().n_edges() == 0 {
        return Err(Error::EmptyGossip);
    }
    let probs = model.edge_probabilities();
    Ok(LaplacianMatrix::weighted(
        model.n_nodes(),
        model.base().edges().iter().copied().zip(probs),
    ))
}

/// One realization L(i) of the link process.
pub fn sample_topology<R: RngCore>(model: &LinkFailureModel, rng: &mut R) -> LaplacianMatrix {
    let mut active = Vec::new();
    model.sample_active_edges(rng, &mut active);
    let edges = model.base().edges();
    LaplacianMatrix::weighted(model.n_nodes(), active.iter().map(|&e| (edges[e], 1.0)))
}
