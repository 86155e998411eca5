//! Communication graphs and doubly stochastic consensus weights.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resampling attempts before `erdos_renyi` gives up.
pub const MAX_RESAMPLES: usize = 100;

/// Row and column sums of a weight matrix must be within this of one.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// An undirected simple graph on agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = Error;
    fn try_from(raw: RawGraph) -> Result<Self> {
        Graph::new(raw.n, raw.edges.into_iter().map(|[i, j]| (i, j)))
    }
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        RawGraph {
            n: g.n,
            edges: g.edges.into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl Graph {
    /// Builds a graph from an edge list. Edges are normalized to `i < j` and
    /// deduplicated. Connectivity is not required here; the weight
    /// constructors enforce it.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Network("graph needs at least one agent".into()));
        }
        let mut out = Vec::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::Network(format!("self-loop at agent {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::Network(format!("edge ({i}, {j}) out of range for {n} agents")));
            }
            out.push((i.min(j), i.max(j)));
        }
        out.sort_unstable();
        out.dedup();
        Ok(Graph { n, edges: out })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn path(n: usize) -> Result<Self> {
        Graph::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Graph::path(n);
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn star(n: usize) -> Result<Self> {
        Graph::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Union-find over the edge list.
    pub fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n;
        for &(i, j) in &self.edges {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components == 1
    }

    /// Graph Laplacian `D - Adj`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }
}

/// Samples `G(n, p)` and redraws until the sample is connected.
pub fn erdos_renyi(n: usize, p: f64, rng_seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Argument("erdos_renyi needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("edge probability {p} is not in [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..MAX_RESAMPLES {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "no connected G({n}, {p}) sample in {MAX_RESAMPLES} draws; try a larger p (ln(n)/n = {:.4})",
        (n as f64).ln() / n as f64
    )))
}

/// `W = I - L / (lambda_2 + lambda_n)` from the Laplacian spectrum.
pub fn laplacian_weights(g: &Graph) -> Result<WeightMatrix> {
    let n = g.n();
    if n == 1 {
        return WeightMatrix::for_graph(g, DMatrix::identity(1, 1));
    }
    let l = g.laplacian();
    let mut eig: Vec<f64> = SymmetricEigen::new(l.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let (l2, ln) = (eig[1], eig[n - 1]);
    if l2 <= 1e-9 * ln.max(1.0) {
        return Err(Error::Network(format!(
            "graph is disconnected (second Laplacian eigenvalue {l2:.3e})"
        )));
    }
    let w = DMatrix::identity(n, n) - l / (l2 + ln);
    WeightMatrix::for_graph(g, w)
}

/// Metropolis weights `1 / (1 + max(deg i, deg j))` on edges.
pub fn metropolis_weights(g: &Graph) -> Result<WeightMatrix> {
    if !g.is_connected() {
        return Err(Error::Network("graph is disconnected".into()));
    }
    let n = g.n();
    let deg = g.degrees();
    let mut w = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    WeightMatrix::for_graph(g, w)
}

/// A validated symmetric doubly stochastic matrix with `|d| < 1` for every
/// non-Perron eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
    spectrum: Vec<f64>,
    consensus_gap: f64,
    sparse: SparseRows,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawWeights> for WeightMatrix {
    type Error = Error;
    fn try_from(raw: RawWeights) -> Result<Self> {
        WeightMatrix::from_rows(&raw.rows)
    }
}

impl From<WeightMatrix> for RawWeights {
    fn from(w: WeightMatrix) -> Self {
        RawWeights { rows: w.rows() }
    }
}

impl WeightMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Network("weight rows must form a non-empty square matrix".into()));
        }
        WeightMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Validates `entries` without reference to a graph.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::Network("weight matrix must be square and non-empty".into()));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Network("weight matrix has non-finite entries".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > STOCHASTIC_TOL {
                    return Err(Error::Network(format!("W is not symmetric at ({i}, {j})")));
                }
            }
        }
        for i in 0..n {
            let row: f64 = entries.row(i).sum();
            let col: f64 = entries.column(i).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL || (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Network(format!(
                    "row/column {i} sums to {row}/{col}, expected 1"
                )));
            }
        }
        // Symmetrize exactly so the eigen-solver sees a symmetric input.
        let sym = (&entries + entries.transpose()) * 0.5;
        let mut spectrum: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        spectrum.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(b.total_cmp(a)));
        let perron = spectrum
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let consensus_gap = spectrum
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != perron)
            .map(|(_, d)| d.abs())
            .fold(0.0, f64::max);
        if consensus_gap >= 1.0 - 1e-12 {
            return Err(Error::Network(format!(
                "non-Perron eigenvalue of modulus {consensus_gap}; consensus would not converge"
            )));
        }
        let sparse = SparseRows::from_dense(&entries);
        Ok(WeightMatrix {
            entries,
            spectrum,
            consensus_gap,
            sparse,
        })
    }

    /// Validates `entries` and its sparsity pattern against `g`.
    pub fn for_graph(g: &Graph, entries: DMatrix<f64>) -> Result<Self> {
        let w = WeightMatrix::new(entries)?;
        w.check_conforms(g)?;
        Ok(w)
    }

    /// `W_ij != 0` exactly on the edges of `g` (off the diagonal).
    pub fn check_conforms(&self, g: &Graph) -> Result<()> {
        if g.n() != self.n() {
            return Err(Error::Network(format!(
                "weights are {}x{} but the graph has {} agents",
                self.n(),
                self.n(),
                g.n()
            )));
        }
        if !g.is_connected() {
            return Err(Error::Network("graph is disconnected".into()));
        }
        for i in 0..self.n() {
            for j in 0..self.n() {
                if i != j && (self.entries[(i, j)] != 0.0) != g.has_edge(i, j) {
                    return Err(Error::Network(format!(
                        "W[{i}][{j}] = {} does not match the graph",
                        self.entries[(i, j)]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Eigenvalues sorted by decreasing modulus.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Largest modulus among the non-Perron eigenvalues.
    pub fn consensus_gap(&self) -> f64 {
        self.consensus_gap
    }

    pub fn sparse(&self) -> &SparseRows {
        &self.sparse
    }
}

/// Compressed sparse rows of `W`, used on the per-step hot path.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut row_start = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    cols.push(j);
                    vals.push(m[(i, j)]);
                }
            }
            row_start.push(cols.len());
        }
        SparseRows { row_start, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `out = a W`, column by column. `W` must be symmetric, which every
    /// validated weight matrix is.
    pub fn right_mul(&self, a: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        for i in 0..self.row_start.len() - 1 {
            let mut col = out.column_mut(i);
            col.fill(0.0);
            for k in self.row_start[i]..self.row_start[i + 1] {
                col.axpy(self.vals[k], &a.column(self.cols[k]), 1.0);
            }
        }
    }

    /// `out = W x`.
    #[inline]
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }
}
