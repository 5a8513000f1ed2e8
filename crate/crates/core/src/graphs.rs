//! Graph types, random DAG generators, acyclicity checks, CPDAG conversion
//! and DAG counting.
//!
//! Edge convention throughout the crate: `W[(i, j)] != 0` means an edge
//! `i -> j`, so column `j` of `W` holds the parent weights of node `j`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Dense weighted adjacency matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    pub(crate) weights: DMatrix<f64>,
}

impl WeightedDigraph {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let d = weights.nrows();
        if d == 0 || weights.ncols() != d {
            return Err(Error::Shape(format!(
                "adjacency must be square with d >= 1, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("adjacency has non-finite entries".into()));
        }
        if (0..d).any(|i| weights[(i, i)] != 0.0) {
            return Err(Error::Parameter("adjacency has a nonzero diagonal".into()));
        }
        Ok(Self { weights })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            weights: DMatrix::zeros(d, d),
        }
    }

    pub fn d(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.weights
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|x| **x != 0.0).count()
    }

    /// Edges as `(src, dst, weight)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let d = self.d();
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }
}

/// Unweighted DAG. Construction verifies acyclicity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryDag {
    d: usize,
    adj: Vec<bool>,
}

impl BinaryDag {
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            adj: vec![false; d * d],
        }
    }

    pub fn from_edges(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![false; d * d];
        for (i, j) in edges {
            if i >= d || j >= d {
                return Err(Error::Parameter(format!("edge ({i}, {j}) out of range for d={d}")));
            }
            if i == j {
                return Err(Error::Parameter(format!("self-loop at node {i}")));
            }
            adj[i * d + j] = true;
        }
        topo_order_by(d, |i, j| adj[i * d + j])?;
        Ok(Self { d, adj })
    }

    /// Binary support of a weighted matrix.
    pub fn from_support(w: &WeightedDigraph) -> Result<Self> {
        Self::from_matrix_support(w.weights())
    }

    pub(crate) fn from_matrix_support(w: &DMatrix<f64>) -> Result<Self> {
        let d = w.nrows();
        let edges = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter(|&(i, j)| w[(i, j)] != 0.0);
        Self::from_edges(d, edges.collect::<Vec<_>>())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.d + j]
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.has_edge(i, j) || self.has_edge(j, i)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.d;
        (0..d * d)
            .filter(move |&k| self.adj[k])
            .map(move |k| (k / d, k % d))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        (0..self.d).filter(|&i| self.has_edge(i, j)).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.d).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// Nodes reachable from `i` by a directed path, including `i` itself.
    pub fn descendants(&self, i: usize) -> Vec<bool> {
        let mut seen = vec![false; self.d];
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(v) = stack.pop() {
            for c in 0..self.d {
                if self.has_edge(v, c) && !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Weighted matrix with unit weights on the edges.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }
}

/// Completed partially directed acyclic graph. Undirected pairs are stored
/// as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    pub d: usize,
    pub directed: BTreeSet<(usize, usize)>,
    pub undirected: BTreeSet<(usize, usize)>,
}

/// Relation between an unordered pair in a CPDAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMark {
    None,
    Forward,
    Backward,
    Undirected,
}

impl Cpdag {
    /// Mark of the pair `(i, j)` seen from `i`.
    pub fn mark(&self, i: usize, j: usize) -> PairMark {
        if self.directed.contains(&(i, j)) {
            PairMark::Forward
        } else if self.directed.contains(&(j, i)) {
            PairMark::Backward
        } else if self.undirected.contains(&(i.min(j), i.max(j))) {
            PairMark::Undirected
        } else {
            PairMark::None
        }
    }
}

/// Sign convention for [`assign_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSign {
    Mixed,
    Nonneg,
}

/// Erdős–Rényi DAG: undirected G(d, p) with `p = mean_degree / (d - 1)`,
/// oriented along a uniformly random node permutation.
pub fn random_er_dag<R: Rng + ?Sized>(d: usize, mean_degree: f64, rng: &mut R) -> Result<BinaryDag> {
    if d < 2 {
        return Err(Error::Parameter(format!("ER graph needs d >= 2, got {d}")));
    }
    if !(mean_degree >= 0.0) || mean_degree >= d as f64 {
        return Err(Error::Parameter(format!(
            "mean degree must lie in [0, d), got {mean_degree} for d={d}"
        )));
    }
    let p = (mean_degree / (d - 1) as f64).min(1.0);
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for a in 0..d {
        for b in (a + 1)..d {
            if rng.random::<f64>() < p {
                edges.push((perm[a], perm[b]));
            }
        }
    }
    BinaryDag::from_edges(d, edges)
}

/// Directed Erdős–Rényi digraph without self-loops (cycles allowed). Used as
/// the support of lag matrices in time-series models.
pub fn random_er_digraph<R: Rng + ?Sized>(d: usize, mean_degree: f64, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    if d < 2 || !(mean_degree >= 0.0) || mean_degree >= d as f64 {
        return Err(Error::Parameter(format!(
            "invalid digraph parameters d={d}, mean_degree={mean_degree}"
        )));
    }
    // mean total degree counts each arc twice, as for DAGs
    let p = (mean_degree / (2.0 * (d - 1) as f64)).min(1.0);
    let mut edges = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i != j && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(edges)
}

/// Barabási–Albert scale-free DAG.
///
/// Starts from a clique on `attach_edges + 1` nodes; every later node links
/// to `attach_edges` distinct earlier nodes chosen with probability
/// proportional to their current degree. Arcs point from the newer node to
/// the older one, so early hubs collect large in-degree.
pub fn random_sf_dag<R: Rng + ?Sized>(d: usize, attach_edges: usize, rng: &mut R) -> Result<BinaryDag> {
    if attach_edges < 1 || attach_edges >= d {
        return Err(Error::Parameter(format!(
            "attach_edges must satisfy 1 <= m < d, got m={attach_edges}, d={d}"
        )));
    }
    let m = attach_edges;
    let mut edges = Vec::new();
    // each endpoint appears once per incident edge
    let mut endpoints: Vec<usize> = Vec::new();
    for a in 0..=m {
        for b in (a + 1)..=m {
            edges.push((b, a));
            endpoints.push(a);
            endpoints.push(b);
        }
    }
    for new in (m + 1)..d {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.random_range(0..new)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            targets.insert(t);
        }
        for &t in &targets {
            edges.push((new, t));
            endpoints.push(t);
            endpoints.push(new);
        }
    }
    BinaryDag::from_edges(d, edges)
}

/// Draws each edge weight uniformly from `[low, high]`, negating it with
/// probability 1/2 for [`WeightSign::Mixed`].
pub fn assign_weights<R: Rng + ?Sized>(
    dag: &BinaryDag,
    low: f64,
    high: f64,
    sign: WeightSign,
    rng: &mut R,
) -> Result<WeightedDigraph> {
    let w = weight_edges(dag.d(), dag.edges(), low, high, sign, rng)?;
    WeightedDigraph::new(w)
}

pub(crate) fn weight_edges<R: Rng + ?Sized>(
    d: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
    low: f64,
    high: f64,
    sign: WeightSign,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(low > 0.0 && low < high && high.is_finite()) {
        return Err(Error::Parameter(format!(
            "weight range must satisfy 0 < low < high, got [{low}, {high}]"
        )));
    }
    let mut w = DMatrix::zeros(d, d);
    for (i, j) in edges {
        let mut v = rng.random_range(low..=high);
        if sign == WeightSign::Mixed && rng.random::<bool>() {
            v = -v;
        }
        w[(i, j)] = v;
    }
    Ok(w)
}

/// Kahn's algorithm over an arbitrary edge predicate.
pub(crate) fn topo_order_by(d: usize, edge: impl Fn(usize, usize) -> bool) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; d];
    for i in 0..d {
        for j in 0..d {
            if i != j && edge(i, j) {
                indeg[j] += 1;
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(d);
    let mut self_loop = None;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for j in 0..d {
            if j != v && edge(v, j) {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push_back(j);
                }
            }
        }
    }
    for v in 0..d {
        if edge(v, v) {
            self_loop = Some(v);
        }
    }
    if let Some(v) = self_loop {
        return Err(Error::Cyclic { cycle: vec![v] });
    }
    if order.len() == d {
        return Ok(order);
    }
    // Every leftover node has a leftover predecessor; walk backwards until a
    // node repeats.
    let mut left = vec![false; d];
    for v in 0..d {
        left[v] = indeg[v] > 0;
    }
    let start = (0..d).find(|&v| left[v]).expect("leftover node exists");
    let mut pos = vec![usize::MAX; d];
    let mut walk = Vec::new();
    let mut v = start;
    while pos[v] == usize::MAX {
        pos[v] = walk.len();
        walk.push(v);
        v = (0..d)
            .find(|&u| u != v && left[u] && edge(u, v))
            .expect("leftover node has a leftover predecessor");
    }
    let mut cycle: Vec<usize> = walk[pos[v]..].to_vec();
    cycle.reverse();
    Err(Error::Cyclic { cycle })
}

/// Topological order of the support of `W`, or a cyclic-graph error carrying
/// one directed cycle.
pub fn topological_order(w: &WeightedDigraph) -> Result<Vec<usize>> {
    topo_order_matrix(w.weights())
}

pub(crate) fn topo_order_matrix(w: &DMatrix<f64>) -> Result<Vec<usize>> {
    topo_order_by(w.nrows(), |i, j| w[(i, j)] != 0.0)
}

pub fn is_dag(w: &WeightedDigraph) -> bool {
    topological_order(w).is_ok()
}

pub(crate) fn is_dag_matrix(w: &DMatrix<f64>) -> bool {
    topo_order_matrix(w).is_ok()
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for t in 0..k {
        acc = acc * BigInt::from(n - t) / BigInt::from(t + 1);
    }
    acc
}

/// Number of labeled DAGs on `d` nodes via Robinson's recursion.
pub fn count_dags(d: usize) -> BigUint {
    let mut counts: Vec<BigInt> = vec![BigInt::one()];
    for m in 1..=d {
        let mut total = BigInt::zero();
        for i in 1..=m {
            let term = binomial(m, i) * (BigInt::one() << (i * (m - i))) * &counts[m - i];
            if i % 2 == 1 {
                total += term;
            } else {
                total -= term;
            }
        }
        counts.push(total);
    }
    counts[d]
        .to_biguint()
        .expect("DAG counts are positive")
}

/// Markov-equivalence representative: skeleton, v-structures, then Meek's
/// rules R1–R4 to closure.
pub fn to_cpdag(dag: &BinaryDag) -> Cpdag {
    let d = dag.d();
    // dir[i][j]: i -> j oriented; und[i][j] symmetric
    let mut dir = vec![vec![false; d]; d];
    let mut und = vec![vec![false; d]; d];
    for (i, j) in dag.edges() {
        und[i][j] = true;
        und[j][i] = true;
    }
    for k in 0..d {
        let pa = dag.parents(k);
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !dag.adjacent(a, b) {
                    for p in [a, b] {
                        dir[p][k] = true;
                        und[p][k] = false;
                        und[k][p] = false;
                    }
                }
            }
        }
    }
    let adj = |dir: &Vec<Vec<bool>>, und: &Vec<Vec<bool>>, a: usize, b: usize| {
        dir[a][b] || dir[b][a] || und[a][b]
    };
    loop {
        let mut changed = false;
        for a in 0..d {
            for b in 0..d {
                if !und[a][b] {
                    continue;
                }
                let mut orient = false;
                // R1: c -> a - b, c and b nonadjacent
                for c in 0..d {
                    if dir[c][a] && !adj(&dir, &und, c, b) && c != b {
                        orient = true;
                        break;
                    }
                }
                // R2: a -> c -> b with a - b
                if !orient {
                    orient = (0..d).any(|c| dir[a][c] && dir[c][b]);
                }
                // R3: a - c -> b, a - e -> b, c and e nonadjacent
                if !orient {
                    'r3: for c in 0..d {
                        if !(und[a][c] && dir[c][b]) {
                            continue;
                        }
                        for e in (c + 1)..d {
                            if und[a][e] && dir[e][b] && !adj(&dir, &und, c, e) {
                                orient = true;
                                break 'r3;
                            }
                        }
                    }
                }
                // R4: a - c, c -> e -> b, a adjacent e, c and b nonadjacent
                if !orient {
                    'r4: for c in 0..d {
                        if !und[a][c] || c == b {
                            continue;
                        }
                        for e in 0..d {
                            if dir[c][e] && dir[e][b] && adj(&dir, &und, a, e) && !adj(&dir, &und, c, b) {
                                orient = true;
                                break 'r4;
                            }
                        }
                    }
                }
                if orient {
                    dir[a][b] = true;
                    und[a][b] = false;
                    und[b][a] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut directed = BTreeSet::new();
    let mut undirected = BTreeSet::new();
    for i in 0..d {
        for j in 0..d {
            if dir[i][j] {
                directed.insert((i, j));
            }
            if und[i][j] && i < j {
                undirected.insert((i, j));
            }
        }
    }
    Cpdag {
        d,
        directed,
        undirected,
    }
}

/// Zeroes every entry with `|w| <= tau`.
pub fn threshold_edges(w: &WeightedDigraph, tau: f64) -> Result<WeightedDigraph> {
    if !(tau >= 0.0) {
        return Err(Error::Parameter(format!("threshold must be >= 0, got {tau}")));
    }
    Ok(WeightedDigraph {
        weights: threshold_matrix(w.weights(), tau),
    })
}

pub(crate) fn threshold_matrix(w: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    w.map(|x| if x.abs() <= tau { 0.0 } else { x })
}

/// Repeatedly deletes the smallest-magnitude edge on a detected cycle until
/// the support is acyclic. Returns the removed edges in deletion order.
pub fn break_cycles(w: &mut DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut removed = Vec::new();
    while let Err(Error::Cyclic { cycle }) = topo_order_matrix(w) {
        let k = cycle.len();
        let (i, j) = (0..k)
            .map(|t| (cycle[t], cycle[(t + 1) % k]))
            .min_by(|a, b| w[*a].abs().total_cmp(&w[*b].abs()))
            .expect("cycle is nonempty");
        removed.push((i, j, w[(i, j)]));
        w[(i, j)] = 0.0;
    }
    removed
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dag(d: usize, edges: &[(usize, usize)]) -> BinaryDag {
        BinaryDag::from_edges(d, edges.iter().copied()).unwrap()
    }

    fn weighted(d: usize, edges: &[(usize, usize)]) -> WeightedDigraph {
        let mut w = DMatrix::zeros(d, d);
        for &(i, j) in edges {
            w[(i, j)] = 1.0;
        }
        WeightedDigraph::new(w).unwrap()
    }

    #[test]
    fn weighted_digraph_rejects_bad_input() {
        assert!(WeightedDigraph::new(DMatrix::identity(2, 2)).is_err());
        assert!(WeightedDigraph::new(DMatrix::zeros(2, 3)).is_err());
        assert!(WeightedDigraph::new(DMatrix::zeros(0, 0)).is_err());
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = f64::NAN;
        assert!(WeightedDigraph::new(w).is_err());
    }

    #[test]
    fn er_zero_degree_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_er_dag(2, 0.0, &mut rng).unwrap().edge_count(), 0);
    }

    #[test]
    fn er_full_probability_is_complete_dag() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_er_dag(3, 2.0, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn er_edge_count_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_er_dag(100, 4.0, &mut rng).unwrap();
        let (n, p) = (4950.0, 4.0 / 99.0);
        let mean: f64 = n * p;
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((g.edge_count() as f64 - mean).abs() < 3.0 * sd, "{}", g.edge_count());
    }

    #[test]
    fn er_rejects_bad_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_er_dag(1, 0.0, &mut rng).is_err());
        assert!(random_er_dag(5, 5.0, &mut rng).is_err());
        assert!(random_er_dag(5, -1.0, &mut rng).is_err());
    }

    #[test]
    fn sf_small_tree_and_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(random_sf_dag(3, 1, &mut rng).unwrap().edge_count(), 2);
        let g = random_sf_dag(200, 2, &mut rng).unwrap();
        let mean_degree = 2.0 * g.edge_count() as f64 / 200.0;
        assert!((mean_degree - 4.0).abs() < 0.1, "{mean_degree}");
        assert!(random_sf_dag(3, 3, &mut rng).is_err());
        assert!(random_sf_dag(3, 0, &mut rng).is_err());
    }

    #[test]
    fn sf_early_nodes_are_hubs() {
        let (mut first, mut last) = (0usize, 0usize);
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_sf_dag(10, 2, &mut rng).unwrap();
            first += g.parents(0).len();
            last += g.parents(9).len();
        }
        assert!(first >= last, "in-degree(0)={first}, in-degree(9)={last}");
    }

    #[test]
    fn assign_weights_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_er_dag(30, 4.0, &mut rng).unwrap();
        let w = assign_weights(&g, 0.5, 2.0, WeightSign::Mixed, &mut rng).unwrap();
        assert_eq!(w.edge_count(), g.edge_count());
        assert!(w.edges().iter().all(|e| (0.5..=2.0).contains(&e.2.abs())));
        assert!(w.edges().iter().any(|e| e.2 < 0.0));
        let w = assign_weights(&g, 0.25, 1.0, WeightSign::Nonneg, &mut rng).unwrap();
        assert!(w.edges().iter().all(|e| (0.25..=1.0).contains(&e.2)));
        let w = assign_weights(&BinaryDag::empty(4), 0.5, 2.0, WeightSign::Mixed, &mut rng).unwrap();
        assert_eq!(w.weights(), &DMatrix::zeros(4, 4));
        assert!(assign_weights(&g, 0.0, 1.0, WeightSign::Mixed, &mut rng).is_err());
        assert!(assign_weights(&g, 1.0, 0.5, WeightSign::Mixed, &mut rng).is_err());
    }

    #[test]
    fn topological_order_cases() {
        assert_eq!(topological_order(&weighted(3, &[(0, 1), (1, 2)])).unwrap(), vec![0, 1, 2]);
        match topological_order(&weighted(2, &[(0, 1), (1, 0)])) {
            Err(Error::Cyclic { cycle }) => assert_eq!(cycle.len(), 2),
            other => panic!("expected cycle, got {other:?}"),
        }
        match topological_order(&weighted(3, &[(0, 1), (1, 2), (2, 0)])) {
            Err(Error::Cyclic { cycle }) => {
                assert_eq!(cycle.len(), 3);
                let w = weighted(3, &[(0, 1), (1, 2), (2, 0)]);
                for t in 0..3 {
                    assert_eq!(w.weights()[(cycle[t], cycle[(t + 1) % 3])], 1.0);
                }
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn cycle_reported_is_a_real_cycle_with_tail() {
        // 0 -> 1 -> 2 -> 3 -> 1, plus 4 -> 0
        let w = weighted(5, &[(0, 1), (1, 2), (2, 3), (3, 1), (4, 0)]);
        match topological_order(&w) {
            Err(Error::Cyclic { cycle }) => {
                assert_eq!(cycle.len(), 3);
                for t in 0..3 {
                    assert_eq!(w.weights()[(cycle[t], cycle[(t + 1) % 3])], 1.0);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn is_dag_cases() {
        assert!(is_dag(&weighted(3, &[(0, 1), (1, 2)])));
        assert!(!is_dag(&weighted(2, &[(0, 1), (1, 0)])));
        assert!(is_dag(&WeightedDigraph::zeros(4)));
    }

    #[test]
    fn count_dags_known_values() {
        assert_eq!(count_dags(0), BigUint::from(1u32));
        assert_eq!(count_dags(1), BigUint::from(1u32));
        assert_eq!(count_dags(2), BigUint::from(3u32));
        assert_eq!(count_dags(3), BigUint::from(25u32));
        assert_eq!(count_dags(4), BigUint::from(543u32));
        assert_eq!(count_dags(8), BigUint::from(783702329343u64));
        // exceeds u64 well before d = 20
        assert!(count_dags(20).bits() > 64);
    }

    #[test]
    fn count_dags_matches_enumeration() {
        for d in 0..=4usize {
            let pairs: Vec<(usize, usize)> = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .collect();
            let mut n = 0u64;
            for mask in 0u32..(1 << pairs.len()) {
                let edges = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e);
                if BinaryDag::from_edges(d, edges).is_ok() {
                    n += 1;
                }
            }
            assert_eq!(count_dags(d), BigUint::from(n), "d={d}");
        }
    }

    #[test]
    fn cpdag_examples() {
        let v = to_cpdag(&dag(3, &[(0, 2), (1, 2)]));
        assert_eq!(v.directed, BTreeSet::from([(0, 2), (1, 2)]));
        assert!(v.undirected.is_empty());

        let e = to_cpdag(&dag(2, &[(0, 1)]));
        assert!(e.directed.is_empty());
        assert_eq!(e.undirected, BTreeSet::from([(0, 1)]));

        let c = to_cpdag(&dag(3, &[(0, 1), (1, 2)]));
        assert!(c.directed.is_empty());
        assert_eq!(c.undirected.len(), 2);
    }

    #[test]
    fn cpdag_meek_r1_propagates() {
        // 0 -> 2 <- 1 and 2 - 3 gets compelled to 2 -> 3
        let c = to_cpdag(&dag(4, &[(0, 2), (1, 2), (2, 3)]));
        assert!(c.directed.contains(&(2, 3)));
    }

    #[test]
    fn threshold_cases() {
        let w = WeightedDigraph::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.0, 0.0])).unwrap();
        assert_eq!(threshold_edges(&w, 0.0).unwrap(), w);
        assert_eq!(threshold_edges(&w, 0.3).unwrap().edge_count(), 0);
        assert_eq!(threshold_edges(&w, 0.2).unwrap().edge_count(), 0);
        assert!(threshold_edges(&w, -1.0).is_err());
    }

    #[test]
    fn break_cycles_removes_weakest_edge() {
        let mut w = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.5, 0.0, 0.0]);
        let removed = break_cycles(&mut w);
        assert_eq!(removed, vec![(2, 0, 0.5)]);
        assert!(is_dag_matrix(&w));
    }
}
