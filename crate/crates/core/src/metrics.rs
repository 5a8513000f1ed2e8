//! Recovery metrics for an estimated graph against a ground-truth DAG.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::{to_cpdag, BinaryDag, WeightedDigraph};

fn same_size(a: &BinaryDag, b: &BinaryDag) -> Result<()> {
    if a.d() != b.d() {
        return Err(Error::Shape(format!("graphs have {} and {} nodes", a.d(), b.d())));
    }
    Ok(())
}

/// Structural Hamming distance; a reversed edge counts once.
pub fn shd(est: &BinaryDag, truth: &BinaryDag) -> Result<usize> {
    same_size(est, truth)?;
    let d = est.d();
    let mut count = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            let a = (est.has_edge(i, j), est.has_edge(j, i));
            let b = (truth.has_edge(i, j), truth.has_edge(j, i));
            if a != b {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// SHD between the CPDAGs of both graphs: one per pair whose marks differ.
pub fn shd_c(est: &BinaryDag, truth: &BinaryDag) -> Result<usize> {
    same_size(est, truth)?;
    let (a, b) = (to_cpdag(est), to_cpdag(truth));
    let d = est.d();
    let mut count = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            if a.mark(i, j) != b.mark(i, j) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// True positives, detected edges, true edges.
fn confusion(est: &BinaryDag, truth: &BinaryDag) -> Result<(usize, usize, usize)> {
    same_size(est, truth)?;
    let tp = est.edges().filter(|&(i, j)| truth.has_edge(i, j)).count();
    Ok((tp, est.edge_count(), truth.edge_count()))
}

pub fn fdr(est: &BinaryDag, truth: &BinaryDag) -> Result<f64> {
    let (tp, detected, _) = confusion(est, truth)?;
    Ok(if detected == 0 { 0.0 } else { (detected - tp) as f64 / detected as f64 })
}

pub fn tpr(est: &BinaryDag, truth: &BinaryDag) -> Result<f64> {
    let (tp, _, actual) = confusion(est, truth)?;
    Ok(if actual == 0 { 1.0 } else { tp as f64 / actual as f64 })
}

pub fn f1(est: &BinaryDag, truth: &BinaryDag) -> Result<f64> {
    let precision = 1.0 - fdr(est, truth)?;
    let recall = tpr(est, truth)?;
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// Structural intervention distance: ordered pairs `(i, j)` whose
/// interventional distribution `p(x_j | do(x_i))` is wrong when adjusting for
/// the estimated parents of `i`.
pub fn sid(est: &BinaryDag, truth: &BinaryDag) -> Result<usize> {
    same_size(est, truth)?;
    let d = truth.d();
    let desc: Vec<Vec<bool>> = (0..d).map(|i| truth.descendants(i)).collect();
    let mut errors = 0;
    for i in 0..d {
        let mut in_z = vec![false; d];
        for p in est.parents(i) {
            in_z[p] = true;
        }
        for j in (0..d).filter(|&j| j != i) {
            let wrong = if in_z[j] {
                // the estimate implies no effect of i on j
                desc[i][j]
            } else {
                !valid_adjustment(truth, &desc, i, j, &in_z)
            };
            if wrong {
                errors += 1;
            }
        }
    }
    Ok(errors)
}

/// Adjustment criterion for the pair `(i, j)` and set `z` in `g`.
fn valid_adjustment(g: &BinaryDag, desc: &[Vec<bool>], i: usize, j: usize, in_z: &[bool]) -> bool {
    let d = g.d();
    // nodes w != i on a directed path i ⇝ j
    let on_path: Vec<bool> = (0..d).map(|w| w != i && desc[i][w] && desc[w][j]).collect();
    for w in (0..d).filter(|&w| on_path[w]) {
        if (0..d).any(|z| in_z[z] && desc[w][z]) {
            return false;
        }
    }
    // drop the first edge of every causal path and test d-separation
    let keep = |a: usize, b: usize| g.has_edge(a, b) && !(a == i && on_path[b]);
    !d_connected(d, keep, i, j, in_z)
}

/// Whether `x` and `y` are d-connected given `z` in the DAG with arc set
/// `edge`, via the moralized ancestral graph.
fn d_connected(d: usize, edge: impl Fn(usize, usize) -> bool, x: usize, y: usize, in_z: &[bool]) -> bool {
    let mut anc = vec![false; d];
    let mut stack: Vec<usize> = (0..d).filter(|&v| v == x || v == y || in_z[v]).collect();
    for &v in &stack {
        anc[v] = true;
    }
    while let Some(v) = stack.pop() {
        for p in 0..d {
            if edge(p, v) && !anc[p] {
                anc[p] = true;
                stack.push(p);
            }
        }
    }
    let mut adj = vec![vec![false; d]; d];
    for c in (0..d).filter(|&c| anc[c]) {
        let parents: Vec<usize> = (0..d).filter(|&p| anc[p] && edge(p, c)).collect();
        for (k, &p) in parents.iter().enumerate() {
            adj[p][c] = true;
            adj[c][p] = true;
            for &q in &parents[k + 1..] {
                adj[p][q] = true;
                adj[q][p] = true;
            }
        }
    }
    let mut seen = vec![false; d];
    let mut stack = vec![x];
    seen[x] = true;
    while let Some(v) = stack.pop() {
        if v == y {
            return true;
        }
        for u in 0..d {
            if adj[v][u] && !seen[u] && !in_z[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    false
}

/// `‖Ŵ - W₀‖²_F / ‖W₀‖²_F`.
pub fn nmse(w_est: &DMatrix<f64>, w_true: &DMatrix<f64>) -> Result<f64> {
    if w_est.shape() != w_true.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", w_est.shape(), w_true.shape())));
    }
    let denom = w_true.norm_squared();
    if denom == 0.0 {
        return Err(Error::Undefined("NMSE against an all-zero truth".into()));
    }
    Ok((w_est - w_true).norm_squared() / denom)
}

/// F1 score of the nonzero pattern of a list of matrices, e.g. the lag
/// matrices of a structural VAR, which need not be acyclic.
pub fn support_f1(est: &[DMatrix<f64>], truth: &[DMatrix<f64>]) -> Result<f64> {
    if est.len() != truth.len() || est.iter().zip(truth).any(|(a, b)| a.shape() != b.shape()) {
        return Err(Error::Shape("estimate and truth matrix lists differ in shape".into()));
    }
    let (mut tp, mut detected, mut actual) = (0usize, 0usize, 0usize);
    for (a, b) in est.iter().zip(truth) {
        for (x, y) in a.iter().zip(b.iter()) {
            let (e, t) = (*x != 0.0, *y != 0.0);
            tp += usize::from(e && t);
            detected += usize::from(e);
            actual += usize::from(t);
        }
    }
    Ok(if detected + actual == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (detected + actual) as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub shd: usize,
    pub shd_c: usize,
    pub fdr: f64,
    pub tpr: f64,
    pub f1: f64,
    pub sid: usize,
    /// `None` when the truth has no edges.
    pub nmse: Option<f64>,
    pub n_edges_est: usize,
    pub n_edges_true: usize,
}

impl MetricsReport {
    /// Both graphs must be acyclic.
    pub fn compute(est: &WeightedDigraph, truth: &WeightedDigraph) -> Result<Self> {
        if est.d() != truth.d() {
            return Err(Error::Shape(format!("estimate has d={}, truth d={}", est.d(), truth.d())));
        }
        let (e, t) = (BinaryDag::from_support(est)?, BinaryDag::from_support(truth)?);
        let mut report = Self::compute_binary(&e, &t)?;
        report.nmse = nmse(est.weights(), truth.weights()).ok();
        Ok(report)
    }

    pub fn compute_binary(est: &BinaryDag, truth: &BinaryDag) -> Result<Self> {
        Ok(Self {
            shd: shd(est, truth)?,
            shd_c: shd_c(est, truth)?,
            fdr: fdr(est, truth)?,
            tpr: tpr(est, truth)?,
            f1: f1(est, truth)?,
            sid: sid(est, truth)?,
            nmse: None,
            n_edges_est: est.edge_count(),
            n_edges_true: truth.edge_count(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dag(d: usize, edges: &[(usize, usize)]) -> BinaryDag {
        BinaryDag::from_edges(d, edges.iter().copied()).unwrap()
    }

    #[test]
    fn shd_examples() {
        let t = dag(3, &[(0, 1), (0, 2)]);
        assert_eq!(shd(&t, &t).unwrap(), 0);
        assert_eq!(shd(&dag(2, &[(1, 0)]), &dag(2, &[(0, 1)])).unwrap(), 1);
        assert_eq!(shd(&dag(3, &[(0, 1)]), &t).unwrap(), 1);
        assert!(shd(&dag(2, &[]), &t).is_err());
    }

    #[test]
    fn shd_c_examples() {
        let chain = dag(3, &[(0, 1), (1, 2)]);
        let reversed = dag(3, &[(2, 1), (1, 0)]);
        assert_eq!(shd_c(&chain, &chain).unwrap(), 0);
        assert_eq!(shd_c(&reversed, &chain).unwrap(), 0);
        let collider = dag(3, &[(0, 1), (2, 1)]);
        assert_eq!(shd_c(&chain, &collider).unwrap(), 2);
    }

    #[test]
    fn rate_examples() {
        let t = dag(3, &[(0, 1), (1, 2)]);
        assert_eq!(fdr(&t, &t).unwrap(), 0.0);
        assert_eq!(tpr(&t, &t).unwrap(), 1.0);
        assert_eq!(f1(&t, &t).unwrap(), 1.0);
        let empty = dag(3, &[]);
        assert_eq!(tpr(&empty, &t).unwrap(), 0.0);
        assert_eq!(fdr(&empty, &t).unwrap(), 0.0);
        assert_eq!(f1(&empty, &t).unwrap(), 0.0);
        assert_eq!(tpr(&empty, &empty).unwrap(), 1.0);
    }

    #[test]
    fn rates_from_confusion_counts() {
        // 17 true edges on 11 nodes, 13 detected with 6 correct
        let truth_edges: Vec<(usize, usize)> = (0..11)
            .flat_map(|i| ((i + 1)..11).map(move |j| (i, j)))
            .take(17)
            .collect();
        let truth = dag(11, &truth_edges);
        let mut est_edges: Vec<(usize, usize)> = truth_edges[..6].to_vec();
        est_edges.extend((0..11).flat_map(|i| ((i + 1)..11).map(move |j| (i, j))).skip(17).take(7));
        let est = dag(11, &est_edges);
        assert_relative_eq!(tpr(&est, &truth).unwrap(), 6.0 / 17.0);
        assert_relative_eq!(fdr(&est, &truth).unwrap(), 7.0 / 13.0);
        assert!((tpr(&est, &truth).unwrap() - 0.35).abs() < 0.005);
        assert!((fdr(&est, &truth).unwrap() - 0.54).abs() < 0.005);
    }

    #[test]
    fn sid_examples() {
        let t = dag(3, &[(0, 1), (1, 2)]);
        assert_eq!(sid(&t, &t).unwrap(), 0);
        assert_eq!(sid(&dag(2, &[]), &dag(2, &[(0, 1)])).unwrap(), 1);
        // reversed single edge: both intervention effects are wrong
        assert_eq!(sid(&dag(2, &[(1, 0)]), &dag(2, &[(0, 1)])).unwrap(), 2);
    }

    #[test]
    fn sid_is_not_symmetric() {
        // a supergraph of the truth keeps every adjustment valid
        let truth = dag(3, &[(0, 1)]);
        let dense = dag(3, &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(sid(&dense, &truth).unwrap(), 0);
        assert!(sid(&truth, &dense).unwrap() > 0);
    }

    #[test]
    fn nmse_examples() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.5, 0.0, 0.0]);
        assert_eq!(nmse(&w, &w).unwrap(), 0.0);
        assert_eq!(nmse(&DMatrix::zeros(2, 2), &w).unwrap(), 1.0);
        assert_eq!(nmse(&(&w * 2.0), &w).unwrap(), 1.0);
        assert!(matches!(nmse(&w, &DMatrix::zeros(2, 2)), Err(Error::Undefined(_))));
        assert!(nmse(&w, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn report_serializes_flat() {
        let w = WeightedDigraph::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.5, 0.0, 0.0])).unwrap();
        let r = MetricsReport::compute(&w, &w).unwrap();
        assert_eq!(r.shd, 0);
        assert_eq!(r.f1, 1.0);
        let v = serde_json::to_value(&r).unwrap();
        assert!(v.as_object().unwrap().values().all(|x| !x.is_object()));
        assert_eq!(v["nmse"], 0.0);
    }

    #[test]
    fn support_f1_counts_entries_across_matrices() {
        let t = vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]), DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0])];
        assert_eq!(support_f1(&t, &t).unwrap(), 1.0);
        // one hit, one miss, one false alarm
        let e = vec![DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.0]), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0])];
        assert_relative_eq!(support_f1(&e, &t).unwrap(), 0.5);
        assert!(support_f1(&e[..1], &t).is_err());
    }
}
