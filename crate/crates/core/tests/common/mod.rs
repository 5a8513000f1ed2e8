//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use colide::graphs::BinaryDag;
use nalgebra::DMatrix;

/// Every labelled DAG on `d` nodes, by filtering all arc subsets.
pub fn all_dags(d: usize) -> Vec<BinaryDag> {
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let edges = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e);
        if let Ok(g) = BinaryDag::from_edges(d, edges) {
            out.push(g);
        }
    }
    out
}

fn adj(d: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); d];
    for &(a, b) in edges {
        nb[a].push(b);
        nb[b].push(a);
    }
    nb
}

/// Reflexive descendants of `v` under the arc set `edges`.
fn desc(d: usize, edges: &BTreeSet<(usize, usize)>, v: usize) -> Vec<bool> {
    let mut seen = vec![false; d];
    let mut stack = vec![v];
    seen[v] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            if a == u && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen
}

fn simple_paths(nb: &[Vec<usize>], from: usize, to: usize) -> Vec<Vec<usize>> {
    fn go(nb: &[Vec<usize>], path: &mut Vec<usize>, to: usize, out: &mut Vec<Vec<usize>>) {
        let u = *path.last().unwrap();
        if u == to {
            out.push(path.clone());
            return;
        }
        for &v in &nb[u] {
            if !path.contains(&v) {
                path.push(v);
                go(nb, path, to, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(nb, &mut vec![from], to, &mut out);
    out
}

/// d-separation by enumerating every simple path and applying the blocking
/// rules node by node.
pub fn d_separated(d: usize, edges: &BTreeSet<(usize, usize)>, x: usize, y: usize, z: &[usize]) -> bool {
    let nb = adj(d, edges);
    'paths: for p in simple_paths(&nb, x, y) {
        for k in 1..p.len() - 1 {
            let (a, m, b) = (p[k - 1], p[k], p[k + 1]);
            let collider = edges.contains(&(a, m)) && edges.contains(&(b, m));
            let blocked = if collider {
                let dm = desc(d, edges, m);
                !z.iter().any(|&w| dm[w])
            } else {
                z.contains(&m)
            };
            if blocked {
                continue 'paths;
            }
        }
        return false;
    }
    true
}

fn directed_paths(d: usize, edges: &BTreeSet<(usize, usize)>, from: usize, to: usize) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); d];
    for &(a, b) in edges {
        nb[a].push(b);
    }
    simple_paths(&nb, from, to)
}

/// Structural intervention distance by the adjustment criterion, checked
/// with explicit path enumeration.
pub fn sid_oracle(est: &BinaryDag, truth: &BinaryDag) -> usize {
    (0..truth.d()).map(|i| sid_oracle_node(truth, i, &est.parents(i))).sum()
}

/// Number of targets `j` whose interventional distribution under `do(i)` is
/// not identified by adjusting for `z` (the estimated parents of `i`).
pub fn sid_oracle_node(truth: &BinaryDag, i: usize, z: &[usize]) -> usize {
    let d = truth.d();
    let g: BTreeSet<(usize, usize)> = truth.edges().collect();
    let de_i = desc(d, &g, i);
    let mut wrong = 0;
    for j in (0..d).filter(|&j| j != i) {
        let ok = if z.contains(&j) {
            !de_i[j]
        } else {
            let paths = directed_paths(d, &g, i, j);
            let mut forbidden = vec![false; d];
            for p in &paths {
                for &w in &p[1..] {
                    for (v, f) in desc(d, &g, w).into_iter().enumerate() {
                        forbidden[v] |= f;
                    }
                }
            }
            let mut cut = g.clone();
            for p in &paths {
                cut.remove(&(p[0], p[1]));
            }
            !z.iter().any(|&v| forbidden[v]) && d_separated(d, &cut, i, j, z)
        };
        wrong += usize::from(!ok);
    }
    wrong
}

/// Skeleton and v-structures.
pub type MecKey = (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize, usize)>);

/// Equal keys mean Markov equivalence.
pub fn mec_key(g: &BinaryDag) -> MecKey {
    let d = g.d();
    let skel = g.edges().map(|(a, b)| (a.min(b), a.max(b))).collect();
    let mut vs = BTreeSet::new();
    for k in 0..d {
        let pa = g.parents(k);
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !g.adjacent(a, b) {
                    vs.insert((a.min(b), a.max(b), k));
                }
            }
        }
    }
    (skel, vs)
}

/// Central-difference gradient of `f` at `w`.
pub fn fd_gradient(w: &DMatrix<f64>, step: f64, f: impl Fn(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(w.nrows(), w.ncols());
    let mut p = w.clone();
    for k in 0..w.len() {
        let orig = p[k];
        p[k] = orig + step;
        let up = f(&p);
        p[k] = orig - step;
        let down = f(&p);
        p[k] = orig;
        g[k] = (up - down) / (2.0 * step);
    }
    g
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
