//! Smooth acyclicity functions and their gradients.
//!
//! Each function is zero exactly on DAG supports within its domain. The
//! Hadamard-based ones (`h_expm`, `h_poly`, `h_ldet`) act on `W ∘ W` and have
//! vanishing gradients at every DAG; `h_ldet_nonneg` acts on `W >= 0`
//! directly and does not.
//!
//! The wider family `Σ_k c_k tr((W∘W)^k)` with positive weights contains
//! `h_poly` as the binomial instance; only the named members are provided.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graphs::is_dag_matrix;
use crate::linalg::{expm, hadamard_square, matrix_power, PositiveLu};

#[derive(Debug, Clone, PartialEq)]
pub struct AcyclicityEval {
    pub value: f64,
    pub gradient: DMatrix<f64>,
}

/// `tr(exp(W∘W)) - d`, gradient `2 W ∘ exp(W∘W)ᵀ`.
pub fn h_expm(w: &DMatrix<f64>) -> AcyclicityEval {
    let d = w.nrows() as f64;
    let e = expm(&hadamard_square(w));
    AcyclicityEval {
        value: e.trace() - d,
        gradient: w.component_mul(&e.transpose()) * 2.0,
    }
}

/// `tr((I + W∘W/d)^d) - d`, gradient `2 W ∘ [(I + W∘W/d)^(d-1)]ᵀ`.
pub fn h_poly(w: &DMatrix<f64>) -> AcyclicityEval {
    let d = w.nrows();
    let m = DMatrix::<f64>::identity(d, d) + hadamard_square(w) / d as f64;
    let pow = matrix_power(&m, d.saturating_sub(1));
    let value = (&pow * &m).trace() - d as f64;
    AcyclicityEval {
        value,
        gradient: w.component_mul(&pow.transpose()) * 2.0,
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Parameter(format!("log-det parameter s must be positive, got {s}")));
    }
    Ok(())
}

/// `d log s - log det(sI - W∘W)` on `{ρ(W∘W) < s}`, gradient
/// `2 W ∘ (sI - W∘W)^{-ᵀ}`.
pub fn h_ldet(w: &DMatrix<f64>, s: f64) -> Result<AcyclicityEval> {
    check_s(s)?;
    let d = w.nrows();
    let m = DMatrix::<f64>::identity(d, d) * s - hadamard_square(w);
    let lu = PositiveLu::factor(&m)
        .ok_or_else(|| Error::Domain(format!("sI - W∘W is not a nonsingular M-matrix at s={s}")))?;
    let value = d as f64 * s.ln() - lu.log_det();
    let inv = lu.inverse();
    Ok(AcyclicityEval {
        value,
        gradient: w.component_mul(&inv.transpose()) * 2.0,
    })
}

/// `d log s - log det(sI - W)` for entrywise nonnegative `W` with `ρ(W) < s`,
/// gradient `(sI - W)^{-ᵀ}`.
pub fn h_ldet_nonneg(w: &DMatrix<f64>, s: f64) -> Result<AcyclicityEval> {
    check_s(s)?;
    if let Some(x) = w.iter().find(|x| **x < 0.0) {
        return Err(Error::Domain(format!("negative entry {x} in nonnegative acyclicity domain")));
    }
    let d = w.nrows();
    let m = DMatrix::<f64>::identity(d, d) * s - w;
    let lu = PositiveLu::factor(&m)
        .ok_or_else(|| Error::Domain(format!("spectral radius of W reaches s={s}")))?;
    Ok(AcyclicityEval {
        value: d as f64 * s.ln() - lu.log_det(),
        gradient: lu.inverse().transpose(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

const RHO_TOL: f64 = 1e-10;
const RHO_MAX_ITER: usize = 100_000;

/// Perron root of `|W|`: the largest Perron root over the strongly connected
/// components, each found by shifted power iteration with Collatz–Wielandt
/// bounds. For nonnegative `W` this is `ρ(W)`. The Hadamard domain check
/// passes `W∘W`, which is already nonnegative. Acyclic supports return
/// exactly zero.
pub fn spectral_radius(w: &DMatrix<f64>) -> SpectralRadius {
    let mut out = SpectralRadius {
        rho: 0.0,
        iterations: 0,
        converged: true,
    };
    if is_dag_matrix(w) {
        return out;
    }
    let a = w.abs();
    for comp in strong_components(&a) {
        let k = comp.len();
        let r = if k == 1 {
            let i = comp[0];
            SpectralRadius {
                rho: a[(i, i)],
                iterations: 0,
                converged: true,
            }
        } else {
            perron_root(&DMatrix::from_fn(k, k, |r, c| a[(comp[r], comp[c])]))
        };
        out.rho = out.rho.max(r.rho);
        out.iterations += r.iterations;
        out.converged &= r.converged;
    }
    out
}

// Irreducible input: A + I is primitive with the same Perron vector, so the
// Collatz–Wielandt bounds close even when A is periodic.
fn perron_root(a: &DMatrix<f64>) -> SpectralRadius {
    let d = a.nrows();
    let shifted = a + DMatrix::<f64>::identity(d, d);
    let mut x = DMatrix::<f64>::from_element(d, 1, 1.0);
    let mut best: (f64, f64) = (0.0, f64::INFINITY);
    for it in 1..=RHO_MAX_ITER {
        let y = &shifted * &x;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..d {
            let r = y[(i, 0)] / x[(i, 0)];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        best = (best.0.max(lo - 1.0), best.1.min(hi - 1.0));
        let norm = y.amax();
        x = y / norm;
        if best.1 - best.0 <= RHO_TOL * best.1.max(1.0) {
            return SpectralRadius {
                rho: 0.5 * (best.0 + best.1).max(0.0),
                iterations: it,
                converged: true,
            };
        }
    }
    SpectralRadius {
        rho: 0.5 * (best.0 + best.1).max(0.0),
        iterations: RHO_MAX_ITER,
        converged: false,
    }
}

// Tarjan's algorithm on the support of `a`, with an explicit stack.
fn strong_components(a: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let d = a.nrows();
    let succ: Vec<Vec<usize>> = (0..d).map(|i| (0..d).filter(|&j| a[(i, j)] != 0.0).collect()).collect();
    let mut index = vec![usize::MAX; d];
    let mut low = vec![0; d];
    let mut on_stack = vec![false; d];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..d {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&u) = succ[v].get(*pos) {
                *pos += 1;
                if index[u] == usize::MAX {
                    index[u] = next;
                    low[u] = next;
                    next += 1;
                    stack.push(u);
                    on_stack[u] = true;
                    call.push((u, 0));
                } else if on_stack[u] {
                    low[v] = low[v].min(index[u]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                while let Some(u) = stack.pop() {
                    on_stack[u] = false;
                    comp.push(u);
                    if u == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}
