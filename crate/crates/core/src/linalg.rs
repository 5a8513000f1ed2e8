//! Dense matrix helpers shared by the acyclicity functions and solvers.

use nalgebra::DMatrix;

// Degree-13 Padé coefficients for exp, numerator and denominator share them
// up to sign.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [13/13] approximant meets double precision.
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a fixed [13/13] Padé
/// approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "expm needs a square matrix");
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    let nrm = norm1(a);
    let squarings = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(d, d);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Entrywise square `W ∘ W`.
pub fn hadamard_square(w: &DMatrix<f64>) -> DMatrix<f64> {
    w.map(|x| x * x)
}

/// `m^k` by binary powering; `k = 0` gives the identity.
pub fn matrix_power(m: &DMatrix<f64>, mut k: usize) -> DMatrix<f64> {
    let d = m.nrows();
    let mut result = DMatrix::<f64>::identity(d, d);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// LU factorization without row exchanges.
///
/// For a Z-matrix (nonpositive off-diagonal) all pivots are positive iff the
/// matrix is a nonsingular M-matrix. `sI - A` with `A >= 0` is a Z-matrix, so
/// successful factorization is an exact test for `rho(A) < s`.
#[derive(Debug, Clone)]
pub struct PositiveLu {
    lu: DMatrix<f64>,
}

impl PositiveLu {
    /// Returns `None` as soon as a pivot is nonpositive or non-finite.
    pub fn factor(m: &DMatrix<f64>) -> Option<Self> {
        let d = m.nrows();
        let mut lu = m.clone();
        for k in 0..d {
            let piv = lu[(k, k)];
            if !(piv > 0.0) || !piv.is_finite() {
                return None;
            }
            for i in (k + 1)..d {
                let l = lu[(i, k)] / piv;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in (k + 1)..d {
                        let ukj = lu[(k, j)];
                        lu[(i, j)] -= l * ukj;
                    }
                }
            }
        }
        Some(Self { lu })
    }

    pub fn log_det(&self) -> f64 {
        self.lu.diagonal().iter().map(|p| p.ln()).sum()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let d = self.lu.nrows();
        let mut inv = DMatrix::<f64>::identity(d, d);
        for c in 0..d {
            // forward substitution with unit lower factor
            for i in 0..d {
                let mut acc = inv[(i, c)];
                for k in 0..i {
                    acc -= self.lu[(i, k)] * inv[(k, c)];
                }
                inv[(i, c)] = acc;
            }
            for i in (0..d).rev() {
                let mut acc = inv[(i, c)];
                for k in (i + 1)..d {
                    acc -= self.lu[(i, k)] * inv[(k, c)];
                }
                inv[(i, c)] = acc / self.lu[(i, i)];
            }
        }
        inv
    }
}

/// Sets the diagonal to zero in place.
pub fn zero_diagonal(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] = 0.0;
    }
}
