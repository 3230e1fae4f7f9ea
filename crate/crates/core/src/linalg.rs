//! Small dense complex linear algebra: determinants and null vectors.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;

/// Determinant by LU with partial pivoting.
pub fn det(m: &CMatrix) -> C64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    if m.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative pivot size below which a second vanishing pivot means the
/// null space is at least two-dimensional.
const RANK_TOL: f64 = 1e-9;

/// A null vector of a matrix assumed to have corank one, via Gaussian
/// elimination with complete pivoting. The smallest pivot is dropped and the
/// corresponding unknown set to one; the result is not normalized.
pub fn null_vector(m: &CMatrix) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Domain("null vector of a non-square matrix".into()));
    }
    if n == 1 {
        return Ok(vec![C64::new(1.0, 0.0)]);
    }
    let mut a = m.clone();
    let mut cols: Vec<usize> = (0..n).collect();
    let scale = a
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for k in 0..n - 1 {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for i in k..n {
            for j in k..n {
                let v = a[(i, j)].norm();
                if v > best {
                    best = v;
                    pr = i;
                    pc = j;
                }
            }
        }
        if best <= RANK_TOL * scale {
            return Err(Error::DegenerateNullSpace {
                pivot_ratio: best / scale,
            });
        }
        a.swap_rows(k, pr);
        a.swap_columns(k, pc);
        cols.swap(k, pc);
        let piv = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let t = a[(k, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    // back substitution on the leading (n-1)x(n-1) triangle, last unknown = 1
    let mut y = vec![C64::new(0.0, 0.0); n];
    y[n - 1] = C64::new(1.0, 0.0);
    for k in (0..n - 1).rev() {
        let mut s = C64::new(0.0, 0.0);
        for j in k + 1..n {
            s += a[(k, j)] * y[j];
        }
        y[k] = -s / a[(k, k)];
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (k, &c) in cols.iter().enumerate() {
        out[c] = y[k];
    }
    Ok(out)
}
