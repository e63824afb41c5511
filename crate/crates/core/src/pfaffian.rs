//! Pfaffian of a real antisymmetric matrix by Parlett-Reid elimination.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Pf(A) for an even-dimensional antisymmetric `a`, normalised so that the
/// product `a_01 a_23 ... a_{n-2,n-1}` enters with a plus sign.
pub fn pfaffian(a: &Matrix) -> Result<f64> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
    }
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut w = a.clone();
    let mut pf = 1.0;
    for k in (0..n - 1).step_by(2) {
        let mut piv = k + 1;
        let mut best = w[(k + 1, k)].abs();
        for i in (k + 2)..n {
            if w[(i, k)].abs() > best {
                best = w[(i, k)].abs();
                piv = i;
            }
        }
        if piv != k + 1 {
            swap_rows_cols(&mut w, k + 1, piv);
            pf = -pf;
        }
        let pivot = w[(k, k + 1)];
        if pivot == 0.0 {
            return Ok(0.0);
        }
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<f64> = ((k + 2)..n).map(|j| w[(k, j)] / pivot).collect();
            let col: Vec<f64> = ((k + 2)..n).map(|i| w[(i, k + 1)]).collect();
            for (jj, j) in ((k + 2)..n).enumerate() {
                for (ii, i) in ((k + 2)..n).enumerate() {
                    w[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    Ok(pf)
}

fn swap_rows_cols(w: &mut Matrix, p: usize, q: usize) {
    let n = w.nrows();
    for j in 0..n {
        let t = w[(p, j)];
        w[(p, j)] = w[(q, j)];
        w[(q, j)] = t;
    }
    for i in 0..n {
        let t = w[(i, p)];
        w[(i, p)] = w[(i, q)];
        w[(i, q)] = t;
    }
}
