//! Dense kernels shared by the solvers.
//!
//! Matrix functions of a real antisymmetric `A` are evaluated through the
//! Hermitian matrix `X = iA`. For an odd scalar function `f(x) = x g(x^2)`
//! we have `i f(iA) = -A g(A^T A)`, and `A^T A = X^2` is real symmetric
//! positive semidefinite, so a single real symmetric eigendecomposition
//! gives the full spectral calculus without complex arithmetic. The sign
//! function is discontinuous at zero and is the one exception.

use faer::linalg::solvers::Solve;
use faer::{c64, Accum, Mat, Side};

use crate::error::{Error, Result};

pub type Matrix = Mat<f64>;

pub fn zeros(n: usize) -> Matrix {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> Matrix {
    Mat::identity(n, n)
}

/// `dst = alpha * lhs * rhs + beta_keep * dst` (beta_keep selects accumulate vs replace).
pub fn gemm(dst: &mut Matrix, accumulate: bool, lhs: faer::MatRef<'_, f64>, rhs: faer::MatRef<'_, f64>, alpha: f64) {
    let accum = if accumulate { Accum::Add } else { Accum::Replace };
    faer::linalg::matmul::matmul(dst.as_mut(), accum, lhs, rhs, alpha, faer::get_global_parallelism());
}

pub fn matmul(lhs: faer::MatRef<'_, f64>, rhs: faer::MatRef<'_, f64>) -> Matrix {
    let mut out = Mat::zeros(lhs.nrows(), rhs.ncols());
    gemm(&mut out, false, lhs, rhs, 1.0);
    out
}

/// Largest violation `max |a_ij + a_ji|`.
pub fn antisymmetry_error(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((a[(i, j)] + a[(j, i)]).abs());
        }
    }
    worst
}

/// Replace `a` by `(a - a^T) / 2`.
pub fn antisymmetrize(a: &mut Matrix) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)] = 0.0;
        for i in 0..j {
            let v = 0.5 * (a[(i, j)] - a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
}

pub fn symmetrize(a: &mut Matrix) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = matmul(a.as_ref(), b.as_ref());
    gemm(&mut out, true, b.as_ref(), a.as_ref(), -1.0);
    out
}

/// `tr[a b]` without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm_l2()
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    worst
}

/// Eigenvalues (ascending) of the symmetric PSD matrix `A^T A` for antisymmetric `A`.
pub fn squared_spectrum(a: &Matrix) -> Result<Vec<f64>> {
    let mut s = matmul(a.transpose(), a.as_ref());
    symmetrize(&mut s);
    s.self_adjoint_eigenvalues(Side::Lower)
        .map(|v| v.into_iter().map(|x| x.max(0.0)).collect())
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// The `n/2` non-negative values `lambda_j` such that `iA` has spectrum `{+-lambda_j}`,
/// sorted in descending order.
pub fn skew_spectrum(a: &Matrix) -> Result<Vec<f64>> {
    let s = squared_spectrum(a)?;
    let n = s.len();
    let mut out: Vec<f64> = (0..n / 2)
        .map(|j| {
            let hi = s[n - 1 - 2 * j];
            let lo = s[n - 2 - 2 * j];
            (0.5 * (hi + lo)).sqrt()
        })
        .collect();
    out.sort_by(|x, y| y.total_cmp(x));
    Ok(out)
}

/// Largest singular value of an antisymmetric matrix.
pub fn skew_spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(squared_spectrum(a)?.last().copied().unwrap_or(0.0).sqrt())
}

/// `i sign(iA)` from the Hermitian eigenproblem of `iA`, with eigenvalues
/// below `cutoff` in magnitude mapped to zero. Working with `iA` directly keeps
/// the absolute accuracy of small eigenvalues at `eps |A|`; going through `A^T A`
/// would only resolve them to `sqrt(eps) |A|`.
pub fn skew_sign(a: &Matrix, cutoff: f64) -> Result<Matrix> {
    let n = a.nrows();
    let h = Mat::<c64>::from_fn(n, n, |i, j| c64::new(0.0, a[(i, j)]));
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let u = evd.U();
    let vals = evd.S().column_vector();
    let mut out = zeros(n);
    for k in 0..n {
        let lam = vals[k].re;
        let sign = if lam.abs() <= cutoff { 0.0 } else { lam.signum() };
        if sign == 0.0 {
            continue;
        }
        for j in 0..n {
            let uj = u[(j, k)].conj();
            for i in 0..n {
                // Re(i * sign * u_i conj(u_j))
                out[(i, j)] -= sign * (u[(i, k)] * uj).im;
            }
        }
    }
    antisymmetrize(&mut out);
    Ok(out)
}

/// `i f(iA)` for an odd function `f(x) = x g(x^2)`, given `g` as a function of `x^2`.
pub fn skew_odd_function(a: &Matrix, g: impl Fn(f64) -> f64) -> Result<Matrix> {
    let n = a.nrows();
    let mut s = matmul(a.transpose(), a.as_ref());
    symmetrize(&mut s);
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let u = evd.U();
    let vals = evd.S().column_vector();
    let mut scaled = u.to_owned();
    for k in 0..n {
        let w = g(vals[k].max(0.0));
        for i in 0..n {
            scaled[(i, k)] *= w;
        }
    }
    let gmat = matmul(scaled.as_ref(), u.transpose());
    let mut out = matmul(a.as_ref(), gmat.as_ref());
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = -out[(i, j)];
        }
    }
    antisymmetrize(&mut out);
    Ok(out)
}

fn one_norm(a: &Matrix) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
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
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn add_scaled(dst: &mut Matrix, src: &Matrix, alpha: f64) {
    for j in 0..dst.ncols() {
        for i in 0..dst.nrows() {
            dst[(i, j)] += alpha * src[(i, j)];
        }
    }
}

/// Sum of `coeffs[k] * powers[k]` with `coeffs[0]` multiplying the identity.
fn poly(n: usize, coeffs: &[f64], powers: &[&Matrix]) -> Matrix {
    let mut out = zeros(n);
    for i in 0..n {
        out[(i, i)] = coeffs[0];
    }
    for (c, p) in coeffs[1..].iter().zip(powers) {
        add_scaled(&mut out, p, *c);
    }
    out
}

/// Padé numerator/denominator halves: returns (U, V) with exp(A) ~ (V - U)^-1 (V + U).
fn pade_uv(a: &Matrix, m: usize) -> (Matrix, Matrix) {
    let n = a.nrows();
    let a2 = matmul(a.as_ref(), a.as_ref());
    match m {
        3 | 5 | 7 | 9 => {
            let b: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let mut powers = vec![a2];
            while powers.len() < m / 2 {
                let next = matmul(powers.last().unwrap().as_ref(), powers[0].as_ref());
                powers.push(next);
            }
            let refs: Vec<&Matrix> = powers.iter().collect();
            let odd: Vec<f64> = b.iter().skip(1).step_by(2).copied().collect();
            let even: Vec<f64> = b.iter().step_by(2).copied().collect();
            let inner = poly(n, &odd, &refs);
            let u = matmul(a.as_ref(), inner.as_ref());
            let v = poly(n, &even, &refs);
            (u, v)
        }
        _ => {
            let b = &PADE13;
            let a4 = matmul(a2.as_ref(), a2.as_ref());
            let a6 = matmul(a4.as_ref(), a2.as_ref());
            let mut w1 = zeros(n);
            add_scaled(&mut w1, &a6, b[13]);
            add_scaled(&mut w1, &a4, b[11]);
            add_scaled(&mut w1, &a2, b[9]);
            let mut inner = matmul(a6.as_ref(), w1.as_ref());
            add_scaled(&mut inner, &a6, b[7]);
            add_scaled(&mut inner, &a4, b[5]);
            add_scaled(&mut inner, &a2, b[3]);
            for i in 0..n {
                inner[(i, i)] += b[1];
            }
            let u = matmul(a.as_ref(), inner.as_ref());
            let mut z1 = zeros(n);
            add_scaled(&mut z1, &a6, b[12]);
            add_scaled(&mut z1, &a4, b[10]);
            add_scaled(&mut z1, &a2, b[8]);
            let mut v = matmul(a6.as_ref(), z1.as_ref());
            add_scaled(&mut v, &a6, b[6]);
            add_scaled(&mut v, &a4, b[4]);
            add_scaled(&mut v, &a2, b[2]);
            for i in 0..n {
                v[(i, i)] += b[0];
            }
            (u, v)
        }
    }
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
///
/// For antisymmetric input the diagonal approximant is a Cayley-type map, so
/// the result is orthogonal up to roundoff regardless of truncation order.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let norm = one_norm(a);
    if norm == 0.0 {
        return Ok(identity(n));
    }
    let (m, s) = match THETA.iter().find(|(_, theta)| norm <= *theta) {
        Some(&(m, _)) => (m, 0),
        None => {
            let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
            (13, s)
        }
    };
    let scaled;
    let arg = if s > 0 {
        scaled = a * faer::Scale(0.5f64.powi(s));
        &scaled
    } else {
        a
    };
    let (u, v) = pade_uv(arg, m);
    let p = &v + &u;
    let q = &v - &u;
    let lu = q.partial_piv_lu();
    let mut r = lu.solve(&p);
    if !r.as_ref().is_all_finite() {
        return Err(Error::Linalg("non-finite Padé solve".into()));
    }
    for _ in 0..s {
        r = matmul(r.as_ref(), r.as_ref());
    }
    Ok(r)
}

/// Project a near-pure covariance matrix back onto `G^2 = -1` with Newton
/// steps for the polar factor; antisymmetry is preserved exactly.
pub fn polar_project(gamma: &Matrix, steps: usize) -> Result<Matrix> {
    let n = gamma.nrows();
    let mut x = gamma.clone();
    for _ in 0..steps {
        let inv = x.partial_piv_lu().solve(identity(n));
        if !inv.as_ref().is_all_finite() {
            return Err(Error::Linalg("singular matrix in polar projection".into()));
        }
        // For antisymmetric X, X^{-T} = -X^{-1}.
        x = (&x - &inv) * faer::Scale(0.5);
        antisymmetrize(&mut x);
    }
    Ok(x)
}

/// `O X O^T`.
pub fn conjugate(o: &Matrix, x: &Matrix) -> Matrix {
    let ox = matmul(o.as_ref(), x.as_ref());
    let mut out = matmul(ox.as_ref(), o.transpose());
    antisymmetrize(&mut out);
    out
}
