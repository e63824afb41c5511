//! Covariance matrices of fermionic Gaussian states and the matrix functions
//! the solvers are built from.

use std::ops::Deref;

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pfaffian::pfaffian;

/// Absolute antisymmetry tolerance accepted on construction.
pub const ANTISYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues of `iG` are clipped to `[-1 + LOG_CLIP, 1 - LOG_CLIP]` before logarithms.
pub const LOG_CLIP: f64 = 1e-12;

fn check_skew(m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let err = linalg::antisymmetry_error(m);
    if !(err <= ANTISYMMETRY_TOL) {
        return Err(Error::NotAntisymmetric(err));
    }
    Ok(())
}

/// Real antisymmetric matrix (hopping matrices, mean fields, flow generators).
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix(Matrix);

impl SkewMatrix {
    pub fn new(mut m: Matrix) -> Result<Self> {
        check_skew(&m)?;
        linalg::antisymmetrize(&mut m);
        Ok(Self(m))
    }

    /// Projects onto the antisymmetric part without validation.
    pub fn from_antisymmetrized(mut m: Matrix) -> Self {
        linalg::antisymmetrize(&mut m);
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(linalg::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn spectral_norm(&self) -> Result<f64> {
        linalg::skew_spectral_norm(&self.0)
    }
}

impl Deref for SkewMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Majorana covariance matrix of `M` complex modes (dimension `2M`).
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    gamma: Matrix,
}

impl CovarianceMatrix {
    /// Validates shape and antisymmetry; physicality is checked separately.
    pub fn new(mut gamma: Matrix) -> Result<Self> {
        check_skew(&gamma)?;
        if gamma.nrows() % 2 == 1 || gamma.nrows() == 0 {
            return Err(Error::OddDimension(gamma.nrows()));
        }
        linalg::antisymmetrize(&mut gamma);
        Ok(Self { gamma })
    }

    /// Antisymmetrizes in place; for outputs of internal kernels whose
    /// asymmetry is at roundoff level.
    pub fn from_antisymmetrized(mut gamma: Matrix) -> Self {
        linalg::antisymmetrize(&mut gamma);
        Self { gamma }
    }

    /// The maximally mixed state.
    pub fn zeros(modes: usize) -> Self {
        Self { gamma: linalg::zeros(2 * modes) }
    }

    pub fn modes(&self) -> usize {
        self.gamma.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.gamma
    }

    pub fn into_matrix(self) -> Matrix {
        self.gamma
    }

    pub fn spectral_norm(&self) -> Result<f64> {
        linalg::skew_spectral_norm(&self.gamma)
    }

    /// `|G^2 + 1|_F`.
    pub fn purity_defect(&self) -> f64 {
        let mut sq = linalg::matmul(self.gamma.as_ref(), self.gamma.as_ref());
        for i in 0..sq.nrows() {
            sq[(i, i)] += 1.0;
        }
        sq.norm_l2()
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.spectral_norm().map(|s| s <= 1.0 + tol).unwrap_or(false)
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.purity_defect() <= tol * self.dim() as f64
    }

    /// Convex combination `lambda * a + (1 - lambda) * b`.
    pub fn mix(a: &Self, b: &Self, lambda: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        let m = Mat::from_fn(a.dim(), a.dim(), |i, j| {
            lambda * a.gamma[(i, j)] + (1.0 - lambda) * b.gamma[(i, j)]
        });
        Ok(Self::from_antisymmetrized(m))
    }

    /// `<c_k c_l>` with zero-based Majorana indices.
    pub fn two_point(&self, k: usize, l: usize) -> c64 {
        if k == l {
            c64::new(1.0, 0.0)
        } else {
            c64::new(0.0, -self.gamma[(k, l)])
        }
    }
}

impl Deref for CovarianceMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.gamma
    }
}

/// Fock vacuum: `G_{k,k+M} = 1`.
pub fn vacuum_cm(modes: usize) -> CovarianceMatrix {
    let mut g = linalg::zeros(2 * modes);
    for k in 0..modes {
        g[(k, k + modes)] = 1.0;
        g[(k + modes, k)] = -1.0;
    }
    CovarianceMatrix { gamma: g }
}

pub fn is_physical(gamma: &CovarianceMatrix, tol: f64) -> bool {
    gamma.is_physical(tol)
}

pub fn is_pure(gamma: &CovarianceMatrix, tol: f64) -> bool {
    gamma.is_pure(tol)
}

/// Orthogonal matrix from the QR factors of a Gaussian matrix, with the
/// signs of `diag(R)` folded into `Q` so the distribution is Haar.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let z: Matrix = Mat::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = z.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// `O J O^T` with `J` the vacuum and `O` a seeded random orthogonal matrix.
pub fn random_pure_cm(modes: usize, seed: u64) -> CovarianceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = random_orthogonal(2 * modes, &mut rng);
    let j = vacuum_cm(modes);
    CovarianceMatrix::from_antisymmetrized(linalg::conjugate(&o, &j))
}

/// Random mixed state: canonical blocks with eigenvalues drawn from `[0, 1)`.
pub fn random_mixed_cm(modes: usize, seed: u64) -> CovarianceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = random_orthogonal(2 * modes, &mut rng);
    let dist = Uniform::new(0.0, 1.0).expect("valid range");
    let mut d = linalg::zeros(2 * modes);
    for k in 0..modes {
        let lam: f64 = dist.sample(&mut rng);
        d[(2 * k, 2 * k + 1)] = lam;
        d[(2 * k + 1, 2 * k)] = -lam;
    }
    CovarianceMatrix::from_antisymmetrized(linalg::conjugate(&o, &d))
}

/// Number-conserving Slater determinant with `particles` fermions in random
/// real orbitals: `G = [[0, 1 - 2 rho], [-(1 - 2 rho), 0]]`.
pub fn random_slater_cm(modes: usize, particles: usize, seed: u64) -> Result<CovarianceMatrix> {
    if particles > modes {
        return Err(Error::InvalidOption(format!(
            "{particles} particles do not fit into {modes} modes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(modes, &mut rng);
    let mut g = linalg::zeros(2 * modes);
    for k in 0..modes {
        for l in 0..modes {
            let rho: f64 = (0..particles).map(|p| q[(k, p)] * q[(l, p)]).sum();
            let d = if k == l { 1.0 - 2.0 * rho } else { -2.0 * rho };
            g[(k, l + modes)] = d;
            g[(l + modes, k)] = -d;
        }
    }
    Ok(CovarianceMatrix::from_antisymmetrized(g))
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(p) + term(1.0 - p)
}

/// Von Neumann entropy in nats from the spectrum `+-lambda_j` of `iG`.
pub fn entropy(gamma: &CovarianceMatrix) -> Result<f64> {
    let lams = linalg::skew_spectrum(gamma)?;
    if let Some(&top) = lams.first() {
        if top > 1.0 + 1e-8 {
            return Err(Error::NotPhysical(top));
        }
    }
    Ok(lams.iter().map(|&l| binary_entropy(0.5 * (1.0 + l.min(1.0)))).sum())
}

/// Gibbs covariance matrix `i tanh(2i beta h)` of the quadratic generator `h`.
pub fn tanh_gibbs(h: &SkewMatrix, beta: f64) -> Result<CovarianceMatrix> {
    if !(beta > 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    let g = linalg::skew_odd_function(h, |s| {
        let x = s.sqrt();
        if x * beta < 1e-8 {
            2.0 * beta
        } else {
            (2.0 * beta * x).tanh() / x
        }
    })?;
    Ok(CovarianceMatrix::from_antisymmetrized(g))
}

/// `(i/4) ln[(1 + iG)(1 - iG)^-1]`, the entropic part of the free-energy gradient
/// (divide by beta to compare with the mean field).
pub fn cm_log_term(gamma: &CovarianceMatrix) -> Result<SkewMatrix> {
    let g = linalg::skew_odd_function(gamma, |s| {
        let x = s.sqrt().min(1.0 - LOG_CLIP);
        if x < 1e-8 {
            0.5
        } else {
            0.5 * x.atanh() / x
        }
    })?;
    Ok(SkewMatrix::from_antisymmetrized(g))
}

/// Zero-temperature limit of [`tanh_gibbs`]: `i sign(2i h)`. Modes at zero
/// energy (relative threshold `1e-10`) are left maximally mixed.
pub fn ground_cm(h: &SkewMatrix) -> Result<CovarianceMatrix> {
    let scale = h.spectral_norm()?.max(1.0);
    Ok(CovarianceMatrix::from_antisymmetrized(linalg::skew_sign(h, 1e-10 * scale)?))
}

/// `<c_{a_1} ... c_{a_n}>` for an arbitrary word of zero-based Majorana indices.
///
/// The word is brought to increasing order using anticommutation, squares are
/// removed with `c^2 = 1`, and the remaining `2p` distinct operators are
/// contracted as `i^{-p} Pf(G restricted)`.
pub fn majorana_expectation(gamma: &CovarianceMatrix, word: &[usize]) -> Result<c64> {
    let dim = gamma.dim();
    if let Some(&bad) = word.iter().find(|&&a| a >= dim) {
        return Err(Error::IndexOutOfRange { index: bad, modes: gamma.modes() });
    }
    let mut w = word.to_vec();
    let mut sign = 1.0;
    for i in 0..w.len() {
        for j in 0..w.len().saturating_sub(i + 1) {
            if w[j] > w[j + 1] {
                w.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    let mut reduced: Vec<usize> = Vec::with_capacity(w.len());
    for a in w {
        if reduced.last() == Some(&a) {
            reduced.pop();
        } else {
            reduced.push(a);
        }
    }
    if reduced.len() % 2 == 1 {
        return Ok(c64::new(0.0, 0.0));
    }
    let pf = pfaffian_of_subset(gamma, &reduced)?;
    Ok(phase_i_pow_neg(reduced.len() / 2) * (sign * pf))
}

fn phase_i_pow_neg(p: usize) -> c64 {
    match p % 4 {
        0 => c64::new(1.0, 0.0),
        1 => c64::new(0.0, -1.0),
        2 => c64::new(-1.0, 0.0),
        _ => c64::new(0.0, 1.0),
    }
}

fn pfaffian_of_subset(gamma: &CovarianceMatrix, idx: &[usize]) -> Result<f64> {
    let sub = Mat::from_fn(idx.len(), idx.len(), |a, b| gamma[(idx[a], idx[b])]);
    pfaffian(&sub)
}

/// Four-point function `<c_i c_j c_k c_l>` (zero-based). Coincident indices are
/// reduced with the anticommutation relations, which can leave an imaginary
/// two-point factor, so the value is complex in general.
pub fn wick_four(gamma: &CovarianceMatrix, i: usize, j: usize, k: usize, l: usize) -> Result<c64> {
    majorana_expectation(gamma, &[i, j, k, l])
}

/// `i^{-p} Pf(G|_{idx})` for strictly increasing indices, equal to
/// `<c_{j_1} ... c_{j_2p}>`.
pub fn wick_2p(gamma: &CovarianceMatrix, indices: &[usize]) -> Result<c64> {
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::IndicesNotIncreasing);
    }
    if indices.len() % 2 == 1 {
        return Err(Error::OddDimension(indices.len()));
    }
    if let Some(&bad) = indices.iter().find(|&&a| a >= gamma.dim()) {
        return Err(Error::IndexOutOfRange { index: bad, modes: gamma.modes() });
    }
    let pf = pfaffian_of_subset(gamma, indices)?;
    Ok(phase_i_pow_neg(indices.len() / 2) * pf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_layout() {
        let g = vacuum_cm(1);
        assert_eq!(g[(0, 1)], 1.0);
        assert_eq!(g[(1, 0)], -1.0);
        let g = vacuum_cm(2);
        assert_eq!(g[(0, 2)], 1.0);
        assert_eq!(g[(1, 3)], 1.0);
        assert_eq!(g[(0, 1)], 0.0);
        assert!(vacuum_cm(4).is_pure(1e-12));
    }

    #[test]
    fn physicality_examples() {
        assert!(vacuum_cm(2).is_physical(1e-10));
        assert!(CovarianceMatrix::zeros(3).is_physical(1e-10));
        assert!(!CovarianceMatrix::zeros(3).is_pure(1e-8));
        let big = CovarianceMatrix::new(vacuum_cm(1).matrix() * faer::Scale(1.5)).unwrap();
        assert!(!big.is_physical(1e-10));
    }

    #[test]
    fn construction_rejects_symmetric_input() {
        let m = Mat::from_fn(2, 2, |_, _| 1.0);
        assert!(matches!(CovarianceMatrix::new(m), Err(Error::NotAntisymmetric(_))));
    }

    #[test]
    fn random_states_are_reproducible() {
        let a = random_pure_cm(6, 1);
        assert_eq!(a, random_pure_cm(6, 1));
        assert!(a.is_pure(1e-10));
        assert!(linalg::max_abs_diff(&a, &random_pure_cm(6, 2)) > 0.1);
        let s = random_slater_cm(5, 2, 3).unwrap();
        assert!(s.is_pure(1e-10));
    }

    #[test]
    fn single_mode_gibbs_closed_form() {
        let eps = 0.7;
        let beta = 1.3;
        let h = SkewMatrix::new(vacuum_cm(1).matrix() * faer::Scale(eps)).unwrap();
        let g = tanh_gibbs(&h, beta).unwrap();
        assert!((g[(0, 1)] + (2.0 * beta * eps).tanh()).abs() < 1e-14);
        let back = cm_log_term(&g).unwrap();
        assert!((back[(0, 1)] / beta - eps).abs() < 1e-12);
    }

    #[test]
    fn entropy_limits() {
        assert!(entropy(&random_pure_cm(4, 9)).unwrap().abs() < 1e-8);
        let s = entropy(&CovarianceMatrix::zeros(5)).unwrap();
        assert!((s - 5.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn two_point_word() {
        let g = random_mixed_cm(2, 4);
        let v = majorana_expectation(&g, &[0, 3]).unwrap();
        assert!((v - g.two_point(0, 3)).norm() < 1e-15);
        let v = majorana_expectation(&g, &[3, 0]).unwrap();
        assert!((v + g.two_point(0, 3)).norm() < 1e-15);
    }

    #[test]
    fn coincident_indices_reduce() {
        let g = random_pure_cm(3, 5);
        let v = wick_four(&g, 2, 2, 1, 4).unwrap();
        assert!((v - g.two_point(1, 4)).norm() < 1e-14);
        let v = wick_four(&g, 1, 2, 1, 4).unwrap();
        assert!((v + g.two_point(2, 4)).norm() < 1e-14);
    }

    #[test]
    fn wick_four_closed_form() {
        let g = random_pure_cm(3, 11);
        let (i, j, k, l) = (0, 2, 3, 5);
        let expected = -(g[(i, j)] * g[(k, l)] - g[(i, k)] * g[(j, l)] + g[(i, l)] * g[(j, k)]);
        let v = wick_four(&g, i, j, k, l).unwrap();
        assert!((v.re - expected).abs() < 1e-14 && v.im.abs() < 1e-15);
        let swapped = wick_four(&g, j, i, k, l).unwrap();
        assert!((swapped.re + expected).abs() < 1e-14);
    }

    #[test]
    fn wick_2p_rejects_unsorted() {
        let g = vacuum_cm(2);
        assert!(matches!(wick_2p(&g, &[1, 0]), Err(Error::IndicesNotIncreasing)));
        assert!(matches!(wick_2p(&g, &[0, 0]), Err(Error::IndicesNotIncreasing)));
    }
}
