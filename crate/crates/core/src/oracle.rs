//! Small-system ground truth in the full Fock space.
//!
//! Basis states are bit strings with mode `k` on bit `k` (mode 0 fastest).
//! Majorana operators act as signed permutations through the Jordan-Wigner
//! string: `c_k |s> = (-1)^{#occupied below k} |s ^ 2^k>` and
//! `c_{k+M} |s> = -+ i (-1)^{#occupied below k} |s ^ 2^k>` (upper sign for an empty mode).

use faer::{c64, Mat, Side};

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{mean_field, MajoranaHamiltonian, ModelSpec};
use crate::lattice::Boundary;

/// Largest mode count accepted for dense Fock operators.
pub const MAX_MODES: usize = 12;
/// Largest mode count for density-operator construction.
pub const MAX_DENSITY_MODES: usize = 10;
/// Largest mode count for the rate checks.
pub const MAX_RATE_MODES: usize = 8;

fn check_modes(modes: usize, limit: usize) -> Result<()> {
    if modes > limit {
        return Err(Error::TooManyModes { modes, limit });
    }
    Ok(())
}

/// Dense operator on the `2^M` dimensional Fock space.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub modes: usize,
    pub matrix: Mat<c64>,
}

impl FockOperator {
    pub fn zeros(modes: usize) -> Self {
        let d = 1usize << modes;
        Self { modes, matrix: Mat::zeros(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// `max |A - A^+|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn mul(&self, other: &FockOperator) -> FockOperator {
        FockOperator { modes: self.modes, matrix: &self.matrix * &other.matrix }
    }

    /// `tr[self * W]` for a Majorana word `W`, in `O(2^M)`.
    pub fn trace_with_word(&self, word: &[usize]) -> c64 {
        let mut acc = c64::new(0.0, 0.0);
        for s in 0..self.dim() {
            let (t, ph) = apply_word(word, self.modes, s);
            // W|s> = ph |t>, so <s|A W|s> = ph A[s, t]
            acc += self.matrix[(s, t)] * ph;
        }
        acc
    }

    /// `<psi| self |psi>`.
    pub fn expectation(&self, psi: &[c64]) -> c64 {
        let mut acc = c64::new(0.0, 0.0);
        for j in 0..self.dim() {
            if psi[j] == c64::new(0.0, 0.0) {
                continue;
            }
            let mut col = c64::new(0.0, 0.0);
            for i in 0..self.dim() {
                col += psi[i].conj() * self.matrix[(i, j)];
            }
            acc += col * psi[j];
        }
        acc
    }
}

/// Action of a single Majorana operator on a basis state.
pub fn apply_majorana(index: usize, modes: usize, state: usize) -> (usize, c64) {
    let k = index % modes;
    let sign = if (state & ((1usize << k) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    let occupied = state >> k & 1 == 1;
    let target = state ^ (1usize << k);
    let phase = if index < modes {
        c64::new(sign, 0.0)
    } else if occupied {
        c64::new(0.0, sign)
    } else {
        c64::new(0.0, -sign)
    };
    (target, phase)
}

/// `c_{w_0} c_{w_1} ... |s>` as `(target, phase)`; operators act right to left.
pub fn apply_word(word: &[usize], modes: usize, state: usize) -> (usize, c64) {
    let mut s = state;
    let mut ph = c64::new(1.0, 0.0);
    for &w in word.iter().rev() {
        let (t, p) = apply_majorana(w, modes, s);
        s = t;
        ph *= p;
    }
    (s, ph)
}

/// Dense matrix of a Majorana word.
pub fn majorana_word_operator(word: &[usize], modes: usize) -> Result<FockOperator> {
    check_modes(modes, MAX_MODES)?;
    let mut op = FockOperator::zeros(modes);
    for s in 0..op.dim() {
        let (t, ph) = apply_word(word, modes, s);
        op.matrix[(t, s)] += ph;
    }
    Ok(op)
}

fn add_word(op: &mut FockOperator, word: &[usize], coeff: c64) {
    for s in 0..op.dim() {
        let (t, ph) = apply_word(word, op.modes, s);
        op.matrix[(t, s)] += coeff * ph;
    }
}

/// `i sum T_kl c_k c_l + sum U_klmn c_k c_l c_m c_n + e0` as a dense operator.
pub fn fock_hamiltonian(h: &MajoranaHamiltonian) -> Result<FockOperator> {
    let m = h.modes();
    check_modes(m, MAX_MODES)?;
    let mut op = FockOperator::zeros(m);
    let n = 2 * m;
    for k in 0..n {
        for l in 0..n {
            let t = h.t[(k, l)];
            if t != 0.0 {
                add_word(&mut op, &[k, l], c64::new(0.0, t));
            }
        }
    }
    let perms = crate::model::permutations4();
    for q in &h.quartic {
        for (p, sign) in &perms {
            let w = [q.idx[p[0]], q.idx[p[1]], q.idx[p[2]], q.idx[p[3]]];
            add_word(&mut op, &w, c64::new(sign * q.value, 0.0));
        }
    }
    for s in 0..op.dim() {
        op.matrix[(s, s)] += h.e0;
    }
    Ok(op)
}

fn jw_sign(state: usize, k: usize) -> f64 {
    if (state & ((1usize << k) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `a+_i a_j |s>`, or `None` when it vanishes.
fn hop(state: usize, i: usize, j: usize) -> Option<(usize, f64)> {
    if state >> j & 1 == 0 {
        return None;
    }
    let sign_j = jw_sign(state, j);
    let mid = state ^ (1 << j);
    if mid >> i & 1 == 1 {
        return None;
    }
    Some((mid | (1 << i), sign_j * jw_sign(mid, i)))
}

/// Hubbard Hamiltonian assembled directly from occupation-number bit
/// operations, without passing through the Majorana representation.
pub fn direct_hubbard_fock(spec: &ModelSpec) -> Result<FockOperator> {
    let (nh, nv) = (spec.n_h, spec.n_v);
    if nh < 2 || nv < 2 {
        return Err(Error::LatticeTooSmall { n_h: nh, n_v: nv });
    }
    let sites = nh * nv;
    let m = 2 * sites;
    check_modes(m, MAX_MODES)?;
    let mut op = FockOperator::zeros(m);
    let periodic = spec.boundary == Boundary::Periodic;
    let mut links = Vec::new();
    for v in 0..nv {
        for h in 0..nh {
            let x = h + nh * v;
            if periodic || h + 1 < nh {
                links.push((x, (h + 1) % nh + nh * v));
            }
            if periodic || v + 1 < nv {
                links.push((x, h + nh * ((v + 1) % nv)));
            }
        }
    }
    for s in 0..op.dim() {
        let mut diag = 0.0;
        for v in 0..nv {
            for h in 0..nh {
                let x = h + nh * v;
                let nu = (s >> x & 1) as f64;
                let nd = (s >> (x + sites) & 1) as f64;
                let ch = (nh as f64 + 1.0) / 2.0 - (h + 1) as f64;
                let cv = (nv as f64 + 1.0) / 2.0 - (v + 1) as f64;
                let mu_x = spec.mu + spec.v_t * (ch * ch + cv * cv);
                diag += match spec.interaction_form {
                    crate::model::InteractionForm::Symmetric => spec.u * (nu - 0.5) * (nd - 0.5),
                    crate::model::InteractionForm::Plain => spec.u * nu * nd,
                };
                diag += mu_x * (nu + nd);
            }
        }
        op.matrix[(s, s)] += c64::new(diag, 0.0);
        for &(x, y) in &links {
            for shift in [0, sites] {
                let (i, j) = (x + shift, y + shift);
                for (a, b) in [(i, j), (j, i)] {
                    if let Some((t, sg)) = hop(s, a, b) {
                        op.matrix[(t, s)] += c64::new(spec.t * sg, 0.0);
                    }
                }
            }
        }
    }
    Ok(op)
}

/// Lowest eigenpair of a Hermitian Fock operator.
pub fn ed_ground(op: &FockOperator) -> Result<(f64, Vec<c64>)> {
    check_modes(op.modes, MAX_MODES)?;
    let d = op.dim();
    let imag = (0..d).flat_map(|j| (0..d).map(move |i| (i, j))).map(|(i, j)| op.matrix[(i, j)].im.abs()).fold(0.0, f64::max);
    if imag < 1e-14 {
        let real: Mat<f64> = Mat::from_fn(d, d, |i, j| op.matrix[(i, j)].re);
        let evd = real.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let e0 = evd.S().column_vector()[0];
        let psi = (0..d).map(|i| c64::new(evd.U()[(i, 0)], 0.0)).collect();
        Ok((e0, psi))
    } else {
        let evd = op.matrix.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let e0 = evd.S().column_vector()[0].re;
        let psi = (0..d).map(|i| evd.U()[(i, 0)]).collect();
        Ok((e0, psi))
    }
}

/// Orthogonal `O` and values `mu` with `O^T G O` block diagonal, blocks `[[0, mu_j], [-mu_j, 0]]`.
pub fn canonical_form(gamma: &CovarianceMatrix) -> Result<(linalg::Matrix, Vec<f64>)> {
    let n = gamma.dim();
    let mut s = linalg::matmul(gamma.transpose(), gamma.as_ref());
    linalg::symmetrize(&mut s);
    let evd = s.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let u = evd.U();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let project_out = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            for b in basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let mut mus = Vec::with_capacity(n / 2);
    // Largest singular values first.
    let eigvecs: Vec<Vec<f64>> = (0..n).rev().map(|c| (0..n).map(|i| u[(i, c)]).collect()).collect();
    for cand in eigvecs.iter().cloned() {
        if basis.len() == n {
            break;
        }
        let mut x = cand;
        let norm = project_out(&mut x, &basis);
        if norm < 0.5 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let mut y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| gamma[(i, j)] * x[j]).sum()).collect();
        let mut with_x = basis.clone();
        with_x.push(x.clone());
        let mut ynorm = project_out(&mut y, &with_x);
        if ynorm < 1e-8 {
            // Null direction: pair with any remaining orthogonal vector.
            let mut found = false;
            for other in &eigvecs {
                let mut z = other.clone();
                let zn = project_out(&mut z, &with_x);
                if zn > 0.5 {
                    y = z;
                    ynorm = zn;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Error::Linalg("canonical form: basis completion failed".into()));
            }
        }
        y.iter_mut().for_each(|v| *v /= ynorm);
        let mu: f64 = (0..n).map(|i| (0..n).map(|j| x[i] * gamma[(i, j)] * y[j]).sum::<f64>()).sum();
        basis.push(x);
        basis.push(y);
        mus.push(mu);
    }
    if basis.len() != n {
        return Err(Error::Linalg("canonical form: incomplete basis".into()));
    }
    let o = Mat::from_fn(n, n, |i, j| basis[j][i]);
    Ok((o, mus))
}

/// Density operator of the Gaussian state with covariance matrix `gamma`:
/// `rho = prod_j (1 + mu_j i d_{2j} d_{2j+1}) / 2` with `d_a = sum_k O_ka c_k`.
pub fn gaussian_density_operator(gamma: &CovarianceMatrix) -> Result<FockOperator> {
    let m = gamma.modes();
    check_modes(m, MAX_DENSITY_MODES)?;
    let norm = gamma.spectral_norm()?;
    if norm > 1.0 + 1e-8 {
        return Err(Error::NotPhysical(norm));
    }
    let (o, mus) = canonical_form(gamma)?;
    let n = 2 * m;
    let singles: Vec<FockOperator> = (0..n).map(|k| majorana_word_operator(&[k], m)).collect::<Result<_>>()?;
    let rotated = |a: usize| {
        let mut d = FockOperator::zeros(m);
        for k in 0..n {
            let w = o[(k, a)];
            if w != 0.0 {
                d.matrix += &singles[k].matrix * faer::Scale(c64::new(w, 0.0));
            }
        }
        d
    };
    let dim = 1usize << m;
    let mut rho = FockOperator { modes: m, matrix: Mat::identity(dim, dim) };
    for (j, &mu) in mus.iter().enumerate() {
        let d1 = rotated(2 * j);
        let d2 = rotated(2 * j + 1);
        let pair = d1.mul(&d2);
        let mut factor = pair.matrix * faer::Scale(c64::new(0.0, 0.5 * mu));
        for i in 0..dim {
            factor[(i, i)] += c64::new(0.5, 0.0);
        }
        rho.matrix = &rho.matrix * &factor;
    }
    Ok(rho)
}

/// `tr[rho (i/2)[c_k, c_l]]` for every pair.
pub fn covariance_of(rho: &FockOperator) -> linalg::Matrix {
    let n = 2 * rho.modes;
    Mat::from_fn(n, n, |k, l| if k == l { 0.0 } else { (c64::new(0.0, 1.0) * rho.trace_with_word(&[k, l])).re })
}

/// `max |tr([H, rho] c_a c_b) - 4[h, G]_ab|` with `rho` the Gaussian state of `gamma`.
pub fn rate_check_real(h: &MajoranaHamiltonian, gamma: &CovarianceMatrix) -> Result<f64> {
    check_modes(h.modes(), MAX_RATE_MODES)?;
    let hf = fock_hamiltonian(h)?;
    let rho = gaussian_density_operator(gamma)?;
    let k = FockOperator { modes: h.modes(), matrix: &hf.matrix * &rho.matrix - &rho.matrix * &hf.matrix };
    let hbar = mean_field(h, gamma)?;
    let analytic = linalg::commutator(&hbar, gamma) * faer::Scale(4.0);
    let n = h.dim();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let exact = k.trace_with_word(&[a, b]);
            worst = worst.max((exact - c64::new(analytic[(a, b)], 0.0)).norm());
        }
    }
    Ok(worst)
}

/// `max |(-i tr[{H, c_k c_l} rho] + 2 G_kl <H>) + 4(G h G + h)_kl|`.
pub fn rate_check_imag(h: &MajoranaHamiltonian, gamma: &CovarianceMatrix) -> Result<f64> {
    check_modes(h.modes(), MAX_RATE_MODES)?;
    let hf = fock_hamiltonian(h)?;
    let rho = gaussian_density_operator(gamma)?;
    let l = FockOperator { modes: h.modes(), matrix: &hf.matrix * &rho.matrix + &rho.matrix * &hf.matrix };
    let e = hf.mul(&rho).trace().re;
    let hbar = mean_field(h, gamma)?;
    let ghg = linalg::matmul(linalg::matmul(gamma.as_ref(), hbar.as_ref()).as_ref(), gamma.as_ref());
    let n = h.dim();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let exact = c64::new(0.0, -1.0) * l.trace_with_word(&[a, b]) + c64::new(2.0 * gamma[(a, b)] * e, 0.0);
            let analytic = -4.0 * (ghg[(a, b)] + hbar[(a, b)]);
            worst = worst.max((exact - c64::new(analytic, 0.0)).norm());
        }
    }
    Ok(worst)
}

/// Exact Gaussian state of a quadratic generator `T`.
#[derive(Clone, Debug)]
pub struct FreeFermion {
    pub gamma: CovarianceMatrix,
    /// `<i sum T c c>`, without any constant offset.
    pub energy: f64,
    pub entropy: f64,
    /// `energy - entropy / beta`; equals `energy` at zero temperature.
    pub free_energy: f64,
    /// Positive half of the spectrum of `iT`.
    pub levels: Vec<f64>,
}

/// Ground state (`beta = None`) or Gibbs state of `i sum T c c`, computed
/// from the complex Hermitian eigendecomposition of `iT`.
pub fn free_fermion_reference(t: &linalg::Matrix, beta: Option<f64>) -> Result<FreeFermion> {
    if let Some(b) = beta {
        if !(b > 0.0) {
            return Err(Error::InvalidBeta(b));
        }
    }
    let n = t.nrows();
    let x: Mat<c64> = Mat::from_fn(n, n, |i, j| c64::new(0.0, t[(i, j)]));
    let evd = x.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let eps: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i].re).collect();
    let v = evd.U();
    let scale = eps.iter().fold(1.0f64, |a, e| a.max(e.abs()));
    let f = |e: f64| match beta {
        Some(b) => (2.0 * b * e).tanh(),
        None if e.abs() <= 1e-10 * scale => 0.0,
        None => e.signum(),
    };
    // G = i V f(eps) V^+
    let g = Mat::from_fn(n, n, |i, j| {
        let mut acc = c64::new(0.0, 0.0);
        for k in 0..n {
            acc += v[(i, k)] * v[(j, k)].conj() * f(eps[k]);
        }
        (c64::new(0.0, 1.0) * acc).re
    });
    let mut levels: Vec<f64> = eps.iter().copied().filter(|&e| e > 0.0).collect();
    let zero_count = eps.iter().filter(|e| **e == 0.0).count() / 2;
    levels.extend(std::iter::repeat(0.0).take(zero_count));
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.truncate(n / 2);
    let (energy, entropy) = match beta {
        Some(b) => {
            let e = -2.0 * levels.iter().map(|&l| l * (2.0 * b * l).tanh()).sum::<f64>();
            let s = levels
                .iter()
                .map(|&l| {
                    let p = 0.5 * (1.0 + (2.0 * b * l).tanh());
                    let h = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
                    h(p) + h(1.0 - p)
                })
                .sum::<f64>();
            (e, s)
        }
        None => {
            let zero = levels.iter().filter(|&&l| l <= 1e-10 * scale).count();
            (-2.0 * levels.iter().sum::<f64>(), zero as f64 * std::f64::consts::LN_2)
        }
    };
    let free_energy = match beta {
        Some(b) => -levels.iter().map(|&l| (2.0 * (2.0 * b * l).cosh()).ln()).sum::<f64>() / b,
        None => energy,
    };
    Ok(FreeFermion { gamma: CovarianceMatrix::from_antisymmetrized(g), energy, entropy, free_energy, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{random_mixed_cm, vacuum_cm};

    #[test]
    fn vacuum_density_operator() {
        let rho = gaussian_density_operator(&vacuum_cm(3)).unwrap();
        assert!((rho.matrix[(0, 0)] - c64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((rho.trace() - c64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn maximally_mixed_density_operator() {
        let rho = gaussian_density_operator(&CovarianceMatrix::zeros(3)).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expected = if i == j { 0.125 } else { 0.0 };
                assert!((rho.matrix[(i, j)] - c64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn mixed_second_moments() {
        let g = random_mixed_cm(4, 17);
        let rho = gaussian_density_operator(&g).unwrap();
        assert!(linalg::max_abs_diff(&covariance_of(&rho), &g) < 1e-10);
    }

    #[test]
    fn hopping_free_model_is_hermitian() {
        let mut spec = ModelSpec::periodic(2, 0.0, 0.0);
        spec.t = 0.0;
        let op = direct_hubbard_fock(&spec).unwrap();
        assert!(op.hermiticity_error() < 1e-15);
    }

    #[test]
    fn limit_enforced() {
        assert!(matches!(majorana_word_operator(&[0], 13), Err(Error::TooManyModes { .. })));
    }
}
