//! Lattice models in Majorana form and the mean-field functionals.
//!
//! A Hamiltonian is `H = i sum T_kl c_k c_l + sum U_klmn c_k c_l c_m c_n + e0`
//! with `T` antisymmetric and `U` totally antisymmetric. Only the canonical
//! entries `k < l < m < n` of `U` are stored.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use faer::c64;

use crate::covariance::{CovarianceMatrix, SkewMatrix};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Lattice, Spin};
use crate::linalg::{self, Matrix};

/// Tolerance on the anti-Hermitian residue when converting fermion operators.
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InteractionForm {
    /// `u (n_up - 1/2)(n_dn - 1/2)`, half filling at `mu = 0`.
    Symmetric,
    /// `u n_up n_dn`.
    Plain,
}

impl FromStr for InteractionForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" => Ok(Self::Symmetric),
            "plain" => Ok(Self::Plain),
            _ => Err(Error::UnknownInteractionForm(s.to_string())),
        }
    }
}

impl fmt::Display for InteractionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Symmetric => "symmetric",
            Self::Plain => "plain",
        })
    }
}

/// Hubbard model on an `n_h x n_v` lattice:
/// `t sum_<xy>,s a+_xs a_ys + u sum_x I_x + sum_x,s mu_x n_xs`
/// with `mu_x = mu + v_t * trap_offset(x)` and `I_x` chosen by `interaction_form`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub n_h: usize,
    pub n_v: usize,
    pub boundary: Boundary,
    pub t: f64,
    pub u: f64,
    pub mu: f64,
    pub v_t: f64,
    pub interaction_form: InteractionForm,
}

impl ModelSpec {
    pub fn periodic(n: usize, u: f64, mu: f64) -> Self {
        Self {
            n_h: n,
            n_v: n,
            boundary: Boundary::Periodic,
            t: 1.0,
            u,
            mu,
            v_t: 0.0,
            interaction_form: InteractionForm::Symmetric,
        }
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.n_h, self.n_v, self.boundary)
    }

    pub fn modes(&self) -> usize {
        2 * self.n_h * self.n_v
    }

    pub fn local_mu(&self, lattice: &Lattice, site: usize) -> f64 {
        self.mu + self.v_t * lattice.trap_offset(site)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

/// Sum of products of ladder operators with complex coefficients.
#[derive(Clone, Debug, Default)]
pub struct FermionOperator {
    pub modes: usize,
    pub terms: Vec<(c64, Vec<Ladder>)>,
}

impl FermionOperator {
    pub fn new(modes: usize) -> Self {
        Self { modes, terms: Vec::new() }
    }

    pub fn add(&mut self, coeff: f64, ops: &[Ladder]) {
        self.terms.push((c64::new(coeff, 0.0), ops.to_vec()));
    }

    pub fn add_complex(&mut self, coeff: c64, ops: &[Ladder]) {
        self.terms.push((coeff, ops.to_vec()));
    }

    /// Adds `coeff * (a+_i a_j + a+_j a_i)`.
    pub fn add_hopping(&mut self, coeff: f64, i: usize, j: usize) {
        self.add(coeff, &[Ladder::Create(i), Ladder::Annihilate(j)]);
        self.add(coeff, &[Ladder::Create(j), Ladder::Annihilate(i)]);
    }

    pub fn add_number(&mut self, coeff: f64, i: usize) {
        self.add(coeff, &[Ladder::Create(i), Ladder::Annihilate(i)]);
    }

    pub fn add_density_density(&mut self, coeff: f64, i: usize, j: usize) {
        use Ladder::*;
        self.add(coeff, &[Create(i), Annihilate(i), Create(j), Annihilate(j)]);
    }

    /// Majorana expansion: canonical increasing words mapped to coefficients.
    pub fn majorana_words(&self) -> Result<BTreeMap<Vec<usize>, c64>> {
        let m = self.modes;
        let mut out: BTreeMap<Vec<usize>, c64> = BTreeMap::new();
        for (coeff, ops) in &self.terms {
            for op in ops {
                let idx = match op {
                    Ladder::Create(i) | Ladder::Annihilate(i) => *i,
                };
                if idx >= m {
                    return Err(Error::IndexOutOfRange { index: idx, modes: m });
                }
            }
            // a+ = (c_k + i c_{k+M}) / 2, a = (c_k - i c_{k+M}) / 2
            let n = ops.len();
            for mask in 0..(1usize << n) {
                let mut word = Vec::with_capacity(n);
                let mut w = *coeff * 0.5f64.powi(n as i32);
                for (bit, op) in ops.iter().enumerate() {
                    let second = mask >> bit & 1 == 1;
                    let (k, phase) = match (op, second) {
                        (Ladder::Create(k), false) | (Ladder::Annihilate(k), false) => (*k, c64::new(1.0, 0.0)),
                        (Ladder::Create(k), true) => (*k + m, c64::new(0.0, 1.0)),
                        (Ladder::Annihilate(k), true) => (*k + m, c64::new(0.0, -1.0)),
                    };
                    word.push(k);
                    w *= phase;
                }
                let (sign, canon) = canonical_word(&word);
                *out.entry(canon).or_insert(c64::new(0.0, 0.0)) += w * sign;
            }
        }
        Ok(out)
    }
}

/// Sorts a Majorana word with anticommutation signs and removes squares.
pub fn canonical_word(word: &[usize]) -> (f64, Vec<usize>) {
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
    (sign, reduced)
}

/// One canonical entry `U_{klmn}` with `k < l < m < n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuarticTerm {
    pub idx: [usize; 4],
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MajoranaHamiltonian {
    pub t: SkewMatrix,
    pub quartic: Vec<QuarticTerm>,
    pub e0: f64,
}

/// Splits of four canonical positions into an ordered pair and its complement,
/// with the parity of the permutation `(i, j, p, q)`.
const PAIR_SPLITS: [(usize, usize, usize, usize, f64); 6] = [
    (0, 1, 2, 3, 1.0),
    (0, 2, 1, 3, -1.0),
    (0, 3, 1, 2, 1.0),
    (1, 2, 0, 3, 1.0),
    (1, 3, 0, 2, -1.0),
    (2, 3, 0, 1, 1.0),
];

impl MajoranaHamiltonian {
    pub fn quadratic(t: SkewMatrix, e0: f64) -> Self {
        Self { t, quartic: Vec::new(), e0 }
    }

    pub fn modes(&self) -> usize {
        self.t.dim() / 2
    }

    pub fn dim(&self) -> usize {
        self.t.dim()
    }

    /// Converts a Hermitian fermion operator with terms of Majorana degree at most four.
    pub fn from_operator(op: &FermionOperator) -> Result<Self> {
        let m = op.modes;
        let words = op.majorana_words()?;
        let mut t = linalg::zeros(2 * m);
        let mut quartic = Vec::new();
        let mut e0 = 0.0;
        for (word, w) in words {
            match word.len() {
                0 => {
                    if w.im.abs() > HERMITIAN_TOL {
                        return Err(Error::NonHermitian(w.im));
                    }
                    e0 += w.re;
                }
                2 => {
                    // i (T_kl c_k c_l + T_lk c_l c_k) = 2i T_kl c_k c_l
                    if w.re.abs() > HERMITIAN_TOL {
                        return Err(Error::NonHermitian(w.re));
                    }
                    let (k, l) = (word[0], word[1]);
                    t[(k, l)] += 0.5 * w.im;
                    t[(l, k)] -= 0.5 * w.im;
                }
                4 => {
                    if w.im.abs() > HERMITIAN_TOL {
                        return Err(Error::NonHermitian(w.im));
                    }
                    if w.re != 0.0 {
                        quartic.push(QuarticTerm {
                            idx: [word[0], word[1], word[2], word[3]],
                            value: w.re / 24.0,
                        });
                    }
                }
                d => {
                    return Err(Error::InvalidOption(format!(
                        "Majorana monomial of degree {d} is not supported"
                    )))
                }
            }
        }
        Ok(Self { t: SkewMatrix::from_antisymmetrized(t), quartic, e0 })
    }

    /// `(1 - s) a + s b`, exact for models affine in their parameters.
    pub fn lerp(a: &Self, b: &Self, s: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        let t = faer::Mat::from_fn(a.dim(), a.dim(), |i, j| (1.0 - s) * a.t[(i, j)] + s * b.t[(i, j)]);
        let mut table: BTreeMap<[usize; 4], f64> = BTreeMap::new();
        for q in &a.quartic {
            *table.entry(q.idx).or_insert(0.0) += (1.0 - s) * q.value;
        }
        for q in &b.quartic {
            *table.entry(q.idx).or_insert(0.0) += s * q.value;
        }
        Ok(Self {
            t: SkewMatrix::from_antisymmetrized(t),
            quartic: table.into_iter().map(|(idx, value)| QuarticTerm { idx, value }).collect(),
            e0: (1.0 - s) * a.e0 + s * b.e0,
        })
    }

    /// Dense totally antisymmetric `U_{ijkl}` (row-major, dimension `(2M)^4`).
    pub fn dense_quartic(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n * n * n];
        let perms = permutations4();
        for q in &self.quartic {
            for (p, sign) in &perms {
                let i = [q.idx[p[0]], q.idx[p[1]], q.idx[p[2]], q.idx[p[3]]];
                out[((i[0] * n + i[1]) * n + i[2]) * n + i[3]] = sign * q.value;
            }
        }
        out
    }

    fn check_dim(&self, gamma: &Matrix) -> Result<()> {
        if gamma.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: gamma.nrows() });
        }
        Ok(())
    }
}

/// All 24 permutations of four positions with their parities.
pub fn permutations4() -> Vec<([usize; 4], f64)> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let distinct = (0..4).all(|i| (i + 1..4).all(|j| p[i] != p[j]));
                    if distinct {
                        let inversions = (0..4)
                            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
                            .filter(|&(i, j)| p[i] > p[j])
                            .count();
                        out.push((p, if inversions % 2 == 0 { 1.0 } else { -1.0 }));
                    }
                }
            }
        }
    }
    out
}

/// Majorana Hamiltonian of the lattice Hubbard model.
pub fn build_hubbard(spec: &ModelSpec) -> Result<MajoranaHamiltonian> {
    MajoranaHamiltonian::from_operator(&hubbard_operator(spec)?)
}

/// The Hubbard model as a ladder-operator expression.
pub fn hubbard_operator(spec: &ModelSpec) -> Result<FermionOperator> {
    let lattice = spec.lattice()?;
    let mut op = FermionOperator::new(lattice.modes());
    for (x, y) in lattice.bonds() {
        for spin in [Spin::Up, Spin::Down] {
            op.add_hopping(spec.t, lattice.mode(x, spin), lattice.mode(y, spin));
        }
    }
    for x in 0..lattice.sites() {
        let up = lattice.mode(x, Spin::Up);
        let dn = lattice.mode(x, Spin::Down);
        op.add_density_density(spec.u, up, dn);
        let mut mu_x = spec.local_mu(&lattice, x);
        if spec.interaction_form == InteractionForm::Symmetric {
            mu_x -= 0.5 * spec.u;
            op.add(0.25 * spec.u, &[]);
        }
        op.add_number(mu_x, up);
        op.add_number(mu_x, dn);
    }
    Ok(op)
}

/// Uniform on-site pairing field `delta sum_x (a+_{x,up} a+_{x,down} + h.c.)`.
pub fn pairing_field(lattice: &Lattice, delta: f64) -> FermionOperator {
    use Ladder::*;
    let mut op = FermionOperator::new(lattice.modes());
    for x in 0..lattice.sites() {
        let up = lattice.mode(x, Spin::Up);
        let dn = lattice.mode(x, Spin::Down);
        op.add(delta, &[Create(up), Create(dn)]);
        op.add(delta, &[Annihilate(dn), Annihilate(up)]);
    }
    op
}

/// `6 tr_B[U G]` with `tr_B[U G]_ij = sum_kl U_ijkl G_lk`.
fn interaction_field(h: &MajoranaHamiltonian, gamma: &Matrix) -> Matrix {
    let mut out = linalg::zeros(h.dim());
    for q in &h.quartic {
        for &(a, b, c, d, sign) in &PAIR_SPLITS {
            let (i, j, p, r) = (q.idx[a], q.idx[b], q.idx[c], q.idx[d]);
            // U_ijpr G_rp + U_ijrp G_pr = 2 U_ijpr G_rp
            let v = 12.0 * sign * q.value * gamma[(r, p)];
            out[(i, j)] += v;
            out[(j, i)] -= v;
        }
    }
    out
}

/// Mean-field generator `h(G) = T + 6 tr_B[U G]`.
pub fn mean_field(h: &MajoranaHamiltonian, gamma: &Matrix) -> Result<SkewMatrix> {
    h.check_dim(gamma)?;
    let mut out = interaction_field(h, gamma);
    for j in 0..h.dim() {
        for i in 0..h.dim() {
            out[(i, j)] += h.t[(i, j)];
        }
    }
    Ok(SkewMatrix::from_antisymmetrized(out))
}

/// `E = -tr[(T + 3 tr_B[U G]) G] + e0`.
pub fn energy(h: &MajoranaHamiltonian, gamma: &Matrix) -> Result<f64> {
    h.check_dim(gamma)?;
    let quadratic = -linalg::trace_product(&h.t, gamma);
    let mut quartic = 0.0;
    for q in &h.quartic {
        let [a, b, c, d] = q.idx;
        let g = |i: usize, j: usize| gamma[(i, j)];
        let four = -(g(a, b) * g(c, d) - g(a, c) * g(b, d) + g(a, d) * g(b, c));
        quartic += 24.0 * q.value * four;
    }
    Ok(quadratic + quartic + h.e0)
}

/// Energy together with the mean field at the same state.
pub fn energy_and_field(h: &MajoranaHamiltonian, gamma: &Matrix) -> Result<(f64, SkewMatrix)> {
    let hbar = mean_field(h, gamma)?;
    // E = -tr[(T + hbar) G] / 2 + e0
    let e = -0.5 * (linalg::trace_product(&h.t, gamma) + linalg::trace_product(&hbar, gamma)) + h.e0;
    Ok((e, hbar))
}

/// `N = M/2 - (1/2) sum_k G_{k,k+M}`.
pub fn particle_number(gamma: &CovarianceMatrix) -> f64 {
    let m = gamma.modes();
    0.5 * m as f64 - 0.5 * (0..m).map(|k| gamma[(k, k + m)]).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{random_mixed_cm, random_pure_cm, vacuum_cm};

    #[test]
    fn number_operator_expansion() {
        let mut op = FermionOperator::new(1);
        op.add_number(1.0, 0);
        let h = MajoranaHamiltonian::from_operator(&op).unwrap();
        // n = 1/2 - (i/2) c_0 c_1
        assert!((h.e0 - 0.5).abs() < 1e-15);
        assert!((h.t[(0, 1)] + 0.25).abs() < 1e-15);
        assert!(h.quartic.is_empty());
        assert!(energy(&h, &vacuum_cm(1)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn symmetric_interaction_is_purely_quartic() {
        let mut spec = ModelSpec::periodic(2, -3.0, 0.0);
        spec.t = 0.0;
        let h = build_hubbard(&spec).unwrap();
        assert!(h.e0.abs() < 1e-14);
        assert!(linalg::frobenius(&h.t) < 1e-14);
        assert_eq!(h.quartic.len(), 4);
    }

    #[test]
    fn mean_field_of_free_model_is_t() {
        let spec = ModelSpec::periodic(2, 0.0, 0.3);
        let h = build_hubbard(&spec).unwrap();
        let g = random_mixed_cm(8, 2);
        assert_eq!(mean_field(&h, &g).unwrap(), h.t);
    }

    #[test]
    fn field_and_energy_paths_agree() {
        let spec = ModelSpec::periodic(2, -4.0, 0.4);
        let h = build_hubbard(&spec).unwrap();
        let g = random_pure_cm(8, 7);
        let e1 = energy(&h, &g).unwrap();
        let (e2, _) = energy_and_field(&h, &g).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn particle_number_limits() {
        assert_eq!(particle_number(&vacuum_cm(3)), 0.0);
        assert_eq!(particle_number(&CovarianceMatrix::zeros(3)), 1.5);
        let full = CovarianceMatrix::new(vacuum_cm(3).matrix() * faer::Scale(-1.0)).unwrap();
        assert_eq!(particle_number(&full), 3.0);
    }

    #[test]
    fn parse_options() {
        assert_eq!("Plain".parse::<InteractionForm>().unwrap(), InteractionForm::Plain);
        assert!("cubic".parse::<InteractionForm>().is_err());
        assert!("twisted".parse::<Boundary>().is_err());
    }
}
