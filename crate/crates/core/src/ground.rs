//! Ground states by imaginary-time flow of a pure covariance matrix.
//!
//! Each step applies `G <- O G O^T` with `O = exp(dtau A)`, `A = 2[h, G]`.
//! The generator is antisymmetric, so purity is kept up to roundoff and the
//! continuous flow `dG/dtau = -4(G h G + h)` lowers the energy monotonically.

use crate::covariance::{ground_cm, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    energy_and_field, hubbard_operator, mean_field, pairing_field, InteractionForm, MajoranaHamiltonian, ModelSpec,
};

/// Energy increase tolerated before a step is rejected (roundoff allowance).
const ENERGY_SLACK: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundOptions {
    pub dtau: f64,
    pub residual_tol: f64,
    pub max_steps: usize,
    pub reorthogonalize_every: usize,
}

impl Default for GroundOptions {
    fn default() -> Self {
        Self { dtau: 0.01, residual_tol: 1e-8, max_steps: 200_000, reorthogonalize_every: 100 }
    }
}

impl GroundOptions {
    fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0) {
            return Err(Error::InvalidTimeStep(self.dtau));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidOption(format!("residual_tol must be positive, got {}", self.residual_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GroundResult {
    pub gamma: CovarianceMatrix,
    pub energy: f64,
    pub residual: f64,
    pub steps: usize,
    pub energy_history: Vec<f64>,
    pub converged: bool,
}

/// `|[h(G), G]|_F / max(1, |h(G)|_F)`.
pub fn residual(h: &MajoranaHamiltonian, gamma: &CovarianceMatrix) -> Result<f64> {
    let hbar = mean_field(h, gamma)?;
    let c = linalg::commutator(&hbar, gamma);
    Ok(c.norm_l2() / hbar.norm_l2().max(1.0))
}

/// Pure start built from the ground state of the spec's one-body part plus a
/// uniform s-wave pairing field of strength `delta`. The plain interaction
/// form gets the Hartree shift `u/2` folded into the chemical potential so
/// that the seed sits at the same filling as the symmetric form would.
///
/// On a periodic lattice the seed is translation invariant; at half filling
/// this fixes the pairing/charge-density gauge to pure pairing, which the
/// flow and the thermal iteration then preserve.
pub fn paired_seed(spec: &ModelSpec, delta: f64) -> Result<CovarianceMatrix> {
    let lattice = spec.lattice()?;
    let mu = match spec.interaction_form {
        InteractionForm::Plain => spec.mu + 0.5 * spec.u,
        InteractionForm::Symmetric => spec.mu,
    };
    let mut op = hubbard_operator(&ModelSpec { u: 0.0, mu, ..*spec })?;
    op.terms.extend(pairing_field(&lattice, delta).terms);
    let h = MajoranaHamiltonian::from_operator(&op)?;
    let g = ground_cm(&h.t)?;
    let defect = g.purity_defect();
    if defect > 1e-8 * g.dim() as f64 {
        return Err(Error::NotPure(defect));
    }
    Ok(g)
}

/// Runs the flow from a pure `gamma0` until the commutator residual drops
/// below `opts.residual_tol`. Exhausting `max_steps` yields
/// [`Error::GroundUnconverged`] carrying the lowest-energy state reached.
pub fn minimize_energy(
    h: &MajoranaHamiltonian,
    gamma0: &CovarianceMatrix,
    opts: &GroundOptions,
) -> Result<GroundResult> {
    opts.validate()?;
    if gamma0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: gamma0.dim() });
    }
    let defect = gamma0.purity_defect();
    if defect > 1e-8 * gamma0.dim() as f64 {
        return Err(Error::NotPure(defect));
    }

    let mut gamma = gamma0.clone();
    let (mut e, mut hbar) = energy_and_field(h, &gamma)?;
    let mut comm = linalg::commutator(&hbar, &gamma);
    let mut res = comm.norm_l2() / hbar.norm_l2().max(1.0);
    let mut history = vec![e];
    let mut dtau = opts.dtau;
    let max_dtau = 10.0 * opts.dtau;
    let mut streak = 0usize;
    let mut accepted = 0usize;
    let mut steps = 0usize;

    while res > opts.residual_tol {
        if steps >= opts.max_steps || dtau < 1e-14 * opts.dtau {
            let result = GroundResult {
                gamma,
                energy: e,
                residual: res,
                steps,
                energy_history: history,
                converged: false,
            };
            return Err(Error::GroundUnconverged(Box::new(result)));
        }
        steps += 1;
        let gen = &comm * faer::Scale(2.0 * dtau);
        let o = linalg::expm(&gen)?;
        let mut cand = linalg::conjugate(&o, &gamma);
        if opts.reorthogonalize_every > 0 && (accepted + 1) % opts.reorthogonalize_every == 0 {
            cand = linalg::polar_project(&cand, 2)?;
        }
        let (e_new, h_new) = energy_and_field(h, &cand)?;
        if e_new <= e + ENERGY_SLACK && e_new.is_finite() {
            gamma = CovarianceMatrix::from_antisymmetrized(cand);
            e = e_new;
            hbar = h_new;
            comm = linalg::commutator(&hbar, &gamma);
            res = comm.norm_l2() / hbar.norm_l2().max(1.0);
            history.push(e);
            accepted += 1;
            streak += 1;
            if streak >= 10 {
                dtau = (dtau * 1.1).min(max_dtau);
                streak = 0;
            }
        } else {
            dtau *= 0.5;
            streak = 0;
        }
    }
    log::debug!("ground flow converged after {steps} steps, E = {e}, residual = {res:.3e}");
    Ok(GroundResult { gamma, energy: e, residual: res, steps, energy_history: history, converged: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{ground_cm, random_pure_cm};
    use crate::model::{build_hubbard, energy, ModelSpec};

    #[test]
    fn free_fermion_ground_energy() {
        let h = build_hubbard(&ModelSpec::periodic(3, 0.0, 0.3)).unwrap();
        let exact = energy(&h, &ground_cm(&h.t).unwrap()).unwrap();
        let out = minimize_energy(&h, &random_pure_cm(18, 3), &GroundOptions::default()).unwrap();
        assert!((out.energy - exact).abs() < 1e-9 * exact.abs());
        assert!(out.residual <= 1e-8);
    }

    #[test]
    fn history_is_monotone() {
        let h = build_hubbard(&ModelSpec::periodic(2, -4.0, 0.0)).unwrap();
        let out = minimize_energy(&h, &random_pure_cm(8, 5), &GroundOptions::default()).unwrap();
        assert!(out.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        assert!(out.gamma.is_pure(1e-8));
    }

    #[test]
    fn paired_seed_is_pure_and_paired() {
        let g = paired_seed(&ModelSpec::periodic(4, -4.0, 0.0), 0.5).unwrap();
        assert!(g.is_pure(1e-10));
        assert!(crate::observables::pairing(&g) > 1e-3);
        assert!((crate::model::particle_number(&g) - 16.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_mixed_start() {
        let h = build_hubbard(&ModelSpec::periodic(2, -4.0, 0.0)).unwrap();
        let r = minimize_energy(&h, &CovarianceMatrix::zeros(8), &GroundOptions::default());
        assert!(matches!(r, Err(Error::NotPure(_))));
    }

    #[test]
    fn step_budget_reports_best_state() {
        let h = build_hubbard(&ModelSpec::periodic(2, -4.0, 0.0)).unwrap();
        let opts = GroundOptions { max_steps: 3, ..Default::default() };
        match minimize_energy(&h, &random_pure_cm(8, 5), &opts) {
            Err(Error::GroundUnconverged(r)) => {
                assert!(!r.converged);
                assert_eq!(r.steps, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
