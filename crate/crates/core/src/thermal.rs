//! Gibbs states from the self-consistency `G = i tanh(2i beta h(G))`.

use crate::covariance::{cm_log_term, entropy, tanh_gibbs, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{energy, mean_field, MajoranaHamiltonian};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalOptions {
    /// Mixing weight of the new iterate, in `(0, 1]`.
    pub damping: f64,
    /// Bound on `|F(G) - G|_F / 2M` with `F` the undamped update.
    pub fixed_point_tol: f64,
    pub max_iters: usize,
    pub beta_step: f64,
}

impl Default for ThermalOptions {
    fn default() -> Self {
        Self { damping: 0.5, fixed_point_tol: 1e-9, max_iters: 10_000, beta_step: 0.01 }
    }
}

impl ThermalOptions {
    fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidOption(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.beta_step > 0.0) {
            return Err(Error::InvalidOption(format!("beta_step must be positive, got {}", self.beta_step)));
        }
        if !(self.fixed_point_tol > 0.0) {
            return Err(Error::InvalidOption(format!(
                "fixed_point_tol must be positive, got {}",
                self.fixed_point_tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ThermalResult {
    pub gamma: CovarianceMatrix,
    pub beta: f64,
    pub energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
    /// Number of updates applied.
    pub iters: usize,
    pub converged: bool,
    /// Final fixed-point residual `|F(G) - G|_F / 2M`.
    pub residual: f64,
    /// Damping in effect when the iteration stopped.
    pub damping: f64,
}

/// `F = E - S / beta`.
pub fn free_energy(h: &MajoranaHamiltonian, gamma: &CovarianceMatrix, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(energy(h, gamma)? - entropy(gamma)? / beta)
}

/// Stationarity pair `(|[h_F, G]|_F, |h_F|_F)` with `h_F = h(G) - cm_log_term(G) / beta`.
pub fn stationarity(h: &MajoranaHamiltonian, gamma: &CovarianceMatrix, beta: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    let hbar = mean_field(h, gamma)?;
    let log = cm_log_term(gamma)?;
    let hf = hbar.matrix() - &(log.matrix() * faer::Scale(1.0 / beta));
    let comm = linalg::commutator(&hf, gamma);
    Ok((comm.norm_l2(), hf.norm_l2()))
}

fn finish(
    h: &MajoranaHamiltonian,
    gamma: CovarianceMatrix,
    beta: f64,
    iters: usize,
    converged: bool,
    residual: f64,
    damping: f64,
) -> Result<ThermalResult> {
    let e = energy(h, &gamma)?;
    let s = entropy(&gamma)?;
    Ok(ThermalResult {
        gamma,
        beta,
        energy: e,
        entropy: s,
        free_energy: e - s / beta,
        iters,
        converged,
        residual,
        damping,
    })
}

/// Damped iteration `G <- (1 - a) G + a F(G)`, `F(G) = i tanh(2i beta h(G))`.
///
/// Every iterate is a convex combination of physical matrices and therefore
/// physical. The damping is halved when the iterates oscillate with period
/// two. A growing residual alone is not treated as divergence: leaving an
/// unstable symmetric fixed point (onset of pairing) looks the same.
pub fn gibbs_fixed_point(
    h: &MajoranaHamiltonian,
    beta: f64,
    gamma0: &CovarianceMatrix,
    opts: &ThermalOptions,
) -> Result<ThermalResult> {
    if !(beta > 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    opts.validate()?;
    if gamma0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: gamma0.dim() });
    }
    let norm0 = gamma0.spectral_norm()?;
    if norm0 > 1.0 + 1e-8 {
        return Err(Error::NotPhysical(norm0));
    }
    let scale = 1.0 / h.dim() as f64;
    let mut alpha = opts.damping;
    let mut gamma = gamma0.matrix().clone();
    let mut previous: Option<linalg::Matrix> = None;
    let mut iters = 0usize;

    loop {
        let hbar = mean_field(h, &gamma)?;
        let target = tanh_gibbs(&hbar, beta)?;
        let step = &*target - &gamma;
        let res = step.norm_l2() * scale;
        if res <= opts.fixed_point_tol {
            return finish(h, CovarianceMatrix::from_antisymmetrized(gamma), beta, iters, true, res, alpha);
        }
        if iters >= opts.max_iters || !res.is_finite() {
            log::warn!("thermal iteration at beta = {beta} stopped after {iters} updates, residual {res:.3e}");
            return finish(h, CovarianceMatrix::from_antisymmetrized(gamma), beta, iters, false, res, alpha);
        }
        let next = &gamma + &(&step * faer::Scale(alpha));
        if let Some(prev) = &previous {
            let back = linalg::max_abs_diff(&next, prev);
            let forward = linalg::max_abs_diff(&next, &gamma);
            if back < 0.5 * forward && alpha > 1.0 / 1024.0 {
                alpha *= 0.5;
                log::debug!("thermal iteration at beta = {beta}: damping reduced to {alpha}");
            }
        }
        previous = Some(std::mem::replace(&mut gamma, next));
        linalg::antisymmetrize(&mut gamma);
        iters += 1;
    }
}

/// Result of a sweep in inverse temperature.
#[derive(Clone, Debug, Default)]
pub struct AnnealSeries {
    pub points: Vec<ThermalResult>,
    /// Indices into `points` where the solution jumped between branches.
    pub branch_switches: Vec<usize>,
    /// Set when an unconverged point ended the sweep early; the point is not in `points`.
    pub aborted_at: Option<f64>,
}

/// Grid from `start` towards `end` with spacing `step`, endpoints included.
pub fn beta_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start).abs() / step + 1e-9).floor() as usize;
    let dir = if end >= start { 1.0 } else { -1.0 };
    let mut out: Vec<f64> = (0..=n).map(|i| start + dir * step * i as f64).collect();
    if (out.last().copied().unwrap_or(start) - end).abs() > 1e-12 {
        out.push(end);
    }
    out
}

/// Sequence of fixed points along `beta_start -> beta_end` (warming when the
/// range decreases), each seeded from the previous solution. Non-positive
/// inverse temperatures are skipped.
pub fn anneal(
    h: &MajoranaHamiltonian,
    beta_start: f64,
    beta_end: f64,
    gamma0: &CovarianceMatrix,
    opts: &ThermalOptions,
) -> Result<AnnealSeries> {
    opts.validate()?;
    let betas: Vec<f64> = beta_grid(beta_start, beta_end, opts.beta_step).into_iter().filter(|&b| b > 0.0).collect();
    anneal_on_grid(h, &betas, gamma0, opts)
}

pub fn anneal_on_grid(
    h: &MajoranaHamiltonian,
    betas: &[f64],
    gamma0: &CovarianceMatrix,
    opts: &ThermalOptions,
) -> Result<AnnealSeries> {
    let mut series = AnnealSeries::default();
    let mut seed = gamma0.clone();
    let mut last_beta: Option<f64> = None;
    for &beta in betas {
        let r = gibbs_fixed_point(h, beta, &seed, opts)?;
        if !r.converged {
            series.aborted_at = Some(beta);
            return Ok(series);
        }
        if let Some(b0) = last_beta {
            let jump = linalg::frobenius(&(r.gamma.matrix() - seed.matrix()));
            let limit = 10.0 * (beta - b0).abs() * linalg::frobenius(&r.gamma);
            if jump > limit && limit > 0.0 {
                log::warn!("anneal: possible branch switch at beta = {beta} (|dG| = {jump:.3e})");
                series.branch_switches.push(series.points.len());
            }
        }
        last_beta = Some(beta);
        seed = r.gamma.clone();
        series.points.push(r);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::random_mixed_cm;
    use crate::model::{build_hubbard, ModelSpec};

    #[test]
    fn free_model_converges_in_one_update() {
        let h = build_hubbard(&ModelSpec::periodic(2, 0.0, 0.2)).unwrap();
        let opts = ThermalOptions { damping: 1.0, ..Default::default() };
        let r = gibbs_fixed_point(&h, 0.7, &random_mixed_cm(8, 1), &opts).unwrap();
        assert!(r.converged);
        assert_eq!(r.iters, 1);
        assert!((r.free_energy - (r.energy - r.entropy / 0.7)).abs() < 1e-12);
    }

    #[test]
    fn interacting_fixed_point_is_stationary() {
        let h = build_hubbard(&ModelSpec::periodic(2, -3.0, 0.1)).unwrap();
        let opts = ThermalOptions { fixed_point_tol: 1e-12, ..Default::default() };
        let r = gibbs_fixed_point(&h, 1.0, &CovarianceMatrix::zeros(8), &opts).unwrap();
        assert!(r.converged);
        let (c, g) = stationarity(&h, &r.gamma, 1.0).unwrap();
        assert!(c < 1e-7 && g < 1e-7, "{c} {g}");
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = beta_grid(0.4, 0.0, 0.1);
        assert_eq!(g.len(), 5);
        assert!((g[4]).abs() < 1e-12);
        let g = beta_grid(0.0, 0.25, 0.1);
        assert_eq!(g.len(), 4);
        assert_eq!(*g.last().unwrap(), 0.25);
    }

    #[test]
    fn invalid_beta() {
        let h = build_hubbard(&ModelSpec::periodic(2, 0.0, 0.0)).unwrap();
        let r = gibbs_fixed_point(&h, 0.0, &CovarianceMatrix::zeros(8), &ThermalOptions::default());
        assert!(matches!(r, Err(Error::InvalidBeta(_))));
    }
}
