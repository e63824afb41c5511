//! Lattice observables evaluated from the covariance matrix.
//!
//! The complex correlators `rho_kl = <a+_k a_l>` and `F_kl = <a+_k a+_l>` are
//! read off the `M x M` blocks of `G`; every observable below is a two- or
//! four-point contraction of those.

use std::f64::consts::PI;

use faer::{c64, Mat};

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Lattice, Spin};

/// One-body correlators of a Gaussian state.
#[derive(Clone, Debug)]
pub struct Correlators {
    /// `<a+_k a_l>`
    pub rho: Mat<c64>,
    /// `<a+_k a+_l>`
    pub anomalous: Mat<c64>,
}

impl Correlators {
    pub fn from_cm(gamma: &CovarianceMatrix) -> Self {
        let m = gamma.modes();
        let g = |i: usize, j: usize| gamma[(i, j)];
        let rho = Mat::from_fn(m, m, |k, l| {
            let delta = if k == l { 2.0 } else { 0.0 };
            c64::new(delta - g(k, l + m) + g(k + m, l), -(g(k, l) + g(k + m, l + m))) * 0.25
        });
        let anomalous = Mat::from_fn(m, m, |k, l| {
            c64::new(g(k, l + m) + g(k + m, l), -(g(k, l) - g(k + m, l + m))) * 0.25
        });
        Self { rho, anomalous }
    }

    /// Inverse of [`Correlators::from_cm`].
    pub fn to_cm(&self) -> CovarianceMatrix {
        let m = self.rho.nrows();
        let mut g = crate::linalg::zeros(2 * m);
        for k in 0..m {
            for l in 0..m {
                let r = self.rho[(k, l)];
                let f = self.anomalous[(k, l)];
                let delta = if k == l { 1.0 } else { 0.0 };
                g[(k, l)] = -2.0 * (r.im + f.im);
                g[(k + m, l + m)] = -2.0 * (r.im - f.im);
                g[(k, l + m)] = 2.0 * f.re - 2.0 * r.re + delta;
                g[(k + m, l)] = 2.0 * f.re + 2.0 * r.re - delta;
            }
        }
        CovarianceMatrix::from_antisymmetrized(g)
    }

    pub fn modes(&self) -> usize {
        self.rho.nrows()
    }

    pub fn occupation(&self, k: usize) -> f64 {
        self.rho[(k, k)].re
    }

    /// `<n_i n_j>` by Wick contraction.
    pub fn density_density(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.occupation(i);
        }
        self.occupation(i) * self.occupation(j) - self.rho[(i, j)].norm_sqr() + self.anomalous[(i, j)].norm_sqr()
    }
}

/// `P = (2/M) sum_kl |<a+_k a+_l>|^2`.
pub fn pairing(gamma: &CovarianceMatrix) -> f64 {
    pairing_of(&Correlators::from_cm(gamma))
}

pub fn pairing_of(c: &Correlators) -> f64 {
    let m = c.modes();
    let mut acc = 0.0;
    for l in 0..m {
        for k in 0..m {
            acc += c.anomalous[(k, l)].norm_sqr();
        }
    }
    2.0 * acc / m as f64
}

fn check_modes(lattice: &Lattice, gamma: &CovarianceMatrix) -> Result<()> {
    if gamma.modes() != lattice.modes() {
        return Err(Error::DimensionMismatch { expected: 2 * lattice.modes(), found: gamma.dim() });
    }
    Ok(())
}

fn require_periodic(lattice: &Lattice) -> Result<()> {
    if lattice.boundary != Boundary::Periodic {
        return Err(Error::RequiresPeriodic);
    }
    Ok(())
}

/// `n_x = n_{x,up} + n_{x,down}` per site.
pub fn density_profile(lattice: &Lattice, gamma: &CovarianceMatrix) -> Result<Vec<f64>> {
    check_modes(lattice, gamma)?;
    let m = gamma.modes();
    Ok((0..lattice.sites())
        .map(|x| {
            let up = lattice.mode(x, Spin::Up);
            let dn = lattice.mode(x, Spin::Down);
            // n_k = (1 - G_{k,k+M}) / 2
            1.0 - 0.5 * (gamma[(up, up + m)] + gamma[(dn, dn + m)])
        })
        .collect())
}

/// `n(k) = (1/N) sum_xy exp(ik(x - y)) <a+_x a_y>` for one spin species,
/// ordered like [`Lattice::momenta`].
pub fn momentum_distribution(lattice: &Lattice, gamma: &CovarianceMatrix, spin: Spin) -> Result<Vec<f64>> {
    require_periodic(lattice)?;
    check_modes(lattice, gamma)?;
    let c = Correlators::from_cm(gamma);
    Ok(momentum_resolve(lattice, |x, y| c.rho[(lattice.mode(x, spin), lattice.mode(y, spin))])
        .into_iter()
        .map(|z| z.re)
        .collect())
}

/// `(1/N) sum_xy exp(ik(x - y)) f(x, y)` for every lattice momentum.
fn momentum_resolve(lattice: &Lattice, f: impl Fn(usize, usize) -> c64) -> Vec<c64> {
    let n = lattice.sites();
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|x| {
            let (h, v) = lattice.coords(x);
            (h as f64, v as f64)
        })
        .collect();
    let values: Vec<c64> = (0..n * n).map(|i| f(i / n, i % n)).collect();
    lattice
        .momenta()
        .into_iter()
        .map(|(kx, ky)| {
            let phase: Vec<c64> = coords.iter().map(|&(h, v)| c64::cis(kx * h + ky * v)).collect();
            let mut acc = c64::new(0.0, 0.0);
            for x in 0..n {
                let mut row = c64::new(0.0, 0.0);
                for y in 0..n {
                    row += values[x * n + y] * phase[y].conj();
                }
                acc += phase[x] * row;
            }
            acc / n as f64
        })
        .collect()
}

fn local_moment_correlation(c: &Correlators, lattice: &Lattice, a: usize, b: usize) -> f64 {
    let mut acc = 0.0;
    for (sa, wa) in [(Spin::Up, 1.0), (Spin::Down, -1.0)] {
        for (sb, wb) in [(Spin::Up, 1.0), (Spin::Down, -1.0)] {
            acc += wa * wb * c.density_density(lattice.mode(a, sa), lattice.mode(b, sb));
        }
    }
    acc
}

fn check_displacement(lattice: &Lattice, dh: isize, dv: isize) -> Result<()> {
    if dh.unsigned_abs() >= lattice.n_h || dv.unsigned_abs() >= lattice.n_v {
        return Err(Error::DisplacementOutOfRange { dh, dv });
    }
    Ok(())
}

/// Site average of `f(x, x + d)` over all `x` for which `x + d` lies on the lattice.
fn site_average(lattice: &Lattice, dh: isize, dv: isize, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for x in 0..lattice.sites() {
        if let Some(y) = lattice.shift(x, dh, dv) {
            acc += f(x, y);
            count += 1;
        }
    }
    acc / count as f64
}

/// `C(d) = <m_{x+d} m_x>` with `m = n_up - n_down`, averaged over sites.
pub fn spin_correlation(lattice: &Lattice, gamma: &CovarianceMatrix, dh: isize, dv: isize) -> Result<f64> {
    check_modes(lattice, gamma)?;
    check_displacement(lattice, dh, dv)?;
    let c = Correlators::from_cm(gamma);
    Ok(site_average(lattice, dh, dv, |x, y| local_moment_correlation(&c, lattice, y, x)))
}

/// `C(d)` for every displacement `d = (h, v)` in `0..n_h x 0..n_v`, indexed like sites.
pub fn spin_correlation_map(lattice: &Lattice, gamma: &CovarianceMatrix) -> Result<Vec<f64>> {
    require_periodic(lattice)?;
    check_modes(lattice, gamma)?;
    let c = Correlators::from_cm(gamma);
    Ok((0..lattice.sites())
        .map(|d| {
            let (dh, dv) = lattice.coords(d);
            site_average(lattice, dh as isize, dv as isize, |x, y| local_moment_correlation(&c, lattice, y, x))
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct StructureFactor {
    /// `S(k)` ordered like [`Lattice::momenta`].
    pub values: Vec<f64>,
    pub peak: (f64, f64),
    pub peak_index: usize,
}

/// `S(k) = sum_y exp(i k y) C(y)` on a periodic lattice.
pub fn magnetic_structure_factor(lattice: &Lattice, gamma: &CovarianceMatrix) -> Result<StructureFactor> {
    let cmap = spin_correlation_map(lattice, gamma)?;
    let momenta = lattice.momenta();
    let values: Vec<f64> = momenta
        .iter()
        .map(|&(kx, ky)| {
            (0..lattice.sites())
                .map(|y| {
                    let (h, v) = lattice.coords(y);
                    (kx * h as f64 + ky * v as f64).cos() * cmap[y]
                })
                .sum()
        })
        .collect();
    let peak_index = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(StructureFactor { peak: momenta[peak_index], peak_index, values })
}

/// `A(d) = <n_{x,up} n_{x+d,down}>`, averaged over sites.
pub fn af_order(lattice: &Lattice, gamma: &CovarianceMatrix, dh: isize, dv: isize) -> Result<f64> {
    check_modes(lattice, gamma)?;
    check_displacement(lattice, dh, dv)?;
    let c = Correlators::from_cm(gamma);
    Ok(site_average(lattice, dh, dv, |x, y| {
        c.density_density(lattice.mode(x, Spin::Up), lattice.mode(y, Spin::Down))
    }))
}

/// `O_M = <n_x^2> - <n_x>^2`, averaged over sites.
pub fn mott_order(lattice: &Lattice, gamma: &CovarianceMatrix) -> Result<f64> {
    check_modes(lattice, gamma)?;
    let c = Correlators::from_cm(gamma);
    let n = lattice.sites();
    Ok((0..n)
        .map(|x| {
            let up = lattice.mode(x, Spin::Up);
            let dn = lattice.mode(x, Spin::Down);
            let (nu, nd) = (c.occupation(up), c.occupation(dn));
            nu + nd + 2.0 * c.density_density(up, dn) - (nu + nd).powi(2)
        })
        .sum::<f64>()
        / n as f64)
}

#[derive(Clone, Debug)]
pub struct PairAmplitude {
    /// `|phi(k)|^2`, zero where saturated.
    pub values: Vec<f64>,
    /// `1 - n_up(k) < 1e-10`: the amplitude is undefined there.
    pub saturated: Vec<bool>,
    /// False on open lattices, where plane waves are not eigenmodes.
    pub translation_invariant: bool,
}

/// `|phi(k)|^2` with `phi(k) = <a+_{k,up} a+_{-k,down}> / (1 - n_up(k))`.
pub fn pair_amplitude(lattice: &Lattice, gamma: &CovarianceMatrix) -> Result<PairAmplitude> {
    check_modes(lattice, gamma)?;
    let defect = gamma.purity_defect();
    if defect > 1e-8 * gamma.dim() as f64 {
        return Err(Error::NotPure(defect));
    }
    let c = Correlators::from_cm(gamma);
    // a+_k = N^{-1/2} sum_x exp(ikx) a+_x
    let f = momentum_resolve(
        lattice,
        |x, y| c.anomalous[(lattice.mode(x, Spin::Up), lattice.mode(y, Spin::Down))],
    );
    let n_up = momentum_resolve(lattice, |x, y| c.rho[(lattice.mode(x, Spin::Up), lattice.mode(y, Spin::Up))]);
    let mut values = Vec::with_capacity(f.len());
    let mut saturated = Vec::with_capacity(f.len());
    for (fk, nk) in f.iter().zip(&n_up) {
        let hole = 1.0 - nk.re;
        if hole < 1e-10 {
            values.push(0.0);
            saturated.push(true);
        } else {
            values.push((fk / hole).norm_sqr());
            saturated.push(false);
        }
    }
    Ok(PairAmplitude { values, saturated, translation_invariant: lattice.boundary == Boundary::Periodic })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalFit {
    pub tc: f64,
    pub amplitude: f64,
    pub gamma: f64,
    pub residual_norm: f64,
    pub points: usize,
}

/// Pairing below which the order parameter counts as vanished.
pub const PAIRING_FLOOR: f64 = 1e-4;

/// Fits `P = a (T_c - T)^gamma` to `(T, P)` samples with `P > PAIRING_FLOOR`.
///
/// `T_c` is bracketed between the hottest paired sample and the coolest
/// unpaired sample hotter than it; a log-linear profile over that bracket
/// seeds a Levenberg-Marquardt refinement of all three parameters.
pub fn fit_critical_exponent(series: &[(f64, f64)]) -> Result<CriticalFit> {
    let paired: Vec<(f64, f64)> = series.iter().copied().filter(|&(_, p)| p > PAIRING_FLOOR).collect();
    let t_lo = paired.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let t_hi = series
        .iter()
        .filter(|&&(t, p)| p <= PAIRING_FLOOR && t > t_lo)
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min);
    if paired.is_empty() || !t_hi.is_finite() {
        return Err(Error::NoTransition);
    }
    if paired.len() < 8 {
        return Err(Error::InsufficientData { needed: 8, found: paired.len() });
    }

    let mut best: Option<(f64, f64, f64, f64)> = None;
    let grid = 400;
    for i in 1..=grid {
        let tc = t_lo + (t_hi - t_lo) * i as f64 / grid as f64;
        let (ln_a, g) = log_linear(&paired, tc);
        let r = sum_sq(&paired, tc, ln_a.exp(), g);
        if best.map_or(true, |b| r < b.3) {
            best = Some((tc, ln_a.exp(), g, r));
        }
    }
    let (tc, a, g, _) = best.expect("non-empty grid");
    let (tc, a, g) = levenberg_marquardt(&paired, [tc, a, g], t_lo);
    let residual_norm = sum_sq(&paired, tc, a, g).sqrt();
    Ok(CriticalFit { tc, amplitude: a, gamma: g, residual_norm, points: paired.len() })
}

fn log_linear(pts: &[(f64, f64)], tc: f64) -> (f64, f64) {
    let xs: Vec<f64> = pts.iter().map(|&(t, _)| (tc - t).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|&(_, p)| p.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn sum_sq(pts: &[(f64, f64)], tc: f64, a: f64, g: f64) -> f64 {
    pts.iter()
        .map(|&(t, p)| {
            let d = tc - t;
            let model = if d > 0.0 { a * d.powf(g) } else { 0.0 };
            (model - p).powi(2)
        })
        .sum()
}

fn levenberg_marquardt(pts: &[(f64, f64)], start: [f64; 3], t_floor: f64) -> (f64, f64, f64) {
    let mut x = start;
    let mut lambda = 1e-3;
    let mut cost = sum_sq(pts, x[0], x[1], x[2]);
    for _ in 0..200 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(t, p) in pts {
            let d = x[0] - t;
            let pw = d.powf(x[2]);
            let model = x[1] * pw;
            let grad = [x[1] * x[2] * pw / d, pw, model * d.ln()];
            let r = model - p;
            for i in 0..3 {
                jtr[i] += grad[i] * r;
                for j in 0..3 {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] *= 1.0 + lambda;
            }
            let Some(delta) = solve3(a, jtr.map(|v| -v)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = [x[0] + delta[0], x[1] + delta[1], x[2] + delta[2]];
            if cand[0] <= t_floor || cand[1] <= 0.0 || cand[2] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let c = sum_sq(pts, cand[0], cand[1], cand[2]);
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                x = cand;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x[0], x[1], x[2])
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = Mat::from_fn(3, 3, |i, j| a[i][j]);
    let rhs = Mat::from_fn(3, 1, |i, _| b[i]);
    use faer::linalg::solvers::Solve;
    let x = m.partial_piv_lu().solve(&rhs);
    let out = [x[(0, 0)], x[(1, 0)], x[(2, 0)]];
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Momentum index closest to `(kx, ky)` modulo `2 pi`.
pub fn momentum_index(lattice: &Lattice, kx: f64, ky: f64) -> usize {
    let wrap = |a: f64| {
        let r = a.rem_euclid(2.0 * PI);
        r.min(2.0 * PI - r)
    };
    lattice
        .momenta()
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = wrap(a.1 .0 - kx) + wrap(a.1 .1 - ky);
            let db = wrap(b.1 .0 - kx) + wrap(b.1 .1 - ky);
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{random_mixed_cm, vacuum_cm};

    fn square(n: usize) -> Lattice {
        Lattice::new(n, n, Boundary::Periodic).unwrap()
    }

    #[test]
    fn correlator_round_trip() {
        let g = random_mixed_cm(6, 3);
        let back = Correlators::from_cm(&g).to_cm();
        assert!(crate::linalg::max_abs_diff(&g, &back) < 1e-14);
    }

    #[test]
    fn vacuum_observables() {
        let l = square(2);
        let g = vacuum_cm(8);
        assert_eq!(pairing(&g), 0.0);
        assert!(density_profile(&l, &g).unwrap().iter().all(|&n| n == 0.0));
        assert_eq!(mott_order(&l, &g).unwrap(), 0.0);
    }

    #[test]
    fn maximally_mixed_values() {
        let l = square(3);
        let g = CovarianceMatrix::zeros(18);
        assert!((af_order(&l, &g, 1, 0).unwrap() - 0.25).abs() < 1e-15);
        assert!((mott_order(&l, &g).unwrap() - 0.5).abs() < 1e-15);
        assert!((spin_correlation(&l, &g, 0, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn displacement_checked() {
        let l = square(3);
        let g = CovarianceMatrix::zeros(18);
        assert!(spin_correlation(&l, &g, 3, 0).is_err());
        let open = Lattice::new(3, 3, Boundary::Open).unwrap();
        assert!(momentum_distribution(&open, &g, Spin::Up).is_err());
    }

    #[test]
    fn synthetic_power_law() {
        let mut data = Vec::new();
        for i in 0..60 {
            let t = 0.5 + 0.01 * i as f64;
            let p = if t < 0.9 { 2.0 * (0.9 - t) } else { 0.0 };
            let noise = 1e-6 * ((i * 7919) % 13) as f64 / 13.0 - 0.5e-6;
            data.push((t, (p + noise).max(0.0)));
        }
        let fit = fit_critical_exponent(&data).unwrap();
        assert!((fit.gamma - 1.0).abs() < 0.01, "{fit:?}");
        assert!((fit.tc - 0.9).abs() < 1e-3);
    }

    #[test]
    fn fit_requires_transition() {
        let data: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(fit_critical_exponent(&data), Err(Error::NoTransition)));
    }
}
