//! Real-time evolution `dG/dt = 4[h(G), G]`.
//!
//! One step maps `G -> O G O^T` with `O = exp(4 dt h_mid)`; `h_mid` is the
//! mean field of an Euler half-step predictor evaluated with the Hamiltonian
//! at `t + dt/2`. Orthogonal conjugation keeps the spectrum of `G` intact.

use std::fmt;
use std::str::FromStr;

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_hubbard, energy, mean_field, particle_number, MajoranaHamiltonian, ModelSpec};
use crate::observables::pairing;

/// Hamiltonian as a function of time.
pub trait HamiltonianSource {
    fn at(&self, t: f64) -> Result<MajoranaHamiltonian>;
    /// Value of the driven parameter, or `None` for static sources.
    fn parameter(&self, _t: f64) -> Option<f64> {
        None
    }
    fn is_static(&self) -> bool {
        false
    }
}

pub struct Static<'a>(pub &'a MajoranaHamiltonian);

impl HamiltonianSource for Static<'_> {
    fn at(&self, _t: f64) -> Result<MajoranaHamiltonian> {
        Ok(self.0.clone())
    }
    fn is_static(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RampParameter {
    U,
    VT,
    Mu,
}

impl FromStr for RampParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u" => Ok(Self::U),
            "v_t" | "vt" => Ok(Self::VT),
            "mu" => Ok(Self::Mu),
            _ => Err(Error::InvalidOption(format!("unknown ramp parameter `{s}`"))),
        }
    }
}

impl fmt::Display for RampParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::U => "u",
            Self::VT => "v_t",
            Self::Mu => "mu",
        })
    }
}

/// Linear change of one model parameter over `[0, t_final]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RampProtocol {
    pub parameter: RampParameter,
    pub start_value: f64,
    pub end_value: f64,
    pub t_final: f64,
}

impl RampProtocol {
    pub fn value_at(&self, t: f64) -> f64 {
        if self.t_final <= 0.0 {
            return self.end_value;
        }
        let s = (t / self.t_final).clamp(0.0, 1.0);
        self.start_value + s * (self.end_value - self.start_value)
    }

    fn spec_with(&self, spec: &ModelSpec, value: f64) -> ModelSpec {
        let mut out = *spec;
        match self.parameter {
            RampParameter::U => out.u = value,
            RampParameter::VT => out.v_t = value,
            RampParameter::Mu => out.mu = value,
        }
        out
    }
}

/// Ramped Hubbard model. The Majorana form is affine in `u`, `mu` and `v_t`,
/// so interpolating the two endpoint Hamiltonians is exact.
pub struct LinearRamp {
    protocol: RampProtocol,
    start: MajoranaHamiltonian,
    end: MajoranaHamiltonian,
}

impl LinearRamp {
    pub fn new(spec: &ModelSpec, protocol: RampProtocol) -> Result<Self> {
        if !(protocol.t_final >= 0.0) {
            return Err(Error::InvalidOption(format!("ramp duration must be non-negative, got {}", protocol.t_final)));
        }
        let start = build_hubbard(&protocol.spec_with(spec, protocol.start_value))?;
        let end = build_hubbard(&protocol.spec_with(spec, protocol.end_value))?;
        Ok(Self { protocol, start, end })
    }

    pub fn protocol(&self) -> &RampProtocol {
        &self.protocol
    }
}

impl HamiltonianSource for LinearRamp {
    fn at(&self, t: f64) -> Result<MajoranaHamiltonian> {
        let s = if self.protocol.t_final > 0.0 { (t / self.protocol.t_final).clamp(0.0, 1.0) } else { 1.0 };
        MajoranaHamiltonian::lerp(&self.start, &self.end, s)
    }
    fn parameter(&self, t: f64) -> Option<f64> {
        Some(self.protocol.value_at(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    /// Store an observable record every `record_stride` steps.
    pub record_stride: usize,
    /// Store a full covariance matrix every `snapshot_stride` steps (0 disables).
    pub snapshot_stride: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { dt: 0.01, record_stride: 1, snapshot_stride: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record {
    pub time: f64,
    pub energy: f64,
    pub particles: f64,
    pub pairing: f64,
    pub parameter: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub snapshots: Vec<(f64, CovarianceMatrix)>,
    pub final_gamma: Option<CovarianceMatrix>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn final_state(&self) -> &CovarianceMatrix {
        self.final_gamma.as_ref().expect("trajectory has a final state")
    }
}

fn record(src: &dyn HamiltonianSource, h: &MajoranaHamiltonian, gamma: &CovarianceMatrix, t: f64) -> Result<Record> {
    Ok(Record {
        time: t,
        energy: energy(h, gamma)?,
        particles: particle_number(gamma),
        pairing: pairing(gamma),
        parameter: src.parameter(t),
    })
}

/// Integrates from `t = 0` to `t_final` with `ceil(t_final / dt)` equal steps.
pub fn evolve(
    src: &dyn HamiltonianSource,
    gamma0: &CovarianceMatrix,
    t_final: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    evolve_from(src, gamma0, 0.0, t_final, opts)
}

fn evolve_from(
    src: &dyn HamiltonianSource,
    gamma0: &CovarianceMatrix,
    t0: f64,
    t_final: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidTimeStep(opts.dt));
    }
    if !(t_final >= 0.0) {
        return Err(Error::InvalidOption(format!("final time must be non-negative, got {t_final}")));
    }
    let norm = gamma0.spectral_norm()?;
    if norm > 1.0 + 1e-8 {
        return Err(Error::NotPhysical(norm));
    }
    let steps = if t_final > 0.0 { (t_final / opts.dt - 1e-9).ceil().max(1.0) as usize } else { 0 };
    let dt = if steps > 0 { t_final / steps as f64 } else { 0.0 };
    let record_stride = opts.record_stride.max(1);

    let mut traj = Trajectory::default();
    let mut gamma = gamma0.clone();
    let fixed = if src.is_static() { Some(src.at(t0)?) } else { None };
    let hamiltonian = |t: f64| -> Result<MajoranaHamiltonian> {
        match &fixed {
            Some(h) => Ok(h.clone()),
            None => src.at(t),
        }
    };

    let mut h_now = hamiltonian(0.0)?;
    traj.records.push(record(src, &h_now, &gamma, t0)?);
    if opts.snapshot_stride > 0 {
        traj.snapshots.push((t0, gamma.clone()));
    }
    for n in 0..steps {
        let t = n as f64 * dt;
        let h0 = mean_field(&h_now, &gamma)?;
        let mut predictor = linalg::commutator(&h0, &gamma) * faer::Scale(2.0 * dt);
        predictor += gamma.matrix();
        let h_mid_model = if fixed.is_some() { h_now.clone() } else { hamiltonian(t + 0.5 * dt)? };
        let h_mid = mean_field(&h_mid_model, &predictor)?;
        let o = linalg::expm(&(h_mid.matrix() * faer::Scale(4.0 * dt)))?;
        gamma = CovarianceMatrix::from_antisymmetrized(linalg::conjugate(&o, &gamma));
        let t_next = (n + 1) as f64 * dt;
        if fixed.is_none() {
            h_now = hamiltonian(t_next)?;
        }
        if (n + 1) % record_stride == 0 || n + 1 == steps {
            traj.records.push(record(src, &h_now, &gamma, t0 + t_next)?);
        }
        if opts.snapshot_stride > 0 && ((n + 1) % opts.snapshot_stride == 0 || n + 1 == steps) {
            traj.snapshots.push((t0 + t_next, gamma.clone()));
        }
    }
    traj.final_gamma = Some(gamma);
    Ok(traj)
}

/// Linear ramp of one parameter starting from `gamma0`.
pub fn ramp(spec: &ModelSpec, protocol: RampProtocol, gamma0: &CovarianceMatrix, opts: &EvolveOptions) -> Result<Trajectory> {
    let src = LinearRamp::new(spec, protocol)?;
    evolve(&src, gamma0, protocol.t_final, opts)
}

pub fn ramp_interaction(
    spec: &ModelSpec,
    u_start: f64,
    u_end: f64,
    t_final: f64,
    gamma0: &CovarianceMatrix,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let protocol = RampProtocol { parameter: RampParameter::U, start_value: u_start, end_value: u_end, t_final };
    ramp(spec, protocol, gamma0, opts)
}

pub fn ramp_trap(
    spec: &ModelSpec,
    v_start: f64,
    v_end: f64,
    t_final: f64,
    gamma0: &CovarianceMatrix,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let protocol = RampProtocol { parameter: RampParameter::VT, start_value: v_start, end_value: v_end, t_final };
    ramp(spec, protocol, gamma0, opts)
}

/// Consecutive ramps, each leg starting from the final state of the previous
/// one. Times are continuous across legs.
pub fn ramp_sequence(
    spec: &ModelSpec,
    legs: &[RampProtocol],
    gamma0: &CovarianceMatrix,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let mut out = Trajectory::default();
    let mut gamma = gamma0.clone();
    let mut offset = 0.0;
    for (i, leg) in legs.iter().enumerate() {
        let src = LinearRamp::new(spec, *leg)?;
        let part = evolve_from(&src, &gamma, 0.0, leg.t_final, opts)?;
        let skip = usize::from(i > 0);
        out.records.extend(part.records.iter().skip(skip).map(|r| Record { time: r.time + offset, ..*r }));
        out.snapshots
            .extend(part.snapshots.iter().skip(skip).map(|(t, g)| (t + offset, g.clone())));
        gamma = part.final_state().clone();
        offset += leg.t_final;
    }
    out.final_gamma = Some(gamma);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::random_pure_cm;

    #[test]
    fn zero_duration_ramp_is_frozen() {
        let spec = ModelSpec::periodic(2, -2.0, 0.0);
        let g = random_pure_cm(8, 4);
        let traj = ramp_interaction(&spec, -2.0, 2.0, 0.0, &g, &EvolveOptions::default()).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.final_state(), &g);
    }

    #[test]
    fn rejects_bad_step() {
        let h = build_hubbard(&ModelSpec::periodic(2, -2.0, 0.0)).unwrap();
        let opts = EvolveOptions { dt: 0.0, ..Default::default() };
        let r = evolve(&Static(&h), &random_pure_cm(8, 1), 1.0, &opts);
        assert!(matches!(r, Err(Error::InvalidTimeStep(_))));
    }

    #[test]
    fn ramp_endpoints_match_built_models() {
        let spec = ModelSpec::periodic(2, -2.0, 0.5);
        let p = RampProtocol { parameter: RampParameter::U, start_value: -2.0, end_value: 3.0, t_final: 4.0 };
        let src = LinearRamp::new(&spec, p).unwrap();
        let mid = src.at(2.0).unwrap();
        let direct = build_hubbard(&ModelSpec { u: 0.5, ..spec }).unwrap();
        assert!(linalg::max_abs_diff(&mid.t, &direct.t) < 1e-14);
        assert!((mid.e0 - direct.e0).abs() < 1e-14);
        let g = random_pure_cm(8, 2);
        let e1 = energy(&mid, &g).unwrap();
        let e2 = energy(&direct, &g).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn static_evolution_preserves_purity() {
        let h = build_hubbard(&ModelSpec::periodic(2, -4.0, 0.3)).unwrap();
        let g = random_pure_cm(8, 6);
        let traj = evolve(&Static(&h), &g, 1.0, &EvolveOptions::default()).unwrap();
        assert!(traj.final_state().is_pure(1e-9));
        assert_eq!(traj.records.len(), 101);
    }
}
