//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use ghf::dynamics::{EvolveOptions, RampParameter, RampProtocol};
use ghf::ground::GroundOptions;
use ghf::lattice::Boundary;
use ghf::model::{InteractionForm, ModelSpec};
use ghf::thermal::ThermalOptions;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ground,
    Thermal,
    Anneal,
    Dynamics,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub model: ModelSection,
    #[serde(default)]
    pub start: StartSection,
    #[serde(default)]
    pub ground: GroundSection,
    #[serde(default)]
    pub thermal: ThermalSection,
    #[serde(default)]
    pub anneal: AnnealSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub observables: Vec<Observable>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub allow_unconverged: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_h: usize,
    pub n_v: usize,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryName,
    #[serde(default = "one")]
    pub t: f64,
    pub u: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub v_t: f64,
    #[serde(default = "default_form")]
    pub interaction_form: FormName,
}

fn one() -> f64 {
    1.0
}

fn default_boundary() -> BoundaryName {
    BoundaryName::Periodic
}

fn default_form() -> FormName {
    FormName::Symmetric
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormName {
    Symmetric,
    Plain,
}

impl ModelSection {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            n_h: self.n_h,
            n_v: self.n_v,
            boundary: match self.boundary {
                BoundaryName::Periodic => Boundary::Periodic,
                BoundaryName::Open => Boundary::Open,
            },
            t: self.t,
            u: self.u,
            mu: self.mu,
            v_t: self.v_t,
            interaction_form: match self.interaction_form {
                FormName::Symmetric => InteractionForm::Symmetric,
                FormName::Plain => InteractionForm::Plain,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    /// Random pure state.
    Random,
    /// Random mixed state.
    Mixed,
    /// Ground state of the one-body part plus a uniform pairing field.
    Paired,
    /// Random number-conserving Slater determinant.
    Slater,
    /// Maximally mixed state.
    Zero,
    Checkpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSection {
    pub kind: Option<StartKind>,
    #[serde(default = "half")]
    pub delta: f64,
    /// Slater particle number; half filling when absent.
    pub particles: Option<usize>,
    pub checkpoint: Option<PathBuf>,
}

fn half() -> f64 {
    0.5
}

impl Default for StartSection {
    fn default() -> Self {
        Self { kind: None, delta: 0.5, particles: None, checkpoint: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundSection {
    pub dtau: f64,
    pub residual_tol: f64,
    pub max_steps: usize,
    pub reorthogonalize_every: usize,
}

impl Default for GroundSection {
    fn default() -> Self {
        let d = GroundOptions::default();
        Self {
            dtau: d.dtau,
            residual_tol: d.residual_tol,
            max_steps: d.max_steps,
            reorthogonalize_every: d.reorthogonalize_every,
        }
    }
}

impl GroundSection {
    pub fn options(&self) -> GroundOptions {
        GroundOptions {
            dtau: self.dtau,
            residual_tol: self.residual_tol,
            max_steps: self.max_steps,
            reorthogonalize_every: self.reorthogonalize_every,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalSection {
    pub beta: Vec<f64>,
    pub damping: f64,
    pub fixed_point_tol: f64,
    pub max_iters: usize,
}

impl Default for ThermalSection {
    fn default() -> Self {
        let d = ThermalOptions::default();
        Self { beta: Vec::new(), damping: d.damping, fixed_point_tol: d.fixed_point_tol, max_iters: d.max_iters }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSection {
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_step: f64,
    /// Run the ground flow on the start state before annealing.
    pub from_ground: bool,
}

impl Default for AnnealSection {
    fn default() -> Self {
        Self { beta_start: 1.0, beta_end: 0.01, beta_step: ThermalOptions::default().beta_step, from_ground: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampName {
    None,
    U,
    #[serde(rename = "v_t")]
    VT,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Leg {
    pub start: f64,
    pub end: f64,
    pub t_final: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub snapshot_stride: usize,
    pub parameter: RampName,
    pub legs: Vec<Leg>,
    /// Prepare the initial state as a ground state before evolving.
    pub prepare_ground: bool,
    /// Interaction used for the preparation, for quenches.
    pub prepare_u: Option<f64>,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        let d = EvolveOptions::default();
        Self {
            dt: d.dt,
            t_final: 10.0,
            record_stride: d.record_stride,
            snapshot_stride: 0,
            parameter: RampName::None,
            legs: Vec::new(),
            prepare_ground: true,
            prepare_u: None,
        }
    }
}

impl DynamicsSection {
    pub fn options(&self) -> EvolveOptions {
        EvolveOptions { dt: self.dt, record_stride: self.record_stride, snapshot_stride: self.snapshot_stride }
    }

    pub fn protocols(&self) -> Vec<RampProtocol> {
        let parameter = match self.parameter {
            RampName::U => RampParameter::U,
            RampName::VT => RampParameter::VT,
            RampName::None => return Vec::new(),
        };
        self.legs
            .iter()
            .map(|l| RampProtocol { parameter, start_value: l.start, end_value: l.end, t_final: l.t_final })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Ground,
    Thermal,
    Anneal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub mode: SweepMode,
    pub u: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { mode: SweepMode::Ground, u: Vec::new(), mu: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub checkpoint: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("ghf-out"), checkpoint: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Local moment `C(0,0)`.
    LocalMoment,
    /// Nearest-neighbour `A(1)`.
    AfOrder,
    MottOrder,
    /// `S(pi, pi)`.
    StructurePiPi,
    /// Spin-up `n(pi, 0)`.
    #[serde(rename = "momentum_pi_0")]
    MomentumPi0,
}

impl Observable {
    pub fn column(self) -> &'static str {
        match self {
            Observable::LocalMoment => "local_moment",
            Observable::AfOrder => "af_order",
            Observable::MottOrder => "mott_order",
            Observable::StructurePiPi => "structure_pi_pi",
            Observable::MomentumPi0 => "momentum_pi_0",
        }
    }

    fn needs_periodic(self) -> bool {
        matches!(self, Observable::StructurePiPi | Observable::MomentumPi0 | Observable::LocalMoment | Observable::AfOrder)
    }
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.to_string(), message: message.into() }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks mode-specific requirements; the message names the offending key.
    pub fn validate(&self, mode: Mode) -> Result<()> {
        let m = &self.model;
        if m.n_h < 2 {
            return Err(invalid("model.n_h", "must be at least 2"));
        }
        if m.n_v < 2 {
            return Err(invalid("model.n_v", "must be at least 2"));
        }
        for (key, v) in [("model.t", m.t), ("model.u", m.u), ("model.mu", m.mu), ("model.v_t", m.v_t)] {
            if !v.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "needs at least one seed"));
        }
        if m.boundary != BoundaryName::Periodic {
            if let Some(o) = self.observables.iter().find(|o| o.needs_periodic()) {
                return Err(invalid("observables", format!("{} requires a periodic lattice", o.column())));
            }
        }
        if self.start.kind == Some(StartKind::Checkpoint) && self.start.checkpoint.is_none() {
            return Err(invalid("start.checkpoint", "required when start.kind = \"checkpoint\""));
        }
        if !(self.start.delta.is_finite()) {
            return Err(invalid("start.delta", "must be finite"));
        }
        if let Some(p) = self.start.particles {
            if p > 2 * m.n_h * m.n_v {
                return Err(invalid("start.particles", "exceeds the number of modes"));
            }
        }
        let g = &self.ground;
        if !(g.dtau > 0.0) {
            return Err(invalid("ground.dtau", "must be positive"));
        }
        if !(g.residual_tol > 0.0) {
            return Err(invalid("ground.residual_tol", "must be positive"));
        }
        let t = &self.thermal;
        if !(t.damping > 0.0 && t.damping <= 1.0) {
            return Err(invalid("thermal.damping", "must lie in (0, 1]"));
        }
        if !(t.fixed_point_tol > 0.0) {
            return Err(invalid("thermal.fixed_point_tol", "must be positive"));
        }
        let needs_beta =
            mode == Mode::Thermal || (mode == Mode::Sweep && self.sweep.mode == SweepMode::Thermal);
        if needs_beta && t.beta.is_empty() {
            return Err(invalid("thermal.beta", "needs at least one inverse temperature"));
        }
        if let Some(b) = t.beta.iter().find(|b| !(**b > 0.0)) {
            return Err(invalid("thermal.beta", format!("inverse temperatures must be positive, got {b}")));
        }
        let a = &self.anneal;
        if !(a.beta_step > 0.0) {
            return Err(invalid("anneal.beta_step", "must be positive"));
        }
        if !(a.beta_start > 0.0) {
            return Err(invalid("anneal.beta_start", "must be positive"));
        }
        if !(a.beta_end >= 0.0) {
            return Err(invalid("anneal.beta_end", "must be non-negative"));
        }
        if mode == Mode::Dynamics {
            let d = &self.dynamics;
            if !(d.dt > 0.0) {
                return Err(invalid("dynamics.dt", "must be positive"));
            }
            if d.record_stride == 0 {
                return Err(invalid("dynamics.record_stride", "must be at least 1"));
            }
            match d.parameter {
                RampName::None if !(d.t_final > 0.0) => {
                    return Err(invalid("dynamics.t_final", "must be positive"));
                }
                RampName::None if !d.legs.is_empty() => {
                    return Err(invalid("dynamics.legs", "legs need dynamics.parameter = \"u\" or \"v_t\""));
                }
                RampName::U | RampName::VT if d.legs.is_empty() => {
                    return Err(invalid("dynamics.legs", "a ramp needs at least one leg"));
                }
                _ => {}
            }
            if let Some(l) = d.legs.iter().find(|l| !(l.t_final > 0.0)) {
                return Err(invalid("dynamics.legs", format!("leg durations must be positive, got {}", l.t_final)));
            }
        }
        if mode == Mode::Sweep {
            if self.sweep.u.is_empty() && self.sweep.mu.is_empty() {
                return Err(invalid("sweep.u", "a sweep needs values for sweep.u or sweep.mu"));
            }
        }
        Ok(())
    }
}
