//! Execution of a validated configuration.

use std::f64::consts::PI;
use std::path::Path;

use ghf::covariance::{random_mixed_cm, random_pure_cm, random_slater_cm};
use ghf::dynamics::{evolve, ramp_sequence, Static, Trajectory};
use ghf::ground::{minimize_energy, paired_seed, GroundResult};
use ghf::lattice::Spin;
use ghf::model::{build_hubbard, MajoranaHamiltonian, ModelSpec};
use ghf::observables::{
    af_order, magnetic_structure_factor, momentum_distribution, momentum_index, mott_order, pairing, spin_correlation,
};
use ghf::thermal::{beta_grid, gibbs_fixed_point, ThermalOptions};
use ghf::CovarianceMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::{checkpoint_read, checkpoint_write, CheckpointHeader};
use crate::config::{Mode, Observable, RampName, RunConfig, StartKind, SweepMode};
use crate::error::{CliError, Result};

/// Fixed leading columns of every results file.
pub const BASE_COLUMNS: [&str; 17] = [
    "mode",
    "seed",
    "n_h",
    "n_v",
    "u",
    "mu",
    "v_t",
    "beta",
    "time",
    "energy",
    "entropy",
    "free_energy",
    "particles",
    "pairing",
    "residual",
    "iterations",
    "converged",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub mode: &'static str,
    pub seed: u64,
    pub n_h: usize,
    pub n_v: usize,
    pub u: f64,
    pub mu: f64,
    pub v_t: f64,
    pub beta: Option<f64>,
    pub time: Option<f64>,
    pub energy: f64,
    pub entropy: Option<f64>,
    pub free_energy: Option<f64>,
    pub particles: f64,
    pub pairing: f64,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub observables: Vec<Option<f64>>,
}

impl Row {
    fn new(mode: &'static str, spec: &ModelSpec, seed: u64) -> Self {
        Self {
            mode,
            seed,
            n_h: spec.n_h,
            n_v: spec.n_v,
            u: spec.u,
            mu: spec.mu,
            v_t: spec.v_t,
            beta: None,
            time: None,
            energy: 0.0,
            entropy: None,
            free_energy: None,
            particles: 0.0,
            pairing: 0.0,
            residual: None,
            iterations: None,
            converged: true,
            observables: Vec::new(),
        }
    }

    pub fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = vec![
            self.mode.to_string(),
            self.seed.to_string(),
            self.n_h.to_string(),
            self.n_v.to_string(),
            self.u.to_string(),
            self.mu.to_string(),
            self.v_t.to_string(),
            opt(self.beta),
            opt(self.time),
            self.energy.to_string(),
            opt(self.entropy),
            opt(self.free_energy),
            self.particles.to_string(),
            self.pairing.to_string(),
            opt(self.residual),
            self.iterations.map(|i| i.to_string()).unwrap_or_default(),
            self.converged.to_string(),
        ];
        out.extend(self.observables.iter().map(|v| opt(*v)));
        out
    }
}

/// Final state of one run, kept for checkpoints and the summary.
#[derive(Clone, Debug)]
pub struct FinalState {
    pub label: String,
    pub spec: ModelSpec,
    pub seed: u64,
    pub gamma: CovarianceMatrix,
    pub energy: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub seed: u64,
    pub u: f64,
    pub mu: f64,
    pub v_t: f64,
    pub energy: f64,
    pub pairing: f64,
    pub particles: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub runs: usize,
    pub rows: usize,
    pub unconverged: usize,
    pub allow_unconverged: bool,
    pub columns: Vec<String>,
    pub results: Vec<RunSummary>,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub states: Vec<FinalState>,
    pub unconverged: usize,
}

impl Outcome {
    pub fn summary(&self, mode: Mode, config: &RunConfig) -> Summary {
        Summary {
            mode,
            runs: self.states.len(),
            rows: self.rows.len(),
            unconverged: self.unconverged,
            allow_unconverged: config.allow_unconverged,
            columns: self.columns.clone(),
            results: self
                .states
                .iter()
                .map(|s| RunSummary {
                    label: s.label.clone(),
                    seed: s.seed,
                    u: s.spec.u,
                    mu: s.spec.mu,
                    v_t: s.spec.v_t,
                    energy: s.energy,
                    pairing: pairing(&s.gamma),
                    particles: ghf::model::particle_number(&s.gamma),
                    converged: s.converged,
                })
                .collect(),
            config: config.clone(),
        }
    }
}

pub fn columns(config: &RunConfig) -> Vec<String> {
    BASE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(config.observables.iter().map(|o| o.column().to_string()))
        .collect()
}

#[derive(Default)]
struct Partial {
    rows: Vec<Row>,
    states: Vec<FinalState>,
    unconverged: usize,
}

fn observe(config: &RunConfig, spec: &ModelSpec, gamma: &CovarianceMatrix) -> Result<Vec<Option<f64>>> {
    let lattice = spec.lattice()?;
    config
        .observables
        .iter()
        .map(|o| {
            Ok(Some(match o {
                Observable::LocalMoment => spin_correlation(&lattice, gamma, 0, 0)?,
                Observable::AfOrder => af_order(&lattice, gamma, 1, 0)?,
                Observable::MottOrder => mott_order(&lattice, gamma)?,
                Observable::StructurePiPi => {
                    magnetic_structure_factor(&lattice, gamma)?.values[momentum_index(&lattice, PI, PI)]
                }
                Observable::MomentumPi0 => {
                    momentum_distribution(&lattice, gamma, Spin::Up)?[momentum_index(&lattice, PI, 0.0)]
                }
            }))
        })
        .collect()
}

fn start_state(config: &RunConfig, spec: &ModelSpec, seed: u64, default: StartKind) -> Result<CovarianceMatrix> {
    let modes = spec.modes();
    let s = &config.start;
    Ok(match s.kind.unwrap_or(default) {
        StartKind::Random => random_pure_cm(modes, seed),
        StartKind::Mixed => random_mixed_cm(modes, seed),
        StartKind::Paired => paired_seed(spec, s.delta)?,
        StartKind::Slater => random_slater_cm(modes, s.particles.unwrap_or(modes / 2), seed)?,
        StartKind::Zero => CovarianceMatrix::zeros(modes),
        StartKind::Checkpoint => {
            let path = s.checkpoint.as_deref().expect("validated");
            let (_, gamma) = checkpoint_read(path)?;
            if gamma.modes() != modes {
                return Err(CliError::Config {
                    key: "start.checkpoint".into(),
                    message: format!("checkpoint has {} modes, model needs {modes}", gamma.modes()),
                });
            }
            gamma
        }
    })
}

fn flow(config: &RunConfig, h: &MajoranaHamiltonian, g0: &CovarianceMatrix) -> Result<GroundResult> {
    match minimize_energy(h, g0, &config.ground.options()) {
        Ok(r) => Ok(r),
        Err(ghf::Error::GroundUnconverged(r)) => {
            log::warn!("ground flow unconverged after {} steps, residual {:.3e}", r.steps, r.residual);
            Ok(*r)
        }
        Err(e) => Err(e.into()),
    }
}

fn run_ground(config: &RunConfig, spec: &ModelSpec, seed: u64) -> Result<Partial> {
    let h = build_hubbard(spec)?;
    let r = flow(config, &h, &start_state(config, spec, seed, StartKind::Random)?)?;
    let mut row = Row::new("ground", spec, seed);
    row.energy = r.energy;
    row.particles = ghf::model::particle_number(&r.gamma);
    row.pairing = pairing(&r.gamma);
    row.residual = Some(r.residual);
    row.iterations = Some(r.steps);
    row.converged = r.converged;
    row.observables = observe(config, spec, &r.gamma)?;
    Ok(Partial {
        rows: vec![row],
        unconverged: usize::from(!r.converged),
        states: vec![FinalState {
            label: "ground".into(),
            spec: *spec,
            seed,
            energy: r.energy,
            converged: r.converged,
            gamma: r.gamma,
        }],
    })
}

fn thermal_options(config: &RunConfig) -> ThermalOptions {
    let t = &config.thermal;
    ThermalOptions {
        damping: t.damping,
        fixed_point_tol: t.fixed_point_tol,
        max_iters: t.max_iters,
        beta_step: config.anneal.beta_step,
    }
}

fn thermal_row(
    config: &RunConfig,
    mode: &'static str,
    spec: &ModelSpec,
    seed: u64,
    r: &ghf::thermal::ThermalResult,
) -> Result<Row> {
    let mut row = Row::new(mode, spec, seed);
    row.beta = Some(r.beta);
    row.energy = r.energy;
    row.entropy = Some(r.entropy);
    row.free_energy = Some(r.free_energy);
    row.particles = ghf::model::particle_number(&r.gamma);
    row.pairing = pairing(&r.gamma);
    row.residual = Some(r.residual);
    row.iterations = Some(r.iters);
    row.converged = r.converged;
    row.observables = observe(config, spec, &r.gamma)?;
    Ok(row)
}

fn run_thermal(config: &RunConfig, spec: &ModelSpec, seed: u64) -> Result<Partial> {
    let h = build_hubbard(spec)?;
    let g0 = start_state(config, spec, seed, StartKind::Mixed)?;
    let opts = thermal_options(config);
    let mut out = Partial::default();
    for &beta in &config.thermal.beta {
        let r = gibbs_fixed_point(&h, beta, &g0, &opts)?;
        out.rows.push(thermal_row(config, "thermal", spec, seed, &r)?);
        out.unconverged += usize::from(!r.converged);
        out.states.push(FinalState {
            label: format!("thermal_b{beta}"),
            spec: *spec,
            seed,
            energy: r.energy,
            converged: r.converged,
            gamma: r.gamma,
        });
    }
    Ok(out)
}

fn run_anneal(config: &RunConfig, spec: &ModelSpec, seed: u64) -> Result<Partial> {
    let h = build_hubbard(spec)?;
    let mut out = Partial::default();
    let mut gamma = start_state(config, spec, seed, StartKind::Random)?;
    if config.anneal.from_ground {
        let g = flow(config, &h, &gamma)?;
        if !g.converged {
            out.unconverged += 1;
            if !config.allow_unconverged {
                return Ok(out);
            }
        }
        gamma = g.gamma;
    }
    let opts = thermal_options(config);
    let a = &config.anneal;
    let mut last = None;
    for beta in beta_grid(a.beta_start, a.beta_end, a.beta_step).into_iter().filter(|&b| b > 0.0) {
        let r = gibbs_fixed_point(&h, beta, &gamma, &opts)?;
        out.rows.push(thermal_row(config, "anneal", spec, seed, &r)?);
        gamma = r.gamma.clone();
        let converged = r.converged;
        last = Some(r);
        if !converged {
            out.unconverged += 1;
            log::warn!("anneal: fixed point unconverged at beta = {beta}");
            if !config.allow_unconverged {
                break;
            }
        }
    }
    if let Some(r) = last {
        out.states.push(FinalState {
            label: format!("anneal_b{}", r.beta),
            spec: *spec,
            seed,
            energy: r.energy,
            converged: r.converged,
            gamma: r.gamma,
        });
    }
    Ok(out)
}

fn run_dynamics(config: &RunConfig, spec: &ModelSpec, seed: u64) -> Result<Partial> {
    let d = &config.dynamics;
    let legs = d.protocols();
    let mut prep = *spec;
    if let Some(first) = d.legs.first() {
        match d.parameter {
            RampName::U => prep.u = first.start,
            RampName::VT => prep.v_t = first.start,
            RampName::None => {}
        }
    }
    if let Some(u) = d.prepare_u {
        prep.u = u;
    }
    let mut out = Partial::default();
    let mut gamma = start_state(config, &prep, seed, StartKind::Random)?;
    if d.prepare_ground {
        let g = flow(config, &build_hubbard(&prep)?, &gamma)?;
        if !g.converged {
            out.unconverged += 1;
            if !config.allow_unconverged {
                return Ok(out);
            }
        }
        gamma = g.gamma;
    }
    let traj: Trajectory = if legs.is_empty() {
        evolve(&Static(&build_hubbard(spec)?), &gamma, d.t_final, &d.options())?
    } else {
        let mut base = *spec;
        base.u = prep.u;
        base.v_t = prep.v_t;
        ramp_sequence(&base, &legs, &gamma, &d.options())?
    };
    let mut final_spec = *spec;
    for r in &traj.records {
        let mut s = *spec;
        match (d.parameter, r.parameter) {
            (RampName::U, Some(p)) => s.u = p,
            (RampName::VT, Some(p)) => s.v_t = p,
            _ => {}
        }
        final_spec = s;
        let mut row = Row::new("dynamics", &s, seed);
        row.time = Some(r.time);
        row.energy = r.energy;
        row.particles = r.particles;
        row.pairing = r.pairing;
        row.observables = vec![None; config.observables.len()];
        out.rows.push(row);
    }
    for (t, g) in &traj.snapshots {
        out.states.push(FinalState {
            label: format!("dynamics_t{t}"),
            spec: final_spec,
            seed,
            energy: f64::NAN,
            converged: true,
            gamma: g.clone(),
        });
    }
    let last = traj.records.last().map(|r| r.energy).unwrap_or(f64::NAN);
    out.states.push(FinalState {
        label: "dynamics_final".into(),
        spec: final_spec,
        seed,
        energy: last,
        converged: true,
        gamma: traj.final_state().clone(),
    });
    Ok(out)
}

fn run_point(config: &RunConfig, mode: Mode, spec: &ModelSpec) -> Result<Partial> {
    let mut out = Partial::default();
    for &seed in &config.seeds {
        let part = match mode {
            Mode::Ground => run_ground(config, spec, seed)?,
            Mode::Thermal => run_thermal(config, spec, seed)?,
            Mode::Anneal => run_anneal(config, spec, seed)?,
            Mode::Dynamics => run_dynamics(config, spec, seed)?,
            Mode::Sweep => unreachable!("sweeps expand into points"),
        };
        out.rows.extend(part.rows);
        out.states.extend(part.states);
        out.unconverged += part.unconverged;
    }
    Ok(out)
}

/// Runs every point of the configuration. Sweep points are distributed over
/// the current rayon pool; results do not depend on its size.
pub fn execute(config: &RunConfig, mode: Mode) -> Result<Outcome> {
    config.validate(mode)?;
    let base = config.model.spec();
    let (point_mode, points) = match mode {
        Mode::Sweep => {
            let us = if config.sweep.u.is_empty() { vec![base.u] } else { config.sweep.u.clone() };
            let mus = if config.sweep.mu.is_empty() { vec![base.mu] } else { config.sweep.mu.clone() };
            let pts: Vec<ModelSpec> =
                us.iter().flat_map(|&u| mus.iter().map(move |&mu| ModelSpec { u, mu, ..base })).collect();
            let m = match config.sweep.mode {
                SweepMode::Ground => Mode::Ground,
                SweepMode::Thermal => Mode::Thermal,
                SweepMode::Anneal => Mode::Anneal,
            };
            (m, pts)
        }
        m => (m, vec![base]),
    };
    // Rows keep run order within a point; points are ordered by (u, mu) so output
    // does not depend on the worker count or the order of the sweep lists.
    let mut points = points;
    points.sort_by(|a, b| a.u.total_cmp(&b.u).then(a.mu.total_cmp(&b.mu)));
    let parts: Vec<Result<Partial>> = points.par_iter().map(|spec| run_point(config, point_mode, spec)).collect();
    let mut rows = Vec::new();
    let mut states = Vec::new();
    let mut unconverged = 0;
    for p in parts {
        let p = p?;
        rows.extend(p.rows);
        states.extend(p.states);
        unconverged += p.unconverged;
    }
    Ok(Outcome { columns: columns(config), rows, states, unconverged })
}

pub fn write_csv(outcome: &Outcome, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&outcome.columns).map_err(io)?;
    for r in &outcome.rows {
        w.write_record(r.fields()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn file_label(s: &FinalState) -> String {
    format!("{}_u{}_mu{}_vt{}_s{}.ghfcm", s.label, s.spec.u, s.spec.mu, s.spec.v_t, s.seed)
}

/// Writes `results.csv`, `summary.json` and, when enabled, one checkpoint per
/// final state. Fails with [`CliError::Unconverged`] after writing when a
/// solver did not converge and the configuration does not allow it.
pub fn write_outputs(config: &RunConfig, mode: Mode, outcome: &Outcome) -> Result<()> {
    let dir = &config.output.directory;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write_csv(outcome, &dir.join("results.csv"))?;
    let summary = serde_json::to_string_pretty(&outcome.summary(mode, config)).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), summary)?;
    if config.output.checkpoint {
        for s in &outcome.states {
            checkpoint_write(&s.gamma, &CheckpointHeader::for_spec(&s.spec), &dir.join(file_label(s)))?;
        }
    }
    if outcome.unconverged > 0 && !config.allow_unconverged {
        return Err(CliError::Unconverged(outcome.unconverged));
    }
    Ok(())
}
