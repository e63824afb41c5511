//! Quick oracle suite behind the `check` subcommand.

use ghf::covariance::{random_mixed_cm, random_pure_cm};
use ghf::ground::minimize_energy;
use ghf::linalg;
use ghf::model::{build_hubbard, ModelSpec};
use ghf::oracle::{
    covariance_of, direct_hubbard_fock, ed_ground, fock_hamiltonian, free_fermion_reference, gaussian_density_operator,
    rate_check_imag, rate_check_real,
};
use ghf::thermal::{gibbs_fixed_point, ThermalOptions};

use crate::error::Result;

#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn line(name: &'static str, value: f64, tol: f64) -> CheckLine {
    CheckLine { name, pass: value <= tol, detail: format!("{value:.3e} (tolerance {tol:.0e})") }
}

pub fn run_checks(seed: u64) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();

    let spec = ModelSpec { v_t: 0.3, ..ModelSpec::periodic(2, -3.0, 0.2) };
    let h = build_hubbard(&spec)?;
    let a = fock_hamiltonian(&h)?;
    let b = direct_hubbard_fock(&spec)?;
    let n = a.matrix.nrows();
    let diff = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (a.matrix[(i, j)] - b.matrix[(i, j)]).norm());
    out.push(line("majorana build vs direct Fock build", diff.fold(0.0, f64::max), 1e-12));

    let g = random_mixed_cm(4, seed);
    let rho = gaussian_density_operator(&g)?;
    out.push(line("gaussian state reproduces its covariance", linalg::max_abs_diff(&covariance_of(&rho), g.matrix()), 1e-12));

    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let g = random_pure_cm(8, seed.wrapping_add(k));
        worst = worst.max(rate_check_real(&h, &g)?).max(rate_check_imag(&h, &g)?);
    }
    out.push(line("mean-field rates vs Fock rates", worst, 1e-8));

    let h4 = build_hubbard(&ModelSpec::periodic(2, 4.0, 0.0))?;
    let (e_ed, _) = ed_ground(&fock_hamiltonian(&h4)?)?;
    let r = match minimize_energy(&h4, &random_pure_cm(8, seed), &Default::default()) {
        Ok(r) => r,
        Err(ghf::Error::GroundUnconverged(r)) => *r,
        Err(e) => return Err(e.into()),
    };
    out.push(CheckLine {
        name: "variational bound",
        pass: r.converged && r.energy >= e_ed - 1e-10,
        detail: format!("E_gHF = {:.10}, E_ED = {e_ed:.10}", r.energy),
    });

    let free = build_hubbard(&ModelSpec::periodic(4, 0.0, 0.3))?;
    let t = gibbs_fixed_point(&free, 1.0, &random_mixed_cm(32, seed), &ThermalOptions { damping: 1.0, ..Default::default() })?;
    let ff = free_fermion_reference(&free.t, Some(1.0))?;
    out.push(line("free thermal state vs one-body reference", (t.free_energy - ff.free_energy - free.e0).abs(), 1e-10));

    Ok(out)
}
