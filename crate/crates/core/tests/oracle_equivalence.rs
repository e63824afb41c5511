use faer::c64;
use ghf::covariance::{
    ground_cm, majorana_expectation, random_mixed_cm, random_pure_cm, random_slater_cm, tanh_gibbs, vacuum_cm,
    wick_2p, wick_four, CovarianceMatrix,
};
use ghf::ground::{minimize_energy, GroundOptions};
use ghf::lattice::Boundary;
use ghf::linalg;
use ghf::model::{build_hubbard, energy, FermionOperator, InteractionForm, MajoranaHamiltonian, ModelSpec};
use ghf::oracle::*;

fn spec2(u: f64, mu: f64) -> ModelSpec {
    ModelSpec::periodic(2, u, mu)
}

fn max_entry_diff(a: &FockOperator, b: &FockOperator) -> f64 {
    let d = a.dim();
    let mut worst = 0.0f64;
    for j in 0..d {
        for i in 0..d {
            worst = worst.max((a.matrix[(i, j)] - b.matrix[(i, j)]).norm());
        }
    }
    worst
}

#[test]
fn majorana_matrices_satisfy_car() {
    for m in 1..=6 {
        let ops: Vec<FockOperator> = (0..2 * m).map(|k| majorana_word_operator(&[k], m).unwrap()).collect();
        for k in 0..2 * m {
            assert!(ops[k].hermiticity_error() < 1e-15);
            for l in 0..2 * m {
                let ac = &ops[k].mul(&ops[l]).matrix + &ops[l].mul(&ops[k]).matrix;
                let d = 1usize << m;
                for i in 0..d {
                    for j in 0..d {
                        let expected = if i == j && k == l { 2.0 } else { 0.0 };
                        assert!((ac[(i, j)] - c64::new(expected, 0.0)).norm() < 1e-15);
                    }
                }
            }
        }
    }
}

#[test]
fn majorana_build_matches_direct_construction() {
    let specs = [
        spec2(-4.0, 0.0),
        spec2(3.0, 0.7),
        ModelSpec { t: -0.6, ..spec2(1.5, -0.4) },
        ModelSpec { boundary: Boundary::Open, v_t: 0.3, ..spec2(-2.0, 0.5) },
        ModelSpec { interaction_form: InteractionForm::Plain, v_t: 0.2, ..spec2(-6.0, 3.0) },
    ];
    for spec in specs {
        let a = fock_hamiltonian(&build_hubbard(&spec).unwrap()).unwrap();
        let b = direct_hubbard_fock(&spec).unwrap();
        assert!(max_entry_diff(&a, &b) < 1e-12, "{spec:?}");
        assert!(a.hermiticity_error() < 1e-12);
    }
}

#[test]
fn free_spectrum_from_one_body_levels() {
    let spec = spec2(0.0, 0.3);
    let h = build_hubbard(&spec).unwrap();
    let (e_ed, _) = ed_ground(&fock_hamiltonian(&h).unwrap()).unwrap();
    let ff = free_fermion_reference(&h.t, None).unwrap();
    assert!((e_ed - (ff.energy + h.e0)).abs() < 1e-12);
    // Tight-binding: eps(k) = 2t(cos kx + cos ky) + mu, two spin species.
    let lattice = spec.lattice().unwrap();
    let tb: f64 = lattice
        .momenta()
        .iter()
        .map(|&(kx, ky)| 2.0 * (kx.cos() + ky.cos()) + spec.mu)
        .filter(|&e| e < 0.0)
        .sum::<f64>()
        * 2.0;
    assert!((e_ed - tb).abs() < 1e-12, "{e_ed} vs {tb}");
}

#[test]
fn single_site_four_levels() {
    let (u, mu) = (-2.5, 0.4);
    let mut op = FermionOperator::new(2);
    op.add_density_density(u, 0, 1);
    op.add_number(mu, 0);
    op.add_number(mu, 1);
    let h = MajoranaHamiltonian::from_operator(&op).unwrap();
    let f = fock_hamiltonian(&h).unwrap();
    let mut diag: Vec<f64> = (0..4).map(|i| f.matrix[(i, i)].re).collect();
    diag.sort_by(f64::total_cmp);
    let mut expected = vec![0.0, mu, mu, u + 2.0 * mu];
    expected.sort_by(f64::total_cmp);
    for (a, b) in diag.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!(max_entry_diff(&f, &FockOperator { modes: 2, matrix: faer::Mat::from_fn(4, 4, |i, j| if i == j { f.matrix[(i, i)] } else { c64::new(0.0, 0.0) }) }) < 1e-15);
}

#[test]
fn energy_matches_density_operator_trace() {
    let h = build_hubbard(&ModelSpec { v_t: 0.1, ..spec2(-3.0, 0.2) }).unwrap();
    let hf = fock_hamiltonian(&h).unwrap();
    for seed in 0..3 {
        for g in [random_pure_cm(8, seed), random_mixed_cm(8, seed + 10)] {
            let rho = gaussian_density_operator(&g).unwrap();
            let exact = hf.mul(&rho).trace();
            let e = energy(&h, &g).unwrap();
            assert!((exact.re - e).abs() < 1e-10 && exact.im.abs() < 1e-10, "{} {}", exact, e);
        }
    }
}

#[test]
fn vacuum_expectation_of_four_majoranas() {
    let m = 3;
    let g = vacuum_cm(m);
    let rho = gaussian_density_operator(&g).unwrap();
    let word = [0, m, 1, 1 + m];
    let exact = rho.trace_with_word(&word);
    let wick = wick_four(&g, word[0], word[1], word[2], word[3]).unwrap();
    assert!((exact - wick).norm() < 1e-12);
}

#[test]
fn wick_four_matches_fock_space() {
    for (seed, g) in [(1, random_pure_cm(4, 1)), (2, random_mixed_cm(4, 2)), (3, random_mixed_cm(3, 3))] {
        let rho = gaussian_density_operator(&g).unwrap();
        let n = g.dim();
        for i in 0..n {
            for j in 0..n {
                for k in (0..n).step_by(2) {
                    for l in (1..n).step_by(3) {
                        let exact = rho.trace_with_word(&[i, j, k, l]);
                        let wick = wick_four(&g, i, j, k, l).unwrap();
                        assert!((exact - wick).norm() < 1e-9, "seed {seed} ({i},{j},{k},{l}) {exact} {wick}");
                    }
                }
            }
        }
    }
}

#[test]
fn wick_six_point_on_vacuum_and_random_state() {
    for g in [vacuum_cm(4), random_mixed_cm(4, 8)] {
        let rho = gaussian_density_operator(&g).unwrap();
        for word in [[0, 1, 2, 4, 5, 6], [0, 3, 4, 5, 6, 7], [1, 2, 3, 5, 6, 7]] {
            let exact = rho.trace_with_word(&word);
            let wick = wick_2p(&g, &word).unwrap();
            assert!((exact - wick).norm() < 1e-10, "{word:?}: {exact} vs {wick}");
        }
    }
}

#[test]
fn general_words_match_fock_space() {
    let g = random_mixed_cm(3, 21);
    let rho = gaussian_density_operator(&g).unwrap();
    for word in [vec![4, 1], vec![2, 2, 5, 0], vec![5, 3, 1, 0, 2, 4], vec![1, 3, 1]] {
        let exact = rho.trace_with_word(&word);
        let wick = majorana_expectation(&g, &word).unwrap();
        assert!((exact - wick).norm() < 1e-10, "{word:?}");
    }
}

#[test]
fn rate_equations_pure_states() {
    let h = build_hubbard(&spec2(-4.0, 0.3)).unwrap();
    for seed in 0..3 {
        let g = random_pure_cm(8, 100 + seed);
        assert!(rate_check_real(&h, &g).unwrap() < 1e-8);
        assert!(rate_check_imag(&h, &g).unwrap() < 1e-8);
    }
}

#[test]
fn real_rate_mixed_states() {
    let h = build_hubbard(&spec2(2.0, -0.3)).unwrap();
    for seed in 0..2 {
        assert!(rate_check_real(&h, &random_mixed_cm(8, 200 + seed)).unwrap() < 1e-8);
    }
}

#[test]
fn quadratic_rates_exact() {
    let h = build_hubbard(&spec2(0.0, 0.45)).unwrap();
    let g = random_mixed_cm(8, 5);
    assert!(rate_check_real(&h, &g).unwrap() < 1e-10);
    let p = random_pure_cm(8, 6);
    assert!(rate_check_imag(&h, &p).unwrap() < 1e-10);
}

#[test]
fn rate_checks_enforce_size_limit() {
    let h = build_hubbard(&ModelSpec::periodic(3, -1.0, 0.0)).unwrap();
    let g = random_pure_cm(18, 1);
    assert!(matches!(rate_check_real(&h, &g), Err(ghf::Error::TooManyModes { .. })));
}

#[test]
fn variational_bound_holds() {
    for u in [-4.0, -1.0, 2.0, 4.0] {
        let h = build_hubbard(&spec2(u, 0.1)).unwrap();
        let (e_ed, _) = ed_ground(&fock_hamiltonian(&h).unwrap()).unwrap();
        let r = minimize_energy(&h, &random_pure_cm(8, 3), &GroundOptions::default()).unwrap();
        assert!(r.energy >= e_ed - 1e-10, "u = {u}: {} < {e_ed}", r.energy);
    }
}

#[test]
fn free_fermion_reference_matches_tanh_gibbs() {
    let h = build_hubbard(&spec2(0.0, 0.2)).unwrap();
    for beta in [0.3, 1.0, 4.0] {
        let ff = free_fermion_reference(&h.t, Some(beta)).unwrap();
        let g = tanh_gibbs(&h.t, beta).unwrap();
        assert!(linalg::max_abs_diff(&ff.gamma, &g) < 1e-12);
        let s = ghf::covariance::entropy(&g).unwrap();
        assert!((ff.entropy - s).abs() < 1e-10);
        assert!((ff.free_energy - (ff.energy - ff.entropy / beta)).abs() < 1e-10);
    }
    let ff = free_fermion_reference(&h.t, None).unwrap();
    assert!(linalg::max_abs_diff(&ff.gamma, &ground_cm(&h.t).unwrap()) < 1e-12);
}

#[test]
fn two_site_chain_closed_form() {
    // t (a+_0 a_1 + h.c.) on one spinless pair: levels +-t, ground energy -|t|.
    let t = 0.8;
    let mut op = FermionOperator::new(2);
    op.add_hopping(t, 0, 1);
    let h = MajoranaHamiltonian::from_operator(&op).unwrap();
    let ff = free_fermion_reference(&h.t, None).unwrap();
    assert!((ff.energy + h.e0 + t).abs() < 1e-14);
    // Bonding orbital (|10> - |01>)/sqrt2 filled: rho = [[1/2, -1/2], [-1/2, 1/2]].
    let c = ghf::observables::Correlators::from_cm(&ff.gamma);
    assert!((c.rho[(0, 1)] - c64::new(-0.5, 0.0)).norm() < 1e-14);
    assert!((c.rho[(0, 0)] - c64::new(0.5, 0.0)).norm() < 1e-14);
}

#[test]
fn slater_states_have_no_pairing_and_fixed_number() {
    let g = random_slater_cm(8, 3, 4).unwrap();
    assert!(ghf::observables::pairing(&g) < 1e-28);
    assert!((ghf::model::particle_number(&g) - 3.0).abs() < 1e-12);
    let rho = gaussian_density_operator(&g).unwrap();
    // Particle number is sharp: <N^2> = <N>^2.
    let m = 8;
    let mut n_op = FockOperator::zeros(m);
    for s in 0..n_op.dim() {
        n_op.matrix[(s, s)] = c64::new((s as u32).count_ones() as f64, 0.0);
    }
    let n1 = n_op.mul(&rho).trace().re;
    let n2 = n_op.mul(&n_op).mul(&rho).trace().re;
    assert!((n2 - n1 * n1).abs() < 1e-9);
}

#[test]
fn density_operator_is_positive() {
    let g = random_mixed_cm(3, 31);
    let rho = gaussian_density_operator(&g).unwrap();
    assert!(rho.hermiticity_error() < 1e-13);
    let evd = rho.matrix.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    assert!(evd.iter().all(|e| *e > -1e-12));
}

#[test]
fn zero_cm_covariance_round_trip() {
    let g = CovarianceMatrix::zeros(2);
    let rho = gaussian_density_operator(&g).unwrap();
    assert!(linalg::max_abs_diff(&covariance_of(&rho), &g) < 1e-15);
}
