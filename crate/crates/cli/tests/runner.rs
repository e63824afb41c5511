use std::path::Path;
use std::process::Command;

use ghf::covariance::{random_mixed_cm, random_pure_cm};
use ghf::model::ModelSpec;
use ghf_cli::checkpoint::{checkpoint_read, checkpoint_write, CheckpointHeader, HEADER_BYTES};
use ghf_cli::config::{Mode, RunConfig};
use ghf_cli::run::{execute, write_outputs};
use ghf_cli::CliError;

const GOLDEN_CONFIG: &str = include_str!("golden/ground.toml");
const GOLDEN_HEADER: &str = include_str!("golden/results_header.csv");

fn config(text: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::parse(text).unwrap();
    c.output.directory = out.to_path_buf();
    c
}

fn small_ground(u: f64) -> String {
    format!("seeds = [1]\n[model]\nn_h = 2\nn_v = 2\nu = {u}\n")
}

#[test]
fn csv_schema_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(GOLDEN_CONFIG, dir.path());
    let out = execute(&c, Mode::Ground).unwrap();
    write_outputs(&c, Mode::Ground, &out).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, GOLDEN_HEADER.trim_end());
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), header.split(',').count());
    assert_eq!(row[0], "ground");
    assert_eq!(row[16], "true");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], 1);
    assert_eq!(summary["unconverged"], 0);
}

#[test]
fn ground_rerun_is_bit_identical() {
    let text = "seeds = [5]\n[model]\nn_h = 4\nn_v = 4\nu = -4.0\nmu = 0.0\n";
    let mut files = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let c = config(text, dir.path());
        write_outputs(&c, Mode::Ground, &execute(&c, Mode::Ground).unwrap()).unwrap();
        files.push(std::fs::read(dir.path().join("results.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let text = "seeds = [2]\n[model]\nn_h = 2\nn_v = 2\nu = 0.0\n[sweep]\nmode = \"ground\"\nu = [2.0, -4.0, -2.0]\nmu = [0.5, 0.0]\n";
    let c = RunConfig::parse(text).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| execute(&c, Mode::Sweep).unwrap())
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(one.rows.len(), 6);
    assert_eq!(one.rows, three.rows);
    let keys: Vec<(f64, f64)> = one.rows.iter().map(|r| (r.u, r.mu)).collect();
    assert_eq!(keys, vec![(-4.0, 0.0), (-4.0, 0.5), (-2.0, 0.0), (-2.0, 0.5), (2.0, 0.0), (2.0, 0.5)]);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ghfcm");
    let spec = ModelSpec { v_t: 0.25, ..ModelSpec::periodic(2, -3.5, 0.125) };
    let header = CheckpointHeader::for_spec(&spec);
    let g = random_mixed_cm(8, 4);
    checkpoint_write(&g, &header, &path).unwrap();
    let (h2, g2) = checkpoint_read(&path).unwrap();
    assert_eq!(h2, header);
    assert_eq!(h2.spec(), spec);
    assert_eq!(CheckpointHeader::from_bytes(&header.to_bytes()).unwrap(), header);
    for i in 0..16 {
        for j in 0..16 {
            assert_eq!(g[(i, j)].to_bits(), g2[(i, j)].to_bits());
        }
    }
    assert_eq!(std::fs::metadata(&path).unwrap().len(), (HEADER_BYTES + 8 * 16 * 16) as u64);
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ghfcm");
    let spec = ModelSpec::periodic(2, 1.0, 0.0);
    checkpoint_write(&random_pure_cm(8, 1), &CheckpointHeader::for_spec(&spec), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let truncated = dir.path().join("truncated.ghfcm");
    std::fs::write(&truncated, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(checkpoint_read(&truncated), Err(CliError::DimensionMismatch { .. })));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    std::fs::write(&truncated, &magic).unwrap();
    assert!(matches!(checkpoint_read(&truncated), Err(CliError::BadMagic)));

    let mut version = bytes.clone();
    version[6] = 9;
    std::fs::write(&truncated, &version).unwrap();
    assert!(matches!(checkpoint_read(&truncated), Err(CliError::BadVersion(9))));

    // Scale one antisymmetric pair: still antisymmetric, no longer physical.
    let mut payload = bytes.clone();
    for (i, j) in [(0usize, 8usize), (8, 0)] {
        let o = HEADER_BYTES + 8 * (i * 16 + j);
        let v = f64::from_le_bytes(payload[o..o + 8].try_into().unwrap()) * 3.0 + if i == 0 { 2.0 } else { -2.0 };
        payload[o..o + 8].copy_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&truncated, &payload).unwrap();
    assert!(matches!(checkpoint_read(&truncated), Err(CliError::Corrupted(_))));

    let mut skew = bytes;
    let o = HEADER_BYTES + 8 * 1;
    skew[o..o + 8].copy_from_slice(&0.5f64.to_le_bytes());
    std::fs::write(&truncated, &skew).unwrap();
    assert!(matches!(checkpoint_read(&truncated), Err(CliError::Corrupted(_))));
}

#[test]
fn ground_checkpoint_seeds_an_anneal() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(&small_ground(-4.0), dir.path());
    c.output.checkpoint = true;
    let ground = execute(&c, Mode::Ground).unwrap();
    write_outputs(&c, Mode::Ground, &ground).unwrap();
    let ckpt = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "ghfcm"))
        .unwrap();
    let (header, gamma) = checkpoint_read(&ckpt).unwrap();
    assert_eq!(header.u, -4.0);
    assert_eq!(gamma.matrix(), ground.states[0].gamma.matrix());

    let text = format!(
        "{}[start]\nkind = \"checkpoint\"\ncheckpoint = {:?}\n[anneal]\nbeta_start = 4.0\nbeta_end = 3.0\nbeta_step = 0.5\nfrom_ground = false\n[thermal]\nfixed_point_tol = 1e-11\n",
        small_ground(-4.0),
        ckpt.to_str().unwrap()
    );
    let out_dir = tempfile::tempdir().unwrap();
    let a = config(&text, out_dir.path());
    let anneal = execute(&a, Mode::Anneal).unwrap();
    assert_eq!(anneal.unconverged, 0);
    assert_eq!(anneal.rows.len(), 3);
    let e_ground = ground.rows[0].energy;
    for r in &anneal.rows {
        // The Gibbs state minimizes F, and the pure ground state has F = E.
        assert!(r.free_energy.unwrap() <= e_ground + 1e-9);
        assert!(r.energy >= e_ground - 1e-9);
    }
}

#[test]
fn invalid_keys_are_named() {
    let err = RunConfig::parse("[model]\nn_h = 2\nn_v = 2\nu = 1.0\nbogus = 3\n").unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
    let c = RunConfig::parse(&small_ground(1.0)).unwrap();
    let err = c.validate(Mode::Thermal).unwrap_err();
    assert!(err.to_string().contains("thermal.beta"), "{err}");
    let c = RunConfig::parse("[model]\nn_h = 1\nn_v = 2\nu = 1.0\n").unwrap();
    assert!(c.validate(Mode::Ground).unwrap_err().to_string().contains("model.n_h"));
    let c = RunConfig::parse(&format!("{}[dynamics]\nparameter = \"u\"\n", small_ground(1.0))).unwrap();
    assert!(c.validate(Mode::Dynamics).unwrap_err().to_string().contains("dynamics.legs"));
}

#[test]
fn unconverged_runs_fail_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{}[ground]\nmax_steps = 2\n", small_ground(-4.0));
    let mut c = config(&text, dir.path());
    let out = execute(&c, Mode::Ground).unwrap();
    assert_eq!(out.unconverged, 1);
    assert!(matches!(write_outputs(&c, Mode::Ground, &out), Err(CliError::Unconverged(1))));
    assert!(dir.path().join("results.csv").exists());
    c.allow_unconverged = true;
    write_outputs(&c, Mode::Ground, &out).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",false"));
}

#[test]
fn ramp_rows_follow_the_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}[dynamics]\ndt = 0.05\nparameter = \"u\"\nlegs = [{{ start = -2.0, end = 2.0, t_final = 1.0 }}, {{ start = 2.0, end = -2.0, t_final = 1.0 }}]\n",
        small_ground(-2.0)
    );
    let c = config(&text, dir.path());
    let out = execute(&c, Mode::Dynamics).unwrap();
    assert_eq!(out.rows.len(), 41);
    assert_eq!(out.rows[0].u, -2.0);
    assert!((out.rows[20].u - 2.0).abs() < 1e-12);
    assert!((out.rows[40].time.unwrap() - 2.0).abs() < 1e-12);
    let n0 = out.rows[0].particles;
    assert!(out.rows.iter().all(|r| (r.particles - n0).abs() < 1e-8));
}

#[test]
fn binary_runs_check_and_ground() {
    let exe = env!("CARGO_BIN_EXE_ghf");
    let status = Command::new(exe).arg("check").output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stdout));
    assert!(String::from_utf8_lossy(&status.stdout).lines().all(|l| l.starts_with("[PASS]")));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, small_ground(3.0)).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(exe)
        .args(["ground", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()])
        .env("GHF_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("ground,4,2,2,3,"));

    let status = Command::new(exe).args(["thermal", "--config", cfg.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
