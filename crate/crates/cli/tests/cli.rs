//! End-to-end checks of the command-line surface: scenario files, artifact
//! output, snapshot inspection, and exit codes.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bvxl"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bvxl_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const SCENARIO: &str = "\
# small nonlinear run\n\
grid.L = 17\n\
grid.N = 32\n\
grid.Nv = 4\n\
physics.Gamma = 2\n\
physics.Omega = 5\n\
time.T = 0.2\n\
time.dt = 0.01\n\
output.cadence = 0.04\n\
init.type = random_baroclinic\n\
init.k_min = 6.3\n\
init.k_max = 8\n\
init.amplitude = 0.3\n\
init.seed = 7\n";

#[test]
fn catalog_lists_experiments() {
    let out = bin().arg("catalog").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("oseen_track"));
    assert!(text.contains("dispersive_sweep"));
}

#[test]
fn scenario_run_writes_deterministic_artifacts() {
    let dir = tmp_dir("run");
    let cfg = dir.join("case.cfg");
    std::fs::write(&cfg, SCENARIO).unwrap();
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for out in [&out1, &out2] {
        let st = bin()
            .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3"])
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let a = std::fs::read(out1.join("series.csv")).unwrap();
    let b = std::fs::read(out2.join("series.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "series.csv must be byte-identical across reruns");
    assert!(out1.join("fits.csv").exists());
    assert!(out1.join("run.log").exists());
    assert!(out1.join("final.bvxl").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn validation_errors_exit_2() {
    let dir = tmp_dir("bad");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, SCENARIO.replace("grid.N = 32", "grid.N = 7")).unwrap();
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // Unknown key also exits 2 with the line number.
    std::fs::write(&cfg, format!("{SCENARIO}bogus.key = 1\n")).unwrap();
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    // Usage errors exit 1.
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn inspect_round_trips_a_snapshot() {
    use bvxl::dynamics::{Formulation, SimState};
    use bvxl::exec::Exec;
    use bvxl::field::{Domain, SpectralField};
    use bvxl::grid::{Bc, GridSpec};
    use bvxl::linops::PhysParams;
    let dir = tmp_dir("inspect");
    let domain = Domain::new(GridSpec::new(9.0, 16, 4, Bc::Periodic), Exec::Seq).unwrap();
    let mut v = SpectralField::state(&domain);
    v.data[[2, 0, 0, 0]] = bvxl::C64::new(0.5 / 81.0, 0.0);
    let state = SimState {
        v,
        t: 1.5,
        formulation: Formulation::Full,
        background: None,
        params: PhysParams { omega: 1.0, gamma: 3.0, nu: 1.0 },
    };
    let path = dir.join("probe.bvxl");
    bvxl::snapshot::save_snapshot(&state, &path).unwrap();
    let out = bin().args(["inspect", path.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("t = 1.5"));
    assert!(text.contains("Gamma = 3"));
    assert!(text.contains("B1 = 5"), "{text}");
    // Corrupt file exits 2.
    std::fs::write(&path, b"XXXX").unwrap();
    let out = bin().args(["inspect", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}
