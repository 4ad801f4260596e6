//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass/fail line (visible with `--nocapture`).

use bvxl::acceptance::{run_criterion, CRITERIA};
use bvxl::exec::Exec;

fn check(id: usize) {
    let name = CRITERIA.iter().find(|(i, _)| *i == id).unwrap().1;
    let res = run_criterion(id, 0, Exec::default())
        .unwrap_or_else(|e| panic!("criterion {id} ({name}) failed to run: {e}"));
    println!("{}", res.summary());
    assert!(res.passed(), "{}", res.summary());
}

#[test]
fn criterion_01_eigenstructure() {
    check(1);
}

#[test]
fn criterion_02_propagator_oracle() {
    check(2);
}

#[test]
fn criterion_03_vortex_tracking() {
    check(3);
}

#[test]
fn criterion_04_gaussian_vortex_rate() {
    check(4);
}

#[test]
fn criterion_05_baroclinic_decay() {
    check(5);
}

#[test]
fn criterion_06_moment_conservation() {
    check(6);
}

#[test]
fn criterion_07_dispersive_sweep() {
    check(7);
}

#[test]
fn criterion_08_global_small_qg() {
    check(8);
}

#[test]
fn criterion_09_hermite_scaling() {
    check(9);
}

#[test]
fn criterion_10_infrastructure() {
    check(10);
}
