//! The acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass/fail line. `cargo test --test acceptance` is the gate;
//! `fibsim verify` drives the same checks from the command line.

use fibsim::verify::{run_criterion, VerifyConfig};

fn run(id: usize) {
    let cfg = VerifyConfig::default();
    let report = run_criterion(id, &cfg);
    println!(
        "[{:>2}] {} {} — {}",
        report.id,
        if report.passed { "PASS" } else { "FAIL" },
        report.name,
        report.detail
    );
    assert!(report.passed, "criterion {id} failed: {}", report.detail);
}

#[test]
fn c01_dimension_law() {
    run(1);
}

#[test]
fn c02_braid_representation_sanity() {
    run(2);
}

#[test]
fn c03_exchange_and_z_gates() {
    run(3);
}

#[test]
fn c04_braided_ancilla_qubits() {
    run(4);
}

#[test]
fn c05_bell_state_preparation() {
    run(5);
}

#[test]
fn c06_fusion_teleported_x_gate() {
    run(6);
}

#[test]
fn c07_measurement_assisted_cz_gate() {
    run(7);
}

#[test]
fn c08_three_qubit_ancilla_preparation() {
    run(8);
}

#[test]
fn c09_g1_g2_realization() {
    run(9);
}

#[test]
fn c10_recovery_soundness() {
    run(10);
}

#[test]
fn c11_random_walk_termination() {
    run(11);
}

#[test]
fn c12_end_to_end_controlled_rotation() {
    run(12);
}

#[test]
fn c13_skein_cross_oracle() {
    run(13);
}
