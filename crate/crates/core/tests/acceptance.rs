//! End-to-end validation suite.
//!
//! The suite runs once (criteria in order, shared table cache) and each test
//! asserts one criterion, printing its pass/fail line and details.

use std::sync::OnceLock;

use underlay_core::validate::{run_all, CriterionReport};

fn reports() -> &'static [CriterionReport] {
    static REPORTS: OnceLock<Vec<CriterionReport>> = OnceLock::new();
    REPORTS.get_or_init(|| run_all(None))
}

fn assert_criterion(id: usize) {
    let report = reports()
        .iter()
        .find(|r| r.id == id)
        .expect("criterion was run");
    println!("{}", report.summary_line());
    for d in &report.details {
        println!("    {d}");
    }
    assert!(
        report.passed,
        "criterion {id} ({}) failed:\n{}",
        report.name,
        report.details.join("\n")
    );
}

#[test]
fn criterion_1_primary_operating_point() {
    assert_criterion(1);
}

#[test]
fn criterion_2_always_known_bound_vs_lp() {
    assert_criterion(2);
}

#[test]
fn criterion_3_low_regime_closed_form() {
    assert_criterion(3);
}

#[test]
fn criterion_4_monte_carlo_agreement() {
    assert_criterion(4);
}

#[test]
fn criterion_5_equilibrium_iteration() {
    assert_criterion(5);
}

#[test]
fn criterion_6_dominance_and_boundary_sweep() {
    assert_criterion(6);
}

#[test]
fn criterion_7_small_instance_policy_oracle() {
    assert_criterion(7);
}

#[test]
fn criterion_8_chain_machinery() {
    assert_criterion(8);
}
