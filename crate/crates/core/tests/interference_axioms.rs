mod common;

use common::{check_data_axioms, check_joint_axioms};

#[test]
fn joint_interference_is_a_joint_interference_function() {
    let report = check_joint_axioms(1000, 11);
    assert!(report.violations.is_empty(), "{:#?}", report.violations);
    assert!(report.evaluations >= 1000);
}

#[test]
fn data_interference_is_a_standard_interference_function() {
    let report = check_data_axioms(1000, 12);
    assert!(report.violations.is_empty(), "{:#?}", report.violations);
}
