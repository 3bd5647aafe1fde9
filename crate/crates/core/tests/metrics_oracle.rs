mod common;

use common::metrics_suite;

#[test]
fn worked_two_class_example() {
    metrics_suite::worked_two_class_example();
}

#[test]
fn brute_force_tally_oracle_on_random_predictions() {
    metrics_suite::brute_force_tally_oracle_on_random_predictions();
}

#[test]
fn zero_denominator_conventions() {
    metrics_suite::zero_denominator_conventions();
}
