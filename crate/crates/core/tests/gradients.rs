//! Tape gradients against central finite differences in f64.

mod common;

use common::grad_suite;

#[test]
fn conv2d_matches_finite_differences() {
    grad_suite::conv2d_matches_finite_differences();
}

#[test]
fn batch_norm_batch_mode_matches_finite_differences() {
    grad_suite::batch_norm_batch_mode_matches_finite_differences();
}

#[test]
fn batch_norm_running_mode_matches_finite_differences() {
    grad_suite::batch_norm_running_mode_matches_finite_differences();
}

#[test]
fn relu_matches_finite_differences() {
    grad_suite::relu_matches_finite_differences();
}

#[test]
fn max_pool_matches_finite_differences() {
    grad_suite::max_pool_matches_finite_differences();
}

#[test]
fn global_avg_pool_matches_finite_differences() {
    grad_suite::global_avg_pool_matches_finite_differences();
}

#[test]
fn linear_matches_finite_differences() {
    grad_suite::linear_matches_finite_differences();
}

#[test]
fn add_sigmoid_scale_channels_match_finite_differences() {
    grad_suite::add_sigmoid_scale_channels_match_finite_differences();
}

#[test]
fn softmax_cross_entropy_matches_finite_differences() {
    grad_suite::softmax_cross_entropy_matches_finite_differences();
}

#[test]
fn basic_block_identity_shortcut_matches_finite_differences() {
    grad_suite::basic_block_identity_shortcut_matches_finite_differences();
}

#[test]
fn basic_block_projection_matches_finite_differences() {
    grad_suite::basic_block_projection_matches_finite_differences();
}

#[test]
fn se_block_and_no_norm_block_match_finite_differences() {
    grad_suite::se_block_and_no_norm_block_match_finite_differences();
}
