//! Central finite-difference checks (f64) for every layer type.

mod common;

use common::gradient_cases;

const TOL: f64 = 1e-4;

fn check(name: &str) {
    let cases: Vec<_> = gradient_cases().into_iter().filter(|c| c.name == name).collect();
    assert!(!cases.is_empty(), "no case {name}");
    for c in cases {
        let err = c.error();
        assert!(err < TOL, "{name}: relative error {err:e}");
    }
}

#[test]
fn conv2d_gradients() {
    check("conv2d");
    check("pointwise");
}

#[test]
fn depthwise_and_separable_gradients() {
    check("separable");
    check("depthwise");
}

#[test]
fn batch_norm_gradients_train_and_eval() {
    check("batch_norm_train");
    check("batch_norm_eval");
}

#[test]
fn pooling_relu_linear_gradients() {
    check("max_pool_relu_gap");
    check("linear");
}

#[test]
fn elementwise_and_concat_gradients() {
    check("elementwise_concat");
}

#[test]
fn soft_threshold_gradients_in_input_and_t() {
    check("soft_threshold");
}

#[test]
fn cross_entropy_gradients() {
    check("cross_entropy");
}

#[test]
fn composite_network_gradients() {
    check("composite");
}
