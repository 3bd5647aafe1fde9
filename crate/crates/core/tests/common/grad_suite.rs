//! Tape gradients against central finite differences in f64.

use super::{grad_check, rand_tensor, rand_tensor_away_from_zero, relu_margin};
use vocoder_fingerprint::nnet::model::{ForwardCtx, NamedTensor, ParamBuilder};
use vocoder_fingerprint::nnet::tape::BnStats;
use vocoder_fingerprint::nnet::{Mode, Tape, Tensor, Var};
use vocoder_fingerprint::rng;

pub const TOL: f64 = 1e-4;
/// Inputs whose ReLU pre-activations come this close to zero are redrawn:
/// a finite difference straddling the kink measures no derivative.
const KINK_MARGIN: f64 = 1e-3;

fn assert_close(label: &str, errors: &[f64]) {
    for (i, e) in errors.iter().enumerate() {
        assert!(*e < TOL, "{label}: input {i} relative error {e:e}");
    }
}

pub fn conv2d_matches_finite_differences() {
    // (n, c_in, h, w, c_out, k, stride, pad, bias)
    let cases = [
        (1, 1, 5, 6, 2, 3, 1, 1, true),
        (2, 2, 7, 7, 3, 3, 2, 1, false),
        (2, 3, 6, 5, 2, 1, 2, 0, false),
        (1, 1, 9, 8, 2, 7, 2, 3, true),
        (3, 2, 4, 4, 4, 3, 1, 0, true),
        (1, 3, 5, 7, 1, 2, 1, 1, false),
    ];
    for (i, &(n, ci, h, w, co, k, s, p, bias)) in cases.iter().enumerate() {
        let seed = 100 + i as u64;
        let mut inputs = vec![
            rand_tensor(&[n, ci, h, w], seed),
            rand_tensor(&[co, ci, k, k], seed + 50),
        ];
        if bias {
            inputs.push(rand_tensor(&[co], seed + 70));
        }
        let errs = grad_check(
            &inputs,
            |t, v| t.conv2d(v[0], v[1], v.get(2).copied(), s, p),
            seed,
        );
        assert_close(&format!("conv2d case {i}"), &errs);
    }
}

pub fn batch_norm_batch_mode_matches_finite_differences() {
    let shapes = [[2, 3, 2, 2], [4, 1, 3, 3], [1, 2, 3, 4], [3, 4, 1, 2], [2, 2, 5, 1]];
    for (i, shape) in shapes.iter().enumerate() {
        let seed = 200 + i as u64;
        let c = shape[1];
        let inputs = [
            rand_tensor(shape, seed),
            rand_tensor(&[c], seed + 1),
            rand_tensor(&[c], seed + 2),
        ];
        let errs = grad_check(
            &inputs,
            |t, v| Ok(t.batch_norm(v[0], v[1], v[2], BnStats::Batch, 1e-5)?.0),
            seed,
        );
        assert_close(&format!("batch_norm batch {shape:?}"), &errs);
    }
}

pub fn batch_norm_running_mode_matches_finite_differences() {
    let shapes = [[2, 3, 2, 2], [1, 1, 3, 3], [1, 2, 3, 4], [3, 4, 1, 2], [2, 2, 5, 1]];
    for (i, shape) in shapes.iter().enumerate() {
        let seed = 300 + i as u64;
        let c = shape[1];
        let mean = rand_tensor(&[c], seed + 3).into_data();
        let var: Vec<f64> = rand_tensor(&[c], seed + 4)
            .data()
            .iter()
            .map(|v| 0.5 + v.abs())
            .collect();
        let inputs = [
            rand_tensor(shape, seed),
            rand_tensor(&[c], seed + 1),
            rand_tensor(&[c], seed + 2),
        ];
        let errs = grad_check(
            &inputs,
            |t, v| {
                let stats = BnStats::Running { mean: &mean, var: &var };
                Ok(t.batch_norm(v[0], v[1], v[2], stats, 1e-5)?.0)
            },
            seed,
        );
        assert_close(&format!("batch_norm running {shape:?}"), &errs);
    }
}

pub fn relu_matches_finite_differences() {
    let shapes: [&[usize]; 5] = [&[7], &[2, 5], &[2, 3, 4], &[1, 2, 3, 3], &[3, 1, 2, 5]];
    for (i, shape) in shapes.iter().enumerate() {
        let seed = 400 + i as u64;
        let inputs = [rand_tensor_away_from_zero(shape, seed, 0.01)];
        let errs = grad_check(&inputs, |t, v| Ok(t.relu(v[0])), seed);
        assert_close(&format!("relu {shape:?}"), &errs);
    }
}

pub fn max_pool_matches_finite_differences() {
    // (shape, k, stride, pad)
    let cases = [
        ([1, 1, 5, 5], 3, 2, 1),
        ([2, 2, 6, 7], 3, 2, 1),
        ([1, 3, 4, 4], 2, 2, 0),
        ([2, 1, 7, 3], 3, 1, 1),
        ([1, 2, 8, 9], 3, 2, 0),
    ];
    for (i, (shape, k, s, p)) in cases.iter().enumerate() {
        let seed = 500 + i as u64;
        let inputs = [rand_tensor(shape, seed)];
        let errs = grad_check(&inputs, |t, v| t.max_pool2d(v[0], *k, *s, *p), seed);
        assert_close(&format!("max_pool {shape:?}"), &errs);
    }
}

pub fn global_avg_pool_matches_finite_differences() {
    let shapes = [[1, 1, 3, 3], [2, 3, 2, 4], [3, 2, 1, 5], [1, 4, 4, 1], [2, 2, 3, 3]];
    for (i, shape) in shapes.iter().enumerate() {
        let seed = 600 + i as u64;
        let errs = grad_check(&[rand_tensor(shape, seed)], |t, v| t.global_avg_pool(v[0]), seed);
        assert_close(&format!("global_avg_pool {shape:?}"), &errs);
    }
}

pub fn linear_matches_finite_differences() {
    let cases = [(1, 3, 2, true), (4, 5, 3, false), (2, 1, 4, true), (3, 6, 6, true), (5, 2, 1, false)];
    for (i, &(n, inp, out, bias)) in cases.iter().enumerate() {
        let seed = 700 + i as u64;
        let mut inputs = vec![rand_tensor(&[n, inp], seed), rand_tensor(&[out, inp], seed + 1)];
        if bias {
            inputs.push(rand_tensor(&[out], seed + 2));
        }
        let errs = grad_check(&inputs, |t, v| t.linear(v[0], v[1], v.get(2).copied()), seed);
        assert_close(&format!("linear case {i}"), &errs);
    }
}

pub fn add_sigmoid_scale_channels_match_finite_differences() {
    let shapes = [[1, 2, 2, 2], [2, 3, 1, 4], [3, 1, 3, 3], [2, 4, 2, 1], [1, 5, 3, 2]];
    for (i, shape) in shapes.iter().enumerate() {
        let seed = 800 + i as u64;
        let pair = [rand_tensor(shape, seed), rand_tensor(shape, seed + 1)];
        assert_close("add", &grad_check(&pair, |t, v| t.add(v[0], v[1]), seed));
        assert_close(
            "sigmoid",
            &grad_check(&pair[..1], |t, v| Ok(t.sigmoid(v[0])), seed),
        );
        let scaled = [rand_tensor(shape, seed), rand_tensor(&shape[..2], seed + 2)];
        assert_close(
            "scale_channels",
            &grad_check(&scaled, |t, v| t.scale_channels(v[0], v[1]), seed),
        );
    }
}

pub fn softmax_cross_entropy_matches_finite_differences() {
    let cases: [(usize, usize); 5] = [(1, 2), (3, 4), (5, 8), (2, 3), (4, 5)];
    for (i, &(n, c)) in cases.iter().enumerate() {
        let seed = 900 + i as u64;
        let labels: Vec<usize> = (0..n).map(|j| (j * 7 + i) % c).collect();
        let logits = rand_tensor(&[n, c], seed);
        let errs = grad_check(&[logits], |t, v| t.softmax_cross_entropy(v[0], &labels), seed);
        assert_close(&format!("softmax_ce {n}x{c}"), &errs);
    }
}

struct BlockCase {
    n: usize,
    c_in: usize,
    c_out: usize,
    hw: (usize, usize),
    stride: usize,
    se: Option<usize>,
    mode: Mode,
    batch_norm: bool,
}

fn check_block(case: &BlockCase, seed: u64) {
    let mut r = rng::stream(seed, &[1]);
    let mut builder = ParamBuilder::<f64>::new(&mut r, case.batch_norm);
    let block = builder.basic_block("b", case.c_in, case.c_out, case.stride, case.se);
    assert_eq!(
        block.projection.is_some(),
        case.stride != 1 || case.c_in != case.c_out
    );
    let mut params = builder.params;
    let mut buffers: Vec<NamedTensor<f64>> = builder.buffers;
    // Non-trivial affine parameters and running statistics.
    for (j, p) in params.iter_mut().enumerate() {
        if p.name.contains(".bn") || p.name.contains("downsample.bn") {
            let t = rand_tensor(p.tensor.shape(), seed + 10 + j as u64);
            let shift = if p.name.ends_with("weight") { 1.0 } else { 0.0 };
            p.tensor = Tensor::new(
                t.shape().to_vec(),
                t.data().iter().map(|v| shift + 0.5 * v).collect(),
            );
        }
    }
    for (j, b) in buffers.iter_mut().enumerate() {
        let t = rand_tensor(b.tensor.shape(), seed + 40 + j as u64);
        let data = if b.name.ends_with("running_var") {
            t.data().iter().map(|v| 0.5 + v.abs()).collect()
        } else {
            t.data().iter().map(|v| 0.2 * v).collect()
        };
        b.tensor = Tensor::new(t.shape().to_vec(), data);
    }
    let forward = |tape: &mut Tape<f64>, v: &[Var]| {
        let mut ctx = ForwardCtx::new(tape, &v[1..], &buffers, case.mode);
        block.forward(&mut ctx, v[0])
    };
    let x_shape = [case.n, case.c_in, case.hw.0, case.hw.1];
    let inputs = (0..100u64)
        .map(|attempt| {
            let mut inputs = vec![rand_tensor(&x_shape, seed + 7919 * attempt)];
            inputs.extend(params.iter().map(|p| p.tensor.clone()));
            inputs
        })
        .find(|inputs| relu_margin(inputs, forward) > KINK_MARGIN)
        .expect("an input away from every ReLU kink");
    let errs = grad_check(&inputs, forward, seed);
    let label = format!(
        "block {}->{} stride {} se {:?} {:?} bn {}",
        case.c_in, case.c_out, case.stride, case.se, case.mode, case.batch_norm
    );
    assert_close(&label, &errs);
}

pub fn basic_block_identity_shortcut_matches_finite_differences() {
    let shapes = [(2, (4, 4)), (1, (5, 3)), (3, (3, 3)), (2, (2, 5)), (1, (6, 6))];
    for (i, &(n, hw)) in shapes.iter().enumerate() {
        for mode in [Mode::Train, Mode::Eval] {
            let case = BlockCase {
                n,
                c_in: 2,
                c_out: 2,
                hw,
                stride: 1,
                se: None,
                mode,
                batch_norm: true,
            };
            check_block(&case, 1000 + i as u64);
        }
    }
}

pub fn basic_block_projection_matches_finite_differences() {
    let cases = [
        (2, 2, 3, (5, 5), 2),
        (1, 1, 2, (4, 6), 2),
        (2, 3, 2, (3, 3), 1),
        (3, 2, 4, (6, 4), 2),
        (1, 2, 3, (7, 5), 2),
    ];
    for (i, &(n, ci, co, hw, stride)) in cases.iter().enumerate() {
        for mode in [Mode::Train, Mode::Eval] {
            let case = BlockCase {
                n,
                c_in: ci,
                c_out: co,
                hw,
                stride,
                se: None,
                mode,
                batch_norm: true,
            };
            check_block(&case, 1100 + i as u64);
        }
    }
}

pub fn se_block_and_no_norm_block_match_finite_differences() {
    for i in 0..5u64 {
        let case = BlockCase {
            n: 2,
            c_in: 2,
            c_out: 4,
            hw: (4 + i as usize % 2, 4),
            stride: 2,
            se: Some(2),
            mode: if i % 2 == 0 { Mode::Train } else { Mode::Eval },
            batch_norm: true,
        };
        check_block(&case, 1200 + i);
        let plain = BlockCase {
            se: None,
            batch_norm: false,
            mode: Mode::Eval,
            ..case
        };
        check_block(&plain, 1300 + i);
    }
}

/// Every check in the suite, by name.
pub const ALL: &[(&str, fn())] = &[
    ("conv2d_matches_finite_differences", conv2d_matches_finite_differences),
    ("batch_norm_batch_mode_matches_finite_differences", batch_norm_batch_mode_matches_finite_differences),
    ("batch_norm_running_mode_matches_finite_differences", batch_norm_running_mode_matches_finite_differences),
    ("relu_matches_finite_differences", relu_matches_finite_differences),
    ("max_pool_matches_finite_differences", max_pool_matches_finite_differences),
    ("global_avg_pool_matches_finite_differences", global_avg_pool_matches_finite_differences),
    ("linear_matches_finite_differences", linear_matches_finite_differences),
    ("add_sigmoid_scale_channels_match_finite_differences", add_sigmoid_scale_channels_match_finite_differences),
    ("softmax_cross_entropy_matches_finite_differences", softmax_cross_entropy_matches_finite_differences),
    ("basic_block_identity_shortcut_matches_finite_differences", basic_block_identity_shortcut_matches_finite_differences),
    ("basic_block_projection_matches_finite_differences", basic_block_projection_matches_finite_differences),
    ("se_block_and_no_norm_block_match_finite_differences", se_block_and_no_norm_block_match_finite_differences),
];
