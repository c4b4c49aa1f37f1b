//! Finite-difference gradient checks: every layer's analytic backward pass,
//! and full-model backpropagation, against central differences on the
//! binary64 reference implementations (h = 1e-3).

use lite_tsc::arch::{ArchConfig, LiteConfig};
use lite_tsc::conv::{conv1d_backward, conv1d_forward, ConvSpec};
use lite_tsc::init::Rng;
use lite_tsc::model::{build_model, one_hot};
use lite_tsc::norm::{batchnorm_backward, batchnorm_train_functional, BatchNormState};
use lite_tsc::ops;
use lite_tsc::reference::{self, Array3, ShadowModel};
use lite_tsc::tensor::Tensor;

const H: f64 = 1e-3;
const TOL: f64 = 1e-4;

fn rel_err(analytic: f32, numeric: f64) -> f64 {
    let a = analytic as f64;
    (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0)
}

fn random_tensor(rng: &mut Rng, b: usize, c: usize, l: usize) -> Tensor {
    let data: Vec<f32> = (0..b * c * l).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    Tensor::from_vec(b, c, l, data).unwrap()
}

fn random_vec(rng: &mut Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()
}

fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Weighted-output loss `sum r * out` turns a layer into a scalar function;
/// the engine backward then runs with grad_out = r.
fn weighted_loss(out: &Array3, r: &[f64]) -> f64 {
    out.data.iter().zip(r).map(|(o, w)| o * w).sum()
}

/// Indices probed per tensor: all of them up to a cap, evenly strided above.
fn probe_indices(len: usize, cap: usize) -> Vec<usize> {
    if len <= cap {
        (0..len).collect()
    } else {
        (0..cap).map(|i| i * len / cap).collect()
    }
}

#[test]
fn standard_conv_gradients_across_kernels_and_dilations() {
    let mut rng = Rng::seed_from(41);
    let (b, c_in, c_out, l) = (2, 3, 4, 48);
    for &k in &[1usize, 2, 3, 10, 20, 40] {
        for &d in &[1usize, 2, 4] {
            let spec = ConvSpec::standard(c_in, c_out, k, d, true).unwrap();
            let x = random_tensor(&mut rng, b, c_in, l);
            let w = random_vec(&mut rng, spec.weight_len());
            let bias = random_vec(&mut rng, c_out);
            let r: Vec<f64> = (0..b * c_out * l).map(|_| rng.uniform_in(-1.0, 1.0) as f64).collect();
            let r32 = Tensor::from_vec(b, c_out, l, r.iter().map(|&v| v as f32).collect()).unwrap();

            let grads = conv1d_backward(&x, &w, &r32, &spec, true).unwrap();
            let x64 = Array3::from_tensor(&x);
            let w64 = to64(&w);
            let b64 = to64(&bias);

            // d loss / d w
            let gw = &grads.grad_w;
            for idx in probe_indices(w64.len(), 96) {
                let mut wp = w64.clone();
                wp[idx] += H;
                let plus = weighted_loss(&reference::conv_standard(&x64, &wp, Some(&b64), c_out, k, d), &r);
                wp[idx] -= 2.0 * H;
                let minus = weighted_loss(&reference::conv_standard(&x64, &wp, Some(&b64), c_out, k, d), &r);
                let num = (plus - minus) / (2.0 * H);
                assert!(rel_err(gw[idx], num) < TOL, "k={k} d={d} w[{idx}]: {} vs {num}", gw[idx]);
            }
            // d loss / d x
            let gx = grads.grad_x.unwrap();
            for idx in probe_indices(x64.data.len(), 64) {
                let mut xp = x64.clone();
                xp.data[idx] += H;
                let plus = weighted_loss(&reference::conv_standard(&xp, &w64, Some(&b64), c_out, k, d), &r);
                xp.data[idx] -= 2.0 * H;
                let minus = weighted_loss(&reference::conv_standard(&xp, &w64, Some(&b64), c_out, k, d), &r);
                let num = (plus - minus) / (2.0 * H);
                assert!(rel_err(gx.data()[idx], num) < TOL, "k={k} d={d} x[{idx}]");
            }
            // d loss / d bias: analytic is the per-channel sum of r.
            let gb = grads.grad_bias.unwrap();
            for o in 0..c_out {
                let mut bp = b64.clone();
                bp[o] += H;
                let plus = weighted_loss(&reference::conv_standard(&x64, &w64, Some(&bp), c_out, k, d), &r);
                bp[o] -= 2.0 * H;
                let minus = weighted_loss(&reference::conv_standard(&x64, &w64, Some(&bp), c_out, k, d), &r);
                let num = (plus - minus) / (2.0 * H);
                assert!(rel_err(gb[o], num) < TOL, "k={k} d={d} bias[{o}]");
            }
        }
    }
}

#[test]
fn depthwise_and_pointwise_gradients() {
    let mut rng = Rng::seed_from(42);
    let (b, c, l) = (2, 5, 40);
    for &k in &[2usize, 3, 10, 20] {
        for &d in &[1usize, 2, 4] {
            let spec = ConvSpec::depthwise(c, k, d).unwrap();
            let x = random_tensor(&mut rng, b, c, l);
            let w = random_vec(&mut rng, spec.weight_len());
            let r: Vec<f64> = (0..b * c * l).map(|_| rng.uniform_in(-1.0, 1.0) as f64).collect();
            let r32 = Tensor::from_vec(b, c, l, r.iter().map(|&v| v as f32).collect()).unwrap();
            let grads = conv1d_backward(&x, &w, &r32, &spec, true).unwrap();
            let x64 = Array3::from_tensor(&x);
            let w64 = to64(&w);
            for idx in probe_indices(w64.len(), 64) {
                let mut wp = w64.clone();
                wp[idx] += H;
                let plus = weighted_loss(&reference::conv_depthwise(&x64, &wp, k, d), &r);
                wp[idx] -= 2.0 * H;
                let minus = weighted_loss(&reference::conv_depthwise(&x64, &wp, k, d), &r);
                assert!(rel_err(grads.grad_w[idx], (plus - minus) / (2.0 * H)) < TOL, "dw k={k} d={d} w[{idx}]");
            }
            let gx = grads.grad_x.unwrap();
            for idx in probe_indices(x64.data.len(), 48) {
                let mut xp = x64.clone();
                xp.data[idx] += H;
                let plus = weighted_loss(&reference::conv_depthwise(&xp, &w64, k, d), &r);
                xp.data[idx] -= 2.0 * H;
                let minus = weighted_loss(&reference::conv_depthwise(&xp, &w64, k, d), &r);
                assert!(rel_err(gx.data()[idx], (plus - minus) / (2.0 * H)) < TOL, "dw k={k} d={d} x[{idx}]");
            }
        }
    }

    // Pointwise
    let (c_in, c_out) = (6, 4);
    let spec = ConvSpec::pointwise(c_in, c_out, false).unwrap();
    let x = random_tensor(&mut rng, 2, c_in, 30);
    let w = random_vec(&mut rng, spec.weight_len());
    let r: Vec<f64> = (0..2 * c_out * 30).map(|_| rng.uniform_in(-1.0, 1.0) as f64).collect();
    let r32 = Tensor::from_vec(2, c_out, 30, r.iter().map(|&v| v as f32).collect()).unwrap();
    let grads = conv1d_backward(&x, &w, &r32, &spec, true).unwrap();
    let x64 = Array3::from_tensor(&x);
    let w64 = to64(&w);
    for idx in 0..w64.len() {
        let mut wp = w64.clone();
        wp[idx] += H;
        let plus = weighted_loss(&reference::conv_pointwise(&x64, &wp, c_out), &r);
        wp[idx] -= 2.0 * H;
        let minus = weighted_loss(&reference::conv_pointwise(&x64, &wp, c_out), &r);
        assert!(rel_err(grads.grad_w[idx], (plus - minus) / (2.0 * H)) < TOL, "pw w[{idx}]");
    }
}

#[test]
fn batchnorm_training_gradients() {
    let mut rng = Rng::seed_from(43);
    let (b, c, l) = (3, 4, 20);
    let x = random_tensor(&mut rng, b, c, l);
    let mut state = BatchNormState::new(c);
    state.gamma = random_vec(&mut rng, c).iter().map(|v| 1.0 + 0.3 * v).collect();
    state.beta = random_vec(&mut rng, c).iter().map(|v| 0.2 * v).collect();
    let r: Vec<f64> = (0..b * c * l).map(|_| rng.uniform_in(-1.0, 1.0) as f64).collect();
    let r32 = Tensor::from_vec(b, c, l, r.iter().map(|&v| v as f32).collect()).unwrap();

    let (_, cache, _) = batchnorm_train_functional(&x, &state).unwrap();
    let grads = batchnorm_backward(&r32, &cache, &state);

    let x64 = Array3::from_tensor(&x);
    let g64 = to64(&state.gamma);
    let b64 = to64(&state.beta);
    let eps = state.epsilon as f64;

    for idx in probe_indices(x64.data.len(), 96) {
        let mut xp = x64.clone();
        xp.data[idx] += H;
        let plus = weighted_loss(&reference::batchnorm_training(&xp, &g64, &b64, eps), &r);
        xp.data[idx] -= 2.0 * H;
        let minus = weighted_loss(&reference::batchnorm_training(&xp, &g64, &b64, eps), &r);
        assert!(rel_err(grads.grad_x.data()[idx], (plus - minus) / (2.0 * H)) < TOL, "bn x[{idx}]");
    }
    for ci in 0..c {
        let mut gp = g64.clone();
        gp[ci] += H;
        let plus = weighted_loss(&reference::batchnorm_training(&x64, &gp, &b64, eps), &r);
        gp[ci] -= 2.0 * H;
        let minus = weighted_loss(&reference::batchnorm_training(&x64, &gp, &b64, eps), &r);
        assert!(rel_err(grads.grad_gamma[ci], (plus - minus) / (2.0 * H)) < TOL, "bn gamma[{ci}]");

        let mut bp = b64.clone();
        bp[ci] += H;
        let plus = weighted_loss(&reference::batchnorm_training(&x64, &g64, &bp, eps), &r);
        bp[ci] -= 2.0 * H;
        let minus = weighted_loss(&reference::batchnorm_training(&x64, &g64, &bp, eps), &r);
        assert!(rel_err(grads.grad_beta[ci], (plus - minus) / (2.0 * H)) < TOL, "bn beta[{ci}]");
    }
}

#[test]
fn relu_gap_and_head_gradients() {
    let mut rng = Rng::seed_from(44);
    let (b, c, l) = (2, 4, 12);
    // ReLU: mask away from zero crossings by construction (uniform draws
    // land exactly at 0.0 with negligible probability).
    let x = random_tensor(&mut rng, b, c, l);
    let r: Vec<f64> = (0..b * c * l).map(|_| rng.uniform_in(-1.0, 1.0) as f64).collect();
    let r32 = Tensor::from_vec(b, c, l, r.iter().map(|&v| v as f32).collect()).unwrap();
    let out = ops::relu(&x);
    let gx = ops::relu_backward(&r32, &out);
    let x64 = Array3::from_tensor(&x);
    for idx in probe_indices(x64.data.len(), 64) {
        let mut xp = x64.clone();
        xp.data[idx] += H;
        let plus = weighted_loss(&reference::relu(&xp), &r);
        xp.data[idx] -= 2.0 * H;
        let minus = weighted_loss(&reference::relu(&xp), &r);
        assert!(rel_err(gx.data()[idx], (plus - minus) / (2.0 * H)) < TOL, "relu x[{idx}]");
    }

    // GAP + dense softmax + cross-entropy, differentiated end to end with
    // respect to head weights, bias and the GAP input.
    let k = 3;
    let feats_in = random_tensor(&mut rng, b, c, l);
    let w = random_vec(&mut rng, k * c);
    let bias = random_vec(&mut rng, k);
    let labels = vec![0usize, 2];
    let targets = one_hot(&labels, k).unwrap();
    let t64 = to64(&targets);

    let feats = ops::gap(&feats_in).unwrap();
    let probs = ops::dense_softmax(&feats, b, &w, &bias).unwrap();
    // Engine-side analytic gradients of the mean loss over the batch.
    let inv_b = 1.0 / b as f32;
    let dlogits: Vec<f32> = probs.iter().zip(&targets).map(|(p, t)| (p - t) * inv_b).collect();
    let mut gw = vec![0.0f32; k * c];
    let mut gb = vec![0.0f32; k];
    let mut gfeat = vec![0.0f32; b * c];
    for bi in 0..b {
        for ki in 0..k {
            let g = dlogits[bi * k + ki];
            gb[ki] += g;
            for ci in 0..c {
                gw[ki * c + ci] += g * feats[bi * c + ci];
                gfeat[bi * c + ci] += g * w[ki * c + ci];
            }
        }
    }
    let ggap = ops::gap_backward(&gfeat, b, c, l);

    let shadow_loss = |w64: &[f64], b64: &[f64], input: &Array3| -> f64 {
        let f = reference::gap(input);
        let p = reference::dense_softmax(&f, b, w64, b64);
        reference::mean_cross_entropy(&p, &t64)
    };
    let x64 = Array3::from_tensor(&feats_in);
    let w64 = to64(&w);
    let b64 = to64(&bias);
    for idx in 0..w64.len() {
        let mut wp = w64.clone();
        wp[idx] += H;
        let plus = shadow_loss(&wp, &b64, &x64);
        wp[idx] -= 2.0 * H;
        let minus = shadow_loss(&wp, &b64, &x64);
        assert!(rel_err(gw[idx], (plus - minus) / (2.0 * H)) < TOL, "head w[{idx}]");
    }
    for idx in 0..b64.len() {
        let mut bp = b64.clone();
        bp[idx] += H;
        let plus = shadow_loss(&w64, &bp, &x64);
        bp[idx] -= 2.0 * H;
        let minus = shadow_loss(&w64, &bp, &x64);
        assert!(rel_err(gb[idx], (plus - minus) / (2.0 * H)) < TOL, "head b[{idx}]");
    }
    for idx in probe_indices(x64.data.len(), 64) {
        let mut xp = x64.clone();
        xp.data[idx] += H;
        let plus = shadow_loss(&w64, &b64, &xp);
        xp.data[idx] -= 2.0 * H;
        let minus = shadow_loss(&w64, &b64, &xp);
        assert!(rel_err(ggap.data()[idx], (plus - minus) / (2.0 * H)) < TOL, "gap input [{idx}]");
    }
}

/// Full-model backpropagation against the shadow model, probing a strided
/// sample of coordinates from every trainable tensor. The step is smaller
/// than the per-layer one: with thousands of ReLU sites in the path, an
/// h=1e-3 central difference regularly straddles a kink.
const MODEL_H: f64 = 1e-5;

fn check_model_gradients(arch: &ArchConfig, in_channels: usize, seed: u64, coords_per_tensor: usize) {
    let mut rng = Rng::seed_from(seed);
    let n_classes = 3;
    let (b, l) = (2, 16);
    let model = build_model(arch, in_channels, n_classes, seed).unwrap();
    let x = random_tensor(&mut rng, b, in_channels, l);
    let labels: Vec<usize> = (0..b).map(|i| i % n_classes).collect();
    let targets = one_hot(&labels, n_classes).unwrap();

    let cache = model.forward_batch_stats(&x).unwrap();
    let grads = model.backward(&cache, &targets).unwrap();

    let mut shadow = ShadowModel::from_model(&model);
    let x64 = Array3::from_tensor(&x);
    let t64 = to64(&targets);
    assert_eq!(shadow.slot_count(), grads.len(), "shadow and engine disagree on tensor count");

    let mut worst = 0.0f64;
    for slot in 0..shadow.slot_count() {
        let len = shadow.slot_len(slot);
        assert_eq!(len, grads[slot].len(), "slot {slot} length");
        for idx in probe_indices(len, coords_per_tensor) {
            let num = shadow.fd_grad(&x64, &t64, slot, idx, MODEL_H);
            let err = rel_err(grads[slot][idx], num);
            if err > worst {
                worst = err;
            }
            assert!(err < TOL, "{arch:?} slot {slot} idx {idx}: analytic {} vs numeric {num} (rel {err:.2e})", grads[slot][idx]);
        }
    }
    println!("{} full-model gradcheck worst rel err {worst:.3e}", match arch {
        ArchConfig::Lite(_) => "lite-family",
        ArchConfig::Fcn => "fcn",
    });
}

#[test]
fn full_lite_model_gradients() {
    check_model_gradients(&ArchConfig::Lite(LiteConfig::lite()), 1, 7, 6);
}

#[test]
fn full_litemv_model_gradients() {
    check_model_gradients(&ArchConfig::Lite(LiteConfig::litemv()), 2, 8, 6);
}

#[test]
fn full_bottleneck_swap_model_gradients() {
    let config = LiteConfig { use_dwsc: false, ..LiteConfig::lite() };
    check_model_gradients(&ArchConfig::Lite(config), 1, 9, 6);
}

#[test]
fn full_fcn_model_gradients() {
    check_model_gradients(&ArchConfig::Fcn, 1, 10, 4);
}
