//! Analytic gradients against central finite differences.

use handface_core::nn::layers::{global_avg_pool, global_avg_pool_backward, relu, relu_backward, Conv1d, Linear};
use handface_core::nn::loss::weighted_cross_entropy;
use handface_core::nn::{Model, ModelConfig, Tensor};
use handface_core::seed;
use rand::Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random(shape: &[usize], rng: &mut seed::Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn check(analytic: &[f64], mut f: impl FnMut(usize, f64) -> f64, what: &str) {
    for (i, &a) in analytic.iter().enumerate() {
        let fd = (f(i, H) - f(i, -H)) / (2.0 * H);
        let err = (a - fd).abs() / a.abs().max(1.0);
        assert!(err < TOL, "{what}[{i}]: analytic {a}, numeric {fd}, err {err}");
    }
}

fn perturbed(t: &Tensor, i: usize, d: f64) -> Tensor {
    let mut p = t.clone();
    p.data_mut()[i] += d;
    p
}

#[test]
fn conv_layer_gradients() {
    let mut rng = seed::rng(11);
    for k in [1, 3, 4, 5] {
        let mut conv = Conv1d::zeros(3, 2, k);
        conv.weight = random(&[2, 3, k], &mut rng);
        conv.bias = random(&[2], &mut rng);
        let x = random(&[3, 2, 9], &mut rng);
        let proj = random(&[2, 2, 9], &mut rng);
        let (_, cache) = conv.forward(&x).unwrap();
        let g = conv.backward(&cache, &proj, true).unwrap();
        let loss = |c: &Conv1d, x: &Tensor| dot(&c.forward(x).unwrap().0, &proj);

        check(g.weight.data(), |i, d| {
            let mut c = conv.clone();
            c.weight = perturbed(&conv.weight, i, d);
            loss(&c, &x)
        }, "conv weight");
        check(g.bias.data(), |i, d| {
            let mut c = conv.clone();
            c.bias = perturbed(&conv.bias, i, d);
            loss(&c, &x)
        }, "conv bias");
        check(g.input.unwrap().data(), |i, d| loss(&conv, &perturbed(&x, i, d)), "conv input");
    }
}

#[test]
fn linear_layer_gradients() {
    let mut rng = seed::rng(12);
    let mut lin = Linear::zeros(5, 3);
    lin.weight = random(&[3, 5], &mut rng);
    lin.bias = random(&[3], &mut rng);
    let x = random(&[4, 5], &mut rng);
    let proj = random(&[4, 3], &mut rng);
    let g = lin.backward(&x, &proj).unwrap();
    let loss = |l: &Linear, x: &Tensor| dot(&l.forward(x).unwrap(), &proj);
    check(g.weight.data(), |i, d| {
        let mut l = lin.clone();
        l.weight = perturbed(&lin.weight, i, d);
        loss(&l, &x)
    }, "linear weight");
    check(g.bias.data(), |i, d| {
        let mut l = lin.clone();
        l.bias = perturbed(&lin.bias, i, d);
        loss(&l, &x)
    }, "linear bias");
    check(g.input.data(), |i, d| loss(&lin, &perturbed(&x, i, d)), "linear input");
}

#[test]
fn relu_and_pool_gradients() {
    let mut rng = seed::rng(13);
    // Keep inputs away from the kink so the central difference is smooth.
    let mut x = random(&[2, 3, 6], &mut rng);
    x.map_inplace(|v| if v.abs() < 0.05 { 0.3 } else { v });
    let proj = random(&[2, 3, 6], &mut rng);
    let g = relu_backward(&x, &proj);
    check(g.data(), |i, d| dot(&relu(&perturbed(&x, i, d)), &proj), "relu");

    let pproj = random(&[3, 2], &mut rng);
    let g = global_avg_pool_backward(&pproj, 6);
    check(g.data(), |i, d| dot(&global_avg_pool(&perturbed(&x, i, d)), &pproj), "pool");
}

fn tiny_config() -> ModelConfig {
    ModelConfig { window_size: 50, conv_channels: [3, 3, 3], hidden_units: 4, ..ModelConfig::default() }
}

#[test]
fn full_model_gradients() {
    let cfg = tiny_config();
    let mut rng = seed::rng(14);
    let model = Model::init(&cfg, &mut seed::rng(3)).unwrap();
    let batch: Vec<f64> = (0..2 * 2 * 50).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels = [3usize, 0];
    let weights = [0.7, 1.0, 1.3, 2.0, 0.9, 1.1, 1.2];
    let (_, _, grads) = model.loss_and_grad(&batch, &labels, &weights).unwrap();
    let loss = |m: &Model| {
        let logits = m.logits(&batch, 2).unwrap();
        weighted_cross_entropy(&logits, &labels, &weights).unwrap().loss
    };
    for (p, g) in grads.iter().enumerate() {
        check(g.data(), |i, d| {
            let mut m = model.clone();
            m.params_mut()[p].data_mut()[i] += d;
            loss(&m)
        }, &format!("param {p}"));
    }
}

#[test]
fn zero_input_zero_bias_gives_zero_conv_weight_gradients() {
    let cfg = tiny_config();
    let mut model = Model::init(&cfg, &mut seed::rng(5)).unwrap();
    for conv in model.conv.iter_mut() {
        conv.bias.fill(0.0);
    }
    let batch = vec![0.0; 3 * 2 * 50];
    let (_, _, grads) = model.loss_and_grad(&batch, &[1, 2, 3], &[1.0; 7]).unwrap();
    for p in [0, 2, 4] {
        assert!(grads[p].data().iter().all(|&v| v == 0.0), "param {p}");
    }
}

#[test]
fn duplicated_sample_doubles_its_contribution() {
    let cfg = tiny_config();
    let model = Model::init(&cfg, &mut seed::rng(6)).unwrap();
    let mut rng = seed::rng(7);
    let a: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
    let weights = [1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    // Gradients of the weighted sum Σ w·ce (loss × weight sum).
    let summed = |batch: &[f64], labels: &[usize]| {
        let (_, wsum, grads) = model.loss_and_grad(batch, labels, &weights).unwrap();
        grads.into_iter().map(|g| g.data().iter().map(|v| v * wsum).collect::<Vec<_>>()).collect::<Vec<_>>()
    };
    let ga = summed(&a, &[1]);
    let gb = summed(&b, &[4]);
    let dup = summed(&[a.clone(), a.clone(), b.clone()].concat(), &[1, 1, 4]);
    for ((d, x), y) in dup.iter().zip(&ga).zip(&gb) {
        for ((dv, xv), yv) in d.iter().zip(x).zip(y) {
            assert!((dv - (2.0 * xv + yv)).abs() < 1e-10 * (1.0 + dv.abs()));
        }
    }
}
