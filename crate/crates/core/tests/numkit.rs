//! Contract tests for the numeric kernel: forward oracles, finite-difference
//! gradient checks, SGD update arithmetic, and sampler moments.

use sctc_core::numkit::{
    cosine_similarity, finite_difference_grad, grad_rel_err, sample_gaussian, sgd_step,
    Activation, Mat64, Mlp, ResidualMlp, SeededRng,
};

/// Straightforward re-implementation of the affine+tanh chain, kept
/// independent of the Mlp internals on purpose.
fn reference_forward(
    weights: &[Vec<Vec<f64>>], // layer -> out -> in
    biases: &[Vec<f64>],
    acts: &[Activation],
    x: &[f64],
) -> Vec<f64> {
    let mut a = x.to_vec();
    for k in 0..weights.len() {
        let mut next = vec![0.0; weights[k].len()];
        for (o, row) in weights[k].iter().enumerate() {
            let mut z = biases[k][o];
            for (j, w) in row.iter().enumerate() {
                z += w * a[j];
            }
            next[o] = match acts[k] {
                Activation::Tanh => z.tanh(),
                Activation::Identity => z,
            };
        }
        a = next;
    }
    a
}

#[test]
fn forward_identity_layer() {
    let net = Mlp::identity(2);
    let y = net.forward(&[1.0, 2.0]).unwrap();
    assert_eq!(y, vec![1.0, 2.0]);
}

#[test]
fn forward_zero_weights_gives_activated_bias() {
    let mut rng = SeededRng::new(1);
    let mut net = Mlp::new(&[3, 2], &[Activation::Tanh], &mut rng);
    let flat = vec![0.0; net.param_count()];
    net.set_params_flat(&flat);
    let mut with_bias = net.params_flat();
    // last two entries are the biases
    let n = with_bias.len();
    with_bias[n - 2] = 0.7;
    with_bias[n - 1] = -1.2;
    net.set_params_flat(&with_bias);
    let y = net.forward(&[5.0, -3.0, 0.25]).unwrap();
    assert!((y[0] - 0.7f64.tanh()).abs() < 1e-15);
    assert!((y[1] - (-1.2f64).tanh()).abs() < 1e-15);
}

#[test]
fn forward_matches_independent_reimplementation() {
    let mut rng = SeededRng::new(42);
    let net = Mlp::new(
        &[4, 5, 3],
        &[Activation::Tanh, Activation::Identity],
        &mut rng,
    );
    // extract parameters into plain nested vectors for the reference path
    let flat = net.params_flat();
    let mut off = 0;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for k in 0..2 {
        let (inp, out) = (net.layer_sizes()[k], net.layer_sizes()[k + 1]);
        let mut w = vec![vec![0.0; inp]; out];
        for row in w.iter_mut() {
            for v in row.iter_mut() {
                *v = flat[off];
                off += 1;
            }
        }
        weights.push(w);
        biases.push(flat[off..off + out].to_vec());
        off += out;
    }
    let mut xr = SeededRng::new(7);
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| xr.uniform(-2.0, 2.0)).collect();
        let got = net.forward(&x).unwrap();
        let want = reference_forward(&weights, &biases, net.activations(), &x);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-14, "forward mismatch: {g} vs {w}");
        }
    }
}

#[test]
fn forward_dimension_mismatch_is_contract_error() {
    let net = Mlp::identity(3);
    assert!(net.forward(&[1.0, 2.0]).is_err());
}

#[test]
fn backward_half_square_loss_on_identity_net() {
    // L = 0.5 * ||y||^2 on the identity net: input gradient equals y.
    let net = Mlp::identity(4);
    let x = [0.5, -1.5, 2.0, 0.0];
    let (y, cache) = net.forward_cached(&x).unwrap();
    let (_, input_grad) = net.backward(&cache, &y).unwrap();
    assert_eq!(input_grad, y);
}

#[test]
fn backward_zero_upstream_gives_zero_grads() {
    let mut rng = SeededRng::new(5);
    let net = Mlp::new(
        &[3, 4, 2],
        &[Activation::Tanh, Activation::Identity],
        &mut rng,
    );
    let (_, cache) = net.forward_cached(&[0.1, 0.2, 0.3]).unwrap();
    let (grads, input_grad) = net.backward(&cache, &[0.0, 0.0]).unwrap();
    assert!(grads.is_zero());
    assert!(input_grad.iter().all(|&g| g == 0.0));
}

#[test]
fn gradients_match_finite_differences() {
    // 20 random instances per the gradient suite contract; loss is a fixed
    // quadratic against a random target so it exercises every output.
    let mut meta = SeededRng::new(99);
    for instance in 0..20 {
        let mut rng = SeededRng::new(1000 + instance);
        let sizes = [
            2 + meta.below(3),
            2 + meta.below(4),
            1 + meta.below(3),
        ];
        let net = Mlp::new(
            &sizes,
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        );
        let x: Vec<f64> = (0..sizes[0]).map(|_| meta.uniform(-1.5, 1.5)).collect();
        let target: Vec<f64> = (0..sizes[2]).map(|_| meta.uniform(-1.0, 1.0)).collect();

        let (y, cache) = net.forward_cached(&x).unwrap();
        let upstream: Vec<f64> = y.iter().zip(target.iter()).map(|(a, b)| a - b).collect();
        let (grads, input_grad) = net.backward(&cache, &upstream).unwrap();
        let analytic = net.grads_flat(&grads);

        let mut probe = net.clone();
        let mut loss = |p: &[f64]| {
            probe.set_params_flat(p);
            let out = probe.forward(&x).unwrap();
            0.5 * out
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let numeric = finite_difference_grad(&mut loss, &net.params_flat(), 1e-5);
        let err = grad_rel_err(&analytic, &numeric);
        assert!(err < 1e-4, "param grad rel err {err} on instance {instance}");

        // input gradient against finite differences too
        let mut loss_x = |xi: &[f64]| {
            let out = net.forward(xi).unwrap();
            0.5 * out
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let numeric_x = finite_difference_grad(&mut loss_x, &x, 1e-5);
        let err_x = grad_rel_err(&input_grad, &numeric_x);
        assert!(err_x < 1e-4, "input grad rel err {err_x}");
    }
}

#[test]
fn residual_mlp_identity_and_gradients() {
    let id = ResidualMlp::identity(4, 8);
    let x = [0.3, -0.7, 1.1, 0.0];
    assert_eq!(id.forward(&x).unwrap(), x.to_vec());

    let mut rng = SeededRng::new(17);
    let net = ResidualMlp::new(3, 6, &mut rng);
    let x = [0.4, -0.2, 0.9];
    let (y, cache) = net.forward_cached(&x).unwrap();
    let upstream: Vec<f64> = y.iter().map(|v| v * 0.5 + 0.1).collect();
    let mut grads = net.zero_grads();
    let input_grad = net.backward_into(&cache, &upstream, &mut grads).unwrap();
    let analytic = net.inner().grads_flat(&grads);

    let mut probe = net.clone();
    let up = upstream.clone();
    let mut loss = |p: &[f64]| {
        probe.set_params_flat(p);
        let out = probe.forward(&x).unwrap();
        out.iter().zip(up.iter()).map(|(o, u)| o * u).sum::<f64>()
    };
    let numeric = finite_difference_grad(&mut loss, &net.params_flat(), 1e-5);
    assert!(grad_rel_err(&analytic, &numeric) < 1e-4);

    let mut loss_x = |xi: &[f64]| {
        let out = net.forward(xi).unwrap();
        out.iter().zip(up.iter()).map(|(o, u)| o * u).sum::<f64>()
    };
    let numeric_x = finite_difference_grad(&mut loss_x, &x, 1e-5);
    assert!(grad_rel_err(&input_grad, &numeric_x) < 1e-4);
}

#[test]
fn sgd_update_arithmetic() {
    let mut theta = [1.0];
    sgd_step(&mut theta, &[2.0], 0.1);
    assert!((theta[0] - 0.8).abs() < 1e-15);

    let mut theta = [3.5, -1.0];
    sgd_step(&mut theta, &[0.0, 0.0], 0.7);
    assert_eq!(theta, [3.5, -1.0]);

    // two steps of lr=0.5 on L = theta^2 from theta=1: 1 -> 0 -> 0
    let mut theta = [1.0];
    for _ in 0..2 {
        let g = [2.0 * theta[0]];
        sgd_step(&mut theta, &g, 0.5);
    }
    assert_eq!(theta[0], 0.0);
}

#[test]
fn gaussian_sampler_contract() {
    let mut rng = SeededRng::new(9);
    let v = sample_gaussian(&mut rng, 4, 3.0, 0.0).unwrap();
    assert_eq!(v, vec![3.0; 4]);

    let mut a = SeededRng::new(42);
    let mut b = SeededRng::new(42);
    assert_eq!(
        sample_gaussian(&mut a, 16, 0.0, 1.0).unwrap(),
        sample_gaussian(&mut b, 16, 0.0, 1.0).unwrap()
    );

    assert!(sample_gaussian(&mut rng, 4, 0.0, -1.0).is_err());
}

#[test]
fn gaussian_sampler_moments() {
    // 1e5 samples of N(0,1): mean within ±0.02, variance within ±0.02
    // (the bounds are ~6 and ~4.5 Monte Carlo sigmas respectively).
    let mut rng = SeededRng::new(2024);
    let n = 100_000;
    let v = sample_gaussian(&mut rng, n, 0.0, 1.0).unwrap();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.02, "sample mean {mean}");
    assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
}

#[test]
fn no_nan_propagation_through_kernel_ops() {
    let mut rng = SeededRng::new(31);
    for _ in 0..50 {
        let net = Mlp::new(
            &[6, 8, 4],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        );
        let x: Vec<f64> = (0..6).map(|_| rng.uniform(-50.0, 50.0)).collect();
        let (y, cache) = net.forward_cached(&x).unwrap();
        assert!(y.iter().all(|v| v.is_finite()));
        let (grads, ig) = net.backward(&cache, &y).unwrap();
        assert!(ig.iter().all(|v| v.is_finite()));
        assert!(net.grads_flat(&grads).iter().all(|v| v.is_finite()));

        let m = Mat64::from_fn(5, 6, |_, _| rng.uniform(-10.0, 10.0));
        assert!(m.matvec(&x).iter().all(|v| v.is_finite()));
    }
}

#[test]
fn cosine_similarity_examples() {
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
    assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}

#[test]
fn determinism_across_fresh_constructions() {
    let build = || {
        let mut rng = SeededRng::new(777);
        let net = Mlp::new(
            &[5, 7, 2],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        );
        let x: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
        net.forward(&x).unwrap()
    };
    let a = build();
    let b = build();
    assert_eq!(a, b, "bit-identical outputs under identical seeds");
}
