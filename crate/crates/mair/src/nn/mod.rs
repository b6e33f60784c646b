//! Dense feed-forward classifier with exact reverse-mode gradients with
//! respect to both parameters and inputs, plus softmax, cross-entropy, and
//! KL divergence primitives.

mod io;
mod loss;
mod matrix;
mod model;

pub use io::{load_model, save_model, ModelHeader};
pub use loss::{
    backward, cross_entropy, kl_divergence, point_loss_value, softmax, softmax_vjp, PointLoss,
    ProbVector, PROB_CLAMP,
};
pub use matrix::Matrix;
pub use model::{
    argmax, Activation, DenseLayer, ForwardTrace, GradBundle, LayerGrad, ModelParams, ParamGrads,
};

pub(crate) use io::{
    read_header, read_param_values, sidecar_path, write_atomic, write_f64s, write_header,
    write_param_values, Reader,
};
pub(crate) use loss::{point_loss_from_outputs, runner_up};

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_net(dims: &[usize], seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::random(dims, &mut rng).unwrap()
    }

    #[test]
    fn equal_logits_give_uniform_probs() {
        let probs = softmax(&[0.7, 0.7, 0.7, 0.7]);
        for &p in probs.as_slice() {
            assert_relative_eq!(p, 0.25, max_relative = 1e-15);
        }
    }

    #[test]
    fn two_class_softmax_closed_form() {
        // logits (a, a+c) -> probs (1/(1+e^c), e^c/(1+e^c))
        let (a, c) = (0.3, 1.7);
        let probs = softmax(&[a, a + c]);
        let e = c.exp();
        assert_relative_eq!(probs.get(0), 1.0 / (1.0 + e), max_relative = 1e-14);
        assert_relative_eq!(probs.get(1), e / (1.0 + e), max_relative = 1e-14);
    }

    #[test]
    fn random_net_probs_sum_to_one() {
        let net = toy_net(&[4, 8, 8, 3], 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, probs) = net.forward(&x).unwrap();
            let sum: f64 = probs.as_slice().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn softmax_translation_invariance_is_bitwise_for_exact_shifts() {
        // Dyadic logits and a dyadic shift make every addition exact, so the
        // max-subtraction stabilization yields bit-identical probabilities.
        let base: Vec<f64> = vec![0.5, -1.25, 2.0, 0.0078125];
        for shift in [1.0, -4.0, 0.5, 1024.0, -0.015625] {
            let shifted: Vec<f64> = base.iter().map(|z| z + shift).collect();
            assert_eq!(
                softmax(&base).as_slice(),
                softmax(&shifted).as_slice(),
                "shift {shift}"
            );
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let certain = ProbVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(cross_entropy(&certain, 0).unwrap(), 0.0);

        let half = ProbVector::new(vec![0.5, 0.5]).unwrap();
        // Oracle: -ln(0.5) evaluated independently.
        assert_relative_eq!(
            cross_entropy(&half, 0).unwrap(),
            0.693_147_180_559_945_3,
            max_relative = 1e-15
        );

        // p_y = 0 clamps to 1e-12 and stays finite.
        let zero = cross_entropy(&certain, 1).unwrap();
        assert_relative_eq!(zero, -(1e-12f64).ln(), max_relative = 1e-15);
        assert!(zero.is_finite());

        assert!(cross_entropy(&half, 2).is_err());
    }

    #[test]
    fn kl_divergence_examples() {
        let p = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);

        let onehot = ProbVector::new(vec![1.0, 0.0]).unwrap();
        let half = ProbVector::new(vec![0.5, 0.5]).unwrap();
        // Oracle: 1 * ln(1/0.5) evaluated by hand.
        assert_relative_eq!(
            kl_divergence(&onehot, &half).unwrap(),
            0.693_147_180_559_945_3,
            max_relative = 1e-15
        );

        // Reverse direction exercises the clamp and stays finite and positive.
        let rev = kl_divergence(&half, &onehot).unwrap();
        assert!(rev.is_finite() && rev > 0.0);

        let three = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert!(kl_divergence(&three, &half).is_err());
    }

    #[test]
    fn linear_softmax_input_grad_matches_closed_form() {
        // For a single linear layer with cross-entropy, dL/dx = W^T (p - onehot(y)).
        let w = Matrix::new(3, 2, vec![0.5, -1.0, 0.25, 2.0, -0.75, 0.1]).unwrap();
        let net = ModelParams::new(
            vec![DenseLayer {
                weights: w.clone(),
                bias: vec![0.1, -0.2, 0.3],
            }],
            Activation::Relu,
        )
        .unwrap();
        let x = [0.4, -1.3];
        let y = 1;
        let (_, grads) = backward(&net, &x, &PointLoss::CrossEntropy { y }).unwrap();
        let (_, probs) = net.forward(&x).unwrap();
        let mut residual = probs.as_slice().to_vec();
        residual[y] -= 1.0;
        let mut expected = vec![0.0; 2];
        w.matvec_transpose_add(&residual, &mut expected);
        for (g, e) in grads.input.iter().zip(&expected) {
            assert_relative_eq!(g, e, max_relative = 1e-14);
        }
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        // CW margin of a two-class net with identical rows is constant in x.
        let net = ModelParams::new(
            vec![DenseLayer {
                weights: Matrix::new(2, 2, vec![1.0, 2.0, 1.0, 2.0]).unwrap(),
                bias: vec![0.5, 0.5],
            }],
            Activation::Relu,
        )
        .unwrap();
        let (value, grads) = backward(&net, &[0.3, -0.8], &PointLoss::CwMargin { y: 0 }).unwrap();
        assert_eq!(value, 0.0);
        assert!(grads.input.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_logit_gradient_gives_zero_bundle() {
        // A loss that is constant in the outputs backpropagates to nothing.
        let net = toy_net(&[3, 5, 2], 8);
        let trace = net.forward_trace(&[0.2, -0.4, 1.0]).unwrap();
        let bundle = net.backward_from_logit_grad(&trace, &[0.0, 0.0]);
        assert!(bundle.input.iter().all(|&g| g == 0.0));
        for layer in &bundle.params.layers {
            assert!(layer.weights.data.iter().all(|&g| g == 0.0));
            assert!(layer.bias.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = toy_net(&[3, 4, 2], 1);
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn forward_reports_non_finite_layer() {
        let mut net = toy_net(&[2, 3, 2], 2);
        net.layers[1].weights.data[0] = f64::INFINITY;
        let err = net.forward(&[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
    }

    // Central finite differences; the analytic path never runs through here.
    fn fd_input_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let mut xv = x.to_vec();
        for i in 0..x.len() {
            let orig = xv[i];
            xv[i] = orig + h;
            let up = f(&xv);
            xv[i] = orig - h;
            let down = f(&xv);
            xv[i] = orig;
            g[i] = (up - down) / (2.0 * h);
        }
        g
    }

    #[test]
    fn input_grad_matches_finite_differences_on_random_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for trial in 0..20 {
            let net = toy_net(&[3, 6, 4], 100 + trial);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y = rng.random_range(0..4usize);
            for loss in [
                PointLoss::CrossEntropy { y },
                PointLoss::CwMargin { y },
                PointLoss::Bce { y },
            ] {
                let (_, grads) = backward(&net, &x, &loss).unwrap();
                let mut f = |p: &[f64]| point_loss_value(&net, p, &loss).unwrap();
                let fd = fd_input_grad(&mut f, &x, 1e-5);
                for (a, n) in grads.input.iter().zip(&fd) {
                    let scale = a.abs().max(n.abs()).max(1e-6);
                    assert!(
                        (a - n).abs() / scale < 1e-5,
                        "trial {trial} loss {loss:?}: analytic {a} vs fd {n}"
                    );
                }
            }
        }
    }

    #[test]
    fn model_checkpoint_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let net = toy_net(&[3, 5, 4, 2], 77);
        save_model(&net, &path).unwrap();
        let restored = load_model(&path).unwrap();
        assert_eq!(net, restored);
        // Sidecar carries the same header.
        let sidecar = std::fs::read_to_string(dir.path().join("model.bin.json")).unwrap();
        let header: ModelHeader = serde_json::from_str(&sidecar).unwrap();
        assert_eq!(header, ModelHeader::of(&net));
    }

    #[test]
    fn truncated_checkpoint_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let net = toy_net(&[2, 3, 2], 5);
        save_model(&net, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        match load_model(&path) {
            Err(crate::error::Error::Parse { offset, .. }) => assert!(offset > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
