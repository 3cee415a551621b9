use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central differences of a scalar function of a logit matrix.
fn fd_logits(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Vec<f64> {
    let h = 1e-5;
    (0..x.as_slice().len())
        .map(|i| {
            let mut plus = x.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = x.clone();
            minus.as_mut_slice()[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn forward_zero_network_gives_zero_logits() {
    let arch = ModelArch::new(vec![3, 5, 4], Activation::Relu).unwrap();
    let params = ModelParams::zeros(arch);
    let x = random_matrix(6, 3, &mut rng(1));
    let logits = forward(&params, &x).unwrap();
    assert!(logits.as_slice().iter().all(|&v| v == 0.0));
    assert_eq!((logits.rows(), logits.cols()), (6, 4));
}

#[test]
fn forward_identity_layer() {
    let arch = ModelArch::new(vec![2, 2], Activation::Relu).unwrap();
    let params = ModelParams::from_values(arch, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
    let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
    assert_eq!(forward(&params, &x).unwrap().as_slice(), &[1.0, 2.0]);
}

#[test]
fn forward_matches_straight_line_recomputation() {
    let arch = ModelArch::new(vec![2, 4, 3], Activation::Tanh).unwrap();
    let params = ModelParams::init_glorot(arch, &mut rng(7));
    let v = params.values();
    let x = [0.3, -1.2];
    // layer 1: W1 is 2x4 at 0..8, b1 at 8..12; layer 2: W2 is 4x3 at 12..24, b2 at 24..27
    let mut h = [0.0; 4];
    for j in 0..4 {
        h[j] = (x[0] * v[j] + x[1] * v[4 + j] + v[8 + j]).tanh();
    }
    let mut expected = [0.0; 3];
    for j in 0..3 {
        expected[j] = v[24 + j] + (0..4).map(|k| h[k] * v[12 + k * 3 + j]).sum::<f64>();
    }
    let logits = forward(&params, &Matrix::from_rows(&[x.to_vec()]).unwrap()).unwrap();
    for (a, b) in logits.as_slice().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn forward_rejects_wrong_width() {
    let arch = ModelArch::new(vec![3, 2], Activation::Relu).unwrap();
    let err = forward(&ModelParams::zeros(arch), &Matrix::zeros(1, 4)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('4') && msg.contains('3'), "{msg}");
}

#[test]
fn arch_invariants() {
    assert!(ModelArch::new(vec![4], Activation::Relu).is_err());
    assert!(ModelArch::new(vec![4, 0, 2], Activation::Relu).is_err());
    let arch = ModelArch::new(vec![16, 32, 4], Activation::Relu).unwrap();
    assert_eq!(arch.param_count(), 16 * 32 + 32 + 32 * 4 + 4);
    let compact = arch.scaled_hidden(0.25).unwrap();
    assert_eq!(compact.layer_widths(), &[16, 8, 4]);
    assert_eq!(arch.scaled_hidden(1.0 / 64.0).unwrap().layer_widths(), &[16, 1, 4]);
}

#[test]
fn zero_output_init_emits_zero_logits() {
    let arch = ModelArch::new(vec![5, 6, 3], Activation::Relu).unwrap();
    let params = ModelParams::init_zero_output(arch, &mut rng(3));
    assert!(params.values().iter().any(|&v| v != 0.0));
    let logits = forward(&params, &random_matrix(4, 5, &mut rng(4))).unwrap();
    assert!(logits.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn softmax_examples() {
    let p = softmax(&[0.0, 0.0, 0.0], 1.0).unwrap();
    for v in p {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    let p = softmax(&[10.0, 0.0], 1000.0).unwrap();
    assert!(p.iter().all(|v| (v - 0.5).abs() < 0.01));

    let direct: Vec<f64> = {
        let e = [2f64.exp(), 1f64.exp(), 1.0];
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    };
    let p = softmax(&[2.0, 1.0, 0.0], 1.0).unwrap();
    for (a, b) in p.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(softmax(&[1.0], 0.0).is_err());
    assert!(softmax(&[1.0], -1.0).is_err());
}

#[test]
fn cross_entropy_examples() {
    let (loss, _) = cross_entropy_loss(&Matrix::zeros(3, 4), &[0, 1, 3]).unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-14);

    let logits = Matrix::from_rows(&[vec![0.0, 50.0, 0.0]]).unwrap();
    let (loss, _) = cross_entropy_loss(&logits, &[1]).unwrap();
    assert!(loss < 1e-20);

    let err = cross_entropy_loss(&Matrix::zeros(2, 3), &[0, 3]).unwrap_err();
    assert!(matches!(err, crate::Error::Data(ref m) if m.contains("index 1")));
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let mut r = rng(11);
    let logits = random_matrix(3, 5, &mut r);
    let labels = [4, 0, 2];
    let (_, grad) = cross_entropy_loss(&logits, &labels).unwrap();
    let fd = fd_logits(&logits, |z| cross_entropy_loss(z, &labels).unwrap().0);
    for (a, b) in grad.as_slice().iter().zip(&fd) {
        assert!(rel_err(*a, *b) < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn kl_examples() {
    let mut r = rng(5);
    let s = random_matrix(4, 3, &mut r);
    let (loss, grad) = kl_distill_loss(&s, &s, 2.0).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.as_slice().iter().all(|g| g.abs() < 1e-15));

    let student = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
    let target = Matrix::from_rows(&[vec![3f64.ln(), 0.0]]).unwrap();
    let (loss, _) = kl_distill_loss(&student, &target, 1.0).unwrap();
    let closed = 0.5 * (2.0f64 / 3.0).ln() + 0.5 * 2f64.ln();
    assert!((loss - closed).abs() < 1e-12);
    assert!((loss - 0.143841).abs() < 1e-6);

    assert!(kl_distill_loss(&student, &Matrix::zeros(1, 3), 1.0).is_err());
    assert!(kl_distill_loss(&student, &target, 0.0).is_err());
}

#[test]
fn kl_gradient_matches_finite_differences() {
    let mut r = rng(12);
    let s = random_matrix(3, 4, &mut r);
    let t = random_matrix(3, 4, &mut r);
    for tau in [0.5, 1.0, 3.0] {
        let (_, grad) = kl_distill_loss(&s, &t, tau).unwrap();
        let fd = fd_logits(&s, |z| kl_distill_loss(z, &t, tau).unwrap().0);
        for (a, b) in grad.as_slice().iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8 || rel_err(*a, *b) < 1e-4, "τ={tau}: {a} vs {b}");
        }
    }
}

#[test]
fn proximity_examples() {
    let arch = ModelArch::new(vec![1, 1], Activation::Relu).unwrap();
    let w = ModelParams::from_values(arch.clone(), vec![3.0, 4.0]).unwrap();
    let origin = ModelParams::zeros(arch.clone());
    let (loss, grad) = l2_proximity(&w, &origin, 1.0).unwrap();
    assert_eq!(loss, 5.0);
    assert!((grad.values()[0] - 0.6).abs() < 1e-15 && (grad.values()[1] - 0.8).abs() < 1e-15);

    let (loss, grad) = l2_proximity(&w, &w, 2.0).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.values().iter().all(|&g| g == 0.0));

    let other = ModelParams::zeros(ModelArch::new(vec![1, 2], Activation::Relu).unwrap());
    assert!(l2_proximity(&w, &other, 1.0).is_err());
    assert!(l2_proximity(&w, &origin, -1.0).is_err());

    let (loss, grad) = squared_proximity(&w, &origin, 2.0).unwrap();
    assert_eq!(loss, 25.0);
    assert_eq!(grad.values(), &[6.0, 8.0]);
}

#[test]
fn backward_zero_upstream_is_zero() {
    let arch = ModelArch::new(vec![3, 4, 2], Activation::Relu).unwrap();
    let params = ModelParams::init_glorot(arch, &mut rng(2));
    let x = random_matrix(5, 3, &mut rng(3));
    let g = backward(&params, &x, &Matrix::zeros(5, 2)).unwrap();
    assert!(g.values().iter().all(|&v| v == 0.0));
}

#[test]
fn backward_linear_layer_is_outer_product() {
    let arch = ModelArch::new(vec![3, 2], Activation::Relu).unwrap();
    let params = ModelParams::init_glorot(arch, &mut rng(9));
    let x = Matrix::from_rows(&[vec![1.5, -2.0, 0.5]]).unwrap();
    let up = Matrix::from_rows(&[vec![0.25, -1.0]]).unwrap();
    let g = backward(&params, &x, &up).unwrap();
    let mut expected = Vec::new();
    for xi in [1.5, -2.0, 0.5] {
        for uj in [0.25, -1.0] {
            expected.push(xi * uj);
        }
    }
    expected.extend([0.25, -1.0]);
    assert_eq!(g.values(), expected.as_slice());
}

#[test]
fn backward_rejects_bad_upstream_shape() {
    let arch = ModelArch::new(vec![3, 2], Activation::Relu).unwrap();
    let params = ModelParams::zeros(arch);
    assert!(backward(&params, &Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).is_err());
}

#[test]
fn sgd_examples() {
    let arch = ModelArch::new(vec![1, 1], Activation::Relu).unwrap();
    let g = GradientVector::from_values(vec![1.0, -2.0]);

    let mut p = ModelParams::from_values(arch.clone(), vec![1.0, 1.0]).unwrap();
    let mut st = OptimizerState::new(SgdConfig { learning_rate: 0.1, momentum: 0.0 }, 2).unwrap();
    sgd_step(&mut p, &g, &mut st).unwrap();
    assert!((p.values()[0] - 0.9).abs() < 1e-15 && (p.values()[1] - 1.2).abs() < 1e-15);

    let mut p = ModelParams::from_values(arch.clone(), vec![1.0, 1.0]).unwrap();
    let before = p.clone();
    let mut st = OptimizerState::new(SgdConfig { learning_rate: 0.1, momentum: 0.9 }, 2).unwrap();
    let zero = GradientVector::zeros(2);
    sgd_step(&mut p, &zero, &mut st).unwrap();
    sgd_step(&mut p, &zero, &mut st).unwrap();
    assert_eq!(p, before);
    assert!(st.momentum_buffer().iter().all(|&b| b == 0.0));

    // two momentum steps: 0.1 g + 0.1 (0.9 g + g)
    sgd_step(&mut p, &g, &mut st).unwrap();
    sgd_step(&mut p, &g, &mut st).unwrap();
    for (i, gi) in [1.0, -2.0].iter().enumerate() {
        let expected = 1.0 - (0.1 * gi + 0.1 * 1.9 * gi);
        assert!((p.values()[i] - expected).abs() < 1e-14);
    }

    let bad = GradientVector::from_values(vec![f64::NAN, 0.0]);
    assert!(matches!(sgd_step(&mut p, &bad, &mut st), Err(crate::Error::Numerical { .. })));
}

#[test]
fn argmax_breaks_ties_low() {
    assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    assert_eq!(argmax(&[0.0, 0.0]), 0);
}

mod props {
    use proptest::prelude::*;

    use super::super::*;

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            logits in proptest::collection::vec(-30.0f64..30.0, 1..8),
            shift in -100.0f64..100.0,
            tau in 0.1f64..10.0,
        ) {
            let p = softmax(&logits, tau).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted, tau).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn kl_is_nonnegative(
            s in proptest::collection::vec(-10.0f64..10.0, 6),
            t in proptest::collection::vec(-10.0f64..10.0, 6),
            tau in 0.2f64..5.0,
        ) {
            let s = Matrix::from_vec(2, 3, s).unwrap();
            let t = Matrix::from_vec(2, 3, t).unwrap();
            let (loss, _) = kl_distill_loss(&s, &t, tau).unwrap();
            prop_assert!(loss >= -1e-15);
        }

        #[test]
        fn sgd_with_zero_rate_is_identity(
            w in proptest::collection::vec(-5.0f64..5.0, 6),
            g in proptest::collection::vec(-5.0f64..5.0, 6),
            mu in 0.0f64..0.99,
        ) {
            let arch = ModelArch::new(vec![2, 2], Activation::Relu).unwrap();
            let mut p = ModelParams::from_values(arch, w).unwrap();
            let before = p.clone();
            let mut st = OptimizerState::new(SgdConfig { learning_rate: 0.0, momentum: mu }, 6).unwrap();
            sgd_step(&mut p, &GradientVector::from_values(g), &mut st).unwrap();
            prop_assert_eq!(p, before);
        }

        #[test]
        fn forward_is_pure(seed in 0u64..1000) {
            use rand::SeedableRng;
            let arch = ModelArch::new(vec![3, 5, 2], Activation::Tanh).unwrap();
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let p = ModelParams::init_glorot(arch, &mut r);
            let x = super::random_matrix(4, 3, &mut r);
            let a = forward(&p, &x).unwrap();
            let b = forward(&p, &x).unwrap();
            prop_assert_eq!(a.as_slice(), b.as_slice());
        }
    }
}
