use proptest::prelude::*;

use super::*;
use crate::error::Error;

fn t2(rows: &[&[f64]]) -> Tensor {
    Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn matmul_by_identity_is_noop() {
    let mut g = Graph::new();
    let a = g.constant(t2(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
    let i = g.constant(t2(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
    let out = g.matmul(a, i).unwrap();
    assert_eq!(g.value(out).data(), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3])).unwrap();
    let b = g.constant(Tensor::zeros(&[2, 3])).unwrap();
    match g.matmul(a, b) {
        Err(Error::Shape { lhs, rhs, .. }) => {
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 3]);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn mse_of_identical_tensors_is_zero() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![0.3, -1.2, 4.0])).unwrap();
    let l = g.mse_loss(x, x).unwrap();
    assert_eq!(g.value(l).item().unwrap(), 0.0);
}

#[test]
fn conv_with_unit_kernel_is_identity() {
    let mut g = Graph::new();
    let data: Vec<f64> = (1..=9).map(f64::from).collect();
    let x = g.constant(Tensor::new(vec![1, 3, 3], data.clone()).unwrap()).unwrap();
    let k = g.constant(Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap()).unwrap();
    let y = g.conv2d(x, k, None, 1, 0).unwrap();
    assert_eq!(g.value(y).shape(), &[1, 3, 3]);
    assert_eq!(g.value(y).data(), data.as_slice());
}

#[test]
fn conv_output_geometry_with_padding_and_stride() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::filled(&[2, 1, 5, 4], 1.0)).unwrap();
    let k = g.constant(Tensor::filled(&[3, 1, 3, 3], 1.0)).unwrap();
    let same = g.conv2d(x, k, None, 1, 1).unwrap();
    assert_eq!(g.value(same).shape(), &[2, 3, 5, 4]);
    // centre pixels see the full 3x3 window, corners see 2x2
    assert_eq!(g.value(same).data()[5], 9.0);
    assert_eq!(g.value(same).data()[0], 4.0);
    let strided = g.conv2d(x, k, None, 2, 0).unwrap();
    assert_eq!(g.value(strided).shape(), &[2, 3, 2, 1]);
}

#[test]
fn spike_fires_at_equality() {
    let mut g = Graph::new();
    let u = g.constant(Tensor::vector(vec![1.7, 1.6, 2.0])).unwrap();
    let s = g.spike(u, 1.7, SurrogateSpec::default()).unwrap();
    assert_eq!(g.value(s).data(), &[1.0, 0.0, 1.0]);
}

#[test]
fn surrogate_derivative_values() {
    let s = SurrogateSpec::default();
    assert_eq!(s.grad(0.0), 1.0);
    assert!((s.grad(0.2) - 1.0 / 36.0).abs() < 1e-15);
    assert!((s.grad(-0.2) - 1.0 / 36.0).abs() < 1e-15);
    assert!(SurrogateSpec::fast_sigmoid(0.0).is_err());
}

#[test]
fn spike_backward_uses_surrogate() {
    let mut g = Graph::new();
    let u = g.param(Tensor::vector(vec![1.7, 1.9])).unwrap();
    let s = g.spike(u, 1.7, SurrogateSpec::default()).unwrap();
    let l = g.sum(s).unwrap();
    let grads = g.backward(l).unwrap();
    let gu = grads.get(u).unwrap().data();
    assert_eq!(gu[0], 1.0);
    assert!((gu[1] - 1.0 / 36.0).abs() < 1e-12);
}

#[test]
fn square_has_gradient_six_at_three() {
    let mut g = Graph::new();
    let w = g.param(Tensor::scalar(3.0)).unwrap();
    let sq = g.mul(w, w).unwrap();
    let l = g.sum(sq).unwrap();
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.get(w).unwrap().data(), &[6.0]);
}

#[test]
fn unreachable_parameter_gets_exact_zero() {
    let mut g = Graph::new();
    let w = g.param(Tensor::scalar(3.0)).unwrap();
    let unused = g.param(Tensor::vector(vec![1.0, 2.0])).unwrap();
    let l = g.mul(w, w).unwrap();
    let grads = g.backward(l).unwrap();
    assert!(grads.get(unused).is_none());
    assert_eq!(grads.param(&g, unused).data(), &[0.0, 0.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut g = Graph::new();
    let w = g.param(Tensor::vector(vec![1.0, 2.0])).unwrap();
    assert!(matches!(g.backward(w), Err(Error::Contract(_))));
}

#[test]
fn non_finite_results_are_errors() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::scalar(1e300)).unwrap();
    assert!(matches!(g.mul(x, x), Err(Error::NonFinite { .. })));
}

/// Plain-loop evaluation of mean(W·x), used as an independent oracle.
fn mean_wx(w: &[f64], x: &[f64], rows: usize, inner: usize, cols: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            for p in 0..inner {
                total += w[i * inner + p] * x[p * cols + j];
            }
        }
    }
    total / (rows * cols) as f64
}

#[test]
fn mean_of_matmul_matches_finite_differences() {
    let (rows, inner, cols) = (3, 4, 2);
    let w: Vec<f64> = (0..rows * inner).map(|i| (i as f64 * 0.7).sin()).collect();
    let x: Vec<f64> = (0..inner * cols).map(|i| (i as f64 * 1.3).cos()).collect();

    let mut g = Graph::new();
    let wn = g.param(Tensor::new(vec![rows, inner], w.clone()).unwrap()).unwrap();
    let xn = g.constant(Tensor::new(vec![inner, cols], x.clone()).unwrap()).unwrap();
    let prod = g.matmul(wn, xn).unwrap();
    let l = g.mean(prod).unwrap();
    let grads = g.backward(l).unwrap();
    let analytic = grads.get(wn).unwrap().data().to_vec();

    let eps = 1e-4;
    for k in 0..w.len() {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[k] += eps;
        wm[k] -= eps;
        let numeric = (mean_wx(&wp, &x, rows, inner, cols) - mean_wx(&wm, &x, rows, inner, cols)) / (2.0 * eps);
        let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(1e-12);
        assert!(rel < 1e-5, "entry {k}: analytic {} numeric {numeric}", analytic[k]);
    }
}

#[test]
fn grad_check_square() {
    let err = grad_check(&[Tensor::scalar(2.0)], 1e-4, |g, p| {
        let sq = g.mul(p[0], p[0])?;
        g.sum(sq)
    })
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn forward_is_bit_reproducible() {
    let run = || {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![2, 3], vec![0.1, -0.4, 0.9, 1.3, -2.2, 0.05]).unwrap()).unwrap();
        let w = g.param(Tensor::new(vec![4, 3], (0..12).map(|i| (i as f64).sin()).collect()).unwrap()).unwrap();
        let b = g.param(Tensor::vector(vec![0.3, -0.1, 0.0, 0.2])).unwrap();
        let h = g.linear(x, w, Some(b)).unwrap();
        let h = g.tanh(h).unwrap();
        g.value(h).data().to_vec()
    };
    assert_eq!(run(), run());
}

fn arb_tensor(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-2.0f64..2.0, n).prop_map(move |d| Tensor::new(shape.clone(), d).unwrap())
}

fn arb_matrix_pair() -> impl Strategy<Value = (Tensor, Tensor)> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(r, c)| (arb_tensor(vec![r, c]), arb_tensor(vec![r, c])))
}

fn arb_matmul() -> impl Strategy<Value = (Tensor, Tensor)> {
    (1usize..=6, 1usize..=6, 1usize..=6)
        .prop_flat_map(|(m, k, n)| (arb_tensor(vec![m, k]), arb_tensor(vec![k, n])))
}

const TOL: f64 = 1e-6;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn elementwise_primitives_pass_grad_check((a, b) in arb_matrix_pair()) {
        let ops: [fn(&mut Graph, NodeId, NodeId) -> crate::Result<NodeId>; 6] = [
            |g, x, y| g.add(x, y),
            |g, x, y| g.sub(x, y),
            |g, x, y| g.mul(x, y),
            |g, x, _| g.tanh(x),
            |g, x, _| g.scale(x, -1.5),
            |g, x, y| g.mse_loss(x, y),
        ];
        for op in ops {
            let err = grad_check(&[a.clone(), b.clone()], 1e-5, |g, p| {
                let y = op(g, p[0], p[1])?;
                let w = g.constant(Tensor::new(g.value(y).shape().to_vec(),
                    (0..g.value(y).len()).map(|i| 0.5 + 0.1 * i as f64).collect())?)?;
                let z = g.mul(y, w)?;
                g.sum(z)
            }).unwrap();
            prop_assert!(err < TOL, "err {}", err);
        }
    }

    #[test]
    fn relu_passes_grad_check_away_from_kink(a in arb_tensor(vec![4, 5])) {
        prop_assume!(a.data().iter().all(|v| v.abs() > 1e-3));
        let err = grad_check(&[a], 1e-5, |g, p| {
            let r = g.relu(p[0])?;
            let sq = g.mul(r, r)?;
            g.mean(sq)
        }).unwrap();
        prop_assert!(err < TOL);
    }

    #[test]
    fn matmul_and_linear_pass_grad_check((a, b) in arb_matmul()) {
        let err = grad_check(&[a.clone(), b.clone()], 1e-5, |g, p| {
            let y = g.matmul(p[0], p[1])?;
            let y = g.tanh(y)?;
            g.sum(y)
        }).unwrap();
        prop_assert!(err < TOL);

        // reuse `b` as a weight of shape (k, n) → linear expects (out, in) = (n, k)
        let (k, n) = (b.shape()[0], b.shape()[1]);
        let w = Tensor::new(vec![n, k], b.data().to_vec()).unwrap();
        let bias = Tensor::vector((0..n).map(|i| 0.1 * i as f64).collect());
        let err = grad_check(&[a, w, bias], 1e-5, |g, p| {
            let y = g.linear(p[0], p[1], Some(p[2]))?;
            let y = g.tanh(y)?;
            g.mean(y)
        }).unwrap();
        prop_assert!(err < TOL);
    }

    #[test]
    fn bias_scalar_and_reshape_pass_grad_check(x in arb_tensor(vec![3, 4]), b in arb_tensor(vec![4]), s in -2.0f64..2.0) {
        let err = grad_check(&[x, b, Tensor::scalar(s)], 1e-5, |g, p| {
            let y = g.add_bias(p[0], p[1])?;
            let y = g.mul_scalar(y, p[2])?;
            let y = g.reshape(y, &[2, 6])?;
            let y = g.tanh(y)?;
            g.sum(y)
        }).unwrap();
        prop_assert!(err < TOL);
    }

    #[test]
    fn conv_and_pool_pass_grad_check(
        x in arb_tensor(vec![2, 2, 4, 3]),
        k in arb_tensor(vec![2, 2, 3, 3]),
        b in arb_tensor(vec![2]),
    ) {
        let err = grad_check(&[x, k, b], 1e-5, |g, p| {
            let y = g.conv2d(p[0], p[1], Some(p[2]), 1, 1)?;
            let y = g.tanh(y)?;
            let y = g.avg_pool2d(y, 2)?;
            let y = g.flatten(y)?;
            g.sum(y)
        }).unwrap();
        prop_assert!(err < TOL);
    }

    #[test]
    fn smoothed_spike_passes_grad_check(u in arb_tensor(vec![8])) {
        let err = grad_check(&[u], 1e-6, |g, p| {
            let s = g.spike(p[0], 0.3, SurrogateSpec::default())?;
            let s = g.mul(s, s)?;
            g.sum(s)
        }).unwrap();
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn heaviside_spike_is_binary_with_finite_backward(u in arb_tensor(vec![16]), theta in -1.0f64..1.0) {
        let mut g = Graph::new();
        let un = g.param(u).unwrap();
        let s = g.spike(un, theta, SurrogateSpec::default()).unwrap();
        prop_assert!(g.value(s).data().iter().all(|&v| v == 0.0 || v == 1.0));
        let l = g.sum(s).unwrap();
        let grads = g.backward(l).unwrap();
        prop_assert!(grads.get(un).unwrap().is_finite());
    }
}
