use icp_core::dataset::{make_blobs, BlobConfig};
use icp_core::models::{cross_entropy_gradient, cross_entropy_loss, pinball_loss, pinball_subgradient};
use proptest::prelude::*;

const H: f64 = 1e-6;

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

proptest! {
    #[test]
    fn pinball_subgradient_matches_central_difference(
        y in -50.0f64..50.0,
        pred in -50.0f64..50.0,
        eps in 0.01f64..0.99,
    ) {
        prop_assume!((y - pred).abs() > 1e-3);
        let fd = (pinball_loss(y, pred + H, eps).unwrap() - pinball_loss(y, pred - H, eps).unwrap()) / (2.0 * H);
        prop_assert!(relative(pinball_subgradient(y, pred, eps), fd) < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn softmax_gradient_matches_central_difference(
        seed in 0u64..1000,
        k in 2usize..5,
        scale in 0.0f64..1.0,
    ) {
        let data = make_blobs(&BlobConfig::new(20 * k, k), seed).unwrap();
        let d = data.n_features() + 1;
        let w: Vec<f64> = (0..k * d).map(|j| scale * ((j as f64 * 1.7 + seed as f64).sin())).collect();
        let grad = cross_entropy_gradient(&w, &data).unwrap();
        for j in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += H;
            down[j] -= H;
            let fd = (cross_entropy_loss(&up, &data).unwrap() - cross_entropy_loss(&down, &data).unwrap()) / (2.0 * H);
            prop_assert!(
                (grad[j] - fd).abs() < 1e-9 || relative(grad[j], fd) < 1e-5,
                "j={} analytic={} fd={}", j, grad[j], fd
            );
        }
    }
}

#[test]
fn softmax_gradient_sums_to_zero_over_classes() {
    let data = make_blobs(&BlobConfig::new(90, 3), 1).unwrap();
    let d = data.n_features() + 1;
    let w: Vec<f64> = (0..3 * d).map(|j| 0.1 * j as f64).collect();
    let grad = cross_entropy_gradient(&w, &data).unwrap();
    for col in 0..d {
        let total: f64 = (0..3).map(|c| grad[c * d + col]).sum();
        assert!(total.abs() < 1e-12);
    }
}
