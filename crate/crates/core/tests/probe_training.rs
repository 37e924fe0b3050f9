use proptest::prelude::*;
use sentecon::probe::{
    loss_and_gradient, train_linear_probe, EncodedTargets, LabeledDataset, LinearParams, ProbeConfig, ProbeModel,
    Split, Targets,
};

fn objective(p: &LinearParams, x: &[Vec<f64>], t: EncodedTargets<'_>) -> f64 {
    loss_and_gradient(p, x, t, 1e-2).0
}

/// Central differences against the analytic gradient.
fn check_gradient(p: &LinearParams, x: &[Vec<f64>], t: EncodedTargets<'_>) {
    let (_, grad) = loss_and_gradient(p, x, t, 1e-2);
    let h = 1e-6;
    let analytic = grad.weights.iter().chain(&grad.bias);
    for (i, g) in analytic.enumerate() {
        let mut plus = p.clone();
        let mut minus = p.clone();
        if i < p.weights.len() {
            plus.weights[i] += h;
            minus.weights[i] -= h;
        } else {
            plus.bias[i - p.weights.len()] += h;
            minus.bias[i - p.weights.len()] -= h;
        }
        let numeric = (objective(&plus, x, t) - objective(&minus, x, t)) / (2.0 * h);
        let scale = g.abs().max(numeric.abs()).max(1e-3);
        assert!((g - numeric).abs() / scale < 1e-4, "component {i}: {g} vs {numeric}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn softmax_gradient_matches_differences(
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 4..12),
        w in prop::collection::vec(-1.0f64..1.0, 9),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        seed in 0usize..3,
    ) {
        let y: Vec<usize> = (0..rows.len()).map(|i| (i + seed) % 3).collect();
        let p = LinearParams { d: 3, k: 3, weights: w, bias: b };
        check_gradient(&p, &rows, EncodedTargets::Classes(&y));
    }

    #[test]
    fn squared_error_gradient_matches_differences(
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 3..12),
        w in prop::collection::vec(-1.0f64..1.0, 2),
        b in -1.0f64..1.0,
    ) {
        let y: Vec<f64> = rows.iter().map(|r| r[0] - 2.0 * r[1] + 0.5).collect();
        let p = LinearParams { d: 2, k: 1, weights: w, bias: vec![b] };
        check_gradient(&p, &rows, EncodedTargets::Real(&y));
    }

    #[test]
    fn loss_never_increases(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 6..30),
        lr in 0.05f64..20.0,
    ) {
        let classes: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + 0.3 * r[1] > 0.0)).collect();
        let ds = LabeledDataset::from_classes(rows, &classes, Split::Train).unwrap();
        let cfg = ProbeConfig { learning_rate: lr, max_iterations: 200, ..ProbeConfig::default() };
        let Ok(model) = train_linear_probe(&ds, &cfg) else { return Ok(()) };
        for pair in model.loss_history.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
    }
}

#[test]
fn retraining_is_bit_identical() {
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - r[1]).collect();
    let ds = LabeledDataset::new(rows, Targets::Real(y), Split::Train).unwrap();
    let a = train_linear_probe(&ds, &ProbeConfig::default()).unwrap();
    let b = train_linear_probe(&ds, &ProbeConfig::default()).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(ProbeModel::from_bytes(&a.to_bytes()).unwrap().params, a.params);
}
