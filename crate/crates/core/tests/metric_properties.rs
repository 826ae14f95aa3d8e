use hjd_core::distribution::{LabelDistribution, LogBase, MetricConfig};
use hjd_core::label::NliLabel;
use hjd_core::metrics::{
    cross_entropy, distance_correlation, entropy, jsd_distance, kl_divergence, tv_distance, weighted_f1,
};
use proptest::prelude::*;

fn dist() -> impl Strategy<Value = LabelDistribution> {
    prop_oneof![
        4 => [0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0],
        1 => (0usize..3, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(z, a, b)| {
            let mut w = [a, b, a + b];
            w[z] = 0.0;
            w
        }),
    ]
    .prop_filter("positive mass", |w| w.iter().sum::<f64>() > 1e-9)
    .prop_map(|w| LabelDistribution::from_weights(w).unwrap())
}

fn label() -> impl Strategy<Value = NliLabel> {
    (0usize..3).prop_map(|i| NliLabel::from_index(i).unwrap())
}

proptest! {
    #[test]
    fn kl_is_nonnegative_and_zero_on_the_diagonal(p in dist(), q in dist()) {
        let cfg = MetricConfig::default();
        prop_assert!(kl_divergence(&p, &q, &cfg) >= 0.0);
        prop_assert!(kl_divergence(&p, &p, &cfg).abs() < 1e-12);
    }

    #[test]
    fn jsd_is_a_bounded_symmetric_metric(p in dist(), q in dist(), r in dist()) {
        let cfg = MetricConfig::default();
        let d = |a, b| jsd_distance(a, b, &cfg);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-12);
        prop_assert!(d(&p, &q) <= 2f64.ln().sqrt() + 1e-12);
        prop_assert!(d(&p, &p) < 1e-7);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-9);
    }

    #[test]
    fn base_two_rescales_by_ln2(p in dist(), q in dist()) {
        let nat = MetricConfig::default();
        let bits = MetricConfig { log_base: LogBase::Base2, ..nat };
        let ln2 = std::f64::consts::LN_2;
        prop_assert!((kl_divergence(&p, &q, &bits) * ln2 - kl_divergence(&p, &q, &nat)).abs() < 1e-12);
        prop_assert!((jsd_distance(&p, &q, &bits) * ln2.sqrt() - jsd_distance(&p, &q, &nat)).abs() < 1e-12);
    }

    #[test]
    fn tvd_is_half_l1_and_bounded(p in dist(), q in dist()) {
        let t = tv_distance(&p, &q);
        prop_assert!((0.0..=1.0).contains(&t));
        prop_assert_eq!(t, tv_distance(&q, &p));
        let a = p.as_array();
        let b = q.as_array();
        let half_l1 = 0.5 * (0..3).map(|i| (a[i] - b[i]).abs()).sum::<f64>();
        prop_assert!((t - half_l1).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_is_at_least_entropy(p in dist(), q in dist()) {
        let cfg = MetricConfig::default();
        // smoothing moves Q by at most ~2ε, which can shave a little off
        prop_assert!(cross_entropy(&p, &q, &cfg) >= entropy(&p, &cfg) - 1e-5);
    }

    #[test]
    fn weighted_f1_is_one_on_perfect_predictions(gold in proptest::collection::vec(label(), 1..50)) {
        prop_assert_eq!(weighted_f1(&gold, &gold).unwrap(), 1.0);
    }

    #[test]
    fn weighted_f1_is_a_score(pairs in proptest::collection::vec((label(), label()), 1..50)) {
        let (pred, gold): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let f = weighted_f1(&pred, &gold).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn dcor_is_bounded_and_order_free(pairs in proptest::collection::vec((dist(), dist()), 3..25), rot in 0usize..25) {
        let (x, y): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let r = distance_correlation(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let mut shifted = pairs.clone();
        let k = rot % shifted.len();
        shifted.rotate_left(k);
        let (xs, ys): (Vec<_>, Vec<_>) = shifted.into_iter().unzip();
        prop_assert!((distance_correlation(&xs, &ys).unwrap() - r).abs() < 1e-9);
    }

    #[test]
    fn from_weights_normalizes(w in [0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0]) {
        prop_assume!(w.iter().sum::<f64>() > 1e-9);
        let d = LabelDistribution::from_weights(w).unwrap();
        prop_assert!((d.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn metric_inputs_are_validated() {
    assert!(LabelDistribution::new(0.5, 0.5, 0.5).is_err());
    assert!(LabelDistribution::new(-0.1, 0.6, 0.5).is_err());
    assert!(LabelDistribution::from_weights([0.0, 0.0, 0.0]).is_err());
    assert!(LabelDistribution::from_weights([f64::NAN, 1.0, 1.0]).is_err());
    assert!(weighted_f1(&[], &[]).is_err());
    assert!(weighted_f1(&[NliLabel::Entailment], &[]).is_err());
    let one = [LabelDistribution::one_hot(NliLabel::Neutral)];
    assert!(distance_correlation(&one, &one).is_err());
}

#[test]
fn constant_side_gives_zero_dcor() {
    let x: Vec<LabelDistribution> = (0..5)
        .map(|_| LabelDistribution::one_hot(NliLabel::Entailment))
        .collect();
    let y: Vec<LabelDistribution> = (0..5)
        .map(|i| LabelDistribution::from_weights([1.0, i as f64, 2.0]).unwrap())
        .collect();
    assert_eq!(distance_correlation(&x, &y).unwrap(), 0.0);
}
