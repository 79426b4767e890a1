use proptest::prelude::*;
use sigrid_core::metrics::{accuracy, f_beta, DEFAULT_BETA};
use sigrid_core::{iou, max_f_beta, Mask};

fn masks() -> impl Strategy<Value = (Mask, Mask)> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        (
            prop::collection::vec(0u8..2, w * h),
            prop::collection::vec(0u8..2, w * h),
        )
            .prop_map(move |(a, b)| (Mask::new(w, h, a).unwrap(), Mask::new(w, h, b).unwrap()))
    })
}

fn f_at(scores: &[f64], gt: &Mask, t: f64, beta: f64) -> f64 {
    let tp = scores.iter().zip(gt.labels()).filter(|(&s, &g)| s >= t && g == 1).count() as f64;
    let pp = scores.iter().filter(|&&s| s >= t).count() as f64;
    let ap = gt.labels().iter().filter(|&&g| g == 1).count() as f64;
    if pp == 0.0 || ap == 0.0 {
        0.0
    } else {
        f_beta(tp / pp, tp / ap, beta)
    }
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded((a, b) in masks()) {
        let ab = iou(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, iou(&b, &a).unwrap());
        prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
        prop_assert!((0.0..=1.0).contains(&accuracy(&a, &b).unwrap()));
    }

    #[test]
    fn max_f_dominates_every_threshold((_, gt) in masks(), seed in any::<u64>()) {
        let n = gt.labels().len();
        let scores: Vec<f64> = (0..n).map(|i| ((seed.wrapping_mul(i as u64 + 7) >> 11) % 256) as f64 / 255.0).collect();
        let best = max_f_beta(&scores, &gt, DEFAULT_BETA).unwrap();
        prop_assert!((0.0..=1.0).contains(&best));
        let mut sweep: f64 = 0.0;
        for i in 0..256 {
            let f = f_at(&scores, &gt, i as f64 / 255.0, DEFAULT_BETA);
            prop_assert!(f <= best + 1e-12);
            sweep = sweep.max(f);
        }
        prop_assert!((sweep - best).abs() <= 1e-12);
    }
}

#[test]
fn non_binary_ground_truth_is_rejected() {
    let gt = Mask::new(2, 1, vec![0, 2]).unwrap();
    assert!(max_f_beta(&[0.0, 1.0], &gt, DEFAULT_BETA).is_err());
}
