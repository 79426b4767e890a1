mod common;

use proptest::prelude::*;
use sigrid_core::{compute_descriptors, hu_moments_raw, DescriptorConfig, Image, Superpixelation};

fn instance() -> impl Strategy<Value = (Image, Superpixelation)> {
    any::<u64>().prop_map(|seed| common::random_instance(&mut common::rng(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounded_channels_and_unit_total_area((img, sp) in instance()) {
        let cfg = DescriptorConfig::from_bits(0b0111_1111).unwrap();
        let out = compute_descriptors(&img, &sp, &cfg).unwrap();
        let mut total = 0.0;
        for d in out.values() {
            let v = &d.values;
            prop_assert!(v[..3].iter().all(|c| (0.0..=1.0).contains(c)));
            let (a, w, h, c, s, e) = (v[3], v[4], v[5], v[6], v[7], v[8]);
            total += a;
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0);
            prop_assert!(c > 0.0 && c <= 1.0);
            prop_assert!(s > 0.0 && s <= 1.0);
            prop_assert!((0.0..1.0).contains(&e));
        }
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn matches_the_naive_oracle_for_any_config((img, sp) in instance(), bits in 1u16..=255) {
        let cfg = DescriptorConfig::from_bits(bits).unwrap();
        let fast = compute_descriptors(&img, &sp, &cfg).unwrap();
        let slow = common::naive_descriptors(&img, &sp, &cfg);
        prop_assert_eq!(fast.len(), slow.len());
        for (id, naive) in &slow {
            prop_assert_eq!(fast[id].values.len(), cfg.channels());
            for (a, b) in fast[id].values.iter().zip(naive) {
                prop_assert!(common::rel_close(*a, *b, 1e-6, 1e-9), "region {}: {} vs {}", id, a, b);
            }
        }
    }

    #[test]
    fn hu_matches_textbook_form(seed in any::<u64>(), radius in 2.0f64..12.0) {
        let blob = common::random_blob(&mut common::rng(seed), radius);
        let fast = hu_moments_raw(&blob).unwrap();
        let slow = common::naive_hu(&blob);
        for i in 0..7 {
            prop_assert!(common::rel_close(fast[i], slow[i], 1e-9, 1e-18), "phi{}: {} vs {}", i + 1, fast[i], slow[i]);
        }
    }
}

#[test]
fn line_eccentricity_grows_with_length() {
    for k in [10usize, 20, 40] {
        let ids: Vec<u32> = (0..k * 3).map(|i| if i / k == 1 { 2 } else { 1 }).collect();
        let sp = Superpixelation::new(k, 3, ids).unwrap();
        let img = Image::new(1, k, 3, vec![0.5; k * 3]).unwrap();
        let cfg = DescriptorConfig::parse("e").unwrap();
        let e = compute_descriptors(&img, &sp, &cfg).unwrap()[&2].values[0];
        assert!(e > 0.9 && e < 1.0, "k = {k}: {e}");
    }
}

#[test]
fn square_scale_changes_phi1_slightly() {
    let square = |n: usize| -> Vec<(usize, usize)> { (0..n * n).map(|i| (i % n, i / n)).collect() };
    let (a, b) = (hu_moments_raw(&square(4)).unwrap()[0], hu_moments_raw(&square(8)).unwrap()[0]);
    // Pixel-center moments give phi1 = (n^2 - 1) / (6 n^2): 0.15625 and 0.1640625.
    assert!((a - 15.0 / 96.0).abs() < 1e-12);
    assert!((b - 63.0 / 384.0).abs() < 1e-12);
}
