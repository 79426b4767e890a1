mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use sigrid_core::assembly::{backproject_scores, rasterize_labels_on};
use sigrid_core::{
    backproject, build_sigrid, map_to_grid, max_iou, rasterize_labels, CellIndex, DescriptorConfig, GridSpec,
    Image, Mask, Sigrid, Superpixelation, EMPTY,
};

#[derive(Debug)]
struct Case {
    img: Image,
    sp: Superpixelation,
    mask: Mask,
    spec: GridSpec,
    seed: u64,
}

fn case() -> impl Strategy<Value = Case> {
    (any::<u64>(), 1usize..10, 1usize..10).prop_map(|(seed, gw, gh)| {
        let mut rng = common::rng(seed);
        let (img, sp) = common::random_instance(&mut rng);
        let labels = (0..sp.ids().len()).map(|_| rand::Rng::random_range(&mut rng, 0..2u8)).collect();
        let mask = Mask::new(sp.width(), sp.height(), labels).unwrap();
        Case {
            img,
            sp,
            mask,
            spec: GridSpec::new(gw, gh).unwrap(),
            seed,
        }
    })
}

/// Majority label per retained region from pixel lists visited in a
/// shuffled order.
fn shuffled_majority(mask: &Mask, sp: &Superpixelation, assignments: &BTreeMap<u32, CellIndex>, seed: u64) -> BTreeMap<u32, u8> {
    let mut order: Vec<usize> = (0..sp.ids().len()).collect();
    order.shuffle(&mut common::rng(seed ^ 0x5eed));
    let mut counts: BTreeMap<u32, [usize; 2]> = BTreeMap::new();
    for i in order {
        let id = sp.ids()[i];
        if assignments.contains_key(&id) {
            counts.entry(id).or_default()[mask.labels()[i] as usize] += 1;
        }
    }
    counts
        .into_iter()
        .map(|(id, [zeros, ones])| (id, u8::from(ones > zeros)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rasterize_is_enumeration_order_invariant(c in case()) {
        let (merged, ga) = map_to_grid(&c.sp, &c.spec);
        let cells = rasterize_labels(&c.mask, &merged, &ga).unwrap();
        let oracle = shuffled_majority(&c.mask, &merged, &ga.assignments, c.seed);
        for (id, cell) in &ga.assignments {
            prop_assert_eq!(cells.get(*cell), oracle[id]);
        }
        prop_assert_eq!(cells.populated(), ga.retained_count());
        prop_assert_eq!(
            cells.labels().iter().filter(|&&l| l == EMPTY).count(),
            c.spec.cell_count() - ga.retained_count()
        );
    }

    #[test]
    fn backprojection_matches_max_iou_and_dense_round_trips(c in case()) {
        let (merged, ga) = map_to_grid(&c.sp, &c.spec);
        let sg = build_sigrid(&c.img, &merged, &ga, &DescriptorConfig::default()).unwrap();
        let cells = rasterize_labels_on(&c.mask, &sg).unwrap();
        let back = backproject(&cells, &sg).unwrap();
        let bound = max_iou(&c.mask, &merged, &ga).unwrap();
        prop_assert_eq!(sigrid_core::iou(&back, &c.mask).unwrap(), bound);

        // Pixels of retained regions carry their region's label.
        for (i, &id) in sg.region_map().iter().enumerate() {
            if id != 0 {
                prop_assert_eq!(back.labels()[i], cells.get(ga.assignments[&id]));
            }
        }

        let dense = sg.dense();
        let occupied: Vec<(CellIndex, u32)> = sg.cells().iter().map(|e| (e.cell, e.region)).collect();
        let cells_back = sg.cells_from_dense(&dense, &occupied).unwrap();
        prop_assert_eq!(&cells_back[..], sg.cells());
        let rebuilt = Sigrid::from_parts(c.spec, *sg.config(), sg.source_dims(), cells_back, sg.region_map().to_vec()).unwrap();
        prop_assert_eq!(rebuilt, sg.clone());

        let scores: Vec<f32> = (0..c.spec.cell_count()).map(|i| i as f32).collect();
        let pixel_scores = backproject_scores(&scores, &sg).unwrap();
        for (i, &id) in sg.region_map().iter().enumerate() {
            if id != 0 {
                let cell = ga.assignments[&id];
                prop_assert_eq!(pixel_scores[i], scores[cell.row * c.spec.grid_width + cell.col]);
            }
        }
    }
}
