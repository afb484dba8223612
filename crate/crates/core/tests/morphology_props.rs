use nightpulse_core::morphology::*;
use nightpulse_core::raster::{BinaryGrid, GeoTransform, RasterGrid};
use proptest::prelude::*;

fn t(cols: usize, rows: usize) -> GeoTransform {
    GeoTransform::new(0.0, 0.0, 1.0, 1.0, cols, rows).unwrap()
}

fn bits(cols: usize, rows: usize) -> impl Strategy<Value = BinaryGrid> {
    proptest::collection::vec(any::<bool>(), cols * rows).prop_map(move |b| BinaryGrid::new(t(cols, rows), b).unwrap())
}

fn grid_strategy() -> impl Strategy<Value = BinaryGrid> {
    (1usize..14, 1usize..14).prop_flat_map(|(c, r)| bits(c, r))
}

fn se_strategy() -> impl Strategy<Value = StructuringElement> {
    prop_oneof![
        Just(StructuringElement::default()),
        Just(StructuringElement::from_rows(&["010", "111", "010"]).unwrap()),
        Just(StructuringElement::square(5).unwrap()),
        (0usize..3, 0usize..3).prop_flat_map(|(hw, hh)| {
            let (w, h) = (2 * hw + 1, 2 * hh + 1);
            proptest::collection::vec(any::<bool>(), w * h).prop_map(move |mut b| {
                b[(h / 2) * w + w / 2] = true;
                StructuringElement::new(w, h, b).unwrap()
            })
        }),
    ]
}

/// Grid with a false margin of `m` around `b`.
fn pad(b: &BinaryGrid, m: usize) -> BinaryGrid {
    BinaryGrid::from_fn(t(b.cols() + 2 * m, b.rows() + 2 * m), |c, r| {
        b.get_or_false(c as isize - m as isize, r as isize - m as isize)
    })
}

proptest! {
    #[test]
    fn duality_on_padded_grids(b in grid_strategy(), se in se_strategy()) {
        let p = pad(&b, se.width().max(se.height()) / 2);
        prop_assert_eq!(erode(&p, &se), dilate(&p.not(), &se.reflect()).not());
    }

    #[test]
    fn opening_and_closing_bracket(b in grid_strategy(), se in se_strategy()) {
        prop_assert!(opening(&b, &se).is_subset_of(&b));
        prop_assert!(b.is_subset_of(&closing(&b, &se)));
    }

    #[test]
    fn idempotence(b in grid_strategy(), se in se_strategy()) {
        let o = opening(&b, &se);
        prop_assert_eq!(opening(&o, &se), o);
        let c = closing(&b, &se);
        prop_assert_eq!(closing(&c, &se), c);
    }

    #[test]
    fn monotonicity((b2, mask) in (1usize..14, 1usize..14).prop_flat_map(|(c, r)| (bits(c, r), bits(c, r))), se in se_strategy()) {
        let b1 = b2.and(&mask).unwrap();
        prop_assert!(erode(&b1, &se).is_subset_of(&erode(&b2, &se)));
        prop_assert!(dilate(&b1, &se).is_subset_of(&dilate(&b2, &se)));
        prop_assert!(opening(&b1, &se).is_subset_of(&opening(&b2, &se)));
        prop_assert!(closing(&b1, &se).is_subset_of(&closing(&b2, &se)));
    }

    #[test]
    fn labels_are_maximal_components(b in grid_strategy()) {
        let l = label(&b);
        let (cols, rows) = (b.cols(), b.rows());
        for r in 0..rows {
            for c in 0..cols {
                let id = l.labels[r * cols + c];
                prop_assert_eq!(id == 0, !b.get(c, r));
                for (dc, dr) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
                    let (nc, nr) = (c as isize + dc, r as isize + dr);
                    if id != 0 && b.get_or_false(nc, nr) {
                        prop_assert_eq!(l.labels[nr as usize * cols + nc as usize], id);
                    }
                }
            }
        }
        let mut seen = 0;
        for &id in &l.labels {
            if id > seen {
                prop_assert_eq!(id, seen + 1);
                seen = id;
            }
        }
        prop_assert_eq!(seen, l.count);
        let measures = measure_regions(&b);
        prop_assert_eq!(measures.len() as u32, l.count);
        prop_assert_eq!(measures.iter().map(|m| m.area_pixels).sum::<usize>(), b.count());
    }

    #[test]
    fn swapping_epochs_keeps_symmetric_masks(a in bits(10, 10), b in bits(10, 10)) {
        let se = StructuringElement::default();
        let m1 = change_masks(&a, &b, &se).unwrap();
        let m2 = change_masks(&b, &a, &se).unwrap();
        prop_assert_eq!(&m1.merge, &m2.merge);
        prop_assert_eq!(&m1.expand, &m2.expand);
        prop_assert_eq!(&m1.split, &m2.split);
        // Shrink is directional: what one order loses the other gains.
        prop_assert!(m1.shrink.and(&m2.shrink).unwrap().is_empty());
        prop_assert_eq!(m1.shrink.or(&m2.shrink).unwrap(), opening(&a, &se).xor(&opening(&b, &se)).unwrap());
    }

    #[test]
    fn identical_epochs_report_nothing(b in bits(12, 12), se in se_strategy()) {
        let g = RasterGrid::from_fn(t(12, 12), -1.0, |c, r| if b.get(c, r) { 20.0 } else { 1.0 }).unwrap();
        prop_assert!(sprawl_change(&g, &g, 10.0, &se).unwrap().is_empty());
    }
}

#[test]
fn checkerboard_parity_classes() {
    let checker = BinaryGrid::from_fn(t(4, 4), |c, r| (c + r) % 2 == 0);
    assert_eq!(label(&checker).count, 1);
    assert_eq!(label(&checker.not()).count, 1);
}

#[test]
fn report_serializes_with_overlap_flags() {
    let a =
        RasterGrid::from_fn(t(9, 9), -1.0, |c, r| if c.abs_diff(4) <= 1 && r.abs_diff(4) <= 1 { 50.0 } else { 0.0 })
            .unwrap();
    let b =
        RasterGrid::from_fn(t(9, 9), -1.0, |c, r| if c.abs_diff(4) <= 2 && r.abs_diff(4) <= 2 { 50.0 } else { 0.0 })
            .unwrap();
    let r = sprawl_change(&a, &b, 10.0, &StructuringElement::default()).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["structuring_element"], serde_json::json!(["111", "111", "111"]));
    assert!(v["shrink"].as_array().unwrap().is_empty());
    assert_eq!(v["expand"][0]["area_pixels"], 40);
}
