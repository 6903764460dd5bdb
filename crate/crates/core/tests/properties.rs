mod common;

use adaptel::metrics::{self, boundary_map};
use adaptel::segmenter::{connected_components, partition};
use adaptel::{
    build_feature_grid, segment, DoubleExponential, GridShape, LabelMap, SegmentationConfig,
};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

use common::*;

// Palette whose pairwise single-step crossing cost exceeds 10 bits at
// sigma = 10 (CIELAB distances above 69.4).
const PALETTE: [[u8; 3]; 5] = [
    [0, 0, 0],
    [255, 255, 255],
    [255, 0, 0],
    [0, 255, 0],
    [0, 0, 255],
];

/// Grid of rectangular blocks; neighboring blocks get different palette
/// colors.
fn palette_blocks(cols: &[u32], rows: &[u32], picks: &[usize]) -> (RgbImage, Vec<u32>) {
    let (nc, nr) = (cols.len(), rows.len());
    let mut colors = vec![0usize; nc * nr];
    for by in 0..nr {
        for bx in 0..nc {
            let mut c = picks[by * nc + bx] % PALETTE.len();
            while (bx > 0 && colors[by * nc + bx - 1] == c)
                || (by > 0 && colors[(by - 1) * nc + bx] == c)
            {
                c = (c + 1) % PALETTE.len();
            }
            colors[by * nc + bx] = c;
        }
    }
    let w: u32 = cols.iter().sum();
    let h: u32 = rows.iter().sum();
    let block_of = |v: u32, sizes: &[u32]| {
        let mut acc = 0;
        sizes
            .iter()
            .position(|&s| {
                acc += s;
                v < acc
            })
            .unwrap()
    };
    let ids: Vec<u32> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| (block_of(y, rows) * nc + block_of(x, cols)) as u32)
        .collect();
    let img = RgbImage::from_fn(w, h, |x, y| {
        Rgb(PALETTE[colors[ids[(y * w + x) as usize] as usize]])
    });
    (img, ids)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn piecewise_constant_regions_are_recovered(
        cols in prop::collection::vec(2u32..12, 1..5),
        rows in prop::collection::vec(2u32..12, 1..5),
        picks in prop::collection::vec(0usize..5, 25),
        t in 1.0f64..10.0,
    ) {
        let (img, ids) = palette_blocks(&cols, &rows, &picks);
        let grid = build_feature_grid(&[img]).unwrap();
        let r = segment(&grid, &SegmentationConfig::with_threshold(t)).unwrap();
        prop_assert!(same_partition(r.labels.as_slice(), &ids));
    }

    #[test]
    fn segmentation_invariants_on_noise(
        w in 1u32..40, h in 1u32..40, seed in any::<u64>(), t in 5.0f64..200.0,
        min_fragment in 0usize..6,
    ) {
        let grid = build_feature_grid(&[noise_image(w, h, seed)]).unwrap();
        let config = SegmentationConfig { threshold: t, min_fragment, ..Default::default() };
        let r = segment(&grid, &config).unwrap();
        prop_assert!(r.labels.is_complete());
        prop_assert!(disconnected_labels(&r.labels).is_empty());
        prop_assert!(r.growth.iter().all(|s| s.info_bits < t));
        prop_assert_eq!(r.k, r.labels.count_labels());
        prop_assert_eq!(r.labels.label_bound() as usize, r.k);
        prop_assert_eq!(r.adaptels.iter().map(|s| s.count).sum::<usize>(), grid.len());
        if min_fragment > 0 && r.k > 1 {
            prop_assert!(r.adaptels.iter().all(|s| s.count >= min_fragment));
        }
        // renumbering is by first appearance
        let mut next = 0;
        for &l in r.labels.as_slice() {
            prop_assert!(l <= next);
            if l == next { next += 1; }
        }
        let again = segment(&grid, &config).unwrap();
        prop_assert_eq!(again.labels, r.labels);
    }

    #[test]
    fn raw_partition_owns_every_pixel(w in 1u32..30, h in 1u32..30, d in 1usize..4, seed in any::<u64>()) {
        let frames: Vec<_> = (0..d as u64).map(|t| noise_image(w, h, seed ^ t)).collect();
        let grid = build_feature_grid(&frames).unwrap();
        let model = DoubleExponential::new(10.0).unwrap();
        let (labels, growth) = partition(&grid, &model, 40.0, grid.shape().center()).unwrap();
        prop_assert!(labels.is_complete());
        prop_assert!(labels.as_slice().iter().all(|&l| (l as usize) < growth.len()));
        let (_, n) = connected_components(&labels);
        prop_assert!(n >= labels.count_labels());
    }

    #[test]
    fn metrics_invariant_under_relabeling(seed in any::<u64>(), shift in 1u32..1000) {
        let mut r = rng(seed);
        let seg = random_label_map(&mut r, 12, 10);
        let gt = random_label_map(&mut r, 12, 10);
        let permuted = LabelMap::from_vec(
            seg.shape(),
            seg.as_slice().iter().map(|&l| (l * 7919 + shift) % 100_003).collect(),
        ).unwrap();
        let a = metrics::evaluate(&seg, &gt, 2).unwrap();
        let b = metrics::evaluate(&permuted, &gt, 2).unwrap();
        prop_assert_eq!(a, b);
        let m = metrics::evaluate(&seg, &gt, 2).unwrap();
        for v in [m.cuse, m.asa, m.recall, m.precision, m.f_measure] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn volume_boundaries_match_oracle(w in 1usize..7, h in 1usize..7, d in 1usize..5, seed in any::<u64>(), eps in 0usize..3) {
        let shape = GridShape::new(w, h, d).unwrap();
        let mut r = rng(seed);
        let mk = |r: &mut rand_chacha::ChaCha8Rng| {
            use rand::Rng;
            LabelMap::from_vec(shape, (0..shape.len()).map(|_| r.gen_range(0..3)).collect()).unwrap()
        };
        let (a, b) = (mk(&mut r), mk(&mut r));
        let (ba, bb) = (boundary_map(&a), boundary_map(&b));
        prop_assert_eq!(ba.flags(), &brute_boundary(&a)[..]);
        prop_assert_eq!(
            metrics::matched_count(&ba, &bb, eps).unwrap(),
            brute_matched(shape, ba.flags(), bb.flags(), eps)
        );
    }
}

#[test]
fn textured_regions_get_smaller_segments() {
    // Left half flat, right half noisy: the noisy half gets far more segments.
    let mut r = rng(11);
    let img = RgbImage::from_fn(96, 64, |x, _| {
        use rand::Rng;
        if x < 48 {
            Rgb([120, 130, 140])
        } else {
            Rgb(r.gen())
        }
    });
    let grid = build_feature_grid(&[img]).unwrap();
    let res = segment(&grid, &SegmentationConfig::default()).unwrap();
    let shape = grid.shape();
    let mut left = std::collections::HashSet::new();
    let mut right = std::collections::HashSet::new();
    for p in 0..shape.len() {
        let l = res.labels.get(p).unwrap();
        if shape.coords(p).0 < 48 {
            left.insert(l)
        } else {
            right.insert(l)
        };
    }
    assert!(left.len() <= 2, "flat half split into {}", left.len());
    assert!(right.len() > 20 * left.len());
}

#[test]
fn higher_threshold_gives_fewer_segments() {
    let (img, _) = scene_image(120, 90, 15, 21);
    let grid = build_feature_grid(&[img]).unwrap();
    let ks: Vec<usize> = [30.0, 60.0, 120.0, 240.0]
        .iter()
        .map(|&t| {
            segment(&grid, &SegmentationConfig::with_threshold(t))
                .unwrap()
                .k
        })
        .collect();
    assert!(ks.windows(2).all(|w| w[1] < w[0]), "{ks:?}");
}

#[test]
fn position_channels_split_flat_image() {
    let grid = build_feature_grid(&[RgbImage::from_pixel(20, 20, Rgb([1, 2, 3]))]).unwrap();
    let plain = segment(&grid, &SegmentationConfig::default()).unwrap();
    assert_eq!(plain.k, 1);
    let cfg = SegmentationConfig {
        spatial_weight: 5.0,
        ..Default::default()
    };
    let r = segment(&grid, &cfg).unwrap();
    assert!(r.k > 1, "position channels add information");
    assert!(disconnected_labels(&r.labels).is_empty());
    assert!(r.growth.iter().all(|s| s.info_bits < cfg.threshold));
}
