mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seawatch::raster::{mosaic, ms_band_ids, tile_scene, window_average, GRID, PATCH_SIZE, TARGET_GSD};
use seawatch::BandStack;

fn random_stack(w: usize, h: usize, bands: usize, seed: u64) -> BandStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (0..bands).map(|b| format!("b{b}")).collect();
    BandStack::from_fn(w, h, 10.0, ids, |_, _, _| rng.random_range(-1.0f32..1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_average_is_linear(
        w in 10usize..40, h in 10usize..40, bands in 1usize..4, window in 1usize..11,
        a in -3.0f32..3.0, b in -3.0f32..3.0, seed in any::<u64>(),
    ) {
        prop_assume!(window <= w.min(h));
        let x = random_stack(w, h, bands, seed);
        let y = random_stack(w, h, bands, seed ^ 0x5eed);
        let data = x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect();
        let mix = BandStack::new(w, h, 10.0, x.band_ids().to_vec(), data).unwrap();
        let (ax, ay, am) = (
            window_average(&x, window).unwrap(),
            window_average(&y, window).unwrap(),
            window_average(&mix, window).unwrap(),
        );
        prop_assert_eq!((am.width(), am.height()), ((w - window) / window + 1, (h - window) / window + 1));
        let scale = 1.0 + a.abs() as f64 + b.abs() as f64;
        for i in 0..am.data().len() {
            let expect = a as f64 * ax.data()[i] as f64 + b as f64 * ay.data()[i] as f64;
            prop_assert!((am.data()[i] as f64 - expect).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn window_one_is_identity(w in 1usize..30, h in 1usize..30, seed in any::<u64>()) {
        let x = random_stack(w, h, 2, seed);
        let avg = window_average(&x, 1).unwrap();
        prop_assert_eq!(avg.data(), x.data());
    }

    #[test]
    fn tiles_are_disjoint_aligned_and_mosaic_is_a_bijection(w in 256usize..720, h in 256usize..720) {
        let scene = BandStack::filled(w, h, TARGET_GSD, ms_band_ids(), 0.05).unwrap();
        let tiling = tile_scene(&scene, &georef()).unwrap();
        let (ty, tx) = (h / PATCH_SIZE, w / PATCH_SIZE);
        prop_assert_eq!(tiling.index.placements.len(), ty * tx);
        let mut expected = Vec::new();
        for r in 0..ty {
            for c in 0..tx {
                expected.push((r * PATCH_SIZE, c * PATCH_SIZE));
            }
        }
        // row-major and stride 256 implies disjoint
        prop_assert_eq!(&tiling.index.placements, &expected);
        prop_assert_eq!(tiling.margins(), (h - ty * PATCH_SIZE, w - tx * PATCH_SIZE));

        let grids: Vec<BandStack> = (0..expected.len())
            .map(|k| BandStack::filled(GRID, GRID, 47.5, vec!["k".into()], k as f32).unwrap())
            .collect();
        let m = mosaic(&grids, &tiling.index).unwrap();
        prop_assert_eq!((m.width(), m.height()), (GRID * tx, GRID * ty));
        let mut seen = vec![0usize; expected.len()];
        for r in 0..m.height() {
            for c in 0..m.width() {
                let k = m.get(0, r, c) as usize;
                prop_assert_eq!(k, (r / GRID) * tx + c / GRID);
                seen[k] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&n| n == GRID * GRID));
    }
}

#[test]
fn scene_tiles_carry_scene_content() {
    let s = scene(600, 300, 4);
    let tiling = tile_scene(&s.raster, &s.georef).unwrap();
    assert_eq!(tiling.patches.len(), 2);
    assert_eq!(tiling.margins(), (44, 88));
    let (r0, c0) = tiling.index.placements[1];
    let p = tiling.patches[1].raster();
    for b in [0, 6] {
        for (r, c) in [(0, 0), (17, 200), (255, 255)] {
            assert_eq!(p.get(b, r, c), s.raster.get(b, r0 + r, c0 + c));
        }
    }
}
