use super::bands::{MS_BANDS, PAN_BAND};
use crate::error::{Error, Result};
use crate::raster::BandStack;

/// Bandwidth-proportional weights over the multispectral bands lying wholly inside
/// the PAN pass band (500-750 nm), normalized to 1.
pub fn default_pan_weights() -> Vec<f64> {
    let raw: Vec<f64> = MS_BANDS
        .iter()
        .map(|b| {
            if b.cut_on_nm >= PAN_BAND.cut_on_nm && b.cut_off_nm <= PAN_BAND.cut_off_nm {
                b.cut_off_nm - b.cut_on_nm
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// pan(x, y) = sum_b w_b * band_b(x, y)
pub fn synthesize_pan(scene: &BandStack, weights: &[f64]) -> Result<BandStack> {
    if weights.len() != scene.bands() {
        return Err(Error::invalid(format!(
            "{} PAN weights for {} bands",
            weights.len(),
            scene.bands()
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "PAN weights sum to {total}, expected 1"
        )));
    }
    let mut acc = vec![0f64; scene.plane_len()];
    for (b, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (a, &v) in acc.iter_mut().zip(scene.band(b)) {
            *a += w * v as f64;
        }
    }
    BandStack::new(
        scene.width(),
        scene.height(),
        scene.gsd(),
        vec![PAN_BAND.id.to_string()],
        acc.into_iter().map(|v| v as f32).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ms_band_ids;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_weights_cover_ms2_to_ms5() {
        let w = default_pan_weights();
        let expected = [
            0.0,
            35.0 / 95.0,
            30.0 / 95.0,
            15.0 / 95.0,
            15.0 / 95.0,
            0.0,
            0.0,
        ];
        for (a, e) in w.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_projects_and_uniform_averages() {
        let s = BandStack::from_fn(8, 6, 10.0, ms_band_ids(), |b, r, c| {
            (b * 100 + r * 8 + c) as f32
        })
        .unwrap();
        let mut one_hot = vec![0.0; 7];
        one_hot[2] = 1.0;
        assert_eq!(synthesize_pan(&s, &one_hot).unwrap().band(0), s.band(2));

        let consts = [0.1f32, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let c = BandStack::from_fn(4, 4, 10.0, ms_band_ids(), |b, _, _| consts[b]).unwrap();
        let pan = synthesize_pan(&c, &[1.0 / 7.0; 7]).unwrap();
        assert!(pan.data().iter().all(|&v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn default_weights_match_dot_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = BandStack::from_fn(13, 9, 10.0, ms_band_ids(), |_, _, _| {
            rng.random_range(0.0..1.0)
        })
        .unwrap();
        let w = default_pan_weights();
        let pan = synthesize_pan(&s, &w).unwrap();
        for r in 0..9 {
            for c in 0..13 {
                let dot: f64 = (0..7).map(|b| w[b] * s.get(b, r, c) as f64).sum();
                assert!((pan.get(0, r, c) as f64 - dot).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn weight_errors() {
        let s = BandStack::filled(2, 2, 10.0, ms_band_ids(), 0.1).unwrap();
        assert!(synthesize_pan(&s, &[0.5, 0.5]).is_err());
        assert!(synthesize_pan(&s, &[0.5; 7]).is_err());
    }
}
