//! Spatio-temporal join of in-situ records against a catalog of patches.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::records::InSituRecord;
use crate::error::Result;
use crate::parameter::Parameter;
use crate::raster::{geo, window_average, BandStack, Patch, GRID, PATCH_BANDS, PATCH_SIZE, WINDOW};

pub const DEFAULT_TOLERANCE_DAYS: i64 = 3;

/// One regression example: window-averaged reflectances and a measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: [f64; PATCH_BANDS],
    pub target: f64,
    pub parameter: Parameter,
    pub patch_id: String,
    /// (row, col) of the 10x10 window inside the patch.
    pub window: (usize, usize),
    pub station_id: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct CatalogPatch {
    pub id: String,
    pub patch: Patch,
}

#[derive(Debug, Clone)]
pub struct MatchReport {
    pub samples: Vec<Sample>,
    /// Indices into the input records that found no patch.
    pub unmatched: Vec<usize>,
}

/// Window containing the point at (east, north) meters from the patch center.
/// Points in the uncovered 6 px margin fall into the last window.
pub fn window_for_offset(east_m: f64, north_m: f64, gsd: f64) -> (usize, usize) {
    let half = PATCH_SIZE as f64 / 2.0;
    let to_window = |px: f64| {
        ((px.floor().clamp(0.0, (PATCH_SIZE - 1) as f64) as usize) / WINDOW).min(GRID - 1)
    };
    (
        to_window(half - north_m / gsd),
        to_window(half + east_m / gsd),
    )
}

/// Features of window (row, col) from a precomputed 25x25x7 grid.
pub fn grid_features(grid: &BandStack, row: usize, col: usize) -> [f64; PATCH_BANDS] {
    std::array::from_fn(|b| grid.get(b, row, col) as f64)
}

/// A record matches the patch whose footprint contains it (within half the patch
/// extent, 608 m, on both axes) and whose acquisition date is within
/// `tolerance_days`. Among candidates the nearest center wins, then the nearest
/// date, then catalog order.
pub fn match_records(
    records: &[InSituRecord],
    catalog: &[CatalogPatch],
    tolerance_days: i64,
) -> Result<MatchReport> {
    let mut grids: Vec<Option<BandStack>> = vec![None; catalog.len()];
    let mut samples = Vec::new();
    let mut unmatched = Vec::new();
    for (ri, rec) in records.iter().enumerate() {
        let mut best: Option<(f64, i64, usize, f64, f64)> = None;
        for (pi, entry) in catalog.iter().enumerate() {
            let g = entry.patch.georef();
            let days = (rec.date - g.acquisition_date).num_days().abs();
            if days > tolerance_days {
                continue;
            }
            let (east, north) = geo::displacement(g.center_lat, g.center_lon, rec.lat, rec.lon);
            // 608 m at 4.75 m/px
            let extent = PATCH_SIZE as f64 / 2.0 * g.gsd;
            if east.abs() > extent || north.abs() > extent {
                continue;
            }
            let dist = east.hypot(north);
            let better = match best {
                None => true,
                Some((bd, bdays, _, _, _)) => dist < bd || (dist == bd && days < bdays),
            };
            if better {
                best = Some((dist, days, pi, east, north));
            }
        }
        let Some((_, _, pi, east, north)) = best else {
            unmatched.push(ri);
            continue;
        };
        let entry = &catalog[pi];
        if grids[pi].is_none() {
            grids[pi] = Some(window_average(entry.patch.raster(), WINDOW)?);
        }
        let grid = grids[pi].as_ref().expect("filled above");
        let window = window_for_offset(east, north, entry.patch.georef().gsd);
        samples.push(Sample {
            features: grid_features(grid, window.0, window.1),
            target: rec.value,
            parameter: rec.parameter,
            patch_id: entry.id.clone(),
            window,
            station_id: rec.station_id.clone(),
            date: rec.date,
        });
    }
    Ok(MatchReport { samples, unmatched })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{ms_band_ids, GeoRef, TARGET_GSD};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn day(d: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 6, 10).unwrap() + chrono::Duration::days(d)
    }

    fn patch(lat: f64, lon: f64, date: NaiveDate, seed: f32) -> Patch {
        let r = BandStack::from_fn(256, 256, TARGET_GSD, ms_band_ids(), |b, r, c| {
            seed + (b * 7 + r / 10 * 31 + c / 10) as f32 * 1e-4
        })
        .unwrap();
        Patch::new(r, GeoRef::new(lat, lon, TARGET_GSD, date).unwrap()).unwrap()
    }

    fn record(lat: f64, lon: f64, date: NaiveDate) -> InSituRecord {
        InSituRecord {
            station_id: "S".into(),
            municipality: String::new(),
            location_name: String::new(),
            distance_from_coast_m: 0.0,
            date,
            depth_m: 0.0,
            parameter: Parameter::Turbidity,
            value: 2.0,
            lat,
            lon,
        }
    }

    #[test]
    fn tolerance_is_three_days() {
        let cat = vec![CatalogPatch {
            id: "p0".into(),
            patch: patch(44.0, 9.0, day(0), 0.1),
        }];
        let recs = vec![
            record(44.0, 9.0, day(1)),
            record(44.0, 9.0, day(4)),
            record(44.0, 9.0, day(-3)),
        ];
        let rep = match_records(&recs, &cat, DEFAULT_TOLERANCE_DAYS).unwrap();
        assert_eq!(rep.samples.len(), 2);
        assert_eq!(rep.unmatched, vec![1]);
        assert_eq!(rep.samples[0].window, (12, 12));
    }

    #[test]
    fn features_equal_window_average_of_source_patch() {
        let p = patch(44.0, 9.0, day(0), 0.1);
        let (lat, lon) = geo::offset(44.0, 9.0, -500.0, 450.0);
        let cat = vec![CatalogPatch {
            id: "p0".into(),
            patch: p.clone(),
        }];
        let rep = match_records(&[record(lat, lon, day(0))], &cat, 3).unwrap();
        let s = &rep.samples[0];
        // 128 - 450/4.75 = 33.3 -> row 3; 128 - 500/4.75 = 22.7 -> col 2
        assert_eq!(s.window, (3, 2));
        let grid = window_average(p.raster(), WINDOW).unwrap();
        assert_eq!(s.features, grid_features(&grid, 3, 2));
    }

    #[test]
    fn nearest_date_breaks_ties_between_acquisitions() {
        let cat = vec![
            CatalogPatch {
                id: "early".into(),
                patch: patch(44.0, 9.0, day(-2), 0.1),
            },
            CatalogPatch {
                id: "late".into(),
                patch: patch(44.0, 9.0, day(1), 0.2),
            },
        ];
        let rep = match_records(&[record(44.0, 9.0, day(0))], &cat, 3).unwrap();
        assert_eq!(rep.samples[0].patch_id, "late");
    }

    #[test]
    fn random_join_matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cat: Vec<CatalogPatch> = (0..5)
            .map(|i| {
                let lat = 44.0 + 0.008 * i as f64;
                CatalogPatch {
                    id: format!("p{i}"),
                    patch: patch(lat, 9.0, day(i as i64 * 2), i as f32 * 0.01),
                }
            })
            .collect();
        let recs: Vec<InSituRecord> = (0..50)
            .map(|_| {
                let lat = 44.0 + rng.random_range(-0.01..0.045);
                let lon = 9.0 + rng.random_range(-0.01..0.01);
                record(lat, lon, day(rng.random_range(-3..12)))
            })
            .collect();
        let rep = match_records(&recs, &cat, 3).unwrap();

        // oracle: every (record, patch) pair, footprint + date check, pick min distance
        let mut oracle: Vec<(usize, String)> = Vec::new();
        for (ri, r) in recs.iter().enumerate() {
            let mut pairs: Vec<(f64, i64, usize)> = Vec::new();
            for (pi, c) in cat.iter().enumerate() {
                let g = c.patch.georef();
                let north = (r.lat - g.center_lat) * 111_320.0;
                let east = (r.lon - g.center_lon) * 111_320.0 * g.center_lat.to_radians().cos();
                let days = (r.date - g.acquisition_date).num_days().abs();
                if north.abs() <= 608.0 && east.abs() <= 608.0 && days <= 3 {
                    pairs.push((east.hypot(north), days, pi));
                }
            }
            pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if let Some(&(_, _, pi)) = pairs.first() {
                oracle.push((ri, cat[pi].id.clone()));
            }
        }
        let matched: Vec<usize> = (0..recs.len())
            .filter(|i| !rep.unmatched.contains(i))
            .collect();
        assert_eq!(matched.len(), oracle.len());
        for ((ri, id), s) in oracle.iter().zip(&rep.samples) {
            assert!(matched.contains(ri));
            assert_eq!(&s.patch_id, id);
        }
        assert!(!oracle.is_empty() && !rep.unmatched.is_empty());

        // record order does not change the matched set
        let mut rev = recs.clone();
        rev.reverse();
        let rep2 = match_records(&rev, &cat, 3).unwrap();
        let key = |s: &Sample| (s.patch_id.clone(), s.window, s.date);
        let mut a: Vec<_> = rep.samples.iter().map(key).collect();
        let mut b: Vec<_> = rep2.samples.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
