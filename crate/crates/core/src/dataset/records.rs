//! In-situ station measurements.
//!
//! CSV schema (header names, ISO-8601 dates, decimal degrees):
//!
//! ```text
//! station_id,municipality,location_name,distance_from_coast_m,date,depth_m,parameter,value,lat,lon
//! ```
//!
//! `municipality`, `location_name` and `distance_from_coast_m` are optional columns;
//! the rest are mandatory. `parameter` is `turbidity_NTU` or `pH`.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parameter::Parameter;

pub const MANDATORY_COLUMNS: [&str; 7] = [
    "station_id",
    "date",
    "depth_m",
    "parameter",
    "value",
    "lat",
    "lon",
];
pub const OPTIONAL_COLUMNS: [&str; 3] = ["municipality", "location_name", "distance_from_coast_m"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InSituRecord {
    pub station_id: String,
    pub municipality: String,
    pub location_name: String,
    pub distance_from_coast_m: f64,
    pub date: NaiveDate,
    /// Meters below the surface.
    pub depth_m: f64,
    pub parameter: Parameter,
    pub value: f64,
    pub lat: f64,
    pub lon: f64,
}

impl InSituRecord {
    pub fn validate(&self) -> Result<()> {
        self.parameter.check_value(self.value)?;
        if !(self.depth_m >= 0.0 && self.depth_m.is_finite()) {
            return Err(Error::invalid(format!(
                "depth {} m must be non-negative",
                self.depth_m
            )));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::invalid(format!(
                "coordinates ({}, {}) out of range",
                self.lat, self.lon
            )));
        }
        if self.station_id.is_empty() {
            return Err(Error::invalid("empty station id"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostic {
    /// 1-based data row (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub records: Vec<InSituRecord>,
    pub rejected: Vec<RowDiagnostic>,
    pub duplicates_removed: usize,
}

fn parse_row(get: impl Fn(&str) -> Option<String>) -> Result<InSituRecord> {
    let req = |name: &str| get(name).ok_or_else(|| Error::invalid(format!("missing {name}")));
    let num = |name: &str, s: String| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("{name} {s:?} is not a number")))
    };
    let date_s = req("date")?;
    let date = NaiveDate::parse_from_str(date_s.trim(), "%Y-%m-%d")
        .map_err(|_| Error::invalid(format!("date {date_s:?} is not ISO-8601 (YYYY-MM-DD)")))?;
    let distance = match get("distance_from_coast_m") {
        Some(s) if !s.trim().is_empty() => num("distance_from_coast_m", s)?,
        _ => 0.0,
    };
    let rec = InSituRecord {
        station_id: req("station_id")?.trim().to_string(),
        municipality: get("municipality").unwrap_or_default(),
        location_name: get("location_name").unwrap_or_default(),
        distance_from_coast_m: distance,
        date,
        depth_m: num("depth_m", req("depth_m")?)?,
        parameter: req("parameter")?.parse()?,
        value: num("value", req("value")?)?,
        lat: num("lat", req("lat")?)?,
        lon: num("lon", req("lon")?)?,
    };
    rec.validate()?;
    Ok(rec)
}

/// Parse a schema-conforming CSV. Bad rows are rejected with diagnostics; exact
/// duplicates of (station, date, depth, parameter) keep their first occurrence.
pub fn ingest_records(source: impl Read) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let missing: Vec<&str> = MANDATORY_COLUMNS
        .iter()
        .copied()
        .filter(|c| !headers.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "missing mandatory columns: {}",
            missing.join(", ")
        )));
    }
    let col: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    let mut duplicates_removed = 0;
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowDiagnostic {
                    row: row_no,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let get = |name: &str| col.get(name).and_then(|&j| row.get(j)).map(str::to_string);
        match parse_row(get) {
            Ok(rec) => {
                let key = (
                    rec.station_id.clone(),
                    rec.date,
                    rec.depth_m.to_bits(),
                    rec.parameter,
                );
                if seen.insert(key) {
                    records.push(rec);
                } else {
                    duplicates_removed += 1;
                }
            }
            Err(e) => rejected.push(RowDiagnostic {
                row: row_no,
                reason: e.to_string(),
            }),
        }
    }
    Ok(IngestReport {
        records,
        rejected,
        duplicates_removed,
    })
}

pub fn write_records(sink: impl Write, records: &[InSituRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "station_id",
        "municipality",
        "location_name",
        "distance_from_coast_m",
        "date",
        "depth_m",
        "parameter",
        "value",
        "lat",
        "lon",
    ])?;
    for r in records {
        w.write_record([
            r.station_id.clone(),
            r.municipality.clone(),
            r.location_name.clone(),
            r.distance_from_coast_m.to_string(),
            r.date.format("%Y-%m-%d").to_string(),
            r.depth_m.to_string(),
            r.parameter.csv_name().to_string(),
            r.value.to_string(),
            r.lat.to_string(),
            r.lon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// For each (station, date, parameter) keep the shallowest record, first occurrence on ties.
/// Groups are returned in order of first appearance.
pub fn select_surface(records: &[InSituRecord]) -> Vec<InSituRecord> {
    let mut best: HashMap<(&str, NaiveDate, Parameter), usize> = HashMap::new();
    let mut order = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let key = (r.station_id.as_str(), r.date, r.parameter);
        match best.get_mut(&key) {
            Some(j) => {
                if r.depth_m < records[*j].depth_m {
                    *j = i;
                }
            }
            None => {
                best.insert(key, i);
                order.push(key);
            }
        }
    }
    order
        .into_iter()
        .map(|k| records[best[&k]].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const HEADER: &str = "station_id,municipality,location_name,distance_from_coast_m,date,depth_m,parameter,value,lat,lon\n";

    fn rec(station: &str, day: u32, depth: f64, value: f64) -> InSituRecord {
        InSituRecord {
            station_id: station.into(),
            municipality: String::new(),
            location_name: String::new(),
            distance_from_coast_m: 500.0,
            date: NaiveDate::from_ymd_opt(2024, 5, day).unwrap(),
            depth_m: depth,
            parameter: Parameter::Ph,
            value,
            lat: 44.3,
            lon: 9.1,
        }
    }

    #[test]
    fn well_formed_file() {
        let csv = format!(
            "{HEADER}ST1,Genova,Foce,500,2024-05-01,0.5,pH,8.1,44.40,8.93\n\
             ST1,Genova,Foce,500,2024-05-01,0.5,turbidity_NTU,1.2,44.40,8.93\n\
             ST2,Savona,Porto,1000,2024-05-03,0,pH,8.05,44.30,8.48\n"
        );
        let rep = ingest_records(csv.as_bytes()).unwrap();
        assert_eq!(rep.records.len(), 3);
        assert!(rep.rejected.is_empty());
        assert_eq!(rep.records[1].parameter, Parameter::Turbidity);
        assert_eq!(rep.records[2].municipality, "Savona");
    }

    #[test]
    fn out_of_range_ph_is_rejected_with_row() {
        let csv = format!("{HEADER}ST1,,,,2024-05-01,0.5,pH,17,44.4,8.9\nST1,,,,2024-05-02,0.5,pH,8,44.4,8.9\nST1,,,,bad-date,0.5,pH,8,44.4,8.9\n");
        let rep = ingest_records(csv.as_bytes()).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert_eq!(rep.rejected.len(), 2);
        assert_eq!(rep.rejected[0].row, 1);
        assert!(rep.rejected[0].reason.contains("pH 17"));
        assert_eq!(rep.rejected[1].row, 3);
    }

    #[test]
    fn missing_mandatory_column_is_schema_error() {
        let csv = "station_id,date,depth_m,parameter,value,lat\nST1,2024-05-01,0,pH,8,44\n";
        match ingest_records(csv.as_bytes()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("lon")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn duplicates_match_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        for _ in 0..200 {
            let st = rng.random_range(0..4);
            let day = rng.random_range(1..4);
            let depth: f64 = [0.0, 0.5, 3.0][rng.random_range(0..3)];
            let p = if rng.random_bool(0.5) {
                "pH"
            } else {
                "turbidity_NTU"
            };
            rows.push((st, day, depth, p));
        }
        let mut csv = HEADER.to_string();
        for &(st, day, depth, p) in &rows {
            csv.push_str(&format!(
                "S{st},,,,2024-05-0{day},{depth},{p},1.0,44.4,8.9\n"
            ));
        }
        let rep = ingest_records(csv.as_bytes()).unwrap();
        let unique: HashSet<_> = rows
            .iter()
            .map(|&(s, d, z, p)| (s, d, z.to_bits(), p))
            .collect();
        assert_eq!(rep.records.len(), unique.len());
        assert_eq!(rep.duplicates_removed, rows.len() - unique.len());
    }

    #[test]
    fn csv_write_round_trip() {
        let records = vec![rec("A", 1, 0.5, 8.1), rec("B", 2, 0.0, 7.9)];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        assert_eq!(ingest_records(buf.as_slice()).unwrap().records, records);
    }

    #[test]
    fn surface_keeps_shallowest() {
        let recs = vec![
            rec("A", 1, 3.0, 8.0),
            rec("A", 1, 0.5, 8.2),
            rec("A", 1, 10.0, 7.5),
        ];
        let s = select_surface(&recs);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].depth_m, 0.5);
        assert_eq!(select_surface(&recs[..1]), recs[..1].to_vec());
        // ties keep the first occurrence
        let tie = vec![rec("A", 1, 0.5, 1.0), rec("A", 1, 0.5, 2.0)];
        assert_eq!(select_surface(&tie)[0].value, 1.0);
    }

    #[test]
    fn surface_matches_group_by_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut recs = Vec::new();
        for i in 0..300 {
            let mut r = rec(
                &format!("S{}", rng.random_range(0..6)),
                rng.random_range(1..5),
                rng.random_range(0..20) as f64 * 0.5,
                i as f64 * 0.01,
            );
            if rng.random_bool(0.5) {
                r.parameter = Parameter::Turbidity;
            }
            recs.push(r);
        }
        recs.shuffle(&mut rng);
        let got = select_surface(&recs);
        let keys: HashSet<_> = recs
            .iter()
            .map(|r| (r.station_id.clone(), r.date, r.parameter))
            .collect();
        assert_eq!(got.len(), keys.len());
        for g in &got {
            let group: Vec<&InSituRecord> = recs
                .iter()
                .filter(|r| {
                    r.station_id == g.station_id && r.date == g.date && r.parameter == g.parameter
                })
                .collect();
            let min = group
                .iter()
                .map(|r| r.depth_m)
                .fold(f64::INFINITY, f64::min);
            let first_min = group.iter().find(|r| r.depth_m == min).unwrap();
            assert_eq!(g, *first_min);
        }
    }
}
