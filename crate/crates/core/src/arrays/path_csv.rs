use std::io::{Read, Write};

use num_complex::Complex;
use thiserror::Error;

use super::{AnglePair, Path, PathSet};

pub const PATH_CSV_HEADER: [&str; 10] = [
    "location_id",
    "x_m",
    "y_m",
    "z_m",
    "gain_re",
    "gain_im",
    "aoa_zenith_rad",
    "aoa_azimuth_rad",
    "aod_zenith_rad",
    "aod_azimuth_rad",
];

#[derive(Debug, Error)]
pub enum PathCsvError {
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: {field} = {value} is out of range ({reason})")]
    AngleOutOfRange {
        line: u64,
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Parses path rows; rows sharing a `location_id` form one [`PathSet`], in order of first appearance.
pub fn import_paths_csv<R: Read>(reader: R) -> Result<Vec<PathSet>, PathCsvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(PATH_CSV_HEADER.iter().copied()) {
        return Err(PathCsvError::Malformed {
            line: 1,
            reason: format!("expected header `{}`", PATH_CSV_HEADER.join(",")),
        });
    }
    let mut ids: Vec<String> = Vec::new();
    let mut sets: Vec<PathSet> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| PathCsvError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != PATH_CSV_HEADER.len() {
            return Err(PathCsvError::Malformed {
                line,
                reason: format!("expected {} fields, found {}", PATH_CSV_HEADER.len(), record.len()),
            });
        }
        let num = |i: usize| -> Result<f64, PathCsvError> {
            let v: f64 = record[i].parse().map_err(|_| PathCsvError::Malformed {
                line,
                reason: format!("{} is not a number: `{}`", PATH_CSV_HEADER[i], &record[i]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(PathCsvError::Malformed {
                    line,
                    reason: format!("{} is not finite", PATH_CSV_HEADER[i]),
                })
            }
        };
        let location = [num(1)?, num(2)?, num(3)?];
        let gain = Complex::new(num(4)?, num(5)?);
        let aoa = checked_angle(line, num(6)?, num(7)?, "aoa_zenith_rad", "aoa_azimuth_rad")?;
        let aod = checked_angle(line, num(8)?, num(9)?, "aod_zenith_rad", "aod_azimuth_rad")?;
        let id = &record[0];
        if id.is_empty() {
            return Err(PathCsvError::Malformed {
                line,
                reason: "empty location_id".into(),
            });
        }
        let path = Path { gain, aoa, aod };
        match ids.iter().position(|x| x == id) {
            Some(k) => {
                if sets[k].location != location {
                    return Err(PathCsvError::Malformed {
                        line,
                        reason: format!("location `{id}` repeated with different coordinates"),
                    });
                }
                sets[k].paths.push(path);
            }
            None => {
                ids.push(id.to_string());
                sets.push(PathSet::new(location, vec![path]));
            }
        }
    }
    Ok(sets)
}

fn checked_angle(
    line: u64,
    zenith: f64,
    azimuth: f64,
    zname: &'static str,
    aname: &'static str,
) -> Result<AnglePair, PathCsvError> {
    if !(0.0..=std::f64::consts::PI).contains(&zenith) {
        return Err(PathCsvError::AngleOutOfRange {
            line,
            field: zname,
            value: zenith,
            reason: "zenith must lie in [0, pi]",
        });
    }
    if !(0.0..2.0 * std::f64::consts::PI).contains(&azimuth) {
        return Err(PathCsvError::AngleOutOfRange {
            line,
            field: aname,
            value: azimuth,
            reason: "azimuth must lie in [0, 2pi)",
        });
    }
    Ok(AnglePair { zenith, azimuth })
}

/// Writes path sets with ids `loc0`, `loc1`, ...; location sets without paths produce no rows.
pub fn export_paths_csv<W: Write>(writer: W, sets: &[PathSet]) -> Result<(), PathCsvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PATH_CSV_HEADER)?;
    for (i, set) in sets.iter().enumerate() {
        let id = format!("loc{i}");
        for p in &set.paths {
            let fields = [
                set.location[0],
                set.location[1],
                set.location[2],
                p.gain.re,
                p.gain.im,
                p.aoa.zenith,
                p.aoa.azimuth,
                p.aod.zenith,
                p.aod.azimuth,
            ];
            let mut row = vec![id.clone()];
            row.extend(fields.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
