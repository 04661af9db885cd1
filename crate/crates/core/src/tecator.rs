//! Tecator near-infrared meat spectra: 100 absorbance channels over
//! 850–1050 nm and the fat content of each sample.
//!
//! Two layouts are read:
//!
//! * canonical CSV with header `spectrum_0,…,spectrum_99,fat` (extra columns
//!   such as `water` or `protein` are ignored);
//! * the classic whitespace archive, where free text precedes the data and
//!   each record is 125 numbers spread over whole lines: 100 absorbances,
//!   22 principal-component scores, then moisture, fat and protein. Only the
//!   first 215 records are kept. A record boundary that falls inside a line
//!   means a value is missing or extra, and is reported against that record.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{FplmError, Result};
use crate::fda::{default_interior_knots, derivative, fit_bsplines, FunctionalSample, Grid, DEFAULT_ORDER};

pub const CHANNELS: usize = 100;
pub const RECORDS: usize = 215;
pub const CLASSIC_RECORD_LEN: usize = 125;
const CLASSIC_FAT_OFFSET: usize = 123;
pub const WAVELENGTH_LO: f64 = 850.0;
pub const WAVELENGTH_HI: f64 = 1050.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TecatorDataset {
    pub spectra: FunctionalSample,
    pub fat: Vec<f64>,
}

/// Wavelength grid in nanometres.
pub fn wavelength_grid() -> Grid {
    Grid::equispaced(WAVELENGTH_LO, WAVELENGTH_HI, CHANNELS).expect("valid wavelength grid")
}

impl TecatorDataset {
    pub fn new(rows: Vec<Vec<f64>>, fat: Vec<f64>) -> Result<Self> {
        if rows.len() != fat.len() {
            return Err(FplmError::DimensionMismatch("spectra and fat counts differ".into()));
        }
        if let Some(i) = fat.iter().position(|f| !(0.0..=100.0).contains(f)) {
            return Err(FplmError::InvalidArgument(format!(
                "record {}: fat {} outside [0, 100]",
                i + 1,
                fat[i]
            )));
        }
        let spectra = FunctionalSample::from_rows(wavelength_grid(), &rows)?;
        Ok(Self { spectra, fat })
    }

    pub fn len(&self) -> usize {
        self.fat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fat.is_empty()
    }

    /// `q`-th derivative of the spectra through the default cubic B-spline fit.
    pub fn derivative(&self, q: usize) -> Result<FunctionalSample> {
        let m = self.spectra.n_points();
        derivative(&fit_bsplines(&self.spectra, DEFAULT_ORDER, default_interior_knots(m))?, q)
    }

    /// Rows by index, e.g. a train/test split or a bootstrap resample.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            spectra: self.spectra.select(idx),
            fat: idx.iter().map(|&i| self.fat[i]).collect(),
        }
    }

    /// First `n_train` records, then the rest.
    pub fn split(&self, n_train: usize) -> Result<(Self, Self)> {
        if n_train == 0 || n_train >= self.len() {
            return Err(FplmError::InvalidArgument(format!(
                "training size {n_train} must lie in 1..{}",
                self.len()
            )));
        }
        let train: Vec<usize> = (0..n_train).collect();
        let test: Vec<usize> = (n_train..self.len()).collect();
        Ok((self.select(&train), self.select(&test)))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..CHANNELS).map(|j| format!("spectrum_{j}")).collect();
        header.push("fat".into());
        w.write_record(&header)?;
        for (i, row) in self.spectra.rows().into_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{:?}", self.fat[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Read either layout, deciding by the first non-blank line.
pub fn parse_tecator(path: &Path) -> Result<TecatorDataset> {
    let mut text = String::new();
    std::fs::File::open(path)
        .map_err(|e| FplmError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?
        .read_to_string(&mut text)?;
    parse_tecator_str(&text)
}

pub fn parse_tecator_str(text: &str) -> Result<TecatorDataset> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains("spectrum_0") {
        read_canonical(text.as_bytes())
    } else {
        read_classic(text.as_bytes())
    }
}

pub fn read_canonical<R: Read>(reader: R) -> Result<TecatorDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let spec_cols: Vec<usize> = (0..CHANNELS)
        .map(|j| {
            col(&format!("spectrum_{j}")).ok_or_else(|| FplmError::Parse {
                line: 1,
                msg: format!("missing column spectrum_{j}"),
            })
        })
        .collect::<Result<_>>()?;
    let fat_col = col("fat").ok_or_else(|| FplmError::Parse {
        line: 1,
        msg: "missing column fat".into(),
    })?;
    let mut rows = Vec::new();
    let mut fat = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != header.len() {
            return Err(FplmError::Parse {
                line,
                msg: format!("record {} has {} fields, header has {}", k + 1, rec.len(), header.len()),
            });
        }
        let num = |c: usize| -> Result<f64> {
            rec[c].parse::<f64>().map_err(|_| FplmError::Parse {
                line,
                msg: format!("record {}: {:?} is not a number", k + 1, &rec[c]),
            })
        };
        rows.push(spec_cols.iter().map(|&c| num(c)).collect::<Result<Vec<f64>>>()?);
        fat.push(num(fat_col)?);
    }
    TecatorDataset::new(rows, fat)
}

pub fn read_classic<R: Read>(reader: R) -> Result<TecatorDataset> {
    let mut rows = Vec::new();
    let mut fat = Vec::new();
    let mut current: Vec<f64> = Vec::with_capacity(CLASSIC_RECORD_LEN);
    let mut record_start = 0;
    let mut in_data = false;
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let parsed: Option<Vec<f64>> = tokens.iter().map(|t| t.parse::<f64>().ok()).collect();
        let values = match parsed {
            Some(v) => v,
            None if !in_data => continue,
            None => {
                return Err(FplmError::Parse {
                    line: lineno,
                    msg: format!("record {}: non-numeric token in data section", rows.len() + 1),
                })
            }
        };
        in_data = true;
        if current.is_empty() {
            record_start = lineno;
        }
        current.extend(values);
        if current.len() > CLASSIC_RECORD_LEN {
            return Err(FplmError::Parse {
                line: record_start,
                msg: format!(
                    "record {} (lines {record_start}-{lineno}) does not end on a line boundary: \
                     expected {CLASSIC_RECORD_LEN} values ({CHANNELS} channels, 22 scores, moisture, fat, protein)",
                    rows.len() + 1
                ),
            });
        }
        if current.len() == CLASSIC_RECORD_LEN {
            rows.push(current[..CHANNELS].to_vec());
            fat.push(current[CLASSIC_FAT_OFFSET]);
            current.clear();
            if rows.len() == RECORDS {
                break;
            }
        }
    }
    if !current.is_empty() {
        return Err(FplmError::Parse {
            line: record_start,
            msg: format!(
                "record {} is incomplete: {} of {CLASSIC_RECORD_LEN} values",
                rows.len() + 1,
                current.len()
            ),
        });
    }
    if rows.len() < RECORDS {
        return Err(FplmError::Parse {
            line: 0,
            msg: format!("found {} records, expected at least {RECORDS}", rows.len()),
        });
    }
    TecatorDataset::new(rows, fat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_records(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows = (0..n)
            .map(|i| (0..CHANNELS).map(|j| 2.5 + 0.01 * i as f64 + 0.001 * j as f64).collect())
            .collect();
        let fat = (0..n).map(|i| (i % 50) as f64 + 0.5).collect();
        (rows, fat)
    }

    fn classic_text(rows: &[Vec<f64>], fat: &[f64]) -> String {
        let mut s = String::from("Tecator data\nsome description lines\n\n");
        for (r, f) in rows.iter().zip(fat) {
            let mut vals = r.clone();
            vals.extend((0..22).map(|k| k as f64 * 0.1));
            vals.extend([60.0, *f, 17.0]);
            for chunk in vals.chunks(5) {
                let line: Vec<String> = chunk.iter().map(|v| format!("{v:.5}")).collect();
                s.push_str(&format!("  {}\n", line.join("  ")));
            }
        }
        s
    }

    #[test]
    fn classic_layout() {
        let (rows, fat) = fake_records(240);
        let d = parse_tecator_str(&classic_text(&rows, &fat)).unwrap();
        assert_eq!(d.len(), 215);
        assert_eq!(d.spectra.n_points(), 100);
        assert_eq!(d.fat[3], 3.5);
        assert!((d.spectra.values()[(2, 7)] - rows[2][7]).abs() < 1e-9);
    }

    #[test]
    fn short_record_is_named() {
        let (mut rows, fat) = fake_records(215);
        rows[4].pop();
        let err = parse_tecator_str(&classic_text(&rows, &fat)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("record 5"), "{msg}");
    }

    #[test]
    fn canonical_round_trip() {
        let (rows, fat) = fake_records(215);
        let d = TecatorDataset::new(rows, fat).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = parse_tecator_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn canonical_missing_channel() {
        let (rows, fat) = fake_records(3);
        let d = TecatorDataset::new(rows, fat).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        // drop one value from the second record
        let lines: Vec<String> = text.lines().map(String::from).collect();
        let mut broken = lines[2].split(',').collect::<Vec<_>>();
        broken.remove(10);
        text = format!("{}\n{}\n{}\n{}\n", lines[0], lines[1], broken.join(","), lines[3]);
        let err = parse_tecator_str(&text).unwrap_err();
        assert!(matches!(err, FplmError::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("record 2"));
    }

    #[test]
    fn bad_fat_and_split() {
        let (rows, mut fat) = fake_records(5);
        fat[1] = 120.0;
        assert!(TecatorDataset::new(rows.clone(), fat).is_err());
        let d = TecatorDataset::new(rows, vec![1.0; 5]).unwrap();
        let (a, b) = d.split(3).unwrap();
        assert_eq!((a.len(), b.len()), (3, 2));
        assert!(d.split(5).is_err());
    }
}
