//! Scalar responses paired with one curve each, read from and written to a
//! plain CSV layout: a header `y,<t_0>,…,<t_m-1>` naming the grid points,
//! then one row per unit. Tecator files in either of their layouts are
//! accepted as well.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{FplmError, Result};
use crate::fda::{default_interior_knots, derivative, fit_bsplines, FunctionalSample, Grid, DEFAULT_ORDER};
use crate::sim::Triplets;
use crate::tecator::{parse_tecator_str, TecatorDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct CurveDataset {
    pub x: FunctionalSample,
    pub y: Vec<f64>,
}

impl CurveDataset {
    pub fn new(x: FunctionalSample, y: Vec<f64>) -> Result<Self> {
        if x.n_curves() != y.len() {
            return Err(FplmError::DimensionMismatch(format!(
                "{} curves, {} responses",
                x.n_curves(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// First `n_train` units, then the rest.
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

    /// Attach `Z`, the first derivative of each curve.
    pub fn triplets(&self) -> Result<Triplets> {
        Triplets::new(self.x.clone(), first_derivative(&self.x)?, self.y.clone())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("y") {
            return Err(FplmError::Parse {
                line: 1,
                msg: "first column must be `y`".into(),
            });
        }
        let points = header
            .iter()
            .skip(1)
            .map(|h| {
                h.parse::<f64>().map_err(|_| FplmError::Parse {
                    line: 1,
                    msg: format!("grid point {h:?} is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let grid = Grid::new(points)?;
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| FplmError::Parse {
                line,
                msg: e.to_string(),
            })?;
            let vals = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| FplmError::Parse {
                        line,
                        msg: format!("value {v:?} is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            y.push(vals[0]);
            rows.push(vals[1..].to_vec());
        }
        Self::new(FunctionalSample::from_rows(grid, &rows)?, y)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend(self.x.grid().points().iter().map(|p| format!("{p:?}")));
        w.write_record(&header)?;
        for (i, row) in self.x.rows().into_iter().enumerate() {
            let mut rec = vec![format!("{:?}", self.y[i])];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl From<TecatorDataset> for CurveDataset {
    fn from(d: TecatorDataset) -> Self {
        Self { x: d.spectra, y: d.fat }
    }
}

/// First derivative through the default cubic B-spline fit.
pub fn first_derivative(x: &FunctionalSample) -> Result<FunctionalSample> {
    derivative(&fit_bsplines(x, DEFAULT_ORDER, default_interior_knots(x.n_points()))?, 1)
}

/// Parse text in the plain layout or either Tecator layout.
pub fn parse_dataset_str(text: &str) -> Result<CurveDataset> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.split(',').next().map(str::trim) == Some("y") {
        CurveDataset::read_csv(text.as_bytes())
    } else {
        parse_tecator_str(text).map(CurveDataset::from)
    }
}

pub fn load_dataset(path: &Path) -> Result<CurveDataset> {
    let mut text = String::new();
    std::fs::File::open(path)
        .map_err(|e| FplmError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?
        .read_to_string(&mut text)?;
    parse_dataset_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_detection() {
        let draw = crate::sim::simulate_smooth(5, 2).unwrap();
        let d = CurveDataset::new(draw.x.clone(), draw.g.clone()).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(parse_dataset_str(&text).unwrap(), d);
        let (a, b) = d.split(3).unwrap();
        assert_eq!((a.len(), b.len()), (3, 2));
        assert!(d.split(5).is_err());
    }

    #[test]
    fn derivative_matches_simulation_pipeline() {
        let draw = crate::sim::simulate_smooth(4, 9).unwrap();
        let z = first_derivative(&draw.x).unwrap();
        assert!((z.values() - draw.z.values()).amax() < 1e-10);
    }

    #[test]
    fn bad_value_names_line() {
        match parse_dataset_str("y,0,1,2,3\n1,2,3,4,5\n1,oops,3,4,5\n") {
            Err(FplmError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
