use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{FplmError, Result};

/// `n` discretized curves sharing one grid; row `i` holds curve `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    grid: Grid,
    values: DMatrix<f64>,
}

impl FunctionalSample {
    pub fn new(grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(FplmError::DimensionMismatch(format!(
                "{} columns for a grid of {} points",
                values.ncols(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let row = pos % values.nrows();
            return Err(FplmError::InvalidArgument(format!(
                "non-finite value in curve {row}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_rows(grid: Grid, rows: &[Vec<f64>]) -> Result<Self> {
        let m = grid.len();
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(FplmError::DimensionMismatch(format!(
                "curve {i} has {} values, grid has {m}",
                rows[i].len()
            )));
        }
        let values = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Curves as contiguous row vectors.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_curves()).map(|i| self.curve(i)).collect()
    }

    /// New sample made of the listed curves, in that order (repeats allowed).
    pub fn select(&self, idx: &[usize]) -> Self {
        let values = DMatrix::from_fn(idx.len(), self.n_points(), |i, j| self.values[(idx[i], j)]);
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn check_compatible(&self, other: &FunctionalSample) -> Result<()> {
        if self.grid.is_compatible(&other.grid) {
            Ok(())
        } else {
            Err(FplmError::DimensionMismatch(format!(
                "grid mismatch: {} points vs {} points or differing abscissae",
                self.n_points(),
                other.n_points()
            )))
        }
    }

    /// Read the CSV exchange format: a header row of grid points, then one
    /// row per curve.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let points = header
            .iter()
            .map(|h| {
                h.parse::<f64>().map_err(|_| FplmError::Parse {
                    line: 1,
                    msg: format!("grid point {h:?} is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let grid = Grid::new(points)?;
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let row = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| FplmError::Parse {
                        line,
                        msg: format!("value {v:?} is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != grid.len() {
                return Err(FplmError::Parse {
                    line,
                    msg: format!("{} values, expected {}", row.len(), grid.len()),
                });
            }
            rows.push(row);
        }
        Self::from_rows(grid, &rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.grid.points().iter().map(|p| format!("{p:?}")))?;
        for i in 0..self.n_curves() {
            w.write_record(self.values.row(i).iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = Grid::equispaced(0.0, 1.0, 5).unwrap();
        let rows = vec![vec![0.1, 0.2, 0.3, 1.0 / 3.0, 5e-17], vec![-1.0, 2.5, 3.0, 4.0, 1e300]];
        let s = FunctionalSample::from_rows(grid, &rows).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = FunctionalSample::read_csv(buf.as_slice()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_non_finite() {
        let grid = Grid::equispaced(0.0, 1.0, 4).unwrap();
        assert!(FunctionalSample::from_rows(grid, &[vec![0.0, f64::NAN, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn reports_bad_row_line() {
        let text = "0,1,2,3\n1,2,3,4\n1,2,3\n";
        match FunctionalSample::read_csv(text.as_bytes()) {
            Err(FplmError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
