//! Curve distances: q-th derivative L2 distance of spline-smoothed curves,
//! and Euclidean distance between the first K functional principal component
//! scores.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FplmError, Result};
use crate::fda::{default_interior_knots, fpca, FpcaResult, FunctionalSample, SplineSmoother, DEFAULT_ORDER};
use crate::par;

/// Number of retained components for the FPCA semi-metric when unspecified.
pub const DEFAULT_FPCA_COMPONENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SemiMetricKind {
    /// L2 distance of q-th derivatives; `q = 0` compares the raw curves.
    Derivative { q: usize },
    /// Distance between the first `k` principal component scores.
    FpcaScores { k: usize },
}

/// Declarative choice of semi-metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemiMetricSpec {
    pub kind: SemiMetricKind,
    pub spline_order: usize,
    /// `None` picks `min(20, m / 4)` from the grid.
    pub interior_knots: Option<usize>,
}

impl SemiMetricSpec {
    pub fn derivative(q: usize) -> Self {
        Self {
            kind: SemiMetricKind::Derivative { q },
            spline_order: DEFAULT_ORDER,
            interior_knots: None,
        }
    }

    pub fn fpca(k: usize) -> Self {
        Self {
            kind: SemiMetricKind::FpcaScores { k },
            spline_order: DEFAULT_ORDER,
            interior_knots: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SemiMetricKind::Derivative { q } if q > 0 && q >= self.spline_order => {
                Err(FplmError::InvalidArgument(format!(
                    "derivative order {q} needs splines of order > {q}, got {}",
                    self.spline_order
                )))
            }
            SemiMetricKind::FpcaScores { k: 0 } => Err(FplmError::InvalidArgument(
                "FPCA semi-metric needs at least one component".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Freeze the spline operator or principal components on `training`.
    pub fn train(&self, training: &FunctionalSample) -> Result<TrainedSemiMetric> {
        self.validate()?;
        if training.n_curves() == 0 {
            return Err(FplmError::InvalidArgument("empty training sample".into()));
        }
        let state = match self.kind {
            SemiMetricKind::Derivative { q } => {
                let weights = training.grid().weights().to_vec();
                let operator = if q == 0 {
                    None
                } else {
                    let knots = self
                        .interior_knots
                        .unwrap_or_else(|| default_interior_knots(training.n_points()));
                    let smoother = SplineSmoother::new(training.grid(), self.spline_order, knots)?;
                    Some(smoother.derivative_matrix(q)?)
                };
                let curves = transformed_rows(training, operator.as_ref());
                State::Derivative {
                    operator,
                    weights,
                    curves,
                }
            }
            SemiMetricKind::FpcaScores { k } => {
                let basis = fpca(training, k)?;
                let sq_norms = eigenfunction_sq_norms(&basis);
                let scores = rows_of(&basis.scores);
                State::Fpca {
                    basis,
                    sq_norms,
                    scores,
                }
            }
        };
        Ok(TrainedSemiMetric {
            spec: *self,
            training: training.clone(),
            state,
        })
    }

    /// Pairwise distances between the curves of `sample`.
    pub fn distance_matrix(&self, sample: &FunctionalSample) -> Result<DistanceMatrix> {
        Ok(self.train(sample)?.pairwise())
    }
}

impl fmt::Display for SemiMetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SemiMetricKind::Derivative { q } => write!(f, "deriv:{q}"),
            SemiMetricKind::FpcaScores { k } => write!(f, "fpca:{k}"),
        }
    }
}

impl FromStr for SemiMetricSpec {
    type Err = FplmError;

    /// `deriv:q` or `fpca:k` (`fpca` alone means three components).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || FplmError::InvalidArgument(format!("unknown semi-metric {s:?}; use deriv:<q> or fpca:<k>"));
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s.trim(), None),
        };
        let spec = match (name, arg) {
            ("deriv" | "derivative", Some(q)) => Self::derivative(q.parse().map_err(|_| bad())?),
            ("fpca" | "pca", Some(k)) => Self::fpca(k.parse().map_err(|_| bad())?),
            ("fpca" | "pca", None) => Self::fpca(DEFAULT_FPCA_COMPONENTS),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
enum State {
    Derivative {
        operator: Option<DMatrix<f64>>,
        weights: Vec<f64>,
        curves: Vec<Vec<f64>>,
    },
    Fpca {
        basis: FpcaResult,
        sq_norms: Vec<f64>,
        scores: Vec<Vec<f64>>,
    },
}

/// A semi-metric with its training-time spline operator or FPCA basis.
#[derive(Debug, Clone)]
pub struct TrainedSemiMetric {
    spec: SemiMetricSpec,
    training: FunctionalSample,
    state: State,
}

impl TrainedSemiMetric {
    pub fn spec(&self) -> &SemiMetricSpec {
        &self.spec
    }

    pub fn training(&self) -> &FunctionalSample {
        &self.training
    }

    pub fn n_training(&self) -> usize {
        self.training.n_curves()
    }

    /// Symmetric training distance matrix with an exact zero diagonal.
    pub fn pairwise(&self) -> DistanceMatrix {
        let n = self.n_training();
        let upper: Vec<Vec<f64>> = par::map_range(n, |i| {
            (i + 1..n).map(|j| self.between_training(i, j)).collect()
        });
        let mut values = DMatrix::zeros(n, n);
        for (i, row) in upper.into_iter().enumerate() {
            for (off, d) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                values[(i, j)] = d;
                values[(j, i)] = d;
            }
        }
        DistanceMatrix {
            values,
            spec: self.spec,
        }
    }

    fn between_training(&self, i: usize, j: usize) -> f64 {
        match &self.state {
            State::Derivative { weights, curves, .. } => weighted_l2(&curves[i], &curves[j], weights),
            State::Fpca { sq_norms, scores, .. } => weighted_l2(&scores[i], &scores[j], sq_norms),
        }
    }

    /// `n_new × n_training` distances using the frozen training state.
    pub fn distances_to(&self, new_curves: &FunctionalSample) -> Result<DMatrix<f64>> {
        self.training.check_compatible(new_curves)?;
        let (new_rows, train_rows, weights): (Vec<Vec<f64>>, &Vec<Vec<f64>>, &Vec<f64>) = match &self.state {
            State::Derivative {
                operator,
                weights,
                curves,
            } => (transformed_rows(new_curves, operator.as_ref()), curves, weights),
            State::Fpca {
                basis,
                sq_norms,
                scores,
            } => (rows_of(&basis.project(new_curves)?), scores, sq_norms),
        };
        let rows: Vec<Vec<f64>> = par::map_slice(&new_rows, |a| {
            train_rows.iter().map(|b| weighted_l2(a, b, weights)).collect()
        });
        Ok(DMatrix::from_fn(rows.len(), train_rows.len(), |i, j| rows[i][j]))
    }
}

/// Pairwise distance matrix together with the semi-metric that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub values: DMatrix<f64>,
    pub spec: SemiMetricSpec,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Rows as plain CSV, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in self.values.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn weighted_l2(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((x, y), q) in a.iter().zip(b).zip(w) {
        let d = x - y;
        acc += q * d * d;
    }
    acc.sqrt()
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn transformed_rows(sample: &FunctionalSample, operator: Option<&DMatrix<f64>>) -> Vec<Vec<f64>> {
    match operator {
        Some(op) => rows_of(&(sample.values() * op.transpose())),
        None => rows_of(sample.values()),
    }
}

/// Squared quadrature norms of the eigenfunctions; one up to rounding, kept
/// explicit so the distance follows `Σ (Δscore)² ‖φ‖²`.
fn eigenfunction_sq_norms(basis: &FpcaResult) -> Vec<f64> {
    let w = basis.grid.weights();
    basis
        .eigenfunctions
        .row_iter()
        .map(|r| r.iter().zip(w).map(|(v, q)| v * v * q).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fda::Grid;
    use std::f64::consts::PI;

    fn smooth_sample(n: usize) -> FunctionalSample {
        let grid = Grid::equispaced(0.0, PI, 60).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 0.91).cos();
                grid.points().iter().map(|&t| a * (2.0 * t).cos() + b * (3.0 * t).sin() + 0.1 * i as f64).collect()
            })
            .collect();
        FunctionalSample::from_rows(grid, &rows).unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("deriv:2".parse::<SemiMetricSpec>().unwrap(), SemiMetricSpec::derivative(2));
        assert_eq!("fpca:3".parse::<SemiMetricSpec>().unwrap(), SemiMetricSpec::fpca(3));
        assert_eq!("fpca".parse::<SemiMetricSpec>().unwrap(), SemiMetricSpec::fpca(3));
        assert!("deriv:4".parse::<SemiMetricSpec>().is_err());
        assert!("fpca:0".parse::<SemiMetricSpec>().is_err());
        assert!("l1".parse::<SemiMetricSpec>().is_err());
        assert_eq!(SemiMetricSpec::derivative(1).to_string(), "deriv:1");
    }

    #[test]
    fn plain_l2_of_unit_gap() {
        let grid = Grid::equispaced(0.0, PI, 100).unwrap();
        let s = FunctionalSample::from_rows(grid, &[vec![0.0; 100], vec![1.0; 100]]).unwrap();
        let d = SemiMetricSpec::derivative(0).distance_matrix(&s).unwrap();
        assert!((d.get(0, 1) - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn derivative_ignores_constant_shift() {
        let s = smooth_sample(2);
        let shifted = FunctionalSample::new(s.grid().clone(), s.values().add_scalar(3.5)).unwrap();
        let both = FunctionalSample::from_rows(s.grid().clone(), &[s.curve(0), shifted.curve(0)]).unwrap();
        let d = SemiMetricSpec::derivative(1).distance_matrix(&both).unwrap();
        assert!(d.get(0, 1) < 1e-9);
    }

    #[test]
    fn new_curve_equal_to_training_curve() {
        let s = smooth_sample(8);
        for spec in [SemiMetricSpec::derivative(2), SemiMetricSpec::fpca(3)] {
            let trained = spec.train(&s).unwrap();
            let d = trained.distances_to(&s.select(&[4])).unwrap();
            assert!(d[(0, 4)].abs() < 1e-10);
            let pw = trained.pairwise();
            for j in 0..8 {
                assert!((d[(0, j)] - pw.get(4, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_rank_fpca_matches_centered_l2() {
        let s = smooth_sample(7);
        let n = s.n_curves();
        let d_fpca = SemiMetricSpec::fpca(n - 1).distance_matrix(&s).unwrap();
        let basis = fpca(&s, n - 1).unwrap();
        let recon = basis.reconstruct_centered(n - 1);
        let w = s.grid().weights();
        for i in 0..n {
            for j in 0..n {
                let a: Vec<f64> = recon.row(i).iter().copied().collect();
                let b: Vec<f64> = recon.row(j).iter().copied().collect();
                assert!((d_fpca.get(i, j) - weighted_l2(&a, &b, w)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let s = smooth_sample(5);
        let other = FunctionalSample::from_rows(Grid::equispaced(0.0, 1.0, 60).unwrap(), &[vec![0.0; 60]]).unwrap();
        let trained = SemiMetricSpec::derivative(1).train(&s).unwrap();
        assert!(trained.distances_to(&other).is_err());
    }
}
