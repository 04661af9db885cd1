use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FplmError, Result};
use crate::par;

/// Gaussian kernel on the half-line, `K(u) = exp(-u²/2)`.
#[inline]
pub fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// Normalised Nadaraya–Watson weights for one query curve.
#[derive(Debug, Clone, PartialEq)]
pub struct NwWeights {
    pub weights: Vec<f64>,
    /// Every raw kernel value underflowed; the weights are uniform over the
    /// minimal-distance set.
    pub underflow: bool,
}

/// `w_i = K(d_i/h) / Σ_j K(d_j/h)`.
///
/// Kernel values are computed relative to the nearest curve, so the
/// normalisation never divides by zero; when the raw values all underflow the
/// result is the uniform distribution over the nearest curves.
pub fn nw_weights(distances: &[f64], h: f64) -> Result<NwWeights> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FplmError::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let dmin = distances
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !dmin.is_finite() {
        return Err(FplmError::InvalidArgument("no finite distance".into()));
    }
    let (weights, underflow) = relative_weights(distances.iter().copied(), dmin, h);
    Ok(NwWeights { weights, underflow })
}

fn relative_weights(distances: impl Iterator<Item = f64>, dmin: f64, h: f64) -> (Vec<f64>, bool) {
    let umin = dmin / h;
    let mut w: Vec<f64> = distances
        .map(|d| {
            if d.is_finite() {
                let u = d / h;
                (-0.5 * (u - umin) * (u + umin)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (w, gaussian_kernel(umin) == 0.0)
}

/// Row-stochastic smoothing matrix `[w_h(Z_i, Z_j)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub values: DMatrix<f64>,
    pub h: f64,
    /// Diagonal forced to zero and rows renormalised.
    pub leave_one_out: bool,
}

impl WeightMatrix {
    /// `W · v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.values.nrows();
        (0..n)
            .map(|i| self.values.row(i).iter().zip(v).map(|(w, x)| w * x).sum())
            .collect()
    }
}

/// Full and leave-one-out weight matrices built from one pass of kernel
/// evaluations over a training distance matrix.
#[derive(Debug, Clone)]
pub struct SmootherPair {
    pub full: WeightMatrix,
    pub loo: WeightMatrix,
    /// Rows whose leave-one-out kernel values all underflowed.
    pub underflow_rows: usize,
}

impl SmootherPair {
    pub fn new(dist: &DMatrix<f64>, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(FplmError::InvalidArgument(format!("bandwidth must be positive, got {h}")));
        }
        let n = dist.nrows();
        if n < 2 || dist.ncols() != n {
            return Err(FplmError::DimensionMismatch(format!(
                "need a square distance matrix with at least 2 rows, got {}×{}",
                dist.nrows(),
                dist.ncols()
            )));
        }
        // row i: leave-one-out weights over j ≠ i, plus the self weight of the full row
        let rows: Vec<(Vec<f64>, f64, bool)> = par::map_range(n, |i| {
            let row = dist.row(i);
            let dmin = (0..n)
                .filter(|&j| j != i)
                .map(|j| row[j])
                .fold(f64::INFINITY, f64::min);
            let (mut loo, underflow) =
                relative_weights((0..n).map(|j| if j == i { f64::INFINITY } else { row[j] }), dmin, h);
            loo[i] = 0.0;
            // full row: self kernel is 1, others sum to S·K(dmin/h)
            let umin = dmin / h;
            let raw_other: f64 = {
                let mut s = 0.0;
                let k_min = gaussian_kernel(umin);
                if k_min > 0.0 {
                    let u = (0..n).filter(|&j| j != i).map(|j| {
                        let uj = row[j] / h;
                        (-0.5 * (uj - umin) * (uj + umin)).exp()
                    });
                    s = u.sum::<f64>() * k_min;
                }
                s
            };
            let self_weight = 1.0 / (1.0 + raw_other);
            (loo, self_weight, underflow)
        });
        let mut full = DMatrix::zeros(n, n);
        let mut loo = DMatrix::zeros(n, n);
        let mut underflow_rows = 0;
        for (i, (lrow, wii, uf)) in rows.into_iter().enumerate() {
            if uf {
                underflow_rows += 1;
            }
            for j in 0..n {
                loo[(i, j)] = lrow[j];
                full[(i, j)] = if i == j { wii } else { (1.0 - wii) * lrow[j] };
            }
        }
        Ok(Self {
            full: WeightMatrix {
                values: full,
                h,
                leave_one_out: false,
            },
            loo: WeightMatrix {
                values: loo,
                h,
                leave_one_out: true,
            },
            underflow_rows,
        })
    }
}

/// Weights of new curves against the training set, one row per new curve.
pub fn prediction_weights(dist_to_training: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let rows: Vec<Result<NwWeights>> = par::map_range(dist_to_training.nrows(), |i| {
        let d: Vec<f64> = dist_to_training.row(i).iter().copied().collect();
        nw_weights(&d, h)
    });
    let mut out = DMatrix::zeros(dist_to_training.nrows(), dist_to_training.ncols());
    for (i, r) in rows.into_iter().enumerate() {
        let r = r?;
        for (j, w) in r.weights.into_iter().enumerate() {
            out[(i, j)] = w;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_point_example() {
        let w = nw_weights(&[0.0, 1.0, 2.0], 1.0).unwrap();
        let expect = [0.5741, 0.3482, 0.0777];
        for (a, b) in w.weights.iter().zip(expect) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!(!w.underflow);
    }

    #[test]
    fn equal_and_flat() {
        let w = nw_weights(&[2.0; 5], 0.3).unwrap();
        assert!(w.weights.iter().all(|v| (v - 0.2).abs() < 1e-15));
        let w = nw_weights(&[0.0, 1.0, 5.0, 9.0], 1e12).unwrap();
        assert!(w.weights.iter().all(|v| (v - 0.25).abs() < 1e-9));
    }

    #[test]
    fn underflow_falls_back_to_nearest_set() {
        let w = nw_weights(&[100.0, 50.0, 50.0, 70.0], 1e-3).unwrap();
        assert!(w.underflow);
        assert_eq!(w.weights, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(nw_weights(&[1.0], 0.0).is_err());
        assert!(nw_weights(&[f64::INFINITY], 1.0).is_err());
    }

    #[test]
    fn smoother_pair_matches_direct_rows() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0]);
        let pair = SmootherPair::new(&d, 0.8).unwrap();
        for i in 0..3 {
            let row: Vec<f64> = d.row(i).iter().copied().collect();
            let direct = nw_weights(&row, 0.8).unwrap().weights;
            for j in 0..3 {
                assert!((pair.full.values[(i, j)] - direct[j]).abs() < 1e-14);
            }
            let others: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| row[j]).collect();
            let direct_loo = nw_weights(&others, 0.8).unwrap().weights;
            let got: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| pair.loo.values[(i, j)]).collect();
            for (a, b) in got.iter().zip(&direct_loo) {
                assert!((a - b).abs() < 1e-14);
            }
            assert_eq!(pair.loo.values[(i, i)], 0.0);
        }
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(ds in proptest::collection::vec(0.0f64..50.0, 2..30), h in 1e-3f64..1e3) {
            let w = nw_weights(&ds, h).unwrap();
            let s: f64 = w.weights.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(w.weights.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn scale_invariance(ds in proptest::collection::vec(0.0f64..10.0, 2..20), h in 0.05f64..10.0, c in 0.1f64..10.0) {
            let a = nw_weights(&ds, h).unwrap().weights;
            let scaled: Vec<f64> = ds.iter().map(|d| d * c).collect();
            let b = nw_weights(&scaled, h * c).unwrap().weights;
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
