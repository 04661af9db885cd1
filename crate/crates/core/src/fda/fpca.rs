//! Functional principal component analysis under the grid quadrature rule.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FunctionalSample, Grid};
use crate::error::{FplmError, Result};

/// Mean curve, eigenfunctions (one per row), eigenvalues and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcaResult {
    pub grid: Grid,
    pub mean_curve: Vec<f64>,
    /// `K × m`, orthonormal under the quadrature inner product.
    pub eigenfunctions: DMatrix<f64>,
    /// Nonincreasing, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// `n × K` inner products of the centered curves with the eigenfunctions.
    pub scores: DMatrix<f64>,
    /// Trace of the covariance operator (all components, not just the first K).
    pub total_variance: f64,
}

impl FpcaResult {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Scores of new curves on the frozen mean and eigenfunctions.
    pub fn project(&self, sample: &FunctionalSample) -> Result<DMatrix<f64>> {
        if !sample.grid().is_compatible(&self.grid) {
            return Err(FplmError::DimensionMismatch(
                "curves and principal components live on different grids".into(),
            ));
        }
        let mut centered = sample.values().clone();
        for mut row in centered.row_iter_mut() {
            for (v, mu) in row.iter_mut().zip(&self.mean_curve) {
                *v -= mu;
            }
        }
        let w = DVector::from_column_slice(self.grid.weights());
        let weighted = DMatrix::from_fn(self.eigenfunctions.nrows(), self.eigenfunctions.ncols(), |k, j| {
            self.eigenfunctions[(k, j)] * w[j]
        });
        Ok(centered * weighted.transpose())
    }

    /// Centered curves rebuilt from the first `k` components.
    pub fn reconstruct_centered(&self, k: usize) -> DMatrix<f64> {
        let k = k.min(self.n_components());
        self.scores.columns(0, k) * self.eigenfunctions.rows(0, k)
    }

    /// Smallest number of components whose eigenvalues reach `fraction` of
    /// the total variance; all retained components if they fall short.
    pub fn components_for_variance(&self, fraction: f64) -> usize {
        let total = self.total_variance;
        if total <= 0.0 {
            return 1;
        }
        let mut acc = 0.0;
        for (k, ev) in self.eigenvalues.iter().enumerate() {
            acc += ev;
            if acc >= fraction * total {
                return k + 1;
            }
        }
        self.eigenvalues.len()
    }
}

/// Column means of a sample.
pub fn mean_curve(sample: &FunctionalSample) -> Vec<f64> {
    let n = sample.n_curves() as f64;
    sample
        .values()
        .column_iter()
        .map(|c| c.sum() / n)
        .collect()
}

/// First `k` principal components, `1 ≤ k ≤ min(n − 1, m)`.
pub fn fpca(sample: &FunctionalSample, k: usize) -> Result<FpcaResult> {
    let n = sample.n_curves();
    let m = sample.n_points();
    let kmax = n.saturating_sub(1).min(m);
    if k < 1 || k > kmax {
        return Err(FplmError::InvalidArgument(format!(
            "number of components {k} outside [1, {kmax}]"
        )));
    }
    fpca_unchecked(sample, k)
}

/// Decomposition without the `k ≤ n − 1` guard; components beyond the rank
/// of the centered data get zero eigenvalues and completion eigenfunctions.
pub(crate) fn fpca_unchecked(sample: &FunctionalSample, k: usize) -> Result<FpcaResult> {
    let n = sample.n_curves();
    let m = sample.n_points();
    if n == 0 {
        return Err(FplmError::InvalidArgument("empty sample".into()));
    }
    let k = k.min(m);
    let grid = sample.grid().clone();
    let mean = mean_curve(sample);
    let mut xc = sample.values().clone();
    for mut row in xc.row_iter_mut() {
        for (v, mu) in row.iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    let w = grid.weights();
    let total_variance = xc
        .row_iter()
        .map(|r| r.iter().zip(w).map(|(v, q)| v * v * q).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    // eigenvalues are judged against the raw curve energy so that roundoff
    // left after centering identical curves counts as zero
    let raw_scale = sample
        .values()
        .row_iter()
        .map(|r| r.iter().zip(w).map(|(v, q)| v * v * q).sum::<f64>())
        .sum::<f64>()
        / n as f64;

    let (mut values, mut funcs) = if n <= m {
        gram_route(&xc, w, k, raw_scale)
    } else {
        covariance_route(&xc, w, k, raw_scale)
    };

    complete_basis(&mut funcs, &mut values, w);

    for mut row in funcs.row_iter_mut() {
        let (imax, _) = row
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        if row[imax] < 0.0 {
            row.neg_mut();
        }
    }

    let weighted = DMatrix::from_fn(funcs.nrows(), m, |r, j| funcs[(r, j)] * w[j]);
    let scores = &xc * weighted.transpose();
    Ok(FpcaResult {
        grid,
        mean_curve: mean,
        eigenfunctions: funcs,
        eigenvalues: values,
        scores,
        total_variance,
    })
}

/// Tolerance below which an eigenvalue is treated as zero.
fn null_tol(largest: f64, scale: f64) -> f64 {
    1e-12 * largest.max(scale).max(f64::MIN_POSITIVE)
}

fn sorted_eigen(mat: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

/// Eigen-decomposition of the `n × n` quadrature-weighted Gram matrix.
fn gram_route(xc: &DMatrix<f64>, w: &[f64], k: usize, scale: f64) -> (Vec<f64>, DMatrix<f64>) {
    let n = xc.nrows();
    let m = xc.ncols();
    let xw = DMatrix::from_fn(n, m, |i, j| xc[(i, j)] * w[j]);
    let mut gram = &xw * xc.transpose() / n as f64;
    gram = (&gram + gram.transpose()) * 0.5;
    let (vals, vecs) = sorted_eigen(gram);
    let tol = null_tol(vals.first().copied().unwrap_or(0.0), scale);
    let mut out_vals = Vec::with_capacity(k);
    let mut funcs = DMatrix::zeros(k, m);
    for c in 0..k {
        let lambda = vals.get(c).copied().unwrap_or(0.0);
        if c < n && lambda > tol {
            let scale = 1.0 / (n as f64 * lambda).sqrt();
            let phi = xc.transpose() * vecs.column(c) * scale;
            funcs.row_mut(c).copy_from(&phi.transpose());
            out_vals.push(lambda);
        } else {
            out_vals.push(0.0);
        }
    }
    (out_vals, funcs)
}

/// Eigen-decomposition of the symmetrised `m × m` covariance `W½ C W½`.
fn covariance_route(xc: &DMatrix<f64>, w: &[f64], k: usize, scale: f64) -> (Vec<f64>, DMatrix<f64>) {
    let n = xc.nrows();
    let m = xc.ncols();
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let xs = DMatrix::from_fn(n, m, |i, j| xc[(i, j)] * sw[j]);
    let mut cov = xs.transpose() * &xs / n as f64;
    cov = (&cov + cov.transpose()) * 0.5;
    let (vals, vecs) = sorted_eigen(cov);
    let tol = null_tol(vals.first().copied().unwrap_or(0.0), scale);
    let mut out_vals = Vec::with_capacity(k);
    let mut funcs = DMatrix::zeros(k, m);
    for c in 0..k {
        let lambda = vals[c];
        if lambda > tol {
            for j in 0..m {
                funcs[(c, j)] = vecs[(j, c)] / sw[j];
            }
            out_vals.push(lambda);
        } else {
            out_vals.push(0.0);
        }
    }
    (out_vals, funcs)
}

/// Replace all-zero rows (null-space components) with unit vectors that are
/// orthonormal to the other rows under the quadrature inner product.
fn complete_basis(funcs: &mut DMatrix<f64>, values: &mut [f64], w: &[f64]) {
    let m = funcs.ncols();
    let ip = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(w).map(|((x, y), q)| x * y * q).sum() };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in 0..funcs.nrows() {
        if values[r] > 0.0 {
            basis.push(funcs.row(r).iter().copied().collect());
        }
    }
    let mut candidate = 0usize;
    for r in 0..funcs.nrows() {
        if values[r] > 0.0 {
            continue;
        }
        values[r] = 0.0;
        loop {
            let mut v = vec![0.0; m];
            v[candidate % m] = 1.0;
            candidate += 1;
            // two Gram-Schmidt passes for stability
            for _ in 0..2 {
                for b in &basis {
                    let c = ip(&v, b);
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
            }
            let norm = ip(&v, &v).sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|x| *x /= norm);
                funcs.row_mut(r).copy_from_slice(&v);
                basis.push(v);
                break;
            }
            if candidate > 4 * m {
                break;
            }
        }
    }
}

/// Quadrature-orthonormal basis `Q` (`m × r`) of the row space of a sample,
/// with coordinates `A` (`n × r`) such that `X = A Qᵀ`.
///
/// Any sample of the form `L X` shares this row space, so its principal
/// components follow from an `r × r` eigenproblem on `L A`.
#[derive(Debug, Clone)]
pub struct RowSpaceBasis {
    grid: Grid,
    /// `r × m`, row `c` holds the `c`-th basis function.
    basis: DMatrix<f64>,
    coords: DMatrix<f64>,
}

impl RowSpaceBasis {
    /// Singular directions below `1e-13` of the largest are dropped.
    pub fn new(sample: &FunctionalSample) -> Result<Self> {
        let w = sample.grid().weights();
        if w.iter().any(|&q| !(q > 0.0)) {
            return Err(FplmError::InvalidArgument("quadrature weights must be positive".into()));
        }
        let (n, m) = (sample.n_curves(), sample.n_points());
        let root: Vec<f64> = w.iter().map(|q| q.sqrt()).collect();
        let scaled = DMatrix::from_fn(n, m, |i, j| sample.values()[(i, j)] * root[j]);
        let svd = scaled.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(FplmError::RankDeficient("row-space SVD did not converge".into())),
        };
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&c| svd.singular_values[c] > 1e-13 * smax)
            .collect();
        let basis = DMatrix::from_fn(keep.len(), m, |c, j| v_t[(keep[c], j)] / root[j]);
        let coords = DMatrix::from_fn(n, keep.len(), |i, c| u[(i, keep[c])] * svd.singular_values[keep[c]]);
        Ok(Self {
            grid: sample.grid().clone(),
            basis,
            coords,
        })
    }

    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }

    /// `A`, so that the sample equals `A Qᵀ`.
    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// First `k` principal components of the curves with coordinates
    /// `coords`; components beyond the rank get zero eigenvalues and zero
    /// eigenfunctions.
    pub fn fpca(&self, coords: &DMatrix<f64>, k: usize) -> Result<FpcaResult> {
        let (n, r) = (coords.nrows(), coords.ncols());
        if r != self.rank() || n == 0 {
            return Err(FplmError::DimensionMismatch("coordinates do not match the basis".into()));
        }
        let m = self.basis.ncols();
        let mean_c: Vec<f64> = coords.column_iter().map(|c| c.sum() / n as f64).collect();
        let centered = DMatrix::from_fn(n, r, |i, c| coords[(i, c)] - mean_c[c]);
        let raw_scale = coords.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let mut cov = centered.transpose() * &centered / n as f64;
        cov = (&cov + cov.transpose()) * 0.5;
        let total_variance = cov.trace();
        let (vals, vecs) = sorted_eigen(cov);
        let tol = null_tol(vals.first().copied().unwrap_or(0.0), raw_scale);
        let k = k.min(m);
        let mut eigenvalues = vec![0.0; k];
        let mut dirs = DMatrix::zeros(r, k);
        for c in 0..k.min(r) {
            if vals[c] > tol {
                eigenvalues[c] = vals[c];
                dirs.set_column(c, &vecs.column(c));
            }
        }
        let mut eigenfunctions = dirs.transpose() * &self.basis;
        for c in 0..k {
            let lead = eigenfunctions
                .row(c)
                .iter()
                .copied()
                .fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if lead < 0.0 {
                eigenfunctions.row_mut(c).neg_mut();
                dirs.column_mut(c).neg_mut();
            }
        }
        let mean_curve = (DMatrix::from_row_slice(1, r, &mean_c) * &self.basis).iter().copied().collect();
        Ok(FpcaResult {
            grid: self.grid.clone(),
            mean_curve,
            eigenfunctions,
            eigenvalues,
            scores: centered * dirs,
            total_variance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(n: usize, m: usize, seed: u64) -> FunctionalSample {
        let grid = Grid::equispaced(0.0, 1.0, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                grid.points()
                    .iter()
                    .map(|&t| a * (3.0 * t).sin() + b * t * t + 0.1 * rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        FunctionalSample::from_rows(grid, &rows).unwrap()
    }

    fn gram_of(f: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
        let k = f.nrows();
        DMatrix::from_fn(k, k, |a, b| (0..f.ncols()).map(|j| f[(a, j)] * f[(b, j)] * w[j]).sum())
    }

    #[test]
    fn identical_curves_have_zero_spectrum() {
        let grid = Grid::equispaced(0.0, 1.0, 20).unwrap();
        let row: Vec<f64> = grid.points().iter().map(|t| t.sin()).collect();
        let s = FunctionalSample::from_rows(grid, &vec![row; 6]).unwrap();
        let res = fpca(&s, 3).unwrap();
        assert!(res.eigenvalues.iter().all(|&v| v == 0.0));
        assert!(res.scores.iter().all(|v| v.abs() < 1e-14));
        let g = gram_of(&res.eigenfunctions, res.grid.weights());
        assert!((g - DMatrix::identity(3, 3)).abs().max() < 1e-8);
    }

    #[test]
    fn rank_one_pair() {
        let grid = Grid::equispaced(0.0, 2.0, 40).unwrap();
        let psi: Vec<f64> = grid.points().iter().map(|t| (2.0 * t).cos() + t).collect();
        let neg: Vec<f64> = psi.iter().map(|v| -v).collect();
        let s = FunctionalSample::from_rows(grid.clone(), &[psi.clone(), neg]).unwrap();
        let res = fpca(&s, 1).unwrap();
        // proportional to psi
        let phi = res.eigenfunctions.row(0);
        let ratio = phi[0] / psi[0];
        for j in 0..psi.len() {
            assert!((phi[j] - ratio * psi[j]).abs() < 1e-10);
        }
        // with more room the second eigenvalue is zero
        let wide = fpca_unchecked(&s, 2).unwrap();
        assert_eq!(wide.eigenvalues[1], 0.0);
    }

    #[test]
    fn routes_agree_and_are_orthonormal() {
        let s = random_sample(12, 30, 3);
        let gram = fpca_unchecked(&s, 5).unwrap();
        let big = random_sample(40, 30, 3);
        let cov = fpca_unchecked(&big, 5).unwrap();
        for res in [&gram, &cov] {
            let g = gram_of(&res.eigenfunctions, res.grid.weights());
            assert!((g - DMatrix::identity(5, 5)).abs().max() < 1e-8);
            assert!(res.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
        // transpose-route check on the same data
        let xc = {
            let mean = mean_curve(&big);
            DMatrix::from_fn(40, 30, |i, j| big.values()[(i, j)] - mean[j])
        };
        let (a, _) = gram_route(&xc, big.grid().weights(), 5, 0.0);
        for (x, y) in a.iter().zip(&cov.eigenvalues) {
            assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn out_of_range_k() {
        let s = random_sample(5, 10, 1);
        assert!(fpca(&s, 0).is_err());
        assert!(fpca(&s, 5).is_err());
        assert!(fpca(&s, 4).is_ok());
    }

    #[test]
    fn projection_of_training_curves_returns_scores() {
        let s = random_sample(9, 25, 11);
        let res = fpca(&s, 4).unwrap();
        let proj = res.project(&s).unwrap();
        assert!((proj - &res.scores).abs().max() < 1e-12);
    }

    #[test]
    fn row_space_route_matches_dense() {
        let grid = Grid::equispaced(0.0, 1.0, 25).unwrap();
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let a = (i as f64 * 1.7).sin();
                let b = (i as f64 * 0.9).cos();
                grid.points().iter().map(|&t| a * t + b * (3.0 * t).sin() + 0.5 * t * t).collect()
            })
            .collect();
        let x = FunctionalSample::from_rows(grid, &rows).unwrap();
        let basis = RowSpaceBasis::new(&x).unwrap();
        assert_eq!(basis.rank(), 3);
        let rebuilt = basis.coords() * &basis.basis;
        assert!((rebuilt - x.values()).amax() < 1e-12);
        let fast = basis.fpca(basis.coords(), 4).unwrap();
        let dense = fpca(&x, 4).unwrap();
        for c in 0..2 {
            assert!((fast.eigenvalues[c] - dense.eigenvalues[c]).abs() < 1e-10);
            let d = (fast.eigenfunctions.row(c) - dense.eigenfunctions.row(c)).amax();
            assert!(d < 1e-8, "component {c}: {d}");
            assert!((fast.scores.column(c) - dense.scores.column(c)).amax() < 1e-8);
        }
        assert_eq!(fast.eigenvalues[3], 0.0);
        assert!((fast.total_variance - dense.total_variance).abs() < 1e-12);
    }
}
