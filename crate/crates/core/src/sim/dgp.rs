use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, StudentsT};

use crate::error::{FplmError, Result};
use crate::fda::{FunctionalSample, Grid, SplineSmoother};

pub const SIM_POINTS: usize = 100;
pub const ROUGH_NOISE: f64 = 0.1;

/// One simulated sample: coefficients, curves `X`, derivative curves `Z`
/// and the regression function `g = 10(a² - b²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothDgpDraw {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub x: FunctionalSample,
    pub z: FunctionalSample,
    pub g: Vec<f64>,
}

impl SmoothDgpDraw {
    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// `y = g + ε`.
    pub fn responses(&self, errors: &[f64]) -> Result<Vec<f64>> {
        if errors.len() != self.g.len() {
            return Err(FplmError::DimensionMismatch("error count differs from sample size".into()));
        }
        Ok(self.g.iter().zip(errors).map(|(g, e)| g + e).collect())
    }
}

pub fn simulation_grid() -> Grid {
    Grid::equispaced(0.0, PI, SIM_POINTS).expect("valid grid")
}

/// `a cos(2t) + b sin(4t) + c(t² - πt + 2π²/9)`.
pub fn smooth_curve(a: f64, b: f64, c: f64, t: f64) -> f64 {
    a * (2.0 * t).cos() + b * (4.0 * t).sin() + c * (t * t - PI * t + 2.0 * PI * PI / 9.0)
}

/// Curves from given coefficients, optional additive noise matrix, with
/// `Z` the first derivative of the cubic B-spline representation of `X`.
pub fn from_coefficients(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, noise: Option<&DMatrix<f64>>) -> Result<SmoothDgpDraw> {
    let n = a.len();
    if n < 2 || b.len() != n || c.len() != n {
        return Err(FplmError::InvalidArgument("need at least two curves with matching coefficients".into()));
    }
    let grid = simulation_grid();
    let t = grid.points().to_vec();
    let mut values = DMatrix::from_fn(n, SIM_POINTS, |i, j| smooth_curve(a[i], b[i], c[i], t[j]));
    if let Some(d) = noise {
        if d.shape() != values.shape() {
            return Err(FplmError::DimensionMismatch("noise matrix shape".into()));
        }
        values += d;
    }
    let x = FunctionalSample::new(grid.clone(), values)?;
    let smoother = SplineSmoother::with_defaults(&grid)?;
    let d1 = smoother.derivative_matrix(1)?;
    let z = FunctionalSample::new(grid, x.values() * d1.transpose())?;
    let g = a.iter().zip(&b).map(|(a, b)| 10.0 * (a * a - b * b)).collect();
    Ok(SmoothDgpDraw { a, b, c, x, z, g })
}

fn coefficients<R: Rng>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for _ in 0..n {
        a.push(rng.random::<f64>());
        b.push(rng.random::<f64>());
        c.push(rng.random::<f64>());
    }
    (a, b, c)
}

/// Curves with `U(-range, range)` noise added at every grid point; the
/// coefficients are drawn first, so `range = 0` gives the smooth sample.
pub fn simulate_with_noise<R: Rng>(n: usize, range: f64, rng: &mut R) -> Result<SmoothDgpDraw> {
    let (a, b, c) = coefficients(n, rng);
    if range > 0.0 {
        let d = DMatrix::from_fn(n, SIM_POINTS, |_, _| 0.0);
        let mut d = d;
        for i in 0..n {
            for j in 0..SIM_POINTS {
                d[(i, j)] = rng.random_range(-range..range);
            }
        }
        from_coefficients(a, b, c, Some(&d))
    } else {
        from_coefficients(a, b, c, None)
    }
}

pub fn simulate_smooth(n: usize, seed: u64) -> Result<SmoothDgpDraw> {
    simulate_with_noise(n, 0.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn simulate_rough(n: usize, seed: u64) -> Result<SmoothDgpDraw> {
    simulate_with_noise(n, ROUGH_NOISE, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Regression error distributions used in the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDensityKind {
    T5,
    SkewUnimodal,
    SkewBimodal,
}

impl ErrorDensityKind {
    pub const ALL: [ErrorDensityKind; 3] = [Self::T5, Self::SkewUnimodal, Self::SkewBimodal];

    /// `(weight, mean, sd)` of each normal component; empty for `t₅`.
    pub fn components(&self) -> &'static [(f64, f64, f64)] {
        match self {
            Self::T5 => &[],
            Self::SkewUnimodal => &[(0.2, 0.0, 1.0), (0.2, 0.5, 2.0 / 3.0), (0.6, 13.0 / 12.0, 5.0 / 9.0)],
            Self::SkewBimodal => &[(0.75, 0.0, 1.0), (0.25, 1.5, 1.0 / 3.0)],
        }
    }

    pub fn mean(&self) -> f64 {
        self.components().iter().map(|(w, m, _)| w * m).sum()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::T5 => "t5",
            Self::SkewUnimodal => "skewunimodal",
            Self::SkewBimodal => "skewbimodal",
        }
    }
}

impl std::fmt::Display for ErrorDensityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ErrorDensityKind {
    type Err = FplmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t5" => Ok(Self::T5),
            "skewunimodal" | "skew_unimodal" => Ok(Self::SkewUnimodal),
            "skewbimodal" | "skew_bimodal" => Ok(Self::SkewBimodal),
            other => Err(FplmError::InvalidArgument(format!("unknown error density `{other}`"))),
        }
    }
}

pub fn draw_errors_rng<R: Rng>(kind: ErrorDensityKind, n: usize, rng: &mut R) -> Vec<f64> {
    match kind {
        ErrorDensityKind::T5 => {
            let t = StudentT::new(5.0).expect("valid degrees of freedom");
            (0..n).map(|_| t.sample(rng)).collect()
        }
        _ => {
            let comps = kind.components();
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = comps[comps.len() - 1];
                    for &c in comps {
                        acc += c.0;
                        if u < acc {
                            pick = c;
                            break;
                        }
                    }
                    Normal::new(pick.1, pick.2).expect("valid normal").sample(rng)
                })
                .collect()
        }
    }
}

pub fn draw_errors(kind: ErrorDensityKind, n: usize, seed: u64) -> Vec<f64> {
    draw_errors_rng(kind, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Exact density of the error distribution.
pub fn true_density(kind: ErrorDensityKind, e: f64) -> f64 {
    match kind {
        ErrorDensityKind::T5 => StudentsT::new(0.0, 1.0, 5.0).expect("valid t").pdf(e),
        _ => kind
            .components()
            .iter()
            .map(|(w, m, s)| w * crate::density::std_normal_pdf((e - m) / s) / s)
            .sum(),
    }
}

/// Density of `ε - E[ε]`, the target of a residual-based estimate.
pub fn centered_true_density(kind: ErrorDensityKind, e: f64) -> f64 {
    true_density(kind, e + kind.mean())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_curves() {
        let d = from_coefficients(vec![1.0, 0.3], vec![0.0, 0.3], vec![0.0, 0.7], None).unwrap();
        let t = d.x.grid().points();
        for j in 0..SIM_POINTS {
            assert!((d.x.values()[(0, j)] - (2.0 * t[j]).cos()).abs() < 1e-12);
            assert!((d.x.values()[(1, j)] - smooth_curve(0.3, 0.3, 0.7, t[j])).abs() < 1e-12);
        }
        assert_eq!(d.g, vec![10.0, 0.0]);
        // Z follows -2 sin(2t) away from the ends
        for j in 5..95 {
            assert!((d.z.values()[(0, j)] + 2.0 * (2.0 * t[j]).sin()).abs() < 1e-3);
        }
        let y = d.responses(&[0.5, -0.5]).unwrap();
        assert_eq!(y, vec![10.5, -0.5]);
    }

    #[test]
    fn seeded_and_mean_zero_g() {
        assert_eq!(simulate_smooth(10, 3).unwrap(), simulate_smooth(10, 3).unwrap());
        assert_ne!(simulate_smooth(10, 3).unwrap(), simulate_smooth(10, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b, _) = coefficients(100_000, &mut rng);
        let gbar = a.iter().zip(&b).map(|(a, b)| 10.0 * (a * a - b * b)).sum::<f64>() / 1e5;
        assert!(gbar.abs() < 0.05, "{gbar}");
    }

    #[test]
    fn rough_noise() {
        let smooth = simulate_smooth(50, 8).unwrap();
        let rough = simulate_rough(50, 8).unwrap();
        assert_eq!(smooth.g, rough.g);
        let diff = rough.x.values() - smooth.x.values();
        assert!(diff.iter().all(|d| d.abs() <= 0.1));
        let zero = simulate_with_noise(50, 0.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(zero, smooth);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| {
                let s = simulate_with_noise(2, 0.1, &mut rng).unwrap();
                s.x.values()[(0, 40)] - smooth_curve(s.a[0], s.b[0], s.c[0], s.x.grid().points()[40])
            })
            .collect();
        let var = draws.iter().map(|d| d * d).sum::<f64>() / draws.len() as f64;
        assert!((var / (0.01 / 3.0) - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn error_moments() {
        let n = 1_000_000;
        let t = draw_errors(ErrorDensityKind::T5, n, 1);
        let var = t.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var / (5.0 / 3.0) - 1.0).abs() < 0.02, "{var}");
        for (kind, mean) in [(ErrorDensityKind::SkewUnimodal, 0.75), (ErrorDensityKind::SkewBimodal, 0.375)] {
            let d = draw_errors(kind, n, 2);
            let m = d.iter().sum::<f64>() / n as f64;
            assert!((m / mean - 1.0).abs() < 0.01, "{kind}: {m}");
            assert!((kind.mean() - mean).abs() < 1e-15);
            let w: f64 = kind.components().iter().map(|c| c.0).sum();
            assert!((w - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn density_values() {
        let sb = true_density(ErrorDensityKind::SkewBimodal, 0.0);
        let hand = 0.75 * 0.398_942_280_401_432_7 + 0.75 * (-0.5f64 * 4.5 * 4.5).exp() / (2.0 * PI).sqrt();
        assert!((sb - hand).abs() < 1e-12);
        assert!((sb - 0.29921).abs() < 1e-5);
        assert!((true_density(ErrorDensityKind::T5, 0.0) - 0.3796).abs() < 1e-4);
        let grid = crate::density::evaluation_grid();
        for kind in ErrorDensityKind::ALL {
            let total: f64 = grid.iter().map(|&e| true_density(kind, e)).sum::<f64>() * 0.02;
            assert!((total - 1.0).abs() < 1e-3, "{kind}: {total}");
            let centred: f64 = grid.iter().map(|&e| e * centered_true_density(kind, e)).sum::<f64>() * 0.02;
            assert!(centred.abs() < 1e-3, "{kind}: {centred}");
        }
    }
}
