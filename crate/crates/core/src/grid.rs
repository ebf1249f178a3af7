//! Uniform periodic grids and the sampled functions that live on them.
//!
//! A [`Grid`] of `n` points over `[x_min, x_max)` samples at
//! `x_j = x_min + j * dx` with `dx = (x_max - x_min) / n`. The point `x_max`
//! is the periodic image of `x_min` and is not stored. Quadrature is the
//! trapezoid rule on that periodic grid, which reduces to `dx * sum(samples)`;
//! [`GridFunction::from_fn`] samples the seam as the mean of the two endpoint
//! values so the sum equals the ordinary trapezoid rule over the closed
//! interval.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing grid geometry.
const GEOMETRY_RTOL: f64 = 1e-12;

/// Default normalization tolerance for densities and characteristic functions.
pub const NORM_TOL: f64 = 1e-8;
/// Default Hermitian-symmetry tolerance for characteristic functions.
pub const SYM_TOL: f64 = 1e-10;
/// Default relative negativity allowance for densities.
pub const NEG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", deny_unknown_fields)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        Grid::new(raw.x_min, raw.x_max, raw.n_points)
    }
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        if n_points < 8 {
            return Err(Error::InvalidGrid(format!(
                "n_points ({n_points}) must be at least 8"
            )));
        }
        if !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points ({n_points}) must be a power of two"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    /// Symmetric grid `[-half_range, half_range)`.
    pub fn symmetric(half_range: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_range, half_range, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.range() / self.n_points as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let dx = self.dx();
        (0..self.n_points).map(move |j| self.x_min + j as f64 * dx)
    }

    /// Index of the grid point at `x`, if `x` lies on the grid to within
    /// `1e-9` cells.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let cells = (x - self.x_min) / self.dx();
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 || rounded < 0.0 || rounded >= self.n_points as f64 {
            return None;
        }
        Some(rounded as usize)
    }

    /// Signed number of cells that `shift` spans, if it is a grid multiple.
    pub fn cells_in(&self, shift: f64) -> Option<isize> {
        let cells = shift / self.dx();
        let rounded = cells.round();
        ((cells - rounded).abs() <= 1e-9).then_some(rounded as isize)
    }

    /// The centered reciprocal grid with the same number of points:
    /// spacing `2π / (n dx)`, zero at index `n / 2`.
    pub fn reciprocal(&self) -> Grid {
        self.reciprocal_padded(self.n_points)
            .expect("same-size reciprocal grid is always valid")
    }

    /// Centered reciprocal grid with `n_points` samples, corresponding to
    /// zero-padding this grid to `n_points` cells.
    pub fn reciprocal_padded(&self, n_points: usize) -> Result<Grid> {
        if n_points < self.n_points {
            return Err(Error::GridMismatch(format!(
                "padded size {n_points} is smaller than {}",
                self.n_points
            )));
        }
        let dk = 2.0 * PI / (n_points as f64 * self.dx());
        let half = (n_points / 2) as f64 * dk;
        Grid::new(-half, half, n_points)
    }

    /// True when `other` is a valid transform target for this grid.
    pub fn is_reciprocal_to(&self, other: &Grid) -> bool {
        let product = self.dx() * other.dx() * other.n_points as f64;
        (product - 2.0 * PI).abs() <= 1e-9 * 2.0 * PI
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        let tol = GEOMETRY_RTOL * self.range().max(other.range());
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= tol
            && (self.x_max - other.x_max).abs() <= tol
    }

    pub fn same_spacing(&self, other: &Grid) -> bool {
        (self.dx() - other.dx()).abs() <= GEOMETRY_RTOL * self.dx()
    }

    /// The central quarter of the grid. Compactly supported constructions
    /// are placed here so every periodic image is at least 3/8 of the range
    /// away.
    pub fn central_region(&self) -> (f64, f64) {
        let margin = 0.375 * self.range();
        (self.x_min + margin, self.x_max - margin)
    }

    /// FFT-ordered angular wavenumbers `2π m / (n dx)`, with `m` running over
    /// `0..n/2` then `-n/2..0`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / (n as f64 * self.dx());
        (0..n)
            .map(|m| {
                let signed = if m < n / 2 {
                    m as isize
                } else {
                    m as isize - n as isize
                };
                signed as f64 * dk
            })
            .collect()
    }
}

/// A complex function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        if let Some(index) = samples
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, samples })
    }

    pub fn from_real(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        Self::new(grid, samples.into_iter().map(Complex64::from).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples `f` on the grid. The seam sample at `x_min` takes the mean of
    /// `f(x_min)` and `f(x_max)`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let mut samples: Vec<Complex64> = grid.points().map(&f).collect();
        samples[0] = 0.5 * (samples[0] + f(grid.x_max()));
        Self::new(grid, samples)
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |x| Complex64::from(f(x)))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn value(&self, j: usize) -> Complex64 {
        self.samples[j]
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.samples.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Pointwise map; the result is re-validated for finiteness.
    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Result<Self> {
        let samples = self
            .grid
            .points()
            .zip(&self.samples)
            .map(|(x, &z)| f(x, z))
            .collect();
        Self::new(self.grid, samples)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        ensure_same_grid(self, other)?;
        Ok(Self {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `|f|^2` as a real-valued grid function.
    pub fn abs_sq(&self) -> Self {
        Self {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .map(|z| Complex64::from(z.norm_sqr()))
                .collect(),
        }
    }

    /// `∫|f|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.grid.dx() * self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Index range `[first, last]` of samples that are not exactly zero.
    pub fn support_indices(&self) -> Option<(usize, usize)> {
        let first = self
            .samples
            .iter()
            .position(|z| *z != Complex64::new(0.0, 0.0))?;
        let last = self
            .samples
            .iter()
            .rposition(|z| *z != Complex64::new(0.0, 0.0))?;
        Some((first, last))
    }

    /// Mask of samples that are not exactly zero.
    pub fn support_mask(&self) -> Vec<bool> {
        self.samples
            .iter()
            .map(|z| *z != Complex64::new(0.0, 0.0))
            .collect()
    }
}

pub(crate) fn ensure_same_grid(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if f.grid.same_as(&g.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{:?} vs {:?}", f.grid, g.grid)))
    }
}

/// Trapezoid quadrature over the periodic grid.
pub fn integrate(f: &GridFunction) -> Complex64 {
    f.samples.iter().sum::<Complex64>() * f.grid.dx()
}

/// `∫ conj(f) g`.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    ensure_same_grid(f, g)?;
    let sum: Complex64 = f
        .samples
        .iter()
        .zip(&g.samples)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(sum * f.grid.dx())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    Linf,
}

pub fn distance(p: &GridFunction, q: &GridFunction, metric: Metric) -> Result<f64> {
    ensure_same_grid(p, q)?;
    let diffs = p
        .samples
        .iter()
        .zip(&q.samples)
        .map(|(a, b)| (a - b).norm());
    Ok(match metric {
        Metric::L1 => diffs.sum::<f64>() * p.grid.dx(),
        Metric::Linf => diffs.fold(0.0, f64::max),
    })
}

/// A real, nonnegative, normalized function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFunction {
    base: GridFunction,
}

impl DensityFunction {
    /// Validates nonnegativity (relative to the peak, `NEG_TOL`) and
    /// normalization (`NORM_TOL`).
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let density = Self::new_unchecked(grid, values)?;
        let worst = density.negativity();
        if worst > NEG_TOL {
            return Err(Error::NotADensity(format!(
                "minimum sample is {worst:e} of the peak below zero"
            )));
        }
        let err = density.normalization_error();
        if err > NORM_TOL {
            return Err(Error::NotADensity(format!(
                "integral deviates from 1 by {err:e}"
            )));
        }
        Ok(density)
    }

    /// Builds a density-shaped function without the nonnegativity and
    /// normalization gates. Used for negative controls, whose defects are
    /// reported by the verification harness instead of rejected up front.
    pub fn new_unchecked(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            base: GridFunction::from_real(grid, values)?,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.base.grid()
    }

    pub fn base(&self) -> &GridFunction {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn value(&self, j: usize) -> f64 {
        self.base.value(j).re
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.base.samples().iter().map(|z| z.re)
    }

    pub fn integral(&self) -> f64 {
        integrate(&self.base).re
    }

    pub fn normalization_error(&self) -> f64 {
        (self.integral() - 1.0).abs()
    }

    /// `max(0, -min) / max`: how far below zero the worst sample dips,
    /// relative to the peak.
    pub fn negativity(&self) -> f64 {
        let max = self.values().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values().fold(f64::INFINITY, f64::min);
        if max <= 0.0 {
            return if min < 0.0 { f64::INFINITY } else { 0.0 };
        }
        (-min).max(0.0) / max
    }
}

/// A characteristic function sampled on a θ-grid that contains θ = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFn {
    base: GridFunction,
    zero_index: usize,
}

impl CharFn {
    pub fn new(base: GridFunction) -> Result<Self> {
        let zero_index = base
            .grid()
            .index_of(0.0)
            .ok_or_else(|| Error::NotACharFn("theta grid does not contain 0".into()))?;
        let at_zero = base.value(zero_index);
        if (at_zero - Complex64::new(1.0, 0.0)).norm() > NORM_TOL {
            return Err(Error::NotACharFn(format!("M(0) = {at_zero}, expected 1")));
        }
        let peak = base.max_abs();
        if peak > 1.0 + NORM_TOL {
            return Err(Error::NotACharFn(format!("max |M| = {peak} exceeds 1")));
        }
        Ok(Self { base, zero_index })
    }

    pub fn grid(&self) -> &Grid {
        self.base.grid()
    }

    pub fn base(&self) -> &GridFunction {
        &self.base
    }

    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    /// Value at a θ that lies on the grid.
    pub fn at(&self, theta: f64) -> Option<Complex64> {
        self.grid().index_of(theta).map(|j| self.base.value(j))
    }

    /// `max |M(-θ) - conj(M(θ))|` over the symmetric part of the grid.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.base.len();
        let z = self.zero_index;
        let reach = z.min(n - 1 - z);
        (0..=reach)
            .map(|d| (self.base.value(z - d) - self.base.value(z + d).conj()).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_rejects_bad_geometry() {
        assert!(matches!(
            Grid::new(1.0, 0.0, 16),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(Grid::new(0.0, 1.0, 4), Err(Error::InvalidGrid(_))));
        assert!(matches!(
            Grid::new(0.0, 1.0, 100),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            Grid::new(0.0, f64::INFINITY, 16),
            Err(Error::InvalidGrid(_))
        ));
        assert!(Grid::new(0.0, 1.0, 8).is_ok());
    }

    #[test]
    fn integrate_constant_is_exact() {
        for n in [8, 64, 1024] {
            let grid = Grid::new(0.0, 1.0, n).unwrap();
            let f = GridFunction::from_real_fn(grid, |_| 1.0).unwrap();
            assert_abs_diff_eq!(integrate(&f).re, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn integrate_odd_function_vanishes() {
        let grid = Grid::new(-1.0, 1.0, 256).unwrap();
        let f = GridFunction::from_real_fn(grid, |x| x).unwrap();
        assert!(integrate(&f).norm() <= 1e-14);
    }

    #[test]
    fn inner_product_requires_shared_grid() {
        let a = GridFunction::zeros(Grid::new(0.0, 1.0, 16).unwrap());
        let b = GridFunction::zeros(Grid::new(0.0, 2.0, 16).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch(_))));
        assert!(matches!(
            distance(&a, &b, Metric::L1),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn distance_to_self_is_zero() {
        let grid = Grid::symmetric(4.0, 64).unwrap();
        let f = GridFunction::from_real_fn(grid, |x| (-x * x).exp()).unwrap();
        assert_eq!(distance(&f, &f, Metric::L1).unwrap(), 0.0);
        assert_eq!(distance(&f, &f, Metric::Linf).unwrap(), 0.0);
    }

    #[test]
    fn reciprocal_grid_is_centered() {
        let grid = Grid::symmetric(8.0, 4096).unwrap();
        let k = grid.reciprocal();
        assert_eq!(k.len(), 4096);
        assert_eq!(k.index_of(0.0), Some(2048));
        assert!(grid.is_reciprocal_to(&k));
        assert!(k.is_reciprocal_to(&grid));
    }

    #[test]
    fn non_finite_samples_rejected() {
        let grid = Grid::new(0.0, 1.0, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert_eq!(
            GridFunction::from_real(grid, v).unwrap_err(),
            Error::NonFinite { index: 3 }
        );
    }

    #[test]
    fn density_gates() {
        let grid = Grid::new(0.0, 1.0, 8).unwrap();
        assert!(DensityFunction::new(grid, vec![1.0; 8]).is_ok());
        assert!(matches!(
            DensityFunction::new(grid, vec![2.0; 8]),
            Err(Error::NotADensity(_))
        ));
        let mut v = vec![8.0 / 7.0; 8];
        v[0] = -0.0;
        v[1] = -1e-3;
        assert!(matches!(
            DensityFunction::new(grid, v.clone()),
            Err(Error::NotADensity(_))
        ));
        assert!(DensityFunction::new_unchecked(grid, v).is_ok());
    }

    #[test]
    fn charfn_requires_unit_value_at_zero() {
        let grid = Grid::symmetric(4.0, 64).unwrap();
        let m = GridFunction::from_real_fn(grid, |t| (-t * t / 2.0).exp()).unwrap();
        let cf = CharFn::new(m).unwrap();
        assert!(cf.hermitian_residual() < 1e-15);
        let bad = GridFunction::from_real_fn(grid, |t| 0.5 * (-t * t).exp()).unwrap();
        assert!(matches!(CharFn::new(bad), Err(Error::NotACharFn(_))));
        let off = Grid::new(-4.1, 3.9, 64).unwrap();
        let m = GridFunction::from_real_fn(off, |t| (-t * t).exp()).unwrap();
        assert!(matches!(CharFn::new(m), Err(Error::NotACharFn(_))));
    }
}
