//! Continuous Fourier transforms evaluated by FFT with phase corrections,
//! and spectral differentiation.
//!
//! Conventions:
//!
//! ```text
//! F(k) = (1/√(2π)) ∫ f(x) e^{-ikx} dx
//! f(x) = (1/√(2π)) ∫ F(k) e^{+ikx} dk
//! ```
//!
//! A transform from a grid with spacing `dx` must land on a grid with
//! spacing `2π / (N dx)` and `N >= n` points (the source is zero-padded to
//! `N` cells). Grid offsets on either side are handled with explicit phase
//! factors, so the sampled result is the continuous transform of the sampled
//! input, not a DFT with an arbitrary origin.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

/// Samples at the grid edge may not exceed this fraction of the peak for a
/// spectral derivative to be meaningful.
pub const EDGE_TOL: f64 = 1e-10;

fn fft_in_place(buffer: &mut [Complex64], direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft(buffer.len(), direction).process(buffer);
}

/// `out(y_m) = scale * Σ_j f(x_j) e^{sign·i·y_m·x_j}` on a reciprocal target.
fn phased_transform(
    f: &GridFunction,
    target: &Grid,
    sign: f64,
    scale: f64,
) -> Result<GridFunction> {
    let source = f.grid();
    if target.len() < source.len() {
        return Err(Error::GridMismatch(format!(
            "target grid has {} points, fewer than the source's {}",
            target.len(),
            source.len()
        )));
    }
    if !source.is_reciprocal_to(target) {
        return Err(Error::GridMismatch(format!(
            "target spacing {} is not 2π/(N·{}) with N = {}",
            target.dx(),
            source.dx(),
            target.len()
        )));
    }

    let n_out = target.len();
    let dx = source.dx();
    let x0 = source.x_min();
    let y0 = target.x_min();

    let mut buffer = vec![Complex64::new(0.0, 0.0); n_out];
    for (j, (slot, &z)) in buffer.iter_mut().zip(f.samples()).enumerate() {
        *slot = z * Complex64::cis(sign * y0 * (j as f64 * dx));
    }
    let direction = if sign < 0.0 {
        FftDirection::Forward
    } else {
        FftDirection::Inverse
    };
    fft_in_place(&mut buffer, direction);

    let samples = buffer
        .into_iter()
        .enumerate()
        .map(|(m, z)| scale * z * Complex64::cis(sign * target.point(m) * x0))
        .collect();
    GridFunction::new(*target, samples)
}

/// Unitary continuous Fourier transform of `f`, sampled on `target_grid`.
pub fn fourier_transform(f: &GridFunction, target_grid: &Grid) -> Result<GridFunction> {
    let scale = f.grid().dx() / (2.0 * PI).sqrt();
    phased_transform(f, target_grid, -1.0, scale)
}

/// Inverse of [`fourier_transform`].
pub fn inverse_fourier_transform(f: &GridFunction, target_grid: &Grid) -> Result<GridFunction> {
    let scale = f.grid().dx() / (2.0 * PI).sqrt();
    phased_transform(f, target_grid, 1.0, scale)
}

/// `∫ g(θ) e^{-iθr} dθ` on the reciprocal grid, unscaled by any 2π factor.
pub(crate) fn exp_minus_transform(g: &GridFunction, target: &Grid) -> Result<GridFunction> {
    phased_transform(g, target, -1.0, g.grid().dx())
}

/// `∫ g(r) e^{+iθr} dr` on the reciprocal grid.
pub(crate) fn exp_plus_transform(g: &GridFunction, target: &Grid) -> Result<GridFunction> {
    phased_transform(g, target, 1.0, g.grid().dx())
}

pub(crate) fn check_edges(f: &GridFunction) -> Result<()> {
    let max = f.max_abs();
    let edge = f.value(0).norm().max(f.value(f.len() - 1).norm());
    if edge > EDGE_TOL * max {
        return Err(Error::EdgeSupport { edge, max });
    }
    Ok(())
}

/// `order`-th derivative by multiplying the DFT by `(ik)^order`. For odd
/// orders the Nyquist mode is dropped so real input stays real.
pub fn spectral_derivative(f: &GridFunction, order: u32) -> Result<GridFunction> {
    if order == 0 {
        return Ok(f.clone());
    }
    check_edges(f)?;
    let grid = *f.grid();
    let n = grid.len();
    let k = grid.wavenumbers();
    let mut buffer = f.samples().to_vec();
    fft_in_place(&mut buffer, FftDirection::Forward);
    let inv_n = 1.0 / n as f64;
    for (m, z) in buffer.iter_mut().enumerate() {
        let multiplier = if m == n / 2 && order % 2 == 1 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k[m]).powu(order)
        };
        *z *= multiplier * inv_n;
    }
    fft_in_place(&mut buffer, FftDirection::Inverse);
    GridFunction::new(grid, buffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, Metric};

    fn gaussian(grid: Grid) -> GridFunction {
        GridFunction::from_real_fn(grid, |x| (-x * x / 2.0).exp() / PI.powf(0.25)).unwrap()
    }

    #[test]
    fn gaussian_is_self_transform() {
        let grid = Grid::symmetric(16.0, 4096).unwrap();
        let f = gaussian(grid);
        let k = grid.reciprocal();
        let big_f = fourier_transform(&f, &k).unwrap();
        let expected = gaussian(k);
        let err = crate::grid::distance(&big_f, &expected, Metric::Linf).unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn round_trip_on_offset_grids() {
        let grid = Grid::new(-5.0, 7.0, 512).unwrap();
        let f = GridFunction::from_fn(grid, |x| {
            Complex64::new((-(x - 1.0) * (x - 1.0)).exp(), 0.3 * (-(x * x)).exp() * x)
        })
        .unwrap();
        let k = Grid::new(-40.0, -40.0 + 2.0 * PI / grid.dx(), 512).unwrap();
        let big_f = fourier_transform(&f, &k).unwrap();
        let back = inverse_fourier_transform(&big_f, &grid).unwrap();
        let err = crate::grid::distance(&f, &back, Metric::Linf).unwrap();
        assert!(err < 1e-12, "err = {err}");
    }

    #[test]
    fn padding_to_more_points() {
        let grid = Grid::symmetric(8.0, 256).unwrap();
        let f = gaussian(grid);
        let k = grid.reciprocal_padded(1024).unwrap();
        let big_f = fourier_transform(&f, &k).unwrap();
        assert!((big_f.norm_sq() - f.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_reciprocal_or_smaller_targets() {
        let grid = Grid::symmetric(8.0, 256).unwrap();
        let f = gaussian(grid);
        let small = Grid::symmetric(8.0, 128).unwrap().reciprocal();
        assert!(matches!(
            fourier_transform(&f, &small),
            Err(Error::GridMismatch(_))
        ));
        let wrong = Grid::symmetric(3.0, 256).unwrap();
        assert!(matches!(
            fourier_transform(&f, &wrong),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn inverse_of_zero_is_zero() {
        let grid = Grid::symmetric(8.0, 64).unwrap();
        let zero = GridFunction::zeros(grid.reciprocal());
        let back = inverse_fourier_transform(&zero, &grid).unwrap();
        assert_eq!(back.max_abs(), 0.0);
    }

    #[test]
    fn derivative_of_gaussian() {
        let grid = Grid::symmetric(12.0, 1024).unwrap();
        let f = GridFunction::from_real_fn(grid, |x| (-x * x).exp()).unwrap();
        let df = spectral_derivative(&f, 1).unwrap();
        let expected = GridFunction::from_real_fn(grid, |x| -2.0 * x * (-x * x).exp()).unwrap();
        assert!(crate::grid::distance(&df, &expected, Metric::Linf).unwrap() < 1e-8);
        assert_eq!(spectral_derivative(&f, 0).unwrap(), f);
        // derivative of a function that vanishes at the edges integrates to 0
        assert!(integrate(&df).norm() < 1e-14);
    }

    #[test]
    fn derivative_rejects_edge_mass() {
        let grid = Grid::symmetric(2.0, 64).unwrap();
        let f = GridFunction::from_real_fn(grid, |x| (-x * x).exp()).unwrap();
        assert!(matches!(
            spectral_derivative(&f, 1),
            Err(Error::EdgeSupport { .. })
        ));
    }
}
