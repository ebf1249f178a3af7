//! Characteristic functions: construction by autocorrelation, inversion to
//! densities, support estimation, and moment extraction by two independent
//! routes (quadrature of `xⁿP(x)` and finite differences of `M` at 0).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{exp_minus_transform, exp_plus_transform, fourier_transform};
use crate::grid::{distance, CharFn, DensityFunction, Grid, GridFunction, Metric};

/// Cap on moment orders extracted by quadrature.
pub const MAX_QUADRATURE_ORDER: usize = 12;
/// Cap on moment orders extracted from finite differences of `M`.
pub const MAX_DERIVATIVE_ORDER: usize = 4;
/// Default relative threshold for [`support_extent`].
pub const DEFAULT_DROP_TOL: f64 = 1e-10;
/// Largest imaginary part tolerated when inverting a characteristic function.
pub const INVERSION_IMAG_TOL: f64 = 1e-9;
/// Largest L∞ gap allowed between an inverted characteristic function and
/// the squared transform of the amplitude it came from.
pub const INVERSION_AGREEMENT: f64 = 1e-8;
/// Relative imaginary residue tolerated on finite-difference moments.
pub const DERIVATIVE_IMAG_RTOL: f64 = 1e-6;

/// Moment tolerance schedule `tol_n = atol·σⁿ + rtol·|m_n|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSchedule {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for ToleranceSchedule {
    fn default() -> Self {
        Self {
            atol: 1e-8,
            rtol: 1e-6,
        }
    }
}

impl ToleranceSchedule {
    pub fn tol(&self, order: usize, sigma_ref: f64, m_ref: f64) -> f64 {
        self.atol * sigma_ref.powi(order as i32) + self.rtol * m_ref.abs()
    }

    /// Tolerances for every order of `reference`.
    pub fn for_reference(&self, reference: &MomentVector) -> Vec<f64> {
        reference
            .values
            .iter()
            .enumerate()
            .map(|(n, m)| self.tol(n, reference.sigma_ref, *m))
            .collect()
    }
}

/// `E[Xⁿ]` for `n = 0..=n_max`, with the standard deviation of the density
/// it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub values: Vec<f64>,
    pub sigma_ref: f64,
}

impl MomentVector {
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }
}

/// `Σ_i conj(f_i) g_{i+s} w(x_i, θ) dx` for every θ on `theta_grid`, where
/// `s = θ/dx` and samples beyond the grid count as zero.
pub(crate) fn shifted_correlation(
    f: &GridFunction,
    g: &GridFunction,
    theta_grid: &Grid,
    weight: impl Fn(f64, f64) -> Complex64,
) -> Result<GridFunction> {
    crate::grid::ensure_same_grid(f, g)?;
    let x_grid = f.grid();
    if !theta_grid.same_spacing(x_grid) {
        return Err(Error::GridIncompatible(format!(
            "theta spacing {} differs from x spacing {}",
            theta_grid.dx(),
            x_grid.dx()
        )));
    }
    let zero = theta_grid
        .index_of(0.0)
        .ok_or_else(|| Error::GridIncompatible("theta grid must contain theta = 0".into()))?
        as isize;

    let dx = x_grid.dx();
    let mut out = vec![Complex64::new(0.0, 0.0); theta_grid.len()];
    let (Some((f_lo, f_hi)), Some((g_lo, g_hi))) = (f.support_indices(), g.support_indices())
    else {
        return GridFunction::new(*theta_grid, out);
    };
    let (f_lo, f_hi, g_lo, g_hi) = (f_lo as isize, f_hi as isize, g_lo as isize, g_hi as isize);
    let fs = f.samples();
    let gs = g.samples();

    for (j, slot) in out.iter_mut().enumerate() {
        let shift = j as isize - zero;
        let lo = f_lo.max(g_lo - shift);
        let hi = f_hi.min(g_hi - shift);
        if lo > hi {
            continue;
        }
        let theta = theta_grid.point(j);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in lo..=hi {
            let a = fs[i as usize];
            let b = gs[(i + shift) as usize];
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            acc += a.conj() * b * weight(x_grid.point(i as usize), theta);
        }
        *slot = acc * dx;
    }
    GridFunction::new(*theta_grid, out)
}

/// `M(θ) = ∫ f*(x) f(x+θ) dx` by exact sample shifts.
pub fn autocorrelation_charfun(f: &GridFunction, theta_grid: &Grid) -> Result<CharFn> {
    CharFn::new(shifted_correlation(f, f, theta_grid, |_, _| {
        Complex64::new(1.0, 0.0)
    })?)
}

/// `P(r) = (1/2π) ∫ M(θ) e^{-iθr} dθ` on a grid reciprocal to the θ-grid.
pub fn density_from_charfun(m: &CharFn, r_grid: &Grid) -> Result<DensityFunction> {
    let p = exp_minus_transform(m.base(), r_grid)?.scaled(Complex64::from(0.5 / PI));
    let residue = p.max_imag();
    if residue > INVERSION_IMAG_TOL {
        return Err(Error::ImaginaryResidue {
            residue,
            limit: INVERSION_IMAG_TOL,
            context: "density from characteristic function",
        });
    }
    DensityFunction::new(*r_grid, p.real_parts())
}

/// `|F(r)|²` where `F` is the Fourier transform of the amplitude `f`.
///
/// This is the density whose characteristic function is the autocorrelation
/// of `f`. Inverting the characteristic function by FFT leaves an absolute
/// roundoff floor near `1e-17` across the whole `r` grid, which high-order
/// moments amplify by `|r|ⁿ`; squaring the amplitude transform does not.
pub fn density_from_amplitude(f: &GridFunction, r_grid: &Grid) -> Result<DensityFunction> {
    let transform = fourier_transform(f, r_grid)?;
    DensityFunction::new(*r_grid, transform.abs_sq().real_parts())
}

/// Fails unless inverting `m` reproduces `p` within [`INVERSION_AGREEMENT`].
pub fn check_inversion(m: &CharFn, p: &DensityFunction) -> Result<f64> {
    let inverted = density_from_charfun(m, p.grid())?;
    let gap = distance(inverted.base(), p.base(), Metric::Linf)?;
    if gap > INVERSION_AGREEMENT {
        return Err(Error::InversionMismatch {
            distance: gap,
            limit: INVERSION_AGREEMENT,
        });
    }
    Ok(gap)
}

/// `M(θ) = ∫ P(r) e^{iθr} dr`.
pub fn charfun_from_density(p: &DensityFunction, theta_grid: &Grid) -> Result<CharFn> {
    CharFn::new(exp_plus_transform(p.base(), theta_grid)?)
}

/// Largest `|θ|` at which `|M(θ)| > drop_tol · max|M|`. With `drop_tol = 0`
/// this is the extent of the exact (nonzero-sample) support.
pub fn support_extent(m: &CharFn, drop_tol: f64) -> Result<f64> {
    let base = m.base();
    let threshold = drop_tol * base.max_abs();
    let edge = base.value(0).norm().max(base.value(base.len() - 1).norm());
    if edge > threshold {
        return Err(Error::NoCompactSupport { edge, threshold });
    }
    let grid = m.grid();
    Ok(base
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > threshold)
        .map(|(j, _)| grid.point(j).abs())
        .fold(0.0, f64::max))
}

/// Standard deviation from first and second moments, floored at zero.
fn sigma(m1: f64, m2: f64) -> f64 {
    (m2 - m1 * m1).max(0.0).sqrt()
}

/// `∫ rⁿ P(r) dr` for `n = 0..=n_max`.
pub fn moments_from_density(p: &DensityFunction, n_max: usize) -> Result<MomentVector> {
    if n_max > MAX_QUADRATURE_ORDER {
        return Err(Error::OrderTooHigh {
            requested: n_max,
            cap: MAX_QUADRATURE_ORDER,
        });
    }
    let top = n_max.max(2);
    let mut sums = vec![0.0; top + 1];
    for (r, v) in p.grid().points().zip(p.values()) {
        let mut power = v;
        for s in sums.iter_mut() {
            *s += power;
            power *= r;
        }
    }
    let dx = p.grid().dx();
    let all: Vec<f64> = sums.into_iter().map(|s| s * dx).collect();
    Ok(MomentVector {
        sigma_ref: sigma(all[1], all[2]),
        values: all[..=n_max].to_vec(),
    })
}

fn central_difference(
    g: &dyn Fn(isize) -> Complex64,
    order: usize,
    step: isize,
    h: f64,
) -> Complex64 {
    match order {
        0 => g(0),
        1 => (g(step) - g(-step)) / (2.0 * h),
        2 => (g(step) - 2.0 * g(0) + g(-step)) / (h * h),
        3 => (g(2 * step) - 2.0 * g(step) + 2.0 * g(-step) - g(-2 * step)) / (2.0 * h.powi(3)),
        4 => (g(2 * step) - 4.0 * g(step) + 6.0 * g(0) - 4.0 * g(-step) + g(-2 * step)) / h.powi(4),
        _ => unreachable!("order checked by caller"),
    }
}

/// `dⁿf/dθⁿ` at grid index `index` by central differences at steps of 1, 2
/// and 4 cells, combined by two rounds of Richardson extrapolation.
pub fn derivative_at(f: &GridFunction, index: usize, order: usize) -> Result<Complex64> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::OrderTooHigh {
            requested: order,
            cap: MAX_DERIVATIVE_ORDER,
        });
    }
    let reach = 8;
    if index < reach || index + reach >= f.len() {
        return Err(Error::GridIncompatible(format!(
            "difference stencil around index {index} leaves the grid"
        )));
    }
    let dx = f.grid().dx();
    let g = |offset: isize| f.value((index as isize + offset) as usize);
    let d1 = central_difference(&g, order, 1, dx);
    let d2 = central_difference(&g, order, 2, 2.0 * dx);
    let d4 = central_difference(&g, order, 4, 4.0 * dx);
    let r1 = (4.0 * d1 - d2) / 3.0;
    let r2 = (4.0 * d2 - d4) / 3.0;
    Ok((16.0 * r1 - r2) / 15.0)
}

/// `(1/i)ⁿ M⁽ⁿ⁾(0)` for `n = 0..=n_max`.
pub fn moments_from_charfun(m: &CharFn, n_max: usize) -> Result<MomentVector> {
    if n_max > MAX_DERIVATIVE_ORDER {
        return Err(Error::OrderTooHigh {
            requested: n_max,
            cap: MAX_DERIVATIVE_ORDER,
        });
    }
    let top = n_max.max(2);
    let mut all = Vec::with_capacity(top + 1);
    for n in 0..=top {
        let d = derivative_at(m.base(), m.zero_index(), n)?;
        let value = Complex64::new(0.0, -1.0).powu(n as u32) * d;
        let limit = DERIVATIVE_IMAG_RTOL * value.re.abs().max(1.0);
        if value.im.abs() > limit {
            return Err(Error::ImaginaryResidue {
                residue: value.im.abs(),
                limit,
                context: "moment from characteristic function",
            });
        }
        all.push(value.re);
    }
    Ok(MomentVector {
        sigma_ref: sigma(all[1], all[2]),
        values: all[..=n_max].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{make_bump, BumpSpec};
    use crate::grid::{distance, Metric};

    fn setup() -> (Grid, GridFunction, CharFn) {
        let grid = Grid::symmetric(8.0, 4096).unwrap();
        let f = make_bump(&BumpSpec::standard(0.0, 1.0), &grid).unwrap();
        let m = autocorrelation_charfun(&f, &grid).unwrap();
        (grid, f, m)
    }

    #[test]
    fn autocorrelation_basics() {
        let (grid, _, m) = setup();
        assert!((m.at(0.0).unwrap() - 1.0).norm() < 1e-14);
        for (t, z) in grid.points().zip(m.base().samples()) {
            if t.abs() >= 2.0 {
                assert_eq!(*z, Complex64::new(0.0, 0.0), "theta = {t}");
            }
            assert!(z.norm() <= 1.0 + 1e-14);
        }
        assert!(m.hermitian_residual() < 1e-15);
    }

    #[test]
    fn mismatched_theta_spacing_rejected() {
        let (_, f, _) = setup();
        let coarse = Grid::symmetric(8.0, 2048).unwrap();
        assert!(matches!(
            autocorrelation_charfun(&f, &coarse),
            Err(Error::GridIncompatible(_))
        ));
    }

    #[test]
    fn density_is_transform_magnitude() {
        let (grid, f, m) = setup();
        let r = grid.reciprocal();
        let p = density_from_charfun(&m, &r).unwrap();
        let big_f = crate::fourier::fourier_transform(&f, &r).unwrap();
        let expected = big_f.abs_sq();
        assert!(distance(p.base(), &expected, Metric::Linf).unwrap() < 1e-8);
    }

    #[test]
    fn gaussian_pair() {
        let grid = Grid::symmetric(32.0, 4096).unwrap();
        let m = CharFn::new(GridFunction::from_real_fn(grid, |t| (-t * t / 2.0).exp()).unwrap())
            .unwrap();
        let r = grid.reciprocal();
        let p = density_from_charfun(&m, &r).unwrap();
        let normal =
            GridFunction::from_real_fn(r, |x| (-x * x / 2.0).exp() / (2.0 * PI).sqrt()).unwrap();
        assert!(distance(p.base(), &normal, Metric::Linf).unwrap() < 1e-8);
    }

    #[test]
    fn round_trip_density_charfun() {
        let (grid, _, m) = setup();
        let r = grid.reciprocal();
        let p = density_from_charfun(&m, &r).unwrap();
        let m2 = charfun_from_density(&p, &grid).unwrap();
        assert!(distance(m.base(), m2.base(), Metric::Linf).unwrap() < 1e-8);
        assert!(m2.base().max_imag() < 1e-10);
    }

    #[test]
    fn extent_of_bump_autocorrelation() {
        let (grid, _, m) = setup();
        let exact = support_extent(&m, 0.0).unwrap();
        assert!((exact - 2.0).abs() <= 2.0 * grid.dx());
        let loose = support_extent(&m, DEFAULT_DROP_TOL).unwrap();
        assert!(loose <= exact);
    }

    #[test]
    fn gaussian_has_no_compact_support() {
        let grid = Grid::symmetric(8.0, 256).unwrap();
        let m = CharFn::new(GridFunction::from_real_fn(grid, |t| (-t * t / 2.0).exp()).unwrap())
            .unwrap();
        assert!(matches!(
            support_extent(&m, 0.0),
            Err(Error::NoCompactSupport { .. })
        ));
    }

    #[test]
    fn order_caps() {
        let (grid, _, m) = setup();
        let p = density_from_charfun(&m, &grid.reciprocal()).unwrap();
        assert!(matches!(
            moments_from_density(&p, 13),
            Err(Error::OrderTooHigh {
                requested: 13,
                cap: 12
            })
        ));
        assert!(matches!(
            moments_from_charfun(&m, 5),
            Err(Error::OrderTooHigh {
                requested: 5,
                cap: 4
            })
        ));
    }

    #[test]
    fn two_routes_agree() {
        let (grid, f, m) = setup();
        let p = density_from_amplitude(&f, &grid.reciprocal()).unwrap();
        assert!(check_inversion(&m, &p).unwrap() < 1e-10);
        let by_density = moments_from_density(&p, 4).unwrap();
        let by_charfun = moments_from_charfun(&m, 4).unwrap();
        let tol = ToleranceSchedule::default().for_reference(&by_density);
        for (n, t) in tol.iter().enumerate() {
            let diff = (by_density.get(n) - by_charfun.get(n)).abs();
            assert!(diff <= *t, "n = {n}: {diff} > {t}");
        }
        assert!((by_charfun.get(0) - 1.0).abs() < 1e-12);
        assert!(by_charfun.get(1).abs() < 1e-7);
        let rel = (by_charfun.get(2) - by_density.get(2)).abs() / by_density.get(2);
        assert!(rel < 1e-5);
    }
}
