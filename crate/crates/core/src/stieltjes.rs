//! Perturbed families `P_ε(r) = P₀(r)[1 + ε h(r)]` sharing every moment
//! with `P₀ = |F|²`, where `F` is the Fourier transform of a bump.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charfun::{
    autocorrelation_charfun, check_inversion, density_from_amplitude, derivative_at,
    moments_from_density, support_extent, ToleranceSchedule, MAX_QUADRATURE_ORDER,
};
use crate::error::{Error, Result};
use crate::generators::{make_bump, BumpSpec};
use crate::grid::{CharFn, DensityFunction, Grid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StieltjesFamilySpec {
    pub generator: BumpSpec,
    /// Frequency of the cosine perturbation.
    pub lambda: f64,
    pub phi: f64,
    pub epsilons: Vec<f64>,
    pub n_max: usize,
}

impl StieltjesFamilySpec {
    /// Checks everything that does not depend on the grid.
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidFamily(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.phi.abs() <= PI) {
            return Err(Error::InvalidFamily(format!(
                "phi must lie in [-pi, pi], got {}",
                self.phi
            )));
        }
        if self.epsilons.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.abs() <= 1.0)) {
            return Err(Error::InvalidFamily(format!(
                "epsilon must lie in [-1, 1], got {e}"
            )));
        }
        check_order(&self.generator, self.n_max)
    }
}

fn check_order(generator: &BumpSpec, n_max: usize) -> Result<()> {
    let cap = generator
        .kind
        .max_moment_order()
        .unwrap_or(MAX_QUADRATURE_ORDER)
        .min(MAX_QUADRATURE_ORDER);
    if n_max > cap {
        return Err(Error::OrderTooHigh {
            requested: n_max,
            cap,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct StieltjesFamily {
    pub base_density: DensityFunction,
    pub members: Vec<(f64, DensityFunction)>,
    pub charfun: CharFn,
    /// Estimated half-length of the support of `charfun`.
    pub extent: f64,
}

/// Outcome of the `λ > L` test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtentCheck {
    pub extent: f64,
    pub margin: f64,
    pub pass: bool,
}

/// `L̂` is the extent of the exact support of `M₀`; the check passes iff
/// `λ − L̂ > 2dθ`.
pub fn verify_finite_extent_condition(m0: &CharFn, lambda: f64) -> Result<ExtentCheck> {
    let extent = support_extent(m0, 0.0)?;
    let margin = lambda - extent;
    Ok(ExtentCheck {
        extent,
        margin,
        pass: margin > 2.0 * m0.grid().dx(),
    })
}

/// `M₀` on `grid` and `P₀` on its reciprocal grid. `P₀` is taken as `|F|²`
/// and must agree with the inverse transform of `M₀`.
pub fn base_pair(generator: &BumpSpec, grid: &Grid) -> Result<(CharFn, DensityFunction)> {
    let f = make_bump(generator, grid)?;
    let m0 = autocorrelation_charfun(&f, grid)?;
    let p0 = density_from_amplitude(&f, &grid.reciprocal())?;
    check_inversion(&m0, &p0)?;
    Ok((m0, p0))
}

fn perturbed(p0: &DensityFunction, epsilon: f64, h: &[f64]) -> Vec<f64> {
    p0.values()
        .zip(h)
        .map(|(p, hv)| p * (1.0 + epsilon * hv))
        .collect()
}

fn cosine_samples(grid: &Grid, lambda: f64, phi: f64) -> Vec<f64> {
    grid.points().map(|r| (lambda * r + phi).cos()).collect()
}

fn assemble(
    spec: &StieltjesFamilySpec,
    grid: &Grid,
    checked: bool,
) -> Result<(StieltjesFamily, ExtentCheck)> {
    spec.validate()?;
    let (m0, p0) = base_pair(&spec.generator, grid)?;
    let check = verify_finite_extent_condition(&m0, spec.lambda)?;
    if checked && !check.pass {
        return Err(Error::LambdaTooSmall {
            lambda: spec.lambda,
            extent: check.extent,
            margin: 2.0 * grid.dx(),
        });
    }
    let h = cosine_samples(p0.grid(), spec.lambda, spec.phi);
    let members = spec
        .epsilons
        .iter()
        .map(|&eps| {
            let values = perturbed(&p0, eps, &h);
            let density = if checked {
                DensityFunction::new(*p0.grid(), values)
            } else {
                DensityFunction::new_unchecked(*p0.grid(), values)
            }?;
            Ok((eps, density))
        })
        .collect::<Result<Vec<_>>>()?;
    let family = StieltjesFamily {
        base_density: p0,
        members,
        charfun: m0,
        extent: check.extent,
    };
    Ok((family, check))
}

/// Builds the family with the characteristic function on `grid` and the
/// densities on `grid.reciprocal()`.
pub fn build_stieltjes_family(spec: &StieltjesFamilySpec, grid: &Grid) -> Result<StieltjesFamily> {
    assemble(spec, grid, true).map(|(family, _)| family)
}

/// Same pipeline with the `λ > L` gate and the member density checks
/// disabled, for building negative controls. The extent check is returned so
/// callers can report it.
pub fn build_stieltjes_family_unchecked(
    spec: &StieltjesFamilySpec,
    grid: &Grid,
) -> Result<(StieltjesFamily, ExtentCheck)> {
    assemble(spec, grid, false)
}

/// `qₙ = ∫ rⁿ P₀(r) cos(λr + φ) dr` for `n = 0..=n_max`.
pub fn q_derivatives_at_zero(
    p0: &DensityFunction,
    lambda: f64,
    phi: f64,
    n_max: usize,
) -> Result<Vec<f64>> {
    let h = cosine_samples(p0.grid(), lambda, phi);
    perturbation_moments(p0, &h, n_max)
}

/// `∫ rⁿ P₀(r) h(r) dr` for `n = 0..=n_max`.
pub fn perturbation_moments(p0: &DensityFunction, h: &[f64], n_max: usize) -> Result<Vec<f64>> {
    if n_max > MAX_QUADRATURE_ORDER {
        return Err(Error::OrderTooHigh {
            requested: n_max,
            cap: MAX_QUADRATURE_ORDER,
        });
    }
    if h.len() != p0.len() {
        return Err(Error::LengthMismatch {
            expected: p0.len(),
            got: h.len(),
        });
    }
    let mut sums = vec![0.0; n_max + 1];
    for ((r, p), hv) in p0.grid().points().zip(p0.values()).zip(h) {
        let mut term = p * hv;
        for s in sums.iter_mut() {
            *s += term;
            term *= r;
        }
    }
    let dr = p0.grid().dx();
    Ok(sums.into_iter().map(|s| s * dr).collect())
}

/// The same quantity as [`q_derivatives_at_zero`] read off the
/// characteristic function: `Re(e^{iφ} (−i)ⁿ M₀⁽ⁿ⁾(λ))`, for `n ≤ 4`.
pub fn q_from_charfun(m0: &CharFn, lambda: f64, phi: f64, n: usize) -> Result<f64> {
    let grid = m0.grid();
    let index = grid.index_of(lambda).ok_or(Error::ThetaOffGrid {
        theta: lambda,
        dx: grid.dx(),
    })?;
    let d = derivative_at(m0.base(), index, n)?;
    let value = Complex64::cis(phi) * Complex64::new(0.0, -1.0).powu(n as u32) * d;
    Ok(value.re)
}

/// Family from a caller-supplied perturbation `h` sampled on the density
/// grid. `|h| ≤ 1` is required sample-wise and every `qₙ` must vanish within
/// the moment tolerance of `P₀`; nothing about `h` is assumed.
pub fn build_custom_family(
    generator: &BumpSpec,
    h: &[f64],
    epsilons: &[f64],
    n_max: usize,
    grid: &Grid,
) -> Result<StieltjesFamily> {
    generator.validate()?;
    check_order(generator, n_max)?;
    if epsilons.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if let Some(e) = epsilons.iter().find(|e| !(e.abs() <= 1.0)) {
        return Err(Error::InvalidFamily(format!(
            "epsilon must lie in [-1, 1], got {e}"
        )));
    }
    let (m0, p0) = base_pair(generator, grid)?;
    if h.len() != p0.len() {
        return Err(Error::LengthMismatch {
            expected: p0.len(),
            got: h.len(),
        });
    }
    if let Some((j, v)) = h.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
        return Err(Error::InvalidFamily(format!(
            "|h| must not exceed 1, got {v} at index {j}"
        )));
    }
    let reference = moments_from_density(&p0, n_max)?;
    let tol = ToleranceSchedule::default().for_reference(&reference);
    let q = perturbation_moments(&p0, h, n_max)?;
    for (order, (value, tolerance)) in q.iter().zip(&tol).enumerate() {
        if value.abs() > *tolerance {
            return Err(Error::PerturbationNotAnnihilating {
                order,
                value: value.abs(),
                tolerance: *tolerance,
            });
        }
    }
    let members = epsilons
        .iter()
        .map(|&eps| {
            Ok((
                eps,
                DensityFunction::new(*p0.grid(), perturbed(&p0, eps, h))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let extent = support_extent(&m0, 0.0)?;
    Ok(StieltjesFamily {
        base_density: p0,
        members,
        charfun: m0,
        extent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{distance, Metric};

    fn grid() -> Grid {
        Grid::symmetric(8.0, 4096).unwrap()
    }

    fn spec(lambda: f64, phi: f64) -> StieltjesFamilySpec {
        StieltjesFamilySpec {
            generator: BumpSpec::standard(0.0, 1.0),
            lambda,
            phi,
            epsilons: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            n_max: 8,
        }
    }

    #[test]
    fn zero_epsilon_is_base() {
        let family = build_stieltjes_family(&spec(2.5, 0.0), &grid()).unwrap();
        let (eps, zero) = &family.members[2];
        assert_eq!(*eps, 0.0);
        assert_eq!(zero.base(), family.base_density.base());
    }

    #[test]
    fn opposite_phases_mirror() {
        let a = build_stieltjes_family(&spec(2.5, 0.0), &grid()).unwrap();
        let b = build_stieltjes_family(&spec(2.5, PI), &grid()).unwrap();
        let twice = a.base_density.base().scaled(Complex64::from(2.0));
        let sum = a.members[4].1.base().add(b.members[4].1.base()).unwrap();
        assert!(distance(&sum, &twice, Metric::Linf).unwrap() < 1e-12);
    }

    #[test]
    fn cosine_moment_of_base_vanishes() {
        let family = build_stieltjes_family(&spec(2.5, 0.0), &grid()).unwrap();
        let q = q_derivatives_at_zero(&family.base_density, 2.5, 0.0, 0).unwrap();
        assert!(q[0].abs() < 1e-9);
    }

    #[test]
    fn small_lambda_rejected() {
        let err = build_stieltjes_family(&spec(1.0, 0.0), &grid()).unwrap_err();
        assert!(matches!(err, Error::LambdaTooSmall { .. }));
    }

    #[test]
    fn extent_checks() {
        let (m0, _) = base_pair(&BumpSpec::standard(0.0, 1.0), &grid()).unwrap();
        let ok = verify_finite_extent_condition(&m0, 2.5).unwrap();
        assert!(ok.pass);
        assert!((ok.margin - 0.5).abs() <= 2.0 * grid().dx());
        assert!(!verify_finite_extent_condition(&m0, 1.0).unwrap().pass);
        let at_extent = verify_finite_extent_condition(&m0, ok.extent).unwrap();
        assert!(!at_extent.pass);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(2.5, 0.0);
        s.epsilons = vec![1.5];
        assert!(matches!(s.validate(), Err(Error::InvalidFamily(_))));
        s.epsilons.clear();
        assert!(matches!(s.validate(), Err(Error::EmptyFamily)));
        let mut s = spec(2.5, 0.0);
        s.n_max = 13;
        assert!(matches!(s.validate(), Err(Error::OrderTooHigh { .. })));
        let mut s = spec(2.5, 0.0);
        s.generator = BumpSpec::cosine_power(0.0, 1.0, 6);
        assert!(matches!(
            s.validate(),
            Err(Error::OrderTooHigh {
                requested: 8,
                cap: 4
            })
        ));
    }

    #[test]
    fn symmetric_base_sine_phase_even_orders_vanish() {
        let family = build_stieltjes_family(&spec(2.5, 0.0), &grid()).unwrap();
        let q = q_derivatives_at_zero(&family.base_density, 1.0, PI / 2.0, 8).unwrap();
        let reference = moments_from_density(&family.base_density, 8).unwrap();
        let tol = ToleranceSchedule::default().for_reference(&reference);
        for n in (0..=8).step_by(2) {
            assert!(q[n].abs() <= tol[n], "n = {n}: {}", q[n]);
        }
    }

    #[test]
    fn q_matches_charfun_route() {
        let (m0, p0) = base_pair(&BumpSpec::standard(0.0, 1.0), &grid()).unwrap();
        let q = q_derivatives_at_zero(&p0, 1.0, 0.3, 4).unwrap();
        for (n, qn) in q.iter().enumerate() {
            let via = q_from_charfun(&m0, 1.0, 0.3, n).unwrap();
            assert!(
                (qn - via).abs() < 1e-4 * qn.abs().max(1.0),
                "n = {n}: {qn} vs {via}"
            );
        }
    }

    #[test]
    fn custom_perturbation_gate() {
        let g = grid();
        let r = g.reciprocal();
        let good: Vec<f64> = r.points().map(|x| (3.0 * x).sin()).collect();
        let family =
            build_custom_family(&BumpSpec::standard(0.0, 1.0), &good, &[0.0, 1.0], 8, &g).unwrap();
        assert_eq!(family.members.len(), 2);

        let bad: Vec<f64> = r.points().map(|x| (0.5 * x).cos()).collect();
        assert!(matches!(
            build_custom_family(&BumpSpec::standard(0.0, 1.0), &bad, &[1.0], 8, &g),
            Err(Error::PerturbationNotAnnihilating { order: 0, .. })
        ));
        let large = vec![1.5; r.len()];
        assert!(matches!(
            build_custom_family(&BumpSpec::standard(0.0, 1.0), &large, &[1.0], 8, &g),
            Err(Error::InvalidFamily(_))
        ));
    }
}
