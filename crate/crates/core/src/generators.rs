//! Smooth, compactly supported, L²-normalized generator functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BumpKind {
    /// `exp(-1 / (1 - u²))` on `|u| < 1`.
    StandardBump,
    /// `cos^p(π u / 2)` on `|u| < 1`; `p - 1` continuous derivatives.
    CosinePowerBump { p: u32 },
}

impl BumpKind {
    /// Unnormalized profile at the scaled coordinate `u`. Outside `|u| < 1`
    /// the value is an exact zero.
    pub fn profile(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        match *self {
            BumpKind::StandardBump => (-1.0 / (1.0 - u * u)).exp(),
            BumpKind::CosinePowerBump { p } => (0.5 * PI * u).cos().powi(p as i32),
        }
    }

    /// Highest moment order the construction supports for this kind.
    pub fn max_moment_order(&self) -> Option<usize> {
        match *self {
            BumpKind::StandardBump => None,
            BumpKind::CosinePowerBump { p } => Some(p as usize - 2),
        }
    }
}

fn default_phase() -> f64 {
    0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: f64,
    pub half_width: f64,
    pub kind: BumpKind,
    /// Argument of the unit-modulus amplitude factor, in radians.
    #[serde(default = "default_phase")]
    pub phase: f64,
}

impl BumpSpec {
    pub fn standard(center: f64, half_width: f64) -> Self {
        Self {
            center,
            half_width,
            kind: BumpKind::StandardBump,
            phase: 0.0,
        }
    }

    pub fn cosine_power(center: f64, half_width: f64, p: u32) -> Self {
        Self {
            center,
            half_width,
            kind: BumpKind::CosinePowerBump { p },
            phase: 0.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn shifted(mut self, distance: f64) -> Self {
        self.center += distance;
        self
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidBump(format!(
                "half_width must be positive, got {}",
                self.half_width
            )));
        }
        if !self.center.is_finite() || !self.phase.is_finite() {
            return Err(Error::InvalidBump("center and phase must be finite".into()));
        }
        if let BumpKind::CosinePowerBump { p } = self.kind {
            if p < 4 {
                return Err(Error::InvalidBump(format!(
                    "cosine power must be at least 4, got {p}"
                )));
            }
        }
        Ok(())
    }

    fn check_fits(&self, grid: &Grid) -> Result<()> {
        let (lo, hi) = self.support();
        let (allowed_lo, allowed_hi) = grid.central_region();
        let slack = 1e-9 * grid.dx();
        if lo < allowed_lo - slack || hi > allowed_hi + slack {
            return Err(Error::SupportOverflow {
                lo,
                hi,
                allowed_lo,
                allowed_hi,
            });
        }
        Ok(())
    }

    fn raw_samples(&self, grid: &Grid) -> Vec<f64> {
        grid.points()
            .map(|x| self.kind.profile((x - self.center) / self.half_width))
            .collect()
    }
}

/// Normalization constant `C` such that `C * profile` has unit L² norm under
/// the grid quadrature.
pub fn bump_normalization(spec: &BumpSpec, grid: &Grid) -> Result<f64> {
    spec.validate()?;
    spec.check_fits(grid)?;
    let energy: f64 = spec.raw_samples(grid).iter().map(|v| v * v).sum::<f64>() * grid.dx();
    if energy <= 0.0 {
        return Err(Error::InvalidBump(format!(
            "bump of half_width {} covers no grid points",
            spec.half_width
        )));
    }
    Ok(energy.sqrt().recip())
}

fn make_scaled_bump(spec: &BumpSpec, grid: &Grid, mass: f64) -> Result<GridFunction> {
    let c = bump_normalization(spec, grid)? * mass.sqrt();
    let amplitude = Complex64::cis(spec.phase) * c;
    let samples = spec
        .raw_samples(grid)
        .into_iter()
        .map(|v| amplitude * v)
        .collect();
    GridFunction::new(*grid, samples)
}

/// Samples the normalized bump; samples outside the open support are exact
/// zeros.
pub fn make_bump(spec: &BumpSpec, grid: &Grid) -> Result<GridFunction> {
    make_scaled_bump(spec, grid, 1.0)
}

fn default_norm_split() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisjointPairSpec {
    pub left: BumpSpec,
    pub right: BumpSpec,
    /// Fraction of the L² mass carried by `left`.
    #[serde(default = "default_norm_split")]
    pub norm_split: f64,
}

impl DisjointPairSpec {
    /// Two standard bumps of the same width whose centers are `distance`
    /// apart, placed symmetrically about `midpoint`.
    pub fn symmetric(midpoint: f64, half_width: f64, distance: f64) -> Self {
        Self {
            left: BumpSpec::standard(midpoint - 0.5 * distance, half_width),
            right: BumpSpec::standard(midpoint + 0.5 * distance, half_width),
            norm_split: 0.5,
        }
    }

    /// `right` is `left` translated by `distance`: f₂(x) = f₁(x − D).
    pub fn shifted_copy(left: BumpSpec, distance: f64) -> Self {
        Self {
            left,
            right: left.shifted(distance),
            norm_split: 0.5,
        }
    }

    pub fn center_distance(&self) -> f64 {
        self.right.center - self.left.center
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        if !(self.norm_split > 0.0 && self.norm_split < 1.0) {
            return Err(Error::InvalidBump(format!(
                "norm_split must lie in (0, 1), got {}",
                self.norm_split
            )));
        }
        let (a_lo, a_hi) = self.left.support();
        let (b_lo, b_hi) = self.right.support();
        let gap = (b_lo - a_hi).max(a_lo - b_hi);
        if gap < grid.dx() {
            return Err(Error::SupportsOverlap(format!(
                "closed supports [{a_lo}, {a_hi}] and [{b_lo}, {b_hi}] are less than one cell apart"
            )));
        }
        Ok(())
    }
}

/// Builds `(f₁, f₂)` with `∫|f₁|² = norm_split`, `∫|f₂|² = 1 − norm_split`
/// and `f₁·f₂ = 0` sample-wise.
pub fn make_disjoint_pair(
    spec: &DisjointPairSpec,
    grid: &Grid,
) -> Result<(GridFunction, GridFunction)> {
    spec.validate(grid)?;
    let f1 = make_scaled_bump(&spec.left, grid, spec.norm_split)?;
    let f2 = make_scaled_bump(&spec.right, grid, 1.0 - spec.norm_split)?;
    ensure_disjoint(&f1, &f2)?;
    Ok((f1, f2))
}

pub(crate) fn ensure_disjoint(f1: &GridFunction, f2: &GridFunction) -> Result<()> {
    crate::grid::ensure_same_grid(f1, f2)?;
    let zero = Complex64::new(0.0, 0.0);
    if let Some(j) = f1
        .samples()
        .iter()
        .zip(f2.samples())
        .position(|(a, b)| *a != zero && *b != zero)
    {
        return Err(Error::SupportsOverlap(format!(
            "both functions are nonzero at grid index {j} (x = {})",
            f1.grid().point(j)
        )));
    }
    Ok(())
}
