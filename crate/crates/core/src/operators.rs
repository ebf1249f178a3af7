//! Self-adjoint operators `A`, their unitary flows `e^{iθA}`, operator
//! characteristic functions `⟨f, e^{iθA} f⟩`, and families built from
//! disjointly supported pairs `f₁ + e^{iβ} f₂`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::charfun::{
    check_inversion, density_from_amplitude, moments_from_density, shifted_correlation,
    MomentVector, MAX_QUADRATURE_ORDER,
};
use crate::error::{Error, Result};
use crate::fourier::spectral_derivative;
use crate::generators::{ensure_disjoint, make_disjoint_pair, DisjointPairSpec};
use crate::grid::{distance, inner_product, CharFn, DensityFunction, Grid, GridFunction, Metric};

/// Largest grid the dense eigendecomposition oracle accepts.
pub const ORACLE_CAP: usize = 2048;
/// Mass fraction a single operator application may place outside the input
/// support.
pub const LEAK_LIMIT: f64 = 1e-10;
/// Cross terms above this are logged.
pub const CROSS_WARN: f64 = 1e-10;
/// Cross terms above this are errors.
pub const CROSS_FAIL: f64 = 1e-8;
/// `|M_A|` allowed at the edge of the θ-grid before inversion.
pub const TRUNCATION_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `(1/i) d/dx`.
    Translation,
    /// `(1/i) d/dx + c (n+1) xⁿ`.
    GaugedTranslation {
        c: f64,
        #[serde(alias = "n")]
        power: u32,
    },
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OperatorSpec::Translation => Ok(()),
            OperatorSpec::GaugedTranslation { c, power } => {
                if !c.is_finite() {
                    return Err(Error::InvalidFamily(format!("c must be finite, got {c}")));
                }
                if power < 1 {
                    return Err(Error::InvalidFamily("power must be at least 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn potential(&self, x: f64) -> f64 {
        match *self {
            OperatorSpec::Translation => 0.0,
            OperatorSpec::GaugedTranslation { c, power } => {
                c * (power + 1) as f64 * x.powi(power as i32)
            }
        }
    }

    /// `g(x)` with `A = e^{-ig} (1/i)(d/dx) e^{ig}`.
    pub fn gauge(&self, x: f64) -> f64 {
        match *self {
            OperatorSpec::Translation => 0.0,
            OperatorSpec::GaugedTranslation { c, power } => c * x.powi(power as i32 + 1),
        }
    }

    /// Phase acquired along the flow from `x` to `x + θ`.
    pub fn flow_phase(&self, x: f64, theta: f64) -> Complex64 {
        match *self {
            OperatorSpec::Translation => Complex64::new(1.0, 0.0),
            OperatorSpec::GaugedTranslation { .. } => {
                Complex64::cis(self.gauge(x + theta) - self.gauge(x))
            }
        }
    }
}

/// `A f` with no projection.
fn raw_step(op: &OperatorSpec, f: &GridFunction) -> Result<GridFunction> {
    let df = spectral_derivative(f, 1)?;
    let grid = *f.grid();
    let samples = df
        .samples()
        .iter()
        .zip(f.samples())
        .enumerate()
        .map(|(j, (d, v))| Complex64::new(0.0, -1.0) * d + op.potential(grid.point(j)) * v)
        .collect();
    GridFunction::new(grid, samples)
}

/// `A f` restricted to the support of `mask`, with the fraction of mass
/// that fell outside it.
fn projected_step(
    op: &OperatorSpec,
    f: &GridFunction,
    mask: &[bool],
) -> Result<(GridFunction, f64)> {
    let raw = raw_step(op, f)?;
    let mut inside = 0.0;
    let mut outside = 0.0;
    let samples: Vec<Complex64> = raw
        .samples()
        .iter()
        .zip(mask)
        .map(|(z, &keep)| {
            if keep {
                inside += z.norm_sqr();
                *z
            } else {
                outside += z.norm_sqr();
                ZERO
            }
        })
        .collect();
    let total = inside + outside;
    let fraction = if total > 0.0 { outside / total } else { 0.0 };
    Ok((GridFunction::new(*f.grid(), samples)?, fraction))
}

/// `A f`, with the output confined to the support of `f`. Fails if more than
/// [`LEAK_LIMIT`] of the output mass had to be removed.
pub fn apply_operator(op: &OperatorSpec, f: &GridFunction) -> Result<GridFunction> {
    op.validate()?;
    let (out, fraction) = projected_step(op, f, &f.support_mask())?;
    if fraction > LEAK_LIMIT {
        return Err(Error::SupportLeak {
            fraction,
            limit: LEAK_LIMIT,
        });
    }
    Ok(out)
}

/// `Aᵏ f` for `k = 0..=n`, each confined to the support of `f`, with the
/// largest per-step leaked fraction.
pub fn apply_powers(
    op: &OperatorSpec,
    f: &GridFunction,
    n: usize,
) -> Result<(Vec<GridFunction>, f64)> {
    if n > MAX_QUADRATURE_ORDER {
        return Err(Error::OrderTooHigh {
            requested: n,
            cap: MAX_QUADRATURE_ORDER,
        });
    }
    op.validate()?;
    let mask = f.support_mask();
    let mut powers = Vec::with_capacity(n + 1);
    powers.push(f.clone());
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (next, fraction) = projected_step(op, powers.last().expect("nonempty"), &mask)?;
        if fraction > LEAK_LIMIT {
            log::debug!("operator power step leaked {fraction:e} of its mass");
        }
        worst = worst.max(fraction);
        powers.push(next);
    }
    Ok((powers, worst))
}

/// `Aⁿ f`.
pub fn apply_power(op: &OperatorSpec, f: &GridFunction, n: usize) -> Result<GridFunction> {
    let (mut powers, _) = apply_powers(op, f, n)?;
    Ok(powers.pop().expect("nonempty"))
}

/// `e^{iθA} f`: a translation by θ cells composed with the gauge phase.
pub fn evolve(op: &OperatorSpec, f: &GridFunction, theta: f64) -> Result<GridFunction> {
    op.validate()?;
    let grid = *f.grid();
    let shift = grid.cells_in(theta).ok_or(Error::ThetaOffGrid {
        theta,
        dx: grid.dx(),
    })?;
    let n = grid.len() as isize;
    if let Some((lo, hi)) = f.support_indices() {
        let (lo, hi) = (lo as isize - shift, hi as isize - shift);
        if lo < 0 || hi >= n {
            return Err(Error::FlowLeavesGrid { theta });
        }
    }
    let source = f.samples();
    let samples = (0..n)
        .map(|j| {
            let from = j + shift;
            if from < 0 || from >= n {
                return ZERO;
            }
            let v = source[from as usize];
            if v == ZERO {
                ZERO
            } else {
                v * op.flow_phase(grid.point(j as usize), theta)
            }
        })
        .collect();
    GridFunction::new(grid, samples)
}

/// `e^{iθA}` from the eigendecomposition of a dense discretization of `A`
/// (spectral differentiation matrix plus diagonal potential).
pub struct FlowOracle {
    grid: Grid,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl FlowOracle {
    pub fn new(op: &OperatorSpec, grid: &Grid) -> Result<Self> {
        op.validate()?;
        let n = grid.len();
        if n > ORACLE_CAP {
            return Err(Error::GridTooLarge { n, cap: ORACLE_CAP });
        }
        // First column of the circulant matrix with symbol k.
        let mut column: Vec<Complex64> = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex64::new(k, 0.0))
            .collect();
        FftPlanner::<f64>::new()
            .plan_fft_inverse(n)
            .process(&mut column);
        let inv_n = 1.0 / n as f64;
        let matrix = DMatrix::from_fn(n, n, |j, l| {
            let mut entry = column[(j + n - l) % n] * inv_n;
            if j == l {
                entry += op.potential(grid.point(j));
            }
            entry
        });
        let eigen = matrix.symmetric_eigen();
        Ok(Self {
            grid: *grid,
            eigenvalues: eigen.eigenvalues,
            eigenvectors: eigen.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn evolve(&self, f: &GridFunction, theta: f64) -> Result<GridFunction> {
        if !f.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch(format!(
                "oracle built for {:?}, function on {:?}",
                self.grid,
                f.grid()
            )));
        }
        let v = DVector::from_column_slice(f.samples());
        let mut coefficients = self.eigenvectors.ad_mul(&v);
        for (c, r) in coefficients.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= Complex64::cis(theta * r);
        }
        let out = &self.eigenvectors * coefficients;
        GridFunction::new(self.grid, out.iter().copied().collect())
    }

    /// `max |U†U − I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let gram = self.eigenvectors.ad_mul(&self.eigenvectors);
        let mut worst = 0.0f64;
        for ((j, l), z) in gram
            .iter()
            .enumerate()
            .map(|(idx, z)| ((idx % gram.nrows(), idx / gram.nrows()), z))
        {
            let target = if j == l { 1.0 } else { 0.0 };
            worst = worst.max((z - target).norm());
        }
        worst
    }
}

pub fn evolve_oracle(op: &OperatorSpec, f: &GridFunction, theta: f64) -> Result<GridFunction> {
    FlowOracle::new(op, f.grid())?.evolve(f, theta)
}

/// `⟨f, e^{iθA} g⟩` for every θ on `theta_grid`.
fn flow_correlation(
    op: &OperatorSpec,
    f: &GridFunction,
    g: &GridFunction,
    theta_grid: &Grid,
) -> Result<GridFunction> {
    op.validate()?;
    match op {
        OperatorSpec::Translation => {
            shifted_correlation(f, g, theta_grid, |_, _| Complex64::new(1.0, 0.0))
        }
        OperatorSpec::GaugedTranslation { .. } => {
            shifted_correlation(f, g, theta_grid, |x, theta| op.flow_phase(x, theta))
        }
    }
}

/// `M_A(θ) = ⟨f, e^{iθA} f⟩`.
pub fn operator_charfun(op: &OperatorSpec, f: &GridFunction, theta_grid: &Grid) -> Result<CharFn> {
    CharFn::new(flow_correlation(op, f, f, theta_grid)?)
}

/// The four flow correlations `M_lm(θ) = ⟨f_l, e^{iθA} f_m⟩` of a pair.
#[derive(Debug, Clone)]
pub struct CrossComponents {
    pub m11: GridFunction,
    pub m22: GridFunction,
    pub m12: GridFunction,
    pub m21: GridFunction,
}

impl CrossComponents {
    pub fn new(
        op: &OperatorSpec,
        f1: &GridFunction,
        f2: &GridFunction,
        theta_grid: &Grid,
    ) -> Result<Self> {
        ensure_disjoint(f1, f2)?;
        Ok(Self {
            m11: flow_correlation(op, f1, f1, theta_grid)?,
            m22: flow_correlation(op, f2, f2, theta_grid)?,
            m12: flow_correlation(op, f1, f2, theta_grid)?,
            m21: flow_correlation(op, f2, f1, theta_grid)?,
        })
    }

    /// `M₁₁ + M₂₂ + e^{iβ} M₁₂ + e^{−iβ} M₂₁`.
    pub fn assemble(&self, beta: f64) -> Result<CharFn> {
        let forward = Complex64::cis(beta);
        let backward = forward.conj();
        let samples = self
            .m11
            .samples()
            .iter()
            .zip(self.m22.samples())
            .zip(self.m12.samples().iter().zip(self.m21.samples()))
            .map(|((a, b), (c, d))| a + b + forward * c + backward * d)
            .collect();
        CharFn::new(GridFunction::new(*self.m11.grid(), samples)?)
    }
}

/// Components of the pair together with the assembled `M_A` at `beta`.
pub fn cross_charfun_components(
    op: &OperatorSpec,
    f1: &GridFunction,
    f2: &GridFunction,
    beta: f64,
    theta_grid: &Grid,
) -> Result<(CrossComponents, CharFn)> {
    let components = CrossComponents::new(op, f1, f2, theta_grid)?;
    let total = components.assemble(beta)?;
    Ok((components, total))
}

/// All bilinear terms `⟨f_l, Aᵏ f_m⟩` for `k = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTerms {
    pub t11: Vec<Complex64>,
    pub t22: Vec<Complex64>,
    pub t12: Vec<Complex64>,
    pub t21: Vec<Complex64>,
    /// Largest fraction of mass removed by support projection in any step.
    pub max_leak: f64,
}

impl MomentTerms {
    pub fn max_cross(&self) -> f64 {
        self.t12
            .iter()
            .chain(&self.t21)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

pub fn operator_moment_terms(
    op: &OperatorSpec,
    f1: &GridFunction,
    f2: &GridFunction,
    n_max: usize,
) -> Result<MomentTerms> {
    ensure_disjoint(f1, f2)?;
    let (p1, leak1) = apply_powers(op, f1, n_max)?;
    let (p2, leak2) = apply_powers(op, f2, n_max)?;
    let terms = |f: &GridFunction, powers: &[GridFunction]| {
        powers
            .iter()
            .map(|p| inner_product(f, p))
            .collect::<Result<Vec<_>>>()
    };
    Ok(MomentTerms {
        t11: terms(f1, &p1)?,
        t22: terms(f2, &p2)?,
        t12: terms(f1, &p2)?,
        t21: terms(f2, &p1)?,
        max_leak: leak1.max(leak2),
    })
}

/// `E[Aⁿ] = ⟨f₁, Aⁿ f₁⟩ + ⟨f₂, Aⁿ f₂⟩` in the state `f₁ + e^{iβ} f₂`,
/// after checking that every cross term vanishes.
pub fn operator_moments(
    op: &OperatorSpec,
    f1: &GridFunction,
    f2: &GridFunction,
    beta: f64,
    n_max: usize,
) -> Result<MomentVector> {
    let top = n_max.max(2);
    let terms = operator_moment_terms(op, f1, f2, top)?;
    let forward = Complex64::cis(beta);
    let mut values = Vec::with_capacity(top + 1);
    for k in 0..=top {
        for (l, m, z) in [(1, 2, terms.t12[k]), (2, 1, terms.t21[k])] {
            let magnitude = z.norm();
            if magnitude > CROSS_FAIL {
                return Err(Error::CrossTermLeak {
                    l,
                    m,
                    order: k,
                    magnitude,
                    limit: CROSS_FAIL,
                });
            }
            if magnitude > CROSS_WARN {
                log::warn!("cross term <f{l}, A^{k} f{m}> = {magnitude:e}");
            }
        }
        let cross = forward * terms.t12[k] + forward.conj() * terms.t21[k];
        values.push((terms.t11[k] + terms.t22[k] + cross).re);
    }
    let sigma_ref = (values[2] - values[1] * values[1]).max(0.0).sqrt();
    values.truncate(n_max + 1);
    Ok(MomentVector { values, sigma_ref })
}

/// `|⟨Af, g⟩ − ⟨f, Ag⟩|` with the unprojected discrete operator.
pub fn check_self_adjoint(op: &OperatorSpec, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    op.validate()?;
    let af = raw_step(op, f)?;
    let ag = raw_step(op, g)?;
    Ok((inner_product(&af, g)? - inner_product(f, &ag)?).norm())
}

/// Density of `A` in the state `f` from its eigenfunctions
/// `u_r(x) ∝ e^{i(rx − g(x))}`: `|FT(f e^{ig})(r)|²`.
pub fn eigenbasis_density(
    op: &OperatorSpec,
    f: &GridFunction,
    r_grid: &Grid,
) -> Result<DensityFunction> {
    op.validate()?;
    let gauged = f.map(|x, z| z * Complex64::cis(op.gauge(x)))?;
    density_from_amplitude(&gauged, r_grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFamilySpec {
    pub pair: DisjointPairSpec,
    pub betas: Vec<f64>,
    pub operator: OperatorSpec,
    pub n_max: usize,
    /// Grid for both `x` and θ.
    pub theta_grid: Grid,
    pub r_grid: Grid,
}

impl OperatorFamilySpec {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        self.pair.validate(&self.theta_grid)?;
        if self.betas.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if let Some(b) = self.betas.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidFamily(format!(
                "beta must be finite, got {b}"
            )));
        }
        if self.n_max > MAX_QUADRATURE_ORDER {
            return Err(Error::OrderTooHigh {
                requested: self.n_max,
                cap: MAX_QUADRATURE_ORDER,
            });
        }
        let (a_lo, a_hi) = self.pair.left.support();
        let (b_lo, b_hi) = self.pair.right.support();
        let reach = (b_hi - a_lo).abs().max((a_hi - b_lo).abs());
        if reach >= self.theta_grid.x_max().min(-self.theta_grid.x_min()) {
            return Err(Error::InvalidFamily(format!(
                "theta grid {:?} does not span the pair's reach {reach}",
                self.theta_grid
            )));
        }
        if !self.theta_grid.is_reciprocal_to(&self.r_grid) {
            return Err(Error::GridIncompatible(
                "r grid is not reciprocal to the theta grid".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OperatorMember {
    pub beta: f64,
    pub charfun: CharFn,
    /// `|FT(e^{ig} f)|²`, checked against the inverse transform of `charfun`.
    pub density: DensityFunction,
    /// Moments from `⟨f, Aⁿ f⟩`.
    pub operator_moments: MomentVector,
    /// Moments by quadrature of the inverted density.
    pub density_moments: MomentVector,
}

#[derive(Debug, Clone)]
pub struct OperatorFamily {
    pub members: Vec<OperatorMember>,
    pub cross_components: CrossComponents,
    pub terms: MomentTerms,
    pub f1: GridFunction,
    pub f2: GridFunction,
}

impl OperatorFamily {
    /// Smallest L∞ distance between two members' characteristic functions.
    pub fn min_pairwise_charfun_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.members.iter().enumerate() {
            for b in &self.members[i + 1..] {
                if let Ok(d) = distance(a.charfun.base(), b.charfun.base(), Metric::Linf) {
                    best = best.min(d);
                }
            }
        }
        best
    }
}

pub fn build_operator_family(spec: &OperatorFamilySpec) -> Result<OperatorFamily> {
    spec.validate()?;
    let op = &spec.operator;
    let (f1, f2) = make_disjoint_pair(&spec.pair, &spec.theta_grid)?;
    let components = CrossComponents::new(op, &f1, &f2, &spec.theta_grid)?;
    let terms = operator_moment_terms(op, &f1, &f2, spec.n_max.max(2))?;
    let mut members = Vec::with_capacity(spec.betas.len());
    for &beta in &spec.betas {
        let charfun = components.assemble(beta)?;
        let base = charfun.base();
        let edge = base.value(0).norm().max(base.value(base.len() - 1).norm());
        if edge > TRUNCATION_TOL {
            return Err(Error::TruncatedCharFn { edge });
        }
        let state = f1.add(&f2.scaled(Complex64::cis(beta)))?;
        let density = eigenbasis_density(op, &state, &spec.r_grid)?;
        check_inversion(&charfun, &density)?;
        let density_moments = moments_from_density(&density, spec.n_max)?;
        let operator_moments = operator_moments(op, &f1, &f2, beta, spec.n_max)?;
        members.push(OperatorMember {
            beta,
            charfun,
            density,
            operator_moments,
            density_moments,
        });
    }
    Ok(OperatorFamily {
        members,
        cross_components: components,
        terms,
        f1,
        f2,
    })
}
