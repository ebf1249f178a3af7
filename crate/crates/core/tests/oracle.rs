//! Values frozen from an adaptive Simpson integration of the closed-form
//! bump, checked against the grid pipeline.

use approx::assert_relative_eq;
use mindet::charfun::moments_from_density;
use mindet::generators::{bump_normalization, BumpSpec};
use mindet::grid::Grid;
use mindet::stieltjes::base_pair;

/// `∫ exp(-2/(1-u²)) du` over `(-1, 1)`.
const BUMP_ENERGY: f64 = 0.13308612084499427;
/// Second and fourth moments of `|F|²` for the unit-width bump.
const BASE_M2: f64 = 3.0776091312317773;
const BASE_M4: f64 = 81.40794654325795;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

// f' = f g and f'' = f (g² + g') with g = -2u/(1-u²)².
fn log_slope(u: f64) -> (f64, f64) {
    let s = 1.0 - u * u;
    let g = -2.0 * u / (s * s);
    let dg = -2.0 / (s * s) - 8.0 * u * u / (s * s * s);
    (g, dg)
}

fn energy() -> f64 {
    simpson(&|u| bump(u).powi(2), -1.0, 1.0, 1e-14)
}

#[test]
fn simpson_reproduces_frozen_constants() {
    let e = energy();
    assert_relative_eq!(e, BUMP_ENERGY, max_relative = 1e-12);
    let m2 = simpson(
        &|u| {
            let f = bump(u);
            if f == 0.0 {
                return 0.0;
            }
            (f * log_slope(u).0).powi(2)
        },
        -1.0,
        1.0,
        1e-12,
    ) / e;
    let m4 = simpson(
        &|u| {
            let f = bump(u);
            if f == 0.0 {
                return 0.0;
            }
            let (g, dg) = log_slope(u);
            (f * (g * g + dg)).powi(2)
        },
        -1.0,
        1.0,
        1e-10,
    ) / e;
    assert_relative_eq!(m2, BASE_M2, max_relative = 1e-10);
    assert_relative_eq!(m4, BASE_M4, max_relative = 1e-10);
}

#[test]
fn grid_normalization_matches_closed_form() {
    let grid = Grid::symmetric(8.0, 4096).unwrap();
    let c = bump_normalization(&BumpSpec::standard(0.0, 1.0), &grid).unwrap();
    assert_relative_eq!(c, BUMP_ENERGY.sqrt().recip(), max_relative = 1e-12);
}

#[test]
fn base_density_moments_match_closed_form() {
    let grid = Grid::symmetric(8.0, 4096).unwrap();
    let (_, p0) = base_pair(&BumpSpec::standard(0.0, 1.0), &grid).unwrap();
    let m = moments_from_density(&p0, 4).unwrap();
    assert_relative_eq!(m.get(0), 1.0, max_relative = 1e-12);
    assert!(m.get(1).abs() < 1e-12);
    assert!(m.get(3).abs() < 1e-10);
    assert_relative_eq!(m.get(2), BASE_M2, max_relative = 1e-9);
    assert_relative_eq!(m.get(4), BASE_M4, max_relative = 1e-8);
}
