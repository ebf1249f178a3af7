use num_complex::Complex64;
use proptest::prelude::*;

use mindet::generators::BumpSpec;
use mindet::grid::{distance, inner_product, integrate, Grid, GridFunction, Metric};
use mindet::operators::{evolve, OperatorSpec};
use mindet::stieltjes::{build_stieltjes_family, StieltjesFamilySpec};
use mindet::verify::{verify_family, FamilyKind};

fn small_grid() -> Grid {
    Grid::symmetric(4.0, 256).unwrap()
}

fn samples() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 256).prop_map(|v| {
        v.into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect()
    })
}

fn family(epsilons: Vec<f64>) -> mindet::stieltjes::StieltjesFamily {
    let spec = StieltjesFamilySpec {
        generator: BumpSpec::standard(0.0, 1.0),
        lambda: 2.5,
        phi: 0.0,
        epsilons,
        n_max: 6,
    };
    build_stieltjes_family(&spec, &Grid::symmetric(8.0, 4096).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn integral_is_linear(a in samples(), b in samples(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let g = small_grid();
        let f = GridFunction::new(g, a).unwrap();
        let h = GridFunction::new(g, b).unwrap();
        let combo = f.scaled(s.into()).add(&h.scaled(t.into())).unwrap();
        let lhs = integrate(&combo);
        let rhs = integrate(&f) * s + integrate(&h) * t;
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(a in samples(), b in samples()) {
        let g = small_grid();
        let f = GridFunction::new(g, a).unwrap();
        let h = GridFunction::new(g, b).unwrap();
        let fh = inner_product(&f, &h).unwrap();
        let hf = inner_product(&h, &f).unwrap();
        prop_assert!((fh - hf.conj()).norm() <= 1e-12 * (1.0 + fh.norm()));
        prop_assert!(inner_product(&f, &f).unwrap().im.abs() <= 1e-12);
    }

    #[test]
    fn flow_preserves_norm(k in -300isize..300, c in -0.5f64..0.5, power in 1u32..4) {
        let grid = Grid::symmetric(8.0, 2048).unwrap();
        let f = mindet::generators::make_bump(&BumpSpec::standard(0.0, 0.5), &grid).unwrap();
        let op = OperatorSpec::GaugedTranslation { c, power };
        let moved = evolve(&op, &f, k as f64 * grid.dx()).unwrap();
        prop_assert!((moved.norm_sq() - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn members_are_linear_in_epsilon(eps in -1.0f64..1.0) {
        let fam = family(vec![eps, 1.0]);
        let base = fam.base_density.base();
        let unit = fam.members[1].1.base().sub(base).unwrap();
        let expected = base.add(&unit.scaled(eps.into())).unwrap();
        let err = distance(fam.members[0].1.base(), &expected, Metric::Linf).unwrap();
        prop_assert!(err <= 1e-12 * unit.max_abs().max(1.0));
    }

    #[test]
    fn separation_grows_with_epsilon_spacing(a in 0.05f64..0.5, b in 0.05f64..0.5) {
        let (small, large) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(large - small > 1e-3);
        let near = family(vec![0.0, small]);
        let far = family(vec![0.0, large]);
        let members = |f: &mindet::stieltjes::StieltjesFamily| f.members.clone();
        let r_near = verify_family(FamilyKind::Stieltjes, &members(&near), 6, 1e-3).unwrap();
        let r_far = verify_family(FamilyKind::Stieltjes, &members(&far), 6, 1e-3).unwrap();
        prop_assert!(r_far.min_pairwise_l1 > r_near.min_pairwise_l1);
        let ratio = r_far.min_pairwise_l1 / r_near.min_pairwise_l1;
        prop_assert!((ratio - large / small).abs() <= 1e-8 * ratio);
        prop_assert!(r_near.verdict.confirmed(), "{:?}", r_near.verdict);
        prop_assert!(r_far.verdict.confirmed(), "{:?}", r_far.verdict);
    }
}
