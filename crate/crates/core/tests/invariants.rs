use approx::assert_relative_eq;
use czsob::czop::{boundary_gradient, grad_transform};
use czsob::geometry::{make_disk, make_polygon};
use czsob::poly::Factor;
use czsob::whitney::{dump_covering, load_covering};
use czsob::{
    beurling_kernel, build_covering, depth_verdict, long_distance, project, Cube, MultiIndex, Poly, PvSchedule, SeparableField,
    Verdict,
};
use proptest::prelude::*;

fn factor() -> impl Strategy<Value = Factor> {
    prop_oneof![
        Just(Factor::One),
        (0u32..5).prop_map(Factor::Pow),
        (0.1f64..4.0, -3.0f64..3.0).prop_map(|(freq, phase)| Factor::Sin { freq, phase }),
        (-2.0f64..2.0).prop_map(|rate| Factor::Exp { rate }),
    ]
}

fn field() -> impl Strategy<Value = SeparableField> {
    prop::collection::vec((-2.0f64..2.0, factor(), factor()), 1..4).prop_map(|terms| {
        terms.into_iter().fold(SeparableField::constant(2, 0.0), |acc, (c, a, b)| acc.plus(SeparableField::term(c, vec![a, b])))
    })
}

fn coeff_gap(a: &Poly, b: &Poly) -> f64 {
    a.coeffs
        .keys()
        .chain(b.coeffs.keys())
        .map(|g| (a.coeffs.get(g).copied().unwrap_or(0.0) - b.coeffs.get(g).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

fn size(p: &Poly) -> f64 {
    p.coeffs.values().map(|c| c.abs()).fold(1.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_linear(f in field(), g in field(), s in -3.0f64..3.0, t in -3.0f64..3.0,
                            cx in -1.0f64..1.0, cy in -1.0f64..1.0, k in 0i32..6, n in 1u32..5) {
        let side = (-(k as f64)).exp2();
        let c = vec![cx, cy];
        let lhs = project(&f.clone().scaled(s).plus(g.clone().scaled(t)), &c, side, n).unwrap();
        let pf = project(&f, &c, side, n).unwrap();
        let pg = project(&g, &c, side, n).unwrap();
        let rhs = pf.scale(s).add(&pg.scale(t));
        prop_assert!(coeff_gap(&lhs, &rhs) <= 1e-9 * size(&rhs));
    }

    #[test]
    fn projection_is_idempotent(f in field(), k in 0i32..6, n in 1u32..5) {
        let side = (-(k as f64)).exp2();
        let c = vec![0.3, -0.2];
        let p = project(&f, &c, side, n).unwrap();
        let pp = project(&p, &c, side, n).unwrap();
        prop_assert!(pp.degree().is_none_or(|d| d < n));
        prop_assert!(coeff_gap(&p, &pp) <= 1e-9 * size(&p));
    }

    #[test]
    fn poly_text_round_trips(cs in prop::collection::vec((0u32..4, 0u32..4, -10.0f64..10.0), 0..8), cx in -2.0f64..2.0) {
        let mut p = Poly::zero(vec![cx, 0.5]);
        for (a, b, c) in cs {
            *p.coeffs.entry(MultiIndex(vec![a, b])).or_insert(0.0) += c;
        }
        let q = Poly::from_text(&p.to_text()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn long_distance_is_symmetric(l1 in 0i32..6, l2 in 0i32..6, i in prop::collection::vec(-40i64..40, 4)) {
        let q = Cube::new(l1, vec![i[0], i[1]]);
        let s = Cube::new(l2, vec![i[2], i[3]]);
        let d = long_distance(&q, &s);
        prop_assert_eq!(d, long_distance(&s, &q));
        prop_assert!(d >= q.side() + s.side());
    }

    #[test]
    fn verdict_ignores_scale(v in prop::collection::vec(0.01f64..100.0, 2..5), t in 0.001f64..1000.0) {
        let scaled: Vec<f64> = v.iter().map(|x| x * t).collect();
        prop_assert_eq!(depth_verdict(&v), depth_verdict(&scaled));
    }
}

#[test]
fn doubling_sequences_fail_and_flat_ones_hold() {
    assert_eq!(depth_verdict(&[1.0, 2.0, 4.5]), Verdict::Fails);
    assert_eq!(depth_verdict(&[1.0, 1.1, 1.05]), Verdict::Holds);
    assert_eq!(depth_verdict(&[0.0, 0.0, 0.0]), Verdict::Holds);
    assert_eq!(depth_verdict(&[1.0, 1.5, 1.9]), Verdict::Inconclusive);
}

#[test]
fn covering_dump_round_trips() {
    for r in [0.5, 1.0, 1.7] {
        let disk = make_disk(r).unwrap();
        let mut cov = build_covering(&disk, 1.0 / 32.0, 1.0).unwrap();
        cov.orient().unwrap();
        let back = load_covering(&disk, &dump_covering(&cov)).unwrap();
        assert_eq!(back.cubes, cov.cubes);
        assert_eq!(dump_covering(&back), dump_covering(&cov));
    }
}

#[test]
fn corner_gradient_matches_principal_values() {
    let square = make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
    let one = Poly::constant(vec![0.0, 0.0], 1.0);
    let kernel = beurling_kernel();
    for r in [0.125, 0.03125] {
        let x = [r / 2f64.sqrt(), r / 2f64.sqrt()];
        let exact = boundary_gradient(&square, &one, x, 1).unwrap();
        let pv = grad_transform(&kernel, &square, &one, x, 1, &PvSchedule::default()).unwrap();
        for ((_, a), (_, b)) in exact.parts.iter().zip(&pv.parts) {
            assert_relative_eq!(a.re, b.re, max_relative = 1e-6, epsilon = 1e-9);
            assert_relative_eq!(a.im, b.im, max_relative = 1e-6, epsilon = 1e-9);
        }
    }
}
