use std::f64::consts::PI;

use paramsym::calculus::leibniz_expr;
use paramsym::infinity::{expand_bracket_power, polynomial_degrees};
use paramsym::oracle::{circle_resolvent_trace, eigensum_trace, fit_asymptotics, BasisTerm};
use paramsym::semisphere::{extend_homogeneous, restrict_to_semisphere};
use paramsym::symbol::{check_homogeneity, differentiate, Atom, Compiled, Domain, Expr, HomogeneityMode, Point, TrigKind, Var, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 2;

fn factor() -> impl Strategy<Value = Expr> {
    let half = prop_oneof![Just(-2.0), Just(-1.5), Just(-1.0), Just(-0.5), Just(0.5), Just(1.0), Just(2.0)];
    prop_oneof![
        (0..DIM as u8, 1..4i32).prop_map(|(i, k)| Expr::atom_pow(Atom::Xi(i), k as f64)),
        half.clone().prop_map(|p| Expr::atom_pow(Atom::AbsXi, p)),
        half.clone().prop_map(|p| Expr::atom_pow(Atom::Norm, p)),
        half.clone().prop_map(|p| Expr::atom_pow(Atom::JapXi, p)),
        half.prop_map(|p| Expr::atom_pow(Atom::JapXiMu, p)),
        (1..3i32).prop_map(|k| Expr::atom_pow(Atom::Mu, k as f64)),
        (0..DIM as u8, 1..3u32, any::<bool>()).prop_map(|(axis, freq, s)| Expr::atom(Atom::Trig {
            axis,
            freq,
            kind: if s { TrigKind::Sin } else { TrigKind::Cos }
        })),
        Just(Expr::atom(Atom::chi(1.0))),
        Just(Expr::atom(Atom::chi_joint())),
        Just(Expr::atom(Atom::bracket())),
        (0.5..2.0f64).prop_map(|c| Expr::atom_pow(Atom::Mu, 2.0)
            .add(&Expr::atom_pow(Atom::Xi(0), 2.0))
            .add(&Expr::real(c))
            .pow_int(-1)
            .unwrap()),
    ]
}

fn expression() -> impl Strategy<Value = Expr> {
    let term = (prop::collection::vec(factor(), 1..4), -3.0..3.0f64)
        .prop_map(|(fs, c)| fs.iter().fold(Expr::real(c), |acc, f| acc.mul(f)));
    prop::collection::vec(term, 1..4).prop_map(|ts| Expr::sum(ts.iter()))
}

fn variable() -> impl Strategy<Value = Var> {
    prop_oneof![(0..DIM as u8).prop_map(Var::Xi), (0..DIM as u8).prop_map(Var::X), Just(Var::Mu)]
}

fn regular_point(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, f64) {
    let x = (0..DIM).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let xi = (0..DIM).map(|_| rng.gen_range(0.3..3.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    (x, xi, rng.gen_range(0.3..3.0))
}

/// Five-point central difference of `c` along `v`, Richardson-extrapolated in the step.
fn finite_difference(c: &Compiled, v: Var, x: &[f64], xi: &[f64], mu: f64) -> C64 {
    let d1 = stencil(c, v, x, xi, mu, 4e-4);
    let d2 = stencil(c, v, x, xi, mu, 2e-4);
    (d2 * 16.0 - d1) / 15.0
}

fn stencil(c: &Compiled, v: Var, x: &[f64], xi: &[f64], mu: f64, h: f64) -> C64 {
    let at = |t: f64| {
        let (mut x, mut xi, mut mu) = (x.to_vec(), xi.to_vec(), mu);
        match v {
            Var::X(i) => x[i as usize] += t,
            Var::Xi(i) => xi[i as usize] += t,
            Var::Mu => mu += t,
            Var::R => unreachable!(),
        }
        c.eval(&Point::symbol(&x, &xi, mu)).unwrap()
    };
    (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_matches_finite_differences(e in expression(), v in variable(), seed in any::<u64>()) {
        let d = differentiate(&e, v, Domain::Punctured).unwrap();
        let (ce, cd) = (Compiled::new(&e), Compiled::new(&d));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let (x, xi, mu) = regular_point(&mut rng);
            let exact = cd.eval(&Point::symbol(&x, &xi, mu)).unwrap();
            let fd = finite_difference(&ce, v, &x, &xi, mu);
            let scale = exact.norm().max(ce.eval(&Point::symbol(&x, &xi, mu)).unwrap().norm());
            prop_assert!((exact - fd).norm() <= 1e-6 * scale + 1e-12, "{e} d/d{v:?}: {exact} vs {fd}");
        }
    }

    #[test]
    fn operations_leave_inputs_untouched(e in expression(), v in variable()) {
        let before = e.clone();
        let d1 = differentiate(&e, v, Domain::Punctured).unwrap();
        let d2 = differentiate(&e, v, Domain::Punctured).unwrap();
        prop_assert_eq!(&e, &before);
        prop_assert_eq!(d1, d2);
        let l1 = leibniz_expr(&e, &e, DIM, 2).unwrap();
        prop_assert_eq!(l1, leibniz_expr(&e, &e, DIM, 2).unwrap());
        prop_assert_eq!(&e, &before);
    }

    #[test]
    fn unit_is_neutral_for_leibniz(e in expression(), n in 1..4usize) {
        prop_assert_eq!(leibniz_expr(&e, &Expr::one(), DIM, n).unwrap(), e.clone());
        prop_assert_eq!(leibniz_expr(&Expr::one(), &e, DIM, n).unwrap(), e);
    }

    #[test]
    fn homogeneous_round_trip(
        dim in 1..=3usize,
        k in 0..3u32,
        p in prop_oneof![Just(-2.0), Just(-1.0), Just(-0.5), Just(0.0), Just(0.5), Just(1.0)],
        q in prop_oneof![Just(-3.0), Just(-2.0), Just(-1.5), Just(-1.0), Just(0.0)],
        m in 0..3i32,
        seed in any::<u64>(),
    ) {
        // xi_last^k |xi|^p |xi,mu|^q (mu / |xi,mu|)^m
        let last = (dim - 1) as u8;
        let a = Expr::atom_pow(Atom::Xi(last), k as f64)
            .mul(&Expr::atom_pow(Atom::AbsXi, p))
            .mul(&Expr::atom_pow(Atom::Norm, q - m as f64))
            .mul(&Expr::atom_pow(Atom::Mu, m as f64));
        let degree = k as f64 + p + q;
        let f = restrict_to_semisphere(&a, dim, degree, k as f64 + p).unwrap();
        let back = Compiled::new(&extend_homogeneous(&f, degree).unwrap());
        let orig = Compiled::new(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let xi: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..4.0)).collect();
            let pt = Point::symbol(&vec![0.0; dim], &xi, rng.gen_range(0.0..4.0));
            let (u, w) = (orig.eval(&pt).unwrap(), back.eval(&pt).unwrap());
            prop_assert!((u - w).norm() <= 1e-12 * u.norm().max(1.0));
        }
        let d = differentiate(&a, Var::Xi(0), Domain::Punctured).unwrap();
        if !d.is_zero() {
            prop_assert!(check_homogeneity(&d, dim, degree - 1.0, HomogeneityMode::Joint).unwrap().passed);
        }
    }

    #[test]
    fn bracket_coefficients_have_exact_degree(m in -10i32..=0, j in 0..9usize, dim in 1..=3usize) {
        let e = expand_bracket_power(m as f64 / 2.0, j + 1, dim).unwrap();
        let c = &e.coeffs[j];
        if !c.is_zero() {
            prop_assert_eq!(polynomial_degrees(c), Some(vec![j as u32]));
        }
        prop_assert_eq!(&e.coeffs[0], &Expr::one());
    }

    #[test]
    fn fit_recovers_power_and_log(a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let mus = paramsym::numeric::log_grid(10.0, 1e3, 6);
        let ys: Vec<f64> = mus.iter().map(|m| a * m.powi(-1) + b * m.powi(-2) * m.ln()).collect();
        let f = fit_asymptotics(&mus, &ys, &[BasisTerm::power(-1.0), BasisTerm::log_power(-2.0)]).unwrap();
        prop_assert!((f.coefficients[0] - a).abs() <= 1e-8 * (1.0 + a.abs()));
        prop_assert!((f.coefficients[1] - b).abs() <= 1e-8 * (1.0 + b.abs()));
        prop_assert!(!f.ill_conditioned);
    }

    #[test]
    fn circle_eigensum_is_closed_form(mu in 0.5..30.0f64) {
        let lap = Expr::atom_pow(Atom::Xi(0), 2.0).neg();
        let r = eigensum_trace(&lap, &Expr::one(), 1, C64::new(mu * mu, 0.0), 1, 1e-12).unwrap();
        let want = circle_resolvent_trace(mu);
        prop_assert!((r.trace.re - want).abs() <= 1e-9 * want);
    }
}
