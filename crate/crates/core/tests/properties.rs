use hamindex::expr::{parse_expression, BinOp, Bindings, Expr, Func, Var};
use hamindex::families;
use hamindex::integrator::{real_monodromy, symplectic_residual_real, IntegratorOptions};
use hamindex::model::{CoefficientFamily, ParamPoint, ParameterPath};
use hamindex::monodromy::{monodromy_index, MonodromyOptions};
use hamindex::spectral::{assemble, assemble_complex, spectral_flow_path, FlowOptions, FourierTruncation, OperatorKind, Subspace};
use hamindex::sturm::{homogeneous_index, isolated_zero_check, oracle_winding, Arithmetic, Convention, HomogeneousPair};
use hamindex::symplectic::{conley_zehnder_interval, CzOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..10.0).prop_map(Expr::num),
        (-10.0f64..0.0).prop_map(Expr::num),
        Just(Expr::var(Var::T)),
        Just(Expr::var(Var::Lambda)),
        Just(Expr::var(Var::Lambda2)),
        Just(Expr::var(Var::Pi)),
    ]
}

fn expression() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)])
                .prop_map(|(l, r, op)| Expr::binary(op, l, r)),
            (inner.clone(), 0u32..4).prop_map(|(b, k)| Expr::binary(BinOp::Pow, b, Expr::num(k as f64))),
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (inner, prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Tanh)]).prop_map(|(e, f)| Expr::call(f, e)),
        ]
    })
}

fn same_value(a: Result<f64, impl std::fmt::Debug>, b: Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x == y || (x.is_nan() && y.is_nan()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Printing is a fixed point of parse ∘ print, and reparsing preserves values.
    #[test]
    fn expression_print_parse_roundtrip(e in expression(), t in -3.0f64..3.0, l in -2.0f64..2.0) {
        let printed = e.to_string();
        let reparsed = parse_expression(&printed).unwrap();
        prop_assert_eq!(reparsed.to_string(), printed.clone());
        let b = Bindings::new(t, [l, 0.5 * l]);
        prop_assert!(same_value(e.eval(&b), reparsed.eval(&b)), "{}", printed);
    }
}

/// Integers strictly between `a` and `b`; for `S = λI₂` each contributes a
/// crossing of multiplicity two with positive form.
fn rotation_oracle(a: f64, b: f64) -> i64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let count = (lo.ceil() as i64..=hi.floor() as i64).filter(|k| (*k as f64) > lo && (*k as f64) < hi).count() as i64;
    if a < b {
        2 * count
    } else {
        -2 * count
    }
}

/// Parameters at least 0.05 away from the integers.
fn regular_lambda() -> impl Strategy<Value = f64> {
    (0i32..3, 0.05f64..0.95).prop_map(|(k, f)| k as f64 + f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rotation_indices_match_integer_count(a in regular_lambda(), b in regular_lambda()) {
        prop_assume!((a - b).abs() > 0.05);
        let fam = families::rotation(1);
        let expected = rotation_oracle(a, b);
        let w = monodromy_index(&fam, a, b, &MonodromyOptions::default()).unwrap().index;
        prop_assert_eq!(w, expected);
        let cz = conley_zehnder_interval(&fam, a, b, &CzOptions::default()).unwrap().index;
        prop_assert_eq!(cz, expected);
        let path = ParameterPath::interval(a, b).unwrap();
        for kind in [OperatorKind::A, OperatorKind::L] {
            let sfl = spectral_flow_path(kind, &fam, &path, 12, &FlowOptions::default()).unwrap().value;
            prop_assert_eq!(sfl, expected);
        }
    }

    /// Reversal negates, concatenation adds.
    #[test]
    fn winding_reversal_and_additivity(a in regular_lambda(), b in regular_lambda(), c in regular_lambda()) {
        prop_assume!((a - b).abs() > 0.05 && (b - c).abs() > 0.05 && (a - c).abs() > 0.05);
        let fam = families::perturbed_rotation();
        let opts = MonodromyOptions::default();
        let idx = |x: f64, y: f64| monodromy_index(&fam, x, y, &opts).map(|r| r.index);
        let (Ok(ab), Ok(ba), Ok(bc), Ok(ac)) = (idx(a, b), idx(b, a), idx(b, c), idx(a, c)) else {
            // an endpoint landed on a split crossing of the perturbed family
            return Ok(());
        };
        prop_assert_eq!(ab, -ba);
        prop_assert_eq!(ab + bc, ac);
    }

    #[test]
    fn cz_reversal_and_additivity(a in regular_lambda(), b in regular_lambda(), c in regular_lambda()) {
        prop_assume!((a - b).abs() > 0.05 && (b - c).abs() > 0.05 && (a - c).abs() > 0.05);
        let fam = families::perturbed_rotation();
        let opts = CzOptions::default();
        let idx = |x: f64, y: f64| conley_zehnder_interval(&fam, x, y, &opts).map(|r| r.index);
        let (Ok(ab), Ok(ba), Ok(bc), Ok(ac)) = (idx(a, b), idx(b, a), idx(b, c), idx(a, c)) else {
            return Ok(());
        };
        prop_assert_eq!(ab, -ba);
        prop_assert_eq!(ab + bc, ac);
    }

    /// The monodromy of a random Hamiltonian family is symplectic.
    #[test]
    fn monodromy_is_symplectic(seed in 0u64..10_000, n in 1usize..3, lambda in -1.0f64..1.0) {
        let fam = families::seeded_family(seed, n);
        let m = real_monodromy(&fam, ParamPoint::one(lambda), &IntegratorOptions::default()).unwrap().monodromy;
        let scale = m.amax().powi(2).max(1.0);
        prop_assert!(symplectic_residual_real(&m) <= 1e-8 * scale);
    }

    /// Real and exponential-basis assemblies are symmetric with equal spectra.
    #[test]
    fn assemblies_agree(seed in 0u64..10_000, n in 1usize..3, lambda in -1.0f64..2.0, modes in 1usize..5) {
        let fam = families::seeded_family(seed, n);
        let p = ParamPoint::one(lambda);
        for kind in [OperatorKind::A, OperatorKind::L] {
            let real = assemble(kind, &fam, p, modes).unwrap();
            let cplx = assemble_complex(kind, &fam, p, modes).unwrap();
            prop_assert!(real.asymmetry() < 1e-10);
            prop_assert!(cplx.hermitian_defect() < 1e-10);
            let (x, y) = (real.eigenvalues(), cplx.eigenvalues());
            prop_assert_eq!(x.len(), y.len());
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()), "{} vs {}", u, v);
            }
        }
    }
}

/// Gram-weighted inner product of two coordinate columns.
fn gram_dot(g: &nalgebra::DVector<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    x.transpose() * DMatrix::from_diagonal(g) * y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `E₊ ⊕ E₋ ⊕ E₀` is a Gram-orthogonal splitting of the truncated space on
    /// which the free operator is positive, negative and zero.
    #[test]
    fn subspace_splitting(n in 1usize..3, modes in 1usize..6) {
        let tr = FourierTruncation::new(n, modes).unwrap();
        let g = tr.gram(OperatorKind::A);
        let (plus, minus, zero) = (tr.subspace(Subspace::Plus), tr.subspace(Subspace::Minus), tr.subspace(Subspace::Zero));
        prop_assert_eq!(plus.ncols() + minus.ncols() + zero.ncols(), tr.dim());
        prop_assert!(gram_dot(&g, &plus, &minus).amax() < 1e-12);
        prop_assert!(gram_dot(&g, &plus, &zero).amax() < 1e-12);
        prop_assert!(gram_dot(&g, &minus, &zero).amax() < 1e-12);
        let free = CoefficientFamily::scalar(n, 1, "0").unwrap();
        let b = assemble(OperatorKind::A, &free, ParamPoint::one(0.0), modes).unwrap().stiffness;
        let on = |e: &DMatrix<f64>| (e.transpose() * &b * e).symmetric_eigenvalues();
        prop_assert!(on(&plus).iter().all(|v| *v > 0.5));
        prop_assert!(on(&minus).iter().all(|v| *v < -0.5));
        prop_assert!(on(&zero).iter().all(|v| v.abs() < 1e-12));
    }

    /// The free pencil spectrum is `{0, ±1, …, ±N}` in `L²` and `{0, ±1}` in
    /// `H^{1/2}`, each with multiplicity `2n`.
    #[test]
    fn free_spectrum(n in 1usize..3, modes in 1usize..6) {
        let free = CoefficientFamily::scalar(n, 1, "0").unwrap();
        let d = 2 * n;
        let mut expect_a: Vec<f64> = (0..d).map(|_| 0.0).collect();
        let mut expect_l = expect_a.clone();
        for k in 1..=modes {
            for _ in 0..d {
                expect_a.extend([k as f64, -(k as f64)]);
                expect_l.extend([1.0, -1.0]);
            }
        }
        for (kind, mut expect) in [(OperatorKind::A, expect_a), (OperatorKind::L, expect_l)] {
            expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got = assemble(kind, &free, ParamPoint::one(0.0), modes).unwrap().eigenvalues();
            for (x, y) in got.iter().zip(&expect) {
                prop_assert!((x - y).abs() < 1e-10, "{:?} vs {:?}", got, expect);
            }
        }
    }
}

fn small_poly(max_degree: usize) -> impl Strategy<Value = Vec<f64>> {
    (0..=max_degree).prop_flat_map(|deg| proptest::collection::vec(-3i32..=3, deg + 1)).prop_map(|c| c.into_iter().map(f64::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Whenever the Sturm formula applies, it equals the winding of
    /// `P + iQ` on the unit circle. Odd `m + n` gives zero.
    #[test]
    fn sturm_formula_matches_winding(p in small_poly(4), q in small_poly(4)) {
        prop_assume!(p.iter().any(|c| *c != 0.0));
        let Ok(pair) = HomogeneousPair::new(p, q) else { return Ok(()); };
        prop_assume!(isolated_zero_check(&pair, 4096));
        let oracle = oracle_winding(&pair, 1.0, 256).unwrap();
        if (pair.m() + pair.n()) % 2 == 1 {
            prop_assert_eq!(oracle, 0);
        }
        for arith in [Arithmetic::Exact, Arithmetic::Float] {
            if let Ok(v) = homogeneous_index(&pair, Convention::NegatedRemainder, arith) {
                prop_assert_eq!(v, oracle, "{:?}", pair);
            }
        }
    }

    /// Homogeneous index scales: the winding on a circle of any radius is the same.
    #[test]
    fn sturm_winding_radius_invariant(p in small_poly(3), q in small_poly(3), r in 0.2f64..5.0) {
        prop_assume!(p.iter().any(|c| *c != 0.0));
        let Ok(pair) = HomogeneousPair::new(p, q) else { return Ok(()); };
        prop_assume!(isolated_zero_check(&pair, 4096));
        prop_assert_eq!(oracle_winding(&pair, 1.0, 256).unwrap(), oracle_winding(&pair, r, 256).unwrap());
    }
}

#[test]
fn rotation_oracle_counts() {
    assert_eq!(rotation_oracle(0.5, 1.5), 2);
    assert_eq!(rotation_oracle(2.5, 0.5), -4);
    assert_eq!(rotation_oracle(0.1, 0.4), 0);
}
