use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use sdbc::polyhedra::{
    derivation_check_with, marton_code_system, theorem1_derivation_check, ConstantValuation, Row,
    SymbolicIneqSystem, RATE_VARS,
};

#[test]
fn derivation_reproduces_theorem1() {
    let start = Instant::now();
    let report = theorem1_derivation_check(100, 7).unwrap();
    eprintln!("{report:?} in {:?}", start.elapsed());
    assert!(report.mutual);
    assert!(!report.degenerate_rows);
    assert_eq!(report.steps.len(), 3);
    assert!(report.steps.iter().all(|s| s.after_dedup <= s.before_dedup));
}

#[test]
fn zero_constants_leave_only_origin() {
    let zero = ConstantValuation::new(&[
        ("H(Y)", 0.0),
        ("H(Y|V)", 0.0),
        ("I(U;Z)", 0.0),
        ("I(U;Z|V)", 0.0),
        ("I(Y;U|V)", 0.0),
        ("I(V;Y)", 0.0),
    ]);
    let report = derivation_check_with(&[zero.clone()], 0).unwrap();
    assert!(report.mutual);
    // the origin-only polytope is contained in "every rate is zero"
    let mut origin = SymbolicIneqSystem::new(&RATE_VARS, &["H(Y)", "H(Y|V)", "I(U;Z)", "I(U;Z|V)", "I(Y;U|V)", "I(V;Y)"]);
    for i in 0..5 {
        let mut v = vec![0; 5];
        v[i] = 1;
        origin.push(Row::from_ints(&v, &[0; 6])).unwrap();
    }
    origin.add_nonnegativity(&RATE_VARS).unwrap();
    let mut t = sdbc::polyhedra::theorem1_system();
    t.add_nonnegativity(&RATE_VARS).unwrap();
    assert!(sdbc::polyhedra::implies(&t, &origin, &[zero], 1e-9).unwrap());
}

#[test]
fn marton_system_shape() {
    let s = marton_code_system();
    assert_eq!(s.rows.len(), 10);
    assert_eq!(s.variables.len(), 8);
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Feasibility of `rows` at `(x, y)` given the constant value, exactly.
fn feasible(rows: &[Row], point: &[BigRational], k: &BigRational) -> bool {
    rows.iter().all(|r| {
        let lhs: BigRational = r.vars.iter().zip(point).map(|(a, b)| a * b).sum();
        lhs <= &r.consts[0] * k
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(200) })]

    /// Eliminating `x` from a random system in (x, y) keeps exactly the `y`
    /// that extend; extensions are searched over every critical `x`.
    #[test]
    fn elimination_is_exact_projection(
        coeffs in prop::collection::vec((-3i64..=3, -3i64..=3, -3i64..=3), 1..6),
        k in 0i64..4,
        y_num in -12i64..=12,
    ) {
        let mut sys = SymbolicIneqSystem::new(&["x", "y"], &["K"]);
        for &(a, b, c) in &coeffs {
            sys.push(Row::from_ints(&[a, b], &[c])).unwrap();
        }
        let proj = sys.eliminate("x").unwrap();
        let k = rat(k);
        let y = BigRational::new(BigInt::from(y_num), BigInt::from(4));
        let projected = feasible(&proj.rows, &[y.clone()], &k);

        let mut candidates = vec![rat(0)];
        for r in &sys.rows {
            if r.vars[0] != rat(0) {
                candidates.push((&r.consts[0] * &k - &r.vars[1] * &y) / &r.vars[0]);
            }
        }
        let extends = candidates.iter().any(|x| feasible(&sys.rows, &[x.clone(), y.clone()], &k));
        prop_assert_eq!(projected, extends);
    }

    /// Duplicate removal leaves the feasible set unchanged.
    #[test]
    fn dedup_keeps_feasible_set(
        coeffs in prop::collection::vec((-2i64..=2, -2i64..=2, -2i64..=2, 1i64..=3), 1..6),
        px in -8i64..=8,
        py in -8i64..=8,
    ) {
        let mut sys = SymbolicIneqSystem::new(&["x", "y"], &["K"]);
        for &(a, b, c, m) in &coeffs {
            sys.push(Row::from_ints(&[a, b], &[c])).unwrap();
            sys.push(Row::from_ints(&[a * m, b * m], &[c * m])).unwrap();
        }
        let mut d = sys.clone();
        d.dedup();
        prop_assert!(d.rows.len() <= coeffs.len());
        let pt = [BigRational::new(BigInt::from(px), BigInt::from(2)), BigRational::new(BigInt::from(py), BigInt::from(2))];
        prop_assert_eq!(feasible(&sys.rows, &pt, &rat(1)), feasible(&d.rows, &pt, &rat(1)));
    }
}
