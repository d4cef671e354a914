//! Property tests for the invariants the crate leans on everywhere:
//! printing and re-parsing expressions and scenarios, product index
//! arithmetic, sampling, and the finite-set combinators.

use proptest::prelude::*;

use hysys::expr::{parse_expr, CmpOp, Expr, Func, Ty};
use hysys::finite_cat::{omega, FiniteMap};
use hysys::numerics::{box_samples, halton};
use hysys::phase_space::{
    product_edge, product_node, split_edge, split_node, BoxSpace, Interval,
};
use hysys::scenario::{parse_scenario, to_text};

// ---------------------------------------------------------------------------
// Expression language
// ---------------------------------------------------------------------------

fn real_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        // Negative values come from explicit `Neg` nodes: the parser reads
        // `-c` as a negation, so a negative literal would not round-trip
        // structurally.
        (0i32..100).prop_map(|n| Expr::Num(n as f64 / 4.0)),
        (0usize..4).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(a.into(), b.into())),
            inner.clone().prop_map(|a| Expr::Neg(a.into())),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Call(Func::Min, vec![a, b])),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
            inner.clone().prop_map(|a| Expr::Call(Func::Abs, vec![a])),
            (inner.clone(), inner.clone(), inner)
                .prop_map(|(c, t, e)| Expr::Piecewise(
                    Box::new(Expr::Cmp(CmpOp::Le, c.into(), Box::new(Expr::Num(0.0)))),
                    t.into(),
                    e.into(),
                )),
        ]
    })
}

proptest! {
    /// Printing an expression and parsing the result reproduces the tree.
    #[test]
    fn expr_display_parse_round_trip(e in real_expr()) {
        let text = e.to_string();
        let back = parse_expr(&text).expect("printed expression parses");
        prop_assert_eq!(back, e);
    }

    /// Every generated tree type-checks as real-valued in four variables.
    #[test]
    fn expr_generator_is_well_typed(e in real_expr()) {
        prop_assert_eq!(e.ty(4).unwrap(), Ty::Real);
    }

    /// Evaluation agrees before and after the print/parse trip.
    #[test]
    fn expr_eval_survives_round_trip(
        e in real_expr(),
        vars in proptest::collection::vec(-10.0f64..10.0, 4),
    ) {
        let back = parse_expr(&e.to_string()).unwrap();
        let (a, b) = (e.eval(&vars), back.eval(&vars));
        prop_assert!(a == b || (a.is_nan() && b.is_nan()));
    }

    /// Comparison margins: widening the tolerance never turns true into false.
    #[test]
    fn expr_margin_is_monotone(
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
        tol in 0.0f64..0.5,
    ) {
        let cmp = Expr::Cmp(CmpOp::Le, Box::new(Expr::Var(0)), Box::new(Expr::Var(1)));
        let vars = [a, b];
        if cmp.eval_bool(&vars, 0.0) {
            prop_assert!(cmp.eval_bool(&vars, tol));
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario format
// ---------------------------------------------------------------------------

const THERMOSTAT_SCENARIO: &str = "\
space thermo
  node off 1
    coord -2 1
  node on 1
    coord -1 2
  edge unit_off off -> off
    relation x0 = x1
  edge unit_on on -> on
    relation x0 = x1
  edge turn_on off -> on
    relation x0 <= -1 and x0 = x1
  edge turn_off on -> off
    relation x0 >= 1 and x0 = x1

control heat
  space thermo
  node off
    field -1
    event -1 - x0
    jump x0 <= -1 -> on : x0
  node on
    field 1
    event 1 - x0
    jump x0 >= 1 -> off : x0

simulation run
  system heat
  start off 0
  horizon 12
";

proptest! {
    /// Parse, print, and re-parse is the same as a single parse (stability of
    /// the textual form), exercised with varying numeric fields spliced into a
    /// simulation section.
    #[test]
    fn scenario_round_trip_is_stable(
        start in -9i32..9,
        horizon in 1u32..30,
    ) {
        let text = THERMOSTAT_SCENARIO
            .replace("start off 0", &format!("start off {}", start as f64 / 10.0))
            .replace("horizon 12", &format!("horizon {horizon}"));
        let first = parse_scenario(&text).expect("scenario parses");
        let printed = to_text(&first);
        let second = parse_scenario(&printed).expect("printed scenario parses");
        prop_assert_eq!(first, second);
    }
}

// ---------------------------------------------------------------------------
// Product index arithmetic
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn product_node_splits_back(sa in 0usize..50, sb in 0usize..50, nb in 1usize..51) {
        prop_assume!(sb < nb);
        let s = product_node(sa, sb, nb);
        prop_assert_eq!(split_node(s, nb), (sa, sb));
    }

    #[test]
    fn product_edge_splits_back(ea in 0usize..50, eb in 0usize..50, mb in 1usize..51) {
        prop_assume!(eb < mb);
        let e = product_edge(ea, eb, mb);
        prop_assert_eq!(split_edge(e, mb), (ea, eb));
    }

    /// The pairing is a bijection onto `0..na*nb`.
    #[test]
    fn product_node_is_dense(na in 1usize..12, nb in 1usize..12) {
        let mut seen = vec![false; na * nb];
        for sa in 0..na {
            for sb in 0..nb {
                let s = product_node(sa, sb, nb);
                prop_assert!(s < na * nb && !seen[s]);
                seen[s] = true;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn halton_stays_in_unit_interval(i in 0u64..100_000, base in 0usize..8) {
        let primes = [2u64, 3, 5, 7, 11, 13, 17, 19];
        let h = halton(i, primes[base]);
        prop_assert!((0.0..1.0).contains(&h));
    }

    /// Samples land inside the box, and the same seed reproduces them.
    #[test]
    fn box_samples_contained_and_deterministic(
        lo in -10.0f64..0.0,
        width in 0.1f64..10.0,
        count in 1usize..40,
        seed in 0u64..1000,
    ) {
        let space = BoxSpace::new(vec![
            Interval::closed(lo, lo + width),
            Interval::closed(0.0, 1.0),
        ]);
        let samples = box_samples(&space, count, seed);
        prop_assert_eq!(samples.len(), count);
        for s in &samples {
            prop_assert!(space.contains(s));
        }
        prop_assert_eq!(box_samples(&space, count, seed), samples);
    }
}

// ---------------------------------------------------------------------------
// Finite combinators
// ---------------------------------------------------------------------------

fn finite_map(dom: usize, cod: usize) -> impl Strategy<Value = FiniteMap> {
    proptest::collection::vec(0..cod, dom)
        .prop_map(move |t| FiniteMap::new(dom, cod, t).unwrap())
}

proptest! {
    #[test]
    fn finite_map_composition_associates(
        f in finite_map(4, 3),
        g in finite_map(3, 5),
        h in finite_map(5, 2),
    ) {
        let left = h.compose(&g.compose(&f).unwrap()).unwrap();
        let right = h.compose(&g).unwrap().compose(&f).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn finite_map_identity_laws(f in finite_map(4, 3)) {
        prop_assert_eq!(f.compose(&FiniteMap::identity(4)).unwrap(), f.clone());
        prop_assert_eq!(FiniteMap::identity(3).compose(&f).unwrap(), f);
    }

    /// The section/distribution pairing round-trips for arbitrary small shapes.
    #[test]
    fn omega_round_trips_on_random_shapes(
        sizes in proptest::collection::vec(
            proptest::collection::vec(0usize..4, 1..4),
            1..3,
        ),
    ) {
        let total: usize = sizes.iter().map(|s| s.iter().sum::<usize>()).product();
        prop_assume!(total <= 200);
        prop_assert!(omega(&sizes).unwrap().round_trips());
    }
}
