//! The bipedal walker: gluing counts, the closed two-variable system and
//! its steady state.

use rategraph::dsl::{compile, parse_model, Compiled};
use rategraph::system::expand_model;
use rategraph_core::gluing::minimal_gluings;
use rategraph_core::greg::{expand_system, ClosurePolicy, GregError, Rational};
use rategraph_core::matching::count_matches;
use rategraph_core::odeint::{steady_state, SteadyOptions};

fn walker() -> Compiled {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/models/walker.gts")).unwrap();
    compile(&parse_model(&src).unwrap()).unwrap()
}

fn q(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

#[test]
fn invariants_prune_gluings_in_stages() {
    let w = walker();
    let mut left = minimal_gluings(w.graph("Gb").unwrap(), w.graph("Ga").unwrap());
    assert_eq!(left.len(), 21);
    let mut remaining = Vec::new();
    for inv in &w.model.invariants {
        left.retain(|g| !inv.patterns.iter().any(|p| count_matches(p.graph(), g.tip()) > 0));
        remaining.push((inv.name.as_str(), left.len()));
    }
    assert_eq!(remaining, vec![("two_legs", 8), ("non_branching", 5), ("one_motor", 0)]);
}

#[test]
fn closes_on_two_observables() {
    let w = walker();
    let sys = expand_system(&w.model, &w.seeds, &w.policy).unwrap();
    assert!(sys.is_closed());
    assert_eq!(sys.len(), 2);
    let c = w.model.observable("C").unwrap();
    let o = w.model.observable("O").unwrap();
    let dc = &sys.equations[c.key()].rhs;
    let d_o = &sys.equations[o.key()].rhs;
    assert_eq!((dc.coeff(o.key()), dc.coeff(c.key()), dc.len()), (q(3, 1), q(-4, 1), 2));
    assert_eq!((d_o.coeff(o.key()), d_o.coeff(c.key()), d_o.len()), (q(-3, 1), q(4, 1), 2));
}

#[test]
fn grows_without_the_equivalences() {
    let w = walker();
    let policy = ClosurePolicy { substitute_equivalences: false, max_observables: 40, ..w.policy.clone() };
    match expand_system(&w.model, &w.seeds, &policy) {
        Err(GregError::CapExceeded { cap, open, partial }) => {
            assert_eq!(cap, 40);
            assert!(open > 0);
            assert_eq!(partial.frontier.len(), open);
            assert!(!partial.is_closed());
        }
        other => panic!("expected the cap to be hit, got {other:?}"),
    }
}

#[test]
fn mean_velocity_is_five_sevenths() {
    let w = walker();
    let file = expand_model(&w, &w.policy).unwrap();
    let p = file.problem(0.0, 1e-3).unwrap();
    let s = steady_state(&p, &SteadyOptions::default()).unwrap();
    let (name, row, constant) = &file.output_rows().unwrap()[0];
    assert_eq!(name, "V");
    let v = rategraph::system::eval_row(row, *constant, &s.values);
    assert!((v - 5.0 / 7.0).abs() < 1e-6 * 5.0 / 7.0, "V = {v}");
    let names = file.variable_names();
    let c = s.values[names.iter().position(|n| n == "C").unwrap()];
    assert!((c - 3.0 / 7.0).abs() < 1e-8, "C = {c}");
}

#[test]
fn every_gluing_is_distinct_and_minimal() {
    let w = walker();
    let gs = minimal_gluings(w.graph("Gb").unwrap(), w.graph("Ga").unwrap());
    for (i, a) in gs.iter().enumerate() {
        let covered = a.left.dom().size() + a.right.dom().size() - a.overlap_size();
        assert_eq!(a.tip().size(), covered);
        for b in &gs[i + 1..] {
            assert!(!a.isomorphic_to(b));
        }
    }
}
