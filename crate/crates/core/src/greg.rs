//! Rate equations for graph observables.
//!
//! The jump of `⟨F⟩` under a rule `L <- K -> R` is
//!
//! ```text
//! Σ_{μ ∈ MG(R, F), μ₁ derivable} ⟨cod α†(μ₁)⟩  −  Σ_{μ ∈ MG(L, F)} ⟨μ̂⟩
//! ```
//!
//! and the rate equation of `⟨F⟩` is the rate-weighted sum of the jumps.
//! Coefficients are exact rationals.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::canon::{canonicalize, CanonicalKey};
use crate::gluing::minimal_gluings;
use crate::graph::Graph;
use crate::matching::count_matches;
use crate::rewrite::{derivable_witness, RewriteError, Rule};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GregError {
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("rule `{0}` has a non-positive rate")]
    NonPositiveRate(String),
    #[error("equivalence `{0}` takes part in a substitution cycle")]
    SubstitutionCycle(String),
    #[error("two equivalences rewrite the same observable (`{0}`)")]
    DuplicateEquivalence(String),
    #[error("no seed observables")]
    NoSeeds,
    #[error("observable cap of {cap} exceeded, {open} observables left in the open frontier")]
    CapExceeded { cap: usize, open: usize, partial: Box<OdeSystem> },
}

/// The counting function `G ↦ |Mono(F, G)|`, held in canonical form.
#[derive(Clone, PartialEq, Eq)]
pub struct Observable {
    graph: Arc<Graph>,
    key: CanonicalKey,
}

impl Observable {
    pub fn new(g: &Graph) -> Self {
        let (graph, key) = canonicalize(g);
        Self { graph, key }
    }

    /// `⟨∅⟩`, identically one.
    pub fn constant() -> Self {
        Self::new(&Graph::new())
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn key(&self) -> &CanonicalKey {
        &self.key
    }

    pub fn is_constant(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn size(&self) -> usize {
        self.graph.node_count()
    }

    pub fn eval(&self, g: &Graph) -> u128 {
        count_matches(&self.graph, g)
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}⟩", self.key)
    }
}

/// `Σ cᵢ ⟨Fᵢ⟩` with distinct `Fᵢ` up to isomorphism and nonzero `cᵢ`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearCombination {
    terms: BTreeMap<CanonicalKey, (Rational, Observable)>,
}

impl LinearCombination {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(coeff: Rational, obs: Observable) -> Self {
        let mut lc = Self::new();
        lc.add_term(coeff, obs);
        lc
    }

    pub fn add_term(&mut self, coeff: Rational, obs: Observable) {
        if coeff.is_zero() {
            return;
        }
        let key = obs.key.clone();
        let slot = self.terms.entry(key.clone()).or_insert((Rational::zero(), obs));
        slot.0 += coeff;
        if slot.0.is_zero() {
            self.terms.remove(&key);
        }
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, scale: Rational, other: &LinearCombination) {
        for (c, obs) in other.terms.values() {
            self.add_term(scale * c, obs.clone());
        }
    }

    pub fn scaled(&self, scale: Rational) -> Self {
        let mut out = Self::new();
        out.add_scaled(scale, self);
        out
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, key: &CanonicalKey) -> Rational {
        self.terms.get(key).map_or_else(Rational::zero, |t| t.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rational, &Observable)> {
        self.terms.values().map(|(c, o)| (c, o))
    }

    pub fn keys(&self) -> impl Iterator<Item = &CanonicalKey> {
        self.terms.keys()
    }

    /// Exact value at a concrete state.
    pub fn eval(&self, g: &Graph) -> Rational {
        self.terms
            .values()
            .map(|(c, o)| c * Rational::from_integer(o.eval(g) as i128))
            .fold(Rational::zero(), |a, b| a + b)
    }
}

impl core::ops::Sub for &LinearCombination {
    type Output = LinearCombination;

    fn sub(self, rhs: &LinearCombination) -> LinearCombination {
        let mut out = self.clone();
        out.add_scaled(-Rational::one(), rhs);
        out
    }
}

#[derive(Clone, Debug)]
pub struct NamedRule {
    pub name: String,
    pub rule: Rule,
    pub rate: Rational,
}

/// Observables declared identically zero: any observable containing one of
/// the patterns is dropped.
#[derive(Clone, Debug)]
pub struct Invariant {
    pub name: String,
    pub patterns: Vec<Observable>,
}

/// Replace `⟨pattern⟩` by `⟨replacement⟩` wherever it occurs as a term.
#[derive(Clone, Debug)]
pub struct Equivalence {
    pub name: String,
    pub pattern: Observable,
    pub replacement: Observable,
}

#[derive(Clone, Debug)]
pub struct Output {
    pub name: String,
    pub combination: LinearCombination,
}

#[derive(Clone, Debug, Default)]
pub struct Model {
    pub node_labels: Vec<String>,
    pub edge_labels: Vec<String>,
    pub rules: Vec<NamedRule>,
    pub invariants: Vec<Invariant>,
    pub equivalences: Vec<Equivalence>,
    pub observables: Vec<(String, Observable)>,
    pub outputs: Vec<Output>,
}

impl Model {
    /// Rates positive, equivalence patterns distinct and acyclic.
    pub fn validate(&self) -> Result<(), GregError> {
        if let Some(r) = self.rules.iter().find(|r| r.rate <= Rational::zero()) {
            return Err(GregError::NonPositiveRate(r.name.clone()));
        }
        let mut by_pattern: BTreeMap<&CanonicalKey, &Equivalence> = BTreeMap::new();
        for eq in &self.equivalences {
            if by_pattern.insert(eq.pattern.key(), eq).is_some() {
                return Err(GregError::DuplicateEquivalence(eq.name.clone()));
            }
        }
        for eq in &self.equivalences {
            let mut seen = BTreeSet::new();
            let mut at = eq.pattern.key();
            while let Some(next) = by_pattern.get(at) {
                if !seen.insert(at) {
                    return Err(GregError::SubstitutionCycle(eq.name.clone()));
                }
                at = next.replacement.key();
            }
        }
        Ok(())
    }

    pub fn observable(&self, name: &str) -> Option<&Observable> {
        self.observables.iter().find(|(n, _)| n == name).map(|(_, o)| o)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Production,
    Consumption,
}

/// Where a raw term of a rate equation came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub rule: usize,
    pub side: Side,
    /// Index into `minimal_gluings(lhs or rhs, F)`.
    pub gluing: usize,
    /// The term's observable after closures; `None` when it was closed to zero.
    pub target: Option<CanonicalKey>,
}

struct RawTerm {
    side: Side,
    gluing: usize,
    obs: Observable,
}

fn raw_terms(rule: &Rule, f: &Observable) -> Result<Vec<RawTerm>, RewriteError> {
    let mut out = Vec::new();
    for (i, mu) in minimal_gluings(rule.rhs(), f.graph()).into_iter().enumerate() {
        if let Some(back) = derivable_witness(rule, &mu.left)? {
            out.push(RawTerm { side: Side::Production, gluing: i, obs: Observable::new(back.result()) });
        }
    }
    for (i, mu) in minimal_gluings(rule.lhs(), f.graph()).into_iter().enumerate() {
        out.push(RawTerm { side: Side::Consumption, gluing: i, obs: Observable::new(mu.tip()) });
    }
    Ok(out)
}

/// One `⟨μ̂⟩` per minimal gluing of the left-hand side with `F`.
pub fn consumption_terms(rule: &Rule, f: &Observable) -> LinearCombination {
    let mut lc = LinearCombination::new();
    for mu in minimal_gluings(rule.lhs(), f.graph()) {
        lc.add_term(Rational::one(), Observable::new(mu.tip()));
    }
    lc
}

/// One `⟨cod α†(μ₁)⟩` per minimal gluing of the right-hand side with `F`
/// whose first injection is derivable.
pub fn production_terms(rule: &Rule, f: &Observable) -> Result<LinearCombination, RewriteError> {
    let mut lc = LinearCombination::new();
    for mu in minimal_gluings(rule.rhs(), f.graph()) {
        if let Some(back) = derivable_witness(rule, &mu.left)? {
            lc.add_term(Rational::one(), Observable::new(back.result()));
        }
    }
    Ok(lc)
}

/// Expected rate of change of `⟨F⟩` per unit rate of `rule`.
pub fn jump(rule: &Rule, f: &Observable) -> Result<LinearCombination, RewriteError> {
    Ok(&production_terms(rule, f)? - &consumption_terms(rule, f))
}

/// `d⟨F⟩/dt` before any closure.
pub fn rate_equation(model: &Model, f: &Observable) -> Result<LinearCombination, RewriteError> {
    let mut lc = LinearCombination::new();
    for r in &model.rules {
        lc.add_scaled(r.rate, &jump(&r.rule, f)?);
    }
    Ok(lc)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosurePolicy {
    pub prune_invariants: bool,
    pub substitute_equivalences: bool,
    /// Observables with more nodes are set to zero.
    pub max_size: Option<usize>,
    pub max_observables: usize,
}

impl Default for ClosurePolicy {
    fn default() -> Self {
        Self { prune_invariants: true, substitute_equivalences: true, max_size: None, max_observables: 64 }
    }
}

/// Pruning, then one substitution pass, then zero-closure by size. `None`
/// means the observable is closed to zero. The constant is never closed.
fn close_observable(obs: &Observable, model: &Model, policy: &ClosurePolicy) -> Option<Observable> {
    if obs.is_constant() {
        return Some(obs.clone());
    }
    if policy.prune_invariants && is_forbidden(obs, model) {
        return None;
    }
    let mut obs = obs.clone();
    if policy.substitute_equivalences {
        if let Some(eq) = model.equivalences.iter().find(|e| e.pattern.key() == obs.key()) {
            obs = eq.replacement.clone();
        }
    }
    match policy.max_size {
        Some(n) if obs.size() > n => None,
        _ => Some(obs),
    }
}

pub fn is_forbidden(obs: &Observable, model: &Model) -> bool {
    model
        .invariants
        .iter()
        .flat_map(|inv| &inv.patterns)
        .any(|p| count_matches(p.graph(), obs.graph()) > 0)
}

pub fn apply_closures(
    lc: &LinearCombination,
    model: &Model,
    policy: &ClosurePolicy,
) -> Result<LinearCombination, GregError> {
    model.validate()?;
    let mut out = LinearCombination::new();
    for (c, obs) in lc.terms() {
        if let Some(o) = close_observable(obs, model, policy) {
            out.add_term(*c, o);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equation {
    pub observable: Observable,
    pub rhs: LinearCombination,
    pub provenance: Vec<Provenance>,
}

/// A system of rate equations keyed by observable.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSystem {
    pub equations: BTreeMap<CanonicalKey, Equation>,
    /// Observables referenced by some right-hand side but not expanded.
    pub frontier: BTreeSet<CanonicalKey>,
    /// Observables met during expansion and closed by policy.
    pub closed: BTreeSet<CanonicalKey>,
    pub policy: ClosurePolicy,
}

impl OdeSystem {
    pub fn is_closed(&self) -> bool {
        self.frontier.is_empty()
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    /// Observables in a fixed order (by key), the variables of the system.
    pub fn variables(&self) -> Vec<&Observable> {
        self.equations.values().map(|e| &e.observable).collect()
    }
}

/// Closure of `obs` under the model's invariants, equivalences and size bound.
pub fn close(obs: &Observable, model: &Model, policy: &ClosurePolicy) -> Option<Observable> {
    close_observable(obs, model, policy)
}

/// Worklist expansion from `seeds`: each open observable gets its closed
/// rate equation, and every non-constant observable it mentions is queued.
pub fn expand_system(
    model: &Model,
    seeds: &[Observable],
    policy: &ClosurePolicy,
) -> Result<OdeSystem, GregError> {
    model.validate()?;
    if seeds.is_empty() {
        return Err(GregError::NoSeeds);
    }
    let mut sys = OdeSystem {
        equations: BTreeMap::new(),
        frontier: BTreeSet::new(),
        closed: BTreeSet::new(),
        policy: policy.clone(),
    };
    let mut queue: VecDeque<Observable> = VecDeque::new();
    for s in seeds {
        match close_observable(s, model, policy) {
            Some(o) if !o.is_constant() => {
                if sys.frontier.insert(o.key().clone()) {
                    queue.push_back(o);
                }
            }
            Some(_) => {}
            None => {
                sys.closed.insert(s.key().clone());
            }
        }
    }
    while let Some(f) = queue.pop_front() {
        if sys.equations.len() >= policy.max_observables {
            let open = sys.frontier.len();
            return Err(GregError::CapExceeded { cap: policy.max_observables, open, partial: Box::new(sys) });
        }
        sys.frontier.remove(f.key());
        let mut rhs = LinearCombination::new();
        let mut provenance = Vec::new();
        for (ri, r) in model.rules.iter().enumerate() {
            for t in raw_terms(&r.rule, &f)? {
                let sign = match t.side {
                    Side::Production => Rational::one(),
                    Side::Consumption => -Rational::one(),
                };
                let closed = close_observable(&t.obs, model, policy);
                if closed.is_none() {
                    sys.closed.insert(t.obs.key().clone());
                }
                provenance.push(Provenance {
                    rule: ri,
                    side: t.side,
                    gluing: t.gluing,
                    target: closed.as_ref().map(|o| o.key().clone()),
                });
                if let Some(o) = closed {
                    rhs.add_term(sign * r.rate, o);
                }
            }
        }
        for (_, o) in rhs.terms() {
            if o.is_constant() || sys.equations.contains_key(o.key()) || o.key() == f.key() {
                continue;
            }
            if sys.frontier.insert(o.key().clone()) {
                queue.push_back(o.clone());
            }
        }
        sys.equations.insert(f.key().clone(), Equation { observable: f, rhs, provenance });
    }
    Ok(sys)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::{graph, EdgeId, Label, NodeId};

    pub fn q(n: i128) -> Rational {
        Rational::from_integer(n)
    }

    fn rule_from(lhs: Graph, rhs: Graph, nodes: &[(u32, u32)], edges: &[(u32, u32)]) -> Rule {
        let n: Vec<_> = nodes.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect();
        let e: Vec<_> = edges.iter().map(|&(a, b)| (EdgeId(a), EdgeId(b))).collect();
        Rule::from_correspondence(Arc::new(lhs), Arc::new(rhs), &n, &e).unwrap()
    }

    pub fn birth() -> Rule {
        rule_from(Graph::new(), graph(&[0], &[]), &[], &[])
    }

    pub fn death() -> Rule {
        rule_from(graph(&[0], &[]), Graph::new(), &[], &[])
    }

    fn node() -> Observable {
        Observable::new(&graph(&[0], &[]))
    }

    fn two_nodes() -> Observable {
        Observable::new(&graph(&[0, 0], &[]))
    }

    fn birth_death(b: i128, d: i128) -> Model {
        Model {
            rules: alloc::vec![
                NamedRule { name: "birth".into(), rule: birth(), rate: q(b) },
                NamedRule { name: "death".into(), rule: death(), rate: q(d) },
            ],
            ..Model::default()
        }
    }

    #[test]
    fn death_consumes_node_and_pair() {
        let c = consumption_terms(&death(), &node());
        assert_eq!(c.len(), 2);
        assert_eq!(c.coeff(node().key()), q(1));
        assert_eq!(c.coeff(two_nodes().key()), q(1));
        assert_eq!(consumption_terms(&birth(), &node()), LinearCombination::single(q(1), node()));
    }

    #[test]
    fn production_examples() {
        let p = production_terms(&birth(), &node()).unwrap();
        assert_eq!(p.coeff(Observable::constant().key()), q(1));
        assert_eq!(p.coeff(node().key()), q(1));
        assert_eq!(p.len(), 2);
        let p = production_terms(&death(), &node()).unwrap();
        assert_eq!(p, LinearCombination::single(q(1), two_nodes()));
    }

    #[test]
    fn jumps_of_birth_and_death() {
        assert_eq!(jump(&birth(), &node()).unwrap(), LinearCombination::single(q(1), Observable::constant()));
        assert_eq!(jump(&death(), &node()).unwrap(), LinearCombination::single(q(-1), node()));
    }

    #[test]
    fn constant_observable_has_zero_jump() {
        let loop_rule = rule_from(graph(&[0, 1], &[(0, 1, 0)]), graph(&[0, 1], &[(1, 0, 0)]), &[(0, 0), (1, 1)], &[]);
        for r in [birth(), death(), loop_rule] {
            assert!(jump(&r, &Observable::constant()).unwrap().is_empty());
        }
    }

    #[test]
    fn birth_death_rate_equation_and_expansion() {
        let m = birth_death(2, 1);
        let mut want = LinearCombination::single(q(2), Observable::constant());
        want.add_term(q(-1), node());
        assert_eq!(rate_equation(&m, &node()).unwrap(), want);
        let sys = expand_system(&m, &[node()], &ClosurePolicy::default()).unwrap();
        assert!(sys.is_closed());
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.equations[node().key()].rhs, want);
    }

    #[test]
    fn empty_model_has_empty_rate_equation() {
        assert!(rate_equation(&Model::default(), &node()).unwrap().is_empty());
    }

    #[test]
    fn rate_equation_is_rate_weighted_sum_of_jumps() {
        let m = birth_death(3, 5);
        let f = two_nodes();
        let mut want = LinearCombination::new();
        want.add_scaled(q(3), &jump(&birth(), &f).unwrap());
        want.add_scaled(q(5), &jump(&death(), &f).unwrap());
        assert_eq!(rate_equation(&m, &f).unwrap(), want);
    }

    #[test]
    fn truncation_at_zero_empties_nonconstant_terms() {
        let lc = consumption_terms(&death(), &node());
        let policy = ClosurePolicy { max_size: Some(0), ..ClosurePolicy::default() };
        assert!(apply_closures(&lc, &Model::default(), &policy).unwrap().is_empty());
    }

    #[test]
    fn substitution_cycles_are_rejected() {
        let mut m = Model::default();
        m.equivalences.push(Equivalence { name: "a".into(), pattern: node(), replacement: two_nodes() });
        assert!(m.validate().is_ok());
        m.equivalences.push(Equivalence { name: "b".into(), pattern: two_nodes(), replacement: node() });
        assert!(matches!(m.validate(), Err(GregError::SubstitutionCycle(_))));
        m.equivalences.clear();
        m.equivalences.push(Equivalence { name: "self".into(), pattern: node(), replacement: node() });
        assert!(matches!(m.validate(), Err(GregError::SubstitutionCycle(_))));
    }

    #[test]
    fn pruning_drops_forbidden_terms() {
        let mut m = Model::default();
        m.invariants.push(Invariant { name: "one".into(), patterns: alloc::vec![two_nodes()] });
        let lc = consumption_terms(&death(), &node());
        let closed = apply_closures(&lc, &m, &ClosurePolicy::default()).unwrap();
        assert_eq!(closed, LinearCombination::single(q(1), node()));
    }

    #[test]
    fn expansion_beyond_the_cap_is_reported() {
        // Under pure birth, d⟨k nodes⟩/dt = k⟨k-1 nodes⟩: four equations.
        let m = Model {
            rules: alloc::vec![NamedRule { name: "b".into(), rule: birth(), rate: q(1) }],
            ..Model::default()
        };
        let policy = ClosurePolicy { max_observables: 2, ..ClosurePolicy::default() };
        let seed = Observable::new(&graph(&[0; 4], &[]));
        match expand_system(&m, &[seed], &policy) {
            Err(GregError::CapExceeded { cap: 2, partial, .. }) => {
                assert_eq!(partial.len(), 2);
                assert!(!partial.is_closed());
            }
            other => panic!("{other:?}"),
        }
        let sys = expand_system(&m, &[Observable::new(&graph(&[0; 4], &[]))], &ClosurePolicy::default()).unwrap();
        assert_eq!(sys.len(), 4);
    }

    #[test]
    fn expansion_is_idempotent() {
        let m = birth_death(2, 1);
        let policy = ClosurePolicy::default();
        let sys = expand_system(&m, &[node()], &policy).unwrap();
        let seeds: Vec<Observable> = sys.variables().into_iter().cloned().collect();
        let again = expand_system(&m, &seeds, &policy).unwrap();
        assert_eq!(sys.equations, again.equations);
    }

    #[test]
    fn labels_distinguish_observables() {
        let a = Observable::new(&graph(&[0], &[]));
        let mut g = Graph::new();
        g.add_node(NodeId(0), Label(1)).unwrap();
        assert_ne!(a.key(), Observable::new(&g).key());
    }
}
