//! Random small graphs, rules and factorisations, plus brute-force checks
//! of the decomposition properties of derivations. Shared by the
//! integration tests of this crate and by the acceptance target.
//!
//! Every check decides its verdict by enumerating all matches between the
//! graphs involved, never through the rewriting code under test.

#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rategraph_core::canon::canonical_key;
use rategraph_core::graph::{Graph, Label};
use rategraph_core::matching::{count_matches, enumerate_matches};
use rategraph_core::morphism::{Morphism, PartialMap};
use rategraph_core::ctmc::generator_action;
use rategraph_core::greg::{jump, LinearCombination, Model, NamedRule, Observable, Rational};
use rategraph_core::rewrite::{apply_rule, is_derivable, Derivation, Rule};


pub const NODE_LABELS: u32 = 2;
pub const EDGE_LABELS: u32 = 2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn add_random_edges(rng: &mut ChaCha8Rng, g: &mut Graph, count: usize) {
    if g.node_count() == 0 {
        return;
    }
    for _ in 0..count {
        let s = rng.random_range(0..g.node_count());
        let t = rng.random_range(0..g.node_count());
        g.push_edge(s, t, Label(rng.random_range(0..EDGE_LABELS)));
    }
}

pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> Graph {
    let mut g = Graph::new();
    for _ in 0..rng.random_range(0..=max_nodes) {
        g.push_node(Label(rng.random_range(0..NODE_LABELS)));
    }
    let m = rng.random_range(0..=max_edges);
    add_random_edges(rng, &mut g, m);
    g
}

/// A copy of `g` with up to `extra_nodes` new nodes and `extra_edges` new
/// edges, never exceeding `max_nodes` nodes in total.
pub fn extend(rng: &mut ChaCha8Rng, g: &Graph, max_nodes: usize, extra_edges: usize) -> Graph {
    let mut h = g.clone();
    let room = max_nodes.saturating_sub(h.node_count());
    for _ in 0..rng.random_range(0..=room) {
        h.push_node(Label(rng.random_range(0..NODE_LABELS)));
    }
    let m = rng.random_range(0..=extra_edges);
    add_random_edges(rng, &mut h, m);
    h
}

/// A rule whose sides have at most `max_nodes` nodes: a random left side,
/// a random preserved part, and random created items on the right.
pub fn random_rule(rng: &mut ChaCha8Rng, max_nodes: usize) -> Rule {
    let lhs = random_graph(rng, max_nodes, 3);
    let kept_nodes: Vec<usize> = (0..lhs.node_count()).filter(|_| rng.random_bool(0.6)).collect();
    let kept_edges: Vec<usize> = (0..lhs.edge_count())
        .filter(|&e| {
            let ed = lhs.edge(e);
            kept_nodes.contains(&ed.src) && kept_nodes.contains(&ed.tgt) && rng.random_bool(0.6)
        })
        .collect();
    let mut rhs = Graph::new();
    let mut node_pairs = Vec::new();
    let mut pos = vec![usize::MAX; lhs.node_count()];
    for &n in &kept_nodes {
        let p = rhs.push_node(lhs.node(n).label);
        pos[n] = p;
        node_pairs.push((lhs.node(n).id, rhs.node(p).id));
    }
    let mut edge_pairs = Vec::new();
    for &e in &kept_edges {
        let ed = lhs.edge(e);
        let p = rhs.push_edge(pos[ed.src], pos[ed.tgt], ed.label);
        edge_pairs.push((ed.id, rhs.edge(p).id));
    }
    let rhs = extend(rng, &rhs, max_nodes, 2);
    Rule::from_correspondence(Arc::new(lhs), Arc::new(rhs), &node_pairs, &edge_pairs).expect("well-formed rule")
}

pub fn pick<T: Clone>(rng: &mut ChaCha8Rng, xs: &[T]) -> Option<T> {
    (!xs.is_empty()).then(|| xs[rng.random_range(0..xs.len())].clone())
}

/// A random match of `pattern` into a random extension of it.
pub fn random_host_match(rng: &mut ChaCha8Rng, pattern: &Arc<Graph>, max_nodes: usize) -> Morphism {
    let host = Arc::new(extend(rng, pattern, max_nodes, 3));
    pick(rng, &enumerate_matches(pattern, &host)).expect("a graph embeds in its extension")
}

/// Factors `g: R -> H` as `R -> T -> H` with `T` a random subgraph of `H`
/// containing the image of `g` and `T -> H` the inclusion.
pub fn random_factorisation(rng: &mut ChaCha8Rng, g: &Morphism) -> (Morphism, Morphism) {
    let h = g.cod();
    let mut keep_n = vec![false; h.node_count()];
    let mut keep_e = vec![false; h.edge_count()];
    for &v in g.node_map() {
        keep_n[v] = true;
    }
    for &e in g.edge_map() {
        keep_e[e] = true;
    }
    for k in keep_n.iter_mut() {
        *k = *k || rng.random_bool(0.5);
    }
    for (i, k) in keep_e.iter_mut().enumerate() {
        let ed = h.edge(i);
        *k = *k || (keep_n[ed.src] && keep_n[ed.tgt] && rng.random_bool(0.5));
    }
    let nodes = (0..h.node_count()).filter(|&i| keep_n[i]).map(|i| h.node(i).id).collect();
    let edges = (0..h.edge_count()).filter(|&i| keep_e[i]).map(|i| h.edge(i).id).collect();
    let t = Arc::new(h.subgraph(&nodes, &edges).expect("closed under incidence"));
    let g2 = Morphism::inclusion(t.clone(), h.clone()).expect("subgraph");
    let g1 = through_inclusion(g, &t);
    (g1, g2)
}

/// Each node kept with probability 3/4, then each edge between kept nodes.
pub fn random_subgraph(rng: &mut ChaCha8Rng, g: &Graph) -> Graph {
    let nodes = g.nodes().iter().filter(|_| rng.random_bool(0.75)).map(|n| n.id).collect::<std::collections::BTreeSet<_>>();
    let edges = g
        .edges()
        .iter()
        .filter(|e| nodes.contains(&g.node(e.src).id) && nodes.contains(&g.node(e.tgt).id) && rng.random_bool(0.75))
        .map(|e| e.id)
        .collect();
    g.subgraph(&nodes, &edges).expect("closed under incidence")
}

/// `g` with its codomain restricted to a subgraph `t` (same ids) of it.
fn through_inclusion(g: &Morphism, t: &Arc<Graph>) -> Morphism {
    let h = g.cod();
    let nodes = g.node_map().iter().map(|&v| t.node_pos(h.node(v).id).unwrap()).collect();
    let edges = g.edge_map().iter().map(|&e| t.edge_pos(h.edge(e).id).unwrap()).collect();
    Morphism::new(g.dom().clone(), t.clone(), nodes, edges).expect("restriction of a match")
}

/// `g: R -> T` for `T` a random extension of `R` (identity on positions).
pub fn random_extension_match(rng: &mut ChaCha8Rng, r: &Arc<Graph>, max_nodes: usize) -> Morphism {
    let t = Arc::new(extend(rng, r, max_nodes.max(r.node_count()), 2));
    let nodes = (0..r.node_count()).collect();
    let edges = (0..r.edge_count()).collect();
    Morphism::new(r.clone(), t, nodes, edges).expect("prefix embedding")
}

/// Positions of right-hand items not in the image of the preserved part.
fn created(rule: &Rule) -> (Vec<bool>, Vec<bool>) {
    let r = rule.right();
    let mut nodes = vec![true; rule.rhs().node_count()];
    let mut edges = vec![true; rule.rhs().edge_count()];
    for &v in r.node_map() {
        nodes[v] = false;
    }
    for &e in r.edge_map() {
        edges[e] = false;
    }
    (nodes, edges)
}

/// A match `g: R -> H` arises from some derivation exactly when no edge of
/// `H` outside the image of `g` touches the image of a created node: a
/// pushout only attaches right-hand edges to new nodes, and removing the
/// created items from `H` leaves a valid source graph.
pub fn derivable_by_inspection(rule: &Rule, g: &Morphism) -> bool {
    let (new_nodes, _) = created(rule);
    let h = g.cod();
    let mut fresh = vec![false; h.node_count()];
    for (r, &is_new) in new_nodes.iter().enumerate() {
        if is_new {
            fresh[g.node(r)] = true;
        }
    }
    let mut image = vec![false; h.edge_count()];
    for &e in g.edge_map() {
        image[e] = true;
    }
    (0..h.edge_count()).all(|e| image[e] || !(fresh[h.edge(e).src] || fresh[h.edge(e).tgt]))
}

fn total(f: &Morphism) -> PartialMap {
    PartialMap::total(f)
}

fn same(a: &Morphism, b: &Morphism) -> bool {
    a.node_map() == b.node_map() && a.edge_map() == b.edge_map()
}

/// Matches `x: S -> G` with `x ∘ inner = outer`.
fn factorisations(inner: &Morphism, outer: &Morphism) -> Vec<Morphism> {
    enumerate_matches(inner.cod(), outer.cod())
        .into_iter()
        .filter(|x| same(&inner.then(x).expect("composable"), outer))
        .collect()
}

/// Whether `top ; right == left ; bottom` as partial maps.
fn square_commutes(left: &Morphism, bottom: &PartialMap, top: &PartialMap, right: &Morphism) -> bool {
    total(left).then(bottom) == top.then(&total(right))
}

/// Whether the square `(rule, x, y, corule)` is a derivation: rewriting
/// along `x` gives `y` with the corule `corule`, up to isomorphism.
fn is_derivation(rule: &Rule, x: &Morphism, y: &Morphism, corule: &PartialMap) -> bool {
    apply_rule(rule, x).map(|d| d.agrees_with(y, Some(corule))).unwrap_or(false)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub checked: usize,
    pub skipped: usize,
    /// Instances where the property held for a non-trivial reason, as
    /// defined by each check.
    pub interesting: usize,
}

pub type Verdict = Result<Option<bool>, String>;
pub type Check = fn(&mut ChaCha8Rng, usize) -> Verdict;

fn derive(rule: &Rule, f: &Morphism) -> Derivation {
    apply_rule(rule, f).expect("matches are mono")
}

/// A rule applied at `f = f2 ∘ f1` splits into the rule at `f1` followed
/// by its corule at `f2`, through exactly one mediating comatch.
pub fn forward_modularity(rng: &mut ChaCha8Rng, max_nodes: usize) -> Verdict {
    let alpha = random_rule(rng, max_nodes);
    let f1 = random_host_match(rng, alpha.lhs(), max_nodes);
    let f2 = random_host_match(rng, f1.cod(), max_nodes);
    let f = f1.then(&f2).unwrap();
    let outer = derive(&alpha, &f);
    let top = derive(&alpha, &f1);
    let (g, beta) = (&outer.comatch, outer.corule.as_partial());
    let (g1, gamma) = (&top.comatch, top.corule.as_partial());
    let mediators: Vec<Morphism> = factorisations(g1, g)
        .into_iter()
        .filter(|g2| square_commutes(&f2, &beta, &gamma, g2))
        .collect();
    if mediators.len() != 1 {
        return Err(format!("{} mediating comatches", mediators.len()));
    }
    if !is_derivation(&top.corule, &f2, &mediators[0], &beta) {
        return Err("lower square is not a derivation".into());
    }
    Ok(Some(top.comatch.cod().node_count() < outer.comatch.cod().node_count()))
}

/// A factorisation `g = g2 ∘ g1` of a comatch transports back along the
/// reverse rule to a unique factorisation `f = f2 ∘ f1` of the match, with
/// both halves derivations.
pub fn backward_modularity(rng: &mut ChaCha8Rng, max_nodes: usize) -> Verdict {
    let alpha = random_rule(rng, max_nodes);
    let f = random_host_match(rng, alpha.lhs(), max_nodes);
    let outer = derive(&alpha, &f);
    let (g, beta) = (&outer.comatch, outer.corule.as_partial());
    let (g1, g2) = random_factorisation(rng, g);
    let back = derive(&alpha.reverse(), &g1);
    let f1 = &back.comatch;
    let gamma = back.corule.reverse();
    if !is_derivation(&alpha, f1, &g1, &gamma.as_partial()) {
        return Err("upper square is not reversible".into());
    }
    let mediators: Vec<Morphism> = factorisations(f1, &f)
        .into_iter()
        .filter(|f2| square_commutes(f2, &beta, &gamma.as_partial(), &g2))
        .collect();
    if mediators.len() != 1 {
        return Err(format!("{} mediating matches", mediators.len()));
    }
    if !is_derivation(&gamma, &mediators[0], &g2, &beta) {
        return Err("lower square is not a derivation".into());
    }
    Ok(Some(g1.cod().size() < g.cod().size()))
}

/// A match `g: R -> H` is derivable exactly when rewriting it backwards
/// and then forwards again returns it, corule included. Half of the
/// instances are comatches of derivations, half are arbitrary matches.
pub fn derivability(rng: &mut ChaCha8Rng, max_nodes: usize) -> Verdict {
    let alpha = random_rule(rng, max_nodes);
    let g = if rng.random_bool(0.5) {
        let f = random_host_match(rng, alpha.lhs(), max_nodes);
        derive(&alpha, &f).comatch
    } else {
        random_host_match(rng, alpha.rhs(), max_nodes)
    };
    let expected = derivable_by_inspection(&alpha, &g);
    let back = derive(&alpha.reverse(), &g);
    let reversible = is_derivation(&alpha, &back.comatch, &g, &back.corule.reverse().as_partial());
    if reversible != expected {
        return Err(format!("reversible = {reversible}, derivable = {expected}"));
    }
    if is_derivable(&alpha, &g).map_err(|e| e.to_string())? != expected {
        return Err("is_derivable disagrees".into());
    }
    if expected {
        let witnessed = enumerate_matches(alpha.lhs(), back.comatch.cod())
            .iter()
            .any(|f| derive(&alpha, f).agrees_with(&g, None));
        if !witnessed {
            return Err("no derivation produces the match".into());
        }
    }
    Ok(Some(!expected))
}

/// No comatch factors through a match that the rule cannot derive.
pub fn restriction(rng: &mut ChaCha8Rng, max_nodes: usize) -> Verdict {
    let alpha = random_rule(rng, max_nodes);
    let f = random_host_match(rng, alpha.lhs(), max_nodes);
    let g = derive(&alpha, &f).comatch;
    let (sub, _) = random_factorisation(rng, &g);
    // add foreign edges, some touching created nodes
    let mut t = (*sub.cod().as_ref()).clone();
    let (new_nodes, _) = created(&alpha);
    let fresh: Vec<usize> = (0..new_nodes.len()).filter(|&r| new_nodes[r]).map(|r| sub.node(r)).collect();
    for _ in 0..rng.random_range(1..=2) {
        let any = rng.random_range(0..t.node_count().max(1));
        let end = pick(rng, &fresh).unwrap_or(any);
        let (s, d) = if rng.random_bool(0.5) { (end, any) } else { (any, end) };
        if t.node_count() > 0 {
            t.push_edge(s, d, Label(rng.random_range(0..EDGE_LABELS)));
        }
    }
    let g1 = Morphism::new(sub.dom().clone(), Arc::new(t), sub.node_map().to_vec(), sub.edge_map().to_vec())
        .expect("adding edges keeps positions");
    if derivable_by_inspection(&alpha, &g1) {
        return Ok(None);
    }
    if is_derivable(&alpha, &g1).map_err(|e| e.to_string())? {
        return Err("is_derivable accepts an underivable match".into());
    }
    let n = factorisations(&g1, &g).len();
    if n > 0 {
        return Err(format!("{n} factorisations through an underivable match"));
    }
    Ok(Some(true))
}

/// For derivable `g1`, factorisations of the match through `f1` and of
/// the comatch through `g1` are in bijection via the commuting squares.
pub fn correspondence(rng: &mut ChaCha8Rng, max_nodes: usize) -> Verdict {
    let alpha = random_rule(rng, max_nodes);
    let f = random_host_match(rng, alpha.lhs(), max_nodes);
    let outer = derive(&alpha, &f);
    let (g, beta) = (&outer.comatch, outer.corule.as_partial());
    let g1 = if rng.random_bool(0.5) {
        random_factorisation(rng, g).0
    } else {
        random_extension_match(rng, alpha.rhs(), max_nodes)
    };
    if !derivable_by_inspection(&alpha, &g1) {
        return Ok(None);
    }
    let back = derive(&alpha.reverse(), &g1);
    let f1 = &back.comatch;
    let gamma = back.corule.reverse().as_partial();
    let left = factorisations(f1, &f);
    let right = factorisations(&g1, g);
    if left.len() != right.len() {
        return Err(format!("{} match factorisations, {} comatch factorisations", left.len(), right.len()));
    }
    let mut hit = vec![false; right.len()];
    for f2 in &left {
        let partners: Vec<usize> =
            (0..right.len()).filter(|&j| square_commutes(f2, &beta, &gamma, &right[j])).collect();
        match partners.as_slice() {
            [j] if !hit[*j] => hit[*j] = true,
            [_] => return Err("two matches share a comatch".into()),
            _ => return Err(format!("{} partners for one match", partners.len())),
        }
    }
    Ok(Some(left.len() > 1))
}

/// The symbolic jump of a random observable under a random rule, with a
/// random rational rate, evaluated at a random state, against the sum of
/// `rate · (⟨F⟩(H) - ⟨F⟩(G))` over every match of the left side and
/// against the generator computed from the transition row.
pub fn generator_consistency(rng: &mut ChaCha8Rng, max_nodes: usize) -> Verdict {
    let rule = random_rule(rng, 3.min(max_nodes));
    // observables overlapping the rule's sides have non-trivial jumps
    let f = match rng.random_range(0..3) {
        0 => random_subgraph(rng, rule.lhs()),
        1 => random_subgraph(rng, rule.rhs()),
        _ => random_graph(rng, 3, 3),
    };
    let g = if rng.random_bool(0.9) {
        extend(rng, rule.lhs(), max_nodes, 4)
    } else {
        random_graph(rng, max_nodes, 6)
    };
    let rate = Rational::new(rng.random_range(1..=9), rng.random_range(1..=4));
    let obs = Observable::new(&f);
    let symbolic = jump(&rule, &obs).map_err(|e| e.to_string())?.eval(&g) * rate;
    let g = Arc::new(g);
    let before = count_matches(&f, &g) as i128;
    let zero = Rational::from_integer(0);
    let mut direct = zero;
    let matches = enumerate_matches(rule.lhs(), &g);
    for m in &matches {
        let after = count_matches(&f, derive(&rule, m).comatch.cod()) as i128;
        direct += rate * Rational::from_integer(after - before);
    }
    let model = Model {
        rules: vec![NamedRule { name: "r".into(), rule, rate }],
        ..Model::default()
    };
    let generator = generator_action(&model, &g, &LinearCombination::single(Rational::from_integer(1), obs))
        .map_err(|e| e.to_string())?;
    if symbolic != direct || generator != direct {
        return Err(format!("symbolic {symbolic}, direct {direct}, generator {generator}"));
    }
    Ok(Some(direct != zero))
}

/// Runs `check` on `seed, seed + 1, ...` until `want` instances were
/// checked. Instances a check declines (`Ok(None)`) are counted as skipped.
pub fn run_suite(
    check: Check,
    seed: u64,
    want: usize,
    max_nodes: usize,
) -> Result<Tally, String> {
    let mut tally = Tally::default();
    let mut s = seed;
    while tally.checked < want {
        if tally.skipped > 20 * want {
            return Err(format!("only {} of {want} instances generated", tally.checked));
        }
        let mut r = rng(s);
        match check(&mut r, max_nodes) {
            Ok(Some(nontrivial)) => {
                tally.checked += 1;
                tally.interesting += nontrivial as usize;
            }
            Ok(None) => tally.skipped += 1,
            Err(msg) => return Err(format!("seed {s}: {msg}")),
        }
        s += 1;
    }
    Ok(tally)
}

/// Pairwise non-isomorphic graphs with at most `max_nodes` nodes: a fixed
/// list of small shapes topped up with random graphs.
pub fn corpus(seed: u64, max_nodes: usize, size: usize) -> Vec<Arc<Graph>> {
    let fixed = [
        Graph::new(),
        rategraph_core::graph::graph(&[0], &[]),
        rategraph_core::graph::graph(&[1], &[]),
        rategraph_core::graph::graph(&[0], &[(0, 0, 0)]),
        rategraph_core::graph::graph(&[0, 0], &[(0, 1, 0)]),
        rategraph_core::graph::graph(&[0, 1], &[(0, 1, 1)]),
        rategraph_core::graph::graph(&[0, 0], &[(0, 1, 0), (1, 0, 0)]),
        rategraph_core::graph::graph(&[0, 0], &[(0, 1, 0), (0, 1, 0)]),
        rategraph_core::graph::graph(&[0, 0, 0], &[(0, 1, 0), (1, 2, 0)]),
        rategraph_core::graph::graph(&[0, 0, 0], &[(0, 1, 0), (1, 2, 0), (2, 0, 0)]),
        rategraph_core::graph::graph(&[0, 0, 0, 0], &[(0, 1, 0), (0, 2, 0), (0, 3, 0)]),
    ];
    let mut out: Vec<Arc<Graph>> = Vec::new();
    let mut keys = std::collections::BTreeSet::new();
    let mut r = rng(seed);
    let mut push = |g: Graph, out: &mut Vec<Arc<Graph>>| {
        if g.node_count() <= max_nodes && keys.insert(canonical_key(&g)) {
            out.push(Arc::new(g));
        }
    };
    for g in fixed {
        push(g, &mut out);
    }
    while out.len() < size {
        let g = random_graph(&mut r, max_nodes, 4);
        push(g, &mut out);
    }
    out.truncate(size);
    out
}

/// `Σ_μ ⟨tip μ⟩(G)` against `⟨L⟩(G) · ⟨F⟩(G)` for every triple of the corpus.
/// Returns the number of triples checked.
pub fn counting_identity(graphs: &[Arc<Graph>]) -> Result<usize, String> {
    let mut checked = 0;
    for (i, l) in graphs.iter().enumerate() {
        for (j, f) in graphs.iter().enumerate() {
            let gluings = rategraph_core::gluing::minimal_gluings(l, f);
            for (k, g) in graphs.iter().enumerate() {
                let product = count_matches(l, g) * count_matches(f, g);
                let sum: u128 = gluings.iter().map(|m| count_matches(m.tip(), g)).sum();
                if product != sum {
                    return Err(format!("triple ({i}, {j}, {k}): {product} != {sum}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}
