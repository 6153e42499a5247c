//! Single-pushout rewriting with monic matches.
//!
//! A rule is a span `L <- K -> R` of monos. Applying it to a match
//! `f: L -> G` deletes everything in `f(L)` outside the image of `K`,
//! together with every edge left dangling (the final pullback
//! complement), and then glues in the part of `R` outside `K` (a pushout
//! along the right leg). Created items receive ids above every id of `G`,
//! so the representative derivation is a function of `(rule, match)`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::graph::{EdgeId, Graph, GraphError, NodeId};
use crate::matching::{find_isomorphism, Seed};
use crate::morphism::{Morphism, MorphismError, PartialMap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("expected a mono")]
    NotMono,
    #[error("morphisms do not share the required domain or codomain")]
    Mismatch,
    #[error("pushout needs at least one monic leg")]
    NonMonoSpan,
    #[error("correspondence maps {0} twice")]
    NotInjective(&'static str),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A rule `L <- K -> R` with both legs mono.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    left: Morphism,
    right: Morphism,
}

impl Rule {
    pub fn new(left: Morphism, right: Morphism) -> Result<Self, RewriteError> {
        if *left.dom() != *right.dom() {
            return Err(RewriteError::Mismatch);
        }
        if !left.is_mono() || !right.is_mono() {
            return Err(RewriteError::NotMono);
        }
        let right = right.with_dom(left.dom().clone());
        Ok(Self { left, right })
    }

    /// Builds the span from a list of preserved items: `K` is the part of
    /// `lhs` named on the left of the pairs, mapped into `rhs` by the pairs.
    /// Unlisted left items are deleted, unlisted right items are created.
    pub fn from_correspondence(
        lhs: Arc<Graph>,
        rhs: Arc<Graph>,
        nodes: &[(NodeId, NodeId)],
        edges: &[(EdgeId, EdgeId)],
    ) -> Result<Self, RewriteError> {
        let kn = nodes.iter().map(|p| p.0).collect();
        let ke = edges.iter().map(|p| p.0).collect();
        let ker = Arc::new(lhs.subgraph(&kn, &ke)?);
        if ker.node_count() != nodes.len() {
            return Err(RewriteError::NotInjective("a left node"));
        }
        if ker.edge_count() != edges.len() {
            return Err(RewriteError::NotInjective("a left edge"));
        }
        let mut nmap = Vec::with_capacity(ker.node_count());
        for n in ker.nodes() {
            let (_, r) = nodes.iter().find(|p| p.0 == n.id).unwrap();
            nmap.push(rhs.node_pos(*r).ok_or(GraphError::UnknownNode(*r))?);
        }
        let mut emap = Vec::with_capacity(ker.edge_count());
        for e in ker.edges() {
            let (_, r) = edges.iter().find(|p| p.0 == e.id).unwrap();
            emap.push(rhs.edge_pos(*r).ok_or(GraphError::UnknownEdge(*r))?);
        }
        let left = Morphism::inclusion(ker.clone(), lhs).expect("kernel is a subgraph");
        let right = Morphism::new(ker, rhs, nmap, emap)?;
        if !right.is_mono() {
            return Err(RewriteError::NotInjective("a right item"));
        }
        Self::new(left, right)
    }

    pub fn identity(g: Arc<Graph>) -> Self {
        let id = Morphism::identity(g);
        Self { left: id.clone(), right: id }
    }

    pub fn lhs(&self) -> &Arc<Graph> {
        self.left.cod()
    }

    pub fn rhs(&self) -> &Arc<Graph> {
        self.right.cod()
    }

    pub fn ker(&self) -> &Arc<Graph> {
        self.left.dom()
    }

    pub fn left(&self) -> &Morphism {
        &self.left
    }

    pub fn right(&self) -> &Morphism {
        &self.right
    }

    /// Swaps the legs; an involution.
    pub fn reverse(&self) -> Rule {
        Rule { left: self.right.clone(), right: self.left.clone() }
    }

    /// `next ∘ self` as partial maps: the kernel is the pullback of
    /// `self`'s right leg and `next`'s left leg.
    pub fn compose(&self, next: &Rule) -> Result<Rule, RewriteError> {
        if *self.rhs() != *next.lhs() {
            return Err(RewriteError::Mismatch);
        }
        let (p1, p2) = pullback(&self.right, &next.left.with_cod(self.rhs().clone()))?;
        Rule::new(p1.then(&self.left)?, p2.then(&next.right)?)
    }

    pub fn as_partial(&self) -> PartialMap {
        PartialMap::from_span(&self.left, &self.right)
    }
}

impl Morphism {
    pub(crate) fn with_dom(&self, dom: Arc<Graph>) -> Morphism {
        debug_assert_eq!(*dom, **self.dom());
        Morphism::trusted(dom, self.cod().clone(), self.node_map().to_vec(), self.edge_map().to_vec())
    }
}

/// Pushout of a span `B <-m- A -n-> C` with `m` mono (or `n` mono, in
/// which case the roles are swapped). Returns the cospan `(B -> P, C -> P)`.
pub fn pushout(m: &Morphism, n: &Morphism) -> Result<(Morphism, Morphism), RewriteError> {
    if *m.dom() != *n.dom() {
        return Err(RewriteError::Mismatch);
    }
    if m.is_mono() {
        let floor = (n.cod().fresh_node_id(), n.cod().fresh_edge_id());
        Ok(pushout_along_mono(m, n, floor))
    } else if n.is_mono() {
        let floor = (m.cod().fresh_node_id(), m.cod().fresh_edge_id());
        let (c, b) = pushout_along_mono(n, m, floor);
        Ok((b, c))
    } else {
        Err(RewriteError::NonMonoSpan)
    }
}

/// `P = C + (B minus m(A))`; fresh items of `P` get ids counting up from
/// `floor`.
fn pushout_along_mono(
    m: &Morphism,
    n: &Morphism,
    floor: (NodeId, EdgeId),
) -> (Morphism, Morphism) {
    let b = m.cod();
    let c = n.cod();
    let mut p = (**c).clone();
    let (pre_n, pre_e) = m.preimages();
    let mut next_node = floor.0 .0.max(c.fresh_node_id().0);
    let mut next_edge = floor.1 .0.max(c.fresh_edge_id().0);
    let mut bn = Vec::with_capacity(b.node_count());
    for (i, node) in b.nodes().iter().enumerate() {
        match pre_n[i] {
            Some(a) => bn.push(n.node(a)),
            None => {
                bn.push(p.add_node(NodeId(next_node), node.label).expect("fresh"));
                next_node += 1;
            }
        }
    }
    let mut be = Vec::with_capacity(b.edge_count());
    for (i, edge) in b.edges().iter().enumerate() {
        match pre_e[i] {
            Some(a) => be.push(n.edge(a)),
            None => {
                be.push(
                    p.add_edge_at(EdgeId(next_edge), bn[edge.src], bn[edge.tgt], edge.label)
                        .expect("fresh"),
                );
                next_edge += 1;
            }
        }
    }
    let p = Arc::new(p);
    let cn: Vec<usize> = (0..c.node_count()).collect();
    let ce: Vec<usize> = (0..c.edge_count()).collect();
    (
        Morphism::trusted(b.clone(), p.clone(), bn, be),
        Morphism::trusted(c.clone(), p, cn, ce),
    )
}

/// Pullback of a cospan `X -f1-> Z <-f2- Y`: the fibred product on nodes
/// and edges. When the projection to `X` is injective the apex keeps
/// `X`'s ids.
pub fn pullback(f1: &Morphism, f2: &Morphism) -> Result<(Morphism, Morphism), RewriteError> {
    if *f1.cod() != *f2.cod() {
        return Err(RewriteError::Mismatch);
    }
    let (x, y) = (f1.dom(), f2.dom());
    let mut node_pairs = Vec::new();
    for i in 0..x.node_count() {
        for j in 0..y.node_count() {
            if f1.node(i) == f2.node(j) {
                node_pairs.push((i, j));
            }
        }
    }
    let mut edge_pairs = Vec::new();
    for i in 0..x.edge_count() {
        for j in 0..y.edge_count() {
            if f1.edge(i) == f2.edge(j) {
                edge_pairs.push((i, j));
            }
        }
    }
    let keeps_x_ids = is_injective(node_pairs.iter().map(|p| p.0))
        && is_injective(edge_pairs.iter().map(|p| p.0));
    let mut p = Graph::new();
    for (k, &(i, _)) in node_pairs.iter().enumerate() {
        let id = if keeps_x_ids { x.node(i).id } else { NodeId(k as u32) };
        p.add_node(id, x.node(i).label)?;
    }
    for (k, &(i, j)) in edge_pairs.iter().enumerate() {
        let (ex, ey) = (x.edge(i), y.edge(j));
        let s = node_pairs.iter().position(|&q| q == (ex.src, ey.src)).unwrap();
        let t = node_pairs.iter().position(|&q| q == (ex.tgt, ey.tgt)).unwrap();
        let id = if keeps_x_ids { ex.id } else { EdgeId(k as u32) };
        p.add_edge_at(id, s, t, ex.label)?;
    }
    let p = Arc::new(p);
    let px = Morphism::trusted(
        p.clone(),
        x.clone(),
        node_pairs.iter().map(|q| q.0).collect(),
        edge_pairs.iter().map(|q| q.0).collect(),
    );
    let py = Morphism::trusted(
        p,
        y.clone(),
        node_pairs.iter().map(|q| q.1).collect(),
        edge_pairs.iter().map(|q| q.1).collect(),
    );
    Ok((px, py))
}

fn is_injective(xs: impl Iterator<Item = usize>) -> bool {
    let mut v: Vec<usize> = xs.collect();
    let n = v.len();
    v.sort_unstable();
    v.dedup();
    v.len() == n
}

/// Final pullback complement of `K -k-> L -f-> G` (both mono): `D` is `G`
/// without `f(L \ k(K))` and without the edges that would dangle.
/// Returns `(K -> D, D -> G)`.
pub fn final_pullback_complement(
    k: &Morphism,
    f: &Morphism,
) -> Result<(Morphism, Morphism), RewriteError> {
    if *k.cod() != *f.dom() {
        return Err(RewriteError::Mismatch);
    }
    if !k.is_mono() || !f.is_mono() {
        return Err(RewriteError::NotMono);
    }
    let g = f.cod();
    let (kept_n, kept_e) = k.preimages();
    let mut keep_n = alloc::vec![true; g.node_count()];
    let mut keep_e = alloc::vec![true; g.edge_count()];
    for (l, &v) in f.node_map().iter().enumerate() {
        if kept_n[l].is_none() {
            keep_n[v] = false;
        }
    }
    for (l, &e) in f.edge_map().iter().enumerate() {
        if kept_e[l].is_none() {
            keep_e[e] = false;
        }
    }
    for (i, e) in g.edges().iter().enumerate() {
        if !keep_n[e.src] || !keep_n[e.tgt] {
            keep_e[i] = false;
        }
    }
    let d = Arc::new(g.induced(&keep_n, &keep_e)?);
    let mut pos_n = alloc::vec![usize::MAX; g.node_count()];
    let mut pos_e = alloc::vec![usize::MAX; g.edge_count()];
    let (mut cn, mut ce) = (0, 0);
    let mut dn = Vec::new();
    let mut de = Vec::new();
    for (i, &kept) in keep_n.iter().enumerate() {
        if kept {
            pos_n[i] = cn;
            cn += 1;
            dn.push(i);
        }
    }
    for (i, &kept) in keep_e.iter().enumerate() {
        if kept {
            pos_e[i] = ce;
            ce += 1;
            de.push(i);
        }
    }
    let kd = Morphism::trusted(
        k.dom().clone(),
        d.clone(),
        k.node_map().iter().map(|&l| pos_n[f.node(l)]).collect(),
        k.edge_map().iter().map(|&l| pos_e[f.edge(l)]).collect(),
    );
    let dg = Morphism::trusted(d, g.clone(), dn, de);
    Ok((kd, dg))
}

/// A derivation `f ⇝ g`: the square
///
/// ```text
///   L <- K -> R
///   f    h    g
///   G <- D -> H
/// ```
///
/// with the bottom row kept as the corule `G ⇀ H`.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub rule: Rule,
    pub matching: Morphism,
    pub inner: Morphism,
    pub corule: Rule,
    pub comatch: Morphism,
}

impl Derivation {
    pub fn source(&self) -> &Arc<Graph> {
        self.matching.cod()
    }

    pub fn result(&self) -> &Arc<Graph> {
        self.comatch.cod()
    }

    /// Whether this derivation equals `(comatch, corule)` up to an
    /// isomorphism of results commuting with both. `corule` is the
    /// partial map `G ⇀ cod(comatch)`; pass `None` to compare comatches only.
    pub fn agrees_with(&self, comatch: &Morphism, corule: Option<&PartialMap>) -> bool {
        let (h, other) = (self.result(), comatch.cod());
        let mut seed = Seed::empty(h);
        if comatch.dom().node_count() != self.comatch.dom().node_count() {
            return false;
        }
        for r in 0..self.comatch.dom().node_count() {
            seed.nodes[self.comatch.node(r)] = Some(comatch.node(r));
        }
        for r in 0..self.comatch.dom().edge_count() {
            seed.edges[self.comatch.edge(r)] = Some(comatch.edge(r));
        }
        if let Some(beta) = corule {
            let mine = self.corule.as_partial();
            if !merge_partial(&mine.nodes, &beta.nodes, &mut seed.nodes)
                || !merge_partial(&mine.edges, &beta.edges, &mut seed.edges)
            {
                return false;
            }
        }
        find_isomorphism(h, other, Some(&seed)).is_some()
    }
}

fn merge_partial(
    mine: &[Option<usize>],
    theirs: &[Option<usize>],
    seed: &mut [Option<usize>],
) -> bool {
    if mine.len() != theirs.len() {
        return false;
    }
    for (a, b) in mine.iter().zip(theirs) {
        match (a, b) {
            (None, None) => {}
            (Some(x), Some(y)) => match seed[*x] {
                Some(z) if z != *y => return false,
                _ => seed[*x] = Some(*y),
            },
            _ => return false,
        }
    }
    true
}

/// The representative derivation of `rule` at match `f`.
pub fn apply_rule(rule: &Rule, f: &Morphism) -> Result<Derivation, RewriteError> {
    if **f.dom() != **rule.lhs() {
        return Err(RewriteError::Mismatch);
    }
    if !f.is_mono() {
        return Err(RewriteError::NotMono);
    }
    let f = f.with_dom(rule.lhs().clone());
    let (h, d_to_g) = final_pullback_complement(rule.left(), &f)?;
    let g = f.cod();
    let floor = (g.fresh_node_id(), g.fresh_edge_id());
    let (comatch, d_to_h) = pushout_along_mono(rule.right(), &h, floor);
    let corule = Rule { left: d_to_g, right: d_to_h };
    Ok(Derivation { rule: rule.clone(), matching: f, inner: h, corule, comatch })
}

/// Tests whether `g: R -> H` is the comatch of some derivation by `rule`:
/// apply the reverse rule to `g`, re-apply `rule` to the resulting match
/// and compare with `g` up to an isomorphism of `H` fixing `g`. Returns
/// the reverse derivation (whose comatch is the witness) when it is.
pub fn derivable_witness(rule: &Rule, g: &Morphism) -> Result<Option<Derivation>, RewriteError> {
    let back = apply_rule(&rule.reverse(), g)?;
    let forth = apply_rule(rule, &back.comatch)?;
    Ok(forth.agrees_with(g, None).then_some(back))
}

pub fn is_derivable(rule: &Rule, g: &Morphism) -> Result<bool, RewriteError> {
    Ok(derivable_witness(rule, g)?.is_some())
}
