//! Minimal gluings of two graphs.
//!
//! A minimal gluing of `G1` and `G2` is determined by which items of `G1`
//! are identified with which items of `G2`: a partial injection that is a
//! graph isomorphism between a subgraph of `G1` and a subgraph of `G2`.
//! The tip is the pushout of `G1 ⊇ S -> G2` over that common subgraph.
//! Two minimal gluings are isomorphic (by an isomorphism commuting with
//! both injections) exactly when they identify the same items, so
//! enumerating the partial injections enumerates the classes.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::canon::{canonical_key, CanonicalKey};
use crate::graph::Graph;
use crate::matching::{find_isomorphism, Seed};
use crate::morphism::Morphism;
use crate::rewrite::{pushout, RewriteError};

/// Identified pairs `(item of G1, item of G2)`, sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Overlap {
    pub nodes: Vec<(usize, usize)>,
    pub edges: Vec<(usize, usize)>,
}

impl Overlap {
    pub fn size(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }
}

#[derive(Clone, Debug)]
pub struct MinimalGluing {
    /// `G1 -> U`
    pub left: Morphism,
    /// `G2 -> U`
    pub right: Morphism,
    /// The common subgraph of `G1` the span was built from.
    pub overlap: Arc<Graph>,
    pub identified: Overlap,
    /// Canonical key of the tip.
    pub key: CanonicalKey,
}

impl MinimalGluing {
    pub fn tip(&self) -> &Arc<Graph> {
        self.left.cod()
    }

    pub fn overlap_size(&self) -> usize {
        self.identified.size()
    }

    /// Pushout of the span `G1 ⊇ S -> G2` described by `identified`.
    pub fn from_overlap(
        g1: &Arc<Graph>,
        g2: &Arc<Graph>,
        identified: Overlap,
    ) -> Result<Self, RewriteError> {
        let mut kn = alloc::vec![false; g1.node_count()];
        let mut ke = alloc::vec![false; g1.edge_count()];
        for &(a, _) in &identified.nodes {
            kn[a] = true;
        }
        for &(a, _) in &identified.edges {
            ke[a] = true;
        }
        let s = Arc::new(g1.induced(&kn, &ke)?);
        let into_g1 = Morphism::inclusion(s.clone(), g1.clone()).expect("subgraph");
        // Induced subgraphs keep the relative order of items, so the pairs
        // (sorted by G1 position) line up with S's positions.
        let into_g2 = Morphism::new(
            s.clone(),
            g2.clone(),
            identified.nodes.iter().map(|p| p.1).collect(),
            identified.edges.iter().map(|p| p.1).collect(),
        )?;
        let (left, right) = pushout(&into_g1, &into_g2)?;
        let key = canonical_key(left.cod());
        Ok(Self { left, right, overlap: s, identified, key })
    }

    /// An isomorphism of tips commuting with both injections, if any.
    pub fn isomorphic_to(&self, other: &MinimalGluing) -> bool {
        let mut seed = Seed::empty(self.tip());
        let pairs = [(&self.left, &other.left), (&self.right, &other.right)];
        for (mine, theirs) in pairs {
            for i in 0..mine.dom().node_count() {
                let slot = &mut seed.nodes[mine.node(i)];
                if slot.is_some_and(|x| x != theirs.node(i)) {
                    return false;
                }
                *slot = Some(theirs.node(i));
            }
            for i in 0..mine.dom().edge_count() {
                let slot = &mut seed.edges[mine.edge(i)];
                if slot.is_some_and(|x| x != theirs.edge(i)) {
                    return false;
                }
                *slot = Some(theirs.edge(i));
            }
        }
        find_isomorphism(self.tip(), other.tip(), Some(&seed)).is_some()
    }
}

/// Calls `visit` with every partial injection between `g1` and `g2` that
/// is an isomorphism of subgraphs.
fn for_each_overlap(g1: &Graph, g2: &Graph, visit: &mut dyn FnMut(&Overlap)) {
    fn nodes(
        g1: &Graph,
        g2: &Graph,
        i: usize,
        img: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&Overlap),
    ) {
        if i == g1.node_count() {
            let mut eimg = alloc::vec![None; g1.edge_count()];
            let mut eused = alloc::vec![false; g2.edge_count()];
            let _ = edges(g1, g2, 0, img, &mut eimg, &mut eused, visit);
            return;
        }
        img[i] = None;
        nodes(g1, g2, i + 1, img, used, visit);
        for v in 0..g2.node_count() {
            if !used[v] && g1.node(i).label == g2.node(v).label {
                used[v] = true;
                img[i] = Some(v);
                nodes(g1, g2, i + 1, img, used, visit);
                used[v] = false;
                img[i] = None;
            }
        }
    }
    fn edges(
        g1: &Graph,
        g2: &Graph,
        i: usize,
        nimg: &[Option<usize>],
        eimg: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&Overlap),
    ) -> ControlFlow<()> {
        if i == g1.edge_count() {
            let o = Overlap {
                nodes: nimg.iter().enumerate().filter_map(|(a, b)| b.map(|b| (a, b))).collect(),
                edges: eimg.iter().enumerate().filter_map(|(a, b)| b.map(|b| (a, b))).collect(),
            };
            visit(&o);
            return ControlFlow::Continue(());
        }
        edges(g1, g2, i + 1, nimg, eimg, used, visit)?;
        let e = g1.edge(i);
        if let (Some(s), Some(t)) = (nimg[e.src], nimg[e.tgt]) {
            for x in 0..g2.edge_count() {
                let f = g2.edge(x);
                if !used[x] && f.src == s && f.tgt == t && f.label == e.label {
                    used[x] = true;
                    eimg[i] = Some(x);
                    edges(g1, g2, i + 1, nimg, eimg, used, visit)?;
                    used[x] = false;
                    eimg[i] = None;
                }
            }
        }
        ControlFlow::Continue(())
    }
    let mut img = alloc::vec![None; g1.node_count()];
    let mut used = alloc::vec![false; g2.node_count()];
    nodes(g1, g2, 0, &mut img, &mut used, visit);
}

/// One representative per isomorphism class of minimal gluings, ordered by
/// overlap size (largest first), then by tip key.
pub fn minimal_gluings(g1: &Arc<Graph>, g2: &Arc<Graph>) -> Vec<MinimalGluing> {
    let mut overlaps = Vec::new();
    for_each_overlap(g1, g2, &mut |o| overlaps.push(o.clone()));
    let mut out: Vec<MinimalGluing> = overlaps
        .into_iter()
        .map(|o| MinimalGluing::from_overlap(g1, g2, o).expect("overlaps are valid spans"))
        .collect();
    out.sort_by(|a, b| {
        b.overlap_size()
            .cmp(&a.overlap_size())
            .then_with(|| a.key.cmp(&b.key))
            .then_with(|| a.identified.cmp(&b.identified))
    });
    out
}

/// Factors a pair of matches with a common codomain through its minimal
/// gluing: returns `μ` and the mono `u` with `f1 = u ∘ μ1`, `f2 = u ∘ μ2`.
pub fn factor_gluing(
    f1: &Morphism,
    f2: &Morphism,
) -> Result<(MinimalGluing, Morphism), RewriteError> {
    if *f1.cod() != *f2.cod() {
        return Err(RewriteError::Mismatch);
    }
    if !f1.is_mono() || !f2.is_mono() {
        return Err(RewriteError::NotMono);
    }
    let (p2n, p2e) = f2.preimages();
    let identified = Overlap {
        nodes: f1.node_map().iter().enumerate().filter_map(|(a, &h)| p2n[h].map(|b| (a, b))).collect(),
        edges: f1.edge_map().iter().enumerate().filter_map(|(a, &h)| p2e[h].map(|b| (a, b))).collect(),
    };
    let mu = MinimalGluing::from_overlap(f1.dom(), f2.dom(), identified)?;
    let tip = mu.tip();
    let mut un = alloc::vec![0usize; tip.node_count()];
    let mut ue = alloc::vec![0usize; tip.edge_count()];
    for (a, &h) in f1.node_map().iter().enumerate() {
        un[mu.left.node(a)] = h;
    }
    for (b, &h) in f2.node_map().iter().enumerate() {
        un[mu.right.node(b)] = h;
    }
    for (a, &h) in f1.edge_map().iter().enumerate() {
        ue[mu.left.edge(a)] = h;
    }
    for (b, &h) in f2.edge_map().iter().enumerate() {
        ue[mu.right.edge(b)] = h;
    }
    let u = Morphism::new(tip.clone(), f1.cod().clone(), un, ue)?;
    debug_assert!(u.is_mono());
    Ok((mu, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::is_isomorphic;
    use crate::graph::graph;
    use crate::matching::{count_matches, enumerate_matches};

    fn arc(g: Graph) -> Arc<Graph> {
        Arc::new(g)
    }

    #[test]
    fn two_nodes_glue_two_ways() {
        let n = arc(graph(&[0], &[]));
        let gs = minimal_gluings(&n, &n);
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0].tip().node_count(), 1);
        assert_eq!(gs[1].tip().node_count(), 2);
    }

    #[test]
    fn empty_graph_glues_once() {
        let g2 = arc(graph(&[0, 1], &[(0, 1, 0)]));
        let gs = minimal_gluings(&arc(Graph::new()), &g2);
        assert_eq!(gs.len(), 1);
        assert!(is_isomorphic(gs[0].tip(), &g2));
    }

    #[test]
    fn two_edges_glue_eight_ways() {
        let e = arc(graph(&[0, 0], &[(0, 1, 0)]));
        let gs = minimal_gluings(&e, &e);
        assert_eq!(gs.len(), 8);
        let parallel = graph(&[0, 0], &[(0, 1, 0), (0, 1, 0)]);
        let two_cycle = graph(&[0, 0], &[(0, 1, 0), (1, 0, 0)]);
        assert_eq!(gs.iter().filter(|g| is_isomorphic(g.tip(), &parallel)).count(), 1);
        assert_eq!(gs.iter().filter(|g| is_isomorphic(g.tip(), &two_cycle)).count(), 1);
        assert_eq!(gs.iter().filter(|g| g.tip().node_count() == 3).count(), 4);
        assert_eq!(gs[0].overlap_size(), 3);
        for (i, a) in gs.iter().enumerate() {
            for b in &gs[i + 1..] {
                assert!(!a.isomorphic_to(b));
            }
            assert!(a.isomorphic_to(a));
        }
    }

    #[test]
    fn factoring_identity_pair_gives_full_overlap() {
        let g = arc(graph(&[0, 0, 1], &[(0, 1, 0), (1, 2, 1)]));
        let id = Morphism::identity(g.clone());
        let (mu, u) = factor_gluing(&id, &id).unwrap();
        assert_eq!(mu.overlap_size(), g.size());
        assert!(u.is_mono());
        assert!(mu.left.then(&u).unwrap().same_maps(&id));
    }

    #[test]
    fn factoring_disjoint_pair_gives_disjoint_sum() {
        let a = arc(graph(&[0], &[]));
        let h = arc(graph(&[0, 0], &[]));
        let f1 = Morphism::new(a.clone(), h.clone(), alloc::vec![0], alloc::vec![]).unwrap();
        let f2 = Morphism::new(a.clone(), h.clone(), alloc::vec![1], alloc::vec![]).unwrap();
        let (mu, u) = factor_gluing(&f1, &f2).unwrap();
        assert_eq!(mu.overlap_size(), 0);
        assert!(mu.left.then(&u).unwrap().same_maps(&f1));
        assert!(mu.right.then(&u).unwrap().same_maps(&f2));
    }

    #[test]
    fn factorisation_is_unique_among_enumerated_gluings() {
        let g1 = arc(graph(&[0, 0], &[(0, 1, 0)]));
        let g2 = arc(graph(&[0, 0], &[(0, 1, 0)]));
        let h = arc(graph(&[0, 0, 0], &[(0, 1, 0), (1, 2, 0), (0, 1, 0)]));
        let all = minimal_gluings(&g1, &g2);
        for f1 in enumerate_matches(&g1, &h) {
            for f2 in enumerate_matches(&g2, &h) {
                let (mu, u) = factor_gluing(&f1, &f2).unwrap();
                let mut found = 0;
                for cand in &all {
                    for v in enumerate_matches(cand.tip(), &h) {
                        let ok1 = cand.left.then(&v).unwrap().same_maps(&f1);
                        let ok2 = cand.right.then(&v).unwrap().same_maps(&f2);
                        if ok1 && ok2 {
                            found += 1;
                            assert_eq!(cand.identified, mu.identified);
                            assert!(v.same_maps(&u));
                        }
                    }
                }
                assert_eq!(found, 1);
            }
        }
    }

    #[test]
    fn product_of_counts_is_sum_over_gluings() {
        let l = arc(graph(&[0, 0], &[(0, 1, 0)]));
        let f = arc(graph(&[0], &[(0, 0, 1)]));
        let g = graph(&[0, 0, 0], &[(0, 1, 0), (1, 1, 1), (1, 2, 0), (2, 2, 1)]);
        let lhs = count_matches(&l, &g) * count_matches(&f, &g);
        let rhs: u128 = minimal_gluings(&l, &f).iter().map(|m| count_matches(m.tip(), &g)).sum();
        assert_eq!(lhs, rhs);
    }
}
