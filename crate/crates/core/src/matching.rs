//! Enumeration of matches (injective morphisms) by backtracking.
//!
//! Pattern nodes are assigned first, in an order that favours nodes with
//! many already-placed neighbours, with label, degree and adjacency
//! multiplicity pruning. Edges are placed once both endpoints are fixed:
//! the parallel pattern edges between a pair of nodes are mapped
//! injectively onto the parallel target edges with the same label.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::graph::{Graph, Label};
use crate::morphism::Morphism;

/// Partial assignment that every enumerated match must extend.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Seed {
    pub nodes: Vec<Option<usize>>,
    pub edges: Vec<Option<usize>>,
}

impl Seed {
    pub fn empty(pattern: &Graph) -> Self {
        Self {
            nodes: alloc::vec![None; pattern.node_count()],
            edges: alloc::vec![None; pattern.edge_count()],
        }
    }

    /// The assignment forced on `S -> G` by requiring `x ∘ inner = outer`
    /// for `inner: P -> S` mono and `outer: P -> G`.
    pub fn through(inner: &Morphism, outer: &Morphism) -> Self {
        let mut seed = Self::empty(inner.cod());
        for (p, &s) in inner.node_map().iter().enumerate() {
            seed.nodes[s] = Some(outer.node(p));
        }
        for (p, &s) in inner.edge_map().iter().enumerate() {
            seed.edges[s] = Some(outer.edge(p));
        }
        seed
    }
}

type Triple = (usize, usize, Label);

/// Callback receiving node and edge images of a complete match.
type Visit<'v, B> = dyn FnMut(&[usize], &[usize]) -> ControlFlow<B> + 'v;

struct Group {
    src: usize,
    tgt: usize,
    label: Label,
    edges: Vec<usize>,
}

struct Plan<'a> {
    pattern: &'a Graph,
    target: &'a Graph,
    seed: Option<&'a Seed>,
    order: Vec<usize>,
    groups: Vec<Group>,
    /// For every pattern node, the groups it is an endpoint of.
    node_groups: Vec<Vec<usize>>,
    pairs: BTreeMap<Triple, Vec<usize>>,
    pat_out: Vec<usize>,
    pat_in: Vec<usize>,
    tgt_out: Vec<usize>,
    tgt_in: Vec<usize>,
}

impl<'a> Plan<'a> {
    fn new(pattern: &'a Graph, target: &'a Graph, seed: Option<&'a Seed>) -> Self {
        let mut group_index: BTreeMap<Triple, usize> = BTreeMap::new();
        let mut groups: Vec<Group> = Vec::new();
        let mut node_groups = alloc::vec![Vec::new(); pattern.node_count()];
        for (i, e) in pattern.edges().iter().enumerate() {
            let key = (e.src, e.tgt, e.label);
            let gi = *group_index.entry(key).or_insert_with(|| {
                groups.push(Group { src: e.src, tgt: e.tgt, label: e.label, edges: Vec::new() });
                node_groups[e.src].push(groups.len() - 1);
                if e.tgt != e.src {
                    node_groups[e.tgt].push(groups.len() - 1);
                }
                groups.len() - 1
            });
            groups[gi].edges.push(i);
        }
        let mut pairs: BTreeMap<Triple, Vec<usize>> = BTreeMap::new();
        for (i, e) in target.edges().iter().enumerate() {
            pairs.entry((e.src, e.tgt, e.label)).or_default().push(i);
        }
        let degrees = |g: &Graph| {
            let mut out = alloc::vec![0; g.node_count()];
            let mut inn = alloc::vec![0; g.node_count()];
            for e in g.edges() {
                out[e.src] += 1;
                inn[e.tgt] += 1;
            }
            (out, inn)
        };
        let (pat_out, pat_in) = degrees(pattern);
        let (tgt_out, tgt_in) = degrees(target);

        // Seeded nodes first, then greedily by connectivity to placed nodes.
        let n = pattern.node_count();
        let mut placed = alloc::vec![false; n];
        let mut order = Vec::with_capacity(n);
        if let Some(s) = seed {
            for (p, img) in s.nodes.iter().enumerate() {
                if img.is_some() {
                    placed[p] = true;
                    order.push(p);
                }
            }
        }
        let mut links = alloc::vec![0usize; n];
        while order.len() < n {
            let next = (0..n)
                .filter(|&p| !placed[p])
                .max_by_key(|&p| (links[p], pat_out[p] + pat_in[p], core::cmp::Reverse(p)))
                .unwrap();
            placed[next] = true;
            order.push(next);
            for &gi in &node_groups[next] {
                let g = &groups[gi];
                links[g.src] += 1;
                links[g.tgt] += 1;
            }
        }
        Self {
            pattern,
            target,
            seed,
            order,
            groups,
            node_groups,
            pairs,
            pat_out,
            pat_in,
            tgt_out,
            tgt_in,
        }
    }

    fn parallel(&self, s: usize, t: usize, l: Label) -> &[usize] {
        self.pairs.get(&(s, t, l)).map(Vec::as_slice).unwrap_or(&[])
    }

    fn node_ok(&self, p: usize, t: usize, img: &[usize]) -> bool {
        if self.pattern.node(p).label != self.target.node(t).label
            || self.pat_out[p] > self.tgt_out[t]
            || self.pat_in[p] > self.tgt_in[t]
        {
            return false;
        }
        self.node_groups[p].iter().all(|&gi| {
            let g = &self.groups[gi];
            let (s, u) = (img_or(img, g.src, p, t), img_or(img, g.tgt, p, t));
            match (s, u) {
                (Some(s), Some(u)) => self.parallel(s, u, g.label).len() >= g.edges.len(),
                _ => true,
            }
        })
    }

    fn run<B>(
        &self,
        depth: usize,
        img: &mut Vec<usize>,
        used: &mut Vec<bool>,
        leaf: &mut dyn FnMut(&[usize]) -> ControlFlow<B>,
    ) -> ControlFlow<B> {
        if depth == self.order.len() {
            return leaf(img);
        }
        let p = self.order[depth];
        let forced = self.seed.and_then(|s| s.nodes[p]);
        let (lo, hi) = match forced {
            Some(t) => (t, (t + 1).min(used.len())),
            None => (0, used.len()),
        };
        for t in lo..hi {
            if used[t] || !self.node_ok(p, t, img) {
                continue;
            }
            img[p] = t;
            used[t] = true;
            let flow = self.run(depth + 1, img, used, leaf);
            used[t] = false;
            img[p] = usize::MAX;
            flow?;
        }
        ControlFlow::Continue(())
    }

    /// Number of edge assignments extending a complete node assignment.
    fn edge_count(&self, img: &[usize]) -> u128 {
        let mut total: u128 = 1;
        for g in &self.groups {
            let avail = self.parallel(img[g.src], img[g.tgt], g.label);
            let mut free = avail.len();
            let mut todo = g.edges.len();
            if let Some(seed) = self.seed {
                let mut taken: Vec<usize> = Vec::new();
                for &e in &g.edges {
                    if let Some(x) = seed.edges[e] {
                        if !avail.contains(&x) || taken.contains(&x) {
                            return 0;
                        }
                        taken.push(x);
                        todo -= 1;
                    }
                }
                free -= taken.len();
            }
            if todo > free {
                return 0;
            }
            for k in 0..todo {
                total *= (free - k) as u128;
            }
        }
        total
    }

    fn edges<B>(
        &self,
        gi: usize,
        k: usize,
        nimg: &[usize],
        eimg: &mut Vec<usize>,
        used: &mut Vec<bool>,
        visit: &mut Visit<'_, B>,
    ) -> ControlFlow<B> {
        if gi == self.groups.len() {
            return visit(nimg, eimg);
        }
        let g = &self.groups[gi];
        if k == g.edges.len() {
            return self.edges(gi + 1, 0, nimg, eimg, used, visit);
        }
        let e = g.edges[k];
        let avail = self.parallel(nimg[g.src], nimg[g.tgt], g.label);
        let forced = self.seed.and_then(|s| s.edges[e]);
        for &x in avail {
            if used[x] || forced.is_some_and(|f| f != x) {
                continue;
            }
            // A seeded edge elsewhere in the group owns its target edge.
            if forced.is_none()
                && self.seed.is_some_and(|s| g.edges.iter().any(|&o| s.edges[o] == Some(x)))
            {
                continue;
            }
            eimg[e] = x;
            used[x] = true;
            let flow = self.edges(gi, k + 1, nimg, eimg, used, visit);
            used[x] = false;
            flow?;
        }
        ControlFlow::Continue(())
    }
}

fn img_or(img: &[usize], q: usize, p: usize, t: usize) -> Option<usize> {
    if q == p {
        Some(t)
    } else if img[q] != usize::MAX {
        Some(img[q])
    } else {
        None
    }
}

/// Calls `visit(node_map, edge_map)` for every match of `pattern` in
/// `target` extending `seed`; stops early on `Break`.
pub fn for_each_match<B>(
    pattern: &Graph,
    target: &Graph,
    seed: Option<&Seed>,
    mut visit: impl FnMut(&[usize], &[usize]) -> ControlFlow<B>,
) -> ControlFlow<B> {
    if pattern.node_count() > target.node_count() || pattern.edge_count() > target.edge_count() {
        return ControlFlow::Continue(());
    }
    let plan = Plan::new(pattern, target, seed);
    let mut img = alloc::vec![usize::MAX; pattern.node_count()];
    let mut used = alloc::vec![false; target.node_count()];
    let mut eimg = alloc::vec![usize::MAX; pattern.edge_count()];
    let mut eused = alloc::vec![false; target.edge_count()];
    plan.run(0, &mut img, &mut used, &mut |nimg| {
        plan.edges(0, 0, nimg, &mut eimg, &mut eused, &mut visit)
    })
}

/// Number of matches of `pattern` in `target` extending `seed`, without
/// materialising edge permutations.
pub fn count_matches_seeded(pattern: &Graph, target: &Graph, seed: Option<&Seed>) -> u128 {
    if pattern.node_count() > target.node_count() || pattern.edge_count() > target.edge_count() {
        return 0;
    }
    let plan = Plan::new(pattern, target, seed);
    let mut img = alloc::vec![usize::MAX; pattern.node_count()];
    let mut used = alloc::vec![false; target.node_count()];
    let mut total = 0u128;
    let _ = plan.run::<()>(0, &mut img, &mut used, &mut |nimg| {
        total += plan.edge_count(nimg);
        ControlFlow::Continue(())
    });
    total
}

/// `⟨pattern⟩(target)`: the number of matches.
pub fn count_matches(pattern: &Graph, target: &Graph) -> u128 {
    count_matches_seeded(pattern, target, None)
}

/// All matches, sorted lexicographically by target ids (nodes first, then
/// edges, in pattern order).
pub fn enumerate_matches(pattern: &Arc<Graph>, target: &Arc<Graph>) -> Vec<Morphism> {
    enumerate_matches_seeded(pattern, target, None)
}

pub fn enumerate_matches_seeded(
    pattern: &Arc<Graph>,
    target: &Arc<Graph>,
    seed: Option<&Seed>,
) -> Vec<Morphism> {
    let mut raw: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let _ = for_each_match::<()>(pattern, target, seed, |n, e| {
        raw.push((n.to_vec(), e.to_vec()));
        ControlFlow::Continue(())
    });
    let key = |(n, e): &(Vec<usize>, Vec<usize>)| -> (Vec<u32>, Vec<u32>) {
        (
            n.iter().map(|&v| target.node(v).id.0).collect(),
            e.iter().map(|&x| target.edge(x).id.0).collect(),
        )
    };
    raw.sort_by_cached_key(key);
    raw.into_iter()
        .map(|(n, e)| Morphism::trusted(pattern.clone(), target.clone(), n, e))
        .collect()
}

/// An isomorphism `a -> b` extending `seed`, as position maps.
pub fn find_isomorphism(
    a: &Graph,
    b: &Graph,
    seed: Option<&Seed>,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return None;
    }
    // A bijective morphism of finite graphs is an isomorphism.
    match for_each_match(a, b, seed, |n, e| ControlFlow::Break((n.to_vec(), e.to_vec()))) {
        ControlFlow::Break(found) => Some(found),
        ControlFlow::Continue(()) => None,
    }
}
