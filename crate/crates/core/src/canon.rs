//! Canonical forms of labelled multigraphs.
//!
//! Colour refinement (label, then multisets of labelled neighbour
//! colours) orders the nodes into cells; the remaining ties are broken by
//! individualising nodes of the first non-singleton cell and refining
//! again. Every discrete partition reached this way yields a candidate
//! serialisation and the lexicographically least one is the canonical
//! form. Branches that differ by a transposition of twin nodes are
//! skipped, since they lead to the same serialisations.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{EdgeId, Graph, Label, NodeId};

/// Byte string identifying a graph up to isomorphism.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }
}

impl fmt::Debug for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalKey({})", self)
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Serialisation of a graph whose node positions are already canonical:
/// node count, node labels in order, edge count, then sorted
/// `(src, tgt, label)` triples.
fn code_for_order(g: &Graph, order: &[usize]) -> Vec<u32> {
    let mut pos = alloc::vec![0u32; g.node_count()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i as u32;
    }
    let mut triples: Vec<(u32, u32, u32)> =
        g.edges().iter().map(|e| (pos[e.src], pos[e.tgt], e.label.0)).collect();
    triples.sort_unstable();
    let mut code = Vec::with_capacity(2 + order.len() + 3 * triples.len());
    code.push(order.len() as u32);
    code.extend(order.iter().map(|&v| g.node(v).label.0));
    code.push(triples.len() as u32);
    for (s, t, l) in triples {
        code.extend([s, t, l]);
    }
    code
}

type Signature = (usize, Vec<(u8, u32, usize)>, usize);

struct Refiner<'a> {
    g: &'a Graph,
    /// Per node: (direction, label, neighbour) for every incident edge.
    incident: Vec<Vec<(u8, u32, usize)>>,
}

impl<'a> Refiner<'a> {
    fn new(g: &'a Graph) -> Self {
        let mut incident = alloc::vec![Vec::new(); g.node_count()];
        for e in g.edges() {
            if e.src == e.tgt {
                incident[e.src].push((2, e.label.0, e.src));
            } else {
                incident[e.src].push((0, e.label.0, e.tgt));
                incident[e.tgt].push((1, e.label.0, e.src));
            }
        }
        Self { g, incident }
    }

    /// Refines `colors` (cell ranks) to the coarsest stable partition
    /// below it. Cell order is derived from iso-invariant data only.
    fn refine(&self, colors: &mut [usize]) {
        let n = colors.len();
        let mut cells = count_cells(colors);
        loop {
            // (current cell, sorted incident (direction, label, neighbour cell), node)
            let mut sigs: Vec<Signature> = (0..n)
                .map(|v| {
                    let mut s: Vec<(u8, u32, usize)> =
                        self.incident[v].iter().map(|&(d, l, w)| (d, l, colors[w])).collect();
                    s.sort_unstable();
                    (colors[v], s, v)
                })
                .collect();
            sigs.sort_unstable();
            let mut rank = 0;
            for i in 0..n {
                if i > 0 && (sigs[i].0 != sigs[i - 1].0 || sigs[i].1 != sigs[i - 1].1) {
                    rank += 1;
                }
                colors[sigs[i].2] = rank;
            }
            let now = if n == 0 { 0 } else { rank + 1 };
            if now == cells {
                return;
            }
            cells = now;
        }
    }

    fn is_twin_swap(&self, u: usize, v: usize) -> bool {
        let swap = |x: usize| if x == u { v } else if x == v { u } else { x };
        let mut a: Vec<(usize, usize, Label)> =
            self.g.edges().iter().map(|e| (e.src, e.tgt, e.label)).collect();
        let mut b: Vec<(usize, usize, Label)> =
            self.g.edges().iter().map(|e| (swap(e.src), swap(e.tgt), e.label)).collect();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }

    fn search(&self, colors: &[usize], best: &mut Option<(Vec<u32>, Vec<usize>)>) {
        let n = colors.len();
        let mut sizes = alloc::vec![0usize; n];
        for &c in colors {
            sizes[c] += 1;
        }
        let Some(target) = (0..n).find(|&c| sizes[c] > 1) else {
            let mut order = alloc::vec![0usize; n];
            for (v, &c) in colors.iter().enumerate() {
                order[c] = v;
            }
            let code = code_for_order(self.g, &order);
            if best.as_ref().is_none_or(|(b, _)| code < *b) {
                *best = Some((code, order));
            }
            return;
        };
        let mut tried: Vec<usize> = Vec::new();
        for v in (0..n).filter(|&v| colors[v] == target) {
            if tried.iter().any(|&u| self.is_twin_swap(u, v)) {
                continue;
            }
            tried.push(v);
            let mut next: Vec<usize> = colors
                .iter()
                .enumerate()
                .map(|(w, &c)| if c > target || (c == target && w != v) { c + 1 } else { c })
                .collect();
            self.refine(&mut next);
            self.search(&next, best);
        }
    }
}

fn count_cells(colors: &[usize]) -> usize {
    let mut seen: Vec<usize> = colors.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Canonical node order of `g`.
pub fn canonical_order(g: &Graph) -> Vec<usize> {
    let r = Refiner::new(g);
    let mut labels: Vec<u32> = g.nodes().iter().map(|n| n.label.0).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut colors: Vec<usize> =
        g.nodes().iter().map(|n| labels.binary_search(&n.label.0).unwrap()).collect();
    r.refine(&mut colors);
    let mut best = None;
    r.search(&colors, &mut best);
    best.map(|(_, order)| order).unwrap_or_default()
}

/// The canonical representative of `g`'s isomorphism class, with node ids
/// equal to canonical positions and edges sorted by `(src, tgt, label)`.
pub fn canonical_form(g: &Graph) -> Graph {
    let order = canonical_order(g);
    relabel(g, &order)
}

fn relabel(g: &Graph, order: &[usize]) -> Graph {
    let mut pos = alloc::vec![0usize; g.node_count()];
    let mut out = Graph::new();
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
        out.add_node(NodeId(i as u32), g.node(v).label).unwrap();
    }
    let mut triples: Vec<(usize, usize, Label)> =
        g.edges().iter().map(|e| (pos[e.src], pos[e.tgt], e.label)).collect();
    triples.sort_unstable();
    for (i, (s, t, l)) in triples.into_iter().enumerate() {
        out.add_edge_at(EdgeId(i as u32), s, t, l).unwrap();
    }
    out
}

fn key_of_code(code: &[u32]) -> CanonicalKey {
    let mut bytes = Vec::with_capacity(code.len() * 4);
    for t in code {
        bytes.extend_from_slice(&t.to_be_bytes());
    }
    CanonicalKey(bytes)
}

pub fn canonical_key(g: &Graph) -> CanonicalKey {
    let order = canonical_order(g);
    key_of_code(&code_for_order(g, &order))
}

/// Canonical form and key together.
pub fn canonicalize(g: &Graph) -> (Arc<Graph>, CanonicalKey) {
    let order = canonical_order(g);
    let key = key_of_code(&code_for_order(g, &order));
    (Arc::new(relabel(g, &order)), key)
}

pub fn is_isomorphic(a: &Graph, b: &Graph) -> bool {
    a.node_count() == b.node_count()
        && a.edge_count() == b.edge_count()
        && canonical_key(a) == canonical_key(b)
}
