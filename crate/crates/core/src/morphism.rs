//! Total and partial graph morphisms.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MorphismError {
    #[error("node map has {got} entries, domain has {want} nodes")]
    NodeArity { got: usize, want: usize },
    #[error("edge map has {got} entries, domain has {want} edges")]
    EdgeArity { got: usize, want: usize },
    #[error("image of node {0} is out of range")]
    NodeRange(usize),
    #[error("image of edge {0} is out of range")]
    EdgeRange(usize),
    #[error("node {0} changes label")]
    NodeLabel(usize),
    #[error("edge {0} changes label")]
    EdgeLabel(usize),
    #[error("edge {0} is not mapped consistently with its endpoints")]
    Structure(usize),
    #[error("morphisms are not composable")]
    NotComposable,
}

/// A structure- and label-preserving map between graphs, stored as
/// position maps from `dom` into `cod`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Morphism {
    dom: Arc<Graph>,
    cod: Arc<Graph>,
    nodes: Vec<usize>,
    edges: Vec<usize>,
}

impl Morphism {
    pub fn new(
        dom: Arc<Graph>,
        cod: Arc<Graph>,
        nodes: Vec<usize>,
        edges: Vec<usize>,
    ) -> Result<Self, MorphismError> {
        if nodes.len() != dom.node_count() {
            return Err(MorphismError::NodeArity { got: nodes.len(), want: dom.node_count() });
        }
        if edges.len() != dom.edge_count() {
            return Err(MorphismError::EdgeArity { got: edges.len(), want: dom.edge_count() });
        }
        for (i, &v) in nodes.iter().enumerate() {
            if v >= cod.node_count() {
                return Err(MorphismError::NodeRange(i));
            }
            if dom.node(i).label != cod.node(v).label {
                return Err(MorphismError::NodeLabel(i));
            }
        }
        for (i, &e) in edges.iter().enumerate() {
            if e >= cod.edge_count() {
                return Err(MorphismError::EdgeRange(i));
            }
            let (de, ce) = (dom.edge(i), cod.edge(e));
            if de.label != ce.label {
                return Err(MorphismError::EdgeLabel(i));
            }
            if nodes[de.src] != ce.src || nodes[de.tgt] != ce.tgt {
                return Err(MorphismError::Structure(i));
            }
        }
        Ok(Self { dom, cod, nodes, edges })
    }

    /// Builds a morphism the caller has already validated.
    pub(crate) fn trusted(
        dom: Arc<Graph>,
        cod: Arc<Graph>,
        nodes: Vec<usize>,
        edges: Vec<usize>,
    ) -> Self {
        debug_assert!(Self::new(dom.clone(), cod.clone(), nodes.clone(), edges.clone()).is_ok());
        Self { dom, cod, nodes, edges }
    }

    pub fn identity(g: Arc<Graph>) -> Self {
        let nodes = (0..g.node_count()).collect();
        let edges = (0..g.edge_count()).collect();
        Self { dom: g.clone(), cod: g, nodes, edges }
    }

    /// The inclusion of a subgraph (matched by ids) into its host.
    pub fn inclusion(sub: Arc<Graph>, host: Arc<Graph>) -> Option<Self> {
        if !sub.is_subgraph_of(&host) {
            return None;
        }
        let nodes = sub.nodes().iter().map(|n| host.node_pos(n.id).unwrap()).collect();
        let edges = sub.edges().iter().map(|e| host.edge_pos(e.id).unwrap()).collect();
        Some(Self { dom: sub, cod: host, nodes, edges })
    }

    /// The unique morphism out of the empty graph.
    pub fn empty_into(cod: Arc<Graph>) -> Self {
        Self { dom: Arc::new(Graph::new()), cod, nodes: Vec::new(), edges: Vec::new() }
    }

    pub fn dom(&self) -> &Arc<Graph> {
        &self.dom
    }

    pub fn cod(&self) -> &Arc<Graph> {
        &self.cod
    }

    pub fn node_map(&self) -> &[usize] {
        &self.nodes
    }

    pub fn edge_map(&self) -> &[usize] {
        &self.edges
    }

    pub fn node(&self, pos: usize) -> usize {
        self.nodes[pos]
    }

    pub fn edge(&self, pos: usize) -> usize {
        self.edges[pos]
    }

    pub fn is_mono(&self) -> bool {
        injective(&self.nodes, self.cod.node_count()) && injective(&self.edges, self.cod.edge_count())
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &Morphism) -> Result<Morphism, MorphismError> {
        if *self.cod != *then.dom {
            return Err(MorphismError::NotComposable);
        }
        Ok(Morphism {
            dom: self.dom.clone(),
            cod: then.cod.clone(),
            nodes: self.nodes.iter().map(|&v| then.nodes[v]).collect(),
            edges: self.edges.iter().map(|&e| then.edges[e]).collect(),
        })
    }

    /// Same maps with a different (equal-content) codomain handle.
    pub fn with_cod(&self, cod: Arc<Graph>) -> Morphism {
        debug_assert_eq!(*cod, *self.cod);
        Morphism { cod, ..self.clone() }
    }

    /// Inverse position maps; `None` where a codomain item has no preimage.
    /// Only meaningful for monos.
    pub fn preimages(&self) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
        let mut pn = alloc::vec![None; self.cod.node_count()];
        let mut pe = alloc::vec![None; self.cod.edge_count()];
        for (i, &v) in self.nodes.iter().enumerate() {
            pn[v] = Some(i);
        }
        for (i, &e) in self.edges.iter().enumerate() {
            pe[e] = Some(i);
        }
        (pn, pe)
    }

    /// Same maps, compared without regard to which `Arc` holds the graphs.
    pub fn same_maps(&self, other: &Morphism) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

fn injective(map: &[usize], range: usize) -> bool {
    let mut seen = alloc::vec![false; range];
    map.iter().all(|&x| !core::mem::replace(&mut seen[x], true))
}

/// The direct image `f(G) ⊆ cod(f)`.
pub fn direct_image(f: &Morphism) -> Graph {
    let mut kn = alloc::vec![false; f.cod().node_count()];
    let mut ke = alloc::vec![false; f.cod().edge_count()];
    for &v in f.node_map() {
        kn[v] = true;
    }
    for &e in f.edge_map() {
        ke[e] = true;
    }
    f.cod().induced(&kn, &ke).expect("images of morphisms are closed")
}

/// A partial morphism as a pair of partial position maps. Used to compare
/// composites of rules and corules in the category of partial maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialMap {
    pub nodes: Vec<Option<usize>>,
    pub edges: Vec<Option<usize>>,
}

impl PartialMap {
    /// Partial map from a span `dom <- ker -> cod` whose left leg is mono.
    pub fn from_span(left: &Morphism, right: &Morphism) -> Self {
        let mut nodes = alloc::vec![None; left.cod().node_count()];
        let mut edges = alloc::vec![None; left.cod().edge_count()];
        for (k, &l) in left.node_map().iter().enumerate() {
            nodes[l] = Some(right.node(k));
        }
        for (k, &l) in left.edge_map().iter().enumerate() {
            edges[l] = Some(right.edge(k));
        }
        Self { nodes, edges }
    }

    pub fn total(f: &Morphism) -> Self {
        Self {
            nodes: f.node_map().iter().map(|&v| Some(v)).collect(),
            edges: f.edge_map().iter().map(|&e| Some(e)).collect(),
        }
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &PartialMap) -> PartialMap {
        PartialMap {
            nodes: self.nodes.iter().map(|v| v.and_then(|v| then.nodes[v])).collect(),
            edges: self.edges.iter().map(|e| e.and_then(|e| then.edges[e])).collect(),
        }
    }
}
