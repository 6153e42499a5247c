//! Finite directed multigraphs with labelled nodes and edges.
//!
//! Nodes and edges carry opaque ids that are stable under the
//! constructions in this crate (subgraphs, deletions, pushouts), while all
//! internal references use dense positions. Edge endpoints are stored as
//! node positions, so a [`Graph`] can never hold a dangling edge.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

/// Index into a label alphabet declared by the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Label(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub id: NodeId,
    pub label: Label,
}

/// An edge; `src` and `tgt` are positions in the owning graph's node list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub id: EdgeId,
    pub src: usize,
    pub tgt: usize,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(EdgeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge id {0}")]
    UnknownEdge(EdgeId),
    #[error("edge {0} is not closed under source/target in the chosen node set")]
    NotASubgraph(EdgeId),
    #[error("graphs are not subgraphs of the same host")]
    ForeignSubgraph,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Graph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes plus edges.
    pub fn size(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, pos: usize) -> &Node {
        &self.nodes[pos]
    }

    pub fn edge(&self, pos: usize) -> &Edge {
        &self.edges[pos]
    }

    pub fn node_pos(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn edge_pos(&self, id: EdgeId) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn add_node(&mut self, id: NodeId, label: Label) -> Result<usize, GraphError> {
        if self.node_pos(id).is_some() {
            return Err(GraphError::DuplicateNode(id));
        }
        self.nodes.push(Node { id, label });
        Ok(self.nodes.len() - 1)
    }

    pub fn add_edge(
        &mut self,
        id: EdgeId,
        src: NodeId,
        tgt: NodeId,
        label: Label,
    ) -> Result<usize, GraphError> {
        let s = self.node_pos(src).ok_or(GraphError::UnknownNode(src))?;
        let t = self.node_pos(tgt).ok_or(GraphError::UnknownNode(tgt))?;
        self.add_edge_at(id, s, t, label)
    }

    /// Adds an edge between node positions.
    pub fn add_edge_at(
        &mut self,
        id: EdgeId,
        src: usize,
        tgt: usize,
        label: Label,
    ) -> Result<usize, GraphError> {
        if self.edge_pos(id).is_some() {
            return Err(GraphError::DuplicateEdge(id));
        }
        assert!(src < self.nodes.len() && tgt < self.nodes.len(), "edge endpoint out of range");
        self.edges.push(Edge { id, src, tgt, label });
        Ok(self.edges.len() - 1)
    }

    /// Next unused node id; ids handed out by successive calls on a graph
    /// that is being extended form a monotone sequence.
    pub fn fresh_node_id(&self) -> NodeId {
        NodeId(self.nodes.iter().map(|n| n.id.0 + 1).max().unwrap_or(0))
    }

    pub fn fresh_edge_id(&self) -> EdgeId {
        EdgeId(self.edges.iter().map(|e| e.id.0 + 1).max().unwrap_or(0))
    }

    /// Appends a node with the next fresh id.
    pub fn push_node(&mut self, label: Label) -> usize {
        let id = self.fresh_node_id();
        self.nodes.push(Node { id, label });
        self.nodes.len() - 1
    }

    /// Appends an edge with the next fresh id.
    pub fn push_edge(&mut self, src: usize, tgt: usize, label: Label) -> usize {
        let id = self.fresh_edge_id();
        self.add_edge_at(id, src, tgt, label).expect("fresh id")
    }

    pub fn out_degree(&self, pos: usize) -> usize {
        self.edges.iter().filter(|e| e.src == pos).count()
    }

    pub fn in_degree(&self, pos: usize) -> usize {
        self.edges.iter().filter(|e| e.tgt == pos).count()
    }

    pub fn node_ids(&self) -> BTreeSet<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn edge_ids(&self) -> BTreeSet<EdgeId> {
        self.edges.iter().map(|e| e.id).collect()
    }

    /// Subgraph spanned by the given node and edge positions. Fails if an
    /// edge's endpoint is not among the kept nodes.
    pub fn induced(&self, keep_nodes: &[bool], keep_edges: &[bool]) -> Result<Self, GraphError> {
        let mut remap = alloc::vec![usize::MAX; self.nodes.len()];
        let mut out = Graph::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if keep_nodes[i] {
                remap[i] = out.nodes.len();
                out.nodes.push(n.clone());
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            if keep_edges[i] {
                if remap[e.src] == usize::MAX || remap[e.tgt] == usize::MAX {
                    return Err(GraphError::NotASubgraph(e.id));
                }
                out.edges.push(Edge { id: e.id, src: remap[e.src], tgt: remap[e.tgt], label: e.label });
            }
        }
        Ok(out)
    }

    /// Subgraph with the given ids.
    pub fn subgraph(
        &self,
        nodes: &BTreeSet<NodeId>,
        edges: &BTreeSet<EdgeId>,
    ) -> Result<Self, GraphError> {
        for id in nodes {
            self.node_pos(*id).ok_or(GraphError::UnknownNode(*id))?;
        }
        for id in edges {
            self.edge_pos(*id).ok_or(GraphError::UnknownEdge(*id))?;
        }
        let kn: Vec<bool> = self.nodes.iter().map(|n| nodes.contains(&n.id)).collect();
        let ke: Vec<bool> = self.edges.iter().map(|e| edges.contains(&e.id)).collect();
        self.induced(&kn, &ke)
    }

    /// Whether `self` is a subgraph of `host`: same ids with the same
    /// labels and endpoints.
    pub fn is_subgraph_of(&self, host: &Graph) -> bool {
        let node_ok = self.nodes.iter().all(|n| {
            host.node_pos(n.id)
                .is_some_and(|p| host.nodes[p].label == n.label)
        });
        node_ok
            && self.edges.iter().all(|e| {
                host.edge_pos(e.id).is_some_and(|p| {
                    let h = &host.edges[p];
                    h.label == e.label
                        && host.nodes[h.src].id == self.nodes[e.src].id
                        && host.nodes[h.tgt].id == self.nodes[e.tgt].id
                })
            })
    }

    /// Disjoint union; ids of `other` are shifted above those of `self`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let mut out = self.clone();
        let nbase = self.fresh_node_id().0;
        let ebase = self.fresh_edge_id().0;
        let off = out.nodes.len();
        for n in &other.nodes {
            out.nodes.push(Node { id: NodeId(nbase + n.id.0), label: n.label });
        }
        for e in &other.edges {
            out.edges.push(Edge {
                id: EdgeId(ebase + e.id.0),
                src: e.src + off,
                tgt: e.tgt + off,
                label: e.label,
            });
        }
        out
    }
}

/// Union of two subgraphs of `host`, taken inside `host`.
pub fn subgraph_union(host: &Graph, a: &Graph, b: &Graph) -> Result<Graph, GraphError> {
    if !a.is_subgraph_of(host) || !b.is_subgraph_of(host) {
        return Err(GraphError::ForeignSubgraph);
    }
    let nodes = a.node_ids().union(&b.node_ids()).copied().collect();
    let edges = a.edge_ids().union(&b.edge_ids()).copied().collect();
    host.subgraph(&nodes, &edges)
}

/// Intersection of two subgraphs of `host`.
pub fn subgraph_intersection(host: &Graph, a: &Graph, b: &Graph) -> Result<Graph, GraphError> {
    if !a.is_subgraph_of(host) || !b.is_subgraph_of(host) {
        return Err(GraphError::ForeignSubgraph);
    }
    let nodes = a.node_ids().intersection(&b.node_ids()).copied().collect();
    let edges = a.edge_ids().intersection(&b.edge_ids()).copied().collect();
    host.subgraph(&nodes, &edges)
}

/// Small helper for writing graphs in tests and fixtures:
/// `graph(&[0, 0, 1], &[(0, 1, 0)])` gives three nodes labelled 0, 0, 1
/// and one edge 0 -> 1 labelled 0, with ids equal to positions.
pub fn graph(node_labels: &[u32], edges: &[(usize, usize, u32)]) -> Graph {
    let mut g = Graph::new();
    for (i, l) in node_labels.iter().enumerate() {
        g.add_node(NodeId(i as u32), Label(*l)).expect("distinct ids");
    }
    for (i, (s, t, l)) in edges.iter().enumerate() {
        g.add_edge_at(EdgeId(i as u32), *s, *t, Label(*l)).expect("distinct ids");
    }
    g
}
