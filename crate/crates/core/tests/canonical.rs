//! Canonical keys depend on the isomorphism class only.

use proptest::prelude::*;

use rategraph_core::canon::{canonical_key, is_isomorphic};
use rategraph_core::graph::{Graph, Label};
use rategraph_core::matching::count_matches;

fn arb_graph() -> impl Strategy<Value = (Vec<u32>, Vec<(usize, usize, u32)>)> {
    (1usize..=5).prop_flat_map(|n| {
        (
            prop::collection::vec(0u32..2, n),
            prop::collection::vec((0..n, 0..n, 0u32..2), 0..=6),
        )
    })
}

fn build(labels: &[u32], edges: &[(usize, usize, u32)], order: &[usize]) -> Graph {
    // node i of the description is inserted at position order[i]
    let mut inv = vec![0; order.len()];
    for (i, &p) in order.iter().enumerate() {
        inv[p] = i;
    }
    let mut g = Graph::new();
    for &i in &inv {
        g.push_node(Label(labels[i]));
    }
    for &(s, t, l) in edges.iter().rev() {
        g.push_edge(order[s], order[t], Label(l));
    }
    g
}

proptest! {
    #[test]
    fn key_ignores_insertion_order((labels, edges) in arb_graph(), shuffle in any::<u64>()) {
        let n = labels.len();
        let identity: Vec<usize> = (0..n).collect();
        let mut order = identity.clone();
        // a deterministic permutation derived from `shuffle`
        let mut s = shuffle;
        for i in (1..n).rev() {
            order.swap(i, (s % (i as u64 + 1)) as usize);
            s /= i as u64 + 1;
        }
        let a = build(&labels, &edges, &identity);
        let b = build(&labels, &edges, &order);
        prop_assert_eq!(canonical_key(&a), canonical_key(&b));
        prop_assert!(is_isomorphic(&a, &b));
        prop_assert_eq!(count_matches(&a, &b), count_matches(&a, &a));
    }

    #[test]
    fn extra_edge_changes_key((labels, edges) in arb_graph(), s in 0usize..5, t in 0usize..5) {
        let n = labels.len();
        let a = build(&labels, &edges, &(0..n).collect::<Vec<_>>());
        let mut b = a.clone();
        b.push_edge(s % n, t % n, Label(0));
        prop_assert_ne!(canonical_key(&a), canonical_key(&b));
        prop_assert!(!is_isomorphic(&a, &b));
    }
}
