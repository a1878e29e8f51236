//! Shorting and cutting, for monotonicity checks.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::geometry::{Edge, GraphKind, GraphSkeleton, NodeSet};

/// Identifies every node within each class. Returns the new graph and the
/// map from old node indices to new ones. Parallel edges are merged by
/// adding conductances and loops are dropped.
pub fn short_nodes(g: &GraphSkeleton, classes: &[Vec<usize>]) -> Result<(GraphSkeleton, Vec<usize>)> {
    let n = g.node_count();
    let mut rep: Vec<usize> = (0..n).collect();
    let mut seen = vec![false; n];
    for class in classes {
        let Some(&first) = class.first() else {
            return invalid("empty class");
        };
        for &i in class {
            if i >= n {
                return invalid(format!("node {i} out of range"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return invalid(format!("node {i} appears in two classes"));
            }
            rep[i] = first;
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if rep[i] == i {
            map[i] = next;
            next += 1;
        }
    }
    for i in 0..n {
        map[i] = map[rep[i]];
    }

    let mut merged: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for e in &g.edges {
        let (a, b) = (map[e.a as usize] as u32, map[e.b as usize] as u32);
        if a != b {
            *merged.entry((a.min(b), a.max(b))).or_default() += e.multiplicity;
        }
    }
    let mut boundary = vec![false; next];
    for (i, &b) in g.boundary.iter().enumerate() {
        boundary[map[i]] |= b;
    }
    Ok((network(g, next, merged, boundary), map))
}

/// Removes the listed edges (unordered node pairs).
pub fn cut_edges(g: &GraphSkeleton, cuts: &[(usize, usize)]) -> GraphSkeleton {
    let keys: Vec<(u32, u32)> = cuts
        .iter()
        .map(|&(a, b)| (a.min(b) as u32, a.max(b) as u32))
        .collect();
    let edges = g
        .edges
        .iter()
        .filter(|e| !keys.contains(&(e.a.min(e.b), e.a.max(e.b))))
        .copied()
        .collect();
    GraphSkeleton {
        edges,
        ..g.clone()
    }
}

fn network(g: &GraphSkeleton, nodes: usize, edges: BTreeMap<(u32, u32), u32>, boundary: Vec<bool>) -> GraphSkeleton {
    GraphSkeleton {
        kind: GraphKind::Network,
        mode: g.mode,
        level: g.level,
        nodes: NodeSet::Abstract(nodes),
        edges: edges
            .into_iter()
            .map(|((a, b), multiplicity)| Edge { a, b, multiplicity })
            .collect(),
        boundary,
        distance: Vec::new(),
    }
}
