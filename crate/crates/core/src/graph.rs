//! Immutable directed follow graph over dense node indices.
//!
//! Both adjacency directions are materialized as compressed sorted arrays so
//! follower and followee queries are O(1) slices. For an edge A -> B
//! ("A follows B"): B is in A's followees, A is in B's followers.

use std::collections::HashMap;
use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from graph construction and queries.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no nodes remain after filtering")]
    EmptyGraph,
    #[error("node index {index} out of range for graph with {nodes} nodes")]
    InvalidNode { index: u32, nodes: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense node index, valid only for the graph that produced it.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Which neighbor set of a node to look at.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// In-neighbors: nodes following this one.
    Follower,
    /// Out-neighbors: nodes this one follows.
    Followee,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Follower, Direction::Followee];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Follower => "follower",
            Direction::Followee => "followee",
        }
    }
}

/// Bijection between external 64-bit user ids and dense node indices.
///
/// Node indices are assigned in ascending external-id order, which keeps
/// every derived artifact independent of input ordering.
#[derive(Clone, Debug, Default)]
pub struct IdMap {
    forward: HashMap<u64, NodeId>,
    reverse: Vec<u64>,
}

impl IdMap {
    /// Build from an arbitrary id collection; duplicates collapse.
    pub fn from_ids(ids: impl IntoIterator<Item = u64>) -> IdMap {
        let mut reverse: Vec<u64> = ids.into_iter().collect();
        reverse.sort_unstable();
        reverse.dedup();
        let forward = reverse
            .iter()
            .enumerate()
            .map(|(i, &ext)| (ext, NodeId(i as u32)))
            .collect();
        IdMap { forward, reverse }
    }

    /// Identity map for graphs that were generated directly in index space.
    pub fn identity(n: usize) -> IdMap {
        IdMap::from_ids(0..n as u64)
    }

    pub fn node_id(&self, external: u64) -> Option<NodeId> {
        self.forward.get(&external).copied()
    }

    /// External id of a node. Panics if the node is out of range.
    pub fn external_id(&self, node: NodeId) -> u64 {
        self.reverse[node.index()]
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    /// Pairs (node, external id) in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, u64)> + '_ {
        self.reverse
            .iter()
            .enumerate()
            .map(|(i, &ext)| (NodeId(i as u32), ext))
    }
}

/// Counters accumulated while normalizing an edge list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    /// Edge pairs fed into the build, before any filtering.
    pub input_pairs: u64,
    /// Self-follow pairs dropped.
    pub self_loops_dropped: u64,
    /// Pairs removed because an endpoint was outside the restriction set.
    pub filtered_by_restriction: u64,
    /// Repeated pairs collapsed into a single edge.
    pub duplicates_collapsed: u64,
    /// Nodes retained with no surviving edge (possible only via restriction).
    pub isolated_nodes: u64,
}

/// Directed graph in dual CSR form. Immutable once built; shared reads are
/// safe from any number of threads.
#[derive(Clone, Debug)]
pub struct DirectedGraph {
    out_offsets: Vec<usize>,
    out_targets: Vec<NodeId>,
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeId>,
}

impl DirectedGraph {
    /// Build from index-space pairs `(follower, followee)` over `n` nodes.
    ///
    /// Self-loops are dropped and duplicate pairs collapsed, with counts
    /// reported in the returned stats. Pairs referencing an index `>= n`
    /// are rejected.
    pub fn from_index_pairs(
        n: usize,
        mut pairs: Vec<(u32, u32)>,
    ) -> Result<(DirectedGraph, BuildStats), GraphError> {
        let mut stats = BuildStats {
            input_pairs: pairs.len() as u64,
            ..BuildStats::default()
        };
        for &(a, b) in &pairs {
            let bad = if (a as usize) >= n { Some(a) } else if (b as usize) >= n { Some(b) } else { None };
            if let Some(index) = bad {
                return Err(GraphError::InvalidNode { index, nodes: n });
            }
        }
        let before = pairs.len();
        pairs.retain(|&(a, b)| a != b);
        stats.self_loops_dropped = (before - pairs.len()) as u64;
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        stats.duplicates_collapsed = (before - pairs.len()) as u64;

        let mut out_degree = vec![0usize; n];
        let mut in_degree = vec![0usize; n];
        for &(a, b) in &pairs {
            out_degree[a as usize] += 1;
            in_degree[b as usize] += 1;
        }
        stats.isolated_nodes = (0..n)
            .filter(|&x| out_degree[x] == 0 && in_degree[x] == 0)
            .count() as u64;

        let out_offsets = prefix_sums(&out_degree);
        let in_offsets = prefix_sums(&in_degree);
        let mut out_targets = vec![NodeId(0); pairs.len()];
        let mut in_sources = vec![NodeId(0); pairs.len()];
        // pairs are sorted by (follower, followee), so out lists fill in
        // sorted order directly; in lists get sorted sources for the same
        // reason because fills happen in ascending follower order.
        let mut out_cursor = out_offsets.clone();
        let mut in_cursor = in_offsets.clone();
        for &(a, b) in &pairs {
            out_targets[out_cursor[a as usize]] = NodeId(b);
            out_cursor[a as usize] += 1;
            in_sources[in_cursor[b as usize]] = NodeId(a);
            in_cursor[b as usize] += 1;
        }

        Ok((
            DirectedGraph {
                out_offsets,
                out_targets,
                in_offsets,
                in_sources,
            },
            stats,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.out_offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count() as u32).map(NodeId)
    }

    pub fn in_degree(&self, x: NodeId) -> usize {
        let i = x.index();
        self.in_offsets[i + 1] - self.in_offsets[i]
    }

    pub fn out_degree(&self, x: NodeId) -> usize {
        let i = x.index();
        self.out_offsets[i + 1] - self.out_offsets[i]
    }

    /// Sorted neighbor slice of `x` in the requested direction.
    pub fn neighbors(&self, x: NodeId, direction: Direction) -> Result<&[NodeId], GraphError> {
        if x.index() >= self.node_count() {
            return Err(GraphError::InvalidNode {
                index: x.0,
                nodes: self.node_count(),
            });
        }
        Ok(self.adjacency(x.index(), direction))
    }

    /// Unchecked variant for internal loops iterating valid indices.
    #[inline]
    pub(crate) fn adjacency(&self, i: usize, direction: Direction) -> &[NodeId] {
        match direction {
            Direction::Followee => &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]],
            Direction::Follower => &self.in_sources[self.in_offsets[i]..self.in_offsets[i + 1]],
        }
    }

    /// Edges as (follower, followee) pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |a| {
            self.adjacency(a.index(), Direction::Followee)
                .iter()
                .map(move |&b| (a, b))
        })
    }
}

fn prefix_sums(degrees: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(degrees.len() + 1);
    let mut acc = 0usize;
    offsets.push(0);
    for &d in degrees {
        acc += d;
        offsets.push(acc);
    }
    offsets
}

/// Build a graph from external-id edge pairs.
///
/// Duplicate edges collapse, self-loops are dropped and counted. When
/// `restrict_to` is given, only edges with both endpoints in the set survive
/// and the node set is exactly the restriction set (ids without surviving
/// edges stay as isolated nodes). Without a restriction the node set is the
/// endpoints of the surviving edges.
pub fn build_graph(
    edges: impl IntoIterator<Item = (u64, u64)>,
    restrict_to: Option<&HashSet<u64>>,
) -> Result<(DirectedGraph, IdMap, BuildStats), GraphError> {
    let mut input_pairs = 0u64;
    let mut filtered = 0u64;
    let mut self_loops = 0u64;
    let mut kept: Vec<(u64, u64)> = Vec::new();
    for (a, b) in edges {
        input_pairs += 1;
        if let Some(allow) = restrict_to {
            if !allow.contains(&a) || !allow.contains(&b) {
                filtered += 1;
                continue;
            }
        }
        if a == b {
            self_loops += 1;
            continue;
        }
        kept.push((a, b));
    }

    let ids = match restrict_to {
        Some(allow) => IdMap::from_ids(allow.iter().copied()),
        None => IdMap::from_ids(kept.iter().flat_map(|&(a, b)| [a, b])),
    };
    if ids.is_empty() {
        return Err(GraphError::EmptyGraph);
    }

    let pairs: Vec<(u32, u32)> = kept
        .into_iter()
        .map(|(a, b)| {
            // Both endpoints are in the id map by construction.
            (ids.node_id(a).unwrap().0, ids.node_id(b).unwrap().0)
        })
        .collect();
    let (graph, mut stats) = DirectedGraph::from_index_pairs(ids.len(), pairs)?;
    stats.input_pairs = input_pairs;
    stats.self_loops_dropped = self_loops;
    stats.filtered_by_restriction = filtered;
    Ok((graph, ids, stats))
}

/// Parse an edge file: one `<follower>\t<followee>` pair per line, `#` lines
/// and blank lines ignored.
pub fn read_edge_file(reader: impl BufRead) -> Result<Vec<(u64, u64)>, GraphError> {
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        edges.push(parse_edge_line(trimmed, idx + 1)?);
    }
    Ok(edges)
}

fn parse_edge_line(line: &str, lineno: usize) -> Result<(u64, u64), GraphError> {
    let mut fields = line.split('\t');
    let a = fields.next();
    let b = fields.next();
    match (a, b, fields.next()) {
        (Some(a), Some(b), None) => {
            let a = a.trim().parse::<u64>().map_err(|e| GraphError::Parse {
                line: lineno,
                msg: format!("bad follower id {a:?}: {e}"),
            })?;
            let b = b.trim().parse::<u64>().map_err(|e| GraphError::Parse {
                line: lineno,
                msg: format!("bad followee id {b:?}: {e}"),
            })?;
            Ok((a, b))
        }
        _ => Err(GraphError::Parse {
            line: lineno,
            msg: format!("expected two tab-separated ids, got {line:?}"),
        }),
    }
}

/// Parse a restriction set: one id per line, `#` and blank lines ignored.
pub fn read_restrict_file(reader: impl BufRead) -> Result<HashSet<u64>, GraphError> {
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let id = trimmed.parse::<u64>().map_err(|e| GraphError::Parse {
            line: idx + 1,
            msg: format!("bad id {trimmed:?}: {e}"),
        })?;
        ids.insert(id);
    }
    Ok(ids)
}

/// Emit edges as external-id pairs in ascending order.
pub fn write_edge_file(
    graph: &DirectedGraph,
    ids: &IdMap,
    mut w: impl Write,
) -> std::io::Result<()> {
    for (a, b) in graph.edges() {
        writeln!(w, "{}\t{}", ids.external_id(a), ids.external_id(b))?;
    }
    Ok(())
}

/// Emit the full node set in restriction-file format, so rebuilding with it
/// as the restriction reproduces the graph including isolated nodes.
pub fn write_node_file(ids: &IdMap, mut w: impl Write) -> std::io::Result<()> {
    for (_, ext) in ids.iter() {
        writeln!(w, "{ext}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star_edges(n: u64) -> Vec<(u64, u64)> {
        (1..n).map(|i| (i, 0)).collect()
    }

    #[test]
    fn dedup_and_transpose() {
        let (g, ids, stats) = build_graph([(1, 2), (2, 1), (1, 2)], None).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(stats.duplicates_collapsed, 1);
        let n1 = ids.node_id(1).unwrap();
        let n2 = ids.node_id(2).unwrap();
        assert_eq!(g.neighbors(n1, Direction::Followee).unwrap(), &[n2]);
        assert_eq!(g.neighbors(n2, Direction::Followee).unwrap(), &[n1]);
    }

    #[test]
    fn self_loop_only_is_empty() {
        match build_graph([(1, 1)], None) {
            Err(GraphError::EmptyGraph) => {}
            other => panic!("expected EmptyGraph, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(matches!(
            build_graph(std::iter::empty(), None),
            Err(GraphError::EmptyGraph)
        ));
    }

    #[test]
    fn star_degrees() {
        let (g, ids, _) = build_graph(star_edges(10), None).unwrap();
        let hub = ids.node_id(0).unwrap();
        assert_eq!(g.in_degree(hub), 9);
        assert_eq!(g.out_degree(hub), 0);
        for i in 1..10 {
            let leaf = ids.node_id(i).unwrap();
            assert_eq!(g.out_degree(leaf), 1);
            assert_eq!(g.in_degree(leaf), 0);
        }
    }

    #[test]
    fn star_neighbor_queries() {
        let (g, ids, _) = build_graph(star_edges(10), None).unwrap();
        let hub = ids.node_id(0).unwrap();
        let followers = g.neighbors(hub, Direction::Follower).unwrap();
        let got: Vec<u64> = followers.iter().map(|&x| ids.external_id(x)).collect();
        assert_eq!(got, (1..10).collect::<Vec<_>>());
        assert!(g.neighbors(hub, Direction::Followee).unwrap().is_empty());
    }

    #[test]
    fn cycle_followee() {
        let (g, ids, _) = build_graph([(1, 2), (2, 3), (3, 1)], None).unwrap();
        let n2 = ids.node_id(2).unwrap();
        let n3 = ids.node_id(3).unwrap();
        assert_eq!(g.neighbors(n2, Direction::Followee).unwrap(), &[n3]);
    }

    #[test]
    fn invalid_node_is_an_error() {
        let (g, _, _) = build_graph([(1, 2)], None).unwrap();
        assert!(matches!(
            g.neighbors(NodeId(99), Direction::Follower),
            Err(GraphError::InvalidNode { .. })
        ));
    }

    #[test]
    fn restriction_keeps_listed_isolated_nodes() {
        let allow: HashSet<u64> = [0, 1, 7].into_iter().collect();
        let (g, ids, stats) = build_graph([(1, 0), (1, 2), (3, 0)], Some(&allow)).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(stats.filtered_by_restriction, 2);
        assert_eq!(stats.isolated_nodes, 1);
        assert!(ids.node_id(7).is_some());
        assert!(ids.node_id(2).is_none());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let input = "1\t2\n# comment\nbogus\n";
        match read_edge_file(input.as_bytes()) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn edge_file_round_trip() {
        let (g, ids, _) = build_graph([(5, 9), (9, 5), (5, 12), (12, 9)], None).unwrap();
        let mut buf = Vec::new();
        write_edge_file(&g, &ids, &mut buf).unwrap();
        let reparsed = read_edge_file(buf.as_slice()).unwrap();
        let (g2, ids2, _) = build_graph(reparsed, None).unwrap();
        assert_eq!(g.node_count(), g2.node_count());
        assert_eq!(
            g.edges().collect::<Vec<_>>(),
            g2.edges().collect::<Vec<_>>()
        );
        assert_eq!(
            ids.iter().collect::<Vec<_>>(),
            ids2.iter().collect::<Vec<_>>()
        );
    }

    fn arb_edges() -> impl Strategy<Value = Vec<(u64, u64)>> {
        proptest::collection::vec((0u64..32, 0u64..32), 1..120)
    }

    proptest! {
        #[test]
        fn transpose_is_consistent(edges in arb_edges()) {
            if let Ok((g, _, _)) = build_graph(edges, None) {
                let total_in: usize = g.nodes().map(|x| g.in_degree(x)).sum();
                let total_out: usize = g.nodes().map(|x| g.out_degree(x)).sum();
                prop_assert_eq!(total_in, g.edge_count());
                prop_assert_eq!(total_out, g.edge_count());
                for a in g.nodes() {
                    for &b in g.neighbors(a, Direction::Followee).unwrap() {
                        prop_assert!(g.neighbors(b, Direction::Follower).unwrap().contains(&a));
                    }
                }
            }
        }

        #[test]
        fn emitted_edges_rebuild_identically(edges in arb_edges()) {
            if let Ok((g, ids, _)) = build_graph(edges, None) {
                let mut buf = Vec::new();
                write_edge_file(&g, &ids, &mut buf).unwrap();
                let (g2, _, _) = build_graph(read_edge_file(buf.as_slice()).unwrap(), None).unwrap();
                prop_assert_eq!(g.edges().collect::<Vec<_>>(), g2.edges().collect::<Vec<_>>());
            }
        }

        #[test]
        fn restrict_to_full_vertex_set_is_noop(edges in arb_edges()) {
            if let Ok((g, ids, _)) = build_graph(edges.clone(), None) {
                let full: HashSet<u64> = ids.iter().map(|(_, ext)| ext).collect();
                let (g2, ids2, _) = build_graph(edges, Some(&full)).unwrap();
                prop_assert_eq!(g.edges().collect::<Vec<_>>(), g2.edges().collect::<Vec<_>>());
                prop_assert_eq!(ids.iter().collect::<Vec<_>>(), ids2.iter().collect::<Vec<_>>());
            }
        }
    }
}
