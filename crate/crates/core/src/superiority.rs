//! Neighbor-superiority tests: per-node verdicts, network-level reports,
//! critical values.
//!
//! A node experiences superiority of a given type when its attribute is
//! strictly below the mean (or median) of that attribute over its followers
//! (or followees). Two aggregates, two directions and eight attributes give
//! 32 types. Nodes with no neighbor in the tested direction are undefined
//! and stay out of the prevalence denominator; both counts are reported so
//! either normalization can be recovered downstream.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::QualityVector;
use crate::graph::{DirectedGraph, Direction, NodeId};

/// The eight per-node attributes under test.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
pub enum AttributeKind {
    InDegree,
    OutDegree,
    Nt,
    Not,
    Ttr,
    Ntr,
    Rpt,
    Ftr,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 8] = [
        AttributeKind::InDegree,
        AttributeKind::OutDegree,
        AttributeKind::Nt,
        AttributeKind::Not,
        AttributeKind::Ttr,
        AttributeKind::Ntr,
        AttributeKind::Rpt,
        AttributeKind::Ftr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::InDegree => "in_degree",
            AttributeKind::OutDegree => "out_degree",
            AttributeKind::Nt => "nt",
            AttributeKind::Not => "not",
            AttributeKind::Ttr => "ttr",
            AttributeKind::Ntr => "ntr",
            AttributeKind::Rpt => "rpt",
            AttributeKind::Ftr => "ftr",
        }
    }

    pub fn index(self) -> usize {
        AttributeKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

/// Mean or median of the neighbor attribute multiset.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
pub enum Aggregate {
    Mean,
    Median,
}

impl Aggregate {
    pub const ALL: [Aggregate; 2] = [Aggregate::Mean, Aggregate::Median];

    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Mean => "mean",
            Aggregate::Median => "median",
        }
    }
}

/// One of the 32 superiority tests.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
pub struct SuperiorityType {
    pub aggregate: Aggregate,
    pub direction: Direction,
    pub attribute: AttributeKind,
}

impl SuperiorityType {
    pub fn new(aggregate: Aggregate, direction: Direction, attribute: AttributeKind) -> Self {
        SuperiorityType { aggregate, direction, attribute }
    }

    /// All 32 types in canonical order: aggregate, then direction, then
    /// attribute. Reports emitted in this order are byte-stable across runs.
    pub fn all() -> impl Iterator<Item = SuperiorityType> {
        Aggregate::ALL.into_iter().flat_map(|aggregate| {
            Direction::ALL.into_iter().flat_map(move |direction| {
                AttributeKind::ALL
                    .into_iter()
                    .map(move |attribute| SuperiorityType { aggregate, direction, attribute })
            })
        })
    }

    pub fn label(&self) -> String {
        format!(
            "{}_{}_{}",
            self.aggregate.name(),
            self.direction.name(),
            self.attribute.name()
        )
    }
}

/// Network-level summary of one superiority type.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct SuperiorityReport {
    #[serde(rename = "type")]
    pub ty: SuperiorityType,
    /// Nodes with a non-empty neighbor set in the tested direction.
    pub defined: u64,
    /// Defined nodes whose verdict is true.
    pub experiencing: u64,
    /// `experiencing / defined`, 0 when nothing is defined.
    pub prevalence: f64,
    /// Maximum attribute value over experiencing nodes; absent when none.
    pub critical_value: Option<f64>,
}

/// Dense per-node values for all eight attributes.
#[derive(Clone, Debug)]
pub struct AttributeTable {
    columns: [Vec<f64>; 8],
}

impl AttributeTable {
    /// Assemble the table from graph degrees and a per-node quality table.
    pub fn new(graph: &DirectedGraph, qualities: &[QualityVector]) -> AttributeTable {
        assert_eq!(graph.node_count(), qualities.len(), "quality table size mismatch");
        let n = graph.node_count();
        let mut columns: [Vec<f64>; 8] = Default::default();
        for col in columns.iter_mut() {
            col.reserve_exact(n);
        }
        for x in graph.nodes() {
            let q = &qualities[x.index()];
            columns[0].push(graph.in_degree(x) as f64);
            columns[1].push(graph.out_degree(x) as f64);
            columns[2].push(q.nt as f64);
            columns[3].push(q.not_ as f64);
            columns[4].push(q.ttr as f64);
            columns[5].push(q.ntr as f64);
            columns[6].push(q.rpt);
            columns[7].push(q.ftr);
        }
        AttributeTable { columns }
    }

    /// Build from explicit columns (synthetic assignments, tests).
    pub fn from_columns(columns: [Vec<f64>; 8]) -> AttributeTable {
        let n = columns[0].len();
        assert!(columns.iter().all(|c| c.len() == n), "ragged attribute table");
        AttributeTable { columns }
    }

    pub fn get(&self, kind: AttributeKind) -> &[f64] {
        &self.columns[kind.index()]
    }

    pub fn set(&mut self, kind: AttributeKind, values: Vec<f64>) {
        assert_eq!(values.len(), self.len());
        self.columns[kind.index()] = values;
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[inline]
fn neighbor_mean(attrs: &[f64], nbrs: &[NodeId]) -> f64 {
    let sum: f64 = nbrs.iter().map(|&y| attrs[y.index()]).sum();
    sum / nbrs.len() as f64
}

/// Median by selection over a scratch copy of the neighbor values. Exact:
/// odd length takes the middle order statistic, even length the midpoint of
/// the two central ones.
#[inline]
fn neighbor_median(attrs: &[f64], nbrs: &[NodeId], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(nbrs.iter().map(|&y| attrs[y.index()]));
    let len = scratch.len();
    let mid = len / 2;
    let (low, pivot, _) = scratch.select_nth_unstable_by(mid, f64::total_cmp);
    if len % 2 == 1 {
        *pivot
    } else {
        let upper = *pivot;
        let lower = low.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

#[inline]
fn verdict(
    graph: &DirectedGraph,
    attrs: &[f64],
    i: usize,
    ty: SuperiorityType,
    scratch: &mut Vec<f64>,
) -> Option<bool> {
    let nbrs = graph.adjacency(i, ty.direction);
    if nbrs.is_empty() {
        return None;
    }
    let aggregate = match ty.aggregate {
        Aggregate::Mean => neighbor_mean(attrs, nbrs),
        Aggregate::Median => neighbor_median(attrs, nbrs, scratch),
    };
    Some(attrs[i] < aggregate)
}

/// Verdict for one node: `Some(true)` when the node's attribute is strictly
/// below the aggregate of its neighbors' values, `None` when it has no
/// neighbor in the tested direction.
///
/// `attrs` must cover every node and `x` must be valid for the graph.
pub fn experiences(
    graph: &DirectedGraph,
    attrs: &[f64],
    x: NodeId,
    ty: SuperiorityType,
) -> Option<bool> {
    assert_eq!(attrs.len(), graph.node_count(), "attribute slice size mismatch");
    let mut scratch = Vec::new();
    verdict(graph, attrs, x.index(), ty, &mut scratch)
}

/// Same test against an explicit undirected neighbor structure.
pub fn experiences_undirected(
    adjacency: &[Vec<NodeId>],
    attrs: &[f64],
    x: NodeId,
    aggregate: Aggregate,
) -> Option<bool> {
    assert_eq!(attrs.len(), adjacency.len(), "attribute slice size mismatch");
    let nbrs = &adjacency[x.index()];
    if nbrs.is_empty() {
        return None;
    }
    let agg = match aggregate {
        Aggregate::Mean => neighbor_mean(attrs, nbrs),
        Aggregate::Median => {
            let mut scratch = Vec::new();
            neighbor_median(attrs, nbrs, &mut scratch)
        }
    };
    Some(attrs[x.index()] < agg)
}

/// Verdicts for every node. Each node's aggregate is computed sequentially
/// over its own adjacency slice, so the result is identical for any worker
/// count.
pub fn evaluate_all(
    graph: &DirectedGraph,
    attrs: &[f64],
    ty: SuperiorityType,
) -> Vec<Option<bool>> {
    assert_eq!(attrs.len(), graph.node_count(), "attribute slice size mismatch");
    (0..graph.node_count())
        .into_par_iter()
        .map_init(Vec::new, |scratch, i| verdict(graph, attrs, i, ty, scratch))
        .collect()
}

/// Fold per-node verdicts into a report.
pub fn report_from_verdicts(
    ty: SuperiorityType,
    attrs: &[f64],
    verdicts: &[Option<bool>],
) -> SuperiorityReport {
    let mut defined = 0u64;
    let mut experiencing = 0u64;
    let mut critical = f64::NEG_INFINITY;
    for (i, v) in verdicts.iter().enumerate() {
        match v {
            Some(true) => {
                defined += 1;
                experiencing += 1;
                critical = critical.max(attrs[i]);
            }
            Some(false) => defined += 1,
            None => {}
        }
    }
    SuperiorityReport {
        ty,
        defined,
        experiencing,
        prevalence: if defined > 0 { experiencing as f64 / defined as f64 } else { 0.0 },
        critical_value: (experiencing > 0).then_some(critical),
    }
}

/// Evaluate one superiority type over the whole graph.
pub fn report(graph: &DirectedGraph, attrs: &[f64], ty: SuperiorityType) -> SuperiorityReport {
    let verdicts = evaluate_all(graph, attrs, ty);
    report_from_verdicts(ty, attrs, &verdicts)
}

/// All 32 reports in canonical order.
pub fn full_report(graph: &DirectedGraph, table: &AttributeTable) -> Vec<SuperiorityReport> {
    assert_eq!(table.len(), graph.node_count(), "attribute table size mismatch");
    SuperiorityType::all()
        .map(|ty| report(graph, table.get(ty.attribute), ty))
        .collect()
}

/// CSV emission: `aggregate,direction,attribute,defined,experiencing,prevalence,critical_value`
/// with prevalence to 4 decimals and an empty critical value when absent.
pub fn write_report_csv(reports: &[SuperiorityReport], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "aggregate,direction,attribute,defined,experiencing,prevalence,critical_value")?;
    for r in reports {
        let critical = match r.critical_value {
            Some(v) => format!("{v}"),
            None => String::new(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{:.4},{}",
            r.ty.aggregate.name(),
            r.ty.direction.name(),
            r.ty.attribute.name(),
            r.defined,
            r.experiencing,
            r.prevalence,
            critical
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportRow<'a> {
    aggregate: &'a str,
    direction: &'a str,
    attribute: &'a str,
    defined: u64,
    experiencing: u64,
    prevalence: f64,
    critical_value: Option<f64>,
}

/// JSON emission with the same fields as the CSV.
pub fn write_report_json(reports: &[SuperiorityReport], w: impl Write) -> std::io::Result<()> {
    let rows: Vec<ReportRow<'_>> = reports
        .iter()
        .map(|r| ReportRow {
            aggregate: r.ty.aggregate.name(),
            direction: r.ty.direction.name(),
            attribute: r.ty.attribute.name(),
            defined: r.defined,
            experiencing: r.experiencing,
            prevalence: r.prevalence,
            critical_value: r.critical_value,
        })
        .collect();
    serde_json::to_writer_pretty(w, &rows).map_err(std::io::Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use proptest::prelude::*;

    fn star10() -> (DirectedGraph, Vec<f64>) {
        let edges: Vec<(u64, u64)> = (1..10).map(|i| (i, 0)).collect();
        let (g, _, _) = build_graph(edges, None).unwrap();
        let attrs: Vec<f64> = g.nodes().map(|x| g.in_degree(x) as f64).collect();
        (g, attrs)
    }

    fn ty(aggregate: Aggregate, direction: Direction, attribute: AttributeKind) -> SuperiorityType {
        SuperiorityType::new(aggregate, direction, attribute)
    }

    #[test]
    fn canonical_order_has_32_distinct_types() {
        let all: Vec<SuperiorityType> = SuperiorityType::all().collect();
        assert_eq!(all.len(), 32);
        let mut labels: Vec<String> = all.iter().map(|t| t.label()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 32);
        assert_eq!(all[0].label(), "mean_follower_in_degree");
        assert_eq!(all[31].label(), "median_followee_ftr");
    }

    #[test]
    fn star_leaf_sees_superior_followee() {
        let (g, attrs) = star10();
        let leaf = NodeId(1);
        for aggregate in Aggregate::ALL {
            let t = ty(aggregate, Direction::Followee, AttributeKind::InDegree);
            assert_eq!(experiences(&g, &attrs, leaf, t), Some(true));
        }
        // The hub has no followees at all.
        assert_eq!(
            experiences(&g, &attrs, NodeId(0), ty(Aggregate::Mean, Direction::Followee, AttributeKind::InDegree)),
            None
        );
    }

    #[test]
    fn constant_attribute_on_cycle_never_experiences() {
        let (g, _, _) = build_graph([(1, 2), (2, 3), (3, 1)], None).unwrap();
        let attrs = vec![5.0; 3];
        for aggregate in Aggregate::ALL {
            for direction in Direction::ALL {
                let t = ty(aggregate, direction, AttributeKind::InDegree);
                for x in g.nodes() {
                    assert_eq!(experiences(&g, &attrs, x, t), Some(false));
                }
            }
        }
    }

    #[test]
    fn mean_and_median_can_disagree() {
        // node 0 follows 1, 2, 3 with attrs {1, 1, 9}; own attr 2
        let (g, ids, _) = build_graph([(0, 1), (0, 2), (0, 3)], None).unwrap();
        let mut attrs = vec![0.0; 4];
        attrs[ids.node_id(0).unwrap().index()] = 2.0;
        attrs[ids.node_id(1).unwrap().index()] = 1.0;
        attrs[ids.node_id(2).unwrap().index()] = 1.0;
        attrs[ids.node_id(3).unwrap().index()] = 9.0;
        let x = ids.node_id(0).unwrap();
        // mean 11/3 > 2, median 1 < 2
        assert_eq!(
            experiences(&g, &attrs, x, ty(Aggregate::Mean, Direction::Followee, AttributeKind::Nt)),
            Some(true)
        );
        assert_eq!(
            experiences(&g, &attrs, x, ty(Aggregate::Median, Direction::Followee, AttributeKind::Nt)),
            Some(false)
        );
    }

    #[test]
    fn even_sized_median_uses_midpoint() {
        let (g, ids, _) = build_graph([(0, 1), (0, 2)], None).unwrap();
        let mut attrs = vec![0.0; 3];
        attrs[ids.node_id(0).unwrap().index()] = 2.5;
        attrs[ids.node_id(1).unwrap().index()] = 1.0;
        attrs[ids.node_id(2).unwrap().index()] = 4.0;
        // median of {1, 4} = 2.5, strict inequality fails
        assert_eq!(
            experiences(&g, &attrs, ids.node_id(0).unwrap(), ty(Aggregate::Median, Direction::Followee, AttributeKind::Nt)),
            Some(false)
        );
    }

    #[test]
    fn star_report_mean_followee() {
        let (g, attrs) = star10();
        let r = report(&g, &attrs, ty(Aggregate::Mean, Direction::Followee, AttributeKind::InDegree));
        assert_eq!(r.defined, 9);
        assert_eq!(r.experiencing, 9);
        assert_eq!(r.prevalence, 1.0);
        assert_eq!(r.critical_value, Some(0.0));
    }

    #[test]
    fn constant_attribute_report_has_no_critical_value() {
        let (g, _, _) = build_graph([(1, 2), (2, 3), (3, 1)], None).unwrap();
        let attrs = vec![5.0; 3];
        let r = report(&g, &attrs, ty(Aggregate::Mean, Direction::Follower, AttributeKind::Nt));
        assert_eq!(r.experiencing, 0);
        assert_eq!(r.prevalence, 0.0);
        assert_eq!(r.critical_value, None);
    }

    #[test]
    fn empty_graph_reports_nothing_defined() {
        let (g, _) = DirectedGraph::from_index_pairs(0, vec![]).unwrap();
        let table = AttributeTable::from_columns(Default::default());
        let reports = full_report(&g, &table);
        assert_eq!(reports.len(), 32);
        assert!(reports.iter().all(|r| r.defined == 0 && r.critical_value.is_none()));
    }

    #[test]
    fn star_full_report_follower_direction_defined_only_at_hub() {
        let (g, attrs) = star10();
        let qualities = vec![QualityVector::default(); g.node_count()];
        let mut table = AttributeTable::new(&g, &qualities);
        table.set(AttributeKind::Nt, attrs);
        for r in full_report(&g, &table) {
            if r.ty.direction == Direction::Follower {
                assert_eq!(r.defined, 1, "type {}", r.ty.label());
            }
        }
    }

    #[test]
    fn undirected_path_ends_experience_mean() {
        // path a - b - c
        let adjacency = vec![
            vec![NodeId(1)],
            vec![NodeId(0), NodeId(2)],
            vec![NodeId(1)],
        ];
        let degrees = vec![1.0, 2.0, 1.0];
        assert_eq!(experiences_undirected(&adjacency, &degrees, NodeId(0), Aggregate::Mean), Some(true));
        assert_eq!(experiences_undirected(&adjacency, &degrees, NodeId(1), Aggregate::Mean), Some(false));
        assert_eq!(experiences_undirected(&adjacency, &degrees, NodeId(2), Aggregate::Mean), Some(true));
        // critical degree for the mean over this path is 1
        let critical = degrees
            .iter()
            .enumerate()
            .filter(|&(i, _)| {
                experiences_undirected(&adjacency, &degrees, NodeId(i as u32), Aggregate::Mean)
                    == Some(true)
            })
            .map(|(_, &d)| d)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(critical, 1.0);
    }

    #[test]
    fn complete_graph_nobody_experiences() {
        let n = 4u32;
        let adjacency: Vec<Vec<NodeId>> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(NodeId).collect())
            .collect();
        let degrees = vec![3.0; 4];
        for i in 0..n {
            for aggregate in Aggregate::ALL {
                assert_eq!(
                    experiences_undirected(&adjacency, &degrees, NodeId(i), aggregate),
                    Some(false)
                );
            }
        }
    }

    #[test]
    fn csv_shape_is_stable() {
        let (g, attrs) = star10();
        let qualities = vec![QualityVector::default(); g.node_count()];
        let mut table = AttributeTable::new(&g, &qualities);
        table.set(AttributeKind::Nt, attrs);
        let reports = full_report(&g, &table);
        let mut buf = Vec::new();
        write_report_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 33);
        assert!(lines[1].starts_with("mean,follower,in_degree,"));
        let row: Vec<&str> = lines
            .iter()
            .find(|l| l.starts_with("mean,followee,in_degree,"))
            .unwrap()
            .split(',')
            .collect();
        assert_eq!(row[3], "9");
        assert_eq!(row[5], "1.0000");
    }

    prop_compose! {
        fn arb_graph_and_attrs()(n in 2usize..24, density in 0u32..4)(
            n in Just(n),
            edges in proptest::collection::vec((0u32..n as u32, 0u32..n as u32), 1..=(n * (density as usize + 1))),
            attrs in proptest::collection::vec(0u32..12, n),
        ) -> (DirectedGraph, Vec<f64>) {
            let (g, _) = DirectedGraph::from_index_pairs(n, edges).unwrap();
            (g, attrs.into_iter().map(f64::from).collect())
        }
    }

    proptest! {
        /// No defined node above the critical value experiences the type.
        #[test]
        fn critical_value_bounds_the_experiencing_set((g, attrs) in arb_graph_and_attrs()) {
            for t in SuperiorityType::all().filter(|t| t.attribute == AttributeKind::Nt) {
                let verdicts = evaluate_all(&g, &attrs, t);
                let r = report_from_verdicts(t, &attrs, &verdicts);
                let bound = r.critical_value.unwrap_or(f64::NEG_INFINITY);
                for (i, v) in verdicts.iter().enumerate() {
                    if attrs[i] > bound {
                        prop_assert_ne!(*v, Some(true));
                    }
                }
            }
        }

        /// Strictly increasing affine maps leave every verdict unchanged.
        #[test]
        fn affine_maps_preserve_verdicts((g, attrs) in arb_graph_and_attrs()) {
            let mapped: Vec<f64> = attrs.iter().map(|&a| 3.0 * a + 7.0).collect();
            for t in SuperiorityType::all().filter(|t| t.attribute == AttributeKind::Nt) {
                prop_assert_eq!(
                    evaluate_all(&g, &attrs, t),
                    evaluate_all(&g, &mapped, t)
                );
            }
        }

        /// With odd neighborhoods of distinct values, median superiority is
        /// exactly "more than half the neighbors rank higher".
        #[test]
        fn median_matches_majority_on_odd_distinct(perm in Just(()), n in 3usize..16, seed in 0u64..500) {
            let _ = perm;
            // distinct attrs 0..n shuffled deterministically
            let mut attrs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mut state = seed.wrapping_add(1).wrapping_mul(0x9e3779b97f4a7c15);
            for i in (1..n).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                attrs.swap(i, (state % (i as u64 + 1)) as usize);
            }
            // node 0 follows an odd number of others
            let k = if (n - 1) % 2 == 0 { n - 2 } else { n - 1 };
            let edges: Vec<(u32, u32)> = (1..=k as u32).map(|j| (0, j)).collect();
            let (g, _) = DirectedGraph::from_index_pairs(n, edges).unwrap();
            let t = ty(Aggregate::Median, Direction::Followee, AttributeKind::Nt);
            let got = experiences(&g, &attrs, NodeId(0), t).unwrap();
            let higher = (1..=k).filter(|&j| attrs[j] > attrs[0]).count();
            prop_assert_eq!(got, higher * 2 > k);
        }

        /// Any undirected graph with non-constant degrees has at least one
        /// node experiencing mean superiority.
        #[test]
        fn classical_paradox_on_nonconstant_degrees(
            n in 3usize..20,
            extra in proptest::collection::vec((0u32..20, 0u32..20), 0..20),
        ) {
            // random tree plus extra undirected edges
            let mut adjacency: Vec<Vec<NodeId>> = vec![Vec::new(); n];
            let mut link = |adjacency: &mut Vec<Vec<NodeId>>, a: usize, b: usize| {
                if a != b && !adjacency[a].contains(&NodeId(b as u32)) {
                    adjacency[a].push(NodeId(b as u32));
                    adjacency[b].push(NodeId(a as u32));
                }
            };
            for i in 1..n {
                let parent = (i * 7 + 3) % i;
                link(&mut adjacency, i, parent);
            }
            for (a, b) in extra {
                let (a, b) = (a as usize % n, b as usize % n);
                link(&mut adjacency, a, b);
            }
            let degrees: Vec<f64> = adjacency.iter().map(|l| l.len() as f64).collect();
            prop_assume!(degrees.iter().any(|&d| d != degrees[0]));
            let experiencing = (0..n).any(|i| {
                experiences_undirected(&adjacency, &degrees, NodeId(i as u32), Aggregate::Mean)
                    == Some(true)
            });
            prop_assert!(experiencing);
        }
    }
}
