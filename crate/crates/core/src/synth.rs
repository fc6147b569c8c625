//! Seeded synthetic graphs, attribute assignments with controllable
//! degree coupling, and a brute-force oracle for the superiority reports.
//!
//! Everything here is test and experiment scaffolding: generation is
//! deterministic for a fixed seed so fixtures can be regenerated bit-for-bit.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::DirectedGraph;
use crate::superiority::{Aggregate, SuperiorityReport, SuperiorityType};
use crate::QualityVector;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator parameters: {0}")]
    BadParams(String),
    #[error("infeasible degree sequence: {0}")]
    InfeasibleDegreeSequence(String),
    #[error("rank correlation target {target} unattainable (best achievable {achieved:.3})")]
    CorrelationUnattainable { target: f64, achieved: f64 },
}

/// Graph family plus its parameters.
#[derive(Clone, Debug)]
pub enum GenKind {
    /// `n - 1` leaves all following node 0.
    Star { n: usize },
    /// Every node follows its next `k` ring successors.
    KRegularRing { n: usize, k: usize },
    /// Arrivals follow `m` distinct existing nodes, chosen proportional to
    /// in-degree + 1, starting from `m` edgeless seed nodes.
    PrefAttach { n: usize, m: usize },
    /// Directed configuration model by stub matching with re-draw.
    ConfigModel { in_degrees: Vec<u32>, out_degrees: Vec<u32> },
}

#[derive(Clone, Debug)]
pub struct GenSpec {
    pub kind: GenKind,
    pub seed: u64,
}

/// A generated graph plus how many stub pairs could not be placed (nonzero
/// only for the configuration model, which drops leftovers after the retry
/// cap).
#[derive(Debug)]
pub struct Generated {
    pub graph: DirectedGraph,
    pub dropped_stubs: u64,
}

/// Generate a graph. Deterministic for a fixed spec.
pub fn generate(spec: &GenSpec) -> Result<Generated, SynthError> {
    match &spec.kind {
        GenKind::Star { n } => {
            if *n < 2 {
                return Err(SynthError::BadParams("star needs at least 2 nodes".into()));
            }
            let pairs: Vec<(u32, u32)> = (1..*n as u32).map(|i| (i, 0)).collect();
            finish(*n, pairs, 0)
        }
        GenKind::KRegularRing { n, k } => {
            if *n < 2 || *k == 0 || *k >= *n {
                return Err(SynthError::BadParams(format!(
                    "ring needs 0 < k < n, got n={n} k={k}"
                )));
            }
            let mut pairs = Vec::with_capacity(n * k);
            for i in 0..*n {
                for j in 1..=*k {
                    pairs.push((i as u32, ((i + j) % n) as u32));
                }
            }
            finish(*n, pairs, 0)
        }
        GenKind::PrefAttach { n, m } => pref_attach(*n, *m, spec.seed),
        GenKind::ConfigModel { in_degrees, out_degrees } => {
            config_model(in_degrees, out_degrees, spec.seed)
        }
    }
}

fn finish(n: usize, pairs: Vec<(u32, u32)>, dropped: u64) -> Result<Generated, SynthError> {
    let (graph, _) = DirectedGraph::from_index_pairs(n, pairs)
        .map_err(|e| SynthError::BadParams(e.to_string()))?;
    Ok(Generated { graph, dropped_stubs: dropped })
}

fn pref_attach(n: usize, m: usize, seed: u64) -> Result<Generated, SynthError> {
    if m == 0 || n <= m {
        return Err(SynthError::BadParams(format!(
            "preferential attachment needs 0 < m < n, got n={n} m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // One urn entry per unit of (in-degree + 1); sampling an entry is
    // sampling a node proportional to that weight.
    let mut urn: Vec<u32> = (0..m as u32).collect();
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity((n - m) * m);
    let mut targets: Vec<u32> = Vec::with_capacity(m);
    for v in m as u32..n as u32 {
        targets.clear();
        while targets.len() < m {
            let t = urn[rng.gen_range(0..urn.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            pairs.push((v, t));
        }
        urn.extend_from_slice(&targets);
        urn.push(v);
    }
    finish(n, pairs, 0)
}

fn config_model(
    in_degrees: &[u32],
    out_degrees: &[u32],
    seed: u64,
) -> Result<Generated, SynthError> {
    let n = in_degrees.len();
    if n == 0 || out_degrees.len() != n {
        return Err(SynthError::BadParams(
            "degree sequences must be non-empty and of equal length".into(),
        ));
    }
    let in_sum: u64 = in_degrees.iter().map(|&d| d as u64).sum();
    let out_sum: u64 = out_degrees.iter().map(|&d| d as u64).sum();
    if in_sum != out_sum {
        return Err(SynthError::InfeasibleDegreeSequence(format!(
            "in-degree sum {in_sum} != out-degree sum {out_sum}"
        )));
    }
    let max_simple = n as u32 - 1;
    for (kind, seq) in [("in", in_degrees), ("out", out_degrees)] {
        if let Some((i, &d)) = seq.iter().enumerate().find(|&(_, &d)| d > max_simple) {
            return Err(SynthError::InfeasibleDegreeSequence(format!(
                "{kind}-degree {d} of node {i} exceeds n-1 = {max_simple}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out_stubs: Vec<u32> = Vec::with_capacity(out_sum as usize);
    let mut in_stubs: Vec<u32> = Vec::with_capacity(in_sum as usize);
    for (i, &d) in out_degrees.iter().enumerate() {
        out_stubs.extend(std::iter::repeat(i as u32).take(d as usize));
    }
    for (i, &d) in in_degrees.iter().enumerate() {
        in_stubs.extend(std::iter::repeat(i as u32).take(d as usize));
    }

    let mut seen: HashSet<u64> = HashSet::with_capacity(out_stubs.len());
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(out_stubs.len());
    const MAX_ROUNDS: usize = 64;
    let mut round = 0;
    while !out_stubs.is_empty() && round < MAX_ROUNDS {
        in_stubs.shuffle(&mut rng);
        if round > 0 {
            out_stubs.shuffle(&mut rng);
        }
        let mut left_out = Vec::new();
        let mut left_in = Vec::new();
        for (&a, &b) in out_stubs.iter().zip(in_stubs.iter()) {
            let key = (a as u64) << 32 | b as u64;
            if a != b && seen.insert(key) {
                pairs.push((a, b));
            } else {
                left_out.push(a);
                left_in.push(b);
            }
        }
        out_stubs = left_out;
        in_stubs = left_in;
        round += 1;
    }
    let dropped = out_stubs.len() as u64;
    finish(n, pairs, dropped)
}

/// Heavy-tailed in / lighter out degree sequences with exact edge total,
/// for configuration-model fixtures.
pub fn pareto_degree_sequences(
    n: usize,
    edges: u64,
    in_alpha: f64,
    out_alpha: f64,
    seed: u64,
) -> (Vec<u32>, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |alpha: f64, rng: &mut ChaCha8Rng| -> Vec<u32> {
        let weights: Vec<f64> = (0..n).map(|_| pareto_sample(rng, alpha)).collect();
        let total: f64 = weights.iter().sum();
        let cap = (n - 1) as u64;
        let mut seq: Vec<u32> = weights
            .iter()
            .map(|w| (((w / total) * edges as f64).floor() as u64).min(cap) as u32)
            .collect();
        let mut assigned: u64 = seq.iter().map(|&d| d as u64).sum();
        let mut i = 0;
        while assigned < edges {
            if (seq[i] as u64) < cap {
                seq[i] += 1;
                assigned += 1;
            }
            i = (i + 1) % n;
        }
        seq
    };
    (draw(in_alpha, &mut rng), draw(out_alpha, &mut rng))
}

/// Attribute value distribution.
#[derive(Clone, Copy, Debug)]
pub enum AttrDistribution {
    Constant(f64),
    /// Uniform on [0, 1).
    Uniform,
    /// Pareto with the given shape, scale 1.
    Pareto { alpha: f64 },
}

/// Request for an i.i.d. attribute draw reordered to hit a rank-correlation
/// target against in-degree.
#[derive(Clone, Copy, Debug)]
pub struct AttrSpec {
    pub distribution: AttrDistribution,
    /// Target Spearman correlation with in-degree, in [-1, 1]. 0 means a
    /// plain random assignment, 1 full rank alignment.
    pub rho: f64,
    pub seed: u64,
}

/// An assignment plus the measured rank correlation. `achieved_rho` is absent
/// when either side is constant and the correlation is degenerate.
#[derive(Clone, Debug)]
pub struct AttributeAssignment {
    pub values: Vec<f64>,
    pub achieved_rho: Option<f64>,
}

fn pareto_sample(rng: &mut ChaCha8Rng, alpha: f64) -> f64 {
    let u: f64 = rng.gen();
    (1.0 - u).powf(-1.0 / alpha)
}

/// Tolerance band around the rank-correlation target.
const RHO_BAND: f64 = 0.045;

/// Draw i.i.d. values and reorder them until the empirical rank correlation
/// with in-degree lands within the band around `spec.rho`.
///
/// Swaps are applied one at a time from the fully (anti-)aligned start, with
/// the correlation tracked incrementally, until the target band is reached.
pub fn assign_attributes(
    graph: &DirectedGraph,
    spec: &AttrSpec,
) -> Result<AttributeAssignment, SynthError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(SynthError::BadParams("graph has no nodes".into()));
    }
    if !(-1.0..=1.0).contains(&spec.rho) {
        return Err(SynthError::BadParams(format!("rho {} outside [-1, 1]", spec.rho)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values: Vec<f64> = match spec.distribution {
        AttrDistribution::Constant(c) => vec![c; n],
        AttrDistribution::Uniform => (0..n).map(|_| rng.gen::<f64>()).collect(),
        AttrDistribution::Pareto { alpha } => {
            if alpha <= 0.0 {
                return Err(SynthError::BadParams(format!("pareto alpha {alpha} must be > 0")));
            }
            (0..n).map(|_| pareto_sample(&mut rng, alpha)).collect()
        }
    };

    let degrees: Vec<f64> = graph.nodes().map(|x| graph.in_degree(x) as f64).collect();

    if spec.rho == 0.0 {
        values.shuffle(&mut rng);
        return Ok(AttributeAssignment {
            achieved_rho: spearman(&degrees, &values),
            values,
        });
    }

    let deg_ranks = average_ranks(&degrees);
    let mut val_sorted = values;
    val_sorted.sort_unstable_by(f64::total_cmp);
    let val_ranks_sorted = average_ranks(&val_sorted);

    // Aligned start: k-th smallest value on the k-th smallest in-degree
    // (reversed for negative targets). Rearrangement puts this at the
    // extreme of what any reordering can reach.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| deg_ranks[a].total_cmp(&deg_ranks[b]).then(a.cmp(&b)));
    let mut values = vec![0.0; n];
    let mut val_ranks = vec![0.0; n];
    for (k, &pos) in order.iter().enumerate() {
        let src = if spec.rho >= 0.0 { k } else { n - 1 - k };
        values[pos] = val_sorted[src];
        val_ranks[pos] = val_ranks_sorted[src];
    }

    let stats = |ranks: &[f64]| {
        let mean = ranks.iter().sum::<f64>() / ranks.len() as f64;
        let var = ranks.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / ranks.len() as f64;
        (mean, var.sqrt())
    };
    let (dmean, dsd) = stats(&deg_ranks);
    let (vmean, vsd) = stats(&val_ranks);
    if dsd == 0.0 || vsd == 0.0 {
        return Ok(AttributeAssignment { values, achieved_rho: None });
    }

    let mut cross: f64 = deg_ranks.iter().zip(&val_ranks).map(|(d, v)| d * v).sum();
    let rho_of = |cross: f64| (cross / n as f64 - dmean * vmean) / (dsd * vsd);

    let start = rho_of(cross);
    // rho = +/-1 means full (anti-)alignment by definition; ties may keep the
    // measured value below 1 and that is fine.
    if spec.rho.abs() == 1.0 || (start - spec.rho).abs() <= RHO_BAND {
        return Ok(AttributeAssignment { values, achieved_rho: Some(start) });
    }
    if (spec.rho >= 0.0 && start < spec.rho - RHO_BAND)
        || (spec.rho < 0.0 && start > spec.rho + RHO_BAND)
    {
        // Ties cap the reachable magnitude below the target.
        return Err(SynthError::CorrelationUnattainable { target: spec.rho, achieved: start });
    }

    let mut current = start;
    let max_attempts = 500usize.saturating_mul(n).max(10_000);
    for _ in 0..max_attempts {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let delta = (deg_ranks[i] - deg_ranks[j]) * (val_ranks[j] - val_ranks[i]);
        let candidate = rho_of(cross + delta);
        if (candidate - spec.rho).abs() < (current - spec.rho).abs() {
            cross += delta;
            current = candidate;
            values.swap(i, j);
            val_ranks.swap(i, j);
            if (current - spec.rho).abs() <= RHO_BAND {
                return Ok(AttributeAssignment { values, achieved_rho: Some(current) });
            }
        }
    }
    Err(SynthError::CorrelationUnattainable { target: spec.rho, achieved: current })
}

/// Ranks (1-based) with ties sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &pos in &order[i..=j] {
            ranks[pos] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when degenerate (constant input or
/// fewer than two points).
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mx = rx.iter().sum::<f64>() / n as f64;
    let my = ry.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for i in 0..n {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        num += dx * dy;
        sx += dx * dx;
        sy += dy * dy;
    }
    if sx == 0.0 || sy == 0.0 {
        return None;
    }
    Some(num / (sx * sy).sqrt())
}

/// Brute-force reference for one superiority report.
///
/// Re-derives every verdict from scratch by materializing each node's
/// neighbor attribute list, summing it, and fully sorting it for the median.
/// Kept deliberately separate from the production evaluation path so the two
/// can check each other. Capped at 10^4 nodes; this is test machinery.
pub fn oracle_report(
    graph: &DirectedGraph,
    attrs: &[f64],
    ty: SuperiorityType,
) -> SuperiorityReport {
    assert!(
        graph.node_count() <= 10_000,
        "oracle_report is a brute-force checker, capped at 10^4 nodes"
    );
    assert_eq!(attrs.len(), graph.node_count());
    let mut defined = 0u64;
    let mut experiencing = 0u64;
    let mut critical: Option<f64> = None;
    for x in graph.nodes() {
        let mut nbr_values: Vec<f64> = graph
            .neighbors(x, ty.direction)
            .expect("iterating valid nodes")
            .iter()
            .map(|&y| attrs[y.index()])
            .collect();
        if nbr_values.is_empty() {
            continue;
        }
        defined += 1;
        let own = attrs[x.index()];
        let sum: f64 = nbr_values.iter().sum();
        nbr_values.sort_by(f64::total_cmp);
        let len = nbr_values.len();
        let aggregate = match ty.aggregate {
            Aggregate::Mean => sum / len as f64,
            Aggregate::Median => {
                if len % 2 == 1 {
                    nbr_values[len / 2]
                } else {
                    (nbr_values[len / 2 - 1] + nbr_values[len / 2]) / 2.0
                }
            }
        };
        if own < aggregate {
            experiencing += 1;
            critical = Some(match critical {
                Some(c) => c.max(own),
                None => own,
            });
        }
    }
    SuperiorityReport {
        ty,
        defined,
        experiencing,
        prevalence: if defined > 0 { experiencing as f64 / defined as f64 } else { 0.0 },
        critical_value: critical,
    }
}

/// Plausible per-node quality vectors for synthetic fixtures: a large silent
/// population, heavy-tailed activity, and repost counts consistent with the
/// quality-vector invariants.
pub fn synthetic_qualities(n: usize, seed: u64) -> Vec<QualityVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if rng.gen::<f64>() < 0.45 {
                return QualityVector::default();
            }
            let not_ = (pareto_sample(&mut rng, 1.6).floor() as u64).clamp(1, 10_000);
            let own_reposts = (pareto_sample(&mut rng, 2.0).floor() as u64 - 1).min(10_000);
            let nt = not_ + own_reposts;
            let ttr = if rng.gen::<f64>() < 0.5 {
                0
            } else {
                (pareto_sample(&mut rng, 1.8).floor() as u64).clamp(1, 50_000)
            };
            let ntr = if ttr == 0 { 0 } else { rng.gen_range(1..=not_.min(ttr)) };
            QualityVector::from_counts(nt, not_, ttr, ntr)
        })
        .collect()
}
