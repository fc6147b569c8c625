//! Distributional report artifacts: summary percentiles, log-binned
//! histograms, attribute correlations, prevalence and percentile-rank
//! curves, and the in-degree flow matrix.
//!
//! All binning is integer accounting: populations and link counts are
//! conserved exactly, and any floating normalization happens once at the
//! end, serially.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{DirectedGraph, Direction};
use crate::superiority::{self, AttributeKind, AttributeTable, SuperiorityType};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("no positive values: a log grid needs at least one")]
    NoPositiveValues,
}

/// Percentile levels reported in the attribute summaries.
pub const SUMMARY_LEVELS: [u8; 6] = [50, 75, 90, 95, 99, 100];

/// Mean plus the lower empirical quantiles of one attribute.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryStats {
    pub attribute: AttributeKind,
    pub mean: f64,
    /// `(level, value)` pairs for the levels in [`SUMMARY_LEVELS`].
    pub percentiles: [(u8, f64); 6],
}

/// Histogram over a geometric grid between the smallest and largest positive
/// value; exact zeros are held out in `zero_count` since they cannot live on
/// a log grid.
#[derive(Clone, Debug, Serialize)]
pub struct LogHistogram {
    pub attribute: AttributeKind,
    /// `nbins + 1` strictly increasing edges.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub zero_count: u64,
}

/// Fraction of nodes experiencing one superiority type per attribute-value
/// bin. Bin populations count only defined nodes (the proportion's
/// denominator); zero-valued nodes sit in a separate underflow bin.
#[derive(Clone, Debug, Serialize)]
pub struct PrevalenceCurve {
    #[serde(rename = "type")]
    pub ty: SuperiorityType,
    pub bin_edges: Vec<f64>,
    pub defined: Vec<u64>,
    pub experiencing: Vec<u64>,
    pub zero_defined: u64,
    pub zero_experiencing: u64,
}

impl PrevalenceCurve {
    /// Proportion for a bin; absent when no defined node fell in it.
    pub fn proportion(&self, bin: usize) -> Option<f64> {
        ratio(self.experiencing[bin], self.defined[bin])
    }

    pub fn zero_proportion(&self) -> Option<f64> {
        ratio(self.zero_experiencing, self.zero_defined)
    }
}

/// Same report over equal-width bins of percentile rank.
#[derive(Clone, Debug, Serialize)]
pub struct PercentileCurve {
    #[serde(rename = "type")]
    pub ty: SuperiorityType,
    pub bin_edges: Vec<f64>,
    pub defined: Vec<u64>,
    pub experiencing: Vec<u64>,
}

impl PercentileCurve {
    pub fn proportion(&self, bin: usize) -> Option<f64> {
        ratio(self.experiencing[bin], self.defined[bin])
    }
}

/// Link mass between log-spaced in-degree bins. `counts[row * nbins + col]`
/// is the number of follow edges from a node in bin `col` to a node in bin
/// `row`; `stochastic` is the same matrix with every occupied column
/// normalized to sum 1.
#[derive(Clone, Debug, Serialize)]
pub struct FlowMatrix {
    pub nbins: usize,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub stochastic: Vec<f64>,
    pub column_mass: Vec<u64>,
}

impl FlowMatrix {
    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.nbins + col]
    }

    pub fn share(&self, row: usize, col: usize) -> f64 {
        self.stochastic[row * self.nbins + col]
    }
}

/// Pearson coefficients over the eight attributes. Zero-variance attributes
/// are flagged and their off-diagonal entries recorded as 0.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationMatrix {
    pub r: [[f64; 8]; 8],
    pub degenerate: [bool; 8],
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Geometric edges between `min_pos` and `max`. A degenerate range widens to
/// one octave so the grid stays strictly increasing.
fn geometric_edges(min_pos: f64, max: f64, nbins: usize) -> Vec<f64> {
    debug_assert!(min_pos > 0.0 && max >= min_pos && nbins >= 1);
    let (lo, hi) = if max <= min_pos * (1.0 + 1e-9) {
        (min_pos, min_pos * 2.0)
    } else {
        (min_pos, max)
    };
    let ratio = hi / lo;
    let mut edges: Vec<f64> = (0..=nbins)
        .map(|i| lo * ratio.powf(i as f64 / nbins as f64))
        .collect();
    edges[0] = lo;
    edges[nbins] = hi;
    for i in 1..=nbins {
        if edges[i] <= edges[i - 1] {
            edges[i] = edges[i - 1].next_up();
        }
    }
    edges
}

/// Bin of `v` on a grid: half-open `[e_i, e_{i+1})` with the last bin closed.
fn bin_index(edges: &[f64], v: f64) -> usize {
    let nbins = edges.len() - 1;
    let pos = edges.partition_point(|&e| e <= v);
    pos.saturating_sub(1).min(nbins - 1)
}

/// Mean and lower empirical quantiles: percentile `p` is the smallest value
/// `v` with `|{a <= v}| / N >= p / 100`.
pub fn summary(values: &[f64], attribute: AttributeKind) -> Result<SummaryStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyPopulation);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as u64;
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let percentiles = SUMMARY_LEVELS.map(|p| {
        let rank = (n * p as u64).div_ceil(100).max(1);
        (p, sorted[(rank - 1) as usize])
    });
    Ok(SummaryStats { attribute, mean, percentiles })
}

/// Log-binned histogram of the positive values; exact zeros (and any
/// nonpositive value) go to `zero_count`.
pub fn log_histogram(
    values: &[f64],
    attribute: AttributeKind,
    nbins: usize,
) -> Result<LogHistogram, StatsError> {
    assert!(nbins >= 1);
    let mut zero_count = 0u64;
    let mut min_pos = f64::INFINITY;
    let mut max_pos = f64::NEG_INFINITY;
    for &v in values {
        if v > 0.0 {
            min_pos = min_pos.min(v);
            max_pos = max_pos.max(v);
        } else {
            zero_count += 1;
        }
    }
    if !min_pos.is_finite() {
        return Err(StatsError::NoPositiveValues);
    }
    let bin_edges = geometric_edges(min_pos, max_pos, nbins);
    let mut counts = vec![0u64; nbins];
    for &v in values {
        if v > 0.0 {
            counts[bin_index(&bin_edges, v)] += 1;
        }
    }
    Ok(LogHistogram { attribute, bin_edges, counts, zero_count })
}

/// Pearson correlation matrix over all eight attribute columns, two-pass
/// centered computation.
pub fn correlation_matrix(table: &AttributeTable) -> CorrelationMatrix {
    let n = table.len();
    let mut means = [0.0f64; 8];
    let mut sds = [0.0f64; 8];
    let mut degenerate = [true; 8];
    if n >= 2 {
        for (k, kind) in AttributeKind::ALL.into_iter().enumerate() {
            let col = table.get(kind);
            means[k] = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|&v| (v - means[k]) * (v - means[k])).sum::<f64>();
            sds[k] = (var / n as f64).sqrt();
            degenerate[k] = sds[k] == 0.0;
        }
    }
    let mut r = [[0.0f64; 8]; 8];
    for i in 0..8 {
        r[i][i] = 1.0;
        for j in (i + 1)..8 {
            if degenerate[i] || degenerate[j] {
                continue;
            }
            let (a, b) = (table.get(AttributeKind::ALL[i]), table.get(AttributeKind::ALL[j]));
            let cov = a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x - means[i]) * (y - means[j]))
                .sum::<f64>()
                / n as f64;
            let coeff = cov / (sds[i] * sds[j]);
            r[i][j] = coeff;
            r[j][i] = coeff;
        }
    }
    CorrelationMatrix { r, degenerate }
}

/// Percentile rank of each value: `|{u : a_u <= a_x}| / N`, in (0, 1]. Ties
/// share a rank, and the rank is invariant under any strictly increasing
/// transformation of the values.
pub fn percentile_ranks(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .map(|&v| sorted.partition_point(|&e| e <= v) as f64 / n)
        .collect()
}

/// Prevalence curve from precomputed verdicts. Undefined nodes are excluded
/// from both sides of every bin proportion; the log grid spans the positive
/// attribute range of the whole population.
pub fn prevalence_curve_from_verdicts(
    ty: SuperiorityType,
    attrs: &[f64],
    verdicts: &[Option<bool>],
    nbins: usize,
) -> PrevalenceCurve {
    assert_eq!(attrs.len(), verdicts.len());
    let mut min_pos = f64::INFINITY;
    let mut max_pos = f64::NEG_INFINITY;
    for &v in attrs {
        if v > 0.0 {
            min_pos = min_pos.min(v);
            max_pos = max_pos.max(v);
        }
    }
    // With no positive value everything lands in the underflow bin and the
    // grid is a placeholder octave.
    let bin_edges = if min_pos.is_finite() {
        geometric_edges(min_pos, max_pos, nbins)
    } else {
        geometric_edges(1.0, 2.0, nbins)
    };
    let mut curve = PrevalenceCurve {
        ty,
        bin_edges,
        defined: vec![0; nbins],
        experiencing: vec![0; nbins],
        zero_defined: 0,
        zero_experiencing: 0,
    };
    for (i, verdict) in verdicts.iter().enumerate() {
        let Some(exp) = verdict else { continue };
        let v = attrs[i];
        if v > 0.0 {
            let b = bin_index(&curve.bin_edges, v);
            curve.defined[b] += 1;
            curve.experiencing[b] += u64::from(*exp);
        } else {
            curve.zero_defined += 1;
            curve.zero_experiencing += u64::from(*exp);
        }
    }
    curve
}

/// Evaluate verdicts and bin them by attribute value.
pub fn prevalence_curve(
    graph: &DirectedGraph,
    attrs: &[f64],
    ty: SuperiorityType,
    nbins: usize,
) -> PrevalenceCurve {
    let verdicts = superiority::evaluate_all(graph, attrs, ty);
    prevalence_curve_from_verdicts(ty, attrs, &verdicts, nbins)
}

/// Percentile curve from precomputed ranks and verdicts: equal-width bins
/// between the smallest rank and 1.
pub fn percentile_curve_from_ranks(
    ty: SuperiorityType,
    ranks: &[f64],
    verdicts: &[Option<bool>],
    nbins: usize,
) -> PercentileCurve {
    assert_eq!(ranks.len(), verdicts.len());
    assert!(nbins >= 1);
    let min_rank = ranks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = 1.0f64;
    // All-equal attributes give every node rank 1; fall back to the full
    // rank range so the single occupied bin is well defined.
    let lo = if min_rank.is_finite() && min_rank < hi { min_rank } else { 0.0 };
    let mut bin_edges: Vec<f64> = (0..=nbins)
        .map(|i| lo + (hi - lo) * i as f64 / nbins as f64)
        .collect();
    bin_edges[0] = lo;
    bin_edges[nbins] = hi;
    for i in 1..=nbins {
        if bin_edges[i] <= bin_edges[i - 1] {
            bin_edges[i] = bin_edges[i - 1].next_up();
        }
    }
    let mut curve = PercentileCurve {
        ty,
        bin_edges,
        defined: vec![0; nbins],
        experiencing: vec![0; nbins],
    };
    for (i, verdict) in verdicts.iter().enumerate() {
        let Some(exp) = verdict else { continue };
        let b = bin_index(&curve.bin_edges, ranks[i]);
        curve.defined[b] += 1;
        curve.experiencing[b] += u64::from(*exp);
    }
    curve
}

/// Evaluate verdicts and bin them by percentile rank of the attribute.
pub fn percentile_curve(
    graph: &DirectedGraph,
    attrs: &[f64],
    ty: SuperiorityType,
    nbins: usize,
) -> PercentileCurve {
    let verdicts = superiority::evaluate_all(graph, attrs, ty);
    let ranks = percentile_ranks(attrs);
    percentile_curve_from_ranks(ty, &ranks, &verdicts, nbins)
}

/// Follow-edge mass between log-spaced in-degree bins. Binning applies a
/// unit offset so zero in-degree nodes share the first bin instead of
/// falling off the log grid; source bin is the column, destination bin the
/// row.
pub fn flow_matrix(graph: &DirectedGraph, in_degrees: &[f64], nbins: usize) -> FlowMatrix {
    assert_eq!(in_degrees.len(), graph.node_count());
    assert!(nbins >= 1);
    let shifted: Vec<f64> = in_degrees.iter().map(|&d| d + 1.0).collect();
    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    for &v in &shifted {
        min_v = min_v.min(v);
        max_v = max_v.max(v);
    }
    let bin_edges = if min_v.is_finite() {
        geometric_edges(min_v, max_v, nbins)
    } else {
        geometric_edges(1.0, 2.0, nbins)
    };
    let node_bin: Vec<usize> = shifted.iter().map(|&v| bin_index(&bin_edges, v)).collect();
    let mut counts = vec![0u64; nbins * nbins];
    let mut column_mass = vec![0u64; nbins];
    for a in graph.nodes() {
        let col = node_bin[a.index()];
        for &b in graph.adjacency(a.index(), Direction::Followee) {
            let row = node_bin[b.index()];
            counts[row * nbins + col] += 1;
            column_mass[col] += 1;
        }
    }
    let mut stochastic = vec![0.0f64; nbins * nbins];
    for col in 0..nbins {
        if column_mass[col] == 0 {
            continue;
        }
        let mass = column_mass[col] as f64;
        for row in 0..nbins {
            stochastic[row * nbins + col] = counts[row * nbins + col] as f64 / mass;
        }
    }
    FlowMatrix { nbins, bin_edges, counts, stochastic, column_mass }
}

// ---------------------------------------------------------------------------
// emission

pub fn write_summary_csv(rows: &[SummaryStats], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "attribute,mean,p50,p75,p90,p95,p99,max")?;
    for s in rows {
        write!(w, "{},{:.6}", s.attribute.name(), s.mean)?;
        for (_, v) in s.percentiles {
            write!(w, ",{:.6}", v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_histogram_csv(h: &LogHistogram, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "bin,lower,upper,count")?;
    writeln!(w, "underflow,,,{}", h.zero_count)?;
    for (i, &c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{},{},{}", i, h.bin_edges[i], h.bin_edges[i + 1], c)?;
    }
    Ok(())
}

fn proportion_field(num: u64, den: u64) -> String {
    match ratio(num, den) {
        Some(p) => format!("{p:.6}"),
        None => String::new(),
    }
}

pub fn write_prevalence_csv(c: &PrevalenceCurve, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "bin,lower,upper,defined,experiencing,proportion")?;
    writeln!(
        w,
        "underflow,,,{},{},{}",
        c.zero_defined,
        c.zero_experiencing,
        proportion_field(c.zero_experiencing, c.zero_defined)
    )?;
    for i in 0..c.defined.len() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            i,
            c.bin_edges[i],
            c.bin_edges[i + 1],
            c.defined[i],
            c.experiencing[i],
            proportion_field(c.experiencing[i], c.defined[i])
        )?;
    }
    Ok(())
}

pub fn write_percentile_csv(c: &PercentileCurve, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "bin,lower,upper,defined,experiencing,proportion")?;
    for i in 0..c.defined.len() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            i,
            c.bin_edges[i],
            c.bin_edges[i + 1],
            c.defined[i],
            c.experiencing[i],
            proportion_field(c.experiencing[i], c.defined[i])
        )?;
    }
    Ok(())
}

pub fn write_flow_csv(m: &FlowMatrix, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "row,col,count,share")?;
    for row in 0..m.nbins {
        for col in 0..m.nbins {
            writeln!(w, "{},{},{},{:.12}", row, col, m.count(row, col), m.share(row, col))?;
        }
    }
    Ok(())
}

pub fn write_correlation_csv(m: &CorrelationMatrix, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "row_attribute,col_attribute,r")?;
    for (i, row_kind) in AttributeKind::ALL.into_iter().enumerate() {
        for (j, col_kind) in AttributeKind::ALL.into_iter().enumerate() {
            writeln!(w, "{},{},{:.6}", row_kind.name(), col_kind.name(), m.r[i][j])?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CurveJson<'a> {
    #[serde(rename = "type")]
    ty: String,
    bin_edges: &'a [f64],
    defined: &'a [u64],
    experiencing: &'a [u64],
    proportion: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_bin: Option<ZeroBinJson>,
}

#[derive(Serialize)]
struct ZeroBinJson {
    defined: u64,
    experiencing: u64,
    proportion: Option<f64>,
}

pub fn write_prevalence_json(c: &PrevalenceCurve, w: impl Write) -> std::io::Result<()> {
    let view = CurveJson {
        ty: c.ty.label(),
        bin_edges: &c.bin_edges,
        defined: &c.defined,
        experiencing: &c.experiencing,
        proportion: (0..c.defined.len()).map(|i| c.proportion(i)).collect(),
        zero_bin: Some(ZeroBinJson {
            defined: c.zero_defined,
            experiencing: c.zero_experiencing,
            proportion: c.zero_proportion(),
        }),
    };
    serde_json::to_writer_pretty(w, &view).map_err(std::io::Error::from)
}

pub fn write_percentile_json(c: &PercentileCurve, w: impl Write) -> std::io::Result<()> {
    let view = CurveJson {
        ty: c.ty.label(),
        bin_edges: &c.bin_edges,
        defined: &c.defined,
        experiencing: &c.experiencing,
        proportion: (0..c.defined.len()).map(|i| c.proportion(i)).collect(),
        zero_bin: None,
    };
    serde_json::to_writer_pretty(w, &view).map_err(std::io::Error::from)
}

pub fn write_json<T: Serialize>(value: &T, w: impl Write) -> std::io::Result<()> {
    serde_json::to_writer_pretty(w, value).map_err(std::io::Error::from)
}
