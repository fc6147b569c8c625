//! Post/repost log ingestion, cascade-root resolution, and per-node quality
//! measures.
//!
//! A repost chain is credited entirely to the root post and root user: in a
//! chain C reposts B reposts A, both repost records count for A's original
//! and nobody else. Reposts whose parent never appears in the log become
//! pseudo-roots so their own reposts are not lost.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::graph::IdMap;

#[derive(Debug, Error)]
pub enum ActivityError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("repost parent chain contains a cycle through tweet {tweet_id}")]
    ParentCycle { tweet_id: u64 },
    #[error("tweet id {tweet_id} appears more than once in the log")]
    DuplicateTweetId { tweet_id: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One post. `parent: None` means an original post; `Some(id)` a repost of
/// that post. `content_hash` is the ingester-supplied content fingerprint
/// used for per-user duplicate removal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TweetRecord {
    pub tweet_id: u64,
    pub user: u64,
    pub timestamp: i64,
    pub content_hash: u64,
    pub parent: Option<u64>,
}

/// Resolution of every tweet in a log to its cascade root.
#[derive(Clone, Debug, Default)]
pub struct CascadeIndex {
    root_of: HashMap<u64, (u64, u64)>,
    orphans: HashSet<u64>,
}

impl CascadeIndex {
    /// `(root tweet id, root user)` for a tweet, if it was in the log.
    pub fn root_of(&self, tweet_id: u64) -> Option<(u64, u64)> {
        self.root_of.get(&tweet_id).copied()
    }

    /// True for reposts whose parent was missing from the log; they resolve
    /// to themselves.
    pub fn is_orphan(&self, tweet_id: u64) -> bool {
        self.orphans.contains(&tweet_id)
    }

    pub fn orphan_count(&self) -> u64 {
        self.orphans.len() as u64
    }

    pub fn len(&self) -> usize {
        self.root_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root_of.is_empty()
    }
}

/// Per-node activity/influence bundle.
///
/// `rpt` and `ftr` are defined as 0 when the user initiated nothing, so the
/// large silent population carries zeros instead of undefined values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct QualityVector {
    /// Number of posts of any kind.
    pub nt: u64,
    /// Number of original posts.
    pub not_: u64,
    /// Gross reposts received across the user's cascades.
    pub ttr: u64,
    /// Originals that received at least one repost from another user.
    pub ntr: u64,
    /// Reposts per original: `ttr / not_`.
    pub rpt: f64,
    /// Fraction of originals reposted: `ntr / not_`.
    pub ftr: f64,
}

impl QualityVector {
    pub fn from_counts(nt: u64, not_: u64, ttr: u64, ntr: u64) -> QualityVector {
        let (rpt, ftr) = if not_ > 0 {
            (ttr as f64 / not_ as f64, ntr as f64 / not_ as f64)
        } else {
            (0.0, 0.0)
        };
        QualityVector { nt, not_, ttr, ntr, rpt, ftr }
    }
}

/// Remove repeated posts per user: for each `(user, content_hash)` pair only
/// the earliest record survives, ties broken by smaller tweet id. Surviving
/// records keep their original relative order.
pub fn dedup(log: Vec<TweetRecord>) -> (Vec<TweetRecord>, u64) {
    let mut winner: HashMap<(u64, u64), (i64, u64)> = HashMap::with_capacity(log.len());
    for rec in &log {
        let key = (rec.user, rec.content_hash);
        let cand = (rec.timestamp, rec.tweet_id);
        winner
            .entry(key)
            .and_modify(|best| {
                if cand < *best {
                    *best = cand;
                }
            })
            .or_insert(cand);
    }
    let before = log.len();
    let kept: Vec<TweetRecord> = log
        .into_iter()
        .filter(|rec| winner[&(rec.user, rec.content_hash)] == (rec.timestamp, rec.tweet_id))
        .collect();
    let removed = (before - kept.len()) as u64;
    (kept, removed)
}

/// Resolve every tweet to its cascade root by following parent links.
///
/// Reposts whose parent is absent from the log become pseudo-roots (flagged
/// orphan). A cycle in the parent chain is corrupt input and is reported via
/// the smallest tweet id on the cycle.
pub fn resolve_cascades(log: &[TweetRecord]) -> Result<CascadeIndex, ActivityError> {
    let mut by_id: HashMap<u64, &TweetRecord> = HashMap::with_capacity(log.len());
    for rec in log {
        if by_id.insert(rec.tweet_id, rec).is_some() {
            return Err(ActivityError::DuplicateTweetId { tweet_id: rec.tweet_id });
        }
    }

    let mut index = CascadeIndex {
        root_of: HashMap::with_capacity(log.len()),
        orphans: HashSet::new(),
    };
    let mut chain: Vec<u64> = Vec::new();
    for rec in log {
        if index.root_of.contains_key(&rec.tweet_id) {
            continue;
        }
        chain.clear();
        let mut cur = rec;
        let root = loop {
            if let Some(&root) = index.root_of.get(&cur.tweet_id) {
                break root;
            }
            chain.push(cur.tweet_id);
            match cur.parent {
                None => break (cur.tweet_id, cur.user),
                Some(parent_id) => match by_id.get(&parent_id) {
                    None => {
                        // Pseudo-root: parent outside the log.
                        index.orphans.insert(cur.tweet_id);
                        break (cur.tweet_id, cur.user);
                    }
                    Some(&parent) => {
                        if chain.contains(&parent.tweet_id) {
                            let at = chain.iter().position(|&t| t == parent.tweet_id).unwrap();
                            let smallest = *chain[at..].iter().min().unwrap();
                            return Err(ActivityError::ParentCycle { tweet_id: smallest });
                        }
                        cur = parent;
                    }
                },
            }
        };
        for &tid in &chain {
            index.root_of.insert(tid, root);
        }
    }
    Ok(index)
}

/// Bookkeeping from quality accumulation, for run manifests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QualityStats {
    /// Records by users absent from the id map, skipped wholesale.
    pub skipped_records: u64,
    /// Distinct users absent from the id map.
    pub skipped_users: u64,
    /// Reposts of the user's own cascade, not credited.
    pub self_reposts: u64,
    /// Repost records credited to a root user.
    pub credited_reposts: u64,
    /// Reposts whose root user is absent from the id map, uncreditable.
    pub uncreditable_reposts: u64,
}

/// Compute the six quality measures for every node in the id map.
///
/// The log must already be deduplicated. Records by users outside the id map
/// are counted and skipped; nodes with no surviving activity get the all-zero
/// vector. Reposts of a user's own cascade are excluded from that user's
/// repost tallies.
pub fn compute_qualities(
    log: &[TweetRecord],
    index: &CascadeIndex,
    ids: &IdMap,
) -> (Vec<QualityVector>, QualityStats) {
    let n = ids.len();
    let mut nt = vec![0u64; n];
    let mut not_ = vec![0u64; n];
    let mut ttr = vec![0u64; n];
    let mut stats = QualityStats::default();
    let mut skipped_users: HashSet<u64> = HashSet::new();
    // Reposts received per root tweet, for the cascade counts.
    let mut reposts_per_root: HashMap<u64, u64> = HashMap::new();

    for rec in log {
        let Some(node) = ids.node_id(rec.user) else {
            stats.skipped_records += 1;
            skipped_users.insert(rec.user);
            continue;
        };
        nt[node.index()] += 1;
        if rec.parent.is_none() {
            not_[node.index()] += 1;
        }
        let (root_tid, root_user) = index
            .root_of(rec.tweet_id)
            .expect("every log record is in the cascade index");
        if root_tid == rec.tweet_id {
            continue; // roots and pseudo-roots receive credit, they give none
        }
        if root_user == rec.user {
            stats.self_reposts += 1;
            continue;
        }
        match ids.node_id(root_user) {
            Some(root_node) => {
                ttr[root_node.index()] += 1;
                stats.credited_reposts += 1;
                *reposts_per_root.entry(root_tid).or_insert(0) += 1;
            }
            None => stats.uncreditable_reposts += 1,
        }
    }

    let mut ntr = vec![0u64; n];
    for rec in log {
        if rec.parent.is_none() && reposts_per_root.get(&rec.tweet_id).copied().unwrap_or(0) > 0 {
            if let Some(node) = ids.node_id(rec.user) {
                ntr[node.index()] += 1;
            }
        }
    }

    stats.skipped_users = skipped_users.len() as u64;
    let qualities = (0..n)
        .map(|i| QualityVector::from_counts(nt[i], not_[i], ttr[i], ntr[i]))
        .collect();
    (qualities, stats)
}

/// Parse an activity file: one record per line,
/// `<tweet_id>\t<user_id>\t<unix_ts>\t<content_hash_hex16>\t<parent or ->`.
pub fn read_activity_file(reader: impl BufRead) -> Result<Vec<TweetRecord>, ActivityError> {
    let mut log = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        log.push(parse_activity_line(trimmed, idx + 1)?);
    }
    Ok(log)
}

fn parse_activity_line(line: &str, lineno: usize) -> Result<TweetRecord, ActivityError> {
    let err = |msg: String| ActivityError::Parse { line: lineno, msg };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(err(format!("expected 5 tab-separated fields, got {}", fields.len())));
    }
    let tweet_id = fields[0]
        .trim()
        .parse::<u64>()
        .map_err(|e| err(format!("bad tweet id {:?}: {e}", fields[0])))?;
    let user = fields[1]
        .trim()
        .parse::<u64>()
        .map_err(|e| err(format!("bad user id {:?}: {e}", fields[1])))?;
    let timestamp = fields[2]
        .trim()
        .parse::<i64>()
        .map_err(|e| err(format!("bad timestamp {:?}: {e}", fields[2])))?;
    let content_hash = u64::from_str_radix(fields[3].trim(), 16)
        .map_err(|e| err(format!("bad content hash {:?}: {e}", fields[3])))?;
    let parent_field = fields[4].trim();
    let parent = if parent_field == "-" {
        None
    } else {
        Some(
            parent_field
                .parse::<u64>()
                .map_err(|e| err(format!("bad parent id {parent_field:?}: {e}")))?,
        )
    };
    if parent == Some(tweet_id) {
        return Err(err(format!("tweet {tweet_id} lists itself as parent")));
    }
    Ok(TweetRecord { tweet_id, user, timestamp, content_hash, parent })
}

pub fn write_activity_file(log: &[TweetRecord], mut w: impl Write) -> std::io::Result<()> {
    for rec in log {
        let parent = match rec.parent {
            Some(p) => p.to_string(),
            None => "-".to_string(),
        };
        writeln!(
            w,
            "{}\t{}\t{}\t{:016x}\t{}",
            rec.tweet_id, rec.user, rec.timestamp, rec.content_hash, parent
        )?;
    }
    Ok(())
}

/// Emit per-user qualities, one line per node in ascending external-id order:
/// `<user_id>\t<NT>\t<NOT>\t<TTR>\t<NTR>\t<RPT>\t<FTR>`.
pub fn write_qualities_file(
    ids: &IdMap,
    qualities: &[QualityVector],
    mut w: impl Write,
) -> std::io::Result<()> {
    assert_eq!(ids.len(), qualities.len());
    for (node, ext) in ids.iter() {
        let q = &qualities[node.index()];
        writeln!(
            w,
            "{ext}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
            q.nt, q.not_, q.ttr, q.ntr, q.rpt, q.ftr
        )?;
    }
    Ok(())
}

/// Parse a qualities file back into a dense per-node table. Users in the id
/// map but absent from the file default to the zero vector; unknown users are
/// an error.
pub fn read_qualities_file(
    reader: impl BufRead,
    ids: &IdMap,
) -> Result<Vec<QualityVector>, ActivityError> {
    let mut table = vec![QualityVector::default(); ids.len()];
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let err = |msg: String| ActivityError::Parse { line: lineno, msg };
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", fields.len())));
        }
        let ext = fields[0]
            .parse::<u64>()
            .map_err(|e| err(format!("bad user id {:?}: {e}", fields[0])))?;
        let node = ids
            .node_id(ext)
            .ok_or_else(|| err(format!("user {ext} is not in the graph")))?;
        let parse_count = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| err(format!("bad count {s:?}: {e}")))
        };
        let parse_real = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| err(format!("bad value {s:?}: {e}")))
        };
        table[node.index()] = QualityVector {
            nt: parse_count(fields[1])?,
            not_: parse_count(fields[2])?,
            ttr: parse_count(fields[3])?,
            ntr: parse_count(fields[4])?,
            rpt: parse_real(fields[5])?,
            ftr: parse_real(fields[6])?,
        };
    }
    Ok(table)
}
