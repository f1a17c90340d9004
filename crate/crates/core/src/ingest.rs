//! Thread dumps to validated forests, and the binary forest container.
//!
//! Canonical input is one JSON object per line,
//! `{"thread": .., "id": .., "parent": .. | null, "ts": <seconds>}`; other
//! fields are ignored. Trees are laid out breadth-first from the post with
//! siblings ordered by `(ts, id)`.

use crate::rng::fnv1a;
use crate::tree::{TimedTree, TreeError, NO_PARENT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::File;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"TCFOREST";
pub const FORMAT_VERSION: u32 = 1;
const ROOT_PARENT: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("thread {thread}: {reason}")]
    Anomaly { thread: String, reason: SkipReason },
    #[error("not a forest file")]
    BadMagic,
    #[error("forest format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt forest file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Malformed,
    MissingRoot,
    ExtraRoot,
    DuplicateId,
    Orphan,
    NonMonotoneTime,
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Malformed => "malformed record",
            Self::MissingRoot => "no root record",
            Self::ExtraRoot => "more than one root record",
            Self::DuplicateId => "duplicate id",
            Self::Orphan => "parent not found",
            Self::NonMonotoneTime => "reply older than its parent",
        };
        f.write_str(s)
    }
}

/// Per-reason counts of dropped records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub malformed: usize,
    pub missing_root: usize,
    pub extra_root: usize,
    pub duplicate_id: usize,
    pub orphan: usize,
    pub non_monotone_time: usize,
}

impl SkipReport {
    pub fn add(&mut self, reason: SkipReason, count: usize) {
        let slot = match reason {
            SkipReason::Malformed => &mut self.malformed,
            SkipReason::MissingRoot => &mut self.missing_root,
            SkipReason::ExtraRoot => &mut self.extra_root,
            SkipReason::DuplicateId => &mut self.duplicate_id,
            SkipReason::Orphan => &mut self.orphan,
            SkipReason::NonMonotoneTime => &mut self.non_monotone_time,
        };
        *slot += count;
    }

    pub fn merge(&mut self, other: &SkipReport) {
        self.malformed += other.malformed;
        self.missing_root += other.missing_root;
        self.extra_root += other.extra_root;
        self.duplicate_id += other.duplicate_id;
        self.orphan += other.orphan;
        self.non_monotone_time += other.non_monotone_time;
    }

    pub fn total(&self) -> usize {
        self.malformed
            + self.missing_root
            + self.extra_root
            + self.duplicate_id
            + self.orphan
            + self.non_monotone_time
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub thread: String,
    pub id: String,
    pub parent: Option<String>,
    /// Seconds since the epoch.
    pub ts: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thread {
    pub id: String,
    pub tree: TimedTree,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Forest {
    pub threads: Vec<Thread>,
    pub source_meta: String,
}

impl Forest {
    pub fn new(threads: Vec<Thread>, source_meta: impl Into<String>) -> Self {
        Self {
            threads,
            source_meta: source_meta.into(),
        }
    }

    /// Names trees `0, 1, ...` in order.
    pub fn from_trees(trees: Vec<TimedTree>, source_meta: impl Into<String>) -> Self {
        let threads = trees
            .into_iter()
            .enumerate()
            .map(|(i, tree)| Thread {
                id: i.to_string(),
                tree,
            })
            .collect();
        Self::new(threads, source_meta)
    }

    pub fn len(&self) -> usize {
        self.threads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threads.is_empty()
    }

    pub fn trees(&self) -> impl Iterator<Item = &TimedTree> {
        self.threads.iter().map(|t| &t.tree)
    }

    pub fn node_count(&self) -> usize {
        self.trees().map(TimedTree::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Canonical,
    Reddit,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Fail on the first anomaly instead of dropping and counting.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub forest: Forest,
    pub skips: SkipReport,
    /// Non-blank input lines.
    pub records: usize,
}

impl Ingested {
    pub fn kept(&self) -> usize {
        self.forest.node_count()
    }
}

fn key(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn seconds(v: &Value) -> Option<i64> {
    let f = match v {
        Value::Number(n) => return n.as_i64().or_else(|| n.as_f64().and_then(whole)),
        Value::String(s) => s.trim().parse::<f64>().ok()?,
        _ => return None,
    };
    whole(f)
}

fn whole(f: f64) -> Option<i64> {
    (f.is_finite() && f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

fn strip_kind(s: &str) -> &str {
    match s.split_once('_') {
        Some((kind, rest)) if kind.len() == 2 && kind.starts_with('t') && !rest.is_empty() => rest,
        _ => s,
    }
}

/// Parses one canonical record.
pub fn parse_canonical_line(line: &str) -> Result<RawEvent, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let thread = v.get("thread").and_then(key).ok_or("missing thread")?;
    let id = v.get("id").and_then(key).ok_or("missing id")?;
    let parent = match v.get("parent") {
        None | Some(Value::Null) => None,
        Some(p) => Some(key(p).ok_or("bad parent")?),
    };
    let ts = v
        .get("ts")
        .and_then(seconds)
        .ok_or("missing or non-integer ts")?;
    Ok(RawEvent {
        thread,
        id,
        parent,
        ts,
    })
}

/// Maps one platform-style record onto a canonical event. Posts carry no
/// `parent_id`; comments name their post in `link_id` and their parent in
/// `parent_id`, both with an optional `t1_`/`t3_` kind prefix.
pub fn adapt_reddit_line(line: &str) -> Result<RawEvent, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = v.get("id").and_then(key).ok_or("missing id")?;
    let id = strip_kind(&id).to_string();
    let ts = v
        .get("created_utc")
        .and_then(seconds)
        .ok_or("missing or non-integer created_utc")?;
    let parent = v.get("parent_id").filter(|p| !p.is_null());
    match parent {
        None => Ok(RawEvent {
            thread: id.clone(),
            id,
            parent: None,
            ts,
        }),
        Some(p) => {
            let parent = key(p).ok_or("bad parent_id")?;
            let link = v.get("link_id").and_then(key).ok_or("missing link_id")?;
            Ok(RawEvent {
                thread: strip_kind(&link).to_string(),
                id,
                parent: Some(strip_kind(&parent).to_string()),
                ts,
            })
        }
    }
}

/// Reads a record stream. Blank lines are ignored; malformed lines are
/// counted (or fail in strict mode).
pub fn read_events<R: BufRead>(
    reader: R,
    format: InputFormat,
    opts: IngestOptions,
) -> Result<(Vec<RawEvent>, usize, usize), IngestError> {
    let parse = match format {
        InputFormat::Canonical => parse_canonical_line,
        InputFormat::Reddit => adapt_reddit_line,
    };
    let mut events = Vec::new();
    let mut records = 0;
    let mut malformed = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        match parse(&line) {
            Ok(e) => events.push(e),
            Err(reason) if opts.strict => {
                return Err(IngestError::Malformed {
                    line: i + 1,
                    reason,
                });
            }
            Err(_) => malformed += 1,
        }
    }
    Ok((events, records, malformed))
}

/// Builds one thread's tree, returning the records it had to drop.
fn build_thread(
    thread: &str,
    events: &[RawEvent],
    strict: bool,
) -> Result<(Option<TimedTree>, SkipReport), IngestError> {
    let mut skips = SkipReport::default();
    let anomaly = |reason| IngestError::Anomaly {
        thread: thread.to_string(),
        reason,
    };
    let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(events.len());
    let mut unique = Vec::with_capacity(events.len());
    for (i, e) in events.iter().enumerate() {
        if by_id.contains_key(e.id.as_str()) {
            if strict {
                return Err(anomaly(SkipReason::DuplicateId));
            }
            skips.add(SkipReason::DuplicateId, 1);
            continue;
        }
        by_id.insert(&e.id, i);
        unique.push(i);
    }
    let mut roots: Vec<usize> = unique
        .iter()
        .copied()
        .filter(|&i| events[i].parent.is_none())
        .collect();
    if roots.is_empty() {
        if strict {
            return Err(anomaly(SkipReason::MissingRoot));
        }
        skips.add(SkipReason::MissingRoot, unique.len());
        return Ok((None, skips));
    }
    roots.sort_by(|&x, &y| (events[x].ts, &events[x].id).cmp(&(events[y].ts, &events[y].id)));
    if roots.len() > 1 {
        if strict {
            return Err(anomaly(SkipReason::ExtraRoot));
        }
        skips.add(SkipReason::ExtraRoot, roots.len() - 1);
    }
    let root = roots[0];
    let mut children: HashMap<&str, Vec<usize>> = HashMap::new();
    for &i in &unique {
        if let Some(p) = &events[i].parent {
            children.entry(p.as_str()).or_default().push(i);
        }
    }
    for list in children.values_mut() {
        list.sort_by(|&x, &y| (events[x].ts, &events[x].id).cmp(&(events[y].ts, &events[y].id)));
    }
    let t0 = events[root].ts;
    let mut parents = vec![NO_PARENT];
    let mut times = vec![0.0];
    let mut ids = vec![fnv1a(events[root].id.as_bytes())];
    let mut queue = VecDeque::from([(root, 0usize)]);
    while let Some((ev, idx)) = queue.pop_front() {
        let Some(kids) = children.get(events[ev].id.as_str()) else {
            continue;
        };
        for &c in kids {
            if events[c].ts < events[ev].ts {
                if strict {
                    return Err(anomaly(SkipReason::NonMonotoneTime));
                }
                skips.add(SkipReason::NonMonotoneTime, 1);
                continue;
            }
            let child = parents.len();
            parents.push(idx);
            times.push((events[c].ts - t0) as f64 / 3600.0);
            ids.push(fnv1a(events[c].id.as_bytes()));
            queue.push_back((c, child));
        }
    }
    let placed = parents.len() + roots.len() - 1 + skips.non_monotone_time;
    let orphans = unique.len() - placed;
    if orphans > 0 {
        if strict {
            return Err(anomaly(SkipReason::Orphan));
        }
        skips.add(SkipReason::Orphan, orphans);
    }
    Ok((Some(TimedTree::with_ids(parents, times, ids)?), skips))
}

/// Groups events by thread and builds every tree, in parallel, ordered by
/// thread id.
pub fn build_forest(
    events: Vec<RawEvent>,
    opts: IngestOptions,
    source_meta: impl Into<String>,
) -> Result<(Forest, SkipReport), IngestError> {
    let mut groups: BTreeMap<String, Vec<RawEvent>> = BTreeMap::new();
    for e in events {
        groups.entry(e.thread.clone()).or_default().push(e);
    }
    let groups: Vec<(String, Vec<RawEvent>)> = groups.into_iter().collect();
    let built: Vec<_> = groups
        .par_iter()
        .map(|(thread, evs)| build_thread(thread, evs, opts.strict).map(|r| (thread.clone(), r)))
        .collect::<Result<_, _>>()?;
    let mut skips = SkipReport::default();
    let mut threads = Vec::with_capacity(built.len());
    for (id, (tree, s)) in built {
        skips.merge(&s);
        if let Some(tree) = tree {
            threads.push(Thread { id, tree });
        }
    }
    Ok((Forest::new(threads, source_meta), skips))
}

/// Reads and builds a forest from a record stream.
pub fn ingest<R: BufRead>(
    reader: R,
    format: InputFormat,
    opts: IngestOptions,
    source_meta: impl Into<String>,
) -> Result<Ingested, IngestError> {
    let (events, records, malformed) = read_events(reader, format, opts)?;
    let (forest, mut skips) = build_forest(events, opts, source_meta)?;
    skips.add(SkipReason::Malformed, malformed);
    Ok(Ingested {
        forest,
        skips,
        records,
    })
}

/// Writes canonical records for a forest. Node ids are the hex id hashes and
/// `ts` is `base + round(hours * 3600)`.
pub fn write_canonical<W: Write>(forest: &Forest, base: i64, mut out: W) -> io::Result<()> {
    for th in &forest.threads {
        let tree = &th.tree;
        for v in 0..tree.len() {
            let rec = RawEvent {
                thread: th.id.clone(),
                id: format!("{:016x}", tree.ids()[v]),
                parent: tree.parent(v).map(|p| format!("{:016x}", tree.ids()[p])),
                ts: base + (tree.time(v) * 3600.0).round() as i64,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Serializes a forest (layout in the README).
pub fn to_bytes(forest: &Forest) -> Vec<u8> {
    let mut b = Vec::with_capacity(32 + forest.node_count() * 20);
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    b.extend_from_slice(&(forest.len() as u64).to_le_bytes());
    b.extend_from_slice(&(forest.source_meta.len() as u32).to_le_bytes());
    b.extend_from_slice(forest.source_meta.as_bytes());
    for th in &forest.threads {
        let t = &th.tree;
        b.extend_from_slice(&(th.id.len() as u32).to_le_bytes());
        b.extend_from_slice(th.id.as_bytes());
        b.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for &id in t.ids() {
            b.extend_from_slice(&id.to_le_bytes());
        }
        for &p in t.parents() {
            let p = if p == NO_PARENT {
                ROOT_PARENT
            } else {
                p as u32
            };
            b.extend_from_slice(&p.to_le_bytes());
        }
        for &x in t.times() {
            b.extend_from_slice(&x.to_bits().to_le_bytes());
        }
    }
    b
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IngestError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| IngestError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, IngestError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, IngestError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String, IngestError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| IngestError::Corrupt(e.to_string()))
    }

    fn count(&mut self, elem: usize) -> Result<usize, IngestError> {
        let n = self.u64()?;
        let n = usize::try_from(n).map_err(|_| IngestError::Corrupt("count overflow".into()))?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(IngestError::Corrupt(format!("count {n} exceeds file size")));
        }
        Ok(n)
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Forest, IngestError> {
    let mut c = Cursor { buf, pos: 0 };
    if buf.len() < MAGIC.len() || c.take(MAGIC.len())? != MAGIC {
        return Err(IngestError::BadMagic);
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(IngestError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let trees = c.count(12)?;
    let source_meta = c.string()?;
    let mut threads = Vec::with_capacity(trees);
    for _ in 0..trees {
        let id = c.string()?;
        let n = c.count(20)?;
        let ids = (0..n).map(|_| c.u64()).collect::<Result<Vec<_>, _>>()?;
        let parents = (0..n)
            .map(|_| {
                c.u32().map(|p| {
                    if p == ROOT_PARENT {
                        NO_PARENT
                    } else {
                        p as usize
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let times = (0..n)
            .map(|_| c.u64().map(f64::from_bits))
            .collect::<Result<Vec<_>, _>>()?;
        threads.push(Thread {
            id,
            tree: TimedTree::with_ids(parents, times, ids)?,
        });
    }
    if c.pos != buf.len() {
        return Err(IngestError::Corrupt(format!(
            "{} trailing bytes",
            buf.len() - c.pos
        )));
    }
    Ok(Forest::new(threads, source_meta))
}

/// Writes the forest to `path` through a temporary file and a rename.
pub fn persist(forest: &Forest, path: &Path) -> Result<(), IngestError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(&to_bytes(forest))?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Forest, IngestError> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
