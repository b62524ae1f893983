//! Ranked visual-retrieval match lists and the consistency vote that turns a list into one
//! reference position.
//!
//! Match JSONL, one object per line:
//!
//! ```text
//! {"query": 17, "matches": [{"beacon": "B03", "sim": 0.91}, {"beacon": "B11", "sim": 0.64}]}
//! ```
//!
//! An integer `query` is a 1-based step index, a non-integer number is a timestamp in
//! seconds. Beacon ids may be strings or integers; integers are read as their decimal text.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sensors::{BeaconDb, Position2D};

/// Number of retrieval candidates kept per query.
pub const TOP_K: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryKey {
    Step(u64),
    Time(f64),
}

impl Eq for QueryKey {}

impl Ord for QueryKey {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (QueryKey::Step(a), QueryKey::Step(b)) => a.cmp(b),
            (QueryKey::Time(a), QueryKey::Time(b)) => a.total_cmp(b),
            (QueryKey::Step(_), QueryKey::Time(_)) => Ordering::Less,
            (QueryKey::Time(_), QueryKey::Step(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for QueryKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for QueryKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryKey::Step(s) => write!(f, "step {s}"),
            QueryKey::Time(t) => write!(f, "t={t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    #[serde(rename = "beacon")]
    pub beacon_id: String,
    #[serde(rename = "sim")]
    pub similarity: f64,
}

impl MatchCandidate {
    pub fn new(beacon_id: impl Into<String>, similarity: f64) -> Self {
        MatchCandidate {
            beacon_id: beacon_id.into(),
            similarity,
        }
    }
}

/// At most [`TOP_K`] candidates in non-increasing similarity order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchList {
    #[serde(rename = "query")]
    pub query: QueryKey,
    #[serde(rename = "matches")]
    pub candidates: Vec<MatchCandidate>,
}

impl MatchList {
    /// Sorts by similarity (stable) and keeps the top [`TOP_K`].
    pub fn new(query: QueryKey, mut candidates: Vec<MatchCandidate>) -> Self {
        candidates.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
        candidates.truncate(TOP_K);
        MatchList { query, candidates }
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }
}

pub type MatchMap = BTreeMap<QueryKey, MatchList>;

pub fn load_matches(path: impl AsRef<Path>, db: Option<&BeaconDb>) -> Result<MatchMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matches_jsonl(file, db)
}

fn parse_query(v: &Value) -> Option<QueryKey> {
    let n = v.as_number()?;
    if let Some(u) = n.as_u64() {
        return Some(QueryKey::Step(u));
    }
    if n.is_i64() {
        return None;
    }
    n.as_f64().filter(|t| t.is_finite() && *t >= 0.0).map(QueryKey::Time)
}

fn parse_beacon_id(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) if n.is_i64() || n.is_u64() => Some(n.to_string()),
        _ => None,
    }
}

/// Reads Match JSONL. Blank lines are skipped. When `db` is given every beacon id must
/// resolve in it.
pub fn read_matches_jsonl<R: Read>(reader: R, db: Option<&BeaconDb>) -> Result<MatchMap> {
    let mut out = MatchMap::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse(lineno, "expected a JSON object"))?;
        if let Some(extra) = obj.keys().find(|k| *k != "query" && *k != "matches") {
            return Err(Error::parse(lineno, format!("unknown field `{extra}`")));
        }
        let query = obj
            .get("query")
            .and_then(parse_query)
            .ok_or_else(|| Error::parse(lineno, "`query` must be a non-negative step index or timestamp"))?;
        let matches = obj
            .get("matches")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse(lineno, "`matches` must be an array"))?;

        let mut candidates = Vec::with_capacity(matches.len());
        for m in matches {
            let beacon_id = m
                .get("beacon")
                .and_then(parse_beacon_id)
                .ok_or_else(|| Error::parse(lineno, "match needs a `beacon` id"))?;
            let similarity = m
                .get("sim")
                .and_then(Value::as_f64)
                .filter(|s| s.is_finite())
                .ok_or_else(|| Error::parse(lineno, "match needs a finite `sim`"))?;
            if let Some(db) = db {
                if !db.contains(&beacon_id) {
                    return Err(Error::Validation(format!(
                        "query {query} (line {lineno}) references unknown beacon `{beacon_id}`"
                    )));
                }
            }
            candidates.push(MatchCandidate::new(beacon_id, similarity));
        }
        if out.insert(query, MatchList::new(query, candidates)).is_some() {
            return Err(Error::Validation(format!(
                "duplicate query {query} at line {lineno}"
            )));
        }
    }
    Ok(out)
}

pub fn write_matches_jsonl<'a, W: Write>(
    mut writer: W,
    lists: impl IntoIterator<Item = &'a MatchList>,
) -> Result<()> {
    for list in lists {
        let line = serde_json::to_string(list)
            .map_err(|e| Error::Validation(format!("cannot encode match list: {e}")))?;
        writeln!(writer, "{line}").map_err(|e| Error::io("<match writer>", e))?;
    }
    writer.flush().map_err(|e| Error::io("<match writer>", e))
}

pub fn save_matches(path: impl AsRef<Path>, map: &MatchMap) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matches_jsonl(std::io::BufWriter::new(file), map.values())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vote {
    pub position: Position2D,
    /// Beacon whose position seeded the winning cluster.
    pub beacon_id: String,
    pub support: usize,
}

/// Greedy radius clustering over candidate positions; returns the seed of the largest
/// cluster. Candidates are visited by descending similarity (ties by beacon id), each joining
/// the first cluster whose seed lies within `bin_radius`. Among equally large clusters the one
/// holding the best-ranked candidate wins. Unresolvable ids are skipped.
pub fn consistency_vote(candidates: &[MatchCandidate], db: &BeaconDb, bin_radius: f64) -> Option<Vote> {
    let mut order: Vec<&MatchCandidate> = candidates.iter().collect();
    order.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.beacon_id.cmp(&b.beacon_id))
    });

    struct Cluster<'a> {
        seed: Position2D,
        seed_id: &'a str,
        size: usize,
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for c in order {
        let Some(beacon) = db.get(&c.beacon_id) else {
            continue;
        };
        let p = beacon.position;
        match clusters
            .iter_mut()
            .find(|cl| cl.seed.distance(&p) <= bin_radius)
        {
            Some(cl) => cl.size += 1,
            None => clusters.push(Cluster {
                seed: p,
                seed_id: &c.beacon_id,
                size: 1,
            }),
        }
    }
    // clusters are in creation order, so the first maximum holds the best-ranked candidate
    let mut best: Option<&Cluster> = None;
    for cl in &clusters {
        if best.is_none_or(|b| cl.size > b.size) {
            best = Some(cl);
        }
    }
    best.map(|cl| Vote {
        position: cl.seed,
        beacon_id: cl.seed_id.to_string(),
        support: cl.size,
    })
}
