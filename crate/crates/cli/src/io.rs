//! Plain-text rating files and external ID remapping.
//!
//! One rating per line, whitespace separated: `user item rating`. Further
//! fields (timestamps) are ignored, as are blank lines and lines starting
//! with `#`. IDs are non-negative integers, usually 1-based and sparse.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawRating {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
}

pub fn parse_triplets<R: BufRead>(input: R, source: &str) -> Result<Vec<RawRating>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("{source}:{}: {e}", n + 1)))?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let bad = |what: &str| CliError::Data(format!("{source}:{}: {what} in {body:?}", n + 1));
        let mut fields = body.split_whitespace();
        let user = fields.next().and_then(|f| f.parse::<u64>().ok()).ok_or_else(|| bad("bad user id"))?;
        let item = fields.next().and_then(|f| f.parse::<u64>().ok()).ok_or_else(|| bad("bad item id"))?;
        let rating = fields
            .next()
            .and_then(|f| f.parse::<f64>().ok())
            .filter(|r| r.is_finite())
            .ok_or_else(|| bad("bad rating"))?;
        out.push(RawRating { user, item, rating });
    }
    Ok(out)
}

pub fn read_triplets(path: &Path) -> Result<Vec<RawRating>> {
    let f = File::open(path).map_err(|e| CliError::read(path, e))?;
    parse_triplets(BufReader::new(f), &path.display().to_string())
}

/// Ratings are written in shortest round-trip form, so reading back gives
/// the same values bit for bit.
pub fn format_triplets<W: Write>(mut out: W, ratings: &[RawRating]) -> std::io::Result<()> {
    for r in ratings {
        writeln!(out, "{} {} {}", r.user, r.item, r.rating)?;
    }
    out.flush()
}

pub fn write_triplets(path: &Path, ratings: &[RawRating]) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::write(path, e))?;
    format_triplets(BufWriter::new(f), ratings).map_err(|e| CliError::write(path, e))
}

/// Dense 0-based indices for external IDs, assigned in ascending ID order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdMap {
    pub users: Vec<u64>,
    pub items: Vec<u64>,
    #[serde(skip)]
    user_index: HashMap<u64, usize>,
    #[serde(skip)]
    item_index: HashMap<u64, usize>,
}

impl IdMap {
    pub fn build<'a>(sets: impl IntoIterator<Item = &'a [RawRating]>) -> Self {
        let (mut users, mut items) = (Vec::new(), Vec::new());
        for set in sets {
            users.extend(set.iter().map(|r| r.user));
            items.extend(set.iter().map(|r| r.item));
        }
        for v in [&mut users, &mut items] {
            v.sort_unstable();
            v.dedup();
        }
        Self::from_ids(users, items)
    }

    pub fn from_ids(users: Vec<u64>, items: Vec<u64>) -> Self {
        let index = |v: &[u64]| v.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        IdMap {
            user_index: index(&users),
            item_index: index(&items),
            users,
            items,
        }
    }

    pub fn users_len(&self) -> usize {
        self.users.len()
    }

    pub fn items_len(&self) -> usize {
        self.items.len()
    }

    pub fn user(&self, id: u64) -> Option<usize> {
        self.user_index.get(&id).copied()
    }

    pub fn item(&self, id: u64) -> Option<usize> {
        self.item_index.get(&id).copied()
    }

    /// Internal triplets; an unknown ID is a data error.
    pub fn internal(&self, ratings: &[RawRating]) -> Result<Vec<pmf_core::Triplet<f64>>> {
        ratings
            .iter()
            .map(|r| match (self.user(r.user), self.item(r.item)) {
                (Some(u), Some(i)) => Ok(pmf_core::Triplet::new(u, i, r.rating)),
                _ => Err(CliError::Data(format!("user {} / item {} not known to the model", r.user, r.item))),
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| CliError::write(path, e))?;
        serde_json::to_writer(BufWriter::new(f), self).map_err(|e| CliError::write(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| CliError::read(path, e))?;
        let raw: IdMap = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(Self::from_ids(raw.users, raw.items))
    }
}
