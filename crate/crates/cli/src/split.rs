//! Seeded train/probe split.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};
use crate::io::{read_triplets, write_triplets, RawRating};

/// Splits ratings into `(train, probe)`, both in input order.
///
/// Each user's last rating is kept in train, so no user ends up only in the
/// probe set. The probe receives `round(ratio * total)` ratings drawn
/// uniformly from the rest, or all of the rest if there are fewer.
pub fn split_ratings(ratings: &[RawRating], ratio: f64, seed: u64) -> Result<(Vec<RawRating>, Vec<RawRating>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CliError::Usage(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut last = HashMap::new();
    for (idx, r) in ratings.iter().enumerate() {
        last.insert(r.user, idx);
    }
    let mut eligible: Vec<usize> = (0..ratings.len()).filter(|&idx| last[&ratings[idx].user] != idx).collect();
    let target = ((ratio * ratings.len() as f64).round() as usize).min(eligible.len());
    eligible.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut to_probe = vec![false; ratings.len()];
    for &idx in &eligible[..target] {
        to_probe[idx] = true;
    }
    let (mut train, mut probe) = (Vec::new(), Vec::new());
    for (r, p) in ratings.iter().zip(to_probe) {
        if p { probe.push(*r) } else { train.push(*r) }
    }
    Ok((train, probe))
}

/// Writes `train.txt` and `probe.txt` into `out_dir`.
pub fn cmd_split(input: &Path, ratio: f64, seed: u64, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let ratings = read_triplets(input)?;
    let (train, probe) = split_ratings(&ratings, ratio, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::write(out_dir, e))?;
    let (tp, pp) = (out_dir.join("train.txt"), out_dir.join("probe.txt"));
    write_triplets(&tp, &train)?;
    write_triplets(&pp, &probe)?;
    log::info!("split {} ratings into {} train / {} probe", ratings.len(), train.len(), probe.len());
    Ok((tp, pp))
}
