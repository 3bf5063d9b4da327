// SPDX-License-Identifier: MIT OR Apache-2.0

//! Benchmark directory layout: one `<subject_id>.csv` per subject plus a
//! `manifest.json` mapping each subject id to its ground truth, split and seed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::TimeCourses;
use crate::persist::{write_atomic, write_json};

use super::{Benchmark, Split};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub ground_truth_cps: Vec<usize>,
    pub split: Split,
    pub seed: u64,
}

pub type Manifest = BTreeMap<String, ManifestEntry>;

/// Subject ids double as file stems, so they are restricted to a safe
/// character set and may not start with a dot.
pub fn check_subject_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Parse(format!("invalid subject id {id:?}")))
    }
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let manifest: Manifest =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
    for (id, entry) in &manifest {
        check_subject_id(id)?;
        if !entry.ground_truth_cps.windows(2).all(|w| w[0] < w[1])
            || entry.ground_truth_cps.first().is_some_and(|&c| c < 2)
        {
            return Err(Error::Parse(format!(
                "manifest: ground truth of {id} must be strictly increasing and at least 2"
            )));
        }
    }
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    parse_manifest(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)
}

pub fn write_benchmark(dir: &Path, benchmark: &Benchmark) -> Result<()> {
    let mut manifest = Manifest::new();
    for s in benchmark.subjects() {
        let id = s.data.subject_id();
        check_subject_id(id)?;
        write_atomic(
            &dir.join(format!("{id}.csv")),
            s.data.to_csv_string().as_bytes(),
        )?;
        manifest.insert(
            id.to_string(),
            ManifestEntry {
                ground_truth_cps: s.change_points.clone(),
                split: s.split,
                seed: s.seed,
            },
        );
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Subjects of one split (all splits for `None`), in subject-id order.
pub fn load_split(dir: &Path, split: Option<Split>) -> Result<Vec<(TimeCourses, Vec<usize>)>> {
    let manifest = read_manifest(dir)?;
    manifest
        .into_iter()
        .filter(|(_, e)| split.is_none_or(|s| s == e.split))
        .map(|(id, e)| {
            let u = TimeCourses::read_csv(id.clone(), &dir.join(format!("{id}.csv")))?;
            if e.ground_truth_cps.last().is_some_and(|&c| c > u.len()) {
                return Err(Error::Parse(format!(
                    "manifest: ground truth of {id} exceeds its {} time points",
                    u.len()
                )));
            }
            Ok((u, e.ground_truth_cps))
        })
        .collect()
}
