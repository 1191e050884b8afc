//! Seeded, per-category stratified train/validation/test partitions.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::PointDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

/// Assignment of every record id to exactly one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    assignment: BTreeMap<u64, Split>,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn from_map(assignment: BTreeMap<u64, Split>, seed: u64) -> Self {
        SplitAssignment { assignment, seed }
    }

    pub fn get(&self, id: u64) -> Option<Split> {
        self.assignment.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Ascending ids assigned to `split`.
    pub fn ids(&self, split: Split) -> Vec<u64> {
        self.assignment
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Split)> + '_ {
        self.assignment.iter().map(|(&id, &s)| (id, s))
    }

    /// Check that the assignment covers exactly the ids of `ds`.
    pub fn validate_against(&self, ds: &PointDataset) -> Result<()> {
        if self.assignment.len() != ds.len() {
            return Err(Error::IdMismatch(format!(
                "split has {} ids, dataset has {}",
                self.assignment.len(),
                ds.len()
            )));
        }
        for r in ds.records() {
            if !self.assignment.contains_key(&r.id) {
                return Err(Error::IdMismatch(format!("id {} missing from split", r.id)));
            }
        }
        Ok(())
    }

    /// `id,split` CSV, ascending id order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "id,split")?;
        for (id, s) in &self.assignment {
            writeln!(out, "{id},{s}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "id,split" => {}
            _ => {
                return Err(Error::Malformed {
                    line: 1,
                    message: "expected header `id,split`".into(),
                })
            }
        }
        let mut assignment = BTreeMap::new();
        for (i, line) in lines {
            let line_no = i as u64 + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (id, s) = line.split_once(',').ok_or_else(|| Error::Malformed {
                line: line_no,
                message: "expected `id,split`".into(),
            })?;
            let id: u64 = id.trim().parse().map_err(|_| Error::Malformed {
                line: line_no,
                message: format!("invalid id `{id}`"),
            })?;
            let split: Split = s.trim().parse().map_err(|_| Error::Malformed {
                line: line_no,
                message: format!("unknown split `{s}`"),
            })?;
            if assignment.insert(id, split).is_some() {
                return Err(Error::DuplicateId { line: line_no, id });
            }
        }
        Ok(SplitAssignment { assignment, seed: 0 })
    }
}

/// Split sizes for `n` items by largest remainder: each size differs from
/// `fraction * n` by strictly less than one.
fn allocate(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes = [0usize; 3];
    for k in 0..3 {
        sizes[k] = exact[k].floor() as usize;
    }
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    // largest fractional part first, ties to the earlier split
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[k] += 1;
        left -= 1;
    }
    sizes
}

/// Partition `ds` into train/validation/test, stratified per category.
///
/// Within each category the ids are shuffled with a ChaCha8 stream seeded
/// from `seed`, then cut into consecutive blocks of the allocated sizes.
pub fn split_dataset(ds: &PointDataset, fractions: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::invalid("split fractions must be finite and nonnegative"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions sum to {total}, not 1")));
    }
    if ds.is_empty() {
        return Err(Error::Empty("dataset has no records".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    for c in 0..ds.num_categories() {
        let mut ids: Vec<u64> = ds
            .id_order()
            .iter()
            .map(|&p| ds.records()[p])
            .filter(|r| r.category == c)
            .map(|r| r.id)
            .collect();
        ids.shuffle(&mut rng);
        let sizes = allocate(ids.len(), fractions);
        let mut it = ids.into_iter();
        for (k, &size) in sizes.iter().enumerate() {
            for id in it.by_ref().take(size) {
                assignment.insert(id, Split::ALL[k]);
            }
        }
    }
    Ok(SplitAssignment { assignment, seed })
}
