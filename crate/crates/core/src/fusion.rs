//! Late fusion of visual, first-order and second-order probabilities.
//!
//! The fused distribution is the convex combination
//! `w_vis·p_vis + w_1st·p_1st + w_2nd·p_2nd`. Weights are fitted by
//! exhaustive search over a simplex lattice, maximizing top-1 accuracy on a
//! set of fitting ids. Because the three corners belong to the lattice the
//! fitted accuracy is never below the best single source.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::par::Strategy;
use crate::prob::{ProbVector, SUM_TOLERANCE};

/// Floor applied to `p_truth` inside the cross-entropy logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Visual,
    FirstOrder,
    SecondOrder,
    Fused,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Visual => "visual",
            Source::FirstOrder => "first_order",
            Source::SecondOrder => "second_order",
            Source::Fused => "fused",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Probability vectors keyed by record id, all of one length.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    pub source: Source,
    num_categories: usize,
    rows: BTreeMap<u64, ProbVector>,
}

impl ProbTable {
    pub fn new(source: Source, num_categories: usize) -> Self {
        ProbTable {
            source,
            num_categories,
            rows: BTreeMap::new(),
        }
    }

    pub fn from_rows<I>(source: Source, num_categories: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, ProbVector)>,
    {
        let mut t = ProbTable::new(source, num_categories);
        for (id, p) in rows {
            t.insert(id, p)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, id: u64, p: ProbVector) -> Result<()> {
        if p.len() != self.num_categories {
            return Err(Error::LengthMismatch {
                expected: self.num_categories,
                actual: p.len(),
            });
        }
        if self.rows.insert(id, p).is_some() {
            return Err(Error::DuplicateId { line: 0, id });
        }
        Ok(())
    }

    pub fn get(&self, id: u64) -> Option<&ProbVector> {
        self.rows.get(&id)
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.rows.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &ProbVector)> {
        self.rows.iter().map(|(&id, p)| (id, p))
    }

    /// Argmax prediction for every row.
    pub fn predictions(&self) -> BTreeMap<u64, usize> {
        self.rows.iter().map(|(&id, p)| (id, predict(p))).collect()
    }

    /// `id,p_0,...,p_{C-1}` in ascending id order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let cols: Vec<String> = (0..self.num_categories).map(|k| format!("p_{k}")).collect();
        writeln!(out, "id,{}", cols.join(","))?;
        for (id, p) in &self.rows {
            let vals: Vec<String> = p.as_slice().iter().map(|v| v.to_string()).collect();
            writeln!(out, "{id},{}", vals.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(mut input: R, source: Source) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut lines = text.lines().enumerate();
        let header = match lines.next() {
            Some((_, h)) => h.trim(),
            None => return Err(Error::Empty("no header line".into())),
        };
        let cols: Vec<&str> = header.split(',').collect();
        let expected: Vec<String> = (0..cols.len().saturating_sub(1)).map(|k| format!("p_{k}")).collect();
        if cols.len() < 2 || cols[0] != "id" || cols[1..] != expected.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            return Err(Error::Malformed {
                line: 1,
                message: "expected header `id,p_0,...,p_{C-1}`".into(),
            });
        }
        let c = cols.len() - 1;
        let mut table = ProbTable::new(source, c);
        for (i, line) in lines {
            let line_no = i as u64 + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| Error::Malformed { line: line_no, message: m };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != c + 1 {
                return Err(bad(format!("expected {} fields, found {}", c + 1, fields.len())));
            }
            let id: u64 = fields[0].parse().map_err(|_| bad(format!("invalid id `{}`", fields[0])))?;
            let vals = fields[1..]
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| bad("invalid probability".into()))?;
            let p = ProbVector::new(vals).map_err(|e| bad(e.to_string()))?;
            if table.rows.insert(id, p).is_some() {
                return Err(Error::DuplicateId { line: line_no, id });
            }
        }
        Ok(table)
    }
}

/// Non-negative source weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub vis: f64,
    pub first: f64,
    pub second: f64,
}

impl FusionWeights {
    pub const VISUAL: FusionWeights = FusionWeights {
        vis: 1.0,
        first: 0.0,
        second: 0.0,
    };

    pub fn new(vis: f64, first: f64, second: f64) -> Result<Self> {
        let w = [vis, first, second];
        if w.iter().any(|v| !v.is_finite() || *v < -SUM_TOLERANCE) {
            return Err(Error::invalid("fusion weights must be nonnegative"));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid("fusion weights must sum to 1"));
        }
        Ok(FusionWeights { vis, first, second })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.vis, self.first, self.second]
    }
}

impl fmt::Display for FusionWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w_vis={} w_1st={} w_2nd={}", self.vis, self.first, self.second)
    }
}

impl FromStr for FusionWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 3] = [None; 3];
        for tok in s.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad weights token `{tok}`")))?;
            let slot = match k {
                "w_vis" => 0,
                "w_1st" => 1,
                "w_2nd" => 2,
                _ => return Err(Error::invalid(format!("unknown weight `{k}`"))),
            };
            vals[slot] = Some(v.parse().map_err(|_| Error::invalid(format!("bad weight value `{v}`")))?);
        }
        match vals {
            [Some(a), Some(b), Some(c)] => FusionWeights::new(a, b, c),
            _ => Err(Error::invalid("weights need w_vis, w_1st and w_2nd")),
        }
    }
}

fn fuse_slices(w: &FusionWeights, pv: &[f64], p1: &[f64], p2: &[f64]) -> Vec<f64> {
    pv.iter()
        .zip(p1)
        .zip(p2)
        .map(|((a, b), c)| (w.vis * a + w.first * b + w.second * c).clamp(0.0, 1.0))
        .collect()
}

/// Convex combination of the three sources.
pub fn fuse(w: &FusionWeights, pv: &ProbVector, p1: &ProbVector, p2: &ProbVector) -> Result<ProbVector> {
    for p in [p1, p2] {
        if p.len() != pv.len() {
            return Err(Error::LengthMismatch {
                expected: pv.len(),
                actual: p.len(),
            });
        }
    }
    Ok(ProbVector::from_raw(fuse_slices(w, pv.as_slice(), p1.as_slice(), p2.as_slice())))
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict(p: &ProbVector) -> usize {
    p.argmax()
}

/// Fuse three tables over `ids`.
pub fn fuse_tables(w: &FusionWeights, tables: [&ProbTable; 3], ids: &[u64]) -> Result<ProbTable> {
    let mut out = ProbTable::new(Source::Fused, tables[0].num_categories());
    for &id in ids {
        let [a, b, c] = lookup(tables, id)?;
        out.insert(id, fuse(w, a, b, c)?)?;
    }
    Ok(out)
}

fn lookup(tables: [&ProbTable; 3], id: u64) -> Result<[&ProbVector; 3]> {
    fn get(t: &ProbTable, id: u64) -> Result<&ProbVector> {
        t.get(id)
            .ok_or_else(|| Error::IdMismatch(format!("id {id} missing from {} table", t.source)))
    }
    Ok([get(tables[0], id)?, get(tables[1], id)?, get(tables[2], id)?])
}

/// Which sources a fit may use. Disabled sources are pinned to weight zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceMask {
    pub visual: bool,
    pub first: bool,
    pub second: bool,
}

impl SourceMask {
    pub const ALL: SourceMask = SourceMask {
        visual: true,
        first: true,
        second: true,
    };
    pub const VISUAL: SourceMask = SourceMask {
        visual: true,
        first: false,
        second: false,
    };
    pub const VISUAL_FIRST: SourceMask = SourceMask {
        visual: true,
        first: true,
        second: false,
    };
    pub const VISUAL_SECOND: SourceMask = SourceMask {
        visual: true,
        first: false,
        second: true,
    };

    fn admits(&self, a: usize, b: usize, c: usize) -> bool {
        (self.visual || a == 0) && (self.first || b == 0) && (self.second || c == 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub step: f64,
    pub sources: SourceMask,
    pub strategy: Strategy,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            step: 0.01,
            sources: SourceMask::ALL,
            strategy: Strategy::default(),
        }
    }
}

/// Outcome of a lattice fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub weights: FusionWeights,
    pub accuracy: f64,
    pub cross_entropy: f64,
    pub correct: usize,
    pub samples: usize,
    pub candidates: usize,
    /// Accuracy of the visual, first-order and second-order corners
    /// (`None` for corners excluded by the source mask).
    pub corner_accuracy: [Option<f64>; 3],
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.weights)?;
        writeln!(f, "samples={}", self.samples)?;
        writeln!(f, "candidates={}", self.candidates)?;
        writeln!(f, "accuracy={}", self.accuracy)?;
        writeln!(f, "cross_entropy={}", self.cross_entropy)?;
        for (name, acc) in ["visual", "first_order", "second_order"].iter().zip(&self.corner_accuracy) {
            match acc {
                Some(a) => writeln!(f, "corner.{name}.accuracy={a}")?,
                None => writeln!(f, "corner.{name}.accuracy=excluded")?,
            }
        }
        Ok(())
    }
}

/// Resolution at which mean cross-entropies are compared; algebraically
/// equal fusions differ only by rounding and must tie.
const CE_RESOLUTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    a: usize,
    b: usize,
    correct: usize,
    ce_sum: f64,
    ce_key: i64,
}

impl Candidate {
    // Better candidates sort first: more correct, lower cross-entropy,
    // then larger visual weight, then larger first-order weight.
    fn rank(&self, other: &Candidate) -> Ordering {
        other
            .correct
            .cmp(&self.correct)
            .then(self.ce_key.cmp(&other.ce_key))
            .then(other.a.cmp(&self.a))
            .then(other.b.cmp(&self.b))
    }
}

/// Number of lattice divisions for `step`; `1/step` must be a whole number.
pub fn lattice_divisions(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::invalid(format!("fusion step must be in (0, 0.5], got {step}")));
    }
    let k = (1.0 / step).round();
    if ((1.0 / step) - k).abs() > 1e-9 * k {
        return Err(Error::invalid(format!("1/step must be an integer, got step {step}")));
    }
    Ok(k as usize)
}

/// Exhaustive simplex-lattice search for the most accurate fusion weights.
pub fn fit_weights(
    tables: [&ProbTable; 3],
    truth: &HashMap<u64, usize>,
    ids: &[u64],
    opts: &FitOptions,
) -> Result<FitReport> {
    let k = lattice_divisions(opts.step)?;
    if ids.is_empty() {
        return Err(Error::Empty("no ids to fit on".into()));
    }
    let c = tables[0].num_categories();
    let mut samples = Vec::with_capacity(ids.len());
    for &id in ids {
        let rows = lookup(tables, id)?;
        for r in rows {
            if r.len() != c {
                return Err(Error::LengthMismatch {
                    expected: c,
                    actual: r.len(),
                });
            }
        }
        let t = *truth
            .get(&id)
            .ok_or_else(|| Error::IdMismatch(format!("id {id} has no truth label")))?;
        if t >= c {
            return Err(Error::CategoryAbsent(t));
        }
        samples.push((rows, t));
    }

    let mut lattice = Vec::new();
    for a in (0..=k).rev() {
        for b in (0..=k - a).rev() {
            if opts.sources.admits(a, b, k - a - b) {
                lattice.push((a, b));
            }
        }
    }
    if lattice.is_empty() {
        return Err(Error::invalid("source mask excludes every weight"));
    }

    let kf = k as f64;
    let weights_of = |a: usize, b: usize| FusionWeights {
        vis: a as f64 / kf,
        first: b as f64 / kf,
        second: (k - a - b) as f64 / kf,
    };
    let evaluate = |a: usize, b: usize| {
        let w = weights_of(a, b);
        let mut correct = 0;
        let mut ce_sum = 0.0;
        let mut fused = vec![0.0; c];
        for (rows, t) in &samples {
            let (pv, p1, p2) = (rows[0].as_slice(), rows[1].as_slice(), rows[2].as_slice());
            let mut best = 0;
            for j in 0..c {
                fused[j] = w.vis * pv[j] + w.first * p1[j] + w.second * p2[j];
                if fused[j] > fused[best] {
                    best = j;
                }
            }
            if best == *t {
                correct += 1;
            }
            ce_sum -= fused[*t].max(LOG_FLOOR).ln();
        }
        let ce_key = (ce_sum / samples.len() as f64 / CE_RESOLUTION).round() as i64;
        Candidate {
            a,
            b,
            correct,
            ce_sum,
            ce_key,
        }
    };

    let scored = opts.strategy.map_slice(&lattice, |&(a, b)| evaluate(a, b));
    let best = scored
        .iter()
        .copied()
        .min_by(|x, y| x.rank(y))
        .expect("lattice is nonempty");

    let n = samples.len() as f64;
    let corner = |enabled: bool, a: usize, b: usize| enabled.then(|| evaluate(a, b).correct as f64 / n);
    Ok(FitReport {
        weights: weights_of(best.a, best.b),
        accuracy: best.correct as f64 / n,
        cross_entropy: best.ce_sum / n,
        correct: best.correct,
        samples: samples.len(),
        candidates: lattice.len(),
        corner_accuracy: [
            corner(opts.sources.visual, k, 0),
            corner(opts.sources.first, 0, k),
            corner(opts.sources.second, 0, 0),
        ],
    })
}

/// Accuracy summary with a confusion matrix (rows = truth, columns = prediction).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Recall per truth category; `None` when the category has no samples.
    pub per_category: Vec<Option<f64>>,
    pub confusion: Vec<Vec<usize>>,
    pub samples: usize,
}

pub fn evaluate(
    preds: &BTreeMap<u64, usize>,
    truth: &HashMap<u64, usize>,
    num_categories: usize,
) -> Result<EvalReport> {
    let ids: Vec<u64> = preds.keys().copied().collect();
    if ids.is_empty() {
        return Err(Error::Empty("no predictions".into()));
    }
    evaluate_ids(preds, truth, &ids, num_categories)
}

/// Evaluate over `ids` only; every id must have both a prediction and a truth label.
pub fn evaluate_ids(
    preds: &BTreeMap<u64, usize>,
    truth: &HashMap<u64, usize>,
    ids: &[u64],
    num_categories: usize,
) -> Result<EvalReport> {
    let mut confusion = vec![vec![0usize; num_categories]; num_categories];
    for &id in ids {
        let p = *preds
            .get(&id)
            .ok_or_else(|| Error::IdMismatch(format!("id {id} has no prediction")))?;
        let t = *truth
            .get(&id)
            .ok_or_else(|| Error::IdMismatch(format!("id {id} has no truth label")))?;
        if p >= num_categories || t >= num_categories {
            return Err(Error::CategoryAbsent(p.max(t)));
        }
        confusion[t][p] += 1;
    }
    let samples = ids.len();
    let trace: usize = (0..num_categories).map(|i| confusion[i][i]).sum();
    let per_category = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: usize = row.iter().sum();
            (n > 0).then(|| row[i] as f64 / n as f64)
        })
        .collect();
    Ok(EvalReport {
        accuracy: trace as f64 / samples as f64,
        per_category,
        confusion,
        samples,
    })
}

impl EvalReport {
    /// Aligned text rendering with category names as labels.
    pub fn render_text(&self, names: &[String]) -> String {
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(8);
        let mut s = format!("samples  {}\naccuracy {:.3}\n\n", self.samples, self.accuracy);
        s.push_str(&format!("{:<width$} {:>8}", "category", "recall"));
        for n in names {
            s.push_str(&format!(" {:>w$}", n, w = n.len().max(6)));
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            let recall = match self.per_category[i] {
                Some(r) => format!("{r:.3}"),
                None => "-".into(),
            };
            s.push_str(&format!("{:<width$} {:>8}", names[i], recall));
            for (j, v) in row.iter().enumerate() {
                s.push_str(&format!(" {:>w$}", v, w = names[j].len().max(6)));
            }
            s.push('\n');
        }
        s
    }

    /// `truth,prediction,count` rows preceded by summary rows.
    pub fn render_csv(&self, names: &[String]) -> String {
        let mut s = String::from("key,value\n");
        s.push_str(&format!("samples,{}\naccuracy,{}\n", self.samples, self.accuracy));
        for (i, r) in self.per_category.iter().enumerate() {
            let v = r.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("recall.{},{v}\n", names[i]));
        }
        s.push_str("\ntruth,prediction,count\n");
        for (i, row) in self.confusion.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                s.push_str(&format!("{},{},{v}\n", names[i], names[j]));
            }
        }
        s
    }
}

/// One configuration row of an accuracy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub configuration: String,
    pub weights: FusionWeights,
    pub validation: f64,
    pub test: f64,
}

/// Aligned `Configuration  Validation  Testing` table, three decimals.
pub fn render_comparison(rows: &[ComparisonRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.configuration.len())
        .max()
        .unwrap_or(0)
        .max("Configuration".len());
    let mut s = format!("{:<width$}  {:>10}  {:>7}  weights\n", "Configuration", "Validation", "Testing");
    for r in rows {
        s.push_str(&format!(
            "{:<width$}  {:>10.3}  {:>7.3}  {}\n",
            r.configuration, r.validation, r.test, r.weights
        ));
    }
    s
}

pub fn render_comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("configuration,validation_accuracy,test_accuracy,w_vis,w_1st,w_2nd\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.configuration, r.validation, r.test, r.weights.vis, r.weights.first, r.weights.second
        ));
    }
    s
}
