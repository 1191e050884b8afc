//! Second-order effect: local co-location quotients.
//!
//! For an anchor point `i` and category `Y`:
//!
//! ```text
//! w_ij        = exp(−½ d_ij² / h²)
//! N_{i→Y}     = Σ_{j≠i} w_ij F_Y(j) / Σ_{j≠i} w_ij
//! LCLQ_{i→Y}  = N_{i→Y} / (N_Y / (N − 1))
//! ```
//!
//! A free query location uses every dataset point as a neighbor and keeps
//! the same `N_Y / (N − 1)` denominator so query vectors are comparable to
//! the vectors of dataset points. Per-category averages of point vectors form
//! the [`GlobalClqTable`]; a location is scored against each row by cosine
//! similarity and the similarities are sum-normalized into probabilities.

use std::io::{Read, Write};

use crate::dataset::PointDataset;
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::par::Strategy;
use crate::prob::ProbVector;
use crate::split::{Split, SplitAssignment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LclqConfig {
    pub bandwidth: f64,
    pub cutoff_multiplier: f64,
    pub truncation: bool,
    /// Weight totals (and vector norms) below this count as zero.
    pub weight_floor: f64,
    /// Use `(N_Y − 1)/(N − 1)` as the denominator when the anchor itself is in `Y`.
    pub self_correction: bool,
}

impl LclqConfig {
    pub fn new(bandwidth: f64) -> Self {
        LclqConfig {
            bandwidth,
            cutoff_multiplier: 5.0,
            truncation: true,
            weight_floor: 1e-12,
            self_correction: false,
        }
    }

    pub fn exact(bandwidth: f64) -> Self {
        LclqConfig {
            truncation: false,
            ..LclqConfig::new(bandwidth)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if self.truncation && !(self.cutoff_multiplier >= 3.0) {
            return Err(Error::invalid(format!(
                "cutoff multiplier must be at least 3, got {}",
                self.cutoff_multiplier
            )));
        }
        if !(self.weight_floor > 0.0) {
            return Err(Error::invalid("weight floor must be positive"));
        }
        Ok(())
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_multiplier * self.bandwidth
    }
}

/// Gaussian neighbor weight `exp(−½ d²/h²)`.
#[inline]
pub fn weight(d: f64, h: f64) -> f64 {
    (-0.5 * d * d / (h * h)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// A dataset point, excluded from its own neighborhood.
    Point(u64),
    /// An arbitrary location; every dataset point is a neighbor.
    Free(f64, f64),
}

/// Kernel-weighted fraction of neighbors in a category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborFraction {
    pub value: f64,
    /// Set when the total neighbor weight fell below the weight floor.
    pub isolated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LclqVector {
    pub anchor: Anchor,
    pub values: Vec<f64>,
    pub isolated: bool,
}

/// LCLQ evaluator bound to a point set.
#[derive(Debug, Clone)]
pub struct LclqModel<'a> {
    ds: &'a PointDataset,
    cfg: LclqConfig,
    index: Option<SpatialIndex>,
}

struct Neighborhood {
    per_category: Vec<f64>,
    total: f64,
    own_category: Option<usize>,
}

impl<'a> LclqModel<'a> {
    pub fn new(ds: &'a PointDataset, cfg: LclqConfig) -> Result<Self> {
        cfg.validate()?;
        let index = if cfg.truncation {
            Some(SpatialIndex::build(ds, cfg.cutoff_radius())?)
        } else {
            None
        };
        Ok(LclqModel { ds, cfg, index })
    }

    pub fn dataset(&self) -> &PointDataset {
        self.ds
    }

    pub fn config(&self) -> &LclqConfig {
        &self.cfg
    }

    fn neighborhood(&self, anchor: Anchor) -> Result<Neighborhood> {
        let (center, skip, own_category) = match anchor {
            Anchor::Point(id) => {
                let r = self.ds.get(id).ok_or(Error::UnknownId(id))?;
                if self.ds.len() < 2 {
                    return Err(Error::invalid("a point anchor needs at least two points"));
                }
                ((r.x, r.y), Some(id), Some(r.category))
            }
            Anchor::Free(x, y) => {
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::invalid("anchor coordinates must be finite"));
                }
                ((x, y), None, None)
            }
        };
        let inv_2h2 = 0.5 / (self.cfg.bandwidth * self.cfg.bandwidth);
        let recs = self.ds.records();
        let mut per_category = vec![0.0; self.ds.num_categories()];
        let mut add = |pos: usize| {
            let r = &recs[pos];
            if Some(r.id) != skip {
                per_category[r.category] += (-r.dist2(center.0, center.1) * inv_2h2).exp();
            }
        };
        match &self.index {
            Some(idx) => idx
                .query_positions(center, self.cfg.cutoff_radius())
                .into_iter()
                .for_each(&mut add),
            None => self.ds.id_order().iter().copied().for_each(&mut add),
        }
        let total = per_category.iter().sum();
        Ok(Neighborhood {
            per_category,
            total,
            own_category,
        })
    }

    fn fractions(&self, nb: &Neighborhood) -> (Vec<f64>, bool) {
        if !(nb.total >= self.cfg.weight_floor) {
            return (vec![0.0; nb.per_category.len()], true);
        }
        (nb.per_category.iter().map(|w| w / nb.total).collect(), false)
    }

    /// `N_{anchor→Y}`, in `[0, 1]`.
    pub fn neighbor_fraction(&self, anchor: Anchor, y: usize) -> Result<NeighborFraction> {
        self.check_category(y)?;
        let nb = self.neighborhood(anchor)?;
        let (f, isolated) = self.fractions(&nb);
        Ok(NeighborFraction { value: f[y], isolated })
    }

    fn check_category(&self, y: usize) -> Result<()> {
        if y >= self.ds.num_categories() || self.ds.counts()[y] == 0 {
            return Err(Error::CategoryAbsent(y));
        }
        Ok(())
    }

    fn quotient(&self, fraction: f64, y: usize, own_category: Option<usize>) -> f64 {
        let n = self.ds.len() as f64;
        let mut n_y = self.ds.counts()[y] as f64;
        if self.cfg.self_correction && own_category == Some(y) {
            n_y -= 1.0;
            if n_y <= 0.0 {
                return 0.0;
            }
        }
        fraction * (n - 1.0) / n_y
    }

    pub fn lclq(&self, anchor: Anchor, y: usize) -> Result<f64> {
        self.check_category(y)?;
        if self.ds.len() < 2 {
            return Err(Error::invalid("LCLQ needs at least two points"));
        }
        let nb = self.neighborhood(anchor)?;
        let (f, _) = self.fractions(&nb);
        Ok(self.quotient(f[y], y, nb.own_category))
    }

    /// LCLQ against every category.
    pub fn lclq_vector(&self, anchor: Anchor) -> Result<LclqVector> {
        if self.ds.len() < 2 {
            return Err(Error::invalid("LCLQ needs at least two points"));
        }
        let nb = self.neighborhood(anchor)?;
        let (f, isolated) = self.fractions(&nb);
        let values = f
            .iter()
            .enumerate()
            .map(|(y, &fy)| self.quotient(fy, y, nb.own_category))
            .collect();
        Ok(LclqVector {
            anchor,
            values,
            isolated,
        })
    }

    pub fn lclq_vectors(&self, anchors: &[Anchor], strategy: Strategy) -> Result<Vec<LclqVector>> {
        strategy
            .map_slice(anchors, |&a| self.lclq_vector(a))
            .into_iter()
            .collect()
    }

    /// Vectors for every dataset point, in ascending id order.
    pub fn point_vectors(&self, strategy: Strategy) -> Result<Vec<LclqVector>> {
        let anchors: Vec<Anchor> = self.ds.ids().into_iter().map(Anchor::Point).collect();
        self.lclq_vectors(&anchors, strategy)
    }

    /// Mean vector per category over every point of this model's dataset.
    pub fn global_table(&self, strategy: Strategy) -> Result<GlobalClqTable> {
        let vectors = self.point_vectors(strategy)?;
        Ok(GlobalClqTable::from_point_vectors(self.ds, &vectors))
    }

    pub fn second_order_probs(&self, table: &GlobalClqTable, x: (f64, f64)) -> Result<ProbVector> {
        let v = self.lclq_vector(Anchor::Free(x.0, x.1))?;
        cosine_probs(&v.values, table, self.cfg.weight_floor)
    }

    pub fn second_order_probs_batch(
        &self,
        table: &GlobalClqTable,
        locations: &[(f64, f64)],
        strategy: Strategy,
    ) -> Result<Vec<ProbVector>> {
        strategy
            .map_slice(locations, |&x| self.second_order_probs(table, x))
            .into_iter()
            .collect()
    }
}

/// Per-category mean LCLQ vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalClqTable {
    pub category_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Points that contributed to each row (isolated points are excluded).
    pub contributing: Vec<usize>,
}

impl GlobalClqTable {
    /// Average the vectors of dataset points by the anchor's category.
    /// Isolated vectors are skipped; a row with no contributors is all zeros.
    pub fn from_point_vectors(ds: &PointDataset, vectors: &[LclqVector]) -> Self {
        let c = ds.num_categories();
        let mut rows = vec![vec![0.0; c]; c];
        let mut contributing = vec![0usize; c];
        for v in vectors {
            let Anchor::Point(id) = v.anchor else { continue };
            if v.isolated {
                continue;
            }
            let Some(r) = ds.get(id) else { continue };
            for (acc, x) in rows[r.category].iter_mut().zip(&v.values) {
                *acc += x;
            }
            contributing[r.category] += 1;
        }
        for (row, &n) in rows.iter_mut().zip(&contributing) {
            if n > 0 {
                row.iter_mut().for_each(|x| *x /= n as f64);
            }
        }
        GlobalClqTable {
            category_names: ds.category_names(),
            rows,
            contributing,
        }
    }

    pub fn num_categories(&self) -> usize {
        self.rows.len()
    }

    /// `category,v_0,...,v_{C-1},n_contributing`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let c = self.rows.len();
        let cols: Vec<String> = (0..c).map(|k| format!("v_{k}")).collect();
        writeln!(out, "category,{},n_contributing", cols.join(","))?;
        for ((name, row), n) in self.category_names.iter().zip(&self.rows).zip(&self.contributing) {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{name},{},{n}", vals.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Empty("no header line".into()))?;
        let width = header.split(',').count();
        if width < 3 || !header.starts_with("category,") || !header.ends_with(",n_contributing") {
            return Err(Error::Malformed {
                line: 1,
                message: "expected header `category,v_0,...,n_contributing`".into(),
            });
        }
        let c = width - 2;
        let mut table = GlobalClqTable {
            category_names: Vec::new(),
            rows: Vec::new(),
            contributing: Vec::new(),
        };
        for (i, line) in lines.enumerate() {
            let line_no = i as u64 + 2;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |m: &str| Error::Malformed {
                line: line_no,
                message: m.to_string(),
            };
            if fields.len() != width {
                return Err(bad("wrong field count"));
            }
            let row = fields[1..=c]
                .iter()
                .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| bad("invalid value"))?;
            let n = fields[c + 1].parse().map_err(|_| bad("invalid count"))?;
            table.category_names.push(fields[0].to_string());
            table.rows.push(row);
            table.contributing.push(n);
        }
        if table.rows.len() != c {
            return Err(Error::LengthMismatch {
                expected: c,
                actual: table.rows.len(),
            });
        }
        Ok(table)
    }
}

/// Cosine similarity, zero when either norm is below `floor`.
pub fn cosine(u: &[f64], v: &[f64], floor: f64) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu < floor || nv < floor {
        return 0.0;
    }
    dot / (nu * nv)
}

/// Cosine similarity of `v` to every table row, clamped at zero and
/// sum-normalized; uniform if the similarities sum below `floor`.
pub fn cosine_probs(v: &[f64], table: &GlobalClqTable, floor: f64) -> Result<ProbVector> {
    if v.len() != table.num_categories() {
        return Err(Error::LengthMismatch {
            expected: table.num_categories(),
            actual: v.len(),
        });
    }
    let sims: Vec<f64> = table.rows.iter().map(|g| cosine(v, g, floor).max(0.0)).collect();
    Ok(ProbVector::normalized(&sims, floor))
}

/// Write `id,v_0,...,v_{C-1},isolated` for point-anchored vectors.
pub fn write_vectors_csv<W: Write>(vectors: &[LclqVector], num_categories: usize, mut out: W) -> Result<()> {
    let cols: Vec<String> = (0..num_categories).map(|k| format!("v_{k}")).collect();
    writeln!(out, "id,{},isolated", cols.join(","))?;
    for v in vectors {
        let Anchor::Point(id) = v.anchor else { continue };
        let vals: Vec<String> = v.values.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{id},{},{}", vals.join(","), u8::from(v.isolated))?;
    }
    Ok(())
}

pub fn neighbor_fraction(ds: &PointDataset, anchor: Anchor, y: usize, cfg: &LclqConfig) -> Result<NeighborFraction> {
    LclqModel::new(ds, *cfg)?.neighbor_fraction(anchor, y)
}

pub fn lclq(ds: &PointDataset, anchor: Anchor, y: usize, cfg: &LclqConfig) -> Result<f64> {
    LclqModel::new(ds, *cfg)?.lclq(anchor, y)
}

pub fn lclq_vector(ds: &PointDataset, anchor: Anchor, cfg: &LclqConfig) -> Result<LclqVector> {
    LclqModel::new(ds, *cfg)?.lclq_vector(anchor)
}

/// Global table from the training points of `split`.
///
/// Training vectors are computed within the training point set, so `N`
/// and `N_Y` count training points only.
pub fn global_clq(ds: &PointDataset, split: &SplitAssignment, cfg: &LclqConfig) -> Result<GlobalClqTable> {
    let train = ds.subset(&split.ids(Split::Train))?;
    LclqModel::new(&train, *cfg)?.global_table(Strategy::default())
}

pub fn second_order_probs(
    ds: &PointDataset,
    table: &GlobalClqTable,
    x: (f64, f64),
    cfg: &LclqConfig,
) -> Result<ProbVector> {
    LclqModel::new(ds, *cfg)?.second_order_probs(table, x)
}
