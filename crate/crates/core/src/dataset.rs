//! Categorized planar point data.
//!
//! Coordinates are planar Euclidean in arbitrary length units; geographic
//! inputs must be projected before ingestion.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["id", "x", "y", "category"];

/// A category label and its contiguous index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Category {
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub category: usize,
}

impl PointRecord {
    pub fn new(id: u64, x: f64, y: f64, category: usize) -> Self {
        PointRecord { id, x, y, category }
    }

    #[inline]
    pub fn dist2(&self, x: f64, y: f64) -> f64 {
        let dx = self.x - x;
        let dy = self.y - y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    fn enclosing(records: &[PointRecord]) -> BBox {
        let mut b = BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for r in records {
            b.min_x = b.min_x.min(r.x);
            b.min_y = b.min_y.min(r.y);
            b.max_x = b.max_x.max(r.x);
            b.max_y = b.max_y.max(r.y);
        }
        b
    }
}

/// An immutable, validated collection of categorized points.
///
/// Records keep their input order. Statistics iterate points in ascending
/// id order (see [`PointDataset::id_order`]) so floating-point sums are
/// reproducible regardless of file order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDataset {
    records: Vec<PointRecord>,
    categories: Vec<Category>,
    bbox: BBox,
    counts: Vec<usize>,
    id_order: Vec<usize>,
    position: HashMap<u64, usize>,
}

impl PointDataset {
    /// Build a dataset from records whose `category` fields index into `names`.
    pub fn new(records: Vec<PointRecord>, names: Vec<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("dataset has no records".into()));
        }
        let mut seen = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::invalid(format!("category {i} has an empty name")));
            }
            if seen.insert(n.as_str(), i).is_some() {
                return Err(Error::invalid(format!("duplicate category name {n:?}")));
            }
        }
        let categories: Vec<Category> = names
            .into_iter()
            .enumerate()
            .map(|(index, name)| Category { index, name })
            .collect();

        let mut counts = vec![0usize; categories.len()];
        let mut position = HashMap::with_capacity(records.len());
        for (pos, r) in records.iter().enumerate() {
            let line = pos as u64 + 2;
            if !r.x.is_finite() || !r.y.is_finite() {
                return Err(Error::NonFinite { line });
            }
            if r.category >= categories.len() {
                return Err(Error::UnknownCategory(r.category.to_string()));
            }
            if position.insert(r.id, pos).is_some() {
                return Err(Error::DuplicateId { line, id: r.id });
            }
            counts[r.category] += 1;
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::CategoryAbsent(c));
        }

        let mut id_order: Vec<usize> = (0..records.len()).collect();
        id_order.sort_by_key(|&p| records[p].id);
        let bbox = BBox::enclosing(&records);
        Ok(PointDataset {
            records,
            categories,
            bbox,
            counts,
            id_order,
            position,
        })
    }

    /// Build from `(id, x, y, label)` tuples, assigning category indices in
    /// order of first appearance.
    pub fn from_labeled<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64, f64, &'a str)>,
    {
        let mut names: Vec<String> = Vec::new();
        let mut lookup: HashMap<String, usize> = HashMap::new();
        let mut records = Vec::new();
        for (id, x, y, label) in rows {
            let c = *lookup.entry(label.to_string()).or_insert_with(|| {
                names.push(label.to_string());
                names.len() - 1
            });
            records.push(PointRecord::new(id, x, y, c));
        }
        PointDataset::new(records, names)
    }

    pub fn records(&self) -> &[PointRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// Number of records per category index.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Record positions sorted by ascending id.
    pub fn id_order(&self) -> &[usize] {
        &self.id_order
    }

    pub fn get(&self, id: u64) -> Option<&PointRecord> {
        self.position.get(&id).map(|&p| &self.records[p])
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.position.get(&id).copied()
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.name == name)
    }

    pub fn category_names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.name.clone()).collect()
    }

    /// Ascending list of all ids.
    pub fn ids(&self) -> Vec<u64> {
        self.id_order.iter().map(|&p| self.records[p].id).collect()
    }

    /// Map of id to category index.
    pub fn truth(&self) -> HashMap<u64, usize> {
        self.records.iter().map(|r| (r.id, r.category)).collect()
    }

    /// A dataset containing only the given ids, keeping the full category
    /// table. Fails if any category ends up empty.
    pub fn subset(&self, ids: &[u64]) -> Result<PointDataset> {
        let mut keep = Vec::with_capacity(ids.len());
        for &id in ids {
            let p = self.position_of(id).ok_or(Error::UnknownId(id))?;
            keep.push(p);
        }
        keep.sort_unstable();
        keep.dedup();
        let records = keep.into_iter().map(|p| self.records[p]).collect();
        PointDataset::new(records, self.category_names())
    }

    /// Export in the `id,x,y,category` format. Re-ingesting the output
    /// reproduces this dataset exactly.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_io)?;
        for r in &self.records {
            w.write_record([
                r.id.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                self.categories[r.category].name.clone(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable per-category counts and bounding box.
    pub fn summary(&self) -> String {
        let mut s = format!("records={}\ncategories={}\n", self.len(), self.num_categories());
        for c in &self.categories {
            s.push_str(&format!("count.{}={}\n", c.name, self.counts[c.index]));
        }
        let b = self.bbox;
        s.push_str(&format!(
            "bbox={},{},{},{}\n",
            b.min_x, b.min_y, b.max_x, b.max_y
        ));
        s
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Parse an `id,x,y,category` stream. Line numbers in errors are 1-based
/// and count the header.
pub fn ingest_csv<R: Read>(input: R) -> Result<PointDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);

    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Err(Error::Empty("no header line".into())),
        Some(h) => h.map_err(|e| csv_line_error(&e, 1))?,
    };
    let fields: Vec<&str> = header.iter().collect();
    if fields != CSV_HEADER {
        return Err(Error::Malformed {
            line: 1,
            message: format!("expected header `id,x,y,category`, got `{}`", fields.join(",")),
        });
    }

    let mut names: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut records = Vec::new();
    let mut seen: HashMap<u64, ()> = HashMap::new();
    for row in rows {
        let row = row.map_err(|e| csv_line_error(&e, 0))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != 4 {
            return Err(Error::Malformed {
                line,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let id: u64 = row[0].parse().map_err(|_| Error::Malformed {
            line,
            message: format!("invalid id `{}`", &row[0]),
        })?;
        let x = parse_coord(&row[1], line)?;
        let y = parse_coord(&row[2], line)?;
        let label = &row[3];
        if label.is_empty() {
            return Err(Error::Malformed {
                line,
                message: "empty category".into(),
            });
        }
        if seen.insert(id, ()).is_some() {
            return Err(Error::DuplicateId { line, id });
        }
        let c = match lookup.get(label) {
            Some(&c) => c,
            None => {
                names.push(label.to_string());
                lookup.insert(label.to_string(), names.len() - 1);
                names.len() - 1
            }
        };
        records.push(PointRecord::new(id, x, y, c));
    }
    if records.is_empty() {
        return Err(Error::Empty("no records after header".into()));
    }
    PointDataset::new(records, names)
}

fn parse_coord(s: &str, line: u64) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Malformed {
        line,
        message: format!("invalid coordinate `{s}`"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite { line });
    }
    Ok(v)
}

fn csv_line_error(e: &csv::Error, fallback: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback);
    Error::Malformed {
        line,
        message: e.to_string(),
    }
}
