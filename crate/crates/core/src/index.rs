//! Uniform-grid fixed-radius index over a [`PointDataset`].
//!
//! A point is within radius `r` of a center when `dx² + dy² <= r²`; the
//! boundary is inclusive. Query results are sorted by ascending point id so
//! downstream floating-point reductions happen in a fixed order.

use crate::dataset::PointDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Entry {
    x: f64,
    y: f64,
    id: u64,
    pos: usize,
}

/// Points bucketed into square cells, stored contiguously per cell.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    min_x: f64,
    min_y: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    // cell k holds entries[starts[k]..starts[k + 1]]
    starts: Vec<usize>,
    entries: Vec<Entry>,
}

impl SpatialIndex {
    /// Bucket every record of `ds` into cells of side `cell_size`.
    ///
    /// The cell side is doubled until the grid has at most `4n + 1024`
    /// cells, which bounds memory for tiny cell sizes without affecting
    /// query results.
    pub fn build(ds: &PointDataset, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::invalid(format!("cell size must be positive, got {cell_size}")));
        }
        let b = ds.bbox();
        let limit = 4 * ds.len() + 1024;
        let mut cell = cell_size;
        let (nx, ny) = loop {
            let nx = (b.width() / cell).floor() as usize + 1;
            let ny = (b.height() / cell).floor() as usize + 1;
            if nx.saturating_mul(ny) <= limit {
                break (nx, ny);
            }
            cell *= 2.0;
        };

        let cell_of = |x: f64, y: f64| {
            let cx = (((x - b.min_x) / cell) as usize).min(nx - 1);
            let cy = (((y - b.min_y) / cell) as usize).min(ny - 1);
            cy * nx + cx
        };

        let mut counts = vec![0usize; nx * ny + 1];
        for r in ds.records() {
            counts[cell_of(r.x, r.y) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let starts = counts;
        let mut fill = starts.clone();
        let mut entries = vec![
            Entry {
                x: 0.0,
                y: 0.0,
                id: 0,
                pos: 0
            };
            ds.len()
        ];
        for &pos in ds.id_order() {
            let r = &ds.records()[pos];
            let k = cell_of(r.x, r.y);
            entries[fill[k]] = Entry {
                x: r.x,
                y: r.y,
                id: r.id,
                pos,
            };
            fill[k] += 1;
        }

        Ok(SpatialIndex {
            min_x: b.min_x,
            min_y: b.min_y,
            cell,
            nx,
            ny,
            starts,
            entries,
        })
    }

    /// Effective cell side (may exceed the requested size, see [`SpatialIndex::build`]).
    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn cell_span(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - origin) / self.cell).floor();
        let b = ((hi - origin) / self.cell).floor();
        if b < 0.0 || a > (n - 1) as f64 || a.is_nan() || b.is_nan() {
            return None;
        }
        let a = if a < 0.0 { 0 } else { a as usize };
        let b = if b > (n - 1) as f64 { n - 1 } else { b as usize };
        Some((a, b))
    }

    fn visit<F: FnMut(&Entry)>(&self, center: (f64, f64), r: f64, mut f: F) {
        let (qx, qy) = center;
        let r2 = r * r;
        let Some((x0, x1)) = self.cell_span(qx - r, qx + r, self.min_x, self.nx) else {
            return;
        };
        let Some((y0, y1)) = self.cell_span(qy - r, qy + r, self.min_y, self.ny) else {
            return;
        };
        for cy in y0..=y1 {
            let row = cy * self.nx;
            for e in &self.entries[self.starts[row + x0]..self.starts[row + x1 + 1]] {
                let dx = e.x - qx;
                let dy = e.y - qy;
                if dx * dx + dy * dy <= r2 {
                    f(e);
                }
            }
        }
    }

    /// Record positions (into `ds.records()`) within `r` of `center`,
    /// ordered by ascending point id.
    pub fn query_positions(&self, center: (f64, f64), r: f64) -> Vec<usize> {
        let mut hits: Vec<(u64, usize)> = Vec::new();
        self.visit(center, r, |e| hits.push((e.id, e.pos)));
        hits.sort_unstable_by_key(|h| h.0);
        hits.into_iter().map(|h| h.1).collect()
    }

    /// Ids within `r` of `center` (inclusive), ascending.
    pub fn query_radius(&self, center: (f64, f64), r: f64) -> Vec<u64> {
        let mut ids = Vec::new();
        self.visit(center, r, |e| ids.push(e.id));
        ids.sort_unstable();
        ids
    }
}

/// Build an index with cell side `cell_size`.
pub fn build_index(ds: &PointDataset, cell_size: f64) -> Result<SpatialIndex> {
    SpatialIndex::build(ds, cell_size)
}

/// Ids within `r` of `center`, ascending. `r` must be nonnegative.
pub fn query_radius(idx: &SpatialIndex, center: (f64, f64), r: f64) -> Vec<u64> {
    debug_assert!(r >= 0.0);
    idx.query_radius(center, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PointRecord;

    fn ds(points: &[(f64, f64)]) -> PointDataset {
        let recs = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| PointRecord::new(i as u64 + 1, x, y, 0))
            .collect();
        PointDataset::new(recs, vec!["a".into()]).unwrap()
    }

    #[test]
    fn unit_radius_picks_first() {
        let d = ds(&[(0.0, 0.0), (3.0, 0.0)]);
        let idx = build_index(&d, 0.5).unwrap();
        assert_eq!(query_radius(&idx, (0.0, 0.0), 1.0), vec![1]);
    }

    #[test]
    fn zero_radius_is_inclusive() {
        let d = ds(&[(0.25, 0.5), (3.0, 0.0)]);
        let idx = build_index(&d, 1.0).unwrap();
        assert_eq!(query_radius(&idx, (0.25, 0.5), 0.0), vec![1]);
    }

    #[test]
    fn diagonal_and_infinite_radius_return_everything() {
        let d = ds(&[(0.0, 0.0), (3.0, 0.0), (1.0, 7.0), (2.5, 2.5)]);
        let idx = build_index(&d, 0.3).unwrap();
        let diag = d.bbox().diagonal();
        assert_eq!(query_radius(&idx, (0.0, 0.0), diag), vec![1, 2, 3, 4]);
        assert_eq!(query_radius(&idx, (-50.0, 9.0), f64::INFINITY), vec![1, 2, 3, 4]);
    }

    #[test]
    fn empty_region() {
        let d = ds(&[(0.0, 0.0), (3.0, 0.0)]);
        let idx = build_index(&d, 1.0).unwrap();
        assert!(query_radius(&idx, (1.5, 1.5), 0.5).is_empty());
        assert!(query_radius(&idx, (100.0, -100.0), 2.0).is_empty());
    }

    #[test]
    fn tiny_cells_are_coarsened() {
        let d = ds(&[(0.0, 0.0), (1000.0, 1000.0)]);
        let idx = build_index(&d, 1e-6).unwrap();
        assert!(idx.cell_size() > 1.0);
        assert_eq!(query_radius(&idx, (1000.0, 1000.0), 0.0), vec![2]);
    }

    #[test]
    fn rejects_nonpositive_cell() {
        let d = ds(&[(0.0, 0.0)]);
        assert!(build_index(&d, 0.0).is_err());
        assert!(build_index(&d, -1.0).is_err());
        assert!(build_index(&d, f64::NAN).is_err());
    }
}
