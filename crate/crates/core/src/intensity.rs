//! First-order effect: per-category Gaussian kernel density.
//!
//! For category `c` with `n_c` points the density at `x` is
//!
//! ```text
//! λ̂_c(x) = 1/(n_c h²) · Σ_{i: cat(i)=c} K(|x − x_i| / h),   K(u) = exp(−u²/2) / 2π
//! ```
//!
//! which integrates to one over the plane. Class scores use the
//! count-weighted form `S_c(x) = n_c · λ̂_c(x)` so class prevalence acts as a
//! prior, and first-order probabilities are `S_c / Σ S`.
//!
//! With truncation enabled only points within `cutoff_multiplier · h` of the
//! query contribute. Each dropped term is below `K(cutoff)`, so the absolute
//! error of `λ̂_c` is at most `K(cutoff_multiplier) / h²` and the relative
//! error at most `K(cutoff_multiplier) / (h² λ̂_c)`.
//! No edge correction is applied, so estimates are biased low near the
//! boundary of the study area.

use std::f64::consts::PI;

use crate::dataset::{BBox, PointDataset};
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::par::Strategy;
use crate::prob::ProbVector;

/// Below this total score a location is treated as carrying no information.
pub const DEGENERATE_SCORE: f64 = 1e-300;

/// Radially symmetric 2-D Gaussian kernel, `exp(−u²/2) / 2π`.
#[inline]
pub fn kernel_gauss2d(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: f64,
    pub cutoff_multiplier: f64,
    pub truncation: bool,
}

impl KdeConfig {
    pub fn new(bandwidth: f64) -> Self {
        KdeConfig {
            bandwidth,
            cutoff_multiplier: 5.0,
            truncation: true,
        }
    }

    /// Bandwidth of 5% of the bounding-box diagonal, truncated at 5h.
    pub fn default_for(ds: &PointDataset) -> Self {
        let diag = ds.bbox().diagonal();
        KdeConfig::new(if diag > 0.0 { 0.05 * diag } else { 1.0 })
    }

    pub fn exact(bandwidth: f64) -> Self {
        KdeConfig {
            bandwidth,
            cutoff_multiplier: 5.0,
            truncation: false,
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
        Ok(())
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_multiplier * self.bandwidth
    }
}

/// Regular grid; cell `(col, row)` has its center at
/// `(x0 + (col + ½)·cell, y0 + (row + ½)·cell)`. Row 0 is the lowest `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub cell: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell > 0.0) || !self.cell.is_finite() {
            return Err(Error::invalid(format!("grid cell size must be positive, got {}", self.cell)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("grid must have at least one cell"));
        }
        if !self.x0.is_finite() || !self.y0.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(())
    }

    /// Smallest grid of `cell`-sized cells covering `bbox` grown by `margin` on every side.
    pub fn covering(bbox: BBox, margin: f64, cell: f64) -> Self {
        let w = bbox.width() + 2.0 * margin;
        let h = bbox.height() + 2.0 * margin;
        GridSpec {
            x0: bbox.min_x - margin,
            y0: bbox.min_y - margin,
            cell,
            width: ((w / cell).ceil() as usize).max(1),
            height: ((h / cell).ceil() as usize).max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.x0 + (col as f64 + 0.5) * self.cell,
            self.y0 + (row as f64 + 0.5) * self.cell,
        )
    }

    pub fn cell_area(&self) -> f64 {
        self.cell * self.cell
    }
}

/// Density sampled at grid cell centers, row-major from the bottom row.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub category: usize,
}

impl Raster {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.grid.width + col]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Riemann sum of the sampled values.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }
}

/// Kernel density estimator bound to a dataset.
///
/// Holds a fixed-radius index when truncation is enabled; without
/// truncation every evaluation scans all points in ascending id order.
#[derive(Debug, Clone)]
pub struct IntensityModel<'a> {
    ds: &'a PointDataset,
    cfg: KdeConfig,
    index: Option<SpatialIndex>,
}

impl<'a> IntensityModel<'a> {
    pub fn new(ds: &'a PointDataset, cfg: KdeConfig) -> Result<Self> {
        cfg.validate()?;
        let index = if cfg.truncation {
            Some(SpatialIndex::build(ds, cfg.cutoff_radius())?)
        } else {
            None
        };
        Ok(IntensityModel { ds, cfg, index })
    }

    pub fn dataset(&self) -> &PointDataset {
        self.ds
    }

    pub fn config(&self) -> &KdeConfig {
        &self.cfg
    }

    /// Unnormalized kernel sums `Σ exp(−d²/2h²)` per category, in ascending id order.
    fn exp_sums(&self, x: (f64, f64)) -> Vec<f64> {
        let inv_2h2 = 0.5 / (self.cfg.bandwidth * self.cfg.bandwidth);
        let mut sums = vec![0.0; self.ds.num_categories()];
        let recs = self.ds.records();
        let mut add = |pos: usize| {
            let r = &recs[pos];
            sums[r.category] += (-r.dist2(x.0, x.1) * inv_2h2).exp();
        };
        match &self.index {
            Some(idx) => idx
                .query_positions(x, self.cfg.cutoff_radius())
                .into_iter()
                .for_each(&mut add),
            None => self.ds.id_order().iter().copied().for_each(&mut add),
        }
        sums
    }

    fn check_category(&self, c: usize) -> Result<()> {
        if c >= self.ds.num_categories() || self.ds.counts()[c] == 0 {
            return Err(Error::CategoryAbsent(c));
        }
        Ok(())
    }

    /// `λ̂_c(x)`, integrating to one over the plane.
    pub fn density_at(&self, c: usize, x: (f64, f64)) -> Result<f64> {
        self.check_category(c)?;
        let h2 = self.cfg.bandwidth * self.cfg.bandwidth;
        let n = self.ds.counts()[c] as f64;
        Ok(self.exp_sums(x)[c] / (2.0 * PI * n * h2))
    }

    /// Count-weighted scores `S_c(x) = Σ_{cat=c} K(|x−x_i|/h) / h²`.
    pub fn class_scores_at(&self, x: (f64, f64)) -> Vec<f64> {
        let norm = 2.0 * PI * self.cfg.bandwidth * self.cfg.bandwidth;
        self.exp_sums(x).into_iter().map(|s| s / norm).collect()
    }

    /// `S_c / Σ S`, or uniform when every score underflows.
    pub fn first_order_probs(&self, x: (f64, f64)) -> ProbVector {
        ProbVector::normalized(&self.class_scores_at(x), DEGENERATE_SCORE)
    }

    pub fn first_order_probs_batch(&self, locations: &[(f64, f64)], strategy: Strategy) -> Vec<ProbVector> {
        strategy.map_slice(locations, |&x| self.first_order_probs(x))
    }

    /// Density of category `c` at every cell center of `grid`.
    pub fn raster(&self, c: usize, grid: &GridSpec, strategy: Strategy) -> Result<Raster> {
        self.check_category(c)?;
        grid.validate()?;
        let h2 = self.cfg.bandwidth * self.cfg.bandwidth;
        let n = self.ds.counts()[c] as f64;
        let norm = 2.0 * PI * n * h2;
        let values = strategy.map_range(grid.len(), |k| {
            let center = grid.center(k % grid.width, k / grid.width);
            self.exp_sums(center)[c] / norm
        });
        Ok(Raster {
            grid: *grid,
            values,
            category: c,
        })
    }
}

pub fn density_at(ds: &PointDataset, c: usize, x: (f64, f64), cfg: &KdeConfig) -> Result<f64> {
    IntensityModel::new(ds, *cfg)?.density_at(c, x)
}

pub fn class_scores_at(ds: &PointDataset, x: (f64, f64), cfg: &KdeConfig) -> Result<Vec<f64>> {
    Ok(IntensityModel::new(ds, *cfg)?.class_scores_at(x))
}

pub fn first_order_probs(ds: &PointDataset, x: (f64, f64), cfg: &KdeConfig) -> Result<ProbVector> {
    Ok(IntensityModel::new(ds, *cfg)?.first_order_probs(x))
}

pub fn intensity_raster(ds: &PointDataset, c: usize, grid: &GridSpec, cfg: &KdeConfig) -> Result<Raster> {
    IntensityModel::new(ds, *cfg)?.raster(c, grid, Strategy::default())
}
