//! Reference implementations written directly from the formulas, sharing no
//! code with the library's evaluation paths.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sppa_core::{PointDataset, PointRecord};

pub fn random_dataset(n: usize, categories: usize, seed: u64) -> PointDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..categories).map(|c| format!("c{c}")).collect();
    loop {
        let recs: Vec<PointRecord> = (0..n)
            .map(|i| {
                // scattered ids so file order differs from id order
                let id = (i as u64 * 7919) % 100_003 + 1;
                PointRecord::new(id, rng.gen_range(0.0..10.0), rng.gen_range(-3.0..5.0), rng.gen_range(0..categories))
            })
            .collect();
        if let Ok(ds) = PointDataset::new(recs, names.clone()) {
            return ds;
        }
    }
}

pub fn clustered_dataset(n: usize, seed: u64) -> PointDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [(2.0, 2.0), (7.0, 3.0), (4.0, 8.0)];
    let recs = (0..n)
        .map(|i| {
            let (cx, cy) = centers[i % 3];
            let r: f64 = rng.gen_range(0.0..1.5);
            let t: f64 = rng.gen_range(0.0..2.0 * PI);
            PointRecord::new(i as u64, cx + r * t.cos(), cy + r * t.sin(), i % 2)
        })
        .collect();
    PointDataset::new(recs, vec!["a".into(), "b".into()]).unwrap()
}

pub fn random_queries(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.gen_range(-2.0..12.0), rng.gen_range(-5.0..7.0)))
        .collect()
}

pub fn brute_radius(ds: &PointDataset, c: (f64, f64), r: f64) -> Vec<u64> {
    let mut ids: Vec<u64> = ds
        .records()
        .iter()
        .filter(|p| (p.x - c.0).powi(2) + (p.y - c.1).powi(2) <= r * r)
        .map(|p| p.id)
        .collect();
    ids.sort();
    ids
}

pub fn kernel(u: f64) -> f64 {
    (-u * u / 2.0).exp() / (2.0 * PI)
}

/// (1/(n h²)) Σ K(|x − x_i| / h) over category `c`.
pub fn kde_oracle(ds: &PointDataset, c: usize, x: (f64, f64), h: f64) -> f64 {
    let pts: Vec<&PointRecord> = ds.records().iter().filter(|p| p.category == c).collect();
    let mut s = 0.0;
    for p in &pts {
        let d = (p.x - x.0).hypot(p.y - x.1);
        s += kernel(d / h);
    }
    s / (pts.len() as f64 * h * h)
}

/// Σ_{j≠i} w_ij F_Y(j) / Σ_{j≠i} w_ij with w = exp(−0.5 d²/h²); `skip` is
/// the anchor id for point anchors.
pub fn neighbor_fraction_oracle(ds: &PointDataset, at: (f64, f64), skip: Option<u64>, y: usize, h: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for p in ds.records() {
        if Some(p.id) == skip {
            continue;
        }
        let d = (p.x - at.0).hypot(p.y - at.1);
        let w = (-0.5 * d * d / (h * h)).exp();
        den += w;
        if p.category == y {
            num += w;
        }
    }
    num / den
}

pub fn lclq_oracle(ds: &PointDataset, id: u64, y: usize, h: f64) -> f64 {
    let p = ds.get(id).unwrap();
    let frac = neighbor_fraction_oracle(ds, (p.x, p.y), Some(id), y, h);
    let n = ds.len() as f64;
    let n_y = ds.records().iter().filter(|r| r.category == y).count() as f64;
    frac / (n_y / (n - 1.0))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
