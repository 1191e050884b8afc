//! Seeded synthetic point processes and a noisy stand-in for an image classifier.
//!
//! All randomness comes from [`RNG_NAME`] seeded with `seed_from_u64`, and
//! draws happen in a fixed sequence, so identical specs give identical output.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::dataset::{BBox, PointDataset, PointRecord};
use crate::error::{Error, Result};
use crate::fusion::{ProbTable, Source};
use crate::prob::ProbVector;

/// Identity of the random generator, recorded in run manifests.
pub const RNG_NAME: &str = "rand_chacha::ChaCha8Rng/seed_from_u64";

/// Category names and record counts of the six-class terrain feature set.
pub const TERRAIN_CLASSES: [(&str, usize); 6] = [
    ("basin", 1958),
    ("bay", 5058),
    ("island", 12558),
    ("lake", 47018),
    ("ridge", 12610),
    ("valley", 3667),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Process {
    HomogeneousPoisson {
        intensity: f64,
    },
    /// Poisson parents, Poisson(`mean_offspring`) children per parent with
    /// isotropic Gaussian displacement of standard deviation `sigma`.
    ThomasCluster {
        parent_intensity: f64,
        mean_offspring: f64,
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSpec {
    pub process: Process,
    pub region: BBox,
    pub category: usize,
    pub seed: u64,
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        let r = self.region;
        if !(r.width() > 0.0 && r.height() > 0.0) || !r.width().is_finite() || !r.height().is_finite() {
            return Err(Error::invalid("region must have positive finite extent"));
        }
        match self.process {
            Process::HomogeneousPoisson { intensity } => {
                if !(intensity > 0.0) || !intensity.is_finite() {
                    return Err(Error::invalid(format!("intensity must be positive, got {intensity}")));
                }
            }
            Process::ThomasCluster {
                parent_intensity,
                mean_offspring,
                sigma,
            } => {
                for (name, v) in [
                    ("parent intensity", parent_intensity),
                    ("mean offspring", mean_offspring),
                    ("sigma", sigma),
                ] {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn uniform_in<R: Rng>(rng: &mut R, region: &BBox) -> (f64, f64) {
    (
        rng.gen_range(region.min_x..region.max_x),
        rng.gen_range(region.min_y..region.max_y),
    )
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> Result<usize> {
    let d = Poisson::new(mean).map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as usize)
}

/// Gaussian displacement around `center`, redrawn until it lands in `region`.
fn displaced<R: Rng>(rng: &mut R, center: (f64, f64), spread: &Normal<f64>, region: &BBox) -> (f64, f64) {
    loop {
        let x = center.0 + spread.sample(rng);
        let y = center.1 + spread.sample(rng);
        if region.contains(x, y) {
            return (x, y);
        }
    }
}

/// Realize one point process. Ids are `0..n` in generation order.
pub fn gen_points(spec: &ProcessSpec) -> Result<Vec<PointRecord>> {
    spec.validate()?;
    let mut rng = rng(spec.seed);
    let area = spec.region.width() * spec.region.height();
    let mut pts = Vec::new();
    match spec.process {
        Process::HomogeneousPoisson { intensity } => {
            let n = poisson_count(&mut rng, intensity * area)?;
            for _ in 0..n {
                pts.push(uniform_in(&mut rng, &spec.region));
            }
        }
        Process::ThomasCluster {
            parent_intensity,
            mean_offspring,
            sigma,
        } => {
            let spread = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
            let parents = poisson_count(&mut rng, parent_intensity * area)?;
            for _ in 0..parents {
                let p = uniform_in(&mut rng, &spec.region);
                let k = poisson_count(&mut rng, mean_offspring)?;
                for _ in 0..k {
                    pts.push(displaced(&mut rng, p, &spread, &spec.region));
                }
            }
        }
    }
    Ok(pts
        .into_iter()
        .enumerate()
        .map(|(i, (x, y))| PointRecord::new(i as u64, x, y, spec.category))
        .collect())
}

/// Parameters of the noisy visual classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpec {
    /// Probability that the emitted label is the true one.
    pub accuracy: f64,
    /// Probability mass placed on the emitted label.
    pub concentration: f64,
    pub seed: u64,
}

/// Simulated classifier output. Each id emits its true label with
/// probability `accuracy`, otherwise a uniformly chosen wrong label; the
/// vector puts `concentration` on the emitted label and spreads the rest
/// evenly. Ids are visited in ascending order.
pub fn noisy_visual_table(truth: &BTreeMap<u64, usize>, num_categories: usize, spec: &OracleSpec) -> Result<ProbTable> {
    let c = num_categories;
    if c < 2 {
        return Err(Error::invalid("the visual oracle needs at least two categories"));
    }
    if !(spec.accuracy > 0.0 && spec.accuracy <= 1.0) {
        return Err(Error::invalid(format!("accuracy must be in (0,1], got {}", spec.accuracy)));
    }
    if !(spec.concentration > 1.0 / c as f64 && spec.concentration <= 1.0) {
        return Err(Error::invalid(format!(
            "concentration must be in (1/C, 1], got {}",
            spec.concentration
        )));
    }
    let rest = (1.0 - spec.concentration) / (c - 1) as f64;
    let mut rng = rng(spec.seed);
    let mut table = ProbTable::new(Source::Visual, c);
    for (&id, &t) in truth {
        if t >= c {
            return Err(Error::CategoryAbsent(t));
        }
        let emitted = if rng.gen::<f64>() < spec.accuracy {
            t
        } else {
            let k = rng.gen_range(0..c - 1);
            if k >= t {
                k + 1
            } else {
                k
            }
        };
        let mut v = vec![rest; c];
        v[emitted] = spec.concentration;
        table.insert(id, ProbVector::new(v)?)?;
    }
    Ok(table)
}

/// Split `n` proportionally to `weights` by largest remainder.
pub fn apportion(n: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|&w| n as f64 * w as f64 / total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut left = n - out.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[k] += 1;
        left -= 1;
    }
    out
}

/// Exactly `n` uniform points on `region` with labels drawn uniformly from
/// `names` (a homogeneous Poisson pattern conditioned on its count, randomly
/// labeled). Ids run `1..=n`.
pub fn random_labeled_csr(n: usize, names: &[&str], region: BBox, seed: u64) -> Result<PointDataset> {
    if names.is_empty() {
        return Err(Error::invalid("need at least one category"));
    }
    let mut rng = rng(seed);
    let recs = (0..n)
        .map(|i| {
            let (x, y) = uniform_in(&mut rng, &region);
            let c = rng.gen_range(0..names.len());
            PointRecord::new(i as u64 + 1, x, y, c)
        })
        .collect();
    PointDataset::new(recs, names.iter().map(|s| s.to_string()).collect())
}

/// Several classes, each with its own Thomas-style clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredScenario {
    pub classes: Vec<(String, usize)>,
    pub total: usize,
    pub parents_per_class: usize,
    pub sigma: f64,
    pub region: BBox,
    pub seed: u64,
}

impl ClusteredScenario {
    /// Six terrain classes in the proportions of [`TERRAIN_CLASSES`].
    pub fn terrain(total: usize, seed: u64) -> Self {
        ClusteredScenario {
            classes: TERRAIN_CLASSES.iter().map(|&(n, c)| (n.to_string(), c)).collect(),
            total,
            parents_per_class: 8,
            sigma: 0.04,
            region: BBox {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 1.0,
                max_y: 1.0,
            },
            seed,
        }
    }

    /// Generate the dataset. Each class gets its own uniformly placed
    /// parents; its apportioned point count is spread over them uniformly at
    /// random (a Thomas process conditioned on the class total) and displaced
    /// by Gaussian noise, resampled to stay inside the region.
    pub fn generate(&self) -> Result<PointDataset> {
        if self.parents_per_class == 0 {
            return Err(Error::invalid("need at least one parent per class"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let weights: Vec<usize> = self.classes.iter().map(|c| c.1).collect();
        let counts = apportion(self.total, &weights);
        let spread = Normal::new(0.0, self.sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = rng(self.seed);
        let mut recs = Vec::with_capacity(self.total);
        for (c, &n_c) in counts.iter().enumerate() {
            let parents: Vec<(f64, f64)> = (0..self.parents_per_class)
                .map(|_| uniform_in(&mut rng, &self.region))
                .collect();
            for _ in 0..n_c {
                let p = parents[rng.gen_range(0..parents.len())];
                let (x, y) = displaced(&mut rng, p, &spread, &self.region);
                recs.push(PointRecord::new(recs.len() as u64 + 1, x, y, c));
            }
        }
        PointDataset::new(recs, self.classes.iter().map(|c| c.0.clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BBox {
        BBox {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 1.0,
            max_y: 1.0,
        }
    }

    #[test]
    fn zero_intensity_rejected() {
        let spec = ProcessSpec {
            process: Process::HomogeneousPoisson { intensity: 0.0 },
            region: unit(),
            category: 0,
            seed: 1,
        };
        assert!(gen_points(&spec).is_err());
    }

    #[test]
    fn thomas_degenerate_spread() {
        let spec = ProcessSpec {
            process: Process::ThomasCluster {
                parent_intensity: 20.0,
                mean_offspring: 5.0,
                sigma: 1e-12,
            },
            region: unit(),
            category: 0,
            seed: 4,
        };
        let pts = gen_points(&spec).unwrap();
        assert!(!pts.is_empty());
        // offspring collapse onto a small number of parent locations
        let mut distinct: Vec<(f64, f64)> = Vec::new();
        for p in &pts {
            if !distinct.iter().any(|q| (q.0 - p.x).abs() < 1e-9 && (q.1 - p.y).abs() < 1e-9) {
                distinct.push((p.x, p.y));
            }
        }
        assert!(distinct.len() <= 40, "{} distinct sites", distinct.len());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ProcessSpec {
            process: Process::ThomasCluster {
                parent_intensity: 10.0,
                mean_offspring: 4.0,
                sigma: 0.05,
            },
            region: unit(),
            category: 2,
            seed: 11,
        };
        assert_eq!(gen_points(&spec).unwrap(), gen_points(&spec).unwrap());
        assert!(gen_points(&spec).unwrap().iter().all(|p| unit().contains(p.x, p.y) && p.category == 2));
    }

    #[test]
    fn oracle_perfect_and_invalid() {
        let truth: BTreeMap<u64, usize> = (0..50).map(|i| (i, (i % 4) as usize)).collect();
        let t = noisy_visual_table(
            &truth,
            4,
            &OracleSpec {
                accuracy: 1.0,
                concentration: 1.0,
                seed: 0,
            },
        )
        .unwrap();
        for (id, p) in t.iter() {
            let mut want = vec![0.0; 4];
            want[truth[&id]] = 1.0;
            assert_eq!(p.as_slice(), want.as_slice());
        }
        let bad = OracleSpec {
            accuracy: 0.5,
            concentration: 0.25,
            seed: 0,
        };
        assert!(noisy_visual_table(&truth, 4, &bad).is_err());
        assert!(noisy_visual_table(&truth, 1, &OracleSpec { concentration: 1.0, ..bad }).is_err());
    }

    #[test]
    fn apportion_matches_weights() {
        assert_eq!(apportion(10, &[1, 1]), vec![5, 5]);
        assert_eq!(apportion(7, &[1, 1, 1]), vec![3, 2, 2]);
        let a = apportion(6000, &TERRAIN_CLASSES.map(|c| c.1));
        assert_eq!(a.iter().sum::<usize>(), 6000);
        assert_eq!(a, vec![142, 366, 909, 3404, 913, 266]);
    }

    #[test]
    fn scenario_has_requested_size() {
        let ds = ClusteredScenario::terrain(600, 3).generate().unwrap();
        assert_eq!(ds.len(), 600);
        assert_eq!(ds.num_categories(), 6);
        assert_eq!(ds.category_names()[3], "lake");
    }

    #[test]
    fn csr_labels() {
        let ds = random_labeled_csr(300, &["a", "b", "c"], unit(), 5).unwrap();
        assert_eq!(ds.len(), 300);
        assert!(ds.counts().iter().all(|&n| n > 60));
    }
}
