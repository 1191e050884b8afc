mod common;

use std::f64::consts::PI;

use common::*;
use sppa_core::colocation::{self, cosine_probs, Anchor, GlobalClqTable, LclqConfig, LclqModel};
use sppa_core::index::{build_index, query_radius};
use sppa_core::intensity::{self, kernel_gauss2d, GridSpec, IntensityModel, KdeConfig};
use sppa_core::{split_dataset, PointDataset, PointRecord, Split, Strategy};

#[test]
fn radius_queries_match_scan() {
    let ds = random_dataset(500, 3, 17);
    let idx = build_index(&ds, 0.6).unwrap();
    let mut rng_q = random_queries(100, 5).into_iter();
    for k in 0..100 {
        let c = rng_q.next().unwrap();
        let r = (k as f64 * 0.037) % 3.0;
        assert_eq!(query_radius(&idx, c, r), brute_radius(&ds, c, r), "query {k}");
    }
    // query centered on data points with r = 0
    for p in ds.records().iter().take(20) {
        assert!(query_radius(&idx, (p.x, p.y), 0.0).contains(&p.id));
    }
}

#[test]
fn kernel_has_unit_mass_on_wide_disc() {
    // ∫∫_{|x|≤10h} K(|x|/h)/h² dx = ∫_0^10 K(u) 2πu du, composite Simpson
    let n = 20_000;
    let (a, b) = (0.0, 10.0);
    let step = (b - a) / n as f64;
    let f = |u: f64| kernel_gauss2d(u) * 2.0 * PI * u;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let u = a + i as f64 * step;
        s += if i % 2 == 1 { 4.0 * f(u) } else { 2.0 * f(u) };
    }
    let mass = s * step / 3.0;
    assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
}

#[test]
fn density_matches_double_loop() {
    let ds = random_dataset(300, 4, 3);
    let cfg = KdeConfig::exact(0.8);
    let m = IntensityModel::new(&ds, cfg).unwrap();
    for x in random_queries(50, 8) {
        for c in 0..4 {
            let got = m.density_at(c, x).unwrap();
            let want = kde_oracle(&ds, c, x, 0.8);
            assert!(rel_err(got, want) <= 1e-12, "c={c} x={x:?} {got} vs {want}");
        }
    }
}

#[test]
fn class_scores_are_count_weighted_densities() {
    let ds = random_dataset(400, 5, 21);
    let m = IntensityModel::new(&ds, KdeConfig::new(0.6)).unwrap();
    for x in random_queries(30, 2) {
        let s = m.class_scores_at(x);
        for (c, score) in s.iter().enumerate() {
            let d = m.density_at(c, x).unwrap();
            let n = ds.counts()[c] as f64;
            assert!(rel_err(score / n, d) <= 1e-12);
        }
    }
}

#[test]
fn raster_cells_match_pointwise_density() {
    let ds = clustered_dataset(200, 4);
    let grid = GridSpec::covering(ds.bbox(), 0.5, (ds.bbox().width().max(ds.bbox().height()) + 1.0) / 32.0);
    let grid = GridSpec {
        width: 32,
        height: 32,
        ..grid
    };
    let cfg = KdeConfig::new(0.4);
    let m = IntensityModel::new(&ds, cfg).unwrap();
    let r = m.raster(1, &grid, Strategy::Parallel).unwrap();
    for row in 0..32 {
        for col in 0..32 {
            let want = m.density_at(1, grid.center(col, row)).unwrap();
            assert!(rel_err(r.get(col, row), want) <= 1e-12);
        }
    }
    let serial = m.raster(1, &grid, Strategy::Serial).unwrap();
    assert_eq!(r, serial, "serial and parallel rasters must be bit-identical");
}

#[test]
fn density_integrates_to_one() {
    let ds = clustered_dataset(150, 9);
    let h = 0.5;
    let grid = GridSpec::covering(ds.bbox(), 6.0 * h, h / 4.0);
    for c in 0..2 {
        let r = intensity::intensity_raster(&ds, c, &grid, &KdeConfig::new(h)).unwrap();
        assert!((r.integral() - 1.0).abs() < 0.01, "mass {}", r.integral());
    }
}

#[test]
fn truncation_error_is_small() {
    for seed in 0..5 {
        let ds = random_dataset(300, 3, 100 + seed);
        let exact = IntensityModel::new(&ds, KdeConfig::exact(0.5)).unwrap();
        let cut = IntensityModel::new(&ds, KdeConfig::new(0.5)).unwrap();
        // queries inside the data region; far outside it every point lies
        // beyond the cutoff and the truncated estimate is exactly zero
        let b = ds.bbox();
        let inside = random_queries(400, seed)
            .into_iter()
            .filter(|&(x, y)| b.contains(x, y))
            .take(40);
        for x in inside {
            for c in 0..3 {
                let a = exact.density_at(c, x).unwrap();
                if a > 1e-12 {
                    let b = cut.density_at(c, x).unwrap();
                    assert!(rel_err(a, b) <= 1e-4, "{a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn first_order_probs_sum_to_one_and_follow_relabeling() {
    let ds = random_dataset(250, 4, 12);
    // relabel c -> (c + 1) % 4, renaming so the category table is a permutation
    let names: Vec<String> = (0..4).map(|c| format!("c{}", (c + 3) % 4)).collect();
    let permuted: Vec<PointRecord> = ds
        .records()
        .iter()
        .map(|r| PointRecord { category: (r.category + 1) % 4, ..*r })
        .collect();
    let pds = PointDataset::new(permuted, names).unwrap();
    let cfg = KdeConfig::new(0.9);
    let m = IntensityModel::new(&ds, cfg).unwrap();
    let pm = IntensityModel::new(&pds, cfg).unwrap();
    for x in random_queries(40, 77) {
        let p = m.first_order_probs(x);
        let q = pm.first_order_probs(x);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for c in 0..4 {
            assert!((p[c] - q[(c + 1) % 4]).abs() <= 1e-15);
        }
    }
}

#[test]
fn duplicating_a_category_raises_its_probability() {
    let ds = random_dataset(120, 3, 44);
    let mut recs = ds.records().to_vec();
    let next = recs.iter().map(|r| r.id).max().unwrap() + 1;
    let extra: Vec<PointRecord> = recs
        .iter()
        .filter(|r| r.category == 1)
        .enumerate()
        .map(|(k, r)| PointRecord { id: next + k as u64, ..*r })
        .collect();
    recs.extend(extra);
    let doubled = PointDataset::new(recs, ds.category_names()).unwrap();
    let cfg = KdeConfig::new(1.0);
    let a = IntensityModel::new(&ds, cfg).unwrap();
    let b = IntensityModel::new(&doubled, cfg).unwrap();
    for x in random_queries(50, 3) {
        let s = a.class_scores_at(x);
        if s[1] > 0.0 && (s[0] > 0.0 || s[2] > 0.0) {
            assert!(b.first_order_probs(x)[1] > a.first_order_probs(x)[1]);
        }
    }
}

#[test]
fn neighbor_fraction_and_lclq_match_double_loop() {
    let ds = random_dataset(50, 3, 5);
    let cfg = LclqConfig::exact(1.2);
    let m = LclqModel::new(&ds, cfg).unwrap();
    for p in ds.records() {
        for y in 0..3 {
            let nf = m.neighbor_fraction(Anchor::Point(p.id), y).unwrap().value;
            let want = neighbor_fraction_oracle(&ds, (p.x, p.y), Some(p.id), y, 1.2);
            assert!(rel_err(nf, want) <= 1e-12 || (nf - want).abs() <= 1e-15);
            let l = m.lclq(Anchor::Point(p.id), y).unwrap();
            let lw = lclq_oracle(&ds, p.id, y, 1.2);
            assert!(rel_err(l, lw) <= 1e-12 || (l - lw).abs() <= 1e-15);
        }
    }
    for x in random_queries(20, 9) {
        let nf = m.neighbor_fraction(Anchor::Free(x.0, x.1), 2).unwrap().value;
        let want = neighbor_fraction_oracle(&ds, x, None, 2, 1.2);
        assert!(rel_err(nf, want) <= 1e-12 || (nf - want).abs() <= 1e-15);
    }
}

#[test]
fn lclq_vector_is_per_category_lclq() {
    let ds = random_dataset(150, 4, 31);
    let m = LclqModel::new(&ds, LclqConfig::new(0.9)).unwrap();
    for id in ds.ids().into_iter().take(40) {
        let v = m.lclq_vector(Anchor::Point(id)).unwrap();
        for y in 0..4 {
            assert_eq!(v.values[y], m.lclq(Anchor::Point(id), y).unwrap());
        }
    }
}

#[test]
fn global_table_matches_recomputation() {
    let ds = random_dataset(200, 3, 8);
    let split = split_dataset(&ds, [0.6, 0.2, 0.2], 4).unwrap();
    let cfg = LclqConfig::exact(1.0);
    let table = colocation::global_clq(&ds, &split, &cfg).unwrap();

    let train_ids = split.ids(Split::Train);
    let train = ds.subset(&train_ids).unwrap();
    for c in 0..3 {
        let members: Vec<u64> = train.records().iter().filter(|r| r.category == c).map(|r| r.id).collect();
        assert_eq!(table.contributing[c], members.len());
        for y in 0..3 {
            let mean = members.iter().map(|&id| lclq_oracle(&train, id, y, 1.0)).sum::<f64>() / members.len() as f64;
            assert!(rel_err(table.rows[c][y], mean) <= 1e-12, "row {c} col {y}");
        }
    }
}

#[test]
fn neighbor_fractions_partition() {
    let ds = random_dataset(300, 6, 70);
    let m = LclqModel::new(&ds, LclqConfig::new(0.7)).unwrap();
    for id in ds.ids() {
        let total: f64 = (0..6).map(|y| m.neighbor_fraction(Anchor::Point(id), y).unwrap().value).sum();
        assert!((total - 1.0).abs() <= 6.0 * f64::EPSILON, "sum {total}");
    }
}

#[test]
fn lclq_is_scale_invariant() {
    let ds = random_dataset(200, 3, 15);
    let scaled = PointDataset::new(
        ds.records()
            .iter()
            .map(|r| PointRecord {
                x: r.x * 1000.0,
                y: r.y * 1000.0,
                ..*r
            })
            .collect(),
        ds.category_names(),
    )
    .unwrap();
    let a = LclqModel::new(&ds, LclqConfig::new(0.8)).unwrap();
    let b = LclqModel::new(&scaled, LclqConfig::new(800.0)).unwrap();
    for id in ds.ids() {
        let va = a.lclq_vector(Anchor::Point(id)).unwrap().values;
        let vb = b.lclq_vector(Anchor::Point(id)).unwrap().values;
        for (x, y) in va.iter().zip(&vb) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

#[test]
fn second_order_argmax_ignores_scaling() {
    let ds = random_dataset(300, 4, 55);
    let m = LclqModel::new(&ds, LclqConfig::new(1.0)).unwrap();
    let table = m.global_table(Strategy::Serial).unwrap();
    let scaled = GlobalClqTable {
        rows: table
            .rows
            .iter()
            .enumerate()
            .map(|(c, r)| r.iter().map(|v| v * (c as f64 + 0.5) * 3.0).collect())
            .collect(),
        ..table.clone()
    };
    for x in random_queries(40, 6) {
        let v = m.lclq_vector(Anchor::Free(x.0, x.1)).unwrap().values;
        let v2: Vec<f64> = v.iter().map(|a| a * 17.0).collect();
        let p = cosine_probs(&v, &table, 1e-12).unwrap();
        assert_eq!(p.argmax(), cosine_probs(&v2, &scaled, 1e-12).unwrap().argmax());
        for c in 0..4 {
            let s = colocation::cosine(&v, &table.rows[c], 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&s));
        }
    }
}

#[test]
fn random_labels_average_to_one() {
    let region = sppa_core::BBox {
        min_x: 0.0,
        min_y: 0.0,
        max_x: 1.0,
        max_y: 1.0,
    };
    let ds = sppa_core::synth::random_labeled_csr(2000, &["a", "b"], region, 99).unwrap();
    let m = LclqModel::new(&ds, LclqConfig::new(0.08)).unwrap();
    let vs = m.point_vectors(Strategy::Parallel).unwrap();
    for y in 0..2 {
        let mean = vs.iter().map(|v| v.values[y]).sum::<f64>() / vs.len() as f64;
        assert!((0.95..=1.05).contains(&mean), "mean {mean}");
    }
}

#[test]
fn batch_paths_agree_across_strategies() {
    let ds = random_dataset(400, 3, 2);
    let km = IntensityModel::new(&ds, KdeConfig::new(0.5)).unwrap();
    let lm = LclqModel::new(&ds, LclqConfig::new(0.5)).unwrap();
    let qs = random_queries(200, 1);
    assert_eq!(
        km.first_order_probs_batch(&qs, Strategy::Serial),
        km.first_order_probs_batch(&qs, Strategy::Parallel)
    );
    let t = lm.global_table(Strategy::Parallel).unwrap();
    assert_eq!(t, lm.global_table(Strategy::Serial).unwrap());
    assert_eq!(
        lm.second_order_probs_batch(&t, &qs, Strategy::Serial).unwrap(),
        lm.second_order_probs_batch(&t, &qs, Strategy::Parallel).unwrap()
    );
}
