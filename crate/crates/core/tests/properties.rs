use proptest::prelude::*;
use sppa_core::index::build_index;
use sppa_core::{ingest_csv, split_dataset, PointDataset, PointRecord, Split};

fn dataset_strategy() -> impl Strategy<Value = PointDataset> {
    prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0, 0usize..3), 1..120).prop_map(|pts| {
        let recs: Vec<PointRecord> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y, c))| PointRecord::new(i as u64 * 3 + 1, x, y, c))
            .collect();
        // keep only the categories present, numbered by first appearance as ingestion does
        let mut used: Vec<usize> = Vec::new();
        for r in &recs {
            if !used.contains(&r.category) {
                used.push(r.category);
            }
        }
        let recs = recs
            .into_iter()
            .map(|r| PointRecord {
                category: used.iter().position(|&u| u == r.category).unwrap(),
                ..r
            })
            .collect();
        let names = (0..used.len()).map(|k| format!("k{k}")).collect();
        PointDataset::new(recs, names).unwrap()
    })
}

proptest! {
    #[test]
    fn radius_query_equals_scan(
        ds in dataset_strategy(),
        cell in 0.5f64..40.0,
        cx in -150.0f64..150.0,
        cy in -150.0f64..150.0,
        r in 0.0f64..80.0,
    ) {
        let idx = build_index(&ds, cell).unwrap();
        let mut want: Vec<u64> = ds
            .records()
            .iter()
            .filter(|p| (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy) <= r * r)
            .map(|p| p.id)
            .collect();
        want.sort();
        prop_assert_eq!(idx.query_radius((cx, cy), r), want);
    }

    #[test]
    fn split_is_stratified_partition(
        ds in dataset_strategy(),
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let f0 = a;
        let f1 = (1.0 - a) * b;
        let f = [f0, f1, 1.0 - f0 - f1];
        let s = split_dataset(&ds, f, seed).unwrap();
        s.validate_against(&ds).unwrap();
        prop_assert_eq!(s.len(), ds.len());
        for c in 0..ds.num_categories() {
            let n = ds.counts()[c] as f64;
            for (k, split) in Split::ALL.iter().enumerate() {
                let got = s.ids(*split).iter().filter(|&&id| ds.get(id).unwrap().category == c).count() as f64;
                prop_assert!((got - f[k] * n).abs() < 1.0);
            }
        }
        prop_assert_eq!(split_dataset(&ds, f, seed).unwrap(), s);
    }

    #[test]
    fn export_then_ingest_is_identity(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        prop_assert_eq!(ingest_csv(buf.as_slice()).unwrap(), ds);
    }
}
