//! Multi-step computations shared by several commands.

use std::collections::HashMap;

use anyhow::{bail, Result};
use sppa_core::fusion::{evaluate_ids, fit_weights, fuse_tables, ComparisonRow, FitOptions, ProbTable, Source, SourceMask};
use sppa_core::{GlobalClqTable, IntensityModel, KdeConfig, LclqConfig, LclqModel, PointDataset, Split, SplitAssignment, Strategy};

/// Locational probability tables for the query ids, with both models built
/// from the training points only.
pub struct LocationTables {
    pub first: ProbTable,
    pub second: ProbTable,
    pub global: GlobalClqTable,
}

pub fn training_subset(ds: &PointDataset, split: &SplitAssignment) -> Result<PointDataset> {
    split.validate_against(ds)?;
    let train = split.ids(Split::Train);
    if train.is_empty() {
        bail!("the split has no training points");
    }
    Ok(ds.subset(&train)?)
}

/// First- and second-order probabilities for `query_ids`, which are looked up in `ds`.
///
/// `global` replaces the table computed from the training points when given.
pub fn location_tables(
    ds: &PointDataset,
    train: &PointDataset,
    query_ids: &[u64],
    kde: KdeConfig,
    lclq: LclqConfig,
    global: Option<GlobalClqTable>,
    strategy: Strategy,
) -> Result<LocationTables> {
    let c = ds.num_categories();
    if train.category_names() != ds.category_names() {
        bail!("training subset categories differ from the dataset categories");
    }
    let locations: Vec<(f64, f64)> = query_ids
        .iter()
        .map(|&id| ds.get(id).map(|r| (r.x, r.y)).ok_or(sppa_core::Error::UnknownId(id)))
        .collect::<std::result::Result<_, _>>()?;

    let kde_model = IntensityModel::new(train, kde)?;
    let first_rows = kde_model.first_order_probs_batch(&locations, strategy);

    let lclq_model = LclqModel::new(train, lclq)?;
    let global = match global {
        Some(t) => {
            if t.num_categories() != c {
                bail!("global table has {} categories, dataset has {c}", t.num_categories());
            }
            t
        }
        None => lclq_model.global_table(strategy)?,
    };
    let second_rows = lclq_model.second_order_probs_batch(&global, &locations, strategy)?;

    let first = ProbTable::from_rows(Source::FirstOrder, c, query_ids.iter().copied().zip(first_rows))?;
    let second = ProbTable::from_rows(Source::SecondOrder, c, query_ids.iter().copied().zip(second_rows))?;
    Ok(LocationTables { first, second, global })
}

pub const CONFIGURATIONS: [(&str, SourceMask); 4] = [
    ("visual", SourceMask::VISUAL),
    ("visual+1st", SourceMask::VISUAL_FIRST),
    ("visual+2nd", SourceMask::VISUAL_SECOND),
    ("visual+1st+2nd", SourceMask::ALL),
];

/// Fit each source configuration on `fit_ids` and score it on `fit_ids` and `test_ids`.
pub fn compare(
    tables: [&ProbTable; 3],
    truth: &HashMap<u64, usize>,
    fit_ids: &[u64],
    test_ids: &[u64],
    step: f64,
    strategy: Strategy,
) -> Result<Vec<ComparisonRow>> {
    let c = tables[0].num_categories();
    let mut rows = Vec::with_capacity(CONFIGURATIONS.len());
    for (name, mask) in CONFIGURATIONS {
        let opts = FitOptions {
            step,
            sources: mask,
            strategy,
        };
        let fit = fit_weights(tables, truth, fit_ids, &opts)?;
        let fused = fuse_tables(&fit.weights, tables, test_ids)?;
        let test = evaluate_ids(&fused.predictions(), truth, test_ids, c)?;
        rows.push(ComparisonRow {
            configuration: name.to_string(),
            weights: fit.weights,
            validation: fit.accuracy,
            test: test.accuracy,
        });
    }
    Ok(rows)
}
