//! `sppa`: command-line pipeline from labeled point files to fused
//! locational class probabilities.
//!
//! Every command reads its inputs, writes its outputs atomically and leaves
//! a `<output>.manifest` describing parameters and input/output hashes.
//! Exit status: 0 success, 1 usage error, 2 data error.

// `!(x >= 0.0)` guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod pipeline;
pub mod raster_io;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sppa_core::colocation::write_vectors_csv;
use sppa_core::fusion::{evaluate_ids, fit_weights, fuse_tables, render_comparison, render_comparison_csv, FitOptions, FusionWeights, ProbTable, Source, SourceMask};
use sppa_core::synth::{self, ClusteredScenario, OracleSpec, Process, ProcessSpec};
use sppa_core::{
    ingest_csv, split_dataset, BBox, GlobalClqTable, GridSpec, IntensityModel, KdeConfig, LclqConfig, LclqModel, PointDataset,
    PointRecord, Split, SplitAssignment, Strategy,
};

use crate::output::{default_manifest_path, read_input, usage, Manifest, UsageError};
use crate::raster_io::PgmDepth;

#[derive(Debug, Parser)]
#[command(name = "sppa", version, about = "Locational class probabilities from labeled point patterns")]
pub struct Cli {
    /// key=value file supplying defaults for any long flag
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Manifest path (default: <primary output>.manifest)
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled point pattern (and optionally a simulated visual table)
    Synth(SynthArgs),
    /// Validate a point file and summarize it
    Ingest(IngestArgs),
    /// Stratified train/validation/test split
    Split(SplitArgs),
    /// Kernel density raster of one category
    Intensity(IntensityArgs),
    /// Local co-location quotient vectors of every point
    Lclq(LclqArgs),
    /// Per-category mean co-location vectors
    Globalclq(GlobalArgs),
    /// First- and second-order locational probabilities for held-out points
    Locprobs(LocprobsArgs),
    /// Fit fusion weights on a labeled subset
    FuseFit(FuseFitArgs),
    /// Accuracy and confusion matrix of predictions
    Evaluate(EvaluateArgs),
    /// Fit and score visual-only and fused configurations side by side
    Compare(CompareArgs),
    /// Render a raster file as a binary PGM image
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Uniform points with uniformly random labels
    Csr,
    /// One independent Thomas cluster process per category
    Thomas,
    /// Six clustered terrain classes
    Terrain,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "csr")]
    pub preset: Preset,
    /// Number of points (csr, terrain)
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of categories (csr, thomas)
    #[arg(long, default_value_t = 3)]
    pub categories: usize,
    #[arg(long, default_value_t = 10.0)]
    pub parent_intensity: f64,
    #[arg(long, default_value_t = 20.0)]
    pub mean_offspring: f64,
    #[arg(long, default_value_t = 0.03)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "points.csv")]
    pub out: PathBuf,
    /// Also write a simulated visual probability table
    #[arg(long)]
    pub visual_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.68)]
    pub accuracy: f64,
    #[arg(long, default_value_t = 0.8)]
    pub concentration: f64,
    /// Seed of the visual table (default: seed + 1)
    #[arg(long)]
    pub visual_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    /// Summary file (also printed)
    #[arg(long, default_value = "ingest.txt")]
    pub out: PathBuf,
    /// Write the validated points in canonical form
    #[arg(long)]
    pub normalized: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    /// train,validation,test fractions
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub fractions: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "split.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Bandwidth (default: 0.05 x bounding-box diagonal)
    #[arg(long)]
    pub h: Option<f64>,
    /// Truncation radius in bandwidths
    #[arg(long, default_value_t = 5.0)]
    pub cutoff: f64,
    /// Sum over every point instead of truncating
    #[arg(long)]
    pub no_truncation: bool,
}

#[derive(Debug, Args)]
pub struct IntensityArgs {
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    /// Use only the training points of this split
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub category: String,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Cell side (default: bounding-box diagonal / 128)
    #[arg(long)]
    pub cell: Option<f64>,
    /// Grid margin around the bounding box
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
    /// Explicit grid `x0,y0,cell,width,height`
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value = "intensity.txt")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LclqArgs {
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    /// Use only the training points of this split
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Use (N_Y - 1)/(N - 1) as the denominator when the anchor is in Y
    #[arg(long)]
    pub self_correction: bool,
    #[arg(long, default_value = "lclq.csv")]
    pub out: PathBuf,
    /// Write the per-category mean summary here as well as to stdout
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    /// Use only the training points of this split
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub self_correction: bool,
    #[arg(long, default_value = "globalclq.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocprobsArgs {
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    #[arg(long, default_value = "split.csv")]
    pub split: PathBuf,
    /// Kernel density bandwidth (default: 0.05 x training bounding-box diagonal)
    #[arg(long)]
    pub kde_h: Option<f64>,
    /// Co-location bandwidth (default: 0.05 x training bounding-box diagonal)
    #[arg(long)]
    pub lclq_h: Option<f64>,
    #[arg(long, default_value_t = 5.0)]
    pub cutoff: f64,
    #[arg(long)]
    pub no_truncation: bool,
    #[arg(long)]
    pub self_correction: bool,
    /// Precomputed global co-location table
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Splits whose points get probabilities
    #[arg(long, default_value = "val,test")]
    pub on: String,
    #[arg(long, default_value = "first.csv")]
    pub first_out: PathBuf,
    #[arg(long, default_value = "second.csv")]
    pub second_out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SourceTables {
    #[arg(long, default_value = "visual.csv")]
    pub visual: PathBuf,
    #[arg(long, default_value = "first.csv")]
    pub first: PathBuf,
    #[arg(long, default_value = "second.csv")]
    pub second: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseFitArgs {
    /// Labeled points providing the truth
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    /// Fit on one split of this assignment instead of every visual-table id
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value = "val")]
    pub fit_on: Split,
    #[command(flatten)]
    pub tables: SourceTables,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Sources allowed nonzero weight, from vis,1st,2nd
    #[arg(long, default_value = "vis,1st,2nd")]
    pub sources: String,
    #[arg(long, default_value = "weights.txt")]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Labeled points providing the truth
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    /// `id,category` predictions with category names
    #[arg(long, conflicts_with_all = ["probs", "weights"])]
    pub preds: Option<PathBuf>,
    /// Probability table; predictions are its argmax
    #[arg(long, conflicts_with = "weights")]
    pub probs: Option<PathBuf>,
    /// Weights file; predictions fuse --visual, --first and --second
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub visual: Option<PathBuf>,
    #[arg(long)]
    pub first: Option<PathBuf>,
    #[arg(long)]
    pub second: Option<PathBuf>,
    /// Restrict to one split of this assignment
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub on: Split,
    #[arg(long, default_value = "report.txt")]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, default_value = "points.csv")]
    pub input: PathBuf,
    #[arg(long, default_value = "split.csv")]
    pub split: PathBuf,
    #[command(flatten)]
    pub tables: SourceTables,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value = "compare.txt")]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, default_value = "intensity.txt")]
    pub raster: PathBuf,
    /// pgm8 or pgm16
    #[arg(long, default_value = "pgm8")]
    pub mode: PgmDepth,
    #[arg(long, default_value = "heatmap.pgm")]
    pub out: PathBuf,
    /// Scaling metadata (default: <out>.meta)
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

/// Parse and execute `args` (including the program name); returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let args = match config::merge_config(args) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => report(e),
    }
}

fn report(e: anyhow::Error) -> i32 {
    eprintln!("error: {e:#}");
    if e.downcast_ref::<UsageError>().is_some() {
        1
    } else {
        2
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let strategy = Strategy::default();
    let manifest = |primary: &Path| cli.manifest.clone().unwrap_or_else(|| default_manifest_path(primary));
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, &manifest(&a.out)),
        Command::Ingest(a) => cmd_ingest(a, &manifest(&a.out)),
        Command::Split(a) => cmd_split(a, &manifest(&a.out)),
        Command::Intensity(a) => cmd_intensity(a, &manifest(&a.out), strategy),
        Command::Lclq(a) => cmd_lclq(a, &manifest(&a.out), strategy),
        Command::Globalclq(a) => cmd_globalclq(a, &manifest(&a.out), strategy),
        Command::Locprobs(a) => cmd_locprobs(a, &manifest(&a.first_out), strategy),
        Command::FuseFit(a) => cmd_fuse_fit(a, &manifest(&a.out), strategy),
        Command::Evaluate(a) => cmd_evaluate(a, &manifest(&a.out)),
        Command::Compare(a) => cmd_compare(a, &manifest(&a.out), strategy),
        Command::Heatmap(a) => cmd_heatmap(a, &manifest(&a.out)),
    }
}

// ---- input helpers ----

fn load_points(path: &Path, m: &mut Manifest) -> Result<PointDataset> {
    let bytes = read_input(path)?;
    m.input(path, &bytes);
    ingest_csv(bytes.as_slice()).with_context(|| format!("in {}", path.display()))
}

fn load_split(path: &Path, m: &mut Manifest) -> Result<SplitAssignment> {
    let bytes = read_input(path)?;
    m.input(path, &bytes);
    SplitAssignment::read_csv(bytes.as_slice()).with_context(|| format!("in {}", path.display()))
}

fn load_table(path: &Path, source: Source, m: &mut Manifest) -> Result<ProbTable> {
    let bytes = read_input(path)?;
    m.input(path, &bytes);
    ProbTable::read_csv(bytes.as_slice(), source).with_context(|| format!("in {}", path.display()))
}

fn load_text(path: &Path, m: &mut Manifest) -> Result<String> {
    let bytes = read_input(path)?;
    m.input(path, &bytes);
    String::from_utf8(bytes).map_err(|_| anyhow!("{} is not UTF-8 text", path.display()))
}

fn load_tables(t: &SourceTables, m: &mut Manifest) -> Result<[ProbTable; 3]> {
    Ok([
        load_table(&t.visual, Source::Visual, m)?,
        load_table(&t.first, Source::FirstOrder, m)?,
        load_table(&t.second, Source::SecondOrder, m)?,
    ])
}

/// The dataset restricted to training points when a split file is given.
fn maybe_train(ds: PointDataset, split: Option<&Path>, m: &mut Manifest) -> Result<PointDataset> {
    match split {
        Some(p) => {
            let s = load_split(p, m)?;
            pipeline::training_subset(&ds, &s)
        }
        None => Ok(ds),
    }
}

fn category(ds: &PointDataset, name: &str) -> Result<usize> {
    ds.category_index(name).ok_or_else(|| {
        usage(format!(
            "unknown category `{name}` (known: {})",
            ds.category_names().join(", ")
        ))
    })
}

fn default_bandwidth(ds: &PointDataset) -> f64 {
    KdeConfig::default_for(ds).bandwidth
}

fn kde_config(h: Option<f64>, cutoff: f64, no_truncation: bool, ds: &PointDataset) -> Result<KdeConfig> {
    let cfg = KdeConfig {
        bandwidth: h.unwrap_or_else(|| default_bandwidth(ds)),
        cutoff_multiplier: cutoff,
        truncation: !no_truncation,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn lclq_config(h: Option<f64>, cutoff: f64, no_truncation: bool, self_correction: bool, ds: &PointDataset) -> Result<LclqConfig> {
    let cfg = LclqConfig {
        cutoff_multiplier: cutoff,
        truncation: !no_truncation,
        self_correction,
        ..LclqConfig::new(h.unwrap_or_else(|| default_bandwidth(ds)))
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn record_kernel(m: &mut Manifest, prefix: &str, h: f64, cutoff: f64, truncation: bool) {
    m.param(&format!("{prefix}bandwidth"), h)
        .param(&format!("{prefix}cutoff"), cutoff)
        .param(&format!("{prefix}truncation"), truncation);
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("invalid {what} `{s}`"))))
        .collect()
}

fn parse_mask(s: &str) -> Result<SourceMask> {
    let mut mask = SourceMask {
        visual: false,
        first: false,
        second: false,
    };
    for t in s.split(',').map(str::trim) {
        match t {
            "vis" => mask.visual = true,
            "1st" => mask.first = true,
            "2nd" => mask.second = true,
            _ => return Err(usage(format!("unknown source `{t}` (expected vis, 1st or 2nd)"))),
        }
    }
    Ok(mask)
}

fn parse_splits(s: &str) -> Result<Vec<Split>> {
    s.split(',')
        .map(|t| t.trim().parse::<Split>().map_err(|e| usage(e.to_string())))
        .collect()
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> sppa_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

// ---- commands ----

fn unit_square() -> BBox {
    BBox {
        min_x: 0.0,
        min_y: 0.0,
        max_x: 1.0,
        max_y: 1.0,
    }
}

fn thomas_dataset(a: &SynthArgs) -> Result<PointDataset> {
    let mut recs = Vec::new();
    for c in 0..a.categories {
        let spec = ProcessSpec {
            process: Process::ThomasCluster {
                parent_intensity: a.parent_intensity,
                mean_offspring: a.mean_offspring,
                sigma: a.sigma,
            },
            region: unit_square(),
            category: c,
            seed: a.seed.wrapping_add(c as u64),
        };
        spec.validate().map_err(|e| usage(e.to_string()))?;
        for p in synth::gen_points(&spec)? {
            recs.push(PointRecord::new(recs.len() as u64 + 1, p.x, p.y, c));
        }
    }
    let names = (0..a.categories).map(|c| format!("c{c}")).collect();
    PointDataset::new(recs, names).context("a category produced no points; try another seed or a larger intensity")
}

fn cmd_synth(a: &SynthArgs, manifest: &Path) -> Result<()> {
    let mut m = Manifest::new("synth");
    m.param("preset", format!("{:?}", a.preset).to_lowercase()).param("seed", a.seed);
    let ds = match a.preset {
        Preset::Csr => {
            if a.categories == 0 {
                return Err(usage("--categories must be at least 1"));
            }
            m.param("n", a.n).param("categories", a.categories);
            let names: Vec<String> = (0..a.categories).map(|c| format!("c{c}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            synth::random_labeled_csr(a.n, &refs, unit_square(), a.seed)?
        }
        Preset::Thomas => {
            m.param("categories", a.categories)
                .param("parent_intensity", a.parent_intensity)
                .param("mean_offspring", a.mean_offspring)
                .param("sigma", a.sigma);
            thomas_dataset(a)?
        }
        Preset::Terrain => {
            m.param("n", a.n);
            ClusteredScenario::terrain(a.n, a.seed).generate()?
        }
    };
    m.write(&a.out, &csv_bytes(|b| ds.write_csv(b))?)?;
    if let Some(vpath) = &a.visual_out {
        let spec = OracleSpec {
            accuracy: a.accuracy,
            concentration: a.concentration,
            seed: a.visual_seed.unwrap_or(a.seed.wrapping_add(1)),
        };
        m.param("visual.accuracy", spec.accuracy)
            .param("visual.concentration", spec.concentration)
            .param("visual.seed", spec.seed);
        let truth: BTreeMap<u64, usize> = ds.records().iter().map(|r| (r.id, r.category)).collect();
        let table = synth::noisy_visual_table(&truth, ds.num_categories(), &spec).map_err(|e| usage(e.to_string()))?;
        m.write(vpath, &csv_bytes(|b| table.write_csv(b))?)?;
    }
    m.finish(manifest)?;
    println!("wrote {} points to {}", ds.len(), a.out.display());
    Ok(())
}

fn cmd_ingest(a: &IngestArgs, manifest: &Path) -> Result<()> {
    let mut m = Manifest::new("ingest");
    let ds = load_points(&a.input, &mut m)?;
    let summary = ds.summary();
    print!("{summary}");
    m.write(&a.out, summary.as_bytes())?;
    if let Some(n) = &a.normalized {
        m.write(n, &csv_bytes(|b| ds.write_csv(b))?)?;
    }
    m.finish(manifest)?;
    Ok(())
}

fn cmd_split(a: &SplitArgs, manifest: &Path) -> Result<()> {
    let mut m = Manifest::new("split");
    let f = parse_floats(&a.fractions, "fractions")?;
    let f: [f64; 3] = f
        .try_into()
        .map_err(|_| usage("--fractions needs exactly three values"))?;
    let ds = load_points(&a.input, &mut m)?;
    m.param("fractions", &a.fractions).param("seed", a.seed);
    let s = split_dataset(&ds, f, a.seed).map_err(|e| usage(e.to_string()))?;
    m.write(&a.out, &csv_bytes(|b| s.write_csv(b))?)?;
    m.finish(manifest)?;
    let counts: Vec<String> = Split::ALL
        .iter()
        .map(|&k| format!("{}={}", k, s.ids(k).len()))
        .collect();
    println!("wrote {} ({})", a.out.display(), counts.join(" "));
    Ok(())
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let v = parse_floats(s, "grid")?;
    if v.len() != 5 || v[3].fract() != 0.0 || v[4].fract() != 0.0 || v[3] < 1.0 || v[4] < 1.0 {
        return Err(usage("--grid needs x0,y0,cell,width,height with positive integer width and height"));
    }
    let g = GridSpec {
        x0: v[0],
        y0: v[1],
        cell: v[2],
        width: v[3] as usize,
        height: v[4] as usize,
    };
    g.validate().map_err(|e| usage(e.to_string()))?;
    Ok(g)
}

fn cmd_intensity(a: &IntensityArgs, manifest: &Path, strategy: Strategy) -> Result<()> {
    let mut m = Manifest::new("intensity");
    let ds = load_points(&a.input, &mut m)?;
    let ds = maybe_train(ds, a.split.as_deref(), &mut m)?;
    let c = category(&ds, &a.category)?;
    let k = &a.kernel;
    let cfg = kde_config(k.h, k.cutoff, k.no_truncation, &ds)?;
    let grid = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => {
            let cell = a.cell.unwrap_or(ds.bbox().diagonal() / 128.0);
            if !(cell > 0.0 && cell.is_finite()) || !(a.margin >= 0.0) {
                return Err(usage("--cell must be positive and --margin nonnegative"));
            }
            GridSpec::covering(ds.bbox(), a.margin, cell)
        }
    };
    m.param("category", &a.category)
        .param("grid", format!("{},{},{},{},{}", grid.x0, grid.y0, grid.cell, grid.width, grid.height));
    record_kernel(&mut m, "", cfg.bandwidth, cfg.cutoff_multiplier, cfg.truncation);
    let raster = IntensityModel::new(&ds, cfg)?.raster(c, &grid, strategy)?;
    m.write(&a.out, raster_io::render_raster(&raster, &a.category).as_bytes())?;
    m.finish(manifest)?;
    println!("wrote {}x{} raster to {}", grid.width, grid.height, a.out.display());
    Ok(())
}

fn cmd_lclq(a: &LclqArgs, manifest: &Path, strategy: Strategy) -> Result<()> {
    let mut m = Manifest::new("lclq");
    let ds = load_points(&a.input, &mut m)?;
    let ds = maybe_train(ds, a.split.as_deref(), &mut m)?;
    let k = &a.kernel;
    let cfg = lclq_config(k.h, k.cutoff, k.no_truncation, a.self_correction, &ds)?;
    record_kernel(&mut m, "", cfg.bandwidth, cfg.cutoff_multiplier, cfg.truncation);
    m.param("self_correction", cfg.self_correction);
    let model = LclqModel::new(&ds, cfg)?;
    let vectors = model.point_vectors(strategy)?;
    m.write(&a.out, &csv_bytes(|b| write_vectors_csv(&vectors, ds.num_categories(), b))?)?;

    let names = ds.category_names();
    let n = vectors.len() as f64;
    let isolated = vectors.iter().filter(|v| v.isolated).count();
    let mut summary = format!("anchors={}\nisolated={isolated}\n", vectors.len());
    for (y, name) in names.iter().enumerate() {
        let mean = vectors.iter().map(|v| v.values[y]).sum::<f64>() / n;
        summary.push_str(&format!("mean_lclq.{name}={mean}\n"));
    }
    print!("{summary}");
    if let Some(s) = &a.summary {
        m.write(s, summary.as_bytes())?;
    }
    m.finish(manifest)?;
    Ok(())
}

fn cmd_globalclq(a: &GlobalArgs, manifest: &Path, strategy: Strategy) -> Result<()> {
    let mut m = Manifest::new("globalclq");
    let ds = load_points(&a.input, &mut m)?;
    let ds = maybe_train(ds, a.split.as_deref(), &mut m)?;
    let k = &a.kernel;
    let cfg = lclq_config(k.h, k.cutoff, k.no_truncation, a.self_correction, &ds)?;
    record_kernel(&mut m, "", cfg.bandwidth, cfg.cutoff_multiplier, cfg.truncation);
    m.param("self_correction", cfg.self_correction);
    let table = LclqModel::new(&ds, cfg)?.global_table(strategy)?;
    m.write(&a.out, &csv_bytes(|b| table.write_csv(b))?)?;
    m.finish(manifest)?;
    println!("wrote {}x{} table to {}", table.num_categories(), table.num_categories(), a.out.display());
    Ok(())
}

fn cmd_locprobs(a: &LocprobsArgs, manifest: &Path, strategy: Strategy) -> Result<()> {
    let mut m = Manifest::new("locprobs");
    let on = parse_splits(&a.on)?;
    let ds = load_points(&a.input, &mut m)?;
    let split = load_split(&a.split, &mut m)?;
    let train = pipeline::training_subset(&ds, &split)?;
    let kde = kde_config(a.kde_h, a.cutoff, a.no_truncation, &train)?;
    let lclq = lclq_config(a.lclq_h, a.cutoff, a.no_truncation, a.self_correction, &train)?;
    let global = match &a.table {
        Some(p) => {
            let text = load_text(p, &mut m)?;
            Some(GlobalClqTable::read_csv(text.as_bytes()).with_context(|| format!("in {}", p.display()))?)
        }
        None => None,
    };
    record_kernel(&mut m, "kde.", kde.bandwidth, kde.cutoff_multiplier, kde.truncation);
    record_kernel(&mut m, "lclq.", lclq.bandwidth, lclq.cutoff_multiplier, lclq.truncation);
    m.param("self_correction", lclq.self_correction).param("on", &a.on);
    let mut ids: Vec<u64> = on.iter().flat_map(|&s| split.ids(s)).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        bail!("no points in splits {}", a.on);
    }
    let t = pipeline::location_tables(&ds, &train, &ids, kde, lclq, global, strategy)?;
    m.write(&a.first_out, &csv_bytes(|b| t.first.write_csv(b))?)?;
    m.write(&a.second_out, &csv_bytes(|b| t.second.write_csv(b))?)?;
    m.finish(manifest)?;
    println!(
        "wrote probabilities for {} points to {} and {}",
        ids.len(),
        a.first_out.display(),
        a.second_out.display()
    );
    Ok(())
}

fn fit_ids(split: Option<&SplitAssignment>, on: Split, visual: &ProbTable) -> Vec<u64> {
    match split {
        Some(s) => s.ids(on),
        None => visual.ids(),
    }
}

fn cmd_fuse_fit(a: &FuseFitArgs, manifest: &Path, strategy: Strategy) -> Result<()> {
    let mut m = Manifest::new("fuse-fit");
    let sources = parse_mask(&a.sources)?;
    let ds = load_points(&a.input, &mut m)?;
    let split = a.split.as_deref().map(|p| load_split(p, &mut m)).transpose()?;
    let tables = load_tables(&a.tables, &mut m)?;
    m.param("step", a.step).param("sources", &a.sources);
    if split.is_some() {
        m.param("fit_on", a.fit_on);
    }
    let ids = fit_ids(split.as_ref(), a.fit_on, &tables[0]);
    let opts = FitOptions {
        step: a.step,
        sources,
        strategy,
    };
    sppa_core::fusion::lattice_divisions(a.step).map_err(|e| usage(e.to_string()))?;
    let fit = fit_weights([&tables[0], &tables[1], &tables[2]], &ds.truth(), &ids, &opts)?;
    m.write(&a.out, format!("{}\n", fit.weights).as_bytes())?;
    if let Some(r) = &a.report {
        m.write(r, fit.to_string().as_bytes())?;
    }
    m.finish(manifest)?;
    println!("{}", fit.weights);
    println!("fit accuracy {:.3} on {} samples", fit.accuracy, fit.samples);
    Ok(())
}

fn read_predictions(text: &str, ds: &PointDataset) -> Result<BTreeMap<u64, usize>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "id,category" => {}
        _ => bail!("line 1: expected header `id,category`"),
    }
    let mut preds = BTreeMap::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id, cat) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("line {}: expected id,category", i + 1))?;
        let id: u64 = id.trim().parse().map_err(|_| anyhow!("line {}: invalid id `{id}`", i + 1))?;
        let c = ds
            .category_index(cat.trim())
            .ok_or_else(|| anyhow!("line {}: unknown category `{}`", i + 1, cat.trim()))?;
        if preds.insert(id, c).is_some() {
            bail!("line {}: duplicate id {id}", i + 1);
        }
    }
    Ok(preds)
}

fn cmd_evaluate(a: &EvaluateArgs, manifest: &Path) -> Result<()> {
    let mut m = Manifest::new("evaluate");
    let ds = load_points(&a.input, &mut m)?;
    let c = ds.num_categories();
    let restrict = match &a.split {
        Some(p) => {
            m.param("on", a.on);
            Some(load_split(p, &mut m)?.ids(a.on))
        }
        None => None,
    };
    let preds = if let Some(p) = &a.preds {
        m.param("mode", "preds");
        read_predictions(&load_text(p, &mut m)?, &ds).with_context(|| format!("in {}", p.display()))?
    } else if let Some(p) = &a.probs {
        m.param("mode", "probs");
        load_table(p, Source::Fused, &mut m)?.predictions()
    } else if let Some(w) = &a.weights {
        let (Some(v), Some(f), Some(s)) = (&a.visual, &a.first, &a.second) else {
            return Err(usage("--weights needs --visual, --first and --second"));
        };
        let weights: FusionWeights = load_text(w, &mut m)?
            .trim()
            .parse()
            .with_context(|| format!("in {}", w.display()))?;
        m.param("mode", "fused").param("weights", weights);
        let tables = load_tables(
            &SourceTables {
                visual: v.clone(),
                first: f.clone(),
                second: s.clone(),
            },
            &mut m,
        )?;
        let ids = restrict.clone().unwrap_or_else(|| tables[1].ids());
        fuse_tables(&weights, [&tables[0], &tables[1], &tables[2]], &ids)?.predictions()
    } else {
        return Err(usage("give one of --preds, --probs or --weights"));
    };
    let ids = restrict.unwrap_or_else(|| preds.keys().copied().collect());
    if ids.is_empty() {
        bail!("nothing to evaluate");
    }
    let report = evaluate_ids(&preds, &ds.truth(), &ids, c)?;
    let names = ds.category_names();
    let text = report.render_text(&names);
    m.write(&a.out, text.as_bytes())?;
    if let Some(p) = &a.csv {
        m.write(p, report.render_csv(&names).as_bytes())?;
    }
    m.finish(manifest)?;
    print!("{text}");
    Ok(())
}

fn cmd_compare(a: &CompareArgs, manifest: &Path, strategy: Strategy) -> Result<()> {
    let mut m = Manifest::new("compare");
    let ds = load_points(&a.input, &mut m)?;
    let split = load_split(&a.split, &mut m)?;
    let tables = load_tables(&a.tables, &mut m)?;
    m.param("step", a.step);
    sppa_core::fusion::lattice_divisions(a.step).map_err(|e| usage(e.to_string()))?;
    let truth: HashMap<u64, usize> = ds.truth();
    let rows = pipeline::compare(
        [&tables[0], &tables[1], &tables[2]],
        &truth,
        &split.ids(Split::Validation),
        &split.ids(Split::Test),
        a.step,
        strategy,
    )?;
    let text = render_comparison(&rows);
    m.write(&a.out, text.as_bytes())?;
    if let Some(p) = &a.csv {
        m.write(p, render_comparison_csv(&rows).as_bytes())?;
    }
    m.finish(manifest)?;
    print!("{text}");
    Ok(())
}

fn cmd_heatmap(a: &HeatmapArgs, manifest: &Path) -> Result<()> {
    let mut m = Manifest::new("heatmap");
    let text = load_text(&a.raster, &mut m)?;
    let (raster, name) = raster_io::parse_raster(&text).with_context(|| format!("in {}", a.raster.display()))?;
    let mode = match a.mode {
        PgmDepth::Eight => "pgm8",
        PgmDepth::Sixteen => "pgm16",
    };
    m.param("mode", mode);
    let sidecar = a.sidecar.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    });
    m.write(&a.out, &raster_io::encode_pgm(&raster, a.mode))?;
    m.write(&sidecar, raster_io::render_sidecar(&raster, &name, a.mode).as_bytes())?;
    m.finish(manifest)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
