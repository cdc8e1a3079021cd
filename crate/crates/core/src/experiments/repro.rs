//! Fixed experiment protocols, each summarised as a median over seeds.

use std::f64::consts::SQRT_2;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_dataset, median, mean_output, run, run_on, sweep, transfer_matrix, ChainedErrors,
    RunSpec, SweepAxis, SweepRow, SweepValue, TransferMatrix,
};
use crate::datagen::{DatasetSpec, SourceKind};
use crate::error::{Error, Result};
use crate::geometry::{cartesian_neighborhood, GridPosition, TopologySpec};
use crate::imaging::TransformSpec;

pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const BATCH_SIZES: [usize; 4] = [10, 25, 50, 100];
pub const LEARNING_RATES: [f64; 5] = [0.001, 0.005, 0.01, 0.02, 0.04];
pub const ROTATION_DEGREES: [f64; 4] = [5.0, 10.0, 15.0, 20.0];
/// Batch index at which the intermediate test error is read.
pub const CHECKPOINT_BATCH: usize = 200;

/// Display label and exact radius. Each radius sits just above a lattice
/// distance, so `1.41` means `√2` and so on.
pub fn radii() -> [(&'static str, f64); 6] {
    [
        ("1", 1.0),
        ("1.41", SQRT_2),
        ("2", 2.0),
        ("2.24", 5f64.sqrt()),
        ("2.83", 8f64.sqrt()),
        ("3", 3.0),
    ]
}

/// Named reproduction targets accepted by [`by_name`].
pub const NAMES: [&str; 9] = [
    "table1",
    "table2",
    "radius3",
    "learning_rate",
    "rotation_degrees",
    "translation",
    "fig3",
    "fig8",
    "noise",
];

/// A small string table that serialises to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Data(format!("writing table: {e}"));
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing table: {e}")))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_else(|| "N/A".into())
}

/// Component-wise median.
pub fn median_errors(errors: &[ChainedErrors]) -> ChainedErrors {
    let pick = |f: fn(&ChainedErrors) -> f64| median(&errors.iter().map(f).collect::<Vec<_>>());
    ChainedErrors {
        e1: pick(|e| e.e1),
        e2: pick(|e| e.e2),
        e5: pick(|e| e.e5),
    }
}

/// Runs the same sweep once per seed. Result is indexed `[value][seed]`.
pub fn seeded_sweep(
    base: &RunSpec,
    axis: SweepAxis,
    values: &[SweepValue],
    seeds: &[u64],
) -> Result<Vec<Vec<SweepRow>>> {
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds"));
    }
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let mut spec = base.clone();
            spec.set_seed(seed);
            sweep(&spec, axis, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..values.len())
        .map(|v| per_seed.iter().map(|rows| rows[v].clone()).collect())
        .collect())
}

/// Errors of independent runs of `base`, one per seed.
pub fn seeded_runs(base: &RunSpec, seeds: &[u64]) -> Result<Vec<super::RunOutcome>> {
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds"));
    }
    seeds
        .par_iter()
        .map(|&seed| {
            let mut spec = base.clone();
            spec.set_seed(seed);
            run(&spec)
        })
        .collect()
}

fn rotation_base() -> RunSpec {
    RunSpec::with_transform(TransformSpec::rotate(10.0), 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSizeRow {
    pub batch_size: usize,
    /// Median 1X test error after the last epoch.
    pub final_error: f64,
    /// Median 1X test error after [`CHECKPOINT_BATCH`] updates; `None`
    /// when fewer updates ran.
    pub checkpoint_error: Option<f64>,
    pub per_seed_final: Vec<f64>,
}

/// Rotation by 10° at each batch size.
pub fn batch_sizes(seeds: &[u64]) -> Result<Vec<BatchSizeRow>> {
    let values: Vec<_> = BATCH_SIZES.iter().map(|&b| SweepValue::Scalar(b as f64)).collect();
    let cells = seeded_sweep(&rotation_base(), SweepAxis::BatchSize, &values, seeds)?;
    Ok(BATCH_SIZES
        .iter()
        .zip(cells)
        .map(|(&batch_size, rows)| {
            let per_seed_final: Vec<f64> = rows.iter().map(|r| r.errors.e1).collect();
            let at: Option<Vec<f64>> = rows
                .iter()
                .map(|r| r.report.test_error_after_batch(CHECKPOINT_BATCH))
                .collect();
            BatchSizeRow {
                batch_size,
                final_error: median(&per_seed_final),
                checkpoint_error: at.map(|v| median(&v)),
                per_seed_final,
            }
        })
        .collect())
}

pub fn batch_size_table(rows: &[BatchSizeRow]) -> Table {
    let mut t = Table::new(&["batch_size", "batch_200_error", "final_epoch_error"]);
    for r in rows {
        t.push(vec![
            r.batch_size.to_string(),
            fmt_opt(r.checkpoint_error),
            fmt(r.final_error),
        ]);
    }
    t
}

/// Neighbourhood size of a node far from the border.
pub fn interior_size(radius: f64) -> usize {
    cartesian_neighborhood(GridPosition { row: 8, col: 8 }, radius, 17, 17)
        .map(|n| n.len())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub label: String,
    pub radius: f64,
    /// Interior neighbourhood size.
    pub neighborhood: usize,
    pub error: f64,
    pub per_seed: Vec<f64>,
}

/// Rotation by 10° at each neighbourhood radius.
pub fn radius_sweep(seeds: &[u64]) -> Result<Vec<RadiusRow>> {
    let radii = radii();
    let values: Vec<_> = radii.iter().map(|&(_, r)| SweepValue::Scalar(r)).collect();
    let cells = seeded_sweep(&rotation_base(), SweepAxis::NeighborhoodRadius, &values, seeds)?;
    Ok(radii
        .iter()
        .zip(cells)
        .map(|(&(label, radius), rows)| {
            let per_seed: Vec<f64> = rows.iter().map(|r| r.errors.e1).collect();
            RadiusRow {
                label: label.to_string(),
                radius,
                neighborhood: interior_size(radius),
                error: median(&per_seed),
                per_seed,
            }
        })
        .collect())
}

pub fn radius_table(rows: &[RadiusRow]) -> Table {
    let mut t = Table::new(&["radius", "exact_radius", "neighborhood", "error"]);
    for r in rows {
        t.push(vec![
            r.label.clone(),
            format!("{:.6}", r.radius),
            r.neighborhood.to_string(),
            fmt(r.error),
        ]);
    }
    t
}

/// Radius-3 rotation network at learning rate 0.005: median 1X test error
/// after [`CHECKPOINT_BATCH`] updates and per-seed values.
pub fn radius3_slow(seeds: &[u64]) -> Result<(f64, Vec<f64>)> {
    let mut base = rotation_base();
    base.dataset.topology = base.dataset.topology.with_radius(3.0);
    base.training.learning_rate = 0.005;
    let outcomes = seeded_runs(&base, seeds)?;
    let per_seed = outcomes
        .iter()
        .map(|o| {
            o.report
                .test_error_after_batch(CHECKPOINT_BATCH)
                .ok_or_else(|| Error::invalid("run shorter than the checkpoint batch"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((median(&per_seed), per_seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRow {
    pub value: String,
    pub errors: ChainedErrors,
    pub per_seed: Vec<ChainedErrors>,
}

fn value_rows(
    base: &RunSpec,
    axis: SweepAxis,
    values: &[SweepValue],
    seeds: &[u64],
) -> Result<Vec<ValueRow>> {
    let cells = seeded_sweep(base, axis, values, seeds)?;
    Ok(values
        .iter()
        .zip(cells)
        .map(|(v, rows)| {
            let per_seed: Vec<_> = rows.iter().map(|r| r.errors).collect();
            ValueRow {
                value: v.to_string(),
                errors: median_errors(&per_seed),
                per_seed,
            }
        })
        .collect())
}

pub fn value_table(name: &str, rows: &[ValueRow]) -> Table {
    let mut t = Table::new(&[name, "e1", "e2", "e5"]);
    for r in rows {
        t.push(vec![
            r.value.clone(),
            fmt(r.errors.e1),
            fmt(r.errors.e2),
            fmt(r.errors.e5),
        ]);
    }
    t
}

pub fn learning_rates(seeds: &[u64]) -> Result<Vec<ValueRow>> {
    let values: Vec<_> = LEARNING_RATES.iter().map(|&v| SweepValue::Scalar(v)).collect();
    value_rows(&rotation_base(), SweepAxis::LearningRate, &values, seeds)
}

pub fn rotation_degrees(seeds: &[u64]) -> Result<Vec<ValueRow>> {
    let values: Vec<_> = ROTATION_DEGREES.iter().map(|&v| SweepValue::Scalar(v)).collect();
    value_rows(&rotation_base(), SweepAxis::RotationDegrees, &values, seeds)
}

/// Whole-pixel `(1,1)` against half-pixel `(0.5,0.5)` translation.
pub fn translation_study(seeds: &[u64]) -> Result<Vec<ValueRow>> {
    let values = [SweepValue::Pair(1.0, 1.0), SweepValue::Pair(0.5, 0.5)];
    let base = RunSpec::with_transform(TransformSpec::translate(1.0, 1.0), 0);
    value_rows(&base, SweepAxis::TranslationVector, &values, seeds)
}

fn named_runs(named: &[(String, RunSpec)], seeds: &[u64]) -> Result<Vec<ValueRow>> {
    named
        .iter()
        .map(|(name, spec)| {
            let per_seed = seeded_runs(spec, seeds)?
                .iter()
                .map(|o| {
                    o.errors()
                        .ok_or_else(|| Error::Data("missing chained targets".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ValueRow {
                value: name.clone(),
                errors: median_errors(&per_seed),
                per_seed,
            })
        })
        .collect()
}

/// The three base transformations on a 16×16 Cartesian network.
pub fn baselines(seeds: &[u64]) -> Result<Vec<ValueRow>> {
    let named = [
        ("translate", TransformSpec::translate(0.0, 1.0)),
        ("rotate", TransformSpec::rotate(10.0)),
        ("scale", TransformSpec::scale(0.9)?),
    ]
    .map(|(n, t)| (n.to_string(), RunSpec::with_transform(t, 0)));
    named_runs(&named, seeds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyComparison {
    pub transform: String,
    pub cartesian: ValueRow,
    pub polar: ValueRow,
    pub cartesian_connections: usize,
    pub polar_connections: usize,
}

/// Translation `(0,1)`, rotation by 10° and scaling by the polar ring
/// ratio, each on the default Cartesian and polar networks.
pub fn polar_vs_cartesian(seeds: &[u64]) -> Result<Vec<TopologyComparison>> {
    let polar = TopologySpec::default_polar();
    let cartesian = TopologySpec::default();
    let ratio = match polar.build()?.polar_geometry {
        Some(g) => g.ratio,
        None => unreachable!("polar topology without geometry"),
    };
    let polar_connections = polar.build()?.edge_count();
    let cartesian_connections = cartesian.build()?.edge_count();
    let transforms = [
        ("translate", TransformSpec::translate(0.0, 1.0)),
        ("rotate", TransformSpec::rotate(10.0)),
        ("scale", TransformSpec::scale(ratio)?),
    ];
    transforms
        .into_iter()
        .map(|(name, t)| {
            let mut specs = Vec::new();
            for (label, topo) in [("cartesian", &cartesian), ("polar", &polar)] {
                let mut spec = RunSpec::with_transform(t, 0);
                spec.dataset.topology = topo.clone();
                specs.push((label.to_string(), spec));
            }
            let mut rows = named_runs(&specs, seeds)?.into_iter();
            Ok(TopologyComparison {
                transform: name.to_string(),
                cartesian: rows.next().expect("two rows"),
                polar: rows.next().expect("two rows"),
                cartesian_connections,
                polar_connections,
            })
        })
        .collect()
}

pub fn topology_table(rows: &[TopologyComparison]) -> Table {
    let mut t = Table::new(&["transform", "topology", "connections", "e1", "e2", "e5"]);
    for r in rows {
        for (name, row, n) in [
            ("cartesian", &r.cartesian, r.cartesian_connections),
            ("polar", &r.polar, r.polar_connections),
        ] {
            t.push(vec![
                r.transform.clone(),
                name.to_string(),
                n.to_string(),
                fmt(row.errors.e1),
                fmt(row.errors.e2),
                fmt(row.errors.e5),
            ]);
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub source: String,
    pub errors: ChainedErrors,
    /// Median 1X test error after ten updates.
    pub error_after_10: f64,
    /// Median mean output intensity on the test inputs.
    pub mean_output: f64,
}

/// Rotation trained on upscaled and full-resolution noise and dots.
pub fn noise_sources(seeds: &[u64]) -> Result<Vec<NoiseRow>> {
    let kinds = [
        SourceKind::RandomNoise,
        SourceKind::HighResNoise,
        SourceKind::RandomDot,
        SourceKind::HighResDot,
    ];
    kinds
        .into_iter()
        .map(|kind| {
            let mut base = rotation_base();
            base.dataset.source = kind.clone();
            let results = seeds
                .par_iter()
                .map(|&seed| {
                    let mut spec = base.clone();
                    spec.set_seed(seed);
                    let data = build_dataset(&spec.dataset)?;
                    let outcome = run_on(&spec, &data)?;
                    let errors = outcome
                        .errors()
                        .ok_or_else(|| Error::Data("missing chained targets".into()))?;
                    let after_10 = outcome
                        .report
                        .test_error_after_batch(10)
                        .ok_or_else(|| Error::invalid("fewer than ten updates"))?;
                    Ok((errors, after_10, mean_output(&outcome.network, &data.test)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let errors: Vec<_> = results.iter().map(|r| r.0).collect();
            Ok(NoiseRow {
                source: kind.name().to_string(),
                errors: median_errors(&errors),
                error_after_10: median(&results.iter().map(|r| r.1).collect::<Vec<_>>()),
                mean_output: median(&results.iter().map(|r| r.2).collect::<Vec<_>>()),
            })
        })
        .collect()
}

pub fn noise_table(rows: &[NoiseRow]) -> Table {
    let mut t = Table::new(&[
        "source",
        "error_after_10",
        "mean_output",
        "e1",
        "e2",
        "e5",
    ]);
    for r in rows {
        t.push(vec![
            r.source.clone(),
            fmt(r.error_after_10),
            fmt(r.mean_output),
            fmt(r.errors.e1),
            fmt(r.errors.e2),
            fmt(r.errors.e5),
        ]);
    }
    t
}

/// Image directories standing in for the drawing and photograph corpora.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpora {
    pub drawings: PathBuf,
    pub photos: PathBuf,
}

/// Which set of datasets a transfer matrix spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferFamily {
    /// Noise, dots, drawings, photos; grayscale.
    Grayscale,
    /// The same four sources thresholded to black and white.
    BlackWhite,
    /// Noise and dots, each in grayscale and black and white.
    Mixed,
}

impl TransferFamily {
    pub fn datasets(&self, corpora: Option<&Corpora>, seed: u64) -> Result<Vec<(String, DatasetSpec)>> {
        let base = DatasetSpec {
            seed,
            ..DatasetSpec::default()
        };
        let with = |source: SourceKind, bw: bool| DatasetSpec {
            source,
            bw,
            ..base.clone()
        };
        let corpora = || {
            corpora.ok_or_else(|| {
                Error::config("transfer.corpora", "this family needs drawing and photo directories")
            })
        };
        Ok(match self {
            TransferFamily::Grayscale | TransferFamily::BlackWhite => {
                let bw = *self == TransferFamily::BlackWhite;
                let c = corpora()?;
                vec![
                    ("random_noise".into(), with(SourceKind::RandomNoise, bw)),
                    ("random_dot".into(), with(SourceKind::RandomDot, bw)),
                    (
                        "drawings".into(),
                        with(SourceKind::ImageDir { path: c.drawings.clone() }, bw),
                    ),
                    (
                        "photos".into(),
                        with(SourceKind::ImageDir { path: c.photos.clone() }, bw),
                    ),
                ]
            }
            TransferFamily::Mixed => vec![
                ("random_noise".into(), with(SourceKind::RandomNoise, false)),
                ("random_noise_bw".into(), with(SourceKind::RandomNoise, true)),
                ("random_dot".into(), with(SourceKind::RandomDot, false)),
                ("random_dot_bw".into(), with(SourceKind::RandomDot, true)),
            ],
        })
    }
}

/// One transfer matrix per seed plus their cell-wise median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferStudy {
    pub median: TransferMatrix,
    pub per_seed: Vec<TransferMatrix>,
}

pub fn transfer_study(
    family: TransferFamily,
    corpora: Option<&Corpora>,
    seeds: &[u64],
) -> Result<TransferStudy> {
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds"));
    }
    let per_seed = seeds
        .iter()
        .map(|&seed| {
            let datasets = family.datasets(corpora, seed)?;
            let config = crate::training::TrainConfig {
                seed,
                ..Default::default()
            };
            transfer_matrix(&datasets, &config)
        })
        .collect::<Result<Vec<_>>>()?;
    let first = &per_seed[0];
    let n = first.labels.len();
    let cells = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    median_errors(&per_seed.iter().map(|m| m.cell(i, j)).collect::<Vec<_>>())
                })
                .collect()
        })
        .collect();
    let final_train_errors = (0..n)
        .map(|i| median(&per_seed.iter().map(|m| m.final_train_errors[i]).collect::<Vec<_>>()))
        .collect();
    Ok(TransferStudy {
        median: TransferMatrix {
            labels: first.labels.clone(),
            cells,
            final_train_errors,
            seed: first.seed,
        },
        per_seed,
    })
}

/// Runs a named reproduction and returns its summary table.
pub fn by_name(name: &str, seeds: &[u64]) -> Result<Table> {
    Ok(match name {
        "table1" => batch_size_table(&batch_sizes(seeds)?),
        "table2" => radius_table(&radius_sweep(seeds)?),
        "radius3" => {
            let (m, per_seed) = radius3_slow(seeds)?;
            let mut t = Table::new(&["seed", "batch_200_error"]);
            for (s, v) in seeds.iter().zip(per_seed) {
                t.push(vec![s.to_string(), fmt(v)]);
            }
            t.push(vec!["median".into(), fmt(m)]);
            t
        }
        "learning_rate" => value_table("learning_rate", &learning_rates(seeds)?),
        "rotation_degrees" => value_table("rotation_degrees", &rotation_degrees(seeds)?),
        "translation" => value_table("translation", &translation_study(seeds)?),
        "fig3" => value_table("transform", &baselines(seeds)?),
        "fig8" => topology_table(&polar_vs_cartesian(seeds)?),
        "noise" => noise_table(&noise_sources(seeds)?),
        other => {
            return Err(Error::config(
                "repro",
                format!("unknown target `{other}`; expected one of {}", NAMES.join(", ")),
            ))
        }
    })
}
