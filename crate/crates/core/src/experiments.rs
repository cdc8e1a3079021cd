//! Evaluation protocols: chained error, parameter sweeps, transfer matrices.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{build_dataset, Dataset, DatasetSpec, EvalSample, CHAIN_LENGTHS};
use crate::error::{Error, Result};
use crate::imaging::{Raster, TransformSpec};
use crate::network::PlanarNetwork;
use crate::training::{mean_abs_error, train, TrainConfig, TrainReport};

pub mod repro;

/// Mean test error at chain lengths 1, 2 and 5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainedErrors {
    pub e1: f64,
    pub e2: f64,
    pub e5: f64,
}

impl ChainedErrors {
    pub fn at(&self, chain: usize) -> Option<f64> {
        match chain {
            1 => Some(self.e1),
            2 => Some(self.e2),
            5 => Some(self.e5),
            _ => None,
        }
    }
}

/// Mean over samples of `|N^j(I_0) − I_j|`.
pub fn evaluate_chain_length(net: &PlanarNetwork, samples: &[EvalSample], chain: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no evaluation samples"));
    }
    let errors = samples
        .par_iter()
        .map(|s| {
            let target = s.target(chain).ok_or_else(|| {
                Error::invalid(format!("evaluation sample has no {chain}X target"))
            })?;
            let pred = net.forward_chain(&s.input, chain)?;
            mean_abs_error(&pred, target)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

pub fn evaluate_chained(net: &PlanarNetwork, samples: &[EvalSample]) -> Result<ChainedErrors> {
    let [e1, e2, e5] = CHAIN_LENGTHS.map(|j| evaluate_chain_length(net, samples, j));
    Ok(ChainedErrors {
        e1: e1?,
        e2: e2?,
        e5: e5?,
    })
}

/// Total incoming weights, biases excluded.
pub fn connection_count(net: &PlanarNetwork) -> usize {
    net.connection_count()
}

/// One complete train-and-evaluate job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: DatasetSpec,
    pub training: TrainConfig,
    #[serde(default = "default_init_low")]
    pub init_low: f64,
    #[serde(default = "default_init_high")]
    pub init_high: f64,
}

fn default_init_low() -> f64 {
    -1.0
}

fn default_init_high() -> f64 {
    1.0
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            training: TrainConfig::default(),
            init_low: default_init_low(),
            init_high: default_init_high(),
        }
    }
}

impl RunSpec {
    /// Default hyperparameters on `transform`, with one seed for data and weights.
    pub fn with_transform(transform: TransformSpec, seed: u64) -> Self {
        let mut spec = Self::default();
        spec.dataset.transform = transform;
        spec.set_seed(seed);
        spec
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.training.seed = seed;
    }

    pub fn init_network(&self) -> Result<PlanarNetwork> {
        let topology = self.dataset.topology.build()?;
        PlanarNetwork::init(topology, self.init_low, self.init_high, self.training.seed)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub network: PlanarNetwork,
    pub report: TrainReport,
}

impl RunOutcome {
    pub fn errors(&self) -> Option<ChainedErrors> {
        self.report.final_errors
    }
}

/// Trains a fresh network on a prepared dataset.
pub fn run_on(spec: &RunSpec, dataset: &Dataset) -> Result<RunOutcome> {
    let mut network = spec.init_network()?;
    let report = train(&mut network, &dataset.train, &dataset.test, &spec.training)?;
    Ok(RunOutcome { network, report })
}

pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    let dataset = build_dataset(&spec.dataset)?;
    run_on(spec, &dataset)
}

/// Runs `f` on a pool of `jobs` workers (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    BatchSize,
    LearningRate,
    RotationDegrees,
    NeighborhoodRadius,
    TranslationVector,
    ScaleFactor,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::BatchSize,
        SweepAxis::LearningRate,
        SweepAxis::RotationDegrees,
        SweepAxis::NeighborhoodRadius,
        SweepAxis::TranslationVector,
        SweepAxis::ScaleFactor,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::BatchSize => "batch_size",
            SweepAxis::LearningRate => "learning_rate",
            SweepAxis::RotationDegrees => "rotation_degrees",
            SweepAxis::NeighborhoodRadius => "neighborhood_radius",
            SweepAxis::TranslationVector => "translation_vector",
            SweepAxis::ScaleFactor => "scale_factor",
        }
    }

    fn changes_dataset(&self) -> bool {
        !matches!(
            self,
            SweepAxis::BatchSize | SweepAxis::LearningRate | SweepAxis::NeighborhoodRadius
        )
    }

    /// `base` with this axis set to `value`.
    pub fn apply(&self, base: &RunSpec, value: SweepValue) -> Result<RunSpec> {
        let mut spec = base.clone();
        let bad = |what: &str| {
            Error::config(
                self.name(),
                format!("expected {what}, got {value}"),
            )
        };
        match (self, value) {
            (SweepAxis::BatchSize, SweepValue::Scalar(v)) => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(bad("a positive integer"));
                }
                spec.training.batch_size = v as usize;
            }
            (SweepAxis::LearningRate, SweepValue::Scalar(v)) => spec.training.learning_rate = v,
            (SweepAxis::RotationDegrees, SweepValue::Scalar(v)) => {
                spec.dataset.transform = TransformSpec::rotate(v)
            }
            (SweepAxis::NeighborhoodRadius, SweepValue::Scalar(v)) => {
                spec.dataset.topology = spec.dataset.topology.with_radius(v)
            }
            (SweepAxis::TranslationVector, SweepValue::Pair(dx, dy)) => {
                spec.dataset.transform = TransformSpec::translate(dx, dy)
            }
            (SweepAxis::ScaleFactor, SweepValue::Scalar(v)) => {
                spec.dataset.transform = TransformSpec::scale(v).map_err(|_| bad("a positive factor"))?
            }
            (SweepAxis::TranslationVector, _) => return Err(bad("a pair dx,dy")),
            _ => return Err(bad("a single number")),
        }
        Ok(spec)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "sweep.axis",
                    format!(
                        "unknown axis `{s}`; expected one of {}",
                        SweepAxis::ALL.map(|a| a.name()).join(", ")
                    ),
                )
            })
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A sweep coordinate: one number, or a vector for translations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Scalar(f64),
    Pair(f64, f64),
}

impl FromStr for SweepValue {
    type Err = Error;

    /// `"0.01"` or `"0.5,0.5"`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config("sweep.values", format!("`{s}` is not a number")))
        };
        match s.split_once(',') {
            Some((a, b)) => Ok(SweepValue::Pair(parse(a)?, parse(b)?)),
            None => Ok(SweepValue::Scalar(parse(s)?)),
        }
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Scalar(v) => write!(f, "{v}"),
            SweepValue::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: SweepValue,
    pub errors: ChainedErrors,
    pub final_train_error: f64,
    pub report: TrainReport,
}

/// One train/eval per value; everything else (seeds included) is held fixed.
/// Cells run in parallel and are returned in input order.
pub fn sweep(base: &RunSpec, axis: SweepAxis, values: &[SweepValue]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("sweep.values", "no values given"));
    }
    let specs = values
        .iter()
        .map(|&v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let shared = if axis.changes_dataset() {
        None
    } else {
        Some(build_dataset(&base.dataset)?)
    };
    specs
        .par_iter()
        .zip(values)
        .map(|(spec, &value)| {
            let outcome = match &shared {
                Some(d) => run_on(spec, d)?,
                None => run(spec)?,
            };
            let errors = outcome
                .errors()
                .ok_or_else(|| Error::Data("sweep datasets need chained test targets".into()))?;
            Ok(SweepRow {
                value,
                errors,
                final_train_error: outcome.report.final_train_error(),
                report: outcome.report,
            })
        })
        .collect()
}

/// `value,e1,e2,e5,final_train_error,seed`
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], axis: SweepAxis, seed: u64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Data(format!("writing sweep: {e}"));
    w.write_record([axis.name(), "e1", "e2", "e5", "final_train_error", "seed"])
        .map_err(err)?;
    for row in rows {
        w.write_record([
            row.value.to_string(),
            row.errors.e1.to_string(),
            row.errors.e2.to_string(),
            row.errors.e5.to_string(),
            row.final_train_error.to_string(),
            seed.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing sweep: {e}")))
}

/// Errors of networks trained on each row dataset, evaluated on each
/// column dataset's test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<ChainedErrors>>,
    pub final_train_errors: Vec<f64>,
    pub seed: u64,
}

impl TransferMatrix {
    pub fn cell(&self, train: usize, eval: usize) -> ChainedErrors {
        self.cells[train][eval]
    }

    /// Mean 1X error of a trained row over all evaluation columns.
    pub fn row_mean(&self, train: usize) -> f64 {
        let row = &self.cells[train];
        row.iter().map(|c| c.e1).sum::<f64>() / row.len() as f64
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `train_dataset,eval_dataset,e1,e2,e5,final_train_error,seed`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Data(format!("writing transfer matrix: {e}"));
        w.write_record([
            "train_dataset",
            "eval_dataset",
            "e1",
            "e2",
            "e5",
            "final_train_error",
            "seed",
        ])
        .map_err(err)?;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                w.write_record([
                    self.labels[i].clone(),
                    self.labels[j].clone(),
                    cell.e1.to_string(),
                    cell.e2.to_string(),
                    cell.e5.to_string(),
                    self.final_train_errors[i].to_string(),
                    self.seed.to_string(),
                ])
                .map_err(err)?;
            }
        }
        w.flush()
            .map_err(|e| Error::Data(format!("writing transfer matrix: {e}")))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Trains one network per dataset and evaluates it on every dataset.
/// The network seed is `config.seed` for every row.
pub fn transfer_matrix(datasets: &[(String, DatasetSpec)], config: &TrainConfig) -> Result<TransferMatrix> {
    if datasets.len() < 2 {
        return Err(Error::invalid("a transfer matrix needs at least two datasets"));
    }
    let first = &datasets[0].1;
    for (label, spec) in &datasets[1..] {
        if spec.topology != first.topology {
            return Err(Error::invalid(format!(
                "dataset `{label}` uses a different topology"
            )));
        }
        if !spec.transform.same_variant(&first.transform) {
            return Err(Error::invalid(format!(
                "dataset `{label}` uses a different transformation"
            )));
        }
    }
    let built = datasets
        .par_iter()
        .map(|(_, spec)| build_dataset(spec))
        .collect::<Result<Vec<_>>>()?;
    let rows = built
        .par_iter()
        .zip(datasets)
        .map(|(data, (_, spec))| {
            let run = RunSpec {
                dataset: spec.clone(),
                training: *config,
                ..RunSpec::default()
            };
            let outcome = run_on(&run, data)?;
            let cells = built
                .iter()
                .map(|other| evaluate_chained(&outcome.network, &other.test))
                .collect::<Result<Vec<_>>>()?;
            Ok((cells, outcome.report.final_train_error()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (cells, final_train_errors) = rows.into_iter().unzip();
    Ok(TransferMatrix {
        labels: datasets.iter().map(|(l, _)| l.clone()).collect(),
        cells,
        final_train_errors,
        seed: config.seed,
    })
}

/// Median of a non-empty list.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean output intensity of `net` over the test inputs.
pub fn mean_output(net: &PlanarNetwork, samples: &[EvalSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no evaluation samples"));
    }
    let mut total = 0.0;
    for s in samples {
        let out = net.forward(&s.input)?;
        total += out.values().iter().sum::<f64>() / out.values().len() as f64;
    }
    Ok(total / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::SourceKind;
    use crate::geometry::Topology;

    fn tiny(transform: TransformSpec) -> DatasetSpec {
        DatasetSpec {
            transform,
            train_count: 20,
            test_count: 6,
            seed: 3,
            ..DatasetSpec::default()
        }
    }

    fn shift_up() -> PlanarNetwork {
        let mut net = PlanarNetwork::zeros(Topology::cartesian(16, 16, 2.0).unwrap());
        for j in 0..256 - 16 {
            net.set_edge(j + 16, j, 1.0).unwrap();
        }
        net
    }

    #[test]
    fn identity_on_identity_data_is_exact() {
        let data = build_dataset(&tiny(TransformSpec::rotate(0.0))).unwrap();
        let net = PlanarNetwork::identity(Topology::cartesian(16, 16, 2.0).unwrap());
        let e = evaluate_chained(&net, &data.test).unwrap();
        assert_eq!((e.e1, e.e2, e.e5), (0.0, 0.0, 0.0));
        assert!(evaluate_chained(&net, &[]).is_err());
    }

    #[test]
    fn exact_shift_errors_grow_with_chain_length() {
        let data = build_dataset(&tiny(TransformSpec::translate(0.0, 1.0))).unwrap();
        let e = evaluate_chained(&shift_up(), &data.test).unwrap();
        assert!(e.e1 <= e.e2 && e.e2 <= e.e5, "{e:?}");
        assert!(e.e5 > e.e1);
        // only the bottom band is wrong at 1X
        for s in &data.test {
            let pred = shift_up().forward(&s.input).unwrap();
            let t = s.target(1).unwrap().values();
            for j in 16..14 * 16 {
                assert!((pred.values()[j] - t[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn evaluation_ignores_sample_order() {
        let data = build_dataset(&tiny(TransformSpec::rotate(10.0))).unwrap();
        let net = PlanarNetwork::init(Topology::cartesian(16, 16, 2.0).unwrap(), -1.0, 1.0, 1).unwrap();
        let a = evaluate_chained(&net, &data.test).unwrap();
        let mut reversed = data.test.clone();
        reversed.reverse();
        let b = evaluate_chained(&net, &reversed).unwrap();
        assert!((a.e1 - b.e1).abs() < 1e-12 && (a.e5 - b.e5).abs() < 1e-12);
    }

    #[test]
    fn connection_counts() {
        let net = PlanarNetwork::zeros(Topology::cartesian(16, 16, 2.0).unwrap());
        assert_eq!(connection_count(&net), 2116);
        let net = PlanarNetwork::zeros(Topology::cartesian(16, 16, 1.0).unwrap());
        assert_eq!(connection_count(&net), 256);
    }

    #[test]
    fn axis_parsing_and_application() {
        assert_eq!("batch_size".parse::<SweepAxis>().unwrap(), SweepAxis::BatchSize);
        assert!("momentum".parse::<SweepAxis>().is_err());
        assert_eq!("0.5,0.5".parse::<SweepValue>().unwrap(), SweepValue::Pair(0.5, 0.5));
        let base = RunSpec::default();
        let s = SweepAxis::NeighborhoodRadius
            .apply(&base, SweepValue::Scalar(3.0))
            .unwrap();
        assert_eq!(s.dataset.topology.build().unwrap().edge_count() > 2116, true);
        assert!(SweepAxis::BatchSize.apply(&base, SweepValue::Scalar(2.5)).is_err());
        assert!(SweepAxis::TranslationVector
            .apply(&base, SweepValue::Scalar(1.0))
            .is_err());
    }

    #[test]
    fn transfer_matrix_checks_inputs_and_matches_diagonal() {
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 5,
            ..TrainConfig::default()
        };
        let a = tiny(TransformSpec::rotate(10.0));
        let b = DatasetSpec {
            source: SourceKind::RandomDot,
            ..a.clone()
        };
        let m = transfer_matrix(&[("noise".into(), a.clone()), ("dot".into(), b)], &cfg).unwrap();
        assert_eq!(m.cells.len(), 2);
        let standalone = run(&RunSpec {
            dataset: a.clone(),
            training: cfg,
            ..RunSpec::default()
        })
        .unwrap();
        assert_eq!(m.cell(0, 0), standalone.errors().unwrap());

        let polar = DatasetSpec {
            topology: crate::geometry::TopologySpec::default_polar(),
            ..a.clone()
        };
        assert!(transfer_matrix(&[("a".into(), a.clone()), ("p".into(), polar)], &cfg).is_err());
        assert!(transfer_matrix(&[("a".into(), a)], &cfg).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
