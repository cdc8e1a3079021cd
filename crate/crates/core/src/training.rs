//! Batched perceptron-rule training.
//!
//! For a pair (X, T) with prediction P = N(X), each weight receives
//! `δ (T_j − P_j) X_i` and each bias `δ (T_j − P_j)`. All predictions in a
//! batch use the weights from the start of the batch; the summed deltas are
//! applied once the batch is done.
//!
//! By default only the weights are updated and a trailing batch smaller than
//! `batch_size` is skipped; [`TrainConfig`] can switch on bias updates and
//! partial batches.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{EvalSample, SamplePair};
use crate::error::{Error, Result};
use crate::experiments::{evaluate_chain_length, evaluate_chained, ChainedErrors};
use crate::imaging::Raster;
use crate::network::PlanarNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Apply the bias deltas as well as the weight deltas.
    pub train_biases: bool,
    /// Also apply the short batch left over at the end of each epoch.
    pub partial_batches: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 50,
            epochs: 40,
            seed: 0,
            train_biases: false,
            partial_batches: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "training.learning_rate",
                format!("must be positive, got {}", self.learning_rate),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::config("training.batch_size", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("training.epochs", "must be at least 1"));
        }
        Ok(())
    }

    pub fn batches_per_epoch(&self, pairs: usize) -> usize {
        if self.partial_batches {
            pairs.div_ceil(self.batch_size)
        } else {
            pairs / self.batch_size
        }
    }
}

/// Mean absolute difference over raw values.
pub fn mean_abs_error_values(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::invalid(format!(
            "error between {} and {} values",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Mean over pixels of `|pred − target|`.
pub fn mean_abs_error<R: Raster>(pred: &R, target: &R) -> Result<f64> {
    if pred.grid_dims() != target.grid_dims() {
        return Err(Error::invalid(format!(
            "prediction is {:?}, target is {:?}",
            pred.grid_dims(),
            target.grid_dims()
        )));
    }
    mean_abs_error_values(pred.values(), target.values())
}

/// Summed, unapplied updates for one batch, aligned with the network's
/// flat weight and bias arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Deltas {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    /// Mean absolute error of the batch predictions, before the update.
    pub batch_error: f64,
}

impl Deltas {
    fn zeros(net: &PlanarNetwork) -> Self {
        Self {
            weights: vec![0.0; net.connection_count()],
            biases: vec![0.0; net.node_count()],
            batch_error: 0.0,
        }
    }
}

/// Perceptron-rule deltas summed over `batch`, all evaluated at the current
/// weights. Accumulation runs pair by pair in batch order.
pub fn batch_delta(net: &PlanarNetwork, batch: &[SamplePair], learning_rate: f64) -> Result<Deltas> {
    if batch.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    let n = net.node_count();
    for pair in batch {
        if pair.input.values().len() != n || pair.target.values().len() != n {
            return Err(Error::invalid(format!(
                "sample pair does not match a {n}-node network"
            )));
        }
    }
    let predictions: Vec<Vec<f64>> = batch
        .par_iter()
        .map(|pair| net.forward_values(pair.input.values()))
        .collect();

    let topo = net.topology();
    let offsets = net.offsets();
    let mut deltas = Deltas::zeros(net);
    let mut error = 0.0;
    for (pair, pred) in batch.iter().zip(&predictions) {
        let x = pair.input.values();
        let t = pair.target.values();
        error += mean_abs_error_values(pred, t)?;
        for j in 0..n {
            let step = learning_rate * (t[j] - pred[j]);
            let slots = &mut deltas.weights[offsets[j]..offsets[j + 1]];
            for (d, &i) in slots.iter_mut().zip(topo.neighbors(j)) {
                *d += step * x[i];
            }
            deltas.biases[j] += step;
        }
    }
    deltas.batch_error = error / batch.len() as f64;
    Ok(deltas)
}

/// Learning curves and final chained errors of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean absolute error of each batch's predictions before its update.
    pub batch_train_error: Vec<f64>,
    /// 1X test error after each batch update.
    pub batch_test_error: Vec<f64>,
    /// 1X test error at the end of each epoch.
    pub epoch_test_error: Vec<f64>,
    /// 1X/2X/5X test errors of the final weights; absent when the test set
    /// lacks chained targets.
    pub final_errors: Option<ChainedErrors>,
    /// 1X test error of the final weights.
    pub final_1x: f64,
}

impl TrainReport {
    /// Test error after `batches` updates (1-based), if that many ran.
    pub fn test_error_after_batch(&self, batches: usize) -> Option<f64> {
        batches
            .checked_sub(1)
            .and_then(|i| self.batch_test_error.get(i).copied())
    }

    pub fn final_train_error(&self) -> f64 {
        self.batch_train_error.last().copied().unwrap_or(0.0)
    }

    /// Long-format CSV: `series,index,value`. Series are `train_error`
    /// (per batch), `batch_test_error_1x`, `test_error_1x` (per epoch) and
    /// the summary rows `final_1x`, `final_2x`, `final_5x`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Data(format!("writing report: {e}"));
        w.write_record(["series", "index", "value"]).map_err(err)?;
        let series: [(&str, &[f64]); 3] = [
            ("train_error", &self.batch_train_error),
            ("batch_test_error_1x", &self.batch_test_error),
            ("test_error_1x", &self.epoch_test_error),
        ];
        for (name, values) in series {
            for (i, v) in values.iter().enumerate() {
                w.write_record([name, &(i + 1).to_string(), &v.to_string()])
                    .map_err(err)?;
            }
        }
        let mut summary = vec![("final_1x", self.final_1x)];
        if let Some(e) = &self.final_errors {
            summary.push(("final_2x", e.e2));
            summary.push(("final_5x", e.e5));
        }
        for (name, v) in summary {
            w.write_record([name, "", &v.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing report: {e}")))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Runs `epochs × batches_per_epoch` batch updates over `train_pairs` in
/// their stored order. A trailing partial batch, when enabled, is applied
/// unscaled.
pub fn train(
    net: &mut PlanarNetwork,
    train_pairs: &[SamplePair],
    eval_samples: &[EvalSample],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train_pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    let per_epoch = config.batches_per_epoch(train_pairs.len());
    if per_epoch == 0 {
        return Err(Error::config(
            "training.batch_size",
            format!(
                "{} exceeds the {} training pairs and partial batches are off",
                config.batch_size,
                train_pairs.len()
            ),
        ));
    }
    let test_1x = |net: &PlanarNetwork| -> Result<f64> {
        if eval_samples.is_empty() {
            Ok(0.0)
        } else {
            evaluate_chain_length(net, eval_samples, 1)
        }
    };

    let total = config.epochs * per_epoch;
    let mut report = TrainReport {
        batch_train_error: Vec::with_capacity(total),
        batch_test_error: Vec::with_capacity(total),
        epoch_test_error: Vec::with_capacity(config.epochs),
        final_errors: None,
        final_1x: 0.0,
    };
    for _epoch in 0..config.epochs {
        for batch in train_pairs.chunks(config.batch_size).take(per_epoch) {
            let mut deltas = batch_delta(net, batch, config.learning_rate)?;
            if !config.train_biases {
                deltas.biases.fill(0.0);
            }
            net.apply_deltas(&deltas.weights, &deltas.biases);
            if !net.is_finite() {
                return Err(Error::Numeric(format!(
                    "weights diverged after batch {}",
                    report.batch_train_error.len() + 1
                )));
            }
            report.batch_train_error.push(deltas.batch_error);
            report.batch_test_error.push(test_1x(net)?);
        }
        report
            .epoch_test_error
            .push(*report.batch_test_error.last().expect("at least one batch"));
    }
    report.final_1x = test_1x(net)?;
    let chained = !eval_samples.is_empty()
        && eval_samples
            .iter()
            .all(|s| s.target(2).is_some() && s.target(5).is_some());
    if chained {
        report.final_errors = Some(evaluate_chained(net, eval_samples)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::Topology;
    use crate::imaging::{GrayImage, Picture};

    fn topo() -> Topology {
        Topology::cartesian(6, 6, 2.0).unwrap()
    }

    fn gray(w: usize, h: usize, v: Vec<f64>) -> Picture {
        Picture::Gray(GrayImage::new(w, h, v).unwrap())
    }

    fn random_pair(rng: &mut ChaCha8Rng, quantum: Option<f64>) -> SamplePair {
        let draw = |rng: &mut ChaCha8Rng| {
            let v: f64 = rng.gen();
            match quantum {
                Some(q) => (v / q).floor() * q,
                None => v,
            }
        };
        let x: Vec<f64> = (0..36).map(|_| draw(rng)).collect();
        let t: Vec<f64> = (0..36).map(|_| draw(rng)).collect();
        SamplePair {
            input: gray(6, 6, x),
            target: gray(6, 6, t),
        }
    }

    #[test]
    fn error_metric() {
        let a = gray(2, 1, vec![0.2, 0.4]);
        let b = gray(2, 1, vec![0.5, 0.4]);
        assert!((mean_abs_error(&a, &b).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(mean_abs_error(&a, &a).unwrap(), 0.0);
        let zeros = gray(2, 2, vec![0.0; 4]);
        let ones = gray(2, 2, vec![1.0; 4]);
        assert_eq!(mean_abs_error(&zeros, &ones).unwrap(), 1.0);
        assert!(mean_abs_error(&a, &zeros).is_err());
    }

    #[test]
    fn hand_computed_single_node_delta() {
        let topo = Topology::cartesian(1, 1, 1.0).unwrap();
        let mut net = PlanarNetwork::zeros(topo);
        net.node_weights_mut(0)[0] = 0.5; // P = 0.5 * 0.5 = 0.25
        let pair = SamplePair {
            input: gray(1, 1, vec![0.5]),
            target: gray(1, 1, vec![1.0]),
        };
        let d = batch_delta(&net, &[pair], 0.01).unwrap();
        assert!((d.weights[0] - 0.00375).abs() < 1e-15);
        assert!((d.biases[0] - 0.0075).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions_give_zero_deltas() {
        let net = PlanarNetwork::identity(topo());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_pair(&mut rng, None);
        let pair = SamplePair {
            input: p.input.clone(),
            target: p.input,
        };
        let d = batch_delta(&net, &[pair], 0.01).unwrap();
        assert!(d.weights.iter().chain(&d.biases).all(|&v| v == 0.0));
        assert!(batch_delta(&net, &[], 0.01).is_err());
    }

    #[test]
    fn two_pair_batch_is_sum_of_singles() {
        let net = PlanarNetwork::init(topo(), -1.0, 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_pair(&mut rng, None);
        let b = random_pair(&mut rng, None);
        let both = batch_delta(&net, &[a.clone(), b.clone()], 0.01).unwrap();
        let da = batch_delta(&net, &[a], 0.01).unwrap();
        let db = batch_delta(&net, &[b], 0.01).unwrap();
        for k in 0..both.weights.len() {
            assert_eq!(both.weights[k], da.weights[k] + db.weights[k]);
        }
        for k in 0..both.biases.len() {
            assert_eq!(both.biases[k], da.biases[k] + db.biases[k]);
        }
    }

    #[test]
    fn zero_rate_is_rejected_and_tiny_rate_barely_moves() {
        let mut net = PlanarNetwork::init(topo(), -1.0, 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<_> = (0..4).map(|_| random_pair(&mut rng, None)).collect();
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&mut net, &pairs, &[], &bad).is_err());
        // δ = 0 leaves weights untouched
        let d = batch_delta(&net, &pairs, 0.0).unwrap();
        assert!(d.weights.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_count_and_partial_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<_> = (0..25).map(|_| random_pair(&mut rng, None)).collect();
        let mut net = PlanarNetwork::init(topo(), -1.0, 1.0, 4).unwrap();
        let mut cfg = TrainConfig {
            learning_rate: 0.01,
            batch_size: 10,
            epochs: 3,
            ..TrainConfig::default()
        };
        let report = train(&mut net.clone(), &pairs, &[], &cfg).unwrap();
        assert_eq!(report.batch_train_error.len(), 6);
        cfg.partial_batches = true;
        let report = train(&mut net, &pairs, &[], &cfg).unwrap();
        assert_eq!(report.batch_train_error.len(), 9);
        assert_eq!(report.epoch_test_error.len(), 3);
        assert!(report.final_errors.is_none());
        assert_eq!(report.test_error_after_batch(10), None);

        let oversized = TrainConfig {
            batch_size: 30,
            ..TrainConfig::default()
        };
        let mut net = PlanarNetwork::init(topo(), -1.0, 1.0, 4).unwrap();
        assert!(matches!(
            train(&mut net, &pairs, &[], &oversized),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn fixed_point_is_stable() {
        let mut net = PlanarNetwork::identity(topo());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<_> = (0..6)
            .map(|_| {
                let p = random_pair(&mut rng, None);
                SamplePair {
                    input: p.input.clone(),
                    target: p.input,
                }
            })
            .collect();
        let before = net.clone();
        let cfg = TrainConfig {
            batch_size: 4,
            epochs: 5,
            ..TrainConfig::default()
        };
        train(&mut net, &pairs, &[], &cfg).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn biases_move_only_when_enabled() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pairs: Vec<_> = (0..8).map(|_| random_pair(&mut rng, None)).collect();
        let start = PlanarNetwork::init(topo(), -1.0, 1.0, 6).unwrap();
        let mut cfg = TrainConfig {
            batch_size: 4,
            epochs: 2,
            ..TrainConfig::default()
        };
        let mut frozen = start.clone();
        train(&mut frozen, &pairs, &[], &cfg).unwrap();
        assert!(frozen.biases().iter().all(|&b| b == 0.0));
        assert_ne!(frozen.weights(), start.weights());

        cfg.train_biases = true;
        let mut free = start.clone();
        train(&mut free, &pairs, &[], &cfg).unwrap();
        assert!(free.biases().iter().any(|&b| b != 0.0));
    }

    #[test]
    fn csv_has_all_series() {
        let report = TrainReport {
            batch_train_error: vec![0.5, 0.25],
            batch_test_error: vec![0.4, 0.2],
            epoch_test_error: vec![0.2],
            final_errors: Some(ChainedErrors {
                e1: 0.2,
                e2: 0.3,
                e5: 0.5,
            }),
            final_1x: 0.2,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("series,index,value\n"));
        assert!(text.contains("train_error,2,0.25\n"));
        assert!(text.contains("test_error_1x,1,0.2\n"));
        assert!(text.contains("final_5x,,0.5\n"));
    }
}
