//! Per-horizon recurrent models `V_t` with a regression or classification head.
//!
//! Inputs are the observation window normalized by the map size. A masking
//! stage drops padding rows before the recurrence, so any amount of padding
//! leaves the output unchanged. The regression head emits the displacement
//! from the newest observation in units of `t · v_max`; the classification
//! head emits logits over the relative grid cells.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::config_hash;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::prediction::dataset::{denormalize, normalize, Sequence, TrainingDataset, PADDING};
use crate::prediction::lstm::{softmax, Adam, Lstm};
use crate::prediction::{
    GridSpec, ObservationBuffer, OccupancyGrid, OccupancyGridSet, PredictionConfig, Predictor, TrajectoryPrediction,
};
use crate::seeds;
use crate::world::MapSpec;

pub const MODEL_FORMAT: &str = "pcmp-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Regression,
    Classification,
}

impl std::fmt::Display for Head {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Head::Regression => "regression",
            Head::Classification => "classification",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyperparams {
    pub hidden: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Epochs without held-out improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub clip_norm: f64,
}

impl Default for TrainHyperparams {
    fn default() -> Self {
        Self {
            hidden: 16,
            batch_size: 64,
            max_epochs: 30,
            learning_rate: 0.01,
            patience: 5,
            validation_fraction: 0.1,
            clip_norm: 5.0,
        }
    }
}

/// One padded input row: normalized `x`, `y` and a mask flag.
pub type InputRow = [f64; 3];

/// Pads a normalized window to `history` rows, padding first.
pub fn padded_rows(normalized: &[Point2], history: usize) -> Vec<InputRow> {
    let pad = history.saturating_sub(normalized.len());
    let mut rows = vec![[PADDING, PADDING, 0.0]; pad];
    rows.extend(normalized.iter().map(|p| [p.x, p.y, 1.0]));
    rows
}

/// Masking stage: keeps the coordinates of unmasked rows, in order.
pub fn mask_rows(rows: &[InputRow]) -> Vec<f64> {
    rows.iter().filter(|r| r[2] != 0.0).flat_map(|r| [r[0], r[1]]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub initial_loss: f64,
    pub final_train_loss: f64,
    pub best_held_out_loss: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub head: Head,
    pub horizon: usize,
    pub map: MapSpec,
    pub v_max: f64,
    pub grid: GridSpec,
    pub net: Lstm,
    pub report: TrainingReport,
}

enum Target {
    Offset([f64; 2]),
    Cell(usize),
}

impl TrainedModel {
    fn output_size(head: Head, grid: &GridSpec) -> usize {
        match head {
            Head::Regression => 2,
            Head::Classification => grid.cell_count(),
        }
    }

    fn scale(&self) -> f64 {
        self.horizon as f64 * self.v_max
    }

    /// Raw head output for padded input rows.
    pub fn forward_rows(&self, rows: &[InputRow]) -> Vec<f64> {
        self.net.predict(&mask_rows(rows))
    }

    fn forward_normalized(&self, history: &[Point2]) -> Vec<f64> {
        let flat: Vec<f64> = history.iter().flat_map(|p| [p.x, p.y]).collect();
        self.net.predict(&flat)
    }

    /// Predicted position in map coordinates.
    pub fn predict_point(&self, buffer: &ObservationBuffer) -> Point2 {
        let hist: Vec<Point2> = buffer.positions().iter().map(|&p| normalize(&self.map, p)).collect();
        let out = self.forward_normalized(&hist);
        buffer.newest() + Point2::new(out[0], out[1]) * self.scale()
    }

    pub fn predict_grid(&self, buffer: &ObservationBuffer) -> OccupancyGrid {
        let hist: Vec<Point2> = buffer.positions().iter().map(|&p| normalize(&self.map, p)).collect();
        OccupancyGrid { spec: self.grid, center: buffer.newest(), probabilities: softmax(&self.forward_normalized(&hist)) }
    }

    fn target(&self, seq: &Sequence) -> Result<Target> {
        let newest = denormalize(&self.map, *seq.history.last().ok_or(Error::EmptyDataset)?);
        let future = denormalize(&self.map, seq.future[self.horizon - 1]);
        let offset = future - newest;
        Ok(match self.head {
            Head::Regression => Target::Offset([offset.x / self.scale(), offset.y / self.scale()]),
            Head::Classification => Target::Cell(self.grid.cell_of_offset(offset)?),
        })
    }

    /// Loss and output gradient for one sequence.
    fn loss_and_grad(&self, out: &[f64], target: &Target) -> (f64, Vec<f64>) {
        match target {
            Target::Offset(t) => {
                let d = [out[0] - t[0], out[1] - t[1]];
                ((d[0] * d[0] + d[1] * d[1]) / 2.0, vec![d[0], d[1]])
            }
            Target::Cell(c) => {
                let mut p = softmax(out);
                let loss = -p[*c].max(1e-300).ln();
                p[*c] -= 1.0;
                (loss, p)
            }
        }
    }

    fn mean_loss(&self, seqs: &[Sequence], targets: &[Target]) -> f64 {
        if seqs.is_empty() {
            return 0.0;
        }
        seqs.iter()
            .zip(targets)
            .map(|(s, t)| self.loss_and_grad(&self.forward_normalized(&s.history), t).0)
            .sum::<f64>()
            / seqs.len() as f64
    }
}

/// Trains `V_t` for one head.
pub fn train(
    dataset: &TrainingDataset,
    head: Head,
    horizon: usize,
    config: &PredictionConfig,
    hyper: &TrainHyperparams,
    seed: u64,
) -> Result<TrainedModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if horizon == 0 || horizon > dataset.horizon {
        return Err(Error::Precondition(format!("horizon {horizon} outside 1..={}", dataset.horizon)));
    }
    let grid = config.grid_spec(horizon);
    let name = format!("{head}/V{horizon}");
    let mut init_rng = seeds::stream(seed, &format!("{}/{name}", seeds::TRAINING_INIT));
    let mut shuffle_rng = seeds::stream(seed, &format!("{}/{name}", seeds::TRAINING_SHUFFLE));
    let net = Lstm::new(2, hyper.hidden, TrainedModel::output_size(head, &grid), &mut init_rng);
    let mut model = TrainedModel {
        head,
        horizon,
        map: dataset.map,
        v_max: config.v_max,
        grid,
        net,
        report: TrainingReport { initial_loss: 0.0, final_train_loss: 0.0, best_held_out_loss: 0.0, epochs: 0 },
    };

    let (train_set, held_set) = dataset.split(hyper.validation_fraction);
    let train_targets = train_set.sequences.iter().map(|s| model.target(s)).collect::<Result<Vec<_>>>()?;
    let held_targets = held_set.sequences.iter().map(|s| model.target(s)).collect::<Result<Vec<_>>>()?;
    let initial_loss = model.mean_loss(&train_set.sequences, &train_targets);
    let mut best_held = model.mean_loss(&held_set.sequences, &held_targets);
    let mut best_params = model.net.params.clone();
    let mut since_best = 0;
    let mut last_loss = initial_loss;
    let mut epochs = 0;

    let mut opt = Adam::new(model.net.params.len(), hyper.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grad = vec![0.0; model.net.params.len()];
    for epoch in 0..hyper.max_epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let seq = &train_set.sequences[i];
                let flat: Vec<f64> = seq.history.iter().flat_map(|p| [p.x, p.y]).collect();
                let (out, cache) = model.net.forward(&flat);
                let (loss, d_out) = model.loss_and_grad(&out, &train_targets[i]);
                epoch_loss += loss;
                model.net.backward(&cache, &d_out, &mut grad);
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > hyper.clip_norm {
                let s = hyper.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            opt.step(&mut model.net.params, &grad);
        }
        epoch_loss /= train_set.len() as f64;
        epochs = epoch + 1;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { model: name, epoch, last_loss });
        }
        last_loss = epoch_loss;
        let held = if held_set.is_empty() { epoch_loss } else { model.mean_loss(&held_set.sequences, &held_targets) };
        if held < best_held {
            best_held = held;
            best_params.clone_from(&model.net.params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.patience {
                break;
            }
        }
    }
    model.net.params = best_params;
    model.report = TrainingReport {
        initial_loss,
        final_train_loss: model.mean_loss(&train_set.sequences, &train_targets),
        best_held_out_loss: best_held,
        epochs,
    };
    Ok(model)
}

/// Mean squared error in normalized map coordinates (averaged over x and y).
pub fn regression_mse(dataset: &TrainingDataset, horizon: usize, predict: impl Fn(&[Point2]) -> Point2) -> f64 {
    let total: f64 = dataset
        .sequences
        .iter()
        .map(|s| {
            let p = predict(&s.history);
            let t = s.future[horizon - 1];
            ((p.x - t.x).powi(2) + (p.y - t.y).powi(2)) / 2.0
        })
        .sum();
    total / dataset.len().max(1) as f64
}

/// Held-out regression error of a trained model, in normalized coordinates.
pub fn model_mse(model: &TrainedModel, dataset: &TrainingDataset) -> f64 {
    regression_mse(dataset, model.horizon, |hist| {
        let out = model.forward_normalized(hist);
        let newest = *hist.last().expect("non-empty");
        let scale = model.scale();
        newest + Point2::new(out[0] * scale / model.map.width, out[1] * scale / model.map.height)
    })
}

/// Constant-velocity error on the same footing as [`model_mse`].
pub fn constant_velocity_mse(dataset: &TrainingDataset, horizon: usize) -> f64 {
    regression_mse(dataset, horizon, |hist| {
        let newest = *hist.last().expect("non-empty");
        if hist.len() < 2 {
            newest
        } else {
            newest + (newest - hist[hist.len() - 2]) * horizon as f64
        }
    })
}

/// Mean held-out cross-entropy of a classification model.
pub fn cross_entropy(model: &TrainedModel, dataset: &TrainingDataset) -> Result<f64> {
    let targets = dataset.sequences.iter().map(|s| model.target(s)).collect::<Result<Vec<_>>>()?;
    Ok(model.mean_loss(&dataset.sequences, &targets))
}

/// Share of sequences whose most likely cell holds the true offset.
pub fn argmax_accuracy(model: &TrainedModel, dataset: &TrainingDataset) -> Result<f64> {
    let mut hits = 0;
    for s in &dataset.sequences {
        if let Target::Cell(c) = model.target(s)? {
            let probs = softmax(&model.forward_normalized(&s.history));
            let best = probs.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &p)| if p > b.1 { (i, p) } else { b }).0;
            if best == c {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / dataset.len().max(1) as f64)
}

/// The full set `V_1..V_H` for one or both heads, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModelSet {
    pub format: String,
    pub version: u32,
    /// Hash of the configuration the models were trained under.
    pub config_hash: String,
    pub prediction: PredictionConfig,
    pub hyperparams: TrainHyperparams,
    pub regression: Vec<TrainedModel>,
    pub classification: Vec<TrainedModel>,
}

impl TrainedModelSet {
    /// Trains every horizon for each requested head.
    pub fn train(
        dataset: &TrainingDataset,
        heads: &[Head],
        config: &PredictionConfig,
        hyper: &TrainHyperparams,
        seed: u64,
        config_hash: String,
    ) -> Result<Self> {
        let mut set = Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config_hash,
            prediction: *config,
            hyperparams: *hyper,
            regression: Vec::new(),
            classification: Vec::new(),
        };
        for &head in heads {
            for t in 1..=config.horizon {
                let m = train(dataset, head, t, config, hyper, seed)?;
                match head {
                    Head::Regression => set.regression.push(m),
                    Head::Classification => set.classification.push(m),
                }
            }
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text)?;
        if set.format != MODEL_FORMAT || set.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported model file {} v{}", set.format, set.version)));
        }
        for (head, models) in [(Head::Regression, &set.regression), (Head::Classification, &set.classification)] {
            for (k, m) in models.iter().enumerate() {
                let expected = Lstm::param_count(2, m.net.hidden, TrainedModel::output_size(head, &m.grid));
                if m.head != head || m.horizon != k + 1 || m.net.params.len() != expected {
                    return Err(Error::Model(format!("{head} model {k} is inconsistent")));
                }
            }
        }
        Ok(set)
    }

    /// Rejects a set trained under a different configuration.
    pub fn check_hash(&self, expected: &str) -> Result<()> {
        if self.config_hash != expected {
            return Err(Error::Model(format!("model trained for config {}, expected {expected}", self.config_hash)));
        }
        Ok(())
    }

    /// Hash identifying a training configuration.
    pub fn hash_for<T: Serialize>(training_config: &T) -> Result<String> {
        config_hash(training_config)
    }
}

/// Predictor backed by trained models.
#[derive(Debug, Clone, Copy)]
pub struct TrainedPredictor<'a> {
    pub models: &'a TrainedModelSet,
    pub horizon: usize,
    pub history: usize,
}

impl<'a> TrainedPredictor<'a> {
    pub fn new(models: &'a TrainedModelSet, config: &PredictionConfig) -> Self {
        Self { models, horizon: config.horizon, history: config.history }
    }
}

impl Predictor for TrainedPredictor<'_> {
    fn predict_trajectory(&self, _obstacle: usize, buffer: &ObservationBuffer) -> Result<TrajectoryPrediction> {
        if self.models.regression.len() < self.horizon {
            return Err(Error::Model("model file has no regression head for every horizon".into()));
        }
        let buffer = buffer.clone().truncated(self.history);
        let points = self.models.regression[..self.horizon].iter().map(|m| m.predict_point(&buffer)).collect();
        Ok(TrajectoryPrediction { anchor: buffer.newest(), points })
    }

    fn predict_grids(&self, _obstacle: usize, buffer: &ObservationBuffer) -> Result<OccupancyGridSet> {
        if self.models.classification.len() < self.horizon {
            return Err(Error::Model("model file has no classification head for every horizon".into()));
        }
        let buffer = buffer.clone().truncated(self.history);
        Ok(OccupancyGridSet { grids: self.models.classification[..self.horizon].iter().map(|m| m.predict_grid(&buffer)).collect() })
    }
}
