//! Linear probes over frozen features.
//!
//! A single linear layer is fit by full-batch gradient descent: softmax
//! cross-entropy for classification, mean squared error for regression,
//! both with an L2 penalty on the weights (not the bias). Parameters start
//! at zero and every step is sequential, so retraining with the same data
//! and configuration reproduces the model bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{put_str, put_u32, ByteReader, DecodeError};
use crate::embedding::EmbeddingStore;
use crate::table::{DelimitedTable, TableError};

pub const MODEL_MAGIC: &str = "SCPM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("dataset is empty")]
    Empty,
    #[error("row {row} has {got} features, expected {expected}")]
    Width { row: usize, expected: usize, got: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("non-finite regression target at row {0}")]
    NonFiniteTarget(usize),
    #[error("classification needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("{0} targets for {1} feature rows")]
    TargetCount(usize, usize),
    #[error("model is for {model:?} but the dataset is {data:?}")]
    TaskMismatch { model: Task, data: Task },
    #[error("feature columns differ: model was trained on {model:?}, data has {data:?}")]
    FeatureNames { model: Vec<String>, data: Vec<String> },
    #[error("R^2 undefined: test targets are constant")]
    ConstantTargets,
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("invalid model file: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Reference,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// Raw class labels; class indices follow the sorted label order.
    Labels(Vec<String>),
    Real(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    targets: Targets,
    split: Split,
    feature_names: Vec<String>,
}

/// Sorts labels numerically when they all parse as numbers, otherwise
/// lexicographically.
pub fn sorted_classes<'a>(labels: impl IntoIterator<Item = &'a String>) -> Vec<String> {
    let mut classes: Vec<String> = labels.into_iter().cloned().collect();
    classes.sort();
    classes.dedup();
    let numeric: Option<Vec<f64>> = classes.iter().map(|c| c.trim().parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut pairs: Vec<(f64, String)> = values.into_iter().zip(classes).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        classes = pairs.into_iter().map(|p| p.1).collect();
    }
    classes
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Targets, split: Split) -> Result<Self, ProbeError> {
        let n = features.len();
        if n == 0 {
            return Err(ProbeError::Empty);
        }
        let d = features[0].len();
        for (row, f) in features.iter().enumerate() {
            if f.len() != d {
                return Err(ProbeError::Width {
                    row,
                    expected: d,
                    got: f.len(),
                });
            }
            if let Some(col) = f.iter().position(|x| !x.is_finite()) {
                return Err(ProbeError::NonFinite { row, col });
            }
        }
        let t = match &targets {
            Targets::Labels(l) => l.len(),
            Targets::Real(y) => {
                if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                    return Err(ProbeError::NonFiniteTarget(i));
                }
                y.len()
            }
        };
        if t != n {
            return Err(ProbeError::TargetCount(t, n));
        }
        Ok(Self {
            features,
            targets,
            split,
            feature_names: Vec::new(),
        })
    }

    /// Names the feature columns; `names` must match the feature width.
    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, ProbeError> {
        if names.len() != self.width() {
            return Err(ProbeError::Width {
                row: 0,
                expected: self.width(),
                got: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Feature column names, empty when the source had none.
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Classification dataset with integer class labels.
    pub fn from_classes(features: Vec<Vec<f64>>, classes: &[usize], split: Split) -> Result<Self, ProbeError> {
        let labels = classes.iter().map(|c| c.to_string()).collect();
        Self::new(features, Targets::Labels(labels), split)
    }

    /// Reads a feature table: `label_column` holds the target, columns in
    /// `ignore` are skipped, every other column is a numeric feature.
    pub fn from_table(
        table: &DelimitedTable,
        label_column: &str,
        ignore: &[String],
        task: Task,
        split: Split,
    ) -> Result<Self, ProbeError> {
        let label = table.column(label_column)?;
        for name in ignore {
            table.column(name)?;
        }
        let feature_cols: Vec<usize> = (0..table.header.len())
            .filter(|&c| c != label && !ignore.contains(&table.header[c]))
            .collect();
        let mut features = Vec::with_capacity(table.rows.len());
        for row in 0..table.rows.len() {
            features.push(
                feature_cols
                    .iter()
                    .map(|&c| table.float(row, c))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let targets = match task {
            Task::Classification => Targets::Labels(table.rows.iter().map(|r| r[label].trim().to_string()).collect()),
            Task::Regression => Targets::Real(
                (0..table.rows.len())
                    .map(|row| table.float(row, label))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        let names = feature_cols.iter().map(|&c| table.header[c].clone()).collect();
        Self::new(features, targets, split)?.with_feature_names(names)
    }

    /// Features from an EMBS matrix (data rows in file order, metadata
    /// records skipped) with targets given separately in the same order.
    pub fn from_store(store: &EmbeddingStore, targets: Targets, split: Split) -> Result<Self, ProbeError> {
        let features = store
            .vectors()
            .map(|(_, v)| v.iter().map(|&x| x as f64).collect())
            .collect();
        Self::new(features, targets, split)
    }

    pub fn task(&self) -> Task {
        match self.targets {
            Targets::Labels(_) => Task::Classification,
            Targets::Real(_) => Task::Regression,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn split(&self) -> Split {
        self.split
    }
}

/// Per-column z-scoring with statistics taken from the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[Vec<f64>]) -> Self {
        let d = features.first().map_or(0, Vec::len);
        let n = features.len() as f64;
        let mut mean = vec![0.0; d];
        for row in features {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in features {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        // constant columns keep unit scale
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Minimum per-step loss improvement that counts as progress.
    pub tolerance: f64,
    /// Stop after this many consecutive steps without progress.
    pub patience: usize,
    pub l2: f64,
    pub standardize: bool,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iterations: 2000,
            tolerance: 1e-7,
            patience: 20,
            l2: 1e-4,
            standardize: false,
            seed: 0,
        }
    }
}

/// Weights (d x k, row-major) and bias (k) of a linear layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams {
    pub d: usize,
    pub k: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearParams {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self {
            d,
            k,
            weights: vec![0.0; d * k],
            bias: vec![0.0; k],
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (i, xi) in x.iter().enumerate() {
            let row = &self.weights[i * self.k..(i + 1) * self.k];
            for (zj, w) in z.iter_mut().zip(row) {
                *zj += xi * w;
            }
        }
        z
    }

    fn axpy(&self, step: f64, grad: &LinearParams) -> LinearParams {
        LinearParams {
            d: self.d,
            k: self.k,
            weights: self
                .weights
                .iter()
                .zip(&grad.weights)
                .map(|(w, g)| w - step * g)
                .collect(),
            bias: self.bias.iter().zip(&grad.bias).map(|(b, g)| b - step * g).collect(),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug)]
pub enum EncodedTargets<'a> {
    Classes(&'a [usize]),
    Real(&'a [f64]),
}

/// Penalized training objective and its analytic gradient.
pub fn loss_and_gradient(
    params: &LinearParams,
    features: &[Vec<f64>],
    targets: EncodedTargets<'_>,
    l2: f64,
) -> (f64, LinearParams) {
    let n = features.len() as f64;
    let mut grad = LinearParams::zeros(params.d, params.k);
    let mut loss = 0.0;
    for (i, x) in features.iter().enumerate() {
        let z = params.logits(x);
        // dloss/dz for this row
        let residual: Vec<f64> = match targets {
            EncodedTargets::Classes(y) => {
                let p = softmax(&z);
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                loss += lse - z[y[i]];
                let mut r = p;
                r[y[i]] -= 1.0;
                r
            }
            EncodedTargets::Real(y) => {
                let e = z[0] - y[i];
                loss += e * e;
                vec![2.0 * e]
            }
        };
        for (a, xa) in x.iter().enumerate() {
            let row = &mut grad.weights[a * params.k..(a + 1) * params.k];
            for (g, r) in row.iter_mut().zip(&residual) {
                *g += xa * r;
            }
        }
        for (g, r) in grad.bias.iter_mut().zip(&residual) {
            *g += r;
        }
    }
    loss /= n;
    grad.weights.iter_mut().for_each(|g| *g /= n);
    grad.bias.iter_mut().for_each(|g| *g /= n);
    let sq: f64 = params.weights.iter().map(|w| w * w).sum();
    loss += 0.5 * l2 * sq;
    for (g, w) in grad.weights.iter_mut().zip(&params.weights) {
        *g += l2 * w;
    }
    (loss, grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub config: ProbeConfig,
    pub iterations: usize,
    pub final_loss: f64,
    /// Step size in effect at the end (halved whenever a full step would
    /// have increased the loss).
    pub final_learning_rate: f64,
    pub n_train: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeModel {
    pub task: Task,
    pub params: LinearParams,
    /// Class labels in index order (empty for regression).
    pub classes: Vec<String>,
    pub standardizer: Option<Standardizer>,
    /// Training feature names, empty when unknown.
    pub feature_names: Vec<String>,
    pub summary: TrainingSummary,
    /// Loss before the first step and after every accepted step.
    pub loss_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    task: Task,
    d: usize,
    k: usize,
    classes: Vec<String>,
    standardizer: Option<Standardizer>,
    #[serde(default)]
    feature_names: Vec<String>,
    summary: TrainingSummary,
}

fn encode_classes(labels: &[String], classes: &[String]) -> Vec<Option<usize>> {
    labels.iter().map(|l| classes.iter().position(|c| c == l)).collect()
}

/// Fits the linear layer on `train`.
pub fn train_linear_probe(train: &LabeledDataset, config: &ProbeConfig) -> Result<ProbeModel, ProbeError> {
    let standardizer = config.standardize.then(|| Standardizer::fit(&train.features));
    let scaled;
    let features: &[Vec<f64>] = match &standardizer {
        Some(s) => {
            scaled = train.features.iter().map(|r| s.apply(r)).collect::<Vec<_>>();
            &scaled
        }
        None => &train.features,
    };
    let d = train.width();
    let (task, classes, class_idx, k);
    match &train.targets {
        Targets::Labels(labels) => {
            let c = sorted_classes(labels);
            if c.len() < 2 {
                return Err(ProbeError::SingleClass(c.len()));
            }
            class_idx = encode_classes(labels, &c)
                .into_iter()
                .map(|i| i.expect("train labels are in the class list"))
                .collect::<Vec<_>>();
            k = c.len();
            classes = c;
            task = Task::Classification;
        }
        Targets::Real(_) => {
            class_idx = Vec::new();
            classes = Vec::new();
            k = 1;
            task = Task::Regression;
        }
    }
    let targets = match &train.targets {
        Targets::Labels(_) => EncodedTargets::Classes(&class_idx),
        Targets::Real(y) => EncodedTargets::Real(y),
    };

    let mut params = LinearParams::zeros(d, k);
    let (mut loss, mut grad) = loss_and_gradient(&params, features, targets, config.l2);
    let mut history = vec![loss];
    let mut lr = config.learning_rate;
    let mut stalled = 0;
    let mut iterations = 0;
    'outer: while iterations < config.max_iterations {
        let (cand, cand_loss, cand_grad) = loop {
            let cand = params.axpy(lr, &grad);
            let (l, g) = loss_and_gradient(&cand, features, targets, config.l2);
            if l <= loss {
                break (cand, l, g);
            }
            lr *= 0.5;
            if lr < 1e-12 {
                break 'outer;
            }
        };
        iterations += 1;
        let improvement = loss - cand_loss;
        params = cand;
        loss = cand_loss;
        grad = cand_grad;
        history.push(loss);
        if improvement < config.tolerance {
            stalled += 1;
            if stalled >= config.patience {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    Ok(ProbeModel {
        task,
        params,
        classes,
        standardizer,
        feature_names: train.feature_names.clone(),
        summary: TrainingSummary {
            config: config.clone(),
            iterations,
            final_loss: loss,
            final_learning_rate: lr,
            n_train: train.len(),
            config_hash: None,
        },
        loss_history: history,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predictions {
    /// Class indices into [`ProbeModel::classes`].
    Classes(Vec<usize>),
    Real(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    RSquared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub kind: MetricKind,
    pub value: f64,
    pub n: usize,
}

impl ProbeModel {
    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Predictions, ProbeError> {
        for (row, f) in features.iter().enumerate() {
            if f.len() != self.params.d {
                return Err(ProbeError::Width {
                    row,
                    expected: self.params.d,
                    got: f.len(),
                });
            }
        }
        let logits = features.iter().map(|x| match &self.standardizer {
            Some(s) => self.params.logits(&s.apply(x)),
            None => self.params.logits(x),
        });
        Ok(match self.task {
            Task::Classification => Predictions::Classes(logits.map(|z| argmax(&z)).collect()),
            Task::Regression => Predictions::Real(logits.map(|z| z[0]).collect()),
        })
    }

    /// Test accuracy (classification) or R^2 (regression). Test labels the
    /// model has never seen count as errors.
    pub fn evaluate(&self, test: &LabeledDataset) -> Result<Metric, ProbeError> {
        if test.task() != self.task {
            return Err(ProbeError::TaskMismatch {
                model: self.task,
                data: test.task(),
            });
        }
        if !self.feature_names.is_empty() && !test.feature_names.is_empty() && self.feature_names != test.feature_names
        {
            return Err(ProbeError::FeatureNames {
                model: self.feature_names.clone(),
                data: test.feature_names.clone(),
            });
        }
        match (self.predict(&test.features)?, &test.targets) {
            (Predictions::Classes(pred), Targets::Labels(labels)) => {
                let truth = encode_classes(labels, &self.classes);
                Ok(Metric {
                    kind: MetricKind::Accuracy,
                    value: accuracy(&pred, &truth),
                    n: test.len(),
                })
            }
            (Predictions::Real(pred), Targets::Real(y)) => Ok(Metric {
                kind: MetricKind::RSquared,
                value: r_squared(&pred, y)?,
                n: test.len(),
            }),
            _ => unreachable!("task checked above"),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = ModelHeader {
            task: self.task,
            d: self.params.d,
            k: self.params.k,
            classes: self.classes.clone(),
            standardizer: self.standardizer.clone(),
            feature_names: self.feature_names.clone(),
            summary: self.summary.clone(),
        };
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC.as_bytes());
        put_u32(&mut out, MODEL_VERSION);
        put_str(&mut out, &serde_json::to_string(&header).expect("header serializes"));
        for v in self.params.weights.iter().chain(&self.params.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes a model file. The loss history is not stored; the decoded
    /// model carries only the final loss.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        r.magic(MODEL_MAGIC)?;
        let at = r.offset();
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(DecodeError::UnsupportedVersion { version, offset: at });
        }
        let at = r.offset();
        let header: ModelHeader = serde_json::from_str(r.string()?).map_err(|e| DecodeError::Invalid {
            offset: at,
            message: format!("bad model header: {e}"),
        })?;
        let invalid = |message: &str| DecodeError::Invalid {
            offset: at,
            message: message.to_string(),
        };
        let shape_ok = match header.task {
            Task::Classification => header.k >= 2 && header.classes.len() == header.k,
            Task::Regression => header.k == 1 && header.classes.is_empty(),
        };
        if header.d == 0 || !shape_ok {
            return Err(invalid("inconsistent model shape"));
        }
        if !header.feature_names.is_empty() && header.feature_names.len() != header.d {
            return Err(invalid("feature name count differs from model width"));
        }
        if let Some(s) = &header.standardizer {
            if s.mean.len() != header.d || s.scale.len() != header.d {
                return Err(invalid("standardizer width differs from model width"));
            }
        }
        let count = header
            .d
            .checked_mul(header.k)
            .filter(|c| c.saturating_mul(8) <= r.remaining())
            .ok_or_else(|| DecodeError::Truncated {
                offset: r.offset(),
                needed: header
                    .d
                    .saturating_mul(header.k)
                    .saturating_mul(8)
                    .saturating_sub(r.remaining()),
            })?;
        let weights = (0..count).map(|_| r.finite_f64()).collect::<Result<Vec<_>, _>>()?;
        let bias = (0..header.k).map(|_| r.finite_f64()).collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        let final_loss = header.summary.final_loss;
        Ok(Self {
            task: header.task,
            params: LinearParams {
                d: header.d,
                k: header.k,
                weights,
                bias,
            },
            classes: header.classes,
            standardizer: header.standardizer,
            feature_names: header.feature_names,
            summary: header.summary,
            loss_history: vec![final_loss],
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProbeError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProbeError> {
        Ok(Self::from_bytes(&std::fs::read(path)?)?)
    }
}

/// Share of rows whose prediction equals the (known) true class.
pub fn accuracy(pred: &[usize], truth: &[Option<usize>]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| Some(**p) == **t).count();
    hits as f64 / pred.len() as f64
}

/// `1 - SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64, ProbeError> {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(ProbeError::ConstantTargets);
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// R^2 of predicting the constant `c` everywhere, via
/// `SS_res = SS_tot + n (mean - c)^2`, so the result is never positive.
fn r_squared_constant(c: f64, truth: &[f64]) -> Result<f64, ProbeError> {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(ProbeError::ConstantTargets);
    }
    Ok(-(n * (mean - c) * (mean - c)) / ss_tot)
}

/// Majority-class (classification) or train-mean (regression) predictor,
/// scored on `test`.
pub fn baseline_majority_mean(train: &LabeledDataset, test: &LabeledDataset) -> Result<Metric, ProbeError> {
    if train.task() != test.task() {
        return Err(ProbeError::TaskMismatch {
            model: train.task(),
            data: test.task(),
        });
    }
    match (&train.targets, &test.targets) {
        (Targets::Labels(tr), Targets::Labels(te)) => {
            let classes = sorted_classes(tr);
            let counts: Vec<usize> = classes.iter().map(|c| tr.iter().filter(|l| *l == c).count()).collect();
            // ties resolve to the lowest class index
            let mut majority = 0;
            for (i, &c) in counts.iter().enumerate() {
                if c > counts[majority] {
                    majority = i;
                }
            }
            let hits = te.iter().filter(|l| **l == classes[majority]).count();
            Ok(Metric {
                kind: MetricKind::Accuracy,
                value: hits as f64 / te.len() as f64,
                n: te.len(),
            })
        }
        (Targets::Real(tr), Targets::Real(te)) => {
            let mean = tr.iter().sum::<f64>() / tr.len() as f64;
            Ok(Metric {
                kind: MetricKind::RSquared,
                value: r_squared_constant(mean, te)?,
                n: te.len(),
            })
        }
        _ => unreachable!("task checked above"),
    }
}
