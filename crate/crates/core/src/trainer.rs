//! Gated one-sample SGD: presentation loop, periodic evaluation, stopping
//! rule and the metrics stream.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{shuffled_order, Dataset};
use crate::energy::{EfficiencyReport, EnergyLedger};
use crate::error::{Error, Result};
use crate::gating::{GateKind, UpdateGate};
use crate::model::{init_mlp, MlpModel, Model, ModelCheckpoint};
use crate::scalar::Scalar;

pub const MNIST_LEARNING_RATE: f64 = 0.01;
pub const TOY_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_EPOCHS: usize = 50;
pub const MNIST_EVAL_EVERY: u64 = 5_000;
pub const EMNIST_EVAL_EVERY: u64 = 60_000;
pub const PURE_LAZY_STOP_ACCURACY: f64 = 0.975;

/// Rows per parallel evaluation chunk. Fixed so that reductions add up in
/// the same order regardless of the thread count.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rule: GateKind,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Presented samples between evaluations.
    pub eval_every: u64,
    /// Stop at the first evaluation whose test accuracy reaches this value.
    pub stop_test_accuracy: Option<f64>,
    pub seed: u64,
    pub hidden_dim: usize,
    /// Also sweep the full training set at every evaluation.
    #[serde(default = "default_true")]
    pub eval_train: bool,
}

fn default_true() -> bool {
    true
}

impl TrainConfig {
    /// MNIST defaults: lr 0.01, 50 epochs, evaluation every 5,000 samples,
    /// 97.5% test-accuracy cutoff for pure-lazy runs only.
    pub fn mnist(rule: GateKind) -> Self {
        Self {
            rule,
            learning_rate: MNIST_LEARNING_RATE,
            epochs: DEFAULT_EPOCHS,
            eval_every: MNIST_EVAL_EVERY,
            stop_test_accuracy: (rule == GateKind::PureLazy).then_some(PURE_LAZY_STOP_ACCURACY),
            seed: 0,
            hidden_dim: 100,
            eval_train: true,
        }
    }

    /// As [`TrainConfig::mnist`] but evaluated every 60,000 samples.
    pub fn emnist(rule: GateKind) -> Self {
        Self {
            eval_every: EMNIST_EVAL_EVERY,
            ..Self::mnist(rule)
        }
    }

    /// Toy defaults: lr 0.001, no cutoff, evaluation once per pass over the
    /// default 200-point dataset.
    pub fn toy(rule: GateKind) -> Self {
        Self {
            rule,
            learning_rate: TOY_LEARNING_RATE,
            epochs: crate::landscape::TOY_EPOCHS,
            eval_every: 200,
            stop_test_accuracy: None,
            seed: 0,
            hidden_dim: 0,
            eval_train: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidSpec(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidSpec("epochs must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidSpec("eval_every must be >= 1".into()));
        }
        if let Some(a) = self.stop_test_accuracy {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidSpec(format!("stop accuracy must lie in [0, 1], got {a}")));
            }
        }
        Ok(())
    }
}

/// One row of the evaluation stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub samples_seen: u64,
    /// 1-based epoch the triggering sample belonged to.
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub test_loss: f64,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub m_total: f64,
    pub m_min: f64,
    pub inefficiency: Option<f64>,
    pub update_count: u64,
    pub remembered_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    StoppedEarly,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: TrainConfig,
    pub status: RunStatus,
    pub error: Option<String>,
    pub scalar: String,
    pub n_train: usize,
    pub n_test: usize,
    pub samples_seen: u64,
    pub epochs_completed: usize,
    pub final_record: Option<MetricsRecord>,
    pub efficiency: EfficiencyReport,
    pub update_count: u64,
    pub step_count: u64,
    pub remembered_fraction: Option<f64>,
    /// Original sample ids of remembered training samples (lazy runs).
    pub coreset_ids: Option<Vec<usize>>,
}

/// Mean loss and accuracy over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Pure evaluation sweep; chunks run in parallel and are reduced in order.
pub fn evaluate<S: Scalar, M: Model<S>>(model: &M, data: &Dataset<S>) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate on an empty dataset".into()));
    }
    let n_chunks = data.len().div_ceil(EVAL_CHUNK);
    let partials: Vec<Result<(f64, usize)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut act = model.new_activations();
            let mut loss = 0.0;
            let mut correct = 0;
            for i in c * EVAL_CHUNK..((c + 1) * EVAL_CHUNK).min(data.len()) {
                model.forward_into(data.sample(i), &mut act)?;
                let label = data.label(i);
                loss += model.sample_loss(&act, label).as_f64();
                correct += usize::from(model.predicted_class(&act) == label);
            }
            Ok((loss, correct))
        })
        .collect();
    let mut loss = 0.0;
    let mut correct = 0;
    for p in partials {
        let (l, c) = p?;
        loss += l;
        correct += c;
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: correct as f64 / n,
    })
}

/// What happened to one presented sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    /// Presentations so far, including this one.
    pub samples_seen: u64,
    pub epoch: usize,
    pub position: usize,
    pub sample_id: usize,
    pub predicted: usize,
    pub label: usize,
    pub updated: bool,
    pub delta_l1: f64,
}

/// Presents one sample: a single forward pass feeds the gate and, when the
/// gate opens, the backward pass and SGD step.
///
/// `index` addresses both the gate's remember vector and the ledger.
#[allow(clippy::too_many_arguments)]
pub fn train_step<S: Scalar, M: Model<S>>(
    model: &mut M,
    act: &mut M::Activations,
    gate: &mut UpdateGate,
    ledger: &mut EnergyLedger,
    x: &[S],
    index: usize,
    label: usize,
    lr: S,
) -> Result<(usize, Option<f64>)> {
    model.forward_into(x, act)?;
    let predicted = model.predicted_class(act);
    ledger.record_step();
    let decision = gate.decide(index, predicted, label)?;
    if !decision.update {
        return Ok((predicted, None));
    }
    let delta = model.apply_sgd(x, act, label, lr)?;
    ledger.record_update(index, delta)?;
    Ok((predicted, Some(delta)))
}

/// Callbacks invoked while a run progresses.
pub trait RunObserver<S: Scalar, M: Model<S>> {
    fn on_record(&mut self, _record: &MetricsRecord) -> Result<()> {
        Ok(())
    }

    fn on_step(&mut self, _model: &M, _event: &StepEvent) {}

    fn on_epoch_end(&mut self, _trainer: &Trainer<S, M>) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NoObserver;

impl<S: Scalar, M: Model<S>> RunObserver<S, M> for NoObserver {}

/// Collects the metrics stream.
impl<S: Scalar, M: Model<S>> RunObserver<S, M> for Vec<MetricsRecord> {
    fn on_record(&mut self, record: &MetricsRecord) -> Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Resumable run state, written at epoch boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheckpoint {
    pub config: TrainConfig,
    pub scalar: String,
    pub epochs_completed: usize,
    pub samples_seen: u64,
    pub model: ModelCheckpoint,
    /// Positions in the training set (lazy runs).
    pub remembered: Option<Vec<usize>>,
    pub ledger: EnergyLedger,
}

/// Owns the mutable state of one run.
pub struct Trainer<S: Scalar, M: Model<S>> {
    config: TrainConfig,
    model: M,
    gate: UpdateGate,
    ledger: EnergyLedger,
    act: M::Activations,
    samples_seen: u64,
    epochs_completed: usize,
    lr: S,
}

impl<S: Scalar, M: Model<S>> Trainer<S, M> {
    pub fn new(config: TrainConfig, model: M, n_train: usize) -> Result<Self> {
        config.validate()?;
        let gate = UpdateGate::new(config.rule, n_train);
        let ledger = EnergyLedger::new(&model.parameters(), n_train);
        let act = model.new_activations();
        let lr = S::from_f64_lossy(config.learning_rate);
        Ok(Self {
            config,
            model,
            gate,
            ledger,
            act,
            samples_seen: 0,
            epochs_completed: 0,
            lr,
        })
    }

    /// Replaces the gate (e.g. a lazy gate with pre-set memory).
    pub fn with_gate(mut self, gate: UpdateGate) -> Result<Self> {
        if gate.kind() != self.config.rule {
            return Err(Error::InvalidInput(format!(
                "gate kind {} does not match configured rule {}",
                gate.kind(),
                self.config.rule
            )));
        }
        self.gate = gate;
        Ok(self)
    }

    /// Restores a trainer from a checkpoint and an already rebuilt model.
    pub fn resume(ck: RunCheckpoint, model: M) -> Result<Self> {
        let n_train = ck.ledger.per_sample_energy().len();
        let mut t = Self::new(ck.config.clone(), model, n_train)?;
        if ck.ledger.initial_params().len() != t.model.parameters().len() {
            return Err(Error::Shape("checkpoint ledger does not match the model".into()));
        }
        if let Some(ids) = &ck.remembered {
            t.gate = UpdateGate::lazy_from_ids(n_train, ids)?;
        }
        t.ledger = ck.ledger;
        t.samples_seen = ck.samples_seen;
        t.epochs_completed = ck.epochs_completed;
        Ok(t)
    }

    pub fn checkpoint(&self) -> RunCheckpoint {
        RunCheckpoint {
            config: self.config.clone(),
            scalar: S::NAME.to_string(),
            epochs_completed: self.epochs_completed,
            samples_seen: self.samples_seen,
            model: self.model.checkpoint(),
            remembered: (self.gate.kind() == GateKind::Lazy).then(|| self.gate.remembered_ids()),
            ledger: self.ledger.clone(),
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn gate(&self) -> &UpdateGate {
        &self.gate
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    pub fn epochs_completed(&self) -> usize {
        self.epochs_completed
    }

    pub fn into_parts(self) -> (M, UpdateGate, EnergyLedger) {
        (self.model, self.gate, self.ledger)
    }

    /// Presents training row `position`.
    pub fn present(&mut self, train: &Dataset<S>, position: usize) -> Result<StepEvent> {
        let label = train.label(position);
        let (predicted, delta) = train_step(
            &mut self.model,
            &mut self.act,
            &mut self.gate,
            &mut self.ledger,
            train.sample(position),
            position,
            label,
            self.lr,
        )?;
        self.samples_seen += 1;
        Ok(StepEvent {
            samples_seen: self.samples_seen,
            epoch: self.epochs_completed + 1,
            position,
            sample_id: train.sample_id(position),
            predicted,
            label,
            updated: delta.is_some(),
            delta_l1: delta.unwrap_or(0.0),
        })
    }

    pub fn efficiency(&self) -> Result<EfficiencyReport> {
        self.ledger.report(&self.model.parameters())
    }

    pub fn remembered_fraction(&self) -> Option<f64> {
        self.gate.remembered_fraction().ok()
    }

    /// Evaluates the current model and assembles a metrics row.
    pub fn metrics(&self, train: &Dataset<S>, test: &Dataset<S>, epoch: usize) -> Result<MetricsRecord> {
        let test_eval = evaluate(&self.model, test)?;
        let train_eval = if self.config.eval_train {
            Some(evaluate(&self.model, train)?)
        } else {
            None
        };
        let eff = self.efficiency()?;
        Ok(MetricsRecord {
            samples_seen: self.samples_seen,
            epoch,
            train_loss: train_eval.map(|e| e.loss),
            test_loss: test_eval.loss,
            train_accuracy: train_eval.map(|e| e.accuracy),
            test_accuracy: test_eval.accuracy,
            m_total: eff.m,
            m_min: eff.m_min,
            inefficiency: eff.inefficiency,
            update_count: self.ledger.update_count(),
            remembered_fraction: self.remembered_fraction(),
        })
    }

    /// Runs the remaining epochs. Numeric failures end the run with a
    /// `Failed` summary after the records emitted so far; other errors
    /// propagate.
    pub fn run(&mut self, train: &Dataset<S>, test: &Dataset<S>, observer: &mut impl RunObserver<S, M>) -> Result<RunSummary> {
        if train.n_classes() != test.n_classes() {
            return Err(Error::InvalidInput(format!(
                "train has {} classes, test {}",
                train.n_classes(),
                test.n_classes()
            )));
        }
        if train.n_dims() != self.model.input_dim() || test.n_dims() != self.model.input_dim() {
            return Err(Error::Shape(format!(
                "model takes {} inputs, datasets have {} / {}",
                self.model.input_dim(),
                train.n_dims(),
                test.n_dims()
            )));
        }
        if train.len() != self.ledger.per_sample_energy().len() {
            return Err(Error::Shape(format!(
                "trainer sized for {} samples, training set has {}",
                self.ledger.per_sample_energy().len(),
                train.len()
            )));
        }
        if train.is_empty() {
            return Err(Error::InvalidInput("training set is empty".into()));
        }

        let mut last_record: Option<MetricsRecord> = None;
        let mut status = RunStatus::Completed;
        let mut error = None;

        'epochs: while self.epochs_completed < self.config.epochs {
            let epoch = self.epochs_completed + 1;
            let order = shuffled_order(train.len(), self.epochs_completed as u64, self.config.seed);
            for &position in &order {
                let event = match self.present(train, position) {
                    Ok(ev) => ev,
                    Err(Error::Numeric(msg)) => {
                        status = RunStatus::Failed;
                        error = Some(format!("numeric failure at sample {}: {msg}", self.samples_seen + 1));
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                };
                observer.on_step(&self.model, &event);
                if self.samples_seen % self.config.eval_every == 0 {
                    let record = self.metrics(train, test, epoch)?;
                    observer.on_record(&record)?;
                    let stop = self
                        .config
                        .stop_test_accuracy
                        .is_some_and(|a| record.test_accuracy >= a);
                    last_record = Some(record);
                    if stop {
                        status = RunStatus::StoppedEarly;
                        break 'epochs;
                    }
                }
            }
            self.epochs_completed += 1;
            observer.on_epoch_end(self)?;
        }

        // close the stream with the end state if the last row predates it
        if status != RunStatus::Failed && last_record.as_ref().map(|r| r.samples_seen) != Some(self.samples_seen) && self.samples_seen > 0 {
            let epoch = self.epochs_completed.max(1);
            let record = self.metrics(train, test, epoch)?;
            observer.on_record(&record)?;
            last_record = Some(record);
        }

        let efficiency = self.efficiency()?;
        let coreset_ids = (self.gate.kind() == GateKind::Lazy).then(|| {
            self.gate
                .remembered_ids()
                .into_iter()
                .map(|p| train.sample_id(p))
                .collect()
        });
        Ok(RunSummary {
            config: self.config.clone(),
            status,
            error,
            scalar: S::NAME.to_string(),
            n_train: train.len(),
            n_test: test.len(),
            samples_seen: self.samples_seen,
            epochs_completed: self.epochs_completed,
            final_record: last_record,
            efficiency,
            update_count: self.ledger.update_count(),
            step_count: self.ledger.step_count(),
            remembered_fraction: self.remembered_fraction(),
            coreset_ids,
        })
    }
}

/// Finished run: summary plus the final model and state.
pub struct RunOutcome<S: Scalar, M: Model<S>> {
    pub summary: RunSummary,
    pub model: M,
    pub gate: UpdateGate,
    pub ledger: EnergyLedger,
    _scalar: std::marker::PhantomData<S>,
}

impl<S: Scalar, M: Model<S>> RunOutcome<S, M> {
    pub fn from_trainer(summary: RunSummary, trainer: Trainer<S, M>) -> Self {
        let (model, gate, ledger) = trainer.into_parts();
        Self {
            summary,
            model,
            gate,
            ledger,
            _scalar: std::marker::PhantomData,
        }
    }
}

/// Initializes an MLP from `config` (hidden size, seed) and trains it.
pub fn run_experiment<S: Scalar>(
    config: &TrainConfig,
    train: &Dataset<S>,
    test: &Dataset<S>,
    observer: &mut impl RunObserver<S, MlpModel<S>>,
) -> Result<RunOutcome<S, MlpModel<S>>> {
    run_experiment_with_gate(config, train, test, None, observer)
}

/// As [`run_experiment`], optionally starting from a prepared gate.
pub fn run_experiment_with_gate<S: Scalar>(
    config: &TrainConfig,
    train: &Dataset<S>,
    test: &Dataset<S>,
    gate: Option<UpdateGate>,
    observer: &mut impl RunObserver<S, MlpModel<S>>,
) -> Result<RunOutcome<S, MlpModel<S>>> {
    config.validate()?;
    if train.n_classes() != test.n_classes() {
        return Err(Error::InvalidInput(format!(
            "train has {} classes, test {}",
            train.n_classes(),
            test.n_classes()
        )));
    }
    let model = init_mlp(train.n_dims(), config.hidden_dim, train.n_classes(), config.seed)?;
    let mut trainer = Trainer::new(config.clone(), model, train.len())?;
    if let Some(g) = gate {
        trainer = trainer.with_gate(g)?;
    }
    let summary = trainer.run(train, test, observer)?;
    Ok(RunOutcome::from_trainer(summary, trainer))
}
