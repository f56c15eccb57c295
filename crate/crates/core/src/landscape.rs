//! Loss/accuracy surfaces and weight trajectories for the two-weight toy task.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::gating::GateKind;
use crate::model::{heaviside, LinearToyModel, ToyTargets};
use crate::scalar::Scalar;
use crate::trainer::{MetricsRecord, RunObserver, StepEvent, TrainConfig, Trainer};

/// Passes over the toy dataset per trajectory run.
pub const TOY_EPOCHS: usize = 8;

/// Frozen starting weights, derived with `examples/derive_presets.rs` on the
/// default two-cloud task (seed 0), signed targets and [`TOY_EPOCHS`]:
///
/// 1. about half the samples misclassified: pure-lazy runs nearly straight
///    onto the 100% terrace while backprop winds on towards the loss minimum
///    (inefficiency ratio about 2.9).
/// 2. every sample misclassified: all rules take the same coarse path (lazy
///    reproduces backprop exactly), pure-lazy just stops earlier.
/// 3. 99% correct but far from the loss minimum: pure-lazy climbs to 100% in a
///    handful of updates, backprop follows the loss gradient down to lower
///    accuracy (96.5% after the budget).
pub const PRESET_INITIAL_CONDITIONS: [[f64; 2]; 3] = [[0.0, 0.75], [-3.0, -0.25], [1.75, 2.5]];

pub fn preset_initial_conditions() -> [[f64; 2]; 3] {
    PRESET_INITIAL_CONDITIONS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub resolution: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, resolution: usize) -> Self {
        Self { min, max, resolution }
    }

    /// Grid coordinate `i`; endpoints inclusive.
    pub fn value(&self, i: usize) -> f64 {
        if self.resolution == 1 {
            return self.min;
        }
        self.min + (self.max - self.min) * i as f64 / (self.resolution - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.resolution == 0 || !self.min.is_finite() || !self.max.is_finite() || self.max < self.min {
            return Err(Error::InvalidSpec(format!(
                "bad grid axis [{}, {}] x {}",
                self.min, self.max, self.resolution
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub w1: AxisRange,
    pub w2: AxisRange,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            w1: AxisRange::new(-3.0, 3.0, 301),
            w2: AxisRange::new(-3.0, 3.0, 301),
        }
    }
}

/// Sampled surfaces; cell `(i, j)` (w1 index, w2 index) lives at `i * w2.resolution + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub spec: GridSpec,
    pub loss_values: Vec<f64>,
    pub accuracy_values: Vec<f64>,
}

impl SurfaceGrid {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.spec.w2.resolution + j
    }

    pub fn loss(&self, i: usize, j: usize) -> f64 {
        self.loss_values[self.index(i, j)]
    }

    pub fn accuracy(&self, i: usize, j: usize) -> f64 {
        self.accuracy_values[self.index(i, j)]
    }

    /// Cell whose coordinates are nearest to `w`, if inside the grid.
    pub fn nearest_cell(&self, w: [f64; 2]) -> Option<(usize, usize)> {
        let locate = |axis: &AxisRange, v: f64| -> Option<usize> {
            if v < axis.min || v > axis.max {
                return None;
            }
            if axis.resolution == 1 {
                return Some(0);
            }
            let step = (axis.max - axis.min) / (axis.resolution - 1) as f64;
            Some((((v - axis.min) / step).round() as usize).min(axis.resolution - 1))
        };
        Some((locate(&self.spec.w1, w[0])?, locate(&self.spec.w2, w[1])?))
    }

    /// Grid nodes at the corners of the cell containing `w` (fewer on a
    /// degenerate axis or when `w` sits exactly on a node line).
    pub fn enclosing_nodes(&self, w: [f64; 2]) -> Option<Vec<(usize, usize)>> {
        let bracket = |axis: &AxisRange, v: f64| -> Option<Vec<usize>> {
            if v < axis.min || v > axis.max {
                return None;
            }
            if axis.resolution == 1 {
                return Some(vec![0]);
            }
            let step = (axis.max - axis.min) / (axis.resolution - 1) as f64;
            let t = (v - axis.min) / step;
            let lo = (t.floor() as usize).min(axis.resolution - 1);
            let hi = (t.ceil() as usize).min(axis.resolution - 1);
            Some(if lo == hi { vec![lo] } else { vec![lo, hi] })
        };
        let (is, js) = (bracket(&self.spec.w1, w[0])?, bracket(&self.spec.w2, w[1])?);
        Some(is.iter().flat_map(|&i| js.iter().map(move |&j| (i, j))).collect())
    }

    /// `w1,w2,loss,accuracy` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["w1", "w2", "loss", "accuracy"])?;
        for i in 0..self.spec.w1.resolution {
            for j in 0..self.spec.w2.resolution {
                w.write_record([
                    format!("{:?}", self.spec.w1.value(i)),
                    format!("{:?}", self.spec.w2.value(j)),
                    format!("{:?}", self.loss(i, j)),
                    format!("{:?}", self.accuracy(i, j)),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Mean toy MSE and accuracy of `H(w·x)` at every grid point.
pub fn sample_surface<S: Scalar>(data: &Dataset<S>, grid: &GridSpec, targets: ToyTargets) -> Result<SurfaceGrid> {
    if data.n_dims() != 2 {
        return Err(Error::InvalidInput(format!(
            "surface sampling needs 2-dimensional inputs, got {}",
            data.n_dims()
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidInput("surface sampling on an empty dataset".into()));
    }
    grid.w1.validate()?;
    grid.w2.validate()?;
    let res2 = grid.w2.resolution;
    let n = data.len() as f64;
    let cells: Vec<(f64, f64)> = (0..grid.w1.resolution * res2)
        .into_par_iter()
        .map(|cell| {
            let w = [
                S::from_f64_lossy(grid.w1.value(cell / res2)),
                S::from_f64_lossy(grid.w2.value(cell % res2)),
            ];
            let mut loss = 0.0;
            let mut correct = 0usize;
            for (_, x, label) in data.iter() {
                let h = w[0] * x[0] + w[1] * x[1];
                let r = (h - targets.value::<S>(label)).as_f64();
                loss += r * r;
                correct += usize::from(heaviside(h) == label);
            }
            (loss / n, correct as f64 / n)
        })
        .collect();
    let (loss_values, accuracy_values) = cells.into_iter().unzip();
    Ok(SurfaceGrid {
        spec: *grid,
        loss_values,
        accuracy_values,
    })
}

/// Weight path of one toy run: the initial point plus one point per
/// presented sample, updated or not.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rule: GateKind,
    pub initial_condition_id: usize,
    pub points: Vec<[f64; 2]>,
    pub per_sample_energy: Vec<f64>,
    pub m_total: f64,
    pub update_count: u64,
    pub records: Vec<MetricsRecord>,
}

impl Trajectory {
    pub fn final_point(&self) -> [f64; 2] {
        *self.points.last().expect("trajectory always holds the initial point")
    }

    /// `Σ_t |p_t − p_{t−1}|_1`
    pub fn path_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|p| (p[1][0] - p[0][0]).abs() + (p[1][1] - p[0][1]).abs())
            .sum()
    }

    /// `step,w1,w2` rows; step 0 is the initial point.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "w1", "w2"])?;
        for (step, p) in self.points.iter().enumerate() {
            w.write_record([step.to_string(), format!("{:?}", p[0]), format!("{:?}", p[1])])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

struct PathRecorder {
    points: Vec<[f64; 2]>,
    records: Vec<MetricsRecord>,
}

impl<S: Scalar> RunObserver<S, LinearToyModel<S>> for PathRecorder {
    fn on_record(&mut self, record: &MetricsRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }

    fn on_step(&mut self, model: &LinearToyModel<S>, _event: &StepEvent) {
        self.points.push([model.w[0].as_f64(), model.w[1].as_f64()]);
    }
}

/// Trains the toy model from `initial_w` on `data` (which doubles as the
/// evaluation set) and records the weight path.
pub fn trace_run<S: Scalar>(
    config: &TrainConfig,
    data: &Dataset<S>,
    initial_w: [f64; 2],
    targets: ToyTargets,
    initial_condition_id: usize,
) -> Result<Trajectory> {
    if data.n_dims() != 2 {
        return Err(Error::InvalidInput(format!("toy runs need 2-dimensional inputs, got {}", data.n_dims())));
    }
    let model = LinearToyModel::new([S::from_f64_lossy(initial_w[0]), S::from_f64_lossy(initial_w[1])], targets);
    let mut trainer = Trainer::new(config.clone(), model, data.len())?;
    let mut recorder = PathRecorder {
        points: vec![[
            S::from_f64_lossy(initial_w[0]).as_f64(),
            S::from_f64_lossy(initial_w[1]).as_f64(),
        ]],
        records: Vec::new(),
    };
    let summary = trainer.run(data, data, &mut recorder)?;
    if let Some(err) = summary.error {
        return Err(Error::Numeric(err));
    }
    Ok(Trajectory {
        rule: config.rule,
        initial_condition_id,
        points: recorder.points,
        per_sample_energy: trainer.ledger().per_sample_energy().to_vec(),
        m_total: trainer.ledger().m_total(),
        update_count: trainer.ledger().update_count(),
        records: recorder.records,
    })
}

/// Final accuracy of the model sitting at `w`.
pub fn accuracy_at<S: Scalar>(data: &Dataset<S>, w: [f64; 2]) -> f64 {
    let m = LinearToyModel::new([S::from_f64_lossy(w[0]), S::from_f64_lossy(w[1])], ToyTargets::Signed);
    let correct = data.iter().filter(|(_, x, l)| m.predict(x) == *l).count();
    correct as f64 / data.len().max(1) as f64
}
