//! Per-sample update gates: always (backprop), only when wrong (pure lazy),
//! or when wrong now or at any earlier visit (lazy).

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    Backprop,
    PureLazy,
    Lazy,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::Backprop, GateKind::PureLazy, GateKind::Lazy];

    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::Backprop => "backprop",
            GateKind::PureLazy => "pure-lazy",
            GateKind::Lazy => "lazy",
        }
    }
}

impl std::fmt::Display for GateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backprop" => Ok(GateKind::Backprop),
            "pure-lazy" | "pure_lazy" | "purelazy" => Ok(GateKind::PureLazy),
            "lazy" => Ok(GateKind::Lazy),
            other => Err(Error::InvalidInput(format!(
                "unknown rule '{other}' (expected backprop, pure-lazy or lazy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateDecision {
    pub update: bool,
    pub newly_remembered: bool,
}

/// Gate state. Only `Lazy` carries a remember vector, indexed by sample id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateGate {
    kind: GateKind,
    remember: Vec<bool>,
    remembered: usize,
}

impl UpdateGate {
    /// `n_train` sizes the remember vector; it is ignored for non-lazy kinds.
    pub fn new(kind: GateKind, n_train: usize) -> Self {
        let remember = if kind == GateKind::Lazy {
            vec![false; n_train]
        } else {
            Vec::new()
        };
        Self {
            kind,
            remember,
            remembered: 0,
        }
    }

    /// Lazy gate with every sample already remembered.
    pub fn lazy_all_remembered(n_train: usize) -> Self {
        Self {
            kind: GateKind::Lazy,
            remember: vec![true; n_train],
            remembered: n_train,
        }
    }

    /// Lazy gate restored from a list of remembered ids.
    pub fn lazy_from_ids(n_train: usize, ids: &[usize]) -> Result<Self> {
        let mut gate = Self::new(GateKind::Lazy, n_train);
        for &id in ids {
            let slot = gate
                .remember
                .get_mut(id)
                .ok_or(Error::Index { index: id, len: n_train })?;
            if !*slot {
                *slot = true;
                gate.remembered += 1;
            }
        }
        Ok(gate)
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    /// Records a misclassification (lazy) before testing the gate, so a
    /// currently wrong sample always updates.
    pub fn decide(&mut self, sample_id: usize, predicted: usize, target: usize) -> Result<GateDecision> {
        let wrong = predicted != target;
        match self.kind {
            GateKind::Backprop => Ok(GateDecision {
                update: true,
                newly_remembered: false,
            }),
            GateKind::PureLazy => Ok(GateDecision {
                update: wrong,
                newly_remembered: false,
            }),
            GateKind::Lazy => {
                let len = self.remember.len();
                let slot = self
                    .remember
                    .get_mut(sample_id)
                    .ok_or(Error::Index { index: sample_id, len })?;
                let newly_remembered = wrong && !*slot;
                if newly_remembered {
                    *slot = true;
                    self.remembered += 1;
                }
                Ok(GateDecision {
                    update: *slot,
                    newly_remembered,
                })
            }
        }
    }

    pub fn is_remembered(&self, sample_id: usize) -> bool {
        self.remember.get(sample_id).copied().unwrap_or(false)
    }

    pub fn remembered_count(&self) -> usize {
        self.remembered
    }

    pub fn remembered_fraction(&self) -> Result<f64> {
        if self.kind != GateKind::Lazy {
            return Err(Error::InvalidState(format!(
                "remembered fraction requested from a {} gate",
                self.kind
            )));
        }
        if self.remember.is_empty() {
            return Ok(0.0);
        }
        Ok(self.remembered as f64 / self.remember.len() as f64)
    }

    /// Ascending ids of remembered samples (empty for non-lazy gates).
    pub fn remembered_ids(&self) -> Vec<usize> {
        self.remember
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| r.then_some(i))
            .collect()
    }
}

/// Sub-dataset of the remembered samples, keeping their original ids.
pub fn export_coreset<S: Scalar>(gate: &UpdateGate, data: &Dataset<S>) -> Result<Dataset<S>> {
    if gate.kind() != GateKind::Lazy {
        return Err(Error::InvalidState(format!("coreset requested from a {} gate", gate.kind())));
    }
    data.select_ids(&gate.remembered_ids())
}
