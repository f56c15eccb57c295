//! Path-energy bookkeeping: `M = Σ_t Σ_i |w_i(t) − w_i(t−1)|`, its straight-line
//! lower bound `M_min = Σ_i |w_i(T) − w_i(0)|`, and their ratio.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{l1_distance, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    m_total: f64,
    initial_params: Vec<f64>,
    per_sample_energy: Vec<f64>,
    update_count: u64,
    step_count: u64,
}

/// Snapshot of the energy figures at one point of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub m: f64,
    pub m_min: f64,
    /// `None` when the path moved but ended where it started.
    pub inefficiency: Option<f64>,
}

impl EnergyLedger {
    pub fn new<S: Scalar>(initial_params: &[S], n_train: usize) -> Self {
        Self {
            m_total: 0.0,
            initial_params: initial_params.iter().map(|p| p.as_f64()).collect(),
            per_sample_energy: vec![0.0; n_train],
            update_count: 0,
            step_count: 0,
        }
    }

    pub fn record_step(&mut self) {
        self.step_count += 1;
    }

    /// Charges a step's L1 weight change to the sample that caused it.
    pub fn record_update(&mut self, sample_id: usize, delta_l1: f64) -> Result<()> {
        if !(delta_l1 >= 0.0) || !delta_l1.is_finite() {
            return Err(Error::Contract(format!("energy delta must be finite and >= 0, got {delta_l1}")));
        }
        let len = self.per_sample_energy.len();
        let slot = self
            .per_sample_energy
            .get_mut(sample_id)
            .ok_or(Error::Index { index: sample_id, len })?;
        *slot += delta_l1;
        self.m_total += delta_l1;
        self.update_count += 1;
        Ok(())
    }

    pub fn m_total(&self) -> f64 {
        self.m_total
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn per_sample_energy(&self) -> &[f64] {
        &self.per_sample_energy
    }

    pub fn initial_params(&self) -> &[f64] {
        &self.initial_params
    }

    pub fn minimum_energy<S: Scalar>(&self, current_params: &[S]) -> Result<f64> {
        if current_params.len() != self.initial_params.len() {
            return Err(Error::Shape(format!(
                "{} parameters against a snapshot of {}",
                current_params.len(),
                self.initial_params.len()
            )));
        }
        let current: Vec<f64> = current_params.iter().map(|p| p.as_f64()).collect();
        Ok(l1_distance(&current, &self.initial_params))
    }

    pub fn report<S: Scalar>(&self, current_params: &[S]) -> Result<EfficiencyReport> {
        let m_min = self.minimum_energy(current_params)?;
        // M >= M_min holds exactly in real arithmetic; allow for the two sums'
        // different rounding.
        let m_min = if m_min > self.m_total && m_min - self.m_total <= 1e-9 * m_min.max(1.0) {
            self.m_total
        } else {
            m_min
        };
        Ok(EfficiencyReport {
            m: self.m_total,
            m_min,
            inefficiency: inefficiency(self.m_total, m_min)?,
        })
    }

    /// `sample_id,energy` rows.
    pub fn write_per_sample_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sample_id", "energy"])?;
        for (id, e) in self.per_sample_energy.iter().enumerate() {
            w.write_record([id.to_string(), format!("{e:?}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn write_per_sample_json(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer(&mut w, &self.per_sample_energy)?;
        Ok(())
    }
}

/// `m / m_min`; `Some(1)` for a path that never moved, `None` for one that
/// returned to its start.
pub fn inefficiency(m: f64, m_min: f64) -> Result<Option<f64>> {
    if !(m_min >= 0.0) || !(m >= m_min) {
        return Err(Error::Contract(format!("inefficiency needs m >= m_min >= 0, got m={m}, m_min={m_min}")));
    }
    if m_min > 0.0 {
        Ok(Some(m / m_min))
    } else if m == 0.0 {
        Ok(Some(1.0))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additivity() {
        let mut l = EnergyLedger::new(&[0.0f64; 2], 6);
        l.record_update(4, 0.3).unwrap();
        l.record_update(4, 0.2).unwrap();
        assert_eq!(l.per_sample_energy()[4], 0.5);
        assert_eq!(l.m_total(), 0.5);
        assert_eq!(l.update_count(), 2);
    }

    #[test]
    fn empty_ledger() {
        let l = EnergyLedger::new(&[1.0f64, 2.0], 3);
        assert_eq!(l.m_total(), 0.0);
        assert_eq!(l.minimum_energy(&[1.0f64, 2.0]).unwrap(), 0.0);
        let r = l.report(&[1.0f64, 2.0]).unwrap();
        assert_eq!(r.inefficiency, Some(1.0));
    }

    #[test]
    fn negative_delta_is_contract_violation() {
        let mut l = EnergyLedger::new(&[0.0f64], 1);
        assert!(matches!(l.record_update(0, -0.1), Err(Error::Contract(_))));
        assert!(matches!(l.record_update(0, f64::NAN), Err(Error::Contract(_))));
        assert!(matches!(l.record_update(3, 0.1), Err(Error::Index { .. })));
    }

    #[test]
    fn single_sgd_step_energy() {
        // one step of lr * g changes each weight by exactly lr * |g_i| here
        let lr = 0.5f64;
        let g = [0.25f64, -1.0, 2.0];
        let w0 = [1.0f64, 1.0, 1.0];
        let w1: Vec<f64> = w0.iter().zip(&g).map(|(w, g)| w - lr * g).collect();
        let mut l = EnergyLedger::new(&w0, 1);
        l.record_update(0, l1_distance(&w1, &w0)).unwrap();
        let expected: f64 = g.iter().map(|g| lr * g.abs()).sum();
        assert_eq!(l.m_total(), expected);
    }

    #[test]
    fn straight_and_backtracking_paths() {
        let mut l = EnergyLedger::new(&[0.0f64, 0.0], 1);
        l.record_update(0, 0.1 + 0.2).unwrap();
        let m_min = l.minimum_energy(&[0.1f64, -0.2]).unwrap();
        assert!((m_min - 0.3).abs() < 1e-15);
        assert!((m_min - l.m_total()).abs() < 1e-15);
        let r = l.report(&[0.1f64, -0.2]).unwrap();
        assert!((r.inefficiency.unwrap() - 1.0).abs() < 1e-12);

        let mut l = EnergyLedger::new(&[0.0f64], 1);
        l.record_update(0, 0.1).unwrap();
        l.record_update(0, 0.1).unwrap();
        assert_eq!(l.minimum_energy(&[0.0f64]).unwrap(), 0.0);
        assert_eq!(l.m_total(), 0.2);
        assert_eq!(l.report(&[0.0f64]).unwrap().inefficiency, None);
    }

    #[test]
    fn shape_mismatch() {
        let l = EnergyLedger::new(&[0.0f64, 0.0], 1);
        assert!(matches!(l.minimum_energy(&[0.0f64]), Err(Error::Shape(_))));
    }

    #[test]
    fn inefficiency_cases() {
        assert_eq!(inefficiency(0.3, 0.3).unwrap(), Some(1.0));
        assert_eq!(inefficiency(0.2, 0.0).unwrap(), None);
        assert_eq!(inefficiency(0.0, 0.0).unwrap(), Some(1.0));
        assert_eq!(inefficiency(1.0, 0.25).unwrap(), Some(4.0));
        assert!(matches!(inefficiency(0.1, 0.2), Err(Error::Contract(_))));
    }

    proptest::proptest! {
        #[test]
        fn ledger_bounds_hold_for_random_walks(steps in proptest::collection::vec((0usize..4, -1.0f64..1.0, -1.0f64..1.0), 0..100)) {
            let mut w = [0.3f64, -0.7];
            let mut l = EnergyLedger::new(&w, 4);
            for (id, a, b) in steps {
                let old = w;
                w[0] += a;
                w[1] += b;
                l.record_update(id, l1_distance(&w, &old)).unwrap();
                let r = l.report(&w).unwrap();
                proptest::prop_assert!(r.m >= r.m_min);
                if let Some(ineff) = r.inefficiency {
                    proptest::prop_assert!(ineff >= 1.0);
                }
                let sum: f64 = l.per_sample_energy().iter().sum();
                proptest::prop_assert!((sum - l.m_total()).abs() <= 1e-9 * l.m_total().max(1e-300));
            }
        }
    }
}
