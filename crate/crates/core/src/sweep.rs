//! Deterministic N x T parameter sweeps over transport protocols, with
//! per-cell fault isolation and optimal-smoothness selection.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{DriveState, PhysicalConstants};
use crate::geometry::TrapLayout;
use crate::heating::{budget_for_duration, crossover, HeatingBudget, HeatingModel};
use crate::parallel;
use crate::waveforms::{TrajectoryKind, TransportScenario, TransportTarget};

/// Sweep specification; deterministic (no randomness anywhere downstream).
#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub n_values: Vec<f64>,
    pub t_grid_s: Vec<f64>,
    pub kind: TrajectoryKind,
    pub layout: TrapLayout,
    pub drive: DriveState,
    pub consts: PhysicalConstants,
    /// Final central-electrode amplitude of the transport, V.
    pub target_vce: f64,
    pub heating: HeatingModel,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.t_grid_s.is_empty() {
            return Err(Error::InvalidParams(
                "sweep needs nonempty N and T lists".into(),
            ));
        }
        if self.t_grid_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("T grid must be ascending".into()));
        }
        Ok(())
    }
}

/// One (N, T) cell; failures are isolated here rather than poisoning the
/// sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub smoothness: f64,
    pub duration_s: f64,
    pub budget: std::result::Result<HeatingBudget, String>,
}

/// Per-N crossover and total-minimum summary over the successful cells.
#[derive(Debug, Clone, Serialize)]
pub struct PerNSummary {
    pub smoothness: f64,
    /// (T*, quanta) where the shuttle and anomalous curves intersect.
    pub intersection: Option<(f64, f64)>,
    /// (T, n_total) minimizing the total over the grid.
    pub best_total: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalChoice {
    pub smoothness: f64,
    pub duration_s: f64,
    pub n_total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Cells in row-major (N, T) order, keyed by value, independent of
    /// execution order.
    pub cells: Vec<SweepCell>,
    pub per_n: Vec<PerNSummary>,
    pub best: OptimalChoice,
}

impl SweepResult {
    pub fn cell(&self, smoothness: f64, duration_s: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.smoothness == smoothness && c.duration_s == duration_s)
    }

    /// Successful budgets for one N, ascending in duration.
    pub fn budgets_for(&self, smoothness: f64) -> Vec<HeatingBudget> {
        self.cells
            .iter()
            .filter(|c| c.smoothness == smoothness)
            .filter_map(|c| c.budget.as_ref().ok().copied())
            .collect()
    }
}

/// Runs the sweep. Cells are independent pure computations executed through
/// the parallel map; the result is assembled keyed by (N, T) so it does not
/// depend on completion order. Fails only if every cell failed.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let scenario = TransportScenario::new(
        &spec.layout,
        &spec.drive,
        &spec.consts,
        TransportTarget::FinalVce(spec.target_vce),
    )
    .map_err(|e| Error::AllCellsFailed(format!("scenario construction failed: {e}")))?;

    let mut keys = Vec::with_capacity(spec.n_values.len() * spec.t_grid_s.len());
    for &n in &spec.n_values {
        for &t in &spec.t_grid_s {
            keys.push((n, t));
        }
    }
    let outcomes = parallel::map(&keys, |&(n, t)| {
        budget_for_duration(&scenario, spec.kind, n, t, &spec.heating).map_err(|e| e.to_string())
    });

    let cells: Vec<SweepCell> = keys
        .iter()
        .zip(outcomes)
        .map(|(&(n, t), budget)| SweepCell {
            smoothness: n,
            duration_s: t,
            budget,
        })
        .collect();

    if cells.iter().all(|c| c.budget.is_err()) {
        let first = cells
            .iter()
            .find_map(|c| c.budget.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(Error::AllCellsFailed(first));
    }

    let mut per_n = Vec::with_capacity(spec.n_values.len());
    for &n in &spec.n_values {
        let budgets: Vec<HeatingBudget> = cells
            .iter()
            .filter(|c| c.smoothness == n)
            .filter_map(|c| c.budget.as_ref().ok().copied())
            .collect();
        let (intersection, best_total) = match crossover(&budgets) {
            Ok(report) => (report.intersection, Some(report.best_total)),
            Err(_) => (None, None),
        };
        per_n.push(PerNSummary {
            smoothness: n,
            intersection,
            best_total,
        });
    }

    let best = select_optimal(&per_n)
        .ok_or_else(|| Error::AllCellsFailed("no successful column".into()))?;

    Ok(SweepResult {
        spec: spec.clone(),
        cells,
        per_n,
        best,
    })
}

fn select_optimal(per_n: &[PerNSummary]) -> Option<OptimalChoice> {
    let mut best: Option<OptimalChoice> = None;
    for s in per_n {
        let Some((t, n_total)) = s.best_total else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => {
                // ties break toward the smoother (smaller N) protocol
                n_total < b.n_total || (n_total == b.n_total && s.smoothness < b.smoothness)
            }
        };
        if better {
            best = Some(OptimalChoice {
                smoothness: s.smoothness,
                duration_s: t,
                n_total,
            });
        }
    }
    best
}

/// Optimal smoothness over the sweep: per-N minimum of n_total over T, then
/// the argmin across N with ties broken toward smaller N.
pub fn optimal_n(result: &SweepResult) -> (f64, f64, f64) {
    let b = &result.best;
    (b.smoothness, b.duration_s, b.n_total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_breaks_toward_smaller_smoothness() {
        let per_n = vec![
            PerNSummary {
                smoothness: 5.0,
                intersection: None,
                best_total: Some((0.3, 7.0)),
            },
            PerNSummary {
                smoothness: 2.5,
                intersection: None,
                best_total: Some((0.4, 7.0)),
            },
        ];
        let best = select_optimal(&per_n).unwrap();
        assert_eq!(best.smoothness, 2.5);
    }

    #[test]
    fn single_column_wins() {
        let per_n = vec![PerNSummary {
            smoothness: 4.0,
            intersection: None,
            best_total: Some((0.2, 11.0)),
        }];
        let best = select_optimal(&per_n).unwrap();
        assert_eq!(best.smoothness, 4.0);
        assert_eq!(best.n_total, 11.0);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let spec = SweepSpec {
            n_values: vec![2.5],
            t_grid_s: vec![2e-4, 1e-4],
            kind: TrajectoryKind::Tanh,
            layout: crate::presets::reference_layout(),
            drive: crate::presets::reference_drive(0.0),
            consts: crate::presets::reference_ion(),
            target_vce: 100.0,
            heating: crate::presets::reference_heating_model(),
        };
        assert!(spec.validate().is_err());
    }
}
