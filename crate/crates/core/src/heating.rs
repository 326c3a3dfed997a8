//! Anomalous-heating quanta along a transport trajectory, combined heating
//! budgets, and the shuttle/anomalous crossover.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_trajectory, motional_quanta, ForceMode};
use crate::error::{Error, Result};
use crate::parallel;
use crate::waveforms::{TrajectoryKind, TransportScenario};

/// Quadrature relative tolerance for the heating integral.
pub const QUADRATURE_REL_TOL: f64 = 1e-6;

/// Distance-scaling anomalous-heating model: rate(h) = k / h^4 with
/// k = rate_at_reference * reference_height^4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingModel {
    /// Measured rate at the reference height, quanta/ms.
    pub rate_at_reference: f64,
    /// Reference ion-surface distance, um.
    pub reference_height_um: f64,
}

impl HeatingModel {
    pub fn new(rate_at_reference: f64, reference_height_um: f64) -> Result<Self> {
        if !(rate_at_reference > 0.0 && reference_height_um > 0.0) {
            return Err(Error::InvalidParams(
                "heating rate and reference height must be positive".into(),
            ));
        }
        Ok(Self {
            rate_at_reference,
            reference_height_um,
        })
    }

    /// Scale factor k in quanta um^4 / ms. The distance exponent is fixed at 4.
    pub fn k(&self) -> f64 {
        self.rate_at_reference * self.reference_height_um.powi(4)
    }

    /// Instantaneous rate at height `h_um`, quanta per second.
    pub fn rate_per_s(&self, h_um: f64) -> f64 {
        self.k() / h_um.powi(4) * 1e3
    }
}

/// Quanta accumulated from anomalous heating over `[0, duration_s]` for the
/// height profile `height_um_of(t)`. Composite Simpson with interval halving
/// to [`QUADRATURE_REL_TOL`] relative tolerance.
pub fn anomalous_quanta<F>(height_um_of: F, duration_s: f64, model: &HeatingModel) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(duration_s >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "duration must be nonnegative, got {duration_s}"
        )));
    }
    if duration_s == 0.0 {
        return Ok(0.0);
    }
    let rate = |t: f64| -> Result<f64> {
        let h = height_um_of(t);
        if !(h > 0.0) {
            return Err(Error::Domain(format!(
                "height must stay positive; got {h} um at t = {t:.3e} s"
            )));
        }
        Ok(model.rate_per_s(h))
    };

    let simpson = |n: usize| -> Result<f64> {
        debug_assert!(n % 2 == 0);
        let h = duration_s / n as f64;
        let mut acc = rate(0.0)? + rate(duration_s)?;
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * rate(i as f64 * h)?;
        }
        Ok(acc * h / 3.0)
    };

    let mut n = 8;
    let mut prev = simpson(n)?;
    for _ in 0..18 {
        n *= 2;
        let next = simpson(n)?;
        if (next - prev).abs() <= QUADRATURE_REL_TOL * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Heating budget for one transport duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingBudget {
    pub duration_s: f64,
    /// Transport length in secular cycles, T omega / (2 pi).
    pub cycles: f64,
    pub n_shuttle: f64,
    pub n_anomalous: f64,
    pub n_total: f64,
}

/// Shuttle-induced plus anomalous quanta for each duration in `t_grid`,
/// using the simulated height profile. Grid points are independent; failures
/// are reported per point.
pub fn total_budget(
    scenario: &TransportScenario,
    kind: TrajectoryKind,
    smoothness: f64,
    t_grid: &[f64],
    model: &HeatingModel,
) -> Vec<Result<HeatingBudget>> {
    parallel::map(t_grid, |&t_total| {
        budget_for_duration(scenario, kind, smoothness, t_total, model)
    })
}

/// One budget cell.
pub fn budget_for_duration(
    scenario: &TransportScenario,
    kind: TrajectoryKind,
    smoothness: f64,
    t_total: f64,
    model: &HeatingModel,
) -> Result<HeatingBudget> {
    let protocol = scenario.protocol(kind, t_total, smoothness)?;
    let record = integrate_trajectory(&protocol, ForceMode::Pseudopotential, None)?;
    let q = motional_quanta(&record, record.omega_final_vertical)?;
    let n_anomalous = anomalous_quanta(|t| record.height_um_at(t), t_total, model)?;
    let cycles = t_total * record.omega_final_vertical / std::f64::consts::TAU;
    Ok(HeatingBudget {
        duration_s: t_total,
        cycles,
        n_shuttle: q.n_shuttle,
        n_anomalous,
        n_total: q.n_shuttle + n_anomalous,
    })
}

/// Crossover of the shuttle-induced and anomalous curves, plus the total
/// minimum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossoverReport {
    /// Sign-change intersection (duration, quanta at intersection), if any.
    pub intersection: Option<(f64, f64)>,
    /// Argmin of n_total over the grid: (duration, n_total).
    pub best_total: (f64, f64),
}

/// Locates the duration where the shuttle and anomalous contributions
/// intersect (sign change plus linear interpolation); reports the n_total
/// argmin as the secondary optimum either way.
pub fn crossover(budgets: &[HeatingBudget]) -> Result<CrossoverReport> {
    if budgets.is_empty() {
        return Err(Error::InvalidParams("no budgets".into()));
    }
    if budgets.windows(2).any(|w| w[1].duration_s <= w[0].duration_s) {
        return Err(Error::InvalidParams(
            "budgets must be ascending in duration".into(),
        ));
    }
    let best_total = budgets
        .iter()
        .map(|b| (b.duration_s, b.n_total))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite totals"))
        .expect("nonempty");

    let mut intersection = None;
    for w in budgets.windows(2) {
        let d0 = w[0].n_shuttle - w[0].n_anomalous;
        let d1 = w[1].n_shuttle - w[1].n_anomalous;
        if d0 == 0.0 {
            intersection = Some((w[0].duration_s, w[0].n_shuttle));
            break;
        }
        if d0 * d1 < 0.0 {
            let frac = d0 / (d0 - d1);
            let t_star = w[0].duration_s + frac * (w[1].duration_s - w[0].duration_s);
            let n_star = w[0].n_shuttle + frac * (w[1].n_shuttle - w[0].n_shuttle);
            intersection = Some((t_star, n_star));
            break;
        }
    }
    Ok(CrossoverReport {
        intersection,
        best_total,
    })
}
