//! Finite-difference derivative engine for superposed patch potentials.
//!
//! Central differences with one Richardson extrapolation level, step
//! 1e-3 of the evaluation height (auto-shrunk near the plane). This is the
//! contracted derivative route; the analytic formulas in the parent module
//! are the fast path and the two are cross-checked in tests.

use nalgebra::{Matrix3, Vector3};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fields::{FieldModel, FieldPoint};

/// Relative FD step (fraction of the point height).
pub const FD_STEP_REL: f64 = 1e-3;

/// Smallest admissible absolute step, meters.
pub const FD_STEP_MIN: f64 = 1e-12;

/// FD step for a point at height `y` (meters); errors out when the point is
/// too close to the plane for any admissible step.
pub fn step_for(y: f64) -> Result<f64> {
    if y <= 2.0 * FD_STEP_MIN {
        return Err(Error::Domain(format!(
            "point height {y:.3e} m too small for finite-difference step"
        )));
    }
    // shrink so that y - h stays well above the plane
    Ok((FD_STEP_REL * y).min(0.45 * y).max(FD_STEP_MIN))
}

/// Potential, gradient (V/m), and Hessian (V/m^2) of the superposed node
/// potential at `p`, all by finite differences.
pub fn field_and_hessian(
    model: &FieldModel,
    node_voltages: &BTreeMap<String, f64>,
    p: &FieldPoint,
) -> Result<(f64, Vector3<f64>, Matrix3<f64>)> {
    let r = p.to_si();
    if r.y <= 0.0 {
        return Err(Error::Domain(format!(
            "field point must satisfy y > 0, got y = {} um",
            p.y
        )));
    }
    // validate nodes once so the closure below cannot fail
    for node in node_voltages.keys() {
        model.patches(node)?;
    }
    let phi = |r: Vector3<f64>| -> f64 {
        model
            .potential_si(node_voltages, r)
            .expect("nodes validated")
    };
    let h = step_for(r.y)?;

    let f0 = phi(r);
    let mut grad = Vector3::zeros();
    let mut hess = Matrix3::zeros();

    let unit = |axis: usize| -> Vector3<f64> {
        let mut e = Vector3::zeros();
        e[axis] = 1.0;
        e
    };

    for axis in 0..3 {
        let e = unit(axis);
        let fp = phi(r + h * e);
        let fm = phi(r - h * e);
        let fp2 = phi(r + 0.5 * h * e);
        let fm2 = phi(r - 0.5 * h * e);

        let d_full = (fp - fm) / (2.0 * h);
        let d_half = (fp2 - fm2) / h;
        grad[axis] = (4.0 * d_half - d_full) / 3.0;

        let s_full = (fp - 2.0 * f0 + fm) / (h * h);
        let s_half = (fp2 - 2.0 * f0 + fm2) / (0.25 * h * h);
        hess[(axis, axis)] = (4.0 * s_half - s_full) / 3.0;
    }

    for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let ei = unit(i);
        let ej = unit(j);
        let mixed = |d: f64| -> f64 {
            (phi(r + d * ei + d * ej) - phi(r + d * ei - d * ej) - phi(r - d * ei + d * ej)
                + phi(r - d * ei - d * ej))
                / (4.0 * d * d)
        };
        let m_full = mixed(h);
        let m_half = mixed(0.5 * h);
        let m = (4.0 * m_half - m_full) / 3.0;
        hess[(i, j)] = m;
        hess[(j, i)] = m;
    }

    Ok((f0, grad, hess))
}
