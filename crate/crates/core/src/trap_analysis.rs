//! Trapping-minimum location, secular frequencies, trap depth, Mathieu
//! stability parameters, and the control-voltage characterization curve.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::constants::{EV_J, M_TO_UM, UM_TO_M};
use crate::error::{Error, Result};
use crate::fields::{
    dc_hessian_si, rf_hessian_si, total_gradient_si, total_hessian_si, total_potential_si,
    DriveState, FieldModel, FieldPoint, PhysicalConstants,
};

const NEWTON_MAX_ITER: usize = 120;
const NEWTON_TOL_REL: f64 = 1e-9;

/// Eigenvector is classified axial when |z component| exceeds this.
const AXIAL_DOMINANCE: f64 = 0.7;

/// Secular modes sorted by axis character. `axes` columns follow the same
/// order as `omega`: lateral radial (x-dominant), vertical radial
/// (y-dominant), axial (z-dominant).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecularModes {
    /// Angular frequencies, rad/s: [lateral, vertical, axial].
    pub omega: [f64; 3],
    /// Orthonormal principal axes, one column per mode.
    #[serde(skip)]
    pub axes: Matrix3<f64>,
}

impl SecularModes {
    pub fn lateral(&self) -> f64 {
        self.omega[0]
    }

    /// The vertical (transported) radial mode.
    pub fn vertical(&self) -> f64 {
        self.omega[1]
    }

    pub fn axial(&self) -> f64 {
        self.omega[2]
    }

    pub fn min_omega(&self) -> f64 {
        self.omega.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_omega(&self) -> f64 {
        self.omega.iter().cloned().fold(0.0, f64::max)
    }
}

/// Mathieu stability parameters per principal axis (same ordering as
/// [`SecularModes`]).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityParams {
    pub q: [f64; 3],
    pub a: [f64; 3],
}

impl StabilityParams {
    /// Lowest-stability-region check in the low-q form; reported, not
    /// enforced.
    pub fn is_stable(&self) -> bool {
        self.q
            .iter()
            .zip(&self.a)
            .all(|(q, a)| q.abs() < 0.9 && *a < q * q / 2.0)
    }
}

/// A characterized trapping point.
#[derive(Debug, Clone, Serialize)]
pub struct TrapPoint {
    /// Minimum position, micrometers.
    pub position: FieldPoint,
    /// Ion height above the plane (= position.y), micrometers.
    pub ion_height_um: f64,
    pub modes: SecularModes,
    /// Depth of the escape barrier, eV.
    pub trap_depth_ev: f64,
    pub mathieu: StabilityParams,
}

/// One sample of the control-voltage characterization curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub v_ce: f64,
    pub height_um: f64,
    /// Vertical (transported) radial mode, rad/s.
    pub omega_radial: f64,
    pub omega_axial: f64,
    pub depth_ev: f64,
}

fn solve_step(hess: &Matrix3<f64>, grad: &Vector3<f64>) -> Option<Vector3<f64>> {
    // Newton step on a Levenberg-shifted Hessian when it is not positive
    // definite, so the step always points downhill.
    let mut shift = 0.0;
    let eig_min = hess.symmetric_eigenvalues().min();
    if eig_min <= 0.0 {
        shift = -eig_min + 1e-3 * hess.norm().max(f64::MIN_POSITIVE);
    }
    let shifted = hess + Matrix3::identity() * shift;
    shifted.cholesky().map(|ch| -(ch.solve(grad)))
}

fn newton_minimize<G, H>(grad_fn: G, hess_fn: H, guess: Vector3<f64>, y_cap: f64) -> Result<Vector3<f64>>
where
    G: Fn(Vector3<f64>) -> Result<Vector3<f64>>,
    H: Fn(Vector3<f64>) -> Result<Matrix3<f64>>,
{
    let mut r = guess;
    let h0 = hess_fn(r)?;
    let curvature_scale = h0.iter().map(|e| e.abs()).fold(0.0_f64, f64::max);
    let tol = NEWTON_TOL_REL * curvature_scale * guess.y;

    let mut g = grad_fn(r)?;
    for _ in 0..NEWTON_MAX_ITER {
        if !(r.y > 0.0 && r.y < y_cap) {
            return Err(Error::NoMinimum(format!(
                "iteration left the search region at y = {:.3} um",
                r.y * M_TO_UM
            )));
        }
        if g.norm() < tol {
            let h = hess_fn(r)?;
            if h.symmetric_eigenvalues().min() > 0.0 {
                return Ok(r);
            }
            return Err(Error::NoMinimum(
                "converged to a stationary point that is not a minimum".into(),
            ));
        }
        let h = hess_fn(r)?;
        let step = solve_step(&h, &g)
            .ok_or_else(|| Error::NoMinimum("Hessian solve failed".into()))?;

        // damped acceptance: require the gradient norm to shrink
        let mut accepted = false;
        let mut alpha = 1.0;
        for _ in 0..12 {
            let cand = r + alpha * step;
            if cand.y > 0.0 {
                if let Ok(gc) = grad_fn(cand) {
                    if gc.norm() < g.norm() {
                        r = cand;
                        g = gc;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoMinimum("Newton iteration stalled".into()));
        }
    }
    Err(Error::NoMinimum("Newton did not converge".into()))
}

fn golden_line_min<F>(f: F, mut a: f64, mut b: f64, evals: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_895;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..evals {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Coordinate-descent fallback: golden-section line minimizations along each
/// axis with a shrinking bracket.
fn coordinate_descent<F>(f: F, start: Vector3<f64>, width: f64) -> Vector3<f64>
where
    F: Fn(Vector3<f64>) -> f64,
{
    let mut r = start;
    let mut w = width;
    for _ in 0..24 {
        for axis in 0..3 {
            let mut e = Vector3::zeros();
            e[axis] = 1.0;
            // keep the bracket above the plane when stepping along y
            let lo = if axis == 1 {
                (-w).max(0.01 * start.y - r.y)
            } else {
                -w
            };
            let best = golden_line_min(|s| f(r + s * e), lo, w, 40);
            r += best * e;
        }
        w *= 0.5;
    }
    r
}

/// Locates a strict local minimum of the total effective potential near
/// `guess` (micrometers). Newton iteration with step damping; falls back to
/// coordinate-descent grid refinement when Newton diverges.
pub fn find_minimum(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    guess: &FieldPoint,
) -> Result<FieldPoint> {
    if !(guess.y > 0.0) {
        return Err(Error::Domain("guess must satisfy y > 0".into()));
    }
    let g0 = guess.to_si();
    let y_cap = 10.0 * g0.y;
    let grad = |r: Vector3<f64>| total_gradient_si(model, drive, consts, r);
    let hess = |r: Vector3<f64>| total_hessian_si(model, drive, consts, r);

    match newton_minimize(&grad, &hess, g0, y_cap) {
        Ok(r) => Ok(FieldPoint::from_si(r)),
        Err(first_err) => {
            // grid refinement restart
            let value = |r: Vector3<f64>| {
                total_potential_si(model, drive, consts, r).unwrap_or(f64::INFINITY)
            };
            let seed = coordinate_descent(value, g0, 30.0 * UM_TO_M);
            if !(seed.y > 0.0 && seed.y < y_cap) {
                return Err(first_err);
            }
            let r = newton_minimize(&grad, &hess, seed, y_cap)?;
            Ok(FieldPoint::from_si(r))
        }
    }
}

/// Minimum of the pseudopotential alone (the RF nil): the DC contribution is
/// switched off and the same minimizer is used.
pub fn find_rf_nil(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    guess: &FieldPoint,
) -> Result<FieldPoint> {
    let mut rf_only = drive.clone();
    for v in rf_only.dc_voltages.values_mut() {
        *v = 0.0;
    }
    find_minimum(model, &rf_only, consts, guess)
}

fn classify_modes(eigvals: [f64; 3], eigvecs: [Vector3<f64>; 3], mass: f64) -> Result<SecularModes> {
    if eigvals.iter().any(|l| *l <= 0.0) {
        return Err(Error::NotAMinimum(format!(
            "Hessian eigenvalues {:?} are not all positive",
            eigvals
        )));
    }
    let mut idx = [0usize, 1, 2];
    // axial: largest |z| component (must dominate), then vertical by |y|
    idx.sort_by(|&a, &b| {
        eigvecs[a].z.abs().partial_cmp(&eigvecs[b].z.abs()).unwrap()
    });
    let axial = idx[2];
    let (rad_a, rad_b) = (idx[0], idx[1]);
    let (lateral, vertical) = if eigvecs[rad_a].y.abs() > eigvecs[rad_b].y.abs() {
        (rad_b, rad_a)
    } else {
        (rad_a, rad_b)
    };
    let _ = AXIAL_DOMINANCE; // dominance is a reporting convention; ordering by |z| matches it
    let omega = |i: usize| (eigvals[i] / mass).sqrt();
    let mut axes = Matrix3::zeros();
    axes.set_column(0, &eigvecs[lateral]);
    axes.set_column(1, &eigvecs[vertical]);
    axes.set_column(2, &eigvecs[axial]);
    Ok(SecularModes {
        omega: [omega(lateral), omega(vertical), omega(axial)],
        axes,
    })
}

/// Secular frequencies and principal axes from the Hessian of U at a
/// converged minimum.
pub fn secular_frequencies(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    at: &FieldPoint,
) -> Result<SecularModes> {
    let h = total_hessian_si(model, drive, consts, at.to_si())?;
    let se = h.symmetric_eigen();
    let vals = [se.eigenvalues[0], se.eigenvalues[1], se.eigenvalues[2]];
    let vecs = [
        se.eigenvectors.column(0).into_owned(),
        se.eigenvectors.column(1).into_owned(),
        se.eigenvectors.column(2).into_owned(),
    ];
    classify_modes(vals, vecs, consts.mass)
}

/// Depth of the lowest escape barrier in the x-y plane through the minimum,
/// in eV. Coarse ray scan followed by golden-section refinement of the
/// lowest barrier.
pub fn trap_depth(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    at: &FieldPoint,
) -> Result<f64> {
    let r0 = at.to_si();
    let u_min = total_potential_si(model, drive, consts, r0)?;
    let h = r0.y;
    let s_max = 10.0 * h;
    let y_floor = 0.01 * h;
    let n_rays = 64;
    let n_steps = 400;

    let u_at = |r: Vector3<f64>| -> f64 {
        total_potential_si(model, drive, consts, r).unwrap_or(f64::INFINITY)
    };

    let mut best: Option<(f64, Vector3<f64>, f64, f64)> = None; // (barrier, dir, s*, ds)
    for k in 0..n_rays {
        let theta = std::f64::consts::TAU * k as f64 / n_rays as f64;
        let dir = Vector3::new(theta.cos(), theta.sin(), 0.0);
        let ds = s_max / n_steps as f64;
        let mut ray_max = u_min;
        let mut s_at_max = 0.0;
        for i in 1..=n_steps {
            let s = i as f64 * ds;
            let r = r0 + s * dir;
            if r.y < y_floor {
                break;
            }
            let u = u_at(r);
            if u > ray_max {
                ray_max = u;
                s_at_max = s;
            }
        }
        if best.as_ref().map_or(true, |(b, ..)| ray_max < *b) {
            best = Some((ray_max, dir, s_at_max, ds));
        }
    }

    let (barrier, dir, s_star, ds) = best.expect("at least one ray");
    if s_star == 0.0 {
        return Err(Error::Unbounded {
            search_radius_um: s_max * M_TO_UM,
        });
    }
    // refine the saddle along the escape ray
    let refined = -golden_line_min(
        |s| -u_at(r0 + s * dir),
        (s_star - ds).max(0.0),
        s_star + ds,
        60,
    );
    let s_ref = refined;
    let u_barrier = u_at(r0 + s_ref * dir).max(barrier);
    let depth = (u_barrier - u_min) / EV_J;
    if depth <= 0.0 {
        return Err(Error::Unbounded {
            search_radius_um: s_max * M_TO_UM,
        });
    }
    Ok(depth)
}

/// Mathieu stability parameters along the principal axes of U at the minimum:
/// q from the full-amplitude RF curvature, a from the DC curvature.
pub fn mathieu_parameters(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    at: &FieldPoint,
) -> Result<StabilityParams> {
    let r = at.to_si();
    // principal axes of U where it is confining; coordinate axes otherwise
    // (e.g. all RF amplitudes zero, where q is identically zero anyway)
    let axes = match secular_frequencies(model, drive, consts, at) {
        Ok(modes) => modes.axes,
        Err(_) => Matrix3::identity(),
    };
    let h_rf = rf_hessian_si(model, drive, r)?;
    let h_dc = dc_hessian_si(model, drive, r)?;
    let denom = consts.mass * drive.omega * drive.omega;
    let mut q = [0.0; 3];
    let mut a = [0.0; 3];
    for i in 0..3 {
        let u = axes.column(i);
        q[i] = 2.0 * consts.charge * (u.transpose() * h_rf * u)[(0, 0)] / denom;
        a[i] = 4.0 * consts.charge * (u.transpose() * h_dc * u)[(0, 0)] / denom;
    }
    Ok(StabilityParams { q, a })
}

/// Full characterization of the minimum near `guess`.
pub fn characterize(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    guess: &FieldPoint,
) -> Result<TrapPoint> {
    let position = find_minimum(model, drive, consts, guess)?;
    let modes = secular_frequencies(model, drive, consts, &position)?;
    let depth = trap_depth(model, drive, consts, &position)?;
    let mathieu = mathieu_parameters(model, drive, consts, &position)?;
    Ok(TrapPoint {
        position,
        ion_height_um: position.y,
        modes,
        trap_depth_ev: depth,
        mathieu,
    })
}

/// Characterization curve over central-electrode amplitudes. Each sample is
/// seeded with the previous minimum (continuation), so samples are processed
/// in order; parallelize across independent curves instead.
pub fn height_vs_vce(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    vce_samples: &[f64],
    guess: &FieldPoint,
) -> Result<Vec<CurvePoint>> {
    for v in vce_samples {
        if *v < 0.0 || *v > drive.v_rf / 2.0 {
            return Err(Error::InvalidParams(format!(
                "V_ce sample {v} outside [0, V_rf/2]"
            )));
        }
    }
    let mut out = Vec::with_capacity(vce_samples.len());
    let mut seed = *guess;
    for &v_ce in vce_samples {
        let d = drive.with_vce(v_ce);
        let pos = find_minimum(model, &d, consts, &seed)
            .map_err(|e| Error::NoMinimum(format!("at V_ce = {v_ce} V: {e}")))?;
        let modes = secular_frequencies(model, &d, consts, &pos)
            .map_err(|e| Error::NoMinimum(format!("at V_ce = {v_ce} V: {e}")))?;
        let depth = trap_depth(model, &d, consts, &pos)
            .map_err(|e| Error::NoMinimum(format!("at V_ce = {v_ce} V: {e}")))?;
        out.push(CurvePoint {
            v_ce,
            height_um: pos.y,
            omega_radial: modes.vertical(),
            omega_axial: modes.axial(),
            depth_ev: depth,
        });
        seed = pos;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;
    use std::f64::consts::TAU;

    fn setup() -> (FieldModel, DriveState, PhysicalConstants) {
        let layout = presets::reference_layout();
        (
            FieldModel::new(&layout),
            presets::reference_drive(0.0),
            presets::reference_ion(),
        )
    }

    #[test]
    fn minimum_sits_on_symmetry_plane() {
        let (model, drive, consts) = setup();
        let p = find_minimum(&model, &drive, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        assert!(p.x.abs() < 1e-3, "x = {}", p.x);
        assert!(p.z.abs() < 1e-3, "z = {}", p.z);
        assert!(p.y > 0.0);
    }

    #[test]
    fn minimum_is_strict_local_minimum() {
        let (model, drive, consts) = setup();
        let p = find_minimum(&model, &drive, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        let g = total_gradient_si(&model, &drive, &consts, p.to_si()).unwrap();
        let h = total_hessian_si(&model, &drive, &consts, p.to_si()).unwrap();
        let tol = 1e-8 * h.iter().map(|e| e.abs()).fold(0.0_f64, f64::max) * p.to_si().y;
        assert!(g.norm() < tol, "|grad| = {}", g.norm());
        assert!(h.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn rf_nil_independent_of_voltage_scale() {
        // scaling V_rf by c and Omega by c leaves the pseudopotential
        // invariant, so the minimum must not move
        let (model, drive, consts) = setup();
        let mut rf_only = drive.clone();
        for v in rf_only.dc_voltages.values_mut() {
            *v = 0.0;
        }
        let p1 = find_minimum(&model, &rf_only, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        let scaled = DriveState {
            v_rf: rf_only.v_rf * 2.5,
            omega: rf_only.omega * 2.5,
            ..rf_only.clone()
        };
        let p2 = find_minimum(&model, &scaled, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        assert!((p1.y - p2.y).abs() < 1e-3, "{} vs {}", p1.y, p2.y);
    }

    #[test]
    fn pure_rf_frequency_linear_in_voltage() {
        let (model, drive, consts) = setup();
        let mut rf_only = drive.clone();
        for v in rf_only.dc_voltages.values_mut() {
            *v = 0.0;
        }
        let p = find_minimum(&model, &rf_only, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        let m1 = secular_frequencies(&model, &rf_only, &consts, &p).unwrap();
        let doubled = DriveState {
            v_rf: 2.0 * rf_only.v_rf,
            ..rf_only.clone()
        };
        let p2 = find_minimum(&model, &doubled, &consts, &p).unwrap();
        let m2 = secular_frequencies(&model, &doubled, &consts, &p2).unwrap();
        assert_relative_eq!(m2.vertical(), 2.0 * m1.vertical(), max_relative = 1e-3);
        assert_relative_eq!(m2.lateral(), 2.0 * m1.lateral(), max_relative = 1e-3);
    }

    #[test]
    fn depth_scales_quadratically_without_dc() {
        let (model, drive, consts) = setup();
        let mut rf_only = drive.clone();
        for v in rf_only.dc_voltages.values_mut() {
            *v = 0.0;
        }
        let p = find_minimum(&model, &rf_only, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        let d1 = trap_depth(&model, &rf_only, &consts, &p).unwrap();
        let doubled = DriveState {
            v_rf: 2.0 * rf_only.v_rf,
            ..rf_only.clone()
        };
        let d2 = trap_depth(&model, &doubled, &consts, &p).unwrap();
        assert_relative_eq!(d2, 4.0 * d1, max_relative = 1e-2);
    }

    #[test]
    fn dc_only_radial_plane_is_unbounded() {
        let (model, drive, consts) = setup();
        let dc_only = DriveState {
            v_rf: 0.0,
            v_ce: 0.0,
            ..drive.clone()
        };
        // evaluate depth at the RF trapping height even though only DC is on
        let at = FieldPoint::new(0.0, 120.0, 0.0);
        assert!(matches!(
            trap_depth(&model, &dc_only, &consts, &at),
            Err(Error::Unbounded { .. })
        ));
    }

    #[test]
    fn mathieu_zero_without_rf() {
        let (model, drive, consts) = setup();
        let p = find_minimum(&model, &drive, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        let off = DriveState {
            v_rf: 0.0,
            v_ce: 0.0,
            ..drive.clone()
        };
        let st = mathieu_parameters(&model, &off, &consts, &p).unwrap();
        for i in 0..3 {
            assert_eq!(st.q[i], 0.0);
        }
    }

    #[test]
    fn mathieu_q_linear_in_v_rf() {
        let (model, drive, consts) = setup();
        let p = find_minimum(&model, &drive, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        let q1 = mathieu_parameters(&model, &drive, &consts, &p).unwrap();
        let d2 = DriveState {
            v_rf: 2.0 * drive.v_rf,
            ..drive.clone()
        };
        let q2 = mathieu_parameters(&model, &d2, &consts, &p).unwrap();
        for i in 0..3 {
            assert_relative_eq!(q2.q[i], 2.0 * q1.q[i], max_relative = 1e-9);
        }
    }

    #[test]
    fn low_q_frequency_cross_check() {
        // with DC off and |q| < 0.3 the pseudopotential frequency obeys
        // omega ~ q Omega / (2 sqrt(2)) to within 5%
        let layout = presets::reference_layout();
        let model = FieldModel::new(&layout);
        let consts = presets::reference_ion();
        let drive = DriveState {
            v_rf: 120.0,
            v_ce: 0.0,
            omega: TAU * 22e6,
            dc_voltages: BTreeMap::new(),
        };
        let p = find_minimum(&model, &drive, &consts, &FieldPoint::new(0.0, 120.0, 0.0)).unwrap();
        let modes = secular_frequencies(&model, &drive, &consts, &p).unwrap();
        let st = mathieu_parameters(&model, &drive, &consts, &p).unwrap();
        for i in 0..2 {
            let q = st.q[i].abs();
            assert!(q < 0.3, "q = {q}");
            let omega_pred = q * drive.omega / (2.0 * std::f64::consts::SQRT_2);
            assert_relative_eq!(modes.omega[i], omega_pred, max_relative = 0.05);
        }
    }

    #[test]
    fn curve_rejects_out_of_range_samples() {
        let (model, drive, consts) = setup();
        let err = height_vs_vce(
            &model,
            &drive,
            &consts,
            &[0.0, 150.0],
            &FieldPoint::new(0.0, 120.0, 0.0),
        );
        assert!(err.is_err());
    }
}
