//! Analytic potentials of rectangular electrode patches and their
//! superposition, plus the RF pseudopotential and the total effective
//! (secular) potential.
//!
//! Each patch held at voltage V contributes, at a point (x, y, z) with y > 0
//! above the plane,
//!
//! ```text
//! phi = V/(2*pi) * [ g(x2-x, z2-z) - g(x1-x, z2-z) - g(x2-x, z1-z) + g(x1-x, z1-z) ]
//! g(X, Z) = atan2(X*Z, y*sqrt(y^2 + X^2 + Z^2))
//! ```
//!
//! The two-argument arctangent keeps the expression continuous for all y > 0.
//! Gradients and Hessians have closed forms (each corner term is harmonic),
//! used as the fast path throughout the crate; the finite-difference engine in
//! [`fd`] provides the independent derivative route.
//!
//! Public entry points take positions in micrometers ([`FieldPoint`]); the
//! `*_si` functions work on SI vectors in meters.

pub mod fd;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::constants::{AMU_KG, ELEMENTARY_CHARGE, HBAR, UM_TO_M, VOLTAGE_LIMIT_V};
use crate::error::{Error, Result};
use crate::geometry::{Electrode, TrapLayout, NODE_CE, NODE_RF};

/// Evaluation point above the trap plane, in micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FieldPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_si(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z) * UM_TO_M
    }

    pub fn from_si(r: Vector3<f64>) -> Self {
        Self {
            x: r.x / UM_TO_M,
            y: r.y / UM_TO_M,
            z: r.z / UM_TO_M,
        }
    }

    fn require_above_plane(&self) -> Result<()> {
        if self.y > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "field point must satisfy y > 0, got y = {} um",
                self.y
            )))
        }
    }
}

/// Instantaneous voltage assignment: RF rail amplitude, central-electrode RF
/// amplitude, RF angular frequency, and DC node voltages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveState {
    /// RF rail amplitude, V.
    pub v_rf: f64,
    /// Central-electrode RF amplitude, V.
    pub v_ce: f64,
    /// RF angular frequency, rad/s.
    pub omega: f64,
    /// DC voltages per node label.
    pub dc_voltages: BTreeMap<String, f64>,
}

impl DriveState {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParams(format!(
                "RF angular frequency must be positive, got {}",
                self.omega
            )));
        }
        let mut check = |label: &str, v: f64| -> Result<()> {
            if v.abs() > VOLTAGE_LIMIT_V {
                Err(Error::VoltageLimit {
                    limit_v: VOLTAGE_LIMIT_V,
                    msg: format!("{label} = {v} V"),
                })
            } else {
                Ok(())
            }
        };
        check("V_rf", self.v_rf)?;
        check("V_ce", self.v_ce)?;
        for (node, v) in &self.dc_voltages {
            check(node, *v)?;
        }
        Ok(())
    }

    pub fn with_vce(&self, v_ce: f64) -> DriveState {
        DriveState {
            v_ce,
            ..self.clone()
        }
    }
}

/// Ion constants used in the pseudopotential and quanta conversions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Ion mass, kg.
    pub mass: f64,
    /// Ion charge, C.
    pub charge: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
}

impl PhysicalConstants {
    pub fn from_amu_e(mass_amu: f64, charge_e: f64) -> Result<Self> {
        let c = Self {
            mass: mass_amu * AMU_KG,
            charge: charge_e * ELEMENTARY_CHARGE,
            hbar: HBAR,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidParams("ion mass must be positive".into()));
        }
        if self.charge == 0.0 {
            return Err(Error::InvalidParams("ion charge must be nonzero".into()));
        }
        Ok(())
    }

    /// Q^2 / (4 m Omega^2), the pseudopotential prefactor.
    pub fn psi_scale(&self, omega: f64) -> f64 {
        self.charge * self.charge / (4.0 * self.mass * omega * omega)
    }
}

/// A patch in SI meters, precompiled for fast evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSi {
    pub x1: f64,
    pub x2: f64,
    pub z1: f64,
    pub z2: f64,
}

impl PatchSi {
    pub fn from_electrode(e: &Electrode) -> Self {
        Self {
            x1: e.x1 * UM_TO_M,
            x2: e.x2 * UM_TO_M,
            z1: e.z1 * UM_TO_M,
            z2: e.z2 * UM_TO_M,
        }
    }

    /// Potential per unit volt at `r` (meters, r.y > 0).
    pub fn unit_potential(&self, r: Vector3<f64>) -> f64 {
        let y = r.y;
        let term = |xc: f64, zc: f64| -> f64 {
            let xx = xc - r.x;
            let zz = zc - r.z;
            let rr = (y * y + xx * xx + zz * zz).sqrt();
            (xx * zz).atan2(y * rr)
        };
        (term(self.x2, self.z2) - term(self.x1, self.z2) - term(self.x2, self.z1)
            + term(self.x1, self.z1))
            / TAU
    }

    /// Gradient of the unit potential, 1/m.
    pub fn unit_gradient(&self, r: Vector3<f64>) -> Vector3<f64> {
        let y = r.y;
        let corner = |xc: f64, zc: f64| -> Vector3<f64> {
            let xx = xc - r.x;
            let zz = zc - r.z;
            let r2 = y * y + xx * xx + zz * zz;
            let rn = r2.sqrt();
            let t = y * y + xx * xx;
            let s = y * y + zz * zz;
            Vector3::new(
                -y * zz / (rn * t),
                -xx * zz * (r2 + y * y) / (rn * t * s),
                -y * xx / (rn * s),
            )
        };
        (corner(self.x2, self.z2) - corner(self.x1, self.z2) - corner(self.x2, self.z1)
            + corner(self.x1, self.z1))
            / TAU
    }

    /// Hessian of the unit potential, 1/m^2. Exactly symmetric and traceless.
    pub fn unit_hessian(&self, r: Vector3<f64>) -> Matrix3<f64> {
        let y = r.y;
        let corner = |xc: f64, zc: f64| -> Matrix3<f64> {
            let xx = xc - r.x;
            let zz = zc - r.z;
            let r2 = y * y + xx * xx + zz * zz;
            let rn = r2.sqrt();
            let r3 = r2 * rn;
            let t = y * y + xx * xx;
            let s = y * y + zz * zz;
            let rad2 = xx * xx + zz * zz;
            let h_xx = -xx * y * zz * (t + 2.0 * r2) / (r3 * t * t);
            let h_zz = -xx * y * zz * (s + 2.0 * r2) / (r3 * s * s);
            let h_yy = -(h_xx + h_zz);
            let h_xz = y / r3;
            let h_xy = -zz * (t * rad2 - 2.0 * y * y * r2) / (r3 * t * t);
            let h_yz = -xx * (s * rad2 - 2.0 * y * y * r2) / (r3 * s * s);
            Matrix3::new(h_xx, h_xy, h_xz, h_xy, h_yy, h_yz, h_xz, h_yz, h_zz)
        };
        (corner(self.x2, self.z2) - corner(self.x1, self.z2) - corner(self.x2, self.z1)
            + corner(self.x1, self.z1))
            / TAU
    }
}

/// Layout compiled into per-node SI patch lists; immutable and cheap to share.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    nodes: Vec<(String, Vec<PatchSi>)>,
}

impl FieldModel {
    pub fn new(layout: &TrapLayout) -> Self {
        let mut by_node: BTreeMap<String, Vec<PatchSi>> = BTreeMap::new();
        for e in &layout.electrodes {
            by_node
                .entry(e.node.clone())
                .or_default()
                .push(PatchSi::from_electrode(e));
        }
        Self {
            nodes: by_node.into_iter().collect(),
        }
    }

    pub fn node_labels(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|(n, _)| n.as_str())
    }

    pub fn patches(&self, node: &str) -> Result<&[PatchSi]> {
        self.nodes
            .iter()
            .find(|(n, _)| n == node)
            .map(|(_, p)| p.as_slice())
            .ok_or_else(|| Error::UnknownNode(node.to_string()))
    }

    /// Per-unit-volt potential of one node at `r` (SI).
    pub fn basis_si(&self, node: &str, r: Vector3<f64>) -> Result<f64> {
        Ok(self
            .patches(node)?
            .iter()
            .map(|p| p.unit_potential(r))
            .sum())
    }

    pub fn basis_gradient_si(&self, node: &str, r: Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self
            .patches(node)?
            .iter()
            .map(|p| p.unit_gradient(r))
            .sum())
    }

    pub fn basis_hessian_si(&self, node: &str, r: Vector3<f64>) -> Result<Matrix3<f64>> {
        Ok(self
            .patches(node)?
            .iter()
            .map(|p| p.unit_hessian(r))
            .sum())
    }

    /// Superposed potential for an arbitrary node-voltage assignment.
    pub fn potential_si(&self, voltages: &BTreeMap<String, f64>, r: Vector3<f64>) -> Result<f64> {
        let mut phi = 0.0;
        for (node, v) in voltages {
            phi += v * self.basis_si(node, r)?;
        }
        Ok(phi)
    }
}

/// Potential of a single patch at `applied_volts`, evaluated at `p`.
pub fn patch_potential(e: &Electrode, applied_volts: f64, p: &FieldPoint) -> Result<f64> {
    p.require_above_plane()?;
    Ok(applied_volts * PatchSi::from_electrode(e).unit_potential(p.to_si()))
}

/// Per-unit-volt potential of a voltage node (sum over its patches).
pub fn node_basis_potential(layout: &TrapLayout, node: &str, p: &FieldPoint) -> Result<f64> {
    p.require_above_plane()?;
    if !layout.has_node(node) {
        return Err(Error::UnknownNode(node.to_string()));
    }
    let mut phi = 0.0;
    for e in layout.electrodes_of(node) {
        phi += PatchSi::from_electrode(e).unit_potential(p.to_si());
    }
    Ok(phi)
}

// ---- RF / DC superpositions -------------------------------------------------

/// RF-node potential at full amplitude: rails at V_rf plus the central
/// electrode at V_ce. Volts.
pub fn rf_potential_si(model: &FieldModel, drive: &DriveState, r: Vector3<f64>) -> Result<f64> {
    let mut phi = drive.v_rf * model.basis_si(NODE_RF, r)?;
    if drive.v_ce != 0.0 {
        phi += drive.v_ce * model.basis_si(NODE_CE, r)?;
    }
    Ok(phi)
}

pub fn rf_gradient_si(
    model: &FieldModel,
    drive: &DriveState,
    r: Vector3<f64>,
) -> Result<Vector3<f64>> {
    let mut g = drive.v_rf * model.basis_gradient_si(NODE_RF, r)?;
    if drive.v_ce != 0.0 {
        g += drive.v_ce * model.basis_gradient_si(NODE_CE, r)?;
    }
    Ok(g)
}

pub fn rf_hessian_si(
    model: &FieldModel,
    drive: &DriveState,
    r: Vector3<f64>,
) -> Result<Matrix3<f64>> {
    let mut h = drive.v_rf * model.basis_hessian_si(NODE_RF, r)?;
    if drive.v_ce != 0.0 {
        h += drive.v_ce * model.basis_hessian_si(NODE_CE, r)?;
    }
    Ok(h)
}

pub fn dc_potential_si(model: &FieldModel, drive: &DriveState, r: Vector3<f64>) -> Result<f64> {
    model.potential_si(&drive.dc_voltages, r)
}

pub fn dc_gradient_si(
    model: &FieldModel,
    drive: &DriveState,
    r: Vector3<f64>,
) -> Result<Vector3<f64>> {
    let mut g = Vector3::zeros();
    for (node, v) in &drive.dc_voltages {
        g += *v * model.basis_gradient_si(node, r)?;
    }
    Ok(g)
}

pub fn dc_hessian_si(
    model: &FieldModel,
    drive: &DriveState,
    r: Vector3<f64>,
) -> Result<Matrix3<f64>> {
    let mut h = Matrix3::zeros();
    for (node, v) in &drive.dc_voltages {
        h += *v * model.basis_hessian_si(node, r)?;
    }
    Ok(h)
}

// ---- Pseudopotential and total effective potential ---------------------------

/// Ponderomotive pseudopotential Q^2 |grad phi_RF|^2 / (4 m Omega^2), in J.
pub fn pseudopotential_si(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    r: Vector3<f64>,
) -> Result<f64> {
    let g = rf_gradient_si(model, drive, r)?;
    Ok(consts.psi_scale(drive.omega) * g.norm_squared())
}

pub fn pseudopotential_gradient_si(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    r: Vector3<f64>,
) -> Result<Vector3<f64>> {
    let g = rf_gradient_si(model, drive, r)?;
    let h = rf_hessian_si(model, drive, r)?;
    Ok(2.0 * consts.psi_scale(drive.omega) * (h * g))
}

/// Total effective (secular) potential U = Psi + Q phi_DC, in J.
pub fn total_potential_si(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    r: Vector3<f64>,
) -> Result<f64> {
    Ok(pseudopotential_si(model, drive, consts, r)?
        + consts.charge * dc_potential_si(model, drive, r)?)
}

pub fn total_gradient_si(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    r: Vector3<f64>,
) -> Result<Vector3<f64>> {
    Ok(pseudopotential_gradient_si(model, drive, consts, r)?
        + consts.charge * dc_gradient_si(model, drive, r)?)
}

/// Hessian of U by central differences of the analytic gradient with one
/// Richardson extrapolation level; symmetrized.
pub fn total_hessian_si(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    r: Vector3<f64>,
) -> Result<Matrix3<f64>> {
    let h = fd::step_for(r.y)?;
    let grad = |p: Vector3<f64>| total_gradient_si(model, drive, consts, p);
    let mut m = Matrix3::zeros();
    for axis in 0..3 {
        let mut e = Vector3::zeros();
        e[axis] = 1.0;
        let d_full = (grad(r + h * e)? - grad(r - h * e)?) / (2.0 * h);
        let d_half = (grad(r + 0.5 * h * e)? - grad(r - 0.5 * h * e)?) / h;
        let col = (4.0 * d_half - d_full) / 3.0;
        m.set_column(axis, &col);
    }
    Ok(0.5 * (m + m.transpose()))
}

/// Pseudopotential at `p` (micrometers), J.
pub fn pseudopotential(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    p: &FieldPoint,
) -> Result<f64> {
    p.require_above_plane()?;
    if !(drive.omega > 0.0) {
        return Err(Error::InvalidParams("Omega must be positive".into()));
    }
    pseudopotential_si(model, drive, consts, p.to_si())
}

/// Total effective potential at `p` (micrometers), J.
pub fn total_effective_potential(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    p: &FieldPoint,
) -> Result<f64> {
    p.require_above_plane()?;
    total_potential_si(model, drive, consts, p.to_si())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ElectrodeRole;
    use approx::assert_relative_eq;

    fn square_patch(half: f64) -> Electrode {
        Electrode {
            id: "sq".into(),
            role: ElectrodeRole::RfRail,
            x1: -half,
            x2: half,
            z1: -half,
            z2: half,
            node: "n".into(),
        }
    }

    #[test]
    fn square_patch_closed_form() {
        // A square patch of half-width equal to the evaluation height gives
        // phi = V/3 above its center: each corner arctangent is pi/6.
        let e = square_patch(100.0);
        let phi = patch_potential(&e, 100.0, &FieldPoint::new(0.0, 100.0, 0.0)).unwrap();
        assert_relative_eq!(phi, 100.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn full_plane_limit() {
        let y = 1.0;
        let e = square_patch(1e4 * y);
        let phi = patch_potential(&e, 1.0, &FieldPoint::new(0.0, y, 0.0)).unwrap();
        assert!((phi - 1.0).abs() < 1e-3, "phi = {phi}");
    }

    #[test]
    fn far_field_decay() {
        let e = square_patch(100.0);
        let phi = patch_potential(&e, 1.0, &FieldPoint::new(0.0, 1e6 * 200.0, 0.0)).unwrap();
        assert!(phi.abs() < 1e-6);
    }

    #[test]
    fn rejects_points_on_or_below_plane() {
        let e = square_patch(10.0);
        assert!(patch_potential(&e, 1.0, &FieldPoint::new(0.0, 0.0, 0.0)).is_err());
        assert!(patch_potential(&e, 1.0, &FieldPoint::new(0.0, -1.0, 0.0)).is_err());
    }

    #[test]
    fn boundary_limit_above_interior_and_ground() {
        let e = square_patch(100.0);
        let y = 1e-4 * 200.0; // 1e-4 of the patch size
        let inside = patch_potential(&e, 5.0, &FieldPoint::new(0.0, y, 0.0)).unwrap();
        assert!((inside - 5.0).abs() < 5.0 * 1e-3, "inside = {inside}");
        let outside = patch_potential(&e, 5.0, &FieldPoint::new(500.0, y, 0.0)).unwrap();
        assert!(outside.abs() < 5.0 * 1e-3, "outside = {outside}");
    }

    #[test]
    fn analytic_gradient_matches_fd() {
        let p = PatchSi {
            x1: -120e-6,
            x2: 250e-6,
            z1: -80e-6,
            z2: 400e-6,
        };
        let pts = [
            Vector3::new(30e-6, 90e-6, -20e-6),
            Vector3::new(-200e-6, 140e-6, 500e-6),
            Vector3::new(0.0, 40e-6, 0.0),
        ];
        for r in pts {
            let g = p.unit_gradient(r);
            let h = 1e-9;
            for axis in 0..3 {
                let mut e = Vector3::zeros();
                e[axis] = 1.0;
                let fd = (p.unit_potential(r + h * e) - p.unit_potential(r - h * e)) / (2.0 * h);
                assert_relative_eq!(g[axis], fd, max_relative = 1e-5, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn analytic_hessian_matches_fd_and_is_traceless() {
        let p = PatchSi {
            x1: -120e-6,
            x2: 250e-6,
            z1: -80e-6,
            z2: 400e-6,
        };
        let r = Vector3::new(25e-6, 110e-6, 60e-6);
        let hess = p.unit_hessian(r);
        assert!(hess.trace().abs() < 1e-9 * hess.norm());
        assert_eq!(hess, hess.transpose());
        let h = 2e-8;
        for i in 0..3 {
            for j in 0..3 {
                let mut ei = Vector3::zeros();
                ei[i] = 1.0;
                let mut ej = Vector3::zeros();
                ej[j] = 1.0;
                let fd = (p.unit_potential(r + h * ei + h * ej)
                    - p.unit_potential(r + h * ei - h * ej)
                    - p.unit_potential(r - h * ei + h * ej)
                    + p.unit_potential(r - h * ei - h * ej))
                    / (4.0 * h * h);
                assert_relative_eq!(hess[(i, j)], fd, max_relative = 2e-4, epsilon = 1e-2);
            }
        }
    }

    #[test]
    fn unknown_node_rejected() {
        let layout = crate::presets::reference_layout();
        assert!(matches!(
            node_basis_potential(&layout, "nope", &FieldPoint::new(0.0, 50.0, 0.0)),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn node_basis_is_sum_of_patches() {
        let layout = crate::presets::reference_layout();
        let p = FieldPoint::new(0.0, 100.0, 0.0);
        let rails = node_basis_potential(&layout, NODE_RF, &p).unwrap();
        let singles: f64 = layout
            .electrodes_of(NODE_RF)
            .iter()
            .map(|e| patch_potential(e, 1.0, &p).unwrap())
            .sum();
        assert_relative_eq!(rails, singles, max_relative = 1e-14);
        // mirror patches seen from the symmetry plane: 2x a single patch
        let one = patch_potential(layout.electrodes_of(NODE_RF)[0], 1.0, &p).unwrap();
        assert_relative_eq!(rails, 2.0 * one, max_relative = 1e-12);
    }

    #[test]
    fn pseudopotential_voltage_and_frequency_scaling() {
        let layout = crate::presets::reference_layout();
        let model = FieldModel::new(&layout);
        let consts = PhysicalConstants::from_amu_e(171.0, 1.0).unwrap();
        let drive = DriveState {
            v_rf: 200.0,
            v_ce: 0.0,
            omega: TAU * 22e6,
            dc_voltages: BTreeMap::new(),
        };
        let p = FieldPoint::new(3.0, 95.0, 10.0);
        let base = pseudopotential(&model, &drive, &consts, &p).unwrap();
        assert!(base >= 0.0);

        let doubled = DriveState {
            v_rf: 400.0,
            ..drive.clone()
        };
        let psi2 = pseudopotential(&model, &doubled, &consts, &p).unwrap();
        assert_relative_eq!(psi2, 4.0 * base, max_relative = 1e-14);

        let faster = DriveState {
            omega: 3.0 * drive.omega,
            ..drive.clone()
        };
        let psi3 = pseudopotential(&model, &faster, &consts, &p).unwrap();
        assert_relative_eq!(psi3, base / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn total_reduces_to_pseudopotential_without_dc() {
        let layout = crate::presets::reference_layout();
        let model = FieldModel::new(&layout);
        let consts = PhysicalConstants::from_amu_e(171.0, 1.0).unwrap();
        let mut dc = BTreeMap::new();
        dc.insert(crate::geometry::NODE_DC_PLUS.to_string(), 0.0);
        dc.insert(crate::geometry::NODE_DC_MINUS.to_string(), 0.0);
        let drive = DriveState {
            v_rf: 200.0,
            v_ce: 30.0,
            omega: TAU * 22e6,
            dc_voltages: dc,
        };
        let p = FieldPoint::new(-4.0, 120.0, 25.0);
        let u = total_effective_potential(&model, &drive, &consts, &p).unwrap();
        let psi = pseudopotential(&model, &drive, &consts, &p).unwrap();
        assert_relative_eq!(u, psi, max_relative = 1e-14);
    }

    #[test]
    fn dc_part_linear_in_charge() {
        let layout = crate::presets::reference_layout();
        let model = FieldModel::new(&layout);
        let mut dc = BTreeMap::new();
        dc.insert(crate::geometry::NODE_DC_PLUS.to_string(), 6.0);
        dc.insert(crate::geometry::NODE_DC_MINUS.to_string(), -8.4);
        let drive = DriveState {
            v_rf: 0.0,
            v_ce: 0.0,
            omega: TAU * 22e6,
            dc_voltages: dc,
        };
        let plus = PhysicalConstants::from_amu_e(171.0, 1.0).unwrap();
        let minus = PhysicalConstants::from_amu_e(171.0, -1.0).unwrap();
        let p = FieldPoint::new(10.0, 80.0, -40.0);
        let u_plus = total_effective_potential(&model, &drive, &plus, &p).unwrap();
        let u_minus = total_effective_potential(&model, &drive, &minus, &p).unwrap();
        assert_relative_eq!(u_plus, -u_minus, max_relative = 1e-14);
    }

    #[test]
    fn mirror_symmetry_zeroes_lateral_gradient() {
        let layout = crate::presets::reference_layout();
        let model = FieldModel::new(&layout);
        let drive = crate::presets::reference_drive(0.0);
        let consts = PhysicalConstants::from_amu_e(171.0, 1.0).unwrap();
        let r = FieldPoint::new(0.0, 110.0, 0.0).to_si();
        let g = total_gradient_si(&model, &drive, &consts, r).unwrap();
        let scale = g.norm().max(1e-30);
        assert!(
            g.x.abs() / scale < 1e-9 || g.x.abs() < 1e-25,
            "gx = {}",
            g.x
        );
    }
}
