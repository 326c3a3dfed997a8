//! Reference scenario: the default geometry, drive, and ion used by the CLI
//! defaults, the test suites, and the reproduction runs.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::fields::{DriveState, PhysicalConstants};
use crate::geometry::{build_trap, LayoutParams, TrapLayout, NODE_DC_MINUS, NODE_DC_PLUS};
use crate::heating::HeatingModel;

/// Default ion species (atomic mass units). Chosen by the calibration scan in
/// `tests/calibration.rs` as the species that best reproduces the reference
/// height/frequency curves; see notes/REPRODUCTION.md.
pub const DEFAULT_ION_MASS_AMU: f64 = 171.0;

/// Default ion charge, elementary charges.
pub const DEFAULT_ION_CHARGE_E: f64 = 1.0;

/// RF rail amplitude, V.
pub const DEFAULT_V_RF: f64 = 200.0;

/// RF drive frequency, MHz (Omega = 2 pi f).
pub const DEFAULT_RF_FREQ_MHZ: f64 = 22.0;

/// Endcap (positive) DC bias, V.
pub const DEFAULT_DC_PLUS: f64 = 6.0;

/// Adjustable (negative) DC bias, V.
pub const DEFAULT_DC_MINUS: f64 = -8.4;

/// Central-electrode amplitude at the end of the reference transport, V.
pub const DEFAULT_VCE_FINAL: f64 = 100.0;

pub fn reference_params() -> LayoutParams {
    LayoutParams {
        rf_width_um: 300.0,
        central_width_um: 85.0,
        dc_width_um: 310.0,
        rail_length_um: 3000.0,
        dc_segments_per_side: 3,
    }
}

pub fn reference_layout() -> TrapLayout {
    build_trap(&reference_params()).expect("reference layout is valid")
}

pub fn reference_drive(v_ce: f64) -> DriveState {
    let mut dc = BTreeMap::new();
    dc.insert(NODE_DC_PLUS.to_string(), DEFAULT_DC_PLUS);
    dc.insert(NODE_DC_MINUS.to_string(), DEFAULT_DC_MINUS);
    DriveState {
        v_rf: DEFAULT_V_RF,
        v_ce,
        omega: TAU * DEFAULT_RF_FREQ_MHZ * 1e6,
        dc_voltages: dc,
    }
}

pub fn reference_ion() -> PhysicalConstants {
    PhysicalConstants::from_amu_e(DEFAULT_ION_MASS_AMU, DEFAULT_ION_CHARGE_E)
        .expect("default ion is valid")
}

pub fn reference_heating_model() -> HeatingModel {
    HeatingModel::new(3.1, 134.0).expect("default heating model")
}

/// Candidate species for the calibration scan, (label, mass in amu).
pub const SPECIES_TABLE: &[(&str, f64)] = &[
    ("Be-9", 9.012),
    ("Mg-24", 23.985),
    ("Ca-40", 39.963),
    ("Sr-88", 87.906),
    ("Cd-114", 113.903),
    ("Ba-138", 137.905),
    ("Yb-171", 170.936),
    ("Yb-174", 173.939),
    ("Hg-199", 198.968),
    ("Ra-226", 226.025),
];
