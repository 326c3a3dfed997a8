//! Physical constants (CODATA 2018) and unit conversions.

/// Atomic mass unit in kg.
pub const AMU_KG: f64 = 1.660_539_066_60e-27;

/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Joules per electronvolt.
pub const EV_J: f64 = ELEMENTARY_CHARGE;

/// Electrode breakdown limit for scheduled voltages, in volts.
pub const VOLTAGE_LIMIT_V: f64 = 500.0;

pub const UM_TO_M: f64 = 1e-6;
pub const M_TO_UM: f64 = 1e6;

#[inline]
pub fn um_to_m(x: f64) -> f64 {
    x * UM_TO_M
}

#[inline]
pub fn m_to_um(x: f64) -> f64 {
    x * M_TO_UM
}
