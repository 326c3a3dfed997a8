//! Time-dependent voltage schedules for vertical shuttling: trajectory
//! shapes, hyperbolic-tangent voltage ramps, DC compensation, and protocol
//! assembly.

use serde::{Deserialize, Serialize};

use crate::constants::VOLTAGE_LIMIT_V;
use crate::error::{Error, Result};
use crate::fields::{dc_gradient_si, DriveState, FieldModel, FieldPoint, PhysicalConstants};
use crate::geometry::{TrapLayout, NODE_DC_MINUS};
use crate::interp::MonotoneCubic;
use crate::parallel;
use crate::trap_analysis::find_rf_nil;

/// Compensation root-find tolerance, volts.
pub const COMPENSATION_TOL_V: f64 = 1e-4;

/// Compensation root-find bracket, volts.
pub const COMPENSATION_BRACKET: (f64, f64) = (-20.0, 0.0);

/// Knot count for the compensation/height tables.
pub const COMPENSATION_KNOTS: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Linear,
    Sinusoidal,
    Tanh,
}

impl std::str::FromStr for TrajectoryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "sinusoidal" => Ok(Self::Sinusoidal),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::InvalidParams(format!(
                "unknown trajectory kind '{other}' (expected linear|sinusoidal|tanh)"
            ))),
        }
    }
}

/// Displacement along the transport direction at time `t`, with endpoints
/// clamped outside [0, T].
///
/// The tanh shape is `(L/2) [tanh(N (2t - T)/T) + tanh N] / tanh N`; its
/// t = 0, T/2, T values are exact by the odd symmetry of tanh. The linear
/// shape is `L t / T` and the sinusoidal one `(L/2)(1 - cos(pi t / T))`.
pub fn trajectory_position(
    kind: TrajectoryKind,
    distance: f64,
    duration: f64,
    smoothness: f64,
    t: f64,
) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(Error::InvalidProtocol(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if kind == TrajectoryKind::Tanh && !(smoothness > 0.0) {
        return Err(Error::InvalidProtocol(format!(
            "tanh smoothness must be positive, got {smoothness}"
        )));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    if t >= duration {
        return Ok(distance);
    }
    let frac = match kind {
        TrajectoryKind::Linear => t / duration,
        TrajectoryKind::Sinusoidal => {
            0.5 * (1.0 - (std::f64::consts::PI * t / duration).cos())
        }
        TrajectoryKind::Tanh => {
            let tn = smoothness.tanh();
            let arg = smoothness * (2.0 * t - duration) / duration;
            0.5 * (arg.tanh() + tn) / tn
        }
    };
    Ok(distance * frac)
}

/// Hyperbolic-tangent step between two voltage levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageRamp {
    /// Initial level, V.
    pub start_v: f64,
    /// Final level, V.
    pub end_v: f64,
    /// Transition center time, s.
    pub center_s: f64,
    /// Transition steepness, s.
    pub steepness_s: f64,
}

impl VoltageRamp {
    pub fn validate(&self) -> Result<()> {
        if !(self.steepness_s > 0.0) {
            return Err(Error::InvalidProtocol(format!(
                "ramp steepness must be positive, got {}",
                self.steepness_s
            )));
        }
        Ok(())
    }
}

/// `V(t) = tanh((t - center)/steepness) (a2 - a1)/2 + (a1 + a2)/2`.
pub fn ramp_voltage(ramp: &VoltageRamp, t: f64) -> f64 {
    ((t - ramp.center_s) / ramp.steepness_s).tanh() * (ramp.end_v - ramp.start_v) / 2.0
        + (ramp.start_v + ramp.end_v) / 2.0
}

/// Finds the adjustable-node DC voltage that nulls the vertical+axial DC
/// field at the instantaneous pseudopotential minimum, with the endcap node
/// held at its configured bias. Bisection to bracket, then secant, tolerance
/// [`COMPENSATION_TOL_V`].
pub fn compensate_dc(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    v_ce: f64,
    guess: &FieldPoint,
) -> Result<f64> {
    let d = drive.with_vce(v_ce);
    let nil = find_rf_nil(model, &d, consts, guess)?;
    compensate_dc_at(model, &d, &nil)
}

/// Compensation root at a fixed evaluation point.
fn compensate_dc_at(model: &FieldModel, drive: &DriveState, nil: &FieldPoint) -> Result<f64> {
    let r = nil.to_si();
    let residual = |v_minus: f64| -> Result<f64> {
        let mut d = drive.clone();
        d.dc_voltages.insert(NODE_DC_MINUS.to_string(), v_minus);
        let g = dc_gradient_si(model, &d, r)?;
        Ok(g.y + g.z)
    };

    let (mut lo, mut hi) = COMPENSATION_BRACKET;
    let mut f_lo = residual(lo)?;
    let f_hi = residual(hi)?;
    if f_lo * f_hi > 0.0 {
        return Err(Error::NoRoot {
            lo,
            hi,
            msg: format!("residual field does not change sign ({f_lo:.3e} vs {f_hi:.3e})"),
        });
    }
    // bisection to a narrow bracket
    let mut f_hi = f_hi;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let f_mid = residual(mid)?;
        if f_lo * f_mid <= 0.0 {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
        if hi - lo < 0.25 {
            break;
        }
    }
    // secant polish
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f_lo, f_hi);
    for _ in 0..40 {
        if (fb - fa).abs() < f64::MIN_POSITIVE {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        let fc = residual(c)?;
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        if (b - a).abs() < COMPENSATION_TOL_V {
            break;
        }
    }
    Ok(b)
}

/// DC compensation and nil height tabulated against the central-electrode
/// amplitude; evaluated by monotone cubic interpolation during integration so
/// the root find runs only at the knots.
#[derive(Debug, Clone)]
pub enum CompensationTable {
    /// Degenerate range (identity protocols).
    Constant { v_ce: f64, dc_minus: f64, height_um: f64 },
    Table {
        dc_minus: MonotoneCubic,
        height_um: MonotoneCubic,
    },
}

impl CompensationTable {
    /// Builds the table over `[v_lo, v_hi]`. Knot root-finds are independent
    /// and run through the parallel map.
    pub fn build(
        model: &FieldModel,
        drive: &DriveState,
        consts: &PhysicalConstants,
        v_lo: f64,
        v_hi: f64,
        guess: &FieldPoint,
    ) -> Result<Self> {
        assert!(v_hi >= v_lo);
        if v_hi - v_lo < 1e-9 {
            let nil = find_rf_nil(model, &drive.with_vce(v_lo), consts, guess)
                .map_err(|e| Error::UnreachableTarget(e.to_string()))?;
            let dc = compensate_dc_at(model, &drive.with_vce(v_lo), &nil)?;
            return Ok(Self::Constant {
                v_ce: v_lo,
                dc_minus: dc,
                height_um: nil.y,
            });
        }

        // nil positions by continuation (ordered), then independent root finds
        let n = COMPENSATION_KNOTS;
        let knots: Vec<f64> = (0..n)
            .map(|i| v_lo + (v_hi - v_lo) * i as f64 / (n - 1) as f64)
            .collect();
        let mut nils = Vec::with_capacity(n);
        let mut seed = *guess;
        for &v in &knots {
            let nil = find_rf_nil(model, &drive.with_vce(v), consts, &seed)
                .map_err(|e| Error::UnreachableTarget(format!("no minimum at V_ce = {v} V: {e}")))?;
            nils.push(nil);
            seed = nil;
        }
        let work: Vec<(f64, FieldPoint)> = knots.iter().cloned().zip(nils.iter().cloned()).collect();
        let roots = parallel::map(&work, |(v, nil)| {
            compensate_dc_at(model, &drive.with_vce(*v), nil)
        });
        let mut dc_vals = Vec::with_capacity(n);
        for r in roots {
            dc_vals.push(r?);
        }
        let heights: Vec<f64> = nils.iter().map(|p| p.y).collect();
        Ok(Self::Table {
            dc_minus: MonotoneCubic::new(knots.clone(), dc_vals)?,
            height_um: MonotoneCubic::new(knots, heights)?,
        })
    }

    pub fn dc_minus_at(&self, v_ce: f64) -> f64 {
        match self {
            Self::Constant { dc_minus, .. } => *dc_minus,
            Self::Table { dc_minus, .. } => dc_minus.eval(v_ce),
        }
    }

    pub fn height_at(&self, v_ce: f64) -> f64 {
        match self {
            Self::Constant { height_um, .. } => *height_um,
            Self::Table { height_um, .. } => height_um.eval(v_ce),
        }
    }

    /// Inverts the (monotone decreasing) height curve: the V_ce that places
    /// the nil at `target_um`.
    pub fn v_ce_for_height(&self, target_um: f64) -> Result<f64> {
        match self {
            Self::Constant { v_ce, height_um, .. } => {
                if (height_um - target_um).abs() < 1e-6 {
                    Ok(*v_ce)
                } else {
                    Err(Error::UnreachableTarget(format!(
                        "height {target_um} um not reachable by a constant table"
                    )))
                }
            }
            Self::Table { height_um, .. } => {
                let (xs, _) = height_um.knots();
                let (mut lo, mut hi) = (xs[0], xs[xs.len() - 1]);
                let h_lo = height_um.eval(lo);
                let h_hi = height_um.eval(hi);
                if !(target_um <= h_lo && target_um >= h_hi) {
                    return Err(Error::UnreachableTarget(format!(
                        "height {target_um} um outside reachable range [{h_hi:.2}, {h_lo:.2}] um"
                    )));
                }
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if height_um.eval(mid) > target_um {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }
}

/// How the trajectory shape is mapped to control voltages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingMode {
    /// Apply the shape to V_ce(t) directly (default).
    Voltage,
    /// Apply the shape to the target height and invert h(V_ce) per step.
    Height,
}

/// Source of the adjustable DC voltage during transport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcSource {
    /// Follow the compensation table at the instantaneous V_ce (default).
    Tracked,
    /// Follow the tanh ramp between the compensated endpoints.
    Ramp,
}

/// Transport target for protocol construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransportTarget {
    /// Final central-electrode amplitude, V.
    FinalVce(f64),
    /// Downward displacement of the trapping height, micrometers.
    Displacement(f64),
}

/// A validated, self-contained shuttling schedule.
#[derive(Debug, Clone)]
pub struct ShuttleProtocol {
    pub kind: TrajectoryKind,
    /// Total transport distance (initial height minus final height), um.
    pub distance_um: f64,
    /// Transport duration, s.
    pub duration_s: f64,
    /// Tanh smoothness parameter.
    pub smoothness: f64,
    /// Central-electrode schedule endpoints and timing.
    pub vce_ramp: VoltageRamp,
    /// Adjustable-DC schedule between the compensated endpoints.
    pub dc_ramp: VoltageRamp,
    /// Drive at t = 0.
    pub drive: DriveState,
    pub consts: PhysicalConstants,
    pub layout: TrapLayout,
    pub mode: ShapingMode,
    pub dc_source: DcSource,
    pub comp: CompensationTable,
    pub v_ce_final: f64,
    pub height_initial_um: f64,
    pub height_final_um: f64,
}

impl ShuttleProtocol {
    /// Central-electrode amplitude at `t`.
    pub fn v_ce_at(&self, t: f64) -> f64 {
        let v0 = self.vce_ramp.start_v;
        let v1 = self.vce_ramp.end_v;
        match self.mode {
            ShapingMode::Voltage => {
                let frac =
                    trajectory_position(self.kind, 1.0, self.duration_s, self.smoothness, t)
                        .expect("validated protocol");
                v0 + (v1 - v0) * frac
            }
            ShapingMode::Height => {
                let h = self.height_initial_um
                    + (self.height_final_um - self.height_initial_um)
                        * trajectory_position(self.kind, 1.0, self.duration_s, self.smoothness, t)
                            .expect("validated protocol");
                self.comp.v_ce_for_height(h).unwrap_or(v1)
            }
        }
    }

    /// Adjustable DC node voltage at `t`.
    pub fn dc_minus_at(&self, t: f64) -> f64 {
        match self.dc_source {
            DcSource::Tracked => self.comp.dc_minus_at(self.v_ce_at(t)),
            DcSource::Ramp => ramp_voltage(&self.dc_ramp, t),
        }
    }

    /// Endcap DC node voltage (held constant).
    pub fn dc_plus(&self) -> f64 {
        self.drive
            .dc_voltages
            .get(crate::geometry::NODE_DC_PLUS)
            .copied()
            .unwrap_or(0.0)
    }

    /// Full drive at `t` (for export and inspection; the integrator uses the
    /// scalar schedules directly).
    pub fn drive_at(&self, t: f64) -> DriveState {
        let mut d = self.drive.with_vce(self.v_ce_at(t));
        d.dc_voltages
            .insert(NODE_DC_MINUS.to_string(), self.dc_minus_at(t));
        d
    }

    /// Drive with the schedule frozen at its final values.
    pub fn final_drive(&self) -> DriveState {
        self.drive_at(self.duration_s * 2.0)
    }

    /// Checks every scheduled voltage against the breakdown limit at
    /// `samples` uniformly spaced times.
    pub fn validate_voltages(&self, samples: usize) -> Result<()> {
        for i in 0..samples {
            let t = self.duration_s * i as f64 / (samples - 1) as f64;
            for (label, v) in [
                ("V_rf", self.drive.v_rf),
                ("V_ce", self.v_ce_at(t)),
                ("V_dc_pos", self.dc_plus()),
                ("V_dc_neg", self.dc_minus_at(t)),
            ] {
                if v.abs() > VOLTAGE_LIMIT_V {
                    return Err(Error::VoltageLimit {
                        limit_v: VOLTAGE_LIMIT_V,
                        msg: format!("{label} = {v:.3} V at t = {t:.3e} s"),
                    });
                }
            }
        }
        Ok(())
    }

    /// The same transport driven backwards (final state to initial state).
    pub fn reversed(&self) -> Result<ShuttleProtocol> {
        let drive = self.drive.with_vce(self.v_ce_final);
        build_protocol(
            &self.layout,
            &drive,
            &self.consts,
            TransportTarget::FinalVce(self.vce_ramp.start_v),
            self.duration_s,
            self.smoothness,
            self.kind,
        )
    }

    pub fn with_mode(mut self, mode: ShapingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_dc_source(mut self, source: DcSource) -> Self {
        self.dc_source = source;
        self
    }
}

/// A resolved transport endpoint pair with its compensation table; protocols
/// for different (kind, duration, smoothness) combinations share it, so a
/// sweep pays for the knot root-finds once.
#[derive(Debug, Clone)]
pub struct TransportScenario {
    pub layout: TrapLayout,
    pub drive: DriveState,
    pub consts: PhysicalConstants,
    pub v_ce_final: f64,
    pub comp: CompensationTable,
    pub height_initial_um: f64,
    pub height_final_um: f64,
}

impl TransportScenario {
    pub fn new(
        layout: &TrapLayout,
        drive: &DriveState,
        consts: &PhysicalConstants,
        target: TransportTarget,
    ) -> Result<Self> {
        drive.validate()?;
        let model = FieldModel::new(layout);
        let guess = FieldPoint::new(0.0, 120.0, 0.0);
        let v0 = drive.v_ce;

        let v1 = match target {
            TransportTarget::FinalVce(v) => v,
            TransportTarget::Displacement(d_um) => {
                // search the full admissible V_ce range for the height target
                let lo = v0.min(drive.v_rf / 2.0);
                let hi = v0.max(drive.v_rf / 2.0);
                let table = CompensationTable::build(&model, drive, consts, lo, hi, &guess)?;
                let h0 = table.height_at(v0);
                table.v_ce_for_height(h0 - d_um)?
            }
        };
        if v1.abs() > VOLTAGE_LIMIT_V {
            return Err(Error::VoltageLimit {
                limit_v: VOLTAGE_LIMIT_V,
                msg: format!("target V_ce = {v1} V"),
            });
        }

        let (lo, hi) = (v0.min(v1), v0.max(v1));
        let comp = CompensationTable::build(&model, drive, consts, lo, hi, &guess)?;
        let height_initial_um = comp.height_at(v0);
        let height_final_um = comp.height_at(v1);
        Ok(Self {
            layout: layout.clone(),
            drive: drive.clone(),
            consts: *consts,
            v_ce_final: v1,
            comp,
            height_initial_um,
            height_final_um,
        })
    }

    /// Assembles and validates a protocol over this scenario's endpoints.
    pub fn protocol(
        &self,
        kind: TrajectoryKind,
        duration_s: f64,
        smoothness: f64,
    ) -> Result<ShuttleProtocol> {
        if !(duration_s > 0.0) {
            return Err(Error::InvalidProtocol(format!(
                "duration must be positive, got {duration_s}"
            )));
        }
        if kind == TrajectoryKind::Tanh && !(smoothness > 0.0) {
            return Err(Error::InvalidProtocol(
                "tanh smoothness must be positive".into(),
            ));
        }
        let v0 = self.drive.v_ce;
        let v1 = self.v_ce_final;
        let tau = duration_s / (2.0 * smoothness.max(f64::MIN_POSITIVE));
        let vce_ramp = VoltageRamp {
            start_v: v0,
            end_v: v1,
            center_s: duration_s / 2.0,
            steepness_s: tau,
        };
        let dc_ramp = VoltageRamp {
            start_v: self.comp.dc_minus_at(v0),
            end_v: self.comp.dc_minus_at(v1),
            center_s: duration_s / 2.0,
            steepness_s: tau,
        };
        vce_ramp.validate()?;
        dc_ramp.validate()?;

        let protocol = ShuttleProtocol {
            kind,
            distance_um: (self.height_initial_um - self.height_final_um).abs(),
            duration_s,
            smoothness,
            vce_ramp,
            dc_ramp,
            drive: self.drive.clone(),
            consts: self.consts,
            layout: self.layout.clone(),
            mode: ShapingMode::Voltage,
            dc_source: DcSource::Tracked,
            comp: self.comp.clone(),
            v_ce_final: v1,
            height_initial_um: self.height_initial_um,
            height_final_um: self.height_final_um,
        };
        protocol.validate_voltages(10_000)?;
        Ok(protocol)
    }
}

/// Builds a validated protocol: compensation endpoints from the root find,
/// tanh DC ramp between them, V_ce following the chosen trajectory mapping,
/// and the 500 V validation over ten thousand sample times.
pub fn build_protocol(
    layout: &TrapLayout,
    drive: &DriveState,
    consts: &PhysicalConstants,
    target: TransportTarget,
    duration_s: f64,
    smoothness: f64,
    kind: TrajectoryKind,
) -> Result<ShuttleProtocol> {
    TransportScenario::new(layout, drive, consts, target)?.protocol(kind, duration_s, smoothness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn tanh_endpoint_identities_exact() {
        let (l, t_total, n) = (48.0, 0.5e-3, 2.5);
        let y = |t: f64| trajectory_position(TrajectoryKind::Tanh, l, t_total, n, t).unwrap();
        assert_eq!(y(0.0), 0.0);
        assert_eq!(y(t_total), l);
        assert_eq!(y(t_total / 2.0), l / 2.0);
        // Heaviside clamping outside [0, T]
        assert_eq!(y(-1.0), 0.0);
        assert_eq!(y(2.0 * t_total), l);
    }

    #[test]
    fn small_smoothness_approaches_linear() {
        let (l, t_total) = (10.0, 1.0);
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let t = t_total * i as f64 / 1000.0;
            let tanh = trajectory_position(TrajectoryKind::Tanh, l, t_total, 0.01, t).unwrap();
            let lin = trajectory_position(TrajectoryKind::Linear, l, t_total, 0.0, t).unwrap();
            worst = worst.max((tanh - lin).abs());
        }
        assert!(worst < 1e-3 * l, "max deviation {worst}");
    }

    #[test]
    fn large_smoothness_has_flat_start() {
        let (l, t_total) = (1.0, 1.0);
        let y = trajectory_position(TrajectoryKind::Tanh, l, t_total, 10.0, 0.25).unwrap();
        assert!(y < 0.01 * l, "y(0.25 T) = {y}");
    }

    #[test]
    fn trajectory_point_symmetry() {
        let (l, t_total, n) = (7.0, 2.0e-3, 3.3);
        for k in 1..40 {
            let d = t_total / 2.0 * k as f64 / 40.0;
            let a = trajectory_position(TrajectoryKind::Tanh, l, t_total, n, t_total / 2.0 + d)
                .unwrap();
            let b = trajectory_position(TrajectoryKind::Tanh, l, t_total, n, t_total / 2.0 - d)
                .unwrap();
            assert!((a + b - l).abs() <= 4.0 * f64::EPSILON * l);
        }
    }

    #[test]
    fn invalid_smoothness_rejected() {
        assert!(trajectory_position(TrajectoryKind::Tanh, 1.0, 1.0, 0.0, 0.5).is_err());
        assert!(trajectory_position(TrajectoryKind::Tanh, 1.0, 1.0, -2.0, 0.5).is_err());
    }

    #[test]
    fn ramp_midpoint_and_saturation() {
        let ramp = VoltageRamp {
            start_v: -8.4,
            end_v: -8.25,
            center_s: 1e-3,
            steepness_s: 1e-4,
        };
        assert_eq!(ramp_voltage(&ramp, ramp.center_s), (-8.4 + -8.25) / 2.0);
        let far = ramp_voltage(&ramp, ramp.center_s + 10.0 * ramp.steepness_s);
        assert!((far - ramp.end_v).abs() <= (ramp.end_v - ramp.start_v).abs() * 1e-8);
    }

    #[test]
    fn ramp_stays_within_endpoint_bounds() {
        let ramp = VoltageRamp {
            start_v: -8.4,
            end_v: -8.25,
            center_s: 0.5,
            steepness_s: 0.05,
        };
        for i in 0..2000 {
            let t = -1.0 + 3.0 * i as f64 / 1999.0;
            let v = ramp_voltage(&ramp, t);
            assert!((-8.4..=-8.25).contains(&v), "v = {v} at t = {t}");
        }
    }

    #[test]
    fn compensation_nulls_residual_field() {
        let layout = presets::reference_layout();
        let model = FieldModel::new(&layout);
        let drive = presets::reference_drive(0.0);
        let consts = presets::reference_ion();
        let guess = FieldPoint::new(0.0, 120.0, 0.0);
        let root = compensate_dc(&model, &drive, &consts, 0.0, &guess).unwrap();
        assert!(root > COMPENSATION_BRACKET.0 && root < COMPENSATION_BRACKET.1);

        let nil = find_rf_nil(&model, &drive, &consts, &guess).unwrap();
        let mut d = drive.clone();
        d.dc_voltages.insert(NODE_DC_MINUS.to_string(), root);
        let g = dc_gradient_si(&model, &d, nil.to_si()).unwrap();
        assert!(
            (g.y + g.z).abs() < 1e-2,
            "residual {} V/m after compensation",
            g.y + g.z
        );
    }

    #[test]
    fn table_matches_direct_root_between_knots() {
        let layout = presets::reference_layout();
        let model = FieldModel::new(&layout);
        let drive = presets::reference_drive(0.0);
        let consts = presets::reference_ion();
        let guess = FieldPoint::new(0.0, 120.0, 0.0);
        let table =
            CompensationTable::build(&model, &drive, &consts, 0.0, 100.0, &guess).unwrap();
        // off-knot values: 100/32-spaced knots, so probe between them
        for v_ce in [7.7, 33.3, 61.9, 88.1] {
            let direct = compensate_dc(&model, &drive, &consts, v_ce, &guess).unwrap();
            let interp = table.dc_minus_at(v_ce);
            assert!(
                (direct - interp).abs() <= COMPENSATION_TOL_V,
                "V_ce = {v_ce}: direct {direct} vs table {interp}"
            );
        }
    }

    #[test]
    fn identity_protocol_is_stationary() {
        let layout = presets::reference_layout();
        let drive = presets::reference_drive(0.0);
        let consts = presets::reference_ion();
        let p = build_protocol(
            &layout,
            &drive,
            &consts,
            TransportTarget::FinalVce(0.0),
            0.5e-3,
            2.5,
            TrajectoryKind::Tanh,
        )
        .unwrap();
        assert_eq!(p.distance_um, 0.0);
        for i in 0..=10 {
            let t = p.duration_s * i as f64 / 10.0;
            assert_eq!(p.v_ce_at(t), 0.0);
            assert_relative_eq!(
                p.dc_minus_at(t),
                p.dc_ramp.start_v,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn over_limit_target_rejected() {
        let layout = presets::reference_layout();
        let drive = presets::reference_drive(0.0);
        let consts = presets::reference_ion();
        let err = build_protocol(
            &layout,
            &drive,
            &consts,
            TransportTarget::FinalVce(600.0),
            0.5e-3,
            2.5,
            TrajectoryKind::Tanh,
        );
        assert!(matches!(err, Err(Error::VoltageLimit { .. })));
    }

    #[test]
    fn reference_transport_protocol() {
        let layout = presets::reference_layout();
        let drive = presets::reference_drive(0.0);
        let consts = presets::reference_ion();
        let p = build_protocol(
            &layout,
            &drive,
            &consts,
            TransportTarget::FinalVce(100.0),
            0.5e-3,
            2.5,
            TrajectoryKind::Tanh,
        )
        .unwrap();
        assert!(p.height_initial_um > p.height_final_um);
        assert!(p.distance_um > 10.0);
        assert!(p.validate_voltages(10_000).is_ok());
        // V_ce schedule endpoints
        assert_eq!(p.v_ce_at(0.0), 0.0);
        assert_eq!(p.v_ce_at(p.duration_s), 100.0);
        // monotone V_ce in voltage-shaping mode
        let mut prev = -1.0;
        for i in 0..=200 {
            let v = p.v_ce_at(p.duration_s * i as f64 / 200.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn height_mode_tracks_height_shape() {
        let layout = presets::reference_layout();
        let drive = presets::reference_drive(0.0);
        let consts = presets::reference_ion();
        let p = build_protocol(
            &layout,
            &drive,
            &consts,
            TransportTarget::FinalVce(100.0),
            0.5e-3,
            2.5,
            TrajectoryKind::Tanh,
        )
        .unwrap()
        .with_mode(ShapingMode::Height);
        let t = 0.31 * p.duration_s;
        let target_h = p.height_initial_um
            + (p.height_final_um - p.height_initial_um)
                * trajectory_position(TrajectoryKind::Tanh, 1.0, p.duration_s, 2.5, t).unwrap();
        let v = p.v_ce_at(t);
        let got_h = p.comp.height_at(v);
        assert!((got_h - target_h).abs() < 0.05, "{got_h} vs {target_h}");
    }

    #[test]
    fn displacement_target_resolves_to_vce() {
        let layout = presets::reference_layout();
        let drive = presets::reference_drive(0.0);
        let consts = presets::reference_ion();
        let by_vce = build_protocol(
            &layout,
            &drive,
            &consts,
            TransportTarget::FinalVce(100.0),
            0.5e-3,
            2.5,
            TrajectoryKind::Tanh,
        )
        .unwrap();
        let by_disp = build_protocol(
            &layout,
            &drive,
            &consts,
            TransportTarget::Displacement(by_vce.distance_um),
            0.5e-3,
            2.5,
            TrajectoryKind::Tanh,
        )
        .unwrap();
        assert!((by_disp.v_ce_final - 100.0).abs() < 0.5, "{}", by_disp.v_ce_final);
    }
}
