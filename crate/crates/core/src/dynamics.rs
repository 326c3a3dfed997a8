//! Classical equations of motion under a time-dependent shuttling protocol,
//! and extraction of kinetic-energy gain and motional quanta.

use nalgebra::{Matrix3, Vector3};
use std::collections::VecDeque;
use std::ops::Range;

use crate::constants::{M_TO_UM, UM_TO_M};
use crate::error::{Error, Result};
use crate::fields::{DriveState, FieldModel, FieldPoint, PatchSi, PhysicalConstants};
use crate::geometry::{NODE_CE, NODE_DC_MINUS, NODE_RF};
use crate::parallel;
use crate::trap_analysis::{find_minimum, secular_frequencies};
use crate::waveforms::{ShuttleProtocol, TrajectoryKind, TransportScenario};

/// Force law used by the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceMode {
    /// Secular motion in the time-averaged effective potential (default).
    Pseudopotential,
    /// Instantaneous RF force with cos(Omega t) on the RF nodes.
    FullRf,
}

/// Integrator steps per shortest secular period (pseudopotential mode).
const STEPS_PER_SECULAR_PERIOD: usize = 256;

/// Integrator steps per RF period (full-RF mode).
const STEPS_PER_RF_PERIOD: usize = 100;

/// Post-transport window length, in final vertical secular periods.
const POST_WINDOW_PERIODS: f64 = 10.0;

/// Maximum number of stored samples in the transport window.
const MAX_TRANSPORT_SAMPLES: usize = 60_000;

#[derive(Debug, Clone, Copy)]
pub struct IonState {
    /// Position, m.
    pub r: Vector3<f64>,
    /// Velocity, m/s.
    pub v: Vector3<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub t: f64,
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    /// Instantaneous kinetic energy, J.
    pub ke: f64,
}

/// Sampled ion state over a transport run plus a post-transport window in the
/// frozen final potential.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub mode: ForceMode,
    pub kind: TrajectoryKind,
    pub smoothness: f64,
    pub duration_s: f64,
    pub samples: Vec<Sample>,
    /// Index range of the post-transport samples.
    pub post_window: Range<usize>,
    pub final_minimum: FieldPoint,
    /// Vertical (transported) secular mode of the final trap, rad/s.
    pub omega_final_vertical: f64,
    pub ke_max_transport: f64,
    /// Maximum kinetic energy over the post window; secular-filtered in
    /// full-RF mode.
    pub ke_max_post: f64,
    pub ke_max_initial: f64,
    pub at_rest_start: bool,
    pub dt_s: f64,
}

impl TrajectoryRecord {
    /// Ion height above the plane as a function of time, um (linear
    /// interpolation between samples, clamped at the ends).
    pub fn height_um_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if s.is_empty() {
            return 0.0;
        }
        if t <= s[0].t {
            return s[0].r.y * M_TO_UM;
        }
        if t >= s[s.len() - 1].t {
            return s[s.len() - 1].r.y * M_TO_UM;
        }
        let mut lo = 0;
        let mut hi = s.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if s[mid].t <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (t - s[lo].t) / (s[hi].t - s[lo].t);
        (s[lo].r.y * (1.0 - w) + s[hi].r.y * w) * M_TO_UM
    }
}

/// Mean motional quanta per Eq.-of-state `n = (KEmax_final - KEmax_initial) / (hbar omega)`.
#[derive(Debug, Clone, Copy)]
pub struct QuantaResult {
    pub n_shuttle: f64,
    pub ke_max_final: f64,
    pub ke_max_initial: f64,
    pub omega_used: f64,
}

/// Precompiled per-node patch lists; all hot-loop force evaluations go
/// through this, avoiding map lookups.
struct ForceEngine {
    rf: Vec<PatchSi>,
    ce: Vec<PatchSi>,
    dcm: Vec<PatchSi>,
    dc_static: Vec<(f64, Vec<PatchSi>)>,
    v_rf: f64,
    psi_scale: f64,
    charge: f64,
    mass: f64,
    omega_rf: f64,
}

fn grad_of(patches: &[PatchSi], r: Vector3<f64>) -> Vector3<f64> {
    let mut g = Vector3::zeros();
    for p in patches {
        g += p.unit_gradient(r);
    }
    g
}

fn hess_of(patches: &[PatchSi], r: Vector3<f64>) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for p in patches {
        h += p.unit_hessian(r);
    }
    h
}

impl ForceEngine {
    fn new(model: &FieldModel, drive: &DriveState, consts: &PhysicalConstants) -> Result<Self> {
        let rf = model.patches(NODE_RF)?.to_vec();
        let ce = model.patches(NODE_CE).map(|p| p.to_vec()).unwrap_or_default();
        let dcm = model
            .patches(NODE_DC_MINUS)
            .map(|p| p.to_vec())
            .unwrap_or_default();
        let mut dc_static = Vec::new();
        for (node, volts) in &drive.dc_voltages {
            if node != NODE_DC_MINUS && *volts != 0.0 {
                dc_static.push((*volts, model.patches(node)?.to_vec()));
            }
        }
        Ok(Self {
            rf,
            ce,
            dcm,
            dc_static,
            v_rf: drive.v_rf,
            psi_scale: consts.psi_scale(drive.omega),
            charge: consts.charge,
            mass: consts.mass,
            omega_rf: drive.omega,
        })
    }

    fn dc_gradient(&self, r: Vector3<f64>, v_dcm: f64) -> Vector3<f64> {
        let mut g = v_dcm * grad_of(&self.dcm, r);
        for (volts, patches) in &self.dc_static {
            g += *volts * grad_of(patches, r);
        }
        g
    }

    /// Acceleration in the secular (pseudopotential) force law.
    fn accel_pseudo(&self, r: Vector3<f64>, v_ce: f64, v_dcm: f64) -> Vector3<f64> {
        let mut g_rf = self.v_rf * grad_of(&self.rf, r);
        let mut h_rf = self.v_rf * hess_of(&self.rf, r);
        if v_ce != 0.0 {
            g_rf += v_ce * grad_of(&self.ce, r);
            h_rf += v_ce * hess_of(&self.ce, r);
        }
        let grad_u =
            2.0 * self.psi_scale * (h_rf * g_rf) + self.charge * self.dc_gradient(r, v_dcm);
        -grad_u / self.mass
    }

    /// Acceleration under the instantaneous RF field.
    fn accel_full(&self, t: f64, r: Vector3<f64>, v_ce: f64, v_dcm: f64) -> Vector3<f64> {
        let mut g_rf = self.v_rf * grad_of(&self.rf, r);
        if v_ce != 0.0 {
            g_rf += v_ce * grad_of(&self.ce, r);
        }
        let phase = (self.omega_rf * t).cos();
        let grad_phi = phase * g_rf + self.dc_gradient(r, v_dcm);
        -self.charge * grad_phi / self.mass
    }
}

/// Moving average of the velocity over one RF period; the kinetic energy of
/// the averaged velocity is the secular-frame KE with micromotion removed.
struct SecularFilter {
    window: VecDeque<Vector3<f64>>,
    sum: Vector3<f64>,
    size: usize,
    mass: f64,
}

impl SecularFilter {
    fn new(size: usize, mass: f64) -> Self {
        Self {
            window: VecDeque::with_capacity(size + 1),
            sum: Vector3::zeros(),
            size,
            mass,
        }
    }

    fn ke(&mut self, v: Vector3<f64>) -> f64 {
        if self.size <= 1 {
            return 0.5 * self.mass * v.norm_squared();
        }
        self.window.push_back(v);
        self.sum += v;
        if self.window.len() > self.size {
            self.sum -= self.window.pop_front().expect("nonempty window");
        }
        let mean = self.sum / self.window.len() as f64;
        0.5 * self.mass * mean.norm_squared()
    }

    fn reset(&mut self) {
        self.window.clear();
        self.sum = Vector3::zeros();
    }
}

fn rk4_step<A>(t: f64, dt: f64, state: IonState, accel: A) -> IonState
where
    A: Fn(f64, Vector3<f64>) -> Vector3<f64>,
{
    let IonState { r, v } = state;
    let k1v = accel(t, r);
    let k1r = v;
    let k2v = accel(t + 0.5 * dt, r + 0.5 * dt * k1r);
    let k2r = v + 0.5 * dt * k1v;
    let k3v = accel(t + 0.5 * dt, r + 0.5 * dt * k2r);
    let k3r = v + 0.5 * dt * k2v;
    let k4v = accel(t + dt, r + dt * k3r);
    let k4r = v + dt * k3v;
    IonState {
        r: r + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r),
        v: v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    }
}

/// Integrates the ion motion under `protocol`, starting at rest at the
/// initial minimum unless `initial` is given, and appends a post-transport
/// window of [`POST_WINDOW_PERIODS`] secular periods in the frozen final
/// potential.
pub fn integrate_trajectory(
    protocol: &ShuttleProtocol,
    mode: ForceMode,
    initial: Option<IonState>,
) -> Result<TrajectoryRecord> {
    let model = FieldModel::new(&protocol.layout);
    let consts = protocol.consts;
    let engine = ForceEngine::new(&model, &protocol.drive, &consts)?;

    // endpoint characterization fixes the step size and the loss checks
    let drive0 = protocol.drive_at(0.0);
    let drive1 = protocol.final_drive();
    let guess0 = FieldPoint::new(0.0, protocol.height_initial_um, 0.0);
    let guess1 = FieldPoint::new(0.0, protocol.height_final_um, 0.0);
    let min0 = find_minimum(&model, &drive0, &consts, &guess0)?;
    let min1 = find_minimum(&model, &drive1, &consts, &guess1)?;
    let modes0 = secular_frequencies(&model, &drive0, &consts, &min0)?;
    let modes1 = secular_frequencies(&model, &drive1, &consts, &min1)?;
    let omega_max = modes0.max_omega().max(modes1.max_omega());
    let omega_final_vertical = modes1.vertical();

    let dt = match mode {
        ForceMode::Pseudopotential => {
            std::f64::consts::TAU / omega_max / STEPS_PER_SECULAR_PERIOD as f64
        }
        ForceMode::FullRf => {
            std::f64::consts::TAU / protocol.drive.omega / STEPS_PER_RF_PERIOD as f64
        }
    };

    let t_total = protocol.duration_s;
    let n_transport = (t_total / dt).ceil() as usize;
    let post_duration = POST_WINDOW_PERIODS * std::f64::consts::TAU / omega_final_vertical;
    let n_post = (post_duration / dt).ceil() as usize;

    let (mut state, at_rest_start) = match initial {
        Some(s) => (s, false),
        None => (
            IonState {
                r: min0.to_si(),
                v: Vector3::zeros(),
            },
            true,
        ),
    };

    // secular filter window for full-RF kinetic energy
    let rf_window = match mode {
        ForceMode::FullRf => STEPS_PER_RF_PERIOD,
        ForceMode::Pseudopotential => 1,
    };
    let mut filter = SecularFilter::new(rf_window, consts.mass);

    // measure the initial window maximum for non-rest starts
    let mut ke_max_initial = 0.0;
    if !at_rest_start {
        let pre_periods = POST_WINDOW_PERIODS * std::f64::consts::TAU / modes0.max_omega();
        let n_pre = (pre_periods / dt).ceil() as usize;
        let v_ce0 = protocol.v_ce_at(0.0);
        let v_dcm0 = protocol.dc_minus_at(0.0);
        let mut pre = state;
        for k in 0..n_pre {
            let t = k as f64 * dt;
            pre = rk4_step(t, dt, pre, |tt, r| match mode {
                ForceMode::Pseudopotential => engine.accel_pseudo(r, v_ce0, v_dcm0),
                ForceMode::FullRf => engine.accel_full(tt, r, v_ce0, v_dcm0),
            });
            ke_max_initial = ke_max_initial.max(filter.ke(pre.v));
        }
        filter.reset();
    }

    let stride = (n_transport / MAX_TRANSPORT_SAMPLES).max(1);
    let mut samples = Vec::with_capacity(n_transport / stride + n_post + 2);
    let push_sample = |samples: &mut Vec<Sample>, t: f64, s: &IonState, mass: f64| {
        samples.push(Sample {
            t,
            r: s.r,
            v: s.v,
            ke: 0.5 * mass * s.v.norm_squared(),
        });
    };
    push_sample(&mut samples, 0.0, &state, consts.mass);

    let mut ke_max_transport = 0.0;
    let mut ke_max_post = 0.0;

    let total_steps = n_transport + n_post;
    let mut post_start_idx = None;
    for k in 0..total_steps {
        let t = k as f64 * dt;
        let in_post = k >= n_transport;
        // schedules clamp beyond the transport window
        let v_ce = protocol.v_ce_at(t);
        let v_dcm = protocol.dc_minus_at(t);
        state = rk4_step(t, dt, state, |tt, r| match mode {
            ForceMode::Pseudopotential => engine.accel_pseudo(r, v_ce, v_dcm),
            ForceMode::FullRf => engine.accel_full(tt, r, v_ce, v_dcm),
        });
        let t_next = (k + 1) as f64 * dt;

        if !state.r.iter().all(|c| c.is_finite()) || !state.v.iter().all(|c| c.is_finite()) {
            return Err(Error::StepFailure(format!(
                "non-finite state at t = {t_next:.3e} s"
            )));
        }
        if state.r.y <= 0.0 {
            return Err(Error::IonLost {
                t_s: t_next,
                msg: "ion reached the trap plane".into(),
            });
        }
        // distance from the instantaneous minimum (nil height from the
        // compensation table) bounded by five ion heights
        let h_inst = protocol.comp.height_at(v_ce) * UM_TO_M;
        let nil = Vector3::new(0.0, h_inst, 0.0);
        if (state.r - nil).norm() > 5.0 * h_inst {
            return Err(Error::IonLost {
                t_s: t_next,
                msg: format!(
                    "ion strayed {:.1} um from the instantaneous minimum",
                    (state.r - nil).norm() * M_TO_UM
                ),
            });
        }

        let raw_ke = 0.5 * consts.mass * state.v.norm_squared();
        if in_post {
            if post_start_idx.is_none() {
                post_start_idx = Some(samples.len());
            }
            let ke = match mode {
                ForceMode::Pseudopotential => raw_ke,
                ForceMode::FullRf => filter.ke(state.v),
            };
            ke_max_post = ke_max_post.max(ke);
            // post window keeps every step
            push_sample(&mut samples, t_next, &state, consts.mass);
        } else {
            ke_max_transport = ke_max_transport.max(raw_ke);
            if k % stride == 0 {
                push_sample(&mut samples, t_next, &state, consts.mass);
            }
        }
    }

    let post_start = post_start_idx.unwrap_or(samples.len());
    let n_samples = samples.len();
    Ok(TrajectoryRecord {
        mode,
        kind: protocol.kind,
        smoothness: protocol.smoothness,
        duration_s: protocol.duration_s,
        samples,
        post_window: post_start..n_samples,
        final_minimum: min1,
        omega_final_vertical,
        ke_max_transport,
        ke_max_post,
        ke_max_initial,
        at_rest_start,
        dt_s: dt,
    })
}

/// Integrates in a frozen potential (no schedule); used by the oracle and
/// conservation tests.
pub fn integrate_static(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    initial: IonState,
    duration_s: f64,
    dt: f64,
    mode: ForceMode,
) -> Result<Vec<Sample>> {
    let engine = ForceEngine::new(model, drive, consts)?;
    let v_dcm = drive
        .dc_voltages
        .get(NODE_DC_MINUS)
        .copied()
        .unwrap_or(0.0);
    let n = (duration_s / dt).ceil() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut state = initial;
    out.push(Sample {
        t: 0.0,
        r: state.r,
        v: state.v,
        ke: 0.5 * consts.mass * state.v.norm_squared(),
    });
    for k in 0..n {
        let t = k as f64 * dt;
        state = rk4_step(t, dt, state, |tt, r| match mode {
            ForceMode::Pseudopotential => engine.accel_pseudo(r, drive.v_ce, v_dcm),
            ForceMode::FullRf => engine.accel_full(tt, r, drive.v_ce, v_dcm),
        });
        if state.r.y <= 0.0 {
            return Err(Error::IonLost {
                t_s: t + dt,
                msg: "ion reached the trap plane".into(),
            });
        }
        out.push(Sample {
            t: t + dt,
            r: state.r,
            v: state.v,
            ke: 0.5 * consts.mass * state.v.norm_squared(),
        });
    }
    Ok(out)
}

/// Motional quanta from the record's pre/post kinetic-energy maxima.
pub fn motional_quanta(record: &TrajectoryRecord, omega: f64) -> Result<QuantaResult> {
    if record.post_window.is_empty() {
        return Err(Error::MissingWindow);
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidParams("omega must be positive".into()));
    }
    let hbar = crate::constants::HBAR;
    let n = ((record.ke_max_post - record.ke_max_initial) / (hbar * omega)).max(0.0);
    Ok(QuantaResult {
        n_shuttle: n,
        ke_max_final: record.ke_max_post,
        ke_max_initial: record.ke_max_initial,
        omega_used: omega,
    })
}

/// Shuttle-induced quanta for each duration in `t_grid`; grid points are
/// independent and run through the parallel map. Per-point failures are
/// reported in place.
pub fn ke_gain_vs_time(
    scenario: &TransportScenario,
    kind: TrajectoryKind,
    smoothness: f64,
    t_grid: &[f64],
) -> Vec<(f64, Result<f64>)> {
    let results = parallel::map(t_grid, |&t_total| {
        let protocol = scenario.protocol(kind, t_total, smoothness)?;
        let record = integrate_trajectory(&protocol, ForceMode::Pseudopotential, None)?;
        let q = motional_quanta(&record, record.omega_final_vertical)?;
        Ok(q.n_shuttle)
    });
    t_grid.iter().cloned().zip(results).collect()
}
