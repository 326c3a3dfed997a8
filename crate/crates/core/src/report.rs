//! CSV and JSON emission with provenance headers.
//!
//! Every emitted file starts with comment lines carrying the tool version and
//! a hash of the originating configuration, so results are reproducible from
//! the header alone. Formatting is fixed-width scientific notation so that
//! repeated runs of the same configuration are byte-identical.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dynamics::TrajectoryRecord;
use crate::error::Result;
use crate::fields::{DriveState, FieldModel, FieldPoint, PhysicalConstants};
use crate::heating::HeatingBudget;
use crate::sweep::SweepResult;
use crate::trap_analysis::CurvePoint;
use crate::waveforms::ShuttleProtocol;

/// Identifies the tool version and configuration that produced an output.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.into(),
        }
    }

    /// Provenance from any serializable configuration document.
    pub fn of<T: Serialize>(config: &T) -> Self {
        let canonical = serde_json::to_string(config).expect("serializable config");
        Self::new(sha256_hex(canonical.as_bytes()))
    }

    pub fn header(&self) -> String {
        format!(
            "# vshuttle {} config_sha256={}\n",
            self.tool_version, self.config_hash
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

/// Characterization curve: `V_ce_V,height_um,omega_radial_MHz,omega_axial_MHz,depth_eV`.
pub fn curve_csv(points: &[CurvePoint], prov: &Provenance) -> String {
    let mut out = prov.header();
    out.push_str("V_ce_V,height_um,omega_radial_MHz,omega_axial_MHz,depth_eV\n");
    for p in points {
        let radial_mhz = p.omega_radial / std::f64::consts::TAU / 1e6;
        let axial_mhz = p.omega_axial / std::f64::consts::TAU / 1e6;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(p.v_ce),
            fmt(p.height_um),
            fmt(radial_mhz),
            fmt(axial_mhz),
            fmt(p.depth_ev)
        ));
    }
    out
}

/// Voltage schedule sampled at `rate_hz`:
/// `t_s,V_rf_V,V_ce_V,V_dc_pos_V,V_dc_neg_V`.
pub fn waveform_csv(protocol: &ShuttleProtocol, rate_hz: f64, prov: &Provenance) -> String {
    let mut out = prov.header();
    out.push_str("t_s,V_rf_V,V_ce_V,V_dc_pos_V,V_dc_neg_V\n");
    let n = (protocol.duration_s * rate_hz).ceil() as usize;
    for i in 0..=n {
        let t = i as f64 / rate_hz;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(t),
            fmt(protocol.drive.v_rf),
            fmt(protocol.v_ce_at(t)),
            fmt(protocol.dc_plus()),
            fmt(protocol.dc_minus_at(t))
        ));
    }
    out
}

/// Trajectory samples: `t_s,x_um,y_um,z_um,vx,vy,vz,ke_J` (velocities m/s),
/// keeping every `downsample`-th row.
pub fn trajectory_csv(record: &TrajectoryRecord, downsample: usize, prov: &Provenance) -> String {
    let ds = downsample.max(1);
    let mut out = prov.header();
    out.push_str("t_s,x_um,y_um,z_um,vx,vy,vz,ke_J\n");
    for s in record.samples.iter().step_by(ds) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(s.t),
            fmt(s.r.x * 1e6),
            fmt(s.r.y * 1e6),
            fmt(s.r.z * 1e6),
            fmt(s.v.x),
            fmt(s.v.y),
            fmt(s.v.z),
            fmt(s.ke)
        ));
    }
    out
}

/// Budget table: `T_ms,cycles,n_shuttle,n_anomalous,n_total`.
pub fn budget_csv(budgets: &[HeatingBudget], prov: &Provenance) -> String {
    let mut out = prov.header();
    out.push_str("T_ms,cycles,n_shuttle,n_anomalous,n_total\n");
    for b in budgets {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(b.duration_s * 1e3),
            fmt(b.cycles),
            fmt(b.n_shuttle),
            fmt(b.n_anomalous),
            fmt(b.n_total)
        ));
    }
    out
}

/// Sweep table: `N,T_ms,cycles,n_shuttle,n_anomalous,n_total,status`.
/// Failed cells keep their key columns and carry the error in `status`.
pub fn sweep_csv(result: &SweepResult, prov: &Provenance) -> String {
    let mut out = prov.header();
    out.push_str("N,T_ms,cycles,n_shuttle,n_anomalous,n_total,status\n");
    for c in &result.cells {
        match &c.budget {
            Ok(b) => out.push_str(&format!(
                "{},{},{},{},{},{},ok\n",
                fmt(c.smoothness),
                fmt(c.duration_s * 1e3),
                fmt(b.cycles),
                fmt(b.n_shuttle),
                fmt(b.n_anomalous),
                fmt(b.n_total)
            )),
            Err(e) => out.push_str(&format!(
                "{},{},,,,,{}\n",
                fmt(c.smoothness),
                fmt(c.duration_s * 1e3),
                e.replace(',', ";")
            )),
        }
    }
    out
}

/// Sweep summary JSON: `{best_N, T_star_ms, n_total_star, per_N: [...]}`.
pub fn sweep_summary_json(result: &SweepResult, prov: &Provenance) -> Result<String> {
    #[derive(Serialize)]
    struct PerN {
        #[serde(rename = "N")]
        smoothness: f64,
        intersection_t_ms: Option<f64>,
        intersection_quanta: Option<f64>,
        min_total_t_ms: Option<f64>,
        min_total_quanta: Option<f64>,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        best_n: f64,
        t_star_ms: f64,
        n_total_star: f64,
        per_n: Vec<PerN>,
        provenance: &'a Provenance,
    }
    let per_n = result
        .per_n
        .iter()
        .map(|s| PerN {
            smoothness: s.smoothness,
            intersection_t_ms: s.intersection.map(|(t, _)| t * 1e3),
            intersection_quanta: s.intersection.map(|(_, n)| n),
            min_total_t_ms: s.best_total.map(|(t, _)| t * 1e3),
            min_total_quanta: s.best_total.map(|(_, n)| n),
        })
        .collect();
    let summary = Summary {
        best_n: result.best.smoothness,
        t_star_ms: result.best.duration_s * 1e3,
        n_total_star: result.best.n_total,
        per_n,
        provenance: prov,
    };
    serde_json::to_string_pretty(&summary)
        .map_err(|e| crate::error::Error::Io(format!("summary serialization: {e}")))
}

/// Field map over sample points: `x_um,y_um,z_um,phi_V` for a unit-volt node
/// superposition given by `voltages`.
pub fn field_map_csv(
    model: &FieldModel,
    voltages: &std::collections::BTreeMap<String, f64>,
    points: &[FieldPoint],
    prov: &Provenance,
) -> Result<String> {
    let mut out = prov.header();
    out.push_str("# potential in volts at positions in micrometers\n");
    out.push_str("x_um,y_um,z_um,phi_V\n");
    for p in points {
        let phi = model.potential_si(voltages, p.to_si())?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt(p.x),
            fmt(p.y),
            fmt(p.z),
            fmt(phi)
        ));
    }
    Ok(out)
}

/// Field map of the total effective potential: `x_um,y_um,z_um,U_J`.
pub fn potential_map_csv(
    model: &FieldModel,
    drive: &DriveState,
    consts: &PhysicalConstants,
    points: &[FieldPoint],
    prov: &Provenance,
) -> Result<String> {
    let mut out = prov.header();
    out.push_str("# total effective potential in joules at positions in micrometers\n");
    out.push_str("x_um,y_um,z_um,U_J\n");
    for p in points {
        let u = crate::fields::total_effective_potential(model, drive, consts, p)?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt(p.x),
            fmt(p.y),
            fmt(p.z),
            fmt(u)
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_header_is_stable() {
        let p1 = Provenance::of(&serde_json::json!({"a": 1, "b": 2.5}));
        let p2 = Provenance::of(&serde_json::json!({"a": 1, "b": 2.5}));
        assert_eq!(p1.header(), p2.header());
        assert!(p1.header().starts_with("# vshuttle "));
        assert_eq!(p1.config_hash.len(), 64);
    }

    #[test]
    fn budget_csv_layout() {
        let prov = Provenance::new("deadbeef");
        let budgets = vec![HeatingBudget {
            duration_s: 5e-4,
            cycles: 900.0,
            n_shuttle: 3.5,
            n_anomalous: 3.5,
            n_total: 7.0,
        }];
        let csv = budget_csv(&budgets, &prov);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        assert_eq!(
            lines.next().unwrap(),
            "T_ms,cycles,n_shuttle,n_anomalous,n_total"
        );
        assert!(lines.next().unwrap().starts_with("5.000000000e-1,"));
    }
}
