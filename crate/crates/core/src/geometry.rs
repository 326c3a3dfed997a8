//! Electrode patches and the multi-rail, single-zone trap layout.
//!
//! All electrodes are rectangles in the y = 0 plane (gapless-plane model:
//! zero-width gaps, the rest of the plane is grounded). Coordinates at this
//! interface are in micrometers.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Voltage node labels used by the built layout.
pub const NODE_RF: &str = "rf";
pub const NODE_CE: &str = "ce";
pub const NODE_DC_PLUS: &str = "dc_plus";
pub const NODE_DC_MINUS: &str = "dc_minus";
pub const NODE_GROUND: &str = "ground";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeRole {
    RfRail,
    CentralRf,
    DcSegment,
    Ground,
}

/// A rectangular electrode patch in the trap plane.
///
/// `x1 < x2` bound the lateral extent, `z1 < z2` the longitudinal extent,
/// both in micrometers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub id: String,
    pub role: ElectrodeRole,
    pub x1: f64,
    pub x2: f64,
    pub z1: f64,
    pub z2: f64,
    /// Voltage node this patch is tied to.
    pub node: String,
}

impl Electrode {
    pub fn is_degenerate(&self) -> bool {
        !(self.x1 < self.x2 && self.z1 < self.z2)
    }

    fn overlaps(&self, other: &Electrode) -> bool {
        let dx = self.x1.max(other.x1) < self.x2.min(other.x2);
        let dz = self.z1.max(other.z1) < self.z2.min(other.z2);
        dx && dz
    }

    /// Mirror image about the x = 0 plane.
    fn reflected_x(&self) -> Electrode {
        Electrode {
            id: self.id.clone(),
            role: self.role,
            x1: -self.x2,
            x2: -self.x1,
            z1: self.z1,
            z2: self.z2,
            node: self.node.clone(),
        }
    }
}

/// Parameters of the built layout: two RF rails of width `rf_width` separated
/// by a central control electrode of width `central_width`, flanked laterally
/// by columns of DC segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    /// RF rail width (the two rails are identical), um.
    pub rf_width_um: f64,
    /// Central RF/control electrode width, um.
    pub central_width_um: f64,
    /// Lateral width of the DC segment columns, um.
    pub dc_width_um: f64,
    /// Rail length along z, um.
    pub rail_length_um: f64,
    /// DC segments per side; the middle segment(s) form the adjustable
    /// (negative) node, the outer ones the endcap (positive) node.
    pub dc_segments_per_side: usize,
}

impl LayoutParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rf_width_um > 0.0
            && self.central_width_um > 0.0
            && self.dc_width_um > 0.0
            && self.rail_length_um > 0.0)
        {
            return Err(Error::InvalidParams(
                "all layout widths and lengths must be positive".into(),
            ));
        }
        if self.dc_segments_per_side < 3 {
            return Err(Error::InvalidParams(format!(
                "need at least 3 DC segments per side, got {}",
                self.dc_segments_per_side
            )));
        }
        Ok(())
    }
}

/// Immutable electrode layout; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapLayout {
    pub electrodes: Vec<Electrode>,
    /// Set when produced by [`build_trap`]; enables the mirror-symmetry check
    /// in [`validate_layout`].
    #[serde(skip)]
    pub built_symmetric: bool,
}

impl TrapLayout {
    pub fn node_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.electrodes.iter().map(|e| e.node.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Mapping electrode id -> voltage node label.
    pub fn voltage_nodes(&self) -> BTreeMap<String, String> {
        self.electrodes
            .iter()
            .map(|e| (e.id.clone(), e.node.clone()))
            .collect()
    }

    pub fn electrodes_of(&self, node: &str) -> Vec<&Electrode> {
        self.electrodes.iter().filter(|e| e.node == node).collect()
    }

    pub fn has_node(&self, node: &str) -> bool {
        self.electrodes.iter().any(|e| e.node == node)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            electrodes: &'a [Electrode],
        }
        serde_json::to_string_pretty(&Doc {
            electrodes: &self.electrodes,
        })
        .expect("layout serialization")
    }

    pub fn from_json(doc: &str) -> Result<TrapLayout> {
        #[derive(Deserialize)]
        struct Doc {
            electrodes: Vec<Electrode>,
        }
        let doc: Doc = serde_json::from_str(doc)
            .map_err(|e| Error::InvalidParams(format!("layout JSON: {e}")))?;
        Ok(TrapLayout {
            electrodes: doc.electrodes,
            built_symmetric: false,
        })
    }
}

/// Diagnostics reported by [`validate_layout`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    Degenerate { id: String },
    Overlap { a: String, b: String },
    Asymmetric { detail: String },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::Degenerate { id } => write!(f, "degenerate rectangle '{id}'"),
            Diagnostic::Overlap { a, b } => {
                write!(f, "electrodes '{a}' and '{b}' of different nodes overlap")
            }
            Diagnostic::Asymmetric { detail } => write!(f, "layout not mirror-symmetric: {detail}"),
        }
    }
}

/// Builds the single-zone layout: two RF rails, a central control electrode
/// between them, and `dc_segments_per_side` DC segments on each flank, all
/// mirror-symmetric about x = 0 with the zone centered at z = 0.
pub fn build_trap(params: &LayoutParams) -> Result<TrapLayout> {
    params.validate()?;
    let a = params.central_width_um;
    let b = params.rf_width_um;
    let w = params.dc_width_um;
    let len = params.rail_length_um;
    let half_len = len / 2.0;
    let nseg = params.dc_segments_per_side;

    let mut electrodes = Vec::new();

    electrodes.push(Electrode {
        id: "ce".into(),
        role: ElectrodeRole::CentralRf,
        x1: -a / 2.0,
        x2: a / 2.0,
        z1: -half_len,
        z2: half_len,
        node: NODE_CE.into(),
    });
    electrodes.push(Electrode {
        id: "rf_e".into(),
        role: ElectrodeRole::RfRail,
        x1: a / 2.0,
        x2: a / 2.0 + b,
        z1: -half_len,
        z2: half_len,
        node: NODE_RF.into(),
    });
    electrodes.push(Electrode {
        id: "rf_w".into(),
        role: ElectrodeRole::RfRail,
        x1: -a / 2.0 - b,
        x2: -a / 2.0,
        z1: -half_len,
        z2: half_len,
        node: NODE_RF.into(),
    });

    // DC columns outside the rails, segmented along z. The segment(s)
    // straddling z = 0 take the adjustable node, the rest are endcaps.
    let seg_len = len / nseg as f64;
    let x_in = a / 2.0 + b;
    let x_out = x_in + w;
    for side in 0..2 {
        let (sx1, sx2, tag) = if side == 0 {
            (x_in, x_out, "e")
        } else {
            (-x_out, -x_in, "w")
        };
        for k in 0..nseg {
            let z1 = -half_len + k as f64 * seg_len;
            let z2 = z1 + seg_len;
            let mid = 0.5 * (z1 + z2);
            let is_center = mid.abs() < seg_len * 0.5 + 1e-9;
            electrodes.push(Electrode {
                id: format!("dc_{tag}_{k}"),
                role: ElectrodeRole::DcSegment,
                x1: sx1,
                x2: sx2,
                z1,
                z2,
                node: if is_center {
                    NODE_DC_MINUS.into()
                } else {
                    NODE_DC_PLUS.into()
                },
            });
        }
    }

    let layout = TrapLayout {
        electrodes,
        built_symmetric: true,
    };
    let diags = validate_layout(&layout);
    if !diags.is_empty() {
        return Err(Error::InvalidParams(format!(
            "built layout failed validation: {}",
            diags
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    Ok(layout)
}

/// Checks for degenerate rectangles, overlaps between patches of different
/// voltage nodes, and (for built layouts) mirror symmetry about x = 0.
/// Returns diagnostics rather than failing.
pub fn validate_layout(layout: &TrapLayout) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for e in &layout.electrodes {
        if e.is_degenerate() {
            diags.push(Diagnostic::Degenerate { id: e.id.clone() });
        }
    }
    for (i, a) in layout.electrodes.iter().enumerate() {
        for b in layout.electrodes.iter().skip(i + 1) {
            if a.node != b.node && a.overlaps(b) {
                diags.push(Diagnostic::Overlap {
                    a: a.id.clone(),
                    b: b.id.clone(),
                });
            }
        }
    }
    if layout.built_symmetric {
        // The reflected electrode set must equal the original as a set,
        // up to id relabeling.
        let tol = 1e-9;
        for e in &layout.electrodes {
            let r = e.reflected_x();
            let found = layout.electrodes.iter().any(|o| {
                o.node == r.node
                    && (o.x1 - r.x1).abs() < tol
                    && (o.x2 - r.x2).abs() < tol
                    && (o.z1 - r.z1).abs() < tol
                    && (o.z2 - r.z2).abs() < tol
            });
            if !found {
                diags.push(Diagnostic::Asymmetric {
                    detail: format!("no mirror partner for '{}'", e.id),
                });
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_params() -> LayoutParams {
        LayoutParams {
            rf_width_um: 300.0,
            central_width_um: 85.0,
            dc_width_um: 310.0,
            rail_length_um: 3000.0,
            dc_segments_per_side: 3,
        }
    }

    #[test]
    fn builds_reference_layout() {
        let layout = build_trap(&reference_params()).unwrap();
        let rails = layout.electrodes_of(NODE_RF).len();
        let central = layout.electrodes_of(NODE_CE).len();
        let dc: usize = layout
            .electrodes
            .iter()
            .filter(|e| e.role == ElectrodeRole::DcSegment)
            .count();
        assert_eq!(rails, 2);
        assert_eq!(central, 1);
        assert_eq!(dc, 6);
        assert!(validate_layout(&layout).is_empty());
    }

    #[test]
    fn minimal_layout_is_symmetric() {
        let layout = build_trap(&LayoutParams {
            rf_width_um: 1.0,
            central_width_um: 1.0,
            dc_width_um: 1.0,
            rail_length_um: 3.0,
            dc_segments_per_side: 3,
        })
        .unwrap();
        assert!(validate_layout(&layout).is_empty());
    }

    #[test]
    fn zero_width_rejected() {
        let mut p = reference_params();
        p.central_width_um = 0.0;
        assert!(matches!(build_trap(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn too_few_segments_rejected() {
        let mut p = reference_params();
        p.dc_segments_per_side = 2;
        assert!(build_trap(&p).is_err());
    }

    #[test]
    fn overlap_diagnostic() {
        let layout = TrapLayout {
            electrodes: vec![
                Electrode {
                    id: "a".into(),
                    role: ElectrodeRole::DcSegment,
                    x1: 0.0,
                    x2: 10.0,
                    z1: 0.0,
                    z2: 10.0,
                    node: "n1".into(),
                },
                Electrode {
                    id: "b".into(),
                    role: ElectrodeRole::DcSegment,
                    x1: 5.0,
                    x2: 15.0,
                    z1: 5.0,
                    z2: 15.0,
                    node: "n2".into(),
                },
            ],
            built_symmetric: false,
        };
        let diags = validate_layout(&layout);
        assert!(diags
            .iter()
            .any(|d| matches!(d, Diagnostic::Overlap { .. })));
    }

    #[test]
    fn degenerate_diagnostic() {
        let layout = TrapLayout {
            electrodes: vec![Electrode {
                id: "flat".into(),
                role: ElectrodeRole::Ground,
                x1: 1.0,
                x2: 1.0,
                z1: 0.0,
                z2: 2.0,
                node: "g".into(),
            }],
            built_symmetric: false,
        };
        let diags = validate_layout(&layout);
        assert!(diags
            .iter()
            .any(|d| matches!(d, Diagnostic::Degenerate { .. })));
    }

    #[test]
    fn json_round_trip() {
        let layout = build_trap(&reference_params()).unwrap();
        let doc = layout.to_json();
        let back = TrapLayout::from_json(&doc).unwrap();
        assert_eq!(layout.electrodes, back.electrodes);
        // JSON field order is fixed for golden-file stability.
        let first_obj = doc.find("{\n").map(|_| ()).unwrap();
        let _ = first_obj;
        let idx_id = doc.find("\"id\"").unwrap();
        let idx_role = doc.find("\"role\"").unwrap();
        let idx_x1 = doc.find("\"x1\"").unwrap();
        let idx_node = doc.find("\"node\"").unwrap();
        assert!(idx_id < idx_role && idx_role < idx_x1 && idx_x1 < idx_node);
    }

    #[test]
    fn same_node_touching_segments_allowed() {
        let layout = build_trap(&reference_params()).unwrap();
        // adjacent DC segments share an edge but belong to distinct or same
        // nodes without positive-area overlap
        assert!(validate_layout(&layout).is_empty());
    }
}
