pub mod bracket_check;
pub mod convergence;
pub mod simulate;
pub mod soliton_check;
pub mod stability;

use std::time::{SystemTime, UNIX_EPOCH};

use ckdv_core::invariants::Drifts;
use serde::Serialize;

/// Drift block of summary.json.
#[derive(Clone, Copy, Debug, Serialize)]
#[allow(non_snake_case)]
pub struct DriftSummary {
    pub H: f64,
    pub V: f64,
    pub H1: f64,
    pub Hhalf_max: f64,
    pub M_max: Option<f64>,
}

impl From<Drifts> for DriftSummary {
    fn from(d: Drifts) -> Self {
        Self {
            H: d.h,
            V: d.v,
            H1: d.h1,
            Hhalf_max: d.h_half_max,
            M_max: d.m_max,
        }
    }
}

impl DriftSummary {
    /// Entrywise worst case; `M_max` is dropped if any run lacks it.
    pub fn worst(items: impl IntoIterator<Item = DriftSummary>) -> Option<Self> {
        items.into_iter().reduce(|a, b| Self {
            H: a.H.max(b.H),
            V: a.V.max(b.V),
            H1: a.H1.max(b.H1),
            Hhalf_max: a.Hhalf_max.max(b.Hhalf_max),
            M_max: a.M_max.zip(b.M_max).map(|(x, y)| x.max(y)),
        })
    }
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
