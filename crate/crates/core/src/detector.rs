use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Photon-number-resolving detector with efficiency `eta_d` and dark-count probability per gate window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub eta_d: f64,
    pub p_dark: f64,
}

impl DetectorModel {
    pub fn new(eta_d: f64, p_dark: f64) -> Result<Self> {
        if !(eta_d > 0.0 && eta_d <= 1.0) {
            return Err(Error::Domain {
                name: "eta_d",
                value: eta_d,
                domain: "(0, 1]",
            });
        }
        if !(0.0..1.0).contains(&p_dark) {
            return Err(Error::Domain {
                name: "p_dark",
                value: p_dark,
                domain: "[0, 1)",
            });
        }
        Ok(Self { eta_d, p_dark })
    }

    pub fn ideal() -> Self {
        Self {
            eta_d: 1.0,
            p_dark: 0.0,
        }
    }

    pub fn lossy(eta_d: f64) -> Result<Self> {
        Self::new(eta_d, 0.0)
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::ideal()
    }
}
