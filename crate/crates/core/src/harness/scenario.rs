use crate::detector::DetectorModel;
use crate::ensemble::{secret_key_rate_ensemble, EnsembleParams, EnsembleSourceParams, MemoryModel};
use crate::error::{Error, Result};
use crate::hybrid::{hybrid_chain_evaluate, secret_key_rate_hybrid, DissipativeGate, HybridParams, HybridSource};
use crate::original::{chain_evaluate, detection_gamma, secret_key_rate_original, DepolarizingGate, OriginalParams};
use crate::rate::{ChannelModel, RateBreakdown};
use crate::states::QkdProtocol;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Original,
    Hybrid,
    Ensemble,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Original => "original",
            Protocol::Hybrid => "hybrid",
            Protocol::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Ok(Protocol::Original),
            "hybrid" => Ok(Protocol::Hybrid),
            "ensemble" | "atomic-ensemble" => Ok(Protocol::Ensemble),
            other => Err(Error::Config(format!("unknown protocol '{other}'"))),
        }
    }
}

/// Every tunable quantity of the three protocols, addressable by name.
///
/// Each protocol reads only the fields it uses. Names accepted by [`Scenario::set`] are listed in
/// [`PARAMETER_NAMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub protocol: Protocol,
    pub qkd: QkdProtocol,
    pub length: f64,
    pub nesting: u32,
    pub rounds: u32,
    pub f0: f64,
    pub p_g: f64,
    pub eta_d: f64,
    pub p_dark: f64,
    pub alpha_att: f64,
    pub c: f64,
    /// Qubus amplitude and phase; when both are set the hybrid link fidelity follows from them.
    pub qubus_alpha: Option<f64>,
    pub qubus_theta: Option<f64>,
    pub normalize_per_memory: bool,
    pub pump: f64,
    pub single_photon_efficiency: f64,
    pub reflectivity: f64,
    pub repetition_rate: f64,
    pub eta_m: f64,
}

pub const PARAMETER_NAMES: &[&str] = &[
    "L", "N", "k", "F0", "p_G", "eta_d", "p_dark", "alpha_att", "c", "alpha", "theta", "p", "q", "R",
    "gamma_rep", "eta_m",
];

const DISCRETE: &[&str] = &["N", "k"];

pub fn is_discrete(name: &str) -> bool {
    DISCRETE.contains(&name)
}

impl Scenario {
    pub fn new(protocol: Protocol) -> Self {
        Self {
            protocol,
            qkd: QkdProtocol::Bb84,
            length: 600.0,
            nesting: 2,
            rounds: 0,
            f0: 1.0,
            p_g: 1.0,
            eta_d: 1.0,
            p_dark: 0.0,
            alpha_att: ChannelModel::default().alpha_att,
            c: ChannelModel::default().c,
            qubus_alpha: None,
            qubus_theta: None,
            normalize_per_memory: false,
            pump: 1e-3,
            single_photon_efficiency: 1.0,
            reflectivity: 0.5,
            repetition_rate: f64::INFINITY,
            eta_m: 1.0,
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if is_discrete(name) && (value < 0.0 || value.fract() != 0.0 || value > f64::from(u32::MAX)) {
            return Err(Error::Config(format!("{name} must be a non-negative integer, got {value}")));
        }
        match name {
            "L" => self.length = value,
            "N" => self.nesting = value as u32,
            "k" => self.rounds = value as u32,
            "F0" => self.f0 = value,
            "p_G" => self.p_g = value,
            "eta_d" => self.eta_d = value,
            "p_dark" => self.p_dark = value,
            "alpha_att" => self.alpha_att = value,
            "c" => self.c = value,
            "alpha" => self.qubus_alpha = Some(value),
            "theta" => self.qubus_theta = Some(value),
            "p" => self.pump = value,
            "q" => self.single_photon_efficiency = value,
            "R" => self.reflectivity = value,
            "gamma_rep" => self.repetition_rate = value,
            "eta_m" => self.eta_m = value,
            other => return Err(Error::Config(format!("unknown parameter '{other}'"))),
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "L" => self.length,
            "N" => f64::from(self.nesting),
            "k" => f64::from(self.rounds),
            "F0" => self.f0,
            "p_G" => self.p_g,
            "eta_d" => self.eta_d,
            "p_dark" => self.p_dark,
            "alpha_att" => self.alpha_att,
            "c" => self.c,
            "alpha" => self.qubus_alpha.unwrap_or(f64::NAN),
            "theta" => self.qubus_theta.unwrap_or(f64::NAN),
            "p" => self.pump,
            "q" => self.single_photon_efficiency,
            "R" => self.reflectivity,
            "gamma_rep" => self.repetition_rate,
            "eta_m" => self.eta_m,
            other => return Err(Error::Config(format!("unknown parameter '{other}'"))),
        })
    }

    pub fn with(&self, name: &str, value: f64) -> Result<Self> {
        let mut next = self.clone();
        next.set(name, value)?;
        Ok(next)
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        ChannelModel::new(self.alpha_att, self.c)
    }

    pub fn detector(&self) -> Result<DetectorModel> {
        DetectorModel::new(self.eta_d, self.p_dark)
    }

    pub fn original_params(&self) -> Result<OriginalParams> {
        Ok(OriginalParams {
            length: self.length,
            nesting: self.nesting,
            rounds: self.rounds,
            f0: self.f0,
            gate: DepolarizingGate::new(self.p_g)?,
            detector: self.detector()?,
            channel: self.channel()?,
            qkd: self.qkd,
        })
    }

    pub fn hybrid_params(&self) -> Result<HybridParams> {
        let source = match (self.qubus_alpha, self.qubus_theta) {
            (Some(alpha), Some(theta)) => HybridSource::Qubus { alpha, theta },
            (None, None) => HybridSource::Fidelity(self.f0),
            _ => return Err(Error::Config("qubus source needs both alpha and theta".into())),
        };
        Ok(HybridParams {
            length: self.length,
            nesting: self.nesting,
            rounds: self.rounds,
            source,
            gate: DissipativeGate::new(self.p_g)?,
            detector: self.detector()?,
            channel: self.channel()?,
            qkd: self.qkd,
            normalize_per_memory: self.normalize_per_memory,
        })
    }

    pub fn ensemble_params(&self) -> Result<EnsembleParams> {
        if self.rounds != 0 {
            return Err(Error::Config("the ensemble protocol has no distillation rounds (k = 0)".into()));
        }
        Ok(EnsembleParams {
            length: self.length,
            nesting: self.nesting,
            source: EnsembleSourceParams::new(
                self.pump,
                self.single_photon_efficiency,
                self.reflectivity,
                self.repetition_rate,
            )?,
            memory: MemoryModel::new(self.eta_m)?,
            detector: self.detector()?,
            channel: self.channel()?,
        })
    }

    pub fn evaluate(&self) -> Result<Evaluation> {
        match self.protocol {
            Protocol::Original => Ok(Evaluation::plain(secret_key_rate_original(&self.original_params()?)?)),
            Protocol::Hybrid => Ok(Evaluation::plain(secret_key_rate_hybrid(&self.hybrid_params()?)?)),
            Protocol::Ensemble => {
                let out = secret_key_rate_ensemble(&self.ensemble_params()?)?;
                Ok(Evaluation {
                    rate: out.rate,
                    diagnostic: out.diagnostic,
                })
            }
        }
    }

    /// Secret fraction of the final chained state before clamping at zero. Distance and rate
    /// parameters play no role; only the state-level quantities do.
    pub fn signed_secret_fraction(&self) -> Result<f64> {
        match self.protocol {
            Protocol::Original => {
                let p = self.original_params()?;
                let gamma = detection_gamma(&p.detector)?;
                let chain = chain_evaluate(p.f0, &p.gate, gamma, p.nesting, p.rounds)?;
                self.qkd.secret_fraction(&chain.state.qber())
            }
            Protocol::Hybrid => {
                let gate = DissipativeGate::new(self.p_g)?;
                let chain = hybrid_chain_evaluate(self.f0, &gate, self.nesting, self.rounds)?;
                self.qkd.secret_fraction(&chain.state.qber())
            }
            Protocol::Ensemble => Ok(self.evaluate()?.rate.r_secret_fraction),
        }
    }
}

/// A rate decomposition plus any reason it was forced to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rate: RateBreakdown,
    pub diagnostic: Option<String>,
}

impl Evaluation {
    fn plain(rate: RateBreakdown) -> Self {
        Self {
            rate,
            diagnostic: None,
        }
    }
}
