//! Channel loss, timing, waiting-time combinatorics and repeater rate formulas.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Fiber attenuation in dB/km.
    pub alpha_att: f64,
    /// Signal speed in km/s.
    pub c: f64,
}

impl ChannelModel {
    pub fn new(alpha_att: f64, c: f64) -> Result<Self> {
        if !(alpha_att >= 0.0) {
            return Err(Error::Domain {
                name: "alpha_att",
                value: alpha_att,
                domain: "[0, inf)",
            });
        }
        if !(c > 0.0) {
            return Err(Error::Domain {
                name: "c",
                value: c,
                domain: "(0, inf)",
            });
        }
        Ok(Self { alpha_att, c })
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            alpha_att: 0.17,
            c: 2e5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeaterGeometry {
    /// Total distance in km.
    pub length: f64,
    pub nesting: u32,
    /// 1 for sources in the middle of a segment, 2 for sources at one end.
    pub beta: f64,
}

impl RepeaterGeometry {
    pub fn new(length: f64, nesting: u32, beta: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Domain {
                name: "L",
                value: length,
                domain: "(0, inf)",
            });
        }
        if beta != 1.0 && beta != 2.0 {
            return Err(Error::Domain {
                name: "beta",
                value: beta,
                domain: "{1, 2}",
            });
        }
        if nesting > 30 {
            return Err(Error::Domain {
                name: "N",
                value: nesting as f64,
                domain: "[0, 30]",
            });
        }
        Ok(Self {
            length,
            nesting,
            beta,
        })
    }

    pub fn segment_length(&self) -> f64 {
        self.length / f64::from(1u32 << self.nesting)
    }
}

pub fn transmittivity(length: f64, channel: &ChannelModel) -> Result<f64> {
    if !(length >= 0.0) {
        return Err(Error::Domain {
            name: "length",
            value: length,
            domain: "[0, inf)",
        });
    }
    Ok(10f64.powf(-channel.alpha_att * length / 10.0))
}

pub fn fundamental_time(geom: &RepeaterGeometry, channel: &ChannelModel) -> f64 {
    geom.beta * geom.segment_length() / channel.c
}

fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// Up to this many segments the alternating binomial sum keeps at least 13 significant digits.
const DIRECT_SUM_MAX_SEGMENTS: u32 = 16;
const MAX_NESTING_FOR_Z: u32 = 10;

/// Expected number of attempts until all 2^N segments hold a pair, each succeeding with probability P per attempt.
pub fn z_average_attempts(nesting: u32, p: f64) -> Result<f64> {
    if p == 0.0 {
        return Err(Error::Divergence("Z_N(0) is infinite".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain {
            name: "P",
            value: p,
            domain: "(0, 1]",
        });
    }
    if nesting > MAX_NESTING_FOR_Z {
        return Err(Error::Domain {
            name: "N",
            value: nesting as f64,
            domain: "[0, 10]",
        });
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let n = 1u32 << nesting;
    if n <= DIRECT_SUM_MAX_SEGMENTS {
        Ok(z_alternating_sum(n, p))
    } else {
        Ok(z_first_step_recursion(n, p))
    }
}

fn z_alternating_sum(n: u32, p: f64) -> f64 {
    let log_q = (-p).ln_1p();
    let mut pos = 0.0;
    let mut neg = 0.0;
    for j in 1..=n {
        let success_within_j = -(f64::from(j) * log_q).exp_m1();
        let term = binomial(n, j) as f64 / success_within_j;
        if j % 2 == 1 {
            pos += term;
        } else {
            neg += term;
        }
    }
    pos - neg
}

/// Same expectation as the alternating sum, obtained by conditioning on the number of segments
/// that succeed in the first attempt. Every term is positive, so no cancellation occurs.
pub(crate) fn z_first_step_recursion(n: u32, p: f64) -> f64 {
    let log_p = p.ln();
    let log_q = (-p).ln_1p();
    let mut expect = vec![0.0f64; n as usize + 1];
    for r in 1..=n as usize {
        let mut log_binom = 0.0f64;
        let mut acc = 1.0;
        for m in 1..=r {
            log_binom += ((r - m + 1) as f64).ln() - (m as f64).ln();
            let weight = (log_binom + m as f64 * log_p + (r - m) as f64 * log_q).exp();
            acc += weight * expect[r - m];
        }
        expect[r] = acc / -(r as f64 * log_q).exp_m1();
    }
    expect[n as usize]
}

pub fn p_l0_recursion(p0: f64, distill_success: &[f64]) -> Result<Vec<f64>> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(if p0 == 0.0 {
            Error::Divergence("P0 = 0".into())
        } else {
            Error::Domain {
                name: "P0",
                value: p0,
                domain: "(0, 1]",
            }
        });
    }
    let mut out = Vec::with_capacity(distill_success.len() + 1);
    out.push(p0);
    for &pd in distill_success {
        if !(pd > 0.0 && pd <= 1.0) {
            return Err(Error::Divergence(format!("distillation success probability {pd}")));
        }
        let prev = *out.last().expect("non-empty");
        out.push(pd / z_average_attempts(1, prev)?);
    }
    Ok(out)
}

pub fn rate_deterministic(t0: f64, nesting: u32, p_l0_k: f64) -> Result<f64> {
    Ok(1.0 / (t0 * z_average_attempts(nesting, p_l0_k)?))
}

/// Upper bound on the pair rate for probabilistic swapping; `p_es` has one entry per nesting level
/// and `p_d` one per distillation round.
pub fn rate_probabilistic(t0: f64, p0: f64, p_es: &[f64], p_d: &[f64], a: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain {
            name: "a",
            value: a,
            domain: "(0, 1]",
        });
    }
    let levels = (p_es.len() + p_d.len()) as i32;
    let prefactor = (2.0 / (3.0 * a)).powi(levels);
    let products: f64 = p_es.iter().chain(p_d).product();
    Ok(prefactor * p0 * products / t0)
}

pub fn a_factor(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain {
            name: "P",
            value: p,
            domain: "(0, 1]",
        });
    }
    Ok(2.0 * (3.0 - 2.0 * p) / (3.0 * (2.0 - p)))
}

/// Decomposition of the secret key rate into repeater rate, click probability, sifting and secret fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub r_rep: f64,
    pub p_click: f64,
    pub r_sift: f64,
    pub r_secret_fraction: f64,
    pub r_qkd: f64,
    /// Present when the probabilistic bound was used.
    pub a_factor: Option<f64>,
}

impl RateBreakdown {
    pub fn zero() -> Self {
        Self {
            r_rep: 0.0,
            p_click: 0.0,
            r_sift: 1.0,
            r_secret_fraction: 0.0,
            r_qkd: 0.0,
            a_factor: None,
        }
    }

    pub fn with_a_factor(mut self, a: f64) -> Self {
        self.a_factor = Some(a);
        self
    }

    /// The bound becomes loose when the a-factor approaches 1.
    pub fn loose_bound(&self) -> bool {
        self.a_factor.is_some_and(|a| a > 0.999)
    }
}

pub fn compose_qkd_rate(r_rep: f64, p_click: f64, r_sift: f64, r_inf: f64) -> RateBreakdown {
    RateBreakdown {
        r_rep,
        p_click,
        r_sift,
        r_secret_fraction: r_inf,
        r_qkd: r_rep * p_click * r_sift * r_inf.max(0.0),
        a_factor: None,
    }
}
