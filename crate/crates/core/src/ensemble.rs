//! Atomic-ensemble repeater: SPDC plus single-photon sources feeding a heralded qubit amplifier,
//! two-photon Bell measurements for distribution and swapping, all in truncated Fock space.

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::fock::{
    joint_measurement, project_pure_mixture, qkd_click_and_error, Basis, DensityOperator,
    FockStateVector, LinearNetwork, PnrdElement, Truncation, IMPOSSIBLE_PROBABILITY,
};
use crate::rate::{
    a_factor, compose_qkd_rate, fundamental_time, rate_probabilistic, transmittivity,
    ChannelModel, RateBreakdown, RepeaterGeometry,
};
use crate::states::{secret_fraction_bb84, QberTriple};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub const MAX_PUMP: f64 = 0.1;
pub const ENSEMBLE_BETA: f64 = 1.0;
/// Each heralding pattern stands for four equivalent twofold coincidences.
const COINCIDENCE_MULTIPLICITY: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSourceParams {
    /// SPDC pump parameter; n pairs are emitted with probability p^n (1 − p).
    pub pump: f64,
    /// Single-photon source efficiency.
    pub single_photon_efficiency: f64,
    /// Reflectivity of the splitter dividing each single photon between amplifier and memory.
    pub reflectivity: f64,
    /// Slowest source repetition rate in Hz; infinite means source preparation time is negligible.
    pub repetition_rate: f64,
}

impl EnsembleSourceParams {
    pub fn new(pump: f64, single_photon_efficiency: f64, reflectivity: f64, repetition_rate: f64) -> Result<Self> {
        if !(0.0..=MAX_PUMP).contains(&pump) {
            return Err(Error::Domain {
                name: "p",
                value: pump,
                domain: "[0, 0.1]",
            });
        }
        for (name, v) in [("q", single_photon_efficiency), ("R", reflectivity)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "[0, 1]",
                });
            }
        }
        if !(repetition_rate > 0.0) {
            return Err(Error::Domain {
                name: "gamma_rep",
                value: repetition_rate,
                domain: "(0, inf]",
            });
        }
        Ok(Self {
            pump,
            single_photon_efficiency,
            reflectivity,
            repetition_rate,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryModel {
    /// Probability that the memory releases its stored photon on read-out.
    pub eta_m: f64,
}

impl MemoryModel {
    pub fn new(eta_m: f64) -> Result<Self> {
        if !(eta_m > 0.0 && eta_m <= 1.0) {
            return Err(Error::Domain {
                name: "eta_m",
                value: eta_m,
                domain: "(0, 1]",
            });
        }
        Ok(Self { eta_m })
    }
}

const SOURCE_TRUNC: Truncation = Truncation {
    per_mode: 6,
    total: 6,
};

/// Pair state on (g_H, g_V, in_H, in_V), keeping emissions of at most two pairs.
pub fn spdc_state(p: f64) -> Result<DensityOperator> {
    let mut rho = DensityOperator::zero(4, SOURCE_TRUNC);
    for (w, psi) in spdc_components(p)? {
        rho.add_pure(&psi, w);
    }
    Ok(rho)
}

/// Normalized m-pair emissions with their weights (1 − p) p^m, m = 0, 1, 2.
fn spdc_components(p: f64) -> Result<Vec<(f64, FockStateVector)>> {
    if !(0.0..=MAX_PUMP).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            domain: "[0, 0.1]",
        });
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(3);
    let mut term = FockStateVector::vacuum(4, SOURCE_TRUNC);
    for m in 0..=2i32 {
        if m > 0 {
            let mut next = FockStateVector::zero(4, SOURCE_TRUNC);
            for (g, i) in [(0usize, 2usize), (1, 3)] {
                next.add_scaled(&term.create(g).create(i), C64::new(h, 0.0));
            }
            term = next;
        }
        let weight = (1.0 - p) * p.powi(m);
        if weight > 0.0 {
            let mut unit = term.clone();
            unit.scale(C64::new(1.0 / term.norm_sqr().sqrt(), 0.0));
            out.push((weight, unit));
        }
    }
    Ok(out)
}

/// One mode holding a photon with probability q.
pub fn single_photon_state(q: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain {
            name: "q",
            value: q,
            domain: "[0, 1]",
        });
    }
    let mut rho = DensityOperator::zero(1, SOURCE_TRUNC);
    if q < 1.0 {
        rho.add_pure(&FockStateVector::vacuum(1, SOURCE_TRUNC), 1.0 - q);
    }
    if q > 0.0 {
        rho.add_pure(&FockStateVector::basis(&[1], SOURCE_TRUNC)?, q);
    }
    Ok(rho)
}

/// A heralding probability and the normalized state it prepares.
#[derive(Debug, Clone, PartialEq)]
pub struct Heralded {
    pub probability: f64,
    pub state: DensityOperator,
}

fn herald_pattern(eta: f64) -> Result<[PnrdElement; 4]> {
    let on = PnrdElement::new(1, eta)?;
    let off = PnrdElement::new(0, eta)?;
    Ok([on, off, on, off])
}

/// Source network modes: g_H, g_V, in_H, in_V, s_H, s_V, o_H, o_V. The amplifier outputs
/// d1..d4 reuse modes 2..5.
fn amplifier_network() -> LinearNetwork {
    LinearNetwork::real(
        vec![2, 3, 4, 5],
        &[
            &[0.5, 0.5, 0.5, -0.5],
            &[0.5, 0.5, -0.5, 0.5],
            &[-0.5, 0.5, 0.5, 0.5],
            &[0.5, -0.5, 0.5, 0.5],
        ],
    )
    .expect("amplifier network is orthogonal")
}

/// Bell-measurement network on (out_H, out_V, out'_H, out'_V) → (d1, d2, d3, d4).
fn bell_measurement_network() -> LinearNetwork {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    LinearNetwork::real(
        vec![0, 1, 2, 3],
        &[
            &[0.0, 0.0, s, s],
            &[s, -s, 0.0, 0.0],
            &[s, s, 0.0, 0.0],
            &[0.0, 0.0, s, -s],
        ],
    )
    .expect("Bell-measurement network is orthogonal")
}

/// Heralded local pair on (g_H, g_V, out_H, out_V). The heralded state is already |φ⁺⟩ in the
/// ideal limit, so the post-herald relabeling is the identity.
pub fn local_pair_source(src: &EnsembleSourceParams, d: &DetectorModel) -> Result<Heralded> {
    let network = source_network(src.reflectivity)?;
    let pattern = source_pattern(d)?;
    let q = src.single_photon_efficiency;
    let mut components = Vec::with_capacity(12);
    for (pair_weight, pair) in spdc_components(src.pump)? {
        for (h, wh) in [(0u8, 1.0 - q), (1, q)] {
            for (v, wv) in [(0u8, 1.0 - q), (1, q)] {
                let w = pair_weight * wh * wv;
                if w == 0.0 {
                    continue;
                }
                let singles = FockStateVector::basis(&[h, v, 0, 0], SOURCE_TRUNC)?;
                let input = pair.tensor(&singles).with_truncation(SOURCE_TRUNC);
                components.push((w, input.apply_network(&network)?));
            }
        }
    }
    herald(project_pure_mixture(&components, &pattern)?)
}

fn source_network(reflectivity: f64) -> Result<LinearNetwork> {
    Ok(LinearNetwork::splitter(4, 6, reflectivity)?
        .then(&LinearNetwork::splitter(5, 7, reflectivity)?)
        .then(&amplifier_network()))
}

fn source_pattern(d: &DetectorModel) -> Result<Vec<(usize, PnrdElement)>> {
    Ok((2..6).zip(herald_pattern(d.eta_d)?).collect())
}

fn herald(projected: DensityOperator) -> Result<Heralded> {
    let p = projected.trace();
    if !(p >= IMPOSSIBLE_PROBABILITY) {
        return Err(Error::HeraldingImpossible(format!("source herald probability {p:e}")));
    }
    Ok(Heralded {
        probability: (COINCIDENCE_MULTIPLICITY * p).min(1.0),
        state: projected.scaled(1.0 / p),
    })
}

fn bell_measurement(left: &DensityOperator, left_modes: [usize; 2], right: &DensityOperator, right_modes: [usize; 2], eta: f64) -> Result<Heralded> {
    let (p, state) = joint_measurement(
        left,
        &left_modes,
        right,
        &right_modes,
        &bell_measurement_network(),
        &herald_pattern(eta)?,
    )?;
    Ok(Heralded {
        probability: (COINCIDENCE_MULTIPLICITY * p).min(1.0),
        state,
    })
}

/// Entangles two neighbouring local sources over a segment of length `l0`; result on (g_H, g_V, g'_H, g'_V).
pub fn distribute_link(
    left: &DensityOperator,
    right: &DensityOperator,
    l0: f64,
    mem: &MemoryModel,
    d: &DetectorModel,
    channel: &ChannelModel,
) -> Result<Heralded> {
    let eta = mem.eta_m * transmittivity(l0 / 2.0, channel)? * d.eta_d;
    bell_measurement(left, [2, 3], right, [2, 3], eta)
}

/// Joins two adjacent links by a Bell measurement on the inner memories.
pub fn swap_level(left: &DensityOperator, right: &DensityOperator, mem: &MemoryModel, d: &DetectorModel) -> Result<Heralded> {
    bell_measurement(left, [2, 3], right, [0, 1], mem.eta_m * d.eta_d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub length: f64,
    pub nesting: u32,
    pub source: EnsembleSourceParams,
    pub memory: MemoryModel,
    pub detector: DetectorModel,
    pub channel: ChannelModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOutcome {
    pub rate: RateBreakdown,
    pub source_probability: f64,
    pub link_probability: f64,
    pub swap_probabilities: Vec<f64>,
    pub qber: Option<QberTriple>,
    pub diagnostic: Option<String>,
}

impl EnsembleOutcome {
    fn failed(reason: String) -> Self {
        Self {
            rate: RateBreakdown::zero(),
            source_probability: 0.0,
            link_probability: 0.0,
            swap_probabilities: Vec::new(),
            qber: None,
            diagnostic: Some(reason),
        }
    }
}

/// Final state of the chain and the heralding probabilities met on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleChain {
    pub source: Heralded,
    pub link_probability: f64,
    pub swap_probabilities: Vec<f64>,
    pub state: DensityOperator,
}

/// Source, distribution and N swap levels; all links at one level are identical.
pub fn ensemble_chain(params: &EnsembleParams) -> Result<EnsembleChain> {
    let geom = RepeaterGeometry::new(params.length, params.nesting, ENSEMBLE_BETA)?;
    let source = local_pair_source(&params.source, &params.detector)?;
    let link = distribute_link(
        &source.state,
        &source.state,
        geom.segment_length(),
        &params.memory,
        &params.detector,
        &params.channel,
    )?;
    let mut state = link.state;
    let mut swap_probabilities = Vec::with_capacity(params.nesting as usize);
    for _ in 0..params.nesting {
        let next = swap_level(&state, &state, &params.memory, &params.detector)?;
        swap_probabilities.push(next.probability);
        state = next.state;
    }
    Ok(EnsembleChain {
        source,
        link_probability: link.probability,
        swap_probabilities,
        state,
    })
}

pub fn secret_key_rate_ensemble(params: &EnsembleParams) -> Result<EnsembleOutcome> {
    if params.nesting == 0 {
        return Err(Error::Domain {
            name: "N",
            value: 0.0,
            domain: "[1, 10]",
        });
    }
    let geom = RepeaterGeometry::new(params.length, params.nesting, ENSEMBLE_BETA)?;
    let chain = match ensemble_chain(params) {
        Ok(c) => c,
        Err(Error::HeraldingImpossible(why)) => return Ok(EnsembleOutcome::failed(why)),
        Err(e) => return Err(e),
    };
    let eta_final = params.memory.eta_m * params.detector.eta_d;
    let key = match qkd_click_and_error(&chain.state, Basis::X, eta_final) {
        Ok(s) => s,
        Err(Error::UndefinedQber) => return Ok(EnsembleOutcome::failed("no valid final clicks".into())),
        Err(e) => return Err(e),
    };
    let test = qkd_click_and_error(&chain.state, Basis::Z, eta_final)?;
    let y = qkd_click_and_error(&chain.state, Basis::Y, eta_final)?;
    let r_inf = secret_fraction_bb84(key.qber.clamp(0.0, 1.0), test.qber.clamp(0.0, 1.0))?;

    let t0 = fundamental_time(&geom, &params.channel);
    let t0_source = if params.source.repetition_rate.is_finite() {
        1.0 / (params.source.repetition_rate * chain.source.probability)
    } else {
        0.0
    };
    let a = a_factor(chain.link_probability)?;
    let r_rep = rate_probabilistic(t0 + t0_source, chain.link_probability, &chain.swap_probabilities, &[], a)?;
    Ok(EnsembleOutcome {
        rate: compose_qkd_rate(r_rep, key.p_click, 1.0, r_inf).with_a_factor(a),
        source_probability: chain.source.probability,
        link_probability: chain.link_probability,
        swap_probabilities: chain.swap_probabilities,
        qber: Some(QberTriple {
            e_x: key.qber,
            e_z: test.qber,
            e_y: y.qber,
        }),
        diagnostic: None,
    })
}
