//! Repeater with coherent-state qubus links, unambiguous state discrimination heralding, and
//! dissipative two-qubit gates that only introduce dephasing-type errors.

use crate::detector::DetectorModel;
use crate::error::{check_unit, Error, Result};
use crate::original::label_product;
use crate::rate::{
    compose_qkd_rate, p_l0_recursion, rate_deterministic, transmittivity, ChannelModel,
    RateBreakdown, RepeaterGeometry,
};
use crate::states::{BellDiagonalState, QkdProtocol};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridLinkParams {
    /// Coherent-state amplitude of the qubus.
    pub alpha: f64,
    /// Effective light-matter interaction phase in radians.
    pub theta: f64,
    /// Segment length in km.
    pub l0: f64,
}

impl HybridLinkParams {
    pub fn new(alpha: f64, theta: f64, l0: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
                domain: "[0, inf)",
            });
        }
        if !(theta > 0.0 && theta <= std::f64::consts::PI) {
            return Err(Error::Domain {
                name: "theta",
                value: theta,
                domain: "(0, pi]",
            });
        }
        if !(l0 >= 0.0) {
            return Err(Error::Domain {
                name: "L0",
                value: l0,
                domain: "[0, inf)",
            });
        }
        Ok(Self { alpha, theta, l0 })
    }

    /// α² sin²(θ/2), the only combination of α and θ the link depends on.
    pub fn excitation(&self) -> f64 {
        (self.alpha * (self.theta / 2.0).sin()).powi(2)
    }
}

/// Qubus-mediated two-qubit gate whose imperfection is a local transmission `p_g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipativeGate {
    pub p_g: f64,
}

impl DissipativeGate {
    pub fn new(p_g: f64) -> Result<Self> {
        if !(p_g > 0.0 && p_g <= 1.0) {
            return Err(Error::Domain {
                name: "p_G",
                value: p_g,
                domain: "(0, 1]",
            });
        }
        Ok(Self { p_g })
    }

    pub fn perfect() -> Self {
        Self { p_g: 1.0 }
    }

    pub fn dephasing_exponent(&self) -> f64 {
        let p = self.p_g;
        std::f64::consts::PI * (1.0 - p * p) / (p.sqrt() * (1.0 + p))
    }

    /// Probability that the gate introduces no Z error on the control.
    pub fn p_c(&self) -> f64 {
        (1.0 + (-self.dephasing_exponent() / 2.0).exp()) / 2.0
    }
}

pub fn hybrid_initial_fidelity(link: &HybridLinkParams, channel: &ChannelModel, d: &DetectorModel) -> Result<f64> {
    let eta_t = transmittivity(link.l0, channel)?;
    let decay = 2.0 * (1.0 + eta_t * (1.0 - 2.0 * d.eta_d)) * link.excitation();
    Ok((1.0 + (-decay).exp()) / 2.0)
}

/// Heralding probability of a link of fidelity `f0`: 1 − (2F₀ − 1)^(η_t η_d / (1 + η_t(1 − 2η_d))).
pub fn hybrid_success_probability(f0: f64, l0: f64, channel: &ChannelModel, d: &DetectorModel) -> Result<f64> {
    if !(0.5..=1.0).contains(&f0) {
        return Err(Error::Domain {
            name: "F0",
            value: f0,
            domain: "[1/2, 1]",
        });
    }
    let eta_t = transmittivity(l0, channel)?;
    let denom = 1.0 + eta_t * (1.0 - 2.0 * d.eta_d);
    if !(denom > 0.0) {
        return Err(Error::Domain {
            name: "1 + eta_t (1 - 2 eta_d)",
            value: denom,
            domain: "(0, inf)",
        });
    }
    let exponent = eta_t * d.eta_d / denom;
    Ok(1.0 - (2.0 * f0 - 1.0).powf(exponent))
}

/// Swapping with a dissipative CNOT: for identical inputs this equals the standard dephasing
/// swap map; unequal inputs use its symmetric bilinear extension.
pub fn hybrid_swap_map(left: &BellDiagonalState, right: &BellDiagonalState, g: &DissipativeGate) -> BellDiagonalState {
    let p = g.p_c();
    let [si, sz, sx, sy] = label_product(left, right);
    let ok = p * p;
    let one = p * (1.0 - p);
    let both = (1.0 - p) * (1.0 - p);
    BellDiagonalState::from_weights_unchecked([
        ok * si + one * (sz + sx) + both * sy,
        ok * sz + one * (si + sy) + both * sx,
        ok * sx + one * (si + sy) + both * sz,
        ok * sy + one * (sz + sx) + both * si,
    ])
}

/// One Deutsch round with dissipative CNOTs.
///
/// Bell states are tracked as Pauli labels (x, z): φ⁺ = (0,0), φ⁻ = (0,1), ψ⁺ = (1,0), ψ⁻ = (1,1).
/// The local rotations exchange φ⁻ and ψ⁻; each party's gate flips z of the source pair and x of
/// the target pair with probability 1 − p_c, so each pair picks up its flip with probability
/// 2p_c(1 − p_c). A bilateral CNOT keeps the run iff the x bits agree and leaves z₁ ⊕ z₂.
pub fn hybrid_distill_map(s: &BellDiagonalState, g: &DissipativeGate) -> Result<(BellDiagonalState, f64)> {
    let p = g.p_c();
    let e = 2.0 * p * (1.0 - p);
    // Rotated weights indexed by 2x + z.
    let r = [s.a, s.d, s.c, s.b];
    let source: [f64; 4] = std::array::from_fn(|i| (1.0 - e) * r[i] + e * r[i ^ 1]);
    let target: [f64; 4] = std::array::from_fn(|i| (1.0 - e) * r[i] + e * r[i ^ 2]);
    let mut out = [0.0; 4];
    for (i, &w1) in source.iter().enumerate() {
        for (j, &w2) in target.iter().enumerate() {
            if i >> 1 == j >> 1 {
                out[(i & 2) | ((i ^ j) & 1)] += w1 * w2;
            }
        }
    }
    let p_d: f64 = out.iter().sum();
    if !(p_d > 0.0) {
        return Err(Error::DistillationFailed);
    }
    Ok((BellDiagonalState::normalized(out), p_d))
}

/// Closed-form success probability of [`hybrid_distill_map`].
pub fn hybrid_distill_success(s: &BellDiagonalState, g: &DissipativeGate) -> f64 {
    let p = g.p_c();
    let t = (s.a - s.b - s.c + s.d).powi(2);
    (s.b + s.c).powi(2) + (s.a + s.d).powi(2) - 2.0 * t * p + 2.0 * t * p * p
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridChainOutcome {
    pub state: BellDiagonalState,
    pub distill_success: Vec<f64>,
}

pub fn hybrid_chain_evaluate(f0: f64, g: &DissipativeGate, nesting: u32, rounds: u32) -> Result<HybridChainOutcome> {
    if !(0.5..=1.0).contains(&f0) {
        return Err(Error::Domain {
            name: "F0",
            value: f0,
            domain: "[1/2, 1]",
        });
    }
    let mut state = BellDiagonalState::from_weights_unchecked([f0, 1.0 - f0, 0.0, 0.0]);
    let mut distill_success = Vec::with_capacity(rounds as usize);
    for _ in 0..rounds {
        let (next, p_d) = hybrid_distill_map(&state, g)?;
        state = next;
        distill_success.push(p_d);
    }
    for _ in 0..nesting {
        state = hybrid_swap_map(&state, &state, g);
    }
    Ok(HybridChainOutcome {
        state,
        distill_success,
    })
}

/// Link fidelity given either directly or through the physical qubus parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HybridSource {
    Fidelity(f64),
    Qubus { alpha: f64, theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    pub length: f64,
    pub nesting: u32,
    pub rounds: u32,
    pub source: HybridSource,
    pub gate: DissipativeGate,
    pub detector: DetectorModel,
    pub channel: ChannelModel,
    pub qkd: QkdProtocol,
    /// Divide the rate by 2^k to compare protocols at equal memory count.
    pub normalize_per_memory: bool,
}

pub const HYBRID_BETA: f64 = 2.0;

pub fn secret_key_rate_hybrid(params: &HybridParams) -> Result<RateBreakdown> {
    let geom = RepeaterGeometry::new(params.length, params.nesting, HYBRID_BETA)?;
    let l0 = geom.segment_length();
    let f0 = match params.source {
        HybridSource::Fidelity(f) => f,
        HybridSource::Qubus { alpha, theta } => {
            let link = HybridLinkParams::new(alpha, theta, l0)?;
            hybrid_initial_fidelity(&link, &params.channel, &params.detector)?
        }
    };
    check_unit("F0", f0)?;
    let p0 = hybrid_success_probability(f0, l0, &params.channel, &params.detector)?;
    let t0 = 2.0 * l0 / params.channel.c;
    let chain = hybrid_chain_evaluate(f0, &params.gate, params.nesting, params.rounds)?;
    let r_inf = params.qkd.secret_fraction(&chain.state.qber())?;
    if p0 <= 0.0 {
        return Ok(compose_qkd_rate(0.0, 1.0, 1.0, r_inf));
    }
    let p_l0 = p_l0_recursion(p0, &chain.distill_success)?;
    let mut r_rep = rate_deterministic(t0, params.nesting, *p_l0.last().expect("non-empty"))?;
    if params.normalize_per_memory {
        r_rep /= f64::from(1u32 << params.rounds);
    }
    Ok(compose_qkd_rate(r_rep, 1.0, 1.0, r_inf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::original::oracle::{distill_oracle, swap_oracle, GateNoise};
    use crate::original::{distill_map, DepolarizingGate};
    use crate::rate::z_average_attempts;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn bd(w: [f64; 4]) -> BellDiagonalState {
        BellDiagonalState::new(w[0], w[1], w[2], w[3]).unwrap()
    }

    /// Printed closed form of the dephasing swap map, variable p = p_c.
    fn swap_closed_form(s: &BellDiagonalState, p: f64) -> [f64; 4] {
        let BellDiagonalState { a, b, c, d } = *s;
        let t = (a - b - c + d).powi(2);
        [
            2.0 * b * c + 2.0 * a * d + 2.0 * (-2.0 * b * c + a * (b + c - 2.0 * d) + (b + c) * d) * p + t * p * p,
            2.0 * a * c + 2.0 * b * d + (a * a + (b + c).powi(2) - 4.0 * b * d + d * d + 2.0 * a * (-2.0 * c + d)) * p - t * p * p,
            2.0 * a * b + 2.0 * c * d + (a * a + (b + c).powi(2) - 4.0 * c * d + d * d + 2.0 * a * (-2.0 * b + d)) * p - t * p * p,
            a * a + b * b + c * c + d * d - 2.0 * (a * a + b * b + c * c - a * (b + c) - (b + c) * d + d * d) * p + t * p * p,
        ]
    }

    fn params(f0: f64, nesting: u32, rounds: u32, p_g: f64) -> HybridParams {
        HybridParams {
            length: 600.0,
            nesting,
            rounds,
            source: HybridSource::Fidelity(f0),
            gate: DissipativeGate::new(p_g).unwrap(),
            detector: DetectorModel::ideal(),
            channel: ChannelModel::default(),
            qkd: QkdProtocol::Bb84,
            normalize_per_memory: false,
        }
    }

    #[test]
    fn gate_parameters() {
        let g = DissipativeGate::perfect();
        assert_eq!(g.dephasing_exponent(), 0.0);
        assert_eq!(g.p_c(), 1.0);
        let g = DissipativeGate::new(0.9).unwrap();
        let x = std::f64::consts::PI * 0.19 / (0.9f64.sqrt() * 1.9);
        assert_abs_diff_eq!(g.dephasing_exponent(), x, epsilon = 1e-15);
        assert!(g.p_c() > 0.5 && g.p_c() < 1.0);
        assert!(DissipativeGate::new(0.0).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let ch = ChannelModel::default();
        let d = DetectorModel::lossy(0.9).unwrap();
        let link = HybridLinkParams::new(0.0, 1.0, 75.0).unwrap();
        assert_eq!(hybrid_initial_fidelity(&link, &ch, &d).unwrap(), 1.0);
        // α² sin²(θ/2) = 0.01
        let link = HybridLinkParams::new(0.1, std::f64::consts::PI, 75.0).unwrap();
        let eta_t = transmittivity(75.0, &ch).unwrap();
        let expected = (1.0 + (-2.0 * (1.0 + eta_t * (1.0 - 1.8)) * 0.01f64).exp()) / 2.0;
        assert_abs_diff_eq!(hybrid_initial_fidelity(&link, &ch, &d).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.9905, epsilon = 1e-4);
        let half = DetectorModel::lossy(0.5).unwrap();
        let near = HybridLinkParams::new(0.3, 1.0, 1.0).unwrap();
        let far = HybridLinkParams::new(0.3, 1.0, 300.0).unwrap();
        assert_abs_diff_eq!(
            hybrid_initial_fidelity(&near, &ch, &half).unwrap(),
            hybrid_initial_fidelity(&far, &ch, &half).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn success_probability_examples() {
        let ch = ChannelModel::default();
        let d = DetectorModel::ideal();
        assert_eq!(hybrid_success_probability(0.5, 75.0, &ch, &d).unwrap(), 1.0);
        // η_t = 0.1 at 10/0.17 km
        let l0 = 10.0 / 0.17;
        let p = hybrid_success_probability(0.99, l0, &ch, &d).unwrap();
        assert_abs_diff_eq!(p, 1.0 - 0.98f64.powf(0.1 / 0.9), epsilon = 1e-14);
        assert_abs_diff_eq!(p, 0.0022422, epsilon = 1e-7);
        assert!(hybrid_success_probability(0.4, 75.0, &ch, &d).is_err());
        assert!(hybrid_success_probability(0.9, 0.0, &ch, &d).is_err());
    }

    #[test]
    fn swap_examples() {
        let g1 = DissipativeGate::perfect();
        let phi = BellDiagonalState::phi_plus();
        assert_eq!(hybrid_swap_map(&phi, &phi, &g1).weights(), [1.0, 0.0, 0.0, 0.0]);
        let f = 0.93;
        let s = bd([f, 1.0 - f, 0.0, 0.0]);
        let out = hybrid_swap_map(&s, &s, &g1);
        assert_abs_diff_eq!(out.a, f * f + (1.0 - f) * (1.0 - f), epsilon = 1e-15);
        assert_abs_diff_eq!(out.b, 2.0 * f * (1.0 - f), epsilon = 1e-15);
        assert_eq!((out.c, out.d), (0.0, 0.0));
    }

    #[test]
    fn swap_matches_closed_form_and_oracle() {
        for w in [[0.7, 0.1, 0.15, 0.05], [0.4, 0.3, 0.2, 0.1], [0.9, 0.1, 0.0, 0.0]] {
            let s = bd(w);
            for p_g in [0.2, 0.7, 0.95, 1.0] {
                let g = DissipativeGate::new(p_g).unwrap();
                let out = hybrid_swap_map(&s, &s, &g);
                for (x, y) in out.weights().iter().zip(swap_closed_form(&s, g.p_c())) {
                    assert_abs_diff_eq!(*x, y, epsilon = 1e-14);
                }
                let oracle = swap_oracle(&s, &s, GateNoise::PauliFlips(g.p_c()), 1.0);
                for (x, y) in out.weights().iter().zip(oracle.weights()) {
                    assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn distill_examples() {
        let g1 = DissipativeGate::perfect();
        let f = 0.8;
        let (_, p) = hybrid_distill_map(&bd([f, 1.0 - f, 0.0, 0.0]), &g1).unwrap();
        assert_abs_diff_eq!(p, f * f + (1.0 - f) * (1.0 - f), epsilon = 1e-15);
        let (out, p) = hybrid_distill_map(&BellDiagonalState::phi_plus(), &g1).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(out.weights(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn distill_matches_oracle_and_normalizer() {
        for w in [[0.7, 0.1, 0.15, 0.05], [0.4, 0.3, 0.2, 0.1], [0.55, 0.05, 0.1, 0.3]] {
            let s = bd(w);
            for p_g in [0.5, 0.9, 1.0] {
                let g = DissipativeGate::new(p_g).unwrap();
                let (out, p) = hybrid_distill_map(&s, &g).unwrap();
                assert_abs_diff_eq!(p, hybrid_distill_success(&s, &g), epsilon = 1e-14);
                let (oracle, po) = distill_oracle(&s, GateNoise::PauliFlips(g.p_c()));
                assert_abs_diff_eq!(p, po, epsilon = 1e-12);
                for (x, y) in out.weights().iter().zip(oracle.weights()) {
                    assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn perfect_link_rate() {
        let p = params(1.0, 1, 0, 1.0);
        let out = secret_key_rate_hybrid(&p).unwrap();
        assert_eq!(out.r_secret_fraction, 1.0);
        assert_eq!(out.r_qkd, 0.0);
        let p = params(0.97, 1, 0, 1.0);
        let out = secret_key_rate_hybrid(&p).unwrap();
        let l0 = 300.0;
        let p0 = hybrid_success_probability(0.97, l0, &p.channel, &p.detector).unwrap();
        assert_relative_eq!(out.r_rep, 1.0 / (2.0 * l0 / 2e5 * z_average_attempts(1, p0).unwrap()), max_relative = 1e-14);
    }

    #[test]
    fn memory_normalization_divides_by_two_to_the_k() {
        let mut p = params(0.95, 2, 2, 1.0);
        let plain = secret_key_rate_hybrid(&p).unwrap().r_qkd;
        p.normalize_per_memory = true;
        assert_relative_eq!(secret_key_rate_hybrid(&p).unwrap().r_qkd, plain / 4.0, max_relative = 1e-15);
    }

    fn state_strategy() -> impl Strategy<Value = BellDiagonalState> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_filter_map("positive", |(a, b, c, d)| {
            let s = a + b + c + d;
            (s > 1e-3).then(|| BellDiagonalState::normalized([a, b, c, d]))
        })
    }

    proptest! {
        #[test]
        fn swap_normalized(s in state_strategy(), p_g in 1e-3f64..=1.0) {
            let out = hybrid_swap_map(&s, &s, &DissipativeGate::new(p_g).unwrap());
            prop_assert!((out.sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn perfect_distill_is_deutsch(s in state_strategy()) {
            let (h, ph) = hybrid_distill_map(&s, &DissipativeGate::perfect()).unwrap();
            let (o, po) = distill_map(&s, &DepolarizingGate::perfect()).unwrap();
            prop_assert!((ph - po).abs() < 1e-10);
            for (x, y) in h.weights().iter().zip(o.weights()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn phase_flip_family_closed(f in 0.0f64..=1.0) {
            let s = BellDiagonalState::normalized([f, 1.0 - f, 0.0, 0.0]);
            let out = hybrid_swap_map(&s, &s, &DissipativeGate::perfect());
            prop_assert!(out.c.abs() < 1e-12 && out.d.abs() < 1e-12);
        }

        #[test]
        fn success_decreasing_in_fidelity(f in 0.5f64..0.99, l0 in 1.0f64..200.0) {
            let ch = ChannelModel::default();
            let d = DetectorModel::lossy(0.9).unwrap();
            let a = hybrid_success_probability(f, l0, &ch, &d).unwrap();
            let b = hybrid_success_probability(f + 0.01, l0, &ch, &d).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn fidelity_monotone(alpha in 0.01f64..1.0, l0 in 1.0f64..200.0) {
            let ch = ChannelModel::default();
            let d = DetectorModel::lossy(0.9).unwrap();
            let f = |a: f64, l: f64| hybrid_initial_fidelity(&HybridLinkParams::new(a, 1.0, l).unwrap(), &ch, &d).unwrap();
            prop_assert!(f(alpha + 0.01, l0) < f(alpha, l0));
            prop_assert!(f(alpha, l0 + 10.0) < f(alpha, l0));
        }
    }
}
