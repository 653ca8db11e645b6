//! Repeater with depolarized initial pairs, depolarizing two-qubit gates and imperfect detectors.

pub mod oracle;

use crate::detector::DetectorModel;
use crate::error::{check_unit, Error, Result};
use crate::rate::{
    a_factor, compose_qkd_rate, fundamental_time, p_l0_recursion, rate_deterministic,
    rate_probabilistic, transmittivity, ChannelModel, RateBreakdown, RepeaterGeometry,
};
use crate::states::{depolarized_state, BellDiagonalState, QkdProtocol};
use serde::{Deserialize, Serialize};

/// Two-qubit gate that acts ideally with probability `p_g` and fully depolarizes otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingGate {
    pub p_g: f64,
}

impl DepolarizingGate {
    pub fn new(p_g: f64) -> Result<Self> {
        check_unit("p_G", p_g)?;
        Ok(Self { p_g })
    }

    pub fn perfect() -> Self {
        Self { p_g: 1.0 }
    }
}

pub fn initial_success_probability(l0: f64, channel: &ChannelModel) -> Result<f64> {
    transmittivity(l0, channel)
}

/// Probability that a detector reports the correct bit, given that it clicked.
pub fn detection_gamma(d: &DetectorModel) -> Result<f64> {
    let denom = d.eta_d + 2.0 * d.p_dark * (1.0 - d.eta_d);
    if !(denom > 0.0) {
        return Err(Error::Domain {
            name: "eta_d + 2 p_dark (1 - eta_d)",
            value: denom,
            domain: "(0, inf)",
        });
    }
    Ok((d.eta_d + d.p_dark * (1.0 - d.eta_d)) / denom)
}

pub fn swap_success_probability(d: &DetectorModel) -> f64 {
    let single = (1.0 - d.p_dark) * (d.eta_d + 2.0 * d.p_dark * (1.0 - d.eta_d));
    single * single
}

/// Weights of the Pauli-label convolution of two Bell-diagonal states, ordered (I, Z, X, Y) like (A, B, C, D).
pub(crate) fn label_product(l: &BellDiagonalState, r: &BellDiagonalState) -> [f64; 4] {
    let (a1, b1, c1, d1) = (l.a, l.b, l.c, l.d);
    let (a2, b2, c2, d2) = (r.a, r.b, r.c, r.d);
    [
        a1 * a2 + b1 * b2 + c1 * c2 + d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 + d1 * c2,
        a1 * c2 + c1 * a2 + b1 * d2 + d1 * b2,
        a1 * d2 + d1 * a2 + b1 * c2 + c1 * b2,
    ]
}

/// Entanglement swapping through a depolarizing CNOT and two measurements that each report the
/// right bit with probability `gamma`. For identical inputs this is exactly the standard
/// four-coefficient swap map; unequal inputs use its symmetric bilinear extension.
pub fn swap_map(
    left: &BellDiagonalState,
    right: &BellDiagonalState,
    g: &DepolarizingGate,
    gamma: f64,
) -> BellDiagonalState {
    let [si, sz, sx, sy] = label_product(left, right);
    let ok = gamma * gamma;
    let one = gamma * (1.0 - gamma);
    let both = (1.0 - gamma) * (1.0 - gamma);
    let noise = (1.0 - g.p_g) / 4.0;
    let p = g.p_g;
    BellDiagonalState::from_weights_unchecked([
        noise + p * (ok * si + one * (sz + sx) + both * sy),
        noise + p * (ok * sz + one * (si + sy) + both * sx),
        noise + p * (ok * sx + one * (si + sy) + both * sz),
        noise + p * (ok * sy + one * (sz + sx) + both * si),
    ])
}

/// One round of the Deutsch protocol on two identical copies with depolarizing CNOTs.
pub fn distill_map(s: &BellDiagonalState, g: &DepolarizingGate) -> Result<(BellDiagonalState, f64)> {
    let BellDiagonalState { a, b, c, d } = *s;
    let g2 = g.p_g * g.p_g;
    let p_d = 0.5 * (1.0 + g2 * (2.0 * a + 2.0 * d - 1.0).powi(2));
    if !(p_d > 0.0) {
        return Err(Error::DistillationFailed);
    }
    let even = a - b - c + d;
    let a_new = 1.0 + g2 * (even * (3.0 * a + b + c + 3.0 * d) + 4.0 * (a - d).powi(2));
    let b_new = 1.0 - g2 * (a * a + 2.0 * a * (b + c - 7.0 * d) + (b + c + d).powi(2));
    let c_new = 1.0 + g2 * (4.0 * (b - c).powi(2) - even * (a + 3.0 * (b + c) + d));
    let d_new = 1.0
        - g2 * (a * a + 2.0 * a * (b + c + d) + b * b + 2.0 * b * (d - 7.0 * c) + (c + d).powi(2));
    let norm = 8.0 * p_d;
    Ok((
        BellDiagonalState::from_weights_unchecked([a_new / norm, b_new / norm, c_new / norm, d_new / norm]),
        p_d,
    ))
}

/// Final state after `k` distillation rounds on each segment followed by N levels of swapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub state: BellDiagonalState,
    pub distill_success: Vec<f64>,
}

pub fn chain_evaluate(
    f0: f64,
    g: &DepolarizingGate,
    gamma: f64,
    nesting: u32,
    rounds: u32,
) -> Result<ChainOutcome> {
    let mut state = depolarized_state(f0)?;
    let mut distill_success = Vec::with_capacity(rounds as usize);
    for _ in 0..rounds {
        let (next, p_d) = distill_map(&state, g)?;
        state = next;
        distill_success.push(p_d);
    }
    for _ in 0..nesting {
        state = swap_map(&state, &state, g, gamma);
    }
    Ok(ChainOutcome {
        state,
        distill_success,
    })
}

/// Raw key rate with probabilistic swapping and lossy detectors; `p_d` holds the
/// state-level distillation success probabilities.
pub fn raw_key_rate(
    geom: &RepeaterGeometry,
    channel: &ChannelModel,
    detector: &DetectorModel,
    p0: f64,
    p_d: &[f64],
) -> Result<f64> {
    let t0 = fundamental_time(geom, channel);
    let p_es = swap_success_probability(detector);
    let effective: Vec<f64> = p_d.iter().map(|&x| x * p_es).collect();
    let p_last = *p_l0_recursion(p0, &effective)?.last().expect("non-empty");
    let a = a_factor(p_last)?;
    let p_click = detector.eta_d * detector.eta_d;
    let levels = vec![p_es; geom.nesting as usize];
    Ok(rate_probabilistic(t0, p0, &levels, &effective, a)? * p_click)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginalParams {
    pub length: f64,
    pub nesting: u32,
    pub rounds: u32,
    pub f0: f64,
    pub gate: DepolarizingGate,
    pub detector: DetectorModel,
    pub channel: ChannelModel,
    pub qkd: QkdProtocol,
}

pub const ORIGINAL_BETA: f64 = 2.0;

pub fn secret_key_rate_original(params: &OriginalParams) -> Result<RateBreakdown> {
    let geom = RepeaterGeometry::new(params.length, params.nesting, ORIGINAL_BETA)?;
    let l0 = geom.segment_length();
    let p0 = initial_success_probability(l0, &params.channel)?;
    let t0 = fundamental_time(&geom, &params.channel);
    let gamma = detection_gamma(&params.detector)?;
    let chain = chain_evaluate(params.f0, &params.gate, gamma, params.nesting, params.rounds)?;
    let r_inf = params.qkd.secret_fraction(&chain.state.qber())?;
    let p_es = swap_success_probability(&params.detector);
    if p_es == 1.0 {
        let p_l0 = p_l0_recursion(p0, &chain.distill_success)?;
        let r_rep = rate_deterministic(t0, params.nesting, *p_l0.last().expect("non-empty"))?;
        return Ok(compose_qkd_rate(r_rep, 1.0, 1.0, r_inf));
    }
    let effective: Vec<f64> = chain.distill_success.iter().map(|&x| x * p_es).collect();
    let p_l0 = p_l0_recursion(p0, &effective)?;
    let a = a_factor(*p_l0.last().expect("non-empty"))?;
    let levels = vec![p_es; params.nesting as usize];
    let r_rep = rate_probabilistic(t0, p0, &levels, &effective, a)?;
    let p_click = params.detector.eta_d * params.detector.eta_d;
    Ok(compose_qkd_rate(r_rep, p_click, 1.0, r_inf).with_a_factor(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::z_average_attempts;
    use crate::states::{binary_entropy, secret_fraction_bb84};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn bd(w: [f64; 4]) -> BellDiagonalState {
        BellDiagonalState::new(w[0], w[1], w[2], w[3]).unwrap()
    }

    fn params(length: f64, nesting: u32, rounds: u32, f0: f64, p_g: f64, eta_d: f64) -> OriginalParams {
        OriginalParams {
            length,
            nesting,
            rounds,
            f0,
            gate: DepolarizingGate::new(p_g).unwrap(),
            detector: DetectorModel::lossy(eta_d).unwrap(),
            channel: ChannelModel::default(),
            qkd: QkdProtocol::Bb84,
        }
    }

    #[test]
    fn success_probability_examples() {
        let ch = ChannelModel::default();
        assert_eq!(initial_success_probability(0.0, &ch).unwrap(), 1.0);
        assert_abs_diff_eq!(initial_success_probability(75.0, &ch).unwrap(), 10f64.powf(-1.275), epsilon = 1e-15);
        assert_abs_diff_eq!(initial_success_probability(150.0, &ch).unwrap(), 0.00282, epsilon = 1e-5);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(detection_gamma(&DetectorModel::new(1.0, 0.3).unwrap()).unwrap(), 1.0);
        assert_eq!(detection_gamma(&DetectorModel::new(0.4, 0.0).unwrap()).unwrap(), 1.0);
        let g = detection_gamma(&DetectorModel::new(0.1, 1e-5).unwrap()).unwrap();
        assert_abs_diff_eq!(g, (0.1 + 0.9e-5) / (0.1 + 1.8e-5), epsilon = 1e-15);
        assert_abs_diff_eq!(g, 0.99991, epsilon = 1e-5);
        let degenerate = DetectorModel { eta_d: 0.0, p_dark: 0.0 };
        assert!(detection_gamma(&degenerate).is_err());
    }

    #[test]
    fn swap_examples() {
        let g1 = DepolarizingGate::perfect();
        let phi = BellDiagonalState::phi_plus();
        assert_eq!(swap_map(&phi, &phi, &g1, 1.0).weights(), [1.0, 0.0, 0.0, 0.0]);
        let w = bd([0.7, 0.1, 0.1, 0.1]);
        let out = swap_map(&w, &w, &g1, 1.0);
        for (x, y) in out.weights().iter().zip([0.52, 0.16, 0.16, 0.16]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(out.a, 0.49 + 0.09 / 3.0, epsilon = 1e-15);
        let out = swap_map(&w, &phi, &DepolarizingGate::new(0.0).unwrap(), 0.9);
        assert_eq!(out.weights(), [0.25; 4]);
    }

    /// The four-coefficient map for identical inputs written out term by term.
    fn swap_identical_reference(s: &BellDiagonalState, p_g: f64, g: f64) -> [f64; 4] {
        let BellDiagonalState { a, b, c, d } = *s;
        let sq = a * a + b * b + c * c + d * d;
        let n = (1.0 - p_g) / 4.0;
        [
            n + p_g * (g * g * sq + 2.0 * (1.0 - g).powi(2) * (a * d + b * c) + 2.0 * g * (1.0 - g) * (a + d) * (c + b)),
            n + p_g * (2.0 * g * g * (a * b + c * d) + 2.0 * (1.0 - g).powi(2) * (a * c + b * d) + g * (1.0 - g) * (sq + 2.0 * a * d + 2.0 * b * c)),
            n + p_g * (2.0 * g * g * (a * c + b * d) + 2.0 * (1.0 - g).powi(2) * (a * b + c * d) + g * (1.0 - g) * (sq + 2.0 * a * d + 2.0 * b * c)),
            n + p_g * (2.0 * g * g * (a * d + b * c) + (1.0 - g).powi(2) * sq + 2.0 * g * (1.0 - g) * (a + d) * (b + c)),
        ]
    }

    #[test]
    fn swap_identical_inputs_match_reference_form() {
        for w in [[0.7, 0.1, 0.1, 0.1], [0.6, 0.2, 0.15, 0.05], [0.3, 0.1, 0.4, 0.2]] {
            let s = bd(w);
            for (p_g, g) in [(1.0, 1.0), (0.9, 0.95), (0.5, 0.7)] {
                let out = swap_map(&s, &s, &DepolarizingGate::new(p_g).unwrap(), g);
                for (x, y) in out.weights().iter().zip(swap_identical_reference(&s, p_g, g)) {
                    assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn swap_success_examples() {
        assert_eq!(swap_success_probability(&DetectorModel::ideal()), 1.0);
        assert_abs_diff_eq!(swap_success_probability(&DetectorModel::lossy(0.9).unwrap()), 0.81, epsilon = 1e-15);
        let ratio = swap_success_probability(&DetectorModel::new(0.1, 1e-5).unwrap())
            / swap_success_probability(&DetectorModel::lossy(0.1).unwrap());
        assert!(ratio < 1.03);
    }

    #[test]
    fn distill_examples() {
        let g1 = DepolarizingGate::perfect();
        let (out, p) = distill_map(&BellDiagonalState::phi_plus(), &g1).unwrap();
        assert_eq!(p, 1.0);
        assert_abs_diff_eq!(out.a, 1.0, epsilon = 1e-15);
        let (out, p) = distill_map(&bd([0.7, 0.1, 0.1, 0.1]), &g1).unwrap();
        assert_abs_diff_eq!(p, 0.68, epsilon = 1e-15);
        for (x, y) in out.weights().iter().zip([0.7353, 0.2059, 0.0294, 0.0294]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-4);
        }
        let (out, p) = distill_map(&BellDiagonalState::maximally_mixed(), &g1).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        for x in out.weights() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
    }

    /// Ideal Deutsch map written in the unnormalized form (A²+D², 2AD, B²+C², 2BC).
    fn deutsch_reference(s: &BellDiagonalState) -> ([f64; 4], f64) {
        let BellDiagonalState { a, b, c, d } = *s;
        let n = (a + d).powi(2) + (b + c).powi(2);
        ([(a * a + d * d) / n, 2.0 * a * d / n, (b * b + c * c) / n, 2.0 * b * c / n], n)
    }

    #[test]
    fn distill_perfect_gate_is_deutsch_map() {
        for w in [[0.7, 0.1, 0.1, 0.1], [0.5, 0.3, 0.15, 0.05], [0.4, 0.05, 0.2, 0.35]] {
            let s = bd(w);
            let (out, p) = distill_map(&s, &DepolarizingGate::perfect()).unwrap();
            let (expected, pn) = deutsch_reference(&s);
            assert_abs_diff_eq!(p, pn, epsilon = 1e-14);
            for (x, y) in out.weights().iter().zip(expected) {
                assert_abs_diff_eq!(*x, y, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn chain_examples() {
        let g1 = DepolarizingGate::perfect();
        for n in 0..4 {
            let out = chain_evaluate(1.0, &g1, 1.0, n, 0).unwrap();
            assert_abs_diff_eq!(out.state.a, 1.0, epsilon = 1e-15);
        }
        let out = chain_evaluate(0.9, &g1, 1.0, 0, 0).unwrap();
        let q = out.state.qber();
        assert_abs_diff_eq!(q.e_x, 1.0 / 15.0, epsilon = 1e-15);
        let r = secret_fraction_bb84(q.e_x, q.e_z).unwrap();
        assert_abs_diff_eq!(r, 1.0 - 2.0 * binary_entropy(1.0 / 15.0).unwrap(), epsilon = 1e-15);
        assert!(r > 0.0);
        let out = chain_evaluate(0.835, &g1, 1.0, 0, 0).unwrap();
        let q = out.state.qber();
        assert_abs_diff_eq!(secret_fraction_bb84(q.e_x, q.e_z).unwrap(), 0.0, epsilon = 2e-3);
        let out = chain_evaluate(0.9, &g1, 1.0, 2, 3).unwrap();
        assert_eq!(out.distill_success.len(), 3);
    }

    #[test]
    fn raw_rate_examples() {
        let ch = ChannelModel::default();
        let geom = RepeaterGeometry::new(100.0, 0, ORIGINAL_BETA).unwrap();
        let p0 = 0.02;
        let r = raw_key_rate(&geom, &ch, &DetectorModel::ideal(), p0, &[]).unwrap();
        assert_relative_eq!(r, p0 / fundamental_time(&geom, &ch), max_relative = 1e-14);

        let geom = RepeaterGeometry::new(600.0, 2, ORIGINAL_BETA).unwrap();
        let p0 = initial_success_probability(150.0, &ch).unwrap();
        let p_d = [0.8];
        let lossy = raw_key_rate(&geom, &ch, &DetectorModel::lossy(0.9).unwrap(), p0, &p_d).unwrap();
        let ideal = raw_key_rate(&geom, &ch, &DetectorModel::ideal(), p0, &p_d).unwrap();
        // The a-factor barely moves at this tiny P0, so the ratio is dominated by eta_d^(2(k+N+1)).
        assert_relative_eq!(lossy / ideal, 0.9f64.powi(8), max_relative = 1e-3);
    }

    #[test]
    fn perfect_chain_rate_is_deterministic_rate() {
        let p = params(400.0, 2, 0, 1.0, 1.0, 1.0);
        let out = secret_key_rate_original(&p).unwrap();
        assert_eq!(out.r_secret_fraction, 1.0);
        let p0 = transmittivity(100.0, &p.channel).unwrap();
        let expected = 1.0 / (2.0 * 100.0 / 2e5 * z_average_attempts(2, p0).unwrap());
        assert_relative_eq!(out.r_qkd, expected, max_relative = 1e-14);
        assert_eq!(out.a_factor, None);
    }

    #[test]
    fn distillation_optimum_at_moderate_fidelity() {
        let rates: Vec<f64> = (0..5)
            .map(|k| secret_key_rate_original(&params(600.0, 2, k, 0.9, 1.0, 1.0)).unwrap().r_qkd)
            .collect();
        let best = (0..5).max_by(|&i, &j| rates[i].total_cmp(&rates[j])).unwrap();
        assert_eq!(best, 2, "{rates:?}");
    }

    #[test]
    fn noisy_gate_kills_deep_nesting() {
        for l in [100.0, 400.0, 1000.0] {
            for k in 0..6 {
                let out = secret_key_rate_original(&params(l, 5, k, 0.9, 0.995, 1.0)).unwrap();
                assert_eq!(out.r_qkd, 0.0);
            }
        }
    }

    #[test]
    fn dark_counts_barely_matter() {
        for n in 1..4u32 {
            for eta in [0.1, 0.5, 0.9] {
                let mut with = params(400.0, n, 1, 0.98, 0.999, eta);
                let without = secret_key_rate_original(&with).unwrap().r_qkd;
                with.detector.p_dark = 1e-5;
                let dark = secret_key_rate_original(&with).unwrap().r_qkd;
                let ratio = without / dark;
                assert!(ratio < 1.03f64.powi(n as i32) && ratio >= 1.0, "N={n} eta={eta} ratio={ratio}");
            }
        }
    }

    fn state_strategy() -> impl Strategy<Value = BellDiagonalState> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_filter_map("positive", |(a, b, c, d)| {
            let s = a + b + c + d;
            (s > 1e-3).then(|| BellDiagonalState::normalized([a, b, c, d]))
        })
    }

    proptest! {
        #[test]
        fn maps_preserve_normalization(s in state_strategy(), t in state_strategy(), p_g in 0.0f64..=1.0, gamma in 0.0f64..=1.0) {
            let g = DepolarizingGate::new(p_g).unwrap();
            let out = swap_map(&s, &t, &g, gamma);
            prop_assert!((out.sum() - 1.0).abs() < 1e-12);
            prop_assert!(out.weights().iter().all(|&w| w >= -1e-15));
            let (out, _) = distill_map(&s, &g).unwrap();
            prop_assert!((out.sum() - 1.0).abs() < 1e-12);
            prop_assert!(out.weights().iter().all(|&w| w >= -1e-15));
        }

        #[test]
        fn deutsch_gain_on_werner(f in 0.5001f64..0.9999) {
            let (out, _) = distill_map(&depolarized_state(f).unwrap(), &DepolarizingGate::perfect()).unwrap();
            prop_assert!(out.a > f);
        }
    }
}
