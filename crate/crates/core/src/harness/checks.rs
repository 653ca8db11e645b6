//! Cross-checks of the analytic maps against independent simulations, and of the waiting-time
//! formula against Monte Carlo.

use crate::detector::DetectorModel;
use crate::error::Result;
use crate::fock::usd_link_oracle;
use crate::hybrid::{hybrid_distill_map, hybrid_initial_fidelity, hybrid_success_probability, DissipativeGate, HybridLinkParams};
use crate::mc::mc_waiting_time;
use crate::original::oracle::{swap_oracle, GateNoise};
use crate::original::{distill_map, swap_map, DepolarizingGate};
use crate::rate::{z_average_attempts, ChannelModel};
use crate::states::BellDiagonalState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

pub const SWAP_TOLERANCE: f64 = 1e-10;
pub const DISTILL_TOLERANCE: f64 = 1e-10;
pub const USD_TOLERANCE: f64 = 1e-8;
/// Photon-number cutoff for the coherent probes of the link oracle.
const USD_PHOTON_CUTOFF: u8 = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_deviation < self.tolerance
    }
}

/// Uniform on the probability simplex.
pub fn random_bell_diagonal(rng: &mut impl Rng) -> BellDiagonalState {
    let w: [f64; 4] = std::array::from_fn(|_| Exp1.sample(rng));
    BellDiagonalState::normalized(w)
}

fn max_weight_gap(a: &BellDiagonalState, b: &BellDiagonalState) -> f64 {
    a.weights().iter().zip(b.weights()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Analytic swap against the 16×16 density-operator circuit on random states, gates and readouts.
pub fn check_swap(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let left = random_bell_diagonal(&mut rng);
        let right = random_bell_diagonal(&mut rng);
        let p_g = rng.random_range(0.8..=1.0);
        let gamma = rng.random_range(0.8..=1.0);
        let gate = DepolarizingGate::new(p_g).expect("p_G in range");
        let fast = swap_map(&left, &right, &gate, gamma);
        let slow = swap_oracle(&left, &right, GateNoise::Depolarizing(p_g), gamma);
        worst = worst.max(max_weight_gap(&fast, &slow));
    }
    CheckResult {
        name: "swap-map-vs-circuit".into(),
        cases,
        max_deviation: worst,
        tolerance: SWAP_TOLERANCE,
    }
}

/// Dephasing-gate distillation with perfect gates against the depolarizing-gate Deutsch map with
/// perfect gates; both state and success probability.
pub fn check_hybrid_distillation(cases: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let s = random_bell_diagonal(&mut rng);
        let (h, ph) = hybrid_distill_map(&s, &DissipativeGate::perfect())?;
        let (d, pd) = distill_map(&s, &DepolarizingGate::perfect())?;
        worst = worst.max(max_weight_gap(&h, &d)).max((ph - pd).abs());
    }
    Ok(CheckResult {
        name: "hybrid-distillation-vs-deutsch".into(),
        cases,
        max_deviation: worst,
        tolerance: DISTILL_TOLERANCE,
    })
}

/// Closed-form link fidelity and success probability against the Fock-space USD simulation on a
/// 3 × 2 × 2 grid of probe strength, detector efficiency and segment length.
pub fn check_usd_link() -> Result<CheckResult> {
    let ch = ChannelModel::default();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for x in [0.005f64, 0.01, 0.05] {
        for eta_d in [1.0, 0.9] {
            for l0 in [10.0, 40.0] {
                let d = DetectorModel::lossy(eta_d)?;
                let link = HybridLinkParams::new(x.sqrt(), std::f64::consts::PI, l0)?;
                let sim = usd_link_oracle(&link, &ch, &d, USD_PHOTON_CUTOFF)?;
                let f0 = hybrid_initial_fidelity(&link, &ch, &d)?;
                let p0 = hybrid_success_probability(f0, l0, &ch, &d)?;
                worst = worst.max((sim.f0 - f0).abs()).max((sim.p0 - p0).abs());
                cases += 1;
            }
        }
    }
    Ok(CheckResult {
        name: "usd-closed-form-vs-fock".into(),
        cases,
        max_deviation: worst,
        tolerance: USD_TOLERANCE,
    })
}

pub fn oracle_checks(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![check_swap(100, seed), check_hybrid_distillation(100, seed)?, check_usd_link()?])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub nesting: u32,
    pub p: f64,
    pub analytic: f64,
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl McComparison {
    /// |MC − analytic| in units of the standard error.
    pub fn deviation(&self) -> f64 {
        let gap = (self.mean - self.analytic).abs();
        if self.std_error > 0.0 {
            gap / self.std_error
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn mc_validate(nesting: u32, p: f64, trials: u64, seed: u64) -> Result<McComparison> {
    let analytic = z_average_attempts(nesting, p)?;
    let est = mc_waiting_time(nesting, p, trials, seed)?;
    Ok(McComparison {
        nesting,
        p,
        analytic,
        mean: est.mean,
        std_error: est.std_error,
        trials: est.trials,
    })
}
