//! Fock-space reconstruction of the heralded hybrid link, used to check its closed forms.

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::fock::coherent::coherent_state;
use crate::fock::density::DensityOperator;
use crate::fock::measure::project_pattern;
use crate::fock::pnrd::PnrdElement;
use crate::fock::state::{FockStateVector, Occupation, Truncation};
use crate::hybrid::HybridLinkParams;
use crate::rate::{transmittivity, ChannelModel};
use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsdOutcome {
    pub f0: f64,
    pub p0: f64,
}

const QA: usize = 0;
const QB: usize = 1;
const B3: usize = 2;
const B5: usize = 3;

/// Builds the qubits ⊗ two-probe-mode state (qubits encoded as 0/1 occupations of modes 0 and 1),
/// conditions on exactly one of the two probe detectors reporting n ≥ 1 photons, applies the
/// outcome-dependent Pauli correction and sums over outcomes.
pub fn usd_link_oracle(
    link: &HybridLinkParams,
    channel: &ChannelModel,
    d: &DetectorModel,
    n_max: u8,
) -> Result<UsdOutcome> {
    let eta_t = transmittivity(link.l0, channel)?;
    let x = link.excitation();
    let beta = C64::new(0.0, (2.0 * eta_t * x).sqrt());
    let plus = coherent_state(beta, n_max)?;
    let minus = coherent_state(-beta, n_max)?;
    let no_flip = (1.0 + (-2.0 * (1.0 - eta_t) * x).exp()) / 2.0;

    let trunc = Truncation::new(n_max, u32::from(n_max) + 2);
    let branch = |sign: f64| -> Result<FockStateVector> {
        let mut psi = FockStateVector::zero(4, trunc);
        for n in 0..=n_max {
            let cp = plus.amplitude(&[n]) * 0.5;
            let cm = minus.amplitude(&[n]) * 0.5;
            psi.add(Occupation::from_slice(&[0, 0, 0, n]), cp)?;
            psi.add(Occupation::from_slice(&[1, 1, 0, n]), cm * sign)?;
            psi.add(Occupation::from_slice(&[0, 1, n, 0]), cm)?;
            psi.add(Occupation::from_slice(&[1, 0, n, 0]), cp * sign)?;
        }
        Ok(psi)
    };
    let mut rho = DensityOperator::zero(4, trunc);
    rho.add_pure(&branch(1.0)?, no_flip);
    rho.add_pure(&branch(-1.0)?, 1.0 - no_flip);

    let mut heralded = DensityOperator::zero(2, Truncation::new(1, 2));
    for n in 1..=n_max {
        let click = PnrdElement::new(n, d.eta_d)?;
        let dark = PnrdElement::new(0, d.eta_d)?;
        let odd = n % 2 == 1;
        let from_b5 = project_pattern(&rho, &[(B3, dark), (B5, click)])?;
        heralded.add_scaled(&correct(&from_b5, false, odd), 1.0);
        let from_b3 = project_pattern(&rho, &[(B3, click), (B5, dark)])?;
        heralded.add_scaled(&correct(&from_b3, true, odd), 1.0);
    }
    let p0 = heralded.trace();
    if !(p0 > 0.0) {
        return Err(Error::HeraldingImpossible("no probe photons reach the detectors".into()));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi_plus = FockStateVector::from_terms(
        2,
        Truncation::new(1, 2),
        &[(&[0, 0], C64::new(h, 0.0)), (&[1, 1], C64::new(h, 0.0))],
    )?;
    Ok(UsdOutcome {
        f0: heralded.expectation(&phi_plus) / p0,
        p0,
    })
}

/// X on qubit B when the photons arrived in the first probe mode, then Z on qubit A for odd counts.
fn correct(rho: &DensityOperator, flip_b: bool, phase_a: bool) -> DensityOperator {
    rho.map_entries(|r, c, v| {
        let (mut r, mut c) = (r.clone(), c.clone());
        if flip_b {
            r.0[QB] ^= 1;
            c.0[QB] ^= 1;
        }
        let sign = if phase_a && (r.0[QA] + c.0[QA]) % 2 == 1 { -1.0 } else { 1.0 };
        (r, c, v * sign)
    })
}
