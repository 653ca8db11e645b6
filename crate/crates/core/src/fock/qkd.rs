//! Dual-rail QKD measurement statistics on (A0, A1, B0, B1) with photon-number-resolving detectors.

use crate::error::{Error, Result};
use crate::fock::density::DensityOperator;
use crate::fock::measure::project_pattern;
use crate::fock::network::LinearNetwork;
use crate::fock::pnrd::PnrdElement;
use crate::fock::state::{FockStateVector, Truncation};
use crate::states::BellDiagonalState;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickStats {
    pub p_click: f64,
    pub p_err: f64,
    pub qber: f64,
}

/// Local rotation before detection. Bob measures the conjugate Y basis so that φ⁺ is correlated
/// in all three bases.
pub fn basis_network(basis: Basis) -> LinearNetwork {
    let rails = |a: usize, b: usize| LinearNetwork::beam_splitter(a, b);
    match basis {
        Basis::Z => LinearNetwork::identity(vec![0, 1, 2, 3]),
        Basis::X => rails(0, 1).then(&rails(2, 3)),
        Basis::Y => LinearNetwork::phase(1, -std::f64::consts::FRAC_PI_2)
            .then(&LinearNetwork::phase(3, std::f64::consts::FRAC_PI_2))
            .then(&rails(0, 1))
            .then(&rails(2, 3)),
    }
}

/// Click probability, error probability and QBER of a measurement in `basis` with detector
/// efficiency `eta` on all four detectors.
pub fn qkd_click_and_error(rho: &DensityOperator, basis: Basis, eta: f64) -> Result<ClickStats> {
    if rho.modes() != 4 {
        return Err(Error::Config(format!("QKD statistics need 4 modes, got {}", rho.modes())));
    }
    let rotated = rho.apply_network(&basis_network(basis))?;
    let on = PnrdElement::new(1, eta)?;
    let off = PnrdElement::new(0, eta)?;
    let prob = |pattern: [bool; 4]| -> Result<f64> {
        let pat: Vec<(usize, PnrdElement)> = pattern
            .iter()
            .enumerate()
            .map(|(m, &click)| (m, if click { on } else { off }))
            .collect();
        Ok(project_pattern(&rotated, &pat)?.trace())
    };
    let agree = prob([true, false, true, false])? + prob([false, true, false, true])?;
    let p_err = prob([false, true, true, false])? + prob([true, false, false, true])?;
    let p_click = agree + p_err;
    if !(p_click > 0.0) {
        return Err(Error::UndefinedQber);
    }
    Ok(ClickStats {
        p_click,
        p_err,
        qber: p_err / p_click,
    })
}

/// Dual-rail encoding of a Bell-diagonal state: qubit value v of each party is one photon in rail v.
pub fn dual_rail_bell_state(s: &BellDiagonalState) -> DensityOperator {
    let t = Truncation::new(1, 2);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| C64::new(x * h, 0.0);
    let kets: [&[(&[u8], C64)]; 4] = [
        &[(&[1, 0, 1, 0], c(1.0)), (&[0, 1, 0, 1], c(1.0))],
        &[(&[1, 0, 1, 0], c(1.0)), (&[0, 1, 0, 1], c(-1.0))],
        &[(&[1, 0, 0, 1], c(1.0)), (&[0, 1, 1, 0], c(1.0))],
        &[(&[1, 0, 0, 1], c(1.0)), (&[0, 1, 1, 0], c(-1.0))],
    ];
    let mut rho = DensityOperator::zero(4, t);
    for (w, terms) in s.weights().iter().zip(kets) {
        let psi = FockStateVector::from_terms(4, t, terms).expect("dual-rail terms fit the cutoff");
        rho.add_pure(&psi, *w);
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phi_plus_in_z() {
        let rho = dual_rail_bell_state(&BellDiagonalState::phi_plus());
        let s = qkd_click_and_error(&rho, Basis::Z, 0.9).unwrap();
        assert!(s.qber.abs() < 1e-15);
        assert!((s.p_click - 0.81).abs() < 1e-14);
    }

    #[test]
    fn psi_minus_anticorrelated_in_z() {
        let rho = dual_rail_bell_state(&BellDiagonalState::from_weights_unchecked([0.0, 0.0, 0.0, 1.0]));
        let s = qkd_click_and_error(&rho, Basis::Z, 1.0).unwrap();
        assert!((s.qber - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_has_undefined_qber() {
        let rho = DensityOperator::vacuum(4, Truncation::default());
        assert!(matches!(qkd_click_and_error(&rho, Basis::X, 1.0), Err(Error::UndefinedQber)));
    }

    proptest! {
        #[test]
        fn reproduces_bell_diagonal_qber(
            w in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
            eta in prop::sample::select(vec![1.0, 0.9, 0.5]),
        ) {
            let total = w.0 + w.1 + w.2 + w.3;
            prop_assume!(total > 1e-3);
            let s = BellDiagonalState::normalized([w.0, w.1, w.2, w.3]);
            let rho = dual_rail_bell_state(&s);
            let q = s.qber();
            for (basis, expected) in [(Basis::X, q.e_x), (Basis::Z, q.e_z), (Basis::Y, q.e_y)] {
                let st = qkd_click_and_error(&rho, basis, eta).unwrap();
                prop_assert!((st.qber - expected).abs() < 1e-10);
                prop_assert!((st.p_click - eta * eta).abs() < 1e-12);
            }
        }
    }
}
