use crate::error::{Error, Result};

/// POVM element of a photon-number-resolving detector with efficiency `eta` reporting `n` photons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnrdElement {
    pub n: u8,
    pub eta: f64,
}

impl PnrdElement {
    pub fn new(n: u8, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain {
                name: "eta",
                value: eta,
                domain: "[0, 1]",
            });
        }
        Ok(Self { n, eta })
    }

    /// Probability of reporting `n` when `t` photons arrive: C(t, n) η^n (1 − η)^(t − n).
    pub fn weight(&self, t: u8) -> f64 {
        if t < self.n {
            return 0.0;
        }
        let lost = t - self.n;
        binomial(t, self.n) * self.eta.powi(i32::from(self.n)) * (1.0 - self.eta).powi(i32::from(lost))
    }
}

fn binomial(n: u8, k: u8) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Diagonal of the POVM element on photon numbers 0..=n_max.
pub fn pnrd_operator(elem: &PnrdElement, n_max: u8) -> Result<Vec<f64>> {
    if elem.n > n_max {
        return Err(Error::Truncation(format!(
            "detected count {} exceeds the cutoff {n_max}",
            elem.n
        )));
    }
    Ok((0..=n_max).map(|t| elem.weight(t)).collect())
}
