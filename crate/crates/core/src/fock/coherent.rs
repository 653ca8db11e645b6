use crate::error::{Error, Result};
use crate::fock::state::{FockStateVector, Occupation, Truncation};
use num_complex::Complex64 as C64;

pub const COHERENT_TAIL_TOL: f64 = 1e-12;

/// Single-mode coherent state truncated at `n_max` photons.
pub fn coherent_state(alpha: C64, n_max: u8) -> Result<FockStateVector> {
    let mean = alpha.norm_sqr();
    let tail = poisson_tail(mean, n_max);
    if tail > COHERENT_TAIL_TOL {
        return Err(Error::Truncation(format!(
            "coherent amplitude |alpha|^2 = {mean} leaves {tail:e} above {n_max} photons"
        )));
    }
    let trunc = Truncation::new(n_max, u32::from(n_max));
    let mut state = FockStateVector::zero(1, trunc);
    let mut amp = C64::new((-mean / 2.0).exp(), 0.0);
    for n in 0..=n_max {
        if n > 0 {
            amp = amp * alpha / f64::from(n).sqrt();
        }
        if amp.norm_sqr() > 0.0 {
            state.add(Occupation::from_slice(&[n]), amp)?;
        }
    }
    Ok(state)
}

/// P(X > n_max) for X ~ Poisson(mean), summed from the tail side to avoid cancellation.
fn poisson_tail(mean: f64, n_max: u8) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    for n in 1..=u32::from(n_max) + 1 {
        term *= mean / f64::from(n);
    }
    let mut tail = 0.0f64;
    let mut n = f64::from(n_max) + 1.0;
    loop {
        tail += term;
        n += 1.0;
        term *= mean / n;
        if term <= 1e-20 * tail || n > 10_000.0 {
            return tail;
        }
    }
}
