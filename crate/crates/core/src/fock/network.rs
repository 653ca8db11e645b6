use crate::error::{Error, Result};
use crate::fock::state::{FockStateVector, Occupation, Truncation};
use num_complex::Complex64 as C64;

const ISOMETRY_TOL: f64 = 1e-10;

/// Passive linear-optics transformation on a subset of modes, given by the substitution
/// a_i† → Σ_j m[i][j] a_j† for each listed mode i; unlisted modes are untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearNetwork {
    modes: Vec<usize>,
    matrix: Vec<Vec<C64>>,
}

impl LinearNetwork {
    /// `modes[r]` is mapped to Σ_c `matrix[r][c]` · `modes[c]`.
    pub fn new(modes: Vec<usize>, matrix: Vec<Vec<C64>>) -> Result<Self> {
        let k = modes.len();
        if matrix.len() != k || matrix.iter().any(|row| row.len() != k) {
            return Err(Error::Config("network matrix must be square over its modes".into()));
        }
        let mut sorted = modes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err(Error::Config("network modes must be distinct".into()));
        }
        for r in 0..k {
            for s in 0..k {
                let dot: C64 = (0..k).map(|c| matrix[r][c] * matrix[s][c].conj()).sum();
                let want = if r == s { 1.0 } else { 0.0 };
                if (dot - want).norm() > ISOMETRY_TOL {
                    return Err(Error::Config(format!(
                        "network rows {r} and {s} are not orthonormal (inner product {dot})"
                    )));
                }
            }
        }
        Ok(Self { modes, matrix })
    }

    /// Builds from rows of real coefficients.
    pub fn real(modes: Vec<usize>, rows: &[&[f64]]) -> Result<Self> {
        let matrix = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::new(modes, matrix)
    }

    pub fn identity(modes: Vec<usize>) -> Self {
        let k = modes.len();
        let matrix = (0..k)
            .map(|r| (0..k).map(|c| C64::new(if r == c { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        Self { modes, matrix }
    }

    /// Balanced splitter: m0 → (m0 + m1)/√2, m1 → (m0 − m1)/√2.
    pub fn beam_splitter(m0: usize, m1: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::real(vec![m0, m1], &[&[s, s], &[s, -s]]).expect("unitary")
    }

    /// Splitter of reflectivity `r`: m0 → √r m0 + √(1−r) m1, m1 → √(1−r) m0 − √r m1.
    pub fn splitter(m0: usize, m1: usize, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain {
                name: "R",
                value: r,
                domain: "[0, 1]",
            });
        }
        let (a, b) = (r.sqrt(), (1.0 - r).sqrt());
        Self::real(vec![m0, m1], &[&[a, b], &[b, -a]])
    }

    pub fn phase(mode: usize, phi: f64) -> Self {
        Self {
            modes: vec![mode],
            matrix: vec![vec![C64::from_polar(1.0, phi)]],
        }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn coefficient(&self, input: usize, output: usize) -> C64 {
        let r = self.modes.iter().position(|&m| m == input);
        let c = self.modes.iter().position(|&m| m == output);
        match (r, c) {
            (Some(r), Some(c)) => self.matrix[r][c],
            (None, None) if input == output => C64::new(1.0, 0.0),
            _ => C64::new(0.0, 0.0),
        }
    }

    /// The network that applies `self` first and then `next`.
    pub fn then(&self, next: &LinearNetwork) -> LinearNetwork {
        let mut modes = self.modes.clone();
        for &m in &next.modes {
            if !modes.contains(&m) {
                modes.push(m);
            }
        }
        let matrix = modes
            .iter()
            .map(|&i| {
                modes
                    .iter()
                    .map(|&k| modes.iter().map(|&j| self.coefficient(i, j) * next.coefficient(j, k)).sum())
                    .collect()
            })
            .collect();
        LinearNetwork { modes, matrix }
    }

    pub(crate) fn check_modes(&self, n_modes: usize) -> Result<()> {
        match self.modes.iter().find(|&&m| m >= n_modes) {
            Some(m) => Err(Error::Config(format!("network mode {m} outside a {n_modes}-mode state"))),
            None => Ok(()),
        }
    }

    /// U|occ⟩ for a single occupation-number basis state.
    pub(crate) fn image_of_basis(&self, occ: &Occupation, trunc: Truncation) -> FockStateVector {
        let mut start = occ.clone();
        for &m in &self.modes {
            start.0[m] = 0;
        }
        let mut state = FockStateVector::zero(occ.modes(), trunc);
        state
            .add(start, C64::new(1.0, 0.0))
            .expect("removing photons keeps the state inside the cutoff");
        let mut factorial = 1.0f64;
        for (r, &m) in self.modes.iter().enumerate() {
            let n = occ.get(m);
            if n == 0 {
                continue;
            }
            let coeffs: Vec<(usize, C64)> = self
                .modes
                .iter()
                .zip(&self.matrix[r])
                .filter(|(_, c)| c.norm_sqr() > 0.0)
                .map(|(&j, &c)| (j, c))
                .collect();
            for k in 1..=n {
                state = state.create_superposition(&coeffs);
                factorial *= f64::from(k);
            }
        }
        state.scale(C64::new(1.0 / factorial.sqrt(), 0.0));
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_isometry() {
        assert!(LinearNetwork::real(vec![0, 1], &[&[1.0, 1.0], &[0.0, 1.0]]).is_err());
        assert!(LinearNetwork::real(vec![0, 0], &[&[1.0, 0.0], &[0.0, 1.0]]).is_err());
    }

    #[test]
    fn single_photon_splits() {
        let t = Truncation::default();
        let s = FockStateVector::basis(&[1, 0], t).unwrap();
        let out = s.apply_network(&LinearNetwork::beam_splitter(0, 1)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&[1, 0]).re - h).abs() < 1e-15);
        assert!((out.amplitude(&[0, 1]).re - h).abs() < 1e-15);
    }

    #[test]
    fn hong_ou_mandel() {
        let t = Truncation::default();
        let s = FockStateVector::basis(&[1, 1], t).unwrap();
        let out = s.apply_network(&LinearNetwork::beam_splitter(0, 1)).unwrap();
        assert!(out.amplitude(&[1, 1]).norm() < 1e-14);
        assert!((out.amplitude(&[2, 0]).norm_sqr() - 0.5).abs() < 1e-14);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_is_noop() {
        let t = Truncation::default();
        let s = FockStateVector::from_terms(
            3,
            t,
            &[(&[1, 0, 2], C64::new(0.6, 0.0)), (&[0, 1, 0], C64::new(0.0, 0.8))],
        )
        .unwrap();
        assert_eq!(s.apply_network(&LinearNetwork::identity(vec![0, 1, 2])).unwrap(), s);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let t = Truncation::new(4, 4);
        let a = LinearNetwork::splitter(0, 1, 0.3).unwrap();
        let b = LinearNetwork::phase(1, 0.7).then(&LinearNetwork::beam_splitter(1, 2));
        let s = FockStateVector::from_terms(
            3,
            t,
            &[(&[2, 1, 0], C64::new(0.6, 0.0)), (&[0, 1, 1], C64::new(0.0, 0.8))],
        )
        .unwrap();
        let seq = s.apply_network(&a).unwrap().apply_network(&b).unwrap();
        let joint = s.apply_network(&a.then(&b)).unwrap();
        assert!((seq.norm_sqr() - 1.0).abs() < 1e-12);
        for (occ, amp) in seq.amplitudes() {
            assert!((joint.amplitude(occ.as_slice()) - amp).norm() < 1e-12);
        }
        assert_eq!(seq.amplitudes().len(), joint.amplitudes().len());
    }
}
