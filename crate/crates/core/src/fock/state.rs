use crate::error::{Error, Result};
use crate::fock::network::LinearNetwork;
use num_complex::Complex64 as C64;
use smallvec::SmallVec;
use std::collections::BTreeMap;

/// Photon count per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupation(pub SmallVec<[u8; 8]>);

impl Occupation {
    pub fn vacuum(modes: usize) -> Self {
        Self(SmallVec::from_elem(0, modes))
    }

    pub fn from_slice(counts: &[u8]) -> Self {
        Self(SmallVec::from_slice(counts))
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| u32::from(n)).sum()
    }

    pub fn get(&self, mode: usize) -> u8 {
        self.0[mode]
    }

    pub fn concat(&self, other: &Occupation) -> Occupation {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Occupation(v)
    }

    pub fn select(&self, modes: &[usize]) -> Occupation {
        Occupation(modes.iter().map(|&m| self.0[m]).collect())
    }

    pub fn without(&self, modes: &[usize]) -> Occupation {
        Occupation(
            self.0
                .iter()
                .enumerate()
                .filter(|(i, _)| !modes.contains(i))
                .map(|(_, &n)| n)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

/// Per-mode and total photon-number cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub per_mode: u8,
    pub total: u32,
}

impl Truncation {
    pub fn new(per_mode: u8, total: u32) -> Self {
        Self { per_mode, total }
    }

    pub fn admits(&self, occ: &Occupation) -> bool {
        occ.0.iter().all(|&n| n <= self.per_mode) && occ.total() <= self.total
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            per_mode: 4,
            total: 6,
        }
    }
}

/// Sparse pure state over a fixed number of optical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockStateVector {
    modes: usize,
    trunc: Truncation,
    amps: BTreeMap<Occupation, C64>,
}

impl FockStateVector {
    pub fn zero(modes: usize, trunc: Truncation) -> Self {
        Self {
            modes,
            trunc,
            amps: BTreeMap::new(),
        }
    }

    pub fn vacuum(modes: usize, trunc: Truncation) -> Self {
        let mut s = Self::zero(modes, trunc);
        s.amps.insert(Occupation::vacuum(modes), C64::new(1.0, 0.0));
        s
    }

    pub fn basis(counts: &[u8], trunc: Truncation) -> Result<Self> {
        let mut s = Self::zero(counts.len(), trunc);
        s.add(Occupation::from_slice(counts), C64::new(1.0, 0.0))?;
        Ok(s)
    }

    pub fn from_terms(modes: usize, trunc: Truncation, terms: &[(&[u8], C64)]) -> Result<Self> {
        let mut s = Self::zero(modes, trunc);
        for (occ, amp) in terms {
            if occ.len() != modes {
                return Err(Error::Config(format!("occupation {occ:?} does not have {modes} modes")));
            }
            s.add(Occupation::from_slice(occ), *amp)?;
        }
        Ok(s)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn amplitudes(&self) -> &BTreeMap<Occupation, C64> {
        &self.amps
    }

    pub fn amplitude(&self, counts: &[u8]) -> C64 {
        self.amps
            .get(&Occupation::from_slice(counts))
            .copied()
            .unwrap_or_default()
    }

    pub fn add(&mut self, occ: Occupation, amp: C64) -> Result<()> {
        if !self.trunc.admits(&occ) {
            return Err(Error::Truncation(format!("occupation {:?} exceeds the cutoff", occ.0)));
        }
        *self.amps.entry(occ).or_default() += amp;
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: C64) {
        for a in self.amps.values_mut() {
            *a *= factor;
        }
    }

    pub fn add_scaled(&mut self, other: &FockStateVector, factor: C64) {
        for (occ, a) in &other.amps {
            *self.amps.entry(occ.clone()).or_default() += a * factor;
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &FockStateVector) -> C64 {
        self.amps
            .iter()
            .filter_map(|(occ, a)| other.amps.get(occ).map(|b| a.conj() * b))
            .sum()
    }

    /// Applies Σ_j coeffs_j a_j† and drops terms beyond the cutoff.
    pub fn create_superposition(&self, coeffs: &[(usize, C64)]) -> FockStateVector {
        let mut out = Self::zero(self.modes, self.trunc);
        for (occ, amp) in &self.amps {
            for &(mode, c) in coeffs {
                let n = occ.0[mode];
                let mut next = occ.clone();
                next.0[mode] = n + 1;
                if self.trunc.admits(&next) {
                    *out.amps.entry(next).or_default() += amp * c * f64::from(n + 1).sqrt();
                }
            }
        }
        out.prune();
        out
    }

    pub fn create(&self, mode: usize) -> FockStateVector {
        self.create_superposition(&[(mode, C64::new(1.0, 0.0))])
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm_sqr() > 1e-300);
    }

    pub fn tensor(&self, other: &FockStateVector) -> FockStateVector {
        let trunc = Truncation::new(
            self.trunc.per_mode.max(other.trunc.per_mode),
            self.trunc.total + other.trunc.total,
        );
        let mut out = Self::zero(self.modes + other.modes, trunc);
        for (o1, a1) in &self.amps {
            for (o2, a2) in &other.amps {
                *out.amps.entry(o1.concat(o2)).or_default() += a1 * a2;
            }
        }
        out
    }

    pub fn with_truncation(mut self, trunc: Truncation) -> Self {
        self.trunc = trunc;
        self.amps.retain(|occ, _| trunc.admits(occ));
        self
    }

    pub fn apply_network(&self, net: &LinearNetwork) -> Result<FockStateVector> {
        net.check_modes(self.modes)?;
        let mut out = Self::zero(self.modes, self.trunc);
        for (occ, amp) in &self.amps {
            let image = net.image_of_basis(occ, self.trunc);
            out.add_scaled(&image, *amp);
        }
        out.prune();
        Ok(out)
    }
}
