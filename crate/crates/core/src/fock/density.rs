use crate::error::Result;
use crate::fock::network::LinearNetwork;
use crate::fock::state::{FockStateVector, Occupation, Truncation};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

/// Sparse density operator: `entries[(row, col)]` is the coefficient of |row⟩⟨col|.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    modes: usize,
    trunc: Truncation,
    entries: BTreeMap<(Occupation, Occupation), C64>,
}

impl DensityOperator {
    pub fn zero(modes: usize, trunc: Truncation) -> Self {
        Self {
            modes,
            trunc,
            entries: BTreeMap::new(),
        }
    }

    pub fn vacuum(modes: usize, trunc: Truncation) -> Self {
        Self::from_pure(&FockStateVector::vacuum(modes, trunc))
    }

    pub fn from_pure(psi: &FockStateVector) -> Self {
        let mut rho = Self::zero(psi.modes(), psi.truncation());
        rho.add_pure(psi, 1.0);
        rho
    }

    /// Adds `weight` |ψ⟩⟨ψ|.
    pub fn add_pure(&mut self, psi: &FockStateVector, weight: f64) {
        for (r, a) in psi.amplitudes() {
            for (c, b) in psi.amplitudes() {
                *self.entries.entry((r.clone(), c.clone())).or_default() += a * b.conj() * weight;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &DensityOperator, weight: f64) {
        for (k, v) in &other.entries {
            *self.entries.entry(k.clone()).or_default() += v * weight;
        }
    }

    pub(crate) fn from_entries(
        modes: usize,
        trunc: Truncation,
        entries: BTreeMap<(Occupation, Occupation), C64>,
    ) -> Self {
        Self {
            modes,
            trunc,
            entries,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn entries(&self) -> &BTreeMap<(Occupation, Occupation), C64> {
        &self.entries
    }

    pub fn entry(&self, row: &[u8], col: &[u8]) -> C64 {
        self.entries
            .get(&(Occupation::from_slice(row), Occupation::from_slice(col)))
            .copied()
            .unwrap_or_default()
    }

    pub fn trace(&self) -> f64 {
        self.entries
            .iter()
            .filter(|((r, c), _)| r == c)
            .map(|(_, v)| v.re)
            .sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.entries.iter().all(|((r, c), v)| {
            let mirror = self
                .entries
                .get(&(c.clone(), r.clone()))
                .copied()
                .unwrap_or_default();
            (v - mirror.conj()).norm() <= tol
        })
    }

    pub fn scaled(&self, factor: f64) -> DensityOperator {
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v *= factor;
        }
        out
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn expectation(&self, psi: &FockStateVector) -> f64 {
        let amps = psi.amplitudes();
        self.entries
            .iter()
            .filter_map(|((r, c), v)| Some(amps.get(r)?.conj() * v * amps.get(c)?))
            .sum::<C64>()
            .re
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        let trunc = Truncation::new(
            self.trunc.per_mode.max(other.trunc.per_mode),
            self.trunc.total + other.trunc.total,
        );
        let mut entries = BTreeMap::new();
        for ((r1, c1), v1) in &self.entries {
            for ((r2, c2), v2) in &other.entries {
                *entries.entry((r1.concat(r2), c1.concat(c2))).or_default() += v1 * v2;
            }
        }
        DensityOperator {
            modes: self.modes + other.modes,
            trunc,
            entries,
        }
    }

    pub fn with_truncation(mut self, trunc: Truncation) -> Self {
        self.trunc = trunc;
        self.entries.retain(|(r, c), _| trunc.admits(r) && trunc.admits(c));
        self
    }

    /// Keeps only the listed modes, in the listed order, tracing out the rest.
    pub fn partial_trace(&self, keep: &[usize]) -> DensityOperator {
        let traced: Vec<usize> = (0..self.modes).filter(|m| !keep.contains(m)).collect();
        let mut entries = BTreeMap::new();
        for ((r, c), v) in &self.entries {
            if r.select(&traced) == c.select(&traced) {
                *entries.entry((r.select(keep), c.select(keep))).or_default() += *v;
            }
        }
        DensityOperator {
            modes: keep.len(),
            trunc: self.trunc,
            entries,
        }
    }

    /// Applies a per-entry transformation of the basis labels and coefficient.
    pub fn map_entries(&self, f: impl Fn(&Occupation, &Occupation, C64) -> (Occupation, Occupation, C64)) -> DensityOperator {
        let mut entries = BTreeMap::new();
        for ((r, c), v) in &self.entries {
            let (r2, c2, v2) = f(r, c, *v);
            *entries.entry((r2, c2)).or_default() += v2;
        }
        DensityOperator {
            modes: self.modes,
            trunc: self.trunc,
            entries,
        }
    }

    pub fn apply_network(&self, net: &LinearNetwork) -> Result<DensityOperator> {
        net.check_modes(self.modes)?;
        let mut images: BTreeMap<&Occupation, FockStateVector> = BTreeMap::new();
        for (r, c) in self.entries.keys() {
            for occ in [r, c] {
                if !images.contains_key(occ) {
                    images.insert(occ, net.image_of_basis(occ, self.trunc));
                }
            }
        }
        let mut entries: BTreeMap<(Occupation, Occupation), C64> = BTreeMap::new();
        for ((r, c), v) in &self.entries {
            let (ur, uc) = (&images[r], &images[c]);
            for (r2, a) in ur.amplitudes() {
                let av = a * v;
                for (c2, b) in uc.amplitudes() {
                    *entries.entry((r2.clone(), c2.clone())).or_default() += av * b.conj();
                }
            }
        }
        entries.retain(|_, v| v.norm_sqr() > 1e-300);
        Ok(DensityOperator {
            modes: self.modes,
            trunc: self.trunc,
            entries,
        })
    }
}
