use crate::error::{Error, Result};
use crate::fock::density::DensityOperator;
use crate::fock::network::LinearNetwork;
use crate::fock::pnrd::PnrdElement;
use crate::fock::state::{FockStateVector, Occupation, Truncation};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

pub const IMPOSSIBLE_PROBABILITY: f64 = 1e-300;

/// Applies the detector pattern to the listed modes and traces them out, without renormalizing.
/// The trace of the result is the pattern probability.
pub fn project_pattern(rho: &DensityOperator, pattern: &[(usize, PnrdElement)]) -> Result<DensityOperator> {
    let measured: Vec<usize> = pattern.iter().map(|&(m, _)| m).collect();
    if let Some(&m) = measured.iter().find(|&&m| m >= rho.modes()) {
        return Err(Error::Config(format!("pattern mode {m} outside a {}-mode state", rho.modes())));
    }
    let mut entries: BTreeMap<(Occupation, Occupation), C64> = BTreeMap::new();
    for ((r, c), v) in rho.entries() {
        if pattern.iter().any(|&(m, _)| r.get(m) != c.get(m)) {
            continue;
        }
        let w: f64 = pattern.iter().map(|(m, e)| e.weight(r.get(*m))).product();
        if w == 0.0 {
            continue;
        }
        *entries.entry((r.without(&measured), c.without(&measured))).or_default() += v * w;
    }
    Ok(DensityOperator::from_entries(
        rho.modes() - measured.len(),
        rho.truncation(),
        entries,
    ))
}

/// [`project_pattern`] for a mixture of pure states given as (weight, vector) pairs. Each
/// component is split by its occupation of the measured modes, which keeps the cost linear in
/// the number of amplitudes rather than quadratic.
pub fn project_pure_mixture(components: &[(f64, FockStateVector)], pattern: &[(usize, PnrdElement)]) -> Result<DensityOperator> {
    let Some((_, first)) = components.first() else {
        return Err(Error::Config("empty mixture".into()));
    };
    let modes = first.modes();
    let trunc = first.truncation();
    let measured: Vec<usize> = pattern.iter().map(|&(m, _)| m).collect();
    if let Some(&m) = measured.iter().find(|&&m| m >= modes) {
        return Err(Error::Config(format!("pattern mode {m} outside a {modes}-mode state")));
    }
    let mut out = DensityOperator::zero(modes - measured.len(), trunc);
    for (weight, psi) in components {
        if psi.modes() != modes {
            return Err(Error::Config("mixture components differ in mode count".into()));
        }
        let mut branches: BTreeMap<Occupation, FockStateVector> = BTreeMap::new();
        for (occ, amp) in psi.amplitudes() {
            let branch = branches
                .entry(occ.select(&measured))
                .or_insert_with(|| FockStateVector::zero(modes - measured.len(), trunc));
            branch.add(occ.without(&measured), *amp)?;
        }
        for (seen, branch) in &branches {
            let w: f64 = pattern.iter().zip(seen.as_slice()).map(|((_, e), &t)| e.weight(t)).product();
            if w > 0.0 {
                out.add_pure(branch, weight * w);
            }
        }
    }
    Ok(out)
}

/// Probability of a detector pattern and the normalized state of the unmeasured modes.
pub fn measure_pattern(rho: &DensityOperator, pattern: &[(usize, PnrdElement)]) -> Result<(f64, DensityOperator)> {
    let projected = project_pattern(rho, pattern)?;
    let p = projected.trace();
    if !(p >= IMPOSSIBLE_PROBABILITY) {
        return Err(Error::HeraldingImpossible(format!("pattern probability {p:e}")));
    }
    Ok((p, projected.scaled(1.0 / p)))
}

/// Interferes modes of two independent states on a network and conditions on a detector pattern.
///
/// `network` acts on modes 0..k where the first `left_modes.len()` are the listed modes of `left`
/// and the rest are the listed modes of `right`; `pattern[i]` is the detector on network output
/// mode i. The result lives on the unmeasured modes of `left` followed by those of `right`, and is
/// returned together with the pattern probability. Equivalent to tensoring, applying the network
/// and calling [`measure_pattern`], but contracts the measured block once per pair of measured
/// occupations instead of expanding the joint state.
pub fn joint_measurement(
    left: &DensityOperator,
    left_modes: &[usize],
    right: &DensityOperator,
    right_modes: &[usize],
    network: &LinearNetwork,
    pattern: &[PnrdElement],
) -> Result<(f64, DensityOperator)> {
    let k = left_modes.len() + right_modes.len();
    if pattern.len() != k || network.modes().iter().any(|&m| m >= k) {
        return Err(Error::Config("joint measurement network and pattern must cover the measured modes".into()));
    }
    let left_blocks = Blocks::new(left, left_modes);
    let right_blocks = Blocks::new(right, right_modes);

    // Detector-weighted images U|o_L o_R⟩ for every pair of measured occupations.
    let max_photons = left.truncation().total + right.truncation().total;
    let trunc = Truncation::new(max_photons.min(u32::from(u8::MAX)) as u8, max_photons);
    let n_l = left_blocks.measured.len();
    let n_r = right_blocks.measured.len();
    let mut images: Vec<Vec<(Occupation, C64, f64)>> = Vec::with_capacity(n_l * n_r);
    for ol in &left_blocks.measured {
        for or in &right_blocks.measured {
            let image = network.image_of_basis(&ol.concat(or), trunc);
            let weighted = image
                .amplitudes()
                .iter()
                .filter_map(|(t, a)| {
                    let w: f64 = pattern.iter().enumerate().map(|(i, e)| e.weight(t.get(i))).product();
                    (w > 0.0).then(|| (t.clone(), *a, w))
                })
                .collect();
            images.push(weighted);
        }
    }
    let overlap = |x: usize, y: usize| -> C64 {
        let (vx, vy) = (&images[x], &images[y]);
        let (mut i, mut j) = (0, 0);
        let mut acc = C64::new(0.0, 0.0);
        while i < vx.len() && j < vy.len() {
            match vx[i].0.cmp(&vy[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += vx[i].1 * vy[j].1.conj() * vx[i].2;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    };
    let pairs = n_l * n_r;
    let mut gram = vec![C64::new(0.0, 0.0); pairs * pairs];
    for x in 0..pairs {
        for y in 0..pairs {
            gram[x * pairs + y] = overlap(x, y);
        }
    }

    let dim_r = right_blocks.rest.len();
    let dim = left_blocks.rest.len() * dim_r;
    let mut dense = vec![C64::new(0.0, 0.0); dim * dim];
    for (&(lr, lc), l_entries) in &left_blocks.blocks {
        for (&(rr, rc), r_entries) in &right_blocks.blocks {
            let g = gram[(lr * n_r + rr) * pairs + (lc * n_r + rc)];
            if g.norm_sqr() == 0.0 {
                continue;
            }
            for &(a, b, vl) in l_entries {
                let lv = vl * g;
                for &(c, d, vr) in r_entries {
                    dense[(a * dim_r + c) * dim + (b * dim_r + d)] += lv * vr;
                }
            }
        }
    }

    let rest_l: Vec<&Occupation> = left_blocks.rest.keys_in_order();
    let rest_r: Vec<&Occupation> = right_blocks.rest.keys_in_order();
    let mut entries = BTreeMap::new();
    let mut trace = 0.0;
    for row in 0..dim {
        for col in 0..dim {
            let v = dense[row * dim + col];
            if v.norm_sqr() <= IMPOSSIBLE_PROBABILITY {
                continue;
            }
            if row == col {
                trace += v.re;
            }
            let r = rest_l[row / dim_r].concat(rest_r[row % dim_r]);
            let c = rest_l[col / dim_r].concat(rest_r[col % dim_r]);
            entries.insert((r, c), v);
        }
    }
    if !(trace >= IMPOSSIBLE_PROBABILITY) {
        return Err(Error::HeraldingImpossible(format!("pattern probability {trace:e}")));
    }
    let out_trunc = Truncation::new(
        left.truncation().per_mode.max(right.truncation().per_mode),
        left.truncation().total + right.truncation().total,
    );
    let modes = left.modes() - left_modes.len() + right.modes() - right_modes.len();
    let state = DensityOperator::from_entries(modes, out_trunc, entries).scaled(1.0 / trace);
    Ok((trace, state))
}

/// Index of distinct occupations, in first-seen order.
struct Interner {
    ids: BTreeMap<Occupation, usize>,
    order: Vec<Occupation>,
}

impl Interner {
    fn new() -> Self {
        Self {
            ids: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    fn id(&mut self, occ: Occupation) -> usize {
        if let Some(&i) = self.ids.get(&occ) {
            return i;
        }
        let i = self.order.len();
        self.ids.insert(occ.clone(), i);
        self.order.push(occ);
        i
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    fn keys_in_order(&self) -> Vec<&Occupation> {
        self.order.iter().collect()
    }
}

/// Entries of a density operator grouped by their measured-mode (row, col) occupations.
struct Blocks {
    measured: Vec<Occupation>,
    rest: Interner,
    blocks: BTreeMap<(usize, usize), Vec<(usize, usize, C64)>>,
}

impl Blocks {
    fn new(rho: &DensityOperator, modes: &[usize]) -> Self {
        let mut measured = Interner::new();
        let mut rest = Interner::new();
        let mut blocks: BTreeMap<(usize, usize), Vec<(usize, usize, C64)>> = BTreeMap::new();
        for ((r, c), v) in rho.entries() {
            let mr = measured.id(r.select(modes));
            let mc = measured.id(c.select(modes));
            let rr = rest.id(r.without(modes));
            let rc = rest.id(c.without(modes));
            blocks.entry((mr, mc)).or_default().push((rr, rc, *v));
        }
        Self {
            measured: measured.order,
            rest,
            blocks,
        }
    }
}
