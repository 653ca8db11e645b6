//! Bell-diagonal two-qubit states, QBER extraction and asymptotic secret fractions.

use crate::error::{check_unit, Error, Result};
use serde::{Deserialize, Serialize};

const SUM_TOL: f64 = 1e-12;

/// Weights of a two-qubit state diagonal in the Bell basis, ordered (φ⁺, φ⁻, ψ⁺, ψ⁻).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalState {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl BellDiagonalState {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        for (name, w) in [("A", a), ("B", b), ("C", c), ("D", d)] {
            if !(-SUM_TOL..=1.0 + SUM_TOL).contains(&w) {
                return Err(Error::Domain {
                    name,
                    value: w,
                    domain: "[0, 1]",
                });
            }
        }
        let sum = a + b + c + d;
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::Domain {
                name: "A+B+C+D",
                value: sum,
                domain: "1 within 1e-12",
            });
        }
        Ok(Self { a, b, c, d })
    }

    /// Renormalizes non-negative weights; used after maps whose output is defined up to a normalizer.
    pub(crate) fn normalized(w: [f64; 4]) -> Self {
        let sum: f64 = w.iter().sum();
        Self {
            a: w[0] / sum,
            b: w[1] / sum,
            c: w[2] / sum,
            d: w[3] / sum,
        }
    }

    pub(crate) fn from_weights_unchecked(w: [f64; 4]) -> Self {
        Self {
            a: w[0],
            b: w[1],
            c: w[2],
            d: w[3],
        }
    }

    pub fn phi_plus() -> Self {
        Self::from_weights_unchecked([1.0, 0.0, 0.0, 0.0])
    }

    pub fn maximally_mixed() -> Self {
        Self::from_weights_unchecked([0.25; 4])
    }

    pub fn weights(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn fidelity(&self) -> f64 {
        self.a
    }

    pub fn sum(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    pub fn qber(&self) -> QberTriple {
        qber_from_bell_diagonal(self)
    }
}

/// Error rates of the X, Z and Y measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberTriple {
    pub e_x: f64,
    pub e_z: f64,
    pub e_y: f64,
}

impl QberTriple {
    pub fn new(e_x: f64, e_z: f64, e_y: f64) -> Result<Self> {
        check_unit("e_X", e_x)?;
        check_unit("e_Z", e_z)?;
        check_unit("e_Y", e_y)?;
        Ok(Self { e_x, e_z, e_y })
    }
}

pub fn qber_from_bell_diagonal(s: &BellDiagonalState) -> QberTriple {
    QberTriple {
        e_x: s.b + s.d,
        e_z: s.c + s.d,
        e_y: s.b + s.c,
    }
}

pub fn binary_entropy(p: f64) -> Result<f64> {
    check_unit("p", p)?;
    Ok(xlog2x(p) + xlog2x(1.0 - p))
}

fn xlog2x(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Rounding noise from upstream arithmetic can push a ratio a hair past [0, 1].
fn clamp_unit(name: &'static str, x: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if (-SLACK..=1.0 + SLACK).contains(&x) {
        Ok(x.clamp(0.0, 1.0))
    } else {
        Err(Error::Domain {
            name,
            value: x,
            domain: "[0, 1]",
        })
    }
}

pub fn secret_fraction_bb84(e_x: f64, e_z: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(e_z)? - binary_entropy(e_x)?)
}

pub fn secret_fraction_six_state(e: &QberTriple) -> Result<f64> {
    let QberTriple { e_x, e_z, e_y } = *e;
    check_unit("e_X", e_x)?;
    check_unit("e_Z", e_z)?;
    check_unit("e_Y", e_y)?;
    let first = if e_z > 0.0 {
        let arg = clamp_unit("(1+(e_X-e_Y)/e_Z)/2", (1.0 + (e_x - e_y) / e_z) / 2.0)?;
        e_z * binary_entropy(arg)?
    } else {
        0.0
    };
    let second = if e_z < 1.0 {
        let arg = clamp_unit(
            "(1-(e_X+e_Y+e_Z)/2)/(1-e_Z)",
            (1.0 - (e_x + e_y + e_z) / 2.0) / (1.0 - e_z),
        )?;
        (1.0 - e_z) * binary_entropy(arg)?
    } else {
        0.0
    };
    Ok(1.0 - first - second - binary_entropy(e_z)?)
}

/// For Bell-diagonal states the six-state fraction equals one minus the Shannon entropy of the weights.
pub fn six_state_entropy_identity(s: &BellDiagonalState) -> f64 {
    1.0 - s.weights().iter().map(|&w| xlog2x(w)).sum::<f64>()
}

pub fn depolarized_state(f0: f64) -> Result<BellDiagonalState> {
    if !(0.25..=1.0).contains(&f0) {
        return Err(Error::Domain {
            name: "F0",
            value: f0,
            domain: "[1/4, 1]",
        });
    }
    let rest = (1.0 - f0) / 3.0;
    Ok(BellDiagonalState::from_weights_unchecked([f0, rest, rest, rest]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QkdProtocol {
    #[default]
    Bb84,
    SixState,
}

impl QkdProtocol {
    pub fn secret_fraction(self, e: &QberTriple) -> Result<f64> {
        match self {
            QkdProtocol::Bb84 => secret_fraction_bb84(e.e_x, e.e_z),
            QkdProtocol::SixState => secret_fraction_six_state(e),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QkdProtocol::Bb84 => "bb84",
            QkdProtocol::SixState => "six-state",
        }
    }
}

impl std::str::FromStr for QkdProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bb84" => Ok(QkdProtocol::Bb84),
            "six-state" | "sixstate" | "6s" | "six_state" => Ok(QkdProtocol::SixState),
            other => Err(Error::Config(format!("unknown QKD protocol '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo).signum() == f(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        let p: f64 = 0.11;
        let direct = -p * p.ln() / 2f64.ln() - (1.0 - p) * (1.0 - p).ln() / 2f64.ln();
        assert_abs_diff_eq!(binary_entropy(p).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(binary_entropy(p).unwrap(), 0.49992, epsilon = 1e-5);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn qber_examples() {
        let q = qber_from_bell_diagonal(&BellDiagonalState::phi_plus());
        assert_eq!((q.e_x, q.e_z, q.e_y), (0.0, 0.0, 0.0));
        let q = depolarized_state(0.9).unwrap().qber();
        for e in [q.e_x, q.e_z, q.e_y] {
            assert_abs_diff_eq!(e, 1.0 / 15.0, epsilon = 1e-15);
        }
        let q = BellDiagonalState::new(0.95, 0.05, 0.0, 0.0).unwrap().qber();
        assert_abs_diff_eq!(q.e_x, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(q.e_z, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.e_y, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn bb84_values_and_root() {
        assert_eq!(secret_fraction_bb84(0.0, 0.0).unwrap(), 1.0);
        let h = binary_entropy(0.11).unwrap();
        assert_abs_diff_eq!(secret_fraction_bb84(0.11, 0.11).unwrap(), 1.0 - 2.0 * h, epsilon = 1e-15);
        assert_abs_diff_eq!(secret_fraction_bb84(0.11, 0.11).unwrap(), 0.00016, epsilon = 1e-5);
        let root = bisect(|e| secret_fraction_bb84(e, e).unwrap(), 0.01, 0.3);
        assert_abs_diff_eq!(root, 0.1100, epsilon = 1e-4);
        assert!(secret_fraction_bb84(0.2, -0.01).is_err());
    }

    #[test]
    fn six_state_values_and_root() {
        assert_eq!(secret_fraction_six_state(&QberTriple::new(0.0, 0.0, 0.0).unwrap()).unwrap(), 1.0);
        let root = bisect(
            |e| secret_fraction_six_state(&QberTriple { e_x: e, e_z: e, e_y: e }).unwrap(),
            0.01,
            0.3,
        );
        assert_abs_diff_eq!(root, 0.126, epsilon = 1e-3);
        let e = QberTriple::new(0.05, 0.05, 0.05).unwrap();
        let r6 = secret_fraction_six_state(&e).unwrap();
        assert!(r6 > 0.0 && r6 < 1.0);
        assert!(r6 > secret_fraction_bb84(0.05, 0.05).unwrap());
    }

    #[test]
    fn six_state_rejects_unphysical_triples() {
        let e = QberTriple { e_x: 0.5, e_z: 0.1, e_y: 0.0 };
        assert!(secret_fraction_six_state(&e).is_err());
    }

    #[test]
    fn six_state_matches_entropy_identity() {
        for w in [
            [0.9, 0.05, 0.03, 0.02],
            [0.7, 0.1, 0.1, 0.1],
            [0.8, 0.2, 0.0, 0.0],
            [0.6, 0.0, 0.4, 0.0],
            [0.25, 0.25, 0.25, 0.25],
        ] {
            let s = BellDiagonalState::new(w[0], w[1], w[2], w[3]).unwrap();
            let r = secret_fraction_six_state(&s.qber()).unwrap();
            assert_abs_diff_eq!(r, six_state_entropy_identity(&s), epsilon = 1e-12);
        }
    }

    #[test]
    fn depolarized_examples() {
        assert_eq!(depolarized_state(1.0).unwrap().weights(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(depolarized_state(0.25).unwrap().weights(), [0.25; 4]);
        let s = depolarized_state(0.9).unwrap();
        assert_abs_diff_eq!(s.b, 1.0 / 30.0, epsilon = 1e-15);
        assert!(depolarized_state(0.2).is_err());
    }

    #[test]
    fn constructor_validates() {
        assert!(BellDiagonalState::new(0.5, 0.5, 0.1, 0.0).is_err());
        assert!(BellDiagonalState::new(1.1, -0.1, 0.0, 0.0).is_err());
        assert!(BellDiagonalState::new(0.4, 0.3, 0.2, 0.1).is_ok());
    }
}
