//! Explicit four-qubit density-matrix simulation of swapping and distillation circuits.
//!
//! Qubits are ordered (a, b, c, d) with pairs (a, b) and (c, d); qubit 0 is the most significant
//! bit of the computational index.

use crate::states::BellDiagonalState;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

type Mat = DMatrix<C64>;

const QUBITS: usize = 4;
const DIM: usize = 1 << QUBITS;

/// Noise attached to each two-qubit CNOT in the simulated circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateNoise {
    /// Ideal gate with probability p, otherwise the two qubits are fully depolarized (after the gate).
    Depolarizing(f64),
    /// Z on the control and X on the target, each independently with probability 1 - p (before the gate).
    PauliFlips(f64),
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn pauli(k: usize) -> Mat {
    let i = C64::i();
    match k {
        0 => Mat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(1.0)]),
        1 => Mat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        2 => Mat::from_row_slice(2, 2, &[c(0.0), -i, i, c(0.0)]),
        _ => Mat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
    }
}

fn identity2() -> Mat {
    pauli(0)
}

fn on_qubits(ops: &[(usize, &Mat)]) -> Mat {
    let mut acc = Mat::from_element(1, 1, c(1.0));
    for q in 0..QUBITS {
        let id = identity2();
        let op = ops.iter().find(|(k, _)| *k == q).map(|(_, m)| *m).unwrap_or(&id);
        acc = acc.kronecker(op);
    }
    acc
}

fn cnot(control: usize, target: usize) -> Mat {
    let mut m = Mat::zeros(DIM, DIM);
    for col in 0..DIM {
        let cbit = (col >> (QUBITS - 1 - control)) & 1;
        let row = if cbit == 1 { col ^ (1 << (QUBITS - 1 - target)) } else { col };
        m[(row, col)] = c(1.0);
    }
    m
}

fn conj(u: &Mat, rho: &Mat) -> Mat {
    u * rho * u.adjoint()
}

fn bell_vectors() -> [Mat; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = |x: [f64; 4]| Mat::from_column_slice(4, 1, &x.map(|e| c(e * s)));
    [
        v([1.0, 0.0, 0.0, 1.0]),
        v([1.0, 0.0, 0.0, -1.0]),
        v([0.0, 1.0, 1.0, 0.0]),
        v([0.0, 1.0, -1.0, 0.0]),
    ]
}

fn bell_density(s: &BellDiagonalState) -> Mat {
    let mut rho = Mat::zeros(4, 4);
    for (w, v) in s.weights().iter().zip(bell_vectors()) {
        rho += (&v * v.adjoint()) * c(*w);
    }
    rho
}

fn bell_weights(rho: &Mat) -> [f64; 4] {
    bell_vectors().map(|v| (v.adjoint() * rho * &v)[(0, 0)].re)
}

/// Trace out all qubits except the two listed (kept in the listed order).
fn reduce_to_pair(rho: &Mat, keep: [usize; 2]) -> Mat {
    let bit = |idx: usize, q: usize| (idx >> (QUBITS - 1 - q)) & 1;
    let mut out = Mat::zeros(4, 4);
    for r in 0..DIM {
        for col in 0..DIM {
            let traced_equal = (0..QUBITS)
                .filter(|q| !keep.contains(q))
                .all(|q| bit(r, q) == bit(col, q));
            if traced_equal {
                let rr = bit(r, keep[0]) * 2 + bit(r, keep[1]);
                let cc = bit(col, keep[0]) * 2 + bit(col, keep[1]);
                out[(rr, cc)] += rho[(r, col)];
            }
        }
    }
    out
}

fn noisy_cnot(rho: &Mat, control: usize, target: usize, noise: GateNoise) -> Mat {
    match noise {
        GateNoise::Depolarizing(p) => {
            let after = conj(&cnot(control, target), rho);
            let mut twirl = Mat::zeros(DIM, DIM);
            for i in 0..4 {
                for j in 0..4 {
                    let (pi, pj) = (pauli(i), pauli(j));
                    twirl += conj(&on_qubits(&[(control, &pi), (target, &pj)]), &after);
                }
            }
            after * c(p) + twirl * c((1.0 - p) / 16.0)
        }
        GateNoise::PauliFlips(p) => {
            let z = pauli(3);
            let x = pauli(1);
            let flip = |r: Mat, u: Mat| &r * c(p) + conj(&u, &r) * c(1.0 - p);
            let r = flip(rho.clone(), on_qubits(&[(control, &z)]));
            let r = flip(r, on_qubits(&[(target, &x)]));
            conj(&cnot(control, target), &r)
        }
    }
}

fn projector(bit: usize) -> Mat {
    let mut m = Mat::zeros(2, 2);
    m[(bit, bit)] = c(1.0);
    m
}

/// Swap the pairs (a, b) and (c, d) into (a, d) by a Bell measurement on (b, c). Each measured
/// qubit's readout is correct with probability `gamma`.
pub fn swap_oracle(
    left: &BellDiagonalState,
    right: &BellDiagonalState,
    noise: GateNoise,
    gamma: f64,
) -> BellDiagonalState {
    let mut rho = bell_density(left).kronecker(&bell_density(right));
    rho = noisy_cnot(&rho, 1, 2, noise);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h = Mat::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)]);
    rho = conj(&on_qubits(&[(1, &h)]), &rho);
    let mut out = Mat::zeros(4, 4);
    for mb in 0..2 {
        for mc in 0..2 {
            let pb = projector(mb) * c(gamma) + projector(1 - mb) * c(1.0 - gamma);
            let pc = projector(mc) * c(gamma) + projector(1 - mc) * c(1.0 - gamma);
            let conditioned = on_qubits(&[(1, &pb), (2, &pc)]) * &rho;
            let pair = reduce_to_pair(&conditioned, [0, 3]);
            let mut corr = identity2();
            if mc == 1 {
                corr = &corr * pauli(1);
            }
            if mb == 1 {
                corr = &corr * pauli(3);
            }
            out += conj(&identity2().kronecker(&corr), &pair);
        }
    }
    BellDiagonalState::from_weights_unchecked(bell_weights(&out))
}

/// Depolarizing-gate swap oracle.
pub fn brute_force_two_pair_oracle(
    left: &BellDiagonalState,
    right: &BellDiagonalState,
    p_g: f64,
    gamma: f64,
) -> BellDiagonalState {
    swap_oracle(left, right, GateNoise::Depolarizing(p_g), gamma)
}

/// One Deutsch round on two copies of `s`: local π/2 rotations (opposite sense for the two
/// parties), bilateral CNOT from pair (a, b) onto pair (c, d), and coincidence of the target readouts.
pub fn distill_oracle(s: &BellDiagonalState, noise: GateNoise) -> (BellDiagonalState, f64) {
    // Qubit roles in this circuit: a1 = 0, b1 = 1, a2 = 2, b2 = 3.
    let mut rho = bell_density(s).kronecker(&bell_density(s));
    let rx = |t: f64| {
        let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
        Mat::from_row_slice(2, 2, &[c(co), C64::new(0.0, -si), C64::new(0.0, -si), c(co)])
    };
    let plus = rx(std::f64::consts::FRAC_PI_2);
    let minus = rx(-std::f64::consts::FRAC_PI_2);
    rho = conj(&on_qubits(&[(0, &plus), (1, &minus), (2, &plus), (3, &minus)]), &rho);
    rho = noisy_cnot(&rho, 0, 2, noise);
    rho = noisy_cnot(&rho, 1, 3, noise);
    let mut out = Mat::zeros(DIM, DIM);
    for m in 0..2 {
        let p = on_qubits(&[(2, &projector(m)), (3, &projector(m))]);
        out += &p * &rho * &p;
    }
    let p_d = out.trace().re;
    let pair = reduce_to_pair(&out, [0, 1]) / c(p_d);
    (BellDiagonalState::from_weights_unchecked(bell_weights(&pair)), p_d)
}
