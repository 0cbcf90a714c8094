use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Pure state of n qubits. Qubit 0 is the most significant bit of the basis
/// index, so |q0 q1 ... q(n-1)⟩ reads left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        assert!(index < 1 << n_qubits, "basis index out of range");
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::DimensionMismatch(format!("{} amplitudes is not 2^n", n)));
        }
        Ok(Self { n_qubits: n.trailing_zeros() as usize, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Bit mask of qubit q in the basis index.
    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            Err(Error::IndexOutOfRange { index: q, size: self.n_qubits })
        } else {
            Ok(())
        }
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let mask = self.mask(q);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::R { qubit, theta, phi } => {
                self.check(qubit)?;
                self.apply_1q(qubit, r_matrix(theta, phi));
            }
            Gate::Rz { qubit, theta } => {
                self.check(qubit)?;
                let h = 0.5 * theta;
                let zero = Complex64::new(0.0, 0.0);
                self.apply_1q(qubit, [[Complex64::from_polar(1.0, -h), zero], [zero, Complex64::from_polar(1.0, h)]]);
            }
            Gate::XX { a, b, chi } => {
                self.check(a)?;
                self.check(b)?;
                if a == b {
                    return Err(Error::InvalidParameter(format!("XX on a single qubit {}", a)));
                }
                let flip = self.mask(a) | self.mask(b);
                let c = Complex64::new(chi.cos(), 0.0);
                let s = Complex64::new(0.0, -chi.sin());
                for i in 0..self.amps.len() {
                    let j = i ^ flip;
                    if i < j {
                        let (ai, aj) = (self.amps[i], self.amps[j]);
                        self.amps[i] = c * ai + s * aj;
                        self.amps[j] = s * ai + c * aj;
                    }
                }
            }
        }
        Ok(())
    }
}

/// R(θ, φ) = [[cos θ/2, −i e^{−iφ} sin θ/2], [−i e^{iφ} sin θ/2, cos θ/2]].
pub fn r_matrix(theta: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let c = Complex64::new((0.5 * theta).cos(), 0.0);
    let s = (0.5 * theta).sin();
    let mi = Complex64::new(0.0, -1.0);
    [[c, mi * Complex64::from_polar(s, -phi)], [mi * Complex64::from_polar(s, phi), c]]
}

/// Native gates. Angles in radians, qubits 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    R {
        qubit: usize,
        theta: f64,
        phi: f64,
    },
    Rz {
        qubit: usize,
        theta: f64,
    },
    /// exp(−iχ σx σx).
    XX {
        a: usize,
        b: usize,
        chi: f64,
    },
}

impl Gate {
    pub fn rx(qubit: usize, theta: f64) -> Self {
        Gate::R { qubit, theta, phi: 0.0 }
    }

    pub fn ry(qubit: usize, theta: f64) -> Self {
        Gate::R { qubit, theta, phi: FRAC_PI_2 }
    }

    pub fn rz(qubit: usize, theta: f64) -> Self {
        Gate::Rz { qubit, theta }
    }

    pub fn xx(a: usize, b: usize, chi: f64) -> Self {
        Gate::XX { a, b, chi }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::XX { .. })
    }

    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::R { qubit, .. } | Gate::Rz { qubit, .. } => vec![qubit],
            Gate::XX { a, b, .. } => vec![a, b],
        }
    }
}

/// Ordered gate list. Each gate carries a layer number; gates sharing a layer
/// act on disjoint qubits and count once toward depth. Simulation always
/// runs in list order.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    layers: Vec<usize>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new(), layers: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    fn validate_gate(&self, gate: &Gate) -> Result<()> {
        let qs = gate.qubits();
        for &q in &qs {
            if q >= self.n_qubits {
                return Err(Error::IndexOutOfRange { index: q, size: self.n_qubits });
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidParameter(format!("XX on a single qubit {}", qs[0])));
        }
        Ok(())
    }

    /// Appends a gate in a new layer.
    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        self.validate_gate(&gate)?;
        let layer = self.layers.last().map_or(0, |l| l + 1);
        self.gates.push(gate);
        self.layers.push(layer);
        Ok(self)
    }

    /// Appends a gate to the current layer; it must not share qubits with it.
    pub fn push_parallel(&mut self, gate: Gate) -> Result<&mut Self> {
        let Some(&layer) = self.layers.last() else {
            return self.push(gate);
        };
        self.validate_gate(&gate)?;
        let used: Vec<usize> =
            self.gates.iter().zip(&self.layers).filter(|(_, &l)| l == layer).flat_map(|(g, _)| g.qubits()).collect();
        if let Some(q) = gate.qubits().into_iter().find(|q| used.contains(q)) {
            return Err(Error::InvalidParameter(format!("qubit {} already used in layer {}", q, layer)));
        }
        self.gates.push(gate);
        self.layers.push(layer);
        Ok(self)
    }

    /// Appends another circuit, keeping its layer structure.
    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit circuit into {} qubits",
                other.n_qubits, self.n_qubits
            )));
        }
        let base = self.layers.last().map_or(0, |l| l + 1);
        for (g, l) in other.gates.iter().zip(&other.layers) {
            self.gates.push(*g);
            self.layers.push(base + l);
        }
        Ok(self)
    }

    /// Layers containing at least one two-qubit gate.
    pub fn two_qubit_depth(&self) -> usize {
        let mut layers: Vec<usize> =
            self.gates.iter().zip(&self.layers).filter(|(g, _)| g.is_two_qubit()).map(|(_, &l)| l).collect();
        layers.dedup();
        layers.len()
    }

    pub fn run(&self, state: &mut StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit circuit on {}-qubit state",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        for g in &self.gates {
            state.apply(g)?;
        }
        Ok(())
    }

    /// Full 2^n × 2^n unitary; column c is the image of basis state c.
    pub fn unitary(&self) -> DMatrix<Complex64> {
        let dim = 1 << self.n_qubits;
        let mut u = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let mut s = StateVector::basis(self.n_qubits, c);
            self.run(&mut s).expect("gates validated on insertion");
            for (r, a) in s.amplitudes().iter().enumerate() {
                u[(r, c)] = *a;
            }
        }
        u
    }
}

/// Max entrywise |a·e^{iθ} − b| after aligning the phase on the
/// largest-magnitude entry of b.
pub fn phase_aligned_deviation(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let (idx, _) = b
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm_sqr().total_cmp(&y.1.norm_sqr()))
        .ok_or_else(|| Error::InvalidParameter("empty matrix".into()))?;
    let pa = a.as_slice()[idx];
    let pb = b.as_slice()[idx];
    let phase = if pa.norm() > 0.0 { (pb / pa) / (pb / pa).norm() } else { Complex64::new(1.0, 0.0) };
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x * phase - y).norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn xx_quarter_on_zero() {
        let mut s = StateVector::zero(2);
        s.apply(&Gate::xx(0, 1, FRAC_PI_4)).unwrap();
        let r = 0.5f64.sqrt();
        let want = [c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -r)];
        for (a, b) in s.amplitudes().iter().zip(want) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn xx_matrix_entries() {
        let mut circ = Circuit::new(2);
        circ.push(Gate::xx(0, 1, 0.3)).unwrap();
        let u = circ.unitary();
        let (co, si) = (0.3f64.cos(), 0.3f64.sin());
        for i in 0..4 {
            assert!((u[(i, i)] - c(co, 0.0)).norm() < 1e-15);
            assert!((u[(i, 3 - i)] - c(0.0, -si)).norm() < 1e-15);
        }
    }

    #[test]
    fn msb_ordering() {
        let mut s = StateVector::zero(3);
        s.apply(&Gate::rx(0, PI)).unwrap();
        assert!((s.probabilities()[0b100] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ry_and_rx_conventions() {
        // Ry(π/2)|0⟩ = (|0⟩ + |1⟩)/√2; Rx(π)|0⟩ = −i|1⟩.
        let mut s = StateVector::zero(1);
        s.apply(&Gate::ry(0, FRAC_PI_2)).unwrap();
        let r = 0.5f64.sqrt();
        assert!((s.amplitudes()[0] - c(r, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[1] - c(r, 0.0)).norm() < 1e-15);
        let mut s = StateVector::zero(1);
        s.apply(&Gate::rx(0, PI)).unwrap();
        assert!((s.amplitudes()[1] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn index_errors() {
        let mut s = StateVector::zero(2);
        assert!(matches!(s.apply(&Gate::rz(2, 1.0)), Err(Error::IndexOutOfRange { index: 2, size: 2 })));
        assert!(s.apply(&Gate::xx(1, 1, 1.0)).is_err());
        let mut circ = Circuit::new(3);
        circ.push(Gate::xx(0, 1, 0.1)).unwrap();
        assert!(circ.push_parallel(Gate::rz(1, 0.1)).is_err());
        circ.push_parallel(Gate::rz(2, 0.1)).unwrap();
        assert_eq!(circ.layers(), &[0, 0]);
        assert_eq!(circ.two_qubit_depth(), 1);
    }

    #[test]
    fn phase_alignment() {
        let mut circ = Circuit::new(2);
        circ.push(Gate::xx(0, 1, 0.7)).unwrap();
        let u = circ.unitary();
        let v = u.map(|z| z * Complex64::from_polar(1.0, 1.234));
        assert!(phase_aligned_deviation(&u, &v).unwrap() < 1e-14);
        let w = Circuit::new(2).unitary();
        assert!(phase_aligned_deviation(&u, &w).unwrap() > 0.1);
    }
}
