//! Compiled circuits: CNOT, Toffoli, the parallel-CNOT test, the two full
//! adders and the single-operation GHZ state.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use super::state::{phase_aligned_deviation, Circuit, Gate, StateVector};
use crate::error::{Error, Result};

/// CNOT(control → target) from one XX(π/4) and four single-qubit rotations.
pub fn compile_cnot(n_qubits: usize, control: usize, target: usize) -> Result<Circuit> {
    if control == target {
        return Err(Error::InvalidParameter("CNOT control equals target".into()));
    }
    let mut c = Circuit::new(n_qubits);
    c.push(Gate::ry(control, FRAC_PI_2))?;
    c.push(Gate::xx(control, target, FRAC_PI_4))?;
    c.push(Gate::rx(control, -FRAC_PI_2))?.push_parallel(Gate::rx(target, -FRAC_PI_2))?;
    c.push(Gate::ry(control, -FRAC_PI_2))?;
    Ok(c)
}

/// Hadamard up to global phase: Z, then Ry(π/2).
fn hadamard(c: &mut Circuit, q: usize) -> Result<()> {
    c.push(Gate::rz(q, PI))?;
    c.push(Gate::ry(q, FRAC_PI_2))?;
    Ok(())
}

/// Toffoli via the textbook six-CNOT, seven-T construction.
pub fn compile_toffoli(n_qubits: usize, c1: usize, c2: usize, target: usize) -> Result<Circuit> {
    if c1 == c2 || c1 == target || c2 == target {
        return Err(Error::InvalidParameter("Toffoli qubits must be distinct".into()));
    }
    let t = |c: &mut Circuit, q, sign: f64| c.push(Gate::rz(q, sign * FRAC_PI_4)).map(|_| ());
    let mut c = Circuit::new(n_qubits);
    hadamard(&mut c, target)?;
    c.extend(&compile_cnot(n_qubits, c2, target)?)?;
    t(&mut c, target, -1.0)?;
    c.extend(&compile_cnot(n_qubits, c1, target)?)?;
    t(&mut c, target, 1.0)?;
    c.extend(&compile_cnot(n_qubits, c2, target)?)?;
    t(&mut c, target, -1.0)?;
    c.extend(&compile_cnot(n_qubits, c1, target)?)?;
    t(&mut c, c2, 1.0)?;
    t(&mut c, target, 1.0)?;
    hadamard(&mut c, target)?;
    c.extend(&compile_cnot(n_qubits, c1, c2)?)?;
    t(&mut c, c1, 1.0)?;
    t(&mut c, c2, -1.0)?;
    c.extend(&compile_cnot(n_qubits, c1, c2)?)?;
    Ok(c)
}

/// Overlays circuits on disjoint qubits layer by layer.
pub fn overlay(n_qubits: usize, parts: &[Circuit]) -> Result<Circuit> {
    let depth = parts.iter().filter_map(|p| p.layers().last()).max().map_or(0, |l| l + 1);
    let mut out = Circuit::new(n_qubits);
    for layer in 0..depth {
        let mut first = true;
        for p in parts {
            for (g, _) in p.gates().iter().zip(p.layers()).filter(|(_, &l)| l == layer) {
                if first {
                    out.push(*g)?;
                    first = false;
                } else {
                    out.push_parallel(*g)?;
                }
            }
        }
    }
    Ok(out)
}

/// Ideal measurement statistics of a circuit over a set of basis inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    pub n_qubits: usize,
    /// Input basis indices, one per row.
    pub inputs: Vec<usize>,
    /// Row r: probability of every output basis state for input r.
    pub probabilities: Vec<Vec<f64>>,
    /// Classically expected output of each row.
    pub expected: Vec<usize>,
}

impl TruthTable {
    pub fn from_circuit(circuit: &Circuit, inputs: Vec<usize>, expected: Vec<usize>) -> Result<Self> {
        if inputs.len() != expected.len() {
            return Err(Error::DimensionMismatch("inputs and expected outputs differ in length".into()));
        }
        let n = circuit.n_qubits();
        let probabilities = inputs
            .iter()
            .map(|&i| {
                let mut s = StateVector::basis(n, i);
                circuit.run(&mut s)?;
                Ok(s.probabilities())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_qubits: n, inputs, probabilities, expected })
    }

    /// Mean probability of the expected output.
    pub fn fidelity(&self) -> Result<f64> {
        truth_table_fidelity(&self.probabilities, &self.expected)
    }
}

/// Mean over rows of the probability assigned to the expected output. This
/// is the reading adopted for "average process fidelity".
pub fn truth_table_fidelity(table: &[Vec<f64>], expected: &[usize]) -> Result<f64> {
    if table.len() != expected.len() || table.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows against {} expected outputs",
            table.len(),
            expected.len()
        )));
    }
    let mut total = 0.0;
    for (row, (probs, &want)) in table.iter().zip(expected).enumerate() {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
            return Err(Error::MalformedDistribution { row, sum });
        }
        total += *probs.get(want).ok_or(Error::IndexOutOfRange { index: want, size: probs.len() })?;
    }
    Ok(total / table.len() as f64)
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b as usize & 1))
}

/// CNOT(1→4) in parallel with CNOT(2→3) on four qubits.
pub fn parallel_cnots_circuit() -> Result<Circuit> {
    overlay(4, &[compile_cnot(4, 0, 3)?, compile_cnot(4, 1, 2)?])
}

pub fn run_parallel_cnots() -> Result<TruthTable> {
    let inputs: Vec<usize> = (0..16).collect();
    let expected = inputs
        .iter()
        .map(|&i| {
            let b = |q: usize| ((i >> (3 - q)) & 1) as u8;
            bits_to_index(&[b(0), b(1), b(2) ^ b(1), b(3) ^ b(0)])
        })
        .collect();
    TruthTable::from_circuit(&parallel_cnots_circuit()?, inputs, expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdderVariant {
    Feynman,
    Optimized,
}

const X: usize = 0;
const Y: usize = 1;
const CIN: usize = 2;
const ANC: usize = 3;

/// Toffoli(x,y→anc), CNOT(x→y), Toffoli(y,Cin→anc), CNOT(y→Cin).
pub fn feynman_adder() -> Result<Circuit> {
    let mut c = Circuit::new(4);
    c.extend(&compile_toffoli(4, X, Y, ANC)?)?;
    c.extend(&compile_cnot(4, X, Y)?)?;
    c.extend(&compile_toffoli(4, Y, CIN, ANC)?)?;
    c.extend(&compile_cnot(4, Y, CIN)?)?;
    Ok(c)
}

/// The four-XX-layer adder, gate for gate.
pub fn optimized_adder() -> Result<Circuit> {
    let mut c = Circuit::new(4);
    c.push(Gate::rz(X, -3.0 * FRAC_PI_4))?
        .push_parallel(Gate::rz(Y, -FRAC_PI_4))?
        .push_parallel(Gate::rz(CIN, FRAC_PI_4))?
        .push_parallel(Gate::rx(ANC, -FRAC_PI_2))?;
    c.push(Gate::ry(X, FRAC_PI_2))?.push_parallel(Gate::ry(Y, FRAC_PI_2))?.push_parallel(Gate::ry(CIN, FRAC_PI_2))?;
    c.push(Gate::xx(Y, ANC, FRAC_PI_8))?;
    c.push(Gate::ry(Y, -FRAC_PI_2))?;
    c.push(Gate::xx(X, Y, FRAC_PI_4))?.push_parallel(Gate::xx(CIN, ANC, FRAC_PI_8))?;
    c.push(Gate::rz(Y, -FRAC_PI_2))?.push_parallel(Gate::rz(CIN, -FRAC_PI_2))?;
    c.push(Gate::xx(X, ANC, FRAC_PI_8))?.push_parallel(Gate::xx(Y, CIN, FRAC_PI_4))?;
    c.push(Gate::ry(X, -FRAC_PI_2))?.push_parallel(Gate::ry(Y, FRAC_PI_2))?.push_parallel(Gate::ry(CIN, FRAC_PI_2))?;
    c.push(Gate::xx(CIN, ANC, -FRAC_PI_8))?;
    c.push(Gate::rz(Y, PI))?.push_parallel(Gate::ry(CIN, -FRAC_PI_2))?;
    c.push(Gate::rz(CIN, FRAC_PI_4))?;
    Ok(c)
}

/// Classical full adder on |x, y, Cin, 0⟩ → |x, x⊕y, S, Cout⟩.
pub fn adder_expected(input: usize) -> usize {
    let (x, y, cin) = (((input >> 3) & 1) as u8, ((input >> 2) & 1) as u8, ((input >> 1) & 1) as u8);
    let s = x ^ y ^ cin;
    let cout = (x & y) ^ (cin & (x ^ y));
    bits_to_index(&[x, x ^ y, s, cout])
}

pub fn run_adder(variant: AdderVariant) -> Result<TruthTable> {
    let circuit = match variant {
        AdderVariant::Feynman => feynman_adder()?,
        AdderVariant::Optimized => optimized_adder()?,
    };
    let inputs: Vec<usize> = (0..8).map(|k| k << 1).collect();
    let expected = inputs.iter().map(|&i| adder_expected(i)).collect();
    TruthTable::from_circuit(&circuit, inputs, expected)
}

/// Six pairwise XX gates on four qubits, all with the same angle.
pub fn all_pairs_xx(chi: f64) -> Result<Circuit> {
    let mut c = Circuit::new(4);
    for a in 0..4 {
        for b in a + 1..4 {
            c.push(Gate::xx(a, b, chi))?;
        }
    }
    Ok(c)
}

/// (I − i X⊗X⊗X⊗X)/√2.
pub fn ghz_reference_unitary() -> DMatrix<Complex64> {
    let r = 0.5f64.sqrt();
    DMatrix::from_fn(16, 16, |i, j| {
        if i == j {
            Complex64::new(r, 0.0)
        } else if i + j == 15 {
            Complex64::new(0.0, -r)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[derive(Debug, Clone)]
pub struct GhzRun {
    pub state: StateVector,
    /// Deviation of the six-gate unitary from the reference, after phase alignment.
    pub unitary_deviation: f64,
}

/// Six XX(−π/4) gates (the collective exp(+iπ/4 Σ σxσx)), checked against
/// the reference unitary, then Rz(π/2) on qubit 1, applied to |0000⟩.
pub fn run_ghz() -> Result<GhzRun> {
    let xx = all_pairs_xx(-FRAC_PI_4)?;
    let unitary_deviation = phase_aligned_deviation(&xx.unitary(), &ghz_reference_unitary())?;
    if unitary_deviation > 1e-12 {
        return Err(Error::Malformed(format!("GHZ unitary deviates by {:e}", unitary_deviation)));
    }
    let mut full = xx.clone();
    full.push(Gate::rz(0, FRAC_PI_2))?;
    let mut state = StateVector::zero(4);
    full.run(&mut state)?;
    Ok(GhzRun { state, unitary_deviation })
}
