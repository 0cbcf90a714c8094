use nalgebra::DMatrix;
use num_complex::Complex64;
use pargate::sim::{
    all_pairs_xx, compile_cnot, compile_toffoli, feynman_adder, fidelity_from_parity, optimized_adder,
    parallel_cnots_circuit, parity_scan, run_adder, run_ghz, run_parallel_cnots, AdderVariant, Analysis, Circuit, Gate,
    StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

type M = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli(name: char) -> M {
    let z = c(0.0, 0.0);
    let entries = match name {
        'I' => [c(1.0, 0.0), z, z, c(1.0, 0.0)],
        'X' => [z, c(1.0, 0.0), c(1.0, 0.0), z],
        'Y' => [z, c(0.0, -1.0), c(0.0, 1.0), z],
        _ => [c(1.0, 0.0), z, z, c(-1.0, 0.0)],
    };
    M::from_row_slice(2, 2, &entries)
}

/// Operator on n qubits with `ops[q]` on qubit q (qubit 0 leftmost).
fn kron_all(ops: &[M]) -> M {
    ops.iter().skip(1).fold(ops[0].clone(), |acc, m| acc.kronecker(m))
}

fn embed(n: usize, placed: &[(usize, M)]) -> M {
    let ops: Vec<M> =
        (0..n).map(|q| placed.iter().find(|(p, _)| *p == q).map_or_else(|| pauli('I'), |(_, m)| m.clone())).collect();
    kron_all(&ops)
}

/// exp(−i h) for Hermitian h.
fn evolve(h: &M) -> M {
    (h * c(0.0, -1.0)).exp()
}

fn gate_matrix(n: usize, gate: &Gate) -> M {
    match *gate {
        Gate::R { qubit, theta, phi } => {
            let axis = pauli('X') * c(phi.cos(), 0.0) + pauli('Y') * c(phi.sin(), 0.0);
            evolve(&embed(n, &[(qubit, axis * c(theta / 2.0, 0.0))]))
        }
        Gate::Rz { qubit, theta } => evolve(&embed(n, &[(qubit, pauli('Z') * c(theta / 2.0, 0.0))])),
        Gate::XX { a, b, chi } => evolve(&(embed(n, &[(a, pauli('X')), (b, pauli('X'))]) * c(chi, 0.0))),
    }
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    let amps: Vec<Complex64> =
        (0..1 << n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> Gate {
    let q = rng.random_range(0..n);
    let angle = rng.random_range(-PI..PI);
    match rng.random_range(0..3) {
        0 => Gate::R { qubit: q, theta: angle, phi: rng.random_range(-PI..PI) },
        1 => Gate::Rz { qubit: q, theta: angle },
        _ => {
            let mut b = rng.random_range(0..n - 1);
            if b >= q {
                b += 1;
            }
            Gate::XX { a: q, b, chi: angle }
        }
    }
}

/// max |U − e^{iθ}V| with θ chosen from tr(V†U).
fn aligned_deviation(u: &M, v: &M) -> f64 {
    let overlap = (v.adjoint() * u).trace();
    let phase = Complex64::from_polar(1.0, -overlap.arg());
    (u * phase - v).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn permutation_matrix(n: usize, f: impl Fn(usize) -> usize) -> M {
    let dim = 1 << n;
    M::from_fn(dim, dim, |r, col| if f(col) == r { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

fn bit(i: usize, n: usize, q: usize) -> usize {
    (i >> (n - 1 - q)) & 1
}

#[test]
fn gates_match_matrix_exponentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..60 {
        let n = rng.random_range(2..=4);
        let gate = random_gate(&mut rng, n);
        let psi = random_state(&mut rng, n);
        let mut got = psi.clone();
        got.apply(&gate).unwrap();
        let want = gate_matrix(n, &gate) * nalgebra::DVector::from_column_slice(psi.amplitudes());
        for (a, b) in got.amplitudes().iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-12, "{:?}", gate);
        }
    }
}

#[test]
fn xx_angles_add() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let (x, y) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let psi = random_state(&mut rng, 3);
        let (mut a, mut b) = (psi.clone(), psi);
        a.apply(&Gate::xx(0, 2, x)).unwrap();
        a.apply(&Gate::xx(0, 2, y)).unwrap();
        b.apply(&Gate::xx(2, 0, x + y)).unwrap();
        assert!((a.inner(&b).norm() - 1.0).abs() < 1e-12);
        assert!((a.inner(&b) - 1.0).norm() < 1e-12);
    }
}

#[test]
fn quarter_xx_on_ground_state() {
    let mut s = StateVector::zero(2);
    s.apply(&Gate::xx(0, 1, FRAC_PI_4)).unwrap();
    let r = 0.5f64.sqrt();
    let want = [c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -r)];
    for (a, b) in s.amplitudes().iter().zip(want) {
        assert!((a - b).norm() < 1e-15);
    }
}

#[test]
fn parity_fringes_of_ideal_gates() {
    let full = parity_scan(FRAC_PI_4, 24, Analysis::Plain).unwrap();
    assert!((full.fit.amplitude - 1.0).abs() < 1e-9);
    // Two periods over [0, 2π): only the second harmonic is present.
    assert!((full.harmonic_amplitude(2) - 1.0).abs() < 1e-9);
    for m in [0, 1, 3, 4, 5] {
        assert!(full.harmonic_amplitude(m) < 1e-9, "harmonic {}", m);
    }
    let half = parity_scan(FRAC_PI_8, 24, Analysis::Plain).unwrap();
    assert!((half.fit.amplitude - FRAC_PI_4.sin()).abs() < 1e-9);
    for scan in [&full, &half] {
        let f = fidelity_from_parity(scan.rho00, scan.rho33, scan.fit.amplitude, scan.chi).unwrap();
        assert!((f - 1.0).abs() < 1e-12, "χ {}: {}", scan.chi, f);
    }
}

#[test]
fn parity_matches_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..20 {
        let chi = rng.random_range(-PI..PI);
        let n_points = rng.random_range(5..40);
        let scan = parity_scan(chi, n_points, Analysis::Plain).unwrap();
        let entangled = gate_matrix(2, &Gate::xx(0, 1, chi)).column(0).into_owned();
        let parity_op = embed(2, &[(0, pauli('Z')), (1, pauli('Z'))]);
        for (phi, p) in scan.phases.iter().zip(&scan.parities) {
            let pulse = gate_matrix(2, &Gate::R { qubit: 0, theta: FRAC_PI_2, phi: *phi })
                * gate_matrix(2, &Gate::R { qubit: 1, theta: FRAC_PI_2, phi: *phi });
            let out = pulse * &entangled;
            let want = (out.adjoint() * &parity_op * &out)[(0, 0)].re;
            assert!((p - want).abs() < 1e-12);
        }
        assert!((scan.fit.amplitude - (2.0 * chi).sin().abs()).abs() < 1e-9, "χ {}", chi);
    }
}

#[test]
fn ghz_state_and_unitary() {
    let run = run_ghz().unwrap();
    let r = 0.5f64.sqrt();
    let mut ghz = vec![c(0.0, 0.0); 16];
    ghz[0] = c(r, 0.0);
    ghz[15] = c(r, 0.0);
    let target = StateVector::from_amplitudes(ghz).unwrap();
    assert!(target.inner(&run.state).norm_sqr() > 1.0 - 1e-12);

    // The displayed 16×16 matrix, (I − i X⊗X⊗X⊗X)/√2.
    let x4 = kron_all(&[pauli('X'), pauli('X'), pauli('X'), pauli('X')]);
    let reference = (M::identity(16, 16) - x4 * c(0.0, 1.0)) * c(r, 0.0);
    let u = all_pairs_xx(-FRAC_PI_4).unwrap().unitary();
    assert!(aligned_deviation(&u, &reference) < 1e-12);
}

#[test]
fn compiled_cnot_and_toffoli_are_permutations() {
    for (ctl, tgt) in [(0, 1), (1, 0), (0, 3), (2, 1), (3, 2)] {
        let u = compile_cnot(4, ctl, tgt).unwrap().unitary();
        let want = permutation_matrix(4, |i| if bit(i, 4, ctl) == 1 { i ^ (1 << (3 - tgt)) } else { i });
        assert!(aligned_deviation(&u, &want) < 1e-12, "CNOT {} {}", ctl, tgt);
    }
    for (a, b, t) in [(0, 1, 3), (1, 2, 3), (3, 0, 1)] {
        let u = compile_toffoli(4, a, b, t).unwrap().unitary();
        let want =
            permutation_matrix(4, |i| if bit(i, 4, a) == 1 && bit(i, 4, b) == 1 { i ^ (1 << (3 - t)) } else { i });
        assert!(aligned_deviation(&u, &want) < 1e-12, "Toffoli {} {} {}", a, b, t);
    }
}

/// Full adder on bits (x, y, Cin, 0) → (x, x⊕y, sum, carry), as a bitstring index.
fn classical_adder(x: usize, y: usize, cin: usize) -> usize {
    let total = x + y + cin;
    (x << 3) | ((x ^ y) << 2) | ((total & 1) << 1) | (total >> 1)
}

#[test]
fn adders_reproduce_classical_table() {
    let feynman = run_adder(AdderVariant::Feynman).unwrap();
    let optimized = run_adder(AdderVariant::Optimized).unwrap();
    for table in [&feynman, &optimized] {
        assert_eq!(table.probabilities.len(), 8);
        for (row, &input) in table.inputs.iter().enumerate() {
            let want = classical_adder(bit(input, 4, 0), bit(input, 4, 1), bit(input, 4, 2));
            assert_eq!(table.expected[row], want);
            assert!(table.probabilities[row][want] >= 0.99);
            assert!((table.probabilities[row][want] - 1.0).abs() < 1e-12);
        }
        assert!((table.fidelity().unwrap() - 1.0).abs() < 1e-12);
    }
    for (a, b) in feynman.probabilities.iter().flatten().zip(optimized.probabilities.iter().flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(optimized_adder().unwrap().two_qubit_depth(), 4);
    assert!(feynman_adder().unwrap().two_qubit_depth() > 4);
}

#[test]
fn parallel_cnots_permutation_table() {
    let table = run_parallel_cnots().unwrap();
    assert_eq!(table.probabilities.len(), 16);
    for (row, &input) in table.inputs.iter().enumerate() {
        let b = |q| bit(input, 4, q);
        let want = (b(0) << 3) | (b(1) << 2) | ((b(2) ^ b(1)) << 1) | (b(3) ^ b(0));
        for (out, p) in table.probabilities[row].iter().enumerate() {
            let ideal = if out == want { 1.0 } else { 0.0 };
            assert!((p - ideal).abs() < 1e-12, "input {} output {}", input, out);
        }
    }
    assert_eq!(parallel_cnots_circuit().unwrap().two_qubit_depth(), 1);
}

#[test]
fn disjoint_gate_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..10 {
        let gates = [
            Gate::xx(0, 1, rng.random_range(-PI..PI)),
            Gate::R { qubit: 2, theta: rng.random_range(-PI..PI), phi: rng.random_range(-PI..PI) },
            Gate::rz(3, rng.random_range(-PI..PI)),
        ];
        let psi = random_state(&mut rng, 4);
        let mut reference = None;
        for order in [[0, 1, 2], [2, 1, 0], [1, 0, 2], [1, 2, 0]] {
            let mut circuit = Circuit::new(4);
            circuit.push(gates[order[0]]).unwrap();
            circuit.push_parallel(gates[order[1]]).unwrap();
            circuit.push_parallel(gates[order[2]]).unwrap();
            let mut s = psi.clone();
            circuit.run(&mut s).unwrap();
            let r = reference.get_or_insert_with(|| s.clone());
            assert!((r.inner(&s) - 1.0).norm() < 1e-12);
        }
    }
}

#[test]
fn overlapping_parallel_gates_rejected() {
    let mut circuit = Circuit::new(3);
    circuit.push(Gate::xx(0, 1, 0.3)).unwrap();
    assert!(circuit.push_parallel(Gate::rz(1, 0.2)).is_err());
    let mut s = StateVector::zero(2);
    assert!(s.apply(&Gate::xx(0, 2, 0.1)).is_err());
    assert!(s.apply(&Gate::xx(1, 1, 0.1)).is_err());
}
