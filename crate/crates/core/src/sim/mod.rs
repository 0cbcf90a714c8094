//! Exact state-vector simulation of R, Rz and XX circuits.

mod circuits;
mod parity;
mod state;

pub use circuits::{
    adder_expected, all_pairs_xx, bits_to_index, compile_cnot, compile_toffoli, feynman_adder, ghz_reference_unitary,
    optimized_adder, overlay, parallel_cnots_circuit, run_adder, run_ghz, run_parallel_cnots, truth_table_fidelity,
    AdderVariant, GhzRun, TruthTable,
};
pub use parity::{fidelity_from_parity, fit_parity, parity_scan, Analysis, ParityFit, ParityScan};
pub use state::{phase_aligned_deviation, r_matrix, Circuit, Gate, StateVector};
