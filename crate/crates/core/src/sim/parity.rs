//! Parity-scan analysis of a two-qubit XX(χ) gate.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::{FRAC_PI_2, PI};

use super::state::{Gate, StateVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analysis {
    Plain,
    /// SK1 composite π/2 pulses with fractional rotation-angle error ε.
    Sk1 {
        epsilon: f64,
    },
}

/// Fit of Π(φ) = offset − amplitude·cos(2φ − phase).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityScan {
    pub chi: f64,
    pub phases: Vec<f64>,
    pub parities: Vec<f64>,
    pub fit: ParityFit,
    /// Populations of |00⟩ and |11⟩ right after the gate.
    pub rho00: f64,
    pub rho33: f64,
}

impl ParityScan {
    /// Amplitude of the cos(mφ)/sin(mφ) component of the sampled parity.
    pub fn harmonic_amplitude(&self, m: usize) -> f64 {
        let n = self.phases.len() as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (phi, p) in self.phases.iter().zip(&self.parities) {
            c += p * (m as f64 * phi).cos();
            s += p * (m as f64 * phi).sin();
        }
        let scale = if m == 0 { 1.0 } else { 2.0 };
        scale * (c * c + s * s).sqrt() / n
    }
}

/// Applies the analysis π/2 rotation at phase φ to one qubit.
fn analysis_pulse(state: &mut StateVector, q: usize, phi: f64, analysis: Analysis) -> Result<()> {
    let theta = FRAC_PI_2;
    match analysis {
        Analysis::Plain => state.apply(&Gate::R { qubit: q, theta, phi }),
        Analysis::Sk1 { epsilon } => {
            let phi1 = (-theta / (4.0 * PI)).acos();
            let k = 1.0 + epsilon;
            state.apply(&Gate::R { qubit: q, theta: theta * k, phi })?;
            state.apply(&Gate::R { qubit: q, theta: 2.0 * PI * k, phi: phi + phi1 })?;
            state.apply(&Gate::R { qubit: q, theta: 2.0 * PI * k, phi: phi - phi1 })
        }
    }
}

/// Least-squares fit of c + a cos 2φ + b sin 2φ.
pub fn fit_parity(phases: &[f64], parities: &[f64]) -> Result<ParityFit> {
    if phases.len() != parities.len() || phases.len() < 3 {
        return Err(Error::InvalidParameter("parity fit needs at least 3 matched samples".into()));
    }
    let a = DMatrix::from_fn(phases.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => (2.0 * phases[r]).cos(),
        _ => (2.0 * phases[r]).sin(),
    });
    let y = DVector::from_column_slice(parities);
    let coef =
        a.svd(true, true).solve(&y, 1e-14).map_err(|e| Error::InvalidParameter(format!("parity fit failed: {}", e)))?;
    let (a1, b1) = (coef[1], coef[2]);
    Ok(ParityFit { offset: coef[0], amplitude: a1.hypot(b1), phase: (-b1).atan2(-a1) })
}

/// Prepares |00⟩, applies XX(χ), then scans the phase of a global π/2
/// analysis rotation over n_points values uniform in [0, 2π).
pub fn parity_scan(chi: f64, n_points: usize, analysis: Analysis) -> Result<ParityScan> {
    if n_points < 5 {
        return Err(Error::InvalidParameter(format!("parity scan needs ≥ 5 points, got {}", n_points)));
    }
    let mut entangled = StateVector::zero(2);
    entangled.apply(&Gate::xx(0, 1, chi))?;
    let pops = entangled.probabilities();
    let phases: Vec<f64> = (0..n_points).map(|k| 2.0 * PI * k as f64 / n_points as f64).collect();
    let parities = phases
        .iter()
        .map(|&phi| {
            let mut s = entangled.clone();
            analysis_pulse(&mut s, 0, phi, analysis)?;
            analysis_pulse(&mut s, 1, phi, analysis)?;
            let p = s.probabilities();
            Ok(p[0] + p[3] - p[1] - p[2])
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_parity(&phases, &parities)?;
    Ok(ParityScan { chi, phases, parities, fit, rho00: pops[0], rho33: pops[3] })
}

/// ρ₀₀cos²χ + ρ₃₃sin²χ + A_Π cos χ sin χ.
pub fn fidelity_from_parity(rho00: f64, rho33: f64, a_pi: f64, chi: f64) -> Result<f64> {
    for (name, v) in [("rho00", rho00), ("rho33", rho33)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("{} = {} outside [0, 1]", name, v)));
        }
    }
    let (s, c) = chi.sin_cos();
    Ok(rho00 * c * c + rho33 * s * s + a_pi * c * s)
}
