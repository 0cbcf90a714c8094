//! Analytic gate-quality metrics for four involved ions (i, j, m, n):
//! thermal Γ factors, the parallel-gate fidelity F‖ and the GHZ fidelity.
//!
//! Ion slots are ordered (i, j, m, n); pair slots follow [`terms::PAIR_LABELS`].
//! In parallel mode (i, j) and (m, n) are the entangling pairs.

pub mod terms;

use std::f64::consts::FRAC_PI_4;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{alpha_of, chi_of, AmplitudeVector, ConstraintSystem};
use terms::{Term, FULL_PATTERNS, PAIR_LABELS, PAIR_SLOTS};

/// β = coth(½ ln(1 + 1/n̄)) = 2n̄ + 1.
pub fn beta_of(nbar: f64) -> Result<f64> {
    if nbar < 0.0 || !nbar.is_finite() {
        return Err(Error::InvalidParameter(format!("mean phonon number must be >= 0, got {}", nbar)));
    }
    Ok(2.0 * nbar + 1.0)
}

/// Per-mode β_k.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalSpec {
    beta: Vec<f64>,
}

impl ThermalSpec {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if let Some(b) = beta.iter().find(|b| **b < 1.0 || !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 1, got {}", b)));
        }
        Ok(Self { beta })
    }

    pub fn from_nbar(nbar: &[f64]) -> Result<Self> {
        Ok(Self { beta: nbar.iter().map(|&n| beta_of(n)).collect::<Result<_>>()? })
    }

    /// Ground-state cooled modes.
    pub fn ground(n_modes: usize) -> Self {
        Self { beta: vec![1.0; n_modes] }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// α and χ values of four involved ions with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSummary {
    alphas: [Vec<Complex64>; 4],
    chis: [f64; 6],
    chi_ideals: [f64; 6],
}

impl InteractionSummary {
    pub fn new(alphas: [Vec<Complex64>; 4], chis: [f64; 6], chi_ideals: [f64; 6]) -> Result<Self> {
        let n = alphas[0].len();
        if alphas.iter().any(|a| a.len() != n) {
            return Err(Error::DimensionMismatch("α rows have different mode counts".into()));
        }
        if alphas.iter().flatten().any(|a| !a.is_finite()) || chis.iter().chain(&chi_ideals).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite α or χ".into()));
        }
        Ok(Self { alphas, chis, chi_ideals })
    }

    /// Parallel mode: targets on (i,j) and (m,n), zero on the crosstalk slots.
    pub fn parallel(alphas: [Vec<Complex64>; 4], chis: [f64; 6], ideal_ij: f64, ideal_mn: f64) -> Result<Self> {
        Self::new(alphas, chis, [ideal_ij, 0.0, 0.0, 0.0, 0.0, ideal_mn])
    }

    /// GHZ mode: every slot targets π/4.
    pub fn ghz(alphas: [Vec<Complex64>; 4], chis: [f64; 6]) -> Result<Self> {
        Self::new(alphas, chis, [FRAC_PI_4; 6])
    }

    /// A single pair embedded in slots (i, j); slots (m, n) hold an ideal
    /// phantom pair with no displacement and no interaction.
    pub fn single_pair(alpha_i: Vec<Complex64>, alpha_j: Vec<Complex64>, chi: f64, ideal: f64) -> Result<Self> {
        let zeros = vec![Complex64::new(0.0, 0.0); alpha_i.len()];
        Self::new(
            [alpha_i, alpha_j, zeros.clone(), zeros],
            [chi, 0.0, 0.0, 0.0, 0.0, 0.0],
            [ideal, 0.0, 0.0, 0.0, 0.0, 0.0],
        )
    }

    /// Reads α and χ from a kernel for chain ions `ions` = (i, j, m, n).
    pub fn from_system(
        system: &ConstraintSystem,
        amps: &AmplitudeVector,
        ions: [usize; 4],
        chi_ideals: [f64; 6],
    ) -> Result<Self> {
        let mut alphas: [Vec<Complex64>; 4] = Default::default();
        for (slot, &ion) in ions.iter().enumerate() {
            alphas[slot] = (0..system.n_modes()).map(|k| alpha_of(system, amps, ion, k)).collect::<Result<_>>()?;
        }
        let mut chis = [0.0; 6];
        for (p, &(a, b)) in PAIR_SLOTS.iter().enumerate() {
            chis[p] = chi_of(system, amps, (ions[a], ions[b]))?;
        }
        Self::new(alphas, chis, chi_ideals)
    }

    pub fn alphas(&self) -> &[Vec<Complex64>; 4] {
        &self.alphas
    }

    pub fn chis(&self) -> &[f64; 6] {
        &self.chis
    }

    pub fn chi_ideals(&self) -> &[f64; 6] {
        &self.chi_ideals
    }

    pub fn n_modes(&self) -> usize {
        self.alphas[0].len()
    }

    /// Δχ = χ − χ_ideal per pair slot.
    pub fn deviations(&self) -> [f64; 6] {
        std::array::from_fn(|p| self.chis[p] - self.chi_ideals[p])
    }
}

/// Γ_{A_i A_j A_m A_n} = exp(−½ Σ_k β_k |2 Σ_slot A α_{slot,k}|²).
///
/// Panics if the thermal spec and summary disagree on the mode count.
pub fn gamma(summary: &InteractionSummary, thermal: &ThermalSpec, signs: [i8; 4]) -> f64 {
    assert_eq!(summary.n_modes(), thermal.beta.len(), "mode count mismatch");
    let mut exponent = 0.0;
    for (k, &beta) in thermal.beta.iter().enumerate() {
        let mut disp = Complex64::new(0.0, 0.0);
        for (slot, &a) in signs.iter().enumerate() {
            disp += summary.alphas[slot][k] * f64::from(a);
        }
        exponent += beta * (2.0 * disp).norm_sqr();
    }
    (-0.5 * exponent).exp()
}

fn parallel_terms() -> &'static [Term] {
    static TABLE: OnceLock<Vec<Term>> = OnceLock::new();
    TABLE.get_or_init(|| terms::parse(&terms::PARALLEL))
}

fn ghz_terms() -> &'static [Term] {
    static TABLE: OnceLock<Vec<Term>> = OnceLock::new();
    TABLE.get_or_init(|| terms::parse(&terms::GHZ))
}

fn evaluate(table: &[Term], summary: &InteractionSummary, thermal: &ThermalSpec) -> f64 {
    let dev = summary.deviations();
    let mut total = 8.0;
    for p in FULL_PATTERNS {
        total += gamma(summary, thermal, terms::parse_pattern(p));
    }
    for t in table {
        let arg: f64 = t.argument.iter().zip(&dev).map(|(&c, &d)| f64::from(c) * d).sum();
        let g = gamma(summary, thermal, t.gamma_a) + t.weight_b * gamma(summary, thermal, t.gamma_b);
        total += 2.0 * g * (2.0 * arg).cos();
    }
    total / 128.0
}

fn check_modes(summary: &InteractionSummary, thermal: &ThermalSpec) -> Result<()> {
    if summary.n_modes() != thermal.beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "summary has {} modes, thermal spec {}",
            summary.n_modes(),
            thermal.beta.len()
        )));
    }
    Ok(())
}

/// F‖ for two parallel gates on (i, j) and (m, n).
pub fn parallel_fidelity(summary: &InteractionSummary, thermal: &ThermalSpec) -> Result<f64> {
    check_modes(summary, thermal)?;
    if (1..5).any(|p| summary.chi_ideals[p] != 0.0) {
        return Err(Error::InvalidParameter("parallel mode needs zero crosstalk targets".into()));
    }
    Ok(evaluate(parallel_terms(), summary, thermal))
}

/// F_GHZ for one operation entangling all six pairs at π/4.
pub fn ghz_fidelity(summary: &InteractionSummary, thermal: &ThermalSpec) -> Result<f64> {
    check_modes(summary, thermal)?;
    if summary.chi_ideals.iter().any(|&c| (c - FRAC_PI_4).abs() > 1e-12) {
        return Err(Error::InvalidParameter("GHZ mode needs every target at π/4".into()));
    }
    Ok(evaluate(ghz_terms(), summary, thermal))
}

/// Γ for each of the eight fully signed patterns, keyed by pattern string.
pub fn full_pattern_gammas(summary: &InteractionSummary, thermal: &ThermalSpec) -> Vec<(String, f64)> {
    FULL_PATTERNS.iter().map(|p| (p.to_string(), gamma(summary, thermal, terms::parse_pattern(p)))).collect()
}

/// Per-pair χ entry of an evaluator report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairChi {
    /// 1-based chain ions.
    pub ions: [usize; 2],
    pub chi_pi: f64,
    pub ideal_pi: f64,
}

/// |α| of one ion for every mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonResiduals {
    pub ion: usize,
    pub abs_alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaDiagnostic {
    pub pattern: String,
    pub gamma: f64,
}

/// Evaluator report as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorReport {
    #[serde(rename = "F_parallel")]
    pub f_parallel: Option<f64>,
    #[serde(rename = "F_ghz")]
    pub f_ghz: Option<f64>,
    pub mu_mhz: f64,
    pub max_abs_alpha: f64,
    pub max_abs_delta_chi: f64,
    pub alpha_residuals: Vec<IonResiduals>,
    pub pair_chi: Vec<PairChi>,
    pub gamma_full_patterns: Vec<GammaDiagnostic>,
}

/// Builds a report for every involved ion of `system`.
///
/// `targets` lists (ion_a, ion_b, χ_ideal) for entangling pairs; every other
/// pair of involved ions is a crosstalk pair with target 0. F‖ is reported
/// for one or two entangling pairs; F_GHZ when `ghz` is set and four ions are
/// involved.
pub fn build_report(
    system: &ConstraintSystem,
    amps: &AmplitudeVector,
    targets: &[(usize, usize, f64)],
    thermal: &ThermalSpec,
    ghz: bool,
) -> Result<EvaluatorReport> {
    let ions = system.ions();
    let mut alpha_residuals = Vec::with_capacity(ions.len());
    let mut max_abs_alpha = 0.0f64;
    for &ion in ions {
        let abs_alpha = (0..system.n_modes())
            .map(|k| alpha_of(system, amps, ion, k).map(|a| a.norm()))
            .collect::<Result<Vec<_>>>()?;
        max_abs_alpha = abs_alpha.iter().fold(max_abs_alpha, |m, &a| m.max(a));
        alpha_residuals.push(IonResiduals { ion: ion + 1, abs_alpha });
    }

    let ideal_for = |a: usize, b: usize| {
        targets.iter().find(|t| (t.0 == a && t.1 == b) || (t.0 == b && t.1 == a)).map(|t| t.2).unwrap_or(0.0)
    };
    let mut pair_chi = Vec::new();
    let mut max_abs_delta_chi = 0.0f64;
    for (x, &a) in ions.iter().enumerate() {
        for &b in &ions[x + 1..] {
            let chi = chi_of(system, amps, (a, b))?;
            let ideal = ideal_for(a, b);
            max_abs_delta_chi = max_abs_delta_chi.max((chi - ideal).abs());
            pair_chi.push(PairChi {
                ions: [a + 1, b + 1],
                chi_pi: chi / std::f64::consts::PI,
                ideal_pi: ideal / std::f64::consts::PI,
            });
        }
    }

    let parallel_summary = match targets {
        [(i, j, t)] => {
            let alpha = |ion| -> Result<Vec<Complex64>> {
                (0..system.n_modes()).map(|k| alpha_of(system, amps, ion, k)).collect()
            };
            Some(InteractionSummary::single_pair(alpha(*i)?, alpha(*j)?, chi_of(system, amps, (*i, *j))?, *t)?)
        }
        [(i, j, t1), (m, n, t2)] => {
            Some(InteractionSummary::from_system(system, amps, [*i, *j, *m, *n], [*t1, 0.0, 0.0, 0.0, 0.0, *t2])?)
        }
        _ => None,
    };
    let f_parallel = match &parallel_summary {
        Some(s) => Some(parallel_fidelity(s, thermal)?),
        None => None,
    };
    let f_ghz = if ghz && ions.len() == 4 {
        let s = InteractionSummary::from_system(system, amps, [ions[0], ions[1], ions[2], ions[3]], [FRAC_PI_4; 6])?;
        Some(ghz_fidelity(&s, thermal)?)
    } else {
        None
    };
    let gamma_full_patterns = match &parallel_summary {
        Some(s) => full_pattern_gammas(s, thermal)
            .into_iter()
            .map(|(pattern, gamma)| GammaDiagnostic { pattern, gamma })
            .collect(),
        None => Vec::new(),
    };

    Ok(EvaluatorReport {
        f_parallel,
        f_ghz,
        mu_mhz: crate::units::rad_to_mhz(system.mu()),
        max_abs_alpha,
        max_abs_delta_chi,
        alpha_residuals,
        pair_chi,
        gamma_full_patterns,
    })
}

/// Labels of the six pair slots, for reports and messages.
pub fn pair_label(slot: usize) -> &'static str {
    PAIR_LABELS[slot]
}
