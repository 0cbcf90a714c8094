//! File formats: request and solution JSON, trajectory, truth-table and
//! parity CSV, circuit JSON, and atomic writes.
//!
//! Config files use MHz for frequencies, kHz for Rabi frequencies, µs for
//! times, units of π for angles and 1-based ion and qubit numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{AmplitudeVector, DriveChannel, TrajectoryPoint};
use crate::optimizer::{
    Detuning, GateRequest, PairTarget, PenaltyWeights, SolveResult, Tolerances, DEFAULT_MAX_ITERATIONS,
    DEFAULT_PENALTY_ROUNDS,
};
use crate::sim::{Circuit, Gate, ParityScan, StateVector, TruthTable};
use crate::units::{khz_to_rad, mhz_to_rad, rad_to_khz, rad_to_mhz, s_to_us, us_to_s};

pub const DEFAULT_POWER_CAP_KHZ: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl ScanSpec {
    /// Uniform grid including both ends.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.steps == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidParameter("empty detuning scan".into()));
        }
        if self.steps == 1 {
            return Ok(vec![self.start]);
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        Ok((0..self.steps).map(|k| self.start + h * k as f64).collect())
    }

    /// Parses "start:stop:steps".
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::InvalidParameter(format!("scan {:?} is not start:stop:steps", text));
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(Self {
            start: parts[0].trim().parse().map_err(|_| bad())?,
            stop: parts[1].trim().parse().map_err(|_| bad())?,
            steps: parts[2].trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub w_alpha: f64,
    pub w_chi: f64,
    pub w_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    pub alpha: f64,
    pub chi: f64,
}

impl Default for TolerancesConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { alpha: t.alpha, chi: t.chi }
    }
}

fn default_power_cap() -> f64 {
    DEFAULT_POWER_CAP_KHZ
}
fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}
fn default_penalty_rounds() -> usize {
    DEFAULT_PENALTY_ROUNDS
}

/// Request document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestConfig {
    pub pairs: Vec<[usize; 2]>,
    pub chi_targets: Vec<f64>,
    pub tau_us: f64,
    pub n_segments: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_scan_mhz: Option<ScanSpec>,
    #[serde(default = "default_power_cap")]
    pub power_cap_rabi_khz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsConfig>,
    #[serde(default)]
    pub tolerances: TolerancesConfig,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_penalty_rounds")]
    pub penalty_rounds: usize,
    #[serde(default)]
    pub restarts: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub crosstalk_blacklist: Vec<[usize; 2]>,
    #[serde(default)]
    pub per_ion_amplitudes: bool,
}

fn zero_based(ion: usize) -> Result<usize> {
    ion.checked_sub(1).ok_or_else(|| Error::InvalidParameter("ion numbers start at 1".into()))
}

impl RequestConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }

    /// Resolves the document; `n_ions` bounds the ion numbers.
    pub fn to_request(&self, n_ions: usize) -> Result<GateRequest> {
        if self.pairs.len() != self.chi_targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} pairs but {} chi targets",
                self.pairs.len(),
                self.chi_targets.len()
            )));
        }
        let check = |ion: usize| -> Result<usize> {
            let i = zero_based(ion)?;
            if i >= n_ions {
                Err(Error::IndexOutOfRange { index: ion, size: n_ions })
            } else {
                Ok(i)
            }
        };
        let pairs = self
            .pairs
            .iter()
            .zip(&self.chi_targets)
            .map(|(p, &chi)| {
                if p[0] == p[1] {
                    return Err(Error::DuplicateIon(p[0]));
                }
                Ok(PairTarget { ions: (check(p[0])?, check(p[1])?), chi: chi * std::f64::consts::PI })
            })
            .collect::<Result<Vec<_>>>()?;
        let detuning = match (&self.mu_mhz, &self.mu_scan_mhz) {
            (Some(mu), None) => Detuning::Fixed(mhz_to_rad(*mu)),
            (None, Some(scan)) => Detuning::Scan(scan.grid()?.into_iter().map(mhz_to_rad).collect()),
            (Some(_), Some(_)) => return Err(Error::InvalidParameter("give mu_mhz or mu_scan_mhz, not both".into())),
            (None, None) => return Err(Error::InvalidParameter("request needs mu_mhz or mu_scan_mhz".into())),
        };
        let mut req = GateRequest::new(
            pairs,
            us_to_s(self.tau_us),
            self.n_segments,
            detuning,
            khz_to_rad(self.power_cap_rabi_khz),
        )?;
        req.tolerances = Tolerances { alpha: self.tolerances.alpha, chi: self.tolerances.chi };
        req.max_iterations = self.max_iterations;
        req.penalty_rounds = self.penalty_rounds;
        req.restarts = self.restarts;
        req.per_ion_amplitudes = self.per_ion_amplitudes;
        req.crosstalk_blacklist =
            self.crosstalk_blacklist.iter().map(|p| Ok((check(p[0])?, check(p[1])?))).collect::<Result<Vec<_>>>()?;
        req.validate()?;
        Ok(req)
    }

    pub fn weights_for(&self, request: &GateRequest) -> Result<PenaltyWeights> {
        match self.weights {
            Some(w) => PenaltyWeights::new(w.w_alpha, w.w_chi, w.w_power),
            None => Ok(PenaltyWeights::default_for(request)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelOut {
    /// 1-based ions sharing this pulse.
    pub ions: Vec<usize>,
    pub amplitudes_khz: Vec<f64>,
}

/// Solution document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub mu_mhz: f64,
    pub tau_us: f64,
    pub n_segments: usize,
    pub pairs: Vec<[usize; 2]>,
    pub chi_targets: Vec<f64>,
    pub channels: Vec<ChannelOut>,
    pub converged: bool,
    pub residual_alpha: f64,
    pub residual_chi: f64,
    pub predicted_fidelity: Option<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub penalty_rounds_used: usize,
    pub weights: WeightsConfig,
    pub max_rabi_khz: f64,
    pub request: RequestConfig,
}

impl SolutionFile {
    pub fn from_result(result: &SolveResult, request: &RequestConfig) -> Self {
        let grid_n = result.solution.n_segments();
        Self {
            mu_mhz: rad_to_mhz(result.mu),
            tau_us: request.tau_us,
            n_segments: grid_n,
            pairs: result.pairs.iter().map(|p| [p.ions.0 + 1, p.ions.1 + 1]).collect(),
            chi_targets: result.pairs.iter().map(|p| p.chi / std::f64::consts::PI).collect(),
            channels: result
                .solution
                .channels()
                .iter()
                .map(|c| ChannelOut {
                    ions: c.ions.iter().map(|i| i + 1).collect(),
                    amplitudes_khz: c.amplitudes.iter().map(|&w| rad_to_khz(w)).collect(),
                })
                .collect(),
            converged: result.converged,
            residual_alpha: result.residual_alpha,
            residual_chi: result.residual_chi,
            predicted_fidelity: result.predicted_fidelity,
            objective_value: result.objective_value,
            iterations: result.iterations,
            penalty_rounds_used: result.penalty_rounds_used,
            weights: WeightsConfig {
                w_alpha: result.weights.w_alpha,
                w_chi: result.weights.w_chi,
                w_power: result.weights.w_power,
            },
            max_rabi_khz: rad_to_khz(result.solution.max_abs()),
            request: request.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn amplitudes(&self) -> Result<AmplitudeVector> {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                if c.amplitudes_khz.len() != self.n_segments {
                    return Err(Error::DimensionMismatch(format!(
                        "channel has {} amplitudes, expected {}",
                        c.amplitudes_khz.len(),
                        self.n_segments
                    )));
                }
                Ok(DriveChannel {
                    ions: c.ions.iter().map(|&i| zero_based(i)).collect::<Result<Vec<_>>>()?,
                    amplitudes: c.amplitudes_khz.iter().map(|&k| khz_to_rad(k)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        AmplitudeVector::new(channels)
    }

    /// Entangling targets as (ion_a, ion_b, χ) with 0-based ions and χ in rad.
    pub fn targets(&self) -> Result<Vec<(usize, usize, f64)>> {
        if self.pairs.len() != self.chi_targets.len() {
            return Err(Error::DimensionMismatch("pairs and chi_targets differ in length".into()));
        }
        self.pairs
            .iter()
            .zip(&self.chi_targets)
            .map(|(p, &c)| Ok((zero_based(p[0])?, zero_based(p[1])?, c * std::f64::consts::PI)))
            .collect()
    }
}

/// Serializes with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name =
        path.file_name().ok_or_else(|| Error::InvalidParameter(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        fs::write(&tmp, contents)?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

pub fn trajectory_csv(points: &[TrajectoryPoint]) -> String {
    let mut out = String::from("t_us,re_alpha,im_alpha\n");
    for p in points {
        let _ = writeln!(out, "{:.9},{:.12e},{:.12e}", s_to_us(p.t), p.alpha.re, p.alpha.im);
    }
    out
}

pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits).map(|q| if (index >> (n_qubits - 1 - q)) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Rows are inputs, columns every output bitstring, 12 decimals.
pub fn truth_table_csv(table: &TruthTable) -> String {
    let n = table.n_qubits;
    let mut out = String::from("input");
    for j in 0..1 << n {
        let _ = write!(out, ",{}", bitstring(j, n));
    }
    out.push('\n');
    for (input, row) in table.inputs.iter().zip(&table.probabilities) {
        out.push_str(&bitstring(*input, n));
        for p in row {
            // Keep "-0.000000000000" out of the file.
            let _ = write!(out, ",{:.12}", p.max(0.0));
        }
        out.push('\n');
    }
    out
}

pub fn parity_csv(scan: &ParityScan) -> String {
    let mut out = String::from("phi,parity\n");
    for (phi, p) in scan.phases.iter().zip(&scan.parities) {
        let _ = writeln!(out, "{:.12},{:.12}", phi, p);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityFitOut {
    pub chi_pi: f64,
    pub n_points: usize,
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub rho00: f64,
    pub rho33: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeOut {
    pub basis: String,
    pub re: f64,
    pub im: f64,
    pub probability: f64,
}

/// Nonzero amplitudes of a state, qubit 1 leftmost.
pub fn state_entries(state: &StateVector, threshold: f64) -> Vec<AmplitudeOut> {
    let n = state.n_qubits();
    state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > threshold)
        .map(|(i, a): (usize, &Complex64)| AmplitudeOut {
            basis: bitstring(i, n),
            re: clean(a.re),
            im: clean(a.im),
            probability: clean(a.norm_sqr()),
        })
        .collect()
}

/// Rounds away last-bit noise so outputs are stable and readable.
fn clean(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// One gate in a circuit document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", deny_unknown_fields)]
pub enum GateSpec {
    R {
        qubit: usize,
        theta_pi: f64,
        phi_pi: f64,
        #[serde(default)]
        parallel: bool,
    },
    Rz {
        qubit: usize,
        theta_pi: f64,
        #[serde(default)]
        parallel: bool,
    },
    XX {
        qubits: [usize; 2],
        chi_pi: f64,
        #[serde(default)]
        parallel: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircuitDoc {
    Gates(Vec<GateSpec>),
    Full { n_qubits: usize, gates: Vec<GateSpec> },
}

impl CircuitDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }

    /// Builds the circuit; `parallel: true` joins the previous gate's layer.
    pub fn to_circuit(&self) -> Result<Circuit> {
        use std::f64::consts::PI;
        let (n, gates) = match self {
            CircuitDoc::Gates(g) => {
                let max = g
                    .iter()
                    .flat_map(|s| match s {
                        GateSpec::R { qubit, .. } | GateSpec::Rz { qubit, .. } => vec![*qubit],
                        GateSpec::XX { qubits, .. } => qubits.to_vec(),
                    })
                    .max()
                    .ok_or_else(|| Error::Malformed("empty circuit".into()))?;
                (max, g)
            }
            CircuitDoc::Full { n_qubits, gates } => (*n_qubits, gates),
        };
        let mut c = Circuit::new(n);
        for spec in gates {
            let (gate, parallel) = match *spec {
                GateSpec::R { qubit, theta_pi, phi_pi, parallel } => {
                    (Gate::R { qubit: zero_based(qubit)?, theta: theta_pi * PI, phi: phi_pi * PI }, parallel)
                }
                GateSpec::Rz { qubit, theta_pi, parallel } => {
                    (Gate::Rz { qubit: zero_based(qubit)?, theta: theta_pi * PI }, parallel)
                }
                GateSpec::XX { qubits, chi_pi, parallel } => {
                    (Gate::XX { a: zero_based(qubits[0])?, b: zero_based(qubits[1])?, chi: chi_pi * PI }, parallel)
                }
            };
            if parallel {
                c.push_parallel(gate)?;
            } else {
                c.push(gate)?;
            }
        }
        Ok(c)
    }

    pub fn from_circuit(circuit: &Circuit) -> Self {
        use std::f64::consts::PI;
        let mut prev = None;
        let gates = circuit
            .gates()
            .iter()
            .zip(circuit.layers())
            .map(|(g, &l)| {
                let parallel = prev == Some(l);
                prev = Some(l);
                match *g {
                    Gate::R { qubit, theta, phi } => {
                        GateSpec::R { qubit: qubit + 1, theta_pi: theta / PI, phi_pi: phi / PI, parallel }
                    }
                    Gate::Rz { qubit, theta } => GateSpec::Rz { qubit: qubit + 1, theta_pi: theta / PI, parallel },
                    Gate::XX { a, b, chi } => GateSpec::XX { qubits: [a + 1, b + 1], chi_pi: chi / PI, parallel },
                }
            })
            .collect();
        CircuitDoc::Full { n_qubits: circuit.n_qubits(), gates }
    }
}
