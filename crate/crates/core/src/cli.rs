//! Command-line pipeline: solve, evaluate, simulate.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain::{load_chain, ChainConfig, ChainSpec};
use crate::error::Error;
use crate::evaluator::{build_report, EvaluatorReport, ThermalSpec};
use crate::io::{
    parity_csv, state_entries, to_json_pretty, trajectory_csv, truth_table_csv, write_atomic, CircuitDoc, ParityFitOut,
    RequestConfig, ScanSpec, SolutionFile,
};
use crate::kernel::{build_system, trajectory, SegmentGrid};
use crate::optimizer::{solve, solve_scan, Detuning, GateRequest, SolveResult};
use crate::sim::{
    fidelity_from_parity, parity_scan, run_adder, run_ghz, run_parallel_cnots, AdderVariant, Analysis, StateVector,
    TruthTable,
};
use crate::units::{rad_to_khz, rad_to_mhz, us_to_s};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNCONVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Samples per phase-space trajectory file.
const TRAJECTORY_SAMPLES: usize = 241;

#[derive(Debug, Parser)]
#[command(name = "pargate", version, about = "Parallel XX gate pulse design and verification")]
pub struct Cli {
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a gate request and write solution, report and trajectories.
    Solve {
        /// Chain JSON; the five-ion reference chain if omitted.
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long)]
        request: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Detuning scan "start:stop:steps" in MHz, replacing the request's μ.
        #[arg(long)]
        mu_scan: Option<String>,
    },
    /// Recompute the evaluator report of a stored solution.
    Evaluate {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        chain: Option<PathBuf>,
        /// Report file; the manifest goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a circuit file or a builtin circuit.
    Simulate {
        #[arg(long, conflicts_with = "builtin")]
        circuit: Option<PathBuf>,
        /// parallel-cnots | adder-feynman | adder-optimized | ghz | parity:<chi/π>[:<points>]
        #[arg(long)]
        builtin: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Record of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
}

/// A failed command: exit code and cause. A manifest is attached when the
/// outputs were written before the failure was detected.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
    pub manifest: Option<Box<RunManifest>>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::Io(_) => EXIT_IO,
            Error::Unconverged(_) => EXIT_UNCONVERGED,
            _ => EXIT_CONFIG,
        };
        Failure { code, error, manifest: None }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

type CmdResult = std::result::Result<RunManifest, Failure>;
type Trajectories = Vec<(usize, usize, String)>;

fn read(path: &Path) -> crate::Result<String> {
    fs::read_to_string(path).map_err(Error::from)
}

/// Output sink that records every file it writes.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> crate::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, rel: &str, contents: &str) -> crate::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_atomic(&path, contents.as_bytes())?;
        self.written.push(path);
        Ok(())
    }

    fn finish(mut self, command: &str, config: Value, seed: Option<u64>, start: Instant) -> crate::Result<RunManifest> {
        let mut manifest = RunManifest {
            command: command.into(),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            outputs: self.written.clone(),
            wall_clock_s: start.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        manifest.outputs.push(path.clone());
        write_atomic(&path, to_json_pretty(&manifest)?.as_bytes())?;
        self.written.push(path);
        Ok(manifest)
    }
}

fn load_chain_file(path: Option<&Path>) -> crate::Result<(ChainConfig, ChainSpec)> {
    let config = match path {
        Some(p) => ChainConfig::from_json(&read(p)?)?,
        None => ChainConfig::five_ion_reference(),
    };
    let spec = load_chain(&config)?;
    Ok((config, spec))
}

fn report_for(
    chain: &ChainSpec,
    request: &GateRequest,
    result: &SolveResult,
) -> crate::Result<(EvaluatorReport, Trajectories)> {
    let ions = request.involved_ions();
    let system = build_system(chain, &ions, result.mu, request.grid()?)?;
    let targets: Vec<_> = request.pairs.iter().map(|p| (p.ions.0, p.ions.1, p.chi)).collect();
    let thermal = ThermalSpec::from_nbar(chain.nbar())?;
    let report = build_report(&system, &result.solution, &targets, &thermal, false)?;
    let mut trajectories = Vec::new();
    for &ion in &ions {
        for mode in 0..chain.n_modes() {
            let pts = trajectory(&system, &result.solution, ion, mode, TRAJECTORY_SAMPLES)?;
            trajectories.push((ion, mode, trajectory_csv(&pts)));
        }
    }
    Ok((report, trajectories))
}

#[derive(Serialize)]
struct ScanRow {
    mu_mhz: f64,
    converged: Option<bool>,
    predicted_fidelity: Option<f64>,
    max_rabi_khz: Option<f64>,
    error: Option<String>,
}

pub fn cmd_solve(
    chain_file: Option<&Path>,
    request_file: &Path,
    out_dir: &Path,
    seed: u64,
    mu_scan: Option<&str>,
    verbose: bool,
) -> CmdResult {
    let start = Instant::now();
    let (chain_config, chain) = load_chain_file(chain_file)?;
    let mut request_config = RequestConfig::from_json(&read(request_file)?)?;
    if let Some(scan) = mu_scan {
        request_config.mu_mhz = None;
        request_config.mu_scan_mhz = Some(ScanSpec::parse(scan)?);
    }
    let request = request_config.to_request(chain.n_ions())?;
    let weights = request_config.weights_for(&request)?;
    let mut out = Outputs::new(out_dir)?;

    let result = match &request.detuning {
        Detuning::Fixed(_) => solve(&chain, &request, &weights, seed)?,
        Detuning::Scan(_) => {
            let entries = solve_scan(&chain, &request, &weights, seed)?;
            let mut rows: Vec<ScanRow> = entries
                .iter()
                .map(|e| match &e.result {
                    Ok(r) => ScanRow {
                        mu_mhz: rad_to_mhz(e.mu),
                        converged: Some(r.converged),
                        predicted_fidelity: r.predicted_fidelity,
                        max_rabi_khz: Some(rad_to_khz(r.solution.max_abs())),
                        error: None,
                    },
                    Err(err) => ScanRow {
                        mu_mhz: rad_to_mhz(e.mu),
                        converged: None,
                        predicted_fidelity: None,
                        max_rabi_khz: None,
                        error: Some(err.to_string()),
                    },
                })
                .collect();
            rows.sort_by(|a, b| a.mu_mhz.total_cmp(&b.mu_mhz));
            out.write("scan.json", &to_json_pretty(&rows)?)?;
            let mut best = None;
            let mut first_err = None;
            for e in entries {
                match e.result {
                    Ok(r) if best.is_none() => best = Some(r),
                    Err(err) if first_err.is_none() => first_err = Some(err),
                    _ => {}
                }
            }
            match (best, first_err) {
                (Some(r), _) => r,
                (None, Some(err)) => return Err(err.into()),
                (None, None) => return Err(Error::InvalidParameter("empty detuning scan".into()).into()),
            }
        }
    };
    if verbose {
        eprintln!(
            "μ = {:.6} MHz, converged = {}, max|α| = {:.2e}, max|Δχ| = {:.2e}, F = {:?}",
            rad_to_mhz(result.mu),
            result.converged,
            result.residual_alpha,
            result.residual_chi,
            result.predicted_fidelity
        );
    }

    let solution = SolutionFile::from_result(&result, &request_config);
    out.write("solution.json", &to_json_pretty(&solution)?)?;
    let (report, trajectories) = report_for(&chain, &request, &result)?;
    out.write("report.json", &to_json_pretty(&report)?)?;
    for (ion, mode, csv) in trajectories {
        out.write(&format!("trajectories/ion{}_mode{}.csv", ion + 1, mode + 1), &csv)?;
    }
    let config = json!({ "chain": chain_config, "request": request_config });
    let manifest = out.finish("solve", config, Some(seed), start)?;
    if !result.converged {
        return Err(Failure {
            code: EXIT_UNCONVERGED,
            error: Error::Unconverged(format!(
                "max|α| = {:e}, max|Δχ| = {:e} after {} iterations",
                result.residual_alpha, result.residual_chi, result.iterations
            )),
            manifest: Some(Box::new(manifest)),
        });
    }
    Ok(manifest)
}

/// Recomputes α and χ from the stored amplitudes.
pub fn evaluate_solution(chain: &ChainSpec, solution: &SolutionFile) -> crate::Result<EvaluatorReport> {
    let amps = solution.amplitudes()?;
    let targets = solution.targets()?;
    let ions: Vec<usize> = amps.channels().iter().flat_map(|c| c.ions.iter().copied()).collect();
    for &ion in &ions {
        if ion >= chain.n_ions() {
            return Err(Error::DimensionMismatch(format!(
                "solution drives ion {} but the chain has {} ions",
                ion + 1,
                chain.n_ions()
            )));
        }
    }
    let grid = SegmentGrid::new(us_to_s(solution.tau_us), solution.n_segments)?;
    let system = build_system(chain, &ions, crate::units::mhz_to_rad(solution.mu_mhz), grid)?;
    let thermal = ThermalSpec::from_nbar(chain.nbar())?;
    build_report(&system, &amps, &targets, &thermal, false)
}

pub fn cmd_evaluate(solution_file: &Path, chain_file: Option<&Path>, out_file: &Path) -> CmdResult {
    let start = Instant::now();
    let (chain_config, chain) = load_chain_file(chain_file)?;
    let solution = SolutionFile::from_json(&read(solution_file)?)?;
    let report = evaluate_solution(&chain, &solution)?;
    let dir = match out_file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = out_file
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", out_file.display())))?
        .to_string_lossy()
        .into_owned();
    let mut out = Outputs::new(&dir)?;
    out.write(&name, &to_json_pretty(&report)?)?;
    let config = json!({ "chain": chain_config, "solution": solution_file });
    Ok(out.finish("evaluate", config, None, start)?)
}

#[derive(Serialize)]
struct TableSummary<'a> {
    circuit: &'a str,
    /// Mean probability of the classically expected output over all inputs.
    mean_correct_output_probability: f64,
    two_qubit_depth: usize,
}

#[derive(Serialize)]
struct StateOut {
    circuit: String,
    n_qubits: usize,
    amplitudes: Vec<crate::io::AmplitudeOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unitary_deviation: Option<f64>,
}

fn parse_parity(spec: &str) -> crate::Result<(f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidParameter(format!("builtin {:?} is not parity:<chi/π>[:<points>]", spec));
    match parts.as_slice() {
        ["parity", chi] => Ok((chi.parse().map_err(|_| bad())?, 24)),
        ["parity", chi, n] => Ok((chi.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn write_table(out: &mut Outputs, name: &str, table: &TruthTable, depth: usize) -> crate::Result<()> {
    out.write("truth_table.csv", &truth_table_csv(table))?;
    let summary =
        TableSummary { circuit: name, mean_correct_output_probability: table.fidelity()?, two_qubit_depth: depth };
    out.write("summary.json", &to_json_pretty(&summary)?)
}

pub fn cmd_simulate(circuit_file: Option<&Path>, builtin: Option<&str>, out_dir: &Path) -> CmdResult {
    let start = Instant::now();
    let (config, out) = match (circuit_file, builtin) {
        (Some(path), None) => {
            let doc = CircuitDoc::from_json(&read(path)?)?;
            let circuit = doc.to_circuit()?;
            let mut out = Outputs::new(out_dir)?;
            let mut state = StateVector::zero(circuit.n_qubits());
            circuit.run(&mut state)?;
            let s = StateOut {
                circuit: path.display().to_string(),
                n_qubits: circuit.n_qubits(),
                amplitudes: state_entries(&state, 1e-12),
                unitary_deviation: None,
            };
            out.write("state.json", &to_json_pretty(&s)?)?;
            let inputs: Vec<usize> = (0..1 << circuit.n_qubits()).collect();
            let expected = inputs
                .iter()
                .map(|&i| {
                    let mut s = StateVector::basis(circuit.n_qubits(), i);
                    circuit.run(&mut s).map(|_| {
                        let p = s.probabilities();
                        (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0)
                    })
                })
                .collect::<crate::Result<Vec<_>>>()?;
            let table = TruthTable::from_circuit(&circuit, inputs, expected)?;
            out.write("truth_table.csv", &truth_table_csv(&table))?;
            (json!({ "circuit": doc }), out)
        }
        (None, Some(name)) => {
            let mut out = Outputs::new(out_dir)?;
            match name {
                "parallel-cnots" => {
                    let depth = crate::sim::parallel_cnots_circuit()?.two_qubit_depth();
                    write_table(&mut out, name, &run_parallel_cnots()?, depth)?;
                }
                "adder-feynman" => {
                    let depth = crate::sim::feynman_adder()?.two_qubit_depth();
                    write_table(&mut out, name, &run_adder(AdderVariant::Feynman)?, depth)?;
                }
                "adder-optimized" => {
                    let depth = crate::sim::optimized_adder()?.two_qubit_depth();
                    write_table(&mut out, name, &run_adder(AdderVariant::Optimized)?, depth)?;
                }
                "ghz" => {
                    let run = run_ghz()?;
                    let s = StateOut {
                        circuit: name.into(),
                        n_qubits: 4,
                        amplitudes: state_entries(&run.state, 1e-12),
                        unitary_deviation: Some(run.unitary_deviation),
                    };
                    out.write("state.json", &to_json_pretty(&s)?)?;
                }
                other if other.starts_with("parity") => {
                    let (chi_pi, n) = parse_parity(other)?;
                    let chi = chi_pi * std::f64::consts::PI;
                    let scan = parity_scan(chi, n, Analysis::Plain)?;
                    out.write("parity.csv", &parity_csv(&scan))?;
                    let fit = ParityFitOut {
                        chi_pi,
                        n_points: n,
                        offset: scan.fit.offset,
                        amplitude: scan.fit.amplitude,
                        phase: scan.fit.phase,
                        rho00: scan.rho00,
                        rho33: scan.rho33,
                        fidelity: fidelity_from_parity(scan.rho00, scan.rho33, scan.fit.amplitude, chi)?,
                    };
                    out.write("parity_fit.json", &to_json_pretty(&fit)?)?;
                }
                other => return Err(Error::InvalidParameter(format!("unknown builtin {:?}", other)).into()),
            }
            (json!({ "builtin": name }), out)
        }
        _ => return Err(Error::InvalidParameter("give exactly one of --circuit or --builtin".into()).into()),
    };
    Ok(out.finish("simulate", config, None, start)?)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Solve { chain, request, out, seed, mu_scan } => {
            cmd_solve(chain.as_deref(), request, out, *seed, mu_scan.as_deref(), cli.verbose)
        }
        Command::Evaluate { solution, chain, out } => cmd_evaluate(solution, chain.as_deref(), out),
        Command::Simulate { circuit, builtin, out } => cmd_simulate(circuit.as_deref(), builtin.as_deref(), out),
    };
    match outcome {
        Ok(manifest) => {
            if cli.verbose {
                for p in &manifest.outputs {
                    eprintln!("wrote {}", p.display());
                }
            }
            0
        }
        Err(failure) => {
            eprintln!("error: {}", failure);
            failure.code
        }
    }
}
