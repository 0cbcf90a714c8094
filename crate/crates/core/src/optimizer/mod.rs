//! Penalty-method pulse optimizer.
//!
//! Minimizes
//!
//! ```text
//! w_α Σ_{i,k} |α_{i,k}|² + w_χ Σ_{a<b} (χ_ab − χ_ab^target)² + w_P Σ Ω_s²
//! ```
//!
//! over the segment amplitudes of every drive channel. The χ sum runs over all
//! pairs of involved ions: requested pairs target their angle, every other
//! pair (crosstalk) targets 0 unless blacklisted.

pub mod bfgs;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::evaluator::{parallel_fidelity, InteractionSummary, ThermalSpec};
use crate::kernel::{alpha_of, build_system, chi_of, AmplitudeVector, ConstraintSystem, DriveChannel, SegmentGrid};
use bfgs::{BfgsOptions, StopReason};

/// One entangling pair (0-based chain ions) and its target angle (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTarget {
    pub ions: (usize, usize),
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Detuning {
    Fixed(f64),
    Scan(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub alpha: f64,
    pub chi: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { alpha: 1e-6, chi: 1e-6 }
    }
}

/// What to solve for. Angles in rad, times in s, frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRequest {
    pub pairs: Vec<PairTarget>,
    pub tau: f64,
    pub n_segments: usize,
    pub detuning: Detuning,
    /// Maximum |Ω_s| (rad/s).
    pub power_cap: f64,
    pub tolerances: Tolerances,
    pub max_iterations: usize,
    /// Extra solves with w_α and w_χ multiplied by 10 each, run only while
    /// the residuals exceed the tolerances. 0 = one fixed-weight solve.
    pub penalty_rounds: usize,
    /// Randomly perturbed restarts on top of the default initial guess.
    pub restarts: usize,
    /// Ion pairs left out of the crosstalk terms.
    pub crosstalk_blacklist: Vec<(usize, usize)>,
    /// Give every ion its own amplitude vector instead of one per pair.
    pub per_ion_amplitudes: bool,
}

pub const DEFAULT_MAX_ITERATIONS: usize = 5000;
pub const DEFAULT_PENALTY_ROUNDS: usize = 3;

impl GateRequest {
    pub fn new(
        pairs: Vec<PairTarget>,
        tau: f64,
        n_segments: usize,
        detuning: Detuning,
        power_cap: f64,
    ) -> Result<Self> {
        let req = Self {
            pairs,
            tau,
            n_segments,
            detuning,
            power_cap,
            tolerances: Tolerances::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            penalty_rounds: DEFAULT_PENALTY_ROUNDS,
            restarts: 0,
            crosstalk_blacklist: Vec::new(),
            per_ion_amplitudes: false,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::InvalidParameter("request has no pairs".into()));
        }
        let ions = self.involved_ions();
        for (x, &ion) in ions.iter().enumerate() {
            if ions[..x].contains(&ion) {
                return Err(Error::DuplicateIon(ion));
            }
        }
        if self.pairs.iter().any(|p| !p.chi.is_finite()) {
            return Err(Error::InvalidParameter("χ targets must be finite".into()));
        }
        if self.tau <= 0.0 || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("gate time must be positive, got {}", self.tau)));
        }
        if self.n_segments == 0 {
            return Err(Error::InvalidParameter("need at least one segment".into()));
        }
        if self.power_cap.is_nan() || self.power_cap <= 0.0 {
            return Err(Error::InvalidParameter("power cap must be positive".into()));
        }
        match &self.detuning {
            Detuning::Fixed(mu) if !mu.is_finite() => {
                return Err(Error::InvalidParameter("detuning must be finite".into()))
            }
            Detuning::Scan(grid) if grid.is_empty() => {
                return Err(Error::InvalidParameter("empty detuning scan".into()))
            }
            Detuning::Scan(grid) if grid.iter().any(|m| !m.is_finite()) => {
                return Err(Error::InvalidParameter("detuning must be finite".into()))
            }
            _ => {}
        }
        if !(self.tolerances.alpha > 0.0 && self.tolerances.chi > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Ions in pair order: (a₀, b₀, a₁, b₁, ...).
    pub fn involved_ions(&self) -> Vec<usize> {
        self.pairs.iter().flat_map(|p| [p.ions.0, p.ions.1]).collect()
    }

    pub fn mus(&self) -> Vec<f64> {
        match &self.detuning {
            Detuning::Fixed(mu) => vec![*mu],
            Detuning::Scan(grid) => grid.clone(),
        }
    }

    /// Copy with a single fixed detuning.
    pub fn at_mu(&self, mu: f64) -> Self {
        Self { detuning: Detuning::Fixed(mu), ..self.clone() }
    }

    pub fn grid(&self) -> Result<SegmentGrid> {
        SegmentGrid::new(self.tau, self.n_segments)
    }

    fn blacklisted(&self, a: usize, b: usize) -> bool {
        self.crosstalk_blacklist.iter().any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// Target for an ion pair: its requested angle, 0 for crosstalk, None if blacklisted.
    pub fn target_for(&self, a: usize, b: usize) -> Option<f64> {
        if let Some(p) = self.pairs.iter().find(|p| p.ions == (a, b) || p.ions == (b, a)) {
            return Some(p.chi);
        }
        if self.blacklisted(a, b) {
            None
        } else {
            Some(0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights {
    pub w_alpha: f64,
    pub w_chi: f64,
    pub w_power: f64,
}

impl PenaltyWeights {
    pub fn new(w_alpha: f64, w_chi: f64, w_power: f64) -> Result<Self> {
        if !(w_alpha > 0.0 && w_chi > 0.0 && w_power >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weights need w_alpha > 0, w_chi > 0, w_power >= 0; got {}, {}, {}",
                w_alpha, w_chi, w_power
            )));
        }
        Ok(Self { w_alpha, w_chi, w_power })
    }

    /// w_α = 1, w_χ = 10, w_P = 1e-6 (π/4)² / (Ω_cap² S).
    pub fn default_for(request: &GateRequest) -> Self {
        let q = PI / 4.0;
        Self {
            w_alpha: 1.0,
            w_chi: 10.0,
            w_power: 1e-6 * q * q / (request.power_cap * request.power_cap * request.n_segments as f64),
        }
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: AmplitudeVector,
    pub pairs: Vec<PairTarget>,
    pub mu: f64,
    /// max |α_{i,k}| over involved ions and modes.
    pub residual_alpha: f64,
    /// max |χ − target| over non-blacklisted ion pairs.
    pub residual_chi: f64,
    /// F‖ for one or two pairs, None otherwise.
    pub predicted_fidelity: Option<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Σ Ω_s² over channels (rad²/s²).
    pub power: f64,
    /// Weights of the last penalty round.
    pub weights: PenaltyWeights,
    pub penalty_rounds_used: usize,
}

/// Precomputed pieces of the objective for a fixed channel layout.
struct Objective<'a> {
    system: &'a ConstraintSystem,
    n_segments: usize,
    /// Channel of each involved ion (system order).
    channel: Vec<usize>,
    /// (ion position a, ion position b, D + Dᵀ, target).
    chi_terms: Vec<(usize, usize, DMatrix<f64>, f64)>,
    weights: PenaltyWeights,
}

impl<'a> Objective<'a> {
    fn new(
        system: &'a ConstraintSystem,
        request: &GateRequest,
        layout: &AmplitudeVector,
        weights: PenaltyWeights,
    ) -> Result<Self> {
        let ions = system.ions();
        let channel =
            ions.iter().map(|&i| layout.channel_of(i).ok_or(Error::IonNotInvolved(i))).collect::<Result<Vec<_>>>()?;
        let mut chi_terms = Vec::new();
        for (a, &i) in ions.iter().enumerate() {
            for (b, &j) in ions.iter().enumerate().skip(a + 1) {
                if let Some(target) = request.target_for(i, j) {
                    let d = system.d_mat(i, j)?;
                    chi_terms.push((a, b, d + d.transpose(), target));
                }
            }
        }
        Ok(Self { system, n_segments: layout.n_segments(), channel, chi_terms, weights })
    }

    fn pulse<'x>(&self, x: &'x [f64], ion_pos: usize) -> &'x [f64] {
        let c = self.channel[ion_pos];
        &x[c * self.n_segments..(c + 1) * self.n_segments]
    }

    /// Value and gradient with respect to the flat amplitudes (rad/s).
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let s_count = self.n_segments;
        let w = self.weights;
        let mut grad = vec![0.0; x.len()];
        let mut value = 0.0;

        for (pos, &ion) in self.system.ions().iter().enumerate() {
            let c = self.system.c_mat(ion).expect("ion in system");
            let pulse = self.pulse(x, pos);
            let off = self.channel[pos] * s_count;
            for k in 0..c.ncols() {
                let mut alpha = Complex64::new(0.0, 0.0);
                for s in 0..s_count {
                    alpha += c[(s, k)] * pulse[s];
                }
                value += w.w_alpha * alpha.norm_sqr();
                let ac = alpha.conj();
                for s in 0..s_count {
                    grad[off + s] += 2.0 * w.w_alpha * (ac * c[(s, k)]).re;
                }
            }
        }

        let mut tmp = vec![0.0; s_count];
        for (a, b, dsym, target) in &self.chi_terms {
            let pa = self.pulse(x, *a);
            let pb = self.pulse(x, *b);
            // tmp = Dsym · pb
            for (r, t) in tmp.iter_mut().enumerate() {
                *t = (0..s_count).map(|s| dsym[(r, s)] * pb[s]).sum();
            }
            let chi: f64 = pa.iter().zip(&tmp).map(|(x, y)| x * y).sum();
            let dev = chi - target;
            value += w.w_chi * dev * dev;
            let scale = 2.0 * w.w_chi * dev;
            let off_a = self.channel[*a] * s_count;
            for s in 0..s_count {
                grad[off_a + s] += scale * tmp[s];
            }
            let off_b = self.channel[*b] * s_count;
            for s in 0..s_count {
                let dt_pa: f64 = (0..s_count).map(|r| dsym[(s, r)] * pa[r]).sum();
                grad[off_b + s] += scale * dt_pa;
            }
        }

        for (g, &v) in grad.iter_mut().zip(x) {
            value += w.w_power * v * v;
            *g += 2.0 * w.w_power * v;
        }
        (value, grad)
    }
}

/// Penalty objective and its analytic gradient (per flat amplitude, rad/s).
pub fn objective(
    system: &ConstraintSystem,
    request: &GateRequest,
    weights: &PenaltyWeights,
    amps: &AmplitudeVector,
) -> Result<(f64, Vec<f64>)> {
    if amps.n_segments() != system.grid().n_segments() {
        return Err(Error::DimensionMismatch("amplitudes do not match the grid".into()));
    }
    let obj = Objective::new(system, request, amps, *weights)?;
    Ok(obj.eval(&amps.flatten()))
}

/// Sign pattern of the default guess for channel `c`: all positive, then
/// halves, quarters, eighths, ...
fn guess_sign(c: usize, s: usize, n_segments: usize) -> f64 {
    if c == 0 {
        return 1.0;
    }
    let blocks = 1usize << c.min(20);
    let block = s * blocks / n_segments;
    if block.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Empty-amplitude layout for a request: one channel per pair, or per ion.
pub fn channel_layout(request: &GateRequest) -> Result<AmplitudeVector> {
    let s = request.n_segments;
    let channels = if request.per_ion_amplitudes {
        request.involved_ions().into_iter().map(|i| DriveChannel { ions: vec![i], amplitudes: vec![0.0; s] }).collect()
    } else {
        request
            .pairs
            .iter()
            .map(|p| DriveChannel { ions: vec![p.ions.0, p.ions.1], amplitudes: vec![0.0; s] })
            .collect()
    };
    AmplitudeVector::new(channels)
}

/// The default initial guess. Each pair's sign pattern is scaled so that
/// pair alone reaches |χ| = |target|; per-ion channels take their pair's guess.
pub fn initial_guess(system: &ConstraintSystem, request: &GateRequest) -> Result<AmplitudeVector> {
    let s_count = request.n_segments;
    let layout = channel_layout(request)?;
    let mut pair_pulses = Vec::with_capacity(request.pairs.len());
    let mut fallback = None;
    for (c, p) in request.pairs.iter().enumerate() {
        let shape: Vec<f64> = (0..s_count).map(|s| guess_sign(c, s, s_count)).collect();
        let d = system.d_mat(p.ions.0, p.ions.1)?;
        let q: f64 = crate::kernel::symmetric_form(d, &shape, &shape);
        let scale = if p.chi != 0.0 && q != 0.0 {
            let v = (p.chi.abs() / q.abs()).sqrt();
            fallback.get_or_insert(v);
            Some(v)
        } else {
            None
        };
        pair_pulses.push((shape, scale));
    }
    let fallback = fallback.ok_or_else(|| {
        Error::InvalidParameter("cannot scale the initial guess: all targets or kernels vanish".into())
    })?;
    let pulses: Vec<Vec<f64>> = pair_pulses
        .into_iter()
        .map(|(shape, scale)| {
            let v = scale.unwrap_or(fallback);
            shape.into_iter().map(|x| x * v).collect()
        })
        .collect();

    let mut channels = layout.channels().to_vec();
    for ch in &mut channels {
        let ion = ch.ions[0];
        let pair =
            request.pairs.iter().position(|p| p.ions.0 == ion || p.ions.1 == ion).expect("layout built from request");
        ch.amplitudes = pulses[pair].clone();
    }
    AmplitudeVector::new(channels)
}

/// Residuals recomputed from the kernel: (max |α|, max |Δχ|).
pub fn residuals(system: &ConstraintSystem, request: &GateRequest, amps: &AmplitudeVector) -> Result<(f64, f64)> {
    let mut ra = 0.0f64;
    for &ion in system.ions() {
        for k in 0..system.n_modes() {
            ra = ra.max(alpha_of(system, amps, ion, k)?.norm());
        }
    }
    let ions = system.ions();
    let mut rc = 0.0f64;
    for (a, &i) in ions.iter().enumerate() {
        for &j in &ions[a + 1..] {
            if let Some(t) = request.target_for(i, j) {
                rc = rc.max((chi_of(system, amps, (i, j))? - t).abs());
            }
        }
    }
    Ok((ra, rc))
}

/// F‖ of a solution: the four-ion expression for two pairs, the phantom-pair
/// embedding for one, None for more.
pub fn predicted_fidelity(
    system: &ConstraintSystem,
    request: &GateRequest,
    amps: &AmplitudeVector,
    thermal: &ThermalSpec,
) -> Result<Option<f64>> {
    let alpha =
        |ion| -> Result<Vec<Complex64>> { (0..system.n_modes()).map(|k| alpha_of(system, amps, ion, k)).collect() };
    let summary = match request.pairs.as_slice() {
        [p] => {
            InteractionSummary::single_pair(alpha(p.ions.0)?, alpha(p.ions.1)?, chi_of(system, amps, p.ions)?, p.chi)?
        }
        [p, q] => InteractionSummary::from_system(
            system,
            amps,
            [p.ions.0, p.ions.1, q.ions.0, q.ions.1],
            [p.chi, 0.0, 0.0, 0.0, 0.0, q.chi],
        )?,
        _ => return Ok(None),
    };
    parallel_fidelity(&summary, thermal).map(Some)
}

struct Attempt {
    amps: AmplitudeVector,
    value: f64,
    iterations: usize,
    weights: PenaltyWeights,
    rounds: usize,
    met: bool,
}

fn run_from(
    system: &ConstraintSystem,
    request: &GateRequest,
    weights: PenaltyWeights,
    start: &AmplitudeVector,
    scale: f64,
) -> Result<Attempt> {
    let opts = BfgsOptions { max_iterations: request.max_iterations, ..BfgsOptions::default() };
    let mut w = weights;
    let mut x: Vec<f64> = start.flatten().iter().map(|v| v / scale).collect();
    let mut iterations = 0;
    let mut rounds = 0;
    loop {
        let obj = Objective::new(system, request, start, w)?;
        let out = bfgs::minimize(
            |y: &[f64]| {
                let omega: Vec<f64> = y.iter().map(|v| v * scale).collect();
                let (f, g) = obj.eval(&omega);
                (f, g.into_iter().map(|v| v * scale).collect())
            },
            &x,
            &opts,
        );
        iterations += out.iterations;
        x = out.x;
        let amps = start.with_flat(&x.iter().map(|v| v * scale).collect::<Vec<_>>());
        let (ra, rc) = residuals(system, request, &amps)?;
        let met = ra < request.tolerances.alpha && rc < request.tolerances.chi;
        let budget_left = out.reason != StopReason::MaxIterations;
        if met || rounds >= request.penalty_rounds || !budget_left {
            let value = Objective::new(system, request, start, weights)?.eval(&amps.flatten()).0;
            return Ok(Attempt { amps, value, iterations, weights: w, rounds, met });
        }
        w.w_alpha *= 10.0;
        w.w_chi *= 10.0;
        rounds += 1;
    }
}

/// Solves at the request's single detuning.
pub fn solve(chain: &ChainSpec, request: &GateRequest, weights: &PenaltyWeights, seed: u64) -> Result<SolveResult> {
    request.validate()?;
    let mu = match &request.detuning {
        Detuning::Fixed(mu) => *mu,
        Detuning::Scan(grid) if grid.len() == 1 => grid[0],
        Detuning::Scan(_) => return Err(Error::InvalidParameter("solve takes one detuning; use solve_scan".into())),
    };
    let system = build_system(chain, &request.involved_ions(), mu, request.grid()?)?;
    let start = initial_guess(&system, request)?;
    let scale = start.max_abs();

    let mut best = run_from(&system, request, *weights, &start, scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..request.restarts {
        let flat: Vec<f64> =
            start.flatten().iter().map(|v| v * (1.0 + 0.3 * (rng.random::<f64>() * 2.0 - 1.0))).collect();
        let attempt = run_from(&system, request, *weights, &start.with_flat(&flat), scale)?;
        if (attempt.met, -attempt.value) > (best.met, -best.value) {
            best = attempt;
        }
    }

    let (residual_alpha, residual_chi) = residuals(&system, request, &best.amps)?;
    let thermal = ThermalSpec::from_nbar(chain.nbar())?;
    let predicted_fidelity = predicted_fidelity(&system, request, &best.amps, &thermal)?;
    let peak = best.amps.max_abs();
    if peak > request.power_cap {
        return Err(Error::InfeasiblePowerCap { required: peak, cap: request.power_cap });
    }
    let power = best.amps.flatten().iter().map(|v| v * v).sum();
    Ok(SolveResult {
        solution: best.amps,
        pairs: request.pairs.clone(),
        mu,
        residual_alpha,
        residual_chi,
        predicted_fidelity,
        objective_value: best.value,
        iterations: best.iterations,
        converged: best.met,
        power,
        weights: best.weights,
        penalty_rounds_used: best.rounds,
    })
}

/// One detuning of a scan.
#[derive(Debug)]
pub struct ScanEntry {
    pub mu: f64,
    pub result: Result<SolveResult>,
}

/// Solves every detuning of the request and ranks the results: converged
/// first, then higher F‖, then lower power, then lower μ. Failed detunings
/// go last, in μ order.
pub fn solve_scan(
    chain: &ChainSpec,
    request: &GateRequest,
    weights: &PenaltyWeights,
    seed: u64,
) -> Result<Vec<ScanEntry>> {
    request.validate()?;
    let mut entries: Vec<ScanEntry> = request
        .mus()
        .into_par_iter()
        .map(|mu| ScanEntry { mu, result: solve(chain, &request.at_mu(mu), weights, seed) })
        .collect();
    entries.sort_by(|a, b| {
        use std::cmp::Ordering;
        match (&a.result, &b.result) {
            (Ok(x), Ok(y)) => y
                .converged
                .cmp(&x.converged)
                .then_with(|| {
                    let fx = x.predicted_fidelity.unwrap_or(f64::NEG_INFINITY);
                    let fy = y.predicted_fidelity.unwrap_or(f64::NEG_INFINITY);
                    fy.total_cmp(&fx)
                })
                .then_with(|| x.power.total_cmp(&y.power))
                .then_with(|| a.mu.total_cmp(&b.mu)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            (Err(_), Err(_)) => a.mu.total_cmp(&b.mu),
        }
    });
    Ok(entries)
}

/// Mean-square amplitude ratio of each parallel pair to its stand-alone gate.
pub fn power_ratio(parallel: &SolveResult, single_a: &SolveResult, single_b: &SolveResult) -> Result<(f64, f64)> {
    for (name, r) in [("parallel", parallel), ("single_a", single_a), ("single_b", single_b)] {
        if !r.converged {
            return Err(Error::Unconverged(format!("{} result", name)));
        }
    }
    if parallel.pairs.len() != 2 || single_a.pairs.len() != 1 || single_b.pairs.len() != 1 {
        return Err(Error::InvalidParameter("need one two-pair and two one-pair results".into()));
    }
    let same = |x: (usize, usize), y: (usize, usize)| x == y || x == (y.1, y.0);
    let ratio = |pair: (usize, usize), single: &SolveResult| -> Result<f64> {
        if !same(pair, single.pairs[0].ions) {
            return Err(Error::InvalidParameter(format!("pair {:?} has no matching stand-alone result", pair)));
        }
        let ms = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let p = parallel.solution.pulse_for(pair.0).ok_or(Error::IonNotInvolved(pair.0))?;
        let s = single.solution.pulse_for(pair.0).ok_or(Error::IonNotInvolved(pair.0))?;
        Ok(ms(p) / ms(s))
    };
    Ok((ratio(parallel.pairs[0].ions, single_a)?, ratio(parallel.pairs[1].ions, single_b)?))
}
