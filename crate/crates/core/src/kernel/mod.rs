//! Pre-computed spin–motion (C) and spin–spin (D) matrices for segmented
//! pulses, and evaluation of displacements α and entangling angles χ.
//!
//! With Ω piecewise constant over S equal segments,
//!
//! ```text
//! α_{i,k} = Σ_s Ω_s C^i_{k,s}
//! χ_{ij}  = Σ_{s≤s'} D^{ij}_{s,s'} (Ω^{(i)}_s Ω^{(j)}_{s'} + Ω^{(j)}_s Ω^{(i)}_{s'})
//! ```
//!
//! where `D^{ij}_{s,s'}` integrates Σ_k η_{i,k} η_{j,k} sin(μt) sin(μt') sin(ω_k(t'−t))
//! over t ∈ segment s, t' ∈ segment s' with t < t'. Rows of D are the earlier
//! segment, so D is upper triangular. When both ions see the same pulse the
//! bracket collapses to 2 Ω_s Ω_{s'}.

pub mod closed_form;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use closed_form::{drive_integral, ordered_from_drives, triangle_segment_integral};

/// |μ ∓ ω_k| closer than this is rejected.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// S equal segments covering [0, τ].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGrid {
    tau: f64,
    n_segments: usize,
}

impl SegmentGrid {
    pub fn new(tau: f64, n_segments: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("gate time must be positive, got {}", tau)));
        }
        if n_segments == 0 {
            return Err(Error::InvalidParameter("need at least one segment".into()));
        }
        Ok(Self { tau, n_segments })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    /// Boundary `s` is s·τ/S, computed directly rather than accumulated.
    pub fn boundary(&self, s: usize) -> f64 {
        s as f64 * self.tau / self.n_segments as f64
    }

    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.n_segments).map(|s| self.boundary(s)).collect()
    }

    /// (start, length) of segment `s` (0-based).
    pub fn segment(&self, s: usize) -> (f64, f64) {
        let a = self.boundary(s);
        (a, self.boundary(s + 1) - a)
    }
}

/// One independently shaped control signal and the ions it illuminates.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveChannel {
    pub ions: Vec<usize>,
    /// Signed Rabi frequency per segment (rad/s). A negative value is a π
    /// phase flip of the beatnote.
    pub amplitudes: Vec<f64>,
}

/// Segment amplitudes for every control channel. In the usual parallel-gate
/// layout each channel drives one entangling pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector {
    channels: Vec<DriveChannel>,
}

impl AmplitudeVector {
    pub fn new(channels: Vec<DriveChannel>) -> Result<Self> {
        let mut seen = Vec::new();
        let len = channels.first().map(|c| c.amplitudes.len());
        for ch in &channels {
            if Some(ch.amplitudes.len()) != len {
                return Err(Error::DimensionMismatch("channels carry different segment counts".into()));
            }
            for &ion in &ch.ions {
                if seen.contains(&ion) {
                    return Err(Error::DuplicateIon(ion));
                }
                seen.push(ion);
            }
        }
        Ok(Self { channels })
    }

    /// One channel per ion pair.
    pub fn for_pairs(pairs: &[(usize, usize)], amplitudes: Vec<Vec<f64>>) -> Result<Self> {
        if pairs.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} pairs but {} amplitude vectors",
                pairs.len(),
                amplitudes.len()
            )));
        }
        Self::new(
            pairs
                .iter()
                .zip(amplitudes)
                .map(|(&(a, b), amplitudes)| DriveChannel { ions: vec![a, b], amplitudes })
                .collect(),
        )
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .map(|c| DriveChannel { ions: c.ions.clone(), amplitudes: vec![0.0; c.amplitudes.len()] })
                .collect(),
        }
    }

    pub fn channels(&self) -> &[DriveChannel] {
        &self.channels
    }

    pub fn n_segments(&self) -> usize {
        self.channels.first().map_or(0, |c| c.amplitudes.len())
    }

    pub fn channel_of(&self, ion: usize) -> Option<usize> {
        self.channels.iter().position(|c| c.ions.contains(&ion))
    }

    pub fn pulse_for(&self, ion: usize) -> Option<&[f64]> {
        self.channel_of(ion).map(|c| self.channels[c].amplitudes.as_slice())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for ch in &mut out.channels {
            ch.amplitudes.iter_mut().for_each(|x| *x *= factor);
        }
        out
    }

    /// Channel amplitudes concatenated in channel order.
    pub fn flatten(&self) -> Vec<f64> {
        self.channels.iter().flat_map(|c| c.amplitudes.iter().copied()).collect()
    }

    /// Inverse of [`flatten`](Self::flatten), keeping this vector's layout.
    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let s = self.n_segments();
        let mut out = self.clone();
        for (c, ch) in out.channels.iter_mut().enumerate() {
            ch.amplitudes.copy_from_slice(&flat[c * s..(c + 1) * s]);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.channels.iter().flat_map(|c| c.amplitudes.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// C and D matrices for one detuning, grid and set of involved ions.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    mu: f64,
    grid: SegmentGrid,
    ions: Vec<usize>,
    mode_freqs: Vec<f64>,
    /// η-free drive integrals, S × N.
    drive: DMatrix<Complex64>,
    /// Per involved ion (same order as `ions`), S × N.
    c_mats: Vec<DMatrix<Complex64>>,
    /// η rows of the involved ions.
    etas: Vec<Vec<f64>>,
    /// Upper triangle of involved-ion pairs (a < b in `ions` order), S × S.
    d_mats: Vec<DMatrix<f64>>,
}

impl ConstraintSystem {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn grid(&self) -> &SegmentGrid {
        &self.grid
    }

    pub fn ions(&self) -> &[usize] {
        &self.ions
    }

    pub fn n_modes(&self) -> usize {
        self.mode_freqs.len()
    }

    pub fn mode_freqs(&self) -> &[f64] {
        &self.mode_freqs
    }

    /// η-free segment drive integrals ∫ sin(μt) e^{iω_k t} dt, S × N.
    pub fn drive(&self) -> &DMatrix<Complex64> {
        &self.drive
    }

    fn position(&self, ion: usize) -> Result<usize> {
        self.ions.iter().position(|&i| i == ion).ok_or(Error::IonNotInvolved(ion))
    }

    /// C^i (S × N) for chain ion `ion`.
    pub fn c_mat(&self, ion: usize) -> Result<&DMatrix<Complex64>> {
        Ok(&self.c_mats[self.position(ion)?])
    }

    fn pair_slot(&self, i: usize, j: usize) -> Result<usize> {
        let (a, b) = (self.position(i)?, self.position(j)?);
        if a == b {
            return Err(Error::InvalidParameter(format!("ion {} paired with itself", i)));
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let n = self.ions.len();
        // Row-major index into the strict upper triangle.
        Ok(a * n - a * (a + 1) / 2 + (b - a - 1))
    }

    /// D^{ij} (S × S, rows = earlier segment). D^{ij} and D^{ji} are the same matrix.
    pub fn d_mat(&self, i: usize, j: usize) -> Result<&DMatrix<f64>> {
        Ok(&self.d_mats[self.pair_slot(i, j)?])
    }
}

/// Builds C and D for the ions in `involved` (0-based chain indices).
pub fn build_system(chain: &ChainSpec, involved: &[usize], mu: f64, grid: SegmentGrid) -> Result<ConstraintSystem> {
    if !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("detuning must be finite, got {}", mu)));
    }
    for (idx, &ion) in involved.iter().enumerate() {
        if ion >= chain.n_ions() {
            return Err(Error::IndexOutOfRange { index: ion, size: chain.n_ions() });
        }
        if involved[..idx].contains(&ion) {
            return Err(Error::DuplicateIon(ion));
        }
    }
    for (k, &w) in chain.mode_freqs().iter().enumerate() {
        if (mu - w).abs() < DEGENERACY_TOL || (mu + w).abs() < DEGENERACY_TOL {
            return Err(Error::DegenerateDetuning { mu, omega: w, mode: k, tol: DEGENERACY_TOL });
        }
    }

    let s_count = grid.n_segments();
    let n_modes = chain.n_modes();
    let freqs = chain.mode_freqs();

    let drive = DMatrix::from_fn(s_count, n_modes, |s, k| {
        let (a, len) = grid.segment(s);
        drive_integral(mu, freqs[k], a, len)
    });

    // Per-mode ordered kernels K^k_{s,s'}, shared by every ion pair.
    let mode_kernels: Vec<DMatrix<f64>> = (0..n_modes)
        .map(|k| {
            DMatrix::from_fn(s_count, s_count, |s, sp| {
                if s < sp {
                    ordered_from_drives(drive[(s, k)], drive[(sp, k)])
                } else if s == sp {
                    let (a, len) = grid.segment(s);
                    triangle_segment_integral(mu, freqs[k], a, len)
                } else {
                    0.0
                }
            })
        })
        .collect();

    let c_mats = involved
        .iter()
        .map(|&ion| DMatrix::from_fn(s_count, n_modes, |s, k| drive[(s, k)] * chain.eta(ion, k)))
        .collect();

    let etas = involved.iter().map(|&ion| (0..n_modes).map(|k| chain.eta(ion, k)).collect()).collect();

    let mut d_mats = Vec::new();
    for (a, &i) in involved.iter().enumerate() {
        for &j in &involved[a + 1..] {
            let mut d = DMatrix::<f64>::zeros(s_count, s_count);
            for (k, kernel) in mode_kernels.iter().enumerate() {
                d += kernel * (chain.eta(i, k) * chain.eta(j, k));
            }
            d_mats.push(d);
        }
    }

    Ok(ConstraintSystem { mu, grid, ions: involved.to_vec(), mode_freqs: freqs.to_vec(), drive, c_mats, etas, d_mats })
}

fn check_len(system: &ConstraintSystem, amps: &AmplitudeVector) -> Result<()> {
    if amps.n_segments() != system.grid.n_segments() {
        return Err(Error::DimensionMismatch(format!(
            "amplitudes have {} segments, grid has {}",
            amps.n_segments(),
            system.grid.n_segments()
        )));
    }
    Ok(())
}

/// α_{i,k}(τ) = Σ_s Ω_s C^i_{k,s}.
pub fn alpha_of(system: &ConstraintSystem, amps: &AmplitudeVector, ion: usize, mode: usize) -> Result<Complex64> {
    check_len(system, amps)?;
    if mode >= system.n_modes() {
        return Err(Error::IndexOutOfRange { index: mode, size: system.n_modes() });
    }
    let c = system.c_mat(ion)?;
    let pulse = amps.pulse_for(ion).ok_or(Error::IonNotInvolved(ion))?;
    Ok(pulse.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (s, &w)| acc + c[(s, mode)] * w))
}

/// χ_{ij}(τ) for two involved ions, each drawing Ω from its own channel.
pub fn chi_of(system: &ConstraintSystem, amps: &AmplitudeVector, pair: (usize, usize)) -> Result<f64> {
    check_len(system, amps)?;
    let (i, j) = pair;
    let d = system.d_mat(i, j)?;
    let wi = amps.pulse_for(i).ok_or(Error::IonNotInvolved(i))?;
    let wj = amps.pulse_for(j).ok_or(Error::IonNotInvolved(j))?;
    Ok(symmetric_form(d, wi, wj))
}

/// Σ_{s≤s'} D_{s,s'} (x_s y_{s'} + y_s x_{s'}) = xᵀ(D + Dᵀ)y.
pub(crate) fn symmetric_form(d: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for sp in 0..n {
        for s in 0..=sp {
            total += d[(s, sp)] * (x[s] * y[sp] + y[s] * x[sp]);
        }
    }
    total
}

/// One sample of a phase-space path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub alpha: Complex64,
}

/// α_{i,k}(t) sampled at `n_samples` uniform times in [0, τ].
///
/// Completed segments contribute their closed-form integral; the running
/// segment contributes the partial integral up to t. The last sample is the
/// same sum as [`alpha_of`].
pub fn trajectory(
    system: &ConstraintSystem,
    amps: &AmplitudeVector,
    ion: usize,
    mode: usize,
    n_samples: usize,
) -> Result<Vec<TrajectoryPoint>> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter("trajectory needs at least 2 samples".into()));
    }
    // Validates ion, mode and lengths.
    alpha_of(system, amps, ion, mode)?;
    let c = system.c_mat(ion)?;
    let pulse = amps.pulse_for(ion).ok_or(Error::IonNotInvolved(ion))?;
    let grid = system.grid;
    let s_count = grid.n_segments();
    let tau = grid.tau();
    let omega = system.mode_freqs[mode];
    let eta = system.etas[system.position(ion)?][mode];

    let mut out = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        let t = if n + 1 == n_samples { tau } else { n as f64 * tau / (n_samples - 1) as f64 };
        let mut complete = 0;
        while complete < s_count && grid.boundary(complete + 1) <= t {
            complete += 1;
        }
        let mut alpha = Complex64::new(0.0, 0.0);
        for s in 0..complete {
            alpha += c[(s, mode)] * pulse[s];
        }
        if complete < s_count {
            let start = grid.boundary(complete);
            if t > start {
                alpha += drive_integral(system.mu, omega, start, t - start) * (eta * pulse[complete]);
            }
        }
        out.push(TrajectoryPoint { t, alpha });
    }
    Ok(out)
}
