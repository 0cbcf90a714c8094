//! Ion-chain motional structure: transverse mode frequencies, Lamb-Dicke
//! couplings and mode occupations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::{mhz_to_rad, ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, HBAR, VACUUM_PERMITTIVITY};

/// Mean phonon number assumed for every mode when a config omits `nbar`.
pub const DEFAULT_NBAR: f64 = 0.1;

/// Motional description of an N-ion chain. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    n_ions: usize,
    /// Angular frequencies (rad/s), descending. Mode 0 is the common mode.
    mode_freqs: Vec<f64>,
    /// Rows are ions, columns are modes.
    lamb_dicke: DMatrix<f64>,
    nbar: Vec<f64>,
    qubit_splitting: Option<f64>,
}

impl ChainSpec {
    /// Builds a chain from explicit data. Modes are reordered to descending
    /// frequency, permuting the Lamb-Dicke columns and `nbar` along with them.
    pub fn new(
        mode_freqs: Vec<f64>,
        lamb_dicke: DMatrix<f64>,
        nbar: Vec<f64>,
        qubit_splitting: Option<f64>,
    ) -> Result<Self> {
        let n = mode_freqs.len();
        if n == 0 {
            return Err(Error::InvalidParameter("chain needs at least one ion".into()));
        }
        if lamb_dicke.nrows() != n || lamb_dicke.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} modes but Lamb-Dicke matrix is {}x{}",
                n,
                lamb_dicke.nrows(),
                lamb_dicke.ncols()
            )));
        }
        if nbar.len() != n {
            return Err(Error::DimensionMismatch(format!("{} modes but {} nbar values", n, nbar.len())));
        }
        for (k, &w) in mode_freqs.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!("mode {} frequency must be positive, got {}", k + 1, w)));
            }
        }
        if lamb_dicke.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Lamb-Dicke entry".into()));
        }
        for (k, &nb) in nbar.iter().enumerate() {
            if !(nb.is_finite() && nb >= 0.0) {
                return Err(Error::InvalidParameter(format!("mode {} nbar must be non-negative, got {}", k + 1, nb)));
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| mode_freqs[b].total_cmp(&mode_freqs[a]));
        let mode_freqs_sorted = order.iter().map(|&k| mode_freqs[k]).collect();
        let nbar_sorted = order.iter().map(|&k| nbar[k]).collect();
        let lamb_dicke_sorted = DMatrix::from_fn(n, n, |i, k| lamb_dicke[(i, order[k])]);

        Ok(Self {
            n_ions: n,
            mode_freqs: mode_freqs_sorted,
            lamb_dicke: lamb_dicke_sorted,
            nbar: nbar_sorted,
            qubit_splitting,
        })
    }

    pub fn n_ions(&self) -> usize {
        self.n_ions
    }

    pub fn n_modes(&self) -> usize {
        self.mode_freqs.len()
    }

    pub fn mode_freqs(&self) -> &[f64] {
        &self.mode_freqs
    }

    pub fn lamb_dicke(&self) -> &DMatrix<f64> {
        &self.lamb_dicke
    }

    /// η for ion `ion` (0-based) and mode `mode` (0-based).
    pub fn eta(&self, ion: usize, mode: usize) -> f64 {
        self.lamb_dicke[(ion, mode)]
    }

    pub fn nbar(&self) -> &[f64] {
        &self.nbar
    }

    pub fn qubit_splitting(&self) -> Option<f64> {
        self.qubit_splitting
    }

    /// Returns a copy with every mode occupation replaced.
    pub fn with_nbar(&self, nbar: Vec<f64>) -> Result<Self> {
        Self::new(self.mode_freqs.clone(), self.lamb_dicke.clone(), nbar, self.qubit_splitting)
    }

    /// The five-ion chain used for the parallel-gate demonstrations: measured
    /// transverse modes at 3.045, 3.027, 3.005, 2.978 and 2.946 MHz, with mode
    /// vectors from a 171Yb+ trap whose axial frequency was fit so the computed
    /// spectrum reproduces those values.
    pub fn five_ion_reference() -> Self {
        load_chain(&ChainConfig::five_ion_reference()).expect("reference chain is valid")
    }
}

/// Trap parameters for computing the transverse modes internally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub axial_mhz: f64,
    pub transverse_mhz: f64,
    pub mass_amu: f64,
    pub k_eff_per_m: f64,
}

/// JSON chain document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_ions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_freqs_mhz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapConfig>,
    /// Rows are ions, columns are modes (ordered like `mode_freqs_mhz`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lamb_dicke: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_splitting_mhz: Option<f64>,
}

/// Axial frequency fit so a 3.045 MHz transverse trap puts the lowest
/// five-ion mode at 2.946 MHz.
pub const REFERENCE_AXIAL_MHZ: f64 = 0.308_364_809_939_235;
/// Two counter-propagating 355 nm Raman beams crossing at 90°: √2·2π/λ.
pub const REFERENCE_K_EFF_PER_M: f64 = std::f64::consts::SQRT_2 * 2.0 * PI / 355e-9;

impl ChainConfig {
    pub fn five_ion_reference() -> Self {
        Self {
            n_ions: 5,
            mode_freqs_mhz: Some(vec![3.045, 3.027, 3.005, 2.978, 2.946]),
            trap: Some(TrapConfig {
                axial_mhz: REFERENCE_AXIAL_MHZ,
                transverse_mhz: 3.045,
                mass_amu: 171.0,
                k_eff_per_m: REFERENCE_K_EFF_PER_M,
            }),
            lamb_dicke: None,
            nbar: Some(vec![DEFAULT_NBAR; 5]),
            qubit_splitting_mhz: Some(12_642.821),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }
}

/// Validates a chain document and resolves it into a [`ChainSpec`].
///
/// Explicit `lamb_dicke` always wins. Without it, the trap block supplies
/// mode vectors; if `mode_freqs_mhz` is also given, those frequencies replace
/// the computed ones (same ordering, descending) and set the η scale.
pub fn load_chain(config: &ChainConfig) -> Result<ChainSpec> {
    let n = config.n_ions;
    if n == 0 {
        return Err(Error::InvalidParameter("n_ions must be positive".into()));
    }
    let nbar = match &config.nbar {
        Some(v) => v.clone(),
        None => vec![DEFAULT_NBAR; n],
    };
    let splitting = config.qubit_splitting_mhz.map(mhz_to_rad);

    let explicit_freqs = match &config.mode_freqs_mhz {
        Some(f) => {
            if f.len() != n {
                return Err(Error::DimensionMismatch(format!("n_ions = {} but {} mode frequencies", n, f.len())));
            }
            Some(f.iter().map(|&x| mhz_to_rad(x)).collect::<Vec<_>>())
        }
        None => None,
    };

    let explicit_eta = match &config.lamb_dicke {
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                let shape = format!("{}x{}", rows.len(), rows.first().map(|r| r.len()).unwrap_or(0));
                return Err(Error::DimensionMismatch(format!("n_ions = {} but Lamb-Dicke matrix is {}", n, shape)));
            }
            Some(DMatrix::from_fn(n, n, |i, k| rows[i][k]))
        }
        None => None,
    };

    match (explicit_freqs, explicit_eta, &config.trap) {
        (Some(freqs), Some(eta), _) => ChainSpec::new(freqs, eta, nbar, splitting),
        (freqs, None, Some(trap)) => {
            let modes = compute_transverse_modes(
                n,
                mhz_to_rad(trap.axial_mhz),
                mhz_to_rad(trap.transverse_mhz),
                trap.mass_amu * ATOMIC_MASS_UNIT,
                trap.k_eff_per_m,
            )?;
            match freqs {
                None => ChainSpec::new(modes.mode_freqs, modes.lamb_dicke, nbar, splitting),
                Some(freqs) => {
                    let mut sorted = freqs.clone();
                    sorted.sort_by(|a, b| b.total_cmp(a));
                    let mass = trap.mass_amu * ATOMIC_MASS_UNIT;
                    let eta = lamb_dicke_from_vectors(&modes.eigenvectors, &sorted, mass, trap.k_eff_per_m)?;
                    ChainSpec::new(sorted, eta, nbar, splitting)
                }
            }
        }
        (None, Some(_), _) => Err(Error::Malformed("lamb_dicke given without mode_freqs_mhz".into())),
        (Some(_), None, None) => Err(Error::Malformed("mode_freqs_mhz needs either lamb_dicke or a trap block".into())),
        (None, None, None) => Err(Error::Malformed("chain needs mode_freqs_mhz + lamb_dicke or a trap block".into())),
    }
}

/// Result of the normal-mode analysis.
#[derive(Debug, Clone)]
pub struct TransverseModes {
    /// Angular frequencies, descending.
    pub mode_freqs: Vec<f64>,
    /// Orthonormal mode vectors, one column per mode, same order as `mode_freqs`.
    pub eigenvectors: DMatrix<f64>,
    pub lamb_dicke: DMatrix<f64>,
    /// Equilibrium positions in units of the Coulomb length scale.
    pub positions: Vec<f64>,
    /// Coulomb length scale (m).
    pub length_scale: f64,
}

/// Minimum transverse/axial ratio for a stable linear chain.
pub fn critical_ratio(n_ions: usize) -> f64 {
    0.77 * (n_ions as f64).powf(0.86)
}

/// Transverse normal modes of a linear chain in a harmonic trap.
///
/// Frequencies in rad/s, mass in kg, `k_eff` in 1/m.
pub fn compute_transverse_modes(
    n_ions: usize,
    axial_freq: f64,
    transverse_freq: f64,
    mass: f64,
    k_eff: f64,
) -> Result<TransverseModes> {
    if n_ions == 0 {
        return Err(Error::InvalidParameter("n_ions must be positive".into()));
    }
    for (name, v) in
        [("axial frequency", axial_freq), ("transverse frequency", transverse_freq), ("mass", mass), ("k_eff", k_eff)]
    {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{} must be positive, got {}", name, v)));
        }
    }
    let ratio = transverse_freq / axial_freq;
    if n_ions > 1 {
        let critical = critical_ratio(n_ions);
        if ratio <= critical {
            return Err(Error::ZigzagInstability { n_ions, ratio, critical });
        }
    }

    let positions = equilibrium_positions(n_ions)?;
    let n = n_ions;

    // Transverse Hessian in units of m·ω_ax².
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = ratio * ratio;
        for j in 0..n {
            if i != j {
                let c = 1.0 / (positions[i] - positions[j]).abs().powi(3);
                hessian[(i, j)] = c;
                diag -= c;
            }
        }
        hessian[(i, i)] = diag;
    }

    let eig = SymmetricEigen::new(hessian);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut mode_freqs = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            return Err(Error::ZigzagInstability { n_ions, ratio, critical: critical_ratio(n_ions) });
        }
        mode_freqs.push(axial_freq * lambda.sqrt());
        let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        // First significant component positive.
        if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-8) {
            if first < 0.0 {
                v = -v;
            }
        }
        eigenvectors.set_column(col, &v);
    }

    let lamb_dicke = lamb_dicke_from_vectors(&eigenvectors, &mode_freqs, mass, k_eff)?;
    let length_scale = (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE
        / (4.0 * PI * VACUUM_PERMITTIVITY * mass * axial_freq * axial_freq))
        .cbrt();

    Ok(TransverseModes { mode_freqs, eigenvectors, lamb_dicke, positions, length_scale })
}

/// η_{i,k} = b_{i,k} · k_eff · sqrt(ħ / (2 m ω_k)).
pub fn lamb_dicke_from_vectors(
    eigenvectors: &DMatrix<f64>,
    mode_freqs: &[f64],
    mass: f64,
    k_eff: f64,
) -> Result<DMatrix<f64>> {
    let n = eigenvectors.nrows();
    if eigenvectors.ncols() != mode_freqs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} mode vectors but {} frequencies",
            eigenvectors.ncols(),
            mode_freqs.len()
        )));
    }
    Ok(DMatrix::from_fn(n, mode_freqs.len(), |i, k| {
        eigenvectors[(i, k)] * k_eff * (HBAR / (2.0 * mass * mode_freqs[k])).sqrt()
    }))
}

const EQUILIBRIUM_TOL: f64 = 1e-14;
const EQUILIBRIUM_MAX_ITER: usize = 200;

/// Axial equilibrium of N ions in units of (e²/4πε₀mω_ax²)^{1/3}, ascending.
///
/// Newton iteration on u_i − Σ_{j≠i} sgn(u_i − u_j)/(u_i − u_j)² = 0.
pub fn equilibrium_positions(n_ions: usize) -> Result<Vec<f64>> {
    let n = n_ions;
    if n == 1 {
        return Ok(vec![0.0]);
    }
    // Uniform start with the empirical minimum spacing 2.018/N^0.559.
    let spacing = 2.018 / (n as f64).powf(0.559);
    let mut u: Vec<f64> = (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing).collect();

    let residual = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut f = u[i];
                for j in 0..n {
                    if i != j {
                        let d = u[i] - u[j];
                        f -= d.signum() / (d * d);
                    }
                }
                f
            })
            .collect()
    };
    let norm = |f: &[f64]| f.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut f = residual(&u);
    let mut fnorm = norm(&f);
    for _ in 0..EQUILIBRIUM_MAX_ITER {
        if fnorm < EQUILIBRIUM_TOL {
            return Ok(u);
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 1.0;
            for j in 0..n {
                if i != j {
                    let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                    jac[(i, j)] = -c;
                    diag += c;
                }
            }
            jac[(i, i)] = diag;
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or(Error::EquilibriumNotConverged { iterations: 0, residual: fnorm })?;

        // Damped step: keep ordering and require residual decrease.
        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let ft = residual(&trial);
                let nt = norm(&ft);
                if nt < fnorm || scale < 1e-6 {
                    u = trial;
                    f = ft;
                    fnorm = nt;
                    break;
                }
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(Error::EquilibriumNotConverged { iterations: EQUILIBRIUM_MAX_ITER, residual: fnorm });
            }
        }
    }
    if fnorm < EQUILIBRIUM_TOL * 10.0 {
        return Ok(u);
    }
    Err(Error::EquilibriumNotConverged { iterations: EQUILIBRIUM_MAX_ITER, residual: fnorm })
}
