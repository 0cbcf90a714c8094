//! Independent oracles shared by the integration tests: adaptive quadrature,
//! truncated-Fock thermal displacement, a brute-force fidelity and finite
//! differences.

#![allow(dead_code, clippy::excessive_precision)]

use nalgebra::DMatrix;
use num_complex::Complex64;

// ---------- adaptive Gauss–Kronrod (7/15) ----------

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod value, |Kronrod − Gauss| and the Kronrod estimate of ∫|f|.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut l1 = WGK[7] * fc.abs();
    for j in 0..7 {
        let x = h * XGK[j];
        let (lo, hi) = (f(c - x), f(c + x));
        kron += WGK[j] * (lo + hi);
        l1 += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    (kron * h, ((kron - gauss) * h).abs(), l1 * h.abs())
}

/// ∫_a^b f by adaptive bisection. A panel is accepted once its
/// Kronrod–Gauss difference is below its width share of
/// max(abs_tol, rel_tol·∫|f|), with ∫|f| estimated on the initial panels.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    // Start from enough panels to resolve oscillations before adapting.
    let initial = 16;
    let w = (b - a) / initial as f64;
    let mut stack: Vec<(f64, f64, usize)> =
        (0..initial).map(|k| (a + w * k as f64, a + w * (k + 1) as f64, 0)).collect();
    let l1_total: f64 = stack.iter().map(|&(lo, hi, _)| gk15(&mut f, lo, hi).2).sum();
    let target = abs_tol.max(rel_tol * l1_total);
    let total_width = (b - a).abs();
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err, l1) = gk15(&mut f, lo, hi);
        let share = (hi - lo).abs() / total_width;
        // Phases μt reach a few thousand rad, so argument round-off puts
        // noise near 1e-12·∫|f| into every panel.
        let floor = 1e4 * f64::EPSILON * l1;
        if err <= (target * share).max(floor) || depth > 24 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// Same for complex integrands.
pub fn integrate_c<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Complex64 {
    let re = integrate(|t| f(t).re, a, b, rel_tol, abs_tol);
    let im = integrate(|t| f(t).im, a, b, rel_tol, abs_tol);
    Complex64::new(re, im)
}

/// ∫_{a₂}^{b₂} dt' ∫_{a₁}^{min(b₁, t')} dt f(t, t'), nested adaptive quadrature.
pub fn integrate_ordered<F: Fn(f64, f64) -> f64>(
    f: F,
    early: (f64, f64),
    late: (f64, f64),
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    integrate(
        |tp| {
            let hi = early.1.min(tp);
            if hi <= early.0 {
                0.0
            } else {
                integrate(|t| f(t, tp), early.0, hi, rel_tol, abs_tol * 1e-2)
            }
        },
        late.0,
        late.1,
        rel_tol,
        abs_tol,
    )
}

// ---------- spin-dependent force integrands ----------

pub fn drive_integrand(mu: f64, omega: f64, t: f64) -> Complex64 {
    Complex64::from_polar((mu * t).sin(), omega * t)
}

pub fn chi_integrand(mu: f64, omega: f64, t: f64, tp: f64) -> f64 {
    (mu * t).sin() * (mu * tp).sin() * (omega * (tp - t)).sin()
}

/// ∫_0^{t} sin(μs) e^{−iωs} ds from elementary exponentials.
pub fn running_conj_drive(mu: f64, omega: f64, t: f64) -> Complex64 {
    let i = Complex64::i();
    // sin(μs) e^{−iωs} = (e^{i(μ−ω)s} − e^{−i(μ+ω)s}) / 2i
    let prim = |a: f64| -> Complex64 {
        if a.abs() * t < 1e-8 {
            Complex64::new(t, 0.5 * a * t * t)
        } else {
            ((i * a * t).exp() - 1.0) / (i * a)
        }
    };
    (prim(mu - omega) - prim(-(mu + omega))) / (2.0 * i)
}

/// ∫_{a₂}^{b₂} dt' ∫_{a₁}^{min(b₁, t')} dt sin(μt) sin(μt') sin(ω(t'−t)) with
/// the inner integral from `running_conj_drive` and the outer adaptive.
pub fn ordered_semi_analytic(mu: f64, omega: f64, early: (f64, f64), late: (f64, f64)) -> f64 {
    let r0 = running_conj_drive(mu, omega, early.0);
    integrate(
        |tp| {
            let hi = early.1.min(tp);
            if hi <= early.0 {
                return 0.0;
            }
            let inner = running_conj_drive(mu, omega, hi) - r0;
            (mu * tp).sin() * (Complex64::from_polar(1.0, omega * tp) * inner).im
        },
        late.0,
        late.1,
        1e-13,
        1e-16,
    )
}

/// ∫_0^τ dt' ∫_0^{t'} dt sin(μt) sin(μt') sin(ω(t'−t)): the inner integral
/// in closed form, the outer by adaptive quadrature.
pub fn full_triangle(mu: f64, omega: f64, tau: f64) -> f64 {
    integrate(
        |tp| {
            let inner = running_conj_drive(mu, omega, tp);
            // Im[e^{iωt'} ∫ sin(μt) e^{−iωt} dt] = ∫ sin(μt) sin(ω(t'−t)) dt
            (mu * tp).sin() * (Complex64::from_polar(1.0, omega * tp) * inner).im
        },
        0.0,
        tau,
        1e-13,
        1e-15,
    )
}

// ---------- truncated Fock space ----------

pub fn annihilation(dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |r, c| {
        if c == r + 1 {
            Complex64::new((c as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// D(γ) = exp(γa† − γ*a) on the truncated space.
pub fn displacement(gamma: Complex64, dim: usize) -> DMatrix<Complex64> {
    let a = annihilation(dim);
    let gen = a.adjoint() * gamma - &a * gamma.conj();
    gen.exp()
}

pub fn thermal_state(nbar: f64, dim: usize) -> DMatrix<Complex64> {
    let mut rho = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        rho[(n, n)] = Complex64::new(nbar.powi(n as i32) / (nbar + 1.0).powi(n as i32 + 1), 0.0);
    }
    rho
}

/// Tr[ρ_th D(γ)] by explicit matrices.
pub fn thermal_displacement_expectation(gamma: Complex64, nbar: f64, dim: usize) -> Complex64 {
    (thermal_state(nbar, dim) * displacement(gamma, dim)).trace()
}

/// Spin configurations s ∈ {+1, −1}⁴ in σx eigenbasis order.
pub fn spin_configs(n: usize) -> Vec<Vec<f64>> {
    (0..1usize << n).map(|b| (0..n).map(|q| if (b >> (n - 1 - q)) & 1 == 0 { 1.0 } else { -1.0 }).collect()).collect()
}

/// Fidelity ⟨ψ_ideal| Tr_m[U |0000⟩⟨0000| ⊗ ρ_th U†] |ψ_ideal⟩ for
/// U = exp(Σ_i φ̂_i σx_i + i Σ χ σxσx), motion traced over explicitly in a
/// truncated Fock space per mode.
///
/// `alphas[slot][k]`, `chis`/`ideals` over pair slots (ij, im, in, jm, jn, mn).
pub fn fock_fidelity(
    alphas: &[Vec<Complex64>; 4],
    chis: &[f64; 6],
    ideals: &[f64; 6],
    nbar: &[f64],
    dim: usize,
) -> f64 {
    const SLOTS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let spins = spin_configs(4);
    let n_modes = nbar.len();
    let phase =
        |s: &[f64], angles: &[f64; 6]| -> f64 { SLOTS.iter().zip(angles).map(|(&(a, b), &c)| c * s[a] * s[b]).sum() };
    // D per spin configuration and mode.
    let disps: Vec<Vec<DMatrix<Complex64>>> = spins
        .iter()
        .map(|s| {
            (0..n_modes)
                .map(|k| {
                    let g: Complex64 = (0..4).map(|q| alphas[q][k] * s[q]).sum();
                    displacement(g, dim)
                })
                .collect()
        })
        .collect();
    let rhos: Vec<DMatrix<Complex64>> = nbar.iter().map(|&n| thermal_state(n, dim)).collect();
    // |0⟩ = (|+⟩ + |−⟩)/√2 on each qubit, so every amplitude is 1/4.
    let c = 0.25;
    let mut f = Complex64::new(0.0, 0.0);
    for (x, s) in spins.iter().enumerate() {
        for (y, sp) in spins.iter().enumerate() {
            let mut motion = Complex64::new(1.0, 0.0);
            for k in 0..n_modes {
                motion *= (&disps[x][k] * &rhos[k] * disps[y][k].adjoint()).trace();
            }
            let rho_r = Complex64::from_polar(c * c, phase(s, chis) - phase(sp, chis)) * motion;
            let ideal = Complex64::from_polar(c * c, -(phase(s, ideals) - phase(sp, ideals)));
            f += ideal * rho_r;
        }
    }
    f.re
}

// ---------- finite differences ----------

/// Five-point central difference of f along coordinate `i`.
pub fn central_diff<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], i: usize, h: f64) -> f64 {
    let at = |d: f64| {
        let mut y = x.to_vec();
        y[i] += d;
        f(&y)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
