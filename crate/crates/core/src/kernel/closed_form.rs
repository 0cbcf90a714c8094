//! Closed-form segment integrals of the spin-dependent force.
//!
//! Everything here is unit-agnostic: pass times and angular frequencies in
//! any consistent system. The drive `sin(μt) e^{iωt}` is split into the two
//! exponentials at ν₊ = ω + μ and ν₋ = ω − μ, and every integral is written
//! through divided differences of `exp`, which stay finite (and accurate)
//! when a frequency or a frequency difference goes to zero.

use num_complex::Complex64;

const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 24;

/// exp[0, w] = (e^w − 1)/w.
pub fn exp_divdiff1(w: Complex64) -> Complex64 {
    if w.norm() < SERIES_RADIUS {
        // Σ w^n/(n+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..SERIES_TERMS {
            term = term * w / (n as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (w.exp() - 1.0) / w
    }
}

/// exp[a, b] = (e^b − e^a)/(b − a).
fn exp_divdiff_pair(a: Complex64, b: Complex64) -> Complex64 {
    a.exp() * exp_divdiff1(b - a)
}

/// Second divided difference exp[z0, z1, z2], symmetric in its arguments.
///
/// Equals ∫∫ over the standard 2-simplex of exp(z0 λ0 + z1 λ1 + z2 λ2).
pub fn exp_divdiff2(z0: Complex64, z1: Complex64, z2: Complex64) -> Complex64 {
    let z = [z0, z1, z2];
    let pairs = [(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)];
    let (p, q, r) =
        pairs.iter().copied().max_by(|a, b| (z[a.0] - z[a.1]).norm().total_cmp(&(z[b.0] - z[b.1]).norm())).unwrap();
    let spread = (z[p] - z[q]).norm();

    if spread < SERIES_RADIUS {
        // Taylor about the centroid: e^c Σ h_n(δ)/(n+2)!, with h_n the
        // complete homogeneous symmetric polynomials of the offsets.
        let c = (z0 + z1 + z2) / 3.0;
        let d = [z0 - c, z1 - c, z2 - c];
        // h tables for prefixes of d, built incrementally.
        let mut h1 = vec![Complex64::new(1.0, 0.0); SERIES_TERMS];
        let mut h2 = vec![Complex64::new(1.0, 0.0); SERIES_TERMS];
        let mut h3 = vec![Complex64::new(1.0, 0.0); SERIES_TERMS];
        for n in 1..SERIES_TERMS {
            h1[n] = h1[n - 1] * d[0];
            h2[n] = h1[n] + d[1] * h2[n - 1];
            h3[n] = h2[n] + d[2] * h3[n - 1];
        }
        let mut fact = 2.0;
        let mut sum = Complex64::new(0.0, 0.0);
        for (n, h) in h3.iter().enumerate() {
            if n > 0 {
                fact *= n as f64 + 2.0;
            }
            sum += h / fact;
        }
        c.exp() * sum
    } else {
        // Divide by the widest separation.
        (exp_divdiff_pair(z[r], z[q]) - exp_divdiff_pair(z[p], z[r])) / (z[q] - z[p])
    }
}

/// ∫_a^{a+len} sin(μt) e^{iωt} dt.
pub fn drive_integral(mu: f64, omega: f64, start: f64, len: f64) -> Complex64 {
    let i = Complex64::i();
    let nu_plus = omega + mu;
    let nu_minus = omega - mu;
    let plus = (i * nu_plus * start).exp() * exp_divdiff1(i * nu_plus * len);
    let minus = (i * nu_minus * start).exp() * exp_divdiff1(i * nu_minus * len);
    (plus - minus) * len / (2.0 * i)
}

/// ∫_{late} dt' ∫_{early} dt sin(μt) sin(μt') sin(ω(t'−t)) for two segments
/// with every point of `early` before every point of `late`.
///
/// Factorizes as Im(conj(G_early)·G_late) with G the drive integral.
pub fn ordered_segment_integral(mu: f64, omega: f64, early: (f64, f64), late: (f64, f64)) -> f64 {
    let g_early = drive_integral(mu, omega, early.0, early.1);
    let g_late = drive_integral(mu, omega, late.0, late.1);
    ordered_from_drives(g_early, g_late)
}

/// Same as [`ordered_segment_integral`] from precomputed drive integrals.
pub fn ordered_from_drives(g_early: Complex64, g_late: Complex64) -> f64 {
    (g_early.conj() * g_late).im
}

/// ∫_a^{a+len} dt' ∫_a^{t'} dt sin(μt) sin(μt') sin(ω(t'−t)).
pub fn triangle_segment_integral(mu: f64, omega: f64, start: f64, len: f64) -> f64 {
    let i = Complex64::i();
    // sin(μt)e^{iωt} = Σ_q c_q e^{iν_q t}, c₊ = 1/(2i), c₋ = −1/(2i).
    let nus = [omega + mu, omega - mu];
    let coeffs = [Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)];
    let zero = Complex64::new(0.0, 0.0);
    let mut total = zero;
    for (p, &nu_p) in nus.iter().enumerate() {
        for (q, &nu_q) in nus.iter().enumerate() {
            let weight = coeffs[p].conj() * coeffs[q];
            let shift = (i * (nu_q - nu_p) * start).exp();
            let b = i * nu_q * len;
            let ab = i * (nu_q - nu_p) * len;
            total += weight * shift * exp_divdiff2(zero, b, ab);
        }
    }
    total.im * len * len
}
