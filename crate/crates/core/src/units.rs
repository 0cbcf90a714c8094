//! Physical constants and the unit conventions used in configuration files.
//!
//! Files quote cyclic frequencies in MHz (or kHz for Rabi frequencies), times
//! in µs and angles in units of π. Everything is converted to SI angular
//! quantities once, at load time.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Cyclic MHz to angular rad/s.
pub fn mhz_to_rad(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz * 1e6
}

pub fn rad_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e6)
}

/// Cyclic kHz to angular rad/s.
pub fn khz_to_rad(f_khz: f64) -> f64 {
    2.0 * PI * f_khz * 1e3
}

pub fn rad_to_khz(w: f64) -> f64 {
    w / (2.0 * PI * 1e3)
}

pub fn us_to_s(t_us: f64) -> f64 {
    t_us * 1e-6
}

pub fn s_to_us(t: f64) -> f64 {
    t * 1e6
}
