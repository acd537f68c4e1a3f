//! Independent slow-path reference implementations used for cross-checks.
//!
//! Everything here evaluates the literal definitions — triple loops, fully
//! materialized matrices, grid searches — and shares no formula code with
//! the production paths it is compared against. These functions ship in
//! the library so the `verify` command can self-check an installation on
//! small scenes; none of them are meant to be fast.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scene::{Geometry, SceneConfig};
use crate::solver::{PhaseVector, SignalBlock};

const C: f64 = 299_792_458.0;

fn unit_direction(theta: f64, phi: f64) -> [f64; 3] {
    [
        theta.cos() * phi.cos(),
        theta.cos() * phi.sin(),
        theta.sin(),
    ]
}

fn cis(phase: f64) -> Complex64 {
    Complex64::new(phase.cos(), phase.sin())
}

/// Band-limited spectrum of source `j` at baseband frequency `f`:
/// `(1/W)·Σ_n s_j(n/W)·e^{-2πi n f/W}`, n = 1..N.
fn source_spectrum(s: &SignalBlock, j: usize, f: f64, bandwidth: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 1..=s.samples_per_source() {
        acc += s.at(j, n - 1) * cis(-2.0 * PI * n as f64 * f / bandwidth);
    }
    acc / bandwidth
}

/// Amplitude beampattern evaluated from the literal definitions: steering
/// phases, per-path channel gains and the band-limited source spectra,
/// without any factorization. Reference for the production fast path.
pub fn direct_beampattern(
    s: &SignalBlock,
    x: &PhaseVector,
    cfg: &SceneConfig,
    geom: &Geometry,
    f: f64,
    theta: f64,
    phi: f64,
) -> f64 {
    let u = unit_direction(theta, phi);
    let fc = f + cfg.carrier_hz;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, p) in geom.elements().iter().enumerate() {
        let tau = -(u[0] * p.x + u[1] * p.y + u[2] * p.z) / C;
        let v_i = cis(2.0 * PI * fc * tau);
        let mut inner = Complex64::new(0.0, 0.0);
        for (j, q) in geom.feeders().iter().enumerate() {
            let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
            let gain = cis(-2.0 * PI * fc * d / C) / ((4.0 * PI).sqrt() * d);
            inner += gain * source_spectrum(s, j, f, cfg.bandwidth_hz);
        }
        acc += v_i.conj() * x.as_slice()[i] * inner;
    }
    acc.norm() / cfg.duration_s.sqrt()
}

/// Spectrum of the low-pass equivalent signal observed at range `r` in
/// direction `(θ, φ)`: the literal double sum over elements and feeders
/// with the common spherical-spreading factor and range phase in front,
/// exactly as the observed-field expression factors them.
pub fn observed_spectrum(
    s: &SignalBlock,
    x: &PhaseVector,
    cfg: &SceneConfig,
    geom: &Geometry,
    f: f64,
    range: f64,
    theta: f64,
    phi: f64,
) -> Result<Complex64> {
    if !(range > 0.0) {
        return Err(Error::InvalidScene(format!("range must be positive, got {range}")));
    }
    let u = unit_direction(theta, phi);
    let fc = f + cfg.carrier_hz;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, p) in geom.elements().iter().enumerate() {
        let tau = -(u[0] * p.x + u[1] * p.y + u[2] * p.z) / C;
        let mut inner = Complex64::new(0.0, 0.0);
        for (j, q) in geom.feeders().iter().enumerate() {
            let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
            inner += source_spectrum(s, j, f, cfg.bandwidth_hz) * cis(-2.0 * PI * fc * d / C)
                / ((4.0 * PI).sqrt() * d);
        }
        acc += cis(-2.0 * PI * fc * tau) * x.as_slice()[i] * inner;
    }
    let prefactor = cis(-2.0 * PI * fc * range / C) / ((4.0 * PI).sqrt() * range);
    Ok(prefactor * acc)
}

/// Steering vector from the literal per-element delay formula.
pub fn literal_steering(cfg: &SceneConfig, geom: &Geometry, f: f64, theta: f64, phi: f64) -> DVector<Complex64> {
    let u = unit_direction(theta, phi);
    let fc = f + cfg.carrier_hz;
    DVector::from_iterator(
        geom.element_count(),
        geom.elements().iter().map(|p| {
            let tau = -(u[0] * p.x + u[1] * p.y + u[2] * p.z) / C;
            cis(2.0 * PI * fc * tau)
        }),
    )
}

/// Fully materialized M×JN response matrix mapping stacked samples to the
/// element-level spectrum at `(f, θ, φ)`; the literal Kronecker product
/// form that the production operators never build.
pub fn literal_q_matrix(cfg: &SceneConfig, geom: &Geometry, f: f64) -> DMatrix<Complex64> {
    let m = geom.element_count();
    let j = geom.feeder_count();
    let n = cfg.sample_count();
    let fc = f + cfg.carrier_hz;
    let w = cfg.bandwidth_hz;
    let scale = 1.0 / (w * cfg.duration_s.sqrt());
    let mut gains = DMatrix::<Complex64>::zeros(m, j);
    for (i, p) in geom.elements().iter().enumerate() {
        for (jj, q) in geom.feeders().iter().enumerate() {
            let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
            gains[(i, jj)] = cis(-2.0 * PI * fc * d / C) / ((4.0 * PI).sqrt() * d);
        }
    }
    let mut out = DMatrix::<Complex64>::zeros(m, j * n);
    for nn in 1..=n {
        let e = cis(-2.0 * PI * nn as f64 * f / w);
        for jj in 0..j {
            for i in 0..m {
                out[(i, (nn - 1) * j + jj)] = scale * gains[(i, jj)] * e;
            }
        }
    }
    out
}

/// Global minimizer of `s^H A s - 2 Re(s^H b)` over `‖s‖² ≤ radius_sq`,
/// by a Lagrange-multiplier bracket scan refined with bisection; every
/// candidate is produced by a dense linear solve, nothing is shared with
/// the production eigendecomposition path. Intended for dimensions ≤ 4.
pub fn brute_ball_qp(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    radius_sq: f64,
) -> Result<DVector<Complex64>> {
    let dim = a.nrows();
    if dim > 8 {
        return Err(Error::Dimension { what: "brute ball QP dimension", expected: 8, got: dim });
    }
    if !(radius_sq > 0.0) {
        return Err(Error::InvalidOptions("radius must be positive".into()));
    }
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(DVector::zeros(dim));
    }
    let solve = |lam: f64| -> Option<DVector<Complex64>> {
        let mut shifted = a.clone();
        for i in 0..dim {
            shifted[(i, i)] += Complex64::new(lam, 0.0);
        }
        shifted.lu().solve(b)
    };
    // Gershgorin bound keeps the bracket safely above every eigenvalue.
    let gersh = (0..dim)
        .map(|i| (0..dim).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let hi = gersh + bnorm / radius_sq.sqrt() + 1.0;
    let lo = hi * 1e-12;
    let norm_sq_at = |lam: f64| solve(lam).map(|s| s.norm_squared());
    if let Some(n0) = norm_sq_at(lo) {
        if n0 <= radius_sq {
            // effectively interior
            return Ok(solve(lo).unwrap());
        }
    }
    // scan for a bracket where the norm drops below the radius
    let grid = 4096;
    let mut lam_lo = lo;
    let mut lam_hi = hi;
    for g in 1..=grid {
        let lam = lo + (hi - lo) * g as f64 / grid as f64;
        match norm_sq_at(lam) {
            Some(nsq) if nsq <= radius_sq => {
                lam_hi = lam;
                break;
            }
            _ => lam_lo = lam,
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lam_lo + lam_hi);
        match norm_sq_at(mid) {
            Some(nsq) if nsq <= radius_sq => lam_hi = mid,
            _ => lam_lo = mid,
        }
    }
    Ok(solve(lam_hi).unwrap())
}

/// Exhaustive phase-grid minimization of `z^H B z` over unit-modulus `z`
/// with the last entry pinned to 1 (the quadratic form is invariant to a
/// common phase, so nothing is lost). Exponential in the dimension;
/// rejected above 3.
pub fn brute_unit_modulus(
    b: &DMatrix<Complex64>,
    points_per_phase: usize,
) -> Result<(Vec<Complex64>, f64)> {
    let dim = b.nrows();
    if dim > 3 {
        return Err(Error::Dimension { what: "brute unit-modulus dimension", expected: 3, got: dim });
    }
    if dim == 0 || points_per_phase == 0 {
        return Err(Error::InvalidOptions("empty problem or phase grid".into()));
    }
    let free = dim - 1;
    let quad = |z: &[Complex64]| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += z[i].conj() * b[(i, j)] * z[j];
            }
        }
        acc.re
    };
    let mut best = vec![Complex64::new(1.0, 0.0); dim];
    let mut best_obj = quad(&best);
    let mut counters = vec![0usize; free];
    loop {
        let mut z = Vec::with_capacity(dim);
        for &t in &counters {
            z.push(cis(2.0 * PI * t as f64 / points_per_phase as f64));
        }
        z.push(Complex64::new(1.0, 0.0));
        let obj = quad(&z);
        if obj < best_obj {
            best_obj = obj;
            best = z;
        }
        // odometer over the free phases
        let mut idx = 0;
        loop {
            if idx == free {
                return Ok((best, best_obj));
            }
            counters[idx] += 1;
            if counters[idx] < points_per_phase {
                break;
            }
            counters[idx] = 0;
            idx += 1;
        }
        if free == 0 {
            return Ok((best, best_obj));
        }
    }
}
