//! Special functions and spherical geometry shared by every estimator:
//! spherical Bessel functions, orthonormal spherical harmonics, the
//! zeroth spherical Bessel function of a complex squared argument,
//! the von Mises–Fisher normalization and quasi-uniform direction sets.
//!
//! All functions here are pure and reentrant.

use crate::error::{Error, Result};
use crate::Point3;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Highest supported spherical Bessel / harmonic order.
pub const MAX_ORDER: usize = 60;

/// Unit vector on the sphere. Construction normalizes, so the Euclidean
/// norm is 1 to within 1e-12 by invariant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction(Point3);

impl Direction {
    /// Normalizes `v` into a direction. Fails for zero or non-finite input.
    pub fn new(v: Point3) -> Result<Self> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::domain("direction components must be finite"));
        }
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(Error::domain("cannot normalize a near-zero vector"));
        }
        Ok(Direction(v / norm))
    }

    pub fn from_components(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Point3::new(x, y, z))
    }

    /// +z axis.
    pub fn zenith() -> Self {
        Direction(Point3::new(0.0, 0.0, 1.0))
    }

    pub fn as_vector(&self) -> &Point3 {
        &self.0
    }

    pub fn dot(&self, v: &Point3) -> f64 {
        self.0.dot(v)
    }
}

/// Order/degree pair (ν, μ) of a spherical harmonic, with |μ| ≤ ν.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphericalHarmonicIndex {
    order: usize,
    degree: i64,
}

impl SphericalHarmonicIndex {
    pub fn new(order: usize, degree: i64) -> Result<Self> {
        if degree.unsigned_abs() as usize > order {
            return Err(Error::domain(format!(
                "harmonic degree |{degree}| exceeds order {order}"
            )));
        }
        if order > MAX_ORDER {
            return Err(Error::domain(format!(
                "harmonic order {order} exceeds cap {MAX_ORDER}"
            )));
        }
        Ok(SphericalHarmonicIndex { order, degree })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    /// All (ν, μ) with ν ≤ `max_order`, in (0,0), (1,-1), (1,0), (1,1), ... order.
    pub fn up_to(max_order: usize) -> impl Iterator<Item = SphericalHarmonicIndex> {
        (0..=max_order).flat_map(|nu| {
            (-(nu as i64)..=nu as i64).map(move |mu| SphericalHarmonicIndex {
                order: nu,
                degree: mu,
            })
        })
    }
}

/// Spherical Bessel function of the first kind, j_ν(x), for x ≥ 0 and ν ≤ 60.
///
/// Upward recurrence where it is stable (ν < x), otherwise Miller's downward
/// recurrence normalized by j0.
pub fn sph_bessel_j(order: usize, x: f64) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::domain(format!(
            "spherical Bessel order {order} exceeds cap {MAX_ORDER}"
        )));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "spherical Bessel argument must be finite and nonnegative, got {x}"
        )));
    }
    Ok(sph_bessel_j_unchecked(order, x))
}

fn sph_bessel_j_unchecked(order: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    let j0 = x.sin() / x;
    if order == 0 {
        return j0;
    }
    let j1 = (x.sin() - x * x.cos()) / (x * x);
    if order == 1 {
        return j1;
    }
    if (order as f64) < x {
        // upward: j_{n+1} = (2n+1)/x j_n - j_{n-1}
        let mut prev = j0;
        let mut cur = j1;
        for n in 1..order {
            let next = (2 * n + 1) as f64 / x * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    } else {
        // Miller's downward recurrence with a start well above the turning
        // point; the trial sequence is rescaled on overflow and pinned to j0.
        let start = order + 32;
        let mut fk1 = 0.0_f64; // f_{n+1}
        let mut fk = 1e-30_f64; // f_n
        let mut f_target = 0.0_f64;
        for n in (1..=start).rev() {
            let fk_1 = (2 * n + 1) as f64 / x * fk - fk1;
            fk1 = fk;
            fk = fk_1;
            if n - 1 == order {
                f_target = fk;
            }
            if fk.abs() > 1e250 {
                fk *= 1e-250;
                fk1 *= 1e-250;
                f_target *= 1e-250;
            }
        }
        // fk now holds the trial value at order 0
        f_target * (j0 / fk)
    }
}

/// j0 evaluated at the square root of a (possibly complex) squared argument:
/// sin(√z²)/√z², branch independent because j0 is even.
///
/// For |z²| < 1e-4 the Taylor series in z² is used instead.
pub fn j0_complex(z2: Complex64) -> Complex64 {
    if z2.norm() < 1e-4 {
        let z4 = z2 * z2;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z4 / 120.0 - z4 * z2 / 5040.0
    } else {
        let w = z2.sqrt();
        w.sin() / w
    }
}

/// Normalization factor of the von Mises–Fisher weighting: 1 at β = 0,
/// sinh(β)/β otherwise, with a series guard below 1e-6 for continuity.
pub fn vmf_normalization(beta: f64) -> Result<f64> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::domain(format!(
            "vMF sharpness must be finite and nonnegative, got {beta}"
        )));
    }
    if beta < 1e-6 {
        let b2 = beta * beta;
        Ok(1.0 + b2 / 6.0 + b2 * b2 / 120.0)
    } else {
        Ok(beta.sinh() / beta)
    }
}

/// Complex orthonormal spherical harmonic Y_{ν,μ} with Condon–Shortley
/// phase, evaluated at a unit direction (azimuth/zenith taken internally).
pub fn sph_harmonic(idx: SphericalHarmonicIndex, dir: Direction) -> Complex64 {
    let v = dir.as_vector();
    let cos_theta = v.z.clamp(-1.0, 1.0);
    let sin_theta = (v.x * v.x + v.y * v.y).sqrt();
    let phi = v.y.atan2(v.x);

    let m = idx.degree.unsigned_abs() as usize;
    let p = normalized_assoc_legendre(idx.order, m, cos_theta, sin_theta);
    let phase = Complex64::from_polar(1.0, m as f64 * phi);
    if idx.degree >= 0 {
        p * phase
    } else {
        // Y_{ν,-μ} = (-1)^μ conj(Y_{ν,μ})
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * p * phase.conj()
    }
}

/// Associated Legendre P_ν^m(cosθ) carrying the full orthonormal spherical
/// harmonic normalization sqrt((2ν+1)/(4π)·(ν−m)!/(ν+m)!) and the
/// Condon–Shortley sign, by the standard stable column recurrence.
fn normalized_assoc_legendre(order: usize, m: usize, cos_theta: f64, sin_theta: f64) -> f64 {
    debug_assert!(m <= order);
    // seed: p_{0,0}, then diagonal up to p_{m,m}
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        pmm *= -((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * sin_theta;
    }
    if order == m {
        return pmm;
    }
    let mut p_prev = pmm; // p_{m,m}
    let mut p_cur = ((2 * m + 3) as f64).sqrt() * cos_theta * pmm; // p_{m+1,m}
    if order == m + 1 {
        return p_cur;
    }
    for nu in (m + 2)..=order {
        let nu_f = nu as f64;
        let m_f = m as f64;
        let alpha = (((2.0 * nu_f - 1.0) * (2.0 * nu_f + 1.0)) / ((nu_f - m_f) * (nu_f + m_f)))
            .sqrt();
        let beta = (((2.0 * nu_f + 1.0) * (nu_f + m_f - 1.0) * (nu_f - m_f - 1.0))
            / ((nu_f - m_f) * (nu_f + m_f) * (2.0 * nu_f - 3.0)))
            .sqrt();
        let p_next = alpha * cos_theta * p_cur - beta * p_prev;
        p_prev = p_cur;
        p_cur = p_next;
    }
    p_cur
}

/// `n` quasi-uniform unit vectors by the Fibonacci spiral lattice.
/// Deterministic for a given `n`.
pub fn fibonacci_directions(n: usize) -> Result<Vec<Direction>> {
    if n == 0 {
        return Err(Error::domain("direction count must be positive"));
    }
    let golden_angle = PI * (3.0 - 5.0_f64.sqrt());
    let mut dirs = Vec::with_capacity(n);
    for i in 0..n {
        let z = 1.0 - (2 * i + 1) as f64 / n as f64;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * i as f64;
        dirs.push(Direction(Point3::new(
            rho * phi.cos(),
            rho * phi.sin(),
            z,
        )));
    }
    Ok(dirs)
}

/// `n` quasi-uniform points filling a ball, from the spiral lattice paired
/// with a cube-root radial profile. Deterministic for given inputs.
pub fn fibonacci_ball(n: usize, center: Point3, radius: f64) -> Result<Vec<Point3>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::domain("ball radius must be positive and finite"));
    }
    let dirs = fibonacci_directions(n)?;
    Ok(dirs
        .iter()
        .enumerate()
        .map(|(i, dir)| {
            let r = radius * (((i as f64) + 0.5) / n as f64).cbrt();
            center + r * dir.as_vector()
        })
        .collect())
}
