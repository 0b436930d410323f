//! Radial profile on a disc by shooting.
//!
//! For `psi(x) = psi(|x|)` in the plane the profile equation becomes
//! `psi'' psi' / r = (-psi / (2 alpha - 1))^(1/alpha)` with `psi'(0) = 0`.
//! The depth `a = -psi(0)` is found by bisection so that `psi(radius) = 0`.
//! This is an independent check on the two-dimensional solver.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::params::FlowParams;
use crate::profile::abp_value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOptions {
    /// Upper limit on the RK4 step.
    pub max_step: f64,
    /// Bisection stops when the bracket's relative width drops below this.
    pub rel_tol: f64,
    pub max_bisections: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            max_step: 1e-4,
            rel_tol: 1e-15,
            max_bisections: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    /// `a = -psi(0) = sup |psi|`.
    pub depth: f64,
    pub radius: f64,
    /// Uniform samples `(r, psi, psi')` from `r = 0` to `r = radius`.
    pub samples: Vec<(f64, f64, f64)>,
}

impl RadialProfile {
    /// Cubic Hermite interpolation of `psi`; zero outside the disc.
    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        let h = self.samples[1].0;
        let k = ((r / h) as usize).min(self.samples.len() - 2);
        let (r0, y0, d0) = self.samples[k];
        let (_, y1, d1) = self.samples[k + 1];
        let s = (r - r0) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * d1
    }

    /// Slope at the boundary, `psi'(radius)`, i.e. the outward normal derivative.
    pub fn boundary_slope(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.2)
    }
}

struct Shooter {
    inv_alpha: f64,
    inv_gap: f64,
    alpha: f64,
    gap: f64,
    n_steps: usize,
    h: f64,
}

impl Shooter {
    #[inline]
    fn rhs(&self, psi: f64) -> f64 {
        // Clamped so that overshooting past psi = 0 continues linearly.
        if psi >= 0.0 {
            0.0
        } else {
            math::powf(-psi * self.inv_gap, self.inv_alpha)
        }
    }

    #[inline]
    fn deriv(&self, r: f64, psi: f64, p: f64) -> (f64, f64) {
        (p, r * self.rhs(psi) / p)
    }

    /// Series start at `r = h`: `psi = -a + c r^2/2 - c^2 r^4 / (32 alpha a)`.
    fn start(&self, a: f64) -> (f64, f64) {
        let c = math::powf(a / self.gap, 0.5 * self.inv_alpha);
        let r = self.h;
        let psi = -a + 0.5 * c * r * r - c * c * r * r * r * r / (32.0 * self.alpha * a);
        let p = c * r * (1.0 - c * r * r / (8.0 * self.alpha * a));
        (psi, p)
    }

    fn integrate(&self, a: f64, mut record: Option<&mut Vec<(f64, f64, f64)>>) -> f64 {
        let h = self.h;
        if let Some(rec) = record.as_deref_mut() {
            rec.push((0.0, -a, 0.0));
        }
        let (mut psi, mut p) = self.start(a);
        for k in 1..self.n_steps {
            if let Some(rec) = record.as_deref_mut() {
                rec.push((h * k as f64, psi, p));
            }
            let r = h * k as f64;
            let (k1a, k1b) = self.deriv(r, psi, p);
            let (k2a, k2b) = self.deriv(r + 0.5 * h, psi + 0.5 * h * k1a, p + 0.5 * h * k1b);
            let (k3a, k3b) = self.deriv(r + 0.5 * h, psi + 0.5 * h * k2a, p + 0.5 * h * k2b);
            let (k4a, k4b) = self.deriv(r + h, psi + h * k3a, p + h * k3b);
            psi += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            p += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        }
        if let Some(rec) = record {
            rec.push((h * self.n_steps as f64, psi, p));
        }
        psi
    }
}

/// Shoot for the radial profile of a disc of the given radius.
pub fn radial_oracle(
    params: &FlowParams,
    radius: f64,
    opts: &RadialOptions,
) -> Result<RadialProfile> {
    params.require_planar()?;
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "radius = {radius} must be positive"
        )));
    }
    if !(opts.max_step > 0.0 && opts.rel_tol > 0.0) {
        return Err(Error::InvalidOption(
            "radial step and tolerance must be positive".into(),
        ));
    }
    let n_steps = math::ceil(radius / opts.max_step).max(8.0) as usize;
    let shooter = Shooter {
        inv_alpha: 1.0 / params.alpha(),
        inv_gap: 1.0 / params.gap(),
        alpha: params.alpha(),
        gap: params.gap(),
        n_steps,
        h: radius / n_steps as f64,
    };
    let pi = core::f64::consts::PI;
    let (mut lo, mut hi) = (1e-8, abp_value(params, pi * radius * radius, 2.0 * radius));
    // Too shallow reaches zero before the rim; too deep is still negative there.
    let (f_lo, f_hi) = (shooter.integrate(lo, None), shooter.integrate(hi, None));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::ShootingFailed(format!(
            "no sign change on [{lo:e}, {hi:e}]: psi(R) = {f_lo:e}, {f_hi:e}"
        )));
    }
    for _ in 0..opts.max_bisections {
        if hi - lo <= opts.rel_tol * hi {
            break;
        }
        let mid = math::sqrt(lo * hi);
        // The geometric midpoint can stall once lo and hi are adjacent floats.
        let mid = if mid <= lo || mid >= hi {
            0.5 * (lo + hi)
        } else {
            mid
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if shooter.integrate(mid, None) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let depth = 0.5 * (lo + hi);
    let mut samples = Vec::with_capacity(n_steps + 1);
    shooter.integrate(depth, Some(&mut samples));
    Ok(RadialProfile {
        depth,
        radius,
        samples,
    })
}
