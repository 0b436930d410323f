//! Closed-form self-similar algebra.
//!
//! Separable solutions `u = phi(t) psi(x)` have
//! `phi(t) = (phi0^(1 - n alpha) + t)^(1/(1 - n alpha))`. The comparison
//! function `F(s, t) = ((1 + t)/(s + t))^gamma` measures how far the time
//! factor started at `s = phi0^(1 - n alpha)` is from the normalised one, and
//! obeys four elementary bounds that drive the convergence rate.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::params::FlowParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarLaw {
    phi0: f64,
    params: FlowParams,
}

impl SelfSimilarLaw {
    pub fn new(phi0: f64, params: FlowParams) -> Result<Self> {
        if !(phi0.is_finite() && phi0 > 0.0) {
            return Err(Error::InvalidOption(alloc::format!(
                "phi0 = {phi0} must be positive"
            )));
        }
        Ok(Self { phi0, params })
    }

    /// `phi0 = 1`, the normalisation under which `phi(t) = (1 + t)^lambda`.
    pub fn normalised(params: FlowParams) -> Self {
        Self { phi0: 1.0, params }
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    /// `phi0^(1 - n alpha)`, the time shift of this law.
    pub fn shift(&self) -> f64 {
        math::powf(self.phi0, self.params.one_minus_n_alpha())
    }

    pub fn phi(&self, t: f64) -> f64 {
        math::powf(self.shift() + t, self.params.lambda())
    }

    /// `lambda phi^(n alpha)`, the right-hand side of the ODE `phi` solves.
    pub fn phi_rate(&self, t: f64) -> f64 {
        self.params.lambda() * math::powf(self.phi(t), self.params.n_alpha())
    }
}

pub fn phi(law: &SelfSimilarLaw, t: f64) -> f64 {
    law.phi(t)
}

/// Multiplier taking the normalised solution to the one with initial factor
/// `c phi0`: `((1 + t)/((c phi0)^(1 - n alpha) + t))^gamma`.
pub fn rescale_multiplier(t: f64, c: f64, phi0: f64, params: &FlowParams) -> f64 {
    let shift = math::powf(c * phi0, params.one_minus_n_alpha());
    math::powf((1.0 + t) / (shift + t), params.gamma())
}

pub fn rescale_identity(u_value: f64, t: f64, c: f64, phi0: f64, params: &FlowParams) -> f64 {
    u_value * rescale_multiplier(t, c, phi0, params)
}

/// `ln F(s, t)`, accurate for `s` near 1 and finite even when `F` overflows.
pub fn ln_f(s: f64, t: f64, params: &FlowParams) -> f64 {
    params.gamma() * math::ln_1p((1.0 - s) / (s + t))
}

#[allow(non_snake_case)]
pub fn F(s: f64, t: f64, params: &FlowParams) -> f64 {
    math::exp(ln_f(s, t, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FCase {
    /// Upper bound `1 + gamma (1 - s)/(s (1 + t))`, `s <= 1`, `alpha >= 2/n`.
    F1,
    /// Upper bound `1 + gamma s^-gamma (1 - s)/(1 + t)`, `s <= 1`, `alpha <= 2/n`.
    F2,
    /// Lower bound `1 - (s - 1)/(1 + t)`, `s >= 1`, `alpha >= 2/n`.
    F3,
    /// Lower bound `1 - gamma (s - 1)/(1 + t)`, `s >= 1`, `alpha <= 2/n`.
    F4,
}

impl FCase {
    pub fn is_upper(self) -> bool {
        matches!(self, FCase::F1 | FCase::F2)
    }

    pub fn label(self) -> &'static str {
        match self {
            FCase::F1 => "F1",
            FCase::F2 => "F2",
            FCase::F3 => "F3",
            FCase::F4 => "F4",
        }
    }
}

impl fmt::Display for FCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One bound evaluated at `(s, t)`.
///
/// `margin` is non-negative exactly when the bound holds. Upper bounds are
/// compared in log space (`ln bound - ln F`) because `F` and the bounds
/// overflow as `alpha -> 1/n`; lower bounds use `F - bound` since `F <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaBound {
    pub case: FCase,
    pub bound: f64,
    pub margin: f64,
}

/// Relative rounding allowance when deciding whether a margin is a violation.
pub const MARGIN_ROUNDING: f64 = 1e-12;

impl LemmaBound {
    /// Holds up to floating-point rounding of the compared quantities.
    pub fn holds(&self, ln_f: f64) -> bool {
        let scale = if self.case.is_upper() {
            1.0 + math::abs(ln_f)
        } else {
            1.0
        };
        self.margin >= -MARGIN_ROUNDING * scale
    }
}

/// `ln(1 + e^x)` without overflow.
fn ln_1p_exp(x: f64) -> f64 {
    if x > 30.0 {
        x + math::ln_1p(math::exp(-x))
    } else {
        math::ln_1p(math::exp(x))
    }
}

/// Every bound whose hypotheses hold at `(s, alpha)`. At `alpha = 2/n` both
/// branch pairs apply, and at `s = 1` all four do.
pub fn applicable_bounds(s: f64, t: f64, params: &FlowParams) -> Vec<LemmaBound> {
    let g = params.gamma();
    let lnf = ln_f(s, t, params);
    let mut out = Vec::with_capacity(4);
    if s <= 1.0 {
        // ln X for the additive term X of each upper bound.
        let common = math::ln(g) + math::ln(1.0 - s) - math::ln_1p(t);
        if params.alpha_at_least_two_over_n() {
            let ln_b = ln_1p_exp(common - math::ln(s));
            out.push(LemmaBound {
                case: FCase::F1,
                bound: math::exp(ln_b),
                margin: ln_b - lnf,
            });
        }
        if params.alpha_at_most_two_over_n() {
            let ln_b = ln_1p_exp(common - g * math::ln(s));
            out.push(LemmaBound {
                case: FCase::F2,
                bound: math::exp(ln_b),
                margin: ln_b - lnf,
            });
        }
    }
    if s >= 1.0 {
        let f = math::exp(lnf);
        if params.alpha_at_least_two_over_n() {
            let b = 1.0 - (s - 1.0) / (1.0 + t);
            out.push(LemmaBound {
                case: FCase::F3,
                bound: b,
                margin: f - b,
            });
        }
        if params.alpha_at_most_two_over_n() {
            let b = 1.0 - g * (s - 1.0) / (1.0 + t);
            out.push(LemmaBound {
                case: FCase::F4,
                bound: b,
                margin: f - b,
            });
        }
    }
    out
}

/// The first applicable bound (F1 or F2 for `s <= 1`, F3 or F4 otherwise).
pub fn lemma_f_bounds(s: f64, t: f64, params: &FlowParams) -> Result<LemmaBound> {
    applicable_bounds(s, t, params)
        .into_iter()
        .next()
        .ok_or(Error::CaseUndefined {
            s,
            alpha: params.alpha(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaRecord {
    pub s: f64,
    pub t: f64,
    pub alpha: f64,
    pub f: f64,
    pub bound: LemmaBound,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepRange {
    /// `s` in `(0, 10]`, `t` in `[0, 1000]`, `alpha` in `(1/n, 10]`.
    Full,
    /// As `Full` with `s = 1`.
    UnitS,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub records: Vec<LemmaRecord>,
    pub samples: usize,
    pub violations: usize,
    /// Most negative margin (0 when none is negative).
    pub worst_margin: f64,
    /// Largest `|margin|` over all records.
    pub max_abs_margin: f64,
}

/// Randomised soundness sweep. Each sample contributes one record per
/// applicable bound.
pub fn lemma_sweep<R: Rng + ?Sized>(
    rng: &mut R,
    n: u32,
    samples: usize,
    range: SweepRange,
) -> Result<SweepReport> {
    let lo = 1.0 / f64::from(n);
    let mut records = Vec::with_capacity(samples);
    let (mut violations, mut worst, mut max_abs) = (0, 0.0f64, 0.0f64);
    for _ in 0..samples {
        // 1 - u with u in [0, 1) lands in the half-open ranges (0, 1].
        let s = match range {
            SweepRange::Full => 10.0 * (1.0 - rng.random::<f64>()),
            SweepRange::UnitS => 1.0,
        };
        let t = 1000.0 * rng.random::<f64>();
        let alpha = lo + (10.0 - lo) * (1.0 - rng.random::<f64>());
        let params = match FlowParams::new(n, alpha, 0.0) {
            Ok(p) => p,
            // alpha rounded onto 1/n.
            Err(_) => continue,
        };
        let lnf = ln_f(s, t, &params);
        let bounds = applicable_bounds(s, t, &params);
        if bounds.is_empty() {
            return Err(Error::CaseUndefined { s, alpha });
        }
        for bound in bounds {
            let holds = bound.holds(lnf);
            violations += usize::from(!holds);
            worst = worst.min(bound.margin);
            max_abs = max_abs.max(math::abs(bound.margin));
            records.push(LemmaRecord {
                s,
                t,
                alpha,
                f: math::exp(lnf),
                bound,
                holds,
            });
        }
    }
    Ok(SweepReport {
        records,
        samples,
        violations,
        worst_margin: worst,
        max_abs_margin: max_abs,
    })
}
