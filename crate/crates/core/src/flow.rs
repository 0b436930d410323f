//! Explicit time stepping of `u_t = det(D^2 u)^alpha / (1 + |grad u|^2)^(alpha beta)`
//! and the self-similar sub/supersolution envelopes.
//!
//! Steps are forward Euler with `dt = cfl / max(slope * g * stiffness)`,
//! where `slope` is the derivative of `det -> det^alpha`, `g` the gradient
//! factor and `stiffness` the diagonal weight of the discrete determinant.
//! With a monotone scheme and `cfl <= 1` an Euler step is order preserving
//! for `beta = 0`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::analysis::{
    natural_symmetry, normalized_deviation_range, symmetry_defect, RateSeries, Sample,
};
use crate::domain::{Domain, DomainKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::math;
use crate::operator::{det_power_and_slope, grad_norm_sq, gradient_factor, local, OperatorOptions};
use crate::params::FlowParams;
use crate::selfsim::SelfSimilarLaw;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub operator: OperatorOptions,
    pub cfl: f64,
    pub dt_max: f64,
    /// A stability-limited step smaller than this is an error.
    pub dt_min: f64,
    /// Largest tolerated convexity defect before projection.
    pub convexity_tol: f64,
    /// Add multiples of the domain bowl when the defect exceeds the tolerance.
    pub project_convexity: bool,
    /// Keep a copy of `u` at every sample time.
    pub record_fields: bool,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            operator: OperatorOptions::default(),
            cfl: 0.9,
            dt_max: 0.05,
            dt_min: 1e-14,
            convexity_tol: 1e-8,
            project_convexity: true,
            record_fields: false,
            max_steps: 50_000_000,
        }
    }
}

impl FlowOptions {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.cfl) && self.cfl <= 1.0) {
            return Err(Error::InvalidOption(format!(
                "cfl = {} must lie in (0, 1]",
                self.cfl
            )));
        }
        if !(self.dt_max > 0.0 && pos(self.dt_min) && self.dt_min <= self.dt_max) {
            return Err(Error::InvalidOption(format!(
                "need 0 < dt_min = {} <= dt_max = {}",
                self.dt_min, self.dt_max
            )));
        }
        if !(self.convexity_tol >= 0.0 && self.convexity_tol.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "convexity_tol = {} must be non-negative",
                self.convexity_tol
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidOption("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// `inf (1 + |grad u|^2)^(-alpha beta)` over interior nodes.
pub fn speed_factor_inf(u: &ScalarField, params: &FlowParams, opts: &OperatorOptions) -> f64 {
    let g2 = grad_norm_sq(u, opts).interior_values().fold(0.0, f64::max);
    gradient_factor(g2, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub u: ScalarField,
    pub t: f64,
    pub step_count: usize,
    /// Speed factor infimum of the initial data, frozen.
    pub g: f64,
    /// The same functional of the current `u`.
    pub g_current: f64,
    pub dt_last: f64,
    /// Largest step taken so far.
    pub dt_largest: f64,
    /// Total convexity correction added so far.
    pub injected_mu: f64,
}

impl EvolutionState {
    /// Starts at `u0.time()`, or at 0 for a static field.
    pub fn new(u0: ScalarField, params: &FlowParams, opts: &FlowOptions) -> Result<Self> {
        params.require_planar()?;
        opts.validate()?;
        let t = u0.time().max(0.0);
        let mut u = u0;
        u.set_time(t);
        u.enforce_slaves();
        let g = speed_factor_inf(&u, params, &opts.operator);
        Ok(Self {
            u,
            t,
            step_count: 0,
            g,
            g_current: g,
            dt_last: 0.0,
            dt_largest: 0.0,
            injected_mu: 0.0,
        })
    }

    fn refresh(&mut self, params: &FlowParams, opts: &OperatorOptions) {
        self.u.set_time(self.t);
        self.g_current = speed_factor_inf(&self.u, params, opts);
    }
}

/// Reusable buffers for repeated steps on one domain.
pub struct Stepper {
    params: FlowParams,
    opts: FlowOptions,
    domain: Arc<Domain>,
    speed: Vec<f64>,
    bowl: Vec<f64>,
    /// Smallest Hessian eigenvalue of the bowl.
    bowl_curvature: f64,
}

impl Stepper {
    pub fn new(domain: &Arc<Domain>, params: &FlowParams, opts: &FlowOptions) -> Result<Self> {
        params.require_planar()?;
        opts.validate()?;
        let kind = domain.kind();
        let bowl = ScalarField::from_fn(domain, |x, y| kind.bowl(x, y));
        let mut bowl = bowl.values().to_vec();
        domain.apply_slaves(&mut bowl);
        let (a, b) = kind.half_extents();
        let m = a.min(b);
        Ok(Self {
            params: *params,
            opts: *opts,
            domain: Arc::clone(domain),
            speed: Vec::with_capacity(domain.active().len()),
            bowl,
            bowl_curvature: m * m / (a.max(b) * a.max(b)),
        })
    }

    /// Speeds into the scratch buffer; returns `(max rate, convexity defect)`.
    fn speeds(&mut self, values: &[f64]) -> (f64, f64) {
        let nodes = self.domain.nodes();
        let (alpha, floor) = (self.params.alpha(), self.opts.operator.det_floor);
        let scheme = self.opts.operator.scheme;
        let mut rate = 0.0f64;
        let mut min_curv = f64::INFINITY;
        self.speed.clear();
        for &k in self.domain.active() {
            let l = local(values, &nodes[k as usize], scheme);
            let g = gradient_factor(l.grad_sq, &self.params);
            let (v, slope) = det_power_and_slope(l.det, alpha, floor);
            self.speed.push(v * g);
            let r = slope * g * l.stiffness;
            rate = rate.max(r);
            min_curv = min_curv.min(l.min_curvature);
        }
        (rate, (-min_curv).max(0.0))
    }

    /// Adds `mu * bowl` until the defect is within tolerance; returns `mu`.
    fn project(&mut self, values: &mut [f64], defect: f64) -> Result<f64> {
        let tol = self.opts.convexity_tol;
        let mut mu = (defect - tol) / self.bowl_curvature * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        let mut total = 0.0;
        let mut current = defect;
        for _ in 0..8 {
            for (v, b) in values.iter_mut().zip(&self.bowl) {
                *v += mu * b;
            }
            total += mu;
            current = self.speeds(values).1;
            if current <= tol {
                return Ok(total);
            }
            mu = (current - tol) / self.bowl_curvature * 2.0;
        }
        Err(Error::LostConvexity {
            defect: current,
            tol,
        })
    }

    /// One Euler step no longer than `t_cap - state.t`.
    pub fn advance(&mut self, state: &mut EvolutionState, t_cap: f64) -> Result<f64> {
        if !Arc::ptr_eq(state.u.domain(), &self.domain) && **state.u.domain() != *self.domain {
            return Err(Error::DomainMismatch);
        }
        let values = state.u.values_mut();
        let (mut rate, defect) = self.speeds(values);
        if self.opts.project_convexity && defect > self.opts.convexity_tol {
            state.injected_mu += self.project(values, defect)?;
            rate = self.speeds(values).0;
        }
        let stable = if rate > 0.0 {
            self.opts.cfl / rate
        } else {
            f64::INFINITY
        };
        if stable < self.opts.dt_min {
            return Err(Error::StabilityFailure {
                t: state.t,
                dt: stable,
            });
        }
        let dt = stable.min(self.opts.dt_max).min(t_cap - state.t);
        let nodes = self.domain.nodes();
        for (&k, s) in self.domain.active().iter().zip(&self.speed) {
            values[nodes[k as usize].grid as usize] += dt * s;
        }
        self.domain.apply_slaves(values);
        // Land exactly on the cap so sample times are reproduced bit for bit.
        state.t = if t_cap - state.t == dt {
            t_cap
        } else {
            state.t + dt
        };
        state.step_count += 1;
        state.dt_last = dt;
        state.dt_largest = state.dt_largest.max(dt);
        Ok(dt)
    }

    /// Steps until `state.t == t_target`.
    pub fn advance_to(&mut self, state: &mut EvolutionState, t_target: f64) -> Result<()> {
        while state.t < t_target {
            if state.step_count >= self.opts.max_steps {
                return Err(Error::StepLimit {
                    steps: state.step_count,
                    t: state.t,
                });
            }
            self.advance(state, t_target)?;
        }
        state.refresh(&self.params, &self.opts.operator);
        Ok(())
    }
}

/// A single forward Euler step.
pub fn step(
    state: &EvolutionState,
    params: &FlowParams,
    opts: &FlowOptions,
) -> Result<EvolutionState> {
    let mut stepper = Stepper::new(state.u.domain(), params, opts)?;
    let mut next = state.clone();
    stepper.advance(&mut next, f64::INFINITY)?;
    next.refresh(params, &opts.operator);
    Ok(next)
}

/// Output of [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state: EvolutionState,
    pub series: RateSeries,
    /// `u` at each sample time when `record_fields` is set.
    pub snapshots: Vec<ScalarField>,
}

/// Diagnostics of `u` against the profile `psi`.
pub fn sample(
    state: &EvolutionState,
    psi: &ScalarField,
    params: &FlowParams,
    opts: &OperatorOptions,
    injected_mu: f64,
) -> Result<Sample> {
    let u = &state.u;
    let scale = math::powf(1.0 + state.t, params.gamma());
    let rescaled = u.scaled(scale);
    let deviation_sup = rescaled.distance_sup(psi)?;
    let (deviation_lower, deviation_upper) = normalized_deviation_range(u, psi, params)?;
    let symmetry = symmetry_defect(&rescaled, natural_symmetry(&u.domain().kind())).ok();
    Ok(Sample {
        t: state.t,
        sup_abs_u: u.sup_abs(),
        grad_sup: crate::analysis::grad_sup(u, opts),
        deviation_sup,
        deviation_lower,
        deviation_upper,
        symmetry_defect: symmetry,
        g_current: state.g_current,
        injected_mu,
    })
}

/// Advance to `t_end`, recording diagnostics against `psi` at every sample
/// time in `[state0.t, t_end]`.
pub fn evolve(
    state0: EvolutionState,
    params: &FlowParams,
    t_end: f64,
    sample_times: &[f64],
    psi: &ScalarField,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end > state0.t) {
        return Err(Error::InvalidOption(format!(
            "t_end = {t_end} must exceed the start time {}",
            state0.t
        )));
    }
    if !state0.u.same_domain(psi) {
        return Err(Error::DomainMismatch);
    }
    let mut times: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|&t| t >= state0.t && t <= t_end)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.is_empty() {
        return Err(Error::InsufficientSamples {
            found: 0,
            needed: 1,
        });
    }
    let mut stepper = Stepper::new(state0.u.domain(), params, opts)?;
    let mut state = state0;
    let mut series = RateSeries::new();
    let mut snapshots = Vec::new();
    let mut mu_mark = state.injected_mu;
    for &ts in &times {
        stepper.advance_to(&mut state, ts)?;
        series.push(sample(
            &state,
            psi,
            params,
            &opts.operator,
            state.injected_mu - mu_mark,
        )?)?;
        mu_mark = state.injected_mu;
        if opts.record_fields {
            snapshots.push(state.u.clone());
        }
    }
    stepper.advance_to(&mut state, t_end)?;
    Ok(Trajectory {
        state,
        series,
        snapshots,
    })
}

/// `t_m = 2^m - 1` up to `t_end`, starting with 0.
pub fn dyadic_times(t_end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 0.0;
    while t <= t_end {
        out.push(t);
        t = 2.0 * t + 1.0;
    }
    out
}

/// `G^lambda phi_lower(t - t0) psi <= u <= phi_upper(t - t0) psi` for `t >= t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub phi0_lower: f64,
    pub phi0_upper: f64,
    pub g: f64,
    pub t0: f64,
    params: FlowParams,
    psi: ScalarField,
}

impl Envelope {
    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    /// `G^lambda - 1`, the part of the lower side that does not decay.
    pub fn offset(&self) -> f64 {
        math::powf(self.g, self.params.lambda()) - 1.0
    }

    pub fn lower_factor(&self, t: f64) -> f64 {
        let law = SelfSimilarLaw::new(self.phi0_lower, self.params).expect("positive phi0");
        math::powf(self.g, self.params.lambda()) * law.phi(t - self.t0)
    }

    pub fn upper_factor(&self, t: f64) -> f64 {
        let law = SelfSimilarLaw::new(self.phi0_upper, self.params).expect("positive phi0");
        law.phi(t - self.t0)
    }

    pub fn lower(&self, t: f64) -> ScalarField {
        self.psi.scaled(self.lower_factor(t)).with_time(t)
    }

    pub fn upper(&self, t: f64) -> ScalarField {
        self.psi.scaled(self.upper_factor(t)).with_time(t)
    }
}

/// Envelope through `u0` at time `u0.time()`: `phi_lower(0) = max u0/psi`
/// and `phi_upper(0) = min u0/psi` over nodes with `|psi| >= h^2`.
pub fn build_envelope(
    u0: &ScalarField,
    psi: &ScalarField,
    g: f64,
    params: &FlowParams,
) -> Result<Envelope> {
    if !u0.same_domain(psi) {
        return Err(Error::DomainMismatch);
    }
    if !(g > 0.0 && g <= 1.0) {
        return Err(Error::EnvelopeUndefined(format!("G = {g} outside (0, 1]")));
    }
    let h = psi.domain().h();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in u0.interior_values().zip(psi.interior_values()) {
        if b > 0.0 {
            return Err(Error::EnvelopeUndefined("psi is positive somewhere".into()));
        }
        if -b >= h * h {
            let r = a / b;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::EnvelopeUndefined(format!(
            "u0/psi ranges over [{lo:e}, {hi:e}], not within positive bounds"
        )));
    }
    Ok(Envelope {
        phi0_lower: hi,
        phi0_upper: lo,
        g,
        t0: u0.time().max(0.0),
        params: *params,
        psi: psi.clone(),
    })
}

/// Envelopes rebuilt from snapshots taken at the dyadic times, each with
/// the speed factor of its own snapshot.
pub fn refined_envelopes(
    snapshots: &[ScalarField],
    psi: &ScalarField,
    params: &FlowParams,
    opts: &OperatorOptions,
) -> Result<Vec<Envelope>> {
    let stages: Vec<f64> = match snapshots.last() {
        Some(s) => dyadic_times(s.time()),
        None => Vec::new(),
    };
    snapshots
        .iter()
        .filter(|s| stages.contains(&s.time()))
        .map(|s| build_envelope(s, psi, speed_factor_inf(s, params, opts), params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichSample {
    pub t: f64,
    /// Largest `lower - u`, zero when the lower side holds.
    pub lower_violation: f64,
    /// Largest `u - upper`.
    pub upper_violation: f64,
    /// Start time of the envelope in force.
    pub stage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub samples: Vec<SandwichSample>,
    pub worst: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Checks each snapshot against the latest envelope started at or before it.
pub fn check_sandwich(
    snapshots: &[ScalarField],
    stages: &[Envelope],
    slack: f64,
) -> Result<SandwichReport> {
    let mut samples = Vec::with_capacity(snapshots.len());
    for u in snapshots {
        let t = u.time().max(0.0);
        let Some(env) = stages
            .iter()
            .filter(|e| e.t0 <= t)
            .max_by(|a, b| a.t0.total_cmp(&b.t0))
        else {
            return Err(Error::EnvelopeUndefined(format!(
                "no envelope starts by t = {t}"
            )));
        };
        if !u.same_domain(&env.psi) {
            return Err(Error::DomainMismatch);
        }
        let (fl, fu) = (env.lower_factor(t), env.upper_factor(t));
        let (mut lower, mut upper) = (0.0f64, 0.0f64);
        for (a, p) in u.interior_values().zip(env.psi.interior_values()) {
            lower = lower.max(fl * p - a);
            upper = upper.max(a - fu * p);
        }
        samples.push(SandwichSample {
            t,
            lower_violation: lower,
            upper_violation: upper,
            stage: env.t0,
        });
    }
    let worst = samples
        .iter()
        .map(|s| s.lower_violation.max(s.upper_violation))
        .fold(0.0, f64::max);
    Ok(SandwichReport {
        samples,
        worst,
        slack,
        pass: worst <= slack,
    })
}

/// Convex initial data vanishing on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    /// `c psi`.
    ProfileMultiple(f64),
    /// `c bowl`, the quadratic of [`DomainKind::bowl`].
    Bowl(f64),
    /// `c bowl (1 + offset x / a)`, convex for `|offset| < 1/3`, with its
    /// minimum moved off centre.
    AsymBowl { c: f64, offset: f64 },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        let c = match *self {
            InitialData::ProfileMultiple(c) | InitialData::Bowl(c) => c,
            InitialData::AsymBowl { c, offset } => {
                if !(offset.is_finite() && math::abs(offset) < 1.0 / 3.0) {
                    return Err(Error::InvalidOption(format!(
                        "asymmetric bowl offset = {offset} must satisfy |offset| < 1/3"
                    )));
                }
                c
            }
        };
        if c.is_finite() && c > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidOption(format!(
                "initial data multiple c = {c} must be positive"
            )))
        }
    }

    /// Samples the data; `psi` is needed for profile multiples.
    pub fn field(&self, domain: &Arc<Domain>, psi: Option<&ScalarField>) -> Result<ScalarField> {
        self.validate()?;
        let kind: DomainKind = domain.kind();
        let mut u = match *self {
            InitialData::ProfileMultiple(c) => {
                let psi = psi.ok_or_else(|| {
                    Error::InvalidOption("profile multiple needs a profile".into())
                })?;
                if !psi.same_domain(&ScalarField::zeros(domain)) {
                    return Err(Error::DomainMismatch);
                }
                psi.scaled(c)
            }
            InitialData::Bowl(c) => ScalarField::from_fn(domain, |x, y| c * kind.bowl(x, y)),
            InitialData::AsymBowl { c, offset } => {
                let a = kind.half_extents().0;
                ScalarField::from_fn(domain, |x, y| c * kind.bowl(x, y) * (1.0 + offset * x / a))
            }
        };
        u.set_time(0.0);
        u.enforce_slaves();
        Ok(u)
    }
}
