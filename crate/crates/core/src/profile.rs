//! The elliptic profile `det D^2 psi = (-psi / |1 - n alpha|)^(1/alpha)`,
//! `psi = 0` on the boundary.
//!
//! `(1 + t)^lambda psi` is the self-similar solution of the flow with
//! `beta = 0`. The solver first runs the rescaled flow
//! `v_tau = M^alpha(v) - lambda v`, whose steady state is `psi`, and then
//! polishes with damped Newton on the residual.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::banded::BandMatrix;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::math;
use crate::operator::{
    det_linearization, det_power_and_slope, local, node_defect, OperatorOptions,
};
use crate::params::FlowParams;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: u32) -> f64 {
    let h = 0.5 * f64::from(n);
    math::powf(core::f64::consts::PI, h) / math::gamma(h + 1.0)
}

/// `(|lambda|^(1/alpha) |Omega| diam^n / omega_n)^(alpha/(n alpha - 1))`.
pub fn abp_value(params: &FlowParams, area: f64, diameter: f64) -> f64 {
    let n = params.n();
    let mass = math::powf(math::abs(params.lambda()), 1.0 / params.alpha())
        * area
        * math::powf(diameter, f64::from(n))
        / unit_ball_volume(n);
    math::powf(mass, params.alpha() / params.gap())
}

/// A priori bound on `sup |psi|` from the Aleksandrov-Bakelman-Pucci estimate.
pub fn abp_bound(domain: &Domain, params: &FlowParams) -> f64 {
    abp_value(params, domain.area(), domain.diameter())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMethod {
    Relaxation,
    Newton,
    RelaxationThenNewton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub operator: OperatorOptions,
    /// Target for the sup-norm residual.
    pub tol: f64,
    /// Newton iterations per round.
    pub max_iters: usize,
    /// Relaxation rounds alternate with Newton until one succeeds.
    pub max_rounds: usize,
    /// Rescaled time of the first relaxation round; later rounds double it.
    pub relax_tau: f64,
    /// Relaxation hands over to Newton once the residual is below this.
    pub switch_residual: f64,
    pub cfl: f64,
    /// Largest accepted convexity defect.
    pub convexity_tol: f64,
    /// Initial guess `depth * abp_bound * level`, `level = 0` on the boundary.
    pub initial_depth: f64,
    /// Rescale the initial guess so the equation holds at its deepest node.
    /// `det(c v) = c^2 det(v)` while the right side scales like `c^(1/alpha)`,
    /// so this removes the slowest relaxation mode up front.
    pub normalize_guess: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            operator: OperatorOptions::default(),
            tol: 1e-6,
            max_iters: 40,
            max_rounds: 6,
            relax_tau: 0.02,
            switch_residual: 0.05,
            cfl: 0.5,
            convexity_tol: 1e-8,
            initial_depth: 0.5,
            normalize_guess: true,
        }
    }
}

impl ProfileOptions {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.tol) && positive(self.relax_tau) && positive(self.switch_residual)) {
            return Err(Error::InvalidOption(
                "profile tolerances must be positive".into(),
            ));
        }
        if !(positive(self.cfl) && self.cfl <= 1.0) {
            return Err(Error::InvalidOption(
                "profile cfl must lie in (0, 1]".into(),
            ));
        }
        if !(positive(self.initial_depth) && self.convexity_tol >= 0.0) {
            return Err(Error::InvalidOption(
                "initial_depth must be positive".into(),
            ));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidOption("max_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSolution {
    pub psi: ScalarField,
    pub residual_sup: f64,
    pub sup_abs: f64,
    pub abp_bound: f64,
    pub convexity_defect: f64,
    pub relax_steps: usize,
    pub newton_iters: usize,
    pub method: ProfileMethod,
}

impl ProfileSolution {
    pub fn iterations(&self) -> usize {
        self.relax_steps + self.newton_iters
    }
}

/// Right-hand side with `psi` capped below zero, and its derivative.
#[inline]
fn rhs(psi: f64, inv_alpha: f64, inv_gap: f64) -> (f64, f64) {
    let q = -psi.min(-1e-14) * inv_gap;
    let f = math::powf(q, inv_alpha);
    (f, -inv_alpha * inv_gap * f / q)
}

struct Solver<'a> {
    domain: &'a Domain,
    params: FlowParams,
    opts: ProfileOptions,
    inv_alpha: f64,
    inv_gap: f64,
}

impl Solver<'_> {
    fn residual(&self, values: &[f64]) -> f64 {
        let nodes = self.domain.nodes();
        self.domain
            .active()
            .iter()
            .map(|&k| {
                let n = &nodes[k as usize];
                let det = local(values, n, self.opts.operator.scheme).det;
                math::abs(det - rhs(values[n.grid as usize], self.inv_alpha, self.inv_gap).0)
            })
            .fold(0.0, f64::max)
    }

    fn defect(&self, values: &[f64]) -> f64 {
        let nodes = self.domain.nodes();
        self.domain
            .active()
            .iter()
            .map(|&k| node_defect(values, &nodes[k as usize], self.opts.operator.scheme))
            .fold(0.0, f64::max)
    }

    /// One explicit step of the rescaled flow. Returns the step length.
    fn relax_step(&self, values: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        let nodes = self.domain.nodes();
        let (alpha, floor) = (self.params.alpha(), self.opts.operator.det_floor);
        let lambda = self.params.lambda();
        scratch.clear();
        let mut rate = math::abs(lambda);
        for &k in self.domain.active() {
            let n = &nodes[k as usize];
            let l = local(values, n, self.opts.operator.scheme);
            let (v, slope) = det_power_and_slope(l.det, alpha, floor);
            let speed = v - lambda * values[n.grid as usize];
            rate = rate.max(slope * l.stiffness + math::abs(lambda));
            scratch.push(speed);
        }
        let dtau = self.opts.cfl / rate;
        for (&k, s) in self.domain.active().iter().zip(scratch.iter()) {
            values[nodes[k as usize].grid as usize] += dtau * s;
        }
        self.domain.apply_slaves(values);
        dtau
    }

    /// Relax for `relax_tau` or until the residual drops below `switch_residual`.
    fn relax(&self, values: &mut [f64], budget: f64, steps: &mut usize) -> f64 {
        let mut scratch = Vec::with_capacity(self.domain.active().len());
        let mut tau = 0.0;
        let mut res = self.residual(values);
        let mut since_check = 0.0;
        while tau < budget && res > self.opts.switch_residual {
            let dtau = self.relax_step(values, &mut scratch);
            tau += dtau;
            since_check += dtau;
            *steps += 1;
            if since_check >= 0.01 {
                res = self.residual(values);
                since_check = 0.0;
            }
        }
        self.residual(values)
    }

    fn normalize(&self, values: &mut [f64]) {
        let nodes = self.domain.nodes();
        let Some(&deepest) = self.domain.active().iter().min_by(|&&a, &&b| {
            values[nodes[a as usize].grid as usize]
                .total_cmp(&values[nodes[b as usize].grid as usize])
        }) else {
            return;
        };
        let n = &nodes[deepest as usize];
        let det = local(values, n, self.opts.operator.scheme).det;
        let f = rhs(values[n.grid as usize], self.inv_alpha, self.inv_gap).0;
        if det > 0.0 && f > 0.0 {
            let c = math::powf(f / det, 1.0 / (2.0 - self.inv_alpha));
            values.iter_mut().for_each(|v| *v *= c);
        }
    }

    fn bandwidth(&self) -> usize {
        let nodes = self.domain.nodes();
        let lines = self.opts.operator.scheme.line_count();
        let mut band = 0;
        for (k, n) in nodes.iter().enumerate() {
            for l in &n.lines[..lines] {
                for g in [l.plus, l.minus] {
                    if let Some(c) = self.domain.node_index(g as usize) {
                        band = band.max(c.abs_diff(k));
                    }
                }
            }
        }
        for s in self.domain.slaves() {
            band = band.max((s.node as usize).abs_diff(s.master as usize));
        }
        band
    }

    /// Newton system `J delta = -R` in compact node order.
    fn assemble(&self, values: &[f64], m: &mut BandMatrix, rhs_vec: &mut [f64]) {
        m.clear();
        let nodes = self.domain.nodes();
        let scheme = self.opts.operator.scheme;
        for &k in self.domain.active() {
            let k = k as usize;
            let n = &nodes[k];
            let l = local(values, n, scheme);
            let (f, df) = rhs(values[n.grid as usize], self.inv_alpha, self.inv_gap);
            rhs_vec[k] = -(l.det - f);
            m.add(k, k, -df);
            for (line, c) in det_linearization(&l, scheme) {
                if c == 0.0 {
                    continue;
                }
                let s = &n.lines[line];
                m.add(k, k, c * s.w_center);
                for (g, w) in [(s.plus, s.w_plus), (s.minus, s.w_minus)] {
                    if let Some(col) = self.domain.node_index(g as usize) {
                        m.add(k, col, c * w);
                    }
                }
            }
        }
        for s in self.domain.slaves() {
            let (k, q) = (s.node as usize, s.master as usize);
            m.add(k, k, 1.0);
            m.add(k, q, -s.weight);
            rhs_vec[k] =
                -(values[nodes[k].grid as usize] - s.weight * values[nodes[q].grid as usize]);
        }
    }

    fn admissible(&self, values: &[f64], defect_cap: f64) -> bool {
        self.domain
            .nodes()
            .iter()
            .all(|n| values[n.grid as usize] < 0.0)
            && self.defect(values) <= defect_cap
    }

    /// Damped Newton. `Ok(true)` on convergence, `Ok(false)` when the line
    /// search stalls.
    fn newton(&self, values: &mut Vec<f64>, iters: &mut usize) -> Result<bool> {
        let size = self.domain.nodes().len();
        let band = self.bandwidth();
        let nodes = self.domain.nodes();
        let mut res = self.residual(values);
        let mut rhs_vec = vec![0.0; size];
        let mut cand = values.clone();
        // Polish well below the tolerance; quadratic convergence makes the
        // extra iterations cheap.
        let target = 1e-3 * self.opts.tol;
        for _ in 0..self.opts.max_iters {
            if res <= target {
                return Ok(true);
            }
            let mut m = BandMatrix::zeros(size, band);
            self.assemble(values, &mut m, &mut rhs_vec);
            let lu = m.factor()?;
            lu.solve(&mut rhs_vec);
            *iters += 1;
            let defect_cap = self.opts.convexity_tol.max(self.defect(values));
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                cand.copy_from_slice(values);
                for (n, d) in nodes.iter().zip(&rhs_vec) {
                    cand[n.grid as usize] += step * d;
                }
                if self.admissible(&cand, defect_cap) {
                    let r = self.residual(&cand);
                    if r < res {
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                return Ok(res <= self.opts.tol);
            }
            core::mem::swap(values, &mut cand);
        }
        Ok(res <= self.opts.tol)
    }
}

/// Solve for the profile starting from `initial_depth * abp_bound * level`.
pub fn solve_profile(
    domain: &Arc<Domain>,
    params: &FlowParams,
    opts: &ProfileOptions,
) -> Result<ProfileSolution> {
    let depth = opts.initial_depth * abp_bound(domain, params);
    let kind = domain.kind();
    let guess = ScalarField::from_fn(domain, |x, y| depth * kind.level(x, y));
    solve_profile_from(guess, params, opts)
}

pub fn solve_profile_from(
    initial: ScalarField,
    params: &FlowParams,
    opts: &ProfileOptions,
) -> Result<ProfileSolution> {
    params.require_planar()?;
    opts.validate()?;
    let domain = Arc::clone(initial.domain());
    let solver = Solver {
        domain: &domain,
        params: *params,
        opts: *opts,
        inv_alpha: 1.0 / params.alpha(),
        inv_gap: 1.0 / params.gap(),
    };
    let mut values = initial.values().to_vec();
    domain.apply_slaves(&mut values);
    if opts.normalize_guess {
        solver.normalize(&mut values);
    }
    if !solver.admissible(&values, f64::INFINITY) {
        return Err(Error::InvalidOption(
            "initial guess must be negative inside".into(),
        ));
    }
    let (mut relax_steps, mut newton_iters) = (0, 0);
    let mut converged = solver.residual(&values) <= opts.tol;
    let mut budget = opts.relax_tau;
    for _ in 0..opts.max_rounds {
        if converged {
            break;
        }
        solver.relax(&mut values, budget, &mut relax_steps);
        budget *= 2.0;
        let mut trial = values.clone();
        let out = solver.newton(&mut trial, &mut newton_iters);
        match out {
            Ok(true) => {
                values = trial;
                converged = true;
            }
            // A stalled or singular Newton round falls back to more relaxation
            // from the last relaxed state.
            Ok(false) | Err(Error::SingularMatrix { .. }) => {
                let better = solver.residual(&trial) < solver.residual(&values);
                if better && solver.admissible(&trial, opts.convexity_tol) {
                    values = trial;
                }
            }
            Err(e) => return Err(e),
        }
    }
    let residual_sup = solver.residual(&values);
    if !converged {
        return Err(Error::NoConvergence {
            iterations: relax_steps + newton_iters,
            residual: residual_sup,
        });
    }
    let convexity_defect = solver.defect(&values);
    if convexity_defect > opts.convexity_tol {
        return Err(Error::LostConvexity {
            defect: convexity_defect,
            tol: opts.convexity_tol,
        });
    }
    let psi = ScalarField::from_values(&domain, values, -1.0)?;
    let method = match (relax_steps, newton_iters) {
        (_, 0) => ProfileMethod::Relaxation,
        (0, _) => ProfileMethod::Newton,
        _ => ProfileMethod::RelaxationThenNewton,
    };
    Ok(ProfileSolution {
        sup_abs: psi.sup_abs(),
        abp_bound: abp_bound(&domain, params),
        psi,
        residual_sup,
        convexity_defect,
        relax_steps,
        newton_iters,
        method,
    })
}

/// Sup-norm residual of the profile equation at active nodes.
pub fn profile_residual(psi: &ScalarField, params: &FlowParams, opts: &OperatorOptions) -> f64 {
    let domain = psi.domain();
    let solver = Solver {
        domain,
        params: *params,
        opts: ProfileOptions {
            operator: *opts,
            ..ProfileOptions::default()
        },
        inv_alpha: 1.0 / params.alpha(),
        inv_gap: 1.0 / params.gap(),
    };
    solver.residual(psi.values())
}

/// One explicit step of the rescaled flow `v_tau = M^alpha(v) - lambda v`.
/// Returns the new field and the step length.
pub fn relaxation_step(
    v: &ScalarField,
    params: &FlowParams,
    opts: &ProfileOptions,
) -> (ScalarField, f64) {
    let domain = Arc::clone(v.domain());
    let solver = Solver {
        domain: &domain,
        params: *params,
        opts: *opts,
        inv_alpha: 1.0 / params.alpha(),
        inv_gap: 1.0 / params.gap(),
    };
    let mut values = v.values().to_vec();
    let mut scratch = Vec::new();
    let dtau = solver.relax_step(&mut values, &mut scratch);
    let out = ScalarField::from_values(&domain, values, v.time()).expect("same domain");
    (out, dtau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{symmetry_defect, SymmetryMode};
    use crate::domain::DomainKind;
    use crate::operator::Rotations;
    use crate::radial::{radial_oracle, RadialOptions};

    fn p(alpha: f64) -> FlowParams {
        FlowParams::new(2, alpha, 0.0).unwrap()
    }

    fn disc(h: f64) -> Arc<Domain> {
        Arc::new(Domain::new(DomainKind::Disc { radius: 1.0 }, h).unwrap())
    }

    #[test]
    fn abp_examples() {
        let d = disc(0.05);
        assert!((abp_bound(&d, &p(1.0)) - 4.0).abs() < 1e-12);
        assert!((abp_bound(&d, &p(0.75)) - 32.0).abs() < 1e-10);
        // ((1/3)^(1/2) * 4)^(2/3).
        let expected = (4.0 / 3.0f64.sqrt()).powf(2.0 / 3.0);
        assert!((abp_bound(&d, &p(2.0)) - expected).abs() < 1e-12);
        assert!((expected - 1.747_160_929_472_598).abs() < 1e-12);
        // Unit mass and |lambda| = 1.
        assert!((abp_value(&p(1.0), core::f64::consts::PI, 1.0) - 1.0).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * core::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn converges_on_the_disc() {
        let d = disc(1.0 / 32.0);
        for a in [0.75, 1.0, 2.0] {
            let sol = solve_profile(&d, &p(a), &ProfileOptions::default()).unwrap();
            assert!(sol.residual_sup <= 1e-6);
            assert!(sol.sup_abs <= sol.abp_bound);
            assert!(sol.convexity_defect <= 1e-8);
            assert!(sol.psi.interior_values().all(|v| v < 0.0));
            let oracle = radial_oracle(&p(a), 1.0, &RadialOptions::default()).unwrap();
            let rel = (sol.sup_abs - oracle.depth).abs() / oracle.depth;
            assert!(rel < 5e-3, "alpha {a}: {} vs {}", sol.sup_abs, oracle.depth);
        }
    }

    #[test]
    fn unique_from_shallow_and_deep_guesses() {
        let d = disc(1.0 / 24.0);
        let tight = ProfileOptions {
            tol: 1e-10,
            normalize_guess: false,
            ..ProfileOptions::default()
        };
        let shallow = solve_profile(
            &d,
            &p(1.0),
            &ProfileOptions {
                initial_depth: 0.05,
                ..tight
            },
        )
        .unwrap();
        let deep = solve_profile(
            &d,
            &p(1.0),
            &ProfileOptions {
                initial_depth: 0.9,
                ..tight
            },
        )
        .unwrap();
        assert!(shallow.psi.distance_sup(&deep.psi).unwrap() <= 1e-5);
    }

    #[test]
    fn converged_profile_is_a_relaxation_fixed_point() {
        let d = disc(1.0 / 24.0);
        let opts = ProfileOptions::default();
        let sol = solve_profile(&d, &p(1.0), &opts).unwrap();
        let (next, dtau) = relaxation_step(&sol.psi, &p(1.0), &opts);
        assert!(next.distance_sup(&sol.psi).unwrap() <= opts.tol * dtau);
    }

    #[test]
    fn radially_symmetric_on_the_disc() {
        let h = 1.0 / 24.0;
        let d = disc(h);
        let sol = solve_profile(&d, &p(1.0), &ProfileOptions::default()).unwrap();
        let oracle = radial_oracle(&p(1.0), 1.0, &RadialOptions::default()).unwrap();
        let lip = oracle.boundary_slope();
        let defect = symmetry_defect(&sol.psi, SymmetryMode::Radial).unwrap();
        assert!(defect <= 2.0 * h * lip, "{defect} vs {}", 2.0 * h * lip);
    }

    #[test]
    fn ellipse_and_monotone_scheme() {
        let d = Arc::new(Domain::new(DomainKind::Ellipse { a: 1.0, b: 0.5 }, 1.0 / 32.0).unwrap());
        let sol = solve_profile(&d, &p(2.0), &ProfileOptions::default()).unwrap();
        assert!(sol.residual_sup <= 1e-6 && sol.sup_abs <= sol.abp_bound);
        let mono = ProfileOptions {
            operator: OperatorOptions::monotone(Rotations::Two),
            ..ProfileOptions::default()
        };
        let dd = disc(1.0 / 24.0);
        let sol = solve_profile(&dd, &p(1.0), &mono).unwrap();
        assert!(sol.residual_sup <= 1e-6 && sol.sup_abs <= sol.abp_bound);
    }
}
