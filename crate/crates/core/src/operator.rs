//! Discrete Monge-Ampere operator, gradients, flow speed and convexity
//! diagnostics.
//!
//! Two discretisations of `det(D^2 u)` are available:
//!
//! * [`Scheme::Standard9`] uses `u_xx u_yy - u_xy^2`, with the mixed
//!   derivative taken as half the difference of the two diagonal second
//!   differences. On nodes with a full 3x3 stencil this is the usual
//!   centred nine-point formula and is exact on quadratics.
//! * [`Scheme::MonotoneWs`] takes the minimum over orthogonal stencil frames
//!   of `max(D_a u, 0) * max(D_b u, 0)`, where `D_a` is the second difference
//!   along frame direction `a`. The result is non-decreasing in every
//!   neighbour value, which gives the discrete comparison principle.
//!
//! Near the boundary all second differences use the Shortley-Weller weights
//! stored on the domain, with the homogeneous boundary value.

use crate::domain::{Node, LINE_ANTIDIAG, LINE_DIAG, LINE_X, LINE_Y};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::math;
use crate::params::FlowParams;
use alloc::format;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotations {
    /// Axis frame and the diagonal frame.
    Two,
    /// Adds the two knight-move frames `(2,1),(1,-2)` and `(1,2),(2,-1)`.
    Four,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Standard9,
    MonotoneWs(Rotations),
}

const FRAMES: [(usize, usize); 4] = [(0, 1), (2, 3), (4, 5), (6, 7)];

impl Scheme {
    fn frames(&self) -> &'static [(usize, usize)] {
        match self {
            Scheme::Standard9 | Scheme::MonotoneWs(Rotations::Two) => &FRAMES[..2],
            Scheme::MonotoneWs(Rotations::Four) => &FRAMES,
        }
    }

    /// Number of stencil lines the scheme reads.
    pub fn line_count(&self) -> usize {
        2 * self.frames().len()
    }

    pub fn is_monotone(&self) -> bool {
        matches!(self, Scheme::MonotoneWs(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOptions {
    pub scheme: Scheme,
    /// Lower clamp for `det` before a fractional power (`alpha < 1`).
    pub det_floor: f64,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Standard9,
            det_floor: 1e-10,
        }
    }
}

impl OperatorOptions {
    pub fn monotone(rotations: Rotations) -> Self {
        Self {
            scheme: Scheme::MonotoneWs(rotations),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.det_floor.is_finite() && self.det_floor > 0.0 && self.det_floor <= 1e-8 {
            Ok(())
        } else {
            Err(Error::InvalidOption(format!(
                "det_floor = {} must lie in (0, 1e-8]",
                self.det_floor
            )))
        }
    }
}

/// Everything the stepper and the Newton assembly need at one node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Local {
    pub det: f64,
    pub grad_sq: f64,
    /// Half the absolute row sum of `d det / d u` over the stencil.
    pub stiffness: f64,
    /// Standard9: `[u_xx, u_yy, u_xy]`. Monotone: `[D_a, D_b, frame]`.
    pub second: [f64; 3],
    /// Smallest Hessian eigenvalue (Standard9) or smallest directional
    /// second difference (monotone).
    pub min_curvature: f64,
}

#[inline]
pub(crate) fn local(values: &[f64], node: &Node, scheme: Scheme) -> Local {
    let u0 = values[node.grid as usize];
    let lines = &node.lines;
    let gx = lines[LINE_X].first(values, u0);
    let gy = lines[LINE_Y].first(values, u0);
    let grad_sq = gx * gx + gy * gy;
    match scheme {
        Scheme::Standard9 => {
            let dxx = lines[LINE_X].second(values, u0);
            let dyy = lines[LINE_Y].second(values, u0);
            let dxy = 0.5
                * (lines[LINE_DIAG].second(values, u0) - lines[LINE_ANTIDIAG].second(values, u0));
            let spread = |l: usize| {
                let s = &lines[l];
                s.w_plus + s.w_minus - s.w_center
            };
            let stiffness = 0.5
                * (math::abs(dyy) * spread(LINE_X)
                    + math::abs(dxx) * spread(LINE_Y)
                    + math::abs(dxy) * (spread(LINE_DIAG) + spread(LINE_ANTIDIAG)));
            let min_curvature =
                0.5 * (dxx + dyy) - math::sqrt(0.25 * (dxx - dyy) * (dxx - dyy) + dxy * dxy);
            Local {
                det: dxx * dyy - dxy * dxy,
                grad_sq,
                stiffness,
                second: [dxx, dyy, dxy],
                min_curvature,
            }
        }
        Scheme::MonotoneWs(_) => {
            let mut best = Local {
                det: f64::INFINITY,
                grad_sq,
                stiffness: 0.0,
                second: [0.0; 3],
                min_curvature: f64::INFINITY,
            };
            for (f, &(a, b)) in scheme.frames().iter().enumerate() {
                let da = lines[a].second(values, u0);
                let db = lines[b].second(values, u0);
                best.min_curvature = best.min_curvature.min(da).min(db);
                let p = da.max(0.0) * db.max(0.0);
                if p < best.det {
                    best.det = p;
                    best.stiffness =
                        db.max(0.0) * -lines[a].w_center + da.max(0.0) * -lines[b].w_center;
                    best.second = [da, db, f as f64];
                }
            }
            best
        }
    }
}

/// Frame lines for a monotone `Local`.
pub(crate) fn frame_lines(scheme: Scheme, frame: f64) -> (usize, usize) {
    scheme.frames()[frame as usize]
}

/// `d det / d (second difference along line)` for each line the scheme
/// reads at this node. Lines with zero weight are omitted by the caller.
#[inline]
pub(crate) fn det_linearization(l: &Local, scheme: Scheme) -> [(usize, f64); 4] {
    match scheme {
        Scheme::Standard9 => {
            let [dxx, dyy, dxy] = l.second;
            [
                (LINE_X, dyy),
                (LINE_Y, dxx),
                (LINE_DIAG, -dxy),
                (LINE_ANTIDIAG, dxy),
            ]
        }
        Scheme::MonotoneWs(_) => {
            let [da, db, frame] = l.second;
            let (a, b) = frame_lines(scheme, frame);
            if da > 0.0 && db > 0.0 {
                [(a, db), (b, da), (a, 0.0), (b, 0.0)]
            } else {
                [(a, 0.0), (b, 0.0), (a, 0.0), (b, 0.0)]
            }
        }
    }
}

/// `max(det, floor)^alpha` for `alpha < 1`, `max(det, 0)^alpha` otherwise,
/// together with `d/d det` of that expression.
#[inline]
pub(crate) fn det_power(det: f64, alpha: f64, floor: f64) -> (f64, f64) {
    if alpha == 1.0 {
        return (det.max(0.0), if det > 0.0 { 1.0 } else { 0.0 });
    }
    if alpha < 1.0 {
        if det > floor {
            let v = math::powf(det, alpha);
            (v, alpha * v / det)
        } else {
            (math::powf(floor, alpha), 0.0)
        }
    } else if det > 0.0 {
        let v = math::powf(det, alpha);
        (v, alpha * v / det)
    } else {
        (0.0, 0.0)
    }
}

/// [`det_power`] together with the slope of `det -> det^alpha` used for
/// step-size control. Unlike the derivative from [`det_power`] the slope
/// never drops to zero at the clamp when `alpha <= 1`, so a node sitting at
/// the floor still limits the step.
#[inline]
pub(crate) fn det_power_and_slope(det: f64, alpha: f64, floor: f64) -> (f64, f64) {
    let (v, dv) = det_power(det, alpha, floor);
    if alpha == 1.0 {
        (v, 1.0)
    } else if alpha < 1.0 && det <= floor {
        (v, alpha * v / floor)
    } else {
        (v, dv)
    }
}

/// `(1 + |grad u|^2)^(-alpha beta)`.
#[inline]
pub(crate) fn gradient_factor(grad_sq: f64, params: &FlowParams) -> f64 {
    let e = params.alpha() * params.beta();
    if e == 0.0 {
        1.0
    } else {
        math::powf(1.0 + grad_sq, -e)
    }
}

fn map_nodes(u: &ScalarField, mut f: impl FnMut(&Node) -> f64) -> ScalarField {
    let mut out = ScalarField::zeros(u.domain());
    out.set_time(u.time());
    let domain = u.domain().clone();
    let values = out.values_mut();
    for n in domain.nodes() {
        values[n.grid as usize] = f(n);
    }
    out
}

/// Nodewise discrete `det(D^2 u)`.
pub fn ma_det(u: &ScalarField, opts: &OperatorOptions) -> ScalarField {
    let v = u.values();
    map_nodes(u, |n| local(v, n, opts.scheme).det)
}

/// Nodewise clamped `det(D^2 u)^alpha`.
pub fn ma_power(u: &ScalarField, params: &FlowParams, opts: &OperatorOptions) -> ScalarField {
    let v = u.values();
    map_nodes(u, |n| {
        det_power(local(v, n, opts.scheme).det, params.alpha(), opts.det_floor).0
    })
}

/// Nodewise `|grad u|^2`, centred with one-sided fallback at cut cells.
pub fn grad_norm_sq(u: &ScalarField, opts: &OperatorOptions) -> ScalarField {
    let v = u.values();
    map_nodes(u, |n| local(v, n, opts.scheme).grad_sq)
}

/// Nodewise `det(D^2 u)^alpha / (1 + |grad u|^2)^(alpha beta)`.
pub fn flow_speed(u: &ScalarField, params: &FlowParams, opts: &OperatorOptions) -> ScalarField {
    let v = u.values();
    map_nodes(u, |n| {
        let l = local(v, n, opts.scheme);
        det_power(l.det, params.alpha(), opts.det_floor).0 * gradient_factor(l.grad_sq, params)
    })
}

/// Negative part of the smallest Hessian eigenvalue at one node. The
/// monotone schemes use the smallest directional second difference instead.
#[inline]
pub(crate) fn node_defect(values: &[f64], node: &Node, scheme: Scheme) -> f64 {
    (-local(values, node, scheme).min_curvature).max(0.0)
}

/// Largest negative curvature over active nodes; zero means discretely convex.
pub fn convexity_defect(u: &ScalarField, opts: &OperatorOptions) -> f64 {
    let domain = u.domain();
    let v = u.values();
    domain
        .active()
        .iter()
        .map(|&k| node_defect(v, &domain.nodes()[k as usize], opts.scheme))
        .fold(0.0, f64::max)
}
