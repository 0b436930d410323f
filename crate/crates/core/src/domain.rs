//! Convex planar domains sampled on a uniform grid with cut cells.
//!
//! Grid nodes sit at `(i h, j h)` for integer `i, j`, so the node set is
//! symmetric about both axes. A node is interior when it lies strictly
//! inside the region. For every interior node and each of the sixteen
//! stencil offsets in [`DIRECTIONS`] the domain records the fraction of the
//! offset at which the ray leaves the region (1 when the target node is
//! interior). Second and first differences along the eight stencil lines use
//! Shortley-Weller weights built from these fractions with a zero boundary
//! value.
//!
//! Interior nodes closer than [`SLAVE_DISTANCE`]` * h` to the boundary are
//! not evolved; their value is the linear interpolation between an inner
//! neighbour and the boundary crossing. This keeps the explicit time step
//! bounded away from zero on fine cut cells.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;

/// Stencil offsets. Entries `2l` and `2l + 1` are opposite and form line `l`.
pub const DIRECTIONS: [(i32, i32); 16] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
    (2, 1),
    (-2, -1),
    (1, -2),
    (-1, 2),
    (1, 2),
    (-1, -2),
    (2, -1),
    (-2, 1),
];

pub const LINE_COUNT: usize = 8;

/// Lines: x, y, diagonal, antidiagonal, then the two knight-move frames.
pub const LINE_X: usize = 0;
pub const LINE_Y: usize = 1;
pub const LINE_DIAG: usize = 2;
pub const LINE_ANTIDIAG: usize = 3;

/// Nodes nearer than this many grid spacings to the boundary are slaved.
pub const SLAVE_DISTANCE: f64 = 0.5;

const MIN_INTERIOR_NODES: usize = 9;
const GRID_MARGIN: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    Disc {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `|x/a|^p + |y/b|^p < 1`, strictly convex for `p >= 2`.
    Superellipse {
        a: f64,
        b: f64,
        p: f64,
    },
}

impl DomainKind {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            DomainKind::Disc { radius } => ok(radius),
            DomainKind::Ellipse { a, b } => ok(a) && ok(b),
            DomainKind::Superellipse { a, b, p } => ok(a) && ok(b) && p.is_finite() && p >= 2.0,
        };
        if valid {
            Ok(())
        } else {
            Err(Error::DegenerateGeometry(format!(
                "invalid or non-convex geometry {self:?}"
            )))
        }
    }

    /// Negative inside, zero on the boundary, convex.
    pub fn level(&self, x: f64, y: f64) -> f64 {
        match *self {
            DomainKind::Disc { radius } => (x * x + y * y) / (radius * radius) - 1.0,
            DomainKind::Ellipse { a, b } => (x / a) * (x / a) + (y / b) * (y / b) - 1.0,
            DomainKind::Superellipse { a, b, p } => {
                math::powf(math::abs(x / a), p) + math::powf(math::abs(y / b), p) - 1.0
            }
        }
    }

    fn level_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            DomainKind::Disc { radius } => {
                (2.0 * x / (radius * radius), 2.0 * y / (radius * radius))
            }
            DomainKind::Ellipse { a, b } => (2.0 * x / (a * a), 2.0 * y / (b * b)),
            DomainKind::Superellipse { a, b, p } => {
                let gx = p * math::powf(math::abs(x / a), p - 1.0) * math::signum(x) / a;
                let gy = p * math::powf(math::abs(y / b), p - 1.0) * math::signum(y) / b;
                (gx, gy)
            }
        }
    }

    pub fn half_extents(&self) -> (f64, f64) {
        match *self {
            DomainKind::Disc { radius } => (radius, radius),
            DomainKind::Ellipse { a, b } | DomainKind::Superellipse { a, b, .. } => (a, b),
        }
    }

    /// Boundary point at parameter `theta` in `[0, 2 pi)`, counterclockwise.
    pub fn boundary_point(&self, theta: f64) -> (f64, f64) {
        let (c, s) = (math::cos(theta), math::sin(theta));
        match *self {
            DomainKind::Disc { radius } => (radius * c, radius * s),
            DomainKind::Ellipse { a, b } => (a * c, b * s),
            DomainKind::Superellipse { a, b, p } => {
                let e = 2.0 / p;
                (
                    a * math::signum(c) * math::powf(math::abs(c), e),
                    b * math::signum(s) * math::powf(math::abs(s), e),
                )
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            DomainKind::Disc { radius } => PI * radius * radius,
            DomainKind::Ellipse { a, b } => PI * a * b,
            DomainKind::Superellipse { a, b, p } => {
                let g = math::gamma(1.0 + 1.0 / p);
                4.0 * a * b * g * g / math::gamma(1.0 + 2.0 / p)
            }
        }
    }

    /// The regions are centrally symmetric, so the diameter is twice the
    /// largest boundary radius.
    pub fn diameter(&self) -> f64 {
        match *self {
            DomainKind::Disc { radius } => 2.0 * radius,
            DomainKind::Ellipse { a, b } => 2.0 * a.max(b),
            DomainKind::Superellipse { .. } => 2.0 * self.max_boundary_radius(),
        }
    }

    fn max_boundary_radius(&self) -> f64 {
        let radius = |t: f64| {
            let (x, y) = self.boundary_point(t);
            math::hypot(x, y)
        };
        // One quadrant suffices by symmetry; coarse scan then golden section.
        let samples = 2048;
        let quarter = PI / 2.0;
        let mut best = 0;
        let mut best_r = radius(0.0);
        for k in 1..=samples {
            let r = radius(quarter * k as f64 / samples as f64);
            if r > best_r {
                best_r = r;
                best = k;
            }
        }
        let step = quarter / samples as f64;
        let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
        let inv_phi = (math::sqrt(5.0) - 1.0) / 2.0;
        for _ in 0..80 {
            let m1 = hi - inv_phi * (hi - lo);
            let m2 = lo + inv_phi * (hi - lo);
            if radius(m1) < radius(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        best_r.max(radius(0.5 * (lo + hi)))
    }

    /// Fraction `theta` in `(0, 1]` at which `p + theta * v` crosses the
    /// boundary. `p` must be inside and `p + v` outside or on the boundary.
    fn crossing(&self, px: f64, py: f64, vx: f64, vy: f64) -> f64 {
        let quadratic = |sa: f64, sb: f64| {
            let qa = (vx / sa) * (vx / sa) + (vy / sb) * (vy / sb);
            let qb = 2.0 * (px * vx / (sa * sa) + py * vy / (sb * sb));
            let qc = self.level(px, py);
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            let root = math::sqrt(disc);
            if qb >= 0.0 {
                -2.0 * qc / (qb + root)
            } else {
                (root - qb) / (2.0 * qa)
            }
        };
        let theta = match *self {
            DomainKind::Disc { radius } => quadratic(radius, radius),
            DomainKind::Ellipse { a, b } => quadratic(a, b),
            DomainKind::Superellipse { .. } => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.level(px + mid * vx, py + mid * vy) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        };
        theta.clamp(f64::MIN_POSITIVE, 1.0)
    }

    /// Convex function vanishing on the boundary. Quadratic with Hessian
    /// eigenvalues in `(0, 1]` for discs and ellipses.
    pub fn bowl(&self, x: f64, y: f64) -> f64 {
        let (a, b) = self.half_extents();
        let m = a.min(b);
        0.5 * m * m * self.level(x, y)
    }

    fn perimeter_estimate(&self) -> f64 {
        let (a, b) = self.half_extents();
        // Ramanujan; within a few percent for superellipses, which only
        // affects the sample count.
        let h = ((a - b) / (a + b)) * ((a - b) / (a + b));
        PI * (a + b) * (1.0 + 3.0 * h / (10.0 + math::sqrt(4.0 - 3.0 * h)))
    }
}

/// Weights for a second difference `w_plus u(+) + w_minus u(-) + w_center u`
/// along one stencil line, plus the matching three-point first difference.
/// `plus` and `minus` are grid indices; exterior nodes hold zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineStencil {
    pub plus: u32,
    pub minus: u32,
    pub w_plus: f64,
    pub w_minus: f64,
    pub w_center: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    pub g_center: f64,
    /// True when both neighbours are interior nodes.
    pub full: bool,
}

impl LineStencil {
    /// `len_sq` is the squared length of a full step, used exactly on full
    /// lines: `hypot(1, 1)^2` is not 2 in binary64.
    fn new(plus: u32, minus: u32, h_plus: f64, h_minus: f64, full: bool, len_sq: f64) -> Self {
        let sum = h_plus + h_minus;
        let prod = h_plus * h_minus;
        let (w_plus, w_minus, w_center) = if full {
            let w = 1.0 / len_sq;
            (w, w, -2.0 * w)
        } else {
            (2.0 / (h_plus * sum), 2.0 / (h_minus * sum), -2.0 / prod)
        };
        Self {
            plus,
            minus,
            w_plus,
            w_minus,
            w_center,
            g_plus: h_minus * h_minus / (prod * sum),
            g_minus: -h_plus * h_plus / (prod * sum),
            g_center: (h_plus * h_plus - h_minus * h_minus) / (prod * sum),
            full,
        }
    }

    #[inline]
    pub fn second(&self, values: &[f64], center: f64) -> f64 {
        if self.full {
            // One rounding of the difference instead of three weighted terms.
            return (values[self.plus as usize] + values[self.minus as usize] - 2.0 * center)
                * self.w_plus;
        }
        self.w_plus * values[self.plus as usize]
            + self.w_minus * values[self.minus as usize]
            + self.w_center * center
    }

    #[inline]
    pub fn first(&self, values: &[f64], center: f64) -> f64 {
        self.g_plus * values[self.plus as usize]
            + self.g_minus * values[self.minus as usize]
            + self.g_center * center
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub grid: u32,
    pub i: i32,
    pub j: i32,
    pub x: f64,
    pub y: f64,
    /// Cut fraction per entry of [`DIRECTIONS`], 1 when the neighbour is interior.
    pub fractions: [f64; 16],
    pub lines: [LineStencil; LINE_COUNT],
    /// Smallest distance to the boundary along the eight nearest-neighbour rays.
    pub boundary_distance: f64,
    /// All eight nearest neighbours are interior.
    pub full_stencil: bool,
}

/// An interior node whose value is `weight * value(master)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slave {
    pub node: u32,
    pub master: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub x: f64,
    pub y: f64,
    /// Outward unit normal.
    pub nx: f64,
    pub ny: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    h: f64,
    mx: i32,
    my: i32,
    interior: Vec<bool>,
    node_of_grid: Vec<u32>,
    nodes: Vec<Node>,
    active: Vec<u32>,
    slaves: Vec<Slave>,
    is_slave: Vec<bool>,
    boundary: Vec<BoundarySample>,
    area: f64,
    diameter: f64,
}

pub const NO_NODE: u32 = u32::MAX;

impl Domain {
    pub fn new(kind: DomainKind, h: f64) -> Result<Self> {
        kind.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "grid spacing h = {h} must be positive"
            )));
        }
        let (ex, ey) = kind.half_extents();
        let mx = math::ceil(ex / h) as i32 + GRID_MARGIN;
        let my = math::ceil(ey / h) as i32 + GRID_MARGIN;
        let width = (2 * mx + 1) as usize;
        let height = (2 * my + 1) as usize;
        let mut interior = vec![false; width * height];
        let mut node_of_grid = vec![NO_NODE; width * height];
        let mut count = 0u32;
        for j in -my..=my {
            for i in -mx..=mx {
                let g = (j + my) as usize * width + (i + mx) as usize;
                if kind.level(f64::from(i) * h, f64::from(j) * h) < 0.0 {
                    interior[g] = true;
                    node_of_grid[g] = count;
                    count += 1;
                }
            }
        }
        if (count as usize) < MIN_INTERIOR_NODES {
            return Err(Error::DegenerateGeometry(format!(
                "only {count} interior nodes at h = {h}; need at least {MIN_INTERIOR_NODES}"
            )));
        }

        let grid_index = |i: i32, j: i32| ((j + my) as usize * width + (i + mx) as usize) as u32;
        let mut nodes = Vec::with_capacity(count as usize);
        for j in -my..=my {
            for i in -mx..=mx {
                let g = grid_index(i, j);
                if !interior[g as usize] {
                    continue;
                }
                let (x, y) = (f64::from(i) * h, f64::from(j) * h);
                let mut fractions = [1.0; 16];
                let mut boundary_distance = f64::INFINITY;
                for (d, &(di, dj)) in DIRECTIONS.iter().enumerate() {
                    let tg = grid_index(i + di, j + dj);
                    if !interior[tg as usize] {
                        let (vx, vy) = (f64::from(di) * h, f64::from(dj) * h);
                        fractions[d] = kind.crossing(x, y, vx, vy);
                        if d < 8 {
                            let dist = fractions[d] * math::hypot(vx, vy);
                            boundary_distance = boundary_distance.min(dist);
                        }
                    }
                }
                let lines = core::array::from_fn(|l| {
                    let (dp, dm) = (2 * l, 2 * l + 1);
                    let (di, dj) = DIRECTIONS[dp];
                    let len = math::hypot(f64::from(di), f64::from(dj)) * h;
                    let plus = grid_index(i + di, j + dj);
                    let minus = grid_index(i - di, j - dj);
                    let full = interior[plus as usize] && interior[minus as usize];
                    let len_sq = f64::from(di * di + dj * dj) * h * h;
                    LineStencil::new(
                        plus,
                        minus,
                        fractions[dp] * len,
                        fractions[dm] * len,
                        full,
                        len_sq,
                    )
                });
                let full_stencil = fractions[..8].iter().all(|&f| f == 1.0)
                    && DIRECTIONS[..8]
                        .iter()
                        .all(|&(di, dj)| interior[grid_index(i + di, j + dj) as usize]);
                nodes.push(Node {
                    grid: g,
                    i,
                    j,
                    x,
                    y,
                    fractions,
                    lines,
                    boundary_distance,
                    full_stencil,
                });
            }
        }

        let slaves = Self::select_slaves(&nodes, &node_of_grid, h, grid_index);
        let mut is_slave = vec![false; nodes.len()];
        for s in &slaves {
            is_slave[s.node as usize] = true;
        }
        let active = (0..nodes.len() as u32)
            .filter(|&k| !is_slave[k as usize])
            .collect();

        let boundary = Self::sample_boundary(&kind, h);
        Ok(Self {
            kind,
            h,
            mx,
            my,
            interior,
            node_of_grid,
            nodes,
            active,
            slaves,
            is_slave,
            boundary,
            area: kind.area(),
            diameter: kind.diameter(),
        })
    }

    fn select_slaves(
        nodes: &[Node],
        node_of_grid: &[u32],
        h: f64,
        grid_index: impl Fn(i32, i32) -> u32,
    ) -> Vec<Slave> {
        let near = |n: &Node| n.boundary_distance < SLAVE_DISTANCE * h;
        let mut slaves = Vec::new();
        for (k, node) in nodes.iter().enumerate() {
            if !near(node) {
                continue;
            }
            let mut order: [usize; 8] = core::array::from_fn(|d| d);
            let dist = |d: usize| {
                let (di, dj) = DIRECTIONS[d];
                node.fractions[d] * math::hypot(f64::from(di), f64::from(dj)) * h
            };
            order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)));
            for d in order {
                if node.fractions[d] == 1.0 {
                    break;
                }
                let (di, dj) = DIRECTIONS[d];
                let q = node_of_grid[grid_index(node.i - di, node.j - dj) as usize];
                if q == NO_NODE || near(&nodes[q as usize]) {
                    continue;
                }
                let s = dist(d);
                let step = math::hypot(f64::from(di), f64::from(dj)) * h;
                slaves.push(Slave {
                    node: k as u32,
                    master: q,
                    weight: s / (s + step),
                });
                break;
            }
        }
        slaves
    }

    fn sample_boundary(kind: &DomainKind, h: f64) -> Vec<BoundarySample> {
        let count = (math::ceil(kind.perimeter_estimate() / h) as usize).max(64);
        (0..count)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / count as f64;
                let (x, y) = kind.boundary_point(theta);
                let (gx, gy) = kind.level_gradient(x, y);
                let norm = math::hypot(gx, gy);
                BoundarySample {
                    x,
                    y,
                    nx: gx / norm,
                    ny: gy / norm,
                }
            })
            .collect()
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Grid nodes per row and per column.
    pub fn shape(&self) -> (usize, usize) {
        ((2 * self.mx + 1) as usize, (2 * self.my + 1) as usize)
    }

    /// Index range of the grid, `-mx..=mx` by `-my..=my`.
    pub fn index_bounds(&self) -> (i32, i32) {
        (self.mx, self.my)
    }

    pub fn grid_len(&self) -> usize {
        self.interior.len()
    }

    pub fn grid_index(&self, i: i32, j: i32) -> Option<usize> {
        if i.abs() > self.mx || j.abs() > self.my {
            return None;
        }
        let (width, _) = self.shape();
        Some((j + self.my) as usize * width + (i + self.mx) as usize)
    }

    pub fn grid_coords(&self, g: usize) -> (i32, i32) {
        let (width, _) = self.shape();
        ((g % width) as i32 - self.mx, (g / width) as i32 - self.my)
    }

    pub fn position(&self, g: usize) -> (f64, f64) {
        let (i, j) = self.grid_coords(g);
        (f64::from(i) * self.h, f64::from(j) * self.h)
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn is_interior(&self, g: usize) -> bool {
        self.interior[g]
    }

    /// Interior nodes in row-major order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Compact node index of a grid index, if interior.
    pub fn node_index(&self, g: usize) -> Option<usize> {
        match self.node_of_grid[g] {
            NO_NODE => None,
            k => Some(k as usize),
        }
    }

    /// Nodes that carry their own equation (not slaved).
    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn slaves(&self) -> &[Slave] {
        &self.slaves
    }

    pub fn is_slave(&self, node: usize) -> bool {
        self.is_slave[node]
    }

    /// Overwrite slaved values from their masters. `values` is indexed by grid.
    pub fn apply_slaves(&self, values: &mut [f64]) {
        for s in &self.slaves {
            let master = self.nodes[s.master as usize].grid as usize;
            values[self.nodes[s.node as usize].grid as usize] = s.weight * values[master];
        }
    }

    pub fn boundary_samples(&self) -> &[BoundarySample] {
        &self.boundary
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Node-count area estimate `#interior * h^2`.
    pub fn mask_area(&self) -> f64 {
        self.nodes.len() as f64 * self.h * self.h
    }

    /// Grid index of the node mirrored through the origin.
    pub fn mirror(&self, g: usize) -> Option<usize> {
        let (i, j) = self.grid_coords(g);
        self.grid_index(-i, -j)
    }

    pub fn is_centrally_symmetric(&self) -> bool {
        self.nodes.iter().all(|n| {
            self.mirror(n.grid as usize)
                .is_some_and(|m| self.interior[m])
        })
    }

    /// Bilinear interpolation of a grid field at an arbitrary point.
    pub fn interpolate(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let fx = x / self.h;
        let fy = y / self.h;
        let i0 = math::floor(fx) as i32;
        let j0 = math::floor(fy) as i32;
        let (tx, ty) = (fx - f64::from(i0), fy - f64::from(j0));
        let at = |i: i32, j: i32| self.grid_index(i, j).map_or(0.0, |g| values[g]);
        (1.0 - tx) * (1.0 - ty) * at(i0, j0)
            + tx * (1.0 - ty) * at(i0 + 1, j0)
            + (1.0 - tx) * ty * at(i0, j0 + 1)
            + tx * ty * at(i0 + 1, j0 + 1)
    }
}

pub fn make_domain(kind: DomainKind, h: f64) -> Result<Domain> {
    Domain::new(kind, h)
}
