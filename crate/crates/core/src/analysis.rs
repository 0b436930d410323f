//! Diagnostics on evolved fields: distance to the self-similar profile,
//! power-law rate fits, gradient envelopes and symmetry defects.

use alloc::format;
use alloc::vec::Vec;

use crate::domain::DomainKind;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::math;
use crate::operator::{grad_norm_sq, OperatorOptions};
use crate::params::FlowParams;

/// Diagnostics recorded at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub sup_abs_u: f64,
    pub grad_sup: f64,
    /// `sup |(1 + t)^gamma u - psi|`.
    pub deviation_sup: f64,
    /// Extremes of `((1 + t)^gamma u - psi) / (-psi)` over nodes with `|psi| >= h`.
    pub deviation_lower: f64,
    pub deviation_upper: f64,
    /// Radial (disc) or central defect of `(1 + t)^gamma u`; `None` when the
    /// domain lacks the symmetry.
    pub symmetry_defect: Option<f64>,
    pub g_current: f64,
    /// Convexity correction added since the previous sample.
    pub injected_mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// `y ~ c / (1 + t)^p`.
    pub c: f64,
    pub p: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

impl RateFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.c * math::powf(1.0 + t, -self.p)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateSeries {
    samples: Vec<Sample>,
    pub fit: Option<RateFit>,
}

impl RateSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample; times must increase strictly.
    pub fn push(&mut self, s: Sample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(Error::InvalidOption(format!(
                    "sample time {} does not follow {}",
                    s.t, last.t
                )));
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_injected_mu(&self) -> f64 {
        self.samples.iter().map(|s| s.injected_mu).sum()
    }

    /// Fit `deviation_sup ~ c/(1+t)^p` over the window and store the result.
    pub fn fit_rate(&mut self, window: (f64, f64)) -> Result<RateFit> {
        let fit = fit_rate(self, window)?;
        self.fit = Some(fit);
        Ok(fit)
    }
}

fn check_same(u: &ScalarField, psi: &ScalarField) -> Result<()> {
    if u.same_domain(psi) {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

/// Time of a field, treating static fields as `t = 0`.
fn field_time(u: &ScalarField) -> f64 {
    u.time().max(0.0)
}

/// `sup |(1 + t)^gamma u - psi|` with `t` taken from `u`.
pub fn deviation_sup(u: &ScalarField, psi: &ScalarField, params: &FlowParams) -> Result<f64> {
    check_same(u, psi)?;
    let scale = math::powf(1.0 + field_time(u), params.gamma());
    Ok(u.interior_values()
        .zip(psi.interior_values())
        .map(|(a, b)| math::abs(scale * a - b))
        .fold(0.0, f64::max))
}

/// Extremes of `((1 + t)^gamma u - psi) / (-psi)` over nodes with `|psi| >= h`.
/// For `u = phi(t) psi` this is `1 - (1 + t)^gamma phi(t)`.
pub fn normalized_deviation_range(
    u: &ScalarField,
    psi: &ScalarField,
    params: &FlowParams,
) -> Result<(f64, f64)> {
    check_same(u, psi)?;
    let h = psi.domain().h();
    let scale = math::powf(1.0 + field_time(u), params.gamma());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in u.interior_values().zip(psi.interior_values()) {
        if math::abs(b) >= h {
            let q = (scale * a - b) / -b;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    if lo > hi {
        return Err(Error::EnvelopeUndefined("no node with |psi| >= h".into()));
    }
    Ok((lo, hi))
}

/// Least-squares fit of `ln y = ln c - p ln(1 + t)` over samples in `window`.
pub fn fit_power_law(points: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, y)| *t >= window.0 && *t <= window.1 && *y > 0.0 && y.is_finite())
        .map(|&(t, y)| (math::ln_1p(t), math::ln(y)))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientSamples {
            found: pts.len(),
            needed: 4,
        });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples {
            found: 1,
            needed: 4,
        });
    }
    let slope = sxy / sxx;
    Ok(RateFit {
        c: math::exp(my - slope * mx),
        p: -slope,
        window,
        samples: pts.len(),
    })
}

/// Rate fit of `deviation_sup`.
pub fn fit_rate(series: &RateSeries, window: (f64, f64)) -> Result<RateFit> {
    fit_by(series, window, |s| Some(s.deviation_sup))
}

/// Rate fit of any per-sample quantity.
pub fn fit_by(
    series: &RateSeries,
    window: (f64, f64),
    select: impl Fn(&Sample) -> Option<f64>,
) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series
        .samples()
        .iter()
        .filter_map(|s| select(s).map(|y| (s.t, y)))
        .collect();
    fit_power_law(&pts, window)
}

/// Largest over the window divided by smallest of `(1 + t) y(t)`.
pub fn scaled_spread(
    series: &RateSeries,
    window: (f64, f64),
    select: impl Fn(&Sample) -> Option<f64>,
) -> f64 {
    let vals = series
        .samples()
        .iter()
        .filter(|s| s.t >= window.0 && s.t <= window.1)
        .filter_map(|s| select(s).map(|y| (1.0 + s.t) * y));
    let (lo, hi) = vals.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo > 0.0 && lo.is_finite() {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// `sqrt(max |grad u|^2)` over interior nodes.
pub fn grad_sup(u: &ScalarField, opts: &OperatorOptions) -> f64 {
    math::sqrt(grad_norm_sq(u, opts).interior_values().fold(0.0, f64::max))
}

/// Sup over boundary samples of the outward normal derivative, from the
/// one-sided formula `(psi(x - 4h nu) - 4 psi(x - 2h nu)) / (4h)` with the
/// interior values interpolated bilinearly and `psi = 0` on the boundary.
pub fn boundary_normal_derivative_sup(psi: &ScalarField) -> f64 {
    let d = psi.domain();
    let h = d.h();
    let v = psi.values();
    d.boundary_samples()
        .iter()
        .map(|b| {
            let at = |s: f64| d.interpolate(v, b.x - s * b.nx, b.y - s * b.ny);
            (at(4.0 * h) - 4.0 * at(2.0 * h)) / (4.0 * h)
        })
        .fold(0.0, f64::max)
}

/// PASS/FAIL over samples with the per-sample margins.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// `(t, margin)`; a negative margin is a violation.
    pub margins: Vec<(f64, f64)>,
    pub worst: f64,
    pub pass: bool,
}

impl CheckReport {
    fn from_margins(margins: Vec<(f64, f64)>) -> Self {
        let worst = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        let pass = margins.iter().all(|m| m.1 >= 0.0);
        Self {
            margins,
            worst,
            pass,
        }
    }
}

/// `G^lambda sup psi_nu (C4 + t)^lambda` with `C4 = phi_lower(0)^(1 - n alpha)`.
pub fn gradient_envelope(
    t: f64,
    psi_nu_sup: f64,
    g: f64,
    params: &FlowParams,
    phi0_lower: f64,
) -> f64 {
    let c4 = math::powf(phi0_lower, params.one_minus_n_alpha());
    math::powf(g, params.lambda()) * psi_nu_sup * math::powf(c4 + t, params.lambda())
}

/// Relative margins `1 - grad_sup / ((1 + slack) envelope)`.
pub fn gradient_envelope_check(
    series: &RateSeries,
    psi_nu_sup: f64,
    g: f64,
    params: &FlowParams,
    phi0_lower: f64,
    slack: f64,
) -> CheckReport {
    CheckReport::from_margins(
        series
            .samples()
            .iter()
            .map(|s| {
                let env = (1.0 + slack) * gradient_envelope(s.t, psi_nu_sup, g, params, phi0_lower);
                (s.t, 1.0 - s.grad_sup / env)
            })
            .collect(),
    )
}

/// Margins of `grad_sup(t_k) <= grad_sup(t_{k-1}) + rel_slack * grad_sup(t_0)`,
/// relative to `grad_sup(t_0)`.
pub fn gradient_monotonicity_check(series: &RateSeries, rel_slack: f64) -> CheckReport {
    let s = series.samples();
    let Some(first) = s.first() else {
        return CheckReport::from_margins(Vec::new());
    };
    let scale = first.grad_sup.max(f64::MIN_POSITIVE);
    CheckReport::from_margins(
        s.windows(2)
            .map(|w| (w[1].t, rel_slack - (w[1].grad_sup - w[0].grad_sup) / scale))
            .collect(),
    )
}

/// Two-sided envelope for the normalised deviation `q`:
/// `-c2/(1+t) - (G^lambda - 1) <= q <= c3/(1+t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeConstants {
    /// Smallest constants making each side hold over the window.
    pub c2: f64,
    pub c3: f64,
    /// `max/min` of the per-sample constants (1 when all are negligible).
    pub c2_spread: f64,
    pub c3_spread: f64,
    /// `G^lambda - 1` used for the lower side at each sample.
    pub offsets: Vec<(f64, f64)>,
    pub stable: bool,
}

/// Constants below this are treated as zero when judging stability.
const NEGLIGIBLE: f64 = 1e-9;

fn spread(values: &[f64]) -> f64 {
    let big: Vec<f64> = values.iter().copied().filter(|&v| v > NEGLIGIBLE).collect();
    if big.len() < 2 {
        return 1.0;
    }
    let hi = big.iter().copied().fold(0.0, f64::max);
    let lo = big.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Extract `c2`, `c3` from recorded deviation ranges. `g_at` gives the `G`
/// in force at each sample (a constant, or the refined `G_m`).
pub fn lower_envelope_check(
    series: &RateSeries,
    params: &FlowParams,
    window: (f64, f64),
    g_at: impl Fn(&Sample) -> f64,
) -> EnvelopeConstants {
    let mut c2s = Vec::new();
    let mut c3s = Vec::new();
    let mut offsets = Vec::new();
    for s in series
        .samples()
        .iter()
        .filter(|s| s.t >= window.0 && s.t <= window.1)
    {
        let offset = math::powf(g_at(s), params.lambda()) - 1.0;
        offsets.push((s.t, offset));
        c2s.push((1.0 + s.t) * (-s.deviation_lower - offset).max(0.0));
        c3s.push((1.0 + s.t) * s.deviation_upper.max(0.0));
    }
    let c2 = c2s.iter().copied().fold(0.0, f64::max);
    let c3 = c3s.iter().copied().fold(0.0, f64::max);
    let (c2_spread, c3_spread) = (spread(&c2s), spread(&c3s));
    EnvelopeConstants {
        c2,
        c3,
        c2_spread,
        c3_spread,
        offsets,
        stable: c2_spread <= 3.0 && c3_spread <= 3.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryMode {
    /// `sup |u(x) - u(-x)|`.
    Central,
    /// Largest oscillation of `u` over annuli of width `h` (discs only).
    Radial,
}

pub fn symmetry_defect(u: &ScalarField, mode: SymmetryMode) -> Result<f64> {
    let d = u.domain();
    let v = u.values();
    match mode {
        SymmetryMode::Central => {
            if !d.is_centrally_symmetric() {
                return Err(Error::AsymmetricDomain);
            }
            Ok(d.nodes()
                .iter()
                .map(|n| {
                    let m = d.mirror(n.grid as usize).expect("symmetric mask");
                    math::abs(v[n.grid as usize] - v[m])
                })
                .fold(0.0, f64::max))
        }
        SymmetryMode::Radial => {
            let DomainKind::Disc { radius } = d.kind() else {
                return Err(Error::AsymmetricDomain);
            };
            let h = d.h();
            let bins = math::ceil(radius / h) as usize + 1;
            let mut lo = alloc::vec![f64::INFINITY; bins];
            let mut hi = alloc::vec![f64::NEG_INFINITY; bins];
            for n in d.nodes() {
                let b = ((math::hypot(n.x, n.y) / h) as usize).min(bins - 1);
                let x = v[n.grid as usize];
                lo[b] = lo[b].min(x);
                hi[b] = hi[b].max(x);
            }
            Ok(lo
                .iter()
                .zip(&hi)
                .filter(|(l, h)| l <= h)
                .map(|(l, h)| h - l)
                .fold(0.0, f64::max))
        }
    }
}

/// Symmetry mode supported by a domain: radial on discs, central otherwise.
pub fn natural_symmetry(kind: &DomainKind) -> SymmetryMode {
    match kind {
        DomainKind::Disc { .. } => SymmetryMode::Radial,
        _ => SymmetryMode::Central,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use alloc::sync::Arc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn p(alpha: f64) -> FlowParams {
        FlowParams::new(2, alpha, 0.0).unwrap()
    }

    fn disc(h: f64) -> Arc<Domain> {
        Arc::new(Domain::new(DomainKind::Disc { radius: 1.0 }, h).unwrap())
    }

    fn paraboloid(d: &Arc<Domain>) -> ScalarField {
        ScalarField::from_fn(d, |x, y| 0.5 * (x * x + y * y - 1.0))
    }

    #[test]
    fn deviation_examples() {
        let d = disc(0.05);
        let psi = paraboloid(&d);
        for a in [0.75, 1.0, 2.0] {
            let params = p(a);
            let t = 3.0;
            let phi = (1.0f64 + t).powf(params.lambda());
            let u = psi.scaled(phi).with_time(t);
            assert!(deviation_sup(&u, &psi, &params).unwrap() <= 1e-12);
            let shifted =
                ScalarField::from_fn(&d, |x, y| phi * (0.5 * (x * x + y * y - 1.0) + 0.01))
                    .with_time(t);
            assert!((deviation_sup(&shifted, &psi, &params).unwrap() - 0.01).abs() < 1e-12);
        }
        let other = disc(0.1);
        assert!(matches!(
            deviation_sup(&ScalarField::zeros(&other), &psi, &p(1.0)),
            Err(Error::DomainMismatch)
        ));
    }

    #[test]
    fn normalised_range_of_self_similar_data() {
        let d = disc(0.05);
        let psi = paraboloid(&d);
        let params = p(1.0);
        // phi0 = 2 gives q = 1 - F(1/2, t) = -1/(1 + 2t).
        let t = 1.5;
        let u = psi.scaled(1.0 / (0.5 + t)).with_time(t);
        let (lo, hi) = normalized_deviation_range(&u, &psi, &params).unwrap();
        assert!((lo + 0.25).abs() < 1e-12 && (hi + 0.25).abs() < 1e-12);
    }

    #[test]
    fn exact_power_laws_are_recovered() {
        let ts = [3.0, 7.0, 15.0, 31.0];
        let pts: Vec<_> = ts.iter().map(|&t| (t, 5.0 / (1.0 + t))).collect();
        let f = fit_power_law(&pts, (3.0, 31.0)).unwrap();
        assert!((f.c - 5.0).abs() < 1e-10 && (f.p - 1.0).abs() < 1e-10);
        let pts: Vec<_> = ts
            .iter()
            .map(|&t| (t, 2.0 / (1.0f64 + t).powf(1.5)))
            .collect();
        let f = fit_power_law(&pts, (3.0, 31.0)).unwrap();
        assert!((f.p - 1.5).abs() < 1e-10);
        assert!(matches!(
            fit_power_law(&pts[..3], (0.0, 100.0)),
            Err(Error::InsufficientSamples {
                found: 3,
                needed: 4
            })
        ));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let c: f64 = rng.random_range(0.01..100.0);
            let pw: f64 = rng.random_range(0.1..3.0);
            let pts: Vec<_> = (0..6)
                .map(|m| {
                    let t = f64::from(2u32.pow(m + 1)) - 1.0;
                    (t, c * (1.0 + t).powf(-pw))
                })
                .collect();
            let f = fit_power_law(&pts, (0.0, 1e9)).unwrap();
            assert!((f.c - c).abs() <= 1e-10 * c && (f.p - pw).abs() <= 1e-10);
        }
    }

    #[test]
    fn series_rejects_non_increasing_times() {
        let s = Sample {
            t: 1.0,
            sup_abs_u: 0.0,
            grad_sup: 0.0,
            deviation_sup: 0.0,
            deviation_lower: 0.0,
            deviation_upper: 0.0,
            symmetry_defect: None,
            g_current: 1.0,
            injected_mu: 0.0,
        };
        let mut series = RateSeries::new();
        series.push(s).unwrap();
        assert!(series.push(s).is_err());
        series.push(Sample { t: 2.0, ..s }).unwrap();
        assert_eq!(series.len(), 2);
    }

    #[test]
    fn symmetry_examples() {
        let h = 0.025;
        let d = disc(h);
        let u = paraboloid(&d);
        // Lipschitz constant of the paraboloid on the disc is 1.
        assert!(symmetry_defect(&u, SymmetryMode::Radial).unwrap() <= 2.0 * h);
        assert!(symmetry_defect(&u, SymmetryMode::Central).unwrap() <= 1e-15);
        let bump = |x: f64, y: f64| (1.0 - x * x - y * y).max(0.0);
        let v = ScalarField::from_fn(&d, |x, y| {
            0.5 * (x * x + y * y - 1.0) + 0.1 * x * bump(x, y)
        });
        let amplitude = ScalarField::from_fn(&d, |x, y| x * bump(x, y)).sup_abs();
        let c = symmetry_defect(&v, SymmetryMode::Central).unwrap();
        assert!((c - 0.2 * amplitude).abs() < 1e-12);
        let e = Arc::new(Domain::new(DomainKind::Ellipse { a: 1.0, b: 0.5 }, h).unwrap());
        assert!(matches!(
            symmetry_defect(&ScalarField::zeros(&e), SymmetryMode::Radial),
            Err(Error::AsymmetricDomain)
        ));
    }

    #[test]
    fn envelope_constants_for_self_similar_data() {
        let params = p(1.0);
        // phi0 = 2: q = -gamma (1 - s)/(s + t) with s = 1/2; lower side only.
        let mut series = RateSeries::new();
        for t in [3.0, 7.0, 15.0, 31.0] {
            let q = -0.5 / (0.5 + t);
            series
                .push(Sample {
                    t,
                    sup_abs_u: 0.0,
                    grad_sup: 0.0,
                    deviation_sup: 0.0,
                    deviation_lower: q,
                    deviation_upper: q,
                    symmetry_defect: None,
                    g_current: 1.0,
                    injected_mu: 0.0,
                })
                .unwrap();
        }
        let env = lower_envelope_check(&series, &params, (3.0, 31.0), |_| 1.0);
        assert_eq!(env.c3, 0.0);
        // Largest at the first sample: 4 * 0.5 / 3.5.
        assert!((env.c2 - 4.0 * 0.5 / 3.5).abs() < 1e-12);
        assert!(env.stable);
        let bound = crate::selfsim::lemma_f_bounds(0.5, 0.0, &params).unwrap();
        // F1's constant gamma (1 - s)/s = 1 dominates the extracted one.
        assert!(env.c2 <= bound.bound - 1.0 + 1e-12);
    }

    proptest! {
        #[test]
        fn deviation_is_a_seminorm(seed in 0u64..1000, c in -3.0f64..3.0) {
            let d = disc(0.1);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let zero = ScalarField::zeros(&d);
            let mut random = || {
                let v: Vec<f64> = (0..d.grid_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                ScalarField::from_values(&d, v, 2.0).unwrap()
            };
            let (u, w) = (random(), random());
            let params = p(1.0);
            let nrm = |f: &ScalarField| deviation_sup(f, &zero, &params).unwrap();
            let scaled = nrm(&u.scaled(c));
            prop_assert!((scaled - c.abs() * nrm(&u)).abs() <= 1e-12 * (1.0 + scaled));
            let sum = u.add_scaled(1.0, &w).unwrap();
            prop_assert!(nrm(&sum) <= nrm(&u) + nrm(&w) + 1e-12);
        }
    }
}
