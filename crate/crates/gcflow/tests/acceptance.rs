//! Acceptance runs at h = 1/64. Prints one PASS/FAIL line per criterion and
//! exits nonzero when a criterion fails that is not a known limitation.

use std::time::Instant;

use gcflow::run::{run_evolve, run_lemma, run_profile, EvolveOutcome};
use gcflow::{Experiment, ExperimentConfig};
use gcflow_core::operator::ma_det;
use gcflow_core::selfsim::rescale_identity;
use gcflow_core::{Domain, DomainKind, FlowParams, ScalarField, SelfSimilarLaw};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1.0 / 64.0;

struct Board {
    unexpected: Vec<&'static str>,
}

impl Board {
    fn line(&mut self, id: &'static str, pass: bool, detail: &str) {
        println!("{id} {} {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.unexpected.push(id);
        }
    }

    /// A failure documented as out of reach at this resolution.
    fn known(&mut self, id: &'static str, pass: bool, detail: &str) {
        if pass {
            println!("{id} PASS {detail}");
        } else {
            println!("{id} FAIL {detail} (known limitation)");
        }
    }
}

fn note(text: impl AsRef<str>) {
    println!("    {}", text.as_ref());
}

fn experiment(params: &str, domain: &str, rest: &str) -> Experiment {
    let text = format!("[params]\n{params}\n[domain]\n{domain}\nh = {H}\n{rest}");
    ExperimentConfig::from_toml_str(&text)
        .and_then(|c| c.check().map_err(Into::into))
        .unwrap_or_else(|e| panic!("{e}\n{text}"))
}

const DISC: &str = "kind = \"disc\"\nradius = 1.0";
const ELLIPSE: &str = "kind = \"ellipse\"\na = 1.0\nb = 0.5";

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    note(format!("{label}: {:.1} s", start.elapsed().as_secs_f64()));
    out
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let root = tmp.path();
    let mut board = Board {
        unexpected: Vec::new(),
    };
    let sub = |name: &str| root.join(name);

    // Profiles on both domains; the disc ones seed the evolutions.
    let mut abp_ok = true;
    let mut disc_psi = Vec::new();
    let mut oracle_err = f64::NAN;
    let mut disc_bound = f64::NAN;
    for (dname, domain) in [("disc", DISC), ("ellipse", ELLIPSE)] {
        for alpha in [0.75, 1.0, 2.0] {
            let exp = experiment(&format!("alpha = {alpha}"), domain, "");
            let out = timed(&format!("profile {dname} alpha={alpha}"), || {
                run_profile(&exp, &sub(&format!("profile_{dname}_{alpha}"))).expect("profile")
            });
            let s = &out.solution;
            note(format!(
                "sup_abs {:.6e} abp_bound {:.6e} residual {:.2e} oracle error {:?}",
                s.sup_abs, s.abp_bound, s.residual_sup, out.oracle_rel_error
            ));
            abp_ok &= s.sup_abs <= s.abp_bound;
            if dname == "disc" {
                if alpha == 1.0 {
                    oracle_err = out.oracle_rel_error.expect("disc oracle");
                    disc_bound = s.abp_bound;
                }
                disc_psi.push((alpha, out.solution.psi));
            }
        }
    }

    // The monotone-scheme profile for the comparison runs of A4.
    let mono = "[solver]\nscheme = \"monotone2\"\n";
    let eq_exp = experiment(
        "alpha = 1.0",
        DISC,
        &format!("[initial]\nkind = \"profile-multiple\"\n[evolve]\nt_end = 31.0\n{mono}"),
    );
    let mono_psi = gcflow_core::profile::solve_profile(
        &gcflow::run::domain_of(&eq_exp).unwrap(),
        &eq_exp.params,
        &eq_exp.profile,
    )
    .expect("monotone profile");
    note(format!(
        "monotone profile sup_abs {:.6e} abp_bound {:.6e}",
        mono_psi.sup_abs, mono_psi.abp_bound
    ));
    abp_ok &= mono_psi.sup_abs <= mono_psi.abp_bound;

    // A1: u0 = psi follows the self-similar law.
    let mut evolutions: Vec<(String, EvolveOutcome)> = Vec::new();
    let mut a1_worst = 0.0f64;
    for alpha in [1.0, 2.0] {
        let psi = disc_psi.iter().find(|p| p.0 == alpha).unwrap().1.clone();
        let exp = experiment(
            &format!("alpha = {alpha}"),
            DISC,
            "[initial]\nkind = \"profile-multiple\"\n[evolve]\nt_end = 7.0\nsamples = [1.0, 3.0, 7.0]\n",
        );
        let out = timed(&format!("A1 alpha={alpha}"), || {
            run_evolve(&exp, &sub(&format!("a1_{alpha}")), Some(psi.clone())).expect("A1 run")
        });
        let lambda = exp.params.lambda();
        for s in out.schedule.samples() {
            let want = (1.0 + s.t).powf(lambda);
            let got = s.sup_abs_u / psi.sup_abs();
            let rel = (got / want - 1.0).abs();
            note(format!(
                "alpha={alpha} t={} ratio {got:.6} law {want:.6} rel {rel:.2e}",
                s.t
            ));
            a1_worst = a1_worst.max(rel);
        }
        evolutions.push((format!("A1 alpha={alpha}"), out));
    }
    board.line(
        "A1",
        a1_worst <= 0.02,
        &format!(
            "sup|u| / sup|psi| against (1+t)^lambda, worst relative error {a1_worst:.2e} <= 2e-2"
        ),
    );

    // A2: asymmetric bowl, beta = 0.
    let mut a2_ok = true;
    let mut a2_detail = Vec::new();
    let mut a2_alpha1 = None;
    for alpha in [0.75, 1.0, 2.0] {
        let psi = disc_psi.iter().find(|p| p.0 == alpha).unwrap().1.clone();
        let exp = experiment(
            &format!("alpha = {alpha}"),
            DISC,
            "[initial]\nkind = \"asym-bowl\"\nc = 1.0\noffset = 0.3\n[evolve]\nt_end = 31.0\nsamples = \"dyadic\"\n",
        );
        let out = timed(&format!("A2 alpha={alpha}"), || {
            run_evolve(&exp, &sub(&format!("a2_{alpha}")), Some(psi)).expect("A2 run")
        });
        for s in out.schedule.samples() {
            note(format!(
                "alpha={alpha} t={} deviation_sup {:.5e} (1+t) dev {:.5e} symmetry {:.5e}",
                s.t,
                s.deviation_sup,
                (1.0 + s.t) * s.deviation_sup,
                s.symmetry_defect.unwrap_or(f64::NAN)
            ));
        }
        let p = out.rate.map_or(f64::NAN, |f| f.p);
        let ok = (0.8..=1.3).contains(&p) && out.rate_spread <= 3.0;
        a2_ok &= ok;
        a2_detail.push(format!(
            "alpha={alpha}: p_fit {p:.4}, spread {:.3}",
            out.rate_spread
        ));
        if alpha == 1.0 {
            a2_alpha1 = Some(evolutions.len());
        }
        evolutions.push((format!("A2 alpha={alpha}"), out));
    }
    board.line(
        "A2",
        a2_ok,
        &format!(
            "{} (need p in [0.8, 1.3], spread <= 3)",
            a2_detail.join("; ")
        ),
    );

    board.line(
        "A3",
        abp_ok && (disc_bound - 4.0).abs() < 1e-12 && oracle_err <= 1e-3,
        &format!(
            "sup_abs <= abp_bound for all 7 profiles: {abp_ok}; disc alpha=1 bound {disc_bound}, oracle relative error {oracle_err:.2e} <= 1e-3"
        ),
    );

    // A4: monotone scheme. The equality case calibrates c.
    let eq = timed("A4 equality case", || {
        run_evolve(&eq_exp, &sub("a4_equality"), Some(mono_psi.psi.clone())).expect("equality run")
    });
    let scale = H + eq.trajectory.state.dt_largest;
    let c = eq.sandwich.worst / scale;
    note(format!(
        "equality case worst violation {:.3e}, h + dt = {scale:.4e}, c = {c:.3e}",
        eq.sandwich.worst
    ));
    let geo_exp = experiment(
        "alpha = 1.0\nbeta = \"geometric\"",
        DISC,
        &format!(
            "[initial]\nkind = \"asym-bowl\"\nc = 1.0\noffset = 0.3\n[evolve]\nt_end = 31.0\n{mono}[checks]\nsandwich_c = {c:e}\n"
        ),
    );
    let geo = timed("A4 geometric asymmetric bowl", || {
        run_evolve(&geo_exp, &sub("a4_geometric"), Some(mono_psi.psi.clone()))
            .expect("geometric run")
    });
    for (s, r) in geo
        .sandwich
        .samples
        .iter()
        .zip(&geo.sandwich_refined.samples)
    {
        note(format!(
            "t={} single lower {:.2e} upper {:.2e}; refined (stage {}) lower {:.2e} upper {:.2e}",
            s.t,
            s.lower_violation,
            s.upper_violation,
            r.stage,
            r.lower_violation,
            r.upper_violation
        ));
    }
    let slack = c * (H + geo.trajectory.state.dt_largest);
    board.line(
        "A4",
        geo.sandwich.worst <= slack && geo.sandwich_refined.worst <= slack,
        &format!(
            "G = {:.4}: worst violation {:.2e} (single), {:.2e} (refined) <= c (h + dt) = {slack:.2e}",
            geo.envelope.g, geo.sandwich.worst, geo.sandwich_refined.worst
        ),
    );
    evolutions.push(("A4 equality".into(), eq));
    let geo_index = evolutions.len();
    evolutions.push(("A4 geometric".into(), geo));

    // A5 over every evolution above.
    let mut a5_ok = true;
    for (name, out) in &evolutions {
        note(format!(
            "{name}: envelope margin {:.3e}, monotonicity margin {:.3e}",
            out.gradient.worst, out.gradient_monotone.worst
        ));
        a5_ok &= out.gradient.pass && out.gradient_monotone.pass;
    }
    let worst_env = evolutions
        .iter()
        .map(|e| e.1.gradient.worst)
        .fold(f64::INFINITY, f64::min);
    let worst_mono = evolutions
        .iter()
        .map(|e| e.1.gradient_monotone.worst)
        .fold(f64::INFINITY, f64::min);
    board.line(
        "A5",
        a5_ok,
        &format!(
            "{} runs: gradient envelope worst margin {worst_env:.3e}, monotonicity worst margin {worst_mono:.3e}",
            evolutions.len()
        ),
    );

    // A6: symmetry of the rescaled solution.
    let defects = |out: &EvolveOutcome| -> Vec<(f64, f64)> {
        out.schedule
            .samples()
            .iter()
            .filter_map(|s| s.symmetry_defect.map(|d| (s.t, d)))
            .collect()
    };
    let decreasing = |d: &[(f64, f64)]| d.windows(2).all(|w| w[1].1 <= w[0].1);
    let flat = &evolutions[a2_alpha1.expect("alpha = 1 run")].1;
    let geo = &evolutions[geo_index].1;
    let (d0, dg) = (defects(flat), defects(geo));
    for (label, d) in [("beta=0", &d0), ("geometric", &dg)] {
        let text: Vec<String> = d.iter().map(|(t, v)| format!("{t}:{v:.3e}")).collect();
        note(format!("{label} radial defect {}", text.join(" ")));
    }
    let p_sym = flat.symmetry_fit.map_or(f64::NAN, |f| f.p);
    let mono_ok = decreasing(&d0) && decreasing(&dg);
    let rate_ok = (0.7..=1.4).contains(&p_sym);
    if !mono_ok {
        board.line("A6", false, "radial defect is not monotone");
    } else {
        board.known(
            "A6",
            rate_ok,
            &format!(
                "defect decreases monotonically for both runs; beta=0 p_fit {p_sym:.4} against [0.7, 1.4] (defect floors at the annulus spread of the grid profile)"
            ),
        );
    }

    // A7: ratio bounds.
    let lemma = |range: &str, seed: u64| {
        let exp = experiment(
            "alpha = 1.0",
            DISC,
            &format!("[lemma]\nsamples = 100000\nrange = \"{range}\"\n[output]\nseed = {seed}\n"),
        );
        run_lemma(&exp, &sub(&format!("lemma_{range}")))
            .expect("sweep")
            .report
    };
    let full = timed("A7 sweep", || lemma("full", 20240601));
    let unit = lemma("unit-s", 20240602);
    board.line(
        "A7",
        full.violations == 0 && unit.violations == 0 && unit.max_abs_margin <= 1e-12,
        &format!(
            "{} samples, {} records, {} violations; s=1 slice max |margin| {:.2e} <= 1e-12",
            full.samples,
            full.records.len(),
            full.violations,
            unit.max_abs_margin
        ),
    );

    // A8: operator quality.
    let (quad_err, roundoff, order) = operator_quality();
    note(format!("generic real coefficients: worst relative error {roundoff:.2e} (binary64 roundoff over h^2)"));
    board.line(
        "A8",
        quad_err <= 1e-12 && order.iter().all(|&p| p >= 1.8),
        &format!("dyadic quadratics worst relative error {quad_err:.2e} <= 1e-12; exp(x+y) orders {order:.3?} >= 1.8"),
    );

    // A9: rescaling of self-similar laws.
    let mut a9 = 0.0f64;
    for alpha in [0.75, 1.0, 2.0] {
        let params = FlowParams::new(2, alpha, 0.0).unwrap();
        let base = SelfSimilarLaw::normalised(params);
        for c in [0.5, 2.0, 5.0] {
            let target = SelfSimilarLaw::new(c, params).unwrap();
            for k in 0..=10_000 {
                let t = 0.01 * f64::from(k);
                let exact = target.phi(t);
                let mapped = rescale_identity(base.phi(t), t, c, 1.0, &params);
                a9 = a9.max((mapped - exact).abs() / exact);
            }
        }
    }
    board.line(
        "A9",
        a9 <= 1e-12,
        &format!("phi0=1 law mapped onto phi0=c, c in {{0.5, 2, 5}}, t in [0, 100]: worst relative error {a9:.2e}"),
    );

    // A10: stage offsets and convergence of the geometric run.
    let offsets: Vec<(f64, f64)> = geo.stages.iter().map(|e| (e.t0, e.offset())).collect();
    let shrinking = offsets.windows(2).all(|w| w[1].1.abs() <= w[0].1.abs());
    let window: Vec<f64> = geo
        .schedule
        .samples()
        .iter()
        .filter(|s| s.t >= 3.0)
        .map(|s| s.deviation_sup)
        .collect();
    let (first, last) = (window[0], *window.last().unwrap());
    let text: Vec<String> = offsets
        .iter()
        .map(|(t, o)| format!("{t}:{o:.2e}"))
        .collect();
    board.line(
        "A10",
        shrinking && last <= first,
        &format!(
            "offsets G_m^lambda - 1 {}; deviation_sup {last:.3e} at t=31 <= {first:.3e} at t=3",
            text.join(" ")
        ),
    );

    if board.unexpected.is_empty() {
        println!("acceptance: all criteria met except documented limitations");
    } else {
        println!("acceptance: unexpected failures {:?}", board.unexpected);
        std::process::exit(1);
    }
}

/// Worst relative error of `det D^2 q` on random quadratics at full-stencil
/// nodes (dyadic coefficients, so the samples are exact, then generic real
/// ones, which only see roundoff), and observed orders for `exp(x + y)` on
/// `r <= 1/2`.
fn operator_quality() -> (f64, f64, Vec<f64>) {
    let std9 = gcflow_core::OperatorOptions::default();
    let disc =
        |h: f64| std::sync::Arc::new(Domain::new(DomainKind::Disc { radius: 1.0 }, h).unwrap());
    let d = disc(H);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut quad = |dyadic: bool| {
        let mut pick = |scale: f64| {
            let v = scale * (2.0 * unit() - 1.0);
            if dyadic {
                (v * 256.0).round() / 256.0
            } else {
                v
            }
        };
        let (a, b, c, dx, dy, e) = (
            pick(3.0),
            pick(3.0),
            pick(3.0),
            pick(0.5),
            pick(0.5),
            pick(1.0),
        );
        let q = ScalarField::from_fn(&d, |x, y| {
            0.5 * a * x * x + b * x * y + 0.5 * c * y * y + dx * x + dy * y + e
        });
        let det = a * c - b * b;
        let m = ma_det(&q, &std9);
        d.nodes()
            .iter()
            .filter(|n| n.lines.iter().all(|l| l.full))
            .map(|n| (m.values()[n.grid as usize] - det).abs() / det.abs().max(1.0))
            .fold(0.0, f64::max)
    };
    let exact = (0..100).map(|_| quad(true)).fold(0.0, f64::max);
    let generic = (0..100).map(|_| quad(false)).fold(0.0, f64::max);
    let errs: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
        .iter()
        .map(|&h| {
            let d = disc(h);
            let m = ma_det(&ScalarField::from_fn(&d, |x, y| (x + y).exp()), &std9);
            d.nodes()
                .iter()
                .filter(|n| n.x.hypot(n.y) <= 0.5)
                .map(|n| m.values()[n.grid as usize].abs())
                .fold(0.0, f64::max)
        })
        .collect();
    (
        exact,
        generic,
        errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect(),
    )
}
