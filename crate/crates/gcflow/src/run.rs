//! Experiment runners. Each writes its CSV files and a summary into the
//! output directory and returns the in-memory results as well.

use std::path::Path;
use std::sync::Arc;

use gcflow_core::analysis::{
    boundary_normal_derivative_sup, fit_by, fit_rate, gradient_envelope_check,
    gradient_monotonicity_check, scaled_spread, CheckReport,
};
use gcflow_core::flow::{
    build_envelope, check_sandwich, evolve, refined_envelopes, SandwichReport,
};
use gcflow_core::profile::solve_profile;
use gcflow_core::radial::{radial_oracle, RadialOptions, RadialProfile};
use gcflow_core::selfsim::{lemma_sweep, SweepRange, SweepReport};
use gcflow_core::{
    Domain, DomainKind, Envelope, Error, EvolutionState, FlowParams, ProfileSolution, RateFit,
    RateSeries, ScalarField, Trajectory,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Experiment;
use crate::error::AppResult;
use crate::formats::{
    read_field, write_atomic, write_field, write_lemma, write_mask, write_radial, write_trajectory,
};
use crate::report::{Summary, SUMMARY_SUFFIX};

pub fn domain_of(exp: &Experiment) -> AppResult<Arc<Domain>> {
    Ok(Arc::new(Domain::new(exp.kind, exp.h)?))
}

/// The profile equation does not involve `beta`.
pub fn profile_params(exp: &Experiment) -> FlowParams {
    exp.params.with_beta(0.0).expect("beta = 0 is admissible")
}

fn summary_path(out: &Path, name: &str) -> std::path::PathBuf {
    out.join(format!("{name}{SUMMARY_SUFFIX}"))
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

pub struct ProfileOutcome {
    pub summary: Summary,
    pub solution: ProfileSolution,
    pub oracle: Option<RadialProfile>,
    /// `|sup_abs - depth| / depth` against the radial oracle.
    pub oracle_rel_error: Option<f64>,
}

/// Solves the profile, compares it with the radial oracle on discs and
/// writes `profile.csv`, `mask.csv`, `radial.csv`, `comparison.csv`.
pub fn run_profile(exp: &Experiment, out: &Path) -> AppResult<ProfileOutcome> {
    let domain = domain_of(exp)?;
    let params = profile_params(exp);
    let solution = solve_profile(&domain, &params, &exp.profile)?;
    write_field(&out.join("profile.csv"), &solution.psi, Some(&params))?;
    write_mask(&out.join("mask.csv"), &domain, Some(&params))?;

    let mut summary = Summary::new(format!(
        "profile alpha={} on {:?}",
        params.alpha(),
        exp.kind
    ));
    summary.metric("residual_sup", sci(solution.residual_sup));
    summary.metric("sup_abs", sci(solution.sup_abs));
    summary.metric("abp_bound", sci(solution.abp_bound));
    summary.metric("iterations", solution.iterations());
    summary.metric("relax_steps", solution.relax_steps);
    summary.metric("newton_iters", solution.newton_iters);
    summary.metric("method", format!("{:?}", solution.method));
    summary.metric("convexity_defect", sci(solution.convexity_defect));

    let (mut oracle, mut oracle_rel_error) = (None, None);
    if let DomainKind::Disc { radius } = exp.kind {
        let radial = radial_oracle(&params, radius, &RadialOptions::default())?;
        write_radial(&out.join("radial.csv"), &radial, &params)?;
        write_comparison(&out.join("comparison.csv"), &solution.psi, &radial)?;
        let rel = (solution.sup_abs - radial.depth).abs() / radial.depth;
        summary.metric("oracle_depth", sci(radial.depth));
        summary.metric("oracle_rel_error", sci(rel));
        oracle_rel_error = Some(rel);
        oracle = Some(radial);
    }

    summary.check(
        "abp_bound",
        solution.sup_abs <= solution.abp_bound,
        format!(
            "sup_abs {} <= {}",
            sci(solution.sup_abs),
            sci(solution.abp_bound)
        ),
    );
    summary.check(
        "residual",
        solution.residual_sup <= exp.profile.tol,
        format!(
            "residual_sup {} <= {}",
            sci(solution.residual_sup),
            sci(exp.profile.tol)
        ),
    );
    if let Some(rel) = oracle_rel_error {
        summary.check(
            "oracle",
            rel <= 1e-3,
            format!("relative error {} <= 1e-3", sci(rel)),
        );
    }
    summary.write(&summary_path(out, "profile"))?;
    Ok(ProfileOutcome {
        summary,
        solution,
        oracle,
        oracle_rel_error,
    })
}

fn write_comparison(path: &Path, psi: &ScalarField, radial: &RadialProfile) -> AppResult<()> {
    let d = psi.domain();
    let mut text = String::from("i,j,r,psi,oracle,diff\n");
    for n in d.nodes() {
        let r = n.x.hypot(n.y);
        let (a, b) = (psi.values()[n.grid as usize], radial.eval(r));
        text.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            n.i,
            n.j,
            r,
            a,
            b,
            a - b
        ));
    }
    write_atomic(path, text.as_bytes())
}

pub struct EvolveOutcome {
    pub summary: Summary,
    pub psi: ScalarField,
    pub trajectory: Trajectory,
    /// Samples at the configured schedule times only.
    pub schedule: RateSeries,
    /// Snapshots at the schedule times.
    pub snapshots: Vec<ScalarField>,
    /// Envelope through the initial data.
    pub envelope: Envelope,
    /// Envelopes restarted at the dyadic schedule times.
    pub stages: Vec<Envelope>,
    pub sandwich: SandwichReport,
    pub sandwich_refined: SandwichReport,
    pub psi_nu_sup: f64,
    pub gradient: CheckReport,
    pub gradient_monotone: CheckReport,
    pub rate: Option<RateFit>,
    pub rate_spread: f64,
    pub symmetry_fit: Option<RateFit>,
}

fn load_or_solve_profile(
    exp: &Experiment,
    domain: &Arc<Domain>,
    out: &Path,
) -> AppResult<ScalarField> {
    if let Some(path) = &exp.profile_path {
        return Ok(read_field(path, Some(domain))?.1);
    }
    let params = profile_params(exp);
    let psi = solve_profile(domain, &params, &exp.profile)?.psi;
    write_field(&out.join("profile.csv"), &psi, Some(&params))?;
    Ok(psi)
}

fn non_increasing(values: &[f64], rel_slack: f64) -> bool {
    let scale = values.first().copied().unwrap_or(0.0).abs();
    values.windows(2).all(|w| w[1] <= w[0] + rel_slack * scale)
}

/// Evolves the configured initial data. Pass `psi` to reuse a profile
/// solved on the same domain; otherwise it is loaded or solved.
pub fn run_evolve(
    exp: &Experiment,
    out: &Path,
    psi: Option<ScalarField>,
) -> AppResult<EvolveOutcome> {
    let domain = match &psi {
        Some(p) => Arc::clone(p.domain()),
        None => domain_of(exp)?,
    };
    let schedule_times: Vec<f64> = exp
        .sample_times
        .iter()
        .copied()
        .filter(|&t| t <= exp.t_end)
        .collect();
    if schedule_times.is_empty() {
        return Err(Error::InsufficientSamples {
            found: 0,
            needed: 1,
        }
        .into());
    }
    let psi = match psi {
        Some(p) => p,
        None => load_or_solve_profile(exp, &domain, out)?,
    };
    let params = exp.params;
    let u0 = exp.initial.field(&domain, Some(&psi))?;

    let mut times = schedule_times.clone();
    if let Some(every) = exp.snapshot_every {
        let mut k = 1.0;
        while k * every <= exp.t_end {
            times.push(k * every);
            k += 1.0;
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut flow = exp.flow;
    flow.record_fields = true;
    let state0 = EvolutionState::new(u0.clone(), &params, &flow)?;
    let g = state0.g;
    let envelope = build_envelope(&u0, &psi, g, &params)?;
    let trajectory = evolve(state0, &params, exp.t_end, &times, &psi, &flow)?;

    let mut schedule = RateSeries::new();
    let mut snapshots = Vec::new();
    for (s, u) in trajectory
        .series
        .samples()
        .iter()
        .zip(&trajectory.snapshots)
    {
        if schedule_times.contains(&s.t) {
            schedule.push(*s)?;
            snapshots.push(u.clone());
        } else {
            write_field(
                &out.join(format!("snapshot_t{:010.4}.csv", s.t)),
                u,
                Some(&params),
            )?;
        }
    }
    write_trajectory(&out.join("trajectory.csv"), &schedule, &params)?;
    write_field(&out.join("final.csv"), &trajectory.state.u, Some(&params))?;

    // Stage envelopes; the initial one covers the start when the schedule skips t = 0.
    let mut stages = refined_envelopes(&snapshots, &psi, &params, &exp.operator)?;
    if !stages.iter().any(|e| e.t0 <= envelope.t0) {
        stages.insert(0, envelope.clone());
    }
    let dt = trajectory.state.dt_largest;
    let slack = exp.checks.sandwich_c * (exp.h + dt);
    let sandwich = check_sandwich(&snapshots, std::slice::from_ref(&envelope), slack)?;
    let sandwich_refined = check_sandwich(&snapshots, &stages, slack)?;
    write_sandwich(&out.join("sandwich.csv"), &sandwich, &sandwich_refined)?;

    let psi_nu_sup = boundary_normal_derivative_sup(&psi);
    let k = &exp.checks;
    let gradient = gradient_envelope_check(
        &schedule,
        psi_nu_sup,
        g,
        &params,
        envelope.phi0_lower,
        k.gradient_slack,
    );
    let gradient_monotone = gradient_monotonicity_check(&schedule, k.monotonicity_slack);
    let window = (k.fit_from, exp.t_end);
    let rate = fit_rate(&schedule, window);
    let rate_spread = scaled_spread(&schedule, window, |s| Some(s.deviation_sup));
    let symmetry_fit = fit_by(&schedule, window, |s| s.symmetry_defect).ok();
    let mu = trajectory.state.injected_mu;

    let mut summary = Summary::new(format!(
        "evolve alpha={} beta={} on {:?}",
        params.alpha(),
        params.beta(),
        exp.kind
    ));
    summary.metric("steps", trajectory.state.step_count);
    summary.metric("dt_largest", sci(dt));
    summary.metric("G", sci(g));
    summary.metric("psi_nu_sup", sci(psi_nu_sup));
    summary.metric("phi0_lower", sci(envelope.phi0_lower));
    summary.metric("phi0_upper", sci(envelope.phi0_upper));
    summary.metric("injected_mu", sci(mu));
    summary.metric("sandwich_slack", sci(slack));
    summary.metric("sandwich_worst", sci(sandwich.worst));
    summary.metric("sandwich_refined_worst", sci(sandwich_refined.worst));
    let offsets: Vec<String> = stages
        .iter()
        .map(|e| format!("{}:{}", e.t0, sci(e.offset())))
        .collect();
    summary.metric("stage_offsets", offsets.join(" "));
    match &rate {
        Ok(f) => {
            summary.metric("rate_p", format!("{:.6}", f.p));
            summary.metric("rate_c", sci(f.c));
        }
        Err(e) => summary.metric("rate_p", format!("unavailable ({e})")),
    }
    summary.metric("rate_spread", format!("{rate_spread:.6}"));
    if let Some(f) = &symmetry_fit {
        summary.metric("symmetry_p", format!("{:.6}", f.p));
    }

    summary.check(
        "injected_mu",
        mu <= k.mu_budget,
        format!("total {} <= {}", sci(mu), sci(k.mu_budget)),
    );
    summary.check(
        "gradient_envelope",
        gradient.pass,
        format!("worst relative margin {}", sci(gradient.worst)),
    );
    summary.check(
        "gradient_monotone",
        gradient_monotone.pass,
        format!("worst margin {}", sci(gradient_monotone.worst)),
    );
    if exp.operator.scheme.is_monotone() {
        summary.check(
            "sandwich",
            sandwich.pass,
            format!("worst violation {} <= {}", sci(sandwich.worst), sci(slack)),
        );
        summary.check(
            "sandwich_refined",
            sandwich_refined.pass,
            format!(
                "worst violation {} <= {}",
                sci(sandwich_refined.worst),
                sci(slack)
            ),
        );
    }
    if params.beta() == 0.0 {
        let [lo, hi] = k.rate_range;
        match &rate {
            Ok(f) => summary.check(
                "rate_p",
                f.p >= lo && f.p <= hi,
                format!("p_fit {:.4} in [{lo}, {hi}]", f.p),
            ),
            Err(e) => summary.check("rate_p", false, e.to_string()),
        }
        summary.check(
            "rate_spread",
            rate_spread <= k.rate_spread,
            format!(
                "(1+t) deviation_sup spread {rate_spread:.4} <= {}",
                k.rate_spread
            ),
        );
    } else {
        let mags: Vec<f64> = stages.iter().map(|e| e.offset().abs()).collect();
        summary.check(
            "stage_offsets",
            non_increasing(&mags, 0.0),
            format!(
                "|G_m^lambda - 1| over {} stages: {}",
                mags.len(),
                offsets.join(" ")
            ),
        );
        let in_window: Vec<f64> = schedule
            .samples()
            .iter()
            .filter(|s| s.t >= window.0)
            .map(|s| s.deviation_sup)
            .collect();
        if let (Some(first), Some(last)) = (in_window.first(), in_window.last()) {
            summary.check(
                "deviation_decay",
                last <= first,
                format!("final {} <= first in window {}", sci(*last), sci(*first)),
            );
        }
    }
    let sym: Vec<f64> = schedule
        .samples()
        .iter()
        .filter(|s| s.t >= window.0)
        .filter_map(|s| s.symmetry_defect)
        .collect();
    if !sym.is_empty() {
        summary.check(
            "symmetry_monotone",
            non_increasing(&sym, 1e-9),
            format!(
                "defect from {} to {}",
                sci(sym[0]),
                sci(*sym.last().expect("non-empty"))
            ),
        );
    }
    summary.write(&summary_path(out, "evolve"))?;

    Ok(EvolveOutcome {
        summary,
        psi,
        trajectory,
        schedule,
        snapshots,
        envelope,
        stages,
        sandwich,
        sandwich_refined,
        psi_nu_sup,
        gradient,
        gradient_monotone,
        rate: rate.ok(),
        rate_spread,
        symmetry_fit,
    })
}

fn write_sandwich(path: &Path, single: &SandwichReport, refined: &SandwichReport) -> AppResult<()> {
    let mut text = String::from("envelope,t,stage,lower_violation,upper_violation\n");
    for (name, r) in [("single", single), ("refined", refined)] {
        for s in &r.samples {
            text.push_str(&format!(
                "{name},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                s.t, s.stage, s.lower_violation, s.upper_violation
            ));
        }
    }
    write_atomic(path, text.as_bytes())
}

pub struct LemmaOutcome {
    pub summary: Summary,
    pub report: SweepReport,
}

/// Randomised sweep of the self-similar ratio bounds, seeded from the config.
pub fn run_lemma(exp: &Experiment, out: &Path) -> AppResult<LemmaOutcome> {
    let n = exp.params.n();
    let mut rng = ChaCha8Rng::seed_from_u64(exp.seed);
    let report = lemma_sweep(&mut rng, n, exp.lemma_samples, exp.lemma_range)?;
    write_lemma(&out.join("lemma.csv"), &report.records, n, exp.seed)?;

    let mut summary = Summary::new(format!("lemma sweep n={n} seed={}", exp.seed));
    summary.metric("samples", report.samples);
    summary.metric("records", report.records.len());
    summary.metric("violations", report.violations);
    summary.metric("worst_margin", sci(report.worst_margin));
    summary.metric("max_abs_margin", sci(report.max_abs_margin));
    summary.check(
        "violations",
        report.violations == 0,
        format!("{} of {} records", report.violations, report.records.len()),
    );
    if exp.lemma_range == SweepRange::UnitS {
        summary.check(
            "equality_slice",
            report.max_abs_margin <= 1e-12,
            format!("max |margin| {} <= 1e-12", sci(report.max_abs_margin)),
        );
    }
    summary.write(&summary_path(out, "lemma"))?;
    Ok(LemmaOutcome { summary, report })
}
