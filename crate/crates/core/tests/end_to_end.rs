//! Coarse-grid pipeline: profile, oracle, evolution, envelopes, diagnostics.

use std::sync::Arc;

use gcflow_core::analysis::{fit_rate, gradient_monotonicity_check};
use gcflow_core::flow::{build_envelope, check_sandwich, dyadic_times, evolve, refined_envelopes};
use gcflow_core::profile::solve_profile;
use gcflow_core::radial::{radial_oracle, RadialOptions};
use gcflow_core::{
    Domain, DomainKind, EvolutionState, FlowOptions, FlowParams, InitialData, OperatorOptions,
    ProfileOptions, Rotations,
};

fn disc(h: f64) -> Arc<Domain> {
    Arc::new(Domain::new(DomainKind::Disc { radius: 1.0 }, h).unwrap())
}

#[test]
fn profile_matches_the_radial_oracle() {
    let d = disc(1.0 / 32.0);
    for alpha in [0.75, 1.0, 2.0] {
        let params = FlowParams::new(2, alpha, 0.0).unwrap();
        let sol = solve_profile(&d, &params, &ProfileOptions::default()).unwrap();
        let oracle = radial_oracle(&params, 1.0, &RadialOptions::default()).unwrap();
        let rel = (sol.sup_abs - oracle.depth).abs() / oracle.depth;
        assert!(rel < 2e-3, "alpha {alpha}: {rel:e}");
        assert!(sol.sup_abs <= sol.abp_bound);
        assert!(sol.residual_sup <= 1e-6);
    }
}

#[test]
fn monotone_flow_stays_in_its_envelopes() {
    let d = disc(1.0 / 24.0);
    let op = OperatorOptions::monotone(Rotations::Two);
    let profile_opts = ProfileOptions {
        operator: op,
        ..ProfileOptions::default()
    };
    let base = FlowParams::new(2, 1.0, 0.0).unwrap();
    let psi = solve_profile(&d, &base, &profile_opts).unwrap().psi;
    let params = FlowParams::geometric(2, 1.0).unwrap();
    let opts = FlowOptions {
        operator: op,
        record_fields: true,
        ..FlowOptions::default()
    };
    let u0 = InitialData::AsymBowl {
        c: 1.0,
        offset: 0.3,
    }
    .field(&d, None)
    .unwrap();
    let state = EvolutionState::new(u0.clone(), &params, &opts).unwrap();
    assert!(state.g > 0.0 && state.g < 1.0);
    let single = build_envelope(&u0, &psi, state.g, &params).unwrap();
    let traj = evolve(state, &params, 7.0, &dyadic_times(7.0), &psi, &opts).unwrap();
    assert_eq!(traj.snapshots.len(), 4);
    assert_eq!(traj.state.injected_mu, 0.0);

    let slack = 1e-3 * (d.h() + traj.state.dt_largest);
    let report = check_sandwich(&traj.snapshots, &[single], slack).unwrap();
    assert!(report.pass, "{report:?}");
    let stages = refined_envelopes(&traj.snapshots, &psi, &params, &op).unwrap();
    assert_eq!(stages.len(), 4);
    let refined = check_sandwich(&traj.snapshots, &stages, slack).unwrap();
    assert!(refined.pass, "{refined:?}");
    for w in stages.windows(2) {
        assert!(w[1].offset().abs() <= w[0].offset().abs());
    }
    assert!(gradient_monotonicity_check(&traj.series, 1e-3).pass);
}

#[test]
fn flat_flow_converges_at_unit_rate() {
    let d = disc(1.0 / 24.0);
    let params = FlowParams::new(2, 1.0, 0.0).unwrap();
    let psi = solve_profile(&d, &params, &ProfileOptions::default())
        .unwrap()
        .psi;
    let u0 = InitialData::Bowl(0.8).field(&d, None).unwrap();
    let opts = FlowOptions::default();
    let state = EvolutionState::new(u0, &params, &opts).unwrap();
    let traj = evolve(state, &params, 31.0, &dyadic_times(31.0), &psi, &opts).unwrap();
    let fit = fit_rate(&traj.series, (3.0, 31.0)).unwrap();
    assert!((0.8..=1.3).contains(&fit.p), "{fit:?}");
}
