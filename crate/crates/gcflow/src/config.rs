//! Experiment configuration in TOML.
//!
//! ```toml
//! [params]
//! alpha = 1.0
//! beta = "geometric"     # or a number
//!
//! [domain]
//! kind = "disc"
//! radius = 1.0
//! h = 0.015625
//!
//! [initial]
//! kind = "asym-bowl"
//! c = 1.0
//! offset = 0.3
//!
//! [evolve]
//! t_end = 31.0
//! samples = "dyadic"     # or a list of times
//! ```
//!
//! Every section except `params` and `domain` has defaults. Checking turns
//! the raw sections into core types and reports the first offending key.

use std::path::{Path, PathBuf};

use gcflow_core::analysis::SymmetryMode;
use gcflow_core::flow::{dyadic_times, InitialData};
use gcflow_core::operator::{OperatorOptions, Rotations, Scheme};
use gcflow_core::profile::ProfileOptions;
use gcflow_core::selfsim::SweepRange;
use gcflow_core::{DomainKind, FlowOptions, FlowParams};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, ConfigError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ParamsSection,
    pub domain: DomainSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub lemma: LemmaSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaKeyword {
    /// `(n + 2 - 1/alpha)/2`, motion by a power of Gauss curvature.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Value(f64),
    Keyword(BetaKeyword),
}

impl Default for BetaSpec {
    fn default() -> Self {
        BetaSpec::Value(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default = "default_n")]
    pub n: u32,
    pub alpha: f64,
    #[serde(default)]
    pub beta: BetaSpec,
}

fn default_n() -> u32 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainName {
    Disc,
    Ellipse,
    Superellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialName {
    ProfileMultiple,
    Bowl,
    AsymBowl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialName,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialName::ProfileMultiple,
            c: 1.0,
            offset: None,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKeyword {
    /// `t_m = 2^m - 1`.
    Dyadic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSpec {
    Keyword(SampleKeyword),
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: SampleSpec,
    /// Extra full-field snapshots at multiples of this time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<f64>,
    /// Field CSV holding a precomputed profile; solved when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PathBuf>,
}

fn default_t_end() -> f64 {
    31.0
}

fn default_samples() -> SampleSpec {
    SampleSpec::Keyword(SampleKeyword::Dyadic)
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            samples: default_samples(),
            snapshot_every: None,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Standard9,
    Monotone2,
    Monotone4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub scheme: SchemeName,
    pub det_floor: f64,
    pub profile_tol: f64,
    pub convexity_tol: f64,
    pub cfl: f64,
    pub dt_max: f64,
    pub max_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let flow = FlowOptions::default();
        Self {
            scheme: SchemeName::Standard9,
            det_floor: flow.operator.det_floor,
            profile_tol: ProfileOptions::default().tol,
            convexity_tol: flow.convexity_tol,
            cfl: flow.cfl,
            dt_max: flow.dt_max,
            max_steps: flow.max_steps,
        }
    }
}

/// Thresholds for the PASS/FAIL lines of the summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    /// Rate fits use samples with `t >= fit_from`.
    pub fit_from: f64,
    /// Accepted `p` for `beta = 0` runs.
    pub rate_range: [f64; 2],
    /// Largest allowed max/min of `(1 + t) deviation_sup`.
    pub rate_spread: f64,
    pub gradient_slack: f64,
    pub monotonicity_slack: f64,
    /// Sandwich violations up to `sandwich_c (h + dt)` are tolerated.
    pub sandwich_c: f64,
    pub mu_budget: f64,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            fit_from: 3.0,
            rate_range: [0.8, 1.3],
            rate_spread: 3.0,
            gradient_slack: 0.1,
            monotonicity_slack: 1e-3,
            sandwich_c: 1e-3,
            mu_budget: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaRangeName {
    Full,
    UnitS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSection {
    pub samples: usize,
    pub range: LemmaRangeName,
}

impl Default for LemmaSection {
    fn default() -> Self {
        Self {
            samples: 100_000,
            range: LemmaRangeName::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub seed: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            seed: 0,
        }
    }
}

/// A checked configuration in core types.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub params: FlowParams,
    pub kind: DomainKind,
    pub h: f64,
    pub initial: InitialData,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
    pub snapshot_every: Option<f64>,
    pub profile_path: Option<PathBuf>,
    pub operator: OperatorOptions,
    pub profile: ProfileOptions,
    pub flow: FlowOptions,
    pub checks: ChecksSection,
    pub lemma_samples: usize,
    pub lemma_range: SweepRange,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Experiment {
    /// Radial on discs, central on the other (centred) domains.
    pub fn symmetry(&self) -> SymmetryMode {
        gcflow_core::analysis::natural_symmetry(&self.kind)
    }
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, format!("must be a positive number, got {v}")))
    }
}

fn required(key: &str, v: Option<f64>) -> Result<f64, ConfigError> {
    positive(key, v.ok_or_else(|| bad(key, "missing"))?)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| AppError::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Validates every key the runs depend on.
    pub fn check(&self) -> Result<Experiment, ConfigError> {
        let p = &self.params;
        let beta = match p.beta {
            BetaSpec::Value(b) => b,
            BetaSpec::Keyword(BetaKeyword::Geometric) => {
                0.5 * (f64::from(p.n) + 2.0 - 1.0 / p.alpha)
            }
        };
        let params = FlowParams::new(p.n, p.alpha, beta).map_err(|e| {
            let key = match e {
                gcflow_core::Error::InvalidDimension { .. } => "params.n",
                gcflow_core::Error::InvalidExponent { name: "beta", .. } => "params.beta",
                _ => "params.alpha",
            };
            bad(key, e.to_string())
        })?;
        if p.n != 2 {
            return Err(bad(
                "params.n",
                "grid runs are planar; only n = 2 is supported",
            ));
        }

        let d = &self.domain;
        let kind = match d.kind {
            DomainName::Disc => DomainKind::Disc {
                radius: required("domain.radius", d.radius)?,
            },
            DomainName::Ellipse => DomainKind::Ellipse {
                a: required("domain.a", d.a)?,
                b: required("domain.b", d.b)?,
            },
            DomainName::Superellipse => {
                let exp = required("domain.p", d.p)?;
                if exp < 2.0 {
                    return Err(bad(
                        "domain.p",
                        format!("must be >= 2 for strict convexity, got {exp}"),
                    ));
                }
                DomainKind::Superellipse {
                    a: required("domain.a", d.a)?,
                    b: required("domain.b", d.b)?,
                    p: exp,
                }
            }
        };
        let h = positive("domain.h", d.h)?;

        let i = &self.initial;
        let c = positive("initial.c", i.c)?;
        let initial = match i.kind {
            InitialName::ProfileMultiple => InitialData::ProfileMultiple(c),
            InitialName::Bowl => InitialData::Bowl(c),
            InitialName::AsymBowl => {
                let offset = i.offset.unwrap_or(0.3);
                if !(offset.is_finite() && offset.abs() < 1.0 / 3.0) {
                    return Err(bad(
                        "initial.offset",
                        format!("must satisfy |offset| < 1/3, got {offset}"),
                    ));
                }
                InitialData::AsymBowl { c, offset }
            }
        };

        let e = &self.evolve;
        let t_end = positive("evolve.t_end", e.t_end)?;
        let mut sample_times = match &e.samples {
            SampleSpec::Keyword(SampleKeyword::Dyadic) => dyadic_times(t_end),
            SampleSpec::Times(ts) => {
                for &t in ts {
                    if !(t.is_finite() && t >= 0.0) {
                        return Err(bad(
                            "evolve.samples",
                            format!("times must be finite and >= 0, got {t}"),
                        ));
                    }
                }
                ts.clone()
            }
        };
        sample_times.sort_by(f64::total_cmp);
        sample_times.dedup();
        if let Some(every) = e.snapshot_every {
            positive("evolve.snapshot_every", every)?;
        }

        let s = &self.solver;
        let operator = OperatorOptions {
            scheme: match s.scheme {
                SchemeName::Standard9 => Scheme::Standard9,
                SchemeName::Monotone2 => Scheme::MonotoneWs(Rotations::Two),
                SchemeName::Monotone4 => Scheme::MonotoneWs(Rotations::Four),
            },
            det_floor: s.det_floor,
        };
        operator
            .validate()
            .map_err(|e| bad("solver.det_floor", e.to_string()))?;
        let profile = ProfileOptions {
            operator,
            tol: positive("solver.profile_tol", s.profile_tol)?,
            ..ProfileOptions::default()
        };
        if !(s.convexity_tol.is_finite() && s.convexity_tol >= 0.0) {
            return Err(bad("solver.convexity_tol", "must be a non-negative number"));
        }
        let cfl = positive("solver.cfl", s.cfl)?;
        if cfl > 1.0 {
            return Err(bad("solver.cfl", format!("must not exceed 1, got {cfl}")));
        }
        if s.max_steps == 0 {
            return Err(bad("solver.max_steps", "must be positive"));
        }
        let flow = FlowOptions {
            operator,
            cfl,
            dt_max: positive("solver.dt_max", s.dt_max)?,
            convexity_tol: s.convexity_tol,
            max_steps: s.max_steps,
            ..FlowOptions::default()
        };
        flow.validate().map_err(|e| bad("solver", e.to_string()))?;

        let k = &self.checks;
        if !(k.fit_from.is_finite() && k.fit_from >= 0.0) {
            return Err(bad("checks.fit_from", "must be a non-negative number"));
        }
        if !(k.rate_range[0] < k.rate_range[1]) {
            return Err(bad(
                "checks.rate_range",
                "needs [low, high] with low < high",
            ));
        }
        positive("checks.rate_spread", k.rate_spread)?;
        for (key, v) in [
            ("checks.gradient_slack", k.gradient_slack),
            ("checks.monotonicity_slack", k.monotonicity_slack),
            ("checks.sandwich_c", k.sandwich_c),
            ("checks.mu_budget", k.mu_budget),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(key, format!("must be a non-negative number, got {v}")));
            }
        }
        if self.lemma.samples == 0 {
            return Err(bad("lemma.samples", "must be positive"));
        }

        Ok(Experiment {
            params,
            kind,
            h,
            initial,
            t_end,
            sample_times,
            snapshot_every: e.snapshot_every,
            profile_path: e.profile.clone(),
            operator,
            profile,
            flow,
            checks: k.clone(),
            lemma_samples: self.lemma.samples,
            lemma_range: match self.lemma.range {
                LemmaRangeName::Full => SweepRange::Full,
                LemmaRangeName::UnitS => SweepRange::UnitS,
            },
            out_dir: self.output.dir.clone(),
            seed: self.output.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[params]
alpha = 1.0
beta = "geometric"

[domain]
kind = "disc"
radius = 1.0
h = 0.015625

[initial]
kind = "asym-bowl"
c = 0.8
offset = 0.25

[evolve]
t_end = 15.0
samples = [3.0, 7.0, 15.0]
"#;

    #[test]
    fn parses_keywords() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let exp = cfg.check().unwrap();
        assert_eq!(exp.params.beta(), 1.5);
        assert_eq!(exp.sample_times, [3.0, 7.0, 15.0]);
        assert_eq!(
            exp.initial,
            InitialData::AsymBowl {
                c: 0.8,
                offset: 0.25
            }
        );

        let dyadic = SAMPLE.replace("samples = [3.0, 7.0, 15.0]", "samples = \"dyadic\"");
        let exp = ExperimentConfig::from_toml_str(&dyadic)
            .unwrap()
            .check()
            .unwrap();
        assert_eq!(exp.sample_times, [0.0, 1.0, 3.0, 7.0, 15.0]);
    }

    #[test]
    fn round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        let mut other = cfg.clone();
        other.params.beta = BetaSpec::Value(0.1 + 0.2);
        other.evolve.samples = SampleSpec::Keyword(SampleKeyword::Dyadic);
        let back = ExperimentConfig::from_toml_str(&other.to_toml_string()).unwrap();
        assert_eq!(back, other);
    }

    #[test]
    fn errors_name_the_key() {
        let low = SAMPLE.replace("alpha = 1.0", "alpha = 0.4");
        let err = ExperimentConfig::from_toml_str(&low)
            .unwrap()
            .check()
            .unwrap_err();
        assert_eq!(err.key, "params.alpha");
        assert!(err.message.contains("InvalidExponent"));

        let no_radius = SAMPLE.replace("radius = 1.0\n", "");
        let err = ExperimentConfig::from_toml_str(&no_radius)
            .unwrap()
            .check()
            .unwrap_err();
        assert_eq!(err.key, "domain.radius");

        let offset = SAMPLE.replace("offset = 0.25", "offset = 0.5");
        let err = ExperimentConfig::from_toml_str(&offset)
            .unwrap()
            .check()
            .unwrap_err();
        assert_eq!(err.key, "initial.offset");

        let typo = SAMPLE.replace("t_end", "t_ned");
        match ExperimentConfig::from_toml_str(&typo) {
            Err(AppError::ConfigParse(msg)) => assert!(msg.contains("t_ned"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
