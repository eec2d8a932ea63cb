//! Scenario files: JSON in, validated solver inputs out.
//!
//! Parsing is strict — unknown keys are rejected by serde — and every
//! numeric constraint from the component types is re-checked here so that
//! error messages can name the offending key ("profile.kind", "solver.tau",
//! …) instead of surfacing a construction failure from deep inside a solve.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use thinlimit::{
    DomainSpec, Ellipticity, FunctionalSpec, IterParams, OperatorKind, ProfileKind, ProfileSpec,
    SourceComponent, SourceSpec, ThinDomainSpec, EPSILON_MAX,
};

/// Errors from loading or validating a scenario file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config is not valid JSON for a scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config key \"{key}\": {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.to_string() }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    domain: DomainSection,
    profile: ProfileSection,
    operator: OperatorSection,
    alpha: f64,
    source: SourceSection,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    epsilons: Option<Vec<f64>>,
    grid: GridSection,
    #[serde(default)]
    solver: Option<SolverSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    a: f64,
    b: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSection {
    kind: String,
    #[serde(default)]
    params: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorSection {
    kind: String,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default, rename = "Lambda")]
    big_lambda: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    f0: ComponentSection,
    /// Defaults to the zero component when omitted.
    #[serde(default)]
    f1: Option<ComponentSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentSection {
    kind: String,
    #[serde(default)]
    params: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    nx: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    #[serde(default)]
    tau: Option<f64>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    max_iters: Option<u64>,
}

impl ScenarioFile {
    /// Reads and parses a scenario file; structural errors surface here,
    /// value errors surface from the typed accessors.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn domain(&self) -> Result<DomainSpec, ConfigError> {
        DomainSpec::new(self.domain.a, self.domain.b).map_err(|e| invalid("domain", e))
    }

    pub fn profile(&self) -> Result<ProfileSpec, ConfigError> {
        let domain = self.domain()?;
        let p = &self.profile.params;
        let kind = match self.profile.kind.as_str() {
            "constant" => {
                if p.len() != 1 {
                    return Err(invalid(
                        "profile.params",
                        format!("kind \"constant\" takes [c], got {} value(s)", p.len()),
                    ));
                }
                ProfileKind::Constant { c: p[0] }
            }
            "cos-bump" => {
                if p.len() != 3 {
                    return Err(invalid(
                        "profile.params",
                        format!("kind \"cos-bump\" takes [c0, c1, k], got {} value(s)", p.len()),
                    ));
                }
                ProfileKind::CosBump { c0: p[0], c1: p[1], k: p[2] }
            }
            other => {
                return Err(invalid(
                    "profile.kind",
                    format!("unknown kind {other:?}, expected \"constant\" or \"cos-bump\""),
                ))
            }
        };
        ProfileSpec::new(domain, kind).map_err(|e| invalid("profile.params", e))
    }

    fn operator(&self) -> Result<OperatorKind, ConfigError> {
        let sec = &self.operator;
        let ellipticity = || -> Result<Ellipticity, ConfigError> {
            let lambda = sec
                .lambda
                .ok_or_else(|| invalid("operator.lambda", "required for the extremal kinds"))?;
            let big = sec
                .big_lambda
                .ok_or_else(|| invalid("operator.Lambda", "required for the extremal kinds"))?;
            Ellipticity::new(lambda, big).map_err(|e| invalid("operator.lambda", e))
        };
        let kind = match sec.kind.as_str() {
            "pucci-plus" => OperatorKind::PucciPlus(ellipticity()?),
            "pucci-minus" => OperatorKind::PucciMinus(ellipticity()?),
            "laplacian" => OperatorKind::Laplacian,
            "second-yy" => OperatorKind::SecondYY,
            "second-xx" => OperatorKind::SecondXX,
            other => {
                return Err(invalid(
                    "operator.kind",
                    format!(
                        "unknown kind {other:?}, expected one of \"pucci-plus\", \
                         \"pucci-minus\", \"laplacian\", \"second-yy\", \"second-xx\""
                    ),
                ))
            }
        };
        if !matches!(kind, OperatorKind::PucciPlus(_) | OperatorKind::PucciMinus(_))
            && (sec.lambda.is_some() || sec.big_lambda.is_some())
        {
            return Err(invalid(
                "operator.lambda",
                format!("not applicable to kind {:?}", sec.kind),
            ));
        }
        Ok(kind)
    }

    fn component(
        sec: &ComponentSection,
        key_kind: &'static str,
        key_params: &'static str,
    ) -> Result<SourceComponent, ConfigError> {
        let p = &sec.params;
        let take = |n: usize| -> Result<(), ConfigError> {
            if p.len() == n {
                Ok(())
            } else {
                Err(invalid(
                    key_params,
                    format!("kind {:?} takes {n} value(s), got {}", sec.kind, p.len()),
                ))
            }
        };
        match sec.kind.as_str() {
            "constant" => {
                take(1)?;
                Ok(SourceComponent::Constant(p[0]))
            }
            "poly" => {
                if p.is_empty() || p.len() > 4 {
                    return Err(invalid(
                        key_params,
                        format!("kind \"poly\" takes 1 to 4 coefficients, got {}", p.len()),
                    ));
                }
                let mut c = [0.0; 4];
                c[..p.len()].copy_from_slice(p);
                Ok(SourceComponent::Poly(c))
            }
            "cosine" => {
                take(3)?;
                Ok(SourceComponent::Cosine { amp: p[0], freq: p[1], phase: p[2] })
            }
            other => Err(invalid(
                key_kind,
                format!("unknown kind {other:?}, expected \"constant\", \"poly\", or \"cosine\""),
            )),
        }
    }

    fn source(&self) -> Result<SourceSpec, ConfigError> {
        let f0 = Self::component(&self.source.f0, "source.f0.kind", "source.f0.params")?;
        let f1 = match &self.source.f1 {
            Some(sec) => Self::component(sec, "source.f1.kind", "source.f1.params")?,
            None => SourceComponent::Constant(0.0),
        };
        Ok(SourceSpec { f0, f1 })
    }

    pub fn functional(&self) -> Result<FunctionalSpec, ConfigError> {
        let op = self.operator()?;
        let source = self.source()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(
                "alpha",
                format!("must be a positive finite real, got {}", self.alpha),
            ));
        }
        FunctionalSpec::new(op, self.alpha, source).map_err(|e| invalid("alpha", e))
    }

    /// The single ε required by solve-thin.
    pub fn scalar_epsilon(&self) -> Result<f64, ConfigError> {
        if self.epsilons.is_some() {
            return Err(invalid(
                "epsilon",
                "this command needs the scalar key \"epsilon\", not the list \"epsilons\"",
            ));
        }
        let eps = self
            .epsilon
            .ok_or_else(|| invalid("epsilon", "required for this command"))?;
        if !(eps.is_finite() && eps > 0.0 && eps <= EPSILON_MAX) {
            return Err(invalid(
                "epsilon",
                format!("must lie in (0, {EPSILON_MAX}], got {eps}"),
            ));
        }
        Ok(eps)
    }

    /// The ε list required by sweep.
    pub fn epsilon_list(&self) -> Result<Vec<f64>, ConfigError> {
        if self.epsilon.is_some() {
            return Err(invalid(
                "epsilons",
                "this command needs the list key \"epsilons\", not the scalar \"epsilon\"",
            ));
        }
        let eps = self
            .epsilons
            .clone()
            .ok_or_else(|| invalid("epsilons", "required for this command"))?;
        if eps.is_empty() {
            return Err(invalid("epsilons", "must not be empty"));
        }
        for e in &eps {
            if !(e.is_finite() && *e > 0.0 && *e <= EPSILON_MAX) {
                return Err(invalid(
                    "epsilons",
                    format!("every entry must lie in (0, {EPSILON_MAX}], got {e}"),
                ));
            }
        }
        Ok(eps)
    }

    /// The validated thin strip for solve-thin.
    pub fn thin(&self) -> Result<ThinDomainSpec, ConfigError> {
        ThinDomainSpec::new(self.profile()?, self.scalar_epsilon()?)
            .map_err(|e| invalid("epsilon", e))
    }

    pub fn nx(&self) -> Result<usize, ConfigError> {
        if self.grid.nx < 3 {
            return Err(invalid("grid.nx", format!("must be >= 3, got {}", self.grid.nx)));
        }
        usize::try_from(self.grid.nx)
            .map_err(|_| invalid("grid.nx", format!("too large: {}", self.grid.nx)))
    }

    /// Iteration knobs: file overrides on top of the given defaults.
    pub fn params_over(&self, defaults: IterParams) -> Result<IterParams, ConfigError> {
        let Some(sec) = &self.solver else { return Ok(defaults) };
        let params = IterParams {
            tau: sec.tau.unwrap_or(defaults.tau),
            tol: sec.tol.unwrap_or(defaults.tol),
            max_iters: sec.max_iters.unwrap_or(defaults.max_iters),
        };
        if !(params.tau > 0.0 && params.tau <= 1.0 && params.tau.is_finite()) {
            return Err(invalid("solver.tau", format!("must lie in (0, 1], got {}", params.tau)));
        }
        if !(params.tol > 0.0 && params.tol.is_finite()) {
            return Err(invalid(
                "solver.tol",
                format!("must be a positive finite real, got {}", params.tol),
            ));
        }
        if params.max_iters == 0 {
            return Err(invalid("solver.max_iters", "must be at least 1"));
        }
        Ok(params)
    }

    /// True when the file pins any solver knob (sweeps then use one shared
    /// parameter set instead of per-scenario defaults).
    pub fn has_solver_overrides(&self) -> bool {
        self.solver.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioFile, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    fn base() -> serde_json::Value {
        serde_json::json!({
            "domain": {"a": 0.0, "b": 1.0},
            "profile": {"kind": "cos-bump", "params": [2.0, 0.5, 1.0]},
            "operator": {"kind": "laplacian"},
            "alpha": 1.0,
            "source": {"f0": {"kind": "constant", "params": [2.0]}},
            "epsilon": 0.2,
            "grid": {"nx": 21}
        })
    }

    #[test]
    fn round_trips_a_full_scenario() {
        let file = parse(&base().to_string()).unwrap();
        assert_eq!(file.nx().unwrap(), 21);
        assert_eq!(file.scalar_epsilon().unwrap(), 0.2);
        let f = file.functional().unwrap();
        assert_eq!(f.alpha(), 1.0);
        assert!(matches!(f.op(), OperatorKind::Laplacian));
        let profile = file.profile().unwrap();
        assert_eq!(profile.domain(), DomainSpec::new(0.0, 1.0).unwrap());
    }

    #[test]
    fn unknown_top_level_keys_are_rejected() {
        let mut v = base();
        v["surprise"] = serde_json::json!(1);
        let err = parse(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("surprise"), "{err}");
    }

    #[test]
    fn unknown_nested_keys_are_rejected() {
        let mut v = base();
        v["grid"]["ny"] = serde_json::json!(5);
        let err = parse(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("ny"), "{err}");
    }

    #[test]
    fn bad_profile_kind_names_the_key() {
        let mut v = base();
        v["profile"]["kind"] = serde_json::json!("wedge");
        let err = parse(&v.to_string()).unwrap().profile().unwrap_err();
        assert!(err.to_string().contains("profile.kind"), "{err}");
    }

    #[test]
    fn nonpositive_profile_names_params() {
        let mut v = base();
        v["profile"] = serde_json::json!({"kind": "constant", "params": [-1.0]});
        let err = parse(&v.to_string()).unwrap().profile().unwrap_err();
        assert!(err.to_string().contains("profile.params"), "{err}");
    }

    #[test]
    fn pucci_requires_both_constants() {
        let mut v = base();
        v["operator"] = serde_json::json!({"kind": "pucci-plus", "lambda": 1.0});
        let err = parse(&v.to_string()).unwrap().functional().unwrap_err();
        assert!(err.to_string().contains("operator.Lambda"), "{err}");

        v["operator"] = serde_json::json!({"kind": "pucci-plus", "lambda": 2.0, "Lambda": 1.0});
        let err = parse(&v.to_string()).unwrap().functional().unwrap_err();
        assert!(err.to_string().contains("operator.lambda"), "{err}");
    }

    #[test]
    fn ellipticity_constants_are_rejected_on_degenerate_kinds() {
        let mut v = base();
        v["operator"] = serde_json::json!({"kind": "second-yy", "lambda": 1.0, "Lambda": 2.0});
        let err = parse(&v.to_string()).unwrap().functional().unwrap_err();
        assert!(err.to_string().contains("operator.lambda"), "{err}");
    }

    #[test]
    fn alpha_must_be_positive() {
        let mut v = base();
        v["alpha"] = serde_json::json!(0.0);
        let err = parse(&v.to_string()).unwrap().functional().unwrap_err();
        assert!(err.to_string().contains("\"alpha\""), "{err}");
    }

    #[test]
    fn scalar_and_list_epsilon_are_mutually_exclusive() {
        let mut v = base();
        v["epsilons"] = serde_json::json!([0.4, 0.2]);
        let file = parse(&v.to_string()).unwrap();
        assert!(file.scalar_epsilon().is_err());
        assert!(file.epsilon_list().is_err());

        let mut v = base();
        v.as_object_mut().unwrap().remove("epsilon");
        v["epsilons"] = serde_json::json!([0.4, 0.2]);
        let file = parse(&v.to_string()).unwrap();
        assert_eq!(file.epsilon_list().unwrap(), vec![0.4, 0.2]);
        let err = file.scalar_epsilon().unwrap_err();
        assert!(err.to_string().contains("\"epsilon\""), "{err}");
    }

    #[test]
    fn out_of_range_epsilon_is_rejected() {
        let mut v = base();
        v["epsilon"] = serde_json::json!(0.7);
        let err = parse(&v.to_string()).unwrap().scalar_epsilon().unwrap_err();
        assert!(err.to_string().contains("\"epsilon\""), "{err}");
    }

    #[test]
    fn solver_overrides_apply_on_top_of_defaults() {
        let mut v = base();
        v["solver"] = serde_json::json!({"max_iters": 5});
        let file = parse(&v.to_string()).unwrap();
        let p = file.params_over(IterParams::default()).unwrap();
        assert_eq!(p.max_iters, 5);
        assert_eq!(p.tau, IterParams::default().tau);

        v["solver"] = serde_json::json!({"tau": 1.5});
        let err = parse(&v.to_string()).unwrap().params_over(IterParams::default()).unwrap_err();
        assert!(err.to_string().contains("solver.tau"), "{err}");
    }

    #[test]
    fn poly_sources_pad_missing_coefficients() {
        let mut v = base();
        v["source"] = serde_json::json!({"f0": {"kind": "poly", "params": [1.0, 2.0]}});
        let f = parse(&v.to_string()).unwrap().functional().unwrap();
        // f0(x) = 1 + 2x at x = 3 → 7, and the default f1 contributes 0.
        assert_eq!(f.source().eval(3.0, 10.0), 7.0);
    }

    #[test]
    fn bad_source_kind_names_the_nested_key() {
        let mut v = base();
        v["source"]["f1"] = serde_json::json!({"kind": "tanh", "params": []});
        let err = parse(&v.to_string()).unwrap().functional().unwrap_err();
        assert!(err.to_string().contains("source.f1.kind"), "{err}");
    }
}
