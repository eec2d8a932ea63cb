//! Domain geometry: the base interval Ω = (a,b), the thickness profile g,
//! the thin strip Ω_ε under the graph y = εg(x), outward boundary normals,
//! and the chain-rule coefficients of the flattening map s = y/(εg(x)).

use thiserror::Error;

/// Largest admissible thickness parameter ε.
pub const EPSILON_MAX: f64 = 0.5;

/// Number of sample points used for the belt-and-braces positivity scan.
const POSITIVITY_SAMPLES: usize = 257;

/// Errors raised by geometry constructors and evaluations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("domain endpoints must satisfy a < b, got a = {a}, b = {b}")]
    EmptyDomain { a: f64, b: f64 },
    #[error("domain endpoints must be finite, got a = {a}, b = {b}")]
    NonFiniteDomain { a: f64, b: f64 },
    #[error("profile must be strictly positive on [a,b]: {reason}")]
    NonPositiveProfile { reason: String },
    #[error("profile parameters must be finite")]
    NonFiniteProfile,
    #[error("x = {x} lies outside the domain [{a}, {b}]")]
    OutsideDomain { x: f64, a: f64, b: f64 },
    #[error("s = {s} lies outside the reference interval [0, 1]")]
    OutsideReference { s: f64 },
    #[error("epsilon must lie in (0, {max}], got {epsilon}")]
    BadEpsilon { epsilon: f64, max: f64 },
}

/// The base interval Ω = (a, b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    a: f64,
    b: f64,
}

impl DomainSpec {
    /// Validates a < b and finiteness.
    pub fn new(a: f64, b: f64) -> Result<Self, GeometryError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(GeometryError::NonFiniteDomain { a, b });
        }
        if !(a < b) {
            return Err(GeometryError::EmptyDomain { a, b });
        }
        Ok(Self { a, b })
    }

    /// Left endpoint a.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Right endpoint b.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Interval length b − a.
    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Absolute slack accepted when checking membership of x in [a, b],
    /// covering round-off in grid-node arithmetic.
    fn slack(&self) -> f64 {
        1e-12 * (1.0 + self.a.abs() + self.b.abs())
    }

    fn check_x(&self, x: f64) -> Result<(), GeometryError> {
        if x < self.a - self.slack() || x > self.b + self.slack() || !x.is_finite() {
            return Err(GeometryError::OutsideDomain { x, a: self.a, b: self.b });
        }
        Ok(())
    }
}

/// Parametric family of thickness profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    /// g ≡ c.
    Constant { c: f64 },
    /// g(x) = c0 + c1·cos(kπ(x−a)/(b−a)).
    CosBump { c0: f64, c1: f64, k: f64 },
}

/// A validated thickness profile g on a specific domain: strictly positive,
/// with analytic first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSpec {
    domain: DomainSpec,
    kind: ProfileKind,
}

impl ProfileSpec {
    /// Validates strict positivity of g on [a, b]: analytic bounds
    /// (c > 0, resp. c0 − |c1| > 0) plus a dense sample scan.
    pub fn new(domain: DomainSpec, kind: ProfileKind) -> Result<Self, GeometryError> {
        match kind {
            ProfileKind::Constant { c } => {
                if !c.is_finite() {
                    return Err(GeometryError::NonFiniteProfile);
                }
                if c <= 0.0 {
                    return Err(GeometryError::NonPositiveProfile {
                        reason: format!("constant height c = {c} must be > 0"),
                    });
                }
            }
            ProfileKind::CosBump { c0, c1, k } => {
                if !c0.is_finite() || !c1.is_finite() || !k.is_finite() {
                    return Err(GeometryError::NonFiniteProfile);
                }
                if c0 - c1.abs() <= 0.0 {
                    return Err(GeometryError::NonPositiveProfile {
                        reason: format!("need c0 - |c1| > 0, got c0 = {c0}, c1 = {c1}"),
                    });
                }
            }
        }
        let profile = Self { domain, kind };
        for i in 0..POSITIVITY_SAMPLES {
            let t = i as f64 / (POSITIVITY_SAMPLES - 1) as f64;
            let x = domain.a() * (1.0 - t) + domain.b() * t;
            let (g, _, _) = profile.eval_unchecked(x);
            if g <= 0.0 {
                return Err(GeometryError::NonPositiveProfile {
                    reason: format!("sampled g({x}) = {g} <= 0"),
                });
            }
        }
        Ok(profile)
    }

    /// The domain this profile is defined on.
    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    /// The parametric form.
    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    fn eval_unchecked(&self, x: f64) -> (f64, f64, f64) {
        match self.kind {
            ProfileKind::Constant { c } => (c, 0.0, 0.0),
            ProfileKind::CosBump { c0, c1, k } => {
                let w = k * std::f64::consts::PI / self.domain.length();
                let theta = w * (x - self.domain.a());
                let g = c0 + c1 * theta.cos();
                let gp = -c1 * w * theta.sin();
                let gpp = -c1 * w * w * theta.cos();
                (g, gp, gpp)
            }
        }
    }

    /// Analytic maximum of g over [a, b].
    pub fn g_max(&self) -> f64 {
        match self.kind {
            ProfileKind::Constant { c } => c,
            ProfileKind::CosBump { c0, c1, k } => {
                // cos(θ) over θ ∈ [0, |k|π] attains max 1 at θ=0 and
                // min of cos(min(|k|π, π)).
                let span = (k.abs() * std::f64::consts::PI).min(std::f64::consts::PI);
                let cos_min = span.cos();
                c0 + (c1 * 1.0).max(c1 * cos_min)
            }
        }
    }

    /// Analytic minimum of g over [a, b] (positive by construction).
    pub fn g_min(&self) -> f64 {
        match self.kind {
            ProfileKind::Constant { c } => c,
            ProfileKind::CosBump { c0, c1, k } => {
                let span = (k.abs() * std::f64::consts::PI).min(std::f64::consts::PI);
                let cos_min = span.cos();
                c0 + (c1 * 1.0).min(c1 * cos_min)
            }
        }
    }
}

/// Evaluates g, g′, g″ at x analytically.
pub fn profile_eval(profile: &ProfileSpec, x: f64) -> Result<(f64, f64, f64), GeometryError> {
    profile.domain.check_x(x)?;
    Ok(profile.eval_unchecked(x))
}

/// The thin strip Ω_ε = {x ∈ (a,b), 0 < y < εg(x)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinDomainSpec {
    profile: ProfileSpec,
    epsilon: f64,
}

impl ThinDomainSpec {
    /// Validates ε ∈ (0, EPSILON_MAX].
    pub fn new(profile: ProfileSpec, epsilon: f64) -> Result<Self, GeometryError> {
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon > EPSILON_MAX {
            return Err(GeometryError::BadEpsilon { epsilon, max: EPSILON_MAX });
        }
        Ok(Self { profile, epsilon })
    }

    /// The base interval.
    pub fn domain(&self) -> DomainSpec {
        self.profile.domain()
    }

    /// The thickness profile.
    pub fn profile(&self) -> &ProfileSpec {
        &self.profile
    }

    /// The thickness parameter ε.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Physical height of the strip above x: y_top = εg(x).
    pub fn height(&self, x: f64) -> Result<f64, GeometryError> {
        let (g, _, _) = profile_eval(&self.profile, x)?;
        Ok(self.epsilon * g)
    }
}

/// Outward unit normal to the top boundary y = εg(x):
/// ν_T = (−εg′(x), 1)/√(1 + ε²g′(x)²).
pub fn top_normal(thin: &ThinDomainSpec, x: f64) -> Result<[f64; 2], GeometryError> {
    let (_, gp, _) = profile_eval(thin.profile(), x)?;
    let eg = thin.epsilon() * gp;
    let norm = (1.0 + eg * eg).sqrt();
    Ok([-eg / norm, 1.0 / norm])
}

/// Chain-rule coefficients of the flattening s = y/(εg(x)) at a reference
/// point (x, s). They express physical derivatives of u(x, y) through
/// derivatives of the flattened unknown v(x, s):
///
/// u_x  = v_x + v_s·s_x
/// u_y  = v_s·inv_eg
/// u_xx = v_xx + 2v_xs·s_x + v_ss·s_x² + v_s·s_xx
/// u_xy = inv_eg·(v_xs + v_ss·s_x) + v_s·ds_x_dy
/// u_yy = v_ss·inv_eg²
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRuleBundle {
    /// ∂s/∂x at fixed y: −s·g′(x)/g(x).
    pub s_x: f64,
    /// ∂²s/∂x² at fixed y: s·(2g′(x)²/g(x)² − g″(x)/g(x)).
    pub s_xx: f64,
    /// ∂(s_x)/∂y: −g′(x)/(ε·g(x)²).
    pub ds_x_dy: f64,
    /// ∂s/∂y: 1/(ε·g(x)).
    pub inv_eg: f64,
}

/// Evaluates the chain-rule coefficients at reference coordinates (x, s).
pub fn chain_rule_bundle(
    thin: &ThinDomainSpec,
    x: f64,
    s: f64,
) -> Result<ChainRuleBundle, GeometryError> {
    if !(-1e-12..=1.0 + 1e-12).contains(&s) {
        return Err(GeometryError::OutsideReference { s });
    }
    let (g, gp, gpp) = profile_eval(thin.profile(), x)?;
    let eps = thin.epsilon();
    let ratio = gp / g;
    Ok(ChainRuleBundle {
        s_x: -s * ratio,
        s_xx: s * (2.0 * ratio * ratio - gpp / g),
        ds_x_dy: -gp / (eps * g * g),
        inv_eg: 1.0 / (eps * g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_domain() -> DomainSpec {
        DomainSpec::new(0.0, 1.0).unwrap()
    }

    fn cos_bump() -> ProfileSpec {
        ProfileSpec::new(unit_domain(), ProfileKind::CosBump { c0: 2.0, c1: 0.5, k: 1.0 }).unwrap()
    }

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn domain_rejects_degenerate_intervals() {
        assert!(DomainSpec::new(1.0, 1.0).is_err());
        assert!(DomainSpec::new(2.0, -1.0).is_err());
        assert!(DomainSpec::new(f64::NAN, 1.0).is_err());
        assert!(DomainSpec::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn profile_eval_constant() {
        let p = ProfileSpec::new(unit_domain(), ProfileKind::Constant { c: 1.0 }).unwrap();
        let (g, gp, gpp) = profile_eval(&p, 0.3).unwrap();
        assert_eq!((g, gp, gpp), (1.0, 0.0, 0.0));
    }

    #[test]
    fn profile_eval_cos_bump_at_left_endpoint() {
        let (g, gp, gpp) = profile_eval(&cos_bump(), 0.0).unwrap();
        assert_eq!(g, 2.5);
        assert_eq!(gp, 0.0);
        assert_close(gpp, -0.5 * PI * PI, 1e-12, "gpp at x=0");
    }

    #[test]
    fn profile_eval_cos_bump_at_midpoint() {
        let (g, gp, gpp) = profile_eval(&cos_bump(), 0.5).unwrap();
        assert_close(g, 2.0, 1e-15, "g at x=0.5");
        assert_close(gp, -0.5 * PI, 1e-12, "gp at x=0.5");
        assert_close(gpp, 0.0, 1e-12, "gpp at x=0.5");
    }

    #[test]
    fn profile_eval_matches_central_differences() {
        let p = cos_bump();
        let h = 1e-6;
        for &x in &[0.15, 0.4, 0.77] {
            let (g, gp, gpp) = profile_eval(&p, x).unwrap();
            let (gm, _, _) = profile_eval(&p, x - h).unwrap();
            let (gp_, _, _) = profile_eval(&p, x + h).unwrap();
            assert_close(gp, (gp_ - gm) / (2.0 * h), 1e-6, "g' fd cross-check");
            assert_close(gpp, (gp_ - 2.0 * g + gm) / (h * h), 1e-3, "g'' fd cross-check");
        }
    }

    #[test]
    fn profile_eval_rejects_outside_domain() {
        let err = profile_eval(&cos_bump(), 1.5).unwrap_err();
        assert!(matches!(err, GeometryError::OutsideDomain { .. }));
    }

    #[test]
    fn profile_positivity_is_enforced() {
        assert!(ProfileSpec::new(unit_domain(), ProfileKind::Constant { c: 0.0 }).is_err());
        assert!(ProfileSpec::new(unit_domain(), ProfileKind::Constant { c: -1.0 }).is_err());
        assert!(
            ProfileSpec::new(unit_domain(), ProfileKind::CosBump { c0: 1.0, c1: 1.0, k: 1.0 })
                .is_err()
        );
        assert!(
            ProfileSpec::new(unit_domain(), ProfileKind::CosBump { c0: 1.0, c1: -2.0, k: 2.0 })
                .is_err()
        );
    }

    #[test]
    fn profile_extrema_match_dense_scan() {
        for kind in [
            ProfileKind::CosBump { c0: 2.0, c1: 0.5, k: 1.0 },
            ProfileKind::CosBump { c0: 2.0, c1: -0.5, k: 1.0 },
            ProfileKind::CosBump { c0: 1.0, c1: 0.3, k: 0.5 },
            ProfileKind::CosBump { c0: 1.0, c1: -0.3, k: 0.5 },
            ProfileKind::CosBump { c0: 3.0, c1: 1.2, k: 3.0 },
            ProfileKind::Constant { c: 1.5 },
        ] {
            let p = ProfileSpec::new(DomainSpec::new(-1.0, 2.0).unwrap(), kind).unwrap();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..=4096 {
                let t = i as f64 / 4096.0;
                let x = -1.0 * (1.0 - t) + 2.0 * t;
                let (g, _, _) = profile_eval(&p, x).unwrap();
                lo = lo.min(g);
                hi = hi.max(g);
            }
            assert_close(p.g_max(), hi, 1e-6, "g_max vs scan");
            assert_close(p.g_min(), lo, 1e-6, "g_min vs scan");
        }
    }

    #[test]
    fn epsilon_range_is_enforced() {
        let p = cos_bump();
        assert!(ThinDomainSpec::new(p, 0.0).is_err());
        assert!(ThinDomainSpec::new(p, -0.1).is_err());
        assert!(ThinDomainSpec::new(p, 0.6).is_err());
        assert!(ThinDomainSpec::new(p, f64::NAN).is_err());
        assert!(ThinDomainSpec::new(p, 0.5).is_ok());
    }

    #[test]
    fn top_normal_flat_profile() {
        let p = ProfileSpec::new(unit_domain(), ProfileKind::Constant { c: 2.0 }).unwrap();
        let thin = ThinDomainSpec::new(p, 0.3).unwrap();
        assert_eq!(top_normal(&thin, 0.4).unwrap(), [0.0, 1.0]);
    }

    #[test]
    fn top_normal_forty_five_degrees() {
        // ε·g′ = 1 ⇒ ν_T = (−1/√2, 1/√2). Realized with a CosBump slope at
        // the quarter period: g′ = −c1·kπ·sin(π/2) = −c1·kπ.
        let c1 = -1.0 / (0.5 * PI);
        let p = ProfileSpec::new(
            unit_domain(),
            ProfileKind::CosBump { c0: 1.0 - c1.abs() + 1.0, c1, k: 1.0 },
        )
        .unwrap();
        let thin = ThinDomainSpec::new(p, 0.5).unwrap();
        // g′(0.5) = −c1·π·sin(π/2) = π/(0.5π) = 2, so εg′ = 1 at ε = 0.5.
        let n = top_normal(&thin, 0.5).unwrap();
        let r = 1.0 / 2.0_f64.sqrt();
        assert_close(n[0], -r, 1e-12, "nu_x");
        assert_close(n[1], r, 1e-12, "nu_y");
    }

    #[test]
    fn top_normal_cos_bump_midpoint() {
        let thin = ThinDomainSpec::new(cos_bump(), 0.1).unwrap();
        let n = top_normal(&thin, 0.5).unwrap();
        let denom = (1.0 + 0.0025 * PI * PI).sqrt();
        assert_close(n[0], 0.05 * PI / denom, 1e-12, "nu_x");
        assert_close(n[1], 1.0 / denom, 1e-12, "nu_y");
        assert_close((n[0] * n[0] + n[1] * n[1]).sqrt(), 1.0, 1e-12, "unit norm");
        assert!(n[1] > 0.0);
    }

    #[test]
    fn chain_rule_constant_profile() {
        let p = ProfileSpec::new(unit_domain(), ProfileKind::Constant { c: 2.0 }).unwrap();
        let thin = ThinDomainSpec::new(p, 0.25).unwrap();
        let b = chain_rule_bundle(&thin, 0.7, 0.4).unwrap();
        assert_eq!(b.s_x, 0.0);
        assert_eq!(b.s_xx, 0.0);
        assert_eq!(b.ds_x_dy, 0.0);
        assert_eq!(b.inv_eg, 1.0 / (0.25 * 2.0));
    }

    #[test]
    fn chain_rule_cos_bump_top() {
        // CosBump(2, 0.5, 1), ε = 0.1, x = 0.5, s = 1:
        // g = 2, g′ = −π/2 ⇒ s_x = π/4, s_xx = π²/8, ds_x_dy = 5π/4, inv_eg = 5.
        let thin = ThinDomainSpec::new(cos_bump(), 0.1).unwrap();
        let b = chain_rule_bundle(&thin, 0.5, 1.0).unwrap();
        assert_close(b.s_x, 0.25 * PI, 1e-12, "s_x");
        assert_close(b.s_xx, 0.125 * PI * PI, 1e-11, "s_xx");
        assert_close(b.ds_x_dy, 1.25 * PI, 1e-11, "ds_x_dy");
        assert_close(b.inv_eg, 5.0, 1e-12, "inv_eg");
    }

    #[test]
    fn chain_rule_vanishes_at_bottom() {
        let thin = ThinDomainSpec::new(cos_bump(), 0.2).unwrap();
        let b = chain_rule_bundle(&thin, 0.35, 0.0).unwrap();
        assert_eq!(b.s_x, 0.0);
        assert_eq!(b.s_xx, 0.0);
    }

    #[test]
    fn chain_rule_matches_finite_differences_of_the_map() {
        // Differentiate s(x, y) = y/(εg(x)) directly on a 1e-6 stencil and
        // compare against the analytic bundle.
        let thin = ThinDomainSpec::new(cos_bump(), 0.1).unwrap();
        let eps = thin.epsilon();
        let s_of = |x: f64, y: f64| {
            let (g, _, _) = profile_eval(thin.profile(), x).unwrap();
            y / (eps * g)
        };
        let h = 1e-6;
        for &(x, s) in &[(0.3, 0.25), (0.5, 1.0), (0.62, 0.5), (0.5, 0.0)] {
            let (g, _, _) = profile_eval(thin.profile(), x).unwrap();
            let y = eps * g * s;
            let b = chain_rule_bundle(&thin, x, s).unwrap();
            let sx_fd = (s_of(x + h, y) - s_of(x - h, y)) / (2.0 * h);
            let sxx_fd = (s_of(x + h, y) - 2.0 * s_of(x, y) + s_of(x - h, y)) / (h * h);
            let dsxdy_fd = ((s_of(x + h, y + h) - s_of(x - h, y + h))
                - (s_of(x + h, y - h) - s_of(x - h, y - h)))
                / (4.0 * h * h);
            assert_close(b.s_x, sx_fd, 1e-6, "s_x vs map fd");
            assert_close(b.s_xx, sxx_fd, 1e-3, "s_xx vs map fd");
            assert_close(b.ds_x_dy, dsxdy_fd, 1e-3, "ds_x_dy vs map fd");
        }
    }

    #[test]
    fn chain_rule_rejects_bad_reference_coordinate() {
        let thin = ThinDomainSpec::new(cos_bump(), 0.1).unwrap();
        assert!(chain_rule_bundle(&thin, 0.5, -0.2).is_err());
        assert!(chain_rule_bundle(&thin, 0.5, 1.2).is_err());
    }
}
