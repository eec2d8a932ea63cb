//! Symmetric 2×2 matrix algebra, the extremal-operator family, the proper
//! functional F(X, p, r, z) = −Op(X) + α·r − f(z), and the reduced 1D
//! functional G(q, p, r, x) = F(diag(q, g′p/g), (p,0), r, (x,0)).

use crate::geometry::{profile_eval, GeometryError, ProfileSpec, ThinDomainSpec};
use thiserror::Error;

/// Number of x-samples in the sup|f| scan (f is affine in y, so the y-extent
/// is resolved exactly at y = 0 and y = εg(x)).
const SUP_SCAN_SAMPLES: usize = 4097;

/// Errors raised by operator-family constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("ellipticity constants must satisfy 0 < lambda <= Lambda, got lambda = {lambda}, Lambda = {big_lambda}")]
    BadEllipticity { lambda: f64, big_lambda: f64 },
    #[error("alpha must be a positive finite real, got {alpha}")]
    BadAlpha { alpha: f64 },
    #[error("source parameters must be finite")]
    NonFiniteSource,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A symmetric 2×2 matrix, the physical Hessian candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    /// Zero matrix.
    pub const ZERO: SymMat2 = SymMat2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    /// Diagonal matrix diag(xx, yy).
    pub fn diag(xx: f64, yy: f64) -> Self {
        Self { xx, xy: 0.0, yy }
    }

    /// trace = xx + yy.
    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Entrywise negation.
    pub fn neg(&self) -> Self {
        Self { xx: -self.xx, xy: -self.xy, yy: -self.yy }
    }
}

/// Eigenvalues of a symmetric 2×2 matrix in nondecreasing order, by the
/// closed form t/2 ∓ √((xx−yy)²/4 + xy²).
pub fn eigen2(x: &SymMat2) -> (f64, f64) {
    let half_t = 0.5 * (x.xx + x.yy);
    let d = 0.5 * (x.xx - x.yy);
    let r = (d * d + x.xy * x.xy).sqrt();
    (half_t - r, half_t + r)
}

/// Validated ellipticity constants 0 < λ ≤ Λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipticity {
    lambda: f64,
    big_lambda: f64,
}

impl Ellipticity {
    /// Validates 0 < lambda <= Lambda.
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self, OperatorError> {
        if !(lambda > 0.0 && lambda <= big_lambda && big_lambda.is_finite()) {
            return Err(OperatorError::BadEllipticity { lambda, big_lambda });
        }
        Ok(Self { lambda, big_lambda })
    }

    /// Lower constant λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Upper constant Λ.
    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }
}

/// The operator family Op(X): extremal operators and degenerate examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// M⁺_{λ,Λ}(X) = λ·Σ_{e<0} e + Λ·Σ_{e≥0} e over eigenvalues e of X.
    PucciPlus(Ellipticity),
    /// M⁻_{λ,Λ}(X) = Λ·Σ_{e<0} e + λ·Σ_{e≥0} e = −M⁺(−X).
    PucciMinus(Ellipticity),
    /// trace(X).
    Laplacian,
    /// The yy entry of X (acts on ∂²u/∂y² only).
    SecondYY,
    /// The xx entry of X (acts on ∂²u/∂x² only).
    SecondXX,
}

impl OperatorKind {
    /// Largest coefficient the operator can put on a pure second derivative;
    /// used by the solvers' diagonal scaling.
    pub fn lambda_eff(&self) -> f64 {
        match self {
            OperatorKind::PucciPlus(e) | OperatorKind::PucciMinus(e) => e.big_lambda(),
            _ => 1.0,
        }
    }
}

fn pucci_plus_weight(e: f64, ell: &Ellipticity) -> f64 {
    if e >= 0.0 {
        ell.big_lambda() * e
    } else {
        ell.lambda() * e
    }
}

fn pucci_minus_weight(e: f64, ell: &Ellipticity) -> f64 {
    if e >= 0.0 {
        ell.lambda() * e
    } else {
        ell.big_lambda() * e
    }
}

/// Applies Op(X) for the given operator kind.
pub fn apply_operator(op: &OperatorKind, x: &SymMat2) -> f64 {
    match op {
        OperatorKind::PucciPlus(ell) => {
            let (e1, e2) = eigen2(x);
            pucci_plus_weight(e1, ell) + pucci_plus_weight(e2, ell)
        }
        OperatorKind::PucciMinus(ell) => {
            let (e1, e2) = eigen2(x);
            pucci_minus_weight(e1, ell) + pucci_minus_weight(e2, ell)
        }
        OperatorKind::Laplacian => x.trace(),
        OperatorKind::SecondYY => x.yy,
        OperatorKind::SecondXX => x.xx,
    }
}

/// One member of the 1D source family: a scalar function of x.
#[derive(Debug, Clone, Copy)]
pub enum SourceComponent {
    /// f(x) ≡ c.
    Constant(f64),
    /// f(x) = c0 + c1·x + c2·x² + c3·x³.
    Poly([f64; 4]),
    /// f(x) = amp·cos(freq·x + phase).
    Cosine { amp: f64, freq: f64, phase: f64 },
    /// Arbitrary in-crate function, used by manufactured-solution tests;
    /// not reachable from scenario files.
    Custom(fn(f64) -> f64),
}

impl SourceComponent {
    /// Evaluates the component at x.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SourceComponent::Constant(c) => *c,
            SourceComponent::Poly(c) => c[0] + x * (c[1] + x * (c[2] + x * c[3])),
            SourceComponent::Cosine { amp, freq, phase } => amp * (freq * x + phase).cos(),
            SourceComponent::Custom(f) => f(x),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            SourceComponent::Constant(c) => c.is_finite(),
            SourceComponent::Poly(c) => c.iter().all(|v| v.is_finite()),
            SourceComponent::Cosine { amp, freq, phase } => {
                amp.is_finite() && freq.is_finite() && phase.is_finite()
            }
            SourceComponent::Custom(_) => true,
        }
    }
}

/// The source family f(x, y) = f0(x) + y·f1(x), affine in y.
#[derive(Debug, Clone, Copy)]
pub struct SourceSpec {
    pub f0: SourceComponent,
    pub f1: SourceComponent,
}

impl SourceSpec {
    /// A y-independent source.
    pub fn of_x(f0: SourceComponent) -> Self {
        Self { f0, f1: SourceComponent::Constant(0.0) }
    }

    /// Evaluates f at the physical point (x, y).
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.f0.eval(x) + y * self.f1.eval(x)
    }

    /// sup over Ω̄_ε of |f|, by a dense x-scan; the y-extent is exact since f
    /// is affine in y (extremes at y = 0 and y = εg(x)).
    pub fn sup_abs(&self, thin: &ThinDomainSpec) -> f64 {
        let dom = thin.domain();
        let mut sup: f64 = 0.0;
        for i in 0..SUP_SCAN_SAMPLES {
            let t = i as f64 / (SUP_SCAN_SAMPLES - 1) as f64;
            let x = dom.a() * (1.0 - t) + dom.b() * t;
            let y_top = thin.height(x).expect("scan point inside domain");
            sup = sup.max(self.eval(x, 0.0).abs()).max(self.eval(x, y_top).abs());
        }
        sup
    }

    /// sup over [a,b] of |f(·, 0)|, the data scale of the limit problem.
    pub fn sup_abs_at_zero(&self, profile: &ProfileSpec) -> f64 {
        let dom = profile.domain();
        let mut sup: f64 = 0.0;
        for i in 0..SUP_SCAN_SAMPLES {
            let t = i as f64 / (SUP_SCAN_SAMPLES - 1) as f64;
            let x = dom.a() * (1.0 - t) + dom.b() * t;
            sup = sup.max(self.eval(x, 0.0).abs());
        }
        sup
    }
}

/// The proper functional F(X, p, r, z) = −Op(X) + α·r − f(z).
#[derive(Debug, Clone, Copy)]
pub struct FunctionalSpec {
    op: OperatorKind,
    alpha: f64,
    source: SourceSpec,
}

impl FunctionalSpec {
    /// Validates α > 0 and finite source parameters.
    pub fn new(op: OperatorKind, alpha: f64, source: SourceSpec) -> Result<Self, OperatorError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(OperatorError::BadAlpha { alpha });
        }
        if !source.f0.is_finite() || !source.f1.is_finite() {
            return Err(OperatorError::NonFiniteSource);
        }
        Ok(Self { op, alpha, source })
    }

    /// The operator kind.
    pub fn op(&self) -> &OperatorKind {
        &self.op
    }

    /// The properness constant α.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The source family.
    pub fn source(&self) -> &SourceSpec {
        &self.source
    }

    /// Evaluates F(X, p, r, z). The gradient argument is carried for
    /// signature completeness; this family does not read it.
    pub fn eval_f(&self, x: &SymMat2, _p: [f64; 2], r: f64, z: [f64; 2]) -> f64 {
        -apply_operator(&self.op, x) + self.alpha * r - self.source.eval(z[0], z[1])
    }

    /// C0 = sup over Ω̄_ε of |F(0, 0, 0, z)| = sup|f|.
    pub fn c0(&self, thin: &ThinDomainSpec) -> f64 {
        self.source.sup_abs(thin)
    }
}

/// The reduced functional G(q, p, r, x) = F(diag(q, g′p/g), (p,0), r, (x,0)).
#[derive(Debug, Clone, Copy)]
pub struct LimitFunctionalSpec {
    functional: FunctionalSpec,
    profile: ProfileSpec,
}

/// Builds the limit functional from the thin-problem functional and profile.
#[allow(non_snake_case)]
pub fn build_limit_G(functional: &FunctionalSpec, profile: &ProfileSpec) -> LimitFunctionalSpec {
    LimitFunctionalSpec { functional: *functional, profile: *profile }
}

impl LimitFunctionalSpec {
    /// The underlying thin-problem functional.
    pub fn functional(&self) -> &FunctionalSpec {
        &self.functional
    }

    /// The thickness profile supplying the drift g′/g.
    pub fn profile(&self) -> &ProfileSpec {
        &self.profile
    }

    /// Evaluates G(q, p, r, x) by composition through F.
    pub fn eval_g(&self, q: f64, p: f64, r: f64, x: f64) -> Result<f64, GeometryError> {
        let (g, gp, _) = profile_eval(&self.profile, x)?;
        let d = gp * p / g;
        Ok(self.functional.eval_f(&SymMat2::diag(q, d), [p, 0.0], r, [x, 0.0]))
    }
}
