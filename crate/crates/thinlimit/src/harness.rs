//! ε-sweep orchestration and built-in validation oracles.
//!
//! A sweep solves one limit problem and a family of thin problems at fixed
//! horizontal resolution, then measures the uniform gap
//! max |u_ε(node) − w(x_i)| over every thin-grid node. The grids share their
//! x-nodes, so the metric needs no interpolation; hx is held fixed across
//! the sweep so the gaps reflect ε alone, while ns follows the aspect rule.
//!
//! The oracle suite re-derives the headline invariants (constant solutions,
//! manufactured-solution orders, the a priori bound, comparison, and the
//! chain-rule reconstruction) as pass/fail checks with measured values, and
//! exposes a mutation hook that deliberately breaks the chain rule to prove
//! the suite can fail.

use std::thread;

use thiserror::Error;

use crate::geometry::{
    chain_rule_bundle, GeometryError, ProfileKind, ProfileSpec, ThinDomainSpec,
};
use crate::grids::{fd_derivs, jet_from_flat, Field, GridError, ReferenceGrid};
use crate::limit_solver::{residual_limit, solve_limit, LimitScenario};
use crate::operators::{
    build_limit_G, Ellipticity, FunctionalSpec, OperatorKind, SourceComponent, SourceSpec,
};
use crate::relax::{IterParams, SolveError};
use crate::thin_solver::{residual, solve_thin, SolveReport, ThinScenario};

/// Errors raised while setting up or running a sweep.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("epsilon list invalid: {reason}")]
    BadEpsilons { reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// The ε-independent part of a sweep: strip profile, functional, and an
/// optional override for the iteration knobs (defaults are per-scenario).
#[derive(Debug, Clone, Copy)]
pub struct SweepTemplate {
    profile: ProfileSpec,
    functional: FunctionalSpec,
    params: Option<IterParams>,
}

impl SweepTemplate {
    /// A template using per-scenario default iteration parameters.
    pub fn new(profile: ProfileSpec, functional: FunctionalSpec) -> Self {
        Self { profile, functional, params: None }
    }

    /// Overrides the iteration parameters for every solve in the sweep.
    pub fn with_params(mut self, params: IterParams) -> Self {
        self.params = Some(params);
        self
    }

    /// The strip profile.
    pub fn profile(&self) -> &ProfileSpec {
        &self.profile
    }

    /// The functional shared by the thin and limit problems.
    pub fn functional(&self) -> &FunctionalSpec {
        &self.functional
    }
}

/// One ε-entry of a sweep: the resolutions used and the uniform gap to the
/// shared limit solution.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub nx: usize,
    pub ns: usize,
    /// max over all thin-grid nodes (boundaries included) of |u_ε − w(x_i)|.
    pub sup_error: f64,
    pub thin_report: SolveReport,
    pub limit_report: SolveReport,
}

impl SweepRecord {
    /// True when both solves behind the record converged.
    pub fn converged(&self) -> bool {
        self.thin_report.converged && self.limit_report.converged
    }
}

/// A completed sweep, records sorted by decreasing ε.
#[derive(Debug, Clone)]
pub struct SweepResult {
    records: Vec<SweepRecord>,
}

impl SweepResult {
    /// The records, sorted by decreasing ε.
    pub fn records(&self) -> &[SweepRecord] {
        &self.records
    }

    /// True when every record converged.
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(SweepRecord::converged)
    }
}

/// Runs the sweep: one limit solve, one thin solve per ε (distributed over
/// `jobs` worker threads, output identical regardless of `jobs`), records
/// sorted by decreasing ε. Non-converged solves flag their record and the
/// sweep continues.
pub fn run_sweep(
    template: &SweepTemplate,
    epsilons: &[f64],
    nx: usize,
    jobs: usize,
) -> Result<SweepResult, HarnessError> {
    if epsilons.is_empty() {
        return Err(HarnessError::BadEpsilons { reason: "empty list".into() });
    }
    if let Some(bad) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(HarnessError::BadEpsilons {
            reason: format!("entries must be positive finite reals, got {bad}"),
        });
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    if eps.windows(2).any(|w| w[0] == w[1]) {
        return Err(HarnessError::BadEpsilons { reason: "entries must be distinct".into() });
    }

    let limit_scn = LimitScenario::new(
        build_limit_G(&template.functional, &template.profile),
        nx,
    )?;
    let limit_params = template.params.unwrap_or_else(|| limit_scn.default_params());
    let (w, limit_report) = solve_limit(&limit_scn, &limit_params)?;

    let jobs = jobs.max(1).min(eps.len());
    let mut slots: Vec<Option<Result<SweepRecord, HarnessError>>> = vec![None; eps.len()];
    thread::scope(|scope| {
        let mut handles = Vec::with_capacity(jobs);
        for worker in 0..jobs {
            let eps = &eps;
            let w = &w;
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                let mut k = worker;
                while k < eps.len() {
                    out.push((k, sweep_record(template, eps[k], nx, w, limit_report)));
                    k += jobs;
                }
                out
            }));
        }
        for handle in handles {
            for (k, result) in handle.join().expect("sweep worker panicked") {
                slots[k] = Some(result);
            }
        }
    });

    let mut records = Vec::with_capacity(eps.len());
    for slot in slots {
        records.push(slot.expect("every index assigned")?);
    }
    Ok(SweepResult { records })
}

/// Solves one thin problem and measures its gap to the limit solution.
fn sweep_record(
    template: &SweepTemplate,
    epsilon: f64,
    nx: usize,
    w: &[f64],
    limit_report: SolveReport,
) -> Result<SweepRecord, HarnessError> {
    let thin = ThinDomainSpec::new(template.profile, epsilon)?;
    let scn = ThinScenario::with_default_grid(thin, template.functional, nx)?;
    let params = template.params.unwrap_or_else(|| scn.default_params());
    let (u, thin_report) = solve_thin(&scn, &params)?;
    let ns = scn.grid().ns();
    let mut sup_error = 0.0f64;
    for j in 0..ns {
        for (i, wi) in w.iter().enumerate() {
            sup_error = sup_error.max((u.at(i, j) - wi).abs());
        }
    }
    log::info!(
        "sweep record eps = {epsilon:.4}: {nx}x{ns} grid, sup_error = {sup_error:.6e}, \
         {} thin updates, converged = {}",
        thin_report.iterations,
        thin_report.converged
    );
    Ok(SweepRecord { epsilon, nx, ns, sup_error, thin_report, limit_report })
}

/// Least-squares slope of log(err) against log(scale); the empirical
/// convergence order when `scales` are grid spacings (or ε values).
pub fn fit_order(scales: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(scales.len(), errors.len(), "order fit needs paired samples");
    assert!(scales.len() >= 2, "order fit needs at least two samples");
    assert!(
        scales.iter().chain(errors.iter()).all(|v| v.is_finite() && *v > 0.0),
        "order fit needs positive finite samples"
    );
    let lx: Vec<f64> = scales.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Deliberate defects injectable into the oracle suite to prove it can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Multiplies the s_x chain-rule coefficient by 1.01 inside the
    /// jet-reconstruction oracle.
    ChainRule,
}

/// Knobs for the oracle suite.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Solver tolerance used by the solve-based checks; their acceptance
    /// thresholds scale with it.
    pub tol: f64,
    /// Optional deliberate defect.
    pub mutation: Option<Mutation>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { tol: 1e-9, mutation: None }
    }
}

/// One entry of the oracle report.
#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    /// The measured quantity (deviation, slope, ratio, or sup-norm).
    pub measured: f64,
    /// The pre-registered threshold it was compared against.
    pub threshold: f64,
    /// Human-readable detail, including the comparison direction.
    pub note: String,
}

/// The oracle suite's outcome; failures are entries, never errors.
#[derive(Debug, Clone)]
pub struct OracleReport {
    checks: Vec<OracleCheck>,
}

impl OracleReport {
    /// All checks in execution order.
    pub fn checks(&self) -> &[OracleCheck] {
        &self.checks
    }

    /// True when every check passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn unit_profile(kind: ProfileKind) -> ProfileSpec {
    let domain = crate::geometry::DomainSpec::new(0.0, 1.0).expect("static domain");
    ProfileSpec::new(domain, kind).expect("static profile")
}

fn cos_bump_profile() -> ProfileSpec {
    unit_profile(ProfileKind::CosBump { c0: 2.0, c1: 0.5, k: 1.0 })
}

fn check_le(name: &'static str, measured: f64, threshold: f64, what: &str) -> OracleCheck {
    OracleCheck {
        name,
        passed: measured <= threshold,
        measured,
        threshold,
        note: format!("{what}: require measured <= threshold"),
    }
}

fn check_ge(name: &'static str, measured: f64, threshold: f64, what: &str) -> OracleCheck {
    OracleCheck {
        name,
        passed: measured >= threshold,
        measured,
        threshold,
        note: format!("{what}: require measured >= threshold"),
    }
}

fn failed(name: &'static str, threshold: f64, why: String) -> OracleCheck {
    OracleCheck { name, passed: false, measured: f64::NAN, threshold, note: why }
}

/// Runs the full oracle suite; failures come back as report entries.
pub fn oracle_suite(options: &OracleOptions) -> OracleReport {
    let checks = vec![
        chain_rule_check(options),
        constant_thin_check(options),
        constant_limit_check(options),
        mms_thin_check(),
        mms_limit_second_order_check(),
        mms_limit_first_order_check(),
        apriori_bound_check(options),
        comparison_thin_check(options),
        comparison_limit_check(options),
    ];
    OracleReport { checks }
}

/// Physical test function for the jet oracle and its exact derivatives.
fn jet_probe(x: f64, y: f64) -> (f64, [f64; 2], [f64; 3]) {
    use std::f64::consts::PI;
    let (sin, cos) = (PI * x).sin_cos();
    let poly = 1.0 + y + y * y;
    let value = cos * poly;
    let grad = [-PI * sin * poly, cos * (1.0 + 2.0 * y)];
    let hess = [
        -PI * PI * cos * poly,
        -PI * sin * (1.0 + 2.0 * y),
        2.0 * cos,
    ];
    (value, grad, hess)
}

/// Worst interior jet-reconstruction error at resolution n (nx = ns = n).
fn jet_probe_error(thin: &ThinDomainSpec, n: usize, mutated: bool) -> f64 {
    let grid = ReferenceGrid::new(thin.domain(), n, n).expect("static grid");
    let field = Field::from_fn(&grid, |i, j| {
        let x = grid.x(i);
        let y = thin.height(x).expect("node in domain") * grid.s(j);
        jet_probe(x, y).0
    });
    let mut worst = 0.0f64;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let x = grid.x(i);
            let s = grid.s(j);
            let y = thin.height(x).expect("node in domain") * s;
            let d = fd_derivs(&grid, &field, i, j);
            let mut cb = chain_rule_bundle(thin, x, s).expect("node in domain");
            if mutated {
                cb.s_x *= 1.01;
            }
            let jet = jet_from_flat(&d, &cb);
            let (_, grad, hess) = jet_probe(x, y);
            worst = worst
                .max((jet.grad[0] - grad[0]).abs())
                .max((jet.grad[1] - grad[1]).abs())
                .max((jet.hess.xx - hess[0]).abs())
                .max((jet.hess.xy - hess[1]).abs())
                .max((jet.hess.yy - hess[2]).abs());
        }
    }
    worst
}

/// The jet reconstructed through the chain rule converges at second order:
/// doubling the resolution must shrink the worst error well below half.
fn chain_rule_check(options: &OracleOptions) -> OracleCheck {
    let thin = ThinDomainSpec::new(cos_bump_profile(), 0.2).expect("static strip");
    let mutated = options.mutation == Some(Mutation::ChainRule);
    let coarse = jet_probe_error(&thin, 65, mutated);
    let fine = jet_probe_error(&thin, 129, mutated);
    check_le(
        "chain-rule-jet",
        fine / coarse,
        0.35,
        "jet error ratio under grid doubling (second-order decay)",
    )
}

fn constant_thin_check(options: &OracleOptions) -> OracleCheck {
    let name = "constant-solution-thin";
    let thin = match ThinDomainSpec::new(cos_bump_profile(), 0.2) {
        Ok(t) => t,
        Err(e) => return failed(name, 0.0, e.to_string()),
    };
    let functional = FunctionalSpec::new(
        OperatorKind::Laplacian,
        2.0,
        SourceSpec::of_x(SourceComponent::Constant(3.0)),
    )
    .expect("static functional");
    let scn = match ThinScenario::with_default_grid(thin, functional, 21) {
        Ok(s) => s,
        Err(e) => return failed(name, 0.0, e.to_string()),
    };
    let params = IterParams { tol: options.tol, ..IterParams::default() };
    match solve_thin(&scn, &params) {
        Ok((u, rep)) if rep.converged => {
            let dev = u.as_slice().iter().fold(0.0f64, |m, v| m.max((v - 1.5).abs()));
            check_le(name, dev, 10.0 * options.tol, "sup |u - f/alpha| for constant data")
        }
        Ok(_) => failed(name, 10.0 * options.tol, "solve did not converge".into()),
        Err(e) => failed(name, 10.0 * options.tol, e.to_string()),
    }
}

fn constant_limit_check(options: &OracleOptions) -> OracleCheck {
    let name = "constant-solution-limit";
    let functional = FunctionalSpec::new(
        OperatorKind::SecondYY,
        2.0,
        SourceSpec::of_x(SourceComponent::Constant(3.0)),
    )
    .expect("static functional");
    let scn = match LimitScenario::new(build_limit_G(&functional, &cos_bump_profile()), 41) {
        Ok(s) => s,
        Err(e) => return failed(name, 0.0, e.to_string()),
    };
    let params = IterParams { tol: options.tol, ..IterParams::default() };
    match solve_limit(&scn, &params) {
        Ok((w, rep)) if rep.converged => {
            let dev = w.iter().fold(0.0f64, |m, v| m.max((v - 1.5).abs()));
            check_le(name, dev, 10.0 * options.tol, "sup |w - f/alpha| for constant data")
        }
        Ok(_) => failed(name, 10.0 * options.tol, "solve did not converge".into()),
        Err(e) => failed(name, 10.0 * options.tol, e.to_string()),
    }
}

/// Thin Laplacian manufactured solution u*(x) = cos(πx) on a flat strip.
fn mms_thin_check() -> OracleCheck {
    use std::f64::consts::PI;
    let profile = unit_profile(ProfileKind::Constant { c: 1.0 });
    let thin = ThinDomainSpec::new(profile, 0.2).expect("static strip");
    let functional = FunctionalSpec::new(
        OperatorKind::Laplacian,
        1.0,
        SourceSpec::of_x(SourceComponent::Cosine { amp: PI * PI + 1.0, freq: PI, phase: 0.0 }),
    )
    .expect("static functional");
    let sup = |nx: usize| {
        let scn = ThinScenario::with_default_grid(thin, functional, nx).expect("static grid");
        let u = Field::from_fn(scn.grid(), |i, _| (PI * scn.grid().x(i)).cos());
        residual(&scn, &u).sup_norm()
    };
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let errs = [sup(17), sup(33), sup(65)];
    check_ge(
        "mms-thin-residual-order",
        fit_order(&hs, &errs),
        1.9,
        "truncation order of the thin scheme on a manufactured solution",
    )
}

fn limit_residual_order(scn_at: impl Fn(usize) -> LimitScenario, nxs: [usize; 3]) -> f64 {
    use std::f64::consts::PI;
    let mut hs = [0.0; 3];
    let mut errs = [0.0; 3];
    for (k, nx) in nxs.into_iter().enumerate() {
        let scn = scn_at(nx);
        let ws: Vec<f64> = (0..nx).map(|i| (PI * scn.x(i)).cos()).collect();
        let r = residual_limit(&scn, &ws);
        hs[k] = scn.hx();
        errs[k] = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    fit_order(&hs, &errs)
}

fn mms_limit_second_order_check() -> OracleCheck {
    use std::f64::consts::PI;
    let profile = unit_profile(ProfileKind::Constant { c: 1.0 });
    let order = limit_residual_order(
        |nx| {
            let functional = FunctionalSpec::new(
                OperatorKind::Laplacian,
                1.0,
                SourceSpec::of_x(SourceComponent::Cosine {
                    amp: PI * PI + 1.0,
                    freq: PI,
                    phase: 0.0,
                }),
            )
            .expect("static functional");
            LimitScenario::new(build_limit_G(&functional, &profile), nx).expect("static scenario")
        },
        [33, 65, 129],
    );
    check_ge(
        "mms-limit-second-order",
        order,
        1.9,
        "truncation order of the limit scheme, second-order kind",
    )
}

/// Manufactured source matching w* = cos(πx) for the pure-∂²/∂y² limit under
/// the cosine bump: G reduces to −(g′/g)w′ + w.
fn first_order_probe_source(x: f64) -> f64 {
    use std::f64::consts::PI;
    let g = 2.0 + 0.5 * (PI * x).cos();
    let gp = -0.5 * PI * (PI * x).sin();
    let wsp = -PI * (PI * x).sin();
    -(gp / g) * wsp + (PI * x).cos()
}

fn mms_limit_first_order_check() -> OracleCheck {
    let profile = cos_bump_profile();
    let order = limit_residual_order(
        |nx| {
            let functional = FunctionalSpec::new(
                OperatorKind::SecondYY,
                1.0,
                SourceSpec::of_x(SourceComponent::Custom(first_order_probe_source)),
            )
            .expect("static functional");
            LimitScenario::new(build_limit_G(&functional, &profile), nx).expect("static scenario")
        },
        [33, 65, 129],
    );
    check_ge(
        "mms-limit-first-order",
        order,
        0.9,
        "truncation order of the limit scheme, upwinded first-order kind",
    )
}

fn apriori_bound_check(options: &OracleOptions) -> OracleCheck {
    let name = "apriori-bound";
    let e = Ellipticity::new(1.0, 2.0).expect("static constants");
    let thin = match ThinDomainSpec::new(cos_bump_profile(), 0.2) {
        Ok(t) => t,
        Err(err) => return failed(name, 0.0, err.to_string()),
    };
    let functional = FunctionalSpec::new(
        OperatorKind::PucciPlus(e),
        1.0,
        SourceSpec {
            f0: SourceComponent::Cosine { amp: 1.0, freq: std::f64::consts::PI, phase: 0.0 },
            f1: SourceComponent::Constant(1.0),
        },
    )
    .expect("static functional");
    let bound = functional.c0(&thin) / functional.alpha() + 10.0 * options.tol;
    let scn = match ThinScenario::with_default_grid(thin, functional, 41) {
        Ok(s) => s,
        Err(err) => return failed(name, bound, err.to_string()),
    };
    let params = IterParams { tol: options.tol, ..IterParams::default() };
    match solve_thin(&scn, &params) {
        Ok((_, rep)) if rep.converged => {
            check_le(name, rep.sup_norm, bound, "sup-norm against the data bound sup|f|/alpha")
        }
        Ok(_) => failed(name, bound, "solve did not converge".into()),
        Err(err) => failed(name, bound, err.to_string()),
    }
}

fn comparison_sources() -> (SourceSpec, SourceSpec) {
    (
        SourceSpec::of_x(SourceComponent::Poly([0.1, 0.0, 0.3, 0.0])),
        SourceSpec::of_x(SourceComponent::Poly([0.45, 0.0, 0.3, 0.0])),
    )
}

fn comparison_thin_check(options: &OracleOptions) -> OracleCheck {
    let name = "comparison-thin";
    let (lo, hi) = comparison_sources();
    let params = IterParams { tol: options.tol, ..IterParams::default() };
    let solve = |src: SourceSpec| -> Result<Field, String> {
        let thin = ThinDomainSpec::new(cos_bump_profile(), 0.2).map_err(|e| e.to_string())?;
        let functional =
            FunctionalSpec::new(OperatorKind::Laplacian, 1.0, src).map_err(|e| e.to_string())?;
        let scn =
            ThinScenario::with_default_grid(thin, functional, 31).map_err(|e| e.to_string())?;
        let (u, rep) = solve_thin(&scn, &params).map_err(|e| e.to_string())?;
        if !rep.converged {
            return Err("solve did not converge".into());
        }
        Ok(u)
    };
    match (solve(lo), solve(hi)) {
        (Ok(u1), Ok(u2)) => {
            let worst = u1
                .as_slice()
                .iter()
                .zip(u2.as_slice().iter())
                .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
            check_le(name, worst, 10.0 * options.tol, "max(u1 - u2) for ordered sources f1 <= f2")
        }
        (Err(e), _) | (_, Err(e)) => failed(name, 10.0 * options.tol, e),
    }
}

fn comparison_limit_check(options: &OracleOptions) -> OracleCheck {
    let name = "comparison-limit";
    let (lo, hi) = comparison_sources();
    let params = IterParams { tol: options.tol, ..IterParams::default() };
    let solve = |src: SourceSpec| -> Result<Vec<f64>, String> {
        let functional =
            FunctionalSpec::new(OperatorKind::SecondYY, 1.0, src).map_err(|e| e.to_string())?;
        let scn = LimitScenario::new(build_limit_G(&functional, &cos_bump_profile()), 31)
            .map_err(|e| e.to_string())?;
        let (w, rep) = solve_limit(&scn, &params).map_err(|e| e.to_string())?;
        if !rep.converged {
            return Err("solve did not converge".into());
        }
        Ok(w)
    };
    match (solve(lo), solve(hi)) {
        (Ok(w1), Ok(w2)) => {
            let worst = w1
                .iter()
                .zip(w2.iter())
                .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
            check_le(name, worst, 10.0 * options.tol, "max(w1 - w2) for ordered sources f1 <= f2")
        }
        (Err(e), _) | (_, Err(e)) => failed(name, 10.0 * options.tol, e),
    }
}
