//! Minimal tour: one thin solve, the matching 1D limit, and an ε-sweep.

use thinlimit::{
    build_limit_G, run_sweep, solve_limit, solve_thin, DomainSpec, FunctionalSpec,
    LimitScenario, OperatorKind, ProfileKind, ProfileSpec, SourceComponent, SourceSpec,
    SweepTemplate, ThinDomainSpec, ThinScenario,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Geometry: g(x) = 2 + 0.5·cos(π(x − a)/(b − a)) on (0, 1).
    let domain = DomainSpec::new(0.0, 1.0)?;
    let profile = ProfileSpec::new(domain, ProfileKind::CosBump { c0: 2.0, c1: 0.5, k: 1.0 })?;

    // Equation: −Δu + u = cos(πx) + y.
    let source = SourceSpec {
        f0: SourceComponent::Cosine { amp: 1.0, freq: std::f64::consts::PI, phase: 0.0 },
        f1: SourceComponent::Constant(1.0),
    };
    let functional = FunctionalSpec::new(OperatorKind::Laplacian, 1.0, source)?;

    // One thin solve at ε = 0.1.
    let thin = ThinDomainSpec::new(profile, 0.1)?;
    let scenario = ThinScenario::with_default_grid(thin, functional, 81)?;
    let (u, report) = solve_thin(&scenario, &scenario.default_params())?;
    println!("thin solve: {} updates, sup |u| = {:.6}", report.iterations, report.sup_norm);
    println!("u at the midpoint column base: {:.6}", u.at(40, 0));

    // The 1D limit of the same data.
    let limit = LimitScenario::new(build_limit_G(&functional, &profile), 81)?;
    let (w, _) = solve_limit(&limit, &limit.default_params())?;
    println!("w at the midpoint: {:.6}", w[40]);

    // A sweep measuring sup |u_ε − w| for ε ∈ {0.4, 0.2, 0.1, 0.05}.
    let template = SweepTemplate::new(profile, functional);
    let sweep = run_sweep(&template, &[0.4, 0.2, 0.1, 0.05], 81, 4)?;
    for rec in sweep.records() {
        println!("eps = {:.2}: sup gap = {:.3e}", rec.epsilon, rec.sup_error);
    }
    Ok(())
}
