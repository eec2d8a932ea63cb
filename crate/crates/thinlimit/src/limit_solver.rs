//! Solver for the dimension-reduced problem G(w″, w′, w, x) = 0 on [a, b]
//! with zero Neumann endpoint conditions.
//!
//! The drift g′w′/g entering through the reduced functional is O(1) in the
//! limit problem (unlike its O(ε) counterpart in the thin problem), so the
//! gradient entering the drift is upwinded: the sign of the local drift
//! coefficient ∂G/∂p selects a one-sided difference, with the sign of d
//! itself resolved by a two-pass evaluation (central probe, then one-sided
//! re-evaluation). Extremal kinds weight the drift by λ or Λ depending on
//! the sign of d, which the probe determines first.

use crate::geometry::{profile_eval, DomainSpec};
use crate::grids::GridError;
use crate::operators::{LimitFunctionalSpec, OperatorKind};
use crate::relax::{accelerate, IterParams, SolveError};
use crate::thin_solver::SolveReport;

/// A fully specified limit problem: reduced functional plus resolution.
#[derive(Debug, Clone)]
pub struct LimitScenario {
    domain: DomainSpec,
    limit_g: LimitFunctionalSpec,
    nx: usize,
}

impl LimitScenario {
    /// Validates nx ≥ 3; the domain is the profile's.
    pub fn new(limit_g: LimitFunctionalSpec, nx: usize) -> Result<Self, GridError> {
        if nx < 3 {
            return Err(GridError::BadResolution { nx, ns: 3 });
        }
        Ok(Self { domain: limit_g.profile().domain(), limit_g, nx })
    }

    /// The base interval.
    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    /// The reduced functional.
    pub fn limit_g(&self) -> &LimitFunctionalSpec {
        &self.limit_g
    }

    /// Node count.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Grid spacing.
    pub fn hx(&self) -> f64 {
        self.domain.length() / (self.nx - 1) as f64
    }

    /// x-coordinate of node i.
    pub fn x(&self, i: usize) -> f64 {
        self.domain.a() + i as f64 * self.hx()
    }

    /// Default iteration knobs, scaled by the limit data size sup|f(·,0)|.
    pub fn default_params(&self) -> IterParams {
        let f = self.limit_g.functional();
        let c0 = f.source().sup_abs_at_zero(self.limit_g.profile());
        IterParams {
            tau: 0.9,
            tol: 1e-9 * (c0 / f.alpha()).max(1.0),
            max_iters: 2_000_000,
        }
    }
}

/// Per-node drift data shared by the residual sweep and the solver.
struct LimitAssembly {
    nx: usize,
    hx: f64,
    x: Vec<f64>,
    /// g′(x_i)/g(x_i).
    ratio: Vec<f64>,
    op: OperatorKind,
    limit_g: LimitFunctionalSpec,
    diag: Vec<f64>,
}

impl LimitAssembly {
    fn new(scn: &LimitScenario) -> Self {
        let nx = scn.nx;
        let hx = scn.hx();
        let functional = scn.limit_g.functional();
        let alpha = functional.alpha();
        let lambda_eff = functional.op().lambda_eff();
        let mut x = Vec::with_capacity(nx);
        let mut ratio = Vec::with_capacity(nx);
        for i in 0..nx {
            let xi = scn.x(i);
            let (g, gp, _) = profile_eval(scn.limit_g.profile(), xi).expect("grid node in domain");
            x.push(xi);
            ratio.push(gp / g);
        }
        let mut diag = vec![alpha + 2.0 * lambda_eff / (hx * hx); nx];
        diag[0] = 3.0 / (2.0 * hx);
        diag[nx - 1] = 3.0 / (2.0 * hx);
        LimitAssembly { nx, hx, x, ratio, op: *functional.op(), limit_g: scn.limit_g, diag }
    }

    /// The drift coefficient ∂G/∂p for the branch decision, given the probed
    /// sign of d.
    fn drift_coefficient(&self, i: usize, d_probe: f64) -> f64 {
        let r = self.ratio[i];
        match &self.op {
            OperatorKind::Laplacian | OperatorKind::SecondYY => -r,
            OperatorKind::SecondXX => 0.0,
            OperatorKind::PucciPlus(e) => {
                if d_probe >= 0.0 {
                    -e.big_lambda() * r
                } else {
                    -e.lambda() * r
                }
            }
            OperatorKind::PucciMinus(e) => {
                if d_probe >= 0.0 {
                    -e.lambda() * r
                } else {
                    -e.big_lambda() * r
                }
            }
        }
    }

    fn residual_into(&self, w: &[f64], out: &mut [f64]) {
        let nx = self.nx;
        let hx = self.hx;
        let two_hx = 2.0 * hx;
        out[0] = (3.0 * w[0] - 4.0 * w[1] + w[2]) / two_hx;
        out[nx - 1] = (3.0 * w[nx - 1] - 4.0 * w[nx - 2] + w[nx - 3]) / two_hx;
        for i in 1..nx - 1 {
            let q = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (hx * hx);
            let p_central = (w[i + 1] - w[i - 1]) / two_hx;
            let d_probe = self.ratio[i] * p_central;
            // Two-pass upwinding: ties on the probe take the backward
            // branch (the drift is zero there either way).
            let p = if d_probe == 0.0 {
                (w[i] - w[i - 1]) / hx
            } else if self.drift_coefficient(i, d_probe) < 0.0 {
                (w[i + 1] - w[i]) / hx
            } else {
                (w[i] - w[i - 1]) / hx
            };
            out[i] = self
                .limit_g
                .eval_g(q, p, w[i], self.x[i])
                .expect("grid node in domain");
        }
    }
}

/// Assembles the discrete residual of the limit problem for the iterate w.
pub fn residual_limit(scn: &LimitScenario, w: &[f64]) -> Vec<f64> {
    assert_eq!(w.len(), scn.nx, "iterate length does not match the scenario");
    let asm = LimitAssembly::new(scn);
    let mut out = vec![0.0; scn.nx];
    asm.residual_into(w, &mut out);
    out
}

/// Solves the limit problem from the zero iterate by the damped, diagonally
/// preconditioned, Anderson-accelerated residual iteration.
pub fn solve_limit(
    scn: &LimitScenario,
    params: &IterParams,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let asm = LimitAssembly::new(scn);
    let n = scn.nx;
    let outcome = accelerate(
        n,
        params,
        |w, r| asm.residual_into(w, r),
        |_w, r, f| {
            for i in 0..n {
                f[i] = -params.tau * r[i] / asm.diag[i];
            }
        },
    )?;
    let sup_norm = outcome.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let report = SolveReport {
        iterations: outcome.iterations,
        residual_inf: outcome.residual_inf,
        sup_norm,
        converged: outcome.converged,
    };
    Ok((outcome.u, report))
}
