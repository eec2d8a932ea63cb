//! The shared iteration core: a damped, preconditioned residual map
//! accelerated by windowed Anderson extrapolation.
//!
//! Both solvers iterate u ← u + f(u), where f is a problem-specific
//! contraction-like correction (typically −τ·D⁻¹·R(u) for a diagonal or
//! line-implicit preconditioner D). Anderson extrapolation keeps the last
//! `AA_WINDOW` update/correction differences and replaces the plain step by
//! the least-squares combination that minimizes the predicted next
//! correction. The small normal system is solved through an eigenvalue
//! decomposition of the Gram matrix with a relative spectral cutoff, which
//! keeps the extrapolation stable when the window becomes nearly linearly
//! dependent — exactly the regime reached on degenerate problems.

use thiserror::Error;

/// Anderson window length (number of stored difference pairs).
pub(crate) const AA_WINDOW: usize = 10;

/// Relative eigenvalue cutoff for the Gram least-squares solve.
pub(crate) const AA_CUTOFF: f64 = 1e-14;

/// Knobs of the accelerated residual iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterParams {
    /// Damping factor of the base map, in (0, 1].
    pub tau: f64,
    /// Convergence target for the sup-norm of the residual.
    pub tol: f64,
    /// Update budget.
    pub max_iters: u64,
}

impl Default for IterParams {
    fn default() -> Self {
        Self { tau: 0.9, tol: 1e-9, max_iters: 2_000_000 }
    }
}

impl IterParams {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) || !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolveError::BadParams {
                reason: format!("need tau in (0,1] and tol > 0, got tau = {}, tol = {}", self.tau, self.tol),
            });
        }
        if self.max_iters == 0 {
            return Err(SolveError::BadParams { reason: "max_iters must be at least 1".into() });
        }
        Ok(())
    }
}

/// Iteration failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("iterate became non-finite at iteration {iteration}")]
    NonFinite { iteration: u64 },
    #[error("invalid iteration parameters: {reason}")]
    BadParams { reason: String },
}

/// Outcome of a run: final iterate plus convergence bookkeeping.
#[derive(Debug, Clone)]
pub(crate) struct IterOutcome {
    pub u: Vec<f64>,
    pub iterations: u64,
    pub residual_inf: f64,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    // f64::max would silently drop NaN entries; propagate them instead so
    // the non-finite guard in the driver can fire.
    let mut m = 0.0f64;
    for &x in v {
        if x.is_nan() {
            return f64::NAN;
        }
        m = m.max(x.abs());
    }
    m
}

/// Jacobi eigendecomposition of a symmetric m×m matrix stored row-major in
/// `a` (destroyed). On return `a`'s diagonal holds the eigenvalues and `q`
/// holds the eigenvectors as columns (q[i*m + p] = component i of vector p).
fn sym_eigh(a: &mut [f64], q: &mut [f64], m: usize) {
    debug_assert_eq!(a.len(), m * m);
    debug_assert_eq!(q.len(), m * m);
    for i in 0..m {
        for p in 0..m {
            q[i * m + p] = if i == p { 1.0 } else { 0.0 };
        }
    }
    if m < 2 {
        return;
    }
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..m {
            for r in p + 1..m {
                off += a[p * m + r] * a[p * m + r];
            }
        }
        let diag_scale: f64 = (0..m).map(|i| a[i * m + i] * a[i * m + i]).sum();
        if off <= f64::EPSILON * f64::EPSILON * (diag_scale + f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..m - 1 {
            for r in p + 1..m {
                let apr = a[p * m + r];
                if apr == 0.0 {
                    continue;
                }
                let app = a[p * m + p];
                let arr = a[r * m + r];
                if apr.abs() <= f64::EPSILON * 1e-2 * (app.abs() + arr.abs()) {
                    a[p * m + r] = 0.0;
                    a[r * m + p] = 0.0;
                    continue;
                }
                let theta = (arr - app) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[p * m + p] = app - t * apr;
                a[r * m + r] = arr + t * apr;
                a[p * m + r] = 0.0;
                a[r * m + p] = 0.0;
                for i in 0..m {
                    if i != p && i != r {
                        let aip = a[i * m + p];
                        let air = a[i * m + r];
                        a[i * m + p] = c * aip - s * air;
                        a[i * m + r] = s * aip + c * air;
                        a[p * m + i] = a[i * m + p];
                        a[r * m + i] = a[i * m + r];
                    }
                }
                for i in 0..m {
                    let qip = q[i * m + p];
                    let qir = q[i * m + r];
                    q[i * m + p] = c * qip - s * qir;
                    q[i * m + r] = s * qip + c * qir;
                }
            }
        }
    }
}

/// Sliding window of difference vectors with an incrementally maintained
/// Gram matrix of the correction differences.
struct Window {
    m: usize,
    n: usize,
    du: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    /// Gram matrix dfᵢ·dfⱼ for the current window, row-major m×m (top-left
    /// len×len block is live).
    gram: Vec<f64>,
    len: usize,
}

impl Window {
    fn new(m: usize, n: usize) -> Self {
        Self { m, n, du: Vec::new(), df: Vec::new(), gram: vec![0.0; m * m], len: 0 }
    }

    /// Pushes the newest pair (du, df), evicting the oldest when full, and
    /// refreshes the Gram matrix with one new row/column of dot products.
    fn push(&mut self, du: Vec<f64>, df: Vec<f64>) {
        debug_assert_eq!(du.len(), self.n);
        debug_assert_eq!(df.len(), self.n);
        let m = self.m;
        if self.len == m {
            self.du.remove(0);
            self.df.remove(0);
            // Shift the Gram block up-left by one.
            for i in 0..m - 1 {
                for j in 0..m - 1 {
                    self.gram[i * m + j] = self.gram[(i + 1) * m + (j + 1)];
                }
            }
            self.len -= 1;
        }
        self.du.push(du);
        self.df.push(df);
        self.len += 1;
        let k = self.len - 1;
        let newest = &self.df[k];
        for i in 0..self.len {
            let dot: f64 = self.df[i].iter().zip(newest.iter()).map(|(a, b)| a * b).sum();
            self.gram[i * m + k] = dot;
            self.gram[k * m + i] = dot;
        }
    }

    /// Solves min_γ ‖f − dF·γ‖₂ through the Gram eigendecomposition with the
    /// relative cutoff, then applies u ← u + f − dU·γ − dF·γ.
    fn accelerate_step(&self, u: &mut [f64], f: &[f64], scratch: &mut EigScratch) {
        let m = self.len;
        let w = self.m;
        // Live Gram block.
        for i in 0..m {
            for j in 0..m {
                scratch.a[i * m + j] = self.gram[i * w + j];
            }
        }
        sym_eigh(&mut scratch.a[..m * m], &mut scratch.q[..m * m], m);
        let mut lam_max = 0.0f64;
        for i in 0..m {
            lam_max = lam_max.max(scratch.a[i * m + i]);
        }
        // rhs_i = dfᵢ·f
        for i in 0..m {
            scratch.rhs[i] = self.df[i].iter().zip(f.iter()).map(|(a, b)| a * b).sum();
        }
        // b = Qᵀ rhs, filtered by the spectral cutoff; γ = Q (b/λ).
        for p in 0..m {
            let lam = scratch.a[p * m + p];
            scratch.b[p] = if lam > AA_CUTOFF * lam_max {
                let mut dot = 0.0;
                for i in 0..m {
                    dot += scratch.q[i * m + p] * scratch.rhs[i];
                }
                dot / lam
            } else {
                0.0
            };
        }
        for i in 0..m {
            let mut g = 0.0;
            for p in 0..m {
                g += scratch.q[i * m + p] * scratch.b[p];
            }
            scratch.gamma[i] = g;
        }
        for (idx, ui) in u.iter_mut().enumerate() {
            let mut corr = f[idx];
            for i in 0..m {
                corr -= scratch.gamma[i] * (self.du[i][idx] + self.df[i][idx]);
            }
            *ui += corr;
        }
    }
}

struct EigScratch {
    a: Vec<f64>,
    q: Vec<f64>,
    rhs: Vec<f64>,
    b: Vec<f64>,
    gamma: Vec<f64>,
}

impl EigScratch {
    fn new(m: usize) -> Self {
        Self {
            a: vec![0.0; m * m],
            q: vec![0.0; m * m],
            rhs: vec![0.0; m],
            b: vec![0.0; m],
            gamma: vec![0.0; m],
        }
    }
}

/// Runs the accelerated iteration from the zero vector.
///
/// `residual` writes R(u) into its output slice; `base_step` writes the base
/// correction f(u, R(u)) (already damped and preconditioned). Convergence is
/// declared when ‖R(u)‖_∞ ≤ params.tol before the update budget is spent.
pub(crate) fn accelerate(
    n: usize,
    params: &IterParams,
    mut residual: impl FnMut(&[f64], &mut [f64]),
    mut base_step: impl FnMut(&[f64], &[f64], &mut [f64]),
) -> Result<IterOutcome, SolveError> {
    params.validate()?;
    let mut u = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut window = Window::new(AA_WINDOW, n);
    let mut scratch = EigScratch::new(AA_WINDOW);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations: u64 = 0;
    loop {
        residual(&u, &mut r);
        let rinf = inf_norm(&r);
        if !rinf.is_finite() {
            return Err(SolveError::NonFinite { iteration: iterations });
        }
        if rinf <= params.tol {
            log::debug!("converged after {iterations} updates, residual {rinf:.3e}");
            return Ok(IterOutcome { u, iterations, residual_inf: rinf, converged: true });
        }
        if iterations >= params.max_iters {
            log::debug!("budget of {iterations} updates exhausted, residual {rinf:.3e}");
            return Ok(IterOutcome { u, iterations, residual_inf: rinf, converged: false });
        }
        if iterations % 100_000 == 0 && iterations > 0 {
            log::debug!("update {iterations}: residual {rinf:.3e}");
        }
        base_step(&u, &r, &mut f);
        if let Some((pu, pf)) = prev.take() {
            let mut du = pu;
            let mut df = pf;
            for i in 0..n {
                du[i] = u[i] - du[i];
                df[i] = f[i] - df[i];
            }
            window.push(du, df);
        }
        prev = Some((u.clone(), f.clone()));
        if window.len == 0 {
            for i in 0..n {
                u[i] += f[i];
            }
        } else {
            window.accelerate_step(&mut u, &f, &mut scratch);
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn eigh_diagonal_matrix() {
        let m = 3;
        let mut a = vec![3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        let mut q = vec![0.0; 9];
        sym_eigh(&mut a, &mut q, m);
        let mut eigs: Vec<f64> = (0..m).map(|i| a[i * m + i]).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(eigs, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigh_two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let mut a = vec![2.0, 1.0, 1.0, 2.0];
        let mut q = vec![0.0; 4];
        sym_eigh(&mut a, &mut q, 2);
        let mut eigs = vec![a[0], a[3]];
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_close(eigs[0], 1.0, 1e-14, "small eigenvalue");
        assert_close(eigs[1], 3.0, 1e-14, "large eigenvalue");
    }

    #[test]
    fn eigh_second_difference_matrix() {
        // Tridiagonal (-1, 2, -1) of size 3: eigenvalues 2 − √2, 2, 2 + √2.
        let mut a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let mut q = vec![0.0; 9];
        sym_eigh(&mut a, &mut q, 3);
        let mut eigs: Vec<f64> = (0..3).map(|i| a[i * 3 + i]).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let s = 2.0f64.sqrt();
        assert_close(eigs[0], 2.0 - s, 1e-13, "lambda 1");
        assert_close(eigs[1], 2.0, 1e-13, "lambda 2");
        assert_close(eigs[2], 2.0 + s, 1e-13, "lambda 3");
    }

    #[test]
    fn eigh_reconstructs_random_symmetric_matrices() {
        // A·qᵢ = λᵢ·qᵢ and QᵀQ = I, on pseudo-random symmetric matrices.
        let mut state = 0x853c49e6748fea9bu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for m in [2usize, 5, 8, 10] {
            let mut orig = vec![0.0; m * m];
            for i in 0..m {
                for j in i..m {
                    let v = next();
                    orig[i * m + j] = v;
                    orig[j * m + i] = v;
                }
            }
            let mut a = orig.clone();
            let mut q = vec![0.0; m * m];
            sym_eigh(&mut a, &mut q, m);
            let scale: f64 = orig.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
            for p in 0..m {
                let lam = a[p * m + p];
                for i in 0..m {
                    let mut av = 0.0;
                    for j in 0..m {
                        av += orig[i * m + j] * q[j * m + p];
                    }
                    assert_close(av, lam * q[i * m + p], 1e-12 * (1.0 + scale) * m as f64, "A q = lam q");
                }
            }
            for p in 0..m {
                for r in 0..m {
                    let mut dot = 0.0;
                    for i in 0..m {
                        dot += q[i * m + p] * q[i * m + r];
                    }
                    let want = if p == r { 1.0 } else { 0.0 };
                    assert_close(dot, want, 1e-13 * m as f64, "orthonormality");
                }
            }
        }
    }

    /// 1D Poisson-like SPD system used as a linear smoke test.
    fn poisson_mats(n: usize) -> (Vec<f64>, Vec<f64>) {
        // A = tridiag(-1, 2.05, -1) (strictly diagonally dominant), b = 1.
        let diag = vec![2.05; n];
        let b = vec![1.0; n];
        (diag, b)
    }

    fn poisson_residual(u: &[f64], r: &mut [f64], diag: &[f64], b: &[f64]) {
        let n = u.len();
        for i in 0..n {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            r[i] = diag[i] * u[i] - left - right - b[i];
        }
    }

    /// Direct Thomas solve, the independent reference route.
    fn thomas(diag: &[f64], b: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = -1.0 / diag[0];
        d[0] = b[0] / diag[0];
        for i in 1..n {
            let m = diag[i] + c[i - 1];
            c[i] = -1.0 / m;
            d[i] = (b[i] + d[i - 1]) / m;
        }
        let mut u = vec![0.0; n];
        u[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = d[i] - c[i] * u[i + 1];
        }
        u
    }

    #[test]
    fn accelerate_solves_a_linear_system_to_the_direct_answer() {
        let n = 200;
        let (diag, b) = poisson_mats(n);
        let params = IterParams { tau: 0.9, tol: 1e-11, max_iters: 100_000 };
        let out = accelerate(
            n,
            &params,
            |u, r| poisson_residual(u, r, &diag, &b),
            |_u, r, f| {
                for i in 0..n {
                    f[i] = -params.tau * r[i] / diag[i];
                }
            },
        )
        .unwrap();
        assert!(out.converged, "did not converge: {out:?}");
        assert!(out.residual_inf <= 1e-11);
        let direct = thomas(&diag, &b);
        let err = out
            .u
            .iter()
            .zip(direct.iter())
            .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        assert!(err <= 1e-8, "solution differs from direct solve by {err}");
    }

    #[test]
    fn acceleration_beats_the_plain_damped_map() {
        let n = 200;
        let (diag, b) = poisson_mats(n);
        let tau = 0.9;
        let tol = 1e-9;

        // Plain damped Jacobi for reference.
        let mut u = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut plain_iters = 0u64;
        loop {
            poisson_residual(&u, &mut r, &diag, &b);
            if inf_norm(&r) <= tol || plain_iters > 400_000 {
                break;
            }
            for i in 0..n {
                u[i] -= tau * r[i] / diag[i];
            }
            plain_iters += 1;
        }

        let params = IterParams { tau, tol, max_iters: 400_000 };
        let out = accelerate(
            n,
            &params,
            |u, r| poisson_residual(u, r, &diag, &b),
            |_u, r, f| {
                for i in 0..n {
                    f[i] = -tau * r[i] / diag[i];
                }
            },
        )
        .unwrap();
        assert!(out.converged);
        assert!(
            out.iterations * 4 < plain_iters,
            "acceleration gained too little: {} vs plain {}",
            out.iterations,
            plain_iters
        );
    }

    #[test]
    fn accelerate_handles_a_nonlinear_fixed_point() {
        // R(u)_i = u_i − cos(u_i + x_i); solution is the per-component root.
        let n = 50;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let params = IterParams { tau: 0.5, tol: 1e-12, max_iters: 10_000 };
        let out = accelerate(
            n,
            &params,
            |u, r| {
                for i in 0..n {
                    r[i] = u[i] - (u[i] + xs[i]).cos();
                }
            },
            |_u, r, f| {
                for i in 0..n {
                    f[i] = -params.tau * r[i];
                }
            },
        )
        .unwrap();
        assert!(out.converged);
        for i in 0..n {
            let root = out.u[i];
            assert_close(root, (root + xs[i]).cos(), 1e-11, "fixed-point equation");
        }
    }

    #[test]
    fn budget_exhaustion_reports_not_converged() {
        let n = 10;
        let (diag, b) = poisson_mats(n);
        let params = IterParams { tau: 0.9, tol: 1e-12, max_iters: 3 };
        let out = accelerate(
            n,
            &params,
            |u, r| poisson_residual(u, r, &diag, &b),
            |_u, r, f| {
                for i in 0..n {
                    f[i] = -0.9 * r[i] / diag[i];
                }
            },
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert!(out.residual_inf > 1e-12);
    }

    #[test]
    fn non_finite_iterates_are_reported() {
        let n = 4;
        let err = accelerate(
            n,
            &IterParams { tau: 0.9, tol: 1e-12, max_iters: 100 },
            |u, r| {
                for i in 0..n {
                    r[i] = (u[i] + 1.0) * 2.0; // residual doubles forever
                }
            },
            |_u, r, f| {
                for i in 0..n {
                    f[i] = r[i] * 1e154; // blows up to infinity quickly
                }
            },
        )
        .unwrap_err();
        assert!(matches!(err, SolveError::NonFinite { .. }));
    }

    #[test]
    fn bad_params_are_rejected() {
        let fail = |params: IterParams| {
            accelerate(3, &params, |_, r| r.fill(1.0), |_, _, f| f.fill(0.0)).unwrap_err()
        };
        assert!(matches!(
            fail(IterParams { tau: 0.0, tol: 1e-9, max_iters: 10 }),
            SolveError::BadParams { .. }
        ));
        assert!(matches!(
            fail(IterParams { tau: 0.9, tol: 0.0, max_iters: 10 }),
            SolveError::BadParams { .. }
        ));
        assert!(matches!(
            fail(IterParams { tau: 0.9, tol: 1e-9, max_iters: 0 }),
            SolveError::BadParams { .. }
        ));
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let n = 120;
        let (diag, b) = poisson_mats(n);
        let params = IterParams { tau: 0.9, tol: 1e-10, max_iters: 100_000 };
        let run = || {
            accelerate(
                n,
                &params,
                |u, r| poisson_residual(u, r, &diag, &b),
                |_u, r, f| {
                    for i in 0..n {
                        f[i] = -0.9 * r[i] / diag[i];
                    }
                },
            )
            .unwrap()
        };
        let a = run();
        let c = run();
        assert_eq!(a.iterations, c.iterations);
        assert_eq!(a.u, c.u);
        assert_eq!(a.residual_inf.to_bits(), c.residual_inf.to_bits());
    }
}
