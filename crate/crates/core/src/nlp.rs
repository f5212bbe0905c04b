//! Local solver for `maximize f(x) subject to g_k(x) >= 0`.
//!
//! Augmented Lagrangian (Powell–Hestenes–Rockafellar form for inequalities)
//! around a BFGS inner minimization with Armijo backtracking and a capped step.
//! Variables are rescaled by per-variable hints, the objective by its initial
//! gradient magnitude. First-order optimality is certified with a
//! nonnegative least-squares multiplier fit on the active set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A smooth objective with inequality constraints, feasible iff every `g_k >= 0`.
pub trait NlpProblem {
    fn dimension(&self) -> usize;
    fn constraint_count(&self) -> usize;
    fn objective(&self, x: &[f64]) -> f64;
    fn constraints(&self, x: &[f64], out: &mut [f64]);

    /// Central-difference gradient unless overridden.
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        fd_gradient_into(|z| self.objective(z), x, self.fd_step(), grad);
    }

    /// Constraint Jacobian, rows = constraints. Central differences unless overridden.
    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        let (n, m) = (self.dimension(), self.constraint_count());
        let h = self.fd_step();
        let mut z = x.to_vec();
        let mut gp = vec![0.0; m];
        let mut gm = vec![0.0; m];
        for i in 0..n {
            z[i] = x[i] + h;
            self.constraints(&z, &mut gp);
            z[i] = x[i] - h;
            self.constraints(&z, &mut gm);
            z[i] = x[i];
            for k in 0..m {
                jac[(k, i)] = (gp[k] - gm[k]) / (2.0 * h);
            }
        }
    }

    fn fd_step(&self) -> f64 {
        1e-6
    }

    /// Typical magnitude of variable `i`; the solver works in `x_i / scale`.
    fn variable_scale(&self, _i: usize) -> f64 {
        1.0
    }
}

/// Central differences `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    fd_gradient_into(f, x, h, &mut g);
    g
}

fn fd_gradient_into(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64, grad: &mut [f64]) {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut z = x.to_vec();
    for i in 0..x.len() {
        z[i] = x[i] + h;
        let fp = f(&z);
        z[i] = x[i] - h;
        let fm = f(&z);
        z[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Coarse,
    /// Tolerances divided by 10 and multipliers warm-started at `x0`.
    Polish,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub kkt_tol: f64,
    /// Outer (multiplier update) iterations.
    pub max_iter: usize,
    /// Quasi-Newton iterations per outer iteration.
    pub max_inner: usize,
    /// Step cap in scaled variables (infinity norm).
    pub max_step: f64,
    pub mode: SolveMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions::coarse()
    }
}

impl SolverOptions {
    pub fn coarse() -> Self {
        SolverOptions {
            feas_tol: 1e-6,
            kkt_tol: 1e-3,
            max_iter: 40,
            max_inner: 400,
            max_step: 0.5,
            mode: SolveMode::Coarse,
        }
    }

    pub fn polish() -> Self {
        SolverOptions {
            mode: SolveMode::Polish,
            ..SolverOptions::coarse()
        }
    }

    /// Tolerances actually enforced.
    pub fn effective_tolerances(&self) -> (f64, f64) {
        match self.mode {
            SolveMode::Coarse => (self.feas_tol, self.kkt_tol),
            SolveMode::Polish => (self.feas_tol / 10.0, self.kkt_tol / 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
    NumericalFailure,
    /// No point within the feasibility tolerance was found.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NlpResult {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl NlpResult {
    pub fn is_feasible(&self, feas_tol: f64) -> bool {
        self.max_violation <= feas_tol
    }
}

fn max_violation(g: &[f64]) -> f64 {
    g.iter().fold(0.0f64, |v, &gk| v.max(-gk))
}

/// Lawson–Hanson nonnegative least squares: `argmin ‖A λ − b‖, λ >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let scale = a.amax().max(1e-300) * b.amax().max(1e-300);
    let tol = 1e-13 * scale * (a.nrows().max(n) as f64);
    let mut passive = vec![false; n];
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select_columns(&idx);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut z = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            z[j] = sol[k];
        }
        z
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let Some(j) = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&p, &q| w[p].total_cmp(&w[q]))
        else {
            break;
        };
        passive[j] = true;
        for _ in 0..3 * n + 10 {
            let z = solve_passive(&passive);
            if (0..n).all(|k| !passive[k] || z[k] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for k in 0..n {
                if passive[k] && z[k] <= 0.0 {
                    alpha = alpha.min(x[k] / (x[k] - z[k]));
                }
            }
            x += (z - &x) * alpha;
            for k in 0..n {
                if passive[k] && x[k] <= 1e-15 * scale {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Stationarity residual with NNLS multipliers on the active set
/// (`g_k <= 10·feas_tol`), plus the multipliers (zero for inactive constraints).
fn kkt_with_multipliers<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    g: &[f64],
    feas_tol: f64,
) -> (f64, Vec<f64>) {
    let n = problem.dimension();
    let m = problem.constraint_count();
    let mut grad = vec![0.0; n];
    problem.gradient(x, &mut grad);
    let grad = DVector::from_vec(grad);
    let active: Vec<usize> = (0..m).filter(|&k| g[k] <= 10.0 * feas_tol).collect();
    let mut lambda = vec![0.0; m];
    let gnorm = grad.norm();
    if active.is_empty() {
        return (gnorm / gnorm.max(1.0), lambda);
    }
    let mut jac = DMatrix::zeros(m, n);
    problem.jacobian(x, &mut jac);
    let a = jac.select_rows(&active).transpose();
    let b = -&grad;
    let l = nnls(&a, &b);
    let r = (&a * &l - &b).norm();
    for (i, &k) in active.iter().enumerate() {
        lambda[k] = l[i];
    }
    (r / gnorm.max(1.0), lambda)
}

/// First-order optimality residual `min_{λ>=0} ‖∇f + Σ λ_k ∇g_k‖ / max(1, ‖∇f‖)`
/// over constraints with `g_k <= 10·feas_tol`.
pub fn kkt_residual<P: NlpProblem + ?Sized>(problem: &P, x: &[f64], feas_tol: f64) -> Result<f64> {
    let mut g = vec![0.0; problem.constraint_count()];
    problem.constraints(x, &mut g);
    let v = max_violation(&g);
    if v > feas_tol {
        return Err(Error::invalid(format!(
            "KKT residual requested at an infeasible point (violation {v:.3e})"
        )));
    }
    Ok(kkt_with_multipliers(problem, x, &g, feas_tol).0)
}

/// Scaled view of the problem as seen by the inner loop.
struct Scaled<'a, P: ?Sized> {
    p: &'a P,
    s: Vec<f64>,
    fs: f64,
    n: usize,
    m: usize,
}

impl<P: NlpProblem + ?Sized> Scaled<'_, P> {
    fn unscale(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.s).map(|(a, b)| a * b).collect()
    }

    /// Augmented Lagrangian value and gradient in scaled variables.
    fn merit(&self, u: &[f64], lambda: &[f64], mu: f64, grad: Option<&mut [f64]>) -> f64 {
        let x = self.unscale(u);
        let f = self.p.objective(&x);
        let mut g = vec![0.0; self.m];
        self.p.constraints(&x, &mut g);
        let mut phi = -f / self.fs;
        let mut force = vec![0.0; self.m];
        for k in 0..self.m {
            let t = (lambda[k] - mu * g[k]).max(0.0);
            phi += (t * t - lambda[k] * lambda[k]) / (2.0 * mu);
            force[k] = t;
        }
        if let Some(out) = grad {
            let mut gf = vec![0.0; self.n];
            self.p.gradient(&x, &mut gf);
            for i in 0..self.n {
                out[i] = -gf[i] / self.fs;
            }
            if force.iter().any(|&t| t > 0.0) {
                let mut jac = DMatrix::zeros(self.m, self.n);
                self.p.jacobian(&x, &mut jac);
                for k in 0..self.m {
                    if force[k] > 0.0 {
                        for i in 0..self.n {
                            out[i] -= force[k] * jac[(k, i)];
                        }
                    }
                }
            }
            for i in 0..self.n {
                out[i] *= self.s[i];
            }
        }
        phi
    }
}

/// BFGS on a smooth function; returns the iterations used and whether a non-finite value was met.
fn bfgs(
    func: &mut dyn FnMut(&[f64], Option<&mut [f64]>) -> f64,
    u: &mut [f64],
    tol: f64,
    max_iter: usize,
    max_step: f64,
) -> (usize, bool) {
    let n = u.len();
    let mut grad = vec![0.0; n];
    let mut phi = func(u, Some(&mut grad));
    if !phi.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return (0, true);
    }
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut new_grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    for it in 0..max_iter {
        if grad.iter().fold(0.0f64, |a, g| a.max(g.abs())) <= tol {
            return (it, false);
        }
        let gv = DVector::from_column_slice(&grad);
        let mut p = -(&h * &gv);
        let mut slope = p.dot(&gv);
        if slope >= 0.0 || !slope.is_finite() {
            h.fill_with_identity();
            fresh = true;
            p = -gv.clone();
            slope = p.dot(&gv);
        }
        let pmax = p.amax();
        if pmax > max_step {
            p *= max_step / pmax;
            slope = p.dot(&gv);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            for i in 0..n {
                trial[i] = u[i] + alpha * p[i];
            }
            let val = func(&trial, None);
            if val.is_finite() && val <= phi + 1e-4 * alpha * slope {
                accepted = Some(val);
                break;
            }
            alpha *= 0.5;
        }
        let Some(_) = accepted else {
            if fresh {
                return (it, false);
            }
            h.fill_with_identity();
            fresh = true;
            continue;
        };
        let new_phi = func(&trial, Some(&mut new_grad));
        if !new_phi.is_finite() || new_grad.iter().any(|g| !g.is_finite()) {
            return (it, true);
        }
        let s = &p * alpha;
        let y = DVector::from_column_slice(&new_grad) - &gv;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        let progress = (phi - new_phi).abs() <= 1e-16 * phi.abs().max(1.0) && s.amax() <= 1e-14;
        u.copy_from_slice(&trial);
        phi = new_phi;
        std::mem::swap(&mut grad, &mut new_grad);
        if progress {
            return (it + 1, false);
        }
    }
    (max_iter, false)
}

/// Moves `x` to satisfy every constraint with margin `delta` by repeated
/// minimum-norm linearized corrections of the violated set.
fn restore_feasibility<P: NlpProblem + ?Sized>(problem: &P, x: &mut [f64], delta: f64) {
    let (n, m) = (problem.dimension(), problem.constraint_count());
    let mut g = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, n);
    for _ in 0..30 {
        problem.constraints(x, &mut g);
        if max_violation(&g) == 0.0 {
            return;
        }
        let set: Vec<usize> = (0..m).filter(|&k| g[k] < delta).collect();
        problem.jacobian(x, &mut jac);
        let j = jac.select_rows(&set);
        let r = DVector::from_iterator(set.len(), set.iter().map(|&k| 2.0 * delta - g[k]));
        // SVD least squares gives the minimum-norm correction
        let Ok(d) = j.svd(true, true).solve(&r, 1e-12) else {
            return;
        };
        for i in 0..n {
            x[i] += d[i];
        }
    }
}

/// Moves a feasible `x` exactly onto the constraints that carry a positive
/// multiplier, keeping the move only if the objective rises and nothing
/// becomes violated beyond round-off. Returns the new objective on success.
fn snap_to_active<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &mut [f64],
    g: &mut [f64],
    f: f64,
    feas_tol: f64,
) -> Option<f64> {
    let (n, m) = (problem.dimension(), problem.constraint_count());
    let (_, lambda) = kkt_with_multipliers(problem, x, g, feas_tol);
    let set: Vec<usize> = (0..m).filter(|&k| lambda[k] > 0.0 && g[k] > 0.0).collect();
    if set.is_empty() {
        return None;
    }
    let mut y = x.to_vec();
    let mut gy = g.to_vec();
    let mut jac = DMatrix::zeros(m, n);
    for _ in 0..3 {
        problem.jacobian(&y, &mut jac);
        let j = jac.select_rows(&set);
        let r = DVector::from_iterator(set.len(), set.iter().map(|&k| -gy[k]));
        let d = j.svd(true, true).solve(&r, 1e-12).ok()?;
        for i in 0..n {
            y[i] += d[i];
        }
        problem.constraints(&y, &mut gy);
        if set.iter().all(|&k| gy[k].abs() <= 1e-12) {
            break;
        }
    }
    let fy = problem.objective(&y);
    if fy.is_finite() && fy > f && max_violation(&gy) <= 1e-3 * feas_tol {
        x.copy_from_slice(&y);
        g.copy_from_slice(&gy);
        Some(fy)
    } else {
        None
    }
}

/// Maximizes `problem` from `x0` without warm multipliers.
pub fn maximize<P: NlpProblem + ?Sized>(problem: &P, x0: &[f64], opts: &SolverOptions) -> NlpResult {
    maximize_warm(problem, x0, opts, None)
}

/// Maximizes with optional initial multiplier estimates (one per constraint).
///
/// In polish mode without explicit multipliers, estimates are taken from the
/// NNLS fit at `x0`.
pub fn maximize_warm<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    opts: &SolverOptions,
    multipliers: Option<&[f64]>,
) -> NlpResult {
    let (n, m) = (problem.dimension(), problem.constraint_count());
    assert_eq!(x0.len(), n, "start point has wrong dimension");
    let (feas_tol, kkt_tol) = opts.effective_tolerances();

    let mut g0 = vec![0.0; m];
    problem.constraints(x0, &mut g0);
    let f0 = problem.objective(x0);
    let mut grad0 = vec![0.0; n];
    problem.gradient(x0, &mut grad0);
    if !f0.is_finite() || g0.iter().chain(&grad0).any(|v| !v.is_finite()) {
        return NlpResult {
            x: x0.to_vec(),
            objective_value: f0,
            kkt_residual: f64::INFINITY,
            max_violation: max_violation(&g0),
            iterations: 0,
            status: SolveStatus::NumericalFailure,
        };
    }
    let viol0 = max_violation(&g0);
    let x0_feasible = viol0 <= feas_tol;

    let s: Vec<f64> = (0..n).map(|i| problem.variable_scale(i)).collect();
    let gu_inf = grad0.iter().zip(&s).fold(0.0f64, |a, (g, si)| a.max((g * si).abs()));
    let fs = gu_inf.max(1e-3 * f0.abs().max(1.0));
    let sc = Scaled { p: problem, s: s.clone(), fs, n, m };

    let mut lambda = vec![0.0; m];
    let mut mu = 10.0;
    match (multipliers, opts.mode) {
        (Some(l), _) => {
            assert_eq!(l.len(), m, "multiplier estimate has wrong length");
            lambda.iter_mut().zip(l).for_each(|(a, b)| *a = b.max(0.0) / fs);
            mu = 100.0;
        }
        (None, SolveMode::Polish) if viol0 <= 10.0 * opts.feas_tol => {
            let (_, l) = kkt_with_multipliers(problem, x0, &g0, opts.feas_tol);
            lambda.iter_mut().zip(l).for_each(|(a, b)| *a = b / fs);
            mu = 100.0;
        }
        _ => {}
    }

    let gnorm0 = grad0.iter().map(|g| g * g).sum::<f64>().sqrt();
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let omega_min = (0.1 * kkt_tol * smin * gnorm0.max(1.0) / (fs * (n as f64).sqrt())).max(1e-14);
    let mut omega = omega_min.max(1e-2);

    let mut u: Vec<f64> = x0.iter().zip(&s).map(|(x, si)| x / si).collect();
    let mut iterations = 0;
    let mut failed = false;
    let mut prev_viol = viol0;
    let mut g = vec![0.0; m];
    let mut best_feasible: Option<(f64, Vec<f64>)> = x0_feasible.then(|| (f0, x0.to_vec()));

    for _ in 0..opts.max_iter {
        let (it, bad) = {
            let lam = lambda.clone();
            let mut func = |v: &[f64], grad: Option<&mut [f64]>| sc.merit(v, &lam, mu, grad);
            bfgs(&mut func, &mut u, omega, opts.max_inner, opts.max_step)
        };
        iterations += it;
        if bad {
            failed = true;
            break;
        }
        let x = sc.unscale(&u);
        problem.constraints(&x, &mut g);
        let viol = max_violation(&g);
        if viol <= feas_tol {
            let f = problem.objective(&x);
            if best_feasible.as_ref().is_none_or(|(bf, _)| f > *bf) {
                best_feasible = Some((f, x.clone()));
            }
            if omega <= omega_min * 1.0001 || it == 0 {
                let (r, _) = kkt_with_multipliers(problem, &x, &g, feas_tol);
                if r <= kkt_tol {
                    break;
                }
            }
        }
        for k in 0..m {
            lambda[k] = (lambda[k] - mu * g[k]).max(0.0);
        }
        if viol > feas_tol && viol > 0.25 * prev_viol {
            mu = (mu * 10.0).min(1e12);
        }
        prev_viol = viol;
        omega = (omega * 0.1).max(omega_min);
    }

    let mut x = sc.unscale(&u);
    problem.constraints(&x, &mut g);
    if max_violation(&g) > 0.0 {
        restore_feasibility(problem, &mut x, 0.25 * feas_tol);
        problem.constraints(&x, &mut g);
    }
    let mut f = problem.objective(&x);
    if !f.is_finite() {
        failed = true;
    }
    let mut viol = max_violation(&g);
    let fallback = match &best_feasible {
        Some((bf, bx)) if viol > feas_tol || !f.is_finite() || (x0_feasible && f < f0 && *bf >= f0) => {
            Some((*bf, bx.clone()))
        }
        _ => None,
    };
    if let Some((bf, bx)) = fallback {
        x = bx;
        f = bf;
        problem.constraints(&x, &mut g);
        viol = max_violation(&g);
    }
    if x0_feasible && f < f0 {
        x = x0.to_vec();
        f = f0;
        g.copy_from_slice(&g0);
        viol = viol0;
    }
    if viol <= feas_tol {
        if let Some(snapped) = snap_to_active(problem, &mut x, &mut g, f, feas_tol) {
            f = snapped;
            viol = max_violation(&g);
        }
    }
    let kkt = if viol <= feas_tol {
        kkt_with_multipliers(problem, &x, &g, feas_tol).0
    } else {
        f64::INFINITY
    };
    let status = if viol > feas_tol {
        SolveStatus::Infeasible
    } else if kkt <= kkt_tol {
        SolveStatus::Converged
    } else if failed {
        SolveStatus::NumericalFailure
    } else {
        SolveStatus::IterationCap
    };
    NlpResult {
        x,
        objective_value: f,
        kkt_residual: kkt,
        max_violation: viol,
        iterations,
        status,
    }
}
