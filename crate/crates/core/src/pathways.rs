//! Most probable transition pathways.
//!
//! Minimizers of the OM action subject to the kinematic constraint solve a
//! Hamilton-Pontryagin boundary value problem. With the conjugate variable
//! `p = ∂L/∂φ̇2 = (φ̇2 - f + Λ)/c^2` and multiplier `λ(t)` the first-order
//! system is
//!
//! ```text
//! φ̇1 = g
//! φ̇2 = c^2 p + f - Λ
//! ṗ  = -p f_y + 1/2 f_yy + λ g_y
//! λ̇  = p f_x - 1/2 f_xy - λ g_x
//! ```
//!
//! For the kinetic Langevin model the multiplier and `φ2` can be eliminated,
//! leaving a fourth-order Euler-Lagrange equation in the position alone:
//!
//! ```text
//! φ1'''' + φ1''(2U'' - γ^2) + (φ1')^2 U''' + (U' + Λ) U'' = 0
//! ```
//!
//! Both are solved by single shooting with a Newton iteration on the free
//! initial data; quadratic potentials additionally admit closed-form
//! solutions used as oracles and warm starts.

use rand::Rng;
use thiserror::Error;

use crate::model::{DegenerateModel, LangevinModel, ModelError};
use crate::ode::{integrate_final, integrate_to_grid, OdeError, OdeOptions};
use crate::path::Path;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("boundary problem needs both velocity entries for this solver")]
    MissingVelocity,
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error(
        "shooting did not converge after {iterations} Newton iterations (|mismatch| = {mismatch:e}, tol = {tolerance:e})"
    )]
    NoConvergence {
        iterations: usize,
        mismatch: f64,
        tolerance: f64,
    },
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("boundary system is numerically singular (pivot {pivot:e})")]
    SingularSystem { pivot: f64 },
    #[error("velocity optimization did not converge within {evaluations} evaluations")]
    OptimizerBudget { evaluations: usize },
    #[error("analytic solution requires the quadratic potential")]
    NotQuadratic,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Boundary data for a transition problem on `[0, T]`.
///
/// Velocity entries are optional: configuration-only problems (positions
/// given, velocities free) are handled by [`optimize_boundary_velocities`]
/// or the analytic [`quadratic_global_mptp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryProblem {
    pub x0: f64,
    pub y0: Option<f64>,
    pub x_t: f64,
    pub y_t: Option<f64>,
    pub horizon: f64,
}

impl BoundaryProblem {
    pub fn phase(x0: f64, y0: f64, x_t: f64, y_t: f64, horizon: f64) -> Self {
        Self {
            x0,
            y0: Some(y0),
            x_t,
            y_t: Some(y_t),
            horizon,
        }
    }

    pub fn configuration(x0: f64, x_t: f64, horizon: f64) -> Self {
        Self {
            x0,
            y0: None,
            x_t,
            y_t: None,
            horizon,
        }
    }

    fn check_horizon(&self) -> Result<(), SolveError> {
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(SolveError::InvalidHorizon(self.horizon));
        }
        Ok(())
    }

    fn velocities(&self) -> Result<(f64, f64), SolveError> {
        match (self.y0, self.y_t) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(SolveError::MissingVelocity),
        }
    }
}

/// State of the Hamilton-Pontryagin system: phase point, conjugate
/// variable `p = (φ̇2 - f + Λ)/c^2`, and multiplier `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpState {
    pub phi1: f64,
    pub phi2: f64,
    pub p: f64,
    pub lambda: f64,
}

impl HpState {
    pub fn new(phi1: f64, phi2: f64, p: f64, lambda: f64) -> Self {
        Self {
            phi1,
            phi2,
            p,
            lambda,
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.phi1, self.phi2, self.p, self.lambda]
    }

    fn from_array(a: &[f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Reconstruct `φ̇2` from the defining relation of `p`.
    pub fn phi2_dot(&self, model: &DegenerateModel) -> f64 {
        model.c() * model.c() * self.p + model.f(self.phi1, self.phi2) - model.lambda_mean()
    }
}

/// Time derivative of the Hamilton-Pontryagin state.
pub fn hp_rhs(model: &DegenerateModel, state: &HpState) -> HpState {
    let (x, y) = (state.phi1, state.phi2);
    let dl_dphi2 = -state.p * model.f_y(x, y) + 0.5 * model.f_yy(x, y);
    let dl_dphi1 = -state.p * model.f_x(x, y) + 0.5 * model.f_xy(x, y);
    HpState {
        phi1: model.g(x, y),
        phi2: state.phi2_dot(model),
        p: dl_dphi2 + state.lambda * model.g_y(x, y),
        lambda: -dl_dphi1 - state.lambda * model.g_x(x, y),
    }
}

/// Right-hand side of the fourth-order Euler-Lagrange equation reduced to
/// first order: state `(x, x', x'', x''')`.
pub fn el4_rhs(model: &LangevinModel, state: &[f64; 4]) -> [f64; 4] {
    let lambda = model.lambda_mean();
    let gamma2 = model.gamma() * model.gamma();
    let (x, x1, x2, x3) = (state[0], state[1], state[2], state[3]);
    let x4 = -x2 * (2.0 * model.u2(x) - gamma2)
        - x1 * x1 * model.u3(x)
        - (model.u1(x) + lambda) * model.u2(x);
    [x1, x2, x3, x4]
}

/// Solver knobs shared by the shooting and optimization routines.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Relative tolerance of the embedded Runge-Kutta pair.
    pub rtol: f64,
    /// Absolute tolerance of the integrator.
    pub atol: f64,
    /// Newton stops when the terminal mismatch max-norm drops below this.
    pub bvp_tol: f64,
    /// Newton iteration budget.
    pub max_newton: usize,
    /// Output grid intervals (the returned path has `nodes + 1` nodes).
    pub nodes: usize,
    /// Initial guess for the free initial data (zeros when absent).
    pub initial_guess: Option<[f64; 2]>,
    /// Simplex-diameter tolerance of the velocity optimization.
    pub vel_tol: f64,
    /// Evaluation budget per Nelder-Mead restart.
    pub max_outer: usize,
    /// Number of deterministic random restarts for the optimizer.
    pub restarts: usize,
    /// Seed for restart placement.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            bvp_tol: 1e-9,
            max_newton: 50,
            nodes: 2000,
            initial_guess: None,
            vel_tol: 1e-6,
            max_outer: 500,
            restarts: 5,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..OdeOptions::default()
        }
    }
}

/// Convergence diagnostics attached to every shooting solution.
#[derive(Debug, Clone, Copy)]
pub struct ShootingDiagnostics {
    pub newton_iterations: usize,
    /// Terminal mismatch (φ1(T) - xT, φ2(T) - yT) at the solution.
    pub mismatch: [f64; 2],
    /// Free initial data the shooting converged to.
    pub unknowns: [f64; 2],
}

/// A converged Hamilton-Pontryagin solution.
#[derive(Debug, Clone)]
pub struct HpSolution {
    /// Path with `phi2` and the reconstructed `φ̇2` channel.
    pub path: Path,
    /// Multiplier trace `λ(t)` on the same grid.
    pub multiplier: Vec<f64>,
    /// Conjugate-variable trace `p(t)` on the same grid.
    pub conjugate: Vec<f64>,
    pub diagnostics: ShootingDiagnostics,
}

/// A converged fourth-order Euler-Lagrange solution.
#[derive(Debug, Clone)]
pub struct El4Solution {
    /// Path with `phi2 = φ1'` and `dphi2 = φ1''`.
    pub path: Path,
    /// Third-derivative trace on the grid.
    pub third: Vec<f64>,
    pub diagnostics: ShootingDiagnostics,
}

/// Generic two-unknown single shooting with damped Newton and
/// forward-difference Jacobians.
fn shoot2(
    mut residual: impl FnMut(&[f64; 2]) -> Result<[f64; 2], SolveError>,
    start: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> Result<([f64; 2], usize, [f64; 2]), SolveError> {
    let norm = |r: &[f64; 2]| r[0].abs().max(r[1].abs());
    let mut u = start;
    let mut r = residual(&u)?;
    for iter in 0..max_iter {
        if norm(&r) <= tol {
            return Ok((u, iter, r));
        }
        // Forward-difference Jacobian, column by column.
        let mut jac = [[0.0f64; 2]; 2];
        for j in 0..2 {
            let h = 1e-7 * (1.0 + u[j].abs());
            let mut up = u;
            up[j] += h;
            let rp = residual(&up)?;
            jac[0][j] = (rp[0] - r[0]) / h;
            jac[1][j] = (rp[1] - r[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = jac
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if det.abs() <= 1e-14 * scale * scale.max(1.0) {
            return Err(SolveError::SingularSystem { pivot: det });
        }
        let du = [
            (jac[0][1] * r[1] - jac[1][1] * r[0]) / det,
            (jac[1][0] * r[0] - jac[0][0] * r[1]) / det,
        ];
        // Damped update: halve until the residual norm improves (or the
        // integration stops failing under the full step).
        let mut step = 1.0f64;
        let mut accepted = false;
        for _ in 0..12 {
            let candidate = [u[0] + step * du[0], u[1] + step * du[1]];
            match residual(&candidate) {
                Ok(rc) if norm(&rc) < norm(&r) || step < 1e-3 => {
                    u = candidate;
                    r = rc;
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            return Err(SolveError::NoConvergence {
                iterations: iter + 1,
                mismatch: norm(&r),
                tolerance: tol,
            });
        }
    }
    if norm(&r) <= tol {
        return Ok((u, max_iter, r));
    }
    Err(SolveError::NoConvergence {
        iterations: max_iter,
        mismatch: norm(&r),
        tolerance: tol,
    })
}

/// Solve the Hamilton-Pontryagin boundary value problem by single shooting
/// on the unknown initial conjugate data `(p(0), λ(0))`.
pub fn solve_hp_bvp(
    model: &DegenerateModel,
    problem: &BoundaryProblem,
    cfg: &SolverConfig,
) -> Result<HpSolution, SolveError> {
    problem.check_horizon()?;
    let (y0, y_t) = problem.velocities()?;
    let t_end = problem.horizon;
    let opts = cfg.ode();
    let rhs = |_t: f64, s: &[f64; 4]| {
        hp_rhs(model, &HpState::from_array(s)).to_array()
    };
    let residual = |u: &[f64; 2]| -> Result<[f64; 2], SolveError> {
        let start = [problem.x0, y0, u[0], u[1]];
        let end = integrate_final(rhs, 0.0, start, t_end, opts)?;
        Ok([end[0] - problem.x_t, end[1] - y_t])
    };
    let start = cfg.initial_guess.unwrap_or([0.0, 0.0]);
    let (u, iterations, mismatch) = shoot2(residual, start, cfg.bvp_tol, cfg.max_newton)?;

    let states = integrate_to_grid(
        rhs,
        0.0,
        [problem.x0, y0, u[0], u[1]],
        t_end,
        cfg.nodes,
        opts,
    )?;
    let phi1: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let phi2: Vec<f64> = states.iter().map(|s| s[1]).collect();
    let dphi2: Vec<f64> = states
        .iter()
        .map(|s| HpState::from_array(s).phi2_dot(model))
        .collect();
    let conjugate: Vec<f64> = states.iter().map(|s| s[2]).collect();
    let multiplier: Vec<f64> = states.iter().map(|s| s[3]).collect();
    Ok(HpSolution {
        path: Path::with_dphi2(0.0, t_end, phi1, phi2, dphi2)?,
        multiplier,
        conjugate,
        diagnostics: ShootingDiagnostics {
            newton_iterations: iterations,
            mismatch,
            unknowns: u,
        },
    })
}

/// Second and third derivative at `t = 0` of the cubic interpolating the
/// boundary data: a generic shooting guess.
fn hermite_guess(problem: &BoundaryProblem, y0: f64, y_t: f64) -> [f64; 2] {
    let t = problem.horizon;
    let delta = problem.x_t - problem.x0;
    let a = (3.0 * delta - (2.0 * y0 + y_t) * t) / (t * t);
    let b = ((y0 + y_t) * t - 2.0 * delta) / (t * t * t);
    [2.0 * a, 6.0 * b]
}

/// Initial `(x'', x''')` of the relaxed second-order dynamics
/// `x'' = -γ x' - U'(x) - Λ`: the exact solution branch whenever the
/// square term of the action can vanish.
fn relaxed_guess(model: &LangevinModel, problem: &BoundaryProblem, y0: f64) -> [f64; 2] {
    let lambda = model.lambda_mean();
    let x2 = -model.gamma() * y0 - model.u1(problem.x0) - lambda;
    let x3 = -model.gamma() * x2 - model.u2(problem.x0) * y0;
    [x2, x3]
}

/// Solve the fourth-order Euler-Lagrange boundary value problem by single
/// shooting on `(φ1''(0), φ1'''(0))`.
///
/// An explicit `cfg.initial_guess` is tried alone. Otherwise the shooting
/// starts from the relaxed-dynamics derivatives, then the cubic
/// interpolant of the boundary data, then zeros, taking the first branch
/// Newton converges on.
pub fn solve_el4_bvp(
    model: &LangevinModel,
    problem: &BoundaryProblem,
    cfg: &SolverConfig,
) -> Result<El4Solution, SolveError> {
    problem.check_horizon()?;
    let (y0, y_t) = problem.velocities()?;
    let t_end = problem.horizon;
    let opts = cfg.ode();
    let rhs = |_t: f64, s: &[f64; 4]| el4_rhs(model, s);
    let residual = |u: &[f64; 2]| -> Result<[f64; 2], SolveError> {
        let start = [problem.x0, y0, u[0], u[1]];
        let end = integrate_final(rhs, 0.0, start, t_end, opts)?;
        Ok([end[0] - problem.x_t, end[1] - y_t])
    };
    let guesses: Vec<[f64; 2]> = match cfg.initial_guess {
        Some(g) => vec![g],
        None => vec![
            relaxed_guess(model, problem, y0),
            hermite_guess(problem, y0, y_t),
            [0.0, 0.0],
        ],
    };
    let mut attempt = Err(SolveError::MissingVelocity);
    for guess in guesses {
        attempt = shoot2(&residual, guess, cfg.bvp_tol, cfg.max_newton);
        if attempt.is_ok() {
            break;
        }
    }
    let (u, iterations, mismatch) = attempt?;

    let states = integrate_to_grid(
        rhs,
        0.0,
        [problem.x0, y0, u[0], u[1]],
        t_end,
        cfg.nodes,
        opts,
    )?;
    let phi1: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let phi2: Vec<f64> = states.iter().map(|s| s[1]).collect();
    let dphi2: Vec<f64> = states.iter().map(|s| s[2]).collect();
    let third: Vec<f64> = states.iter().map(|s| s[3]).collect();
    Ok(El4Solution {
        path: Path::with_dphi2(0.0, t_end, phi1, phi2, dphi2)?,
        third,
        diagnostics: ShootingDiagnostics {
            newton_iterations: iterations,
            mismatch,
            unknowns: u,
        },
    })
}

/// Closed-form MPTP for the quadratic potential `U(x) = -x^2/2`:
/// a sum of exponentials `φ1(t) = Σ C_i e^{λ_i t} + Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMptp {
    /// Exponents, ascending: four for the phase problem, two for the
    /// global (configuration-only) problem.
    pub exponents: Vec<f64>,
    /// Matching coefficients.
    pub coefficients: Vec<f64>,
    /// Constant offset `Λ_{α,β}`.
    pub offset: f64,
    /// Horizon the boundary data was interpolated on.
    pub horizon: f64,
}

impl QuadraticMptp {
    pub fn value(&self, t: f64) -> f64 {
        self.offset
            + self
                .exponents
                .iter()
                .zip(&self.coefficients)
                .map(|(l, c)| c * (l * t).exp())
                .sum::<f64>()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(l, c)| c * l * (l * t).exp())
            .sum()
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(l, c)| c * l * l * (l * t).exp())
            .sum()
    }

    /// Velocities the curve induces at the endpoints.
    pub fn boundary_velocities(&self) -> (f64, f64) {
        (self.derivative(0.0), self.derivative(self.horizon))
    }

    /// Sample on `n` intervals, with `phi2 = φ1'` and `dphi2 = φ1''`.
    pub fn to_path(&self, n: usize) -> Path {
        Path::from_fns(
            0.0,
            self.horizon,
            n,
            |t| self.value(t),
            |t| self.derivative(t),
            Some(&|t| self.second_derivative(t)),
        )
        .expect("analytic path is well formed")
    }
}

/// The two decay rates `λ*_{1,2} = (-γ ∓ sqrt(γ^2 + 4))/2` of the reduced
/// second-order equation `φ1'' + γ φ1' - φ1 + Λ = 0`.
pub fn quadratic_global_exponents(gamma: f64) -> (f64, f64) {
    let s = (gamma * gamma + 4.0).sqrt();
    ((-gamma - s) / 2.0, (-gamma + s) / 2.0)
}

/// The four exponents of the quadratic-potential Euler-Lagrange equation,
/// ascending. They satisfy `r^4 - (2 + γ^2) r^2 + 1 = 0` and coincide with
/// `{λ*_1, λ*_2, -λ*_1, -λ*_2}`.
pub fn quadratic_el4_exponents(gamma: f64) -> [f64; 4] {
    let s = gamma * (gamma * gamma + 4.0).sqrt();
    let slow = ((2.0 + gamma * gamma - s) / 2.0).sqrt();
    let fast = ((2.0 + gamma * gamma + s) / 2.0).sqrt();
    [-fast, -slow, slow, fast]
}

/// Analytic solution of the quadratic-potential phase-boundary problem:
/// four exponentials interpolating positions and velocities at both ends.
pub fn quadratic_analytic_mptp(
    gamma: f64,
    lambda_mean: f64,
    problem: &BoundaryProblem,
) -> Result<QuadraticMptp, SolveError> {
    problem.check_horizon()?;
    let (y0, y_t) = problem.velocities()?;
    let t_end = problem.horizon;
    let exps = quadratic_el4_exponents(gamma);
    // Columns (1, e^{λT}, λ, λ e^{λT}), right-hand side
    // (x0 - Λ, xT - Λ, y0, yT).
    let mut a = [[0.0f64; 4]; 4];
    for (j, l) in exps.iter().enumerate() {
        a[0][j] = 1.0;
        a[1][j] = (l * t_end).exp();
        a[2][j] = *l;
        a[3][j] = l * (l * t_end).exp();
    }
    let b = [
        problem.x0 - lambda_mean,
        problem.x_t - lambda_mean,
        y0,
        y_t,
    ];
    let coefficients = solve4(a, b)?;
    Ok(QuadraticMptp {
        exponents: exps.to_vec(),
        coefficients: coefficients.to_vec(),
        offset: lambda_mean,
        horizon: t_end,
    })
}

/// Global (configuration-only) MPTP for the quadratic potential: the
/// two-exponential solution of `φ1'' + γ φ1' - φ1 + Λ = 0` interpolating
/// `φ1(0) = x0`, `φ1(T) = xT`. Its endpoint derivatives are the optimal
/// boundary velocities.
pub fn quadratic_global_mptp(
    gamma: f64,
    lambda_mean: f64,
    x0: f64,
    x_t: f64,
    horizon: f64,
) -> Result<QuadraticMptp, SolveError> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(SolveError::InvalidHorizon(horizon));
    }
    let (l1, l2) = quadratic_global_exponents(gamma);
    let (e1, e2) = ((l1 * horizon).exp(), (l2 * horizon).exp());
    let (a0, a_t) = (x0 - lambda_mean, x_t - lambda_mean);
    let denom = e1 - e2;
    let c1 = (a_t - e2 * a0) / denom;
    let c2 = (e1 * a0 - a_t) / denom;
    Ok(QuadraticMptp {
        exponents: vec![l1, l2],
        coefficients: vec![c1, c2],
        offset: lambda_mean,
        horizon,
    })
}

/// Initial conjugate data `(p(0), λ(0))` of the analytic quadratic MPTP,
/// usable as a Hamilton-Pontryagin warm start.
pub fn quadratic_warm_start(
    gamma: f64,
    mu: f64,
    lambda_mean: f64,
    problem: &BoundaryProblem,
) -> Result<[f64; 2], SolveError> {
    let sol = quadratic_analytic_mptp(gamma, lambda_mean, problem)?;
    let c2 = mu * gamma;
    let p_at = |t: f64| {
        let third: f64 = sol
            .exponents
            .iter()
            .zip(&sol.coefficients)
            .map(|(l, c)| c * l * l * l * (l * t).exp())
            .sum();
        let p = (sol.second_derivative(t) + gamma * sol.derivative(t) - sol.value(t)
            + lambda_mean)
            / c2;
        let p_dot = (third + gamma * sol.second_derivative(t) - sol.derivative(t)) / c2;
        (p, p_dot)
    };
    let (p0, p0_dot) = p_at(0.0);
    // From the Langevin reduction of the HP system: λ = ṗ - γ p.
    Ok([p0, p0_dot - gamma * p0])
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4], SolveError> {
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..4 {
        let pivot_row = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        let pivot = a[pivot_row][col];
        if pivot.abs() <= 1e-13 * scale.max(1.0) {
            return Err(SolveError::SingularSystem { pivot });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..4 {
            let m = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0f64; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Boundary velocities of solutions to the relaxed second-order problem
/// `x'' + γ x' + U'(x) + Λ = 0`, `x(0) = x0`, `x(T) = xT`, found by a
/// bracketing scan over the initial velocity. Whenever such a solution
/// exists it attains the global action floor `-γT/2`, so its velocities
/// seed the optimizer.
fn relaxed_velocity_seeds(
    model: &LangevinModel,
    x0: f64,
    x_t: f64,
    horizon: f64,
    scan_halfwidth: f64,
) -> Vec<[f64; 2]> {
    let lambda = model.lambda_mean();
    let gamma = model.gamma();
    let rhs = move |_t: f64, s: &[f64; 2]| [s[1], -gamma * s[1] - model.u1(s[0]) - lambda];
    let opts = OdeOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..OdeOptions::default()
    };
    let terminal = |y0: f64| -> Option<[f64; 2]> {
        integrate_final(rhs, 0.0, [x0, y0], horizon, opts).ok()
    };
    let miss = |end: &[f64; 2]| end[0] - x_t;

    let n_scan = 64usize;
    let mut seeds = Vec::new();
    let mut prev: Option<(f64, [f64; 2])> = None;
    for i in 0..=n_scan {
        let y0 = -scan_halfwidth + 2.0 * scan_halfwidth * i as f64 / n_scan as f64;
        let Some(end) = terminal(y0) else {
            prev = None;
            continue;
        };
        if let Some((y_prev, end_prev)) = prev {
            if miss(&end_prev) * miss(&end) <= 0.0 {
                // Bisect the bracket.
                let (mut lo, mut hi) = (y_prev, y0);
                let mut f_lo = miss(&end_prev);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let Some(emid) = terminal(mid) else { break };
                    if f_lo * miss(&emid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        f_lo = miss(&emid);
                    }
                }
                let root = 0.5 * (lo + hi);
                if let Some(end_root) = terminal(root) {
                    seeds.push([root, end_root[1]]);
                }
            }
        }
        prev = Some((y0, end));
    }
    seeds
}

/// Result of minimizing the action over free boundary velocities.
#[derive(Debug, Clone)]
pub struct VelocityOptimum {
    pub y0: f64,
    pub y_t: f64,
    pub path: Path,
    pub action: f64,
    pub solution: El4Solution,
    /// Total inner BVP evaluations across all restarts.
    pub evaluations: usize,
}

/// Minimize the OM action of the configuration problem `x0 → xT` over the
/// free boundary velocities `(y0, yT)`.
///
/// A Nelder-Mead simplex drives [`solve_el4_bvp`] evaluations; the best of
/// `cfg.restarts` deterministic restarts is returned, each declared
/// converged once the simplex diameter drops below `cfg.vel_tol`.
pub fn optimize_boundary_velocities(
    model: &LangevinModel,
    x0: f64,
    x_t: f64,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<VelocityOptimum, SolveError> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(SolveError::InvalidHorizon(horizon));
    }
    let degenerate = model.to_degenerate();
    let mut evaluations = 0usize;
    // Shooting unknowns of the previous success seed the next evaluation,
    // which keeps Newton cheap as the simplex contracts.
    let mut warm: Option<[f64; 2]> = None;
    let mut last_err: Option<SolveError> = None;
    let mut best: Option<(f64, [f64; 2], El4Solution)> = None;

    let mut eval = |v: [f64; 2],
                    warm: &mut Option<[f64; 2]>,
                    evaluations: &mut usize|
     -> Option<(f64, El4Solution)> {
        *evaluations += 1;
        let problem = BoundaryProblem::phase(x0, v[0], x_t, v[1], horizon);
        let mut local = *cfg;
        local.initial_guess = warm.or(cfg.initial_guess);
        let solved = solve_el4_bvp(model, &problem, &local).or_else(|first| {
            // The warm-start chain can strand Newton on a stale branch;
            // retry from the default guess before giving up.
            if warm.is_some() {
                local.initial_guess = cfg.initial_guess;
                solve_el4_bvp(model, &problem, &local).map_err(|_| first)
            } else {
                Err(first)
            }
        });
        match solved {
            Ok(sol) => {
                *warm = Some(sol.diagnostics.unknowns);
                match crate::model::action(&degenerate, &sol.path) {
                    Ok(a) => Some((a, sol)),
                    Err(_) => None,
                }
            }
            Err(e) => {
                last_err = Some(e);
                None
            }
        }
    };

    let mut rng = stream_rng(cfg.seed, 0x7E10);
    let scale = (x_t - x0).abs().max(1.0) / horizon * 3.0;
    // Seeds from the relaxed second-order dynamics, where the action
    // attains its floor; random restarts cover problems without one.
    let seeds = relaxed_velocity_seeds(model, x0, x_t, horizon, 4.0 * scale.max(2.0));
    for restart in 0..cfg.restarts.max(1).max(seeds.len()) {
        let (center, spread): ([f64; 2], f64) = if restart < seeds.len() {
            (seeds[restart], (scale / 20.0).max(1e3 * cfg.vel_tol))
        } else if restart == seeds.len() {
            ([0.0, 0.0], scale / 3.0)
        } else {
            (
                [
                    rng.random_range(-scale..scale),
                    rng.random_range(-scale..scale),
                ],
                scale / 2.0,
            )
        };
        if let Some((v, a, sol, _converged)) = nelder_mead2(
            |v| eval(v, &mut warm, &mut evaluations).map(|(a, s)| (a, s)),
            center,
            spread,
            cfg.vel_tol,
            cfg.max_outer,
        ) {
            if best.as_ref().is_none_or(|(ba, _, _)| a < *ba) {
                best = Some((a, v, sol));
            }
        }
    }

    match best {
        Some((a, v, sol)) => Ok(VelocityOptimum {
            y0: v[0],
            y_t: v[1],
            path: sol.path.clone(),
            action: a,
            solution: sol,
            evaluations,
        }),
        None => Err(last_err.unwrap_or(SolveError::OptimizerBudget {
            evaluations,
        })),
    }
}

/// Two-dimensional Nelder-Mead with the standard coefficients. Returns the
/// best vertex, its value and payload, and whether the diameter criterion
/// was met within the budget.
fn nelder_mead2<P>(
    mut f: impl FnMut([f64; 2]) -> Option<(f64, P)>,
    center: [f64; 2],
    spread: f64,
    diameter_tol: f64,
    budget: usize,
) -> Option<([f64; 2], f64, P, bool)> {
    let mut evals = 0usize;
    let mut eval = |v: [f64; 2], evals: &mut usize| -> (f64, Option<P>) {
        *evals += 1;
        match f(v) {
            Some((a, p)) => (a, Some(p)),
            None => (f64::INFINITY, None),
        }
    };

    let mut simplex: Vec<([f64; 2], f64, Option<P>)> = vec![
        center,
        [center[0] + spread, center[1]],
        [center[0], center[1] + spread],
    ]
    .into_iter()
    .map(|v| {
        let (a, p) = eval(v, &mut evals);
        (v, a, p)
    })
    .collect();

    let diameter = |s: &[([f64; 2], f64, Option<P>)]| -> f64 {
        let mut d = 0.0f64;
        for i in 0..3 {
            for j in i + 1..3 {
                d = d.max(
                    (s[i].0[0] - s[j].0[0])
                        .hypot(s[i].0[1] - s[j].0[1]),
                );
            }
        }
        d
    };

    let mut converged = false;
    while evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1.is_finite() && diameter(&simplex) < diameter_tol {
            converged = true;
            break;
        }
        let best = simplex[0].0;
        let second = simplex[1].0;
        let worst = simplex[2].0;
        let centroid = [(best[0] + second[0]) / 2.0, (best[1] + second[1]) / 2.0];
        let reflect = [
            centroid[0] + (centroid[0] - worst[0]),
            centroid[1] + (centroid[1] - worst[1]),
        ];
        let (fr, pr) = eval(reflect, &mut evals);
        if fr < simplex[0].1 {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - worst[0]),
                centroid[1] + 2.0 * (centroid[1] - worst[1]),
            ];
            let (fe, pe) = eval(expand, &mut evals);
            simplex[2] = if fe < fr {
                (expand, fe, pe)
            } else {
                (reflect, fr, pr)
            };
        } else if fr < simplex[1].1 {
            simplex[2] = (reflect, fr, pr);
        } else {
            let contract = [
                centroid[0] + 0.5 * (worst[0] - centroid[0]),
                centroid[1] + 0.5 * (worst[1] - centroid[1]),
            ];
            let (fc, pc) = eval(contract, &mut evals);
            if fc < simplex[2].1 {
                simplex[2] = (contract, fc, pc);
            } else {
                // Shrink toward the best vertex.
                for k in 1..3 {
                    let v = [
                        best[0] + 0.5 * (simplex[k].0[0] - best[0]),
                        best[1] + 0.5 * (simplex[k].0[1] - best[1]),
                    ];
                    let (fv, pv) = eval(v, &mut evals);
                    simplex[k] = (v, fv, pv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (v, a, p) = simplex.swap_remove(0);
    p.map(|payload| (v, a, payload, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::AlphaStableMeasure;
    use crate::model::{action, variational_residual, BuiltinPotential};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn fig1_model() -> LangevinModel {
        LangevinModel::with_potential(
            BuiltinPotential::Quadratic,
            3.0,
            0.8,
            Some(AlphaStableMeasure::new(0.5, 0.5).unwrap()),
        )
        .unwrap()
    }

    const LAMBDA: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn hp_rhs_reduces_to_the_langevin_form() {
        let model = fig1_model().to_degenerate();
        let state = HpState::new(0.4, -1.1, 0.7, 0.2);
        let d = hp_rhs(&model, &state);
        // phi1' = phi2.
        assert_eq!(d.phi1, state.phi2);
        // phi2' = c^2 p + f - Lambda.
        assert_relative_eq!(
            d.phi2,
            2.4 * 0.7 + (-3.0 * -1.1 + 0.4) - LAMBDA,
            epsilon = 1e-12
        );
        // p' = gamma p + lambda, lambda' = -p U''(phi1) = +p.
        assert_relative_eq!(d.p, 3.0 * 0.7 + 0.2, epsilon = 1e-12);
        assert_relative_eq!(d.lambda, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn hp_rhs_with_stationary_conjugate_data() {
        // p = 0, lambda = 0, f = Lambda at the point: everything rests.
        let model = fig1_model().to_degenerate();
        // f(x, 0) = x, so x = Lambda gives f = Lambda.
        let state = HpState::new(LAMBDA, 0.0, 0.0, 0.0);
        let d = hp_rhs(&model, &state);
        assert_abs_diff_eq!(d.phi1, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.phi2, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.p, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.lambda, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn el4_rhs_quadratic_reduction_and_roots() {
        let model = fig1_model();
        // x'''' = x''(2 + gamma^2) - x + Lambda for the quadratic potential.
        let s = [0.3, -0.2, 0.9, 0.1];
        let d = el4_rhs(&model, &s);
        assert_eq!(d[0], s[1]);
        assert_eq!(d[1], s[2]);
        assert_eq!(d[2], s[3]);
        assert_relative_eq!(d[3], 0.9 * 11.0 - 0.3 + LAMBDA, epsilon = 1e-12);

        // Characteristic roots r^4 - 11 r^2 + 1 = 0 for gamma = 3 ...
        let roots = quadratic_el4_exponents(3.0);
        assert_relative_eq!(roots[0], -3.302_775_637_731_995, epsilon = 1e-12);
        assert_relative_eq!(roots[1], -0.302_775_637_731_994_6, epsilon = 1e-12);
        assert_relative_eq!(roots[2], 0.302_775_637_731_994_6, epsilon = 1e-12);
        assert_relative_eq!(roots[3], 3.302_775_637_731_995, epsilon = 1e-12);
        // ... and they are {lam1*, lam2*, -lam1*, -lam2*} for every gamma.
        for gamma in [0.5, 1.0, 3.0, 10.0] {
            let (l1, l2) = quadratic_global_exponents(gamma);
            let r = quadratic_el4_exponents(gamma);
            assert_relative_eq!(r[0], l1, max_relative = 1e-12);
            assert_relative_eq!(r[1], -l2, max_relative = 1e-12);
            assert_relative_eq!(r[2], l2, max_relative = 1e-12);
            assert_relative_eq!(r[3], -l1, max_relative = 1e-12);
            // Verify against the quartic itself.
            for root in r {
                let v = root.powi(4) - (2.0 + gamma * gamma) * root * root + 1.0;
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn el4_constant_state_at_shifted_equilibrium() {
        let model = fig1_model();
        // U'(x) = -Lambda at x = Lambda for the quadratic potential.
        let d = el4_rhs(&model, &[LAMBDA, 0.0, 0.0, 0.0]);
        for v in d {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn analytic_mptp_interpolates_boundary_data() {
        let problem = BoundaryProblem::phase(-1.0, 2.5, 1.0, -0.7, 2.0);
        let sol = quadratic_analytic_mptp(3.0, LAMBDA, &problem).unwrap();
        assert_abs_diff_eq!(sol.value(0.0), -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.value(2.0), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.derivative(0.0), 2.5, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.derivative(2.0), -0.7, epsilon = 1e-10);
    }

    #[test]
    fn global_mptp_matches_quoted_velocities() {
        let sol = quadratic_global_mptp(3.0, LAMBDA, -1.0, 1.0, 2.0).unwrap();
        let (y0, y_t) = sol.boundary_velocities();
        assert_abs_diff_eq!(y0, 5.8078, epsilon = 1e-3);
        assert_abs_diff_eq!(y_t, 0.1904, epsilon = 1e-3);
        // Frozen to full precision for regression.
        assert_relative_eq!(y0, 5.807_763_277_087_845, epsilon = 1e-10);
        assert_relative_eq!(y_t, 0.190_415_607_819_645, epsilon = 1e-10);
        // Exact endpoint interpolation.
        assert_abs_diff_eq!(sol.value(0.0), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.value(2.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn global_mptp_solves_the_second_order_equation_pointwise() {
        let sol = quadratic_global_mptp(3.0, LAMBDA, -1.0, 1.0, 2.0).unwrap();
        for i in 0..=100 {
            let t = 2.0 * i as f64 / 100.0;
            let r = sol.second_derivative(t) + 3.0 * sol.derivative(t) - sol.value(t) + LAMBDA;
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn global_mptp_depends_only_on_lambda_shifted_positions() {
        let base = quadratic_global_mptp(3.0, LAMBDA, -1.0, 1.0, 2.0).unwrap();
        let delta = 0.8;
        let shifted =
            quadratic_global_mptp(3.0, LAMBDA + delta, -1.0 + delta, 1.0 + delta, 2.0).unwrap();
        for i in 0..=40 {
            let t = 2.0 * i as f64 / 40.0;
            assert_abs_diff_eq!(shifted.value(t), base.value(t) + delta, epsilon = 1e-12);
            assert_abs_diff_eq!(
                shifted.derivative(t),
                base.derivative(t),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn analytic_mptp_with_optimal_velocities_collapses_to_two_exponentials() {
        let global = quadratic_global_mptp(3.0, LAMBDA, -1.0, 1.0, 2.0).unwrap();
        let (y0, y_t) = global.boundary_velocities();
        let full = quadratic_analytic_mptp(
            3.0,
            LAMBDA,
            &BoundaryProblem::phase(-1.0, y0, 1.0, y_t, 2.0),
        )
        .unwrap();
        for i in 0..=200 {
            let t = 2.0 * i as f64 / 200.0;
            assert_abs_diff_eq!(full.value(t), global.value(t), epsilon = 1e-4);
        }
    }

    #[test]
    fn hp_shooting_reproduces_the_global_mptp() {
        let model = fig1_model();
        let global = quadratic_global_mptp(3.0, LAMBDA, -1.0, 1.0, 2.0).unwrap();
        let (y0, y_t) = global.boundary_velocities();
        let problem = BoundaryProblem::phase(-1.0, y0, 1.0, y_t, 2.0);
        let cfg = SolverConfig::default();
        let sol = solve_hp_bvp(&model.to_degenerate(), &problem, &cfg).unwrap();
        let analytic = global.to_path(cfg.nodes);
        let err = sol.path.sup_distance(&analytic).unwrap();
        assert!(err <= 1e-5, "sup error {err}");
    }

    #[test]
    fn constant_problem_at_the_equilibrium_point() {
        let model = fig1_model();
        let problem = BoundaryProblem::phase(LAMBDA, 0.0, LAMBDA, 0.0, 2.0);
        let cfg = SolverConfig {
            nodes: 200,
            ..SolverConfig::default()
        };
        let sol = solve_hp_bvp(&model.to_degenerate(), &problem, &cfg).unwrap();
        for i in 0..=200 {
            assert_abs_diff_eq!(sol.path.phi1()[i], LAMBDA, epsilon = 1e-8);
            assert_abs_diff_eq!(sol.path.phi2()[i], 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(sol.conjugate[i], 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(sol.multiplier[i], 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn el4_and_hp_agree_with_the_analytic_oracle() {
        let model = fig1_model();
        let degenerate = model.to_degenerate();
        let cfg = SolverConfig::default();
        for (y0, y_t) in [(2.0, 0.0), (-1.0, 1.5), (5.8078, 0.1904)] {
            let problem = BoundaryProblem::phase(-1.0, y0, 1.0, y_t, 2.0);
            let analytic = quadratic_analytic_mptp(3.0, LAMBDA, &problem)
                .unwrap()
                .to_path(cfg.nodes);
            let el4 = solve_el4_bvp(&model, &problem, &cfg).unwrap();
            let hp = solve_hp_bvp(&degenerate, &problem, &cfg).unwrap();
            assert!(el4.path.sup_distance(&analytic).unwrap() <= 1e-5);
            assert!(hp.path.sup_distance(&analytic).unwrap() <= 1e-5);
            assert!(hp.path.sup_distance(&el4.path).unwrap() <= 1e-5);
        }
    }

    #[test]
    fn hp_solution_satisfies_the_fourth_order_equation() {
        let model = fig1_model();
        let cfg = SolverConfig {
            nodes: 8192,
            ..SolverConfig::default()
        };
        let problem = BoundaryProblem::phase(-1.0, 2.0, 1.0, -1.0, 2.0);
        let sol = solve_hp_bvp(&model.to_degenerate(), &problem, &cfg).unwrap();
        let residual = variational_residual(&model, &sol.path).unwrap();
        let max = residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        assert!(max <= 1e-4, "max residual {max}");
    }

    #[test]
    fn action_floor_along_solver_paths() {
        let model = fig1_model();
        let degenerate = model.to_degenerate();
        let cfg = SolverConfig::default();
        for (y0, y_t) in [(0.0, 0.0), (5.8078, 0.1904), (-3.0, 2.0)] {
            let problem = BoundaryProblem::phase(-1.0, y0, 1.0, y_t, 2.0);
            let sol = solve_el4_bvp(&model, &problem, &cfg).unwrap();
            let a = action(&degenerate, &sol.path).unwrap();
            assert!(a >= -3.0 - 1e-6, "action {a}");
        }
    }

    #[test]
    fn shooting_rejects_configuration_only_problems() {
        let model = fig1_model();
        let problem = BoundaryProblem::configuration(-1.0, 1.0, 2.0);
        assert!(matches!(
            solve_el4_bvp(&model, &problem, &SolverConfig::default()),
            Err(SolveError::MissingVelocity)
        ));
    }

    #[test]
    fn velocity_optimization_recovers_the_global_mptp() {
        let model = fig1_model();
        let cfg = SolverConfig {
            nodes: 400,
            restarts: 2,
            ..SolverConfig::default()
        };
        let opt = optimize_boundary_velocities(&model, -1.0, 1.0, 2.0, &cfg).unwrap();
        let global = quadratic_global_mptp(3.0, LAMBDA, -1.0, 1.0, 2.0).unwrap();
        let (y0, y_t) = global.boundary_velocities();
        assert_abs_diff_eq!(opt.y0, y0, epsilon = 1e-3);
        assert_abs_diff_eq!(opt.y_t, y_t, epsilon = 1e-3);
        assert_abs_diff_eq!(opt.action, -3.0, epsilon = 1e-4);
    }

    #[test]
    fn velocity_optimization_at_the_equilibrium_is_trivial() {
        let model = fig1_model();
        let cfg = SolverConfig {
            nodes: 200,
            restarts: 1,
            ..SolverConfig::default()
        };
        let opt =
            optimize_boundary_velocities(&model, LAMBDA, LAMBDA, 2.0, &cfg).unwrap();
        assert_abs_diff_eq!(opt.y0, 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(opt.y_t, 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(opt.action, -3.0, epsilon = 1e-4);
    }

    #[test]
    fn double_well_transition_is_locally_optimal() {
        let model =
            LangevinModel::with_potential(BuiltinPotential::DoubleWell, 1.0, 0.5, None).unwrap();
        let degenerate = model.to_degenerate();
        let cfg = SolverConfig {
            nodes: 500,
            restarts: 3,
            ..SolverConfig::default()
        };
        let opt = optimize_boundary_velocities(&model, -1.0, 1.0, 5.0, &cfg).unwrap();
        // Action floor and small shooting mismatch. The floor is attained
        // here: the relaxed second-order problem has a connecting solution.
        assert!(opt.action >= -2.5 - 1e-6, "action {}", opt.action);
        assert!(opt.action <= -2.5 + 1e-4, "action {}", opt.action);
        let m = opt.solution.diagnostics.mismatch;
        assert!(m[0].abs().max(m[1].abs()) <= 1e-6);
        // Local optimality: jiggling the velocities does not help. The
        // perturbed solves reuse the optimum's shooting data; a cold start
        // from zeros need not converge for this nonlinear problem.
        let warm = SolverConfig {
            initial_guess: Some(opt.solution.diagnostics.unknowns),
            ..cfg
        };
        for (dy0, dyt) in [(0.05, 0.0), (-0.05, 0.0), (0.0, 0.05), (0.0, -0.05)] {
            let problem =
                BoundaryProblem::phase(-1.0, opt.y0 + dy0, 1.0, opt.y_t + dyt, 5.0);
            let sol = solve_el4_bvp(&model, &problem, &warm).unwrap();
            let a = action(&degenerate, &sol.path).unwrap();
            assert!(
                a >= opt.action - 1e-7,
                "perturbed action {a} beat optimum {}",
                opt.action
            );
        }
    }

    #[test]
    fn singular_four_by_four_is_reported() {
        // T = 0 is rejected before the linear algebra.
        assert!(matches!(
            quadratic_global_mptp(3.0, 0.0, -1.0, 1.0, 0.0),
            Err(SolveError::InvalidHorizon(_))
        ));
        let degenerate_cols = [[1.0, 1.0, 1.0, 1.0]; 4];
        assert!(matches!(
            solve4(degenerate_cols, [0.0; 4]),
            Err(SolveError::SingularSystem { .. })
        ));
    }
}
