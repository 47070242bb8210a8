//! Monte Carlo simulation and tube-probability estimation.
//!
//! Forward simulation uses Euler-Maruyama with the truncated jump scheme:
//! super-threshold jumps are sampled exactly and applied at the end of the
//! step containing them, sub-threshold jumps enter as the deterministic
//! compensator drift `m_δ`. The X update never sees noise directly — the
//! degeneracy of the model is preserved exactly, step by step.
//!
//! Ensembles are embarrassingly parallel: sample `i` draws from the stream
//! `derive_stream_seed(master, i)`, counts are merged as order-independent
//! sums, and stored paths keep index order, so results are independent of
//! the thread count.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::levy::{JumpTrain, LevyError, DEFAULT_JUMP_THRESHOLD};
use crate::model::{action, kinematic_residual, DegenerateModel, ModelError};
use crate::path::Path;
use crate::rng::{derive_stream_seed, rng_from_seed};

/// 97.5th percentile of the standard normal: two-sided 95% coverage.
const Z95: f64 = 1.959_963_984_540_054;

/// Default rejection budget for bridge conditioning.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000_000;

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("simulation blew up at step {step} (t = {t}); last finite state ({x}, {y})")]
    BlowUp { step: usize, t: f64, x: f64, y: f64 },
    #[error("need dt > 0 and T/dt >= 2, got T = {t_end}, dt = {dt}")]
    InvalidGrid { t_end: f64, dt: f64 },
    #[error("reference path does not match the simulation grid: {0}")]
    GridMismatch(String),
    #[error("reference paths must share the initial state: ({0}, {1}) vs ({2}, {3})")]
    StartMismatch(f64, f64, f64, f64),
    #[error(
        "rejection budget exhausted after {attempts} attempts ({accepted} accepted, acceptance rate {rate:.3e})"
    )]
    BudgetExceeded {
        attempts: u64,
        accepted: usize,
        rate: f64,
    },
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Uniform simulation grid on `[0, T]` plus the jump truncation level.
///
/// The step count is `round(T/dt)` and the effective step is `T / steps`,
/// so the grid always closes exactly at `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    pub t_end: f64,
    pub dt: f64,
    pub delta: f64,
}

impl SimGrid {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            delta: DEFAULT_JUMP_THRESHOLD,
        }
    }

    pub fn with_delta(t_end: f64, dt: f64, delta: f64) -> Self {
        Self { t_end, dt, delta }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn effective_dt(&self) -> f64 {
        self.t_end / self.steps() as f64
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = !self.t_end.is_finite()
            || self.t_end <= 0.0
            || !self.dt.is_finite()
            || self.dt <= 0.0
            || self.steps() < 2;
        if bad {
            return Err(SimError::InvalidGrid {
                t_end: self.t_end,
                dt: self.dt,
            });
        }
        Ok(())
    }

    fn matches(&self, phi: &Path) -> Result<(), SimError> {
        let ok = phi.t0() == 0.0
            && phi.n() == self.steps()
            && (phi.t_end() - self.t_end).abs() <= 1e-9 * self.t_end.abs().max(1.0);
        if ok {
            Ok(())
        } else {
            Err(SimError::GridMismatch(format!(
                "path [{}, {}] x {} vs simulation [0, {}] x {}",
                phi.t0(),
                phi.t_end(),
                phi.n(),
                self.t_end,
                self.steps()
            )))
        }
    }
}

/// One simulated realization, reproducible from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub path: Path,
    /// Derived stream seed that regenerates this exact realization.
    pub seed: u64,
    /// The super-threshold jump train, when the model carries a measure.
    pub jumps: Option<JumpTrain>,
}

/// Euler-Maruyama core: drives `observe(node, x, y)` over nodes `0..=steps`.
fn euler_core(
    model: &DegenerateModel,
    z0: (f64, f64),
    grid: &SimGrid,
    seed: u64,
    observe: &mut impl FnMut(usize, f64, f64),
) -> Result<Option<JumpTrain>, SimError> {
    let steps = grid.steps();
    let dt = grid.effective_dt();
    let sqrt_dt = dt.sqrt();
    let mut rng = rng_from_seed(seed);

    // Jumps first, normals second: a fixed draw order per seed.
    let (jumps, mut step_jumps, m_delta) = match model.measure() {
        Some(measure) => {
            let train = measure.sample_jumps(grid.t_end, grid.delta, &mut rng)?;
            let mut sums = vec![0.0f64; steps];
            for (&t, &s) in train.times.iter().zip(&train.sizes) {
                // A jump in (t_k, t_{k+1}] lands at the end of step k.
                let k = ((t / dt).ceil() as usize).saturating_sub(1).min(steps - 1);
                sums[k] += s;
            }
            let m = train.compensator_drift;
            (Some(train), sums, m)
        }
        None => (None, Vec::new(), 0.0),
    };
    if step_jumps.is_empty() {
        step_jumps = vec![0.0; steps];
    }

    let c = model.c();
    let (mut x, mut y) = z0;
    observe(0, x, y);
    for (k, jump) in step_jumps.iter().enumerate() {
        let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        let x_next = x + model.g(x, y) * dt;
        let y_next = y + model.f(x, y) * dt + c * sqrt_dt * noise + m_delta * dt + jump;
        if !x_next.is_finite() || !y_next.is_finite() {
            return Err(SimError::BlowUp {
                step: k,
                t: k as f64 * dt,
                x,
                y,
            });
        }
        x = x_next;
        y = y_next;
        observe(k + 1, x, y);
    }
    Ok(jumps)
}

/// Simulate one realization of the model from `z0`. Deterministic per seed.
pub fn simulate_sde(
    model: &DegenerateModel,
    z0: (f64, f64),
    grid: &SimGrid,
    seed: u64,
) -> Result<SamplePath, SimError> {
    grid.validate()?;
    let steps = grid.steps();
    let mut xs = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    let jumps = euler_core(model, z0, grid, seed, &mut |_, x, y| {
        xs.push(x);
        ys.push(y);
    })?;
    Ok(SamplePath {
        path: Path::new(0.0, grid.t_end, xs, ys)?,
        seed,
        jumps,
    })
}

/// Running sup-distance to one or two reference paths; blow-ups count as
/// infinitely distant rather than errors.
fn sup_distances(
    model: &DegenerateModel,
    grid: &SimGrid,
    phi_a: &Path,
    phi_b: Option<&Path>,
    seed: u64,
) -> (f64, f64) {
    let (mut da, mut db) = (0.0f64, 0.0f64);
    let a1 = phi_a.phi1();
    let a2 = phi_a.phi2();
    let z0 = phi_a.start();
    let result = euler_core(model, z0, grid, seed, &mut |k, x, y| {
        da = da.max((x - a1[k]).abs().max((y - a2[k]).abs()));
        if let Some(b) = phi_b {
            db = db.max((x - b.phi1()[k]).abs().max((y - b.phi2()[k]).abs()));
        }
    });
    if result.is_err() {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (da, db)
    }
}

/// Monte Carlo estimate of a tube probability with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeEstimate {
    pub epsilon: f64,
    pub hits: u64,
    pub n: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TubeEstimate {
    fn from_hits(epsilon: f64, hits: u64, n: u64) -> Self {
        let p_hat = hits as f64 / n as f64;
        let (mut ci_low, mut ci_high) = wilson_interval(hits, n, Z95);
        // Degenerate counts get exact one-sided intervals (the Wilson
        // arithmetic can land an ulp off zero or one there).
        if hits == 0 {
            ci_low = 0.0;
        }
        if hits == n {
            ci_high = 1.0;
        }
        Self {
            epsilon,
            hits,
            n,
            p_hat,
            ci_low,
            ci_high,
        }
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Estimate `P(sup_k max(|X - φ1|, |Y - φ2|) <= ε)` for several radii on a
/// shared seed set, so the returned column is exactly monotone in ε.
///
/// Simulations start at the reference path's initial state; the path grid
/// must match the simulation grid. Zero hits yield `p_hat = 0` with the
/// one-sided Wilson interval, not an error.
pub fn estimate_tube_probabilities(
    model: &DegenerateModel,
    phi: &Path,
    epsilons: &[f64],
    n: u64,
    grid: &SimGrid,
    master_seed: u64,
) -> Result<Vec<TubeEstimate>, SimError> {
    grid.validate()?;
    grid.matches(phi)?;
    let counts = (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; epsilons.len()],
            |mut acc, i| {
                let seed = derive_stream_seed(master_seed, i);
                let (d, _) = sup_distances(model, grid, phi, None, seed);
                for (slot, eps) in acc.iter_mut().zip(epsilons) {
                    if d <= *eps {
                        *slot += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; epsilons.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(epsilons
        .iter()
        .zip(counts)
        .map(|(&eps, hits)| TubeEstimate::from_hits(eps, hits, n))
        .collect())
}

/// Single-radius convenience wrapper around
/// [`estimate_tube_probabilities`].
pub fn estimate_tube_probability(
    model: &DegenerateModel,
    phi: &Path,
    epsilon: f64,
    n: u64,
    grid: &SimGrid,
    master_seed: u64,
) -> Result<TubeEstimate, SimError> {
    Ok(estimate_tube_probabilities(model, phi, &[epsilon], n, grid, master_seed)?
        .pop()
        .expect("one estimate per radius"))
}

/// Comparison of the empirical tube-probability ratio against the action
/// difference it should follow.
#[derive(Debug, Clone)]
pub struct OmRatioReport {
    pub tube_a: TubeEstimate,
    pub tube_b: TubeEstimate,
    /// Samples inside both tubes (common random numbers).
    pub joint_hits: u64,
    pub action_a: f64,
    pub action_b: f64,
    /// `ln(p_a / p_b)`; `None` when either hit count is 0.
    pub delta_hat: Option<f64>,
    /// `-(I(φ_a) - I(φ_b))`.
    pub delta_theory: f64,
    /// `delta_hat - delta_theory`.
    pub difference: Option<f64>,
    /// Propagated statistical error of `delta_hat`, accounting for the
    /// covariance induced by common random numbers.
    pub std_error: Option<f64>,
    pub kinematic_residual_a: f64,
    pub kinematic_residual_b: f64,
}

/// Estimate both tube probabilities with common random numbers and compare
/// `ln(p_a/p_b)` against `-(I(φ_a) - I(φ_b))`.
///
/// Both reference paths must share the initial state and the grid (the
/// proportionality constant of the tube asymptotics cancels only then).
pub fn om_ratio_check(
    model: &DegenerateModel,
    phi_a: &Path,
    phi_b: &Path,
    epsilon: f64,
    n: u64,
    grid: &SimGrid,
    master_seed: u64,
) -> Result<OmRatioReport, SimError> {
    grid.validate()?;
    grid.matches(phi_a)?;
    grid.matches(phi_b)?;
    let (a0, a1) = phi_a.start();
    let (b0, b1) = phi_b.start();
    if (a0 - b0).abs() > 1e-12 || (a1 - b1).abs() > 1e-12 {
        return Err(SimError::StartMismatch(a0, a1, b0, b1));
    }

    let (hits_a, hits_b, joint) = (0..n)
        .into_par_iter()
        .fold(
            || (0u64, 0u64, 0u64),
            |(ha, hb, hj), i| {
                let seed = derive_stream_seed(master_seed, i);
                let (da, db) = sup_distances(model, grid, phi_a, Some(phi_b), seed);
                let (ia, ib) = ((da <= epsilon) as u64, (db <= epsilon) as u64);
                (ha + ia, hb + ib, hj + ia * ib)
            },
        )
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));

    let tube_a = TubeEstimate::from_hits(epsilon, hits_a, n);
    let tube_b = TubeEstimate::from_hits(epsilon, hits_b, n);
    let action_a = action(model, phi_a)?;
    let action_b = action(model, phi_b)?;
    let delta_theory = -(action_a - action_b);

    let (delta_hat, std_error) = if hits_a > 0 && hits_b > 0 {
        let dh = (hits_a as f64).ln() - (hits_b as f64).ln();
        let (pa, pb) = (tube_a.p_hat, tube_b.p_hat);
        let p_joint = joint as f64 / n as f64;
        // Delta method for ln(pa) - ln(pb) with correlated indicators.
        let var = ((1.0 - pa) / pa + (1.0 - pb) / pb
            - 2.0 * (p_joint - pa * pb) / (pa * pb))
            / n as f64;
        (Some(dh), Some(var.max(0.0).sqrt()))
    } else {
        (None, None)
    };

    Ok(OmRatioReport {
        tube_a,
        tube_b,
        joint_hits: joint,
        action_a,
        action_b,
        delta_hat,
        delta_theory,
        difference: delta_hat.map(|dh| dh - delta_theory),
        std_error,
        kinematic_residual_a: kinematic_residual(model, phi_a),
        kinematic_residual_b: kinematic_residual(model, phi_b),
    })
}

/// Endpoint-conditioned ensemble produced by rejection sampling.
#[derive(Debug, Clone)]
pub struct BridgeEnsemble {
    /// Accepted realizations, in candidate-index order.
    pub paths: Vec<SamplePath>,
    /// Candidates examined up to and including the last accepted one
    /// (deterministic: independent of thread scheduling).
    pub attempts: u64,
    pub acceptance_rate: f64,
}

/// Simulate until `n_keep` realizations satisfy `|X(T) - x_target| <=
/// end_tol`. Candidate `i` uses the stream `derive_stream_seed(master, i)`,
/// and the kept set is the `n_keep` lowest-index acceptances.
pub fn simulate_bridge_ensemble(
    model: &DegenerateModel,
    z0: (f64, f64),
    x_target: f64,
    end_tol: f64,
    n_keep: usize,
    grid: &SimGrid,
    master_seed: u64,
    max_attempts: u64,
) -> Result<BridgeEnsemble, SimError> {
    grid.validate()?;
    if n_keep == 0 {
        return Ok(BridgeEnsemble {
            paths: Vec::new(),
            attempts: 0,
            acceptance_rate: f64::NAN,
        });
    }
    const BLOCK: u64 = 256;
    let mut accepted: Vec<(u64, SamplePath)> = Vec::with_capacity(n_keep);
    let mut next = 0u64;
    while accepted.len() < n_keep && next < max_attempts {
        let hi = (next + BLOCK).min(max_attempts);
        let mut block: Vec<(u64, SamplePath)> = (next..hi)
            .into_par_iter()
            .filter_map(|i| {
                let seed = derive_stream_seed(master_seed, i);
                match simulate_sde(model, z0, grid, seed) {
                    Ok(sample) => {
                        let end_x = sample.path.end().0;
                        ((end_x - x_target).abs() <= end_tol).then_some((i, sample))
                    }
                    Err(_) => None, // blow-ups cannot satisfy a finite tolerance
                }
            })
            .collect();
        block.sort_by_key(|(i, _)| *i);
        accepted.extend(block);
        next = hi;
    }
    if accepted.len() < n_keep {
        return Err(SimError::BudgetExceeded {
            attempts: next,
            accepted: accepted.len(),
            rate: accepted.len() as f64 / next as f64,
        });
    }
    accepted.truncate(n_keep);
    let attempts = accepted.last().unwrap().0 + 1;
    Ok(BridgeEnsemble {
        paths: accepted.into_iter().map(|(_, p)| p).collect(),
        attempts,
        acceptance_rate: n_keep as f64 / attempts as f64,
    })
}

/// Deviation of the auxiliary dynamics (drift replaced by the reference
/// derivative) from the reference path: returns
/// `(sup |X* - φ1|, sup |Y* - φ2|)`.
///
/// Supports the small-ball controllability check: the first component is
/// bounded by a constant times the second.
pub fn auxiliary_deviation(
    model: &DegenerateModel,
    phi: &Path,
    grid: &SimGrid,
    seed: u64,
) -> Result<(f64, f64), SimError> {
    grid.validate()?;
    grid.matches(phi)?;
    let steps = grid.steps();
    let dt = grid.effective_dt();
    let sqrt_dt = dt.sqrt();
    let mut rng = rng_from_seed(seed);
    let (jump_sums, m_delta) = match model.measure() {
        Some(measure) => {
            let train = measure.sample_jumps(grid.t_end, grid.delta, &mut rng)?;
            let mut sums = vec![0.0f64; steps];
            for (&t, &s) in train.times.iter().zip(&train.sizes) {
                let k = ((t / dt).ceil() as usize).saturating_sub(1).min(steps - 1);
                sums[k] += s;
            }
            (sums, train.compensator_drift)
        }
        None => (vec![0.0; steps], 0.0),
    };
    let dphi2: Vec<f64> = match phi.dphi2() {
        Some(d) => d.to_vec(),
        None => crate::fd::deriv1(phi.phi2(), dt),
    };
    let c = model.c();
    let (mut x, mut y) = phi.start();
    let (mut dev_x, mut dev_y) = (0.0f64, 0.0f64);
    for k in 0..steps {
        let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        x += model.g(x, y) * dt;
        y += dphi2[k] * dt + c * sqrt_dt * noise + m_delta * dt + jump_sums[k];
        if !x.is_finite() || !y.is_finite() {
            return Err(SimError::BlowUp {
                step: k,
                t: k as f64 * dt,
                x,
                y,
            });
        }
        dev_x = dev_x.max((x - phi.phi1()[k + 1]).abs());
        dev_y = dev_y.max((y - phi.phi2()[k + 1]).abs());
    }
    Ok((dev_x, dev_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::AlphaStableMeasure;
    use crate::model::{BuiltinPotential, LangevinModel};
    use crate::pathways::quadratic_global_mptp;
    use approx::assert_abs_diff_eq;

    const LAMBDA: f64 = 0.398_942_280_401_432_7;

    fn fig2_model() -> DegenerateModel {
        LangevinModel::with_potential(
            BuiltinPotential::Quadratic,
            3.0,
            0.8,
            Some(AlphaStableMeasure::new(0.5, 0.5).unwrap()),
        )
        .unwrap()
        .to_degenerate()
    }

    fn brownian_model() -> DegenerateModel {
        LangevinModel::with_potential(BuiltinPotential::Quadratic, 3.0, 0.8, None)
            .unwrap()
            .to_degenerate()
    }

    #[test]
    fn identical_seeds_are_bitwise_identical() {
        let m = fig2_model();
        let grid = SimGrid::new(2.0, 1e-3);
        let a = simulate_sde(&m, (-1.0, 5.8), &grid, 12345).unwrap();
        let b = simulate_sde(&m, (-1.0, 5.8), &grid, 12345).unwrap();
        assert_eq!(a, b);
        let c = simulate_sde(&m, (-1.0, 5.8), &grid, 12346).unwrap();
        assert_ne!(a.path.phi1(), c.path.phi1());
    }

    #[test]
    fn x_channel_is_the_exact_euler_map_of_the_y_channel() {
        let m = fig2_model();
        let grid = SimGrid::new(1.0, 1e-3);
        let s = simulate_sde(&m, (0.3, -0.4), &grid, 99).unwrap();
        let dt = grid.effective_dt();
        let (xs, ys) = (s.path.phi1(), s.path.phi2());
        for k in 0..grid.steps() {
            let replay = xs[k] + m.g(xs[k], ys[k]) * dt;
            assert_eq!(replay.to_bits(), xs[k + 1].to_bits(), "node {k}");
        }
    }

    #[test]
    fn noiseless_limit_follows_the_deterministic_flow() {
        // c -> 0, no jumps: Euler of the second-order flow, O(dt) accurate.
        let model = LangevinModel::with_potential(BuiltinPotential::Quadratic, 3.0, 1e-24, None)
            .unwrap()
            .to_degenerate();
        let grid = SimGrid::new(2.0, 1e-3);
        let (x0, y0) = (-1.0, 5.807_763_277_087_845);
        let s = simulate_sde(&model, (x0, y0), &grid, 7).unwrap();
        // Closed-form flow of x'' + 3x' - x = 0.
        let (l1, l2) = crate::pathways::quadratic_global_exponents(3.0);
        let d1 = (l2 * x0 - y0) / (l2 - l1);
        let d2 = x0 - d1;
        let mut worst = 0.0f64;
        for (k, &x) in s.path.phi1().iter().enumerate() {
            let t = k as f64 * grid.effective_dt();
            let flow = d1 * (l1 * t).exp() + d2 * (l2 * t).exp();
            worst = worst.max((x - flow).abs());
        }
        assert!(worst < 0.05, "sup deviation {worst}");
    }

    #[test]
    fn one_step_mean_displacement_matches_the_compensated_drift() {
        // Ensemble mean of the Y displacement over one step at fixed (x, y)
        // equals (f + Lambda) dt once samples containing a large jump are
        // excluded (their mean does not exist).
        let m = fig2_model();
        let grid = SimGrid::new(2e-3, 1e-3);
        let (x, y) = (0.3, -0.2);
        let f = m.f(x, y);
        let dt = grid.effective_dt();
        let n = 100_000u64;
        let mut kept = 0u64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in 0..n {
            let seed = derive_stream_seed(0xBEEF, i);
            let s = simulate_sde(&m, (x, y), &grid, seed).unwrap();
            let has_large = s
                .jumps
                .as_ref()
                .is_some_and(|j| j.sizes.iter().any(|v| v.abs() >= 1.0));
            if has_large {
                continue;
            }
            let dy = s.path.phi2()[1] - y;
            kept += 1;
            sum += dy;
            sum2 += dy * dy;
        }
        let mean = sum / kept as f64;
        let var = sum2 / kept as f64 - mean * mean;
        let se = (var / kept as f64).sqrt();
        let expected = (f + LAMBDA) * dt;
        assert!(
            (mean - expected).abs() <= 4.0 * se,
            "mean {mean:.3e} vs {expected:.3e} (4se {:.3e})",
            4.0 * se
        );
    }

    #[test]
    fn tube_hits_are_monotone_in_epsilon_under_shared_seeds() {
        let m = brownian_model();
        let grid = SimGrid::new(0.5, 1e-2);
        let phi = Path::from_fns(0.0, 0.5, grid.steps(), |_| 0.0, |_| 0.0, None).unwrap();
        let estimates =
            estimate_tube_probabilities(&m, &phi, &[0.2, 0.5, 1.0, f64::INFINITY], 2000, &grid, 5)
                .unwrap();
        assert!(estimates[0].hits <= estimates[1].hits);
        assert!(estimates[1].hits <= estimates[2].hits);
        assert!(estimates[2].hits <= estimates[3].hits);
        // epsilon = inf catches everything.
        assert_eq!(estimates[3].hits, 2000);
        assert_eq!(estimates[3].p_hat, 1.0);
        for e in &estimates {
            assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
        }
    }

    #[test]
    fn zero_hits_produce_a_one_sided_interval() {
        let m = brownian_model();
        let grid = SimGrid::new(0.5, 1e-2);
        let phi = Path::from_fns(0.0, 0.5, grid.steps(), |_| 50.0, |_| 0.0, None).unwrap();
        let e = estimate_tube_probability(&m, &phi, 1e-6, 500, &grid, 5).unwrap();
        assert_eq!(e.hits, 0);
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.ci_low, 0.0);
        assert!(e.ci_high > 0.0);
    }

    #[test]
    fn estimator_is_thread_count_independent() {
        let m = brownian_model();
        let grid = SimGrid::new(0.5, 1e-2);
        let phi = Path::from_fns(0.0, 0.5, grid.steps(), |_| 0.0, |_| 0.0, None).unwrap();
        let a = estimate_tube_probability(&m, &phi, 0.5, 1000, &grid, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool
            .install(|| estimate_tube_probability(&m, &phi, 0.5, 1000, &grid, 42))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ratio_of_identical_paths_is_exactly_zero() {
        let m = brownian_model();
        let grid = SimGrid::new(0.5, 1e-2);
        let phi = Path::from_fns(0.0, 0.5, grid.steps(), |_| 0.0, |_| 0.0, Some(&|_| 0.0)).unwrap();
        let r = om_ratio_check(&m, &phi, &phi, 0.6, 2000, &grid, 3).unwrap();
        assert_eq!(r.delta_hat, Some(0.0));
        assert_eq!(r.delta_theory, 0.0);
        assert_eq!(r.difference, Some(0.0));
        assert_eq!(r.joint_hits, r.tube_a.hits);
    }

    #[test]
    fn swapping_the_paths_negates_both_deltas() {
        let m = brownian_model();
        let grid = SimGrid::new(0.5, 1e-2);
        let n = grid.steps();
        let a = Path::from_fns(0.0, 0.5, n, |_| 0.0, |_| 0.0, Some(&|_| 0.0)).unwrap();
        let bump = |t: f64| 0.05 * (std::f64::consts::PI * t / 0.5).sin().powi(2);
        let b = Path::from_fns(
            0.0,
            0.5,
            n,
            bump,
            |t| {
                0.05 * 2.0 * (std::f64::consts::PI / 0.5)
                    * (std::f64::consts::PI * t / 0.5).sin()
                    * (std::f64::consts::PI * t / 0.5).cos()
            },
            None,
        )
        .unwrap();
        let fwd = om_ratio_check(&m, &a, &b, 0.8, 4000, &grid, 11).unwrap();
        let rev = om_ratio_check(&m, &b, &a, 0.8, 4000, &grid, 11).unwrap();
        assert_eq!(fwd.delta_hat.unwrap(), -rev.delta_hat.unwrap());
        assert_abs_diff_eq!(fwd.delta_theory, -rev.delta_theory, epsilon = 1e-14);
    }

    #[test]
    fn ratio_rejects_mismatched_starts() {
        let m = brownian_model();
        let grid = SimGrid::new(0.5, 1e-2);
        let n = grid.steps();
        let a = Path::from_fns(0.0, 0.5, n, |_| 0.0, |_| 0.0, None).unwrap();
        let b = Path::from_fns(0.0, 0.5, n, |_| 1.0, |_| 0.0, None).unwrap();
        assert!(matches!(
            om_ratio_check(&m, &a, &b, 0.5, 10, &grid, 0),
            Err(SimError::StartMismatch(..))
        ));
    }

    #[test]
    fn bridge_without_tolerance_keeps_the_first_candidates() {
        let m = fig2_model();
        let grid = SimGrid::new(0.5, 1e-2);
        let e = simulate_bridge_ensemble(
            &m,
            (-1.0, 0.0),
            0.0,
            f64::INFINITY,
            5,
            &grid,
            77,
            DEFAULT_MAX_ATTEMPTS,
        )
        .unwrap();
        assert_eq!(e.paths.len(), 5);
        assert_eq!(e.attempts, 5);
        // Candidate i is the stream derive(master, i).
        for (i, p) in e.paths.iter().enumerate() {
            assert_eq!(p.seed, derive_stream_seed(77, i as u64));
        }
    }

    #[test]
    fn empty_bridge_request_is_a_no_op() {
        let m = fig2_model();
        let grid = SimGrid::new(0.5, 1e-2);
        let e = simulate_bridge_ensemble(&m, (0.0, 0.0), 0.0, 0.1, 0, &grid, 1, 100)
            .unwrap();
        assert!(e.paths.is_empty());
        assert_eq!(e.attempts, 0);
    }

    #[test]
    fn bridge_budget_failure_reports_diagnostics() {
        let m = fig2_model();
        let grid = SimGrid::new(0.5, 1e-2);
        // Unreachable endpoint at tiny tolerance exhausts a small budget.
        let r = simulate_bridge_ensemble(&m, (0.0, 0.0), 1e6, 1e-9, 3, &grid, 1, 500);
        match r {
            Err(SimError::BudgetExceeded {
                attempts, accepted, ..
            }) => {
                assert_eq!(attempts, 500);
                assert_eq!(accepted, 0);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn bridge_acceptance_shrinks_with_the_tolerance() {
        let m = fig2_model();
        let grid = SimGrid::new(2.0, 2e-3);
        let global = quadratic_global_mptp(3.0, LAMBDA, -1.0, 1.0, 2.0).unwrap();
        let (y0, _) = global.boundary_velocities();
        let run = |tol: f64| {
            simulate_bridge_ensemble(
                &m,
                (-1.0, y0),
                1.0,
                tol,
                20,
                &grid,
                2024,
                DEFAULT_MAX_ATTEMPTS,
            )
            .unwrap()
        };
        let loose = run(0.5);
        let tight = run(0.1);
        assert!(loose.attempts <= tight.attempts);
        for p in &tight.paths {
            assert!((p.path.end().0 - 1.0).abs() <= 0.1);
        }
    }

    #[test]
    fn auxiliary_deviation_is_controlled_and_stable_under_refinement() {
        // Small-ball controllability: sup|X* - phi1| <= K sup|Y* - phi2|
        // with K stable when dt is halved.
        let m = fig2_model();
        let global = quadratic_global_mptp(3.0, LAMBDA, -1.0, 1.0, 2.0).unwrap();
        let max_ratio = |dt: f64| {
            let grid = SimGrid::new(2.0, dt);
            let phi = global.to_path(grid.steps());
            (0..1000u64)
                .map(|i| {
                    let (dx, dy) =
                        auxiliary_deviation(&m, &phi, &grid, derive_stream_seed(31, i)).unwrap();
                    dx / dy
                })
                .fold(0.0f64, f64::max)
        };
        let coarse = max_ratio(4e-3);
        let fine = max_ratio(2e-3);
        assert!(coarse.is_finite() && fine.is_finite());
        assert!(
            (0.3..3.0).contains(&(coarse / fine)),
            "ratio drifted: {coarse} vs {fine}"
        );
    }

    #[test]
    fn grid_validation_rejects_degenerate_setups() {
        let m = brownian_model();
        assert!(matches!(
            simulate_sde(&m, (0.0, 0.0), &SimGrid::new(1.0, 0.9), 0),
            Err(SimError::InvalidGrid { .. })
        ));
        assert!(matches!(
            simulate_sde(&m, (0.0, 0.0), &SimGrid::new(-1.0, 1e-3), 0),
            Err(SimError::InvalidGrid { .. })
        ));
        let grid = SimGrid::new(1.0, 1e-2);
        let phi = Path::from_fns(0.0, 2.0, 100, |_| 0.0, |_| 0.0, None).unwrap();
        assert!(matches!(
            estimate_tube_probability(&m, &phi, 0.5, 10, &grid, 0),
            Err(SimError::GridMismatch(_))
        ));
    }
}
