//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)).
//!
//! Shooting solvers need two modes: a fast terminal-value integration for
//! the Newton residual, and a pass that lands exactly on every node of a
//! uniform output grid (steps are clamped to node boundaries, so no dense
//! output interpolation is required).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h}); the problem looks stiff or blew up")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("state left the finite range at t = {t}")]
    NonFinite { t: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Error weights: b - b_hat.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stepper<'a, const N: usize> {
    rhs: &'a dyn Fn(f64, &[f64; N]) -> [f64; N],
    opts: OdeOptions,
}

impl<const N: usize> Stepper<'_, N> {
    /// One attempted step from (t, y) with size h; returns (y_new, err_norm).
    fn attempt(&self, t: f64, y: &[f64; N], h: f64) -> ([f64; N], f64) {
        let f = self.rhs;
        let k1 = f(t, y);
        let mut s = [0.0; N];
        for i in 0..N {
            s[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = f(t + h / 5.0, &s);
        for i in 0..N {
            s[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = f(t + 3.0 * h / 10.0, &s);
        for i in 0..N {
            s[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = f(t + 4.0 * h / 5.0, &s);
        for i in 0..N {
            s[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = f(t + 8.0 * h / 9.0, &s);
        for i in 0..N {
            s[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = f(t + h, &s);
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let k7 = f(t + h, &y_new);
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / scale) * (e / scale);
        }
        (y_new, (err / N as f64).sqrt())
    }

    /// Integrate from (t0, y0) to t_end; `observe` is called after every
    /// accepted step with the new (t, y).
    fn run(
        &self,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        mut max_h: impl FnMut(f64) -> f64,
        mut observe: impl FnMut(f64, &[f64; N]),
    ) -> Result<[f64; N], OdeError> {
        let span = t_end - t0;
        let mut t = t0;
        let mut y = y0;
        let mut h = (span / 100.0).min(max_h(t0)).max(span * 1e-12);
        let h_floor = span * 1e-14;
        let mut steps = 0usize;
        while t < t_end {
            if steps >= self.opts.max_steps {
                return Err(OdeError::TooManySteps {
                    t,
                    max_steps: self.opts.max_steps,
                });
            }
            steps += 1;
            let h_try = h.min(max_h(t)).min(t_end - t);
            let (y_new, err) = self.attempt(t, &y, h_try);
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                h *= 0.25;
                if h < h_floor {
                    return Err(OdeError::NonFinite { t });
                }
                continue;
            }
            if err <= 1.0 {
                t += h_try;
                y = y_new;
                observe(t, &y);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = h_try * factor;
            } else {
                h = h_try * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < h_floor {
                    return Err(OdeError::StepSizeUnderflow { t, h });
                }
            }
        }
        Ok(y)
    }
}

/// Integrate to `t_end` and return only the final state.
pub fn integrate_final<const N: usize>(
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: OdeOptions,
) -> Result<[f64; N], OdeError> {
    let stepper = Stepper { rhs: &rhs, opts };
    stepper.run(t0, y0, t_end, |_| f64::INFINITY, |_, _| {})
}

/// Integrate and record the state on the uniform grid of `n` intervals
/// over `[t0, t_end]`; steps are clamped so every node is hit exactly.
/// Returns `n + 1` states.
pub fn integrate_to_grid<const N: usize>(
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    n: usize,
    opts: OdeOptions,
) -> Result<Vec<[f64; N]>, OdeError> {
    assert!(n >= 1);
    let dt = (t_end - t0) / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(y0);
    let mut next_node = 1usize;
    let stepper = Stepper { rhs: &rhs, opts };
    stepper.run(
        t0,
        y0,
        t_end,
        |t| {
            // Never step past the next grid node. The 1e-9 nudge keeps a
            // landing a few ulps short of a node from producing a
            // micro-step to that node.
            let k = ((t - t0) / dt + 1e-9).floor() as usize + 1;
            (t0 + (k.min(n)) as f64 * dt - t).max(dt * 1e-9)
        },
        |t, y| {
            while next_node <= n && t >= t0 + next_node as f64 * dt - dt * 1e-7 {
                out.push(*y);
                next_node += 1;
            }
        },
    )?;
    debug_assert_eq!(out.len(), n + 1);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_linear_oscillator_to_high_accuracy() {
        // y'' = -y, y(0) = 1, y'(0) = 0 -> y = cos t.
        let rhs = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let y = integrate_final(rhs, 0.0, [1.0, 0.0], 10.0, OdeOptions::default()).unwrap();
        assert_relative_eq!(y[0], 10.0f64.cos(), epsilon = 1e-8);
        assert_relative_eq!(y[1], -10.0f64.sin(), epsilon = 1e-8);
    }

    #[test]
    fn grid_output_lands_on_every_node() {
        let rhs = |_t: f64, y: &[f64; 1]| [y[0]];
        let states =
            integrate_to_grid(rhs, 0.0, [1.0], 2.0, 200, OdeOptions::default()).unwrap();
        assert_eq!(states.len(), 201);
        for (i, s) in states.iter().enumerate() {
            let t = 2.0 * i as f64 / 200.0;
            assert_relative_eq!(s[0], t.exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y^2 from y(0) = 1 blows up at t = 1.
        let rhs = |_t: f64, y: &[f64; 1]| [y[0] * y[0]];
        let r = integrate_final(rhs, 0.0, [1.0], 2.0, OdeOptions::default());
        assert!(r.is_err());
    }
}
