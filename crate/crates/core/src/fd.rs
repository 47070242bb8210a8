//! Finite-difference stencils and quadrature on uniform grids.

/// Composite Simpson integral of nodal values with spacing `dt`.
///
/// For an odd interval count the last three intervals use the 3/8 rule,
/// keeping the composite scheme fourth-order accurate throughout.
/// Requires at least two intervals.
pub fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n >= 2, "simpson needs at least two intervals");
    if n % 2 == 0 {
        return simpson_even(values, dt);
    }
    if n == 3 {
        return three_eighths(values, dt);
    }
    simpson_even(&values[..n - 2], dt) + three_eighths(&values[n - 3..], dt)
}

fn simpson_even(values: &[f64], dt: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n % 2 == 0);
    let mut s = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * dt / 3.0
}

fn three_eighths(values: &[f64], dt: f64) -> f64 {
    debug_assert_eq!(values.len(), 4);
    (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3]) * dt * 3.0 / 8.0
}

/// First derivative at every node.
///
/// Fourth-order central stencils inside, matching one-sided fourth-order
/// stencils at the two nodes of each boundary; falls back to second order
/// when fewer than five nodes are available.
pub fn deriv1(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3, "deriv1 needs at least three nodes");
    if n < 5 {
        return deriv1_order2(values, dt);
    }
    let f = values;
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * dt);
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * dt);
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * dt);
    }
    d[n - 2] =
        (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * dt);
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        / (12.0 * dt);
    d
}

fn deriv1_order2(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    let f = values;
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dt);
    }
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
    d
}

/// Second difference at interior nodes `1..n-1` (second-order accurate).
pub fn second_diff_interior(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3);
    (1..n - 1)
        .map(|i| (values[i - 1] - 2.0 * values[i] + values[i + 1]) / (dt * dt))
        .collect()
}

/// Fourth difference at interior nodes `2..n-2` (second-order accurate).
pub fn fourth_diff_interior(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5);
    let h4 = dt.powi(4);
    (2..n - 2)
        .map(|i| {
            (values[i - 2] - 4.0 * values[i - 1] + 6.0 * values[i] - 4.0 * values[i + 1]
                + values[i + 2])
                / h4
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn grid(n: usize, t1: f64) -> (Vec<f64>, f64) {
        let dt = t1 / n as f64;
        ((0..=n).map(|i| i as f64 * dt).collect(), dt)
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [2usize, 3, 4, 5, 10, 11] {
            let (ts, dt) = grid(n, 2.0);
            let vals: Vec<f64> = ts.iter().map(|t| 1.0 + t - t * t + 0.5 * t * t * t).collect();
            // int_0^2 = 2 + 2 - 8/3 + 2 = 10/3
            assert_relative_eq!(simpson(&vals, dt), 10.0 / 3.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn simpson_fourth_order_on_smooth_integrand() {
        let exact = 1.0 - (-2.0f64).exp();
        let err = |n: usize| {
            let (ts, dt) = grid(n, 2.0);
            let vals: Vec<f64> = ts.iter().map(|t| (-t).exp()).collect();
            (simpson(&vals, dt) - exact).abs()
        };
        let ratio = err(40) / err(80);
        assert!((10.0..25.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn deriv1_matches_analytic_derivative() {
        let (ts, dt) = grid(200, 2.0);
        let vals: Vec<f64> = ts.iter().map(|t| (1.5 * t).sin()).collect();
        let d = deriv1(&vals, dt);
        for (t, di) in ts.iter().zip(&d) {
            assert_abs_diff_eq!(*di, 1.5 * (1.5 * t).cos(), epsilon = 1e-6);
        }
    }

    #[test]
    fn interior_differences_converge() {
        let (ts, dt) = grid(400, 1.0);
        let vals: Vec<f64> = ts.iter().map(|t| (2.0 * t).exp()).collect();
        let d2 = second_diff_interior(&vals, dt);
        let d4 = fourth_diff_interior(&vals, dt);
        for (i, v) in d2.iter().enumerate() {
            let t = ts[i + 1];
            assert_relative_eq!(*v, 4.0 * (2.0 * t).exp(), max_relative = 1e-4);
        }
        for (i, v) in d4.iter().enumerate() {
            let t = ts[i + 2];
            assert_relative_eq!(*v, 16.0 * (2.0 * t).exp(), max_relative = 1e-3);
        }
    }
}
