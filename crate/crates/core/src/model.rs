//! Degenerate SDE models and the Onsager-Machlup function/action.
//!
//! The model is
//!
//! ```text
//! dX = g(X, Y) dt
//! dY = f(X, Y) dt + c dW + dL
//! ```
//!
//! and the OM function along a reference path `φ = (φ1, φ2)` with
//! `φ̇1 = g(φ1, φ2)` is
//!
//! ```text
//! OM(φ, φ̇) = 1/2 ((φ̇2 - f(φ1, φ2) + Λ) / c)^2 + 1/2 ∂f/∂y(φ1, φ2)
//! ```
//!
//! with `Λ = ∫_{|ξ|<1} ξ ν(dξ)` (zero for pure Brownian noise). The
//! additive-constant ambiguity is fixed exactly as written above; all
//! reported actions use this normalization.

use std::sync::Arc;

use thiserror::Error;

use crate::fd;
use crate::levy::AlphaStableMeasure;
use crate::path::Path;
use crate::rng::stream_rng;

type Surface = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Curve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("noise intensity c must be positive, got {0}")]
    InvalidNoiseIntensity(f64),
    #[error("{coefficient} disagrees with finite differences at ({x}, {y}): supplied {supplied}, measured {measured}")]
    PartialMismatch {
        coefficient: &'static str,
        x: f64,
        y: f64,
        supplied: f64,
        measured: f64,
    },
    #[error("damping gamma must be positive, got {0}")]
    InvalidDamping(f64),
    #[error("thermal parameter mu must be positive, got {0}")]
    InvalidThermal(f64),
    #[error("grid too coarse: {intervals} intervals, need at least {required}")]
    GridTooCoarse { intervals: usize, required: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(
        "kinematic constraint violated: max |phi1' - g(phi1, phi2)| = {residual} > {tolerance}"
    )]
    ConstraintViolation { residual: f64, tolerance: f64 },
    #[error("path csv: {0}")]
    Csv(#[from] Arc<csv::Error>),
}

impl From<csv::Error> for ModelError {
    fn from(e: csv::Error) -> Self {
        ModelError::Csv(Arc::new(e))
    }
}

/// The degenerate model: drifts, their partials, noise intensity, and the
/// attached jump measure (`None` for pure Brownian noise).
///
/// The regularity assumptions behind the OM formula (`f ∈ C_b^2`,
/// `g ∈ C_b^1`) are the caller's responsibility; they are documented, not
/// enforced — the quadratic-potential Langevin model below violates
/// boundedness and is used throughout regardless.
#[derive(Clone)]
pub struct DegenerateModel {
    g: Surface,
    f: Surface,
    g_x: Surface,
    g_y: Surface,
    f_x: Surface,
    f_y: Surface,
    f_xy: Surface,
    f_yy: Surface,
    c: f64,
    measure: Option<AlphaStableMeasure>,
}

impl std::fmt::Debug for DegenerateModel {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("DegenerateModel")
            .field("c", &self.c)
            .field("measure", &self.measure)
            .finish_non_exhaustive()
    }
}

/// Bundle of drift partial derivatives for [`DegenerateModel::new`].
#[derive(Clone)]
pub struct Partials {
    pub g_x: Surface,
    pub g_y: Surface,
    pub f_x: Surface,
    pub f_y: Surface,
    pub f_xy: Surface,
    pub f_yy: Surface,
}

impl DegenerateModel {
    /// Build a model with analytic partials.
    ///
    /// The supplied partials are cross-checked against central finite
    /// differences of `f` and `g` at 16 deterministic sample points in
    /// `[-2, 2]^2` to 1e-5 relative tolerance; use
    /// [`DegenerateModel::new_unchecked`] to skip the self-check.
    pub fn new(
        g: Surface,
        f: Surface,
        partials: Partials,
        c: f64,
        measure: Option<AlphaStableMeasure>,
    ) -> Result<Self, ModelError> {
        let model = Self::new_unchecked(g, f, partials, c, measure)?;
        model.self_check()?;
        Ok(model)
    }

    /// Build a model without the finite-difference self-check.
    pub fn new_unchecked(
        g: Surface,
        f: Surface,
        partials: Partials,
        c: f64,
        measure: Option<AlphaStableMeasure>,
    ) -> Result<Self, ModelError> {
        if !c.is_finite() || c <= 0.0 {
            return Err(ModelError::InvalidNoiseIntensity(c));
        }
        Ok(Self {
            g,
            f,
            g_x: partials.g_x,
            g_y: partials.g_y,
            f_x: partials.f_x,
            f_y: partials.f_y,
            f_xy: partials.f_xy,
            f_yy: partials.f_yy,
            c,
            measure,
        })
    }

    /// Build a model from the drifts alone, deriving all partials by
    /// central finite differences (step `1e-6 * (1 + |coordinate|)`).
    ///
    /// Convenient for quick experiments; costs about five digits of
    /// accuracy in the partials relative to analytic expressions, which
    /// feeds the Hamilton-Pontryagin right-hand side directly.
    pub fn from_drifts(
        g: Surface,
        f: Surface,
        c: f64,
        measure: Option<AlphaStableMeasure>,
    ) -> Result<Self, ModelError> {
        let partials = Partials {
            g_x: fd_x(g.clone()),
            g_y: fd_y(g.clone()),
            f_x: fd_x(f.clone()),
            f_y: fd_y(f.clone()),
            f_xy: fd_xy(f.clone()),
            f_yy: fd_yy(f.clone()),
        };
        Self::new_unchecked(g, f, partials, c, measure)
    }

    fn self_check(&self) -> Result<(), ModelError> {
        use rand::Rng;
        let mut rng = stream_rng(0x5E1F_C0DE, 0);
        let tol = 1e-5;
        for _ in 0..16 {
            let x = rng.random_range(-2.0..2.0);
            let y = rng.random_range(-2.0..2.0);
            let checks: [(&'static str, f64, f64); 6] = [
                ("g_x", (self.g_x)(x, y), fd_x(self.g.clone())(x, y)),
                ("g_y", (self.g_y)(x, y), fd_y(self.g.clone())(x, y)),
                ("f_x", (self.f_x)(x, y), fd_x(self.f.clone())(x, y)),
                ("f_y", (self.f_y)(x, y), fd_y(self.f.clone())(x, y)),
                ("f_xy", (self.f_xy)(x, y), fd_xy(self.f.clone())(x, y)),
                ("f_yy", (self.f_yy)(x, y), fd_yy(self.f.clone())(x, y)),
            ];
            for (name, supplied, measured) in checks {
                if (supplied - measured).abs() > tol * (1.0 + supplied.abs()) {
                    return Err(ModelError::PartialMismatch {
                        coefficient: name,
                        x,
                        y,
                        supplied,
                        measured,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn g(&self, x: f64, y: f64) -> f64 {
        (self.g)(x, y)
    }

    pub fn f(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    pub fn g_x(&self, x: f64, y: f64) -> f64 {
        (self.g_x)(x, y)
    }

    pub fn g_y(&self, x: f64, y: f64) -> f64 {
        (self.g_y)(x, y)
    }

    pub fn f_x(&self, x: f64, y: f64) -> f64 {
        (self.f_x)(x, y)
    }

    pub fn f_y(&self, x: f64, y: f64) -> f64 {
        (self.f_y)(x, y)
    }

    pub fn f_xy(&self, x: f64, y: f64) -> f64 {
        (self.f_xy)(x, y)
    }

    pub fn f_yy(&self, x: f64, y: f64) -> f64 {
        (self.f_yy)(x, y)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn measure(&self) -> Option<&AlphaStableMeasure> {
        self.measure.as_ref()
    }

    /// `Λ = ∫_{|ξ|<1} ξ ν(dξ)`, or zero without a jump measure.
    pub fn lambda_mean(&self) -> f64 {
        self.measure.map_or(0.0, |m| m.small_jump_mean())
    }
}

fn fd_x(h: Surface) -> Surface {
    Arc::new(move |x: f64, y: f64| {
        let s = 1e-6 * (1.0 + x.abs());
        (h(x + s, y) - h(x - s, y)) / (2.0 * s)
    })
}

fn fd_y(h: Surface) -> Surface {
    Arc::new(move |x: f64, y: f64| {
        let s = 1e-6 * (1.0 + y.abs());
        (h(x, y + s) - h(x, y - s)) / (2.0 * s)
    })
}

fn fd_xy(h: Surface) -> Surface {
    Arc::new(move |x: f64, y: f64| {
        let sx = 1e-5 * (1.0 + x.abs());
        let sy = 1e-5 * (1.0 + y.abs());
        (h(x + sx, y + sy) - h(x + sx, y - sy) - h(x - sx, y + sy) + h(x - sx, y - sy))
            / (4.0 * sx * sy)
    })
}

fn fd_yy(h: Surface) -> Surface {
    Arc::new(move |x: f64, y: f64| {
        let s = 1e-5 * (1.0 + y.abs());
        (h(x, y + s) - 2.0 * h(x, y) + h(x, y - s)) / (s * s)
    })
}

/// Built-in potentials for the kinetic Langevin model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinPotential {
    /// `U(x) = -x^2 / 2` (inverted parabola).
    Quadratic,
    /// `U(x) = (x^2 - 1)^2 / 4` (wells at ±1, barrier 1/4 at the origin).
    DoubleWell,
    /// `U(x) = x^2 / 2`.
    Harmonic,
}

impl BuiltinPotential {
    pub fn u(&self, x: f64) -> f64 {
        match self {
            Self::Quadratic => -0.5 * x * x,
            Self::DoubleWell => 0.25 * (x * x - 1.0).powi(2),
            Self::Harmonic => 0.5 * x * x,
        }
    }

    pub fn u1(&self, x: f64) -> f64 {
        match self {
            Self::Quadratic => -x,
            Self::DoubleWell => x * (x * x - 1.0),
            Self::Harmonic => x,
        }
    }

    pub fn u2(&self, x: f64) -> f64 {
        match self {
            Self::Quadratic => -1.0,
            Self::DoubleWell => 3.0 * x * x - 1.0,
            Self::Harmonic => 1.0,
        }
    }

    pub fn u3(&self, x: f64) -> f64 {
        match self {
            Self::Quadratic | Self::Harmonic => 0.0,
            Self::DoubleWell => 6.0 * x,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::DoubleWell => "double-well",
            Self::Harmonic => "harmonic",
        }
    }
}

impl std::str::FromStr for BuiltinPotential {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadratic" => Ok(Self::Quadratic),
            "double-well" | "double_well" => Ok(Self::DoubleWell),
            "harmonic" => Ok(Self::Harmonic),
            other => Err(format!(
                "unknown potential {other:?} (expected quadratic, double-well, or harmonic)"
            )),
        }
    }
}

/// Second-order underdamped kinetic Langevin system
/// `Ẍ + γ Ẋ = -U'(X) + sqrt(μ γ) Ẇ + L̇`.
///
/// As a degenerate model: `g(x, y) = y`, `f(x, y) = -γ y - U'(x)`,
/// `c = sqrt(μ γ)`.
#[derive(Clone)]
pub struct LangevinModel {
    u: Curve,
    u1: Curve,
    u2: Curve,
    u3: Curve,
    gamma: f64,
    mu: f64,
    measure: Option<AlphaStableMeasure>,
}

impl std::fmt::Debug for LangevinModel {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("LangevinModel")
            .field("gamma", &self.gamma)
            .field("mu", &self.mu)
            .field("measure", &self.measure)
            .finish_non_exhaustive()
    }
}

impl LangevinModel {
    /// Build from a potential with three derivatives.
    pub fn new(
        u: Curve,
        u1: Curve,
        u2: Curve,
        u3: Curve,
        gamma: f64,
        mu: f64,
        measure: Option<AlphaStableMeasure>,
    ) -> Result<Self, ModelError> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(ModelError::InvalidDamping(gamma));
        }
        if !mu.is_finite() || mu <= 0.0 {
            return Err(ModelError::InvalidThermal(mu));
        }
        Ok(Self {
            u,
            u1,
            u2,
            u3,
            gamma,
            mu,
            measure,
        })
    }

    pub fn with_potential(
        p: BuiltinPotential,
        gamma: f64,
        mu: f64,
        measure: Option<AlphaStableMeasure>,
    ) -> Result<Self, ModelError> {
        Self::new(
            Arc::new(move |x| p.u(x)),
            Arc::new(move |x| p.u1(x)),
            Arc::new(move |x| p.u2(x)),
            Arc::new(move |x| p.u3(x)),
            gamma,
            mu,
            measure,
        )
    }

    pub fn u(&self, x: f64) -> f64 {
        (self.u)(x)
    }

    pub fn u1(&self, x: f64) -> f64 {
        (self.u1)(x)
    }

    pub fn u2(&self, x: f64) -> f64 {
        (self.u2)(x)
    }

    pub fn u3(&self, x: f64) -> f64 {
        (self.u3)(x)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn c(&self) -> f64 {
        (self.mu * self.gamma).sqrt()
    }

    pub fn measure(&self) -> Option<&AlphaStableMeasure> {
        self.measure.as_ref()
    }

    pub fn lambda_mean(&self) -> f64 {
        self.measure.map_or(0.0, |m| m.small_jump_mean())
    }

    /// View as the general degenerate model.
    pub fn to_degenerate(&self) -> DegenerateModel {
        let gamma = self.gamma;
        let u1 = self.u1.clone();
        let u2 = self.u2.clone();
        DegenerateModel::new_unchecked(
            Arc::new(|_, y| y),
            Arc::new(move |x, y| -gamma * y - u1(x)),
            Partials {
                g_x: Arc::new(|_, _| 0.0),
                g_y: Arc::new(|_, _| 1.0),
                f_x: Arc::new(move |x, _| -u2(x)),
                f_y: Arc::new(move |_, _| -gamma),
                f_xy: Arc::new(|_, _| 0.0),
                f_yy: Arc::new(|_, _| 0.0),
            },
            self.c(),
            self.measure,
        )
        .expect("c = sqrt(mu gamma) > 0")
    }
}

/// Onsager-Machlup function at a single phase point.
pub fn om_function(model: &DegenerateModel, x: f64, y: f64, ydot: f64) -> f64 {
    let lambda = model.lambda_mean();
    let num = (ydot - model.f(x, y) + lambda) / model.c();
    0.5 * num * num + 0.5 * model.f_y(x, y)
}

/// Max-norm residual of the kinematic constraint `φ̇1 = g(φ1, φ2)`.
///
/// `φ̇1` is measured by fourth-order central differences of the `phi1`
/// channel, so solver-produced paths report residuals at the level of
/// the difference stencil, not zero.
pub fn kinematic_residual(model: &DegenerateModel, path: &Path) -> f64 {
    let dphi1 = fd::deriv1(path.phi1(), path.dt());
    dphi1
        .iter()
        .zip(path.phi1().iter().zip(path.phi2()))
        .map(|(d, (&x, &y))| (d - model.g(x, y)).abs())
        .fold(0.0f64, f64::max)
}

/// OM action along a path: composite-Simpson quadrature of
/// [`om_function`].
///
/// `φ̇2` is taken from the path's `dphi2` channel when present, otherwise
/// from fourth-order central differences of `phi2`. The kinematic
/// constraint is not checked here; see [`action_checked`].
pub fn action(model: &DegenerateModel, path: &Path) -> Result<f64, ModelError> {
    if path.n() < 2 {
        return Err(ModelError::GridTooCoarse {
            intervals: path.n(),
            required: 2,
        });
    }
    let ydot: Vec<f64> = match path.dphi2() {
        Some(d) => d.to_vec(),
        None => fd::deriv1(path.phi2(), path.dt()),
    };
    let om: Vec<f64> = path
        .phi1()
        .iter()
        .zip(path.phi2())
        .zip(&ydot)
        .map(|((&x, &y), &d)| om_function(model, x, y, d))
        .collect();
    Ok(fd::simpson(&om, path.dt()))
}

/// [`action`] preceded by the kinematic-constraint check at tolerance
/// `constraint_tol`.
pub fn action_checked(
    model: &DegenerateModel,
    path: &Path,
    constraint_tol: f64,
) -> Result<f64, ModelError> {
    let residual = kinematic_residual(model, path);
    if residual > constraint_tol {
        return Err(ModelError::ConstraintViolation {
            residual,
            tolerance: constraint_tol,
        });
    }
    action(model, path)
}

/// Pointwise residual of the fourth-order Euler-Lagrange equation
///
/// ```text
/// φ1'''' + φ1''(2U''(φ1) - γ^2) + (φ1')^2 U'''(φ1) + (U'(φ1) + Λ) U''(φ1)
/// ```
///
/// evaluated by centered finite differences on the interior nodes
/// `2..=n-2` (the returned vector has `n - 3` entries, entry `k`
/// belonging to node `k + 2`).
///
/// When the path carries `phi2`/`dphi2` channels they are used as `φ1'`
/// and `φ1''`, and only the fourth derivative is formed by differencing
/// (a second difference of `dphi2`); without channels, all derivatives
/// come from `phi1` itself. Both routes are second-order accurate in the
/// grid spacing.
pub fn variational_residual(model: &LangevinModel, path: &Path) -> Result<Vec<f64>, ModelError> {
    let n = path.n();
    if n < 8 {
        return Err(ModelError::GridTooCoarse {
            intervals: n,
            required: 8,
        });
    }
    let dt = path.dt();
    let lambda = model.lambda_mean();
    let gamma2 = model.gamma * model.gamma;

    let (d1, d2, d4): (Vec<f64>, Vec<f64>, Vec<f64>) = match path.dphi2() {
        Some(ddot) => {
            // phi2 = phi1', dphi2 = phi1''; fourth derivative as the
            // second difference of dphi2 (restricted to nodes 2..=n-2).
            let d4_full = fd::second_diff_interior(ddot, dt); // nodes 1..=n-1
            let d4 = d4_full[1..d4_full.len() - 1].to_vec();
            let d1 = path.phi2()[2..=n - 2].to_vec();
            let d2 = ddot[2..=n - 2].to_vec();
            (d1, d2, d4)
        }
        None => {
            let d1_full = fd::deriv1(path.phi1(), dt);
            let d2_full = fd::second_diff_interior(path.phi1(), dt); // 1..=n-1
            let d4 = fd::fourth_diff_interior(path.phi1(), dt); // 2..=n-2
            let d1 = d1_full[2..=n - 2].to_vec();
            let d2 = d2_full[1..d2_full.len() - 1].to_vec();
            (d1, d2, d4)
        }
    };

    let residual = (2..=n - 2)
        .zip(d1.iter().zip(d2.iter().zip(&d4)))
        .map(|(i, (&p1, (&p2, &p4)))| {
            let x = path.phi1()[i];
            p4 + p2 * (2.0 * model.u2(x) - gamma2)
                + p1 * p1 * model.u3(x)
                + (model.u1(x) + lambda) * model.u2(x)
        })
        .collect();
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::AlphaStableMeasure;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn quadratic_langevin(measure: Option<AlphaStableMeasure>) -> LangevinModel {
        LangevinModel::with_potential(BuiltinPotential::Quadratic, 3.0, 0.8, measure).unwrap()
    }

    fn fig1_measure() -> AlphaStableMeasure {
        AlphaStableMeasure::new(0.5, 0.5).unwrap()
    }

    #[test]
    fn langevin_reduction_matches_the_contract() {
        let m = quadratic_langevin(Some(fig1_measure())).to_degenerate();
        for (x, y) in [(0.3, -1.2), (-2.0, 0.5), (1.0, 1.0)] {
            assert_eq!(m.g(x, y), y);
            assert_relative_eq!(m.f(x, y), -3.0 * y + x, epsilon = 1e-14);
            assert_eq!(m.f_y(x, y), -3.0);
            assert_eq!(m.f_x(x, y), 1.0);
            assert_eq!(m.f_yy(x, y), 0.0);
            assert_eq!(m.f_xy(x, y), 0.0);
            assert_eq!(m.g_x(x, y), 0.0);
            assert_eq!(m.g_y(x, y), 1.0);
        }
        assert_relative_eq!(m.c(), (0.8f64 * 3.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn om_function_examples() {
        // Square term tuned to vanish leaves -gamma/2.
        let m = quadratic_langevin(Some(fig1_measure())).to_degenerate();
        let lambda = m.lambda_mean();
        let ydot = m.f(0.0, 0.0) - lambda;
        assert_relative_eq!(om_function(&m, 0.0, 0.0, ydot), -1.5, epsilon = 1e-12);

        // f = 0, Lambda = 0, c = 1: pure kinetic term.
        let zero = DegenerateModel::new_unchecked(
            Arc::new(|_, y| y),
            Arc::new(|_, _| 0.0),
            Partials {
                g_x: Arc::new(|_, _| 0.0),
                g_y: Arc::new(|_, _| 1.0),
                f_x: Arc::new(|_, _| 0.0),
                f_y: Arc::new(|_, _| 0.0),
                f_xy: Arc::new(|_, _| 0.0),
                f_yy: Arc::new(|_, _| 0.0),
            },
            1.0,
            None,
        )
        .unwrap();
        assert_relative_eq!(om_function(&zero, 5.0, -3.0, 2.0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn brownian_only_model_drops_the_jump_shift() {
        let with_jumps = quadratic_langevin(Some(fig1_measure())).to_degenerate();
        let brownian = quadratic_langevin(None).to_degenerate();
        let symmetric =
            LangevinModel::with_potential(BuiltinPotential::Quadratic, 3.0, 0.8, Some(AlphaStableMeasure::new(0.5, 0.0).unwrap()))
                .unwrap()
                .to_degenerate();
        assert_eq!(brownian.lambda_mean(), 0.0);
        // A symmetric measure has Lambda = 0 and reproduces the Brownian form.
        for (x, y, d) in [(0.0, 0.0, 1.0), (1.0, -0.5, 0.2), (-1.5, 2.0, -3.0)] {
            assert_eq!(
                om_function(&brownian, x, y, d),
                om_function(&symmetric, x, y, d)
            );
            assert_ne!(
                om_function(&brownian, x, y, d),
                om_function(&with_jumps, x, y, d)
            );
        }
    }

    #[test]
    fn constructor_self_check_catches_wrong_partials() {
        let bad = DegenerateModel::new(
            Arc::new(|_, y| y),
            Arc::new(|x, y| -3.0 * y + x),
            Partials {
                g_x: Arc::new(|_, _| 0.0),
                g_y: Arc::new(|_, _| 1.0),
                f_x: Arc::new(|_, _| 1.0),
                f_y: Arc::new(|_, _| 3.0), // sign flipped
                f_xy: Arc::new(|_, _| 0.0),
                f_yy: Arc::new(|_, _| 0.0),
            },
            1.0,
            None,
        );
        assert!(matches!(
            bad,
            Err(ModelError::PartialMismatch {
                coefficient: "f_y",
                ..
            })
        ));
        // Same coefficients pass unchecked.
        assert!(DegenerateModel::new_unchecked(
            Arc::new(|_, y| y),
            Arc::new(|x, y| -3.0 * y + x),
            Partials {
                g_x: Arc::new(|_, _| 0.0),
                g_y: Arc::new(|_, _| 1.0),
                f_x: Arc::new(|_, _| 1.0),
                f_y: Arc::new(|_, _| 3.0),
                f_xy: Arc::new(|_, _| 0.0),
                f_yy: Arc::new(|_, _| 0.0),
            },
            1.0,
            None,
        )
        .is_ok());
    }

    #[test]
    fn from_drifts_matches_analytic_partials() {
        let m = DegenerateModel::from_drifts(
            Arc::new(|x, y| x * y),
            Arc::new(|x, y| (x * y).sin()),
            2.0,
            None,
        )
        .unwrap();
        let (x, y) = (0.7, -0.4);
        assert_relative_eq!(m.g_x(x, y), y, epsilon = 1e-8);
        assert_relative_eq!(m.f_x(x, y), y * (x * y).cos(), epsilon = 1e-8);
        assert_relative_eq!(
            m.f_xy(x, y),
            (x * y).cos() - x * y * (x * y).sin(),
            epsilon = 1e-5
        );
        assert_relative_eq!(m.f_yy(x, y), -x * x * (x * y).sin(), epsilon = 1e-5);
    }

    #[test]
    fn constant_path_action_is_om_times_horizon() {
        // phi = (-1, 0), quadratic gamma = 3, mu = 0.8, Lambda from
        // (alpha, beta) = (0.5, 0.5), T = 2. OM is constant:
        // 0.5 (1 + Lambda)^2 / 2.4 - 1.5, so Simpson is exact.
        let m = quadratic_langevin(Some(fig1_measure())).to_degenerate();
        let lambda = m.lambda_mean();
        let path = Path::from_fns(0.0, 2.0, 2000, |_| -1.0, |_| 0.0, Some(&|_| 0.0)).unwrap();
        let expected = 2.0 * (0.5 * (1.0 + lambda) * (1.0 + lambda) / 2.4 - 1.5);
        let i = action(&m, &path).unwrap();
        assert_abs_diff_eq!(i, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(i, -2.184_566_873_377_183, epsilon = 1e-12);
        // The value quoted to six digits:
        assert_abs_diff_eq!(i, -2.18462, epsilon = 1e-4);
    }

    #[test]
    fn constant_path_violates_the_constraint_only_when_moving() {
        let m = quadratic_langevin(None).to_degenerate();
        // Constant path with zero velocity satisfies phi1' = phi2 = 0.
        let ok = Path::from_fns(0.0, 2.0, 50, |_| -1.0, |_| 0.0, None).unwrap();
        assert!(action_checked(&m, &ok, 1e-6).is_ok());
        // Nonzero phi2 on a constant phi1 breaks it.
        let bad = Path::from_fns(0.0, 2.0, 50, |_| -1.0, |_| 1.0, None).unwrap();
        let err = action_checked(&m, &bad, 1e-6).unwrap_err();
        assert!(matches!(
            err,
            ModelError::ConstraintViolation { residual, .. } if (residual - 1.0).abs() < 1e-6
        ));
    }

    #[test]
    fn action_lower_bound_for_quadratic_langevin() {
        // Square term is nonnegative and f_y = -gamma, so the action of any
        // path is bounded below by -gamma T / 2 under positive-weight
        // quadrature.
        let m = quadratic_langevin(Some(fig1_measure())).to_degenerate();
        let mut worst = f64::INFINITY;
        for k in 0..100 {
            let (a, b, w) = (
                0.3 * (k as f64 * 0.7).sin(),
                0.2 * (k as f64 * 1.3).cos(),
                1.0 + (k % 5) as f64,
            );
            let phi1 = move |t: f64| a * (w * t).sin() + b * t;
            let phi2 = move |t: f64| a * w * (w * t).cos() + b;
            let dphi2 = move |t: f64| -a * w * w * (w * t).sin();
            let path = Path::from_fns(0.0, 2.0, 400, phi1, phi2, Some(&dphi2)).unwrap();
            let i = action_checked(&m, &path, 1e-4).unwrap();
            worst = worst.min(i);
            assert!(i >= -3.0 - 1e-9, "action {i} below floor");
        }
        assert!(worst < 0.0);
    }

    #[test]
    fn quadrature_error_decays_at_fourth_order() {
        let m = quadratic_langevin(None).to_degenerate();
        let phi1 = |t: f64| (1.1 * t).sin() + 0.3 * t;
        let phi2 = |t: f64| 1.1 * (1.1 * t).cos() + 0.3;
        let dphi2 = |t: f64| -1.21 * (1.1 * t).sin();
        let act = |n: usize| {
            let p = Path::from_fns(0.0, 2.0, n, phi1, phi2, Some(&dphi2)).unwrap();
            action(&m, &p).unwrap()
        };
        let reference = act(4096);
        let e1 = (act(64) - reference).abs();
        let e2 = (act(128) - reference).abs();
        let ratio = e1 / e2;
        assert!((10.0..26.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn variational_residual_vanishes_at_rest_points() {
        // Constant path at a critical point of U with Lambda = 0.
        let m = LangevinModel::with_potential(BuiltinPotential::DoubleWell, 1.0, 0.5, None)
            .unwrap();
        let path = Path::from_fns(0.0, 4.0, 64, |_| 1.0, |_| 0.0, Some(&|_| 0.0)).unwrap();
        let r = variational_residual(&m, &path).unwrap();
        assert_eq!(r.len(), 64 - 3);
        for v in r {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn variational_residual_rejects_coarse_grids() {
        let m = quadratic_langevin(None);
        let path = Path::from_fns(0.0, 1.0, 6, |t| t, |_| 1.0, None).unwrap();
        assert!(matches!(
            variational_residual(&m, &path),
            Err(ModelError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn directional_derivative_matches_el_residual_density() {
        // For the quadratic Langevin action, the first variation in a bump
        // eta (vanishing with its derivative at both ends) is
        // int (EL4 residual / (mu gamma)) eta dt.
        let model = quadratic_langevin(Some(fig1_measure()));
        let m = model.to_degenerate();
        let mugamma = model.mu() * model.gamma();
        let t1 = 2.0;
        let n = 2000;

        let phi1 = |t: f64| -1.0 + t + 0.4 * (1.7 * t).sin();
        let phi1d = |t: f64| 1.0 + 0.68 * (1.7 * t).cos();
        let phi1dd = |t: f64| -1.156 * (1.7 * t).sin();

        let s = move |t: f64| (std::f64::consts::PI * t / t1).sin();
        let sd = move |t: f64| (std::f64::consts::PI / t1) * (std::f64::consts::PI * t / t1).cos();
        let eta = move |t: f64| s(t) * s(t) * (2.3 * t).cos();
        let etad = move |t: f64| {
            2.0 * s(t) * sd(t) * (2.3 * t).cos() - 2.3 * s(t) * s(t) * (2.3 * t).sin()
        };
        let etadd = move |t: f64| {
            let ss = s(t);
            let dd = sd(t);
            let sdd = -(std::f64::consts::PI / t1).powi(2) * ss;
            2.0 * (dd * dd + ss * sdd) * (2.3 * t).cos()
                - 2.0 * 2.3 * 2.0 * ss * dd * (2.3 * t).sin()
                - 2.3 * 2.3 * ss * ss * (2.3 * t).cos()
        };

        let eps = 1e-5;
        let path_at = |scale: f64| {
            Path::from_fns(
                0.0,
                t1,
                n,
                |t| phi1(t) + scale * eta(t),
                |t| phi1d(t) + scale * etad(t),
                Some(&|t| phi1dd(t) + scale * etadd(t)),
            )
            .unwrap()
        };
        let i_plus = action(&m, &path_at(eps)).unwrap();
        let i_minus = action(&m, &path_at(-eps)).unwrap();
        let directional = (i_plus - i_minus) / (2.0 * eps);

        // EL residual density of the base path, evaluated analytically for
        // this closed-form path (independent of the finite differences in
        // variational_residual).
        let lambda = m.lambda_mean();
        let dt = t1 / n as f64;
        let integrand: Vec<f64> = (0..=n)
            .map(|i| {
                let t = i as f64 * dt;
                let x = phi1(t);
                let x1 = phi1d(t);
                let x2 = phi1dd(t);
                let x4 = 0.4 * 1.7f64.powi(4) * (1.7 * t).sin(); // phi1''''
                let res = x4 + x2 * (2.0 * model.u2(x) - 9.0)
                    + x1 * x1 * model.u3(x)
                    + (model.u1(x) + lambda) * model.u2(x);
                res / mugamma * eta(t)
            })
            .collect();
        let inner = fd::simpson(&integrand, dt);
        assert_relative_eq!(directional, inner, max_relative = 1e-4);
    }
}
