//! Run configuration: flat `key = value` lines grouped by `[section]`
//! headers. Unknown sections or keys, duplicate keys, and malformed
//! values are rejected with line numbers. Anything omitted falls back to
//! a documented default, so every command also runs without a file.

use std::collections::HashSet;
use std::fmt::Write as _;

use ompath_core::levy::DEFAULT_JUMP_THRESHOLD;
use ompath_core::model::BuiltinPotential;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // [model]
    pub potential: BuiltinPotential,
    pub gamma: f64,
    pub mu: f64,
    /// `Some((alpha, beta))` for jump noise, `None` for pure Brownian.
    pub levy: Option<(f64, f64)>,
    // [problem]
    pub x0: f64,
    pub y0: Option<f64>,
    pub x_t: f64,
    pub y_t: Option<f64>,
    pub horizon: f64,
    // [numerics]
    pub nodes: usize,
    pub dt: f64,
    pub dt_explicit: bool,
    pub delta: f64,
    pub rtol: f64,
    pub bvp_tol: f64,
    pub seed: u64,
    pub samples: u64,
    pub max_newton: usize,
    pub vel_tol: f64,
    pub max_outer: usize,
    pub restarts: usize,
    pub max_attempts: u64,
    pub solver: SolverChoice,
    // [simulate]
    pub n_keep: usize,
    pub end_tol: Option<f64>,
    // [tube]
    pub epsilons: Vec<f64>,
    pub path_a: Option<String>,
    pub path_b: Option<String>,
    // [output]
    pub out_dir: String,
    pub prefix: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Auto,
    Analytic,
    El4,
    Hp,
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Analytic => "analytic",
            Self::El4 => "el4",
            Self::Hp => "hp",
        }
    }
}

impl Default for RunConfig {
    /// Defaults reproduce the quadratic-potential benchmark setup:
    /// `γ = 3`, `μ = 0.8`, `(α, β) = (0.5, 0.5)`, transition `-1 → 1`
    /// over `T = 2` with free boundary velocities.
    fn default() -> Self {
        Self {
            potential: BuiltinPotential::Quadratic,
            gamma: 3.0,
            mu: 0.8,
            levy: Some((0.5, 0.5)),
            x0: -1.0,
            y0: None,
            x_t: 1.0,
            y_t: None,
            horizon: 2.0,
            nodes: 2000,
            dt: 1e-3,
            dt_explicit: false,
            delta: DEFAULT_JUMP_THRESHOLD,
            rtol: 1e-10,
            bvp_tol: 1e-9,
            seed: 0,
            samples: 100_000,
            max_newton: 50,
            vel_tol: 1e-6,
            max_outer: 500,
            restarts: 5,
            max_attempts: 10_000_000,
            solver: SolverChoice::Auto,
            n_keep: 15,
            end_tol: None,
            epsilons: vec![0.5],
            path_a: None,
            path_b: None,
            out_dir: "out".to_string(),
            prefix: "run".to_string(),
        }
    }
}

impl RunConfig {
    /// Parse and validate the config text; errors carry 1-based line
    /// numbers.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        let mut levy_none = false;
        let mut alpha: Option<f64> = None;
        let mut beta: Option<f64> = None;
        let mut section = String::new();
        let mut seen: HashSet<String> = HashSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| format!("line {lineno}: malformed section header {line:?}"))?
                    .trim();
                match name {
                    "model" | "problem" | "numerics" | "simulate" | "tube" | "output" => {
                        section = name.to_string();
                    }
                    other => return Err(format!("line {lineno}: unknown section [{other}]")),
                }
                continue;
            }
            if section.is_empty() {
                return Err(format!(
                    "line {lineno}: key before any [section] header"
                ));
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {lineno}: expected `key = value`, got {line:?}"))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(format!("line {lineno}: empty value for {key:?}"));
            }
            let qualified = format!("{section}.{key}");
            if !seen.insert(qualified.clone()) {
                return Err(format!("line {lineno}: duplicate key {qualified}"));
            }

            let bad = |what: &str| format!("line {lineno}: {key} must be {what}, got {value:?}");
            let f = || value.parse::<f64>().map_err(|_| bad("a number"));
            let u = || value.parse::<u64>().map_err(|_| bad("a nonnegative integer"));
            let us = || value.parse::<usize>().map_err(|_| bad("a nonnegative integer"));

            match qualified.as_str() {
                "model.potential" => {
                    cfg.potential = value
                        .parse::<BuiltinPotential>()
                        .map_err(|e| format!("line {lineno}: {e}"))?;
                }
                "model.gamma" => cfg.gamma = f()?,
                "model.mu" => cfg.mu = f()?,
                "model.levy" => {
                    if value == "none" {
                        levy_none = true;
                    } else {
                        return Err(bad("`none` (or use alpha/beta keys)"));
                    }
                }
                "model.alpha" => alpha = Some(f()?),
                "model.beta" => beta = Some(f()?),
                "problem.x0" => cfg.x0 = f()?,
                "problem.y0" => cfg.y0 = Some(f()?),
                "problem.xT" => cfg.x_t = f()?,
                "problem.yT" => cfg.y_t = Some(f()?),
                "problem.T" => cfg.horizon = f()?,
                "numerics.n" => cfg.nodes = us()?,
                "numerics.dt" => {
                    cfg.dt = f()?;
                    cfg.dt_explicit = true;
                }
                "numerics.delta" => cfg.delta = f()?,
                "numerics.rtol" => cfg.rtol = f()?,
                "numerics.bvp_tol" => cfg.bvp_tol = f()?,
                "numerics.seed" => cfg.seed = u()?,
                "numerics.samples" => cfg.samples = u()?,
                "numerics.max_newton" => cfg.max_newton = us()?,
                "numerics.vel_tol" => cfg.vel_tol = f()?,
                "numerics.max_outer" => cfg.max_outer = us()?,
                "numerics.restarts" => cfg.restarts = us()?,
                "numerics.max_attempts" => cfg.max_attempts = u()?,
                "numerics.solver" => {
                    cfg.solver = match value {
                        "auto" => SolverChoice::Auto,
                        "analytic" => SolverChoice::Analytic,
                        "el4" => SolverChoice::El4,
                        "hp" => SolverChoice::Hp,
                        _ => return Err(bad("one of auto, analytic, el4, hp")),
                    };
                }
                "simulate.n_keep" => cfg.n_keep = us()?,
                "simulate.end_tol" => {
                    cfg.end_tol = Some(if value == "inf" { f64::INFINITY } else { f()? });
                }
                "tube.epsilon" => {
                    cfg.epsilons = value
                        .split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<f64>()
                                .map_err(|_| bad("a number or comma-separated numbers"))
                        })
                        .collect::<Result<Vec<f64>, String>>()?;
                }
                "tube.path_a" => cfg.path_a = Some(value.to_string()),
                "tube.path_b" => cfg.path_b = Some(value.to_string()),
                "output.dir" => cfg.out_dir = value.to_string(),
                "output.prefix" => cfg.prefix = value.to_string(),
                _ => {
                    return Err(format!(
                        "line {lineno}: unknown key {key:?} in [{section}]"
                    ))
                }
            }
        }

        // Resolve the noise selection.
        match (levy_none, alpha, beta) {
            (true, None, None) => cfg.levy = None,
            (true, _, _) => {
                return Err("levy = none conflicts with alpha/beta keys".to_string())
            }
            (false, Some(a), Some(b)) => cfg.levy = Some((a, b)),
            (false, None, None) => {} // keep default
            (false, _, _) => {
                return Err("alpha and beta must be given together".to_string())
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(format!("problem.T must be positive, got {}", self.horizon));
        }
        if !(self.gamma > 0.0) {
            return Err(format!("model.gamma must be positive, got {}", self.gamma));
        }
        if !(self.mu > 0.0) {
            return Err(format!("model.mu must be positive, got {}", self.mu));
        }
        if let Some((a, b)) = self.levy {
            if !(0.0 < a && a < 1.0) {
                return Err(format!("model.alpha must lie in (0, 1), got {a}"));
            }
            if !(-1.0..=1.0).contains(&b) {
                return Err(format!("model.beta must lie in [-1, 1], got {b}"));
            }
        }
        if self.y0.is_some() != self.y_t.is_some() {
            return Err(
                "problem.y0 and problem.yT must be given together (or both omitted)".to_string(),
            );
        }
        if self.nodes < 2 {
            return Err(format!("numerics.n must be at least 2, got {}", self.nodes));
        }
        if !(self.dt > 0.0) {
            return Err(format!("numerics.dt must be positive, got {}", self.dt));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(format!(
                "numerics.delta must lie in (0, 1), got {}",
                self.delta
            ));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err("tube.epsilon entries must be positive".to_string());
        }
        Ok(())
    }

    /// Echo the fully-resolved configuration in the input format.
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "[model]").unwrap();
        writeln!(s, "potential = {}", self.potential.name()).unwrap();
        writeln!(s, "gamma = {}", self.gamma).unwrap();
        writeln!(s, "mu = {}", self.mu).unwrap();
        match self.levy {
            Some((a, b)) => {
                writeln!(s, "alpha = {a}").unwrap();
                writeln!(s, "beta = {b}").unwrap();
            }
            None => writeln!(s, "levy = none").unwrap(),
        }
        writeln!(s, "\n[problem]").unwrap();
        writeln!(s, "x0 = {}", self.x0).unwrap();
        if let Some(y0) = self.y0 {
            writeln!(s, "y0 = {y0}").unwrap();
        }
        writeln!(s, "xT = {}", self.x_t).unwrap();
        if let Some(y_t) = self.y_t {
            writeln!(s, "yT = {y_t}").unwrap();
        }
        writeln!(s, "T = {}", self.horizon).unwrap();
        writeln!(s, "\n[numerics]").unwrap();
        writeln!(s, "n = {}", self.nodes).unwrap();
        writeln!(s, "dt = {}", self.dt).unwrap();
        writeln!(s, "delta = {}", self.delta).unwrap();
        writeln!(s, "rtol = {}", self.rtol).unwrap();
        writeln!(s, "bvp_tol = {}", self.bvp_tol).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "samples = {}", self.samples).unwrap();
        writeln!(s, "max_newton = {}", self.max_newton).unwrap();
        writeln!(s, "vel_tol = {}", self.vel_tol).unwrap();
        writeln!(s, "max_outer = {}", self.max_outer).unwrap();
        writeln!(s, "restarts = {}", self.restarts).unwrap();
        writeln!(s, "max_attempts = {}", self.max_attempts).unwrap();
        writeln!(s, "solver = {}", self.solver.name()).unwrap();
        writeln!(s, "\n[simulate]").unwrap();
        writeln!(s, "n_keep = {}", self.n_keep).unwrap();
        if let Some(tol) = self.end_tol {
            writeln!(s, "end_tol = {tol}").unwrap();
        }
        writeln!(s, "\n[tube]").unwrap();
        let eps: Vec<String> = self.epsilons.iter().map(|e| e.to_string()).collect();
        writeln!(s, "epsilon = {}", eps.join(",")).unwrap();
        if let Some(p) = &self.path_a {
            writeln!(s, "path_a = {p}").unwrap();
        }
        if let Some(p) = &self.path_b {
            writeln!(s, "path_b = {p}").unwrap();
        }
        writeln!(s, "\n[output]").unwrap();
        writeln!(s, "dir = {}", self.out_dir).unwrap();
        writeln!(s, "prefix = {}", self.prefix).unwrap();
        s
    }
}
