//! Reference paths on a uniform time grid.

use std::io::{Read, Write};

use crate::model::ModelError;

/// Phase-space path `(φ1, φ2)` sampled on a uniform grid of `n` intervals
/// over `[t0, t_end]`, with an optional `φ̇2` channel.
///
/// When a path carries both `phi2` and `dphi2`, consumers treat the three
/// channels as consecutive time derivatives of `phi1` (the kinetic-Langevin
/// layout); otherwise missing derivatives are reconstructed by finite
/// differences.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    t0: f64,
    t_end: f64,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
    dphi2: Option<Vec<f64>>,
}

impl Path {
    pub fn new(t0: f64, t_end: f64, phi1: Vec<f64>, phi2: Vec<f64>) -> Result<Self, ModelError> {
        Self::build(t0, t_end, phi1, phi2, None)
    }

    pub fn with_dphi2(
        t0: f64,
        t_end: f64,
        phi1: Vec<f64>,
        phi2: Vec<f64>,
        dphi2: Vec<f64>,
    ) -> Result<Self, ModelError> {
        Self::build(t0, t_end, phi1, phi2, Some(dphi2))
    }

    fn build(
        t0: f64,
        t_end: f64,
        phi1: Vec<f64>,
        phi2: Vec<f64>,
        dphi2: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(ModelError::InvalidGrid(format!(
                "need finite t0 < t_end, got [{t0}, {t_end}]"
            )));
        }
        if phi1.len() != phi2.len() || dphi2.as_ref().is_some_and(|d| d.len() != phi1.len()) {
            return Err(ModelError::InvalidGrid(
                "channel lengths disagree".to_string(),
            ));
        }
        if phi1.len() < 3 {
            return Err(ModelError::GridTooCoarse {
                intervals: phi1.len().saturating_sub(1),
                required: 2,
            });
        }
        Ok(Self {
            t0,
            t_end,
            phi1,
            phi2,
            dphi2,
        })
    }

    /// Sample closures for `φ1`, `φ2` (and optionally `φ̇2`) on `n` intervals.
    pub fn from_fns(
        t0: f64,
        t_end: f64,
        n: usize,
        phi1: impl Fn(f64) -> f64,
        phi2: impl Fn(f64) -> f64,
        dphi2: Option<&dyn Fn(f64) -> f64>,
    ) -> Result<Self, ModelError> {
        let dt = (t_end - t0) / n as f64;
        let ts = (0..=n).map(|i| t0 + i as f64 * dt);
        let p1: Vec<f64> = ts.clone().map(&phi1).collect();
        let p2: Vec<f64> = ts.clone().map(&phi2).collect();
        let d2 = dphi2.map(|f| ts.map(f).collect());
        Self::build(t0, t_end, p1, p2, d2)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Number of grid intervals.
    pub fn n(&self) -> usize {
        self.phi1.len() - 1
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.n() as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n()).map(|i| self.t(i)).collect()
    }

    pub fn phi1(&self) -> &[f64] {
        &self.phi1
    }

    pub fn phi2(&self) -> &[f64] {
        &self.phi2
    }

    pub fn dphi2(&self) -> Option<&[f64]> {
        self.dphi2.as_deref()
    }

    pub fn start(&self) -> (f64, f64) {
        (self.phi1[0], self.phi2[0])
    }

    pub fn end(&self) -> (f64, f64) {
        (*self.phi1.last().unwrap(), *self.phi2.last().unwrap())
    }

    /// Sup-norm distance over both channels against a path on the same grid.
    pub fn sup_distance(&self, other: &Path) -> Result<f64, ModelError> {
        self.check_same_grid(other)?;
        let d = self
            .phi1
            .iter()
            .zip(&other.phi1)
            .chain(self.phi2.iter().zip(&other.phi2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        Ok(d)
    }

    pub(crate) fn check_same_grid(&self, other: &Path) -> Result<(), ModelError> {
        let same = self.n() == other.n()
            && (self.t0 - other.t0).abs() <= 1e-12 * (1.0 + self.t0.abs())
            && (self.t_end - other.t_end).abs() <= 1e-12 * (1.0 + self.t_end.abs());
        if same {
            Ok(())
        } else {
            Err(ModelError::InvalidGrid(format!(
                "grids disagree: [{}, {}] x {} vs [{}, {}] x {}",
                self.t0,
                self.t_end,
                self.n(),
                other.t0,
                other.t_end,
                other.n()
            )))
        }
    }

    /// Write the path as CSV with header `t,phi1,phi2[,dphi2]`, one row per
    /// grid node, 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_writer(writer);
        let fmt = |x: f64| format!("{x:.16e}");
        if self.dphi2.is_some() {
            w.write_record(["t", "phi1", "phi2", "dphi2"])?;
        } else {
            w.write_record(["t", "phi1", "phi2"])?;
        }
        for i in 0..=self.n() {
            let t = fmt(self.t(i));
            let p1 = fmt(self.phi1[i]);
            let p2 = fmt(self.phi2[i]);
            match &self.dphi2 {
                Some(d) => w.write_record([t, p1, p2, fmt(d[i])])?,
                None => w.write_record([t, p1, p2])?,
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Read a path written by [`Path::write_csv`].
    ///
    /// The grid is taken from the first/last time stamps and the row count;
    /// time stamps must be uniform to within 1e-9 of one step.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, ModelError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let has_dphi2 = match names.as_slice() {
            ["t", "phi1", "phi2"] => false,
            ["t", "phi1", "phi2", "dphi2"] => true,
            _ => {
                return Err(ModelError::InvalidGrid(format!(
                    "unexpected CSV header {names:?}, want t,phi1,phi2[,dphi2]"
                )))
            }
        };
        let parse = |s: &str, row: usize| -> Result<f64, ModelError> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| ModelError::InvalidGrid(format!("row {row}: bad float {s:?}")))
        };
        let mut ts = Vec::new();
        let mut p1 = Vec::new();
        let mut p2 = Vec::new();
        let mut d2 = Vec::new();
        for (idx, rec) in r.records().enumerate() {
            let rec = rec?;
            ts.push(parse(&rec[0], idx)?);
            p1.push(parse(&rec[1], idx)?);
            p2.push(parse(&rec[2], idx)?);
            if has_dphi2 {
                d2.push(parse(&rec[3], idx)?);
            }
        }
        if ts.len() < 3 {
            return Err(ModelError::GridTooCoarse {
                intervals: ts.len().saturating_sub(1),
                required: 2,
            });
        }
        let t0 = ts[0];
        let t_end = *ts.last().unwrap();
        let dt = (t_end - t0) / (ts.len() - 1) as f64;
        for (i, &t) in ts.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-9 * dt.abs().max(1.0) {
                return Err(ModelError::InvalidGrid(format!(
                    "non-uniform grid at row {i}: t = {t}"
                )));
            }
        }
        Self::build(t0, t_end, p1, p2, if has_dphi2 { Some(d2) } else { None })
    }
}
