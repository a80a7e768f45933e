//! Grids on an interval, trapezoid quadrature and weighted Lebesgue norms.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How knots are distributed between the endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Grading {
    Uniform,
    /// Cell widths grow by `ratio` from left to right, so knots cluster toward `a`
    /// when `ratio > 1`.
    Geometric(f64),
}

/// Strictly increasing finite knots `t_0 < ... < t_N`.
///
/// `make_grid` always produces at least two cells; `from_knots` also accepts a
/// single cell so that midpoint grids of two-cell grids stay representable.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    knots: Arc<[f64]>,
}

impl Grid {
    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a grid needs at least 2 knots, got {}",
                knots.len()
            )));
        }
        if knots.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite knot".into()));
        }
        if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "knots not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            knots: knots.into(),
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn widths(&self) -> Vec<f64> {
        self.knots.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.knots.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max)
    }

    /// Index of the cell containing `x` (clamped to the first/last cell).
    pub fn locate(&self, x: f64) -> usize {
        let k = &self.knots;
        match k.binary_search_by(|t| t.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(k.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(k.len() - 2),
        }
    }

    /// Two grids are treated as the same when their knots agree exactly.
    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.knots, &other.knots) || self.knots == other.knots
    }
}

pub fn make_grid(a: f64, b: f64, n: usize, grading: Grading) -> Result<Grid> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidParameter(format!("need a < b, got ({a}, {b})")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2 cells, got {n}")));
    }
    let len = b - a;
    let mut knots = Vec::with_capacity(n + 1);
    match grading {
        Grading::Uniform => {
            for i in 0..=n {
                knots.push(a + len * (i as f64) / (n as f64));
            }
        }
        Grading::Geometric(ratio) => {
            if !(ratio.is_finite() && ratio > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "geometric ratio must be positive, got {ratio}"
                )));
            }
            // h_0 (1 + r + ... + r^{n-1}) = b - a
            let sum = if (ratio - 1.0).abs() < 1e-14 {
                n as f64
            } else {
                (ratio.powi(n as i32) - 1.0) / (ratio - 1.0)
            };
            let h0 = len / sum;
            let mut acc = 0.0;
            let mut w = h0;
            knots.push(a);
            for _ in 1..n {
                acc += w;
                knots.push(a + acc);
                w *= ratio;
            }
            knots.push(b);
        }
    }
    Grid::from_knots(knots)
}

/// Geometric grid whose knots are exactly `a * q^k`, `q = (b/a)^(1/n)`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Result<Grid> {
    if a <= 0.0 {
        return Err(Error::InvalidParameter("log grid needs a > 0".into()));
    }
    if a >= b || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need 0 < a < b and n >= 2, got ({a}, {b}, {n})"
        )));
    }
    let la = a.ln();
    let lb = b.ln();
    let mut knots: Vec<f64> = (0..=n)
        .map(|k| (la + (lb - la) * k as f64 / n as f64).exp())
        .collect();
    knots[0] = a;
    knots[n] = b;
    Grid::from_knots(knots)
}

/// Values attached to the knots of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Structural(format!(
                "{} values for {} knots",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at knot {i} (t = {})",
                grid.knots()[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.knots().iter().map(|&t| f(t)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Piecewise-linear interpolation, constant extrapolation outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let k = self.grid.knots();
        if x <= k[0] {
            return self.values[0];
        }
        if x >= k[k.len() - 1] {
            return self.values[k.len() - 1];
        }
        let i = self.grid.locate(x);
        let w = (x - k[i]) / (k[i + 1] - k[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "value"])?;
        for (t, v) in self.grid.knots().iter().zip(&self.values) {
            wr.write_record([t.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "t" {
            return Err(Error::Structural(
                "expected CSV header `t,value`".to_string(),
            ));
        }
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Structural(format!("bad number {s:?}: {e}")))
            };
            knots.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        Self::new(Grid::from_knots(knots)?, values)
    }
}

/// Composite trapezoid rule; exact for integrands linear between knots.
pub fn integrate(g: &SampledFunction) -> f64 {
    let k = g.grid.knots();
    let v = &g.values;
    (0..k.len() - 1)
        .map(|i| 0.5 * (k[i + 1] - k[i]) * (v[i] + v[i + 1]))
        .sum()
}

/// Running trapezoid integral from the first knot; entry 0 is zero.
pub fn cumulative_integral(g: &SampledFunction) -> Vec<f64> {
    let k = g.grid.knots();
    let v = &g.values;
    let mut out = Vec::with_capacity(k.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..k.len() - 1 {
        acc += 0.5 * (k[i + 1] - k[i]) * (v[i] + v[i + 1]);
        out.push(acc);
    }
    out
}

/// `(int |g|^p w)^(1/p)` by the trapezoid rule.
pub fn weighted_lp_norm(g: &SampledFunction, w: &SampledFunction, p: f64) -> Result<f64> {
    if !g.grid.same_as(&w.grid) {
        return Err(Error::Structural("norm of functions on different grids".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("need p >= 1, got {p}")));
    }
    if w.values.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParameter("negative weight".into()));
    }
    let integrand: Vec<f64> = g
        .values
        .iter()
        .zip(&w.values)
        .map(|(gv, wv)| gv.abs().powf(p) * wv)
        .collect();
    let s = SampledFunction {
        grid: g.grid.clone(),
        values: integrand,
    };
    Ok(integrate(&s).powf(1.0 / p))
}
