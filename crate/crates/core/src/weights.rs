//! Weight pairs, the change of variables `Phi(s) = int_0^s phi`, and the
//! constraint tube around the weighted antiderivative.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::data::Data;
use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::power::{power_integral, PiecewisePower};

#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Unit,
    /// `r^{d-1}`, the radial volume density in dimension `d`.
    Power { d: u32 },
    Tabulated(SampledFunction),
}

impl Weight {
    /// Parses `unit`, `power:d=3` or `table:<csv-path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        if spec == "unit" {
            return Ok(Weight::Unit);
        }
        if let Some(rest) = spec.strip_prefix("power:") {
            let d = rest
                .strip_prefix("d=")
                .and_then(|v| v.trim().parse::<u32>().ok())
                .ok_or_else(|| Error::InvalidParameter(format!("bad power weight {spec:?}")))?;
            let w = Weight::Power { d };
            w.validate()?;
            return Ok(w);
        }
        if let Some(path) = spec.strip_prefix("table:") {
            let file = std::fs::File::open(Path::new(path))?;
            let w = Weight::Tabulated(SampledFunction::read_csv(file)?);
            w.validate()?;
            return Ok(w);
        }
        Err(Error::InvalidParameter(format!(
            "unknown weight {spec:?}; expected unit | power:d=<n> | table:<path>"
        )))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Weight::Unit => Ok(()),
            Weight::Power { d } if *d >= 2 => Ok(()),
            Weight::Power { d } => Err(Error::WeightValidity(format!(
                "power weight needs d >= 2, got {d}"
            ))),
            Weight::Tabulated(s) => {
                let v = s.values();
                let k = s.grid().knots();
                for i in 0..v.len() {
                    let interior = i > 0 && i + 1 < v.len();
                    if v[i] < 0.0 || (interior && v[i] <= 0.0) {
                        return Err(Error::WeightValidity(format!(
                            "weight not positive at t = {}",
                            k[i]
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Exponent `k` when the weight is `r^k`.
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Weight::Unit => Some(0.0),
            Weight::Power { d } => Some(*d as f64 - 1.0),
            Weight::Tabulated(_) => None,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            Weight::Unit => 1.0,
            Weight::Power { d } => r.powi(*d as i32 - 1),
            Weight::Tabulated(s) => s.interpolate(r),
        }
    }

    pub fn as_power(&self) -> Option<PiecewisePower> {
        self.exponent()
            .map(|k| PiecewisePower::monomial(1.0, k, 0.0, f64::MAX))
    }

    pub fn label(&self) -> String {
        match self {
            Weight::Unit => "unit".into(),
            Weight::Power { d } => format!("power:d={d}"),
            Weight::Tabulated(_) => "table".into(),
        }
    }
}

/// The fidelity weight `phi`, the TV weight `rho` and the regularization
/// parameter `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    pub phi: Weight,
    pub rho: Weight,
    pub alpha: f64,
}

impl WeightPair {
    pub fn new(phi: Weight, rho: Weight, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        phi.validate()?;
        rho.validate()?;
        Ok(Self { phi, rho, alpha })
    }

    pub fn unit(alpha: f64) -> Result<Self> {
        Self::new(Weight::Unit, Weight::Unit, alpha)
    }

    /// `phi = rho = r^{d-1}`.
    pub fn radial(d: u32, alpha: f64) -> Result<Self> {
        Self::new(Weight::Power { d }, Weight::Power { d }, alpha)
    }
}

/// The map `s -> Phi(s)` on the knots of an `s`-grid.
#[derive(Debug, Clone)]
pub struct TransformMap {
    s_grid: Grid,
    t_grid: Grid,
    phi: Weight,
    /// `phi` sampled on `s_grid` (only used for tabulated weights).
    phi_samples: Vec<f64>,
    head: f64,
}

pub fn build_transform(w: &WeightPair, grid: &Grid) -> Result<TransformMap> {
    if grid.start() < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "transform grid must start at s >= 0, got {}",
            grid.start()
        )));
    }
    let k = grid.knots();
    let phi_samples: Vec<f64> = k.iter().map(|&s| w.phi.value(s)).collect();
    for (i, &p) in phi_samples.iter().enumerate() {
        let interior = i > 0 && i + 1 < k.len();
        if !p.is_finite() || p < 0.0 || (interior && p <= 0.0) {
            return Err(Error::WeightValidity(format!("phi = {p} at s = {}", k[i])));
        }
    }
    let (t, head) = match w.phi.exponent() {
        Some(e) => (k.iter().map(|&s| power_integral(0.0, s, e)).collect::<Vec<_>>(), 0.0),
        None => {
            let s0 = k[0];
            let head = if s0 > 0.0 {
                // linear extrapolation of phi to 0, clamped at 0
                let slope = (phi_samples[1] - phi_samples[0]) / (k[1] - k[0]);
                let p0 = (phi_samples[0] - slope * s0).max(0.0);
                0.5 * s0 * (p0 + phi_samples[0])
            } else {
                0.0
            };
            let mut t = Vec::with_capacity(k.len());
            let mut acc = head;
            t.push(acc);
            for i in 0..k.len() - 1 {
                acc += 0.5 * (k[i + 1] - k[i]) * (phi_samples[i] + phi_samples[i + 1]);
                t.push(acc);
            }
            (t, head)
        }
    };
    let t_grid = Grid::from_knots(t).map_err(|e| {
        Error::WeightValidity(format!("transformed knots not strictly increasing: {e}"))
    })?;
    Ok(TransformMap {
        s_grid: grid.clone(),
        t_grid,
        phi: w.phi.clone(),
        phi_samples,
        head,
    })
}

impl TransformMap {
    pub fn s_grid(&self) -> &Grid {
        &self.s_grid
    }

    pub fn t_grid(&self) -> &Grid {
        &self.t_grid
    }

    pub fn t_values(&self) -> &[f64] {
        self.t_grid.knots()
    }

    /// `Phi(s)`; exact for closed-form weights, the integral of the linear
    /// interpolant of `phi` otherwise.
    pub fn forward(&self, s: f64) -> f64 {
        if let Some(e) = self.phi.exponent() {
            return power_integral(0.0, s.max(0.0), e);
        }
        let k = self.s_grid.knots();
        let t = self.t_grid.knots();
        if s <= k[0] {
            if k[0] <= 0.0 {
                return t[0];
            }
            return self.head * (s / k[0]).clamp(0.0, 1.0).powi(2);
        }
        let i = self.s_grid.locate(s.min(k[k.len() - 1]));
        let h = s - k[i];
        let slope = (self.phi_samples[i + 1] - self.phi_samples[i]) / (k[i + 1] - k[i]);
        t[i] + h * self.phi_samples[i] + 0.5 * slope * h * h
    }

    /// `Phi^{-1}(t)`.
    pub fn invert(&self, t: f64) -> f64 {
        match self.phi.exponent() {
            Some(e) => {
                let d = e + 1.0;
                (d * t.max(0.0)).powf(1.0 / d)
            }
            None => {
                let k = self.s_grid.knots();
                let tv = self.t_grid.knots();
                if t <= tv[0] {
                    let mut lo = 0.0;
                    let mut hi = k[0];
                    for _ in 0..200 {
                        let m = 0.5 * (lo + hi);
                        if self.forward(m) < t {
                            lo = m;
                        } else {
                            hi = m;
                        }
                    }
                    return 0.5 * (lo + hi);
                }
                let i = self.t_grid.locate(t.min(tv[tv.len() - 1]));
                let (mut lo, mut hi) = (k[i], k[i + 1]);
                for _ in 0..200 {
                    let m = 0.5 * (lo + hi);
                    if m <= lo || m >= hi {
                        break;
                    }
                    if self.forward(m) < t {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// Values of `F(s) = int_0^s f phi` at the knots of `grid`.
pub fn antiderivative(f: &Data, w: &WeightPair, grid: &Grid) -> Result<SampledFunction> {
    let masses = cell_masses(f, w, grid)?;
    let mut vals = Vec::with_capacity(grid.len());
    let mut acc = head_mass(f, w, grid)?;
    vals.push(acc);
    for m in masses {
        acc += m;
        vals.push(acc);
    }
    SampledFunction::new(grid.clone(), vals)
}

/// `int_0^{s_0} f phi`, the mass left of the first knot.
pub fn head_mass(f: &Data, w: &WeightPair, grid: &Grid) -> Result<f64> {
    let s0 = grid.start();
    match (f, w.phi.exponent()) {
        (Data::Exact(p), Some(k)) => {
            if !p.integrable_at_zero(k) {
                return Err(Error::DivergentData(
                    "f * phi is not integrable at 0".into(),
                ));
            }
            Ok(if s0 > 0.0 { p.moment(0.0, s0, k) } else { 0.0 })
        }
        _ => {
            if s0 <= 0.0 {
                return Ok(0.0);
            }
            let k = grid.knots();
            let g0 = f.eval(k[0]) * w.phi.value(k[0]);
            let g1 = f.eval(k[1]) * w.phi.value(k[1]);
            let slope = (g1 - g0) / (k[1] - k[0]);
            Ok(0.5 * s0 * (2.0 * g0 - slope * s0))
        }
    }
}

/// Per-cell masses `int_{s_i}^{s_{i+1}} f phi`.
pub fn cell_masses(f: &Data, w: &WeightPair, grid: &Grid) -> Result<Vec<f64>> {
    let k = grid.knots();
    match (f, w.phi.exponent()) {
        (Data::Exact(p), Some(e)) => {
            if !p.integrable_at_zero(e) {
                return Err(Error::DivergentData(
                    "f * phi is not integrable at 0".into(),
                ));
            }
            Ok(k.windows(2).map(|c| p.moment(c[0], c[1], e)).collect())
        }
        _ => {
            let g: Vec<f64> = k.iter().map(|&s| f.eval(s) * w.phi.value(s)).collect();
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::DivergentData(format!("f * phi not finite at s = {}", k[i])));
            }
            Ok((0..k.len() - 1)
                .map(|i| 0.5 * (k[i + 1] - k[i]) * (g[i] + g[i + 1]))
                .collect())
        }
    }
}

/// `int f^2 phi` over the grid's span, or an error when `f` is not in
/// `L^2_phi` near 0.
pub fn weighted_square(f: &Data, w: &WeightPair, grid: &Grid) -> Result<f64> {
    let (a, b) = (grid.start(), grid.end());
    match (f, w.phi.exponent()) {
        (Data::Exact(p), Some(e)) => {
            let sq = p.square();
            if !sq.integrable_at_zero(e) {
                return Err(Error::DivergentData("f is not in L^2_phi".into()));
            }
            Ok(sq.moment(a, b, e))
        }
        _ => {
            let k = grid.knots();
            let g: Vec<f64> = k.iter().map(|&s| f.eval(s).powi(2) * w.phi.value(s)).collect();
            Ok((0..k.len() - 1)
                .map(|i| 0.5 * (k[i + 1] - k[i]) * (g[i] + g[i + 1]))
                .sum())
        }
    }
}

/// The tube `F ± alpha rho` on the transformed grid with pinned ends.
#[derive(Debug, Clone, Serialize)]
pub struct TubeProblem {
    #[serde(skip)]
    pub t_grid: Grid,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `F` at the knots; the tube's centre line.
    pub center: Vec<f64>,
    pub left_value: f64,
    pub right_value: f64,
}

impl TubeProblem {
    /// A tube with explicit end pins; the pins must lie inside the end gates.
    pub fn new(
        t_grid: Grid,
        lower: Vec<f64>,
        upper: Vec<f64>,
        left_value: f64,
        right_value: f64,
    ) -> Result<Self> {
        let n = t_grid.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::Structural("tube bounds do not match the grid".into()));
        }
        if let Some(i) = (0..n).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InconsistentWeights(i));
        }
        let center = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
        let mut p = Self {
            t_grid,
            lower,
            upper,
            center,
            left_value,
            right_value,
        };
        p.pin(left_value, right_value)?;
        Ok(p)
    }

    /// Pins both ends; fails when a pin lies outside the tube.
    pub fn pin(&mut self, left: f64, right: f64) -> Result<()> {
        let n = self.lower.len();
        let slack = 1e-12 * (1.0 + left.abs().max(right.abs()));
        if left < self.lower[0] - slack || left > self.upper[0] + slack {
            return Err(Error::Infeasible(format!(
                "left pin {left} outside [{}, {}]",
                self.lower[0], self.upper[0]
            )));
        }
        if right < self.lower[n - 1] - slack || right > self.upper[n - 1] + slack {
            return Err(Error::Infeasible(format!(
                "right pin {right} outside [{}, {}]",
                self.lower[n - 1],
                self.upper[n - 1]
            )));
        }
        self.lower[0] = left;
        self.upper[0] = left;
        self.lower[n - 1] = right;
        self.upper[n - 1] = right;
        self.left_value = left;
        self.right_value = right;
        Ok(())
    }

    pub fn width_scale(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .fold(0.0, |m, (l, u)| m.max(u - l))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "lower", "upper"])?;
        for ((t, l), u) in self.t_grid.knots().iter().zip(&self.lower).zip(&self.upper) {
            wr.write_record([t.to_string(), l.to_string(), u.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn build_tube(f: &Data, w: &WeightPair, tm: &TransformMap) -> Result<TubeProblem> {
    let grid = tm.s_grid();
    let big_f = antiderivative(f, w, grid)?;
    let fv = big_f.values();
    let k = grid.knots();
    let n = k.len();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for i in 0..n {
        let rho = w.rho.value(k[i]);
        let interior = i > 0 && i + 1 < n;
        if !rho.is_finite() || (interior && rho <= 0.0) {
            return Err(Error::WeightValidity(format!("rho = {rho} at s = {}", k[i])));
        }
        let half = w.alpha * rho;
        lower.push(fv[i] - half);
        upper.push(fv[i] + half);
    }
    if let Some(i) = (0..n).find(|&i| lower[i] > upper[i]) {
        return Err(Error::InconsistentWeights(i));
    }
    let mut p = TubeProblem {
        t_grid: tm.t_grid().clone(),
        lower,
        upper,
        center: fv.to_vec(),
        left_value: fv[0],
        right_value: fv[n - 1],
    };
    p.pin(fv[0], fv[n - 1])?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{log_grid, make_grid, Grading};

    #[test]
    fn identity_transform() {
        let g = make_grid(0.0, 1.0, 8, Grading::Uniform).unwrap();
        let tm = build_transform(&WeightPair::unit(1.0).unwrap(), &g).unwrap();
        assert_eq!(tm.t_values(), g.knots());
        assert_eq!(tm.invert(0.375), 0.375);
    }

    #[test]
    fn cubic_transform() {
        let g = log_grid(1e-6, 1.0, 64).unwrap();
        let tm = build_transform(&WeightPair::radial(3, 0.25).unwrap(), &g).unwrap();
        for (&s, &t) in g.knots().iter().zip(tm.t_values()) {
            assert!((t - s * s * s / 3.0).abs() <= 1e-12 * (s * s * s / 3.0));
            assert!((tm.invert(t) / s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_transform() {
        let tg = make_grid(0.0, 1.0, 100, Grading::Uniform).unwrap();
        let phi = SampledFunction::from_fn(&tg, |r| 2.0 * r).unwrap();
        let w = WeightPair::new(Weight::Tabulated(phi), Weight::Unit, 1.0).unwrap();
        let g = make_grid(0.0, 1.0, 50, Grading::Uniform).unwrap();
        let tm = build_transform(&w, &g).unwrap();
        assert!((tm.t_values()[50] - 1.0).abs() < 1e-12);
        for i in 0..=200 {
            let t = i as f64 / 200.0;
            let back = tm.forward(tm.invert(t));
            assert!((back - t).abs() <= 1e-10, "{t} {back}");
        }
    }

    #[test]
    fn non_positive_phi_rejected() {
        let tg = make_grid(0.0, 1.0, 4, Grading::Uniform).unwrap();
        let phi = SampledFunction::new(tg, vec![1.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let err = WeightPair::new(Weight::Tabulated(phi), Weight::Unit, 1.0);
        assert!(matches!(err, Err(Error::WeightValidity(_))));
    }

    #[test]
    fn radial_antiderivatives() {
        let g = log_grid(1e-6, 1.0, 128).unwrap();
        let w = WeightPair::radial(3, 0.25).unwrap();
        let f = antiderivative(&Data::power(1.0), &w, &g).unwrap();
        for (&s, &v) in g.knots().iter().zip(f.values()) {
            assert!((v - s * s / 2.0).abs() < 1e-10);
        }
        let f = antiderivative(&Data::power(1.5), &w, &g).unwrap();
        for (&s, &v) in g.knots().iter().zip(f.values()) {
            assert!((v - s.powf(1.5) / 1.5).abs() < 1e-10);
        }
        let z = antiderivative(&Data::constant(0.0), &w, &g).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            antiderivative(&Data::power(3.0), &w, &g),
            Err(Error::DivergentData(_))
        ));
    }

    #[test]
    fn unit_tube() {
        let g = make_grid(0.0, 1.0, 10, Grading::Uniform).unwrap();
        let w = WeightPair::unit(1.0).unwrap();
        let tm = build_transform(&w, &g).unwrap();
        let p = build_tube(&Data::constant(0.0), &w, &tm).unwrap();
        assert_eq!((p.left_value, p.right_value), (0.0, 0.0));
        assert!(p.lower[1..10].iter().all(|&l| l == -1.0));
        assert!(p.upper[1..10].iter().all(|&u| u == 1.0));
    }

    #[test]
    fn radial_tube_width_and_centre() {
        let g = log_grid(1e-6, 1.0, 256).unwrap();
        let w = WeightPair::radial(3, 0.25).unwrap();
        let tm = build_transform(&w, &g).unwrap();
        let p = build_tube(&Data::power(1.0), &w, &tm).unwrap();
        let n = g.len();
        for i in 1..n - 1 {
            let t = tm.t_values()[i];
            let width = p.upper[i] - p.lower[i];
            assert!((width - 0.5 * (3.0 * t).powf(2.0 / 3.0)).abs() < 1e-10);
            assert!((p.center[i] - 0.5 * (3.0 * t).powf(2.0 / 3.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn tube_csv_header() {
        let g = make_grid(0.0, 1.0, 2, Grading::Uniform).unwrap();
        let w = WeightPair::unit(0.5).unwrap();
        let tm = build_transform(&w, &g).unwrap();
        let p = build_tube(&Data::constant(1.0), &w, &tm).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,lower,upper\n0,0,0\n0.5,0,1\n"), "{s}");
    }
}
