//! Level sets, perimeters and isoperimetric quantities of radial functions on
//! the unit ball of R^d.
//!
//! A radial set is a union of shells `{lo < |x| < hi}`; its perimeter is the sum
//! of the sphere areas at the interval endpoints, so everything here is exact up
//! to the representation of the profile.

use serde::Serialize;

use crate::data::Data;
use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::power::{power_integral, PiecewisePower};
use crate::rof::RofSolution;

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: u32) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Sharp isoperimetric constant `d omega_d^{1/d}`.
pub fn theta(d: u32) -> f64 {
    d as f64 * unit_ball_volume(d).powf(1.0 / d as f64)
}

fn sphere(d: u32, r: f64) -> f64 {
    d as f64 * unit_ball_volume(d) * r.powi(d as i32 - 1)
}

/// A radial profile `r -> u(r)`.
#[derive(Debug, Clone)]
pub enum RadialProfile {
    Exact(PiecewisePower),
    /// Piecewise constant on the cells of `grid`.
    Cells { grid: Grid, values: Vec<f64> },
    /// Piecewise linear through knot samples.
    Linear(SampledFunction),
}

impl RadialProfile {
    pub fn cells(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::Structural(format!(
                "{} cell values for {} cells",
                values.len(),
                grid.cells()
            )));
        }
        Ok(RadialProfile::Cells { grid, values })
    }

    pub fn from_solution(sol: &RofSolution) -> Self {
        RadialProfile::Cells { grid: sol.grid.clone(), values: sol.u.clone() }
    }

    /// `v = (f - u)/alpha` of a denoising run.
    pub fn dual_density(sol: &RofSolution) -> Self {
        let v = sol.f_bar.iter().zip(&sol.u).map(|(f, u)| (f - u) / sol.alpha).collect();
        RadialProfile::Cells { grid: sol.grid.clone(), values: v }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            RadialProfile::Exact(p) => p.support(),
            RadialProfile::Cells { grid, .. } => (grid.start(), grid.end()),
            RadialProfile::Linear(s) => (s.grid().start(), s.grid().end()),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Exact(p) => p.eval(r),
            RadialProfile::Cells { grid, values } => values[grid.locate(r).min(values.len() - 1)],
            RadialProfile::Linear(s) => s.interpolate(r),
        }
    }

    /// `sup |u|`; infinite for profiles that blow up at an end of the support.
    pub fn sup_abs(&self) -> f64 {
        match self {
            RadialProfile::Exact(p) => {
                let mut m = 0.0f64;
                for pc in p.pieces() {
                    let lo = pc.lo.max(f64::MIN_POSITIVE);
                    for i in 0..=64 {
                        let w = i as f64 / 64.0;
                        let r = if pc.lo == 0.0 && i == 0 { 0.0 } else { lo * (pc.hi / lo).powf(w) };
                        let v = pc.eval(r).abs();
                        m = m.max(if v.is_nan() { f64::INFINITY } else { v });
                    }
                }
                m
            }
            RadialProfile::Cells { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            RadialProfile::Linear(s) => s.sup_abs(),
        }
    }

    /// `int_a^b |u|^p dx` over the shell `a < |x| < b`.
    pub fn abs_pow_integral(&self, a: f64, b: f64, p: f64, d: u32) -> Result<f64> {
        let k = d as f64 - 1.0;
        let area = sphere(d, 1.0);
        Ok(area
            * match self {
                RadialProfile::Exact(pp) => pp.abs_pow_moment(a, b, p, k)?,
                RadialProfile::Cells { grid, values } => grid
                    .knots()
                    .windows(2)
                    .zip(values)
                    .map(|(w, v)| {
                        let (lo, hi) = (w[0].max(a), w[1].min(b));
                        if hi > lo {
                            v.abs().powf(p) * power_integral(lo, hi, k)
                        } else {
                            0.0
                        }
                    })
                    .sum(),
                RadialProfile::Linear(s) => linear_moment(s, a, b, k, |v| v.abs().powf(p)),
            })
    }

    /// `int_a^b u dx` over the shell `a < |x| < b`.
    pub fn integral(&self, a: f64, b: f64, d: u32) -> f64 {
        let k = d as f64 - 1.0;
        let area = sphere(d, 1.0);
        area * match self {
            RadialProfile::Exact(pp) => pp.moment(a, b, k),
            RadialProfile::Cells { grid, values } => grid
                .knots()
                .windows(2)
                .zip(values)
                .map(|(w, v)| {
                    let (lo, hi) = (w[0].max(a), w[1].min(b));
                    if hi > lo {
                        v * power_integral(lo, hi, k)
                    } else {
                        0.0
                    }
                })
                .sum(),
            RadialProfile::Linear(s) => linear_moment(s, a, b, k, |v| v),
        }
    }

    /// Values that sample the range of the profile (cell values, knot values or
    /// a dense geometric sampling of closed forms).
    pub fn sample_values(&self) -> Vec<f64> {
        match self {
            RadialProfile::Exact(p) => {
                let (lo, hi) = p.support();
                let lo = if lo > 0.0 { lo } else { 1e-6 * hi };
                (0..=1024).map(|i| p.eval(lo * (hi / lo).powf(i as f64 / 1024.0))).collect()
            }
            RadialProfile::Cells { values, .. } => values.clone(),
            RadialProfile::Linear(s) => s.values().to_vec(),
        }
    }
}

fn linear_moment(s: &SampledFunction, a: f64, b: f64, k: f64, g: impl Fn(f64) -> f64) -> f64 {
    // trapezoid in r on the knots clipped to [a, b]
    let kn = s.grid().knots();
    let mut pts: Vec<f64> = kn.iter().copied().filter(|&r| r > a && r < b).collect();
    pts.insert(0, a.max(kn[0]));
    pts.push(b.min(kn[kn.len() - 1]));
    pts.windows(2)
        .map(|w| {
            let (x0, x1) = (w[0], w[1]);
            if x1 <= x0 {
                return 0.0;
            }
            0.5 * (x1 - x0) * (g(s.interpolate(x0)) * x0.powf(k) + g(s.interpolate(x1)) * x1.powf(k))
        })
        .sum()
}

/// `E^s = {sign(s) u > |s|}` as a union of radius intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialLevelSet {
    pub s: f64,
    pub intervals: Vec<(f64, f64)>,
    pub d: u32,
    /// Radial extent of the profile the set was computed from.
    pub domain: (f64, f64),
}

impl RadialLevelSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> f64 {
        let w = unit_ball_volume(self.d);
        let d = self.d as i32;
        self.intervals.iter().map(|&(a, b)| w * (b.powi(d) - a.powi(d))).sum()
    }
}

fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.retain(|(a, b)| b > a);
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

pub fn level_set(u: &RadialProfile, s: f64, d: u32) -> Result<RadialLevelSet> {
    if s == 0.0 || !s.is_finite() {
        return Err(Error::InvalidParameter(format!("level {s} must be finite and nonzero")));
    }
    let sg = s.signum();
    let inside = |v: f64| sg * v > s.abs();
    let iv = match u {
        RadialProfile::Exact(p) => {
            let (lo, hi) = p.support();
            let mut pts = p.breakpoints();
            pts.extend(p.roots(s, lo, hi));
            pts.push(lo);
            pts.push(hi);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            pts.windows(2)
                .filter(|w| w[1] > w[0])
                .filter(|w| {
                    let m = if w[0] > 0.0 { (w[0] * w[1]).sqrt() } else { 0.5 * w[1] };
                    inside(p.eval(m))
                })
                .map(|w| (w[0], w[1]))
                .collect()
        }
        RadialProfile::Cells { grid, values } => grid
            .knots()
            .windows(2)
            .zip(values)
            .filter(|(_, &v)| inside(v))
            .map(|(w, _)| (w[0], w[1]))
            .collect(),
        RadialProfile::Linear(f) => {
            let k = f.grid().knots();
            let v = f.values();
            let g = |i: usize| sg * v[i] - s.abs();
            let mut out = Vec::new();
            for i in 0..k.len() - 1 {
                let (g0, g1) = (g(i), g(i + 1));
                let cross = || k[i] + (k[i + 1] - k[i]) * g0 / (g0 - g1);
                match (g0 > 0.0, g1 > 0.0) {
                    (true, true) => out.push((k[i], k[i + 1])),
                    (true, false) => out.push((k[i], cross())),
                    (false, true) => out.push((cross(), k[i + 1])),
                    (false, false) => {}
                }
            }
            out
        }
    };
    Ok(RadialLevelSet { s, intervals: merge(iv), d, domain: u.domain() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerimeterMode {
    WholeSpace,
    /// Perimeter relative to the unit ball: the sphere `|x| = 1` is not counted.
    Relative,
}

impl std::str::FromStr for PerimeterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole_space" | "whole-space" => Ok(PerimeterMode::WholeSpace),
            "relative" => Ok(PerimeterMode::Relative),
            _ => Err(Error::InvalidParameter(format!("unknown perimeter mode {s:?}"))),
        }
    }
}

/// Sum of sphere areas at the interval endpoints. The inner end of the
/// domain is the centre of the ball and carries no boundary.
pub fn perimeter(ls: &RadialLevelSet, mode: PerimeterMode) -> f64 {
    let (lo, hi) = ls.domain;
    let outer = |r: f64| mode == PerimeterMode::Relative && (r >= 1.0 || r >= hi && hi >= 1.0);
    let mut p = 0.0;
    for &(a, b) in &ls.intervals {
        if a > lo {
            p += sphere(ls.d, a);
        }
        if !outer(b) {
            p += sphere(ls.d, b);
        }
    }
    p
}

/// `int_{E} v dx` for `v = (f - u)/alpha`.
fn residual_integral(u: &RadialProfile, f: &Data, alpha: f64, ls: &RadialLevelSet) -> f64 {
    let k = ls.d as f64 - 1.0;
    let area = sphere(ls.d, 1.0);
    let mut s = 0.0;
    for &(a, b) in &ls.intervals {
        let fi = match f {
            Data::Exact(p) => area * p.moment(a, b, k),
            Data::Sampled(sf) => area * linear_moment(sf, a, b, k, |v| v),
        };
        s += (fi - u.integral(a, b, ls.d)) / alpha;
    }
    s
}

/// `|Per(E^s) - sign(s) int_{E^s} (f - u)/alpha|`.
pub fn perimeter_identity_residual(
    u: &RadialProfile,
    f: &Data,
    alpha: f64,
    s: f64,
    d: u32,
    mode: PerimeterMode,
) -> Result<f64> {
    let ls = level_set(u, s, d)?;
    let per = perimeter(&ls, mode);
    let rhs = s.signum() * residual_integral(u, f, alpha, &ls);
    Ok((per - rhs).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoperimetricReport {
    pub s: f64,
    pub theta_d: f64,
    pub per: f64,
    pub measure: f64,
    /// `per / (theta_d measure^{(d-1)/d})`, at least 1 for every set.
    pub ratio: f64,
    /// `(int_{E^s} |v|^d)^{1/d}`, infinite when `v` is not in `L^d(E^s)`.
    pub ld_norm_v_on_e: f64,
    pub v_in_ld: bool,
    /// `ld_norm_v_on_e < theta_d`: the perimeter identity and the
    /// isoperimetric inequality then rule out the set being nonempty.
    pub excludes_set: bool,
}

pub fn isoperimetric_report(v: &RadialProfile, ls: &RadialLevelSet) -> Result<IsoperimetricReport> {
    if ls.is_empty() {
        return Err(Error::Precondition("isoperimetric report needs a nonempty level set".into()));
    }
    let d = ls.d;
    let th = theta(d);
    let per = perimeter(ls, PerimeterMode::WholeSpace);
    let measure = ls.measure();
    let ratio = per / (th * measure.powf((d as f64 - 1.0) / d as f64));
    let mut mass = 0.0;
    for &(a, b) in &ls.intervals {
        mass += v.abs_pow_integral(a, b, d as f64, d)?;
    }
    let ld = mass.powf(1.0 / d as f64);
    Ok(IsoperimetricReport {
        s: ls.s,
        theta_d: th,
        per,
        measure,
        ratio,
        ld_norm_v_on_e: ld,
        v_in_ld: ld.is_finite(),
        excludes_set: ld < th,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovBound {
    pub bound: f64,
    pub lp_norm: f64,
    pub sampled_sup: f64,
    pub respected: bool,
}

/// `(C |B(0,r0)|)^{-1/p} ||u||_p`, the sup bound that a uniform density
/// estimate with constants `(C, r0)` would imply.
pub fn markov_sup_bound(u: &RadialProfile, p: f64, c_density: f64, r0: f64, d: u32) -> Result<MarkovBound> {
    if p < 1.0 || !(c_density > 0.0 && c_density <= 1.0) || r0 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need p >= 1, C in (0,1], r0 > 0; got p={p}, C={c_density}, r0={r0}"
        )));
    }
    let (a, b) = u.domain();
    let lp = u.abs_pow_integral(a, b, p, d)?.powf(1.0 / p);
    let ball = unit_ball_volume(d) * r0.powi(d as i32);
    let bound = (c_density * ball).powf(-1.0 / p) * lp;
    let sup = u.sup_abs();
    Ok(MarkovBound { bound, lp_norm: lp, sampled_sup: sup, respected: sup <= bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerCake {
    /// `int (u^+)^{d/(d-1)} dx`
    pub direct: f64,
    /// `int_0^inf d/(d-1) s^{1/(d-1)} |E^s| ds` by quadrature over levels
    pub layered: f64,
    pub rel_err: f64,
}

/// Compares the two sides of the layer-cake formula for `L^{d/(d-1)}`.
/// The level integral uses the trapezoid rule in `ln s` on `n_levels` levels.
pub fn layer_cake_check(u: &RadialProfile, d: u32, n_levels: usize) -> Result<LayerCake> {
    if d < 2 || n_levels < 2 {
        return Err(Error::InvalidParameter("layer cake needs d >= 2 and two levels".into()));
    }
    let q = d as f64 / (d as f64 - 1.0);
    let (a, b) = u.domain();
    let direct = positive_part_power(u, a, b, q, d)?;
    let vals = u.sample_values();
    let top = u.sup_abs();
    let vmax = vals.iter().copied().fold(0.0f64, f64::max);
    if vmax <= 0.0 {
        return Ok(LayerCake { direct, layered: 0.0, rel_err: direct.abs() });
    }
    let hi = if top.is_finite() { top.max(vmax) } else { vmax * 1e9 };
    let lo = vmax * 1e-9;
    let (la, lb) = (lo.ln(), hi.ln());
    let measure = |s: f64| level_set(u, s, d).map(|l| l.measure());
    let mut layered = lo.powf(q) * measure(lo)?;
    let mut prev = None;
    for i in 0..=n_levels {
        let s = (la + (lb - la) * i as f64 / n_levels as f64).exp();
        let g = q * s.powf(q) * measure(s)?;
        if let Some(p) = prev {
            layered += 0.5 * (p + g) * (lb - la) / n_levels as f64;
        }
        prev = Some(g);
    }
    Ok(LayerCake { direct, layered, rel_err: (layered - direct).abs() / direct.abs().max(f64::MIN_POSITIVE) })
}

fn positive_part_power(u: &RadialProfile, a: f64, b: f64, q: f64, d: u32) -> Result<f64> {
    match u {
        RadialProfile::Exact(p) => {
            // integrate |u|^q only where u > 0
            let mut pts = p.breakpoints();
            pts.extend(p.roots(0.0, a, b));
            pts.push(a);
            pts.push(b);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let mut s = 0.0;
            for w in pts.windows(2) {
                let m = if w[0] > 0.0 { (w[0] * w[1]).sqrt() } else { 0.5 * w[1] };
                if p.eval(m) > 0.0 {
                    s += u.abs_pow_integral(w[0], w[1], q, d)?;
                }
            }
            Ok(s)
        }
        RadialProfile::Cells { grid, values } => {
            let v = values.iter().map(|x| x.max(0.0)).collect();
            RadialProfile::Cells { grid: grid.clone(), values: v }.abs_pow_integral(a, b, q, d)
        }
        RadialProfile::Linear(s) => {
            let pos = s.map(|x| x.max(0.0))?;
            RadialProfile::Linear(pos).abs_pow_integral(a, b, q, d)
        }
    }
}

/// Levels for a diagnostic sweep: `n` quantiles of the sampled range plus
/// any extra thresholds, zero removed.
pub fn auto_levels(u: &RadialProfile, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = u.sample_values().into_iter().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(n + extra.len());
    if !v.is_empty() {
        for i in 0..n {
            let pos = (i as f64 + 0.5) / n as f64 * (v.len() - 1) as f64;
            out.push(v[pos.round() as usize]);
        }
    }
    out.extend_from_slice(extra);
    out.retain(|s| *s != 0.0 && s.is_finite());
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Per-level diagnostics for one denoising result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub s: f64,
    pub intervals: Vec<(f64, f64)>,
    pub perimeter: f64,
    pub identity_residual: f64,
    pub isoperimetric: Option<IsoperimetricReport>,
}

pub fn diagnose_levels(
    u: &RadialProfile,
    v: &RadialProfile,
    f: &Data,
    alpha: f64,
    d: u32,
    levels: &[f64],
    mode: PerimeterMode,
) -> Result<Vec<LevelReport>> {
    levels
        .iter()
        .map(|&s| {
            let ls = level_set(u, s, d)?;
            let iso = if ls.is_empty() { None } else { Some(isoperimetric_report(v, &ls)?) };
            Ok(LevelReport {
                s,
                perimeter: perimeter(&ls, mode),
                identity_residual: perimeter_identity_residual(u, f, alpha, s, d, mode)?,
                intervals: ls.intervals,
                isoperimetric: iso,
            })
        })
        .collect()
}
