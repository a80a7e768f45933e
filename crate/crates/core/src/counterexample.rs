//! A bounded-variation function whose TV subdifferential is empty.
//!
//! On `Omega = (0,2) x (0,1)` let `u = sum_n 4^{-n} S_n(x_1)` with
//! `S_n(x) = S(2^n x - (2^{n+1} - 2))` supported on `I_n = [2 - 2^{1-n}, 2 - 2^{-n}]`.
//! Everything is constant in `x_2`, so all quantities reduce to integrals over
//! `x_1` with a factor 1 from the second coordinate. Removing block `n` lowers
//! the total variation by `4^{-n} ||S'||_1` while moving `u` only
//! `4^{-n} 2^{-n/2} ||S||_2` in `L^2`, so the one-sided difference quotients
//! diverge to `-infinity`.

use std::sync::OnceLock;

use serde::Serialize;

use crate::certificate::CertificateReport;
use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::power::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `1 - |2t - 1|`
    Hat,
    /// The indicator of `[1/4, 3/4]` convolved with a smooth bump of radius 1/8.
    MollifiedStep,
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hat" => Ok(Shape::Hat),
            "mollified-step" | "mollified_step" => Ok(Shape::MollifiedStep),
            _ => Err(Error::UnsupportedProfile(format!("unknown profile {s:?}"))),
        }
    }
}

const EPS: f64 = 0.125;

fn bump_raw(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_mass() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| gauss_legendre(-1.0, 1.0, 64, bump_raw))
}

/// Mollifier of radius 1/8 and unit mass.
pub fn mollifier(y: f64) -> f64 {
    bump_raw(y / EPS) / (EPS * bump_mass())
}

fn mollifier_prime(y: f64) -> f64 {
    let s = y / EPS;
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    -2.0 * s / (q * q) * bump_raw(s) / (EPS * EPS * bump_mass())
}

fn mollifier_cdf(y: f64) -> f64 {
    if y <= -EPS {
        0.0
    } else if y >= EPS {
        1.0
    } else {
        gauss_legendre(-EPS, y, 16, mollifier)
    }
}

impl Shape {
    pub fn eval(self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match self {
            Shape::Hat => 1.0 - (2.0 * t - 1.0).abs(),
            Shape::MollifiedStep => mollifier_cdf(t - 0.25) - mollifier_cdf(t - 0.75),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match self {
            Shape::Hat => {
                if t < 0.5 {
                    2.0
                } else {
                    -2.0
                }
            }
            Shape::MollifiedStep => mollifier(t - 0.25) - mollifier(t - 0.75),
        }
    }

    /// Points where the profile is not smooth or changes behavior.
    fn breaks(self) -> Vec<f64> {
        match self {
            Shape::Hat => vec![0.0, 0.5, 1.0],
            Shape::MollifiedStep => vec![0.0, 0.125, 0.25, 0.375, 0.625, 0.75, 0.875, 1.0],
        }
    }

    /// `||S'||_1`
    pub fn tv(self) -> f64 {
        match self {
            Shape::Hat => 2.0,
            Shape::MollifiedStep => integrate_breaks(self, |t| self.derivative(t).abs()),
        }
    }

    /// `||S||_2`
    pub fn l2(self) -> f64 {
        match self {
            Shape::Hat => (1.0f64 / 3.0).sqrt(),
            Shape::MollifiedStep => integrate_breaks(self, |t| self.eval(t).powi(2)).sqrt(),
        }
    }

    /// `||S''||_1`; the hat has no integrable second derivative.
    pub fn second_derivative_l1(self) -> Result<f64> {
        match self {
            Shape::Hat => Err(Error::UnsupportedProfile(
                "the hat's second derivative is a measure, not in L^1".into(),
            )),
            Shape::MollifiedStep => Ok(integrate_breaks(self, |t| {
                (mollifier_prime(t - 0.25) - mollifier_prime(t - 0.75)).abs()
            })),
        }
    }
}

fn integrate_breaks(shape: Shape, g: impl Fn(f64) -> f64) -> f64 {
    shape.breaks().windows(2).map(|w| gauss_legendre(w[0], w[1], 32, &g)).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct OscillatoryProfile {
    pub shape: Shape,
    pub n_max: usize,
    /// Uniform cells inside each dyadic support.
    pub cells_per_support: usize,
}

impl OscillatoryProfile {
    pub fn new(shape: Shape, n_max: usize, cells_per_support: usize) -> Result<Self> {
        if cells_per_support < 8 || !cells_per_support.is_power_of_two() {
            return Err(Error::Resolution(format!(
                "need a power of two >= 8 cells per support, got {cells_per_support}"
            )));
        }
        if n_max > 40 {
            return Err(Error::Resolution(format!("n_max = {n_max} is below double resolution")));
        }
        Ok(Self { shape, n_max, cells_per_support })
    }

    /// `[2 - 2^{1-n}, 2 - 2^{-n}]`
    pub fn support(n: usize) -> (f64, f64) {
        (2.0 - 2f64.powi(1 - n as i32), 2.0 - 2f64.powi(-(n as i32)))
    }

    /// Knots on `(0, 2)` containing every support endpoint, with the tail
    /// `[2 - 2^{-n_max}, 2]` resolved like the last support.
    pub fn grid(&self) -> Result<Grid> {
        let m = self.cells_per_support;
        let mut k = vec![0.0];
        for n in 0..=self.n_max + 1 {
            let (a, b) = if n <= self.n_max { Self::support(n) } else { (Self::support(n).0, 2.0) };
            for j in 1..=m {
                k.push(if j == m { b } else { a + (b - a) * j as f64 / m as f64 });
            }
        }
        Grid::from_knots(k)
    }

    /// `S_n` on the real line.
    pub fn block(&self, n: usize, x: f64) -> f64 {
        let (a, b) = Self::support(n);
        if x < a || x > b {
            return 0.0;
        }
        self.shape.eval(2f64.powi(n as i32) * x - (2f64.powi(n as i32 + 1) - 2.0))
    }

    fn block_samples(&self, grid: &Grid, n: usize) -> Vec<f64> {
        grid.knots().iter().map(|&x| self.block(n, x)).collect()
    }
}

/// Total variation of the piecewise linear interpolant.
pub fn sampled_tv(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Exact `L^2` norm of the piecewise linear interpolant.
pub fn sampled_l2(grid: &Grid, v: &[f64]) -> f64 {
    grid.knots()
        .windows(2)
        .zip(v.windows(2))
        .map(|(k, y)| (k[1] - k[0]) * (y[0] * y[0] + y[0] * y[1] + y[1] * y[1]) / 3.0)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct BuiltU {
    #[serde(skip)]
    pub u: SampledFunction,
    pub total_variation: f64,
    /// `||u_n||_{L^2}` for `n = 0..=n_max`.
    pub block_norms: Vec<f64>,
}

pub fn build_u(profile: &OscillatoryProfile) -> Result<BuiltU> {
    let grid = profile.grid()?;
    let mut u = vec![0.0; grid.len()];
    let mut norms = Vec::with_capacity(profile.n_max + 1);
    for n in 0..=profile.n_max {
        let b = profile.block_samples(&grid, n);
        norms.push(sampled_l2(&grid, &b));
        let w = 4f64.powi(-(n as i32));
        for (u, b) in u.iter_mut().zip(&b) {
            *u += w * b;
        }
    }
    let tv = sampled_tv(&u);
    Ok(BuiltU { u: SampledFunction::new(grid, u)?, total_variation: tv, block_norms: norms })
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionStep {
    pub n: usize,
    pub t_n: f64,
    #[serde(skip)]
    pub v_n: SampledFunction,
    pub quotient: f64,
    /// `|Dv_n|(Omega)`
    pub tv_v: f64,
    pub norm_v: f64,
    /// `| |D(u + t v)| - (|Du| - t |Dv|) | / |Du|`
    pub cancellation_residual: f64,
}

/// The step `t_n v_n` with `v_n = -u_n / ||u_n||` and `t_n = 4^{-n} ||u_n||`,
/// which removes block `n` from `u`.
pub fn direction_step(profile: &OscillatoryProfile, n: usize) -> Result<DirectionStep> {
    if n > profile.n_max {
        return Err(Error::InvalidParameter(format!("n = {n} exceeds n_max = {}", profile.n_max)));
    }
    let built = build_u(profile)?;
    let grid = built.u.grid().clone();
    let b = profile.block_samples(&grid, n);
    let norm = sampled_l2(&grid, &b);
    let v: Vec<f64> = b.iter().map(|x| -x / norm).collect();
    let t = 4f64.powi(-(n as i32)) * norm;
    let moved: Vec<f64> = built.u.values().iter().zip(&v).map(|(u, v)| u + t * v).collect();
    let tv_u = built.total_variation;
    let tv_moved = sampled_tv(&moved);
    let tv_v = sampled_tv(&v);
    Ok(DirectionStep {
        n,
        t_n: t,
        norm_v: sampled_l2(&grid, &v),
        quotient: (tv_moved - tv_u) / t,
        tv_v,
        cancellation_residual: (tv_moved - (tv_u - t * tv_v)).abs() / tv_u,
        v_n: SampledFunction::new(grid, v)?,
    })
}

/// `-2^{n/2} ||S'||_1 / ||S||_2`
pub fn predicted_quotient(shape: Shape, n: usize) -> f64 {
    -(2f64.powf(n as f64 / 2.0)) * shape.tv() / shape.l2()
}

/// The certificate field for the mollified step: ramps to 1 on `[0, 1/8]`,
/// 1 while `S` rises, down through 0 to -1 between the ramps, -1 while `S`
/// falls, back to 0 at 1.
pub fn certificate_g(t: f64) -> f64 {
    if t < 0.125 {
        8.0 * t
    } else if t < 0.375 {
        1.0
    } else if t < 0.625 {
        -8.0 * t + 4.0
    } else if t < 0.875 {
        -1.0
    } else {
        8.0 * t - 8.0
    }
}

pub fn dual_certificate_g(profile: &OscillatoryProfile, n_cut: usize) -> Result<CertificateReport> {
    check_certificate(profile, n_cut, certificate_g)
}

/// Verifies `|g| <= 1`, `g = sign(S')` where `S' != 0`, and
/// `int g S' = int |S'|`, on `S` and on every rescaled block `n >= n_cut`.
pub fn check_certificate(
    profile: &OscillatoryProfile,
    n_cut: usize,
    g: impl Fn(f64) -> f64,
) -> Result<CertificateReport> {
    if profile.shape != Shape::MollifiedStep {
        return Err(Error::UnsupportedProfile("the certificate field is built for the mollified step".into()));
    }
    if n_cut < 1 || n_cut > profile.n_max {
        return Err(Error::InvalidParameter(format!("n_cut = {n_cut} outside 1..={}", profile.n_max)));
    }
    let s = profile.shape;
    let mut rep = CertificateReport::new();
    let ts: Vec<f64> = (0..=4096).map(|i| i as f64 / 4096.0).collect();
    let sup = ts.iter().map(|&t| g(t).abs()).fold(0.0, f64::max);
    rep.push("sup_g_excess", (sup - 1.0).max(0.0), 1e-12);
    let tol = 1e-12;
    let align = ts
        .iter()
        .filter(|&&t| s.derivative(t).abs() > tol)
        .map(|&t| (g(t) - s.derivative(t).signum()).abs())
        .fold(0.0, f64::max);
    rep.push("sign_alignment", align, 1e-12);
    let pair = integrate_breaks(s, |t| g(t) * s.derivative(t));
    let tv = s.tv();
    rep.push("pairing", (pair - tv).abs(), 1e-8);
    let mut worst = 0.0f64;
    for n in n_cut..=profile.n_max {
        let (a, b) = OscillatoryProfile::support(n);
        let sc = 2f64.powi(n as i32);
        let off = 2f64.powi(n as i32 + 1) - 2.0;
        let local = |x: f64| sc * x - off;
        let edges: Vec<f64> = s.breaks().iter().map(|t| (t + off) / sc).collect();
        let p: f64 = edges
            .windows(2)
            .map(|w| gauss_legendre(w[0], w[1], 32, |x| g(local(x)) * sc * s.derivative(local(x))))
            .sum();
        debug_assert!(edges[0] >= a - 1e-15 && edges[edges.len() - 1] <= b + 1e-15);
        worst = worst.max((p - tv).abs());
    }
    rep.push("block_pairing", worst, 1e-8);
    rep.note(format!("int |S'| = {tv}"));
    Ok(rep)
}

/// Partial sums of `sum_n 4^{-n} 2^n ||S''||_1 = sum_n 2^{-n} ||S''||_1`.
pub fn w21_partial_sums(profile: &OscillatoryProfile) -> Result<Vec<f64>> {
    let s2 = profile.shape.second_derivative_l1()?;
    let mut acc = 0.0;
    Ok((0..=profile.n_max)
        .map(|n| {
            acc += 2f64.powi(-(n as i32)) * s2;
            acc
        })
        .collect())
}
