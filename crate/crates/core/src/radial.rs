//! Radial denoising on the unit ball: the explicit minimizers for `f = 1/r` in
//! three dimensions, their dual vector field, and boundedness classifiers for
//! power-type data.

use serde::Serialize;

use crate::certificate::CertificateReport;
use crate::data::Data;
use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::power::{power_integral, Piece, PiecewisePower, Term};
use crate::rof::RofSolution;
use crate::stats::ls_slope;

/// Root in `(0, 1)` of `c^3 + 3c/(2 alpha - 1) + 2 = 0`.
pub fn solve_cubic_c(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    let k = 3.0 / (2.0 * alpha - 1.0);
    let p = |c: f64| c * c * c + k * c + 2.0;
    // p(0) = 2 > 0 and p(1) = 3 + k < 0
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-15 {
        let m = 0.5 * (lo + hi);
        if p(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let mut c = 0.5 * (lo + hi);
    for _ in 0..3 {
        let dp = 3.0 * c * c + k;
        if dp != 0.0 {
            let next = c - p(c) / dp;
            if next > 0.0 && next < 1.0 && p(next).abs() <= p(c).abs() {
                c = next;
            }
        }
    }
    Ok(c)
}

pub fn cubic_residual(alpha: f64, c: f64) -> f64 {
    c * c * c + 3.0 * c / (2.0 * alpha - 1.0) + 2.0
}

/// `u = (1 - 2 alpha)/r` on `(0, c)`, `(1 - 2 alpha)/c` on `(c, 1)`: the
/// minimizer for `f = 1/r` in three dimensions when `1/4 <= alpha < 1/2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExplicitSolution {
    pub alpha: f64,
    pub c: f64,
}

pub fn explicit_minimizer(alpha: f64) -> Result<ExplicitSolution> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    if alpha < 0.25 {
        return Err(Error::UnsupportedRegime(format!(
            "explicit minimizer verified only for 1/4 <= alpha < 1/2, got {alpha}"
        )));
    }
    Ok(ExplicitSolution {
        alpha,
        c: solve_cubic_c(alpha)?,
    })
}

impl ExplicitSolution {
    /// A candidate with a prescribed breakpoint (not necessarily the root).
    pub fn with_c(alpha: f64, c: f64) -> Self {
        Self { alpha, c }
    }

    pub fn flat_value(&self) -> f64 {
        (1.0 - 2.0 * self.alpha) / self.c
    }

    pub fn f(&self, r: f64) -> f64 {
        1.0 / r
    }

    pub fn u(&self, r: f64) -> f64 {
        if r < self.c {
            (1.0 - 2.0 * self.alpha) / r
        } else {
            self.flat_value()
        }
    }

    /// `U(x) = -int_0^x (f - u) r^2 dr`.
    pub fn big_u(&self, x: f64) -> f64 {
        let (a, c) = (self.alpha, self.c);
        if x <= c {
            -a * x * x
        } else {
            -a * c * c + (1.0 - 2.0 * a) * (x * x * x - c * c * c) / (3.0 * c) - 0.5 * (x * x - c * c)
        }
    }

    fn k(&self) -> f64 {
        (1.0 - 2.0 * self.alpha) / (3.0 * self.c * self.alpha)
    }

    /// Radial profile of the dual vector field; zero outside the ball.
    pub fn z(&self, r: f64) -> f64 {
        if r < self.c {
            -1.0
        } else if r < 1.0 {
            (r.powi(-2) - 1.0) / (2.0 * self.alpha) + self.k() * (r - r.powi(-2))
        } else {
            0.0
        }
    }

    /// `z'(r) + 2 z(r)/r`, the divergence of `z(|x|) x/|x|` in three dimensions.
    pub fn div_z(&self, r: f64) -> f64 {
        if r < self.c {
            -2.0 / r
        } else {
            let dz = -r.powi(-3) / self.alpha + self.k() * (1.0 + 2.0 * r.powi(-3));
            dz + 2.0 * self.z(r) / r
        }
    }

    pub fn profile(&self) -> PiecewisePower {
        PiecewisePower::new(vec![
            Piece {
                lo: 0.0,
                hi: self.c,
                terms: vec![Term { coef: 1.0 - 2.0 * self.alpha, exp: -1.0 }],
            },
            Piece {
                lo: self.c,
                hi: 1.0,
                terms: vec![Term { coef: self.flat_value(), exp: 0.0 }],
            },
        ])
        .expect("ordered pieces")
    }

    /// `v = (f - u)/alpha` as a piecewise power.
    pub fn dual_variable(&self) -> PiecewisePower {
        let f = PiecewisePower::monomial(1.0, -1.0, 0.0, 1.0);
        f.sub(&self.profile()).scale(1.0 / self.alpha)
    }

    /// The breakpoint lies in the window `1 <= 1/c <= (1+2a)/(1-2a)` used to
    /// verify minimality on `(c, 1)`.
    pub fn in_verification_window(&self) -> bool {
        let x = 1.0 / self.c;
        x >= 1.0 && x <= (1.0 + 2.0 * self.alpha) / (1.0 - 2.0 * self.alpha)
    }

    /// Exact `phi`-weighted cell averages and knot values of `U` on `grid`,
    /// packaged like a numerical solution.
    pub fn to_rof_solution(&self, grid: &Grid) -> Result<RofSolution> {
        if grid.start() < 0.0 || grid.end() > 1.0 {
            return Err(Error::InvalidParameter("radial grid must lie in [0, 1]".into()));
        }
        let u = self.profile();
        let f = PiecewisePower::monomial(1.0, -1.0, 0.0, 1.0);
        let k = grid.knots();
        let dt: Vec<f64> = k.windows(2).map(|w| power_integral(w[0], w[1], 2.0)).collect();
        let cells: Vec<f64> = k
            .windows(2)
            .zip(&dt)
            .map(|(w, d)| u.moment(w[0], w[1], 2.0) / d)
            .collect();
        let f_bar: Vec<f64> = k
            .windows(2)
            .zip(&dt)
            .map(|(w, d)| f.moment(w[0], w[1], 2.0) / d)
            .collect();
        let rho: Vec<f64> = k.iter().map(|r| r * r).collect();
        let big_u: Vec<f64> = k.iter().map(|&r| self.big_u(r)).collect();
        let total_sq = f.square().moment(grid.start(), grid.end(), 2.0);
        let residual_mass = total_sq - f_bar.iter().zip(&dt).map(|(f, d)| f * f * d).sum::<f64>();
        let head = 0.5 * grid.start() * grid.start();
        Ok(RofSolution::assemble(
            grid.clone(),
            self.alpha,
            cells,
            f_bar,
            dt,
            rho,
            big_u,
            residual_mass,
            head,
            None,
        ))
    }
}

/// Checks `|z| <= 1`, continuity of `z` at `c` and at `r = 1`, and the
/// divergence identity `z' + 2z/r = (u - f)/alpha` on the knots of `grid`.
/// The identity is measured relative to `1 + |(u - f)/alpha|`.
pub fn dual_field_z(sol: &ExplicitSolution, grid: &Grid) -> CertificateReport {
    let mut sup: f64 = 0.0;
    let mut div: f64 = 0.0;
    let mut pts: Vec<f64> = grid.knots().iter().copied().filter(|&r| r > 0.0 && r < 1.0).collect();
    pts.push(sol.c);
    pts.push(1.0 - 1e-15);
    for &r in &pts {
        sup = sup.max(sol.z(r).abs());
        let target = (sol.u(r) - sol.f(r)) / sol.alpha;
        div = div.max((sol.div_z(r) - target).abs() / (1.0 + target.abs()));
    }
    let z_right_c = (sol.c.powi(-2) - 1.0) / (2.0 * sol.alpha) + sol.k() * (sol.c - sol.c.powi(-2));
    let cont_c = (z_right_c - (-1.0)).abs();
    let z_left_1 = sol.k() * (1.0 - 1.0);
    let cont_1 = z_left_1.abs();

    let mut r = CertificateReport::new();
    r.push("sup_norm_excess", (sup - 1.0).max(0.0), 1e-10);
    r.push("continuity_at_c", cont_c, 1e-10);
    r.push("continuity_at_1", cont_1, 1e-10);
    r.push("divergence_identity", div, 1e-8);
    if cont_c > 1e-10 {
        r.note(format!(
            "z jumps at r = c: c = {} has cubic residual {:e}",
            sol.c,
            cubic_residual(sol.alpha, sol.c)
        ));
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Unbounded,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessVerdict {
    pub verdict: Verdict,
    pub reason: String,
}

fn verdict(v: Verdict, reason: impl Into<String>) -> BoundednessVerdict {
    BoundednessVerdict {
        verdict: v,
        reason: reason.into(),
    }
}

/// Boundedness near 0 of the radial minimizer for `f = r^{-beta}`.
pub fn classify_power(beta: f64, d: u32) -> Result<BoundednessVerdict> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("need d >= 2, got {d}")));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidParameter("beta must be finite".into()));
    }
    if 2.0 * beta >= d as f64 {
        return Err(Error::NotInL2(format!(
            "r^-{beta} is not in L^2 of the unit ball in dimension {d}"
        )));
    }
    Ok(if d == 2 {
        verdict(
            Verdict::Bounded,
            "d = 2: the drift term alpha (d-1)^2 / r^2 r is not integrable, so the minimizer is bounded",
        )
    } else if beta > 1.0 {
        verdict(
            Verdict::Unbounded,
            "beta > 1, d >= 3: the minimizer is unbounded on any neighbourhood of 0",
        )
    } else if beta < 1.0 {
        verdict(
            Verdict::Bounded,
            "beta < 1: the data is dominated by 1/r near 0 and the minimizer is bounded",
        )
    } else {
        verdict(
            Verdict::Indeterminate,
            "beta = 1, d >= 3: decided only for the explicit family 1/4 <= alpha < 1/2",
        )
    })
}

/// Estimates the growth exponent of nonnegative data near 0 by the
/// least-squares slope of `log f` against `log(1/r)` over the first decade of
/// positive knots, and compares it with 1.
pub fn classify_general(f: &SampledFunction, d: u32, margin: f64) -> Result<BoundednessVerdict> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("need d >= 2, got {d}")));
    }
    if let Some(i) = f.values().iter().position(|&v| v < 0.0) {
        return Err(Error::Precondition(format!(
            "data must be nonnegative, got {} at r = {}",
            f.values()[i],
            f.grid().knots()[i]
        )));
    }
    let k = f.grid().knots();
    let v = f.values();
    let r0 = match k.iter().copied().find(|&r| r > 0.0) {
        Some(r) => r,
        None => return Err(Error::Precondition("grid has no positive knots".into())),
    };
    let pts: Vec<(f64, f64)> = k
        .iter()
        .zip(v)
        .filter(|(&r, &y)| r >= r0 && r <= 10.0 * r0 * (1.0 + 1e-12) && y > 0.0)
        .map(|(&r, &y)| ((1.0 / r).ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(verdict(Verdict::Bounded, "data vanishes near 0"));
    }
    let slope = ls_slope(&pts);
    if d == 2 {
        return Ok(verdict(
            Verdict::Bounded,
            format!("d = 2: bounded for all L^2 data (growth exponent {slope:.4})"),
        ));
    }
    Ok(if slope > 1.0 + margin {
        verdict(
            Verdict::Unbounded,
            format!("growth exponent {slope:.4} > 1: r^beta f -> inf for some beta > 1"),
        )
    } else if slope < 1.0 - margin {
        verdict(
            Verdict::Bounded,
            format!("growth exponent {slope:.4} < 1: r^beta f -> 0 for some beta < 1"),
        )
    } else {
        verdict(
            Verdict::Indeterminate,
            format!("growth exponent {slope:.4} within {margin} of 1"),
        )
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SwitchingIntegrals {
    pub i: f64,
    pub j: f64,
    pub ratio: f64,
    pub i_divergent: bool,
    pub j_divergent: bool,
}

/// The two sides `I(nu) < J(nu)` of the inequality that must hold on `(0, nu)`
/// for a switch to `u' = 0` at `nu` to be disadvantageous, for `f = r^{-beta}`.
pub fn switching_inequality(beta: f64, d: u32, alpha: f64, nu: f64) -> Result<SwitchingIntegrals> {
    if !(beta > 1.0) {
        return Err(Error::InvalidParameter(format!("need beta > 1, got {beta}")));
    }
    if d < 3 {
        return Err(Error::InvalidParameter(format!("need d >= 3, got {d}")));
    }
    if !(alpha > 0.0) || !(nu > 0.0) {
        return Err(Error::InvalidParameter("alpha and nu must be positive".into()));
    }
    let df = d as f64;
    let a1 = alpha * (df - 1.0);
    // g(r) = -beta r^{d-beta-2} + a1 r^{d-3}, negative below r_star
    let r_star = (beta / a1).powf(1.0 / (beta - 1.0));
    let prim = |lo: f64, hi: f64| {
        -beta * power_integral(lo, hi, df - beta - 2.0) + a1 * power_integral(lo, hi, df - 3.0)
    };
    let i_divergent = beta >= df - 1.0;
    let i = if i_divergent {
        f64::INFINITY
    } else {
        let m = nu.min(r_star);
        let mut s = -prim(0.0, m);
        if nu > r_star {
            s += prim(r_star, nu);
        }
        s + a1 * a1 * power_integral(0.0, nu, df - 3.0)
    };
    let j_divergent = 2.0 * beta >= df;
    let j = if j_divergent {
        f64::INFINITY
    } else {
        let b = 1.0 - a1 * nu.powf(beta - 1.0);
        nu.powf(df - 2.0 * beta) * (b * b / df - 2.0 * b / (df - beta) + 1.0 / (df - 2.0 * beta))
    };
    let ratio = if j_divergent {
        if i_divergent {
            f64::NAN
        } else {
            0.0
        }
    } else {
        i / j
    };
    Ok(SwitchingIntegrals {
        i,
        j,
        ratio,
        i_divergent,
        j_divergent,
    })
}

/// `(int (u_h - u)^2 r^{d-1})^{1/2}` between the cell values of a numerical
/// solution and a closed-form profile.
pub fn l2_phi_error(sol: &RofSolution, exact: &PiecewisePower, d: u32) -> f64 {
    l2_phi_error_from(sol, exact, d, 0.0)
}

/// As [`l2_phi_error`], restricted to `r >= from`.
pub fn l2_phi_error_from(sol: &RofSolution, exact: &PiecewisePower, d: u32, from: f64) -> f64 {
    let k = sol.grid.knots();
    let e = d as f64 - 1.0;
    let sq = exact.square();
    let mut s = 0.0;
    for (i, w) in k.windows(2).enumerate() {
        let (lo, hi) = (w[0].max(from), w[1]);
        if hi <= lo {
            continue;
        }
        let v = sol.u[i];
        let cell = v * v * power_integral(lo, hi, e) - 2.0 * v * exact.moment(lo, hi, e) + sq.moment(lo, hi, e);
        s += cell.max(0.0);
    }
    s.sqrt()
}

/// The data `1/r` of the explicit family.
pub fn inverse_radius() -> Data {
    Data::power(1.0)
}
