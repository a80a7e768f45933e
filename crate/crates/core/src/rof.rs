//! Weighted ROF denoising `1/2 int (u-f)^2 phi + alpha TV_rho(u)` through the
//! taut string, with pointwise dual certificates and the switching structure.

use std::io::Write;

use serde::Serialize;

use crate::certificate::CertificateReport;
use crate::data::Data;
use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::taut_string::{solve_tube, Contact, TautString};
use crate::weights::{
    build_transform, build_tube, cell_masses, head_mass, weighted_square, TubeProblem, WeightPair,
};

/// A piecewise-constant minimizer on the cells of an `s`-grid together with
/// its primitive field `U` and normalized field `xi = U / (alpha rho)` on the
/// knots.
#[derive(Debug, Clone)]
pub struct RofSolution {
    pub grid: Grid,
    pub alpha: f64,
    /// Cell values of the minimizer.
    pub u: Vec<f64>,
    /// `phi`-weighted cell averages of the data.
    pub f_bar: Vec<f64>,
    /// `int phi` per cell, i.e. the transformed cell widths.
    pub dt: Vec<f64>,
    /// `rho` at the knots.
    pub rho: Vec<f64>,
    pub big_u: Vec<f64>,
    pub xi: Vec<f64>,
    /// `int f^2 phi - sum f_bar^2 dt`: the part of the data invisible to
    /// cell-constant functions.
    pub residual_mass: f64,
    /// `int_0^a f phi` for grids starting at `a > 0`.
    pub head_mass: f64,
    pub energy: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub taut: Option<TautString>,
}

impl RofSolution {
    /// Assembles a solution from cell values and knot values of `U`, and
    /// evaluates energy, dual value and gap.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        grid: Grid,
        alpha: f64,
        u: Vec<f64>,
        f_bar: Vec<f64>,
        dt: Vec<f64>,
        rho: Vec<f64>,
        big_u: Vec<f64>,
        residual_mass: f64,
        head_mass: f64,
        taut: Option<TautString>,
    ) -> Self {
        let scale = rho.iter().fold(0.0f64, |m, r| m.max(alpha * r));
        let xi = big_u
            .iter()
            .zip(&rho)
            .map(|(&uu, &r)| {
                let b = alpha * r;
                if b > 1e-12 * scale {
                    uu / b
                } else if b > 0.0 {
                    (uu / b).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let mut s = Self {
            grid,
            alpha,
            u,
            f_bar,
            dt,
            rho,
            big_u,
            xi,
            residual_mass,
            head_mass,
            energy: 0.0,
            dual_value: 0.0,
            gap: 0.0,
            taut,
        };
        s.energy = s.energy_of(&s.u);
        s.dual_value = s.dual_of(&s.u);
        s.gap = s.energy - s.dual_value;
        s
    }

    /// Primal energy of any cell-constant candidate on this grid.
    pub fn energy_of(&self, v: &[f64]) -> f64 {
        let fid: f64 = (0..v.len())
            .map(|i| (v[i] - self.f_bar[i]).powi(2) * self.dt[i])
            .sum();
        0.5 * fid + 0.5 * self.residual_mass + self.alpha * self.weighted_tv(v)
    }

    /// `sum_i rho(s_i) |v_i - v_{i-1}|` over interior knots.
    pub fn weighted_tv(&self, v: &[f64]) -> f64 {
        (1..v.len()).map(|i| self.rho[i] * (v[i] - v[i - 1]).abs()).sum()
    }

    /// Dual value at `w = f_bar - v`, the canonical dual variable.
    fn dual_of(&self, v: &[f64]) -> f64 {
        let s: f64 = (0..v.len())
            .map(|i| {
                let w = self.f_bar[i] - v[i];
                (w * self.f_bar[i] - 0.5 * w * w) * self.dt[i]
            })
            .sum();
        s + 0.5 * self.residual_mass
    }

    /// `sum alpha rho_i |du_i| - U_i du_i`; equals the gap when `U` is the
    /// primitive of the dual variable.
    pub fn pairing_gap(&self) -> f64 {
        (1..self.u.len())
            .map(|i| {
                let du = self.u[i] - self.u[i - 1];
                self.alpha * self.rho[i] * du.abs() - self.big_u[i] * du
            })
            .sum()
    }

    /// The minimizer as samples at cell midpoints.
    pub fn u_signal(&self) -> SampledFunction {
        let mid = Grid::from_knots(self.grid.midpoints()).expect("midpoints of a valid grid");
        SampledFunction::new(mid, self.u.clone()).expect("one value per cell")
    }

    pub fn u_field(&self) -> SampledFunction {
        SampledFunction::new(self.grid.clone(), self.big_u.clone()).expect("knot values")
    }

    pub fn xi_field(&self) -> SampledFunction {
        SampledFunction::new(self.grid.clone(), self.xi.clone()).expect("knot values")
    }

    /// Value of the minimizer at `r` (cell lookup).
    pub fn u_at(&self, r: f64) -> f64 {
        self.u[self.grid.locate(r)]
    }

    /// CSV `r,f,u,U,xi`, one row per knot; `u` is the value on the cell to the
    /// right of the knot (the last row repeats the last cell).
    pub fn write_csv<W: Write>(&self, f: &Data, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "f", "u", "U", "xi"])?;
        let k = self.grid.knots();
        let n = self.u.len();
        for i in 0..k.len() {
            wr.write_record([
                k[i].to_string(),
                f.eval(k[i]).to_string(),
                self.u[i.min(n - 1)].to_string(),
                self.big_u[i].to_string(),
                self.xi[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DenoiseOptions {
    /// When the grid starts at `a > 0` and both `f` and `phi` have closed
    /// forms, prepend the cell `[0, a]` so that the string starts at
    /// `Phi(0) = 0` with `U(0) = 0`. Otherwise the pin `U(a) = 0` is used and
    /// `int_0^a f phi` is only reported.
    pub head_cell: bool,
}

impl Default for DenoiseOptions {
    fn default() -> Self {
        Self { head_cell: true }
    }
}

/// Solves the weighted ROF problem for data `f` on the cells of `grid`.
pub fn denoise(f: &Data, w: &WeightPair, grid: &Grid) -> Result<RofSolution> {
    denoise_with(f, w, grid, &DenoiseOptions::default())
}

pub fn denoise_with(f: &Data, w: &WeightPair, grid: &Grid, opts: &DenoiseOptions) -> Result<RofSolution> {
    let closed = matches!(f, Data::Exact(_)) && w.phi.exponent().is_some();
    let grid = if opts.head_cell && closed && grid.start() > 0.0 {
        let mut k = Vec::with_capacity(grid.len() + 1);
        k.push(0.0);
        k.extend_from_slice(grid.knots());
        Grid::from_knots(k)?
    } else {
        grid.clone()
    };
    let tm = build_transform(w, &grid)?;
    let tube = build_tube(f, w, &tm)?;
    let taut = solve_tube(&tube)?;
    let t = tm.t_values();
    let dt: Vec<f64> = t.windows(2).map(|c| c[1] - c[0]).collect();
    let masses = cell_masses(f, w, &grid)?;
    let f_bar: Vec<f64> = masses.iter().zip(&dt).map(|(m, d)| m / d).collect();
    let total_sq = weighted_square(f, w, &grid)?;
    let residual_mass = total_sq - f_bar.iter().zip(&dt).map(|(f, d)| f * f * d).sum::<f64>();
    let rho: Vec<f64> = grid.knots().iter().map(|&s| w.rho.value(s)).collect();
    let big_u: Vec<f64> = taut.values.iter().zip(&tube.center).map(|(v, c)| v - c).collect();
    let head = head_mass(f, w, &grid)?;
    Ok(RofSolution::assemble(
        grid,
        w.alpha,
        taut.slopes.clone(),
        f_bar,
        dt,
        rho,
        big_u,
        residual_mass,
        head,
        Some(taut),
    ))
}

/// Classical weighted ROF on cell data: minimizes
/// `1/2 sum (v_i - f_i)^2 w_i + alpha sum rho_i |v_i - v_{i-1}|`
/// with `rho` given at the `n + 1` knots (end entries unused).
pub fn denoise_cells(f: &[f64], widths: &[f64], rho: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let n = f.len();
    if widths.len() != n || rho.len() != n + 1 || n < 1 {
        return Err(Error::Structural("cell data, widths and knot weights disagree".into()));
    }
    let mut t = Vec::with_capacity(n + 1);
    let mut big_f = Vec::with_capacity(n + 1);
    t.push(0.0);
    big_f.push(0.0);
    for i in 0..n {
        t.push(t[i] + widths[i]);
        big_f.push(big_f[i] + f[i] * widths[i]);
    }
    let lower = (0..=n).map(|i| big_f[i] - alpha * rho[i]).collect();
    let upper = (0..=n).map(|i| big_f[i] + alpha * rho[i]).collect();
    let tube = TubeProblem::new(Grid::from_knots(t)?, lower, upper, 0.0, big_f[n])?;
    Ok(solve_tube(&tube)?.slopes)
}

/// Tolerances for [`optimality_residuals`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualTolerances {
    pub primitive: f64,
    pub feasibility: f64,
    pub alignment: f64,
    pub endpoint: f64,
    /// Jumps below this are not aligned; `None` means `1e-6 (max u - min u)`.
    pub jump_tol: Option<f64>,
}

impl Default for ResidualTolerances {
    fn default() -> Self {
        Self {
            primitive: 1e-6,
            feasibility: 1e-6,
            alignment: 1e-6,
            endpoint: 1e-6,
            jump_tol: None,
        }
    }
}

pub fn default_jump_tol(u: &[f64]) -> f64 {
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    1e-6 * (hi - lo)
}

pub fn optimality_residuals(sol: &RofSolution, f: &Data, w: &WeightPair) -> Result<CertificateReport> {
    optimality_residuals_with(sol, f, w, &ResidualTolerances::default())
}

/// Checks the pointwise conditions `U = -int (f-u) phi`, `|U| <= alpha rho`,
/// `U = alpha rho sign(Du)` on jumps, and `U = 0` at both ends.
pub fn optimality_residuals_with(
    sol: &RofSolution,
    f: &Data,
    w: &WeightPair,
    tol: &ResidualTolerances,
) -> Result<CertificateReport> {
    let n = sol.u.len();
    if sol.big_u.len() != n + 1 || sol.grid.cells() != n {
        return Err(Error::Structural("solution arrays do not match the grid".into()));
    }
    let masses = cell_masses(f, w, &sol.grid)?;
    let mut prim: f64 = 0.0;
    let mut acc = 0.0;
    for i in 0..n {
        acc += masses[i] - sol.u[i] * sol.dt[i];
        prim = prim.max((sol.big_u[i + 1] - sol.big_u[0] + acc).abs());
    }
    let mut feas: f64 = 0.0;
    for i in 0..=n {
        feas = feas.max(sol.big_u[i].abs() - w.alpha * sol.rho[i]);
    }
    let jump_tol = tol.jump_tol.unwrap_or_else(|| default_jump_tol(&sol.u));
    let mut align: f64 = 0.0;
    let mut aligned = 0usize;
    for i in 1..n {
        let du = sol.u[i] - sol.u[i - 1];
        if du.abs() > jump_tol {
            aligned += 1;
            align = align.max((sol.big_u[i] - w.alpha * sol.rho[i] * du.signum()).abs());
        }
    }
    let endpoint = sol.big_u[0].abs().max(sol.big_u[n].abs());

    let mut r = CertificateReport::new();
    r.push("primitive", prim, tol.primitive);
    r.push("feasibility", feas.max(0.0), tol.feasibility);
    r.push("alignment", align, tol.alignment);
    r.push("endpoint", endpoint, tol.endpoint);
    if aligned == 0 {
        r.note("no jumps above jump_tol; alignment vacuous");
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    /// `u = f - alpha rho'/phi`: the string rides the lower wall.
    Minus,
    /// `u' = 0`: the string is free.
    Flat,
    /// `u = f + alpha rho'/phi`: the string rides the upper wall.
    Plus,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchSegment {
    pub r_lo: f64,
    pub r_hi: f64,
    pub behavior: Behavior,
    pub cells: usize,
    pub max_residual: f64,
    pub pass: bool,
}

/// Splits the domain into runs where the minimizer follows the lower wall,
/// the upper wall, or is constant, and checks each run against its formula.
///
/// Wall runs are compared cell by cell with `(dF -/+ alpha d rho)/dt`, the
/// cell average of `f -/+ alpha rho'/phi`; flat runs must have no jump above
/// `jump_tol`. Runs shorter than two cells are merged into a neighbour.
pub fn switching_decomposition(
    sol: &RofSolution,
    f: &Data,
    w: &WeightPair,
    jump_tol: Option<f64>,
    seg_tol: f64,
) -> Result<Vec<SwitchSegment>> {
    let taut = sol
        .taut
        .as_ref()
        .ok_or_else(|| Error::Precondition("solution carries no taut string".into()))?;
    let n = sol.u.len();
    let jump_tol = jump_tol.unwrap_or_else(|| default_jump_tol(&sol.u));
    let c = &taut.contact;
    let label = |k: usize| -> Option<Contact> {
        if k == 0 || k == n {
            None
        } else {
            Some(c[k])
        }
    };
    let behavior: Vec<Behavior> = (0..n)
        .map(|i| {
            let ls = [label(i), label(i + 1)];
            let known: Vec<Contact> = ls.iter().flatten().copied().collect();
            if known.is_empty() {
                Behavior::Flat
            } else if known.iter().all(|&x| x == Contact::Lower) {
                Behavior::Minus
            } else if known.iter().all(|&x| x == Contact::Upper) {
                Behavior::Plus
            } else {
                Behavior::Flat
            }
        })
        .collect();
    let is_jump = |k: usize| (sol.u[k] - sol.u[k - 1]).abs() > jump_tol;

    // (start cell, end cell exclusive, behavior)
    let mut runs: Vec<(usize, usize, Behavior)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        let boundary = i == n
            || behavior[i] != behavior[start]
            || (behavior[i] == Behavior::Flat && is_jump(i));
        if boundary {
            runs.push((start, i, behavior[start]));
            start = i;
        }
    }
    // absorb short runs into the previous (or next) run
    let mut merged: Vec<(usize, usize, Behavior)> = Vec::new();
    for run in runs {
        if run.1 - run.0 < 2 {
            if let Some(last) = merged.last_mut() {
                last.1 = run.1;
                continue;
            }
        }
        match merged.last_mut() {
            Some(last) if last.1 - last.0 < 2 => {
                last.1 = run.1;
                last.2 = run.2;
            }
            Some(last) if last.2 == run.2 && !(run.2 == Behavior::Flat && is_jump(run.0)) => {
                last.1 = run.1;
            }
            _ => merged.push(run),
        }
    }

    let masses = cell_masses(f, w, &sol.grid)?;
    let k = sol.grid.knots();
    let mut out = Vec::with_capacity(merged.len());
    for (a, b, beh) in merged {
        let mut res: f64 = 0.0;
        match beh {
            Behavior::Flat => {
                for i in a + 1..b {
                    res = res.max((sol.u[i] - sol.u[i - 1]).abs());
                }
                out.push(SwitchSegment {
                    r_lo: k[a],
                    r_hi: k[b],
                    behavior: beh,
                    cells: b - a,
                    max_residual: res,
                    pass: res <= jump_tol,
                });
            }
            Behavior::Minus | Behavior::Plus => {
                let sign = if beh == Behavior::Minus { -1.0 } else { 1.0 };
                for i in a.max(1)..b.min(n - 1) {
                    let drho = sol.rho[i + 1] - sol.rho[i];
                    let target = (masses[i] + sign * w.alpha * drho) / sol.dt[i];
                    res = res.max((sol.u[i] - target).abs() / (1.0 + sol.u[i].abs()));
                }
                out.push(SwitchSegment {
                    r_lo: k[a],
                    r_hi: k[b],
                    behavior: beh,
                    cells: b - a,
                    max_residual: res,
                    pass: res <= seg_tol,
                });
            }
        }
    }
    Ok(out)
}
