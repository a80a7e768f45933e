//! Shortest path through a tube with vertical gates, and its discrete KKT
//! certificate.

use std::collections::VecDeque;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::weights::TubeProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Contact {
    Lower,
    Upper,
    Free,
}

impl Contact {
    pub fn as_str(self) -> &'static str {
        match self {
            Contact::Lower => "lower",
            Contact::Upper => "upper",
            Contact::Free => "free",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TautString {
    pub t_grid: Grid,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    pub contact: Vec<Contact>,
}

impl TautString {
    /// `sum (U_{i+1} - U_i)^2 / dt_i`.
    pub fn energy(&self) -> f64 {
        path_energy(self.t_grid.knots(), &self.values)
    }

    pub fn write_csv<W: Write>(&self, p: &TubeProblem, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "value", "lower", "upper", "contact"])?;
        for i in 0..self.values.len() {
            wr.write_record([
                self.t_grid.knots()[i].to_string(),
                self.values[i].to_string(),
                p.lower[i].to_string(),
                p.upper[i].to_string(),
                self.contact[i].as_str().to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn path_energy(t: &[f64], values: &[f64]) -> f64 {
    (0..t.len() - 1)
        .map(|i| (values[i + 1] - values[i]).powi(2) / (t[i + 1] - t[i]))
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Pt {
    t: f64,
    y: f64,
    i: usize,
}

fn slope(a: Pt, b: Pt) -> f64 {
    (b.y - a.y) / (b.t - a.t)
}

/// Solves `min sum (U_{i+1}-U_i)^2/dt_i` subject to `lower <= U <= upper` and
/// the end pins, by a funnel sweep in linear time.
pub fn solve_tube(p: &TubeProblem) -> Result<TautString> {
    let t = p.t_grid.knots();
    let n = t.len();
    if p.lower.len() != n || p.upper.len() != n {
        return Err(Error::Structural("tube bounds do not match the grid".into()));
    }
    if let Some(i) = (0..n).find(|&i| p.lower[i] > p.upper[i]) {
        return Err(Error::InconsistentWeights(i));
    }
    let slack = 1e-12 * (1.0 + p.left_value.abs().max(p.right_value.abs()));
    if (p.left_value - p.lower[0]) < -slack || (p.left_value - p.upper[0]) > slack {
        return Err(Error::Infeasible(format!("left pin {} outside the tube", p.left_value)));
    }
    if (p.right_value - p.lower[n - 1]) < -slack || (p.right_value - p.upper[n - 1]) > slack {
        return Err(Error::Infeasible(format!("right pin {} outside the tube", p.right_value)));
    }

    let mut verts: Vec<(Pt, Contact)> = Vec::new();
    let mut apex = Pt { t: t[0], y: p.left_value, i: 0 };
    verts.push((apex, Contact::Free));
    let mut lo: VecDeque<Pt> = VecDeque::new();
    let mut hi: VecDeque<Pt> = VecDeque::new();

    for i in 1..n {
        let (l, h) = if i == n - 1 {
            (p.right_value, p.right_value)
        } else {
            (p.lower[i], p.upper[i])
        };
        let pl = Pt { t: t[i], y: l, i };
        let ph = Pt { t: t[i], y: h, i };

        // lower point: may wrap the path around the upper chain
        let mut advanced = false;
        while let Some(&front) = hi.front() {
            if slope(apex, pl) > slope(apex, front) {
                apex = front;
                hi.pop_front();
                verts.push((apex, Contact::Upper));
                advanced = true;
            } else {
                break;
            }
        }
        if advanced {
            lo.clear();
        }
        while let Some(&last) = lo.back() {
            let prev = if lo.len() >= 2 { lo[lo.len() - 2] } else { apex };
            if slope(prev, last) <= slope(prev, pl) {
                lo.pop_back();
            } else {
                break;
            }
        }
        lo.push_back(pl);

        // upper point: may wrap the path around the lower chain
        let mut advanced = false;
        while let Some(&front) = lo.front() {
            if front.i == i {
                break;
            }
            if slope(apex, ph) < slope(apex, front) {
                apex = front;
                lo.pop_front();
                verts.push((apex, Contact::Lower));
                advanced = true;
            } else {
                break;
            }
        }
        if advanced {
            hi.clear();
        }
        while let Some(&last) = hi.back() {
            let prev = if hi.len() >= 2 { hi[hi.len() - 2] } else { apex };
            if slope(prev, last) >= slope(prev, ph) {
                hi.pop_back();
            } else {
                break;
            }
        }
        hi.push_back(ph);
    }

    let (chain, kind) = if lo.len() > 1 {
        (lo, Contact::Lower)
    } else {
        (hi, Contact::Upper)
    };
    let m = chain.len();
    for (k, pt) in chain.into_iter().enumerate() {
        let c = if k + 1 == m { Contact::Free } else { kind };
        verts.push((pt, c));
    }

    let mut values = vec![0.0; n];
    let mut slopes = vec![0.0; n - 1];
    let mut vertex_kind: Vec<Option<Contact>> = vec![None; n];
    for w in verts.windows(2) {
        let (a, _) = w[0];
        let (b, _) = w[1];
        let s = slope(a, b);
        for j in a.i..b.i {
            values[j] = a.y + s * (t[j] - a.t);
            slopes[j] = s;
        }
    }
    for &(v, c) in &verts {
        values[v.i] = v.y;
        vertex_kind[v.i] = Some(c);
    }
    values[0] = p.left_value;
    values[n - 1] = p.right_value;

    let ctol = 1e-9 * p.width_scale().max(f64::MIN_POSITIVE);
    let mut contact = vec![Contact::Free; n];
    for j in 1..n - 1 {
        let near_lo = (values[j] - p.lower[j]).abs() <= ctol;
        let near_hi = (values[j] - p.upper[j]).abs() <= ctol;
        let kink = slopes[j] - slopes[j - 1];
        contact[j] = match (vertex_kind[j], near_lo, near_hi) {
            (Some(Contact::Lower), _, _) if !near_hi || kink <= 0.0 => Contact::Lower,
            (Some(Contact::Upper), _, _) if !near_lo || kink >= 0.0 => Contact::Upper,
            (_, true, true) => {
                if kink < 0.0 {
                    Contact::Lower
                } else if kink > 0.0 {
                    Contact::Upper
                } else {
                    Contact::Free
                }
            }
            (_, true, false) => Contact::Lower,
            (_, false, true) => Contact::Upper,
            _ => Contact::Free,
        };
    }

    Ok(TautString {
        t_grid: p.t_grid.clone(),
        values,
        slopes,
        contact,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KktReport {
    pub max_kink_violation: f64,
    pub max_feasibility_violation: f64,
    pub n_segments: usize,
    pub kink_tol: f64,
    pub feas_tol: f64,
    pub pass: bool,
}

/// Checks stationarity at every interior knot (slope changes only where the
/// string touches a wall, with the sign fixed by the wall) and feasibility.
///
/// Kinks are measured relative to `1 + max(|s_{i-1}|, |s_i|)`. Contact labels
/// are honoured only when the knot actually lies on the labelled wall.
pub fn kkt_certificate(s: &TautString, p: &TubeProblem, kink_tol: f64, feas_tol: f64) -> KktReport {
    let t = s.t_grid.knots();
    let n = t.len();
    let u = &s.values;
    let slopes: Vec<f64> = (0..n - 1).map(|i| (u[i + 1] - u[i]) / (t[i + 1] - t[i])).collect();
    let wall_tol = feas_tol.max(1e-9 * p.width_scale());

    let mut feas: f64 = (u[0] - p.left_value).abs().max((u[n - 1] - p.right_value).abs());
    for i in 0..n {
        feas = feas.max(p.lower[i] - u[i]).max(u[i] - p.upper[i]);
    }

    let mut kink: f64 = 0.0;
    for i in 1..n - 1 {
        let d = slopes[i] - slopes[i - 1];
        let scale = 1.0 + slopes[i].abs().max(slopes[i - 1].abs());
        let label = match s.contact[i] {
            Contact::Lower if (u[i] - p.lower[i]).abs() <= wall_tol => Contact::Lower,
            Contact::Upper if (u[i] - p.upper[i]).abs() <= wall_tol => Contact::Upper,
            _ => Contact::Free,
        };
        let v = match label {
            Contact::Free => d.abs(),
            Contact::Lower => d.max(0.0),
            Contact::Upper => (-d).max(0.0),
        };
        kink = kink.max(v / scale);
    }

    let n_segments = count_runs(&s.contact[1..n - 1]);
    KktReport {
        max_kink_violation: kink,
        max_feasibility_violation: feas.max(0.0),
        n_segments,
        kink_tol,
        feas_tol,
        pass: kink <= kink_tol && feas <= feas_tol,
    }
}

fn count_runs(c: &[Contact]) -> usize {
    if c.is_empty() {
        return 0;
    }
    1 + c.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Per-cell slopes of the string, placed at cell midpoints.
pub fn derivative_signal(s: &TautString) -> SampledFunction {
    let mid = Grid::from_knots(s.t_grid.midpoints()).expect("midpoints of a valid grid");
    SampledFunction::new(mid, s.slopes.clone()).expect("one slope per cell")
}
