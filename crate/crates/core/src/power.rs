//! Piecewise sums of powers `sum_j c_j r^{e_j}` on intervals of the half line.
//!
//! Radial data, weights and the explicit minimizers are all of this form, so
//! integrals against `r^k` are evaluated in closed form instead of by quadrature.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Term {
    pub coef: f64,
    pub exp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<Term>,
}

impl Piece {
    pub fn eval(&self, r: f64) -> f64 {
        self.terms.iter().map(|t| t.coef * pow(r, t.exp)).sum()
    }
}

/// A function that is a finite sum of powers on each of finitely many disjoint
/// intervals and zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewisePower {
    pieces: Vec<Piece>,
}

fn pow(r: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        r
    } else if e == -1.0 {
        1.0 / r
    } else if e == 2.0 {
        r * r
    } else {
        r.powf(e)
    }
}

/// `int_lo^hi r^p dr` for `0 <= lo <= hi`; `+inf` when divergent at 0.
pub fn power_integral(lo: f64, hi: f64, p: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if p == -1.0 {
        if lo == 0.0 {
            return f64::INFINITY;
        }
        return (hi / lo).ln();
    }
    let q = p + 1.0;
    if lo == 0.0 {
        if q < 0.0 {
            return f64::INFINITY;
        }
        return pow(hi, q) / q;
    }
    if q.abs() < 1e-3 {
        // (hi^q - lo^q)/q = lo^q * expm1(q ln(hi/lo))/q without cancellation
        let l = (hi / lo).ln();
        return pow(lo, q) * (q * l).exp_m1() / q;
    }
    (pow(hi, q) - pow(lo, q)) / q
}

fn simplify(terms: Vec<Term>) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        if t.coef == 0.0 {
            continue;
        }
        if let Some(o) = out.iter_mut().find(|o| o.exp == t.exp) {
            o.coef += t.coef;
        } else {
            out.push(t);
        }
    }
    out.retain(|t| t.coef != 0.0);
    out.sort_by(|a, b| a.exp.partial_cmp(&b.exp).unwrap());
    out
}

impl PiecewisePower {
    pub fn new(mut pieces: Vec<Piece>) -> Result<Self> {
        pieces.retain(|p| p.hi > p.lo);
        pieces.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        for p in &pieces {
            if !(p.lo >= 0.0 && p.hi.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "piece [{}, {}] must lie in [0, inf)",
                    p.lo, p.hi
                )));
            }
            if p.terms.iter().any(|t| !t.coef.is_finite() || !t.exp.is_finite()) {
                return Err(Error::InvalidParameter("non-finite term".into()));
            }
        }
        if pieces.windows(2).any(|w| w[1].lo < w[0].hi) {
            return Err(Error::InvalidParameter("overlapping pieces".into()));
        }
        Ok(Self { pieces })
    }

    /// `coef * r^exp` on `[lo, hi]`.
    pub fn monomial(coef: f64, exp: f64, lo: f64, hi: f64) -> Self {
        Self {
            pieces: vec![Piece {
                lo,
                hi,
                terms: vec![Term { coef, exp }],
            }],
        }
    }

    pub fn constant(value: f64, lo: f64, hi: f64) -> Self {
        Self::monomial(value, 0.0, lo, hi)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn support(&self) -> (f64, f64) {
        match (self.pieces.first(), self.pieces.last()) {
            (Some(a), Some(b)) => (a.lo, b.hi),
            _ => (0.0, 0.0),
        }
    }

    /// Breakpoints of all pieces, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        b
    }

    /// Value at `r`; at an interior breakpoint the right-hand piece is used.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.pieces.len();
        for (i, p) in self.pieces.iter().enumerate() {
            let last = i + 1 == n;
            if r >= p.lo && (r < p.hi || (last && r == p.hi)) {
                return p.eval(r);
            }
        }
        0.0
    }

    /// `int_a^b g(r) r^k dr` in closed form.
    pub fn moment(&self, a: f64, b: f64, k: f64) -> f64 {
        let mut s = 0.0;
        for p in &self.pieces {
            let lo = p.lo.max(a);
            let hi = p.hi.min(b);
            if hi <= lo {
                continue;
            }
            for t in &p.terms {
                s += t.coef * power_integral(lo, hi, t.exp + k);
            }
        }
        s
    }

    /// Whether `int_0^b g r^k` is finite, checked on the leading exponent near 0.
    pub fn integrable_at_zero(&self, k: f64) -> bool {
        match self.pieces.first() {
            Some(p) if p.lo == 0.0 => p.terms.iter().all(|t| t.exp + k > -1.0),
            _ => true,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_terms(|t| Term {
            coef: t.coef * c,
            exp: t.exp,
        })
    }

    pub fn map_terms(&self, f: impl Fn(&Term) -> Term) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    lo: p.lo,
                    hi: p.hi,
                    terms: simplify(p.terms.iter().map(&f).collect()),
                })
                .collect(),
        }
    }

    fn combine(&self, other: &Self, op: impl Fn(&[Term], &[Term]) -> Vec<Term>) -> Self {
        let mut cuts = self.breakpoints();
        cuts.extend(other.breakpoints());
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let find = |pp: &Self, lo: f64, hi: f64| -> Vec<Term> {
            pp.pieces
                .iter()
                .find(|p| p.lo <= lo && p.hi >= hi)
                .map(|p| p.terms.clone())
                .unwrap_or_default()
        };
        let mut pieces = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let a = find(self, lo, hi);
            let b = find(other, lo, hi);
            let covered = self.pieces.iter().any(|p| p.lo <= lo && p.hi >= hi)
                || other.pieces.iter().any(|p| p.lo <= lo && p.hi >= hi);
            if covered {
                pieces.push(Piece {
                    lo,
                    hi,
                    terms: simplify(op(&a, &b)),
                });
            }
        }
        Self { pieces }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a.iter().chain(b).copied().collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, |a, b| {
            let mut out = Vec::with_capacity(a.len() * b.len());
            for x in a {
                for y in b {
                    out.push(Term {
                        coef: x.coef * y.coef,
                        exp: x.exp + y.exp,
                    });
                }
            }
            out
        })
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// Restriction to `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .filter_map(|p| {
                    let a = p.lo.max(lo);
                    let b = p.hi.min(hi);
                    (b > a).then(|| Piece {
                        lo: a,
                        hi: b,
                        terms: p.terms.clone(),
                    })
                })
                .collect(),
        }
    }

    /// `int_a^b |g(r)|^p r^k dr`.  Single-term pieces are integrated exactly;
    /// pieces with several terms use composite Gauss-Legendre quadrature and must
    /// stay away from 0.
    pub fn abs_pow_moment(&self, a: f64, b: f64, p: f64, k: f64) -> Result<f64> {
        let mut s = 0.0;
        for pc in &self.pieces {
            let lo = pc.lo.max(a);
            let hi = pc.hi.min(b);
            if hi <= lo {
                continue;
            }
            match pc.terms.as_slice() {
                [] => {}
                [t] => s += t.coef.abs().powf(p) * power_integral(lo, hi, t.exp * p + k),
                _ => {
                    if lo <= 0.0 {
                        return Err(Error::UnsupportedProfile(
                            "multi-term piece touching r = 0".into(),
                        ));
                    }
                    s += gauss_legendre(lo, hi, 256, |r| pc.eval(r).abs().powf(p) * pow(r, k));
                }
            }
        }
        Ok(s)
    }

    /// Sorted solutions of `g(r) = s` inside `[a, b]` (excluding piece
    /// endpoints where `g` jumps past `s`; those are found by the caller from
    /// the breakpoint list).
    pub fn roots(&self, s: f64, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for pc in &self.pieces {
            let lo = pc.lo.max(a);
            let hi = pc.hi.min(b);
            if hi <= lo {
                continue;
            }
            match pc.terms.as_slice() {
                [] => {}
                [t] if t.exp != 0.0 => {
                    let x = s / t.coef;
                    if x > 0.0 {
                        let r = x.powf(1.0 / t.exp);
                        if r > lo && r < hi {
                            out.push(r);
                        }
                    }
                }
                [_] => {}
                _ => {
                    let n = 512;
                    let geo = lo > 0.0;
                    let node = |i: usize| {
                        let w = i as f64 / n as f64;
                        if geo {
                            lo * (hi / lo).powf(w)
                        } else {
                            lo + (hi - lo) * w
                        }
                    };
                    let g = |r: f64| pc.eval(r) - s;
                    let mut x0 = node(0).max(f64::MIN_POSITIVE);
                    let mut g0 = g(x0);
                    for i in 1..=n {
                        let x1 = node(i);
                        let g1 = g(x1);
                        if g0 == 0.0 && i > 1 {
                            out.push(x0);
                        } else if g0 * g1 < 0.0 {
                            out.push(bisect(g, x0, x1));
                        }
                        x0 = x1;
                        g0 = g1;
                    }
                }
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.dedup();
        out
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Composite 10-point Gauss-Legendre on `panels` panels, geometric when `a > 0`.
pub fn gauss_legendre(a: f64, b: f64, panels: usize, g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre_rule(10);
    let geo = a > 0.0 && b / a > 4.0;
    let edge = |i: usize| {
        let t = i as f64 / panels as f64;
        if geo {
            a * (b / a).powf(t)
        } else {
            a + (b - a) * t
        }
    };
    let mut s = 0.0;
    for i in 0..panels {
        let (lo, hi) = (edge(i), edge(i + 1));
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * h * g(c + h * xi);
        }
    }
    s
}
