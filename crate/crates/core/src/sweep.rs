//! Parameter sweeps over independent tuples. Each tuple records its own
//! failure instead of aborting the sweep.

use serde::Serialize;

use crate::certificate::CertificateReport;
use crate::error::Result;
use crate::grid::{log_grid, make_grid, Grading};
use crate::ictv::{boundedness_report, denoise_ictv, ictv_optimality, BoundednessReport, IctvOptions, IctvSource};
use crate::par::{map_with, Exec};
use crate::radial::{
    classify_power, cubic_residual, dual_field_z, explicit_minimizer, inverse_radius, l2_phi_error_from,
    switching_inequality, BoundednessVerdict, SwitchingIntegrals,
};
use crate::rof::{denoise, optimality_residuals};
use crate::stats::convergence_order;
use crate::weights::WeightPair;

/// One parameter tuple: either a result or the reason it failed.
#[derive(Debug, Clone, Serialize)]
pub struct Row<T> {
    pub value: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<T> Row<T> {
    fn from_result(value: f64, r: Result<(T, bool)>) -> Self {
        match r {
            Ok((t, pass)) => Row { value, pass, result: Some(t), error: None },
            Err(e) => Row { value, pass: false, result: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sweep<T> {
    pub kind: &'static str,
    pub rows: Vec<Row<T>>,
    /// Convergence order or monotonicity summary, where the sweep has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression: Option<Regression>,
}

impl<T> Sweep<T> {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Regression {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub c: f64,
    pub flat_value: f64,
    pub cubic_residual: f64,
    pub dual_field: CertificateReport,
}

/// Breakpoint `c(alpha)` and the dual-field check on a uniform grid of `n`
/// cells. The regression is 1 when `c` decreases strictly along the sweep.
pub fn alpha_sweep(alphas: &[f64], n: usize, exec: Exec) -> Sweep<AlphaRow> {
    let rows = map_with(exec, alphas, |&alpha| {
        let r = (|| {
            let s = explicit_minimizer(alpha)?;
            let g = make_grid(0.0, 1.0, n, Grading::Uniform)?;
            let rep = dual_field_z(&s, &g);
            let pass = rep.pass();
            let row = AlphaRow {
                c: s.c,
                flat_value: s.flat_value(),
                cubic_residual: cubic_residual(alpha, s.c),
                dual_field: rep,
            };
            Ok((row, pass))
        })();
        Row::from_result(alpha, r)
    });
    let regression = (!rows.is_empty()).then(|| {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.result.as_ref().map(|x| (r.value, x.c)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mono = pts.windows(2).all(|w| w[1].1 < w[0].1);
        Regression { name: "c_strictly_decreasing", value: if mono { 1.0 } else { 0.0 } }
    });
    Sweep { kind: "alpha", rows, regression }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementRow {
    pub cells: usize,
    pub l2_phi_error: f64,
    pub energy: f64,
    pub gap: f64,
    pub certificate: CertificateReport,
}

/// Denoises `f = 1/r` with `phi = rho = r^2` on log grids over `[a, 1]` and
/// measures the weighted `L^2` error against the explicit minimizer on the
/// same interval. The regression is the observed order.
pub fn refinement_sweep(ns: &[usize], alpha: f64, a: f64, exec: Exec) -> Sweep<RefinementRow> {
    let rows = map_with(exec, ns, |&n| {
        let r = (|| {
            let exact = explicit_minimizer(alpha)?;
            let w = WeightPair::radial(3, alpha)?;
            let f = inverse_radius();
            let g = log_grid(a, 1.0, n)?;
            let sol = denoise(&f, &w, &g)?;
            let cert = optimality_residuals(&sol, &f, &w)?;
            let pass = cert.pass();
            let row = RefinementRow {
                cells: n,
                l2_phi_error: l2_phi_error_from(&sol, &exact.profile(), 3, a),
                energy: sol.energy,
                gap: sol.gap,
                certificate: cert,
            };
            Ok((row, pass))
        })();
        Row::from_result(n as f64, r)
    });
    let (cells, errs): (Vec<usize>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.result.as_ref().map(|x| (x.cells, x.l2_phi_error)))
        .unzip();
    let regression = (cells.len() >= 2).then(|| Regression {
        name: "convergence_order",
        value: convergence_order(&cells, &errs),
    });
    Sweep { kind: "n", rows, regression }
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaRow {
    /// `None` when the data is outside the classifier's range, e.g. not in `L^2`.
    pub classification: Option<BoundednessVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification_error: Option<String>,
    /// `(nu, I/J)` pairs; empty outside the regime of the switching test.
    pub switching: Vec<(f64, SwitchingIntegrals)>,
}

/// Classifies `f = r^{-beta}` in dimension `d` and, for `beta > 1, d >= 3`,
/// evaluates the switching inequality at each `nu`. A tuple fails only when
/// neither part produced a result.
pub fn beta_sweep(betas: &[f64], d: u32, alpha: f64, nus: &[f64], exec: Exec) -> Sweep<BetaRow> {
    let rows = map_with(exec, betas, |&beta| {
        let r = (|| {
            let switching = if beta > 1.0 && d >= 3 {
                nus.iter()
                    .map(|&nu| Ok((nu, switching_inequality(beta, d, alpha, nu)?)))
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            let row = match classify_power(beta, d) {
                Ok(v) => BetaRow { classification: Some(v), classification_error: None, switching },
                Err(e) if !switching.is_empty() => {
                    BetaRow { classification: None, classification_error: Some(e.to_string()), switching }
                }
                Err(e) => return Err(e),
            };
            Ok((row, true))
        })();
        Row::from_result(beta, r)
    });
    Sweep { kind: "beta", rows, regression: None }
}

#[derive(Debug, Clone, Serialize)]
pub struct IctvRow {
    pub cells: usize,
    pub gap: f64,
    pub iterations: usize,
    pub certified: bool,
    pub certificate: CertificateReport,
    pub sups: BoundednessReport,
}

/// Solves the ICTV problem for `data` on uniform grids of `[0, 1]`.
pub fn ictv_sweep(
    ns: &[usize],
    data: &IctvSource,
    alpha: f64,
    gamma: f64,
    opts: &IctvOptions,
    exec: Exec,
) -> Sweep<IctvRow> {
    let rows = map_with(exec, ns, |&n| {
        let r = (|| {
            let g = make_grid(0.0, 1.0, n, Grading::Uniform)?;
            let p = data.problem(&g, alpha, gamma)?;
            let s = denoise_ictv(&p, opts)?;
            let cert = ictv_optimality(&s, &p, opts.gap_tol);
            let pass = s.certified && cert.pass();
            let row = IctvRow {
                cells: n,
                gap: s.gap,
                iterations: s.iterations,
                certified: s.certified,
                certificate: cert,
                sups: boundedness_report(&s),
            };
            Ok((row, pass))
        })();
        Row::from_result(n as f64, r)
    });
    let sups: Vec<f64> = rows.iter().filter_map(|r| r.result.as_ref().map(|x| x.sups.sup_u)).collect();
    let regression = (sups.len() >= 2).then(|| {
        let (lo, hi) = sups.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        Regression { name: "sup_u_relative_spread", value: (hi - lo) / hi.abs().max(f64::MIN_POSITIVE) }
    });
    Sweep { kind: "ictv", rows, regression }
}
