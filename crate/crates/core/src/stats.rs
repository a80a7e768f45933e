//! Small regression helpers used by refinement studies.

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Slope of `log err` against `log(1/N)`; the observed convergence order.
pub fn convergence_order(ns: &[usize], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errors)
        .map(|(&n, &e)| ((1.0 / n as f64).ln(), e.ln()))
        .collect();
    ls_slope(&pts)
}
