#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tautweight::{Grid, TubeProblem};

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            if m != 0.0 {
                for k in c..n {
                    a[r][k] -= m * a[c][k];
                }
                b[r] -= m * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Primal-dual active-set solution of the tube QP
/// `min sum (U_{i+1}-U_i)^2/dt_i`, `lower <= U <= upper`, pinned ends.
/// Independent of the funnel sweep; exact up to the linear solves.
pub fn qp_oracle(p: &TubeProblem) -> Vec<f64> {
    let t = p.t_grid.knots();
    let n = t.len();
    let m = n - 2;
    let mut full = vec![0.0; n];
    full[0] = p.left_value;
    full[n - 1] = p.right_value;
    if m == 0 {
        return full;
    }
    let w: Vec<f64> = (0..n - 1).map(|i| 1.0 / (t[i + 1] - t[i])).collect();
    // interior variable k corresponds to knot k+1
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for k in 0..m {
        a[k][k] = w[k] + w[k + 1];
        if k + 1 < m {
            a[k][k + 1] = -w[k + 1];
            a[k + 1][k] = -w[k + 1];
        }
    }
    b[0] += w[0] * p.left_value;
    b[m - 1] += w[n - 2] * p.right_value;
    let lo: Vec<f64> = (0..m).map(|k| p.lower[k + 1]).collect();
    let hi: Vec<f64> = (0..m).map(|k| p.upper[k + 1]).collect();

    // projected Gauss-Seidel to convergence
    let mut x: Vec<f64> = (0..m).map(|k| 0.5 * (lo[k] + hi[k])).collect();
    for _ in 0..400_000 {
        let mut change: f64 = 0.0;
        for k in 0..m {
            let mut r = b[k];
            if k > 0 {
                r -= a[k][k - 1] * x[k - 1];
            }
            if k + 1 < m {
                r -= a[k][k + 1] * x[k + 1];
            }
            let v = (r / a[k][k]).clamp(lo[k], hi[k]);
            change = change.max((v - x[k]).abs());
            x[k] = v;
        }
        if change < 1e-15 {
            break;
        }
    }
    // polish: solve exactly on the active set found above
    let act = 1e-9;
    let mut aa = a.clone();
    let mut bb = b.clone();
    for k in 0..m {
        let pin = if (x[k] - lo[k]).abs() <= act {
            Some(lo[k])
        } else if (x[k] - hi[k]).abs() <= act {
            Some(hi[k])
        } else {
            None
        };
        if let Some(v) = pin {
            for j in 0..m {
                aa[k][j] = 0.0;
            }
            aa[k][k] = 1.0;
            bb[k] = v;
        }
    }
    let y = dense_solve(aa, bb);
    let feasible = (0..m).all(|k| y[k] >= lo[k] - 1e-12 && y[k] <= hi[k] + 1e-12);
    if feasible {
        x = y;
    }
    full[1..n - 1].copy_from_slice(&x);
    full
}

/// Random tube on up to `max_cells` cells with non-uniform spacing; a fraction
/// of the gates are degenerate (zero width).
pub fn random_tube(rng: &mut ChaCha8Rng, max_cells: usize) -> TubeProblem {
    let cells = rng.gen_range(2..=max_cells);
    let mut t = vec![0.0];
    for _ in 0..cells {
        let last = *t.last().unwrap();
        t.push(last + rng.gen_range(0.05..1.0));
    }
    let mut lower = Vec::with_capacity(cells + 1);
    let mut upper = Vec::with_capacity(cells + 1);
    let mut c = 0.0;
    for _ in 0..=cells {
        c += rng.gen_range(-0.6..0.6);
        let w = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..0.8) };
        lower.push(c - w);
        upper.push(c + w);
    }
    let left = rng.gen_range(lower[0]..=upper[0]);
    let right = rng.gen_range(lower[cells]..=upper[cells]);
    TubeProblem::new(Grid::from_knots(t).unwrap(), lower, upper, left, right).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
