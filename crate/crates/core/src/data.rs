//! Data sources: closed-form piecewise powers or tabulated samples.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::power::{Piece, PiecewisePower, Term};

#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    Exact(PiecewisePower),
    Sampled(SampledFunction),
}

impl Data {
    /// `r^{-beta}` on `(0, 1]`.
    pub fn power(beta: f64) -> Self {
        Data::Exact(PiecewisePower::monomial(1.0, -beta, 0.0, 1.0))
    }

    /// 1 on `(0, 1/2)`, 0 on `(1/2, 1)`.
    pub fn step() -> Self {
        Data::Exact(PiecewisePower::constant(1.0, 0.0, 0.5))
    }

    /// `1 - |2x - 1|` on `(0, 1)`.
    pub fn hat() -> Self {
        let p = PiecewisePower::new(vec![
            Piece { lo: 0.0, hi: 0.5, terms: vec![Term { coef: 2.0, exp: 1.0 }] },
            Piece {
                lo: 0.5,
                hi: 1.0,
                terms: vec![Term { coef: 2.0, exp: 0.0 }, Term { coef: -2.0, exp: 1.0 }],
            },
        ])
        .expect("static pieces");
        Data::Exact(p)
    }

    pub fn constant(value: f64) -> Self {
        Data::Exact(PiecewisePower::constant(value, 0.0, 1.0))
    }

    /// Parses `builtin:power:beta=..`, `builtin:step`, `builtin:hat`,
    /// `builtin:const:value=..`, or a path to a `t,value` CSV file.
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(rest) = spec.strip_prefix("builtin:") {
            let (name, args) = rest.split_once(':').unwrap_or((rest, ""));
            let arg = |key: &str| -> Result<f64> {
                args.split(',')
                    .filter_map(|kv| kv.split_once('='))
                    .find(|(k, _)| k.trim() == key)
                    .ok_or_else(|| Error::InvalidParameter(format!("builtin:{name} needs {key}=")))
                    .and_then(|(_, v)| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::InvalidParameter(format!("{key}: {e}")))
                    })
            };
            return match name {
                "power" => {
                    let beta = arg("beta")?;
                    if !beta.is_finite() {
                        return Err(Error::InvalidParameter("beta must be finite".into()));
                    }
                    Ok(Data::power(beta))
                }
                "step" => Ok(Data::step()),
                "hat" => Ok(Data::hat()),
                "const" => Ok(Data::constant(arg("value")?)),
                other => Err(Error::InvalidParameter(format!("unknown builtin data {other:?}"))),
            };
        }
        let file = std::fs::File::open(Path::new(spec))?;
        Ok(Data::Sampled(SampledFunction::read_csv(file)?))
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Data::Exact(p) => p.eval(r),
            Data::Sampled(s) => s.interpolate(r),
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        match self {
            Data::Sampled(s) if s.grid().same_as(grid) => Ok(s.clone()),
            _ => SampledFunction::from_fn(grid, |r| self.eval(r)),
        }
    }

    /// Unweighted cell averages on `grid`; exact for closed-form data.
    pub fn cell_averages(&self, grid: &Grid) -> Result<Vec<f64>> {
        let k = grid.knots();
        match self {
            Data::Exact(p) => Ok(k
                .windows(2)
                .map(|w| p.moment(w[0], w[1], 0.0) / (w[1] - w[0]))
                .collect()),
            Data::Sampled(_) => {
                let s = self.sample(grid)?;
                let v = s.values();
                Ok((0..k.len() - 1).map(|i| 0.5 * (v[i] + v[i + 1])).collect())
            }
        }
    }

    pub fn is_nonnegative(&self, grid: &Grid) -> bool {
        grid.knots().iter().all(|&r| self.eval(r) >= 0.0)
    }
}
