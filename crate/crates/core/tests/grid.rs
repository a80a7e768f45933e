use proptest::prelude::*;
use tautweight::{integrate, make_grid, weighted_lp_norm, Grading, Grid, SampledFunction};

fn grid(n: usize, ratio: f64) -> Grid {
    make_grid(0.0, 1.0, n, Grading::Geometric(ratio)).unwrap()
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (3usize..60, 0.8f64..1.25).prop_flat_map(|(n, r)| {
        (
            prop::collection::vec(-5.0f64..5.0, n + 1),
            prop::collection::vec(-5.0f64..5.0, n + 1),
            Just(r),
        )
    })
}

proptest! {
    #[test]
    fn integrate_is_linear_and_monotone((a, b, r) in pair(), s in -3.0f64..3.0) {
        let g = grid(a.len() - 1, r);
        let fa = SampledFunction::new(g.clone(), a.clone()).unwrap();
        let fb = SampledFunction::new(g.clone(), b.clone()).unwrap();
        let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let fc = SampledFunction::new(g.clone(), comb).unwrap();
        let lin = integrate(&fc) - integrate(&fa) - s * integrate(&fb);
        prop_assert!(lin.abs() <= 1e-12 * (1.0 + integrate(&fa).abs() + s.abs() * integrate(&fb).abs()) + 1e-12);

        let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        let fh = SampledFunction::new(g, hi).unwrap();
        prop_assert!(integrate(&fa) <= integrate(&fh) + 1e-12);
    }

    #[test]
    fn weighted_norm_triangle_inequality((a, b, r) in pair(), p in 1.0f64..4.0) {
        let g = grid(a.len() - 1, r);
        let w = SampledFunction::from_fn(&g, |x| x * x + 0.1).unwrap();
        let fa = SampledFunction::new(g.clone(), a.clone()).unwrap();
        let fb = SampledFunction::new(g.clone(), b.clone()).unwrap();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let fs = SampledFunction::new(g, sum).unwrap();
        let lhs = weighted_lp_norm(&fs, &w, p).unwrap();
        let rhs = weighted_lp_norm(&fa, &w, p).unwrap() + weighted_lp_norm(&fb, &w, p).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }
}
