use proptest::prelude::*;
use tautweight::ictv::{
    affine_tv_limit, boundedness_report, denoise_ictv, dual_fields, ictv_optimality, spike_cell_averages,
    IctvOptions, IctvProblem,
};
use tautweight::rof::denoise_cells;
use tautweight::{make_grid, Data, Grading, Grid};

fn grid(n: usize) -> Grid {
    make_grid(0.0, 1.0, n, Grading::Uniform).unwrap()
}

fn step(n: usize, alpha: f64, gamma: f64) -> IctvProblem {
    IctvProblem::from_data(&Data::step(), &grid(n), alpha, gamma).unwrap()
}

fn spike(n: usize, alpha: f64, gamma: f64) -> IctvProblem {
    let g = grid(n);
    IctvProblem::new(spike_cell_averages(&g, 0.5, 0.4).unwrap(), &g, alpha, gamma).unwrap()
}

#[test]
fn certified_on_step_and_spike() {
    let opts = IctvOptions::default();
    for p in [step(1024, 0.05, 0.1), spike(1024, 0.05, 0.1)] {
        let s = denoise_ictv(&p, &opts).unwrap();
        assert!(s.certified && s.gap <= 1e-6 && s.gap >= -1e-10, "gap {}", s.gap);
        assert!(s.iterations < 200_000);
        let rep = ictv_optimality(&s, &p, opts.gap_tol);
        assert!(rep.pass(), "{rep:?}");
        assert!(s.history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn fenchel_young_terms_sum_to_gap() {
    let p = spike(512, 0.05, 0.1);
    let s = denoise_ictv(&p, &IctvOptions::default()).unwrap();
    let rep = ictv_optimality(&s, &p, 1e-6);
    let fy = rep.get("tv_fenchel_young").unwrap().value + rep.get("tv2_fenchel_young").unwrap().value;
    assert!((fy - s.gap).abs() < 1e-9, "{fy} vs {}", s.gap);
}

#[test]
fn perturbed_solution_fails_certificate() {
    let p = step(256, 0.05, 0.1);
    let mut s = denoise_ictv(&p, &IctvOptions::default()).unwrap();
    for (i, u) in s.u.iter_mut().enumerate() {
        if i % 7 == 0 {
            *u += 0.05;
        }
    }
    s.primal_energy = p.primal(&s.u, &s.g);
    let rep = ictv_optimality(&s, &p, 1e-6);
    assert!(!rep.pass());
    assert!(rep.failures().any(|c| c.name.starts_with("tv_")));
}

#[test]
fn constant_data_has_zero_dual_fields() {
    let g = grid(64);
    let p = IctvProblem::new(vec![2.5; 64], &g, 0.1, 0.3).unwrap();
    let s = denoise_ictv(&p, &IctvOptions::default()).unwrap();
    let df = dual_fields(&p, &s.u);
    assert!(df.xi.iter().chain(&df.zeta).all(|x| x.abs() < 1e-12));
    assert!(ictv_optimality(&s, &p, 1e-6).pass());
}

#[test]
fn step_energy_beats_two_level_candidates() {
    // exhaustive search over (u, 0) with u two-level, jump anywhere, on N = 16
    let n = 16;
    let p = step(n, 0.02, 0.5);
    let s = denoise_ictv(&p, &IctvOptions { gap_tol: 1e-10, max_iter: 1000 }).unwrap();
    let zero = vec![0.0; n];
    let mut best = p.primal(&p.f, &zero);
    for j in 1..n {
        for a in 0..=100 {
            for b in 0..=20 {
                let (a, b) = (0.8 + 0.004 * a as f64, 0.01 * b as f64);
                let u: Vec<f64> = (0..n).map(|i| if i < j { a } else { b }).collect();
                best = best.min(p.primal(&u, &zero));
            }
        }
    }
    assert!(s.primal_energy <= best + 1e-12);
    // small alpha: the jump is carried by u - g
    let w: Vec<f64> = s.u.iter().zip(&s.g).map(|(u, g)| u - g).collect();
    let jump = (w[n / 2 - 1] - w[n / 2]).abs();
    assert!(jump > 0.5, "{jump}");
}

#[test]
fn sups_stable_under_refinement() {
    let opts = IctvOptions::default();
    for make in [spike as fn(usize, f64, f64) -> IctvProblem, step] {
        let reps: Vec<_> = [256, 1024, 4096]
            .iter()
            .map(|&n| {
                let s = denoise_ictv(&make(n, 0.05, 0.1), &opts).unwrap();
                assert!(s.certified);
                boundedness_report(&s)
            })
            .collect();
        let spread = |f: fn(&tautweight::ictv::BoundednessReport) -> f64| {
            let v: Vec<f64> = reps.iter().map(f).collect();
            let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(*x), b.max(*x)));
            (hi - lo) / hi
        };
        assert!(spread(|r| r.sup_u) < 0.02, "{reps:?}");
        assert!(spread(|r| r.sup_g) < 0.02, "{reps:?}");
        assert!(spread(|r| r.sup_u_minus_g) < 0.02, "{reps:?}");
    }
}

#[test]
fn bounded_data_gives_bounded_sups() {
    for n in [256, 1024] {
        let s = denoise_ictv(&step(n, 0.05, 0.1), &IctvOptions::default()).unwrap();
        let r = boundedness_report(&s);
        // energy comparison with (f, 0): overshoot is at most a few alpha
        assert!(r.sup_u <= 1.0 + 5.0 * 0.05, "{r:?}");
    }
}

#[test]
fn large_gamma_matches_affine_tv_limit() {
    let g = grid(512);
    let x = g.midpoints();
    let ramp_hat: Vec<f64> = x.iter().map(|&x| 0.5 * x + (0.2 - (x - 0.4).abs()).max(0.0)).collect();
    let cases = vec![
        step(512, 0.05, 10.0),
        spike(512, 0.05, 10.0),
        IctvProblem::new(ramp_hat, &g, 0.01, 10.0).unwrap(),
    ];
    for p in cases {
        let s = denoise_ictv(&p, &IctvOptions { gap_tol: 1e-12, max_iter: 1000 }).unwrap();
        let (u, _) = affine_tv_limit(&p).unwrap();
        let err = s.u.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-4, "err {err}");
    }
}

#[test]
fn large_gamma_symmetric_data_is_plain_tv() {
    // symmetric about the centre: the optimal affine part is zero
    let g = grid(512);
    let f: Vec<f64> = g.midpoints().iter().map(|&x| (0.25 - (x - 0.5).abs()).max(0.0) * 4.0).collect();
    let p = IctvProblem::new(f.clone(), &g, 0.02, 10.0).unwrap();
    let s = denoise_ictv(&p, &IctvOptions { gap_tol: 1e-12, max_iter: 1000 }).unwrap();
    let tv = denoise_cells(&f, &g.widths(), &vec![1.0; 513], 0.02).unwrap();
    let err = s.u.iter().zip(&tv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-4, "err {err}");
    assert!(boundedness_report(&s).sup_g < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn random_data_certified(
        f in prop::collection::vec(-2.0f64..2.0, 8..64),
        alpha in 0.005f64..0.2,
        gamma in 0.01f64..3.0,
    ) {
        let g = grid(f.len());
        let p = IctvProblem::new(f.clone(), &g, alpha, gamma).unwrap();
        let s = denoise_ictv(&p, &IctvOptions::default()).unwrap();
        prop_assert!(s.certified);
        prop_assert!(s.primal_energy >= s.dual_value - 1e-12 * s.primal_energy.abs().max(1.0));
        let zero = vec![0.0; f.len()];
        prop_assert!(s.primal_energy <= p.primal(&f, &zero) + 1e-12);
        let rep = ictv_optimality(&s, &p, 1e-6);
        prop_assert!(rep.pass(), "{:?}", rep);
    }
}
