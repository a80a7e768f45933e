//! Acceptance suite: one PASS/FAIL line per criterion with the measured
//! values. A failing criterion is reported, not hidden; the process still
//! exits 0 so the rest of the test run proceeds.

mod common;

use std::time::{Duration, Instant};

use common::{qp_oracle, random_tube, rng};
use tautweight::counterexample::{direction_step, dual_certificate_g, OscillatoryProfile, Shape};
use tautweight::ictv::{affine_tv_limit, denoise_ictv, ictv_optimality, IctvOptions, IctvSource};
use tautweight::levelset::{
    auto_levels, isoperimetric_report, layer_cake_check, level_set, perimeter_identity_residual, PerimeterMode,
    RadialProfile,
};
use tautweight::par::Exec;
use tautweight::radial::{
    classify_power, cubic_residual, dual_field_z, explicit_minimizer, inverse_radius, solve_cubic_c,
    switching_inequality, Verdict,
};
use tautweight::rof::{denoise, denoise_cells, optimality_residuals};
use tautweight::sweep::{alpha_sweep, ictv_sweep, refinement_sweep};
use tautweight::{kkt_certificate, make_grid, solve_tube, Data, Grading, WeightPair};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, t: Duration, o: Outcome) -> bool {
    println!(
        "criterion {id:>2} {:<4} {name}: {} [{:.3} s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        t.as_secs_f64()
    );
    o.pass
}

fn timed(f: impl FnOnce() -> Outcome) -> (Duration, Outcome) {
    let t = Instant::now();
    let o = f();
    (t.elapsed(), o)
}

fn c1() -> (Duration, Outcome) {
    let t = Instant::now();
    let c = solve_cubic_c(0.25).unwrap();
    let dt = t.elapsed();
    let res = cubic_residual(0.25, c).abs();
    let pass = (c - 0.34).abs() <= 5e-3 && res <= 1e-12 && dt < Duration::from_millis(1);
    (dt, Outcome { pass, detail: format!("c = {c:.6}, cubic residual {res:.1e}, runtime {:.1} us", dt.as_secs_f64() * 1e6) })
}

fn c2() -> (Duration, Outcome) {
    let t = Instant::now();
    let g = make_grid(0.0, 1.0, 4096, Grading::Uniform).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.25, 0.3, 0.4] {
        let t0 = Instant::now();
        let s = explicit_minimizer(alpha).unwrap();
        let sol = s.to_rof_solution(&g).unwrap();
        let w = WeightPair::radial(3, alpha).unwrap();
        let rep = optimality_residuals(&sol, &inverse_radius(), &w).unwrap();
        let dt = t0.elapsed();
        let worst = rep.checks.iter().map(|c| c.value).fold(0.0, f64::max);
        pass &= rep.checks.iter().all(|c| c.value <= 1e-6) && dt < Duration::from_secs(1);
        parts.push(format!("alpha {alpha}: max residual {worst:.1e} ({:.0} ms)", dt.as_secs_f64() * 1e3));
    }
    (t.elapsed(), Outcome { pass, detail: parts.join("; ") })
}

fn c3() -> (Duration, Outcome) {
    timed(|| {
        let alphas: Vec<f64> = (0..21).map(|k| 0.25 + 0.2 * k as f64 / 20.0).collect();
        let s = alpha_sweep(&alphas, 4096, Exec::Parallel);
        let mut sup: f64 = 0.0;
        let mut cont: f64 = 0.0;
        let mut div: f64 = 0.0;
        let mut ok = s.rows.len() == 21;
        for r in &s.rows {
            let Some(x) = &r.result else {
                ok = false;
                continue;
            };
            let get = |n: &str| x.dual_field.get(n).map_or(f64::INFINITY, |c| c.value);
            sup = sup.max(get("sup_norm_excess"));
            cont = cont.max(get("continuity_at_c")).max(get("continuity_at_1"));
            div = div.max(get("divergence_identity"));
        }
        let pass = ok && sup <= 1e-10 && cont <= 1e-10 && div <= 1e-8;
        Outcome {
            pass,
            detail: format!("21 alphas: |z| excess {sup:.1e}, continuity {cont:.1e}, divergence {div:.1e}"),
        }
    })
}

fn c4() -> (Duration, Outcome) {
    timed(|| {
        let ns = [256, 512, 1024, 2048, 4096];
        let s = refinement_sweep(&ns, 0.25, 1e-6, Exec::Parallel);
        let errs: Vec<f64> = s.rows.iter().map(|r| r.result.as_ref().map_or(f64::NAN, |x| x.l2_phi_error)).collect();
        let slope = s.regression.as_ref().map_or(f64::NAN, |r| r.value);
        let last = errs[4];
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let pass = decreasing && slope >= 1.0 && last <= 1e-2;
        Outcome {
            pass,
            detail: format!(
                "log grid from 1e-6, errors {:?}, log-log slope {slope:.5} (need >= 1.0), error at 4096 {last:.2e}",
                errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
            ),
        }
    })
}

fn c5() -> (Duration, Outcome) {
    timed(|| {
        let mut r = rng(2024);
        let mut worst: f64 = 0.0;
        let mut certified = 0;
        for _ in 0..200 {
            let p = random_tube(&mut r, 32);
            let s = solve_tube(&p).unwrap();
            let o = qp_oracle(&p);
            let e = s.values.iter().zip(&o).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(e);
            if kkt_certificate(&s, &p, 1e-7, 1e-9).pass {
                certified += 1;
            }
        }
        Outcome {
            pass: worst <= 1e-7 && certified == 200,
            detail: format!("200 tubes: max deviation {worst:.1e}, {certified}/200 KKT certified"),
        }
    })
}

fn c6() -> (Duration, Outcome) {
    timed(|| {
        let g = make_grid(0.0, 1.0, 1024, Grading::Uniform).unwrap();
        let sol = denoise(&Data::step(), &WeightPair::unit(0.1).unwrap(), &g).unwrap();
        let mid = g.midpoints();
        let err = sol
            .u
            .iter()
            .zip(&mid)
            .map(|(u, &x)| (u - if x < 0.5 { 0.8 } else { 0.2 }).abs())
            .fold(0.0, f64::max);
        Outcome { pass: err <= 1e-8, detail: format!("max |u - (0.8, 0.2)| = {err:.1e}") }
    })
}

fn ratios(beta: f64) -> Vec<f64> {
    (1..=6)
        .map(|k| switching_inequality(beta, 3, 0.1, 10f64.powi(-k)).unwrap().ratio)
        .collect()
}

fn c7() -> (Duration, Outcome) {
    timed(|| {
        let v = |b: f64, d: u32| classify_power(b, d).unwrap().verdict;
        let unb = v(1.2, 3) == Verdict::Unbounded;
        let bnd = v(0.5, 3) == Verdict::Bounded;
        let d2 = [0.1, 0.3, 0.5, 0.7, 0.9].iter().all(|&b| v(b, 2) == Verdict::Bounded);
        let lit = ratios(1.5);
        let lit_ok = lit.windows(2).all(|w| w[1] <= w[0]) && lit[5] < 1e-2;
        let l2 = ratios(1.4);
        let l2_ok = l2.windows(2).all(|w| w[1] < w[0]) && l2[5] < 1e-2;
        Outcome {
            pass: unb && bnd && d2 && lit_ok && l2_ok,
            detail: format!(
                "(1.2,3) unbounded {unb}, (0.5,3) bounded {bnd}, d=2 bounded {d2}; I/J beta=1.5: {:?} (J divergent); beta=1.4: {:?}",
                lit.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
                l2.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()
            ),
        }
    })
}

fn c8() -> (Duration, Outcome) {
    timed(|| {
        let alpha = 0.25;
        let s = explicit_minimizer(alpha).unwrap();
        let g = make_grid(0.0, 1.0, 4096, Grading::Uniform).unwrap();
        let certified = dual_field_z(&s, &g).pass();
        let up = s.profile();
        let Data::Exact(fp) = inverse_radius() else { unreachable!() };
        let v = RadialProfile::Exact(fp.sub(&up).scale(1.0 / alpha));
        let u = RadialProfile::Exact(up);
        let f = inverse_radius();
        let levels = auto_levels(&u, 20, &[s.flat_value(), 2.0 * s.flat_value()]);
        let mut ident: f64 = 0.0;
        let mut ratio = f64::INFINITY;
        for &lv in &levels {
            ident = ident.max(perimeter_identity_residual(&u, &f, alpha, lv, 3, PerimeterMode::Relative).unwrap());
            let ls = level_set(&u, lv, 3).unwrap();
            if !ls.is_empty() {
                ratio = ratio.min(isoperimetric_report(&v, &ls).unwrap().ratio);
            }
        }
        let lc = layer_cake_check(&u, 3, 4000).unwrap();
        let lg = tautweight::log_grid(1e-6, 1.0, 4096).unwrap();
        let vals = lg.knots().windows(2).map(|w| u.eval((w[0] * w[1]).sqrt())).collect();
        let lc_cells = layer_cake_check(&RadialProfile::cells(lg, vals).unwrap(), 3, 4000).unwrap();
        let pass = certified
            && levels.len() >= 20
            && ident <= 1e-6
            && lc.rel_err < 1e-2
            && lc_cells.rel_err < 1e-2
            && ratio >= 1.0 - 1e-9;
        Outcome {
            pass,
            detail: format!(
                "{} levels: max identity residual {ident:.1e}, layer cake {:.1e} / {:.1e} (sampled), min isoperimetric ratio {ratio:.6}",
                levels.len(),
                lc.rel_err,
                lc_cells.rel_err
            ),
        }
    })
}

fn c9() -> (Duration, Outcome) {
    timed(|| {
        let p = OscillatoryProfile::new(Shape::Hat, 8, 64).unwrap();
        let mut rel: f64 = 0.0;
        let mut canc: f64 = 0.0;
        let mut q = Vec::new();
        for n in 0..=8 {
            let s = direction_step(&p, n).unwrap();
            let want = -(2f64.powf(n as f64 / 2.0)) * 2.0 * 3f64.sqrt();
            rel = rel.max(((s.quotient - want) / want).abs());
            canc = canc.max(s.cancellation_residual);
            q.push(s.quotient);
        }
        let dec = q.windows(2).all(|w| w[1] < w[0]);
        let m = OscillatoryProfile::new(Shape::MollifiedStep, 8, 64).unwrap();
        let cert = dual_certificate_g(&m, 1).unwrap();
        Outcome {
            pass: rel <= 1e-6 && dec && canc <= 1e-12 && cert.pass(),
            detail: format!(
                "n=0..8 max relative quotient error {rel:.1e}, strictly decreasing {dec}, cancellation {canc:.1e}, mollified-step certificate {}",
                cert.pass()
            ),
        }
    })
}

fn c10() -> (Duration, Outcome) {
    timed(|| {
        let opts = IctvOptions::default();
        let (alpha, gamma) = (0.05, 0.1);
        let mut parts = Vec::new();
        let mut pass = true;
        for (name, spec) in [("step", "builtin:step"), ("spike", "builtin:spike")] {
            let src = IctvSource::parse(spec).unwrap();
            let sw = ictv_sweep(&[256, 1024, 4096], &src, alpha, gamma, &opts, Exec::Parallel);
            let rows: Vec<_> = sw.rows.iter().filter_map(|r| r.result.as_ref()).collect();
            if rows.len() != 3 {
                pass = false;
                parts.push(format!("{name}: solver error"));
                continue;
            }
            let r1024 = rows[1];
            let worst = r1024.certificate.checks.iter().map(|c| c.value).fold(0.0, f64::max);
            let res_ok = r1024.certificate.checks.iter().all(|c| c.value <= 10.0 * opts.gap_tol);
            let spread = |f: &dyn Fn(&tautweight::ictv::BoundednessReport) -> f64| {
                let v: Vec<f64> = rows.iter().map(|r| f(&r.sups)).collect();
                let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(*x), b.max(*x)));
                (hi - lo) / hi
            };
            let sp = spread(&|r| r.sup_u).max(spread(&|r| r.sup_g)).max(spread(&|r| r.sup_u_minus_g));
            let ok = r1024.gap <= 1e-6 && r1024.iterations <= 200_000 && res_ok && sp <= 0.02;
            pass &= ok;
            parts.push(format!(
                "{name}: N=1024 gap {:.1e} in {} it, max residual {worst:.1e}, sup spread {:.2}%",
                r1024.gap,
                r1024.iterations,
                sp * 100.0
            ));
        }

        // large gamma: spike is symmetric about 1/2, so the limit is plain TV;
        // step is compared with TV modulo affine functions
        let g = make_grid(0.0, 1.0, 1024, Grading::Uniform).unwrap();
        let tight = IctvOptions { gap_tol: 1e-12, max_iter: 1000 };
        let spike = IctvSource::parse("builtin:spike").unwrap().problem(&g, alpha, 10.0).unwrap();
        let s = denoise_ictv(&spike, &tight).unwrap();
        let tv = denoise_cells(&spike.f, &g.widths(), &vec![1.0; 1025], alpha).unwrap();
        let e_spike = s.u.iter().zip(&tv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let step = IctvSource::parse("builtin:step").unwrap().problem(&g, alpha, 10.0).unwrap();
        let s = denoise_ictv(&step, &tight).unwrap();
        let (lim, _) = affine_tv_limit(&step).unwrap();
        let e_step = s.u.iter().zip(&lim).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let cert_ok = ictv_optimality(&s, &step, tight.gap_tol.max(1e-9)).pass();
        pass &= e_spike <= 1e-4 && e_step <= 1e-4;
        parts.push(format!(
            "gamma=10: |u - TV(spike)| {e_spike:.1e}, |u - TV mod affine(step)| {e_step:.1e} (certified {cert_ok})"
        ));
        Outcome { pass, detail: parts.join("; ") }
    })
}

fn main() {
    let names = [
        "cubic breakpoint",
        "explicit minimizer certificate",
        "dual field z",
        "pipeline convergence",
        "taut string vs QP oracle",
        "classical ROF step",
        "boundedness classifiers",
        "level-set identities",
        "counterexample quotients",
        "ICTV",
    ];
    let runs: [fn() -> (Duration, Outcome); 10] = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10];
    let mut passed = 0;
    for (i, (run, name)) in runs.iter().zip(names).enumerate() {
        let (t, o) = run();
        if report(i as u32 + 1, name, t, o) {
            passed += 1;
        }
    }
    println!("acceptance: {passed}/10 criteria pass");
}
