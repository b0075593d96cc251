//! End-to-end acceptance suite. Prints one line per criterion and exits nonzero
//! if any criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use ricci_core::flow::{
    collapse_observables, integrate, nil_closed_form, rescale_to_normalized, sol_reduced, su2_monitor, FlowMode,
    IntegratorConfig,
};
use ricci_core::homogeneous::{DiagonalMetric, MilnorSignature};
use ricci_core::kahler::{
    curvature_equation_residual, evolve as kahler_evolve, mean_aligned_distance, stationary_newton, ComplexTorusGrid,
    FlatMetric, KahlerFlowConfig, KahlerMode, PotentialState,
};
use ricci_core::maxprinciple::{
    null_vector_condition_check, null_vector_triples, p_identity_check, p_lower_bound_check, pinched_triples,
    pinching_monitor, surface_extremum_check, uniform_triples,
};
use ricci_core::rng;
use ricci_core::surface::{
    curvature_energies, evolve, harnack_check, random_pairs, Background, ConformalState, SurfaceFlowConfig,
    SurfaceTrajectory,
};
use ricci_core::symbol::symbol_survey;

const SEED: u64 = 20240917;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn g(a: f64, b: f64, c: f64) -> DiagonalMetric {
    DiagonalMetric::new(a, b, c).unwrap()
}

fn unnormalized(sig: MilnorSignature, g0: &DiagonalMetric, t_end: f64) -> ricci_core::flow::FlowTrajectory {
    integrate(sig, g0, &IntegratorConfig::with_t_end(t_end), FlowMode::Unnormalized).unwrap()
}

fn criterion_1() -> Verdict {
    let traj = unnormalized(MilnorSignature::su2(), &g(1.0, 1.0, 1.0), 1.0);
    match traj.event {
        Some(ev) => {
            let rel = (ev.singularity_time - 0.25).abs() / 0.25;
            verdict(rel <= 1e-4, format!("T = {:.10} ({}), relative error {rel:.2e}", ev.singularity_time, ev.reason))
        }
        None => verdict(false, "no singularity detected"),
    }
}

fn criterion_2() -> Verdict {
    let mut worst: f64 = 0.0;
    for g0 in [g(1.0, 1.0, 1.0), g(2.0, 0.5, 3.0)] {
        let traj = unnormalized(MilnorSignature::nil(), &g0, 10.0);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = nil_closed_form(&g0, *t);
            for k in 0..3 {
                worst = worst.max(((s.coeffs()[k] - exact.coeffs()[k]) / exact.coeffs()[k]).abs());
            }
        }
    }
    verdict(worst <= 1e-6, format!("sup relative error {worst:.2e} over t ∈ [0, 10]"))
}

fn criterion_3() -> Verdict {
    let g0 = g(4.0, 1.0, 1.0);
    let traj = unnormalized(MilnorSignature::sol(), &g0, 5.0);
    let rep = sol_reduced(&traj).unwrap();
    let drift = rep.max_ac_drift / (g0.a() * g0.c());
    let b_floor = rep.samples.iter().map(|(t, b, _)| b - (g0.b() + 16.0 * t)).fold(f64::INFINITY, f64::min);
    let gaps: Vec<f64> = rep.samples.iter().map(|(_, _, gg)| (gg - 1.0).abs()).collect();
    let non_decreasing = gaps.windows(2).filter(|w| w[1] >= w[0]).count();
    verdict(
        drift <= 1e-9 && b_floor >= -1e-6 && non_decreasing == 0 && traj.times.last() == Some(&5.0),
        format!(
            "AC drift {drift:.2e}; min B − (B₀ + 16t) {b_floor:.3e}; |G−1| fails to decrease at {non_decreasing} of {} steps (final {:.3e})",
            gaps.len() - 1,
            gaps.last().unwrap()
        ),
    )
}

fn criterion_4() -> Verdict {
    let g0 = g(1.0, 2.0, 3.0);
    let traj =
        integrate(MilnorSignature::su2(), &g0, &IntegratorConfig::resolving(10.0), FlowMode::Unnormalized).unwrap();
    let rescaled = rescale_to_normalized(&traj).unwrap();
    let t_hat_end = *rescaled.times.last().unwrap();
    let direct = integrate(
        MilnorSignature::su2(),
        &rescaled.states[0],
        &IntegratorConfig::resolving(t_hat_end),
        FlowMode::Normalized,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for (t, s) in rescaled.times.iter().zip(&rescaled.states) {
        let d = direct.interpolate(*t).unwrap();
        for k in 0..3 {
            worst = worst.max((s.coeffs()[k] - d.coeffs()[k]).abs());
        }
    }
    verdict(worst <= 1e-5, format!("sup distance {worst:.2e} over t̃ ∈ [0, {t_hat_end:.3}]"))
}

fn criterion_5() -> Verdict {
    let (mut ordering, mut ratio) = (0, 0);
    for i in 0..20 {
        let mut r = rng::stream(SEED, i);
        let mut v = [r.random_range(0.2..3.0), r.random_range(0.2..3.0), r.random_range(0.2..3.0)];
        v.sort_by(f64::total_cmp);
        // εA ≤ C ≤ B
        let traj = integrate(
            MilnorSignature::su2(),
            &g(v[0], v[2], v[1]),
            &IntegratorConfig::resolving(10.0),
            FlowMode::Unnormalized,
        )
        .unwrap();
        let m = su2_monitor(&traj, 1e-9);
        ordering += m.ordering_violations;
        ratio += m.ratio_increases;
    }
    verdict(ordering == 0 && ratio == 0, format!("20 runs: {ordering} ordering violations, {ratio} ratio increases"))
}

fn criterion_6() -> Verdict {
    let eps = [1.0, 0.5, 0.1, 0.05, 0.01];
    let values: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let traj = integrate(
                MilnorSignature::su2(),
                &g(e, 2.0, 1.0),
                &IntegratorConfig::resolving(0.1),
                FlowMode::Unnormalized,
            )
            .unwrap();
            let at = ricci_core::flow::FlowTrajectory {
                times: vec![0.1],
                states: vec![traj.interpolate(0.1).unwrap()],
                ..traj
            };
            collapse_observables(&at, e)[0].f
        })
        .collect();
    let strictly = values.windows(2).all(|w| w[1] < w[0]);
    verdict(
        strictly,
        format!("F(0.1, ε) = [{}]", values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")),
    )
}

fn sphere_run() -> SurfaceTrajectory {
    let bg = Arc::new(Background::round_sphere(128).unwrap());
    let s = ConformalState::from_fn(bg, |th, _| 0.05 * th.cos()).unwrap();
    evolve(&s, &SurfaceFlowConfig::default()).unwrap()
}

fn torus_run() -> SurfaceTrajectory {
    let bg = Arc::new(Background::flat_torus(64).unwrap());
    let s = ConformalState::from_fn(bg, |x, _| 0.1 * x.cos()).unwrap();
    evolve(&s, &SurfaceFlowConfig::default()).unwrap()
}

fn conservation(traj: &SurfaceTrajectory, tol: f64) -> (bool, f64, f64) {
    let target = 4.0 * PI * traj.background().euler_characteristic();
    let a0 = traj.diagnostics[0].area;
    let gb = traj.diagnostics.iter().map(|d| (d.gauss_bonnet - target).abs()).fold(0.0, f64::max);
    let drift = traj.diagnostics.iter().map(|d| ((d.area - a0) / a0).abs()).fold(0.0, f64::max);
    (gb <= tol && drift <= 1e-6, gb, drift)
}

fn criterion_7(torus: &SurfaceTrajectory, sphere: &SurfaceTrajectory) -> Verdict {
    let (pt, gt, at) = conservation(torus, 1e-8);
    let (ps, gs, as_) = conservation(sphere, 1e-6);
    verdict(pt && ps, format!("torus: GB {gt:.1e}, area drift {at:.1e}; sphere: GB {gs:.1e}, area drift {as_:.1e}"))
}

fn criterion_8(torus: &SurfaceTrajectory) -> Verdict {
    let max_abs = |d: &ricci_core::surface::SurfaceDiagnostics| d.curvature.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let drop = max_abs(&torus.diagnostics[0]).ln() - max_abs(torus.diagnostics.last().unwrap()).ln();
    let energies: Vec<(f64, f64, f64)> = torus
        .states
        .iter()
        .zip(&torus.diagnostics)
        .filter(|(s, _)| s.t >= 1.0)
        .map(|(s, d)| {
            let (l2, grad) = curvature_energies(s, &d.curvature).unwrap();
            (s.t, l2, grad)
        })
        .collect();
    let rises = energies.windows(2).filter(|w| w[1].1 >= w[0].1 || w[1].2 >= w[0].2).count();
    verdict(
        drop >= 3.0 && rises == 0,
        format!("log max|R| drop {drop:.3}; {rises} non-decreasing energy steps after t = 1"),
    )
}

fn criterion_9(sphere: &SurfaceTrajectory) -> Verdict {
    let last = sphere.diagnostics.last().unwrap();
    let dev = last.curvature.iter().map(|r| ((r - last.r) / last.r).abs()).fold(0.0, f64::max);
    let entropy: Vec<f64> = sphere.diagnostics.iter().map(|d| d.entropy.unwrap()).collect();
    let rise = entropy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let pairs = random_pairs(sphere, 100, SEED).unwrap();
    let harnack = harnack_check(sphere, &pairs, 65).unwrap();
    let m = last.soliton_m_norm;
    verdict(
        dev <= 1e-3 && rise <= 1e-8 && harnack.worst_slack >= -1e-8 && m <= 1e-3,
        format!(
            "|R−r|/r {dev:.2e}; max entropy rise {rise:.1e}; Harnack worst slack {:.3e} over {} pairs; M_norm {m:.1e}",
            harnack.worst_slack, harnack.pairs
        ),
    )
}

fn criterion_10() -> Verdict {
    let torus = Arc::new(Background::flat_torus(16).unwrap());
    let sphere = Arc::new(Background::round_sphere(32).unwrap());
    let cfg = SurfaceFlowConfig { t_end: 1.0, output_interval: 0.05, cfl: 0.4 };
    let (mut runs, mut violations) = (0, 0);
    let mut worst = f64::INFINITY;
    for i in 0..100u64 {
        let mut r = rng::stream(SEED ^ 0x10, i);
        let (a1, a2, a3): (f64, f64, f64) =
            (r.random_range(-0.3..0.3), r.random_range(-0.2..0.2), r.random_range(-0.1..0.1));
        let (k1, k2): (f64, f64) = (r.random_range(1..=3) as f64, r.random_range(1..=3) as f64);
        let t = ConformalState::from_fn(torus.clone(), |x, y| {
            a1 * (k1 * x).cos() + a2 * (k2 * y).cos() + a3 * (x + y).cos()
        })
        .unwrap();
        let s = ConformalState::from_fn(sphere.clone(), |th, _| {
            a1 * th.cos() + a2 * (2.0 * th).cos() + a3 * (3.0 * th).cos()
        })
        .unwrap();
        for state in [t, s] {
            let traj = evolve(&state, &cfg).unwrap();
            for rep in surface_extremum_check(&traj).unwrap() {
                violations += rep.violations;
                worst = worst.min(rep.worst_slack);
            }
            runs += 1;
        }
    }
    verdict(violations == 0, format!("{runs} runs, {violations} violations, worst slack {worst:.3e}"))
}

fn criterion_11() -> Verdict {
    let n = 100_000;
    let eps = 0.1;
    let id = p_identity_check(&uniform_triples(n, -10.0, 10.0, SEED));
    let lb = p_lower_bound_check(&pinched_triples(n, eps, SEED + 1), eps).unwrap();
    let nv = null_vector_condition_check(&null_vector_triples(n, eps, SEED + 2), eps).unwrap();
    let all_used = [&id, &lb, &nv].iter().all(|r| r.samples == n && r.rejected == 0);
    verdict(
        id.pass() && lb.pass() && nv.pass() && all_used,
        format!(
            "P identity {} violations; P bound {} of {}; null vector {} of {}",
            id.violations, lb.violations, lb.samples, nv.violations, nv.samples
        ),
    )
}

fn criterion_12() -> Verdict {
    let traj = unnormalized(MilnorSignature::su2(), &g(1.0, 1.2, 1.5), 10.0);
    let rep = pinching_monitor(&traj, None).unwrap();
    let c0 = rep.values[0];
    let peak = rep.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        rep.pass,
        format!("δ = {:.4}, max C / C(0) = {:.8} over {} samples", rep.delta, peak / c0, rep.values.len()),
    )
}

fn criterion_13() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 2..=5 {
        let s = symbol_survey(n, 100, SEED + n as u64).unwrap();
        pass &= s.kernel_dim_mode == n
            && s.kernel_dim_outliers == 0
            && s.max_composition_residual <= 1e-12
            && s.max_deturck_residual <= 1e-12;
        parts.push(format!(
            "n={n}: ker {} ({} off), comp {:.1e}, DeTurck {:.1e}",
            s.kernel_dim_mode, s.kernel_dim_outliers, s.max_composition_residual, s.max_deturck_residual
        ));
    }
    verdict(pass, parts.join("; "))
}

struct KahlerRun {
    agreement: f64,
    residual: f64,
    dudt_excess: f64,
    rises: usize,
    trace_min: f64,
    elapsed: Duration,
}

fn kahler_run(n_c: usize, n: usize, amplitude: f64, mode: KahlerMode, t_end: f64) -> KahlerRun {
    let start = Instant::now();
    let grid = Arc::new(ComplexTorusGrid::new(n_c, n).unwrap());
    let g0 = FlatMetric::identity(n_c).unwrap();
    let f = grid.sample(|x| amplitude * x[0].cos());
    let state = PotentialState::new(grid.clone(), g0.clone(), &f, vec![0.0; grid.len()], mode).unwrap();
    let traj = kahler_evolve(&state, &KahlerFlowConfig { t_end, output_interval: 0.5, cfl: 0.4 }).unwrap();
    let newton = stationary_newton(&grid, &g0, &f, mode).unwrap();
    let last = traj.states.last().unwrap();
    let fmax = last.f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let late: Vec<_> = traj.monitors.iter().filter(|m| m.t >= 1.0).collect();
    KahlerRun {
        agreement: mean_aligned_distance(&last.u, &newton.u),
        residual: curvature_equation_residual(last).unwrap(),
        dudt_excess: traj.monitors.iter().map(|m| m.max_dudt - fmax).fold(f64::NEG_INFINITY, f64::max),
        rises: late.windows(2).filter(|w| w[1].osc > w[0].osc || w[1].energy > w[0].energy).count(),
        trace_min: traj.monitors.iter().map(|m| m.trace_min).fold(f64::INFINITY, f64::min),
        elapsed: start.elapsed(),
    }
}

fn criterion_14() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let cases = [
        (1, 64, 0.2, KahlerMode::RicciFlat, 60.0, 1e-6),
        (1, 64, 0.2, KahlerMode::Negative, 20.0, 1e-6),
        (2, 16, 0.2, KahlerMode::RicciFlat, 60.0, 1e-5),
        (2, 16, 0.2, KahlerMode::Negative, 20.0, 1e-5),
    ];
    for (n_c, n, amp, mode, t_end, bar) in cases {
        let r = kahler_run(n_c, n, amp, mode, t_end);
        let ok = r.agreement <= 1e-6
            && r.residual <= bar
            && (mode == KahlerMode::Negative || r.dudt_excess <= 1e-10)
            && r.rises == 0
            && r.trace_min > 0.0
            && (n_c == 1 || r.elapsed <= Duration::from_secs(300));
        pass &= ok;
        parts.push(format!(
            "n_c={n_c} {mode}: agreement {:.1e}, residual {:.1e}, dudt excess {:.1e}, {} rises, trace min {:.3}, {:.0}s",
            r.agreement,
            r.residual,
            r.dudt_excess,
            r.rises,
            r.trace_min,
            r.elapsed.as_secs_f64()
        ));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_15() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_ricci");
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["surface", "--background", "sphere", "--grid", "32", "--init", "0.05*cos(theta)", "--t-end", "1"],
        &["symbol", "--trials", "50", "--seed", "7"],
        &["pinch", "--trials", "20000", "--seed", "7"],
        &["homog", "--geometry", "su2", "--init", "0.5,1.5,1"],
    ];
    let mut compared = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("run{i}_{rep}"));
            let status = Command::new(bin).args(*args).arg("--out").arg(&out).output().unwrap().status;
            if !status.success() {
                return verdict(false, format!("`ricci {}` exited with {status}", args.join(" ")));
            }
            let mut files: Vec<_> = std::fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .collect();
            files.sort();
            outputs.push(files.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>());
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            return verdict(false, format!("`ricci {}` produced different CSV bytes", args.join(" ")));
        }
        compared += outputs[0].len();
    }
    verdict(true, format!("{compared} CSV files byte-identical across repeated runs"))
}

fn main() {
    let start = Instant::now();
    let torus = torus_run();
    let sphere = sphere_run();
    let criteria: Vec<Box<dyn Fn() -> Verdict + '_>> = vec![
        Box::new(criterion_1),
        Box::new(criterion_2),
        Box::new(criterion_3),
        Box::new(criterion_4),
        Box::new(criterion_5),
        Box::new(criterion_6),
        Box::new(|| criterion_7(&torus, &sphere)),
        Box::new(|| criterion_8(&torus)),
        Box::new(|| criterion_9(&sphere)),
        Box::new(criterion_10),
        Box::new(criterion_11),
        Box::new(criterion_12),
        Box::new(criterion_13),
        Box::new(criterion_14),
        Box::new(criterion_15),
    ];
    let mut failed = Vec::new();
    for (i, c) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let v = c();
        println!(
            "criterion {:>2}: {}  {}  [{:.1}s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t0.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    println!(
        "acceptance: {} of {} passed in {:.0}s",
        criteria.len() - failed.len(),
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
