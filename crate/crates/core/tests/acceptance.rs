//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use belpm_core::belpm::th_forward;
use belpm_core::harness::{compare_structures, metrics_csv, relative_spread, run_experiment, ExperimentSpec};
use belpm_core::learning::lse::orthogonality_residual;
use belpm_core::learning::{lse_fit_w, lse_fit_wa, lse_fit_wo, phase1_gradients};
use belpm_core::series::{generate_henon, generate_lorenz, EmbeddedDataset, HenonParams, LorenzParams};
use belpm_core::{nmse, BelpmModel, Kernel, WknnRegressor};
use common::{close, random_dataset, random_model, rng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 1. Analytic kernel-scale gradients vs central differences on 100 random models.
fn gradients() -> Outcome {
    const REL: f64 = 1e-4;
    const FLOOR: f64 = 1e-8;
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..100 {
        let kernel = if i % 2 == 0 { Kernel::Exponential } else { Kernel::Rational { z: 1.0 } };
        let m = random_model(&mut r, kernel);
        let g = phase1_gradients(&m).unwrap();
        for (is_a, grad) in [(true, &g.grad_a), (false, &g.grad_o)] {
            for (j, &an) in grad.iter().enumerate() {
                let eval = |h: f64| {
                    let mut p = m.clone();
                    if is_a { p.b_a[j] += h } else { p.b_o[j] += h }
                    let g = phase1_gradients(&p).unwrap();
                    if is_a { g.loss_a } else { g.loss_o }
                };
                let fd = (eval(1e-6) - eval(-1e-6)) / 2e-6;
                let scale = an.abs().max(fd.abs());
                if scale > FLOOR {
                    worst = worst.max((an - fd).abs() / scale);
                }
                if !close(an, fd, REL, FLOOR) {
                    failures += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < 30.0,
        format!("100 models, worst relative error {worst:.2e} (< 1e-4), {failures} failures, {secs:.1} s (< 30 s)"),
    )
}

/// 2. BL forward vs closed-form weighted average; BELPM reduced to Wk-NN.
fn oracle_equivalence() -> Outcome {
    let mut r = rng(2);
    let ds = random_dataset(&mut r, 40, 3);
    let k = 4;
    let mut m = BelpmModel::new(&ds, k, 3, Kernel::Exponential).unwrap();
    m.b_a = vec![0.5, 1.0, 1.7, 2.2];
    let mut worst_bl: f64 = 0.0;
    for _ in 0..1000 {
        let q: Vec<f64> = (0..3).map(|_| r.random_range(-1.2..1.2)).collect();
        let th = th_forward(&q);
        let got = m.bl_forward(&th.agg, &th.max_min, None).unwrap().output;
        let tq = th.max_min;
        let mut all: Vec<(f64, usize)> = (0..ds.len())
            .map(|j| {
                let x = &ds.inputs[j];
                let s = x.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let mx = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mn = x.iter().copied().fold(f64::INFINITY, f64::min);
                (s + ((mx - tq[0]).powi(2) + (mn - tq[1]).powi(2)).sqrt(), j)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (mut num, mut den) = (0.0, 0.0);
        for (rank, &(d, j)) in all[..k].iter().enumerate() {
            let w = (-d * m.b_a[rank]).exp();
            num += w * ds.targets[j];
            den += w;
        }
        worst_bl = worst_bl.max((got - num / den).abs());
    }

    let row = |r: &mut rand_chacha::ChaCha8Rng| vec![1.0, r.random_range(-0.9..0.9), -1.0];
    let inputs: Vec<Vec<f64>> = (0..80).map(|_| row(&mut r)).collect();
    let targets = inputs.iter().map(|v| (4.0 * v[1]).cos()).collect();
    let flat = EmbeddedDataset::new(inputs, targets, 3, 1, 1).unwrap();
    let reg = WknnRegressor::with_heuristic_b(flat.clone(), 5, Kernel::Exponential).unwrap();
    let mut bm = BelpmModel::new(&flat, 5, 5, Kernel::Exponential).unwrap();
    bm.b_a = reg.b.clone();
    bm.w = [1.0, 0.0, 0.0];
    let mut worst_wknn: f64 = 0.0;
    for _ in 0..500 {
        let q = row(&mut r);
        worst_wknn = worst_wknn.max((bm.predict(&q).unwrap() - reg.predict(&q).unwrap()).abs());
    }
    outcome(
        worst_bl <= 1e-12 && worst_wknn <= 1e-9,
        format!("BL vs closed form max |diff| {worst_bl:.1e} (<= 1e-12, 1000 queries); BELPM[w=1,0,0] vs Wk-NN {worst_wknn:.1e} (<= 1e-9)"),
    )
}

/// 3. LSE fits: orthogonality certificate and explicit normal-equations oracle.
fn lse_suite() -> Outcome {
    let mut r = rng(3);
    let mut worst_orth: f64 = 0.0;
    let mut worst_coef: f64 = 0.0;
    let solve = |rows: Vec<Vec<f64>>, y: &[f64]| -> Vec<f64> {
        let a = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        let rhs = a.transpose() * DVector::from_column_slice(y);
        (a.transpose() * &a).full_piv_lu().solve(&rhs).unwrap().iter().copied().collect()
    };
    let mut rel = |got: &[f64], want: &[f64]| {
        for (g, w) in got.iter().zip(want) {
            worst_coef = worst_coef.max((g - w).abs() / w.abs().max(1.0));
        }
    };
    for _ in 0..50 {
        let n = r.random_range(10..=80);
        let v = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| r.random_range(-2.0..2.0)).collect() };
        let (a, o, u, p) = (v(&mut r), v(&mut r), v(&mut r), v(&mut r));

        let f = lse_fit_w(&a, &o, &u).unwrap();
        let rows: Vec<[f64; 3]> = a.iter().zip(&o).map(|(&a, &o)| [a, o, 1.0]).collect();
        worst_orth = worst_orth.max(orthogonality_residual(&rows, &u, &f.coef));
        rel(&f.coef, &solve(rows.iter().map(|r| r.to_vec()).collect(), &u));

        let f = lse_fit_wa(&u, &a, &p).unwrap();
        let rows: Vec<[f64; 3]> = u.iter().zip(&a).map(|(&u, &a)| [u, a, 1.0]).collect();
        worst_orth = worst_orth.max(orthogonality_residual(&rows, &p, &f.coef));
        rel(&f.coef, &solve(rows.iter().map(|r| r.to_vec()).collect(), &p));

        let f = lse_fit_wo(&o, &p).unwrap();
        let rows: Vec<[f64; 2]> = o.iter().map(|&o| [o, 1.0]).collect();
        worst_orth = worst_orth.max(orthogonality_residual(&rows, &p, &f.coef));
        rel(&f.coef, &solve(rows.iter().map(|r| r.to_vec()).collect(), &p));
    }
    outcome(
        worst_orth <= 1e-8 && worst_coef <= 1e-8,
        format!("50 systems x 3 fits: orthogonality {worst_orth:.1e} (<= 1e-8), oracle deviation {worst_coef:.1e} (<= 1e-8)"),
    )
}

/// 4. Metric anchors, Hénon start, Lorenz RK4 convergence order.
fn anchors() -> Outcome {
    let y = [0.3, -1.2, 2.0, 0.7, 1.1];
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let perfect = nmse(&y, &y).unwrap();
    let mean_pred = nmse(&[mean; 5], &y).unwrap();

    // the decimal anchors are not all representable; compare bit-exactly with the
    // map evaluated in binary64 and within 2 ulp of the decimals
    let h = generate_henon(&HenonParams::default(), 4).unwrap().values;
    let exact = [0.0, 1.0, 1.0 - 1.4 * 1.0 * 1.0 + 0.0, 1.0 - 1.4 * (1.0 - 1.4f64) * (1.0 - 1.4f64) + 0.3];
    let decimal = [0.0, 1.0, -0.4, 1.076];
    let henon_ok = h == exact && h.iter().zip(decimal).all(|(a, b)| (a - b).abs() <= 2.0 * f64::EPSILON * b.abs());

    // max error over [0, 1] s at the common sample times, against a dt/64 run
    let p = LorenzParams::default();
    let reference = generate_lorenz(&p, 0.01 / 64.0, 64 * 100 + 1).unwrap().values;
    let coarse = generate_lorenz(&p, 0.01, 101).unwrap().values;
    let fine = generate_lorenz(&p, 0.005, 201).unwrap().values;
    let max_err = |v: &[f64], stride: usize| {
        (0..=100).map(|i| (v[i * stride] - reference[i * 64]).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (max_err(&coarse, 1), max_err(&fine, 2));
    let ratio = e1 / e2;
    outcome(
        perfect == 0.0 && mean_pred == 1.0 && henon_ok && ratio >= 8.0,
        format!(
            "nmse(perfect) = {perfect}, nmse(mean) = {mean_pred}; Hénon x0..x3 = {h:?}; Lorenz max error over 1 s, dt 0.01 vs 0.005: {e1:.1e} / {e2:.1e} = {ratio:.1} (>= 8)"
        ),
    )
}

fn timed_run(spec: &ExperimentSpec) -> (belpm_core::ExperimentReport, f64) {
    let start = Instant::now();
    let report = run_experiment(spec).expect("experiment failed");
    (report, start.elapsed().as_secs_f64())
}

/// 5. Lorenz, 500 train / 1400 test, 30 steps ahead, defaults.
fn lorenz_table() -> Outcome {
    let (report, secs) = timed_run(&ExperimentSpec::lorenz_long_horizon());
    let row = &report.results[0];
    let b = row.belpm.and_then(|m| m.nmse).unwrap_or(f64::NAN);
    let w = row.wknn.and_then(|m| m.nmse).unwrap_or(f64::NAN);
    let in_band = |v: f64| (0.02..=1.0).contains(&v);
    outcome(
        b <= 1.1 * w && in_band(b) && in_band(w) && secs < 60.0,
        format!("BELPM {b:.4} vs Wk-NN {w:.4} (<= 1.1x, both in [0.02, 1]; reference 0.2473 / 0.2599), {secs:.1} s (< 60 s)"),
    )
}

/// 6. Hénon, 800 train / 100 test, 3 steps ahead, defaults.
fn henon_table() -> Outcome {
    let (report, secs) = timed_run(&ExperimentSpec::henon_short_horizon());
    let row = &report.results[0];
    let b = row.belpm.and_then(|m| m.nmse).unwrap_or(f64::NAN);
    let w = row.wknn.and_then(|m| m.nmse).unwrap_or(f64::NAN);
    outcome(
        b <= 0.05 && b < w && secs < 60.0,
        format!("BELPM {b:.5} (<= 0.05; reference 0.0065) vs Wk-NN {w:.5} (BELPM < Wk-NN; reference 0.0107), {secs:.1} s (< 60 s)"),
    )
}

/// 7. Online adaptation on noisy Hénon does not hurt.
fn second_phase() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut cells = Vec::new();
    for seed in 1..=5 {
        let spec = ExperimentSpec { noise_std: 0.1, seed, horizons: vec![1, 2], ..ExperimentSpec::henon_short_horizon() };
        let report = run_experiment(&spec).unwrap();
        for row in &report.results {
            let flp = row.flp.and_then(|m| m.nmse).unwrap_or(f64::NAN);
            let slp = row.slp.and_then(|m| m.nmse).unwrap_or(f64::NAN);
            worst = worst.max(slp - flp);
            if seed == 1 {
                cells.push(format!("h{} FLP {flp:.4} SLP {slp:.4}", row.horizon));
            }
        }
    }
    outcome(
        worst <= 1e-3,
        format!("std 0.1, 5 seeds, horizons 1-2: max(SLP - FLP) = {worst:.2e} (<= 1e-3); seed 1: {}", cells.join(", ")),
    )
}

/// 8. Phase-1 loss_a is non-increasing in at least 80% of epochs.
fn learning_curve() -> Outcome {
    let mut fractions = Vec::new();
    for seed in 1..=5 {
        let mut spec = ExperimentSpec { noise_std: 0.05, seed, horizons: vec![1], ..ExperimentSpec::henon_short_horizon() };
        spec.model.epochs = 30;
        spec.model.phase2_epochs = 0;
        spec.baseline.enabled = false;
        let report = run_experiment(&spec).unwrap();
        let h = report.results[0].history.as_ref().expect("no history");
        fractions.push(h.loss_a_non_increasing_fraction());
    }
    let min = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(min >= 0.8, format!("Hénon 800-train, 30 epochs, 5 seeds: min non-increasing fraction {min:.2} (>= 0.80)"))
}

/// 9. Structure insensitivity over k_a in {3, 5, 7}, k_o = 2 k_a.
fn structures() -> Outcome {
    let spec = ExperimentSpec::henon_short_horizon();
    let rows = compare_structures(&spec, &[(3, 6), (5, 10), (7, 14)]).unwrap();
    let values: Vec<String> = rows.iter().map(|r| format!("({},{}) {:.5}", r.k_a, r.k_o, r.nmse().unwrap_or(f64::NAN))).collect();
    let spread = relative_spread(&rows).unwrap_or(f64::INFINITY);
    let complete = rows.iter().all(|r| !r.errored());
    outcome(complete && spread <= 0.5, format!("{}; spread {spread:.3} (<= 0.5)", values.join(", ")))
}

/// 10. Same spec and seed give byte-identical reports.
fn determinism() -> Outcome {
    let mut all_same = true;
    for spec in [
        ExperimentSpec { noise_std: 0.1, seed: 42, horizons: vec![1, 3], ..ExperimentSpec::henon_short_horizon() },
        ExperimentSpec { horizons: vec![10, 30], keep_predictions: true, ..ExperimentSpec::lorenz_long_horizon() },
    ] {
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        all_same &= a.to_json().unwrap() == b.to_json().unwrap() && metrics_csv(&a) == metrics_csv(&b);
    }
    outcome(all_same, "Hénon (noisy) and Lorenz specs run twice: report.json and metrics.csv byte-identical".into())
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful for this gate
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient suite", gradients),
        ("oracle equivalence", oracle_equivalence),
        ("least-squares suite", lse_suite),
        ("metric and generator anchors", anchors),
        ("Lorenz 30-step directional reproduction", lorenz_table),
        ("Hénon 3-step reproduction", henon_table),
        ("second-phase benefit", second_phase),
        ("learning-curve descent", learning_curve),
        ("structure insensitivity", structures),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("[{}] {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
