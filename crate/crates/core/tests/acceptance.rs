//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p qionize --test acceptance`.

use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use qionize::amplitude::{
    delta_kz_exact, delta_kz_paraxial, eval_amplitude, eval_reduced, sinc, AmplitudeKind,
    PhotonMomentum, ReducedPoint, SINC_MIN,
};
use qionize::kernel::Kernel;
use qionize::observables::{
    assemble_ratio, coherent_sum, enhancement_ratio, normalization, Channel, RatioMeta,
};
use qionize::oracle::{self, cross_check_points, cross_validate};
use qionize::quadrature::{integrate_2d, QuadratureMethod, QuadratureSpec, Rect};
use qionize::sweep;
use qionize::units::{ExperimentConfig, Measure, Regime};

struct Outcome {
    pass: bool,
    detail: String,
}

fn base() -> ExperimentConfig {
    ExperimentConfig::sodium_dipole()
}

fn ratio(l: f64, w: f64, regime: Regime) -> f64 {
    let cfg = base()
        .with_crystal_length(l)
        .with_pump_waist(w)
        .with_regime(regime);
    enhancement_ratio(&cfg, &Channel::dipole())
        .expect("ratio converges")
        .r
}

/// R over the fig2a grid for one regime, with the (L, Ω_p, R) of its maximum.
fn fig2a_max(regime: Regime) -> (f64, f64, f64, usize) {
    let mut plan = sweep::preset("fig2a").unwrap();
    plan.regimes = vec![regime];
    let records = sweep::run_sweep(&plan, &base()).unwrap();
    let unconverged = records.iter().filter(|r| !r.converged).count();
    let best = records
        .iter()
        .max_by(|a, b| a.r.total_cmp(&b.r))
        .expect("non-empty grid");
    (best.r, best.length_um, best.omega_p_um, unconverged)
}

fn c1_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for regime in [Regime::Exact, Regime::Paraxial] {
        for w in [3.0, 10.0, 50.0] {
            worst = worst.max((ratio(1e-9, w, regime) - 1.0).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-3,
        detail: format!("max |R - 1| = {worst:.2e} over 6 cases (tolerance 1e-3)"),
    }
}

fn c2_beyond_paraxial_magnitude() -> Outcome {
    let (r, l, w, bad) = fig2a_max(Regime::Exact);
    Outcome {
        pass: r >= 100.0 && bad == 0,
        detail: format!(
            "max R over fig2a (exact) = {r:.6} at L = {l:.4} um, omega_p = {w:.4} um; threshold 1e2; {bad} unconverged points"
        ),
    }
}

fn c3_paraxial_suppression() -> Outcome {
    let (r, l, w, bad) = fig2a_max(Regime::Paraxial);
    Outcome {
        pass: r <= 5.0 && bad == 0,
        detail: format!(
            "max R over fig2a (paraxial) = {r:.6} at L = {l:.4} um, omega_p = {w:.4} um; bound 5; {bad} unconverged points"
        ),
    }
}

fn c4_large_length_decay() -> Outcome {
    let r = ratio(50.0, 3.0, Regime::Exact);
    Outcome {
        pass: r <= 5.0,
        detail: format!("R(L = 50 um, omega_p = 3 um, exact) = {r:.6}; bound 5"),
    }
}

fn c5_waist_monotonicity() -> Outcome {
    let waists = [1.0, 3.0, 10.0, 30.0, 100.0];
    let rs: Vec<f64> = waists
        .iter()
        .map(|&w| ratio(1.0, w, Regime::Exact))
        .collect();
    let violations: Vec<String> = rs
        .windows(2)
        .zip(waists.windows(2))
        .filter(|(r, _)| r[1] < r[0] * (1.0 - 0.01))
        .map(|(r, w)| format!("{}->{}: {:.4}->{:.4}", w[0], w[1], r[0], r[1]))
        .collect();
    let listed: Vec<String> = rs.iter().map(|r| format!("{r:.4}")).collect();
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "R at omega_p = 1,3,10,30,100 um (L = 1 um): [{}]; violations > 1%: {}",
            listed.join(", "),
            if violations.is_empty() {
                "none".to_string()
            } else {
                violations.join("; ")
            }
        ),
    }
}

fn c6_oracle_equivalence() -> Outcome {
    let points = cross_check_points(10, 2024);
    let checks = cross_validate(&base(), &points, oracle::DEFAULT_SAMPLES, 2024)
        .expect("cross-validation runs");
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| {
            format!(
                "L={:.3},w={:.3}: {:+.3e}",
                c.length_um, c.waist_um, c.rel_diff
            )
        })
        .collect();
    let worst = checks.iter().map(|c| c.rel_diff.abs()).fold(0.0, f64::max);
    Outcome {
        pass: failed.is_empty(),
        detail: format!(
            "{} of {} configs within max(5%, 3 sigma) at {:.0e} samples; worst |R2D/R6D - 1| = {worst:.3e}{}",
            checks.len() - failed.len(),
            checks.len(),
            oracle::DEFAULT_SAMPLES as f64,
            if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
        ),
    }
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (1.0f64..100.0, 1e-3f64..10.0, any::<bool>()).prop_map(|(w, l, par)| {
        base()
            .with_pump_waist(w)
            .with_crystal_length(l)
            .with_regime(if par { Regime::Paraxial } else { Regime::Exact })
    })
}

fn momentum_strategy(k0: f64) -> impl Strategy<Value = PhotonMomentum> {
    (-0.999f64..0.999, -1e-6f64..1e-6, -1e-8f64..1e-8)
        .prop_map(move |(s, ky, dk)| PhotonMomentum::on_shell(s * k0, ky, k0 + dk).unwrap())
}

fn run_prop<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn c7_invariants() -> Outcome {
    let k0 = base().k0();
    let mut failures = Vec::new();
    fn record(failures: &mut Vec<String>, r: Result<(), String>) {
        if let Err(e) = r {
            failures.push(e);
        }
    }

    // exchange symmetry, pointwise and under the integral
    record(
        &mut failures,
        run_prop(
            "exchange symmetry",
            2000,
            (
                config_strategy(),
                momentum_strategy(k0),
                momentum_strategy(k0),
            ),
            |(c, ki, ks)| {
                for kind in [AmplitudeKind::Entangled, AmplitudeKind::Separable] {
                    prop_assert_eq!(
                        eval_amplitude(kind, &ki, &ks, &c),
                        eval_amplitude(kind, &ks, &ki, &c)
                    );
                }
                Ok(())
            },
        ),
    );
    record(
        &mut failures,
        run_prop("transposed integral", 12, config_strategy(), |c| {
            let spec = QuadratureSpec::default().with_rel_tol(1e-8);
            let rect = Rect::square(-0.9 * c.k0(), 0.9 * c.k0());
            let f = |a: f64, b: f64| {
                let p = ReducedPoint::new(a, b, c.k0()).unwrap();
                eval_reduced(AmplitudeKind::Entangled, &p, &c)
                    .unwrap()
                    .powi(2)
            };
            let x = integrate_2d(f, rect, &spec).unwrap();
            let y = integrate_2d(|a, b| f(b, a), rect, &spec).unwrap();
            prop_assert!((x.value - y.value).abs() <= x.error_estimate + y.error_estimate + 1e-12);
            Ok(())
        }),
    );

    // scale invariance of R
    record(
        &mut failures,
        run_prop(
            "scale invariance",
            12,
            (config_strategy(), 1e-3f64..1e3),
            |(c, a)| {
                let r = enhancement_ratio(&c, &Channel::dipole()).unwrap();
                let meta = RatioMeta {
                    regime: c.regime,
                    measure: c.measure,
                    method: "scaled",
                    channel: "dipole".into(),
                    kernel: "constant".into(),
                    filter_factor: None,
                };
                let scaled = assemble_ratio(r.ent.scaled(a), r.sep.scaled(a), meta).unwrap();
                prop_assert!((scaled.r / r.r - 1.0).abs() < 1e-12);
                Ok(())
            },
        ),
    );

    // amplitude band [-0.2172, 1]
    record(
        &mut failures,
        run_prop(
            "amplitude band",
            4000,
            (
                config_strategy(),
                momentum_strategy(k0),
                momentum_strategy(k0),
            ),
            |(c, ki, ks)| {
                for kind in [AmplitudeKind::Entangled, AmplitudeKind::Separable] {
                    let a = eval_amplitude(kind, &ki, &ks, &c);
                    prop_assert!((-0.2172..=1.0).contains(&a), "amplitude {} outside band", a);
                }
                Ok(())
            },
        ),
    );
    // the band's lower edge is quoted to four decimals; the infimum is sinc's minimum
    let x_min = 4.493_409_457_909_064;
    let inf = sinc(x_min);
    if (inf * 1e4).round() / 1e4 != -0.2172 || (inf - SINC_MIN).abs() > 1e-15 {
        failures.push(format!(
            "amplitude band: infimum {inf} does not round to -0.2172"
        ));
    }

    // normalization residual against an independent tensor-Gauss integral
    record(
        &mut failures,
        run_prop("normalization residual", 12, config_strategy(), |c| {
            for kind in [AmplitudeKind::Entangled, AmplitudeKind::Separable] {
                let n = normalization(kind, &c).unwrap();
                let independent = c.clone().with_quadrature(
                    QuadratureSpec::default()
                        .with_method(QuadratureMethod::TensorGauss)
                        .with_rel_tol(1e-9),
                );
                let m = normalization(kind, &independent).unwrap();
                let residual = n.reduced * n.reduced * m.integral.value - 1.0;
                prop_assert!(residual.abs() < 1e-6, "residual {}", residual);
            }
            Ok(())
        }),
    );

    // paraxial Δk_z is the second-order expansion of the exact mismatch
    let h = 1e-4 * k0;
    let d = |a: f64, b: f64, exact: bool| {
        let p = ReducedPoint::new(a, b, k0).unwrap();
        if exact {
            delta_kz_exact(&p).unwrap()
        } else {
            delta_kz_paraxial(&p).unwrap()
        }
    };
    for exact in [true, false] {
        let faa = (d(h, 0.0, exact) - 2.0 * d(0.0, 0.0, exact) + d(-h, 0.0, exact)) / (h * h);
        let fab =
            (d(h, h, exact) - d(h, -h, exact) - d(-h, h, exact) + d(-h, -h, exact)) / (4.0 * h * h);
        let ok = (faa * 2.0 * k0 - 1.0).abs() < 1e-6 && (fab * -2.0 * k0 - 1.0).abs() < 1e-6;
        if !ok {
            failures.push(format!(
                "taylor agreement ({}): faa {faa}, fab {fab}",
                if exact { "exact" } else { "paraxial" }
            ));
        }
    }

    // quadrature linearity and additivity
    let spec = QuadratureSpec::default().with_rel_tol(1e-9);
    record(
        &mut failures,
        run_prop(
            "quadrature linearity",
            64,
            (-5.0f64..5.0, -5.0f64..5.0, 0.1f64..3.0),
            |(a, b, s)| {
                let f = |x: f64, y: f64| (-(x * x + y * y) / (2.0 * s * s)).exp();
                let g = |x: f64, y: f64| (x * y).cos() + 2.0;
                let rect = Rect::square(-2.0, 2.0);
                let fi = integrate_2d(f, rect, &spec).unwrap();
                let gi = integrate_2d(g, rect, &spec).unwrap();
                let hi = integrate_2d(|x, y| a * f(x, y) + b * g(x, y), rect, &spec).unwrap();
                let tol = a.abs() * fi.error_estimate
                    + b.abs() * gi.error_estimate
                    + hi.error_estimate
                    + 1e-12;
                prop_assert!((hi.value - (a * fi.value + b * gi.value)).abs() <= tol);
                Ok(())
            },
        ),
    );
    record(
        &mut failures,
        run_prop(
            "quadrature additivity",
            64,
            (-1.9f64..1.9, 0.1f64..3.0),
            |(m, s)| {
                let f =
                    |x: f64, y: f64| (-(x * x + 0.5 * y * y) / (s * s)).exp() * (1.0 + x * y * y);
                let whole = integrate_2d(f, Rect::square(-2.0, 2.0), &spec).unwrap();
                let left = integrate_2d(f, Rect::new(-2.0, m, -2.0, 2.0), &spec).unwrap();
                let right = integrate_2d(f, Rect::new(m, 2.0, -2.0, 2.0), &spec).unwrap();
                let tol = whole.error_estimate + left.error_estimate + right.error_estimate + 1e-12;
                prop_assert!((whole.value - left.value - right.value).abs() <= tol);
                Ok(())
            },
        ),
    );

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "exchange symmetry, scale invariance, amplitude band (infimum {SINC_MIN:.6}), normalization residual, \
                 Taylor agreement, quadrature linearity/additivity all hold"
            )
        } else {
            failures.join(" | ")
        },
    }
}

fn c8_kernel_parity() -> Outcome {
    let mut worst_odd: f64 = 0.0;
    let mut min_even = f64::INFINITY;
    let mut bad = Vec::new();
    for regime in [Regime::Exact, Regime::Paraxial] {
        for measure in [Measure::OnShell, Measure::Flat] {
            for (l, w) in [(0.05, 3.0), (1.0, 10.0), (20.0, 50.0)] {
                let c = base()
                    .with_crystal_length(l)
                    .with_pump_waist(w)
                    .with_regime(regime)
                    .with_measure(measure);
                for kind in [AmplitudeKind::Entangled, AmplitudeKind::Separable] {
                    let odd = coherent_sum(kind, &c, Some(&Kernel::SyntheticOdd)).unwrap();
                    let even = coherent_sum(kind, &c, Some(&Kernel::SyntheticEven)).unwrap();
                    let rel = odd.value.abs() / even.value.abs();
                    worst_odd = worst_odd.max(rel);
                    min_even = min_even.min(even.value.abs());
                    let vanishes = odd.value.abs()
                        <= c.quadrature.rel_tol * even.value.abs() + odd.error_estimate;
                    if !vanishes || !(even.value.abs() > 0.0) || !even.converged {
                        bad.push(format!(
                            "{regime}/{}/L={l}/w={w}/{}",
                            measure.as_str(),
                            kind.as_str()
                        ));
                    }
                }
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "max |sum_odd|/|sum_even| = {worst_odd:.2e} over 24 cases; min |sum_even| = {min_even:.3e}{}",
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
        ),
    }
}

fn main() {
    // Respect `cargo test -- --list` style invocations from tooling.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [(&str, &str, Duration, fn() -> Outcome); 8] = [
        ("1", "identity limit", Duration::from_secs(10), c1_identity),
        (
            "2",
            "beyond-paraxial enhancement magnitude",
            Duration::from_secs(300),
            c2_beyond_paraxial_magnitude,
        ),
        (
            "3",
            "paraxial suppression",
            Duration::from_secs(300),
            c3_paraxial_suppression,
        ),
        (
            "4",
            "large-L decay",
            Duration::from_secs(60),
            c4_large_length_decay,
        ),
        (
            "5",
            "waist monotonicity",
            Duration::from_secs(60),
            c5_waist_monotonicity,
        ),
        (
            "6",
            "oracle equivalence",
            Duration::from_secs(1200),
            c6_oracle_equivalence,
        ),
        (
            "7",
            "invariant suite",
            Duration::from_secs(120),
            c7_invariants,
        ),
        (
            "8",
            "synthetic-kernel parity",
            Duration::from_secs(120),
            c8_kernel_parity,
        ),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} [{}] {name}: {} ({:.1} s, budget {} s{})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of 8 criteria pass", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
