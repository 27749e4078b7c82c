//! Acceptance suite. Runs every criterion in order at its pinned tolerance and
//! runtime budget, prints one PASS/FAIL line each and exits non-zero if any fail.
//!
//! Run alone with `cargo test -p kickrotor --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kickrotor::analysis::{detect_crossover, fit_growth, CrossoverParams};
use kickrotor::bchcoeff::{
    coefficients_recursion, delocalization_time, ClosedFormWalk, CoefficientState, RecursionWalk,
};
use kickrotor::effham::{
    fibonacci_instant_residual, fibonacci_propagator, localization_profile, plateau_estimate,
    residual_scaling, FibonacciOptions, FibonacciPropagator, SinSqCoefficient,
};
use kickrotor::evolve::{
    auto_window, run_trajectory, EnergyTrace, EvolutionConfig, LogPolicy, SplitStepPropagator,
};
use kickrotor::hilbert::{kick_matrix_bessel, BasisWindow, RotorState, C64};
use kickrotor::kickseq::{fibonacci_instant, KickSequenceSpec};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const G: f64 = 1.618_033_988_749_895;
const K1: f64 = 10.0;
const K2: f64 = 12.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn trace(
    spec: KickSequenceSpec,
    tau: f64,
    n: u64,
    window: BasisWindow,
    psi: &RotorState,
) -> Result<EnergyTrace, String> {
    let cfg = EvolutionConfig::new(tau, spec, window, n, LogPolicy::default()).map_err(e)?;
    run_trajectory(&cfg, psi).map_err(|a| a.error.to_string())
}

fn eigenstate(window: BasisWindow) -> Result<RotorState, String> {
    RotorState::momentum_eigenstate(window, window.center).map_err(e)
}

fn slope(t: &EnergyTrace, lo: u64, hi: u64) -> Result<f64, String> {
    fit_growth(&t.samples, lo, hi).map(|f| f.slope).map_err(e)
}

fn spectral(tau: f64, r: usize) -> Result<FibonacciPropagator, String> {
    let w = BasisWindow::new(0, r).map_err(e)?;
    fibonacci_propagator(K1, K2, tau, w, FibonacciOptions::default()).map_err(e)
}

fn c01_golden_values() -> Outcome {
    let want = [
        (2, [q(1, 1), q(1, 1), q(1, 2), q(1, 12), q(1, 12)]),
        (3, [q(2, 1), q(1, 1), q(0, 1), q(-1, 6), q(1, 6)]),
        (4, [q(3, 1), q(1, 1), q(-1, 2), q(-1, 4), q(1, 4)]),
        (5, [q(3, 1), q(2, 1), q(1, 1), q(1, 2), q(0, 1)]),
    ];
    // alpha and beta at n = 4, 5 are the kick counts of the word ABAAB.
    let mut bad = Vec::new();
    for (n, tuple) in want {
        let c = coefficients_recursion(n).map_err(e)?;
        let got = [&c.alpha, &c.beta, &c.delta, &c.eta1, &c.eta2];
        for (i, (g, w)) in got.iter().zip(&tuple).enumerate() {
            if *g != w {
                bad.push(format!("n={n} field {i}: {g} != {w}"));
            }
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            "N = 2..5 exact".into()
        } else {
            bad.join("; ")
        },
    )
}

fn c02_recursion_equals_closed_form() -> Outcome {
    let n_max = 196_418u64;
    let mut count = 0u64;
    for (a, b) in RecursionWalk::new()
        .zip(ClosedFormWalk::new())
        .take(n_max as usize)
    {
        let (a, b): (CoefficientState, CoefficientState) = (a.map_err(e)?, b.map_err(e)?);
        if a != b {
            return Err(format!("first mismatch at n = {}", a.n));
        }
        count += 1;
    }
    check(
        count == n_max,
        format!(
            "{count} states equal, n <= {n_max} (F(25) = {})",
            fibonacci_instant(25).map_err(e)?
        ),
    )
}

fn c03_nec_saturation() -> Outcome {
    let appendix_eta1 = |m: u32| (G.powi(-4) + (-1f64).powi(m as i32) * (2.0 / G + G.powi(-2))) / 12.0;
    let f = fibonacci_instant(25).map_err(e)?;
    let c = coefficients_recursion(f).map_err(e)?;
    let nf = f as f64;
    let r = |x: &BigRational| x.to_f64().unwrap() / nf;
    let da = (r(&c.alpha) - 1.0 / G).abs();
    let db = (r(&c.beta) - G.powi(-2)).abs();
    let dd = (r(&c.delta) + G.powi(-3)).abs();
    let mut eta = Vec::new();
    for m in [24u32, 25] {
        let fm = fibonacci_instant(m).map_err(e)?;
        let cm = coefficients_recursion(fm).map_err(e)?;
        eta.push((cm.eta1.to_f64().unwrap() / fm as f64 - appendix_eta1(m)).abs());
    }
    let ok = da <= 1e-3 && db <= 1e-3 && dd <= 1e-3 && eta.iter().all(|&x| x <= 1e-2);
    check(
        ok,
        format!(
            "m=25: |da|={da:.2e} |db|={db:.2e} |delta/F + 1/G^3|={dd:.3e} (delta/F = {:.4}); eta1 branch errors m=24: {:.2e}, m=25: {:.2e}",
            r(&c.delta),
            eta[0],
            eta[1]
        ),
    )
}

fn c04_delocalization_estimate() -> Outcome {
    let d = delocalization_time(0.01).map_err(e)?;
    check(
        (1.0e6..=1.6e6).contains(&(d.n_deloc as f64)),
        format!("m = {}, N_deloc = {}", d.m_deloc, d.n_deloc),
    )
}

fn c05_kick_operator_oracle() -> Outcome {
    let w = BasisWindow::new(0, 1024).map_err(e)?;
    let bessel = kick_matrix_bessel(w, 12.0).map_err(e)?;
    let mut prop = SplitStepPropagator::new(w, 0.0).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0f64;
    for trial in 0..4 {
        let mut amps = vec![C64::new(0.0, 0.0); 1024];
        for (i, a) in amps.iter_mut().enumerate() {
            let l = w.l_at(i);
            if l.abs() <= 200 {
                *a = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        if trial == 0 {
            amps.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
            amps[w.index_of(0).map_err(e)?] = C64::new(1.0, 0.0);
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let psi = RotorState::from_amplitudes(w, amps).map_err(e)?;
        let want = bessel.apply_state(&psi).map_err(e)?;
        let mut got = psi.clone();
        prop.step(&mut got, 12.0).map_err(e)?;
        let d = got
            .amplitudes()
            .iter()
            .zip(want.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(d);
    }
    check(worst <= 1e-10, format!("max |FFT - Bessel| = {worst:.2e}"))
}

fn c06_regular_qkr_localization() -> Outcome {
    let w = BasisWindow::new(0, 4096).map_err(e)?;
    let t = trace(
        KickSequenceSpec::constant(15.0).map_err(e)?,
        1.0,
        10_000,
        w,
        &eigenstate(w)?,
    )?;
    let s = slope(&t, 2_000, 10_000)?;
    check(
        s <= 0.1 && t.max_norm_drift <= 1e-8,
        format!(
            "slope {s:.4} over [2e3, 1e4], norm drift {:.1e}",
            t.max_norm_drift
        ),
    )
}

fn c07_controls() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for tau in [0.01, 1.0, 5.0] {
        let spec = KickSequenceSpec::biperiodic(K1, K2).map_err(e)?;
        let w = auto_window(&spec, tau, 10_000, 0).map_err(e)?;
        let t = trace(spec, tau, 10_000, w, &eigenstate(w)?)?;
        let late = t.window(1_000, 10_000).map(|s| s.energy).fold(0.0, f64::max);
        let early = t.mean_energy(100, 1_000).ok_or("no samples in [1e2, 1e3]")?;
        let pass = late < 10.0 * early;
        ok &= pass;
        parts.push(format!("biperiodic tau={tau}: max/mean = {:.2}", late / early));
    }
    for tau in [0.01, 1.0] {
        let spec = KickSequenceSpec::random(K1, K2, 1).map_err(e)?;
        let w = auto_window(&spec, tau, 10_000, 0).map_err(e)?;
        let t = trace(spec, tau, 10_000, w, &eigenstate(w)?)?;
        let s = slope(&t, 100, 10_000)?;
        let pass = (s - 1.0).abs() <= 0.2;
        ok &= pass;
        parts.push(format!("random tau={tau}: slope {s:.3}"));
    }
    check(ok, parts.join("; "))
}

fn c08_low_frequency_diffusion() -> Outcome {
    let spec = KickSequenceSpec::fibonacci(K1, K2).map_err(e)?;
    let w = auto_window(&spec, 1.0, 10_000, 0).map_err(e)?;
    let t = trace(spec, 1.0, 10_000, w, &eigenstate(w)?)?;
    let s = slope(&t, 100, 10_000)?;
    check(
        (s - 1.0).abs() <= 0.2,
        format!("slope {s:.3} over [1e2, 1e4], R = {}", w.size),
    )
}

fn c09_pre_ergodic_plateau() -> Outcome {
    let w = BasisWindow::new(0, 2048).map_err(e)?;
    let spec = KickSequenceSpec::fibonacci(K1, K2).map_err(e)?;
    let t = trace(spec, 0.01, 100_000, w, &eigenstate(w)?)?;
    let s = slope(&t, 1_000, 100_000)?;
    let mean = t.mean_energy(1_000, 100_000).ok_or("empty window")?;
    let plateau = plateau_estimate(&spectral(0.01, 1024)?.spectrum, 0).map_err(e)?;
    let ratio = mean / plateau;
    check(
        s <= 0.15 && (0.5..=2.0).contains(&ratio),
        format!("slope {s:.4}, trace mean {mean:.1}, plateau estimate {plateau:.1}, ratio {ratio:.3}"),
    )
}

fn c10_crossover() -> Outcome {
    let run = |tau: f64| -> Result<(Option<u64>, f64), String> {
        let w = BasisWindow::new(0, 8192).map_err(e)?;
        let spec = KickSequenceSpec::fibonacci(K1, K2).map_err(e)?;
        let t = trace(spec, tau, 200_000, w, &eigenstate(w)?)?;
        let plateau = plateau_estimate(&spectral(tau, 1024)?.spectrum, 0).map_err(e)?;
        let c = detect_crossover(&t.samples, plateau, &CrossoverParams::default()).map_err(e)?;
        Ok((c, plateau))
    };
    let d = delocalization_time(0.05).map_err(e)?;
    let lo = fibonacci_instant(d.m_deloc - 1).map_err(e)?;
    let hi = fibonacci_instant(d.m_deloc + 1).map_err(e)?;
    let (c05, p05) = run(0.05)?;
    let (c07, p07) = run(0.07)?;
    let inside = c05.is_some_and(|c| (lo..=hi).contains(&c));
    let earlier = matches!((c07, c05), (Some(a), Some(b)) if a < b);
    check(
        inside && earlier,
        format!(
            "tau=0.05: crossover {c05:?} (plateau {p05:.1}) vs window [{lo}, {hi}] (m_deloc = {}): {}; \
             tau=0.07: crossover {c07:?} (plateau {p07:.1}), earlier: {earlier}",
            d.m_deloc,
            if inside { "inside" } else { "outside" }
        ),
    )
}

fn c11_effective_convergence() -> Outcome {
    let w = BasisWindow::new(0, 1024).map_err(e)?;
    let psi = RotorState::gaussian(w, 0).map_err(e)?;
    let mut res = Vec::new();
    for tau in [0.02, 0.01, 0.005] {
        let prop = spectral(tau, 1024)?;
        res.push(fibonacci_instant_residual(&prop, K1, K2, tau, 15, &psi).map_err(e)?);
    }
    check(
        res[1] < res[0] && res[2] < res[1],
        format!(
            "residuals at tau = 0.02, 0.01, 0.005: {:.4}, {:.4}, {:.4}",
            res[0], res[1], res[2]
        ),
    )
}

fn c12_eigenstate_localization() -> Outcome {
    let prop = spectral(0.01, 1024)?;
    let profile = localization_profile(&prop.spectrum);
    let r = profile.len() as f64;
    let good = profile
        .iter()
        .filter(|m| m.ipr >= 50.0 / r && m.tail_slope.is_some_and(|s| s < 0.0))
        .count();
    let frac = good as f64 / r;
    check(
        frac >= 0.9,
        format!(
            "{good}/{} eigenvectors localized ({:.1}%)",
            profile.len(),
            100.0 * frac
        ),
    )
}

fn c13_l_operator_discrimination() -> Outcome {
    let w = BasisWindow::new(0, 256).map_err(e)?;
    let psi = RotorState::gaussian(w, 0).map_err(e)?;
    let taus = [0.04, 0.02, 0.01];
    let (_, sixth) = residual_scaling(K1, &taus, &psi, SinSqCoefficient::Sixth).map_err(e)?;
    let (_, twelfth) = residual_scaling(K1, &taus, &psi, SinSqCoefficient::Twelfth).map_err(e)?;
    check(
        (sixth - 2.0).abs() <= 0.3 && twelfth <= 1.3,
        format!("residual slope K^2/6: {sixth:.3}, K^2/12: {twelfth:.3}"),
    )
}

fn c14_l0_insensitivity() -> Outcome {
    let mut means = Vec::new();
    let mut slopes = Vec::new();
    for l0 in [0i64, 200] {
        let w = BasisWindow::new(l0, 2048).map_err(e)?;
        let psi = RotorState::gaussian(w, l0).map_err(e)?;
        let spec = KickSequenceSpec::fibonacci(K1, K2).map_err(e)?;
        let t = trace(spec, 0.01, 100_000, w, &psi)?;
        slopes.push(slope(&t, 1_000, 100_000)?);
        means.push(t.mean_energy(1_000, 100_000).ok_or("empty window")?);
    }
    let shift = means[1] - means[0];
    let l02 = 200.0f64.powi(2);
    check(
        slopes.iter().all(|&s| s <= 0.15) && (shift - l02).abs() <= 0.5 * l02,
        format!(
            "slopes {:.4}, {:.4}; plateau means {:.1}, {:.1}; shift {shift:.1} vs l0^2 = {l02}",
            slopes[0], slopes[1], means[0], means[1]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("coefficient golden values", 1, c01_golden_values),
        (
            "recursion equals closed form",
            60,
            c02_recursion_equals_closed_form,
        ),
        ("NEC saturation", 60, c03_nec_saturation),
        ("delocalization estimate", 1, c04_delocalization_estimate),
        ("kick operator oracle", 10, c05_kick_operator_oracle),
        ("regular rotor localization", 120, c06_regular_qkr_localization),
        ("bi-periodic and random controls", 300, c07_controls),
        ("low-frequency diffusion", 120, c08_low_frequency_diffusion),
        ("pre-ergodic plateau", 900, c09_pre_ergodic_plateau),
        ("crossover consistency", 1800, c10_crossover),
        ("effective propagator convergence", 600, c11_effective_convergence),
        ("eigenstate localization", 300, c12_eigenstate_localization),
        ("L operator discrimination", 120, c13_l_operator_discrimination),
        ("l0 insensitivity", 900, c14_l0_insensitivity),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok(d) if in_budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:2} {}: {} ({:.1}s of {}s) {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget,
            detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
