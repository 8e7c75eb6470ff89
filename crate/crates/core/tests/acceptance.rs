//! Acceptance checks. One line per criterion; exits non-zero if any fails.
//!
//! The full-data check reads the JHU global confirmed-cases CSV from
//! `EPIMIX_JHU_CSV` and is skipped when the variable is unset.

mod common;

use std::time::{Duration, Instant};

use epimix::dictionary::{
    default_gaussian_dictionary, default_sir_dictionary, solve_nnls_ridge, AtomMeta, Dictionary,
};
use epimix::eval::{
    forecasting_over, mape, modeling_over, run_forecasting_task, EvalReport, Method, MethodConfig,
    MethodKind, DEFAULT_HORIZONS, DEFAULT_ORIGINS,
};
use epimix::ingest::{default_window_start, load_jhu_window, DEFAULT_WINDOW_WEEKS};
use epimix::mixture::{
    fit_gaussian_mixture_values, fit_sir_mixture_values, gaussian_mixture_eval, sir_mixture_eval,
    GaussComponent, GaussianMixtureParams, GsaConfig, SirMixtureParams,
};
use epimix::nnls::kkt_violation;
use epimix::sir::{
    fit_classical_values, simulate, simulate_shifted, ShiftedSirParams, SirParams, SirState,
};
use epimix::synth::default_dataset;
use epimix::{WeeklySeries, DEFAULT_SEED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{instances, nnls_oracle, sir_reference};

const NNLS_INSTANCES: usize = 200;
const NNLS_REL_TOL: f64 = 1e-6;
const NNLS_BUDGET: Duration = Duration::from_secs(10);

const SIR_PAIRS: usize = 10_000;
const SIR_PAIR_WEEKS: usize = 30;
const CONSERVATION_REL_TOL: f64 = 1e-9;
const REFERENCE_REL_TOL: f64 = 1e-12;
const SIR_BUDGET: Duration = Duration::from_secs(5);

const RECOVERY_TOL: f64 = 1e-3;
const RECOVERY_BUDGET: Duration = Duration::from_secs(10);

const SIR_ATOMS: usize = 546;
const GAUSS_ATOMS: usize = 405;
const ATOM_MAX_TOL: f64 = 1e-12;

const SYNTH_BUDGET: Duration = Duration::from_secs(120);

const MU_TOL: f64 = 0.5;
const AMPLITUDE_REL_TOL: f64 = 0.05;
const SIR_MIX_MAPE_MAX: f64 = 5.0;
const MIXTURE_BUDGET: Duration = Duration::from_secs(120);

const GAUSS_DICT_MEDIAN: (f64, f64) = (1.0, 4.0);
const SLOW_H1_MEDIAN: (f64, f64) = (4.0, 10.0);
const MIXTURE_SUBSAMPLE: usize = 20;
const FULL_DATA_BUDGET: Duration = Duration::from_secs(30 * 60);

struct Outcome {
    passed: usize,
    failed: usize,
    skipped: usize,
}

impl Outcome {
    fn report(&mut self, id: &str, name: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {detail}");
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }

    fn skip(&mut self, id: &str, name: &str, why: &str) {
        println!("SKIP [{id}] {name}: {why}");
        self.skipped += 1;
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn solver_correctness(out: &mut Outcome) {
    let clock = Instant::now();
    let mut agree = 0;
    let mut certified = 0;
    let mut worst = 0.0f64;
    for inst in instances(DEFAULT_SEED, NNLS_INSTANCES) {
        let meta = (0..inst.atoms.len())
            .map(|i| AtomMeta::Custom {
                label: i.to_string(),
            })
            .collect();
        let dict = Dictionary::from_curves(inst.atoms.clone(), meta).expect("positive atoms");
        let atoms: Vec<Vec<f64>> = (0..dict.len()).map(|i| dict.atom(i).to_vec()).collect();
        let w = solve_nnls_ridge(&dict, &inst.x, inst.lambda).expect("solver converges");
        let got = common::objective(&atoms, &inst.x, inst.lambda, &w.theta);
        let (_, best) = nnls_oracle(&atoms, &inst.x, inst.lambda);
        let rel = (got - best).abs() / best.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(if (got - best).abs() < 1e-14 { 0.0 } else { rel });
        if rel <= NNLS_REL_TOL || (got - best).abs() < 1e-14 {
            agree += 1;
        }
        if kkt_violation(&dict.prefix(inst.x.len()), &inst.x, inst.lambda, &w.theta) == 0.0 {
            certified += 1;
        }
    }
    let elapsed = clock.elapsed();
    out.report(
        "1",
        "solver matches support enumeration",
        agree == NNLS_INSTANCES && certified == NNLS_INSTANCES && elapsed < NNLS_BUDGET,
        format!(
            "{agree}/{NNLS_INSTANCES} within {NNLS_REL_TOL:e} rel (worst {worst:.1e}), {certified} KKT-certified, {}",
            secs(elapsed)
        ),
    );
}

fn sir_invariants(out: &mut Outcome) {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut bad = Vec::new();
    for n in 0..SIR_PAIRS {
        let s0 = rng.random_range(0.0..1e7);
        let i0 = rng.random_range(0.0..1e5);
        let r0 = rng.random_range(0.0..1e6);
        let total = s0 + i0 + r0;
        let pop = if rng.random_bool(0.5) {
            total
        } else {
            rng.random_range(1.0..1e7)
        };
        let beta = rng.random_range(0.0..5.0);
        let gamma = rng.random_range(0.0..1.0);
        let params = SirParams::new(beta, gamma, pop).expect("valid draw");
        let traj = simulate(SirState::new(s0, i0, r0), &params, SIR_PAIR_WEEKS);
        let oracle = sir_reference(s0, i0, r0, beta, gamma, pop, SIR_PAIR_WEEKS);
        for (w, (st, &(os, oi, or))) in traj.states.iter().zip(&oracle).enumerate() {
            let conserved = (st.total() - total).abs() <= CONSERVATION_REL_TOL * total.max(1.0);
            let nonneg = st.s >= 0.0 && st.i >= 0.0 && st.r >= 0.0;
            let monotone = w == 0 || st.r >= traj.states[w - 1].r;
            // rounding differences accumulate at the scale of the population, not the compartment
            let close = |a: f64, b: f64| (a - b).abs() <= REFERENCE_REL_TOL * total.max(1.0);
            let matches = close(st.s, os) && close(st.i, oi) && close(st.r, or);
            if !(conserved && nonneg && monotone && matches) {
                bad.push(format!(
                    "#{n} week {w}: conserved {conserved} non-negative {nonneg} monotone {monotone} reference {matches} \
                     ({st:?} vs {os}, {oi}, {or})"
                ));
                break;
            }
        }
    }
    let mut shift_bad = 0;
    for _ in 0..SIR_PAIRS {
        let s0 = rng.random_range(1.0..1e7);
        let params = ShiftedSirParams {
            s0,
            beta: rng.random_range(0.0..2.0),
            gamma: rng.random_range(0.0..1.0),
            c: rng.random_range(0.0..1e3f64).min(s0),
            k: rng.random_range(0..=52),
        };
        let curve = simulate_shifted(&params, 52).expect("k inside horizon");
        if !(curve[..params.k].iter().all(|&v| v == 0.0) && curve[params.k] == params.c) {
            shift_bad += 1;
        }
    }
    let elapsed = clock.elapsed();
    out.report(
        "2",
        "SIR invariants",
        bad.is_empty() && shift_bad == 0 && elapsed < SIR_BUDGET,
        format!(
            "{} of {SIR_PAIRS} trajectories violate conservation/non-negativity/monotone R/reference{}, \
             {shift_bad} shifted curves break the zero-before-k or I_k = C identity, {}",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default(),
            secs(elapsed)
        ),
    );
}

fn sir_fit_recovery(out: &mut Outcome) {
    let clock = Instant::now();
    let params = SirParams::new(0.6, 0.4, 1e6).expect("valid");
    let observed = simulate(SirState::new(1e6 - 10.0, 10.0, 0.0), &params, 52).infected();
    let fit = fit_classical_values(&observed).expect("fit");
    let elapsed = clock.elapsed();
    let (db, dg) = (
        (fit.params.beta - 0.6).abs(),
        (fit.params.gamma - 0.4).abs(),
    );
    out.report(
        "3",
        "SIR fit recovery",
        db <= RECOVERY_TOL && dg <= RECOVERY_TOL && elapsed < RECOVERY_BUDGET,
        format!(
            "beta {:.6} gamma {:.6} N {:.0} (|err| {db:.1e}, {dg:.1e}; tol {RECOVERY_TOL:e}), {}",
            fit.params.beta,
            fit.params.gamma,
            fit.params.n,
            secs(elapsed)
        ),
    );
}

fn dictionary_construction(out: &mut Outcome) {
    let sir = default_sir_dictionary(56).expect("default grids");
    let gauss = default_gaussian_dictionary(56);
    let peak_err = |d: &Dictionary<f64>| {
        (0..d.len())
            .map(|i| (d.atom(i).iter().copied().fold(f64::MIN, f64::max) - 1.0).abs())
            .fold(0.0, f64::max)
    };
    let (es, eg) = (peak_err(&sir), peak_err(&gauss));
    out.report(
        "4",
        "dictionary construction",
        sir.len() == SIR_ATOMS
            && gauss.len() == GAUSS_ATOMS
            && es <= ATOM_MAX_TOL
            && eg <= ATOM_MAX_TOL,
        format!(
            "{} SIR atoms, {} Gaussian atoms, max |peak - 1| {:.1e}",
            sir.len(),
            gauss.len(),
            es.max(eg)
        ),
    );
}

fn modeling_mape(series: &[WeeklySeries], method: &Method) -> EvalReport {
    modeling_over(series, method).0
}

fn synthetic_ordering(out: &mut Outcome) {
    let clock = Instant::now();
    let data = [default_dataset().observed];
    let score = |kind, config: MethodConfig| {
        let method = Method::new(kind, config).expect("method");
        modeling_mape(&data, &method)
            .per_country
            .values()
            .next()
            .and_then(|s| s.mape)
            .unwrap_or(f64::NAN)
    };
    let dict = score(MethodKind::GaussDict, MethodConfig::default());
    let sir = score(MethodKind::Sir, MethodConfig::default());
    let mix = score(
        MethodKind::MixGauss,
        MethodConfig {
            components: 2,
            ..MethodConfig::default()
        },
    );
    let elapsed = clock.elapsed();
    out.report(
        "5",
        "synthetic modeling ordering",
        dict < sir && mix > dict && elapsed < SYNTH_BUDGET,
        format!(
            "gauss-dict {dict:.2}% < sir {sir:.2}%, mix-gauss(M=2) {mix:.2}% > gauss-dict, {}",
            secs(elapsed)
        ),
    );
}

fn mixture_self_consistency(out: &mut Outcome) {
    let clock = Instant::now();
    let truth = GaussianMixtureParams {
        theta0: 0.0,
        components: vec![GaussComponent {
            amplitude: 1200.0,
            mu: 24.0,
            sigma: 3.5,
        }],
    };
    let y = gaussian_mixture_eval(&truth, 0..53);
    let config = GsaConfig {
        seed: DEFAULT_SEED,
        ..GsaConfig::default()
    };
    let g1 = fit_gaussian_mixture_values(&y, 1, &config).expect("fit");
    let g2 = fit_gaussian_mixture_values(&y, 1, &config).expect("fit");
    let c = g1.params.components[0];
    let mu_err = (c.mu - 24.0).abs();
    let amp_err = (c.amplitude - 1200.0).abs() / 1200.0;

    let sir_truth = SirMixtureParams {
        components: vec![ShiftedSirParams {
            s0: 8e4,
            beta: 0.85,
            gamma: 0.5,
            c: 100.0,
            k: 6,
        }],
    };
    let z = sir_mixture_eval(&sir_truth, 52).expect("valid");
    let s1 = fit_sir_mixture_values(&z, 1, &config).expect("fit");
    let s2 = fit_sir_mixture_values(&z, 1, &config).expect("fit");
    let zhat = sir_mixture_eval(&s1.params, 52).expect("valid");
    let err = mape(&z, &zhat).expect("non-zero actuals");
    let deterministic = g1 == g2 && s1 == s2;
    let elapsed = clock.elapsed();
    out.report(
        "6",
        "mixture self-consistency",
        mu_err <= MU_TOL && amp_err <= AMPLITUDE_REL_TOL && err < SIR_MIX_MAPE_MAX && deterministic && elapsed < MIXTURE_BUDGET,
        format!(
            "Gaussian |mu err| {mu_err:.3} wk, amplitude err {:.2}%; SIR reconstruction {err:.3}%; deterministic {deterministic}; {}",
            100.0 * amp_err,
            secs(elapsed)
        ),
    );
}

fn t2_json(data: &[WeeklySeries]) -> String {
    let mut text = String::new();
    for kind in MethodKind::ALL {
        let method = Method::new(kind, MethodConfig::default()).expect("method");
        let (reports, outcomes) =
            forecasting_over(data, &method, &DEFAULT_HORIZONS, DEFAULT_ORIGINS);
        text.push_str(&serde_json::to_string(&reports).expect("json"));
        for o in &outcomes {
            text.push_str(&serde_json::to_string(&o.forecasts).expect("json"));
        }
    }
    text
}

fn protocol_properties(out: &mut Outcome) {
    let clock = Instant::now();
    let synth = default_dataset().observed;
    let x = synth.values().to_vec();

    let mut leaks = Vec::new();
    for kind in MethodKind::ALL {
        let method = Method::new(kind, MethodConfig::default()).expect("method");
        for t in [5usize, 17, 33, 48] {
            let mut mutated = x.clone();
            for (j, v) in mutated.iter_mut().enumerate().skip(t + 1) {
                *v = 3e4 + 11.0 * j as f64;
            }
            let dirty =
                WeeklySeries::new(synth.country(), synth.start_week(), mutated).expect("valid");
            let a = run_forecasting_task(&synth, &method, &DEFAULT_HORIZONS, t..=t, 0);
            let b = run_forecasting_task(&dirty, &method, &DEFAULT_HORIZONS, t..=t, 0);
            let fa: Vec<_> = a.forecasts.iter().map(|r| r.forecast).collect();
            let fb: Vec<_> = b.forecasts.iter().map(|r| r.forecast).collect();
            if fa != fb {
                leaks.push(format!("{kind}@{t}"));
            }
        }
    }

    let slow = Method::new(MethodKind::Slow, MethodConfig::default()).expect("method");
    let (reports, _) = forecasting_over(
        std::slice::from_ref(&synth),
        &slow,
        &DEFAULT_HORIZONS,
        DEFAULT_ORIGINS,
    );
    let slow_exact = reports.iter().zip(DEFAULT_HORIZONS).all(|(r, h)| {
        let expected = mape(&x[5 + h..=48 + h], &x[5..=48]).ok();
        r.per_country.values().next().and_then(|s| s.mape) == expected
    });

    let data = [synth.clone()];
    let identical = t2_json(&data) == t2_json(&data);
    let elapsed = clock.elapsed();
    out.report(
        "7",
        "evaluation protocol",
        leaks.is_empty() && slow_exact && identical,
        format!(
            "future mutation changed {} forecasts {:?}; SLOW identity exact {slow_exact}; repeated T2 runs byte-identical {identical}; {}",
            leaks.len(),
            leaks,
            secs(elapsed)
        ),
    );
}

fn median(report: &EvalReport) -> f64 {
    report.summary.map(|s| s.median).unwrap_or(f64::NAN)
}

fn full_data(out: &mut Outcome) {
    let name = "full-data medians";
    let Ok(path) = std::env::var("EPIMIX_JHU_CSV") else {
        out.skip("8", name, "EPIMIX_JHU_CSV not set");
        return;
    };
    let clock = Instant::now();
    let series = match load_jhu_window(&path, default_window_start(), DEFAULT_WINDOW_WEEKS) {
        Ok(s) => s,
        Err(e) => {
            out.report("8", name, false, format!("could not load {path}: {e}"));
            return;
        }
    };
    let run = |kind, data: &[WeeklySeries]| {
        modeling_mape(
            data,
            &Method::new(kind, MethodConfig::default()).expect("method"),
        )
    };
    let gauss = median(&run(MethodKind::GaussDict, &series));
    let sird = median(&run(MethodKind::SirDict, &series));
    let sir = median(&run(MethodKind::Sir, &series));
    let slow = Method::new(MethodKind::Slow, MethodConfig::default()).expect("method");
    let (slow_reports, _) = forecasting_over(&series, &slow, &[1], DEFAULT_ORIGINS);
    let slow1 = median(&slow_reports[0]);

    let stride = series.len().div_ceil(MIXTURE_SUBSAMPLE).max(1);
    let sample: Vec<WeeklySeries> = series.iter().step_by(stride).cloned().collect();
    let mixg = median(&run(MethodKind::MixGauss, &sample));
    let mixs = median(&run(MethodKind::MixSir, &sample));
    let elapsed = clock.elapsed();

    let ordered = gauss < sird && sird < sir && sir < mixg && sir < mixs;
    let in_range = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    out.report(
        "8",
        name,
        ordered && in_range(gauss, GAUSS_DICT_MEDIAN) && in_range(slow1, SLOW_H1_MEDIAN) && elapsed < FULL_DATA_BUDGET,
        format!(
            "{} countries ({} for mixtures): gauss-dict {gauss:.2}% sir-dict {sird:.2}% sir {sir:.2}% \
             mix-gauss {mixg:.2}% mix-sir {mixs:.2}%; SLOW h=1 {slow1:.2}%; {}",
            series.len(),
            sample.len(),
            secs(elapsed)
        ),
    );
}

fn main() {
    let mut out = Outcome {
        passed: 0,
        failed: 0,
        skipped: 0,
    };
    solver_correctness(&mut out);
    sir_invariants(&mut out);
    sir_fit_recovery(&mut out);
    dictionary_construction(&mut out);
    synthetic_ordering(&mut out);
    mixture_self_consistency(&mut out);
    protocol_properties(&mut out);
    full_data(&mut out);
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        out.passed, out.failed, out.skipped
    );
    if out.failed > 0 {
        std::process::exit(1);
    }
}
