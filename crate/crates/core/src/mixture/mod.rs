//! Mixtures of a fixed number `M` of fittable curves.
//!
//! Two families: a constant offset plus `M` Gaussian bumps, and the sum of
//! `M` time-shifted SIR sub-populations of which only the aggregate is
//! observed. Both are fitted by [`gsa::gsa_minimize`] inside box bounds.

pub mod gsa;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{nelder_mead, SimplexOptions};
use crate::scalar::Scalar;
use crate::series::WeeklySeries;
use crate::sir::{simulate_shifted, ShiftedSirParams, SirError};

pub use gsa::{gsa_minimize, GsaConfig, GsaError, GsaResult};

/// Component count used when none is given.
pub const DEFAULT_COMPONENTS: usize = 3;
/// Above this many components a diagnostic is logged; the search space grows quickly.
pub const LARGE_M_WARNING: usize = 5;

const SHIFT_ROUNDS: usize = 4;
const SHIFT_CANDIDATES: usize = 3;

pub const GAUSS_AMPLITUDE_BOUNDS: (f64, f64) = (0.0, 3e5);
pub const GAUSS_MEAN_BOUNDS: (f64, f64) = (0.0, 50.0);
pub const GAUSS_WIDTH_BOUNDS: (f64, f64) = (1.0, 6.0);

pub const SIR_S0_BOUNDS: (f64, f64) = (0.0, 1e8);
pub const SIR_BETA_BOUNDS: (f64, f64) = (0.0, 1.0);
pub const SIR_GAMMA_BOUNDS: (f64, f64) = (0.0, 1.0);
pub const SIR_C_BOUNDS: (f64, f64) = (0.0, 1e3);
pub const SIR_K_BOUNDS: (f64, f64) = (0.0, 50.0);

#[derive(Debug, Error)]
pub enum MixtureError {
    #[error("mixture needs at least one component")]
    NoComponents,
    #[error("series needs at least 2 points")]
    SeriesTooShort,
    #[error(transparent)]
    Gsa(#[from] GsaError),
    #[error(transparent)]
    Sir(#[from] SirError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussComponent<T: Scalar = f64> {
    pub amplitude: T,
    pub mu: T,
    pub sigma: T,
}

/// `θ₀ + Σ θ_m exp(-(t - μ_m)² / (2σ_m²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureParams<T: Scalar = f64> {
    pub theta0: T,
    pub components: Vec<GaussComponent<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirMixtureParams<T: Scalar = f64> {
    pub components: Vec<ShiftedSirParams<T>>,
}

pub fn gaussian_mixture_eval<T: Scalar>(
    params: &GaussianMixtureParams<T>,
    weeks: std::ops::Range<usize>,
) -> Vec<T> {
    let two = T::lit(2.0);
    weeks
        .map(|t| {
            let t = T::from_usize_lossy(t);
            params.components.iter().fold(params.theta0, |acc, c| {
                let d = t - c.mu;
                acc + c.amplitude * (-(d * d) / (two * c.sigma * c.sigma)).exp()
            })
        })
        .collect()
}

/// Aggregate infected counts over weeks `0..=weeks`.
pub fn sir_mixture_eval<T: Scalar>(
    params: &SirMixtureParams<T>,
    weeks: usize,
) -> Result<Vec<T>, SirError> {
    let mut total = vec![T::zero(); weeks + 1];
    for component in &params.components {
        let series = simulate_shifted(component, weeks)?;
        for (t, v) in total.iter_mut().zip(series) {
            *t = *t + v;
        }
    }
    Ok(total)
}

/// Box bounds for `[θ₀, (θ_m, μ_m, σ_m)…]`.
pub fn gaussian_bounds(m: usize) -> Vec<(f64, f64)> {
    let mut b = vec![GAUSS_AMPLITUDE_BOUNDS];
    for _ in 0..m {
        b.extend([
            GAUSS_AMPLITUDE_BOUNDS,
            GAUSS_MEAN_BOUNDS,
            GAUSS_WIDTH_BOUNDS,
        ]);
    }
    b
}

/// Box bounds for `[(S₀, β, γ, C, k)…]`.
pub fn sir_bounds(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .flat_map(|_| {
            [
                SIR_S0_BOUNDS,
                SIR_BETA_BOUNDS,
                SIR_GAMMA_BOUNDS,
                SIR_C_BOUNDS,
                SIR_K_BOUNDS,
            ]
        })
        .collect()
}

fn decode_gaussian(x: &[f64]) -> GaussianMixtureParams<f64> {
    GaussianMixtureParams {
        theta0: x[0],
        components: x[1..]
            .chunks_exact(3)
            .map(|c| GaussComponent {
                amplitude: c[0],
                mu: c[1],
                sigma: c[2],
            })
            .collect(),
    }
}

/// Integer start week for a continuous search value.
///
/// Rounded to the nearest week, then kept in `1..=last_week` so every
/// component starts from `I = 0` at week 0.
pub fn start_week(k: f64, last_week: usize) -> usize {
    let k = k.round().max(1.0) as usize;
    k.min(last_week.max(1))
}

fn decode_sir(x: &[f64], last_week: usize) -> SirMixtureParams<f64> {
    SirMixtureParams {
        components: x
            .chunks_exact(5)
            .map(|c| ShiftedSirParams {
                s0: c[0].max(f64::MIN_POSITIVE),
                beta: c[1],
                gamma: c[2],
                c: c[3],
                k: start_week(c[4], last_week),
            })
            .collect(),
    }
}

/// Moves each component's start week along the `C·gᵏ ≈ const` valley
/// (`g = 1 + β - γ`, the early weekly growth), which the annealer crosses
/// poorly because `k` is discrete. Every improvement is re-polished.
fn refine_shifts<F: Fn(&[f64]) -> f64>(
    energy: &F,
    mut x: Vec<f64>,
    mut value: f64,
    bounds: &[(f64, f64)],
    last_week: usize,
) -> (Vec<f64>, f64) {
    let quick = SimplexOptions {
        initial_step: 0.02,
        f_tol: 1e-10,
        x_tol: 1e-12,
        max_evals: 200 * x.len(),
        restarts: 0,
    };
    let full = SimplexOptions {
        max_evals: 2_000 * x.len(),
        restarts: 3,
        ..quick
    };
    let mut moved = false;
    for _ in 0..SHIFT_ROUNDS {
        let mut improved = false;
        for j in 0..x.len() / 5 {
            let base = 5 * j;
            let (c_lo, c_hi) = bounds[base + 3];
            let (k_lo, k_hi) = bounds[base + 4];
            let growth = 1.0 + x[base + 1] - x[base + 2];
            if !(growth > 0.0) {
                continue;
            }
            let k0 = start_week(x[base + 4], last_week) as f64;
            let top = (k_hi.floor() as usize).min(last_week);
            let mut shifted: Vec<(f64, Vec<f64>)> = (1.max(k_lo.ceil() as usize)..=top)
                .filter(|&k| k as f64 != k0)
                .map(|k| {
                    let mut cand = x.clone();
                    cand[base + 3] = (x[base + 3] * growth.powf(k as f64 - k0)).clamp(c_lo, c_hi);
                    cand[base + 4] = k as f64;
                    (energy(&cand), cand)
                })
                .collect();
            shifted.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (e, cand) in shifted.into_iter().take(SHIFT_CANDIDATES) {
                let res = nelder_mead(energy, &cand, bounds, &quick);
                let (cx, ce) = if res.value < e {
                    (res.x, res.value)
                } else {
                    (cand, e)
                };
                if ce < value {
                    (x, value) = (cx, ce);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
        moved = true;
    }
    if moved {
        let res = nelder_mead(energy, &x, bounds, &full);
        if res.value < value {
            (x, value) = (res.x, res.value);
        }
    }
    (x, value)
}

fn sse(observed: &[f64], fitted: &[f64]) -> f64 {
    observed
        .iter()
        .zip(fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// The annealer sees `SSE / (1 + ||y||²)` so its temperature schedule does not
/// depend on the magnitude of the counts.
fn energy_scale(observed: &[f64]) -> f64 {
    1.0 + observed.iter().map(|v| v * v).sum::<f64>()
}

fn check_config(
    m: usize,
    len: usize,
    config: &GsaConfig,
    default_bounds: Vec<(f64, f64)>,
) -> Result<GsaConfig, MixtureError> {
    if m == 0 {
        return Err(MixtureError::NoComponents);
    }
    if len < 2 {
        return Err(MixtureError::SeriesTooShort);
    }
    if m > LARGE_M_WARNING {
        log::warn!(
            "fitting {m} mixture components: search space has {} variables",
            default_bounds.len()
        );
    }
    let mut cfg = config.clone();
    if cfg.bounds.is_empty() {
        cfg.bounds = default_bounds;
    } else if cfg.bounds.len() != default_bounds.len() {
        return Err(GsaError::Dimension {
            expected: default_bounds.len(),
            got: cfg.bounds.len(),
        }
        .into());
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureFit {
    pub params: GaussianMixtureParams<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirMixtureFit {
    pub params: SirMixtureParams<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub bounds: Vec<(f64, f64)>,
}

/// Least-squares Gaussian mixture fit. Empty `config.bounds` selects the default box.
pub fn fit_gaussian_mixture(
    series: &WeeklySeries,
    m: usize,
    config: &GsaConfig,
) -> Result<GaussianMixtureFit, MixtureError> {
    fit_gaussian_mixture_values(series.values(), m, config)
}

pub fn fit_gaussian_mixture_values(
    observed: &[f64],
    m: usize,
    config: &GsaConfig,
) -> Result<GaussianMixtureFit, MixtureError> {
    let cfg = check_config(m, observed.len(), config, gaussian_bounds(m))?;
    let weeks = 0..observed.len();
    let scale = energy_scale(observed);
    let res = gsa_minimize(
        |x| {
            sse(
                observed,
                &gaussian_mixture_eval(&decode_gaussian(x), weeks.clone()),
            ) / scale
        },
        &cfg,
    )?;
    let mut params = decode_gaussian(&res.x);
    params.components.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    Ok(GaussianMixtureFit {
        params,
        objective: res.value * scale,
        initial_objective: res.initial_value * scale,
        bounds: cfg.bounds,
    })
}

/// Least-squares fit of `M` shifted SIR sub-populations to the aggregate series.
pub fn fit_sir_mixture(
    series: &WeeklySeries,
    m: usize,
    config: &GsaConfig,
) -> Result<SirMixtureFit, MixtureError> {
    fit_sir_mixture_values(series.values(), m, config)
}

pub fn fit_sir_mixture_values(
    observed: &[f64],
    m: usize,
    config: &GsaConfig,
) -> Result<SirMixtureFit, MixtureError> {
    let cfg = check_config(m, observed.len(), config, sir_bounds(m))?;
    let last = observed.len() - 1;
    let scale = energy_scale(observed);
    let energy = |x: &[f64]| match sir_mixture_eval(&decode_sir(x, last), last) {
        Ok(fitted) => sse(observed, &fitted) / scale,
        Err(_) => f64::INFINITY,
    };
    let res = gsa_minimize(energy, &cfg)?;
    let (x, value) = if cfg.polish {
        refine_shifts(&energy, res.x, res.value, &cfg.bounds, last)
    } else {
        (res.x, res.value)
    };
    let res = GsaResult { x, value, ..res };
    let mut params = decode_sir(&res.x, last);
    params
        .components
        .sort_by(|a, b| a.k.cmp(&b.k).then(a.s0.total_cmp(&b.s0)));
    Ok(SirMixtureFit {
        params,
        objective: res.value * scale,
        initial_objective: res.initial_value * scale,
        bounds: cfg.bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_when_amplitude_zero() {
        let p = GaussianMixtureParams {
            theta0: 5.0,
            components: vec![GaussComponent {
                amplitude: 0.0,
                mu: 10.0,
                sigma: 2.0,
            }],
        };
        assert!(gaussian_mixture_eval(&p, 0..30).iter().all(|&v| v == 5.0));
    }

    #[test]
    fn single_component_peak() {
        let p = GaussianMixtureParams {
            theta0: 0.0,
            components: vec![GaussComponent {
                amplitude: 10.0,
                mu: 20.0,
                sigma: 4.0,
            }],
        };
        assert_eq!(gaussian_mixture_eval(&p, 20..21), vec![10.0]);
    }

    #[test]
    fn two_component_midpoint() {
        let p = GaussianMixtureParams {
            theta0: 0.0,
            components: vec![
                GaussComponent {
                    amplitude: 10.0,
                    mu: 20.0,
                    sigma: 4.0,
                },
                GaussComponent {
                    amplitude: 10.0,
                    mu: 30.0,
                    sigma: 4.0,
                },
            ],
        };
        let v = gaussian_mixture_eval(&p, 25..26)[0];
        // 25²/(2·4²) = 25/32
        assert!((v - 20.0 * (-25.0f64 / 32.0).exp()).abs() < 1e-12);
        assert!((v - 9.157).abs() < 1e-3);
    }

    fn component(s0: f64, beta: f64, k: usize) -> ShiftedSirParams<f64> {
        ShiftedSirParams {
            s0,
            beta,
            gamma: 0.5,
            c: 100.0,
            k,
        }
    }

    #[test]
    fn singleton_sir_mixture_is_shifted_sir() {
        let c = component(1e5, 0.7, 4);
        let p = SirMixtureParams {
            components: vec![c],
        };
        assert_eq!(
            sir_mixture_eval(&p, 52).unwrap(),
            simulate_shifted(&c, 52).unwrap()
        );
    }

    #[test]
    fn dormant_second_component() {
        let a = component(1e5, 0.7, 0);
        let b = component(5e4, 0.9, 10);
        let sum = sir_mixture_eval(
            &SirMixtureParams {
                components: vec![a, b],
            },
            52,
        )
        .unwrap();
        let alone = simulate_shifted(&a, 52).unwrap();
        assert_eq!(&sum[..10], &alone[..10]);
        assert_ne!(sum[10], alone[10]);
    }

    #[test]
    fn start_week_rounding() {
        assert_eq!(start_week(0.2, 52), 1);
        assert_eq!(start_week(3.49, 52), 3);
        assert_eq!(start_week(3.5, 52), 4);
        assert_eq!(start_week(49.9, 40), 40);
    }

    #[test]
    fn bounds_layout() {
        assert_eq!(gaussian_bounds(3).len(), 10);
        assert_eq!(sir_bounds(3).len(), 15);
        assert_eq!(gaussian_bounds(1)[2], GAUSS_MEAN_BOUNDS);
    }

    #[test]
    fn rejects_zero_components_and_wrong_bounds() {
        let x = vec![1.0; 10];
        assert!(matches!(
            fit_gaussian_mixture_values(&x, 0, &GsaConfig::default()),
            Err(MixtureError::NoComponents)
        ));
        let cfg = GsaConfig::with_bounds(vec![(0.0, 1.0)]);
        assert!(matches!(
            fit_sir_mixture_values(&x, 1, &cfg),
            Err(MixtureError::Gsa(GsaError::Dimension {
                expected: 5,
                got: 1
            }))
        ));
    }
}

#[cfg(test)]
mod fit_tests {
    use super::*;

    fn mape(a: &[f64], f: &[f64]) -> f64 {
        let pairs: Vec<f64> = a
            .iter()
            .zip(f)
            .filter(|(x, _)| **x != 0.0)
            .map(|(x, y)| ((x - y) / x).abs())
            .collect();
        100.0 * pairs.iter().sum::<f64>() / pairs.len() as f64
    }

    #[test]
    fn recovers_single_gaussian() {
        let truth = GaussianMixtureParams {
            theta0: 0.0,
            components: vec![GaussComponent {
                amplitude: 100.0,
                mu: 22.0,
                sigma: 4.0,
            }],
        };
        let y = gaussian_mixture_eval(&truth, 0..53);
        let fit = fit_gaussian_mixture_values(&y, 1, &GsaConfig::default()).unwrap();
        let c = fit.params.components[0];
        assert!((c.mu - 22.0).abs() < 0.5, "{fit:?}");
        assert!((c.amplitude - 100.0).abs() < 5.0, "{fit:?}");
        for (v, &(lo, hi)) in [fit.params.theta0, c.amplitude, c.mu, c.sigma]
            .iter()
            .zip(&fit.bounds)
        {
            assert!(*v >= lo && *v <= hi);
        }
        assert!(fit.objective <= fit.initial_objective);
    }

    #[test]
    fn reconstructs_single_shifted_sir() {
        let truth = SirMixtureParams {
            components: vec![ShiftedSirParams {
                s0: 2e5,
                beta: 0.8,
                gamma: 0.5,
                c: 100.0,
                k: 3,
            }],
        };
        let y = sir_mixture_eval(&truth, 52).unwrap();
        let fit = fit_sir_mixture_values(&y, 1, &GsaConfig::default()).unwrap();
        let yhat = sir_mixture_eval(&fit.params, 52).unwrap();
        let err = mape(&y, &yhat);
        assert!(err < 5.0, "mape {err} {fit:?}");
    }
}
