//! Generalized simulated annealing over a bounded box.
//!
//! Visiting steps follow the Tsallis–Stariolo distribution with parameter
//! `q_v`; worse moves are accepted with the generalized Metropolis rule of
//! parameter `q_a`. Temperature at local iteration `i` is
//! `T₁ (2^{q_v-1} - 1) / ((i + 2)^{q_v-1} - 1)`. Each iteration runs a chain
//! of `2d` moves: `d` full-dimensional visits, then one visit per coordinate.
//!
//! Moves are made in unit-cube coordinates (each variable rescaled by its
//! bound width) and wrapped back into the box, so the schedule is
//! independent of variable units.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::optim::{nelder_mead, SimplexOptions};
use crate::rng::{SeededRng, DEFAULT_SEED};

const TAIL_LIMIT: f64 = 1e8;
const MIN_VISIT_BOUND: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GsaError {
    #[error("bound {index} is not a finite interval with low < high: ({low}, {high})")]
    BadBound { index: usize, low: f64, high: f64 },
    #[error("visiting parameter must lie in (1, 3), got {0}")]
    BadVisiting(f64),
    #[error("acceptance parameter must be < 1, got {0}")]
    BadAcceptance(f64),
    #[error("initial temperature must be > 0, got {0}")]
    BadTemperature(f64),
    #[error("max iterations must be >= 1")]
    NoIterations,
    #[error("expected {expected} bounds, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsaConfig {
    pub bounds: Vec<(f64, f64)>,
    pub visiting: f64,
    pub acceptance: f64,
    pub initial_temp: f64,
    /// Number of annealing sweeps (each sweep is a chain of `2d` moves).
    pub max_iter: usize,
    /// When the temperature falls below `restart_ratio * initial_temp` the
    /// chain restarts from a fresh random point.
    pub restart_ratio: f64,
    pub seed: u64,
    pub stream: u64,
    /// Bounded simplex descent from the best annealed point.
    pub polish: bool,
}

impl Default for GsaConfig {
    fn default() -> Self {
        Self {
            bounds: Vec::new(),
            visiting: 2.62,
            acceptance: -5.0,
            initial_temp: 5230.0,
            max_iter: 1000,
            restart_ratio: 2e-5,
            seed: DEFAULT_SEED,
            stream: 0,
            polish: true,
        }
    }
}

impl GsaConfig {
    pub fn with_bounds(bounds: Vec<(f64, f64)>) -> Self {
        Self {
            bounds,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GsaError> {
        for (index, &(low, high)) in self.bounds.iter().enumerate() {
            if !(low.is_finite() && high.is_finite() && low < high) {
                return Err(GsaError::BadBound { index, low, high });
            }
        }
        if !(self.visiting > 1.0 && self.visiting < 3.0) {
            return Err(GsaError::BadVisiting(self.visiting));
        }
        if !(self.acceptance < 1.0) {
            return Err(GsaError::BadAcceptance(self.acceptance));
        }
        if !(self.initial_temp > 0.0 && self.initial_temp.is_finite()) {
            return Err(GsaError::BadTemperature(self.initial_temp));
        }
        if self.max_iter == 0 {
            return Err(GsaError::NoIterations);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsaResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective at the chain's first point.
    pub initial_value: f64,
    pub evals: usize,
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Tsallis visiting distribution sampler for a fixed `q_v`.
struct Visitor {
    qv: f64,
    factor4_p: f64,
    factor6: f64,
}

impl Visitor {
    fn new(qv: f64) -> Self {
        let pi = std::f64::consts::PI;
        let factor2 = ((4.0 - qv) * (qv - 1.0).ln()).exp();
        let factor3 = ((2.0 - qv) * 2f64.ln() / (qv - 1.0)).exp();
        let factor4_p = pi.sqrt() * factor2 / (factor3 * (3.0 - qv));
        let factor5 = 1.0 / (qv - 1.0) - 0.5;
        let d1 = 2.0 - factor5;
        let factor6 = pi * (1.0 - factor5) / (pi * (1.0 - factor5)).sin() / ln_gamma(d1).exp();
        Self {
            qv,
            factor4_p,
            factor6,
        }
    }

    fn sample(&self, temperature: f64, rng: &mut SeededRng) -> f64 {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let factor1 = (temperature.ln() / (self.qv - 1.0)).exp();
        let factor4 = self.factor4_p * factor1;
        let sigma = (-(self.qv - 1.0) * (self.factor6 / factor4).ln() / (3.0 - self.qv)).exp();
        let den = ((self.qv - 1.0) * y.abs().ln() / (3.0 - self.qv)).exp();
        let v = x * sigma / den;
        if v > TAIL_LIMIT {
            TAIL_LIMIT * rng.random::<f64>()
        } else if v < -TAIL_LIMIT {
            -TAIL_LIMIT * rng.random::<f64>()
        } else if v.is_nan() {
            0.0
        } else {
            v
        }
    }
}

fn wrap_unit(u: f64) -> f64 {
    let w = u.rem_euclid(1.0);
    if w < MIN_VISIT_BOUND {
        w + MIN_VISIT_BOUND
    } else {
        w
    }
}

/// Minimizes `objective` inside `config.bounds`.
///
/// Deterministic for a fixed `(seed, stream)`. The returned point always lies
/// inside the bounds and its value never exceeds the first point's value.
pub fn gsa_minimize<F>(mut objective: F, config: &GsaConfig) -> Result<GsaResult, GsaError>
where
    F: FnMut(&[f64]) -> f64,
{
    config.validate()?;
    let dim = config.bounds.len();
    let mut rng = SeededRng::new(config.seed, config.stream);
    let lows: Vec<f64> = config.bounds.iter().map(|b| b.0).collect();
    let widths: Vec<f64> = config.bounds.iter().map(|b| b.1 - b.0).collect();
    let to_x = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(lows.iter().zip(&widths))
            .map(|(&ui, (&lo, &w))| (lo + ui * w).min(lo + w))
            .collect()
    };
    let mut evals = 0usize;
    let mut energy = |u: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = objective(&to_x(u));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut current: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let mut e_current = energy(&current, &mut evals);
    let initial_value = e_current;
    let mut best = current.clone();
    let mut e_best = e_current;

    if dim > 0 {
        let visitor = Visitor::new(config.visiting);
        let t1 = ((config.visiting - 1.0) * 2f64.ln()).exp() - 1.0;
        let restart_temp = config.initial_temp * config.restart_ratio;
        let mut local = 0usize;
        for _ in 0..config.max_iter {
            let s = local as f64 + 2.0;
            let t2 = ((config.visiting - 1.0) * s.ln()).exp() - 1.0;
            let temperature = config.initial_temp * t1 / t2;
            if temperature < restart_temp {
                current = (0..dim).map(|_| rng.random::<f64>()).collect();
                e_current = energy(&current, &mut evals);
                if e_current < e_best {
                    e_best = e_current;
                    best = current.clone();
                }
                local = 0;
                continue;
            }
            let temperature_step = temperature / (local as f64 + 1.0);
            for step in 0..2 * dim {
                let mut candidate = current.clone();
                if step < dim {
                    for c in candidate.iter_mut() {
                        *c = wrap_unit(*c + visitor.sample(temperature, &mut rng));
                    }
                } else {
                    let j = step - dim;
                    candidate[j] = wrap_unit(candidate[j] + visitor.sample(temperature, &mut rng));
                }
                let e = energy(&candidate, &mut evals);
                let r: f64 = rng.random();
                let accept = if e < e_current {
                    true
                } else {
                    let pqv_temp =
                        1.0 - (1.0 - config.acceptance) * (e - e_current) / temperature_step;
                    let pqv = if pqv_temp <= 0.0 {
                        0.0
                    } else {
                        (pqv_temp.ln() / (1.0 - config.acceptance)).exp()
                    };
                    r <= pqv
                };
                if accept {
                    current = candidate;
                    e_current = e;
                    if e_current < e_best {
                        e_best = e_current;
                        best = current.clone();
                    }
                }
            }
            local += 1;
        }
    }

    let mut x = to_x(&best);
    let mut value = e_best;
    if config.polish && dim > 0 {
        let opts = SimplexOptions {
            initial_step: 0.02,
            f_tol: 1e-10,
            x_tol: 1e-12,
            max_evals: 2_000 * dim,
            restarts: 3,
        };
        let res = nelder_mead(&mut objective, &x, &config.bounds, &opts);
        evals += res.evals;
        if res.value < value {
            x = res.x;
            value = res.value;
        }
    }
    Ok(GsaResult {
        x,
        value,
        initial_value,
        evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn quadratic_minimum_without_polish() {
        let mut cfg = GsaConfig::with_bounds(vec![(0.0, 10.0)]);
        cfg.polish = false;
        let res = gsa_minimize(|x| (x[0] - 3.0).powi(2), &cfg).unwrap();
        assert!((res.x[0] - 3.0).abs() < 1e-2, "{res:?}");
    }

    #[test]
    fn flat_objective_returns_in_bounds_point() {
        let cfg = GsaConfig::with_bounds(vec![(-1.0, 1.0), (5.0, 6.0)]);
        let res = gsa_minimize(|_| 4.0, &cfg).unwrap();
        assert_eq!(res.value, 4.0);
        assert!((-1.0..=1.0).contains(&res.x[0]));
        assert!((5.0..=6.0).contains(&res.x[1]));
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = GsaConfig::with_bounds(vec![(-5.0, 5.0); 3]);
        let f = |x: &[f64]| {
            x.iter()
                .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
                .sum::<f64>()
        };
        let a = gsa_minimize(f, &cfg).unwrap();
        let b = gsa_minimize(f, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.value <= a.initial_value);
    }

    #[test]
    fn finds_rastrigin_global_minimum() {
        let cfg = GsaConfig::with_bounds(vec![(-5.12, 5.12); 4]);
        let f = |x: &[f64]| {
            x.iter()
                .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
                .sum::<f64>()
        };
        let res = gsa_minimize(f, &cfg).unwrap();
        assert!(res.value < 1e-6, "{res:?}");
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = GsaConfig::with_bounds(vec![(1.0, 1.0)]);
        assert!(matches!(cfg.validate(), Err(GsaError::BadBound { .. })));
        cfg.bounds = vec![(0.0, 1.0)];
        cfg.visiting = 3.5;
        assert!(matches!(cfg.validate(), Err(GsaError::BadVisiting(_))));
        cfg.visiting = 2.62;
        cfg.max_iter = 0;
        assert_eq!(cfg.validate(), Err(GsaError::NoIterations));
    }
}
