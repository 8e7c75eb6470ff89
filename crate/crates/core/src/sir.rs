//! Discrete-time SIR recursions, the time-shifted variant used for latent
//! sub-populations, and classical single-population fitting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{nelder_mead, SimplexOptions};
use crate::scalar::Scalar;
use crate::series::WeeklySeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SirError {
    #[error("shift week {k} lies beyond the simulated horizon of {weeks} weeks")]
    ShiftBeyondHorizon { k: usize, weeks: usize },
    #[error("invalid SIR parameter: {0}")]
    InvalidParams(&'static str),
    #[error("series needs at least 3 points for a classical fit, got {0}")]
    SeriesTooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SirState<T: Scalar = f64> {
    pub s: T,
    pub i: T,
    pub r: T,
}

impl<T: Scalar> SirState<T> {
    pub fn new(s: T, i: T, r: T) -> Self {
        Self { s, i, r }
    }

    pub fn total(&self) -> T {
        self.s + self.i + self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams<T: Scalar = f64> {
    pub beta: T,
    pub gamma: T,
    pub n: T,
}

impl<T: Scalar> SirParams<T> {
    pub fn new(beta: T, gamma: T, n: T) -> Result<Self, SirError> {
        let p = Self { beta, gamma, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SirError> {
        if !(self.beta >= T::zero() && self.beta.is_finite()) {
            return Err(SirError::InvalidParams("beta must be finite and >= 0"));
        }
        if !(self.gamma >= T::zero() && self.gamma.is_finite()) {
            return Err(SirError::InvalidParams("gamma must be finite and >= 0"));
        }
        if !(self.n > T::zero() && self.n.is_finite()) {
            return Err(SirError::InvalidParams("population must be finite and > 0"));
        }
        Ok(())
    }
}

/// One sub-population that starts at week `k` when `c` people are moved
/// from susceptible to infected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedSirParams<T: Scalar = f64> {
    pub s0: T,
    pub beta: T,
    pub gamma: T,
    pub c: T,
    pub k: usize,
}

impl<T: Scalar> ShiftedSirParams<T> {
    pub fn validate(&self) -> Result<(), SirError> {
        if !(self.s0 > T::zero() && self.s0.is_finite()) {
            return Err(SirError::InvalidParams("s0 must be finite and > 0"));
        }
        if !(self.c >= T::zero() && self.c.is_finite()) {
            return Err(SirError::InvalidParams("c must be finite and >= 0"));
        }
        if !(self.beta >= T::zero() && self.beta.is_finite()) {
            return Err(SirError::InvalidParams("beta must be finite and >= 0"));
        }
        if !(self.gamma >= T::zero() && self.gamma.is_finite()) {
            return Err(SirError::InvalidParams("gamma must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirTrajectory<T: Scalar = f64> {
    pub states: Vec<SirState<T>>,
}

impl<T: Scalar> SirTrajectory<T> {
    pub fn infected(&self) -> Vec<T> {
        self.states.iter().map(|s| s.i).collect()
    }
}

/// Moves `min(beta*s*i/n, s)` from S to I and `min(gamma*i, i)` from I to R.
#[inline]
fn transfer<T: Scalar>(state: SirState<T>, beta: T, gamma: T, n: T) -> SirState<T> {
    let infections = (beta * state.s * state.i / n).min(state.s).max(T::zero());
    let removals = (gamma * state.i).min(state.i).max(T::zero());
    SirState {
        s: state.s - infections,
        i: state.i + infections - removals,
        r: state.r + removals,
    }
}

pub fn step<T: Scalar>(state: SirState<T>, params: &SirParams<T>) -> SirState<T> {
    transfer(state, params.beta, params.gamma, params.n)
}

pub fn simulate<T: Scalar>(
    state0: SirState<T>,
    params: &SirParams<T>,
    weeks: usize,
) -> SirTrajectory<T> {
    let mut states = Vec::with_capacity(weeks + 1);
    states.push(state0);
    let mut state = state0;
    for _ in 0..weeks {
        state = step(state, params);
        states.push(state);
    }
    SirTrajectory { states }
}

/// Infected counts for weeks `0..=weeks` of a sub-population injected at week `k`.
///
/// Starts from `(s0, 0, 0)`. The infection term is normalized by `s0`, the
/// sub-population's total size; the injection is capped at the remaining
/// susceptibles so compartments stay non-negative.
pub fn simulate_shifted<T: Scalar>(
    params: &ShiftedSirParams<T>,
    weeks: usize,
) -> Result<Vec<T>, SirError> {
    params.validate()?;
    if params.k > weeks {
        return Err(SirError::ShiftBeyondHorizon { k: params.k, weeks });
    }
    Ok(shifted_states(params, weeks)
        .into_iter()
        .map(|s| s.i)
        .collect())
}

pub(crate) fn shifted_states<T: Scalar>(
    params: &ShiftedSirParams<T>,
    weeks: usize,
) -> Vec<SirState<T>> {
    let n = params.s0;
    let mut state = SirState::new(params.s0, T::zero(), T::zero());
    let mut out = Vec::with_capacity(weeks + 1);
    for t in 0..=weeks {
        if t > 0 {
            state = transfer(state, params.beta, params.gamma, n);
        }
        if t == params.k {
            let injected = params.c.min(state.s);
            state.s = state.s - injected;
            state.i = state.i + injected;
        }
        out.push(state);
    }
    out
}

/// Susceptible counts driven by observed infections instead of simulated ones.
///
/// `S_0 = N - I_0`, then `S_t = S_{t-1} - min(beta*S_{t-1}*I_{t-1}/N, S_{t-1})`.
pub fn teacher_forced_susceptibles<T: Scalar>(observed: &[T], params: &SirParams<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(observed.len());
    let Some(&first) = observed.first() else {
        return out;
    };
    let mut s = (params.n - first).max(T::zero());
    out.push(s);
    for &i_prev in &observed[..observed.len() - 1] {
        let infections = (params.beta * s * i_prev / params.n).min(s).max(T::zero());
        s = s - infections;
        out.push(s);
    }
    out
}

/// Infected count one week after `(s_prev, i_prev)`.
#[inline]
pub fn one_step_infected<T: Scalar>(s_prev: T, i_prev: T, params: &SirParams<T>) -> T {
    transfer(
        SirState::new(s_prev, i_prev, T::zero()),
        params.beta,
        params.gamma,
        params.n,
    )
    .i
}

/// Sum of squared one-step-ahead errors on infected counts under teacher forcing.
pub fn classical_objective(observed: &[f64], params: &SirParams<f64>) -> f64 {
    let s = teacher_forced_susceptibles(observed, params);
    observed
        .windows(2)
        .zip(&s)
        .map(|(w, &s_prev)| {
            let e = w[1] - one_step_infected(s_prev, w[0], params);
            e * e
        })
        .sum()
}

/// Result of [`fit_classical`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFit {
    pub params: SirParams<f64>,
    pub initial: SirState<f64>,
    pub objective: f64,
    /// Set when every observation is zero; `params` are then the fixed fallback.
    pub degenerate: bool,
}

/// Population sizes tried by [`fit_classical`]: `10^4, 10^4.5, ..., 10^9`.
pub fn population_grid() -> Vec<f64> {
    (0..=10).map(|j| 10f64.powf(4.0 + 0.5 * j as f64)).collect()
}

pub const RATE_BOUNDS: (f64, f64) = (0.0, 5.0);

/// Starting guess from least squares on `I_t - I_{t-1} = beta*a_t - gamma*I_{t-1}`
/// with `a_t` frozen at the susceptibles implied by the previous guess.
fn linearized_guess(observed: &[f64], n: f64) -> (f64, f64) {
    let mut beta = 0.5;
    let mut gamma = 0.5;
    for _ in 0..3 {
        let params = SirParams { beta, gamma, n };
        let s = teacher_forced_susceptibles(observed, &params);
        let (mut aa, mut ab, mut bb, mut ay, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (w, &s_prev) in observed.windows(2).zip(&s) {
            let a = s_prev * w[0] / n;
            let b = -w[0];
            let y = w[1] - w[0];
            aa += a * a;
            ab += a * b;
            bb += b * b;
            ay += a * y;
            by += b * y;
        }
        let det = aa * bb - ab * ab;
        if det.abs() <= 1e-12 * (aa * bb).max(1e-300) {
            break;
        }
        beta = ((bb * ay - ab * by) / det).clamp(RATE_BOUNDS.0, RATE_BOUNDS.1);
        gamma = ((aa * by - ab * ay) / det).clamp(RATE_BOUNDS.0, RATE_BOUNDS.1);
    }
    (beta, gamma)
}

/// Fits `(beta, gamma, N)` to a single observed infection series.
///
/// `N` is chosen from [`population_grid`]; for each candidate, `(beta, gamma)`
/// is refined by a bounded simplex search in `[0, 5]^2`. Ties keep the
/// smaller population.
pub fn fit_classical(series: &WeeklySeries) -> Result<ClassicalFit, SirError> {
    fit_classical_values(series.values())
}

pub fn fit_classical_values(observed: &[f64]) -> Result<ClassicalFit, SirError> {
    if observed.len() < 3 {
        return Err(SirError::SeriesTooShort(observed.len()));
    }
    let grid = population_grid();
    if observed.iter().all(|&v| v == 0.0) {
        let n = grid[0];
        return Ok(ClassicalFit {
            params: SirParams {
                beta: 0.0,
                gamma: 0.0,
                n,
            },
            initial: SirState::new(n, 0.0, 0.0),
            objective: 0.0,
            degenerate: true,
        });
    }

    let bounds = [RATE_BOUNDS, RATE_BOUNDS];
    let opts = SimplexOptions {
        initial_step: 0.05,
        f_tol: 1e-8,
        x_tol: 1e-12,
        max_evals: 4_000,
        restarts: 4,
    };
    let mut best: Option<ClassicalFit> = None;
    for &n in &grid {
        let i0 = observed[0];
        let objective = |x: &[f64]| {
            classical_objective(
                observed,
                &SirParams {
                    beta: x[0],
                    gamma: x[1],
                    n,
                },
            )
        };
        let (b0, g0) = linearized_guess(observed, n);
        let res = nelder_mead(objective, &[b0, g0], &bounds, &opts);
        let better = best.as_ref().is_none_or(|b| res.value < b.objective);
        if better {
            best = Some(ClassicalFit {
                params: SirParams {
                    beta: res.x[0],
                    gamma: res.x[1],
                    n,
                },
                initial: SirState::new((n - i0).max(0.0), i0, 0.0),
                objective: res.value,
                degenerate: false,
            });
        }
    }
    Ok(best.expect("population grid is non-empty"))
}
