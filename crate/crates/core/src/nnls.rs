//! Non-negative ridge least squares.
//!
//! Solves `min ||x - A θ||² + λ||θ||²` subject to `θ >= 0`, where the columns
//! of `A` are dictionary atoms. The main path is a Lawson–Hanson active set
//! on the λ-augmented normal equations; a projected-gradient pass with
//! backtracking takes over if the active set leaves a KKT violation behind.

use thiserror::Error;

use crate::scalar::{dot, norm_sq, Scalar};

pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnlsError {
    #[error("target has {target} points but atoms only have {atoms}")]
    LengthMismatch { target: usize, atoms: usize },
    #[error("ridge parameter must be finite and >= 0, got {0}")]
    InvalidLambda(f64),
    #[error("target contains non-finite values")]
    NonFiniteTarget,
    #[error("no atoms to fit")]
    EmptyDictionary,
    #[error("solver did not reach the KKT tolerance within {iterations} iterations (worst violation {violation:e})")]
    NonConvergence { iterations: usize, violation: f64 },
}

/// Read-only view of `S` atoms truncated to the first `m` weeks.
#[derive(Debug, Clone, Copy)]
pub struct AtomMatrix<'a, T: Scalar> {
    data: &'a [T],
    stride: usize,
    rows: usize,
    len: usize,
}

impl<'a, T: Scalar> AtomMatrix<'a, T> {
    /// `data` is row-major with `stride` entries per atom; only the first `len` are used.
    pub fn new(data: &'a [T], stride: usize, len: usize) -> Self {
        assert!(len <= stride, "prefix longer than atoms");
        assert!(
            stride == 0 || data.len().is_multiple_of(stride),
            "ragged atom storage"
        );
        let rows = if stride == 0 { 0 } else { data.len() / stride };
        Self {
            data,
            stride,
            rows,
            len,
        }
    }

    pub fn atoms(&self) -> usize {
        self.rows
    }

    pub fn points(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn atom(&self, i: usize) -> &'a [T] {
        &self.data[i * self.stride..i * self.stride + self.len]
    }

    /// `A θ`.
    pub fn combine(&self, theta: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len];
        for (i, &w) in theta.iter().enumerate() {
            if w != T::zero() {
                for (o, &a) in out.iter_mut().zip(self.atom(i)) {
                    *o = *o + w * a;
                }
            }
        }
        out
    }
}

/// `||x - Aθ||² + λ||θ||²`.
pub fn ridge_objective<T: Scalar>(a: &AtomMatrix<'_, T>, x: &[T], lambda: T, theta: &[T]) -> T {
    let fit = a.combine(theta);
    let resid: T = x
        .iter()
        .zip(&fit)
        .map(|(&xi, &fi)| (xi - fi) * (xi - fi))
        .sum();
    resid + lambda * norm_sq(theta)
}

/// Gradient `2(Aᵀ(Aθ - x) + λθ)`.
pub fn ridge_gradient<T: Scalar>(a: &AtomMatrix<'_, T>, x: &[T], lambda: T, theta: &[T]) -> Vec<T> {
    let fit = a.combine(theta);
    let resid: Vec<T> = fit.iter().zip(x).map(|(&f, &xi)| f - xi).collect();
    let two = T::lit(2.0);
    (0..a.atoms())
        .map(|i| two * (dot(a.atom(i), &resid) + lambda * theta[i]))
        .collect()
}

/// KKT tolerance `1e-6 * (1 + ||x||²)`.
pub fn kkt_tolerance<T: Scalar>(x: &[T]) -> T {
    T::lit(1e-6) * (T::one() + norm_sq(x))
}

/// Largest KKT violation: negative entries, negative gradients, and
/// complementarity `θ_i * g_i`. Zero means the point is certified.
pub fn kkt_violation<T: Scalar>(a: &AtomMatrix<'_, T>, x: &[T], lambda: T, theta: &[T]) -> T {
    let eps = kkt_tolerance(x);
    let g = ridge_gradient(a, x, lambda, theta);
    let mut worst = T::zero();
    for (&t, &gi) in theta.iter().zip(&g) {
        worst = worst.max(-t);
        worst = worst.max(-gi - eps);
        worst = worst.max((t * gi).abs() - eps);
    }
    worst.max(T::zero())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution<T: Scalar = f64> {
    pub theta: Vec<T>,
    pub objective: T,
    pub iterations: usize,
    /// Objective value after every update of θ, starting from the initial point.
    pub trace: Vec<T>,
}

/// Cholesky factorization of a small dense SPD matrix; `None` if a pivot is
/// not safely positive.
fn cholesky<T: Scalar>(m: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    let scale = (0..n).map(|i| m[i * n + i]).fold(T::zero(), T::max);
    let floor = scale * T::epsilon() * T::lit(1e3);
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut v = m[i * n + j];
            for k in 0..j {
                v = v - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / d;
        }
    }
    Some(l)
}

fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut v = y[i];
        for k in 0..i {
            v = v - l[i * n + k] * y[k];
        }
        y[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in i + 1..n {
            v = v - l[k * n + i] * y[k];
        }
        y[i] = v / l[i * n + i];
    }
    y
}

/// Minimizer of the ridge objective restricted to the coordinates in `passive`.
fn passive_solve<T: Scalar>(
    a: &AtomMatrix<'_, T>,
    x: &[T],
    lambda: T,
    passive: &[usize],
) -> Option<Vec<T>> {
    let p = passive.len();
    let mut q = vec![T::zero(); p * p];
    for (r, &i) in passive.iter().enumerate() {
        for (c, &j) in passive.iter().enumerate().take(r + 1) {
            let v = dot(a.atom(i), a.atom(j));
            q[r * p + c] = v;
            q[c * p + r] = v;
        }
        q[r * p + r] = q[r * p + r] + lambda;
    }
    let rhs: Vec<T> = passive.iter().map(|&i| dot(a.atom(i), x)).collect();
    let l = cholesky(&q, p)?;
    Some(cholesky_solve(&l, p, &rhs))
}

fn validate<T: Scalar>(a: &AtomMatrix<'_, T>, x: &[T], lambda: T) -> Result<(), NnlsError> {
    if a.atoms() == 0 {
        return Err(NnlsError::EmptyDictionary);
    }
    if x.len() != a.points() {
        return Err(NnlsError::LengthMismatch {
            target: x.len(),
            atoms: a.points(),
        });
    }
    if !(lambda >= T::zero() && lambda.is_finite()) {
        return Err(NnlsError::InvalidLambda(lambda.to_f64_lossy()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NnlsError::NonFiniteTarget);
    }
    Ok(())
}

/// Solves the non-negative ridge problem from `θ = 0`.
pub fn solve<T: Scalar>(
    a: &AtomMatrix<'_, T>,
    x: &[T],
    lambda: T,
) -> Result<NnlsSolution<T>, NnlsError> {
    solve_from(a, x, lambda, None)
}

/// Solves the non-negative ridge problem from an optional warm start.
/// Negative entries of `start` are projected to zero.
pub fn solve_from<T: Scalar>(
    a: &AtomMatrix<'_, T>,
    x: &[T],
    lambda: T,
    start: Option<&[T]>,
) -> Result<NnlsSolution<T>, NnlsError> {
    validate(a, x, lambda)?;
    let s = a.atoms();
    let mut theta: Vec<T> = match start {
        Some(st) => {
            assert_eq!(st.len(), s, "warm start has wrong dimension");
            st.iter().map(|&v| v.max(T::zero())).collect()
        }
        None => vec![T::zero(); s],
    };
    let eps = kkt_tolerance(x);
    // entry threshold on the half-gradient, comfortably inside the certificate
    let enter_tol = eps * T::lit(1e-4);
    let two = T::lit(2.0);

    let mut passive: Vec<usize> = (0..s).filter(|&i| theta[i] > T::zero()).collect();
    let mut in_passive = vec![false; s];
    for &i in &passive {
        in_passive[i] = true;
    }
    let mut excluded = vec![false; s];
    let mut trace = vec![ridge_objective(a, x, lambda, &theta)];
    let mut iterations = 0usize;
    let mut need_inner = !passive.is_empty();

    'outer: loop {
        if need_inner {
            // move θ toward the passive-set minimizer, dropping coordinates that hit zero
            loop {
                iterations += 1;
                if iterations > MAX_ITERATIONS {
                    break 'outer;
                }
                if passive.is_empty() {
                    break;
                }
                let z = match passive_solve(a, x, lambda, &passive) {
                    Some(z) => z,
                    None => {
                        // dependent passive columns: drop the most recent entry
                        let j = passive.pop().expect("non-empty passive set");
                        in_passive[j] = false;
                        excluded[j] = true;
                        theta[j] = T::zero();
                        trace.push(ridge_objective(a, x, lambda, &theta));
                        continue;
                    }
                };
                if z.iter().all(|&v| v > T::zero()) {
                    for (&i, &v) in passive.iter().zip(&z) {
                        theta[i] = v;
                    }
                    trace.push(ridge_objective(a, x, lambda, &theta));
                    break;
                }
                let mut alpha = T::one();
                for (&i, &v) in passive.iter().zip(&z) {
                    if v <= T::zero() {
                        let denom = theta[i] - v;
                        if denom > T::zero() {
                            alpha = alpha.min(theta[i] / denom);
                        } else {
                            alpha = T::zero();
                        }
                    }
                }
                for (&i, &v) in passive.iter().zip(&z) {
                    theta[i] = theta[i] + alpha * (v - theta[i]);
                }
                let mut kept = Vec::with_capacity(passive.len());
                for (&i, &v) in passive.iter().zip(&z) {
                    let scale = theta[i].abs().max(v.abs()).max(T::one());
                    if theta[i] <= T::epsilon() * T::lit(16.0) * scale
                        || (alpha == T::zero() && v <= T::zero())
                    {
                        theta[i] = T::zero();
                        in_passive[i] = false;
                    } else {
                        kept.push(i);
                    }
                }
                passive = kept;
                trace.push(ridge_objective(a, x, lambda, &theta));
            }
        }

        let g = ridge_gradient(a, x, lambda, &theta);
        let mut entering = None;
        let mut best = enter_tol;
        for i in 0..s {
            if !in_passive[i] && !excluded[i] {
                let w = -g[i] / two;
                if w > best {
                    best = w;
                    entering = Some(i);
                }
            }
        }
        let Some(j) = entering else {
            break;
        };
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            break;
        }
        let before = theta.clone();
        passive.push(j);
        in_passive[j] = true;
        // accept j only if the passive minimizer gives it positive weight
        match passive_solve(a, x, lambda, &passive) {
            Some(z) if *z.last().expect("non-empty") > T::zero() => {
                excluded.iter_mut().for_each(|e| *e = false);
                need_inner = true;
            }
            _ => {
                passive.pop();
                in_passive[j] = false;
                excluded[j] = true;
                theta = before;
                need_inner = false;
            }
        }
    }

    let mut violation = kkt_violation(a, x, lambda, &theta);
    if violation > T::zero() {
        let (polished, used) = projected_gradient(
            a,
            x,
            lambda,
            theta,
            &mut trace,
            MAX_ITERATIONS.saturating_sub(iterations),
        );
        theta = polished;
        iterations += used;
        violation = kkt_violation(a, x, lambda, &theta);
    }
    if violation > T::zero() {
        return Err(NnlsError::NonConvergence {
            iterations,
            violation: violation.to_f64_lossy(),
        });
    }
    let objective = ridge_objective(a, x, lambda, &theta);
    Ok(NnlsSolution {
        theta,
        objective,
        iterations,
        trace,
    })
}

/// Projected gradient with backtracking; stops once the KKT certificate holds.
fn projected_gradient<T: Scalar>(
    a: &AtomMatrix<'_, T>,
    x: &[T],
    lambda: T,
    mut theta: Vec<T>,
    trace: &mut Vec<T>,
    budget: usize,
) -> (Vec<T>, usize) {
    let mut f = ridge_objective(a, x, lambda, &theta);
    // Lipschitz bound: 2 * (trace of the Gram matrix + λ)
    let lip = T::lit(2.0) * ((0..a.atoms()).map(|i| norm_sq(a.atom(i))).sum::<T>() + lambda);
    let mut step = if lip > T::zero() {
        T::one() / lip
    } else {
        T::one()
    };
    let half = T::lit(0.5);
    let mut used = 0;
    while used < budget {
        used += 1;
        if kkt_violation(a, x, lambda, &theta) == T::zero() {
            break;
        }
        let g = ridge_gradient(a, x, lambda, &theta);
        let mut t = step * T::lit(4.0);
        loop {
            let cand: Vec<T> = theta
                .iter()
                .zip(&g)
                .map(|(&th, &gi)| (th - t * gi).max(T::zero()))
                .collect();
            let fc = ridge_objective(a, x, lambda, &cand);
            let lin: T = cand
                .iter()
                .zip(&theta)
                .zip(&g)
                .map(|((&c, &th), &gi)| gi * (c - th) + (c - th) * (c - th) / (T::lit(2.0) * t))
                .sum();
            if fc <= f + lin || t < T::epsilon() * step {
                if fc <= f {
                    theta = cand;
                    f = fc;
                    trace.push(f);
                }
                step = t;
                break;
            }
            t = t * half;
        }
    }
    (theta, used)
}
