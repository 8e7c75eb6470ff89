//! Bounded derivative-free local search.
//!
//! A Nelder–Mead simplex whose trial points are clamped to a box. Used to
//! refine `(beta, gamma)` in classical SIR fits and to polish annealing results.

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Initial edge length as a fraction of each bound width.
    pub initial_step: f64,
    /// Relative spread of objective values across the simplex at convergence.
    pub f_tol: f64,
    /// Largest vertex distance from the best vertex, in bound-width units.
    pub x_tol: f64,
    pub max_evals: usize,
    /// Number of restarts from the current best point once converged.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            f_tol: 1e-8,
            x_tol: 1e-10,
            max_evals: 20_000,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Minimizes `f` inside `bounds` starting from `start`.
///
/// Deterministic for a given start point. Non-finite objective values are
/// treated as `+inf`.
pub fn nelder_mead<F>(
    mut f: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    opts: &SimplexOptions,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(
        start.len(),
        bounds.len(),
        "start and bounds dimension mismatch"
    );
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut best_x = start.to_vec();
    clamp_into(&mut best_x, bounds);
    let mut best_f = eval(&best_x, &mut evals);
    if n == 0 {
        return SimplexResult {
            x: best_x,
            value: best_f,
            evals,
        };
    }

    let widths: Vec<f64> = bounds.iter().map(|&(lo, hi)| (hi - lo).max(0.0)).collect();
    for round in 0..=opts.restarts {
        let step_scale = opts.initial_step / (1 << round.min(8)) as f64;
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..n {
            let mut x = best_x.clone();
            let step = widths[i] * step_scale;
            // step away from the nearer bound so the vertex is distinct
            if x[i] + step <= bounds[i].1 {
                x[i] += step;
            } else {
                x[i] -= step;
            }
            clamp_into(&mut x, bounds);
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_best = simplex[0].1;
            let f_worst = simplex[n].1;
            let spread = (f_worst - f_best).abs();
            let x_spread = simplex[1..]
                .iter()
                .flat_map(|(x, _)| {
                    x.iter().zip(&simplex[0].0).zip(&widths).map(|((a, b), w)| {
                        if *w > 0.0 {
                            (a - b).abs() / w
                        } else {
                            0.0
                        }
                    })
                })
                .fold(0.0, f64::max);
            if (spread <= opts.f_tol * (f_best.abs() + 1e-300) && x_spread <= opts.x_tol.sqrt())
                || x_spread <= opts.x_tol
                || evals >= opts.max_evals
            {
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let along = |coef: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + coef * (c - w))
                    .collect();
                clamp_into(&mut p, bounds);
                p
            };

            let xr = along(1.0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        for (v, b) in vertex.0.iter_mut().zip(&x0) {
                            *v = b + 0.5 * (*v - b);
                        }
                        vertex.1 = eval(&vertex.0, &mut evals);
                    }
                }
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best_f;
        if simplex[0].1 <= best_f {
            best_x = simplex[0].0.clone();
            best_f = simplex[0].1;
        }
        if evals >= opts.max_evals || (!improved && round > 0) {
            break;
        }
    }

    SimplexResult {
        x: best_x,
        value: best_f,
        evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let res = nelder_mead(
            rosen,
            &[-1.2, 1.0],
            &[(-5.0, 5.0), (-5.0, 5.0)],
            &SimplexOptions::default(),
        );
        assert!((res.x[0] - 1.0).abs() < 1e-4, "{:?}", res);
        assert!((res.x[1] - 1.0).abs() < 1e-4, "{:?}", res);
    }

    #[test]
    fn respects_bounds_when_minimum_outside() {
        let f = |x: &[f64]| (x[0] + 3.0).powi(2);
        let res = nelder_mead(f, &[0.5], &[(0.0, 1.0)], &SimplexOptions::default());
        assert!(res.x[0] >= 0.0 && res.x[0] < 1e-6);
    }

    #[test]
    fn is_deterministic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 0.2).abs();
        let opts = SimplexOptions::default();
        let a = nelder_mead(f, &[0.0, 0.0], &[(-1.0, 1.0), (-1.0, 1.0)], &opts);
        let b = nelder_mead(f, &[0.0, 0.0], &[(-1.0, 1.0), (-1.0, 1.0)], &opts);
        assert_eq!(a, b);
    }
}
