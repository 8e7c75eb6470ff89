//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting. `None` if a pivot vanishes.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / m[i][i];
    }
    Some(z)
}

pub fn objective(atoms: &[Vec<f64>], x: &[f64], lambda: f64, theta: &[f64]) -> f64 {
    let mut r = 0.0;
    for (t, &xt) in x.iter().enumerate() {
        let fit: f64 = atoms.iter().zip(theta).map(|(a, w)| a[t] * w).sum();
        r += (xt - fit).powi(2);
    }
    r + lambda * theta.iter().map(|w| w * w).sum::<f64>()
}

/// Exhaustive support enumeration: the best non-negative stationary point
/// over every subset of atoms.
pub fn nnls_oracle(atoms: &[Vec<f64>], x: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let s = atoms.len();
    let mut best = (vec![0.0; s], objective(atoms, x, lambda, &vec![0.0; s]));
    for mask in 1u32..(1 << s) {
        let idx: Vec<usize> = (0..s).filter(|i| mask & (1 << i) != 0).collect();
        let gram: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| {
                idx.iter()
                    .map(|&j| {
                        let g: f64 = atoms[i].iter().zip(&atoms[j]).map(|(a, b)| a * b).sum();
                        if i == j {
                            g + lambda
                        } else {
                            g
                        }
                    })
                    .collect()
            })
            .collect();
        let rhs: Vec<f64> = idx
            .iter()
            .map(|&i| atoms[i].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        let Some(z) = solve_dense(gram, rhs) else {
            continue;
        };
        if z.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut theta = vec![0.0; s];
        for (&i, &v) in idx.iter().zip(&z) {
            theta[i] = v;
        }
        let f = objective(atoms, x, lambda, &theta);
        if f < best.1 {
            best = (theta, f);
        }
    }
    best
}

/// Random problem: atoms uniform in [0, 1), target a noisy non-negative mix
/// when `mixed`, otherwise uniform in [-1, 1).
pub struct Instance {
    pub atoms: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub lambda: f64,
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let s = rng.random_range(1..=8);
        let lambda = [0.0, 0.1, 1.0][rng.random_range(0..3)];
        // λ = 0 needs a tall system for the minimizer to be unique
        let min_points = if lambda == 0.0 { s + 2 } else { 1 };
        let m = rng.random_range(min_points..=20);
        let atoms: Vec<Vec<f64>> = (0..s)
            .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
            .collect();
        let x: Vec<f64> = if rng.random_bool(0.5) {
            let w: Vec<f64> = (0..s)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        3.0 * rng.random::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            (0..m)
                .map(|t| {
                    atoms.iter().zip(&w).map(|(a, w)| a[t] * w).sum::<f64>()
                        + 0.1 * rng.random_range(-1.0..1.0)
                })
                .collect()
        } else {
            (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        Self { atoms, x, lambda }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.atoms.concat()
    }

    pub fn points(&self) -> usize {
        self.x.len()
    }
}

pub fn instances(seed: u64, n: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Instance::random(&mut rng)).collect()
}

/// Plain forward recursion of the clamped discrete SIR map.
pub fn sir_reference(
    s0: f64,
    i0: f64,
    r0: f64,
    beta: f64,
    gamma: f64,
    n: f64,
    weeks: usize,
) -> Vec<(f64, f64, f64)> {
    let mut out = vec![(s0, i0, r0)];
    let (mut s, mut i, mut r) = (s0, i0, r0);
    for _ in 0..weeks {
        let inf = (beta * s * i / n).min(s);
        let rec = (gamma * i).min(i);
        s -= inf;
        i += inf - rec;
        r += rec;
        out.push((s, i, r));
    }
    out
}
