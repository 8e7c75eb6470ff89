//! Curve dictionaries and the dictionary reconstruction model.
//!
//! Each atom is a candidate sub-population curve peaking at 1. A series is
//! reconstructed as a non-negative combination of atoms fitted by
//! [`crate::nnls`].

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nnls::{self, AtomMatrix, NnlsError};
use crate::scalar::{max_of, Scalar};
use crate::series::WeeklySeries;
use crate::sir::{simulate_shifted, ShiftedSirParams, SirError};

pub const DEFAULT_LAMBDA: f64 = 1.0;
/// Relative size below which a weight is not counted as part of the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("grid `{0}` is empty")]
    EmptyGrid(&'static str),
    #[error("gaussian width must be > 0, got {0}")]
    NonPositiveSigma(f64),
    #[error("atom {index} is identically zero and cannot be normalized")]
    ZeroAtom { index: usize },
    #[error("atom {index} has {got} points, expected {expected}")]
    RaggedAtom {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("requested weeks {requested:?} exceed the {available} weeks held by the dictionary")]
    HorizonTooLong {
        requested: Range<usize>,
        available: usize,
    },
    #[error("weights have {got} entries for a dictionary of {expected} atoms")]
    WeightCount { got: usize, expected: usize },
    #[error(transparent)]
    Sir(#[from] SirError),
    #[error(transparent)]
    Solver(#[from] NnlsError),
    #[error("dictionary csv: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where an atom came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum AtomMeta {
    Gaussian { mu: f64, sigma: f64 },
    Sir { s0: f64, beta: f64, k: usize },
    Custom { label: String },
}

impl AtomMeta {
    pub fn family(&self) -> &str {
        match self {
            AtomMeta::Gaussian { .. } => "gaussian",
            AtomMeta::Sir { .. } => "sir",
            AtomMeta::Custom { label } => label,
        }
    }

    /// The three parameter slots of the CSV layout; unused slots are empty.
    pub fn params(&self) -> [String; 3] {
        match self {
            AtomMeta::Gaussian { mu, sigma } => [mu.to_string(), sigma.to_string(), String::new()],
            AtomMeta::Sir { s0, beta, k } => [s0.to_string(), beta.to_string(), k.to_string()],
            AtomMeta::Custom { .. } => [String::new(), String::new(), String::new()],
        }
    }

    fn from_fields(family: &str, p: [&str; 3]) -> Result<Self, DictionaryError> {
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                DictionaryError::Format(format!("bad parameter `{s}` for {family} atom"))
            })
        };
        Ok(match family {
            "gaussian" => AtomMeta::Gaussian {
                mu: num(p[0])?,
                sigma: num(p[1])?,
            },
            "sir" => AtomMeta::Sir {
                s0: num(p[0])?,
                beta: num(p[1])?,
                k: p[2]
                    .parse()
                    .map_err(|_| DictionaryError::Format(format!("bad shift `{}`", p[2])))?,
            },
            other => AtomMeta::Custom {
                label: other.to_string(),
            },
        })
    }
}

/// `S` atoms over weeks `0..weeks`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary<T: Scalar = f64> {
    weeks: usize,
    atoms: Vec<T>,
    meta: Vec<AtomMeta>,
}

impl<T: Scalar> Dictionary<T> {
    /// Builds a dictionary from raw curves, dividing each by its maximum.
    pub fn from_curves(curves: Vec<Vec<T>>, meta: Vec<AtomMeta>) -> Result<Self, DictionaryError> {
        assert_eq!(curves.len(), meta.len(), "one descriptor per curve");
        let weeks = curves
            .first()
            .map(Vec::len)
            .ok_or(DictionaryError::EmptyGrid("atoms"))?;
        let mut atoms = Vec::with_capacity(weeks * curves.len());
        for (index, curve) in curves.into_iter().enumerate() {
            if curve.len() != weeks {
                return Err(DictionaryError::RaggedAtom {
                    index,
                    got: curve.len(),
                    expected: weeks,
                });
            }
            let peak = max_of(&curve).unwrap_or(T::zero());
            if !(peak > T::zero()) || curve.iter().any(|v| *v < T::zero()) {
                return Err(DictionaryError::ZeroAtom { index });
            }
            atoms.extend(curve.into_iter().map(|v| v / peak));
        }
        Ok(Self { weeks, atoms, meta })
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    /// Number of weeks each atom covers (weeks `0..weeks()`).
    pub fn weeks(&self) -> usize {
        self.weeks
    }

    pub fn atom(&self, index: usize) -> &[T] {
        &self.atoms[index * self.weeks..(index + 1) * self.weeks]
    }

    pub fn meta(&self) -> &[AtomMeta] {
        &self.meta
    }

    /// Solver view over the first `len` weeks.
    pub fn prefix(&self, len: usize) -> AtomMatrix<'_, T> {
        AtomMatrix::new(&self.atoms, self.weeks, len)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), DictionaryError> {
        let mut header = String::from("family,param1,param2,param3");
        for t in 0..self.weeks {
            write!(header, ",{t}").expect("write to string");
        }
        writeln!(out, "{header}")?;
        for (i, meta) in self.meta.iter().enumerate() {
            let [p1, p2, p3] = meta.params();
            let mut line = format!("{},{p1},{p2},{p3}", meta.family());
            for v in self.atom(i) {
                write!(line, ",{:.16e}", v.to_f64_lossy()).expect("write to string");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, DictionaryError> {
        let mut lines = input.lines();
        let header = loop {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if !line.starts_with('#') && !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(DictionaryError::Format("missing header".into())),
            }
        };
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.len() < 5 || cols[..4] != ["family", "param1", "param2", "param3"] {
            return Err(DictionaryError::Format("unexpected header".into()));
        }
        for (t, c) in cols[4..].iter().enumerate() {
            if c.parse::<usize>().ok() != Some(t) {
                return Err(DictionaryError::Format(format!("week column {t} is `{c}`")));
            }
        }
        let weeks = cols.len() - 4;
        let mut atoms = Vec::new();
        let mut meta = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != weeks + 4 {
                return Err(DictionaryError::Format(format!(
                    "row {row} has {} fields",
                    fields.len()
                )));
            }
            meta.push(AtomMeta::from_fields(
                fields[0],
                [fields[1], fields[2], fields[3]],
            )?);
            for f in &fields[4..] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| DictionaryError::Format(format!("row {row}: bad value `{f}`")))?;
                atoms.push(T::lit(v));
            }
        }
        if meta.is_empty() {
            return Err(DictionaryError::EmptyGrid("atoms"));
        }
        Ok(Self { weeks, atoms, meta })
    }
}

/// Default Gaussian means: `0, 2, ..., 52`.
pub fn default_means() -> Vec<f64> {
    (0..=26).map(|i| 2.0 * i as f64).collect()
}

/// Default Gaussian widths: `1, 3, ..., 29`.
pub fn default_sigmas() -> Vec<f64> {
    (0..15).map(|i| 1.0 + 2.0 * i as f64).collect()
}

pub fn default_sir_s0() -> Vec<f64> {
    vec![1e4, 1e5, 1e6]
}

pub fn default_sir_beta() -> Vec<f64> {
    (3..=9).map(|i| i as f64 / 10.0).collect()
}

/// Default shifts: `0, 2, ..., 50`.
pub fn default_sir_k() -> Vec<usize> {
    (0..=25).map(|i| 2 * i).collect()
}

pub const DEFAULT_SIR_GAMMA: f64 = 0.5;
pub const DEFAULT_SIR_C: f64 = 100.0;

/// Max-normalized Gaussians `exp(-(t-μ)²/(2σ²))` on weeks `0..=weeks`, one per `(μ, σ)`.
pub fn build_gaussian_dictionary<T: Scalar>(
    means: &[f64],
    sigmas: &[f64],
    weeks: usize,
) -> Result<Dictionary<T>, DictionaryError> {
    if means.is_empty() {
        return Err(DictionaryError::EmptyGrid("means"));
    }
    if sigmas.is_empty() {
        return Err(DictionaryError::EmptyGrid("sigmas"));
    }
    if let Some(&bad) = sigmas.iter().find(|&&s| !(s > 0.0)) {
        return Err(DictionaryError::NonPositiveSigma(bad));
    }
    let mut curves = Vec::with_capacity(means.len() * sigmas.len());
    let mut meta = Vec::with_capacity(curves.capacity());
    for &mu in means {
        for &sigma in sigmas {
            let curve: Vec<T> = (0..=weeks)
                .map(|t| {
                    let d = T::from_usize_lossy(t) - T::lit(mu);
                    let s = T::lit(sigma);
                    (-(d * d) / (T::lit(2.0) * s * s)).exp()
                })
                .collect();
            curves.push(curve);
            meta.push(AtomMeta::Gaussian { mu, sigma });
        }
    }
    Dictionary::from_curves(curves, meta)
}

/// Max-normalized shifted-SIR infected curves on weeks `0..=weeks`, one per `(S₀, β, k)`.
pub fn build_sir_dictionary<T: Scalar>(
    s0_grid: &[f64],
    beta_grid: &[f64],
    k_grid: &[usize],
    gamma: f64,
    c: f64,
    weeks: usize,
) -> Result<Dictionary<T>, DictionaryError> {
    if s0_grid.is_empty() {
        return Err(DictionaryError::EmptyGrid("s0"));
    }
    if beta_grid.is_empty() {
        return Err(DictionaryError::EmptyGrid("beta"));
    }
    if k_grid.is_empty() {
        return Err(DictionaryError::EmptyGrid("k"));
    }
    let mut curves = Vec::new();
    let mut meta = Vec::new();
    for &s0 in s0_grid {
        for &beta in beta_grid {
            for &k in k_grid {
                let params = ShiftedSirParams {
                    s0: T::lit(s0),
                    beta: T::lit(beta),
                    gamma: T::lit(gamma),
                    c: T::lit(c),
                    k,
                };
                curves.push(simulate_shifted(&params, weeks)?);
                meta.push(AtomMeta::Sir { s0, beta, k });
            }
        }
    }
    Dictionary::from_curves(curves, meta)
}

pub fn default_gaussian_dictionary(weeks: usize) -> Dictionary<f64> {
    build_gaussian_dictionary(&default_means(), &default_sigmas(), weeks)
        .expect("default grids are valid")
}

pub fn default_sir_dictionary(weeks: usize) -> Result<Dictionary<f64>, DictionaryError> {
    build_sir_dictionary(
        &default_sir_s0(),
        &default_sir_beta(),
        &default_sir_k(),
        DEFAULT_SIR_GAMMA,
        DEFAULT_SIR_C,
        weeks,
    )
}

/// Non-negative dictionary weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights<T: Scalar = f64> {
    pub theta: Vec<T>,
    pub lambda: T,
}

impl<T: Scalar> Weights<T> {
    pub fn zeros(atoms: usize, lambda: T) -> Self {
        Self {
            theta: vec![T::zero(); atoms],
            lambda,
        }
    }

    /// Indices with `θ_i > 1e-6 · max θ`.
    pub fn support(&self) -> Vec<usize> {
        let Some(peak) = max_of(&self.theta) else {
            return Vec::new();
        };
        if !(peak > T::zero()) {
            return Vec::new();
        }
        let cut = peak * T::lit(SUPPORT_THRESHOLD);
        (0..self.theta.len())
            .filter(|&i| self.theta[i] > cut)
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.support().len()
    }

    /// Rows `atom_index,family,params,theta`; parameters are joined with `;`.
    pub fn write_csv<W: Write>(
        &self,
        dict: &Dictionary<T>,
        mut out: W,
    ) -> Result<(), DictionaryError> {
        writeln!(out, "atom_index,family,params,theta")?;
        for (i, (meta, th)) in dict.meta().iter().zip(&self.theta).enumerate() {
            let params = meta.params();
            let joined = params
                .iter()
                .filter(|p| !p.is_empty())
                .cloned()
                .collect::<Vec<_>>()
                .join(";");
            writeln!(
                out,
                "{i},{},{joined},{:e}",
                meta.family(),
                th.to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

/// Solves the non-negative ridge problem for `x` over the first `x.len()` weeks.
pub fn solve_nnls_ridge<T: Scalar>(
    dict: &Dictionary<T>,
    x: &[T],
    lambda: T,
) -> Result<Weights<T>, DictionaryError> {
    if x.len() > dict.weeks() {
        return Err(DictionaryError::HorizonTooLong {
            requested: 0..x.len(),
            available: dict.weeks(),
        });
    }
    let sol = nnls::solve(&dict.prefix(x.len()), x, lambda)?;
    Ok(Weights {
        theta: sol.theta,
        lambda,
    })
}

/// Fitted dictionary model for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictFit {
    pub weights: Weights<f64>,
    pub support_size: usize,
    pub objective: f64,
}

pub fn dict_fit(
    dict: &Dictionary<f64>,
    series: &WeeklySeries,
    lambda: f64,
) -> Result<DictFit, DictionaryError> {
    dict_fit_values(dict, series.values(), lambda)
}

pub fn dict_fit_values(
    dict: &Dictionary<f64>,
    x: &[f64],
    lambda: f64,
) -> Result<DictFit, DictionaryError> {
    let weights = solve_nnls_ridge(dict, x, lambda)?;
    let objective = nnls::ridge_objective(&dict.prefix(x.len()), x, lambda, &weights.theta);
    let support_size = weights.support_size();
    Ok(DictFit {
        weights,
        support_size,
        objective,
    })
}

/// Reconstruction `Σ θ_i atom_i(t)` for `t` in `weeks`.
pub fn dict_predict<T: Scalar>(
    dict: &Dictionary<T>,
    weights: &Weights<T>,
    weeks: Range<usize>,
) -> Result<Vec<T>, DictionaryError> {
    if weights.theta.len() != dict.len() {
        return Err(DictionaryError::WeightCount {
            got: weights.theta.len(),
            expected: dict.len(),
        });
    }
    if weeks.end > dict.weeks() {
        return Err(DictionaryError::HorizonTooLong {
            requested: weeks,
            available: dict.weeks(),
        });
    }
    let mut out = vec![T::zero(); weeks.len()];
    for (i, &w) in weights.theta.iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        let atom = &dict.atom(i)[weeks.clone()];
        for (o, &a) in out.iter_mut().zip(atom) {
            *o = *o + w * a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_gaussian_grid_has_405_atoms() {
        let d = default_gaussian_dictionary(52);
        assert_eq!(d.len(), 27 * 15);
        assert_eq!(d.weeks(), 53);
    }

    #[test]
    fn gaussian_atom_values() {
        let d: Dictionary<f64> = build_gaussian_dictionary(&[26.0], &[5.0], 52).unwrap();
        assert_eq!(d.atom(0)[26], 1.0);
        assert!((d.atom(0)[31] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((d.atom(0)[31] - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        assert!(matches!(
            build_gaussian_dictionary::<f64>(&[1.0], &[0.0], 10),
            Err(DictionaryError::NonPositiveSigma(_))
        ));
        assert!(matches!(
            build_gaussian_dictionary::<f64>(&[], &[1.0], 10),
            Err(DictionaryError::EmptyGrid("means"))
        ));
    }

    #[test]
    fn sir_dictionary_has_546_normalized_atoms() {
        let d = default_sir_dictionary(52).unwrap();
        assert_eq!(d.len(), 546);
        for i in 0..d.len() {
            let peak = max_of(d.atom(i)).unwrap();
            assert!((peak - 1.0).abs() <= 1e-12);
            assert!(d.atom(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn sir_atom_is_zero_before_shift() {
        let d: Dictionary<f64> =
            build_sir_dictionary(&[1e5], &[0.6], &[10], 0.5, 100.0, 52).unwrap();
        assert!(d.atom(0)[..10].iter().all(|&v| v == 0.0));
        assert!(d.atom(0)[10] > 0.0);
    }

    #[test]
    fn sir_dictionary_propagates_shift_error() {
        assert!(matches!(
            build_sir_dictionary::<f64>(&[1e5], &[0.6], &[60], 0.5, 100.0, 52),
            Err(DictionaryError::Sir(SirError::ShiftBeyondHorizon { .. }))
        ));
    }

    fn toy() -> Dictionary<f64> {
        let curves = vec![
            vec![0.0, 0.5, 1.0, 0.5, 0.0, 0.0],
            vec![1.0, 0.6, 0.2, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.25, 0.5, 1.0, 0.5],
            vec![0.0, 0.0, 0.0, 0.0, 0.3, 1.0],
        ];
        let meta = (0..4)
            .map(|i| AtomMeta::Custom {
                label: format!("c{i}"),
            })
            .collect();
        Dictionary::from_curves(curves, meta).unwrap()
    }

    #[test]
    fn linear_combination_reconstruction() {
        let d = toy();
        let w = Weights {
            theta: vec![2.0, 0.0, 4.0, 0.0],
            lambda: 0.0,
        };
        let pred = dict_predict(&d, &w, 0..6).unwrap();
        let expected: Vec<f64> = (0..6)
            .map(|t| 2.0 * d.atom(0)[t] + 4.0 * d.atom(2)[t])
            .collect();
        assert_eq!(pred, expected);
        assert_eq!(w.support(), vec![0, 2]);
    }

    #[test]
    fn zero_and_single_weight_predictions() {
        let d = toy();
        let zero = Weights::zeros(4, 1.0);
        assert!(dict_predict(&d, &zero, 0..6)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let mut one = Weights::zeros(4, 1.0);
        one.theta[3] = 2.0;
        let pred = dict_predict(&d, &one, 2..6).unwrap();
        assert_eq!(
            pred,
            d.atom(3)[2..6].iter().map(|v| 2.0 * v).collect::<Vec<_>>()
        );
        assert!(matches!(
            dict_predict(&d, &one, 0..7),
            Err(DictionaryError::HorizonTooLong { .. })
        ));
    }

    #[test]
    fn huge_ridge_empties_support() {
        let d = default_gaussian_dictionary(20);
        let x: Vec<f64> = (0..21).map(|t| 100.0 + 10.0 * t as f64).collect();
        let small = dict_fit_values(&d, &x, 1.0).unwrap();
        let huge = dict_fit_values(&d, &x, 1e14).unwrap();
        assert!(small.support_size > 0);
        let peak_small = max_of(&small.weights.theta).unwrap();
        let peak_huge = max_of(&huge.weights.theta).unwrap();
        assert!(peak_huge < 1e-6 * peak_small);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = default_sir_dictionary(56).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dictionary::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn weights_csv_layout() {
        let d: Dictionary<f64> = build_gaussian_dictionary(&[4.0], &[1.0, 3.0], 8).unwrap();
        let w = Weights {
            theta: vec![0.0, 2.5],
            lambda: 1.0,
        };
        let mut buf = Vec::new();
        w.write_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "atom_index,family,params,theta\n0,gaussian,4;1,0e0\n1,gaussian,4;3,2.5e0\n"
        );
    }
}
