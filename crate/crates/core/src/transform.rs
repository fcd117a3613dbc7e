//! Population and empirical (Monte-Carlo) distributional transforms.
//!
//! For a univariate law and an auxiliary uniform `u`, the distributional transform is
//! `T(x, u) = P(X < x) + u·P(X = x)`. It maps any law, discrete, continuous or
//! mixed, onto Uniform[0,1] while keeping the copula. The empirical version replaces
//! the law by the empirical distribution of the full sample; ties are detected with
//! exact floating-point equality.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Auxiliary uniforms consumed by the empirical transform, one per data entry.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformDraws {
    values: Array2<f64>,
}

impl UniformDraws {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(&u) = values.iter().find(|u| !(0.0..1.0).contains(*u)) {
            return Err(Error::Domain {
                value: u,
                domain: "[0,1)",
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        Self {
            values: self.values.select(ndarray::Axis(0), perm),
        }
    }
}

/// Output of [`empirical_transform_dataset`]: every entry in `[0,1]`, grouping
/// inherited from the input.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedDataset(Dataset);

impl TransformedDataset {
    pub fn dataset(&self) -> &Dataset {
        &self.0
    }

    pub fn into_dataset(self) -> Dataset {
        self.0
    }
}

/// A univariate law described through `P(X < x)` and `P(X = x)`.
pub trait Law {
    /// Left limit of the distribution function, `P(X < x)`.
    fn left_cdf(&self, x: f64) -> f64;
    /// Point mass `P(X = x)`.
    fn point_mass(&self, x: f64) -> f64;
}

/// Mixture of a finite atom table and a weighted continuous part.
pub struct MixedLaw<F> {
    atoms: Vec<(f64, f64)>,
    continuous_weight: f64,
    continuous_cdf: F,
}

impl<F: Fn(f64) -> f64> MixedLaw<F> {
    /// `atoms` are `(location, mass)` pairs; the continuous part gets the remaining mass
    /// `1 − Σ mass` and is described by its distribution function.
    pub fn new(atoms: Vec<(f64, f64)>, continuous_cdf: F) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.iter().any(|a| a.1.is_nan() || a.1 < 0.0 || !a.0.is_finite()) || total > 1.0 + 1e-12 {
            return Err(Error::Config(
                "atom masses must be nonnegative and sum to at most 1".into(),
            ));
        }
        Ok(Self {
            atoms,
            continuous_weight: (1.0 - total).max(0.0),
            continuous_cdf,
        })
    }
}

impl MixedLaw<fn(f64) -> f64> {
    /// Purely discrete law.
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        fn zero(_: f64) -> f64 {
            0.0
        }
        let law = Self::new(atoms, zero as fn(f64) -> f64)?;
        Ok(Self {
            continuous_weight: 0.0,
            ..law
        })
    }
}

impl<F: Fn(f64) -> f64> Law for MixedLaw<F> {
    fn left_cdf(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.0 < x).map(|a| a.1).sum();
        let cont = if self.continuous_weight > 0.0 {
            self.continuous_weight * (self.continuous_cdf)(x)
        } else {
            0.0
        };
        atoms + cont
    }

    fn point_mass(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == x).map(|a| a.1).sum()
    }
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain {
            value: u,
            domain: "[0,1]",
        })
    }
}

/// `P(X < x) + u·P(X = x)` for a known law.
pub fn population_transform(x: f64, u: f64, law: &impl Law) -> Result<f64> {
    check_u(u)?;
    Ok(law.left_cdf(x) + u * law.point_mass(x))
}

/// `(1/N)·Σₖ [1{sampleₖ < x} + u·1{sampleₖ = x}]`.
pub fn empirical_transform_value(x: f64, u: f64, sample: &[f64]) -> Result<f64> {
    check_u(u)?;
    if sample.is_empty() {
        return Err(Error::Shape("empty reference sample".into()));
    }
    let (less, equal) = sample.iter().fold((0usize, 0usize), |(l, e), &s| {
        if s < x {
            (l + 1, e)
        } else if s == x {
            (l, e + 1)
        } else {
            (l, e)
        }
    });
    Ok((less as f64 + u * equal as f64) / sample.len() as f64)
}

/// Empirical transform of one column against itself, by sorting once.
///
/// Each observation's reference sample is the full column, itself included.
pub fn empirical_transform_column(column: ArrayView1<'_, f64>, draws: ArrayView1<'_, f64>) -> Vec<f64> {
    let n = column.len();
    debug_assert_eq!(n, draws.len());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0.0; n];
    let nf = n as f64;
    let mut start = 0;
    while start < n {
        let x = column[order[start]];
        let mut end = start + 1;
        while end < n && column[order[end]] == x {
            end += 1;
        }
        let less = start as f64;
        let equal = (end - start) as f64;
        for &j in &order[start..end] {
            out[j] = (less + draws[j] * equal) / nf;
        }
        start = end;
    }
    out
}

/// Applies the empirical transform column by column.
pub fn empirical_transform_dataset(ds: &Dataset, draws: &UniformDraws) -> Result<TransformedDataset> {
    let (n, d) = (ds.n_obs(), ds.n_columns());
    if draws.values.dim() != (n, d) {
        return Err(Error::Shape(format!(
            "draws are {:?}, dataset is {:?}",
            draws.values.dim(),
            (n, d)
        )));
    }
    let mut out = Array2::zeros((n, d));
    for c in 0..d {
        let col = empirical_transform_column(ds.column(c), draws.values.column(c));
        out.column_mut(c).iter_mut().zip(col).for_each(|(o, v)| *o = v);
    }
    let transformed = Dataset::with_names(out, ds.grouping().to_vec(), ds.names().to_vec())?;
    Ok(TransformedDataset(transformed))
}
