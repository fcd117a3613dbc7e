//! Sample distance multivariance with its total, m-fold, normalized and copula variants.
//!
//! All variants are V-statistics `(1/N²)·Σ_{j,k} f(Ψ₁(j,k), …, Ψₙ(j,k))` over the
//! doubly-centered matrices; only the entrywise combiner `f` differs:
//!
//! | kind   | f(x)                               |
//! |--------|------------------------------------|
//! | single | ∏ xᵢ                               |
//! | m-fold | eₘ(x), the elementary symmetric sum |
//! | total  | ∏(1 + xᵢ) − 1 − Σ xᵢ                |

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{center, grand_mean, psi_distance_matrix, CenteredKernelMatrix, CndfSpec};
use crate::transform::{empirical_transform_dataset, UniformDraws};

/// Squared statistics below this are treated as a numerical failure.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MultivarianceKind {
    Single,
    Total,
    /// Sum over all subsets of exactly `m` margins.
    MFold(usize),
    NormalizedSingle,
    NormalizedTotal,
}

impl MultivarianceKind {
    pub fn is_normalized(&self) -> bool {
        matches!(self, Self::NormalizedSingle | Self::NormalizedTotal)
    }

    /// Subset sizes whose elementary symmetric sums make up the statistic.
    pub fn orders(&self, n: usize) -> Vec<usize> {
        match *self {
            Self::Single | Self::NormalizedSingle => vec![n],
            Self::Total | Self::NormalizedTotal => (2..=n).collect(),
            Self::MFold(m) => vec![m],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Self::MFold(m) if m < 2 || m > n => Err(Error::Config(format!(
                "m-fold multivariance needs 2 ≤ m ≤ n, got m={m}, n={n}"
            ))),
            Self::Total | Self::NormalizedTotal if n < 2 => {
                Err(Error::Config("total multivariance needs at least two margins".into()))
            }
            _ if n == 0 => Err(Error::Config("no margins".into())),
            _ => Ok(()),
        }
    }

    /// Entrywise combiner `f`; `scratch` must hold at least `xs.len() + 1` values.
    #[inline]
    pub(crate) fn combine(&self, xs: &[f64], scratch: &mut [f64]) -> f64 {
        match *self {
            Self::Single | Self::NormalizedSingle => xs.iter().product(),
            Self::Total | Self::NormalizedTotal => {
                let mut prod = 1.0;
                let mut sum = 0.0;
                for &x in xs {
                    prod *= 1.0 + x;
                    sum += x;
                }
                prod - 1.0 - sum
            }
            Self::MFold(2) => {
                let (s, sq) = xs.iter().fold((0.0, 0.0), |(s, q), &x| (s + x, q + x * x));
                0.5 * (s * s - sq)
            }
            Self::MFold(m) => elementary_symmetric(xs, m, scratch),
        }
    }
}

impl fmt::Display for MultivarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Single => write!(f, "multivariance"),
            Self::Total => write!(f, "total"),
            Self::MFold(m) => write!(f, "m{m}"),
            Self::NormalizedSingle => write!(f, "normalized-multivariance"),
            Self::NormalizedTotal => write!(f, "normalized-total"),
        }
    }
}

impl FromStr for MultivarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multivariance" | "single" => Ok(Self::Single),
            "total" | "total-multivariance" => Ok(Self::Total),
            "normalized-multivariance" | "normalized-single" => Ok(Self::NormalizedSingle),
            "normalized-total" => Ok(Self::NormalizedTotal),
            _ => s
                .strip_prefix('m')
                .and_then(|m| m.parse().ok())
                .map(Self::MFold)
                .ok_or_else(|| Error::Config(format!("unknown multivariance kind `{s}`"))),
        }
    }
}

/// `e_m(x)` by the standard O(n·m) recurrence.
fn elementary_symmetric(xs: &[f64], m: usize, e: &mut [f64]) -> f64 {
    e[..=m].fill(0.0);
    e[0] = 1.0;
    for (i, &x) in xs.iter().enumerate() {
        for r in (1..=m.min(i + 1)).rev() {
            e[r] += x * e[r - 1];
        }
    }
    e[m]
}

/// A computed multivariance with its scaled form `N·value`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivarianceStatistic {
    pub kind: MultivarianceKind,
    pub value: f64,
    pub scaled: f64,
    /// Margins (0-based) whose normalization constant vanished.
    pub degenerate_margins: Vec<usize>,
}

/// Clamps tiny negatives to 0 and rejects larger ones.
pub(crate) fn check_nonnegative(value: f64) -> Result<f64> {
    if value < -NEGATIVE_TOLERANCE || value.is_nan() {
        return Err(Error::NegativeStatistic { value });
    }
    Ok(value.max(0.0))
}

fn check_sizes(psis: &[CenteredKernelMatrix]) -> Result<usize> {
    let n_obs = psis
        .first()
        .map(CenteredKernelMatrix::size)
        .ok_or_else(|| Error::Config("no margins".into()))?;
    if let Some(p) = psis.iter().find(|p| p.size() != n_obs) {
        return Err(Error::Shape(format!(
            "centered matrices of sizes {n_obs} and {}",
            p.size()
        )));
    }
    Ok(n_obs)
}

/// `(1/N²)·Σ_{j,k} f(Ψ₁(j,k), …)` using symmetry: diagonal plus twice the upper triangle.
///
/// The row-by-row order is fixed, so results are reproducible bit for bit.
pub(crate) fn v_statistic(kind: MultivarianceKind, psis: &[&[f64]], n_obs: usize) -> f64 {
    let n = psis.len();
    let mut xs = vec![0.0; n];
    let mut scratch = vec![0.0; n + 1];
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..n_obs {
        let base = j * n_obs;
        for (x, p) in xs.iter_mut().zip(psis) {
            *x = p[base + j];
        }
        diag += kind.combine(&xs, &mut scratch);
        let mut row = 0.0;
        for k in (j + 1)..n_obs {
            for (x, p) in xs.iter_mut().zip(psis) {
                *x = p[base + k];
            }
            row += kind.combine(&xs, &mut scratch);
        }
        off += row;
    }
    (diag + 2.0 * off) / (n_obs * n_obs) as f64
}

/// Same as [`v_statistic`] with margin `i` read through the row permutation `perms[i]`.
pub(crate) fn v_statistic_permuted(kind: MultivarianceKind, psis: &[&[f64]], perms: &[&[usize]], n_obs: usize) -> f64 {
    let n = psis.len();
    let mut xs = vec![0.0; n];
    let mut scratch = vec![0.0; n + 1];
    let mut rows = vec![0usize; n];
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..n_obs {
        for i in 0..n {
            rows[i] = perms[i][j] * n_obs;
            xs[i] = psis[i][rows[i] + perms[i][j]];
        }
        diag += kind.combine(&xs, &mut scratch);
        let mut row = 0.0;
        for k in (j + 1)..n_obs {
            for i in 0..n {
                xs[i] = psis[i][rows[i] + perms[i][k]];
            }
            row += kind.combine(&xs, &mut scratch);
        }
        off += row;
    }
    (diag + 2.0 * off) / (n_obs * n_obs) as f64
}

fn evaluate(kind: MultivarianceKind, psis: &[CenteredKernelMatrix]) -> Result<f64> {
    let n_obs = check_sizes(psis)?;
    kind.validate(psis.len())?;
    let slices: Vec<&[f64]> = psis.iter().map(CenteredKernelMatrix::as_slice).collect();
    check_nonnegative(v_statistic(kind, &slices, n_obs))
}

/// `ᴺM² = (1/N²)·Σ_{j,k} ∏ᵢ Ψᵢ(j,k)`.
pub fn sample_multivariance_sq(psis: &[CenteredKernelMatrix]) -> Result<f64> {
    evaluate(MultivarianceKind::Single, psis)
}

/// Sum of `ᴺM²` over all subsets of at least two margins, via `∏(1+Ψᵢ) − 1 − ΣΨᵢ`.
pub fn total_multivariance_sq(psis: &[CenteredKernelMatrix]) -> Result<f64> {
    evaluate(MultivarianceKind::Total, psis)
}

/// Sum of `ᴺM²` over all subsets of exactly `m` margins.
pub fn m_multivariance_sq(psis: &[CenteredKernelMatrix], m: usize) -> Result<f64> {
    evaluate(MultivarianceKind::MFold(m), psis)
}

/// A margin's Ψ divided by the grand mean of its ψ-matrix.
#[derive(Debug, Clone)]
pub struct NormalizedKernel {
    pub psi: CenteredKernelMatrix,
    /// The grand mean was zero (constant margin); `psi` is then the zero matrix.
    pub degenerate: bool,
}

/// Divides `psi` by `mᵢ = (1/N²)·Σ A(l,m)`.
pub fn normalize(mut psi: CenteredKernelMatrix, a: ArrayView2<'_, f64>) -> NormalizedKernel {
    let m = grand_mean(a);
    let degenerate = m.is_nan() || m <= 0.0;
    psi.scale(if degenerate { 0.0 } else { 1.0 / m });
    NormalizedKernel { psi, degenerate }
}

/// Centered (and for normalized kinds, normalized) matrices of every margin.
pub(crate) fn margin_kernels(
    ds: &Dataset,
    kind: MultivarianceKind,
    cndf: CndfSpec,
) -> Result<(Vec<CenteredKernelMatrix>, Vec<usize>)> {
    let mut psis = Vec::with_capacity(ds.n_margins());
    let mut degenerate = Vec::new();
    for (i, margin) in ds.margins().into_iter().enumerate() {
        let a = psi_distance_matrix(margin, cndf)?;
        let psi = center(a.view());
        if kind.is_normalized() {
            let nk = normalize(psi, a.view());
            if nk.degenerate {
                degenerate.push(i);
            }
            psis.push(nk.psi);
        } else {
            psis.push(psi);
        }
    }
    Ok((psis, degenerate))
}

/// Classical sample multivariance of `ds` (no distributional transform).
pub fn multivariance(ds: &Dataset, kind: MultivarianceKind, cndf: CndfSpec) -> Result<MultivarianceStatistic> {
    let (psis, degenerate_margins) = margin_kernels(ds, kind, cndf)?;
    let value = evaluate(kind, &psis)?;
    Ok(MultivarianceStatistic {
        kind,
        value,
        scaled: ds.n_obs() as f64 * value,
        degenerate_margins,
    })
}

/// Transform with `draws`, then compute the multivariance of the uniformized sample.
pub fn copula_multivariance(
    ds: &Dataset,
    draws: &UniformDraws,
    kind: MultivarianceKind,
    cndf: CndfSpec,
) -> Result<MultivarianceStatistic> {
    let t = empirical_transform_dataset(ds, draws)?;
    multivariance(t.dataset(), kind, cndf)
}
