//! Sample dHSIC and its copula version.
//!
//! With per-margin Gram matrices `Kᵢ(j,k) = ψ̄ᵢ(xᵢ⁽ʲ⁾ − xᵢ⁽ᵏ⁾)`, row means `rᵢ` and grand
//! means `gᵢ`:
//!
//! `ᴺdHSIC = (1/N²)·Σ_{j,k} ∏ᵢ Kᵢ(j,k) + ∏ᵢ gᵢ − (2/N)·Σⱼ ∏ᵢ rᵢ(j)`.

use ndarray::{Array2, ArrayView2};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{compensated_sum, kernel_matrix, CndfSpec};
use crate::multivariance::check_nonnegative;
use crate::transform::{empirical_transform_dataset, UniformDraws};

#[derive(Debug, Clone, PartialEq)]
pub struct DhsicStatistic {
    pub value: f64,
    pub scaled: f64,
    pub kernels: Vec<CndfSpec>,
    /// `N < 2n`: the estimator is defined but its small-sample behaviour is unstudied.
    pub small_sample: bool,
}

/// Gram matrix of one margin with its row means and grand mean.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    pub(crate) k: Array2<f64>,
    pub(crate) row_means: Vec<f64>,
    pub(crate) grand_mean: f64,
}

impl Gram {
    pub(crate) fn new(margin: ArrayView2<'_, f64>, spec: CndfSpec) -> Result<Self> {
        if !spec.is_bounded() {
            return Err(Error::Config(format!(
                "dHSIC needs a bounded kernel, `{spec}` is unbounded"
            )));
        }
        let k = kernel_matrix(margin, spec)?;
        let n = k.nrows() as f64;
        let row_means: Vec<f64> = k
            .rows()
            .into_iter()
            .map(|r| compensated_sum(r.iter().copied()) / n)
            .collect();
        let grand_mean = compensated_sum(row_means.iter().copied()) / n;
        Ok(Self {
            k,
            row_means,
            grand_mean,
        })
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.k.as_slice().expect("standard layout")
    }
}

/// Evaluates the three-term form; margin `i` is read through `perms[i]` when given.
pub(crate) fn three_term(grams: &[Gram], perms: Option<&[&[usize]]>) -> f64 {
    let n_obs = grams[0].row_means.len();
    let nf = n_obs as f64;
    let idx = |i: usize, j: usize| perms.map_or(j, |p| p[i][j]);
    let slices: Vec<&[f64]> = grams.iter().map(Gram::as_slice).collect();

    let mut rows = vec![0usize; grams.len()];
    let mut diag = 0.0;
    let mut off = 0.0;
    let mut cross = 0.0;
    for j in 0..n_obs {
        let mut d = 1.0;
        let mut r = 1.0;
        for (i, g) in grams.iter().enumerate() {
            let pj = idx(i, j);
            rows[i] = pj * n_obs;
            d *= slices[i][rows[i] + pj];
            r *= g.row_means[pj];
        }
        diag += d;
        cross += r;
        let mut row = 0.0;
        for k in (j + 1)..n_obs {
            let mut p = 1.0;
            for i in 0..grams.len() {
                p *= slices[i][rows[i] + idx(i, k)];
            }
            row += p;
        }
        off += row;
    }
    let term1 = (diag + 2.0 * off) / (nf * nf);
    let term2: f64 = grams.iter().map(|g| g.grand_mean).product();
    let term3 = 2.0 * cross / nf;
    term1 + term2 - term3
}

fn check_margins(margins: &[ArrayView2<'_, f64>], kernels: &[CndfSpec]) -> Result<usize> {
    if margins.is_empty() {
        return Err(Error::Config("no margins".into()));
    }
    if margins.len() != kernels.len() {
        return Err(Error::Config(format!(
            "{} kernels for {} margins",
            kernels.len(),
            margins.len()
        )));
    }
    let n_obs = margins[0].nrows();
    if margins.iter().any(|m| m.nrows() != n_obs) {
        return Err(Error::Shape("margins differ in length".into()));
    }
    Ok(n_obs)
}

/// Sample dHSIC of the given margins.
pub fn dhsic_estimate(margins: &[ArrayView2<'_, f64>], kernels: &[CndfSpec]) -> Result<DhsicStatistic> {
    let n_obs = check_margins(margins, kernels)?;
    let grams = margins
        .iter()
        .zip(kernels)
        .map(|(m, &k)| Gram::new(*m, k))
        .collect::<Result<Vec<_>>>()?;
    let value = check_nonnegative(three_term(&grams, None))?;
    Ok(DhsicStatistic {
        value,
        scaled: n_obs as f64 * value,
        kernels: kernels.to_vec(),
        small_sample: n_obs < 2 * margins.len(),
    })
}

/// Transform with `draws`, then dHSIC of the uniformized sample.
pub fn dhsic_cop(ds: &Dataset, draws: &UniformDraws, kernels: &[CndfSpec]) -> Result<DhsicStatistic> {
    let t = empirical_transform_dataset(ds, draws)?;
    dhsic_estimate(&t.dataset().margins(), kernels)
}
