//! Continuous negative definite functions ψ, ψ-distance matrices and double centering.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Default Gaussian bandwidth δ.
pub const DEFAULT_DELTA: f64 = 3.0;

/// Bandwidths of the dHSIC sweep.
pub const DELTA_SWEEP: [f64; 9] = [0.1, 0.2, 0.5, 0.75, 1.0, 2.0, 3.0, 4.0, 5.0];

/// Which continuous negative definite function a margin uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CndfSpec {
    /// ψ(x) = |x|, the Euclidean norm over the margin's coordinates.
    Euclidean,
    /// ψ(x) = 1 − exp(−|x|²/(2δ²)); the bounded kernel is ψ̄ = 1 − ψ.
    Gaussian { delta: f64 },
}

impl CndfSpec {
    pub fn gaussian(delta: f64) -> Result<Self> {
        let spec = CndfSpec::Gaussian { delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CndfSpec::Euclidean => Ok(()),
            CndfSpec::Gaussian { delta } if delta > 0.0 && delta.is_finite() => Ok(()),
            CndfSpec::Gaussian { delta } => Err(Error::Config(format!(
                "gaussian bandwidth must be positive, got {delta}"
            ))),
        }
    }

    /// ψ evaluated at a squared distance.
    #[inline]
    pub fn psi_from_sq(&self, sq: f64) -> f64 {
        match *self {
            CndfSpec::Euclidean => sq.sqrt(),
            CndfSpec::Gaussian { delta } => -(-sq / (2.0 * delta * delta)).exp_m1(),
        }
    }

    /// ψ̄ = 1 − ψ at a squared distance; only meaningful for bounded kinds.
    #[inline]
    pub fn kernel_from_sq(&self, sq: f64) -> f64 {
        match *self {
            CndfSpec::Euclidean => 1.0 - sq.sqrt(),
            CndfSpec::Gaussian { delta } => (-sq / (2.0 * delta * delta)).exp(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, CndfSpec::Gaussian { .. })
    }
}

impl fmt::Display for CndfSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CndfSpec::Euclidean => write!(f, "euclidean"),
            CndfSpec::Gaussian { delta } => write!(f, "gaussian({delta})"),
        }
    }
}

impl FromStr for CndfSpec {
    type Err = Error;

    /// Accepts `euclidean`, `gaussian` (δ = 3) and `gaussian(δ)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "euclidean" => Ok(CndfSpec::Euclidean),
            "gaussian" => CndfSpec::gaussian(DEFAULT_DELTA),
            _ => {
                let inner = s
                    .strip_prefix("gaussian(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Config(format!("unknown kernel `{s}`")))?;
                let delta = inner
                    .parse()
                    .map_err(|_| Error::Config(format!("bad bandwidth `{inner}`")))?;
                CndfSpec::gaussian(delta)
            }
        }
    }
}

/// Squared Euclidean distances between all rows of `margin`.
fn pairwise_sq(margin: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = margin.nrows();
    let mut out = Array2::zeros((n, n));
    if margin.ncols() == 1 {
        let x: Vec<f64> = margin.column(0).to_vec();
        for j in 0..n {
            for k in (j + 1)..n {
                let d = x[j] - x[k];
                out[[j, k]] = d * d;
                out[[k, j]] = d * d;
            }
        }
    } else {
        for j in 0..n {
            for k in (j + 1)..n {
                let sq: f64 = margin
                    .row(j)
                    .iter()
                    .zip(margin.row(k).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                out[[j, k]] = sq;
                out[[k, j]] = sq;
            }
        }
    }
    out
}

/// `A(j,k) = ψ(x⁽ʲ⁾ − x⁽ᵏ⁾)` for one margin.
pub fn psi_distance_matrix(margin: ArrayView2<'_, f64>, spec: CndfSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    if margin.ncols() == 1 && spec == CndfSpec::Euclidean {
        // |x − y| directly, so sign-symmetric inputs give exactly symmetric output
        let x: Vec<f64> = margin.column(0).to_vec();
        let n = x.len();
        let flat: Vec<f64> = x.iter().flat_map(|&a| x.iter().map(move |&b| (a - b).abs())).collect();
        return Ok(Array2::from_shape_vec((n, n), flat).expect("n × n entries"));
    }
    Ok(pairwise_sq(margin).mapv_into(|sq| spec.psi_from_sq(sq)))
}

/// `ψ̄(x⁽ʲ⁾ − x⁽ᵏ⁾) = 1 − ψ(…)` for a bounded kind.
pub fn kernel_matrix(margin: ArrayView2<'_, f64>, spec: CndfSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    if !spec.is_bounded() {
        return Err(Error::Config(format!("kernel `{spec}` is unbounded")));
    }
    Ok(pairwise_sq(margin).mapv_into(|sq| spec.kernel_from_sq(sq)))
}

/// Bandwidth `sqrt(median(|x⁽ʲ⁾ − x⁽ᵏ⁾|², j<k) / 2)`.
///
/// Known to pick bandwidths around 0.2 on uniform margins, where it performs poorly.
pub fn median_heuristic_bandwidth(margin: ArrayView2<'_, f64>) -> Result<f64> {
    let n = margin.nrows();
    let sq = pairwise_sq(margin);
    let mut upper: Vec<f64> = (0..n)
        .flat_map(|j| ((j + 1)..n).map(move |k| (j, k)))
        .map(|(j, k)| sq[[j, k]])
        .collect();
    if upper.is_empty() {
        return Err(Error::Shape("median heuristic needs at least two observations".into()));
    }
    upper.sort_unstable_by(f64::total_cmp);
    let m = upper.len();
    let median = if m % 2 == 1 {
        upper[m / 2]
    } else {
        0.5 * (upper[m / 2 - 1] + upper[m / 2])
    };
    if median <= 0.0 {
        return Err(Error::Config("median distance is zero".into()));
    }
    Ok((median / 2.0).sqrt())
}

/// Doubly-centered `N × N` matrix `Ψ`; symmetric with zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredKernelMatrix {
    entries: Array2<f64>,
}

impl CenteredKernelMatrix {
    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.entries.as_slice().expect("standard layout")
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.entries.mapv_inplace(|x| x * factor);
    }

    /// Wraps a matrix that is already centered.
    pub fn from_entries(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Shape(format!("{:?} is not square", entries.dim())));
        }
        Ok(Self {
            entries: entries.as_standard_layout().into_owned(),
        })
    }
}

/// Running sum with an error term, updated by Knuth's branch-free TwoSum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    err: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        let bp = t - self.sum;
        self.err += (self.sum - (t - bp)) + (v - bp);
        self.sum = t;
    }

    #[inline]
    fn value(self) -> f64 {
        self.sum + self.err
    }
}

/// Compensated sum, accurate to about one rounding of the exact result.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Compensated::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Mean of all entries.
pub fn grand_mean(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    compensated_sum(a.rows().into_iter().map(|r| compensated_sum(r.iter().copied()))) / n as f64
}

/// `Ψ(j,k) = −A(j,k) − mean(A) + mean(A[·,k]) + mean(A[j,·])`.
pub fn center(a: ArrayView2<'_, f64>) -> CenteredKernelMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "ψ-matrix must be square");
    if n == 0 {
        return CenteredKernelMatrix {
            entries: Array2::zeros((0, 0)),
        };
    }
    let a = a.as_standard_layout();
    let flat = a.as_slice().expect("standard layout");
    let nf = n as f64;
    let mut row_sums = Vec::with_capacity(n);
    let mut cols = vec![Compensated::default(); n];
    for row in flat.chunks_exact(n) {
        let mut acc = Compensated::default();
        for (c, &v) in cols.iter_mut().zip(row) {
            acc.add(v);
            c.add(v);
        }
        row_sums.push(acc.value());
    }
    let grand = compensated_sum(row_sums.iter().copied()) / (nf * nf);
    let col_means: Vec<f64> = cols.iter().map(|c| c.value() / nf).collect();
    let mut entries = Vec::with_capacity(n * n);
    for (row, s) in flat.chunks_exact(n).zip(&row_sums) {
        let shift = s / nf - grand;
        entries.extend(row.iter().zip(&col_means).map(|(&v, &m)| shift + (m - v)));
    }
    CenteredKernelMatrix {
        entries: Array2::from_shape_vec((n, n), entries).expect("n × n entries"),
    }
}
