//! One entry point for every statistic: parse an id, precompute per-margin matrices once,
//! then evaluate the statistic on the sample or on row-permuted margins.

use std::fmt;
use std::str::FromStr;

use crate::data::Dataset;
use crate::dhsic::{three_term, Gram};
use crate::error::{Error, Result};
use crate::kernels::{CenteredKernelMatrix, CndfSpec};
use crate::multivariance::{check_nonnegative, margin_kernels, v_statistic, v_statistic_permuted, MultivarianceKind};
use crate::transform::{empirical_transform_dataset, UniformDraws};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatisticKind {
    Multivariance(MultivarianceKind),
    Dhsic,
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticKind::Multivariance(k) => write!(f, "{k}"),
            StatisticKind::Dhsic => write!(f, "dhsic"),
        }
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dhsic" => Ok(StatisticKind::Dhsic),
            _ => s.parse().map(StatisticKind::Multivariance),
        }
    }
}

/// Statistic kind plus the ψ used on every margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticSpec {
    pub kind: StatisticKind,
    pub cndf: CndfSpec,
}

impl StatisticSpec {
    pub fn new(kind: StatisticKind, cndf: CndfSpec) -> Result<Self> {
        cndf.validate()?;
        if kind == StatisticKind::Dhsic && !cndf.is_bounded() {
            return Err(Error::Config(format!(
                "dHSIC needs a bounded kernel, `{cndf}` is unbounded"
            )));
        }
        Ok(Self { kind, cndf })
    }

    pub fn multivariance(kind: MultivarianceKind, cndf: CndfSpec) -> Self {
        Self {
            kind: StatisticKind::Multivariance(kind),
            cndf,
        }
    }

    pub fn dhsic(delta: f64) -> Result<Self> {
        Self::new(StatisticKind::Dhsic, CndfSpec::gaussian(delta)?)
    }

    /// Identifier such as `normalized-total/euclidean` or `dhsic/gaussian(3)`.
    pub fn id(&self) -> String {
        format!("{}/{}", self.kind, self.cndf)
    }

    pub fn parse_id(id: &str) -> Result<Self> {
        let (kind, cndf) = id
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("statistic id `{id}` lacks a kernel")))?;
        Self::new(kind.parse()?, cndf.parse()?)
    }

    pub fn validate(&self, n_margins: usize) -> Result<()> {
        match self.kind {
            StatisticKind::Multivariance(k) => k.validate(n_margins),
            StatisticKind::Dhsic if n_margins == 0 => Err(Error::Config("no margins".into())),
            StatisticKind::Dhsic => Ok(()),
        }
    }
}

impl fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Data-quality notes carried into test reports.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Flags {
    /// 0-based margins with a vanishing normalization constant.
    pub degenerate_margins: Vec<usize>,
    /// dHSIC with `N < 2n`.
    pub small_sample: bool,
}

impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.degenerate_margins.is_empty() {
            let list: Vec<String> = self.degenerate_margins.iter().map(|i| (i + 1).to_string()).collect();
            parts.push(format!("degenerate-margin:{}", list.join(";")));
        }
        if self.small_sample {
            parts.push("small-sample".to_string());
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

enum Matrices {
    Multivariance(Vec<CenteredKernelMatrix>),
    Dhsic(Vec<Gram>),
}

/// Per-margin matrices of one sample, ready for repeated evaluation.
///
/// Both families are V-statistics in the per-margin matrices, so permuting the rows of
/// margin `i` only re-indexes its matrix; resampling never recomputes distances.
pub struct PreparedStatistic {
    spec: StatisticSpec,
    n_obs: usize,
    matrices: Matrices,
    flags: Flags,
}

impl PreparedStatistic {
    /// Uses `ds` as given; apply the transform beforehand for the copula version.
    pub fn new(ds: &Dataset, spec: StatisticSpec) -> Result<Self> {
        spec.validate(ds.n_margins())?;
        let n_obs = ds.n_obs();
        let (matrices, flags) = match spec.kind {
            StatisticKind::Multivariance(kind) => {
                let (psis, degenerate_margins) = margin_kernels(ds, kind, spec.cndf)?;
                (
                    Matrices::Multivariance(psis),
                    Flags {
                        degenerate_margins,
                        small_sample: false,
                    },
                )
            }
            StatisticKind::Dhsic => {
                let grams = ds
                    .margins()
                    .into_iter()
                    .map(|m| Gram::new(m, spec.cndf))
                    .collect::<Result<Vec<_>>>()?;
                (
                    Matrices::Dhsic(grams),
                    Flags {
                        degenerate_margins: Vec::new(),
                        small_sample: n_obs < 2 * ds.n_margins(),
                    },
                )
            }
        };
        Ok(Self {
            spec,
            n_obs,
            matrices,
            flags,
        })
    }

    /// Transforms `ds` with `draws` first.
    pub fn copula(ds: &Dataset, draws: &UniformDraws, spec: StatisticSpec) -> Result<Self> {
        let t = empirical_transform_dataset(ds, draws)?;
        Self::new(t.dataset(), spec)
    }

    pub fn spec(&self) -> StatisticSpec {
        self.spec
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_margins(&self) -> usize {
        match &self.matrices {
            Matrices::Multivariance(p) => p.len(),
            Matrices::Dhsic(g) => g.len(),
        }
    }

    pub fn flags(&self) -> &Flags {
        &self.flags
    }

    /// The squared statistic.
    pub fn value(&self) -> Result<f64> {
        let raw = match (&self.matrices, self.spec.kind) {
            (Matrices::Multivariance(psis), StatisticKind::Multivariance(kind)) => {
                let slices: Vec<&[f64]> = psis.iter().map(CenteredKernelMatrix::as_slice).collect();
                v_statistic(kind, &slices, self.n_obs)
            }
            (Matrices::Dhsic(grams), _) => three_term(grams, None),
            _ => unreachable!("matrices match the statistic kind"),
        };
        check_nonnegative(raw)
    }

    /// `N` times the squared statistic.
    pub fn scaled(&self) -> Result<f64> {
        Ok(self.n_obs as f64 * self.value()?)
    }

    /// Scaled statistic with the rows of margin `i` taken in the order `perms[i]`.
    pub fn scaled_permuted(&self, perms: &[Vec<usize>]) -> Result<f64> {
        if perms.len() != self.n_margins() || perms.iter().any(|p| p.len() != self.n_obs) {
            return Err(Error::Shape("one permutation of length N per margin expected".into()));
        }
        let perm_refs: Vec<&[usize]> = perms.iter().map(Vec::as_slice).collect();
        let raw = match (&self.matrices, self.spec.kind) {
            (Matrices::Multivariance(psis), StatisticKind::Multivariance(kind)) => {
                let slices: Vec<&[f64]> = psis.iter().map(CenteredKernelMatrix::as_slice).collect();
                v_statistic_permuted(kind, &slices, &perm_refs, self.n_obs)
            }
            (Matrices::Dhsic(grams), _) => three_term(grams, Some(&perm_refs)),
            _ => unreachable!("matrices match the statistic kind"),
        };
        Ok(self.n_obs as f64 * check_nonnegative(raw)?)
    }
}
