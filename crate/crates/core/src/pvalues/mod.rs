//! p-value backends: permutation resampling, cached Monte-Carlo references, a Pearson
//! type-III approximation for uniform margins and gamma moment matching.
//!
//! Every Monte-Carlo p-value uses the add-one estimator `(1 + #{≥ observed})/(count + 1)`.

pub mod pearson;
pub mod reference;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::function::gamma::gamma_ur;

use crate::data::{draw_uniforms, Dataset, RandomStream};
use crate::error::{Error, Result};
use crate::kernels::CndfSpec;
use crate::statistic::{Flags, PreparedStatistic, StatisticKind, StatisticSpec};

pub use pearson::pearson_uniform_pvalue;
pub use reference::{
    build_exact_reference, build_h0_reference, require_univariate, ReferenceDistribution, ReferenceKey,
};

/// Number of permutations used for gamma moments when no reference is supplied.
pub const GAMMA_PERMUTATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Permutation,
    MonteCarloRef,
    PearsonUniform,
    Gamma,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Permutation,
        Method::MonteCarloRef,
        Method::PearsonUniform,
        Method::Gamma,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Method::Permutation => "permutation",
            Method::MonteCarloRef => "montecarlo-ref",
            Method::PearsonUniform => "pearson-uniform",
            Method::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Outcome of one independence test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub statistic: String,
    pub copula: bool,
    pub n: usize,
    pub n_obs: usize,
    pub value: f64,
    pub scaled: f64,
    pub method: Method,
    pub p_value: f64,
    /// Permutations drawn or reference size; 0 for closed-form tails.
    pub resamples: usize,
    pub seed: u64,
    pub flags: Flags,
}

impl fmt::Display for TestReport {
    /// One `key=value` pair per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "statistic={}", self.statistic)?;
        writeln!(f, "copula={}", self.copula)?;
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "N={}", self.n_obs)?;
        writeln!(f, "value={}", self.value)?;
        writeln!(f, "scaled={}", self.scaled)?;
        writeln!(f, "method={}", self.method)?;
        writeln!(f, "p={}", self.p_value)?;
        writeln!(f, "resamples={}", self.resamples)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "flags={}", self.flags)
    }
}

/// Gamma law parametrized by shape `k` and scale `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub shape: f64,
    pub scale: f64,
}

impl GammaFit {
    /// Shape `mean²/var`, scale `var/mean`.
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self> {
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::Config(format!(
                "gamma fit needs a positive variance, got {variance}"
            )));
        }
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::Config(format!("gamma fit needs a positive mean, got {mean}")));
        }
        Ok(Self {
            shape: mean * mean / variance,
            scale: variance / mean,
        })
    }

    pub fn upper_tail(&self, x: f64) -> f64 {
        let z = x / self.scale;
        if z <= 0.0 {
            1.0
        } else if z.is_infinite() {
            f64::MIN_POSITIVE
        } else {
            gamma_ur(self.shape, z).clamp(f64::MIN_POSITIVE, 1.0)
        }
    }
}

/// Upper tail at `scaled` of the gamma law with the given mean and variance.
pub fn gamma_pvalue(scaled: f64, mean: f64, variance: f64) -> Result<f64> {
    Ok(GammaFit::from_moments(mean, variance)?.upper_tail(scaled))
}

/// Monte-Carlo p-value after checking that `reference` was built for `key`.
pub fn pvalue_from_reference(scaled: f64, reference: &ReferenceDistribution, key: &ReferenceKey) -> Result<f64> {
    reference.check_key(key)?;
    Ok(reference.upper_tail(scaled))
}

/// Margin 1 stays fixed; margins 2..n get independent uniform row permutations.
pub fn draw_permutations(n: usize, n_obs: usize, stream: RandomStream) -> Vec<Vec<usize>> {
    let mut rng = stream.rng();
    let identity: Vec<usize> = (0..n_obs).collect();
    (0..n)
        .map(|i| {
            let mut p = identity.clone();
            if i > 0 {
                p.shuffle(&mut rng);
            }
            p
        })
        .collect()
}

/// Scaled statistics of `count` permuted samples; permutation `b` comes from `stream.child(b)`.
pub fn permuted_statistics(prepared: &PreparedStatistic, count: usize, stream: RandomStream) -> Result<Vec<f64>> {
    let (n, n_obs) = (prepared.n_margins(), prepared.n_obs());
    (0..count as u64)
        .into_par_iter()
        .map(|b| prepared.scaled_permuted(&draw_permutations(n, n_obs, stream.child(b))))
        .collect()
}

/// `(1 + #{resampled ≥ observed}) / (B + 1)`.
pub fn permutation_pvalue_prepared(
    prepared: &PreparedStatistic,
    observed: f64,
    resamples: usize,
    stream: RandomStream,
) -> Result<f64> {
    if resamples == 0 {
        return Err(Error::Config("permutation test needs B ≥ 1".into()));
    }
    let stats = permuted_statistics(prepared, resamples, stream)?;
    let exceed = stats.iter().filter(|&&s| s >= observed).count();
    Ok((1 + exceed) as f64 / (resamples + 1) as f64)
}

/// How the p-value of a test is obtained.
#[derive(Debug, Clone, Copy)]
pub enum MethodConfig<'a> {
    Permutation {
        resamples: usize,
    },
    MonteCarloRef {
        reference: &'a ReferenceDistribution,
    },
    PearsonUniform,
    /// Moments from the reference when given, else from [`GAMMA_PERMUTATIONS`] permutations.
    Gamma {
        reference: Option<&'a ReferenceDistribution>,
    },
}

impl MethodConfig<'_> {
    pub fn method(&self) -> Method {
        match self {
            MethodConfig::Permutation { .. } => Method::Permutation,
            MethodConfig::MonteCarloRef { .. } => Method::MonteCarloRef,
            MethodConfig::PearsonUniform => Method::PearsonUniform,
            MethodConfig::Gamma { .. } => Method::Gamma,
        }
    }
}

/// Statistic, transform switch and seed of a test.
#[derive(Debug, Clone, Copy)]
pub struct TestConfig {
    pub spec: StatisticSpec,
    /// Apply the empirical distributional transform first.
    pub copula: bool,
    /// Substream 0 feeds the transform draws, substream 1 the resampling.
    pub seed: u64,
}

impl TestConfig {
    pub fn draws_stream(&self) -> RandomStream {
        RandomStream::with_substream(self.seed, 0)
    }

    pub fn resampling_stream(&self) -> RandomStream {
        RandomStream::with_substream(self.seed, 1)
    }
}

fn require_copula(config: &TestConfig, method: Method) -> Result<()> {
    if config.copula {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{method} relies on uniform margins and needs the distributional transform (--copula)"
        )))
    }
}

/// Prepares the statistic of `ds` under `config`.
pub fn prepare(ds: &Dataset, config: &TestConfig) -> Result<PreparedStatistic> {
    if config.copula {
        let draws = draw_uniforms(ds.n_obs(), ds.n_columns(), config.draws_stream());
        PreparedStatistic::copula(ds, &draws, config.spec)
    } else {
        PreparedStatistic::new(ds, config.spec)
    }
}

/// Computes the statistic of `ds` and its p-value.
pub fn run_test(ds: &Dataset, config: &TestConfig, method: MethodConfig<'_>) -> Result<TestReport> {
    let (n, n_obs) = (ds.n_margins(), ds.n_obs());
    let key = ReferenceKey {
        statistic: config.spec.id(),
        n,
        n_obs,
    };
    match method {
        MethodConfig::MonteCarloRef { reference } => {
            require_copula(config, Method::MonteCarloRef)?;
            require_univariate(ds.grouping())?;
            reference.check_key(&key)?;
        }
        MethodConfig::PearsonUniform => {
            require_copula(config, Method::PearsonUniform)?;
            require_univariate(ds.grouping())?;
            let supported = matches!(config.spec.kind, StatisticKind::Multivariance(k) if k.is_normalized())
                && config.spec.cndf == CndfSpec::Euclidean;
            if !supported {
                return Err(Error::Unsupported(format!(
                    "pearson-uniform covers normalized multivariance with the euclidean kernel, not `{}`; use montecarlo-ref",
                    config.spec
                )));
            }
        }
        MethodConfig::Gamma { reference: Some(r) } => r.check_key(&key)?,
        _ => {}
    }

    let prepared = prepare(ds, config)?;
    let value = prepared.value()?;
    let scaled = n_obs as f64 * value;
    let (p_value, resamples) = match method {
        MethodConfig::Permutation { resamples } => (
            permutation_pvalue_prepared(&prepared, scaled, resamples, config.resampling_stream())?,
            resamples,
        ),
        MethodConfig::MonteCarloRef { reference } => (reference.upper_tail(scaled), reference.count()),
        MethodConfig::PearsonUniform => {
            let StatisticKind::Multivariance(kind) = config.spec.kind else {
                unreachable!("checked above")
            };
            (pearson_uniform_pvalue(scaled, kind, n, n_obs)?, 0)
        }
        MethodConfig::Gamma { reference: Some(r) } => (gamma_pvalue(scaled, r.mean(), r.variance())?, r.count()),
        MethodConfig::Gamma { reference: None } => {
            let batch = permuted_statistics(&prepared, GAMMA_PERMUTATIONS, config.resampling_stream())?;
            let mean = batch.iter().sum::<f64>() / batch.len() as f64;
            let var = batch.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (batch.len() - 1) as f64;
            (gamma_pvalue(scaled, mean, var)?, GAMMA_PERMUTATIONS)
        }
    };
    Ok(TestReport {
        statistic: config.spec.id(),
        copula: config.copula,
        n,
        n_obs,
        value,
        scaled,
        method: method.method(),
        p_value,
        resamples,
        seed: config.seed,
        flags: prepared.flags().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_moment_inversion() {
        for &(k, theta) in &[(0.5, 2.0), (3.0, 0.25), (40.0, 1.7)] {
            let fit = GammaFit::from_moments(k * theta, k * theta * theta).unwrap();
            assert!((fit.shape - k).abs() < 1e-12 * k);
            assert!((fit.scale - theta).abs() < 1e-12 * theta);
        }
    }

    #[test]
    fn gamma_tail_at_mean() {
        for &(mean, var) in &[(1.0, 1.0), (5.0, 2.0), (26.0, 4.5)] {
            let p = gamma_pvalue(mean, mean, var).unwrap();
            assert!(p > 0.3 && p < 0.7, "{p}");
        }
        // shape 1 is the exponential law
        assert!((gamma_pvalue(2.0, 1.0, 1.0).unwrap() - (-2.0f64).exp()).abs() < 1e-12);
        assert!(gamma_pvalue(1.0, 1.0, 0.0).is_err());
        assert_eq!(gamma_pvalue(-1.0, 1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn method_ids() {
        for m in Method::ALL {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
        }
        assert!("bootstrap".parse::<Method>().is_err());
    }

    #[test]
    fn permutations_fix_first_margin() {
        let p = draw_permutations(3, 50, RandomStream::new(4));
        assert_eq!(p[0], (0..50).collect::<Vec<_>>());
        for q in &p[1..] {
            let mut s = q.clone();
            s.sort_unstable();
            assert_eq!(s, (0..50).collect::<Vec<_>>());
        }
        assert_ne!(p[1], p[2]);
    }
}
