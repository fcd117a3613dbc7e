//! Dependent-data generators, marginal quantile maps, the Bernstein coins and the
//! power-study driver.
//!
//! Copulas are exchangeable with one pairwise Kendall's tau. Normal and Student copulas
//! use an equicorrelated factor model; Clayton, Gumbel and Frank use Marshall–Olkin
//! frailty sampling with gamma, positive-stable and logarithmic-series frailties.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::data::{Dataset, RandomStream, StreamRng};
use crate::error::{Error, Result};
use crate::kernels::CndfSpec;
use crate::multivariance::MultivarianceKind;
use crate::pvalues::{build_h0_reference, run_test, MethodConfig, ReferenceDistribution, TestConfig};
use crate::statistic::StatisticSpec;
use crate::stats::{normal_cdf, student_t_cdf, student_t_quantile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CopulaFamily {
    Independence,
    Clayton,
    Gumbel,
    Frank,
    Normal,
    Student { df: f64 },
}

impl CopulaFamily {
    /// The six families of the standard power table, Student with 1 and 3 degrees of freedom.
    pub fn table_families() -> Vec<CopulaFamily> {
        vec![
            CopulaFamily::Clayton,
            CopulaFamily::Student { df: 1.0 },
            CopulaFamily::Student { df: 3.0 },
            CopulaFamily::Normal,
            CopulaFamily::Frank,
            CopulaFamily::Gumbel,
        ]
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CopulaFamily::Independence => write!(f, "independence"),
            CopulaFamily::Clayton => write!(f, "clayton"),
            CopulaFamily::Gumbel => write!(f, "gumbel"),
            CopulaFamily::Frank => write!(f, "frank"),
            CopulaFamily::Normal => write!(f, "normal"),
            CopulaFamily::Student { df } => write!(f, "student({df})"),
        }
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    /// Accepts the display names; `student` alone means three degrees of freedom.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "independence" => CopulaFamily::Independence,
            "clayton" => CopulaFamily::Clayton,
            "gumbel" => CopulaFamily::Gumbel,
            "frank" => CopulaFamily::Frank,
            "normal" => CopulaFamily::Normal,
            "student" => CopulaFamily::Student { df: 3.0 },
            _ => {
                let df: f64 = s
                    .strip_prefix("student(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| Error::Config(format!("unknown copula family `{s}`")))?;
                if !df.is_finite() || df <= 0.0 {
                    return Err(Error::Config(format!("degrees of freedom must be positive, got {df}")));
                }
                CopulaFamily::Student { df }
            }
        })
    }
}

/// Exchangeable copula of dimension `dim` with pairwise Kendall's tau `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaSpec {
    pub family: CopulaFamily,
    pub tau: f64,
    pub dim: usize,
}

impl CopulaSpec {
    pub fn new(family: CopulaFamily, tau: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("copula dimension must be positive".into()));
        }
        kendall_to_param(family, tau)?;
        Ok(Self { family, tau, dim })
    }

    pub fn param(&self) -> Result<f64> {
        kendall_to_param(self.family, self.tau)
    }
}

/// First Debye function `D₁(θ) = (1/θ)·∫₀^θ t/(eᵗ − 1) dt`.
pub fn debye1(theta: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    let f = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    adaptive_simpson(&f, 0.0, theta, 1e-13, 50) / theta
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, depth)
}

/// Kendall's tau of the Frank copula, `1 − (4/θ)(1 − D₁(θ))`.
pub fn frank_tau(theta: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    1.0 - 4.0 / theta * (1.0 - debye1(theta))
}

fn frank_param(tau: f64) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while frank_tau(hi) < tau {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frank_tau(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Family parameter with pairwise Kendall's tau `tau`: θ for Archimedean families, the
/// correlation ρ for elliptical ones, 0 for independence.
pub fn kendall_to_param(family: CopulaFamily, tau: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Domain {
            value: tau,
            domain: "[0,1)",
        });
    }
    Ok(match family {
        CopulaFamily::Independence if tau == 0.0 => 0.0,
        CopulaFamily::Independence => {
            return Err(Error::Config(format!("the independence copula has tau 0, not {tau}")))
        }
        CopulaFamily::Clayton => 2.0 * tau / (1.0 - tau),
        CopulaFamily::Gumbel => 1.0 / (1.0 - tau),
        CopulaFamily::Frank => frank_param(tau),
        CopulaFamily::Normal | CopulaFamily::Student { .. } => (PI * tau / 2.0).sin(),
    })
}

/// Keeps simulated uniforms strictly inside (0,1).
fn open_unit(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Logarithmic-series variate with `P(V = k) = −pᵏ/(k·ln(1−p))` (Kemp's LK algorithm).
/// `ln_q` is `ln(1 − p)`.
fn logarithmic(p: f64, ln_q: f64, rng: &mut impl Rng) -> f64 {
    let u2: f64 = rng.random();
    if u2 > p {
        return 1.0;
    }
    let u1: f64 = rng.random();
    let q = -(u1 * ln_q).exp_m1();
    if u2 < q * q {
        (1.0 + u2.ln() / q.ln()).floor().max(1.0)
    } else if u2 > q {
        1.0
    } else {
        2.0
    }
}

/// Positive stable variate with Laplace transform `exp(−s^α)`, `0 < α ≤ 1` (Kanter).
fn positive_stable(alpha: f64, rng: &mut impl Rng) -> f64 {
    if alpha == 1.0 {
        return 1.0;
    }
    let theta = PI * rng.random::<f64>();
    let w: f64 = Exp1.sample(rng);
    let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * theta).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// `N × dim` sample of the copula.
pub fn sample_copula(spec: CopulaSpec, n_obs: usize, stream: RandomStream) -> Result<Array2<f64>> {
    let mut rng = stream.rng();
    sample_copula_with(spec, n_obs, &mut rng)
}

pub(crate) fn sample_copula_with(spec: CopulaSpec, n_obs: usize, rng: &mut StreamRng) -> Result<Array2<f64>> {
    let param = spec.param()?;
    let d = spec.dim;
    let mut out = Array2::zeros((n_obs, d));
    let independent = param == 0.0 && !matches!(spec.family, CopulaFamily::Gumbel);
    for mut row in out.rows_mut() {
        if independent || matches!(spec.family, CopulaFamily::Independence) {
            row.iter_mut().for_each(|u| *u = open_unit(rng.random()));
            continue;
        }
        match spec.family {
            CopulaFamily::Normal | CopulaFamily::Student { .. } => {
                let common: f64 = StandardNormal.sample(rng);
                let (a, b) = (param.sqrt(), (1.0 - param).sqrt());
                let mix = match spec.family {
                    CopulaFamily::Student { df } => {
                        let s: f64 = ChiSquared::new(df)
                            .map_err(|e| Error::Config(e.to_string()))?
                            .sample(rng);
                        Some((df, (s / df).sqrt()))
                    }
                    _ => None,
                };
                for u in row.iter_mut() {
                    let eps: f64 = StandardNormal.sample(rng);
                    let z = a * common + b * eps;
                    *u = open_unit(match mix {
                        Some((df, w)) => student_t_cdf(z / w, df),
                        None => normal_cdf(z),
                    });
                }
            }
            CopulaFamily::Clayton => {
                let v: f64 = Gamma::new(1.0 / param, 1.0)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(rng);
                for u in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *u = open_unit((e / v).ln_1p().mul_add(-1.0 / param, 0.0).exp());
                }
            }
            CopulaFamily::Gumbel => {
                let alpha = 1.0 / param;
                let v = positive_stable(alpha, rng);
                for u in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *u = open_unit((-(e / v).powf(alpha)).exp());
                }
            }
            CopulaFamily::Frank => {
                let p = -(-param).exp_m1();
                let v = logarithmic(p, -param, rng);
                for u in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *u = open_unit(-(-p * (-e / v).exp()).ln_1p() / param);
                }
            }
            CopulaFamily::Independence => unreachable!(),
        }
    }
    Ok(out)
}

/// Marginal laws applied to copula samples through their quantile functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarginalKind {
    /// Uniform.
    U,
    /// Poisson with mean 1.
    P1,
    /// Poisson with mean 20.
    P20,
    /// Rounded Pareto with survival `1/(k+1)^{1/3}` on k = 0, 1, ….
    RP,
    /// Standard Cauchy.
    CA,
    /// 0.95·t₃ + 0.05·δ₀.
    SA,
    /// Bernoulli(1/2).
    B,
}

impl MarginalKind {
    pub const ALL: [MarginalKind; 7] = [
        MarginalKind::U,
        MarginalKind::P1,
        MarginalKind::P20,
        MarginalKind::RP,
        MarginalKind::CA,
        MarginalKind::SA,
        MarginalKind::B,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MarginalKind::U => "U",
            MarginalKind::P1 => "P1",
            MarginalKind::P20 => "P20",
            MarginalKind::RP => "RP",
            MarginalKind::CA => "CA",
            MarginalKind::SA => "SA",
            MarginalKind::B => "B",
        }
    }
}

impl fmt::Display for MarginalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MarginalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MarginalKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown marginal `{s}`")))
    }
}

/// Smallest `k` with Poisson(λ) distribution function at least `u`.
fn poisson_quantile(lambda: f64, u: f64) -> f64 {
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    let mut k = 0.0;
    while cdf < u {
        k += 1.0;
        pmf *= lambda / k;
        // past the mode the remaining mass has underflowed
        if pmf == 0.0 && k > lambda {
            break;
        }
        cdf += pmf;
    }
    k
}

/// Quantile function of the marginal law at `u`.
pub fn marginal_quantile(kind: MarginalKind, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain {
            value: u,
            domain: "[0,1]",
        });
    }
    Ok(match kind {
        MarginalKind::U => u,
        MarginalKind::P1 => poisson_quantile(1.0, u),
        MarginalKind::P20 => poisson_quantile(20.0, u),
        MarginalKind::RP => {
            if u >= 1.0 {
                f64::INFINITY
            } else {
                (1.0 - u).powi(-3).ceil() - 1.0
            }
        }
        MarginalKind::CA => (PI * (u - 0.5)).tan(),
        MarginalKind::SA => {
            // F(x) = 0.95·F_t₃(x) + 0.05·1{x ≥ 0}; the atom covers (0.475, 0.525]
            if u <= 0.475 {
                student_t_quantile(u / 0.95, 3.0)
            } else if u <= 0.525 {
                0.0
            } else {
                student_t_quantile((u - 0.05) / 0.95, 3.0)
            }
        }
        MarginalKind::B => {
            if u >= 0.5 {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Copula sample pushed through `marginal` in every column.
pub fn simulate_dataset(
    spec: CopulaSpec,
    marginal: MarginalKind,
    n_obs: usize,
    rng: &mut StreamRng,
) -> Result<Dataset> {
    let mut u = sample_copula_with(spec, n_obs, rng)?;
    for v in u.iter_mut() {
        *v = marginal_quantile(marginal, *v)?;
    }
    Dataset::new(u, vec![1; spec.dim])
}

/// Three pairwise independent but jointly dependent columns: `X₁, X₂ ~ Bernoulli(1/2)`
/// and `X₃ = 1{X₁ = X₂}`, each optionally perturbed by independent `N(0, sd²)` noise.
pub fn bernstein_coins(n_obs: usize, perturb_sd: f64, stream: RandomStream) -> Result<Dataset> {
    let mut rng = stream.rng();
    bernstein_coins_with(n_obs, perturb_sd, &mut rng)
}

pub(crate) fn bernstein_coins_with(n_obs: usize, perturb_sd: f64, rng: &mut StreamRng) -> Result<Dataset> {
    if !perturb_sd.is_finite() || perturb_sd < 0.0 {
        return Err(Error::Config(format!(
            "perturbation sd must be nonnegative, got {perturb_sd}"
        )));
    }
    let mut values = Array2::zeros((n_obs, 3));
    for mut row in values.rows_mut() {
        let x1 = f64::from(u8::from(rng.random_bool(0.5)));
        let x2 = f64::from(u8::from(rng.random_bool(0.5)));
        row[0] = x1;
        row[1] = x2;
        row[2] = f64::from(u8::from(x1 == x2));
        if perturb_sd > 0.0 {
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += perturb_sd * z;
            }
        }
    }
    Dataset::new(values, vec![1; 3])
}

/// Counts of `(u[,i], u[,j])` pairs on a `bins × bins` grid over the unit square.
pub fn bin_counts(u: ArrayView2<'_, f64>, i: usize, j: usize, bins: usize) -> Array2<u64> {
    let mut grid = Array2::zeros((bins, bins));
    let cell = |v: f64| ((v * bins as f64).floor() as usize).min(bins - 1);
    for row in u.rows() {
        grid[[cell(row[i]), cell(row[j])]] += 1;
    }
    grid
}

/// Writes a bin grid as `x_bin,y_bin,count` rows with bin midpoints.
pub fn write_bin_counts(out: &mut impl Write, grid: &Array2<u64>) -> std::io::Result<()> {
    let bins = grid.nrows() as f64;
    writeln!(out, "x,y,count")?;
    for ((a, b), c) in grid.indexed_iter() {
        writeln!(out, "{},{},{c}", (a as f64 + 0.5) / bins, (b as f64 + 0.5) / bins)?;
    }
    Ok(())
}

/// A column of the power table: a labelled statistic with its p-value method.
#[derive(Debug, Clone)]
pub struct PowerColumn {
    pub label: String,
    pub spec: StatisticSpec,
    pub copula: bool,
    pub method: PowerMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerMethod {
    Permutation {
        resamples: usize,
    },
    /// Approximate reference of the given size, built once per statistic.
    MonteCarloRef {
        count: usize,
    },
    PearsonUniform,
}

impl fmt::Display for PowerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerMethod::Permutation { resamples } => write!(f, "permutation(B={resamples})"),
            PowerMethod::MonteCarloRef { count } => write!(f, "montecarlo-ref(count={count})"),
            PowerMethod::PearsonUniform => write!(f, "pearson-uniform"),
        }
    }
}

impl PowerColumn {
    /// Copula multivariance (normalized total, ψ = |·|) with the Pearson tail.
    pub fn multivariance_pearson() -> Self {
        Self {
            label: "M_cop".into(),
            spec: StatisticSpec::multivariance(MultivarianceKind::NormalizedTotal, CndfSpec::Euclidean),
            copula: true,
            method: PowerMethod::PearsonUniform,
        }
    }

    /// Copula dHSIC with bandwidth δ and an approximate reference.
    pub fn dhsic_reference(delta: f64, count: usize) -> Result<Self> {
        Ok(Self {
            label: "dHSIC_cop".into(),
            spec: StatisticSpec::dhsic(delta)?,
            copula: true,
            method: PowerMethod::MonteCarloRef { count },
        })
    }
}

/// Grid of a power study; rows are copula × tau × marginal, columns statistics.
#[derive(Debug, Clone)]
pub struct PowerConfig {
    pub families: Vec<CopulaFamily>,
    pub taus: Vec<f64>,
    pub marginals: Vec<MarginalKind>,
    pub columns: Vec<PowerColumn>,
    pub n: usize,
    pub n_obs: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub family: CopulaFamily,
    pub tau: f64,
    pub marginal: MarginalKind,
    /// Rejection rate in percent, one entry per column.
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub columns: Vec<String>,
    pub rows: Vec<PowerRow>,
    pub n: usize,
    pub n_obs: usize,
    pub reps: usize,
    pub alpha: f64,
}

impl PowerTable {
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "copula,tau,marginal")?;
        for c in &self.columns {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(out, "{},{},{}", r.family, r.tau, r.marginal)?;
            for p in &r.power {
                write!(out, ",{p:.1}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Human-readable table, power in percent.
    pub fn write_aligned(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "power in % (n={}, N={}, reps={}, alpha={})",
            self.n, self.n_obs, self.reps, self.alpha
        )?;
        let widths: Vec<usize> = self.columns.iter().map(|c| c.len().max(6)).collect();
        write!(out, "{:<14}{:>6}  {:<8}", "copula", "tau", "marginal")?;
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(out, "  {c:>w$}")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(
                out,
                "{:<14}{:>6}  {:<8}",
                r.family.to_string(),
                r.tau,
                r.marginal.name()
            )?;
            for (p, w) in r.power.iter().zip(&widths) {
                write!(out, "  {p:>w$.1}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Stream of a table cell; every statistic in a row sees the same datasets.
pub fn cell_stream(
    master: RandomStream,
    family: CopulaFamily,
    tau: f64,
    marginal: MarginalKind,
    n: usize,
    n_obs: usize,
) -> RandomStream {
    master.keyed(&format!("{family}|{tau}|{marginal}|n={n}|N={n_obs}"))
}

/// Runs every cell of `config`. References are built once per column and shared across
/// rows; `reference_cache` may supply them pre-built, keyed by statistic id.
pub fn power_study(
    config: &PowerConfig,
    reference_cache: &HashMap<String, ReferenceDistribution>,
) -> Result<PowerTable> {
    let master = RandomStream::new(config.seed);
    let mut references: Vec<Option<ReferenceDistribution>> = Vec::new();
    for (c, col) in config.columns.iter().enumerate() {
        references.push(match col.method {
            PowerMethod::MonteCarloRef { count } => Some(match reference_cache.get(&col.spec.id()) {
                Some(r) => r.clone(),
                None => build_h0_reference(
                    col.spec,
                    &vec![1; config.n],
                    config.n_obs,
                    count,
                    master.keyed(&format!("reference|{c}")),
                )?,
            }),
            _ => None,
        });
    }

    let mut rows = Vec::new();
    for &family in &config.families {
        for &tau in &config.taus {
            if family == CopulaFamily::Independence && tau != 0.0 {
                continue;
            }
            let spec = CopulaSpec::new(family, tau, config.n)?;
            for &marginal in &config.marginals {
                let cell = cell_stream(master, family, tau, marginal, config.n, config.n_obs);
                let rejections = (0..config.reps as u64)
                    .into_par_iter()
                    .map(|r| {
                        let rep = cell.child(r);
                        let mut rng = rep.rng();
                        let ds = simulate_dataset(spec, marginal, config.n_obs, &mut rng)?;
                        let mut hits = vec![0usize; config.columns.len()];
                        for (c, col) in config.columns.iter().enumerate() {
                            let test = TestConfig {
                                spec: col.spec,
                                copula: col.copula,
                                seed: rep.child(1).seed,
                            };
                            let method = match (col.method, &references[c]) {
                                (PowerMethod::Permutation { resamples }, _) => MethodConfig::Permutation { resamples },
                                (PowerMethod::MonteCarloRef { .. }, Some(reference)) => {
                                    MethodConfig::MonteCarloRef { reference }
                                }
                                (PowerMethod::PearsonUniform, _) => MethodConfig::PearsonUniform,
                                (PowerMethod::MonteCarloRef { .. }, None) => unreachable!("built above"),
                            };
                            let report = run_test(&ds, &test, method)?;
                            if report.p_value <= config.alpha {
                                hits[c] += 1;
                            }
                        }
                        Ok(hits)
                    })
                    .try_reduce(
                        || vec![0usize; config.columns.len()],
                        |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
                    )?;
                rows.push(PowerRow {
                    family,
                    tau,
                    marginal,
                    power: rejections
                        .iter()
                        .map(|&h| 100.0 * h as f64 / config.reps as f64)
                        .collect(),
                });
            }
        }
    }
    Ok(PowerTable {
        columns: config.columns.iter().map(|c| c.label.clone()).collect(),
        rows,
        n: config.n,
        n_obs: config.n_obs,
        reps: config.reps,
        alpha: config.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_parameters() {
        assert!((kendall_to_param(CopulaFamily::Clayton, 0.1).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!((kendall_to_param(CopulaFamily::Normal, 0.1).unwrap() - 0.156_434_465_040_230_9).abs() < 1e-15);
        assert!((kendall_to_param(CopulaFamily::Gumbel, 0.1).unwrap() - 1.0 / 0.9).abs() < 1e-15);
        assert_eq!(kendall_to_param(CopulaFamily::Clayton, 0.0).unwrap(), 0.0);
        assert_eq!(kendall_to_param(CopulaFamily::Gumbel, 0.0).unwrap(), 1.0);
        assert_eq!(kendall_to_param(CopulaFamily::Frank, 0.0).unwrap(), 0.0);
        assert_eq!(kendall_to_param(CopulaFamily::Normal, 0.0).unwrap(), 0.0);
        assert!(kendall_to_param(CopulaFamily::Clayton, 1.0).is_err());
        assert!(kendall_to_param(CopulaFamily::Independence, 0.1).is_err());
    }

    #[test]
    fn frank_parameter_solves_tau() {
        for tau in [0.05, 0.1, 0.2, 0.5, 0.8] {
            let theta = kendall_to_param(CopulaFamily::Frank, tau).unwrap();
            assert!((frank_tau(theta) - tau).abs() <= 1e-10, "{tau}");
        }
    }

    #[test]
    fn debye_values() {
        // D₁(1) = 0.777504634112248...
        assert!((debye1(1.0) - 0.777_504_634_112_248_3).abs() < 1e-12);
        assert_eq!(debye1(0.0), 1.0);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(marginal_quantile(MarginalKind::RP, 0.0).unwrap(), 0.0);
        assert_eq!(marginal_quantile(MarginalKind::RP, 7.0 / 8.0).unwrap(), 511.0);
        assert_eq!(marginal_quantile(MarginalKind::CA, 0.5).unwrap(), 0.0);
        assert_eq!(marginal_quantile(MarginalKind::B, 0.5).unwrap(), 1.0);
        assert_eq!(marginal_quantile(MarginalKind::B, 0.49).unwrap(), 0.0);
        assert_eq!(marginal_quantile(MarginalKind::SA, 0.5).unwrap(), 0.0);
        assert_eq!(marginal_quantile(MarginalKind::SA, 0.475).unwrap(), 0.0);
        assert!(marginal_quantile(MarginalKind::SA, 0.53).unwrap() > 0.0);
        // Poisson(1): cdf(0) = e⁻¹ ≈ 0.3679, cdf(1) ≈ 0.7358
        assert_eq!(marginal_quantile(MarginalKind::P1, 0.3).unwrap(), 0.0);
        assert_eq!(marginal_quantile(MarginalKind::P1, 0.5).unwrap(), 1.0);
        assert_eq!(marginal_quantile(MarginalKind::P1, 0.0).unwrap(), 0.0);
        assert_eq!(marginal_quantile(MarginalKind::P20, 0.5).unwrap(), 20.0);
        assert!(marginal_quantile(MarginalKind::U, 1.5).is_err());
    }

    #[test]
    fn logarithmic_series_mean() {
        // E V = −p/((1−p)·ln(1−p))
        let theta: f64 = 2.0;
        let p = -(-theta).exp_m1();
        let mut rng = RandomStream::new(5).rng();
        let n = 200_000;
        let mean = (0..n).map(|_| logarithmic(p, -theta, &mut rng)).sum::<f64>() / n as f64;
        let expected = -p / ((1.0 - p) * (1.0 - p).ln());
        assert!((mean - expected).abs() < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn positive_stable_laplace_transform() {
        // E exp(−V) = exp(−1) for every α
        let mut rng = RandomStream::new(6).rng();
        let n = 200_000;
        let m = (0..n).map(|_| (-positive_stable(0.6, &mut rng)).exp()).sum::<f64>() / n as f64;
        assert!((m - (-1.0f64).exp()).abs() < 0.005, "{m}");
    }

    #[test]
    fn family_names_round_trip() {
        for f in [
            CopulaFamily::Independence,
            CopulaFamily::Clayton,
            CopulaFamily::Gumbel,
            CopulaFamily::Frank,
            CopulaFamily::Normal,
            CopulaFamily::Student { df: 1.0 },
        ] {
            assert_eq!(f.to_string().parse::<CopulaFamily>().unwrap(), f);
        }
        assert_eq!(
            "student".parse::<CopulaFamily>().unwrap(),
            CopulaFamily::Student { df: 3.0 }
        );
        assert!("student(0)".parse::<CopulaFamily>().is_err());
        for m in MarginalKind::ALL {
            assert_eq!(m.name().parse::<MarginalKind>().unwrap(), m);
        }
    }

    #[test]
    fn bin_grid_counts_everything() {
        let u = sample_copula(
            CopulaSpec::new(CopulaFamily::Clayton, 0.5, 2).unwrap(),
            1000,
            RandomStream::new(2),
        )
        .unwrap();
        let g = bin_counts(u.view(), 0, 1, 5);
        assert_eq!(g.sum(), 1000);
        // lower-tail dependence: the lower-left cell beats the upper-right one
        assert!(g[[0, 0]] > g[[4, 4]]);
    }
}
