//! Command-line surface of copdep: transform datasets, run independence tests, build
//! null references, run power studies and time the p-value methods.
//!
//! Output is line-oriented `key=value` text. Exit codes: 0 success, 2 usage error,
//! 3 data error, 4 internal-consistency error.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use copdep::data::{draw_uniforms, load_dataset, parse_grouping, write_dataset, Dataset, RandomStream};
use copdep::kernels::{CndfSpec, DEFAULT_DELTA, DELTA_SWEEP};
use copdep::pvalues::{
    build_h0_reference, require_univariate, run_test, Method, MethodConfig, ReferenceDistribution, TestConfig,
    TestReport,
};
use copdep::simulate::{
    bin_counts, power_study, sample_copula, write_bin_counts, CopulaFamily, CopulaSpec, MarginalKind, PowerColumn,
    PowerConfig, PowerMethod,
};
use copdep::statistic::{StatisticKind, StatisticSpec};
use copdep::transform::empirical_transform_dataset;
use copdep::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "copdep",
    version,
    about = "Copula dependence measures and independence tests"
)]
pub struct Cli {
    /// Cap on worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply the empirical distributional transform to a dataset.
    Transform(TransformArgs),
    /// Compute a dependence statistic and its p-value.
    Test(TestArgs),
    /// Build an approximate Monte-Carlo null reference from independent uniform margins.
    #[command(name = "h0-ref")]
    H0Ref(H0RefArgs),
    /// Estimate rejection rates over a grid of copulas, marginals and taus.
    Power(PowerArgs),
    /// Time the p-value methods on null data.
    Bench(BenchArgs),
    /// Bivariate bin counts of a copula sample, for plotting.
    Bins(BinsArgs),
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Input dataset (comma-delimited with a header row).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Margin widths, e.g. 1,1,2.
    #[arg(long)]
    pub grouping: String,
    /// Seed of the auxiliary uniforms.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Statistic selection shared by several subcommands.
#[derive(Debug, Args, Clone)]
pub struct StatisticArgs {
    /// multivariance, total, m<k> (e.g. m2, m3), normalized-multivariance, normalized-total or dhsic.
    #[arg(long, default_value = "normalized-total")]
    pub statistic: String,
    /// euclidean or gaussian; defaults to euclidean for multivariance and gaussian for dhsic.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Gaussian bandwidth.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
}

impl StatisticArgs {
    pub fn spec(&self) -> Result<StatisticSpec, Error> {
        spec_for(&self.statistic, self.kernel.as_deref(), self.delta)
    }
}

fn spec_for(statistic: &str, kernel: Option<&str>, delta: f64) -> Result<StatisticSpec, Error> {
    let kind: StatisticKind = statistic.parse()?;
    let kernel = kernel.unwrap_or(match kind {
        StatisticKind::Dhsic => "gaussian",
        StatisticKind::Multivariance(_) => "euclidean",
    });
    let cndf = match kernel {
        "euclidean" => CndfSpec::Euclidean,
        "gaussian" => CndfSpec::gaussian(delta)?,
        other => return Err(Error::Config(format!("unknown kernel `{other}`"))),
    };
    StatisticSpec::new(kind, cndf)
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub grouping: String,
    #[command(flatten)]
    pub statistic: StatisticArgs,
    /// Apply the distributional transform first (copula version of the statistic).
    #[arg(long)]
    pub copula: bool,
    /// permutation, montecarlo-ref, pearson-uniform or gamma.
    #[arg(long, default_value = "permutation")]
    pub method: String,
    /// Number of permutations.
    #[arg(long = "B", default_value_t = 300)]
    pub resamples: usize,
    /// Reference file for montecarlo-ref (optional for gamma).
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Seed of the transform draws and the permutations; p-values are conditional on it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct H0RefArgs {
    #[command(flatten)]
    pub statistic: StatisticArgs,
    /// Number of margins.
    #[arg(long)]
    pub n: Option<usize>,
    /// Margin widths instead of --n; every width must be 1.
    #[arg(long)]
    pub grouping: Option<String>,
    /// Sample size N.
    #[arg(long = "N")]
    pub n_obs: usize,
    /// Number of Monte-Carlo samples (at least 1000).
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Comma-separated copula families; `table` is the six-family default.
    #[arg(long = "copula-family", default_value = "table")]
    pub copula_family: String,
    /// Comma-separated Kendall's tau values.
    #[arg(long, default_value = "0.1")]
    pub tau: String,
    /// Comma-separated marginals (U, P1, P20, RP, CA, SA, B) or `all`.
    #[arg(long, default_value = "all")]
    pub marginal: String,
    /// Comma-separated statistics; each is a column of the table.
    #[arg(long, default_value = "normalized-total,dhsic")]
    pub statistic: String,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Add one dHSIC column per bandwidth of the standard sweep.
    #[arg(long)]
    pub delta_sweep: bool,
    /// Method for every column; by default pearson-uniform where supported, else montecarlo-ref.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long = "B", default_value_t = 300)]
    pub resamples: usize,
    /// Size of the approximate references built for montecarlo-ref columns.
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long = "N", default_value_t = 100)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the table as comma-delimited text here; the aligned table goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub statistic: StatisticArgs,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long = "N", default_value_t = 100)]
    pub n_obs: usize,
    /// Timed p-values per method.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long = "B", default_value_t = 300)]
    pub resamples: usize,
    /// Reference size for montecarlo-ref.
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    /// Reuse or create the reference file here instead of a temporary file.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BinsArgs {
    #[arg(long = "copula-family")]
    pub copula_family: String,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long = "N", default_value_t = 10_000)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_DATA,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Unsupported(_) | Error::MultivariateMargin { .. } => EXIT_USAGE,
                Error::NegativeStatistic { .. } => EXIT_INTERNAL,
                _ => EXIT_DATA,
            },
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Runs a parsed command, writing the report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    if let Some(t) = cli.threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match cli.command {
        Command::Transform(a) => cmd_transform(a, out),
        Command::Test(a) => cmd_test(a, out),
        Command::H0Ref(a) => cmd_h0_ref(a, out),
        Command::Power(a) => cmd_power(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Bins(a) => cmd_bins(a, out),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
    })?))
}

pub fn cmd_transform(a: TransformArgs, out: &mut dyn Write) -> CliResult {
    let grouping = parse_grouping(&a.grouping)?;
    let ds = load_dataset(&a.input, &grouping)?;
    let draws = draw_uniforms(ds.n_obs(), ds.n_columns(), RandomStream::new(a.seed));
    let t = empirical_transform_dataset(&ds, &draws)?;
    write_dataset(&a.out, t.dataset())?;
    writeln!(out, "N={}", ds.n_obs())?;
    writeln!(out, "columns={}", ds.n_columns())?;
    writeln!(out, "seed={}", a.seed)?;
    writeln!(out, "out={}", a.out.display())?;
    Ok(())
}

pub fn cmd_test(a: TestArgs, out: &mut dyn Write) -> CliResult {
    let spec = a.statistic.spec()?;
    let method: Method = a.method.parse()?;
    let grouping = parse_grouping(&a.grouping)?;
    let ds = load_dataset(&a.input, &grouping)?;
    let reference = match (&a.reference, method) {
        (Some(path), Method::MonteCarloRef | Method::Gamma) => Some(ReferenceDistribution::read(path)?),
        (None, Method::MonteCarloRef) => {
            return Err(CliError::Usage("montecarlo-ref needs --ref".into()));
        }
        _ => None,
    };
    let config = TestConfig {
        spec,
        copula: a.copula,
        seed: a.seed,
    };
    let report = test_with(&ds, &config, method, a.resamples, reference.as_ref())?;
    write!(out, "{report}")?;
    if let Some(path) = &a.out {
        let mut f = create(path)?;
        write!(f, "{report}")?;
        f.flush()?;
    }
    Ok(())
}

fn test_with(
    ds: &Dataset,
    config: &TestConfig,
    method: Method,
    resamples: usize,
    reference: Option<&ReferenceDistribution>,
) -> Result<TestReport, Error> {
    let method = match method {
        Method::Permutation => MethodConfig::Permutation { resamples },
        Method::MonteCarloRef => MethodConfig::MonteCarloRef {
            reference: reference.expect("reference checked by the caller"),
        },
        Method::PearsonUniform => MethodConfig::PearsonUniform,
        Method::Gamma => MethodConfig::Gamma { reference },
    };
    run_test(ds, config, method)
}

pub fn cmd_h0_ref(a: H0RefArgs, out: &mut dyn Write) -> CliResult {
    let spec = a.statistic.spec()?;
    let grouping = match (&a.grouping, a.n) {
        (Some(g), _) => parse_grouping(g)?,
        (None, Some(n)) => vec![1; n],
        (None, None) => return Err(CliError::Usage("h0-ref needs --n or --grouping".into())),
    };
    require_univariate(&grouping)?;
    let start = Instant::now();
    let reference = build_h0_reference(spec, &grouping, a.n_obs, a.count, RandomStream::new(a.seed))?;
    reference.write(&a.out)?;
    writeln!(out, "statistic={}", reference.key().statistic)?;
    writeln!(out, "n={}", reference.key().n)?;
    writeln!(out, "N={}", reference.key().n_obs)?;
    writeln!(out, "count={}", reference.count())?;
    writeln!(out, "seed={}", reference.seed())?;
    writeln!(out, "mean={}", reference.mean())?;
    writeln!(out, "variance={}", reference.variance())?;
    writeln!(out, "build_seconds={:.3}", start.elapsed().as_secs_f64())?;
    writeln!(out, "out={}", a.out.display())?;
    Ok(())
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn power_columns(a: &PowerArgs) -> CliResult<Vec<PowerColumn>> {
    let forced: Option<Method> = a.method.as_deref().map(str::parse).transpose()?;
    let mut specs: Vec<(String, StatisticSpec)> = Vec::new();
    for s in split_list(&a.statistic) {
        let spec = spec_for(s, a.kernel.as_deref(), a.delta)?;
        if a.delta_sweep && spec.kind == StatisticKind::Dhsic {
            for d in DELTA_SWEEP {
                specs.push((format!("{s}_cop(delta={d})"), spec_for(s, Some("gaussian"), d)?));
            }
        } else {
            specs.push((format!("{s}_cop"), spec));
        }
    }
    specs
        .into_iter()
        .map(|(label, spec)| {
            let pearson_ok = matches!(spec.kind, StatisticKind::Multivariance(k) if k.is_normalized())
                && spec.cndf == CndfSpec::Euclidean;
            let method = match forced {
                Some(Method::Permutation) => PowerMethod::Permutation { resamples: a.resamples },
                Some(Method::MonteCarloRef) => PowerMethod::MonteCarloRef { count: a.count },
                Some(Method::PearsonUniform) => PowerMethod::PearsonUniform,
                Some(Method::Gamma) => {
                    return Err(CliError::Usage(
                        "power studies support permutation, montecarlo-ref and pearson-uniform".into(),
                    ))
                }
                None if pearson_ok => PowerMethod::PearsonUniform,
                None => PowerMethod::MonteCarloRef { count: a.count },
            };
            Ok(PowerColumn {
                label,
                spec,
                copula: true,
                method,
            })
        })
        .collect()
}

pub fn cmd_power(a: PowerArgs, out: &mut dyn Write) -> CliResult {
    let families = if a.copula_family == "table" {
        CopulaFamily::table_families()
    } else {
        split_list(&a.copula_family)
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()?
    };
    let marginals = if a.marginal == "all" {
        MarginalKind::ALL.to_vec()
    } else {
        split_list(&a.marginal).map(str::parse).collect::<Result<Vec<_>, _>>()?
    };
    let taus = split_list(&a.tau)
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("bad tau `{t}`"))))
        .collect::<CliResult<Vec<_>>>()?;
    let config = PowerConfig {
        families,
        taus,
        marginals,
        columns: power_columns(&a)?,
        n: a.n,
        n_obs: a.n_obs,
        reps: a.reps,
        alpha: a.alpha,
        seed: a.seed,
    };
    let start = Instant::now();
    let table = power_study(&config, &HashMap::new())?;
    let mut w = &mut *out;
    table.write_aligned(&mut w)?;
    for c in &config.columns {
        writeln!(out, "column {}: {} via {}", c.label, c.spec, c.method)?;
    }
    writeln!(out, "seconds={:.1}", start.elapsed().as_secs_f64())?;
    if let Some(path) = &a.out {
        let mut f = create(path)?;
        table.write_csv(&mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time of one p-value per method.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub transform_ms: f64,
    pub reference_build_ms: f64,
    pub methods: Vec<(Method, f64)>,
}

impl BenchReport {
    pub fn median_ms(&self, method: Method) -> Option<f64> {
        self.methods.iter().find(|m| m.0 == method).map(|m| m.1)
    }

    /// pearson-uniform < montecarlo-ref < permutation.
    pub fn ordering_holds(&self) -> bool {
        match (
            self.median_ms(Method::PearsonUniform),
            self.median_ms(Method::MonteCarloRef),
            self.median_ms(Method::Permutation),
        ) {
            (Some(p), Some(m), Some(r)) => p < m && m < r,
            _ => false,
        }
    }
}

/// Times every method on `reps` null datasets.
///
/// Each montecarlo-ref p-value reads the reference file, as a `test` invocation does;
/// building the reference is timed separately and excluded.
pub fn bench(a: &BenchArgs) -> CliResult<BenchReport> {
    let spec = a.statistic.spec()?;
    let grouping = vec![1; a.n];
    let (ref_path, temporary) = match &a.reference {
        Some(p) => (p.clone(), false),
        None => (
            std::env::temp_dir().join(format!("copdep-bench-{}-{}.ref", std::process::id(), a.seed)),
            true,
        ),
    };
    let key_matches = ReferenceDistribution::read(&ref_path)
        .map(|r| r.key().statistic == spec.id() && r.key().n == a.n && r.key().n_obs == a.n_obs)
        .unwrap_or(false);
    let build_start = Instant::now();
    if temporary || !key_matches {
        build_h0_reference(spec, &grouping, a.n_obs, a.count, RandomStream::new(a.seed).child(0))?.write(&ref_path)?;
    }
    let reference_build_ms = build_start.elapsed().as_secs_f64() * 1e3;

    let methods = [
        Method::PearsonUniform,
        Method::MonteCarloRef,
        Method::Permutation,
        Method::Gamma,
    ];
    let supports_pearson =
        matches!(spec.kind, StatisticKind::Multivariance(k) if k.is_normalized()) && spec.cndf == CndfSpec::Euclidean;
    let mut times: Vec<Vec<f64>> = vec![Vec::with_capacity(a.reps); methods.len()];
    let mut transform = Vec::with_capacity(a.reps);
    let data_root = RandomStream::new(a.seed).child(1);
    let result = (|| -> CliResult {
        for r in 0..a.reps as u64 {
            let u = draw_uniforms(a.n_obs, a.n, data_root.child(r));
            let ds = Dataset::new(u.values().to_owned(), grouping.clone())?;
            let config = TestConfig {
                spec,
                copula: true,
                seed: r,
            };
            let t0 = Instant::now();
            let draws = draw_uniforms(ds.n_obs(), ds.n_columns(), config.draws_stream());
            std::hint::black_box(empirical_transform_dataset(&ds, &draws)?);
            transform.push(t0.elapsed().as_secs_f64() * 1e3);
            for (i, &m) in methods.iter().enumerate() {
                if m == Method::PearsonUniform && !supports_pearson {
                    continue;
                }
                let t0 = Instant::now();
                let reference = match m {
                    Method::MonteCarloRef => Some(ReferenceDistribution::read(&ref_path)?),
                    _ => None,
                };
                let report = test_with(&ds, &config, m, a.resamples, reference.as_ref())?;
                std::hint::black_box(report.p_value);
                times[i].push(t0.elapsed().as_secs_f64() * 1e3);
            }
        }
        Ok(())
    })();
    if temporary {
        let _ = std::fs::remove_file(&ref_path);
    }
    result?;
    Ok(BenchReport {
        transform_ms: median(&mut transform),
        reference_build_ms,
        methods: methods
            .iter()
            .zip(times.iter_mut())
            .filter(|(_, t)| !t.is_empty())
            .map(|(&m, t)| (m, median(t)))
            .collect(),
    })
}

pub fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> CliResult {
    let report = bench(&a)?;
    writeln!(out, "statistic={}", a.statistic.spec()?)?;
    writeln!(out, "n={}", a.n)?;
    writeln!(out, "N={}", a.n_obs)?;
    writeln!(out, "reps={}", a.reps)?;
    writeln!(out, "B={}", a.resamples)?;
    writeln!(out, "count={}", a.count)?;
    writeln!(out, "transform_median_ms={:.4}", report.transform_ms)?;
    writeln!(out, "reference_build_ms={:.1}", report.reference_build_ms)?;
    for (m, t) in &report.methods {
        writeln!(out, "{m}_median_ms={t:.4}")?;
    }
    writeln!(
        out,
        "ordering pearson-uniform<montecarlo-ref<permutation={}",
        report.ordering_holds()
    )?;
    Ok(())
}

pub fn cmd_bins(a: BinsArgs, out: &mut dyn Write) -> CliResult {
    if a.bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    let family: CopulaFamily = a.copula_family.parse()?;
    let spec = CopulaSpec::new(family, a.tau, 2)?;
    let u = sample_copula(spec, a.n_obs, RandomStream::new(a.seed))?;
    let grid = bin_counts(u.view(), 0, 1, a.bins);
    let mut f = create(&a.out)?;
    write_bin_counts(&mut f, &grid)?;
    f.flush()?;
    writeln!(out, "copula={family}")?;
    writeln!(out, "tau={}", a.tau)?;
    writeln!(out, "N={}", a.n_obs)?;
    writeln!(out, "bins={}", a.bins)?;
    writeln!(out, "out={}", a.out.display())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_follows_statistic() {
        assert_eq!(spec_for("dhsic", None, 3.0).unwrap().id(), "dhsic/gaussian(3)");
        assert_eq!(spec_for("m2", None, 3.0).unwrap().id(), "m2/euclidean");
        assert_eq!(
            spec_for("total", Some("gaussian"), 0.5).unwrap().id(),
            "total/gaussian(0.5)"
        );
        assert!(spec_for("dhsic", Some("euclidean"), 3.0).is_err());
        assert!(spec_for("total", Some("laplace"), 3.0).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::Config("x".into())).exit_code(), EXIT_USAGE);
        assert_eq!(
            CliError::from(Error::NegativeStatistic { value: -1.0 }).exit_code(),
            EXIT_INTERNAL
        );
        assert_eq!(CliError::from(Error::Shape("x".into())).exit_code(), EXIT_DATA);
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
