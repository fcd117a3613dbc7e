//! Monte-Carlo null distributions of a scaled statistic, and their file format.
//!
//! A reference file starts with a UTF-8 header of `key=value` lines, ends the header
//! with an empty line and continues with `count` little-endian `f64` values in
//! ascending order:
//!
//! ```text
//! COPDEP-REF 1
//! statistic=normalized-total/euclidean
//! n=5
//! N=100
//! count=100000
//! seed=42
//!
//! <8·count bytes>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::data::{fill_uniforms, Dataset, RandomStream, StreamRng};
use crate::error::{Error, Result};
use crate::statistic::{PreparedStatistic, StatisticSpec};

const MAGIC: &str = "COPDEP-REF 1";

/// Smallest sample count accepted for a reference distribution.
pub const MIN_REFERENCE_COUNT: usize = 1000;

/// What a reference distribution is valid for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceKey {
    pub statistic: String,
    pub n: usize,
    pub n_obs: usize,
}

impl std::fmt::Display for ReferenceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} n={} N={}", self.statistic, self.n, self.n_obs)
    }
}

/// Sorted null samples of a scaled statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDistribution {
    key: ReferenceKey,
    seed: u64,
    samples: Vec<f64>,
}

impl ReferenceDistribution {
    /// Sorts `samples`; rejects fewer than [`MIN_REFERENCE_COUNT`] or non-finite values.
    pub fn new(key: ReferenceKey, seed: u64, mut samples: Vec<f64>) -> Result<Self> {
        if samples.len() < MIN_REFERENCE_COUNT {
            return Err(Error::Config(format!(
                "a reference needs at least {MIN_REFERENCE_COUNT} samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::ReferenceFormat("non-finite sample".into()));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { key, seed, samples })
    }

    pub fn key(&self) -> &ReferenceKey {
        &self.key
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.count() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (self.count() - 1) as f64
    }

    /// `(1 + #{samples ≥ scaled}) / (count + 1)`, without checking the key.
    pub fn upper_tail(&self, scaled: f64) -> f64 {
        let below = self.samples.partition_point(|&s| s < scaled);
        let at_or_above = self.count() - below;
        (1 + at_or_above) as f64 / (self.count() + 1) as f64
    }

    pub fn check_key(&self, expected: &ReferenceKey) -> Result<()> {
        if &self.key == expected {
            Ok(())
        } else {
            Err(Error::KeyMismatch {
                expected: expected.to_string(),
                found: self.key.to_string(),
            })
        }
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "statistic={}", self.key.statistic)?;
        writeln!(out, "n={}", self.key.n)?;
        writeln!(out, "N={}", self.key.n_obs)?;
        writeln!(out, "count={}", self.count())?;
        writeln!(out, "seed={}", self.seed)?;
        writeln!(out)?;
        for s in &self.samples {
            out.write_all(&s.to_le_bytes())?;
        }
        out.flush()
    }

    pub fn read_from(reader: impl Read) -> Result<Self> {
        let mut rdr = BufReader::new(reader);
        let mut line = String::new();
        let mut next_line = |rdr: &mut BufReader<_>| -> Result<String> {
            line.clear();
            let read = rdr
                .read_line(&mut line)
                .map_err(|e| Error::ReferenceFormat(e.to_string()))?;
            if read == 0 {
                return Err(Error::ReferenceFormat("truncated header".into()));
            }
            Ok(line.trim_end_matches(['\n', '\r']).to_string())
        };
        if next_line(&mut rdr)? != MAGIC {
            return Err(Error::ReferenceFormat(format!("missing `{MAGIC}` header")));
        }
        let (mut statistic, mut n, mut n_obs, mut count, mut seed) = (None, None, None, None, None);
        loop {
            let l = next_line(&mut rdr)?;
            if l.is_empty() {
                break;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::ReferenceFormat(format!("bad header line `{l}`")))?;
            let num = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| Error::ReferenceFormat(format!("`{k}` is not an integer: `{v}`")))
            };
            match k {
                "statistic" => statistic = Some(v.to_string()),
                "n" => n = Some(num(v)? as usize),
                "N" => n_obs = Some(num(v)? as usize),
                "count" => count = Some(num(v)? as usize),
                "seed" => seed = Some(num(v)?),
                _ => return Err(Error::ReferenceFormat(format!("unknown header key `{k}`"))),
            }
        }
        let missing = |name: &str| Error::ReferenceFormat(format!("header lacks `{name}`"));
        let key = ReferenceKey {
            statistic: statistic.ok_or_else(|| missing("statistic"))?,
            n: n.ok_or_else(|| missing("n"))?,
            n_obs: n_obs.ok_or_else(|| missing("N"))?,
        };
        let count = count.ok_or_else(|| missing("count"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;

        let mut payload = Vec::new();
        rdr.read_to_end(&mut payload)
            .map_err(|e| Error::ReferenceFormat(e.to_string()))?;
        if payload.len() != 8 * count {
            return Err(Error::ReferenceFormat(format!(
                "expected {} payload bytes, found {}",
                8 * count,
                payload.len()
            )));
        }
        let samples: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if samples.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::ReferenceFormat("samples are not sorted".into()));
        }
        Self::new(key, seed, samples)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }
}

/// Rejects groupings with a multivariate margin.
pub fn require_univariate(grouping: &[usize]) -> Result<()> {
    match grouping.iter().position(|&d| d > 1) {
        Some(i) => Err(Error::MultivariateMargin {
            margin: i + 1,
            width: grouping[i],
        }),
        None => Ok(()),
    }
}

fn uniform_dataset(n_obs: usize, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    let values = Array2::from_shape_simple_fn((n_obs, n), || rng.random::<f64>());
    Dataset::new(values, vec![1; n])
}

/// Approximate H0 reference: the scaled statistic on independent Uniform[0,1) columns,
/// without the distributional transform.
///
/// Sample `r` uses the stream `stream.child(r)`, so the result does not depend on how
/// the work is scheduled.
pub fn build_h0_reference(
    spec: StatisticSpec,
    grouping: &[usize],
    n_obs: usize,
    count: usize,
    stream: RandomStream,
) -> Result<ReferenceDistribution> {
    require_univariate(grouping)?;
    let n = grouping.len();
    spec.validate(n)?;
    if count < MIN_REFERENCE_COUNT {
        return Err(Error::Config(format!(
            "a reference needs at least {MIN_REFERENCE_COUNT} samples, got {count}"
        )));
    }
    let samples = (0..count as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.child(r).rng();
            let ds = uniform_dataset(n_obs, n, &mut rng)?;
            PreparedStatistic::new(&ds, spec)?.scaled()
        })
        .collect::<Result<Vec<f64>>>()?;
    let key = ReferenceKey {
        statistic: spec.id(),
        n,
        n_obs,
    };
    ReferenceDistribution::new(key, stream.seed, samples)
}

/// Exact H0 reference: `sampler` draws a dataset with independent margins of the law
/// under study, which is then transformed and evaluated.
pub fn build_exact_reference<S>(
    spec: StatisticSpec,
    count: usize,
    stream: RandomStream,
    sampler: S,
) -> Result<ReferenceDistribution>
where
    S: Fn(&mut StreamRng) -> Result<Dataset> + Sync,
{
    let samples = (0..count as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.child(r).rng();
            let ds = sampler(&mut rng)?;
            let draws = fill_uniforms(ds.n_obs(), ds.n_columns(), &mut rng);
            let p = PreparedStatistic::copula(&ds, &draws, spec)?;
            Ok((p.scaled()?, p.n_margins(), p.n_obs()))
        })
        .collect::<Result<Vec<(f64, usize, usize)>>>()?;
    let (n, n_obs) = samples.first().map(|s| (s.1, s.2)).unwrap_or((0, 0));
    let key = ReferenceKey {
        statistic: spec.id(),
        n,
        n_obs,
    };
    ReferenceDistribution::new(key, stream.seed, samples.into_iter().map(|s| s.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> ReferenceKey {
        ReferenceKey {
            statistic: "total/euclidean".into(),
            n: 3,
            n_obs: 20,
        }
    }

    fn thousand() -> ReferenceDistribution {
        ReferenceDistribution::new(key(), 1, (0..999).rev().map(f64::from).chain([0.5]).collect()).unwrap()
    }

    #[test]
    fn upper_tail_counts() {
        let r = ReferenceDistribution::new(key(), 1, (0..999).map(f64::from).chain([2000.0]).collect()).unwrap();
        assert_eq!(r.upper_tail(-1.0), 1.0);
        assert_eq!(r.upper_tail(1e9), 1.0 / 1001.0);
        // 500 of 1000 samples are ≥ 499.5
        assert_eq!(r.upper_tail(499.5), 501.0 / 1001.0);
    }

    #[test]
    fn median_of_999() {
        let mut s: Vec<f64> = (0..999).map(f64::from).collect();
        s.push(f64::MAX);
        // with 999 samples the median is the 500th; emulate by a 1000th sample below everything
        s[999] = -1.0;
        let r = ReferenceDistribution::new(key(), 0, s).unwrap();
        // samples ≥ 499 are 499..=998: 500 of them
        assert_eq!(r.upper_tail(499.0), 501.0 / 1001.0);
    }

    #[test]
    fn too_few_samples() {
        assert!(ReferenceDistribution::new(key(), 1, vec![]).is_err());
        assert!(ReferenceDistribution::new(key(), 1, vec![1.0; 999]).is_err());
    }

    #[test]
    fn round_trip_bytes() {
        let r = thousand();
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        let back = ReferenceDistribution::read_from(&buf[..]).unwrap();
        assert_eq!(back, r);
        assert!(buf.starts_with(b"COPDEP-REF 1\nstatistic=total/euclidean\nn=3\nN=20\ncount=1000\nseed=1\n\n"));
    }

    #[test]
    fn truncated_payload() {
        let mut buf = Vec::new();
        thousand().write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            ReferenceDistribution::read_from(&buf[..]),
            Err(Error::ReferenceFormat(_))
        ));
    }

    #[test]
    fn key_mismatch() {
        let mut other = key();
        other.n_obs = 21;
        assert!(matches!(thousand().check_key(&other), Err(Error::KeyMismatch { .. })));
        assert!(thousand().check_key(&key()).is_ok());
    }

    #[test]
    fn multivariate_grouping_rejected() {
        let err = require_univariate(&[1, 2]).unwrap_err();
        assert!(err.to_string().contains("multivariate margins need exact Monte Carlo"));
    }
}
