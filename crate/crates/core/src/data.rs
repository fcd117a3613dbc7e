//! Dataset container, margin grouping, seeded random streams and dataset I/O.
//!
//! A [`Dataset`] holds `N` observations of `D` real columns. The columns are
//! partitioned into `n` consecutive margins of widths `d₁, …, dₙ`; margin `i`
//! occupies columns `[Σ_{j<i} dⱼ, Σ_{j≤i} dⱼ)`.
//!
//! Files are UTF-8, comma delimited, with one header row. Values are written
//! with the shortest representation that parses back to the identical `f64`, so
//! a write/load round trip is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::transform::UniformDraws;

/// Generator behind every [`RandomStream`].
pub type StreamRng = ChaCha12Rng;

/// `N × D` observations partitioned into margins.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array2<f64>,
    grouping: Vec<usize>,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset after checking the grouping and that every entry is finite.
    pub fn new(values: Array2<f64>, grouping: Vec<usize>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|c| format!("x{c}")).collect();
        Self::with_names(values, grouping, names)
    }

    pub fn with_names(values: Array2<f64>, grouping: Vec<usize>, names: Vec<String>) -> Result<Self> {
        validate_grouping(&grouping, values.ncols())?;
        if values.nrows() == 0 {
            return Err(Error::Shape("dataset needs at least one observation".into()));
        }
        if names.len() != values.ncols() {
            return Err(Error::Shape(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if let Some(((row, col), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse {
                row: row + 1,
                column: col + 1,
                message: format!("non-finite value {v}"),
            });
        }
        let values = values.as_standard_layout().into_owned();
        Ok(Self {
            values,
            grouping,
            names,
        })
    }

    /// One univariate margin per column.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(Error::Shape("no columns".into()));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("columns differ in length".into()));
        }
        let values = Array2::from_shape_fn((n, d), |(r, c)| columns[c][r]);
        Self::new(values, vec![1; d])
    }

    /// Number of observations `N`.
    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    /// Number of margins `n`.
    pub fn n_margins(&self) -> usize {
        self.grouping.len()
    }

    /// Total column count `D`.
    pub fn n_columns(&self) -> usize {
        self.values.ncols()
    }

    pub fn grouping(&self) -> &[usize] {
        &self.grouping
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn column(&self, c: usize) -> ArrayView1<'_, f64> {
        self.values.column(c)
    }

    /// Column offset of each margin; has `n + 1` entries, the last being `D`.
    pub fn offsets(&self) -> Vec<usize> {
        offsets(&self.grouping)
    }

    /// View of the `N × dᵢ` block of margin `i`.
    pub fn margin(&self, i: usize) -> ArrayView2<'_, f64> {
        let off = self.offsets();
        self.values.slice(s![.., off[i]..off[i + 1]])
    }

    /// All margins as views, in order.
    pub fn margins(&self) -> Vec<ArrayView2<'_, f64>> {
        (0..self.n_margins()).map(|i| self.margin(i)).collect()
    }

    /// Same dataset with the margins in `order`.
    pub fn reorder_margins(&self, order: &[usize]) -> Result<Self> {
        let off = self.offsets();
        let mut cols = Vec::with_capacity(self.n_columns());
        let mut grouping = Vec::with_capacity(order.len());
        for &i in order {
            if i >= self.n_margins() {
                return Err(Error::InvalidGrouping(format!("no margin {i}")));
            }
            cols.extend(off[i]..off[i + 1]);
            grouping.push(self.grouping[i]);
        }
        let values = self.values.select(ndarray::Axis(1), &cols);
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        Self::with_names(values, grouping, names)
    }

    /// Same dataset with rows taken in the order of `perm`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        Self {
            values: self.values.select(ndarray::Axis(0), perm),
            grouping: self.grouping.clone(),
            names: self.names.clone(),
        }
    }
}

pub(crate) fn offsets(grouping: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(grouping.len() + 1);
    let mut acc = 0;
    off.push(0);
    for &d in grouping {
        acc += d;
        off.push(acc);
    }
    off
}

pub(crate) fn validate_grouping(grouping: &[usize], columns: usize) -> Result<()> {
    if grouping.is_empty() {
        return Err(Error::InvalidGrouping("grouping is empty".into()));
    }
    if let Some(pos) = grouping.iter().position(|&d| d == 0) {
        return Err(Error::InvalidGrouping(format!("margin {} has width 0", pos + 1)));
    }
    let sum: usize = grouping.iter().sum();
    if sum != columns {
        return Err(Error::GroupingMismatch { sum, columns });
    }
    Ok(())
}

/// Parses a grouping like `"1,1,2"`.
pub fn parse_grouping(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidGrouping(format!("`{}` is not a width", t.trim())))
        })
        .collect()
}

/// Reads a comma-delimited table with a header row.
pub fn load_dataset(path: impl AsRef<Path>, grouping: &[usize]) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, grouping)
}

/// Reader-based variant of [`load_dataset`].
pub fn read_dataset(reader: impl std::io::Read, grouping: &[usize]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            column: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    validate_grouping(grouping, names.len())?;

    let width = names.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: r + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(Error::Parse {
                row: r + 1,
                column: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: c + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    column: c + 1,
                    message: format!("non-finite value `{cell}`"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    let values = Array2::from_shape_vec((rows, width), data).map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::with_names(values, grouping.to_vec(), names)
}

/// Writes `ds` in the dataset file format.
pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_table(&mut out, ds.names(), ds.values()).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_table(out: &mut impl Write, names: &[String], values: ArrayView2<'_, f64>) -> std::io::Result<()> {
    writeln!(out, "{}", names.join(","))?;
    let mut line = String::new();
    for row in values.rows() {
        line.clear();
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            // `Display` for f64 is the shortest round-trip representation.
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Seed plus substream index; a pure description of a random sequence.
///
/// The generator is ChaCha12 seeded from `seed` with its 64-bit stream counter set to
/// `substream`, so distinct substreams of one seed are disjoint keystreams. Nested
/// tasks derive fresh streams with [`RandomStream::child`], which hashes the parent
/// (seed, substream) into a new seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub substream: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, substream: 0 }
    }

    pub fn with_substream(seed: u64, substream: u64) -> Self {
        Self { seed, substream }
    }

    /// Same seed, different substream.
    pub fn substream(&self, k: u64) -> Self {
        Self {
            seed: self.seed,
            substream: k,
        }
    }

    /// Stream `k` below this one in the derivation tree.
    pub fn child(&self, k: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(self.substream.wrapping_add(0x632B_E59B_D9B4_E019))),
            substream: k,
        }
    }

    /// Child keyed by a label, e.g. the coordinates of a simulation cell.
    pub fn keyed(&self, label: &str) -> Self {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.child(h)
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.substream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `N × D` independent Uniform[0,1) draws from `stream`.
pub fn draw_uniforms(n_obs: usize, n_cols: usize, stream: RandomStream) -> UniformDraws {
    let mut rng = stream.rng();
    fill_uniforms(n_obs, n_cols, &mut rng)
}

pub(crate) fn fill_uniforms(n_obs: usize, n_cols: usize, rng: &mut impl Rng) -> UniformDraws {
    let values = Array2::from_shape_simple_fn((n_obs, n_cols), || rng.random::<f64>());
    UniformDraws::new(values).expect("draws lie in [0,1)")
}
