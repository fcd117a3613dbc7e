//! Slow, literal reference implementations shared by the integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use copdep::data::Dataset;
use copdep::multivariance::MultivarianceKind;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dataset with i.i.d. standard-ish entries and the given grouping.
pub fn random_dataset(rng: &mut impl Rng, n_obs: usize, grouping: &[usize]) -> Dataset {
    let cols: usize = grouping.iter().sum();
    let values = ndarray::Array2::from_shape_fn((n_obs, cols), |_| rng.random::<f64>() * 4.0 - 2.0);
    Dataset::new(values, grouping.to_vec()).unwrap()
}

/// Rows of margin `i` as plain vectors.
pub fn margin_rows(ds: &Dataset, i: usize) -> Matrix {
    ds.margin(i).rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `A(j,k) = ψ(xʲ − xᵏ)` for ψ given on squared distances.
pub fn distance_matrix(rows: &Matrix, psi: impl Fn(f64) -> f64) -> Matrix {
    rows.iter()
        .map(|a| rows.iter().map(|b| psi(sq_dist(a, b))).collect())
        .collect()
}

pub fn mean(m: &Matrix) -> f64 {
    m.iter().flatten().sum::<f64>() / (m.len() * m.len()) as f64
}

/// `Ψ = −A + row means + column means − grand mean`.
pub fn centered(a: &Matrix) -> Matrix {
    let n = a.len();
    let row: Vec<f64> = a.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let col: Vec<f64> = (0..n).map(|k| a.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
    let g = mean(a);
    (0..n)
        .map(|j| (0..n).map(|k| -a[j][k] + row[j] + col[k] - g).collect())
        .collect()
}

pub fn euclid(sq: f64) -> f64 {
    sq.sqrt()
}

/// Centered matrices of every margin, divided by the mean of `A` when `normalized`.
pub fn psi_matrices(ds: &Dataset, psi: impl Fn(f64) -> f64 + Copy, normalized: bool) -> Vec<Matrix> {
    (0..ds.n_margins())
        .map(|i| {
            let a = distance_matrix(&margin_rows(ds, i), psi);
            let c = centered(&a);
            if normalized {
                let g = mean(&a);
                c.into_iter().map(|r| r.into_iter().map(|x| x / g).collect()).collect()
            } else {
                c
            }
        })
        .collect()
}

/// `(1/N²)·Σ_{j,k} ∏_{i∈S} Ψᵢ(j,k)` for one subset `S`.
pub fn subset_multivariance(psis: &[Matrix], subset: &[usize]) -> f64 {
    let n = psis[0].len();
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            s += subset.iter().map(|&i| psis[i][j][k]).product::<f64>();
        }
    }
    s / (n * n) as f64
}

/// Squared multivariance by enumerating every subset of margins it sums over.
pub fn multivariance_by_subsets(ds: &Dataset, kind: MultivarianceKind) -> f64 {
    let psis = psi_matrices(ds, euclid, kind.is_normalized());
    let n = psis.len();
    let wanted = |size: usize| match kind {
        MultivarianceKind::Single | MultivarianceKind::NormalizedSingle => size == n,
        MultivarianceKind::Total | MultivarianceKind::NormalizedTotal => size >= 2,
        MultivarianceKind::MFold(m) => size == m,
    };
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if wanted(subset.len()) {
            total += subset_multivariance(&psis, &subset);
        }
    }
    total
}

/// dHSIC from its expanded definition with all index tuples written out, Gaussian kernel.
///
/// Cost is `O(N^{2n})`; keep `n ≤ 3` and `N` small.
pub fn dhsic_expanded(ds: &Dataset, delta: f64) -> f64 {
    let n = ds.n_margins();
    let big_n = ds.n_obs();
    let grams: Vec<Matrix> = (0..n)
        .map(|i| distance_matrix(&margin_rows(ds, i), |sq| (-sq / (2.0 * delta * delta)).exp()))
        .collect();
    let nf = big_n as f64;

    let mut first = 0.0;
    for j in 0..big_n {
        for k in 0..big_n {
            first += grams.iter().map(|g| g[j][k]).product::<f64>();
        }
    }
    first /= nf * nf;

    // Σ over 2n indices of ∏ᵢ Kᵢ(i_{2i}, i_{2i+1})
    let mut idx = vec![0usize; 2 * n];
    let mut second = 0.0;
    loop {
        second += (0..n).map(|i| grams[i][idx[2 * i]][idx[2 * i + 1]]).product::<f64>();
        if !advance(&mut idx, big_n) {
            break;
        }
    }
    second /= nf.powi(2 * n as i32);

    // Σ over n+1 indices of ∏ᵢ Kᵢ(i₀, i_{i+1})
    let mut idx = vec![0usize; n + 1];
    let mut third = 0.0;
    loop {
        third += (0..n).map(|i| grams[i][idx[0]][idx[i + 1]]).product::<f64>();
        if !advance(&mut idx, big_n) {
            break;
        }
    }
    third *= 2.0 / nf.powi(n as i32 + 1);

    first + second - third
}

/// Odometer step over `{0..base}^len`; false once every tuple was visited.
fn advance(idx: &mut [usize], base: usize) -> bool {
    for d in idx.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// `(1/N)·Σₖ [1{xₖ < x} + u·1{xₖ = x}]` evaluated pair by pair.
pub fn transform_by_pairs(column: &[f64], draws: &[f64]) -> Vec<f64> {
    let n = column.len() as f64;
    column
        .iter()
        .zip(draws)
        .map(|(&x, &u)| {
            let less = column.iter().filter(|&&y| y < x).count() as f64;
            let equal = column.iter().filter(|&&y| y == x).count() as f64;
            (less + u * equal) / n
        })
        .collect()
}
