//! Pearson type-III tail for normalized multivariance of uniform margins with ψ = |·|.
//!
//! The null law of `N·ᴺM²` is fitted by a shifted gamma distribution matching mean,
//! variance and skewness:
//!
//! * Skewness comes from the limit law. A single centered uniform margin under `|·|` has
//!   eigenvalue power sums `Σλ = 1/3`, `Σλ² = 2/45`, `Σλ³ = 8/945`. After dividing by the
//!   normalizer `1/3` these become `1, 2/5, 8/35`, and a product over `m` margins has
//!   power sums `sₚᵐ`. The limit cumulants are `κₚ = 2^{p−1}(p−1)!·Σλᵖ`.
//! * Mean and variance are exact finite-`N` moments for transformed data, treating the
//!   normalizer as its expectation. A tie-free transformed column is a random
//!   permutation of `tₖ = (k + uₖ)/N`, `k = 0..N−1`, so with `A(j,k) = |tⱼ − tₖ|` the
//!   required moments are `a = E A(1,2)`, `b = E A(1,2)²`, `c = E A(1,2)A(1,3)` and
//!   `d = E A(1,2)A(3,4)`. These tend to `1/3, 1/6, 7/60, 1/9` as `N → ∞`.
//!
//! Second moments of the V-statistic are assembled by summing over the 15 equality
//! patterns of an index quadruple `(j,k,l,m)`. Within a pattern the centered entries
//! expand into `A`-terms whose free summation indices either coincide with one of the
//! pattern's classes or take a fresh value.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::multivariance::MultivarianceKind;

/// Mean, second and third eigenvalue power sums of the centered `|·|` kernel on Uniform[0,1].
pub const LIMIT_MEAN: f64 = 1.0 / 3.0;
pub const LIMIT_VARIANCE: f64 = 2.0 / 45.0;
pub const LIMIT_SKEWNESS: f64 = 8.0 / 945.0;
/// `E|U−U′|²`, `E|U−U′||U−U″|` and `(E|U−U′|)²` for independent uniforms.
pub const B: f64 = 1.0 / 6.0;
pub const C: f64 = 7.0 / 60.0;
pub const D: f64 = 1.0 / 9.0;

/// Moments of `A(j,k) = |tⱼ − tₖ|` over distinct indices of a transformed uniform column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceMoments {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl DistanceMoments {
    /// The `N → ∞` values.
    pub fn limit() -> Self {
        Self {
            a: LIMIT_MEAN,
            b: B,
            c: C,
            d: D,
        }
    }

    /// Exact values for a column `tₖ = (k + uₖ)/N` in random order; needs `N ≥ 4`.
    pub fn stratified(n_obs: usize) -> Result<Self> {
        if n_obs < 4 {
            return Err(Error::Unsupported(format!("pearson-uniform needs N ≥ 4, got {n_obs}")));
        }
        let n = n_obs as f64;
        let sq_sum = |m: f64| m * (m + 1.0) * (2.0 * m + 1.0) / 6.0;
        let (mut t1, mut s2_sum, mut c_sum, mut sign_sum) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..n_obs {
            let (lo, hi) = (k as f64, (n_obs - 1 - k) as f64);
            // Σ_{l≠k} |k−l|, Σ_{l≠k} (k−l)² and Σ_{l≠k} sign(k−l)
            let s1 = 0.5 * (lo * (lo + 1.0) + hi * (hi + 1.0));
            let s2 = sq_sum(lo) + sq_sum(hi);
            let sg = lo - hi;
            t1 += s1;
            s2_sum += s2;
            c_sum += s1 * s1 - s2;
            sign_sum += sg * sg - (n - 1.0);
        }
        let pairs = n * (n - 1.0);
        let triples = pairs * (n - 2.0);
        let quads = triples * (n - 3.0);
        // uₖ enters as ±(uⱼ − uₖ): variance 1/6 on a pair, covariance ±1/12 across a shared index
        Ok(Self {
            a: t1 / pairs / n,
            b: (s2_sum / pairs + 1.0 / 6.0) / (n * n),
            c: (c_sum / triples + sign_sum / triples / 12.0) / (n * n),
            d: (t1 * t1 - 4.0 * c_sum - 2.0 * s2_sum) / quads / (n * n),
        })
    }
}

/// Index slot of an `A`-term: one of the pattern's classes or a summation index.
#[derive(Clone, Copy)]
enum Slot {
    Class(usize),
    Free(usize),
}

/// `Ψ(j,k) = −A(j,k) + (1/N)Σ_f A(f,k) + (1/N)Σ_f A(j,f) − (1/N²)Σ_{f,g} A(f,g)`.
fn centered_terms(j: usize, k: usize, n: f64, first_free: usize) -> [(f64, [Slot; 2]); 4] {
    use Slot::*;
    [
        (-1.0, [Class(j), Class(k)]),
        (1.0 / n, [Free(first_free), Class(k)]),
        (1.0 / n, [Class(j), Free(first_free)]),
        (-1.0 / (n * n), [Free(first_free), Free(first_free + 1)]),
    ]
}

/// Sums `eval` over all assignments of the free slots, weighting fresh classes by the
/// number of unused indices.
fn sum_free(slots: &[[Slot; 2]], classes: usize, n: f64, eval: &dyn Fn(&[[usize; 2]]) -> f64) -> f64 {
    // renumber the free slots in use to 0..free
    let mut ids: Vec<usize> = Vec::new();
    for s in slots.iter().flatten() {
        if let Slot::Free(f) = s {
            if !ids.contains(f) {
                ids.push(*f);
            }
        }
    }
    let free = ids.len();
    let slots: Vec<[Slot; 2]> = slots
        .iter()
        .map(|p| {
            p.map(|s| match s {
                Slot::Free(f) => Slot::Free(ids.iter().position(|&i| i == f).unwrap()),
                class => class,
            })
        })
        .collect();
    let slots = &slots[..];
    fn rec(
        slots: &[[Slot; 2]],
        assign: &mut Vec<usize>,
        free: usize,
        classes: usize,
        weight: f64,
        n: f64,
        eval: &dyn Fn(&[[usize; 2]]) -> f64,
    ) -> f64 {
        if assign.len() == free {
            let resolved: Vec<[usize; 2]> = slots
                .iter()
                .map(|p| {
                    p.map(|s| match s {
                        Slot::Class(c) => c,
                        Slot::Free(f) => assign[f],
                    })
                })
                .collect();
            return weight * eval(&resolved);
        }
        let mut total = 0.0;
        for c in 0..classes {
            assign.push(c);
            total += rec(slots, assign, free, classes, weight, n, eval);
            assign.pop();
        }
        assign.push(classes);
        total += rec(slots, assign, free, classes + 1, weight * (n - classes as f64), n, eval);
        assign.pop();
        total
    }
    rec(slots, &mut Vec::new(), free, classes, 1.0, n, eval)
}

/// Restricted growth strings of length 4: the 15 equality patterns of `(j,k,l,m)`.
fn patterns() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for b in 0..=1 {
        for c in 0..=(b + 1) {
            let mc = b.max(c);
            for d in 0..=(mc + 1) {
                out.push([0, b, c, d]);
            }
        }
    }
    out
}

fn falling(n: f64, r: usize) -> f64 {
    (0..r).map(|i| n - i as f64).product()
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// First two moments and limit skewness of the scaled statistic under independence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

/// Null moments of `N·ᴺM²` for `n` transformed uniform margins of length `N`.
pub fn null_moments(kind: MultivarianceKind, n: usize, n_obs: usize) -> Result<NullMoments> {
    if !kind.is_normalized() {
        return Err(Error::Unsupported(format!(
            "pearson-uniform supports normalized statistics only, not `{kind}`; use montecarlo-ref"
        )));
    }
    kind.validate(n)?;
    let m = DistanceMoments::stratified(n_obs)?;
    let nf = n_obs as f64;
    let norm = (nf - 1.0) * m.a / nf;

    let e_single = |pair: &[[usize; 2]]| if pair[0][0] == pair[0][1] { 0.0 } else { m.a };
    let e_pair = |pairs: &[[usize; 2]]| {
        let (p, q) = (pairs[0], pairs[1]);
        if p[0] == p[1] || q[0] == q[1] {
            return 0.0;
        }
        let shared = p.iter().filter(|x| q.contains(x)).count();
        match shared {
            2 => m.b,
            1 => m.c,
            _ => m.d,
        }
    };

    // Σ_{jk} Ψᵢ(j,k) = 0, so order-1 terms add nothing to the total statistic;
    // including them keeps the second moment a single product expansion.
    let orders: Vec<usize> = match kind {
        MultivarianceKind::NormalizedTotal => (1..=n).collect(),
        _ => kind.orders(n),
    };
    let compose = |ex: f64, ey: f64, exy: f64| {
        let mut total = 0.0;
        for &p in &orders {
            for &q in &orders {
                for s in 0..=p.min(q) {
                    if p - s + q > n {
                        continue;
                    }
                    total += binom(n, s)
                        * binom(n - s, p - s)
                        * binom(n - p, q - s)
                        * exy.powi(s as i32)
                        * ex.powi((p - s) as i32)
                        * ey.powi((q - s) as i32);
                }
            }
        }
        total
    };

    // Per-entry means: the diagonal averages to exactly 1, off-diagonal to −1/(N−1).
    let e_diag = 1.0;
    let e_off = -1.0 / (nf - 1.0);
    let f_mean = |e: f64| orders.iter().map(|&p| binom(n, p) * e.powi(p as i32)).sum::<f64>();
    let mean = f_mean(e_diag) + (nf - 1.0) * f_mean(e_off);

    let mut second = 0.0;
    for pat in patterns() {
        let [j, k, l, mm] = pat;
        let classes = pat.iter().max().unwrap() + 1;
        let tx = centered_terms(j, k, nf, 0);
        let ty = centered_terms(l, mm, nf, 2);
        let ex: f64 = tx
            .iter()
            .map(|(c, s)| c * sum_free(&[*s], classes, nf, &e_single))
            .sum::<f64>()
            / norm;
        let ey: f64 = ty
            .iter()
            .map(|(c, s)| c * sum_free(&[*s], classes, nf, &e_single))
            .sum::<f64>()
            / norm;
        let mut exy = 0.0;
        for (c1, s1) in &tx {
            for (c2, s2) in &ty {
                exy += c1 * c2 * sum_free(&[*s1, *s2], classes, nf, &e_pair);
            }
        }
        exy /= norm * norm;
        second += falling(nf, classes) * compose(ex, ey, exy);
    }
    second /= nf * nf;
    let variance = second - mean * mean;

    let (s2, s3) = (
        LIMIT_VARIANCE / (LIMIT_MEAN * LIMIT_MEAN),
        LIMIT_SKEWNESS / (LIMIT_MEAN * LIMIT_MEAN * LIMIT_MEAN),
    );
    let power_sum = |s: f64| {
        kind.orders(n)
            .iter()
            .map(|&p| binom(n, p) * s.powi(p as i32))
            .sum::<f64>()
    };
    let skewness = 8.0 * power_sum(s3) / (2.0 * power_sum(s2)).powf(1.5);
    Ok(NullMoments {
        mean,
        variance,
        skewness,
    })
}

/// Upper tail of the Pearson type-III law with the given moments.
pub fn pearson3_upper_tail(x: f64, moments: NullMoments) -> f64 {
    let NullMoments {
        mean,
        variance,
        skewness,
    } = moments;
    let shape = 4.0 / (skewness * skewness);
    let scale = variance.sqrt() * skewness / 2.0;
    let shift = mean - shape * scale;
    let z = (x - shift) / scale;
    if z <= 0.0 {
        1.0
    } else if z.is_infinite() {
        f64::MIN_POSITIVE
    } else {
        gamma_ur(shape, z).clamp(f64::MIN_POSITIVE, 1.0)
    }
}

type MomentCache = Mutex<HashMap<(MultivarianceKind, usize, usize), NullMoments>>;

/// [`null_moments`], memoized per `(kind, n, N)`.
pub fn cached_null_moments(kind: MultivarianceKind, n: usize, n_obs: usize) -> Result<NullMoments> {
    static CACHE: OnceLock<MomentCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(m) = cache.lock().expect("moment cache").get(&(kind, n, n_obs)) {
        return Ok(*m);
    }
    let m = null_moments(kind, n, n_obs)?;
    cache.lock().expect("moment cache").insert((kind, n, n_obs), m);
    Ok(m)
}

/// p-value of a scaled normalized multivariance of `n` transformed uniform margins.
pub fn pearson_uniform_pvalue(scaled: f64, kind: MultivarianceKind, n: usize, n_obs: usize) -> Result<f64> {
    let moments = cached_null_moments(kind, n, n_obs)?;
    Ok(pearson3_upper_tail(scaled, moments))
}
