//! Small statistical helpers: Kendall's tau, a Kolmogorov–Smirnov uniformity test and
//! distribution functions used by the simulators.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

/// Kendall's tau-a of two tie-free samples in O(N log N) (sort, then count inversions).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "samples differ in length");
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = count_inversions(&mut ys, &mut buf);
    let pairs = (n * (n - 1) / 2) as f64;
    1.0 - 2.0 * discordant as f64 / pairs
}

/// Merge sort returning the number of pairs `i < j` with `v[i] > v[j]`.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        count_inversions(left, &mut buf[..mid]) + count_inversions(right, &mut buf[mid..])
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Kolmogorov–Smirnov distance of a sample to Uniform[0,1].
pub fn ks_uniform_statistic(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS uniformity test, with Stephens' small-sample correction.
pub fn ks_uniform_pvalue(sample: &[f64]) -> f64 {
    let d = ks_uniform_statistic(sample);
    let sn = (sample.len() as f64).sqrt();
    kolmogorov_upper_tail((sn + 0.12 + 0.11 / sn) * d)
}

/// `P(K > λ) = 2·Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_upper_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Student-t distribution function through the regularized incomplete beta function.
pub fn student_t_cdf(x: f64, df: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + x * x));
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Closed-form t₃ distribution function.
pub fn student_t3_cdf(x: f64) -> f64 {
    let s = 3f64.sqrt();
    0.5 + (x / (s * (1.0 + x * x / 3.0)) + (x / s).atan()) / std::f64::consts::PI
}

fn student_t_pdf(x: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

fn student_t3_pdf(x: f64) -> f64 {
    let s = 3.0 + x * x;
    6.0 * 3f64.sqrt() / (std::f64::consts::PI * s * s)
}

/// Student-t quantile by safeguarded Newton iteration on [`student_t_cdf`].
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    if df == 1.0 && p > 0.0 && p < 1.0 {
        return (std::f64::consts::PI * (p - 0.5)).tan();
    }
    if df == 3.0 {
        return symmetric_quantile(p, &student_t3_cdf, &student_t3_pdf);
    }
    symmetric_quantile(p, &|x| student_t_cdf(x, df), &|x| student_t_pdf(x, df))
}

/// Inverts the distribution function of a law symmetric about 0.
fn symmetric_quantile(p: f64, cdf: &dyn Fn(f64) -> f64, pdf: &dyn Fn(f64) -> f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    // the lower half mirrors the upper one
    if p < 0.5 {
        return -symmetric_quantile(1.0 - p, cdf, pdf);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - f / pdf(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}
