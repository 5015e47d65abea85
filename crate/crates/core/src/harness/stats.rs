/// Mean and sample standard deviation; `(NaN, NaN)` when empty, std 0 for a
/// single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Fraction of `values` that are `<= threshold`.
pub fn fraction_within(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().filter(|v| **v <= threshold).count() as f64 / values.len() as f64
}

/// Empirical CDF as sorted `(value, fraction <= value)` steps, one per
/// distinct value.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    out
}

/// Evaluates a CDF from [`empirical_cdf`] at `t`.
pub fn cdf_at(cdf: &[(f64, f64)], t: f64) -> f64 {
    match cdf.partition_point(|(v, _)| *v <= t) {
        0 => 0.0,
        i => cdf[i - 1].1,
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation (average ranks for ties). NaN for fewer than
/// two points or constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    if x.len() < 2 {
        return f64::NAN;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Largest sample for which [`spearman_p_greater`] enumerates every
/// permutation.
pub const EXACT_PERMUTATION_LIMIT: usize = 9;

/// One-sided p-value for a positive rank correlation: the fraction of
/// permutations of `y` whose correlation with `x` is at least the observed
/// one. Exact up to [`EXACT_PERMUTATION_LIMIT`] points, normal approximation
/// beyond.
pub fn spearman_p_greater(x: &[f64], y: &[f64]) -> f64 {
    let rho = spearman(x, y);
    if rho.is_nan() {
        return f64::NAN;
    }
    let n = x.len();
    if n > EXACT_PERMUTATION_LIMIT {
        let z = rho * ((n - 1) as f64).sqrt();
        return 0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2);
    }
    let rx = ranks(x);
    let mut ry = ranks(y);
    let tol = 1e-12;
    let (mut hits, mut total) = (0u64, 0u64);
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let mut visit = |p: &[f64]| {
        total += 1;
        if pearson(&rx, p) >= rho - tol {
            hits += 1;
        }
    };
    visit(&ry);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                ry.swap(0, i);
            } else {
                ry.swap(c[i], i);
            }
            visit(&ry);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}
