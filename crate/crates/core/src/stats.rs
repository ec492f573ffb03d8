//! Small numeric helpers shared across modules.

/// Neumaier-compensated sum.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut total = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = total + v;
        if total.abs() >= v.abs() {
            comp += (total - t) + v;
        } else {
            comp += (v - t) + total;
        }
        total = t;
    }
    total + comp
}

/// Arithmetic mean; NaN for an empty input.
pub fn mean<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut n = 0usize;
    let s = sum(values.into_iter().inspect(|_| n += 1));
    s / n as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    let ss = sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Percentile of already-sorted data by linear interpolation between order
/// statistics: with `h = (n - 1) p`, returns `x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h])`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
