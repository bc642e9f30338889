//! Order statistics shared by the forecast ensemble and the simulation bands.

/// 1-based nearest rank for percentile `p` (in percent) of `n` sorted values:
/// the smallest rank `k` with `k / n >= p / 100`.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    assert!(n > 0, "nearest_rank of an empty sample");
    // p·n/100 computed in integer thousandths when possible so that e.g.
    // 97.5 % of 100 lands exactly on rank 98 rather than 97.50000000000001.
    let scaled = (p * 1000.0).round() as u128 * n as u128;
    let rank = scaled.div_ceil(100_000) as usize;
    rank.clamp(1, n)
}

/// Nearest-rank percentile of an already sorted slice.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    sorted[nearest_rank(p, sorted.len()) - 1]
}

/// Sorts a copy and returns `(p2.5, median, p97.5)` by nearest rank.
pub fn band(values: &[f64]) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (
        percentile_sorted(&v, 2.5),
        percentile_sorted(&v, 50.0),
        percentile_sorted(&v, 97.5),
    )
}
