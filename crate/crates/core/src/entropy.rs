/// Shannon entropy in bits of the distribution proportional to `counts`.
///
/// Zero counts contribute nothing (0·log₂0 = 0). A distribution with a
/// single non-zero count, or no mass at all, has entropy exactly 0.
pub fn shannon_entropy<I>(counts: I) -> f64
where
    I: IntoIterator<Item = u64>,
    I::IntoIter: Clone,
{
    let counts = counts.into_iter();
    let total: u64 = counts.clone().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let mut nonzero = 0usize;
    let mut h = 0.0;
    for c in counts.filter(|&c| c > 0) {
        nonzero += 1;
        let p = c as f64 / total;
        h -= p * p.log2();
    }
    if nonzero <= 1 {
        0.0
    } else {
        h.max(0.0)
    }
}
