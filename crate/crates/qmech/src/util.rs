//! Worker-pool plumbing for the embarrassingly parallel enumerations.
//!
//! `QMECH_THREADS` caps the worker count; it affects speed only, never
//! results, because work is split into fixed index ranges whose partial
//! results merge by commutative addition or ordered concatenation.

use std::ops::Range;

pub(crate) fn worker_count() -> usize {
    if let Ok(v) = std::env::var("QMECH_THREADS") {
        if let Ok(k) = v.trim().parse::<usize>() {
            if k >= 1 {
                return k.min(64);
            }
        }
    }
    std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
}

pub(crate) fn split_range(total: u64, parts: usize) -> Vec<Range<u64>> {
    let parts = parts.max(1) as u64;
    let chunk = total.div_ceil(parts).max(1);
    let mut out = Vec::new();
    let mut lo = 0;
    while lo < total {
        let hi = (lo + chunk).min(total);
        out.push(lo..hi);
        lo = hi;
    }
    out
}

/// Applies `f` to every range, in parallel when more than one, and returns
/// the results in range order.
pub(crate) fn map_ranges<T, F>(ranges: Vec<Range<u64>>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    if ranges.len() <= 1 {
        return ranges.into_iter().map(f).collect();
    }
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| scope.spawn(move || f(r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_everything_once() {
        for total in [0u64, 1, 7, 100] {
            for parts in [1usize, 2, 3, 8] {
                let ranges = split_range(total, parts);
                let mut covered = 0;
                let mut expected_next = 0;
                for r in &ranges {
                    assert_eq!(r.start, expected_next);
                    assert!(r.end > r.start);
                    covered += r.end - r.start;
                    expected_next = r.end;
                }
                assert_eq!(covered, total);
            }
        }
    }

    #[test]
    fn map_ranges_preserves_order() {
        let ranges = split_range(10, 3);
        let sums = map_ranges(ranges.clone(), |r| r.sum::<u64>());
        let direct: Vec<u64> = ranges.into_iter().map(|r| r.sum()).collect();
        assert_eq!(sums, direct);
    }
}
