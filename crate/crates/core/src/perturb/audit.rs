use serde::{Deserialize, Serialize};

/// Result of auditing a finite set of `(a, alpha)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub eps: f64,
    /// Size of the greedy maximal `eps`-separated subset in `a`.
    pub max_count: usize,
    /// `eps^{-2/3}`, the count allowed when every pair is separated and
    /// the `alpha` values span at most a unit interval.
    pub count_bound: f64,
    /// Measure of the union of the intervals of length `2 eps` centered at
    /// the selected points.
    pub covering_measure: f64,
    /// `2 eps^{1/3}`, or 0 for an empty set.
    pub measure_bound: f64,
    /// Index pairs `(i, j)`, `i < j`, violating the separation predicate.
    pub violations: Vec<(usize, usize)>,
}

/// `|alpha - alpha'| >= |a - a'|^{2/3}`, up to rounding in the last bits.
pub fn separation_predicate(p: (f64, f64), q: (f64, f64)) -> bool {
    (p.1 - q.1).abs() >= (p.0 - q.0).abs().powf(2.0 / 3.0) * (1.0 - 1e-12)
}

pub fn separation_audit(pairs: &[(f64, f64)], eps: f64) -> AuditReport {
    let mut violations = Vec::new();
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            if !separation_predicate(pairs[i], pairs[j]) {
                violations.push((i, j));
            }
        }
    }
    let mut a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    a.sort_by(f64::total_cmp);
    let mut count = 0usize;
    let mut last = f64::NEG_INFINITY;
    let mut covered = 0.0;
    for x in a {
        if x - last >= eps * (1.0 - 1e-12) {
            covered += (2.0 * eps).min(x - last);
            count += 1;
            last = x;
        }
    }
    AuditReport {
        eps,
        max_count: count,
        count_bound: eps.powf(-2.0 / 3.0),
        covering_measure: covered,
        measure_bound: if pairs.is_empty() { 0.0 } else { 2.0 * eps.cbrt() },
        violations,
    }
}

/// Extremal set obeying the predicate: `a_k = k eps`, `alpha_k = k eps^{2/3}`
/// for `alpha_k < 1`.
pub fn compliant_pairs(eps: f64) -> Vec<(f64, f64)> {
    let step = eps.powf(2.0 / 3.0);
    let n = (1.0 / step - 1e-9).ceil() as usize;
    (0..n).map(|k| (k as f64 * eps, k as f64 * step)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set() {
        let r = separation_audit(&[], 1e-2);
        assert_eq!(r.max_count, 0);
        assert_eq!(r.measure_bound, 0.0);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn close_pair_violates() {
        let r = separation_audit(&[(0.5, 0.2), (0.51, 0.201)], 1e-2);
        assert_eq!(r.violations, vec![(0, 1)]);
    }

    #[test]
    fn compliant_set_has_no_violations() {
        for eps in [1e-1, 1e-2, 1e-3] {
            let p = compliant_pairs(eps);
            let r = separation_audit(&p, eps);
            assert!(r.violations.is_empty());
            assert_eq!(r.max_count, p.len());
            assert_eq!(r.max_count as f64, eps.powf(-2.0 / 3.0).ceil());
            assert!(r.covering_measure <= r.measure_bound);
        }
    }

    #[test]
    fn covering_measure_of_overlapping_cover() {
        // points at 0, 1, 3 with eps = 1: intervals [-1, 1], [0, 2], [2, 4]
        let r = separation_audit(&[(0.0, 0.0), (1.0, 1.0), (3.0, 3.0)], 1.0);
        assert_eq!(r.max_count, 3);
        assert!((r.covering_measure - 5.0).abs() < 1e-12);
    }

    #[test]
    fn measure_bound_value() {
        let r = separation_audit(&[(0.0, 0.0)], 1e-2);
        assert!((r.measure_bound - 0.430886938).abs() < 1e-8);
        assert_eq!(r.max_count, 1);
    }
}
