use super::Dim;

/// Number of top Fock levels per mode excluded from residual checks.
pub const DEFAULT_GUARD_LEVELS: usize = 2;

/// Basis indices of `space` whose level in every mode `k` is below
/// `nominal[k] - guard`.
///
/// `nominal` may be smaller than the actual dimensions when operators were
/// built on a padded workspace; residuals are then read off the region the
/// caller asked about, far from the real cutoff.
pub fn guarded_indices(space: &[Dim], nominal: &[usize], guard: usize) -> Vec<usize> {
    assert_eq!(space.len(), nominal.len(), "one nominal size per mode");
    let dims: Vec<usize> = space.iter().map(|d| d.get()).collect();
    let limits: Vec<usize> = nominal
        .iter()
        .zip(&dims)
        .map(|(&n, &d)| n.min(d).saturating_sub(guard))
        .collect();
    let total: usize = dims.iter().product();
    let mut out = Vec::new();
    let mut digits = vec![0usize; dims.len()];
    for index in 0..total {
        if digits.iter().zip(&limits).all(|(d, l)| d < l) {
            out.push(index);
        }
        // advance the mixed-radix counter, last mode fastest
        for k in (0..dims.len()).rev() {
            digits[k] += 1;
            if digits[k] < dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

/// Guarded subspace of `space` itself: the top `guard` levels of each mode dropped.
pub fn guarded_subspace(space: &[Dim], guard: usize) -> Vec<usize> {
    let nominal: Vec<usize> = space.iter().map(|d| d.get()).collect();
    guarded_indices(space, &nominal, guard)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(ns: &[usize]) -> Vec<Dim> {
        ns.iter().map(|&n| Dim::new(n).unwrap()).collect()
    }

    #[test]
    fn single_mode_drops_top_levels() {
        assert_eq!(guarded_subspace(&dims(&[5]), 2), vec![0, 1, 2]);
        assert_eq!(guarded_subspace(&dims(&[5]), 0), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn two_modes_follow_slowest_first_ordering() {
        // (3, 4): keep n0 < 1, n1 < 2 → indices 0, 1
        assert_eq!(guarded_subspace(&dims(&[3, 4]), 2), vec![0, 1]);
        // (4, 3) guard 1: n0 < 3, n1 < 2
        assert_eq!(
            guarded_subspace(&dims(&[4, 3]), 1),
            vec![0, 1, 3, 4, 6, 7]
        );
    }

    #[test]
    fn nominal_region_inside_padded_space() {
        // actual (2, 6), nominal (2, 4), guard 2 → n0 < 0: empty
        assert!(guarded_indices(&dims(&[2, 6]), &[2, 4], 2).is_empty());
        // actual (3, 6), nominal (3, 4), guard 1 → n0 < 2, n1 < 3
        assert_eq!(
            guarded_indices(&dims(&[3, 6]), &[3, 4], 1),
            vec![0, 1, 2, 6, 7, 8]
        );
    }
}
