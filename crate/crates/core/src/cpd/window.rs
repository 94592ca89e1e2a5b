use super::CpdError;

/// Concatenation `[x(t), x(t-1), ..., x(t-k+1)]` of `k` observations,
/// most recent first.
pub type WindowVector = Vec<f64>;

/// Builds one window per time `t = k..=T` (1-based), so the output has
/// `T - k + 1` entries.
pub fn build_windows(rows: &[Vec<f64>], k: usize) -> Result<Vec<WindowVector>, CpdError> {
    if k == 0 {
        return Err(CpdError::InvalidConfig("window length k must be at least 1".into()));
    }
    if rows.len() < k {
        return Err(CpdError::SeriesTooShort {
            len: rows.len(),
            needed: k,
        });
    }
    Ok((k - 1..rows.len())
        .map(|i| window_ending_at(rows, i, k))
        .collect())
}

/// Window whose newest observation is `rows[end]`.
pub(crate) fn window_ending_at<R: AsRef<[f64]>>(rows: &[R], end: usize, k: usize) -> WindowVector {
    let mut w = Vec::with_capacity(k * rows[end].as_ref().len());
    for j in 0..k {
        w.extend_from_slice(rows[end - j].as_ref());
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn k1_is_identity() {
        let rows = col(&[3.0, 1.0, 4.0]);
        assert_eq!(build_windows(&rows, 1).unwrap(), rows);
    }

    #[test]
    fn most_recent_first() {
        let w = build_windows(&col(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(w, vec![vec![2.0, 1.0], vec![3.0, 2.0], vec![4.0, 3.0]]);
    }

    #[test]
    fn multivariate_dimension() {
        let rows = vec![vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]];
        let w = build_windows(&rows, 3).unwrap();
        assert_eq!(w, vec![vec![3.0, 30.0, 2.0, 20.0, 1.0, 10.0]]);
    }

    #[test]
    fn too_short_or_zero_k() {
        assert!(matches!(
            build_windows(&col(&[1.0]), 2),
            Err(CpdError::SeriesTooShort { len: 1, needed: 2 })
        ));
        assert!(matches!(build_windows(&col(&[1.0]), 0), Err(CpdError::InvalidConfig(_))));
    }
}
