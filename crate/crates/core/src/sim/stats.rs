//! Empirical distribution helpers.

/// Points `(x_(i), i/n)` of the empirical CDF of `values`, sorted ascending.
/// NaNs are dropped.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Median; the mean of the two middle values for even lengths. `None` when
/// empty.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[f64::NEG_INFINITY, 1.0, 2.0]), Some(1.0));
    }

    #[test]
    fn cdf_example() {
        let c = empirical_cdf(&[3.0, 1.0, 2.0]);
        assert_eq!(c, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        assert!(empirical_cdf(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn cdf_is_a_distribution(values in proptest::collection::vec(-100.0f64..100.0, 1..200)) {
            let c = empirical_cdf(&values);
            prop_assert_eq!(c.len(), values.len());
            for w in c.windows(2) {
                prop_assert!(w[0].0 <= w[1].0);
                prop_assert!(w[0].1 < w[1].1);
            }
            prop_assert!(c[0].1 > 0.0);
            prop_assert_eq!(c.last().unwrap().1, 1.0);
        }
    }
}
