use serde::Serialize;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(xs: &[f64]) -> f64 {
    let v = sorted(xs);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Nearest-rank percentile, `p` in (0, 100].
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    let v = sorted(xs);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `y` on `x`. None with fewer than two distinct
/// x values.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if x.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - (intercept + slope * xi)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LinearFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn order_statistics() {
        let xs = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(median(&xs), 3.0);
        assert_eq!(median(&xs[..4]), 3.0);
        assert_eq!(percentile(&xs, 95.0), 5.0);
        assert_eq!(percentile(&xs, 20.0), 1.0);
        assert_eq!(percentile(&xs, 40.0), 2.0);
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&hundred, 95.0), 95.0);
    }

    #[test]
    fn fit_of_known_points() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.5, 2.5, 5.5, 6.5];
        let fit = linear_fit(&x, &y).unwrap();
        // sxy = 9, sxx = 5, residuals 0.2, -0.6, 0.6, -0.2, ss_tot = 17
        assert!((fit.slope - 1.8).abs() < 1e-12);
        assert!((fit.intercept - 1.3).abs() < 1e-12);
        assert!((fit.r2 - (1.0 - 0.8 / 17.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fit() {
        assert_eq!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]), None);
        assert_eq!(linear_fit(&[1.0], &[2.0]), None);
    }

    proptest! {
        #[test]
        fn exact_lines_fit_perfectly(a in -100.0f64..100.0, b in -100.0f64..100.0, n in 2usize..40) {
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 3.0).collect();
            let y: Vec<f64> = x.iter().map(|xi| a * xi + b).collect();
            let fit = linear_fit(&x, &y).unwrap();
            prop_assert!((fit.slope - a).abs() < 1e-6);
            prop_assert!((fit.intercept - b).abs() < 1e-6);
            prop_assert!(fit.r2 > 1.0 - 1e-9);
        }

        #[test]
        fn median_lies_within_range(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let m = median(&xs);
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= m && m <= hi);
            prop_assert!(percentile(&xs, 95.0) >= m);
        }
    }
}
