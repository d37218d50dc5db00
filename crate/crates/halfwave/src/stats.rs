//! Small least-squares helpers used by the scaling reports.

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    linear_fit(points.into_iter().map(|(x, y)| (x.ln(), y.ln()))).0
}

/// Least-squares line y = a·x + b; returns (a, b).
pub fn linear_fit(points: impl IntoIterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (a, (sy - a * sx) / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let s = loglog_slope((1..10).map(|i| (i as f64, 3.0 * (i as f64).powf(-4.0))));
        assert!((s + 4.0).abs() < 1e-12);
    }
}
