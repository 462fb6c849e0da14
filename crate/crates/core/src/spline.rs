//! Natural cubic spline on uniformly spaced samples, used for tabulated mobilities.

use crate::linalg::Tridiagonal;

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x0: f64,
    step: f64,
    values: Vec<f64>,
    // second derivatives at the knots
    moments: Vec<f64>,
}

impl CubicSpline {
    /// Interpolates `values[k]` at `x0 + k * step`. Needs at least two samples.
    pub fn uniform(x0: f64, step: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 2, "spline needs at least two samples");
        let mut moments = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut sys = Tridiagonal::zeros(m);
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                sys.diag[i] = 4.0;
                if i > 0 {
                    sys.lower[i] = 1.0;
                }
                if i + 1 < m {
                    sys.upper[i] = 1.0;
                }
                rhs[i] = 6.0 * (values[i] - 2.0 * values[i + 1] + values[i + 2]) / (step * step);
            }
            let inner = sys
                .solve(&rhs)
                .expect("spline system is diagonally dominant");
            moments[1..n - 1].copy_from_slice(&inner);
        }
        Self {
            x0,
            step,
            values,
            moments,
        }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.values.len();
        let s = ((x - self.x0) / self.step).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        (k, s - k as f64)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (k, t) = self.locate(x);
        let h = self.step;
        let (a, b) = (1.0 - t, t);
        a * self.values[k]
            + b * self.values[k + 1]
            + ((a * a * a - a) * self.moments[k] + (b * b * b - b) * self.moments[k + 1]) * h * h
                / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (k, t) = self.locate(x);
        let h = self.step;
        let (a, b) = (1.0 - t, t);
        (self.values[k + 1] - self.values[k]) / h
            + (-(3.0 * a * a - 1.0) * self.moments[k] + (3.0 * b * b - 1.0) * self.moments[k + 1])
                * h
                / 6.0
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots_and_reproduces_lines() {
        let s = CubicSpline::uniform(0.0, 0.25, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        for k in 0..5 {
            assert!((s.value(0.25 * k as f64) - 0.5 * k as f64).abs() < 1e-14);
        }
        assert!((s.value(0.6) - 1.2).abs() < 1e-14);
        assert!((s.derivative(0.6) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let vals: Vec<f64> = (0..21).map(|k| (k as f64 * 0.05 * 3.0).sin()).collect();
        let s = CubicSpline::uniform(0.0, 0.05, vals);
        for &x in &[0.13, 0.41, 0.77] {
            let fd = (s.value(x + 1e-6) - s.value(x - 1e-6)) / 2e-6;
            assert!((fd - s.derivative(x)).abs() < 1e-6);
        }
    }
}
