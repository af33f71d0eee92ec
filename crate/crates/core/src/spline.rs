//! Natural cubic spline with analytic first and second derivatives.

/// Piecewise cubic interpolant with zero second derivative at both ends.
///
/// The second derivative is piecewise linear, so it is continuous but has
/// kinks at every knot.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    ms: Vec<f64>,
}

impl NaturalSpline {
    /// Builds the spline. Callers guarantee `xs` strictly increasing and at
    /// least two knots; the tabulated-potential loader checks both.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2);
        let n = xs.len();
        let mut ms = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas sweep).
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i] = (h0 + h1) / 3.0;
                upper[i] = h1 / 6.0;
                rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
                if i > 1 {
                    let w = (h0 / 6.0) / diag[i - 1];
                    diag[i] -= w * upper[i - 1];
                    rhs[i] -= w * rhs[i - 1];
                }
            }
            ms[n - 2] = rhs[n - 2] / diag[n - 2];
            for i in (1..n - 2).rev() {
                ms[i] = (rhs[i] - upper[i] * ms[i + 1]) / diag[i];
            }
        }
        Self { xs, ys, ms }
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Second derivatives at the knots.
    pub fn knot_curvatures(&self) -> &[f64] {
        &self.ms
    }

    pub fn first(&self) -> f64 {
        self.xs[0]
    }

    pub fn last(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Index `i` of the interval `[x_i, x_{i+1}]` containing `x` (clamped).
    fn interval(&self, x: f64) -> usize {
        let upper = self.xs.partition_point(|&k| k <= x);
        upper.clamp(1, self.xs.len() - 1) - 1
    }

    /// Value, first and second derivative at `x`. No range check.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let i = self.interval(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (m0, m1) = (self.ms[i], self.ms[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let curvature = a * m0 + b * m1;
        (value, slope, curvature)
    }
}
