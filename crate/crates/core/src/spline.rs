//! Interpolating cubic splines on uniform knots, in one and two dimensions.
//!
//! The 1D interpolant is the cubic B-spline on a clamped knot vector whose
//! interior knots sit at the data sites, closed with zero end curvature.
//! That space is exactly the natural cubic spline, which is what is solved
//! for here (second-derivative form, tridiagonal system).
//!
//! The surface interpolant is the tensor product of the 1D operator.

/// Natural cubic spline through `values` at `x0 + i·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    /// `values.len()` must be at least 2.
    pub fn new(x0: f64, h: f64, values: &[f64]) -> Self {
        assert!(values.len() >= 2, "spline needs at least two samples");
        let n = values.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // interior rows: M[i-1] + 4 M[i] + M[i+1] = 6 (y[i-1] - 2 y[i] + y[i+1]) / h²
            let m = n - 2;
            let mut diag = vec![4.0; m];
            let mut rhs: Vec<f64> = (1..n - 1)
                .map(|i| 6.0 * (values[i - 1] - 2.0 * values[i] + values[i + 1]) / (h * h))
                .collect();
            for i in 1..m {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - second[i + 2]) / diag[i];
            }
        }
        CubicSpline {
            x0,
            h,
            values: values.to_vec(),
            second,
        }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.values.len();
        let s = ((x - self.x0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        (i, s - i as f64)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let u = 1.0 - t;
        let h2 = self.h * self.h / 6.0;
        u * self.values[i]
            + t * self.values[i + 1]
            + h2 * ((u * u * u - u) * self.second[i] + (t * t * t - t) * self.second[i + 1])
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let u = 1.0 - t;
        let h = self.h;
        (self.values[i + 1] - self.values[i]) / h
            + h / 6.0 * (-(3.0 * u * u - 1.0) * self.second[i] + (3.0 * t * t - 1.0) * self.second[i + 1])
    }
}

/// Tensor-product cubic spline through a square grid of heights on `[0, span]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct BicubicSurface {
    divisions: usize,
    span: f64,
    /// Row-major, `values[j * (divisions + 1) + i]` at `(i·h, j·h)`.
    values: Vec<f64>,
    rows: Vec<CubicSpline>,
}

impl BicubicSurface {
    pub fn new(divisions: usize, span: f64, values: &[f64]) -> Self {
        let n = divisions + 1;
        assert_eq!(values.len(), n * n, "grid must be (divisions + 1)²");
        let h = span / divisions as f64;
        let rows = (0..n).map(|j| CubicSpline::new(0.0, h, &values[j * n..(j + 1) * n])).collect();
        BicubicSurface {
            divisions,
            span,
            values: values.to_vec(),
            rows,
        }
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn spacing(&self) -> f64 {
        self.span / self.divisions as f64
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let column: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        CubicSpline::new(0.0, self.spacing(), &column).eval(y)
    }

    /// Height and the two partial derivatives at `(x, y)`.
    pub fn eval_with_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let h = self.spacing();
        let column: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        let dcolumn: Vec<f64> = self.rows.iter().map(|r| r.derivative(x)).collect();
        let cy = CubicSpline::new(0.0, h, &column);
        let dx = CubicSpline::new(0.0, h, &dcolumn).eval(y);
        (cy.eval(y), dx, cy.derivative(y))
    }

    /// Evaluate on the tensor lattice `xs × ys`; result is row-major in `ys`.
    pub fn sample_lattice(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let h = self.spacing();
        // along x for every control row, then along y for every sample column
        let partial: Vec<Vec<f64>> = self.rows.iter().map(|r| xs.iter().map(|&x| r.eval(x)).collect()).collect();
        let mut out = vec![0.0; xs.len() * ys.len()];
        let mut column = vec![0.0; partial.len()];
        for (ix, _) in xs.iter().enumerate() {
            for (j, row) in partial.iter().enumerate() {
                column[j] = row[ix];
            }
            let spline = CubicSpline::new(0.0, h, &column);
            for (iy, &y) in ys.iter().enumerate() {
                out[iy * xs.len() + ix] = spline.eval(y);
            }
        }
        out
    }
}

/// `n` evenly spaced points covering `[0, span]` inclusive.
pub fn lattice_points(n: usize, span: f64) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_data_and_linear_functions() {
        let data: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let s = CubicSpline::new(0.0, 0.5, &data);
        for (i, v) in data.iter().enumerate() {
            assert!((s.eval(i as f64 * 0.5) - v).abs() < 1e-12);
        }
        let line: Vec<f64> = (0..6).map(|i| 2.0 + 3.0 * i as f64).collect();
        let s = CubicSpline::new(0.0, 1.0, &line);
        for k in 0..50 {
            let x = k as f64 * 0.1;
            assert!((s.eval(x) - (2.0 + 3.0 * x)).abs() < 1e-12);
            assert!((s.derivative(x) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_continuous_at_knots() {
        let data = [0.0, 1.0, -2.0, 0.5, 3.0, 0.0];
        let s = CubicSpline::new(0.0, 1.0, &data);
        let e = 1e-5;
        for k in 1..5 {
            let x = k as f64;
            let left = (s.derivative(x - e) - s.derivative(x - 2.0 * e)) / e;
            let right = (s.derivative(x + 2.0 * e) - s.derivative(x + e)) / e;
            assert!((left - right).abs() < 1e-3, "knot {k}: {left} vs {right}");
        }
    }

    #[test]
    fn surface_interpolates_grid() {
        let n = 6;
        let values: Vec<f64> = (0..n * n).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let surf = BicubicSurface::new(n - 1, 2.0, &values);
        let pts = lattice_points(n, 2.0);
        let lattice = surf.sample_lattice(&pts, &pts);
        for (a, b) in lattice.iter().zip(&values) {
            assert!((a - b).abs() < 1e-9);
        }
        for j in 0..n {
            for i in 0..n {
                assert!((surf.eval(pts[i], pts[j]) - values[j * n + i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let n = 7;
        let values: Vec<f64> = (0..n * n).map(|k| ((k as f64) * 0.37).cos()).collect();
        let surf = BicubicSurface::new(n - 1, 3.0, &values);
        let (x, y, e) = (1.23, 0.77, 1e-6);
        let (z, gx, gy) = surf.eval_with_gradient(x, y);
        assert!((z - surf.eval(x, y)).abs() < 1e-12);
        assert!((gx - (surf.eval(x + e, y) - surf.eval(x - e, y)) / (2.0 * e)).abs() < 1e-6);
        assert!((gy - (surf.eval(x, y + e) - surf.eval(x, y - e)) / (2.0 * e)).abs() < 1e-6);
    }
}
