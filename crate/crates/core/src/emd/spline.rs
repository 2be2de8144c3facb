//! Natural cubic spline evaluated on an integer grid.

/// Interpolates `(xs, ys)` with a natural cubic spline and samples it at
/// `0, 1, ..., n - 1`. `xs` must be strictly increasing with at least two
/// knots; points outside the knot range are extrapolated from the end
/// polynomial pieces.
pub(crate) fn natural_cubic_on_grid(xs: &[f64], ys: &[f64], n: usize) -> Vec<f64> {
    let k = xs.len();
    debug_assert!(k >= 2 && k == ys.len());
    let m = second_derivatives(xs, ys);
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for t in 0..n {
        let x = t as f64;
        while seg + 2 < k && x > xs[seg + 1] {
            seg += 1;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let v = a * ys[seg]
            + b * ys[seg + 1]
            + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
        out.push(v);
    }
    out
}

/// Second derivatives at the knots with zero curvature at both ends.
fn second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let k = xs.len();
    let mut m = vec![0.0; k];
    if k < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations.
    let inner = k - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for i in 1..k - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for i in 1..inner {
        let lower = xs[i + 1] - xs[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[inner] = rhs[inner - 1] / diag[inner - 1];
    for i in (0..inner - 1).rev() {
        m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
    }
    m
}
