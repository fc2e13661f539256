//! Finite-difference jets and quadrature on uniform grids.

use alloc::vec;
use alloc::vec::Vec;

/// Finite-difference weights for derivatives `0..=order` at `x0` from nodes `xs`
/// (Fornberg's recursion). Returns `w[d][j]`.
pub fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives of grid samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Jets {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

/// Accuracy of the stencils used by [`jets`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Second,
    Fourth,
}

/// Derivatives of uniformly spaced samples with spacing `h`.
///
/// Centered stencils in the interior, one-sided stencils of matching order at the ends.
pub fn jets(f: &[f64], h: f64, order: Order) -> Jets {
    let m = f.len();
    let (half, width) = match order {
        Order::Second => (1usize, 4usize),
        Order::Fourth => (2usize, 6usize),
    };
    assert!(m >= width, "grid too small for the requested stencil");
    let centered = {
        let xs: Vec<f64> = (0..=2 * half).map(|k| k as f64 - half as f64).collect();
        fd_weights(0.0, &xs, 2)
    };
    let mut d1 = vec![0.0; m];
    let mut d2 = vec![0.0; m];
    for i in 0..m {
        if i >= half && i + half < m {
            let mut a = 0.0;
            let mut b = 0.0;
            for k in 0..=2 * half {
                let v = f[i + k - half];
                a += centered[1][k] * v;
                b += centered[2][k] * v;
            }
            d1[i] = a / h;
            d2[i] = b / (h * h);
        } else {
            let start = if i < half { 0 } else { m - width };
            let xs: Vec<f64> = (0..width).map(|k| (start + k) as f64 - i as f64).collect();
            let w = fd_weights(0.0, &xs, 2);
            let mut a = 0.0;
            let mut b = 0.0;
            for k in 0..width {
                a += w[1][k] * f[start + k];
                b += w[2][k] * f[start + k];
            }
            d1[i] = a / h;
            d2[i] = b / (h * h);
        }
    }
    Jets { d1, d2 }
}

/// Running integral `F_i = ∫_{x_0}^{x_i} f` with a fourth-order cubic rule per cell.
pub fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len();
    let mut out = vec![0.0; m];
    if m < 2 {
        return out;
    }
    if m < 4 {
        for i in 1..m {
            out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
        }
        return out;
    }
    for i in 0..m - 1 {
        let cell = if i == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == m - 2 {
            h / 24.0 * (9.0 * f[m - 1] + 19.0 * f[m - 2] - 5.0 * f[m - 3] + f[m - 4])
        } else {
            h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        out[i + 1] = out[i] + cell;
    }
    out
}

/// Integral over the whole grid with the rule of [`cumulative_integral`].
pub fn integral(f: &[f64], h: f64) -> f64 {
    cumulative_integral(f, h).last().copied().unwrap_or(0.0)
}

/// Four-point cubic interpolation at the midpoint of each cell.
pub fn midpoint_values(f: &[f64]) -> Vec<f64> {
    let m = f.len();
    if m < 4 {
        return f.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    (0..m - 1)
        .map(|i| {
            if i == 0 {
                (5.0 * f[0] + 15.0 * f[1] - 5.0 * f[2] + f[3]) / 16.0
            } else if i == m - 2 {
                (5.0 * f[m - 1] + 15.0 * f[m - 2] - 5.0 * f[m - 3] + f[m - 4]) / 16.0
            } else {
                (-f[i - 1] + 9.0 * f[i] + 9.0 * f[i + 1] - f[i + 2]) / 16.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> (Vec<f64>, f64) {
        let h = 1.0 / (m - 1) as f64;
        ((0..m).map(|i| i as f64 * h).collect(), h)
    }

    #[test]
    fn fourth_order_jets_exact_on_quartics() {
        let (x, h) = grid(17);
        let f: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t + 3.0 * t.powi(3) - t.powi(4)).collect();
        let j = jets(&f, h, Order::Fourth);
        for (i, t) in x.iter().enumerate() {
            let d1 = -2.0 + 9.0 * t * t - 4.0 * t.powi(3);
            let d2 = 18.0 * t - 12.0 * t * t;
            assert!((j.d1[i] - d1).abs() < 1e-10, "{i}");
            assert!((j.d2[i] - d2).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn second_order_jets_exact_on_quadratics() {
        let (x, h) = grid(9);
        let f: Vec<f64> = x.iter().map(|t| t * (1.0 - t)).collect();
        let j = jets(&f, h, Order::Second);
        for (i, t) in x.iter().enumerate() {
            assert!((j.d1[i] - (1.0 - 2.0 * t)).abs() < 1e-12);
            assert!((j.d2[i] + 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cumulative_integral_exact_on_cubics() {
        let (x, h) = grid(11);
        let f: Vec<f64> = x.iter().map(|t| 1.0 + t - 4.0 * t.powi(3)).collect();
        let c = cumulative_integral(&f, h);
        for (i, t) in x.iter().enumerate() {
            let exact = t + t * t / 2.0 - t.powi(4);
            assert!((c[i] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn midpoint_interpolation_exact_on_cubics() {
        let (x, h) = grid(8);
        let f: Vec<f64> = x.iter().map(|t| t.powi(3) - t).collect();
        let mid = midpoint_values(&f);
        for (i, v) in mid.iter().enumerate() {
            let t = x[i] + 0.5 * h;
            assert!((v - (t.powi(3) - t)).abs() < 1e-14);
        }
    }
}
