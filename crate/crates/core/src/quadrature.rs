//! Gauss–Legendre rules and Legendre polynomial evaluation.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        let n = n.max(1);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, p_prev) = legendre_pair(n, x);
                dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (p, p_prev) = legendre_pair(n, x);
            dp = if (x * x - 1.0).abs() > 0.0 {
                n as f64 * (x * p - p_prev) / (x * x - 1.0)
            } else {
                dp
            };
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    /// Nodes and weights mapped affinely to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (mid + half * x, half * w))
            .collect()
    }

    /// The rule repeated on `panels` equal subintervals of `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .flat_map(|p| {
                let lo = a + h * p as f64;
                self.mapped(lo, lo + h)
            })
            .collect()
    }
}

/// `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Values of `d^k/dξ^k P_j(ξ)` for `k ≤ max_order`, `j ≤ max_degree`,
/// indexed `[k][j]`.
pub fn legendre_derivatives(xi: f64, max_degree: usize, max_order: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; max_degree + 1]; max_order + 1];
    for k in 0..=max_order {
        for j in 0..=max_degree {
            table[k][j] = if j == 0 {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            } else if j == 1 {
                match k {
                    0 => xi,
                    1 => 1.0,
                    _ => 0.0,
                }
            } else {
                // differentiate (j) P_j = (2j-1) ξ P_{j-1} - (j-1) P_{j-2} k times
                let jf = j as f64;
                let lower = if k > 0 { table[k - 1][j - 1] } else { 0.0 };
                ((2.0 * jf - 1.0) * (xi * table[k][j - 1] + k as f64 * lower) - (jf - 1.0) * table[k][j - 2]) / jf
            };
        }
    }
    table
}

/// Chebyshev points of the first kind on `[a, b]`, ascending.
pub fn chebyshev_points(n: usize, a: f64, b: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..n)
        .map(|k| {
            let x = (PI * (2.0 * k as f64 + 1.0) / (2.0 * n as f64)).cos();
            0.5 * (a + b) + 0.5 * (b - a) * x
        })
        .collect();
    pts.reverse();
    pts
}

/// `n` uniformly spaced angles in `[0, 2π)`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}
