//! Chebyshev–Lobatto nodes and differentiation matrices.

use std::f64::consts::PI;

/// Nodes `z_i = cos(π i / (p-1))`, `i = 0..p`, ordered from `+1` down to `-1`.
pub fn lobatto_nodes(points: usize) -> Vec<f64> {
    let n = points - 1;
    (0..points)
        .map(|i| {
            // symmetric form keeps z exactly antisymmetric about the midpoint
            (PI * (n as f64 - 2.0 * i as f64) / (2.0 * n as f64)).sin()
        })
        .collect()
}

/// First- and second-derivative collocation matrices on the Lobatto nodes,
/// row-major.
///
/// Node differences use the product-of-sines identity and every diagonal is
/// the negative off-diagonal row sum, which keeps round-off near
/// `O(ε N²)` instead of `O(ε N⁴)` for the second derivative.
pub fn differentiation_matrices(points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points - 1;
    let half = PI / (2.0 * n as f64);
    let c = |i: usize| {
        let base = if i == 0 || i == n { 2.0 } else { 1.0 };
        if i % 2 == 0 {
            base
        } else {
            -base
        }
    };
    // inv_dx[i][j] = 1 / (z_i − z_j)
    let mut inv_dx = vec![0.0; points * points];
    for i in 0..points {
        for j in 0..points {
            if i != j {
                let dx = 2.0 * (half * (i + j) as f64).sin() * (half * (j as f64 - i as f64)).sin();
                inv_dx[i * points + j] = 1.0 / dx;
            }
        }
    }
    let mut d1 = vec![0.0; points * points];
    for i in 0..points {
        let mut row_sum = 0.0;
        for j in 0..points {
            if i != j {
                let v = c(i) / c(j) * inv_dx[i * points + j];
                d1[i * points + j] = v;
                row_sum += v;
            }
        }
        d1[i * points + i] = -row_sum;
    }
    let mut d2 = vec![0.0; points * points];
    for i in 0..points {
        let mut row_sum = 0.0;
        for j in 0..points {
            if i != j {
                let v = 2.0
                    * inv_dx[i * points + j]
                    * (c(i) / c(j) * d1[i * points + i] - d1[i * points + j]);
                d2[i * points + j] = v;
                row_sum += v;
            }
        }
        d2[i * points + i] = -row_sum;
    }
    (d1, d2)
}

/// First-derivative collocation matrix on the Lobatto nodes, row-major.
#[cfg(test)]
pub fn differentiation_matrix(points: usize) -> Vec<f64> {
    differentiation_matrices(points).0
}

/// Row-major product of two square matrices.
#[cfg(test)]
pub fn square(a: &[f64], size: usize) -> Vec<f64> {
    let mut out = vec![0.0; size * size];
    for i in 0..size {
        for l in 0..size {
            let ail = a[i * size + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..size {
                out[i * size + j] += ail * a[l * size + j];
            }
        }
    }
    out
}
