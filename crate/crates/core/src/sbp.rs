//! Legendre-Gauss-Lobatto collocation operators with the summation-by-parts
//! property `M D + (M D)^T = B`.

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Nodal operators on the reference interval `[-1, 1]`.
///
/// Built once and shared read-only by every kernel.
#[derive(Debug, Clone)]
pub struct SbpOperators {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `dmat[i][j] = l_j'(xi_i)`.
    pub dmat: Vec<Vec<f64>>,
    /// Diagonal of the mass matrix, identical to `weights`.
    pub mass: Vec<f64>,
    /// `qmat = M D`.
    pub qmat: Vec<Vec<f64>>,
    /// Diagonal of the boundary matrix, `(-1, 0, ..., 0, 1)`.
    pub bmat: Vec<f64>,
}

impl SbpOperators {
    pub fn new(order: usize) -> Result<Self> {
        let (nodes, weights) = lgl_nodes_weights(order)?;
        let dmat = derivative_matrix(&nodes);
        let n = order + 1;
        let qmat = (0..n)
            .map(|i| (0..n).map(|j| weights[i] * dmat[i][j]).collect())
            .collect();
        let mut bmat = vec![0.0; n];
        bmat[0] = -1.0;
        bmat[order] = 1.0;
        Ok(Self {
            order,
            mass: weights.clone(),
            nodes,
            weights,
            dmat,
            qmat,
            bmat,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.order + 1
    }

    /// Largest entry of `|Q + Q^T - B|`.
    pub fn sbp_defect(&self) -> f64 {
        let n = self.num_nodes();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let b = if i == j { self.bmat[i] } else { 0.0 };
                worst = worst.max((self.qmat[i][j] + self.qmat[j][i] - b).abs());
            }
        }
        worst
    }

    /// Applies `D` to nodal samples.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        self.dmat
            .iter()
            .map(|row| row.iter().zip(values).map(|(d, v)| d * v).sum())
            .collect()
    }
}

/// Legendre polynomial `L_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    match n {
        0 => (1.0, 0.0),
        1 => (x, 1.0),
        _ => {
            let (mut l_prev2, mut l_prev) = (1.0, x);
            let (mut d_prev2, mut d_prev) = (0.0, 1.0);
            for k in 2..=n {
                let kf = k as f64;
                let l = ((2.0 * kf - 1.0) * x * l_prev - (kf - 1.0) * l_prev2) / kf;
                let d = d_prev2 + (2.0 * kf - 1.0) * l_prev;
                l_prev2 = l_prev;
                l_prev = l;
                d_prev2 = d_prev;
                d_prev = d;
            }
            (l_prev, d_prev)
        }
    }
}

/// Returns `(q, q', L_N)` with `q = L_{N+1} - L_{N-1}`, whose roots are the
/// LGL nodes.
fn lobatto_q(n: usize, x: f64) -> (f64, f64, f64) {
    let (l_nm1, d_nm1) = legendre(n - 1, x);
    let (l_n, _) = legendre(n, x);
    let nf = n as f64;
    let l_np1 = ((2.0 * nf + 1.0) * x * l_n - nf * l_nm1) / (nf + 1.0);
    let d_np1 = d_nm1 + (2.0 * nf + 1.0) * l_n;
    (l_np1 - l_nm1, d_np1 - d_nm1, l_n)
}

/// LGL nodes and weights for polynomial degree `order`.
///
/// Interior nodes come from Newton iteration on `L_{N+1} - L_{N-1}` (which
/// vanishes exactly where `L_N'` does) started from Chebyshev-Lobatto points.
pub fn lgl_nodes_weights(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::Config(
            "polynomial order must be at least 1 for LGL collocation".into(),
        ));
    }
    let n = order;
    let nf = n as f64;
    let mut nodes = vec![0.0; n + 1];
    let mut weights = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    weights[0] = 2.0 / (nf * (nf + 1.0));
    weights[n] = weights[0];

    for j in 1..=(n - 1) / 2 {
        let mut x = -(std::f64::consts::PI * j as f64 / nf).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (q, dq, _) = lobatto_q(n, x);
            let delta = -q / dq;
            x += delta;
            if delta.abs() <= NEWTON_TOL * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, l_n) = lobatto_q(n, x);
        nodes[j] = x;
        nodes[n - j] = -x;
        weights[j] = 2.0 / (nf * (nf + 1.0) * l_n * l_n);
        weights[n - j] = weights[j];
    }
    if n % 2 == 0 {
        let (_, _, l_n) = lobatto_q(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (nf * (nf + 1.0) * l_n * l_n);
    }
    Ok((nodes, weights))
}

/// Collocation derivative matrix via barycentric weights.
///
/// Diagonal entries use the negative-sum trick so every row sums to zero.
pub fn derivative_matrix(nodes: &[f64]) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            1.0 / (0..n)
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product::<f64>()
        })
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[i][j] = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                diag -= d[i][j];
            }
        }
        d[i][i] = diag;
    }
    d
}
