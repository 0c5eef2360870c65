//! Viscous and resistive fluxes written as `f_d = sum_e K_de dw/dx_e`.
//!
//! The blocks are assembled from the physical flux by the chain rule. With
//! `a = 1 / w5`:
//!
//! ```text
//! v_k = -a w_{1+k},   dv_k = -a dw_{1+k} + a^2 w_{1+k} dw5
//! B_m = -a w_{5+m},   dB_m = -a dw_{5+m} + a^2 w_{5+m} dw5
//! p / rho = -a,       d(p / rho) = a^2 dw5
//! ```
//!
//! (indices 0-based, so `w5` is `w[4]`).

use crate::error::{Error, Result};
use crate::flux::FluxVector;
use crate::state::{GasConfig, Primitive, NVAR};

pub type Mat9 = [[f64; NVAR]; NVAR];

/// The nine 9x9 blocks, `k[d][e]` multiplying `dw/dx_e` in the flux along `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KBlocks {
    pub k: [[Mat9; 3]; 3],
}

impl KBlocks {
    pub fn block(&self, d: usize, e: usize) -> &Mat9 {
        &self.k[d][e]
    }

    /// The assembled symmetric 27x27 matrix.
    pub fn assembled(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(3 * NVAR, 3 * NVAR, |r, c| {
            self.k[r / NVAR][c / NVAR][r % NVAR][c % NVAR]
        })
    }
}

#[inline]
fn kron(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Fills `out` with `K_de` for flux direction `d` and gradient direction `e`.
fn fill_block(w: &[f64; NVAR], mu: f64, eta: f64, kappa_r: f64, d: usize, e: usize, out: &mut Mat9) {
    let a = 1.0 / w[4];
    let a2 = a * a;
    let v = [-a * w[1], -a * w[2], -a * w[3]];
    let b = [-a * w[5], -a * w[6], -a * w[7]];
    *out = [[0.0; NVAR]; NVAR];

    // Coefficient `c` on d_e v_k in row `row`.
    let on_v = |out: &mut Mat9, row: usize, k: usize, c: f64| {
        out[row][1 + k] -= a * c;
        out[row][4] += a2 * w[1 + k] * c;
    };
    for k in 0..3 {
        for i in 0..3 {
            let t = mu * (kron(d, e) * kron(k, i) + kron(i, e) * kron(k, d))
                - (2.0 / 3.0) * mu * kron(i, d) * kron(k, e);
            if t != 0.0 {
                on_v(out, 1 + i, k, t);
                on_v(out, 4, k, v[i] * t);
            }
        }
    }

    // Heat flux, (kappa / R) d_d (p / rho).
    out[4][4] += kron(d, e) * kappa_r * a2;

    let on_b = |out: &mut Mat9, row: usize, m: usize, c: f64| {
        out[row][5 + m] -= a * c;
        out[row][4] += a2 * w[5 + m] * c;
    };
    for m in 0..3 {
        let energy = eta * (kron(d, e) * b[m] - kron(m, d) * b[e]);
        if energy != 0.0 {
            on_b(out, 4, m, energy);
        }
        for i in 0..3 {
            let c = eta * (kron(d, e) * kron(m, i) - kron(i, e) * kron(m, d));
            if c != 0.0 {
                on_b(out, 5 + i, m, c);
            }
        }
    }
}

pub fn k_blocks(w: &[f64; NVAR], gas: &GasConfig) -> Result<KBlocks> {
    if !(w[4] < 0.0) {
        return Err(Error::InvalidEntropyVariables(w[4]));
    }
    let mut k = [[[[0.0; NVAR]; NVAR]; 3]; 3];
    let kappa_r = gas.kappa / gas.rgas;
    for d in 0..3 {
        for e in 0..3 {
            fill_block(w, gas.mu, gas.eta, kappa_r, d, e, &mut k[d][e]);
        }
    }
    Ok(KBlocks { k })
}

/// Viscous flux directly from the physical gradients.
///
/// `grad_v[e][k] = d v_k / dx_e`, `grad_t[e] = dT / dx_e` with `T = p / (R rho)`,
/// `grad_b[e][m] = d B_m / dx_e`. Returns the fluxes along x, y and z.
pub fn viscous_flux_direct(
    q: &Primitive,
    grad_v: &[[f64; 3]; 3],
    grad_t: &[f64; 3],
    grad_b: &[[f64; 3]; 3],
    gas: &GasConfig,
) -> [FluxVector; 3] {
    let mu = gas.mu;
    let eta = gas.eta;
    let div_v = grad_v[0][0] + grad_v[1][1] + grad_v[2][2];
    let mut out = [[0.0; NVAR]; 3];
    for (d, f) in out.iter_mut().enumerate() {
        let mut tau = [0.0; 3];
        for (i, t) in tau.iter_mut().enumerate() {
            *t = mu * (grad_v[d][i] + grad_v[i][d]) - if i == d { 2.0 / 3.0 * mu * div_v } else { 0.0 };
            f[1 + i] = *t;
        }
        // -eta ((curl B) x B)_d = eta sum_m B_m (d_d B_m - d_m B_d)
        let resistive: f64 = (0..3).map(|m| q.b[m] * (grad_b[d][m] - grad_b[m][d])).sum::<f64>() * eta;
        f[4] = tau[0] * q.v[0] + tau[1] * q.v[1] + tau[2] * q.v[2] + gas.kappa * grad_t[d] + resistive;
        for i in 0..3 {
            f[5 + i] = eta * (grad_b[d][i] - grad_b[i][d]);
        }
    }
    out
}

/// `f_1 = K11 w_x + K12 w_y`, `f_2 = K21 w_x + K22 w_y`.
pub fn viscous_flux(w: &[f64; NVAR], grad_w: (&[f64; NVAR], &[f64; NVAR]), gas: &GasConfig) -> Result<[FluxVector; 2]> {
    if !(w[4] < 0.0) {
        return Err(Error::InvalidEntropyVariables(w[4]));
    }
    Ok(viscous_flux_unchecked(w, grad_w.0, grad_w.1, gas))
}

pub fn viscous_flux_unchecked(w: &[f64; NVAR], wx: &[f64; NVAR], wy: &[f64; NVAR], gas: &GasConfig) -> [FluxVector; 2] {
    let kappa_r = gas.kappa / gas.rgas;
    let mut block = [[0.0; NVAR]; NVAR];
    let mut out = [[0.0; NVAR]; 2];
    for (d, f) in out.iter_mut().enumerate() {
        for (e, g) in [wx, wy].into_iter().enumerate() {
            fill_block(w, gas.mu, gas.eta, kappa_r, d, e, &mut block);
            for (fi, row) in f.iter_mut().zip(&block) {
                *fi += row.iter().zip(g).map(|(k, x)| k * x).sum::<f64>();
            }
        }
    }
    out
}

/// Same flux as [`viscous_flux_unchecked`], evaluated by mapping the
/// entropy gradients to velocity, temperature and field gradients and calling
/// [`viscous_flux_direct`]. Much cheaper than forming the K blocks.
pub fn viscous_flux_chain(w: &[f64; NVAR], wx: &[f64; NVAR], wy: &[f64; NVAR], gas: &GasConfig) -> [FluxVector; 2] {
    let a = 1.0 / w[4];
    let q = Primitive {
        rho: 1.0,
        v: [-w[1] * a, -w[2] * a, -w[3] * a],
        p: 1.0,
        b: [-w[5] * a, -w[6] * a, -w[7] * a],
        psi: 0.0,
    };
    let mut gv = [[0.0; 3]; 3];
    let mut gt = [0.0; 3];
    let mut gb = [[0.0; 3]; 3];
    for (e, g) in [wx, wy].into_iter().enumerate() {
        let a2g = a * a * g[4];
        for k in 0..3 {
            gv[e][k] = -a * g[1 + k] + a2g * w[1 + k];
            gb[e][k] = -a * g[5 + k] + a2g * w[5 + k];
        }
        gt[e] = a2g / gas.rgas;
    }
    let [f1, f2, _] = viscous_flux_direct(&q, &gv, &gt, &gb, gas);
    [f1, f2]
}

/// Bassi-Rebay interface values: arithmetic averages of both traces.
pub fn br1_interface(
    w_l: &[f64; NVAR],
    w_r: &[f64; NVAR],
    fv_l: &FluxVector,
    fv_r: &FluxVector,
) -> ([f64; NVAR], FluxVector) {
    (
        std::array::from_fn(|k| 0.5 * (w_l[k] + w_r[k])),
        std::array::from_fn(|k| 0.5 * (fv_l[k] + fv_r[k])),
    )
}
