//! Advective fluxes: physical flux, logarithmic mean, entropy conservative
//! and entropy stable two-point fluxes, and wave speed bounds.
//!
//! Every kernel is written for the x-direction; the y-direction versions
//! swap `(v1, v2)` and `(B1, B2)` on input and output.

use crate::error::{Error, Result};
use crate::state::{
    conserved_from_entropy_vars, entropy_vars_prim, primitive, Dir, Primitive, State, NVAR,
};

pub type FluxVector = [f64; NVAR];

/// Below this distance of `aL / aR` from one the logarithmic mean switches to
/// its series expansion.
pub const LOG_MEAN_SERIES_THRESHOLD: f64 = 1e-4;

/// Interface dissipation added on top of the entropy conservative flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dissipation {
    None,
    /// `-1/2 lambda_max H [[w]]` with `H = du/dw` from central differences
    /// using relative step `h_step`.
    LlfEntropy { h_step: f64 },
    /// `-1/2 R |Lambda| R^T [[w]]` from the eigen-decomposition of the
    /// nine-wave quasi-linear matrix with entropy-scaled eigenvectors,
    /// evaluated at the arithmetic mean of the primitive states.
    Matrix { h_step: f64 },
}

impl Dissipation {
    pub fn llf() -> Self {
        Dissipation::LlfEntropy { h_step: 1e-6 }
    }

    pub fn matrix() -> Self {
        Dissipation::Matrix { h_step: 1e-6 }
    }
}

#[inline]
fn swap_prim(q: &Primitive) -> Primitive {
    Primitive {
        v: [q.v[1], q.v[0], q.v[2]],
        b: [q.b[1], q.b[0], q.b[2]],
        ..*q
    }
}

#[inline]
fn swap_rows(f: FluxVector) -> FluxVector {
    [f[0], f[2], f[1], f[3], f[4], f[6], f[5], f[7], f[8]]
}

#[inline]
fn oriented(q: &Primitive, dir: Dir) -> Primitive {
    match dir {
        Dir::X => *q,
        Dir::Y => swap_prim(q),
    }
}

#[inline]
fn reorient(f: FluxVector, dir: Dir) -> FluxVector {
    match dir {
        Dir::X => f,
        Dir::Y => swap_rows(f),
    }
}

/// Physical advective flux of an admissible state.
pub fn advective_flux(u: &State, gamma: f64, c_h: f64, dir: Dir) -> Result<FluxVector> {
    Ok(advective_flux_prim(&primitive(u, gamma)?, gamma, c_h, dir))
}

#[inline]
pub fn advective_flux_prim(q: &Primitive, gamma: f64, c_h: f64, dir: Dir) -> FluxVector {
    let (e, m, g) = physical_flux_split_prim(q, gamma, c_h, dir);
    std::array::from_fn(|k| e[k] + m[k] + g[k])
}

/// Physical flux split into its Euler, ideal MHD and GLM parts.
pub fn physical_flux_split_prim(
    q: &Primitive,
    gamma: f64,
    c_h: f64,
    dir: Dir,
) -> (FluxVector, FluxVector, FluxVector) {
    let q = oriented(q, dir);
    let [v1, v2, v3] = q.v;
    let [b1, b2, b3] = q.b;
    let vv = v1 * v1 + v2 * v2 + v3 * v3;
    let bb = b1 * b1 + b2 * b2 + b3 * b3;
    let vb = v1 * b1 + v2 * b2 + v3 * b3;
    let m1 = q.rho * v1;
    let euler = [
        m1,
        m1 * v1 + q.p,
        m1 * v2,
        m1 * v3,
        v1 * (0.5 * q.rho * vv + gamma * q.p / (gamma - 1.0)),
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    let mhd = [
        0.0,
        0.5 * bb - b1 * b1,
        -b1 * b2,
        -b1 * b3,
        v1 * bb - b1 * vb,
        0.0,
        v1 * b2 - v2 * b1,
        v1 * b3 - v3 * b1,
        0.0,
    ];
    let glm = [0.0, 0.0, 0.0, 0.0, c_h * q.psi * b1, c_h * q.psi, 0.0, 0.0, c_h * b1];
    (reorient(euler, dir), reorient(mhd, dir), reorient(glm, dir))
}

/// Logarithmic mean `(aR - aL) / (ln aR - ln aL)`.
pub fn log_mean(a_l: f64, a_r: f64) -> Result<f64> {
    if !(a_l > 0.0 && a_r > 0.0) {
        return Err(Error::LogMeanDomain(a_l, a_r));
    }
    Ok(log_mean_unchecked(a_l, a_r))
}

/// Ismail-Roe evaluation. With `zeta = aL / aR` and `f = (zeta - 1) / (zeta + 1)`
/// the mean is `(aL + aR) / (2 F)` where `F = atanh(f) / f`.
#[inline]
pub fn log_mean_unchecked(a_l: f64, a_r: f64) -> f64 {
    let diff = a_l - a_r;
    if diff.abs() < LOG_MEAN_SERIES_THRESHOLD * a_r {
        let f = diff / (a_l + a_r);
        let u = f * f;
        let big_f = 1.0 + u * (1.0 / 3.0 + u * (1.0 / 5.0 + u * (1.0 / 7.0)));
        (a_l + a_r) / (2.0 * big_f)
    } else {
        diff / (diff / a_r).ln_1p()
    }
}

/// Entropy conservative flux of matched admissible states.
pub fn ec_flux(u_l: &State, u_r: &State, gamma: f64, c_h: f64, dir: Dir) -> Result<FluxVector> {
    Ok(ec_flux_prim(&primitive(u_l, gamma)?, &primitive(u_r, gamma)?, gamma, c_h, dir))
}

#[inline]
pub fn ec_flux_prim(ql: &Primitive, qr: &Primitive, gamma: f64, c_h: f64, dir: Dir) -> FluxVector {
    match dir {
        Dir::X => ec_flux_x(ql, qr, gamma, c_h),
        Dir::Y => swap_rows(ec_flux_x(&swap_prim(ql), &swap_prim(qr), gamma, c_h)),
    }
}

fn ec_flux_x(ql: &Primitive, qr: &Primitive, gamma: f64, c_h: f64) -> FluxVector {
    let beta_l = ql.beta();
    let beta_r = qr.beta();
    let rho_ln = log_mean_unchecked(ql.rho, qr.rho);
    let beta_ln = log_mean_unchecked(beta_l, beta_r);
    let rho_avg = 0.5 * (ql.rho + qr.rho);
    let beta_avg = 0.5 * (beta_l + beta_r);
    let p_bar = rho_avg / (2.0 * beta_avg);

    let v = avg3(&ql.v, &qr.v);
    let b = avg3(&ql.b, &qr.b);
    let psi = 0.5 * (ql.psi + qr.psi);
    let v_sq = avg_sq(&ql.v, &qr.v);
    let b_sq = avg_sq(&ql.b, &qr.b);
    let b_sq_sum = b_sq[0] + b_sq[1] + b_sq[2];

    let f1 = rho_ln * v[0];
    let f2 = f1 * v[0] - b[0] * b[0] + p_bar + 0.5 * b_sq_sum;
    let f3 = f1 * v[1] - b[0] * b[1];
    let f4 = f1 * v[2] - b[0] * b[2];
    let f6 = c_h * psi;
    let f7 = v[0] * b[1] - v[1] * b[0];
    let f8 = v[0] * b[2] - v[2] * b[0];
    let f9 = c_h * b[0];

    // <v1 |B|^2> and <v . B>, both as averages of products.
    let v1_bb = 0.5 * (ql.v[0] * norm_sq(&ql.b) + qr.v[0] * norm_sq(&qr.b));
    let vb = 0.5 * (dot(&ql.v, &ql.b) + dot(&qr.v, &qr.b));
    let b1_psi = 0.5 * (ql.b[0] * ql.psi + qr.b[0] * qr.psi);

    let f5 = f1 * (0.5 / ((gamma - 1.0) * beta_ln) - 0.5 * (v_sq[0] + v_sq[1] + v_sq[2]))
        + f2 * v[0]
        + f3 * v[1]
        + f4 * v[2]
        + f6 * b[0]
        + f7 * b[1]
        + f8 * b[2]
        + f9 * psi
        - 0.5 * v1_bb
        + b[0] * vb
        - c_h * b1_psi;
    [f1, f2, f3, f4, f5, f6, f7, f8, f9]
}

/// Entropy conservative flux split into Euler, ideal MHD and GLM parts, each
/// satisfying its own discrete entropy condition.
pub fn ec_flux_split(
    u_l: &State,
    u_r: &State,
    gamma: f64,
    c_h: f64,
    dir: Dir,
) -> Result<(FluxVector, FluxVector, FluxVector)> {
    let ql = primitive(u_l, gamma)?;
    let qr = primitive(u_r, gamma)?;
    Ok(ec_flux_split_prim(&ql, &qr, gamma, c_h, dir))
}

pub fn ec_flux_split_prim(
    ql: &Primitive,
    qr: &Primitive,
    gamma: f64,
    c_h: f64,
    dir: Dir,
) -> (FluxVector, FluxVector, FluxVector) {
    let ql = oriented(ql, dir);
    let qr = oriented(qr, dir);
    let beta_l = ql.beta();
    let beta_r = qr.beta();
    let rho_ln = log_mean_unchecked(ql.rho, qr.rho);
    let beta_ln = log_mean_unchecked(beta_l, beta_r);
    let p_bar = 0.5 * (ql.rho + qr.rho) / (beta_l + beta_r);
    let v = avg3(&ql.v, &qr.v);
    let b = avg3(&ql.b, &qr.b);
    let psi = 0.5 * (ql.psi + qr.psi);
    let v_sq = avg_sq(&ql.v, &qr.v);
    let b_sq = avg_sq(&ql.b, &qr.b);

    let f1 = rho_ln * v[0];
    let e2 = f1 * v[0] + p_bar;
    let e3 = f1 * v[1];
    let e4 = f1 * v[2];
    let e5 = f1 * (0.5 / ((gamma - 1.0) * beta_ln) - 0.5 * (v_sq[0] + v_sq[1] + v_sq[2]))
        + e2 * v[0]
        + e3 * v[1]
        + e4 * v[2];
    let euler = [f1, e2, e3, e4, e5, 0.0, 0.0, 0.0, 0.0];

    let m2 = -b[0] * b[0] + 0.5 * (b_sq[0] + b_sq[1] + b_sq[2]);
    let m3 = -b[0] * b[1];
    let m4 = -b[0] * b[2];
    let m7 = v[0] * b[1] - v[1] * b[0];
    let m8 = v[0] * b[2] - v[2] * b[0];
    let v1_bb = 0.5 * (ql.v[0] * norm_sq(&ql.b) + qr.v[0] * norm_sq(&qr.b));
    let vb = 0.5 * (dot(&ql.v, &ql.b) + dot(&qr.v, &qr.b));
    let m5 = m2 * v[0] + m3 * v[1] + m4 * v[2] + m7 * b[1] + m8 * b[2] - 0.5 * v1_bb + b[0] * vb;
    let mhd = [0.0, m2, m3, m4, m5, 0.0, m7, m8, 0.0];

    let g6 = c_h * psi;
    let g9 = c_h * b[0];
    let b1_psi = 0.5 * (ql.b[0] * ql.psi + qr.b[0] * qr.psi);
    let g5 = g6 * b[0] + g9 * psi - c_h * b1_psi;
    let glm = [0.0, 0.0, 0.0, 0.0, g5, g6, 0.0, 0.0, g9];

    (reorient(euler, dir), reorient(mhd, dir), reorient(glm, dir))
}

/// Largest signal speed `max(|v_n| + c_f, c_h)`.
pub fn max_wave_speed(u: &State, gamma: f64, c_h: f64, dir: Dir) -> Result<f64> {
    let s = max_wave_speed_prim(&primitive(u, gamma)?, gamma, c_h, dir);
    if !s.is_finite() {
        return Err(Error::NonFiniteWaveSpeed);
    }
    Ok(s)
}

#[inline]
pub fn max_wave_speed_prim(q: &Primitive, gamma: f64, c_h: f64, dir: Dir) -> f64 {
    let d = dir.index();
    (q.v[d].abs() + fast_speed(q, gamma, dir)).max(c_h)
}

/// Fast magnetosonic speed in direction `dir`.
#[inline]
pub fn fast_speed(q: &Primitive, gamma: f64, dir: Dir) -> f64 {
    let a2 = gamma * q.p / q.rho;
    let va2 = norm_sq(&q.b) / q.rho;
    let bn = q.b[dir.index()];
    let sum = a2 + va2;
    let disc = (sum * sum - 4.0 * a2 * bn * bn / q.rho).max(0.0);
    (0.5 * (sum + disc.sqrt())).sqrt()
}

/// Entropy Jacobian `H = du/dw` by central differences.
pub fn entropy_jacobian(q: &Primitive, gamma: f64, h_step: f64) -> [[f64; NVAR]; NVAR] {
    let w = entropy_vars_prim(q, gamma).w;
    let mut h = [[0.0; NVAR]; NVAR];
    for k in 0..NVAR {
        let step = h_step * w[k].abs().max(1.0);
        let mut wp = w;
        let mut wm = w;
        wp[k] += step;
        wm[k] -= step;
        // w5 stays negative for any step far below |w5|.
        let up = conserved_from_entropy_vars(&wp, gamma).expect("w5 < 0 after perturbation");
        let um = conserved_from_entropy_vars(&wm, gamma).expect("w5 < 0 after perturbation");
        for i in 0..NVAR {
            h[i][k] = (up[i] - um[i]) / (2.0 * step);
        }
    }
    h
}

/// `1/2 lambda_max Hbar`, with `Hbar` the average of the symmetrized entropy
/// Jacobians of both states.
pub fn dissipation_matrix(
    ql: &Primitive,
    qr: &Primitive,
    gamma: f64,
    c_h: f64,
    dir: Dir,
    h_step: f64,
) -> [[f64; NVAR]; NVAR] {
    let lambda = max_wave_speed_prim(ql, gamma, c_h, dir).max(max_wave_speed_prim(qr, gamma, c_h, dir));
    let hl = entropy_jacobian(ql, gamma, h_step);
    let hr = entropy_jacobian(qr, gamma, h_step);
    let mut d = [[0.0; NVAR]; NVAR];
    for i in 0..NVAR {
        for j in 0..NVAR {
            let avg = 0.25 * (hl[i][j] + hl[j][i] + hr[i][j] + hr[j][i]);
            d[i][j] = 0.5 * lambda * avg;
        }
    }
    d
}

/// Quasi-linear x-direction matrix of the nine-wave system: the flux
/// Jacobian plus the Powell term on `d B1` and the GLM term on `d psi`.
/// Multiplied by `H` it is symmetric.
pub fn quasi_linear_matrix(q: &Primitive, gamma: f64, c_h: f64, h_step: f64) -> Mat9 {
    let u = q.to_conserved(gamma);
    let mut a = [[0.0; NVAR]; NVAR];
    for k in 0..NVAR {
        let step = h_step * u[k].abs().max(1.0);
        let mut up = u;
        let mut um = u;
        up[k] += step;
        um[k] -= step;
        let fp = advective_flux_prim(&Primitive::from_conserved(&up, gamma), gamma, c_h, Dir::X);
        let fm = advective_flux_prim(&Primitive::from_conserved(&um, gamma), gamma, c_h, Dir::X);
        for i in 0..NVAR {
            a[i][k] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    let (v, b) = (q.v, q.b);
    let powell = [0.0, b[0], b[1], b[2], dot(&v, &b), v[0], v[1], v[2], 0.0];
    for i in 0..NVAR {
        a[i][5] += powell[i];
    }
    a[4][8] += v[0] * q.psi;
    a[8][8] += v[0];
    a
}

type Mat9 = [[f64; NVAR]; NVAR];

/// `1/2 R |Lambda| R^T` with `H = R R^T`. Computed as `L |S| L^T` where
/// `H = L L^T` and `S = L^-1 A L`, which is symmetric.
pub fn wave_dissipation_matrix(ql: &Primitive, qr: &Primitive, gamma: f64, c_h: f64, dir: Dir, h_step: f64) -> Mat9 {
    use nalgebra::SMatrix;
    type M = SMatrix<f64, NVAR, NVAR>;
    let (ql, qr) = (oriented(ql, dir), oriented(qr, dir));
    let q = Primitive {
        rho: 0.5 * (ql.rho + qr.rho),
        v: avg3(&ql.v, &qr.v),
        p: 0.5 * (ql.p + qr.p),
        b: avg3(&ql.b, &qr.b),
        psi: 0.5 * (ql.psi + qr.psi),
    };
    let h = entropy_jacobian(&q, gamma, h_step);
    let a = quasi_linear_matrix(&q, gamma, c_h, h_step);
    let hm = M::from_fn(|i, j| 0.5 * (h[i][j] + h[j][i]));
    let am = M::from_fn(|i, j| a[i][j]);
    let l = hm.cholesky().expect("entropy Jacobian is positive definite").unpack();
    // S = L^-1 (A H) L^-T
    let ah = am * hm;
    let x = l.solve_lower_triangular(&ah).expect("nonsingular Cholesky factor");
    let s = l.solve_lower_triangular(&x.transpose()).expect("nonsingular Cholesky factor");
    let eig = (0.5 * (s + s.transpose())).symmetric_eigen();
    let abs = eig.eigenvectors * M::from_diagonal(&eig.eigenvalues.map(f64::abs)) * eig.eigenvectors.transpose();
    let d = l * abs * l.transpose();
    let mut out = [[0.0; NVAR]; NVAR];
    for i in 0..NVAR {
        for j in 0..NVAR {
            out[i][j] = 0.25 * (d[(i, j)] + d[(j, i)]);
        }
    }
    match dir {
        Dir::X => out,
        Dir::Y => {
            let p = |k: usize| [0, 2, 1, 3, 4, 6, 5, 7, 8][k];
            std::array::from_fn(|i| std::array::from_fn(|j| out[p(i)][p(j)]))
        }
    }
}

/// Entropy stable interface flux `f_ec - D [[w]]` with `D` from `dissipation`.
pub fn es_flux(
    u_l: &State,
    u_r: &State,
    gamma: f64,
    c_h: f64,
    dir: Dir,
    dissipation: Dissipation,
) -> Result<FluxVector> {
    let ql = primitive(u_l, gamma)?;
    let qr = primitive(u_r, gamma)?;
    Ok(es_flux_prim(&ql, &qr, gamma, c_h, dir, dissipation))
}

pub fn es_flux_prim(
    ql: &Primitive,
    qr: &Primitive,
    gamma: f64,
    c_h: f64,
    dir: Dir,
    dissipation: Dissipation,
) -> FluxVector {
    let mut f = ec_flux_prim(ql, qr, gamma, c_h, dir);
    let d = match dissipation {
        Dissipation::None => return f,
        Dissipation::LlfEntropy { h_step } => dissipation_matrix(ql, qr, gamma, c_h, dir, h_step),
        Dissipation::Matrix { h_step } => wave_dissipation_matrix(ql, qr, gamma, c_h, dir, h_step),
    };
    let wl = entropy_vars_prim(ql, gamma).w;
    let wr = entropy_vars_prim(qr, gamma).w;
    let jump: [f64; NVAR] = std::array::from_fn(|k| wr[k] - wl[k]);
    for i in 0..NVAR {
        f[i] -= (0..NVAR).map(|j| d[i][j] * jump[j]).sum::<f64>();
    }
    f
}

#[inline]
fn avg3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}

#[inline]
fn avg_sq(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| 0.5 * (a[k] * a[k] + b[k] * b[k]))
}

#[inline]
fn norm_sq(a: &[f64; 3]) -> f64 {
    a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
