//! Quadrature functionals over a solution field.

use crate::dg::{standard_divergence, Solver};
use crate::error::{Error, Result};
use crate::sbp::lgl_nodes_weights;
use crate::state::{entropy_density_prim, pressure, primitive, State, NVAR, RHO};

fn node_weights(solver: &Solver) -> Vec<f64> {
    let w = &solver.ops.weights;
    let np = w.len();
    (0..np * np).map(|k| solver.mesh.jacobian * w[k % np] * w[k / np]).collect()
}

/// `sum_k J sum_ij w_i w_j S(U_ij)`.
pub fn total_entropy(solver: &Solver, u: &[State]) -> Result<f64> {
    let wts = node_weights(solver);
    let nn = wts.len();
    let mut s = 0.0;
    for (n, x) in u.iter().enumerate() {
        let q = primitive(x, solver.gas.gamma)?;
        s += wts[n % nn] * entropy_density_prim(&q, solver.gas.gamma);
    }
    Ok(s)
}

/// Quadrature totals of every conserved variable.
pub fn conserved_totals(solver: &Solver, u: &[State]) -> State {
    let wts = node_weights(solver);
    let nn = wts.len();
    let mut t = [0.0; NVAR];
    for (n, x) in u.iter().enumerate() {
        for k in 0..NVAR {
            t[k] += wts[n % nn] * x[k];
        }
    }
    t
}

/// `||div B||_L2` with the element-local DG derivative.
pub fn divergence_l2(solver: &Solver, u: &[State]) -> f64 {
    let wts = node_weights(solver);
    let nn = wts.len();
    let metric = solver.mesh.metric();
    let mut sum = 0.0;
    for elem in u.chunks(nn) {
        let b1: Vec<f64> = elem.iter().map(|x| x[5]).collect();
        let b2: Vec<f64> = elem.iter().map(|x| x[6]).collect();
        for (d, w) in standard_divergence(&b1, &b2, &solver.ops).iter().zip(&wts) {
            sum += w * (metric * d).powi(2);
        }
    }
    sum.sqrt()
}

/// Divergence error normalized by the largest value seen so far.
#[derive(Debug, Clone, Copy, Default)]
pub struct DivergenceTracker {
    max: f64,
}

impl DivergenceTracker {
    /// Returns `(raw, normalized)`; normalized is zero while every value
    /// seen so far is zero.
    pub fn update(&mut self, raw: f64) -> (f64, f64) {
        self.max = self.max.max(raw);
        let normalized = if self.max > 0.0 { raw / self.max } else { 0.0 };
        (raw, normalized)
    }
}

/// L2 errors of `(rho, v1, v2, v3, p, B1, B2, B3, psi)` against `reference`.
pub fn l2_error(solver: &Solver, u: &[State], reference: impl Fn(f64, f64, f64) -> State, t: f64) -> Result<[f64; NVAR]> {
    let gamma = solver.gas.gamma;
    let wts = node_weights(solver);
    let nn = wts.len();
    let prim = |x: &State| primitive_vector(x, gamma);
    let mut sum = [0.0; NVAR];
    for (e, nodes) in solver.mesh.node_coords.iter().enumerate() {
        for (k, &(x, y)) in nodes.iter().enumerate() {
            let a = prim(&u[e * nn + k])?;
            let b = prim(&reference(x, y, t))?;
            for v in 0..NVAR {
                sum[v] += wts[k] * (a[v] - b[v]).powi(2);
            }
        }
    }
    Ok(sum.map(f64::sqrt))
}

/// Points per direction used by [`l2_error_interpolated`].
pub const ANALYZE_POINTS: usize = 15;

/// L2 errors of `(rho, v1, v2, v3, p, B1, B2, B3, psi)` of the polynomial
/// solution: conserved variables are interpolated to `points x points` LGL
/// points per element, converted to primitives and compared with `reference`
/// there. Unlike [`l2_error`] this sees the error between the solution nodes.
pub fn l2_error_interpolated(
    solver: &Solver,
    u: &[State],
    reference: impl Fn(f64, f64, f64) -> State,
    t: f64,
    points: usize,
) -> Result<[f64; NVAR]> {
    if points < 2 {
        return Err(Error::Config("error quadrature needs at least 2 points".into()));
    }
    let gamma = solver.gas.gamma;
    let (xs, ws) = lgl_nodes_weights(points - 1)?;
    let nodes = &solver.ops.nodes;
    let np = nodes.len();
    let nn = np * np;
    // basis[a][i] = l_i(xs[a])
    let basis: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            (0..np)
                .map(|i| (0..np).filter(|&m| m != i).map(|m| (x - nodes[m]) / (nodes[i] - nodes[m])).product())
                .collect()
        })
        .collect();
    let mesh = &solver.mesh;
    let mut sum = [0.0; NVAR];
    let mut rows = vec![[0.0; NVAR]; points * np];
    for (e, elem) in u.chunks(nn).enumerate() {
        // Interpolate along x first: rows[a + points * j].
        for j in 0..np {
            for (a, la) in basis.iter().enumerate() {
                let mut acc = [0.0; NVAR];
                for i in 0..np {
                    for v in 0..NVAR {
                        acc[v] += la[i] * elem[i + np * j][v];
                    }
                }
                rows[a + points * j] = acc;
            }
        }
        let (ix, iy) = mesh.element_position(e);
        let x0 = mesh.bounds.x0 + ix as f64 * mesh.dx;
        let y0 = mesh.bounds.y0 + iy as f64 * mesh.dx;
        for (b, lb) in basis.iter().enumerate() {
            for a in 0..points {
                let mut state = [0.0; NVAR];
                for j in 0..np {
                    for v in 0..NVAR {
                        state[v] += lb[j] * rows[a + points * j][v];
                    }
                }
                let x = x0 + 0.5 * mesh.dx * (xs[a] + 1.0);
                let y = y0 + 0.5 * mesh.dx * (xs[b] + 1.0);
                let p = primitive_vector(&state, gamma)?;
                let r = primitive_vector(&reference(x, y, t), gamma)?;
                let w = mesh.jacobian * ws[a] * ws[b];
                for v in 0..NVAR {
                    sum[v] += w * (p[v] - r[v]).powi(2);
                }
            }
        }
    }
    Ok(sum.map(f64::sqrt))
}

fn primitive_vector(u: &State, gamma: f64) -> Result<[f64; NVAR]> {
    let q = primitive(u, gamma)?;
    Ok([q.rho, q.v[0], q.v[1], q.v[2], q.p, q.b[0], q.b[1], q.b[2], q.psi])
}

/// Observed orders `ln(e1/e2) / ln(h1/h2)` between consecutive levels and
/// their average (`None` for a single level).
pub fn eoc(levels: &[(f64, f64)]) -> Result<(Vec<f64>, Option<f64>)> {
    if levels.iter().any(|&(h, e)| !(h > 0.0) || !(e > 0.0)) {
        return Err(Error::Config("EOC needs positive mesh sizes and errors".into()));
    }
    let orders: Vec<f64> = levels.windows(2).map(|p| (p[0].1 / p[1].1).ln() / (p[0].0 / p[1].0).ln()).collect();
    let avg = (!orders.is_empty()).then(|| orders.iter().sum::<f64>() / orders.len() as f64);
    Ok((orders, avg))
}

/// Smallest density and pressure over all nodes (no admissibility check).
pub fn min_density_pressure(u: &[State], gamma: f64) -> (f64, f64) {
    u.iter().fold((f64::INFINITY, f64::INFINITY), |(r, p), x| (r.min(x[RHO]), p.min(pressure(x, gamma))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub total_entropy: f64,
    pub div_b_l2: f64,
    pub div_b_l2_normalized: f64,
    pub mass_total: f64,
    pub energy_total: f64,
    pub min_density: f64,
    pub min_pressure: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "step,time,dt,total_entropy,divB_l2,divB_l2_normalized,mass_total,energy_total,min_density,min_pressure";

    pub fn compute(solver: &Solver, u: &[State], step: usize, time: f64, dt: f64, tracker: &mut DivergenceTracker) -> Result<Self> {
        let (div_b_l2, div_b_l2_normalized) = tracker.update(divergence_l2(solver, u));
        let totals = conserved_totals(solver, u);
        let (min_density, min_pressure) = min_density_pressure(u, solver.gas.gamma);
        Ok(DiagnosticsRecord {
            step,
            time,
            dt,
            total_entropy: total_entropy(solver, u)?,
            div_b_l2,
            div_b_l2_normalized,
            mass_total: totals[RHO],
            energy_total: totals[4],
            min_density,
            min_pressure,
        })
    }

    /// CSV row with round-trip precision.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.step,
            self.time,
            self.dt,
            self.total_entropy,
            self.div_b_l2,
            self.div_b_l2_normalized,
            self.mass_total,
            self.energy_total,
            self.min_density,
            self.min_pressure
        )
    }
}
