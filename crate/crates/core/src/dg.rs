//! Semidiscrete DGSEM operator for resistive GLM-MHD on a periodic Cartesian
//! mesh, assembled in strong form with boundary lifting at the face nodes.
//!
//! Evaluation runs in passes over the elements: nodal primitive and entropy
//! variables, BR1 gradients, viscous fluxes, face traces (each element owns
//! its east and north faces), then the element update. Every pass writes only
//! its own element's slots and reads finished arrays, so the result does not
//! depend on how elements are scheduled.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flux::{
    advective_flux_prim, ec_flux_prim, ec_flux_split_prim, es_flux_prim, Dissipation, FluxVector,
};
use crate::mesh::{CartesianMesh, Face};
use crate::par;
use crate::sbp::SbpOperators;
use crate::state::{
    entropy_vars_prim, primitive, Dir, GasConfig, Primitive, State, NVAR, PSI,
};
use crate::viscous::viscous_flux_chain;

/// Analytic source `(x, y, t) -> s` added to the time derivative.
pub type SourceFn = Arc<dyn Fn(f64, f64, f64) -> State + Send + Sync>;

/// Per node `(dw/dx, dw/dy)`.
pub type Gradient = [[f64; NVAR]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeMode {
    /// Flux differencing with the entropy conservative two-point flux.
    EcSplit,
    /// Derivative of the interpolated physical flux.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceMode {
    Ec,
    Es,
}

/// Which part of the entropy conservative flux [`volume_split`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxPart {
    Full,
    Euler,
    Mhd,
    Glm,
}

#[derive(Clone)]
pub struct SchemeMode {
    pub volume: VolumeMode,
    pub surface: SurfaceMode,
    /// Without GLM the cleaning speed is forced to zero.
    pub glm: bool,
    pub source: Option<SourceFn>,
    pub dissipation: Dissipation,
    /// Multiplies the non-conservative surface term. Always 1 except in the
    /// mutation canary of the verification suite.
    pub(crate) noncons_surface_sign: f64,
}

impl SchemeMode {
    pub fn new(volume: VolumeMode, surface: SurfaceMode, glm: bool) -> Self {
        SchemeMode {
            volume,
            surface,
            glm,
            source: None,
            dissipation: Dissipation::llf(),
            noncons_surface_sign: 1.0,
        }
    }

    pub fn entropy_conservative() -> Self {
        Self::new(VolumeMode::EcSplit, SurfaceMode::Ec, true)
    }

    pub fn entropy_stable() -> Self {
        Self::new(VolumeMode::EcSplit, SurfaceMode::Es, true)
    }

    pub fn with_source(mut self, source: SourceFn) -> Self {
        self.source = Some(source);
        self
    }
}

impl fmt::Debug for SchemeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemeMode")
            .field("volume", &self.volume)
            .field("surface", &self.surface)
            .field("glm", &self.glm)
            .field("source", &self.source.is_some())
            .field("dissipation", &self.dissipation)
            .finish()
    }
}

/// Contributions to the time derivative, kept apart by [`Solver::rhs_terms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    AdvectiveVolume = 0,
    AdvectiveSurface = 1,
    NonconsVolume = 2,
    NonconsSurface = 3,
    ViscousVolume = 4,
    ViscousSurface = 5,
    Damping = 6,
    Source = 7,
}

pub const NUM_TERMS: usize = 8;

impl Term {
    pub const ALL: [Term; NUM_TERMS] = [
        Term::AdvectiveVolume,
        Term::AdvectiveSurface,
        Term::NonconsVolume,
        Term::NonconsSurface,
        Term::ViscousVolume,
        Term::ViscousSurface,
        Term::Damping,
        Term::Source,
    ];
}

#[derive(Debug, Clone, Copy, Default)]
struct FaceTrace {
    flux: FluxVector,
    visc: FluxVector,
    bn: f64,
}

/// Scratch arrays reused across right-hand-side evaluations.
#[derive(Debug, Clone)]
pub struct Workspace {
    prims: Vec<Primitive>,
    w: Vec<[f64; NVAR]>,
    grads: Vec<Gradient>,
    fv: Vec<[FluxVector; 2]>,
    xfaces: Vec<FaceTrace>,
    yfaces: Vec<FaceTrace>,
}

impl Workspace {
    pub fn new(solver: &Solver) -> Self {
        let n = solver.num_nodes();
        let f = solver.mesh.num_elements() * solver.ops.num_nodes();
        let dummy = Primitive { rho: 1.0, v: [0.0; 3], p: 1.0, b: [0.0; 3], psi: 0.0 };
        Workspace {
            prims: vec![dummy; n],
            w: vec![[0.0; NVAR]; n],
            grads: vec![[[0.0; NVAR]; 2]; n],
            fv: vec![[[0.0; NVAR]; 2]; n],
            xfaces: vec![FaceTrace::default(); f],
            yfaces: vec![FaceTrace::default(); f],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solver {
    pub mesh: CartesianMesh,
    pub ops: SbpOperators,
    pub gas: GasConfig,
    pub mode: SchemeMode,
}

impl Solver {
    pub fn new(mesh: CartesianMesh, ops: SbpOperators, gas: GasConfig, mode: SchemeMode) -> Result<Self> {
        gas.validate()?;
        if mesh.order != ops.order {
            return Err(Error::Config(format!(
                "mesh built for order {} but operators have order {}",
                mesh.order, ops.order
            )));
        }
        Ok(Solver { mesh, ops, gas, mode })
    }

    /// Total number of nodes in a field.
    pub fn num_nodes(&self) -> usize {
        self.mesh.num_elements() * self.mesh.nodes_per_element()
    }

    /// Samples `f(x, y)` at every node.
    pub fn project(&self, f: impl Fn(f64, f64) -> State) -> Vec<State> {
        self.mesh
            .node_coords
            .iter()
            .flat_map(|nodes| nodes.iter().map(|&(x, y)| f(x, y)))
            .collect()
    }

    fn effective_ch(&self, c_h: f64) -> f64 {
        if self.mode.glm {
            c_h
        } else {
            0.0
        }
    }

    /// Time derivative of `u` at time `t` with cleaning speed `c_h`.
    pub fn rhs(&self, u: &[State], t: f64, c_h: f64) -> Result<Vec<State>> {
        let mut ws = Workspace::new(self);
        let mut out = vec![[0.0; NVAR]; u.len()];
        self.rhs_into(u, t, c_h, &mut ws, &mut out)?;
        Ok(out)
    }

    pub fn rhs_into(&self, u: &[State], t: f64, c_h: f64, ws: &mut Workspace, out: &mut [State]) -> Result<()> {
        self.prepare(u, c_h, ws)?;
        let nn = self.mesh.nodes_per_element();
        let metric = self.mesh.metric();
        let mut scale = [1.0; NUM_TERMS];
        for t in [Term::AdvectiveVolume, Term::AdvectiveSurface, Term::NonconsVolume, Term::NonconsSurface] {
            scale[t as usize] = -metric;
        }
        scale[Term::ViscousVolume as usize] = metric;
        scale[Term::ViscousSurface as usize] = metric;
        let ws = &*ws;
        let c_h = self.effective_ch(c_h);
        par::for_each_chunk(out, nn, |e, o| {
            o.iter_mut().for_each(|x| *x = [0.0; NVAR]);
            self.element_terms(e, ws, c_h, t, &mut |term, node, v| {
                let s = scale[term as usize];
                for (ok, vk) in o[node].iter_mut().zip(v) {
                    *ok += s * vk;
                }
            });
        });
        Ok(())
    }

    /// The time derivative split into its contributions, indexed by
    /// `Term as usize`. Summing all entries gives [`Solver::rhs`] up to
    /// round-off.
    pub fn rhs_terms(&self, u: &[State], t: f64, c_h: f64) -> Result<Vec<Vec<State>>> {
        let mut ws = Workspace::new(self);
        self.prepare(u, c_h, &mut ws)?;
        let nn = self.mesh.nodes_per_element();
        let metric = self.mesh.metric();
        let c_h = self.effective_ch(c_h);
        let mut terms = vec![vec![[0.0; NVAR]; u.len()]; NUM_TERMS];
        for e in 0..self.mesh.num_elements() {
            self.element_terms(e, &ws, c_h, t, &mut |term, node, v| {
                let s = match term {
                    Term::AdvectiveVolume | Term::AdvectiveSurface | Term::NonconsVolume | Term::NonconsSurface => -metric,
                    Term::ViscousVolume | Term::ViscousSurface => metric,
                    Term::Damping | Term::Source => 1.0,
                };
                let slot = &mut terms[term as usize][e * nn + node];
                for (ok, vk) in slot.iter_mut().zip(v) {
                    *ok += s * vk;
                }
            });
        }
        Ok(terms)
    }

    /// BR1 gradients of the entropy variables.
    pub fn gradients(&self, u: &[State]) -> Result<Vec<Gradient>> {
        let mut ws = Workspace::new(self);
        self.nodal_pass(u, &mut ws)?;
        let Workspace { w, grads, .. } = &mut ws;
        self.gradient_pass(w, grads);
        Ok(ws.grads)
    }

    /// `sum_k J sum_ij w_i w_j W^T u_t` together with the same sum of
    /// absolute values, which serves as the round-off scale.
    pub fn entropy_contraction(&self, u: &[State], ut: &[State]) -> Result<(f64, f64)> {
        let np = self.ops.num_nodes();
        let wts = &self.ops.weights;
        let mut sum = 0.0;
        let mut abs = 0.0;
        for (k, (uk, rk)) in u.iter().zip(ut).enumerate() {
            let node = k % (np * np);
            let q = primitive(uk, self.gas.gamma)?;
            let w = entropy_vars_prim(&q, self.gas.gamma).w;
            let c: f64 = w.iter().zip(rk).map(|(a, b)| a * b).sum();
            let weight = self.mesh.jacobian * wts[node % np] * wts[node / np];
            sum += weight * c;
            abs += weight * c.abs();
        }
        Ok((sum, abs))
    }

    fn prepare(&self, u: &[State], c_h: f64, ws: &mut Workspace) -> Result<()> {
        if u.len() != self.num_nodes() {
            return Err(Error::Config(format!(
                "field has {} nodes, mesh expects {}",
                u.len(),
                self.num_nodes()
            )));
        }
        self.nodal_pass(u, ws)?;
        let Workspace { prims, w, grads, fv, xfaces, yfaces } = ws;
        let nn = self.mesh.nodes_per_element();
        if self.gas.is_viscous() {
            self.gradient_pass(w, grads);
            let (w, grads) = (&*w, &*grads);
            par::for_each_chunk(fv, nn, |e, f| {
                for (k, fk) in f.iter_mut().enumerate() {
                    let n = e * nn + k;
                    *fk = viscous_flux_chain(&w[n], &grads[n][0], &grads[n][1], &self.gas);
                }
            });
        }
        self.face_pass(prims, fv, self.effective_ch(c_h), xfaces, yfaces);
        Ok(())
    }

    fn nodal_pass(&self, u: &[State], ws: &mut Workspace) -> Result<()> {
        let nn = self.mesh.nodes_per_element();
        let gamma = self.gas.gamma;
        par::try_for_each_chunk(&mut ws.prims, nn, |e, p| {
            for (k, pk) in p.iter_mut().enumerate() {
                *pk = primitive(&u[e * nn + k], gamma)?;
            }
            Ok(())
        })?;
        let prims = &ws.prims;
        par::for_each_chunk(&mut ws.w, nn, |e, w| {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk = entropy_vars_prim(&prims[e * nn + k], gamma).w;
            }
        });
        Ok(())
    }

    fn gradient_pass(&self, w: &[[f64; NVAR]], grads: &mut [Gradient]) {
        let np = self.ops.num_nodes();
        let nn = np * np;
        let n = np - 1;
        let d = &self.ops.dmat;
        let lift_n = 1.0 / self.ops.weights[n];
        let lift_0 = 1.0 / self.ops.weights[0];
        let metric = self.mesh.metric();
        par::for_each_chunk(grads, nn, |e, g| {
            let base = e * nn;
            let we = &w[base..base + nn];
            let nb = |f: Face| &w[self.mesh.neighbor(e, f) * nn..][..nn];
            let (west, east, south, north) = (nb(Face::West), nb(Face::East), nb(Face::South), nb(Face::North));
            for j in 0..np {
                for i in 0..np {
                    let node = i + np * j;
                    let mut gx = [0.0; NVAR];
                    let mut gy = [0.0; NVAR];
                    for m in 0..np {
                        let (dx, dy) = (d[i][m], d[j][m]);
                        let (wx, wy) = (&we[m + np * j], &we[i + np * m]);
                        for k in 0..NVAR {
                            gx[k] += dx * wx[k];
                            gy[k] += dy * wy[k];
                        }
                    }
                    // BR1 lifting: (<W> - W) / omega with the outward sign.
                    for k in 0..NVAR {
                        let own = we[node][k];
                        if i == n {
                            gx[k] += lift_n * 0.5 * (east[np * j][k] - own);
                        }
                        if i == 0 {
                            gx[k] -= lift_0 * 0.5 * (west[n + np * j][k] - own);
                        }
                        if j == n {
                            gy[k] += lift_n * 0.5 * (north[i][k] - own);
                        }
                        if j == 0 {
                            gy[k] -= lift_0 * 0.5 * (south[i + np * n][k] - own);
                        }
                    }
                    for k in 0..NVAR {
                        g[node][0][k] = metric * gx[k];
                        g[node][1][k] = metric * gy[k];
                    }
                }
            }
        });
    }

    fn numerical_flux(&self, ql: &Primitive, qr: &Primitive, c_h: f64, dir: Dir) -> FluxVector {
        let gamma = self.gas.gamma;
        match self.mode.surface {
            SurfaceMode::Ec => ec_flux_prim(ql, qr, gamma, c_h, dir),
            SurfaceMode::Es => es_flux_prim(ql, qr, gamma, c_h, dir, self.mode.dissipation),
        }
    }

    fn face_pass(
        &self,
        prims: &[Primitive],
        fv: &[[FluxVector; 2]],
        c_h: f64,
        xfaces: &mut [FaceTrace],
        yfaces: &mut [FaceTrace],
    ) {
        let np = self.ops.num_nodes();
        let nn = np * np;
        let n = np - 1;
        let viscous = self.gas.is_viscous();
        // Each element owns its east and north faces; the left state is the
        // element's own trace, the right state the neighbor's.
        let trace = |l: usize, r: usize, dir: Dir| {
            let d = dir.index();
            let visc = if viscous {
                std::array::from_fn(|k| 0.5 * (fv[l][d][k] + fv[r][d][k]))
            } else {
                [0.0; NVAR]
            };
            FaceTrace {
                flux: self.numerical_flux(&prims[l], &prims[r], c_h, dir),
                visc,
                bn: 0.5 * (prims[l].b[d] + prims[r].b[d]),
            }
        };
        par::for_each_chunk(xfaces, np, |e, f| {
            let east = self.mesh.neighbor(e, Face::East);
            for (j, fj) in f.iter_mut().enumerate() {
                *fj = trace(e * nn + n + np * j, east * nn + np * j, Dir::X);
            }
        });
        par::for_each_chunk(yfaces, np, |e, f| {
            let north = self.mesh.neighbor(e, Face::North);
            for (i, fi) in f.iter_mut().enumerate() {
                *fi = trace(e * nn + i + np * n, north * nn + i, Dir::Y);
            }
        });
    }

    /// Hands every contribution of element `e`, in reference units and
    /// before the sign and metric factors, to `sink(term, node, value)`.
    fn element_terms<S: FnMut(Term, usize, &State)>(&self, e: usize, ws: &Workspace, c_h: f64, t: f64, sink: &mut S) {
        let ops = &self.ops;
        let np = ops.num_nodes();
        let nn = np * np;
        let n = np - 1;
        let gamma = self.gas.gamma;
        let inv_wn = 1.0 / ops.weights[n];
        let inv_w0 = 1.0 / ops.weights[0];
        let base = e * nn;
        let q = &ws.prims[base..base + nn];
        let west = self.mesh.neighbor(e, Face::West);
        let south = self.mesh.neighbor(e, Face::South);
        let east_f = &ws.xfaces[e * np..][..np];
        let west_f = &ws.xfaces[west * np..][..np];
        let north_f = &ws.yfaces[e * np..][..np];
        let south_f = &ws.yfaces[south * np..][..np];

        let vol = match self.mode.volume {
            VolumeMode::EcSplit => volume_split(q, ops, gamma, c_h, FluxPart::Full),
            VolumeMode::Standard => {
                let f1: Vec<FluxVector> = q.iter().map(|x| advective_flux_prim(x, gamma, c_h, Dir::X)).collect();
                let f2: Vec<FluxVector> = q.iter().map(|x| advective_flux_prim(x, gamma, c_h, Dir::Y)).collect();
                volume_standard(&f1, &f2, ops)
            }
        };
        for (node, v) in vol.iter().enumerate() {
            sink(Term::AdvectiveVolume, node, v);
        }

        // The four boundary lines of the element: (node, face trace,
        // lifting factor with outward sign, direction).
        let sides = (0..np).flat_map(|k| {
            [
                (n + np * k, &east_f[k], inv_wn, Dir::X),
                (np * k, &west_f[k], -inv_w0, Dir::X),
                (k + np * n, &north_f[k], inv_wn, Dir::Y),
                (k, &south_f[k], -inv_w0, Dir::Y),
            ]
        });
        let sign = self.mode.noncons_surface_sign;
        for (node, face, lift, dir) in sides.clone() {
            let f = advective_flux_prim(&q[node], gamma, c_h, dir);
            let v: State = std::array::from_fn(|k| lift * (face.flux[k] - f[k]));
            sink(Term::AdvectiveSurface, node, &v);
            let coef = sign * lift * (face.bn - q[node].b[dir.index()]);
            sink(Term::NonconsSurface, node, &janhunen_vector_prim(&q[node], coef));
        }

        let b1: Vec<f64> = q.iter().map(|x| x.b[0]).collect();
        let b2: Vec<f64> = q.iter().map(|x| x.b[1]).collect();
        let div = standard_divergence(&b1, &b2, ops);
        for (node, dv) in div.iter().enumerate() {
            sink(Term::NonconsVolume, node, &janhunen_vector_prim(&q[node], *dv));
        }

        if self.gas.is_viscous() {
            let fv = &ws.fv[base..base + nn];
            let f1: Vec<FluxVector> = fv.iter().map(|f| f[0]).collect();
            let f2: Vec<FluxVector> = fv.iter().map(|f| f[1]).collect();
            for (node, v) in volume_standard(&f1, &f2, ops).iter().enumerate() {
                sink(Term::ViscousVolume, node, v);
            }
            for (node, face, lift, dir) in sides {
                let f = &fv[node][dir.index()];
                let v: State = std::array::from_fn(|k| lift * (face.visc[k] - f[k]));
                sink(Term::ViscousSurface, node, &v);
            }
        }

        if self.gas.alpha != 0.0 {
            for (node, x) in q.iter().enumerate() {
                let mut r = [0.0; NVAR];
                r[PSI] = -self.gas.alpha * x.psi;
                sink(Term::Damping, node, &r);
            }
        }

        if let Some(src) = &self.mode.source {
            for (node, &(x, y)) in self.mesh.node_coords[e].iter().enumerate() {
                sink(Term::Source, node, &src(x, y, t));
            }
        }
    }
}

/// `coef * (0, 0, 0, 0, 0, v, 0)`.
#[inline]
pub fn janhunen_vector_prim(q: &Primitive, coef: f64) -> State {
    [0.0, 0.0, 0.0, 0.0, 0.0, coef * q.v[0], coef * q.v[1], coef * q.v[2], 0.0]
}

/// Split-form volume term `2 sum_m D_im F#(U_ij, U_mj) + 2 sum_m D_jm F#(U_ij, U_im)`
/// of one element in reference units, with `F#` the selected part of the
/// entropy conservative flux.
pub fn volume_split(q: &[Primitive], ops: &SbpOperators, gamma: f64, c_h: f64, part: FluxPart) -> Vec<State> {
    let np = ops.num_nodes();
    let d = &ops.dmat;
    let flux = |a: &Primitive, b: &Primitive, dir: Dir| match part {
        FluxPart::Full => ec_flux_prim(a, b, gamma, c_h, dir),
        FluxPart::Euler => ec_flux_split_prim(a, b, gamma, c_h, dir).0,
        FluxPart::Mhd => ec_flux_split_prim(a, b, gamma, c_h, dir).1,
        FluxPart::Glm => ec_flux_split_prim(a, b, gamma, c_h, dir).2,
    };
    let mut out = vec![[0.0; NVAR]; np * np];
    for (dir, stride, step) in [(Dir::X, np, 1), (Dir::Y, 1, np)] {
        // Line `l` holds nodes l*stride + i*step for i = 0..np.
        for l in 0..np {
            let idx = |i: usize| l * stride + i * step;
            for i in 0..np {
                let a = idx(i);
                let f = flux(&q[a], &q[a], dir);
                let c = 2.0 * d[i][i];
                for k in 0..NVAR {
                    out[a][k] += c * f[k];
                }
                // The two-point flux is symmetric, so each pair is evaluated once.
                for m in i + 1..np {
                    let b = idx(m);
                    let f = flux(&q[a], &q[b], dir);
                    let (ca, cb) = (2.0 * d[i][m], 2.0 * d[m][i]);
                    for k in 0..NVAR {
                        out[a][k] += ca * f[k];
                        out[b][k] += cb * f[k];
                    }
                }
            }
        }
    }
    out
}

/// `sum_m D_im F1(m, j) + sum_m D_jm F2(i, m)` for nodal flux values.
pub fn volume_standard(f1: &[FluxVector], f2: &[FluxVector], ops: &SbpOperators) -> Vec<State> {
    let np = ops.num_nodes();
    let d = &ops.dmat;
    let mut out = vec![[0.0; NVAR]; np * np];
    for j in 0..np {
        for i in 0..np {
            let o = &mut out[i + np * j];
            for m in 0..np {
                let (a, b) = (&f1[m + np * j], &f2[i + np * m]);
                for k in 0..NVAR {
                    o[k] += d[i][m] * a[k] + d[j][m] * b[k];
                }
            }
        }
    }
    out
}

/// Scalar version of [`volume_standard`]: the reference-space divergence of
/// `(b1, b2)`.
pub fn standard_divergence(b1: &[f64], b2: &[f64], ops: &SbpOperators) -> Vec<f64> {
    let np = ops.num_nodes();
    let d = &ops.dmat;
    let mut out = vec![0.0; np * np];
    for j in 0..np {
        for i in 0..np {
            out[i + np * j] = (0..np).map(|m| d[i][m] * b1[m + np * j] + d[j][m] * b2[i + np * m]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Bounds};
    use crate::scenarios::random_periodic_field;
    use crate::verify::{surface_balance, term_contraction};
    use crate::state::testing::random_primitive;
    use crate::state::{entropy_density_prim, theta_prim};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const GAMMA: f64 = 5.0 / 3.0;

    fn solver(order: usize, k: usize, gas: GasConfig, mode: SchemeMode) -> Solver {
        let ops = SbpOperators::new(order).unwrap();
        let mesh = build_mesh(Bounds::unit(), k, k, &ops).unwrap();
        Solver::new(mesh, ops, gas, mode).unwrap()
    }

    fn weights2(ops: &SbpOperators) -> Vec<f64> {
        let np = ops.num_nodes();
        (0..np * np).map(|k| ops.weights[k % np] * ops.weights[k / np]).collect()
    }

    fn random_element(order: usize, seed: u64) -> (SbpOperators, Vec<Primitive>) {
        let ops = SbpOperators::new(order).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let q = (0..ops.num_nodes().pow(2)).map(|_| random_primitive(&mut r)).collect();
        (ops, q)
    }

    fn contract(ops: &SbpOperators, q: &[Primitive], v: &[State]) -> (f64, f64) {
        let wts = weights2(ops);
        let mut sum = 0.0;
        let mut abs = 0.0;
        for ((qk, vk), wk) in q.iter().zip(v).zip(wts) {
            let w = entropy_vars_prim(qk, GAMMA).w;
            let c: f64 = w.iter().zip(vk).map(|(a, b)| a * b).sum();
            sum += wk * c;
            abs += wk * c.abs();
        }
        (sum, abs)
    }

    #[test]
    fn free_stream_is_preserved() {
        for mode in [SchemeMode::entropy_conservative(), SchemeMode::entropy_stable(), SchemeMode::new(VolumeMode::Standard, SurfaceMode::Es, true)] {
            let s = solver(3, 3, GasConfig::new(GAMMA, 0.01, 0.02, 0.72).with_alpha(0.5), mode);
            let q = Primitive { rho: 1.3, v: [0.4, -0.7, 0.2], p: 0.9, b: [0.0; 3], psi: 0.0 };
            let u = s.project(|_, _| q.to_conserved(GAMMA));
            let r = s.rhs(&u, 0.0, 1.2).unwrap();
            let worst = r.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
            assert!(worst <= 1e-13, "{worst}");
        }
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let s = solver(4, 2, GasConfig::new(GAMMA, 0.1, 0.1, 0.72), SchemeMode::entropy_stable());
        let q = Primitive { rho: 2.0, v: [0.1, 0.2, 0.3], p: 1.5, b: [0.3, -0.2, 0.1], psi: 0.05 };
        let g = s.gradients(&s.project(|_, _| q.to_conserved(GAMMA))).unwrap();
        assert!(g.iter().flatten().flatten().all(|x| x.abs() < 1e-13));
    }

    /// Builds a state whose entropy variables are `w(x, y)`.
    fn state_from_w(w: [f64; NVAR]) -> State {
        crate::state::conserved_from_entropy_vars(&w, GAMMA).unwrap()
    }

    #[test]
    fn linear_entropy_variables_have_exact_gradient() {
        // Two elements in x, w linear in x and constant in y. The interior
        // face sees continuous traces, so only the periodic wrap face lifts.
        let ops = SbpOperators::new(3).unwrap();
        let mesh = build_mesh(Bounds::new(0.0, 2.0, 0.0, 1.0), 2, 1, &ops).unwrap();
        let s = Solver::new(mesh, ops, GasConfig::new(GAMMA, 0.1, 0.1, 0.72), SchemeMode::entropy_stable()).unwrap();
        let w0 = entropy_vars_prim(&Primitive { rho: 1.0, v: [0.2, 0.1, 0.0], p: 1.0, b: [0.1, 0.2, 0.3], psi: 0.1 }, GAMMA).w;
        let slope: [f64; NVAR] = [0.1, 0.05, -0.02, 0.03, 0.2, 0.01, -0.04, 0.02, 0.05];
        let u = s.project(|x, _| state_from_w(std::array::from_fn(|k| w0[k] + slope[k] * x)));
        let g = s.gradients(&u).unwrap();
        let np = s.ops.num_nodes();
        for e in 0..2 {
            for node in 0..np * np {
                let i = node % np;
                let on_wrap_face = (e == 0 && i == 0) || (e == 1 && i == np - 1);
                let gk = &g[e * np * np + node];
                for k in 0..NVAR {
                    assert!(gk[1][k].abs() < 1e-12);
                    if !on_wrap_face {
                        assert!((gk[0][k] - slope[k]).abs() < 1e-12, "e{e} node {node} var {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn single_jump_lifts_only_face_nodes() {
        // N = 1, two elements in x, one in y. Element 0 carries W_a and
        // element 1 W_b, constant in each, so D W = 0 and only the lifting
        // survives: (2/dx) (W* - W) / omega with omega = 1.
        let ops = SbpOperators::new(1).unwrap();
        let mesh = build_mesh(Bounds::new(0.0, 2.0, 0.0, 1.0), 2, 1, &ops).unwrap();
        let s = Solver::new(mesh, ops, GasConfig::new(GAMMA, 0.1, 0.1, 0.72), SchemeMode::entropy_stable()).unwrap();
        let qa = Primitive { rho: 1.0, v: [0.1, 0.0, 0.0], p: 1.0, b: [0.0; 3], psi: 0.0 };
        let qb = Primitive { rho: 1.5, v: [-0.2, 0.3, 0.0], p: 0.8, b: [0.2, 0.0, 0.1], psi: 0.1 };
        let (ua, ub) = (qa.to_conserved(GAMMA), qb.to_conserved(GAMMA));
        let u: Vec<State> = (0..2).flat_map(|e| vec![if e == 0 { ua } else { ub }; 4]).collect();
        let wa = entropy_vars_prim(&qa, GAMMA).w;
        let wb = entropy_vars_prim(&qb, GAMMA).w;
        let g = s.gradients(&u).unwrap();
        let m = s.mesh.metric();
        for k in 0..NVAR {
            let jump = 0.5 * (wb[k] - wa[k]);
            // East nodes lift +(W* - W), west nodes -(W* - W); the west
            // neighbor of element 0 is element 1 by periodicity.
            for node in 0..4 {
                let east = if node % 2 == 1 { 1.0 } else { -1.0 };
                assert!((g[node][0][k] - east * m * jump).abs() < 1e-12);
                assert!((g[4 + node][0][k] + east * m * jump).abs() < 1e-12);
                assert!(g[node][1][k].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn volume_standard_is_exact_for_polynomials() {
        let ops = SbpOperators::new(4).unwrap();
        let np = ops.num_nodes();
        let x = &ops.nodes;
        let f1: Vec<FluxVector> = (0..np * np).map(|k| [x[k % np].powi(4) * x[k / np]; NVAR]).collect();
        let f2: Vec<FluxVector> = (0..np * np).map(|k| [x[k % np] * x[k / np].powi(3); NVAR]).collect();
        let out = volume_standard(&f1, &f2, &ops);
        for k in 0..np * np {
            let (xi, eta) = (x[k % np], x[k / np]);
            let exact = 4.0 * xi.powi(3) * eta + 3.0 * xi * eta * eta;
            assert!((out[k][0] - exact).abs() < 1e-11);
        }
        let constant = vec![[1.0; NVAR]; np * np];
        assert!(volume_standard(&constant, &constant, &ops).iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn glm_volume_contraction_vanishes() {
        for (order, seed) in [(3, 1), (4, 2), (6, 3)] {
            let (ops, q) = random_element(order, seed);
            let v = volume_split(&q, &ops, GAMMA, 1.7, FluxPart::Glm);
            let (sum, abs) = contract(&ops, &q, &v);
            assert!(sum.abs() <= 1e-12 * abs.max(1.0), "N={order}: {sum}");
        }
    }

    #[test]
    fn euler_volume_contraction_is_boundary_entropy_flux() {
        for (order, seed) in [(2, 4), (4, 5), (5, 6)] {
            let (ops, q) = random_element(order, seed);
            let np = ops.num_nodes();
            let n = np - 1;
            let v = volume_split(&q, &ops, GAMMA, 0.0, FluxPart::Euler);
            let (sum, abs) = contract(&ops, &q, &v);
            let fs = |k: usize, d: usize| q[k].v[d] * entropy_density_prim(&q[k], GAMMA);
            let boundary: f64 = (0..np)
                .map(|l| {
                    ops.weights[l]
                        * (fs(n + np * l, 0) - fs(np * l, 0) + fs(l + np * n, 1) - fs(l, 1))
                })
                .sum();
            assert!((sum - boundary).abs() <= 1e-11 * abs.max(1.0), "N={order}: {sum} vs {boundary}");
        }
    }

    #[test]
    fn mhd_volume_cancels_noncons_volume() {
        for (order, seed) in [(2, 7), (4, 8), (7, 9)] {
            let (ops, q) = random_element(order, seed);
            let mut v = volume_split(&q, &ops, GAMMA, 0.0, FluxPart::Mhd);
            let b1: Vec<f64> = q.iter().map(|x| x.b[0]).collect();
            let b2: Vec<f64> = q.iter().map(|x| x.b[1]).collect();
            for ((vk, dv), qk) in v.iter_mut().zip(standard_divergence(&b1, &b2, &ops)).zip(&q) {
                let nc = janhunen_vector_prim(qk, dv);
                for k in 0..NVAR {
                    vk[k] += nc[k];
                }
            }
            let (sum, abs) = contract(&ops, &q, &v);
            assert!(sum.abs() <= 1e-11 * abs.max(1.0), "N={order}: {sum}");
        }
    }

    #[test]
    fn constant_state_split_volume_is_zero() {
        let ops = SbpOperators::new(5).unwrap();
        let q = vec![Primitive { rho: 1.1, v: [0.3, 0.2, -0.1], p: 0.7, b: [0.0; 3], psi: 0.0 }; 36];
        let v = volume_split(&q, &ops, GAMMA, 1.0, FluxPart::Full);
        assert!(v.iter().flatten().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn surface_balance_sums_to_zero_and_canary_breaks_it() {
        // Nodal random data, so traces jump across every face.
        let s = solver(4, 4, GasConfig::inviscid(GAMMA), SchemeMode::entropy_conservative());
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<State> = (0..s.num_nodes()).map(|_| random_primitive(&mut r).to_conserved(GAMMA)).collect();
        let (sum, abs) = surface_balance(&s, &u, 1.3).unwrap();
        assert!(abs > 1e-6, "balance terms should not be trivially zero");
        assert!(sum.abs() <= 1e-11 * abs, "{sum} vs {abs}");

        let mut flipped = s.clone();
        flipped.mode.noncons_surface_sign = -1.0;
        let (sum, abs) = surface_balance(&flipped, &u, 1.3).unwrap();
        assert!(sum.abs() > 1e-6 * abs, "canary not detected: {sum}");
    }

    #[test]
    fn single_face_noncons_entropy_is_minus_theta_jump() {
        let s = solver(1, 2, GasConfig::inviscid(GAMMA), SchemeMode::entropy_conservative());
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let q: Vec<Primitive> = (0..s.num_nodes()).map(|_| random_primitive(&mut r)).collect();
        let u: Vec<State> = q.iter().map(|x| x.to_conserved(GAMMA)).collect();
        let terms = s.rhs_terms(&u, 0.0, 1.0).unwrap();
        let nc = &terms[Term::NonconsSurface as usize];
        let total: f64 = (0..s.mesh.num_elements()).map(|e| term_contraction(&s, &u, &[nc], e).unwrap()).sum();
        // Hand sum over every face of -<theta> [[B.n]] weighted by the face
        // quadrature (dx/2) omega.
        let np = s.ops.num_nodes();
        let nn = np * np;
        let mut expected = 0.0;
        for e in 0..s.mesh.num_elements() {
            let east = s.mesh.neighbor(e, Face::East);
            let north = s.mesh.neighbor(e, Face::North);
            for l in 0..np {
                for (a, b, d) in [(e * nn + 1 + np * l, east * nn + np * l, 0), (e * nn + l + np, north * nn + l, 1)] {
                    let avg = 0.5 * (theta_prim(&q[a]) + theta_prim(&q[b]));
                    expected -= 0.5 * s.mesh.dx * s.ops.weights[l] * avg * (q[b].b[d] - q[a].b[d]);
                }
            }
        }
        assert!((total - expected).abs() <= 1e-12 * expected.abs().max(1.0), "{total} vs {expected}");
    }

    #[test]
    fn entropy_conservative_scheme_conserves_entropy() {
        let s = solver(4, 4, GasConfig::inviscid(GAMMA), SchemeMode::entropy_conservative());
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let rough: Vec<State> = (0..s.num_nodes()).map(|_| random_primitive(&mut r).to_conserved(GAMMA)).collect();
        for u in [random_periodic_field(&s.mesh, GAMMA, 3), rough] {
            let r = s.rhs(&u, 0.0, 1.5).unwrap();
            let (sum, abs) = s.entropy_contraction(&u, &r).unwrap();
            assert!(abs > 1e-3);
            assert!(sum.abs() <= 1e-11 * abs, "{sum} vs {abs}");
        }
    }

    #[test]
    fn dissipative_configurations_do_not_produce_entropy() {
        let cases = [
            (GasConfig::new(GAMMA, 8.5e-4, 1e-5, 0.72), SchemeMode::entropy_conservative()),
            (GasConfig::inviscid(GAMMA), SchemeMode::entropy_stable()),
            (GasConfig::new(GAMMA, 0.05, 0.05, 0.72).with_alpha(2.0), SchemeMode::entropy_stable()),
        ];
        for (gas, mode) in cases {
            let s = solver(4, 4, gas, mode);
            let u = random_periodic_field(&s.mesh, GAMMA, 8);
            let r = s.rhs(&u, 0.0, 1.5).unwrap();
            let (sum, _) = s.entropy_contraction(&u, &r).unwrap();
            assert!(sum <= 1e-12, "{sum}");
            assert!(sum < 0.0);
        }
    }

    #[test]
    fn hydrodynamic_totals_are_conserved() {
        let s = solver(3, 4, GasConfig::inviscid(GAMMA), SchemeMode::entropy_conservative());
        let u = random_periodic_field(&s.mesh, GAMMA, 21);
        let r = s.rhs(&u, 0.0, 1.0).unwrap();
        let wts = weights2(&s.ops);
        let nn = wts.len();
        for k in 0..5 {
            let total: f64 = r.iter().enumerate().map(|(n, x)| wts[n % nn] * x[k]).sum();
            let scale: f64 = r.iter().enumerate().map(|(n, x)| wts[n % nn] * x[k].abs()).sum();
            assert!(total.abs() <= 1e-12 * scale.max(1.0), "var {k}: {total}");
        }
    }

    #[test]
    fn terms_sum_to_rhs() {
        let mut mode = SchemeMode::entropy_stable();
        mode.source = Some(Arc::new(|x, y, t| [x, y, t, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]));
        let s = solver(3, 3, GasConfig::new(GAMMA, 0.02, 0.03, 0.72).with_alpha(1.0), mode);
        let u = random_periodic_field(&s.mesh, GAMMA, 4);
        let r = s.rhs(&u, 0.3, 1.0).unwrap();
        let terms = s.rhs_terms(&u, 0.3, 1.0).unwrap();
        for (n, rn) in r.iter().enumerate() {
            for k in 0..NVAR {
                let sum: f64 = terms.iter().map(|t| t[n][k]).sum();
                assert!((sum - rn[k]).abs() <= 1e-10 * (1.0 + rn[k].abs()));
            }
        }
    }

    #[test]
    fn inadmissible_state_is_reported() {
        let s = solver(2, 2, GasConfig::inviscid(GAMMA), SchemeMode::entropy_stable());
        let mut u = random_periodic_field(&s.mesh, GAMMA, 1);
        u[7][4] = -1.0;
        assert!(matches!(s.rhs(&u, 0.0, 1.0), Err(Error::NonPositivePressure(_))));
        u[7][0] = f64::NAN;
        assert!(s.rhs(&u, 0.0, 1.0).is_err());
    }

    #[test]
    fn thread_count_does_not_change_the_result() {
        let s = solver(4, 4, GasConfig::new(GAMMA, 0.01, 0.01, 0.72), SchemeMode::entropy_stable());
        let u = random_periodic_field(&s.mesh, GAMMA, 9);
        let a = par::with_threads(Some(1), || s.rhs(&u, 0.0, 1.0).unwrap());
        let b = par::with_threads(Some(3), || s.rhs(&u, 0.0, 1.0).unwrap());
        assert!(a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
