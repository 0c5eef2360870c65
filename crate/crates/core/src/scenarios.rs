//! Initial conditions, exact solutions and source terms for the test cases.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dg::SourceFn;
use crate::error::{Error, Result};
use crate::mesh::{Bounds, CartesianMesh};
use crate::state::{GasConfig, Primitive, State};

pub type InitialFn = Arc<dyn Fn(f64, f64) -> State + Send + Sync>;
pub type ReferenceFn = Arc<dyn Fn(f64, f64, f64) -> State + Send + Sync>;

#[derive(Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub bounds: Bounds,
    pub gas: GasConfig,
    pub t_final: f64,
    pub initial: InitialFn,
    pub reference: Option<ReferenceFn>,
    pub source: Option<SourceFn>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("gas", &self.gas)
            .field("t_final", &self.t_final)
            .finish_non_exhaustive()
    }
}

pub const NAMES: [&str; 4] = ["mms", "shock_tube", "gaussian_pulse", "orszag_tang"];

pub fn by_name(name: &str) -> Result<Scenario> {
    match name {
        "mms" => Ok(mms()),
        "shock_tube" => Ok(shock_tube()),
        "gaussian_pulse" => Ok(gaussian_pulse()),
        "orszag_tang" => Ok(orszag_tang()),
        _ => Err(Error::Config(format!("unknown scenario '{name}' (expected one of {})", NAMES.join(", ")))),
    }
}

const MMS_MU: f64 = 0.05;
const MMS_ETA: f64 = 0.05;

fn mms_h(x: f64, y: f64, t: f64) -> f64 {
    (2.0 * PI * (x + y) - 4.0 * t).sin() + 4.0
}

/// `u = (h, h, h, 0, 2h^2, h, -h, 0, 0)`.
pub fn mms_state(x: f64, y: f64, t: f64) -> State {
    let h = mms_h(x, y, t);
    [h, h, h, 0.0, 2.0 * h * h, h, -h, 0.0, 0.0]
}

/// Residual of the manufactured solution in the resistive GLM-MHD
/// equations, with `h' = dh/dx = dh/dy`.
pub fn mms_source(x: f64, y: f64, t: f64, gas: &GasConfig) -> State {
    let arg = 2.0 * PI * (x + y) - 4.0 * t;
    let h = arg.sin() + 4.0;
    let ht = -4.0 * arg.cos();
    let hx = 2.0 * PI * arg.cos();
    let hxx = -4.0 * PI * PI * arg.sin();
    let (eta, kappa_r) = (gas.eta, gas.kappa / gas.rgas);
    let mass = ht + 2.0 * hx;
    let mom = ht + hx + 4.0 * h * hx;
    let energy = 4.0 * h * ht + 16.0 * h * hx - 2.0 * hx - 4.0 * eta * (hx * hx + h * hxx) - 2.0 * kappa_r * hxx;
    let b1 = ht + 2.0 * hx - 2.0 * eta * hxx;
    [mass, mom, mom, 0.0, energy, b1, -b1, 0.0, 0.0]
}

pub fn mms() -> Scenario {
    let gas = GasConfig::new(2.0, MMS_MU, MMS_ETA, 0.72);
    Scenario {
        name: "mms",
        bounds: Bounds::unit(),
        gas,
        t_final: 0.5,
        initial: Arc::new(|x, y| mms_state(x, y, 0.0)),
        reference: Some(Arc::new(mms_state)),
        source: Some(Arc::new(move |x, y, t| mms_source(x, y, t, &gas))),
    }
}

/// Oblique shock tube: left state for `x < y`, right state on and below the
/// diagonal.
pub fn shock_tube_primitive(x: f64, y: f64) -> Primitive {
    let s = 1.0 / (4.0 * PI).sqrt();
    if x < y {
        Primitive { rho: 1.0, v: [0.0; 3], p: 1.0, b: [2.0 * s, 4.0 * s, 2.0 * s], psi: 0.0 }
    } else {
        Primitive { rho: 1.08, v: [0.6, 0.01, 0.5], p: 0.95, b: [2.0 * s, 3.6 * s, 2.0 * s], psi: 0.0 }
    }
}

pub fn shock_tube() -> Scenario {
    let gas = GasConfig::inviscid(5.0 / 3.0);
    Scenario {
        name: "shock_tube",
        bounds: Bounds::unit(),
        gas,
        t_final: 0.5,
        initial: Arc::new(move |x, y| shock_tube_primitive(x, y).to_conserved(gas.gamma)),
        reference: None,
        source: None,
    }
}

pub fn gaussian_pulse_b1(x: f64, y: f64) -> f64 {
    (-0.5 * (x * x + y * y) / (0.11 * 0.11)).exp()
}

pub fn gaussian_pulse() -> Scenario {
    Scenario {
        name: "gaussian_pulse",
        bounds: Bounds::new(-1.0, 1.0, -1.0, 1.0),
        gas: GasConfig::inviscid(5.0 / 3.0),
        t_final: 1.0,
        initial: Arc::new(|x, y| [1.0, 0.0, 0.0, 0.0, 6.0, gaussian_pulse_b1(x, y), 0.0, 0.0, 0.0]),
        reference: None,
        source: None,
    }
}

pub fn orszag_tang_primitive(x: f64, y: f64, gamma: f64) -> Primitive {
    let (sx, sy) = ((2.0 * PI * x).sin(), (2.0 * PI * y).sin());
    Primitive {
        rho: 1.0,
        v: [-sy, sx, 0.0],
        p: 1.0 / gamma,
        b: [-sy / gamma, (4.0 * PI * x).sin() / gamma, 0.0],
        psi: 0.0,
    }
}

pub fn orszag_tang() -> Scenario {
    let gas = GasConfig::new(5.0 / 3.0, 8.5e-4, 1e-5, 0.72);
    Scenario {
        name: "orszag_tang",
        bounds: Bounds::unit(),
        gas,
        t_final: 0.5,
        initial: Arc::new(move |x, y| orszag_tang_primitive(x, y, gas.gamma).to_conserved(gas.gamma)),
        reference: None,
        source: None,
    }
}

/// Smooth, periodic, admissible random field built from a few low Fourier
/// modes per variable. Reproducible from `seed`.
pub fn random_periodic_field(mesh: &CartesianMesh, gamma: f64, seed: u64) -> Vec<State> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let b = mesh.bounds;
    let (lx, ly) = (b.x1 - b.x0, b.y1 - b.y0);
    // Each variable: two modes of amplitude 1/2, so |m| <= 1.
    let modes: Vec<[(f64, f64, f64); 2]> = (0..9)
        .map(|_| {
            std::array::from_fn(|_| {
                let (kx, ky) = loop {
                    let k = (r.gen_range(0..3) as f64, r.gen_range(0..3) as f64);
                    if k != (0.0, 0.0) {
                        break k;
                    }
                };
                (kx, ky, r.gen_range(0.0..2.0 * PI))
            })
        })
        .collect();
    let m = |var: usize, x: f64, y: f64| -> f64 {
        modes[var]
            .iter()
            .map(|&(kx, ky, ph)| 0.5 * (2.0 * PI * (kx * (x - b.x0) / lx + ky * (y - b.y0) / ly) + ph).sin())
            .sum()
    };
    mesh.node_coords
        .iter()
        .flat_map(|nodes| {
            nodes.iter().map(|&(x, y)| {
                Primitive {
                    rho: 1.0 + 0.3 * m(0, x, y),
                    v: [0.5 * m(1, x, y), 0.5 * m(2, x, y), 0.5 * m(3, x, y)],
                    p: 1.0 + 0.3 * m(4, x, y),
                    b: [0.5 * m(5, x, y), 0.5 * m(6, x, y), 0.5 * m(7, x, y)],
                    psi: 0.2 * m(8, x, y),
                }
                .to_conserved(gamma)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::advective_flux;
    use crate::mesh::build_mesh;
    use crate::sbp::SbpOperators;
    use crate::state::{pressure, primitive, Dir, NVAR};
    use crate::viscous::viscous_flux_direct;

    #[test]
    fn mms_origin_state() {
        let u = mms_state(0.0, 0.0, 0.0);
        assert_eq!(u, [4.0, 4.0, 4.0, 0.0, 32.0, 4.0, -4.0, 0.0, 0.0]);
        assert_eq!(pressure(&u, 2.0), 12.0);
    }

    /// Physical viscous flux from the analytic primitive fields, with the
    /// gradients taken by central differences.
    fn viscous_fd(x: f64, y: f64, t: f64, gas: &GasConfig, h: f64) -> [[f64; NVAR]; 3] {
        let prim = |x: f64, y: f64| primitive(&mms_state(x, y, t), gas.gamma).unwrap();
        let q = prim(x, y);
        let grad = |e: usize| {
            let (a, b) = if e == 0 { (prim(x + h, y), prim(x - h, y)) } else { (prim(x, y + h), prim(x, y - h)) };
            let d = |f: fn(&Primitive) -> f64| (f(&a) - f(&b)) / (2.0 * h);
            (
                [d(|q| q.v[0]), d(|q| q.v[1]), d(|q| q.v[2])],
                d(|q| q.p / q.rho),
                [d(|q| q.b[0]), d(|q| q.b[1]), d(|q| q.b[2])],
            )
        };
        let (gx, gy) = (grad(0), grad(1));
        let gv = [gx.0, gy.0, [0.0; 3]];
        let gt = [gx.1 / gas.rgas, gy.1 / gas.rgas, 0.0];
        let gb = [gx.2, gy.2, [0.0; 3]];
        viscous_flux_direct(&q, &gv, &gt, &gb, gas)
    }

    #[test]
    fn mms_source_matches_finite_difference_residual() {
        let s = mms();
        let gas = s.gas;
        let h = 1e-4;
        let h2 = 1e-3;
        for &(x, y, t) in &[(0.1, 0.3, 0.0), (0.77, 0.12, 0.2), (0.5, 0.5, 0.45), (0.33, 0.9, 0.31)] {
            let src = mms_source(x, y, t, &gas);
            let ut: Vec<f64> = (0..NVAR)
                .map(|k| (mms_state(x, y, t + h)[k] - mms_state(x, y, t - h)[k]) / (2.0 * h))
                .collect();
            let fa = |x: f64, y: f64, dir| advective_flux(&mms_state(x, y, t), gas.gamma, 0.0, dir).unwrap();
            let q = primitive(&mms_state(x, y, t), gas.gamma).unwrap();
            let b = |x: f64, y: f64| primitive(&mms_state(x, y, t), gas.gamma).unwrap().b;
            let div_b = (b(x + h, y)[0] - b(x - h, y)[0] + b(x, y + h)[1] - b(x, y - h)[1]) / (2.0 * h);
            for k in 0..NVAR {
                let adv = (fa(x + h, y, Dir::X)[k] - fa(x - h, y, Dir::X)[k]) / (2.0 * h)
                    + (fa(x, y + h, Dir::Y)[k] - fa(x, y - h, Dir::Y)[k]) / (2.0 * h);
                let visc = (viscous_fd(x + h2, y, t, &gas, h2)[0][k] - viscous_fd(x - h2, y, t, &gas, h2)[0][k]) / (2.0 * h2)
                    + (viscous_fd(x, y + h2, t, &gas, h2)[1][k] - viscous_fd(x, y - h2, t, &gas, h2)[1][k]) / (2.0 * h2);
                let nc = if (5..8).contains(&k) { q.v[k - 5] * div_b } else { 0.0 };
                let residual = ut[k] + adv + nc - visc;
                let scale = 1.0 + src[k].abs();
                assert!((residual - src[k]).abs() < 1e-4 * scale, "({x},{y},{t}) var {k}: fd {residual} vs {}", src[k]);
            }
        }
    }

    #[test]
    fn shock_tube_states() {
        let l = shock_tube_primitive(0.2, 0.8);
        assert_eq!(l.rho, 1.0);
        assert!((l.b[0] - 0.564190).abs() < 1e-6);
        let r = shock_tube_primitive(0.8, 0.2);
        assert_eq!(r.v[1], 0.01);
        assert_eq!(shock_tube_primitive(0.4, 0.4).rho, 1.08);
    }

    #[test]
    fn gaussian_pulse_values() {
        assert_eq!(gaussian_pulse_b1(0.0, 0.0), 1.0);
        assert!((gaussian_pulse_b1(0.11, 0.0) - (-0.5f64).exp()).abs() < 1e-15);
        let s = gaussian_pulse();
        let p = pressure(&(s.initial)(0.0, 0.0), s.gas.gamma);
        assert!((p - 2.0 / 3.0 * 5.5).abs() < 1e-14);
    }

    #[test]
    fn orszag_tang_values() {
        let g = 5.0 / 3.0;
        let q = orszag_tang_primitive(0.0, 0.25, g);
        assert!((q.v[0] + 1.0).abs() < 1e-15);
        assert!((q.b[0] + 0.6).abs() < 1e-15);
        assert!((orszag_tang_primitive(0.125, 0.0, g).b[1] - 0.6).abs() < 1e-15);
        assert!((q.p - 0.6).abs() < 1e-15);
    }

    #[test]
    fn initial_states_are_admissible_on_fine_grid() {
        let ops = SbpOperators::new(4).unwrap();
        for name in NAMES {
            let s = by_name(name).unwrap();
            let mesh = build_mesh(s.bounds, 40, 40, &ops).unwrap();
            for (x, y) in mesh.node_coords.iter().flatten() {
                assert!(primitive(&(s.initial)(*x, *y), s.gas.gamma).is_ok(), "{name} at ({x},{y})");
            }
        }
        assert!(by_name("nope").is_err());
    }

    #[test]
    fn random_field_is_admissible_and_reproducible() {
        let ops = SbpOperators::new(3).unwrap();
        let mesh = build_mesh(Bounds::unit(), 4, 4, &ops).unwrap();
        let a = random_periodic_field(&mesh, 5.0 / 3.0, 7);
        assert_eq!(a, random_periodic_field(&mesh, 5.0 / 3.0, 7));
        assert_ne!(a, random_periodic_field(&mesh, 5.0 / 3.0, 8));
        assert!(a.iter().all(|u| primitive(u, 5.0 / 3.0).is_ok()));
    }
}
