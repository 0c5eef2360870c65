//! Conserved, primitive and entropy variables of the GLM-MHD system.
//!
//! Conserved ordering is `(rho, rho v1, rho v2, rho v3, E, B1, B2, B3, psi)`.

use crate::error::{Error, Result};

pub const NVAR: usize = 9;

pub const RHO: usize = 0;
pub const MOM: usize = 1;
pub const ENERGY: usize = 4;
pub const MAG: usize = 5;
pub const PSI: usize = 8;

/// Conserved state at one point.
pub type State = [f64; NVAR];

/// Coordinate direction of a flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    X,
    Y,
}

impl Dir {
    pub fn index(self) -> usize {
        match self {
            Dir::X => 0,
            Dir::Y => 1,
        }
    }
}

/// Swaps `(v1, v2)` and `(B1, B2)`. Maps x-direction fluxes onto y-direction
/// ones: `f_y(u) = P f_x(P u)`.
#[inline]
pub fn swap_xy(u: &State) -> State {
    [u[0], u[2], u[1], u[3], u[4], u[6], u[5], u[7], u[8]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasConfig {
    pub gamma: f64,
    pub rgas: f64,
    pub prandtl: f64,
    pub mu: f64,
    pub eta: f64,
    /// Thermal conductivity, tied to `mu` through the Prandtl number.
    pub kappa: f64,
    pub alpha: f64,
}

impl GasConfig {
    /// `kappa = mu * gamma * R / ((gamma - 1) * Pr)`, i.e. `c_p mu / Pr`.
    pub fn new(gamma: f64, mu: f64, eta: f64, prandtl: f64) -> Self {
        let rgas = 1.0;
        Self {
            gamma,
            rgas,
            prandtl,
            mu,
            eta,
            kappa: mu * gamma * rgas / ((gamma - 1.0) * prandtl),
            alpha: 0.0,
        }
    }

    pub fn inviscid(gamma: f64) -> Self {
        Self::new(gamma, 0.0, 0.0, 0.72)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.rgas > 0.0 && self.prandtl > 0.0) {
            return Err(Error::Config("R and Pr must be positive".into()));
        }
        if !(self.mu >= 0.0 && self.eta >= 0.0 && self.kappa >= 0.0 && self.alpha >= 0.0) {
            return Err(Error::Config(
                "mu, eta, kappa and alpha must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_viscous(&self) -> bool {
        self.mu > 0.0 || self.eta > 0.0 || self.kappa > 0.0
    }
}

/// Primitive variables `(rho, v, p, B, psi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub v: [f64; 3],
    pub p: f64,
    pub b: [f64; 3],
    pub psi: f64,
}

impl Primitive {
    pub fn to_conserved(&self, gamma: f64) -> State {
        let [v1, v2, v3] = self.v;
        let [b1, b2, b3] = self.b;
        let kin = 0.5 * self.rho * (v1 * v1 + v2 * v2 + v3 * v3);
        let mag = 0.5 * (b1 * b1 + b2 * b2 + b3 * b3);
        let energy = self.p / (gamma - 1.0) + kin + mag + 0.5 * self.psi * self.psi;
        [
            self.rho,
            self.rho * v1,
            self.rho * v2,
            self.rho * v3,
            energy,
            b1,
            b2,
            b3,
            self.psi,
        ]
    }

    /// Converts without admissibility checks.
    pub fn from_conserved(u: &State, gamma: f64) -> Self {
        let rho = u[RHO];
        let v = [u[1] / rho, u[2] / rho, u[3] / rho];
        Self {
            rho,
            v,
            p: pressure(u, gamma),
            b: [u[5], u[6], u[7]],
            psi: u[PSI],
        }
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        0.5 * self.rho / self.p
    }
}

/// Pressure from the equation of state; may be non-positive.
#[inline]
pub fn pressure(u: &State, gamma: f64) -> f64 {
    let rho = u[RHO];
    let m2 = u[1] * u[1] + u[2] * u[2] + u[3] * u[3];
    let b2 = u[5] * u[5] + u[6] * u[6] + u[7] * u[7];
    (gamma - 1.0) * (u[ENERGY] - 0.5 * m2 / rho - 0.5 * b2 - 0.5 * u[PSI] * u[PSI])
}

/// Pressure, flagging non-positive density or pressure.
pub fn checked_pressure(u: &State, gamma: f64) -> Result<f64> {
    if !(u[RHO] > 0.0) {
        return Err(Error::NonPositiveDensity(u[RHO]));
    }
    let p = pressure(u, gamma);
    if !(p > 0.0) {
        return Err(Error::NonPositivePressure(p));
    }
    Ok(p)
}

/// Primitive variables of an admissible state.
pub fn primitive(u: &State, gamma: f64) -> Result<Primitive> {
    checked_pressure(u, gamma)?;
    Ok(Primitive::from_conserved(u, gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyState {
    pub w: [f64; NVAR],
    pub beta: f64,
}

/// Entropy variables from primitives, assuming `rho, p > 0`.
#[inline]
pub fn entropy_vars_prim(q: &Primitive, gamma: f64) -> EntropyState {
    let beta = q.beta();
    let s = q.p.ln() - gamma * q.rho.ln();
    let [v1, v2, v3] = q.v;
    let [b1, b2, b3] = q.b;
    let two_beta = 2.0 * beta;
    EntropyState {
        w: [
            (gamma - s) / (gamma - 1.0) - beta * (v1 * v1 + v2 * v2 + v3 * v3),
            two_beta * v1,
            two_beta * v2,
            two_beta * v3,
            -two_beta,
            two_beta * b1,
            two_beta * b2,
            two_beta * b3,
            two_beta * q.psi,
        ],
        beta,
    }
}

pub fn entropy_vars(u: &State, gamma: f64) -> Result<EntropyState> {
    Ok(entropy_vars_prim(&primitive(u, gamma)?, gamma))
}

/// Inverse of [`entropy_vars`].
///
/// With `s = ln p - gamma ln rho` and `p = rho / (2 beta)` one gets
/// `ln rho = (s + ln(2 beta)) / (1 - gamma)`.
pub fn conserved_from_entropy_vars(w: &[f64; NVAR], gamma: f64) -> Result<State> {
    if !(w[4] < 0.0) {
        return Err(Error::InvalidEntropyVariables(w[4]));
    }
    let two_beta = -w[4];
    let beta = 0.5 * two_beta;
    let v = [w[1] / two_beta, w[2] / two_beta, w[3] / two_beta];
    let b = [w[5] / two_beta, w[6] / two_beta, w[7] / two_beta];
    let psi = w[8] / two_beta;
    let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let s = gamma - (gamma - 1.0) * (w[0] + beta * v2);
    let rho = ((s + two_beta.ln()) / (1.0 - gamma)).exp();
    let p = rho / two_beta;
    Ok(Primitive { rho, v, p, b, psi }.to_conserved(gamma))
}

/// Mathematical entropy `S = -rho s / (gamma - 1)`.
pub fn entropy_density(u: &State, gamma: f64) -> Result<f64> {
    let q = primitive(u, gamma)?;
    Ok(entropy_density_prim(&q, gamma))
}

#[inline]
pub fn entropy_density_prim(q: &Primitive, gamma: f64) -> f64 {
    let s = q.p.ln() - gamma * q.rho.ln();
    -q.rho * s / (gamma - 1.0)
}

/// Janhunen non-conservative vector `(0, 0, 0, 0, 0, v, 0)`.
pub fn janhunen_vector(u: &State) -> [f64; NVAR] {
    let rho = u[RHO];
    [0.0, 0.0, 0.0, 0.0, 0.0, u[1] / rho, u[2] / rho, u[3] / rho, 0.0]
}

/// `theta = w . phi = 2 beta (v . B)`.
pub fn theta(u: &State, gamma: f64) -> Result<f64> {
    let q = primitive(u, gamma)?;
    Ok(theta_prim(&q))
}

#[inline]
pub fn theta_prim(q: &Primitive) -> f64 {
    2.0 * q.beta() * (q.v[0] * q.b[0] + q.v[1] * q.b[1] + q.v[2] * q.b[2])
}

/// Entropy flux potentials split into Euler, ideal MHD and GLM parts.
///
/// Closed forms: `rho v_n`, `beta v_n |B|^2` and `2 c_h beta psi B_n`.
pub fn entropy_flux_potentials(u: &State, gamma: f64, c_h: f64, dir: Dir) -> Result<(f64, f64, f64)> {
    let q = primitive(u, gamma)?;
    Ok(entropy_flux_potentials_prim(&q, c_h, dir))
}

#[inline]
pub fn entropy_flux_potentials_prim(q: &Primitive, c_h: f64, dir: Dir) -> (f64, f64, f64) {
    let d = dir.index();
    let beta = q.beta();
    let b2 = q.b[0] * q.b[0] + q.b[1] * q.b[1] + q.b[2] * q.b[2];
    (
        q.rho * q.v[d],
        beta * q.v[d] * b2,
        2.0 * c_h * beta * q.psi * q.b[d],
    )
}

/// Random states for property checks.
pub mod testing {
    use super::*;
    use rand::Rng;

    /// Random admissible primitive state with moderate magnitudes.
    pub fn random_primitive<R: Rng>(rng: &mut R) -> Primitive {
        Primitive {
            rho: rng.gen_range(0.3..3.0),
            v: [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)],
            p: rng.gen_range(0.3..3.0),
            b: [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)],
            psi: rng.gen_range(-0.5..0.5),
        }
    }
}
