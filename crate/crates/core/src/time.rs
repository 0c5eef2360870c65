//! Five-stage, fourth-order low-storage Runge-Kutta (Carpenter-Kennedy) with
//! CFL/DFL time step control.

use crate::dg::{Solver, Workspace};
use crate::error::{BlowUpReport, Error, Result};
use crate::flux::max_wave_speed_prim;
use crate::state::{pressure, primitive, Dir, Primitive, State, NVAR, RHO};

pub const LSRK_A: [f64; 5] = [
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
];

pub const LSRK_B: [f64; 5] = [
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
];

pub const LSRK_C: [f64; 5] = [
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363183110.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControls {
    pub cfl: f64,
    pub dfl: f64,
    pub t_final: f64,
    pub max_steps: usize,
    /// Overrides the CFL/DFL step (the last step is still clipped).
    pub fixed_dt: Option<f64>,
}

impl TimeControls {
    pub fn new(t_final: f64) -> Self {
        TimeControls { cfl: 0.5, dfl: 0.5, t_final, max_steps: 10_000_000, fixed_dt: None }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.cfl) || !unit(self.dfl) {
            return Err(Error::Config(format!("cfl and dfl must lie in (0, 1], got {} and {}", self.cfl, self.dfl)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("t_final must be finite and non-negative, got {}", self.t_final)));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("fixed dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// One low-storage RK step of `du/dt = rhs(u, t)`. `k` is the second
/// register and `du` holds the stage derivative.
pub fn lsrk4_step<F>(u: &mut [State], t: f64, dt: f64, k: &mut [State], du: &mut [State], mut rhs: F) -> Result<()>
where
    F: FnMut(&[State], f64, &mut [State]) -> Result<()>,
{
    for s in 0..5 {
        rhs(u, t + LSRK_C[s] * dt, du)?;
        let (a, b) = (LSRK_A[s], LSRK_B[s]);
        for ((ui, ki), di) in u.iter_mut().zip(k.iter_mut()).zip(du.iter()) {
            for v in 0..NVAR {
                ki[v] = a * ki[v] + dt * di[v];
                ui[v] += b * ki[v];
            }
        }
    }
    Ok(())
}

/// Cleaning speed: the largest `|v_n| + c_f` over all nodes and both
/// directions, with the fast speed taken at its direction maximum
/// `sqrt(a^2 + |B|^2 / rho)`.
pub fn cleaning_speed(solver: &Solver, u: &[State]) -> Result<f64> {
    let gamma = solver.gas.gamma;
    let mut c = 0.0_f64;
    for x in u {
        let q = primitive(x, gamma)?;
        let b2 = q.b.iter().map(|b| b * b).sum::<f64>();
        let cf = (gamma * q.p / q.rho + b2 / q.rho).sqrt();
        c = c.max(q.v[0].abs().max(q.v[1].abs()) + cf);
    }
    if !c.is_finite() {
        return Err(Error::NonFiniteWaveSpeed);
    }
    Ok(c)
}

/// Largest of `4 mu / (3 rho)`, `eta` and `kappa (gamma - 1) / (rho R)`.
pub fn viscous_rate(q: &Primitive, solver: &Solver) -> f64 {
    let g = &solver.gas;
    (4.0 * g.mu / (3.0 * q.rho)).max(g.eta).max(g.kappa * (g.gamma - 1.0) / (q.rho * g.rgas))
}

/// Time step and cleaning speed for the next step taken at time `t`.
pub fn compute_dt(solver: &Solver, u: &[State], controls: &TimeControls, t: f64) -> Result<(f64, f64)> {
    let gamma = solver.gas.gamma;
    let c_h = cleaning_speed(solver, u)?;
    let c_eff = if solver.mode.glm { c_h } else { 0.0 };
    let mut lambda = 0.0_f64;
    let mut lambda_v = 0.0_f64;
    for x in u {
        let q = primitive(x, gamma)?;
        for dir in [Dir::X, Dir::Y] {
            lambda = lambda.max(max_wave_speed_prim(&q, gamma, c_eff, dir));
        }
        lambda_v = lambda_v.max(viscous_rate(&q, solver));
    }
    if !lambda.is_finite() || !(lambda > 0.0) {
        return Err(Error::NonFiniteWaveSpeed);
    }
    let h = solver.mesh.dx / (2.0 * solver.ops.order as f64 + 1.0);
    let mut dt = match controls.fixed_dt {
        Some(dt) => dt,
        None => {
            let dt_a = controls.cfl / lambda * h;
            let dt_v = if solver.gas.is_viscous() { controls.dfl / lambda_v * h * h } else { f64::INFINITY };
            dt_a.min(dt_v)
        }
    };
    let remaining = controls.t_final - t;
    if dt >= remaining * (1.0 - 1e-12) {
        dt = remaining;
    }
    Ok((dt, c_h))
}

/// Builds a blow-up report from the worst node of `u`.
pub fn blow_up_report(solver: &Solver, u: &[State], step: usize, time: f64) -> BlowUpReport {
    let nn = solver.mesh.nodes_per_element();
    let gamma = solver.gas.gamma;
    let mut report = BlowUpReport { step, time, element: 0, min_density: f64::INFINITY, min_pressure: f64::INFINITY };
    let mut worst = f64::INFINITY;
    for (n, x) in u.iter().enumerate() {
        let (rho, p) = (x[RHO], pressure(x, gamma));
        report.min_density = report.min_density.min(rho);
        report.min_pressure = report.min_pressure.min(p);
        // NaN sorts as the worst value.
        let score = if rho.is_nan() || p.is_nan() { f64::NEG_INFINITY } else { rho.min(p) };
        if score < worst {
            worst = score;
            report.element = n / nn;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub time: f64,
    /// Step that led to this state; zero for the initial state.
    pub dt: f64,
    pub c_h: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub field: Vec<State>,
    pub steps: usize,
    pub time: f64,
}

/// Integrates from `t0` to `controls.t_final`, calling `observe` on the
/// initial state and after every step. Kernel failures become
/// [`Error::BlowUp`].
pub fn run<F>(solver: &Solver, u0: Vec<State>, t0: f64, controls: &TimeControls, mut observe: F) -> Result<RunResult>
where
    F: FnMut(&StepInfo, &[State]) -> Result<()>,
{
    controls.validate()?;
    let mut u = u0;
    let mut k = vec![[0.0; NVAR]; u.len()];
    let mut du = vec![[0.0; NVAR]; u.len()];
    let mut ws = Workspace::new(solver);
    let mut t = t0;
    let mut step = 0;
    let blow_up = |u: &[State], step: usize, t: f64| Error::BlowUp(blow_up_report(solver, u, step, t));
    observe(&StepInfo { step, time: t, dt: 0.0, c_h: 0.0 }, &u)?;
    while t < controls.t_final {
        if step >= controls.max_steps {
            return Err(Error::StepLimit(controls.max_steps));
        }
        let (dt, c_h) = compute_dt(solver, &u, controls, t).map_err(|_| blow_up(&u, step, t))?;
        k.iter_mut().for_each(|x| *x = [0.0; NVAR]);
        lsrk4_step(&mut u, t, dt, &mut k, &mut du, |v, ts, out| solver.rhs_into(v, ts, c_h, &mut ws, out))
            .map_err(|_| blow_up(&u, step + 1, t + dt))?;
        step += 1;
        t = if t + dt >= controls.t_final { controls.t_final } else { t + dt };
        if u.iter().any(|x| primitive(x, solver.gas.gamma).is_err()) {
            return Err(blow_up(&u, step, t));
        }
        observe(&StepInfo { step, time: t, dt, c_h }, &u)?;
    }
    Ok(RunResult { field: u, steps: step, time: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::SchemeMode;
    use crate::mesh::{build_mesh, Bounds};
    use crate::sbp::SbpOperators;
    use crate::state::GasConfig;

    fn scalar_rhs(lambda: f64) -> impl FnMut(&[State], f64, &mut [State]) -> Result<()> {
        move |u, _, out| {
            out[0][0] = lambda * u[0][0];
            Ok(())
        }
    }

    fn integrate(n: usize) -> f64 {
        let dt = 1.0 / n as f64;
        let mut u = vec![[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]];
        let mut k = vec![[0.0; NVAR]];
        let mut du = vec![[0.0; NVAR]];
        for s in 0..n {
            lsrk4_step(&mut u, s as f64 * dt, dt, &mut k, &mut du, scalar_rhs(-1.0)).unwrap();
        }
        u[0][0]
    }

    #[test]
    fn observed_order_is_four() {
        let exact = (-1.0f64).exp();
        let errs: Vec<f64> = [4, 8, 16, 32].iter().map(|&n| (integrate(n) - exact).abs()).collect();
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 3.9, "{order}");
        }
    }

    #[test]
    fn zero_rhs_leaves_field_unchanged() {
        let u0: Vec<State> = (0..5).map(|i| [i as f64 * 0.1 + 0.3; NVAR]).collect();
        let mut u = u0.clone();
        let mut k = vec![[0.0; NVAR]; 5];
        let mut du = vec![[0.0; NVAR]; 5];
        lsrk4_step(&mut u, 0.0, 0.1, &mut k, &mut du, |_, _, out| {
            out.iter_mut().for_each(|x| *x = [0.0; NVAR]);
            Ok(())
        })
        .unwrap();
        assert_eq!(u, u0);
    }

    /// Butcher tableau of the 2N-storage scheme: stage `i` sees
    /// `a_ij = sum_{m=j}^{i-1} B_m prod_{l=j+1}^{m} A_l`.
    fn butcher() -> ([[f64; 5]; 5], [f64; 5]) {
        let weight = |j: usize, upto: usize| -> f64 {
            (j..upto)
                .map(|m| LSRK_B[m] * (j + 1..=m).map(|l| LSRK_A[l]).product::<f64>())
                .sum()
        };
        let a = std::array::from_fn(|i| std::array::from_fn(|j| if j < i { weight(j, i) } else { 0.0 }));
        let b = std::array::from_fn(|j| weight(j, 5));
        (a, b)
    }

    #[test]
    fn tableau_is_consistent() {
        // The published rationals satisfy the conditions only to about
        // 4e-8 (row 2 of c) and 1e-9 (quadrature conditions).
        let (a, b) = butcher();
        for i in 0..5 {
            assert!((a[i].iter().sum::<f64>() - LSRK_C[i]).abs() < 1e-7, "row {i}");
        }
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let c = LSRK_C;
        let dot = |x: &[f64; 5], y: &[f64; 5]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        assert!((dot(&b, &c) - 0.5).abs() < 1e-8);
        assert!((dot(&b, &c.map(|x| x * x)) - 1.0 / 3.0).abs() < 1e-8);
        assert!((dot(&b, &c.map(|x| x * x * x)) - 0.25).abs() < 1e-8);
    }

    #[test]
    fn linear_step_matches_dense_butcher_form() {
        // u' = L u with a fixed non-normal 3x3 block acting on the first
        // three components.
        let l = [[-1.0, 2.0, 0.5], [-0.3, -0.2, 1.0], [0.0, -1.5, -0.4]];
        let apply = |x: &State| -> State {
            let mut y = [0.0; NVAR];
            for i in 0..3 {
                y[i] = (0..3).map(|j| l[i][j] * x[j]).sum();
            }
            y
        };
        let u0: State = [0.7, -0.2, 1.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let dt = 0.3;
        let mut u = vec![u0];
        let mut k = vec![[0.0; NVAR]];
        let mut du = vec![[0.0; NVAR]];
        lsrk4_step(&mut u, 0.0, dt, &mut k, &mut du, |v, _, out| {
            out[0] = apply(&v[0]);
            Ok(())
        })
        .unwrap();

        let (a, b) = butcher();
        let mut f: Vec<State> = Vec::new();
        for i in 0..5 {
            let mut y = u0;
            for (j, fj) in f.iter().enumerate() {
                for v in 0..NVAR {
                    y[v] += dt * a[i][j] * fj[v];
                }
            }
            f.push(apply(&y));
        }
        let mut dense = u0;
        for (j, fj) in f.iter().enumerate() {
            for v in 0..NVAR {
                dense[v] += dt * b[j] * fj[v];
            }
        }
        for v in 0..NVAR {
            assert!((u[0][v] - dense[v]).abs() < 1e-14, "{v}: {} vs {}", u[0][v], dense[v]);
        }
    }

    fn solver(gas: GasConfig, order: usize, k: usize, bounds: Bounds) -> Solver {
        let ops = SbpOperators::new(order).unwrap();
        let mesh = build_mesh(bounds, k, k, &ops).unwrap();
        Solver::new(mesh, ops, gas, SchemeMode::entropy_stable()).unwrap()
    }

    #[test]
    fn advective_step_formula() {
        // N = 3, dx = 0.1, lambda = 2, cfl = 0.5. A resting gas with
        // a^2 = gamma p / rho = 4 and no field has lambda = c_h = 2.
        let s = solver(GasConfig::inviscid(2.0), 3, 10, Bounds::unit());
        let q = Primitive { rho: 1.0, v: [0.0; 3], p: 2.0, b: [0.0; 3], psi: 0.0 };
        let u = s.project(|_, _| q.to_conserved(2.0));
        let (dt, c_h) = compute_dt(&s, &u, &TimeControls::new(1.0), 0.0).unwrap();
        assert!((c_h - 2.0).abs() < 1e-15);
        assert!((dt - 0.5 / 2.0 * 0.1 / 7.0).abs() < 1e-15);
        assert!((dt - 3.5714e-3).abs() < 1e-7);
    }

    #[test]
    fn viscous_rate_for_orszag_tang_coefficients() {
        let s = solver(GasConfig::new(5.0 / 3.0, 8.5e-4, 1e-5, 0.72), 3, 2, Bounds::unit());
        let q = Primitive { rho: 1.0, v: [0.0; 3], p: 1.0, b: [0.0; 3], psi: 0.0 };
        let shear: f64 = 4.0 / 3.0 * 8.5e-4;
        assert!((shear - 1.1333e-3).abs() < 1e-7);
        // kappa (gamma - 1) / (rho R) = gamma mu / (Pr rho) exceeds the shear rate.
        let heat = 5.0 / 3.0 * 8.5e-4 / 0.72;
        assert!((viscous_rate(&q, &s) - heat).abs() < 1e-15);
        assert!(heat > shear);
    }

    #[test]
    fn last_step_lands_on_final_time() {
        let s = solver(GasConfig::inviscid(5.0 / 3.0), 2, 2, Bounds::unit());
        let q = Primitive { rho: 1.0, v: [0.3, 0.1, 0.0], p: 1.0, b: [0.1, 0.0, 0.0], psi: 0.0 };
        let u = s.project(|_, _| q.to_conserved(5.0 / 3.0));
        let controls = TimeControls::new(0.0123);
        let mut times = Vec::new();
        let res = run(&s, u, 0.0, &controls, |info, _| {
            times.push(info.time);
            Ok(())
        })
        .unwrap();
        assert_eq!(res.time, 0.0123);
        assert_eq!(*times.last().unwrap(), 0.0123);
        assert_eq!(times.len(), res.steps + 1);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_final_time_takes_no_steps() {
        let s = solver(GasConfig::inviscid(5.0 / 3.0), 2, 2, Bounds::unit());
        let q = Primitive { rho: 1.0, v: [0.0; 3], p: 1.0, b: [0.0; 3], psi: 0.0 };
        let u = s.project(|_, _| q.to_conserved(5.0 / 3.0));
        let mut calls = 0;
        let res = run(&s, u.clone(), 0.0, &TimeControls::new(0.0), |_, _| {
            calls += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(res.steps, 0);
        assert_eq!(calls, 1);
        assert_eq!(res.field, u);
    }

    #[test]
    fn inadmissible_start_reports_blow_up() {
        let s = solver(GasConfig::inviscid(5.0 / 3.0), 2, 2, Bounds::unit());
        let q = Primitive { rho: 1.0, v: [0.0; 3], p: 1.0, b: [0.0; 3], psi: 0.0 };
        let mut u = s.project(|_, _| q.to_conserved(5.0 / 3.0));
        u[20][4] = -3.0;
        match run(&s, u, 0.0, &TimeControls::new(0.1), |_, _| Ok(())) {
            Err(Error::BlowUp(r)) => {
                assert_eq!(r.step, 0);
                assert_eq!(r.element, 20 / 9);
                assert!(r.min_pressure < 0.0);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
