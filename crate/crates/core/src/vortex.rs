//! Point vortices of unit strength: `ẋ_i = J ∇_{x_i} H^m` with `J` the
//! rotation by `+π/2`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::hamiltonian::{h_grad, h_hess, h_value, Configuration};

/// Minimum distance to the boundary and between vortices, relative to the
/// domain diameter, that a step must preserve.
pub const CLEARANCE: f64 = 1e-3;
/// Times a rejected step is split in half before giving up.
pub const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VortexState {
    pub configuration: Configuration,
    pub time: f64,
    /// `H^m` at the configuration
    pub energy: f64,
}

impl VortexState {
    pub fn new(ev: &GreenEvaluator, configuration: Configuration) -> Result<Self> {
        check_clearance(ev, &configuration)?;
        let energy = h_value(ev, &configuration)?;
        Ok(Self { configuration, time: 0.0, energy })
    }
}

fn check_clearance(ev: &GreenEvaluator, c: &Configuration) -> Result<()> {
    let min = CLEARANCE * ev.diameter();
    for (j, &p) in c.points.iter().enumerate() {
        if !p.is_finite() || !ev.domain().contains(p) || ev.domain().boundary_distance(p) < min {
            return Err(Error::Collision(format!("vortex {j} at {p} reached the boundary")));
        }
    }
    if c.m() > 1 && c.min_pair_distance() < min {
        return Err(Error::Collision("two vortices collided".into()));
    }
    Ok(())
}

/// `J ∇H`, stacked as `(ẋ_1, ẏ_1, …)`.
pub fn velocity(ev: &GreenEvaluator, c: &Configuration) -> Result<Vec<f64>> {
    let g = h_grad(ev, c)?;
    Ok(g.chunks(2).flat_map(|p| [-p[1], p[0]]).collect())
}

fn rk4(ev: &GreenEvaluator, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let f = |y: &[f64]| -> Result<Vec<f64>> {
        let c = Configuration::from_slice(y);
        check_clearance(ev, &c)?;
        velocity(ev, &c)
    };
    let shift = |k: &[f64], a: f64| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect() };
    let k1 = f(x)?;
    let k2 = f(&shift(&k1, 0.5 * dt))?;
    let k3 = f(&shift(&k2, 0.5 * dt))?;
    let k4 = f(&shift(&k3, dt))?;
    let out: Vec<f64> = (0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    check_clearance(ev, &Configuration::from_slice(&out))?;
    Ok(out)
}

fn advance(ev: &GreenEvaluator, x: &[f64], dt: f64, depth: usize) -> Result<Vec<f64>> {
    match rk4(ev, x, dt) {
        Ok(y) => Ok(y),
        Err(Error::Collision(_)) if depth < MAX_HALVINGS => {
            let half = advance(ev, x, 0.5 * dt, depth + 1)?;
            advance(ev, &half, 0.5 * dt, depth + 1)
        }
        Err(e) => Err(e),
    }
}

/// One classical Runge–Kutta step of length `dt`. A negative `dt` integrates
/// backward. Steps that would violate the clearances are split in halves, at
/// most [`MAX_HALVINGS`] levels deep.
pub fn step(ev: &GreenEvaluator, s: &VortexState, dt: f64) -> Result<VortexState> {
    if !(dt != 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be nonzero and finite, got {dt}")));
    }
    let x = advance(ev, &s.configuration.to_vec(), dt, 0)?;
    let configuration = Configuration::from_slice(&x);
    let energy = h_value(ev, &configuration)?;
    Ok(VortexState { configuration, time: s.time + dt, energy })
}

/// `steps` steps of length `dt`, returning every state including the first.
pub fn integrate(ev: &GreenEvaluator, start: &VortexState, dt: f64, steps: usize) -> Result<Vec<VortexState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start.clone());
    for _ in 0..steps {
        let next = step(ev, out.last().expect("non-empty"), dt)?;
        out.push(next);
    }
    Ok(out)
}

/// Largest `|H(t) − H(0)|/|H(0)|`, or the absolute drift when `H(0) = 0`.
pub fn energy_drift(trajectory: &[VortexState]) -> f64 {
    let e0 = trajectory[0].energy;
    let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
    trajectory.iter().map(|s| (s.energy - e0).abs() / scale).fold(0.0, f64::max)
}

/// CSV `t,x1,y1,…,xm,ym,energy`.
pub fn trajectory_csv(trajectory: &[VortexState]) -> String {
    let m = trajectory.first().map_or(0, |s| s.configuration.m());
    let mut out = String::from("t");
    for j in 1..=m {
        let _ = write!(out, ",x{j},y{j}");
    }
    out.push_str(",energy\n");
    for s in trajectory {
        let _ = write!(out, "{:.10e}", s.time);
        for p in &s.configuration.points {
            let _ = write!(out, ",{:.15e},{:.15e}", p.x, p.y);
        }
        let _ = writeln!(out, ",{:.15e}", s.energy);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumVerdict {
    /// `‖J∇H‖`
    pub field_norm: f64,
    pub is_equilibrium: bool,
    /// eigenvalues of `J·Hess H` as `(re, im)`
    pub rotation_rates: Vec<(f64, f64)>,
    pub hessian_definite: bool,
    /// every eigenvalue has zero real part (relative to the largest modulus)
    pub purely_imaginary: bool,
}

pub const EQUILIBRIUM_TOL: f64 = 1e-8;

/// Whether `critical` is a rest point of the vortex system, with the
/// linearized rotation rates there.
pub fn equilibrium_link(ev: &GreenEvaluator, critical: &Configuration) -> Result<EquilibriumVerdict> {
    let v = velocity(ev, critical)?;
    let field_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let hess = h_hess(ev, critical)?;
    let n = hess.nrows();
    let mut j = DMatrix::zeros(n, n);
    for b in 0..n / 2 {
        j[(2 * b, 2 * b + 1)] = -1.0;
        j[(2 * b + 1, 2 * b)] = 1.0;
    }
    let eig = (&j * &hess).complex_eigenvalues();
    let mut rotation_rates: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
    rotation_rates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let hev = hess.clone().symmetric_eigenvalues();
    let hessian_definite = hev.iter().all(|&e| e > 0.0) || hev.iter().all(|&e| e < 0.0);
    let scale = rotation_rates.iter().map(|z| z.0.hypot(z.1)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let purely_imaginary = rotation_rates.iter().all(|z| z.0.abs() <= 1e-10 * scale);
    Ok(EquilibriumVerdict {
        field_norm,
        is_equilibrium: field_norm <= EQUILIBRIUM_TOL,
        rotation_rates,
        hessian_definite,
        purely_imaginary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    #[test]
    fn center_is_fixed() {
        let ev = GreenEvaluator::unit_disk();
        let s = VortexState::new(&ev, Configuration::new(vec![Point2::ORIGIN])).unwrap();
        let n = step(&ev, &s, 0.01).unwrap();
        assert!(n.configuration.points[0].norm() <= 1e-12);
    }

    #[test]
    fn single_vortex_circles() {
        let ev = GreenEvaluator::unit_disk();
        let s = VortexState::new(&ev, Configuration::new(vec![Point2::new(0.5, 0.0)])).unwrap();
        let traj = integrate(&ev, &s, 0.01, 200).unwrap();
        let end = &traj.last().unwrap().configuration.points[0];
        assert!((end.norm() - 0.5).abs() < 1e-9);
        // ∇H points inward, so J∇H turns clockwise at rate 1/(2π(1 − a²))
        let omega = 1.0 / (2.0 * std::f64::consts::PI * 0.75);
        assert!((end.y.atan2(end.x) + omega * 2.0).abs() < 1e-8);
    }

    #[test]
    fn center_rates_are_imaginary() {
        let ev = GreenEvaluator::unit_disk();
        let v = equilibrium_link(&ev, &Configuration::new(vec![Point2::ORIGIN])).unwrap();
        assert!(v.is_equilibrium && v.hessian_definite && v.purely_imaginary);
        // Hess = −I/(2π), so J·Hess has eigenvalues ±i/(2π)
        assert!((v.rotation_rates[1].1 - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn rejects_boundary_collision() {
        let ev = GreenEvaluator::unit_disk();
        let c = Configuration::new(vec![Point2::new(0.9995, 0.0)]);
        assert!(matches!(VortexState::new(&ev, c), Err(Error::Collision(_))));
    }
}
