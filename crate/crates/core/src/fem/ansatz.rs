//! Multi-bubble initial guess for the blow-up branch.
//!
//! Near `κ_j` the guess is the rescaled entire solution
//! `U(x̃) = −2 log(1 + |x̃|²/8)` with `x̃ = (x − κ_j)/δ_j`, `δ_j = d_j λ^{1/2}`,
//! i.e. `u = log(64 δ_j² / (λ (8δ_j² + |x−κ_j|²)²))`; away from the points it
//! is `Σ 8π G(·, κ_j)`. A smooth step over `ρ/2 ≤ |x−κ_j| ≤ ρ` joins the two.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::hamiltonian::Configuration;
use crate::mesh::Mesh;

/// Peak value of a single bubble: `−2 log λ − 2 log d`.
pub fn bubble_peak(d: f64, lambda: f64) -> f64 {
    -2.0 * lambda.ln() - 2.0 * d.ln()
}

/// `λ` at which a bubble with constant `d` has peak height `s`.
pub fn lambda_for_peak(d: f64, s: f64) -> f64 {
    (-(s + 2.0 * d.ln()) / 2.0).exp()
}

pub fn bubble(delta: f64, lambda: f64, r: f64) -> f64 {
    let d2 = delta * delta;
    (64.0 * d2 / (lambda * (8.0 * d2 + r * r).powi(2))).ln()
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Blending radius `ρ = clearance/4` for a configuration.
pub fn blend_radius(ev: &GreenEvaluator, config: &Configuration) -> f64 {
    let clearance = config
        .points
        .iter()
        .map(|&p| ev.domain().boundary_distance(p))
        .fold(f64::INFINITY, f64::min);
    clearance / 4.0
}

pub fn liouville_ansatz(
    mesh: &Mesh,
    ev: &GreenEvaluator,
    config: &Configuration,
    d: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    config.validate(ev)?;
    if d.len() != config.m() {
        return Err(Error::InvalidInput(format!("{} scale constants for {} points", d.len(), config.m())));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let rho = blend_radius(ev, config);
    let m = config.m();
    for i in 0..m {
        for j in i + 1..m {
            let dist = config.points[i].dist(config.points[j]);
            if dist < 2.0 * rho {
                return Err(Error::Overlap(format!(
                    "points {i} and {j} are {dist:.3e} apart, blending radius is {rho:.3e}"
                )));
            }
        }
    }
    let deltas: Vec<f64> = d.iter().map(|dj| dj * lambda.sqrt()).collect();
    for (j, &delta) in deltas.iter().enumerate() {
        if !(delta < 0.4 * rho) {
            return Err(Error::AnsatzFailure(format!(
                "bubble {j} scale {delta:.3e} is not small against the clearance {:.3e}",
                4.0 * rho
            )));
        }
    }
    // 8π G(κ_j, κ_i), used to remove the double-counted far fields
    let mut cross = vec![0.0; m];
    for j in 0..m {
        for i in 0..m {
            if i != j {
                cross[j] += 8.0 * PI * ev.green(config.points[j], config.points[i])?;
            }
        }
    }

    let verts = mesh.vertices();
    let mut u = vec![0.0; verts.len()];
    for (j, &kappa) in config.points.iter().enumerate() {
        let weights: Vec<f64> = verts
            .iter()
            .map(|p| 1.0 - smoothstep((p.dist(kappa) - 0.5 * rho) / (0.5 * rho)))
            .collect();
        let far_idx: Vec<usize> = (0..verts.len()).filter(|&v| weights[v] < 1.0).collect();
        let far_pts: Vec<_> = far_idx.iter().map(|&v| verts[v]).collect();
        let far = ev.green_field(kappa, &far_pts)?;
        let mut far_full = vec![0.0; verts.len()];
        for (&v, g) in far_idx.iter().zip(far) {
            far_full[v] = 8.0 * PI * g;
        }
        for v in 0..verts.len() {
            let w = weights[v];
            let near = if w > 0.0 { bubble(deltas[j], lambda, verts[v].dist(kappa)) - cross[j] } else { 0.0 };
            u[v] += w * near + (1.0 - w) * far_full[v];
        }
    }
    for (v, x) in u.iter_mut().enumerate() {
        if mesh.is_boundary(v) {
            *x = 0.0;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    #[test]
    fn single_bubble_matches_green_far_away() {
        let mesh = Mesh::disk_uniform(64).unwrap();
        let ev = GreenEvaluator::unit_disk();
        let c = Configuration::new(vec![Point2::ORIGIN]);
        let lambda = 1e-4;
        let u = liouville_ansatz(&mesh, &ev, &c, &[0.125], lambda).unwrap();
        let center = mesh.nearest_vertex(Point2::ORIGIN);
        assert!((u[center] - bubble_peak(0.125, lambda)).abs() < 1e-12);
        // bubble tail and 8πG agree closely when d = 1/8
        let r = 0.5;
        let tail = bubble(0.125 * lambda.sqrt(), lambda, r);
        let g = 8.0 * PI * ev.green(Point2::new(r, 0.0), Point2::ORIGIN).unwrap();
        assert!((tail - g).abs() < 0.1 * g.abs());
        assert!((lambda_for_peak(0.125, bubble_peak(0.125, lambda)) - lambda).abs() < 1e-18);
    }

    #[test]
    fn rejects_large_bubbles() {
        let mesh = Mesh::disk_uniform(32).unwrap();
        let ev = GreenEvaluator::unit_disk();
        let c = Configuration::new(vec![Point2::ORIGIN]);
        assert!(matches!(liouville_ansatz(&mesh, &ev, &c, &[0.125], 50.0), Err(Error::AnsatzFailure(_))));
    }
}
