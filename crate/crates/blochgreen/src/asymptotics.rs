//! Closed-form leading-order Green's function asymptotics.
//!
//! Gap interior (d ≥ 2, real symmetric model, certified edge, λ in the gap):
//!
//! ```text
//! G_λ(x,y) ≈ e^{(h(x)−h(y))·(ik0 − β_s)} / (2π|h(x)−h(y)|)^{(d−1)/2}
//!            · |∇E(β_s)|^{(d−3)/2} / det(Bᵀ(−Hess E)(β_s)B)^{1/2}
//!            · φ₊(x)·conj(φ₋(y)) / F
//! ```
//!
//! with s the unit direction of h(x)−h(y), B an orthonormal basis of s⊥,
//! φ±(x) the periodic eigenvector entries at the vertex of x, and
//! F = (φ_{k0+iβ_s}, φ_{k0−iβ_s}) the vertex-sum pairing.
//!
//! Spectral edge (d ≥ 3):
//!
//! ```text
//! G(x,y) ≈ Γ((d−2)/2)·e^{i(h(x)−h(y))·k0}
//!          / (2 π^{d/2} √(det H) |H^{−1/2}(h(x)−h(y))|^{d−2})
//!          · φ_{k0}(x)·conj(φ_{k0}(y)) / ‖φ_{k0}‖²
//! ```
//!
//! The remainder terms are never modeled; they are measured against the
//! exact oracles in [`crate::oracle`].

use num_complex::Complex64;

use crate::continuation::DirectionSolve;
use crate::crystal::{direction, norm2, AdditiveFunction, CoverPoint, CrystalModel};
use crate::error::{Error, Result};
use crate::floquet::{EdgeData, EdgeSide};
use crate::gamma::gamma;

/// A leading-term value together with its factors.
///
/// `value` equals `sign · phase · decay · prefactor · eigenfunction_ratio`
/// to machine precision (sign = −1 only for upper edges, where the value is
/// computed on −L and mapped back through (L−λ)⁻¹ = −(−L−(−λ))⁻¹).
#[derive(Debug, Clone)]
pub struct AsymptoticValue {
    pub value: Complex64,
    /// e^{i(h(x)−h(y))·k0}.
    pub phase: Complex64,
    /// e^{−(h(x)−h(y))·β_s} (gap interior); 1 at the spectral edge.
    pub decay: f64,
    /// The algebraic factor (distance power, gradient/Hessian determinants).
    pub prefactor: f64,
    /// φ₊(x)·conj(φ₋(y))/F, or φ(x)conj(φ(y))/‖φ‖² at the edge.
    pub eigenfunction_ratio: Complex64,
    /// |h(x)−h(y)|.
    pub dist: f64,
    pub s: Vec<f64>,
}

fn require_real_symmetric(model: &CrystalModel) -> Result<()> {
    if !model.is_symmetric() {
        return Err(Error::BadModel("gap-interior asymptotics require a symmetric model".into()));
    }
    if model.edges().iter().any(|e| e.weight.im != 0.0) {
        return Err(Error::BadModel("gap-interior asymptotics require a real operator".into()));
    }
    Ok(())
}

/// Leading term of G_λ(x,y) inside a spectral gap, for a pair aligned with
/// the solved direction.
pub fn eval_gap_interior(
    model: &CrystalModel,
    h: &AdditiveFunction,
    edge: &EdgeData,
    solve: &DirectionSolve,
    x: &CoverPoint,
    y: &CoverPoint,
) -> Result<AsymptoticValue> {
    let d = model.deck_rank();
    if d < 2 {
        return Err(Error::DimensionTooLow {
            d,
            context: "gap-interior asymptotics need d ≥ 2".into(),
        });
    }
    require_real_symmetric(model)?;

    let s = direction(h, x, y)?;
    let mismatch: f64 = s.iter().zip(&solve.s).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if mismatch > 1e-12 {
        return Err(Error::DirectionMismatch { expected: solve.s.clone(), actual: s });
    }

    let a = h.displacement(x, y);
    let dist = norm2(&a);
    let ak0: f64 = a.iter().zip(&edge.k0).map(|(ai, ki)| ai * ki).sum();
    let phase = Complex64::new(0.0, ak0).exp();
    let abeta: f64 = a.iter().zip(&solve.beta).map(|(ai, bi)| ai * bi).sum();
    let decay = (-abeta).exp();
    let prefactor = solve.grad_norm.powf((d as f64 - 3.0) / 2.0)
        / ((2.0 * std::f64::consts::PI * dist).powf((d as f64 - 1.0) / 2.0)
            * solve.proj_det.sqrt());
    let st = &solve.state;
    let ratio = st.phi_plus[x.vertex] * st.phi_minus[y.vertex].conj() / st.pairing;
    let sign = match edge.side {
        EdgeSide::Lower => 1.0,
        EdgeSide::Upper => -1.0,
    };
    let value = phase * decay * prefactor * ratio * sign;
    Ok(AsymptoticValue { value, phase, decay, prefactor, eigenfunction_ratio: ratio, dist, s })
}

/// Leading term of the edge Green's function G(x,y) at λ = λ_edge (d ≥ 3).
pub fn eval_edge(
    model: &CrystalModel,
    h: &AdditiveFunction,
    edge: &EdgeData,
    x: &CoverPoint,
    y: &CoverPoint,
) -> Result<AsymptoticValue> {
    let d = model.deck_rank();
    if d < 3 {
        return Err(Error::DimensionTooLow {
            d,
            context: "edge asymptotics need d ≥ 3 (the operator is critical at the edge for d ≤ 2)"
                .into(),
        });
    }

    let a = h.displacement(x, y);
    let dist = norm2(&a);
    if dist < 1e-14 {
        return Err(Error::ZeroDisplacement);
    }
    let s: Vec<f64> = a.iter().map(|t| t / dist).collect();

    let ak0: f64 = a.iter().zip(&edge.k0).map(|(ai, ki)| ai * ki).sum();
    let phase = Complex64::new(0.0, ak0).exp();

    // H^{-1/2} a through the spectral decomposition of H
    let eig = edge.hessian.clone().symmetric_eigen();
    let mut hinvhalf_a = vec![0.0; d];
    let mut det_h = 1.0;
    for j in 0..d {
        let lam_j = eig.eigenvalues[j];
        det_h *= lam_j;
        let qa: f64 = (0..d).map(|i| eig.eigenvectors[(i, j)] * a[i]).sum();
        let coef = qa / lam_j.sqrt();
        for i in 0..d {
            hinvhalf_a[i] += coef * eig.eigenvectors[(i, j)];
        }
    }
    let anisotropic_dist = norm2(&hinvhalf_a);

    let df = d as f64;
    let prefactor = gamma((df - 2.0) / 2.0)
        / (2.0 * std::f64::consts::PI.powf(df / 2.0)
            * det_h.sqrt()
            * anisotropic_dist.powf(df - 2.0));
    let ratio: Complex64 =
        edge.phi[x.vertex] * edge.phi[y.vertex].conj() / edge.phi.norm_squared();
    let sign = match edge.side {
        EdgeSide::Lower => 1.0,
        EdgeSide::Upper => -1.0,
    };
    let value = phase * prefactor * ratio * sign;
    Ok(AsymptoticValue { value, phase, decay: 1.0, prefactor, eigenfunction_ratio: ratio, dist, s })
}

/// The cover point g·x.
pub fn translated(x: &CoverPoint, g: &[i64]) -> CoverPoint {
    CoverPoint { vertex: x.vertex, deck: x.deck.iter().zip(g).map(|(a, b)| a + b).collect() }
}

/// Leading terms of G_λ(x, g·x) along deck orbits, one direction solve per
/// distinct rational direction (reused across collinear g).
pub fn eval_along_orbit(
    model: &CrystalModel,
    h: &AdditiveFunction,
    edge: &EdgeData,
    lambda: f64,
    x: &CoverPoint,
    g_list: &[Vec<i64>],
) -> Result<Vec<AsymptoticValue>> {
    let mut solves: Vec<(Vec<i64>, DirectionSolve)> = Vec::new();
    let mut out = Vec::with_capacity(g_list.len());
    for g in g_list {
        if g.iter().all(|&t| t == 0) {
            return Err(Error::ZeroDisplacement);
        }
        // pair (x, g·x): displacement is −g; collinear g share the solve
        let gcd = g.iter().map(|t| t.unsigned_abs()).fold(0u64, gcd_u64);
        let prim: Vec<i64> = g.iter().map(|t| -t / gcd as i64).collect();
        let solve = match solves.iter().find(|(p, _)| *p == prim) {
            Some((_, s)) => s.clone(),
            None => {
                let dir: Vec<f64> = {
                    let n = norm2(&prim.iter().map(|&t| t as f64).collect::<Vec<f64>>());
                    prim.iter().map(|&t| t as f64 / n).collect()
                };
                let s = crate::continuation::solve_beta_s(model, h, edge, lambda, &dir)?;
                solves.push((prim.clone(), s.clone()));
                s
            }
        };
        let gx = translated(x, g);
        out.push(eval_gap_interior(model, h, edge, &solve, x, &gx)?);
    }
    Ok(out)
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd_u64(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::solve_beta_s;
    use crate::crystal::fixtures::*;
    use crate::floquet::{locate_edge, BrillouinGrid, EdgeSide};

    fn stripe_setup() -> (CrystalModel, AdditiveFunction, EdgeData) {
        let m = stripe2();
        let h = AdditiveFunction::zero(&m);
        let edge = locate_edge(&m, &h, 2, EdgeSide::Lower, &BrillouinGrid::new(2, 32)).unwrap();
        (m, h, edge)
    }

    #[test]
    fn stripe2_gap_interior_closed_form() {
        let (m, h, edge) = stripe_setup();
        let solve = solve_beta_s(&m, &h, &edge, 4.5, &[0.0, 1.0]).unwrap();
        for n in [5i64, 10, 20] {
            let x = m.cover_point("a", &[0, n]).unwrap();
            let y = m.cover_point("a", &[0, 0]).unwrap();
            let v = eval_gap_interior(&m, &h, &edge, &solve, &x, &y).unwrap();
            let expect = 2.0f64.powi(-n as i32) / (std::f64::consts::PI * n as f64).sqrt();
            assert!(
                (v.value.re - expect).abs() / expect < 1e-9,
                "n={n}: {} vs {}",
                v.value.re,
                expect
            );
            assert!(v.value.im.abs() < 1e-20);
            // product-of-parts identity
            let product = v.phase * v.decay * v.prefactor * v.eigenfunction_ratio;
            assert!((v.value - product).norm() <= 1e-14 * v.value.norm());
        }
    }

    #[test]
    fn stripe2_vanishing_leading_term_on_other_vertex() {
        let (m, h, edge) = stripe_setup();
        let solve = solve_beta_s(&m, &h, &edge, 4.5, &[0.0, 1.0]).unwrap();
        let x = m.cover_point("b", &[0, 10]).unwrap();
        let y = m.cover_point("a", &[0, 0]).unwrap();
        let v = eval_gap_interior(&m, &h, &edge, &solve, &x, &y).unwrap();
        assert!(v.value.norm() < 1e-18, "phi_plus[b] = 0 kills the leading term");
    }

    #[test]
    fn free2_gap_interior_closed_form() {
        let m = free2();
        let h = AdditiveFunction::zero(&m);
        let edge = locate_edge(&m, &h, 1, EdgeSide::Lower, &BrillouinGrid::new(2, 16)).unwrap();
        let solve = solve_beta_s(&m, &h, &edge, -1.0, &[1.0, 0.0]).unwrap();
        let n = 20i64;
        let x = m.cover_point("v", &[n, 0]).unwrap();
        let y = m.cover_point("v", &[0, 0]).unwrap();
        let v = eval_gap_interior(&m, &h, &edge, &solve, &x, &y).unwrap();
        let beta = 1.5f64.acosh();
        let expect = (-beta * n as f64).exp()
            / ((2.0 * std::f64::consts::PI * n as f64).sqrt()
                * (2.0 * 1.25f64.sqrt() * 2.0).sqrt());
        assert!((v.value.re - expect).abs() / expect < 1e-9, "{} vs {expect}", v.value.re);
    }

    #[test]
    fn direction_mismatch_rejected() {
        let (m, h, edge) = stripe_setup();
        let solve = solve_beta_s(&m, &h, &edge, 4.5, &[0.0, 1.0]).unwrap();
        let x = m.cover_point("a", &[3, 10]).unwrap();
        let y = m.cover_point("a", &[0, 0]).unwrap();
        let err = eval_gap_interior(&m, &h, &edge, &solve, &x, &y).unwrap_err();
        assert_eq!(err.code(), "DirectionMismatch");
    }

    #[test]
    fn free3_edge_closed_form() {
        let m = free3();
        let h = AdditiveFunction::zero(&m);
        let edge = locate_edge(&m, &h, 1, EdgeSide::Lower, &BrillouinGrid::new(3, 8)).unwrap();
        let y = m.cover_point("v", &[0, 0, 0]).unwrap();
        for (deck, dist) in [([10i64, 0, 0], 10.0), ([3, 4, 0], 5.0)] {
            let x = m.cover_point("v", &deck).unwrap();
            let v = eval_edge(&m, &h, &edge, &x, &y).unwrap();
            let expect = 1.0 / (4.0 * std::f64::consts::PI * dist);
            assert!(
                (v.value.re - expect).abs() / expect < 1e-9,
                "deck {deck:?}: {} vs {expect}",
                v.value.re
            );
        }
    }

    #[test]
    fn edge_asymptotics_guard_low_dimension() {
        let m = free2();
        let h = AdditiveFunction::zero(&m);
        let edge = locate_edge(&m, &h, 1, EdgeSide::Lower, &BrillouinGrid::new(2, 16)).unwrap();
        let x = m.cover_point("v", &[5, 0]).unwrap();
        let y = m.cover_point("v", &[0, 0]).unwrap();
        let err = eval_edge(&m, &h, &edge, &x, &y).unwrap_err();
        assert_eq!(err.code(), "DimensionTooLow");
    }

    #[test]
    fn orbit_evaluation_reuses_direction() {
        let (m, h, edge) = stripe_setup();
        let x = m.cover_point("a", &[0, 0]).unwrap();
        let gs: Vec<Vec<i64>> = (1..=4).map(|n| vec![0, 5 * n]).collect();
        let vals = eval_along_orbit(&m, &h, &edge, 4.5, &x, &gs).unwrap();
        assert_eq!(vals.len(), 4);
        let v10 = &vals[1];
        let expect = 2.0f64.powi(-10) / (10.0 * std::f64::consts::PI).sqrt();
        assert!((v10.value.re - expect).abs() / expect < 1e-9);

        let err = eval_along_orbit(&m, &h, &edge, 4.5, &x, &[vec![0, 0]]).unwrap_err();
        assert_eq!(err.code(), "ZeroDisplacement");
    }

    #[test]
    fn free2_diagonal_orbit_symmetric_solve() {
        let m = free2();
        let h = AdditiveFunction::zero(&m);
        let edge = locate_edge(&m, &h, 1, EdgeSide::Lower, &BrillouinGrid::new(2, 16)).unwrap();
        let x = m.cover_point("v", &[0, 0]).unwrap();
        let vals = eval_along_orbit(&m, &h, &edge, -1.0, &x, &[vec![7, 7]]).unwrap();
        // beta_s = (t,t) with 4 − 4cosh t = −1
        let t = 1.25f64.acosh();
        let decay = (-(7.0 * t + 7.0 * t)).exp();
        assert!((vals[0].decay - decay).abs() / decay < 1e-9);
    }

    #[test]
    fn gauge_invariance_of_value() {
        let (m, h, edge) = stripe_setup();
        let mut solve = solve_beta_s(&m, &h, &edge, 4.5, &[0.0, 1.0]).unwrap();
        let x = m.cover_point("a", &[0, 8]).unwrap();
        let y = m.cover_point("a", &[0, 0]).unwrap();
        let base = eval_gap_interior(&m, &h, &edge, &solve, &x, &y).unwrap().value;
        // rescale both eigenvectors arbitrarily and recompute the pairing
        let c1 = Complex64::new(-0.3, 1.7);
        let c2 = Complex64::new(2.5, -0.4);
        solve.state.phi_plus *= c1;
        solve.state.phi_minus *= c2;
        solve.state.pairing = solve.state.phi_minus.dotc(&solve.state.phi_plus);
        let rescaled = eval_gap_interior(&m, &h, &edge, &solve, &x, &y).unwrap().value;
        assert!((base - rescaled).norm() <= 1e-13 * base.norm());
    }

    #[test]
    fn hermitian_symmetry_of_value() {
        let m = free2();
        let h = AdditiveFunction::zero(&m);
        let edge = locate_edge(&m, &h, 1, EdgeSide::Lower, &BrillouinGrid::new(2, 16)).unwrap();
        let x = m.cover_point("v", &[6, 3]).unwrap();
        let y = m.cover_point("v", &[0, 0]).unwrap();
        let s = direction(&h, &x, &y).unwrap();
        let solve_fwd = solve_beta_s(&m, &h, &edge, -1.0, &s).unwrap();
        let neg_s: Vec<f64> = s.iter().map(|t| -t).collect();
        let solve_bwd = solve_beta_s(&m, &h, &edge, -1.0, &neg_s).unwrap();
        let fwd = eval_gap_interior(&m, &h, &edge, &solve_fwd, &x, &y).unwrap().value;
        let bwd = eval_gap_interior(&m, &h, &edge, &solve_bwd, &y, &x).unwrap().value;
        assert!((fwd - bwd.conj()).norm() <= 1e-12 * fwd.norm());
    }

    #[test]
    fn offset_invariance_same_vertex_pairs() {
        let m = stripe2();
        let h0 = AdditiveFunction::zero(&m);
        let edge0 = locate_edge(&m, &h0, 2, EdgeSide::Lower, &BrillouinGrid::new(2, 32)).unwrap();
        let solve0 = solve_beta_s(&m, &h0, &edge0, 4.5, &[0.0, 1.0]).unwrap();

        let h1 =
            AdditiveFunction::with_offsets(&m, vec![vec![0.13, -0.27], vec![-0.05, 0.41]]).unwrap();
        let edge1 = locate_edge(&m, &h1, 2, EdgeSide::Lower, &BrillouinGrid::new(2, 32)).unwrap();
        let solve1 = solve_beta_s(&m, &h1, &edge1, 4.5, &[0.0, 1.0]).unwrap();

        let x = m.cover_point("a", &[0, 9]).unwrap();
        let y = m.cover_point("a", &[0, 0]).unwrap();
        let v0 = eval_gap_interior(&m, &h0, &edge0, &solve0, &x, &y).unwrap().value;
        let v1 = eval_gap_interior(&m, &h1, &edge1, &solve1, &x, &y).unwrap().value;
        assert!((v0 - v1).norm() <= 1e-12 * v0.norm(), "{v0} vs {v1}");
    }
}
