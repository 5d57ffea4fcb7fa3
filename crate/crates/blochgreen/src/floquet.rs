//! Band structure over the Brillouin zone, spectral gaps, and gap edges.
//!
//! σ(L) is the union over the Brillouin zone of the spectra of L(k); the
//! j-th ascending eigenvalue λ_j(k) sweeps out band j. Bands are sampled on
//! a uniform tensor grid, gaps are read off the sampled band ranges, and a
//! gap edge is refined from the coarse grid extremum by damped Newton on the
//! Hellmann–Feynman gradient of the band function.
//!
//! Upper edges are reduced to lower edges of −L, so a located edge always
//! carries a positive-definite Hessian (the effective-mass matrix of the
//! band when approached from inside the gap).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::continuation;
use crate::crystal::{floquet_matrix_dk, floquet_matrix_real, AdditiveFunction, CrystalModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::par;

/// Minimum width for an interval to count as a spectral gap.
pub const GAP_TOLERANCE: f64 = 1e-8;

/// Uniform tensor sampling grid k ∈ center + [−π, π)^d, spacing 2π/m.
#[derive(Debug, Clone)]
pub struct BrillouinGrid {
    d: usize,
    m: usize,
    center: Vec<f64>,
}

impl BrillouinGrid {
    pub fn new(d: usize, m: usize) -> Self {
        Self::centered(vec![0.0; d], m)
    }

    pub fn centered(center: Vec<f64>, m: usize) -> Self {
        assert!(m >= 8, "grid needs at least 8 nodes per axis");
        BrillouinGrid { d: center.len(), m, center }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.m as f64
    }

    /// Node coordinates for a flat index (axis 0 slowest).
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = flat;
        let mut k = vec![0.0; self.d];
        for axis in (0..self.d).rev() {
            let j = idx % self.m;
            idx /= self.m;
            k[axis] = self.center[axis] - std::f64::consts::PI + j as f64 * self.spacing();
        }
        k
    }
}

/// Sampled band functions: `values[node * bands + j]` is λ_{j+1} at the node.
#[derive(Debug, Clone)]
pub struct BandStructure {
    grid: BrillouinGrid,
    bands: usize,
    values: Vec<f64>,
}

impl BandStructure {
    pub fn grid(&self) -> &BrillouinGrid {
        &self.grid
    }

    pub fn band_count(&self) -> usize {
        self.bands
    }

    /// λ_band at a node (band is 1-based, matching λ_j numbering).
    pub fn value(&self, node: usize, band: usize) -> f64 {
        self.values[node * self.bands + (band - 1)]
    }

    /// Sampled range [min, max] of band j.
    pub fn band_range(&self, band: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for node in 0..self.grid.node_count() {
            let v = self.value(node, band);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Node index minimizing band j.
    pub fn argmin(&self, band: usize) -> usize {
        let mut best = 0;
        let mut best_v = f64::INFINITY;
        for node in 0..self.grid.node_count() {
            let v = self.value(node, band);
            if v < best_v {
                best_v = v;
                best = node;
            }
        }
        best
    }
}

/// Sample all band functions of a symmetric model on a grid.
pub fn sample_bands(
    model: &CrystalModel,
    h: &AdditiveFunction,
    grid: &BrillouinGrid,
) -> Result<BandStructure> {
    if !model.is_symmetric() {
        return Err(Error::BadModel("band sampling requires a symmetric model".into()));
    }
    let bands = model.vertex_count();
    let per_node: Vec<Vec<f64>> = par::map_collect(grid.node_count(), |node| {
        let k = grid.node(node);
        linalg::hermitian_eigenvalues(&floquet_matrix_real(model, h, &k))
    });
    let mut values = Vec::with_capacity(grid.node_count() * bands);
    for node_vals in per_node {
        debug_assert_eq!(node_vals.len(), bands);
        values.extend(node_vals);
    }
    Ok(BandStructure { grid: grid.clone(), bands, values })
}

/// An open interval free of spectrum. `band_below = None` is the
/// semi-infinite gap (−∞, α_1).
#[derive(Debug, Clone, PartialEq)]
pub struct GapRecord {
    pub band_below: Option<usize>,
    pub lower: f64,
    pub upper: f64,
}

impl GapRecord {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Gaps between consecutive sampled band ranges: the semi-infinite gap below
/// the spectrum first, then finite gaps in band order.
pub fn detect_gaps(bands: &BandStructure) -> Vec<GapRecord> {
    let mut gaps = Vec::new();
    let (alpha1, _) = bands.band_range(1);
    gaps.push(GapRecord { band_below: None, lower: f64::NEG_INFINITY, upper: alpha1 });
    for j in 1..bands.band_count() {
        let (_, beta_j) = bands.band_range(j);
        let (alpha_next, _) = bands.band_range(j + 1);
        if alpha_next - beta_j > GAP_TOLERANCE {
            gaps.push(GapRecord { band_below: Some(j), lower: beta_j, upper: alpha_next });
        }
    }
    gaps
}

/// Which side of a band a gap edge sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSide {
    Lower,
    Upper,
}

impl std::fmt::Display for EdgeSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeSide::Lower => write!(f, "lower"),
            EdgeSide::Upper => write!(f, "upper"),
        }
    }
}

/// A located, certified gap edge.
///
/// Stored in the oriented (lower-edge) convention: for `side == Upper` the
/// fields describe the lower edge of band N+1−j of −L, so `hessian` is
/// positive definite in both cases and `lambda_edge` is always the edge value
/// of the *original* operator. Downstream gap-interior machinery works on
/// [`EdgeData::oriented_model`] / [`EdgeData::oriented_lambda`].
#[derive(Debug, Clone)]
pub struct EdgeData {
    pub band: usize,
    pub side: EdgeSide,
    pub k0: Vec<f64>,
    pub lambda_edge: f64,
    /// Hessian of the oriented band at k0 (positive definite when certified).
    pub hessian: DMatrix<f64>,
    /// Eigenvector of the oriented Floquet matrix at k0.
    pub phi: DVector<Complex64>,
    /// Smallest eigenvalue of `hessian`.
    pub min_hessian_eig: f64,
    /// Distance from the edge eigenvalue to its nearest neighbor at k0.
    pub neighbor_gap: f64,
}

impl EdgeData {
    /// Band index in the oriented (negated if Upper) model.
    pub fn oriented_band(&self, model: &CrystalModel) -> usize {
        match self.side {
            EdgeSide::Lower => self.band,
            EdgeSide::Upper => model.vertex_count() + 1 - self.band,
        }
    }

    /// The model whose oriented band has this edge as a minimum.
    pub fn oriented_model(&self, model: &CrystalModel) -> CrystalModel {
        match self.side {
            EdgeSide::Lower => model.clone(),
            EdgeSide::Upper => model.negated(),
        }
    }

    /// λ in the oriented convention (sign-flipped for upper edges).
    pub fn oriented_lambda(&self, lambda: f64) -> f64 {
        match self.side {
            EdgeSide::Lower => lambda,
            EdgeSide::Upper => -lambda,
        }
    }

    /// Edge value in the oriented convention.
    pub fn oriented_edge_value(&self) -> f64 {
        self.oriented_lambda(self.lambda_edge)
    }
}

const SIMPLE_TOL: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-12;

/// Eigenvalue, eigenvector, and gap to the nearest other eigenvalue of the
/// band-th branch at a real quasimomentum.
fn band_eigenpair(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k: &[f64],
    band: usize,
) -> (f64, DVector<Complex64>, f64) {
    let (vals, vecs) = linalg::hermitian_eigen(&floquet_matrix_real(model, h, k));
    let j = band - 1;
    let mut neighbor_gap = f64::INFINITY;
    for (i, v) in vals.iter().enumerate() {
        if i != j {
            neighbor_gap = neighbor_gap.min((v - vals[j]).abs());
        }
    }
    (vals[j], vecs[j].clone(), neighbor_gap)
}

/// Hellmann–Feynman gradient ∇λ_band(k) (requires a simple eigenvalue).
fn band_gradient(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k: &[f64],
    band: usize,
) -> Result<Vec<f64>> {
    let (_, phi, neighbor_gap) = band_eigenpair(model, h, k, band);
    if neighbor_gap < SIMPLE_TOL {
        return Err(Error::DegenerateEdge { gap: neighbor_gap, tol: SIMPLE_TOL });
    }
    let kc: Vec<Complex64> = k.iter().map(|&t| Complex64::new(t, 0.0)).collect();
    let mut grad = vec![0.0; model.deck_rank()];
    for (axis, g) in grad.iter_mut().enumerate() {
        let dl = floquet_matrix_dk(model, h, &kc, axis);
        *g = phi.dotc(&(&dl * &phi)).re;
    }
    Ok(grad)
}

/// Central-difference Hessian of the band function from analytic gradients.
fn band_hessian_fd(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k: &[f64],
    band: usize,
    step: f64,
) -> Result<DMatrix<f64>> {
    let d = model.deck_rank();
    let mut hess = DMatrix::zeros(d, d);
    for axis in 0..d {
        let mut kp = k.to_vec();
        kp[axis] += step;
        let mut km = k.to_vec();
        km[axis] -= step;
        let gp = band_gradient(model, h, &kp, band)?;
        let gm = band_gradient(model, h, &km, band)?;
        for row in 0..d {
            hess[(row, axis)] = (gp[row] - gm[row]) / (2.0 * step);
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Hessian of the band function by second-order perturbation theory with the
/// reduced resolvent; machine-accurate at a simple eigenvalue.
fn band_hessian(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k: &[f64],
    band: usize,
) -> Result<DMatrix<f64>> {
    let (lambda, phi, neighbor_gap) = band_eigenpair(model, h, k, band);
    if neighbor_gap < SIMPLE_TOL {
        return Err(Error::DegenerateEdge { gap: neighbor_gap, tol: SIMPLE_TOL });
    }
    let d = model.deck_rank();
    let kc: Vec<Complex64> = k.iter().map(|&t| Complex64::new(t, 0.0)).collect();
    let mat = floquet_matrix_real(model, h, k);
    let lam = Complex64::new(lambda, 0.0);
    let lm: Vec<DMatrix<Complex64>> =
        (0..d).map(|ax| floquet_matrix_dk(model, h, &kc, ax)).collect();
    let mut s_lm_phi = Vec::with_capacity(d);
    for l in &lm {
        let w = l * &phi;
        let z = linalg::reduced_resolvent_solve(&mat, lam, &phi, &phi, &w)
            .ok_or(Error::DegenerateEdge { gap: neighbor_gap, tol: SIMPLE_TOL })?;
        s_lm_phi.push(z);
    }
    let mut hess = DMatrix::zeros(d, d);
    for m_ax in 0..d {
        for n_ax in m_ax..d {
            let lmn = crate::crystal::floquet_matrix_dk2(model, h, &kc, m_ax, n_ax);
            let term = phi.dotc(&(&lmn * &phi))
                + phi.dotc(&(&lm[m_ax] * &s_lm_phi[n_ax]))
                + phi.dotc(&(&lm[n_ax] * &s_lm_phi[m_ax]));
            hess[(m_ax, n_ax)] = term.re;
            hess[(n_ax, m_ax)] = term.re;
        }
    }
    Ok(hess)
}

fn fold_to_symmetric_zone(k: &mut [f64]) {
    for t in k.iter_mut() {
        let two_pi = 2.0 * std::f64::consts::PI;
        *t -= two_pi * (*t / two_pi).round();
        if *t <= -std::f64::consts::PI + 1e-15 {
            *t += two_pi;
        }
    }
}

/// Locate and certify the gap edge of a band.
///
/// The coarse grid extremum is refined by damped Newton on the analytic band
/// gradient to |∇λ_j| < 1e-12; the Hessian comes from central differences of
/// the gradient with a step-halving consistency check. Fails with
/// [`Error::NoGap`] when no gap borders the requested side,
/// [`Error::DegenerateEdge`] when the edge eigenvalue is not simple, and
/// [`Error::NonConvexEdge`] when the Hessian is not positive definite.
pub fn locate_edge(
    model: &CrystalModel,
    h: &AdditiveFunction,
    band: usize,
    side: EdgeSide,
    grid: &BrillouinGrid,
) -> Result<EdgeData> {
    if band == 0 || band > model.vertex_count() {
        return Err(Error::BadModel(format!(
            "band {band} out of range 1..={}",
            model.vertex_count()
        )));
    }
    if side == EdgeSide::Upper {
        let negated = model.negated();
        let mirror =
            locate_edge(&negated, h, model.vertex_count() + 1 - band, EdgeSide::Lower, grid)?;
        // a lower edge of −L is an upper edge of L
        return Ok(EdgeData {
            band,
            side: EdgeSide::Upper,
            k0: mirror.k0,
            lambda_edge: -mirror.lambda_edge,
            hessian: mirror.hessian,
            phi: mirror.phi,
            min_hessian_eig: mirror.min_hessian_eig,
            neighbor_gap: mirror.neighbor_gap,
        });
    }

    let bands = sample_bands(model, h, grid)?;
    let gaps = detect_gaps(&bands);
    let has_gap_below = if band == 1 {
        true // semi-infinite gap
    } else {
        gaps.iter().any(|g| g.band_below == Some(band - 1))
    };
    if !has_gap_below {
        return Err(Error::NoGap { band, side: "lower".into() });
    }

    let mut k = bands.grid().node(bands.argmin(band));

    // damped Newton on the gradient
    let fd_step = 1e-4;
    let mut converged = false;
    for _ in 0..120 {
        let grad = band_gradient(model, h, &k, band)?;
        let gnorm = crate::crystal::norm2(&grad);
        if gnorm < GRAD_TOL {
            converged = true;
            break;
        }
        let hess = band_hessian(model, h, &k, band)?;
        let g = DVector::from_vec(grad.clone());
        let step = hess
            .clone()
            .lu()
            .solve(&g)
            .unwrap_or_else(|| &g * (1.0 / hess.diagonal().amax().max(1.0)));
        let mut eta = 1.0;
        let mut advanced = false;
        for _ in 0..30 {
            let trial: Vec<f64> =
                k.iter().zip(step.iter()).map(|(ki, si)| ki - eta * si).collect();
            match band_gradient(model, h, &trial, band) {
                Ok(tg) if crate::crystal::norm2(&tg) < gnorm => {
                    k = trial;
                    advanced = true;
                    break;
                }
                _ => eta *= 0.5,
            }
        }
        if !advanced {
            // gradient-descent fallback step
            let scale = 0.1 / (1.0 + gnorm);
            for (ki, gi) in k.iter_mut().zip(&grad) {
                *ki -= scale * gi;
            }
        }
    }
    if !converged {
        let grad = band_gradient(model, h, &k, band)?;
        if crate::crystal::norm2(&grad) >= GRAD_TOL {
            return Err(Error::EigFailure(format!(
                "edge refinement stalled at |grad| = {:.3e}",
                crate::crystal::norm2(&grad)
            )));
        }
    }
    fold_to_symmetric_zone(&mut k);

    let (lambda_edge, phi, neighbor_gap) = band_eigenpair(model, h, &k, band);
    if neighbor_gap < SIMPLE_TOL {
        return Err(Error::DegenerateEdge { gap: neighbor_gap, tol: SIMPLE_TOL });
    }

    let hess = band_hessian(model, h, &k, band)?;
    // validate against step-halved central differences of the gradient
    let fd = band_hessian_fd(model, h, &k, band, fd_step)?;
    let fd_half = band_hessian_fd(model, h, &k, band, fd_step * 0.5)?;
    let scale = hess.amax().max(1e-12);
    let disagreement = ((&hess - &fd).amax() / scale).max((&hess - &fd_half).amax() / scale);
    if disagreement > 1e-6 {
        return Err(Error::EigFailure(format!(
            "band Hessian failed the finite-difference cross-check ({disagreement:.3e})"
        )));
    }
    let eigs = hess.clone().symmetric_eigen().eigenvalues;
    let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig <= 0.0 {
        return Err(Error::NonConvexEdge { min_eig });
    }

    Ok(EdgeData {
        band,
        side: EdgeSide::Lower,
        k0: k,
        lambda_edge,
        hessian: hess,
        phi,
        min_hessian_eig: min_eig,
        neighbor_gap,
    })
}

/// Pass/fail flags and margins for the edge assumptions, plus the Fermi
/// surface clearance scan along solved β_s rays.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub lambda: f64,
    /// |λ_j(k0) − λ_edge|.
    pub a1_defect: f64,
    pub a1: bool,
    /// min over sampled k and i≠j of |λ_i(k) − λ_edge| (∞ when N = 1).
    pub a2_margin: f64,
    pub a2: bool,
    /// Farthest distance from k0 (mod 2π) of a node whose band value lies
    /// within the A3 probe margin above the edge.
    pub a3_spread: f64,
    pub a3: bool,
    /// Smallest Hessian eigenvalue.
    pub a4_min_eig: f64,
    pub a4: bool,
    /// Largest distance of a k0 component from {0, π}.
    pub a5_defect: f64,
    pub a5: bool,
    /// min over the (t, k) scan of σ_min(L(k + i t β_s) − λ), over all
    /// scanned directions; `None` when no directions were scanned.
    pub singularity_margin: Option<f64>,
}

impl AssumptionReport {
    fn check(&self, name: &str, pass: bool, margin: f64) -> Result<()> {
        if pass {
            Ok(())
        } else {
            Err(Error::AssumptionViolated { name: name.into(), margin })
        }
    }

    /// Everything gap-interior asymptotics needs: A1–A5 and a positive
    /// singularity-scan margin.
    pub fn require_gap_interior(&self) -> Result<()> {
        self.check("A1", self.a1, self.a1_defect)?;
        self.check("A2", self.a2, self.a2_margin)?;
        self.check("A3", self.a3, self.a3_spread)?;
        self.check("A4", self.a4, self.a4_min_eig)?;
        self.check("A5", self.a5, self.a5_defect)?;
        if let Some(margin) = self.singularity_margin {
            self.check("singularity-scan", margin > 0.0, margin)?;
        }
        Ok(())
    }

    /// The spectral-edge asymptotics only need A1–A4.
    pub fn require_edge(&self) -> Result<()> {
        self.check("A1", self.a1, self.a1_defect)?;
        self.check("A2", self.a2, self.a2_margin)?;
        self.check("A3", self.a3, self.a3_spread)?;
        self.check("A4", self.a4, self.a4_min_eig)
    }
}

/// Check assumptions A1–A5 at a located edge, for a λ in the closed gap on
/// the edge side, and scan the Fermi surface clearance along the rays
/// k + i·t·β_s for each direction in `scan_directions`.
pub fn verify_assumptions(
    model: &CrystalModel,
    h: &AdditiveFunction,
    edge: &EdgeData,
    lambda: f64,
    grid: &BrillouinGrid,
    scan_directions: &[Vec<f64>],
) -> Result<AssumptionReport> {
    let oriented = edge.oriented_model(model);
    let oriented_lambda = edge.oriented_lambda(lambda);
    let band = edge.oriented_band(model);
    let edge_value = edge.oriented_edge_value();

    let (val_k0, _, _) = band_eigenpair(&oriented, h, &edge.k0, band);
    let a1_defect = (val_k0 - edge_value).abs();

    let bands = sample_bands(&oriented, h, grid)?;
    let mut a2_margin = f64::INFINITY;
    for node in 0..grid.node_count() {
        for j in 1..=bands.band_count() {
            if j != band {
                a2_margin = a2_margin.min((bands.value(node, j) - edge_value).abs());
            }
        }
    }

    // nodes with λ_j below the probe level must cluster within radius 0.5
    // of k0 mod 2π; the level is the on-model band value at radius 0.5
    let probe_radius = 0.5;
    let probe_margin = 0.5 * probe_radius * probe_radius * edge.min_hessian_eig * 0.5;
    let mut a3_spread = 0.0f64;
    for node in 0..grid.node_count() {
        if bands.value(node, band) < edge_value + probe_margin {
            let k = grid.node(node);
            let mut dist2 = 0.0;
            for (axis, &kk) in k.iter().enumerate() {
                let mut delta = kk - edge.k0[axis];
                let two_pi = 2.0 * std::f64::consts::PI;
                delta -= two_pi * (delta / two_pi).round();
                dist2 += delta * delta;
            }
            a3_spread = a3_spread.max(dist2.sqrt());
        }
    }

    let a5_defect = edge
        .k0
        .iter()
        .map(|&t| t.abs().min((t.abs() - std::f64::consts::PI).abs()))
        .fold(0.0f64, f64::max);

    let singularity_margin = if scan_directions.is_empty() {
        None
    } else {
        let mut min_sv = f64::INFINITY;
        for s in scan_directions {
            let solve = continuation::solve_beta_s(model, h, edge, lambda, s)?;
            min_sv = min_sv.min(singularity_scan_min(
                &oriented,
                h,
                &edge.k0,
                &solve.beta,
                oriented_lambda,
                grid.nodes_per_axis().min(17),
                25,
            ));
        }
        Some(min_sv)
    };

    Ok(AssumptionReport {
        lambda,
        a1_defect,
        a1: a1_defect < 1e-10,
        a2_margin,
        a2: a2_margin > 1e-6,
        a3_spread,
        a3: a3_spread <= probe_radius,
        a4_min_eig: edge.min_hessian_eig,
        a4: edge.min_hessian_eig > 0.0,
        a5_defect,
        a5: a5_defect < 1e-6,
        singularity_margin,
    })
}

/// min over t ∈ [0, 0.99] and a coarse k-grid of σ_min(L(k + i t β) − λ).
pub fn singularity_scan_min(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k0: &[f64],
    beta: &[f64],
    lambda: f64,
    k_nodes: usize,
    t_nodes: usize,
) -> f64 {
    let d = model.deck_rank();
    let total = k_nodes.pow(d as u32);
    let lam = Complex64::new(lambda, 0.0);
    let mins: Vec<f64> = par::map_collect(total, |flat| {
        let mut idx = flat;
        let mut k = vec![0.0; d];
        for axis in (0..d).rev() {
            let j = idx % k_nodes;
            idx /= k_nodes;
            k[axis] = k0[axis] - std::f64::consts::PI
                + (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / k_nodes as f64;
        }
        let mut local_min = f64::INFINITY;
        for ti in 0..t_nodes {
            let t = 0.99 * ti as f64 / (t_nodes - 1) as f64;
            let kc: Vec<Complex64> =
                k.iter().zip(beta).map(|(&re, &b)| Complex64::new(re, t * b)).collect();
            let mut m = crate::crystal::build_floquet_matrix(model, h, &kc);
            for i in 0..m.nrows() {
                m[(i, i)] -= lam;
            }
            local_min = local_min.min(linalg::smallest_singular_value(&m));
        }
        local_min
    });
    mins.into_iter().fold(f64::INFINITY, f64::min)
}
