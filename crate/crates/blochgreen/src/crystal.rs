//! Crystal graphs: periodic operators on ℤ^d covers of finite graphs.
//!
//! A model is a finite quotient graph whose directed edges carry integer
//! deck shifts σ ∈ ℤ^d and complex weights. The operator on the cover acts by
//!
//! ```text
//! (Lu)(v, g) = potential[v]·u(v, g) + Σ_{edges v→w, shift σ} weight · u(w, g+σ)
//! ```
//!
//! Conjugation by e^{ik·h} with an additive function h(v,g) = g + c(v) gives
//! the Floquet matrix family
//!
//! ```text
//! L(k)_{vw} = δ_{vw}·potential[v] + Σ_{edges v→w at σ} weight · e^{ik·(σ + c(w) − c(v))},
//! ```
//!
//! an entire function of k ∈ ℂ^d that is Hermitian for real k when the edge
//! set is closed under the adjoint pairing (v,w,σ,a) ↔ (w,v,−σ,conj a).

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A directed edge of the quotient graph, with its deck shift and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub shift: Vec<i64>,
    pub weight: Complex64,
}

/// Validated quotient-graph model of a periodic operator. Immutable after
/// construction; all operations on it are pure.
#[derive(Debug, Clone)]
pub struct CrystalModel {
    d: usize,
    vertices: Vec<String>,
    edges: Vec<Edge>,
    potential: Vec<f64>,
    symmetric: bool,
}

/// Edge description by vertex name, used when assembling a model.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub shift: Vec<i64>,
    pub weight: Complex64,
}

impl EdgeSpec {
    pub fn new(from: &str, to: &str, shift: &[i64], weight: impl Into<Complex64>) -> Self {
        EdgeSpec { from: from.into(), to: to.into(), shift: shift.to_vec(), weight: weight.into() }
    }
}

/// A point of the cover: quotient vertex index plus deck coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoverPoint {
    pub vertex: usize,
    pub deck: Vec<i64>,
}

impl CoverPoint {
    pub fn new(vertex: usize, deck: &[i64]) -> Self {
        CoverPoint { vertex, deck: deck.to_vec() }
    }
}

/// Deck-coordinate map h(v,g) = g + c(v) with per-vertex offsets c(v).
///
/// Every additive function on a crystal graph has this form up to a global
/// constant; the zero-offset instance is always available.
#[derive(Debug, Clone)]
pub struct AdditiveFunction {
    offsets: Vec<Vec<f64>>,
}

impl AdditiveFunction {
    /// The canonical additive function with c ≡ 0.
    pub fn zero(model: &CrystalModel) -> Self {
        AdditiveFunction { offsets: vec![vec![0.0; model.d]; model.vertex_count()] }
    }

    /// Per-vertex offsets; one d-vector per quotient vertex, in vertex order.
    pub fn with_offsets(model: &CrystalModel, offsets: Vec<Vec<f64>>) -> Result<Self> {
        if offsets.len() != model.vertex_count() {
            return Err(Error::BadModel(format!(
                "offsets for {} vertices, model has {}",
                offsets.len(),
                model.vertex_count()
            )));
        }
        for (v, c) in offsets.iter().enumerate() {
            if c.len() != model.d {
                return Err(Error::BadModel(format!(
                    "offset for vertex {} has length {}, expected {}",
                    model.vertices[v],
                    c.len(),
                    model.d
                )));
            }
        }
        Ok(AdditiveFunction { offsets })
    }

    pub fn offset(&self, vertex: usize) -> &[f64] {
        &self.offsets[vertex]
    }

    /// h(x) = deck(x) + c(vertex(x)).
    pub fn eval(&self, x: &CoverPoint) -> Vec<f64> {
        self.offsets[x.vertex]
            .iter()
            .zip(&x.deck)
            .map(|(c, &g)| c + g as f64)
            .collect()
    }

    /// h(x) − h(y).
    pub fn displacement(&self, x: &CoverPoint, y: &CoverPoint) -> Vec<f64> {
        self.eval(x).iter().zip(self.eval(y)).map(|(a, b)| a - b).collect()
    }
}

/// Unit direction (h(x)−h(y))/|h(x)−h(y)|.
pub fn direction(h: &AdditiveFunction, x: &CoverPoint, y: &CoverPoint) -> Result<Vec<f64>> {
    let delta = h.displacement(x, y);
    let norm = norm2(&delta);
    if norm < 1e-14 {
        return Err(Error::ZeroDisplacement);
    }
    Ok(delta.iter().map(|t| t / norm).collect())
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

fn weight_key(w: Complex64) -> (u64, u64) {
    // exact pairing check: compare weights bit-for-bit (with -0.0 == 0.0)
    let canon = |x: f64| if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() };
    (canon(w.re), canon(w.im))
}

impl CrystalModel {
    /// Assemble and validate a model. This is the only way to obtain a
    /// `CrystalModel`, so every instance in circulation satisfies the
    /// structural invariants:
    ///
    /// - the quotient graph (ignoring shifts and direction) is connected;
    /// - `symmetric`: the edge multiset is closed under
    ///   (v,w,σ,a) ↔ (w,v,−σ,conj a), making L(k) Hermitian for real k;
    /// - `!symmetric` (Perron mode): all weights are strictly negative reals
    ///   and the quotient is strongly connected.
    pub fn new(
        d: usize,
        vertices: Vec<String>,
        edges: Vec<EdgeSpec>,
        potential: Vec<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::BadModel("deck rank d must be positive".into()));
        }
        if vertices.is_empty() {
            return Err(Error::BadModel("model has no vertices".into()));
        }
        let mut index = HashMap::new();
        for (i, name) in vertices.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::BadModel(format!("duplicate vertex label {name}")));
            }
        }
        if potential.len() != vertices.len() {
            return Err(Error::BadModel(format!(
                "potential has {} entries for {} vertices",
                potential.len(),
                vertices.len()
            )));
        }
        let mut resolved = Vec::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            let from = *index
                .get(&e.from)
                .ok_or_else(|| Error::BadModel(format!("edge {i}: unknown vertex {}", e.from)))?;
            let to = *index
                .get(&e.to)
                .ok_or_else(|| Error::BadModel(format!("edge {i}: unknown vertex {}", e.to)))?;
            if e.shift.len() != d {
                return Err(Error::BadModel(format!(
                    "edge {i}: shift has length {}, expected {}",
                    e.shift.len(),
                    d
                )));
            }
            resolved.push(Edge { from, to, shift: e.shift.clone(), weight: e.weight });
        }
        let model = CrystalModel { d, vertices, edges: resolved, potential, symmetric };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        // connectivity of the quotient, edges taken as undirected
        let n = self.vertex_count();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let reachable = bfs_count(&adj, 0);
        if reachable != n {
            return Err(Error::DisconnectedQuotient { reachable, total: n });
        }

        if self.symmetric {
            // multiset pairing (v,w,σ,a) ↔ (w,v,−σ,conj a), checked exactly
            let mut counts: HashMap<(usize, usize, Vec<i64>, (u64, u64)), i64> = HashMap::new();
            for e in &self.edges {
                *counts.entry((e.from, e.to, e.shift.clone(), weight_key(e.weight))).or_insert(0) += 1;
            }
            for (i, e) in self.edges.iter().enumerate() {
                let adjoint = (
                    e.to,
                    e.from,
                    e.shift.iter().map(|s| -s).collect::<Vec<i64>>(),
                    weight_key(e.weight.conj()),
                );
                let own = counts[&(e.from, e.to, e.shift.clone(), weight_key(e.weight))];
                let paired = counts.get(&adjoint).copied().unwrap_or(0);
                if paired != own {
                    return Err(Error::MissingAdjointEdge {
                        index: i,
                        from: self.vertices[e.from].clone(),
                        to: self.vertices[e.to].clone(),
                        shift: e.shift.clone(),
                    });
                }
            }
        } else {
            for (i, e) in self.edges.iter().enumerate() {
                if e.weight.im != 0.0 || e.weight.re >= 0.0 {
                    return Err(Error::BadSign { index: i, weight: format!("{}", e.weight) });
                }
            }
            let mut fwd = vec![Vec::new(); n];
            let mut bwd = vec![Vec::new(); n];
            for e in &self.edges {
                fwd[e.from].push(e.to);
                bwd[e.to].push(e.from);
            }
            if bfs_count(&fwd, 0) != n || bfs_count(&bwd, 0) != n {
                return Err(Error::Reducible);
            }
        }
        Ok(())
    }

    pub fn deck_rank(&self) -> usize {
        self.d
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn vertex_index(&self, label: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == label)
    }

    /// Cover point from a vertex label and deck coordinate.
    pub fn cover_point(&self, label: &str, deck: &[i64]) -> Result<CoverPoint> {
        let vertex = self
            .vertex_index(label)
            .ok_or_else(|| Error::BadModel(format!("unknown vertex {label}")))?;
        if deck.len() != self.d {
            return Err(Error::BadModel(format!(
                "deck vector has length {}, expected {}",
                deck.len(),
                self.d
            )));
        }
        Ok(CoverPoint::new(vertex, deck))
    }

    /// The model with L replaced by −L (used to reduce upper gap edges to
    /// lower ones). Symmetric pairing survives the sign flip.
    pub fn negated(&self) -> CrystalModel {
        CrystalModel {
            d: self.d,
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge { from: e.from, to: e.to, shift: e.shift.clone(), weight: -e.weight })
                .collect(),
            potential: self.potential.iter().map(|p| -p).collect(),
            symmetric: self.symmetric,
        }
    }

    /// The formal adjoint: edges reversed with negated shifts and conjugated
    /// weights. For a symmetric model this is the model itself (as a
    /// multiset); in Perron mode it realizes A*.
    pub fn adjoint(&self) -> CrystalModel {
        CrystalModel {
            d: self.d,
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    from: e.to,
                    to: e.from,
                    shift: e.shift.iter().map(|s| -s).collect(),
                    weight: e.weight.conj(),
                })
                .collect(),
            potential: self.potential.clone(),
            symmetric: self.symmetric,
        }
    }

    /// True when the §8 Perron machinery applies: strictly negative real
    /// weights and strongly connected quotient. Independent of the
    /// `symmetric` flag, so symmetric models with negative weights qualify.
    pub fn perron_ready(&self) -> bool {
        if !self.edges.iter().all(|e| e.weight.im == 0.0 && e.weight.re < 0.0) {
            return false;
        }
        let n = self.vertex_count();
        let mut fwd = vec![Vec::new(); n];
        let mut bwd = vec![Vec::new(); n];
        for e in &self.edges {
            fwd[e.from].push(e.to);
            bwd[e.to].push(e.from);
        }
        bfs_count(&fwd, 0) == n && bfs_count(&bwd, 0) == n
    }

    /// Diameter of the quotient graph (undirected), used to pad BFS boxes.
    fn quotient_diameter(&self) -> usize {
        let n = self.vertex_count();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut diam = 0;
        for start in 0..n {
            let mut dist = vec![usize::MAX; n];
            dist[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
            diam = diam.max(*dist.iter().max().unwrap());
        }
        diam
    }
}

fn bfs_count(adj: &[Vec<usize>], start: usize) -> usize {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count
}

/// The Floquet matrix L(k) at a complex quasimomentum.
///
/// Entries are entire in k; for real k on a symmetric model the matrix is
/// Hermitian, and L(k + 2π e_m) is unitarily equivalent to L(k).
pub fn build_floquet_matrix(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k: &[Complex64],
) -> DMatrix<Complex64> {
    assert_eq!(k.len(), model.d, "quasimomentum length mismatch");
    let n = model.vertex_count();
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (v, &p) in model.potential.iter().enumerate() {
        m[(v, v)] += Complex64::new(p, 0.0);
    }
    let i = Complex64::new(0.0, 1.0);
    for e in &model.edges {
        let mut phase = Complex64::new(0.0, 0.0);
        for axis in 0..model.d {
            let delta = e.shift[axis] as f64 + h.offset(e.to)[axis] - h.offset(e.from)[axis];
            phase += k[axis] * delta;
        }
        m[(e.from, e.to)] += e.weight * (i * phase).exp();
    }
    m
}

/// ∂L(k)/∂k_axis: each edge term gains the factor i·(σ + c(w) − c(v))_axis.
pub fn floquet_matrix_dk(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k: &[Complex64],
    axis: usize,
) -> DMatrix<Complex64> {
    let n = model.vertex_count();
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let i = Complex64::new(0.0, 1.0);
    for e in &model.edges {
        let mut phase = Complex64::new(0.0, 0.0);
        for ax in 0..model.d {
            let delta = e.shift[ax] as f64 + h.offset(e.to)[ax] - h.offset(e.from)[ax];
            phase += k[ax] * delta;
        }
        let delta_axis = e.shift[axis] as f64 + h.offset(e.to)[axis] - h.offset(e.from)[axis];
        m[(e.from, e.to)] += e.weight * i * delta_axis * (i * phase).exp();
    }
    m
}

/// ∂²L(k)/∂k_m∂k_n: each edge term gains i²·δ_m·δ_n.
pub fn floquet_matrix_dk2(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k: &[Complex64],
    m_axis: usize,
    n_axis: usize,
) -> DMatrix<Complex64> {
    let n = model.vertex_count();
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let i = Complex64::new(0.0, 1.0);
    for e in &model.edges {
        let mut phase = Complex64::new(0.0, 0.0);
        for ax in 0..model.d {
            let delta = e.shift[ax] as f64 + h.offset(e.to)[ax] - h.offset(e.from)[ax];
            phase += k[ax] * delta;
        }
        let dm = e.shift[m_axis] as f64 + h.offset(e.to)[m_axis] - h.offset(e.from)[m_axis];
        let dn = e.shift[n_axis] as f64 + h.offset(e.to)[n_axis] - h.offset(e.from)[n_axis];
        m[(e.from, e.to)] += e.weight * (i * i) * dm * dn * (i * phase).exp();
    }
    m
}

/// Convenience: L(k) at a real quasimomentum.
pub fn floquet_matrix_real(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k: &[f64],
) -> DMatrix<Complex64> {
    let kc: Vec<Complex64> = k.iter().map(|&t| Complex64::new(t, 0.0)).collect();
    build_floquet_matrix(model, h, &kc)
}

/// L(k0 + iβ) for real k0, β.
pub fn floquet_matrix_shifted(
    model: &CrystalModel,
    h: &AdditiveFunction,
    k0: &[f64],
    beta: &[f64],
) -> DMatrix<Complex64> {
    let kc: Vec<Complex64> = k0.iter().zip(beta).map(|(&re, &im)| Complex64::new(re, im)).collect();
    build_floquet_matrix(model, h, &kc)
}

/// Graph distance on the cover between two cover points.
///
/// BFS on the quotient with deck bookkeeping, truncated to the bounding box
/// of the deck difference padded by the quotient diameter times the largest
/// shift, which no shortest path needs to leave.
pub fn cover_distance(model: &CrystalModel, x: &CoverPoint, y: &CoverPoint) -> usize {
    if x == y {
        return 0;
    }
    let d = model.d;
    let max_shift = model
        .edges
        .iter()
        .flat_map(|e| e.shift.iter().map(|s| s.unsigned_abs() as i64))
        .max()
        .unwrap_or(0)
        .max(1);
    let pad = ((model.quotient_diameter() + 1) as i64) * max_shift + 1;
    // translate so the search starts at deck 0
    let target_deck: Vec<i64> = y.deck.iter().zip(&x.deck).map(|(a, b)| a - b).collect();
    let lo: Vec<i64> = (0..d).map(|i| 0.min(target_deck[i]) - pad).collect();
    let hi: Vec<i64> = (0..d).map(|i| 0.max(target_deck[i]) + pad).collect();

    let start = CoverPoint::new(x.vertex, &vec![0; d]);
    let goal = CoverPoint::new(y.vertex, &target_deck);
    let mut dist: HashMap<CoverPoint, usize> = HashMap::new();
    dist.insert(start.clone(), 0);
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        let base = dist[&p];
        if p == goal {
            return base;
        }
        for e in &model.edges {
            if e.from != p.vertex {
                continue;
            }
            let deck: Vec<i64> = p.deck.iter().zip(&e.shift).map(|(g, s)| g + s).collect();
            if deck.iter().enumerate().any(|(i, &g)| g < lo[i] || g > hi[i]) {
                continue;
            }
            let q = CoverPoint { vertex: e.to, deck };
            if !dist.contains_key(&q) {
                dist.insert(q.clone(), base + 1);
                queue.push_back(q);
            }
        }
    }
    usize::MAX // unreachable within the box: cannot happen on a validated model
}

pub mod fixtures {
    //! The four canonical models used throughout the tests and the CLI docs.

    use super::*;

    /// Square-lattice Laplacian: d=2, one vertex, hops ±e1, ±e2 with weight
    /// −1 and potential 4. Single band λ(k) = 4 − 2cos k1 − 2cos k2 on [0,8].
    pub fn free2() -> CrystalModel {
        free_lattice(2)
    }

    /// Cubic-lattice Laplacian: d=3, single band on [0,12].
    pub fn free3() -> CrystalModel {
        free_lattice(3)
    }

    /// Free ℤ^d Laplacian with potential 2d.
    pub fn free_lattice(d: usize) -> CrystalModel {
        let mut edges = Vec::new();
        for axis in 0..d {
            for sign in [1i64, -1] {
                let mut shift = vec![0i64; d];
                shift[axis] = sign;
                edges.push(EdgeSpec::new("v", "v", &shift, -1.0));
            }
        }
        CrystalModel::new(d, vec!["v".into()], edges, vec![2.0 * d as f64], true).unwrap()
    }

    /// Two-vertex strip with a finite gap (3,5): vertices a,b with potentials
    /// 7,1, rungs a↔b at shifts (0,0) and ∓(1,0), vertical loops on both,
    /// all weights −1. Bands 4 − 2cos k2 ∓ sqrt(11 + 2cos k1).
    pub fn stripe2() -> CrystalModel {
        let edges = vec![
            EdgeSpec::new("a", "b", &[0, 0], -1.0),
            EdgeSpec::new("b", "a", &[0, 0], -1.0),
            EdgeSpec::new("a", "b", &[-1, 0], -1.0),
            EdgeSpec::new("b", "a", &[1, 0], -1.0),
            EdgeSpec::new("a", "a", &[0, 1], -1.0),
            EdgeSpec::new("a", "a", &[0, -1], -1.0),
            EdgeSpec::new("b", "b", &[0, 1], -1.0),
            EdgeSpec::new("b", "b", &[0, -1], -1.0),
        ];
        CrystalModel::new(2, vec!["a".into(), "b".into()], edges, vec![7.0, 1.0], true).unwrap()
    }

    /// stripe2 with the potential offset v applied as {6+v/... } replaced by
    /// potentials {7−t, 1+t}: at t=1 (potentials 6,2) the bands touch at 4
    /// and the finite gap closes.
    pub fn stripe2_potentials(pa: f64, pb: f64) -> CrystalModel {
        let edges = vec![
            EdgeSpec::new("a", "b", &[0, 0], -1.0),
            EdgeSpec::new("b", "a", &[0, 0], -1.0),
            EdgeSpec::new("a", "b", &[-1, 0], -1.0),
            EdgeSpec::new("b", "a", &[1, 0], -1.0),
            EdgeSpec::new("a", "a", &[0, 1], -1.0),
            EdgeSpec::new("a", "a", &[0, -1], -1.0),
            EdgeSpec::new("b", "b", &[0, 1], -1.0),
            EdgeSpec::new("b", "b", &[0, -1], -1.0),
        ];
        CrystalModel::new(2, vec!["a".into(), "b".into()], edges, vec![pa, pb], true).unwrap()
    }

    /// Drifted square lattice (nonsymmetric): weights −2 at +e1, −0.5 at −e1,
    /// −1 at ±e2, potential 6. Perron dispersion
    /// Λ(β) = 6 − 2e^{−β1} − 0.5·e^{β1} − 2cosh β2, maximized at β0 = (ln 2, 0).
    pub fn drift2() -> CrystalModel {
        let edges = vec![
            EdgeSpec::new("v", "v", &[1, 0], -2.0),
            EdgeSpec::new("v", "v", &[-1, 0], -0.5),
            EdgeSpec::new("v", "v", &[0, 1], -1.0),
            EdgeSpec::new("v", "v", &[0, -1], -1.0),
        ];
        CrystalModel::new(2, vec!["v".into()], edges, vec![6.0], false).unwrap()
    }

    /// Square-lattice model whose lowest band attains its minimum on the
    /// interior points k1 = ±π/3: hops ±e1 (weight −1), ±2e1 (weight +1/2),
    /// ±e2 (weight −1). Violates assumptions A3 and A5 by construction.
    pub fn interior_edge2() -> CrystalModel {
        let edges = vec![
            EdgeSpec::new("v", "v", &[1, 0], -1.0),
            EdgeSpec::new("v", "v", &[-1, 0], -1.0),
            EdgeSpec::new("v", "v", &[2, 0], 0.5),
            EdgeSpec::new("v", "v", &[-2, 0], 0.5),
            EdgeSpec::new("v", "v", &[0, 1], -1.0),
            EdgeSpec::new("v", "v", &[0, -1], -1.0),
        ];
        CrystalModel::new(2, vec!["v".into()], edges, vec![4.0], true).unwrap()
    }

    /// Two-vertex model with L(k) = [[f, g], [conj g, f]] where
    /// f = 4 − 2cos k1 − 2cos k2 and the coupling g = ½(1−e^{ik1})² vanishes
    /// quadratically at k1 = 0. The bands f ∓ |g| touch exactly at the
    /// spectral bottom k0 = (0,0): a degenerate edge by construction.
    pub fn crossing2() -> CrystalModel {
        let mut edges = vec![
            EdgeSpec::new("a", "b", &[0, 0], 0.5),
            EdgeSpec::new("a", "b", &[1, 0], -1.0),
            EdgeSpec::new("a", "b", &[2, 0], 0.5),
            EdgeSpec::new("b", "a", &[0, 0], 0.5),
            EdgeSpec::new("b", "a", &[-1, 0], -1.0),
            EdgeSpec::new("b", "a", &[-2, 0], 0.5),
        ];
        for v in ["a", "b"] {
            for (axis, sign) in [(0usize, 1i64), (0, -1), (1, 1), (1, -1)] {
                let mut shift = vec![0i64; 2];
                shift[axis] = sign;
                edges.push(EdgeSpec::new(v, v, &shift, -1.0));
            }
        }
        CrystalModel::new(2, vec!["a".into(), "b".into()], edges, vec![4.0, 4.0], true).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn free2_validates_and_fails_without_adjoint() {
        let m = free2();
        assert_eq!(m.vertex_count(), 1);
        // delete the +e1 edge: pairing broken
        let edges = vec![
            EdgeSpec::new("v", "v", &[-1, 0], -1.0),
            EdgeSpec::new("v", "v", &[0, 1], -1.0),
            EdgeSpec::new("v", "v", &[0, -1], -1.0),
        ];
        let err = CrystalModel::new(2, vec!["v".into()], edges, vec![4.0], true).unwrap_err();
        assert_eq!(err.code(), "MissingAdjointEdge");
    }

    #[test]
    fn stripe2_validates() {
        let m = stripe2();
        assert_eq!(m.vertex_count(), 2);
        assert!(m.is_symmetric());
    }

    #[test]
    fn disconnected_quotient_rejected() {
        let edges = vec![
            EdgeSpec::new("a", "a", &[1, 0], -1.0),
            EdgeSpec::new("a", "a", &[-1, 0], -1.0),
            EdgeSpec::new("b", "b", &[1, 0], -1.0),
            EdgeSpec::new("b", "b", &[-1, 0], -1.0),
        ];
        let err =
            CrystalModel::new(2, vec!["a".into(), "b".into()], edges, vec![0.0, 0.0], true).unwrap_err();
        assert_eq!(err.code(), "DisconnectedQuotient");
    }

    #[test]
    fn perron_mode_rejects_nonnegative_weight() {
        let edges = vec![
            EdgeSpec::new("v", "v", &[1, 0], -1.0),
            EdgeSpec::new("v", "v", &[-1, 0], 1.0),
        ];
        let err = CrystalModel::new(2, vec!["v".into()], edges, vec![0.0], false).unwrap_err();
        assert_eq!(err.code(), "BadSign");
    }

    #[test]
    fn free2_floquet_matrix_closed_form() {
        let m = free2();
        let h = AdditiveFunction::zero(&m);
        let l0 = floquet_matrix_real(&m, &h, &[0.0, 0.0]);
        assert!((l0[(0, 0)] - Complex64::new(0.0, 0.0)).norm() < 1e-14);
        let lpi = floquet_matrix_real(&m, &h, &[std::f64::consts::PI, std::f64::consts::PI]);
        assert!((lpi[(0, 0)] - Complex64::new(8.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn stripe2_floquet_matrix_closed_form() {
        let m = stripe2();
        let h = AdditiveFunction::zero(&m);
        let (k1, k2) = (0.7, -1.3);
        let l = floquet_matrix_real(&m, &h, &[k1, k2]);
        let i = Complex64::new(0.0, 1.0);
        let expect00 = Complex64::new(7.0 - 2.0 * k2.cos(), 0.0);
        let expect01 = Complex64::new(-1.0, 0.0) - (-i * k1).exp();
        let expect10 = Complex64::new(-1.0, 0.0) - (i * k1).exp();
        let expect11 = Complex64::new(1.0 - 2.0 * k2.cos(), 0.0);
        assert!((l[(0, 0)] - expect00).norm() < 1e-14);
        assert!((l[(0, 1)] - expect01).norm() < 1e-14);
        assert!((l[(1, 0)] - expect10).norm() < 1e-14);
        assert!((l[(1, 1)] - expect11).norm() < 1e-14);
    }

    #[test]
    fn cover_distance_examples() {
        let m = free2();
        let x = CoverPoint::new(0, &[0, 0]);
        assert_eq!(cover_distance(&m, &x, &x), 0);
        let y = CoverPoint::new(0, &[3, 4]);
        assert_eq!(cover_distance(&m, &y, &x), 7);

        let s = stripe2();
        let a1 = s.cover_point("a", &[1, 0]).unwrap();
        let a0 = s.cover_point("a", &[0, 0]).unwrap();
        assert_eq!(cover_distance(&s, &a1, &a0), 2);
    }

    #[test]
    fn direction_examples() {
        let m = free2();
        let h = AdditiveFunction::zero(&m);
        let x = CoverPoint::new(0, &[3, 4]);
        let y = CoverPoint::new(0, &[0, 0]);
        let s = direction(&h, &x, &y).unwrap();
        assert!((s[0] - 0.6).abs() < 1e-15 && (s[1] - 0.8).abs() < 1e-15);
        assert!(matches!(direction(&h, &y, &y), Err(Error::ZeroDisplacement)));

        let st = stripe2();
        let h = AdditiveFunction::with_offsets(&st, vec![vec![0.25, 0.0], vec![0.0, 0.0]]).unwrap();
        let xa = st.cover_point("a", &[1, 0]).unwrap();
        let yb = st.cover_point("b", &[0, 0]).unwrap();
        let s = direction(&h, &xa, &yb).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1].abs() < 1e-15);
    }

    #[test]
    fn hermiticity_and_periodicity_random_k() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) * 2.0 * std::f64::consts::PI
                - std::f64::consts::PI
        };
        for model in [free2(), stripe2(), interior_edge2(), crossing2()] {
            let h = AdditiveFunction::zero(&model);
            for _ in 0..1000 {
                let k: Vec<f64> = (0..model.deck_rank()).map(|_| uniform()).collect();
                let l = floquet_matrix_real(&model, &h, &k);
                let herm_defect = (&l - l.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(herm_defect < 1e-13, "hermiticity defect {herm_defect}");
            }
            // 2π periodicity of spectra
            for axis in 0..model.deck_rank() {
                let k: Vec<f64> = (0..model.deck_rank()).map(|_| uniform()).collect();
                let mut k2 = k.clone();
                k2[axis] += 2.0 * std::f64::consts::PI;
                let e1 = crate::linalg::hermitian_eigenvalues(&floquet_matrix_real(&model, &h, &k));
                let e2 = crate::linalg::hermitian_eigenvalues(&floquet_matrix_real(&model, &h, &k2));
                for (a, b) in e1.iter().zip(&e2) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn transpose_identity_at_symmetry_points() {
        use std::f64::consts::PI;
        for model in [free2(), stripe2()] {
            let h = AdditiveFunction::zero(&model);
            for k0 in [[0.0, 0.0], [PI, 0.0], [0.0, PI], [PI, PI]] {
                let beta = [0.37, -0.21];
                let plus = floquet_matrix_shifted(&model, &h, &k0, &beta);
                let minus =
                    floquet_matrix_shifted(&model, &h, &k0, &[-beta[0], -beta[1]]);
                let defect =
                    (&minus - plus.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(defect < 1e-13, "transpose identity defect {defect}");
            }
        }
    }

    #[test]
    fn quasi_isometry_free_lattice_exact() {
        // |h(x)-h(y)| <= d_X(x,y) <= sqrt(d)|h(x)-h(y)| on free lattices
        let m = free2();
        let h = AdditiveFunction::zero(&m);
        for (gx, gy) in [([3i64, 4], [0i64, 0]), ([5, -2], [1, 1]), ([-7, 0], [0, 3])] {
            let x = CoverPoint::new(0, &gx);
            let y = CoverPoint::new(0, &gy);
            let dist = cover_distance(&m, &x, &y) as f64;
            let hd = norm2(&h.displacement(&x, &y));
            assert!(hd <= dist + 1e-12);
            assert!(dist <= (2.0f64).sqrt() * hd + 1e-12);
        }
    }

    #[test]
    fn quasi_isometry_constants_reported_for_stripe() {
        let m = stripe2();
        let h = AdditiveFunction::zero(&m);
        let mut ratio_max = 0.0f64;
        let mut ratio_min = f64::INFINITY;
        for g1 in -3i64..=3 {
            for g2 in -3i64..=3 {
                for (va, vb) in [(0usize, 0usize), (0, 1), (1, 1)] {
                    let x = CoverPoint::new(va, &[g1, g2]);
                    let y = CoverPoint::new(vb, &[0, 0]);
                    if x == y {
                        continue;
                    }
                    let dist = cover_distance(&m, &x, &y) as f64;
                    let hd = norm2(&h.displacement(&x, &y));
                    if hd > 0.0 && dist >= 3.0 {
                        ratio_max = ratio_max.max(dist / hd);
                        ratio_min = ratio_min.min(dist / hd);
                    }
                }
            }
        }
        // C^{-1} d <= |h| <= C d with a single C > 1 covering both sides
        let c = ratio_max.max(1.0 / ratio_min) * 1.0001;
        assert!(c > 1.0 && c < 5.0, "quasi-isometry constant C = {c}");
    }
}
