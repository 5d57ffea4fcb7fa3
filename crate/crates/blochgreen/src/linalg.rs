//! Small dense linear algebra helpers over `Complex64`.
//!
//! nalgebra provides LU and real symmetric eigendecompositions; complex
//! Hermitian and general complex spectra are obtained through the standard
//! real 2N×2N embedding
//!
//! ```text
//! M = A + iB   ↦   [[A, -B], [B, A]]
//! ```
//!
//! whose spectrum is the multiset union of σ(M) and σ(conj(M)), with
//! eigenvector (u; v) of the embedding mapping to the complex eigenvector
//! u + iv. For Hermitian M the embedding is real symmetric and every
//! eigenvalue of M appears exactly twice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Real 2N×2N embedding [[Re, -Im], [Im, Re]] of a complex N×N matrix.
fn embed(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
            out[(i + n, j + n)] = z.re;
        }
    }
    out
}

/// Ascending eigenvalues of a Hermitian matrix.
///
/// The input is symmetrized as (M + Mᴴ)/2 before embedding, so tiny
/// Hermiticity violations from rounding are averaged out rather than
/// producing complex spurious parts.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Full eigendecomposition of a Hermitian matrix: ascending eigenvalues and
/// the matching eigenvectors (columns).
///
/// Eigenvectors at a degenerate eigenvalue span the right eigenspace but are
/// not guaranteed mutually orthogonal after de-embedding; callers that need
/// eigenvectors (edge data, Hellmann–Feynman gradients) operate at certified
/// simple eigenvalues.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, Vec<DVector<Complex64>>) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], vec![DVector::from_element(1, Complex64::new(1.0, 0.0))]);
    }
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let emb = embed(&herm);
    let sym = (&emb + emb.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for j in 0..n {
        // each eigenvalue of M appears twice in the embedding
        let idx = order[2 * j];
        let idx2 = order[2 * j + 1];
        values.push(0.5 * (eig.eigenvalues[idx] + eig.eigenvalues[idx2]));
        let col = eig.eigenvectors.column(idx);
        let mut v = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            v[i] = Complex64::new(col[i], col[i + n]);
        }
        vectors.push(gauge_normalize(&v));
    }
    (values, vectors)
}

/// All eigenvalues of a general complex matrix, together with their complex
/// conjugates: the returned multiset is σ(M) ∪ σ(conj(M)), unsorted.
///
/// Distances from a *real* reference value to this multiset equal distances
/// to σ(M) itself, which is all the branch-tracking simplicity checks need.
pub fn complex_eigenvalues_conj_closed(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 1 {
        let z = m[(0, 0)];
        return vec![z, z.conj()];
    }
    let emb = embed(m);
    emb.complex_eigenvalues().iter().copied().collect()
}

/// Eigenvalues of a real matrix (possibly complex), via real Schur form.
pub fn real_matrix_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    m.complex_eigenvalues().iter().copied().collect()
}

/// Solve M z = b by LU with partial pivoting. `None` if M is singular to
/// working precision.
pub fn lu_solve(m: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    m.clone().lu().solve(b)
}

/// Smallest singular value, σ_min(M) = sqrt(λ_min(MᴴM)).
pub fn smallest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    if n == 1 {
        return m[(0, 0)].norm();
    }
    let mtm = m.adjoint() * m;
    if n == 2 {
        // closed-form eigenvalues of the 2x2 Hermitian MᴴM
        let a = mtm[(0, 0)].re;
        let d = mtm[(1, 1)].re;
        let b2 = mtm[(0, 1)].norm_sqr();
        let half_tr = 0.5 * (a + d);
        let disc = (0.5 * (a - d)).powi(2) + b2;
        let min_eig = half_tr - disc.sqrt();
        return min_eig.max(0.0).sqrt();
    }
    let eigs = hermitian_eigenvalues(&mtm);
    eigs[0].max(0.0).sqrt()
}

/// Result of an inverse-iteration eigenpair refinement.
pub struct EigenPair {
    pub value: Complex64,
    pub vector: DVector<Complex64>,
    pub residual: f64,
}

/// Refine an approximate eigenpair of a general complex matrix by shifted
/// inverse iteration with Rayleigh-quotient updates.
///
/// Converges to the eigenpair nearest the seed when the seed vector has a
/// nonzero component along it, which branch tracking guarantees by stepping
/// in small increments. Returns `None` on stagnation.
pub fn inverse_iteration(
    m: &DMatrix<Complex64>,
    shift: Complex64,
    seed: &DVector<Complex64>,
    max_iter: usize,
) -> Option<EigenPair> {
    let n = m.nrows();
    let scale = matrix_scale(m).max(1.0);
    let mut phi = seed.clone();
    let norm = phi.norm();
    if norm == 0.0 {
        return None;
    }
    phi /= Complex64::new(norm, 0.0);
    let mut mu = shift;

    for iter in 0..max_iter {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] -= mu;
        }
        let z = match shifted.lu().solve(&phi) {
            Some(z) => z,
            None => {
                // exactly singular shift: nudge off the eigenvalue
                mu += Complex64::new(scale * 1e-14, 0.0);
                continue;
            }
        };
        let zn = z.norm();
        if !zn.is_finite() || zn == 0.0 {
            mu += Complex64::new(scale * 1e-13, 0.0);
            continue;
        }
        phi = z / Complex64::new(zn, 0.0);
        // Rayleigh quotient update
        let m_phi = m * &phi;
        mu = phi.dotc(&m_phi);
        let residual = (&m_phi - &phi * mu).norm();
        if residual <= 4e-15 * scale && iter >= 1 {
            return Some(EigenPair { value: mu, vector: gauge_normalize(&phi), residual });
        }
    }
    // accept a slightly looser tolerance before giving up
    let m_phi = m * &phi;
    let mu = phi.dotc(&m_phi);
    let residual = (&m_phi - &phi * mu).norm();
    if residual <= 1e-12 * scale {
        return Some(EigenPair { value: mu, vector: gauge_normalize(&phi), residual });
    }
    None
}

/// Reduced-resolvent solve at a simple eigenpair: the unique z with
/// (λI − M)z = (I − P)w and ψᴴz = 0, where P = φψᴴ/(ψᴴφ) is the spectral
/// projector. Computed through the bordered system
/// [[λI − M, φ], [ψᴴ, 0]]·[z; c] = [w; 0], which is nonsingular exactly when
/// λ is simple.
pub fn reduced_resolvent_solve(
    m: &DMatrix<Complex64>,
    lambda: Complex64,
    phi: &DVector<Complex64>,
    psi: &DVector<Complex64>,
    w: &DVector<Complex64>,
) -> Option<DVector<Complex64>> {
    let n = m.nrows();
    let mut bordered = DMatrix::from_element(n + 1, n + 1, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            bordered[(i, j)] = -m[(i, j)];
        }
        bordered[(i, i)] += lambda;
        bordered[(i, n)] = phi[i];
        bordered[(n, i)] = psi[i].conj();
    }
    let mut rhs = DVector::from_element(n + 1, Complex64::new(0.0, 0.0));
    for i in 0..n {
        rhs[i] = w[i];
    }
    let sol = bordered.lu().solve(&rhs)?;
    Some(DVector::from_fn(n, |i, _| sol[i]))
}

/// Max-magnitude entry, used as the scale reference for residual tolerances.
pub fn matrix_scale(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Fix the scalar gauge of an eigenvector: unit 2-norm with the
/// largest-magnitude component rotated to the positive real axis.
pub fn gauge_normalize(v: &DVector<Complex64>) -> DVector<Complex64> {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    let mut best = 0usize;
    let mut best_mag = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    let pivot = v[best];
    let phase = pivot / Complex64::new(pivot.norm(), 0.0);
    v * (phase.conj() / Complex64::new(norm, 0.0))
}

/// Deterministic orthonormal basis of the hyperplane s⊥: Gram–Schmidt on the
/// standard basis with the axis most aligned with s removed.
pub fn tangent_basis(s: &[f64]) -> Vec<Vec<f64>> {
    let d = s.len();
    let drop_axis = (0..d)
        .max_by(|&a, &b| s[a].abs().total_cmp(&s[b].abs()))
        .expect("empty direction");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for axis in 0..d {
        if axis == drop_axis {
            continue;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        let vs: f64 = v.iter().zip(s).map(|(a, b)| a * b).sum();
        for i in 0..d {
            v[i] -= vs * s[i];
        }
        for prev in &basis {
            let vp: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for i in 0..d {
                v[i] -= vp * prev[i];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "tangent basis degenerated");
        for x in &mut v {
            *x /= norm;
        }
        basis.push(v);
    }
    basis
}

/// det(Bᵀ M B) for the tangent basis B of s⊥ — the projected determinant
/// entering the asymptotic prefactors.
pub fn projected_det(m: &DMatrix<f64>, s: &[f64]) -> f64 {
    let d = s.len();
    if d == 1 {
        return 1.0;
    }
    let basis = tangent_basis(s);
    let mut proj = DMatrix::zeros(d - 1, d - 1);
    for (a, va) in basis.iter().enumerate() {
        for (b, vb) in basis.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    acc += va[i] * m[(i, j)] * vb[j];
                }
            }
            proj[(a, b)] = acc;
        }
    }
    proj.determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermitian_eigen_2x2_closed_form() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        for (j, v) in vecs.iter().enumerate() {
            let r = &m * v - v * c(vals[j], 0.0);
            assert!(r.norm() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_eigen_matches_random_trace_and_residual() {
        // pseudo-random Hermitian 5x5 built from a fixed integer pattern
        let n = 5;
        let mut a = DMatrix::from_element(n, n, c(0.0, 0.0));
        let mut state = 1u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = c(next(), next());
            }
        }
        let m = (&a + a.adjoint()) * c(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen(&m);
        let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum();
        let sum: f64 = vals.iter().sum();
        assert!((trace - sum).abs() < 1e-10);
        for (j, v) in vecs.iter().enumerate() {
            let r = &m * v - v * c(vals[j], 0.0);
            assert!(r.norm() < 1e-10, "residual {} at eigenvalue {}", r.norm(), j);
        }
        for w in vals.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn general_eigenvalues_conj_closed() {
        // [[0, -1], [1, 0]] has eigenvalues ±i; conj-closure is the same set twice
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let mut eigs = complex_eigenvalues_conj_closed(&m);
        eigs.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_eq!(eigs.len(), 4);
        assert!((eigs[0] - c(0.0, -1.0)).norm() < 1e-12);
        assert!((eigs[3] - c(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn inverse_iteration_finds_nearest_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let seed = DVector::from_vec(vec![c(1.0, 0.0), c(0.1, 0.0)]);
        let pair = inverse_iteration(&m, c(2.9, 0.0), &seed, 50).expect("converged");
        assert!((pair.value - c(3.0, 0.0)).norm() < 1e-10);
        let r = &m * &pair.vector - &pair.vector * pair.value;
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn smallest_singular_value_agrees_with_definition() {
        let m = DMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        assert!((smallest_singular_value(&m) - 0.5).abs() < 1e-12);
        let singular = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(smallest_singular_value(&singular) < 1e-14);
    }

    #[test]
    fn tangent_basis_is_orthonormal_complement() {
        let s = [0.6, 0.8, 0.0];
        let basis = tangent_basis(&s);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            let vs: f64 = v.iter().zip(&s).map(|(a, b)| a * b).sum();
            assert!(vs.abs() < 1e-12);
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let cross: f64 = basis[0].iter().zip(&basis[1]).map(|(a, b)| a * b).sum();
        assert!(cross.abs() < 1e-12);
    }

    #[test]
    fn projected_det_extracts_tangent_block() {
        // diagonal matrix, s along axis 0: projected det = product of the rest
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 5.0]);
        let s = [1.0, 0.0, 0.0];
        assert!((projected_det(&m, &s) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn gauge_pivot_is_real_positive() {
        let v = DVector::from_vec(vec![c(0.1, 0.2), c(-3.0, 4.0)]);
        let g = gauge_normalize(&v);
        assert!((g.norm() - 1.0).abs() < 1e-14);
        assert!(g[1].im.abs() < 1e-14);
        assert!(g[1].re > 0.0);
    }
}
