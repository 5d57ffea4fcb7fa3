//! Perron dispersion, generalized principal eigenvalue, and Martin-kernel
//! limits for nonsymmetric operators with strictly negative weights.
//!
//! For such an operator A the matrix A(iβ) (entries weight·e^{−β·(σ+Δc)})
//! is a Z-matrix with irreducible off-diagonal pattern: after the shift
//! S·I − A(iβ) it is nonnegative and irreducible, so its spectral radius is
//! a simple Perron root with strictly positive left/right eigenvectors. The
//! Perron dispersion
//!
//! ```text
//! Λ_A(β) = S − ρ(S·I − A(iβ))
//! ```
//!
//! is real analytic, strictly concave, bounded above, and attains its
//! maximum — the generalized principal eigenvalue Λ_A — at a unique β₀. For
//! λ < Λ_A the level set Γ_λ = {Λ_A(β) = λ} is strictly convex and carries
//! the exponential decay rates of the Green's function of A − λ, exactly as
//! E(β) does in the symmetric theory; u = e^{−β·h}φ_β is the positive
//! multiplicative solution of Au = Λ_A(β)u.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::asymptotics::AsymptoticValue;
use crate::continuation::TrackedPair;
use crate::crystal::{
    build_floquet_matrix, direction, norm2, AdditiveFunction, CoverPoint, CrystalModel,
};
use crate::error::{Error, Result};
use crate::gamma::gamma;
use crate::linalg;
use crate::oracle::{green_quadrature, QuadratureSpec};

/// Perron data of A(iβ): the principal eigenvalue with its positive
/// left/right eigenvectors and the derivatives of Λ_A at β.
#[derive(Debug, Clone)]
pub struct PerronState {
    pub beta: Vec<f64>,
    /// Λ_A(β).
    pub lambda: f64,
    /// Right Perron vector φ_β (strictly positive, unit norm).
    pub right: Vec<f64>,
    /// Left Perron vector φ*_β (strictly positive, unit norm).
    pub left: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

impl PerronState {
    /// Pairing (φ_β, φ*_β) = Σ_v right·left.
    pub fn pairing(&self) -> f64 {
        self.right.iter().zip(&self.left).map(|(a, b)| a * b).sum()
    }
}

fn require_perron(model: &CrystalModel) -> Result<()> {
    if !model.perron_ready() {
        return Err(Error::Reducible);
    }
    Ok(())
}

/// A(iβ) as a real matrix.
fn perron_matrix(model: &CrystalModel, h: &AdditiveFunction, beta: &[f64]) -> DMatrix<f64> {
    let k: Vec<Complex64> = beta.iter().map(|&b| Complex64::new(0.0, b)).collect();
    let complex = build_floquet_matrix(model, h, &k);
    DMatrix::from_fn(complex.nrows(), complex.ncols(), |i, j| complex[(i, j)].re)
}

fn positive_vector(v: &DVector<Complex64>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(v.len());
    for z in v.iter() {
        if z.im.abs() > 1e-10 || z.re <= 0.0 {
            return Err(Error::EigFailure(format!(
                "Perron eigenvector entry {z} is not strictly positive"
            )));
        }
        out.push(z.re);
    }
    Ok(out)
}

/// Perron dispersion Λ_A(β) with eigenvectors and derivatives.
///
/// The Perron root comes from a dense eigensolve of the shifted nonnegative
/// matrix (selecting the max-modulus eigenvalue and validating positive
/// eigenvectors); gradients are two-sided Hellmann–Feynman, the Hessian is
/// the exact second-order formula.
pub fn perron_dispersion(
    model: &CrystalModel,
    h: &AdditiveFunction,
    beta: &[f64],
) -> Result<PerronState> {
    require_perron(model)?;
    let n = model.vertex_count();
    let a_mat = perron_matrix(model, h, beta);

    let shift = model.potential().iter().fold(f64::NEG_INFINITY, |acc, &p| acc.max(p))
        + model.edges().iter().map(|e| e.weight.norm()).sum::<f64>()
            * (1.0 + beta.iter().fold(0.0f64, |acc, &b| acc.max(b.abs()))).exp()
        + 1.0;
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let base = if i == j { shift } else { 0.0 };
        base - a_mat[(i, j)]
    });
    // dense eigensolve; the Perron root is the max-modulus eigenvalue
    let eigs = linalg::real_matrix_eigenvalues(&shifted);
    let rho = eigs.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let lambda = shift - rho;

    let ac = DMatrix::from_fn(n, n, |i, j| Complex64::new(a_mat[(i, j)], 0.0));
    let seed = DVector::from_element(n, Complex64::new(1.0, 0.0));
    let right_pair = linalg::inverse_iteration(&ac, Complex64::new(lambda, 0.0), &seed, 80)
        .ok_or_else(|| Error::EigFailure("Perron right eigenvector".into()))?;
    let left_pair =
        linalg::inverse_iteration(&ac.transpose(), Complex64::new(lambda, 0.0), &seed, 80)
            .ok_or_else(|| Error::EigFailure("Perron left eigenvector".into()))?;
    let right = positive_vector(&right_pair.vector)?;
    let left = positive_vector(&left_pair.vector)?;

    // Λ is an analytic simple eigenvalue branch of L(iβ): reuse the
    // continuation derivatives with k0 = 0
    let pair = TrackedPair {
        energy: Complex64::new(lambda, 0.0),
        phi_plus: right_pair.vector.clone(),
        phi_minus: left_pair.vector.clone(),
    };
    let zeros = vec![0.0; model.deck_rank()];
    let grad = crate::continuation::gradient_for_branch(model, h, &zeros, beta, &pair)?;
    let hess = crate::continuation::hessian_for_branch(model, h, &zeros, beta, &pair)?;

    Ok(PerronState { beta: beta.to_vec(), lambda, right, left, grad, hess })
}

/// Maximize Λ_A by Newton on the gradient from β = 0; the maximizer β₀ is
/// unique by strict concavity. Returns (β₀, Λ_A).
pub fn find_beta0(model: &CrystalModel, h: &AdditiveFunction) -> Result<(Vec<f64>, f64)> {
    require_perron(model)?;
    let d = model.deck_rank();
    let mut beta = vec![0.0; d];
    let mut state = perron_dispersion(model, h, &beta)?;
    for _ in 0..100 {
        let gnorm = norm2(&state.grad);
        if gnorm < 1e-12 {
            return Ok((beta, state.lambda));
        }
        let g = DVector::from_vec(state.grad.clone());
        let step = state
            .hess
            .clone()
            .lu()
            .solve(&g)
            .ok_or(Error::NoConvergence { grad_norm: gnorm })?;
        let mut eta = 1.0;
        let mut advanced = false;
        while eta > 1e-8 {
            let trial: Vec<f64> =
                beta.iter().zip(step.iter()).map(|(b, s)| b - eta * s).collect();
            if let Ok(ts) = perron_dispersion(model, h, &trial) {
                if norm2(&ts.grad) < gnorm {
                    beta = trial;
                    state = ts;
                    advanced = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !advanced {
            return Err(Error::NoConvergence { grad_norm: gnorm });
        }
    }
    let gnorm = norm2(&state.grad);
    if gnorm < 1e-12 {
        Ok((beta, state.lambda))
    } else {
        Err(Error::NoConvergence { grad_norm: gnorm })
    }
}

/// The Γ_λ point with outward conormal s: Λ_A(β_s) = λ, ∇Λ_A(β_s) ∝ −s.
/// Degenerates to β₀ at λ = Λ_A.
pub fn solve_gamma_level(
    model: &CrystalModel,
    h: &AdditiveFunction,
    lambda: f64,
    s: &[f64],
) -> Result<PerronState> {
    require_perron(model)?;
    let d = model.deck_rank();
    let snorm = norm2(s);
    let s: Vec<f64> = s.iter().map(|t| t / snorm).collect();
    let (beta0, lambda_max) = find_beta0(model, h)?;
    let depth = lambda_max - lambda;
    if depth < -1e-12 {
        return Err(Error::OutOfRegion(format!(
            "lambda = {lambda} exceeds the generalized principal eigenvalue {lambda_max}"
        )));
    }
    if depth.abs() < 1e-13 {
        return perron_dispersion(model, h, &beta0);
    }

    let state0 = perron_dispersion(model, h, &beta0)?;
    let h_eff = -state0.hess.clone();
    let hinv_s = h_eff
        .clone()
        .lu()
        .solve(&DVector::from_vec(s.clone()))
        .ok_or_else(|| Error::OutOfRegion("Hessian at beta0 is singular".into()))?;
    let sths: f64 = s.iter().zip(hinv_s.iter()).map(|(a, b)| a * b).sum();
    let scale = (2.0 * depth / sths).sqrt();
    let mut beta: Vec<f64> =
        beta0.iter().zip(hinv_s.iter()).map(|(b0, hs)| b0 + scale * hs).collect();

    let basis = linalg::tangent_basis(&s);
    let residual = |st: &PerronState| -> DVector<f64> {
        let mut r = DVector::zeros(d);
        r[0] = st.lambda - lambda;
        for (row, b) in basis.iter().enumerate() {
            r[row + 1] = b.iter().zip(&st.grad).map(|(a, g)| a * g).sum();
        }
        r
    };

    let mut state = perron_dispersion(model, h, &beta)?;
    let mut r = residual(&state);
    for _ in 0..100 {
        if r.norm() < 1e-13 {
            break;
        }
        let mut jac = DMatrix::zeros(d, d);
        for col in 0..d {
            jac[(0, col)] = state.grad[col];
            for (row, b) in basis.iter().enumerate() {
                let mut acc = 0.0;
                for i in 0..d {
                    acc += b[i] * state.hess[(i, col)];
                }
                jac[(row + 1, col)] = acc;
            }
        }
        let step =
            jac.lu().solve(&r).ok_or(Error::NoDescent { residual: r.norm() })?;
        let mut eta = 1.0;
        let mut advanced = false;
        while eta > 1e-8 {
            let trial: Vec<f64> =
                beta.iter().zip(step.iter()).map(|(b, st)| b - eta * st).collect();
            match perron_dispersion(model, h, &trial) {
                Ok(ts) => {
                    let tr = residual(&ts);
                    if tr.norm() < r.norm() {
                        beta = trial;
                        state = ts;
                        r = tr;
                        advanced = true;
                        break;
                    }
                    eta *= 0.5;
                }
                Err(_) => eta *= 0.5,
            }
        }
        if !advanced {
            return Err(Error::NoDescent { residual: r.norm() });
        }
    }
    if r.norm() >= 1e-11 {
        return Err(Error::NoDescent { residual: r.norm() });
    }
    let gnorm = norm2(&state.grad);
    let mut mismatch = 0.0;
    for (g, si) in state.grad.iter().zip(&s) {
        mismatch += (g / gnorm + si).powi(2);
    }
    if mismatch.sqrt() > 1e-9 {
        return Err(Error::OutOfRegion("converged to the wrong sheet of Gamma_lambda".into()));
    }
    Ok(state)
}

/// Leading-order Green's function asymptotics for the nonsymmetric operator:
/// case λ < Λ_A (d ≥ 2) uses β_s on Γ_λ, case λ = Λ_A (d ≥ 3) uses β₀ with
/// H = −Hess Λ_A(β₀).
pub fn eval_nonsymmetric_asymptotics(
    model: &CrystalModel,
    h: &AdditiveFunction,
    lambda: f64,
    x: &CoverPoint,
    y: &CoverPoint,
) -> Result<AsymptoticValue> {
    require_perron(model)?;
    let d = model.deck_rank();
    let (beta0, lambda_max) = find_beta0(model, h)?;
    let at_top = (lambda - lambda_max).abs() < 1e-12;
    if lambda > lambda_max + 1e-12 {
        return Err(Error::OutOfRegion(format!(
            "lambda = {lambda} exceeds the generalized principal eigenvalue {lambda_max}"
        )));
    }
    let a = h.displacement(x, y);
    let dist = norm2(&a);
    if dist < 1e-14 {
        return Err(Error::ZeroDisplacement);
    }
    let s = direction(h, x, y)?;

    if at_top {
        if d < 3 {
            return Err(Error::DimensionTooLow {
                d,
                context: "minimal Green's function asymptotics at Λ_A need d ≥ 3".into(),
            });
        }
        let state = perron_dispersion(model, h, &beta0)?;
        let h_eff = -state.hess.clone();
        let eig = h_eff.clone().symmetric_eigen();
        let mut det_h = 1.0;
        let mut hinvhalf_a = vec![0.0; d];
        for j in 0..d {
            let lam_j = eig.eigenvalues[j];
            det_h *= lam_j;
            let qa: f64 = (0..d).map(|i| eig.eigenvectors[(i, j)] * a[i]).sum();
            for i in 0..d {
                hinvhalf_a[i] += qa / lam_j.sqrt() * eig.eigenvectors[(i, j)];
            }
        }
        let df = d as f64;
        let abeta: f64 = a.iter().zip(&beta0).map(|(ai, bi)| ai * bi).sum();
        let decay = (-abeta).exp();
        let prefactor = gamma((df - 2.0) / 2.0)
            / (2.0 * std::f64::consts::PI.powf(df / 2.0)
                * det_h.sqrt()
                * norm2(&hinvhalf_a).powf(df - 2.0));
        let ratio = state.right[x.vertex] * state.left[y.vertex] / state.pairing();
        let value = Complex64::new(decay * prefactor * ratio, 0.0);
        return Ok(AsymptoticValue {
            value,
            phase: Complex64::new(1.0, 0.0),
            decay,
            prefactor,
            eigenfunction_ratio: Complex64::new(ratio, 0.0),
            dist,
            s,
        });
    }

    if d < 2 {
        return Err(Error::DimensionTooLow {
            d,
            context: "gap asymptotics need d ≥ 2".into(),
        });
    }
    let state = solve_gamma_level(model, h, lambda, &s)?;
    let abeta: f64 = a.iter().zip(&state.beta).map(|(ai, bi)| ai * bi).sum();
    let decay = (-abeta).exp();
    let grad_norm = norm2(&state.grad);
    let proj_det = linalg::projected_det(&(-state.hess.clone()), &s);
    if proj_det <= 0.0 {
        return Err(Error::OutOfRegion(format!(
            "projected Hessian determinant {proj_det:.3e} not positive"
        )));
    }
    let df = d as f64;
    let prefactor = grad_norm.powf((df - 3.0) / 2.0)
        / ((2.0 * std::f64::consts::PI * dist).powf((df - 1.0) / 2.0) * proj_det.sqrt());
    let ratio = state.right[x.vertex] * state.left[y.vertex] / state.pairing();
    let value = Complex64::new(decay * prefactor * ratio, 0.0);
    Ok(AsymptoticValue {
        value,
        phase: Complex64::new(1.0, 0.0),
        decay,
        prefactor,
        eigenfunction_ratio: Complex64::new(ratio, 0.0),
        dist,
        s,
    })
}

/// Martin-kernel samples along a deck ray against the predicted boundary
/// value.
#[derive(Debug, Clone)]
pub struct MartinCheck {
    pub x: CoverPoint,
    pub x0: CoverPoint,
    /// Deck step of the escape ray y_m = (v(x0), m·g_step).
    pub g_step: Vec<i64>,
    /// (m, K_λ(x, y_m), |K − predicted|) for each sampled m.
    pub samples: Vec<(usize, f64, f64)>,
    /// e^{−(h(x)−h(x0))·β}·φ_β(x)/φ_β(x0) for the Γ_λ point whose outward
    /// conormal is the *pair* direction −g_step/|g_step|: the minimal
    /// positive solution that grows along the escape ray.
    pub predicted: f64,
}

/// Sample K_λ(x, y_m) = G_λ(x,y_m)/G_λ(x0,y_m) along y_m = m·g_step and
/// compare with the predicted Martin-boundary value.
pub fn martin_kernel_check(
    model: &CrystalModel,
    h: &AdditiveFunction,
    lambda: f64,
    x: &CoverPoint,
    x0: &CoverPoint,
    g_step: &[i64],
    m_values: &[usize],
) -> Result<MartinCheck> {
    require_perron(model)?;
    if g_step.iter().all(|&t| t == 0) {
        return Err(Error::ZeroDisplacement);
    }
    // Γ_λ point for the pair direction (h(x) − h(y_m))/|…| → −ĝ
    let pair_dir: Vec<f64> = {
        let n = norm2(&g_step.iter().map(|&t| t as f64).collect::<Vec<f64>>());
        g_step.iter().map(|&t| -(t as f64) / n).collect()
    };
    let state = solve_gamma_level(model, h, lambda, &pair_dir)?;
    let delta = h.displacement(x, x0);
    let exponent: f64 = delta.iter().zip(&state.beta).map(|(a, b)| a * b).sum();
    let predicted = (-exponent).exp() * state.right[x.vertex] / state.right[x0.vertex];

    let spec = QuadratureSpec::default();
    let mut samples = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let deck: Vec<i64> = g_step.iter().map(|&t| t * m as i64).collect();
        let y_m = CoverPoint::new(x0.vertex, &deck);
        let gx = green_quadrature(model, h, lambda, x, &y_m, &spec)?;
        let gx0 = green_quadrature(model, h, lambda, x0, &y_m, &spec)?;
        if gx.im.abs() > 1e-10 * gx.norm() || gx0.im.abs() > 1e-10 * gx0.norm() {
            return Err(Error::SolverFailure("Martin kernel values are not real".into()));
        }
        let kernel = gx.re / gx0.re;
        samples.push((m, kernel, (kernel - predicted).abs()));
    }
    Ok(MartinCheck {
        x: x.clone(),
        x0: x0.clone(),
        g_step: g_step.to_vec(),
        samples,
        predicted,
    })
}
