use blochgreen::crystal::fixtures::stripe2;
use blochgreen::crystal::AdditiveFunction;
use blochgreen::floquet::{locate_edge, BrillouinGrid, EdgeSide};
use blochgreen::oracle::{green_quadrature, reduced_green_quadrature, QuadratureSpec};

#[test]
#[ignore]
fn probe_decomposition() {
    let m = stripe2();
    let h = AdditiveFunction::zero(&m);
    let edge = locate_edge(&m, &h, 2, EdgeSide::Lower, &BrillouinGrid::new(2, 32)).unwrap();
    let solve = blochgreen::continuation::solve_beta_s(&m, &h, &edge, 4.5, &[0.0, 1.0]).unwrap();
    let y = m.cover_point("a", &[0, 0]).unwrap();
    for cut in [3.15f64] {
        for n in [20i64] {
            let x = m.cover_point("a", &[0, n]).unwrap();
            let tau: Vec<f64> = solve.beta.iter().map(|b| 0.95 * b).collect();
            let g = blochgreen::oracle::green_quadrature_deflated(
                &m, &h, 4.5, &x, &y, &tau, &QuadratureSpec::default()).unwrap();
            let spec = QuadratureSpec { m_start: 128, rel_tol: 1e-7, max_m: 8192 };
            match reduced_green_quadrature(&m, &h, &edge, 4.5, &[0.0, 1.0], &x, &y, cut, &spec) {
                Ok(g0) => {
                    let abeta: f64 = h
                        .displacement(&x, &y)
                        .iter()
                        .zip(&solve.beta)
                        .map(|(ai, bi)| ai * bi)
                        .sum();
                    let weighted = g0 * (-abeta).exp();
                    let rel = (g - weighted).norm() / g.norm();
                    println!("cut={cut} n={n}: G={:+.6e} ratio={rel:.3e}", g.re);
                }
                Err(e) => println!("cut={cut} n={n}: error {e}"),
            }
        }
    }
}
