//! Gamma function by the Lanczos approximation (g = 7, 9 coefficients),
//! accurate to better than 1e-13 relative over the arguments used here
//! (positive half-integers (d-2)/2 from the edge asymptotics).

const G: f64 = 7.0;
const COEFFS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection formula
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

#[cfg(test)]
mod tests {
    use super::gamma;
    use std::f64::consts::PI;

    #[test]
    fn half_integer_and_integer_values() {
        let cases = [
            (0.5, PI.sqrt()),
            (1.0, 1.0),
            (1.5, 0.5 * PI.sqrt()),
            (2.0, 1.0),
            (2.5, 0.75 * PI.sqrt()),
            (5.0, 24.0),
            (7.5, 1871.254305797788), // 10395/128 * sqrt(pi)
        ];
        for (x, expected) in cases {
            let rel = (gamma(x) - expected).abs() / expected.abs();
            assert!(rel < 1e-13, "gamma({x}) rel err {rel:.3e}");
        }
    }
}
