//! Symmetric quadrature rules on the reference triangle.

use crate::error::{Error, Result};

/// Points in barycentric coordinates; weights sum to 1/2, the area of the
/// reference triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn orbit3(a: f64) -> Vec<[f64; 3]> {
    let b = 1.0 - 2.0 * a;
    vec![[b, a, a], [a, b, a], [a, a, b]]
}

fn orbit6(a: f64, b: f64) -> Vec<[f64; 3]> {
    let c = 1.0 - a - b;
    vec![
        [a, b, c],
        [b, a, c],
        [a, c, b],
        [c, a, b],
        [b, c, a],
        [c, b, a],
    ]
}

/// Rule exact for polynomials up to `degree` (1..=6).
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    // (orbit points, weight per point) with weights relative to a unit total
    let groups: Vec<(Vec<[f64; 3]>, f64)> = match degree {
        1 => vec![(vec![[1.0 / 3.0; 3]], 1.0)],
        2 => vec![(orbit3(1.0 / 6.0), 1.0 / 3.0)],
        3 | 4 => vec![
            (orbit3(0.445948490915965), 0.223381589678011),
            (orbit3(0.091576213509771), 0.109951743655322),
        ],
        5 => vec![
            (vec![[1.0 / 3.0; 3]], 0.225),
            (orbit3(0.470142064105115), 0.132394152788506),
            (orbit3(0.101286507323456), 0.125939180544827),
        ],
        6 => vec![
            (orbit3(0.249286745170910), 0.116786275726379),
            (orbit3(0.063089014491502), 0.050844906370207),
            (orbit6(0.310352451033785, 0.053145049844816), 0.082851075618374),
        ],
        _ => {
            return Err(Error::InvalidArgument(format!(
                "quadrature degree {degree} not in 1..=6"
            )))
        }
    };
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (pts, w) in groups {
        for p in pts {
            points.push(p);
            weights.push(w);
        }
    }
    // The tabulated weights carry ~15 digits; renormalize so that constants
    // integrate to round-off.
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= 0.5 / total;
    }
    Ok(QuadratureRule {
        degree,
        points,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn constants_and_linears() {
        for d in 1..=6 {
            let q = quadrature(d).unwrap();
            let one: f64 = q.weights.iter().sum();
            assert!((one - 0.5).abs() < 1e-15);
            let x: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| p[1] * w).sum();
            assert!((x - 1.0 / 6.0).abs() < 1e-15);
            assert!(q.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn monomials_exact() {
        for d in 1..=6 {
            let q = quadrature(d).unwrap();
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let num: f64 = q
                        .points
                        .iter()
                        .zip(&q.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!(
                        (num - exact).abs() < 1e-14,
                        "degree {d}, x^{a} y^{b}: {num} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn unsupported_degree() {
        assert!(quadrature(0).is_err());
        assert!(quadrature(7).is_err());
    }
}
