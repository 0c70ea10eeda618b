//! Legendre-Gauss-Lobatto reference element.

/// Nodal basis on the LGL points of `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceElement {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Differentiation matrix, row-major `(p+1) × (p+1)`.
    pub derivative: Vec<f64>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1, "LGL basis needs degree >= 1");
        let (nodes, weights) = lgl_nodes_and_weights(degree);
        let derivative = differentiation_matrix(&nodes);
        Self {
            degree,
            nodes,
            weights,
            derivative,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.degree + 1
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.derivative[i * (self.degree + 1) + j]
    }
}

/// Legendre polynomial `P_n(x)` and its predecessor `P_{n-1}(x)`.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

fn lgl_nodes_and_weights(p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = p as f64;
    // Newton iteration started from the Chebyshev-Gauss-Lobatto points.
    let mut x: Vec<f64> = (0..=p)
        .map(|k| -(std::f64::consts::PI * k as f64 / n).cos())
        .collect();
    for xk in x.iter_mut() {
        for _ in 0..100 {
            let (pn, pnm1) = legendre(p, *xk);
            let step = (*xk * pn - pnm1) / ((n + 1.0) * pn);
            *xk -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
    }
    x[0] = -1.0;
    x[p] = 1.0;
    // enforce exact symmetry
    for k in 0..=p / 2 {
        let m = 0.5 * (x[p - k] - x[k]);
        x[k] = -m;
        x[p - k] = m;
    }
    if p % 2 == 0 {
        x[p / 2] = 0.0;
    }
    let w = x
        .iter()
        .map(|&xk| {
            let (pn, _) = legendre(p, xk);
            2.0 / (n * (n + 1.0) * pn * pn)
        })
        .collect();
    (x, w)
}

fn differentiation_matrix(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            1.0 / (0..n)
                .filter(|&k| k != j)
                .map(|k| x[j] - x[k])
                .product::<f64>()
        })
        .collect();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = bary[j] / bary[i] / (x[i] - x[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degree_three_nodes() {
        let e = ReferenceElement::new(3);
        let inner = (1.0f64 / 5.0).sqrt();
        let expected = [-1.0, -inner, inner, 1.0];
        for (x, y) in e.nodes.iter().zip(expected) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
        let wexp = [1.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0];
        for (w, y) in e.weights.iter().zip(wexp) {
            assert_abs_diff_eq!(*w, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn weights_and_symmetry() {
        for p in 1..=8 {
            let e = ReferenceElement::new(p);
            assert_abs_diff_eq!(e.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            for k in 0..=p {
                assert_abs_diff_eq!(e.nodes[k], -e.nodes[p - k], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn derivative_is_exact_for_polynomials() {
        for p in 1..=7 {
            let e = ReferenceElement::new(p);
            let n = e.n_nodes();
            for deg in 0..=p {
                for i in 0..n {
                    let du: f64 = (0..n).map(|j| e.d(i, j) * e.nodes[j].powi(deg as i32)).sum();
                    let exact = if deg == 0 {
                        0.0
                    } else {
                        deg as f64 * e.nodes[i].powi(deg as i32 - 1)
                    };
                    assert_abs_diff_eq!(du, exact, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn summation_by_parts() {
        // M D + (M D)^T = diag(-1, 0, ..., 0, 1)
        let e = ReferenceElement::new(4);
        let n = e.n_nodes();
        for i in 0..n {
            for j in 0..n {
                let q = e.weights[i] * e.d(i, j) + e.weights[j] * e.d(j, i);
                let b = if i == j && i == 0 {
                    -1.0
                } else if i == j && i == n - 1 {
                    1.0
                } else {
                    0.0
                };
                assert_abs_diff_eq!(q, b, epsilon = 1e-13);
            }
        }
    }
}
