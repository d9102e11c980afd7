//! Closed-form model metrics.
//!
//! All three models are diagonal, `g = Σ_i A_i(x)·dx^i⊗dx^i`, so the
//! orthonormal coframe is `α^i = √A_i·dx^i` and every geometric table
//! (Christoffel symbols, their derivatives, frame connection coefficients,
//! Riemann and Ricci in the frame) follows from closed-form `A_i`, `∂A_i`,
//! `∂∂A_i`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point {0:?} outside the metric's domain")]
    OutsideDomain(Vec<f64>),
    #[error("identity requires an Einstein metric; {0} is not Einstein")]
    NotEinstein(String),
    #[error("unsupported stencil order {0}; use 2 or 4")]
    BadStencil(usize),
    #[error("chart/field shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    /// Flat torus `[0,2π)^dim`, `g = δ`.
    FlatTorus,
    /// Poincaré ball `g = 4δ/(1−|x|²)²`, constant curvature −1.
    HyperbolicBall,
    /// Even product collar `g = dμ²/(4μ²) + (1+cμ)/μ·δ_Y` on `μ×Y` with
    /// `Y` a flat torus; `c = 0` is a constant-curvature cusp, `c ≠ 0` is a
    /// generic non-Einstein even metric.
    ProductCollar { c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetric {
    pub kind: MetricKind,
    /// Dimension of `X` (for the ball this is `n+1`).
    pub dim: usize,
}

impl ModelMetric {
    pub fn flat_torus(dim: usize) -> Self {
        ModelMetric { kind: MetricKind::FlatTorus, dim }
    }

    pub fn hyperbolic_ball(dim: usize) -> Self {
        ModelMetric { kind: MetricKind::HyperbolicBall, dim }
    }

    pub fn product_collar(dim: usize, c: f64) -> Self {
        ModelMetric { kind: MetricKind::ProductCollar { c }, dim }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self.kind {
            MetricKind::FlatTorus => true,
            MetricKind::HyperbolicBall => x.iter().map(|v| v * v).sum::<f64>() < 1.0,
            MetricKind::ProductCollar { .. } => x[0] > 0.0,
        }
    }

    pub fn is_einstein(&self) -> bool {
        match self.kind {
            MetricKind::FlatTorus | MetricKind::HyperbolicBall => true,
            MetricKind::ProductCollar { c } => c == 0.0,
        }
    }

    /// `A_i(x) = g_{ii}(x)`.
    pub fn a2(&self, i: usize, x: &[f64]) -> f64 {
        match self.kind {
            MetricKind::FlatTorus => 1.0,
            MetricKind::HyperbolicBall => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let w = 1.0 - r2;
                4.0 / (w * w)
            }
            MetricKind::ProductCollar { c } => {
                let mu = x[0];
                if i == 0 {
                    1.0 / (4.0 * mu * mu)
                } else {
                    (1.0 + c * mu) / mu
                }
            }
        }
    }

    /// `∂_j A_i(x)`.
    pub fn d_a2(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        match self.kind {
            MetricKind::FlatTorus => 0.0,
            MetricKind::HyperbolicBall => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let w = 1.0 - r2;
                16.0 * x[j] / (w * w * w)
            }
            MetricKind::ProductCollar { c } => {
                let mu = x[0];
                if j != 0 {
                    return 0.0;
                }
                if i == 0 {
                    -1.0 / (2.0 * mu * mu * mu)
                } else {
                    let _ = c;
                    -1.0 / (mu * mu)
                }
            }
        }
    }

    /// `∂_k ∂_j A_i(x)`.
    pub fn dd_a2(&self, i: usize, j: usize, k: usize, x: &[f64]) -> f64 {
        match self.kind {
            MetricKind::FlatTorus => 0.0,
            MetricKind::HyperbolicBall => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let w = 1.0 - r2;
                let kron = if j == k { 1.0 } else { 0.0 };
                16.0 * kron / (w * w * w) + 96.0 * x[j] * x[k] / (w * w * w * w)
            }
            MetricKind::ProductCollar { .. } => {
                let mu = x[0];
                if j != 0 || k != 0 {
                    return 0.0;
                }
                if i == 0 {
                    3.0 / (2.0 * mu * mu * mu * mu)
                } else {
                    2.0 / (mu * mu * mu)
                }
            }
        }
    }

    /// Frame scale `a_i = √A_i`.
    pub fn frame_scale(&self, i: usize, x: &[f64]) -> f64 {
        self.a2(i, x).sqrt()
    }

    /// Volume density `√det g = Π_i a_i`.
    pub fn vol_density(&self, x: &[f64]) -> f64 {
        (0..self.dim).map(|i| self.frame_scale(i, x)).product()
    }

    /// Christoffel symbols `Γ^k_{ij}` of the diagonal metric.
    pub fn christoffel(&self, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let d = self.dim;
        let mut g = vec![vec![vec![0.0; d]; d]; d];
        for k in 0..d {
            let inv = 1.0 / (2.0 * self.a2(k, x));
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    if j == k {
                        s += self.d_a2(j, i, x);
                    }
                    if i == k {
                        s += self.d_a2(i, j, x);
                    }
                    if i == j {
                        s -= self.d_a2(i, k, x);
                    }
                    g[k][i][j] = inv * s;
                }
            }
        }
        g
    }

    /// `∂_l Γ^k_{ij}` in closed form.
    pub fn d_christoffel(&self, x: &[f64]) -> Vec<Vec<Vec<Vec<f64>>>> {
        let d = self.dim;
        let gamma = self.christoffel(x);
        let mut out = vec![vec![vec![vec![0.0; d]; d]; d]; d];
        for k in 0..d {
            let ak2 = self.a2(k, x);
            for l in 0..d {
                let dak2 = self.d_a2(k, l, x);
                for i in 0..d {
                    for j in 0..d {
                        let mut ds = 0.0;
                        if j == k {
                            ds += self.dd_a2(j, i, l, x);
                        }
                        if i == k {
                            ds += self.dd_a2(i, j, l, x);
                        }
                        if i == j {
                            ds -= self.dd_a2(i, k, l, x);
                        }
                        // Γ = S/(2A_k) ⇒ ∂Γ = ∂S/(2A_k) − Γ·∂A_k/A_k.
                        out[l][k][i][j] = ds / (2.0 * ak2) - gamma[k][i][j] * dak2 / ak2;
                    }
                }
            }
        }
        out
    }

    /// Frame connection coefficients `W_i^{kj}`, defined by
    /// `∇_{E_i} α^k = Σ_j W_i^{kj} α^j` for the orthonormal coframe.
    pub fn frame_connection(&self, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let d = self.dim;
        let gamma = self.christoffel(x);
        let a: Vec<f64> = (0..d).map(|i| self.frame_scale(i, x)).collect();
        let mut w = vec![vec![vec![0.0; d]; d]; d];
        for i in 0..d {
            for k in 0..d {
                // ∂_i a_k = ∂_i A_k / (2a_k).
                let dak = self.d_a2(k, i, x) / (2.0 * a[k]);
                for j in 0..d {
                    let kron = if k == j { dak } else { 0.0 };
                    w[i][k][j] = (kron - a[k] * gamma[k][i][j]) / (a[i] * a[j]);
                }
            }
        }
        w
    }

    /// Riemann tensor in the orthonormal frame, vector-action components:
    /// `R(E_i,E_j)E_k = Σ_l G[i][j][l][k]·E_l`; equivalently the coframe
    /// transforms as `R_{E_i,E_j}α^l = −Σ_k G[i][j][l][k]·α^k`.
    pub fn riemann_frame(&self, x: &[f64]) -> Vec<Vec<Vec<Vec<f64>>>> {
        let d = self.dim;
        let gamma = self.christoffel(x);
        let dgamma = self.d_christoffel(x);
        let a: Vec<f64> = (0..d).map(|i| self.frame_scale(i, x)).collect();
        let mut out = vec![vec![vec![vec![0.0; d]; d]; d]; d];
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    for k in 0..d {
                        // R^l_{kij} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}.
                        let mut r = dgamma[i][l][j][k] - dgamma[j][l][i][k];
                        for m in 0..d {
                            r += gamma[l][i][m] * gamma[m][j][k]
                                - gamma[l][j][m] * gamma[m][i][k];
                        }
                        out[i][j][l][k] = a[l] / (a[i] * a[j] * a[k]) * r;
                    }
                }
            }
        }
        out
    }

    /// Ricci tensor in the orthonormal frame: `Ric_{jk} = Σ_i G[i][j][i][k]`.
    pub fn ricci_frame(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim;
        let g = self.riemann_frame(x);
        let mut ric = vec![vec![0.0; d]; d];
        for j in 0..d {
            for k in 0..d {
                ric[j][k] = (0..d).map(|i| g[i][j][i][k]).sum();
            }
        }
        ric
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_is_flat() {
        let m = ModelMetric::flat_torus(2);
        let x = [0.7, 1.1];
        let gamma = m.christoffel(&x);
        let riem = m.riemann_frame(&x);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(gamma[k][i][j], 0.0);
                    for l in 0..2 {
                        assert_eq!(riem[i][j][l][k], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn ball_has_constant_curvature_minus_one() {
        // Frame Riemann must equal κ(δ_{jk}δ^l_i − δ_{ik}δ^l_j) with κ = −1
        // at random interior points, in dimensions 2 and 3.
        for dim in 2..=3usize {
            let m = ModelMetric::hyperbolic_ball(dim);
            let pts: Vec<Vec<f64>> = vec![
                vec![0.1; dim],
                (0..dim).map(|i| 0.05 + 0.13 * i as f64).collect(),
                (0..dim).map(|i| -0.2 + 0.31 * i as f64).collect(),
            ];
            for x in &pts {
                let g = m.riemann_frame(x);
                for i in 0..dim {
                    for j in 0..dim {
                        for l in 0..dim {
                            for k in 0..dim {
                                let expect = -(((j == k && l == i) as i64
                                    - ((i == k && l == j) as i64))
                                    as f64);
                                assert!(
                                    (g[i][j][l][k] - expect).abs() < 1e-10,
                                    "dim={dim} ({i},{j},{l},{k}): {} vs {}",
                                    g[i][j][l][k],
                                    expect
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ball_is_einstein() {
        // Ric = −(dim−1)·δ in the orthonormal frame.
        for dim in 2..=3usize {
            let m = ModelMetric::hyperbolic_ball(dim);
            let x: Vec<f64> = (0..dim).map(|i| 0.12 - 0.27 * i as f64).collect();
            let ric = m.ricci_frame(&x);
            for j in 0..dim {
                for k in 0..dim {
                    let expect = if j == k { -((dim - 1) as f64) } else { 0.0 };
                    assert!((ric[j][k] - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn collar_cusp_is_einstein_generic_is_not() {
        let x = [0.8, 2.0];
        let cusp = ModelMetric::product_collar(2, 0.0);
        let ric = cusp.ricci_frame(&x);
        for j in 0..2 {
            for k in 0..2 {
                let expect = if j == k { -1.0 } else { 0.0 };
                assert!((ric[j][k] - expect).abs() < 1e-10, "{:?}", ric);
            }
        }
        // In dimension 2 Ricci is always proportional to the metric, so the
        // non-Einstein control lives in dimension 3.
        let generic = ModelMetric::product_collar(3, 0.4);
        let x3 = [0.8, 2.0, 1.0];
        let ric = generic.ricci_frame(&x3);
        assert!((ric[0][0] - ric[1][1]).abs() > 1e-3, "{:?}", ric);
        assert!(!generic.is_einstein());
    }

    #[test]
    fn frame_connection_is_metric_compatible() {
        // W_i^{kj} + W_i^{jk} = 0 for an orthonormal coframe.
        for m in [
            ModelMetric::hyperbolic_ball(3),
            ModelMetric::product_collar(2, 0.3),
        ] {
            let x = vec![0.21; m.dim];
            let w = m.frame_connection(&x);
            for i in 0..m.dim {
                for k in 0..m.dim {
                    for j in 0..m.dim {
                        assert!(
                            (w[i][k][j] + w[i][j][k]).abs() < 1e-12,
                            "{:?} at ({i},{k},{j})",
                            m.kind
                        );
                    }
                }
            }
        }
    }
}
