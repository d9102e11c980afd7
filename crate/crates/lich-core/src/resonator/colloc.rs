//! Spectral collocation of the extended-domain radial systems.
//!
//! The even coordinate μ ranges over an interval containing both the
//! conformal boundary μ = 0 in its interior and the centre of the ball at
//! μ = 4.  Chebyshev–Gauss nodes (no endpoint rows) with barycentric
//! differentiation give spectral accuracy; the polynomial trial space is
//! automatically smooth across μ = 0, which is exactly the extension
//! property that selects the meromorphically continued resolvent.

use crate::resonator::mode::{p_mode_matrix, ModeError, ModeSystem};
use crate::resonator::radial::MuOp;
use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;

/// Default collocation window: boundary μ = 0 interior, centre μ = 4
/// included.  The artificial boundary sits deep in the extension region;
/// resonances at depth |Re λ| ≈ k need the extension to reach several
/// units below μ = 0 before their locations converge.
pub const MU_MIN: f64 = -4.0;
pub const MU_MAX: f64 = 4.0;

/// Chebyshev–Gauss collocation grid on `[a, b]` with barycentric
/// differentiation matrices.
#[derive(Clone, Debug)]
pub struct CollocationGrid {
    pub a: f64,
    pub b: f64,
    /// Collocation nodes, descending in the Chebyshev ordering.
    pub nodes: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
}

impl CollocationGrid {
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 16, "collocation needs at least 16 nodes");
        assert!(b > a);
        // Gauss nodes x_i = cos(π(2i+1)/(2N)) and barycentric weights
        // w_i = (−1)^i sin(π(2i+1)/(2N)).
        let mut x = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let t = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64;
            x.push(t.cos());
            w.push(if i % 2 == 0 { t.sin() } else { -t.sin() });
        }
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (w[j] / w[i]) / (x[i] - x[j]);
                    d[(i, j)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        // Map [−1, 1] → [a, b].
        let scale = 2.0 / (b - a);
        let d1 = d.map(|v| v * scale);
        let d2 = &d1 * &d1;
        let nodes = x.iter().map(|&xi| a + (b - a) * (xi + 1.0) / 2.0).collect();
        CollocationGrid { a, b, nodes, d1, d2 }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Barycentric evaluation of the interpolating polynomial through the
    /// nodal values at an arbitrary point of `[a, b]`.
    pub fn interpolate(&self, values: &[Complex64], x: f64) -> Complex64 {
        assert_eq!(values.len(), self.len());
        let n = self.len();
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let t = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64;
            let w = if i % 2 == 0 { t.sin() } else { -t.sin() };
            let dx = x - self.nodes[i];
            if dx.abs() < 1e-14 {
                return values[i];
            }
            let r = Complex64::new(w / dx, 0.0);
            num += r * values[i];
            den += r;
        }
        num / den
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Quadratic matrix pencil `T(λ) = T₀ + λT₁ + λ²T₂`.
#[derive(Clone, Debug)]
pub struct PencilMatrix {
    pub t0: DMatrix<Complex64>,
    pub t1: DMatrix<Complex64>,
    pub t2: DMatrix<Complex64>,
}

impl PencilMatrix {
    pub fn dim(&self) -> usize {
        self.t0.nrows()
    }

    pub fn eval(&self, lambda: Complex64) -> DMatrix<Complex64> {
        &self.t0 + &self.t1 * Complex::from(lambda) + &self.t2 * Complex::from(lambda * lambda)
    }
}

/// Collocate one radial operator: rows indexed by nodes, with the
/// `w(μ_i)²` row scaling that removes the centre singularity of the
/// coefficients (λ-independent, so poles of the pencil are unchanged).
fn collocate_entry(
    op: &MuOp,
    grid: &CollocationGrid,
    out: &mut [DMatrix<Complex64>; 3],
    row0: usize,
    col0: usize,
) {
    let n = grid.len();
    // Evaluate coefficient functions at the nodes for each derivative
    // order and λ-degree, then multiply by the differentiation matrices.
    for j in 0..=2u32 {
        for d in 0..=2usize {
            let coeffs: Vec<Complex64> = grid
                .nodes
                .iter()
                .map(|&mu| {
                    let w2 = (1.0 - mu / 4.0).powi(2);
                    op.coeff_at(j, d, mu) * Complex64::new(w2, 0.0)
                })
                .collect();
            if coeffs.iter().all(|c| c.norm() == 0.0) {
                continue;
            }
            let target = &mut out[d];
            match j {
                0 => {
                    for i in 0..n {
                        target[(row0 + i, col0 + i)] += coeffs[i];
                    }
                }
                1 => {
                    for i in 0..n {
                        for c in 0..n {
                            target[(row0 + i, col0 + c)] +=
                                coeffs[i] * Complex64::new(grid.d1[(i, c)], 0.0);
                        }
                    }
                }
                _ => {
                    for i in 0..n {
                        for c in 0..n {
                            target[(row0 + i, col0 + c)] +=
                                coeffs[i] * Complex64::new(grid.d2[(i, c)], 0.0);
                        }
                    }
                }
            }
        }
    }
}

/// Assemble the collocated pencil for a mode system on a grid.
pub fn assemble_pencil(
    sys: &ModeSystem,
    grid: &CollocationGrid,
) -> Result<PencilMatrix, ModeError> {
    let p = p_mode_matrix(sys)?;
    let n = grid.len();
    let dim = sys.total * n;
    let mut mats = [
        DMatrix::<Complex64>::zeros(dim, dim),
        DMatrix::<Complex64>::zeros(dim, dim),
        DMatrix::<Complex64>::zeros(dim, dim),
    ];
    for (gi, row) in p.iter().enumerate() {
        for (gj, entry) in row.iter().enumerate() {
            if entry.is_zero() {
                continue;
            }
            collocate_entry(entry, grid, &mut mats, gi * n, gj * n);
        }
    }
    let [t0, t1, t2] = mats;
    Ok(PencilMatrix { t0, t1, t2 })
}
