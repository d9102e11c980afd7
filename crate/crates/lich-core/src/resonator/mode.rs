//! Fourier-mode reduction on the ball models.
//!
//! On ℍ² with coframe `e¹ = dρ/ρ`, `e² = (w/ρ)dθ` every symmetric rank-k
//! tensor has k+1 scalar components indexed by the number `j` of `e²`
//! factors; a fixed angular mode `e^{iℓθ}` turns all the operator calculus
//! into matrices of radial operators.  The only connection datum is
//! `∇_{E_2}e¹ = σe²`, `∇_{E_2}e² = −σe¹` with `σ = −ρ²/(2w) − 1`.  On ℍ³
//! only scalars (`m = 0`) are reduced, with spherical-harmonic eigenvalue
//! `ℓ(ℓ+1)`.

use crate::block_operators::{
    assemble_ambient_q, build_scale_change, indicial_substitute, BlockOperator, LambdaPoly,
    Tag,
};
use crate::exact::Exact;
use crate::resonator::radial::{CPoly, MuOp, RadialError, RadialOp};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    H2,
    H3,
}

impl Base {
    pub fn n(self) -> i64 {
        match self {
            Base::H2 => 1,
            Base::H3 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModeError {
    #[error("tensor modes are only reduced on the circle; ℍ³ requires m = 0")]
    UnsupportedBase,
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error("linear solve failed: {0}")]
    SingularFamily(String),
}

/// The reduced radial system for one angular mode.
#[derive(Clone, Debug)]
pub struct ModeSystem {
    pub base: Base,
    pub m: usize,
    pub ell: i64,
    /// Boundary dimension (1 for ℍ², 2 for ℍ³).
    pub n: i64,
    /// Scalar components per rank block `k = 0..=m`.
    pub comps: Vec<usize>,
    /// Global component offset of each block.
    pub offsets: Vec<usize>,
    pub total: usize,
    /// Eigenvalue of the boundary Laplacian for this mode (round
    /// normalization `h(0)`): `ℓ²` on S¹, `ℓ(ℓ+1)` on S².
    pub delta_h: f64,
    /// ρ-parity of each global component (`j mod 2` on ℍ²): odd components
    /// are conjugated by one power of ρ before the even-coordinate form.
    pub parity: Vec<i64>,
}

/// Reduce `(base, m, ℓ)` to its radial mode system.
pub fn mode_reduce(base: Base, m: usize, ell: i64) -> Result<ModeSystem, ModeError> {
    let (comps, parity, delta_h) = match base {
        Base::H2 => {
            let comps: Vec<usize> = (0..=m).map(|k| k + 1).collect();
            let parity = (0..=m).flat_map(|k| (0..=k).map(|j| (j % 2) as i64)).collect();
            (comps, parity, (ell * ell) as f64)
        }
        Base::H3 => {
            if m != 0 {
                return Err(ModeError::UnsupportedBase);
            }
            (vec![1], vec![0], (ell * (ell + 1)) as f64)
        }
    };
    let mut offsets = Vec::with_capacity(comps.len());
    let mut total = 0usize;
    for c in &comps {
        offsets.push(total);
        total += c;
    }
    Ok(ModeSystem {
        base,
        m,
        ell,
        n: base.n(),
        comps,
        offsets,
        total,
        delta_h,
        parity,
    })
}

// --- matrices of radial operators --------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct OpMatrix {
    pub rows: usize,
    pub cols: usize,
    pub e: Vec<Vec<RadialOp>>,
}

impl OpMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        OpMatrix { rows, cols, e: vec![vec![RadialOp::zero(); cols]; rows] }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = OpMatrix::zeros(n, n);
        for i in 0..n {
            out.e[i][i] = RadialOp::one();
        }
        out
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> RadialOp) -> Self {
        OpMatrix {
            rows,
            cols,
            e: (0..rows).map(|i| (0..cols).map(|j| f(i, j)).collect()).collect(),
        }
    }

    pub fn add(&self, other: &OpMatrix) -> OpMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        OpMatrix::from_fn(self.rows, self.cols, |i, j| self.e[i][j].add(&other.e[i][j]))
    }

    pub fn sub(&self, other: &OpMatrix) -> OpMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        OpMatrix::from_fn(self.rows, self.cols, |i, j| self.e[i][j].sub(&other.e[i][j]))
    }

    pub fn scale(&self, s: &Exact) -> OpMatrix {
        OpMatrix::from_fn(self.rows, self.cols, |i, j| self.e[i][j].scale(s))
    }

    pub fn scale_poly(&self, p: &CPoly) -> OpMatrix {
        OpMatrix::from_fn(self.rows, self.cols, |i, j| self.e[i][j].scale_poly(p))
    }

    /// Operator composition `self ∘ other`.
    pub fn compose(&self, other: &OpMatrix) -> OpMatrix {
        assert_eq!(self.cols, other.rows);
        OpMatrix::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = RadialOp::zero();
            for k in 0..self.cols {
                if self.e[i][k].is_zero() || other.e[k][j].is_zero() {
                    continue;
                }
                acc = acc.add(&self.e[i][k].compose(&other.e[k][j]));
            }
            acc
        })
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().all(|row| row.iter().all(RadialOp::is_zero))
    }
}

/// `σ = −ρ²/(2w) − 1`, the single connection coefficient of ℍ².
fn sigma() -> RadialOp {
    let mut op = RadialOp::function(2, -1, CPoly::constant(Exact::from_ratio(-1, 2)));
    op = op.add(&RadialOp::constant(Exact::from_integer(-1)));
    op
}

fn scalar_mat(rows: usize, cols: usize, f: impl Fn(usize, usize) -> i64) -> OpMatrix {
    OpMatrix::from_fn(rows, cols, |i, j| {
        let c = f(i, j);
        if c == 0 {
            RadialOp::zero()
        } else {
            RadialOp::constant(Exact::from_integer(c))
        }
    })
}

/// `e¹·`: rank k → k+1, component-preserving.
pub fn mult1(k: usize) -> OpMatrix {
    scalar_mat(k + 2, k + 1, |i, j| (i == j) as i64)
}

/// `e²·`: rank k → k+1, shifts `j` up.
pub fn mult2(k: usize) -> OpMatrix {
    scalar_mat(k + 2, k + 1, |i, j| (i == j + 1) as i64)
}

/// `ι_{e¹}`: rank k → k−1 with multiplicity `k−j`.
pub fn hook1(k: usize) -> OpMatrix {
    scalar_mat(k, k + 1, |i, j| if i == j { (k - j) as i64 } else { 0 })
}

/// `ι_{e²}`: rank k → k−1 with multiplicity `j`.
pub fn hook2(k: usize) -> OpMatrix {
    scalar_mat(k, k + 1, |i, j| if i + 1 == j { j as i64 } else { 0 })
}

/// Covariant derivative along `E_1 = ρ∂_ρ` (frame-parallel direction).
pub fn d1(k: usize) -> OpMatrix {
    OpMatrix::from_fn(k + 1, k + 1, |i, j| {
        if i == j {
            RadialOp::rho_deriv()
        } else {
            RadialOp::zero()
        }
    })
}

/// Covariant derivative along `E_2 = (ρ/w)∂_θ` on mode ℓ: the angular
/// derivative plus the slot rotation by `σ`.
pub fn d2(k: usize, ell: i64) -> OpMatrix {
    let s = sigma();
    OpMatrix::from_fn(k + 1, k + 1, |i, j| {
        if i == j {
            // (ρ/w)·iℓ.
            RadialOp::function(1, -1, CPoly::imag_constant(Exact::from_integer(ell)))
        } else if i == j + 1 {
            // e¹ → e², multiplicity k−j.
            s.scale(&Exact::from_integer((k - j) as i64))
        } else if i + 1 == j {
            // e² → e¹, multiplicity j, opposite sign.
            s.scale(&Exact::from_integer(-(j as i64)))
        } else {
            RadialOp::zero()
        }
    })
}

pub fn sym_d(k: usize, ell: i64) -> OpMatrix {
    mult1(k).compose(&d1(k)).add(&mult2(k).compose(&d2(k, ell)))
}

pub fn divergence(k: usize, ell: i64) -> OpMatrix {
    assert!(k >= 1);
    hook1(k)
        .compose(&d1(k))
        .add(&hook2(k).compose(&d2(k, ell)))
        .scale(&Exact::from_integer(-1))
}

pub fn lef_l(k: usize) -> OpMatrix {
    mult1(k + 1).compose(&mult1(k)).add(&mult2(k + 1).compose(&mult2(k)))
}

pub fn lef_trace(k: usize) -> OpMatrix {
    assert!(k >= 2);
    hook1(k - 1).compose(&hook1(k)).add(&hook2(k - 1).compose(&hook2(k)))
}

/// Rough Laplacian `∇*∇ = −(D₁D₁ + D₂D₂ + σD₁)` (the correction comes from
/// `∇_{E_2}E_2 = −σE_1`).
pub fn rough(k: usize, ell: i64) -> OpMatrix {
    let a = d1(k).compose(&d1(k));
    let b = d2(k, ell).compose(&d2(k, ell));
    let s = OpMatrix::from_fn(k + 1, k + 1, |i, j| {
        if i == j {
            sigma().compose(&RadialOp::rho_deriv())
        } else {
            RadialOp::zero()
        }
    });
    a.add(&b).add(&s).scale(&Exact::from_integer(-1))
}

/// Lichnerowicz Laplacian on rank k: `∇*∇ + q(R)` with the constant
/// curvature endomorphism `q(R) = −k²·Id + LΛ` (boundary dimension 1).
pub fn lichnerowicz(k: usize, ell: i64) -> OpMatrix {
    let mut out = rough(k, ell).add(
        &OpMatrix::identity(k + 1).scale(&Exact::from_integer(-((k * k) as i64))),
    );
    if k >= 2 {
        out = out.add(&lef_l(k - 2).compose(&lef_trace(k)));
    }
    out
}

/// Scalar mode Laplacian on ℍ^{n+1}:
/// `−(ρ∂)² + n((1+μ/4)/w)ρ∂ + ev·μ/w²`.
pub fn scalar_mode_laplacian(n: i64, ev: i64) -> RadialOp {
    let euler = RadialOp::rho_deriv();
    let mut out = euler.compose(&euler).scale(&Exact::from_integer(-1));
    // n(1+μ/4)/w · ρ∂: split 1/w + (μ/4)/w.
    let mut coth = RadialOp::function(0, -1, CPoly::constant(Exact::from_integer(n)));
    coth = coth.add(&RadialOp::function(
        2,
        -1,
        CPoly::constant(Exact::from_ratio(n, 4)),
    ));
    out = out.add(&coth.compose(&euler));
    out.add(&RadialOp::function(
        2,
        -2,
        CPoly::constant(Exact::from_integer(ev)),
    ))
}

/// Radial realization of a block-operator tag acting on rank `k` of mode ℓ.
pub fn realize_tag(tag: Tag, k: usize, ell: i64) -> OpMatrix {
    match tag {
        Tag::Id => OpMatrix::identity(k + 1),
        Tag::Lich => lichnerowicz(k, ell),
        Tag::Rough => rough(k, ell),
        Tag::SymDiff => sym_d(k, ell),
        Tag::Div => divergence(k, ell),
        Tag::Trace => lef_trace(k),
        Tag::LefL => lef_l(k),
        Tag::LL => lef_l(k - 2).compose(&lef_trace(k)),
    }
}

/// Realize an indicial block operator as one big matrix of radial
/// operators over the mode system's scalar components.
pub fn realize_block_operator(sys: &ModeSystem, q: &BlockOperator) -> OpMatrix {
    assert_eq!(sys.base, Base::H2, "block realization requires the circle reduction");
    assert_eq!(q.m, sys.m);
    let mut out = OpMatrix::zeros(sys.total, sys.total);
    for r in 0..=sys.m {
        for c in 0..=sys.m {
            for t in q.block(r, c).terms() {
                assert_eq!(t.euler_pow, 0, "indicial flavor has no Euler symbol");
                let mat = realize_tag(t.tag, c, sys.ell)
                    .scale_poly(&CPoly::real(t.coeff.clone()));
                assert_eq!(mat.rows, sys.comps[r]);
                assert_eq!(mat.cols, sys.comps[c]);
                for i in 0..mat.rows {
                    for j in 0..mat.cols {
                        out.e[sys.offsets[r] + i][sys.offsets[c] + j] = out.e
                            [sys.offsets[r] + i][sys.offsets[c] + j]
                            .add(&mat.e[i][j]);
                    }
                }
            }
        }
    }
    out
}

/// The scale-change `J` (and its inverse) as a radial operator matrix:
/// block `k → k+j` is the scalar coefficient times `(e¹·)^j`.
pub fn realize_scale_change(sys: &ModeSystem, inverse: bool) -> OpMatrix {
    let sc = build_scale_change(sys.m);
    let sc = if inverse { sc.inverse() } else { sc };
    let mut out = OpMatrix::zeros(sys.total, sys.total);
    for src in 0..=sys.m {
        for tgt in src..=sys.m {
            let coeff = sc.entry(src, tgt);
            if coeff.is_zero() {
                continue;
            }
            // (e¹·)^{tgt−src}: component-preserving embedding.
            let mut emb = OpMatrix::identity(src + 1);
            for k in src..tgt {
                emb = mult1(k).compose(&emb);
            }
            let emb = emb.scale(&coeff);
            for i in 0..emb.rows {
                for j in 0..emb.cols {
                    out.e[sys.offsets[tgt] + i][sys.offsets[src] + j] = out.e
                        [sys.offsets[tgt] + i][sys.offsets[src] + j]
                        .add(&emb.e[i][j]);
                }
            }
        }
    }
    out
}

/// The scale change as a plain numeric matrix over the mode components
/// (its radial realization has constant entries).
pub fn scale_change_numeric(sys: &ModeSystem, inverse: bool) -> nalgebra::DMatrix<f64> {
    let op = realize_scale_change(sys, inverse);
    nalgebra::DMatrix::from_fn(sys.total, sys.total, |i, j| {
        let entry = &op.e[i][j];
        let mut val = 0.0;
        for (&(a, b, d), poly) in entry.terms() {
            assert_eq!((a, b, d), (0, 0, 0), "scale change must be constant");
            let c = poly.lambda_coeff(0);
            assert!(c.im.abs() < 1e-15);
            assert_eq!(poly.degree(), 0);
            val += c.re;
        }
        val
    })
}

/// Radial realization of the indicial family `𝒬_λ` for the mode system.
pub fn radial_q(sys: &ModeSystem) -> OpMatrix {
    match sys.base {
        Base::H2 => {
            let q = indicial_substitute(&assemble_ambient_q(sys.m, sys.n))
                .expect("fresh ambient operator");
            realize_block_operator(sys, &q)
        }
        Base::H3 => {
            // Scalar: Δ + λ² − n²/4.
            let mut op = scalar_mode_laplacian(sys.n, sys.ell * (sys.ell + 1));
            let lam2 = LambdaPoly::monomial(Exact::one(), 2);
            let shift = LambdaPoly::constant(Exact::from_ratio(-sys.n * sys.n, 4));
            op = op.add(&RadialOp::function(0, 0, CPoly::real(lam2.add(&shift))));
            OpMatrix { rows: 1, cols: 1, e: vec![vec![op]] }
        }
    }
}

/// The extended-domain operator `𝒫_λ = ρ^{−λ−n/2+m−2} J 𝒬_λ J^{−1}
/// ρ^{λ+n/2−m}` in the even coordinate μ, with the per-component boundary
/// parity peeled off.  Entries are quadratic pencils in λ.
pub fn p_mode_matrix(sys: &ModeSystem) -> Result<Vec<Vec<MuOp>>, ModeError> {
    let q = radial_q(sys);
    let conj = match sys.base {
        Base::H2 => {
            let j = realize_scale_change(sys, false);
            let jinv = realize_scale_change(sys, true);
            j.compose(&q).compose(&jinv)
        }
        Base::H3 => q,
    };
    let half_n = Exact::from_ratio(sys.n, 2);
    let mut out = Vec::with_capacity(sys.total);
    for gi in 0..sys.total {
        let mut row = Vec::with_capacity(sys.total);
        for gj in 0..sys.total {
            let entry = &conj.e[gi][gj];
            if entry.is_zero() {
                row.push(MuOp::zero());
                continue;
            }
            // Exponent attached to the source column: c + p_j with
            // c = λ + n/2 − m.
            let c_shift =
                half_n.clone() - Exact::from_integer(sys.m as i64 - sys.parity[gj]);
            let gamma = LambdaPoly::monomial(Exact::one(), 1)
                .add(&LambdaPoly::constant(c_shift));
            let conjugated = entry.conjugate_by_rho_power(&gamma);
            // Overall ρ^{p_j − p_i − 2} left factor.
            let shifted = conjugated.shift(sys.parity[gj] - sys.parity[gi] - 2, 0);
            let mu = shifted.to_mu()?;
            if mu.max_lambda_degree() > 2 {
                return Err(ModeError::Radial(RadialError::LambdaDegreeTooHigh(
                    mu.max_lambda_degree(),
                )));
            }
            row.push(mu);
        }
        out.push(row);
    }
    Ok(out)
}
