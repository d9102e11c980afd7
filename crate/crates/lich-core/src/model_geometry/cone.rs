//! Lorentzian cone lift `M = ℝ⁺_s × X`, `η = −ds⊗ds + s²g`.
//!
//! The s-direction is handled spectrally: sections are s-homogeneous, every
//! orthonormal-frame component is `e^{cτ}·w(x)` with `s = e^τ`, so `s∂s`
//! acts as multiplication by the degree and no s-grid is needed.  Fields are
//! stored in the η-orthonormal coframe `b⁰ = s·dτ` (timelike),
//! `bⁱ = s·αⁱ`, whose connection at `τ = 0` is
//! `∇_{B_0}b^a = 0`, `∇_{B_i}b^0 = −bⁱ`, `∇_{B_i}b^j = −δ_i^j b⁰ + ∇^X αʲ`,
//! with each covariant derivative lowering the homogeneity degree by one.

use crate::block_operators::{BlockOperator, Flavor, Tag};
use crate::model_geometry::field::{partial_field, replace_map, Chart, DiscreteField, RankBasis};
use crate::model_geometry::metric::ModelMetric;
use crate::model_geometry::ops;

/// s-homogeneous section of `Sym^rank T*M` in the `b`-coframe: every
/// component equals `e^{degree·τ}` times the stored x-lattice values.
#[derive(Clone, Debug)]
pub struct ConeField {
    pub degree: f64,
    pub field: DiscreteField,
}

fn eps(a: usize) -> f64 {
    if a == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Cone covariant derivative `∇_{B_a}u` for every frame direction
/// `a = 0..=dim`; each output has degree lowered by one.
pub fn cone_covariant(metric: &ModelMetric, chart: &Chart, u: &ConeField) -> Vec<ConeField> {
    let d = metric.dim;
    let cdim = d + 1;
    let basis = RankBasis::new(cdim, u.field.rank);
    let n = chart.num_points();
    let mut out = Vec::with_capacity(cdim);

    // a = 0: B_0 = e^{−τ}∂_τ acts as multiplication by the degree.
    let mut tau = u.field.clone();
    tau.scale(u.degree);
    out.push(ConeField { degree: u.degree - 1.0, field: tau });

    // a = i ≥ 1: base frame derivative plus cone connection.
    for i in 1..cdim {
        let axis = i - 1;
        let mut f = partial_field(chart, &u.field, axis);
        // Precompute the slot-replacement maps used by the connection.
        let rep_0_i = replace_map(&basis, 0, i);
        let rep_i_0 = replace_map(&basis, i, 0);
        let reps: Vec<Vec<_>> = (1..cdim)
            .map(|l| (1..cdim).map(|k| replace_map(&basis, l, k)).collect())
            .collect();
        for p in 0..n {
            let x = chart.point(p);
            let a_i = metric.frame_scale(axis, &x);
            let w = metric.frame_connection(&x);
            let src: Vec<f64> = (0..u.field.ncomp).map(|c| u.field.comp(p, c)).collect();
            let row = &mut f.data[p * u.field.ncomp..(p + 1) * u.field.ncomp];
            for v in row.iter_mut() {
                *v /= a_i;
            }
            // ∇_{B_i}b^0 = −bⁱ.
            for &(dst, s, c) in &rep_0_i.entries {
                row[dst] -= c * src[s];
            }
            // ∇_{B_i}b^i ∋ −b⁰.
            for &(dst, s, c) in &rep_i_0.entries {
                row[dst] -= c * src[s];
            }
            // Base connection on the spatial slots.
            for l in 1..cdim {
                for k in 1..cdim {
                    let coeff = w[axis][l - 1][k - 1];
                    if coeff == 0.0 {
                        continue;
                    }
                    for &(dst, s, c) in &reps[l - 1][k - 1].entries {
                        row[dst] += coeff * c * src[s];
                    }
                }
            }
        }
        out.push(ConeField { degree: u.degree - 1.0, field: f });
    }
    out
}

/// `s²·∇*∇_η u` at `τ = 0` (degree-preserving overall):
/// `∇*∇ = −Σ_a ε_a(∇_{B_a}∇_{B_a} + Σ_c W_a^{ca}∇_{B_c})`.
pub fn cone_rough_s2(metric: &ModelMetric, chart: &Chart, u: &ConeField) -> ConeField {
    let d = metric.dim;
    let cdim = d + 1;
    let grads = cone_covariant(metric, chart, u);
    let mut acc = DiscreteField::zero(chart, cdim, u.field.rank);
    for a in 0..cdim {
        let second = cone_covariant(metric, chart, &grads[a]);
        acc.axpy(-eps(a), &second[a].field);
    }
    // Correction: −Σ_i ε_i[Σ_j W_i^{ji}∇_{B_j} − ∇_{B_0}] (cone table).
    for p in 0..chart.num_points() {
        let x = chart.point(p);
        let w = metric.frame_connection(&x);
        for i in 1..cdim {
            for c in 0..u.field.ncomp {
                // W_i^{0i} = −1 contributes +∇_{B_0}.
                *acc.comp_mut(p, c) += grads[0].field.comp(p, c);
            }
            for j in 1..cdim {
                let coeff = w[i - 1][j - 1][i - 1];
                if coeff == 0.0 {
                    continue;
                }
                for c in 0..u.field.ncomp {
                    *acc.comp_mut(p, c) -= coeff * grads[j].field.comp(p, c);
                }
            }
        }
    }
    ConeField { degree: u.degree, field: acc }
}

/// `s²·q(R̄)u` at `τ = 0`.  The cone curvature is purely spatial:
/// `R̄(B_i,B_j)B_k = s^{-2}(R^g(E_i,E_j)E_k + δ_{jk}E_i − δ_{ik}E_j)`, so the
/// endomorphism is the base one shifted by one unit of curvature, and all
/// components touching `b⁰` vanish.
pub fn cone_q_s2(metric: &ModelMetric, chart: &Chart, u: &ConeField) -> ConeField {
    let d = metric.dim;
    let cdim = d + 1;
    let basis = RankBasis::new(cdim, u.field.rank);
    let mut out = DiscreteField::zero(chart, cdim, u.field.rank);
    if u.field.rank == 0 {
        return ConeField { degree: u.degree, field: out };
    }
    for p in 0..chart.num_points() {
        let x = chart.point(p);
        let g = metric.riemann_frame(&x);
        let fbar = |i: usize, j: usize, l: usize, k: usize| -> f64 {
            let kron = |a: usize, b: usize| (a == b) as i64 as f64;
            g[i][j][l][k] + kron(j, k) * kron(l, i) - kron(i, k) * kron(l, j)
        };
        let src: Vec<f64> = (0..u.field.ncomp).map(|c| u.field.comp(p, c)).collect();
        let row = &mut out.data[p * u.field.ncomp..(p + 1) * u.field.ncomp];
        for (s, key) in basis.list.iter().enumerate() {
            for l in 1..cdim {
                let m_l = key.multiplicity(l);
                if m_l == 0 {
                    continue;
                }
                let stripped = key.without_one(l).unwrap();
                for k in 1..cdim {
                    let replaced = stripped.with(k, 1);
                    for i in 1..cdim {
                        let m_i = replaced.multiplicity(i);
                        if m_i == 0 {
                            continue;
                        }
                        let hooked = replaced.without_one(i).unwrap();
                        for j in 1..cdim {
                            let curv = fbar(i - 1, j - 1, l - 1, k - 1);
                            if curv == 0.0 {
                                continue;
                            }
                            let dst = basis.position(&hooked.with(j, 1));
                            row[dst] += -(m_l as f64) * curv * m_i as f64 * src[s];
                        }
                    }
                }
            }
        }
    }
    ConeField { degree: u.degree, field: out }
}

/// `s²□ = s²(∇*∇_η + q(R̄))`, degree-preserving.
pub fn s2_box(metric: &ModelMetric, chart: &Chart, u: &ConeField) -> ConeField {
    let mut out = cone_rough_s2(metric, chart, u);
    out.field.axpy(1.0, &cone_q_s2(metric, chart, u).field);
    out
}

/// Split a rank-m cone field into its Minkowski-scale components
/// `u^{(k)}`: the base component with multi-index `I` is
/// `√((m−k)!)·w_{0^{m−k}(I+1)}`.
pub fn minkowski_decompose(
    metric: &ModelMetric,
    chart: &Chart,
    u: &ConeField,
) -> Vec<DiscreteField> {
    let d = metric.dim;
    let m = u.field.rank;
    let cone_basis = RankBasis::new(d + 1, m);
    (0..=m)
        .map(|k| {
            let base = RankBasis::new(d, k);
            let scale = ((1..=(m - k)).product::<usize>() as f64).sqrt();
            let mut f = DiscreteField::zero(chart, d, k);
            for (c, key) in base.list.iter().enumerate() {
                let mut lifted = key.indices().iter().map(|&i| i + 1).collect::<Vec<_>>();
                lifted.extend(std::iter::repeat(0).take(m - k));
                let src = cone_basis.position(&crate::fibre_algebra::MultiIndex::new(lifted));
                for p in 0..chart.num_points() {
                    *f.comp_mut(p, c) = scale * u.field.comp(p, src);
                }
            }
            f
        })
        .collect()
}

/// Inverse of [`minkowski_decompose`] at a chosen homogeneity degree.
pub fn minkowski_compose(
    metric: &ModelMetric,
    chart: &Chart,
    comps: &[DiscreteField],
    degree: f64,
) -> ConeField {
    let d = metric.dim;
    let m = comps.len() - 1;
    let cone_basis = RankBasis::new(d + 1, m);
    let mut field = DiscreteField::zero(chart, d + 1, m);
    for (k, comp) in comps.iter().enumerate() {
        let base = RankBasis::new(d, k);
        let scale = 1.0 / ((1..=(m - k)).product::<usize>() as f64).sqrt();
        for (c, key) in base.list.iter().enumerate() {
            let mut lifted = key.indices().iter().map(|&i| i + 1).collect::<Vec<_>>();
            lifted.extend(std::iter::repeat(0).take(m - k));
            let dst = cone_basis.position(&crate::fibre_algebra::MultiIndex::new(lifted));
            for p in 0..chart.num_points() {
                *field.comp_mut(p, dst) = scale * comp.comp(p, c);
            }
        }
    }
    ConeField { degree, field }
}

/// Evaluate an assembled ambient block grid on Minkowski components, with
/// the Euler symbol `s∂s` acting as multiplication by `sigma`.
pub fn apply_ambient_block(
    q: &BlockOperator,
    sigma: f64,
    metric: &ModelMetric,
    chart: &Chart,
    comps: &[DiscreteField],
) -> Vec<DiscreteField> {
    assert_eq!(q.flavor, Flavor::AmbientQ);
    let d = metric.dim;
    let m = q.m;
    let mut out: Vec<DiscreteField> =
        (0..=m).map(|k| DiscreteField::zero(chart, d, k)).collect();
    for row in 0..=m {
        for col in 0..=m {
            for term in q.block(row, col).terms() {
                let coeff = term.coeff.coeffs().first().map_or(0.0, |c| c.to_f64())
                    * sigma.powi(term.euler_pow as i32);
                if coeff == 0.0 {
                    continue;
                }
                let applied = match term.tag {
                    Tag::Id => comps[col].clone(),
                    Tag::Lich => ops::lichnerowicz(metric, chart, &comps[col]),
                    Tag::Rough => ops::rough(metric, chart, &comps[col]),
                    Tag::SymDiff => ops::sym_d(metric, chart, &comps[col]),
                    Tag::Div => ops::divergence(metric, chart, &comps[col]),
                    Tag::Trace => ops::lef_trace(chart, d, &comps[col]),
                    Tag::LefL => ops::lef_l(chart, d, &comps[col]),
                    Tag::LL => {
                        ops::lef_l(chart, d, &ops::lef_trace(chart, d, &comps[col]))
                    }
                };
                out[row].axpy(coeff, &applied);
            }
        }
    }
    out
}

/// Evaluate an assembled indicial block grid on components at a real
/// spectral parameter λ (the Euler symbol has already been substituted).
pub fn apply_indicial_block(
    q: &BlockOperator,
    lambda: f64,
    metric: &ModelMetric,
    chart: &Chart,
    comps: &[DiscreteField],
) -> Vec<DiscreteField> {
    assert_eq!(q.flavor, Flavor::IndicialQ);
    let d = metric.dim;
    let m = q.m;
    let mut out: Vec<DiscreteField> =
        (0..=m).map(|k| DiscreteField::zero(chart, d, k)).collect();
    for row in 0..=m {
        for col in 0..=m {
            for term in q.block(row, col).terms() {
                assert_eq!(term.euler_pow, 0);
                let coeff: f64 = term
                    .coeff
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(deg, c)| c.to_f64() * lambda.powi(deg as i32))
                    .sum();
                if coeff == 0.0 {
                    continue;
                }
                let applied = match term.tag {
                    Tag::Id => comps[col].clone(),
                    Tag::Lich => ops::lichnerowicz(metric, chart, &comps[col]),
                    Tag::Rough => ops::rough(metric, chart, &comps[col]),
                    Tag::SymDiff => ops::sym_d(metric, chart, &comps[col]),
                    Tag::Div => ops::divergence(metric, chart, &comps[col]),
                    Tag::Trace => ops::lef_trace(chart, d, &comps[col]),
                    Tag::LefL => ops::lef_l(chart, d, &comps[col]),
                    Tag::LL => {
                        ops::lef_l(chart, d, &ops::lef_trace(chart, d, &comps[col]))
                    }
                };
                out[row].axpy(coeff, &applied);
            }
        }
    }
    out
}

/// Signed pairing `Σ_k (−1)^{m−k} ⟨u^{(k)}, v^{(k)}⟩` of two component
/// lists, the inner product under which the indicial family is formally
/// self-adjoint up to λ ↦ −λ̄.
pub fn signed_l2_inner(
    metric: &ModelMetric,
    chart: &Chart,
    us: &[DiscreteField],
    vs: &[DiscreteField],
) -> f64 {
    assert_eq!(us.len(), vs.len());
    let m = us.len() - 1;
    (0..=m)
        .map(|k| {
            let sign = if (m - k) % 2 == 0 { 1.0 } else { -1.0 };
            sign * ops::l2_inner(metric, chart, &us[k], &vs[k])
        })
        .sum()
}
