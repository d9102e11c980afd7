//! Finite-difference realizations of the differential operators on tensor
//! fields: frame covariant derivative, symmetric differential, divergence,
//! rough and Lichnerowicz Laplacians, curvature endomorphism, Lefschetz
//! operators and the quadrature pairing.

use crate::model_geometry::field::{
    hook_map, mult_map, partial_field, replace_map, Chart, DiscreteField, RankBasis,
};
use crate::model_geometry::metric::ModelMetric;
use rayon::prelude::*;

/// Frame covariant derivative: returns `∇_{E_i}u` for each frame direction.
/// `(∇_{E_i}u)_K = (1/a_i)∂_i u_K + Σ_{l,j} W_i^{lj}·(slot l↦j on u)_K`.
pub fn covariant(metric: &ModelMetric, chart: &Chart, u: &DiscreteField) -> Vec<DiscreteField> {
    let dim = metric.dim;
    let basis = RankBasis::new(dim, u.rank);
    let replace: Vec<Vec<_>> =
        (0..dim).map(|l| (0..dim).map(|j| replace_map(&basis, l, j)).collect()).collect();
    (0..dim)
        .into_par_iter()
        .map(|i| {
            let mut out = partial_field(chart, u, i);
            let n = chart.num_points();
            for p in 0..n {
                let x = chart.point(p);
                let a_i = metric.frame_scale(i, &x);
                let w = metric.frame_connection(&x);
                let src: Vec<f64> =
                    (0..u.ncomp).map(|c| u.comp(p, c)).collect();
                let row = &mut out.data[p * u.ncomp..(p + 1) * u.ncomp];
                for v in row.iter_mut() {
                    *v /= a_i;
                }
                for l in 0..dim {
                    for j in 0..dim {
                        let coeff = w[i][l][j];
                        if coeff == 0.0 {
                            continue;
                        }
                        for &(d, s, c) in &replace[l][j].entries {
                            row[d] += coeff * c * src[s];
                        }
                    }
                }
            }
            out
        })
        .collect()
}

/// Symmetric differential `d u = Σ_i α^i·∇_{E_i}u`.
pub fn sym_d(metric: &ModelMetric, chart: &Chart, u: &DiscreteField) -> DiscreteField {
    let dim = metric.dim;
    let from = RankBasis::new(dim, u.rank);
    let to = RankBasis::new(dim, u.rank + 1);
    let grads = covariant(metric, chart, u);
    let mut out = DiscreteField::zero(chart, dim, u.rank + 1);
    for i in 0..dim {
        let m = mult_map(&from, &to, i);
        for p in 0..chart.num_points() {
            let src = &grads[i].data[p * from.len()..(p + 1) * from.len()];
            let dst = &mut out.data[p * to.len()..(p + 1) * to.len()];
            m.apply(src, dst);
        }
    }
    out
}

/// Divergence `div u = −Σ_i ι_{α^i}∇_{E_i}u`, the formal adjoint of `d`.
pub fn divergence(metric: &ModelMetric, chart: &Chart, u: &DiscreteField) -> DiscreteField {
    assert!(u.rank >= 1, "divergence needs rank >= 1");
    let dim = metric.dim;
    let from = RankBasis::new(dim, u.rank);
    let to = RankBasis::new(dim, u.rank - 1);
    let grads = covariant(metric, chart, u);
    let mut out = DiscreteField::zero(chart, dim, u.rank - 1);
    for i in 0..dim {
        let h = hook_map(&from, &to, i);
        for p in 0..chart.num_points() {
            let src = &grads[i].data[p * from.len()..(p + 1) * from.len()];
            let dst = &mut out.data[p * to.len()..(p + 1) * to.len()];
            for &(d, s, c) in &h.entries {
                dst[d] -= c * src[s];
            }
        }
    }
    out
}

/// Rough Laplacian `∇*∇u = −Σ_i (∇_{E_i}∇_{E_i}u − ∇_{∇_{E_i}E_i}u)` with
/// `∇_{E_i}E_i = −Σ_k W_i^{ki}E_k`.
pub fn rough(metric: &ModelMetric, chart: &Chart, u: &DiscreteField) -> DiscreteField {
    let dim = metric.dim;
    let grads = covariant(metric, chart, u);
    let seconds: Vec<Vec<DiscreteField>> =
        grads.par_iter().map(|g| covariant(metric, chart, g)).collect();
    let mut out = DiscreteField::zero(chart, dim, u.rank);
    for i in 0..dim {
        out.axpy(-1.0, &seconds[i][i]);
    }
    // Correction −Σ_i Σ_k W_i^{ki}·∇_{E_k}u.
    for p in 0..chart.num_points() {
        let x = chart.point(p);
        let w = metric.frame_connection(&x);
        for i in 0..dim {
            for k in 0..dim {
                let coeff = w[i][k][i];
                if coeff == 0.0 {
                    continue;
                }
                for c in 0..u.ncomp {
                    *out.comp_mut(p, c) -= coeff * grads[k].comp(p, c);
                }
            }
        }
    }
    out
}

/// Dense matrix of the curvature endomorphism
/// `q(R)u = Σ_{i,j} α^j·ι_{α^i}(R_{E_i,E_j}u)` on the rank basis at `x`,
/// where `R_{E_i,E_j}` acts as the derivation replacing `α^l` by
/// `−Σ_k G[i][j][l][k]·α^k`.
pub fn q_endomorphism(metric: &ModelMetric, x: &[f64], rank: usize) -> Vec<Vec<f64>> {
    let dim = metric.dim;
    let basis = RankBasis::new(dim, rank);
    let n = basis.len();
    let mut out = vec![vec![0.0; n]; n];
    if rank == 0 {
        return out;
    }
    let g = metric.riemann_frame(x);
    for (s, key) in basis.list.iter().enumerate() {
        // R_{ij} u, for all (i,j), then hook i and multiply j.
        for l in 0..dim {
            let m_l = key.multiplicity(l);
            if m_l == 0 {
                continue;
            }
            let stripped = key.without_one(l).unwrap();
            for k in 0..dim {
                let replaced = stripped.with(k, 1);
                let rp = basis.position(&replaced);
                let coeff0 = -(m_l as f64);
                for i in 0..dim {
                    for j in 0..dim {
                        let curv = g[i][j][l][k];
                        if curv == 0.0 {
                            continue;
                        }
                        // hook ι_{α^i} then multiply by α^j.
                        let m_i = basis.list[rp].multiplicity(i);
                        if m_i == 0 {
                            continue;
                        }
                        let hooked = basis.list[rp].without_one(i).unwrap();
                        let dst = basis.position(&hooked.with(j, 1));
                        out[dst][s] += coeff0 * curv * m_i as f64;
                    }
                }
            }
        }
    }
    out
}

/// Pointwise application of the curvature endomorphism.
pub fn q_r(metric: &ModelMetric, chart: &Chart, u: &DiscreteField) -> DiscreteField {
    let mut out = DiscreteField::zero(chart, metric.dim, u.rank);
    if u.rank == 0 {
        return out;
    }
    let rows: Vec<Vec<f64>> = (0..chart.num_points())
        .into_par_iter()
        .map(|p| {
            let q = q_endomorphism(metric, &chart.point(p), u.rank);
            let src: Vec<f64> = (0..u.ncomp).map(|c| u.comp(p, c)).collect();
            (0..u.ncomp)
                .map(|d| (0..u.ncomp).map(|s| q[d][s] * src[s]).sum())
                .collect()
        })
        .collect();
    for (p, row) in rows.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            *out.comp_mut(p, c) = v;
        }
    }
    out
}

/// Lichnerowicz Laplacian `Δ = ∇*∇ + q(R)`.
pub fn lichnerowicz(metric: &ModelMetric, chart: &Chart, u: &DiscreteField) -> DiscreteField {
    let mut out = rough(metric, chart, u);
    out.axpy(1.0, &q_r(metric, chart, u));
    out
}

/// Pointwise Lefschetz raising `L u = Σ_i α^i·α^i·u`.
pub fn lef_l(chart: &Chart, dim: usize, u: &DiscreteField) -> DiscreteField {
    let from = RankBasis::new(dim, u.rank);
    let to = RankBasis::new(dim, u.rank + 2);
    let mut out = DiscreteField::zero(chart, dim, u.rank + 2);
    for (s, k) in from.list.iter().enumerate() {
        for i in 0..dim {
            let dst = to.position(&k.with(i, 2));
            for p in 0..chart.num_points() {
                *out.comp_mut(p, dst) += u.comp(p, s);
            }
        }
    }
    out
}

/// Pointwise Lefschetz trace `Λ u = Σ_i ι_{α^i}ι_{α^i}u` (rank ≥ 2).
pub fn lef_trace(chart: &Chart, dim: usize, u: &DiscreteField) -> DiscreteField {
    assert!(u.rank >= 2, "Lefschetz trace needs rank >= 2");
    let from = RankBasis::new(dim, u.rank);
    let to = RankBasis::new(dim, u.rank - 2);
    let mut out = DiscreteField::zero(chart, dim, u.rank - 2);
    for (s, k) in from.list.iter().enumerate() {
        for i in 0..dim {
            let m = k.multiplicity(i);
            if m < 2 {
                continue;
            }
            let dst = to.position(&k.without_one(i).unwrap().without_one(i).unwrap());
            let coeff = (m * (m - 1)) as f64;
            for p in 0..chart.num_points() {
                *out.comp_mut(p, dst) += coeff * u.comp(p, s);
            }
        }
    }
    out
}

/// Quadrature inner product `⟨u,v⟩ = Σ_p Σ_K (Π m_a!)·u_K v_K·√det g·Πh`.
pub fn l2_inner(metric: &ModelMetric, chart: &Chart, u: &DiscreteField, v: &DiscreteField) -> f64 {
    assert_eq!(u.rank, v.rank);
    let basis = RankBasis::new(metric.dim, u.rank);
    let cell: f64 = (0..chart.dim()).map(|a| chart.spacing(a)).product();
    let mut acc = 0.0;
    for p in 0..chart.num_points() {
        let vol = metric.vol_density(&chart.point(p));
        for c in 0..u.ncomp {
            acc += basis.weight(c) * u.comp(p, c) * v.comp(p, c) * vol * cell;
        }
    }
    acc
}

pub fn l2_norm(metric: &ModelMetric, chart: &Chart, u: &DiscreteField) -> f64 {
    l2_inner(metric, chart, u, u).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibre_algebra::MultiIndex;
    use crate::model_geometry::field::Chart;

    fn torus_chart(n: usize) -> Chart {
        Chart::new(
            vec![0.0, 0.0],
            vec![std::f64::consts::TAU, std::f64::consts::TAU],
            vec![n, n],
            vec![true, true],
            2,
        )
        .unwrap()
    }

    #[test]
    fn torus_constant_field_has_zero_differential() {
        let metric = ModelMetric::flat_torus(2);
        let chart = torus_chart(16);
        let mut u = DiscreteField::zero(&chart, 2, 1);
        for p in 0..chart.num_points() {
            *u.comp_mut(p, 0) = 3.5;
            *u.comp_mut(p, 1) = -1.25;
        }
        let du = sym_d(&metric, &chart, &u);
        assert!(du.data.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn torus_divergence_matches_analytic_oracle() {
        // u = sin(x)·α⁰: div u = −cos(x).
        let metric = ModelMetric::flat_torus(2);
        let chart = torus_chart(64);
        let mut u = DiscreteField::zero(&chart, 2, 1);
        for p in 0..chart.num_points() {
            let x = chart.point(p);
            *u.comp_mut(p, 0) = x[0].sin();
        }
        let div = divergence(&metric, &chart, &u);
        let err = (0..chart.num_points())
            .map(|p| (div.comp(p, 0) + chart.point(p)[0].cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "err = {err}");
    }

    #[test]
    fn torus_scalar_rough_laplacian_is_minus_second_derivative() {
        // ∇*∇ sin(x) = sin(x) (positive Laplacian convention).
        let metric = ModelMetric::flat_torus(2);
        let chart = torus_chart(64);
        let mut u = DiscreteField::zero(&chart, 2, 0);
        for p in 0..chart.num_points() {
            *u.comp_mut(p, 0) = chart.point(p)[0].sin();
        }
        let lap = rough(&metric, &chart, &u);
        let err = (0..chart.num_points())
            .map(|p| (lap.comp(p, 0) - chart.point(p)[0].sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "err = {err}");
    }

    #[test]
    fn torus_curvature_endomorphism_vanishes() {
        let metric = ModelMetric::flat_torus(2);
        let q = q_endomorphism(&metric, &[0.3, 0.4], 2);
        assert!(q.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn ball_q_is_scalar_on_tracefree() {
        // On ℍ^{n+1}, q(R) = −m(n+m−1) on trace-free rank-m tensors.  In
        // ℍ² (n = 1, m = 2) the trace-free α⁰α⁰ − α¹α¹ and α⁰α¹ directions
        // must be eigenvectors with eigenvalue −4.
        let metric = ModelMetric::hyperbolic_ball(2);
        let q = q_endomorphism(&metric, &[0.23, -0.11], 2);
        let basis = RankBasis::new(2, 2);
        let i00 = basis.position(&MultiIndex::new(vec![0, 0]));
        let i01 = basis.position(&MultiIndex::new(vec![0, 1]));
        let i11 = basis.position(&MultiIndex::new(vec![1, 1]));
        // Trace-free vector (1, 0, −1).
        let v = |row: usize| q[row][i00] - q[row][i11];
        assert!((v(i00) - (-4.0)).abs() < 1e-10);
        assert!((v(i11) - 4.0).abs() < 1e-10);
        assert!(v(i01).abs() < 1e-10);
        assert!((q[i01][i01] - (-4.0)).abs() < 1e-10, "{}", q[i01][i01]);
        assert!(q[i00][i01].abs() < 1e-10);
    }

    #[test]
    fn lefschetz_commutator_is_dimension_constant() {
        // [Λ, L] = (4k + 2·dim)·Id on rank-k fields, matching the exact
        // fibre computation.
        let chart = torus_chart(4);
        let dim = 2;
        for rank in 0..=3usize {
            let basis = RankBasis::new(dim, rank);
            for c0 in 0..basis.len() {
                let mut u = DiscreteField::zero(&chart, dim, rank);
                for p in 0..chart.num_points() {
                    *u.comp_mut(p, c0) = 1.0;
                }
                let ll = lef_trace(&chart, dim, &lef_l(&chart, dim, &u));
                let lu = if rank >= 2 {
                    lef_l(&chart, dim, &lef_trace(&chart, dim, &u))
                } else {
                    DiscreteField::zero(&chart, dim, rank)
                };
                let expect = (4 * rank + 2 * dim) as f64;
                for p in 0..chart.num_points() {
                    for c in 0..basis.len() {
                        let got = ll.comp(p, c) - lu.comp(p, c);
                        let want = if c == c0 { expect } else { 0.0 };
                        assert!((got - want).abs() < 1e-12, "rank={rank} c0={c0} c={c}");
                    }
                }
            }
        }
    }
}
