//! Integration suite for the exact fibre algebra: adjointness laws, the
//! trace/decomposition biconditional checked exhaustively over tensor bases,
//! and round-trip properties under randomized exact inputs.

use lich_core::exact::Exact;
use lich_core::fibre_algebra::{
    check_tracefree_relation, hook_contract, inner_product, lefschetz_l, lefschetz_trace,
    lorentz_compose, lorentz_decompose, sym_product, FibreSpec, LorentzDecomposition, MultiIndex,
    SymTensor,
};
use proptest::prelude::*;

fn basis(fibre: FibreSpec, rank: usize) -> Vec<SymTensor> {
    MultiIndex::all(fibre.dim(), rank)
        .into_iter()
        .map(|k| SymTensor::basis_element(fibre, k))
        .collect()
}

fn sym_dim(dim: usize, rank: usize) -> usize {
    MultiIndex::all(dim, rank).len()
}

/// Decomposition with `u^{(m)}, u^{(m−1)}` free and every lower component
/// forced by the trace relation `u^{(k−2)} = −Λu^{(k)}/(b_{k−2}b_{k−1})`.
fn decomposition_from_top(
    dim_e: usize,
    m: usize,
    top: SymTensor,
    next: SymTensor,
) -> LorentzDecomposition {
    let mut d = LorentzDecomposition::zero(dim_e, m);
    d.components[m] = top;
    if m >= 1 {
        d.components[m - 1] = next;
    }
    for k in (2..=m).rev() {
        let b_prod = Exact::sqrt_of(((m - k + 2) * (m - k + 1)) as u64);
        let scale = -Exact::one() * b_prod.invert_single_term().unwrap();
        d.components[k - 2] = lefschetz_trace(&d.components[k]).unwrap().scale(&scale);
    }
    d
}

#[test]
fn relation_constructed_decompositions_are_tracefree() {
    // Every decomposition satisfying the component relation composes to an
    // exactly trace-free tensor: exhaustive over basis pairs, dim ≤ 3, m ≤ 3.
    for dim_e in 1..=3 {
        for m in 2..=3usize {
            let fe = FibreSpec::euclidean(dim_e);
            for top in basis(fe, m) {
                for next in basis(fe, m - 1) {
                    let d = decomposition_from_top(dim_e, m, top.clone(), next.clone());
                    assert!(check_tracefree_relation(&d).holds());
                    let u = lorentz_compose(&d);
                    assert!(
                        lefschetz_trace(&u).unwrap().is_zero(),
                        "dim_e={dim_e}, m={m}: relation-built tensor is not trace-free"
                    );
                }
            }
        }
    }
}

#[test]
fn biconditional_on_ambient_basis() {
    // For every basis element of the rank-m Lorentzian tensors (dim ≤ 3,
    // m ≤ 3) the two predicates agree exactly: the composed trace vanishes
    // iff the component relation holds.
    for dim_e in 1..=3 {
        for m in 2..=3usize {
            let ff = FibreSpec::lorentzian(dim_e);
            for u in basis(ff, m) {
                let d = lorentz_decompose(&u).unwrap();
                let trace_zero = lefschetz_trace(&u).unwrap().is_zero();
                assert_eq!(
                    check_tracefree_relation(&d).holds(),
                    trace_zero,
                    "dim_e={dim_e}, m={m}, u={u:?}"
                );
                assert_eq!(lorentz_compose(&d), u);
            }
        }
    }
}

/// Fraction-free integer rank via Bareiss elimination.
fn integer_rank(mut a: Vec<Vec<i128>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..cols {
        let Some(pivot_row) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, pivot_row);
        for r in (rank + 1)..rows {
            for c in 0..cols {
                if c == col {
                    continue;
                }
                a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev;
            }
            a[r][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

#[test]
fn trace_kernel_dimension_matches_relation_parameters() {
    // dim ker(trace on rank-m Lorentzian tensors) equals the number of free
    // parameters (u^{(m)}, u^{(m−1)}) in the component relation, so the
    // relation-built family spans the whole kernel and the biconditional
    // holds on the full space, not just the sampled elements.
    for dim_e in 1..=3usize {
        for m in 2..=3usize {
            let ff = FibreSpec::lorentzian(dim_e);
            let dom = MultiIndex::all(ff.dim(), m);
            let cod = MultiIndex::all(ff.dim(), m - 2);
            let mut mat = vec![vec![0i128; dom.len()]; cod.len()];
            for (j, k) in dom.iter().enumerate() {
                let t = lefschetz_trace(&SymTensor::basis_element(ff, k.clone())).unwrap();
                for (i, row_idx) in cod.iter().enumerate() {
                    let q = t.coeff(row_idx).as_rational().unwrap();
                    assert_eq!(q.denom().to_string(), "1");
                    mat[i][j] = q.numer().to_string().parse().unwrap();
                }
            }
            let rank = integer_rank(mat);
            let kernel_dim = dom.len() - rank;
            let free = sym_dim(dim_e, m) + sym_dim(dim_e, m - 1);
            assert_eq!(kernel_dim, free, "dim_e={dim_e}, m={m}");
        }
    }
}

// --- randomized exact properties ---------------------------------------

fn arb_exact() -> impl Strategy<Value = Exact> {
    (-4i64..=4, 1i64..=3, prop::sample::select(vec![1u64, 1, 1, 2, 3]))
        .prop_map(|(num, den, rad)| Exact::ratio_sqrt(num, den, rad))
}

fn arb_tensor(fibre: FibreSpec, rank: usize) -> impl Strategy<Value = SymTensor> {
    let keys = MultiIndex::all(fibre.dim(), rank);
    let len = keys.len();
    prop::collection::vec(arb_exact(), len).prop_map(move |coeffs| {
        let mut t = SymTensor::zero(fibre, rank);
        for (k, c) in keys.iter().zip(coeffs) {
            t.set(k.clone(), c);
        }
        t
    })
}

fn arb_fibre() -> impl Strategy<Value = FibreSpec> {
    (1usize..=3, prop::bool::ANY).prop_map(|(dim_e, lorentzian)| {
        if lorentzian {
            FibreSpec::lorentzian(dim_e)
        } else {
            FibreSpec::euclidean(dim_e)
        }
    })
}

proptest! {
    #[test]
    fn product_is_commutative(
        (u, v) in arb_fibre().prop_flat_map(|f| (arb_tensor(f, 2), arb_tensor(f, 1)))
    ) {
        prop_assert_eq!(sym_product(&u, &v).unwrap(), sym_product(&v, &u).unwrap());
    }

    #[test]
    fn inner_product_is_symmetric(
        (u, v) in arb_fibre().prop_flat_map(|f| (arb_tensor(f, 2), arb_tensor(f, 2)))
    ) {
        prop_assert_eq!(inner_product(&u, &v).unwrap(), inner_product(&v, &u).unwrap());
    }

    #[test]
    fn hook_is_adjoint_to_multiplication(
        (a, w, v) in arb_fibre().prop_flat_map(|f| {
            (arb_tensor(f, 1), arb_tensor(f, 2), arb_tensor(f, 3))
        })
    ) {
        // ⟨a·w, v⟩ = ⟨w, ι_a v⟩ exactly, on both signatures.
        let lhs = inner_product(&sym_product(&a, &w).unwrap(), &v).unwrap();
        let rhs = inner_product(&w, &hook_contract(&a, &v).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn lefschetz_pair_is_adjoint(
        (u, v) in arb_fibre().prop_flat_map(|f| (arb_tensor(f, 1), arb_tensor(f, 3)))
    ) {
        // ⟨L u, v⟩ = ⟨u, Λ v⟩ exactly, on both signatures.
        let lhs = inner_product(&lefschetz_l(&u), &v).unwrap();
        let rhs = inner_product(&u, &lefschetz_trace(&v).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn decompose_compose_round_trip(
        u in (1usize..=3).prop_flat_map(|d| arb_tensor(FibreSpec::lorentzian(d), 3))
    ) {
        let d = lorentz_decompose(&u).unwrap();
        prop_assert_eq!(lorentz_compose(&d), u);
    }

    #[test]
    fn signed_pairing_matches_component_pairing(
        (u, v) in (1usize..=3).prop_flat_map(|d| {
            let f = FibreSpec::lorentzian(d);
            (arb_tensor(f, 2), arb_tensor(f, 2))
        })
    ) {
        // ⟨u,v⟩_F = Σ_k (−1)^{m−k}⟨u^{(k)},v^{(k)}⟩.
        let m = 2usize;
        let du = lorentz_decompose(&u).unwrap();
        let dv = lorentz_decompose(&v).unwrap();
        let mut acc = Exact::zero();
        for k in 0..=m {
            let p = inner_product(du.component(k), dv.component(k)).unwrap();
            if (m - k) % 2 == 1 {
                acc -= p;
            } else {
                acc += p;
            }
        }
        prop_assert_eq!(inner_product(&u, &v).unwrap(), acc);
    }

    #[test]
    fn biconditional_on_random_tensors(
        u in (1usize..=3).prop_flat_map(|d| arb_tensor(FibreSpec::lorentzian(d), 3))
    ) {
        let d = lorentz_decompose(&u).unwrap();
        let trace_zero = lefschetz_trace(&u).unwrap().is_zero();
        prop_assert_eq!(check_tracefree_relation(&d).holds(), trace_zero);
    }
}
