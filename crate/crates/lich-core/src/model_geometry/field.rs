//! Grids, discrete tensor fields and the pointwise fibre operations.
//!
//! Fields are stored in the orthonormal coframe of the (diagonal) model
//! metric: a rank-`k` field keeps one `f64` per grid point per sorted
//! multi-index `K` (the coefficient of the chain-symmetrised `α^K`), so the
//! pointwise algebra is exactly the Euclidean fibre algebra with integer
//! structure constants.

use crate::fibre_algebra::MultiIndex;
use crate::model_geometry::metric::GeometryError;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub sizes: Vec<usize>,
    pub periodic: Vec<bool>,
    /// Stencil order, 2 or 4.
    pub order: usize,
}

impl Chart {
    pub fn new(
        mins: Vec<f64>,
        maxs: Vec<f64>,
        sizes: Vec<usize>,
        periodic: Vec<bool>,
        order: usize,
    ) -> Result<Self, GeometryError> {
        if order != 2 && order != 4 {
            return Err(GeometryError::BadStencil(order));
        }
        Ok(Chart { mins, maxs, sizes, periodic, order })
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.maxs[axis] - self.mins[axis]) / self.sizes[axis] as f64
    }

    pub fn num_points(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Periodic axes place nodes at `min + i·h`; bounded axes are
    /// cell-centred (`min + (i+½)h`) so no node touches the boundary and
    /// compactly supported fields can be extended by zero.
    pub fn coordinate(&self, axis: usize, idx: usize) -> f64 {
        let h = self.spacing(axis);
        if self.periodic[axis] {
            self.mins[axis] + idx as f64 * h
        } else {
            self.mins[axis] + (idx as f64 + 0.5) * h
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        (0..self.dim()).map(|a| self.coordinate(a, idx[a])).collect()
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.sizes[a];
            flat /= self.sizes[a];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        let mut flat = 0usize;
        for a in 0..self.dim() {
            flat = flat * self.sizes[a] + idx[a];
        }
        flat
    }

    /// Same box with every axis count doubled.
    pub fn refine(&self) -> Chart {
        Chart {
            mins: self.mins.clone(),
            maxs: self.maxs.clone(),
            sizes: self.sizes.iter().map(|s| s * 2).collect(),
            periodic: self.periodic.clone(),
            order: self.order,
        }
    }
}

/// Basis of sorted multi-indices for `Sym^rank` over `dim` coframe symbols.
#[derive(Clone, Debug)]
pub struct RankBasis {
    pub dim: usize,
    pub rank: usize,
    pub list: Vec<MultiIndex>,
    pos: HashMap<MultiIndex, usize>,
}

impl RankBasis {
    pub fn new(dim: usize, rank: usize) -> Self {
        let list = MultiIndex::all(dim, rank);
        let pos = list.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        RankBasis { dim, rank, list, pos }
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn position(&self, k: &MultiIndex) -> usize {
        self.pos[k]
    }

    /// Diagonal weight `Π_a m_a!` of the chain basis element `α^K`.
    pub fn weight(&self, i: usize) -> f64 {
        self.list[i].multinomial_weight() as f64
    }
}

/// Sparse fibre map between rank bases: entries `(dst, src, coeff)`.
#[derive(Clone, Debug)]
pub struct FibreMap {
    pub out_len: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl FibreMap {
    pub fn apply(&self, src: &[f64], dst: &mut [f64]) {
        for &(d, s, c) in &self.entries {
            dst[d] += c * src[s];
        }
    }
}

/// Multiplication by the coframe covector `α^i`: `α^i·α^K = α^{K∪i}`.
pub fn mult_map(from: &RankBasis, to: &RankBasis, i: usize) -> FibreMap {
    let entries = from
        .list
        .iter()
        .enumerate()
        .map(|(s, k)| (to.position(&k.with(i, 1)), s, 1.0))
        .collect();
    FibreMap { out_len: to.len(), entries }
}

/// Euclidean hook `ι_{α^i}α^K = m_i·α^{K∖i}`.
pub fn hook_map(from: &RankBasis, to: &RankBasis, i: usize) -> FibreMap {
    let mut entries = Vec::new();
    for (s, k) in from.list.iter().enumerate() {
        let m = k.multiplicity(i);
        if m > 0 {
            entries.push((to.position(&k.without_one(i).unwrap()), s, m as f64));
        }
    }
    FibreMap { out_len: to.len(), entries }
}

/// Derivation slot replacement `α^l ↦ α^j` over all slots:
/// `α^K ↦ m_l·α^{K∖l ∪ j}`.
pub fn replace_map(basis: &RankBasis, l: usize, j: usize) -> FibreMap {
    let mut entries = Vec::new();
    for (s, k) in basis.list.iter().enumerate() {
        let m = k.multiplicity(l);
        if m > 0 {
            let dst = basis.position(&k.without_one(l).unwrap().with(j, 1));
            entries.push((dst, s, m as f64));
        }
    }
    FibreMap { out_len: basis.len(), entries }
}

/// Discrete tensor field: `data[point·ncomp + c]` in the coframe basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    pub rank: usize,
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl DiscreteField {
    pub fn zero(chart: &Chart, fibre_dim: usize, rank: usize) -> Self {
        let ncomp = RankBasis::new(fibre_dim, rank).len();
        DiscreteField { rank, ncomp, data: vec![0.0; chart.num_points() * ncomp] }
    }

    pub fn comp(&self, point: usize, c: usize) -> f64 {
        self.data[point * self.ncomp + c]
    }

    pub fn comp_mut(&mut self, point: usize, c: usize) -> &mut f64 {
        &mut self.data[point * self.ncomp + c]
    }

    pub fn axpy(&mut self, a: f64, other: &DiscreteField) {
        assert_eq!(self.data.len(), other.data.len());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.data {
            *x *= a;
        }
    }

    pub fn sub(&self, other: &DiscreteField) -> DiscreteField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// Central finite difference `∂_axis` of one scalar component lattice, with
/// periodic wrap-around or zero extension.
pub fn partial_scalar(chart: &Chart, values: &dyn Fn(usize) -> f64, axis: usize) -> Vec<f64> {
    let n = chart.num_points();
    let h = chart.spacing(axis);
    let mut out = vec![0.0; n];
    let shift = |idx: &mut Vec<usize>, step: i64| -> Option<usize> {
        let size = chart.sizes[axis] as i64;
        let raw = idx[axis] as i64 + step;
        if chart.periodic[axis] {
            idx[axis] = raw.rem_euclid(size) as usize;
            Some(chart.flatten(idx))
        } else if (0..size).contains(&raw) {
            idx[axis] = raw as usize;
            Some(chart.flatten(idx))
        } else {
            None
        }
    };
    for p in 0..n {
        let base = chart.unflatten(p);
        let sample = |step: i64| -> f64 {
            let mut idx = base.clone();
            shift(&mut idx, step).map_or(0.0, values)
        };
        out[p] = if chart.order == 2 {
            (sample(1) - sample(-1)) / (2.0 * h)
        } else {
            (-sample(2) + 8.0 * sample(1) - 8.0 * sample(-1) + sample(-2)) / (12.0 * h)
        };
    }
    out
}

/// `∂_axis` of every component of a field.
pub fn partial_field(chart: &Chart, u: &DiscreteField, axis: usize) -> DiscreteField {
    let mut out = DiscreteField { rank: u.rank, ncomp: u.ncomp, data: vec![0.0; u.data.len()] };
    for c in 0..u.ncomp {
        let col = partial_scalar(chart, &|p| u.comp(p, c), axis);
        for (p, v) in col.into_iter().enumerate() {
            *out.comp_mut(p, c) = v;
        }
    }
    out
}
