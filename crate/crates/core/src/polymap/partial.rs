//! Partially linear vector fields.
//!
//! Coordinates are split into a *moving* block `a` and a *linear* block
//! `b`. The field is partially linear when every nonlinear term is either
//! a polynomial in `a` alone of degree at least 2, or a polynomial in `a`
//! of degree at least 1 times a single `b_k` to the first power:
//!
//! ```text
//! F_a = L_aa a + L_ab b + A(a) b + B(a)
//! F_b = L_ba a + L_bb b + C(a) b + D(a)
//! ```
//!
//! The linear part `L` is kept as a full matrix. When it is diagonal the
//! decomposition is the textbook template with `lambda = diag(L_aa)` and
//! `lambda_prime = diag(L_bb)`; see [`PartialLinearDecomposition::has_diagonal_linear_part`].

use nalgebra::DMatrix;
use serde::Serialize;

use super::{Poly, PolyMap};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PartialLinearDecomposition {
    pub dim: usize,
    /// Indices of the moving block `a`.
    pub moving: Vec<usize>,
    /// Indices of the linear block `b`.
    pub linear: Vec<usize>,
    /// Diagonal of the linear part on the moving block.
    pub lambda: Vec<f64>,
    /// Diagonal of the linear part on the linear block.
    pub lambda_prime: Vec<f64>,
    pub linear_part: DMatrix<f64>,
    /// `A[i][k]`: coefficient of `b_k` in moving equation `i`, degree >= 1 in `a`.
    pub a_cross: Vec<Vec<Poly>>,
    /// `B[i]`: pure-`a` part of moving equation `i`, degree >= 2.
    pub b_rest: Vec<Poly>,
    /// `C[j][k]`: coefficient of `b_k` in linear equation `j`, degree >= 1 in `a`.
    pub c_cross: Vec<Vec<Poly>>,
    /// `D[j]`: pure-`a` part of linear equation `j`, degree >= 2.
    pub d_rest: Vec<Poly>,
}

/// One valid block choice found by [`PartialLinearDecomposition::search`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartialLinearSplit {
    pub linear_block: Vec<usize>,
    pub diagonal_linear_part: bool,
}

impl PartialLinearDecomposition {
    /// Tries to decompose `field` with `linear_block` as the `b` block.
    ///
    /// Returns `None` when the field does not fit the partially linear
    /// template for this split (including splits with an empty block and
    /// fields with a nonzero constant term). Coefficient tests are exact.
    pub fn decompose(field: &PolyMap, linear_block: &[usize]) -> Option<Self> {
        let d = field.dim_in();
        if !field.is_square() || linear_block.iter().any(|&k| k >= d) {
            return None;
        }
        let mut in_linear = vec![false; d];
        for &k in linear_block {
            in_linear[k] = true;
        }
        let linear: Vec<usize> = (0..d).filter(|&i| in_linear[i]).collect();
        let moving: Vec<usize> = (0..d).filter(|&i| !in_linear[i]).collect();
        if linear.is_empty() || moving.is_empty() {
            return None;
        }
        // position of each linear variable inside the b block
        let mut lin_pos = vec![usize::MAX; d];
        for (k, &v) in linear.iter().enumerate() {
            lin_pos[v] = k;
        }

        let linear_part = field.linear_part();
        let q = linear.len();
        let mut cross = vec![vec![Poly::zero(d); q]; d];
        let mut rest = vec![Poly::zero(d); d];

        for (i, comp) in field.components().iter().enumerate() {
            let mut cross_terms: Vec<Vec<(f64, Vec<u32>)>> = vec![Vec::new(); q];
            let mut rest_terms = Vec::new();
            for m in comp.terms() {
                let deg = m.degree();
                if deg == 0 {
                    return None;
                }
                if deg == 1 {
                    continue;
                }
                let lin_deg: u32 = linear.iter().map(|&v| m.powers[v]).sum();
                match lin_deg {
                    0 => rest_terms.push((m.coef, m.powers.clone())),
                    1 => {
                        let v = *linear.iter().find(|&&v| m.powers[v] == 1)?;
                        let mut p = m.powers.clone();
                        p[v] = 0;
                        cross_terms[lin_pos[v]].push((m.coef, p));
                    }
                    _ => return None,
                }
            }
            for (k, terms) in cross_terms.into_iter().enumerate() {
                cross[i][k] = Poly::from_terms(d, terms).ok()?;
            }
            rest[i] = Poly::from_terms(d, rest_terms).ok()?;
        }

        let pick = |rows: &[usize]| -> (Vec<Vec<Poly>>, Vec<Poly>) {
            (
                rows.iter().map(|&i| cross[i].clone()).collect(),
                rows.iter().map(|&i| rest[i].clone()).collect(),
            )
        };
        let (a_cross, b_rest) = pick(&moving);
        let (c_cross, d_rest) = pick(&linear);
        Some(Self {
            dim: d,
            lambda: moving.iter().map(|&i| linear_part[(i, i)]).collect(),
            lambda_prime: linear.iter().map(|&i| linear_part[(i, i)]).collect(),
            moving,
            linear,
            linear_part,
            a_cross,
            b_rest,
            c_cross,
            d_rest,
        })
    }

    /// Every block split of a field of dimension `d <= 12` that decomposes.
    pub fn search(field: &PolyMap) -> Result<Vec<PartialLinearSplit>> {
        let d = field.dim_in();
        if d > 12 {
            return Err(Error::ResourceLimit(format!(
                "split search is limited to dimension 12, got {d}"
            )));
        }
        let mut found = Vec::new();
        for mask in 1u32..(1u32 << d) - 1 {
            let block: Vec<usize> = (0..d).filter(|&i| mask & (1 << i) != 0).collect();
            if let Some(dec) = Self::decompose(field, &block) {
                found.push(PartialLinearSplit {
                    diagonal_linear_part: dec.has_diagonal_linear_part(),
                    linear_block: block,
                });
            }
        }
        Ok(found)
    }

    /// True when the linear part is diagonal, as in the unrelaxed template.
    pub fn has_diagonal_linear_part(&self) -> bool {
        let l = &self.linear_part;
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || l[(i, j)] == 0.0))
    }

    /// `A(a) + L_ab`: full coefficient of `b` in the moving equations,
    /// including linear coupling. This is what drives the asymptotic iteration.
    pub fn moving_cross_coefficients(&self) -> Vec<Vec<Poly>> {
        self.moving
            .iter()
            .zip(&self.a_cross)
            .map(|(&i, row)| {
                self.linear
                    .iter()
                    .zip(row)
                    .map(|(&k, a)| a + &Poly::constant(self.dim, self.linear_part[(i, k)]))
                    .collect()
            })
            .collect()
    }

    /// Rebuilds the field from its parts.
    pub fn recompose(&self) -> PolyMap {
        let d = self.dim;
        let mut comps = vec![Poly::zero(d); d];
        let blocks = [
            (&self.moving, &self.a_cross, &self.b_rest),
            (&self.linear, &self.c_cross, &self.d_rest),
        ];
        for (rows, cross, rest) in blocks {
            for (r, &i) in rows.iter().enumerate() {
                let mut c = rest[r].clone();
                for (k, &v) in self.linear.iter().enumerate() {
                    c = &c + &(&cross[r][k] * &Poly::var(d, v));
                }
                for j in 0..d {
                    c = &c + &Poly::var(d, j).scale(self.linear_part[(i, j)]);
                }
                comps[i] = c;
            }
        }
        PolyMap::new(d, comps).expect("parts share the field dimension")
    }
}
