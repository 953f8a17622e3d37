//! Orthonormal bases for the uncertain parameter: the multiresolution Haar
//! family composed with the parameter CDF, probabilist's Hermite polynomials,
//! and Gauss--Hermite node/weight rules.
//!
//! # Haar family on the unit interval
//!
//! With the parameter mapped to u ∈ [0,1] through its CDF, the basis is the
//! constant function together with the scaled translates
//! ψ_jk(u) = 2^(j/2) ψ(2^j u − k) of the mother wavelet ψ (+1 on [0,½), −1 on
//! [½,1)). Truncated at resolution P, every basis function — and therefore
//! every truncated expansion — is constant on each of the 2^(P+1) equal cells
//! of [0,1]. [`HaarBasis`] precomputes that cell table; the discrete Gram
//! matrix with cell weight 2^−(P+1) is the identity *exactly* (integer cell
//! sums scaled by powers of two), which the Galerkin solver relies on.
//!
//! # Hermite family and quadrature
//!
//! [`hermite_eval`] evaluates the probabilist's polynomials H_k via the
//! three-term recurrence; they are orthogonal under the standard normal
//! weight with ⟨H_i, H_k⟩ = k!·√(2π)·δ_ik in the raw e^(−λ²/2) inner
//! product. [`hermite_rule`] builds the n-point Gauss--Hermite rule from the
//! symmetric Jacobi matrix (zero diagonal, off-diagonal √1…√(n−1)): the
//! eigenvalues are the zeros of H_n and the squared first eigenvector
//! components are the weights, normalized against the unit-mass normal
//! density. The symmetrized matrix is built directly — its similarity
//! transform involves diag(√(k!)), which overflows beyond n ≈ 85, so the
//! factorials are never formed.

pub mod symtrid;

use thiserror::Error;

use crate::random::ParamDist;
use crate::scalar::{cast, cast_usize, Scalar};
use symtrid::SymTridError;

/// Largest supported Haar truncation order; the dense cell table is
/// 4^(P+1) entries, which stays modest through this cap.
pub const MAX_HAAR_ORDER: usize = 10;

/// Largest supported Gauss--Hermite rule size.
pub const MAX_RULE_SIZE: usize = 128;

/// Errors from basis construction and evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    /// Haar truncation order beyond [`MAX_HAAR_ORDER`].
    #[error("Haar truncation order {p} exceeds the supported maximum {MAX_HAAR_ORDER}")]
    OrderTooLarge { p: usize },
    /// Wavelet index (j, k) outside the truncated family.
    #[error("wavelet index (j = {j}, k = {k}) out of range for order P = {p}")]
    IndexOutOfRange { j: usize, k: usize, p: usize },
    /// Rule size outside 1..=[`MAX_RULE_SIZE`].
    #[error("Gauss-Hermite rule size {n} outside 1..={MAX_RULE_SIZE}")]
    InvalidRuleSize { n: usize },
    /// Eigensolver failure (not expected for supported sizes).
    #[error("quadrature eigensolve failed: {0}")]
    Eigen(#[from] SymTridError),
}

/// Mother Haar wavelet: +1 on [0,½), −1 on [½,1), 0 elsewhere.
pub fn mother_wavelet<T: Scalar>(u: T) -> T {
    let half = cast::<T>(0.5);
    if u >= T::zero() && u < half {
        T::one()
    } else if u >= half && u < T::one() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Multiresolution Haar basis truncated at order P, tied to a parameter
/// distribution.
///
/// Functions are indexed m = 0 (constant) and m = 2^j + k for level j ≤ P,
/// shift k < 2^j; there are exactly as many functions as cells, so the family
/// spans all piecewise-constant functions on the dyadic cells.
#[derive(Debug, Clone)]
pub struct HaarBasis<T> {
    p: usize,
    dist: ParamDist<T>,
    /// Dense table `cell_values[m][l]` of function m on cell l.
    cell_values: Vec<Vec<T>>,
    /// Integrals of the quantile map λ(u) over each cell.
    cell_masses: Vec<T>,
}

impl<T: Scalar> HaarBasis<T> {
    /// Builds the basis of order `p` for the given parameter distribution.
    pub fn new(p: usize, dist: ParamDist<T>) -> Result<Self, BasisError> {
        if p > MAX_HAAR_ORDER {
            return Err(BasisError::OrderTooLarge { p });
        }
        let n_cells = 1usize << (p + 1);
        let mut cell_values = vec![vec![T::zero(); n_cells]; n_cells];
        cell_values[0] = vec![T::one(); n_cells];
        for j in 0..=p {
            // 2^(j/2), exact for even j and correctly rounded otherwise.
            let scale = cast::<T>((2.0_f64).powf(j as f64 / 2.0));
            let support = n_cells >> j; // cells under one wavelet
            for k in 0..(1usize << j) {
                let m = (1usize << j) + k;
                let start = k * support;
                for l in 0..support / 2 {
                    cell_values[m][start + l] = scale;
                    cell_values[m][start + support / 2 + l] = -scale;
                }
            }
        }
        let cell_masses = dist.subinterval_means(p);
        Ok(Self {
            p,
            dist,
            cell_values,
            cell_masses,
        })
    }

    /// Truncation order P.
    pub fn order(&self) -> usize {
        self.p
    }

    /// Parameter distribution the basis is tied to.
    pub fn dist(&self) -> &ParamDist<T> {
        &self.dist
    }

    /// Number of basis functions, 2^(P+1).
    pub fn n_funcs(&self) -> usize {
        self.cell_values.len()
    }

    /// Number of dyadic cells, equal to [`Self::n_funcs`].
    pub fn n_cells(&self) -> usize {
        self.cell_values.len()
    }

    /// Cell width Δ = 2^−(P+1).
    pub fn cell_width(&self) -> T {
        cast::<T>((self.n_cells() as f64).recip())
    }

    /// Value of basis function `m` on cell `l` (constant there).
    #[inline]
    pub fn value(&self, m: usize, l: usize) -> T {
        self.cell_values[m][l]
    }

    /// Integrals of λ(u) over each cell, in cell order.
    pub fn cell_masses(&self) -> &[T] {
        &self.cell_masses
    }

    /// Flat index of ψ_jk (the constant function is index 0).
    pub fn func_index(&self, j: usize, k: usize) -> Result<usize, BasisError> {
        if j > self.p || k >= (1usize << j) {
            return Err(BasisError::IndexOutOfRange { j, k, p: self.p });
        }
        Ok((1usize << j) + k)
    }

    /// Level and shift of flat index `m ≥ 1`; `None` for the constant.
    pub fn func_level(&self, m: usize) -> Option<(usize, usize)> {
        if m == 0 || m >= self.n_funcs() {
            return None;
        }
        let j = m.ilog2() as usize;
        Some((j, m - (1 << j)))
    }

    /// Evaluates the truncated expansion with the given coefficients on every
    /// cell: `out[l] = Σ_m coeffs[m] · value(m, l)`.
    pub fn synthesize(&self, coeffs: &[T], out: &mut [T]) {
        assert_eq!(coeffs.len(), self.n_funcs(), "coefficient count");
        assert_eq!(out.len(), self.n_cells(), "cell count");
        out.fill(T::zero());
        for (c, row) in coeffs.iter().zip(&self.cell_values) {
            if c.is_zero() {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(row) {
                *o += *c * v;
            }
        }
    }

    /// Projects per-cell values onto the basis: `out[m] = Σ_l cells[l] ·
    /// value(m, l) · Δ`. Inverse of [`Self::synthesize`] on this cell space.
    pub fn project(&self, cells: &[T], out: &mut [T]) {
        assert_eq!(cells.len(), self.n_cells(), "cell count");
        assert_eq!(out.len(), self.n_funcs(), "coefficient count");
        let dx = self.cell_width();
        for (o, row) in out.iter_mut().zip(&self.cell_values) {
            let mut acc = T::zero();
            for (&v, &b) in cells.iter().zip(row) {
                acc += v * b;
            }
            *o = acc * dx;
        }
    }

    /// Discrete Gram matrix of the basis under cell weight Δ, computed in
    /// integer arithmetic scaled by exact powers of two.
    ///
    /// Distinct functions have integer sign-pattern dot product zero, and a
    /// function against itself contributes 2^(P+1−j) support cells times
    /// 2^(j−(P+1)) from scale² · Δ — so every entry is exactly 1.0 or 0.0 in
    /// floating point, not merely close.
    pub fn discrete_gram(&self) -> Vec<Vec<T>> {
        let n = self.n_funcs();
        let n_cells = self.n_cells();
        // Sign pattern and scale exponent per function: value = sign · 2^(e/2).
        let mut signs: Vec<Vec<i64>> = vec![vec![1; n_cells]];
        let mut exps: Vec<i32> = vec![0];
        for m in 1..n {
            let (j, k) = self.func_level(m).expect("valid index");
            let support = n_cells >> j;
            let mut row = vec![0i64; n_cells];
            for l in 0..support / 2 {
                row[k * support + l] = 1;
                row[k * support + support / 2 + l] = -1;
            }
            signs.push(row);
            exps.push(j as i32);
        }
        let mut gram = vec![vec![T::zero(); n]; n];
        for a in 0..n {
            for b in a..n {
                let dot: i64 = signs[a].iter().zip(&signs[b]).map(|(x, y)| x * y).sum();
                let entry = if dot == 0 {
                    T::zero()
                } else {
                    // Nonzero dot implies equal levels, so the exponent sum
                    // is even and the power of two exact.
                    let e = exps[a] + exps[b];
                    debug_assert_eq!(e % 2, 0);
                    cast::<T>(dot as f64 * (2.0_f64).powi(e / 2 - (self.p as i32 + 1)))
                };
                gram[a][b] = entry;
                gram[b][a] = entry;
            }
        }
        gram
    }
}

/// Evaluates ψ_jk(u) = 2^(j/2) ψ(2^j u − k) inside the truncated family of
/// `b`; indices beyond the truncation are range errors.
pub fn haar_eval<T: Scalar>(b: &HaarBasis<T>, j: usize, k: usize, u: T) -> Result<T, BasisError> {
    if j > b.order() || k >= (1usize << j) {
        return Err(BasisError::IndexOutOfRange { j, k, p: b.order() });
    }
    let scale = cast::<T>((2.0_f64).powf(j as f64 / 2.0));
    let arg = cast_usize::<T>(1 << j) * u - cast_usize::<T>(k);
    Ok(scale * mother_wavelet(arg))
}

/// Probabilist's Hermite polynomial values H_0(λ) … H_p(λ) by the three-term
/// recurrence H_{k+1} = λ·H_k − k·H_{k−1}.
pub fn hermite_eval<T: Scalar>(p: usize, lambda: T) -> Vec<T> {
    let mut h = Vec::with_capacity(p + 1);
    h.push(T::one());
    if p == 0 {
        return h;
    }
    h.push(lambda);
    for k in 1..p {
        let next = lambda * h[k] - cast_usize::<T>(k) * h[k - 1];
        h.push(next);
    }
    h
}

/// Hermite chaos basis of maximum degree p: polynomial values plus the
/// normalization constants of the standard normal inner product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermiteBasis {
    p: usize,
}

impl HermiteBasis {
    /// Basis spanning degrees 0..=p.
    pub fn new(p: usize) -> Self {
        Self { p }
    }

    /// Maximum degree.
    pub fn degree(&self) -> usize {
        self.p
    }

    /// Number of basis polynomials, p + 1.
    pub fn len(&self) -> usize {
        self.p + 1
    }

    /// Never empty; degree 0 still contains H_0.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values H_0(λ)…H_p(λ).
    pub fn eval<T: Scalar>(&self, lambda: T) -> Vec<T> {
        hermite_eval(self.p, lambda)
    }

    /// Squared norm ⟨H_k, H_k⟩ = k! under the unit-mass normal density.
    pub fn norm_sq<T: Scalar>(&self, k: usize) -> T {
        assert!(k <= self.p, "degree {k} beyond basis degree {}", self.p);
        let mut f = T::one();
        for i in 1..=k {
            f *= cast_usize::<T>(i);
        }
        f
    }
}

/// Gauss--Hermite rule: nodes are the zeros of H_n, weights are normalized
/// against the standard normal density (they sum to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRule<T> {
    n: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> HermiteRule<T> {
    /// Rule size.
    pub fn len(&self) -> usize {
        self.n
    }

    /// A rule always has at least one node.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Positive weights aligned with [`Self::nodes`], summing to 1.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Expectation Σ w_i f(node_i) of a function under the rule.
    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        let mut acc = crate::series::KahanSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.value()
    }
}

/// Builds the n-point Gauss--Hermite rule for the standard normal weight.
///
/// The Jacobi matrix is symmetrized directly as tridiag(√k): zero diagonal
/// and off-diagonal entries √1, √2, …, √(n−1). Its eigenvalues are the zeros
/// of H_n; the squared first components of the normalized eigenvectors are
/// the quadrature weights (Golub--Welsch).
pub fn hermite_rule<T: Scalar>(n: usize) -> Result<HermiteRule<T>, BasisError> {
    if n == 0 || n > MAX_RULE_SIZE {
        return Err(BasisError::InvalidRuleSize { n });
    }
    let d = vec![T::zero(); n];
    let e: Vec<T> = (0..n).map(|i| cast_usize::<T>(i + 1).sqrt()).collect();
    let (mut nodes, firsts) = symtrid::eigen_first_row(d, e)?;
    let mut weights: Vec<T> = firsts.into_iter().map(|c| c * c).collect();
    // The Jacobi matrix commutes with sign flipping, so the exact rule is
    // symmetric about 0; enforce that structure on the solver output (it
    // holds to ~1e-14 already) so mirrored nodes cancel odd integrands
    // exactly.
    let half = cast::<T>(0.5);
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let a = (nodes[j] - nodes[i]) * half;
        nodes[i] = -a;
        nodes[j] = a;
        let w = (weights[i] + weights[j]) * half;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    Ok(HermiteRule { n, nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::ParamDist;
    use proptest::prelude::*;

    fn unit_basis(p: usize) -> HaarBasis<f64> {
        HaarBasis::new(p, ParamDist::uniform(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn mother_wavelet_values() {
        assert_eq!(mother_wavelet(0.25_f64), 1.0);
        assert_eq!(mother_wavelet(0.75_f64), -1.0);
        assert_eq!(mother_wavelet(0.0_f64), 1.0);
        assert_eq!(mother_wavelet(0.5_f64), -1.0);
        assert_eq!(mother_wavelet(-0.1_f64), 0.0);
        assert_eq!(mother_wavelet(1.0_f64), 0.0);
    }

    #[test]
    fn haar_eval_matches_direct_formula() {
        let b = unit_basis(3);
        assert_eq!(haar_eval(&b, 1, 1, 0.6).unwrap(), 2.0_f64.sqrt());
        assert_eq!(haar_eval(&b, 0, 0, 0.2).unwrap(), 1.0);
        assert_eq!(haar_eval(&b, 0, 0, 0.7).unwrap(), -1.0);
        // Outside the shifted support the value is zero.
        assert_eq!(haar_eval(&b, 2, 3, 0.2).unwrap(), 0.0);
        assert!(matches!(
            haar_eval(&b, 4, 0, 0.5),
            Err(BasisError::IndexOutOfRange { .. })
        ));
        assert!(haar_eval(&b, 2, 4, 0.5).is_err());
    }

    #[test]
    fn cell_table_matches_midpoint_evaluation() {
        let b = unit_basis(3);
        let n = b.n_cells();
        let dx = b.cell_width();
        for m in 1..b.n_funcs() {
            let (j, k) = b.func_level(m).unwrap();
            for l in 0..n {
                let mid = (l as f64 + 0.5) * dx;
                assert_eq!(
                    b.value(m, l),
                    haar_eval(&b, j, k, mid).unwrap(),
                    "m = {m}, l = {l}"
                );
            }
        }
        for l in 0..n {
            assert_eq!(b.value(0, l), 1.0);
        }
    }

    #[test]
    fn wavelets_integrate_to_zero() {
        let b = unit_basis(4);
        for m in 1..b.n_funcs() {
            let total: f64 = (0..b.n_cells()).map(|l| b.value(m, l)).sum();
            // Sequential summation of ±2^(j/2) rounds at odd multiples, so
            // the cancellation is exact only to machine precision.
            assert!((total * b.cell_width()).abs() < 1e-15, "m = {m}");
        }
    }

    #[test]
    fn discrete_gram_is_exactly_identity() {
        for p in [0, 1, 3, 5] {
            let b = unit_basis(p);
            let g = b.discrete_gram();
            for (a, row) in g.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    let expect = if a == c { 1.0 } else { 0.0 };
                    // Bitwise equality is the point: the Gram entries are
                    // computed exactly, not approximately.
                    assert_eq!(v, expect, "P = {p}, entry ({a}, {c})");
                }
            }
        }
    }

    #[test]
    fn synthesis_and_projection_are_inverse() {
        let b = unit_basis(4);
        let n = b.n_funcs();
        let coeffs: Vec<f64> = (0..n).map(|m| ((m as f64) * 0.37).sin()).collect();
        let mut cells = vec![0.0; n];
        b.synthesize(&coeffs, &mut cells);
        let mut back = vec![0.0; n];
        b.project(&cells, &mut back);
        for (c, r) in coeffs.iter().zip(&back) {
            assert!((c - r).abs() < 1e-13);
        }
    }

    #[test]
    fn basis_counts_and_caps() {
        let b = unit_basis(5);
        assert_eq!(b.n_funcs(), 64);
        assert_eq!(b.n_cells(), 64);
        assert_eq!(b.cell_width(), 1.0 / 64.0);
        assert_eq!(b.func_index(2, 3).unwrap(), 7);
        assert_eq!(b.func_level(7), Some((2, 3)));
        assert_eq!(b.func_level(0), None);
        assert!(matches!(
            HaarBasis::new(MAX_HAAR_ORDER + 1, *b.dist()),
            Err(BasisError::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn hermite_recurrence_known_values() {
        let h = hermite_eval(2, 2.0_f64);
        assert_eq!(h, vec![1.0, 2.0, 3.0]); // H_2(λ) = λ² − 1
        let h = hermite_eval(1, 0.0_f64);
        assert_eq!(h, vec![1.0, 0.0]);
        assert_eq!(hermite_eval(0, 123.0_f64), vec![1.0]);
    }

    #[test]
    fn hermite_degree_five_matches_expansion() {
        // H_5(λ) = λ⁵ − 10λ³ + 15λ, from expanding the recurrence.
        let l = 1.1_f64;
        let h = hermite_eval(5, l);
        let direct = l.powi(5) - 10.0 * l.powi(3) + 15.0 * l;
        assert!((h[5] - direct).abs() < 1e-12);
    }

    #[test]
    fn hermite_orthogonality_under_rule() {
        // ⟨H_i, H_k⟩ = k!·√(2π)·δ_ik in the raw e^(−λ²/2) product; with the
        // unit-mass rule the √(2π) factor cancels, leaving Σ w H_i H_k = k!.
        let basis = HermiteBasis::new(10);
        let rule = hermite_rule::<f64>(12).unwrap();
        for i in 0..=10usize {
            for k in 0..=10usize {
                let mut acc = 0.0;
                for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
                    let h = basis.eval(x);
                    acc += w * h[i] * h[k];
                }
                let expect = if i == k { basis.norm_sq::<f64>(k) } else { 0.0 };
                let scale = basis.norm_sq::<f64>(i.max(k));
                assert!(
                    (acc - expect).abs() <= 1e-9 * scale,
                    "⟨H_{i}, H_{k}⟩ = {acc}"
                );
            }
        }
    }

    #[test]
    fn small_rules_are_exact() {
        let r2 = hermite_rule::<f64>(2).unwrap();
        assert!((r2.nodes()[0] + 1.0).abs() < 1e-14);
        assert!((r2.nodes()[1] - 1.0).abs() < 1e-14);
        assert!((r2.weights()[0] - 0.5).abs() < 1e-14);
        assert!((r2.weights()[1] - 0.5).abs() < 1e-14);

        let r3 = hermite_rule::<f64>(3).unwrap();
        let s3 = 3.0_f64.sqrt();
        for (got, want) in r3.nodes().iter().zip([-s3, 0.0, s3]) {
            assert!((got - want).abs() < 1e-13);
        }
        for (got, want) in r3.weights().iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-13);
        }

        let r1 = hermite_rule::<f64>(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert_eq!(r1.weights(), &[1.0]);

        assert!(matches!(
            hermite_rule::<f64>(0),
            Err(BasisError::InvalidRuleSize { n: 0 })
        ));
        assert!(hermite_rule::<f64>(MAX_RULE_SIZE + 1).is_err());
    }

    /// Standard normal moment: 0 for odd m, (m−1)!! for even m.
    fn normal_moment(m: usize) -> f64 {
        if m % 2 == 1 {
            return 0.0;
        }
        let mut acc = 1.0;
        let mut k = m as i64 - 1;
        while k >= 1 {
            acc *= k as f64;
            k -= 2;
        }
        acc
    }

    #[test]
    fn rules_reproduce_normal_moments() {
        for n in 1..=20usize {
            let rule = hermite_rule::<f64>(n).unwrap();
            for m in 0..=(2 * n - 1) {
                let got = rule.integrate(|x| x.powi(m as i32));
                let want = normal_moment(m);
                // Odd moments vanish by cancellation of large mirrored
                // terms, so "relative" is with respect to the absolute
                // moment actually summed.
                let scale = rule.integrate(|x| x.abs().powi(m as i32));
                let tol = 1e-10 * scale.max(1.0);
                assert!(
                    (got - want).abs() <= tol,
                    "n = {n}, moment {m}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn large_rule_is_sane() {
        let rule = hermite_rule::<f64>(70).unwrap();
        let bound = 2.0 * (70.0_f64).sqrt();
        let mut sum = 0.0;
        for i in 0..70 {
            let x = rule.nodes()[i];
            assert!(x.is_finite() && x.abs() < bound);
            assert!(rule.weights()[i] > 0.0);
            // Symmetry of the node set about zero.
            assert!((x + rule.nodes()[69 - i]).abs() < 1e-10);
            sum += rule.weights()[i];
        }
        assert!((sum - 1.0).abs() < 1e-12);
        // Even size: no zero node; the innermost pair straddles zero.
        assert!(rule.nodes()[34] < 0.0 && rule.nodes()[35] > 0.0);
    }

    #[test]
    fn nodes_are_polynomial_zeros() {
        for n in [2usize, 5, 11, 24, 40] {
            let rule = hermite_rule::<f64>(n).unwrap();
            let nodes = rule.nodes();
            for (i, &x) in nodes.iter().enumerate() {
                let h = hermite_eval(n, x);
                // Local residual scale: |H_n'| times the local node spacing.
                let deriv = (n as f64) * h[n - 1];
                let spacing = if i == 0 {
                    nodes[1] - nodes[0]
                } else if i == n - 1 {
                    nodes[n - 1] - nodes[n - 2]
                } else {
                    0.5 * (nodes[i + 1] - nodes[i - 1])
                };
                let tol = 1e-6 * (deriv.abs() * spacing).max(1.0);
                assert!(
                    h[n].abs() <= tol,
                    "n = {n}: H_n({x}) = {} vs tol {tol}",
                    h[n]
                );
            }
        }
    }

    #[test]
    fn odd_rules_contain_the_origin() {
        for n in [1usize, 3, 7, 15] {
            let rule = hermite_rule::<f64>(n).unwrap();
            assert!(rule.nodes()[n / 2].abs() < 1e-13, "odd n = {n} has a zero node");
        }
        for n in [2usize, 4, 10] {
            let rule = hermite_rule::<f64>(n).unwrap();
            for &x in rule.nodes() {
                assert!(x.abs() > 1e-3, "even n = {n} has no zero node");
            }
        }
    }

    proptest! {
        #[test]
        fn hermite_eval_satisfies_recurrence(p in 2usize..30, lambda in -5.0f64..5.0) {
            let h = hermite_eval(p, lambda);
            for k in 1..p {
                let expect = lambda * h[k] - k as f64 * h[k - 1];
                prop_assert!((h[k + 1] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }

        #[test]
        fn gram_stays_identity_for_any_distribution(mu in -10.0f64..10.0, sigma in 0.1f64..5.0, p in 0usize..6) {
            // The Gram matrix is a property of the u-side basis alone; the
            // distribution only enters through the cell masses.
            let b = HaarBasis::new(p, ParamDist::gaussian(mu, sigma).unwrap()).unwrap();
            let g = b.discrete_gram();
            for (a, row) in g.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    prop_assert_eq!(v, if a == c { 1.0 } else { 0.0 });
                }
            }
            // Cell masses telescope to the distribution mean.
            let total: f64 = b.cell_masses().iter().sum();
            prop_assert!((total - mu).abs() < 1e-11);
        }
    }
}
