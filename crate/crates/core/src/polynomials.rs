//! Univariate orthonormal polynomial families, multi-index machinery, and
//! multivariate tensor-product basis evaluation.
//!
//! All bases are evaluated through the orthonormal three-term recurrence
//!
//! ```text
//! √β_{k+1} P_{k+1}(x) = (x - α_k) P_k(x) - √β_k P_{k-1}(x),   P_0 ≡ 1,
//! ```
//!
//! which avoids factorial overflow at high degree. Closed-form recurrence
//! coefficients are tabulated for the classical families; arbitrary weight
//! functions get numerically constructed coefficients via a discretized
//! Stieltjes procedure.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quad;

/// Highest polynomial degree supported by the shipped recurrence tables.
pub const MAX_DEGREE: usize = 30;

// ---------------------------------------------------------------------
// Multi-indices
// ---------------------------------------------------------------------

/// A multi-index α ∈ ℕ^M; one entry per (augmented) dimension.
pub type MultiIndex = Vec<u32>;

/// Total degree Σ αᵢ.
pub fn total_degree(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

/// q-quasi-norm ‖α‖_q = (Σ αᵢ^q)^(1/q).
pub fn q_norm(alpha: &[u32], q: f64) -> f64 {
    alpha
        .iter()
        .filter(|&&a| a > 0)
        .map(|&a| (a as f64).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Graded-lexicographic comparison: by total degree first, then
/// lexicographically on the entries.
pub fn graded_lex_cmp(a: &[u32], b: &[u32]) -> std::cmp::Ordering {
    total_degree(a).cmp(&total_degree(b)).then_with(|| a.cmp(b))
}

/// An ordered, duplicate-free set of multi-indices in graded-lex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    indices: Vec<MultiIndex>,
    dim: usize,
}

impl MultiIndexSet {
    /// Builds a set from raw indices: validates dimensions, sorts
    /// graded-lexicographically, removes duplicates.
    pub fn new(dim: usize, mut indices: Vec<MultiIndex>) -> Result<Self> {
        for alpha in &indices {
            if alpha.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: alpha.len(),
                });
            }
        }
        indices.sort_by(|a, b| graded_lex_cmp(a, b));
        indices.dedup();
        Ok(Self { indices, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    /// Position of the zero multi-index, if present.
    pub fn zero_position(&self) -> Option<usize> {
        self.indices.iter().position(|a| total_degree(a) == 0)
    }

    /// Highest entry over all indices in dimension `d`.
    pub fn max_degree_in_dim(&self, d: usize) -> u32 {
        self.indices.iter().map(|a| a[d]).max().unwrap_or(0)
    }

    /// Subset of this set keeping positions in `keep` (re-sorted).
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        Self::new(self.dim, keep.iter().map(|&i| self.indices[i].clone()).collect())
    }
}

/// Hyperbolic truncation set `{α ∈ ℕ^M : ‖α‖_q ≤ p}` in graded-lex order.
///
/// For q = 1 this is the total-degree set of cardinality C(M+p, p). The
/// enumeration recurses dimension by dimension carrying the partial sum
/// Σ αᵢ^q so oversized branches are pruned without materializing the full
/// total-degree set.
pub fn hyperbolic_index_set(m: usize, p: usize, q: f64) -> Result<MultiIndexSet> {
    if m < 1 {
        return Err(Error::DomainError("dimension must be at least 1".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::DomainError(format!(
            "hyperbolic truncation requires q in (0, 1], got {q}"
        )));
    }
    if p > MAX_DEGREE {
        return Err(Error::DomainError(format!(
            "degree {p} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    // ‖α‖_q ≤ p + 1e-12  ⇔  Σ αᵢ^q ≤ (p + 1e-12)^q
    let budget = ((p as f64) + 1e-12).powf(q);
    let pow: Vec<f64> = (0..=p).map(|a| (a as f64).powf(q)).collect();
    let mut out = Vec::new();
    let mut current = vec![0u32; m];
    fn recurse(
        d: usize,
        used: f64,
        budget: f64,
        pow: &[f64],
        current: &mut Vec<u32>,
        out: &mut Vec<MultiIndex>,
    ) {
        if d == current.len() {
            out.push(current.clone());
            return;
        }
        for a in 0..pow.len() {
            let next = used + pow[a];
            if next > budget {
                break;
            }
            current[d] = a as u32;
            recurse(d + 1, next, budget, pow, current, out);
        }
        current[d] = 0;
    }
    recurse(0, 0.0, budget, &pow, &mut current, &mut out);
    MultiIndexSet::new(m, out)
}

// ---------------------------------------------------------------------
// Univariate bases
// ---------------------------------------------------------------------

/// Which classical family (or numeric construction) a basis comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Orthonormal w.r.t. the uniform density on [0, 1].
    LegendreShifted01,
    /// Orthonormal w.r.t. the density 1/2 on [-1, 1].
    LegendreSymmetric,
    /// Orthonormal w.r.t. the standard normal density (probabilists').
    HermiteProbabilist,
    /// Orthonormal w.r.t. e^{-x} on [0, ∞).
    LaguerreStandard,
    /// Recurrence coefficients computed from an arbitrary density.
    NumericStieltjes,
}

/// A univariate orthonormal basis backed by recurrence coefficient tables.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateBasis {
    kind: BasisKind,
    /// α_k for k = 0..n-1.
    alpha: Vec<f64>,
    /// √β_k for k = 0..n; √β_0 is a placeholder (P_{-1} ≡ 0).
    sqrt_beta: Vec<f64>,
}

impl UnivariateBasis {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn max_degree(&self) -> usize {
        self.alpha.len()
    }

    pub fn hermite_probabilist() -> Self {
        let alpha = vec![0.0; MAX_DEGREE];
        let sqrt_beta = (0..=MAX_DEGREE).map(|k| (k as f64).sqrt().max(1.0)).collect();
        // β_0 placeholder is 1 via the max(1.0) on k = 0.
        Self {
            kind: BasisKind::HermiteProbabilist,
            alpha,
            sqrt_beta,
        }
    }

    pub fn legendre_symmetric() -> Self {
        let alpha = vec![0.0; MAX_DEGREE];
        let mut sqrt_beta = vec![1.0];
        for k in 1..=MAX_DEGREE {
            let kf = k as f64;
            sqrt_beta.push((kf * kf / (4.0 * kf * kf - 1.0)).sqrt());
        }
        Self {
            kind: BasisKind::LegendreSymmetric,
            alpha,
            sqrt_beta,
        }
    }

    pub fn legendre_shifted01() -> Self {
        let alpha = vec![0.5; MAX_DEGREE];
        let mut sqrt_beta = vec![1.0];
        for k in 1..=MAX_DEGREE {
            let kf = k as f64;
            sqrt_beta.push((kf * kf / (4.0 * (4.0 * kf * kf - 1.0))).sqrt());
        }
        Self {
            kind: BasisKind::LegendreShifted01,
            alpha,
            sqrt_beta,
        }
    }

    pub fn laguerre_standard() -> Self {
        let alpha = (0..MAX_DEGREE).map(|k| 2.0 * k as f64 + 1.0).collect();
        let sqrt_beta = (0..=MAX_DEGREE).map(|k| (k as f64).max(1.0)).collect();
        Self {
            kind: BasisKind::LaguerreStandard,
            alpha,
            sqrt_beta,
        }
    }

    /// Value of the degree-`degree` orthonormal polynomial at `x`.
    pub fn eval(&self, degree: usize, x: f64) -> f64 {
        assert!(
            degree <= self.max_degree(),
            "degree {degree} exceeds basis table ({})",
            self.max_degree()
        );
        let mut prev = 0.0;
        let mut cur = 1.0;
        for k in 0..degree {
            let next = ((x - self.alpha[k]) * cur - self.sqrt_beta[k] * prev) / self.sqrt_beta[k + 1];
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Values of all degrees 0..=`max_deg` at `x`, written into `out`.
    pub fn eval_all(&self, max_deg: usize, x: f64, out: &mut [f64]) {
        assert!(max_deg <= self.max_degree() && out.len() > max_deg);
        let mut prev = 0.0;
        let mut cur = 1.0;
        out[0] = 1.0;
        for k in 0..max_deg {
            let next = ((x - self.alpha[k]) * cur - self.sqrt_beta[k] * prev) / self.sqrt_beta[k + 1];
            prev = cur;
            cur = next;
            out[k + 1] = cur;
        }
    }

    /// Recurrence coefficients (α_k, β_k); exposed for inspection and tests.
    pub fn recurrence(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.alpha.clone(),
            self.sqrt_beta.iter().map(|s| s * s).collect(),
        )
    }
}

/// Free-function form of [`UnivariateBasis::eval`].
pub fn eval_univariate(basis: &UnivariateBasis, degree: usize, x: f64) -> f64 {
    basis.eval(degree, x)
}

/// Tensor-product evaluation ψ_α(v) = Π Pᵢ_{αᵢ}(vᵢ).
pub fn eval_multivariate(alpha: &[u32], bases: &[UnivariateBasis], v: &[f64]) -> Result<f64> {
    if alpha.len() != bases.len() {
        return Err(Error::DimensionMismatch {
            expected: bases.len(),
            got: alpha.len(),
        });
    }
    if v.len() != bases.len() {
        return Err(Error::DimensionMismatch {
            expected: bases.len(),
            got: v.len(),
        });
    }
    let mut prod = 1.0;
    for ((&a, basis), &x) in alpha.iter().zip(bases).zip(v) {
        if a > 0 {
            prod *= basis.eval(a as usize, x);
        }
    }
    Ok(prod)
}

// ---------------------------------------------------------------------
// Stieltjes construction
// ---------------------------------------------------------------------

/// Builds an orthonormal basis for an arbitrary probability density on a
/// (possibly truncated) support interval by the discretized Stieltjes
/// procedure.
///
/// The density must integrate to 1 on the given support within 1e-8. Inner
/// products are discretized on a composite Gauss–Legendre grid fine enough
/// for polynomials up to degree `2·max_degree + 1`.
pub fn stieltjes_basis<F: Fn(f64) -> f64>(
    density: F,
    support: (f64, f64),
    max_degree: usize,
) -> Result<UnivariateBasis> {
    let (lo, hi) = support;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::DomainError(format!(
            "stieltjes construction requires a finite support interval, got [{lo}, {hi}]"
        )));
    }
    if max_degree > MAX_DEGREE {
        return Err(Error::DomainError(format!(
            "degree {max_degree} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    let mass = quad::integrate_adaptive(&|x| density(x), lo, hi, 1e-12);
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::QuadratureFailure(format!(
            "density integrates to {mass} on [{lo}, {hi}], expected 1 within 1e-8"
        )));
    }

    // Discretization: enough panels that degree-62 moments are resolved.
    let panels = 200;
    let order = 32;
    let (gl_nodes, gl_weights) = quad::gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (&x, &w) in gl_nodes.iter().zip(&gl_weights) {
            let node = mid + 0.5 * h * x;
            nodes.push(node);
            weights.push(0.5 * h * w * density(node));
        }
    }

    let n = nodes.len();
    let mut alpha = Vec::with_capacity(max_degree);
    let mut sqrt_beta = vec![1.0f64];
    let mut p_prev = vec![0.0; n];
    // Normalize P_0 against the discretized measure so downstream inner
    // products are consistent even if the mass deviates at the 1e-9 level.
    let w_total: f64 = weights.iter().sum();
    let mut p_cur = vec![1.0 / w_total.sqrt(); n];

    for _k in 0..max_degree {
        let a: f64 = nodes
            .iter()
            .zip(&weights)
            .zip(&p_cur)
            .map(|((&x, &w), &p)| w * x * p * p)
            .sum();
        alpha.push(a);
        let sb_k = *sqrt_beta.last().unwrap();
        let mut t: Vec<f64> = (0..n)
            .map(|i| (nodes[i] - a) * p_cur[i] - if _k == 0 { 0.0 } else { sb_k * p_prev[i] })
            .collect();
        let beta_next: f64 = weights.iter().zip(&t).map(|(&w, &ti)| w * ti * ti).sum();
        if beta_next.is_nan() || beta_next <= 0.0 {
            return Err(Error::QuadratureFailure(format!(
                "stieltjes recurrence collapsed at degree {}",
                _k + 1
            )));
        }
        let sb_next = beta_next.sqrt();
        for ti in &mut t {
            *ti /= sb_next;
        }
        sqrt_beta.push(sb_next);
        p_prev = std::mem::take(&mut p_cur);
        p_cur = t;
    }

    let basis = UnivariateBasis {
        kind: BasisKind::NumericStieltjes,
        alpha,
        sqrt_beta,
    };

    // Gram-matrix sanity check against the same discretized measure.
    let check_deg = max_degree.min(10);
    let mut values = vec![0.0; check_deg + 1];
    let mut gram = vec![vec![0.0; check_deg + 1]; check_deg + 1];
    for i in 0..n {
        basis.eval_all(check_deg, nodes[i], &mut values);
        for j in 0..=check_deg {
            for k in j..=check_deg {
                gram[j][k] += weights[i] * values[j] * values[k];
            }
        }
    }
    for j in 0..=check_deg {
        for k in j..=check_deg {
            let target = if j == k { 1.0 } else { 0.0 };
            if (gram[j][k] - target).abs() > 1e-8 {
                return Err(Error::QuadratureFailure(format!(
                    "orthonormality defect {:.2e} at degrees ({j}, {k})",
                    (gram[j][k] - target).abs()
                )));
            }
        }
    }
    Ok(basis)
}

/// Standard Gumbel density exp(-(x + e^{-x})).
pub fn std_gumbel_pdf(x: f64) -> f64 {
    (-(x + (-x).exp())).exp()
}

/// Truncation interval for the standard Gumbel law holding all probability
/// mass above the 1e-14 level.
pub fn std_gumbel_truncated_support() -> (f64, f64) {
    // F(x) = exp(-exp(-x)); quantiles at 1e-14 and 1 - 1e-14.
    (-3.5, 33.0)
}

/// Orthonormal basis for the standard Gumbel variable, built once by the
/// Stieltjes procedure and shared read-only.
pub fn std_gumbel_basis() -> &'static UnivariateBasis {
    static BASIS: OnceLock<UnivariateBasis> = OnceLock::new();
    BASIS.get_or_init(|| {
        let (lo, hi) = std_gumbel_truncated_support();
        stieltjes_basis(std_gumbel_pdf, (lo, hi), MAX_DEGREE)
            .expect("standard Gumbel basis construction cannot fail")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_total_degree_cardinality() {
        // q = 1, M = 2, p = 2: C(4, 2) = 6 indices.
        let set = hyperbolic_index_set(2, 2, 1.0).unwrap();
        assert_eq!(set.len(), 6);
        let expected: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![0, 2],
            vec![1, 1],
            vec![2, 0],
        ];
        assert_eq!(set.indices(), &expected[..]);
    }

    #[test]
    fn hyperbolic_q_half_drops_interaction() {
        // (1,1) has ‖α‖_0.5 = 4 > 2, so only 5 indices remain.
        let set = hyperbolic_index_set(2, 2, 0.5).unwrap();
        assert_eq!(set.len(), 5);
        assert!(!set.indices().contains(&vec![1, 1]));
        // Direct enumeration oracle.
        let mut count = 0;
        for a in 0..=2u32 {
            for b in 0..=2u32 {
                if q_norm(&[a, b], 0.5) <= 2.0 + 1e-12 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, set.len());
    }

    #[test]
    fn hyperbolic_constant_only() {
        let set = hyperbolic_index_set(1, 0, 0.7).unwrap();
        assert_eq!(set.indices(), &[vec![0u32]]);
    }

    #[test]
    fn hyperbolic_rejects_bad_q() {
        assert!(hyperbolic_index_set(2, 2, 0.0).is_err());
        assert!(hyperbolic_index_set(2, 2, 1.5).is_err());
    }

    #[test]
    fn hyperbolic_nesting_in_q() {
        let small = hyperbolic_index_set(3, 4, 0.5).unwrap();
        let large = hyperbolic_index_set(3, 4, 0.9).unwrap();
        for alpha in small.iter() {
            assert!(large.indices().contains(alpha));
        }
        assert!(small.len() <= large.len());
    }

    #[test]
    fn hyperbolic_deterministic_order() {
        let a = hyperbolic_index_set(4, 3, 0.75).unwrap();
        let b = hyperbolic_index_set(4, 3, 0.75).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hermite_examples() {
        let h = UnivariateBasis::hermite_probabilist();
        // He_2(x) = x² - 1 normalized by √2! → -1/√2 at x = 0.
        assert!((h.eval(2, 0.0) + 1.0 / 2.0f64.sqrt()).abs() < 1e-15);
        assert!((h.eval(0, 123.4) - 1.0).abs() < 1e-15);
        assert!((h.eval(1, 2.0) - 2.0).abs() < 1e-15);
        // He_3(x) = x³ - 3x, ‖·‖ = √6.
        let x = 1.7;
        assert!((h.eval(3, x) - (x.powi(3) - 3.0 * x) / 6.0f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn legendre_symmetric_examples() {
        let l = UnivariateBasis::legendre_symmetric();
        assert!((l.eval(1, 0.5) - 3.0f64.sqrt() * 0.5).abs() < 1e-15);
        assert!((l.eval(0, -0.3) - 1.0).abs() < 1e-15);
        // √5 (3x² - 1)/2 at x = 1 → √5.
        assert!((l.eval(2, 1.0) - 5.0f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn multivariate_tensor_examples() {
        let bases = vec![
            UnivariateBasis::hermite_probabilist(),
            UnivariateBasis::hermite_probabilist(),
        ];
        assert!((eval_multivariate(&[0, 0], &bases, &[3.0, -2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((eval_multivariate(&[1, 0], &bases, &[2.0, 7.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((eval_multivariate(&[1, 1], &bases, &[1.0, -1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            eval_multivariate(&[1], &bases, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tensor_consistency_with_univariate_product() {
        let bases = vec![
            UnivariateBasis::legendre_symmetric(),
            UnivariateBasis::hermite_probabilist(),
            UnivariateBasis::laguerre_standard(),
        ];
        let alpha = [3u32, 2, 4];
        let v = [0.37, -1.2, 2.9];
        let tensor = eval_multivariate(&alpha, &bases, &v).unwrap();
        let prod: f64 = alpha
            .iter()
            .zip(&bases)
            .zip(&v)
            .map(|((&a, b), &x)| b.eval(a as usize, x))
            .product();
        assert_eq!(tensor.to_bits(), prod.to_bits());
    }

    /// Quadrature-based orthonormality check shared by the basis tests.
    fn orthonormality_defect(
        basis: &UnivariateBasis,
        weight: impl Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        max_deg: usize,
    ) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..=max_deg {
            for k in j..=max_deg {
                let v = quad::integrate_composite(
                    |x| basis.eval(j, x) * basis.eval(k, x) * weight(x),
                    lo,
                    hi,
                    64,
                    128,
                );
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    #[test]
    fn orthonormality_all_shipped_bases() {
        let norm = |x: f64| crate::distributions::std_normal_pdf(x);
        assert!(
            orthonormality_defect(&UnivariateBasis::hermite_probabilist(), norm, -14.0, 14.0, 10)
                < 1e-9
        );
        assert!(
            orthonormality_defect(&UnivariateBasis::legendre_symmetric(), |_| 0.5, -1.0, 1.0, 10)
                < 1e-9
        );
        assert!(
            orthonormality_defect(&UnivariateBasis::legendre_shifted01(), |_| 1.0, 0.0, 1.0, 10)
                < 1e-9
        );
        assert!(
            orthonormality_defect(
                &UnivariateBasis::laguerre_standard(),
                |x| (-x).exp(),
                0.0,
                160.0,
                10
            ) < 1e-9
        );
        let (lo, hi) = std_gumbel_truncated_support();
        assert!(orthonormality_defect(std_gumbel_basis(), std_gumbel_pdf, lo, hi, 10) < 1e-8);
    }

    #[test]
    fn stieltjes_recovers_hermite() {
        let b = stieltjes_basis(crate::distributions::std_normal_pdf, (-14.0, 14.0), 10).unwrap();
        let (alpha, beta) = b.recurrence();
        for k in 0..10 {
            assert!(alpha[k].abs() < 1e-8, "alpha[{k}] = {}", alpha[k]);
            assert!((beta[k + 1] - (k + 1) as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn stieltjes_recovers_legendre() {
        let b = stieltjes_basis(|_| 0.5, (-1.0, 1.0), 10).unwrap();
        let (alpha, beta) = b.recurrence();
        for k in 0..10 {
            let kf = (k + 1) as f64;
            assert!(alpha[k].abs() < 1e-10);
            assert!((beta[k + 1] - kf * kf / (4.0 * kf * kf - 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn stieltjes_recovers_laguerre() {
        let b = stieltjes_basis(|x: f64| (-x).exp(), (0.0, 160.0), 8).unwrap();
        let (alpha, beta) = b.recurrence();
        for k in 0..8 {
            assert!((alpha[k] - (2.0 * k as f64 + 1.0)).abs() < 1e-8, "alpha[{k}]");
            let kf = (k + 1) as f64;
            assert!((beta[k + 1] - kf * kf).abs() < 1e-6, "beta[{}]", k + 1);
        }
    }

    #[test]
    fn stieltjes_rejects_unnormalized_density() {
        assert!(matches!(
            stieltjes_basis(|_| 0.7, (-1.0, 1.0), 5),
            Err(Error::QuadratureFailure(_))
        ));
    }
}
