//! Analytical Sobol' decomposition of a PCE model: partial variances and
//! first-order / grouped / total indices read directly off the expansion
//! coefficients.

use crate::error::{Error, Result};
use crate::pce::PceModel;
use crate::polynomials::{total_degree, MultiIndexSet};

/// Variance decomposition of a PCE model over a set of active dimensions.
///
/// `partials` maps each non-empty subset of the active dimensions (stored
/// as a sorted list) to its partial variance; the subsets partition the
/// non-constant terms, so the partial variances sum to `total_variance`.
#[derive(Debug, Clone)]
pub struct SobolSpectrum {
    pub total_variance: f64,
    pub partials: Vec<(Vec<usize>, f64)>,
}

impl SobolSpectrum {
    /// Normalized index of one exact subset (0 when the subset is absent).
    pub fn index(&self, subset: &[usize]) -> f64 {
        let mut key = subset.to_vec();
        key.sort_unstable();
        self.partials
            .iter()
            .find(|(s, _)| s == &key)
            .map(|(_, d)| d / self.total_variance)
            .unwrap_or(0.0)
    }

    /// First-order index S_i.
    pub fn first_order(&self, dim: usize) -> f64 {
        self.index(&[dim])
    }

    /// Total index S_i^(T): sum over all subsets containing `dim`.
    pub fn total_index(&self, dim: usize) -> f64 {
        self.partials
            .iter()
            .filter(|(s, _)| s.contains(&dim))
            .map(|(_, d)| d / self.total_variance)
            .sum()
    }

    /// Σ over all subsets of the normalized indices; 1 up to rounding.
    pub fn closure(&self) -> f64 {
        self.partials.iter().map(|(_, d)| d / self.total_variance).sum()
    }
}

/// Positions of the multi-indices that are non-zero exactly on `subset`
/// and zero elsewhere.
pub fn index_class(index_set: &MultiIndexSet, subset: &[usize]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::DomainError("index class subset is empty".into()));
    }
    let dim = index_set.dim();
    if subset.iter().any(|&d| d >= dim) {
        return Err(Error::DomainError(format!(
            "subset {subset:?} exceeds dimension {dim}"
        )));
    }
    let mut mask = vec![false; dim];
    for &d in subset {
        mask[d] = true;
    }
    Ok(index_set
        .iter()
        .enumerate()
        .filter(|(_, alpha)| {
            alpha
                .iter()
                .enumerate()
                .all(|(d, &a)| if mask[d] { a > 0 } else { a == 0 })
        })
        .map(|(i, _)| i)
        .collect())
}

/// Support of a multi-index restricted to the active dimensions; `None`
/// when the index involves an inactive dimension.
fn active_support(alpha: &[u32], active: &[bool]) -> Option<Vec<usize>> {
    let mut support = Vec::new();
    for (d, &a) in alpha.iter().enumerate() {
        if a > 0 {
            if !active[d] {
                return None;
            }
            support.push(d);
        }
    }
    Some(support)
}

/// Variance decomposition of `model` over `active_dims`.
///
/// Terms involving dimensions outside `active_dims` are ignored; the model
/// restricted this way must retain non-zero variance.
pub fn sobol_indices(model: &PceModel, active_dims: &[usize]) -> Result<SobolSpectrum> {
    if active_dims.is_empty() {
        return Err(Error::DomainError("active dimension set is empty".into()));
    }
    let dim = model.dim();
    if active_dims.iter().any(|&d| d >= dim) {
        return Err(Error::DomainError(format!(
            "active dims {active_dims:?} exceed dimension {dim}"
        )));
    }
    let mut active = vec![false; dim];
    for &d in active_dims {
        active[d] = true;
    }
    let mut partials: std::collections::BTreeMap<Vec<usize>, f64> = std::collections::BTreeMap::new();
    let mut total = 0.0;
    for (alpha, &a) in model.index_set().iter().zip(model.coefficients()) {
        if total_degree(alpha) == 0 {
            continue;
        }
        if let Some(support) = active_support(alpha, &active) {
            total += a * a;
            *partials.entry(support).or_insert(0.0) += a * a;
        }
    }
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(SobolSpectrum {
        total_variance: total,
        partials: partials.into_iter().collect(),
    })
}

/// Total Sobol' index of dimension `i` over all model dimensions.
pub fn sobol_total(model: &PceModel, i: usize) -> Result<f64> {
    let all: Vec<usize> = (0..model.dim()).collect();
    Ok(sobol_indices(model, &all)?.total_index(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pce::DimRole;
    use crate::polynomials::{hyperbolic_index_set, MultiIndexSet, UnivariateBasis};

    fn model_from(set: MultiIndexSet, coeffs: Vec<f64>) -> PceModel {
        let dim = set.dim();
        let bases = (0..dim).map(|_| UnivariateBasis::hermite_probabilist()).collect();
        let layout = (0..dim).map(|i| DimRole::Aleatory { input: i }).collect();
        PceModel::new(set, coeffs, bases, layout).unwrap()
    }

    #[test]
    fn index_class_enumeration() {
        let set = hyperbolic_index_set(2, 2, 1.0).unwrap();
        let class1 = index_class(&set, &[0]).unwrap();
        let got: Vec<&Vec<u32>> = class1.iter().map(|&i| set.get(i)).collect();
        assert_eq!(got, vec![&vec![1u32, 0], &vec![2u32, 0]]);
        let class12 = index_class(&set, &[0, 1]).unwrap();
        assert_eq!(class12.len(), 1);
        assert_eq!(set.get(class12[0]), &vec![1u32, 1]);
    }

    #[test]
    fn index_classes_partition() {
        let set = hyperbolic_index_set(3, 3, 1.0).unwrap();
        let mut covered = 0;
        for mask in 1u32..8 {
            let subset: Vec<usize> = (0..3).filter(|d| mask >> d & 1 == 1).collect();
            covered += index_class(&set, &subset).unwrap().len();
        }
        assert_eq!(covered, set.len() - 1);
    }

    #[test]
    fn index_class_rejects_bad_subset() {
        let set = hyperbolic_index_set(2, 2, 1.0).unwrap();
        assert!(index_class(&set, &[]).is_err());
        assert!(index_class(&set, &[5]).is_err());
    }

    #[test]
    fn equal_linear_terms_split_evenly() {
        let set = MultiIndexSet::new(2, vec![vec![0, 0], vec![1, 0], vec![0, 1]]).unwrap();
        let model = model_from(set, vec![3.0, 0.7, 0.7]);
        let spectrum = sobol_indices(&model, &[0, 1]).unwrap();
        assert!((spectrum.first_order(0) - 0.5).abs() < 1e-15);
        assert!((spectrum.first_order(1) - 0.5).abs() < 1e-15);
        // Additive model: first-order indices sum to 1 and equal totals.
        assert!((spectrum.closure() - 1.0).abs() < 1e-12);
        assert!((spectrum.total_index(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_interaction_term() {
        let set = MultiIndexSet::new(2, vec![vec![0, 0], vec![1, 1]]).unwrap();
        let model = model_from(set, vec![0.0, 2.0]);
        let spectrum = sobol_indices(&model, &[0, 1]).unwrap();
        assert_eq!(spectrum.first_order(0), 0.0);
        assert_eq!(spectrum.first_order(1), 0.0);
        assert!((spectrum.index(&[0, 1]) - 1.0).abs() < 1e-15);
        assert!((spectrum.total_index(0) - 1.0).abs() < 1e-15);
        assert!((sobol_total(&model, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn f1_conditional_total_closed_form() {
        // Conditional expansion of x1·x2 at μ = (1,1), σ = (1,1):
        // a_(1,0) = μ2σ1 = 1, a_(0,1) = μ1σ2 = 1, a_(1,1) = σ1σ2 = 1.
        let set =
            MultiIndexSet::new(2, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let model = model_from(set, vec![1.0, 1.0, 1.0, 1.0]);
        let spectrum = sobol_indices(&model, &[0, 1]).unwrap();
        assert!((spectrum.total_index(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((spectrum.first_order(0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn complement_identity() {
        // S_i^(T) = 1 - S_{-i}: the total of dim 0 plus everything not
        // involving dim 0 must be 1.
        let set = hyperbolic_index_set(3, 3, 1.0).unwrap();
        let coeffs: Vec<f64> = (0..set.len()).map(|i| ((i * 37 + 11) % 17) as f64 / 17.0).collect();
        let model = model_from(set, coeffs);
        let spectrum = sobol_indices(&model, &[0, 1, 2]).unwrap();
        let s_not_0: f64 = spectrum
            .partials
            .iter()
            .filter(|(s, _)| !s.contains(&0))
            .map(|(_, d)| d / spectrum.total_variance)
            .sum();
        assert!((spectrum.total_index(0) + s_not_0 - 1.0).abs() < 1e-12);
        assert!((spectrum.closure() - 1.0).abs() < 1e-12);
        assert!(spectrum.total_index(0) >= spectrum.first_order(0));
    }

    #[test]
    fn zero_variance_detected() {
        let set = MultiIndexSet::new(2, vec![vec![0, 0], vec![0, 1]]).unwrap();
        let model = model_from(set, vec![5.0, 1.0]);
        // Active dims = {0} only, but the model only varies in dim 1.
        assert!(matches!(sobol_indices(&model, &[0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn inactive_dimensions_excluded() {
        // Terms touching inactive dims drop out of numerator and total.
        // Indices listed in graded-lex order so coefficients align.
        let set = MultiIndexSet::new(
            3,
            vec![vec![0, 0, 0], vec![0, 1, 0], vec![1, 0, 0], vec![1, 0, 1]],
        )
        .unwrap();
        let model = model_from(set, vec![0.0, 2.0, 1.0, 3.0]);
        let spectrum = sobol_indices(&model, &[0, 1]).unwrap();
        assert!((spectrum.total_variance - 5.0).abs() < 1e-15);
        assert!((spectrum.first_order(0) - 1.0 / 5.0).abs() < 1e-15);
    }
}
