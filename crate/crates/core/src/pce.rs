//! Sparse polynomial chaos regression: information matrix, ordinary least
//! squares, LARS-style selection with degree adaptivity, and error
//! estimators.
//!
//! Least squares is solved through rank-revealing orthogonal
//! factorizations throughout; the normal equations are never formed, since
//! phantom-replicated designs can be poorly conditioned.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::polynomials::{
    hyperbolic_index_set, total_degree, MultiIndexSet, UnivariateBasis,
};

// ---------------------------------------------------------------------
// Experimental design
// ---------------------------------------------------------------------

/// Regression design in standardized augmented coordinates.
///
/// Rows sharing a `run_id` are phantom replicates of one model evaluation
/// and must carry bit-identical responses.
#[derive(Debug, Clone)]
pub struct ExperimentalDesign {
    points: Vec<Vec<f64>>,
    responses: Vec<f64>,
    run_ids: Vec<usize>,
}

impl ExperimentalDesign {
    pub fn new(points: Vec<Vec<f64>>, responses: Vec<f64>, run_ids: Vec<usize>) -> Result<Self> {
        if points.len() != responses.len() || points.len() != run_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: responses.len().min(run_ids.len()),
            });
        }
        if points.is_empty() {
            return Err(Error::DomainError("experimental design is empty".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DomainError("design rows have inconsistent dimension".into()));
        }
        // Phantom bookkeeping: equal run_id ⇒ equal response.
        let mut seen: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
        for (&id, &y) in run_ids.iter().zip(&responses) {
            match seen.entry(id) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    if e.get().to_bits() != y.to_bits() {
                        return Err(Error::DomainError(format!(
                            "rows with run_id {id} carry different responses"
                        )));
                    }
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(y);
                }
            }
        }
        Ok(Self {
            points,
            responses,
            run_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn run_ids(&self) -> &[usize] {
        &self.run_ids
    }

    pub fn n_distinct_runs(&self) -> usize {
        let mut ids: Vec<usize> = self.run_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Replicate count per distinct run id, keyed by run id order.
    pub fn replicates_per_run(&self) -> Vec<(usize, usize)> {
        let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
        for &id in &self.run_ids {
            *counts.entry(id).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }

    /// Sample variance of the responses (1/(n-1) normalization).
    pub fn response_variance(&self) -> f64 {
        let n = self.responses.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.responses.iter().sum::<f64>() / n as f64;
        self.responses.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n as f64 - 1.0)
    }
}

// ---------------------------------------------------------------------
// PCE model
// ---------------------------------------------------------------------

/// Role of one augmented dimension, recorded so post-processing can split
/// multi-indices into aleatory and epistemic parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimRole {
    /// Standardized aleatory (auxiliary) variable of one physical input.
    Aleatory { input: usize },
    /// Standardized epistemic hyper-parameter of one physical input.
    Epistemic { input: usize, param: usize },
}

impl DimRole {
    pub fn is_aleatory(self) -> bool {
        matches!(self, DimRole::Aleatory { .. })
    }
}

/// A fitted polynomial chaos expansion over the augmented space.
#[derive(Debug, Clone)]
pub struct PceModel {
    index_set: MultiIndexSet,
    coefficients: Vec<f64>,
    bases: Vec<UnivariateBasis>,
    layout: Vec<DimRole>,
}

impl PceModel {
    pub fn new(
        index_set: MultiIndexSet,
        coefficients: Vec<f64>,
        bases: Vec<UnivariateBasis>,
        layout: Vec<DimRole>,
    ) -> Result<Self> {
        if coefficients.len() != index_set.len() {
            return Err(Error::DimensionMismatch {
                expected: index_set.len(),
                got: coefficients.len(),
            });
        }
        if bases.len() != index_set.dim() || layout.len() != index_set.dim() {
            return Err(Error::DimensionMismatch {
                expected: index_set.dim(),
                got: bases.len().min(layout.len()),
            });
        }
        Ok(Self {
            index_set,
            coefficients,
            bases,
            layout,
        })
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bases(&self) -> &[UnivariateBasis] {
        &self.bases
    }

    pub fn layout(&self) -> &[DimRole] {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.index_set.dim()
    }

    pub fn n_terms(&self) -> usize {
        self.index_set.len()
    }

    /// Expansion mean: the coefficient of the zero multi-index.
    pub fn mean(&self) -> f64 {
        match self.index_set.zero_position() {
            Some(i) => self.coefficients[i],
            None => 0.0,
        }
    }

    /// Expansion variance Σ_{α≠0} a_α² (orthonormal basis).
    pub fn variance(&self) -> f64 {
        self.index_set
            .iter()
            .zip(&self.coefficients)
            .filter(|(alpha, _)| total_degree(alpha) > 0)
            .map(|(_, a)| a * a)
            .sum()
    }

    /// Prediction at a standardized point.
    pub fn predict(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim());
        let tables = self.eval_tables(v);
        self.index_set
            .iter()
            .zip(&self.coefficients)
            .map(|(alpha, &a)| {
                let mut psi = 1.0;
                for (d, &deg) in alpha.iter().enumerate() {
                    if deg > 0 {
                        psi *= tables[d][deg as usize];
                    }
                }
                a * psi
            })
            .sum()
    }

    fn eval_tables(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|d| {
                let max_deg = self.index_set.max_degree_in_dim(d) as usize;
                let mut table = vec![0.0; max_deg + 1];
                self.bases[d].eval_all(max_deg, v[d], &mut table);
                table
            })
            .collect()
    }
}

// ---------------------------------------------------------------------
// Information matrix and OLS
// ---------------------------------------------------------------------

/// Information matrix F with F[i][j] = ψ_j(v⁽ⁱ⁾).
pub fn information_matrix(
    design: &ExperimentalDesign,
    index_set: &MultiIndexSet,
    bases: &[UnivariateBasis],
) -> Result<DMatrix<f64>> {
    if index_set.is_empty() {
        return Err(Error::DomainError("index set is empty".into()));
    }
    if bases.len() != index_set.dim() || design.dim() != index_set.dim() {
        return Err(Error::DimensionMismatch {
            expected: index_set.dim(),
            got: bases.len().min(design.dim()),
        });
    }
    let n = design.n_rows();
    let n_a = index_set.len();
    let max_degs: Vec<usize> = (0..index_set.dim())
        .map(|d| index_set.max_degree_in_dim(d) as usize)
        .collect();
    let mut f = DMatrix::zeros(n, n_a);
    let mut tables: Vec<Vec<f64>> = max_degs.iter().map(|&m| vec![0.0; m + 1]).collect();
    for i in 0..n {
        let v = design.point(i);
        for (d, table) in tables.iter_mut().enumerate() {
            bases[d].eval_all(max_degs[d], v[d], table);
        }
        for (j, alpha) in index_set.iter().enumerate() {
            let mut psi = 1.0;
            for (d, &deg) in alpha.iter().enumerate() {
                if deg > 0 {
                    psi *= tables[d][deg as usize];
                }
            }
            f[(i, j)] = psi;
        }
    }
    Ok(f)
}

/// Ordinary least squares through a rank-revealing column-pivoted QR.
pub fn ols_fit(f: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (n, n_a) = f.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < n_a {
        return Err(Error::RankDeficient(format!(
            "{n} rows cannot determine {n_a} coefficients"
        )));
    }
    let qr = f.clone().col_piv_qr();
    let r = qr.r();
    let diag = r.diagonal();
    let max_diag = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let tol = max_diag * (n.max(n_a) as f64) * f64::EPSILON * 16.0;
    if diag.iter().any(|d| d.abs() <= tol) {
        return Err(Error::RankDeficient(format!(
            "information matrix is numerically rank deficient ({n} rows, {n_a} columns)"
        )));
    }
    // F P = Q R  ⇒  argmin ‖F a - y‖ has a = P · R⁻¹ · Qᵀ y.
    let rhs = DVector::from_column_slice(y);
    let mut z = qr.q().transpose() * rhs;
    for i in (0..n_a).rev() {
        let mut acc = z[i];
        for j in (i + 1)..n_a {
            acc -= r[(i, j)] * z[j];
        }
        z[i] = acc / r[(i, i)];
    }
    qr.p().inv_permute_rows(&mut z);
    Ok(z.iter().copied().collect())
}

// ---------------------------------------------------------------------
// Leave-one-out and generalization errors
// ---------------------------------------------------------------------

/// Plain leave-one-out error of `model` on the design it was fit on,
/// relative to the response variance, via the hat-matrix shortcut.
///
/// Matches explicit N-fold refitting when the model coefficients are the
/// OLS solution on this design.
pub fn loo_error(model: &PceModel, design: &ExperimentalDesign) -> Result<f64> {
    let f = information_matrix(design, model.index_set(), model.bases())?;
    let n = design.n_rows();
    let qr = f.clone().qr();
    let q = qr.q();
    let y = design.responses();
    let coeffs = DVector::from_column_slice(model.coefficients());
    let pred = &f * &coeffs;
    let var_y = design.response_variance();
    if var_y <= 0.0 {
        return Err(Error::DegenerateValidation);
    }
    let mut acc = 0.0;
    for i in 0..n {
        let h: f64 = q.row(i).iter().map(|v| v * v).sum();
        if h >= 1.0 - 1e-12 {
            return Err(Error::DegenerateDesign(format!(
                "hat-matrix diagonal {h} at row {i}"
            )));
        }
        let r = (y[i] - pred[i]) / (1.0 - h);
        acc += r * r;
    }
    Ok(acc / n as f64 / var_y)
}

/// Relative generalization error on an independent validation set:
/// Σ(wᵢ - wᵢ^pred)² / Σ(wᵢ - mean(w))².
pub fn rel_gen_error(
    model: &PceModel,
    validation_points: &[Vec<f64>],
    validation_responses: &[f64],
) -> Result<f64> {
    let n = validation_points.len();
    if n < 2 || validation_responses.len() != n {
        return Err(Error::DomainError(
            "validation set needs at least two matching points".into(),
        ));
    }
    let mean = validation_responses.iter().sum::<f64>() / n as f64;
    let denom: f64 = validation_responses.iter().map(|w| (w - mean) * (w - mean)).sum();
    if denom <= 0.0 {
        return Err(Error::DegenerateValidation);
    }
    let num: f64 = validation_points
        .iter()
        .zip(validation_responses)
        .map(|(v, &w)| {
            let p = model.predict(v);
            (w - p) * (w - p)
        })
        .sum();
    Ok(num / denom)
}

// ---------------------------------------------------------------------
// Hybrid LARS selection
// ---------------------------------------------------------------------

/// Which coefficient computation the pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Hybrid least-angle selection with OLS re-fit, scored by corrected
    /// leave-one-out error.
    Lars,
    /// Plain OLS on the full candidate set.
    Ols,
}

/// Diagnostics of one fit, reported by the CLI.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    /// Maximal total degree of the candidate set that produced the model.
    pub degree: usize,
    /// Hyperbolic truncation exponent.
    pub q: f64,
    /// Candidate set size after the cap.
    pub candidate_size: usize,
    /// Selected (active) terms including the constant.
    pub selected_terms: usize,
    /// Corrected leave-one-out error used for model comparison.
    pub loo_corrected: f64,
    /// Plain leave-one-out error of the returned model.
    pub loo: f64,
}

/// Caps oversized candidate sets: keeps the `5 * n_rows` indices with the
/// smallest (q-norm, total degree) so the selection path stays affordable
/// in high dimension.
pub fn cap_candidates(set: MultiIndexSet, q: f64, n_rows: usize) -> Result<MultiIndexSet> {
    let cap = 5 * n_rows;
    if set.len() <= cap {
        return Ok(set);
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&i, &j| {
        let a = set.get(i);
        let b = set.get(j);
        crate::polynomials::q_norm(a, q)
            .partial_cmp(&crate::polynomials::q_norm(b, q))
            .unwrap()
            .then(total_degree(a).cmp(&total_degree(b)))
            .then_with(|| a.cmp(b))
    });
    order.truncate(cap);
    set.subset(&order)
}

struct LarsInternals {
    selected: Vec<usize>,
    coefficients: Vec<f64>,
    loo_corrected: f64,
    loo_plain: f64,
}

/// Incremental thin QR of the raw active columns; tracks everything the
/// corrected leave-one-out score needs in O(N·k) per appended column.
struct IncrementalQr {
    n: usize,
    q_cols: Vec<Vec<f64>>,
    qty: Vec<f64>,
    hat: Vec<f64>,
    r_inv_cols: Vec<Vec<f64>>,
    r_inv_fro2: f64,
}

impl IncrementalQr {
    fn new(n: usize) -> Self {
        Self {
            n,
            q_cols: Vec::new(),
            qty: Vec::new(),
            hat: vec![0.0; n],
            r_inv_cols: Vec::new(),
            r_inv_fro2: 0.0,
        }
    }

    fn k(&self) -> usize {
        self.q_cols.len()
    }

    /// Appends a raw column; returns false when it is numerically dependent
    /// on the current active span.
    fn push(&mut self, col: &[f64], y: &[f64]) -> bool {
        let mut v = col.to_vec();
        let norm0: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut r_entries = vec![0.0; self.k()];
        // Modified Gram-Schmidt with one re-orthogonalization pass.
        for _ in 0..2 {
            for (j, qj) in self.q_cols.iter().enumerate() {
                let dot: f64 = qj.iter().zip(&v).map(|(a, b)| a * b).sum();
                r_entries[j] += dot;
                for (vi, qi) in v.iter_mut().zip(qj) {
                    *vi -= dot * qi;
                }
            }
        }
        let rho: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rho.is_nan() || rho <= norm0 * 1e-12 {
            return false;
        }
        for vi in &mut v {
            *vi /= rho;
        }
        let qy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
        for (h, qi) in self.hat.iter_mut().zip(&v) {
            *h += qi * qi;
        }
        // Grow R⁻¹: new column is [-R⁻¹ r / ρ; 1/ρ], with R⁻¹ stored
        // column-wise so entry (j, l) lives at r_inv_cols[l][j].
        let k = self.k();
        let mut new_col = vec![0.0; k + 1];
        for (j, item) in new_col.iter_mut().enumerate().take(k) {
            let mut acc = 0.0;
            for (l, ri_col) in self.r_inv_cols.iter().enumerate() {
                if j <= l {
                    acc += ri_col[j] * r_entries[l];
                }
            }
            *item = -acc / rho;
        }
        new_col[k] = 1.0 / rho;
        self.r_inv_fro2 += new_col.iter().map(|x| x * x).sum::<f64>();
        self.r_inv_cols.push(new_col);
        self.q_cols.push(v);
        self.qty.push(qy);
        true
    }

    /// Residual vector y - Q Qᵀ y.
    fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut r = y.to_vec();
        for (qj, &c) in self.q_cols.iter().zip(&self.qty) {
            for (ri, qi) in r.iter_mut().zip(qj) {
                *ri -= c * qi;
            }
        }
        r
    }

    /// Plain and corrected LOO of the current active OLS fit.
    fn loo(&self, y: &[f64], var_y: f64) -> Option<(f64, f64)> {
        let n = self.n;
        let p = self.k();
        if n <= p + 1 {
            return None;
        }
        let res = self.residual(y);
        let mut acc = 0.0;
        for i in 0..n {
            let h = self.hat[i];
            if h >= 1.0 - 1e-12 {
                return None;
            }
            let r = res[i] / (1.0 - h);
            acc += r * r;
        }
        let plain = acc / n as f64 / var_y;
        let t = n as f64 / (n as f64 - p as f64) * (1.0 + self.r_inv_fro2);
        Some((plain, plain * t))
    }
}

fn lars_internals(
    f_raw: &DMatrix<f64>,
    y: &[f64],
    var_y: f64,
    zero_pos: usize,
) -> Result<LarsInternals> {
    let (n, n_a) = f_raw.shape();
    let n_pred = n_a - 1;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    // Center and normalize predictors (all columns except the constant).
    let pred_cols: Vec<usize> = (0..n_a).filter(|&j| j != zero_pos).collect();
    let mut x = DMatrix::zeros(n, n_pred);
    let mut usable = vec![true; n_pred];
    for (jj, &j) in pred_cols.iter().enumerate() {
        let col = f_raw.column(j);
        let mean = col.sum() / n as f64;
        let mut norm2 = 0.0;
        for i in 0..n {
            let v = col[i] - mean;
            x[(i, jj)] = v;
            norm2 += v * v;
        }
        let norm = norm2.sqrt();
        if norm <= 1e-12 * (n as f64).sqrt() {
            usable[jj] = false;
        } else {
            for i in 0..n {
                x[(i, jj)] /= norm;
            }
        }
    }

    // Path bookkeeping.
    let max_active = n_pred.min(n.saturating_sub(2));
    let mut residual = yc.clone();
    let mut c: Vec<f64> = (0..n_pred)
        .map(|j| {
            if usable[j] {
                x.column(j).iter().zip(&residual).map(|(a, b)| a * b).sum()
            } else {
                0.0
            }
        })
        .collect();
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; n_pred];
    let mut gram: Vec<Vec<f64>> = Vec::new();
    let mut chol: Vec<Vec<f64>> = Vec::new();

    // Hybrid scoring state.
    let mut qr = IncrementalQr::new(n);
    let ones = vec![1.0; n];
    if !qr.push(&ones, y) {
        return Err(Error::DegenerateDesign("constant column is zero".into()));
    }
    struct PathPoint {
        active: Vec<usize>,
        loo_plain: f64,
        loo_corrected: f64,
    }
    let mut path: Vec<PathPoint> = Vec::new();
    if let Some((plain, corrected)) = qr.loo(y, var_y) {
        path.push(PathPoint {
            active: Vec::new(),
            loo_plain: plain,
            loo_corrected: corrected,
        });
    }

    let c0 = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let loo_floor = 1e-16;
    let patience = 30usize;
    let mut best_loo = path.first().map(|p| p.loo_corrected).unwrap_or(f64::INFINITY);
    let mut since_best = 0usize;

    while active.len() < max_active {
        // Entering predictor: largest absolute correlation among inactive,
        // ties broken toward the lowest graded-lex candidate (lower jj).
        let mut c_max = 0.0f64;
        let mut enter = None;
        for j in 0..n_pred {
            if !in_active[j] && usable[j] {
                let a = c[j].abs();
                if a > c_max * (1.0 + 1e-12) {
                    c_max = a;
                    enter = Some(j);
                }
            }
        }
        let Some(enter) = enter else { break };
        if c_max <= 1e-12 * c0.max(1e-300) {
            break;
        }

        // Grow the active Gram and its Cholesky factor.
        let g_new: Vec<f64> = active
            .iter()
            .map(|&a| x.column(a).dot(&x.column(enter)))
            .collect();
        let g_diag = 1.0; // normalized columns
        let k = active.len();
        let mut l_row = vec![0.0; k];
        for i in 0..k {
            let mut s = g_new[i];
            for l in 0..i {
                s -= chol[i][l] * l_row[l];
            }
            l_row[i] = s / chol[i][i];
        }
        let d2 = g_diag - l_row.iter().map(|v| v * v).sum::<f64>();
        if d2 <= 1e-10 {
            // New column numerically dependent on the active span.
            in_active[enter] = true; // never consider it again
            continue;
        }
        l_row.push(d2.sqrt());
        chol.push(l_row);
        for (i, g) in g_new.iter().enumerate() {
            gram[i].push(*g);
        }
        let mut new_gram_row = g_new.clone();
        new_gram_row.push(g_diag);
        gram.push(new_gram_row);
        active.push(enter);
        in_active[enter] = true;

        // Equiangular direction: w = A · G⁻¹ s, u = X_A w.
        let k = active.len();
        let s: Vec<f64> = active.iter().map(|&j| c[j].signum()).collect();
        // Solve G z = s via the Cholesky factor.
        let mut z = vec![0.0; k];
        for i in 0..k {
            let mut acc = s[i];
            for l in 0..i {
                acc -= chol[i][l] * z[l];
            }
            z[i] = acc / chol[i][i];
        }
        for i in (0..k).rev() {
            let mut acc = z[i];
            for l in (i + 1)..k {
                acc -= chol[l][i] * z[l];
            }
            z[i] = acc / chol[i][i];
        }
        let sz: f64 = s.iter().zip(&z).map(|(a, b)| a * b).sum();
        if sz <= 0.0 {
            break;
        }
        let a_norm = 1.0 / sz.sqrt();
        let w: Vec<f64> = z.iter().map(|v| v * a_norm).collect();
        let mut u = vec![0.0; n];
        for (idx, &j) in active.iter().enumerate() {
            let col = x.column(j);
            for i in 0..n {
                u[i] += w[idx] * col[i];
            }
        }
        // a = Xᵀ u for all predictors.
        let mut a_corr = vec![0.0; n_pred];
        for j in 0..n_pred {
            if usable[j] {
                a_corr[j] = x.column(j).iter().zip(&u).map(|(p, q)| p * q).sum();
            }
        }

        // Step length to the next equi-correlation event.
        let c_max_now = active.iter().map(|&j| c[j].abs()).fold(0.0f64, f64::max);
        let mut gamma = c_max_now / a_norm; // full OLS jump if nothing intervenes
        for j in 0..n_pred {
            if in_active[j] || !usable[j] {
                continue;
            }
            for &g in &[
                (c_max_now - c[j]) / (a_norm - a_corr[j]),
                (c_max_now + c[j]) / (a_norm + a_corr[j]),
            ] {
                if g > 1e-14 && g < gamma {
                    gamma = g;
                }
            }
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            break;
        }
        for i in 0..n {
            residual[i] -= gamma * u[i];
        }
        for j in 0..n_pred {
            if usable[j] {
                c[j] -= gamma * a_corr[j];
            }
        }

        // Hybrid scoring: OLS on the raw active columns.
        let raw_col: Vec<f64> = (0..n).map(|i| f_raw[(i, pred_cols[enter])]).collect();
        if !qr.push(&raw_col, y) {
            break;
        }
        if let Some((plain, corrected)) = qr.loo(y, var_y) {
            path.push(PathPoint {
                active: active.clone(),
                loo_plain: plain,
                loo_corrected: corrected,
            });
            if corrected < best_loo {
                best_loo = corrected;
                since_best = 0;
            } else {
                since_best += 1;
            }
            if best_loo < loo_floor || since_best > patience {
                break;
            }
        } else {
            break;
        }
    }

    if path.is_empty() {
        return Err(Error::DegenerateDesign(
            "no admissible point on the selection path".into(),
        ));
    }

    // Smallest active set within tolerance of the best corrected LOO.
    let best = path
        .iter()
        .map(|p| p.loo_corrected)
        .fold(f64::INFINITY, f64::min);
    let tol = best.max(0.0) * 1e-8 + 1e-14;
    let chosen = path
        .iter()
        .find(|p| p.loo_corrected <= best + tol)
        .expect("path is non-empty");

    // Final OLS re-fit on the selected raw columns (constant first).
    let mut selected: Vec<usize> = vec![zero_pos];
    selected.extend(chosen.active.iter().map(|&j| pred_cols[j]));
    let coeffs = refit(f_raw, y, &selected)?;

    // Prune numerically-zero terms (keep the constant) and re-fit once.
    let scale: f64 = coeffs.iter().map(|a| a * a).sum::<f64>().sqrt();
    let keep: Vec<usize> = selected
        .iter()
        .zip(&coeffs)
        .filter(|(&j, &a)| j == zero_pos || a.abs() > 1e-10 * scale)
        .map(|(&j, _)| j)
        .collect();
    let (selected, coeffs) = if keep.len() < selected.len() {
        let c = refit(f_raw, y, &keep)?;
        (keep, c)
    } else {
        (selected, coeffs)
    };

    Ok(LarsInternals {
        selected,
        coefficients: coeffs,
        loo_corrected: chosen.loo_corrected,
        loo_plain: chosen.loo_plain,
    })
}

fn refit(f_raw: &DMatrix<f64>, y: &[f64], selected: &[usize]) -> Result<Vec<f64>> {
    let n = f_raw.nrows();
    let mut f_sel = DMatrix::zeros(n, selected.len());
    for (jj, &j) in selected.iter().enumerate() {
        f_sel.set_column(jj, &f_raw.column(j));
    }
    ols_fit(&f_sel, y)
}

/// Hybrid LARS selection over a candidate set, scored by corrected
/// leave-one-out error, with final coefficients re-fit by OLS.
pub fn lars_select(
    design: &ExperimentalDesign,
    candidate_set: &MultiIndexSet,
    bases: &[UnivariateBasis],
    layout: &[DimRole],
) -> Result<PceModel> {
    lars_select_with_diagnostics(design, candidate_set, bases, layout).map(|(m, _)| m)
}

/// As [`lars_select`] but also returns fit diagnostics.
pub fn lars_select_with_diagnostics(
    design: &ExperimentalDesign,
    candidate_set: &MultiIndexSet,
    bases: &[UnivariateBasis],
    layout: &[DimRole],
) -> Result<(PceModel, FitDiagnostics)> {
    let zero_pos = candidate_set.zero_position().ok_or_else(|| {
        Error::DomainError("candidate set must contain the zero multi-index".into())
    })?;
    let var_y = design.response_variance();
    if var_y <= 0.0 {
        // Constant response: the constant-only model is exact.
        let set = candidate_set.subset(&[zero_pos])?;
        let mean = design.responses().iter().sum::<f64>() / design.n_rows() as f64;
        let model = PceModel::new(set, vec![mean], bases.to_vec(), layout.to_vec())?;
        let diag = FitDiagnostics {
            degree: 0,
            q: 1.0,
            candidate_size: candidate_set.len(),
            selected_terms: 1,
            loo_corrected: 0.0,
            loo: 0.0,
        };
        return Ok((model, diag));
    }

    let f_raw = information_matrix(design, candidate_set, bases)?;
    let internals = lars_internals(&f_raw, design.responses(), var_y, zero_pos)?;

    let set = candidate_set.subset(&internals.selected)?;
    // subset() re-sorts graded-lexicographically; realign the coefficients.
    let mut coeff_by_alpha: Vec<(MultiIndexSetKey, f64)> = internals
        .selected
        .iter()
        .zip(&internals.coefficients)
        .map(|(&j, &a)| (candidate_set.get(j).clone(), a))
        .collect();
    coeff_by_alpha.sort_by(|a, b| crate::polynomials::graded_lex_cmp(&a.0, &b.0));
    let coefficients: Vec<f64> = coeff_by_alpha.into_iter().map(|(_, a)| a).collect();

    let max_degree = set
        .iter()
        .map(|a| total_degree(a))
        .max()
        .unwrap_or(0) as usize;
    let n_selected = set.len();
    let model = PceModel::new(set, coefficients, bases.to_vec(), layout.to_vec())?;
    let diag = FitDiagnostics {
        degree: max_degree,
        q: 1.0,
        candidate_size: candidate_set.len(),
        selected_terms: n_selected,
        loo_corrected: internals.loo_corrected,
        loo: internals.loo_plain,
    };
    Ok((model, diag))
}

type MultiIndexSetKey = Vec<u32>;

/// OLS on the full candidate set (no selection).
pub fn ols_select_with_diagnostics(
    design: &ExperimentalDesign,
    candidate_set: &MultiIndexSet,
    bases: &[UnivariateBasis],
    layout: &[DimRole],
) -> Result<(PceModel, FitDiagnostics)> {
    let f = information_matrix(design, candidate_set, bases)?;
    let coefficients = ols_fit(&f, design.responses())?;
    let max_degree = candidate_set
        .iter()
        .map(|a| total_degree(a))
        .max()
        .unwrap_or(0) as usize;
    let model = PceModel::new(
        candidate_set.clone(),
        coefficients,
        bases.to_vec(),
        layout.to_vec(),
    )?;
    let loo = loo_error(&model, design)?;
    let diag = FitDiagnostics {
        degree: max_degree,
        q: 1.0,
        candidate_size: candidate_set.len(),
        selected_terms: candidate_set.len(),
        loo_corrected: loo,
        loo,
    };
    Ok((model, diag))
}

/// Degree-adaptive fit: runs the selected scheme for p = 1..p_max and
/// returns the model with the smallest corrected leave-one-out error,
/// stopping early after two consecutive degradations.
pub fn degree_adaptive_fit(
    design: &ExperimentalDesign,
    bases: &[UnivariateBasis],
    layout: &[DimRole],
    p_max: usize,
    q: f64,
    selection: Selection,
) -> Result<(PceModel, FitDiagnostics)> {
    if p_max < 1 {
        return Err(Error::DomainError("p_max must be at least 1".into()));
    }
    let m = design.dim();
    let mut best: Option<(PceModel, FitDiagnostics)> = None;
    let mut degradations = 0;
    let mut prev_candidate_len = 0usize;
    let mut prev_loo = f64::INFINITY;
    for p in 1..=p_max {
        let candidate = cap_candidates(hyperbolic_index_set(m, p, q)?, q, design.n_rows())?;
        if candidate.len() == prev_candidate_len {
            // q-truncation added nothing at this degree.
            continue;
        }
        prev_candidate_len = candidate.len();
        let result = match selection {
            Selection::Lars => lars_select_with_diagnostics(design, &candidate, bases, layout),
            Selection::Ols => ols_select_with_diagnostics(design, &candidate, bases, layout),
        };
        let (model, mut diag) = match result {
            Ok(x) => x,
            Err(Error::RankDeficient(_)) if selection == Selection::Ols && p > 1 => break,
            Err(e) => return Err(e),
        };
        diag.degree = p;
        diag.q = q;
        let score = diag.loo_corrected;
        if best.as_ref().is_none_or(|(_, b)| score < b.loo_corrected) {
            best = Some((model, diag));
        }
        if score >= prev_loo {
            degradations += 1;
            if degradations >= 2 {
                break;
            }
        } else {
            degradations = 0;
        }
        prev_loo = score;
        if best.as_ref().is_some_and(|(_, b)| b.loo_corrected < 1e-16) {
            break;
        }
    }
    best.ok_or_else(|| Error::DegenerateDesign("no degree produced a valid fit".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomials::MultiIndexSet;
    use rand::Rng;

    fn hermite_bases(m: usize) -> Vec<UnivariateBasis> {
        (0..m).map(|_| UnivariateBasis::hermite_probabilist()).collect()
    }

    fn aleatory_layout(m: usize) -> Vec<DimRole> {
        (0..m).map(|i| DimRole::Aleatory { input: i }).collect()
    }

    /// Standard-normal LHS sample, good enough for regression tests.
    fn normal_lhs(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = crate::seeding::stream(seed, 0xfeed);
        let mut points = vec![vec![0.0; m]; n];
        for d in 0..m {
            let mut strata: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            strata.shuffle(&mut rng);
            for (i, &s) in strata.iter().enumerate() {
                let u = (s as f64 + rng.gen::<f64>()) / n as f64;
                points[i][d] =
                    crate::distributions::std_normal_quantile(u.clamp(1e-12, 1.0 - 1e-12)).unwrap();
            }
        }
        points
    }

    fn design_from(points: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> ExperimentalDesign {
        let responses: Vec<f64> = points.iter().map(|p| f(p)).collect();
        let ids: Vec<usize> = (0..points.len()).collect();
        ExperimentalDesign::new(points, responses, ids).unwrap()
    }

    #[test]
    fn information_matrix_examples() {
        let design = ExperimentalDesign::new(
            vec![vec![-1.0], vec![0.0], vec![1.0]],
            vec![0.0, 0.0, 0.0],
            vec![0, 1, 2],
        )
        .unwrap();
        let set = MultiIndexSet::new(1, vec![vec![0], vec![1], vec![2]]).unwrap();
        let f = information_matrix(&design, &set, &hermite_bases(1)).unwrap();
        // Zero multi-index column is all ones.
        for i in 0..3 {
            assert!((f[(i, 0)] - 1.0).abs() < 1e-15);
        }
        // He_1(x) = x.
        assert_eq!(f[(0, 1)], -1.0);
        assert_eq!(f[(1, 1)], 0.0);
        assert_eq!(f[(2, 1)], 1.0);
        // He_2(0)/√2 = -1/√2.
        assert!((f[(1, 2)] + 1.0 / 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ols_identity_matrix() {
        let f = DMatrix::identity(4, 4);
        let y = [3.0, -1.0, 0.5, 2.0];
        let a = ols_fit(&f, &y).unwrap();
        for (ai, yi) in a.iter().zip(&y) {
            assert!((ai - yi).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_exact_interpolation_residual() {
        let points = normal_lhs(60, 2, 7);
        let design = design_from(points, |x| 1.5 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        let set = hyperbolic_index_set(2, 2, 1.0).unwrap();
        let f = information_matrix(&design, &set, &hermite_bases(2)).unwrap();
        let a = ols_fit(&f, design.responses()).unwrap();
        let pred = &f * DVector::from_column_slice(&a);
        let y_norm: f64 = design.responses().iter().map(|v| v * v).sum::<f64>().sqrt();
        let res_norm: f64 = design
            .responses()
            .iter()
            .enumerate()
            .map(|(i, y)| (y - pred[i]) * (y - pred[i]))
            .sum::<f64>()
            .sqrt();
        assert!(res_norm < 1e-10 * y_norm);
    }

    #[test]
    fn ols_recovers_product_coefficient() {
        // y = x1·x2 on 50 Gaussian LHS points with a p = 2 Hermite basis:
        // the (1,1) coefficient is 1, everything else 0.
        let points = normal_lhs(50, 2, 42);
        let design = design_from(points, |x| x[0] * x[1]);
        let set = hyperbolic_index_set(2, 2, 1.0).unwrap();
        let f = information_matrix(&design, &set, &hermite_bases(2)).unwrap();
        let a = ols_fit(&f, design.responses()).unwrap();
        for (alpha, &coeff) in set.iter().zip(&a) {
            let expected = if alpha == &vec![1u32, 1] { 1.0 } else { 0.0 };
            assert!(
                (coeff - expected).abs() < 1e-8,
                "alpha {alpha:?}: {coeff} vs {expected}"
            );
        }
    }

    #[test]
    fn ols_rank_deficient_detected() {
        let mut f = DMatrix::zeros(5, 3);
        for i in 0..5 {
            f[(i, 0)] = 1.0;
            f[(i, 1)] = i as f64;
            f[(i, 2)] = 2.0 * i as f64; // dependent column
        }
        assert!(matches!(
            ols_fit(&f, &[0.0; 5]),
            Err(Error::RankDeficient(_))
        ));
        // Under-determined: fewer rows than columns.
        let f2 = DMatrix::zeros(2, 3);
        assert!(matches!(ols_fit(&f2, &[0.0; 2]), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn lars_selects_single_linear_term() {
        let points = normal_lhs(40, 3, 3);
        let design = design_from(points, |x| x[0]);
        let candidate = hyperbolic_index_set(3, 3, 1.0).unwrap();
        let model = lars_select(&design, &candidate, &hermite_bases(3), &aleatory_layout(3)).unwrap();
        let mut expected = vec![vec![0u32, 0, 0], vec![1, 0, 0]];
        expected.sort();
        let mut got: Vec<Vec<u32>> = model.index_set().indices().to_vec();
        got.sort();
        assert_eq!(got, expected);
        assert!(loo_error(&model, &design).unwrap() < 1e-10);
    }

    #[test]
    fn degree_adaptive_quadratic_target() {
        let points = normal_lhs(80, 2, 11);
        let design = design_from(points, |x| 0.3 + x[0] * x[0] - 2.0 * x[1]);
        let (model, diag) = degree_adaptive_fit(
            &design,
            &hermite_bases(2),
            &aleatory_layout(2),
            6,
            1.0,
            Selection::Lars,
        )
        .unwrap();
        assert!(diag.degree >= 2);
        assert!(diag.loo < 1e-10, "loo = {}", diag.loo);
        // Mean of 0.3 + x² - 2y with x, y ~ N(0,1) is 1.3.
        assert!((model.mean() - 1.3).abs() < 1e-8);
        // Monotone improvement against the degree-1 fit.
        let candidate1 = hyperbolic_index_set(2, 1, 1.0).unwrap();
        let (_, diag1) = lars_select_with_diagnostics(
            &design,
            &candidate1,
            &hermite_bases(2),
            &aleatory_layout(2),
        )
        .unwrap();
        assert!(diag.loo_corrected <= diag1.loo_corrected);
    }

    #[test]
    fn loo_matches_explicit_refit() {
        // 20-point problem, quadratic basis: the hat-matrix shortcut must
        // agree with brute-force leave-one-out refitting.
        let points = normal_lhs(20, 1, 5);
        let design = design_from(points.clone(), |x| (0.5 * x[0]).sin() + x[0]);
        let set = hyperbolic_index_set(1, 2, 1.0).unwrap();
        let bases = hermite_bases(1);
        let f = information_matrix(&design, &set, &bases).unwrap();
        let a = ols_fit(&f, design.responses()).unwrap();
        let model = PceModel::new(set.clone(), a, bases.clone(), aleatory_layout(1)).unwrap();
        let fast = loo_error(&model, &design).unwrap();

        // Brute force: refit N times leaving one row out.
        let n = design.n_rows();
        let mut acc = 0.0;
        for leave in 0..n {
            let rows: Vec<usize> = (0..n).filter(|&i| i != leave).collect();
            let mut f_sub = DMatrix::zeros(n - 1, set.len());
            let mut y_sub = Vec::with_capacity(n - 1);
            for (r, &i) in rows.iter().enumerate() {
                for j in 0..set.len() {
                    f_sub[(r, j)] = f[(i, j)];
                }
                y_sub.push(design.responses()[i]);
            }
            let a_sub = ols_fit(&f_sub, &y_sub).unwrap();
            let pred: f64 = (0..set.len()).map(|j| a_sub[j] * f[(leave, j)]).sum();
            let d = design.responses()[leave] - pred;
            acc += d * d;
        }
        let brute = acc / n as f64 / design.response_variance();
        assert!(
            (fast - brute).abs() < 1e-8 * brute.max(1.0),
            "fast {fast} vs brute {brute}"
        );
    }

    #[test]
    fn loo_constant_model_near_one() {
        let points = normal_lhs(50, 1, 9);
        let design = design_from(points, |x| 2.0 * x[0]);
        let set = MultiIndexSet::new(1, vec![vec![0]]).unwrap();
        let f = information_matrix(&design, &set, &hermite_bases(1)).unwrap();
        let a = ols_fit(&f, design.responses()).unwrap();
        let model = PceModel::new(set, a, hermite_bases(1), aleatory_layout(1)).unwrap();
        let loo = loo_error(&model, &design).unwrap();
        assert!((loo - 1.0).abs() < 0.15, "loo = {loo}");
    }

    #[test]
    fn rel_gen_error_trivial_cases() {
        let points = normal_lhs(60, 2, 13);
        let design = design_from(points.clone(), |x| x[0] + x[1]);
        let set = hyperbolic_index_set(2, 1, 1.0).unwrap();
        let f = information_matrix(&design, &set, &hermite_bases(2)).unwrap();
        let a = ols_fit(&f, design.responses()).unwrap();
        let model = PceModel::new(set, a, hermite_bases(2), aleatory_layout(2)).unwrap();

        let val_points = normal_lhs(500, 2, 17);
        let val_resp: Vec<f64> = val_points.iter().map(|p| p[0] + p[1]).collect();
        // Model ≡ truth → 0.
        let e = rel_gen_error(&model, &val_points, &val_resp).unwrap();
        assert!(e < 1e-20, "err = {e}");

        // Mean predictor → 1.
        let mean = val_resp.iter().sum::<f64>() / val_resp.len() as f64;
        let const_set = MultiIndexSet::new(2, vec![vec![0, 0]]).unwrap();
        let const_model =
            PceModel::new(const_set, vec![mean], hermite_bases(2), aleatory_layout(2)).unwrap();
        let e1 = rel_gen_error(&const_model, &val_points, &val_resp).unwrap();
        assert!((e1 - 1.0).abs() < 1e-12);

        // Degenerate validation set.
        assert!(matches!(
            rel_gen_error(&model, &val_points, &vec![1.0; 500]),
            Err(Error::DegenerateValidation)
        ));
    }

    #[test]
    fn variance_identity_monte_carlo() {
        let points = normal_lhs(200, 2, 21);
        let design = design_from(points, |x| 1.0 + x[0] + 0.5 * x[1] + 0.25 * x[0] * x[1]);
        let candidate = hyperbolic_index_set(2, 2, 1.0).unwrap();
        let model =
            lars_select(&design, &candidate, &hermite_bases(2), &aleatory_layout(2)).unwrap();
        let analytic = model.variance();
        let mut rng = crate::seeding::stream(99, 0xabc);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let v = [
                crate::distributions::std_normal_quantile(rng.gen_range(1e-12..1.0 - 1e-12))
                    .unwrap(),
                crate::distributions::std_normal_quantile(rng.gen_range(1e-12..1.0 - 1e-12))
                    .unwrap(),
            ];
            let p = model.predict(&v);
            sum += p;
            sum2 += p * p;
        }
        let empirical = sum2 / n as f64 - (sum / n as f64).powi(2);
        assert!(
            (empirical - analytic).abs() < 0.01 * analytic,
            "empirical {empirical} vs analytic {analytic}"
        );
    }

    #[test]
    fn ols_optimality_under_perturbation() {
        let points = normal_lhs(50, 2, 31);
        let design = design_from(points, |x| x[0] - 0.3 * x[1] + 0.1);
        let set = hyperbolic_index_set(2, 2, 1.0).unwrap();
        let bases = hermite_bases(2);
        let f = information_matrix(&design, &set, &bases).unwrap();
        let a = ols_fit(&f, design.responses()).unwrap();
        let mse = |coeffs: &[f64]| -> f64 {
            let pred = &f * DVector::from_column_slice(coeffs);
            design
                .responses()
                .iter()
                .enumerate()
                .map(|(i, y)| (y - pred[i]) * (y - pred[i]))
                .sum::<f64>()
        };
        let base = mse(&a);
        for j in 0..a.len() {
            for delta in [-1e-3, 1e-3] {
                let mut perturbed = a.clone();
                perturbed[j] += delta;
                assert!(mse(&perturbed) >= base - 1e-12);
            }
        }
    }

    #[test]
    fn lars_deterministic() {
        let points = normal_lhs(100, 3, 55);
        let design = design_from(points, |x| x[0] * x[1] + 0.2 * x[2] + (0.3 * x[0]).sin());
        let candidate = hyperbolic_index_set(3, 4, 0.75).unwrap();
        let m1 = lars_select(&design, &candidate, &hermite_bases(3), &aleatory_layout(3)).unwrap();
        let m2 = lars_select(&design, &candidate, &hermite_bases(3), &aleatory_layout(3)).unwrap();
        assert_eq!(m1.index_set().indices(), m2.index_set().indices());
        for (a, b) in m1.coefficients().iter().zip(m2.coefficients()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Sparsity bound.
        assert!(m1.n_terms() <= design.n_rows().min(candidate.len()));
    }

    #[test]
    fn response_sharing_enforced() {
        let bad = ExperimentalDesign::new(
            vec![vec![0.0], vec![1.0]],
            vec![1.0, 2.0],
            vec![7, 7],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn cap_candidates_prefers_small_q_norm() {
        let set = hyperbolic_index_set(6, 5, 1.0).unwrap();
        let capped = cap_candidates(set.clone(), 1.0, 10).unwrap();
        assert_eq!(capped.len(), 50);
        assert_eq!(capped.zero_position(), Some(0));
        // Everything kept has q-norm no larger than anything dropped.
        let kept_max = capped
            .iter()
            .map(|a| crate::polynomials::q_norm(a, 1.0))
            .fold(0.0f64, f64::max);
        let dropped_min = set
            .iter()
            .filter(|a| !capped.indices().contains(*a))
            .map(|a| crate::polynomials::q_norm(a, 1.0))
            .fold(f64::INFINITY, f64::min);
        assert!(kept_max <= dropped_min + 1e-12);
    }
}
