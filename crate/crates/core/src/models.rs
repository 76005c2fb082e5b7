//! Testbed computational models and a small linear bar-truss finite
//! element solver, plus the registry that maps CLI names to evaluators.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

type ModelFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// A deterministic scalar-output computational model with an evaluation
/// counter for cost accounting.
#[derive(Clone)]
pub struct TestModel {
    name: String,
    input_dim: usize,
    description: String,
    evaluate: ModelFn,
    evals: Arc<AtomicU64>,
}

impl std::fmt::Debug for TestModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestModel")
            .field("name", &self.name)
            .field("input_dim", &self.input_dim)
            .field("evals", &self.eval_count())
            .finish()
    }
}

impl TestModel {
    pub fn new(
        name: impl Into<String>,
        input_dim: usize,
        description: impl Into<String>,
        evaluate: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            input_dim,
            description: description.into(),
            evaluate: Arc::new(evaluate),
            evals: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.evaluate)(x)
    }

    /// Total model evaluations since construction (or the last reset).
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }
}

/// Product function f1(x) = x1·x2.
pub fn f1(x: &[f64]) -> f64 {
    x[0] * x[1]
}

/// Non-linear undamped single-degree-of-freedom oscillator:
/// 3r - |2F1/(mω₀²)·sin(ω₀t1/2)| with ω₀ = √((c1+c2)/m).
pub fn sdof(r: f64, f1: f64, t1: f64, c1: f64, c2: f64, m: f64) -> Result<f64> {
    if m <= 0.0 {
        return Err(Error::InvalidParams(format!("sdof requires m > 0, got {m}")));
    }
    if c1 + c2 <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "sdof requires c1 + c2 > 0, got {}",
            c1 + c2
        )));
    }
    let omega0 = ((c1 + c2) / m).sqrt();
    Ok(3.0 * r - (2.0 * f1 / (m * omega0 * omega0) * (omega0 * t1 / 2.0).sin()).abs())
}

// ---------------------------------------------------------------------
// Linear bar-truss finite element solver
// ---------------------------------------------------------------------

/// One pin-jointed bar element.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrussElement {
    /// Node indices (0-based).
    pub nodes: [usize; 2],
    /// Cross-section area in m².
    pub area: f64,
    /// Young's modulus in Pa.
    pub modulus: f64,
}

/// Fixed degrees of freedom at one node.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrussSupport {
    pub node: usize,
    pub fix_x: bool,
    pub fix_y: bool,
}

/// Where one external load is applied and in which direction.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrussLoadPoint {
    pub node: usize,
    /// Unit direction of the load; magnitudes come from the load vector.
    pub direction: [f64; 2],
}

/// Monitored output degree of freedom.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrussOutput {
    pub node: usize,
    /// "x" or "y".
    pub component: String,
}

/// A 2D pin-jointed truss: geometry, sections, supports, load points, and
/// the monitored deflection.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrussDefinition {
    /// Node coordinates in meters.
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<TrussElement>,
    pub supports: Vec<TrussSupport>,
    pub loads: Vec<TrussLoadPoint>,
    pub output: TrussOutput,
}

impl TrussDefinition {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read truss file {path:?}: {e}")))?;
        let def: TrussDefinition = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid truss definition {path:?}: {e}")))?;
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for e in &self.elements {
            if e.nodes[0] >= n || e.nodes[1] >= n || e.nodes[0] == e.nodes[1] {
                return Err(Error::Config(format!("element references bad nodes {:?}", e.nodes)));
            }
            if e.area <= 0.0 || e.modulus <= 0.0 {
                return Err(Error::Config("element area and modulus must be positive".into()));
            }
            let (a, b) = (self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]);
            let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            if len <= 0.0 {
                return Err(Error::Config("zero-length element".into()));
            }
        }
        for s in &self.supports {
            if s.node >= n {
                return Err(Error::Config(format!("support references bad node {}", s.node)));
            }
        }
        for l in &self.loads {
            if l.node >= n {
                return Err(Error::Config(format!("load references bad node {}", l.node)));
            }
        }
        if self.output.node >= n || !matches!(self.output.component.as_str(), "x" | "y") {
            return Err(Error::Config("invalid output degree of freedom".into()));
        }
        Ok(())
    }

    fn output_dof(&self) -> usize {
        2 * self.output.node + usize::from(self.output.component == "y")
    }

    /// Assembles the global stiffness matrix (no supports applied).
    fn stiffness(&self) -> DMatrix<f64> {
        let ndof = 2 * self.nodes.len();
        let mut k = DMatrix::zeros(ndof, ndof);
        for e in &self.elements {
            let (a, b) = (self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dy * dy).sqrt();
            let (c, s) = (dx / len, dy / len);
            let stiff = e.modulus * e.area / len;
            let local = [
                [c * c, c * s, -c * c, -c * s],
                [c * s, s * s, -c * s, -s * s],
                [-c * c, -c * s, c * c, c * s],
                [-c * s, -s * s, c * s, s * s],
            ];
            let dofs = [
                2 * e.nodes[0],
                2 * e.nodes[0] + 1,
                2 * e.nodes[1],
                2 * e.nodes[1] + 1,
            ];
            for (i, &di) in dofs.iter().enumerate() {
                for (j, &dj) in dofs.iter().enumerate() {
                    k[(di, dj)] += stiff * local[i][j];
                }
            }
        }
        k
    }

    fn fixed_dofs(&self) -> Vec<bool> {
        let mut fixed = vec![false; 2 * self.nodes.len()];
        for s in &self.supports {
            if s.fix_x {
                fixed[2 * s.node] = true;
            }
            if s.fix_y {
                fixed[2 * s.node + 1] = true;
            }
        }
        fixed
    }

    /// Global force vector (N) for load magnitudes given in kN.
    fn force_vector(&self, loads_kn: &[f64]) -> Result<Vec<f64>> {
        if loads_kn.len() != self.loads.len() {
            return Err(Error::DimensionMismatch {
                expected: self.loads.len(),
                got: loads_kn.len(),
            });
        }
        let mut f = vec![0.0; 2 * self.nodes.len()];
        for (lp, &p) in self.loads.iter().zip(loads_kn) {
            f[2 * lp.node] += 1000.0 * p * lp.direction[0];
            f[2 * lp.node + 1] += 1000.0 * p * lp.direction[1];
        }
        Ok(f)
    }

    /// Full displacement solution (m) under the given load magnitudes.
    pub fn solve(&self, loads_kn: &[f64]) -> Result<Vec<f64>> {
        let k = self.stiffness();
        let fixed = self.fixed_dofs();
        let f = self.force_vector(loads_kn)?;
        let free: Vec<usize> = (0..fixed.len()).filter(|&d| !fixed[d]).collect();
        let nf = free.len();
        let mut k_red = DMatrix::zeros(nf, nf);
        let mut f_red = nalgebra::DVector::zeros(nf);
        for (i, &di) in free.iter().enumerate() {
            f_red[i] = f[di];
            for (j, &dj) in free.iter().enumerate() {
                k_red[(i, j)] = k[(di, dj)];
            }
        }
        let lu = k_red.lu();
        let u_red = lu
            .solve(&f_red)
            .ok_or_else(|| Error::SingularStiffness("reduced system has no solution".into()))?;
        if u_red.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularStiffness("non-finite displacements".into()));
        }
        let mut u = vec![0.0; fixed.len()];
        for (i, &di) in free.iter().enumerate() {
            u[di] = u_red[i];
        }
        Ok(u)
    }

    /// Reaction forces at all DOFs: K·u - f_applied (non-zero only at
    /// supports, up to rounding).
    pub fn reactions(&self, loads_kn: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let k = self.stiffness();
        let f = self.force_vector(loads_kn)?;
        let uv = nalgebra::DVector::from_column_slice(u);
        let r = k * uv;
        Ok((0..f.len()).map(|d| r[d] - f[d]).collect())
    }
}

/// Monitored deflection (m) of the truss under load magnitudes in kN.
pub fn truss_deflection(def: &TrussDefinition, loads_kn: &[f64]) -> Result<f64> {
    let u = def.solve(loads_kn)?;
    Ok(u[def.output_dof()])
}

/// Maps registry names {"f1", "sdof", "truss:<file>"} to model evaluators.
pub fn registry_lookup(name: &str) -> Result<TestModel> {
    match name {
        "f1" => Ok(TestModel::new("f1", 2, "product function x1*x2", |x| {
            Ok(f1(x))
        })),
        "sdof" => Ok(TestModel::new(
            "sdof",
            6,
            "non-linear undamped single-degree-of-freedom oscillator; inputs (r, F1, t1, c1, c2, m)",
            |x| sdof(x[0], x[1], x[2], x[3], x[4], x[5]),
        )),
        other => {
            if let Some(path) = other.strip_prefix("truss:") {
                let def = TrussDefinition::from_file(Path::new(path))?;
                let dim = def.loads.len();
                Ok(TestModel::new(
                    other,
                    dim,
                    "linear bar-truss deflection at the monitored DOF; load magnitudes in kN",
                    move |x| truss_deflection(&def, x),
                ))
            } else {
                Err(Error::UnknownModel(other.to_string()))
            }
        }
    }
}
