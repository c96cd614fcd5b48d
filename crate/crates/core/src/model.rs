//! Problem representation, the built-in problem library, the planted-solution
//! generator and the JSON problem loader.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::Value;

use crate::cone::{self, ConeRegion, ConeVec};
use crate::error::{check_len, Error, Result};
use crate::sampling;

/// Oracles for `f` and `Φ` with their first and second derivatives.
///
/// Implementations must be free of hidden mutable state; the same problem is
/// evaluated concurrently by the diagnostics.
pub trait ProblemFunctions: Send + Sync + fmt::Debug {
    fn f_value(&self, x: &DVector<f64>) -> f64;
    fn f_grad(&self, x: &DVector<f64>) -> DVector<f64>;
    fn f_hess(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn phi_value(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `∇Φ(x)`, an `(m+1) × n` matrix.
    fn phi_jac(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `∇²⟨λ, Φ⟩(x)`.
    fn phi_hess_contract(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64>;

    /// The underlying data when `f` is quadratic and `Φ` affine.
    fn quadratic(&self) -> Option<&QuadraticData> {
        None
    }
}

/// A primal-dual pair. `multiplier_ray` is set when the multiplier set of the
/// primal point is the ray `R₊·multiplier_ray` rather than `{lambda}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub multiplier_ray: Option<DVector<f64>>,
}

impl KktPoint {
    pub fn new(x: DVector<f64>, lambda: DVector<f64>) -> Self {
        Self {
            x,
            lambda,
            multiplier_ray: None,
        }
    }

    pub fn with_ray(mut self, direction: DVector<f64>) -> Self {
        self.multiplier_ray = Some(direction);
        self
    }
}

/// `minimize f(x) subject to Φ(x) ∈ Q` with `x ∈ R^n`, `Q ⊂ R^{m+1}`.
#[derive(Clone)]
pub struct SocpProblem {
    pub n: usize,
    pub m: usize,
    pub name: String,
    pub functions: Arc<dyn ProblemFunctions>,
    pub known_solution: Option<KktPoint>,
}

impl fmt::Debug for SocpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SocpProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("known_solution", &self.known_solution)
            .finish()
    }
}

/// KKT residual a declared solution may carry.
const SOLUTION_TOL: f64 = 1e-8;

impl SocpProblem {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        m: usize,
        functions: Arc<dyn ProblemFunctions>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        Ok(Self {
            n,
            m,
            name: name.into(),
            functions,
            known_solution: None,
        })
    }

    pub fn with_solution(mut self, sol: KktPoint) -> Result<Self> {
        check_len("known solution x", self.n, sol.x.len())?;
        check_len("known solution lambda", self.m + 1, sol.lambda.len())?;
        if let Some(d) = &sol.multiplier_ray {
            check_len("multiplier ray", self.m + 1, d.len())?;
        }
        if !sol.x.iter().chain(sol.lambda.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("known solution"));
        }
        let sigma = crate::lagrangian::residual(&self, &sol.x, &sol.lambda)?;
        if sigma > SOLUTION_TOL {
            return Err(Error::NotKkt(sigma));
        }
        self.known_solution = Some(sol);
        Ok(self)
    }

    pub fn known(&self) -> Result<&KktPoint> {
        self.known_solution.as_ref().ok_or(Error::NoKnownSolution)
    }

    pub fn check_x(&self, x: &DVector<f64>) -> Result<()> {
        check_len("x", self.n, x.len())
    }

    pub fn check_lambda(&self, lambda: &DVector<f64>) -> Result<()> {
        check_len("lambda", self.m + 1, lambda.len())
    }

    pub fn f(&self, x: &DVector<f64>) -> f64 {
        self.functions.f_value(x)
    }

    pub fn grad_f(&self, x: &DVector<f64>) -> DVector<f64> {
        self.functions.f_grad(x)
    }

    pub fn hess_f(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.functions.f_hess(x)
    }

    pub fn phi(&self, x: &DVector<f64>) -> DVector<f64> {
        self.functions.phi_value(x)
    }

    pub fn phi_jac(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.functions.phi_jac(x)
    }

    pub fn phi_hess_contract(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
        self.functions.phi_hess_contract(x, lambda)
    }

    /// Quadratic data when the problem is quadratic/affine.
    pub fn quadratic_data(&self) -> Option<&QuadraticData> {
        self.functions.quadratic()
    }
}

/// `f(x) = ½xᵀPx + qᵀx + c`, `Φ(x) = Ax + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticData {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub c: f64,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QuadraticData {
    pub fn validate(&self) -> Result<(usize, usize)> {
        let n = self.q.len();
        if n == 0 {
            return Err(parse_err("q", "must be non-empty"));
        }
        if self.p.nrows() != n || self.p.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "P (rows/cols vs length of q)".into(),
                expected: n,
                got: if self.p.nrows() != n {
                    self.p.nrows()
                } else {
                    self.p.ncols()
                },
            });
        }
        if self.a.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "A columns".into(),
                expected: n,
                got: self.a.ncols(),
            });
        }
        if self.a.nrows() != self.b.len() {
            return Err(Error::DimensionMismatch {
                what: "A rows vs length of b".into(),
                expected: self.b.len(),
                got: self.a.nrows(),
            });
        }
        if self.b.len() < 2 {
            return Err(parse_err("b", "constraint dimension m+1 must be at least 2"));
        }
        let asym = (&self.p - self.p.transpose()).abs().max();
        if asym > 1e-12 * self.p.abs().max().max(1.0) {
            return Err(parse_err("P", "matrix must be symmetric"));
        }
        let finite = self.p.iter().chain(self.q.iter()).chain(self.a.iter()).chain(self.b.iter());
        if finite.copied().any(|v| !v.is_finite()) || !self.c.is_finite() {
            return Err(Error::NonFinite("quadratic problem data"));
        }
        Ok((n, self.b.len() - 1))
    }
}

impl ProblemFunctions for QuadraticData {
    fn f_value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x) + self.c
    }
    fn f_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * x + &self.q
    }
    fn f_hess(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.p.clone()
    }
    fn phi_value(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }
    fn phi_jac(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
    fn phi_hess_contract(&self, x: &DVector<f64>, _lambda: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
    fn quadratic(&self) -> Option<&QuadraticData> {
        Some(self)
    }
}

/// `f(x) = x₂²`, `Φ(x) = (−x₁² + x₂, x₂, 0)`: SOSC holds at the origin but the
/// multiplier set is a ray and the multiplier mapping is not calm.
#[derive(Debug, Clone, Copy, Default)]
pub struct Example32;

impl ProblemFunctions for Example32 {
    fn f_value(&self, x: &DVector<f64>) -> f64 {
        x[1] * x[1]
    }
    fn f_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 2.0 * x[1]])
    }
    fn f_hess(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0])
    }
    fn phi_value(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![-x[0] * x[0] + x[1], x[1], 0.0])
    }
    fn phi_jac(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[-2.0 * x[0], 1.0, 0.0, 1.0, 0.0, 0.0])
    }
    fn phi_hess_contract(&self, _x: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-2.0 * lambda[0], 0.0, 0.0, 0.0])
    }
}

/// Named built-in problems.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Example32,
    /// `f(x) = ½‖x − a‖²`, `Φ(x) = x`.
    Projection(ConeVec),
    /// Planted boundary problem (`n = 4`, `m = 2`) whose Hessian eigenvalues
    /// are spread over two decades.
    ScaledQuadratic { seed: u64 },
    /// `f(x) = ½‖x‖²`, `Φ ≡ (1, 0, 0)`.
    InteriorTrivial,
    /// `f(x) = −‖x‖²`, `Φ ≡ (1, 0, 0)`: a KKT point at the origin where SOSC fails.
    NegativeCurvature,
    Planted {
        n: usize,
        m: usize,
        region: ConeRegion,
        seed: u64,
    },
}

pub fn builtin(which: &Builtin) -> Result<SocpProblem> {
    match which {
        Builtin::Example32 => {
            let lambda = DVector::from_vec(vec![-1.0, 1.0, 0.0]);
            SocpProblem::new("example_3_2", 2, 2, Arc::new(Example32))?.with_solution(
                KktPoint::new(DVector::zeros(2), lambda.clone()).with_ray(lambda),
            )
        }
        Builtin::Projection(a) => {
            let d = a.m() + 1;
            let av = a.as_vector().clone();
            let data = QuadraticData {
                p: DMatrix::identity(d, d),
                q: -&av,
                c: 0.5 * av.norm_squared(),
                a: DMatrix::identity(d, d),
                b: DVector::zeros(d),
            };
            let xs = cone::project_q_raw(&av);
            let ls = &av - &xs;
            SocpProblem::new("projection", d, a.m(), Arc::new(data))?
                .with_solution(KktPoint::new(xs, ls))
        }
        Builtin::ScaledQuadratic { seed } => {
            let mut p = planted_impl(4, 2, ConeRegion::BoundaryQNonzero, *seed, Some(2.0))?;
            p.name = "scaled_quadratic".into();
            Ok(p)
        }
        Builtin::InteriorTrivial => {
            let data = QuadraticData {
                p: DMatrix::identity(2, 2),
                q: DVector::zeros(2),
                c: 0.0,
                a: DMatrix::zeros(3, 2),
                b: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            };
            SocpProblem::new("interior_trivial", 2, 2, Arc::new(data))?
                .with_solution(KktPoint::new(DVector::zeros(2), DVector::zeros(3)))
        }
        Builtin::NegativeCurvature => {
            let data = QuadraticData {
                p: DMatrix::identity(2, 2) * -2.0,
                q: DVector::zeros(2),
                c: 0.0,
                a: DMatrix::zeros(3, 2),
                b: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            };
            SocpProblem::new("negative_curvature", 2, 2, Arc::new(data))?
                .with_solution(KktPoint::new(DVector::zeros(2), DVector::zeros(3)))
        }
        Builtin::Planted { n, m, region, seed } => generate_planted(*n, *m, *region, *seed),
    }
}

/// Resolves a built-in by name; `params` carries the per-problem parameters
/// (`a` for `projection`, `seed` for `scaled_quadratic`, `n`/`m`/`region`/`seed`
/// for `planted`).
pub fn builtin_by_name(name: &str, params: &Value) -> Result<SocpProblem> {
    let which = match name {
        "example_3_2" => Builtin::Example32,
        "interior_trivial" => Builtin::InteriorTrivial,
        "negative_curvature" => Builtin::NegativeCurvature,
        "projection" => {
            let a = params
                .get("a")
                .ok_or_else(|| parse_err("params.a", "required for projection"))?;
            Builtin::Projection(ConeVec::from_vec(json_vector(a, "params.a")?)?)
        }
        "scaled_quadratic" => Builtin::ScaledQuadratic {
            seed: opt_u64(params, "seed")?.unwrap_or(0),
        },
        "planted" => Builtin::Planted {
            n: opt_u64(params, "n")?.unwrap_or(3) as usize,
            m: opt_u64(params, "m")?.unwrap_or(2) as usize,
            region: match params.get("region") {
                None => ConeRegion::BoundaryQNonzero,
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| parse_err("params.region", &e.to_string()))?,
            },
            seed: opt_u64(params, "seed")?.unwrap_or(0),
        },
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    builtin(&which)
}

/// Convex quadratic problem with a planted KKT pair.
///
/// Draws `P = RᵀR + I`, `A`, `x̄` and a pair `(Φ(x̄), λ̄)` with `Φ(x̄)` in the
/// requested region and `λ̄ ∈ N_Q(Φ(x̄))`, then sets `b := Φ(x̄) − Ax̄` and
/// `q := −Px̄ − Aᵀλ̄`. For `Zero` the multiplier is drawn from `int(−Q)`.
pub fn generate_planted(n: usize, m: usize, region: ConeRegion, seed: u64) -> Result<SocpProblem> {
    planted_impl(n, m, region, seed, None)
}

fn planted_impl(
    n: usize,
    m: usize,
    region: ConeRegion,
    seed: u64,
    spread_decades: Option<f64>,
) -> Result<SocpProblem> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("planted problems need n >= 1 and m >= 1".into()));
    }
    if !matches!(
        region,
        ConeRegion::InteriorQ | ConeRegion::BoundaryQNonzero | ConeRegion::Zero
    ) {
        return Err(Error::InvalidParameter(format!(
            "planted region must be InteriorQ, BoundaryQNonzero or Zero, got {region:?}"
        )));
    }
    let mut rng = sampling::rng(seed);
    for _attempt in 0..100 {
        let r = sampling::gaussian_matrix(&mut rng, n, n);
        let mut p = r.transpose() * &r + DMatrix::identity(n, n);
        if let Some(decades) = spread_decades {
            let d = DVector::from_fn(n, |_, _| 10f64.powf(decades * (rng.gen::<f64>() - 0.5)));
            p = DMatrix::from_diagonal(&d) * p * DMatrix::from_diagonal(&d);
        }
        let a = sampling::gaussian_matrix(&mut rng, m + 1, n);
        let xbar = sampling::gaussian_vector(&mut rng, n);
        let yr = sampling::gaussian_vector(&mut rng, m);
        let nr = yr.norm();
        let (y, lambda) = match region {
            ConeRegion::InteriorQ => {
                let y0 = nr + 0.5 + rng.gen::<f64>();
                (stack(y0, &yr), DVector::zeros(m + 1))
            }
            ConeRegion::BoundaryQNonzero => {
                if nr < 1e-3 {
                    continue;
                }
                let y = stack(nr, &yr);
                let t = 0.5 + 1.5 * rng.gen::<f64>();
                let lambda = cone::tilde_raw(&y) * t;
                (y, lambda)
            }
            _ => {
                let c = nr + 0.5 + rng.gen::<f64>();
                (DVector::zeros(m + 1), -stack(c, &yr))
            }
        };
        let b = &y - &a * &xbar;
        let q = -(&p * &xbar) - a.transpose() * &lambda;
        let data = QuadraticData {
            p,
            q,
            c: 0.0,
            a,
            b,
        };
        // accept only if the planted pair is KKT to working precision
        let phi = data.phi_value(&xbar);
        let stationarity = (data.f_grad(&xbar) + data.a.transpose() * &lambda).norm();
        let complementarity = (&phi - cone::project_q_raw(&(&phi + &lambda))).norm();
        if stationarity + complementarity > 1e-10
            || cone::classify_raw(&phi, 1e-9) != region
        {
            continue;
        }
        let name = format!("planted_n{n}_m{m}_{region:?}_seed{seed}");
        return SocpProblem::new(name, n, m, Arc::new(data))?
            .with_solution(KktPoint::new(xbar, lambda));
    }
    Err(Error::Generation(format!(
        "no admissible planted pair after 100 attempts (n={n}, m={m}, {region:?}, seed={seed})"
    )))
}

fn stack(y0: f64, yr: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(yr.len() + 1);
    v[0] = y0;
    v.rows_mut(1, yr.len()).copy_from(yr);
    v
}

/// Reads a problem file (see [`parse_problem`] for the format).
pub fn load_problem(path: impl AsRef<Path>) -> Result<SocpProblem> {
    let text = std::fs::read_to_string(path)?;
    parse_problem(&text)
}

/// Parses either `{"builtin": name, "params": {...}}` or
/// `{"quadratic": {"P", "q", "c", "A", "b"}}` (row-major matrices). A
/// quadratic problem may carry `"solution": {"x", "lambda", "ray"}`.
pub fn parse_problem(text: &str) -> Result<SocpProblem> {
    let root: Value = serde_json::from_str(text).map_err(|e| parse_err("<root>", &e.to_string()))?;
    if let Some(name) = root.get("builtin") {
        let name = name
            .as_str()
            .ok_or_else(|| parse_err("builtin", "expected a string"))?;
        let params = root.get("params").cloned().unwrap_or(Value::Null);
        return builtin_by_name(name, &params);
    }
    let quad = root
        .get("quadratic")
        .ok_or_else(|| parse_err("<root>", "expected a `builtin` or `quadratic` key"))?;
    let field = |k: &str| {
        quad.get(k)
            .ok_or_else(|| parse_err(&format!("quadratic.{k}"), "missing"))
    };
    let data = QuadraticData {
        p: json_matrix(field("P")?, "quadratic.P")?,
        q: json_vector(field("q")?, "quadratic.q")?,
        c: match quad.get("c") {
            None => 0.0,
            Some(v) => v
                .as_f64()
                .ok_or_else(|| parse_err("quadratic.c", "expected a number"))?,
        },
        a: json_matrix(field("A")?, "quadratic.A")?,
        b: json_vector(field("b")?, "quadratic.b")?,
    };
    let (n, m) = data.validate()?;
    let mut problem = SocpProblem::new("quadratic", n, m, Arc::new(data))?;
    if let Some(sol) = root.get("solution") {
        let x = json_vector(
            sol.get("x").ok_or_else(|| parse_err("solution.x", "missing"))?,
            "solution.x",
        )?;
        let lambda = json_vector(
            sol.get("lambda")
                .ok_or_else(|| parse_err("solution.lambda", "missing"))?,
            "solution.lambda",
        )?;
        let mut point = KktPoint::new(x, lambda);
        if let Some(r) = sol.get("ray") {
            point = point.with_ray(json_vector(r, "solution.ray")?);
        }
        problem = problem.with_solution(point)?;
    }
    Ok(problem)
}

fn parse_err(field: &str, message: &str) -> Error {
    Error::Parse {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn opt_u64(params: &Value, key: &str) -> Result<Option<u64>> {
    match params.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| parse_err(&format!("params.{key}"), "expected a non-negative integer")),
    }
}

fn json_vector(v: &Value, field: &str) -> Result<DVector<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(field, "expected an array of numbers"))?;
    let vals = arr
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| parse_err(field, "expected a number")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(vals))
}

fn json_matrix(v: &Value, field: &str) -> Result<DMatrix<f64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| parse_err(field, "expected an array of rows"))?;
    if rows.is_empty() {
        return Err(parse_err(field, "matrix has no rows"));
    }
    let parsed = rows
        .iter()
        .map(|r| json_vector(r, field))
        .collect::<Result<Vec<_>>>()?;
    let cols = parsed[0].len();
    if let Some(bad) = parsed.iter().position(|r| r.len() != cols) {
        return Err(parse_err(
            field,
            &format!("row {bad} has {} entries, expected {cols}", parsed[bad].len()),
        ));
    }
    Ok(DMatrix::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}
