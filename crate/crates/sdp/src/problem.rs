//! Problem description, settings and solve results.
//!
//! A [`ConicProblem`] owns a list of decision blocks:
//!
//! * Hermitian (or real symmetric) matrix variables, implicitly constrained
//!   `X ⪰ 0`,
//! * nonnegative scalars,
//! * free scalars,
//!
//! a linear objective, linear matrix inequalities of the form
//!
//! ```text
//! C + Σ_g L_gᴴ (Σ_v α_v X_v) L_g + Σ_s x_s D_s ⪰ 0
//! ```
//!
//! and scalar linear constraints `a(x) ≥ b` / `a(x) = b`. Grouping matrix
//! variables that share the same congruence map `L_g` lets the solver build
//! its normal equations in `O(d⁴)` per group pair instead of forming every
//! coefficient matrix densely.

use crate::error::SdpError;
use crate::hermitian::HermitianMatrix;
use crate::{CMat, C64};

/// Handle to a decision block of a specific [`ConicProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Complex,
    Real,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum VarKind {
    Psd { dim: usize, field: Field },
    NonNeg,
    Free,
}

#[derive(Clone, Debug)]
pub(crate) struct Variable {
    pub kind: VarKind,
    pub offset: usize,
}

impl Variable {
    pub fn n_coords(&self) -> usize {
        match self.kind {
            VarKind::Psd { dim, field: Field::Complex } => dim * dim,
            VarKind::Psd { dim, field: Field::Real } => dim * (dim + 1) / 2,
            VarKind::NonNeg | VarKind::Free => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum LinearTerm {
    /// `Re Tr(M X)`.
    Trace { var: VarId, mat: HermitianMatrix },
    Scalar { var: VarId, coeff: f64 },
}

/// A real linear functional of the decision blocks.
#[derive(Clone, Debug, Default)]
pub struct LinearExpr {
    pub(crate) terms: Vec<LinearTerm>,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `Re Tr(mat · X)`.
    pub fn trace(mut self, var: VarId, mat: HermitianMatrix) -> Self {
        self.terms.push(LinearTerm::Trace { var, mat });
        self
    }

    /// Adds `coeff · Tr(X)`.
    pub fn trace_of(self, var: VarId, dim: usize, coeff: f64) -> Self {
        self.trace(var, HermitianMatrix::identity(dim).scale(coeff))
    }

    pub fn scalar(mut self, var: VarId, coeff: f64) -> Self {
        self.terms.push(LinearTerm::Scalar { var, coeff });
        self
    }
}

/// `Lᴴ (Σ α_v X_v) L`. `map = None` means `L = I`.
#[derive(Clone, Debug)]
pub struct Congruence {
    pub map: Option<CMat>,
    pub members: Vec<(VarId, f64)>,
}

/// An affine Hermitian expression constrained to be PSD.
#[derive(Clone, Debug)]
pub struct LmiExpr {
    pub(crate) constant: HermitianMatrix,
    pub(crate) congruences: Vec<Congruence>,
    pub(crate) scalars: Vec<(VarId, HermitianMatrix)>,
}

impl LmiExpr {
    pub fn new(constant: HermitianMatrix) -> Self {
        Self { constant, congruences: Vec::new(), scalars: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn congruence(mut self, map: Option<CMat>, members: Vec<(VarId, f64)>) -> Self {
        self.congruences.push(Congruence { map, members });
        self
    }

    pub fn scalar(mut self, var: VarId, mat: HermitianMatrix) -> Self {
        self.scalars.push((var, mat));
        self
    }

    pub fn constant(&self) -> &HermitianMatrix {
        &self.constant
    }

    pub fn congruences(&self) -> &[Congruence] {
        &self.congruences
    }

    pub fn scalar_terms(&self) -> &[(VarId, HermitianMatrix)] {
        &self.scalars
    }

    /// Evaluates the expression at explicit block values.
    pub fn evaluate(&self, matrix: impl Fn(VarId) -> HermitianMatrix, scalar: impl Fn(VarId) -> f64) -> HermitianMatrix {
        let mut acc = self.constant.as_matrix().clone();
        for g in &self.congruences {
            let mut inner: Option<CMat> = None;
            for &(v, a) in &g.members {
                let term = matrix(v).into_matrix() * C64::new(a, 0.0);
                inner = Some(match inner {
                    Some(m) => m + term,
                    None => term,
                });
            }
            if let Some(inner) = inner {
                acc += match &g.map {
                    Some(l) => l.adjoint() * inner * l,
                    None => inner,
                };
            }
        }
        for (v, d) in &self.scalars {
            acc += d.as_matrix() * C64::new(scalar(*v), 0.0);
        }
        HermitianMatrix::symmetrize(acc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    GreaterEq,
    Equal,
}

#[derive(Clone, Debug)]
pub(crate) struct LinearConstraint {
    pub expr: LinearExpr,
    pub sense: Sense,
    pub rhs: f64,
}

/// Minimization problem over Hermitian PSD blocks and scalars.
#[derive(Clone, Debug, Default)]
pub struct ConicProblem {
    pub(crate) vars: Vec<Variable>,
    pub(crate) objective: LinearExpr,
    pub(crate) lmis: Vec<LmiExpr>,
    pub(crate) linear: Vec<LinearConstraint>,
    pub(crate) n_coords: usize,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_var(&mut self, kind: VarKind) -> VarId {
        let var = Variable { kind, offset: self.n_coords };
        self.n_coords += var.n_coords();
        self.vars.push(var);
        VarId(self.vars.len() - 1)
    }

    /// Complex Hermitian `dim x dim` block with `X ⪰ 0`.
    pub fn add_psd(&mut self, dim: usize) -> VarId {
        self.push_var(VarKind::Psd { dim, field: Field::Complex })
    }

    /// Real symmetric `dim x dim` block with `X ⪰ 0`.
    pub fn add_real_psd(&mut self, dim: usize) -> VarId {
        self.push_var(VarKind::Psd { dim, field: Field::Real })
    }

    pub fn add_nonneg(&mut self) -> VarId {
        self.push_var(VarKind::NonNeg)
    }

    pub fn add_free(&mut self) -> VarId {
        self.push_var(VarKind::Free)
    }

    pub fn minimize(&mut self, objective: LinearExpr) {
        self.objective = objective;
    }

    pub fn add_lmi(&mut self, lmi: LmiExpr) -> usize {
        self.lmis.push(lmi);
        self.lmis.len() - 1
    }

    pub fn add_linear(&mut self, expr: LinearExpr, sense: Sense, rhs: f64) -> usize {
        self.linear.push(LinearConstraint { expr, sense, rhs });
        self.linear.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Total number of real scalar coordinates.
    pub fn num_coords(&self) -> usize {
        self.n_coords
    }

    pub fn lmis(&self) -> &[LmiExpr] {
        &self.lmis
    }

    pub(crate) fn var(&self, id: VarId) -> Result<&Variable, SdpError> {
        self.vars.get(id.0).ok_or(SdpError::UnknownVariable(id.0))
    }

    pub fn var_dim(&self, id: VarId) -> Option<usize> {
        match self.vars.get(id.0)?.kind {
            VarKind::Psd { dim, .. } => Some(dim),
            _ => None,
        }
    }

    /// Checks that every expression refers to known blocks with matching
    /// dimensions.
    pub fn validate(&self) -> Result<(), SdpError> {
        let check_linear = |e: &LinearExpr| -> Result<(), SdpError> {
            for t in &e.terms {
                match t {
                    LinearTerm::Trace { var, mat } => match &self.var(*var)?.kind {
                        VarKind::Psd { dim, .. } if *dim == mat.dim() => {}
                        VarKind::Psd { dim, .. } => {
                            return Err(SdpError::Dimension(format!(
                                "trace term of size {} on block of size {}",
                                mat.dim(),
                                dim
                            )))
                        }
                        _ => return Err(SdpError::InvalidProblem("trace term on scalar block".into())),
                    },
                    LinearTerm::Scalar { var, coeff } => {
                        if matches!(self.var(*var)?.kind, VarKind::Psd { .. }) {
                            return Err(SdpError::InvalidProblem("scalar term on matrix block".into()));
                        }
                        if !coeff.is_finite() {
                            return Err(SdpError::InvalidProblem("non-finite coefficient".into()));
                        }
                    }
                }
            }
            Ok(())
        };
        check_linear(&self.objective)?;
        for c in &self.linear {
            check_linear(&c.expr)?;
            if !c.rhs.is_finite() {
                return Err(SdpError::InvalidProblem("non-finite right-hand side".into()));
            }
        }
        for (k, lmi) in self.lmis.iter().enumerate() {
            let n = lmi.dim();
            for g in &lmi.congruences {
                let mut gdim = None;
                for &(v, a) in &g.members {
                    let d = match self.var(v)?.kind {
                        VarKind::Psd { dim, .. } => dim,
                        _ => return Err(SdpError::InvalidProblem(format!("lmi {k}: congruence over scalar block"))),
                    };
                    if !a.is_finite() {
                        return Err(SdpError::InvalidProblem(format!("lmi {k}: non-finite coefficient")));
                    }
                    if *gdim.get_or_insert(d) != d {
                        return Err(SdpError::Dimension(format!("lmi {k}: congruence members differ in size")));
                    }
                }
                if let Some(d) = gdim {
                    let (rows, cols) = match &g.map {
                        Some(l) => (l.nrows(), l.ncols()),
                        None => (d, d),
                    };
                    if rows != d || cols != n {
                        return Err(SdpError::Dimension(format!(
                            "lmi {k}: map is {rows}x{cols}, expected {d}x{n}"
                        )));
                    }
                }
            }
            for (v, d) in &lmi.scalars {
                if matches!(self.var(*v)?.kind, VarKind::Psd { .. }) {
                    return Err(SdpError::InvalidProblem(format!("lmi {k}: scalar term on matrix block")));
                }
                if d.dim() != n {
                    return Err(SdpError::Dimension(format!("lmi {k}: scalar coefficient of size {}", d.dim())));
                }
            }
        }
        Ok(())
    }

    /// Solves with the given settings. Only malformed problems produce an
    /// `Err`; infeasibility and numerical trouble are reported through
    /// [`ConicSolution::status`].
    pub fn solve(&self, settings: &SolverSettings) -> Result<ConicSolution, SdpError> {
        self.validate()?;
        crate::solver::solve(self, settings, None)
    }

    /// Re-solves starting from the final iterate of a previous solve of the
    /// same problem.
    pub fn solve_from(&self, settings: &SolverSettings, start: &ConicSolution) -> Result<ConicSolution, SdpError> {
        self.validate()?;
        if start.iterate.x.len() != self.n_coords {
            return Err(SdpError::Dimension("warm start does not match problem".into()));
        }
        crate::solver::solve(self, settings, Some(&start.iterate))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Relative primal/dual residual tolerance.
    pub feas_tol: f64,
    /// Absolute duality-gap tolerance.
    pub abs_tol: f64,
    /// Relative duality-gap tolerance.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Upper bound on iterative-refinement passes per linear solve.
    pub refinement_steps: usize,
    /// Tolerance multiplier for accepting the best iterate when progress
    /// stalls.
    pub inaccurate_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self::with_tolerance(1e-7)
    }
}

impl SolverSettings {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            feas_tol: tol,
            abs_tol: tol,
            rel_tol: tol,
            max_iter: 100,
            step_fraction: 0.99,
            refinement_steps: 4,
            inaccurate_factor: 100.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// A dual ray certifies that no feasible point exists.
    Infeasible,
    /// A primal ray certifies that the objective is unbounded below.
    Unbounded,
    /// Progress stalled; the returned point meets the tolerances relaxed by
    /// `inaccurate_factor`.
    NearOptimal,
    NumericalFailure,
}

/// Raw interior-point iterate, normalized so that `τ = 1`.
#[derive(Clone, Debug, Default)]
pub(crate) struct Iterate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s_lp: Vec<f64>,
    pub z_lp: Vec<f64>,
    pub s_psd: Vec<CMat>,
    pub z_psd: Vec<CMat>,
    pub kappa: f64,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub dual_objective: f64,
    /// Relative primal residual at termination.
    pub primal_residual: f64,
    /// Relative dual residual at termination.
    pub dual_residual: f64,
    /// Relative residual of the infeasibility certificate (when
    /// `status` is `Infeasible` or `Unbounded`).
    pub certificate_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub(crate) values: Vec<f64>,
    pub(crate) vars: Vec<Variable>,
    pub(crate) lmi_duals: Vec<HermitianMatrix>,
    pub(crate) iterate: Iterate,
}

impl ConicSolution {
    /// Optimal, possibly to the relaxed tolerances.
    pub fn is_optimal(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }

    /// Value of a matrix block.
    pub fn matrix(&self, id: VarId) -> HermitianMatrix {
        let var = &self.vars[id.0];
        crate::solver::coords_to_matrix(var, &self.values[var.offset..var.offset + var.n_coords()])
    }

    /// Value of a scalar block.
    pub fn scalar(&self, id: VarId) -> f64 {
        self.values[self.vars[id.0].offset]
    }

    /// Flattened coordinate vector of all blocks.
    pub fn coords(&self) -> &[f64] {
        &self.values
    }

    /// Dual matrix of the `k`-th LMI.
    pub fn lmi_dual(&self, k: usize) -> &HermitianMatrix {
        &self.lmi_duals[k]
    }

    /// Evaluates a linear expression at the returned block values.
    pub fn evaluate(&self, expr: &LinearExpr) -> f64 {
        expr.terms
            .iter()
            .map(|t| match t {
                LinearTerm::Trace { var, mat } => mat.inner(&self.matrix(*var)),
                LinearTerm::Scalar { var, coeff } => coeff * self.scalar(*var),
            })
            .sum()
    }

    /// Evaluates an LMI expression at the returned block values.
    pub fn evaluate_lmi(&self, lmi: &LmiExpr) -> HermitianMatrix {
        lmi.evaluate(|v| self.matrix(v), |v| self.scalar(v))
    }
}
