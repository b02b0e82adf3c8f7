//! Symbolic LMI modeling and lowering to a standard-form SDP.
//!
//! An [`AffineSym`] is `Σ sym(L·X·R) + C`. Matrix variables enter through
//! their left/right factors; a scalar variable `x` enters as `x·I_k`, where
//! `k` is the inner dimension of its factors, so `x·M` is `(L, R) = (M, I)`.
//! Problems are built with [`LmiBuilder`] and are immutable afterwards.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::matrixcore::{selector, Mat, SymMat};

/// Relative strictness margin applied to `≺`/`≻` constraints by default.
pub const DEFAULT_STRICT_MARGIN: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("variable {0:?} is not declared in this problem")]
    UnknownVariable(VarId),
    #[error("no value assigned to variable '{0}'")]
    MissingVariable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid variable declaration: {0}")]
    InvalidDeclaration(String),
    #[error("invalid objective: {0}")]
    InvalidObjective(String),
}

/// Opaque variable handle, unique within one builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Symmetric(usize),
    Scalar,
    Rect(usize, usize),
}

impl VarKind {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::Symmetric(d) => (d, d),
            VarKind::Scalar => (1, 1),
            VarKind::Rect(r, c) => (r, c),
        }
    }

    /// Number of free scalars after symmetric reduction.
    pub fn scalar_count(&self) -> usize {
        match *self {
            VarKind::Symmetric(d) => d * (d + 1) / 2,
            VarKind::Scalar => 1,
            VarKind::Rect(r, c) => r * c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConstraint {
    None,
    /// Scalar `x ≥ 0`.
    NonNegative,
    PosDef,
    PosSemiDef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub id: VarId,
    pub name: String,
    pub kind: VarKind,
    pub sign: SignConstraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub var: VarId,
    pub left: Mat,
    pub right: Mat,
}

/// Affine symmetric matrix expression `Σ sym(L·X·R) + C`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSym {
    dim: usize,
    constant: Mat,
    terms: Vec<Term>,
}

impl AffineSym {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            constant: Mat::zeros(dim, dim),
            terms: Vec::new(),
        }
    }

    pub fn constant(c: SymMat) -> Self {
        Self {
            dim: c.dim(),
            constant: c.into_mat(),
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant_part(&self) -> SymMat {
        SymMat::symmetrized(self.constant.clone())
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Add the raw term `sym(L·X·R)`.
    pub fn add_term(&mut self, var: VarId, left: Mat, right: Mat) -> &mut Self {
        assert_eq!(left.nrows(), self.dim, "left factor row count");
        assert_eq!(right.ncols(), self.dim, "right factor column count");
        self.terms.push(Term { var, left, right });
        self
    }

    /// Add `x·M` for a scalar variable `x` and symmetric `M`.
    pub fn add_scaled(&mut self, var: VarId, m: &SymMat) -> &mut Self {
        assert_eq!(m.dim(), self.dim, "scaled matrix dimension");
        self.add_term(var, m.as_mat().clone(), Mat::identity(self.dim, self.dim))
    }

    /// Add `c·X` on the diagonal block starting at `offset`.
    pub fn add_diag_block(&mut self, var: VarId, offset: usize, size: usize, c: f64) -> &mut Self {
        let s = selector(offset, size, self.dim);
        self.add_term(var, s.transpose() * c, s)
    }

    /// Add `c·X` at block `(row, col)` together with `c·Xᵀ` at `(col, row)`.
    pub fn add_offdiag_block(
        &mut self,
        var: VarId,
        row: (usize, usize),
        col: (usize, usize),
        c: f64,
    ) -> &mut Self {
        let sr = selector(row.0, row.1, self.dim);
        let sc = selector(col.0, col.1, self.dim);
        self.add_term(var, sr.transpose() * (2.0 * c), sc)
    }

    /// Add a constant symmetric block on the diagonal.
    pub fn add_constant_block(&mut self, offset: usize, block: &SymMat) -> &mut Self {
        let d = block.dim();
        let mut v = self.constant.view_mut((offset, offset), (d, d));
        v += block.as_mat();
        self
    }

    pub fn add_constant(&mut self, c: &SymMat) -> &mut Self {
        assert_eq!(c.dim(), self.dim);
        self.constant += c.as_mat();
        self
    }

    pub fn add_expr(&mut self, other: &AffineSym) -> &mut Self {
        assert_eq!(other.dim, self.dim, "adding expressions of different dimension");
        self.constant += &other.constant;
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn scaled(&self, c: f64) -> AffineSym {
        AffineSym {
            dim: self.dim,
            constant: &self.constant * c,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    var: t.var,
                    left: &t.left * c,
                    right: t.right.clone(),
                })
                .collect(),
        }
    }

    /// `Tᵀ·E·T` for this expression `E`.
    pub fn congruence(&self, t: &Mat) -> AffineSym {
        assert_eq!(t.nrows(), self.dim, "congruence factor row count");
        let tt = t.transpose();
        AffineSym {
            dim: t.ncols(),
            constant: &tt * &self.constant * t,
            terms: self
                .terms
                .iter()
                .map(|term| Term {
                    var: term.var,
                    left: &tt * &term.left,
                    right: &term.right * t,
                })
                .collect(),
        }
    }

    fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|t| t.var)
    }
}

/// Numeric values for decision variables. Scalars are stored as 1x1.
pub type Assignment = BTreeMap<VarId, Mat>;

fn check_term(term: &Term, kind: VarKind, name: &str) -> Result<(), LmiError> {
    let ok = match kind {
        VarKind::Scalar => term.left.ncols() == term.right.nrows(),
        _ => {
            let (r, c) = kind.shape();
            term.left.ncols() == r && term.right.nrows() == c
        }
    };
    if ok {
        Ok(())
    } else {
        Err(LmiError::DimensionMismatch(format!(
            "term factors {}x{} and {}x{} do not conform to variable '{name}' of shape {:?}",
            term.left.nrows(),
            term.left.ncols(),
            term.right.nrows(),
            term.right.ncols(),
            kind.shape()
        )))
    }
}

/// Evaluate an expression at a numeric assignment.
///
/// `decls` supplies variable shapes and names for error reporting.
pub fn eval_at(expr: &AffineSym, decls: &[VarDecl], assignment: &Assignment) -> Result<SymMat, LmiError> {
    let mut acc = expr.constant.clone();
    for term in &expr.terms {
        let decl = decls
            .iter()
            .find(|d| d.id == term.var)
            .ok_or(LmiError::UnknownVariable(term.var))?;
        check_term(term, decl.kind, &decl.name)?;
        let val = assignment
            .get(&term.var)
            .ok_or_else(|| LmiError::MissingVariable(decl.name.clone()))?;
        if val.shape() != decl.kind.shape() {
            return Err(LmiError::DimensionMismatch(format!(
                "value for '{}' is {}x{}, declared {:?}",
                decl.name,
                val.nrows(),
                val.ncols(),
                decl.kind.shape()
            )));
        }
        let contrib = match decl.kind {
            VarKind::Scalar => &term.left * &term.right * val[(0, 0)],
            _ => &term.left * val * &term.right,
        };
        acc += (&contrib + contrib.transpose()) * 0.5;
    }
    Ok(SymMat::symmetrized(acc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `≺ 0`
    NegDef,
    /// `⪯ 0`
    NegSemiDef,
    /// `≻ 0`
    PosDef,
    /// `⪰ 0`
    PosSemiDef,
}

impl Sense {
    pub fn is_strict(self) -> bool {
        matches!(self, Sense::NegDef | Sense::PosDef)
    }

    /// Sign that turns the expression into a `⪰ 0` form.
    fn orientation(self) -> f64 {
        match self {
            Sense::NegDef | Sense::NegSemiDef => -1.0,
            Sense::PosDef | Sense::PosSemiDef => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub expr: AffineSym,
    pub sense: Sense,
    pub margin: f64,
}

impl Constraint {
    /// Expression oriented as `⪰ 0`, without the strictness margin.
    pub fn oriented(&self, decls: &[VarDecl], a: &Assignment) -> Result<SymMat, LmiError> {
        Ok(eval_at(&self.expr, decls, a)?.scale(self.sense.orientation()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    variables: Vec<VarDecl>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
}

impl LmiProblem {
    pub fn variables(&self) -> &[VarDecl] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn has_objective(&self) -> bool {
        !self.objective.is_empty()
    }

    pub fn decl(&self, id: VarId) -> Option<&VarDecl> {
        self.variables.iter().find(|d| d.id == id)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().find(|d| d.name == name).map(|d| d.id)
    }

    pub fn scalar_count(&self) -> usize {
        self.variables.iter().map(|d| d.kind.scalar_count()).sum()
    }

    pub fn objective_value(&self, a: &Assignment) -> Result<f64, LmiError> {
        let mut v = 0.0;
        for &(id, c) in &self.objective {
            let decl = self.decl(id).ok_or(LmiError::UnknownVariable(id))?;
            let x = a
                .get(&id)
                .ok_or_else(|| LmiError::MissingVariable(decl.name.clone()))?;
            v += c * x.trace();
        }
        Ok(v)
    }
}

/// Accumulating builder for [`LmiProblem`].
#[derive(Debug, Default)]
pub struct LmiBuilder {
    variables: Vec<VarDecl>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
}

impl LmiBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn declare(&mut self, name: &str, kind: VarKind, sign: SignConstraint) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(VarDecl {
            id,
            name: name.to_string(),
            kind,
            sign,
        });
        id
    }

    pub fn sym_var(&mut self, name: &str, dim: usize, sign: SignConstraint) -> VarId {
        self.declare(name, VarKind::Symmetric(dim), sign)
    }

    pub fn scalar_var(&mut self, name: &str, sign: SignConstraint) -> VarId {
        self.declare(name, VarKind::Scalar, sign)
    }

    pub fn rect_var(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        self.declare(name, VarKind::Rect(rows, cols), SignConstraint::None)
    }

    pub fn decls(&self) -> &[VarDecl] {
        &self.variables
    }

    /// Add a constraint; strict senses get the default relative margin.
    pub fn constrain(&mut self, label: &str, expr: AffineSym, sense: Sense) -> &mut Self {
        let margin = if sense.is_strict() {
            DEFAULT_STRICT_MARGIN * expr.constant.amax().max(1.0)
        } else {
            0.0
        };
        self.constrain_with_margin(label, expr, sense, margin)
    }

    pub fn constrain_with_margin(
        &mut self,
        label: &str,
        expr: AffineSym,
        sense: Sense,
        margin: f64,
    ) -> &mut Self {
        self.constraints.push(Constraint {
            label: label.to_string(),
            expr,
            sense,
            margin,
        });
        self
    }

    /// Add `coef·x` (scalars) or `coef·trace(X)` (symmetric) to the objective.
    pub fn minimize_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        self.objective.push((var, coef));
        self
    }

    pub fn build(self) -> Result<LmiProblem, LmiError> {
        let LmiBuilder {
            variables,
            mut constraints,
            objective,
        } = self;
        let mut names = std::collections::BTreeSet::new();
        for d in &variables {
            let (r, c) = d.kind.shape();
            if r == 0 || c == 0 {
                return Err(LmiError::InvalidDeclaration(format!(
                    "variable '{}' has an empty dimension",
                    d.name
                )));
            }
            if !names.insert(d.name.as_str()) {
                return Err(LmiError::InvalidDeclaration(format!(
                    "duplicate variable name '{}'",
                    d.name
                )));
            }
            let bad_sign = match (d.kind, d.sign) {
                (VarKind::Scalar, SignConstraint::PosDef | SignConstraint::PosSemiDef) => false,
                (VarKind::Rect(..), s) => s != SignConstraint::None,
                (VarKind::Symmetric(_), SignConstraint::NonNegative) => true,
                _ => false,
            };
            if bad_sign {
                return Err(LmiError::InvalidDeclaration(format!(
                    "sign constraint {:?} does not apply to variable '{}'",
                    d.sign, d.name
                )));
            }
        }
        for c in &constraints {
            for v in c.expr.vars() {
                let d = variables
                    .iter()
                    .find(|d| d.id == v)
                    .ok_or(LmiError::UnknownVariable(v))?;
                for t in c.expr.terms.iter().filter(|t| t.var == v) {
                    check_term(t, d.kind, &d.name)?;
                }
            }
        }
        for &(v, _) in &objective {
            let d = variables
                .iter()
                .find(|d| d.id == v)
                .ok_or(LmiError::UnknownVariable(v))?;
            if matches!(d.kind, VarKind::Rect(..)) {
                return Err(LmiError::InvalidObjective(format!(
                    "rectangular variable '{}' cannot appear in the objective",
                    d.name
                )));
            }
        }
        // Sign constraints become ordinary constraints so that lowering and
        // replay treat them uniformly.
        for d in &variables {
            let (r, _) = d.kind.shape();
            let mut e = AffineSym::zeros(r);
            match d.kind {
                VarKind::Scalar => e.add_term(d.id, Mat::identity(1, 1), Mat::identity(1, 1)),
                _ => e.add_diag_block(d.id, 0, r, 1.0),
            };
            let sense = match d.sign {
                SignConstraint::None => continue,
                SignConstraint::NonNegative | SignConstraint::PosSemiDef => Sense::PosSemiDef,
                SignConstraint::PosDef => Sense::PosDef,
            };
            let margin = if sense.is_strict() { DEFAULT_STRICT_MARGIN } else { 0.0 };
            constraints.push(Constraint {
                label: format!("sign({})", d.name),
                expr: e,
                sense,
                margin,
            });
        }
        Ok(LmiProblem {
            variables,
            constraints,
            objective,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub label: String,
    /// Minimum eigenvalue of the expression oriented as `⪰ 0`.
    pub min_eigenvalue: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub constraints: Vec<ConstraintReport>,
    pub pass: bool,
}

impl FeasibilityReport {
    pub fn worst_margin(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Evaluate every constraint; pass iff each oriented minimum eigenvalue ≥ −tol.
pub fn check_feasible_at(p: &LmiProblem, a: &Assignment, tol: f64) -> Result<FeasibilityReport, LmiError> {
    let mut reports = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let m = c.oriented(&p.variables, a)?;
        let lmin = m.min_eigenvalue();
        reports.push(ConstraintReport {
            label: c.label.clone(),
            min_eigenvalue: lmin,
            pass: lmin >= -tol,
        });
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(FeasibilityReport {
        constraints: reports,
        pass,
    })
}

/// Where each named variable lives in the lowered scalar vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VarMap {
    entries: Vec<(VarId, VarKind, usize)>,
    len: usize,
}

impl VarMap {
    fn new(decls: &[VarDecl]) -> Self {
        let mut off = 0;
        let entries = decls
            .iter()
            .map(|d| {
                let e = (d.id, d.kind, off);
                off += d.kind.scalar_count();
                e
            })
            .collect();
        Self { entries, len: off }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn offset(&self, id: VarId) -> Option<(VarKind, usize)> {
        self.entries
            .iter()
            .find(|e| e.0 == id)
            .map(|&(_, k, o)| (k, o))
    }

    pub fn to_assignment(&self, y: &[f64]) -> Assignment {
        assert_eq!(y.len(), self.len, "scalar vector length");
        let mut a = Assignment::new();
        for &(id, kind, off) in &self.entries {
            let m = match kind {
                VarKind::Scalar => Mat::from_element(1, 1, y[off]),
                VarKind::Symmetric(d) => {
                    let mut m = Mat::zeros(d, d);
                    let mut k = off;
                    for i in 0..d {
                        for j in i..d {
                            m[(i, j)] = y[k];
                            m[(j, i)] = y[k];
                            k += 1;
                        }
                    }
                    m
                }
                VarKind::Rect(r, c) => Mat::from_fn(r, c, |i, j| y[off + i * c + j]),
            };
            a.insert(id, m);
        }
        a
    }

    pub fn from_assignment(&self, a: &Assignment) -> Result<Vec<f64>, LmiError> {
        let mut y = vec![0.0; self.len];
        for &(id, kind, off) in &self.entries {
            let m = a.get(&id).ok_or(LmiError::UnknownVariable(id))?;
            if m.shape() != kind.shape() {
                return Err(LmiError::DimensionMismatch(format!(
                    "value for {id:?} has shape {:?}, expected {:?}",
                    m.shape(),
                    kind.shape()
                )));
            }
            match kind {
                VarKind::Scalar => y[off] = m[(0, 0)],
                VarKind::Symmetric(d) => {
                    let mut k = off;
                    for i in 0..d {
                        for j in i..d {
                            y[k] = 0.5 * (m[(i, j)] + m[(j, i)]);
                            k += 1;
                        }
                    }
                }
                VarKind::Rect(_, c) => {
                    for (idx, v) in y[off..off + kind.scalar_count()].iter_mut().enumerate() {
                        *v = m[(idx / c, idx % c)];
                    }
                }
            }
        }
        Ok(y)
    }
}

/// `minimize cᵀy  s.t.  F₀ⱼ + Σₖ yₖ Fₖⱼ ⪰ 0` for every block `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardSdp {
    pub block_dims: Vec<usize>,
    pub c: Vec<f64>,
    pub f0: Vec<Mat>,
    /// Per block, the nonzero coefficient matrices keyed by scalar index.
    pub coeffs: Vec<Vec<(usize, Mat)>>,
}

impl StandardSdp {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn eval_block(&self, j: usize, y: &[f64]) -> Mat {
        let mut m = self.f0[j].clone();
        for (k, f) in &self.coeffs[j] {
            m += f * y[*k];
        }
        m
    }

    pub fn eval(&self, y: &[f64]) -> Vec<SymMat> {
        (0..self.block_dims.len())
            .map(|j| SymMat::symmetrized(self.eval_block(j, y)))
            .collect()
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        self.c.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// Plain-text dump: header with counts and block sizes, objective, then
    /// sparse entries `matrix-index block row col value` (upper triangle,
    /// 1-based; matrix index 0 is F₀).
    pub fn to_sdpa_like(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.num_vars());
        let _ = writeln!(s, "{}", self.block_dims.len());
        let dims: Vec<String> = self.block_dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "{}", dims.join(" "));
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        let mut emit = |k: usize, j: usize, m: &Mat| {
            for r in 0..m.nrows() {
                for col in r..m.ncols() {
                    let v = m[(r, col)];
                    if v != 0.0 {
                        let _ = writeln!(s, "{k} {} {} {} {v:e}", j + 1, r + 1, col + 1);
                    }
                }
            }
        };
        for (j, f0) in self.f0.iter().enumerate() {
            emit(0, j, f0);
        }
        for (j, list) in self.coeffs.iter().enumerate() {
            for (k, m) in list {
                emit(k + 1, j, m);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lowered {
    pub sdp: StandardSdp,
    pub var_map: VarMap,
    /// Names of declared variables that no constraint references.
    pub unused: Vec<String>,
}

fn sym_outer(l: &Mat, r: &Mat, a: usize, b: usize) -> Mat {
    l.column(a) * r.row(b)
}

/// Coefficient matrices of one term for every scalar of its variable.
fn term_coefficients(term: &Term, kind: VarKind, off: usize) -> Vec<(usize, Mat)> {
    match kind {
        VarKind::Scalar => vec![(off, &term.left * &term.right)],
        VarKind::Symmetric(d) => {
            let mut out = Vec::with_capacity(d * (d + 1) / 2);
            let mut k = off;
            for a in 0..d {
                for b in a..d {
                    let mut g = sym_outer(&term.left, &term.right, a, b);
                    if a != b {
                        g += sym_outer(&term.left, &term.right, b, a);
                    }
                    out.push((k, g));
                    k += 1;
                }
            }
            out
        }
        VarKind::Rect(r, c) => {
            let mut out = Vec::with_capacity(r * c);
            for a in 0..r {
                for b in 0..c {
                    out.push((off + a * c + b, sym_outer(&term.left, &term.right, a, b)));
                }
            }
            out
        }
    }
}

/// Lower to standard form. Each constraint becomes one block `s·E − εI ⪰ 0`.
pub fn lower_to_sdp(p: &LmiProblem) -> Result<Lowered, LmiError> {
    let var_map = VarMap::new(&p.variables);
    let mut block_dims = Vec::with_capacity(p.constraints.len());
    let mut f0 = Vec::with_capacity(p.constraints.len());
    let mut coeffs = Vec::with_capacity(p.constraints.len());
    let mut used = std::collections::BTreeSet::new();
    for con in &p.constraints {
        let dim = con.expr.dim;
        let s = con.sense.orientation();
        let mut acc: BTreeMap<usize, Mat> = BTreeMap::new();
        for term in &con.expr.terms {
            let (kind, off) = var_map
                .offset(term.var)
                .ok_or(LmiError::UnknownVariable(term.var))?;
            used.insert(term.var);
            for (k, g) in term_coefficients(term, kind, off) {
                acc.entry(k)
                    .and_modify(|m| *m += &g)
                    .or_insert(g);
            }
        }
        let list = acc
            .into_iter()
            .map(|(k, g)| (k, (&g + g.transpose()) * (0.5 * s)))
            .filter(|(_, g)| g.amax() > 0.0)
            .collect();
        let c0 = &con.expr.constant;
        let base = (c0 + c0.transpose()) * (0.5 * s) - DMatrix::identity(dim, dim) * con.margin;
        block_dims.push(dim);
        f0.push(base);
        coeffs.push(list);
    }
    let mut c = vec![0.0; var_map.len()];
    for &(id, coef) in &p.objective {
        let (kind, off) = var_map.offset(id).ok_or(LmiError::UnknownVariable(id))?;
        match kind {
            VarKind::Scalar => c[off] += coef,
            VarKind::Symmetric(d) => {
                let mut k = off;
                for a in 0..d {
                    c[k] += coef;
                    k += d - a;
                }
            }
            VarKind::Rect(..) => {
                return Err(LmiError::InvalidObjective(
                    "rectangular variable in objective".into(),
                ))
            }
        }
    }
    let unused = p
        .variables
        .iter()
        .filter(|d| !used.contains(&d.id))
        .map(|d| d.name.clone())
        .collect::<Vec<_>>();
    for name in &unused {
        log::warn!("variable '{name}' is not referenced by any constraint");
    }
    Ok(Lowered {
        sdp: StandardSdp {
            block_dims,
            c,
            f0,
            coeffs,
        },
        var_map,
        unused,
    })
}
