//! Penalized quadratic programs over the capped simplex, solved by ADMM
//! with over-relaxation.
//!
//! The objective is `(lambda/2) * ||M w - f||^2 -/+ c' w` over
//! `{w >= 0, sum w <= 1}`: the fit term pulls the weighted column mixture
//! toward the estimated CDF vector, the linear term pushes the functional
//! down (lower bound) or up (upper bound).

use serde::{Deserialize, Serialize};

use crate::assembly::IndicatorMatrix;
use crate::error::{Error, Result};

/// Which bound the program computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Lower,
    Upper,
}

/// One finite program instance. Borrows its data; the bounds loop owns the
/// growing pool.
#[derive(Debug, Clone, Copy)]
pub struct QpProblem<'a> {
    pub matrix: &'a IndicatorMatrix,
    /// Flattened CDF field, one entry per grid cell.
    pub target: &'a [f64],
    /// Functional value per column.
    pub objective: &'a [f64],
    pub penalty: f64,
    pub sense: Sense,
}

impl<'a> QpProblem<'a> {
    fn validate(&self) -> Result<()> {
        if self.target.len() != self.matrix.nrows() {
            return Err(Error::validation(format!(
                "target has {} entries for {} rows",
                self.target.len(),
                self.matrix.nrows()
            )));
        }
        if self.objective.len() != self.matrix.ncols() {
            return Err(Error::validation(format!(
                "objective has {} entries for {} columns",
                self.objective.len(),
                self.matrix.ncols()
            )));
        }
        if self.penalty <= 0.0 || !self.penalty.is_finite() {
            return Err(Error::validation("penalty must be strictly positive"));
        }
        Ok(())
    }

    /// Sign applied to the functional so both senses minimize.
    fn sign(&self) -> f64 {
        match self.sense {
            Sense::Lower => 1.0,
            Sense::Upper => -1.0,
        }
    }
}

/// ADMM tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    /// Augmented Lagrangian parameter.
    pub rho: f64,
    /// Over-relaxation in (0, 2).
    pub over_relax: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    /// Inner conjugate-gradient relative tolerance.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        AdmmParams {
            rho: 250.0,
            over_relax: 1.7,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            max_iter: 4000,
            cg_tol: 1e-8,
            cg_max_iter: 50,
        }
    }
}

impl AdmmParams {
    fn validate(&self) -> Result<()> {
        if self.rho <= 0.0 {
            return Err(Error::validation("rho must be positive"));
        }
        if !(0.0 < self.over_relax && self.over_relax < 2.0) {
            return Err(Error::validation("over-relaxation must lie in (0, 2)"));
        }
        if self.tol_primal <= 0.0 || self.tol_dual <= 0.0 {
            return Err(Error::validation("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Solver output. `weights` is the projected (exactly feasible) iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub weights: Vec<f64>,
    /// Scaled ADMM dual at exit; feed it back as a warm start.
    pub dual: Vec<f64>,
    /// Full penalized objective including the constant CDF norm term.
    pub objective_value: f64,
    /// The functional read at the solution, regardless of sense.
    pub functional_value: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

/// Primal (and optionally dual) starting point carried across solves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub weights: Vec<f64>,
    pub dual: Vec<f64>,
}

impl WarmStart {
    pub fn from_solution(sol: &QpSolution) -> Self {
        WarmStart {
            weights: sol.weights.clone(),
            dual: sol.dual.clone(),
        }
    }

    /// Zero-pad both vectors for freshly appended columns.
    pub fn pad_to(&mut self, n: usize) {
        self.weights.resize(n, 0.0);
        self.dual.resize(n, 0.0);
    }

    /// Keep only the entries at `kept` positions (ascending).
    pub fn retain(&mut self, kept: &[usize]) {
        self.weights = kept.iter().map(|&i| self.weights[i]).collect();
        self.dual = kept.iter().map(|&i| self.dual[i]).collect();
    }
}

/// Euclidean projection onto `{w >= 0, sum w <= 1}`.
///
/// Negative entries are clipped; if the clipped point already satisfies the
/// mass cap it is the projection, otherwise the projection lies on the face
/// `sum w = 1` and the sorted-threshold simplex rule applies.
pub fn project_capped_simplex(v: &[f64]) -> Vec<f64> {
    let clipped_sum: f64 = v.iter().filter(|&&x| x > 0.0).sum();
    if clipped_sum <= 1.0 {
        return v.iter().map(|&x| x.max(0.0)).collect();
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let cand = (cumsum - 1.0) / (k + 1) as f64;
        if s - cand > 0.0 {
            tau = cand;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    // rounding can leave the mass a few ulps above 1; shave the excess off
    // the largest entries so the output is feasible bit-exactly and a second
    // projection is the identity
    loop {
        let total: f64 = out.iter().filter(|&&x| x > 0.0).sum();
        if total <= 1.0 {
            break;
        }
        let argmax = out
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let adjusted = (out[argmax] - (total - 1.0)).max(0.0);
        out[argmax] = if adjusted == out[argmax] {
            adjusted.next_down().max(0.0)
        } else {
            adjusted
        };
    }
    out
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scratch space for the normal-equation operator
/// `p -> lambda * M'(M p) + rho * p`.
struct GramOperator<'a> {
    matrix: &'a IndicatorMatrix,
    lambda: f64,
    rho: f64,
    row_buf: Vec<f64>,
    col_buf: Vec<f64>,
}

impl<'a> GramOperator<'a> {
    fn apply(&mut self, p: &[f64], out: &mut [f64]) {
        self.matrix.mul_vec(p, &mut self.row_buf);
        self.matrix.tr_mul_vec(&self.row_buf, &mut self.col_buf);
        for i in 0..p.len() {
            out[i] = self.lambda * self.col_buf[i] + self.rho * p[i];
        }
    }
}

/// Conjugate gradient on the implicit operator, warm-started at `x`.
fn cg_solve(
    op: &mut GramOperator,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<()> {
    let n = b.len();
    let mut ax = vec![0.0; n];
    op.apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let threshold = tol * norm2(b).max(1.0);
    let mut rs = dot(&r, &r);
    if rs.sqrt() <= threshold {
        return Ok(());
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        op.apply(&p, &mut ap);
        let denom = dot(&p, &ap);
        if denom <= 0.0 || !denom.is_finite() {
            return Err(Error::numeric("conjugate gradient lost positivity"));
        }
        let alpha = rs / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= threshold {
            return Ok(());
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Ok(())
}

/// Solve one program. A `warm_start` (previous weights, zero-padded by the
/// caller for fresh columns) typically cuts the iteration count sharply.
///
/// Hitting `max_iter` is not an error: the solution is returned with
/// `converged = false` and the residuals, and the caller decides.
pub fn solve(
    problem: &QpProblem,
    params: &AdmmParams,
    warm_start: Option<&WarmStart>,
) -> Result<QpSolution> {
    problem.validate()?;
    params.validate()?;
    let n = problem.matrix.ncols();
    let nrows = problem.matrix.nrows();
    let lambda = problem.penalty;
    let sign = problem.sign();

    // fixed part of the mu-update right-hand side: lambda M'f - sign * c
    let mut base = vec![0.0; n];
    problem.matrix.tr_mul_vec(problem.target, &mut base);
    for i in 0..n {
        base[i] = lambda * base[i] - sign * problem.objective[i];
    }

    let (mut mu, mut dual): (Vec<f64>, Vec<f64>) = match warm_start {
        Some(w) if w.weights.len() == n && w.dual.len() == n => {
            (w.weights.clone(), w.dual.clone())
        }
        Some(w) => {
            return Err(Error::validation(format!(
                "warm start has {} weights / {} duals for {n} columns",
                w.weights.len(),
                w.dual.len()
            )))
        }
        None => (vec![0.0; n], vec![0.0; n]),
    };
    let mut nu = project_capped_simplex(&mu);

    let mut op = GramOperator {
        matrix: problem.matrix,
        lambda,
        rho: params.rho,
        row_buf: vec![0.0; nrows],
        col_buf: vec![0.0; n],
    };

    let mut rhs = vec![0.0; n];
    let mut relaxed = vec![0.0; n];
    let mut to_project = vec![0.0; n];
    let mut iterations = 0;
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;
    let mut converged = false;
    let sqrt_n = (n as f64).sqrt();
    const ABS_TOL: f64 = 1e-9;

    for it in 1..=params.max_iter {
        iterations = it;
        for i in 0..n {
            rhs[i] = base[i] + params.rho * (nu[i] - dual[i]);
        }
        cg_solve(&mut op, &rhs, &mut mu, params.cg_tol, params.cg_max_iter)?;

        for i in 0..n {
            relaxed[i] = params.over_relax * mu[i] + (1.0 - params.over_relax) * nu[i];
            to_project[i] = relaxed[i] + dual[i];
        }
        let nu_next = project_capped_simplex(&to_project);

        let mut r2 = 0.0;
        let mut s2 = 0.0;
        let mut mu2 = 0.0;
        let mut nu2 = 0.0;
        let mut u2 = 0.0;
        for i in 0..n {
            dual[i] += relaxed[i] - nu_next[i];
            let r = mu[i] - nu_next[i];
            let s = nu_next[i] - nu[i];
            r2 += r * r;
            s2 += s * s;
            mu2 += mu[i] * mu[i];
            nu2 += nu_next[i] * nu_next[i];
            u2 += dual[i] * dual[i];
        }
        nu = nu_next;
        primal_residual = r2.sqrt();
        dual_residual = params.rho * s2.sqrt();
        if !primal_residual.is_finite() || !dual_residual.is_finite() {
            return Err(Error::numeric("non-finite ADMM residual"));
        }

        let eps_pri =
            sqrt_n * ABS_TOL + params.tol_primal * mu2.sqrt().max(nu2.sqrt()).max(1.0);
        let eps_dual = sqrt_n * ABS_TOL + params.tol_dual * (params.rho * u2.sqrt()).max(1.0);
        if primal_residual <= eps_pri && dual_residual <= eps_dual {
            converged = true;
            break;
        }
    }

    // report the projected iterate: exactly feasible
    let weights = nu;
    let mut fit = vec![0.0; nrows];
    problem.matrix.mul_vec(&weights, &mut fit);
    let misfit: f64 = fit
        .iter()
        .zip(problem.target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let functional_value = dot(&weights, problem.objective);
    let objective_value = 0.5 * lambda * misfit + sign * functional_value;
    if !objective_value.is_finite() {
        return Err(Error::numeric("non-finite objective"));
    }
    Ok(QpSolution {
        weights,
        dual,
        objective_value,
        functional_value,
        iterations,
        primal_residual,
        dual_residual,
        converged,
    })
}
