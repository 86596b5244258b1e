//! Ensemble weight estimation.
//!
//! Three routes produce weights over the same sample moments:
//! penalized least squares in closed form (a base inverse plus one rank-one
//! inverse update per fairness penalty), risk minimization under hard
//! disparity budgets (a tiny dense active-set quadratic program), and
//! unfairness minimization under a risk budget (a one-dimensional dual
//! bisection with an exact small-dual limit). The constrained and penalized
//! forms are dual to each other, and the multiplier mapping implemented here
//! is exercised by roundtrip tests in both directions.

use ndarray::{Array1, Array2};

use crate::basis::{BasisMatrix, BasisSignature};
use crate::error::{FadeError, Result};
use crate::fairness::FairnessVector;
use crate::linalg::{cholesky, chol_solve_factored, inverse_spd, rank_one_downdate, sym_eigen};

/// Dual-feasibility threshold for the active-set program.
pub const KKT_TOL: f64 = 1e-9;
/// Relative tolerance on the risk level in unfairness minimization.
pub const RISK_TOL: f64 = 1e-10;
/// Denominator floor in rank-one inverse updates.
pub const BREAKDOWN_TOL: f64 = 1e-12;
/// Stand-in multiplier when a zero-budget constraint pins the disparity to
/// zero exactly; the squared-penalty multiplier diverges there.
pub const SATURATED_DUAL: f64 = 1e15;

/// Default penalty axis swept per fairness direction.
pub const DEFAULT_LAMBDA_AXIS: [f64; 11] =
    [0.0, 0.001, 0.01, 1.0, 10.0, 20.0, 50.0, 100.0, 500.0, 1000.0, 2000.0];

/// Sample moments of one fold: basis Gram matrix, basis-target moment,
/// per-criterion fairness moments, and optionally the squared-target constant
/// that completes the risk value.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub q: Array2<f64>,
    pub c: Array1<f64>,
    pub m: Vec<Array1<f64>>,
    pub m_labels: Vec<String>,
    pub d: Option<f64>,
    pub signature: BasisSignature,
}

/// Builds moments from an assembled basis, a target column, and fairness
/// vectors evaluated on the same fold. `d_values` are per-unit contributions
/// whose mean completes the quadratic risk (squared outcomes for observable
/// targets, squared-outcome pseudo-values for counterfactual ones).
pub fn build_problem(
    basis: &BasisMatrix,
    target: &[f64],
    fairness: &[FairnessVector],
    d_values: Option<&[f64]>,
) -> Result<ProblemData> {
    let n = basis.n();
    if target.len() != n {
        return Err(FadeError::Data(format!("target has {} rows, basis has {n}", target.len())));
    }
    if let Some(d) = d_values {
        if d.len() != n {
            return Err(FadeError::Data(format!(
                "risk-constant column has {} rows, basis has {n}",
                d.len()
            )));
        }
    }
    let b = basis.matrix();
    let nf = n as f64;
    let q = b.t().dot(b) / nf;
    let t = Array1::from_vec(target.to_vec());
    let c = b.t().dot(&t) / nf;
    let mut m = Vec::with_capacity(fairness.len());
    let mut m_labels = Vec::with_capacity(fairness.len());
    for fv in fairness {
        if fv.g.len() != n {
            return Err(FadeError::Data(format!(
                "fairness vector `{}` has {} rows, basis has {n}",
                fv.label,
                fv.g.len()
            )));
        }
        let g = Array1::from_vec(fv.g.clone());
        m.push(b.t().dot(&g) / nf);
        m_labels.push(fv.label.clone());
    }
    let d = d_values.map(|v| v.iter().sum::<f64>() / nf);
    Ok(ProblemData { q, c, m, m_labels, d, signature: basis.signature() })
}

impl ProblemData {
    pub fn k(&self) -> usize {
        self.q.nrows()
    }

    pub fn t(&self) -> usize {
        self.m.len()
    }

    /// Training disparity of a weight vector along criterion j.
    pub fn training_disparity(&self, j: usize, beta: &Array1<f64>) -> f64 {
        self.m[j].dot(beta)
    }

    /// Quadratic training risk; needs the squared-target constant.
    pub fn risk(&self, beta: &Array1<f64>) -> Result<f64> {
        let d = self.d.ok_or_else(|| {
            FadeError::Data("risk level undefined: moments were built without a risk constant".into())
        })?;
        Ok(beta.dot(&self.q.dot(beta)) - 2.0 * self.c.dot(beta) + d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolutionOrigin {
    Penalized { lambda: Vec<f64> },
    RiskConstrained { epsilon: Vec<f64>, dual: Vec<f64> },
    UnfairnessMin { epsilon: f64, alpha: Vec<f64>, dual: f64 },
}

#[derive(Debug, Clone)]
pub struct FadeSolution {
    pub beta: Array1<f64>,
    pub origin: SolutionOrigin,
    pub signature: BasisSignature,
}

/// Grid of penalty values, one axis per fairness criterion; points enumerate
/// the Cartesian product in lexicographic order (last axis fastest).
#[derive(Debug, Clone)]
pub struct LambdaGrid {
    pub axes: Vec<Vec<f64>>,
}

impl LambdaGrid {
    pub fn uniform(t: usize, axis: &[f64]) -> Self {
        LambdaGrid { axes: vec![axis.to_vec(); t] }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, t: usize) -> Result<()> {
        if self.axes.len() != t {
            return Err(FadeError::Config(format!(
                "grid has {} axes but the problem has {t} fairness criteria",
                self.axes.len()
            )));
        }
        for axis in &self.axes {
            if axis.is_empty() {
                return Err(FadeError::Config("empty penalty axis".into()));
            }
            if axis.iter().any(|&l| !l.is_finite() || l < 0.0) {
                return Err(FadeError::Config("penalty values must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        let t = self.axes.len();
        if t == 0 {
            return vec![vec![]];
        }
        let mut idx = vec![0usize; t];
        loop {
            out.push(idx.iter().enumerate().map(|(j, &i)| self.axes[j][i]).collect());
            let mut pos = t;
            while pos > 0 {
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.axes[pos].len() {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    return out;
                }
            }
        }
    }
}

fn validate_ridge(p: &ProblemData, ridge: Option<(f64, &Array2<f64>)>) -> Result<Array2<f64>> {
    let mut base = p.q.clone();
    if let Some((l0, k_mat)) = ridge {
        if !(l0 >= 0.0) || !l0.is_finite() {
            return Err(FadeError::Config("ridge scale must be finite and nonnegative".into()));
        }
        if l0 > 0.0 {
            if k_mat.nrows() != p.k() || k_mat.ncols() != p.k() {
                return Err(FadeError::Config("ridge matrix shape differs from the basis".into()));
            }
            let (vals, _) = sym_eigen(k_mat);
            let max = vals[vals.len() - 1].max(0.0);
            if vals[0] < -1e-10 * max.max(1.0) {
                return Err(FadeError::Config("ridge matrix must be positive semidefinite".into()));
            }
            base = &base + &(k_mat * l0);
        }
    }
    Ok(base)
}

fn penalized_from_inverse(
    p: &ProblemData,
    base_inv: &Array2<f64>,
    lambda: &[f64],
) -> Result<Array1<f64>> {
    let mut inv = base_inv.clone();
    // Fixed update order: one rank-one inverse update per criterion.
    for (j, &lam) in lambda.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let u = inv.dot(&p.m[j]);
        let denom = 1.0 + lam * p.m[j].dot(&u);
        if !(denom > BREAKDOWN_TOL) {
            return Err(FadeError::Numerical(format!(
                "rank-one update denominator {denom:.3e} at criterion {j} (lambda = {lam})"
            )));
        }
        rank_one_downdate(&mut inv, lam / denom, &u);
    }
    Ok(inv.dot(&p.c))
}

/// Penalized weights in closed form.
pub fn solve_penalized(
    p: &ProblemData,
    lambda: &[f64],
    ridge: Option<(f64, &Array2<f64>)>,
) -> Result<FadeSolution> {
    if lambda.len() != p.t() {
        return Err(FadeError::Config(format!(
            "{} penalties supplied for {} fairness criteria",
            lambda.len(),
            p.t()
        )));
    }
    if lambda.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(FadeError::Config("penalties must be finite and nonnegative".into()));
    }
    let base = validate_ridge(p, ridge)?;
    let base_inv = inverse_spd(&base, "penalized solve")?;
    let beta = penalized_from_inverse(p, &base_inv, lambda)?;
    Ok(FadeSolution {
        beta,
        origin: SolutionOrigin::Penalized { lambda: lambda.to_vec() },
        signature: p.signature,
    })
}

/// Sweeps a penalty grid. The base inverse is factored exactly once; every
/// grid point costs one rank-one update per nonzero penalty.
pub fn solve_grid(
    p: &ProblemData,
    grid: &LambdaGrid,
    ridge: Option<(f64, &Array2<f64>)>,
) -> Result<Vec<FadeSolution>> {
    grid.validate(p.t())?;
    let base = validate_ridge(p, ridge)?;
    let base_inv = inverse_spd(&base, "penalized sweep")?;
    grid.points()
        .into_iter()
        .map(|lambda| {
            let beta = penalized_from_inverse(p, &base_inv, &lambda)?;
            Ok(FadeSolution {
                beta,
                origin: SolutionOrigin::Penalized { lambda },
                signature: p.signature,
            })
        })
        .collect()
}

struct EqualitySolve {
    beta: Array1<f64>,
    duals: Vec<f64>,
}

/// Minimizes the quadratic risk subject to the working-set equalities
/// sign * m_jᵀ beta = eps_j, via the Schur complement on Q's inverse.
fn equality_solve(
    p: &ProblemData,
    q_inv: &Array2<f64>,
    working: &[(usize, f64)],
    eps: &[f64],
) -> Result<EqualitySolve> {
    if working.is_empty() {
        return Ok(EqualitySolve { beta: q_inv.dot(&p.c), duals: vec![] });
    }
    let w = working.len();
    let k = p.k();
    let mut rows = Array2::<f64>::zeros((w, k));
    let mut rhs = Array1::<f64>::zeros(w);
    for (r, &(j, s)) in working.iter().enumerate() {
        for i in 0..k {
            rows[[r, i]] = s * p.m[j][i];
        }
        rhs[r] = eps[j];
    }
    let qinv_c = q_inv.dot(&p.c);
    let qinv_at = q_inv.dot(&rows.t());
    let gram = rows.dot(&qinv_at);
    let h = rows.dot(&qinv_c) - rhs;
    let l = cholesky(&gram).ok_or_else(|| {
        FadeError::Numerical("degenerate working set in the constrained solve".into())
    })?;
    let w_vec = chol_solve_factored(&l, &h);
    let beta = qinv_c - qinv_at.dot(&w_vec);
    Ok(EqualitySolve { beta, duals: w_vec.iter().map(|v| 2.0 * v).collect() })
}

fn risk_min_once(p: &ProblemData, eps: &[f64]) -> Result<(Array1<f64>, Vec<f64>)> {
    let k = p.k();
    let q_inv = inverse_spd(&p.q, "constrained solve")?;
    // Constraints with a zero fairness moment can never be violated.
    let live: Vec<usize> = (0..p.t())
        .filter(|&j| p.m[j].iter().any(|v| v.abs() > 0.0))
        .collect();
    let feas = |j: usize| 1e-10 * (1.0 + eps[j]);
    let mut working: Vec<(usize, f64)> = live
        .iter()
        .copied()
        .filter(|&j| eps[j] == 0.0)
        .map(|j| (j, 1.0))
        .collect();
    let mut beta = Array1::<f64>::zeros(k);
    let max_iter = 60 * (p.t() + 1);
    for _ in 0..max_iter {
        let sol = equality_solve(p, &q_inv, &working, eps)?;
        // Violation scan over constraints outside the working set.
        let mut blocking: Option<((usize, f64), f64)> = None;
        for &j in &live {
            for s in [1.0, -1.0] {
                if working.iter().any(|&(wj, _)| wj == j) {
                    continue;
                }
                let v_new = s * p.m[j].dot(&sol.beta);
                if v_new > eps[j] + feas(j) {
                    let v_old = s * p.m[j].dot(&beta);
                    let step = (eps[j] - v_old) / (v_new - v_old);
                    let step = step.clamp(0.0, 1.0);
                    if blocking.map_or(true, |(_, best)| step < best) {
                        blocking = Some(((j, s), step));
                    }
                }
            }
        }
        match blocking {
            None => {
                // Feasible stationary point; check dual signs.
                let (worst_idx, worst) = sol
                    .duals
                    .iter()
                    .enumerate()
                    .fold((usize::MAX, f64::INFINITY), |acc, (i, &d)| {
                        if d < acc.1 {
                            (i, d)
                        } else {
                            acc
                        }
                    });
                if sol.duals.is_empty() || worst >= -KKT_TOL {
                    let mut dual = vec![0.0; p.t()];
                    for (&(j, _), &nu) in working.iter().zip(sol.duals.iter()) {
                        let nu = nu.max(0.0);
                        let active_level = p.m[j].dot(&sol.beta).abs();
                        dual[j] = if active_level > 1e-300 {
                            nu / (2.0 * active_level)
                        } else if nu > 0.0 {
                            SATURATED_DUAL
                        } else {
                            0.0
                        };
                    }
                    return Ok((sol.beta, dual));
                }
                working.remove(worst_idx);
                beta = sol.beta;
            }
            Some(((j, s), step)) => {
                beta = &beta + &((&sol.beta - &beta) * step);
                working.push((j, s));
            }
        }
    }
    Err(FadeError::Numerical("constrained solve exceeded its iteration budget".into()))
}

/// Minimum-risk weights subject to per-criterion disparity budgets
/// |m_jᵀ beta| <= eps_j. Returns the equivalent squared-penalty multipliers
/// alongside the weights.
pub fn solve_risk_min(p: &ProblemData, eps: &[f64]) -> Result<FadeSolution> {
    if eps.len() != p.t() {
        return Err(FadeError::Config(format!(
            "{} budgets supplied for {} fairness criteria",
            eps.len(),
            p.t()
        )));
    }
    if eps.iter().any(|&e| !e.is_finite() || e < 0.0) {
        return Err(FadeError::Config("disparity budgets must be finite and nonnegative".into()));
    }
    let attempt = risk_min_once(p, eps);
    let (beta, dual) = match attempt {
        Ok(res) => res,
        Err(FadeError::Numerical(_)) => {
            // One retry under a microscopic budget perturbation, then give up.
            let nudged: Vec<f64> = eps.iter().map(|&e| e + 1e-12 * (1.0 + e)).collect();
            risk_min_once(p, &nudged)?
        }
        Err(e) => return Err(e),
    };
    Ok(FadeSolution {
        beta,
        origin: SolutionOrigin::RiskConstrained { epsilon: eps.to_vec(), dual },
        signature: p.signature,
    })
}

/// Minimum-unfairness weights subject to a risk budget epsilon^2, where the
/// unfairness is the alpha-weighted sum of squared training disparities.
/// Among exact unfairness minimizers the least-risk one is returned (the
/// small-dual limit, computed on the null space of the unfairness Gram).
pub fn solve_unfair_min(p: &ProblemData, epsilon: f64, alpha: &[f64]) -> Result<FadeSolution> {
    if alpha.len() != p.t() {
        return Err(FadeError::Config(format!(
            "{} unfairness weights supplied for {} criteria",
            alpha.len(),
            p.t()
        )));
    }
    if alpha.iter().any(|&a| !a.is_finite() || a < 0.0) {
        return Err(FadeError::Config("unfairness weights must be finite and nonnegative".into()));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(FadeError::Config("risk budget must be a positive real".into()));
    }
    let budget = epsilon * epsilon;
    let k = p.k();
    let q_inv = inverse_spd(&p.q, "unfairness minimization")?;
    let beta_ols = q_inv.dot(&p.c);
    let risk_ols = p.risk(&beta_ols)?;
    let rtol = RISK_TOL * budget.max(1.0);
    if budget < risk_ols - rtol {
        return Err(FadeError::Infeasible { requested: budget, minimum: risk_ols });
    }

    let mut m_mat = Array2::<f64>::zeros((k, k));
    for (j, mj) in p.m.iter().enumerate() {
        if alpha[j] == 0.0 {
            continue;
        }
        for r in 0..k {
            for c in 0..k {
                m_mat[[r, c]] += alpha[j] * mj[r] * mj[c];
            }
        }
    }
    let finish = |beta: Array1<f64>, dual: f64| FadeSolution {
        beta,
        origin: SolutionOrigin::UnfairnessMin { epsilon, alpha: alpha.to_vec(), dual },
        signature: p.signature,
    };

    let (evals, evecs) = sym_eigen(&m_mat);
    let max_eig = evals[k - 1].max(0.0);
    if max_eig <= 0.0 {
        // Zero unfairness everywhere; least risk breaks the tie.
        return Ok(finish(beta_ols, 0.0));
    }
    let null_dim = evals.iter().filter(|&&v| v <= 1e-12 * max_eig).count();
    let beta_limit = if null_dim > 0 {
        let nmat = evecs.slice(ndarray::s![.., 0..null_dim]).to_owned();
        let qn = nmat.t().dot(&p.q.dot(&nmat));
        let rhs = nmat.t().dot(&p.c);
        let t = crate::linalg::solve_spd(&qn, &rhs, "null-space risk minimization")?;
        nmat.dot(&t)
    } else {
        Array1::zeros(k)
    };
    if p.risk(&beta_limit)? <= budget + rtol {
        return Ok(finish(beta_limit, 0.0));
    }

    // Dual bisection: risk of beta(nu) = nu (M + nu Q)^{-1} c decreases in nu.
    let beta_at = |nu: f64| -> Result<Array1<f64>> {
        let sys = &m_mat + &(&p.q * nu);
        let l = cholesky(&sys)
            .ok_or_else(|| FadeError::Numerical(format!("singular dual system at nu = {nu:.3e}")))?;
        Ok(chol_solve_factored(&l, &p.c) * nu)
    };
    let mut lo = 1e-12;
    let mut hi = 1e12;
    while p.risk(&beta_at(hi)?)? > budget + rtol {
        hi *= 10.0;
        if hi > 1e15 {
            return Err(FadeError::Numerical(
                "risk budget unreachable along the dual path".into(),
            ));
        }
    }
    if p.risk(&beta_at(lo)?)? <= budget {
        // The whole path is feasible; the smallest dual is the fairest point.
        return Ok(finish(beta_at(lo)?, lo));
    }
    let mut nu = hi;
    for _ in 0..200 {
        nu = ((lo.ln() + hi.ln()) / 2.0).exp();
        let r = p.risk(&beta_at(nu)?)?;
        if (r - budget).abs() <= rtol {
            break;
        }
        if r > budget {
            lo = nu;
        } else {
            hi = nu;
        }
    }
    // Land on the feasible side of the budget.
    let (beta, nu) = {
        let b = beta_at(nu)?;
        if p.risk(&b)? <= budget + rtol {
            (b, nu)
        } else {
            (beta_at(hi)?, hi)
        }
    };
    Ok(finish(beta, nu))
}

/// Derives a penalty grid from a constrained solution: each axis carries 0,
/// the mapped multiplier, and the multiplier scaled by each spread factor.
pub fn seed_grid(sol: &FadeSolution, spread: &[f64]) -> Result<LambdaGrid> {
    let dual = match &sol.origin {
        SolutionOrigin::RiskConstrained { dual, .. } => dual,
        _ => {
            return Err(FadeError::Config(
                "grid seeding needs a constrained solution with mapped multipliers".into(),
            ))
        }
    };
    if spread.iter().any(|&s| !s.is_finite() || s <= 0.0) {
        return Err(FadeError::Config("spread factors must be positive".into()));
    }
    let axes = dual
        .iter()
        .map(|&l| {
            let mut axis = vec![0.0, l];
            axis.extend(spread.iter().map(|&s| s * l));
            axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
            axis.dedup();
            axis
        })
        .collect();
    Ok(LambdaGrid { axes })
}

/// Evaluates a solution on a basis, refusing weight vectors that came from a
/// structurally different basis (column signature mismatch). Fold parts may
/// differ: training weights are routinely applied to held-out folds.
pub fn predict_solution(basis: &BasisMatrix, sol: &FadeSolution, truncate: bool) -> Result<Vec<f64>> {
    if basis.signature().columns != sol.signature.columns {
        return Err(FadeError::SignatureMismatch(format!(
            "solution was fit on basis {} but is being applied to {}",
            sol.signature,
            basis.signature()
        )));
    }
    basis.predict(&sol.beta, truncate)
}
