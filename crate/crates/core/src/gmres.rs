//! Restarted GMRES with left preconditioning.
//!
//! Arnoldi uses modified Gram–Schmidt (optionally a second pass) and the
//! least-squares problem is updated with Givens rotations, so the
//! preconditioned residual norm is available after every iteration without
//! computing the iterate. When that estimate reaches the tolerance the
//! iterate is formed and the true preconditioned residual is recomputed;
//! only if it also passes is the solve declared converged, otherwise the
//! method restarts from the new iterate.

use crate::error::{Error, Result};
use crate::fem::AssembledSystem;
use crate::precond::Preconditioner;
use crate::sparse::{dot, norm2};
use crate::tangent::TangentFrame;

/// A linear map on `R^n`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for Preconditioner {
    fn dim(&self) -> usize {
        Preconditioner::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        Preconditioner::apply_into(self, x, y)
    }
}

/// `A_Q = Qᵀ A_k Q`, applied without forming the 2N×2N matrix.
pub struct ReducedOperator<'a> {
    pub system: &'a AssembledSystem,
    pub frame: &'a TangentFrame,
}

impl<'a> ReducedOperator<'a> {
    pub fn new(system: &'a AssembledSystem, frame: &'a TangentFrame) -> Self {
        assert_eq!(system.n(), frame.num_nodes());
        ReducedOperator { system, frame }
    }

    /// `b_Q = Qᵀ b`
    pub fn reduced_rhs(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.frame.apply_qt_into(&self.system.rhs, &mut x);
        x
    }
}

impl LinearOperator for ReducedOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.system.n()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n3 = 3 * self.system.n();
        let mut v = vec![0.0; n3];
        let mut w = vec![0.0; n3];
        self.frame.apply_q_into(x, &mut v);
        self.system.apply_into(&v, &mut w);
        self.frame.apply_qt_into(&w, y);
    }
}

/// Operator given by a closure.
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Identity map on `R^n`.
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresConfig {
    /// Relative tolerance on the preconditioned residual.
    pub tol: f64,
    /// Krylov dimension per cycle.
    pub restart: usize,
    /// Cap on total inner iterations.
    pub maxit: usize,
    /// Second Gram–Schmidt pass.
    pub reorthogonalize: bool,
    /// Consecutive cycles whose estimate converged but whose true residual
    /// stayed above tolerance without halving, before giving up.
    pub max_stagnant_cycles: usize,
    /// A stagnated true residual within `floor_factor · tol` is accepted as
    /// the attainable accuracy (flagged in [`SolverStats::accuracy_floor`]).
    pub floor_factor: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig { tol: 1e-14, restart: 200, maxit: 10_000, reorthogonalize: false, max_stagnant_cycles: 3, floor_factor: 100.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct SolverStats {
    /// Inner (Arnoldi) iterations over all cycles.
    pub iterations: usize,
    /// Cycles started after the first.
    pub restarts: usize,
    /// `‖P(b − A x₀)‖`
    pub initial_residual: f64,
    /// Preconditioned residual estimate after each iteration.
    pub residual_history: Vec<f64>,
    /// Index into `residual_history` at which each cycle begins.
    pub cycle_starts: Vec<usize>,
    pub converged: bool,
    /// `‖P(b − A x)‖ / ‖P b‖` for the returned iterate.
    pub final_relative_residual: f64,
    pub operator_applies: usize,
    pub precond_applies: usize,
    /// Explicit residual evaluations beyond the initial one.
    pub residual_evaluations: usize,
    /// Arnoldi terminated because the Krylov space became invariant.
    pub happy_breakdown: bool,
    /// Converged at the rounding floor of the explicit residual rather than
    /// below `tol`; `final_relative_residual` holds the attained value.
    pub accuracy_floor: bool,
}

struct Counted<'a, A: LinearOperator + ?Sized> {
    op: &'a A,
    count: usize,
}

impl<A: LinearOperator + ?Sized> Counted<'_, A> {
    fn apply(&mut self, x: &[f64], y: &mut [f64]) {
        self.count += 1;
        self.op.apply_into(x, y);
    }
}

/// Solves `P A x = P b`.
pub fn gmres_solve<A, P>(op: &A, precond: &P, b: &[f64], x0: &[f64], cfg: &GmresConfig) -> Result<(Vec<f64>, SolverStats)>
where
    A: LinearOperator + ?Sized,
    P: LinearOperator + ?Sized,
{
    let n = op.dim();
    for len in [precond.dim(), b.len(), x0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    if !(cfg.tol > 0.0) || cfg.restart == 0 {
        return Err(Error::InvalidParameter("GMRES needs tol > 0 and restart >= 1".into()));
    }
    let mut a = Counted { op, count: 0 };
    let mut p = Counted { op: precond, count: 0 };
    let mut stats = SolverStats::default();

    let mut pb = vec![0.0; n];
    p.apply(b, &mut pb);
    let bnorm = norm2(&pb);
    if !bnorm.is_finite() {
        return Err(Error::NonFinite { iterations: 0 });
    }

    let mut x = x0.to_vec();
    let x0_zero = x0.iter().all(|&v| v == 0.0);
    let mut tmp = vec![0.0; n];
    let mut r = vec![0.0; n];
    let residual = |a: &mut Counted<A>, p: &mut Counted<P>, x: &[f64], r: &mut [f64], tmp: &mut [f64]| {
        a.apply(x, tmp);
        for (t, bi) in tmp.iter_mut().zip(b) {
            *t = bi - *t;
        }
        p.apply(tmp, r);
        norm2(r)
    };

    let mut beta = if x0_zero {
        r.copy_from_slice(&pb);
        bnorm
    } else {
        residual(&mut a, &mut p, &x, &mut r, &mut tmp)
    };
    stats.initial_residual = beta;

    let finish = |mut stats: SolverStats, x: Vec<f64>, beta: f64, converged: bool, a: &Counted<A>, p: &Counted<P>| {
        stats.converged = converged;
        stats.final_relative_residual = if bnorm > 0.0 { beta / bnorm } else { 0.0 };
        stats.operator_applies = a.count;
        stats.precond_applies = p.count;
        (x, stats)
    };

    if bnorm == 0.0 {
        // P is regular, so b = 0 and x = 0 solves the system exactly.
        if x0_zero || beta == 0.0 {
            return Ok(finish(stats, vec![0.0; n], 0.0, true, &a, &p));
        }
    }
    let target = cfg.tol * bnorm;
    if beta <= target {
        return Ok(finish(stats, x, beta, true, &a, &p));
    }

    let m = cfg.restart;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m + 1]; m]; // column-major: h[j][i]
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut stagnant = 0usize;
    let mut first_cycle = true;

    loop {
        if !first_cycle {
            stats.restarts += 1;
        }
        first_cycle = false;
        stats.cycle_starts.push(stats.residual_history.len());
        let cycle_beta = beta;

        v.clear();
        v.push(r.iter().map(|ri| ri / beta).collect());
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;

        let mut k = 0; // columns built in this cycle
        let mut estimate = beta;
        let mut breakdown = false;
        while k < m && stats.iterations < cfg.maxit {
            a.apply(&v[k], &mut tmp);
            let mut w = vec![0.0; n];
            p.apply(&tmp, &mut w);
            let wnorm0 = norm2(&w);
            let col = &mut h[k];
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                col[i] = hij;
                for (wl, vl) in w.iter_mut().zip(vi) {
                    *wl -= hij * vl;
                }
            }
            if cfg.reorthogonalize {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    col[i] += c;
                    for (wl, vl) in w.iter_mut().zip(vi) {
                        *wl -= c * vl;
                    }
                }
            }
            let hnext = norm2(&w);
            col[k + 1] = hnext;
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            cs[k] = c;
            sn[k] = s;
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;

            stats.iterations += 1;
            k += 1;
            estimate = g[k].abs();
            if !estimate.is_finite() || !hnext.is_finite() || !col[k - 1].is_finite() {
                return Err(Error::NonFinite { iterations: stats.iterations });
            }
            stats.residual_history.push(estimate);
            if estimate <= target {
                break;
            }
            if hnext <= f64::EPSILON * wnorm0 || hnext == 0.0 {
                breakdown = true;
                break;
            }
            v.push(w.iter().map(|wi| wi / hnext).collect());
        }

        // y = R⁻¹ g, x += V y
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xl, vl) in x.iter_mut().zip(&v[j]) {
                *xl += yj * vl;
            }
        }
        if x.iter().any(|xi| !xi.is_finite()) {
            return Err(Error::NonFinite { iterations: stats.iterations });
        }

        beta = residual(&mut a, &mut p, &x, &mut r, &mut tmp);
        stats.residual_evaluations += 1;
        if !beta.is_finite() {
            return Err(Error::NonFinite { iterations: stats.iterations });
        }
        if beta <= target {
            stats.happy_breakdown = breakdown;
            return Ok(finish(stats, x, beta, true, &a, &p));
        }
        if breakdown {
            return Err(Error::Breakdown { iterations: stats.iterations, residual: beta / bnorm });
        }
        if stats.iterations >= cfg.maxit {
            return Ok(finish(stats, x, beta, false, &a, &p));
        }
        if estimate <= target {
            // The estimate passed but the true residual did not: rounding floor.
            if beta > 0.5 * cycle_beta {
                stagnant += 1;
                if beta <= cfg.floor_factor * target {
                    stats.accuracy_floor = true;
                    return Ok(finish(stats, x, beta, true, &a, &p));
                }
                if stagnant >= cfg.max_stagnant_cycles {
                    return Ok(finish(stats, x, beta, false, &a, &p));
                }
            } else {
                stagnant = 0;
            }
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}
