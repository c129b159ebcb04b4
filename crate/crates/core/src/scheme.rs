//! Time stepping with the first- and second-order tangent plane schemes.
//!
//! One step: (a) the element field `λ` (second-order scheme only),
//! (b) the tangent-space linear system solved for `v ∈ K_h[m]` through the
//! reduced 2N system, (c) nodal normalization of `m + k v`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{AssembledSystem, FemSpace, NodalField3, ScalarMatrix};
use crate::field::MagnetizationField;
use crate::gmres::{gmres_solve, GmresConfig, ReducedOperator, SolverStats};
use crate::physics::{pi_apply, AppliedField, PiKind};
use crate::precond::{self, PrecondKind, Preconditioner, ScalarFactor};
use crate::tangent::{build_frame, select_tn, FrameSelection, FrameStrategy, TangentFrame, TnChoice};
use crate::vec3::{self, Vec3};

/// Largest accepted `|v·m| / (1 + |v|)` for a solved update.
pub const TANGENCY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SchemeVariant {
    #[default]
    Tps1,
    Tps2,
}

impl SchemeVariant {
    pub fn name(self) -> &'static str {
        match self {
            SchemeVariant::Tps1 => "tps1",
            SchemeVariant::Tps2 => "tps2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeCoefficients {
    pub variant: SchemeVariant,
    pub alpha: f64,
    /// `Θ`, only used by the first-order scheme.
    pub theta: f64,
    pub ell_ex2: f64,
}

impl SchemeCoefficients {
    pub fn new(variant: SchemeVariant, alpha: f64, theta: f64, ell_ex2: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidParameter(format!("theta must lie in (0, 1], got {theta}")));
        }
        if !(ell_ex2 >= 0.0) || !ell_ex2.is_finite() {
            return Err(Error::InvalidParameter(format!("ell_ex2 must be non-negative, got {ell_ex2}")));
        }
        Ok(SchemeCoefficients { variant, alpha, theta, ell_ex2 })
    }

    pub fn tps1(alpha: f64, ell_ex2: f64) -> Result<Self> {
        Self::new(SchemeVariant::Tps1, alpha, 1.0, ell_ex2)
    }

    pub fn tps2(alpha: f64, ell_ex2: f64) -> Result<Self> {
        Self::new(SchemeVariant::Tps2, alpha, 1.0, ell_ex2)
    }

    pub fn check_k(&self, k: f64) -> Result<()> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {k}")));
        }
        if self.variant == SchemeVariant::Tps2 && k >= 1.0 {
            return Err(Error::InvalidParameter(format!("the second-order scheme needs k < 1, got {k}")));
        }
        Ok(())
    }

    /// `ρ(k) = |k ln k|`
    pub fn rho(k: f64) -> f64 {
        (k * k.ln()).abs()
    }

    /// Cap `M(k) = 1/ρ(k)`.
    pub fn cap(k: f64) -> f64 {
        1.0 / Self::rho(k)
    }

    /// `W_k(s)`
    pub fn wk(&self, k: f64, s: f64) -> Result<f64> {
        self.check_k(k)?;
        Ok(self.wk_unchecked(k, s))
    }

    fn wk_unchecked(&self, k: f64, s: f64) -> f64 {
        match self.variant {
            SchemeVariant::Tps1 => self.alpha,
            SchemeVariant::Tps2 => {
                let cap = Self::cap(k);
                if s >= 0.0 {
                    self.alpha + 0.5 * k * s.min(cap)
                } else {
                    self.alpha / (1.0 + k / (2.0 * self.alpha) * (-s).min(cap))
                }
            }
        }
    }

    /// `β(k)`
    pub fn beta(&self, k: f64) -> f64 {
        match self.variant {
            SchemeVariant::Tps1 => self.ell_ex2 * self.theta,
            SchemeVariant::Tps2 => 0.5 * self.ell_ex2 * (1.0 + Self::rho(k)),
        }
    }
}

pub fn wk_eval(coeffs: &SchemeCoefficients, k: f64, s: f64) -> Result<f64> {
    coeffs.wk(k, s)
}

/// Per element: `−ℓ²|∇m|²` plus the element mean of the nodal `(f+π)·m`.
pub fn lambda_field(space: &FemSpace, m: &[Vec3], f_plus_pi: &NodalField3, ell_ex2: f64) -> Vec<f64> {
    let products: Vec<f64> = m.iter().zip(f_plus_pi.values()).map(|(&a, &b)| vec3::dot(a, b)).collect();
    let means = space.element_means(&products);
    space.gradient_norms_sq(m).iter().zip(&means).map(|(g, p)| -ell_ex2 * g + p).collect()
}

/// Lower-order data of the right-hand side: `π(mₙ) + f(tₙ)` for the first
/// order scheme, `(3/2)π(mₙ) − (1/2)π(mₙ₋₁) + f(tₙ + k/2)` for the second.
#[allow(clippy::too_many_arguments)]
pub fn lh_term(
    coeffs: &SchemeCoefficients,
    space: &FemSpace,
    pi: &PiKind,
    applied: &AppliedField,
    m_n: &[Vec3],
    m_nm1: &[Vec3],
    t_n: f64,
    k: f64,
) -> NodalField3 {
    let nodes = space.mesh().nodes();
    match coeffs.variant {
        SchemeVariant::Tps1 => {
            let f = applied.interpolate(nodes, t_n);
            f.axpy(1.0, &pi_apply(pi, space, m_n))
        }
        SchemeVariant::Tps2 => {
            let f = applied.interpolate(nodes, t_n + 0.5 * k);
            let p_n = pi_apply(pi, space, m_n);
            if matches!(pi, PiKind::Zero) {
                return f;
            }
            let p_nm1 = pi_apply(pi, space, m_nm1);
            NodalField3(
                f.values()
                    .iter()
                    .zip(p_n.values().iter().zip(p_nm1.values()))
                    .map(|(&fi, (&a, &b))| vec3::add(fi, vec3::axpy(vec3::scale(1.5, a), -0.5, b)))
                    .collect(),
            )
        }
    }
}

/// `max_z |v(z)·m(z)|`, with the node attaining it.
pub fn max_tangency(m: &[Vec3], v: &NodalField3) -> (usize, f64) {
    m.iter()
        .zip(v.values())
        .map(|(&a, &b)| vec3::dot(a, b).abs())
        .enumerate()
        .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best })
}

fn check_tangent(m: &[Vec3], v: &NodalField3) -> Result<()> {
    let (node, d) = max_tangency(m, v);
    let scale = 1.0 + v.max_norm();
    if !(d <= TANGENCY_TOLERANCE * scale) {
        return Err(Error::TangencyViolation { node, violation: d });
    }
    Ok(())
}

/// `m + k v`, normalized nodewise.
pub fn normalize_update(m: &MagnetizationField, v: &NodalField3, k: f64) -> Result<MagnetizationField> {
    if m.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: m.len(), got: v.len() });
    }
    check_tangent(m.values(), v)?;
    let mut out = Vec::with_capacity(m.len());
    for (node, (&a, &b)) in m.values().iter().zip(v.values()).enumerate() {
        let u = vec3::axpy(a, k, b);
        let len2 = vec3::dot(u, u);
        let expected = vec3::dot(a, a) + k * k * vec3::dot(b, b);
        if (len2 - expected).abs() > 1e-10 * expected {
            return Err(Error::TangencyViolation { node, violation: vec3::dot(a, b).abs() });
        }
        out.push(vec3::scale(1.0 / len2.sqrt(), u));
    }
    Ok(MagnetizationField::from_values_unchecked(out))
}

/// `m + k v` without normalization.
pub fn unprojected_update(m: &MagnetizationField, v: &NodalField3, k: f64) -> Result<MagnetizationField> {
    if m.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: m.len(), got: v.len() });
    }
    let dirs = m.directions();
    check_tangent(&dirs, v)?;
    Ok(MagnetizationField::from_values_unchecked(
        m.values().iter().zip(v.values()).map(|(&a, &b)| vec3::axpy(a, k, b)).collect(),
    ))
}

/// Linear solver, preconditioner and frame settings of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveSettings {
    pub gmres: GmresConfig,
    pub precond: PrecondKind,
    pub alpha_p: f64,
    /// Rebuild the theoretical preconditioner every this many steps.
    pub rebuild_every: usize,
    pub tn: TnChoice,
    pub frame: FrameStrategy,
    /// Normalize after each step.
    pub projection: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            gmres: GmresConfig::default(),
            precond: PrecondKind::Practical,
            alpha_p: 1.0,
            rebuild_every: 1,
            tn: TnChoice::Adaptive,
            frame: FrameStrategy::Householder,
            projection: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TimeStepState {
    pub n: usize,
    pub t: f64,
    pub m: MagnetizationField,
    pub m_prev: MagnetizationField,
    pub last_stats: Option<SolverStats>,
}

impl TimeStepState {
    /// Initial state with `m⁻¹ := m⁰`.
    pub fn initial(m0: MagnetizationField) -> Self {
        TimeStepState { n: 0, t: 0.0, m_prev: m0.clone(), m: m0, last_stats: None }
    }
}

/// Everything observed during one step.
#[derive(Clone, Debug)]
pub struct StepReport {
    /// Index of the completed step (1-based: the state after it is `m^{n}`).
    pub step: usize,
    pub t: f64,
    pub stats: SolverStats,
    pub selection: FrameSelection,
    /// Reduced solution `x` with `v = Q x`.
    pub x: Vec<f64>,
    pub v: NodalField3,
    /// `max_z |v(z)·m(z)|` against the step's input field.
    pub tangency: f64,
    /// `max_z | |m+kv|² − (|m|² + k²|v|²) |`
    pub pythagoras_defect: f64,
    /// `max_z | |m^{n+1}(z)| − 1 |`
    pub unit_deviation: f64,
    pub exchange_energy: f64,
}

/// Reusable per-run data: assembled constant matrices and cached
/// preconditioner factors.
pub struct Stepper {
    pub space: Arc<FemSpace>,
    pub mass: Arc<ScalarMatrix>,
    pub stiffness: Arc<ScalarMatrix>,
    pub coeffs: SchemeCoefficients,
    pub k: f64,
    pub pi: PiKind,
    pub applied: AppliedField,
    pub settings: SolveSettings,
    scalar: Option<Arc<ScalarFactor>>,
    cached_theoretical: Option<(usize, Preconditioner)>,
}

impl Stepper {
    pub fn new(
        space: Arc<FemSpace>,
        coeffs: SchemeCoefficients,
        k: f64,
        pi: PiKind,
        applied: AppliedField,
        settings: SolveSettings,
    ) -> Result<Self> {
        coeffs.check_k(k)?;
        pi.validate()?;
        if settings.rebuild_every == 0 {
            return Err(Error::InvalidParameter("rebuild_every must be at least 1".into()));
        }
        let mass = Arc::new(space.mass());
        let stiffness = Arc::new(space.stiffness());
        let beta_k = coeffs.beta(k) * k;
        let scalar = match settings.precond {
            PrecondKind::Stationary | PrecondKind::Practical => Some(ScalarFactor::new(&mass, &stiffness, settings.alpha_p, beta_k)?),
            _ => None,
        };
        Ok(Stepper { space, mass, stiffness, coeffs, k, pi, applied, settings, scalar, cached_theoretical: None })
    }

    pub fn beta_k(&self) -> f64 {
        self.coeffs.beta(self.k) * self.k
    }

    /// Frame and selection for a field (directions are used, so the
    /// projection-free variant is covered).
    pub fn frame_for(&self, m: &MagnetizationField) -> Result<(FrameSelection, TangentFrame)> {
        let dirs = m.directions();
        let sel = select_tn(&dirs, self.settings.tn);
        let frame = build_frame(&dirs, &sel.t, self.settings.frame)?;
        Ok((sel, frame))
    }

    /// Assembles `A_k[mₙ]` and `b[mₙ]`.
    pub fn assemble(&self, state: &TimeStepState) -> Result<AssembledSystem> {
        let m = state.m.values();
        let k = self.k;
        let lh = lh_term(&self.coeffs, &self.space, &self.pi, &self.applied, m, state.m_prev.values(), state.t, k);
        let ne = self.space.mesh().num_elements();
        let weights = match self.coeffs.variant {
            SchemeVariant::Tps1 => vec![1.0; ne],
            SchemeVariant::Tps2 => {
                let f_plus_pi =
                    self.applied.interpolate(self.space.mesh().nodes(), state.t).axpy(1.0, &pi_apply(&self.pi, &self.space, m));
                lambda_field(&self.space, m, &f_plus_pi, self.coeffs.ell_ex2)
                    .into_iter()
                    .map(|l| self.coeffs.wk_unchecked(k, l) / self.coeffs.alpha)
                    .collect()
            }
        };
        let weighted_mass = self.space.weighted_mass(&weights)?;
        let cross = self.space.cross(m)?;
        let rhs = self.space.rhs(&self.mass, &self.stiffness, m, &lh, self.coeffs.ell_ex2);
        Ok(AssembledSystem {
            alpha: self.coeffs.alpha,
            beta_k: self.beta_k(),
            mass: self.mass.clone(),
            stiffness: self.stiffness.clone(),
            weighted_mass,
            cross,
            rhs,
        })
    }

    fn preconditioner(&mut self, step: usize, frame: &TangentFrame) -> Result<Preconditioner> {
        let s = self.settings;
        Ok(match s.precond {
            PrecondKind::Stationary => Preconditioner::stationary(self.scalar.clone().expect("factor built in new")),
            PrecondKind::Practical => Preconditioner::practical(self.scalar.clone().expect("factor built in new"), Arc::new(frame.clone()))?,
            PrecondKind::Theoretical => {
                let fresh = match &self.cached_theoretical {
                    Some((built, _)) => step - built >= s.rebuild_every,
                    None => true,
                };
                if fresh {
                    let p = precond::build_theoretical(frame, &self.mass, &self.stiffness, s.alpha_p, self.beta_k())?;
                    self.cached_theoretical = Some((step, p));
                }
                self.cached_theoretical.as_ref().unwrap().1.clone()
            }
            kind => precond::build(kind, None, &self.mass, &self.stiffness, s.alpha_p, self.beta_k())?,
        })
    }

    /// Advances one step. Errors are wrapped with the (1-based) step index.
    pub fn step(&mut self, state: &TimeStepState) -> Result<(TimeStepState, StepReport)> {
        let step = state.n + 1;
        self.step_inner(state).map_err(|e| Error::Step { step, source: Box::new(e) })
    }

    fn step_inner(&mut self, state: &TimeStepState) -> Result<(TimeStepState, StepReport)> {
        let (selection, frame) = self.frame_for(&state.m)?;
        let system = self.assemble(state)?;
        let op = ReducedOperator::new(&system, &frame);
        let bq = op.reduced_rhs();
        let p = self.preconditioner(state.n, &frame)?;
        let x0 = vec![0.0; bq.len()];
        let (x, stats) = gmres_solve(&op, &p, &bq, &x0, &self.settings.gmres)?;
        if !stats.converged {
            return Err(Error::NotConverged { iterations: stats.iterations, residual: stats.final_relative_residual });
        }
        let v = NodalField3::from_flat(&frame.apply_q(&x)?);
        let dirs = state.m.directions();
        let (_, tangency) = max_tangency(&dirs, &v);
        let next = if self.settings.projection {
            normalize_update(&state.m, &v, self.k)?
        } else {
            unprojected_update(&state.m, &v, self.k)?
        };
        let pythagoras_defect = state
            .m
            .values()
            .iter()
            .zip(v.values())
            .map(|(&a, &b)| {
                let u = vec3::axpy(a, self.k, b);
                (vec3::dot(u, u) - vec3::dot(a, a) - self.k * self.k * vec3::dot(b, b)).abs()
            })
            .fold(0.0, f64::max);
        let unit_deviation = next.max_unit_deviation();
        let exchange_energy = self.space.exchange_energy(self.coeffs.ell_ex2, next.values());
        let t = state.t + self.k;
        let report = StepReport {
            step: state.n + 1,
            t,
            stats: stats.clone(),
            selection,
            x,
            v,
            tangency,
            pythagoras_defect,
            unit_deviation,
            exchange_energy,
        };
        let new_state = TimeStepState { n: state.n + 1, t, m_prev: state.m.clone(), m: next, last_stats: Some(stats) };
        Ok((new_state, report))
    }
}

/// A single step from `state` with freshly built data.
pub fn tps_step(
    space: Arc<FemSpace>,
    state: &TimeStepState,
    coeffs: SchemeCoefficients,
    k: f64,
    pi: PiKind,
    applied: AppliedField,
    settings: SolveSettings,
) -> Result<(TimeStepState, StepReport)> {
    Stepper::new(space, coeffs, k, pi, applied, settings)?.step(state)
}

/// Number of steps `M` with `M k = T`.
pub fn num_steps(t_final: f64, k: f64) -> Result<usize> {
    if !(t_final >= 0.0) || !(k > 0.0) {
        return Err(Error::InvalidParameter("need T >= 0 and k > 0".into()));
    }
    Ok((t_final / k - 1e-9).ceil().max(0.0) as usize)
}

/// Aggregate over a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub avg_iterations: f64,
}

/// Runs `steps` steps from `m0`, passing every report to `observer`
/// before the next step starts (so partial output survives a failure).
pub fn run_simulation(
    stepper: &mut Stepper,
    m0: MagnetizationField,
    steps: usize,
    observer: &mut dyn FnMut(&TimeStepState, &StepReport) -> Result<()>,
) -> Result<(TimeStepState, RunSummary)> {
    let mut state = TimeStepState::initial(m0);
    let mut summary = RunSummary::default();
    for _ in 0..steps {
        let (next, report) = stepper.step(&state)?;
        summary.steps += 1;
        summary.total_iterations += report.stats.iterations;
        summary.max_iterations = summary.max_iterations.max(report.stats.iterations);
        observer(&next, &report)?;
        state = next;
    }
    if summary.steps > 0 {
        summary.avg_iterations = summary.total_iterations as f64 / summary.steps as f64;
    }
    Ok((state, summary))
}
