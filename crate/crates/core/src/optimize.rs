//! Descent on U(N) and on control fields.

use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::atlas::{enumerate_strata, CriticalStratum};
use crate::dynamics::{dynamical_gradient, dynamical_value, propagate, steer_field, ControlField, ControlProblem};
use crate::error::Result;
use crate::landscapes::{self, LandscapeSpec};
use crate::matgeom::{principal_log, random_tangent, retract, UnitaryMatrix};
use crate::scalar::{hs_norm, lit, spectral_norm, to_f64, Real};

/// Backtracking line search parameters.
#[derive(Clone, Debug)]
pub struct StepRule {
    /// First trial step; `None` picks the dimensional default.
    pub initial: Option<f64>,
    pub armijo: f64,
    pub shrink: f64,
    /// Factor applied to the next trial after a first-try acceptance.
    pub grow: f64,
    /// Cap on the trial step as a multiple of the initial one.
    pub max_growth: f64,
    pub max_backtracks: usize,
}

impl Default for StepRule {
    fn default() -> Self {
        Self { initial: None, armijo: 1e-4, shrink: 0.5, grow: 2.0, max_growth: 1e3, max_backtracks: 60 }
    }
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    pub step: StepRule,
    pub max_iter: usize,
    pub tau_grad: f64,
    pub tau_match: f64,
    /// Consecutive near-critical iterations before a saddle kick.
    pub stall_window: usize,
    pub kick_norm: f64,
    pub max_kicks: usize,
    pub seed: u64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            step: StepRule::default(),
            max_iter: 10_000,
            tau_grad: 1e-10,
            tau_match: 1e-6,
            stall_window: 50,
            kick_norm: 1e-3,
            max_kicks: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Converged,
    MaxIterations,
    SaddleStalled,
    /// No decrease within the backtracking budget.
    LineSearchFailed,
}

impl fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::MaxIterations => "maxIterations",
            Self::SaddleStalled => "saddleStalled",
            Self::LineSearchFailed => "lineSearchFailed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord<T: Real> {
    pub iteration: usize,
    pub value: T,
    pub gradient_norm: T,
    /// The point was perturbed after this record.
    pub kicked: bool,
}

#[derive(Clone, Debug)]
pub enum Terminal<T: Real> {
    Unitary(UnitaryMatrix<T>),
    Field(ControlField<T>),
}

#[derive(Clone, Debug)]
pub struct FlowTrace<T: Real> {
    pub iterates: Vec<TraceRecord<T>>,
    pub terminal: Terminal<T>,
    pub status: FlowStatus,
    pub matched_stratum: Option<CriticalStratum<T>>,
}

impl<T: Real> FlowTrace<T> {
    pub fn final_value(&self) -> T {
        self.iterates.last().map_or(T::zero(), |r| r.value)
    }

    pub fn final_gradient_norm(&self) -> T {
        self.iterates.last().map_or(T::zero(), |r| r.gradient_norm)
    }

    /// Iterations taken (records minus the initial one).
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    /// Values never increase across accepted (non-kicked) steps.
    pub fn is_monotone(&self) -> bool {
        self.iterates.windows(2).all(|w| w[0].kicked || w[1].value <= w[0].value)
    }

    pub fn unitary(&self) -> Option<&UnitaryMatrix<T>> {
        match &self.terminal {
            Terminal::Unitary(u) => Some(u),
            Terminal::Field(_) => None,
        }
    }

    pub fn field(&self) -> Option<&ControlField<T>> {
        match &self.terminal {
            Terminal::Field(f) => Some(f),
            Terminal::Unitary(_) => None,
        }
    }
}

/// Line-delimited trace with a `#` header and a closing summary comment.
pub fn format_trace<T: Real>(trace: &FlowTrace<T>) -> String {
    let mut out = String::from("# iteration value grad_norm\n");
    for r in &trace.iterates {
        let _ = writeln!(out, "{} {:.12e} {:.12e}", r.iteration, to_f64(r.value), to_f64(r.gradient_norm));
    }
    let matched = trace
        .matched_stratum
        .as_ref()
        .map_or_else(|| "-".to_string(), |s| format!("{}", s.signature));
    let _ = writeln!(
        out,
        "# status {} final {:.12e} iterations {} stratum {}",
        trace.status,
        to_f64(trace.final_value()),
        trace.iterations(),
        matched
    );
    out
}

/// Stratum whose critical value is nearest to `value`, within `tau_match`.
pub fn match_stratum<T: Real>(spec: &LandscapeSpec<T>, value: T, tau_match: f64) -> Option<CriticalStratum<T>> {
    let ws = spec.weight()?;
    let census = enumerate_strata(ws, spec.kind()).ok()?;
    census
        .strata
        .into_iter()
        .map(|s| ((s.critical_value - value).abs(), s))
        .filter(|(d, _)| *d <= lit::<T>(tau_match))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(_, s)| s)
}

/// Riemannian gradient descent `U ← U·exp(−s U†grad J)` with Armijo
/// backtracking. Near-critical stalls above the global minimum trigger small
/// random kicks.
pub fn flow_kinematic<T: Real>(spec: &LandscapeSpec<T>, u0: &UnitaryMatrix<T>, opts: &FlowOptions) -> Result<FlowTrace<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let s0 = lit::<T>(opts.step.initial.unwrap_or_else(|| {
        if spec.kind().is_weighted() {
            1.0 / to_f64(spec.weight_norm_sq()).max(f64::MIN_POSITIVE)
        } else {
            1.0
        }
    }));
    let s_max = s0 * lit(opts.step.max_growth);
    let tau_grad = lit::<T>(opts.tau_grad);
    let mut u = u0.clone();
    let mut value = landscapes::value(spec, &u)?;
    let mut step = s0;
    let mut iterates = Vec::new();
    let mut stalled = 0;
    let mut kicks = 0;
    let mut status = FlowStatus::MaxIterations;
    for iteration in 0..=opts.max_iter {
        let grad = landscapes::gradient(spec, &u)?;
        let gnorm = grad.norm();
        iterates.push(TraceRecord { iteration, value, gradient_norm: gnorm, kicked: false });
        if gnorm <= tau_grad {
            status = FlowStatus::Converged;
            break;
        }
        if iteration == opts.max_iter {
            break;
        }
        if gnorm < tau_grad * lit(10.0) && value > lit(opts.tau_match) {
            stalled += 1;
            if stalled >= opts.stall_window {
                if kicks >= opts.max_kicks {
                    status = FlowStatus::SaddleStalled;
                    break;
                }
                let dir = random_tangent(&u, &mut rng);
                let scale = lit::<T>(opts.kick_norm) / dir.norm();
                u = retract(&u, &dir, scale)?.reunitarize_if_needed(1e-12);
                value = landscapes::value(spec, &u)?;
                kicks += 1;
                stalled = 0;
                if let Some(last) = iterates.last_mut() {
                    last.kicked = true;
                }
                continue;
            }
        } else {
            stalled = 0;
        }
        let decrease = lit::<T>(opts.step.armijo) * gnorm * gnorm;
        // Eigenphase rotations beyond π wrap around the one-parameter subgroup.
        let mut trial = step.min(T::pi() / spectral_norm(&grad.body()));
        let mut accepted = None;
        for attempt in 0..=opts.step.max_backtracks {
            let candidate = retract(&u, &grad, -trial)?.reunitarize_if_needed(1e-12);
            let cv = landscapes::value(spec, &candidate)?;
            if cv <= value - decrease * trial {
                accepted = Some((candidate, cv, attempt));
                break;
            }
            trial *= lit(opts.step.shrink);
        }
        match accepted {
            Some((candidate, cv, attempt)) => {
                u = candidate;
                value = cv;
                step = if attempt == 0 { (trial * lit(opts.step.grow)).min(s_max) } else { trial };
            }
            None => {
                status = FlowStatus::LineSearchFailed;
                break;
            }
        }
    }
    let matched_stratum = match_stratum(spec, value, opts.tau_match);
    Ok(FlowTrace { iterates, terminal: Terminal::Unitary(u), status, matched_stratum })
}

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub step: StepRule,
    pub max_iter: usize,
    pub tau_value: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { step: StepRule::default(), max_iter: 500, tau_value: 1e-4 }
    }
}

/// Gradient descent of `J ∘ V_T` over field samples (GRAPE-style) with Armijo
/// backtracking in the `L²` metric.
pub fn synthesize_gate<T: Real>(
    cp: &ControlProblem<T>,
    spec: &LandscapeSpec<T>,
    field0: &ControlField<T>,
    opts: &SynthOptions,
) -> Result<FlowTrace<T>> {
    let mu_norm = to_f64(spectral_norm(cp.mu())).max(f64::MIN_POSITIVE);
    let hbar = to_f64(cp.hbar());
    let s0 = lit::<T>(opts.step.initial.unwrap_or(hbar * hbar / (to_f64(cp.horizon()) * mu_norm * mu_norm)));
    let s_max = s0 * lit(opts.step.max_growth);
    let mut field = field0.clone();
    let mut traj = propagate(cp, &field)?;
    let mut value = dynamical_value(&traj, spec)?;
    let mut step = s0;
    let mut iterates = Vec::new();
    let mut status = FlowStatus::MaxIterations;
    for iteration in 0..=opts.max_iter {
        let grad = dynamical_gradient(&traj, spec)?;
        let gnorm = grad.norm();
        iterates.push(TraceRecord { iteration, value, gradient_norm: gnorm, kicked: false });
        if value <= lit(opts.tau_value) {
            status = FlowStatus::Converged;
            break;
        }
        if iteration == opts.max_iter {
            break;
        }
        let decrease = lit::<T>(opts.step.armijo) * gnorm * gnorm;
        let mut trial = step;
        let mut accepted = None;
        for attempt in 0..=opts.step.max_backtracks {
            let candidate = field.axpy(-trial, &grad);
            let ctraj = propagate(cp, &candidate)?;
            let cv = dynamical_value(&ctraj, spec)?;
            if cv <= value - decrease * trial {
                accepted = Some((candidate, ctraj, cv, attempt));
                break;
            }
            trial *= lit(opts.step.shrink);
        }
        match accepted {
            Some((candidate, ctraj, cv, attempt)) => {
                field = candidate;
                traj = ctraj;
                value = cv;
                step = if attempt == 0 { (trial * lit(opts.step.grow)).min(s_max) } else { trial };
            }
            None => {
                status = FlowStatus::LineSearchFailed;
                break;
            }
        }
    }
    let matched_stratum = match_stratum(spec, value, 1e-6);
    Ok(FlowTrace { iterates, terminal: Terminal::Field(field), status, matched_stratum })
}

/// Gauss-Newton refinement of a field so that `V_T` reaches `target`: each
/// step solves `dV_T(δ) = V_T·log(V_T†·target)` in the least-squares sense.
/// Returns the refined field and the final geodesic distance.
pub fn polish_to_target<T: Real>(
    cp: &ControlProblem<T>,
    field0: &ControlField<T>,
    target: &UnitaryMatrix<T>,
    tol: f64,
    max_iter: usize,
) -> Result<(ControlField<T>, T)> {
    let mut field = field0.clone();
    let mut dist = T::zero();
    for _ in 0..=max_iter {
        let traj = propagate(cp, &field)?;
        let vt = traj.final_propagator();
        let rel = UnitaryMatrix::new_unchecked(vt.matrix().adjoint() * target.matrix());
        let y = principal_log(&rel)?.log;
        dist = hs_norm(&y);
        if dist <= lit(tol) {
            break;
        }
        let delta = steer_field(&traj, &y)?;
        field = field.axpy(T::one(), &delta);
    }
    Ok((field, dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::StratumClass;
    use crate::gates::{hadamard, pauli_x, pauli_z};
    use crate::landscapes::LandscapeKind;
    use crate::matgeom::{analyze_weight, TAU_CLUSTER};
    use crate::scalar::CMatrix;

    fn frobenius_identity(n: usize, w: UnitaryMatrix<f64>) -> LandscapeSpec<f64> {
        let ws = analyze_weight(&CMatrix::identity(n, n), TAU_CLUSTER).unwrap();
        LandscapeSpec::new(LandscapeKind::F, w, Some(ws)).unwrap()
    }

    #[test]
    fn start_at_target_converges_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = UnitaryMatrix::haar_random(3, &mut rng);
        let spec = frobenius_identity(3, w.clone());
        let t = flow_kinematic(&spec, &w, &FlowOptions::default()).unwrap();
        assert_eq!(t.status, FlowStatus::Converged);
        assert_eq!(t.iterations(), 0);
        assert_eq!(t.matched_stratum.unwrap().class, StratumClass::GlobalMin);
    }

    #[test]
    fn geodesic_flow_reaches_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let w = UnitaryMatrix::<f64>::haar_random(3, &mut rng);
            let spec = LandscapeSpec::new(LandscapeKind::G, w, None).unwrap();
            let u0 = UnitaryMatrix::haar_random(3, &mut rng);
            let t = flow_kinematic(&spec, &u0, &FlowOptions::default()).unwrap();
            assert_eq!(t.status, FlowStatus::Converged);
            assert!(t.final_value() <= 1e-10);
            assert!(t.is_monotone());
        }
    }

    #[test]
    fn frobenius_flows_avoid_saddles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = frobenius_identity(3, UnitaryMatrix::haar_random(3, &mut rng));
        for seed in 0..10 {
            let u0 = UnitaryMatrix::haar_random(3, &mut rng);
            let opts = FlowOptions { seed, ..FlowOptions::default() };
            let t = flow_kinematic(&spec, &u0, &opts).unwrap();
            assert_eq!(t.status, FlowStatus::Converged);
            assert!(t.final_value() <= 1e-8);
            assert!(t.is_monotone());
            assert!(t.final_gradient_norm() <= 1e-10);
        }
    }

    #[test]
    fn saddle_start_is_kicked_off() {
        let w = UnitaryMatrix::<f64>::identity(2);
        let spec = frobenius_identity(2, w);
        let saddle = UnitaryMatrix::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            crate::scalar::cplx(-1.0, 0.0),
            crate::scalar::cplx(1.0, 0.0),
        ])))
        .unwrap();
        let t = flow_kinematic(&spec, &saddle, &FlowOptions { tau_grad: 1e-10, ..FlowOptions::default() }).unwrap();
        // The gradient vanishes exactly at the start: converged on the saddle.
        assert_eq!(t.status, FlowStatus::Converged);
        assert!((t.final_value() - 4.0).abs() < 1e-12);
        assert_eq!(t.matched_stratum.unwrap().class, StratumClass::Saddle);
    }

    #[test]
    fn free_evolution_is_already_optimal() {
        let cp = ControlProblem::new(pauli_z(), pauli_x(), 1.0, 2.0, 20).unwrap();
        let traj = propagate(&cp, &ControlField::zeros(&cp)).unwrap();
        let spec = LandscapeSpec::new(LandscapeKind::GP, traj.final_propagator(), None).unwrap();
        let t = synthesize_gate(&cp, &spec, &ControlField::zeros(&cp), &SynthOptions::default()).unwrap();
        assert_eq!(t.status, FlowStatus::Converged);
        assert_eq!(t.iterations(), 0);
    }

    #[test]
    fn hadamard_synthesis() {
        let cp = ControlProblem::new(pauli_z(), pauli_x(), 1.0, 10.0, 200).unwrap();
        let spec = LandscapeSpec::new(LandscapeKind::GP, hadamard(), None).unwrap();
        let field0 = cp.sample(|t| 0.3 * (0.7 * t).sin());
        let t = synthesize_gate(&cp, &spec, &field0, &SynthOptions::default()).unwrap();
        assert_eq!(t.status, FlowStatus::Converged, "final {}", t.final_value());
        assert!(t.final_value() <= 1e-4);
        assert!(t.is_monotone());
    }

    #[test]
    fn polishing_hits_a_nearby_gate() {
        let mu = pauli_x::<f64>() + CMatrix::identity(2, 2) * crate::scalar::re(0.5);
        let cp = ControlProblem::new(pauli_z(), mu, 1.0, 5.0, 100).unwrap();
        let field0 = cp.sample(|t| (1.3 * t).cos());
        let target = propagate(&cp, &cp.sample(|t| (1.3 * t).cos() + 0.1 * t.sin())).unwrap().final_propagator();
        let (field, dist) = polish_to_target(&cp, &field0, &target, 1e-12, 20).unwrap();
        assert!(dist <= 1e-12);
        let vt = propagate(&cp, &field).unwrap().final_propagator();
        assert!(hs_norm(&(vt.matrix() - target.matrix())) < 1e-11);
    }

    #[test]
    fn trace_format_has_header_and_summary() {
        let w = UnitaryMatrix::<f64>::identity(2);
        let spec = frobenius_identity(2, w.clone());
        let t = flow_kinematic(&spec, &w, &FlowOptions::default()).unwrap();
        let s = format_trace(&t);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# iteration value grad_norm");
        assert!(lines.last().unwrap().starts_with("# status converged"));
    }
}
