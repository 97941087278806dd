//! Subcommand drivers. Each returns the report body and whether every check
//! passed.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use unitary_landscapes::atlas::{
    self, enumerate_strata, hessian_spectrum, morse_bott_check, sample_point, signature_trace, Inertia,
    MorseBottVerdict, StratumSignature,
};
use unitary_landscapes::dynamics::{
    adjoint_dv, derivative_matrix, derivative_rank, frechet_dv, frechet_dv_exact, propagate, ControlProblem, TAU_RANK,
};
use unitary_landscapes::io::{format_field, format_matrix, read_matrix, FieldRecord};
use unitary_landscapes::landscapes::{
    self, adjoint_rep_value, hessian_matrix, symmetric_eigenvalues, LandscapeKind, LandscapeSpec, GRADIENT_STEP,
    HESSIAN_STEP,
};
use unitary_landscapes::matgeom::{random_tangent, retract, TangentVector, UnitaryMatrix};
use unitary_landscapes::optimize::{
    flow_kinematic, format_trace, synthesize_gate, FlowOptions, FlowStatus, StepRule, SynthOptions,
};
use unitary_landscapes::scalar::{hs_norm_sq, CMatrix};
use unitary_landscapes::Error;

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Run(#[from] Error),
}

pub struct Outcome {
    pub report: String,
    /// Extra files to write next to the report: (suffix, contents).
    pub artifacts: Vec<(&'static str, String)>,
    pub ok: bool,
}

fn spec(cfg: &ExperimentConfig, kind: LandscapeKind) -> Result<LandscapeSpec<f64>, CliError> {
    let weight = if kind.is_weighted() { Some(cfg.weight_spectrum()?) } else { None };
    Ok(LandscapeSpec::new(kind, cfg.target()?, weight)?)
}

/// Seeds for independent subsystems, derived from the config seed.
fn subseed(cfg: &ExperimentConfig, stream: u64) -> u64 {
    cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

pub fn run_strata(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    if !cfg.kind.is_weighted() {
        return Err(ConfigError::Field { field: "kind".into(), msg: format!("strata are tabulated for F and P, not {}", cfg.kind) }.into());
    }
    let ws = cfg.weight_spectrum()?;
    let census = enumerate_strata(&ws, cfg.kind)?;
    Ok(Outcome { report: atlas::format_report(&census), artifacts: Vec::new(), ok: true })
}

pub fn run_maxset(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let ws = cfg.weight_spectrum()?;
    let mut out = String::new();
    let _ = writeln!(out, "# N {} clusters {}", ws.dim(), ws.kappa);
    let _ = writeln!(out, "# signature trace");
    for sig in StratumSignature::all(&ws) {
        let _ = writeln!(out, "{} {:.12e}", sig, signature_trace(&ws, &sig));
    }
    let verdict = atlas::jp_globalmax_nondegenerate(&ws);
    let _ = writeln!(out, "nondegenerate {verdict}");
    Ok(Outcome { report: out, artifacts: Vec::new(), ok: true })
}

struct Checks {
    out: String,
    ok: bool,
}

impl Checks {
    fn new() -> Self {
        Self { out: String::from("# check residual tolerance status\n"), ok: true }
    }

    fn record(&mut self, name: &str, residual: f64, tol: f64) {
        let pass = residual <= tol;
        self.ok &= pass;
        let _ = writeln!(self.out, "{name} {residual:.3e} {tol:.3e} {}", if pass { "pass" } else { "FAIL" });
    }

    fn flag(&mut self, name: &str, pass: bool, detail: &str) {
        self.ok &= pass;
        let _ = writeln!(self.out, "{name} {detail} - {}", if pass { "pass" } else { "FAIL" });
    }

    fn note(&mut self, name: &str, detail: &str) {
        let _ = writeln!(self.out, "{name} {detail} - inconclusive");
    }
}

const VERIFY_POINTS: usize = 20;

pub fn run_verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let n = cfg.dim()?;
    let mut checks = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg, 1));

    // First-order fidelity for the configured kind.
    let s = spec(cfg, cfg.kind)?;
    let mut worst: f64 = 0.0;
    for _ in 0..VERIFY_POINTS {
        let u = UnitaryMatrix::haar_random(n, &mut rng);
        let g = landscapes::gradient(&s, &u)?;
        let t = random_tangent(&u, &mut rng);
        let h = GRADIENT_STEP;
        let fd = (landscapes::value(&s, &retract(&u, &t, h)?)? - landscapes::value(&s, &retract(&u, &t, -h)?)?) / (2.0 * h);
        worst = worst.max((g.inner(&t) - fd).abs() / fd.abs().max(1.0));
    }
    checks.record(&format!("gradient_fd[{}]", cfg.kind), worst, 1e-5);

    if !cfg.kind.is_weighted() {
        let mut worst: f64 = 0.0;
        for _ in 0..VERIFY_POINTS {
            let u = UnitaryMatrix::haar_random(n, &mut rng);
            let g = landscapes::gradient(&s, &u)?.norm();
            worst = worst.max((g * g - 2.0 * landscapes::value(&s, &u)?).abs());
        }
        checks.record(&format!("grad_norm_sq_vs_value[{}]", cfg.kind), worst, 1e-10);
        let target = cfg.target()?;
        let hess = hessian_matrix(&s, &target, HESSIAN_STEP)?;
        let dev = (hess - unitary_landscapes::scalar::RMatrix::<f64>::identity(n * n, n * n)).abs().max();
        checks.record(&format!("hessian_at_target[{}]", cfg.kind), dev, 1e-4);
    } else {
        let a = cfg.weight_matrix()?;
        let w = cfg.target()?;
        let sf = spec(cfg, LandscapeKind::F)?;
        let sp = spec(cfg, LandscapeKind::P)?;
        let (mut worst_f, mut worst_p): (f64, f64) = (0.0, 0.0);
        for _ in 0..VERIFY_POINTS {
            let u = UnitaryMatrix::haar_random(n, &mut rng);
            let direct = hs_norm_sq(&((u.matrix() - w.matrix()) * &a));
            worst_f = worst_f.max((landscapes::value(&sf, &u)? - direct).abs());
            worst_p = worst_p.max((adjoint_rep_value(&a, &w, &u)? - 2.0 * landscapes::value(&sp, &u)?).abs());
        }
        checks.record("value_F_direct", worst_f, 1e-10 * sf.scale());
        checks.record("adjoint_rep_vs_P", worst_p, 1e-9 * sp.scale());
        verify_strata(cfg, &s, &mut checks)?;
    }
    verify_dynamics(cfg, n, &mut checks)?;
    let ok = checks.ok;
    Ok(Outcome { report: checks.out, artifacts: Vec::new(), ok })
}

fn verify_strata(cfg: &ExperimentConfig, s: &LandscapeSpec<f64>, checks: &mut Checks) -> Result<(), CliError> {
    let ws = cfg.weight_spectrum()?;
    let target = cfg.target()?;
    let census = enumerate_strata(&ws, cfg.kind)?;
    let scale = s.scale();
    let tau_null = cfg.tol.null.unwrap_or(atlas::TAU_NULL_REL * scale);
    for (i, st) in census.strata.iter().enumerate() {
        let label = format!("{}{}", cfg.kind, st.signature);
        let sample = sample_point(&ws, &st.signature, cfg.kind, &target, subseed(cfg, 100 + i as u64))?;
        checks.record(&format!("critical_gradient{label}"), sample.gradient_norm, cfg.tol.crit * scale);
        let num = symmetric_eigenvalues(&hessian_matrix(&sample.landscape, &sample.point, HESSIAN_STEP)?);
        let an = hessian_spectrum(&ws, st)?.values();
        let dev = num.iter().zip(&an).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        checks.record(&format!("hessian_spectrum{label}"), dev, 1e-5 * scale);
        let counted = Inertia::count(&num, tau_null);
        checks.flag(&format!("inertia{label}"), counted == st.inertia, &format!("{counted}vs{}", st.inertia).replace(' ', ""));
        let mb = morse_bott_check(&sample, tau_null)?;
        let detail = format!("nullity={}/dim={}", mb.nullity, mb.dim_formula);
        match mb.verdict {
            MorseBottVerdict::Inconclusive => checks.note(&format!("morse_bott{label}"), &detail),
            v => checks.flag(&format!("morse_bott{label}"), v == MorseBottVerdict::Pass, &detail),
        }
    }
    if cfg.kind == LandscapeKind::P {
        let verdict = atlas::jp_globalmax_nondegenerate(&ws);
        let _ = writeln!(checks.out, "globalmax_nondegenerate {verdict} - info");
    }
    Ok(())
}

fn verify_dynamics(cfg: &ExperimentConfig, n: usize, checks: &mut Checks) -> Result<(), CliError> {
    let seed = subseed(cfg, 2);
    let cp = match cfg.control_problem()? {
        Some(cp) if cp.dim() == n => cp,
        _ => {
            let h0 = unitary_landscapes::matgeom::seeded_complex_gaussian::<f64>(n, seed);
            let mu = unitary_landscapes::matgeom::seeded_complex_gaussian::<f64>(n, seed + 1);
            let herm = |m: CMatrix<f64>| (&m + m.adjoint()) * unitary_landscapes::scalar::re(0.5);
            ControlProblem::new(herm(h0), herm(mu), 1.0, 1.0, 50)?
        }
    };
    let field = cp.seeded_field(1.0, seed + 2);
    let delta = cp.seeded_field(1.0, seed + 3);
    let traj = propagate(&cp, &field)?;
    let vt = traj.final_propagator();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 4);
    let a = random_tangent(&vt, &mut rng);
    let lhs = a.inner(&frechet_dv(&traj, &delta)?);
    let rhs = adjoint_dv(&traj, &a)?.inner(&delta);
    checks.record("adjoint_identity", (lhs - rhs).abs() / lhs.abs().max(1.0), 1e-9);

    // Against the exact derivative the identity holds to second order in Δt.
    let residual = |m: usize| -> Result<f64, CliError> {
        let c = cp.with_slices(m)?;
        let t = propagate(&c, &c.sample(|x| (2.0 * x).cos()))?;
        let v = t.final_propagator();
        let d = c.sample(|x| 1.0 + x * x);
        let dir = TangentVector::new_unchecked(v.clone(), v.matrix() * a.body());
        let exact = dir.inner(&frechet_dv_exact(&t, &d)?);
        Ok((exact - adjoint_dv(&t, &dir)?.inner(&d)).abs())
    };
    let (r1, r2) = (residual(cp.slices())?, residual(2 * cp.slices())?);
    let ratio = r1 / r2.max(f64::MIN_POSITIVE);
    checks.flag("adjoint_order", ratio >= 3.5, &format!("ratio={ratio:.3}"));
    Ok(())
}

fn initial_unitary(cfg: &ExperimentConfig, n: usize) -> Result<UnitaryMatrix<f64>, CliError> {
    let raw = cfg.u0.clone().unwrap_or_else(|| format!("random {}", subseed(cfg, 3)));
    let (head, rest) = raw.split_once(char::is_whitespace).unwrap_or((raw.as_str(), ""));
    match head {
        "random" => {
            let seed: u64 = rest.trim().parse().map_err(|_| ConfigError::Field { field: "u0".into(), msg: format!("bad seed `{rest}`") })?;
            Ok(unitary_landscapes::gates::named(&format!("random:{seed}"), n)?)
        }
        "identity" => Ok(UnitaryMatrix::identity(n)),
        "file" => {
            let m = read_matrix::<f64>(rest.trim()).map_err(|e| ConfigError::Field { field: "u0".into(), msg: e.to_string() })?;
            UnitaryMatrix::new(m).map_err(|e| ConfigError::Field { field: "u0".into(), msg: e.to_string() }.into())
        }
        other => Err(ConfigError::Field { field: "u0".into(), msg: format!("unknown start `{other}`") }.into()),
    }
}

pub fn run_flow(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let n = cfg.dim()?;
    let s = spec(cfg, cfg.kind)?;
    let u0 = initial_unitary(cfg, n)?;
    let opts = FlowOptions {
        step: StepRule { initial: cfg.step, ..StepRule::default() },
        max_iter: cfg.max_iter.unwrap_or(10_000),
        tau_grad: cfg.tol.grad,
        tau_match: cfg.tol.matching,
        seed: subseed(cfg, 4),
        ..FlowOptions::default()
    };
    let trace = flow_kinematic(&s, &u0, &opts)?;
    let mut artifacts = Vec::new();
    if let Some(u) = trace.unitary() {
        artifacts.push((".terminal", format_matrix(u.matrix())));
    }
    Ok(Outcome { report: format_trace(&trace), artifacts, ok: trace.status == FlowStatus::Converged })
}

pub fn run_synth(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let cp = cfg
        .control_problem()?
        .ok_or_else(|| ConfigError::Field { field: "h0".into(), msg: "synth requires the control block (h0, mu, T, m)".into() })?;
    let n = cfg.dim()?;
    if cp.dim() != n {
        return Err(ConfigError::Field { field: "h0".into(), msg: format!("control problem is {}-level but N = {n}", cp.dim()) }.into());
    }
    let s = spec(cfg, cfg.kind)?;
    let field0 = match cfg.initial_field(&cp)? {
        Some(f) => f,
        None => cp.seeded_field(0.1, subseed(cfg, 5)),
    };
    let opts = SynthOptions {
        step: StepRule { initial: cfg.step, ..StepRule::default() },
        max_iter: cfg.max_iter.unwrap_or(500),
        tau_value: cfg.tol.value,
    };
    let trace = synthesize_gate(&cp, &s, &field0, &opts)?;
    let mut report = format_trace(&trace);
    let mut artifacts = Vec::new();
    if let Some(f) = trace.field() {
        let traj = propagate(&cp, f)?;
        let rank = derivative_rank(&derivative_matrix(&traj), TAU_RANK);
        let required = n * n;
        let verdict = if cp.slices() < required {
            "rank-deficient (m < N^2)"
        } else if rank + 1 == required && traceless(cp.h0()) && traceless(cp.mu()) {
            "rank-deficient (traceless Hamiltonians reach only SU(N) directions)"
        } else if rank < required {
            "rank-deficient"
        } else {
            "regular"
        };
        let _ = writeln!(report, "# dV_T rank {rank} of {required}: {verdict}");
        let record = FieldRecord { horizon: f.horizon(), samples: f.samples().to_vec() };
        artifacts.push((".field", format_field(&record)));
        artifacts.push((".terminal", format_matrix(traj.final_propagator().matrix())));
    }
    Ok(Outcome { report, artifacts, ok: trace.status == FlowStatus::Converged })
}

fn traceless(m: &CMatrix<f64>) -> bool {
    unitary_landscapes::scalar::cabs(unitary_landscapes::scalar::trace(m)) <= 1e-12 * hs_norm_sq(m).sqrt().max(1.0)
}
