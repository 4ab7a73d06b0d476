//! Staggered time stepping for the coupled displacement / phase-field
//! problem.
//!
//! Each step alternates between the momentum balance (quasi-static or
//! generalized-alpha dynamic, one Newton update per pass), the pointwise
//! history update, and the linear phase-field solve, until the largest
//! relative field increment drops below the stagger tolerance.

use std::collections::BTreeMap;

use crate::constitutive::{self, ElasticConstants, FractureParams, DEFAULT_PERTURBATION};
use crate::error::{Error, Result};
use crate::fem::{
    self, DirichletBc, QpScalarField, DEFAULT_QUADRATURE_ORDER,
};
use crate::linsolve::{
    solve_spd_preconditioned, solve_spd_with_guess, IncompleteCholeskyFactor, SolveMethod,
    SolveOptions, SolveReport, SparseSymmetricMatrix,
};
use crate::mesh::{distance_to_segment, Mesh, Segment};

/// Default stagger tolerance on relative field increments.
pub const DEFAULT_STAGGER_TOLERANCE: f64 = 1e-6;

/// Default cap on stagger passes per step.
pub const DEFAULT_MAX_STAGGER_ITERATIONS: usize = 200;

/// Default scale of the history seed used for induced cracks.
pub const DEFAULT_CRACK_SEED_SCALE: f64 = 1e6;

/// Stagger loop controls.
#[derive(Debug, Clone)]
pub struct StaggeredControls {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Anderson mixing depth applied to the phase-field iterates;
    /// 0 disables mixing.
    pub anderson_depth: usize,
    /// Aitken relaxation of the phase-field iterates. Convergence is
    /// still measured on the unrelaxed increments, so the accepted
    /// states satisfy the same tolerance; only the iteration count
    /// changes. Ignored when Anderson mixing is active.
    pub aitken: bool,
    pub linear: SolveOptions,
}

impl Default for StaggeredControls {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_STAGGER_TOLERANCE,
            max_iterations: DEFAULT_MAX_STAGGER_ITERATIONS,
            anderson_depth: 0,
            aitken: false,
            linear: SolveOptions::default(),
        }
    }
}

/// Generalized-alpha parameters derived from the spectral radius at
/// infinite frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedAlpha {
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Default numerical damping for dynamic runs.
pub const DEFAULT_SPECTRAL_RADIUS: f64 = 0.9;

impl GeneralizedAlpha {
    pub fn from_spectral_radius(rho_inf: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_inf) {
            return Err(Error::domain(format!(
                "spectral radius must lie in [0, 1], got {rho_inf}"
            )));
        }
        let alpha_m = (2.0 * rho_inf - 1.0) / (rho_inf + 1.0);
        let alpha_f = rho_inf / (rho_inf + 1.0);
        let gamma = 0.5 - alpha_m + alpha_f;
        let beta = 0.25 * (1.0 - alpha_m + alpha_f).powi(2);
        Ok(Self {
            alpha_m,
            alpha_f,
            beta,
            gamma,
        })
    }
}

/// Momentum balance mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analysis {
    QuasiStatic,
    Dynamic(GeneralizedAlpha),
}

/// One boundary driver, active during the phase that lists it.
/// Displacement increments accumulate across the whole run; the ramp and
/// traction drivers are functions of absolute time.
#[derive(Debug, Clone, PartialEq)]
pub enum Load {
    /// Hold the listed components of a node set at zero displacement.
    Fix { set: String, components: Vec<usize> },
    /// Add `increment` to the prescribed displacement every step.
    Displacement {
        set: String,
        component: usize,
        increment: f64,
    },
    /// Prescribe the displacement of an impactor that accelerates linearly
    /// to `speed` over `ramp_time` and then travels at constant speed.
    VelocityRamp {
        set: String,
        component: usize,
        speed: f64,
        ramp_time: f64,
    },
    /// Constant surface traction on a boundary set.
    Traction { set: String, vector: Vec<f64> },
    /// Add `increment` to a total nodal force every step, split equally
    /// over the set. The accumulated force persists for the rest of the
    /// run, also in phases that no longer list the driver.
    ForceRamp {
        set: String,
        component: usize,
        increment: f64,
    },
}

/// Displacement of the velocity-ramp driver at time `t`.
pub fn ramp_displacement(speed: f64, ramp_time: f64, t: f64) -> f64 {
    if t <= ramp_time {
        speed * t * t / (2.0 * ramp_time)
    } else {
        0.5 * speed * ramp_time + speed * (t - ramp_time)
    }
}

/// A block of uniform steps sharing one time increment and load list.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub steps: usize,
    pub dt: f64,
    pub loads: Vec<Load>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadSchedule {
    pub phases: Vec<Phase>,
}

impl LoadSchedule {
    pub fn total_steps(&self) -> usize {
        self.phases.iter().map(|p| p.steps).sum()
    }

    pub fn total_time(&self) -> f64 {
        self.phases.iter().map(|p| p.steps as f64 * p.dt).sum()
    }

    fn phase_of_step(&self, step: usize) -> Option<&Phase> {
        let mut acc = 0;
        for phase in &self.phases {
            acc += phase.steps;
            if step < acc {
                return Some(phase);
            }
        }
        None
    }
}

/// Current solution fields and the committed history.
#[derive(Debug, Clone)]
pub struct SimState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub phi: Vec<f64>,
    pub history: QpScalarField,
    pub time: f64,
    pub step: usize,
}

/// Per-step convergence record.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub stagger_iterations: usize,
    pub final_increment: f64,
    pub linear_iterations: usize,
}

pub struct Simulation {
    mesh: Mesh,
    consts: ElasticConstants,
    params: FractureParams,
    analysis: Analysis,
    controls: StaggeredControls,
    schedule: LoadSchedule,
    perturbation: f64,
    state: SimState,
    u_prev: Vec<f64>,
    dt_prev: f64,
    /// Accumulated prescribed displacement per (set, component).
    offsets: BTreeMap<(String, usize), f64>,
    /// Accumulated total nodal force per (set, component).
    force_offsets: BTreeMap<(String, usize), f64>,
    mass: Option<SparseSymmetricMatrix>,
    /// Reused incomplete Cholesky factors, one slot for the momentum
    /// system and one for the phase-field system. The matrices drift
    /// slowly between stagger sweeps, so a factor stays useful for many
    /// solves; it is rebuilt once the iteration count degrades.
    factor_caches: [std::cell::RefCell<Option<CachedFactor>>; 2],
}

struct CachedFactor {
    factor: IncompleteCholeskyFactor,
    /// Iteration count of the first solve after factoring.
    baseline: usize,
}

const MOMENTUM_CACHE: usize = 0;
const PHASE_CACHE: usize = 1;

impl Simulation {
    pub fn new(
        mesh: Mesh,
        consts: ElasticConstants,
        params: FractureParams,
        analysis: Analysis,
        controls: StaggeredControls,
        schedule: LoadSchedule,
    ) -> Result<Self> {
        for (p, phase) in schedule.phases.iter().enumerate() {
            if !(phase.dt > 0.0) {
                return Err(Error::Configuration(format!(
                    "phase {p} has non-positive time increment {}",
                    phase.dt
                )));
            }
            for load in &phase.loads {
                let (set, comp) = match load {
                    Load::Fix { set, components } => {
                        (set, components.iter().copied().max().unwrap_or(0))
                    }
                    Load::Displacement { set, component, .. }
                    | Load::VelocityRamp { set, component, .. }
                    | Load::ForceRamp { set, component, .. } => (set, *component),
                    Load::Traction { set, vector } => {
                        if vector.len() != mesh.dim() {
                            return Err(Error::Configuration(format!(
                                "traction on '{set}' has {} components for a {}D mesh",
                                vector.len(),
                                mesh.dim()
                            )));
                        }
                        (set, 0)
                    }
                };
                mesh.named_set(set)?;
                if comp >= mesh.dim() {
                    return Err(Error::Configuration(format!(
                        "load on '{set}' drives component {comp} of a {}D mesh",
                        mesh.dim()
                    )));
                }
            }
        }
        let n = mesh.n_nodes();
        let dim = mesh.dim();
        let mass = match analysis {
            Analysis::Dynamic(_) => {
                if !(consts.density > 0.0) {
                    return Err(Error::Configuration(
                        "dynamic analysis requires a positive density".into(),
                    ));
                }
                Some(fem::assemble_mass(&mesh, consts.density)?)
            }
            Analysis::QuasiStatic => None,
        };
        let history = QpScalarField::zeros(&mesh, DEFAULT_QUADRATURE_ORDER)?;
        Ok(Self {
            mesh,
            consts,
            params,
            analysis,
            controls,
            schedule,
            perturbation: DEFAULT_PERTURBATION,
            state: SimState {
                u: vec![0.0; n * dim],
                v: vec![0.0; n * dim],
                a: vec![0.0; n * dim],
                phi: vec![0.0; n],
                history,
                time: 0.0,
                step: 0,
            },
            u_prev: vec![0.0; n * dim],
            dt_prev: 0.0,
            offsets: BTreeMap::new(),
            force_offsets: BTreeMap::new(),
            mass: None.or(mass),
            factor_caches: [
                std::cell::RefCell::new(None),
                std::cell::RefCell::new(None),
            ],
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SimState {
        &mut self.state
    }

    pub fn elastic_constants(&self) -> &ElasticConstants {
        &self.consts
    }

    pub fn fracture_params(&self) -> &FractureParams {
        &self.params
    }

    pub fn schedule(&self) -> &LoadSchedule {
        &self.schedule
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.schedule.total_steps()
    }

    /// Accumulated prescribed displacement of an incremental driver, for
    /// reporting load-displacement curves.
    pub fn prescribed_displacement(&self, set: &str, component: usize) -> f64 {
        *self
            .offsets
            .get(&(set.to_string(), component))
            .unwrap_or(&0.0)
    }

    /// Seed the history field so an initial crack along the given segments
    /// is already fully developed when the run starts. Points closer than
    /// half a length scale get `H = s * Gc / (2 l0) * (1 - 2 d / l0)` with
    /// seed scale `s`.
    pub fn seed_crack(&mut self, segments: &[Segment], scale: f64) -> Result<()> {
        if segments.is_empty() {
            return Ok(());
        }
        let l0 = self.params.length_scale;
        let peak = scale * self.params.energy_release_rate / (2.0 * l0);
        for e in 0..self.mesh.n_elements() {
            let evals = fem::element_evals(&self.mesh, e, DEFAULT_QUADRATURE_ORDER)?;
            let nodes = self.mesh.element(e);
            for (q, eval) in evals.iter().enumerate() {
                let mut x = [0.0f64; 3];
                for (a, &node) in nodes.iter().enumerate() {
                    let c = self.mesh.coord(node);
                    for k in 0..3 {
                        x[k] += eval.shape[a] * c[k];
                    }
                }
                let d = segments
                    .iter()
                    .map(|s| distance_to_segment(&x, s))
                    .fold(f64::INFINITY, f64::min);
                if d <= 0.5 * l0 {
                    let h = peak * (1.0 - 2.0 * d / l0);
                    if h > self.state.history.get(e, q) {
                        self.state.history.set(e, q, h);
                    }
                }
            }
        }
        Ok(())
    }

    /// Relax the phase field against the current history without advancing
    /// time; used to turn a seeded history into a consistent initial crack.
    pub fn equilibrate_phase(&mut self) -> Result<()> {
        let (k, f) = fem::assemble_phase(&self.mesh, &self.state.history, &self.params)?;
        let (mut phi, _) = self.solve_linear(PHASE_CACHE, &k, &f, Some(&self.state.phi))?;
        for p in phi.iter_mut() {
            *p = p.clamp(0.0, 1.0);
        }
        self.state.phi = phi;
        Ok(())
    }

    /// Degrees of freedom held by displacement-type drivers in the given
    /// phase; reactions are summed over these.
    pub fn driven_dofs(&self, phase: &Phase) -> Result<Vec<usize>> {
        let dim = self.mesh.dim();
        let mut dofs = Vec::new();
        for load in &phase.loads {
            if let Load::Displacement { set, component, .. }
            | Load::VelocityRamp { set, component, .. } = load
            {
                for &node in self.mesh.named_set(set)? {
                    dofs.push(node * dim + component);
                }
            }
        }
        dofs.sort_unstable();
        dofs.dedup();
        Ok(dofs)
    }

    /// Dofs driven in the phase containing the current step (or the last
    /// phase once the schedule is exhausted).
    pub fn current_driven_dofs(&self) -> Result<Vec<usize>> {
        let step = self.state.step.min(self.schedule.total_steps().saturating_sub(1));
        match self.schedule.phase_of_step(step) {
            Some(phase) => self.driven_dofs(&phase.clone()),
            None => Ok(Vec::new()),
        }
    }

    /// Linear solve with factor reuse. For the incomplete Cholesky
    /// methods the factor from an earlier sweep is kept as long as the
    /// iteration count stays near its post-factorization baseline; a
    /// stale factor cannot affect the solution, only the iteration
    /// count, because convergence is checked against the true residual.
    fn solve_linear(
        &self,
        which: usize,
        a: &SparseSymmetricMatrix,
        b: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveReport)> {
        let opts = &self.controls.linear;
        let build: Option<fn(&SparseSymmetricMatrix, f64, usize) -> Result<IncompleteCholeskyFactor>> =
            match opts.method {
                SolveMethod::IncompleteCholesky => {
                    Some(|a, _, _| IncompleteCholeskyFactor::factor(a))
                }
                SolveMethod::IncompleteCholeskyThreshold { .. } => Some(|a, tol, fill| {
                    IncompleteCholeskyFactor::factor_threshold(a, tol, fill)
                }),
                _ => None,
            };
        let Some(build) = build else {
            return solve_spd_with_guess(a, b, guess, opts);
        };
        let (tol, fill) = match opts.method {
            SolveMethod::IncompleteCholeskyThreshold {
                drop_tolerance,
                max_row_fill,
            } => (drop_tolerance, max_row_fill),
            _ => (0.0, 0),
        };

        let mut cache = self.factor_caches[which].borrow_mut();
        if let Some(c) = cache.as_ref() {
            if let Ok((x, rep)) = solve_spd_preconditioned(a, b, guess, opts, &c.factor) {
                if rep.iterations > 2 * c.baseline + 30 {
                    // Converged but the matrix has drifted; refactor on
                    // the next call.
                    *cache = None;
                }
                return Ok((x, rep));
            }
            *cache = None;
        }
        match build(a, tol, fill) {
            Ok(factor) => {
                let (x, rep) = solve_spd_preconditioned(a, b, guess, opts, &factor)?;
                *cache = Some(CachedFactor {
                    factor,
                    baseline: rep.iterations,
                });
                Ok((x, rep))
            }
            // Factorization breakdown: same Jacobi fallback as the
            // stateless path.
            Err(_) => solve_spd_with_guess(a, b, guess, opts),
        }
    }

    fn constraints_at(&self, phase: &Phase, t_next: f64) -> Result<Vec<DirichletBc>> {
        let dim = self.mesh.dim();
        let mut bcs = Vec::new();
        for load in &phase.loads {
            match load {
                Load::Fix { set, components } => {
                    for &node in self.mesh.named_set(set)? {
                        for &c in components {
                            bcs.push(DirichletBc {
                                dof: node * dim + c,
                                value: 0.0,
                            });
                        }
                    }
                }
                Load::Displacement { set, component, .. } => {
                    let value = *self
                        .offsets
                        .get(&(set.clone(), *component))
                        .unwrap_or(&0.0);
                    for &node in self.mesh.named_set(set)? {
                        bcs.push(DirichletBc {
                            dof: node * dim + component,
                            value,
                        });
                    }
                }
                Load::VelocityRamp {
                    set,
                    component,
                    speed,
                    ramp_time,
                } => {
                    let value = ramp_displacement(*speed, *ramp_time, t_next);
                    for &node in self.mesh.named_set(set)? {
                        bcs.push(DirichletBc {
                            dof: node * dim + component,
                            value,
                        });
                    }
                }
                Load::Traction { .. } | Load::ForceRamp { .. } => {}
            }
        }
        Ok(bcs)
    }

    fn external_force(&self, phase: &Phase) -> Result<Vec<f64>> {
        let dim = self.mesh.dim();
        let mut f = vec![0.0; self.mesh.n_nodes() * dim];
        for load in &phase.loads {
            if let Load::Traction { set, vector } = load {
                fem::assemble_traction(&self.mesh, set, vector, &mut f)?;
            }
        }
        for ((set, component), total) in &self.force_offsets {
            let nodes = self.mesh.named_set(set)?;
            if nodes.is_empty() {
                continue;
            }
            let per_node = total / nodes.len() as f64;
            for &node in nodes {
                f[node * dim + component] += per_node;
            }
        }
        Ok(f)
    }

    /// Advance one step through the schedule.
    pub fn step(&mut self) -> Result<StepReport> {
        let step = self.state.step;
        let phase = self
            .schedule
            .phase_of_step(step)
            .ok_or_else(|| Error::invalid_argument("schedule exhausted"))?
            .clone();
        let dt = phase.dt;
        let t_next = self.state.time + dt;

        // Accumulate incremental displacement and force drivers.
        for load in &phase.loads {
            match load {
                Load::Displacement {
                    set,
                    component,
                    increment,
                } => {
                    *self
                        .offsets
                        .entry((set.clone(), *component))
                        .or_insert(0.0) += increment;
                }
                Load::ForceRamp {
                    set,
                    component,
                    increment,
                } => {
                    *self
                        .force_offsets
                        .entry((set.clone(), *component))
                        .or_insert(0.0) += increment;
                }
                _ => {}
            }
        }
        let bcs = self.constraints_at(&phase, t_next)?;
        let f_ext = self.external_force(&phase)?;

        // Initial guess: linear extrapolation of the accepted displacement
        // when the previous step used a comparable increment.
        let mut u_trial = self.state.u.clone();
        if step >= 2 && self.dt_prev > 0.0 {
            let r = dt / self.dt_prev;
            for i in 0..u_trial.len() {
                u_trial[i] += r * (self.state.u[i] - self.u_prev[i]);
            }
        }
        let mut phi_trial = self.state.phi.clone();
        let mut h_trial = self.state.history.clone();

        let mut anderson = AndersonMixer::new(self.controls.anderson_depth);
        let mut aitken = (self.controls.aitken && self.controls.anderson_depth == 0)
            .then(AitkenRelaxation::new);
        let mut residual: Vec<f64> = Vec::new();
        let mut linear_iterations = 0;
        let mut increment = f64::INFINITY;
        let mut iterations = 0;
        while iterations < self.controls.max_iterations {
            iterations += 1;

            let du_norm = match self.analysis {
                Analysis::QuasiStatic => self.newton_quasistatic(
                    &mut u_trial,
                    &phi_trial,
                    &bcs,
                    &f_ext,
                    &mut linear_iterations,
                )?,
                Analysis::Dynamic(ga) => self.newton_dynamic(
                    ga,
                    dt,
                    &mut u_trial,
                    &phi_trial,
                    &bcs,
                    &f_ext,
                    &mut linear_iterations,
                )?,
            };

            self.update_history(&u_trial, &mut h_trial)?;

            let (k_phi, f_phi) = fem::assemble_phase(&self.mesh, &h_trial, &self.params)?;
            let (mut phi_new, rep) =
                self.solve_linear(PHASE_CACHE, &k_phi, &f_phi, Some(&phi_trial))?;
            linear_iterations += rep.iterations;
            anderson.mix(&phi_trial, &mut phi_new);
            let dphi_norm = diff_norm(&phi_new, &phi_trial);
            let phi_norm = norm(&phi_new);
            let u_norm = norm(&u_trial);

            increment = (du_norm / u_norm.max(1.0)).max(dphi_norm / phi_norm.max(1.0));
            if increment <= self.controls.tolerance {
                // Commit the raw solution of the phase equation, not a
                // relaxed combination.
                phi_trial = phi_new;
                break;
            }
            match aitken.as_mut() {
                Some(ak) => {
                    residual.clear();
                    residual.extend(phi_new.iter().zip(&phi_trial).map(|(n, p)| n - p));
                    ak.relax(&mut phi_trial, &residual);
                }
                None => phi_trial = phi_new,
            }
        }
        if increment > self.controls.tolerance {
            return Err(Error::StepFailure {
                step,
                time: t_next,
                message: format!(
                    "stagger loop reached {} iterations with relative increment {increment:.3e}",
                    self.controls.max_iterations
                ),
            });
        }

        // Commit.
        if let Analysis::Dynamic(ga) = self.analysis {
            let (v_new, a_new) = self.newmark_update(ga, dt, &u_trial);
            self.state.v = v_new;
            self.state.a = a_new;
        }
        self.u_prev = std::mem::replace(&mut self.state.u, u_trial);
        self.dt_prev = dt;
        // The phase equation carries no bound constraint, so the field can
        // overshoot 1 slightly ahead of a fast crack. Project the committed
        // field back onto the physical range.
        for p in phi_trial.iter_mut() {
            *p = p.clamp(0.0, 1.0);
        }
        self.state.phi = phi_trial;
        self.state.history = h_trial;
        self.state.time = t_next;
        self.state.step = step + 1;
        Ok(StepReport {
            step: self.state.step,
            time: t_next,
            dt,
            stagger_iterations: iterations,
            final_increment: increment,
            linear_iterations,
        })
    }

    /// Run the remaining schedule, invoking `on_step` after each accepted
    /// step.
    pub fn run<F>(&mut self, mut on_step: F) -> Result<()>
    where
        F: FnMut(&Simulation, &StepReport) -> Result<()>,
    {
        while !self.is_finished() {
            let report = self.step()?;
            on_step(self, &report)?;
        }
        Ok(())
    }

    fn newton_quasistatic(
        &self,
        u_trial: &mut [f64],
        phi: &[f64],
        bcs: &[DirichletBc],
        f_ext: &[f64],
        linear_iterations: &mut usize,
    ) -> Result<f64> {
        let (mut k, f_int) = fem::assemble_displacement(
            &self.mesh,
            u_trial,
            phi,
            &self.consts,
            &self.params,
            self.perturbation,
        )?;
        let mut rhs: Vec<f64> = f_ext.iter().zip(&f_int).map(|(e, i)| e - i).collect();
        let delta_bcs: Vec<DirichletBc> = bcs
            .iter()
            .map(|bc| DirichletBc {
                dof: bc.dof,
                value: bc.value - u_trial[bc.dof],
            })
            .collect();
        fem::apply_dirichlet(&mut k, &mut rhs, &delta_bcs)?;
        let (du, rep) = self.solve_linear(MOMENTUM_CACHE, &k, &rhs, None)?;
        *linear_iterations += rep.iterations;
        for (u, d) in u_trial.iter_mut().zip(&du) {
            *u += d;
        }
        Ok(norm(&du))
    }

    #[allow(clippy::too_many_arguments)]
    fn newton_dynamic(
        &self,
        ga: GeneralizedAlpha,
        dt: f64,
        u_trial: &mut [f64],
        phi: &[f64],
        bcs: &[DirichletBc],
        f_ext: &[f64],
        linear_iterations: &mut usize,
    ) -> Result<f64> {
        let mass = self
            .mass
            .as_ref()
            .ok_or_else(|| Error::internal("dynamic step without a mass matrix"))?;
        let n = u_trial.len();
        let un = &self.state.u;
        let vn = &self.state.v;
        let an = &self.state.a;

        // Newmark acceleration consistent with the trial displacement.
        let inv_bdt2 = 1.0 / (ga.beta * dt * dt);
        let a_coeff = (1.0 - 2.0 * ga.beta) / (2.0 * ga.beta);
        let mut a_trial = vec![0.0; n];
        for i in 0..n {
            a_trial[i] = inv_bdt2 * (u_trial[i] - un[i] - dt * vn[i]) - a_coeff * an[i];
        }
        let mut u_mid = vec![0.0; n];
        let mut a_mid = vec![0.0; n];
        for i in 0..n {
            u_mid[i] = (1.0 - ga.alpha_f) * u_trial[i] + ga.alpha_f * un[i];
            a_mid[i] = (1.0 - ga.alpha_m) * a_trial[i] + ga.alpha_m * an[i];
        }
        let (mut k_eff, f_int_mid) = fem::assemble_displacement(
            &self.mesh,
            &u_mid,
            phi,
            &self.consts,
            &self.params,
            self.perturbation,
        )?;
        k_eff.scale(1.0 - ga.alpha_f);
        k_eff.add_scaled(mass, (1.0 - ga.alpha_m) * inv_bdt2);

        let mut ma = vec![0.0; n];
        mass.mul_vec(&a_mid, &mut ma);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = f_ext[i] - f_int_mid[i] - ma[i];
        }
        let delta_bcs: Vec<DirichletBc> = bcs
            .iter()
            .map(|bc| DirichletBc {
                dof: bc.dof,
                value: bc.value - u_trial[bc.dof],
            })
            .collect();
        fem::apply_dirichlet(&mut k_eff, &mut rhs, &delta_bcs)?;
        let (du, rep) = self.solve_linear(MOMENTUM_CACHE, &k_eff, &rhs, None)?;
        *linear_iterations += rep.iterations;
        for (u, d) in u_trial.iter_mut().zip(&du) {
            *u += d;
        }
        Ok(norm(&du))
    }

    fn newmark_update(
        &self,
        ga: GeneralizedAlpha,
        dt: f64,
        u_new: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let n = u_new.len();
        let inv_bdt2 = 1.0 / (ga.beta * dt * dt);
        let a_coeff = (1.0 - 2.0 * ga.beta) / (2.0 * ga.beta);
        let mut a_new = vec![0.0; n];
        let mut v_new = vec![0.0; n];
        for i in 0..n {
            a_new[i] = inv_bdt2 * (u_new[i] - self.state.u[i] - dt * self.state.v[i])
                - a_coeff * self.state.a[i];
            v_new[i] =
                self.state.v[i] + dt * ((1.0 - ga.gamma) * self.state.a[i] + ga.gamma * a_new[i]);
        }
        (v_new, a_new)
    }

    /// Raise the trial history to the tensile energy density of the trial
    /// displacement wherever that exceeds the committed value.
    fn update_history(&self, u_trial: &[f64], h_trial: &mut QpScalarField) -> Result<()> {
        let dim = self.mesh.dim();
        for e in 0..self.mesh.n_elements() {
            let nodes = self.mesh.element(e);
            let mut u_elem = Vec::with_capacity(nodes.len() * dim);
            for &node in nodes {
                for c in 0..dim {
                    u_elem.push(u_trial[node * dim + c]);
                }
            }
            let evals = fem::element_evals(&self.mesh, e, DEFAULT_QUADRATURE_ORDER)?;
            for (q, eval) in evals.iter().enumerate() {
                let strain = fem::strain_at(eval, dim, &u_elem)?;
                let split = constitutive::spectral_split(&strain, self.perturbation)?;
                let energies =
                    constitutive::split_energies(&split, self.consts.lame_lambda, self.consts.lame_mu);
                let committed = self.state.history.get(e, q);
                let h = committed.max(energies.psi_plus);
                h_trial.set(e, q, h);
            }
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Aitken relaxation of a fixed-point iteration: the next iterate is
/// `x + omega * r` with `r` the raw update and `omega` adapted from the
/// change of successive residuals. The factor is clamped so a noisy
/// residual history cannot freeze or destabilize the iteration.
struct AitkenRelaxation {
    omega: f64,
    r_prev: Vec<f64>,
}

impl AitkenRelaxation {
    fn new() -> Self {
        Self {
            omega: 1.0,
            r_prev: Vec::new(),
        }
    }

    fn relax(&mut self, x: &mut [f64], r: &[f64]) {
        if self.r_prev.len() == r.len() {
            let mut num = 0.0;
            let mut den = 0.0;
            for (rc, rp) in r.iter().zip(&self.r_prev) {
                let dr = rc - rp;
                num += rp * dr;
                den += dr * dr;
            }
            if den > 0.0 {
                self.omega = (-self.omega * num / den).clamp(0.25, 2.0);
            }
        }
        for (xi, ri) in x.iter_mut().zip(r) {
            *xi += self.omega * ri;
        }
        self.r_prev.clear();
        self.r_prev.extend_from_slice(r);
    }
}

/// Depth-limited Anderson mixing of a fixed-point iteration. With depth 0
/// the new iterate passes through unchanged.
struct AndersonMixer {
    depth: usize,
    iterates: Vec<Vec<f64>>,
    residuals: Vec<Vec<f64>>,
}

impl AndersonMixer {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            iterates: Vec::new(),
            residuals: Vec::new(),
        }
    }

    /// Given the previous iterate and the raw fixed-point output, replace
    /// the output with the mixed iterate.
    fn mix(&mut self, previous: &[f64], output: &mut Vec<f64>) {
        if self.depth == 0 {
            return;
        }
        let residual: Vec<f64> = output.iter().zip(previous).map(|(o, p)| o - p).collect();
        self.iterates.push(output.clone());
        self.residuals.push(residual);
        if self.iterates.len() > self.depth + 1 {
            self.iterates.remove(0);
            self.residuals.remove(0);
        }
        let m = self.iterates.len() - 1;
        if m == 0 {
            return;
        }
        // Solve the least-squares problem for the mixing weights via the
        // normal equations on residual differences.
        let latest = self.residuals.len() - 1;
        let diffs: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                self.residuals[latest]
                    .iter()
                    .zip(&self.residuals[j])
                    .map(|(r, rj)| r - rj)
                    .collect()
            })
            .collect();
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                a[i * m + j] = dot(&diffs[i], &diffs[j]);
            }
            b[i] = dot(&diffs[i], &self.residuals[latest]);
            a[i * m + i] += 1e-12 * (1.0 + a[i * m + i]);
        }
        if let Some(theta) = solve_dense(&mut a, &mut b, m) {
            let mut mixed = self.iterates[latest].clone();
            for (j, t) in theta.iter().enumerate() {
                for (x, (gl, gj)) in mixed
                    .iter_mut()
                    .zip(self.iterates[latest].iter().zip(&self.iterates[j]))
                {
                    *x += t * (gj - gl);
                }
            }
            *output = mixed;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting for the small Anderson
/// system; returns None when the system is numerically singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in (col + 1)..n {
            s -= a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}
