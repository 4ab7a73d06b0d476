//! End-to-end verification suite.
//!
//! Twelve numbered checks cover the constitutive model, the discrete
//! fracture energy, the element formulation, the benchmark scenarios and
//! the global solution invariants. Each check prints one pass/fail line;
//! the test fails at the end if any check failed. Everything runs on a
//! single thread so that timings and results are reproducible.

use std::time::Instant;

use phasefield::constitutive::{
    critical_stress_1d, degradation, spectral_split, split_energies, stress, tangent,
    ElasticConstants, FractureParams, SymmetricTensor, DEFAULT_PERTURBATION,
    DEFAULT_RESIDUAL_STIFFNESS,
};
use phasefield::fem;
use phasefield::mesh::{generate_structured, Mesh};
use phasefield::postprocess::{
    crack_tips, dissipated_energy, internal_force, iso_contour_points, rayleigh_speed,
    reaction_force,
};
use phasefield::scenario::{builtin_scenario, build_simulation, Profile, ScenarioConfig};
use phasefield::stepper::{Simulation, StepReport};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-run record of the global solution invariants.
struct Tracker {
    name: &'static str,
    prev_history: Vec<f64>,
    history_monotone: bool,
    phi_min: f64,
    phi_max: f64,
    increments_converged: bool,
    steps: usize,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            prev_history: Vec::new(),
            history_monotone: true,
            phi_min: f64::INFINITY,
            phi_max: f64::NEG_INFINITY,
            increments_converged: true,
            steps: 0,
        }
    }

    fn observe_phi(&mut self, phi: &[f64]) {
        for &p in phi {
            self.phi_min = self.phi_min.min(p);
            self.phi_max = self.phi_max.max(p);
        }
    }

    fn step(&mut self, sim: &mut Simulation) -> StepReport {
        if self.prev_history.is_empty() {
            self.prev_history = sim.state().history.values.clone();
            self.observe_phi(&sim.state().phi);
        }
        let report = sim
            .step()
            .unwrap_or_else(|e| panic!("{}: step failed: {e}", self.name));
        let state = sim.state();
        for (new, old) in state.history.values.iter().zip(&self.prev_history) {
            if new < old {
                self.history_monotone = false;
            }
        }
        self.prev_history.copy_from_slice(&state.history.values);
        self.observe_phi(&state.phi);
        if !(report.final_increment <= 1.0e-6) {
            self.increments_converged = false;
        }
        self.steps += 1;
        report
    }
}

fn set_dofs(mesh: &Mesh, set: &str, component: usize) -> Vec<usize> {
    mesh.named_set(set)
        .expect("named set")
        .iter()
        .map(|&n| n * mesh.dim() + component)
        .collect()
}

fn reaction(sim: &Simulation, dofs: &[usize]) -> f64 {
    reaction_force(
        sim.mesh(),
        &sim.state().u,
        &sim.state().phi,
        sim.elastic_constants(),
        sim.fracture_params(),
        dofs,
    )
    .expect("reaction force")
}

/// Drive a displacement-controlled run, recording the load curve.
/// `stop(step, reaction, peak)` may terminate the run early.
fn run_quasistatic<F>(
    cfg: &ScenarioConfig,
    tracker: &mut Tracker,
    mut stop: F,
) -> (Simulation, Vec<f64>)
where
    F: FnMut(usize, f64, f64) -> bool,
{
    let mut sim = build_simulation(cfg).expect("build simulation");
    let set = cfg.outputs.reaction_set.clone().expect("reaction set");
    let dofs = set_dofs(sim.mesh(), &set, cfg.outputs.reaction_component);
    let mut curve = Vec::new();
    let mut peak = 0.0f64;
    while !sim.is_finished() {
        let report = tracker.step(&mut sim);
        let r = reaction(&sim, &dofs);
        peak = peak.max(r);
        curve.push(r);
        if stop(report.step, r, peak) {
            break;
        }
    }
    (sim, curve)
}

/// Load curve shape: single rise to a peak, then collapse. Returns the
/// peak value and a failure description if the shape is wrong.
fn curve_shape(curve: &[f64], require_collapse: bool) -> (f64, Option<String>) {
    let (i_peak, &peak) = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty curve");
    for j in 0..i_peak {
        if curve[j + 1] < curve[j] - 0.05 * peak {
            return (peak, Some(format!("load drops before the peak at step {j}")));
        }
    }
    let mut collapsed = false;
    for &r in &curve[i_peak + 1..] {
        if r < 0.35 * peak {
            collapsed = true;
        } else if collapsed && r > 0.45 * peak {
            return (peak, Some("second load peak after the collapse".into()));
        }
    }
    if require_collapse {
        let last = *curve.last().unwrap();
        if !(last < 0.2 * peak) {
            return (
                peak,
                Some(format!(
                    "final load {last:.3e} is not below 20% of the peak {peak:.3e}"
                )),
            );
        }
    }
    (peak, None)
}

/// Record of one dynamic run: per-step times, crack tips and dissipated
/// energy.
struct DynRun {
    times: Vec<f64>,
    tips: Vec<Vec<[f64; 2]>>,
    ed: Vec<f64>,
    sim: Simulation,
}

fn run_dynamic(
    cfg: &ScenarioConfig,
    origin: [f64; 2],
    cluster: f64,
    tracker: &mut Tracker,
) -> DynRun {
    let mut sim = build_simulation(cfg).expect("build simulation");
    let mut times = Vec::new();
    let mut tips = Vec::new();
    let mut ed = Vec::new();
    while !sim.is_finished() {
        let report = tracker.step(&mut sim);
        times.push(report.time);
        tips.push(
            crack_tips(sim.mesh(), &sim.state().phi, 0.5, origin, cluster).expect("crack tips"),
        );
        ed.push(
            dissipated_energy(sim.mesh(), &sim.state().phi, sim.fracture_params())
                .expect("dissipated energy"),
        );
    }
    DynRun {
        times,
        tips,
        ed,
        sim,
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl DynRun {
    /// Time of the first step with a crack contour near `origin`.
    /// Contours elsewhere (for example damage at the loaded boundary) do
    /// not count as initiation of this crack.
    fn initiation_near(&self, origin: [f64; 2], gate: f64) -> Option<f64> {
        self.tips
            .iter()
            .position(|tips| tips.iter().any(|t| dist(*t, origin) <= gate))
            .map(|i| self.times[i])
    }

    /// Maximum windowed growth rate of the crack-front radius from
    /// `origin`, over the tips selected by `keep`. The radius is kept as
    /// a running maximum, so tip clustering artifacts (branches merging
    /// or splitting in the reported tip list) cannot produce spurious
    /// jumps. The `keep` filter excludes unrelated damage zones, for
    /// example crushing at a loaded boundary.
    fn max_region_speed(
        &self,
        origin: [f64; 2],
        window: usize,
        keep: impl Fn([f64; 2]) -> bool,
    ) -> f64 {
        let mut radius: Vec<Option<f64>> = Vec::with_capacity(self.times.len());
        let mut running: Option<f64> = None;
        for tips in &self.tips {
            for t in tips.iter().copied().filter(|t| keep(*t)) {
                let d = dist(t, origin);
                running = Some(running.map_or(d, |r: f64| r.max(d)));
            }
            radius.push(running);
        }
        let mut max = 0.0f64;
        for i in window..radius.len() {
            if let (Some(a), Some(b)) = (radius[i - window], radius[i]) {
                max = max.max((b - a) / (self.times[i] - self.times[i - window]));
            }
        }
        max
    }

    /// Maximum windowed front speed taken separately in the half planes
    /// above and below `y0`.
    fn max_front_speed(&self, origin: [f64; 2], y0: f64, window: usize) -> f64 {
        let above = self.max_region_speed(origin, window, |t| t[1] - y0 >= -1.0e-12);
        let below = self.max_region_speed(origin, window, |t| y0 - t[1] >= -1.0e-12);
        above.max(below)
    }

    /// Farthest tip from `origin` in the final recorded step, restricted
    /// to the tips selected by `keep`.
    fn farthest_final(
        &self,
        origin: [f64; 2],
        keep: impl Fn([f64; 2]) -> bool,
    ) -> Option<[f64; 2]> {
        self.tips
            .last()?
            .iter()
            .copied()
            .filter(|t| keep(*t))
            .max_by(|a, b| dist(*a, origin).partial_cmp(&dist(*b, origin)).unwrap())
    }

    fn ed_monotone(&self) -> bool {
        self.ed
            .windows(2)
            .all(|w| w[1] >= w[0] - 1.0e-6 * w[0].abs().max(1.0e-12))
    }
}

fn gap_2d(principal: &[f64; 3]) -> f64 {
    (principal[0] - principal[1]).abs()
}

fn gap_3d(principal: &[f64; 3]) -> f64 {
    let mut g = f64::INFINITY;
    for a in 0..3 {
        for b in a + 1..3 {
            g = g.min((principal[a] - principal[b]).abs());
        }
    }
    g
}

fn energy_density(strain: &SymmetricTensor, phi: f64, c: &ElasticConstants, k: f64) -> f64 {
    let split = spectral_split(strain, DEFAULT_PERTURBATION).expect("split");
    let pair = split_energies(&split, c.lame_lambda, c.lame_mu);
    degradation(phi, k) * pair.psi_plus + pair.psi_minus
}

/// Golden-section maximization of a unimodal function on [a, b].
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Peak stress of the homogeneous single-element response, found by
/// direct numerical maximization over the applied strain.
fn homogeneous_peak_stress(e_mod: f64, gc: f64, l0: f64) -> f64 {
    let k = DEFAULT_RESIDUAL_STIFFNESS;
    let sigma = |eps: f64| {
        let h = 0.5 * e_mod * eps * eps;
        let drive = 2.0 * (1.0 - k) * h;
        let phi = drive / (gc / l0 + drive);
        degradation(phi, k) * e_mod * eps
    };
    let guess = (gc / (3.0 * e_mod * l0)).sqrt();
    golden_max(sigma, 0.0, 4.0 * guess)
}

/// Bit pattern of the full solution state after `n` steps.
fn state_digest(cfg: &ScenarioConfig, n: usize) -> Vec<u64> {
    let mut sim = build_simulation(cfg).expect("build simulation");
    for _ in 0..n {
        sim.step().expect("step");
    }
    let s = sim.state();
    s.u.iter()
        .chain(&s.v)
        .chain(&s.a)
        .chain(&s.phi)
        .chain(&s.history.values)
        .map(|x| x.to_bits())
        .collect()
}

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn record(&mut self, n: usize, what: &str, secs: f64, detail: Option<String>) {
        match detail {
            None => println!("check {n:2}: pass  ({secs:7.1} s)  {what}"),
            Some(d) => {
                println!("check {n:2}: FAIL  ({secs:7.1} s)  {what}: {d}");
                self.failures.push(format!("check {n}: {d}"));
            }
        }
    }
}

#[test]
fn acceptance() {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build_global()
        .ok();
    let mut report = Report {
        failures: Vec::new(),
    };
    let mut trackers: Vec<Tracker> = Vec::new();

    // Check 1: stress equals the strain derivative of the energy density,
    // the algorithmic tangent equals the strain derivative of the stress,
    // and the spectral split reconstructs the strain.
    let t0 = Instant::now();
    let detail = check_constitutive();
    let c1 = t0.elapsed().as_secs_f64();
    let budget1 = if c1 < 10.0 { detail } else { Some(format!("runtime {c1:.1} s exceeds 10 s")) };
    report.record(1, "constitutive consistency (1200 random strains, 2D and 3D)", c1, budget1);

    // Check 2: the closed-form homogeneous critical stress matches a
    // direct numerical maximization of the 0D response.
    let t0 = Instant::now();
    let mut detail = None;
    for (e_mod, gc, l0) in [
        (210.0e9, 2700.0, 1.5e-5),
        (32.0e9, 3.0, 5.0e-4),
        (20.8e9, 500.0, 6.0e-5),
    ] {
        let numeric = homogeneous_peak_stress(e_mod, gc, l0);
        let closed = critical_stress_1d(e_mod, gc, l0).expect("critical stress");
        let rel = (numeric - closed).abs() / closed;
        if rel > 1.0e-6 {
            detail = Some(format!(
                "E={e_mod:.3e}: peak {numeric:.8e} vs closed form {closed:.8e} (rel {rel:.2e})"
            ));
        }
    }
    let reference = critical_stress_1d(32.0e9, 3.0, 5.0e-4).expect("critical stress");
    if (reference - 4.5e6).abs() / 4.5e6 > 1.0e-6 {
        detail = Some(format!("closed form gives {reference:.6e}, expected 4.5 MPa"));
    }
    let c2 = t0.elapsed().as_secs_f64();
    let d2 = if c2 < 1.0 { detail } else { Some(format!("runtime {c2:.1} s exceeds 1 s")) };
    report.record(2, "homogeneous critical stress (three parameter sets)", c2, d2);

    // Check 3: the discrete crack functional on the optimal exponential
    // profile recovers G_c per unit crack area within 2%.
    let t0 = Instant::now();
    let detail = check_profile_energy();
    let c3 = t0.elapsed().as_secs_f64();
    let d3 = if c3 < 5.0 { detail } else { Some(format!("runtime {c3:.1} s exceeds 5 s")) };
    report.record(3, "fracture energy of the optimal crack profile", c3, d3);

    // Check 4: linear patch test on Q4 and HEX8 elements.
    let t0 = Instant::now();
    let mut detail = check_patch_2d();
    if detail.is_none() {
        detail = check_patch_3d();
    }
    report.record(
        4,
        "constant-strain patch test (4x4 Q4 and 2x2x2 HEX8)",
        t0.elapsed().as_secs_f64(),
        detail,
    );

    // Check 5: notched-plate tension. Straight crack at mid height, a
    // single load peak followed by collapse, and a strictly larger peak
    // when the regularization length is halved.
    let t0 = Instant::now();
    let cfg = builtin_scenario("sen-tension", Profile::Desk).expect("scenario");
    let l0 = cfg.fracture.l0;
    let mut tracker = Tracker::new("sen-tension 66x66");
    let (sim, curve) = run_quasistatic(&cfg, &mut tracker, |step, r, peak| {
        step > 45 && r < 0.18 * peak
    });
    trackers.push(tracker);
    let (peak_coarse, mut detail) = curve_shape(&curve, true);
    let contour = iso_contour_points(sim.mesh(), &sim.state().phi, 0.5).expect("contour");
    for p in &contour {
        if p[0] > 0.5e-3 + 1.0e-6 && (p[1] - 0.5e-3).abs() > 2.0 * l0 && detail.is_none() {
            detail = Some(format!(
                "crack point ({:.4e}, {:.4e}) strays more than 2 l0 from mid height",
                p[0], p[1]
            ));
        }
    }
    let mut fine = cfg.clone();
    fine.fracture.l0 = l0 / 2.0;
    fine.geometry.divisions = vec![132, 132];
    // The halved-l0 run only has to demonstrate a larger peak, so it can
    // stop the moment its rising load passes the coarse peak; driving it
    // through its own unstable crack jump would cost far more time.
    let mut tracker = Tracker::new("sen-tension 132x132");
    let (_, fine_curve) = run_quasistatic(&fine, &mut tracker, |step, r, peak| {
        peak > 1.001 * peak_coarse || (step > 45 && r < 0.75 * peak)
    });
    trackers.push(tracker);
    let peak_fine = fine_curve.iter().cloned().fold(0.0f64, f64::max);
    if detail.is_none() && !(peak_fine > peak_coarse) {
        detail = Some(format!(
            "halving l0 did not raise the peak: {peak_fine:.4e} vs {peak_coarse:.4e}"
        ));
    }
    let c5 = t0.elapsed().as_secs_f64();
    let d5 = if c5 < 900.0 { detail } else { Some(format!("runtime {c5:.0} s exceeds 900 s")) };
    report.record(5, "notched tension: crack path, load peak, l0 sensitivity", c5, d5);

    // Check 6: with l0 fixed, the coarse mesh (h = l0) overestimates the
    // peak relative to the resolved mesh (h = l0/2). The 34x34 grid puts
    // the slit on a mesh line while keeping h within 2% of l0.
    let t0 = Instant::now();
    let mut coarse = cfg.clone();
    coarse.geometry.divisions = vec![34, 34];
    // As in check 5, the run can stop once its rising load has passed
    // the reference peak; only the ordering matters here.
    let mut tracker = Tracker::new("sen-tension 34x34");
    let (_, coarse_curve) = run_quasistatic(&coarse, &mut tracker, |step, r, peak| {
        peak > 1.001 * peak_coarse || (step > 45 && r < 0.75 * peak)
    });
    trackers.push(tracker);
    let peak_h_l0 = coarse_curve.iter().cloned().fold(0.0f64, f64::max);
    let mut detail = None;
    if !(peak_h_l0 > peak_coarse) {
        detail = Some(format!(
            "peak at h=l0 ({peak_h_l0:.4e}) does not exceed peak at h=l0/2 ({peak_coarse:.4e})"
        ));
    }
    let c6 = t0.elapsed().as_secs_f64();
    let d6 = if c5 + c6 < 1500.0 {
        detail
    } else {
        Some(format!("combined runtime {:.0} s exceeds 1500 s", c5 + c6))
    };
    report.record(6, "mesh-size ordering of the tension peak", c6, d6);

    // Check 7: notched-plate shear. The crack curves downward; the final
    // tip sits at least 0.15 mm below the notch line.
    let t0 = Instant::now();
    let cfg = builtin_scenario("sen-shear", Profile::Desk).expect("scenario");
    let cluster = 3.0 * cfg.fracture.l0;
    let mut sim = build_simulation(&cfg).expect("build simulation");
    let mut tracker = Tracker::new("sen-shear 66x66");
    let mut tip_y = f64::INFINITY;
    while !sim.is_finished() {
        let report_step = tracker.step(&mut sim);
        if report_step.step % 4 == 0 || sim.is_finished() {
            let tips =
                crack_tips(sim.mesh(), &sim.state().phi, 0.5, [0.0, 0.5e-3], cluster)
                    .expect("crack tips");
            if let Some(t) = tips.first() {
                tip_y = t[1];
            }
            if tip_y <= 0.345e-3 {
                break;
            }
        }
    }
    trackers.push(tracker);
    let detail = if tip_y <= 0.35e-3 {
        None
    } else {
        Some(format!("final tip y = {tip_y:.4e} m, expected <= 3.5e-4 m"))
    };
    let c7 = t0.elapsed().as_secs_f64();
    let d7 = if c7 < 1200.0 { detail } else { Some(format!("runtime {c7:.0} s exceeds 1200 s")) };
    report.record(7, "notched shear: crack deflects below the notch line", c7, d7);

    // Check 8: impact shear. Initiation after 15 us, crack runs upward at
    // 55-75 degrees, tip speed stays within the expected Rayleigh-speed
    // band, dissipation grows monotonically.
    let t0 = Instant::now();
    let cfg = builtin_scenario("kalthoff", Profile::Desk).expect("scenario");
    let notch_tip = [0.05, 0.025];
    let cluster = 3.0 * cfg.fracture.l0;
    let mut tracker = Tracker::new("kalthoff");
    let kal = run_dynamic(&cfg, notch_tip, cluster, &mut tracker);
    trackers.push(tracker);
    let vr = rayleigh_speed(kal.sim.elastic_constants()).expect("rayleigh speed");
    let gate = 5.0 * cfg.fracture.l0;
    // The impactor crushes the slit lips near the loaded face and wave
    // reflections damage the supported bottom corner; only the quadrant
    // ahead of and above the notch tip belongs to the running crack.
    let region = {
        let x_min = notch_tip[0] - 2.0 * cfg.fracture.l0;
        let y_min = notch_tip[1] - 2.0 * cfg.fracture.l0;
        move |t: [f64; 2]| t[0] >= x_min && t[1] >= y_min
    };
    let t_init = kal.initiation_near(notch_tip, gate);
    let speed = kal.max_region_speed(notch_tip, 10, region);
    let mut detail = None;
    match t_init {
        Some(t) if t >= 15.0e-6 => {}
        Some(t) => detail = Some(format!("initiation at {:.2} us, expected >= 15 us", t * 1e6)),
        None => detail = Some("no crack initiated".into()),
    }
    if detail.is_none() {
        let tip = kal.farthest_final(notch_tip, region).expect("final tip");
        let angle = (tip[1] - notch_tip[1])
            .atan2(tip[0] - notch_tip[0])
            .to_degrees();
        if !(55.0..=75.0).contains(&angle) {
            detail = Some(format!("overall crack angle {angle:.1} deg outside [55, 75]"));
        }
    }
    if detail.is_none() && !(speed >= 0.3 * vr && speed <= 0.9 * vr) {
        detail = Some(format!(
            "max tip speed {speed:.0} m/s outside [{:.0}, {:.0}] m/s",
            0.3 * vr,
            0.9 * vr
        ));
    }
    if detail.is_none() && !kal.ed_monotone() {
        detail = Some("dissipated energy decreased".into());
    }
    let c8 = t0.elapsed().as_secs_f64();
    let d8 = if c8 < 2700.0 { detail } else { Some(format!("runtime {c8:.0} s exceeds 2700 s")) };
    report.record(8, "impact shear: initiation, angle, tip speed, dissipation", c8, d8);

    // Check 9: dynamic branching. One tip before 35 us, at least two by
    // 80 us, all tip speeds below 0.7 of the Rayleigh speed.
    let t0 = Instant::now();
    let cfg = builtin_scenario("branching", Profile::Desk).expect("scenario");
    let cluster = 3.0 * cfg.fracture.l0;
    let mut tracker = Tracker::new("branching");
    let run = run_dynamic(&cfg, [0.0, 0.02], cluster, &mut tracker);
    trackers.push(tracker);
    let vr = rayleigh_speed(run.sim.elastic_constants()).expect("rayleigh speed");
    let mut detail = None;
    for (i, t) in run.times.iter().enumerate() {
        if *t < 35.0e-6 && run.tips[i].len() != 1 && detail.is_none() {
            detail = Some(format!(
                "{} tips at t = {:.2} us, expected exactly 1 before 35 us",
                run.tips[i].len(),
                t * 1e6
            ));
        }
    }
    let final_tips = run.tips.last().expect("steps recorded").len();
    if detail.is_none() && final_tips < 2 {
        detail = Some(format!("{final_tips} tip(s) at 80 us, expected at least 2"));
    }
    let branch_speed = run.max_front_speed([0.0, 0.02], 0.02, 10);
    if detail.is_none() && !(branch_speed < 0.7 * vr) {
        detail = Some(format!(
            "max tip speed {branch_speed:.0} m/s reaches 0.7 v_R = {:.0} m/s",
            0.7 * vr
        ));
    }
    if detail.is_none() && !run.ed_monotone() {
        detail = Some("dissipated energy decreased".into());
    }
    let c9 = t0.elapsed().as_secs_f64();
    let d9 = if c9 < 1800.0 { detail } else { Some(format!("runtime {c9:.0} s exceeds 1800 s")) };
    report.record(9, "dynamic branching: tip count, speeds, dissipation", c9, d9);

    // Check 10: raising G_c slows the crack and delays initiation.
    let t0 = Instant::now();
    let mut tough = builtin_scenario("kalthoff", Profile::Desk).expect("scenario");
    tough.fracture.energy_release_rate = 1.0e4;
    let mut tracker = Tracker::new("kalthoff G_c=1e4");
    let brittle = run_dynamic(&tough, notch_tip, cluster_for(&tough), &mut tracker);
    trackers.push(tracker);
    let speed_low = brittle.max_region_speed(notch_tip, 10, region);
    let init_low = brittle.initiation_near(notch_tip, 5.0 * tough.fracture.l0);
    let mut detail = None;
    match (init_low, t_init) {
        (Some(a), Some(b)) if a < b => {}
        (a, b) => {
            detail = Some(format!(
                "initiation not delayed by the larger G_c: {a:?} vs {b:?}"
            ))
        }
    }
    if detail.is_none() && !(speed > 0.0 && speed < speed_low) {
        detail = Some(format!(
            "max tip speed not reduced by the larger G_c: {speed:.0} vs {speed_low:.0} m/s"
        ));
    }
    report.record(
        10,
        "toughness ordering of tip speed and initiation time",
        t0.elapsed().as_secs_f64(),
        detail,
    );

    // Check 11: Rayleigh speed estimate for steel.
    let t0 = Instant::now();
    let steel = ElasticConstants::new(190.0e9, 0.3, 8000.0).expect("constants");
    let vr = rayleigh_speed(&steel).expect("rayleigh speed");
    let detail = if (vr - 2803.0).abs() / 2803.0 <= 0.01 {
        None
    } else {
        Some(format!("v_R = {vr:.1} m/s, expected 2803 m/s within 1%"))
    };
    report.record(11, "Rayleigh wave speed for steel", t0.elapsed().as_secs_f64(), detail);

    // Check 12: global invariants over every run above, plus bitwise
    // reproducibility of serial reruns.
    let t0 = Instant::now();
    let mut problems: Vec<String> = Vec::new();
    for tr in &trackers {
        if !tr.history_monotone {
            problems.push(format!("{}: history field decreased", tr.name));
        }
        if tr.phi_min < -0.05 || tr.phi_max > 1.0 + 1.0e-3 {
            problems.push(format!(
                "{}: phi range [{:.4e}, {:.4e}] outside bounds",
                tr.name, tr.phi_min, tr.phi_max
            ));
        }
        if !tr.increments_converged {
            problems.push(format!("{}: a step finished above the stagger tolerance", tr.name));
        }
    }
    let mut detail = if problems.is_empty() {
        None
    } else {
        Some(problems.join("; "))
    };
    if detail.is_none() {
        let cfg = builtin_scenario("sen-tension", Profile::Desk).expect("scenario");
        if state_digest(&cfg, 25) != state_digest(&cfg, 25) {
            detail = Some("sen-tension rerun is not bitwise identical".into());
        }
    }
    if detail.is_none() {
        let cfg = builtin_scenario("kalthoff", Profile::Desk).expect("scenario");
        if state_digest(&cfg, 20) != state_digest(&cfg, 20) {
            detail = Some("kalthoff rerun is not bitwise identical".into());
        }
    }
    report.record(
        12,
        "history monotonicity, phi bounds, convergence, reproducibility",
        t0.elapsed().as_secs_f64(),
        detail,
    );

    assert!(
        report.failures.is_empty(),
        "failed checks:\n{}",
        report.failures.join("\n")
    );
}

fn cluster_for(cfg: &ScenarioConfig) -> f64 {
    3.0 * cfg.fracture.l0
}

fn check_constitutive() -> Option<String> {
    let consts = ElasticConstants::new(2.0, 0.25, 0.0).expect("constants");
    let params = FractureParams::new(1.0, 0.01, DEFAULT_RESIDUAL_STIFFNESS).expect("params");
    let k = params.residual_stiffness;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for &dim in &[2usize, 3] {
        let ncomp = if dim == 2 { 3 } else { 6 };
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < 600 {
            attempts += 1;
            if attempts > 100_000 {
                return Some("could not sample enough well-separated strains".into());
            }
            let comps: Vec<f64> = (0..ncomp).map(|_| rng.gen_range(-0.05..0.05)).collect();
            let strain = SymmetricTensor::from_components(dim, &comps).expect("tensor");
            let split = spectral_split(&strain, DEFAULT_PERTURBATION).expect("split");
            let gap = if dim == 2 {
                gap_2d(&split.principal)
            } else {
                gap_3d(&split.principal)
            };
            let min_abs = split.principal[..dim]
                .iter()
                .map(|p| p.abs())
                .fold(f64::INFINITY, f64::min);
            // Keep away from the kinks of the positive-part functions,
            // where the response is genuinely non-smooth and a finite
            // difference is meaningless.
            if gap < 1.0e-6
                || min_abs < 1.0e-6
                || split.trace().abs() < 1.0e-6
                || split.perturbation_applied
            {
                continue;
            }
            accepted += 1;

            // Split reconstruction.
            let mut recon_err = 0.0f64;
            for i in 0..dim {
                for j in 0..dim {
                    recon_err = recon_err.max(
                        (split.tensile.get(i, j) + split.compressive.get(i, j)
                            - strain.get(i, j))
                        .abs(),
                    );
                }
            }
            if recon_err > 1.0e-12 {
                return Some(format!("split reconstruction error {recon_err:.2e} in {dim}D"));
            }

            for &phi in &[0.0, 0.3, 0.7, 1.0] {
                // Stress against a finite difference of the energy. The
                // off-diagonal components each appear twice in the tensor,
                // so their derivative carries a factor of two.
                let sigma = stress(&split, phi, &consts, &params);
                let sig_norm = sigma.norm().max(1.0e-12);
                let h = 1.0e-6;
                for c in 0..ncomp {
                    let factor = if c < dim { 1.0 } else { 2.0 };
                    let mut plus = comps.clone();
                    plus[c] += h;
                    let mut minus = comps.clone();
                    minus[c] -= h;
                    let ep = SymmetricTensor::from_components(dim, &plus).unwrap();
                    let em = SymmetricTensor::from_components(dim, &minus).unwrap();
                    let fd = (energy_density(&ep, phi, &consts, k)
                        - energy_density(&em, phi, &consts, k))
                        / (2.0 * h);
                    let (i, j) = component_index(dim, c);
                    let err = (fd - factor * sigma.get(i, j)).abs() / (factor * sig_norm);
                    if err > 1.0e-5 {
                        return Some(format!(
                            "{dim}D stress component ({i},{j}) off by {err:.2e} at phi={phi}"
                        ));
                    }
                }

                // Tangent against a finite difference of the stress. The
                // step shrinks with the eigenvalue gap because the
                // eigenprojections steepen as eigenvalues approach.
                let d = tangent(&split, phi, &consts, &params).expect("tangent");
                let rows = fem::voigt_len(dim);
                let mut d_max = 0.0f64;
                for i in 0..rows {
                    for j in 0..rows {
                        d_max = d_max.max(d.get(i, j).abs());
                    }
                }
                let hd = (gap * 1.0e-3).clamp(1.0e-9, 1.0e-6);
                let base = strain.strain_voigt();
                for col in 0..rows {
                    let mut vp = base.clone();
                    vp[col] += hd;
                    let mut vm = base.clone();
                    vm[col] -= hd;
                    let sp = stress(
                        &spectral_split(
                            &SymmetricTensor::from_strain_voigt(dim, &vp).unwrap(),
                            DEFAULT_PERTURBATION,
                        )
                        .unwrap(),
                        phi,
                        &consts,
                        &params,
                    )
                    .stress_voigt();
                    let sm = stress(
                        &spectral_split(
                            &SymmetricTensor::from_strain_voigt(dim, &vm).unwrap(),
                            DEFAULT_PERTURBATION,
                        )
                        .unwrap(),
                        phi,
                        &consts,
                        &params,
                    )
                    .stress_voigt();
                    for row in 0..rows {
                        let fd = (sp[row] - sm[row]) / (2.0 * hd);
                        let err = (fd - d.get(row, col)).abs() / d_max.max(1.0e-12);
                        if err > 1.0e-4 {
                            return Some(format!(
                                "{dim}D tangent entry ({row},{col}) off by {err:.2e} at phi={phi}"
                            ));
                        }
                    }
                }
            }
        }
    }
    None
}

fn component_index(dim: usize, c: usize) -> (usize, usize) {
    match (dim, c) {
        (_, 0) => (0, 0),
        (_, 1) => (1, 1),
        (2, 2) => (0, 1),
        (3, 2) => (2, 2),
        (3, 3) => (0, 1),
        (3, 4) => (1, 2),
        (3, 5) => (0, 2),
        _ => unreachable!(),
    }
}

fn check_profile_energy() -> Option<String> {
    let l0 = 2.0e-3;
    let h = l0 / 4.0;
    let width = 4.0e-3;
    let length = 0.16;
    let mesh = generate_structured(
        2,
        &[length, width],
        &[(length / h) as usize, (width / h) as usize],
    )
    .expect("mesh");
    let gc = 7.0;
    let params = FractureParams::new(gc, l0, DEFAULT_RESIDUAL_STIFFNESS).expect("params");
    let x0 = 0.5 * length;
    let phi: Vec<f64> = mesh
        .coords()
        .iter()
        .map(|c| (-(c[0] - x0).abs() / l0).exp())
        .collect();
    let ed = dissipated_energy(&mesh, &phi, &params).expect("dissipated energy");
    let expected = gc * width;
    let rel = (ed - expected).abs() / expected;
    if rel <= 0.02 {
        None
    } else {
        Some(format!(
            "E_d = {ed:.6e}, expected {expected:.6e} (rel {rel:.2e})"
        ))
    }
}

fn patch_detail(
    mesh: &Mesh,
    strain: &SymmetricTensor,
    consts: &ElasticConstants,
    params: &FractureParams,
) -> Option<String> {
    let dim = mesh.dim();
    let mut u = vec![0.0; mesh.n_nodes() * dim];
    for (n, coord) in mesh.coords().iter().enumerate() {
        for i in 0..dim {
            u[n * dim + i] = (0..dim).map(|j| strain.get(i, j) * coord[j]).sum();
        }
    }
    let phi = vec![0.0; mesh.n_nodes()];
    let f = internal_force(mesh, &u, &phi, consts, params).expect("internal force");
    let (lo, hi) = mesh.bounding_box();
    let tol = 1.0e-9;
    for (n, coord) in mesh.coords().iter().enumerate() {
        let interior = (0..dim).all(|i| coord[i] > lo[i] + tol && coord[i] < hi[i] - tol);
        if !interior {
            continue;
        }
        for i in 0..dim {
            let r = f[n * dim + i].abs();
            if r > 1.0e-10 {
                return Some(format!("interior residual {r:.2e} at node {n}"));
            }
        }
    }
    // Exact constant stress at every quadrature point.
    let lam = consts.lame_lambda;
    let mu = consts.lame_mu;
    let mut expected = SymmetricTensor::zero(dim);
    for i in 0..dim {
        for j in i..dim {
            let v = if i == j {
                lam * strain.trace() + 2.0 * mu * strain.get(i, j)
            } else {
                2.0 * mu * strain.get(i, j)
            };
            expected.set(i, j, v);
        }
    }
    let norm = expected.norm();
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element(e);
        let mut u_elem = Vec::with_capacity(nodes.len() * dim);
        for &node in nodes {
            for c in 0..dim {
                u_elem.push(u[node * dim + c]);
            }
        }
        for eval in fem::element_evals(mesh, e, fem::DEFAULT_QUADRATURE_ORDER).expect("evals") {
            let eps = fem::strain_at(&eval, dim, &u_elem).expect("strain");
            let split = spectral_split(&eps, DEFAULT_PERTURBATION).expect("split");
            let sigma = stress(&split, 0.0, consts, params);
            for i in 0..dim {
                for j in i..dim {
                    let err = (sigma.get(i, j) - expected.get(i, j)).abs() / norm;
                    if err > 1.0e-10 {
                        return Some(format!(
                            "stress component ({i},{j}) off by {err:.2e} in element {e}"
                        ));
                    }
                }
            }
        }
    }
    None
}

fn check_patch_2d() -> Option<String> {
    let mesh = generate_structured(2, &[1.0, 1.0], &[4, 4]).expect("mesh");
    let consts = ElasticConstants::new(1.5, 0.3, 0.0).expect("constants");
    let params = FractureParams::new(1.0, 0.1, DEFAULT_RESIDUAL_STIFFNESS).expect("params");
    let strain =
        SymmetricTensor::from_components(2, &[1.3e-3, -0.7e-3, 0.4e-3]).expect("strain");
    patch_detail(&mesh, &strain, &consts, &params)
}

fn check_patch_3d() -> Option<String> {
    let mesh = generate_structured(3, &[1.0, 1.0, 1.0], &[2, 2, 2]).expect("mesh");
    let consts = ElasticConstants::new(1.5, 0.3, 0.0).expect("constants");
    let params = FractureParams::new(1.0, 0.1, DEFAULT_RESIDUAL_STIFFNESS).expect("params");
    let strain = SymmetricTensor::from_components(
        3,
        &[1.2e-3, 0.1e-3, -0.9e-3, 0.3e-3, 0.2e-3, 0.1e-3],
    )
    .expect("strain");
    patch_detail(&mesh, &strain, &consts, &params)
}
