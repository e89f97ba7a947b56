//! The six verbs. Each writes its artifacts under `out` and returns the
//! names of the deterministic ones, which the manifest hashes.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use piston_core::hardcore::{self, hard_slow_state, Event, Observer};
use piston_core::harness::{self, initial_state, sample_phases, EnsembleSpec, Setup};
use piston_core::softcore::{self, StepControl};
use piston_core::{
    averaged_energy, effective_hamiltonian, io, phase_integrals, solve_averaged, solve_npiston,
    AngleState, AveragedModel, EventRecord, EvolveOptions, FullState, SlowPath, SlowState,
    SolverOptions, SystemConfig,
};
use serde_json::json;

use crate::config::Document;

pub struct Context<'a> {
    pub doc: &'a Document,
    pub out: &'a Path,
    pub jobs: usize,
    pub plot: bool,
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = out.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn phase(doc: &Document) -> AngleState {
    doc.phase.clone().unwrap_or_else(|| {
        sample_phases(doc.system.n1, doc.system.n2, 1, doc.system.seed).remove(0)
    })
}

fn require_epsilon(cfg: &SystemConfig) -> Result<()> {
    if !(cfg.epsilon > 0.0) {
        bail!(piston_core::Error::Config {
            field: "epsilon".into(),
            reason: "this command needs a moving piston (epsilon > 0)".into(),
        });
    }
    Ok(())
}

fn summary(ctx: &Context, value: serde_json::Value) -> Result<()> {
    io::write_json(create(ctx.out, "summary.json")?, &value)?;
    println!("{}", serde_json::to_string(&value)?);
    Ok(())
}

struct Collect<'a> {
    cfg: &'a SystemConfig,
    path: SlowPath,
    events: Vec<EventRecord>,
}

impl Observer for Collect<'_> {
    fn sample(&mut self, state: &FullState) {
        self.path.tau.push(self.cfg.epsilon * state.t);
        self.path.states.push(hard_slow_state(state, self.cfg));
    }

    fn wants_events(&self) -> bool {
        true
    }

    fn event(&mut self, event: &Event, pre: &FullState, post: &FullState) {
        self.events.push(EventRecord {
            time: event.time,
            kind: event.kind.clone(),
            pre: hard_slow_state(pre, self.cfg),
            post: hard_slow_state(post, self.cfg),
        });
    }
}

fn ham_column(states: &[SlowState], h0: &SlowState, cfg: &SystemConfig) -> Vec<f64> {
    states
        .iter()
        .map(|h| effective_hamiltonian(h, h0, cfg))
        .collect()
}

/// One actual run from the configured slow state and phase.
pub fn simulate(ctx: &Context) -> Result<Vec<String>> {
    let doc = ctx.doc;
    let cfg = &doc.system;
    require_epsilon(cfg)?;
    let profile = doc.profile()?;
    let set = doc.compact_set()?;
    let core = piston_core::SoftCore::new(profile.clone(), set.margin());
    let full0 = initial_state(&doc.initial, &phase(doc), cfg, &core)?;
    let until = cfg.horizon_t / cfg.epsilon;
    let dt = 1.0 / (harness::SAMPLES_PER_SLOW_TIME * cfg.epsilon);
    let mut outputs = vec!["trajectory.csv".to_string()];
    let (path, events, drift) = if cfg.is_hard() {
        let mut obs = Collect {
            cfg,
            path: SlowPath::default(),
            events: Vec::new(),
        };
        let opts = EvolveOptions {
            sample_dt: Some(dt),
            ..EvolveOptions::for_epsilon(cfg.epsilon)
        };
        let s = hardcore::evolve(full0, until, cfg, &opts, &mut obs)?;
        obs.path.work = s.events;
        io::write_events(create(ctx.out, "events.csv")?, &obs.events)?;
        outputs.push("events.csv".into());
        (obs.path, Some(obs.events.len()), None)
    } else {
        let control = StepControl {
            sample_dt: Some(dt),
            ..StepControl::default()
        };
        let mut path = SlowPath::default();
        let s = softcore::integrate(full0, until, cfg, &profile, &control, |st| {
            path.tau.push(cfg.epsilon * st.t);
            path.states
                .push(softcore::soft_slow_state(st, cfg, &profile));
        })?;
        path.work = s.steps;
        (path, None, Some(s.max_drift))
    };
    let h0 = path.states[0].clone();
    let ham = ham_column(&path.states, &h0, cfg);
    io::write_path(
        create(ctx.out, "trajectory.csv")?,
        &path,
        &[("effective_hamiltonian", ham)],
    )?;
    let x0 = h0.x;
    let max_dx = path
        .states
        .iter()
        .map(|h| (h.x - x0).abs())
        .fold(0.0, f64::max);
    summary(
        ctx,
        json!({
            "verb": "simulate",
            "final_X": path.states.last().map(|h| h.x),
            "max_abs_dX": max_dx,
            "max_abs_dX_over_epsilon": max_dx / cfg.epsilon,
            "events": events,
            "steps": path.work,
            "max_energy_drift": drift,
        }),
    )?;
    outputs.push("summary.json".into());
    Ok(outputs)
}

/// Solution of the averaged equation on a uniform slow-time grid.
pub fn average(ctx: &Context) -> Result<Vec<String>> {
    let doc = ctx.doc;
    let cfg = &doc.system;
    let set = doc.compact_set()?;
    let core = piston_core::SoftCore::new(doc.profile()?, set.margin());
    let opts = SolverOptions::default();
    let traj = if cfg.is_hard() {
        solve_averaged(
            &doc.initial.to_speeds(cfg),
            cfg.horizon_t,
            cfg,
            AveragedModel::Hard,
            Some(&set),
            &opts,
        )?
    } else {
        solve_averaged(
            &doc.initial.to_energies(cfg),
            cfg.horizon_t,
            cfg,
            AveragedModel::Soft(&core),
            Some(&set),
            &opts,
        )?
    };
    let n = 1000;
    let end = traj.tau_end();
    let tau: Vec<f64> = (0..=n).map(|k| end * k as f64 / n as f64).collect();
    let states: Vec<SlowState> = tau.iter().map(|&t| traj.eval(t)).collect();
    let h0 = &states[0];
    let ham = ham_column(&states, h0, cfg);
    let energy: Vec<f64> = states.iter().map(|h| averaged_energy(h, cfg)).collect();
    let spread = |v: &[f64]| {
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        (hi - lo) / v[0].abs()
    };
    let (ham_spread, energy_spread) = (spread(&ham), spread(&energy));
    let mut columns = vec![
        ("effective_hamiltonian".to_string(), ham),
        ("averaged_energy".to_string(), energy),
    ];
    let mut invariant_spread = Vec::new();
    if !cfg.is_hard() {
        let per_state = states
            .iter()
            .map(|h| phase_integrals(h, cfg, &core))
            .collect::<piston_core::Result<Vec<_>>>()?;
        for i in 0..cfg.n1 + cfg.n2 {
            let col: Vec<f64> = per_state.iter().map(|v| v[i]).collect();
            invariant_spread.push(spread(&col));
            columns.push((format!("I_{i}"), col));
        }
    }
    let named: Vec<(&str, Vec<f64>)> = columns
        .iter()
        .map(|(n, c)| (n.as_str(), c.clone()))
        .collect();
    io::write_trajectory(create(ctx.out, "trajectory.csv")?, &tau, &states, &named)?;
    summary(
        ctx,
        json!({
            "verb": "average",
            "tau_end": end,
            "first_exit": traj.first_exit,
            "stopped_by": traj.stopped_by,
            "effective_hamiltonian_relative_spread": ham_spread,
            "averaged_energy_relative_spread": energy_spread,
            "phase_integral_relative_spread": invariant_spread,
        }),
    )?;
    Ok(vec!["trajectory.csv".into(), "summary.json".into()])
}

fn ensemble(doc: &Document) -> Result<EnsembleSpec> {
    let study = doc
        .study
        .as_ref()
        .ok_or_else(|| piston_core::Error::Config {
            field: "study".into(),
            reason: "this command needs a `study` section".into(),
        })?;
    let spec = EnsembleSpec {
        h0: doc.initial.clone(),
        n_phases: study.n_phases,
        seed: doc.system.seed,
        epsilons: study.epsilons.clone(),
        deltas: study
            .deltas
            .clone()
            .unwrap_or_else(|| vec![doc.system.delta]),
        horizon: study.horizon.unwrap_or(doc.system.horizon_t),
    };
    spec.validate()?;
    Ok(spec)
}

fn setup(ctx: &Context) -> Result<Setup> {
    let mut s = Setup::new(
        ctx.doc.system.clone(),
        ctx.doc.profile()?,
        ctx.doc.compact_set()?,
    );
    s.jobs = ctx.jobs;
    Ok(s)
}

/// Actual-vs-averaged convergence in `epsilon`, per `delta`.
pub fn converge(ctx: &Context) -> Result<Vec<String>> {
    let spec = ensemble(ctx.doc)?;
    let report = harness::convergence_study(&spec, &setup(ctx)?)?;
    io::write_errors(create(ctx.out, "errors.csv")?, &report.table)?;
    io::write_timings(create(ctx.out, "timings.csv")?, &report.table)?;
    let per_delta: Vec<_> = report
        .per_delta
        .iter()
        .map(|d| {
            json!({
                "delta": d.delta,
                "slope": d.fit.slope,
                "intercept": d.fit.intercept,
                "points": d.fit.points,
                "window": d.fit.window,
                "within_window": d.fit.within_window(),
                "worst": d.worst,
                "monotone": d.monotone,
            })
        })
        .collect();
    let fit = json!({
        "verb": "converge",
        "window_note": "slope window is an acceptance choice; the theory fixes only the order",
        "per_delta": per_delta,
        "worst_over_delta": report.worst_over_delta(),
        "any_exit": report.table.any_exit(),
    });
    io::write_json(create(ctx.out, "fit.json")?, &fit)?;
    let mut outputs = vec!["errors.csv".to_string(), "fit.json".into()];
    if ctx.plot {
        let fits: Vec<(f64, &piston_core::SlopeFit)> =
            report.per_delta.iter().map(|d| (d.delta, &d.fit)).collect();
        std::fs::write(
            ctx.out.join("plot.gp"),
            io::gnuplot_script("errors.csv", &fits),
        )?;
        outputs.push("plot.gp".into());
    }
    for d in &report.per_delta {
        println!(
            "delta={} slope={:.4} within={} monotone={}",
            d.delta,
            d.fit.slope,
            d.fit.within_window(),
            d.monotone
        );
    }
    Ok(outputs)
}

/// Soft-core against hard-core actual runs over the `(epsilon, delta)` grid.
pub fn compare(ctx: &Context) -> Result<Vec<String>> {
    let spec = ensemble(ctx.doc)?;
    let report = harness::hard_soft_comparison(&spec, &setup(ctx)?)?;
    io::write_errors(create(ctx.out, "errors.csv")?, &report.table)?;
    io::write_timings(create(ctx.out, "timings.csv")?, &report.table)?;
    let sweep = |s: &harness::FloorSweep| {
        json!({
            "fixed": s.fixed,
            "floor": s.floor,
            "points": s.points,
            "slope": s.fit.as_ref().map(|f| f.slope),
            "window": piston_core::SLOPE_WINDOW,
        })
    };
    let fit = json!({
        "verb": "compare",
        "model": "error ~ a * epsilon + b * delta",
        "a": report.coef_epsilon,
        "b": report.coef_delta,
        "delta_sweep_at_min_epsilon": sweep(&report.delta_sweep),
        "epsilon_sweep_at_min_delta": sweep(&report.epsilon_sweep),
    });
    io::write_json(create(ctx.out, "fit.json")?, &fit)?;
    println!("a={:.4} b={:.4}", report.coef_epsilon, report.coef_delta);
    Ok(vec!["errors.csv".into(), "fit.json".into()])
}

/// Averaged N-piston solution and its effective Hamiltonian.
pub fn npiston(ctx: &Context) -> Result<Vec<String>> {
    let run = ctx
        .doc
        .npiston
        .as_ref()
        .ok_or_else(|| piston_core::Error::Config {
            field: "npiston".into(),
            reason: "this command needs an `npiston` section".into(),
        })?;
    run.state.validate()?;
    let traj = solve_npiston(&run.state, run.horizon, &SolverOptions::default())?;
    let end = traj.solution.t_end();
    let tau: Vec<f64> = (0..=1000).map(|k| end * k as f64 / 1000.0).collect();
    io::write_npiston(create(ctx.out, "trajectory.csv")?, &traj, &tau)?;
    let h: Vec<f64> = tau
        .iter()
        .map(|&t| piston_core::npiston_hamiltonian(&traj.eval(t), &run.state))
        .collect();
    let drift = h.iter().map(|v| (v / h[0] - 1.0).abs()).fold(0.0, f64::max);
    summary(
        ctx,
        json!({ "verb": "npiston", "tau_end": end, "stopped_by": traj.stopped_by, "hamiltonian_relative_drift": drift }),
    )?;
    Ok(vec!["trajectory.csv".into(), "summary.json".into()])
}

/// Piston-collision rates against `s / (2 L)`.
pub fn audit(ctx: &Context) -> Result<Vec<String>> {
    let doc = ctx.doc;
    let cfg = &doc.system;
    if !cfg.is_hard() {
        bail!(piston_core::Error::Config {
            field: "delta".into(),
            reason: "audit runs the hard core".into()
        });
    }
    let duration = doc
        .audit
        .as_ref()
        .map(|a| a.duration)
        .unwrap_or(if cfg.epsilon > 0.0 {
            cfg.horizon_t / cfg.epsilon
        } else {
            1000.0
        });
    let core = piston_core::SoftCore::new(doc.profile()?, doc.compact_set()?.margin());
    let full0 = initial_state(&doc.initial, &phase(doc), cfg, &core)?;
    let rows = harness::collision_rate_audit(cfg, full0, duration)?;
    io::write_rates(create(ctx.out, "rates.csv")?, &rows)?;
    let worst = rows.iter().map(|r| r.relative_error()).fold(0.0, f64::max);
    println!(
        "{}",
        json!({ "verb": "audit", "duration": duration, "worst_relative_error": worst })
    );
    Ok(vec!["rates.csv".into()])
}
