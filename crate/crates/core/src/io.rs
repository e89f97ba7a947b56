//! CSV and JSON artifacts. CSV files have a header row, `.` decimals and LF
//! line endings.

use std::io::Write;

use serde::Serialize;

use crate::averaged::{npiston_hamiltonian, NPistonTrajectory};
use crate::error::Result;
use crate::fit::SlopeFit;
use crate::hardcore::{EventKind, EventRecord};
use crate::harness::{ErrorTable, RateRow, SlowPath};
use crate::model::SlowState;

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `epsilon,delta,phase,sup_error,first_exit`; `first_exit` is empty when
/// the run stayed in the compact set.
pub fn write_errors<W: Write>(out: W, table: &ErrorTable) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["epsilon", "delta", "phase", "sup_error", "first_exit"])?;
    for r in &table.rows {
        w.write_record([
            num(r.epsilon),
            num(r.delta),
            r.phase.to_string(),
            num(r.sup_error),
            opt(r.first_exit),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `epsilon,delta,phase,wall_time` in seconds.
pub fn write_timings<W: Write>(out: W, table: &ErrorTable) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["epsilon", "delta", "phase", "wall_time"])?;
    for r in &table.rows {
        w.write_record([
            num(r.epsilon),
            num(r.delta),
            r.phase.to_string(),
            format!("{:.6}", r.wall_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn state_header(n1: usize, n2: usize) -> Vec<String> {
    let mut h = vec!["X".to_string(), "W".to_string()];
    h.extend((0..n1).map(|j| format!("left_{j}")));
    h.extend((0..n2).map(|j| format!("right_{j}")));
    h
}

fn state_fields(h: &SlowState) -> impl Iterator<Item = String> + '_ {
    h.to_vec().into_iter().map(num)
}

/// `tau,X,W,left_j..,right_j..` followed by one column per diagnostic.
pub fn write_trajectory<W: Write>(
    out: W,
    tau: &[f64],
    states: &[SlowState],
    diagnostics: &[(&str, Vec<f64>)],
) -> Result<()> {
    let mut w = writer(out);
    let (n1, n2) = states
        .first()
        .map_or((0, 0), |h| (h.left.len(), h.right.len()));
    let mut header = vec!["tau".to_string()];
    header.extend(state_header(n1, n2));
    header.extend(diagnostics.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header)?;
    for (k, (t, h)) in tau.iter().zip(states).enumerate() {
        let mut row = vec![num(*t)];
        row.extend(state_fields(h));
        row.extend(diagnostics.iter().map(|(_, col)| num(col[k])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory of an actual run, see [`write_trajectory`].
pub fn write_path<W: Write>(
    out: W,
    path: &SlowPath,
    diagnostics: &[(&str, Vec<f64>)],
) -> Result<()> {
    write_trajectory(out, &path.tau, &path.states, diagnostics)
}

/// `t,kind,side,index,X,W,left_j..,right_j..` with post-collision slow
/// values. A simultaneous group gives one row per member, kind
/// `simultaneous`.
pub fn write_events<W: Write>(out: W, events: &[EventRecord]) -> Result<()> {
    let mut w = writer(out);
    let (n1, n2) = events
        .first()
        .map_or((0, 0), |e| (e.post.left.len(), e.post.right.len()));
    let mut header: Vec<String> = ["t", "kind", "side", "index"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(state_header(n1, n2));
    w.write_record(&header)?;
    for e in events {
        let members: Vec<(&str, String, String)> = match &e.kind {
            EventKind::Piston { side, index } => {
                vec![("piston", side.as_str().into(), index.to_string())]
            }
            EventKind::Wall { side, index } => {
                vec![("wall", side.as_str().into(), index.to_string())]
            }
            EventKind::Simultaneous(list) => list
                .iter()
                .map(|c| {
                    (
                        "simultaneous",
                        c.side().as_str().to_string(),
                        c.index().to_string(),
                    )
                })
                .collect(),
        };
        for (kind, side, index) in members {
            let mut row = vec![num(e.time), kind.to_string(), side, index];
            row.extend(state_fields(&e.post));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `tau,X_i..,W_i..,hamiltonian` for an N-piston solution sampled at `tau`.
pub fn write_npiston<W: Write>(out: W, traj: &NPistonTrajectory, tau: &[f64]) -> Result<()> {
    let mut w = writer(out);
    let n = traj.template.pistons();
    let mut header = vec!["tau".to_string()];
    header.extend((0..n).map(|i| format!("X_{i}")));
    header.extend((0..n).map(|i| format!("W_{i}")));
    header.push("hamiltonian".into());
    w.write_record(&header)?;
    for &t in tau {
        let s = traj.eval(t);
        let mut row = vec![num(t)];
        row.extend(s.x.iter().chain(&s.w).map(|v| num(*v)));
        row.push(num(npiston_hamiltonian(&s, &traj.template)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `side,index,observed,predicted,relative_error`.
pub fn write_rates<W: Write>(out: W, rows: &[RateRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["side", "index", "observed", "predicted", "relative_error"])?;
    for r in rows {
        w.write_record([
            r.side.as_str().to_string(),
            r.index.to_string(),
            num(r.observed),
            num(r.predicted),
            num(r.relative_error()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Gnuplot script drawing worst error against `epsilon` on log-log axes,
/// one curve per `delta`, with the fitted power law.
pub fn gnuplot_script(errors_csv: &str, fits: &[(f64, &SlopeFit)]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset logscale xy\nset key left top\n");
    s.push_str("set xlabel 'epsilon'\nset ylabel 'sup error'\n");
    let mut plots = Vec::new();
    for (i, (delta, fit)) in fits.iter().enumerate() {
        s.push_str(&format!(
            "f{i}(x) = {:e} * x**{:e}\n",
            fit.constant(),
            fit.slope
        ));
        plots.push(format!(
            "'{errors_csv}' using ($2 == {delta:e} ? $1 : 1/0):4 skip 1 with points title 'delta = {delta}'"
        ));
        plots.push(format!(
            "f{i}(x) title sprintf('slope %.3f', {:e}) with lines",
            fit.slope
        ));
    }
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}
