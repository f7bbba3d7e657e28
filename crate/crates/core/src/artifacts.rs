//! CSV renderings of a run. Floats use Rust's shortest round-trip format, so
//! the same run always yields the same bytes.

use std::io::Write;

use crate::error::Error;
use crate::executor::RunArtifacts;

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn zone_headers(prefix: &str, ids: &[u32]) -> Vec<String> {
    ids.iter().map(|id| format!("{prefix}{id}")).collect()
}

/// `t,agent_id,x,y,action,r_<id>...` with one row per agent per tick.
pub fn write_trajectory<W: Write>(out: W, run: &RunArtifacts) -> Result<(), Error> {
    let ids = &run.diagnostics.zone_ids;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t", "agent_id", "x", "y", "action"]
        .map(String::from)
        .to_vec();
    header.extend(zone_headers("r_", ids));
    w.write_record(&header)?;
    for tick in &run.trajectory {
        let rewards: Vec<&str> = tick
            .rewards
            .iter()
            .map(|&r| if r { "1" } else { "0" })
            .collect();
        for (agent, (pos, action)) in tick.positions.iter().zip(&tick.actions).enumerate() {
            let mut row = vec![
                tick.t.to_string(),
                agent.to_string(),
                pos.x.to_string(),
                pos.y.to_string(),
                action.as_str().to_string(),
            ];
            row.extend(rewards.iter().map(|s| s.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `k,agent_id,m,lambda_prev,lambda_curr,g_prev,g_curr`.
pub fn write_multipliers<W: Write>(out: W, run: &RunArtifacts) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k",
        "agent_id",
        "m",
        "lambda_prev",
        "lambda_curr",
        "g_prev",
        "g_curr",
    ])?;
    for r in &run.multipliers {
        w.write_record([
            r.rollout.to_string(),
            r.agent.to_string(),
            r.zone_id.to_string(),
            fmt_f64(r.lambda_prev),
            fmt_f64(r.lambda_curr),
            fmt_f64(r.g_prev),
            fmt_f64(r.g_curr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,avg_<id>...`: running occupancy averages at every rollout boundary.
pub fn write_running_averages<W: Write>(
    out: W,
    run: &RunArtifacts,
    t_zero: u64,
) -> Result<(), Error> {
    let diag = &run.diagnostics;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(zone_headers("avg_", &diag.zone_ids));
    w.write_record(&header)?;
    for (k, counts) in diag.boundary_counts.iter().enumerate() {
        let t = (k as u64 + 1) * t_zero;
        let mut row = vec![t.to_string()];
        row.extend(counts.iter().map(|&c| fmt_f64(c as f64 / t as f64)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `k,lambda_<id>...,norm_sq`: centralized multipliers `λ^k`.
pub fn write_lambda<W: Write>(out: W, run: &RunArtifacts) -> Result<(), Error> {
    let diag = &run.diagnostics;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend(zone_headers("lambda_", &diag.zone_ids));
    header.push("norm_sq".into());
    w.write_record(&header)?;
    for (k, (lambda, sq)) in run.central_lambda.iter().zip(&diag.lambda_sq).enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(lambda.iter().map(|&l| fmt_f64(l)));
        row.push(fmt_f64(*sq));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `k,max_excess,min_excess,bound`: deviation of the agents' fresh copies
/// from the centralized `λ^{k+1}`, against `η d(G) / T0`.
pub fn write_mismatch<W: Write>(out: W, run: &RunArtifacts, bound: f64) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "max_excess", "min_excess", "bound"])?;
    for rec in &run.diagnostics.mismatch {
        w.write_record([
            rec.rollout.to_string(),
            fmt_f64(rec.max()),
            fmt_f64(rec.min()),
            fmt_f64(bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line per message: `t sender <hex of the canonical encoding>`.
pub fn write_message_trace<W: Write>(mut out: W, run: &RunArtifacts) -> Result<(), Error> {
    for (t, msg) in &run.messages {
        let hex: String = msg.to_bytes().iter().map(|b| format!("{b:02x}")).collect();
        writeln!(out, "{t} {} {hex}", msg.sender)?;
    }
    out.flush()?;
    Ok(())
}
