//! CSV and JSON writers for trajectories and reports.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::deterministic::DetTrajectory;
use crate::error::Result;
use crate::kinetics::ChannelKinetics;
use crate::stochastic::StochTrajectory;

/// Long format `t, node, x, v, p_<state>…`, one row per sample and node.
pub fn write_det_trajectory(path: &Path, traj: &DetTrajectory, kinetics: &ChannelKinetics) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "node".into(), "x".into(), "v".into()];
    header.extend(kinetics.states().iter().map(|s| format!("p_{}", s.name)));
    w.write_record(&header)?;
    for s in &traj.samples {
        let grid = s.v.grid();
        for j in 0..=grid.cells() {
            let mut row = vec![
                s.t.to_string(),
                j.to_string(),
                grid.node(j).to_string(),
                s.v.node_value(j).to_string(),
            ];
            row.extend(s.p.iter().map(|f| f.values()[j].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t, l2, h10, sup, dissipation` per sample.
pub fn write_det_summary(path: &Path, traj: &DetTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "l2", "h10", "sup", "dissipation"])?;
    for s in &traj.samples {
        w.write_record([
            s.t.to_string(),
            s.v.l2_norm().to_string(),
            s.v.h10_norm().to_string(),
            s.v.sup_norm().to_string(),
            s.dissipation.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, node, x, V` snapshots.
pub fn write_stoch_snapshots(path: &Path, traj: &StochTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "node", "x", "V"])?;
    for s in &traj.samples {
        for j in 0..=traj.grid.cells() {
            w.write_record([
                s.t.to_string(),
                j.to_string(),
                traj.grid.node(j).to_string(),
                s.v.node_value(j).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Jump log `t, i, from, to` with `i` the lattice index of the site and
/// states by name.
pub fn write_jumps(path: &Path, traj: &StochTrajectory, kinetics: &ChannelKinetics) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "i", "from", "to"])?;
    let offset = (traj.channel_count() / 2) as i64;
    let names = kinetics.states();
    for j in &traj.jumps {
        w.write_record([
            j.time.to_string(),
            (j.channel as i64 - offset).to_string(),
            names[j.from].name.clone(),
            names[j.to].name.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, <state>…` series, one column per state.
pub fn write_series(path: &Path, times: &[f64], names: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (i, t) in times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(columns.iter().map(|c| c[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
