//! CSV and JSON writers. Floats use the campaign record format (9 significant digits).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use aerocap::dynamics::TraceRow;
use aerocap::guidance::GuidanceLogRow;
use aerocap::montecarlo::fmt_f64;
use aerocap::optimal_control::{Branch, SwitchingEval};
use anyhow::{Context, Result};
use serde::Serialize;

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_csv<T>(path: &Path, header: &[&str], rows: &[T], fields: impl Fn(&T) -> Vec<String>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let header = ["t", "h", "V", "gamma_deg", "alpha_deg", "sigma_deg", "rho", "L", "D", "phase"];
    write_csv(path, &header, rows, |r| {
        let mut v: Vec<String> = [r.t, r.h, r.v, r.gamma_deg, r.alpha_deg, r.sigma_deg, r.rho, r.lift, r.drag]
            .into_iter()
            .map(fmt_f64)
            .collect();
        v.push(r.phase.to_string());
        v
    })
}

pub fn write_guidance_log(path: &Path, rows: &[GuidanceLogRow]) -> Result<()> {
    let header =
        ["t", "phase", "ts1", "ts2", "ts3", "alpha_cmd", "sigma_cmd", "V_pred", "residual", "density_ratio_estimate"];
    write_csv(path, &header, rows, |r| {
        let mut v = vec![fmt_f64(r.t), r.phase.to_string()];
        v.extend(
            [r.ts1, r.ts2, r.ts3, r.alpha_cmd, r.sigma_cmd, r.v_pred, r.residual, r.density_ratio_estimate]
                .into_iter()
                .map(fmt_f64),
        );
        v
    })
}

pub const SWITCHING_COLUMNS: [&str; 12] = [
    "t",
    "H_up",
    "H_down",
    "lambda_gamma",
    "A_up",
    "A_down",
    "branch",
    "sigma_star",
    "alpha_star_linear",
    "alpha_star_quadratic",
    "alpha_supplied",
    "u1_supplied",
];

pub fn write_switching(path: &Path, rows: &[SwitchingEval]) -> Result<()> {
    write_csv(path, &SWITCHING_COLUMNS, rows, |r| {
        let branch = match r.branch {
            Branch::Up => "up",
            Branch::Down => "down",
        };
        let mut v: Vec<String> =
            [r.t, r.h_up, r.h_down, r.lambda_gamma, r.a_up, r.a_down].into_iter().map(fmt_f64).collect();
        v.push(branch.to_string());
        v.extend(
            [r.sigma_star, r.alpha_star_linear, r.alpha_star_quadratic, r.alpha_supplied, r.u1_supplied]
                .into_iter()
                .map(fmt_f64),
        );
        v
    })
}
