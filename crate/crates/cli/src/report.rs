//! Report emission. Every JSON report embeds the convention record and
//! the evaluation parameters so archived output is self-describing;
//! output is deterministic for a fixed config and seed except for the
//! timestamp field.

use crate::error::CliError;
use bachex_core::{convention_record, ConventionRecord};
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub timestamp: u64,
    pub convention: ConventionRecord,
    pub order: usize,
    pub tol: f64,
    pub seed: u64,
    pub pass: bool,
    pub results: serde_json::Value,
}

impl Report {
    pub fn new(
        command: &str,
        order: usize,
        tol: f64,
        seed: u64,
        pass: bool,
        results: serde_json::Value,
    ) -> Report {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            command: command.to_string(),
            timestamp,
            convention: convention_record(),
            order,
            tol,
            seed,
            pass,
            results,
        }
    }

    pub fn emit(&self, out: Option<&Path>, name: &str) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Numerical(format!("serialize: {e}")))?;
        match out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join(format!("{name}.json")), text)?;
            }
            None => println!("{text}"),
        }
        Ok(())
    }
}

/// Fixed column order for invariant sweeps.
pub const SWEEP_HEADER: &str = "x1,x2,y1,y2,tau,normRho2,normR2,beta1,beta2,flags";

pub struct SweepRow {
    pub point: [f64; 4],
    pub tau: f64,
    pub norm_rho2: f64,
    pub norm_r2: f64,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub flags: Vec<String>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.12e},{:.12e},{:.12e},{},{},{}\n",
            r.point[0],
            r.point[1],
            r.point[2],
            r.point[3],
            r.tau,
            r.norm_rho2,
            r.norm_r2,
            opt(r.beta1),
            opt(r.beta2),
            r.flags.join(";"),
        ));
    }
    s
}

pub fn emit_text(text: &str, out: Option<&Path>, name: &str) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
