//! Hand a model to an external solver process and read its solution back.
//!
//! The solver is any program that accepts the model path and a solution path
//! and writes `name value` lines (a leading `status` line is optional).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mip::check::{check_assignment, ResidualReport};
use crate::mip::lp::{write_lp, write_mps};
use crate::mip::model::MipModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    Lp,
    Mps,
}

/// `args` may contain `{model}` and `{solution}` placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverCommand {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub format: ModelFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub status: Option<String>,
    pub values: HashMap<String, f64>,
    /// Residuals of the returned point against the model.
    pub report: ResidualReport,
}

pub fn parse_solution(text: &str) -> Result<(Option<String>, HashMap<String, f64>)> {
    let mut status = None;
    let mut values = HashMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line
            .split(|c: char| c.is_whitespace() || c == '=')
            .filter(|s| !s.is_empty());
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: ln + 1,
                detail: format!("expected `name value`, got {line:?}"),
            });
        };
        if name == "status" {
            status = Some(value.to_string());
            continue;
        }
        let v = value.parse::<f64>().map_err(|_| Error::Parse {
            line: ln + 1,
            detail: format!("bad value {value:?}"),
        })?;
        values.insert(name.to_string(), v);
    }
    Ok((status, values))
}

/// Write the model into `workdir`, run the solver and check its answer.
pub fn solve_external(
    model: &MipModel,
    cmd: &SolverCommand,
    workdir: &Path,
) -> Result<SolverOutcome> {
    std::fs::create_dir_all(workdir)?;
    let (file, text) = match cmd.format {
        ModelFormat::Lp => ("model.lp", write_lp(model)),
        ModelFormat::Mps => ("model.mps", write_mps(model)),
    };
    let model_path = workdir.join(file);
    let solution_path = workdir.join("solution.txt");
    std::fs::write(&model_path, text)?;
    if solution_path.exists() {
        std::fs::remove_file(&solution_path)?;
    }
    let args: Vec<String> = cmd
        .args
        .iter()
        .map(|a| {
            a.replace("{model}", &model_path.to_string_lossy())
                .replace("{solution}", &solution_path.to_string_lossy())
        })
        .collect();
    let output = Command::new(&cmd.program)
        .args(&args)
        .output()
        .map_err(|e| Error::Solver(format!("cannot start {}: {e}", cmd.program.display())))?;
    if !output.status.success() {
        return Err(Error::Solver(format!(
            "{} exited with {}: {}",
            cmd.program.display(),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&solution_path).map_err(|e| {
        Error::Solver(format!(
            "no solution file at {}: {e}",
            solution_path.display()
        ))
    })?;
    let (status, values) = parse_solution(&text)?;
    let report = check_assignment(model, &values)?;
    Ok(SolverOutcome {
        status,
        values,
        report,
    })
}
