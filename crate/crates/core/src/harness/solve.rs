use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{execute, Algorithm, RunOutcome, RunRecord, RunSettings};
use crate::error::Result;
use crate::problem::{cnf_to_hubo, parse_dimacs};
use crate::trajectory::TableFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveArgs {
    pub algorithm: Algorithm,
    pub problem: PathBuf,
    pub settings: RunSettings,
    /// Directory for `record.json` and the trajectory table.
    pub out: Option<PathBuf>,
    pub format: TableFormat,
}

/// Runs one solver on a DIMACS file. Cap violations and parse errors are
/// returned as errors; no record is written for them.
pub fn solve(args: &SolveArgs) -> Result<(RunRecord, RunOutcome)> {
    let formula = parse_dimacs(&fs::read_to_string(&args.problem)?)?;
    let hubo = cnf_to_hubo(&formula);
    let out = execute(args.algorithm, &hubo, &args.settings)?;
    let mut record = RunRecord::new(args.algorithm, formula.n_vars(), formula.num_clauses(), &args.settings);
    record.source = Some(args.problem.display().to_string());
    record.fill(&out);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let name = format!("trajectory.{}", args.format.extension());
        out.trajectory.write_table(std::io::BufWriter::new(fs::File::create(dir.join(&name))?), args.format)?;
        record.trajectory_file = Some(name);
        fs::write(dir.join("record.json"), serde_json::to_string_pretty(&record)? + "\n")?;
    }
    Ok((record, out))
}
