use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{clauses_for_density, emit_dimacs, generate_random_ksat, parse_dimacs, CnfFormula};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenArgs {
    pub n: usize,
    pub k: usize,
    pub alpha: Option<f64>,
    pub m: Option<usize>,
    pub count: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl GenArgs {
    /// Clause count from `m`, or from `alpha * n` rounded down.
    pub fn clauses(&self) -> Result<usize> {
        resolve_clauses(self.n, self.alpha, self.m)
    }
}

pub(crate) fn resolve_clauses(n: usize, alpha: Option<f64>, m: Option<usize>) -> Result<usize> {
    match (alpha, m) {
        (_, Some(m)) => Ok(m),
        (Some(a), None) if a >= 0.0 && a.is_finite() => Ok(clauses_for_density(n, a)),
        (Some(a), None) => Err(Error::InvalidArgument(format!("invalid clause density {a}"))),
        (None, None) => Err(Error::InvalidArgument("one of alpha or m is required".into())),
    }
}

/// Sidecar written next to each generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub alpha: Option<f64>,
}

/// Writes `inst_XXXX.cnf` and `inst_XXXX.json` for instance seeds
/// `seed, seed + 1, ...`. Returns the CNF paths.
pub fn generate_family(args: &GenArgs) -> Result<Vec<PathBuf>> {
    if args.count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let m = args.clauses()?;
    fs::create_dir_all(&args.out)?;
    let mut paths = Vec::with_capacity(args.count);
    for index in 0..args.count {
        let seed = args.seed + index as u64;
        let formula = generate_random_ksat(args.n, args.k, m, seed)?;
        let stem = format!("inst_{index:04}");
        let cnf = args.out.join(format!("{stem}.cnf"));
        fs::write(&cnf, emit_dimacs(&formula))?;
        let meta = InstanceMeta { index, seed, n: args.n, k: args.k, m, alpha: args.alpha };
        fs::write(args.out.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)? + "\n")?;
        paths.push(cnf);
    }
    Ok(paths)
}

/// Every `*.cnf` under `dir`, sorted by file name.
pub fn load_family(dir: &Path) -> Result<Vec<(String, CnfFormula)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cnf"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no .cnf files in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p)?;
            let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((label, parse_dimacs(&text)?))
        })
        .collect()
}
