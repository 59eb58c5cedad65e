//! Instance manifests: generated ensembles filtered by solve difficulty, or ingested DIMACS files.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{io, par_map, HarnessError};
use crate::cnf::{generate_random_ksat, parse_dimacs_str, Formula, GeneratorConfig};
use crate::rng::{derive_seed, SeededRng};
use crate::solver::{solve, NoObserver, SolverConfig, Status};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    Generated(GeneratorConfig),
    File { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub source: InstanceSource,
    pub sat: bool,
    /// Conflicts of the reference solve.
    pub reference_conflicts: u64,
}

impl InstanceRecord {
    pub fn load(&self) -> Result<Formula, HarnessError> {
        match &self.source {
            InstanceSource::Generated(g) => Ok(generate_random_ksat(g)?),
            InstanceSource::File { path } => Ok(parse_dimacs_str(&io::read_text(Path::new(path))?)?.formula),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub reference_solver: SolverConfig,
    /// Candidates solved before both label quotas were filled.
    pub candidates_examined: usize,
    pub instances: Vec<InstanceRecord>,
}

impl Manifest {
    pub fn count(&self, sat: bool) -> usize {
        self.instances.iter().filter(|i| i.sat == sat).count()
    }
}

/// Generator parameters of candidate `index`.
pub fn candidate(cfg: &ExperimentConfig, index: u64) -> GeneratorConfig {
    let e = &cfg.ensemble;
    let seed = derive_seed(cfg.seed, index);
    let mut rng = SeededRng::seed_from_u64(seed);
    let num_vars = rng.random_range(e.vars[0]..=e.vars[1]);
    let ratio = if e.ratio[0] < e.ratio[1] { rng.random_range(e.ratio[0]..e.ratio[1]) } else { e.ratio[0] };
    GeneratorConfig { num_vars, ratio, k: e.k, seed: derive_seed(seed, u64::MAX) }
}

/// Draws candidates in index order and keeps those whose reference solve needs more than
/// `min_conflicts` conflicts, until the sat and unsat quotas are met.
///
/// The result does not depend on `jobs`.
pub fn generate(cfg: &ExperimentConfig, jobs: usize, mut progress: impl FnMut(usize, usize, usize)) -> Result<Manifest, HarnessError> {
    let e = &cfg.ensemble;
    let reference = cfg.solver(&e.reference_solver)?.clone();
    let batch = (jobs.max(1) * 8).max(16);
    let mut instances = Vec::new();
    let (mut sat, mut unsat) = (0usize, 0usize);
    let mut examined = 0usize;
    while (sat < e.sat || unsat < e.unsat) && examined < e.max_candidates {
        let end = (examined + batch).min(e.max_candidates);
        let idx: Vec<u64> = (examined as u64..end as u64).collect();
        let solved = par_map(&idx, jobs, |&i| -> Result<_, HarnessError> {
            let g = candidate(cfg, i);
            let f = generate_random_ksat(&g)?;
            let out = solve(&f, &reference, &mut NoObserver)?;
            Ok((g, out.status, out.total_conflicts))
        });
        for (i, r) in idx.iter().zip(solved) {
            let (g, status, conflicts) = r?;
            examined = *i as usize + 1;
            if conflicts <= e.min_conflicts {
                continue;
            }
            let keep = match status {
                Status::Sat if sat < e.sat => {
                    sat += 1;
                    true
                }
                Status::Unsat if unsat < e.unsat => {
                    unsat += 1;
                    true
                }
                _ => false,
            };
            if keep {
                instances.push(InstanceRecord {
                    id: format!("{}-{:06}", e.name, i),
                    source: InstanceSource::Generated(g),
                    sat: status == Status::Sat,
                    reference_conflicts: conflicts,
                });
            }
            if sat >= e.sat && unsat >= e.unsat {
                break;
            }
        }
        progress(examined, sat, unsat);
    }
    if sat < e.sat || unsat < e.unsat {
        return Err(HarnessError::Data(format!(
            "ensemble `{}`: {sat}/{} sat and {unsat}/{} unsat after {examined} candidates",
            e.name, e.sat, e.unsat
        )));
    }
    Ok(Manifest { name: e.name.clone(), seed: cfg.seed, reference_solver: reference, candidates_examined: examined, instances })
}

/// Builds a manifest from every `.cnf` file in `dir`, labelled by a reference solve.
pub fn ingest_dir(dir: &Path, name: &str, reference: &SolverConfig, jobs: usize) -> Result<Manifest, HarnessError> {
    let entries = fs::read_dir(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cnf"))
        .collect();
    paths.sort();
    let records = par_map(&paths, jobs, |p| -> Result<InstanceRecord, HarnessError> {
        let formula = parse_dimacs_str(&io::read_text(p)?)?.formula;
        let out = solve(&formula, reference, &mut NoObserver)?;
        let sat = match out.status {
            Status::Sat => true,
            Status::Unsat => false,
            Status::BudgetExhausted => return Err(HarnessError::Data(format!("{}: reference solve hit its budget", p.display()))),
        };
        let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(InstanceRecord { id, source: InstanceSource::File { path: p.display().to_string() }, sat, reference_conflicts: out.total_conflicts })
    });
    let instances = records.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Manifest { name: name.to_string(), seed: 0, reference_solver: reference.clone(), candidates_examined: instances.len(), instances })
}
