//! Runs every analysis a configuration asks for, from a manifest.

use std::collections::BTreeMap;

use super::collect::{collect, features_csv, runs_csv, CollectOptions, RunSet};
use super::config::ExperimentConfig;
use super::curves::{curves, CurveReport};
use super::dataset::Manifest;
use super::evaluate::{evaluate, ErrorFactorReport};
use super::race::{chain, portfolio, ChainReport, PortfolioReport};
use super::HarnessError;
use crate::features::WindowConfig;
use crate::rng::derive_seed;

const EVALUATE_STREAM: u64 = 101;
const PORTFOLIO_STREAM: u64 = 102;
const CHAIN_STREAM: u64 = 103;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResults {
    pub runs: BTreeMap<String, RunSet>,
    pub error_factors: Option<ErrorFactorReport>,
    pub curves: Option<CurveReport>,
    pub portfolio: Option<PortfolioReport>,
    pub chains: Vec<ChainReport>,
}

/// What each solver's collection must record.
pub fn collection_plan(cfg: &ExperimentConfig) -> BTreeMap<String, CollectOptions> {
    let mut plan: BTreeMap<String, CollectOptions> = BTreeMap::new();
    let mut need = |name: &str, restart: Option<u32>, streams: bool, window: Option<WindowConfig>| {
        let o = plan.entry(name.to_string()).or_insert(CollectOptions { last_query_restart: None, record_streams: false, ..CollectOptions::default() });
        o.last_query_restart = o.last_query_restart.max(restart);
        o.record_streams |= streams;
        if let Some(w) = window.filter(|w| !o.fixed_windows.contains(w)) {
            o.fixed_windows.push(w);
        }
    };
    if let Some(ev) = &cfg.evaluate {
        need(&ev.solver, None, true, Some(ev.window));
    }
    if let Some(r) = &cfg.race {
        need(&r.a, Some(r.query_restart_a), false, None);
        need(&r.b, Some(r.query_restart_b), false, None);
    }
    for c in &cfg.chains {
        need(&c.solver, Some(c.final_restart), false, None);
    }
    plan
}

pub fn run_experiment(cfg: &ExperimentConfig, manifest: &Manifest, jobs: usize, mut log: impl FnMut(&str)) -> Result<ExperimentResults, HarnessError> {
    let mut runs = BTreeMap::new();
    for (name, opts) in collection_plan(cfg) {
        log(&format!("collecting {} runs of `{name}`", manifest.instances.len()));
        runs.insert(name.clone(), collect(manifest, &name, cfg.solver(&name)?, &opts, jobs)?);
    }
    let mut error_factors = None;
    let mut curve_report = None;
    if let Some(ev) = &cfg.evaluate {
        log("evaluating estimators");
        let set = &runs[&ev.solver];
        error_factors = Some(evaluate(set, ev.window, &cfg.train, derive_seed(cfg.seed, EVALUATE_STREAM), &cfg.factors)?);
        curve_report = Some(curves(set));
    }
    let portfolio_report = match &cfg.race {
        Some(r) => {
            log("replaying portfolio races");
            Some(portfolio(&runs[&r.a], r.query_restart_a, &runs[&r.b], r.query_restart_b, &cfg.train, derive_seed(cfg.seed, PORTFOLIO_STREAM))?)
        }
        None => None,
    };
    let mut chains = Vec::new();
    for c in &cfg.chains {
        log(&format!("chaining `{}` to restart {}", c.solver, c.final_restart));
        chains.push(chain(&runs[&c.solver], c.final_restart, &cfg.train, derive_seed(cfg.seed, CHAIN_STREAM), &cfg.factors)?);
    }
    Ok(ExperimentResults { runs, error_factors, curves: curve_report, portfolio: portfolio_report, chains })
}

impl ExperimentResults {
    /// Report files by name.
    pub fn files(&self) -> Result<BTreeMap<String, String>, HarnessError> {
        let mut out = BTreeMap::new();
        let mut summary = String::new();
        for (name, set) in &self.runs {
            out.insert(format!("runs-{name}.csv"), runs_csv(set)?);
            out.insert(format!("features-{name}.csv"), features_csv(set)?);
        }
        if let Some(ef) = &self.error_factors {
            out.insert("error_factors.csv".into(), ef.to_csv()?);
            out.insert("predictions.csv".into(), ef.predictions_csv()?);
            summary += &ef.to_table();
            summary.push('\n');
        }
        if let Some(c) = &self.curves {
            out.insert("curves.csv".into(), c.to_csv()?);
            summary += &c.to_table();
            summary.push('\n');
        }
        if let Some(p) = &self.portfolio {
            out.insert("portfolio.csv".into(), p.to_csv()?);
            out.insert("portfolio_instances.csv".into(), p.instances_csv()?);
            summary += &p.to_table();
            summary.push('\n');
        }
        for c in &self.chains {
            out.insert(format!("chain-{}-r{}.csv", c.solver, c.final_restart), c.to_csv()?);
        }
        if !self.chains.is_empty() {
            summary += "Restart chains\n";
            for c in &self.chains {
                summary += &c.to_csv()?;
            }
        }
        out.insert("summary.txt".into(), summary);
        Ok(out)
    }
}
