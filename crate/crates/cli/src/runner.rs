//! Single runs and attack x defense sweeps, with their CSV outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fedpoison_core::federation::{run_experiment_with, ExperimentConfig, RoundRecord, Selection};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{config_hash, defense_kind, RunConfig};

pub const RUN_HEADER: &str =
    "round,test_auc,defense,attack,selected_or_weights,threshold,achieved_sq_dist,sf,fallback_used,wallclock_s";
pub const SUMMARY_HEADER: &str = "attack,defense,median_auc,min_auc,max_auc,seeds";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub dump_params: bool,
    /// Fill the `wallclock_s` column. Off by default so reruns stay
    /// byte-identical.
    pub record_wallclock: bool,
}

/// One CSV row; `wallclock` decides whether the timing column is filled.
pub fn format_row(r: &RoundRecord, wallclock: bool) -> String {
    let selection = match &r.selection {
        Selection::Client(i) => i.to_string(),
        Selection::Weights(w) => w.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
    };
    let (threshold, achieved, sf, fallback) = match &r.diagnostics {
        Some(d) => (
            d.threshold.to_string(),
            d.achieved_sq_dist.to_string(),
            d.sf.map(|v| v.to_string()).unwrap_or_default(),
            d.fallback_used.to_string(),
        ),
        None => Default::default(),
    };
    let clock = if wallclock { r.wallclock_s.to_string() } else { String::new() };
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.round, r.test_auc, r.defense, r.attack, selection, threshold, achieved, sf, fallback, clock
    )
}

pub fn run_csv_path(out_dir: &Path, hash: &str, seed: u64) -> PathBuf {
    out_dir.join(format!("run_{hash}_{seed}.csv"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub params_path: Option<PathBuf>,
    pub final_auc: f64,
}

/// Run one experiment with `seed` and write its per-round CSV.
pub fn cmd_run(cfg: &ExperimentConfig, seed: u64, out_dir: &Path, opts: RunOptions) -> Result<RunOutcome> {
    let cfg = ExperimentConfig { seed, ..cfg.clone() };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let hash = config_hash(&cfg);
    let csv_path = run_csv_path(out_dir, &hash, seed);

    let mut csv = String::new();
    writeln!(csv, "{RUN_HEADER}").unwrap();
    let (records, params) = run_experiment_with(&cfg, |r| {
        info!("round {:>3}  auc {:.4}", r.round, r.test_auc);
        writeln!(csv, "{}", format_row(r, opts.record_wallclock)).unwrap();
        Ok(())
    })
    .with_context(|| format!("run {hash} seed {seed} failed"))?;
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;

    let params_path = if opts.dump_params {
        let p = out_dir.join(format!("run_{hash}_{seed}.params.txt"));
        fs::write(&p, params.to_text()).with_context(|| format!("writing {}", p.display()))?;
        Some(p)
    } else {
        None
    };
    let final_auc = records.last().map(|r| r.test_auc).context("run produced no rounds")?;
    Ok(RunOutcome { csv_path, params_path, final_auc })
}

/// Description of a sweep's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub run_csvs: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub attack: String,
    pub defense: String,
    /// `(median, min, max)`, or `None` if any seed failed.
    pub stats: Option<(f64, f64, f64)>,
    pub seeds: Vec<u64>,
}

impl SummaryRow {
    pub fn to_csv(&self) -> String {
        let seeds = self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";");
        match self.stats {
            Some((med, lo, hi)) => format!("{},{},{med},{lo},{hi},{seeds}", self.attack, self.defense),
            None => format!("{},{},error,error,error,{seeds}", self.attack, self.defense),
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub struct SweepSpec<'a> {
    pub attacks: &'a [String],
    pub defenses: &'a [String],
    pub seeds: &'a [u64],
    pub jobs: usize,
    pub record_wallclock: bool,
}

/// Run every (attack, defense, seed) cell and write one CSV per run plus a
/// summary. A failing run is logged and reported as `error`.
pub fn cmd_sweep(rc: &RunConfig, spec: &SweepSpec<'_>, out_dir: &Path) -> Result<(RunManifest, Vec<SummaryRow>)> {
    anyhow::ensure!(!spec.attacks.is_empty(), "--attacks is empty");
    anyhow::ensure!(!spec.defenses.is_empty(), "--defenses is empty");
    anyhow::ensure!(!spec.seeds.is_empty(), "--seeds is empty");
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    for a in spec.attacks {
        rc.attack_params.attack(a)?;
    }
    for d in spec.defenses {
        defense_kind(d)?;
    }
    // a cell whose settings fail validation becomes an `error` row
    let mut cells = Vec::new();
    for attack in spec.attacks {
        for defense in spec.defenses {
            let cfg = rc.with_matrix_cell(attack, defense).map_err(anyhow::Error::from);
            cells.push((attack.clone(), defense.clone(), cfg));
        }
    }
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| spec.seeds.iter().map(move |&s| (c, s))).collect();
    let opts = RunOptions { dump_params: false, record_wallclock: spec.record_wallclock };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.jobs.max(1)).build()?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, seed)| match &cells[c].2 {
                Ok(cfg) => cmd_run(cfg, seed, out_dir, opts),
                Err(e) => Err(anyhow::anyhow!("{e}")),
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(cells.len());
    let mut run_csvs = Vec::new();
    for (c, (attack, defense, _)) in cells.iter().enumerate() {
        let mut aucs = Vec::new();
        let mut failed = false;
        for ((cell, seed), res) in jobs.iter().zip(&results) {
            if *cell != c {
                continue;
            }
            match res {
                Ok(out) => {
                    aucs.push(out.final_auc);
                    run_csvs.push(out.csv_path.clone());
                }
                Err(e) => {
                    warn!("{attack}/{defense} seed {seed}: {e:#}");
                    failed = true;
                }
            }
        }
        let stats = (!failed).then(|| {
            let lo = aucs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (median(&aucs), lo, hi)
        });
        rows.push(SummaryRow { attack: attack.clone(), defense: defense.clone(), stats, seeds: spec.seeds.to_vec() });
    }

    let hash = config_hash(&rc.experiment);
    let summary_path = out_dir.join(format!("summary_{hash}.csv"));
    let mut text = format!("{SUMMARY_HEADER}\n");
    for row in &rows {
        writeln!(text, "{}", row.to_csv()).unwrap();
    }
    fs::write(&summary_path, text).with_context(|| format!("writing {}", summary_path.display()))?;
    let manifest = RunManifest {
        config_hash: hash,
        seeds: spec.seeds.to_vec(),
        out_dir: out_dir.to_path_buf(),
        run_csvs,
        summary_path,
    };
    Ok((manifest, rows))
}
