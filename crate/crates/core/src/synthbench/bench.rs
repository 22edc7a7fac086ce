use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::Hypergraph;
use crate::progress::Progress;
use crate::rng;
use crate::simeval::{ces, ces_weighted, hnmi};

use super::generators::{gen_er, gen_imbalanced, GenModel, GenSpec};
use super::perturb::{perturb_oversegment, perturb_replace, perturb_replace_among, perturb_rewire};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    Replace,
    Rewire,
    Overseg,
    /// Replacement restricted to the 10-vertex edges of an imbalanced graph.
    ImbalancedSmall,
    /// Replacement restricted to the 100-vertex edges of an imbalanced graph.
    ImbalancedLarge,
}

impl PerturbKind {
    pub fn name(self) -> &'static str {
        match self {
            PerturbKind::Replace => "replace",
            PerturbKind::Rewire => "rewire",
            PerturbKind::Overseg => "overseg",
            PerturbKind::ImbalancedSmall => "imbalanced_small",
            PerturbKind::ImbalancedLarge => "imbalanced_large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Ces,
    CesWeighted,
    Hnmi,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Ces, Measure::CesWeighted, Measure::Hnmi];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Ces => "ces",
            Measure::CesWeighted => "ces_weighted",
            Measure::Hnmi => "hnmi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub kind: PerturbKind,
    /// Perturbation fractions, or split factors `r` for oversegmentation.
    pub levels: Vec<f64>,
    pub reps: usize,
    pub n: usize,
    pub m: usize,
    /// Edge cardinality of the ground truth (unused by the imbalanced kinds).
    pub k: usize,
    pub seed: u64,
    pub measures: Vec<Measure>,
}

pub fn fraction_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl BenchConfig {
    /// Defaults: 50 repetitions of 99-vertex, 50-edge ER ground truths with
    /// cardinality 4. Oversegmentation uses cardinality 16 so every split
    /// factor up to 8 applies; the imbalanced kinds use 500 vertices.
    pub fn defaults(kind: PerturbKind) -> Self {
        let (levels, n, k) = match kind {
            PerturbKind::Replace | PerturbKind::Rewire => (fraction_grid(), 99, 4),
            PerturbKind::Overseg => (vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0], 99, 16),
            PerturbKind::ImbalancedSmall | PerturbKind::ImbalancedLarge => (fraction_grid(), 500, 0),
        };
        BenchConfig {
            kind,
            levels,
            reps: 50,
            n,
            m: 50,
            k,
            seed: 0,
            measures: Measure::ALL.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.reps == 0 {
            return Err(Error::Parameter("bench needs at least one level and one repetition".into()));
        }
        if self.measures.is_empty() {
            return Err(Error::Parameter("bench needs at least one measure".into()));
        }
        if self.kind == PerturbKind::Overseg {
            if let Some(bad) = self.levels.iter().find(|r| **r < 1.0 || r.fract() != 0.0) {
                return Err(Error::Parameter(format!("split factor {bad} must be a positive integer")));
            }
        } else if let Some(bad) = self.levels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Parameter(format!("perturbation level {bad} outside [0,1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub level: f64,
    pub rep: usize,
    /// Seed of this repetition's ground truth.
    pub gt_seed: u64,
    /// Seed of the perturbation at this level.
    pub perturb_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ces: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ces_weighted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hnmi: Option<f64>,
}

impl BenchRecord {
    pub fn value(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::Ces => self.ces,
            Measure::CesWeighted => self.ces_weighted,
            Measure::Hnmi => self.hnmi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMeans {
    pub level: f64,
    pub ces: Option<f64>,
    pub ces_weighted: Option<f64>,
    pub hnmi: Option<f64>,
}

impl LevelMeans {
    pub fn value(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::Ces => self.ces,
            Measure::CesWeighted => self.ces_weighted,
            Measure::Hnmi => self.hnmi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    /// Sorted by level, then repetition.
    pub runs: Vec<BenchRecord>,
    /// False when the run was cancelled and only some repetitions finished.
    pub complete: bool,
}

impl BenchResult {
    pub fn level_means(&self) -> Vec<LevelMeans> {
        let mut levels: Vec<f64> = self.runs.iter().map(|r| r.level).collect();
        levels.dedup();
        levels
            .into_iter()
            .map(|level| {
                let rows: Vec<&BenchRecord> = self.runs.iter().filter(|r| r.level == level).collect();
                let mean = |m: Measure| -> Option<f64> {
                    let vals: Vec<f64> = rows.iter().filter_map(|r| r.value(m)).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                };
                LevelMeans {
                    level,
                    ces: mean(Measure::Ces),
                    ces_weighted: mean(Measure::CesWeighted),
                    hnmi: mean(Measure::Hnmi),
                }
            })
            .collect()
    }

    /// Long format: `kind,level,rep,measure,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,level,rep,measure,value\n");
        for r in &self.runs {
            for m in &self.config.measures {
                if let Some(v) = r.value(*m) {
                    let _ = writeln!(out, "{},{},{},{},{}", self.config.kind.name(), r.level, r.rep, m.name(), v);
                }
            }
        }
        out
    }

    /// Per-level means as CSV, for plotting.
    pub fn means_csv(&self) -> String {
        let mut out = String::from("level,measure,mean\n");
        for lm in self.level_means() {
            for m in &self.config.measures {
                if let Some(v) = lm.value(*m) {
                    let _ = writeln!(out, "{},{},{}", lm.level, m.name(), v);
                }
            }
        }
        out
    }

    /// Writes `bench.csv`, `bench.json` and `means.csv` into `dir`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench.csv"), self.to_csv())?;
        std::fs::write(dir.join("bench.json"), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join("means.csv"), self.means_csv())?;
        Ok(())
    }
}

fn ground_truth(cfg: &BenchConfig, seed: u64) -> Result<Hypergraph> {
    match cfg.kind {
        PerturbKind::ImbalancedSmall | PerturbKind::ImbalancedLarge => gen_imbalanced(cfg.n, cfg.m, seed),
        _ => gen_er(&GenSpec::new(GenModel::Er, cfg.n, cfg.m, cfg.k, seed)),
    }
}

fn perturb(cfg: &BenchConfig, gt: &Hypergraph, level: f64, seed: u64) -> Result<Hypergraph> {
    match cfg.kind {
        PerturbKind::Replace => perturb_replace(gt, level, seed),
        PerturbKind::Rewire => Ok(perturb_rewire(gt, level, seed)?.graph),
        PerturbKind::Overseg => perturb_oversegment(gt, level as usize, seed),
        PerturbKind::ImbalancedSmall | PerturbKind::ImbalancedLarge => {
            let want_large = cfg.kind == PerturbKind::ImbalancedLarge;
            let eligible: Vec<usize> = gt
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| (e.len() == 100) == want_large)
                .map(|(j, _)| j)
                .collect();
            perturb_replace_among(gt, &eligible, level, seed)
        }
    }
}

fn score(cfg: &BenchConfig, gt: &Hypergraph, gen: &Hypergraph, rec: &mut BenchRecord) -> Result<()> {
    for m in &cfg.measures {
        match m {
            Measure::Ces => rec.ces = Some(ces(gt, gen)?.ces),
            Measure::CesWeighted => rec.ces_weighted = Some(ces_weighted(gt, gen)?.ces),
            Measure::Hnmi => rec.hnmi = Some(hnmi(gt, gen)?),
        }
    }
    Ok(())
}

fn run_rep(cfg: &BenchConfig, levels: &[f64], rep: usize) -> Result<Vec<BenchRecord>> {
    let gt_seed = rng::derive(&[cfg.seed, rep as u64, 0]);
    let gt = ground_truth(cfg, gt_seed)?;
    levels
        .iter()
        .enumerate()
        .map(|(li, &level)| {
            let perturb_seed = rng::derive(&[cfg.seed, rep as u64, li as u64 + 1]);
            let gen = perturb(cfg, &gt, level, perturb_seed)?;
            let mut rec = BenchRecord {
                level,
                rep,
                gt_seed,
                perturb_seed,
                ces: None,
                ces_weighted: None,
                hnmi: None,
            };
            score(cfg, &gt, &gen, &mut rec)?;
            Ok(rec)
        })
        .collect()
}

pub fn run_perturbation_bench(config: &BenchConfig) -> Result<BenchResult> {
    run_perturbation_bench_with(config, &Progress::new())
}

/// Runs every repetition (in parallel) against its own unperturbed ground
/// truth. Cancellation stops scheduling new repetitions and returns the
/// finished ones with `complete = false`.
pub fn run_perturbation_bench_with(config: &BenchConfig, progress: &Progress) -> Result<BenchResult> {
    config.validate()?;
    let mut levels = config.levels.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    progress.set_total(config.reps as u64);
    let per_rep: Vec<Option<Vec<BenchRecord>>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            if progress.is_cancelled() {
                return Ok(None);
            }
            let recs = run_rep(config, &levels, rep)?;
            progress.advance();
            Ok(Some(recs))
        })
        .collect::<Result<_>>()?;
    let complete = per_rep.iter().all(Option::is_some);
    let mut runs: Vec<BenchRecord> = per_rep.into_iter().flatten().flatten().collect();
    runs.sort_by(|a, b| a.level.total_cmp(&b.level).then(a.rep.cmp(&b.rep)));
    Ok(BenchResult {
        config: BenchConfig { levels, ..config.clone() },
        runs,
        complete,
    })
}
