use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::Hypergraph;
use crate::layout::{project, ProjectorParams};
use crate::progress::Progress;
use crate::rng;
use crate::simeval::{pairwise_similarity_matrix, PairMeasure};

use super::generators::{GenModel, GenSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocConfig {
    pub per_model: usize,
    pub n: usize,
    pub m: usize,
    /// Edge cardinality of every generated graph.
    pub k: usize,
    pub p_rw: f64,
    pub seed: u64,
    pub measures: Vec<PairMeasure>,
    /// Label permutations averaged for the null AUC.
    pub null_shuffles: usize,
    /// Also project each similarity matrix to 2D.
    pub project: bool,
}

impl Default for RocConfig {
    fn default() -> Self {
        RocConfig {
            per_model: 25,
            n: 40,
            m: 50,
            k: 4,
            p_rw: 0.1,
            seed: 0,
            measures: vec![PairMeasure::CesSym, PairMeasure::Hnmi],
            null_shuffles: 20,
            project: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve for "score ≥ threshold ⇒ positive", one point per distinct
/// score (descending) plus the origin.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = class_counts(scores, positive)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < order.len() {
        let t = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == t {
            if positive[order[idx]] {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        curve.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(curve)
}

fn class_counts(scores: &[f64], positive: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != positive.len() {
        return Err(Error::Dimension(format!("{} scores vs {} labels", scores.len(), positive.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Parameter("NaN score".into()));
    }
    let pos = positive.iter().filter(|p| **p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Parameter("ROC needs both positive and negative pairs".into()));
    }
    Ok((pos, neg))
}

/// Trapezoidal area under the ROC curve; ties between a positive and a
/// negative count one half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let curve = roc_curve(scores, positive)?;
    Ok(curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum())
}

/// Upper-triangle pair scores with "same class" labels.
pub fn pair_scores(matrix: &[Vec<f64>], classes: &[usize]) -> (Vec<f64>, Vec<bool>) {
    let k = classes.len();
    let mut scores = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    let mut same = Vec::with_capacity(scores.capacity());
    for i in 0..k {
        for j in i + 1..k {
            scores.push(matrix[i][j]);
            same.push(classes[i] == classes[j]);
        }
    }
    (scores, same)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub model: GenModel,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRoc {
    pub measure: PairMeasure,
    pub auc: f64,
    /// Mean AUC over label permutations.
    pub null_auc: f64,
    pub curve: Vec<RocPoint>,
    pub matrix: Vec<Vec<f64>>,
    /// 2D coordinates per graph, in graph order; empty if not requested.
    pub projection: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub config: RocConfig,
    pub graphs: Vec<GraphInfo>,
    pub measures: Vec<MeasureRoc>,
}

impl RocResult {
    pub fn measure(&self, m: PairMeasure) -> Option<&MeasureRoc> {
        self.measures.iter().find(|r| r.measure == m)
    }

    /// `measure,threshold,fpr,tpr`; the origin's infinite threshold is written as `inf`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("measure,threshold,fpr,tpr\n");
        for r in &self.measures {
            for p in &r.curve {
                let _ = writeln!(out, "{},{},{},{}", r.measure.name(), p.threshold, p.fpr, p.tpr);
            }
        }
        out
    }

    /// `measure,graph,model,x,y`.
    pub fn projection_csv(&self) -> String {
        let mut out = String::from("measure,graph,model,x,y\n");
        for r in &self.measures {
            for (g, p) in r.projection.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", r.measure.name(), g, self.graphs[g].model.name(), p[0], p[1]);
            }
        }
        out
    }

    /// Writes `roc.csv`, `roc.json` and `projection.csv` into `dir`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("roc.csv"), self.curve_csv())?;
        std::fs::write(dir.join("roc.json"), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join("projection.csv"), self.projection_csv())?;
        Ok(())
    }
}

pub fn generate_roc_graphs(config: &RocConfig) -> Result<(Vec<Hypergraph>, Vec<GraphInfo>)> {
    let mut graphs = Vec::new();
    let mut info = Vec::new();
    for (mi, model) in GenModel::ALL.into_iter().enumerate() {
        for g in 0..config.per_model {
            let seed = rng::derive(&[config.seed, mi as u64, g as u64]);
            let spec = GenSpec {
                p_rw: config.p_rw,
                ..GenSpec::new(model, config.n, config.m, config.k, seed)
            };
            graphs.push(spec.generate()?);
            info.push(GraphInfo { model, seed });
        }
    }
    Ok((graphs, info))
}

pub fn run_roc_bench(config: &RocConfig) -> Result<RocResult> {
    run_roc_bench_with(config, &Progress::new())
}

/// Generates `per_model` graphs for each generator, scores every pair with
/// each measure and reports how well the scores separate same-model pairs
/// from cross-model pairs.
pub fn run_roc_bench_with(config: &RocConfig, progress: &Progress) -> Result<RocResult> {
    if config.per_model < 2 {
        return Err(Error::Parameter("need at least two graphs per model".into()));
    }
    let (graphs, info) = generate_roc_graphs(config)?;
    let classes: Vec<usize> = info
        .iter()
        .map(|g| GenModel::ALL.iter().position(|m| *m == g.model).expect("known model"))
        .collect();
    progress.set_total(config.measures.len() as u64);
    let mut measures = Vec::new();
    for &measure in &config.measures {
        if progress.is_cancelled() {
            return Err(Error::Cancelled);
        }
        let matrix = pairwise_similarity_matrix(&graphs, measure)?;
        let (scores, same) = pair_scores(&matrix, &classes);
        let curve = roc_curve(&scores, &same)?;
        let area = auc(&scores, &same)?;
        let mut shuffle_rng = rng::stream(config.seed, 1);
        let mut null_total = 0.0;
        for _ in 0..config.null_shuffles {
            let mut perm = classes.clone();
            perm.shuffle(&mut shuffle_rng);
            let (s, l) = pair_scores(&matrix, &perm);
            null_total += auc(&s, &l)?;
        }
        let null_auc = if config.null_shuffles > 0 {
            null_total / config.null_shuffles as f64
        } else {
            f64::NAN
        };
        let projection = if config.project {
            let k = matrix.len();
            let rows = Array2::from_shape_fn((k, k), |(i, j)| matrix[i][j]);
            project(rows.view(), config.seed, &ProjectorParams::default())
        } else {
            Vec::new()
        };
        measures.push(MeasureRoc {
            measure,
            auc: area,
            null_auc,
            curve,
            matrix,
            projection,
        });
        progress.advance();
    }
    Ok(RocResult {
        config: config.clone(),
        graphs: info,
        measures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mann_whitney(scores: &[f64], positive: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &pi) in positive.iter().enumerate() {
            for (j, &pj) in positive.iter().enumerate() {
                if pi && !pj {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_separation() {
        let classes = [0, 0, 1, 1, 2];
        let k = classes.len();
        let matrix: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if classes[i] == classes[j] { 1.0 } else { 0.0 }).collect())
            .collect();
        let (s, l) = pair_scores(&matrix, &classes);
        assert_eq!(auc(&s, &l).unwrap(), 1.0);
        let flipped: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
        assert_eq!(auc(&flipped, &l).unwrap(), 0.0);
    }

    #[test]
    fn matches_rank_statistic_with_ties() {
        let mut r = rng::seeded(3);
        use rand::RngExt;
        for _ in 0..50 {
            let len = r.random_range(4..40);
            let scores: Vec<f64> = (0..len).map(|_| (r.random_range(0..6) as f64) / 5.0).collect();
            let mut labels: Vec<bool> = (0..len).map(|_| r.random::<bool>()).collect();
            labels[0] = true;
            labels[1] = false;
            let a = auc(&scores, &labels).unwrap();
            assert!((a - mann_whitney(&scores, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_shape() {
        let curve = roc_curve(&[0.9, 0.8, 0.8, 0.1], &[true, false, true, false]).unwrap();
        assert_eq!(curve.len(), 4);
        assert_eq!((curve[1].fpr, curve[1].tpr), (0.0, 0.5));
        assert_eq!((curve[2].fpr, curve[2].tpr), (0.5, 1.0));
        assert_eq!((curve[3].fpr, curve[3].tpr), (1.0, 1.0));
        assert!(roc_curve(&[0.1], &[true]).is_err());
    }

    #[test]
    fn small_bench_runs() {
        let cfg = RocConfig {
            per_model: 4,
            n: 20,
            m: 10,
            null_shuffles: 4,
            ..Default::default()
        };
        let a = run_roc_bench(&cfg).unwrap();
        assert_eq!(a.graphs.len(), 12);
        for m in &a.measures {
            assert_eq!(m.matrix.len(), 12);
            assert_eq!(m.projection.len(), 12);
            assert!((0.0..=1.0).contains(&m.auc));
        }
        assert_eq!(a, run_roc_bench(&cfg).unwrap());
        assert!(a.curve_csv().starts_with("measure,threshold,fpr,tpr\nces_sym,inf,0,0\n"));
    }
}
