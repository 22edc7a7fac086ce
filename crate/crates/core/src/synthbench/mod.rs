//! Synthetic hypergraph generators, perturbations and the benchmarks that
//! compare similarity measures on them.

mod bench;
mod generators;
mod perturb;
mod roc;

pub use bench::{
    fraction_grid, run_perturbation_bench, run_perturbation_bench_with, BenchConfig, BenchRecord, BenchResult,
    LevelMeans, Measure, PerturbKind,
};
pub use generators::{gen_er, gen_imbalanced, gen_sf, gen_ws, GenModel, GenSpec};
pub use perturb::{perturb_oversegment, perturb_replace, perturb_replace_among, perturb_rewire, RewireOutcome};
pub use roc::{
    auc, generate_roc_graphs, pair_scores, roc_curve, run_roc_bench, run_roc_bench_with, GraphInfo, MeasureRoc,
    RocConfig, RocPoint, RocResult,
};
