//! The experiment grid: for every (order, operating point, lambda, subset)
//! cell, order the frames, run the tracker and evaluate against ground
//! truth; then compare each lambda against the lambda = 0 baseline with a
//! paired t-test over the shared subsets.

use std::collections::{BTreeMap, HashSet};

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{GateConfig, DEFAULT_POS_GATE};
use crate::error::{Error, Result};
use crate::io; // record conversion lives with the file formats
use crate::metrics::{
    evaluate, paired_t_test, significance_stars, MetricReport, SimilarityConfig,
};
use crate::simgen::{
    covering_subsets, order_frames, render_scene, rng, FrameOrder, OperatingPoint,
    OperatingPointName, RenderedFrame, Scene, SceneSpec,
};
use crate::tracker::{
    reindex_frames, remap_trajectory_frames, run_sequence, TrackerConfig, DEFAULT_MEAS_VAR,
    DEFAULT_PROCESS_VAR,
};
use crate::trajectory::TrajectorySet;
use crate::types::Detection;

/// Grid specification. The scene is embedded so one file describes a whole
/// reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub scene: SceneSpec,
    pub lambda_grid: Vec<f64>,
    pub orders: Vec<FrameOrder>,
    pub operating_points: Vec<OperatingPointName>,
    pub n_subsets: usize,
    pub subset_size: usize,
    /// Experiment-level seed driving subset selection, shuffles and the
    /// validation scene for gate calibration.
    pub seed: u64,
    pub pos_gate: f64,
    /// Feature gate; when absent it is calibrated from a validation scene.
    pub feat_gate: Option<f64>,
    /// Isotropic default measurement sigma, meters.
    pub sigma_meas: f64,
    /// Isotropic process sigma per step, meters.
    pub sigma_process: f64,
    pub feature_cap: Option<usize>,
    pub d_max: f64,
    pub match_threshold: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            lambda_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            orders: vec![FrameOrder::Sequential, FrameOrder::Random],
            operating_points: vec![OperatingPointName::Mid],
            n_subsets: 5,
            subset_size: 80,
            seed: 7,
            pos_gate: DEFAULT_POS_GATE,
            feat_gate: None,
            sigma_meas: DEFAULT_MEAS_VAR.sqrt(),
            sigma_process: DEFAULT_PROCESS_VAR.sqrt(),
            feature_cap: None,
            d_max: 0.05,
            match_threshold: 0.5,
        }
    }
}

impl ExperimentSpec {
    /// Validates and normalizes the grid: lambdas are deduplicated (with a
    /// warning) and sorted ascending, orders and operating points deduped.
    pub fn normalized(&self) -> Result<(Self, Vec<String>)> {
        let mut warnings = Vec::new();
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda_grid must be non-empty".into()));
        }
        for &l in &self.lambda_grid {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidLambda(l));
            }
        }
        if self.orders.is_empty() || self.operating_points.is_empty() {
            return Err(Error::Config(
                "orders and operating_points must be non-empty".into(),
            ));
        }
        if self.n_subsets == 0 {
            return Err(Error::Config("n_subsets must be positive".into()));
        }
        let mut spec = self.clone();
        spec.lambda_grid
            .sort_by(|a, b| a.partial_cmp(b).expect("validated lambdas"));
        let before = spec.lambda_grid.len();
        spec.lambda_grid.dedup();
        if spec.lambda_grid.len() != before {
            warnings.push(format!(
                "lambda_grid contained {} duplicate value(s); deduplicated",
                before - spec.lambda_grid.len()
            ));
        }
        spec.orders.sort();
        spec.orders.dedup();
        spec.operating_points.sort();
        spec.operating_points.dedup();
        spec.scene.validate()?;
        Ok((spec, warnings))
    }

    pub fn tracker_config(&self, lambda: f64, feat_gate: f64) -> Result<TrackerConfig> {
        TrackerConfig::new(
            GateConfig::new(self.pos_gate, feat_gate, lambda)?,
            Matrix3::identity() * self.sigma_meas.powi(2),
            Matrix3::identity() * self.sigma_process.powi(2),
            self.feature_cap,
        )
    }

    pub fn similarity_config(&self) -> SimilarityConfig {
        SimilarityConfig {
            d_max: self.d_max,
            ..Default::default()
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellKey {
    pub order: FrameOrder,
    pub operating_point: OperatingPointName,
    pub lambda: f64,
    pub subset: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub key: CellKey,
    pub report: MetricReport,
    #[serde(skip)]
    pub trajectories: TrajectorySet,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub key: CellKey,
    pub message: String,
}

/// Per-metric means over subsets, fractions for ratio metrics and plain
/// means for the counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricMeans {
    pub hota: f64,
    pub det_re: f64,
    pub det_pr: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub mota: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub idsw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTest {
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: String,
}

/// Paired-test block of a lambda > 0 row against the lambda = 0 baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Significance {
    pub hota: MetricTest,
    pub det_re: MetricTest,
    pub det_pr: MetricTest,
    pub ass_a: MetricTest,
    pub mota: MetricTest,
    pub idsw: MetricTest,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub order: FrameOrder,
    pub operating_point: OperatingPointName,
    pub lambda: f64,
    pub means: MetricMeans,
    pub significance: Option<Significance>,
}

/// Everything an experiment run produces, renderable as CSV and JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ResultTable {
    pub spec: ExperimentSpec,
    pub feat_gate: f64,
    /// Seed actually used for subset selection after the coverage audit.
    pub subset_seed: u64,
    pub subsets: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    pub aggregates: Vec<AggregateRow>,
}

fn thread_cap() -> usize {
    std::env::var("MOT3D_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

/// Calibrates the feature gate on a validation scene: a different plant
/// rendered with the same embedding noise and detection probability, no
/// clutter, labeled by ground truth. Only a strided subset of viewpoints
/// enters the statistic, so each id contributes a handful of occurrences
/// the way a held-out validation split would, rather than the full sweep.
pub fn calibrate_validation_gate(spec: &ExperimentSpec) -> Result<f64> {
    use rand::RngCore;
    let mut seed_rng = rng::derive_rng(spec.seed, rng::DOMAIN_VALIDATION, 0);
    let mut scene_spec = spec.scene.clone();
    scene_spec.seed = seed_rng.next_u64();
    scene_spec.noise.clutter_rate = 0.0;
    let scene = Scene::build(&scene_spec)?;
    let frames = render_scene(&scene, &scene_spec.noise, scene_spec.seed);
    let stride = (frames.len() / 2).max(1);
    let sparse: Vec<_> = frames
        .iter()
        .step_by(stride)
        .cloned()
        .collect();
    let labeled = crate::simgen::labeled_features(&sparse);
    crate::association::calibrate_feature_gate(&labeled)
}

fn run_cell(
    spec: &ExperimentSpec,
    feat_gate: f64,
    frames: &[RenderedFrame],
    gt: &TrajectorySet,
    subset: &[usize],
    key: CellKey,
) -> Result<CellResult> {
    let config = spec.tracker_config(key.lambda, feat_gate)?;
    let selected: Vec<(u64, Vec<Detection>)> = subset
        .iter()
        .map(|&i| (i as u64, frames[i].detections.clone()))
        .collect();
    // The shuffle seed depends only on (experiment seed, subset), so every
    // lambda and operating point sees the identical presentation order and
    // the t-tests stay paired.
    let presented = order_frames(
        selected,
        key.order,
        spec.seed.wrapping_add(key.subset as u64),
    );
    let trajectories = match key.order {
        FrameOrder::Sequential => run_sequence(&presented, &config)?.1,
        FrameOrder::Random => {
            let (reindexed, originals) = reindex_frames(presented);
            let (_, logical, _) = run_sequence(&reindexed, &config)?;
            remap_trajectory_frames(logical, &originals)?
        }
    };
    let frame_set: HashSet<u64> = subset.iter().map(|&i| i as u64).collect();
    let gt_subset = gt.restricted_to_frames(&frame_set);
    let report = evaluate(
        &gt_subset,
        &trajectories,
        &spec.similarity_config(),
        spec.match_threshold,
    )?;
    Ok(CellResult {
        key,
        report,
        trajectories,
    })
}

/// Percent value rounded to two decimals, the precision the tables print.
/// Significance is computed from these so the star annotations are a pure
/// function of the emitted per-subset scores.
fn rounded_percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

fn test_metric(a: &[f64], b: &[f64]) -> Result<MetricTest> {
    let t = paired_t_test(a, b)?;
    Ok(MetricTest {
        t_stat: t.t_stat,
        p_value: t.p_value,
        stars: significance_stars(t.p_value).to_string(),
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    let (spec, mut warnings) = spec.normalized()?;

    let feat_gate = match spec.feat_gate {
        Some(gate) => gate,
        None => {
            let gate = calibrate_validation_gate(&spec)?;
            warnings.push(format!(
                "feature gate calibrated from validation scene: {gate:.6}"
            ));
            gate
        }
    };

    let scene = Scene::build(&spec.scene)?;
    let n_frames = spec.scene.path.n_viewpoints();
    let (subsets, subset_seed) =
        covering_subsets(n_frames, spec.n_subsets, spec.subset_size, spec.seed, 32)?;
    if subset_seed != spec.seed {
        warnings.push(format!(
            "subset selection reseeded to {subset_seed} to cover all frames"
        ));
    }

    // Rendered frames and ground truth per operating point. Geometry and
    // visibility are shared; only detection statistics differ.
    let mut per_op: BTreeMap<OperatingPointName, (Vec<RenderedFrame>, TrajectorySet)> =
        BTreeMap::new();
    for &op in &spec.operating_points {
        let noise = OperatingPoint::preset(op).apply(&spec.scene.noise);
        let frames = render_scene(&scene, &noise, spec.scene.seed);
        let gt = crate::simgen::ground_truth(&frames);
        per_op.insert(op, (frames, gt));
    }

    let mut keys = Vec::new();
    for &op in &spec.operating_points {
        for &order in &spec.orders {
            for &lambda in &spec.lambda_grid {
                for subset in 0..spec.n_subsets {
                    keys.push(CellKey {
                        order,
                        operating_point: op,
                        lambda,
                        subset,
                    });
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<(CellKey, Result<CellResult>)> = pool.install(|| {
        keys.par_iter()
            .map(|&key| {
                let (frames, gt) = &per_op[&key.operating_point];
                (
                    key,
                    run_cell(&spec, feat_gate, frames, gt, &subsets[key.subset], key),
                )
            })
            .collect()
    });

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (key, outcome) in outcomes {
        match outcome {
            Ok(cell) => cells.push(cell),
            Err(e) => failures.push(CellFailure {
                key,
                message: e.to_string(),
            }),
        }
    }

    let aggregates = aggregate(&spec, &cells, &mut warnings)?;
    Ok(ResultTable {
        spec,
        feat_gate,
        subset_seed,
        subsets,
        warnings,
        cells,
        failures,
        aggregates,
    })
}

/// Per-subset score series of a (order, op, lambda) group, subset-ordered.
struct Series {
    raw: Vec<MetricReport>,
}

impl Series {
    fn mean(&self, f: impl Fn(&MetricReport) -> f64) -> f64 {
        self.raw.iter().map(&f).sum::<f64>() / self.raw.len() as f64
    }

    fn means(&self) -> MetricMeans {
        MetricMeans {
            hota: self.mean(|r| r.hota),
            det_re: self.mean(|r| r.det_re),
            det_pr: self.mean(|r| r.det_pr),
            det_a: self.mean(|r| r.det_a),
            ass_a: self.mean(|r| r.ass_a),
            mota: self.mean(|r| r.mota),
            fp: self.mean(|r| r.fp as f64),
            fn_: self.mean(|r| r.fn_ as f64),
            idsw: self.mean(|r| r.idsw as f64),
        }
    }

    fn rounded(&self, f: impl Fn(&MetricReport) -> f64) -> Vec<f64> {
        self.raw.iter().map(|r| rounded_percent(f(r))).collect()
    }

    fn counts(&self, f: impl Fn(&MetricReport) -> u64) -> Vec<f64> {
        self.raw.iter().map(|r| f(r) as f64).collect()
    }
}

fn aggregate(
    spec: &ExperimentSpec,
    cells: &[CellResult],
    warnings: &mut Vec<String>,
) -> Result<Vec<AggregateRow>> {
    let mut rows = Vec::new();
    let has_baseline = spec.lambda_grid.contains(&0.0);
    if !has_baseline && spec.lambda_grid.len() > 1 {
        warnings.push("lambda_grid has no 0 entry; baseline comparisons skipped".into());
    }
    for &op in &spec.operating_points {
        for &order in &spec.orders {
            let series_for = |lambda: f64| -> Option<Series> {
                let mut group: Vec<&CellResult> = cells
                    .iter()
                    .filter(|c| {
                        c.key.operating_point == op
                            && c.key.order == order
                            && c.key.lambda == lambda
                    })
                    .collect();
                group.sort_by_key(|c| c.key.subset);
                if group.len() != spec.n_subsets {
                    return None;
                }
                Some(Series {
                    raw: group.iter().map(|c| c.report.clone()).collect(),
                })
            };
            let baseline = if has_baseline { series_for(0.0) } else { None };
            for &lambda in &spec.lambda_grid {
                let Some(series) = series_for(lambda) else {
                    warnings.push(format!(
                        "incomplete cell group ({order}, {op}, lambda={lambda}); aggregate skipped"
                    ));
                    continue;
                };
                let significance = match (&baseline, lambda != 0.0) {
                    (Some(base), true) => Some(Significance {
                        hota: test_metric(&series.rounded(|r| r.hota), &base.rounded(|r| r.hota))?,
                        det_re: test_metric(
                            &series.rounded(|r| r.det_re),
                            &base.rounded(|r| r.det_re),
                        )?,
                        det_pr: test_metric(
                            &series.rounded(|r| r.det_pr),
                            &base.rounded(|r| r.det_pr),
                        )?,
                        ass_a: test_metric(
                            &series.rounded(|r| r.ass_a),
                            &base.rounded(|r| r.ass_a),
                        )?,
                        mota: test_metric(&series.rounded(|r| r.mota), &base.rounded(|r| r.mota))?,
                        idsw: test_metric(
                            &series.counts(|r| r.idsw),
                            &base.counts(|r| r.idsw),
                        )?,
                    }),
                    _ => None,
                };
                rows.push(AggregateRow {
                    order,
                    operating_point: op,
                    lambda,
                    means: series.means(),
                    significance,
                });
            }
        }
    }
    Ok(rows)
}

impl ResultTable {
    /// Mean row lookup.
    pub fn aggregate(
        &self,
        order: FrameOrder,
        op: OperatingPointName,
        lambda: f64,
    ) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.order == order && a.operating_point == op && a.lambda == lambda)
    }

    /// Per-subset reports of one (order, op, lambda) group, subset-ordered.
    pub fn subset_reports(
        &self,
        order: FrameOrder,
        op: OperatingPointName,
        lambda: f64,
    ) -> Vec<&MetricReport> {
        let mut group: Vec<&CellResult> = self
            .cells
            .iter()
            .filter(|c| {
                c.key.order == order && c.key.operating_point == op && c.key.lambda == lambda
            })
            .collect();
        group.sort_by_key(|c| c.key.subset);
        group.into_iter().map(|c| &c.report).collect()
    }

    /// The results table: per-subset rows followed by mean rows, percent
    /// values at two decimals, significance columns filled on mean rows.
    pub fn render_results_csv(&self) -> String {
        const SIG_METRICS: usize = 6;
        let header: Vec<String> = ["order", "operating_point", "lambda", "subset"]
            .iter()
            .map(|s| s.to_string())
            .chain(
                ["hota", "det_re", "det_pr", "det_a", "ass_a", "mota", "fp", "fn", "idsw"]
                    .iter()
                    .map(|s| s.to_string()),
            )
            .chain(
                ["hota", "det_re", "det_pr", "ass_a", "mota", "idsw"]
                    .iter()
                    .flat_map(|m| {
                        [format!("t_{m}"), format!("p_{m}"), format!("sig_{m}")]
                    }),
            )
            .chain(std::iter::once("error".to_string()))
            .collect();
        let width = header.len();

        let mut rows: Vec<Vec<String>> = vec![header];
        for cell in &self.cells {
            let r = &cell.report;
            let mut row = vec![
                cell.key.order.to_string(),
                cell.key.operating_point.to_string(),
                cell.key.lambda.to_string(),
                cell.key.subset.to_string(),
                format!("{:.2}", r.hota * 100.0),
                format!("{:.2}", r.det_re * 100.0),
                format!("{:.2}", r.det_pr * 100.0),
                format!("{:.2}", r.det_a * 100.0),
                format!("{:.2}", r.ass_a * 100.0),
                format!("{:.2}", r.mota * 100.0),
                r.fp.to_string(),
                r.fn_.to_string(),
                r.idsw.to_string(),
            ];
            row.resize(width, String::new());
            rows.push(row);
        }
        for failure in &self.failures {
            let mut row = vec![
                failure.key.order.to_string(),
                failure.key.operating_point.to_string(),
                failure.key.lambda.to_string(),
                failure.key.subset.to_string(),
            ];
            row.resize(width - 1, String::new());
            row.push(failure.message.replace(',', ";"));
            rows.push(row);
        }
        for agg in &self.aggregates {
            let m = &agg.means;
            let mut row = vec![
                agg.order.to_string(),
                agg.operating_point.to_string(),
                agg.lambda.to_string(),
                "mean".to_string(),
                format!("{:.2}", m.hota * 100.0),
                format!("{:.2}", m.det_re * 100.0),
                format!("{:.2}", m.det_pr * 100.0),
                format!("{:.2}", m.det_a * 100.0),
                format!("{:.2}", m.ass_a * 100.0),
                format!("{:.2}", m.mota * 100.0),
                format!("{:.2}", m.fp),
                format!("{:.2}", m.fn_),
                format!("{:.2}", m.idsw),
            ];
            match &agg.significance {
                Some(s) => {
                    for test in [&s.hota, &s.det_re, &s.det_pr, &s.ass_a, &s.mota, &s.idsw] {
                        row.push(format!("{:.4}", test.t_stat));
                        row.push(format!("{:.6}", test.p_value));
                        row.push(test.stars.clone());
                    }
                }
                None => row.extend(std::iter::repeat_n(String::new(), SIG_METRICS * 3)),
            }
            row.push(String::new());
            debug_assert_eq!(row.len(), width);
            rows.push(row);
        }
        let mut out = String::new();
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Long-format HOTA-over-lambda data, one row per cell.
    pub fn render_fig6_csv(&self) -> String {
        let mut out = String::from("order,operating_point,lambda,subset,hota\n");
        for cell in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{:.2}\n",
                cell.key.order,
                cell.key.operating_point,
                cell.key.lambda,
                cell.key.subset,
                cell.report.hota * 100.0,
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("result serialization: {e}")))
    }

    /// One trajectory file name per cell, stable and filesystem-safe.
    pub fn trajectory_file_name(key: &CellKey) -> String {
        format!(
            "traj_{}_{}_lam{:.2}_sub{}.jsonl",
            key.operating_point, key.order, key.lambda, key.subset
        )
    }
}

/// Convenience wrapper for the CLI: renders a scene at an operating point
/// and returns detection records plus ground truth.
pub fn simulate_records(
    scene_spec: &SceneSpec,
    operating_point: Option<OperatingPointName>,
) -> Result<(Vec<io::DetectionRecord>, TrajectorySet)> {
    let scene = Scene::build(scene_spec)?;
    let noise = match operating_point {
        Some(op) => OperatingPoint::preset(op).apply(&scene_spec.noise),
        None => scene_spec.noise.clone(),
    };
    let frames = render_scene(&scene, &noise, scene_spec.seed);
    let gt = crate::simgen::ground_truth(&frames);
    Ok((io::records_from_rendered(&frames), gt))
}
