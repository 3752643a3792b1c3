use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use imitate_core::euclidean::Divergence;
use imitate_core::metrics::evaluate;
use imitate_core::riemannian::ManifoldImitator;
use imitate_core::temporal::fit_temporal;
use imitate_core::{
    fit, ingest_demonstrations, merge_via_points, predict, superpose_predict, CovarianceVariant, KernelConfig, Matrix,
    ProbabilisticTrajectory, RgdConfig, SuperpositionSet, Vector, ViaPointSet,
};
use log::info;
use rayon::prelude::*;

use crate::config::{GridSpec, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{self, PredictionRow};
use crate::{CovArg, EvalArgs, GridArgs, IngestArgs, KernelArgs, ManifoldArgs, ModeArg, PredictArgs, TemporalArgs};

const GRID_TOL: f64 = 1e-9;

fn kernel_config(args: &KernelArgs, cfg: &RunConfig) -> CliResult<KernelConfig> {
    let mut k = cfg.kernel.unwrap_or_default();
    if let Some(kappa) = args.kappa {
        k.kappa = kappa;
    }
    if let Some(lambda) = args.lambda {
        k.lambda = lambda;
    }
    k.validate()?;
    Ok(k)
}

fn pick<'a>(flag: &'a Option<PathBuf>, fallback: &'a Option<PathBuf>) -> Option<&'a Path> {
    flag.as_deref().or(fallback.as_deref())
}

/// Query inputs: explicit grid, grid file, configured grid, then the fallback.
fn query_inputs(args: &GridArgs, cfg: &RunConfig, fallback: impl FnOnce() -> Vec<Vector>) -> CliResult<Vec<Vector>> {
    if let Some(path) = &args.grid_file {
        return io::read_grid_file(path);
    }
    let uniform = |g: &GridSpec| g.points().into_iter().map(|t| Vector::from_element(1, t)).collect();
    Ok(match args.grid.as_ref().or(cfg.grid.as_ref()) {
        Some(g) => uniform(g),
        None => fallback(),
    })
}

fn load_via(path: Option<&Path>) -> CliResult<ViaPointSet> {
    match path {
        Some(p) => Ok(ViaPointSet::load(p)?),
        None => Ok(ViaPointSet::empty()),
    }
}

fn timed<T>(what: &str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
    let start = Instant::now();
    let out = f()?;
    info!("{what} took {:.3} s", start.elapsed().as_secs_f64());
    Ok(out)
}

pub fn ingest(args: &IngestArgs) -> CliResult<()> {
    if args.demos.len() < 2 {
        return Err(CliError::usage("ingest needs at least two demonstration files"));
    }
    let demos = args
        .demos
        .iter()
        .map(|p| io::read_demo_csv(p))
        .collect::<CliResult<Vec<_>>>()?;
    let manifold = args.manifold.as_deref().map(io::parse_manifold).transpose()?;
    let traj = ingest_demonstrations(&demos, args.epsilon, manifold)?;
    let mut json = traj.to_json_string()?;
    json.push('\n');
    io::write_output(args.out.as_deref(), json.as_bytes())
}

pub fn predict_euclidean(args: &PredictArgs, cfg: &RunConfig) -> CliResult<()> {
    let kernel = kernel_config(&args.kernel, cfg)?;
    let mut mode = cfg.mode.unwrap_or_default();
    if let Some(m) = args.mode {
        mode.divergence = match m {
            ModeArg::Kl => Divergence::Kl,
            ModeArg::Rkl => Divergence::Rkl,
        };
    }
    if let Some(v) = args.cov_variant {
        mode.kl_cov_variant = v.into();
    }
    let data = pick(&args.data, &cfg.io.data);
    let superpose = pick(&args.superpose, &cfg.io.superpose);
    let via = pick(&args.via, &cfg.io.via);
    let rows = match (data, superpose) {
        (Some(path), None) => {
            let base = ProbabilisticTrajectory::load(path)?;
            let (traj, weights) = merge_via_points(&base, &load_via(via)?)?;
            let queries = query_inputs(&args.grid, cfg, || base.inputs().to_vec())?;
            timed("prediction", || {
                let model = fit(traj.inputs(), &weights, &kernel)?;
                predict_rows(&queries, |x| predict(&model, &traj, mode, x))
            })?
        }
        (None, Some(path)) => {
            if via.is_some() {
                return Err(CliError::usage("--via cannot be combined with --superpose"));
            }
            let set = SuperpositionSet::load(path)?;
            let first = &set.trajectories()[0];
            let queries = query_inputs(&args.grid, cfg, || first.inputs().to_vec())?;
            timed("prediction", || {
                let model = fit(first.inputs(), &vec![1.0; first.len()], &kernel)?;
                predict_rows(&queries, |x| superpose_predict(&model, &set, mode, x))
            })?
        }
        (Some(_), Some(_)) => return Err(CliError::usage("give either --data or --superpose, not both")),
        (None, None) => return Err(CliError::usage("one of --data or --superpose is required")),
    };
    io::write_output(pick(&args.out, &cfg.io.out), &io::prediction_csv(&rows)?)
}

/// Predicts every query in parallel; rows keep the query order.
fn predict_rows<F>(queries: &[Vector], f: F) -> CliResult<Vec<PredictionRow>>
where
    F: Fn(&[f64]) -> imitate_core::Result<imitate_core::Prediction> + Sync,
{
    queries
        .par_iter()
        .map(|x| {
            let p = f(x.as_slice())?;
            Ok(PredictionRow {
                x: x.as_slice().to_vec(),
                mu: p.mu,
                sigma: p.sigma,
                flags: p.flags.label().to_string(),
            })
        })
        .collect()
}

pub fn predict_temporal(args: &TemporalArgs, cfg: &RunConfig) -> CliResult<()> {
    let kernel = kernel_config(&args.kernel, cfg)?;
    let data = pick(&args.data, &cfg.io.data).ok_or_else(|| CliError::usage("--data is required"))?;
    let samples = io::read_temporal(data)?;
    let tau = args.tau.unwrap_or(1.0);
    let delta = args.delta.or(cfg.delta);
    let mut model = fit_temporal(&samples, &kernel, delta)?;
    if let Some(path) = pick(&args.via, &cfg.io.via) {
        model = model.adapt_temporal(&io::read_desired(path)?)?;
    }
    let times: Vec<f64> = query_inputs(&args.grid, cfg, || {
        samples.iter().map(|s| Vector::from_element(1, s.t * tau)).collect()
    })?
    .iter()
    .map(|x| {
        if x.len() == 1 {
            Ok(x[0])
        } else {
            Err(CliError::usage("temporal queries must be scalar times"))
        }
    })
    .collect::<CliResult<_>>()?;
    let states = timed("prediction", || {
        times
            .par_iter()
            .map(|&t| Ok(model.predict_phase(t, tau)?))
            .collect::<CliResult<Vec<(Vector, Vector)>>>()
    })?;

    let o = model.output_dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((0..o).map(|i| format!("pos{i}")));
    header.extend((0..o).map(|i| format!("vel{i}")));
    let csv_fail = |e: csv::Error| CliError::Csv {
        path: PathBuf::from("<output>"),
        source: e,
    };
    w.write_record(&header).map_err(csv_fail)?;
    for (t, (p, v)) in times.iter().zip(&states) {
        let mut rec = vec![io::fmt_f64(*t)];
        rec.extend(p.iter().chain(v.iter()).map(|&x| io::fmt_f64(x)));
        w.write_record(&rec).map_err(csv_fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    io::write_output(pick(&args.out, &cfg.io.out), &bytes)
}

pub fn predict_manifold(args: &ManifoldArgs, cfg: &RunConfig) -> CliResult<()> {
    let kernel = kernel_config(&args.kernel, cfg)?;
    let data = pick(&args.data, &cfg.io.data).ok_or_else(|| CliError::usage("--data is required"))?;
    let mut base = ProbabilisticTrajectory::load(data)?;
    let flag_spec = args.manifold.as_deref().map(io::parse_manifold).transpose()?;
    match (base.manifold(), flag_spec) {
        (Some(stored), Some(given)) if *stored != given => {
            return Err(CliError::usage(
                "--manifold differs from the manifold stored in the data",
            ));
        }
        (None, Some(given)) => {
            base = ProbabilisticTrajectory::from_parts(
                base.inputs().to_vec(),
                base.means().to_vec(),
                base.covariances().to_vec(),
                Some(given),
            )?;
        }
        (None, None) => return Err(CliError::usage("data has no manifold; pass --manifold")),
        _ => {}
    }
    let mut rgd: RgdConfig = cfg.rgd.unwrap_or_default();
    if let Some(eta) = args.rgd_eta {
        rgd.eta = eta;
    }
    if let Some(n) = args.max_iter {
        rgd.max_iter = n;
    }
    if let Some(tol) = args.tol {
        rgd.tol = tol;
    }
    let variant = args
        .cov_variant
        .map(Into::into)
        .unwrap_or(CovarianceVariant::Approximate);
    let (traj, weights) = merge_via_points(&base, &load_via(pick(&args.via, &cfg.io.via))?)?;
    let queries = query_inputs(&args.grid, cfg, || base.inputs().to_vec())?;
    let rows = timed("prediction", || {
        let model = fit(traj.inputs(), &weights, &kernel)?;
        let imitator = ManifoldImitator::new(&model, &traj, rgd, variant)?;
        predict_rows(&queries, |x| imitator.predict(x))
    })?;
    io::write_output(pick(&args.out, &cfg.io.out), &io::prediction_csv(&rows)?)
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let pred = io::read_prediction_csv(&args.pred)?;
    let is_json = args
        .reference
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (reference, restrict) = if is_json {
        let traj = ProbabilisticTrajectory::load(&args.reference)?;
        let rows = (0..traj.len())
            .map(|i| PredictionRow {
                x: traj.inputs()[i].as_slice().to_vec(),
                mu: traj.means()[i].clone(),
                sigma: traj.covariances()[i].clone(),
                flags: String::new(),
            })
            .collect();
        (rows, traj.manifold().cloned())
    } else {
        (io::read_prediction_csv(&args.reference)?, None)
    };
    if pred.len() != reference.len() {
        return Err(CliError::usage(format!(
            "prediction has {} rows, reference has {}",
            pred.len(),
            reference.len()
        )));
    }
    for (i, (p, r)) in pred.iter().zip(&reference).enumerate() {
        let aligned = p.x.len() == r.x.len() && p.x.iter().zip(&r.x).all(|(a, b)| (a - b).abs() <= GRID_TOL);
        if !aligned {
            return Err(CliError::usage(format!(
                "row {i}: prediction and reference inputs differ"
            )));
        }
    }
    // manifold covariances are compared on the tangent space of the reference mean
    let covs = |rows: &[PredictionRow]| -> Vec<Matrix> {
        rows.iter()
            .zip(&reference)
            .map(|(row, r)| match &restrict {
                Some(spec) => {
                    let b = spec.tangent_basis(&r.mu);
                    b.transpose() * &row.sigma * b
                }
                None => row.sigma.clone(),
            })
            .collect()
    };
    let means = |rows: &[PredictionRow]| rows.iter().map(|r| r.mu.clone()).collect::<Vec<_>>();
    let report = evaluate(
        &means(&pred),
        &covs(&pred),
        &means(&reference),
        &covs(&reference),
        Duration::from_secs_f64(args.wall_time.unwrap_or(0.0).max(0.0)),
    )?;
    eprint!("{}", report.table());
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::usage(e.to_string()))?;
    json.push('\n');
    io::write_output(args.out.as_deref(), json.as_bytes())
}

impl From<CovArg> for CovarianceVariant {
    fn from(c: CovArg) -> Self {
        match c {
            CovArg::Exact => CovarianceVariant::Exact,
            CovArg::Approx => CovarianceVariant::Approximate,
        }
    }
}
