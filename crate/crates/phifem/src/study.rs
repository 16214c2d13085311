//! Batch experiment driver: refinement studies, rotation and parameter
//! sweeps, and condition-number curves, with CSV/JSON output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    assemble, build_dof_layout, BoundaryCondition, PhiFemParams, ProblemData,
};
use crate::levelset::{check_patch_condition, classify_cells, interpolate_levelset};
use crate::linalg::{condition_number_2, solve};
use crate::mesh::build_background_mesh;
use crate::postproc::{compute_errors, fit_rate};
use crate::problems::{case_by_name, TestCase};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure at level n = {n}: {source}")]
    Numerical {
        n: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn numerical<E: std::error::Error + Send + Sync + 'static>(n: usize) -> impl FnOnce(E) -> StudyError {
    move |e| StudyError::Numerical { n, source: Box::new(e) }
}

/// Which axis a sweep walks over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    Theta0,
    Sigma,
    Gamma,
}

/// Full description of one batch run. Serializable so a JSON file can carry
/// the whole configuration; CLI flags override single fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// test case name: flower | flower_robin | rectangle | ball | patch
    pub case: String,
    pub theta0: f64,
    pub k: usize,
    pub l: usize,
    pub gamma_div: f64,
    pub gamma_u: f64,
    pub gamma_p: f64,
    pub sigma: f64,
    /// Robin coefficient (used by the robin case only)
    pub alpha: f64,
    /// subdivisions per axis, strictly increasing
    pub levels: Vec<usize>,
    pub sweep: SweepAxis,
    pub theta0_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
    /// estimate the 2-norm condition number per level
    pub compute_condition: bool,
    /// run and report the element-patch diagnostic
    pub patch_diagnostic: bool,
    /// solver tolerance on the relative residual
    pub solve_tol: f64,
    /// relative accuracy of the condition estimator
    pub cond_tol: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            case: "flower".into(),
            theta0: 0.0,
            k: 1,
            l: 3,
            gamma_div: 10.0,
            gamma_u: 10.0,
            gamma_p: 10.0,
            sigma: 0.01,
            alpha: 1.0,
            levels: vec![8, 16, 32],
            sweep: SweepAxis::None,
            theta0_grid: (0..9).map(|i| i as f64 * 0.1).collect(),
            sigma_grid: vec![1e-6, 1e-3, 1e-2, 1.0, 1e2],
            gamma_grid: vec![1e-3, 1e-1, 10.0, 1e3],
            out_csv: None,
            out_json: None,
            compute_condition: false,
            patch_diagnostic: false,
            solve_tol: 1e-8,
            cond_tol: 1e-4,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.levels.is_empty() {
            return Err(StudyError::Config("levels must be non-empty".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(StudyError::Config("levels must be strictly increasing".into()));
        }
        if self.k < 1 {
            return Err(StudyError::Config("k must be at least 1".into()));
        }
        if self.l < 1 {
            return Err(StudyError::Config("l must be at least 1".into()));
        }
        if case_by_name(&self.case, self.theta0, self.alpha).is_none() {
            return Err(StudyError::Config(format!("unknown test case {:?}", self.case)));
        }
        match self.sweep {
            SweepAxis::Theta0 if self.theta0_grid.is_empty() => {
                return Err(StudyError::Config("theta0 grid is empty".into()));
            }
            SweepAxis::Sigma if self.sigma_grid.is_empty() => {
                return Err(StudyError::Config("sigma grid is empty".into()));
            }
            SweepAxis::Gamma if self.gamma_grid.is_empty() => {
                return Err(StudyError::Config("gamma grid is empty".into()));
            }
            _ => {}
        }
        Ok(())
    }

    fn params(&self) -> (f64, f64, f64, f64) {
        (self.gamma_div, self.gamma_u, self.gamma_p, self.sigma)
    }
}

/// One table row with full parameter provenance.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub case: String,
    pub dim: usize,
    pub k: usize,
    pub l: usize,
    pub n: usize,
    pub h: f64,
    pub theta0: f64,
    pub sigma: f64,
    pub gamma_div: f64,
    pub gamma_u: f64,
    pub gamma_p: f64,
    pub alpha: f64,
    pub dofs_v: usize,
    pub dofs_z: usize,
    pub dofs_q: usize,
    pub err_l2_rel: f64,
    pub err_h1_rel: f64,
    pub cond2: Option<f64>,
    pub residual: f64,
}

/// Collected rows plus fitted rates.
#[derive(Debug, Clone, Serialize, Default)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    /// L² slope over the finest half of the levels
    pub rate_l2: Option<f64>,
    /// H¹ slope over the finest half of the levels
    pub rate_h1: Option<f64>,
    /// slope of log κ against log(1/h)
    pub rate_cond: Option<f64>,
    /// per-level max/min error ratio over a sweep (rotation robustness)
    pub max_min_ratio_l2: Option<f64>,
}

pub const CSV_HEADER: &str = "case,dim,k,l,n,h,theta0,sigma,gamma_div,gamma_u,gamma_p,alpha,dofs_V,dofs_Z,dofs_Q,err_L2_rel,err_H1_rel,cond2,residual";

impl StudyReport {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            let cond = r.cond2.map(|c| format!("{c:.6e}")).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{:.6e},{},{},{},{},{},{},{},{},{},{:.6e},{:.6e},{},{:.3e}",
                r.case,
                r.dim,
                r.k,
                r.l,
                r.n,
                r.h,
                r.theta0,
                r.sigma,
                r.gamma_div,
                r.gamma_u,
                r.gamma_p,
                r.alpha,
                r.dofs_v,
                r.dofs_z,
                r.dofs_q,
                r.err_l2_rel,
                r.err_h1_rel,
                cond,
                r.residual
            )?;
        }
        Ok(())
    }

    pub fn save(&self, cfg: &StudyConfig) -> Result<(), StudyError> {
        if let Some(path) = &cfg.out_csv {
            let mut w = BufWriter::new(File::create(path)?);
            self.write_csv(&mut w)?;
        }
        if let Some(path) = &cfg.out_json {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut w, self)
                .map_err(|e| StudyError::Config(format!("json write failed: {e}")))?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Build, assemble and solve one level of one case; returns the table row.
pub fn solve_level(
    case: &TestCase,
    cfg: &StudyConfig,
    n: usize,
    compute_condition: bool,
) -> Result<StudyRow, StudyError> {
    let mesh = Arc::new(
        build_background_mesh(&case.bbox, n).map_err(numerical(n))?,
    );
    let mut spec = case.levelset.clone();
    spec.degree = cfg.l;
    let field = interpolate_levelset(&spec, mesh.clone()).map_err(numerical(n))?;
    let decomp = classify_cells(&field).map_err(numerical(n))?;
    let layout = build_dof_layout(&mesh, &decomp, cfg.k).map_err(numerical(n))?;
    let (gamma_div, gamma_u, gamma_p, sigma) = cfg.params();
    let params = PhiFemParams {
        gamma_div,
        gamma_u,
        gamma_p,
        sigma,
        k: cfg.k,
        l: cfg.l,
        bc: case.bc.clone(),
    };
    let data = ProblemData {
        f: case.f.clone(),
        exact: Some(case.exact.clone()),
        exact_grad: Some(case.exact_grad.clone()),
    };
    if cfg.patch_diagnostic {
        let report = check_patch_condition(&mesh, &decomp, 4);
        log::info!(
            "patch diagnostic at n = {n}: max path {}, unreachable {}, pass {}",
            report.max_path,
            report.unreachable.len(),
            report.pass
        );
    }
    let system = assemble(&mesh, &field, &decomp, &layout, &params, &data).map_err(numerical(n))?;
    let solved = solve(&system.matrix, &system.rhs, cfg.solve_tol).map_err(numerical(n))?;
    let mut report = compute_errors(
        &solved.solution[..layout.n_v],
        &layout,
        &mesh,
        &decomp,
        &case.exact,
        &case.exact_grad,
    )
    .map_err(numerical(n))?;
    report.residual = solved.residual;
    if compute_condition {
        report.cond2 = Some(condition_number_2(&system.matrix, cfg.cond_tol).map_err(numerical(n))?);
    }

    let alpha = match &case.bc {
        BoundaryCondition::Robin { alpha, .. } => *alpha,
        _ => 0.0,
    };
    Ok(StudyRow {
        case: case.name.clone(),
        dim: case.dim,
        k: cfg.k,
        l: cfg.l,
        n,
        h: report.h,
        theta0: case.theta0,
        sigma,
        gamma_div,
        gamma_u,
        gamma_p,
        alpha,
        dofs_v: report.dofs_v,
        dofs_z: report.dofs_z,
        dofs_q: report.dofs_q,
        err_l2_rel: report.err_l2_rel,
        err_h1_rel: report.err_h1_rel,
        cond2: report.cond2,
        residual: report.residual,
    })
}

fn finest_half(rows: &[StudyRow]) -> &[StudyRow] {
    let m = rows.len();
    let take = (m / 2).max(2).min(m);
    &rows[m - take..]
}

fn fit_rates(report: &mut StudyReport) {
    let rows = &report.rows;
    if rows.len() >= 2 {
        let tail = finest_half(rows);
        let l2: Vec<(f64, f64)> = tail.iter().map(|r| (r.h, r.err_l2_rel)).collect();
        let h1: Vec<(f64, f64)> = tail.iter().map(|r| (r.h, r.err_h1_rel)).collect();
        report.rate_l2 = fit_rate(&l2).ok();
        report.rate_h1 = fit_rate(&h1).ok();
        let cond: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.cond2.map(|c| (1.0 / r.h, c)))
            .collect();
        if cond.len() >= 2 {
            report.rate_cond = fit_rate(&cond).ok();
        }
    }
}

/// Refinement study at fixed parameters.
pub fn run_convergence(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    cfg.validate()?;
    let case = case_by_name(&cfg.case, cfg.theta0, cfg.alpha)
        .ok_or_else(|| StudyError::Config(format!("unknown case {:?}", cfg.case)))?;
    let mut report = StudyReport::default();
    for &n in &cfg.levels {
        report.rows.push(solve_level(&case, cfg, n, cfg.compute_condition)?);
    }
    fit_rates(&mut report);
    report.save(cfg)?;
    Ok(report)
}

/// Error sensitivity to the domain rotation θ₀, per level.
pub fn run_angle_sweep(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    cfg.validate()?;
    if cfg.theta0_grid.is_empty() {
        return Err(StudyError::Config("theta0 grid is empty".into()));
    }
    let mut report = StudyReport::default();
    let mut worst_ratio = 1.0f64;
    for &n in &cfg.levels {
        let mut level_errors: Vec<f64> = Vec::new();
        for &theta0 in &cfg.theta0_grid {
            let case = case_by_name(&cfg.case, theta0, cfg.alpha)
                .ok_or_else(|| StudyError::Config(format!("unknown case {:?}", cfg.case)))?;
            let row = solve_level(&case, cfg, n, cfg.compute_condition)?;
            level_errors.push(row.err_l2_rel);
            report.rows.push(row);
        }
        let max = level_errors.iter().cloned().fold(f64::MIN, f64::max);
        let min = level_errors.iter().cloned().fold(f64::MAX, f64::min);
        if min > 0.0 {
            worst_ratio = worst_ratio.max(max / min);
        }
    }
    report.max_min_ratio_l2 = Some(worst_ratio);
    report.save(cfg)?;
    Ok(report)
}

/// Error sensitivity to σ (γ fixed) or to γ_div = γ_u = γ_p = γ (σ fixed).
/// Failures at extreme parameter values are logged and skipped.
pub fn run_param_sweep(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    cfg.validate()?;
    let (grid, is_sigma) = match cfg.sweep {
        SweepAxis::Sigma => (&cfg.sigma_grid, true),
        SweepAxis::Gamma => (&cfg.gamma_grid, false),
        _ => {
            return Err(StudyError::Config(
                "param sweep requires sweep = sigma or gamma".into(),
            ))
        }
    };
    let case = case_by_name(&cfg.case, cfg.theta0, cfg.alpha)
        .ok_or_else(|| StudyError::Config(format!("unknown case {:?}", cfg.case)))?;
    let mut report = StudyReport::default();
    for &n in &cfg.levels {
        for &value in grid {
            let mut point_cfg = cfg.clone();
            if is_sigma {
                point_cfg.sigma = value;
            } else {
                point_cfg.gamma_div = value;
                point_cfg.gamma_u = value;
                point_cfg.gamma_p = value;
            }
            match solve_level(&case, &point_cfg, n, cfg.compute_condition) {
                Ok(row) => report.rows.push(row),
                Err(e) => log::warn!("sweep point n = {n}, value = {value:e} failed: {e}"),
            }
        }
    }
    report.save(cfg)?;
    Ok(report)
}

/// Condition number κ₂ against h, with the fitted slope.
pub fn run_condition_study(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    let mut cfg = cfg.clone();
    cfg.compute_condition = true;
    cfg.validate()?;
    let case = case_by_name(&cfg.case, cfg.theta0, cfg.alpha)
        .ok_or_else(|| StudyError::Config(format!("unknown case {:?}", cfg.case)))?;
    let mut report = StudyReport::default();
    for &n in &cfg.levels {
        report.rows.push(solve_level(&case, &cfg, n, true)?);
    }
    fit_rates(&mut report);
    report.save(&cfg)?;
    Ok(report)
}

/// Robin-variant convergence plus condition column.
pub fn run_robin(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    let mut cfg = cfg.clone();
    cfg.case = "flower_robin".into();
    cfg.compute_condition = true;
    run_convergence(&cfg)
}
