//! Maximum-likelihood fitting of location/scale models.
//!
//! The location linear predictor is `X_loc · beta_loc`; the scale is
//! `sigma = exp(X_scale · beta_scale)`. Both coefficient blocks are optimised
//! jointly and the covariance is the inverse observed information at the
//! optimum.

mod design;
mod optimizer;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::family::{FamilyKind, LogLikGrad, Observation};
use crate::formula::{validate_spec, ModelSpec};

pub use self::design::{build_design_matrix, DesignMatrix, Encoding, INTERCEPT_LABEL};
pub use self::optimizer::{max_abs, minimize, numerical_hessian, Minimum, Objective, OptimizerSettings};

/// Prefix for scale coefficient labels in coefficient tables.
pub const SCALE_PREFIX: &str = "scale.";

const DEGENERATE_SCALE: &str = "degenerate scale";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    /// Location coefficients followed by scale coefficients.
    pub beta: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub log_lik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    /// Rows dropped because of missing values in referenced columns.
    pub n_dropped: usize,
    pub diagnostic: Option<String>,
    pub location_labels: Vec<String>,
    pub scale_labels: Vec<String>,
    pub encoding: Encoding,
    /// Dataset rows the model was fit on.
    pub rows: Vec<usize>,
}

impl FittedModel {
    pub fn n_location(&self) -> usize {
        self.location_labels.len()
    }

    pub fn beta_location(&self) -> &[f64] {
        &self.beta[..self.n_location()]
    }

    pub fn beta_scale(&self) -> &[f64] {
        &self.beta[self.n_location()..]
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.beta.len();
        DMatrix::from_fn(p, p, |i, j| self.covariance[i][j])
    }

    pub fn labels(&self) -> Vec<String> {
        self.location_labels
            .iter()
            .cloned()
            .chain(self.scale_labels.iter().map(|l| format!("{SCALE_PREFIX}{l}")))
            .collect()
    }

    pub fn label(&self) -> &str {
        &self.spec.label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
}

/// Estimates with standard errors from the covariance diagonal.
pub fn coefficient_table(m: &FittedModel) -> Result<Vec<Coefficient>> {
    if !m.converged {
        return Err(Error::NotConverged);
    }
    Ok(m.labels()
        .into_iter()
        .zip(&m.beta)
        .enumerate()
        .map(|(j, (label, &estimate))| Coefficient {
            label,
            estimate,
            std_error: m.covariance[j][j].max(0.0).sqrt(),
        })
        .collect())
}

/// Linear predictors for a set of rows: location eta and, where applicable, ln(sigma).
#[derive(Debug, Clone)]
pub(crate) struct Predictors {
    pub x_loc: DMatrix<f64>,
    pub x_scale: Option<DMatrix<f64>>,
}

impl Predictors {
    pub(crate) fn build(spec: &ModelSpec, encoding: &Encoding, d: &Dataset, rows: &[usize]) -> Result<Self> {
        let x_loc = encoding.design(d, &spec.location, rows)?.matrix;
        let x_scale = match spec.effective_scale() {
            Some(f) => Some(encoding.design(d, &f, rows)?.matrix),
            None => None,
        };
        Ok(Predictors { x_loc, x_scale })
    }

    pub fn eta(&self, beta: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let p = self.x_loc.ncols();
        let eta = &self.x_loc * DVector::from_column_slice(&beta[..p]);
        let log_sigma = match &self.x_scale {
            Some(xs) => xs * DVector::from_column_slice(&beta[p..]),
            None => DVector::zeros(self.x_loc.nrows()),
        };
        (eta, log_sigma)
    }
}

/// Negative log-likelihood of a family over a fixed design.
pub(crate) struct Problem {
    pub family: FamilyKind,
    pub obs: Vec<Observation>,
    pub predictors: Predictors,
    /// ln(sigma) below this on any row aborts with "degenerate scale".
    scale_floor: f64,
}

impl Problem {
    pub fn log_lik(&self, beta: &[f64]) -> f64 {
        let (eta, log_sigma) = self.predictors.eta(beta);
        self.obs
            .iter()
            .enumerate()
            .map(|(i, o)| self.family.log_lik_grad(o, eta[i], log_sigma[i]).value)
            .sum()
    }

    pub fn log_lik_grad(&self, beta: &[f64]) -> (f64, DVector<f64>) {
        let (eta, log_sigma) = self.predictors.eta(beta);
        let n = self.obs.len();
        let mut d_eta = DVector::zeros(n);
        let mut d_ls = DVector::zeros(n);
        let mut total = 0.0;
        for (i, o) in self.obs.iter().enumerate() {
            let LogLikGrad {
                value,
                d_eta: de,
                d_log_sigma: ds,
            } = self.family.log_lik_grad(o, eta[i], log_sigma[i]);
            total += value;
            d_eta[i] = de;
            d_ls[i] = ds;
        }
        let g_loc = self.predictors.x_loc.tr_mul(&d_eta);
        let grad = match &self.predictors.x_scale {
            Some(xs) => {
                let g_scale = xs.tr_mul(&d_ls);
                DVector::from_iterator(
                    g_loc.len() + g_scale.len(),
                    g_loc.iter().chain(g_scale.iter()).copied(),
                )
            }
            None => g_loc,
        };
        (total, grad)
    }
}

impl Objective for Problem {
    fn eval(&mut self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (ll, g) = self.log_lik_grad(x.as_slice());
        (-ll, -g)
    }

    fn abort_reason(&mut self, x: &DVector<f64>) -> Option<String> {
        if self.predictors.x_scale.is_some() {
            let (_, log_sigma) = self.predictors.eta(x.as_slice());
            if log_sigma.iter().any(|&s| s < self.scale_floor) {
                return Some(DEGENERATE_SCALE.into());
            }
        }
        if self.family == FamilyKind::Logistic {
            let (eta, _) = self.predictors.eta(x.as_slice());
            if eta.iter().any(|e| e.abs() > 20.0) {
                return Some("separation: fitted probabilities reach 0 or 1".into());
            }
        }
        None
    }
}

/// Outcome values as numbers; two-level text outcomes map alphabetically to 0/1.
pub(crate) fn outcome_values(d: &Dataset, spec: &ModelSpec) -> Result<Vec<Option<f64>>> {
    let col = d.column(spec.response())?;
    match &col.data {
        ColumnData::Numeric(v) => Ok(v.clone()),
        ColumnData::Text(v) if spec.family == FamilyKind::Logistic && col.ty.levels().len() == 2 => {
            let levels = col.ty.levels();
            Ok(v.iter()
                .map(|s| {
                    s.as_ref().map(|s| {
                        if levels[0].to_string() == *s {
                            0.0
                        } else {
                            1.0
                        }
                    })
                })
                .collect())
        }
        ColumnData::Text(_) => Err(Error::UndefinedLikelihood {
            family: spec.family.to_string(),
            rows: (0..d.n_rows()).filter(|&r| !col.data.is_missing(r)).collect(),
        }),
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn initial_beta(problem: &Problem, spec: &ModelSpec, ys: &[f64]) -> Vec<f64> {
    let p_loc = problem.predictors.x_loc.ncols();
    let p_scale = problem.predictors.x_scale.as_ref().map_or(0, |x| x.ncols());
    let mut beta = vec![0.0; p_loc + p_scale];
    let zs: Vec<f64> = problem.obs.iter().map(|o| o.z).collect();
    let (y_mean, _) = mean_sd(ys);
    let (z_mean, z_sd) = mean_sd(&zs);
    let family = spec.family;
    if spec.location.intercept {
        beta[0] = match family {
            FamilyKind::Normal | FamilyKind::LogNormal | FamilyKind::LogitNormal => z_mean,
            FamilyKind::Logistic => {
                let p = y_mean.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => y_mean.max(1e-6).ln(),
        };
    }
    if p_scale > 0 && spec.effective_scale().is_some_and(|s| s.intercept) {
        beta[p_loc] = match family {
            FamilyKind::NegativeBinomial => {
                let (m, sd) = mean_sd(ys);
                let m = m.max(1e-6);
                // Method of moments: var = m + m²/theta, sigma² = 1/theta.
                let phi = ((sd * sd - m) / (m * m)).max(0.01);
                0.5 * phi.ln()
            }
            _ if z_sd > 0.0 => z_sd.ln(),
            _ => problem.scale_floor - 1.0,
        };
    }
    beta
}

/// Fits `spec` on `d` by maximum likelihood.
///
/// Non-convergence is not an error: the returned model has
/// `converged == false` and a diagnostic, so a check can still be drawn.
pub fn fit_model(d: &Dataset, spec: &ModelSpec) -> Result<FittedModel> {
    fit_model_with(d, spec, OptimizerSettings::default())
}

pub fn fit_model_with(
    d: &Dataset,
    spec: &ModelSpec,
    settings: OptimizerSettings,
) -> Result<FittedModel> {
    let LikelihoodSurface {
        mut problem,
        ys,
        rows,
        n_dropped,
        encoding,
        location_labels,
        scale_labels,
    } = LikelihoodSurface::new(d, spec)?;
    if n_dropped > 0 {
        log::info!("{}: dropped {n_dropped} rows with missing values", spec.label);
    }

    let beta0 = initial_beta(&problem, spec, &ys);
    let min = minimize(&mut problem, DVector::from_vec(beta0), settings);
    let p = min.x.len();
    let info = numerical_hessian(&mut problem, &min.x);
    let covariance = invert_information(&info);
    let beta: Vec<f64> = min.x.iter().copied().collect();
    let log_lik = problem.log_lik(&beta);

    Ok(FittedModel {
        spec: spec.clone(),
        beta,
        covariance: (0..p)
            .map(|i| (0..p).map(|j| covariance[(i, j)]).collect())
            .collect(),
        log_lik,
        converged: min.converged,
        iterations: min.iterations,
        n_obs: rows.len(),
        n_dropped,
        diagnostic: min.diagnostic,
        location_labels,
        scale_labels,
        encoding,
        rows,
    })
}

/// Log-likelihood of `spec` over the complete rows of a dataset, as a
/// function of the joint coefficient vector (location then scale).
pub struct LikelihoodSurface {
    problem: Problem,
    ys: Vec<f64>,
    rows: Vec<usize>,
    n_dropped: usize,
    encoding: Encoding,
    location_labels: Vec<String>,
    scale_labels: Vec<String>,
}

impl LikelihoodSurface {
    pub fn new(d: &Dataset, spec: &ModelSpec) -> Result<LikelihoodSurface> {
        validate_spec(spec, d)?;
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let rows = d.complete_rows(&spec.variables())?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n_dropped = d.n_rows() - rows.len();

        let outcome = outcome_values(d, spec)?;
        let ys: Vec<f64> = rows.iter().map(|&r| outcome[r].expect("complete row")).collect();
        let mut obs = Vec::with_capacity(ys.len());
        let mut offending = Vec::new();
        for (&r, &y) in rows.iter().zip(&ys) {
            match Observation::new(spec.family, y) {
                Some(o) => obs.push(o),
                None => offending.push(r),
            }
        }
        if !offending.is_empty() {
            return Err(Error::UndefinedLikelihood {
                family: spec.family.to_string(),
                rows: offending,
            });
        }

        let scale = spec.effective_scale();
        let mut formulas = vec![&spec.location];
        if let Some(s) = &scale {
            formulas.push(s);
        }
        let encoding = Encoding::learn(d, &formulas, &rows)?;
        let loc_design = encoding.design(d, &spec.location, &rows)?;
        let scale_design = match &scale {
            Some(f) => Some(encoding.design(d, f, &rows)?),
            None => None,
        };

        let (_, z_sd) = mean_sd(&obs.iter().map(|o| o.z).collect::<Vec<_>>());
        let scale_floor = (1e-9 * z_sd.max(f64::MIN_POSITIVE)).ln().max(-700.0);
        let problem = Problem {
            family: spec.family,
            obs,
            predictors: Predictors {
                x_loc: loc_design.matrix,
                x_scale: scale_design.as_ref().map(|s| s.matrix.clone()),
            },
            scale_floor,
        };
        Ok(LikelihoodSurface {
            problem,
            ys,
            rows,
            n_dropped,
            encoding,
            location_labels: loc_design.labels,
            scale_labels: scale_design.map(|s| s.labels).unwrap_or_default(),
        })
    }

    /// Length of the coefficient vector.
    pub fn dim(&self) -> usize {
        self.location_labels.len() + self.scale_labels.len()
    }

    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    pub fn log_lik(&self, beta: &[f64]) -> f64 {
        self.problem.log_lik(beta)
    }

    /// Log-likelihood and its analytic gradient.
    pub fn log_lik_grad(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let (ll, g) = self.problem.log_lik_grad(beta);
        (ll, g.iter().copied().collect())
    }
}

/// Inverse of the observed information, adding a 1e-8 ridge (growing
/// tenfold) when the plain inverse fails. Non-finite results become zeros.
fn invert_information(info: &DMatrix<f64>) -> DMatrix<f64> {
    let p = info.nrows();
    if info.iter().any(|v| !v.is_finite()) {
        return DMatrix::zeros(p, p);
    }
    let mut ridge = 0.0;
    for _ in 0..12 {
        let m = info + DMatrix::identity(p, p) * ridge;
        if let Some(chol) = m.cholesky() {
            let inv = chol.inverse();
            let sym = (&inv + inv.transpose()) * 0.5;
            if sym.iter().all(|v| v.is_finite()) {
                return sym;
            }
        }
        ridge = if ridge == 0.0 { 1e-8 } else { ridge * 10.0 };
    }
    DMatrix::zeros(p, p)
}
