//! Full-covariance colour Gaussian mixtures fitted by EM.

use crate::clustering::{kmeans_fit, sq_dist};
use crate::error::{Error, Result};
use crate::raster::Color;

pub type Mat3 = [[f64; 3]; 3];

pub const DEFAULT_COMPONENTS: usize = 5;
pub const DEFAULT_REG_EPS: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 20;
pub const DEFAULT_TOL: f64 = 1e-5;
/// Responsibility mass below which a component is re-seeded.
pub const STARVED_MASS: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
struct Component {
    weight: f64,
    mean: Color,
    cov: Mat3,
    chol: Mat3,
    /// `ln w - 1.5 ln 2π - 0.5 ln |Σ|`, or `-inf` for a zero weight.
    log_norm: f64,
}

fn cholesky(a: &Mat3) -> Option<Mat3> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

impl Component {
    fn new(weight: f64, mean: Color, cov: Mat3) -> Result<Self> {
        let symmetric = (0..3).all(|i| (0..3).all(|j| cov[i][j] == cov[j][i]));
        let chol = cholesky(&cov)
            .filter(|_| symmetric)
            .ok_or_else(|| Error::ModelDegenerate(format!("covariance {cov:?} is not SPD")))?;
        let log_det = 2.0 * (chol[0][0].ln() + chol[1][1].ln() + chol[2][2].ln());
        Ok(Self {
            weight,
            mean,
            cov,
            chol,
            log_norm: weight.ln() - 1.5 * LN_2PI - 0.5 * log_det,
        })
    }

    /// `ln(w N(z | μ, Σ))`.
    fn log_term(&self, z: &Color) -> f64 {
        let l = &self.chol;
        let d = [
            z[0] - self.mean[0],
            z[1] - self.mean[1],
            z[2] - self.mean[2],
        ];
        let y0 = d[0] / l[0][0];
        let y1 = (d[1] - l[1][0] * y0) / l[1][1];
        let y2 = (d[2] - l[2][0] * y0 - l[2][1] * y1) / l[2][2];
        self.log_norm - 0.5 * (y0 * y0 + y1 * y1 + y2 * y2)
    }
}

/// Weighted sum of `K` Gaussians over unit RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    components: Vec<Component>,
    reg_eps: f64,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl GmmModel {
    /// Validates weights (non-negative, summing to 1 within 1e-9) and that
    /// every covariance is symmetric positive-definite. Covariances are used
    /// as given; `reg_eps` records the ridge the fitter adds.
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Color>,
        covariances: Vec<Mat3>,
        reg_eps: f64,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::ModelDegenerate(format!(
                "need matching non-empty parameter lists, got {k}/{}/{}",
                means.len(),
                covariances.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::ModelDegenerate(
                "negative or non-finite weight".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::ModelDegenerate(format!("weights sum to {total}")));
        }
        let components = weights
            .into_iter()
            .zip(means)
            .zip(covariances)
            .map(|((w, m), c)| Component::new(w, m, c))
            .collect::<Result<_>>()?;
        Ok(Self {
            components,
            reg_eps,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn reg_eps(&self) -> f64 {
        self.reg_eps
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn means(&self) -> Vec<Color> {
        self.components.iter().map(|c| c.mean).collect()
    }

    pub fn covariances(&self) -> Vec<Mat3> {
        self.components.iter().map(|c| c.cov).collect()
    }

    fn log_terms(&self, z: &Color, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.log_term(z);
        }
    }

    /// `ln Σ_l w_l N(z | μ_l, Σ_l)`, accumulated in the log domain.
    pub fn log_prob(&self, z: &Color) -> f64 {
        let mut terms = [0.0; 16];
        if self.k() <= terms.len() {
            self.log_terms(z, &mut terms[..self.k()]);
            log_sum_exp(&terms[..self.k()])
        } else {
            let mut terms = vec![0.0; self.k()];
            self.log_terms(z, &mut terms);
            log_sum_exp(&terms)
        }
    }

    /// Component responsibilities for `z`.
    pub fn posterior(&self, z: &Color) -> Vec<f64> {
        let mut terms = vec![0.0; self.k()];
        self.log_terms(z, &mut terms);
        let total = log_sum_exp(&terms);
        terms.iter().map(|t| (t - total).exp()).collect()
    }

    pub fn mean_log_likelihood(&self, pixels: &[Color]) -> f64 {
        pixels.iter().map(|z| self.log_prob(z)).sum::<f64>() / pixels.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmFitConfig {
    pub components: usize,
    pub max_iter: usize,
    /// Stop once the mean log-likelihood gains less than this per iteration.
    pub tol: f64,
    pub reg_eps: f64,
    pub seed: u64,
}

impl Default for GmmFitConfig {
    fn default() -> Self {
        Self {
            components: DEFAULT_COMPONENTS,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            reg_eps: DEFAULT_REG_EPS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: GmmModel,
    /// Mean log-likelihood of the initial model and of every accepted EM step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    /// Components re-seeded across the run.
    pub reseeded: usize,
}

/// Per-pixel responsibilities (row-major, `k` per pixel), per-pixel log
/// densities, and the mean log-likelihood.
fn e_step(model: &GmmModel, pixels: &[Color]) -> (Vec<f64>, Vec<f64>, f64) {
    let k = model.k();
    let mut resp = vec![0.0; pixels.len() * k];
    let mut dens = Vec::with_capacity(pixels.len());
    let mut total = 0.0;
    for (z, r) in pixels.iter().zip(resp.chunks_mut(k)) {
        model.log_terms(z, r);
        let lp = log_sum_exp(r);
        for v in r.iter_mut() {
            *v = (*v - lp).exp();
        }
        dens.push(lp);
        total += lp;
    }
    (resp, dens, total / pixels.len() as f64)
}

fn data_covariance(pixels: &[Color]) -> Mat3 {
    let n = pixels.len() as f64;
    let mut mean = [0.0; 3];
    for p in pixels {
        for c in 0..3 {
            mean[c] += p[c] / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for p in pixels {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
            }
        }
    }
    cov
}

/// Maximum-likelihood parameters from soft assignments, plus `reg_eps` on the
/// diagonal. Starved components move to the pixels listed in `reseed_order`.
fn m_step(
    pixels: &[Color],
    resp: &[f64],
    k: usize,
    reg_eps: f64,
    reseed_order: &[usize],
) -> Result<(GmmModel, usize)> {
    let n = pixels.len() as f64;
    let mut mass = vec![0.0; k];
    let mut sums = vec![[0.0; 3]; k];
    for (z, r) in pixels.iter().zip(resp.chunks(k)) {
        for l in 0..k {
            mass[l] += r[l];
            for c in 0..3 {
                sums[l][c] += r[l] * z[c];
            }
        }
    }
    let means: Vec<Color> = (0..k)
        .map(|l| {
            let m = mass[l].max(f64::MIN_POSITIVE);
            [sums[l][0] / m, sums[l][1] / m, sums[l][2] / m]
        })
        .collect();
    let mut covs = vec![[[0.0; 3]; 3]; k];
    for (z, r) in pixels.iter().zip(resp.chunks(k)) {
        for l in 0..k {
            if r[l] == 0.0 {
                continue;
            }
            let d = [z[0] - means[l][0], z[1] - means[l][1], z[2] - means[l][2]];
            for i in 0..3 {
                for j in i..3 {
                    covs[l][i][j] += r[l] * d[i] * d[j];
                }
            }
        }
    }

    let spread = data_covariance(pixels);
    let mut weights = Vec::with_capacity(k);
    let mut final_means = Vec::with_capacity(k);
    let mut final_covs = Vec::with_capacity(k);
    let mut reseeded = 0;
    for l in 0..k {
        let (w, mean, mut cov) = if mass[l] < STARVED_MASS {
            let target = reseed_order[reseeded % reseed_order.len()];
            reseeded += 1;
            (1.0 / n, pixels[target], spread)
        } else {
            let mut cov = covs[l];
            for row in cov.iter_mut() {
                for v in row.iter_mut() {
                    *v /= mass[l];
                }
            }
            for i in 0..3 {
                for j in 0..i {
                    cov[i][j] = cov[j][i];
                }
            }
            (mass[l] / n, means[l], cov)
        };
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] += reg_eps;
        }
        weights.push(w);
        final_means.push(mean);
        final_covs.push(cov);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok((
        GmmModel::new(weights, final_means, final_covs, reg_eps)?,
        reseeded,
    ))
}

/// Indices of the `count` pixels with the lowest log density, lowest first.
fn least_likely(dens: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dens.len()).collect();
    idx.sort_by(|&a, &b| dens[a].total_cmp(&dens[b]).then(a.cmp(&b)));
    idx.truncate(count.max(1));
    idx
}

/// KMeans-initialised EM.
pub fn fit(pixels: &[Color], cfg: &GmmFitConfig) -> Result<FitReport> {
    let k = cfg.components;
    if k == 0 || cfg.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "components and max_iter must be >= 1".into(),
        ));
    }
    if pixels.len() < k {
        return Err(Error::DegenerateInput(format!(
            "{} pixels cannot support {k} components",
            pixels.len()
        )));
    }
    let clusters = kmeans_fit(pixels, k, cfg.seed, 50, 1e-4)?;
    let mut resp = vec![0.0; pixels.len() * k];
    for (i, &a) in clusters.assignment.iter().enumerate() {
        resp[i * k + a] = 1.0;
    }
    // Empty clusters seed at the pixels worst served by their centroid.
    let misfit: Vec<f64> = pixels
        .iter()
        .zip(&clusters.assignment)
        .map(|(p, &a)| -sq_dist(p, &clusters.centroids[a]))
        .collect();
    let (model, reseeded) = m_step(pixels, &resp, k, cfg.reg_eps, &least_likely(&misfit, k))?;
    let mut report = refit(&model, pixels, cfg)?;
    report.reseeded += reseeded;
    Ok(report)
}

/// EM warm-started from `initial`.
///
/// A step that would lower the mean log-likelihood is discarded and ends the
/// run, so the recorded trace is non-decreasing.
pub fn refit(initial: &GmmModel, pixels: &[Color], cfg: &GmmFitConfig) -> Result<FitReport> {
    if pixels.is_empty() {
        return Err(Error::EmptyInput("no pixels to fit".into()));
    }
    let k = initial.k();
    let mut model = initial.clone();
    let (mut resp, mut dens, mut ll) = e_step(&model, pixels);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut reseeded = 0;

    for _ in 0..cfg.max_iter {
        let (cand, fresh) = m_step(pixels, &resp, k, cfg.reg_eps, &least_likely(&dens, k))?;
        let (cand_resp, cand_dens, cand_ll) = e_step(&cand, pixels);
        if !(cand_ll >= ll) {
            break;
        }
        iterations += 1;
        reseeded += fresh;
        let gain = cand_ll - ll;
        model = cand;
        resp = cand_resp;
        dens = cand_dens;
        ll = cand_ll;
        trace.push(ll);
        if gain < cfg.tol {
            break;
        }
    }

    Ok(FitReport {
        model,
        log_likelihood: trace,
        iterations,
        reseeded,
    })
}
