//! Bayesian linear regression: the exact Gaussian posterior, the two
//! sample-then-optimize samplers, and the posterior-std versus
//! density-pseudocount comparison for a linear bandit.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_dim, Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Prior `θ ~ N(prior_mean, prior_scale · I)`, observations
/// `y = xᵀθ + N(0, noise_variance)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianModel {
    prior_mean: DVector<f64>,
    prior_scale: f64,
    noise_variance: f64,
}

impl LinearGaussianModel {
    pub fn new(prior_mean: DVector<f64>, prior_scale: f64, noise_variance: f64) -> Result<Self> {
        if prior_mean.is_empty() {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(prior_scale > 0.0 && noise_variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior scale ({prior_scale}) and noise variance ({noise_variance}) must be positive"
            )));
        }
        Ok(Self {
            prior_mean,
            prior_scale,
            noise_variance,
        })
    }

    /// Zero prior mean in `dim` dimensions.
    pub fn isotropic(dim: usize, prior_scale: f64, noise_variance: f64) -> Result<Self> {
        Self::new(DVector::zeros(dim), prior_scale, noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.prior_mean.len()
    }

    pub fn prior_mean(&self) -> &DVector<f64> {
        &self.prior_mean
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// `σ²/λ`, the weight of the prior term in the regularized fits.
    pub fn ridge(&self) -> f64 {
        self.noise_variance / self.prior_scale
    }
}

/// Design matrix (one row per observation) and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        ensure_dim("dataset rows", x.nrows(), y.len())?;
        Ok(Self { x, y })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            x: DMatrix::zeros(0, dim),
            y: DVector::zeros(0),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        for r in rows {
            ensure_dim("dataset row", d, r.len())?;
        }
        let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(x, DVector::from_column_slice(y))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Each row repeated `times` times (block-wise).
    pub fn repeated(&self, times: usize) -> Self {
        let n = self.len();
        let x = DMatrix::from_fn(n * times, self.x.ncols(), |i, j| self.x[(i % n, j)]);
        let y = DVector::from_fn(n * times, |i, _| self.y[i % n]);
        Self { x, y }
    }

    /// Rows reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let x = DMatrix::from_fn(perm.len(), self.x.ncols(), |i, j| self.x[(perm[i], j)]);
        let y = DVector::from_fn(perm.len(), |i, _| self.y[perm[i]]);
        Self { x, y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianPosterior {
    /// `√(xᵀ Σ x)`: standard deviation of `xᵀθ` under the posterior.
    pub fn linear_std(&self, x: &DVector<f64>) -> f64 {
        (x.dot(&(&self.covariance * x))).max(0.0).sqrt()
    }
}

fn check_dims(model: &LinearGaussianModel, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Ok(());
    }
    ensure_dim("dataset columns", model.dim(), data.x.ncols())
}

fn cholesky(a: DMatrix<f64>) -> Cholesky<f64, Dyn> {
    // Always SPD: a ridge term with positive weight is added to XᵀX.
    Cholesky::new(a).expect("ridge-regularized Gram matrix is positive definite")
}

/// Exact posterior of `θ` given the data.
pub fn exact_posterior(model: &LinearGaussianModel, data: &Dataset) -> Result<GaussianPosterior> {
    check_dims(model, data)?;
    let d = model.dim();
    let inv_noise = 1.0 / model.noise_variance;
    let mut precision = DMatrix::identity(d, d) / model.prior_scale;
    let mut rhs = &model.prior_mean / model.prior_scale;
    if !data.is_empty() {
        precision += data.x.transpose() * &data.x * inv_noise;
        rhs += data.x.transpose() * &data.y * inv_noise;
    }
    let chol = cholesky(precision);
    let mean = chol.solve(&rhs);
    let mut covariance = chol.inverse();
    // Symmetrize away round-off.
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(GaussianPosterior { mean, covariance })
}

/// The random ingredients shared by both samplers: perturbed targets
/// `ỹ ~ N(y, σ²)` and a prior draw `θ̃ ~ N(θ̄, λI)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub targets: DVector<f64>,
    pub prior_draw: DVector<f64>,
}

impl Perturbation {
    pub fn draw(model: &LinearGaussianModel, data: &Dataset, seed: u64) -> Self {
        let mut noise_rng = rng_from_seed(derive_seed(seed, 0, "target-noise"));
        let mut prior_rng = rng_from_seed(derive_seed(seed, 0, "prior-draw"));
        let sd = model.noise_variance.sqrt();
        let targets = data.y.map(|y| {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            y + sd * z
        });
        let sp = model.prior_scale.sqrt();
        let prior_draw = model.prior_mean.map(|m| {
            let z: f64 = StandardNormal.sample(&mut prior_rng);
            m + sp * z
        });
        Self {
            targets,
            prior_draw,
        }
    }

    /// The noiseless perturbation `ỹ = y`, `θ̃ = θ̄`.
    pub fn noiseless(model: &LinearGaussianModel, data: &Dataset) -> Self {
        Self {
            targets: data.y.clone(),
            prior_draw: model.prior_mean.clone(),
        }
    }
}

fn ridge_solve(model: &LinearGaussianModel, data: &Dataset, rhs: DVector<f64>) -> DVector<f64> {
    let d = model.dim();
    let mut gram = DMatrix::identity(d, d) * model.ridge();
    if !data.is_empty() {
        gram += data.x.transpose() * &data.x;
    }
    cholesky(gram).solve(&rhs)
}

/// `argmin_θ Σ (ỹᵢ − xᵢᵀθ)² + (σ²/λ)‖θ̃ − θ‖²`.
pub fn regularized_fit(
    model: &LinearGaussianModel,
    data: &Dataset,
    noise: &Perturbation,
) -> Result<DVector<f64>> {
    check_dims(model, data)?;
    ensure_dim("perturbed targets", data.len(), noise.targets.len())?;
    ensure_dim("prior draw", model.dim(), noise.prior_draw.len())?;
    if data.is_empty() {
        return Ok(noise.prior_draw.clone());
    }
    let rhs = data.x.transpose() * &noise.targets + &noise.prior_draw * model.ridge();
    Ok(ridge_solve(model, data, rhs))
}

/// `θ̃ + argmin_θ Σ (ỹᵢ − xᵢᵀ(θ̃ + θ))² + (σ²/λ)‖θ‖²`.
pub fn prior_function_fit(
    model: &LinearGaussianModel,
    data: &Dataset,
    noise: &Perturbation,
) -> Result<DVector<f64>> {
    check_dims(model, data)?;
    ensure_dim("perturbed targets", data.len(), noise.targets.len())?;
    ensure_dim("prior draw", model.dim(), noise.prior_draw.len())?;
    if data.is_empty() {
        return Ok(noise.prior_draw.clone());
    }
    let residual = &noise.targets - &data.x * &noise.prior_draw;
    let rhs = data.x.transpose() * residual;
    Ok(&noise.prior_draw + ridge_solve(model, data, rhs))
}

/// Posterior sample by fitting perturbed data with an L2 pull toward a prior
/// draw.
pub fn sample_via_regularized_fit(
    model: &LinearGaussianModel,
    data: &Dataset,
    seed: u64,
) -> Result<DVector<f64>> {
    regularized_fit(model, data, &Perturbation::draw(model, data, seed))
}

/// Posterior sample as a prior function plus a ridge-regularized additive fit.
pub fn sample_via_prior_function(
    model: &LinearGaussianModel,
    data: &Dataset,
    seed: u64,
) -> Result<DVector<f64>> {
    prior_function_fit(model, data, &Perturbation::draw(model, data, seed))
}

/// Empirical mean and (unbiased) covariance of a set of samples.
pub fn sample_moments(samples: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = samples.len();
    let d = samples[0].len();
    let mut mean = DVector::zeros(d);
    for s in samples {
        mean += s;
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let c = s - &mean;
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    (mean, cov)
}

/// Componentwise moment agreement between Monte Carlo samples and a target
/// Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub samples: usize,
    /// `|sample mean − mean| / standard error`, per component.
    pub mean_z: Vec<f64>,
    /// `‖Σ̂ − Σ‖_F / ‖Σ‖_F`.
    pub covariance_rel_error: f64,
}

impl MomentReport {
    pub fn compare(samples: &[DVector<f64>], target: &GaussianPosterior) -> Self {
        let (mean, cov) = sample_moments(samples);
        let n = samples.len() as f64;
        let mean_z = (0..mean.len())
            .map(|i| (mean[i] - target.mean[i]).abs() / (target.covariance[(i, i)] / n).sqrt())
            .collect();
        let covariance_rel_error = (&cov - &target.covariance).norm() / target.covariance.norm();
        Self {
            samples: samples.len(),
            mean_z,
            covariance_rel_error,
        }
    }

    pub fn max_mean_z(&self) -> f64 {
        self.mean_z.iter().cloned().fold(0.0, f64::max)
    }
}

/// Posterior reward uncertainty and density-based bonus at one probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BonusProbe {
    pub posterior_reward_std: f64,
    pub pseudocount_bonus: f64,
}

/// Maximum-likelihood Gaussian density fitted to the rows of `x`, with
/// `1e-6·I` added to the covariance.
#[derive(Clone, Debug)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianDensity {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = (x.nrows(), x.ncols());
        if n == 0 {
            return Err(Error::InvalidArgument(
                "density fit needs observations".into(),
            ));
        }
        let mean = DVector::from_fn(d, |j, _| x.column(j).mean());
        let mut cov = DMatrix::identity(d, d) * 1e-6;
        for i in 0..n {
            let c = x.row(i).transpose() - &mean;
            cov += &c * c.transpose() / n as f64;
        }
        let chol = cholesky(cov);
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            mean,
            precision: chol.inverse(),
            log_norm,
        })
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let c = x - &self.mean;
        self.log_norm - 0.5 * c.dot(&(&self.precision * &c))
    }
}

/// For each probe: `√(xᵀΣx)` under the posterior and the pseudocount bonus
/// `1/√(n·p̂(x))`, computed in log space so far-away probes yield large but
/// finite bonuses where representable.
pub fn bonus_comparison(
    posterior: &GaussianPosterior,
    data: &Dataset,
    probes: &[DVector<f64>],
) -> Result<Vec<BonusProbe>> {
    let d = posterior.mean.len();
    let density = GaussianDensity::fit(&data.x)?;
    let log_n = (data.len() as f64).ln();
    probes
        .iter()
        .map(|x| {
            ensure_dim("probe", d, x.len())?;
            Ok(BonusProbe {
                posterior_reward_std: posterior.linear_std(x),
                pseudocount_bonus: (-0.5 * (log_n + density.log_density(x))).exp(),
            })
        })
        .collect()
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}

/// Both samplers checked against the exact posterior on one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct SanityReport {
    pub posterior: GaussianPosterior,
    pub regularized: MomentReport,
    pub prior_function: MomentReport,
    /// Largest coordinate gap between the two samplers under shared noise.
    pub max_pathwise_gap: f64,
}

/// `n` standard-normal inputs in `d` dimensions, targets from a prior draw of
/// `θ`, then `draws` samples from each sampler.
pub fn linear_sanity(
    model: &LinearGaussianModel,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<SanityReport> {
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let d = model.dim();
    let mut rng = rng_from_seed(derive_seed(seed, 0, "data"));
    let sp = model.prior_scale.sqrt();
    let truth = model.prior_mean.map(|m| {
        let z: f64 = StandardNormal.sample(&mut rng);
        m + sp * z
    });
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let x = DMatrix::from_fn(n, d, |_, _| normal());
    let sd = model.noise_variance.sqrt();
    let y = &x * &truth + DVector::from_fn(n, |_, _| sd * normal());
    let data = Dataset::new(x, y)?;
    let posterior = exact_posterior(model, &data)?;
    let mut a = Vec::with_capacity(draws);
    let mut b = Vec::with_capacity(draws);
    let mut gap: f64 = 0.0;
    for i in 0..draws {
        let noise = Perturbation::draw(model, &data, derive_seed(seed, i as u64, "draw"));
        let ra = regularized_fit(model, &data, &noise)?;
        let rb = prior_function_fit(model, &data, &noise)?;
        gap = gap.max((&ra - &rb).amax());
        a.push(ra);
        // An independent stream for the second sampler's moments.
        b.push(sample_via_prior_function(
            model,
            &data,
            derive_seed(seed, i as u64, "draw-b"),
        )?);
    }
    Ok(SanityReport {
        regularized: MomentReport::compare(&a, &posterior),
        prior_function: MomentReport::compare(&b, &posterior),
        posterior,
        max_pathwise_gap: gap,
    })
}

/// A linear bandit whose 50 observed actions cluster at `2·e₁`, probed on a
/// 9×9 grid over `[−2, 2]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Misalignment {
    pub probes: Vec<DVector<f64>>,
    pub signals: Vec<BonusProbe>,
    /// Spearman correlation of posterior std and pseudocount bonus.
    pub rank_correlation: f64,
    /// A probe pair the two signals order oppositely, if any.
    pub discordant_pair: Option<(usize, usize)>,
}

pub fn misalignment_case(seed: u64) -> Result<Misalignment> {
    let model = LinearGaussianModel::isotropic(2, 1.0, 1.0)?;
    let mut rng = rng_from_seed(derive_seed(seed, 0, "actions"));
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            vec![2.0 + 0.1 * a, 0.1 * b]
        })
        .collect();
    let theta = [1.0, -0.5];
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| {
            let z: f64 = StandardNormal.sample(&mut rng);
            r[0] * theta[0] + r[1] * theta[1] + z
        })
        .collect();
    let data = Dataset::from_rows(&rows, &ys)?;
    let posterior = exact_posterior(&model, &data)?;
    let grid: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
    let probes: Vec<DVector<f64>> = grid
        .iter()
        .flat_map(|&a| grid.iter().map(move |&b| DVector::from_vec(vec![a, b])))
        .collect();
    let signals = bonus_comparison(&posterior, &data, &probes)?;
    let std: Vec<f64> = signals.iter().map(|s| s.posterior_reward_std).collect();
    let bonus: Vec<f64> = signals.iter().map(|s| s.pseudocount_bonus).collect();
    let mut discordant_pair = None;
    'outer: for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            if (std[i] - std[j]) * (bonus[i] - bonus[j]) < 0.0 {
                discordant_pair = Some((i, j));
                break 'outer;
            }
        }
    }
    Ok(Misalignment {
        rank_correlation: spearman(&std, &bonus),
        probes,
        signals,
        discordant_pair,
    })
}
