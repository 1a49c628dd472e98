//! (μ/μ_w, λ)-CMA-ES with cumulative step-size adaptation and rank-one plus
//! rank-μ covariance updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Population size `4 + ⌊3 ln d⌋`.
pub fn default_lambda(d: usize) -> usize {
    4 + (3.0 * (d as f64).ln()).floor() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub step_size: f64,
    pub covariance: DMatrix<f64>,
    /// Evolution path of the step size.
    pub path_sigma: DVector<f64>,
    /// Evolution path of the covariance.
    pub path_c: DVector<f64>,
    pub generation: usize,
    pub lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl CmaState {
    pub fn new(mean: DVector<f64>, step_size: f64) -> Result<Self> {
        let d = mean.len();
        Self::with_lambda(mean, step_size, default_lambda(d))
    }

    pub fn with_lambda(mean: DVector<f64>, step_size: f64, lambda: usize) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::Empty("search space"));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {step_size}")));
        }
        if lambda < 2 {
            return Err(Error::InvalidConfig(format!("population size must be at least 2, got {lambda}")));
        }
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Ok(Self {
            mean,
            step_size,
            covariance: DMatrix::identity(n, n),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            generation: 0,
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mu(&self) -> usize {
        self.weights.len()
    }

    fn eigen(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let eig = SymmetricEigen::new(self.covariance.clone());
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(min));
        }
        Ok((eig.eigenvectors, eig.eigenvalues))
    }

    /// `λ` candidates `mean + step_size·C^{1/2}·N(0, I)`.
    pub fn ask(&self, rng: &mut impl Rng) -> Result<Vec<DVector<f64>>> {
        let (b, ev) = self.eigen()?;
        let sqrt_d = ev.map(f64::sqrt);
        Ok((0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
                &self.mean + self.step_size * (&b * z.component_mul(&sqrt_d))
            })
            .collect())
    }

    /// Updates the distribution from one generation. Only the ranking of
    /// `losses` matters.
    pub fn tell(&mut self, candidates: &[DVector<f64>], losses: &[f64]) -> Result<()> {
        if candidates.len() != self.lambda || losses.len() != self.lambda {
            return Err(Error::ShapeMismatch {
                expected: vec![self.lambda],
                actual: vec![candidates.len(), losses.len()],
            });
        }
        if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLoss(i));
        }
        let n = self.dim() as f64;
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));

        let ys: Vec<DVector<f64>> =
            order[..self.mu()].iter().map(|&i| (&candidates[i] - &self.mean) / self.step_size).collect();
        let y_w = ys.iter().zip(&self.weights).fold(DVector::zeros(self.dim()), |acc, (y, w)| acc + y * *w);
        self.mean += self.step_size * &y_w;

        let (b, ev) = self.eigen()?;
        let inv_sqrt_c = &b * DMatrix::from_diagonal(&ev.map(|e| 1.0 / e.sqrt())) * b.transpose();
        let cs = self.c_sigma;
        self.path_sigma = (1.0 - cs) * &self.path_sigma + (cs * (2.0 - cs) * self.mu_eff).sqrt() * (inv_sqrt_c * &y_w);
        let ps_norm = self.path_sigma.norm();
        let gen = (self.generation + 1) as f64;
        let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * gen)).sqrt() / self.chi_n < 1.4 + 2.0 / (n + 1.0);
        let hs = if h_sigma { 1.0 } else { 0.0 };
        let cc = self.c_c;
        self.path_c = (1.0 - cc) * &self.path_c + hs * (cc * (2.0 - cc) * self.mu_eff).sqrt() * &y_w;

        let delta_h = (1.0 - hs) * cc * (2.0 - cc);
        let rank_one = &self.path_c * self.path_c.transpose();
        let rank_mu = ys
            .iter()
            .zip(&self.weights)
            .fold(DMatrix::zeros(self.dim(), self.dim()), |acc, (y, w)| acc + *w * (y * y.transpose()));
        self.covariance = (1.0 + self.c_1 * delta_h - self.c_1 - self.c_mu) * &self.covariance
            + self.c_1 * rank_one
            + self.c_mu * rank_mu;
        // Keep exact symmetry against rounding drift.
        self.covariance = (&self.covariance + self.covariance.transpose()) * 0.5;

        self.step_size *= ((cs / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        Ok(())
    }
}
