//! Box-constrained CMA-ES with the standard rank-μ update and cumulative
//! step-size adaptation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct CmaEs {
    pub mean: DVector<f64>,
    pub sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    path_c: DVector<f64>,
    path_s: DVector<f64>,
    weights: Vec<f64>,
    mueff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    pub generation: usize,
    lambda: usize,
}

impl CmaEs {
    pub fn new(mean: DVector<f64>, sigma: f64, lambda: usize) -> Self {
        let n = mean.len();
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
        let cs = (mueff + 2.0) / (nf + mueff + 5.0);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self {
            mean,
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            path_c: DVector::zeros(n),
            path_s: DVector::zeros(n),
            weights,
            mueff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            generation: 0,
            lambda,
        }
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// One sample from `N(mean, sigma² C)`, clamped to `[-1, 1]`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let n = self.mean.len();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &self.basis * z.component_mul(&self.scales);
        (&self.mean + y * self.sigma).map(|v| v.clamp(-1.0, 1.0))
    }

    /// Updates from the batch ordered best first; uses the clamped samples.
    pub fn tell(&mut self, ranked: &[DVector<f64>]) {
        assert_eq!(ranked.len(), self.lambda, "full batch required");
        let n = self.mean.len() as f64;
        let ys: Vec<DVector<f64>> = ranked.iter().take(self.weights.len()).map(|x| (x - &self.mean) / self.sigma).collect();
        let mut yw = DVector::zeros(self.mean.len());
        for (w, y) in self.weights.iter().zip(&ys) {
            yw += y * *w;
        }
        self.mean = (&self.mean + &yw * self.sigma).map(|v| v.clamp(-1.0, 1.0));
        let inv_sqrt = &self.basis * DMatrix::from_diagonal(&self.scales.map(|d| 1.0 / d)) * self.basis.transpose();
        self.path_s = &self.path_s * (1.0 - self.cs) + inv_sqrt * &yw * (self.cs * (2.0 - self.cs) * self.mueff).sqrt();
        self.generation += 1;
        let norm_ps = self.path_s.norm();
        let hsig = norm_ps / (1.0 - (1.0 - self.cs).powi(2 * self.generation as i32)).sqrt() < (1.4 + 2.0 / (n + 1.0)) * self.chi_n;
        let h = if hsig { 1.0 } else { 0.0 };
        self.path_c = &self.path_c * (1.0 - self.cc) + &yw * (h * (self.cc * (2.0 - self.cc) * self.mueff).sqrt());
        let mut rank_mu = DMatrix::zeros(self.mean.len(), self.mean.len());
        for (w, y) in self.weights.iter().zip(&ys) {
            rank_mu += y * y.transpose() * *w;
        }
        let rank_one = &self.path_c * self.path_c.transpose() + &self.cov * ((1.0 - h) * self.cc * (2.0 - self.cc));
        self.cov = &self.cov * (1.0 - self.c1 - self.cmu) + rank_one * self.c1 + rank_mu * self.cmu;
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        self.sigma *= ((self.cs / self.damps) * (norm_ps / self.chi_n - 1.0)).exp();
        let eig = SymmetricEigen::new(self.cov.clone());
        self.basis = eig.eigenvectors;
        self.scales = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
    }

    /// Condition number of the covariance.
    pub fn condition(&self) -> f64 {
        let max = self.scales.max();
        let min = self.scales.min();
        (max / min).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn minimizes_shifted_sphere() {
        let target = DVector::from_vec(vec![0.3, -0.2, 0.1, 0.5, -0.6, 0.0]);
        let mut es = CmaEs::new(DVector::zeros(6), 0.3, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let mut xs: Vec<DVector<f64>> = (0..12).map(|_| es.sample(&mut rng)).collect();
            xs.sort_by(|a, b| (a - &target).norm().total_cmp(&(b - &target).norm()));
            es.tell(&xs);
        }
        assert!((&es.mean - &target).norm() < 1e-6, "{}", es.mean);
        assert!(es.sigma < 1e-4);
    }

    #[test]
    fn samples_stay_in_the_box() {
        let es = CmaEs::new(DVector::from_element(7, 0.99), 2.0, 36);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            assert!(es.sample(&mut rng).iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
