use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seeded source of complex Gaussian test data.
pub struct Lcg(ChaCha8Rng);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn complex(&mut self) -> Complex64 {
        Complex64::new(self.normal(), self.normal())
    }
}

pub fn random_matrix(rng: &mut Lcg, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.complex())
}
