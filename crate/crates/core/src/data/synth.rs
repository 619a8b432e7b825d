//! Seeded multi-domain Gaussian data.
//!
//! Every class has a base mean on a random unit direction scaled by
//! `class_separation`. Each domain applies its own affine map to the class
//! means: a diagonal scale `exp(0.25·shift·w)` and a translation of norm
//! `shift` along a random direction. Samples add isotropic noise.
//!
//! Random draws do not depend on `domain_shift_scale`, so the same seed at a
//! larger shift moves the same domains further apart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DomainDataset, DomainId};
use crate::error::{Error, Result};
use crate::neuralcore::Matrix;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Subjects per session.
    pub num_domains: usize,
    pub samples_per_domain: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub class_separation: f64,
    pub domain_shift_scale: f64,
    pub noise_std: f64,
    pub rng_seed: u64,
    #[serde(default = "one")]
    pub num_sessions: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_domains: 5,
            samples_per_domain: 600,
            num_classes: 3,
            feature_dim: 310,
            class_separation: 3.0,
            domain_shift_scale: 1.0,
            noise_std: 1.0,
            rng_seed: 0,
            num_sessions: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_domains == 0
            || self.samples_per_domain == 0
            || self.feature_dim == 0
            || self.num_sessions == 0
        {
            return Err(Error::validation("synthetic counts must be >= 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::validation(
                "synthetic data needs at least two classes",
            ));
        }
        for (name, v) in [
            ("class_separation", self.class_separation),
            ("domain_shift_scale", self.domain_shift_scale),
            ("noise_std", self.noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v = gaussian_vec(rng, dim);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x / norm).collect()
}

/// Domains ordered session-major; ids are `(session, subject)`, both 1-based.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<DomainDataset>> {
    config.validate()?;
    let dim = config.feature_dim;
    let stream_rng = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(stream);
        rng
    };

    let mut class_rng = stream_rng(0);
    let class_means: Vec<Vec<f64>> = (0..config.num_classes)
        .map(|_| {
            unit_vec(&mut class_rng, dim)
                .into_iter()
                .map(|x| x * config.class_separation)
                .collect()
        })
        .collect();

    let total = config.num_sessions * config.num_domains;
    let mut out = Vec::with_capacity(total);
    for d in 0..total {
        let mut shape_rng = stream_rng(1 + 2 * d as u64);
        let shift_dir = unit_vec(&mut shape_rng, dim);
        let log_scale = gaussian_vec(&mut shape_rng, dim);
        let s = config.domain_shift_scale;
        let scale: Vec<f64> = log_scale.iter().map(|w| (0.25 * s * w).exp()).collect();
        let shifted_means: Vec<Vec<f64>> = class_means
            .iter()
            .map(|mu| {
                mu.iter()
                    .zip(&scale)
                    .zip(&shift_dir)
                    .map(|((m, k), u)| k * m + s * u)
                    .collect()
            })
            .collect();

        let mut sample_rng = stream_rng(2 + 2 * d as u64);
        let n = config.samples_per_domain;
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % config.num_classes;
            labels.push(c);
            for &m in &shifted_means[c] {
                let e: f64 = sample_rng.sample(StandardNormal);
                data.push(m + config.noise_std * e);
            }
        }
        let id = DomainId::new(
            (d / config.num_domains) as u32 + 1,
            (d % config.num_domains) as u32 + 1,
        );
        out.push(DomainDataset::new(
            Matrix::new(n, dim, data)?,
            labels,
            id,
            config.num_classes,
        )?);
    }
    Ok(out)
}
