//! The multi-branch network: a shared common extractor followed by one
//! (feature extractor, classifier) pair per source domain.
//!
//! During training every source batch and the target batch are stacked and sent
//! through the common extractor in a single pass. Each branch then sees its own
//! source rows stacked on top of the target rows, so every layer caches exactly
//! one input for the backward pass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, StepWeights};
use crate::error::{Error, Result};
use crate::losses::{
    classification_loss, discrepancy_loss, mmd_squared, total_loss, KernelSpec, LossBreakdown,
};
use crate::neuralcore::{
    adam_step_all, leaky_relu, leaky_relu_backward, softmax, softmax_backward, AdamConfig,
    LinearLayer, Matrix, Parameter, ParameterSet,
};

#[derive(Debug, Clone)]
pub struct Branch {
    /// Domain-specific feature extractor (linear + LeakyReLU).
    pub dsfe: LinearLayer,
    /// Domain-specific classifier (linear, no activation).
    pub dsc: LinearLayer,
}

#[derive(Debug, Clone)]
pub struct MsMdaModel {
    config: ModelConfig,
    pub cfe: Vec<LinearLayer>,
    pub branches: Vec<Branch>,
}

/// Features and labels of one source batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub breakdown: LossBreakdown,
    /// Squared MMD between each branch's source and target features.
    pub branch_mmd: Vec<f64>,
    /// Target-side DSFE output of every branch.
    pub branch_target_features: Vec<Matrix>,
    /// Fraction of source rows classified correctly by their own branch.
    pub source_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub avg_probs: Matrix,
    pub labels: Vec<usize>,
    pub per_branch_probs: Vec<Matrix>,
}

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    m.iter_rows()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

impl MsMdaModel {
    /// Initializes every layer from a generator seeded with `config.rng_seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mut cfe = Vec::with_capacity(config.cfe_dims.len());
        let mut width = config.input_dim;
        for &d in &config.cfe_dims {
            cfe.push(LinearLayer::new(width, d, &mut rng));
            width = d;
        }
        let branches = (0..config.num_branches)
            .map(|_| Branch {
                dsfe: LinearLayer::new(width, config.dsfe_dim, &mut rng),
                dsc: LinearLayer::new(config.dsfe_dim, config.num_classes, &mut rng),
            })
            .collect();
        Ok(Self {
            config,
            cfe,
            branches,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    fn check_features(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.config.input_dim {
            return Err(Error::validation(format!(
                "feature width {} does not match model input_dim {}",
                features.cols(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Common features without caching.
    fn common_features(&self, x: &Matrix) -> Result<Matrix> {
        let slope = self.config.leaky_slope;
        let mut h = x.clone();
        for layer in &self.cfe {
            h = leaky_relu(&layer.apply(&h)?, slope);
        }
        Ok(h)
    }

    fn branch_features(&self, common: &Matrix, branch: usize) -> Result<Matrix> {
        let b = &self.branches[branch];
        Ok(leaky_relu(&b.dsfe.apply(common)?, self.config.leaky_slope))
    }

    /// DSFE output of one branch, i.e. the input of that branch's classifier.
    pub fn extract_branch_features(&self, features: &Matrix, branch: usize) -> Result<Matrix> {
        if branch >= self.branches.len() {
            return Err(Error::validation(format!(
                "branch {branch} out of range for {} branches",
                self.branches.len()
            )));
        }
        self.check_features(features)?;
        self.branch_features(&self.common_features(features)?, branch)
    }

    /// Averages the branches' softmax outputs.
    pub fn predict(&self, features: &Matrix) -> Result<Prediction> {
        self.check_features(features)?;
        let common = self.common_features(features)?;
        let mut per_branch_probs = Vec::with_capacity(self.branches.len());
        let mut avg = Matrix::zeros(features.rows(), self.config.num_classes);
        for (i, b) in self.branches.iter().enumerate() {
            let r = self.branch_features(&common, i)?;
            let p = softmax(&b.dsc.apply(&r)?);
            avg.add_assign(&p)?;
            per_branch_probs.push(p);
        }
        avg.scale(1.0 / self.branches.len() as f64);
        let labels = argmax_rows(&avg);
        Ok(Prediction {
            avg_probs: avg,
            labels,
            per_branch_probs,
        })
    }

    /// Evaluates the full loss on one set of batches and accumulates every
    /// parameter gradient. Parameters are not updated.
    pub fn forward_backward(
        &mut self,
        sources: &[LabeledBatch],
        target: &Matrix,
        weights: StepWeights,
        kernel: &KernelSpec,
    ) -> Result<StepOutput> {
        self.run_step(sources, target, weights, kernel, true)
    }

    /// Evaluates the loss without touching gradients.
    pub fn loss(
        &mut self,
        sources: &[LabeledBatch],
        target: &Matrix,
        weights: StepWeights,
        kernel: &KernelSpec,
    ) -> Result<StepOutput> {
        self.run_step(sources, target, weights, kernel, false)
    }

    /// One optimization step: forward, backward, then Adam on every parameter.
    pub fn train_step(
        &mut self,
        sources: &[LabeledBatch],
        target: &Matrix,
        weights: StepWeights,
        kernel: &KernelSpec,
        adam: &AdamConfig,
    ) -> Result<StepOutput> {
        let out = self.forward_backward(sources, target, weights, kernel)?;
        adam_step_all(self, adam);
        Ok(out)
    }

    fn run_step(
        &mut self,
        sources: &[LabeledBatch],
        target: &Matrix,
        weights: StepWeights,
        kernel: &KernelSpec,
        backward: bool,
    ) -> Result<StepOutput> {
        let n_branches = self.branches.len();
        if sources.len() != n_branches {
            return Err(Error::validation(format!(
                "{} source batches for a model with {} branches",
                sources.len(),
                n_branches
            )));
        }
        for (i, s) in sources.iter().enumerate() {
            self.check_features(&s.features)?;
            if s.features.rows() != s.labels.len() || s.labels.is_empty() {
                return Err(Error::validation(format!(
                    "source batch {i}: {} rows but {} labels",
                    s.features.rows(),
                    s.labels.len()
                )));
            }
        }
        self.check_features(target)?;
        if target.rows() == 0 {
            return Err(Error::validation("empty target batch"));
        }
        let slope = self.config.leaky_slope;

        // Common extractor over every batch at once.
        let mut parts: Vec<&Matrix> = sources.iter().map(|s| &s.features).collect();
        parts.push(target);
        let stacked = Matrix::vstack(&parts)?;
        let mut cfe_pre = Vec::with_capacity(self.cfe.len());
        let mut h = stacked;
        for layer in &mut self.cfe {
            let pre = layer.forward(&h)?;
            h = leaky_relu(&pre, slope);
            cfe_pre.push(pre);
        }
        let common = h;
        let mut offsets = Vec::with_capacity(n_branches + 1);
        let mut acc = 0;
        for s in sources {
            offsets.push(acc);
            acc += s.features.rows();
        }
        let target_offset = acc;
        let target_rows = target.rows();
        let common_target = common.slice_rows(target_offset, target_offset + target_rows)?;

        // Branches.
        let mut dsfe_pre = Vec::with_capacity(n_branches);
        let mut mmd_outputs = Vec::with_capacity(n_branches);
        let mut source_logits = Vec::with_capacity(n_branches);
        let mut target_probs = Vec::with_capacity(n_branches);
        let mut branch_target_features = Vec::with_capacity(n_branches);
        let mut correct = 0usize;
        for (i, branch) in self.branches.iter_mut().enumerate() {
            let n_i = sources[i].features.rows();
            let common_source = common.slice_rows(offsets[i], offsets[i] + n_i)?;
            let input = Matrix::vstack(&[&common_source, &common_target])?;
            let pre = branch.dsfe.forward(&input)?;
            let r = leaky_relu(&pre, slope);
            let r_source = r.slice_rows(0, n_i)?;
            let r_target = r.slice_rows(n_i, n_i + target_rows)?;
            mmd_outputs.push(mmd_squared(&r_source, &r_target, kernel)?);
            let logits = branch.dsc.forward(&r)?;
            let ls = logits.slice_rows(0, n_i)?;
            correct += argmax_rows(&ls)
                .iter()
                .zip(&sources[i].labels)
                .filter(|(a, b)| a == b)
                .count();
            source_logits.push(ls);
            target_probs.push(softmax(&logits.slice_rows(n_i, n_i + target_rows)?));
            branch_target_features.push(r_target);
            dsfe_pre.push(pre);
        }

        let labels: Vec<&[usize]> = sources.iter().map(|s| s.labels.as_slice()).collect();
        let (cls, cls_grads) = classification_loss(&source_logits, &labels)?;
        let (disc, disc_grads) = discrepancy_loss(&target_probs)?;
        let branch_mmd: Vec<f64> = mmd_outputs.iter().map(|o| o.value).collect();
        let mmd: f64 = branch_mmd.iter().sum();
        let breakdown = total_loss(cls, mmd, disc, weights.alpha, weights.beta)?;
        let total_source: usize = sources.iter().map(|s| s.features.rows()).sum();
        let out = StepOutput {
            breakdown,
            branch_mmd,
            branch_target_features,
            source_accuracy: correct as f64 / total_source as f64,
        };
        if !backward {
            return Ok(out);
        }

        let mut grad_common = Matrix::zeros(common.rows(), common.cols());
        for (i, branch) in self.branches.iter_mut().enumerate() {
            let n_i = sources[i].features.rows();
            let mut g_target_logits = softmax_backward(&target_probs[i], &disc_grads[i])?;
            g_target_logits.scale(weights.beta);
            let g_logits = Matrix::vstack(&[&cls_grads[i], &g_target_logits])?;
            let mut g_r = branch.dsc.backward(&g_logits)?;
            let g_mmd =
                Matrix::vstack(&[&mmd_outputs[i].grad_source, &mmd_outputs[i].grad_target])?;
            g_r.add_scaled(&g_mmd, weights.alpha)?;
            let g_pre = leaky_relu_backward(&dsfe_pre[i], &g_r, slope)?;
            let g_in = branch.dsfe.backward(&g_pre)?;
            for r in 0..n_i {
                let dst = grad_common.row_mut(offsets[i] + r);
                for (d, s) in dst.iter_mut().zip(g_in.row(r)) {
                    *d += s;
                }
            }
            for r in 0..target_rows {
                let dst = grad_common.row_mut(target_offset + r);
                for (d, s) in dst.iter_mut().zip(g_in.row(n_i + r)) {
                    *d += s;
                }
            }
        }

        let mut g = grad_common;
        for (layer, pre) in self.cfe.iter_mut().zip(&cfe_pre).rev() {
            let g_pre = leaky_relu_backward(pre, &g, slope)?;
            g = layer.backward(&g_pre)?;
        }
        Ok(out)
    }
}

impl ParameterSet for MsMdaModel {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        for layer in &mut self.cfe {
            layer.visit_params(f);
        }
        for b in &mut self.branches {
            b.dsfe.visit_params(f);
            b.dsc.visit_params(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::neuralcore::gradcheck::{check_parameter_gradients, GradCheckConfig};
    use crate::neuralcore::softmax_cross_entropy;

    fn toy_config(branches: usize) -> ModelConfig {
        ModelConfig {
            input_dim: 5,
            cfe_dims: vec![6, 4],
            dsfe_dim: 3,
            num_classes: 3,
            num_branches: branches,
            leaky_slope: 0.01,
            rng_seed: 7,
        }
    }

    fn toy_batches(branches: usize, rows: usize, seed: u64) -> (Vec<LabeledBatch>, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sources = (0..branches)
            .map(|b| LabeledBatch {
                features: Matrix::from_fn(rows, 5, |_, _| {
                    rng.random_range(-1.0..1.0) + 0.2 * b as f64
                }),
                labels: (0..rows).map(|_| rng.random_range(0..3)).collect(),
            })
            .collect();
        let target = Matrix::from_fn(rows + 1, 5, |_, _| rng.random_range(-1.0..1.0) - 0.3);
        (sources, target)
    }

    #[test]
    fn default_architecture_dimensions() {
        let model = MsMdaModel::new(ModelConfig::default()).unwrap();
        assert_eq!(model.cfe.first().unwrap().in_dim(), 310);
        assert_eq!(model.cfe.last().unwrap().out_dim(), 64);
        assert_eq!(model.branches[0].dsfe.out_dim(), 32);
        assert_eq!(model.branches[0].dsc.out_dim(), 3);
    }

    #[test]
    fn seeded_init_is_reproducible_and_branches_independent() {
        let cfg = ModelConfig {
            num_branches: 14,
            ..toy_config(14)
        };
        let mut a = MsMdaModel::new(cfg.clone()).unwrap();
        let mut b = MsMdaModel::new(cfg).unwrap();
        let mut va = Vec::new();
        let mut vb = Vec::new();
        a.visit_params(&mut |p| va.push(p.value.clone()));
        b.visit_params(&mut |p| vb.push(p.value.clone()));
        assert_eq!(va, vb);
        assert_eq!(a.branches.len(), 14);
        assert_ne!(
            a.branches[0].dsfe.weight.value,
            a.branches[1].dsfe.weight.value
        );
    }

    #[test]
    fn full_loss_passes_gradient_check() {
        let (sources, target) = toy_batches(3, 4, 1);
        let weights = StepWeights {
            alpha: 0.7,
            beta: 0.3,
        };
        // the median heuristic is data dependent, so differentiate with fixed bandwidths
        for kernel in [KernelSpec::RbfFixed { bandwidth: 0.5 }, KernelSpec::Linear] {
            let mut model = MsMdaModel::new(toy_config(3)).unwrap();
            let report = check_parameter_gradients(
                &mut model,
                |m| {
                    Ok(m.forward_backward(&sources, &target, weights, &kernel)?
                        .breakdown
                        .total)
                },
                |m| Ok(m.loss(&sources, &target, weights, &kernel)?.breakdown.total),
                &GradCheckConfig::default(),
            )
            .unwrap();
            report.ensure("full model").unwrap();
        }
    }

    #[test]
    fn zero_weights_reduce_to_branch_classification() {
        let (sources, target) = toy_batches(2, 5, 2);
        let mut model = MsMdaModel::new(toy_config(2)).unwrap();
        let mut oracle = model.clone();
        let out = model
            .forward_backward(
                &sources,
                &target,
                StepWeights::default(),
                &KernelSpec::default(),
            )
            .unwrap();

        // classification-only reimplementation: each source through CFE and its branch
        let slope = 0.01;
        let mut cls = 0.0;
        for (i, s) in sources.iter().enumerate() {
            let mut pre_c = Vec::new();
            let mut h = s.features.clone();
            for layer in &mut oracle.cfe {
                let pre = layer.forward(&h).unwrap();
                h = leaky_relu(&pre, slope);
                pre_c.push(pre);
            }
            let b = &mut oracle.branches[i];
            let pre_d = b.dsfe.forward(&h).unwrap();
            let logits = b.dsc.forward(&leaky_relu(&pre_d, slope)).unwrap();
            let (loss, g) = softmax_cross_entropy(&logits, &s.labels).unwrap();
            cls += loss;
            let gr = b.dsc.backward(&g).unwrap();
            let mut gh = b
                .dsfe
                .backward(&leaky_relu_backward(&pre_d, &gr, slope).unwrap())
                .unwrap();
            for (layer, pre) in oracle.cfe.iter_mut().zip(&pre_c).rev() {
                gh = layer
                    .backward(&leaky_relu_backward(pre, &gh, slope).unwrap())
                    .unwrap();
            }
        }
        assert!((out.breakdown.total - cls).abs() < 1e-12);
        let mut ga = Vec::new();
        let mut gb = Vec::new();
        model.visit_params(&mut |p| ga.push(p.grad.clone()));
        oracle.visit_params(&mut |p| gb.push(p.grad.clone()));
        for (a, b) in ga.iter().zip(&gb) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn identical_source_and_target_have_no_mmd() {
        let (mut sources, _) = toy_batches(2, 6, 3);
        let target = sources[0].features.clone();
        sources[1].features = target.clone();
        let mut model = MsMdaModel::new(toy_config(2)).unwrap();
        let out = model
            .loss(
                &sources,
                &target,
                StepWeights {
                    alpha: 1.0,
                    beta: 0.0,
                },
                &KernelSpec::default(),
            )
            .unwrap();
        assert!(out.branch_mmd.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn train_step_advances_every_parameter_once() {
        let (sources, target) = toy_batches(3, 4, 4);
        let mut model = MsMdaModel::new(toy_config(3)).unwrap();
        model
            .train_step(
                &sources,
                &target,
                StepWeights {
                    alpha: 0.5,
                    beta: 0.005,
                },
                &KernelSpec::default(),
                &AdamConfig::default(),
            )
            .unwrap();
        model.visit_params(&mut |p| {
            assert_eq!(p.step_count, 1);
            assert!(p.value.is_finite());
            assert!(p.grad.data().iter().all(|&g| g == 0.0));
        });
    }

    #[test]
    fn branch_features_match_training_pass() {
        let (sources, target) = toy_batches(2, 4, 5);
        let mut model = MsMdaModel::new(toy_config(2)).unwrap();
        let out = model
            .loss(
                &sources,
                &target,
                StepWeights::default(),
                &KernelSpec::default(),
            )
            .unwrap();
        for b in 0..2 {
            let r = model.extract_branch_features(&target, b).unwrap();
            assert_eq!(r.cols(), 3);
            assert!(r.max_abs_diff(&out.branch_target_features[b]).unwrap() < 1e-12);
            assert_eq!(r, model.extract_branch_features(&target, b).unwrap());
        }
        assert!(model.extract_branch_features(&target, 2).is_err());
    }

    #[test]
    fn prediction_averages_branches() {
        let model = MsMdaModel::new(toy_config(3)).unwrap();
        let x = Matrix::from_fn(4, 5, |r, c| (r as f64 - c as f64) * 0.3);
        let p = model.predict(&x).unwrap();
        for r in 0..4 {
            let s: f64 = p.avg_probs.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            for c in 0..3 {
                let mean = p.per_branch_probs.iter().map(|m| m.get(r, c)).sum::<f64>() / 3.0;
                assert!((mean - p.avg_probs.get(r, c)).abs() < 1e-15);
            }
        }
        assert!(model.predict(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn argmax_ties_break_low() {
        let m = Matrix::new(2, 3, vec![0.5, 0.5, 0.0, 0.1, 0.3, 0.3]).unwrap();
        assert_eq!(argmax_rows(&m), vec![0, 1]);
    }

    #[test]
    fn branch_count_mismatch() {
        let (sources, target) = toy_batches(2, 3, 6);
        let mut model = MsMdaModel::new(toy_config(3)).unwrap();
        assert!(model
            .loss(
                &sources,
                &target,
                StepWeights::default(),
                &KernelSpec::default()
            )
            .is_err());
    }
}
