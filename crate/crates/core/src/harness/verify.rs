//! Self-check suites over the invariants of every module, with fixed seeds.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{
    apply_multi_source_normalization, normalize, DomainDataset, DomainId, NormKind, NormOrder,
    NormalizationSpec,
};
use crate::error::{Error, Result};
use crate::losses::{
    alpha_schedule, discrepancy_loss, mmd_squared, mmd_squared_resolved, KernelSpec,
};
use crate::model::{LabeledBatch, ModelConfig, MsMdaModel, StepWeights};
use crate::neuralcore::{
    check_input_gradient, check_inputs_gradient, check_parameter_gradients, leaky_relu,
    leaky_relu_backward, relative_error, softmax, softmax_backward, softmax_cross_entropy,
    GradCheckConfig, GradCheckReport, LinearLayer, Matrix, ParameterSet,
};
use crate::oracle::mmd_brute_force;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Grad,
    MmdOracle,
    Norm,
    Schedule,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" => Ok(Suite::Grad),
            "mmd_oracle" | "mmd-oracle" => Ok(Suite::MmdOracle),
            "norm" => Ok(Suite::Norm),
            "schedule" => Ok(Suite::Schedule),
            "all" => Ok(Suite::All),
            other => Err(Error::validation(format!("unknown verify suite {other:?}"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Grad => "grad",
            Suite::MmdOracle => "mmd_oracle",
            Suite::Norm => "norm",
            Suite::Schedule => "schedule",
            Suite::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VerifyOptions {
    /// Added to every analytic gradient entry before comparison. Nonzero values
    /// exist to show that the grad suite detects wrong gradients.
    pub grad_perturbation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyItem {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    /// Worst observed error (relative or absolute, per check).
    pub max_error: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct VerifyReport {
    pub items: Vec<VerifyItem>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyItem> {
        self.items.iter().filter(|i| !i.passed)
    }

    fn push(&mut self, suite: Suite, name: impl Into<String>, max_error: f64, tolerance: f64) {
        self.items.push(VerifyItem {
            suite,
            name: name.into(),
            passed: max_error <= tolerance,
            max_error,
            tolerance,
        });
    }

    fn push_grad(&mut self, name: impl Into<String>, report: &GradCheckReport) {
        self.items.push(VerifyItem {
            suite: Suite::Grad,
            name: name.into(),
            passed: report.passed(),
            max_error: report.max_rel_error,
            tolerance: report.tolerance,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.items {
            writeln!(
                f,
                "{} {:<10} {:<40} max_err={:.3e} tol={:.1e}",
                if i.passed { "PASS" } else { "FAIL" },
                i.suite.to_string(),
                i.name,
                i.max_error,
                i.tolerance
            )?;
        }
        Ok(())
    }
}

pub fn verify(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let all = suite == Suite::All;
    if all || suite == Suite::Grad {
        grad_suite(&mut report, opts)?;
    }
    if all || suite == Suite::MmdOracle {
        mmd_oracle_suite(&mut report)?;
    }
    if all || suite == Suite::Norm {
        norm_suite(&mut report)?;
    }
    if all || suite == Suite::Schedule {
        schedule_suite(&mut report)?;
    }
    Ok(report)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, shift: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0) + shift)
}

fn perturbed(m: &Matrix, p: f64) -> Matrix {
    m.map(|v| v + p)
}

/// Kernels exercised by the gradient and oracle checks.
pub fn kernel_cases() -> [KernelSpec; 3] {
    [
        KernelSpec::default(),
        KernelSpec::RbfFixed { bandwidth: 0.8 },
        KernelSpec::Linear,
    ]
}

fn grad_suite(report: &mut VerifyReport, opts: &VerifyOptions) -> Result<()> {
    let cfg = GradCheckConfig::default();
    let p = opts.grad_perturbation;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // linear layer: L = sum(W x + b) weighted by a fixed matrix
    let x = random_matrix(&mut rng, 4, 5, 0.0);
    let weights_out = random_matrix(&mut rng, 4, 3, 0.0);
    let mut layer = LinearLayer::new(5, 3, &mut rng);
    let weighted = |y: &Matrix| {
        y.data()
            .iter()
            .zip(weights_out.data())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let r = check_parameter_gradients(
        &mut layer,
        |l| {
            let y = l.forward(&x)?;
            l.backward(&weights_out)?;
            l.visit_params(&mut |q| q.grad = perturbed(&q.grad, p));
            Ok(weighted(&y))
        },
        |l| Ok(weighted(&l.apply(&x)?)),
        &cfg,
    )?;
    report.push_grad("linear/parameters", &r);
    let mut probe = layer.clone();
    probe.forward(&x)?;
    let gx = probe.backward(&weights_out)?;
    let r = check_input_gradient(
        &x,
        &perturbed(&gx, p),
        |x| Ok(weighted(&layer.apply(x)?)),
        &cfg,
    )?;
    report.push_grad("linear/input", &r);

    // leaky relu, inputs kept away from the kink
    let slope = crate::neuralcore::DEFAULT_LEAKY_SLOPE;
    let x = Matrix::from_fn(5, 4, |_, _| {
        let v: f64 = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    });
    let w = random_matrix(&mut rng, 5, 4, 0.0);
    let dot = |y: &Matrix| {
        y.data()
            .iter()
            .zip(w.data())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let g = leaky_relu_backward(&x, &w, slope)?;
    let r = check_input_gradient(
        &x,
        &perturbed(&g, p),
        |x| Ok(dot(&leaky_relu(x, slope))),
        &cfg,
    )?;
    report.push_grad("leaky_relu", &r);

    // softmax cross-entropy
    let logits = random_matrix(&mut rng, 6, 3, 0.0).scaled(2.0);
    let labels: Vec<usize> = (0..6).map(|i| i % 3).collect();
    let (_, g) = softmax_cross_entropy(&logits, &labels)?;
    let r = check_input_gradient(
        &logits,
        &perturbed(&g, p),
        |l| Ok(softmax_cross_entropy(l, &labels)?.0),
        &cfg,
    )?;
    report.push_grad("softmax_cross_entropy", &r);

    // mmd, gradient with respect to both inputs; bandwidths are held at the
    // values resolved from the unperturbed inputs
    for kernel in kernel_cases() {
        let s = random_matrix(&mut rng, 7, 3, 0.0);
        let t = random_matrix(&mut rng, 5, 3, 0.4);
        let resolved = kernel.resolve(&s, &t)?;
        let out = mmd_squared(&s, &t, &kernel)?;
        let r = check_inputs_gradient(
            &[s, t],
            &[
                perturbed(&out.grad_source, p),
                perturbed(&out.grad_target, p),
            ],
            |xs| Ok(mmd_squared_resolved(&xs[0], &xs[1], &resolved)?.value),
            &cfg,
        )?;
        report.push_grad(format!("mmd/{}", kernel_name(&kernel)), &r);
    }

    // discrepancy through softmax, with every pairwise entry gap well above the step
    let logits = tie_free_logits(&mut rng, 3, 5, 3);
    let disc_of = |ls: &[Matrix]| -> Result<f64> {
        let probs: Vec<Matrix> = ls.iter().map(softmax).collect();
        Ok(discrepancy_loss(&probs)?.0)
    };
    let probs: Vec<Matrix> = logits.iter().map(softmax).collect();
    let (_, gp) = discrepancy_loss(&probs)?;
    let analytic = probs
        .iter()
        .zip(&gp)
        .map(|(pr, g)| softmax_backward(pr, g).map(|m| perturbed(&m, p)))
        .collect::<Result<Vec<_>>>()?;
    let r = check_inputs_gradient(&logits, &analytic, disc_of, &cfg)?;
    report.push_grad("discrepancy", &r);

    // full composite objective on a 3-branch toy model
    let (sources, target) = toy_problem(&mut rng, 3, 4);
    let weights = StepWeights {
        alpha: 0.7,
        beta: 0.3,
    };
    for kernel in [KernelSpec::RbfFixed { bandwidth: 0.5 }, KernelSpec::Linear] {
        let mut model = MsMdaModel::new(toy_config(3))?;
        let r = check_parameter_gradients(
            &mut model,
            |m| {
                let total = m
                    .forward_backward(&sources, &target, weights, &kernel)?
                    .breakdown
                    .total;
                m.visit_params(&mut |q| q.grad = perturbed(&q.grad, p));
                Ok(total)
            },
            |m| Ok(m.loss(&sources, &target, weights, &kernel)?.breakdown.total),
            &cfg,
        )?;
        report.push_grad(format!("model/3-branch/{}", kernel_name(&kernel)), &r);
    }
    Ok(())
}

fn kernel_name(k: &KernelSpec) -> &'static str {
    match k {
        KernelSpec::RbfMultiscale { .. } => "rbf_multiscale",
        KernelSpec::RbfFixed { .. } => "rbf_fixed",
        KernelSpec::Linear => "linear",
    }
}

fn tie_free_logits(
    rng: &mut ChaCha8Rng,
    branches: usize,
    rows: usize,
    classes: usize,
) -> Vec<Matrix> {
    loop {
        let ls: Vec<Matrix> = (0..branches)
            .map(|_| random_matrix(rng, rows, classes, 0.0).scaled(2.0))
            .collect();
        let ps: Vec<Matrix> = ls.iter().map(softmax).collect();
        let mut min_gap = f64::INFINITY;
        for i in 0..branches {
            for j in i + 1..branches {
                for (a, b) in ps[i].data().iter().zip(ps[j].data()) {
                    min_gap = min_gap.min((a - b).abs());
                }
            }
        }
        if min_gap > 1e-3 {
            return ls;
        }
    }
}

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

fn toy_problem(rng: &mut ChaCha8Rng, branches: usize, rows: usize) -> (Vec<LabeledBatch>, Matrix) {
    let sources = (0..branches)
        .map(|b| LabeledBatch {
            features: random_matrix(rng, rows, 5, 0.2 * b as f64),
            labels: (0..rows).map(|_| rng.random_range(0..3)).collect(),
        })
        .collect();
    (sources, random_matrix(rng, rows + 1, 5, -0.3))
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

/// Number of seeded cases compared against the brute-force oracle.
pub const MMD_ORACLE_CASES: usize = 50;

fn mmd_oracle_suite(report: &mut VerifyReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let kernels = kernel_cases();
    let mut worst = [0.0f64; 3];
    for case in 0..MMD_ORACLE_CASES {
        let k = case % 3;
        let n = rng.random_range(2..=64);
        let m = rng.random_range(2..=64);
        let d = rng.random_range(1..=8);
        let shift = rng.random_range(0.0..1.5);
        let s = random_matrix(&mut rng, n, d, 0.0);
        let t = random_matrix(&mut rng, m, d, shift);
        let fast = mmd_squared(&s, &t, &kernels[k])?.value;
        let slow = mmd_brute_force(&rows_of(&s), &rows_of(&t), &kernels[k]);
        worst[k] = worst[k].max(relative_error(fast, slow, 1e-12));
    }
    for (k, kernel) in kernels.iter().enumerate() {
        report.push(
            Suite::MmdOracle,
            format!("vs brute force/{}", kernel_name(kernel)),
            worst[k],
            1e-10,
        );
    }

    let mut self_mmd = 0.0f64;
    let mut asym = 0.0f64;
    for kernel in &kernels {
        let a = random_matrix(&mut rng, 20, 4, 0.0);
        let b = random_matrix(&mut rng, 15, 4, 0.5);
        self_mmd = self_mmd.max(mmd_squared(&a, &a, kernel)?.value);
        let ab = mmd_squared(&a, &b, kernel)?.value;
        let ba = mmd_squared(&b, &a, kernel)?.value;
        asym = asym.max(relative_error(ab, ba, 1e-12));
    }
    report.push(Suite::MmdOracle, "mmd(A, A) == 0", self_mmd, 1e-12);
    report.push(Suite::MmdOracle, "symmetry", asym, 1e-10);
    Ok(())
}

fn column_stats(m: &Matrix, c: usize) -> (f64, f64) {
    let n = m.rows() as f64;
    let mean = (0..m.rows()).map(|r| m.get(r, c)).sum::<f64>() / n;
    let var = (0..m.rows())
        .map(|r| (m.get(r, c) - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

fn norm_suite(report: &mut VerifyReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let x = Matrix::from_fn(40, 12, |_, c| {
        rng.random_range(-3.0..3.0) * (c + 1) as f64 + c as f64 * 5.0
    });
    let z = normalize(&x, NormKind::ElectrodeWise);
    let (mut mean_err, mut std_err) = (0.0f64, 0.0f64);
    for c in 0..z.cols() {
        let (mean, std) = column_stats(&z, c);
        mean_err = mean_err.max(mean.abs());
        std_err = std_err.max((std - 1.0).abs());
    }
    report.push(Suite::Norm, "electrode-wise column mean", mean_err, 1e-9);
    report.push(Suite::Norm, "electrode-wise column std", std_err, 1e-9);

    for kind in [
        NormKind::ElectrodeWise,
        NormKind::SampleWise,
        NormKind::GlobalWise,
    ] {
        let once = normalize(&x, kind);
        let twice = normalize(&once, kind);
        report.push(
            Suite::Norm,
            format!("{kind} idempotent"),
            once.max_abs_diff(&twice)?,
            1e-10,
        );
    }

    let constant = Matrix::filled(4, 3, 2.5);
    let worst = [
        NormKind::ElectrodeWise,
        NormKind::SampleWise,
        NormKind::GlobalWise,
    ]
    .iter()
    .flat_map(|&k| normalize(&constant, k).data().to_vec())
    .fold(0.0f64, |a, v| a.max(v.abs()));
    report.push(Suite::Norm, "constant input maps to zero", worst, 0.0);

    let dom =
        |v: f64, j| DomainDataset::new(Matrix::filled(1, 1, v), vec![0], DomainId::new(1, j), 2);
    let domains = [dom(0.0, 1)?, dom(10.0, 2)?];
    let spec = |order| NormalizationSpec {
        kind: NormKind::ElectrodeWise,
        order,
    };
    let a = apply_multi_source_normalization(&domains, spec(NormOrder::A))?;
    let b = apply_multi_source_normalization(&domains, spec(NormOrder::B))?;
    let a_ok = a.len() == 2 && a[0].features.data() == [0.0] && a[1].features.data() == [0.0];
    let b_ok = b.len() == 1 && b[0].features.data() == [-1.0, 1.0];
    report.push(
        Suite::Norm,
        "order A/B example",
        if a_ok && b_ok { 0.0 } else { 1.0 },
        0.0,
    );
    Ok(())
}

pub const ALPHA_AT_END: f64 = 0.9999092;

fn schedule_suite(report: &mut VerifyReport) -> Result<()> {
    let mut start = 0.0f64;
    let mut end = 0.0f64;
    let mut drop = 0.0f64;
    for e in [1usize, 10, 200] {
        start = start.max(alpha_schedule(0, e)?.abs());
        end = end.max((alpha_schedule(e, e)? - ALPHA_AT_END).abs());
        for i in 0..e {
            drop = drop.max(alpha_schedule(i, e)? - alpha_schedule(i + 1, e)?);
        }
    }
    report.push(Suite::Schedule, "alpha(0, E) == 0", start, 0.0);
    report.push(Suite::Schedule, "alpha(E, E) == 0.9999092", end, 1e-6);
    report.push(Suite::Schedule, "alpha monotone", drop.max(0.0), 0.0);
    Ok(())
}
