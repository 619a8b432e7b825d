//! Biased (V-statistic) squared MMD with analytic input gradients.
//!
//! Writing the joint batch as `z` with weights `c_a = 1/n` for source rows and
//! `c_a = −1/m` for target rows, the estimator is `Σ_ab c_a c_b k(z_a, z_b)` and
//! its gradient is `∂/∂z_a = 2 c_a Σ_b c_b ∂k(z_a, z_b)/∂z_a`. Bandwidths are
//! treated as constants during differentiation.

use super::kernel::{rbf_mixture, sq_distance, KernelSpec, ResolvedKernel};
use crate::error::{Error, Result};
use crate::neuralcore::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MmdOutput {
    pub value: f64,
    pub grad_source: Matrix,
    pub grad_target: Matrix,
}

fn validate_inputs(source: &Matrix, target: &Matrix) -> Result<()> {
    if source.rows() == 0 || target.rows() == 0 {
        return Err(Error::validation(
            "MMD needs nonempty source and target sets",
        ));
    }
    if source.cols() != target.cols() {
        return Err(Error::Shape {
            op: "mmd_squared",
            left: source.shape(),
            right: target.shape(),
        });
    }
    Ok(())
}

pub fn mmd_squared(source: &Matrix, target: &Matrix, kernel: &KernelSpec) -> Result<MmdOutput> {
    validate_inputs(source, target)?;
    let resolved = kernel.resolve(source, target)?;
    mmd_squared_resolved(source, target, &resolved)
}

pub fn mmd_squared_resolved(
    source: &Matrix,
    target: &Matrix,
    kernel: &ResolvedKernel,
) -> Result<MmdOutput> {
    validate_inputs(source, target)?;
    let (n, m, d) = (source.rows(), target.rows(), source.cols());
    let total = n + m;
    let row = |a: usize| {
        if a < n {
            source.row(a)
        } else {
            target.row(a - n)
        }
    };
    let coef = |a: usize| {
        if a < n {
            1.0 / n as f64
        } else {
            -1.0 / m as f64
        }
    };

    let (mut s_ss, mut s_tt, mut s_st) = (0.0, 0.0, 0.0);
    let mut grad = vec![0.0; total * d];

    match kernel {
        ResolvedKernel::Rbf { sigma_sq } => {
            // g[a*total + b] holds the scalar factor of ∂k(z_a, z_b)/∂z_a
            let mut g = vec![0.0; total * total];
            for a in 0..total {
                for b in a..total {
                    let (k, gab) = if a == b {
                        (1.0, 0.0)
                    } else {
                        rbf_mixture(sq_distance(row(a), row(b)), sigma_sq)
                    };
                    g[a * total + b] = gab;
                    g[b * total + a] = gab;
                    let mult = if a == b { 1.0 } else { 2.0 };
                    match (a < n, b < n) {
                        (true, true) => s_ss += mult * k,
                        (false, false) => s_tt += mult * k,
                        _ => s_st += k,
                    }
                }
            }
            for a in 0..total {
                let ca = coef(a);
                let za = row(a);
                let out = &mut grad[a * d..(a + 1) * d];
                let mut weight_sum = 0.0;
                for b in 0..total {
                    let w = coef(b) * g[a * total + b];
                    if w == 0.0 {
                        continue;
                    }
                    weight_sum += w;
                    for (o, &zb) in out.iter_mut().zip(row(b)) {
                        *o += w * zb;
                    }
                }
                // −2 c_a Σ_b c_b g_ab (z_a − z_b)
                for (o, &x) in out.iter_mut().zip(za) {
                    *o = -2.0 * ca * (weight_sum * x - *o);
                }
            }
        }
        ResolvedKernel::Linear => {
            for a in 0..total {
                for b in a..total {
                    let k = kernel.eval(row(a), row(b));
                    let mult = if a == b { 1.0 } else { 2.0 };
                    match (a < n, b < n) {
                        (true, true) => s_ss += mult * k,
                        (false, false) => s_tt += mult * k,
                        _ => s_st += k,
                    }
                }
            }
            // Σ_b c_b z_b = mean_s − mean_t
            let mut diff = vec![0.0; d];
            for b in 0..total {
                let cb = coef(b);
                for (o, &x) in diff.iter_mut().zip(row(b)) {
                    *o += cb * x;
                }
            }
            for a in 0..total {
                let ca = coef(a);
                for (o, &x) in grad[a * d..(a + 1) * d].iter_mut().zip(&diff) {
                    *o = 2.0 * ca * x;
                }
            }
        }
    }

    let (nf, mf) = (n as f64, m as f64);
    let value = s_ss / (nf * nf) + s_tt / (mf * mf) - 2.0 * s_st / (nf * mf);
    let grad_target = grad.split_off(n * d);
    Ok(MmdOutput {
        value: value.max(0.0),
        grad_source: Matrix::from_parts(n, d, grad)?,
        grad_target: Matrix::from_parts(m, d, grad_target)?,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::neuralcore::gradcheck::{check_inputs_gradient, GradCheckConfig};

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng, shift: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0) + shift)
    }

    #[test]
    fn identical_sets_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(10, 3, &mut rng, 0.0);
        for k in [
            KernelSpec::default(),
            KernelSpec::RbfFixed { bandwidth: 0.7 },
            KernelSpec::Linear,
        ] {
            assert!(mmd_squared(&a, &a, &k).unwrap().value <= 1e-12);
        }
    }

    #[test]
    fn singleton_hand_value() {
        let s = Matrix::new(1, 1, vec![0.0]).unwrap();
        let t = Matrix::new(1, 1, vec![1.0]).unwrap();
        let out = mmd_squared(&s, &t, &KernelSpec::RbfFixed { bandwidth: 1.0 }).unwrap();
        let expected = 2.0 - 2.0 * (-0.5f64).exp();
        assert!((out.value - expected).abs() < 1e-15);
        assert!((out.value - 0.786939).abs() < 1e-6);
    }

    #[test]
    fn symmetric_under_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(7, 4, &mut rng, 0.0);
        let b = random(5, 4, &mut rng, 0.5);
        let k = KernelSpec::default();
        let ab = mmd_squared(&a, &b, &k).unwrap().value;
        let ba = mmd_squared(&b, &a, &k).unwrap().value;
        assert!((ab - ba).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mmd_squared(
            &Matrix::zeros(0, 2),
            &Matrix::zeros(2, 2),
            &KernelSpec::Linear
        )
        .is_err());
        assert!(mmd_squared(
            &Matrix::zeros(1, 2),
            &Matrix::zeros(2, 3),
            &KernelSpec::Linear
        )
        .is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random(6, 3, &mut rng, 0.0);
        let t = random(5, 3, &mut rng, 0.4);
        for spec in [
            KernelSpec::default(),
            KernelSpec::RbfFixed { bandwidth: 0.5 },
            KernelSpec::Linear,
        ] {
            let resolved = spec.resolve(&s, &t).unwrap();
            let out = mmd_squared_resolved(&s, &t, &resolved).unwrap();
            let report = check_inputs_gradient(
                &[s.clone(), t.clone()],
                &[out.grad_source.clone(), out.grad_target.clone()],
                |xs| Ok(mmd_squared_resolved(&xs[0], &xs[1], &resolved)?.value),
                &GradCheckConfig::default(),
            )
            .unwrap();
            report.ensure("mmd").unwrap();
        }
    }
}
