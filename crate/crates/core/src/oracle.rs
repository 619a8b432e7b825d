//! Slow reference computations used to cross-check the fast paths.
//!
//! Nothing here shares code with the implementations it checks: rows are
//! plain `Vec<f64>`, kernels are written out directly, and the median is taken
//! from a fully sorted list.

use crate::losses::KernelSpec;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

fn median_sorted(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

type KernelFn = Box<dyn Fn(&[f64], &[f64]) -> f64>;

fn kernel_fn(source: &[Vec<f64>], target: &[Vec<f64>], spec: &KernelSpec) -> KernelFn {
    match *spec {
        KernelSpec::Linear => Box::new(|a: &[f64], b: &[f64]| {
            let mut s = 0.0;
            for i in 0..a.len() {
                s += a[i] * b[i];
            }
            s
        }),
        KernelSpec::RbfFixed { bandwidth } => {
            Box::new(move |a: &[f64], b: &[f64]| (-sq_dist(a, b) / (2.0 * bandwidth)).exp())
        }
        KernelSpec::RbfMultiscale {
            num_scales,
            scale_step,
        } => {
            let all: Vec<&Vec<f64>> = source.iter().chain(target).collect();
            let mut d = Vec::new();
            for i in 0..all.len() {
                for j in 0..i {
                    d.push(sq_dist(all[i], all[j]));
                }
            }
            let base = match median_sorted(d) {
                Some(m) if m > 0.0 => m,
                _ => 1.0,
            };
            let half = (num_scales as f64 - 1.0) / 2.0;
            let sigmas: Vec<f64> = (0..num_scales)
                .map(|k| base * scale_step.powf(k as f64 - half))
                .collect();
            Box::new(move |a: &[f64], b: &[f64]| {
                let d2 = sq_dist(a, b);
                sigmas.iter().map(|s| (-d2 / (2.0 * s)).exp()).sum::<f64>() / sigmas.len() as f64
            })
        }
    }
}

/// `mean(K_ss) + mean(K_tt) − 2·mean(K_st)` by explicit double sums.
pub fn mmd_brute_force(source: &[Vec<f64>], target: &[Vec<f64>], spec: &KernelSpec) -> f64 {
    let k = kernel_fn(source, target, spec);
    let mean_over = |xs: &[Vec<f64>], ys: &[Vec<f64>]| {
        let mut s = 0.0;
        for x in xs {
            for y in ys {
                s += k(x, y);
            }
        }
        s / (xs.len() * ys.len()) as f64
    };
    mean_over(source, source) + mean_over(target, target) - 2.0 * mean_over(source, target)
}

/// `−∫ f ln f` for a zero-mean Gaussian density of the given variance, by
/// composite Simpson quadrature over ±12σ.
pub fn gaussian_entropy_quadrature(variance: f64) -> f64 {
    let sigma = variance.sqrt();
    let f = |x: f64| {
        (-(x * x) / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
    };
    let integrand = |x: f64| {
        let p = f(x);
        if p > 0.0 {
            -p * p.ln()
        } else {
            0.0
        }
    };
    let (a, b) = (-12.0 * sigma, 12.0 * sigma);
    let n = 20_000;
    let h = (b - a) / n as f64;
    let mut s = integrand(a) + integrand(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(x);
    }
    s * h / 3.0
}
