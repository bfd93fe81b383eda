use super::tensor::ParamSet;
use crate::rng;
use rand::seq::index::sample;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Tensors with more values than this are checked on a seeded subset.
    pub full_threshold: usize,
    /// Size of that subset; at least 200.
    pub sample_size: usize,
    /// Denominator floor for the relative error.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            full_threshold: 400,
            sample_size: 200,
            abs_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(parameter name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Compares the gradients currently stored in `model` against central
/// differences of `loss`.
///
/// The caller must have populated the gradients of exactly this loss
/// (zeroed first, then one backward pass). Parameter values are restored
/// bit-for-bit before returning.
pub fn grad_check<M: ParamSet>(
    model: &mut M,
    mut loss: impl FnMut(&M) -> f64,
    opts: &GradCheckOptions,
) -> GradCheckReport {
    let mut rng = rng::stream(opts.seed, rng::streams::GRAD_CHECK);
    let plan: Vec<(usize, Vec<usize>, Vec<f64>)> = model
        .params()
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let n = p.value.len();
            let coords = if n > opts.full_threshold {
                let mut idx = sample(&mut rng, n, opts.sample_size.max(200).min(n)).into_vec();
                idx.sort_unstable();
                idx
            } else {
                (0..n).collect()
            };
            let analytic = coords.iter().map(|&i| p.grad.data()[i]).collect();
            (pi, coords, analytic)
        })
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: None,
    };
    for (pi, coords, analytic) in plan {
        for (&i, &a) in coords.iter().zip(&analytic) {
            let orig = model.params()[pi].value.data()[i];
            model.params_mut()[pi].value.data_mut()[i] = orig + opts.step;
            let plus = loss(model);
            model.params_mut()[pi].value.data_mut()[i] = orig - opts.step;
            let minus = loss(model);
            model.params_mut()[pi].value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let denom = a.abs().max(numeric.abs()).max(opts.abs_floor);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((model.params()[pi].name.clone(), i));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffkernel::{Parameter, Tensor};

    struct Linear {
        w: Parameter,
    }

    impl ParamSet for Linear {
        fn params(&self) -> Vec<&Parameter> {
            vec![&self.w]
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter> {
            vec![&mut self.w]
        }
    }

    #[test]
    fn linear_function_is_exact() {
        let coef = [0.3, -2.0, 5.5, 1.25];
        let mut m = Linear {
            w: Parameter::from_tensor("w", Tensor::vector(vec![1.0, 2.0, -1.0, 0.5])),
        };
        m.w.grad.data_mut().copy_from_slice(&coef);
        let r = grad_check(
            &mut m,
            |m| m.w.value.data().iter().zip(&coef).map(|(a, b)| a * b).sum(),
            &GradCheckOptions::default(),
        );
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error <= 1e-9, "{r:?}");
        assert_eq!(m.w.value.data(), &[1.0, 2.0, -1.0, 0.5]);
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut m = Linear {
            w: Parameter::from_tensor("w", Tensor::vector(vec![1.0, 2.0])),
        };
        // true gradient of sum of squares is 2w = (2, 4)
        m.w.grad.data_mut().copy_from_slice(&[2.0, 3.0]);
        let r = grad_check(
            &mut m,
            |m| m.w.value.data().iter().map(|v| v * v).sum(),
            &GradCheckOptions::default(),
        );
        assert!(r.max_rel_error > 0.1);
        assert_eq!(r.worst, Some(("w".to_string(), 1)));
    }

    #[test]
    fn large_tensors_are_subsampled() {
        let n = 1000;
        let mut m = Linear {
            w: Parameter::zeros("w", &[n]),
        };
        m.w.grad.fill(1.0);
        let r = grad_check(&mut m, |m| m.w.value.data().iter().sum(), &GradCheckOptions::default());
        assert_eq!(r.checked, 200);
        assert!(r.max_rel_error < 1e-9);
    }
}
