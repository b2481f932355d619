//! Scaled conjugate gradients (Møller, 1993).
//!
//! Follows the classic Netlab formulation: a Levenberg-Marquardt style scale
//! replaces the line search, and a step is only accepted when it does not
//! increase the objective.

use nalgebra::DVector;

/// A differentiable objective. Non-finite values mark infeasible points.
pub trait Objective {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct ScgOptions {
    pub max_iters: usize,
    /// Stop when both the step and the objective change fall below these.
    pub tol_x: f64,
    pub tol_f: f64,
    /// Give up after this many consecutive non-finite trial values.
    pub max_non_finite: usize,
}

impl Default for ScgOptions {
    fn default() -> Self {
        ScgOptions {
            max_iters: 200,
            tol_x: 1e-8,
            tol_f: 1e-10,
            max_non_finite: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgReport {
    pub x: DVector<f64>,
    pub value: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub accepted: Vec<f64>,
    pub iterations: usize,
    /// Set when the run stopped because trial points kept evaluating non-finite.
    pub stalled_non_finite: bool,
}

pub fn minimize(f: &impl Objective, x0: DVector<f64>, opts: &ScgOptions) -> ScgReport {
    const SIGMA0: f64 = 1e-4;
    const BETA_MIN: f64 = 1e-15;
    const BETA_MAX: f64 = 1e100;

    let n = x0.len();
    let mut x = x0;
    let mut f_old = f.value(&x);
    let mut accepted = vec![f_old];
    let report = |x: DVector<f64>, value: f64, accepted: Vec<f64>, iterations: usize, stalled: bool| ScgReport {
        x,
        value,
        accepted,
        iterations,
        stalled_non_finite: stalled,
    };
    if n == 0 || opts.max_iters == 0 || !f_old.is_finite() {
        return report(x, f_old, accepted, 0, false);
    }

    let mut grad_new = f.gradient(&x);
    let mut grad_old = grad_new.clone();
    let mut d = -&grad_new;
    let mut success = true;
    let mut n_success = 0usize;
    let mut beta = 1.0;
    let mut non_finite = 0usize;
    let (mut mu, mut kappa, mut theta) = (0.0, 0.0, 0.0);

    for iter in 1..=opts.max_iters {
        if success {
            mu = d.dot(&grad_new);
            if mu >= 0.0 {
                d = -&grad_new;
                mu = d.dot(&grad_new);
            }
            kappa = d.dot(&d);
            if kappa < f64::EPSILON * f64::EPSILON {
                return report(x, f_old, accepted, iter, false);
            }
            let sigma = SIGMA0 / kappa.sqrt();
            let x_plus = &x + sigma * &d;
            let g_plus = f.gradient(&x_plus);
            theta = d.dot(&(g_plus - &grad_new)) / sigma;
        }

        let mut delta = theta + beta * kappa;
        if delta <= 0.0 {
            delta = beta * kappa;
            beta -= theta / kappa;
        }
        let alpha = -mu / delta;

        let x_new = &x + alpha * &d;
        let f_new = f.value(&x_new);
        let comparison = 2.0 * (f_new - f_old) / (alpha * mu);
        if f_new.is_finite() {
            non_finite = 0;
        } else {
            non_finite += 1;
            if non_finite >= opts.max_non_finite {
                return report(x, f_old, accepted, iter, true);
            }
        }

        if comparison >= 0.0 && f_new <= f_old {
            success = true;
            n_success += 1;
            let step = (alpha * &d).amax();
            let change = (f_new - f_old).abs();
            x = x_new;
            accepted.push(f_new);
            if step < opts.tol_x && change < opts.tol_f {
                return report(x, f_new, accepted, iter, false);
            }
            f_old = f_new;
            grad_old = grad_new;
            grad_new = f.gradient(&x);
            if grad_new.dot(&grad_new) == 0.0 {
                return report(x, f_old, accepted, iter, false);
            }
        } else {
            success = false;
        }

        if comparison < 0.25 || !comparison.is_finite() {
            beta = (4.0 * beta).min(BETA_MAX);
        }
        if comparison > 0.75 {
            beta = (0.5 * beta).max(BETA_MIN);
        }

        if n_success == n {
            d = -&grad_new;
            n_success = 0;
        } else if success {
            let gamma = (&grad_old - &grad_new).dot(&grad_new) / mu;
            d = gamma * &d - &grad_new;
        }
    }
    let iters = opts.max_iters;
    report(x, f_old, accepted, iters, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&self, x: &DVector<f64>) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }

        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ])
        }
    }

    struct Quadratic(Vec<f64>);

    impl Objective for Quadratic {
        fn value(&self, x: &DVector<f64>) -> f64 {
            x.iter().zip(&self.0).map(|(v, s)| 0.5 * s * v * v).sum()
        }

        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_iterator(x.len(), x.iter().zip(&self.0).map(|(v, s)| s * v))
        }
    }

    /// Infinite outside the unit disc.
    struct Walled;

    impl Objective for Walled {
        fn value(&self, x: &DVector<f64>) -> f64 {
            if x.norm() > 1.0 {
                f64::INFINITY
            } else {
                -x[0]
            }
        }

        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![-1.0, 0.0 * x[1]])
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let r = minimize(
            &Rosenbrock,
            DVector::from_vec(vec![-1.2, 1.0]),
            &ScgOptions { max_iters: 2000, ..Default::default() },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!(r.accepted.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_converges_fast() {
        let f = Quadratic(vec![1.0, 10.0, 100.0, 3.0]);
        let r = minimize(&f, DVector::from_element(4, 1.0), &ScgOptions::default());
        assert!(r.value < 1e-12, "{}", r.value);
    }

    #[test]
    fn rejects_infeasible_steps() {
        let r = minimize(&Walled, DVector::from_vec(vec![0.0, 0.0]), &ScgOptions::default());
        assert!(r.value.is_finite());
        assert!(r.x.norm() <= 1.0);
        assert!(r.accepted.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_iterations_is_identity() {
        let x0 = DVector::from_vec(vec![0.3, -0.2]);
        let r = minimize(&Rosenbrock, x0.clone(), &ScgOptions { max_iters: 0, ..Default::default() });
        assert_eq!(r.x, x0);
        assert_eq!(r.accepted.len(), 1);
    }
}
