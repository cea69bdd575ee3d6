//! Gradient descent and the heavy-ball method over caller-supplied
//! differentiable objectives.

use super::NumericsError;
use nalgebra::DVector;
use std::io::Write;

/// Differentiable objective oracle: value and gradient at a point.
pub trait Objective {
    fn value_and_gradient(&self, theta: &DVector<f64>) -> (f64, DVector<f64>);
}

impl<F> Objective for F
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    fn value_and_gradient(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        self(theta)
    }
}

/// Step size, momentum, and stopping parameters shared by both optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Step size gamma > 0.
    pub gamma: f64,
    /// Momentum coefficient beta in [0, 1). Zero reduces heavy-ball to
    /// gradient descent.
    pub beta: f64,
    pub max_iters: usize,
    /// Stop when the gradient norm drops to this value or below.
    pub grad_tol: f64,
    /// Iterate-norm bound beyond which the run is declared diverged.
    pub divergence_bound: f64,
}

impl OptimizerConfig {
    pub fn new(gamma: f64, beta: f64, max_iters: usize, grad_tol: f64) -> Result<Self, NumericsError> {
        let cfg = Self {
            gamma,
            beta,
            max_iters,
            grad_tol,
            divergence_bound: 1e12,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(NumericsError::InvalidConfig {
                reason: format!("gamma must be > 0, got {}", self.gamma),
            });
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(NumericsError::InvalidConfig {
                reason: format!("beta must be in [0, 1), got {}", self.beta),
            });
        }
        if !(self.grad_tol >= 0.0) {
            return Err(NumericsError::InvalidConfig {
                reason: format!("grad_tol must be >= 0, got {}", self.grad_tol),
            });
        }
        if !(self.divergence_bound > 0.0) {
            return Err(NumericsError::InvalidConfig {
                reason: "divergence_bound must be > 0".to_string(),
            });
        }
        Ok(())
    }
}

/// Full iterate history of one optimizer run. Index 0 is the start point.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub iterates: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// True when the gradient tolerance was reached before `max_iters`.
    pub converged: bool,
}

impl OptimizerTrace {
    pub fn final_theta(&self) -> &DVector<f64> {
        self.iterates.last().expect("trace holds at least the start")
    }

    /// Number of update steps taken (iterates minus the start point).
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    /// First iterate index whose gradient norm is <= `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.grad_norms.iter().position(|&g| g <= tol)
    }

    /// Emit as CSV: `iter, theta_0.., f, grad_norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(out);
        let dim = self.iterates[0].len();
        let mut header = vec!["iter".to_string()];
        header.extend((0..dim).map(|j| format!("theta_{j}")));
        header.push("f".to_string());
        header.push("grad_norm".to_string());
        wtr.write_record(&header)?;
        for (i, theta) in self.iterates.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(theta.iter().map(|v| format!("{v:?}")));
            rec.push(format!("{:?}", self.values[i]));
            rec.push(format!("{:?}", self.grad_norms[i]));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

enum Momentum {
    None,
    HeavyBall,
}

fn run<F: Objective + ?Sized>(
    f: &F,
    theta0: DVector<f64>,
    cfg: &OptimizerConfig,
    momentum: Momentum,
) -> Result<OptimizerTrace, NumericsError> {
    cfg.validate()?;
    let mut iterates = Vec::with_capacity(cfg.max_iters + 1);
    let mut values = Vec::with_capacity(cfg.max_iters + 1);
    let mut grad_norms = Vec::with_capacity(cfg.max_iters + 1);

    let (v0, mut grad) = f.value_and_gradient(&theta0);
    let mut theta = theta0.clone();
    // The recursion needs two prior iterates; theta_{-1} := theta_0 gives
    // zero initial momentum.
    let mut prev = theta0;
    iterates.push(theta.clone());
    values.push(v0);
    grad_norms.push(grad.norm());

    let mut converged = grad_norms[0] <= cfg.grad_tol;
    for iteration in 1..=cfg.max_iters {
        if converged {
            break;
        }
        let next = match momentum {
            Momentum::None => &theta - &grad * cfg.gamma,
            Momentum::HeavyBall => &theta - &grad * cfg.gamma + (&theta - &prev) * cfg.beta,
        };
        prev = std::mem::replace(&mut theta, next);

        let norm = theta.norm();
        if !norm.is_finite() || norm > cfg.divergence_bound {
            return Err(NumericsError::Diverged { iteration, norm });
        }
        let (value, g) = f.value_and_gradient(&theta);
        grad = g;
        iterates.push(theta.clone());
        values.push(value);
        grad_norms.push(grad.norm());
        converged = grad.norm() <= cfg.grad_tol;
    }

    Ok(OptimizerTrace {
        iterates,
        values,
        grad_norms,
        converged,
    })
}

/// Steepest descent: `theta_n = theta_{n-1} - gamma * grad f(theta_{n-1})`.
pub fn gradient_descent<F: Objective + ?Sized>(
    f: &F,
    theta0: DVector<f64>,
    cfg: &OptimizerConfig,
) -> Result<OptimizerTrace, NumericsError> {
    run(f, theta0, cfg, Momentum::None)
}

/// Heavy-ball method:
/// `theta_n = theta_{n-1} - gamma * grad f + beta * (theta_{n-1} - theta_{n-2})`.
pub fn heavy_ball<F: Objective + ?Sized>(
    f: &F,
    theta0: DVector<f64>,
    cfg: &OptimizerConfig,
) -> Result<OptimizerTrace, NumericsError> {
    run(f, theta0, cfg, Momentum::HeavyBall)
}

/// Built-in test objectives used by demos and the property suite.
pub mod objectives {
    use super::Objective;
    use nalgebra::{DMatrix, DVector};

    /// Convex quadratic `f(theta) = 0.5 * theta^T Q theta` with symmetric
    /// positive-definite `Q`.
    #[derive(Debug, Clone)]
    pub struct Quadratic {
        q: DMatrix<f64>,
    }

    impl Quadratic {
        pub fn new(q: DMatrix<f64>) -> Self {
            assert_eq!(q.nrows(), q.ncols(), "Q must be square");
            Self { q }
        }

        /// Diagonal quadratic with the given curvatures.
        pub fn diagonal(curvatures: &[f64]) -> Self {
            Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(curvatures)))
        }
    }

    impl Objective for Quadratic {
        fn value_and_gradient(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
            let g = &self.q * theta;
            (0.5 * theta.dot(&g), g)
        }
    }

    /// 1-D tilted double well `f(x) = x^4/4 - x^2/2 + tilt * x`.
    ///
    /// For small positive tilt the left well is the global minimum, the right
    /// well is local, and a small bump separates them near the origin.
    #[derive(Debug, Clone, Copy)]
    pub struct TiltedDoubleWell {
        pub tilt: f64,
    }

    impl Objective for TiltedDoubleWell {
        fn value_and_gradient(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
            let x = theta[0];
            let f = 0.25 * x.powi(4) - 0.5 * x * x + self.tilt * x;
            let g = x.powi(3) - x + self.tilt;
            (f, DVector::from_row_slice(&[g]))
        }
    }

    /// Stationary points of [`TiltedDoubleWell`], ordered ascending:
    /// (global minimum, barrier crest, local minimum). Solved by bisection.
    pub fn double_well_stationary_points(tilt: f64) -> (f64, f64, f64) {
        let g = |x: f64| x.powi(3) - x + tilt;
        let root = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(lo) * g(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        (root(-2.0, -0.5), root(-0.5, 0.5), root(0.5, 2.0))
    }
}
