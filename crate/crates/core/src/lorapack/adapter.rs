use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// A single frozen linear layer `W` with a low-rank update `(α/r)·B·A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyAdapter {
    pub base: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub alpha: f64,
}

impl ToyAdapter {
    pub fn new(base: DMatrix<f64>, a: DMatrix<f64>, b: DMatrix<f64>, alpha: f64) -> Result<Self> {
        let (d_out, d_in) = base.shape();
        let r = a.nrows();
        if r == 0 || a.ncols() != d_in || b.shape() != (d_out, r) {
            return Err(Error::InvalidArgument(format!(
                "adapter shapes: W {d_out}x{d_in}, A {}x{}, B {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument("alpha must be > 0".into()));
        }
        Ok(Self { base, a, b, alpha })
    }

    /// Standard initialization: small random `A`, zero `B`, so the adapter
    /// starts as a no-op on top of `W`.
    pub fn init<R: Rng + ?Sized>(base: DMatrix<f64>, rank: usize, alpha: f64, rng: &mut R) -> Result<Self> {
        let (d_out, d_in) = base.shape();
        let a = DMatrix::from_fn(rank, d_in, |_, _| rng.random_range(-0.01..0.01));
        let b = DMatrix::zeros(d_out, rank);
        Self::new(base, a, b, alpha)
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank() as f64
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.base.ncols() {
            return Err(Error::InvalidArgument(format!(
                "input has dimension {}, adapter expects {}",
                x.len(),
                self.base.ncols()
            )));
        }
        Ok(())
    }

    /// `W·x + (α/r)·B·(A·x)`, without materializing the merged weight.
    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        Ok(&self.base * x + (&self.b * (&self.a * x)) * self.scaling())
    }

    /// Squared-error loss `‖forward(x) − target‖²`.
    pub fn loss(&self, x: &DVector<f64>, target: &DVector<f64>) -> Result<f64> {
        let y = self.forward(x)?;
        if target.len() != y.len() {
            return Err(Error::InvalidArgument("target dimension mismatch".into()));
        }
        Ok((y - target).norm_squared())
    }

    /// Gradients w.r.t. `A` and `B` given the upstream gradient `g = ∂L/∂y`:
    /// `∂L/∂B = s·g·(A·x)ᵀ`, `∂L/∂A = s·(Bᵀ·g)·xᵀ`.
    pub fn grads_from_upstream(&self, x: &DVector<f64>, upstream: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_input(x)?;
        let s = self.scaling();
        let ax = &self.a * x;
        let grad_b = (upstream * ax.transpose()) * s;
        let grad_a = ((self.b.transpose() * upstream) * x.transpose()) * s;
        Ok((grad_a, grad_b))
    }

    /// Analytic gradients of the squared-error loss w.r.t. `A` and `B`.
    pub fn grads(&self, x: &DVector<f64>, target: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let y = self.forward(x)?;
        if target.len() != y.len() {
            return Err(Error::InvalidArgument("target dimension mismatch".into()));
        }
        self.grads_from_upstream(x, &((y - target) * 2.0))
    }

    /// Max relative error between analytic gradients and central finite
    /// differences over every entry of `A` and `B`.
    pub fn grad_check(&self, x: &DVector<f64>, target: &DVector<f64>, epsilon: f64) -> Result<f64> {
        if !(1e-8..=1e-3).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [1e-8, 1e-3]")));
        }
        let (grad_a, grad_b) = self.grads(x, target)?;
        let rel = |analytic: f64, numeric: f64| {
            (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
        };
        let mut worst: f64 = 0.0;
        let mut probe = self.clone();
        for i in 0..self.a.nrows() {
            for j in 0..self.a.ncols() {
                let orig = probe.a[(i, j)];
                probe.a[(i, j)] = orig + epsilon;
                let up = probe.loss(x, target)?;
                probe.a[(i, j)] = orig - epsilon;
                let down = probe.loss(x, target)?;
                probe.a[(i, j)] = orig;
                worst = worst.max(rel(grad_a[(i, j)], (up - down) / (2.0 * epsilon)));
            }
        }
        for i in 0..self.b.nrows() {
            for j in 0..self.b.ncols() {
                let orig = probe.b[(i, j)];
                probe.b[(i, j)] = orig + epsilon;
                let up = probe.loss(x, target)?;
                probe.b[(i, j)] = orig - epsilon;
                let down = probe.loss(x, target)?;
                probe.b[(i, j)] = orig;
                worst = worst.max(rel(grad_b[(i, j)], (up - down) / (2.0 * epsilon)));
            }
        }
        Ok(worst)
    }
}
