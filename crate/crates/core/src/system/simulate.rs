use super::rng::{GaussianStream, NoiseStream};
use super::{CovarianceBundle, LtiModel};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A sampled dataset. Row `t` of each matrix holds the vector at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub y: Matrix,
    pub u: Matrix,
    /// Latent states, kept for diagnostics only.
    pub x: Option<Matrix>,
}

impl Trajectory {
    pub fn new(y: Matrix, u: Matrix) -> Result<Self> {
        if y.rows() != u.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} outputs vs {} inputs",
                y.rows(),
                u.rows()
            )));
        }
        Ok(Trajectory { y, u, x: None })
    }

    /// The first `n` samples. Simulations from the same seed are prefixes of
    /// each other, so this equals a shorter run.
    pub fn prefix(&self, n: usize) -> Trajectory {
        let n = n.min(self.len());
        let take = |m: &Matrix| m.block(0, 0, n, m.cols());
        Trajectory { y: take(&self.y), u: take(&self.u), x: self.x.as_ref().map(take) }
    }

    pub fn len(&self) -> usize {
        self.y.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.rows() == 0
    }

    pub fn output_dim(&self) -> usize {
        self.y.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.u.cols()
    }
}

/// How the input sequence is produced during simulation.
#[derive(Debug, Clone, Copy)]
pub enum InputSource<'a> {
    /// iid standard normal excitation.
    Random,
    /// All inputs zero.
    Zero,
    /// Output feedback `u_t = F y_t`.
    Feedback(&'a Matrix),
}

/// Open-loop simulation with iid standard normal inputs from `x_0 = 0`.
pub fn simulate(model: &LtiModel, n: usize, seed: u64) -> Trajectory {
    simulate_with(model, n, seed, InputSource::Random)
}

/// Simulation under `u_t = F y_t`.
pub fn closed_loop_simulate(model: &LtiModel, f: &Matrix, n: usize, seed: u64) -> Trajectory {
    simulate_with(model, n, seed, InputSource::Feedback(f))
}

pub fn simulate_with(model: &LtiModel, n: usize, seed: u64, inputs: InputSource<'_>) -> Trajectory {
    let (dx, du, dy) = (model.state_dim(), model.input_dim(), model.output_dim());
    if let InputSource::Feedback(f) = inputs {
        assert_eq!(f.shape(), (du, dy), "feedback gain shape");
    }
    let mut w_stream = GaussianStream::new(seed, NoiseStream::Process);
    let mut v_stream = GaussianStream::new(seed, NoiseStream::Sensor);
    let mut u_stream = GaussianStream::new(seed, NoiseStream::Input);
    let (a, b, bw, c, dv) = (model.a(), model.b(), model.b_w(), model.c(), model.d_v());
    let sensor_noise = !dv.is_zero();

    let mut ys = Matrix::zeros(n, dy);
    let mut us = Matrix::zeros(n, du);
    let mut xs = Matrix::zeros(n, dx);
    let mut x = vec![0.0; dx];
    let mut w = vec![0.0; dx];
    let mut v = vec![0.0; dy];
    let mut u = vec![0.0; du];
    for t in 0..n {
        let mut y = c.mul_vec(&x);
        if sensor_noise {
            v_stream.fill(&mut v);
            for (yi, e) in y.iter_mut().zip(dv.mul_vec(&v)) {
                *yi += e;
            }
        }
        match inputs {
            InputSource::Random => u_stream.fill(&mut u),
            InputSource::Zero => u.iter_mut().for_each(|ui| *ui = 0.0),
            InputSource::Feedback(f) => u = f.mul_vec(&y),
        }
        xs.row_mut(t).copy_from_slice(&x);
        ys.row_mut(t).copy_from_slice(&y);
        us.row_mut(t).copy_from_slice(&u);

        w_stream.fill(&mut w);
        let mut next = a.mul_vec(&x);
        for (ni, e) in next.iter_mut().zip(bw.mul_vec(&w)) {
            *ni += e;
        }
        if du > 0 {
            for (ni, e) in next.iter_mut().zip(b.mul_vec(&u)) {
                *ni += e;
            }
        }
        x = next;
    }
    Trajectory { y: ys, u: us, x: Some(xs) }
}

/// Output sequence generated by the innovations recursion
/// `x̂_{t+1} = A x̂_t + B u_t + K D_e e_t`, `y_t = C x̂_t + D_e e_t`.
pub fn innovations_simulate(
    model: &LtiModel,
    bundle: &CovarianceBundle,
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    let k = bundle.kalman_k()?;
    Ok(innovations_with_gain(model, k, &bundle.d_e, n, seed))
}

pub(crate) fn innovations_with_gain(
    model: &LtiModel,
    k: &Matrix,
    d_e: &Matrix,
    n: usize,
    seed: u64,
) -> Trajectory {
    let (dx, du, dy) = (model.state_dim(), model.input_dim(), model.output_dim());
    let mut e_stream = GaussianStream::new(seed, NoiseStream::Innovation);
    let mut u_stream = GaussianStream::new(seed, NoiseStream::Input);
    let kde = k.matmul(d_e);
    let mut ys = Matrix::zeros(n, dy);
    let mut us = Matrix::zeros(n, du);
    let mut xs = Matrix::zeros(n, dx);
    let mut xh = vec![0.0; dx];
    let mut e = vec![0.0; dy];
    let mut u = vec![0.0; du];
    for t in 0..n {
        e_stream.fill(&mut e);
        u_stream.fill(&mut u);
        let mut y = model.c().mul_vec(&xh);
        for (yi, v) in y.iter_mut().zip(d_e.mul_vec(&e)) {
            *yi += v;
        }
        xs.row_mut(t).copy_from_slice(&xh);
        ys.row_mut(t).copy_from_slice(&y);
        us.row_mut(t).copy_from_slice(&u);
        let mut next = model.a().mul_vec(&xh);
        for (ni, v) in next.iter_mut().zip(kde.mul_vec(&e)) {
            *ni += v;
        }
        if du > 0 {
            for (ni, v) in next.iter_mut().zip(model.b().mul_vec(&u)) {
                *ni += v;
            }
        }
        xh = next;
    }
    Trajectory { y: ys, u: us, x: Some(xs) }
}

/// Sample lag-`k` autocovariance `(1/n) Σ y_{t+k} y_tᵀ` of the rows of `y`
/// after discarding `burn_in` rows.
pub fn sample_autocov(y: &Matrix, lag: usize, burn_in: usize) -> Matrix {
    let d = y.cols();
    let mut acc = Matrix::zeros(d, d);
    let mut count = 0usize;
    for t in burn_in..y.rows().saturating_sub(lag) {
        let (a, b) = (y.row(t + lag), y.row(t));
        for i in 0..d {
            for j in 0..d {
                acc[(i, j)] += a[i] * b[j];
            }
        }
        count += 1;
    }
    acc.scale(1.0 / count.max(1) as f64)
}
