use serde::{Deserialize, Serialize};

use super::{compose_matrix, OneStep, Predictor, RegressionData, Structure};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::system::Trajectory;

const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdOptions {
    pub step: f64,
    pub iters: usize,
}

impl Default for GdOptions {
    fn default() -> Self {
        GdOptions { step: 2e-5, iters: 20_000 }
    }
}

/// Result of gradient-descent training.
#[derive(Debug, Clone)]
pub struct GdFit {
    pub predictor: Predictor,
    /// Training loss at every iterate, starting from the initialisation.
    pub loss_trace: Vec<f64>,
    pub best_iter: usize,
}

/// Mean `H`-step squared error as a quadratic in the stacked matrix `G`,
/// held as sufficient statistics so each evaluation is independent of `N`:
/// `L(G) = s_yy − 2 tr(G S_yzᵀ) + tr(G S_zz Gᵀ)`.
#[derive(Debug, Clone)]
pub struct MultiStepObjective {
    szz: Matrix,
    syz: Matrix,
    syy: f64,
    horizon: usize,
    dy: usize,
    du: usize,
}

impl MultiStepObjective {
    pub fn new(reg: &RegressionData) -> Self {
        let n = reg.count().max(1) as f64;
        let z = &reg.regressors;
        let y = &reg.targets;
        MultiStepObjective {
            szz: z.t_matmul(z).scale(1.0 / n),
            syz: y.t_matmul(z).scale(1.0 / n),
            syy: y.frobenius_sq() / n,
            horizon: reg.horizon,
            dy: reg.output_dim,
            du: reg.input_dim,
        }
    }

    /// Mean loss of an arbitrary stacked predictor matrix.
    pub fn loss(&self, g: &Matrix) -> f64 {
        let gs = g.matmul(&self.szz);
        self.syy - 2.0 * g.dot(&self.syz) + g.dot(&gs)
    }

    /// Loss of the composed one-step parameters and its gradient with respect
    /// to `(G_y, G_u)`.
    ///
    /// The stacked gradient `2 (G S_zz − S_yz)` is pulled back through the
    /// rollout embedding. Blocks sharing a power of `G_y` are summed first, so
    /// the product rule over `G_y^p` is applied once per power.
    pub fn loss_and_gradient(&self, g_y: &Matrix, g_u: &Matrix) -> (f64, Matrix, Matrix) {
        let (h, dy, du) = (self.horizon, self.dy, self.du);
        let g = compose_matrix(g_y, g_u, h);
        let gs = g.matmul(&self.szz);
        let loss = self.syy - 2.0 * g.dot(&self.syz) + g.dot(&gs);
        let d = (gs - &self.syz).scale(2.0);

        // m[p]: total upstream gradient on G_y^p, r[p]: on G_y^p G_u
        let mut m = vec![Matrix::zeros(dy, dy); h + 1];
        let mut r = vec![Matrix::zeros(dy, du); h];
        for k in 0..h {
            m[k + 1] += &d.block(k * dy, 0, dy, dy);
            for j in 0..=k {
                r[k - j] += &d.block(k * dy, dy + j * du, dy, du);
            }
        }
        let gyt = g_y.transpose();
        let tp = gyt.powers(h + 1);
        let mut grad_u = Matrix::zeros(dy, du);
        for (p, rp) in r.iter().enumerate() {
            grad_u += &tp[p].matmul(rp);
            if p >= 1 && du > 0 {
                m[p] += &rp.matmul_t(g_u);
            }
        }
        let mut grad_y = Matrix::zeros(dy, dy);
        for (p, mp) in m.iter().enumerate().skip(1) {
            for e in 0..p {
                grad_y += &tp[e].matmul(mp).matmul(&tp[p - 1 - e]);
            }
        }
        (loss, grad_y, grad_u)
    }
}

/// Full-batch gradient descent on the mean `H`-step loss over the structured
/// class `{compose(G_y, G_u)}`; returns the best iterate seen.
pub fn fit_structured_gd(
    data: &Trajectory,
    horizon: usize,
    init: (&Matrix, &Matrix),
    opts: GdOptions,
) -> Result<GdFit> {
    let reg = RegressionData::build(data, horizon)?;
    fit_structured_gd_on(&MultiStepObjective::new(&reg), init, opts)
}

pub fn fit_structured_gd_on(
    obj: &MultiStepObjective,
    init: (&Matrix, &Matrix),
    opts: GdOptions,
) -> Result<GdFit> {
    if !(opts.step > 0.0) {
        return Err(Error::Config("gradient step must be positive".into()));
    }
    let (mut gy, mut gu) = (init.0.clone(), init.1.clone());
    if gy.shape() != (obj.dy, obj.dy) || gu.shape() != (obj.dy, obj.du) {
        return Err(Error::ShapeMismatch("initial one-step parameters".into()));
    }
    if !gy.is_finite() || !gu.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut trace = Vec::with_capacity(opts.iters + 1);
    let mut best = (f64::INFINITY, 0usize, gy.clone(), gu.clone());
    for it in 0..=opts.iters {
        let (loss, dgy, dgu) = obj.loss_and_gradient(&gy, &gu);
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            return Err(Error::Diverged(it));
        }
        trace.push(loss);
        if loss < best.0 {
            best = (loss, it, gy.clone(), gu.clone());
        }
        if it == opts.iters {
            break;
        }
        gy -= &dgy.scale(opts.step);
        gu -= &dgu.scale(opts.step);
    }
    let (_, best_iter, gy, gu) = best;
    let predictor = Predictor {
        structure: Structure::StructuredGd,
        horizon: obj.horizon,
        output_dim: obj.dy,
        input_dim: obj.du,
        g: compose_matrix(&gy, &gu, obj.horizon),
        base: Some(OneStep { g_y: gy, g_u: gu }),
    };
    Ok(GdFit { predictor, loss_trace: trace, best_iter })
}
