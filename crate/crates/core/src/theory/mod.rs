//! Closed-form asymptotic errors of the single-step and multi-step predictors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::system::{CovarianceBundle, LtiModel, Regime, RolloutOperators};

mod misspec;
mod wellspec;

pub use misspec::{
    lemma1_check, omega, omega_terms, prop3_multistep_bias, prop3_reducible_rate, prop4_reducible_rate,
    prop4_singlestep_bias, single_step_limit, singlestep_offset, OmegaTerms,
};
pub use wellspec::{
    gap_gram_matrix, gap_matrices, multistep_matrix, prop1_multistep_rate, prop2_singlestep_rate, singlestep_matrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Single,
    Multi,
}

impl PredictorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Single => "single_step",
            PredictorKind::Multi => "multi_step",
        }
    }
}

/// Irreducible loss plus the `1/N` rate of the reducible part.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    pub predictor_kind: PredictorKind,
    pub horizon: usize,
    /// `‖Γ_w‖²` when the state is observed, the bias otherwise.
    pub irreducible: f64,
    /// `lim N · E[ε_N]`; `None` where no closed form applies (inputs with
    /// partial observation).
    pub reducible_rate: Option<f64>,
    pub components: Vec<(String, f64)>,
}

/// `M_MS`, `M_SS` and `M_MS − M_SS`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMatrices {
    pub m_ms: Matrix,
    pub m_ss: Matrix,
    pub gap: Matrix,
    /// `(H − 1) d_u`, added to the gap diagonal in the with-inputs comparison.
    pub input_penalty: f64,
}

impl GapMatrices {
    pub fn with_inputs(&self) -> Matrix {
        &self.gap + &Matrix::identity(self.gap.rows()).scale(self.input_penalty)
    }
}

pub(crate) fn require_horizon(h: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    Ok(())
}

/// Both predictors' asymptotic reports for one model and horizon.
pub fn report(
    model: &LtiModel,
    bundle: &CovarianceBundle,
    ops: &RolloutOperators,
) -> Result<[AsymptoticReport; 2]> {
    require_horizon(ops.horizon)?;
    let h = ops.horizon;
    let regime = model.regime();
    let mk = |kind, irreducible, rate, components| AsymptoticReport {
        regime,
        predictor_kind: kind,
        horizon: h,
        irreducible,
        reducible_rate: rate,
        components,
    };
    match regime {
        Regime::Well => {
            let noise = ops.gamma_w()?.frobenius_sq();
            let p1 = prop1_multistep_rate(model, ops)?;
            let p2 = prop2_singlestep_rate(model, bundle, ops)?;
            Ok([
                mk(PredictorKind::Single, noise, Some(p2), vec![]),
                mk(PredictorKind::Multi, noise, Some(p1), vec![]),
            ])
        }
        Regime::Mis => {
            let ge = ops.gamma_e()?.frobenius_sq();
            let b3 = prop3_multistep_bias(model, bundle, ops)?;
            let b4 = prop4_singlestep_bias(model, bundle, ops)?;
            let (r3, r4) = if model.input_dim() == 0 {
                (Some(prop3_reducible_rate(model, bundle, ops)?), Some(prop4_reducible_rate(model, bundle, ops)?))
            } else {
                (None, None)
            };
            let comp = |b: f64| vec![("innovation_noise".to_string(), ge), ("state_mismatch".to_string(), b - ge)];
            Ok([mk(PredictorKind::Single, b4, r4, comp(b4)), mk(PredictorKind::Multi, b3, r3, comp(b3))])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{covariances, rollout_operators};

    #[test]
    fn example1_multistep_bias_below_single_step() {
        let m = LtiModel::example1();
        for h in [1, 2, 5, 10, 20] {
            let b = covariances(&m, h).unwrap();
            let ops = rollout_operators(&m, &b, h).unwrap();
            let [single, multi] = report(&m, &b, &ops).unwrap();
            assert!(single.irreducible >= multi.irreducible - 1e-10, "H={h}");
            assert!(multi.reducible_rate.unwrap() >= 0.0);
        }
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(require_horizon(0).is_err());
    }
}
