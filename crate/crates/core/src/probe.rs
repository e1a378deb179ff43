//! Monte Carlo probabilities of closed events under the stationary law and
//! small-noise fits of `−ε log p`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::ModelSpec;
use crate::spectral::{sq, StateVec};
use crate::stationary::{invariant_samples, PullbackConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `‖x‖_H ≥ r`.
    HBallComplement,
    /// `|x_m| ≥ level`.
    ModeThreshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub radius_or_level: f64,
    pub mode_index: Option<usize>,
}

impl EventSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.radius_or_level > 0.0 && self.radius_or_level.is_finite()) {
            return Err(Error::InvalidParameter("event radius or level must be positive".into()));
        }
        match (self.kind, self.mode_index) {
            (EventKind::ModeThreshold, Some(m)) if m < dim => Ok(()),
            (EventKind::ModeThreshold, _) => Err(Error::InvalidParameter(format!(
                "mode_threshold needs a mode index below {dim}"
            ))),
            (EventKind::HBallComplement, None) => Ok(()),
            (EventKind::HBallComplement, Some(_)) => {
                Err(Error::InvalidParameter("h_ball_complement takes no mode index".into()))
            }
        }
    }

    pub fn contains(&self, x: &StateVec) -> bool {
        match self.kind {
            EventKind::HBallComplement => sq(&x.0).sqrt() >= self.radius_or_level,
            EventKind::ModeThreshold => x.0[self.mode_index.unwrap_or(0)].abs() >= self.radius_or_level,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub eps: f64,
    pub p_hat: f64,
    /// Binomial standard error `√(p̂(1−p̂)/n)`.
    pub stderr: f64,
    pub hits: usize,
    pub n_draws: usize,
    /// No draw hit the event, so `log p̂` is undefined.
    pub zero_hits: bool,
}

impl ProbabilityEstimate {
    pub fn from_counts(eps: f64, hits: usize, n_draws: usize) -> Self {
        let p = hits as f64 / n_draws as f64;
        Self {
            eps,
            p_hat: p,
            stderr: (p * (1.0 - p) / n_draws as f64).sqrt(),
            hits,
            n_draws,
            zero_hits: hits == 0,
        }
    }
}

/// Fraction of stationary draws that land in the event.
pub fn estimate_probability(
    model: &ModelSpec,
    eps: f64,
    event: &EventSpec,
    n_draws: usize,
    cfg: &PullbackConfig,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    event.validate(model.dim())?;
    if n_draws == 0 {
        return Err(Error::InvalidParameter("n_draws must be positive".into()));
    }
    let samples = invariant_samples(model, eps, n_draws, cfg, seed)?;
    let hits = samples
        .values
        .iter()
        .map(|x| check_dim(model.dim(), x.len()).map(|_| event.contains(x)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|h| *h)
        .count();
    Ok(ProbabilityEstimate::from_counts(eps, hits, n_draws))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Decreasing noise intensities.
    pub eps_list: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub hits: Vec<usize>,
    /// `−ε log p̂`, absent where no draw hit.
    pub neg_eps_log_p: Vec<Option<f64>>,
    /// Intercept at `ε = 0` of the least-squares line through the defined values.
    pub fitted_limit: f64,
    pub fitted_slope: f64,
    /// Intensities left out of the fit because of zero hits.
    pub excluded: Vec<f64>,
    pub rate_reference: Option<f64>,
}

/// Affine extrapolation of `−ε log p̂` to `ε → 0`.
pub fn slope_fit(estimates: &[ProbabilityEstimate], rate_reference: Option<f64>) -> Result<ProbeResult> {
    let mut est = estimates.to_vec();
    if est.iter().any(|e| !(e.eps > 0.0) || !(0.0..=1.0).contains(&e.p_hat)) {
        return Err(Error::InvalidParameter(
            "estimates need positive eps and p in [0, 1]".into(),
        ));
    }
    est.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let neg: Vec<Option<f64>> = est
        .iter()
        .map(|e| {
            if e.p_hat > 0.0 {
                Some(-e.eps * e.p_hat.ln())
            } else {
                None
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = est
        .iter()
        .zip(&neg)
        .filter_map(|(e, y)| y.map(|y| (e.eps, y)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} intensities with positive hits; the fit needs 3",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("the fit needs distinct intensities".into()));
    }
    let slope = sxy / sxx;
    Ok(ProbeResult {
        eps_list: est.iter().map(|e| e.eps).collect(),
        p_hat: est.iter().map(|e| e.p_hat).collect(),
        stderr: est.iter().map(|e| e.stderr).collect(),
        hits: est.iter().map(|e| e.hits).collect(),
        excluded: est.iter().filter(|e| e.p_hat == 0.0).map(|e| e.eps).collect(),
        neg_eps_log_p: neg,
        fitted_limit: my - slope * mx,
        fitted_slope: slope,
        rate_reference,
    })
}

/// Number of direction changes in the defined `−ε log p̂` values, taken in order of decreasing `ε`.
pub fn trend_inversions(result: &ProbeResult) -> usize {
    let ys: Vec<f64> = result.neg_eps_log_p.iter().flatten().copied().collect();
    let target = result.rate_reference.unwrap_or(result.fitted_limit);
    ys.windows(2)
        .filter(|w| (w[1] - target).abs() > (w[0] - target).abs())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(eps: f64, c: f64, rate: f64) -> ProbabilityEstimate {
        ProbabilityEstimate {
            eps,
            p_hat: c * (-rate / eps).exp(),
            stderr: 0.0,
            hits: 1,
            n_draws: 1,
            zero_hits: false,
        }
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let e: Vec<_> = [0.2, 0.1, 0.05, 0.025].iter().map(|&x| exact(x, 1.0, 0.25)).collect();
        let r = slope_fit(&e, Some(0.25)).unwrap();
        assert!((r.fitted_limit - 0.25).abs() < 1e-12);
        assert_eq!(trend_inversions(&r), 0);
    }

    #[test]
    fn too_few_hits() {
        let mut e: Vec<_> = [0.2, 0.1, 0.05].iter().map(|&x| exact(x, 1.0, 0.25)).collect();
        e[2] = ProbabilityEstimate::from_counts(0.05, 0, 100);
        assert!(matches!(slope_fit(&e, None), Err(Error::InsufficientData(_))));
    }
}
