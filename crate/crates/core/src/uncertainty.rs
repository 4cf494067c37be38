//! Secondary-uncertainty pipeline: combine the independent and correlated
//! standard deviations of an event-loss record into a single uniform draw,
//! parameterize a beta distribution from the record's moments, and sample
//! the event loss through the inverse beta CDF.

use thiserror::Error;

use crate::model::{Currency, ExtendedEventLoss};
use crate::stats::{self, Precision, StatsError};

/// When the raw beta standard deviation reaches its upper bound it is
/// pulled back to this fraction of the bound so the shape parameters stay
/// strictly positive.
pub const SIGMA_CLAMP_FACTOR: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum UncertaintyError {
    #[error("sigma_i and sigma_c are both zero; combined draw is undefined")]
    DegenerateSigma,
    #[error("mean_loss {mean} is at a boundary of (0, max_loss {max}); beta shape undefined")]
    DegenerateMean { mean: f64, max: f64 },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Result of combining the two standard deviations with the two uniform
/// draws: the standard-normal intermediate `v`, the final uniform draw
/// `z = Φ(v)`, and the raw combined deviation `σ = σ_I + σ_C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedDraw {
    pub z: f64,
    pub v: f64,
    pub sigma: Currency,
}

/// Beta shape parameters derived from an event-loss record's moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
    pub mu_beta: f64,
    pub sigma_beta: f64,
    pub sigma_beta_max: f64,
}

/// Blend the program-specific and event-specific uniform draws according
/// to the weight each standard-deviation component carries.
///
/// The five steps: σ = σ_I + σ_C; both draws are mapped to standard
/// normals; a linear combination weighted by σ_I/σ and σ_C/σ is formed;
/// the combination is rescaled to unit variance; the result is mapped
/// back to a uniform draw through the normal CDF. With σ_I = 0 the output
/// equals the event draw exactly, and with σ_C = 0 the program draw.
pub fn combine_std_dev(
    z_prog_e: f64,
    z_e: f64,
    sigma_i: Currency,
    sigma_c: Currency,
) -> Result<CombinedDraw, UncertaintyError> {
    if sigma_i < 0.0 || sigma_c < 0.0 {
        return Err(StatsError::OutOfDomain {
            name: "sigma",
            value: sigma_i.min(sigma_c),
        }
        .into());
    }
    let sigma = sigma_i + sigma_c;
    if sigma == 0.0 {
        return Err(UncertaintyError::DegenerateSigma);
    }

    let v_prog_e = stats::normal_quantile(z_prog_e)?;
    let v_e = stats::normal_quantile(z_e)?;

    let w_i = sigma_i / sigma;
    let w_c = sigma_c / sigma;
    let lc = v_prog_e * w_i + v_e * w_c;
    let v = lc / (w_i * w_i + w_c * w_c).sqrt();
    let z = stats::normal_cdf(v)?;

    Ok(CombinedDraw { z, v, sigma })
}

/// Derive beta shape parameters from the loss mean, the combined standard
/// deviation, and the maximum loss.
///
/// σ_β is capped below √(μ_β(1−μ_β)); at or beyond the cap it is clamped
/// to [`SIGMA_CLAMP_FACTOR`] times the bound, keeping α and β positive.
pub fn beta_parameters(
    mean_loss: Currency,
    sigma: Currency,
    max_loss: Currency,
) -> Result<BetaParams, UncertaintyError> {
    if !(mean_loss > 0.0 && mean_loss < max_loss) {
        return Err(UncertaintyError::DegenerateMean {
            mean: mean_loss,
            max: max_loss,
        });
    }
    if !(sigma > 0.0) {
        return Err(UncertaintyError::DegenerateSigma);
    }

    let mu_beta = mean_loss / max_loss;
    let sigma_beta_max = (mu_beta * (1.0 - mu_beta)).sqrt();
    let mut sigma_beta = sigma / max_loss;
    if sigma_beta >= sigma_beta_max {
        sigma_beta = SIGMA_CLAMP_FACTOR * sigma_beta_max;
    }

    let ratio = sigma_beta_max / sigma_beta;
    let factor = ratio * ratio - 1.0;
    Ok(BetaParams {
        alpha: mu_beta * factor,
        beta: (1.0 - mu_beta) * factor,
        mu_beta,
        sigma_beta,
        sigma_beta_max,
    })
}

/// Sample the loss of one event occurrence under secondary uncertainty:
/// `max_loss · InvCDF_beta(z; α, β)` with `z` from [`combine_std_dev`]
/// and shapes from [`beta_parameters`].
///
/// Boundary records short-circuit analytically instead of erroring: zero
/// combined deviation returns the mean, a zero mean returns zero, and a
/// mean at the maximum returns the maximum.
pub fn sample_secondary_loss(
    record: &ExtendedEventLoss,
    z_prog_e: f64,
    prec: &Precision,
) -> Result<Currency, UncertaintyError> {
    if record.sigma_i + record.sigma_c == 0.0 {
        return Ok(record.mean_loss);
    }
    if record.mean_loss == 0.0 {
        return Ok(0.0);
    }
    if record.mean_loss == record.max_loss {
        return Ok(record.max_loss);
    }

    let draw = combine_std_dev(z_prog_e, record.z_e, record.sigma_i, record.sigma_c)?;
    let params = beta_parameters(record.mean_loss, draw.sigma, record.max_loss)?;
    let quantile = stats::inverse_beta_cdf(draw.z, params.alpha, params.beta, prec)?;
    Ok(record.max_loss * quantile)
}
