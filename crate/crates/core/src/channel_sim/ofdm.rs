//! OFDM-scenario generation: a doubly selective time-frequency channel
//! synthesized as a sum of propagation paths.

use super::{ChannelSample, OfdmParams, Scenario};
use crate::{Complex64, Result};
use nalgebra::DVector;
use std::f64::consts::TAU;

/// Speed of light in m/s.
const C0: f64 = 299_792_458.0;

/// Draws one channel over the `N_c x N_t` grid.
///
/// Per sample: velocity `v` uniform over `velocity_range` (km/h); per path
/// `p`: gain `g_p` standard complex Gaussian, delay `tau_p` exponential with
/// mean `delay_spread` clipped at five times the mean, Doppler
/// `nu_p = (v f_carrier / c0) cos(alpha_p)` with `alpha_p` uniform on
/// `[0, 2 pi)`. Then
///
/// ```text
/// H[c, t] = (1/sqrt(P)) * sum_p g_p exp(j 2 pi (nu_p t T_sym - c df tau_p))
/// ```
///
/// and the sample is `h = vec(H)` with column-major index `c + N_c * t`, so
/// `E[||h||^2] = N`.
pub fn sample_ofdm_channel(
    params: &OfdmParams,
    rng: &mut impl rand::Rng,
) -> Result<ChannelSample> {
    params.validate()?;
    let (vlo, vhi) = params.velocity_range;
    let v_ms = rng.gen_range(vlo..=vhi) / 3.6;
    let p = params.num_paths;
    let mut gains = Vec::with_capacity(p);
    let mut delays = Vec::with_capacity(p);
    let mut dopplers = Vec::with_capacity(p);
    for _ in 0..p {
        gains.push(crate::rng::standard_complex(rng));
        let e: f64 = rng.sample(rand_distr::Exp1);
        delays.push((e * params.delay_spread).min(5.0 * params.delay_spread));
        let alpha = rng.gen_range(0.0..TAU);
        dopplers.push(v_ms * params.carrier_freq / C0 * alpha.cos());
    }

    let (nc, nt) = (params.carriers, params.timeslots);
    let scale = 1.0 / (p as f64).sqrt();
    let mut h = DVector::zeros(nc * nt);
    for t in 0..nt {
        let t_s = t as f64 * params.symbol_duration;
        for c in 0..nc {
            let f_c = c as f64 * params.subcarrier_spacing;
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..p {
                acc += gains[q] * Complex64::cis(TAU * (dopplers[q] * t_s - f_c * delays[q]));
            }
            h[c + nc * t] = acc * scale;
        }
    }
    Ok(ChannelSample {
        h,
        genie_cov: None,
        scenario: Scenario::Ofdm,
    })
}
