//! Diamond-lattice pilot patterns on the time-frequency grid.

use super::SelectionPattern;
use crate::{Error, Result};

/// Builds the staggered ("diamond") pilot lattice.
///
/// Pilots occupy `time_slots` slots evenly spread over `[0, N_t)`: slot
/// ordinal `i` maps to index `round(((i + 0.5) / T) * N_t - 0.5)`. Within a
/// slot, `freqs_per_slot` carriers are placed at spacing `s = floor(N_c / F)`
/// starting from offset `0` for even ordinals and `floor(s / 2)` for odd
/// ordinals; the alternating offsets produce the diamond shape. Returns the
/// `T * F` pilot positions as increasing vectorized indices (`c + N_c * t`).
pub fn make_diamond_pattern(
    carriers: usize,
    timeslots: usize,
    time_slots: usize,
    freqs_per_slot: usize,
) -> Result<SelectionPattern> {
    let (nc, nt, t, f) = (carriers, timeslots, time_slots, freqs_per_slot);
    if nc == 0 || nt == 0 {
        return Err(Error::InvalidParameter("grid must be non-empty".into()));
    }
    if t == 0 || f == 0 {
        return Err(Error::InvalidParameter(
            "time_slots and freqs_per_slot must be >= 1".into(),
        ));
    }
    if f > nc {
        return Err(Error::InvalidParameter(format!(
            "freqs_per_slot {f} exceeds carriers {nc}"
        )));
    }
    if t * f > nc * nt {
        return Err(Error::InvalidParameter(format!(
            "{t}x{f} pilots do not fit a {nc}x{nt} grid"
        )));
    }
    let spacing = nc / f;
    let mut indices = Vec::with_capacity(t * f);
    for i in 0..t {
        let slot = (((i as f64 + 0.5) / t as f64) * nt as f64 - 0.5).round() as usize;
        let offset = if i % 2 == 0 { 0 } else { spacing / 2 };
        for k in 0..f {
            indices.push(offset + k * spacing + nc * slot);
        }
    }
    indices.sort_unstable();
    if indices.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(format!(
            "pilot configuration T={t}, F={f} on a {nc}x{nt} grid places \
             multiple pilots on one resource element"
        )));
    }
    SelectionPattern::new(indices, nc * nt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_sim::observe;
    use crate::rng::sample_rng;
    use crate::Complex64;
    use nalgebra::DVector;

    #[test]
    fn resource_block_pattern_matches_hand_enumeration() {
        // 12 x 14 grid, 3 slots, 6 carriers each: slots {2, 7, 11}; even
        // ordinals (slots 2 and 11) use carriers {0,2,4,6,8,10}, the odd
        // ordinal (slot 7) uses {1,3,5,7,9,11}. 18 pilots total.
        let p = make_diamond_pattern(12, 14, 3, 6).unwrap();
        let expected: Vec<usize> = vec![
            24, 26, 28, 30, 32, 34, // slot 2
            85, 87, 89, 91, 93, 95, // slot 7
            132, 134, 136, 138, 140, 142, // slot 11
        ];
        assert_eq!(p.observed(), expected.as_slice());
        assert_eq!(p.num_observed(), 18);
        assert_eq!(p.total_dim(), 168);
    }

    #[test]
    fn saturated_pattern_is_full_observation() {
        let p = make_diamond_pattern(4, 3, 3, 4).unwrap();
        assert!(p.is_full());
        assert_eq!(p.observed(), (0..12).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn single_pilot_sits_at_carrier_zero_middle_slot() {
        let p = make_diamond_pattern(12, 14, 1, 1).unwrap();
        assert_eq!(p.observed(), &[7 * 12]);
    }

    #[test]
    fn colliding_configuration_is_rejected() {
        // Three ordinals collapse onto the single slot of a 4x1 grid; the
        // even ordinals then claim carrier 0 twice.
        let err = make_diamond_pattern(4, 1, 3, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn spike_lands_at_predicted_vector_index() {
        // Plant a spike at grid (carrier 1, slot 7); with column-major
        // vectorization it must surface at pattern position of index 85.
        let p = make_diamond_pattern(12, 14, 3, 6).unwrap();
        let mut h = DVector::from_element(168, Complex64::new(0.0, 0.0));
        h[1 + 12 * 7] = Complex64::new(3.0, -4.0);
        let mut rng = sample_rng(0, 0);
        let obs = observe(&h, &p, 0.0, &mut rng).unwrap();
        let pos = p.observed().iter().position(|&i| i == 85).unwrap();
        assert_eq!(obs.y[pos], Complex64::new(3.0, -4.0));
        assert!(obs.y.iter().enumerate().all(|(i, v)| i == pos || v.norm() == 0.0));
    }
}
