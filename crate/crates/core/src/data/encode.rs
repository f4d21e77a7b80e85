use crate::config::NetworkConfig;
use crate::model::SpikeRecord;

/// Nominal maximum intensity of the encoding. Stored pixels top out at 255,
/// so real data never produces a spike at exactly `t = 0`.
pub const INTENSITY_MAX: f64 = 256.0;

/// `t = T_max (I_max - I) / I_max`: brighter pixels spike earlier.
#[inline]
pub fn intensity_to_time(intensity: f64, t_max: f64) -> f64 {
    t_max * (INTENSITY_MAX - intensity) / INTENSITY_MAX
}

#[inline]
pub fn time_to_intensity(time: f64, t_max: f64) -> f64 {
    INTENSITY_MAX - time * INTENSITY_MAX / t_max
}

pub fn encode_ttfs(pixels: &[u8], cfg: &NetworkConfig) -> Vec<SpikeRecord> {
    pixels
        .iter()
        .map(|&p| SpikeRecord::Fired(intensity_to_time(p as f64, cfg.t_max)))
        .collect()
}

/// Round half away from zero, the rounding used by every fixed-point path.
#[inline]
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Integer input timesteps for the quantized pipeline.
pub fn encode_ttfs_steps(pixels: &[u8], t_max_steps: u16) -> Vec<Option<u16>> {
    pixels
        .iter()
        .map(|&p| Some(round_half_away(intensity_to_time(p as f64, t_max_steps as f64)) as u16))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        assert_eq!(intensity_to_time(256.0, 450.0), 0.0);
        assert_eq!(intensity_to_time(0.0, 450.0), 450.0);
        assert_eq!(intensity_to_time(128.0, 450.0), 225.0);
        assert!((intensity_to_time(255.0, 450.0) - 450.0 / 256.0).abs() < 1e-12);
    }

    #[test]
    fn every_pixel_fires() {
        let cfg = NetworkConfig::new(vec![784, 2]);
        let pixels: Vec<u8> = (0..=255).collect();
        assert!(encode_ttfs(&pixels, &cfg).iter().all(|r| !r.is_dead()));
    }

    #[test]
    fn integer_steps_in_range() {
        let steps = encode_ttfs_steps(&[0, 1, 128, 255], 450);
        assert_eq!(steps, vec![Some(450), Some(448), Some(225), Some(2)]);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(2.5), 3.0);
        assert_eq!(round_half_away(-2.5), -3.0);
        assert_eq!(round_half_away(0.49), 0.0);
    }

    proptest! {
        #[test]
        fn order_reversing(a in 0u8..=255, b in 0u8..=255) {
            let ta = intensity_to_time(a as f64, 450.0);
            let tb = intensity_to_time(b as f64, 450.0);
            prop_assert_eq!(a < b, ta > tb);
        }

        #[test]
        fn decode_inverts_encode(p in 0u8..=255) {
            let back = time_to_intensity(intensity_to_time(p as f64, 450.0), 450.0);
            prop_assert!((back - p as f64).abs() < 1e-9);
        }
    }
}
