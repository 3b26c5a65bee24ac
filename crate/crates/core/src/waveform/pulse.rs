use std::f64::consts::PI;

/// Root-raised-cosine taps spanning `span` symbols at `sps` samples per
/// symbol (`span * sps + 1` taps), normalized to unit energy.
pub fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    let half = (span * sps / 2) as isize;
    let beta = rolloff;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| {
            let t = n as f64 / sps as f64;
            if t == 0.0 {
                1.0 - beta + 4.0 * beta / PI
            } else if beta > 0.0 && ((4.0 * beta * t).abs() - 1.0).abs() < 1e-9 {
                let a = PI / (4.0 * beta);
                beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos())
            } else {
                let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
                let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|h| *h /= energy);
    taps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_are_symmetric_with_unit_energy() {
        let h = rrc_taps(0.35, 8, 8);
        assert_eq!(h.len(), 65);
        for i in 0..h.len() {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-12);
        }
        let e: f64 = h.iter().map(|x| x * x).sum();
        assert!((e - 1.0).abs() < 1e-12);
        assert!(h.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn cascade_is_nyquist() {
        // RRC * RRC = raised cosine: zero crossings at nonzero symbol offsets.
        let sps = 8;
        let h = rrc_taps(0.35, sps, 16);
        let n = h.len();
        let rc: Vec<f64> = (0..2 * n - 1)
            .map(|k| {
                (0..n)
                    .filter(|&i| k >= i && k - i < n)
                    .map(|i| h[i] * h[k - i])
                    .sum()
            })
            .collect();
        let center = n - 1;
        for m in 1..4 {
            assert!(rc[center + m * sps].abs() < 1e-2 * rc[center]);
        }
    }
}
