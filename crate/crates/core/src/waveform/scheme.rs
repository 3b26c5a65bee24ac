use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The digital modulations the synthesizer can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationScheme {
    #[serde(rename = "OOK")]
    Ook,
    #[serde(rename = "4ASK")]
    Ask4,
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8PSK")]
    Psk8,
    #[serde(rename = "16PSK")]
    Psk16,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 8] = [
        ModulationScheme::Ook,
        ModulationScheme::Ask4,
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Psk8,
        ModulationScheme::Psk16,
        ModulationScheme::Qam16,
        ModulationScheme::Qam64,
    ];

    /// The default desk-scale set: one representative per family and order
    /// that a minutes-scale classifier separates reliably. 16PSK and 64QAM
    /// are available but are near-indistinguishable from 8PSK / 16QAM at 32
    /// symbols per frame.
    pub const DESK: [ModulationScheme; 6] = [
        ModulationScheme::Ook,
        ModulationScheme::Ask4,
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Psk8,
        ModulationScheme::Qam16,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown modulation scheme id {id}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationScheme::Ook => "OOK",
            ModulationScheme::Ask4 => "4ASK",
            ModulationScheme::Bpsk => "BPSK",
            ModulationScheme::Qpsk => "QPSK",
            ModulationScheme::Psk8 => "8PSK",
            ModulationScheme::Psk16 => "16PSK",
            ModulationScheme::Qam16 => "16QAM",
            ModulationScheme::Qam64 => "64QAM",
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            ModulationScheme::Ook | ModulationScheme::Bpsk => 1,
            ModulationScheme::Ask4 | ModulationScheme::Qpsk => 2,
            ModulationScheme::Psk8 => 3,
            ModulationScheme::Psk16 | ModulationScheme::Qam16 => 4,
            ModulationScheme::Qam64 => 6,
        }
    }

    /// Constellation indexed by the symbol's bit pattern (MSB first), with
    /// Gray-coded neighbours and unit average power.
    pub fn constellation(self) -> Vec<Complex64> {
        let m = 1usize << self.bits_per_symbol();
        let raw: Vec<Complex64> = match self {
            ModulationScheme::Ook => vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            ModulationScheme::Ask4 => (0..m)
                .map(|v| Complex64::new(gray_pam_level(v, m), 0.0))
                .collect(),
            ModulationScheme::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            ModulationScheme::Qpsk => (0..m)
                .map(|v| {
                    let i = if v & 0b10 == 0 { 1.0 } else { -1.0 };
                    let q = if v & 0b01 == 0 { 1.0 } else { -1.0 };
                    Complex64::new(i, q)
                })
                .collect(),
            ModulationScheme::Psk8 | ModulationScheme::Psk16 => {
                let mut points = vec![Complex64::default(); m];
                for pos in 0..m {
                    points[gray(pos)] = Complex64::from_polar(1.0, 2.0 * PI * pos as f64 / m as f64);
                }
                points
            }
            ModulationScheme::Qam16 | ModulationScheme::Qam64 => {
                let half_bits = self.bits_per_symbol() / 2;
                let side = 1usize << half_bits;
                (0..m)
                    .map(|v| {
                        let i_bits = v >> half_bits;
                        let q_bits = v & (side - 1);
                        Complex64::new(gray_pam_level(i_bits, side), gray_pam_level(q_bits, side))
                    })
                    .collect()
            }
        };
        let power = raw.iter().map(|c| c.norm_sqr()).sum::<f64>() / m as f64;
        let scale = power.sqrt().recip();
        raw.into_iter().map(|c| c * scale).collect()
    }

    /// Maps a bit sequence (one bit per byte, MSB of each symbol first) to
    /// constellation points. Trailing bits that do not fill a symbol are
    /// ignored.
    pub fn map_bits(self, bits: &[u8]) -> Vec<Complex64> {
        let k = self.bits_per_symbol() as usize;
        let points = self.constellation();
        bits.chunks_exact(k)
            .map(|chunk| {
                let v = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                points[v]
            })
            .collect()
    }
}

fn gray(n: usize) -> usize {
    n ^ (n >> 1)
}

/// Amplitude `2 * pos - (m - 1)` of the PAM level whose Gray code is `v`.
fn gray_pam_level(v: usize, m: usize) -> f64 {
    let pos = (0..m).find(|&p| gray(p) == v).expect("bit pattern within range");
    2.0 * pos as f64 - (m as f64 - 1.0)
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown modulation scheme `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constellations_have_unit_power_and_full_size() {
        for scheme in ModulationScheme::ALL {
            let c = scheme.constellation();
            assert_eq!(c.len(), 1 << scheme.bits_per_symbol(), "{scheme}");
            let p = c.iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((p - 1.0).abs() < 1e-9, "{scheme}: {p}");
        }
    }

    #[test]
    fn bpsk_maps_bit_to_antipodal_symbol() {
        let s = ModulationScheme::Bpsk.map_bits(&[0, 1, 1, 0]);
        let re: Vec<f64> = s.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![1.0, -1.0, -1.0, 1.0]);
        assert!(s.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn qpsk_points_have_unit_magnitude() {
        for z in ModulationScheme::Qpsk.constellation() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for scheme in [ModulationScheme::Psk8, ModulationScheme::Psk16] {
            let c = scheme.constellation();
            let m = c.len();
            // walk the circle in angle order
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                let pa = c[a].arg().rem_euclid(2.0 * PI);
                let pb = c[b].arg().rem_euclid(2.0 * PI);
                pa.partial_cmp(&pb).unwrap()
            });
            for w in 0..m {
                let (a, b) = (order[w], order[(w + 1) % m]);
                assert_eq!((a ^ b).count_ones(), 1, "{scheme}");
            }
        }
        let c = ModulationScheme::Qam16.constellation();
        for a in 0..16 {
            for b in 0..16 {
                if (c[a] - c[b]).norm() < 2.0 / 10f64.sqrt() + 1e-9 && a != b {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for scheme in ModulationScheme::ALL {
            assert_eq!(scheme.name().parse::<ModulationScheme>().unwrap(), scheme);
            assert_eq!(ModulationScheme::from_id(scheme.id()).unwrap(), scheme);
        }
        assert!("GFSK".parse::<ModulationScheme>().is_err());
        assert!(ModulationScheme::from_id(8).is_err());
    }
}
