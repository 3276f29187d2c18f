//! Deployment description: BSS geometry and loads, the interference matrix
//! (given directly or derived from positions), and optional MAC and run
//! settings, all read from one TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::MacParams;
use crate::spectrum::{check_channel_count, InterferenceMatrix, BASIC_CHANNEL_MHZ};

/// One BSS: a single AP serving a single STA, downlink only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bss {
    pub id: String,
    pub load_mbps: f64,
    pub packet_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sta: Option<[f64; 3]>,
}

impl Bss {
    pub fn new(id: impl Into<String>, load_mbps: f64, packet_bits: u32) -> Self {
        Bss {
            id: id.into(),
            load_mbps,
            packet_bits,
            ap: None,
            sta: None,
        }
    }

    pub fn with_positions(mut self, ap: [f64; 3], sta: [f64; 3]) -> Self {
        self.ap = Some(ap);
        self.sta = Some(sta);
        self
    }
}

/// Radio model used to derive the interference matrix from AP positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    pub tx_power_dbm: f64,
    pub cca_dbm: f64,
    /// Path loss at 1 m.
    pub pl0_db: f64,
    pub pl_exponent: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_power_dbm: 20.0,
            cca_dbm: -82.0,
            pl0_db: 40.0,
            pl_exponent: 2.0,
        }
    }
}

impl RadioParams {
    /// Log-distance path loss in dB.
    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        self.pl0_db + 10.0 * self.pl_exponent * distance_m.log10()
    }

    /// Power per 20 MHz channel received at `distance_m` when the total
    /// transmit power is spread over `width_mhz`.
    pub fn received_per_channel_dbm(&self, distance_m: f64, width_mhz: u32) -> f64 {
        let split = 10.0 * (f64::from(width_mhz) / f64::from(BASIC_CHANNEL_MHZ)).log10();
        self.tx_power_dbm - split - self.path_loss_db(distance_m)
    }
}

/// Experiment settings a deployment file may pin; command-line flags win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub iterations: Option<usize>,
    pub seeds: Option<usize>,
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub epsilon0: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub sat_threshold: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeploymentFile {
    deployment: DeploymentSection,
    bss: Vec<Bss>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interference: Option<InterferenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radio: Option<RadioParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mac: Option<MacParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run: Option<RunSettings>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeploymentSection {
    n_channels: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterferenceSection {
    matrix: Vec<Vec<u32>>,
}

/// A validated deployment.
#[derive(Clone, Debug, PartialEq)]
pub struct Deployment {
    pub n_channels: usize,
    pub bss: Vec<Bss>,
    pub matrix: InterferenceMatrix,
    pub radio: RadioParams,
    pub mac: MacParams,
    pub run: RunSettings,
    digest: String,
}

impl Deployment {
    /// Builds a deployment with a directly supplied interference matrix.
    pub fn with_matrix(n_channels: usize, bss: Vec<Bss>, matrix: InterferenceMatrix) -> Result<Self> {
        let file = DeploymentFile {
            deployment: DeploymentSection { n_channels },
            bss,
            interference: Some(InterferenceSection {
                matrix: matrix.rows().to_vec(),
            }),
            radio: None,
            mac: None,
            run: None,
        };
        Self::from_file_struct(file)
    }

    /// Builds a deployment whose matrix is derived from AP positions.
    pub fn with_positions(n_channels: usize, bss: Vec<Bss>, radio: RadioParams) -> Result<Self> {
        let file = DeploymentFile {
            deployment: DeploymentSection { n_channels },
            bss,
            interference: None,
            radio: Some(radio),
            mac: None,
            run: None,
        };
        Self::from_file_struct(file)
    }

    fn from_file_struct(file: DeploymentFile) -> Result<Self> {
        let text = toml::to_string(&file)
            .map_err(|e| Error::validation(format!("cannot render deployment: {e}")))?;
        Self::build(file, &text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: DeploymentFile =
            toml::from_str(text).map_err(|e| Error::validation(format!("deployment file: {e}")))?;
        Self::build(file, text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn build(file: DeploymentFile, text: &str) -> Result<Self> {
        let n_channels = file.deployment.n_channels;
        check_channel_count(n_channels)?;
        if file.bss.is_empty() {
            return Err(Error::validation("deployment needs at least one [[bss]]"));
        }
        for (w, b) in file.bss.iter().enumerate() {
            if !(b.load_mbps > 0.0) || !b.load_mbps.is_finite() {
                return Err(Error::validation(format!(
                    "bss[{w}] ({}): load_mbps must be > 0",
                    b.id
                )));
            }
            if b.packet_bits == 0 {
                return Err(Error::validation(format!(
                    "bss[{w}] ({}): packet_bits must be > 0",
                    b.id
                )));
            }
            if file.bss[..w].iter().any(|o| o.id == b.id) {
                return Err(Error::validation(format!("duplicate bss id {:?}", b.id)));
            }
        }
        let radio = file.radio.unwrap_or_default();
        let mac = file.mac.unwrap_or_default();
        mac.validate()?;
        let matrix = match file.interference {
            Some(section) => {
                if section.matrix.len() != file.bss.len() {
                    return Err(Error::validation(format!(
                        "interference matrix has {} rows for {} BSSs",
                        section.matrix.len(),
                        file.bss.len()
                    )));
                }
                InterferenceMatrix::new(section.matrix)?
            }
            None => derive_matrix(n_channels, &file.bss, &radio)?,
        };
        let system_mhz = n_channels as u32 * BASIC_CHANNEL_MHZ;
        if let Some(v) = matrix.rows().iter().flatten().find(|&&v| v > system_mhz) {
            return Err(Error::validation(format!(
                "interference entry {v} MHz exceeds the {system_mhz} MHz system band"
            )));
        }
        Ok(Deployment {
            n_channels,
            bss: file.bss,
            matrix,
            radio,
            mac,
            run: file.run.unwrap_or_default(),
            digest: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn n_bss(&self) -> usize {
        self.bss.len()
    }

    pub fn loads(&self) -> Vec<f64> {
        self.bss.iter().map(|b| b.load_mbps).collect()
    }

    /// SHA-256 (hex) of the file text this deployment was read from.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// The same deployment restricted to a subset of BSSs (order preserved).
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        let bss = keep
            .iter()
            .map(|&i| {
                self.bss
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::validation(format!("no bss at index {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut d = Deployment::with_matrix(self.n_channels, bss, self.matrix.select(keep))?;
        d.radio = self.radio;
        d.mac = self.mac.clone();
        Ok(d)
    }
}

/// Derives the interference matrix from AP positions: each entry is the widest
/// power-of-two bandwidth whose per-channel received power still clears CCA.
pub fn derive_interference_matrix(d: &Deployment, radio: &RadioParams) -> Result<InterferenceMatrix> {
    derive_matrix(d.n_channels, &d.bss, radio)
}

fn derive_matrix(n_channels: usize, bss: &[Bss], radio: &RadioParams) -> Result<InterferenceMatrix> {
    let positions = bss
        .iter()
        .map(|b| {
            b.ap.ok_or_else(|| {
                Error::validation(format!(
                    "bss {:?} has no ap position and no [interference] matrix was given",
                    b.id
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = positions.len();
    let mut entries = vec![vec![0u32; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = distance(positions[i], positions[j]);
            let mut best = 0;
            let mut width = 1;
            while width <= n_channels {
                let mhz = width as u32 * BASIC_CHANNEL_MHZ;
                if radio.received_per_channel_dbm(dist, mhz) >= radio.cca_dbm {
                    best = mhz;
                }
                width *= 2;
            }
            entries[i][j] = best;
            entries[j][i] = best;
        }
    }
    InterferenceMatrix::new(entries)
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(id: &str, x: f64) -> Bss {
        Bss::new(id, 50.0, 12000).with_positions([x, 0.0, 0.0], [x, 1.0, 0.0])
    }

    #[test]
    fn colocated_aps_always_overlap() {
        let d = Deployment::with_positions(4, vec![at("A", 0.0), at("B", 0.0)], RadioParams::default())
            .unwrap();
        assert_eq!(d.matrix.get(0, 1), 80);
    }

    #[test]
    fn distant_aps_never_overlap() {
        let d = Deployment::with_positions(4, vec![at("A", 0.0), at("B", 1.0e6)], RadioParams::default())
            .unwrap();
        assert_eq!(d.matrix.get(0, 1), 0);
    }

    #[test]
    fn hundred_metre_threshold_by_hand() {
        // PL(100 m) = 40 + 20 * 2 = 80 dB. Per-channel received power:
        //   20 MHz: 20 - 0      - 80 = -60.00 dBm >= -82
        //   40 MHz: 20 - 3.0103 - 80 = -63.01 dBm >= -82
        //   80 MHz: 20 - 6.0206 - 80 = -66.02 dBm >= -82
        // so the pair overlaps at every width.
        let d = Deployment::with_positions(4, vec![at("A", 0.0), at("B", 100.0)], RadioParams::default())
            .unwrap();
        assert_eq!(d.matrix.get(0, 1), 80);

        // Move the threshold so only 20 MHz clears: need -63.01 < CCA <= -60.
        let radio = RadioParams {
            cca_dbm: -61.0,
            ..RadioParams::default()
        };
        let d = Deployment::with_positions(4, vec![at("A", 0.0), at("B", 100.0)], radio).unwrap();
        assert_eq!(d.matrix.get(0, 1), 20);

        // -66.02 < CCA <= -63.01 admits 20 and 40 MHz.
        let radio = RadioParams {
            cca_dbm: -64.0,
            ..RadioParams::default()
        };
        let d = Deployment::with_positions(4, vec![at("A", 0.0), at("B", 100.0)], radio).unwrap();
        assert_eq!(d.matrix.get(0, 1), 40);
    }

    #[test]
    fn entries_non_increasing_with_distance() {
        let radio = RadioParams {
            cca_dbm: -75.0,
            ..RadioParams::default()
        };
        let mut last = u32::MAX;
        for k in 0..200 {
            let x = 1.0 + k as f64 * 5.0;
            let d = Deployment::with_positions(4, vec![at("A", 0.0), at("B", x)], radio).unwrap();
            let e = d.matrix.get(0, 1);
            assert!(e <= last, "entry grew from {last} to {e} at {x} m");
            last = e;
        }
        assert_eq!(last, 0);
    }

    #[test]
    fn missing_positions_rejected() {
        let err = Deployment::with_positions(4, vec![Bss::new("A", 50.0, 12000)], RadioParams::default())
            .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn parses_file_with_matrix() {
        let text = r#"
[deployment]
n_channels = 4

[[bss]]
id = "A"
load_mbps = 50.0
packet_bits = 12000

[[bss]]
id = "B"
load_mbps = 25.0
packet_bits = 12000

[interference]
matrix = [[0, 40], [40, 0]]

[run]
alpha = 0.5
"#;
        let d = Deployment::from_toml_str(text).unwrap();
        assert_eq!(d.n_bss(), 2);
        assert_eq!(d.matrix.get(1, 0), 40);
        assert_eq!(d.run.alpha, Some(0.5));
        assert_eq!(d.digest().len(), 64);
        assert_eq!(d.mac, MacParams::default());
    }

    #[test]
    fn rejects_bad_files() {
        let base = "[deployment]\nn_channels = 3\n[[bss]]\nid='A'\nload_mbps=1.0\npacket_bits=10\n";
        assert!(Deployment::from_toml_str(base).is_err());
        let zero_load = "[deployment]\nn_channels = 4\n[[bss]]\nid='A'\nload_mbps=0.0\npacket_bits=10\n[interference]\nmatrix=[[0]]\n";
        assert!(Deployment::from_toml_str(zero_load).is_err());
        let wide = "[deployment]\nn_channels = 2\n[[bss]]\nid='A'\nload_mbps=1.0\npacket_bits=10\n[[bss]]\nid='B'\nload_mbps=1.0\npacket_bits=10\n[interference]\nmatrix=[[0,80],[80,0]]\n";
        assert!(Deployment::from_toml_str(wide).is_err());
    }

    #[test]
    fn subset_keeps_matrix_rows() {
        let m = InterferenceMatrix::new(vec![vec![0, 20, 80], vec![20, 0, 40], vec![80, 40, 0]]).unwrap();
        let d = Deployment::with_matrix(
            4,
            vec![Bss::new("A", 1.0, 10), Bss::new("B", 1.0, 10), Bss::new("C", 1.0, 10)],
            m,
        )
        .unwrap();
        let s = d.subset(&[0, 2]).unwrap();
        assert_eq!(s.matrix.get(0, 1), 80);
        assert_eq!(s.bss[1].id, "C");
    }
}
