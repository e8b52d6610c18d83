//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Unknown keys are rejected so typos do not silently fall back to defaults.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::detectors::ML_HYPOTHESIS_WARN;
use crate::error::{Error, Result};
use crate::imreconet::{TrainConfig, Variant};
use crate::phy::{pilot_error_variance, QamConstellation, TacStrategy, TacTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelMode {
    /// One channel draw per seed, shared by every frame, split and SNR.
    Static,
    /// A fresh channel per frame.
    Block,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DetectorKind {
    Ml,
    Somp,
    ImReco,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::Somp => "somp",
            DetectorKind::ImReco => "imreconet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(DetectorKind::Ml),
            "somp" => Ok(DetectorKind::Somp),
            "imreconet" | "imreco" => Ok(DetectorKind::ImReco),
            other => Err(Error::Config(format!("unknown detector `{other}`"))),
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let mut out: Vec<Self> = s.split(',').filter(|p| !p.trim().is_empty()).map(Self::parse).collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("empty detector list".into()));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TacPreset {
    Lexicographic,
    /// The four-entry 4x2 table with non-lexicographic order.
    Table4x2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n_t: usize,
    pub n_u: usize,
    pub n_r: usize,
    pub t: usize,
    pub m: usize,
    pub snr_db: Vec<f64>,
    pub rho: f64,
    /// Per-entry variance of the channel estimation error.
    pub csi_error_var: f64,
    /// Noise level of the sparse-recovery formulation; recorded, not used.
    pub epsilon: Option<f64>,
    pub channel: ChannelMode,
    /// Frames generated per SNR point, before the split.
    pub frames: usize,
    /// Train/validation/test percentages.
    pub split: [usize; 3],
    pub seed: u64,
    pub detectors: Vec<DetectorKind>,
    pub tac: TacPreset,
    pub train: TrainConfig,
    /// Sweep points in dB of the CSI error variance; `-inf` means perfect CSI.
    pub sigma_c_db: Vec<f64>,
    pub sweep_snr_db: f64,
    pub bench_trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_t: 4,
            n_u: 1,
            n_r: 1,
            t: 16,
            m: 4,
            snr_db: vec![5.0, 10.0, 15.0, 20.0, 25.0],
            rho: 0.0,
            csi_error_var: 0.0,
            epsilon: None,
            channel: ChannelMode::Static,
            frames: 100_000,
            split: [60, 20, 20],
            seed: 0,
            detectors: vec![DetectorKind::Ml, DetectorKind::Somp, DetectorKind::ImReco],
            tac: TacPreset::Lexicographic,
            train: TrainConfig::default(),
            sigma_c_db: vec![f64::NEG_INFINITY, -30.0, -25.0, -20.0, -15.0, -10.0],
            sweep_snr_db: 15.0,
            bench_trials: 30,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn float(key: &str, v: &str) -> Result<f64> {
    match v.to_ascii_lowercase().as_str() {
        "-inf" => Ok(f64::NEG_INFINITY),
        "inf" | "+inf" => Ok(f64::INFINITY),
        _ => num(key, v),
    }
}

fn floats(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|p| float(key, p.trim())).collect()
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut n_r_set = false;
        let (mut n_p, mut e_p, mut sz2) = (None, None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            let tc = &mut cfg.train;
            match key {
                "n_t" => cfg.n_t = num(key, v)?,
                "n_u" => cfg.n_u = num(key, v)?,
                "n_r" => {
                    cfg.n_r = num(key, v)?;
                    n_r_set = true;
                }
                "t" => cfg.t = num(key, v)?,
                "m" => cfg.m = num(key, v)?,
                "snr_db" => cfg.snr_db = floats(key, v)?,
                "rho" => cfg.rho = float(key, v)?,
                "csi_error_var" => cfg.csi_error_var = float(key, v)?,
                "n_pilots" => n_p = Some(num::<usize>(key, v)?),
                "pilot_power" => e_p = Some(float(key, v)?),
                "sigma_z2" => sz2 = Some(float(key, v)?),
                "epsilon" => cfg.epsilon = Some(float(key, v)?),
                "channel" => {
                    cfg.channel = match v {
                        "static" => ChannelMode::Static,
                        "block" => ChannelMode::Block,
                        _ => return Err(Error::Config(format!("`channel` must be static or block, got `{v}`"))),
                    }
                }
                "frames" => cfg.frames = num(key, v)?,
                "split" => {
                    let parts: Vec<usize> = v.split(',').map(|p| num(key, p.trim())).collect::<Result<_>>()?;
                    cfg.split = parts
                        .try_into()
                        .map_err(|_| Error::Config("`split` needs three percentages".into()))?;
                }
                "seed" => cfg.seed = num(key, v)?,
                "detectors" => cfg.detectors = DetectorKind::parse_list(v)?,
                "tac_table" => {
                    cfg.tac = match v {
                        "lexicographic" => TacPreset::Lexicographic,
                        "table_4x2" => TacPreset::Table4x2,
                        _ => return Err(Error::Config(format!("unknown tac_table `{v}`"))),
                    }
                }
                "variant" => tc.variant = Variant::parse(v).map_err(|e| Error::Config(e.to_string()))?,
                "lr" => tc.lr = float(key, v)?,
                "batch" => tc.batch = num(key, v)?,
                "epochs" => tc.max_epochs = num(key, v)?,
                "gamma1" => tc.gamma1 = float(key, v)?,
                "gamma2" => tc.gamma2 = Some(float(key, v)?),
                "gamma2_ratio" => tc.gamma2_ratio = float(key, v)?,
                "aapd_conv1" => tc.aapd_widths.conv1 = num(key, v)?,
                "aapd_conv2" => tc.aapd_widths.conv2 = num(key, v)?,
                "aapd_fc1" => tc.aapd_widths.fc1 = num(key, v)?,
                "aapd_fc2" => tc.aapd_widths.fc2 = num(key, v)?,
                "se_hidden" => tc.se_widths.hidden = num(key, v)?,
                "sigma_c_db" => cfg.sigma_c_db = floats(key, v)?,
                "sweep_snr_db" => cfg.sweep_snr_db = float(key, v)?,
                "bench_trials" => cfg.bench_trials = num(key, v)?,
                _ => return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1))),
            }
        }
        if !n_r_set {
            cfg.n_r = cfg.n_u;
        }
        match (n_p, e_p, sz2) {
            (None, None, None) => {}
            (Some(n), Some(e), Some(z)) => {
                if n == 0 || !(e > 0.0) || !(z >= 0.0) {
                    return Err(Error::Config("pilot model needs n_pilots > 0, pilot_power > 0, sigma_z2 >= 0".into()));
                }
                cfg.csi_error_var = pilot_error_variance(cfg.n_t, z, n, e);
            }
            _ => return Err(Error::Config("n_pilots, pilot_power and sigma_z2 must be given together".into())),
        }
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_u == 0 || self.n_u >= self.n_t {
            return bad(format!("need 0 < n_u < n_t, got n_u={} n_t={}", self.n_u, self.n_t));
        }
        if self.n_u > self.n_r {
            return bad(format!("zero forcing needs n_u <= n_r, got n_u={} n_r={}", self.n_u, self.n_r));
        }
        if self.t == 0 || self.frames == 0 {
            return bad("t and frames must be positive".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return bad("snr_db needs finite values or inf".into());
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must be in [0, 1), got {}", self.rho));
        }
        if !(self.csi_error_var >= 0.0) || !self.csi_error_var.is_finite() {
            return bad(format!("csi_error_var must be >= 0, got {}", self.csi_error_var));
        }
        if self.split.iter().sum::<usize>() != 100 || self.split.contains(&0) {
            return bad(format!("split must be three positive percentages summing to 100, got {:?}", self.split));
        }
        if self.sigma_c_db.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
            return bad("sigma_c_db values must be finite or -inf".into());
        }
        if self.bench_trials < 30 {
            return bad("bench_trials must be at least 30".into());
        }
        if self.tac == TacPreset::Table4x2 && (self.n_t, self.n_u) != (4, 2) {
            return bad("tac_table = table_4x2 needs n_t = 4, n_u = 2".into());
        }
        QamConstellation::new(self.m).map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.table()?;
        Ok(())
    }

    pub fn table(&self) -> Result<TacTable> {
        match self.tac {
            TacPreset::Table4x2 => Ok(TacTable::preset_4x2()),
            TacPreset::Lexicographic => TacTable::build(self.n_t, self.n_u, TacStrategy::Lexicographic)
                .map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn qam(&self) -> Result<QamConstellation> {
        QamConstellation::new(self.m)
    }

    /// Frame counts of the three splits; the test split takes the remainder.
    pub fn split_counts(&self) -> [usize; 3] {
        let train = self.frames * self.split[0] / 100;
        let val = self.frames * self.split[1] / 100;
        [train, val, self.frames - train - val]
    }

    /// Warning text when exhaustive ML would be impractically large.
    pub fn ml_warning(&self) -> Option<String> {
        let hyp = self.table().ok()?.len() as u128 * (self.m as u128).pow(self.n_u as u32);
        (self.detectors.contains(&DetectorKind::Ml) && hyp > ML_HYPOTHESIS_WARN)
            .then(|| format!("ML searches {hyp} hypotheses per slot (above {ML_HYPOTHESIS_WARN}); expect long runtimes"))
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
        let tc = &self.train;
        let mut s = String::new();
        let _ = writeln!(s, "n_t = {}\nn_u = {}\nn_r = {}\nt = {}\nm = {}", self.n_t, self.n_u, self.n_r, self.t, self.m);
        let _ = writeln!(s, "snr_db = {}\nrho = {}\ncsi_error_var = {}", list(&self.snr_db), self.rho, self.csi_error_var);
        if let Some(e) = self.epsilon {
            let _ = writeln!(s, "epsilon = {e}");
        }
        let channel = match self.channel {
            ChannelMode::Static => "static",
            ChannelMode::Block => "block",
        };
        let tac = match self.tac {
            TacPreset::Lexicographic => "lexicographic",
            TacPreset::Table4x2 => "table_4x2",
        };
        let dets = self.detectors.iter().map(|d| d.name()).collect::<Vec<_>>().join(",");
        let [a, b, c] = self.split;
        let _ = writeln!(s, "channel = {channel}\nframes = {}\nsplit = {a},{b},{c}\nseed = {}", self.frames, self.seed);
        let _ = writeln!(s, "detectors = {dets}\ntac_table = {tac}\nvariant = {}", tc.variant.name());
        let _ = writeln!(s, "lr = {}\nbatch = {}\nepochs = {}\ngamma1 = {}", tc.lr, tc.batch, tc.max_epochs, tc.gamma1);
        if let Some(g) = tc.gamma2 {
            let _ = writeln!(s, "gamma2 = {g}");
        }
        let w = tc.aapd_widths;
        let _ = writeln!(s, "gamma2_ratio = {}", tc.gamma2_ratio);
        let _ = writeln!(s, "aapd_conv1 = {}\naapd_conv2 = {}\naapd_fc1 = {}\naapd_fc2 = {}", w.conv1, w.conv2, w.fc1, w.fc2);
        let _ = writeln!(s, "se_hidden = {}", tc.se_widths.hidden);
        let _ = writeln!(s, "sigma_c_db = {}\nsweep_snr_db = {}", list(&self.sigma_c_db), fmt_f64(self.sweep_snr_db));
        let _ = writeln!(s, "bench_trials = {}", self.bench_trials);
        s
    }
}

/// Formats infinities the way the parser reads them.
pub fn fmt_f64(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x}")
    }
}
