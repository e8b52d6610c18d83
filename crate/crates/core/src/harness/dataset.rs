//! Dataset generation and the `IMDS` binary file.
//!
//! Layout (little endian): magic `IMDS`, version u16, `n_t n_u n_r t m` as
//! u16, SNR in dB as f32, record count u64, seed u64. Each record holds the
//! packed bits (MSB first, zero padded), `Y`, `H`, `H_est` as interleaved f32
//! pairs in row-major order, the activation pattern as one byte per antenna,
//! and `S` as interleaved f32 pairs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{fmt_f64, ChannelMode, ExperimentConfig};
use crate::error::{invalid, Error, Result};
use crate::linalg::{ComplexMatrix, Rng};
use crate::phy::{
    corrupt_csi, make_correlated, rayleigh_channel, simulate_frame, Aap, ChannelRealization,
    FrameRecord, TacTable,
};

pub const MAGIC: &[u8; 4] = b"IMDS";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 5 * 2 + 4 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn code(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetHeader {
    pub n_t: u16,
    pub n_u: u16,
    pub n_r: u16,
    pub t: u16,
    pub m: u16,
    pub snr_db: f32,
    pub count: u64,
    pub seed: u64,
}

impl DatasetHeader {
    pub fn for_config(cfg: &ExperimentConfig, snr_db: f64, count: usize) -> Result<Self> {
        let small = |v: usize, what: &str| u16::try_from(v).map_err(|_| invalid(format!("{what} = {v} exceeds u16")));
        Ok(Self {
            n_t: small(cfg.n_t, "n_t")?,
            n_u: small(cfg.n_u, "n_u")?,
            n_r: small(cfg.n_r, "n_r")?,
            t: small(cfg.t, "t")?,
            m: small(cfg.m, "m")?,
            snr_db: snr_db as f32,
            count: count as u64,
            seed: cfg.seed,
        })
    }

    /// Errors unless the file was generated for the same dimensions and SNR.
    pub fn check_matches(&self, cfg: &ExperimentConfig, snr_db: f64) -> Result<()> {
        let want = Self::for_config(cfg, snr_db, self.count as usize)?;
        let dims = |h: &Self| (h.n_t, h.n_u, h.n_r, h.t, h.m, h.snr_db.to_bits());
        if dims(self) != dims(&want) {
            return Err(Error::Config(format!(
                "dataset header (n_t,n_u,n_r,t,m,snr) = {:?} does not match config {:?}",
                (self.n_t, self.n_u, self.n_r, self.t, self.m, self.snr_db),
                (want.n_t, want.n_u, want.n_r, want.t, want.m, want.snr_db)
            )));
        }
        Ok(())
    }

    fn bit_count(&self, table: &TacTable) -> usize {
        table.spatial_bits() + self.n_u as usize * (self.m as f64).log2().round() as usize * self.t as usize
    }

    fn record_len(&self, table: &TacTable) -> usize {
        let (n_t, n_u, n_r, t) = (self.n_t as usize, self.n_u as usize, self.n_r as usize, self.t as usize);
        self.bit_count(table).div_ceil(8) + 8 * (n_r * t + 2 * n_r * n_t + n_u * t) + n_t
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.n_t, self.n_u, self.n_r, self.t, self.m] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.snr_db.to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
    }

    fn read(buf: &[u8]) -> Result<Self> {
        if buf.len() < HEADER_LEN || &buf[..4] != MAGIC {
            return Err(Error::Format("not an IMDS dataset".into()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([buf[i], buf[i + 1]]);
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported IMDS version {version}")));
        }
        let u64_at = |i: usize| u64::from_le_bytes(buf[i..i + 8].try_into().expect("8 bytes"));
        Ok(Self {
            n_t: u16_at(6),
            n_u: u16_at(8),
            n_r: u16_at(10),
            t: u16_at(12),
            m: u16_at(14),
            snr_db: f32::from_le_bytes(buf[16..20].try_into().expect("4 bytes")),
            count: u64_at(20),
            seed: u64_at(28),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<FrameRecord>,
}

fn put_matrix(out: &mut Vec<u8>, m: &ComplexMatrix) {
    for z in m.data() {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
}

fn get_matrix(buf: &[u8], pos: &mut usize, rows: usize, cols: usize) -> ComplexMatrix {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re = f32::from_le_bytes(buf[*pos..*pos + 4].try_into().expect("4 bytes"));
        let im = f32::from_le_bytes(buf[*pos + 4..*pos + 8].try_into().expect("4 bytes"));
        data.push(Complex64::new(re.into(), im.into()));
        *pos += 8;
    }
    ComplexMatrix::from_vec(rows, cols, data).expect("consistent shape")
}

impl Dataset {
    pub fn to_bytes(&self, table: &TacTable) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + self.records.len() * h.record_len(table));
        h.write(&mut out);
        for r in &self.records {
            for chunk in r.bits.chunks(8) {
                let byte = chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)));
                out.push(byte);
            }
            put_matrix(&mut out, &r.y);
            put_matrix(&mut out, &r.h);
            put_matrix(&mut out, &r.h_est);
            out.extend_from_slice(r.aap(table).flags());
            put_matrix(&mut out, &r.s);
        }
        out
    }

    /// Parses a dataset; the TAC table maps stored patterns back to indices.
    pub fn from_bytes(buf: &[u8], table: &TacTable) -> Result<Self> {
        let header = DatasetHeader::read(buf)?;
        if (header.n_t as usize, header.n_u as usize) != (table.n_t(), table.n_u()) {
            return Err(Error::Format(format!(
                "dataset is for n_t={} n_u={}, table is {}x{}",
                header.n_t,
                header.n_u,
                table.n_t(),
                table.n_u()
            )));
        }
        let rec_len = header.record_len(table);
        let expected = (header.count as usize)
            .checked_mul(rec_len)
            .and_then(|v| v.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Format("record count overflows".into()))?;
        if buf.len() != expected {
            return Err(Error::Format(format!(
                "header declares {} records ({expected} bytes), file has {} bytes",
                header.count,
                buf.len()
            )));
        }
        let (n_t, n_u, n_r, t) = (header.n_t as usize, header.n_u as usize, header.n_r as usize, header.t as usize);
        let nbits = header.bit_count(table);
        let mut records = Vec::with_capacity(header.count as usize);
        let mut pos = HEADER_LEN;
        for i in 0..header.count as usize {
            let packed = &buf[pos..pos + nbits.div_ceil(8)];
            pos += packed.len();
            let bits: Vec<u8> = (0..nbits).map(|k| (packed[k / 8] >> (7 - k % 8)) & 1).collect();
            let y = get_matrix(buf, &mut pos, n_r, t);
            let h = get_matrix(buf, &mut pos, n_r, n_t);
            let h_est = get_matrix(buf, &mut pos, n_r, n_t);
            let g = Aap::from_flags(buf[pos..pos + n_t].to_vec())
                .map_err(|e| Error::Format(format!("record {i}: {e}")))?;
            pos += n_t;
            let tac_index = table
                .index_of(&g.support())
                .filter(|_| g.active_count() == n_u)
                .ok_or_else(|| Error::Format(format!("record {i}: pattern {:?} is not a legal TAC", g.flags())))?;
            let s = get_matrix(buf, &mut pos, n_u, t);
            records.push(FrameRecord { bits, tac_index, y, h, h_est, s });
        }
        Ok(Self { header, records })
    }

    pub fn write(&self, path: &Path, table: &TacTable) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(&self.to_bytes(table))?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path, table: &TacTable) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?, table)
    }
}

/// `splitmix64` finalizer used to derive independent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the frames of one (split, SNR) file.
pub fn frame_seed(seed: u64, split: Split, snr_db: f64) -> u64 {
    mix(mix(seed ^ split.code().rotate_left(48)) ^ (snr_db as f32).to_bits() as u64)
}

/// The shared channel of a static-channel experiment.
pub fn static_channel(cfg: &ExperimentConfig) -> Result<ComplexMatrix> {
    let mut rng = Rng::stream(mix(cfg.seed), 0);
    correlate(cfg, rayleigh_channel(&mut rng, cfg.n_r, cfg.n_t))
}

fn correlate(cfg: &ExperimentConfig, h: ComplexMatrix) -> Result<ComplexMatrix> {
    if cfg.rho > 0.0 {
        make_correlated(&h, cfg.rho)
    } else {
        Ok(h)
    }
}

fn round_f32(m: &mut ComplexMatrix) {
    for z in m.data_mut() {
        *z = Complex64::new(z.re as f32 as f64, z.im as f32 as f64);
    }
}

/// Generates `count` frames for one split and SNR. Frame `i` depends only on
/// `(seed, split, snr, i)`, so the output does not depend on thread count.
/// Values are rounded to single precision so that files and memory agree.
pub fn generate(cfg: &ExperimentConfig, split: Split, snr_db: f64, count: usize) -> Result<Vec<FrameRecord>> {
    let table = cfg.table()?;
    let qam = cfg.qam()?;
    let shared = match cfg.channel {
        ChannelMode::Static => Some(static_channel(cfg)?),
        ChannelMode::Block => None,
    };
    let fseed = frame_seed(cfg.seed, split, snr_db);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::stream(fseed, i as u64);
            let h = match &shared {
                Some(h) => h.clone(),
                None => correlate(cfg, rayleigh_channel(&mut rng, cfg.n_r, cfg.n_t))?,
            };
            let mut chan = ChannelRealization::perfect(h, cfg.rho);
            let mut rec = simulate_frame(&table, &qam, cfg.t, &chan, snr_db, &mut rng)?;
            if cfg.csi_error_var > 0.0 {
                chan.h_est = corrupt_csi(&chan.h, cfg.csi_error_var, &mut rng)?;
                rec.h_est = chan.h_est;
            }
            for m in [&mut rec.y, &mut rec.h, &mut rec.h_est, &mut rec.s] {
                round_f32(m);
            }
            Ok(rec)
        })
        .collect()
}

pub fn dataset_path(dir: &Path, split: Split, snr_db: f64) -> PathBuf {
    dir.join(format!("{}_snr{}.imds", split.name(), fmt_f64(snr_db)))
}

/// Generates and writes the three split files for every SNR point.
pub fn generate_all(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    let table = cfg.table()?;
    let counts = cfg.split_counts();
    let mut written = Vec::new();
    for &snr in &cfg.snr_db {
        for (split, &count) in Split::ALL.iter().zip(&counts) {
            let records = generate(cfg, *split, snr, count)?;
            let ds = Dataset { header: DatasetHeader::for_config(cfg, snr, count)?, records };
            let path = dataset_path(dir, *split, snr);
            ds.write(&path, &table)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Reads one split file and checks it against the configuration.
pub fn load_split(cfg: &ExperimentConfig, dir: &Path, split: Split, snr_db: f64) -> Result<Dataset> {
    let path = dataset_path(dir, split, snr_db);
    if !path.exists() {
        return Err(Error::Config(format!("missing dataset {}", path.display())));
    }
    let ds = Dataset::read(&path, &cfg.table()?)?;
    ds.header.check_matches(cfg, snr_db)?;
    Ok(ds)
}
