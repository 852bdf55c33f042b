//! Self-describing measurement file.
//!
//! Little-endian, fixed field order:
//!
//! ```text
//! magic        8 bytes  "BIGCSBND"
//! version      u16      1
//! side         u32      N (image is N x N)
//! m            u64      measurement count
//! seed         u64      sensing seed
//! levels       u8       wavelet levels S
//! lambda tag   u8       0 = relative to ||(Phi Psi)^T y||_inf, 1 = fixed
//! lambda value f64
//! weighting    u8       0 = tree weighted, 1 = none
//! p_percent    f64
//! epsilon tag  u8       0 = relative to max |x|, 1 = absolute
//! epsilon      f64
//! peak         f64      dynamic range L
//! y            m x f64
//! crc32        u32      over every preceding byte
//! ```

use std::path::Path;

use bigcs_core::solver::LambdaRule;
use bigcs_core::tssp::EpsilonRule;

use crate::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"BIGCSBND";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 8 + 2 + 4 + 8 + 8 + 1 + 1 + 8 + 1 + 8 + 1 + 8 + 8;
pub const TRAILER_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Tree,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBundle {
    pub side: u32,
    pub seed: u64,
    pub levels: u8,
    pub lambda: LambdaRule,
    pub weighting: Weighting,
    pub p_percent: f64,
    pub epsilon: EpsilonRule,
    pub peak: f64,
    pub y: Vec<f64>,
}

impl MeasurementBundle {
    pub fn n(&self) -> usize {
        self.side as usize * self.side as usize
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn rate(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 8 * self.y.len() + TRAILER_LEN
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.side.to_le_bytes());
        out.extend_from_slice(&(self.y.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.push(self.levels);
        let (tag, value) = match self.lambda {
            LambdaRule::Relative(v) => (0u8, v),
            LambdaRule::Fixed(v) => (1, v),
        };
        out.push(tag);
        out.extend_from_slice(&value.to_le_bytes());
        out.push(match self.weighting {
            Weighting::Tree => 0,
            Weighting::None => 1,
        });
        out.extend_from_slice(&self.p_percent.to_le_bytes());
        let (tag, value) = match self.epsilon {
            EpsilonRule::Relative(v) => (0u8, v),
            EpsilonRule::Absolute(v) => (1, v),
        };
        out.push(tag);
        out.extend_from_slice(&value.to_le_bytes());
        out.extend_from_slice(&self.peak.to_le_bytes());
        for v in &self.y {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let fail = |msg: String| CliError::Format(msg);
        if bytes.len() < HEADER_LEN + TRAILER_LEN {
            return Err(fail(format!("bundle is {} bytes, shorter than a header", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(fail("not a measurement bundle (bad magic)".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - TRAILER_LEN);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(fail(format!(
                "checksum mismatch: stored {stored:08x}, computed {actual:08x}"
            )));
        }

        let mut r = Reader { buf: body, pos: 8 };
        let version = r.u16();
        if version != VERSION {
            return Err(fail(format!("unsupported bundle version {version}")));
        }
        let side = r.u32();
        let m = r.u64();
        let seed = r.u64();
        let levels = r.u8();
        let lambda = match (r.u8(), r.f64()) {
            (0, v) => LambdaRule::Relative(v),
            (1, v) => LambdaRule::Fixed(v),
            (t, _) => return Err(fail(format!("unknown lambda rule tag {t}"))),
        };
        let weighting = match r.u8() {
            0 => Weighting::Tree,
            1 => Weighting::None,
            t => return Err(fail(format!("unknown weighting tag {t}"))),
        };
        let p_percent = r.f64();
        let epsilon = match (r.u8(), r.f64()) {
            (0, v) => EpsilonRule::Relative(v),
            (1, v) => EpsilonRule::Absolute(v),
            (t, _) => return Err(fail(format!("unknown epsilon tag {t}"))),
        };
        let peak = r.f64();
        debug_assert_eq!(r.pos, HEADER_LEN);

        let n = side as u64 * side as u64;
        if side == 0 || !side.is_power_of_two() {
            return Err(fail(format!("image side {side} is not a power of two")));
        }
        if m == 0 || m > n {
            return Err(fail(format!("measurement count {m} outside 1..={n}")));
        }
        let payload = body.len() - HEADER_LEN;
        if payload as u64 != 8 * m {
            return Err(fail(format!("payload is {payload} bytes, header promises {}", 8 * m)));
        }
        let y = body[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            side,
            seed,
            levels,
            lambda,
            weighting,
            p_percent,
            epsilon,
            peak,
            y,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::decode(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const K: usize>(&mut self) -> [u8; K] {
        let out = self.buf[self.pos..self.pos + K].try_into().unwrap();
        self.pos += K;
        out
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}
