//! Versioned little-endian binary files for models and latent code sets.
//!
//! Model checkpoints start with `LPL1`, code sets with `LPC1`; both follow
//! the magic with a `u32` format version. Every real is stored as an IEEE
//! `f64`, so round-trips are bitwise. Files are written to a temporary
//! sibling and renamed into place.

use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};
use crate::gan::{GanModel, PriorKind, PriorSpec};
use crate::matrix::Matrix;
use crate::metrics::codes::{LatentCodeSet, RowStatus};
use crate::nn::network::{LayerSpec, MlpNetwork};
use crate::nn::rmsprop::RmsPropState;
use crate::nn::Activation;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LPL1";
pub const CODES_MAGIC: &[u8; 4] = b"LPC1";
pub const FORMAT_VERSION: u32 = 1;

const MAX_PRIOR_DEPTH: usize = 16;

struct Writer(Vec<u8>);

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        let mut w = Writer(magic.to_vec());
        w.u32(FORMAT_VERSION);
        w
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.write_u32::<LittleEndian>(v).unwrap();
    }

    fn u64(&mut self, v: u64) {
        self.0.write_u64::<LittleEndian>(v).unwrap();
    }

    fn f64(&mut self, v: f64) {
        self.0.write_f64::<LittleEndian>(v).unwrap();
    }

    fn reals(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }

    fn text(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn activation(&mut self, a: Activation) {
        let (tag, leak) = match a {
            Activation::Identity => (0, 0.0),
            Activation::Relu => (1, 0.0),
            Activation::LeakyRelu(l) => (2, l),
            Activation::Tanh => (3, 0.0),
            Activation::Sigmoid => (4, 0.0),
        };
        self.u8(tag);
        self.f64(leak);
    }

    fn network(&mut self, net: &MlpNetwork) {
        self.u32(net.layers().len() as u32);
        for layer in net.layers() {
            let spec = layer.spec();
            self.u64(spec.in_dim as u64);
            self.u64(spec.out_dim as u64);
            self.activation(spec.activation);
            self.reals(layer.weights().as_slice());
            self.reals(layer.biases());
        }
    }

    fn optimizer(&mut self, st: &RmsPropState) {
        self.f64(st.decay);
        self.f64(st.epsilon);
        self.f64(st.step_size);
        self.u32(st.accumulators.len() as u32);
        for (w, b) in &st.accumulators {
            self.reals(w);
            self.reals(b);
        }
    }

    fn prior(&mut self, prior: &PriorSpec) {
        match prior.kind() {
            PriorKind::IsotropicGaussian { sigma } => {
                self.u8(0);
                self.u64(prior.dim() as u64);
                self.f64(*sigma);
            }
            PriorKind::Induced { mapping, base } => {
                self.u8(1);
                self.network(mapping);
                self.prior(base);
            }
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Corrupt(format!(
                "file is only {} bytes",
                bytes.len()
            )));
        }
        if &bytes[..4] != magic {
            return Err(Error::Version(format!(
                "expected magic {:?}, found {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&bytes[..4])
            )));
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Version(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Corrupt(format!(
                    "needed {n} bytes at offset {}, only {} remain",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len_field(&mut self, elem_size: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.u64()?;
        let remaining = (self.bytes.len() - self.pos) as u64;
        if n.checked_mul(elem_size as u64)
            .is_none_or(|b| b > remaining)
        {
            return Err(Error::Corrupt(format!(
                "length field {n} at offset {at} exceeds the remaining {remaining} bytes"
            )));
        }
        Ok(n as usize)
    }

    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.len_field(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn text(&mut self) -> Result<String> {
        let n = self.len_field(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Corrupt("invalid UTF-8 label".into()))
    }

    fn activation(&mut self) -> Result<Activation> {
        let tag = self.u8()?;
        let leak = self.f64()?;
        Ok(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::LeakyRelu(leak),
            3 => Activation::Tanh,
            4 => Activation::Sigmoid,
            t => return Err(Error::Corrupt(format!("unknown activation tag {t}"))),
        })
    }

    fn dim(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&d| d > 0 && d <= 1 << 24)
            .ok_or_else(|| Error::Corrupt(format!("implausible dimension {v}")))
    }

    fn network(&mut self) -> Result<MlpNetwork> {
        let count = self.u32()? as usize;
        if count == 0 || count > 1024 {
            return Err(Error::Corrupt(format!("implausible layer count {count}")));
        }
        let mut specs = Vec::with_capacity(count);
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let in_dim = self.dim()?;
            let out_dim = self.dim()?;
            let activation = self.activation()?;
            let w = self.reals()?;
            let b = self.reals()?;
            if w.len() != in_dim * out_dim || b.len() != out_dim {
                return Err(Error::Corrupt(
                    "parameter count does not match layer shape".into(),
                ));
            }
            specs.push(LayerSpec::new(in_dim, out_dim, activation));
            params.push((Matrix::new(in_dim, out_dim, w).map_err(corrupt)?, b));
        }
        MlpNetwork::from_parameters(&specs, params).map_err(corrupt)
    }

    fn optimizer(&mut self) -> Result<RmsPropState> {
        let decay = self.f64()?;
        let epsilon = self.f64()?;
        let step_size = self.f64()?;
        let count = self.u32()? as usize;
        let mut accumulators = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            accumulators.push((self.reals()?, self.reals()?));
        }
        Ok(RmsPropState {
            accumulators,
            decay,
            epsilon,
            step_size,
        })
    }

    fn prior(&mut self, depth: usize) -> Result<PriorSpec> {
        if depth > MAX_PRIOR_DEPTH {
            return Err(Error::Corrupt("prior nesting too deep".into()));
        }
        match self.u8()? {
            0 => {
                let dim = self.dim()?;
                let sigma = self.f64()?;
                PriorSpec::isotropic(dim, sigma).map_err(corrupt)
            }
            1 => {
                let mapping = self.network()?;
                let base = self.prior(depth + 1)?;
                PriorSpec::induced(mapping, base).map_err(corrupt)
            }
            t => Err(Error::Corrupt(format!("unknown prior tag {t}"))),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Corrupt(format!(
                "{} unexpected trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn corrupt(e: Error) -> Error {
    Error::Corrupt(e.to_string())
}

pub fn encode_checkpoint(model: &GanModel) -> Vec<u8> {
    let mut w = Writer::new(CHECKPOINT_MAGIC);
    w.u64(model.step);
    w.u64(model.train_seed);
    w.network(&model.generator);
    w.network(&model.discriminator);
    w.optimizer(&model.generator_opt);
    w.optimizer(&model.discriminator_opt);
    w.prior(&model.prior);
    w.0
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<GanModel> {
    let mut r = Reader::open(bytes, CHECKPOINT_MAGIC)?;
    let step = r.u64()?;
    let train_seed = r.u64()?;
    let generator = r.network()?;
    let discriminator = r.network()?;
    let generator_opt = r.optimizer()?;
    let discriminator_opt = r.optimizer()?;
    let prior = r.prior(0)?;
    r.finish()?;
    let mut model = GanModel::new(
        generator,
        discriminator,
        prior,
        generator_opt.step_size.max(f64::MIN_POSITIVE),
    )
    .map_err(corrupt)?;
    let matches = |st: &RmsPropState, net: &MlpNetwork| {
        st.accumulators.len() == net.layers().len()
            && st.accumulators.iter().zip(net.layers()).all(|((w, b), l)| {
                w.len() == l.weights().as_slice().len() && b.len() == l.biases().len()
            })
    };
    if !matches(&generator_opt, &model.generator)
        || !matches(&discriminator_opt, &model.discriminator)
    {
        return Err(Error::Corrupt(
            "optimizer state does not match network shapes".into(),
        ));
    }
    model.generator_opt = generator_opt;
    model.discriminator_opt = discriminator_opt;
    model.step = step;
    model.train_seed = train_seed;
    Ok(model)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_checkpoint(model: &GanModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_checkpoint(model))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<GanModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

pub fn encode_codes(codes: &LatentCodeSet) -> Vec<u8> {
    let mut w = Writer::new(CODES_MAGIC);
    w.u64(codes.len() as u64);
    w.u64(codes.dim() as u64);
    w.reals(codes.codes.as_slice());
    w.reals(&codes.reversal_losses);
    w.u64(codes.status.len() as u64);
    for s in &codes.status {
        w.u8(s.to_byte());
    }
    w.text(&codes.source);
    w.0
}

pub fn decode_codes(bytes: &[u8]) -> Result<LatentCodeSet> {
    let mut r = Reader::open(bytes, CODES_MAGIC)?;
    let n = r.u64()? as usize;
    let d = r.u64()? as usize;
    let data = r.reals()?;
    if n.checked_mul(d) != Some(data.len()) {
        return Err(Error::Corrupt(format!(
            "{n}x{d} codes but {} values",
            data.len()
        )));
    }
    let losses = r.reals()?;
    let status_len = r.len_field(1)?;
    let status = r
        .take(status_len)?
        .iter()
        .map(|&b| {
            RowStatus::from_byte(b).ok_or_else(|| Error::Corrupt(format!("bad row status {b}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let source = r.text()?;
    r.finish()?;
    let codes = Matrix::new(n, d, data).map_err(corrupt)?;
    LatentCodeSet::new(codes, losses, status, source).map_err(corrupt)
}

pub fn write_codes(codes: &LatentCodeSet, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_codes(codes))
}

pub fn read_codes(path: impl AsRef<Path>) -> Result<LatentCodeSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_codes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::GanArchitecture;

    fn model() -> GanModel {
        let mut arch = GanArchitecture::new(3, 4);
        arch.generator_widths = vec![5];
        arch.discriminator_widths = vec![6];
        let mut m = GanModel::build(&arch, 0.7, 3e-4, 12).unwrap();
        m.step = 42;
        m.train_seed = 9;
        m.generator_opt.accumulators[0].0[2] = 0.125;
        let h = MlpNetwork::init(&[LayerSpec::new(3, 3, Activation::Identity)], 1).unwrap();
        m.prior = PriorSpec::induced(h, PriorSpec::isotropic(3, 1.0).unwrap()).unwrap();
        m
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = model();
        let bytes = encode_checkpoint(&m);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn wrong_magic_is_version_error() {
        let mut bytes = encode_checkpoint(&model());
        bytes[3] = b'2';
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Version(_))));
        let mut bytes = encode_checkpoint(&model());
        bytes[4] = 7;
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Version(_))));
    }

    #[test]
    fn every_truncation_is_corrupt() {
        let bytes = encode_checkpoint(&model());
        for cut in (8..bytes.len()).step_by(13) {
            assert!(
                matches!(decode_checkpoint(&bytes[..cut]), Err(Error::Corrupt(_))),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn huge_length_field_is_corrupt() {
        let mut bytes = encode_checkpoint(&model());
        // first layer's weight count lives after magic, version, step, seed,
        // layer count, in/out dims and activation
        let off = 4 + 4 + 8 + 8 + 4 + 8 + 8 + 9;
        bytes[off..off + 8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Corrupt(_))));
    }

    #[test]
    fn codes_round_trip() {
        let codes = LatentCodeSet::new(
            Matrix::from_rows(&[[1.0, -0.0], [3.5, 2.0]]).unwrap(),
            vec![1e-9, 0.5],
            vec![RowStatus::Converged, RowStatus::Failed],
            "ring2d/step_00000010",
        )
        .unwrap();
        let back = decode_codes(&encode_codes(&codes)).unwrap();
        assert_eq!(back, codes);
        assert_eq!(back.codes.get(0, 1).to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/model.lpl");
        let m = model();
        write_checkpoint(&m, &p).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), m);
    }
}
