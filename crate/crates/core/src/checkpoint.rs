//! Binary checkpoints of a [`GanBundle`].
//!
//! Layout (little endian): magic `ACG1`, `u16` version, mode byte, dims
//! `N, h, f, m` as `u32`, trained epochs `u64`, then one block per network
//! (tag, layer list, `f64` parameters, Adam state) and a `key=value` echo block.

use std::io::Write;
use std::path::Path;

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::gan::{GanBundle, GanDims, GanMode};
use crate::network::{Activation, LayerSpec, NetworkSpec, ParamSet};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ACG1";
pub const VERSION: u16 = 1;

const TAG_ENCODER: u8 = 0;
const TAG_DECODER: u8 = 1;
const TAG_SIMULATOR: u8 = 2;
const TAG_CRITIC: u8 = 3;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn tensors<S: Scalar>(&mut self, ts: &[Tensor<S>]) {
        for t in ts {
            for &v in t.data() {
                self.f64(v.as_f64());
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::CorruptCheckpoint(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn str(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        String::from_utf8(self.take(n, what)?.to_vec())
            .map_err(|_| Error::CorruptCheckpoint(format!("{what} is not UTF-8")))
    }
    fn tensors<S: Scalar>(&mut self, shapes: &[(usize, usize)], what: &str) -> Result<Vec<Tensor<S>>> {
        shapes
            .iter()
            .map(|&(r, c)| {
                let raw = self.take(r * c * 8, what)?;
                let data = raw
                    .chunks_exact(8)
                    .map(|b| S::lit(f64::from_le_bytes(b.try_into().unwrap())))
                    .collect();
                Tensor::new(r, c, data).map_err(|e| Error::CorruptCheckpoint(format!("{what}: {e}")))
            })
            .collect()
    }
}

fn write_network<S: Scalar>(w: &mut Writer, tag: u8, p: &ParamSet<S>) {
    w.u8(tag);
    let layers = &p.spec().layers;
    w.u32(layers.len());
    for l in layers {
        w.u32(l.input);
        w.u32(l.output);
        let (code, slope) = match l.activation {
            Activation::LeakyRelu(s) => (0, s),
            Activation::Tanh => (1, 0.0),
            Activation::Identity => (2, 0.0),
        };
        w.u8(code);
        w.f64(slope);
        w.u8(l.dropout.is_some() as u8);
        w.f64(l.dropout.unwrap_or(0.0));
    }
    w.tensors(p.tensors());
    let a = &p.adam;
    w.u64(a.step);
    for v in [a.learning_rate, a.beta1, a.beta2, a.epsilon] {
        w.f64(v.as_f64());
    }
    w.tensors(&a.first_moment);
    w.tensors(&a.second_moment);
}

fn read_network<S: Scalar>(r: &mut Reader, expected_tag: u8) -> Result<ParamSet<S>> {
    let tag = r.u8("network tag")?;
    if tag != expected_tag {
        return Err(Error::CorruptCheckpoint(format!(
            "expected network tag {expected_tag}, found {tag}"
        )));
    }
    let n = r.u32("layer count")?;
    if n == 0 || n > 1024 {
        return Err(Error::CorruptCheckpoint(format!("implausible layer count {n}")));
    }
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let input = r.u32("layer input")?;
        let output = r.u32("layer output")?;
        let code = r.u8("activation")?;
        let slope = r.f64("slope")?;
        let activation = match code {
            0 => Activation::LeakyRelu(slope),
            1 => Activation::Tanh,
            2 => Activation::Identity,
            other => return Err(Error::CorruptCheckpoint(format!("unknown activation {other}"))),
        };
        let has_dropout = r.u8("dropout flag")?;
        let rate = r.f64("dropout rate")?;
        let mut l = LayerSpec::new(input, output, activation);
        if has_dropout != 0 {
            l = l.with_dropout(rate);
        }
        layers.push(l);
    }
    let spec = NetworkSpec::new(layers).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let shapes = spec.param_shapes();
    let tensors = r.tensors(&shapes, "parameters")?;
    let step = r.u64("adam step")?;
    let lr = S::lit(r.f64("learning rate")?);
    let b1 = S::lit(r.f64("beta1")?);
    let b2 = S::lit(r.f64("beta2")?);
    let eps = S::lit(r.f64("epsilon")?);
    let mut adam = AdamState::new(lr, b1, b2, &shapes);
    adam.epsilon = eps;
    adam.step = step;
    adam.first_moment = r.tensors(&shapes, "first moments")?;
    adam.second_moment = r.tensors(&shapes, "second moments")?;
    ParamSet::from_tensors(spec, tensors, adam)
}

pub fn to_bytes<S: Scalar>(bundle: &GanBundle<S>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u16(VERSION);
    w.u8(match bundle.mode {
        GanMode::Cgan => 0,
        GanMode::Acgan => 1,
    });
    let d = bundle.dims;
    for v in [d.assets, d.h, d.f, d.latent] {
        w.u32(v);
    }
    w.u64(bundle.trained_epochs as u64);
    write_network(&mut w, TAG_ENCODER, &bundle.encoder);
    if let Some(f) = &bundle.decoder {
        write_network(&mut w, TAG_DECODER, f);
    }
    write_network(&mut w, TAG_SIMULATOR, &bundle.simulator);
    write_network(&mut w, TAG_CRITIC, &bundle.discriminator);
    w.u32(bundle.config_echo.len());
    for (k, v) in &bundle.config_echo {
        w.str(k);
        w.str(v);
    }
    w.0
}

/// Parses a checkpoint. With `expected` set, a bundle of the other mode is a
/// mode error.
pub fn from_bytes<S: Scalar>(buf: &[u8], expected: Option<GanMode>) -> Result<GanBundle<S>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    let mode = match r.u8("mode")? {
        0 => GanMode::Cgan,
        1 => GanMode::Acgan,
        other => return Err(Error::CorruptCheckpoint(format!("unknown mode byte {other}"))),
    };
    if let Some(want) = expected {
        if want != mode {
            return Err(Error::Mode(format!("checkpoint holds a {mode} model, expected {want}")));
        }
    }
    let dims = GanDims {
        assets: r.u32("N")?,
        h: r.u32("h")?,
        f: r.u32("f")?,
        latent: r.u32("m")?,
    };
    let trained_epochs = r.u64("epochs")? as usize;
    let encoder = read_network(&mut r, TAG_ENCODER)?;
    let decoder = match mode {
        GanMode::Acgan => Some(read_network(&mut r, TAG_DECODER)?),
        GanMode::Cgan => None,
    };
    let simulator = read_network(&mut r, TAG_SIMULATOR)?;
    let discriminator = read_network(&mut r, TAG_CRITIC)?;
    let n = r.u32("config echo")?;
    let mut config_echo = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        config_echo.push((r.str("config key")?, r.str("config value")?));
    }
    if r.pos != buf.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes",
            buf.len() - r.pos
        )));
    }
    let bundle = GanBundle {
        mode,
        dims,
        encoder,
        decoder,
        simulator,
        discriminator,
        trained_epochs,
        config_echo,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn save<S: Scalar>(bundle: &GanBundle<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(bundle);
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn load<S: Scalar>(path: impl AsRef<Path>, expected: Option<GanMode>) -> Result<GanBundle<S>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::WindowConfig;
    use crate::gan::{build_networks, Architecture};
    use crate::network::AdamConfig;
    use crate::random::RandomSource;

    fn bundle(mode: GanMode) -> GanBundle<f64> {
        let dims = GanDims::new(2, WindowConfig::new(6, 3).unwrap(), 5).unwrap();
        let mut b = build_networks(dims, &Architecture::compact(12), mode, AdamConfig::default(), &mut RandomSource::seeded(3)).unwrap();
        b.trained_epochs = 7;
        b.discriminator.adam.step = 7;
        b.discriminator.adam.first_moment[0].data_mut()[0] = 0.125;
        b.config_echo = vec![("lambda1".into(), "10".into()), ("seed".into(), "3".into())];
        b
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        for mode in [GanMode::Cgan, GanMode::Acgan] {
            let b = bundle(mode);
            let back: GanBundle<f64> = from_bytes(&to_bytes(&b), Some(mode)).unwrap();
            assert_eq!(back, b);
            let bits = |x: &GanBundle<f64>| x.simulator.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back), bits(&b));
        }
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = to_bytes(&bundle(GanMode::Acgan));
        for cut in [3, 10, 40, bytes.len() / 2, bytes.len() - 1] {
            match from_bytes::<f64>(&bytes[..cut], None) {
                Err(Error::CorruptCheckpoint(msg)) => assert!(msg.contains("truncated") || msg.contains("magic"), "{msg}"),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn mode_and_version_errors() {
        let bytes = to_bytes(&bundle(GanMode::Cgan));
        assert!(matches!(from_bytes::<f64>(&bytes, Some(GanMode::Acgan)), Err(Error::Mode(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(from_bytes::<f64>(&bad, None), Err(Error::CheckpointVersion { found: 9, .. })));
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(from_bytes::<f64>(&bad, None), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn header_dims_must_match_networks() {
        let mut bytes = to_bytes(&bundle(GanMode::Cgan));
        // N lives right after magic, version and mode.
        bytes[7] = 3;
        assert!(matches!(from_bytes::<f64>(&bytes, None), Err(Error::Dimension { .. })));
    }
}
