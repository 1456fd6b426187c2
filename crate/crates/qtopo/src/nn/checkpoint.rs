//! Model checkpoints: magic `QNN1`, a version word, the embedded
//! human-readable config block, a layer table, then all parameter tensors
//! as little-endian `f64` in each layer's flat layout.

use std::io::{Read, Write};
use std::path::Path;

use super::layer::{ActKind, Activation, Conv, DepthMix, Dropout, Layer, PeriodicPad, QConv};
use super::network::{NetConfig, Network};
use super::tensor::Shape;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QNN1";
const VERSION: u32 = 1;

fn kind_tag(layer: &Layer) -> u8 {
    match layer {
        Layer::PeriodicPad(_) => 0,
        Layer::Conv(_) => 1,
        Layer::QConv(_) => 2,
        Layer::DepthMix(_) => 3,
        Layer::Activation(_) => 4,
        Layer::Dropout(_) => 5,
    }
}

pub fn save(net: &Network, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;

    let config = net.config.to_text();
    out.write_all(&(config.len() as u32).to_le_bytes())?;
    out.write_all(config.as_bytes())?;

    for v in [
        net.input_shape.d,
        net.input_shape.h,
        net.input_shape.w,
        net.input_shape.c,
    ] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }

    out.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for layer in &net.layers {
        out.write_all(&[kind_tag(layer)])?;
        let fields: Vec<u32> = match layer {
            Layer::PeriodicPad(l) => vec![l.ph as u32, l.pw as u32],
            Layer::Conv(l) => vec![
                l.kh as u32,
                l.kw as u32,
                l.cin as u32,
                l.cout as u32,
                l.stride as u32,
            ],
            Layer::QConv(l) => vec![
                l.kh as u32,
                l.kw as u32,
                l.cin as u32,
                l.cout as u32,
                l.stride as u32,
            ],
            Layer::DepthMix(l) => vec![l.channels as u32],
            Layer::Activation(l) => vec![l.kind.tag() as u32],
            Layer::Dropout(l) => vec![l.slot as u32, l.rate.to_bits() as u32, (l.rate.to_bits() >> 32) as u32],
        };
        out.write_all(&(fields.len() as u32).to_le_bytes())?;
        for f in fields {
            out.write_all(&f.to_le_bytes())?;
        }
        let params = layer.params();
        out.write_all(&(params.len() as u64).to_le_bytes())?;
        for p in params {
            out.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Reader<R> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            offset: self.offset,
            msg: msg.into(),
        }
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Format {
            offset: self.offset,
            msg: format!("unexpected end of checkpoint: {e}"),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn take(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Format {
            offset: self.offset,
            msg: format!("unexpected end of checkpoint: {e}"),
        })?;
        self.offset += len as u64;
        Ok(buf)
    }
}

pub fn load(path: &Path) -> Result<Network> {
    let file = std::fs::File::open(path)?;
    let mut r = Reader {
        inner: std::io::BufReader::new(file),
        offset: 0,
    };

    let magic: [u8; 4] = r.bytes()?;
    if &magic != MAGIC {
        return Err(r.fail("bad magic, not a model checkpoint"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.fail(format!("unsupported checkpoint version {version}")));
    }

    let config_len = r.u32()? as usize;
    let config_bytes = r.take(config_len)?;
    let config_text =
        String::from_utf8(config_bytes).map_err(|_| r.fail("config block is not utf-8"))?;
    let config = NetConfig::from_text(&config_text)
        .ok_or_else(|| r.fail("unparseable config block"))?;

    let shape = Shape::new(
        r.u32()? as usize,
        r.u32()? as usize,
        r.u32()? as usize,
        r.u32()? as usize,
    );

    let layer_count = r.u32()? as usize;
    if layer_count > 1024 {
        return Err(r.fail(format!("implausible layer count {layer_count}")));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let tag = r.bytes::<1>()?[0];
        let field_count = r.u32()? as usize;
        let mut fields = Vec::with_capacity(field_count);
        for _ in 0..field_count {
            fields.push(r.u32()?);
        }
        let param_len = r.u64()? as usize;
        let mut params = Vec::with_capacity(param_len);
        for _ in 0..param_len {
            params.push(r.f64()?);
        }
        let field = |i: usize| -> Result<usize> {
            fields
                .get(i)
                .map(|&v| v as usize)
                .ok_or(Error::Format {
                    offset: r.offset,
                    msg: format!("layer tag {tag}: missing field {i}"),
                })
        };
        let layer = match tag {
            0 => Layer::PeriodicPad(PeriodicPad {
                ph: field(0)?,
                pw: field(1)?,
            }),
            1 => Layer::Conv(Conv {
                kh: field(0)?,
                kw: field(1)?,
                cin: field(2)?,
                cout: field(3)?,
                stride: field(4)?,
                params,
            }),
            2 => Layer::QConv(QConv {
                kh: field(0)?,
                kw: field(1)?,
                cin: field(2)?,
                cout: field(3)?,
                stride: field(4)?,
                params,
            }),
            3 => Layer::DepthMix(DepthMix {
                channels: field(0)?,
                params,
            }),
            4 => Layer::Activation(Activation {
                kind: ActKind::from_tag(field(0)? as u8)
                    .ok_or_else(|| r.fail("unknown activation tag"))?,
            }),
            5 => {
                let bits = (field(1)? as u64) | ((field(2)? as u64) << 32);
                Layer::Dropout(Dropout {
                    slot: field(0)?,
                    rate: f64::from_bits(bits),
                })
            }
            other => return Err(r.fail(format!("unknown layer tag {other}"))),
        };
        // reject parameter blocks that disagree with the declared geometry
        let expected = match &layer {
            Layer::Conv(l) => l.weight_len() + l.cout,
            Layer::QConv(l) => l.weight_len() + 4 * l.cout,
            Layer::DepthMix(l) => l.channels * 5,
            _ => 0,
        };
        if layer.params().len() != expected {
            return Err(r.fail(format!(
                "layer {} has {} parameters, expected {expected}",
                layer.kind_name(),
                layer.params().len()
            )));
        }
        layers.push(layer);
    }

    let net = Network {
        layers,
        input_shape: shape,
        config,
    };
    net.output_shape()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::NetConfig;

    #[test]
    fn checkpoints_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for cfg in [NetConfig::qcnn(21), NetConfig::cnn(22)] {
            let net = Network::build(&cfg);
            let path = dir.path().join(format!("{}.qnn", cfg.arch.name()));
            save(&net, &path).unwrap();
            let loaded = load(&path).unwrap();
            assert_eq!(loaded.config, net.config);
            assert_eq!(loaded.input_shape, net.input_shape);
            assert_eq!(loaded.layers.len(), net.layers.len());
            for (a, b) in loaded.layers.iter().zip(&net.layers) {
                assert_eq!(a.params(), b.params());
            }
            // saved bytes are stable
            let path2 = dir.path().join("again.qnn");
            save(&loaded, &path2).unwrap();
            assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        }
    }

    #[test]
    fn truncated_checkpoints_fail_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let net = Network::build(&NetConfig::qcnn(23));
        let path = dir.path().join("model.qnn");
        save(&net, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.qnn");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        match load(&cut) {
            Err(Error::Format { offset, .. }) => assert!(offset > 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.qnn");
        std::fs::write(&path, b"NOPE....").unwrap();
        assert!(matches!(load(&path), Err(Error::Format { .. })));
    }
}
