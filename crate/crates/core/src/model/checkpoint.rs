//! "CKPT v1" checkpoints.
//!
//! Little-endian: magic `CKPT`, u32 version, u32 length + UTF-8 architecture
//! string, u32 tensor count, then per tensor: u16 name length + name bytes,
//! u8 rank, `rank` × u32 dims, f32 data. Batch-norm running statistics are
//! stored as ordinary tensors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::{ArchitectureSpec, CnnModel, Layer, Mode};

pub const MAGIC: &[u8; 4] = b"CKPT";
pub const VERSION: u32 = 1;

fn entries(model: &CnnModel) -> Vec<(String, Vec<u32>, &[f64])> {
    let mut out = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        match layer {
            Layer::Conv { dims, weight, bias } => {
                let (in_c, out_c, _, _) = *dims;
                out.push((format!("layers.{i}.weight"), vec![out_c as u32, in_c as u32, 3, 3], weight.as_slice()));
                if let Some(b) = bias {
                    out.push((format!("layers.{i}.bias"), vec![out_c as u32], b.as_slice()));
                }
            }
            Layer::BatchNorm {
                channels,
                gamma,
                beta,
                running_mean,
                running_var,
                ..
            } => {
                let d = vec![*channels as u32];
                out.push((format!("layers.{i}.gamma"), d.clone(), gamma.as_slice()));
                out.push((format!("layers.{i}.beta"), d.clone(), beta.as_slice()));
                out.push((format!("layers.{i}.running_mean"), d.clone(), running_mean.as_slice()));
                out.push((format!("layers.{i}.running_var"), d, running_var.as_slice()));
            }
            Layer::Linear {
                in_f,
                out_f,
                weight,
                bias,
            } => {
                out.push((format!("layers.{i}.weight"), vec![*out_f as u32, *in_f as u32], weight.as_slice()));
                out.push((format!("layers.{i}.bias"), vec![*out_f as u32], bias.as_slice()));
            }
            _ => {}
        }
    }
    out
}

fn entries_mut(model: &mut CnnModel) -> Vec<(String, &mut Vec<f64>)> {
    let mut out = Vec::new();
    for (i, layer) in model.layers.iter_mut().enumerate() {
        match layer {
            Layer::Conv { weight, bias, .. } => {
                out.push((format!("layers.{i}.weight"), weight));
                if let Some(b) = bias {
                    out.push((format!("layers.{i}.bias"), b));
                }
            }
            Layer::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
                ..
            } => {
                out.push((format!("layers.{i}.gamma"), gamma));
                out.push((format!("layers.{i}.beta"), beta));
                out.push((format!("layers.{i}.running_mean"), running_mean));
                out.push((format!("layers.{i}.running_var"), running_var));
            }
            Layer::Linear { weight, bias, .. } => {
                out.push((format!("layers.{i}.weight"), weight));
                out.push((format!("layers.{i}.bias"), bias));
            }
            _ => {}
        }
    }
    out
}

pub fn write_checkpoint<W: Write>(model: &CnnModel, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    let arch = model.spec().to_string();
    w.write_u32::<LE>(arch.len() as u32)?;
    w.write_all(arch.as_bytes())?;
    let tensors = entries(model);
    w.write_u32::<LE>(tensors.len() as u32)?;
    for (name, dims, data) in tensors {
        w.write_u16::<LE>(name.len() as u16)?;
        w.write_all(name.as_bytes())?;
        w.write_u8(dims.len() as u8)?;
        for d in dims {
            w.write_u32::<LE>(d)?;
        }
        for &v in data {
            w.write_f32::<LE>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint; the model comes back in eval mode.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<CnnModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a CKPT file".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported CKPT version {version}")));
    }
    let len = r.read_u32::<LE>()? as usize;
    let mut arch = vec![0u8; len];
    r.read_exact(&mut arch)?;
    let arch = String::from_utf8(arch).map_err(|_| Error::Format("architecture is not UTF-8".into()))?;
    let spec: ArchitectureSpec = arch.parse()?;
    let mut model = CnnModel::new(spec, 0)?;
    let expected: Vec<(String, Vec<u32>)> = entries(&model)
        .into_iter()
        .map(|(n, d, _)| (n, d))
        .collect();
    let count = r.read_u32::<LE>()? as usize;
    if count != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint has {count} tensors, architecture needs {}",
            expected.len()
        )));
    }
    let mut loaded: Vec<(String, Vec<f64>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.read_u16::<LE>()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = r.read_u8()? as usize;
        let dims = (0..rank).map(|_| r.read_u32::<LE>()).collect::<std::io::Result<Vec<u32>>>()?;
        let Some((_, want)) = expected.iter().find(|(n, _)| *n == name) else {
            return Err(Error::Format(format!("unexpected tensor {name}")));
        };
        if *want != dims {
            return Err(Error::Format(format!("tensor {name} has dims {dims:?}, expected {want:?}")));
        }
        let n: usize = dims.iter().map(|&d| d as usize).product();
        let data = (0..n)
            .map(|_| r.read_f32::<LE>().map(f64::from))
            .collect::<std::io::Result<Vec<f64>>>()?;
        loaded.push((name, data));
    }
    for (name, slot) in entries_mut(&mut model) {
        let (_, data) = loaded
            .iter_mut()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
        *slot = std::mem::take(data);
    }
    model.mode = Mode::Eval;
    Ok(model)
}

pub fn save(model: &CnnModel, path: &Path) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load(path: &Path) -> Result<CnnModel> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;

    #[test]
    fn round_trip_preserves_f32_values() {
        let spec = ArchitectureSpec::minivgg((3, 16, 16), 4).unwrap();
        let mut model = CnnModel::new(spec, 3).unwrap();
        let x: Vec<f64> = (0..2 * 768).map(|i| (i as f64 * 0.01).sin()).collect();
        model.forward(&x, Exec::Sequential).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CKPT");
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.spec(), model.spec());
        for ((_, _, a), (_, _, b)) in model.params().iter().zip(back.params().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*y, *x as f32 as f64);
            }
        }
        for (a, b) in model.running_stats().iter().zip(back.running_stats()) {
            assert_eq!(a.1.iter().map(|v| *v as f32 as f64).collect::<Vec<_>>(), b.1);
        }
        let mut again = Vec::new();
        write_checkpoint(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOPE\x01\0\0\0"[..]).is_err());
        assert!(read_checkpoint(&b"CKPT\x02\0\0\0"[..]).is_err());
        let spec = ArchitectureSpec::minivgg((3, 16, 16), 4).unwrap();
        let model = CnnModel::new(spec, 3).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
