//! Versioned flat binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!   magic "AGGL" | format version u32 | config length u32 | config
//!   UTF-8 key=value lines | parameters. Each parameter: name length
//!   u32, name bytes, rank u32, extents u32 each, float32 payload.
//! Parameters appear in `DecoderModel::named_params` order and the file
//! must end exactly after the last one.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DecoderModel, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::Elem;

const MAGIC: &[u8; 4] = b"AGGL";
const VERSION: u32 = 1;

pub fn save<E: Elem>(model: &DecoderModel<E>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let config_text = model.config.to_text();
    w.write_all(&(config_text.len() as u32).to_le_bytes())?;
    w.write_all(config_text.as_bytes())?;
    for (name, tensor) in model.named_params() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        let shape = tensor.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &extent in shape {
            w.write_all(&(extent as u32).to_le_bytes())?;
        }
        for &value in tensor.values().iter() {
            w.write_all(&(value.to_f64() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::checkpoint("file truncated"))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn load<E: Elem>(path: &Path) -> Result<DecoderModel<E>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::checkpoint("file too short for magic"))?;
    if &magic != MAGIC {
        return Err(Error::checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::checkpoint(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let config_len = read_u32(&mut r)? as usize;
    let mut config_bytes = vec![0u8; config_len];
    r.read_exact(&mut config_bytes)
        .map_err(|_| Error::checkpoint("truncated config block"))?;
    let config_text = String::from_utf8(config_bytes)
        .map_err(|_| Error::checkpoint("config block is not UTF-8"))?;
    let config = ModelConfig::from_text(&config_text)
        .map_err(|e| Error::checkpoint(format!("bad config block: {e}")))?;

    // Seed value is irrelevant: every parameter is overwritten below.
    let model = DecoderModel::<E>::new(&config, 0)?;
    for (name, tensor) in model.named_params() {
        let name_len = read_u32(&mut r)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)
            .map_err(|_| Error::checkpoint(format!("truncated at parameter `{name}`")))?;
        let stored_name = String::from_utf8(name_bytes)
            .map_err(|_| Error::checkpoint("parameter name is not UTF-8"))?;
        if stored_name != name {
            return Err(Error::checkpoint(format!(
                "parameter order mismatch: expected `{name}`, found `{stored_name}`"
            )));
        }
        let rank = read_u32(&mut r)? as usize;
        let mut extents = Vec::with_capacity(rank);
        for _ in 0..rank {
            extents.push(read_u32(&mut r)? as usize);
        }
        if extents != tensor.shape() {
            return Err(Error::checkpoint(format!(
                "parameter `{name}` has stored shape {:?}, expected {:?}",
                extents,
                tensor.shape()
            )));
        }
        let mut values = Vec::with_capacity(tensor.numel());
        let mut buf = [0u8; 4];
        for _ in 0..tensor.numel() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::checkpoint(format!("truncated payload in `{name}`")))?;
            values.push(E::from_f64(f32::from_le_bytes(buf) as f64));
        }
        tensor.set_values(&values)?;
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::checkpoint("trailing bytes after last parameter"));
    }
    Ok(model)
}
