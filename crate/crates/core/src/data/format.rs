//! Binary dataset file.
//!
//! ```text
//! "IQDS" | version u32 LE | header length u32 LE | header JSON (UTF-8)
//! records: class u16 LE | snr_db i16 LE | N × f32 LE (I) | N × f32 LE (Q)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{DataError, Dataset, DatasetHeader, IqFrame};

pub const MAGIC: [u8; 4] = *b"IQDS";
pub const FORMAT_VERSION: u32 = 1;

fn record_size(frame_length: usize) -> usize {
    4 + 8 * frame_length
}

pub fn write_dataset(header: &DatasetHeader, frames: &[IqFrame], path: &Path) -> Result<(), DataError> {
    header.validate()?;
    if header.total_frames != frames.len() {
        return Err(DataError::CountMismatch {
            declared: header.total_frames,
            found: frames.len(),
        });
    }
    let mut tally: BTreeMap<(usize, i32), usize> = BTreeMap::new();
    for f in frames {
        if f.i.len() != header.frame_length || f.q.len() != header.frame_length {
            return Err(DataError::Frame(format!(
                "frame has {}/{} samples, header says {}",
                f.i.len(),
                f.q.len(),
                header.frame_length
            )));
        }
        if !f.i.iter().chain(&f.q).all(|v| v.is_finite()) {
            return Err(DataError::Frame("non-finite sample".into()));
        }
        if f.class_index >= header.classes.len() || f.class_index > u16::MAX as usize {
            return Err(DataError::Frame(format!("class index {} out of range", f.class_index)));
        }
        if i16::try_from(f.snr_db).is_err() {
            return Err(DataError::Frame(format!("snr {} dB does not fit in i16", f.snr_db)));
        }
        *tally.entry((f.class_index, f.snr_db)).or_default() += 1;
    }
    for c in &header.counts {
        let found = tally.remove(&(c.class_index, c.snr_db)).unwrap_or(0);
        if found != c.count {
            return Err(DataError::CountMismatch {
                declared: c.count,
                found,
            });
        }
    }
    if let Some((_, &found)) = tally.iter().next() {
        return Err(DataError::CountMismatch { declared: 0, found });
    }

    let json = serde_json::to_vec(header).map_err(|e| DataError::Header(e.to_string()))?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for f in frames {
        w.write_all(&(f.class_index as u16).to_le_bytes())?;
        w.write_all(&(f.snr_db as i16).to_le_bytes())?;
        for v in f.i.iter().chain(&f.q) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, DataError> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize, what: &str) -> Result<&'a [u8], DataError> {
    let end = *pos + n;
    if end > bytes.len() {
        return Err(DataError::Truncated(format!("while reading {what}")));
    }
    let out = &bytes[*pos..end];
    *pos = end;
    Ok(out)
}

fn u32_at(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32, DataError> {
    Ok(u32::from_le_bytes(take(bytes, pos, 4, what)?.try_into().unwrap()))
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Dataset, DataError> {
    let mut pos = 0;
    let magic: [u8; 4] = take(bytes, &mut pos, 4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(DataError::BadMagic(magic));
    }
    let version = u32_at(bytes, &mut pos, "version")?;
    if version != FORMAT_VERSION {
        return Err(DataError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = u32_at(bytes, &mut pos, "header length")? as usize;
    let json = take(bytes, &mut pos, header_len, "header")?;
    let header: DatasetHeader =
        serde_json::from_slice(json).map_err(|e| DataError::Header(e.to_string()))?;
    header.validate()?;

    let n = header.frame_length;
    let size = record_size(n);
    let body = &bytes[pos..];
    if !body.len().is_multiple_of(size) {
        return Err(DataError::Truncated(format!(
            "{} trailing bytes after {} whole records",
            body.len() % size,
            body.len() / size
        )));
    }
    let found = body.len() / size;
    if found != header.total_frames {
        return Err(DataError::CountMismatch {
            declared: header.total_frames,
            found,
        });
    }
    let mut frames = Vec::with_capacity(found);
    for rec in body.chunks_exact(size) {
        let class_index = u16::from_le_bytes([rec[0], rec[1]]) as usize;
        let snr_db = i16::from_le_bytes([rec[2], rec[3]]) as i32;
        let mut samples = rec[4..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()));
        let i: Vec<f32> = samples.by_ref().take(n).collect();
        let q: Vec<f32> = samples.collect();
        if class_index >= header.classes.len() {
            return Err(DataError::Frame(format!("record with class index {class_index}")));
        }
        if !i.iter().chain(&q).all(|v| v.is_finite()) {
            return Err(DataError::Frame(format!("non-finite sample in record {}", frames.len())));
        }
        frames.push(IqFrame {
            i,
            q,
            class_index,
            snr_db,
        });
    }
    let recount = DatasetHeader::from_frames(
        header.classes.clone(),
        header.snr_grid_db.clone(),
        n,
        &frames,
    )?;
    for c in &header.counts {
        let found = recount.count(c.class_index, c.snr_db);
        if found != c.count {
            return Err(DataError::CountMismatch {
                declared: c.count,
                found,
            });
        }
    }
    Ok(Dataset { header, frames })
}
