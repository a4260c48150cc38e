//! On-disk dataset bundle: `vocab.tsv`, `users.tsv`, `sequences.bin`,
//! `split.json`.
//!
//! `sequences.bin` layout (little-endian): magic `GIMI-SEQ1`, u64 user count,
//! then per user: u64 user index, u64 length, `length` × u32 item indices,
//! `length` × i64 timestamps.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, DatasetSplit, UserSequence, Vocab};
use crate::error::{Error, IoContext, Result};

pub const SEQUENCES_MAGIC: &[u8; 9] = b"GIMI-SEQ1";

pub fn write_bundle(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).with_path(dir)?;
    write_vocab(&dir.join("vocab.tsv"), &data.items, true)?;
    write_vocab(&dir.join("users.tsv"), &data.users, false)?;

    let path = dir.join("sequences.bin");
    let mut w = BufWriter::new(fs::File::create(&path).with_path(&path)?);
    let mut put = |bytes: &[u8]| w.write_all(bytes).with_path(&path);
    put(SEQUENCES_MAGIC)?;
    put(&(data.sequences.len() as u64).to_le_bytes())?;
    for seq in &data.sequences {
        put(&(seq.user as u64).to_le_bytes())?;
        put(&(seq.len() as u64).to_le_bytes())?;
        for &i in &seq.items {
            put(&(i as u32).to_le_bytes())?;
        }
        for &t in &seq.timestamps {
            put(&t.to_le_bytes())?;
        }
    }
    w.flush().with_path(&path)?;
    drop(w);

    let path = dir.join("split.json");
    let json = serde_json::to_string_pretty(&data.split).expect("split serializes");
    fs::write(&path, json + "\n").with_path(&path)?;
    Ok(())
}

fn write_vocab(path: &Path, vocab: &Vocab, padded: bool) -> Result<()> {
    let mut out = String::new();
    for (i, raw) in vocab.raw_ids().iter().enumerate().skip(usize::from(padded)) {
        out.push_str(raw);
        out.push('\t');
        out.push_str(&i.to_string());
        out.push('\n');
    }
    fs::write(path, out).with_path(path)
}

fn read_vocab(path: &Path, padded: bool) -> Result<Vocab> {
    let text = fs::read_to_string(path).with_path(path)?;
    let mut raw = if padded { vec![String::new()] } else { Vec::new() };
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (id, idx) = line.rsplit_once('\t').ok_or_else(|| Error::Format {
            what: "vocab",
            reason: format!("missing tab in line `{line}`"),
        })?;
        let idx: usize = idx.parse().map_err(|_| Error::Format {
            what: "vocab",
            reason: format!("bad index in line `{line}`"),
        })?;
        if idx != raw.len() {
            return Err(Error::Format {
                what: "vocab",
                reason: format!("index {idx} out of order"),
            });
        }
        raw.push(id.to_owned());
    }
    Ok(Vocab::from_raw(raw, padded))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or(Error::Format {
            what: "sequences.bin",
            reason: "truncated".into(),
        })?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }
}

pub fn read_bundle(dir: &Path) -> Result<Dataset> {
    let seq_path = dir.join("sequences.bin");
    if !seq_path.exists() {
        return Err(Error::MissingArtifact {
            path: seq_path,
            hint: "run `gimirec prepare` first".into(),
        });
    }
    let items = read_vocab(&dir.join("vocab.tsv"), true)?;
    let users = read_vocab(&dir.join("users.tsv"), false)?;

    let mut buf = Vec::new();
    fs::File::open(&seq_path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .with_path(&seq_path)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if &cur.take::<9>()? != SEQUENCES_MAGIC {
        return Err(Error::Format {
            what: "sequences.bin",
            reason: "bad magic".into(),
        });
    }
    let n = cur.u64()? as usize;
    let mut sequences = Vec::with_capacity(n);
    for expected in 0..n {
        let user = cur.u64()? as usize;
        let len = cur.u64()? as usize;
        if user != expected {
            return Err(Error::Format {
                what: "sequences.bin",
                reason: format!("user {user} out of order"),
            });
        }
        let items_v = (0..len)
            .map(|_| cur.take::<4>().map(|b| u32::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        if items_v.iter().any(|&i| i == 0 || i >= items.len()) {
            return Err(Error::Format {
                what: "sequences.bin",
                reason: format!("item index out of vocabulary for user {user}"),
            });
        }
        let timestamps = (0..len)
            .map(|_| cur.take::<8>().map(i64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        sequences.push(UserSequence {
            user,
            items: items_v,
            timestamps,
        });
    }

    let split_path = dir.join("split.json");
    let text = fs::read_to_string(&split_path).with_path(&split_path)?;
    let split: DatasetSplit = serde_json::from_str(&text).map_err(|e| Error::Format {
        what: "split.json",
        reason: e.to_string(),
    })?;
    Ok(Dataset {
        sequences,
        items,
        users,
        split,
    })
}
