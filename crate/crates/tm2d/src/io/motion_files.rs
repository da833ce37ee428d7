//! Plain-text motion, audio-feature, and token-stream files plus the corpus
//! manifest.
//!
//! Motion: `TMOT v1 T d_m fps` header, then T lines of d_m decimals.
//! Audio: `TAUD v1 T_a d_a rate` header, a `BEATS t1 t2 …` line, then rows.
//! Tokens: `TTOK v1 K` header, then space-separated indices.
//! Manifest: `TSET v1 n provenance`, then one tab-separated record per item:
//! motion path, audio path or `-`, text or `-`, label.

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::motion::{AudioFeatureSeq, Corpus, CorpusItem, MotionSequence, Provenance};
use crate::tensor::Tensor;
use crate::vqvae::TokenSeq;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

fn parse_header<'a>(line: &'a str, magic: &str, path: &Path) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 || fields[0] != magic {
        return Err(Error::Version(format!(
            "{} does not start with `{magic}`",
            path.display()
        )));
    }
    if fields[1] != "v1" {
        return Err(Error::Version(format!(
            "{}: unsupported {magic} version {}",
            path.display(),
            fields[1]
        )));
    }
    Ok(fields)
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, path: &Path) -> Result<T> {
    s.parse().map_err(|_| {
        Error::Parse(format!("{}: bad {what} value {s:?}", path.display()))
    })
}

fn write_rows(out: &mut impl Write, t: &Tensor) -> Result<()> {
    for i in 0..t.rows() {
        let line: Vec<String> = t.row(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

fn read_rows(lines: &[&str], rows: usize, cols: usize, path: &Path) -> Result<Tensor> {
    if lines.len() < rows {
        return Err(Error::Parse(format!(
            "{}: expected {rows} data rows, found {}",
            path.display(),
            lines.len()
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.iter().take(rows).enumerate() {
        let values: Result<Vec<f64>> = line
            .split_whitespace()
            .map(|s| parse_num(s, "data", path))
            .collect();
        let values = values?;
        if values.len() != cols {
            return Err(Error::Parse(format!(
                "{}: row {i} has {} values, expected {cols}",
                path.display(),
                values.len()
            )));
        }
        data.extend(values);
    }
    Tensor::new(vec![rows, cols], data)
}

pub fn write_motion(path: &Path, m: &MotionSequence) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "TMOT v1 {} {} {}", m.len(), m.dim(), fmt_f64(m.fps()))?;
    write_rows(&mut out, m.frames())?;
    out.flush()?;
    Ok(())
}

pub fn read_motion(path: &Path) -> Result<MotionSequence> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines.next().ok_or_else(|| {
        Error::Parse(format!("{}: empty file", path.display()))
    })?;
    let fields = parse_header(header, "TMOT", path)?;
    if fields.len() != 5 {
        return Err(Error::Parse(format!(
            "{}: TMOT header needs T d_m fps",
            path.display()
        )));
    }
    let t: usize = parse_num(fields[2], "T", path)?;
    let d: usize = parse_num(fields[3], "d_m", path)?;
    let fps: f64 = parse_num(fields[4], "fps", path)?;
    let rest: Vec<&str> = lines.collect();
    let frames = read_rows(&rest, t, d, path)?;
    MotionSequence::new(frames, fps)
}

pub fn write_audio(path: &Path, a: &AudioFeatureSeq) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "TAUD v1 {} {} {}", a.len(), a.dim(), fmt_f64(a.rate))?;
    let beats: Vec<String> = a.beat_times.iter().map(|&b| fmt_f64(b)).collect();
    writeln!(out, "BEATS {}", beats.join(" "))?;
    write_rows(&mut out, &a.features)?;
    out.flush()?;
    Ok(())
}

pub fn read_audio(path: &Path) -> Result<AudioFeatureSeq> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines.next().ok_or_else(|| {
        Error::Parse(format!("{}: empty file", path.display()))
    })?;
    let fields = parse_header(header, "TAUD", path)?;
    if fields.len() != 5 {
        return Err(Error::Parse(format!(
            "{}: TAUD header needs T_a d_a rate",
            path.display()
        )));
    }
    let t: usize = parse_num(fields[2], "T_a", path)?;
    let d: usize = parse_num(fields[3], "d_a", path)?;
    let rate: f64 = parse_num(fields[4], "rate", path)?;
    let beats_line = lines.next().ok_or_else(|| {
        Error::Parse(format!("{}: missing BEATS line", path.display()))
    })?;
    let mut beat_fields = beats_line.split_whitespace();
    if beat_fields.next() != Some("BEATS") {
        return Err(Error::Parse(format!(
            "{}: second line must start with BEATS",
            path.display()
        )));
    }
    let beat_times: Result<Vec<f64>> = beat_fields.map(|s| parse_num(s, "beat", path)).collect();
    let rest: Vec<&str> = lines.collect();
    let features = read_rows(&rest, t, d, path)?;
    Ok(AudioFeatureSeq {
        features,
        rate,
        beat_times: beat_times?,
    })
}

pub fn write_tokens(path: &Path, tokens: &TokenSeq, k: usize) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "TTOK v1 {k}")?;
    let text: Vec<String> = tokens.iter().map(u32::to_string).collect();
    writeln!(out, "{}", text.join(" "))?;
    out.flush()?;
    Ok(())
}

/// Read a token stream; returns (tokens, K).
pub fn read_tokens(path: &Path) -> Result<(TokenSeq, usize)> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines.next().ok_or_else(|| {
        Error::Parse(format!("{}: empty file", path.display()))
    })?;
    let fields = parse_header(header, "TTOK", path)?;
    if fields.len() != 3 {
        return Err(Error::Parse(format!(
            "{}: TTOK header needs K",
            path.display()
        )));
    }
    let k: usize = parse_num(fields[2], "K", path)?;
    let mut tokens = Vec::new();
    for line in lines {
        for s in line.split_whitespace() {
            let t: u32 = parse_num(s, "token", path)?;
            if (t as usize) >= k {
                return Err(Error::Range(format!(
                    "{}: token {t} out of range for K = {k}",
                    path.display()
                )));
            }
            tokens.push(t);
        }
    }
    Ok((tokens, k))
}

/// Write a corpus into `dir`: one TMOT (and TAUD when paired) per item plus
/// a `manifest.tset` listing every record.
pub fn save_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    corpus.validate()?;
    fs::create_dir_all(dir)?;
    let manifest_path = dir.join("manifest.tset");
    let file = fs::File::create(&manifest_path)?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "TSET v1 {} {}",
        corpus.len(),
        corpus.provenance.as_str()
    )?;
    for item in &corpus.items {
        let motion_name = format!("{}.tmot", item.label);
        write_motion(&dir.join(&motion_name), &item.motion)?;
        let audio_name = match &item.audio {
            Some(audio) => {
                let name = format!("{}.taud", item.label);
                write_audio(&dir.join(&name), audio)?;
                name
            }
            None => "-".to_string(),
        };
        let text = match &item.text {
            Some(t) => {
                if t.contains('\t') || t.contains('\n') {
                    return Err(Error::Parse(format!(
                        "text for {} contains tab or newline",
                        item.label
                    )));
                }
                t.as_str()
            }
            None => "-",
        };
        writeln!(out, "{motion_name}\t{audio_name}\t{text}\t{}", item.label)?;
    }
    out.flush()?;
    Ok(())
}

/// Load a corpus from a manifest path or a directory containing
/// `manifest.tset`.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let manifest: PathBuf = if path.is_dir() {
        path.join("manifest.tset")
    } else {
        path.to_path_buf()
    };
    let dir = manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let content = fs::read_to_string(&manifest)?;
    let mut lines = content.lines();
    let header = lines.next().ok_or_else(|| {
        Error::Parse(format!("{}: empty manifest", manifest.display()))
    })?;
    let fields = parse_header(header, "TSET", &manifest)?;
    if fields.len() != 4 {
        return Err(Error::Parse(format!(
            "{}: TSET header needs count and provenance",
            manifest.display()
        )));
    }
    let n: usize = parse_num(fields[2], "count", &manifest)?;
    let provenance = Provenance::parse(fields[3])?;
    let mut items = Vec::with_capacity(n);
    for line in lines.take(n) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Parse(format!(
                "{}: manifest record needs 4 tab-separated fields, got {}",
                manifest.display(),
                cols.len()
            )));
        }
        let motion = read_motion(&dir.join(cols[0]))?;
        let audio = match cols[1] {
            "-" => None,
            rel => Some(read_audio(&dir.join(rel))?),
        };
        let text = match cols[2] {
            "-" => None,
            t => Some(t.to_string()),
        };
        items.push(CorpusItem {
            motion,
            audio,
            text,
            label: cols[3].to_string(),
        });
    }
    if items.len() != n {
        return Err(Error::Parse(format!(
            "{}: manifest promises {n} items, found {}",
            manifest.display(),
            items.len()
        )));
    }
    let corpus = Corpus { items, provenance };
    corpus.validate()?;
    Ok(corpus)
}
