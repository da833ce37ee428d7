//! Checkpoint format shared by both training stages.
//!
//! Layout: a `TM2DCKPT v1` magic line, a section line (`vqvae` or
//! `xmodal`), a key=value hyperparameter block, then named tensors as a
//! header line (`tensor <name> <rank> <extents…>`) followed by the values as
//! little-endian 64-bit floats and one newline.
//!
//! Checkpoints written during training also carry the optimizer moments,
//! the sampling-generator state, and the completed step count, so a resumed
//! run replays an uninterrupted one exactly.

use super::fmt_f64;
use crate::error::{Error, Result};
use crate::motion::Vocab;
use crate::rng::Pcg32;
use crate::tensor::{Adam, ParamStore, Tensor};
use crate::vqvae::{VqSession, VqTrainCfg, VqVae, VqVaeConfig};
use crate::xmodal::{XmSession, XmTrainCfg, XModal, XModalConfig};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CKPT_MAGIC: &str = "TM2DCKPT v1";

/// Mutable training state carried inside a checkpoint.
pub struct TrainerState<'a> {
    pub adam: &'a Adam,
    pub rng: &'a Pcg32,
    pub completed_steps: usize,
}

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn header(&mut self, section: &str, hp: &[(String, String)]) -> Result<()> {
        writeln!(self.out, "{CKPT_MAGIC}")?;
        writeln!(self.out, "section {section}")?;
        writeln!(self.out, "hyperparams {}", hp.len())?;
        for (k, v) in hp {
            writeln!(self.out, "{k}={v}")?;
        }
        Ok(())
    }

    fn tensors(&mut self, tensors: &[(String, &Tensor)]) -> Result<()> {
        writeln!(self.out, "tensors {}", tensors.len())?;
        for (name, t) in tensors {
            let extents: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            writeln!(self.out, "tensor {name} {} {}", t.rank(), extents.join(" "))?;
            for &v in t.data() {
                self.out.write_all(&v.to_le_bytes())?;
            }
            self.out.write_all(b"\n")?;
        }
        Ok(())
    }
}

struct Loaded {
    section: String,
    hp: BTreeMap<String, String>,
    tensors: BTreeMap<String, Tensor>,
}

impl Loaded {
    fn hp_str(&self, key: &str) -> Result<&str> {
        self.hp
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Version(format!("checkpoint missing hyperparameter {key}")))
    }

    fn hp_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.hp_str(key)?
            .parse()
            .map_err(|_| Error::Parse(format!("bad checkpoint value for {key}")))
    }

    fn take_tensor(&mut self, name: &str) -> Result<Tensor> {
        self.tensors
            .remove(name)
            .ok_or_else(|| Error::Version(format!("checkpoint missing tensor {name}")))
    }
}

fn read_checkpoint(path: &Path) -> Result<Loaded> {
    let file = fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();

    let next_line = |reader: &mut BufReader<fs::File>, line: &mut String| -> Result<String> {
        line.clear();
        if reader.read_line(line)? == 0 {
            return Err(Error::Parse(format!(
                "{}: unexpected end of checkpoint",
                path.display()
            )));
        }
        Ok(line.trim_end_matches('\n').to_string())
    };

    let magic = next_line(&mut reader, &mut line)?;
    if magic != CKPT_MAGIC {
        return Err(Error::Version(format!(
            "{}: not a `{CKPT_MAGIC}` checkpoint",
            path.display()
        )));
    }
    let section_line = next_line(&mut reader, &mut line)?;
    let section = section_line
        .strip_prefix("section ")
        .ok_or_else(|| Error::Parse(format!("{}: missing section line", path.display())))?
        .to_string();

    let hp_line = next_line(&mut reader, &mut line)?;
    let n_hp: usize = hp_line
        .strip_prefix("hyperparams ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: bad hyperparams line", path.display())))?;
    let mut hp = BTreeMap::new();
    for _ in 0..n_hp {
        let entry = next_line(&mut reader, &mut line)?;
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("{}: bad hyperparameter {entry:?}", path.display())))?;
        hp.insert(k.to_string(), v.to_string());
    }

    let tensors_line = next_line(&mut reader, &mut line)?;
    let n_tensors: usize = tensors_line
        .strip_prefix("tensors ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: bad tensors line", path.display())))?;
    let mut tensors = BTreeMap::new();
    for _ in 0..n_tensors {
        let header = next_line(&mut reader, &mut line)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() < 3 || fields[0] != "tensor" {
            return Err(Error::Parse(format!(
                "{}: bad tensor header {header:?}",
                path.display()
            )));
        }
        let name = fields[1].to_string();
        let rank: usize = fields[2]
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad tensor rank", path.display())))?;
        if fields.len() != 3 + rank {
            return Err(Error::Parse(format!(
                "{}: tensor {name} header lists {} extents for rank {rank}",
                path.display(),
                fields.len() - 3
            )));
        }
        let shape: Result<Vec<usize>> = fields[3..]
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Parse(format!("{}: bad extent {s}", path.display())))
            })
            .collect();
        let shape = shape?;
        let numel: usize = shape.iter().product();
        let mut bytes = vec![0u8; numel * 8];
        reader.read_exact(&mut bytes)?;
        let mut data = Vec::with_capacity(numel);
        for chunk in bytes.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().expect("chunk of 8")));
        }
        let mut nl = [0u8; 1];
        reader.read_exact(&mut nl)?;
        if nl[0] != b'\n' {
            return Err(Error::Parse(format!(
                "{}: tensor {name} not followed by newline",
                path.display()
            )));
        }
        tensors.insert(name, Tensor::new(shape, data)?);
    }
    Ok(Loaded {
        section,
        hp,
        tensors,
    })
}

/// Peek at the section name of a checkpoint file.
pub fn load_checkpoint_kind(path: &Path) -> Result<String> {
    Ok(read_checkpoint(path)?.section)
}

fn trainer_hp(hp: &mut Vec<(String, String)>, state: &Option<TrainerState>) {
    if let Some(s) = state {
        let (rs, ri) = s.rng.state();
        hp.push(("completed_steps".into(), s.completed_steps.to_string()));
        hp.push(("adam_steps".into(), s.adam.step_count().to_string()));
        hp.push(("adam_lr".into(), fmt_f64(s.adam.lr)));
        hp.push(("rng_state".into(), rs.to_string()));
        hp.push(("rng_inc".into(), ri.to_string()));
    }
}

fn trainer_tensors<'a>(
    tensors: &mut Vec<(String, &'a Tensor)>,
    store: &ParamStore,
    state: &Option<TrainerState<'a>>,
) {
    if let Some(s) = state {
        let (first, second) = s.adam.moments();
        for ((name, _), (m, v)) in store.iter().zip(first.iter().zip(second)) {
            tensors.push((format!("adam.m.{name}"), m));
            tensors.push((format!("adam.v.{name}"), v));
        }
    }
}

/// Restore optimizer and generator state into a fresh session, if present.
fn restore_trainer(
    loaded: &mut Loaded,
    store: &ParamStore,
    adam: &mut Adam,
    rng: &mut Pcg32,
    completed_steps: &mut usize,
) -> Result<bool> {
    if !loaded.hp.contains_key("completed_steps") {
        return Ok(false);
    }
    *completed_steps = loaded.hp_parse("completed_steps")?;
    adam.lr = loaded.hp_parse("adam_lr")?;
    let adam_steps: u64 = loaded.hp_parse("adam_steps")?;
    let rs: u64 = loaded.hp_parse("rng_state")?;
    let ri: u64 = loaded.hp_parse("rng_inc")?;
    *rng = Pcg32::from_state(rs, ri);
    let mut first = Vec::with_capacity(store.len());
    let mut second = Vec::with_capacity(store.len());
    for (name, _) in store.iter() {
        first.push(loaded.take_tensor(&format!("adam.m.{name}"))?);
        second.push(loaded.take_tensor(&format!("adam.v.{name}"))?);
    }
    adam.restore(adam_steps, first, second)?;
    Ok(true)
}

/// Write a tokenizer checkpoint (optionally with training state).
pub fn save_vqvae(path: &Path, model: &VqVae, state: Option<TrainerState>) -> Result<()> {
    let cfg = model.cfg();
    let mut hp = vec![
        ("codebook_size".to_string(), cfg.codebook_size.to_string()),
        ("latent_dim".to_string(), cfg.latent_dim.to_string()),
        ("frame_dim".to_string(), cfg.frame_dim.to_string()),
        ("beta".to_string(), fmt_f64(cfg.beta)),
        ("bias".to_string(), cfg.bias.to_string()),
    ];
    trainer_hp(&mut hp, &state);

    let usage_dance = counts_tensor(&model.usage().dance);
    let usage_action = counts_tensor(&model.usage().action);
    let mut tensors: Vec<(String, &Tensor)> = model
        .store()
        .iter()
        .map(|(n, t)| (n.to_string(), t))
        .collect();
    tensors.push(("usage.dance".to_string(), &usage_dance));
    tensors.push(("usage.action".to_string(), &usage_action));
    trainer_tensors(&mut tensors, model.store(), &state);

    let file = fs::File::create(path)?;
    let mut w = Writer {
        out: BufWriter::new(file),
    };
    w.header("vqvae", &hp)?;
    w.tensors(&tensors)?;
    w.out.flush()?;
    Ok(())
}

/// Load a tokenizer checkpoint into a fresh session. The session's trainer
/// state is restored when the checkpoint carries it.
pub fn load_vqvae(path: &Path) -> Result<VqSession> {
    let mut loaded = read_checkpoint(path)?;
    if loaded.section != "vqvae" {
        return Err(Error::Version(format!(
            "{}: expected a vqvae checkpoint, found section {}",
            path.display(),
            loaded.section
        )));
    }
    let cfg = VqVaeConfig {
        codebook_size: loaded.hp_parse("codebook_size")?,
        latent_dim: loaded.hp_parse("latent_dim")?,
        frame_dim: loaded.hp_parse("frame_dim")?,
        beta: loaded.hp_parse("beta")?,
        bias: loaded.hp_parse("bias")?,
    };
    let train_cfg = VqTrainCfg::default();
    let mut session = VqSession::new(cfg, &train_cfg)?;
    let names: Vec<String> = session
        .model
        .store()
        .iter()
        .map(|(n, _)| n.to_string())
        .collect();
    for name in names {
        let t = loaded.take_tensor(&name)?;
        session.model.store_mut().restore(&name, t)?;
    }
    let usage_dance = loaded.take_tensor("usage.dance")?;
    let usage_action = loaded.take_tensor("usage.action")?;
    session.model.usage_mut().dance = tensor_counts(&usage_dance);
    session.model.usage_mut().action = tensor_counts(&usage_action);

    let VqSession {
        ref model,
        ref mut adam,
        ref mut rng,
        ref mut completed_steps,
    } = session;
    restore_trainer(&mut loaded, model.store(), adam, rng, completed_steps)?;
    Ok(session)
}

/// Write a transformer checkpoint (optionally with training state). The
/// text vocabulary rides along so generation tokenizes new text identically.
pub fn save_xmodal(path: &Path, model: &XModal, vocab: &Vocab, state: Option<TrainerState>) -> Result<()> {
    let cfg = model.cfg();
    let mut hp = vec![
        ("codebook_size".to_string(), cfg.codebook_size.to_string()),
        ("hidden".to_string(), cfg.hidden.to_string()),
        ("layers".to_string(), cfg.layers.to_string()),
        ("heads".to_string(), cfg.heads.to_string()),
        ("ffn_mult".to_string(), cfg.ffn_mult.to_string()),
        ("audio_dim".to_string(), cfg.audio_dim.to_string()),
        ("vocab_size".to_string(), cfg.vocab_size.to_string()),
        ("max_seq_len".to_string(), cfg.max_seq_len.to_string()),
        ("vocab".to_string(), vocab.words().join(",")),
    ];
    trainer_hp(&mut hp, &state);
    let mut tensors: Vec<(String, &Tensor)> = model
        .store()
        .iter()
        .map(|(n, t)| (n.to_string(), t))
        .collect();
    trainer_tensors(&mut tensors, model.store(), &state);

    let file = fs::File::create(path)?;
    let mut w = Writer {
        out: BufWriter::new(file),
    };
    w.header("xmodal", &hp)?;
    w.tensors(&tensors)?;
    w.out.flush()?;
    Ok(())
}

/// Load a transformer checkpoint into a fresh session plus its vocabulary.
pub fn load_xmodal(path: &Path) -> Result<(XmSession, Vocab)> {
    let mut loaded = read_checkpoint(path)?;
    if loaded.section != "xmodal" {
        return Err(Error::Version(format!(
            "{}: expected an xmodal checkpoint, found section {}",
            path.display(),
            loaded.section
        )));
    }
    let cfg = XModalConfig {
        codebook_size: loaded.hp_parse("codebook_size")?,
        hidden: loaded.hp_parse("hidden")?,
        layers: loaded.hp_parse("layers")?,
        heads: loaded.hp_parse("heads")?,
        ffn_mult: loaded.hp_parse("ffn_mult")?,
        audio_dim: loaded.hp_parse("audio_dim")?,
        vocab_size: loaded.hp_parse("vocab_size")?,
        max_seq_len: loaded.hp_parse("max_seq_len")?,
    };
    let words: Vec<&str> = loaded.hp_str("vocab")?.split(',').collect();
    if words.len() != cfg.vocab_size {
        return Err(Error::Version(format!(
            "{}: vocabulary lists {} words but vocab_size is {}",
            path.display(),
            words.len(),
            cfg.vocab_size
        )));
    }
    let vocab = Vocab::build(words.iter().copied().filter(|w| *w != "<pad>" && *w != "<unk>"));
    if vocab.len() != cfg.vocab_size {
        return Err(Error::Version(format!(
            "{}: vocabulary reconstruction produced {} words, expected {}",
            path.display(),
            vocab.len(),
            cfg.vocab_size
        )));
    }

    let train_cfg = XmTrainCfg::default();
    let mut session = XmSession::new(cfg, &train_cfg)?;
    let names: Vec<String> = session
        .model
        .store()
        .iter()
        .map(|(n, _)| n.to_string())
        .collect();
    for name in names {
        let t = loaded.take_tensor(&name)?;
        session.model.store_mut().restore(&name, t)?;
    }
    let XmSession {
        ref model,
        ref mut adam,
        ref mut rng,
        ref mut completed_steps,
    } = session;
    restore_trainer(&mut loaded, model.store(), adam, rng, completed_steps)?;
    Ok((session, vocab))
}

fn counts_tensor(counts: &[u64]) -> Tensor {
    Tensor::new(
        vec![counts.len()],
        counts.iter().map(|&c| c as f64).collect(),
    )
    .expect("counts tensor")
}

fn tensor_counts(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|&v| v.round().max(0.0) as u64).collect()
}
