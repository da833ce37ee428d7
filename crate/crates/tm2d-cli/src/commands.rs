//! Implementations of the CLI subcommands.

use crate::{Command, ConfigArgs};
use std::fs;
use std::path::{Path, PathBuf};
use tm2d::error::{Error, Result};
use tm2d::fusion::{generate, FusionLocus, FusionSchedule, GenerationRequest};
use tm2d::io::{
    load_corpus, load_vqvae, load_xmodal, read_audio, read_motion, save_corpus, save_vqvae,
    save_xmodal, write_audio, write_motion, write_tokens, MetricReport, RunConfig, TrainerState,
};
use tm2d::metrics::{
    auc_f, beat_align, dance_beats, diversity, fid, geometric_features, kinetic_features,
    knn_predictor, mpd, pff, BeatList, FeatureVector,
};
use tm2d::motion::{
    synth_action_corpus, synth_dance_corpus, tokenize_text, ActionCfg, Corpus, CorpusItem,
    DanceCfg, MotionSequence, Provenance,
};
use tm2d::vqvae::VqSession;
use tm2d::xmodal::{tokenize_for_xmodal, XmSession};
use tm2d::{analysis, Tensor};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData { cfg, kind, n, seed, out } => {
            let mut rc = resolve(&cfg)?;
            rc.cmd = "gen-data".into();
            set_opt_string(&mut rc.kind, kind);
            set_opt(&mut rc.n, n);
            set_opt(&mut rc.seed, seed);
            set_opt_path(&mut rc.out, out);
            rc.validate()?;
            gen_data(&rc)
        }
        Command::TrainVqvae { cfg, dance, action, out, seed, resume } => {
            let mut rc = resolve(&cfg)?;
            rc.cmd = "train-vqvae".into();
            set_opt_path(&mut rc.dance_manifest, dance);
            set_opt_path(&mut rc.action_manifest, action);
            set_opt_path(&mut rc.out, out);
            set_opt(&mut rc.seed, seed);
            set_opt_path(&mut rc.resume_from, resume);
            rc.validate()?;
            train_vqvae_cmd(&rc)
        }
        Command::TrainXmodal { cfg, dance, action, ckpt_vq, out, seed, resume } => {
            let mut rc = resolve(&cfg)?;
            rc.cmd = "train-xmodal".into();
            set_opt_path(&mut rc.dance_manifest, dance);
            set_opt_path(&mut rc.action_manifest, action);
            set_opt_path(&mut rc.ckpt_vq, ckpt_vq);
            set_opt_path(&mut rc.out, out);
            set_opt(&mut rc.seed, seed);
            set_opt_path(&mut rc.resume_from, resume);
            rc.validate()?;
            train_xmodal_cmd(&rc)
        }
        Command::Generate {
            cfg,
            ckpt_vq,
            ckpt_xm,
            audio,
            text,
            text_start,
            text_duration,
            top_k,
            seed,
            out,
        } => {
            let mut rc = resolve(&cfg)?;
            rc.cmd = "generate".into();
            set_opt_path(&mut rc.ckpt_vq, ckpt_vq);
            set_opt_path(&mut rc.ckpt_xm, ckpt_xm);
            set_opt_path(&mut rc.audio, audio);
            set_opt_string(&mut rc.text, text);
            set_opt(&mut rc.text_start, text_start);
            set_opt(&mut rc.text_duration, text_duration);
            set_opt(&mut rc.top_k, top_k);
            set_opt(&mut rc.seed, seed);
            set_opt_path(&mut rc.out, out);
            rc.validate()?;
            generate_cmd(&rc)
        }
        Command::Evaluate { cfg, generated, reference, mpd_ref, out } => {
            let mut rc = resolve(&cfg)?;
            rc.cmd = "evaluate".into();
            set_opt_path(&mut rc.generated, generated);
            set_opt_path(&mut rc.reference, reference);
            set_opt_path(&mut rc.mpd_ref, mpd_ref);
            set_opt_path(&mut rc.out, out);
            rc.validate()?;
            evaluate_cmd(&rc)
        }
        Command::CodebookStats { cfg, ckpt, corpus_a, corpus_b, out } => {
            let mut rc = resolve(&cfg)?;
            rc.cmd = "codebook-stats".into();
            set_opt_path(&mut rc.ckpt_vq, ckpt);
            set_opt_path(&mut rc.corpus_a, corpus_a);
            set_opt_path(&mut rc.corpus_b, corpus_b);
            set_opt_path(&mut rc.out, out);
            rc.validate()?;
            codebook_stats_cmd(&rc)
        }
    }
}

fn resolve(args: &ConfigArgs) -> Result<RunConfig> {
    let mut rc = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for pair in &args.set {
        let (k, v) = pair.split_once('=').ok_or_else(|| {
            Error::Config(format!("--set expects KEY=VALUE, got {pair:?}"))
        })?;
        rc.set(k.trim(), v.trim())?;
    }
    Ok(rc)
}

fn set_opt<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt_string(slot: &mut String, value: Option<String>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt_path(slot: &mut String, value: Option<PathBuf>) {
    if let Some(v) = value {
        *slot = v.display().to_string();
    }
}

fn require<'a>(value: &'a str, what: &str) -> Result<&'a Path> {
    if value.is_empty() {
        return Err(Error::Config(format!("missing required {what}")));
    }
    Ok(Path::new(value))
}

fn echo_config(rc: &RunConfig, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    rc.save(path)
}

fn prefix_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(suffix);
    prefix.with_file_name(name)
}

// ---- gen-data ----

fn gen_data(rc: &RunConfig) -> Result<()> {
    let out = require(&rc.out, "--out directory")?;
    if rc.n < 1 {
        return Err(Error::Config("--n must be >= 1".into()));
    }
    let corpus = match rc.kind.as_str() {
        "dance" => synth_dance_corpus(
            rc.n,
            rc.seed,
            &DanceCfg {
                fps: rc.fps,
                audio_dim: rc.audio_dim,
                downsample: rc.downsample,
                ..DanceCfg::default()
            },
        )?,
        _ => synth_action_corpus(
            rc.n,
            rc.seed,
            &ActionCfg {
                fps: rc.fps,
                downsample: rc.downsample,
                ..ActionCfg::default()
            },
        )?,
    };
    save_corpus(out, &corpus)?;
    echo_config(rc, &out.join("config.txt"))?;
    println!(
        "wrote {} {} items to {}",
        corpus.len(),
        corpus.provenance.as_str(),
        out.display()
    );
    Ok(())
}

// ---- train-vqvae ----

fn train_vqvae_cmd(rc: &RunConfig) -> Result<()> {
    let out = require(&rc.out, "--out directory")?;
    let dance = load_corpus(require(&rc.dance_manifest, "dance manifest")?)?;
    let action = load_corpus(require(&rc.action_manifest, "action manifest")?)?;
    let train_cfg = rc.vq_train_config();

    let mut session = if rc.resume_from.is_empty() {
        VqSession::new(rc.vqvae_config(), &train_cfg)?
    } else {
        load_vqvae(Path::new(&rc.resume_from))?
    };
    let start_step = session.completed_steps;
    let log = session.train(&[&dance, &action], &train_cfg)?;

    fs::create_dir_all(out)?;
    save_vqvae(
        &out.join("vqvae.ckpt"),
        &session.model,
        Some(TrainerState {
            adam: &session.adam,
            rng: &session.rng,
            completed_steps: session.completed_steps,
        }),
    )?;
    write_loss_csv(&out.join("loss.csv"), log.steps.iter().map(|r| {
        (r.step, "mixed".to_string(), r.loss, Some(r.recon))
    }))?;
    write_usage_csv(&out.join("usage.csv"), &log.usage_epochs)?;
    let mut summary = String::new();
    summary.push_str(&format!("steps={}\n", session.completed_steps));
    summary.push_str(&format!("resumed_at={start_step}\n"));
    if let Some(r) = log.steps.last() {
        summary.push_str(&format!("final_loss={}\n", r.loss));
        summary.push_str(&format!("final_recon={}\n", r.recon));
    }
    if let Some(v) = log.val_l1 {
        summary.push_str(&format!("val_l1={v}\n"));
    }
    fs::write(out.join("summary.txt"), summary)?;
    echo_config(rc, &out.join("config.txt"))?;
    println!(
        "tokenizer trained to step {} ({} new); checkpoint at {}",
        session.completed_steps,
        session.completed_steps - start_step,
        out.join("vqvae.ckpt").display()
    );
    Ok(())
}

fn write_loss_csv(
    path: &Path,
    rows: impl Iterator<Item = (usize, String, f64, Option<f64>)>,
) -> Result<()> {
    let mut out = String::from("step,branch,loss,recon\n");
    for (step, branch, loss, recon) in rows {
        let recon = recon.map(|r| format!("{r:?}")).unwrap_or_default();
        out.push_str(&format!("{step},{branch},{loss:?},{recon}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_usage_csv(path: &Path, epochs: &[tm2d::vqvae::UsageEpoch]) -> Result<()> {
    let mut out = String::from("step_end,corpus,token_id,count\n");
    for e in epochs {
        for (t, &c) in e.dance.iter().enumerate() {
            if c > 0 {
                out.push_str(&format!("{},dance,{t},{c}\n", e.step_end));
            }
        }
        for (t, &c) in e.action.iter().enumerate() {
            if c > 0 {
                out.push_str(&format!("{},action,{t},{c}\n", e.step_end));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

// ---- train-xmodal ----

fn train_xmodal_cmd(rc: &RunConfig) -> Result<()> {
    let out = require(&rc.out, "--out directory")?;
    let dance = load_corpus(require(&rc.dance_manifest, "dance manifest")?)?;
    let action = load_corpus(require(&rc.action_manifest, "action manifest")?)?;
    let mut vq = load_vqvae(require(&rc.ckpt_vq, "--ckpt-vq")?)?;
    let data = tokenize_for_xmodal(&mut vq.model, &dance, &action)?;

    let train_cfg = rc.xm_train_config();
    let mut session = if rc.resume_from.is_empty() {
        let mut mcfg = rc.xmodal_config(data.vocab.len());
        mcfg.codebook_size = vq.model.cfg().codebook_size;
        if let Some(pair) = data.music.first() {
            if pair.features.cols() != mcfg.audio_dim {
                return Err(Error::Config(format!(
                    "audio_dim is {} but the corpus carries {}-wide features",
                    mcfg.audio_dim,
                    pair.features.cols()
                )));
            }
        }
        XmSession::new(mcfg, &train_cfg)?
    } else {
        let (session, vocab) = load_xmodal(Path::new(&rc.resume_from))?;
        if vocab != data.vocab {
            return Err(Error::Version(
                "resume checkpoint was trained with a different vocabulary".into(),
            ));
        }
        session
    };
    let start_step = session.completed_steps;
    let log = session.train(&data, &train_cfg)?;

    fs::create_dir_all(out)?;
    save_xmodal(
        &out.join("xmodal.ckpt"),
        &session.model,
        &data.vocab,
        Some(TrainerState {
            adam: &session.adam,
            rng: &session.rng,
            completed_steps: session.completed_steps,
        }),
    )?;
    write_loss_csv(&out.join("loss.csv"), log.steps.iter().map(|r| {
        let branch = match r.branch {
            tm2d::xmodal::Branch::Music => "music".to_string(),
            tm2d::xmodal::Branch::Text => "text".to_string(),
        };
        (r.step, branch, r.loss, None)
    }))?;
    let mut summary = String::new();
    summary.push_str(&format!("steps={}\n", session.completed_steps));
    summary.push_str(&format!("resumed_at={start_step}\n"));
    if let Some(l) = log.last_loss(tm2d::xmodal::Branch::Music) {
        summary.push_str(&format!("final_music_loss={l}\n"));
    }
    if let Some(l) = log.last_loss(tm2d::xmodal::Branch::Text) {
        summary.push_str(&format!("final_text_loss={l}\n"));
    }
    fs::write(out.join("summary.txt"), summary)?;
    echo_config(rc, &out.join("config.txt"))?;
    println!(
        "transformer trained to step {} ({} new); checkpoint at {}",
        session.completed_steps,
        session.completed_steps - start_step,
        out.join("xmodal.ckpt").display()
    );
    Ok(())
}

// ---- generate ----

fn generate_cmd(rc: &RunConfig) -> Result<()> {
    let out_prefix = require(&rc.out, "--out prefix")?;
    let vq = load_vqvae(require(&rc.ckpt_vq, "--ckpt-vq")?)?;
    let (xm, vocab) = load_xmodal(require(&rc.ckpt_xm, "--ckpt-xm")?)?;
    let audio = read_audio(require(&rc.audio, "--audio")?)?;

    let text = if rc.text.is_empty() {
        None
    } else {
        if rc.text_duration <= 0.0 {
            return Err(Error::Config(
                "--text requires --text-start and --text-duration".into(),
            ));
        }
        let mut schedule = FusionSchedule::new(rc.text_start, rc.text_duration);
        schedule.peak = rc.fusion_peak;
        schedule.ramp_fraction = rc.fusion_ramp;
        Some((tokenize_text(&rc.text, &vocab), schedule))
    };
    let req = GenerationRequest {
        audio: audio.clone(),
        text,
        top_k: rc.top_k,
        seed: rc.seed,
        locus: FusionLocus::parse(&rc.fusion_locus)?,
    };
    let (tokens, motion) = generate(&vq.model, &xm.model, &req)?;

    if let Some(parent) = out_prefix.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_motion(&prefix_path(out_prefix, ".tmot"), &motion)?;
    write_tokens(
        &prefix_path(out_prefix, ".ttok"),
        &tokens,
        vq.model.cfg().codebook_size,
    )?;
    write_audio(&prefix_path(out_prefix, ".taud"), &audio)?;
    echo_config(rc, &prefix_path(out_prefix, ".config.txt"))?;
    println!(
        "generated {} tokens -> {} frames at {}",
        tokens.len(),
        motion.len(),
        prefix_path(out_prefix, ".tmot").display()
    );
    Ok(())
}

// ---- evaluate ----

struct EvalItem {
    motion: MotionSequence,
    audio: Option<tm2d::motion::AudioFeatureSeq>,
}

fn scan_motions(dir: &Path) -> Result<Vec<EvalItem>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "tmot"))
        .collect();
    paths.sort();
    let mut items = Vec::with_capacity(paths.len());
    for p in paths {
        let motion = read_motion(&p)?;
        let taud = p.with_extension("taud");
        let audio = if taud.exists() { Some(read_audio(&taud)?) } else { None };
        items.push(EvalItem { motion, audio });
    }
    if items.is_empty() {
        return Err(Error::Config(format!(
            "{} contains no .tmot files",
            dir.display()
        )));
    }
    Ok(items)
}

fn evaluate_cmd(rc: &RunConfig) -> Result<()> {
    let out_prefix = require(&rc.out, "--out prefix")?;
    if let Some(parent) = out_prefix.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let generated = scan_motions(require(&rc.generated, "--generated")?)?;
    let reference = scan_motions(require(&rc.reference, "--reference")?)?;
    if generated.len() < 2 || reference.len() < 2 {
        return Err(Error::Config(format!(
            "fid needs at least 2 motions per side, got {} generated and {} reference",
            generated.len(),
            reference.len()
        )));
    }

    let features = |items: &[EvalItem]| -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
        let mut kin = Vec::with_capacity(items.len());
        let mut geo = Vec::with_capacity(items.len());
        for item in items {
            kin.push(kinetic_features(&item.motion)?);
            geo.push(geometric_features(&item.motion)?);
        }
        Ok((kin, geo))
    };
    let (gen_k, gen_g) = features(&generated)?;
    let (ref_k, ref_g) = features(&reference)?;

    let fid_k = fid(&gen_k, &ref_k)?;
    let fid_g = fid(&gen_g, &ref_g)?;
    let div = diversity(&gen_k, rc.diversity_pairs, rc.seed)?;

    let mut align_sum = 0.0;
    let mut align_n = 0usize;
    for item in &generated {
        if let Some(audio) = &item.audio {
            if audio.beat_times.is_empty() {
                continue;
            }
            let music = BeatList::new(audio.beat_times.clone())?;
            let dance = dance_beats(&item.motion)?;
            align_sum += beat_align(&music, &dance, rc.beat_sigma);
            align_n += 1;
        }
    }
    let beat = if align_n > 0 { align_sum / align_n as f64 } else { 0.0 };

    let mut pff_sum = 0.0;
    let mut auc_sum = 0.0;
    for item in &generated {
        pff_sum += pff(&item.motion, rc.pff_threshold, rc.pff_min_duration)?;
        auc_sum += auc_f(&item.motion, rc.aucf_max_threshold)?;
    }
    let pff_mean = pff_sum / generated.len() as f64;
    let auc_mean = auc_sum / generated.len() as f64;

    // Motion prediction distance against the (possibly separate) predictor
    // reference.
    let mpd_dir = if rc.mpd_ref.is_empty() { &rc.reference } else { &rc.mpd_ref };
    let mpd_items = scan_motions(Path::new(mpd_dir))?;
    let mpd_corpus = Corpus {
        items: mpd_items
            .into_iter()
            .enumerate()
            .map(|(i, item)| CorpusItem {
                motion: item.motion,
                audio: None,
                text: Some(String::new()),
                label: format!("ref_{i:04}"),
            })
            .collect(),
        provenance: Provenance::Action,
    };
    let oracle = knn_predictor(&mpd_corpus, rc.mpd_k, rc.mpd_past_frames, rc.mpd_future_frames)?;
    let mut mpd_sum = 0.0;
    let mut mpd_n = 0usize;
    for item in &generated {
        let t = item.motion.len();
        let need = rc.mpd_past_frames + rc.mpd_future_frames;
        if t < need + 1 {
            continue;
        }
        let fps = item.motion.fps();
        let f1 = (t / 2).clamp(rc.mpd_past_frames, t - rc.mpd_future_frames);
        let f0 = f1 - rc.mpd_past_frames;
        let f2 = f1 + rc.mpd_future_frames;
        mpd_sum += mpd(
            &oracle,
            &item.motion,
            f0 as f64 / fps,
            f1 as f64 / fps,
            f2 as f64 / fps,
        )?;
        mpd_n += 1;
    }
    if mpd_n == 0 {
        return Err(Error::TooShort(format!(
            "no generated motion is long enough for mpd ({} + {} frames)",
            rc.mpd_past_frames, rc.mpd_future_frames
        )));
    }
    let mpd_mean = mpd_sum / mpd_n as f64;

    let report = MetricReport {
        fid_k,
        fid_g,
        div,
        beat_align: beat,
        pff: pff_mean,
        auc_f: auc_mean,
        mpd: mpd_mean,
        params: vec![
            ("n_generated".into(), generated.len().to_string()),
            ("n_reference".into(), reference.len().to_string()),
            ("beat_align_sources".into(), align_n.to_string()),
            ("mpd_evaluated".into(), mpd_n.to_string()),
            ("pff_threshold".into(), format!("{:?}", rc.pff_threshold)),
            ("pff_min_duration".into(), format!("{:?}", rc.pff_min_duration)),
            ("aucf_max_threshold".into(), format!("{:?}", rc.aucf_max_threshold)),
            ("beat_sigma".into(), format!("{:?}", rc.beat_sigma)),
            ("diversity_pairs".into(), rc.diversity_pairs.to_string()),
            ("mpd_past_frames".into(), rc.mpd_past_frames.to_string()),
            ("mpd_future_frames".into(), rc.mpd_future_frames.to_string()),
            ("mpd_k".into(), rc.mpd_k.to_string()),
            ("seed".into(), rc.seed.to_string()),
        ],
    };
    if !report.is_finite() {
        return Err(Error::Numeric("metric report contains non-finite values".into()));
    }
    report.save(
        &prefix_path(out_prefix, ".report.txt"),
        Some(&prefix_path(out_prefix, ".report.csv")),
    )?;
    echo_config(rc, &prefix_path(out_prefix, ".config.txt"))?;
    print!("{}", report.to_text());
    Ok(())
}

// ---- codebook-stats ----

fn codebook_stats_cmd(rc: &RunConfig) -> Result<()> {
    let out_prefix = require(&rc.out, "--out prefix")?;
    let vq = load_vqvae(require(&rc.ckpt_vq, "--ckpt")?)?;
    let corpus_a = load_corpus(require(&rc.corpus_a, "--corpus-a")?)?;
    let corpus_b = load_corpus(require(&rc.corpus_b, "--corpus-b")?)?;
    let k = vq.model.cfg().codebook_size;

    let tokenize_all = |corpus: &Corpus| -> Result<Vec<tm2d::vqvae::TokenSeq>> {
        corpus
            .items
            .iter()
            .map(|item| vq.model.tokenize(&item.motion))
            .collect()
    };
    let tokens_a = tokenize_all(&corpus_a)?;
    let tokens_b = tokenize_all(&corpus_b)?;
    let stats = analysis::usage_stats(&tokens_a, &tokens_b, k)?;

    let mut csv = format!(
        "# total_K={} used_a={} used_b={} shared={} pct_a={:.4} pct_b={:.4}\n",
        stats.total_k, stats.used_a, stats.used_b, stats.shared, stats.pct_a, stats.pct_b
    );
    csv.push_str("token_id,freq_a,freq_b\n");
    for t in 0..k {
        csv.push_str(&format!(
            "{t},{:?},{:?}\n",
            stats.histogram_a[t], stats.histogram_b[t]
        ));
    }
    if let Some(parent) = out_prefix.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(prefix_path(out_prefix, ".csv"), &csv)?;

    // Two-column projection of the codebook entries for plotting.
    let entries: &Tensor = vq.model.codebook_entries();
    let rows: Vec<Vec<f64>> = (0..k).map(|i| entries.row(i).to_vec()).collect();
    let proj = analysis::pca_2d(&rows)?;
    let mut pca_csv = String::from("token_id,pc1,pc2\n");
    for (t, p) in proj.iter().enumerate() {
        pca_csv.push_str(&format!("{t},{:?},{:?}\n", p[0], p[1]));
    }
    fs::write(prefix_path(out_prefix, ".pca.csv"), pca_csv)?;
    echo_config(rc, &prefix_path(out_prefix, ".config.txt"))?;
    println!(
        "K={} used_a={} used_b={} shared={} ({:.1}% / {:.1}%)",
        stats.total_k, stats.used_a, stats.used_b, stats.shared, stats.pct_a, stats.pct_b
    );
    Ok(())
}
