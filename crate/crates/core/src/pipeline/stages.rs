use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::countermeasure::{train_cm, write_score_file};
use crate::dsp::wav::read_wav;
use crate::embedder::{
    confusion_analysis, extract_xvectors, mfcc_sequence, train_xvector_extractor, verification_eer, Confusion,
    Grouping, LdaModel, QualityVsDistance, Verification, XvectorTraining,
};
use crate::error::{Error, Result};
use crate::features::{
    downsample_frames, read_archive, stack_frames, write_archive, Archive, ArchiveKind, FeatureExtractor,
    FeatureMatrix, Rescaler, TARGET_FRAMES,
};
use crate::labels::{JointLabel, N_JOINT};
use crate::metrics::{asv_operating_point, read_keys, read_scores, write_keys, write_scores, Key, ScoreFile, Summary};
use crate::nnet::{Checkpoint, Loss, Network, TrainReport};
use crate::seeds;
use crate::simcorpus::{generate_corpus, simulate_asv_scores, Manifest, ManifestRecord, Split};

use super::ExperimentConfig;

/// Fixed artifact locations under one work directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn manifest(&self) -> PathBuf {
        self.corpus_dir().join("manifest.txt")
    }

    /// Bona fide / spoof key of every utterance.
    pub fn cm_keys(&self) -> PathBuf {
        self.corpus_dir().join("cm_keys.txt")
    }

    pub fn asv_scores(&self, split: Split) -> PathBuf {
        self.corpus_dir().join(format!("asv_{split}_scores.txt"))
    }

    pub fn asv_keys(&self, split: Split) -> PathBuf {
        self.corpus_dir().join(format!("asv_{split}_keys.txt"))
    }

    pub fn features(&self, kind: &str) -> PathBuf {
        self.root.join("features").join(format!("{kind}.rdfeat"))
    }

    pub fn xvector_model(&self) -> PathBuf {
        self.root.join("xvector").join("tdnn.rdnet")
    }

    pub fn xvector_history(&self) -> PathBuf {
        self.root.join("xvector").join("history.txt")
    }

    pub fn xvector_report(&self) -> PathBuf {
        self.root.join("xvector").join("report.txt")
    }

    pub fn xvectors(&self) -> PathBuf {
        self.root.join("xvector").join("xvectors.rdxvec")
    }

    pub fn lda(&self) -> PathBuf {
        self.root.join("xvector").join("lda.rdlda")
    }

    pub fn cm_dir(&self, system: &str) -> PathBuf {
        self.root.join("cm").join(system)
    }

    pub fn cm_model(&self, system: &str) -> PathBuf {
        self.cm_dir(system).join("model.rdnet")
    }

    pub fn cm_rescaler(&self, system: &str) -> PathBuf {
        self.cm_dir(system).join("rescaler.txt")
    }

    pub fn cm_history(&self, system: &str) -> PathBuf {
        self.cm_dir(system).join("history.txt")
    }

    pub fn scores(&self, system: &str, split: Split) -> PathBuf {
        self.cm_dir(system).join(format!("scores_{split}.txt"))
    }

    pub fn eval_summary(&self, system: &str, split: Split) -> PathBuf {
        self.cm_dir(system).join(format!("eval_{split}.txt"))
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.root.join("analysis")
    }
}

/// Score, key and ASV files consumed by `eval`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalInputs {
    pub scores: PathBuf,
    pub keys: PathBuf,
    pub asv_scores: PathBuf,
    pub asv_keys: PathBuf,
}

/// Outcome of `analyze`.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub attack: Confusion,
    pub environment: Confusion,
    pub quality: QualityVsDistance,
    pub verification: Verification,
}

/// One utterance's countermeasure input before rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct CmItem {
    pub id: String,
    pub vector: Vec<f32>,
    pub bonafide: bool,
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn header(hash: u64) -> String {
    format!("# config {hash:016x}\n")
}

/// Hash from a leading `# config <hex>` line.
fn header_hash(text: &str, path: &Path) -> Result<Option<u64>> {
    match text.lines().next().and_then(|l| l.strip_prefix("# config ")) {
        None => Ok(None),
        Some(h) => u64::from_str_radix(h.trim(), 16).map(Some).map_err(|e| Error::Format {
            what: "header",
            path: path.to_path_buf(),
            detail: e.to_string(),
        }),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Runs pipeline stages for one configuration inside a [`Layout`].
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub layout: Layout,
    /// Accept artifacts whose config hash differs from the current one.
    pub force: bool,
    /// Directory name of the countermeasure artifacts.
    pub system: String,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig, layout: Layout) -> Result<Self> {
        cfg.validate()?;
        let system = cfg.system_name();
        Ok(Self {
            cfg,
            layout,
            force: false,
            system,
        })
    }

    fn check(&self, path: &Path, found: u64, expected: u64) -> Result<()> {
        if found == expected {
            return Ok(());
        }
        if self.force {
            log::warn!(
                "{}: config hash {found:016x} differs from {expected:016x}; continuing (--force)",
                path.display()
            );
            return Ok(());
        }
        Err(Error::ConfigMismatch {
            path: path.to_path_buf(),
            expected,
            found,
        })
    }

    fn check_optional(&self, path: &Path, found: Option<u64>, expected: u64) -> Result<()> {
        match found {
            Some(h) => self.check(path, h, expected),
            None => Ok(()),
        }
    }

    /// Manifest with its config header verified.
    pub fn read_manifest(&self) -> Result<Manifest> {
        let path = self.layout.manifest();
        let text = read_text(&path)?;
        self.check_optional(&path, header_hash(&text, &path)?, self.cfg.corpus_hash())?;
        Manifest::parse(&text, &path)
    }

    /// Renders the corpus, its bona fide/spoof key and simulated ASV trials
    /// for the dev and eval splits.
    pub fn simulate(&self, seed: u64) -> Result<Manifest> {
        let dir = self.layout.corpus_dir();
        let hash = self.cfg.corpus_hash();
        log::info!("simulating {:?} into {}", self.cfg.corpus, dir.display());
        let manifest = generate_corpus(&self.cfg.simulator, &self.cfg.corpus, seed, &dir)?;
        write_text(&self.layout.manifest(), &(header(hash) + &manifest.to_text()))?;
        let keys: Vec<(String, Key)> = manifest
            .records
            .iter()
            .map(|r| {
                (
                    r.utt_id.clone(),
                    if r.label.attack.is_bonafide() {
                        Key::Bonafide
                    } else {
                        Key::Spoof
                    },
                )
            })
            .collect();
        write_keys(&self.layout.cm_keys(), &keys)?;
        for split in [Split::Dev, Split::Eval] {
            let mut trials = simulate_asv_scores(
                &manifest.split(split),
                &self.cfg.simulator,
                seeds::derive(seed, &[0xA5, split as u64]),
            )?;
            trials.scores.config_hash = Some(hash);
            write_scores(&self.layout.asv_scores(split), &trials.scores)?;
            write_keys(&self.layout.asv_keys(split), &trials.keys)?;
        }
        Ok(manifest)
    }

    /// Down-sampled `N x 10` coefficient matrices of every utterance.
    pub fn extract(&self) -> Result<Archive> {
        let manifest = self.read_manifest()?;
        let fc = self.cfg.features.feature_config()?;
        let ex = FeatureExtractor::<f64>::new(fc.clone())?;
        let mp = self.layout.manifest();
        log::info!(
            "extracting {} (N = {}) for {} utterances",
            fc.kind,
            fc.n_coeffs,
            manifest.records.len()
        );
        let rows: Vec<Vec<f32>> = manifest
            .records
            .par_iter()
            .map(|r| {
                let w = read_wav::<f64>(&Manifest::resolve(&mp, r))?;
                let f = downsample_frames(&ex.extract(&w, &r.utt_id)?, TARGET_FRAMES)?;
                Ok(f.values.iter().map(|&v| v as f32).collect())
            })
            .collect::<Result<_>>()?;
        let mut archive = Archive::new(
            ArchiveKind::Features,
            fc.kind.name(),
            fc.n_coeffs,
            TARGET_FRAMES,
            self.cfg.features_hash()?,
        );
        for (r, values) in manifest.records.iter().zip(rows) {
            archive.push(&r.utt_id, None, values)?;
        }
        let path = self.layout.features(fc.kind.name());
        create_parent(&path)?;
        write_archive(&path, &archive)?;
        Ok(archive)
    }

    fn mfcc_sequences(&self, records: &[&ManifestRecord]) -> Result<Vec<Array2<f32>>> {
        let ex = FeatureExtractor::<f64>::new(self.cfg.tdnn.mfcc())?;
        let mp = self.layout.manifest();
        records
            .par_iter()
            .map(|r| mfcc_sequence(&ex, &read_wav::<f64>(&Manifest::resolve(&mp, r))?, self.cfg.tdnn.cmn))
            .collect()
    }

    /// Trains the TDNN on the 270 joint env+attack classes of the train split.
    pub fn train_xvector(&self, seed: u64) -> Result<XvectorTraining> {
        let manifest = self.read_manifest()?;
        let train = manifest.split(Split::Train);
        let seqs = self.mfcc_sequences(&train)?;
        let labels: Vec<String> = train.iter().map(|r| r.label.to_string()).collect();
        let classes: Vec<String> = JointLabel::all().iter().map(ToString::to_string).collect();
        let tc = self.cfg.tdnn_train.to_train_config(Loss::SoftmaxCrossEntropy, seed);
        log::info!("training x-vector TDNN on {} utterances", seqs.len());
        let out = train_xvector_extractor(seqs, &labels, &classes, &self.cfg.tdnn, &tc)?;
        let hash = self.cfg.xvector_hash();
        let path = self.layout.xvector_model();
        create_parent(&path)?;
        Checkpoint::new(out.net.clone(), hash).write(&path)?;
        out.report.write_history(&self.layout.xvector_history())?;
        let mut report = header(hash);
        let _ = writeln!(report, "val_accuracy {:.6}", out.val_accuracy);
        let _ = writeln!(report, "chance {:.6}", 1.0 / N_JOINT as f64);
        let _ = writeln!(report, "best_epoch {}", out.report.best_epoch);
        let _ = writeln!(report, "epochs {}", out.report.history.len());
        write_text(&self.layout.xvector_report(), &report)?;
        Ok(out)
    }

    fn read_checkpoint(&self, path: &Path, expected: u64) -> Result<Network<f32>> {
        let ckpt = Checkpoint::<f32>::read(path)?;
        self.check(path, ckpt.config_hash, expected)?;
        Ok(ckpt.net)
    }

    /// 512-dim x-vectors of every utterance, labelled with the joint class.
    pub fn extract_xvectors(&self) -> Result<Archive> {
        let manifest = self.read_manifest()?;
        let hash = self.cfg.xvector_hash();
        let net = self.read_checkpoint(&self.layout.xvector_model(), hash)?;
        let records: Vec<&ManifestRecord> = manifest.records.iter().collect();
        let seqs = self.mfcc_sequences(&records)?;
        let vectors = extract_xvectors(&net, &seqs, &self.cfg.tdnn)?;
        let mut archive = Archive::new(ArchiveKind::XVectors, "xvector", self.cfg.tdnn.embedding_dim, 1, hash);
        for (r, v) in records.iter().zip(vectors) {
            archive.push(&r.utt_id, Some(&r.label.to_string()), v)?;
        }
        write_archive(&self.layout.xvectors(), &archive)?;
        Ok(archive)
    }

    fn read_xvectors(&self) -> Result<Archive> {
        let path = self.layout.xvectors();
        let a = read_archive(&path)?;
        if a.archive_kind != ArchiveKind::XVectors {
            return Err(Error::data(format!("{} is not an x-vector archive", path.display())));
        }
        self.check(&path, a.config_hash, self.cfg.xvector_hash())?;
        Ok(a)
    }

    /// Fits the LDA on the train-split x-vectors.
    pub fn fit_lda(&self) -> Result<LdaModel> {
        let manifest = self.read_manifest()?;
        let xv = self.read_xvectors()?;
        let rows = split_rows(&xv, &manifest, Split::Train)?;
        let x = to_matrix(&rows, xv.rows * xv.cols)?;
        let labels: Vec<String> = rows.iter().map(|(r, _)| r.label.to_string()).collect();
        let mut lda = LdaModel::fit(&x, &labels, self.cfg.lda.out_dim)?;
        lda.config_hash = self.cfg.lda_hash();
        lda.write(&self.layout.lda())?;
        Ok(lda)
    }

    fn read_lda(&self) -> Result<LdaModel> {
        let path = self.layout.lda();
        let lda = LdaModel::read(&path)?;
        self.check(&path, lda.config_hash, self.cfg.lda_hash())?;
        Ok(lda)
    }

    /// Unscaled countermeasure inputs of one split, in manifest order.
    pub fn cm_items(&self, split: Split) -> Result<Vec<CmItem>> {
        let manifest = self.read_manifest()?;
        let feats = if self.cfg.features.signal {
            let fc = self.cfg.features.feature_config()?;
            let path = self.layout.features(fc.kind.name());
            let a = read_archive(&path)?;
            self.check(&path, a.config_hash, self.cfg.features_hash()?)?;
            if a.archive_kind != ArchiveKind::Features || a.rows != fc.n_coeffs || a.cols != TARGET_FRAMES {
                return Err(Error::data(format!(
                    "{} does not hold {} x {TARGET_FRAMES} features",
                    path.display(),
                    fc.n_coeffs
                )));
            }
            Some((fc.kind, a))
        } else {
            None
        };
        let emb = if self.cfg.features.embedding {
            Some((self.read_xvectors()?, self.read_lda()?))
        } else {
            None
        };
        let scale = self.cfg.features.embedding_scale;
        let feat_rows = match &feats {
            Some((_, a)) => Some(index(a)),
            None => None,
        };
        let xv_rows = emb.as_ref().map(|(a, _)| index(a));
        manifest
            .split(split)
            .into_iter()
            .map(|r| {
                let mut vector = Vec::with_capacity(self.cfg.vector_len()?);
                if let (Some((kind, a)), Some(rows)) = (&feats, &feat_rows) {
                    let values = lookup(rows, &r.utt_id, "feature")?;
                    let m = FeatureMatrix {
                        values: Array2::from_shape_vec((a.rows, a.cols), values.to_vec()).expect("archive shape"),
                        kind: *kind,
                        utterance_id: r.utt_id.clone(),
                    };
                    vector.extend(stack_frames(&m)?.values);
                }
                if let (Some((_, lda)), Some(rows)) = (&emb, &xv_rows) {
                    let x: Vec<f64> = lookup(rows, &r.utt_id, "x-vector")?.iter().map(|&v| v as f64).collect();
                    vector.extend(lda.project(&x)?.iter().map(|&v| (v * scale) as f32));
                }
                Ok(CmItem {
                    id: r.utt_id.clone(),
                    vector,
                    bonafide: r.label.attack.is_bonafide(),
                })
            })
            .collect()
    }

    /// Fits the rescaler on the train split and trains the countermeasure.
    pub fn train_cm(&self, seed: u64) -> Result<TrainReport> {
        let items = self.cm_items(Split::Train)?;
        let rescaler = Rescaler::<f32>::fit(items.iter().map(|i| i.vector.as_slice()))?;
        let xs: Vec<Vec<f32>> = items.iter().map(|i| rescaler.apply(&i.vector)).collect::<Result<_>>()?;
        let bona: Vec<bool> = items.iter().map(|i| i.bonafide).collect();
        let tc = self.cfg.cm_train.to_train_config(Loss::Mse, seed);
        log::info!(
            "training countermeasure {} on {} vectors of length {}",
            self.system,
            xs.len(),
            rescaler.dim()
        );
        let (net, report) = train_cm(&xs, &bona, &self.cfg.cm, &tc)?;
        let hash = self.cfg.cm_hash()?;
        let path = self.layout.cm_model(&self.system);
        create_parent(&path)?;
        Checkpoint::new(net, hash).write(&path)?;
        rescaler.write(
            &self.layout.cm_rescaler(&self.system),
            Some(&format!("config {hash:016x}")),
        )?;
        report.write_history(&self.layout.cm_history(&self.system))?;
        Ok(report)
    }

    /// Scores one split with the trained countermeasure.
    pub fn score(&self, split: Split) -> Result<ScoreFile> {
        let hash = self.cfg.cm_hash()?;
        let net = self.read_checkpoint(&self.layout.cm_model(&self.system), hash)?;
        let rpath = self.layout.cm_rescaler(&self.system);
        let rtext = read_text(&rpath)?;
        self.check_optional(&rpath, header_hash(&rtext, &rpath)?, hash)?;
        let rescaler = Rescaler::<f32>::parse(&rtext, &rpath)?;
        let items: Vec<(String, Vec<f32>)> = self
            .cm_items(split)?
            .into_iter()
            .map(|i| Ok((i.id, rescaler.apply(&i.vector)?)))
            .collect::<Result<_>>()?;
        write_score_file(&net, &items, Some(hash), &self.layout.scores(&self.system, split))
    }

    /// EER and min-tDCF of arbitrary score/key files.
    pub fn evaluate(&self, inputs: &EvalInputs) -> Result<Summary> {
        let scores = read_scores(&inputs.scores)?;
        self.check_optional(&inputs.scores, scores.config_hash, self.cfg.cm_hash()?)?;
        let keys = read_keys(&inputs.keys)?;
        let (bona, spoof) = scores.split(&keys, Key::Bonafide, Key::Spoof)?;
        let asv = read_scores(&inputs.asv_scores)?;
        self.check_optional(&inputs.asv_scores, asv.config_hash, self.cfg.corpus_hash())?;
        let asv_keys = read_keys(&inputs.asv_keys)?;
        let (tar, non) = asv.split(&asv_keys, Key::Target, Key::Nontarget)?;
        let op = asv_operating_point(&tar, &non, &asv.select(&asv_keys, Key::Spoof))?;
        Summary::compute(&bona, &spoof, &self.cfg.tdcf, &op)
    }

    pub fn eval_inputs(&self, split: Split) -> EvalInputs {
        EvalInputs {
            scores: self.layout.scores(&self.system, split),
            keys: self.layout.cm_keys(),
            asv_scores: self.layout.asv_scores(split),
            asv_keys: self.layout.asv_keys(split),
        }
    }

    /// Evaluates the stored scores of one split and writes the summary.
    pub fn eval(&self, split: Split) -> Result<Summary> {
        let s = self.evaluate(&self.eval_inputs(split))?;
        write_text(
            &self.layout.eval_summary(&self.system, split),
            &(header(self.cfg.cm_hash()?) + &s.to_text()),
        )?;
        Ok(s)
    }

    /// Attack and environment confusion of dev x-vectors against train
    /// references in LDA space, plus env+attack verification EER.
    pub fn analyze(&self, seed: u64) -> Result<Analysis> {
        let manifest = self.read_manifest()?;
        let xv = self.read_xvectors()?;
        let lda = self.read_lda()?;
        let project = |split| -> Result<Vec<(JointLabel, Array1<f64>)>> {
            split_rows(&xv, &manifest, split)?
                .into_iter()
                .map(|(r, v)| {
                    let x: Vec<f64> = v.iter().map(|&a| a as f64).collect();
                    Ok((r.label, lda.project(&x)?))
                })
                .collect()
        };
        let reference = project(Split::Train)?;
        let test = project(Split::Dev)?;
        let attack = confusion_analysis(&reference, &test, Grouping::Attack)?;
        let environment = confusion_analysis(&reference, &test, Grouping::Environment)?;
        let quality = attack.quality_vs_distance()?;
        let trials: Vec<(String, Array1<f64>)> = test.iter().map(|(l, v)| (l.to_string(), v.clone())).collect();
        let verification = verification_eer(&lda.class_means, &trials, seed)?;
        let dir = self.layout.analysis_dir();
        let h = header(self.cfg.lda_hash());
        write_text(&dir.join("confusion_attack.txt"), &(h.clone() + &attack.to_text()))?;
        write_text(&dir.join("confusion_env.txt"), &(h.clone() + &environment.to_text()))?;
        let mut summary = h;
        let _ = writeln!(summary, "verification_eer {:.6}", verification.eer);
        let _ = writeln!(summary, "target_trials {}", verification.n_target);
        let _ = writeln!(summary, "nontarget_trials {}", verification.n_nontarget);
        let _ = writeln!(summary, "same_quality_similarity {:.6}", quality.same_quality);
        let _ = writeln!(summary, "same_distance_similarity {:.6}", quality.same_distance);
        write_text(&dir.join("summary.txt"), &summary)?;
        Ok(Analysis {
            attack,
            environment,
            quality,
            verification,
        })
    }
}

fn index(a: &Archive) -> HashMap<&str, &[f32]> {
    a.records.iter().map(|r| (r.id.as_str(), r.values.as_slice())).collect()
}

fn lookup<'a>(rows: &HashMap<&str, &'a [f32]>, id: &str, what: &str) -> Result<&'a [f32]> {
    rows.get(id)
        .copied()
        .ok_or_else(|| Error::data(format!("no {what} record for utterance {id}")))
}

fn split_rows<'a>(a: &'a Archive, m: &'a Manifest, split: Split) -> Result<Vec<(&'a ManifestRecord, &'a [f32])>> {
    let rows = index(a);
    m.split(split)
        .into_iter()
        .map(|r| Ok((r, lookup(&rows, &r.utt_id, "x-vector")?)))
        .collect()
}

fn to_matrix(rows: &[(&ManifestRecord, &[f32])], dim: usize) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(Error::data("no vectors in split"));
    }
    let flat: Vec<f64> = rows.iter().flat_map(|(_, v)| v.iter().map(|&x| x as f64)).collect();
    Array2::from_shape_vec((rows.len(), dim), flat).map_err(|e| Error::data(e.to_string()))
}
