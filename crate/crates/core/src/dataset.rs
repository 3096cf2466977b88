//! Dataset discovery, manifests and split protocols.
//!
//! A [`DatasetManifest`] is the immutable record of which image files belong
//! to which class and split. Class ids are assigned by lexicographic order of
//! the class directory names, so the same tree yields the same ids on every
//! filesystem.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no such directory: {0}")]
    NoSuchDirectory(PathBuf),
    #[error("{dir}: directory name {name:?} is not a split (expected train, validation or test)")]
    UnknownSplitDir { dir: PathBuf, name: String },
    #[error("class {class:?} has no readable images")]
    EmptyClass { class: String },
    #[error("no class directories found under {0}")]
    NoClasses(PathBuf),
    #[error("all {count} image files were unreadable")]
    AllImagesUnreadable { count: usize },
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),
    #[error("sample {sample_id:?} references unknown class {name:?}")]
    UnknownClass { sample_id: String, name: String },
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("class {class:?} has {available} samples, too few to populate every requested split")]
    InsufficientClassSamples { class: String, available: usize },
    #[error("manifest schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    /// Maps a directory name onto a split. Redistributed copies of image
    /// datasets use `Train`/`Valid`/`Test` as often as the long names.
    pub fn from_dir_name(name: &str) -> Option<Split> {
        match name.to_ascii_lowercase().as_str() {
            "train" | "training" => Some(Split::Train),
            "validation" | "valid" | "val" => Some(Split::Validation),
            "test" | "testing" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::from_dir_name(s).ok_or_else(|| format!("unknown split {s:?}"))
    }
}

/// Directory layout of an image tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `root/<split>/<class>/<image>`
    SplitFirst,
    /// `root/<class>/<image>` or `root/<class>/<split>/<image>`; images
    /// directly under a class directory belong to the train split.
    ClassFirst,
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "split-first" => Ok(Layout::SplitFirst),
            "class-first" => Ok(Layout::ClassFirst),
            _ => Err(format!("unknown layout {s:?} (expected split-first or class-first)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    pub id: usize,
    pub name: String,
}

impl ClassLabel {
    /// Builds dense labels from names: sorted lexicographically, duplicates
    /// removed, ids assigned by position.
    pub fn from_names<I, S>(names: I) -> Vec<ClassLabel>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        set.into_iter()
            .enumerate()
            .map(|(id, name)| ClassLabel { id, name })
            .collect()
    }

    /// Labels named by their own index, for anonymous class sets.
    pub fn indexed(k: usize) -> Vec<ClassLabel> {
        (0..k)
            .map(|id| ClassLabel {
                id,
                name: format!("class-{id}"),
            })
            .collect()
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRef {
    /// Path relative to the scanned root, `/`-separated.
    pub sample_id: String,
    pub path: PathBuf,
    pub label: ClassLabel,
    pub split: Split,
}

/// Per-(class, split) sample counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountTable {
    cells: Vec<[usize; 3]>,
}

impl CountTable {
    fn tally(k: usize, samples: &[SampleRef]) -> Self {
        let mut cells = vec![[0usize; 3]; k];
        for s in samples {
            cells[s.label.id][s.split.index()] += 1;
        }
        CountTable { cells }
    }

    pub fn get(&self, class: usize, split: Split) -> usize {
        self.cells[class][split.index()]
    }

    pub fn class_total(&self, class: usize) -> usize {
        self.cells[class].iter().sum()
    }

    pub fn split_total(&self, split: Split) -> usize {
        self.cells.iter().map(|c| c[split.index()]).sum()
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    classes: Vec<ClassLabel>,
    samples: Vec<SampleRef>,
    counts: CountTable,
}

impl DatasetManifest {
    /// Validates and indexes a manifest. `classes` must carry dense ids
    /// `0..K`; every sample label must be one of them.
    pub fn new(classes: Vec<ClassLabel>, samples: Vec<SampleRef>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.sample_id.as_str()) {
                return Err(DatasetError::DuplicateSampleId(s.sample_id.clone()));
            }
            if classes.get(s.label.id) != Some(&s.label) {
                return Err(DatasetError::UnknownClass {
                    sample_id: s.sample_id.clone(),
                    name: s.label.name.clone(),
                });
            }
        }
        let counts = CountTable::tally(classes.len(), &samples);
        Ok(DatasetManifest {
            classes,
            samples,
            counts,
        })
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn samples(&self) -> &[SampleRef] {
        &self.samples
    }

    pub fn counts(&self) -> &CountTable {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples_in(&self, split: Split) -> impl Iterator<Item = &SampleRef> + '_ {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn class_by_name(&self, name: &str) -> Option<&ClassLabel> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Per-class, per-split count table in the usual dataset-card layout.
    pub fn summary_table(&self) -> String {
        let width = self
            .classes
            .iter()
            .map(|c| c.name.len())
            .chain(["Class".len(), "Total".len()])
            .max()
            .unwrap_or(5);
        let mut out = format!(
            "{:<width$}  {:>6}  {:>10}  {:>6}\n",
            "Class", "Train", "Validation", "Test"
        );
        for c in &self.classes {
            out.push_str(&format!(
                "{:<width$}  {:>6}  {:>10}  {:>6}\n",
                c.name,
                self.counts.get(c.id, Split::Train),
                self.counts.get(c.id, Split::Validation),
                self.counts.get(c.id, Split::Test),
            ));
        }
        out.push_str(&format!(
            "{:<width$}  {:>6}  {:>10}  {:>6}\n",
            "Total",
            self.counts.split_total(Split::Train),
            self.counts.split_total(Split::Validation),
            self.counts.split_total(Split::Test),
        ));
        out
    }
}

/// A file that was skipped during scanning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub manifest: DatasetManifest,
    pub warnings: Vec<ScanWarning>,
}

struct Candidate {
    class: String,
    split: Split,
    rel: String,
    path: PathBuf,
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf, bool)>, DatasetError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        let path = entry.path();
        let is_dir = path.is_dir();
        out.push((name, path, is_dir));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

fn collect_files(
    dir: &Path,
    class: &str,
    split: Split,
    rel_prefix: &str,
    out: &mut Vec<Candidate>,
) -> Result<(), DatasetError> {
    for (name, path, is_dir) in sorted_entries(dir)? {
        if is_dir {
            continue;
        }
        out.push(Candidate {
            class: class.to_string(),
            split,
            rel: format!("{rel_prefix}/{name}"),
            path,
        });
    }
    Ok(())
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn check_decodable(path: &Path) -> Result<(), String> {
    image::ImageReader::open(path)
        .map_err(|e| e.to_string())?
        .with_guessed_format()
        .map_err(|e| e.to_string())?
        .decode()
        .map(|_| ())
        .map_err(|e| e.to_string())
}

/// Walks `root` and records one sample per decodable image.
///
/// Files that fail to decode are reported in [`ScanOutcome::warnings`]
/// instead of aborting the scan; the scan only fails when every candidate
/// file is unreadable or a class directory ends up with no images.
pub fn scan_dataset(root: &Path, layout: Layout) -> Result<ScanOutcome, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::NoSuchDirectory(root.to_path_buf()));
    }
    let root = util::absolutize(root).map_err(io_err(root))?;
    let mut class_names = BTreeSet::new();
    let mut candidates = Vec::new();

    match layout {
        Layout::SplitFirst => {
            for (split_name, split_dir, is_dir) in sorted_entries(&root)? {
                if !is_dir {
                    continue;
                }
                let split = Split::from_dir_name(&split_name).ok_or_else(|| {
                    DatasetError::UnknownSplitDir {
                        dir: split_dir.clone(),
                        name: split_name.clone(),
                    }
                })?;
                for (class, class_dir, is_dir) in sorted_entries(&split_dir)? {
                    if !is_dir {
                        continue;
                    }
                    class_names.insert(class.clone());
                    let prefix = format!("{split_name}/{class}");
                    collect_files(&class_dir, &class, split, &prefix, &mut candidates)?;
                }
            }
        }
        Layout::ClassFirst => {
            for (class, class_dir, is_dir) in sorted_entries(&root)? {
                if !is_dir {
                    continue;
                }
                class_names.insert(class.clone());
                collect_files(&class_dir, &class, Split::Train, &class, &mut candidates)?;
                for (split_name, split_dir, is_dir) in sorted_entries(&class_dir)? {
                    if !is_dir {
                        continue;
                    }
                    let split = Split::from_dir_name(&split_name).ok_or_else(|| {
                        DatasetError::UnknownSplitDir {
                            dir: split_dir.clone(),
                            name: split_name.clone(),
                        }
                    })?;
                    let prefix = format!("{class}/{split_name}");
                    collect_files(&split_dir, &class, split, &prefix, &mut candidates)?;
                }
            }
        }
    }

    if class_names.is_empty() {
        return Err(DatasetError::NoClasses(root));
    }

    let checks: Vec<Result<(), String>> = candidates
        .par_iter()
        .map(|c| {
            if has_image_extension(&c.path) {
                check_decodable(&c.path)
            } else {
                Err("not an image file extension".to_string())
            }
        })
        .collect();

    let classes = ClassLabel::from_names(class_names.iter().cloned());
    let by_name: BTreeMap<&str, &ClassLabel> =
        classes.iter().map(|c| (c.name.as_str(), c)).collect();

    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    for (cand, check) in candidates.iter().zip(checks) {
        match check {
            Ok(()) => samples.push(SampleRef {
                sample_id: cand.rel.clone(),
                path: cand.path.clone(),
                label: by_name[cand.class.as_str()].clone(),
                split: cand.split,
            }),
            Err(reason) => warnings.push(ScanWarning {
                path: cand.path.clone(),
                reason,
            }),
        }
    }

    if samples.is_empty() && !candidates.is_empty() {
        return Err(DatasetError::AllImagesUnreadable {
            count: candidates.len(),
        });
    }
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let manifest = DatasetManifest::new(classes, samples)?;
    if let Some(empty) = manifest
        .classes()
        .iter()
        .find(|c| manifest.counts().class_total(c.id) == 0)
    {
        return Err(DatasetError::EmptyClass {
            class: empty.name.clone(),
        });
    }
    Ok(ScanOutcome { manifest, warnings })
}

/// Re-tags every validation sample as train. Test samples are untouched.
pub fn merge_train_validation(m: &DatasetManifest) -> DatasetManifest {
    let samples: Vec<SampleRef> = m
        .samples
        .iter()
        .map(|s| SampleRef {
            split: if s.split == Split::Validation {
                Split::Train
            } else {
                s.split
            },
            ..s.clone()
        })
        .collect();
    let counts = CountTable::tally(m.classes.len(), &samples);
    DatasetManifest {
        classes: m.classes.clone(),
        samples,
        counts,
    }
}

/// Largest-remainder allocation of `n` items over the three splits. Ties in
/// the fractional remainder go to the earlier split.
pub fn allocate(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).filter(|&i| fractions[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order.into_iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Reassigns splits per class in the given proportions.
///
/// Within each class the samples are ordered by `sample_id`, shuffled with a
/// generator seeded from `seed`, then cut by [`allocate`]. The output is a
/// pure function of the sample set, the fractions and the seed.
pub fn stratified_split(
    samples: &[SampleRef],
    fractions: [f64; 3],
    seed: u64,
) -> Result<DatasetManifest, DatasetError> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(DatasetError::InvalidFractions(format!(
            "{fractions:?} contains a negative or non-finite value"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::InvalidFractions(format!(
            "{fractions:?} sums to {sum}, expected 1"
        )));
    }

    let mut classes: Vec<ClassLabel> = samples
        .iter()
        .map(|s| s.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    classes.sort_by_key(|c| c.id);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples.len());
    for class in &classes {
        let mut members: Vec<&SampleRef> =
            samples.iter().filter(|s| s.label == *class).collect();
        members.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        members.shuffle(&mut rng);
        let alloc = allocate(members.len(), fractions);
        if (0..3).any(|i| fractions[i] > 0.0 && alloc[i] == 0) {
            return Err(DatasetError::InsufficientClassSamples {
                class: class.name.clone(),
                available: members.len(),
            });
        }
        let mut cursor = members.into_iter();
        for split in Split::ALL {
            for s in cursor.by_ref().take(alloc[split.index()]) {
                out.push(SampleRef {
                    split,
                    ..s.clone()
                });
            }
        }
    }
    out.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    DatasetManifest::new(classes, out)
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    schema_version: u32,
    classes: Vec<String>,
    samples: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    sample_id: String,
    path: String,
    label: String,
    split: Split,
}

fn manifest_dir(path: &Path) -> Result<PathBuf, DatasetError> {
    let abs = util::absolutize(path).map_err(io_err(path))?;
    Ok(abs.parent().map(Path::to_path_buf).unwrap_or_default())
}

/// Serializes a manifest as JSON with sample paths relative to the
/// manifest's own directory.
pub fn manifest_to_json(m: &DatasetManifest, manifest_path: &Path) -> Result<String, DatasetError> {
    let base = manifest_dir(manifest_path)?;
    let samples = m
        .samples
        .iter()
        .map(|s| {
            let abs = util::absolutize(&s.path).map_err(io_err(&s.path))?;
            let rel = pathdiff::diff_paths(&abs, &base).unwrap_or(abs);
            Ok(ManifestEntry {
                sample_id: s.sample_id.clone(),
                path: rel.to_string_lossy().into_owned(),
                label: s.label.name.clone(),
                split: s.split,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let file = ManifestFile {
        schema_version: MANIFEST_SCHEMA_VERSION,
        classes: m.classes.iter().map(|c| c.name.clone()).collect(),
        samples,
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|source| DatasetError::Json {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    Ok(text)
}

pub fn write_manifest(m: &DatasetManifest, path: &Path) -> Result<(), DatasetError> {
    let text = manifest_to_json(m, path)?;
    util::write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file: ManifestFile = serde_json::from_str(&text).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if file.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(DatasetError::SchemaMismatch {
            found: file.schema_version,
            expected: MANIFEST_SCHEMA_VERSION,
        });
    }
    let base = manifest_dir(path)?;
    // class order in the file is authoritative for ids
    let classes: Vec<ClassLabel> = file
        .classes
        .into_iter()
        .enumerate()
        .map(|(id, name)| ClassLabel { id, name })
        .collect();
    let samples = file
        .samples
        .into_iter()
        .map(|e| {
            let label = classes
                .iter()
                .find(|c| c.name == e.label)
                .cloned()
                .ok_or_else(|| DatasetError::UnknownClass {
                    sample_id: e.sample_id.clone(),
                    name: e.label.clone(),
                })?;
            Ok(SampleRef {
                path: util::normalize_lexically(&base.join(&e.path)),
                sample_id: e.sample_id,
                label,
                split: e.split,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    DatasetManifest::new(classes, samples)
}

pub fn write_warnings(warnings: &[ScanWarning], path: &Path) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(warnings).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    util::write_atomic(path, text.as_bytes()).map_err(io_err(path))
}
