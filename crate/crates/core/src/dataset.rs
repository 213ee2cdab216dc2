//! Directory-per-class ingestion, trimming, stratified folds and training-set
//! inflation (originals plus their augmented variants).

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{load_image, save_image, standardize, RawImage};
use crate::scheme::{AugmentationScheme, SchemeKind};
use crate::seeding::{self, hash_str};

/// Number of cross-validation folds.
pub const FOLD_COUNT: usize = 4;

/// Class excluded by default when ingesting a Caltech101-style tree.
pub const DEFAULT_EXCLUDED_CLASS: &str = "BACKGROUND_Google";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Augmented { scheme: SchemeKind, variant: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: RawImage,
    pub label: usize,
    /// Path relative to the dataset root, `/`-separated. Augmented items
    /// keep the id of the original they came from.
    pub source_id: String,
    pub provenance: Provenance,
}

impl LabeledImage {
    pub fn is_original(&self) -> bool {
        self.provenance == Provenance::Original
    }

    /// Output file name: `<stem>.ppm` for originals,
    /// `<stem>__<scheme><variant>.ppm` for augmented items.
    pub fn file_name(&self) -> String {
        let base = self.source_id.rsplit('/').next().unwrap_or(&self.source_id);
        let stem = Path::new(base).file_stem().and_then(|s| s.to_str()).unwrap_or(base);
        match self.provenance {
            Provenance::Original => format!("{stem}.ppm"),
            Provenance::Augmented { scheme, variant } => format!("{stem}__{scheme}{variant}.ppm"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    classes: Vec<String>,
    items: Vec<LabeledImage>,
}

impl LabeledDataset {
    /// Sorts the class list and relabels items accordingly.
    pub fn new(classes: Vec<String>, items: Vec<LabeledImage>) -> Result<Self> {
        let mut sorted = classes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != classes.len() {
            return Err(Error::InvalidArgument("duplicate class names".into()));
        }
        let remap: Vec<usize> = classes.iter().map(|c| sorted.binary_search(c).unwrap()).collect();
        let items = items
            .into_iter()
            .map(|mut it| {
                if it.label >= remap.len() {
                    return Err(Error::InvalidArgument(format!("label {} out of range", it.label)));
                }
                it.label = remap[it.label];
                Ok(it)
            })
            .collect::<Result<_>>()?;
        Ok(Self { classes: sorted, items })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn items(&self) -> &[LabeledImage] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for it in &self.items {
            counts[it.label] += 1;
        }
        counts
    }

    fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.classes.len()];
        for (i, it) in self.items.iter().enumerate() {
            by_class[it.label].push(i);
        }
        by_class
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub excluded_classes: Vec<String>,
    /// Keep only the first N classes in lexicographic order.
    pub max_classes: Option<usize>,
    /// Keep only the first M files (path order) of each class.
    pub max_per_class: Option<usize>,
}

#[derive(Debug)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub error: Error,
}

#[derive(Debug)]
pub struct Ingested {
    pub dataset: LabeledDataset,
    pub skipped: Vec<SkippedFile>,
}

/// Loads `<root>/<class>/<file>` into a standardized dataset. Undecodable
/// files are skipped and reported.
pub fn ingest(root: impl AsRef<Path>, excluded_classes: &[String]) -> Result<Ingested> {
    ingest_with(root, &IngestOptions { excluded_classes: excluded_classes.to_vec(), ..Default::default() })
}

pub fn ingest_with(root: impl AsRef<Path>, options: &IngestOptions) -> Result<Ingested> {
    let root = root.as_ref();
    let mut classes = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_dir() && !name.starts_with('.') && !options.excluded_classes.contains(&name) {
            classes.push(name);
        }
    }
    classes.sort();
    if let Some(n) = options.max_classes {
        classes.truncate(n);
    }
    if classes.is_empty() {
        return Err(Error::EmptyDataset(format!("no class directories under {}", root.display())));
    }

    let mut files = Vec::new();
    for (label, class) in classes.iter().enumerate() {
        let dir = root.join(class);
        let mut names: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| !n.starts_with('.'))
            .collect();
        names.sort();
        if let Some(m) = options.max_per_class {
            names.truncate(m);
        }
        files.extend(names.into_iter().map(|n| (label, format!("{class}/{n}"))));
    }

    let decoded: Vec<(usize, String, Result<RawImage>)> = files
        .into_par_iter()
        .map(|(label, id)| {
            let img = load_image(root.join(&id)).map(|img| standardize(&img));
            (label, id, img)
        })
        .collect();

    let mut items = Vec::with_capacity(decoded.len());
    let mut skipped = Vec::new();
    for (label, source_id, img) in decoded {
        match img {
            Ok(image) => items.push(LabeledImage { image, label, source_id, provenance: Provenance::Original }),
            Err(error) => {
                log::warn!("skipping {source_id}: {error}");
                skipped.push(SkippedFile { path: root.join(&source_id), error });
            }
        }
    }
    if items.is_empty() {
        return Err(Error::EmptyDataset(format!("no decodable images under {}", root.display())));
    }
    Ok(Ingested { dataset: LabeledDataset::new(classes, items)?, skipped })
}

/// Keeps the largest multiple of `k` items per class, dropping a seeded
/// random subset of the rest. Classes with fewer than `k` items are removed
/// and labels re-indexed.
pub fn trim_to_multiple(ds: &LabeledDataset, k: usize, seed: u64) -> Result<LabeledDataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let mut classes = Vec::new();
    let mut items = Vec::new();
    for (label, mut indices) in ds.indices_by_class().into_iter().enumerate() {
        let name = &ds.classes[label];
        let keep = indices.len() / k * k;
        if keep == 0 {
            log::warn!("dropping class {name}: {} items < {k}", indices.len());
            continue;
        }
        if keep < indices.len() {
            seeding::shuffle(&mut indices, &mut seeding::stream(seed, &[hash_str("trim"), hash_str(name)]));
            indices.truncate(keep);
            indices.sort_unstable();
        }
        let new_label = classes.len();
        classes.push(name.clone());
        items.extend(indices.into_iter().map(|i| LabeledImage { label: new_label, ..ds.items[i].clone() }));
    }
    if classes.is_empty() {
        return Err(Error::EmptyDataset(format!("every class has fewer than {k} items")));
    }
    // keep the dataset's original item order
    items.sort_by(|a, b| a.label.cmp(&b.label).then_with(|| a.source_id.cmp(&b.source_id)));
    LabeledDataset::new(classes, items)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    fold_count: usize,
    /// Fold of each dataset item, by item index.
    assignments: Vec<usize>,
}

impl FoldSplit {
    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    /// source_id -> fold index.
    pub fn manifest(&self, ds: &LabeledDataset) -> BTreeMap<String, usize> {
        ds.items.iter().zip(&self.assignments).map(|(it, &f)| (it.source_id.clone(), f)).collect()
    }

    pub fn write_manifest(&self, ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&self.manifest(ds)).expect("string map serializes");
        std::fs::write(path, json + "\n").map_err(|source| Error::Io { path: path.into(), source })
    }
}

/// Stratified [`FOLD_COUNT`]-fold split.
pub fn make_folds(ds: &LabeledDataset, seed: u64) -> Result<FoldSplit> {
    make_k_folds(ds, FOLD_COUNT, seed)
}

/// Shuffles each class with the seed and deals it round-robin into `k`
/// folds. Every class size must be divisible by `k`.
pub fn make_k_folds(ds: &LabeledDataset, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if let Some(it) = ds.items.iter().find(|it| !it.is_original()) {
        return Err(Error::InvalidArgument(format!("augmented item {} cannot be assigned a fold", it.source_id)));
    }
    let mut assignments = vec![usize::MAX; ds.items.len()];
    for (label, mut indices) in ds.indices_by_class().into_iter().enumerate() {
        let name = &ds.classes[label];
        if indices.len() % k != 0 {
            return Err(Error::NotTrimmed { class: name.clone(), count: indices.len(), k });
        }
        seeding::shuffle(&mut indices, &mut seeding::stream(seed, &[hash_str("folds"), hash_str(name)]));
        for (n, i) in indices.into_iter().enumerate() {
            assignments[i] = n % k;
        }
    }
    Ok(FoldSplit { fold_count: k, assignments })
}

/// Builds augmented variant `variant` of an original item. The RNG stream
/// depends only on (seed, source_id, variant), so eager and lazy inflation
/// agree.
pub fn augment_item(item: &LabeledImage, scheme: &AugmentationScheme, variant: usize, seed: u64) -> Result<LabeledImage> {
    let mut rng = seeding::stream(seed, &[hash_str("augment"), hash_str(&item.source_id), variant as u64]);
    Ok(LabeledImage {
        image: scheme.variant(&item.image, variant, &mut rng)?,
        label: item.label,
        source_id: item.source_id.clone(),
        provenance: Provenance::Augmented { scheme: scheme.kind(), variant },
    })
}

/// Returns every original followed by its augmented variants.
pub fn inflate(training_items: &[LabeledImage], scheme: &AugmentationScheme, seed: u64) -> Result<Vec<LabeledImage>> {
    if let Some(it) = training_items.iter().find(|it| !it.is_original()) {
        return Err(Error::InvalidArgument(format!("{} is already augmented", it.source_id)));
    }
    let groups: Vec<Vec<LabeledImage>> = training_items
        .par_iter()
        .map(|item| {
            let mut group = Vec::with_capacity(1 + scheme.variant_count());
            group.push(item.clone());
            for v in 0..scheme.variant_count() {
                group.push(augment_item(item, scheme, v, seed)?);
            }
            Ok(group)
        })
        .collect::<Result<_>>()?;
    Ok(groups.into_iter().flatten().collect())
}

/// Random access to labeled training images.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sample(&self, index: usize) -> Result<(Cow<'_, RawImage>, usize)>;
}

impl SampleSource for [LabeledImage] {
    fn len(&self) -> usize {
        <[LabeledImage]>::len(self)
    }

    fn sample(&self, index: usize) -> Result<(Cow<'_, RawImage>, usize)> {
        let it = &self[index];
        Ok((Cow::Borrowed(&it.image), it.label))
    }
}

impl SampleSource for Vec<LabeledImage> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn sample(&self, index: usize) -> Result<(Cow<'_, RawImage>, usize)> {
        self.as_slice().sample(index)
    }
}

/// Training set S' = S u T materialized on demand. Index order matches
/// [`inflate`].
pub struct InflatedView<'a> {
    originals: Vec<&'a LabeledImage>,
    scheme: &'a AugmentationScheme,
    seed: u64,
}

impl<'a> InflatedView<'a> {
    pub fn new(originals: Vec<&'a LabeledImage>, scheme: &'a AugmentationScheme, seed: u64) -> Self {
        Self { originals, scheme, seed }
    }

    pub fn item(&self, index: usize) -> Result<LabeledImage> {
        let per = 1 + self.scheme.variant_count();
        let parent = self.originals[index / per];
        match index % per {
            0 => Ok(parent.clone()),
            v => augment_item(parent, self.scheme, v - 1, self.seed),
        }
    }
}

impl SampleSource for InflatedView<'_> {
    fn len(&self) -> usize {
        self.originals.len() * (1 + self.scheme.variant_count())
    }

    fn sample(&self, index: usize) -> Result<(Cow<'_, RawImage>, usize)> {
        let per = 1 + self.scheme.variant_count();
        let parent = self.originals[index / per];
        match index % per {
            0 => Ok((Cow::Borrowed(&parent.image), parent.label)),
            v => Ok((Cow::Owned(augment_item(parent, self.scheme, v - 1, self.seed)?.image), parent.label)),
        }
    }
}

/// Writes items to `<out>/<class>/<file_name>` and returns per-class counts.
pub fn write_items(items: &[LabeledImage], classes: &[String], out: impl AsRef<Path>) -> Result<BTreeMap<String, usize>> {
    let out = out.as_ref();
    let mut counts = BTreeMap::new();
    for it in items {
        let class = &classes[it.label];
        let dir = out.join(class);
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        save_image(&it.image, dir.join(it.file_name()))?;
        *counts.entry(class.clone()).or_insert(0) += 1;
    }
    Ok(counts)
}
