//! Labeled image collections, on-disk layouts and train/test splits.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{read_pgm, resize_nearest, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: usize,
    pub image: GrayImage,
}

/// Samples with contiguous class labels `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, class_names: Vec<String>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::invalid("dataset has no classes"));
        }
        if let Some(s) = samples.iter().find(|s| s.label >= class_names.len()) {
            return Err(Error::invalid(format!(
                "label {} out of range for {} classes",
                s.label,
                class_names.len()
            )));
        }
        Ok(Dataset {
            samples,
            class_names,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Common image size, if every sample has the same one.
    pub fn image_dimensions(&self) -> Option<(usize, usize)> {
        let first = self.samples.first()?.image.dimensions();
        self.samples
            .iter()
            .all(|s| s.image.dimensions() == first)
            .then_some(first)
    }

    /// Samples reordered round-robin across classes: the first image of every
    /// class, then the second, and so on. Every prefix is close to balanced.
    pub fn interleaved(&self) -> Vec<&Sample> {
        let mut per_class: Vec<Vec<&Sample>> = vec![Vec::new(); self.num_classes()];
        for s in &self.samples {
            per_class[s.label].push(s);
        }
        let rounds = per_class.iter().map(Vec::len).max().unwrap_or(0);
        (0..rounds)
            .flat_map(|r| per_class.iter().filter_map(move |c| c.get(r).copied()))
            .collect()
    }
}

fn numbered(name: &str, prefix: &str, suffix: &str) -> Option<usize> {
    name.strip_prefix(prefix)?
        .strip_suffix(suffix)?
        .parse()
        .ok()
        .filter(|&k| k > 0)
}

fn list_dir(path: &Path) -> Result<Vec<(String, PathBuf, bool)>> {
    let entries = std::fs::read_dir(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::ingestion(path, e.to_string()))?;
        let p = entry.path();
        let is_dir = p.is_dir();
        out.push((entry.file_name().to_string_lossy().into_owned(), p, is_dir));
    }
    Ok(out)
}

/// Loads the ORL layout: `s1 … sK`, each holding `1.pgm … J.pgm`.
///
/// `K` is the number of `s<k>` directories and `J` the largest image number
/// found; every subject must hold every image `1..=J`, all with the same
/// dimensions.
pub fn load_orl(path: impl AsRef<Path>) -> Result<Dataset> {
    let root = path.as_ref();
    let subjects: Vec<usize> = list_dir(root)?
        .into_iter()
        .filter(|(_, _, d)| *d)
        .filter_map(|(name, _, _)| numbered(&name, "s", ""))
        .collect();
    let k = subjects.iter().copied().max().unwrap_or(0);
    if k == 0 {
        return Err(Error::ingestion(root, "no subject directories s1..sK"));
    }
    for s in 1..=k {
        if !subjects.contains(&s) {
            return Err(Error::ingestion(
                root.join(format!("s{s}")),
                "missing subject directory",
            ));
        }
    }
    let mut j = 0;
    for s in 1..=k {
        let dir = root.join(format!("s{s}"));
        for (name, _, is_dir) in list_dir(&dir)? {
            if let (false, Some(n)) = (is_dir, numbered(&name, "", ".pgm")) {
                j = j.max(n);
            }
        }
    }
    if j == 0 {
        return Err(Error::ingestion(root, "no numbered .pgm images"));
    }

    let mut samples = Vec::with_capacity(k * j);
    let mut dims = None;
    for s in 1..=k {
        for n in 1..=j {
            let file = root.join(format!("s{s}")).join(format!("{n}.pgm"));
            if !file.is_file() {
                return Err(Error::ingestion(&file, "missing image"));
            }
            let image = read_pgm(&file)?;
            match dims {
                None => dims = Some(image.dimensions()),
                Some(d) if d != image.dimensions() => {
                    return Err(Error::ingestion(
                        &file,
                        format!(
                            "image is {}x{}, expected {}x{}",
                            image.width(),
                            image.height(),
                            d.0,
                            d.1
                        ),
                    ))
                }
                _ => {}
            }
            samples.push(Sample {
                label: s - 1,
                image,
            });
        }
    }
    let names = (1..=k).map(|s| format!("s{s}")).collect();
    Dataset::new(samples, names)
}

/// Loads `<subject>/<image>.pgm` with subjects in lexicographic order and
/// images resized (nearest neighbour) to `size`.
pub fn load_generic(path: impl AsRef<Path>, size: (usize, usize)) -> Result<Dataset> {
    let root = path.as_ref();
    let mut subjects: Vec<(String, PathBuf)> = list_dir(root)?
        .into_iter()
        .filter(|(_, _, d)| *d)
        .map(|(n, p, _)| (n, p))
        .collect();
    subjects.sort();
    if subjects.len() < 2 {
        return Err(Error::ingestion(
            root,
            "need at least 2 subject directories",
        ));
    }
    let mut samples = Vec::new();
    let mut names = Vec::with_capacity(subjects.len());
    for (label, (name, dir)) in subjects.into_iter().enumerate() {
        let mut files: Vec<(String, PathBuf)> = list_dir(&dir)?
            .into_iter()
            .filter(|(n, _, d)| !d && n.to_ascii_lowercase().ends_with(".pgm"))
            .map(|(n, p, _)| (n, p))
            .collect();
        files.sort();
        if files.len() < 2 {
            return Err(Error::ingestion(
                &dir,
                "need at least 2 .pgm images per subject",
            ));
        }
        for (_, file) in files {
            let image = read_pgm(&file)?;
            let image = if image.dimensions() == size {
                image
            } else {
                resize_nearest(&image, size.0, size.1)?
            };
            samples.push(Sample { label, image });
        }
        names.push(name);
    }
    Dataset::new(samples, names)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// The first `k` images of every class, in dataset order.
    FirstK,
    /// `k` images per class chosen by a seeded shuffle.
    SeededRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub per_class_train: usize,
    pub seed: u64,
    pub mode: SplitMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            per_class_train: 5,
            seed: 0,
            mode: SplitMode::FirstK,
        }
    }
}

/// Partitions every class into `per_class_train` training samples and the
/// rest for testing. Both halves keep dataset order.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let counts = ds.class_counts();
    let smallest = counts.iter().copied().min().unwrap_or(0);
    if spec.per_class_train == 0 || spec.per_class_train >= smallest {
        return Err(Error::InvalidSplit(format!(
            "{} training images per class needs every class to hold more, smallest has {smallest}",
            spec.per_class_train
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, s) in ds.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut in_train = vec![false; ds.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for idx in &mut by_class {
        if spec.mode == SplitMode::SeededRandom {
            idx.shuffle(&mut rng);
        }
        for &i in idx.iter().take(spec.per_class_train) {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, t) in ds.samples.iter().zip(in_train) {
        if t { &mut train } else { &mut test }.push(s.clone());
    }
    Ok((
        Dataset::new(train, ds.class_names.clone())?,
        Dataset::new(test, ds.class_names.clone())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(classes: usize, per: usize) -> Dataset {
        let samples = (0..classes)
            .flat_map(|c| {
                (0..per).map(move |j| Sample {
                    label: c,
                    image: GrayImage::filled(2, 2, (c * 16 + j) as u8).unwrap(),
                })
            })
            .collect();
        Dataset::new(samples, (0..classes).map(|c| c.to_string()).collect()).unwrap()
    }

    #[test]
    fn first_k_split() {
        let ds = toy(3, 4);
        let (train, test) = split(
            &ds,
            &SplitSpec {
                per_class_train: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(train.class_counts(), vec![3, 3, 3]);
        assert_eq!(test.class_counts(), vec![1, 1, 1]);
        assert_eq!(test.samples()[0].image.get(0, 0), 3);
    }

    #[test]
    fn seeded_split_is_deterministic_and_disjoint() {
        let ds = toy(4, 6);
        let spec = SplitSpec {
            per_class_train: 2,
            seed: 9,
            mode: SplitMode::SeededRandom,
        };
        let (a, b) = split(&ds, &spec).unwrap();
        let (a2, b2) = split(&ds, &spec).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        let mut all: Vec<u8> = a
            .samples()
            .iter()
            .chain(b.samples())
            .map(|s| s.image.get(0, 0))
            .collect();
        all.sort();
        let mut want: Vec<u8> = ds.samples().iter().map(|s| s.image.get(0, 0)).collect();
        want.sort();
        assert_eq!(all, want);
    }

    #[test]
    fn infeasible_split() {
        let ds = toy(2, 3);
        for k in [0, 3, 4] {
            let spec = SplitSpec {
                per_class_train: k,
                ..Default::default()
            };
            assert!(matches!(split(&ds, &spec), Err(Error::InvalidSplit(_))));
        }
    }

    #[test]
    fn interleaving() {
        let ds = toy(2, 3);
        let labels: Vec<usize> = ds.interleaved().iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![0, 1, 0, 1, 0, 1]);
    }
}
