//! Manifest ingestion, category-disjoint splitting, scrambled instances, annotation
//! aggregation and the line-delimited JSON record formats.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agreement::AnnotationSeries;
use crate::decoding::{MatrixMode, PairwiseMatrix};
use crate::error::{Error, RecordError, Result};
use crate::metrics::CompletionResult;
use crate::model::{Manual, Modality, Permutation, ReferenceSet, ScrambledInstance};
use crate::plans::rng_from_seed;
use crate::scalar::Real;
use crate::synthetic::random_permutation;

/// Records keyed by 1-based line number, plus the lines that failed to parse.
pub type Parsed<T> = (Vec<(usize, T)>, Vec<RecordError>);

/// Parses one JSON value per non-blank line, collecting every failure with its line number.
pub fn parse_jsonl<T, R>(reader: R) -> Result<Parsed<T>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(v) => records.push((line_no, v)),
            Err(e) => errors.push(RecordError {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    Ok((records, errors))
}

/// Reads a line-delimited JSON file; any malformed line fails the whole read.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (records, errors) = parse_jsonl(BufReader::new(file))?;
    if !errors.is_empty() {
        return Err(Error::Records(errors));
    }
    Ok(records.into_iter().map(|(_, v)| v).collect())
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize to JSON"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_jsonl(records).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Taxonomy {
    pub name: String,
    #[serde(default)]
    pub children: Vec<Taxonomy>,
}

impl Taxonomy {
    /// Tree containing every given root-to-leaf path, children sorted by name.
    pub fn from_paths<'a>(paths: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut root = Taxonomy {
            name: "root".into(),
            children: Vec::new(),
        };
        for path in paths {
            let mut node = &mut root;
            for name in path {
                let idx = match node.children.binary_search_by(|c| c.name.as_str().cmp(name)) {
                    Ok(i) => i,
                    Err(i) => {
                        node.children.insert(
                            i,
                            Taxonomy {
                                name: name.clone(),
                                children: Vec::new(),
                            },
                        );
                        i
                    }
                };
                node = &mut node.children[idx];
            }
        }
        root
    }

    pub fn resolves(&self, path: &[String]) -> bool {
        let mut node = self;
        for name in path {
            match node.children.iter().find(|c| &c.name == name) {
                Some(c) => node = c,
                None => return false,
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    /// Sorted by `manual_id`.
    pub manuals: Vec<Manual>,
    pub taxonomy: Taxonomy,
}

impl Manifest {
    /// Validates every manual, rejects duplicate ids and sorts by id. The taxonomy is built
    /// from the manuals' category paths.
    pub fn new(mut manuals: Vec<Manual>) -> Result<Self> {
        let mut seen = HashSet::new();
        for m in &manuals {
            m.validate()?;
            if !seen.insert(m.manual_id.as_str()) {
                return Err(Error::Duplicate(m.manual_id.clone()));
            }
        }
        manuals.sort_by(|a, b| a.manual_id.cmp(&b.manual_id));
        let taxonomy = Taxonomy::from_paths(manuals.iter().map(|m| m.category_path.as_slice()));
        Ok(Self { manuals, taxonomy })
    }

    pub fn with_taxonomy(mut self, taxonomy: Taxonomy) -> Self {
        self.taxonomy = taxonomy;
        self
    }

    /// Manuals whose category path is not present in the taxonomy.
    pub fn unresolved(&self) -> Vec<&str> {
        self.manuals
            .iter()
            .filter(|m| !self.taxonomy.resolves(&m.category_path))
            .map(|m| m.manual_id.as_str())
            .collect()
    }

    pub fn get(&self, manual_id: &str) -> Option<&Manual> {
        self.manuals
            .binary_search_by(|m| m.manual_id.as_str().cmp(manual_id))
            .ok()
            .map(|k| &self.manuals[k])
    }

    pub fn to_jsonl(&self) -> String {
        to_jsonl(&self.manuals)
    }
}

/// Parses and validates manifest records; every bad line is reported with its number.
pub fn parse_manifest<R: BufRead>(reader: R) -> Result<Manifest> {
    let (records, mut errors) = parse_jsonl::<Manual, _>(reader)?;
    let mut seen = HashSet::new();
    let mut manuals = Vec::with_capacity(records.len());
    for (line, manual) in records {
        if let Err(e) = manual.validate() {
            errors.push(RecordError {
                line,
                message: e.to_string(),
            });
            continue;
        }
        if !seen.insert(manual.manual_id.clone()) {
            errors.push(RecordError {
                line,
                message: Error::Duplicate(manual.manual_id.clone()).to_string(),
            });
            continue;
        }
        manuals.push(manual);
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line);
        return Err(Error::Records(errors));
    }
    Manifest::new(manuals)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Category depth that must not be shared between splits.
    pub level: usize,
    /// `(train, dev, test)`.
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            level: 3,
            fractions: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.level == 0 {
            return Err(Error::InvalidParameter("split level must be at least 1".into()));
        }
        if self.fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
            return Err(Error::InvalidParameter(format!(
                "fractions {:?} outside [0, 1]",
                self.fractions
            )));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: BTreeSet<String>,
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl Split {
    pub fn parts(&self) -> [&BTreeSet<String>; 3] {
        [&self.train, &self.dev, &self.test]
    }
}

/// Category key at `level`; shallower paths use their deepest category.
pub fn category_key(path: &[String], level: usize) -> String {
    path[..path.len().min(level)].join("/")
}

/// Assigns whole level-`level` categories to train/dev/test.
///
/// Categories are shuffled by seed, stably sorted largest first, and each goes to the split
/// (among those with a positive fraction) furthest below its target size.
pub fn split_by_category(manifest: &Manifest, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut groups: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for m in &manifest.manuals {
        groups
            .entry(category_key(&m.category_path, spec.level))
            .or_default()
            .push(&m.manual_id);
    }
    let total = manifest.manuals.len();
    let mut split = Split::default();
    let max_fraction = spec.fractions.iter().cloned().fold(0.0, f64::max);
    for (key, ids) in &groups {
        if total > 0 && ids.len() as f64 > max_fraction * total as f64 {
            let msg = format!(
                "category `{key}` holds {} of {total} manuals, more than the largest split fraction",
                ids.len()
            );
            log::warn!("{msg}");
            split.warnings.push(msg);
        }
    }

    let mut keys: Vec<&String> = groups.keys().collect();
    keys.shuffle(&mut rng_from_seed(spec.seed));
    keys.sort_by_key(|k| std::cmp::Reverse(groups[*k].len()));

    let targets = spec.fractions.map(|f| f * total as f64);
    let mut sizes = [0usize; 3];
    for key in keys {
        let ids = &groups[key];
        let part = (0..3)
            .filter(|&i| spec.fractions[i] > 0.0)
            .max_by(|&a, &b| {
                let da = targets[a] - sizes[a] as f64;
                let db = targets[b] - sizes[b] as f64;
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
            })
            .expect("fractions sum to 1");
        sizes[part] += ids.len();
        let dest = match part {
            0 => &mut split.train,
            1 => &mut split.dev,
            _ => &mut split.test,
        };
        dest.extend(ids.iter().map(|s| s.to_string()));
    }
    Ok(split)
}

/// Scrambles the first `max_len` steps of `manual` with a uniform permutation.
pub fn scramble_instance(
    manual: &Manual,
    modality: Modality,
    seed: u64,
    exclude_identity: bool,
    max_len: usize,
) -> Result<ScrambledInstance> {
    let n = manual.steps.len().min(max_len);
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "manual `{}` yields {n} step(s) to scramble; at least 2 are required",
            manual.manual_id
        )));
    }
    let mut rng = rng_from_seed(seed);
    let scramble = loop {
        let p = random_permutation(n, &mut rng);
        if !(exclude_identity && p.is_identity()) {
            break p;
        }
    };
    Ok(ScrambledInstance {
        manual_id: manual.manual_id.clone(),
        modality,
        scramble,
        seed,
    })
}

/// Admits each alternative submitted by a strict majority of the workers who submitted any
/// alternative. Admitted orders are listed by descending support, then by mapping.
pub fn majority_vote_references(original: &Permutation, series: &[AnnotationSeries]) -> Result<ReferenceSet> {
    let mut support: BTreeMap<&Permutation, usize> = BTreeMap::new();
    let mut contributors = 0;
    for s in series {
        let alts: BTreeSet<&Permutation> = s.orders().iter().filter(|o| *o != original).collect();
        if alts.is_empty() {
            continue;
        }
        contributors += 1;
        for o in alts {
            *support.entry(o).or_default() += 1;
        }
    }
    let mut admitted: Vec<(&Permutation, usize)> = support.into_iter().filter(|&(_, c)| 2 * c > contributors).collect();
    admitted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ReferenceSet::new(original.clone(), admitted.into_iter().map(|(o, _)| o.clone()).collect())
}

/// Subset bookkeeping for multi-reference reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStats {
    pub instances: usize,
    /// Instances with at least one admitted alternative.
    pub multi: usize,
    pub mean_references: f64,
}

pub fn reference_stats<'a>(sets: impl IntoIterator<Item = &'a ReferenceSet>) -> ReferenceStats {
    let (mut instances, mut multi, mut refs) = (0, 0, 0);
    for s in sets {
        instances += 1;
        refs += s.len();
        if s.has_alternatives() {
            multi += 1;
        }
    }
    ReferenceStats {
        instances,
        multi,
        mean_references: if instances == 0 {
            0.0
        } else {
            refs as f64 / instances as f64
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalityHelp {
    Both,
    TextOnly,
    ImageOnly,
    Neither,
}

impl ModalityHelp {
    pub const ALL: [ModalityHelp; 4] = [Self::Both, Self::TextOnly, Self::ImageOnly, Self::Neither];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Both => "both",
            Self::TextOnly => "text_only",
            Self::ImageOnly => "image_only",
            Self::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerResponse {
    pub worker_id: String,
    pub instance_id: String,
    pub modality: Modality,
    pub submitted_order: Permutation,
    /// 1 to 5.
    pub confidence: u8,
    pub modality_help: ModalityHelp,
}

impl WorkerResponse {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.confidence) {
            return Err(Error::InvalidParameter(format!(
                "confidence {} outside 1..=5 (worker `{}`)",
                self.confidence, self.worker_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyStats {
    pub responses: usize,
    /// Percentage per answer, in `ModalityHelp::ALL` order.
    pub modality_help: BTreeMap<ModalityHelp, f64>,
    /// Percentage per confidence level 1..=5.
    pub confidence: BTreeMap<u8, f64>,
}

pub fn survey_stats(responses: &[WorkerResponse]) -> Result<SurveyStats> {
    if responses.is_empty() {
        return Err(Error::EmptyInput("no survey responses"));
    }
    let total = responses.len() as f64;
    let mut help: BTreeMap<ModalityHelp, usize> = ModalityHelp::ALL.iter().map(|&h| (h, 0)).collect();
    let mut conf: BTreeMap<u8, usize> = (1..=5).map(|c| (c, 0)).collect();
    for r in responses {
        r.validate()?;
        *help.get_mut(&r.modality_help).expect("all answers present") += 1;
        *conf.get_mut(&r.confidence).expect("validated range") += 1;
    }
    let pct = |c: usize| 100.0 * c as f64 / total;
    Ok(SurveyStats {
        responses: responses.len(),
        modality_help: help.into_iter().map(|(k, c)| (k, pct(c))).collect(),
        confidence: conf.into_iter().map(|(k, c)| (k, pct(c))).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub predicted: Permutation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub instance_id: String,
    pub original: Permutation,
    #[serde(default)]
    pub alternatives: Vec<Permutation>,
}

impl ReferenceRecord {
    pub fn to_set(&self) -> Result<ReferenceSet> {
        ReferenceSet::new(self.original.clone(), self.alternatives.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub instance_id: String,
    pub n: usize,
    pub mode: MatrixMode,
    /// Row-major, `n * n` entries.
    pub p: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_matrix<T: Real>(instance_id: impl Into<String>, m: &PairwiseMatrix<T>) -> Self {
        Self {
            instance_id: instance_id.into(),
            n: m.n(),
            mode: m.mode(),
            p: m.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    pub fn to_matrix<T: Real>(&self) -> Result<PairwiseMatrix<T>> {
        PairwiseMatrix::new(
            self.n,
            self.p.iter().map(|&v| T::from_f64_lossy(v)).collect(),
            self.mode,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: String,
    #[serde(flatten)]
    pub instance: ScrambledInstance,
}

impl From<ScrambledInstance> for InstanceRecord {
    fn from(instance: ScrambledInstance) -> Self {
        Self {
            instance_id: instance.instance_id(),
            instance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub instance_id: String,
    #[serde(flatten)]
    pub result: CompletionResult,
}
