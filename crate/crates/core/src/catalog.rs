//! Dataset descriptions on disk, and a cache of prepared cleaning tasks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::distance::ImpactAggregation;
use crate::engine::{CleaningTask, DashboardSpec, PreparedTask};
use crate::error::{Error, Result};
use crate::pairs::{BlockingRule, FeatureSpec};
use crate::relation::{load_ground_truth, load_relation, Column, GroundTruth, LoadOptions, Relation};
use crate::synth;
use crate::view::ViewSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Source {
    /// Delimited files, relative to the data directory.
    Files {
        data: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matches: Option<PathBuf>,
        #[serde(default = "comma")]
        delimiter: char,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key_column: Option<String>,
    },
    Synthetic {
        n: usize,
        dup_rate: f64,
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn comma() -> char {
    ','
}

/// Published sizes; a mismatch is reported, not fatal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub rows: usize,
    #[serde(default)]
    pub matches: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub source: Source,
    /// Ignored for synthetic sources, which have a fixed schema.
    #[serde(default)]
    pub schema: Vec<Column>,
    pub features: FeatureSpec,
    #[serde(default)]
    pub blocking: BlockingRule,
    pub views: Vec<ViewSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

/// A loaded dataset, shareable across runs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub relation: Arc<Relation>,
    pub truth: Option<Arc<GroundTruth>>,
}

impl DatasetConfig {
    pub fn from_file(path: &Path) -> Result<DatasetConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: DatasetConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.blocking.validate()?;
        if self.features.is_empty() {
            return Err(Error::Config(format!("dataset `{}` declares no features", self.name)));
        }
        if let Source::Files { .. } = self.source {
            if self.schema.is_empty() {
                return Err(Error::Config(format!("dataset `{}` declares no schema", self.name)));
            }
        }
        let schema = self.effective_schema();
        for v in &self.views {
            v.compile(&schema)?;
        }
        Ok(())
    }

    pub fn effective_schema(&self) -> Vec<Column> {
        match self.source {
            Source::Synthetic { .. } => synth::schema(),
            Source::Files { .. } => self.schema.clone(),
        }
    }

    /// Files the dataset needs under `data_dir`.
    pub fn required_files(&self, data_dir: &Path) -> Vec<PathBuf> {
        match &self.source {
            Source::Files { data, matches, .. } => std::iter::once(data)
                .chain(matches)
                .map(|p| data_dir.join(p))
                .collect(),
            Source::Synthetic { .. } => Vec::new(),
        }
    }

    pub fn view(&self, name: &str) -> Result<&ViewSpec> {
        self.views
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::NotFound {
                kind: "view",
                name: format!("{}/{name}", self.name),
            })
    }

    pub fn dashboard(&self, names: &[String], aggregation: ImpactAggregation) -> Result<DashboardSpec> {
        if names.is_empty() {
            return Err(Error::Config("no views requested".into()));
        }
        Ok(DashboardSpec {
            views: names.iter().map(|n| self.view(n).cloned()).collect::<Result<_>>()?,
            aggregation,
        })
    }

    pub fn open(&self, data_dir: &Path) -> Result<Dataset> {
        let (relation, truth) = match &self.source {
            Source::Synthetic {
                n,
                dup_rate,
                noise,
                seed,
            } => {
                let (rel, truth) = synth::generate_synthetic(*n, *dup_rate, *noise, *seed)?;
                (rel, Some(truth))
            }
            Source::Files {
                data,
                matches,
                delimiter,
                key_column,
            } => {
                let missing: Vec<PathBuf> = self
                    .required_files(data_dir)
                    .into_iter()
                    .filter(|p| !p.is_file())
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::MissingData {
                        dataset: self.name.clone(),
                        missing,
                    });
                }
                if !delimiter.is_ascii() {
                    return Err(Error::Config(format!("delimiter {delimiter:?} is not ASCII")));
                }
                let opts = LoadOptions {
                    delimiter: *delimiter as u8,
                    key_column: key_column.clone(),
                };
                let rel = load_relation(&data_dir.join(data), &self.schema, &opts)?;
                let truth = matches
                    .as_ref()
                    .map(|m| load_ground_truth(&data_dir.join(m), &rel, &opts))
                    .transpose()?;
                (rel, truth)
            }
        };
        Ok(Dataset {
            config: self.clone(),
            relation: Arc::new(relation),
            truth: truth.map(Arc::new),
        })
    }
}

impl Dataset {
    pub fn task(&self, dashboard: DashboardSpec) -> CleaningTask {
        CleaningTask {
            relation: self.relation.clone(),
            dashboard,
            features: self.config.features.clone(),
            blocking: self.config.blocking.clone(),
            truth: self.truth.clone(),
        }
    }

    /// Differences from the published sizes, if any.
    pub fn size_warnings(&self) -> Vec<String> {
        let Some(exp) = self.config.expected else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if exp.rows != self.relation.len() {
            out.push(format!(
                "{}: expected {} rows, loaded {}",
                self.config.name,
                exp.rows,
                self.relation.len()
            ));
        }
        if let (Some(m), Some(t)) = (exp.matches, &self.truth) {
            if m != t.len() {
                out.push(format!("{}: expected {m} matches, loaded {}", self.config.name, t.len()));
            }
        }
        out
    }
}

/// Dataset configs found in a directory, keyed by name.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    configs: BTreeMap<String, DatasetConfig>,
}

impl Catalog {
    /// Reads every `*.json` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Catalog> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut catalog = Catalog::default();
        for p in paths {
            catalog.insert(DatasetConfig::from_file(&p)?)?;
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, cfg: DatasetConfig) -> Result<()> {
        if self.configs.contains_key(&cfg.name) {
            return Err(Error::Config(format!("dataset `{}` defined twice", cfg.name)));
        }
        self.configs.insert(cfg.name.clone(), cfg);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&DatasetConfig> {
        self.configs.get(name).ok_or_else(|| Error::NotFound {
            kind: "dataset",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.configs.keys().map(String::as_str)
    }
}

/// Loads datasets and prepares tasks at most once per key.
#[derive(Debug)]
pub struct TaskCache {
    catalog: Catalog,
    data_dir: PathBuf,
    datasets: Mutex<BTreeMap<String, Arc<Dataset>>>,
    tasks: Mutex<BTreeMap<String, Arc<PreparedTask>>>,
}

impl TaskCache {
    pub fn new(catalog: Catalog, data_dir: PathBuf) -> TaskCache {
        TaskCache {
            catalog,
            data_dir,
            datasets: Mutex::new(BTreeMap::new()),
            tasks: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn dataset(&self, name: &str) -> Result<Arc<Dataset>> {
        if let Some(d) = self.datasets.lock().expect("dataset cache poisoned").get(name) {
            return Ok(d.clone());
        }
        let d = Arc::new(self.catalog.get(name)?.open(&self.data_dir)?);
        Ok(self
            .datasets
            .lock()
            .expect("dataset cache poisoned")
            .entry(name.to_string())
            .or_insert(d)
            .clone())
    }

    pub fn prepared(
        &self,
        dataset: &str,
        views: &[String],
        aggregation: ImpactAggregation,
    ) -> Result<Arc<PreparedTask>> {
        let key = format!("{dataset}\u{1f}{}\u{1f}{aggregation:?}", views.join("\u{1f}"));
        if let Some(t) = self.tasks.lock().expect("task cache poisoned").get(&key) {
            return Ok(t.clone());
        }
        let d = self.dataset(dataset)?;
        let dash = d.config.dashboard(views, aggregation)?;
        // Prepared outside the lock; a racing duplicate is simply dropped.
        let t = Arc::new(PreparedTask::new(d.task(dash))?);
        Ok(self
            .tasks
            .lock()
            .expect("task cache poisoned")
            .entry(key)
            .or_insert(t)
            .clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_config() -> DatasetConfig {
        DatasetConfig {
            name: "synthetic".into(),
            source: Source::Synthetic {
                n: 60,
                dup_rate: 0.2,
                noise: 0.1,
                seed: 1,
            },
            schema: Vec::new(),
            features: synth::default_features(),
            blocking: synth::default_blocking(),
            views: vec![synth::top3_view(), synth::count_view()],
            expected: None,
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = synthetic_config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: DatasetConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_files_are_listed() {
        let cfg = DatasetConfig {
            name: "r".into(),
            source: Source::Files {
                data: "r/data.csv".into(),
                matches: Some("r/matches.csv".into()),
                delimiter: ',',
                key_column: None,
            },
            schema: synth::schema(),
            ..synthetic_config()
        };
        let dir = tempfile::tempdir().unwrap();
        match cfg.open(dir.path()) {
            Err(Error::MissingData { missing, .. }) => assert_eq!(missing.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn files_source_reads_saved_synthetic_data() {
        let (rel, truth) = synth::generate_synthetic(40, 0.25, 0.1, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        synth::save(&dir.path().join("s"), &rel, &truth).unwrap();
        let cfg = DatasetConfig {
            name: "s".into(),
            source: Source::Files {
                data: "s/data.csv".into(),
                matches: Some("s/matches.csv".into()),
                delimiter: ',',
                key_column: Some("id".into()),
            },
            schema: synth::schema(),
            expected: Some(Expected {
                rows: 50,
                matches: Some(10),
            }),
            ..synthetic_config()
        };
        let d = cfg.open(dir.path()).unwrap();
        assert_eq!(d.relation.records(), rel.records());
        assert_eq!(d.truth.as_deref(), Some(&truth));
        assert!(d.size_warnings().is_empty());
    }

    #[test]
    fn cache_prepares_once_and_rejects_unknown_names() {
        let mut cat = Catalog::default();
        cat.insert(synthetic_config()).unwrap();
        assert!(cat.insert(synthetic_config()).is_err());
        let cache = TaskCache::new(cat, PathBuf::from("."));
        let views = vec!["Top3".to_string()];
        let a = cache.prepared("synthetic", &views, ImpactAggregation::Max).unwrap();
        let b = cache.prepared("synthetic", &views, ImpactAggregation::Max).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert!(matches!(
            cache.prepared("synthetic", &["Nope".into()], ImpactAggregation::Max),
            Err(Error::NotFound { kind: "view", .. })
        ));
        assert!(matches!(
            cache.dataset("nope"),
            Err(Error::NotFound { kind: "dataset", .. })
        ));
    }
}
