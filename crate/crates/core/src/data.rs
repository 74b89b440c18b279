//! Flow-record preprocessing: CSV ingestion, missing-value column removal,
//! categorical encoding, aggregation per (source, destination) pair, seeded
//! splitting, min-max scaling and PCA.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use log::{info, warn};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::{pca_fit, pca_transform, PcaModel};

/// Header plus string cells, exactly as read.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawDataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::Pipeline(format!(
                "row {} has {} cells, header has {}",
                i + 1,
                r.len(),
                columns.len()
            )));
        }
        Ok(Self { columns, rows })
    }

    /// Reads a comma-delimited CSV with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let columns = input.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let rows = input
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Self::new(columns, rows)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Pipeline(format!("column {name:?} not found in header")))
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &str> {
        self.rows.iter().map(move |r| r[idx].as_str())
    }

    fn without_columns(&self, drop: &BTreeSet<usize>) -> Self {
        let keep = |i: &usize| !drop.contains(i);
        Self {
            columns: (0..self.columns.len()).filter(keep).map(|i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| (0..r.len()).filter(keep).map(|i| r[i].clone()).collect())
                .collect(),
        }
    }
}

/// Which columns identify the flow endpoints and the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnRoles {
    pub src_ip: String,
    pub dst_ip: String,
    pub label: String,
    /// Label cell value of benign traffic; any other value is an attack.
    pub normal_label: String,
    /// Columns to label-encode even if they look numeric.
    pub categorical: Vec<String>,
    /// Columns left out of the feature set.
    pub exclude: Vec<String>,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        Self {
            src_ip: "src_ip".into(),
            dst_ip: "dst_ip".into(),
            label: "label".into(),
            normal_label: "0".into(),
            categorical: Vec::new(),
            exclude: Vec::new(),
        }
    }
}

impl ColumnRoles {
    fn is_reserved(&self, name: &str) -> bool {
        name == self.src_ip || name == self.dst_ip || name == self.label || self.exclude.iter().any(|e| e == name)
    }

    fn check(&self, ds: &RawDataset) -> Result<()> {
        for name in [&self.src_ip, &self.dst_ip, &self.label] {
            ds.column_index(name)?;
        }
        Ok(())
    }

    /// 1 for attack, 0 for benign. Numeric cells compare by value.
    pub fn binary_label(&self, cell: &str) -> u8 {
        let (cell, normal) = (cell.trim(), self.normal_label.trim());
        let same = match (cell.parse::<f64>(), normal.parse::<f64>()) {
            (Ok(a), Ok(b)) => a == b,
            _ => cell == normal,
        };
        u8::from(!same)
    }
}

/// Empty, `nan`, `na`, `null` (any case) or non-finite.
pub fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty()
        || ["nan", "na", "null", "none"].iter().any(|m| c.eq_ignore_ascii_case(m))
        || c.parse::<f64>().is_ok_and(|v| !v.is_finite())
}

/// Maps distinct strings to `0..k` in lexicographic order.
pub fn label_encode<S: AsRef<str>>(column: &[S]) -> (Vec<usize>, Vec<String>) {
    let mapping: Vec<String> = column
        .iter()
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let codes = column
        .iter()
        .map(|s| mapping.binary_search_by(|m| m.as_str().cmp(s.as_ref())).expect("value is in mapping"))
        .collect();
    (codes, mapping)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Numeric,
    Categorical,
    Unusable,
}

fn classify(ds: &RawDataset, idx: usize, roles: &ColumnRoles) -> ColumnKind {
    if ds.column(idx).any(is_missing) {
        return ColumnKind::Unusable;
    }
    if roles.categorical.iter().any(|c| *c == ds.columns[idx]) {
        return ColumnKind::Categorical;
    }
    let parsed = ds.column(idx).filter(|c| c.trim().parse::<f64>().is_ok()).count();
    if parsed == ds.rows.len() {
        ColumnKind::Numeric
    } else if parsed == 0 {
        ColumnKind::Categorical
    } else {
        ColumnKind::Unusable
    }
}

/// Removes every feature column with a missing or unparseable numeric cell.
/// Returns the reduced dataset and the names of removed columns.
pub fn drop_nan_features(ds: &RawDataset, roles: &ColumnRoles) -> Result<(RawDataset, Vec<String>)> {
    roles.check(ds)?;
    let mut drop = BTreeSet::new();
    let mut remaining = 0;
    for (i, name) in ds.columns.iter().enumerate() {
        if roles.is_reserved(name) {
            continue;
        }
        if classify(ds, i, roles) == ColumnKind::Unusable {
            drop.insert(i);
        } else {
            remaining += 1;
        }
    }
    if remaining == 0 {
        return Err(Error::Pipeline("no usable feature columns remain after dropping missing values".into()));
    }
    let names = drop.iter().map(|&i| ds.columns[i].clone()).collect();
    Ok((ds.without_columns(&drop), names))
}

/// Numeric per-flow features with endpoints and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTable {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub src: Vec<String>,
    pub dst: Vec<String>,
    pub labels: Vec<u8>,
}

/// Turns a dataset with only usable columns into numbers, label-encoding the
/// categorical ones. Returns the table and the encoding of each categorical
/// column.
pub fn encode_features(ds: &RawDataset, roles: &ColumnRoles) -> Result<(FlowTable, BTreeMap<String, Vec<String>>)> {
    roles.check(ds)?;
    let n = ds.rows.len();
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut mappings = BTreeMap::new();
    for (i, name) in ds.columns.iter().enumerate() {
        if roles.is_reserved(name) {
            continue;
        }
        let values = match classify(ds, i, roles) {
            ColumnKind::Numeric => ds.column(i).map(|c| c.trim().parse::<f64>().expect("classified numeric")).collect(),
            ColumnKind::Categorical => {
                let cells: Vec<&str> = ds.column(i).map(str::trim).collect();
                let (codes, mapping) = label_encode(&cells);
                mappings.insert(name.clone(), mapping);
                codes.into_iter().map(|c| c as f64).collect()
            }
            ColumnKind::Unusable => {
                return Err(Error::Pipeline(format!("column {name:?} has missing values; drop it first")))
            }
        };
        names.push(name.clone());
        columns.push(values);
    }
    let (s, d, l) = (
        ds.column_index(&roles.src_ip)?,
        ds.column_index(&roles.dst_ip)?,
        ds.column_index(&roles.label)?,
    );
    Ok((
        FlowTable {
            feature_names: names,
            features: (0..n).map(|r| columns.iter().map(|c| c[r]).collect()).collect(),
            src: ds.column(s).map(|c| c.trim().to_string()).collect(),
            dst: ds.column(d).map(|c| c.trim().to_string()).collect(),
            labels: ds.column(l).map(|c| roles.binary_label(c)).collect(),
        },
        mappings,
    ))
}

/// One node per distinct ordered endpoint pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedTable {
    pub node_ids: Vec<String>,
    pub features: DMatrix<f64>,
    pub labels: Vec<u8>,
}

impl AggregatedTable {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> AggregatedTable {
        AggregatedTable {
            node_ids: rows.iter().map(|&r| self.node_ids[r].clone()).collect(),
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

/// Averages features over flows sharing `(src, dst)`; the label is the
/// majority label with ties going to attack. Groups appear in order of first
/// occurrence, named `src-dst`.
pub fn group_flows(table: &FlowTable) -> AggregatedTable {
    let f = table.feature_names.len();
    let mut index: HashMap<(&str, &str), usize> = HashMap::new();
    let mut ids = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<[usize; 2]> = Vec::new();
    for r in 0..table.features.len() {
        let key = (table.src[r].as_str(), table.dst[r].as_str());
        let g = *index.entry(key).or_insert_with(|| {
            ids.push(format!("{}-{}", key.0, key.1));
            sums.push(vec![0.0; f]);
            counts.push([0, 0]);
            ids.len() - 1
        });
        for (acc, v) in sums[g].iter_mut().zip(&table.features[r]) {
            *acc += v;
        }
        counts[g][usize::from(table.labels[r])] += 1;
    }
    let features = DMatrix::from_fn(ids.len(), f, |g, k| sums[g][k] / (counts[g][0] + counts[g][1]) as f64);
    let labels = counts.iter().map(|[benign, attack]| u8::from(attack >= benign)).collect();
    AggregatedTable {
        node_ids: ids,
        features,
        labels,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn minmax_fit(x: &DMatrix<f64>) -> Result<ScalerStats> {
    if x.nrows() == 0 {
        return Err(Error::Pipeline("cannot fit a scaler on zero rows".into()));
    }
    Ok(ScalerStats {
        min: x.column_iter().map(|c| c.min()).collect(),
        max: x.column_iter().map(|c| c.max()).collect(),
    })
}

/// `(x − min)/(max − min)` clamped to `[0, 1]`; constant features map to 0.
pub fn minmax_transform(x: &DMatrix<f64>, stats: &ScalerStats) -> Result<DMatrix<f64>> {
    if stats.min.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            context: "scaler width",
            expected: stats.min.len(),
            got: x.ncols(),
        });
    }
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| {
        let range = stats.max[k] - stats.min[k];
        if range > 0.0 {
            ((x[(i, k)] - stats.min[k]) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }))
}

/// Fits on `x` unless `stats` is given, then transforms `x`.
pub fn minmax_fit_transform(x: &DMatrix<f64>, stats: Option<&ScalerStats>) -> Result<(DMatrix<f64>, ScalerStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => minmax_fit(x)?,
    };
    Ok((minmax_transform(x, &stats)?, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n`, then validation and test slices of
/// `floor(ratio·n)` rows each; the remainder is training.
pub fn split(n: usize, ratios: SplitRatios, seed: u64) -> Result<SplitIndices> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 rows to split, got {n}")));
    }
    let parts = [ratios.train, ratios.val, ratios.test];
    if parts.iter().any(|r| !(0.0..=1.0).contains(r)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split ratios {parts:?} must be in [0,1] and sum to 1")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (ratios.val * n as f64 + 1e-9).floor() as usize;
    let n_test = (ratios.test * n as f64 + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    Ok(SplitIndices {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

/// Which rows the scalers and PCA are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    #[default]
    Train,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub columns: ColumnRoles,
    pub n_components: usize,
    pub ratios: SplitRatios,
    pub seed: u64,
    pub fit_scope: FitScope,
    /// Rescale PCA outputs to `[0, 1]` before they become rotation angles.
    pub scale_after_pca: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            columns: ColumnRoles::default(),
            n_components: 4,
            ratios: SplitRatios::default(),
            seed: 0,
            fit_scope: FitScope::Train,
            scale_after_pca: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Everything needed to reproduce or audit a preprocessing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub input_rows: usize,
    pub dropped_columns: Vec<String>,
    pub feature_columns: Vec<String>,
    pub categorical_mappings: BTreeMap<String, Vec<String>>,
    pub aggregated_rows: usize,
    pub attack_nodes: usize,
    pub scaler: ScalerStats,
    pub pca: PcaModel,
    pub pca_explained_variance_ratio: Vec<f64>,
    pub post_pca_scaler: Option<ScalerStats>,
    pub split_sizes: SplitSizes,
    pub config: PipelineConfig,
}

pub struct PipelineOutput {
    pub train: AggregatedTable,
    pub val: AggregatedTable,
    pub test: AggregatedTable,
    pub manifest: Manifest,
}

/// drop missing → encode → group → split → min-max → PCA → optional
/// second min-max. Scalers and PCA are fitted according to `fit_scope`.
pub fn run_pipeline(raw: &RawDataset, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (clean, dropped) = drop_nan_features(raw, &cfg.columns)?;
    if !dropped.is_empty() {
        warn!("dropped columns with missing values: {}", dropped.join(", "));
    }
    let (table, mappings) = encode_features(&clean, &cfg.columns)?;
    let grouped = group_flows(&table);
    info!("{} flows aggregated into {} endpoint pairs", table.features.len(), grouped.len());
    let idx = split(grouped.len(), cfg.ratios, cfg.seed)?;
    let parts = [grouped.select(&idx.train), grouped.select(&idx.val), grouped.select(&idx.test)];
    let fit_rows = match cfg.fit_scope {
        FitScope::Train => &parts[0].features,
        FitScope::All => &grouped.features,
    };

    let scaler = minmax_fit(fit_rows)?;
    let pca = pca_fit(&minmax_transform(fit_rows, &scaler)?, cfg.n_components)?;
    let project = |x: &DMatrix<f64>| pca_transform(&minmax_transform(x, &scaler)?, &pca);
    let post_pca_scaler = if cfg.scale_after_pca {
        Some(minmax_fit(&project(fit_rows)?)?)
    } else {
        None
    };
    let finish = |t: &AggregatedTable| -> Result<AggregatedTable> {
        let mut features = project(&t.features)?;
        if let Some(s) = &post_pca_scaler {
            features = minmax_transform(&features, s)?;
        }
        Ok(AggregatedTable {
            features,
            ..t.clone()
        })
    };
    let [train, val, test] = [finish(&parts[0])?, finish(&parts[1])?, finish(&parts[2])?];

    let manifest = Manifest {
        input_rows: raw.rows.len(),
        dropped_columns: dropped,
        feature_columns: table.feature_names.clone(),
        categorical_mappings: mappings,
        aggregated_rows: grouped.len(),
        attack_nodes: grouped.labels.iter().filter(|&&l| l == 1).count(),
        scaler,
        pca_explained_variance_ratio: pca.explained_variance_ratio(),
        pca,
        post_pca_scaler,
        split_sizes: SplitSizes {
            train: train.len(),
            val: val.len(),
            test: test.len(),
        },
        config: cfg.clone(),
    };
    Ok(PipelineOutput {
        train,
        val,
        test,
        manifest,
    })
}
