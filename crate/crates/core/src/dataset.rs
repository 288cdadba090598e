//! Immutable clustered data.
//!
//! Observations are stored contiguously, cluster by cluster, in the order the
//! clusters first appeared. Each row holds the individual-level coordinates
//! followed by the cluster-level coordinates. A secondary index sorted by the
//! first coordinate (ties broken by row position) lets the estimators visit
//! only the rows inside a compact kernel window; because the tie-break is by
//! position, the index of a dataset with a cluster removed is exactly the
//! subsequence of the original index, which keeps window sums bit-identical.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// One cluster, as supplied by a caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: String,
    pub y: Vec<f64>,
    /// One row per member: individual coordinates first, then cluster-level.
    pub x: Vec<Vec<f64>>,
}

/// Names the columns that make up a clustered dataset in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColumnSchema {
    pub cluster_col: String,
    /// Empty for data without a response; every `y` is then zero.
    pub y_col: String,
    pub x_cols: Vec<String>,
    pub cluster_level_cols: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSizeSummary {
    pub n: usize,
    pub clusters: usize,
    pub max_ng: usize,
    pub sum_ng_sq: u64,
    pub mean_ng: f64,
}

impl ClusterSizeSummary {
    /// `(1/n) Σ n_g²`.
    pub fn mean_sq_size(&self) -> f64 {
        self.sum_ng_sq as f64 / self.n as f64
    }

    /// Number of unordered within-cluster pairs, `Σ n_g (n_g - 1) / 2`.
    pub fn n_pairs(&self) -> u64 {
        (self.sum_ng_sq - self.n as u64) / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredDataset {
    ids: Vec<String>,
    /// Row offsets; cluster `g` occupies `starts[g]..starts[g + 1]`.
    starts: Vec<usize>,
    y: Vec<f64>,
    /// Row-major `n × d`.
    x: Vec<f64>,
    cluster_of: Vec<usize>,
    d_ind: usize,
    d_cls: usize,
    /// Rows sorted by first coordinate, then by position.
    order: Vec<usize>,
    keys: Vec<f64>,
}

impl ClusteredDataset {
    /// Builds a dataset, validating shapes and cluster-level constancy.
    pub fn from_clusters(clusters: Vec<Cluster>, d_ind: usize, d_cls: usize) -> Result<Self> {
        if d_ind == 0 {
            return Err(Error::Validation(
                "at least one individual-level regressor is required".into(),
            ));
        }
        if clusters.is_empty() {
            return Err(Error::NoObservations);
        }
        let d = d_ind + d_cls;
        let mut ids = Vec::with_capacity(clusters.len());
        let mut starts = vec![0];
        let mut y = Vec::new();
        let mut x = Vec::new();
        for c in clusters {
            if c.y.is_empty() {
                return Err(Error::Validation(format!("cluster '{}' is empty", c.id)));
            }
            if c.y.len() != c.x.len() {
                return Err(Error::Validation(format!(
                    "cluster '{}' has {} responses but {} regressor rows",
                    c.id,
                    c.y.len(),
                    c.x.len()
                )));
            }
            for row in &c.x {
                if row.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: row.len(),
                    });
                }
            }
            if c.y.iter().chain(c.x.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "cluster '{}' contains a non-finite value",
                    c.id
                )));
            }
            let first = &c.x[0];
            for q in d_ind..d {
                if c.x.iter().any(|row| row[q].to_bits() != first[q].to_bits()) {
                    return Err(Error::ClusterLevelVaries {
                        cluster: c.id.clone(),
                        column: format!("x[{q}]"),
                    });
                }
            }
            y.extend_from_slice(&c.y);
            for row in &c.x {
                x.extend_from_slice(row);
            }
            starts.push(y.len());
            ids.push(c.id);
        }
        Ok(Self::assemble(ids, starts, y, x, d_ind, d_cls))
    }

    fn assemble(
        ids: Vec<String>,
        starts: Vec<usize>,
        y: Vec<f64>,
        x: Vec<f64>,
        d_ind: usize,
        d_cls: usize,
    ) -> Self {
        let d = d_ind + d_cls;
        let n = y.len();
        let mut cluster_of = Vec::with_capacity(n);
        for g in 0..ids.len() {
            cluster_of.extend(std::iter::repeat(g).take(starts[g + 1] - starts[g]));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[a * d].total_cmp(&x[b * d]).then(a.cmp(&b)));
        let keys = order.iter().map(|&i| x[i * d]).collect();
        ClusteredDataset {
            ids,
            starts,
            y,
            x,
            cluster_of,
            d_ind,
            d_cls,
            order,
            keys,
        }
    }

    /// Reads a CSV file with a header row.
    pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file, schema)
    }

    pub fn from_csv_reader<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Self> {
        if schema.x_cols.is_empty() {
            return Err(Error::Schema(
                "at least one individual-level regressor column is required".into(),
            ));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Schema(format!("cannot read header row: {e}")))?
            .clone();
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
        };
        let id_idx = find(&schema.cluster_col)?;
        let y_idx = if schema.y_col.is_empty() {
            None
        } else {
            Some(find(&schema.y_col)?)
        };
        let x_idx = schema
            .x_cols
            .iter()
            .chain(&schema.cluster_level_cols)
            .map(|c| find(c))
            .collect::<Result<Vec<_>>>()?;
        let col_names: Vec<&str> = schema
            .x_cols
            .iter()
            .chain(&schema.cluster_level_cols)
            .map(String::as_str)
            .collect();

        let mut slot: HashMap<String, usize> = HashMap::new();
        let mut clusters: Vec<Cluster> = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record.map_err(|e| Error::Schema(format!("data row {row}: {e}")))?;
            let field = |idx: usize, name: &str| -> Result<f64> {
                let raw = record.get(idx).unwrap_or("");
                if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                    return Err(Error::MissingValue {
                        row,
                        column: name.to_string(),
                    });
                }
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Parse {
                        row,
                        column: name.to_string(),
                        value: raw.to_string(),
                    }),
                }
            };
            let id = record.get(id_idx).unwrap_or("").to_string();
            if id.is_empty() {
                return Err(Error::MissingValue {
                    row,
                    column: schema.cluster_col.clone(),
                });
            }
            let yv = match y_idx {
                Some(i) => field(i, &schema.y_col)?,
                None => 0.0,
            };
            let xv = x_idx
                .iter()
                .zip(&col_names)
                .map(|(&i, name)| field(i, name))
                .collect::<Result<Vec<_>>>()?;
            let g = *slot.entry(id.clone()).or_insert_with(|| {
                clusters.push(Cluster {
                    id,
                    y: Vec::new(),
                    x: Vec::new(),
                });
                clusters.len() - 1
            });
            clusters[g].y.push(yv);
            clusters[g].x.push(xv);
        }
        if clusters.is_empty() {
            return Err(Error::NoObservations);
        }
        let d_ind = schema.x_cols.len();
        for c in &clusters {
            for (k, name) in schema.cluster_level_cols.iter().enumerate() {
                let q = d_ind + k;
                let first = c.x[0][q].to_bits();
                if c.x.iter().any(|row| row[q].to_bits() != first) {
                    return Err(Error::ClusterLevelVaries {
                        cluster: c.id.clone(),
                        column: name.clone(),
                    });
                }
            }
        }
        let ds = Self::from_clusters(clusters, d_ind, schema.cluster_level_cols.len())?;
        let s = ds.size_summary();
        debug_assert!(s.sum_ng_sq >= s.n as u64 && s.sum_ng_sq <= (s.n as u64).pow(2));
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.ids.len()
    }

    pub fn d(&self) -> usize {
        self.d_ind + self.d_cls
    }

    pub fn d_ind(&self) -> usize {
        self.d_ind
    }

    pub fn d_cls(&self) -> usize {
        self.d_cls
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.x[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.x.chunks_exact(self.d())
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.cluster_of[i]
    }

    pub fn cluster_id(&self, g: usize) -> &str {
        &self.ids[g]
    }

    pub fn cluster_range(&self, g: usize) -> std::ops::Range<usize> {
        self.starts[g]..self.starts[g + 1]
    }

    pub fn cluster_size(&self, g: usize) -> usize {
        self.starts[g + 1] - self.starts[g]
    }

    /// Owned copies of the clusters, in dataset order.
    pub fn clusters(&self) -> Vec<Cluster> {
        (0..self.num_clusters()).map(|g| self.cluster(g)).collect()
    }

    pub fn cluster(&self, g: usize) -> Cluster {
        let r = self.cluster_range(g);
        Cluster {
            id: self.ids[g].clone(),
            y: self.y[r.clone()].to_vec(),
            x: r.map(|i| self.row(i).to_vec()).collect(),
        }
    }

    pub fn size_summary(&self) -> ClusterSizeSummary {
        let n = self.n();
        let sizes = (0..self.num_clusters()).map(|g| self.cluster_size(g));
        let max_ng = sizes.clone().max().unwrap_or(0);
        let sum_ng_sq = sizes.map(|s| (s as u64) * (s as u64)).sum();
        ClusterSizeSummary {
            n,
            clusters: self.num_clusters(),
            max_ng,
            sum_ng_sq,
            mean_ng: if self.num_clusters() == 0 {
                0.0
            } else {
                n as f64 / self.num_clusters() as f64
            },
        }
    }

    /// Copy of the dataset without cluster `g`. Dropping the only cluster
    /// yields an empty dataset; estimators report it as an empty window.
    pub fn drop_cluster(&self, g: usize) -> Result<ClusteredDataset> {
        if g >= self.num_clusters() {
            return Err(Error::ClusterIndex {
                index: g,
                len: self.num_clusters(),
            });
        }
        let d = self.d();
        let range = self.cluster_range(g);
        let size = range.len();
        let mut ids = self.ids.clone();
        ids.remove(g);
        let mut starts = Vec::with_capacity(self.starts.len() - 1);
        for (k, &s) in self.starts.iter().enumerate() {
            if k <= g {
                starts.push(s);
            } else if k > g + 1 {
                starts.push(s - size);
            }
        }
        let mut y = self.y.clone();
        y.drain(range.clone());
        let mut x = self.x.clone();
        x.drain(range.start * d..range.end * d);
        Ok(Self::assemble(ids, starts, y, x, self.d_ind, self.d_cls))
    }

    /// Positions in the sorted index whose first coordinate lies within
    /// `radius` of `x0`.
    pub(crate) fn window(&self, x0: f64, radius: f64) -> &[usize] {
        // Slightly widened; the kernel itself decides membership.
        let slack = radius * 1e-12 + f64::MIN_POSITIVE;
        let lo = x0 - radius - slack;
        let hi = x0 + radius + slack;
        let a = self.keys.partition_point(|&k| k < lo);
        let b = self.keys.partition_point(|&k| k <= hi);
        &self.order[a..b.max(a)]
    }
}
