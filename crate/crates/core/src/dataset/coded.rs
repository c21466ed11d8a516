use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::records::DrivingMode;
use super::DatasetError;

/// A design column. Dummy columns know the variable and level they encode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedColumn {
    pub name: String,
    pub variable: Option<String>,
    pub level: Option<String>,
}

impl CodedColumn {
    pub fn plain(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variable: None,
            level: None,
        }
    }

    pub fn dummy(variable: &str, level: &str) -> Self {
        Self {
            name: format!("{variable}[{level}]"),
            variable: Some(variable.to_string()),
            level: Some(level.to_string()),
        }
    }
}

/// Model-ready data: binary response, row-level design X (n x P, row-major),
/// group-level design Z (J x Q, row-major) and group memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedDataset {
    pub response_name: String,
    pub response: Vec<f64>,
    pub fixed_design: Vec<f64>,
    pub columns: Vec<CodedColumn>,
    pub level2_design: Vec<f64>,
    pub level2_columns: Vec<CodedColumn>,
    pub group_index_l2: Vec<usize>,
    pub group_labels_l2: Vec<String>,
    pub group_index_l3: Option<Vec<usize>>,
    pub group_labels_l3: Vec<String>,
    pub row_ids: Vec<String>,
    pub mode: Option<DrivingMode>,
    pub reference_levels: BTreeMap<String, String>,
}

/// Sidecar written next to the columnar CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedMetadata {
    pub response_name: String,
    pub mode: Option<DrivingMode>,
    pub n_rows: usize,
    pub columns: Vec<CodedColumn>,
    pub level2_columns: Vec<CodedColumn>,
    pub level2_design: Vec<Vec<f64>>,
    pub groups_l2: Vec<String>,
    pub groups_l3: Option<Vec<String>>,
    pub reference_levels: BTreeMap<String, String>,
    pub fingerprint: String,
    /// Run information (tool version, config hash, seed); not part of the fingerprint.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
}

impl CodedDataset {
    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.columns.len()
    }

    pub fn n_level2(&self) -> usize {
        self.level2_columns.len()
    }

    pub fn n_groups_l2(&self) -> usize {
        self.group_labels_l2.len()
    }

    pub fn n_groups_l3(&self) -> usize {
        self.group_index_l3.as_ref().map_or(0, |_| self.group_labels_l3.len())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_fixed();
        &self.fixed_design[i * p..(i + 1) * p]
    }

    pub fn x(&self, i: usize, p: usize) -> f64 {
        self.fixed_design[i * self.n_fixed() + p]
    }

    pub fn z(&self, j: usize, q: usize) -> f64 {
        self.level2_design[j * self.n_level2() + q]
    }

    pub fn column(&self, p: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.x(i, p)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Row indices of each level-2 group.
    pub fn rows_by_group_l2(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_groups_l2()];
        for (i, &g) in self.group_index_l2.iter().enumerate() {
            out[g].push(i);
        }
        out
    }

    pub fn rows_by_group_l3(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_groups_l3()];
        if let Some(idx) = &self.group_index_l3 {
            for (i, &g) in idx.iter().enumerate() {
                out[g].push(i);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let n = self.n_rows();
        let p = self.n_fixed();
        let q = self.n_level2();
        let j = self.n_groups_l2();
        let shape = |m: String| Err(DatasetError::Shape(m));
        if self.fixed_design.len() != n * p {
            return shape(format!("X has {} cells, expected {n} x {p}", self.fixed_design.len()));
        }
        if self.level2_design.len() != j * q {
            return shape(format!("Z has {} cells, expected {j} x {q}", self.level2_design.len()));
        }
        if self.group_index_l2.len() != n || self.row_ids.len() != n {
            return shape("group index or row ids do not match row count".into());
        }
        if j < 2 {
            return Err(DatasetError::TooFewGroups(j));
        }
        for (row, &y) in self.response.iter().enumerate() {
            if y != 0.0 && y != 1.0 {
                return Err(DatasetError::NonBinaryResponse { row, value: y });
            }
        }
        if self.group_index_l2.iter().any(|&g| g >= j) {
            return shape("level-2 group index out of range".into());
        }
        if let Some(l3) = &self.group_index_l3 {
            if l3.len() != n || l3.iter().any(|&g| g >= self.group_labels_l3.len()) {
                return shape("level-3 group index out of range".into());
            }
        }
        if n > 0 {
            for (k, col) in self.columns.iter().enumerate() {
                let first = self.x(0, k);
                if (1..n).all(|i| self.x(i, k) == first) {
                    return Err(DatasetError::ConstantColumn(col.name.clone()));
                }
            }
        }
        for (k, col) in self.level2_columns.iter().enumerate() {
            let first = self.z(0, k);
            if (1..j).all(|g| self.z(g, k) == first) {
                return Err(DatasetError::ConstantColumn(col.name.clone()));
            }
        }
        Ok(())
    }

    /// Non-reference levels switched on in row `i`, by variable.
    pub fn decode_row(&self, i: usize) -> BTreeMap<String, String> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(k, _)| self.x(i, *k) == 1.0)
            .filter_map(|(_, c)| Some((c.variable.clone()?, c.level.clone()?)))
            .collect()
    }

    fn csv_bytes(&self) -> Result<Vec<u8>, DatasetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row_id".to_string(), "group_l2".to_string()];
        if self.group_index_l3.is_some() {
            header.push("group_l3".into());
        }
        header.push("response".into());
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.row_ids[i].clone(), self.group_index_l2[i].to_string()];
            if let Some(l3) = &self.group_index_l3 {
                rec.push(l3[i].to_string());
            }
            rec.push(self.response[i].to_string());
            rec.extend(self.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| DatasetError::Metadata(e.to_string()))
    }

    fn metadata_without_fingerprint(&self) -> CodedMetadata {
        let q = self.n_level2();
        CodedMetadata {
            response_name: self.response_name.clone(),
            mode: self.mode,
            n_rows: self.n_rows(),
            columns: self.columns.clone(),
            level2_columns: self.level2_columns.clone(),
            level2_design: (0..self.n_groups_l2())
                .map(|j| self.level2_design[j * q..(j + 1) * q].to_vec())
                .collect(),
            groups_l2: self.group_labels_l2.clone(),
            groups_l3: self.group_index_l3.as_ref().map(|_| self.group_labels_l3.clone()),
            reference_levels: self.reference_levels.clone(),
            fingerprint: String::new(),
            provenance: BTreeMap::new(),
        }
    }

    /// SHA-256 over the columnar CSV and the sidecar content.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.csv_bytes().unwrap_or_default());
        h.update(serde_json::to_vec(&self.metadata_without_fingerprint()).unwrap_or_default());
        hex::encode(h.finalize())
    }

    pub fn metadata(&self) -> CodedMetadata {
        CodedMetadata {
            fingerprint: self.fingerprint(),
            ..self.metadata_without_fingerprint()
        }
    }

    pub fn write(&self, csv_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<(), DatasetError> {
        self.write_with_provenance(csv_path, meta_path, &BTreeMap::new())
    }

    /// Like [`write`](Self::write), with `# key value` comment lines at the
    /// top of the CSV and the same pairs in the sidecar.
    pub fn write_with_provenance(
        &self,
        csv_path: impl AsRef<Path>,
        meta_path: impl AsRef<Path>,
        provenance: &BTreeMap<String, String>,
    ) -> Result<(), DatasetError> {
        let (csv_path, meta_path) = (csv_path.as_ref(), meta_path.as_ref());
        let mut bytes: Vec<u8> = provenance
            .iter()
            .flat_map(|(k, v)| format!("# {k} {v}\n").into_bytes())
            .collect();
        bytes.extend(self.csv_bytes()?);
        std::fs::write(csv_path, bytes).map_err(|e| DatasetError::io(csv_path, e))?;
        let meta = CodedMetadata {
            provenance: provenance.clone(),
            ..self.metadata()
        };
        let meta = serde_json::to_string_pretty(&meta).map_err(|e| DatasetError::Metadata(e.to_string()))?;
        std::fs::write(meta_path, meta + "\n").map_err(|e| DatasetError::io(meta_path, e))
    }

    pub fn read(csv_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let (csv_path, meta_path) = (csv_path.as_ref(), meta_path.as_ref());
        let meta_text = std::fs::read_to_string(meta_path).map_err(|e| DatasetError::io(meta_path, e))?;
        let meta: CodedMetadata =
            serde_json::from_str(&meta_text).map_err(|e| DatasetError::Metadata(e.to_string()))?;
        let file = std::fs::File::open(csv_path).map_err(|e| DatasetError::io(csv_path, e))?;
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let has_l3 = meta.groups_l3.is_some();
        let lead = if has_l3 { 4 } else { 3 };
        let expected: Vec<&str> = meta.columns.iter().map(|c| c.name.as_str()).collect();
        if header.len() != lead + expected.len() || header[lead..].iter().zip(&expected).any(|(a, b)| a != b) {
            return Err(DatasetError::Metadata("CSV header does not match sidecar columns".into()));
        }

        let num = |row: usize, col: &str, s: &str| -> Result<f64, DatasetError> {
            s.parse::<f64>().map_err(|_| DatasetError::MalformedNumeric {
                row,
                column: col.to_string(),
                value: s.to_string(),
            })
        };
        let idx = |row: usize, col: &str, s: &str| -> Result<usize, DatasetError> {
            s.parse::<usize>().map_err(|_| DatasetError::MalformedNumeric {
                row,
                column: col.to_string(),
                value: s.to_string(),
            })
        };

        let mut ds = CodedDataset {
            response_name: meta.response_name.clone(),
            response: Vec::new(),
            fixed_design: Vec::new(),
            columns: meta.columns.clone(),
            level2_design: meta.level2_design.iter().flatten().copied().collect(),
            level2_columns: meta.level2_columns.clone(),
            group_index_l2: Vec::new(),
            group_labels_l2: meta.groups_l2.clone(),
            group_index_l3: has_l3.then(Vec::new),
            group_labels_l3: meta.groups_l3.clone().unwrap_or_default(),
            row_ids: Vec::new(),
            mode: meta.mode,
            reference_levels: meta.reference_levels.clone(),
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            ds.row_ids.push(rec[0].to_string());
            ds.group_index_l2.push(idx(row, "group_l2", &rec[1])?);
            if let Some(l3) = ds.group_index_l3.as_mut() {
                l3.push(idx(row, "group_l3", &rec[2])?);
            }
            ds.response.push(num(row, "response", &rec[lead - 1])?);
            for (k, cell) in rec.iter().skip(lead).enumerate() {
                ds.fixed_design.push(num(row, &header[lead + k], cell)?);
            }
        }
        if ds.n_rows() != meta.n_rows {
            return Err(DatasetError::Metadata(format!(
                "sidecar says {} rows, CSV has {}",
                meta.n_rows,
                ds.n_rows()
            )));
        }
        ds.validate()?;
        if ds.fingerprint() != meta.fingerprint {
            return Err(DatasetError::Metadata("fingerprint mismatch".into()));
        }
        Ok(ds)
    }
}
