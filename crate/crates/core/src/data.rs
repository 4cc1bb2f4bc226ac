//! Tabular cohorts: schema, cells, labels and CSV ingestion.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UpmError};

pub const DEFAULT_LABEL_COLUMN: &str = "placement_status";
pub const MISSING_TOKEN: &str = "?";

/// Binary placement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Placed,
    Unplaced,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Placed, Label::Unplaced];

    pub fn index(self) -> usize {
        match self {
            Label::Placed => 0,
            Label::Unplaced => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Placed
        } else {
            Label::Unplaced
        }
    }

    /// Case-insensitive parse of `Placed` / `Unplaced`.
    pub fn parse(s: &str) -> Option<Label> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("placed") {
            Some(Label::Placed)
        } else if t.eq_ignore_ascii_case("unplaced") {
            Some(Label::Unplaced)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Placed => "Placed",
            Label::Unplaced => "Unplaced",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Placed => Label::Unplaced,
            Label::Unplaced => Label::Placed,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cell of a row. Missing is its own state, never a sentinel number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Cat(u32),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Numeric view used by the learners: numbers as-is, categories as their id.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            Cell::Cat(c) => Some(c as f64),
            Cell::Missing => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

impl AttributeKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, AttributeKind::Numeric)
    }

    pub fn n_categories(&self) -> usize {
        match self {
            AttributeKind::Numeric => 0,
            AttributeKind::Categorical { categories } => categories.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDescriptor {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
    pub index: usize,
}

impl AttributeDescriptor {
    pub fn numeric(name: impl Into<String>, index: usize) -> Self {
        AttributeDescriptor {
            name: name.into(),
            kind: AttributeKind::Numeric,
            index,
        }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>, index: usize) -> Self {
        AttributeDescriptor {
            name: name.into(),
            kind: AttributeKind::Categorical { categories },
            index,
        }
    }

    /// Same name and kind; position is ignored.
    pub fn same_shape(&self, other: &AttributeDescriptor) -> bool {
        self.name == other.name && self.kind == other.kind
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub source: String,
}

/// Per-class instance counts. Both classes are always present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub placed: usize,
    pub unplaced: usize,
}

impl ClassCounts {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a Label>) -> Self {
        let mut c = ClassCounts::default();
        for l in labels {
            c.add(*l);
        }
        c
    }

    pub fn add(&mut self, l: Label) {
        match l {
            Label::Placed => self.placed += 1,
            Label::Unplaced => self.unplaced += 1,
        }
    }

    pub fn get(&self, l: Label) -> usize {
        match l {
            Label::Placed => self.placed,
            Label::Unplaced => self.unplaced,
        }
    }

    pub fn total(&self) -> usize {
        self.placed + self.unplaced
    }

    /// Larger class; ties go to `Placed`.
    pub fn majority(&self) -> Label {
        if self.unplaced > self.placed {
            Label::Unplaced
        } else {
            Label::Placed
        }
    }

    pub fn both_present(&self) -> bool {
        self.placed > 0 && self.unplaced > 0
    }

    pub fn as_array(&self) -> [usize; 2] {
        [self.placed, self.unplaced]
    }
}

/// Immutable cohort: attribute schema, rows of cells and one label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    meta: DatasetMeta,
    attributes: Vec<AttributeDescriptor>,
    rows: Vec<Vec<Cell>>,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn new(
        meta: DatasetMeta,
        attributes: Vec<AttributeDescriptor>,
        rows: Vec<Vec<Cell>>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(UpmError::NoRows);
        }
        if rows.len() != labels.len() {
            return Err(UpmError::InvalidData(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut names = std::collections::HashSet::new();
        for (i, a) in attributes.iter().enumerate() {
            if a.index != i {
                return Err(UpmError::InvalidData(format!(
                    "attribute {:?} has index {} at position {}",
                    a.name, a.index, i
                )));
            }
            if !names.insert(a.name.as_str()) {
                return Err(UpmError::InvalidData(format!(
                    "duplicate attribute name {:?}",
                    a.name
                )));
            }
            if let AttributeKind::Categorical { categories } = &a.kind {
                if categories.is_empty() {
                    return Err(UpmError::InvalidData(format!(
                        "categorical attribute {:?} has no categories",
                        a.name
                    )));
                }
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != attributes.len() {
                return Err(UpmError::RaggedRow {
                    row: r + 1,
                    expected: attributes.len(),
                    got: row.len(),
                });
            }
            for (cell, a) in row.iter().zip(&attributes) {
                match (cell, &a.kind) {
                    (Cell::Missing, _) => {}
                    (Cell::Num(v), AttributeKind::Numeric) if v.is_finite() => {}
                    (Cell::Cat(c), AttributeKind::Categorical { categories })
                        if (*c as usize) < categories.len() => {}
                    _ => {
                        return Err(UpmError::InvalidData(format!(
                            "row {}: cell {:?} does not fit attribute {:?}",
                            r + 1,
                            cell,
                            a.name
                        )))
                    }
                }
            }
        }
        Ok(Dataset {
            meta,
            attributes,
            rows,
            labels,
        })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn attributes(&self) -> &[AttributeDescriptor] {
        &self.attributes
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[j])
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(Cell::is_missing)
    }

    pub fn class_distribution(&self) -> ClassCounts {
        class_distribution(self)
    }

    /// Rows `idx` (in the given order) with their labels.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        Dataset::new(
            self.meta.clone(),
            self.attributes.clone(),
            idx.iter().map(|&i| self.rows[i].clone()).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Dataset> {
        Dataset::new(
            self.meta.clone(),
            self.attributes.clone(),
            self.rows.clone(),
            labels,
        )
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Dataset {
        self.meta = meta;
        self
    }

    /// Keeps the attributes at `cols` (in that order), re-indexed from zero.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        let attributes = cols
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let mut a = self.attributes[old].clone();
                a.index = new;
                a
            })
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| cols.iter().map(|&c| r[c]).collect())
            .collect();
        Dataset::new(self.meta.clone(), attributes, rows, self.labels.clone())
    }

    /// Renders a cell the way it is written to CSV.
    pub fn render_cell(&self, j: usize, cell: &Cell) -> String {
        match (cell, &self.attributes[j].kind) {
            (Cell::Missing, _) => MISSING_TOKEN.to_string(),
            (Cell::Num(v), _) => format!("{v}"),
            (Cell::Cat(c), AttributeKind::Categorical { categories }) => {
                categories[*c as usize].clone()
            }
            (Cell::Cat(c), AttributeKind::Numeric) => format!("{c}"),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W, label_column: &str) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        let mut header: Vec<&str> = self.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(label_column);
        w.write_record(&header)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, c)| self.render_cell(j, c))
                .collect();
            rec.push(label.as_str().to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| UpmError::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| UpmError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f), label_column)
    }
}

pub fn class_distribution(ds: &Dataset) -> ClassCounts {
    ClassCounts::from_labels(ds.labels())
}

/// Per-column type hint overriding inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KindHint {
    Numeric,
    /// Categorical; with `Some`, the category list (and its order) is fixed.
    Categorical(Option<Vec<String>>),
}

/// How to read a CSV: which column holds the label and optional type hints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub label_column: String,
    pub hints: BTreeMap<String, KindHint>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            label_column: DEFAULT_LABEL_COLUMN.to_string(),
            hints: BTreeMap::new(),
        }
    }
}

impl Schema {
    pub fn with_label(label_column: impl Into<String>) -> Self {
        Schema {
            label_column: label_column.into(),
            ..Schema::default()
        }
    }

    /// Hints that pin every attribute of `ds` to its exact kind, for lossless reloads.
    pub fn from_dataset(ds: &Dataset, label_column: &str) -> Self {
        let hints = ds
            .attributes()
            .iter()
            .map(|a| {
                let h = match &a.kind {
                    AttributeKind::Numeric => KindHint::Numeric,
                    AttributeKind::Categorical { categories } => {
                        KindHint::Categorical(Some(categories.clone()))
                    }
                };
                (a.name.clone(), h)
            })
            .collect();
        Schema {
            label_column: label_column.to_string(),
            hints,
        }
    }
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s == MISSING_TOKEN
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| UpmError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(
        std::io::BufReader::new(f),
        DatasetMeta {
            name,
            source: path.display().to_string(),
        },
        schema,
    )
}

/// Parses a CSV document. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, meta: DatasetMeta, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_pos = header
        .iter()
        .position(|h| h == &schema.label_column)
        .ok_or_else(|| UpmError::MissingLabelColumn(schema.label_column.clone()))?;

    let mut raw: Vec<Vec<String>> = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(UpmError::RaggedRow {
                row: r + 1,
                expected: header.len(),
                got: rec.len(),
            });
        }
        let lab = &rec[label_pos];
        labels.push(Label::parse(lab).ok_or_else(|| UpmError::UnknownLabel(lab.to_string()))?);
        raw.push(
            rec.iter()
                .enumerate()
                .filter(|(j, _)| *j != label_pos)
                .map(|(_, s)| s.to_string())
                .collect(),
        );
    }
    if raw.is_empty() {
        return Err(UpmError::NoRows);
    }

    let names: Vec<&String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_pos)
        .map(|(_, h)| h)
        .collect();
    let mut attributes = Vec::with_capacity(names.len());
    let mut columns: Vec<Vec<Cell>> = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let values = raw.iter().map(|row| row[j].as_str());
        let (kind, cells) = infer_column(name, values, schema.hints.get(name.as_str()))?;
        attributes.push(AttributeDescriptor {
            name: (*name).clone(),
            kind,
            index: j,
        });
        columns.push(cells);
    }
    let rows = (0..raw.len())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    Dataset::new(meta, attributes, rows, labels)
}

fn infer_column<'a>(
    name: &str,
    values: impl Iterator<Item = &'a str> + Clone,
    hint: Option<&KindHint>,
) -> Result<(AttributeKind, Vec<Cell>)> {
    let numeric = match hint {
        Some(KindHint::Numeric) => true,
        Some(KindHint::Categorical(_)) => false,
        None => values
            .clone()
            .filter(|s| !is_missing_token(s))
            .all(|s| parse_number(s).is_some()),
    };
    if numeric {
        let cells = values
            .enumerate()
            .map(|(r, s)| {
                if is_missing_token(s) {
                    Ok(Cell::Missing)
                } else {
                    parse_number(s).map(Cell::Num).ok_or_else(|| {
                        UpmError::InvalidData(format!(
                            "row {}: {:?} in numeric column {:?}",
                            r + 1,
                            s,
                            name
                        ))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok((AttributeKind::Numeric, cells));
    }
    let categories: Vec<String> = match hint {
        Some(KindHint::Categorical(Some(c))) => c.clone(),
        _ => {
            let set: std::collections::BTreeSet<&str> =
                values.clone().filter(|s| !is_missing_token(s)).collect();
            set.into_iter().map(str::to_string).collect()
        }
    };
    let lookup: BTreeMap<&str, u32> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as u32))
        .collect();
    let cells = values
        .enumerate()
        .map(|(r, s)| {
            if is_missing_token(s) {
                Ok(Cell::Missing)
            } else {
                lookup.get(s).map(|&c| Cell::Cat(c)).ok_or_else(|| {
                    UpmError::InvalidData(format!(
                        "row {}: unknown category {:?} in column {:?}",
                        r + 1,
                        s,
                        name
                    ))
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let categories = if categories.is_empty() {
        // all-missing categorical column still needs one category
        vec![MISSING_TOKEN.to_string()]
    } else {
        categories
    };
    Ok((AttributeKind::Categorical { categories }, cells))
}
