//! Tabular data model: schemas, datasets with an explicit missingness mask,
//! uniform-bin discretization, complete-row filtering, and dense contingency
//! tables.
//!
//! Attribute indices are 0-based everywhere, including in serialized files.
//! Numerical attributes keep their raw values; bin indices are computed on
//! demand with `bin(v) = min(floor((v - min)/width), bins - 1)`, so `max` falls
//! in the last bin.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard against accidentally materializing huge cross-products.
pub const DEFAULT_CELL_CAP: usize = 10_000_000;

fn default_bins() -> usize {
    10
}

/// Kind and domain of a single attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Categorical {
        domain: Vec<String>,
    },
    Numerical {
        min: f64,
        max: f64,
        #[serde(default = "default_bins")]
        bins: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttrKind,
}

impl AttributeSpec {
    pub fn categorical(name: impl Into<String>, domain: &[&str]) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttrKind::Categorical {
                domain: domain.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn numerical(name: impl Into<String>, min: f64, max: f64, bins: usize) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttrKind::Numerical { min, max, bins },
        }
    }

    /// Number of discrete cells this attribute contributes to a table.
    pub fn cardinality(&self) -> usize {
        match &self.kind {
            AttrKind::Categorical { domain } => domain.len(),
            AttrKind::Numerical { bins, .. } => *bins,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("attribute with empty name".into()));
        }
        match &self.kind {
            AttrKind::Categorical { domain } => {
                if domain.is_empty() {
                    return Err(Error::Schema(format!("'{}': empty domain", self.name)));
                }
                let mut seen = std::collections::HashSet::new();
                for label in domain {
                    if !seen.insert(label.as_str()) {
                        return Err(Error::Schema(format!(
                            "'{}': duplicate label '{label}'",
                            self.name
                        )));
                    }
                }
            }
            AttrKind::Numerical { min, max, bins } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(Error::Schema(format!(
                        "'{}': numerical range requires finite min < max, got [{min}, {max}]",
                        self.name
                    )));
                }
                if *bins == 0 {
                    return Err(Error::Schema(format!("'{}': bins must be >= 1", self.name)));
                }
            }
        }
        Ok(())
    }
}

/// Ordered attribute list with unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr")]
pub struct Schema {
    attributes: Vec<AttributeSpec>,
}

#[derive(Deserialize)]
struct SchemaRepr {
    attributes: Vec<AttributeSpec>,
}

impl TryFrom<SchemaRepr> for Schema {
    type Error = Error;
    fn try_from(repr: SchemaRepr) -> Result<Self> {
        Schema::new(repr.attributes)
    }
}

impl Schema {
    pub fn new(attributes: Vec<AttributeSpec>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Schema("schema has no attributes".into()));
        }
        let mut names = std::collections::HashSet::new();
        for attr in &attributes {
            attr.validate()?;
            if !names.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate attribute name '{}'",
                    attr.name
                )));
            }
        }
        Ok(Schema { attributes })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("schema file: {e}")))
    }

    pub fn k(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    pub fn attr(&self, j: usize) -> &AttributeSpec {
        &self.attributes[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn cardinality(&self, j: usize) -> usize {
        self.attributes[j].cardinality()
    }

    /// Discretized cell index for a present cell value, `None` for `Missing`.
    pub fn cell_index(&self, j: usize, cell: Cell) -> Option<usize> {
        match (cell, &self.attributes[j].kind) {
            (Cell::Missing, _) => None,
            (Cell::Cat(l), AttrKind::Categorical { .. }) => Some(l),
            (Cell::Num(v), AttrKind::Numerical { min, max, bins }) => {
                let width = (max - min) / *bins as f64;
                let b = ((v - min) / width).floor() as usize;
                Some(b.min(bins - 1))
            }
            _ => None, // kind mismatch is rejected at construction
        }
    }

    /// Representative cell for a discretized index: the label for categorical
    /// attributes, the bin midpoint for numerical ones.
    pub fn cell_from_index(&self, j: usize, idx: usize) -> Cell {
        match &self.attributes[j].kind {
            AttrKind::Categorical { .. } => Cell::Cat(idx),
            AttrKind::Numerical { min, max, bins } => {
                let width = (max - min) / *bins as f64;
                Cell::Num(min + (idx as f64 + 0.5) * width)
            }
        }
    }
}

/// One cell of a dataset. `Missing` is the single source of truth for the
/// missingness mask: a cell is masked iff it is `Missing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Missing,
    /// Categorical label index into the attribute's domain.
    Cat(usize),
    /// Raw numerical value.
    Num(f64),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// An n-row table bound to a schema. Present cells are always valid for their
/// attribute (checked at construction and on load).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    n: usize,
    cells: Vec<Cell>, // row-major, n * k
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let k = schema.k();
        let mut cells = Vec::with_capacity(rows.len() * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Schema(format!(
                    "row {} has {} cells, schema has {k}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &cell) in row.iter().enumerate() {
                validate_cell(&schema, i, j, cell)?;
                cells.push(cell);
            }
        }
        Ok(Dataset {
            n: rows.len(),
            schema,
            cells,
        })
    }

    /// Empty dataset over a schema; rows are appended by generators.
    pub fn empty(schema: Schema) -> Self {
        Dataset {
            schema,
            n: 0,
            cells: Vec::new(),
        }
    }

    pub(crate) fn push_row(&mut self, row: &[Cell]) {
        debug_assert_eq!(row.len(), self.schema.k());
        self.cells.extend_from_slice(row);
        self.n += 1;
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.schema.k()
    }

    pub fn cell(&self, i: usize, j: usize) -> Cell {
        self.cells[i * self.schema.k() + j]
    }

    pub(crate) fn set_cell(&mut self, i: usize, j: usize, cell: Cell) {
        let k = self.schema.k();
        self.cells[i * k + j] = cell;
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.cell(i, j).is_missing()
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        let k = self.schema.k();
        &self.cells[i * k..(i + 1) * k]
    }

    /// Discretized index of cell (i, j), `None` if missing.
    pub fn cell_index(&self, i: usize, j: usize) -> Option<usize> {
        self.schema.cell_index(j, self.cell(i, j))
    }

    pub fn row_complete_on(&self, i: usize, attrs: &[usize]) -> bool {
        attrs.iter().all(|&j| !self.is_missing(i, j))
    }

    pub fn missing_count(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| self.is_missing(i, j)).count()
    }

    pub fn total_missing(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
    }

    pub fn has_missing(&self) -> bool {
        self.cells.iter().any(|c| c.is_missing())
    }

    fn check_attrs(&self, attrs: &[usize]) -> Result<()> {
        let k = self.schema.k();
        let mut seen = std::collections::HashSet::new();
        for &a in attrs {
            if a >= k {
                return Err(Error::invalid(format!(
                    "attribute index {a} out of range (k = {k})"
                )));
            }
            if !seen.insert(a) {
                return Err(Error::invalid(format!("duplicate attribute index {a}")));
            }
        }
        Ok(())
    }

    /// Rows with no missing cell on any of `attrs`, in original order.
    pub fn complete_rows(&self, attrs: &[usize]) -> Result<Dataset> {
        self.check_attrs(attrs)?;
        let k = self.schema.k();
        let mut cells = Vec::new();
        let mut n = 0;
        for i in 0..self.n {
            if self.row_complete_on(i, attrs) {
                cells.extend_from_slice(&self.cells[i * k..(i + 1) * k]);
                n += 1;
            }
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            n,
            cells,
        })
    }

    pub fn all_attrs(&self) -> Vec<usize> {
        (0..self.schema.k()).collect()
    }

    /// Dense contingency table over `attrs`, counting only rows complete on
    /// `attrs`. See [`Dataset::marginal_capped`].
    pub fn marginal(&self, attrs: &[usize]) -> Result<ContingencyTable> {
        self.marginal_capped(attrs, DEFAULT_CELL_CAP)
    }

    pub fn marginal_capped(&self, attrs: &[usize], cap: usize) -> Result<ContingencyTable> {
        if attrs.is_empty() {
            return Err(Error::invalid("marginal over an empty attribute set"));
        }
        self.check_attrs(attrs)?;
        let cards: Vec<usize> = attrs.iter().map(|&a| self.schema.cardinality(a)).collect();
        let mut size: usize = 1;
        for &c in &cards {
            size = size.checked_mul(c).unwrap_or(usize::MAX);
            if size > cap {
                return Err(Error::invalid(format!(
                    "contingency table over attributes {attrs:?} exceeds the cell cap {cap}"
                )));
            }
        }
        let strides = strides_of(&cards);
        let mut counts = vec![0.0f64; size];
        let mut observed_rows = 0usize;
        'rows: for i in 0..self.n {
            let mut idx = 0usize;
            for (pos, &a) in attrs.iter().enumerate() {
                match self.cell_index(i, a) {
                    Some(c) => idx += c * strides[pos],
                    None => continue 'rows,
                }
            }
            counts[idx] += 1.0;
            observed_rows += 1;
        }
        Ok(ContingencyTable {
            attribute_set: attrs.to_vec(),
            cards,
            counts,
            observed_rows,
        })
    }

    /// Empirical mutual information I(X; Psi) in bits over rows complete on
    /// `{x} ∪ parents`, with 0·log 0 := 0. Returns 0 when no row is complete.
    pub fn mutual_information(&self, x: usize, parents: &[usize]) -> Result<f64> {
        if parents.is_empty() {
            return Err(Error::invalid("mutual information needs a parent set"));
        }
        if parents.contains(&x) {
            return Err(Error::invalid("attribute cannot be its own parent"));
        }
        let mut attrs = Vec::with_capacity(1 + parents.len());
        attrs.push(x);
        attrs.extend_from_slice(parents);
        let table = self.marginal(&attrs)?;
        Ok(mutual_information_of(&table))
    }
}

/// I(X; rest) in bits from a table with X at coordinate 0, with 0·log 0 := 0.
/// Returns 0 for an empty table.
pub(crate) fn mutual_information_of(table: &ContingencyTable) -> f64 {
    if table.observed_rows == 0 {
        return 0.0;
    }
    let n = table.observed_rows as f64;
    let card_x = table.cards[0];
    let psi_size = table.counts.len() / card_x;
    let mut px = vec![0.0f64; card_x];
    let mut ppsi = vec![0.0f64; psi_size];
    for (idx, &c) in table.counts.iter().enumerate() {
        px[idx / psi_size] += c / n;
        ppsi[idx % psi_size] += c / n;
    }
    let mut mi = 0.0;
    for (idx, &c) in table.counts.iter().enumerate() {
        if c > 0.0 {
            let p = c / n;
            mi += p * (p / (px[idx / psi_size] * ppsi[idx % psi_size])).log2();
        }
    }
    mi
}

fn validate_cell(schema: &Schema, i: usize, j: usize, cell: Cell) -> Result<()> {
    let attr = schema.attr(j);
    match (cell, &attr.kind) {
        (Cell::Missing, _) => Ok(()),
        (Cell::Cat(l), AttrKind::Categorical { domain }) => {
            if l < domain.len() {
                Ok(())
            } else {
                Err(Error::Schema(format!(
                    "row {}: label index {l} out of domain for '{}'",
                    i + 1,
                    attr.name
                )))
            }
        }
        (Cell::Num(v), AttrKind::Numerical { min, max, .. }) => {
            if v.is_finite() && v >= *min && v <= *max {
                Ok(())
            } else {
                Err(Error::Schema(format!(
                    "row {}: value {v} outside [{min}, {max}] for '{}'",
                    i + 1,
                    attr.name
                )))
            }
        }
        _ => Err(Error::Schema(format!(
            "row {}: cell kind does not match attribute '{}'",
            i + 1,
            attr.name
        ))),
    }
}

fn strides_of(cards: &[usize]) -> Vec<usize> {
    // Last attribute varies fastest.
    let mut strides = vec![1usize; cards.len()];
    for pos in (0..cards.len().saturating_sub(1)).rev() {
        strides[pos] = strides[pos + 1] * cards[pos + 1];
    }
    strides
}

/// Dense counts over the cross-product of discretized domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub attribute_set: Vec<usize>,
    pub cards: Vec<usize>,
    /// Raw counts; sums to `observed_rows`.
    pub counts: Vec<f64>,
    pub observed_rows: usize,
}

impl ContingencyTable {
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.cards)
    }

    pub fn index_of(&self, coords: &[usize]) -> usize {
        let strides = self.strides();
        coords
            .iter()
            .zip(strides.iter())
            .map(|(&c, &s)| c * s)
            .sum()
    }

    pub fn coords_of(&self, mut idx: usize) -> Vec<usize> {
        let strides = self.strides();
        strides
            .iter()
            .map(|&s| {
                let c = idx / s;
                idx %= s;
                c
            })
            .collect()
    }

    /// Probabilities summing to 1; all zeros when no row was observed.
    pub fn normalized(&self) -> Vec<f64> {
        if self.observed_rows == 0 {
            return vec![0.0; self.counts.len()];
        }
        let n = self.observed_rows as f64;
        self.counts.iter().map(|&c| c / n).collect()
    }

    /// Sum out every axis not listed in `keep` (positions into
    /// `attribute_set`); `observed_rows` is carried through unchanged.
    pub fn collapse(&self, keep: &[usize]) -> ContingencyTable {
        let cards: Vec<usize> = keep.iter().map(|&p| self.cards[p]).collect();
        let size = cards.iter().product();
        let strides = strides_of(&cards);
        let mut counts = vec![0.0f64; size];
        for (idx, &c) in self.counts.iter().enumerate() {
            let coords = self.coords_of(idx);
            let out: usize = keep
                .iter()
                .zip(strides.iter())
                .map(|(&p, &s)| coords[p] * s)
                .sum();
            counts[out] += c;
        }
        ContingencyTable {
            attribute_set: keep.iter().map(|&p| self.attribute_set[p]).collect(),
            cards,
            counts,
            observed_rows: self.observed_rows,
        }
    }
}

/// Load a CSV file against a mandatory schema. Fields equal to
/// `missing_token` (or empty) become `Missing`; everything else must parse for
/// its attribute. Whitespace around fields is trimmed.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, missing_token: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .clone();
    let names: Vec<&str> = schema.attributes().iter().map(|a| a.name.as_str()).collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != names {
        return Err(Error::Schema(format!(
            "header {got:?} does not match schema attributes {names:?}"
        )));
    }

    let label_maps: Vec<Option<HashMap<&str, usize>>> = schema
        .attributes()
        .iter()
        .map(|a| match &a.kind {
            AttrKind::Categorical { domain } => Some(
                domain
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i))
                    .collect(),
            ),
            AttrKind::Numerical { .. } => None,
        })
        .collect();

    let mut rows: Vec<Vec<Cell>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| Error::CsvData {
            row: row_no,
            column: "?".into(),
            message: e.to_string(),
        })?;
        if record.len() != schema.k() {
            return Err(Error::CsvData {
                row: row_no,
                column: "?".into(),
                message: format!("{} fields, schema has {}", record.len(), schema.k()),
            });
        }
        let mut row = Vec::with_capacity(schema.k());
        for (j, field) in record.iter().enumerate() {
            let attr = schema.attr(j);
            let cell = if field.is_empty() || field == missing_token {
                Cell::Missing
            } else {
                match (&attr.kind, &label_maps[j]) {
                    (AttrKind::Categorical { .. }, Some(map)) => match map.get(field) {
                        Some(&l) => Cell::Cat(l),
                        None => {
                            return Err(Error::CsvData {
                                row: row_no,
                                column: attr.name.clone(),
                                message: format!("unknown label '{field}'"),
                            })
                        }
                    },
                    (AttrKind::Numerical { min, max, .. }, _) => {
                        let v: f64 = field.parse().map_err(|_| Error::CsvData {
                            row: row_no,
                            column: attr.name.clone(),
                            message: format!("'{field}' is not numeric"),
                        })?;
                        if !(v.is_finite() && v >= *min && v <= *max) {
                            return Err(Error::CsvData {
                                row: row_no,
                                column: attr.name.clone(),
                                message: format!("value {v} outside [{min}, {max}]"),
                            });
                        }
                        Cell::Num(v)
                    }
                    _ => unreachable!(),
                }
            };
            row.push(cell);
        }
        rows.push(row);
    }
    Dataset::new(schema.clone(), rows)
}

/// Write a dataset as CSV, rendering missing cells as `missing_token`.
pub fn save_csv(d: &Dataset, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let names: Vec<&str> = d
        .schema()
        .attributes()
        .iter()
        .map(|a| a.name.as_str())
        .collect();
    writer
        .write_record(&names)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for i in 0..d.n() {
        let mut record = Vec::with_capacity(d.k());
        for j in 0..d.k() {
            let field = match d.cell(i, j) {
                Cell::Missing => missing_token.to_string(),
                Cell::Cat(l) => match &d.schema().attr(j).kind {
                    AttrKind::Categorical { domain } => domain[l].clone(),
                    _ => unreachable!(),
                },
                Cell::Num(v) => format!("{v}"),
            };
            record.push(field);
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    writer.flush()?;
    Ok(())
}

/// Write the missingness mask as a 0/1 CSV with the same header.
pub fn save_mask(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let names: Vec<&str> = d
        .schema()
        .attributes()
        .iter()
        .map(|a| a.name.as_str())
        .collect();
    writer
        .write_record(&names)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for i in 0..d.n() {
        let record: Vec<&str> = (0..d.k())
            .map(|j| if d.is_missing(i, j) { "1" } else { "0" })
            .collect();
        writer
            .write_record(&record)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn bin_schema(k: usize) -> Schema {
        let attrs = (0..k)
            .map(|j| AttributeSpec::categorical(format!("a{j}"), &["0", "1"]))
            .collect();
        Schema::new(attrs).unwrap()
    }

    #[test]
    fn schema_rejects_duplicate_labels() {
        let err = Schema::new(vec![AttributeSpec::categorical("x", &["a", "a"])]).unwrap_err();
        assert!(err.to_string().contains("duplicate label"));
    }

    #[test]
    fn schema_rejects_duplicate_names() {
        let attrs = vec![
            AttributeSpec::categorical("x", &["a"]),
            AttributeSpec::categorical("x", &["b"]),
        ];
        assert!(Schema::new(attrs).is_err());
    }

    #[test]
    fn schema_rejects_bad_ranges() {
        assert!(Schema::new(vec![AttributeSpec::numerical("x", 5.0, 5.0, 10)]).is_err());
        assert!(Schema::new(vec![AttributeSpec::numerical("x", 0.0, 1.0, 0)]).is_err());
        assert!(Schema::new(vec![AttributeSpec::categorical("x", &[])]).is_err());
    }

    #[test]
    fn discretization_is_stable_at_the_edges() {
        let schema = Schema::new(vec![AttributeSpec::numerical("v", 0.0, 10.0, 10)]).unwrap();
        assert_eq!(schema.cell_index(0, Cell::Num(0.0)), Some(0));
        assert_eq!(schema.cell_index(0, Cell::Num(9.999)), Some(9));
        // max maps into the last bin, not one past it
        assert_eq!(schema.cell_index(0, Cell::Num(10.0)), Some(9));
        assert_eq!(schema.cell_index(0, Cell::Num(0.999)), Some(0));
        assert_eq!(schema.cell_index(0, Cell::Num(1.0)), Some(1));
    }

    #[test]
    fn bin_midpoints_round_trip() {
        let schema = Schema::new(vec![AttributeSpec::numerical("v", -3.0, 7.0, 13)]).unwrap();
        for b in 0..13 {
            let cell = schema.cell_from_index(0, b);
            assert_eq!(schema.cell_index(0, cell), Some(b));
        }
    }

    #[test]
    fn complete_rows_identity_and_subsets() {
        let schema = bin_schema(3);
        let rows = vec![
            vec![Cell::Cat(0), Cell::Cat(1), Cell::Cat(0)],
            vec![Cell::Cat(1), Cell::Cat(0), Cell::Missing],
        ];
        let d = Dataset::new(schema, rows).unwrap();
        assert_eq!(d.complete_rows(&d.all_attrs()).unwrap().n(), 1);
        // row 2 is missing only attribute 2; it survives filtering on {0, 1}
        assert_eq!(d.complete_rows(&[0, 1]).unwrap().n(), 2);
        let all = Dataset::new(bin_schema(3), vec![vec![Cell::Cat(0); 3]; 4]).unwrap();
        assert_eq!(all.complete_rows(&all.all_attrs()).unwrap(), all);
    }

    #[test]
    fn marginal_hand_counts() {
        let schema = bin_schema(1);
        let rows = vec![
            vec![Cell::Cat(0)],
            vec![Cell::Cat(1)],
            vec![Cell::Cat(1)],
            vec![Cell::Missing],
        ];
        let d = Dataset::new(schema, rows).unwrap();
        let t = d.marginal(&[0]).unwrap();
        assert_eq!(t.counts, vec![1.0, 2.0]);
        assert_eq!(t.observed_rows, 3);
    }

    #[test]
    fn marginal_fully_crossed() {
        let schema = bin_schema(2);
        let rows = vec![
            vec![Cell::Cat(0), Cell::Cat(0)],
            vec![Cell::Cat(0), Cell::Cat(1)],
            vec![Cell::Cat(1), Cell::Cat(0)],
            vec![Cell::Cat(1), Cell::Cat(1)],
        ];
        let d = Dataset::new(schema, rows).unwrap();
        let t = d.marginal(&[0, 1]).unwrap();
        assert_eq!(t.counts, vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn marginal_rejects_bad_attribute_sets() {
        let d = Dataset::new(bin_schema(2), vec![vec![Cell::Cat(0), Cell::Cat(0)]]).unwrap();
        assert!(d.marginal(&[]).is_err());
        assert!(d.marginal(&[0, 0]).is_err());
        assert!(d.marginal(&[5]).is_err());
    }

    #[test]
    fn marginal_cell_cap_names_the_set() {
        let schema = Schema::new(vec![
            AttributeSpec::numerical("a", 0.0, 1.0, 4000),
            AttributeSpec::numerical("b", 0.0, 1.0, 4000),
        ])
        .unwrap();
        let d = Dataset::new(schema, vec![]).unwrap();
        let err = d.marginal_capped(&[0, 1], 1_000_000).unwrap_err();
        assert!(err.to_string().contains("[0, 1]"));
    }

    fn random_dataset(seed: u64, n: usize, cards: &[usize], missing_p: f64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let attrs = cards
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let labels: Vec<String> = (0..c).map(|l| format!("v{l}")).collect();
                let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
                AttributeSpec::categorical(format!("a{j}"), &refs)
            })
            .collect();
        let schema = Schema::new(attrs).unwrap();
        let rows = (0..n)
            .map(|_| {
                (0..cards.len())
                    .map(|j| {
                        if rng.gen_bool(missing_p) {
                            Cell::Missing
                        } else {
                            Cell::Cat(rng.gen_range(0..cards[j]))
                        }
                    })
                    .collect()
            })
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn marginal_matches_brute_force_row_scan() {
        let d = random_dataset(7, 500, &[3, 2, 4, 2, 3, 2], 0.15);
        let attrs = [2usize, 5];
        let t = d.marginal(&attrs).unwrap();
        // independent oracle: scan rows into a coordinate map
        let mut oracle: HashMap<(usize, usize), f64> = HashMap::new();
        let mut observed = 0usize;
        for i in 0..d.n() {
            if let (Some(a), Some(b)) = (d.cell_index(i, 2), d.cell_index(i, 5)) {
                *oracle.entry((a, b)).or_default() += 1.0;
                observed += 1;
            }
        }
        assert_eq!(t.observed_rows, observed);
        for ((a, b), c) in oracle {
            assert_eq!(t.counts[t.index_of(&[a, b])], c);
        }
        assert_eq!(t.counts.iter().sum::<f64>(), observed as f64);
    }

    #[test]
    fn observed_rows_matches_complete_row_filter() {
        let d = random_dataset(11, 400, &[2, 3, 2, 2], 0.2);
        for attrs in [vec![0], vec![1, 3], vec![0, 1, 2, 3]] {
            let t = d.marginal(&attrs).unwrap();
            assert_eq!(t.observed_rows, d.complete_rows(&attrs).unwrap().n());
        }
    }

    #[test]
    fn collapse_is_consistent_on_complete_data() {
        let d = random_dataset(13, 300, &[3, 4, 2], 0.0);
        let joint = d.marginal(&[0, 1]).unwrap();
        let x_only = d.marginal(&[0]).unwrap();
        let collapsed = joint.collapse(&[0]);
        assert_eq!(collapsed.counts, x_only.counts);
        assert_eq!(collapsed.attribute_set, vec![0]);
    }

    #[test]
    fn mutual_information_perfect_dependence() {
        let schema = bin_schema(2);
        let rows = vec![
            vec![Cell::Cat(0), Cell::Cat(0)],
            vec![Cell::Cat(0), Cell::Cat(0)],
            vec![Cell::Cat(1), Cell::Cat(1)],
            vec![Cell::Cat(1), Cell::Cat(1)],
        ];
        let d = Dataset::new(schema, rows).unwrap();
        assert!((d.mutual_information(0, &[1]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_independence() {
        let schema = bin_schema(2);
        let rows = vec![
            vec![Cell::Cat(0), Cell::Cat(0)],
            vec![Cell::Cat(0), Cell::Cat(1)],
            vec![Cell::Cat(1), Cell::Cat(0)],
            vec![Cell::Cat(1), Cell::Cat(1)],
        ];
        let d = Dataset::new(schema, rows).unwrap();
        assert!(d.mutual_information(0, &[1]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mutual_information_matches_definitional_sum() {
        let d = random_dataset(17, 600, &[3, 2, 4], 0.1);
        let got = d.mutual_information(0, &[1, 2]).unwrap();
        // oracle: empirical probabilities straight from a row scan
        let mut joint: HashMap<(usize, usize, usize), f64> = HashMap::new();
        let mut px: HashMap<usize, f64> = HashMap::new();
        let mut ppsi: HashMap<(usize, usize), f64> = HashMap::new();
        let mut n = 0.0;
        for i in 0..d.n() {
            if let (Some(a), Some(b), Some(c)) = (
                d.cell_index(i, 0),
                d.cell_index(i, 1),
                d.cell_index(i, 2),
            ) {
                *joint.entry((a, b, c)).or_default() += 1.0;
                n += 1.0;
            }
        }
        for (&(a, b, c), v) in &joint {
            *px.entry(a).or_default() += v / n;
            *ppsi.entry((b, c)).or_default() += v / n;
        }
        let mut want = 0.0;
        for (&(a, b, c), v) in &joint {
            let p = v / n;
            want += p * (p / (px[&a] * ppsi[&(b, c)])).log2();
        }
        assert!((got - want).abs() < 1e-12, "got {got}, oracle {want}");
    }

    #[test]
    fn mutual_information_zero_observed_rows() {
        let schema = bin_schema(2);
        let rows = vec![vec![Cell::Missing, Cell::Cat(0)]; 5];
        let d = Dataset::new(schema, rows).unwrap();
        assert_eq!(d.mutual_information(0, &[1]).unwrap(), 0.0);
    }

    #[test]
    fn mutual_information_argument_checks() {
        let d = Dataset::new(bin_schema(2), vec![vec![Cell::Cat(0), Cell::Cat(0)]]).unwrap();
        assert!(d.mutual_information(0, &[]).is_err());
        assert!(d.mutual_information(0, &[0]).is_err());
    }

    proptest! {
        #[test]
        fn mi_is_symmetric_for_single_parents(seed in 0u64..50) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = 200 + (seed as usize % 100);
            let d = random_dataset(seed.wrapping_mul(31).wrapping_add(5), n, &[3, 4], 0.1 * (seed % 3) as f64);
            let _ = &mut rng;
            let a = d.mutual_information(0, &[1]).unwrap();
            let b = d.mutual_information(1, &[0]).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
