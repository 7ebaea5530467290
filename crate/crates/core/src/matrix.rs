//! Dense similarity and comparability matrices, the similarity induced by a
//! comparability mapping, and the linear native/induced mixing model.
//!
//! Both matrix kinds are stored dense and row-major. A [`SimilarityMatrix`] is
//! always exactly symmetric: constructors fill the upper triangle and mirror it.

use std::io::{Read, Write};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square symmetric matrix over one ordered set of documents.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix by evaluating `f(i, j)` for `i <= j` and mirroring.
    ///
    /// Rows are evaluated in parallel; each cell depends only on `f`, so the
    /// result does not depend on the thread count.
    pub fn from_upper<F>(ids: Vec<String>, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let n = ids.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| f(i, j)).collect())
            .collect();
        let mut values = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            for (offset, v) in row.into_iter().enumerate() {
                let j = i + offset;
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite similarity {v} at ({i}, {j})")));
                }
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(SimilarityMatrix { ids, values })
    }

    /// Wraps row-major values, checking shape, finiteness and exact symmetry.
    pub fn from_values(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                left: "ids".into(),
                left_dims: format!("{n}"),
                right: "values".into(),
                right_dims: format!("{}", values.len()),
            });
        }
        for i in 0..n {
            for j in i..n {
                let a = values[i * n + j];
                if !a.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite similarity {a} at ({i}, {j})")));
                }
                if a.to_bits() != values[j * n + i].to_bits() {
                    return Err(Error::InvalidInput(format!(
                        "similarity matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { ids, values })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Restricts the matrix to the given document indices, in that order.
    pub fn submatrix(&self, indices: &[usize]) -> SimilarityMatrix {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let mut values = Vec::with_capacity(indices.len() * indices.len());
        for &i in indices {
            for &j in indices {
                values.push(self.get(i, j));
            }
        }
        SimilarityMatrix { ids, values }
    }

    /// Smallest and largest entry.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        value_range(&self.values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_labeled_csv(writer, &self.ids, &self.ids, &self.values)
    }

    pub fn read_csv<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let table = read_labeled_csv(reader, source_name)?;
        if table.row_ids != table.col_ids {
            return Err(Error::parse(
                source_name,
                1,
                "similarity matrix must have identical row and column ids",
            ));
        }
        SimilarityMatrix::from_values(table.row_ids, table.values).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::parse(source_name, 1, msg),
            other => other,
        })
    }
}

/// Rectangular matrix linking row documents of one language to column
/// documents of the other.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparabilityMatrix {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    values: Vec<f64>,
}

impl ComparabilityMatrix {
    pub fn from_values(row_ids: Vec<String>, col_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != row_ids.len() * col_ids.len() {
            return Err(Error::DimensionMismatch {
                left: "ids".into(),
                left_dims: format!("{}x{}", row_ids.len(), col_ids.len()),
                right: "values".into(),
                right_dims: format!("{}", values.len()),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite comparability at ({}, {})",
                pos / col_ids.len(),
                pos % col_ids.len()
            )));
        }
        Ok(ComparabilityMatrix {
            row_ids,
            col_ids,
            values,
        })
    }

    /// Convenience constructor with generated ids `r0..` and `c0..`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidInput("ragged comparability rows".into()));
        }
        ComparabilityMatrix::from_values(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            (0..ncols).map(|j| format!("c{j}")).collect(),
            rows.concat(),
        )
    }

    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.col_ids.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.col_ids.len() + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.col_ids.len();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transpose(&self) -> ComparabilityMatrix {
        let (r, c) = (self.rows(), self.cols());
        let mut values = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                values[j * r + i] = self.values[i * c + j];
            }
        }
        ComparabilityMatrix {
            row_ids: self.col_ids.clone(),
            col_ids: self.row_ids.clone(),
            values,
        }
    }

    pub fn value_range(&self) -> Option<(f64, f64)> {
        value_range(&self.values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_labeled_csv(writer, &self.row_ids, &self.col_ids, &self.values)
    }

    pub fn read_csv<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let table = read_labeled_csv(reader, source_name)?;
        ComparabilityMatrix::from_values(table.row_ids, table.col_ids, table.values)
    }
}

/// Weight of the induced similarity in the mixing model, within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MixParameter(f64);

impl MixParameter {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && (0.0..=1.0).contains(&alpha) {
            Ok(MixParameter(alpha))
        } else {
            Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MixParameter {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        MixParameter::new(alpha)
    }
}

impl From<MixParameter> for f64 {
    fn from(alpha: MixParameter) -> f64 {
        alpha.0
    }
}

/// Upper-triangle Gram product `C·Cᵀ`, returned as a full row-major matrix.
///
/// Each cell is a sequential dot product, so the result is independent of how
/// rows are scheduled across threads.
pub fn gram_rows(c: &ComparabilityMatrix) -> Vec<f64> {
    let n = c.rows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = c.row(i);
            (i..n).map(|j| dot(ri, c.row(j))).collect()
        })
        .collect();
    let mut g = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + offset;
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Similarity between row documents induced by their comparability profiles:
/// the cosine between rows of `c`.
///
/// A row of zeros has no direction; it gets self-similarity 1 and similarity 0
/// to every other row, and a warning is logged.
pub fn induced_similarity_rows(c: &ComparabilityMatrix) -> Result<SimilarityMatrix> {
    if c.rows() == 0 || c.cols() == 0 {
        return Err(Error::InvalidInput(format!(
            "comparability matrix must be non-empty, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    let n = c.rows();
    let g = gram_rows(c);
    let squared: Vec<f64> = (0..n).map(|i| g[i * n + i]).collect();
    let zero: Vec<&str> = (0..n)
        .filter(|&i| squared[i] == 0.0)
        .map(|i| c.row_ids()[i].as_str())
        .collect();
    if !zero.is_empty() {
        warn!(
            "{} document(s) with an all-zero comparability profile: {}",
            zero.len(),
            zero.join(", ")
        );
    }
    SimilarityMatrix::from_upper(c.row_ids().to_vec(), |i, j| {
        if i == j {
            1.0
        } else if squared[i] == 0.0 || squared[j] == 0.0 {
            0.0
        } else {
            (g[i * n + j] / (squared[i] * squared[j]).sqrt()).clamp(-1.0, 1.0)
        }
    })
}

/// Similarity between column documents induced by `c`; equal to
/// [`induced_similarity_rows`] on the transpose.
pub fn induced_similarity_cols(c: &ComparabilityMatrix) -> Result<SimilarityMatrix> {
    induced_similarity_rows(&c.transpose())
}

/// `alpha · induced + (1 − alpha) · native`, cell by cell.
pub fn mix(native: &SimilarityMatrix, induced: &SimilarityMatrix, alpha: MixParameter) -> Result<SimilarityMatrix> {
    if native.len() != induced.len() {
        return Err(Error::DimensionMismatch {
            left: "native".into(),
            left_dims: format!("{0}x{0}", native.len()),
            right: "induced".into(),
            right_dims: format!("{0}x{0}", induced.len()),
        });
    }
    if let Some(index) = native.ids.iter().zip(&induced.ids).position(|(a, b)| a != b) {
        return Err(Error::IdMismatch {
            index,
            left: "native".into(),
            left_id: native.ids[index].clone(),
            right: "induced".into(),
            right_id: induced.ids[index].clone(),
        });
    }
    let a = alpha.value();
    let b = 1.0 - a;
    let values = native
        .values
        .iter()
        .zip(&induced.values)
        .map(|(&nat, &ind)| a * ind + b * nat)
        .collect();
    Ok(SimilarityMatrix {
        ids: native.ids.clone(),
        values,
    })
}

fn value_range(values: &[f64]) -> Option<(f64, f64)> {
    values.iter().fold(None, |acc, &v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

struct LabeledTable {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    values: Vec<f64>,
}

/// Formats a cell with 17 significant digits, enough to round-trip any f64.
pub(crate) fn format_cell(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_labeled_csv<W: Write>(writer: W, row_ids: &[String], col_ids: &[String], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(col_ids.len() + 1);
    header.push("id".to_string());
    header.extend(col_ids.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    let ncols = col_ids.len();
    for (i, id) in row_ids.iter().enumerate() {
        let mut record = Vec::with_capacity(ncols + 1);
        record.push(id.clone());
        record.extend(values[i * ncols..(i + 1) * ncols].iter().map(|&v| format_cell(v)));
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn read_labeled_csv<R: Read>(reader: R, source_name: &str) -> Result<LabeledTable> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = r.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_parse_error(source_name, e))?,
        None => return Err(Error::parse(source_name, 1, "empty matrix file")),
    };
    let col_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_parse_error(source_name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != col_ids.len() + 1 {
            return Err(Error::parse(
                source_name,
                line,
                format!("expected {} fields, found {}", col_ids.len() + 1, rec.len()),
            ));
        }
        row_ids.push(rec[0].to_string());
        for (k, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(source_name, line, format!("column {}: not a number: {field:?}", k + 2)))?;
            if !v.is_finite() {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("column {}: non-finite value", k + 2),
                ));
            }
            values.push(v);
        }
    }
    Ok(LabeledTable {
        row_ids,
        col_ids,
        values,
    })
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

pub(crate) fn csv_parse_error(source_name: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::parse(source_name, line, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_gram(c: &ComparabilityMatrix) -> Vec<f64> {
        let n = c.rows();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..c.cols() {
                    s += c.get(i, k) * c.get(j, k);
                }
                g[i * n + j] = s;
            }
        }
        g
    }

    #[test]
    fn orthogonal_rows_have_zero_induced_similarity() {
        let c = ComparabilityMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(induced_similarity_rows(&c).unwrap().get(0, 1), 0.0);
        assert_eq!(induced_similarity_cols(&c).unwrap().get(0, 1), 0.0);
    }

    #[test]
    fn identical_rows_have_unit_induced_similarity() {
        let c = ComparabilityMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(induced_similarity_rows(&c).unwrap().get(0, 1), 1.0);
    }

    #[test]
    fn induced_rows_small_example() {
        let c = ComparabilityMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 1.0]]).unwrap();
        let g = naive_gram(&c);
        assert_eq!(g, vec![5.0, 10.0, 10.0, 21.0]);
        let s = induced_similarity_rows(&c).unwrap();
        assert!((s.get(0, 1) - 10.0 / 105f64.sqrt()).abs() < 1e-12);
        assert!((s.get(0, 1) - 0.9759).abs() < 1e-4);
        assert_eq!(s.get(0, 0), 1.0);
    }

    #[test]
    fn induced_cols_small_example() {
        let c = ComparabilityMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 1.0]]).unwrap();
        let s = induced_similarity_cols(&c).unwrap();
        assert_eq!(s.len(), 3);
        assert!((s.get(0, 1) - 1.0).abs() < 1e-12);
        let t = induced_similarity_rows(&c.transpose()).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn zero_row_gets_unit_diagonal_and_zero_off_diagonal() {
        let c = ComparabilityMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let s = induced_similarity_rows(&c).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(2, 0), 0.0);
        assert!(s.get(1, 2) > 0.0);
    }

    #[test]
    fn empty_comparability_is_rejected() {
        let c = ComparabilityMatrix::from_values(vec![], vec!["x".into()], vec![]).unwrap();
        assert!(induced_similarity_rows(&c).is_err());
    }

    fn sim(values: &[f64], n: usize) -> SimilarityMatrix {
        SimilarityMatrix::from_values((0..n).map(|i| format!("d{i}")).collect(), values.to_vec()).unwrap()
    }

    #[test]
    fn mix_endpoints_and_arithmetic() {
        let native = sim(&[1.0, 0.2, 0.2, 1.0], 2);
        let induced = sim(&[1.0, 0.8, 0.8, 1.0], 2);
        let m0 = mix(&native, &induced, MixParameter::new(0.0).unwrap()).unwrap();
        let m1 = mix(&native, &induced, MixParameter::new(1.0).unwrap()).unwrap();
        assert_eq!(m0, native);
        assert_eq!(m1, induced);
        let m = mix(&native, &induced, MixParameter::new(0.75).unwrap()).unwrap();
        assert!((m.get(0, 1) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn mix_rejects_mismatched_operands() {
        let a = sim(&[1.0, 0.2, 0.2, 1.0], 2);
        let b = SimilarityMatrix::from_values(vec!["d0".into(), "zz".into()], vec![1.0, 0.2, 0.2, 1.0]).unwrap();
        let err = mix(&a, &b, MixParameter::new(0.5).unwrap()).unwrap_err();
        assert!(err.to_string().contains("native") && err.to_string().contains("induced"));
        let c = sim(&[1.0], 1);
        assert!(matches!(
            mix(&a, &c, MixParameter::new(0.5).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mix_parameter_bounds() {
        assert!(MixParameter::new(-0.01).is_err());
        assert!(MixParameter::new(1.01).is_err());
        assert!(MixParameter::new(f64::NAN).is_err());
        assert!(MixParameter::new(0.0).is_ok());
    }

    #[test]
    fn asymmetric_values_are_rejected() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(SimilarityMatrix::from_values(ids, vec![1.0, 0.3, 0.2, 1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = ComparabilityMatrix::from_rows(&[vec![0.1, 1.0 / 3.0, -2.5e-7], vec![1e10, 0.0, 7.0]]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = ComparabilityMatrix::read_csv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, c);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,c0,c1,c2\nr0,"));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "id,a,b\na,1,0.5\nb,0.5,oops\n";
        let err = SimilarityMatrix::read_csv(text.as_bytes(), "m.csv").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    fn comparability_strategy() -> impl Strategy<Value = ComparabilityMatrix> {
        (1usize..=10, 1usize..=10).prop_flat_map(|(r, c)| {
            prop::collection::vec(-5.0f64..5.0, r * c).prop_map(move |v| {
                ComparabilityMatrix::from_values(
                    (0..r).map(|i| format!("r{i}")).collect(),
                    (0..c).map(|j| format!("c{j}")).collect(),
                    v,
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn gram_matches_naive_triple_loop(c in comparability_strategy()) {
            let fast = gram_rows(&c);
            let slow = naive_gram(&c);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn induced_is_symmetric_bounded_and_scale_invariant(
            c in comparability_strategy(),
            row in 0usize..10,
            scale in 0.01f64..100.0,
        ) {
            let s = induced_similarity_rows(&c).unwrap();
            let n = s.len();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(s.get(i, j).to_bits(), s.get(j, i).to_bits());
                    prop_assert!((-1.0..=1.0).contains(&s.get(i, j)));
                }
                prop_assert_eq!(s.get(i, i), 1.0);
            }
            let row = row % c.rows();
            let mut values = c.values().to_vec();
            for v in &mut values[row * c.cols()..(row + 1) * c.cols()] {
                *v *= scale;
            }
            let scaled = ComparabilityMatrix::from_values(c.row_ids().to_vec(), c.col_ids().to_vec(), values).unwrap();
            let t = induced_similarity_rows(&scaled).unwrap();
            for (a, b) in s.values().iter().zip(t.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn mix_preserves_symmetry_and_bounds(
            c1 in comparability_strategy(),
            seed_cols in prop::collection::vec(-1.0f64..1.0, 1..=10),
            alpha in 0.0f64..=1.0,
        ) {
            let induced = induced_similarity_rows(&c1).unwrap();
            let n = induced.len();
            let native = SimilarityMatrix::from_upper(induced.ids().to_vec(), |i, j| {
                if i == j { 1.0 } else { seed_cols[(i * 7 + j) % seed_cols.len()] }
            }).unwrap();
            let m = mix(&native, &induced, MixParameter::new(alpha).unwrap()).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(m.get(i, j).to_bits(), m.get(j, i).to_bits());
                    prop_assert!((-1.0..=1.0).contains(&m.get(i, j)));
                }
            }
        }
    }
}
