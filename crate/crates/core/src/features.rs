//! Assembly of the two clustering views and their standardization.
//!
//! The spatiotemporal view is 8 columns (motif one-hot 5, ROG, LFER, DCFR);
//! the semantic view is `dim + 2` columns (mean semantic vector, unique-tag
//! count, max semantic distance). Rows are aligned across views. Continuous
//! columns are z-scored so kilometer-scale ROG cannot drown the unit-scale
//! spectral ratios in Euclidean distance; one-hot columns pass through.

use std::io::{BufRead, Write};

use crate::error::Error;
use crate::semantics::SemanticFeatures;
use crate::spatial::MotifFeature;
use crate::temporal::TemporalFeature;
use crate::Result;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols));
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    /// Write one delimited row per matrix row.
    pub fn write<W: Write>(&self, mut writer: W, delimiter: char) -> Result<()> {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{}", row.join(&delimiter.to_string()))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, delimiter: char) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Option<Vec<f64>> =
                line.split(delimiter).map(|t| t.trim().parse::<f64>().ok()).collect();
            let row = row.ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "bad matrix value".into(),
            })?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Parse { line: idx + 1, message: "ragged matrix".into() });
                }
            }
            rows.push(row);
        }
        Ok(Self::from_rows(&rows))
    }
}

/// Number of spatiotemporal columns.
pub const ST_COLS: usize = 8;
/// One-hot slots at the front of the spatiotemporal view.
pub const ONE_HOT_COLS: usize = 5;

/// Everything known about one user before assembly. Users missing any part
/// are excluded from the views and reported.
#[derive(Debug, Clone)]
pub struct UserFeatureRecord {
    pub user_id: String,
    pub motif: Option<MotifFeature>,
    pub rog_km: Option<f64>,
    pub temporal: Option<TemporalFeature>,
    pub semantic: Option<SemanticFeatures>,
}

/// The two row-aligned clustering views.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureViews {
    pub user_ids: Vec<String>,
    pub view_st: Matrix,
    pub view_sem: Matrix,
}

/// Assemble views from per-user records, in the given record order.
///
/// Returns the views plus the ids of excluded (incomplete) users.
pub fn assemble_views(
    records: &[UserFeatureRecord],
    sem_dim: usize,
) -> Result<(FeatureViews, Vec<String>)> {
    let mut user_ids = Vec::new();
    let mut st_rows = Vec::new();
    let mut sem_rows = Vec::new();
    let mut excluded = Vec::new();

    for rec in records {
        match (&rec.motif, rec.rog_km, &rec.temporal, &rec.semantic) {
            (Some(motif), Some(rog), Some(temporal), Some(semantic)) => {
                assert_eq!(semantic.m_as.len(), sem_dim, "semantic dim mismatch");
                let mut st = Vec::with_capacity(ST_COLS);
                st.extend_from_slice(&motif.one_hot);
                st.push(rog);
                st.push(temporal.lfer);
                st.push(temporal.dcfr);
                let mut sem = Vec::with_capacity(sem_dim + 2);
                sem.extend_from_slice(&semantic.m_as);
                sem.push(semantic.n_uas as f64);
                sem.push(semantic.m_sd);
                user_ids.push(rec.user_id.clone());
                st_rows.push(st);
                sem_rows.push(sem);
            }
            _ => excluded.push(rec.user_id.clone()),
        }
    }
    if user_ids.is_empty() {
        return Err(Error::NoCompleteUsers);
    }
    Ok((
        FeatureViews {
            user_ids,
            view_st: Matrix::from_rows(&st_rows),
            view_sem: Matrix::from_rows(&sem_rows),
        },
        excluded,
    ))
}

/// Per-column scaling state for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaling {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with `false` (the one-hot slots) pass through unscaled.
    pub scaled: Vec<bool>,
}

impl ColumnScaling {
    fn fit(matrix: &Matrix, passthrough: usize) -> Self {
        let n = matrix.rows as f64;
        let mut mean = vec![0.0; matrix.cols];
        let mut std = vec![1.0; matrix.cols];
        let mut scaled = vec![true; matrix.cols];
        for s in scaled.iter_mut().take(passthrough) {
            *s = false;
        }
        for j in 0..matrix.cols {
            if !scaled[j] {
                continue;
            }
            let col = matrix.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            mean[j] = m;
            // A constant column z-scores to zero and records unit spread.
            std[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { mean, std, scaled }
    }

    fn apply(&self, matrix: &mut Matrix) {
        for i in 0..matrix.rows {
            for (j, v) in matrix.row_mut(i).iter_mut().enumerate() {
                if self.scaled[j] {
                    *v = (*v - self.mean[j]) / self.std[j];
                }
            }
        }
    }

    fn invert(&self, matrix: &mut Matrix) {
        for i in 0..matrix.rows {
            for (j, v) in matrix.row_mut(i).iter_mut().enumerate() {
                if self.scaled[j] {
                    *v = *v * self.std[j] + self.mean[j];
                }
            }
        }
    }
}

/// Scaling state for both views.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub st: ColumnScaling,
    pub sem: ColumnScaling,
}

impl ScalingParams {
    pub fn apply(&self, views: &mut FeatureViews) {
        self.st.apply(&mut views.view_st);
        self.sem.apply(&mut views.view_sem);
    }

    pub fn invert(&self, views: &mut FeatureViews) {
        self.st.invert(&mut views.view_st);
        self.sem.invert(&mut views.view_sem);
    }
}

/// Z-score the continuous columns of both views.
pub fn standardize(views: &FeatureViews) -> (FeatureViews, ScalingParams) {
    assert!(views.view_st.rows >= 2, "standardize needs at least 2 users");
    let params = ScalingParams {
        st: ColumnScaling::fit(&views.view_st, ONE_HOT_COLS),
        sem: ColumnScaling::fit(&views.view_sem, 0),
    };
    let mut scaled = views.clone();
    params.apply(&mut scaled);
    (scaled, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(user: &str, rog: f64, with_semantic: bool) -> UserFeatureRecord {
        UserFeatureRecord {
            user_id: user.to_string(),
            motif: Some(MotifFeature { one_hot: [1.0, 0.0, 0.0, 0.0, 0.0] }),
            rog_km: Some(rog),
            temporal: Some(TemporalFeature { lfer: 0.5, dcfr: 0.5 }),
            semantic: with_semantic.then(|| SemanticFeatures {
                n_uas: 2,
                m_as: vec![rog, -rog, 0.0],
                m_sd: 1.0,
            }),
        }
    }

    #[test]
    fn three_complete_users_assemble_aligned_views() {
        let records = vec![record("a", 1.0, true), record("b", 2.0, true), record("c", 3.0, true)];
        let (views, excluded) = assemble_views(&records, 3).unwrap();
        assert!(excluded.is_empty());
        assert_eq!(views.user_ids, vec!["a", "b", "c"]);
        assert_eq!((views.view_st.rows, views.view_st.cols), (3, 8));
        assert_eq!((views.view_sem.rows, views.view_sem.cols), (3, 5));
        // Row order identical across views: the rog value planted into both.
        for i in 0..3 {
            assert_eq!(views.view_st.row(i)[5], views.view_sem.row(i)[0]);
        }
    }

    #[test]
    fn incomplete_users_are_excluded_and_reported() {
        let records = vec![record("a", 1.0, true), record("gone", 2.0, false)];
        let (views, excluded) = assemble_views(&records, 3).unwrap();
        assert_eq!(views.user_ids, vec!["a"]);
        assert_eq!(excluded, vec!["gone"]);
    }

    #[test]
    fn no_complete_users_is_an_error() {
        let records = vec![record("a", 1.0, false)];
        assert!(matches!(assemble_views(&records, 3), Err(Error::NoCompleteUsers)));
    }

    #[test]
    fn z_scoring_centers_and_norms() {
        let records = vec![record("a", 1.0, true), record("b", 2.0, true), record("c", 3.0, true)];
        let (views, _) = assemble_views(&records, 3).unwrap();
        let (scaled, _) = standardize(&views);
        let rog_col = scaled.view_st.column(5);
        assert!((rog_col.iter().sum::<f64>()).abs() < 1e-12);
        let var: f64 = rog_col.iter().map(|x| x * x).sum::<f64>() / 2.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert_eq!(rog_col, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn one_hot_and_constant_columns_are_safe() {
        let records = vec![record("a", 1.0, true), record("b", 2.0, true), record("c", 3.0, true)];
        let (views, _) = assemble_views(&records, 3).unwrap();
        let (scaled, _) = standardize(&views);
        // One-hot slots untouched.
        for i in 0..3 {
            assert_eq!(scaled.view_st.row(i)[..5], [1.0, 0.0, 0.0, 0.0, 0.0]);
        }
        // lfer was constant 0.5 -> zeros.
        assert_eq!(scaled.view_st.column(6), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn apply_then_invert_roundtrips() {
        let records = vec![record("a", 1.5, true), record("b", -2.0, true), record("c", 3.25, true)];
        let (views, _) = assemble_views(&records, 3).unwrap();
        let (mut scaled, params) = standardize(&views);
        params.invert(&mut scaled);
        for (a, b) in scaled.view_st.data.iter().zip(&views.view_st.data) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in scaled.view_sem.data.iter().zip(&views.view_sem.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_roundtrips_through_text() {
        let m = Matrix::from_rows(&[vec![1.5, -2.25, 0.0], vec![3.0, 4.5, -1.0]]);
        let mut buf = Vec::new();
        m.write(&mut buf, ',').unwrap();
        let back = Matrix::read(std::io::Cursor::new(&buf), ',').unwrap();
        assert_eq!(back, m);
    }
}
