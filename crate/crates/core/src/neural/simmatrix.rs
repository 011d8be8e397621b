use crate::embeddings::{cosine, EmbeddingTable};

/// Cosine similarities between query terms (rows) and document terms
/// (columns). Only real terms are stored; consumers needing a fixed shape
/// treat everything outside `rows × cols` as zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<f64>,
    /// Softmax-normalized IDF per query row.
    pub query_idf: Vec<f64>,
}

impl SimMatrix {
    /// Panics when the cell count or the IDF length disagree with the shape,
    /// or a cell falls outside [-1, 1].
    pub fn from_parts(rows: usize, cols: usize, cells: Vec<f64>, query_idf: Vec<f64>) -> Self {
        assert_eq!(cells.len(), rows * cols, "cell count must equal rows × cols");
        assert_eq!(query_idf.len(), rows, "one IDF weight per query row");
        assert!(
            cells.iter().all(|c| (-1.0..=1.0).contains(c)),
            "similarities must lie in [-1, 1]"
        );
        Self {
            rows,
            cols,
            cells,
            query_idf,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.cols + j]
    }

    /// Zero outside the stored region.
    #[inline]
    pub fn padded(&self, i: usize, j: usize) -> f64 {
        if i < self.rows && j < self.cols {
            self.cells[i * self.cols + j]
        } else {
            0.0
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.cells[i * self.cols..(i + 1) * self.cols]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Same matrix with its columns reordered: column `j` of the result is
    /// column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.cols);
        let mut cells = Vec::with_capacity(self.cells.len());
        for i in 0..self.rows {
            cells.extend(perm.iter().map(|&j| self.get(i, j)));
        }
        Self {
            cells,
            ..self.clone()
        }
    }
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Builds the similarity matrix for truncated query and document term
/// sequences. Out-of-vocabulary terms give rows or columns of exact zeros.
pub fn sim_matrix<Q, D, F>(
    query_terms: &[Q],
    doc_terms: &[D],
    table: &EmbeddingTable,
    lq_cap: usize,
    ld_cap: usize,
    idf: F,
) -> SimMatrix
where
    Q: AsRef<str>,
    D: AsRef<str>,
    F: Fn(&str) -> f64,
{
    assert!(lq_cap >= 1 && ld_cap >= 1, "caps must be at least 1");
    let q = &query_terms[..query_terms.len().min(lq_cap)];
    let d = &doc_terms[..doc_terms.len().min(ld_cap)];
    let qv: Vec<Option<&[f64]>> = q.iter().map(|t| table.lookup(t.as_ref())).collect();
    let dv: Vec<Option<&[f64]>> = d.iter().map(|t| table.lookup(t.as_ref())).collect();
    let mut cells = Vec::with_capacity(q.len() * d.len());
    for a in &qv {
        for b in &dv {
            cells.push(match (a, b) {
                (Some(a), Some(b)) => cosine(a, b),
                _ => 0.0,
            });
        }
    }
    let raw_idf: Vec<f64> = q.iter().map(|t| idf(t.as_ref())).collect();
    SimMatrix::from_parts(q.len(), d.len(), cells, softmax(&raw_idf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::mock_embeddings;

    #[test]
    fn identical_terms_and_oov() {
        let table = mock_embeddings(&["perro", "gato"], 8, 1).unwrap();
        let m = sim_matrix(&["perro"], &["perro", "zzz", "gato"], &table, 16, 800, |_| 1.0);
        assert!((m.get(0, 0) - 1.0).abs() < 1e-9);
        assert_eq!(m.get(0, 1), 0.0);
        let m = sim_matrix(&["perro", "oov"], &["perro"], &table, 16, 800, |_| 1.0);
        assert_eq!(m.row(1), &[0.0]);
    }

    #[test]
    fn matches_dot_product_oracle() {
        let vocab = ["q1", "q2", "d1", "d2", "d3"];
        let table = mock_embeddings(&vocab, 12, 3).unwrap();
        let m = sim_matrix(&["q1", "q2"], &["d1", "d2", "d3"], &table, 16, 800, |_| 0.0);
        assert_eq!((m.rows(), m.cols()), (2, 3));
        for (i, q) in ["q1", "q2"].iter().enumerate() {
            for (j, d) in ["d1", "d2", "d3"].iter().enumerate() {
                let a = table.lookup(q).unwrap();
                let b = table.lookup(d).unwrap();
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                assert!((m.get(i, j) - dot).abs() < 1e-12);
            }
        }
        assert_eq!(m.query_idf, vec![0.5, 0.5]);
    }

    #[test]
    fn truncation_and_idf_softmax() {
        let table = mock_embeddings(&["a", "b", "c"], 4, 0).unwrap();
        let m = sim_matrix(&["a", "b", "c"], &["a", "b", "c"], &table, 2, 1, |t| {
            if t == "a" {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!((m.rows(), m.cols()), (2, 1));
        let e = 1f64.exp();
        assert!((m.query_idf[0] - e / (e + 1.0)).abs() < 1e-12);
        assert_eq!(m.padded(5, 5), 0.0);
    }
}
