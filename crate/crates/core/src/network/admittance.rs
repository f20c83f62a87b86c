use num_complex::Complex64;

use super::{Branch, BranchId, NetworkCase};

/// Bus-to-branch incidence matrix. Column `l` carries `+1` at the from-bus
/// row and `-1` at the to-bus row; a removed line has an all-zero column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    n_buses: usize,
    columns: Vec<Option<(usize, usize)>>,
}

impl IncidenceMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_buses
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> i8 {
        match self.columns[col] {
            Some((from, _)) if from == row => 1,
            Some((_, to)) if to == row => -1,
            _ => 0,
        }
    }

    /// `(from, to)` dense bus indices of column `col`, or `None` once zeroed.
    pub fn column(&self, col: usize) -> Option<(usize, usize)> {
        self.columns[col]
    }

    /// Copy with the columns of the given branch ids zeroed.
    pub fn without_lines(&self, removed: &[BranchId]) -> IncidenceMatrix {
        let mut out = self.clone();
        for &id in removed {
            if let Some(col) = (id as usize).checked_sub(1) {
                if col < out.columns.len() {
                    out.columns[col] = None;
                }
            }
        }
        out
    }
}

pub fn build_incidence(case: &NetworkCase) -> IncidenceMatrix {
    IncidenceMatrix {
        n_buses: case.n_buses(),
        columns: case.branches().iter().map(|br| Some(case.endpoints(br))).collect(),
    }
}

/// One stored entry of the admittance matrix together with its polar form
/// `magnitude * exp(j * angle) == value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmittanceEntry {
    pub col: usize,
    pub value: Complex64,
    pub magnitude: f64,
    pub angle: f64,
}

/// Sparse bus admittance matrix, row-major with columns ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    rows: Vec<Vec<AdmittanceEntry>>,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, m: usize) -> &[AdmittanceEntry] {
        &self.rows[m]
    }

    pub fn entry(&self, m: usize, n: usize) -> Option<&AdmittanceEntry> {
        let row = &self.rows[m];
        row.binary_search_by_key(&n, |e| e.col).ok().map(|i| &row[i])
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entry(m, n).map_or(Complex64::new(0.0, 0.0), |e| e.value)
    }

    /// `(Y_mn, alpha_mn)`; zero magnitude for structurally absent entries.
    pub fn polar(&self, m: usize, n: usize) -> (f64, f64) {
        self.entry(m, n).map_or((0.0, 0.0), |e| (e.magnitude, e.angle))
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let n = self.dim();
        let mut out = nalgebra::DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (m, row) in self.rows.iter().enumerate() {
            for e in row {
                out[(m, e.col)] = e.value;
            }
        }
        out
    }
}

/// `Y = A [y] A^T`, accumulated column by column: each live column adds its
/// line admittance to both diagonal entries and subtracts it from the pair of
/// off-diagonal entries. `branches` must be in column order.
pub fn build_admittance(incidence: &IncidenceMatrix, branches: &[Branch]) -> AdmittanceMatrix {
    assert_eq!(
        incidence.n_cols(),
        branches.len(),
        "incidence columns must align with the branch list"
    );
    let n = incidence.n_rows();
    let mut acc: Vec<std::collections::BTreeMap<usize, Complex64>> = vec![Default::default(); n];
    for (col, branch) in branches.iter().enumerate() {
        let Some((a, b)) = incidence.column(col) else { continue };
        let y = branch.series_admittance;
        *acc[a].entry(a).or_default() += y;
        *acc[b].entry(b).or_default() += y;
        *acc[a].entry(b).or_default() -= y;
        *acc[b].entry(a).or_default() -= y;
    }
    let rows = acc
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(col, value)| AdmittanceEntry {
                    col,
                    value,
                    magnitude: value.norm(),
                    angle: value.arg(),
                })
                .collect()
        })
        .collect();
    AdmittanceMatrix { rows }
}
