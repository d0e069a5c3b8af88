//! Dense operators for the N-cell battery: density matrices and the on-site +
//! exchange-coupling Hamiltonian, with its cached eigendecomposition.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qubit::{QubitState, STATE_TOL};

/// Hard cap on the cell count; operators are dense 2^n x 2^n.
pub const MAX_CELLS: usize = 6;

pub(crate) type CMat = DMatrix<Complex64>;

pub(crate) fn cre(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Hermitian part (rho + rho^dag)/2.
pub(crate) fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).map(|z| z * 0.5)
}

pub(crate) fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Real part of Tr[A B].
pub(crate) fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Ascending eigenvalues (and matching eigenvector columns) of a Hermitian
/// matrix.
pub(crate) fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let se = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// General d x d battery state: Hermitian, unit trace, positive semidefinite
/// (all to [`STATE_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMat,
}

impl DensityMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(entries.nrows(), entries.ncols()));
        }
        let herm_err = (&entries - entries.adjoint()).map(|z| z.norm()).max();
        if herm_err > STATE_TOL {
            return Err(Error::NotDensity("not Hermitian"));
        }
        let tr = trace(&entries);
        if (tr - cre(1.0)).norm() > STATE_TOL {
            return Err(Error::NotDensity("trace differs from one"));
        }
        let entries = hermitize(&entries);
        let (vals, _) = eigh(&entries);
        if vals[0] < -STATE_TOL {
            return Err(Error::NotDensity("negative eigenvalue"));
        }
        Ok(Self { entries })
    }

    /// Wrap values produced by trace-preserving internal maps; debug-checked.
    pub(crate) fn from_parts(entries: CMat) -> Self {
        debug_assert!((trace(&entries) - cre(1.0)).norm() < 1e-6);
        Self { entries }
    }

    pub fn from_qubit(s: &QubitState) -> Self {
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = cre(1.0 - s.p());
        m[(0, 1)] = s.q();
        m[(1, 0)] = s.q().conj();
        m[(1, 1)] = cre(s.p());
        Self { entries: m }
    }

    /// Read a 2x2 state back as (P, Q); `None` for larger systems.
    pub fn as_qubit(&self) -> Option<QubitState> {
        if self.dim() != 2 {
            return None;
        }
        QubitState::new(self.entries[(1, 1)].re, self.entries[(0, 1)]).ok()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        let (mut vals, _) = eigh(&self.entries);
        vals.reverse();
        vals
    }

    pub fn purity(&self) -> f64 {
        trace_product_re(&self.entries, &self.entries)
    }
}

/// On-site gap plus symmetric exchange coupling:
/// `H = omega sum_k |e><e|_k + sum_{k != j} J_{kj} sigma_+^k sigma_-^j`.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    n_cells: usize,
    omega: f64,
    coupling: DMatrix<f64>,
    matrix: CMat,
    eigvals: Vec<f64>,
    eigvecs: CMat,
    coupling_warning: bool,
}

impl HamiltonianSpec {
    /// Build the dense Hamiltonian for `coupling.nrows()` cells. The coupling
    /// matrix must be symmetric with zero diagonal; couplings at or above
    /// 0.1 omega set [`Self::coupling_warning`] (the local dissipator used in
    /// the dynamics assumes J << omega) but are not rejected.
    pub fn new(omega: f64, coupling: DMatrix<f64>) -> Result<Self> {
        let n = coupling.nrows();
        if n == 0 || coupling.ncols() != n {
            return Err(Error::DimensionMismatch(n, coupling.ncols()));
        }
        if n > MAX_CELLS {
            return Err(Error::TooLarge { n, cap: MAX_CELLS });
        }
        if omega.is_nan() || omega <= 0.0 {
            return Err(Error::OutOfRange {
                name: "omega",
                value: omega,
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        let mut warning = false;
        for k in 0..n {
            if coupling[(k, k)] != 0.0 {
                return Err(Error::InvalidCoupling("diagonal must be zero"));
            }
            for j in 0..n {
                if (coupling[(k, j)] - coupling[(j, k)]).abs() > 0.0 {
                    return Err(Error::InvalidCoupling("matrix must be symmetric"));
                }
                if coupling[(k, j)].abs() >= 0.1 * omega {
                    warning = true;
                }
            }
        }

        let dim = 1usize << n;
        let mut matrix = CMat::zeros(dim, dim);
        for k in 0..n {
            matrix += embed_single(n, k, &excited_projector()).map(|z| z * cre(omega));
        }
        for k in 0..n {
            for j in 0..n {
                if k != j && coupling[(k, j)] != 0.0 {
                    let hop =
                        embed_single(n, k, &sigma_raise()) * embed_single(n, j, &sigma_lower());
                    matrix += hop.map(|z| z * cre(coupling[(k, j)]));
                }
            }
        }
        let (eigvals, eigvecs) = eigh(&matrix);
        Ok(Self {
            n_cells: n,
            omega,
            coupling,
            matrix,
            eigvals,
            eigvecs,
            coupling_warning: warning,
        })
    }

    /// Single uncoupled qubit, `H = diag(0, omega)`.
    pub fn qubit(omega: f64) -> Self {
        Self::new(omega, DMatrix::zeros(1, 1)).expect("single-qubit Hamiltonian")
    }

    /// Two cells with uniform exchange coupling `j`.
    pub fn coupled_pair(omega: f64, j: f64) -> Result<Self> {
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = j;
        c[(1, 0)] = j;
        Self::new(omega, c)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dim(&self) -> usize {
        1 << self.n_cells
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Energy eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    /// Eigenvector columns matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &CMat {
        &self.eigvecs
    }

    /// True when some |J_{kj}| >= 0.1 omega, outside the validity regime of
    /// the local master equation.
    pub fn coupling_warning(&self) -> bool {
        self.coupling_warning
    }

    /// Mean energy Tr[H rho].
    pub fn energy(&self, rho: &DensityMatrix) -> Result<f64> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch(rho.dim(), self.dim()));
        }
        Ok(trace_product_re(&self.matrix, rho.entries()))
    }
}

/// Remove the off-diagonal elements of `rho` in the energy eigenbasis of `h`.
/// Idempotent and trace-preserving.
pub fn dephase(rho: &DensityMatrix, h: &HamiltonianSpec) -> Result<DensityMatrix> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), h.dim()));
    }
    let v = h.eigenvectors();
    let in_basis = v.adjoint() * rho.entries() * v;
    let mut diag = CMat::zeros(rho.dim(), rho.dim());
    for k in 0..rho.dim() {
        diag[(k, k)] = cre(in_basis[(k, k)].re);
    }
    Ok(DensityMatrix::from_parts(v * diag * v.adjoint()))
}

fn excited_projector() -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(1, 1)] = cre(1.0);
    m
}

/// |e><g| on one cell.
pub(crate) fn sigma_raise() -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(1, 0)] = cre(1.0);
    m
}

/// |g><e| on one cell.
pub(crate) fn sigma_lower() -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(0, 1)] = cre(1.0);
    m
}

/// Embed a single-cell operator at `cell` (0-based; cell 0 is the leftmost
/// label, i.e. the most significant bit of the basis index).
pub(crate) fn embed_single(n: usize, cell: usize, op: &CMat) -> CMat {
    let mut acc = CMat::identity(1, 1);
    for k in 0..n {
        let factor = if k == cell {
            op.clone()
        } else {
            CMat::identity(2, 2)
        };
        acc = acc.kronecker(&factor);
    }
    acc
}
