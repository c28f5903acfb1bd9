//! Tight-binding Hamiltonian and classical walk generator of a lattice.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Single-excitation tight-binding Hamiltonian with uniform on-site constant
/// and uniform nearest-neighbour coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    beta: f64,
    coupling: f64,
    matrix: DMatrix<f64>,
}

impl Hamiltonian {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Classical continuous-time random walk generator `L = rate * (D - A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalGenerator {
    rate: f64,
    matrix: DMatrix<f64>,
}

impl ClassicalGenerator {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Builds `H` with `beta` on the diagonal and `coupling` on every lattice edge.
pub fn build_hamiltonian(lattice: &Lattice, beta: f64, coupling: f64) -> Result<Hamiltonian> {
    if !(coupling > 0.0 && coupling.is_finite()) {
        return Err(Error::Domain(format!(
            "coupling must be positive, got {coupling}"
        )));
    }
    if !beta.is_finite() {
        return Err(Error::Domain(format!(
            "on-site constant must be finite, got {beta}"
        )));
    }
    let n = lattice.len();
    let mut matrix = DMatrix::from_diagonal_element(n, n, beta);
    for &(a, b) in lattice.edges() {
        matrix[(a, b)] = coupling;
        matrix[(b, a)] = coupling;
    }
    Ok(Hamiltonian {
        beta,
        coupling,
        matrix,
    })
}

/// Builds the graph Laplacian of the lattice scaled by the hopping `rate`.
pub fn build_classical_generator(lattice: &Lattice, rate: f64) -> Result<ClassicalGenerator> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!(
            "hopping rate must be positive, got {rate}"
        )));
    }
    let n = lattice.len();
    let mut matrix = DMatrix::zeros(n, n);
    for &(a, b) in lattice.edges() {
        matrix[(a, b)] = -rate;
        matrix[(b, a)] = -rate;
        matrix[(a, a)] += rate;
        matrix[(b, b)] += rate;
    }
    Ok(ClassicalGenerator { rate, matrix })
}

/// Writes the nonzero entries of `matrix` as 0-indexed `row col value`
/// triplets in row-major order, after a `% comment` and a `rows cols nnz` line.
pub fn write_triplets<W: Write>(matrix: &DMatrix<f64>, mut out: W) -> Result<()> {
    let entries: Vec<(usize, usize, f64)> = (0..matrix.nrows())
        .flat_map(|i| (0..matrix.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, matrix[(i, j)]))
        .filter(|&(_, _, v)| v != 0.0)
        .collect();
    writeln!(out, "% coordinate real general, 0-indexed")?;
    writeln!(
        out,
        "{} {} {}",
        matrix.nrows(),
        matrix.ncols(),
        entries.len()
    )?;
    for (i, j, v) in entries {
        writeln!(out, "{i} {j} {}", crate::io::format_float(v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        generate_dual_sierpinski_carpet, generate_sierpinski_gasket, generate_square, Lattice,
        LatticeKind,
    };

    fn off_diagonal_nonzeros(m: &DMatrix<f64>) -> usize {
        let n = m.nrows();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && m[(i, j)] != 0.0)
            .count()
    }

    #[test]
    fn gasket_one_has_eighteen_couplings() {
        let l = generate_sierpinski_gasket(1).unwrap();
        let h = build_hamiltonian(&l, 0.0, 1.0).unwrap();
        assert_eq!(h.n(), 6);
        assert_eq!(off_diagonal_nonzeros(h.matrix()), 18);
        assert_eq!(h.matrix(), &h.matrix().transpose());
    }

    #[test]
    fn single_site() {
        let l = Lattice::from_points(LatticeKind::Custom, 0, &[(0.0, 0.0)]).unwrap();
        let h = build_hamiltonian(&l, 0.7, 1.0).unwrap();
        assert_eq!(h.matrix(), &DMatrix::from_element(1, 1, 0.7));
    }

    #[test]
    fn unit_square_entries() {
        let l = generate_square(1).unwrap();
        let h = build_hamiltonian(&l, 2.0, 0.5).unwrap();
        let m = h.matrix();
        assert!((0..4).all(|i| m[(i, i)] == 2.0));
        assert_eq!(off_diagonal_nonzeros(m), 8);
        for &(a, b) in l.edges() {
            assert_eq!(m[(a, b)], 0.5);
            assert_eq!(m[(b, a)], 0.5);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let l = generate_square(1).unwrap();
        assert!(matches!(
            build_hamiltonian(&l, 0.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            build_hamiltonian(&l, 0.0, -1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            build_classical_generator(&l, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn beta_shift_is_identity_offset() {
        let l = generate_sierpinski_gasket(3).unwrap();
        let shifted = build_hamiltonian(&l, 3.25, 1.5).unwrap();
        let plain = build_hamiltonian(&l, 0.0, 1.5).unwrap();
        let n = l.len();
        assert_eq!(
            shifted.matrix() - DMatrix::identity(n, n) * 3.25,
            *plain.matrix()
        );
    }

    #[test]
    fn two_site_laplacian() {
        let l = Lattice::from_points(LatticeKind::Custom, 0, &[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let g = build_classical_generator(&l, 1.0).unwrap();
        assert_eq!(
            g.matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
    }

    #[test]
    fn ring_laplacian_is_circulant() {
        let l = generate_dual_sierpinski_carpet(1).unwrap();
        let g = build_classical_generator(&l, 1.0).unwrap();
        let m = g.matrix();
        for i in 0..8 {
            assert_eq!(m[(i, i)], 2.0);
            assert!(m.row(i).iter().sum::<f64>().abs() < 1e-15);
        }
        assert_eq!(off_diagonal_nonzeros(m), 2 * l.edges().len());
    }

    #[test]
    fn triplet_dump_is_sorted_and_complete() {
        let l = generate_square(1).unwrap();
        let h = build_hamiltonian(&l, 0.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_triplets(h.matrix(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "4 4 8");
        assert_eq!(lines[2], "0 1 1.0");
        assert_eq!(lines.len(), 10);
    }
}
