//! Unitary and classical propagation of a single excitation.
//!
//! The quantum propagator `U(τ) = exp(-iHτ)` is evaluated through one
//! eigendecomposition `H = V diag(λ) Vᵀ`, after which every time point costs
//! two real matrix-vector products. Time is dimensionless, `τ = C t`.
//! [`evolve_oracle`] computes the same amplitudes by a Taylor series with
//! step refinement and shares no code with the spectral route.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{ClassicalGenerator, Hamiltonian};

/// Classical probabilities below zero but above this are roundoff and clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Diagonalizes a real symmetric matrix.
    pub fn decompose(matrix: &DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::Shape(format!(
                "expected a nonempty square matrix, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        let asymmetry = (matrix - matrix.transpose()).amax();
        if asymmetry != 0.0 {
            return Err(Error::Numerical(format!(
                "matrix is not symmetric (max |H - Hᵀ| = {asymmetry:e})"
            )));
        }
        let eig = SymmetricEigen::try_new(matrix.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(
            || {
                Error::Numerical(format!(
                "symmetric eigensolver did not converge (n = {n}, max |H| = {:e}, trace = {:e})",
                matrix.amax(),
                matrix.trace()
            ))
            },
        )?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Spectrum {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `max |V diag(λ) Vᵀ - H|`.
    pub fn reconstruction_residual(&self, matrix: &DMatrix<f64>) -> f64 {
        let v = &self.eigenvectors;
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        (v * d * v.transpose() - matrix).amax()
    }

    /// `max |VᵀV - I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.n();
        (self.eigenvectors.transpose() * &self.eigenvectors - DMatrix::identity(n, n)).amax()
    }

    /// Amplitudes `⟨j|exp(-iHτ)|input⟩` for all `j`.
    pub fn amplitudes(&self, input_site: usize, tau: f64) -> Result<Vec<Complex64>> {
        self.check_site(input_site)?;
        let (re, im) = self.rotated_projections(input_site, tau);
        Ok(re
            .iter()
            .zip(im.iter())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect())
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site < self.n() {
            Ok(())
        } else {
            Err(Error::bounds(
                "input site",
                site,
                format!("0..{}", self.n()),
            ))
        }
    }

    /// Real and imaginary parts of `V exp(-iλτ) Vᵀ e_input`.
    fn rotated_projections(&self, input_site: usize, tau: f64) -> (DVector<f64>, DVector<f64>) {
        let weights = self.eigenvectors.row(input_site);
        let mut cos_part = DVector::zeros(self.n());
        let mut sin_part = DVector::zeros(self.n());
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let (s, c) = (lambda * tau).sin_cos();
            cos_part[k] = weights[k] * c;
            sin_part[k] = -weights[k] * s;
        }
        (&self.eigenvectors * cos_part, &self.eigenvectors * sin_part)
    }
}

/// Decomposes a Hamiltonian.
pub fn spectral_decompose(h: &Hamiltonian) -> Result<Spectrum> {
    Spectrum::decompose(h.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkKind {
    Quantum,
    Classical,
}

/// Occupation probabilities of every site over a time grid, for one input site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySeries {
    pub kind: WalkKind,
    pub input_site: usize,
    pub times: Vec<f64>,
    /// One row per time point, one column per site.
    pub probabilities: Vec<Vec<f64>>,
}

impl ProbabilitySeries {
    pub fn n_sites(&self) -> usize {
        self.probabilities.first().map_or(0, Vec::len)
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Checks shape, the time grid and that every row is a probability distribution.
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        check_times(&self.times)?;
        if self.probabilities.len() != self.times.len() {
            return Err(Error::Shape(format!(
                "{} probability rows for {} times",
                self.probabilities.len(),
                self.times.len()
            )));
        }
        let n = self.n_sites();
        if self.input_site >= n {
            return Err(Error::bounds(
                "input site",
                self.input_site,
                format!("0..{n}"),
            ));
        }
        for (i, row) in self.probabilities.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "row {i} has {} sites, expected {n}",
                    row.len()
                )));
            }
            if row
                .iter()
                .any(|p| !(-tolerance..=1.0 + tolerance).contains(p))
            {
                return Err(Error::Domain(format!(
                    "row {i} has a probability outside [0, 1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > tolerance {
                return Err(Error::Domain(format!("row {i} sums to {total}")));
            }
        }
        Ok(())
    }
}

/// Uniform grid of `steps` points on `[0, tau_max]`.
pub fn uniform_times(tau_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(tau_max > 0.0 && tau_max.is_finite()) {
        return Err(Error::Domain(format!(
            "need tau_max > 0 and at least 2 steps, got tau_max = {tau_max}, steps = {steps}"
        )));
    }
    let dt = tau_max / (steps - 1) as f64;
    Ok((0..steps).map(|i| i as f64 * dt).collect())
}

/// `steps` logarithmically spaced points on `[tau_min, tau_max]`.
pub fn log_times(tau_min: f64, tau_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(tau_min > 0.0 && tau_max > tau_min && tau_max.is_finite()) {
        return Err(Error::Domain(format!(
            "need 0 < tau_min < tau_max and at least 2 steps, got [{tau_min}, {tau_max}], {steps}"
        )));
    }
    let (a, b) = (tau_min.ln(), tau_max.ln());
    let h = (b - a) / (steps - 1) as f64;
    Ok((0..steps).map(|i| (a + i as f64 * h).exp()).collect())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || times[0] < 0.0 {
        return Err(Error::Domain(
            "times must be finite and non-negative".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("times must be ascending".into()));
    }
    Ok(())
}

/// Initial occupation, returned verbatim at τ = 0 instead of a round-off-blurred copy.
fn delta(n: usize, site: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    row[site] = 1.0;
    row
}

/// Quantum occupation probabilities `p_j(τ) = |⟨j|exp(-iHτ)|input⟩|²`.
pub fn evolve_quantum(
    spectrum: &Spectrum,
    input_site: usize,
    times: &[f64],
) -> Result<ProbabilitySeries> {
    spectrum.check_site(input_site)?;
    check_times(times)?;
    let probabilities = times
        .par_iter()
        .map(|&tau| {
            if tau == 0.0 {
                return delta(spectrum.n(), input_site);
            }
            let (re, im) = spectrum.rotated_projections(input_site, tau);
            re.iter()
                .zip(im.iter())
                .map(|(r, i)| r * r + i * i)
                .collect()
        })
        .collect();
    Ok(ProbabilitySeries {
        kind: WalkKind::Quantum,
        input_site,
        times: times.to_vec(),
        probabilities,
    })
}

/// Classical occupation probabilities `p(τ) = exp(-Lτ) e_input`.
pub fn evolve_classical(
    generator: &ClassicalGenerator,
    input_site: usize,
    times: &[f64],
) -> Result<ProbabilitySeries> {
    let spectrum = Spectrum::decompose(generator.matrix())?;
    spectrum.check_site(input_site)?;
    check_times(times)?;
    let v = spectrum.eigenvectors();
    let weights = v.row(input_site).transpose();
    let rows: Result<Vec<Vec<f64>>> = times
        .par_iter()
        .map(|&tau| {
            if tau == 0.0 {
                return Ok(delta(spectrum.n(), input_site));
            }
            let decay = DVector::from_iterator(
                spectrum.n(),
                spectrum
                    .eigenvalues()
                    .iter()
                    .zip(weights.iter())
                    .map(|(&lambda, &w)| w * (-lambda * tau).exp()),
            );
            (v * decay)
                .iter()
                .map(|&p| {
                    if p >= 0.0 {
                        Ok(p)
                    } else if p >= -CLAMP_TOLERANCE {
                        Ok(0.0)
                    } else {
                        Err(Error::Numerical(format!(
                            "classical probability {p:e} at τ = {tau} is below the clamp threshold"
                        )))
                    }
                })
                .collect()
        })
        .collect();
    Ok(ProbabilitySeries {
        kind: WalkKind::Classical,
        input_site,
        times: times.to_vec(),
        probabilities: rows?,
    })
}

/// Agreement required between successive step refinements of the oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;
const ORACLE_MAX_REFINEMENTS: usize = 12;

/// Independent propagator: `exp(-iHτ) e_input` by a Taylor series applied over
/// `m` substeps, doubling `m` until two refinements agree within
/// [`ORACLE_TOLERANCE`].
pub fn evolve_oracle(h: &Hamiltonian, input_site: usize, tau: f64) -> Result<Vec<Complex64>> {
    let n = h.n();
    if input_site >= n {
        return Err(Error::bounds("input site", input_site, format!("0..{n}")));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!(
            "oracle time must be non-negative, got {tau}"
        )));
    }
    let m = h.matrix();
    let mut start = vec![Complex64::new(0.0, 0.0); n];
    start[input_site] = Complex64::new(1.0, 0.0);
    if tau == 0.0 {
        return Ok(start);
    }

    let row_norm = (0..n)
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut substeps = ((row_norm * tau).ceil() as usize).max(1);
    let mut previous = taylor_propagate(m, &start, tau, substeps);
    for _ in 0..ORACLE_MAX_REFINEMENTS {
        substeps *= 2;
        let refined = taylor_propagate(m, &start, tau, substeps);
        let diff = refined
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if diff <= ORACLE_TOLERANCE {
            return Ok(refined);
        }
        previous = refined;
    }
    Err(Error::Numerical(format!(
        "Taylor oracle did not converge at τ = {tau} after {ORACLE_MAX_REFINEMENTS} refinements"
    )))
}

fn taylor_propagate(
    m: &DMatrix<f64>,
    start: &[Complex64],
    tau: f64,
    substeps: usize,
) -> Vec<Complex64> {
    let n = start.len();
    let dt = tau / substeps as f64;
    let mut state = start.to_vec();
    for _ in 0..substeps {
        let mut term = state.clone();
        let mut sum = state.clone();
        for order in 1..200 {
            // term <- (-i dt / order) H term
            let factor = Complex64::new(0.0, -dt / order as f64);
            let next: Vec<Complex64> = (0..n)
                .map(|i| {
                    let acc = m
                        .row(i)
                        .iter()
                        .zip(&term)
                        .filter(|(h, _)| **h != 0.0)
                        .fold(Complex64::new(0.0, 0.0), |acc, (&h, &t)| acc + t * h);
                    acc * factor
                })
                .collect();
            term = next;
            let size = term.iter().map(|t| t.norm()).fold(0.0, f64::max);
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
            if size < 1e-18 {
                break;
            }
        }
        state = sum;
    }
    state
}
