//! Channel ensembles, the noise-plus-interference covariance, and the
//! Hermitian eigen-algebra shared by the rate and low-power modules.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for the Hermitian-symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on `tr(K_s) = 1` when building `K_z`.
pub const TRACE_TOL: f64 = 1e-9;

/// One `N × M` channel realization (rows: receive antennas, columns: transmit antennas).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    h: CMatrix,
}

impl ChannelSample {
    pub fn new(h: CMatrix) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty channel matrix".into()));
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("h", "channel entries must be finite"));
        }
        Ok(Self { h })
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }
    pub fn rx_antennas(&self) -> usize {
        self.h.nrows()
    }
    pub fn tx_antennas(&self) -> usize {
        self.h.ncols()
    }

    /// `H†H` (M × M).
    pub fn gram(&self) -> CMatrix {
        self.h.adjoint() * &self.h
    }

    /// `H†K_z⁻¹H` (M × M).
    pub fn whitened_gram(&self, kz: &NoiseCovariance) -> CMatrix {
        self.h.adjoint() * kz.k_z_inv() * &self.h
    }
}

/// Per-sample RNG: the run seed picks the key, the sample index picks the stream.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws a circularly symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// An `n × m` matrix of i.i.d. unit-variance circularly symmetric Gaussians.
pub fn rayleigh_matrix<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> CMatrix {
    // column-major fill keeps the draw order fixed
    DMatrix::from_fn(n, m, |_, _| complex_gaussian(rng))
}

/// Generates `count` i.i.d. Rayleigh channel samples with `m` transmit and
/// `n` receive antennas. Sample `i` depends only on `(seed, i)`.
pub fn sample_rayleigh(m: usize, n: usize, count: usize, seed: u64) -> Result<Vec<ChannelSample>> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("m", "antenna counts must be at least 1"));
    }
    if count == 0 {
        return Err(Error::invalid("count", "need at least one sample"));
    }
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            ChannelSample {
                h: rayleigh_matrix(m, n, &mut rng),
            }
        })
        .collect())
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// `U·diag(f(λ))·U†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_spectrum(|l| l)
    }
}

fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    let asym = hermitian_asymmetry(a);
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(())
}

fn symmetrized(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).map(|z| z * 0.5)
}

/// Eigen-decomposition `a = U Λ U†` of a Hermitian matrix.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermitianEigen> {
    check_hermitian(a)?;
    let eig = SymmetricEigen::new(symmetrized(a));
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, descending. Skips the Hermitian check; callers pass
/// matrices that are Hermitian by construction (`H†AH` forms).
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = symmetrized(a).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Normalized noise-plus-interference covariance `K_z` with its inverse and
/// inverse square root.
#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    k_z: CMatrix,
    k_z_inv: CMatrix,
    k_z_inv_sqrt: CMatrix,
    eigenvalues: Vec<f64>,
}

impl NoiseCovariance {
    pub fn k_z(&self) -> &CMatrix {
        &self.k_z
    }
    pub fn k_z_inv(&self) -> &CMatrix {
        &self.k_z_inv
    }
    pub fn k_z_inv_sqrt(&self) -> &CMatrix {
        &self.k_z_inv_sqrt
    }
    /// Eigenvalues of `K_z`, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn dim(&self) -> usize {
        self.k_z.nrows()
    }

    /// `K_z` for spatially white interference, `K_s = I/N`.
    pub fn isotropic(n: usize, sigma_s2: f64, sigma_n2: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("N", "need at least one receive antenna"));
        }
        let ks = CMatrix::identity(n, n).map(|z| z / n as f64);
        build_kz(&ks, sigma_s2, sigma_n2)
    }

    /// The identity covariance (no interference).
    pub fn identity(n: usize) -> Result<Self> {
        Self::isotropic(n, 0.0, 1.0)
    }
}

/// Builds `K_z = (N·σ_s²·K_s + σ_n²·I) / σ_n²` from a trace-one PSD `K_s`.
pub fn build_kz(k_s: &CMatrix, sigma_s2: f64, sigma_n2: f64) -> Result<NoiseCovariance> {
    if !(sigma_n2 > 0.0 && sigma_n2.is_finite()) {
        return Err(Error::invalid("sigma_n2", format!("must be positive, got {sigma_n2}")));
    }
    if !(sigma_s2 >= 0.0 && sigma_s2.is_finite()) {
        return Err(Error::invalid("sigma_s2", format!("must be non-negative, got {sigma_s2}")));
    }
    let ks_eig = hermitian_eig(k_s)?;
    let n = k_s.nrows();
    let trace: f64 = (0..n).map(|i| k_s[(i, i)].re).sum();
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::invalid("k_s", format!("trace must be 1, got {trace}")));
    }
    let min_eig = *ks_eig.values.last().unwrap();
    if min_eig < -HERMITIAN_TOL {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min_eig,
        });
    }
    // K_z shares eigenvectors with K_s
    let kz_eig = HermitianEigen {
        values: ks_eig
            .values
            .iter()
            .map(|&l| (n as f64 * sigma_s2 * l.max(0.0) + sigma_n2) / sigma_n2)
            .collect(),
        vectors: ks_eig.vectors,
    };
    Ok(NoiseCovariance {
        k_z: kz_eig.reconstruct(),
        k_z_inv: kz_eig.map_spectrum(|l| 1.0 / l),
        k_z_inv_sqrt: kz_eig.map_spectrum(|l| 1.0 / l.sqrt()),
        eigenvalues: kz_eig.values,
    })
}

/// `K_z^{-1/2}·H`, so that `whiten(h)†·whiten(h) = H†K_z⁻¹H`.
pub fn whiten(h: &ChannelSample, kz: &NoiseCovariance) -> Result<CMatrix> {
    if h.rx_antennas() != kz.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} rows but K_z is {}×{}",
            h.rx_antennas(),
            kz.dim(),
            kz.dim()
        )));
    }
    Ok(kz.k_z_inv_sqrt() * h.h())
}

/// A random trace-one PSD matrix (`G G† / tr(G G†)` with Gaussian `G`).
pub fn random_trace_one_psd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let rank = rng.random_range(1..=dim);
    let g = DMatrix::from_fn(dim, rank, |_, _| complex_gaussian(rng));
    let a = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|i| a[(i, i)].re).sum();
    symmetrized(&a.map(|z| z / tr))
}

/// Writes an ensemble as CSV: one row per sample, header
/// `sample,h_0_0_re,h_0_0_im,h_0_1_re,...` (row-major entries).
pub fn write_ensemble_csv<W: Write>(samples: &[ChannelSample], mut out: W) -> Result<()> {
    let Some(first) = samples.first() else {
        return Err(Error::invalid("samples", "empty ensemble"));
    };
    let (n, m) = (first.rx_antennas(), first.tx_antennas());
    let mut header = String::from("sample");
    for r in 0..n {
        for c in 0..m {
            header.push_str(&format!(",h_{r}_{c}_re,h_{r}_{c}_im"));
        }
    }
    writeln!(out, "{header}")?;
    for (i, s) in samples.iter().enumerate() {
        if s.rx_antennas() != n || s.tx_antennas() != m {
            return Err(Error::DimensionMismatch(format!("sample {i} has a different shape")));
        }
        let mut line = i.to_string();
        for r in 0..n {
            for c in 0..m {
                let z = s.h[(r, c)];
                line.push_str(&format!(",{:?},{:?}", z.re, z.im));
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads an ensemble written by [`write_ensemble_csv`].
pub fn read_ensemble_csv<R: BufRead>(input: R) -> Result<Vec<ChannelSample>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))??;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"sample") || cols.len() < 3 || !(cols.len() - 1).is_multiple_of(2) {
        return Err(Error::Parse(format!("bad header `{header}`")));
    }
    let last = cols[cols.len() - 2];
    let dims: Vec<usize> = last
        .trim_start_matches("h_")
        .trim_end_matches("_re")
        .split('_')
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("bad column `{last}`")))?;
    if dims.len() != 2 {
        return Err(Error::Parse(format!("bad column `{last}`")));
    }
    let (n, m) = (dims[0] + 1, dims[1] + 1);
    if cols.len() != 1 + 2 * n * m {
        return Err(Error::Parse("header width does not match matrix shape".into()));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
        if vals.len() != 2 * n * m {
            return Err(Error::Parse(format!("line {}: wrong field count", lineno + 2)));
        }
        let h = CMatrix::from_fn(n, m, |r, c| {
            let k = 2 * (r * m + c);
            Complex64::new(vals[k], vals[k + 1])
        });
        out.push(ChannelSample::new(h)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frob(a: &CMatrix) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = sample_rng(seed, 0);
        let g = rayleigh_matrix(n, n, &mut rng);
        symmetrized(&(&g + g.adjoint()))
    }

    #[test]
    fn unit_variance_entries() {
        let samples = sample_rayleigh(1, 1, 100_000, 7).unwrap();
        let mean: f64 = samples.iter().map(|s| s.h[(0, 0)].norm_sqr()).sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02, "mean |h|^2 = {mean}");
    }

    #[test]
    fn same_seed_same_matrices() {
        let a = sample_rayleigh(3, 2, 50, 11).unwrap();
        let b = sample_rayleigh(3, 2, 50, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_rayleigh(3, 2, 50, 12).unwrap();
        assert_ne!(a, c);
        // prefix stability: sample i depends on (seed, i) only
        let d = sample_rayleigh(3, 2, 10, 11).unwrap();
        assert_eq!(&a[..10], &d[..]);
    }

    #[test]
    fn gram_trace_mean() {
        let samples = sample_rayleigh(3, 3, 100_000, 3).unwrap();
        let mean: f64 = samples
            .iter()
            .map(|s| s.h.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / 1e5;
        assert!((mean - 9.0).abs() < 0.1, "E tr(H†H) = {mean}");
    }

    #[test]
    fn kz_white_interference() {
        let kz = NoiseCovariance::isotropic(3, 1.0, 1.0).unwrap();
        let two = CMatrix::identity(3, 3).map(|z| z * 2.0);
        assert!(frob(&(kz.k_z() - &two)) < 1e-12);
        assert!(frob(&(kz.k_z_inv() - two.map(|z| z / 4.0))) < 1e-12);
        let plain = NoiseCovariance::isotropic(3, 0.0, 1.0).unwrap();
        assert!(frob(&(plain.k_z() - CMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn kz_invariants_on_random_ks() {
        let mut rng = sample_rng(5, 0);
        for trial in 0..200 {
            let n = 1 + trial % 4;
            let ks = random_trace_one_psd(n, &mut rng);
            let (s2, n2) = (rng.random_range(0.0..5.0), rng.random_range(0.1..3.0));
            let kz = build_kz(&ks, s2, n2).unwrap();
            let tr: f64 = (0..n).map(|i| kz.k_z()[(i, i)].re).sum();
            assert_relative_eq!(tr, n as f64 * (s2 + n2) / n2, max_relative = 1e-10);
            let lo = n2 / (n as f64 * (n2 + s2));
            for l in hermitian_eig(kz.k_z_inv()).unwrap().values {
                assert!(l >= lo * (1.0 - 1e-10) && l <= 1.0 + 1e-10, "{l} outside [{lo}, 1]");
            }
            let prod = kz.k_z() * kz.k_z_inv();
            assert!(frob(&(prod - CMatrix::identity(n, n))) < 1e-8);
        }
    }

    #[test]
    fn kz_rejects_bad_ks() {
        let ks = CMatrix::identity(2, 2);
        assert!(matches!(build_kz(&ks, 1.0, 1.0), Err(Error::InvalidParameter { .. })));
        let mut indefinite = CMatrix::zeros(2, 2);
        indefinite[(0, 0)] = Complex64::new(1.5, 0.0);
        indefinite[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(matches!(
            build_kz(&indefinite, 1.0, 1.0),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = hermitian_eig(&CMatrix::identity(4, 4)).unwrap();
        assert!(e.values.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = Complex64::new(1.0, 0.0);
        d[(1, 1)] = Complex64::new(3.0, 0.0);
        let e = hermitian_eig(&d).unwrap();
        assert_relative_eq!(e.values[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(e.values[1], 1.0, max_relative = 1e-14);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        for seed in 0..50 {
            let a = random_hermitian(4, seed);
            let e = hermitian_eig(&a).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            let err = frob(&(e.reconstruct() - &a)) / frob(&a);
            assert!(err < 1e-8, "reconstruction error {err}");
            let gram = e.vectors.adjoint() * &e.vectors;
            assert!(frob(&(gram - CMatrix::identity(4, 4))) < 1e-10);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian { .. })));
        assert!(hermitian_eig(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn whiten_identities() {
        let s = &sample_rayleigh(3, 2, 1, 9).unwrap()[0];
        let id = NoiseCovariance::identity(2).unwrap();
        assert!(frob(&(whiten(s, &id).unwrap() - s.h())) < 1e-14);
        // K_s = I/N with σ_s² = 3σ_n² gives K_z = 4I
        let four = NoiseCovariance::isotropic(2, 3.0, 1.0).unwrap();
        assert!(frob(&(whiten(s, &four).unwrap() - s.h().map(|z| z / 2.0))) < 1e-12);

        let mut rng = sample_rng(21, 0);
        for _ in 0..50 {
            let s = ChannelSample::new(rayleigh_matrix(3, 4, &mut rng)).unwrap();
            let ks = random_trace_one_psd(4, &mut rng);
            let kz = build_kz(&ks, 2.0, 0.7).unwrap();
            let w = whiten(&s, &kz).unwrap();
            let lhs = w.adjoint() * &w;
            assert!(frob(&(lhs - s.whitened_gram(&kz))) < 1e-8);
        }
        assert!(whiten(s, &NoiseCovariance::identity(3).unwrap()).is_err());
    }

    #[test]
    fn ostrowski_chain() {
        let mut rng = sample_rng(33, 0);
        for trial in 0..300 {
            let (m, n) = (1 + trial % 4, 1 + (trial / 4) % 4);
            let s = ChannelSample::new(rayleigh_matrix(m, n, &mut rng)).unwrap();
            let kz = build_kz(&random_trace_one_psd(n, &mut rng), 1.7, 0.8).unwrap();
            let l_busy = hermitian_eigenvalues(&s.whitened_gram(&kz))[0];
            let l_idle = hermitian_eigenvalues(&s.gram())[0];
            let l_kzinv = 1.0 / kz.eigenvalues().last().unwrap();
            assert!(l_busy <= l_kzinv * l_idle * (1.0 + 1e-10) + 1e-12);
            assert!(l_kzinv * l_idle <= l_idle * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ensemble_csv_round_trip() {
        let samples = sample_rayleigh(2, 3, 5, 4).unwrap();
        let mut buf = Vec::new();
        write_ensemble_csv(&samples, &mut buf).unwrap();
        let back = read_ensemble_csv(buf.as_slice()).unwrap();
        assert_eq!(samples, back);
        assert!(read_ensemble_csv("nope\n1,2".as_bytes()).is_err());
    }
}
