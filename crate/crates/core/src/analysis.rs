//! Post-hoc analysis of learned feature trajectories: Gaussian
//! Kullback-Leibler divergence against a baseline span, change-point
//! detection on that divergence, and singular-value conditioning metrics
//! for weight matrices.

use crate::error::{PipelineError, Result};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};

fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Sample mean and population covariance of row vectors.
#[derive(Debug, Clone)]
pub struct GaussianSummary {
    pub mean: Array1<f64>,
    pub covariance: Array2<f64>,
}

pub fn estimate_gaussian(rows: ArrayView2<f64>) -> Result<GaussianSummary> {
    let (n, k) = (rows.nrows(), rows.ncols());
    if n == 0 || k == 0 {
        return Err(PipelineError::ShapeMismatch(format!(
            "gaussian estimate over {n}x{k} samples"
        )));
    }
    let mut mean = Array1::<f64>::zeros(k);
    for row in rows.rows() {
        mean += &row;
    }
    mean /= n as f64;

    let mut cov = Array2::<f64>::zeros((k, k));
    for row in rows.rows() {
        for i in 0..k {
            let di = row[i] - mean[i];
            for j in i..k {
                cov[[i, j]] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            let v = cov[[i, j]] / n as f64;
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    Ok(GaussianSummary { mean, covariance: cov })
}

fn regularized(cov: &Array2<f64>) -> DMatrix<f64> {
    let k = cov.nrows();
    let trace: f64 = (0..k).map(|i| cov[[i, i]]).sum();
    let eps = 1e-8 * trace / k as f64;
    let mut m = to_dmatrix(cov.view());
    for i in 0..k {
        m[(i, i)] += eps;
    }
    m
}

fn log_det(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// KL divergence between Gaussian summaries,
/// `D(from || to) = (tr(S1^-1 S0) + dmu' S1^-1 dmu - k + ln det S1 - ln det S0) / 2`
/// with `to` supplying `S1`. Covariances get a diagonal lift of
/// `1e-8 * tr / k` before factorization.
pub fn kl_divergence(from: &GaussianSummary, to: &GaussianSummary) -> Result<f64> {
    let k = from.mean.len();
    if to.mean.len() != k
        || from.covariance.dim() != (k, k)
        || to.covariance.dim() != (k, k)
    {
        return Err(PipelineError::ShapeMismatch(format!(
            "divergence between {k}-dim and {}-dim summaries",
            to.mean.len()
        )));
    }

    let s0 = regularized(&from.covariance);
    let s1 = regularized(&to.covariance);
    let chol0 = Cholesky::new(s0.clone()).ok_or_else(|| {
        PipelineError::SingularCovariance("source covariance is not positive definite".into())
    })?;
    let chol1 = Cholesky::new(s1).ok_or_else(|| {
        PipelineError::SingularCovariance("reference covariance is not positive definite".into())
    })?;

    let cross = chol1.solve(&s0).trace();
    let dmu = DVector::from_fn(k, |i, _| from.mean[i] - to.mean[i]);
    let maha = dmu.dot(&chol1.solve(&dmu));
    Ok(0.5 * (cross + maha - k as f64 + log_det(&chol1) - log_det(&chol0)))
}

/// PCA whitener fitted on a baseline span: drops near-constant features,
/// projects onto the leading principal components, and scales each to
/// unit baseline variance.
#[derive(Debug, Clone)]
pub struct Whitener {
    kept: Vec<usize>,
    mean: Vec<f64>,
    /// Rows are scaled principal directions over the kept features.
    basis: DMatrix<f64>,
}

/// Features whose baseline variance falls below this are treated as
/// constant and dropped before the eigendecomposition.
const VARIANCE_FLOOR: f64 = 1e-6;

pub fn fit_whitener(baseline: ArrayView2<f64>, k_keep: usize) -> Result<Whitener> {
    let n = baseline.nrows();
    if n < 2 {
        return Err(PipelineError::InvalidParameter(format!(
            "whitener needs at least 2 baseline rows, got {n}"
        )));
    }
    if k_keep == 0 {
        return Err(PipelineError::InvalidParameter("k_keep must be positive".into()));
    }

    let summary = estimate_gaussian(baseline)?;
    let kept: Vec<usize> = (0..baseline.ncols())
        .filter(|&j| summary.covariance[[j, j]] >= VARIANCE_FLOOR)
        .collect();
    if kept.is_empty() {
        return Err(PipelineError::SingularCovariance(
            "every baseline feature is near constant".into(),
        ));
    }

    let cov = DMatrix::from_fn(kept.len(), kept.len(), |i, j| {
        summary.covariance[[kept[i], kept[j]]]
    });
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let lambda_max = eig.eigenvalues[order[0]];

    let selected: Vec<usize> = order
        .into_iter()
        .take(k_keep)
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * lambda_max)
        .collect();
    let mut basis = DMatrix::zeros(selected.len(), kept.len());
    for (row, &i) in selected.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[i].sqrt();
        for col in 0..kept.len() {
            basis[(row, col)] = eig.eigenvectors[(col, i)] * scale;
        }
    }

    Ok(Whitener {
        mean: kept.iter().map(|&j| summary.mean[j]).collect(),
        kept,
        basis,
    })
}

impl Whitener {
    pub fn output_dims(&self) -> usize {
        self.basis.nrows()
    }

    pub fn transform(&self, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
        let needed = self.kept.iter().copied().max().unwrap_or(0);
        if rows.ncols() <= needed {
            return Err(PipelineError::ShapeMismatch(format!(
                "whitener fitted on wider rows than the {} given",
                rows.ncols()
            )));
        }
        let mut out = Array2::<f64>::zeros((rows.nrows(), self.output_dims()));
        let mut centered = DVector::zeros(self.kept.len());
        for (r, row) in rows.rows().into_iter().enumerate() {
            for (c, &j) in self.kept.iter().enumerate() {
                centered[c] = row[j] - self.mean[c];
            }
            let y = &self.basis * &centered;
            for c in 0..y.len() {
                out[[r, c]] = y[c];
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper: fit on the baseline rows, transform both spans.
pub fn decorrelate(
    baseline: ArrayView2<f64>,
    series: ArrayView2<f64>,
    k_keep: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let w = fit_whitener(baseline, k_keep)?;
    Ok((w.transform(baseline)?, w.transform(series)?))
}

#[derive(Debug, Clone)]
pub struct ChangePointConfig {
    /// Seconds between consecutive feature rows.
    pub epoch_seconds: f64,
    /// Rows treated as the stationary reference span.
    pub baseline_epochs: usize,
    /// Sliding-window length in rows.
    pub window: usize,
    /// Exceedance must persist this long to count.
    pub sustain_seconds: f64,
    /// Whitened dimensionality cap.
    pub k_keep: usize,
    /// Threshold is the in-baseline median plus this many MADs.
    pub mad_scale: f64,
}

impl Default for ChangePointConfig {
    fn default() -> Self {
        Self {
            epoch_seconds: 1.0,
            baseline_epochs: 1200,
            window: 60,
            sustain_seconds: 30.0,
            k_keep: 10,
            mad_scale: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChangePointTrace {
    /// Time of the last row in each evaluated window.
    pub times: Vec<f64>,
    pub divergence: Vec<f64>,
    pub threshold: f64,
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Scan a feature trajectory for a sustained divergence from the opening
/// baseline span. Rows are whitened against the baseline, each sliding
/// window is summarized as a Gaussian, and its divergence from the
/// baseline is thresholded at `median + mad_scale * MAD` of the windows
/// that lie wholly inside the baseline. Returns the start time of the
/// first sustained exceedance past the baseline, restricted to times
/// before `onset` when one is given.
pub fn change_point(
    features: ArrayView2<f64>,
    times: &[f64],
    onset: Option<f64>,
    cfg: &ChangePointConfig,
) -> Result<(Option<f64>, ChangePointTrace)> {
    let n = features.nrows();
    if times.len() != n {
        return Err(PipelineError::ShapeMismatch(format!(
            "{n} feature rows against {} times",
            times.len()
        )));
    }
    if !(cfg.epoch_seconds > 0.0) || !(cfg.sustain_seconds >= 0.0) || !(cfg.mad_scale > 0.0) {
        return Err(PipelineError::InvalidParameter("change-point scales must be positive".into()));
    }
    if cfg.window < 2 || cfg.baseline_epochs < cfg.window {
        return Err(PipelineError::InvalidParameter(format!(
            "window {} must be at least 2 and fit inside the {}-epoch baseline",
            cfg.window, cfg.baseline_epochs
        )));
    }
    if n < cfg.baseline_epochs + cfg.window {
        return Err(PipelineError::InvalidParameter(format!(
            "{n} rows cannot hold a {}-epoch baseline plus a {}-epoch window",
            cfg.baseline_epochs, cfg.window
        )));
    }

    let whitener = fit_whitener(features.slice(ndarray::s![..cfg.baseline_epochs, ..]), cfg.k_keep)?;
    if cfg.window <= whitener.output_dims() {
        return Err(PipelineError::InvalidParameter(format!(
            "window {} must exceed the {} whitened dimensions",
            cfg.window,
            whitener.output_dims()
        )));
    }
    let whitened = whitener.transform(features)?;
    let baseline = estimate_gaussian(whitened.slice(ndarray::s![..cfg.baseline_epochs, ..]))?;

    let mut trace = ChangePointTrace { times: Vec::new(), divergence: Vec::new(), threshold: 0.0 };
    let mut in_baseline = Vec::new();
    for end in cfg.window..=n {
        let window = whitened.slice(ndarray::s![end - cfg.window..end, ..]);
        let d = kl_divergence(&estimate_gaussian(window)?, &baseline)?;
        trace.times.push(times[end - 1]);
        trace.divergence.push(d);
        if end <= cfg.baseline_epochs {
            in_baseline.push(d);
        }
    }

    let mut sorted = in_baseline.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = median_of(&sorted);
    let mut deviations: Vec<f64> = in_baseline.iter().map(|d| (d - median).abs()).collect();
    deviations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mad = median_of(&deviations);
    let threshold = if mad > 0.0 { median + cfg.mad_scale * mad } else { 10.0 * median };
    trace.threshold = threshold;

    let sustain_rows = ((cfg.sustain_seconds / cfg.epoch_seconds).ceil() as usize).max(1);
    // trace index i corresponds to window end = window + i.
    let first_scan = cfg.baseline_epochs + cfg.window;
    let mut run = 0usize;
    let mut run_start = 0usize;
    for (i, &d) in trace.divergence.iter().enumerate() {
        let end = cfg.window + i;
        let within_bound = onset.map_or(true, |o| trace.times[i] < o);
        if end >= first_scan && d > threshold && within_bound {
            if run == 0 {
                run_start = i;
            }
            run += 1;
            if run >= sustain_rows {
                return Ok((Some(trace.times[run_start]), trace));
            }
        } else {
            run = 0;
        }
    }
    Ok((None, trace))
}

/// Singular-value conditioning of a matrix.
#[derive(Debug, Clone)]
pub struct SpectralMetrics {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `s2 / s1`; 0 when the numerical rank is below 2.
    pub spectral_gap: f64,
    /// Stable rank `sum(si^2) / s1^2`.
    pub effective_rank: f64,
    /// `s1 / sr` over the numerical rank `r`.
    pub condition: f64,
    /// Count of `si > 1e-12 * s1`.
    pub rank: usize,
}

pub fn spectral_metrics(m: ArrayView2<f64>) -> SpectralMetrics {
    let svd = to_dmatrix(m).svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let s1 = sv.first().copied().unwrap_or(0.0);
    if s1 <= 0.0 {
        return SpectralMetrics {
            singular_values: sv,
            spectral_gap: 0.0,
            effective_rank: 0.0,
            condition: f64::INFINITY,
            rank: 0,
        };
    }
    let rank = sv.iter().filter(|&&s| s > 1e-12 * s1).count();
    SpectralMetrics {
        spectral_gap: if rank >= 2 { sv[1] / s1 } else { 0.0 },
        effective_rank: sv.iter().map(|s| (s / s1) * (s / s1)).sum(),
        condition: s1 / sv[rank - 1],
        rank,
        singular_values: sv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randn(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller on open-interval uniforms.
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    fn summary(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> GaussianSummary {
        let k = mean.len();
        GaussianSummary {
            mean: Array1::from(mean),
            covariance: Array2::from_shape_fn((k, k), |(i, j)| cov[i][j]),
        }
    }

    #[test]
    fn estimate_uses_population_divisor() {
        let rows = array![[0.0, 0.0], [2.0, 2.0]];
        let g = estimate_gaussian(rows.view()).unwrap();
        assert_eq!(g.mean, array![1.0, 1.0]);
        assert_eq!(g.covariance, array![[1.0, 1.0], [1.0, 1.0]]);
    }

    #[test]
    fn unit_mean_shift_diverges_by_half() {
        let a = summary(vec![0.0], vec![vec![1.0]]);
        let b = summary(vec![1.0], vec![vec![1.0]]);
        let d = kl_divergence(&a, &b).unwrap();
        assert!((d - 0.5).abs() < 1e-6, "{d}");
    }

    #[test]
    fn variance_doubling_diverges_by_frozen_value() {
        let a = summary(vec![0.0], vec![vec![1.0]]);
        let b = summary(vec![0.0], vec![vec![2.0]]);
        let d = kl_divergence(&a, &b).unwrap();
        assert!((d - 0.09657359027997264).abs() < 1e-6, "{d}");
    }

    #[test]
    fn self_divergence_is_zero() {
        let g = summary(vec![0.3, -1.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]);
        let d = kl_divergence(&g, &g).unwrap();
        assert!(d.abs() < 1e-10, "{d}");
    }

    #[test]
    fn zero_covariance_is_rejected() {
        let g = summary(vec![0.0], vec![vec![0.0]]);
        assert!(matches!(
            kl_divergence(&g, &g),
            Err(PipelineError::SingularCovariance(_))
        ));
    }

    fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
                .unwrap();
            m.swap(col, pivot);
            let p = m[col][col];
            for v in m[col].iter_mut() {
                *v /= p;
            }
            for row in 0..k {
                if row != col {
                    let f = m[row][col];
                    for j in 0..2 * k {
                        m[row][j] -= f * m[col][j];
                    }
                }
            }
        }
        m.into_iter().map(|row| row[k..].to_vec()).collect()
    }

    fn elimination_determinant(a: &[Vec<f64>]) -> f64 {
        let k = a.len();
        let mut m = a.to_vec();
        let mut det = 1.0;
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
                .unwrap();
            if pivot != col {
                m.swap(col, pivot);
                det = -det;
            }
            det *= m[col][col];
            for row in col + 1..k {
                let f = m[row][col] / m[col][col];
                for j in col..k {
                    m[row][j] -= f * m[col][j];
                }
            }
        }
        det
    }

    fn random_spd(k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let a: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut s = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = (0..k).map(|t| a[i][t] * a[j][t]).sum();
                s[i][j] = dot / k as f64 + if i == j { 1.0 } else { 0.0 };
            }
        }
        s
    }

    #[test]
    fn divergence_matches_elimination_oracle_in_high_dimension() {
        let k = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s0 = random_spd(k, &mut rng);
        let s1 = random_spd(k, &mut rng);
        let mu0: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mu1: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let inv1 = gauss_jordan_inverse(&s1);
        let mut cross = 0.0;
        for i in 0..k {
            for t in 0..k {
                cross += inv1[i][t] * s0[t][i];
            }
        }
        let mut maha = 0.0;
        for i in 0..k {
            for j in 0..k {
                maha += (mu0[i] - mu1[i]) * inv1[i][j] * (mu0[j] - mu1[j]);
            }
        }
        let expected = 0.5
            * (cross + maha - k as f64 + elimination_determinant(&s1).ln()
                - elimination_determinant(&s0).ln());

        let from = summary(mu0, s0);
        let to = summary(mu1, s1);
        let got = kl_divergence(&from, &to).unwrap();
        assert!(
            (got - expected).abs() / expected.abs().max(1.0) < 1e-6,
            "{got} vs {expected}"
        );
    }

    #[test]
    fn whitened_baseline_has_identity_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let mut rows = Array2::<f64>::zeros((n, 6));
        for r in 0..n {
            let shared = randn(&mut rng);
            for c in 0..6 {
                rows[[r, c]] = shared + 0.5 * randn(&mut rng) + c as f64;
            }
        }
        let w = fit_whitener(rows.view(), 6).unwrap();
        assert_eq!(w.output_dims(), 6);
        let y = w.transform(rows.view()).unwrap();
        let g = estimate_gaussian(y.view()).unwrap();
        for i in 0..6 {
            assert!(g.mean[i].abs() < 1e-8);
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.covariance[[i, j]] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn duplicate_and_constant_features_are_dropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100;
        let mut rows = Array2::<f64>::zeros((n, 4));
        for r in 0..n {
            let x = randn(&mut rng);
            rows[[r, 0]] = x;
            rows[[r, 1]] = x; // exact duplicate: rank-deficient covariance
            rows[[r, 2]] = 5.0; // constant: dropped by the variance floor
            rows[[r, 3]] = randn(&mut rng);
        }
        let w = fit_whitener(rows.view(), 4).unwrap();
        assert_eq!(w.output_dims(), 2);
        let y = w.transform(rows.view()).unwrap();
        assert!(y.iter().all(|v| v.is_finite()));

        let constant = Array2::<f64>::ones((10, 3));
        assert!(matches!(
            fit_whitener(constant.view(), 3),
            Err(PipelineError::SingularCovariance(_))
        ));
    }

    fn drifting_features(shift_at: Option<usize>, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 400;
        let k = 4;
        let mut rows = Array2::<f64>::zeros((n, k));
        for r in 0..n {
            let bump = match shift_at {
                Some(t) if r >= t => 3.0,
                _ => 0.0,
            };
            for c in 0..k {
                rows[[r, c]] = randn(&mut rng) + bump;
            }
        }
        rows
    }

    fn scan_config() -> ChangePointConfig {
        ChangePointConfig {
            epoch_seconds: 1.0,
            baseline_epochs: 120,
            window: 30,
            sustain_seconds: 5.0,
            k_keep: 4,
            mad_scale: 5.0,
        }
    }

    #[test]
    fn stationary_series_raises_no_change_point() {
        let rows = drifting_features(None, 17);
        let times: Vec<f64> = (0..rows.nrows()).map(|i| i as f64).collect();
        let (detected, trace) =
            change_point(rows.view(), &times, None, &scan_config()).unwrap();
        assert_eq!(detected, None, "threshold {}", trace.threshold);
        assert_eq!(trace.times.len(), rows.nrows() - 30 + 1);
    }

    #[test]
    fn mean_shift_is_detected_near_its_onset() {
        let shift = 250;
        let rows = drifting_features(Some(shift), 17);
        let times: Vec<f64> = (0..rows.nrows()).map(|i| i as f64).collect();
        let (detected, trace) =
            change_point(rows.view(), &times, None, &scan_config()).unwrap();
        let t = detected.expect("shift missed");
        assert!(
            t >= shift as f64 && t <= (shift + 2 * 30) as f64,
            "detected {t}, threshold {}",
            trace.threshold
        );
    }

    #[test]
    fn scan_stops_at_the_onset_bound() {
        let rows = drifting_features(Some(250), 17);
        let times: Vec<f64> = (0..rows.nrows()).map(|i| i as f64).collect();
        let (detected, _) =
            change_point(rows.view(), &times, Some(200.0), &scan_config()).unwrap();
        assert_eq!(detected, None);
    }

    #[test]
    fn short_series_is_rejected() {
        let rows = Array2::<f64>::zeros((100, 4));
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(change_point(rows.view(), &times, None, &scan_config()).is_err());
    }

    #[test]
    fn identity_spectrum() {
        let m = spectral_metrics(Array2::<f64>::eye(3).view());
        assert_eq!(m.rank, 3);
        assert!((m.spectral_gap - 1.0).abs() < 1e-12);
        assert!((m.effective_rank - 3.0).abs() < 1e-12);
        assert!((m.condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_spectrum() {
        let m = spectral_metrics(array![[1.0, 2.0], [2.0, 4.0]].view());
        assert_eq!(m.rank, 1);
        assert_eq!(m.spectral_gap, 0.0);
        assert!((m.effective_rank - 1.0).abs() < 1e-12);
        assert!((m.condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_spectrum() {
        let m = spectral_metrics(array![[2.0, 0.0], [0.0, 1.0]].view());
        assert_eq!(m.rank, 2);
        assert!((m.spectral_gap - 0.5).abs() < 1e-12);
        assert!((m.effective_rank - 1.25).abs() < 1e-12);
        assert!((m.condition - 2.0).abs() < 1e-12);
    }

    fn jacobi_eigenvalues(mut s: Vec<Vec<f64>>) -> Vec<f64> {
        let k = s.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..k {
                for j in i + 1..k {
                    off += s[i][j] * s[i][j];
                }
            }
            if off < 1e-26 {
                break;
            }
            for p in 0..k {
                for q in p + 1..k {
                    if s[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for i in 0..k {
                        let (a, b) = (s[i][p], s[i][q]);
                        s[i][p] = c * a - sn * b;
                        s[i][q] = sn * a + c * b;
                    }
                    for j in 0..k {
                        let (a, b) = (s[p][j], s[q][j]);
                        s[p][j] = c * a - sn * b;
                        s[q][j] = sn * a + c * b;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..k).map(|i| s[i][i]).collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        eig
    }

    #[test]
    fn singular_values_match_a_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = Array2::from_shape_fn((8, 5), |_| rng.gen_range(-2.0..2.0));
        let mut gram = vec![vec![0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                gram[i][j] = (0..8).map(|t| a[[t, i]] * a[[t, j]]).sum();
            }
        }
        let expected: Vec<f64> = jacobi_eigenvalues(gram)
            .into_iter()
            .map(|l| l.max(0.0).sqrt())
            .collect();
        let got = spectral_metrics(a.view()).singular_values;
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-9 * e.max(1.0), "{g} vs {e}");
        }
    }

    mod analysis_properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(proptest::test_runner::Config::with_cases(32))]
            // Stable rank never exceeds the numerical rank.
            #[test]
            fn effective_rank_is_bounded(
                rows in 2usize..6,
                cols in 2usize..6,
                seed in 0u64..1000,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0));
                let metrics = spectral_metrics(m.view());
                prop_assert!(metrics.effective_rank <= metrics.rank as f64 + 1e-9);
                prop_assert!(metrics.spectral_gap >= 0.0 && metrics.spectral_gap <= 1.0 + 1e-12);
            }

            // Divergence between Gaussians is nonnegative.
            #[test]
            fn divergence_is_nonnegative(seed in 0u64..500) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s0 = random_spd(3, &mut rng);
                let s1 = random_spd(3, &mut rng);
                let from = summary(
                    (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    s0,
                );
                let to = summary(
                    (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    s1,
                );
                let d = kl_divergence(&from, &to).unwrap();
                prop_assert!(d >= -1e-9, "{}", d);
            }
        }
    }
}
