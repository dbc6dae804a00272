//! Equilibrium verdicts: order-N local thermal equilibrium, the local KMS
//! momentum identity with clustering, temperature extraction, mixture fitting
//! and the sampled check of the time-axis spectra.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::balanced::{calibration, taylor_tensor, thermal_function, BalancedDerivative, MAX_ORDER};
use crate::correlators::{eval_strip, QuadratureConfig, StripPoint};
use crate::error::{Error, Result};
use crate::minkowski::{
    classify, metric_matrix, CausalClass, FourVector, InverseTemperatureVector, SymmetricTensor, TimeDirection,
};
use crate::quadrature::{integrate, Tolerance};
use crate::spectral::{time_axis_spectrum_along, StateSpec};

/// Guard against overflow of e^{βk} in the momentum identity.
pub const MAX_KMAX_BETA: f64 = 25.0;
/// Horizon (in units of β) of the clustering proxy.
pub const CLUSTERING_HORIZON: f64 = 20.0;
/// Strip displacement (in units of β) of the clustering proxy.
pub const CLUSTERING_SIGMA: f64 = 0.01;
pub const CLUSTERING_BOUND: f64 = 1e-4;
const RESIDUAL_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderDiscrepancy {
    pub order: usize,
    /// Weighted Frobenius norm of the difference tensor.
    pub discrepancy: f64,
    pub tolerance: f64,
    pub error_estimate: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LTEReport {
    pub order_checked: usize,
    pub per_order: Vec<OrderDiscrepancy>,
    pub reference_beta: InverseTemperatureVector,
    /// Jet of the remainder at z = 0: measured minus reference tensors.
    pub remainder: Vec<SymmetricTensor>,
    pub remainder_norms: Vec<f64>,
    pub verdict: Verdict,
}

/// Reference tensor of KMS(β) at order n with its error estimate.
fn reference_tensor(
    mass: f64,
    beta: &InverseTemperatureVector,
    order: usize,
    config: &QuadratureConfig,
) -> Result<BalancedDerivative> {
    if mass == 0.0 {
        let tensor = thermal_function(order, beta)?;
        let residual = calibration()?[order].residual;
        let error_estimate = residual * tensor.frobenius_norm();
        Ok(BalancedDerivative {
            order,
            tensor,
            error_estimate,
        })
    } else {
        taylor_tensor(&StateSpec::kms(mass, *beta)?, &FourVector::TIME_UNIT, order, config)
    }
}

/// Compares balanced derivatives of `spec` at q with those of KMS(candidate)
/// for orders 0..=N; tolerance per order is max(tol, 10 × error estimates).
pub fn check_lte(
    spec: &StateSpec,
    q: &FourVector,
    candidate: &InverseTemperatureVector,
    order: usize,
    tol: f64,
    config: &QuadratureConfig,
) -> Result<LTEReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!("LTE order {order} exceeds {MAX_ORDER}")));
    }
    let mass = spec.mass();
    let mut per_order = Vec::new();
    let mut remainder = Vec::new();
    for n in 0..=order {
        let measured = taylor_tensor(spec, q, n, config)?;
        let reference = reference_tensor(mass, candidate, n, config)?;
        let diff = measured.tensor.sub(&reference.tensor);
        let discrepancy = diff.frobenius_norm();
        let error_estimate = measured.error_estimate + reference.error_estimate;
        let tolerance = tol.max(10.0 * error_estimate);
        per_order.push(OrderDiscrepancy {
            order: n,
            discrepancy,
            tolerance,
            error_estimate,
            verdict: Verdict::from_bool(discrepancy <= tolerance),
        });
        remainder.push(diff);
    }
    let verdict = Verdict::from_bool(per_order.iter().all(|o| o.verdict.passed()));
    let remainder_norms = remainder.iter().map(|t| t.frobenius_norm()).collect();
    Ok(LTEReport {
        order_checked: order,
        per_order,
        reference_beta: *candidate,
        remainder,
        remainder_norms,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LKMSReport {
    pub k_grid: Vec<f64>,
    pub residual_profile: Vec<f64>,
    pub max_residual: f64,
    pub clustering_metric: f64,
    /// max_t |F(te + iβ/2 e) − F(−te + iβ/2 e)|; absent when the mid-strip
    /// line leaves the analyticity domain of some component.
    pub mid_strip_defect: Option<f64>,
    pub tolerance: f64,
    pub clustering_bound: f64,
    pub verdict: Verdict,
}

/// Relative defect |e^{βk}u(−k) − u(k)| / (|e^{βk}u(−k)| + |u(k)| + floor).
pub fn kms_residual(beta: f64, k: f64, u_minus: Complex64, u_plus: Complex64) -> f64 {
    let lhs = (beta * k).exp() * u_minus;
    (lhs - u_plus).norm() / (lhs.norm() + u_plus.norm() + RESIDUAL_FLOOR)
}

/// |f(Tβ)| / |f(β)| with T = [`CLUSTERING_HORIZON`].
pub fn clustering_ratio<F>(f: F, beta: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let near = f(beta)?.norm();
    let far = f(CLUSTERING_HORIZON * beta)?.norm();
    if near == 0.0 {
        return Err(Error::Singular(
            "two-point function vanishes at the clustering reference time".into(),
        ));
    }
    Ok(far / near)
}

fn strip_along(
    spec: &StateSpec,
    q: &FourVector,
    candidate: &InverseTemperatureVector,
    t: f64,
    sigma: f64,
    config: &QuadratureConfig,
) -> Result<Complex64> {
    let z = t * candidate.direction().vector();
    let point = StripPoint::new(z, sigma, candidate)?;
    Ok(eval_strip(spec, q, &point, config)?.value)
}

/// Clustering proxy |w(20β e)| / |w(β e)| at σ = 0.01 β.
pub fn clustering_metric(
    spec: &StateSpec,
    q: &FourVector,
    candidate: &InverseTemperatureVector,
    config: &QuadratureConfig,
) -> Result<f64> {
    let beta = candidate.beta();
    let sigma = CLUSTERING_SIGMA * beta;
    let near = strip_along(spec, q, candidate, beta, sigma, config)?;
    // the far value only needs absolute accuracy relative to the near one
    let mut far_config = *config;
    far_config.absolute_floor = config.absolute_floor.max(1e-3 * CLUSTERING_BOUND * near.norm());
    clustering_ratio(
        |t| {
            if t == beta {
                Ok(near)
            } else {
                strip_along(spec, q, candidate, t, sigma, &far_config)
            }
        },
        beta,
    )
}

fn mid_strip_defect(
    spec: &StateSpec,
    q: &FourVector,
    candidate: &InverseTemperatureVector,
    config: &QuadratureConfig,
) -> Option<f64> {
    let beta = candidate.beta();
    let mut worst = 0.0f64;
    for t in [0.5 * beta, beta, 2.0 * beta] {
        let a = strip_along(spec, q, candidate, t, 0.5 * beta, config).ok()?;
        let b = strip_along(spec, q, candidate, -t, 0.5 * beta, config).ok()?;
        worst = worst.max((a - b).norm());
    }
    Some(worst)
}

/// Momentum-space KMS identity along the candidate direction on |k| ≤ k_max,
/// plus the clustering proxy.
pub fn check_lkms_momentum(
    spec: &StateSpec,
    q: &FourVector,
    candidate: &InverseTemperatureVector,
    k_max: f64,
    tol: f64,
    config: &QuadratureConfig,
) -> Result<LKMSReport> {
    let beta = candidate.beta();
    if !(k_max > 0.0) || k_max * beta > MAX_KMAX_BETA {
        return Err(Error::InvalidInput(format!(
            "need 0 < k_max·β ≤ {MAX_KMAX_BETA}, got k_max·β = {}",
            k_max * beta
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let e = candidate.direction();
    let nodes = 100;
    let k_grid: Vec<f64> = (0..=nodes).map(|j| k_max * j as f64 / nodes as f64).collect();
    let residual_profile = k_grid
        .iter()
        .map(|&k| {
            let plus = time_axis_spectrum_along(spec, q, &e, k)?;
            let minus = time_axis_spectrum_along(spec, q, &e, -k)?;
            Ok(kms_residual(beta, k, minus, plus))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_residual = residual_profile.iter().copied().fold(0.0, f64::max);
    let clustering = clustering_metric(spec, q, candidate, config)?;
    let verdict = Verdict::from_bool(max_residual <= tol && clustering <= CLUSTERING_BOUND);
    Ok(LKMSReport {
        k_grid,
        residual_profile,
        max_residual,
        clustering_metric: clustering,
        mid_strip_defect: mid_strip_defect(spec, q, candidate, config),
        tolerance: tol,
        clustering_bound: CLUSTERING_BOUND,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtractionTrace {
    /// Order-0 value D(0) used for the magnitude.
    pub wick_square: f64,
    /// Eigenvalues of η·T₂ (real parts).
    pub eigenvalues: Vec<f64>,
    /// Direction fell back to (1,0,0,0) because the order-2 tensor had no
    /// isolated timelike eigen-direction.
    pub degenerate_direction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtractionResult {
    pub beta_vec: InverseTemperatureVector,
    /// ‖T₂ − thermal_function(2, β)‖ / ‖T₂‖.
    pub fit_residual: f64,
    pub method: ExtractionTrace,
}

/// Null vector of a 4×4 matrix (right singular vector of the smallest
/// singular value).
fn null_vector(m: &Matrix4<f64>) -> FourVector {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    let row = v_t.row(imin);
    FourVector::from_raw([row[0], row[1], row[2], row[3]])
}

fn timelike_eigen_direction(t2: &SymmetricTensor) -> (Option<TimeDirection>, Vec<f64>) {
    let m = metric_matrix() * t2.to_matrix().expect("rank-2 tensor");
    let mut eigenvalues: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
    eigenvalues.sort_by(f64::total_cmp);
    let scale = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return (None, eigenvalues);
    }
    let mut best: Option<TimeDirection> = None;
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        let isolated = eigenvalues
            .iter()
            .enumerate()
            .all(|(j, &mu)| i == j || (lambda - mu).abs() > 1e-8 * scale);
        if !isolated {
            continue;
        }
        let v = null_vector(&(m - Matrix4::identity() * lambda));
        let v = match classify(&v) {
            CausalClass::TimelikeFuture => v,
            CausalClass::TimelikePast => -v,
            _ => continue,
        };
        if let Ok(dir) = TimeDirection::new(v) {
            // ties prefer the direction closest to the coordinate frame
            if best.is_none_or(|b| dir.gamma() < b.gamma()) {
                best = Some(dir);
            }
        }
    }
    (best, eigenvalues)
}

/// Local inverse temperature vector from the Wick square and the order-2
/// balanced derivative of a massless state.
pub fn extract_temperature(
    spec: &StateSpec,
    q: &FourVector,
    tol: f64,
    config: &QuadratureConfig,
) -> Result<ExtractionResult> {
    if spec.mass() != 0.0 {
        return Err(Error::Unsupported(
            "temperature extraction needs a massless state".into(),
        ));
    }
    let d0 = taylor_tensor(spec, q, 0, config)?.tensor.get(&[]);
    if !(d0 > tol.max(0.0)) {
        return Err(Error::NoTemperature(format!("Wick square {d0:e} is not positive")));
    }
    let beta = 1.0 / (12.0 * d0).sqrt();
    let t2 = taylor_tensor(spec, q, 2, config)?.tensor;
    let (direction, eigenvalues) = timelike_eigen_direction(&t2);
    let degenerate = direction.is_none();
    if degenerate
        && t2.frobenius_norm() > 0.0
        && eigenvalues
            .windows(2)
            .any(|w| w[1] - w[0] > 1e-8 * w[1].abs().max(w[0].abs()))
    {
        return Err(Error::ExtractionFailed(
            "order-2 tensor has no timelike eigen-direction".into(),
        ));
    }
    let direction = direction.unwrap_or(TimeDirection::REST);
    let beta_vec = InverseTemperatureVector::new(beta, direction)?;
    let synth = thermal_function(2, &beta_vec)?;
    let norm = t2.frobenius_norm();
    let fit_residual = if norm > 0.0 {
        t2.sub(&synth).frobenius_norm() / norm
    } else {
        0.0
    };
    Ok(ExtractionResult {
        beta_vec,
        fit_residual,
        method: ExtractionTrace {
            wick_square: d0,
            eigenvalues,
            degenerate_direction: degenerate,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixtureFit {
    pub weights: Vec<f64>,
    /// ‖A w − y‖ / ‖y‖ over the order-scaled stacked tensor coefficients.
    pub residual: f64,
}

fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let cutoff = 1e-13 * svd.singular_values.max();
    svd.solve(b, cutoff).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Lawson–Hanson active-set solver for min ‖Ax − b‖ subject to x ≥ 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.abs().max() * b.abs().max().max(1.0);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    for _ in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => return Ok(x),
        }
        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(&cols);
            let s_p = solve_least_squares(&sub, b);
            let mut s = DVector::zeros(n);
            for (k, &j) in cols.iter().enumerate() {
                s[j] = s_p[k];
            }
            if cols.iter().all(|&j| s[j] > 0.0) {
                x = s;
                break;
            }
            let alpha = cols
                .iter()
                .filter(|&&j| s[j] <= 0.0)
                .map(|&j| x[j] / (x[j] - s[j]))
                .fold(f64::INFINITY, f64::min);
            x += (&s - &x) * alpha;
            for &j in &cols {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    let residual = (b - a * &x).norm();
    Err(Error::Solver {
        message: "active-set iteration limit reached".into(),
        residual,
    })
}

/// Nonnegative weights summing to one that best reproduce the balanced
/// derivatives of `spec` at q up to order N by KMS(βᵢ) references.
pub fn fit_mixture(
    spec: &StateSpec,
    q: &FourVector,
    candidates: &[InverseTemperatureVector],
    order: usize,
    config: &QuadratureConfig,
) -> Result<MixtureFit> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate inverse temperatures".into()));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "mixture order {order} exceeds {MAX_ORDER}"
        )));
    }
    let mass = spec.mass();
    let mut rows: Vec<f64> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); candidates.len()];
    for n in (0..=order).filter(|n| n % 2 == 0) {
        let y = taylor_tensor(spec, q, n, config)?.tensor.weighted_coefficients();
        let refs = candidates
            .iter()
            .map(|b| Ok(reference_tensor(mass, b, n, config)?.tensor.weighted_coefficients()))
            .collect::<Result<Vec<_>>>()?;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = refs.iter().map(|r| norm(r)).fold(norm(&y), f64::max);
        let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        rows.extend(y.iter().map(|v| v * scale));
        for (col, r) in columns.iter_mut().zip(&refs) {
            col.extend(r.iter().map(|v| v * scale));
        }
    }
    let m = rows.len();
    let k = candidates.len();
    let a = DMatrix::from_fn(m, k, |i, j| columns[j][i]);
    let y = DVector::from_vec(rows);
    // the normalization Σw = 1 enters as a heavily weighted extra row
    let mu = 1e4 * a.abs().max().max(1.0);
    let mut aug = a.clone().insert_row(m, mu);
    let mut rhs = y.clone().insert_row(m, mu);
    for j in 0..k {
        aug[(m, j)] = mu;
    }
    rhs[m] = mu;
    let w = nnls(&aug, &rhs)?;
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Solver {
            message: "all mixture weights vanished".into(),
            residual: y.norm(),
        });
    }
    let w = w / total;
    let residual = (&a * &w - &y).norm() / y.norm().max(f64::MIN_POSITIVE);
    Ok(MixtureFit {
        weights: w.iter().copied().collect(),
        residual,
    })
}

/// Sampled check of the time-axis spectrum: the Gaussian-windowed discrete
/// Fourier transform of strip samples f(t + iσ) against the same window
/// applied to the closed-form spectrum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumValidation {
    pub mass: f64,
    pub beta: f64,
    pub sigma: f64,
    pub window: f64,
    pub time_step: f64,
    pub samples: usize,
    pub rows: Vec<SpectrumRow>,
    pub max_residual: f64,
    /// Closed-form values are exactly zero on every grid node with |k| < m.
    pub gap_exact: bool,
    pub tolerance: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub k: f64,
    pub closed_form: f64,
    pub smoothed_closed_form: f64,
    pub smoothed_numeric_re: f64,
    pub smoothed_numeric_im: f64,
    pub residual: f64,
}

pub const SPECTRUM_TOLERANCE: f64 = 1e-6;

pub fn validate_time_spectrum(
    spec: &StateSpec,
    q: &FourVector,
    config: &QuadratureConfig,
) -> Result<SpectrumValidation> {
    config.validate()?;
    let resolved = spec.resolve(q)?;
    let beta_vec = match resolved.components.as_slice() {
        [c] if c.beta.is_some() => c.beta.expect("checked"),
        _ => {
            return Err(Error::InvalidInput(
                "spectrum validation needs a single KMS component".into(),
            ))
        }
    };
    let mass = resolved.mass;
    let beta = beta_vec.beta();
    let e = beta_vec.direction();
    let sigma = 0.5 * beta;
    let window = 4.0 * beta;
    let dt = config.time_step * beta;
    let half = (8.5 * window / dt).ceil() as i64;
    let times: Vec<f64> = (-half..=half).map(|j| j as f64 * dt).collect();

    let samples: Vec<Complex64> = times
        .par_iter()
        .map(|&t| {
            let point = StripPoint::new(t * e.vector(), sigma, &beta_vec)?;
            Ok(eval_strip(spec, q, &point, config)?.value)
        })
        .collect::<Result<Vec<_>>>()?;

    let norm = (2.0 * PI).sqrt().recip();
    let tol = Tolerance {
        absolute: 1e-16,
        relative: 1e-13,
        max_evaluations: config.max_evaluations,
    };
    let k_nodes = 200;
    let rows: Vec<SpectrumRow> = (0..=k_nodes)
        .into_par_iter()
        .map(|j| {
            let k = (j as f64 - 0.5 * k_nodes as f64) / 10.0 / beta;
            let numeric: Complex64 = times
                .iter()
                .zip(&samples)
                .map(|(&t, f)| f * (-t * t / (2.0 * window * window)).exp() * Complex64::from_polar(1.0, -k * t))
                .sum::<Complex64>()
                * (dt * norm);
            let smoothed = smoothed_spectrum(spec, q, &e, mass, sigma, window, k, &tol)?;
            let closed = time_axis_spectrum_along(spec, q, &e, k)?.re;
            let residual = (numeric - smoothed).norm() / (numeric.norm() + smoothed.abs() + RESIDUAL_FLOOR);
            Ok(SpectrumRow {
                k,
                closed_form: closed,
                smoothed_closed_form: smoothed,
                smoothed_numeric_re: numeric.re,
                smoothed_numeric_im: numeric.im,
                residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let gap_exact = rows.iter().filter(|r| r.k.abs() < mass).all(|r| r.closed_form == 0.0);
    Ok(SpectrumValidation {
        mass,
        beta,
        sigma,
        window,
        time_step: dt,
        samples: times.len(),
        rows,
        max_residual,
        gap_exact,
        tolerance: SPECTRUM_TOLERANCE,
        verdict: Verdict::from_bool(max_residual < SPECTRUM_TOLERANCE && gap_exact),
    })
}

/// (2π)^{−1/2} s ∫ dk' û(k') e^{−k'σ} e^{−s²(k−k')²/2}.
#[allow(clippy::too_many_arguments)]
fn smoothed_spectrum(
    spec: &StateSpec,
    q: &FourVector,
    e: &TimeDirection,
    mass: f64,
    sigma: f64,
    window: f64,
    k: f64,
    tol: &Tolerance,
) -> Result<f64> {
    let reach = 9.0 / window;
    let (lo, hi) = (k - reach, k + reach);
    let mut breaks = vec![lo];
    for edge in [-mass, 0.0, mass] {
        if edge > lo && edge < hi && breaks.last() != Some(&edge) {
            breaks.push(edge);
        }
    }
    breaks.push(hi);
    let integrand = |kp: f64| {
        let u = time_axis_spectrum_along(spec, q, e, kp)
            .map(|u| u.re)
            .unwrap_or(f64::NAN);
        Complex64::new(
            u * (-kp * sigma).exp() * (-0.5 * window * window * (k - kp).powi(2)).exp(),
            0.0,
        )
    };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += integrate(integrand, w[0], w[1], 0.25 / window, tol)?.value.re;
    }
    Ok(total * window / (2.0 * PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{hotbang_local_beta, MixtureComponent, HOTBANG_FACTOR};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn ivt(b: [f64; 4]) -> InverseTemperatureVector {
        InverseTemperatureVector::try_from(b).unwrap()
    }

    fn q0() -> FourVector {
        FourVector::TIME_UNIT
    }

    fn mixture(pairs: &[(f64, [f64; 4])]) -> StateSpec {
        StateSpec::mixture(
            0.0,
            pairs
                .iter()
                .map(|(w, b)| MixtureComponent {
                    weight: *w,
                    beta: ivt(*b),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn kms_self_check_passes() {
        let b = ivt([1.2, 0.3, 0.0, 0.1]);
        let s = StateSpec::kms(0.0, b).unwrap();
        let r = check_lte(&s, &q0(), &b, 4, 1e-6, &cfg()).unwrap();
        assert!(r.verdict.passed(), "{r:?}");
        assert_eq!(r.per_order.len(), 5);
    }

    #[test]
    fn vacuum_fails_order_zero() {
        let s = StateSpec::vacuum(0.0).unwrap();
        let r = check_lte(&s, &q0(), &ivt([1., 0., 0., 0.]), 0, 1e-6, &cfg()).unwrap();
        assert!(!r.verdict.passed());
        assert!((r.per_order[0].discrepancy - 1.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn hotbang_passes_at_local_beta() {
        let s = StateSpec::hot_bang(1.0).unwrap();
        let b = hotbang_local_beta(&s, &q0()).unwrap();
        assert!(check_lte(&s, &q0(), &b, 2, 1e-6, &cfg()).unwrap().verdict.passed());
        let wrong = ivt([1., 0., 0., 0.]);
        assert!(!check_lte(&s, &q0(), &wrong, 2, 1e-6, &cfg()).unwrap().verdict.passed());
    }

    #[test]
    fn lte_argument_validation() {
        let s = StateSpec::vacuum(0.0).unwrap();
        let b = ivt([1., 0., 0., 0.]);
        assert!(check_lte(&s, &q0(), &b, 2, 0.0, &cfg()).is_err());
        assert!(check_lte(&s, &q0(), &b, 5, 1e-6, &cfg()).is_err());
        assert!(check_lkms_momentum(&s, &q0(), &b, 30.0, 1e-8, &cfg()).is_err());
    }

    #[test]
    fn verdicts_are_scale_invariant() {
        let d = OrderDiscrepancy {
            order: 0,
            discrepancy: 0.3,
            tolerance: 0.2,
            error_estimate: 0.0,
            verdict: Verdict::Fail,
        };
        for c in [1e-9, 1.0, 7.0, 1e9] {
            assert_eq!(Verdict::from_bool(d.discrepancy * c <= d.tolerance * c), d.verdict);
        }
    }

    #[test]
    fn lkms_kms_passes_and_vacuum_fails() {
        let b = ivt([1.0, 0.0, 0.0, 0.0]);
        let s = StateSpec::kms(0.0, b).unwrap();
        let r = check_lkms_momentum(&s, &q0(), &b, 10.0, 1e-8, &cfg()).unwrap();
        assert!(r.verdict.passed(), "{} {}", r.max_residual, r.clustering_metric);
        assert!(r.mid_strip_defect.unwrap() < 1e-8);
        let v = check_lkms_momentum(&StateSpec::vacuum(0.0).unwrap(), &q0(), &b, 10.0, 1e-8, &cfg()).unwrap();
        assert!(!v.verdict.passed());
        assert!(v.max_residual > 0.99);
    }

    #[test]
    fn lkms_residual_independent_of_base_point() {
        let b = ivt([1.5, 0.5, 0.0, 0.0]);
        let s = StateSpec::kms(1.0, b).unwrap();
        let a = check_lkms_momentum(&s, &q0(), &b, 10.0, 1e-8, &cfg()).unwrap();
        let c = check_lkms_momentum(
            &s,
            &FourVector::new(3.0, -1.0, 2.0, 0.5).unwrap(),
            &b,
            10.0,
            1e-8,
            &cfg(),
        )
        .unwrap();
        for (x, y) in a.residual_profile.iter().zip(&c.residual_profile) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn mixture_fails_lkms() {
        let s = mixture(&[(0.5, [1., 0., 0., 0.]), (0.5, [2., 0., 0., 0.])]);
        let r = check_lkms_momentum(&s, &q0(), &ivt([1., 0., 0., 0.]), 10.0, 1e-8, &cfg()).unwrap();
        assert!(!r.verdict.passed());
        assert!(r.max_residual > 1e-3);
    }

    #[test]
    fn clustering_rejects_constant_offset() {
        let b = ivt([1., 0., 0., 0.]);
        let s = StateSpec::kms(0.0, b).unwrap();
        let c = clustering_metric(&s, &q0(), &b, &cfg()).unwrap();
        assert!(c < CLUSTERING_BOUND);
        let loose = QuadratureConfig {
            absolute_floor: 1e-10,
            ..cfg()
        };
        let f = |t: f64| strip_along(&s, &q0(), &b, t, 0.01, &loose).map(|v| v + 1e-3);
        assert!(clustering_ratio(f, 1.0).unwrap() > CLUSTERING_BOUND);
    }

    #[test]
    fn extraction_round_trip() {
        for b in [
            [1., 0., 0., 0.],
            [2.0 * 1f64.cosh(), 2.0 * 1f64.sinh(), 0., 0.],
            [0.7, 0.1, -0.2, 0.3],
        ] {
            let beta = ivt(b);
            let s = StateSpec::kms(0.0, beta).unwrap();
            let r = extract_temperature(&s, &q0(), 0.0, &cfg()).unwrap();
            let got = r.beta_vec.vector();
            let rel = (got - beta.vector()).euclidean_norm() / beta.vector().euclidean_norm();
            assert!(rel < 1e-4, "{b:?}: {got}");
            assert!(r.fit_residual < 1e-5);
            assert!(!r.method.degenerate_direction);
        }
    }

    #[test]
    fn extraction_refuses_vacuum_and_massive() {
        let v = StateSpec::vacuum(0.0).unwrap();
        assert!(matches!(
            extract_temperature(&v, &q0(), 0.0, &cfg()),
            Err(Error::NoTemperature(_))
        ));
        let m = StateSpec::kms(1.0, ivt([1., 0., 0., 0.])).unwrap();
        assert!(matches!(
            extract_temperature(&m, &q0(), 0.0, &cfg()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn hotbang_factor_matches_extraction() {
        let s = StateSpec::hot_bang(1.0).unwrap();
        let r = extract_temperature(&s, &q0(), 0.0, &cfg()).unwrap();
        let factor = r.beta_vec.beta() / 1.0;
        assert!((factor - HOTBANG_FACTOR).abs() < 1e-6, "extracted factor {factor}");
    }

    #[test]
    fn nnls_known_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0, 1.0]);
        let x = nnls(&a, &b).unwrap();
        // unconstrained optimum has x₂ < 0; the constrained one sits on x₂ = 0
        assert!((x[0] - 1.5).abs() < 1e-12 && x[1] == 0.0, "{x}");
    }

    #[test]
    fn mixture_weights_recovered() {
        let b1 = [1., 0., 0., 0.];
        let b2 = [2., 0.4, 0., 0.];
        let s = mixture(&[(0.3, b1), (0.7, b2)]);
        let fit = fit_mixture(&s, &q0(), &[ivt(b1), ivt(b2)], 2, &cfg()).unwrap();
        assert!(
            (fit.weights[0] - 0.3).abs() < 1e-4 && (fit.weights[1] - 0.7).abs() < 1e-4,
            "{fit:?}"
        );
        assert!(fit.residual < 1e-6);

        let single = StateSpec::kms(0.0, ivt(b1)).unwrap();
        let fit = fit_mixture(&single, &q0(), &[ivt(b1)], 2, &cfg()).unwrap();
        assert_eq!(fit.weights, vec![1.0]);

        let genuine = mixture(&[(0.5, [1., 0., 0., 0.]), (0.5, [2., 0., 0., 0.])]);
        let fit = fit_mixture(&genuine, &q0(), &[ivt([1., 0., 0., 0.])], 2, &cfg()).unwrap();
        assert!(fit.residual > 1e-2);
        assert!(fit_mixture(&genuine, &q0(), &[], 2, &cfg()).is_err());
    }
}
