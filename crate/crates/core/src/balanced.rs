//! Vacuum-subtracted two-point function D_q(z) = w_q(z) − w_vac(z), its
//! Taylor tensors at z = 0 and the massless thermal functions.
//!
//! For a KMS component with rest-frame coordinates (τ, ρ) of z,
//!
//! D(z) = (2π²)⁻¹ ∫₀^∞ dr (r²/ω) sinc(rρ) cos(ωτ) / (e^{βω} − 1),
//!
//! which is smooth at z = 0 and decays like e^{−βr}.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;

use crate::correlators::QuadratureConfig;
use crate::error::{Error, Result};
use crate::minkowski::{
    boost_to_rest_frame, minkowski_product, try_polarization_reconstruct, FourVector, InverseTemperatureVector,
    SymmetricTensor,
};
use crate::quadrature::gauss_kronrod15;
use crate::spectral::{bose_negative, ResolvedState, StateSpec};

/// Highest order for which Taylor tensors and thermal functions are offered.
pub const MAX_ORDER: usize = 4;

// relative rounding level of a single evaluation of D
const ROUNDING: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalancedDerivative {
    pub order: usize,
    pub tensor: SymmetricTensor,
    /// Bound on the weighted Frobenius norm of the tensor error.
    pub error_estimate: f64,
}

fn difference_component(
    mass: f64,
    beta: &InverseTemperatureVector,
    z: &FourVector,
    config: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let b = beta.beta();
    let local = boost_to_rest_frame(&beta.direction()).apply(z);
    let tau = local.t();
    let rho = local.spatial_norm();
    let k_max = config.decay_exponent / b + mass;
    let freq = tau.abs().max(rho);
    let width = if freq > 0.0 {
        (PI / (2.0 * freq)).min(0.5 / b)
    } else {
        0.5 / b
    };
    let integrand = |r: f64| {
        let omega = (r * r + mass * mass).sqrt();
        let w = r * rho;
        let sinc = if w.abs() < 1e-4 {
            1.0 - w * w / 6.0 + w.powi(4) / 120.0
        } else {
            w.sin() / w
        };
        let measure = if mass == 0.0 {
            r * bose_negative(b * r)
        } else {
            r * r / omega * bose_negative(b * omega)
        };
        measure * sinc * (omega * tau).cos() / (2.0 * PI * PI)
    };
    // fixed panels: for the small |z| used in differencing the rule is the
    // same at every z, so its discretization error is smooth in z
    let count = (k_max / width).ceil().max(1.0) as usize;
    if count > config.max_evaluations / 15 {
        return Err(Error::Convergence {
            estimate: f64::INFINITY,
            tolerance: config.absolute_floor,
        });
    }
    let step = k_max / count as f64;
    let f = |r: f64| Complex64::new(integrand(r), 0.0);
    let mut value = 0.0;
    let mut error = 0.0;
    for i in 0..count {
        let (v, e) = gauss_kronrod15(&f, step * i as f64, step * (i + 1) as f64);
        value += v.re;
        error += e;
    }
    Ok((value, error))
}

fn difference_resolved(state: &ResolvedState, z: &FourVector, config: &QuadratureConfig) -> Result<(f64, f64)> {
    let mut value = 0.0;
    let mut error = 0.0;
    for c in &state.components {
        if let Some(beta) = &c.beta {
            let (v, e) = difference_component(state.mass, beta, z, config)?;
            value += c.weight * v;
            error += c.weight * e;
        }
    }
    Ok((value, error))
}

/// D_q(z) by a single absolutely convergent radial quadrature.
pub fn regularized_difference(
    spec: &StateSpec,
    q: &FourVector,
    z: &FourVector,
    config: &QuadratureConfig,
) -> Result<f64> {
    let state = spec.resolve(q)?;
    Ok(difference_resolved(&state, z, config)?.0)
}

/// Length scale on which D varies in coordinate directions: the smallest
/// β·e^{−α} over thermal components (α the rapidity relative to the frame).
fn variation_scale(state: &ResolvedState) -> f64 {
    state
        .components
        .iter()
        .filter_map(|c| c.beta)
        .map(|b| {
            let g = b.direction().gamma();
            b.beta() / (g + (g * g - 1.0).max(0.0).sqrt())
        })
        .fold(f64::INFINITY, f64::min)
}

// central stencils (offset multiples of h, weight); all O(h²)
fn stencil(order: usize) -> &'static [(f64, f64)] {
    match order {
        1 => &[(1.0, 0.5), (-1.0, -0.5)],
        2 => &[(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)],
        3 => &[(2.0, 0.5), (1.0, -1.0), (-1.0, 1.0), (-2.0, -0.5)],
        4 => &[(2.0, 1.0), (1.0, -4.0), (0.0, 6.0), (-1.0, -4.0), (-2.0, 1.0)],
        _ => &[],
    }
}

struct Directional {
    value: f64,
    error: f64,
}

fn directional_derivative(
    state: &ResolvedState,
    v: &FourVector,
    order: usize,
    h0: f64,
    config: &QuadratureConfig,
) -> Result<Directional> {
    let levels = config.richardson_levels;
    let stencil = stencil(order);
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
    let mut noise = 0.0f64;
    for j in 0..levels {
        let h = h0 / (1u32 << j) as f64;
        let mut sum = 0.0;
        let mut err = 0.0;
        for &(offset, weight) in stencil {
            let (d, _) = difference_resolved(state, &((offset * h) * *v), config)?;
            sum += weight * d;
            err += weight.abs() * ROUNDING * d.abs();
        }
        let scale = h.powi(order as i32);
        let mut row = vec![sum / scale];
        noise = err / scale;
        for k in 1..=j {
            let f = 4f64.powi(k as i32);
            let prev = table[j - 1][k - 1];
            row.push(row[k - 1] + (row[k - 1] - prev) / (f - 1.0));
        }
        table.push(row);
    }
    let last = table[levels - 1][levels - 1];
    let richardson = if levels > 1 {
        (last - table[levels - 2][levels - 2]).abs()
    } else {
        last.abs()
    };
    // extrapolation amplifies the last-level noise by at most ~2
    let error = richardson.max(2.0 * noise);
    if !last.is_finite() || !error.is_finite() {
        return Err(Error::Convergence {
            estimate: f64::INFINITY,
            tolerance: 0.0,
        });
    }
    Ok(Directional { value: last, error })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn taylor_resolved(state: &ResolvedState, order: usize, config: &QuadratureConfig) -> Result<BalancedDerivative> {
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!("Taylor order {order} exceeds {MAX_ORDER}")));
    }
    config.validate()?;
    let scale = variation_scale(state);
    if !scale.is_finite() {
        // no thermal component: D vanishes identically
        return Ok(BalancedDerivative {
            order,
            tensor: SymmetricTensor::zeros(order),
            error_estimate: 0.0,
        });
    }
    let basis: Vec<FourVector> = (0..4).map(FourVector::basis).collect();
    if order == 0 {
        let (d, e) = difference_resolved(state, &FourVector::ZERO, config)?;
        return Ok(BalancedDerivative {
            order,
            tensor: SymmetricTensor::scalar(d),
            error_estimate: e,
        });
    }
    let (d0, _) = difference_resolved(state, &FourVector::ZERO, config)?;
    let natural = d0.abs() / scale.powi(order as i32);
    let h0 = config.diff_step * scale;
    let mut worst = 0.0f64;
    let tensor = try_polarization_reconstruct(
        |v| {
            let len = v.euclidean_norm();
            let d = directional_derivative(state, v, order, h0 / len, config)?;
            let bound = 1e-3 * (d.value.abs() + natural * len.powi(order as i32));
            if d.error > bound {
                return Err(Error::Convergence {
                    estimate: d.error,
                    tolerance: bound,
                });
            }
            worst = worst.max(d.error);
            Ok(d.value)
        },
        order,
        &basis,
    )?;
    let subsets = ((1u64 << order) - 1) as f64;
    let error_estimate = 2f64.powi(order as i32) * subsets / factorial(order) * worst;
    Ok(BalancedDerivative {
        order,
        tensor,
        error_estimate,
    })
}

/// Rank-n tensor of partial derivatives of D_q at z = 0 by central differences
/// with Richardson extrapolation on directional diagonals, assembled through
/// the polarization identity.
pub fn taylor_tensor(
    spec: &StateSpec,
    q: &FourVector,
    order: usize,
    config: &QuadratureConfig,
) -> Result<BalancedDerivative> {
    let state = spec.resolve(q)?;
    taylor_resolved(&state, order, config)
}

/// Exact ∂ⁿ(β²)⁻¹ at `beta`, from the Taylor coefficients of
/// 1/((β + εv)²) = 1/(A + Bε + Cε²) and polarization.
pub fn inverse_square_derivative(order: usize, beta: &FourVector) -> Result<SymmetricTensor> {
    let a = beta.square();
    if !(a > 0.0) {
        return Err(Error::Domain(format!("∂ⁿ(β²)⁻¹ needs a timelike vector, got {beta}")));
    }
    let basis: Vec<FourVector> = (0..4).map(FourVector::basis).collect();
    try_polarization_reconstruct(
        |v| {
            let b = 2.0 * minkowski_product(beta, v);
            let c = v.square();
            let mut series = vec![1.0 / a];
            for k in 1..=order {
                let prev2 = if k >= 2 { series[k - 2] } else { 0.0 };
                series.push(-(b * series[k - 1] + c * prev2) / a);
            }
            Ok(factorial(order) * series[order])
        },
        order,
        &basis,
    )
}

/// Closed-form constant (−1)^{n/2} ζ(n+2)/(2π²) for even n; used as an
/// independent oracle for the calibration.
pub fn zeta_constant(order: usize) -> f64 {
    match order {
        0 => (PI * PI / 6.0) / (2.0 * PI * PI),
        2 => -(PI.powi(4) / 90.0) / (2.0 * PI * PI),
        4 => (PI.powi(6) / 945.0) / (2.0 * PI * PI),
        _ => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub order: usize,
    pub c_n: f64,
    /// Relative Frobenius mismatch ‖T − c_n ∂ⁿ(β²)⁻¹‖/‖T‖ at β = (1,0,0,0).
    pub residual: f64,
}

static CALIBRATION: OnceLock<std::result::Result<Vec<Calibration>, String>> = OnceLock::new();

fn run_calibration() -> Result<Vec<Calibration>> {
    let config = QuadratureConfig::default();
    let spec = StateSpec::kms(0.0, InverseTemperatureVector::at_rest(1.0)?)?;
    let mut out = Vec::new();
    for order in 0..=MAX_ORDER {
        if order % 2 == 1 {
            out.push(Calibration {
                order,
                c_n: 0.0,
                residual: 0.0,
            });
            continue;
        }
        let measured = taylor_tensor(&spec, &FourVector::TIME_UNIT, order, &config)?.tensor;
        let shape = inverse_square_derivative(order, &FourVector::TIME_UNIT)?;
        let c_n = if order == 0 {
            1.0 / 12.0
        } else {
            measured.dot(&shape) / shape.dot(&shape)
        };
        let residual = measured.sub(&shape.scale(c_n)).frobenius_norm() / measured.frobenius_norm();
        out.push(Calibration { order, c_n, residual });
    }
    Ok(out)
}

/// Thermal-function constants c₀…c₄, computed once per process by matching
/// the finite-difference pipeline at β = (1,0,0,0); c₀ is pinned to 1/12.
pub fn calibration() -> Result<&'static [Calibration]> {
    match CALIBRATION.get_or_init(|| run_calibration().map_err(|e| e.to_string())) {
        Ok(v) => Ok(v),
        Err(msg) => Err(Error::Solver {
            message: format!("thermal-function calibration failed: {msg}"),
            residual: f64::NAN,
        }),
    }
}

/// c_n ∂ⁿ(β²)⁻¹ for the massless field; odd orders vanish identically.
pub fn thermal_function(order: usize, beta: &InverseTemperatureVector) -> Result<SymmetricTensor> {
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "thermal function order {order} exceeds {MAX_ORDER}"
        )));
    }
    if order % 2 == 1 {
        return Ok(SymmetricTensor::zeros(order));
    }
    let c = calibration()?[order].c_n;
    Ok(inverse_square_derivative(order, &beta.vector())?.scale(c))
}

/// Thermal function of a (possibly mixed) massless state at q.
pub fn thermal_function_for(spec: &StateSpec, q: &FourVector, order: usize) -> Result<SymmetricTensor> {
    let state = spec.resolve(q)?;
    if state.mass != 0.0 {
        return Err(Error::Unsupported(
            "thermal functions are defined for the massless field only".into(),
        ));
    }
    let mut total = SymmetricTensor::zeros(order);
    for c in &state.components {
        if let Some(b) = &c.beta {
            total = total.add(&thermal_function(order, b)?.scale(c.weight));
        }
    }
    Ok(total)
}
