//! Position-space evaluation of two-point functions.
//!
//! Conventions: for a component with Bose weights n± on the mass shell, the
//! relative-variable function in the tube is
//!
//! F(ζ) = (2π)⁻³ ∫ d³p/(2ω) [n₊ e^{i p·ζ} + n₋ e^{−i p·ζ}],  ζ = z + iσe,
//!
//! so the positive sheet is damped by e^{−σ p·e} and the negative sheet, whose
//! Bose weight carries e^{−β p·e_β}, stays damped for 0 < σ < β. After the
//! angular integration in the component rest frame only a radial integral with
//! kernel sin(|p|ρ)/(|p|ρ) remains. Along the time axis this is the function
//! f(t) = (2π)^{−1/2} ∫ dk û(k) e^{ikt} with û from
//! [`crate::spectral::time_axis_spectrum_along`].

use std::cell::RefCell;
use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minkowski::{boost_to_rest_frame, minkowski_product, FourVector, InverseTemperatureVector, TimeDirection};
use crate::quadrature::{gauss_legendre, integrate, Integral, Tolerance};
use crate::spectral::{bose_negative, bose_positive, time_axis_spectrum_along, Component, StateSpec};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Named presets for [`QuadratureConfig`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Fast,
    #[default]
    Default,
    Strict,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Profile::Fast),
            "default" => Ok(Profile::Default),
            "strict" => Ok(Profile::Strict),
            other => Err(Error::InvalidInput(format!(
                "unknown profile {other:?} (fast|default|strict)"
            ))),
        }
    }
}

impl Profile {
    pub fn config(self) -> QuadratureConfig {
        match self {
            Profile::Fast => QuadratureConfig {
                decay_exponent: 30.0,
                max_evaluations: 400_000,
                image_terms: 50,
                diff_step: 0.05,
                richardson_levels: 3,
                tolerance: 1e-4,
                absolute_floor: 1e-12,
                smear_nodes: [32, 24, 24],
                time_step: 0.25,
            },
            Profile::Default => QuadratureConfig {
                decay_exponent: 38.0,
                max_evaluations: 4_000_000,
                image_terms: 200,
                diff_step: 0.05,
                richardson_levels: 4,
                tolerance: 1e-8,
                absolute_floor: 1e-15,
                smear_nodes: [64, 48, 48],
                time_step: 0.08,
            },
            Profile::Strict => QuadratureConfig {
                decay_exponent: 45.0,
                max_evaluations: 40_000_000,
                image_terms: 400,
                diff_step: 0.05,
                richardson_levels: 5,
                tolerance: 1e-10,
                absolute_floor: 1e-16,
                smear_nodes: [96, 64, 64],
                time_step: 0.06,
            },
        }
    }
}

/// Numerical parameters shared by all evaluators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Radial cutoff times the slowest exponential damping rate (K_max·δ).
    pub decay_exponent: f64,
    /// Integrand evaluation budget per 1D integral.
    pub max_evaluations: usize,
    /// Images kept on each side in the massless image sum.
    pub image_terms: usize,
    /// Base finite-difference step as a fraction of β.
    pub diff_step: f64,
    pub richardson_levels: usize,
    /// Relative error target for 1D integrals.
    pub tolerance: f64,
    pub absolute_floor: f64,
    /// Gauss–Legendre nodes in (|p|, cos θ, φ) for smeared integrals.
    pub smear_nodes: [usize; 3],
    /// Sample spacing (fraction of β) for sampled time-axis transforms.
    pub time_step: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Profile::Default.config()
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay_exponent >= 30.0) {
            return Err(Error::InvalidInput(format!(
                "decay_exponent must be at least 30 (got {})",
                self.decay_exponent
            )));
        }
        if !(self.tolerance > 0.0 && self.absolute_floor >= 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if !(self.diff_step > 0.0 && self.diff_step < 0.5) || self.richardson_levels == 0 {
            return Err(Error::InvalidInput(
                "differentiation step must lie in (0, 0.5) with ≥1 level".into(),
            ));
        }
        if self.image_terms == 0 || self.smear_nodes.iter().any(|n| *n < 2) || !(self.time_step > 0.0) {
            return Err(Error::InvalidInput("node counts and time step must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn tolerance(&self) -> Tolerance {
        Tolerance {
            absolute: self.absolute_floor,
            relative: self.tolerance,
            max_evaluations: self.max_evaluations,
        }
    }
}

/// A point z + iσe of the tube 0 < σ < β.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StripPoint {
    z: FourVector,
    sigma: f64,
    direction: TimeDirection,
    beta: f64,
}

impl StripPoint {
    pub fn new(z: FourVector, sigma: f64, beta_vec: &InverseTemperatureVector) -> Result<Self> {
        let beta = beta_vec.beta();
        if !(sigma > 0.0 && sigma < beta) {
            return Err(Error::Domain(format!(
                "strip displacement must satisfy 0 < σ < β = {beta}, got {sigma}"
            )));
        }
        Ok(StripPoint {
            z,
            sigma,
            direction: beta_vec.direction(),
            beta,
        })
    }

    /// Upper half of the tube for the vacuum, where β = ∞.
    pub fn vacuum(z: FourVector, sigma: f64, direction: TimeDirection) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "strip displacement must be positive, got {sigma}"
            )));
        }
        Ok(StripPoint {
            z,
            sigma,
            direction,
            beta: f64::INFINITY,
        })
    }

    pub fn z(&self) -> FourVector {
        self.z
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn direction(&self) -> TimeDirection {
        self.direction
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StripValue {
    pub value: Complex64,
    pub error: f64,
}

fn sinc(w: Complex64) -> Complex64 {
    if w.norm() < 1e-4 {
        let w2 = w * w;
        Complex64::new(1.0, 0.0) - w2 / 6.0 + w2 * w2 / 120.0
    } else {
        w.sin() / w
    }
}

/// Complexified relative coordinate in a component's rest frame: time part τ
/// and spatial "radius" ρ = √(ζ⃗·ζ⃗) (bilinear, principal root).
#[derive(Clone, Copy, Debug)]
struct RestCoordinates {
    tau: Complex64,
    rho: Complex64,
}

impl RestCoordinates {
    fn new(re: &FourVector, im: &FourVector, frame: &TimeDirection) -> Self {
        let boost = boost_to_rest_frame(frame);
        let (r, i) = (boost.apply(re).components(), boost.apply(im).components());
        let tau = Complex64::new(r[0], i[0]);
        let rho2: Complex64 = (1..4).map(|j| Complex64::new(r[j], i[j]).powi(2)).sum();
        RestCoordinates { tau, rho: rho2.sqrt() }
    }
}

fn oscillation_width(coords: &RestCoordinates, damping: f64) -> f64 {
    let freq = coords.tau.re.abs().max(coords.rho.re.abs());
    let osc = if freq > 0.0 { PI / (2.0 * freq) } else { f64::INFINITY };
    osc.min(4.0 / damping)
}

/// Radial integral of one component at complex rest-frame coordinates.
fn component_strip(
    mass: f64,
    beta: Option<f64>,
    coords: RestCoordinates,
    config: &QuadratureConfig,
) -> Result<Integral> {
    let im_tau = coords.tau.im;
    let growth = coords.rho.im.abs();
    let positive_decay = im_tau - growth;
    let negative_decay = beta.map_or(f64::INFINITY, |b| b - im_tau - growth);
    let damping = positive_decay.min(negative_decay);
    if !(damping > 0.0) {
        return Err(Error::Domain(format!(
            "point lies outside the analyticity tube of a component (damping rate {damping})"
        )));
    }
    let k_max = config.decay_exponent / damping;
    let tau = coords.tau;
    let rho = coords.rho;
    let b = beta.unwrap_or(f64::INFINITY);
    let integrand = |r: f64| {
        let omega = (r * r + mass * mass).sqrt();
        let measure = r * r / omega;
        let kernel = sinc(rho * r);
        // n₊ e^{iωτ} + n₋ e^{−iωτ}, with n₋ e^{−iωτ} rewritten as
        // n₊ e^{−(β − Im τ)ω} e^{−iω Re τ} to avoid overflow
        let plus = bose_positive(b * omega);
        let pos = (I * omega * tau).exp();
        let neg = if beta.is_some() {
            (-(b - im_tau) * omega).exp() * Complex64::from_polar(1.0, -omega * tau.re)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let thermal = if mass == 0.0 && beta.is_some() {
            // r·n₊(βr) is finite at r → 0
            (r * plus) * (pos + neg)
        } else {
            measure * plus * (pos + neg)
        };
        thermal * kernel / (4.0 * PI * PI)
    };
    let width = oscillation_width(&coords, damping);
    integrate(integrand, 0.0, k_max, width, &config.tolerance())
}

fn strip_value(
    components: &[Component],
    mass: f64,
    re: &FourVector,
    im: &FourVector,
    vacuum_frame: &TimeDirection,
    config: &QuadratureConfig,
) -> Result<StripValue> {
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for c in components {
        let frame = c.beta.map_or(*vacuum_frame, |b| b.direction());
        let coords = RestCoordinates::new(re, im, &frame);
        let r = component_strip(mass, c.beta.map(|b| b.beta()), coords, config)?;
        value += c.weight * r.value;
        error += c.weight * r.error;
    }
    Ok(StripValue { value, error })
}

/// F_q(z + iσe) by damped radial quadrature.
pub fn eval_strip(
    spec: &StateSpec,
    q: &FourVector,
    point: &StripPoint,
    config: &QuadratureConfig,
) -> Result<StripValue> {
    let resolved = spec.resolve(q)?;
    let im = point.sigma * point.direction.vector();
    strip_value(
        &resolved.components,
        resolved.mass,
        &point.z,
        &im,
        &point.direction,
        config,
    )
}

/// Closed-form massless vacuum function −1/(4π² ζ·ζ) at ζ = z + iσe.
pub fn vacuum_massless(z: &FourVector, sigma: f64, e: &TimeDirection) -> Complex64 {
    let tau = minkowski_product(z, &e.vector());
    let r2 = tau * tau - z.square();
    let a = Complex64::new(tau, sigma);
    -1.0 / (4.0 * PI * PI * (a * a - r2))
}

/// Σ_{n>N} n^{−p} by Euler–Maclaurin.
fn zeta_tail(p: i32, n: usize) -> f64 {
    let n = n as f64;
    let pf = p as f64;
    n.powi(1 - p) / (pf - 1.0) - 0.5 * n.powi(-p) + pf / 12.0 * n.powi(-p - 1)
        - pf * (pf + 1.0) * (pf + 2.0) / 720.0 * n.powi(-p - 3)
        + pf * (pf + 1.0) * (pf + 2.0) * (pf + 3.0) * (pf + 4.0) / 30240.0 * n.powi(-p - 5)
}

/// Thermal massless two-point function as a sum over imaginary-time images of
/// the vacuum function, Σₙ w_vac(z + i(σ + nβ)e), truncated at |n| ≤ `terms`
/// with the remaining pairs summed through their 1/n expansion.
pub fn image_sum_massless(
    beta_vec: &InverseTemperatureVector,
    z: &FourVector,
    sigma: f64,
    terms: usize,
) -> Result<Complex64> {
    let beta = beta_vec.beta();
    if !(sigma >= 0.0 && sigma < beta) {
        return Err(Error::Domain(format!(
            "image sum needs 0 ≤ σ < β, got σ = {sigma}, β = {beta}"
        )));
    }
    let e = beta_vec.direction();
    let tau = minkowski_product(z, &e.vector());
    let r2 = tau * tau - z.square();
    if sigma == 0.0 && (tau * tau - r2).abs() <= 1e-14 * (tau * tau + r2) {
        return Err(Error::Singular(format!(
            "boundary value at null or coincident separation {z}"
        )));
    }
    let a = Complex64::new(tau, sigma);
    let term = |n: i64| {
        let s = a + I * (n as f64 * beta);
        -1.0 / (4.0 * PI * PI * (s * s - r2))
    };
    let mut total = term(0);
    for n in 1..=terms as i64 {
        total += term(n) + term(-n);
    }
    let c = a * a - r2;
    let b2 = beta * beta;
    let a2 = a * a;
    let tail = (2.0 * zeta_tail(2, terms) / b2
        + (2.0 * c - 8.0 * a2) * zeta_tail(4, terms) / (b2 * b2)
        + (2.0 * c * c - 24.0 * a2 * c + 32.0 * a2 * a2) * zeta_tail(6, terms) / (b2 * b2 * b2))
        / (4.0 * PI * PI);
    Ok(total + tail)
}

/// Image-sum oracle for a massless state given by its spec.
pub fn image_sum_for_state(spec: &StateSpec, q: &FourVector, point: &StripPoint, terms: usize) -> Result<Complex64> {
    let resolved = spec.resolve(q)?;
    if resolved.mass != 0.0 {
        return Err(Error::Domain("image sum oracle is massless only".into()));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for c in &resolved.components {
        let v = match c.beta {
            Some(b) if b.direction() == point.direction => image_sum_massless(&b, &point.z, point.sigma, terms)?,
            Some(_) => {
                return Err(Error::Domain(
                    "image sum needs the strip along the state's β direction".into(),
                ))
            }
            None => vacuum_massless(&point.z, point.sigma, &point.direction),
        };
        total += c.weight * v;
    }
    Ok(total)
}

/// Test function h(z) = P(z − c)·exp(−|z − c|²/(2s²)) with |·| Euclidean and
/// P of degree ≤ 2; its Fourier transform is known in closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub center: [f64; 4],
    pub width: f64,
    pub constant: f64,
    #[serde(default)]
    pub linear: [f64; 4],
    #[serde(default)]
    pub quadratic: [[f64; 4]; 4],
}

impl TestFunction {
    pub fn gaussian(center: [f64; 4], width: f64) -> Self {
        TestFunction {
            center,
            width,
            constant: 1.0,
            linear: [0.0; 4],
            quadratic: [[0.0; 4]; 4],
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Domain(format!(
                "test function width must be positive, got {}",
                self.width
            )));
        }
        Ok(())
    }

    /// h⁻(z) = h(−z).
    pub fn reflected(&self) -> Self {
        TestFunction {
            center: self.center.map(|c| -c),
            width: self.width,
            constant: self.constant,
            linear: self.linear.map(|c| -c),
            quadratic: self.quadratic,
        }
    }

    /// Pointwise value (used by position-space cross-checks).
    pub fn value(&self, z: &FourVector) -> f64 {
        let u: Vec<f64> = z.components().iter().zip(&self.center).map(|(z, c)| z - c).collect();
        let u2: f64 = u.iter().map(|x| x * x).sum();
        let mut poly = self.constant;
        for j in 0..4 {
            poly += self.linear[j] * u[j];
            for l in 0..4 {
                poly += self.quadratic[j][l] * u[j] * u[l];
            }
        }
        poly * (-u2 / (2.0 * self.width * self.width)).exp()
    }

    /// ∫ d⁴z h(z) e^{i p·z} with p·z the Minkowski product.
    pub fn fourier(&self, p: &FourVector) -> Complex64 {
        let s2 = self.width * self.width;
        let k = p.lowered();
        let k2: f64 = k.iter().map(|x| x * x).sum();
        let gauss = (2.0 * PI * s2).powi(2) * (-0.5 * s2 * k2).exp();
        let phase: f64 = k.iter().zip(&self.center).map(|(k, c)| k * c).sum();
        let mut poly = Complex64::new(self.constant, 0.0);
        for j in 0..4 {
            poly += I * s2 * self.linear[j] * k[j];
            for l in 0..4 {
                let delta = if j == l { s2 } else { 0.0 };
                poly += self.quadratic[j][l] * (delta - s2 * s2 * k[j] * k[l]);
            }
        }
        Complex64::from_polar(gauss, phase) * poly
    }
}

/// Momentum-space pairing ∫ d⁴z F(z + iσe) h(z); σ = 0 gives the boundary
/// value w(h).
fn smeared(
    spec: &StateSpec,
    q: &FourVector,
    h: &TestFunction,
    damping: Option<(f64, TimeDirection)>,
    config: &QuadratureConfig,
) -> Result<Complex64> {
    h.validate()?;
    let resolved = spec.resolve(q)?;
    let mass = resolved.mass;
    let [nr, nt, np] = config.smear_nodes;
    let (xr, wr) = gauss_legendre(nr);
    let (xt, wt) = gauss_legendre(nt);
    let mut total = Complex64::new(0.0, 0.0);
    for c in &resolved.components {
        let frame = c.beta.map_or(TimeDirection::REST, |b| b.direction());
        let to_lab = boost_to_rest_frame(&frame).inverse();
        let b = c.beta.map_or(f64::INFINITY, |b| b.beta());
        // lab energy ≥ ω e^{−α}; cut where the Gaussian is below e^{−40}
        let alpha = frame.gamma().acosh();
        let r_max = (80f64).sqrt() * alpha.exp() / h.width;
        let mut sum = Complex64::new(0.0, 0.0);
        for (xi, wi) in xr.iter().zip(&wr) {
            let r = 0.5 * r_max * (xi + 1.0);
            let omega = (r * r + mass * mass).sqrt();
            // d³p/(2ω) = r² dr dΩ/(2ω); the Bose factor is folded in per sheet
            let radial = 0.5 * r_max * wi * r * r / (2.0 * omega);
            let plus = bose_positive(b * omega);
            let minus = bose_negative(b * omega);
            for (ct, wtj) in xt.iter().zip(&wt) {
                let st = (1.0 - ct * ct).sqrt();
                for l in 0..np {
                    let phi = 2.0 * PI * (l as f64) / np as f64;
                    let w = radial * wtj * 2.0 * PI / np as f64;
                    let p_rest = FourVector::from_raw([omega, r * st * phi.cos(), r * st * phi.sin(), r * ct]);
                    let p = to_lab.apply(&p_rest);
                    let (dp, dm) = match damping {
                        Some((sigma, e)) => {
                            let pe = minkowski_product(&p, &e.vector());
                            ((-sigma * pe).exp(), (sigma * pe - b * omega).exp() * plus)
                        }
                        None => (1.0, minus),
                    };
                    sum += w * (plus * dp * h.fourier(&p) + dm * h.fourier(&(-p)));
                }
            }
        }
        total += c.weight * sum / (2.0 * PI).powi(3);
    }
    Ok(total)
}

/// Boundary value w_q(h) of the relative-variable two-point function.
pub fn smeared_boundary(
    spec: &StateSpec,
    q: &FourVector,
    h: &TestFunction,
    config: &QuadratureConfig,
) -> Result<Complex64> {
    smeared(spec, q, h, None, config)
}

/// ∫ d⁴z F_q(z + iσe) h(z) for 0 < σ; converges to [`smeared_boundary`] as σ → 0⁺.
pub fn smeared_strip(
    spec: &StateSpec,
    q: &FourVector,
    h: &TestFunction,
    sigma: f64,
    e: &TimeDirection,
    config: &QuadratureConfig,
) -> Result<Complex64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "strip displacement must be positive, got {sigma}"
        )));
    }
    smeared(spec, q, h, Some((sigma, *e)), config)
}

/// f_q(t + iσ) along `e` from the 1D spectral density: the positive
/// frequencies are damped by e^{−kσ} and the negative ones by the Bose factor.
pub fn time_restriction(
    spec: &StateSpec,
    q: &FourVector,
    e: &TimeDirection,
    t: f64,
    sigma: f64,
    config: &QuadratureConfig,
) -> Result<StripValue> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "strip displacement must be positive, got {sigma}"
        )));
    }
    let resolved = spec.resolve(q)?;
    let mass = resolved.mass;
    // slowest decay of the negative-frequency tail along e
    let mut negative_rate = f64::INFINITY;
    for c in &resolved.components {
        if let Some(b) = c.beta {
            let gamma = minkowski_product(&b.direction().vector(), &e.vector());
            let alpha = gamma.max(1.0).acosh();
            negative_rate = negative_rate.min(b.beta() * (-alpha).exp() - sigma);
        }
    }
    if !(negative_rate > 0.0) {
        return Err(Error::Domain(format!(
            "σ = {sigma} lies outside the strip along the chosen direction"
        )));
    }
    let tol = config.tolerance();
    let osc = if t != 0.0 { PI / (2.0 * t.abs()) } else { f64::INFINITY };
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let eval = |k: f64| -> Complex64 {
        match time_axis_spectrum_along(spec, q, e, k) {
            Ok(u) => u.re * (I * k * Complex64::new(t, sigma)).exp(),
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let k_pos = config.decay_exponent / sigma;
    let pos = integrate(eval, mass, k_pos.max(mass), osc.min(4.0 / sigma), &tol)?;
    let neg = if negative_rate.is_finite() {
        let k_neg = config.decay_exponent / negative_rate;
        integrate(|k| eval(-k), mass, k_neg.max(mass), osc.min(4.0 / negative_rate), &tol)?
    } else {
        Integral {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        }
    };
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    let norm = (2.0 * PI).sqrt().recip();
    Ok(StripValue {
        value: norm * (pos.value + neg.value),
        error: norm * (pos.error + neg.error),
    })
}
