//! Momentum-space description of the supported states.
//!
//! Every state is quasifree and its two-point function is fixed by a weight on
//! the two sheets of the mass shell. In relative coordinates at a base point
//! all supported states reduce to finite convex combinations of KMS (or
//! vacuum) components, represented by [`ResolvedState`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minkowski::{
    boost_to_rest_frame, classify, minkowski_product, CausalClass, FourVector, InverseTemperatureVector,
    LorentzTransform, TimeDirection,
};
use crate::quadrature::{integrate_real, Tolerance};

/// 1/(2√2 π^{3/2}), the prefactor of the unitary 1D Fourier transform of the
/// relative-time two-point function.
pub fn spectral_norm() -> f64 {
    1.0 / (2.0 * 2f64.sqrt() * PI.powf(1.5))
}

/// Ratio between the hot-bang inverse temperature vector at a point q and A·q.
///
/// The hot-bang kernel carries the Bose factor 1/(1 − e^{−A(x+y)·p}); at fixed
/// center q = (x+y)/2 this is the KMS factor of the vector 2A·q. The value is
/// confirmed by temperature extraction on the hot-bang kernel (see the
/// `hotbang_factor_matches_extraction` test in `equilibrium`).
pub const HOTBANG_FACTOR: f64 = 2.0;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub beta: InverseTemperatureVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateDoc", into = "StateDoc")]
pub enum StateSpec {
    Vacuum {
        mass: f64,
    },
    Kms {
        mass: f64,
        beta: InverseTemperatureVector,
    },
    /// Massless hot-bang state with kernel exponent A(x+y)·p.
    HotBang {
        a: f64,
    },
    Mixture {
        mass: f64,
        components: Vec<MixtureComponent>,
    },
}

fn check_mass(mass: f64) -> Result<()> {
    if mass.is_finite() && mass >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "mass must be finite and non-negative, got {mass}"
        )))
    }
}

impl StateSpec {
    pub fn vacuum(mass: f64) -> Result<Self> {
        check_mass(mass)?;
        Ok(StateSpec::Vacuum { mass })
    }

    pub fn kms(mass: f64, beta: InverseTemperatureVector) -> Result<Self> {
        check_mass(mass)?;
        Ok(StateSpec::Kms { mass, beta })
    }

    pub fn hot_bang(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidInput(format!(
                "hot-bang constant A must be positive, got {a}"
            )));
        }
        Ok(StateSpec::HotBang { a })
    }

    pub fn mixture(mass: f64, components: Vec<MixtureComponent>) -> Result<Self> {
        check_mass(mass)?;
        if components.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        if let Some(c) = components.iter().find(|c| !(c.weight.is_finite() && c.weight > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "mixture weights must be positive, got {}",
                c.weight
            )));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "mixture weights must sum to 1, got {total}"
            )));
        }
        Ok(StateSpec::Mixture { mass, components })
    }

    pub fn mass(&self) -> f64 {
        match self {
            StateSpec::Vacuum { mass } | StateSpec::Kms { mass, .. } | StateSpec::Mixture { mass, .. } => *mass,
            StateSpec::HotBang { .. } => 0.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serialization cannot fail")
    }

    /// Relative-coordinate description at the base point `q`.
    pub fn resolve(&self, q: &FourVector) -> Result<ResolvedState> {
        let mass = self.mass();
        let components = match self {
            StateSpec::Vacuum { .. } => vec![Component {
                weight: 1.0,
                beta: None,
            }],
            StateSpec::Kms { beta, .. } => vec![Component {
                weight: 1.0,
                beta: Some(*beta),
            }],
            StateSpec::HotBang { a } => {
                vec![Component {
                    weight: 1.0,
                    beta: Some(hotbang_kernel_vector(*a, q)?),
                }]
            }
            StateSpec::Mixture { components, .. } => components
                .iter()
                .map(|c| Component {
                    weight: c.weight,
                    beta: Some(c.beta),
                })
                .collect(),
        };
        Ok(ResolvedState { mass, components })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase", deny_unknown_fields)]
enum StateDoc {
    Vacuum {
        #[serde(default)]
        mass: f64,
    },
    Kms {
        #[serde(default)]
        mass: f64,
        beta: [f64; 4],
    },
    Hotbang {
        #[serde(rename = "A")]
        a: f64,
    },
    Mixture {
        #[serde(default)]
        mass: f64,
        components: Vec<ComponentDoc>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    w: f64,
    beta: [f64; 4],
}

impl TryFrom<StateDoc> for StateSpec {
    type Error = Error;

    fn try_from(doc: StateDoc) -> Result<Self> {
        match doc {
            StateDoc::Vacuum { mass } => StateSpec::vacuum(mass),
            StateDoc::Kms { mass, beta } => StateSpec::kms(mass, InverseTemperatureVector::try_from(beta)?),
            StateDoc::Hotbang { a } => StateSpec::hot_bang(a),
            StateDoc::Mixture { mass, components } => {
                let comps = components
                    .into_iter()
                    .map(|c| {
                        Ok(MixtureComponent {
                            weight: c.w,
                            beta: InverseTemperatureVector::try_from(c.beta)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                StateSpec::mixture(mass, comps)
            }
        }
    }
}

impl From<StateSpec> for StateDoc {
    fn from(s: StateSpec) -> Self {
        match s {
            StateSpec::Vacuum { mass } => StateDoc::Vacuum { mass },
            StateSpec::Kms { mass, beta } => StateDoc::Kms {
                mass,
                beta: beta.into(),
            },
            StateSpec::HotBang { a } => StateDoc::Hotbang { a },
            StateSpec::Mixture { mass, components } => StateDoc::Mixture {
                mass,
                components: components
                    .into_iter()
                    .map(|c| ComponentDoc {
                        w: c.weight,
                        beta: c.beta.into(),
                    })
                    .collect(),
            },
        }
    }
}

fn require_forward(q: &FourVector) -> Result<()> {
    match classify(q) {
        CausalClass::TimelikeFuture => Ok(()),
        c => Err(Error::Domain(format!(
            "hot-bang base point must lie in V+, got {q} ({c:?})"
        ))),
    }
}

/// The vector A·(x+y) appearing in the hot-bang kernel exponent, at center q.
fn hotbang_kernel_vector(a: f64, q: &FourVector) -> Result<InverseTemperatureVector> {
    require_forward(q)?;
    InverseTemperatureVector::from_vector(a * (*q + *q))
}

/// Local inverse temperature vector of the hot-bang state, `HOTBANG_FACTOR`·A·q.
pub fn hotbang_local_beta(spec: &StateSpec, q: &FourVector) -> Result<InverseTemperatureVector> {
    match spec {
        StateSpec::HotBang { a } => {
            require_forward(q)?;
            InverseTemperatureVector::from_vector((HOTBANG_FACTOR * a) * *q)
        }
        _ => Err(Error::InvalidInput(
            "hotbang_local_beta requires a hot-bang state".into(),
        )),
    }
}

/// One KMS component; `beta == None` is the vacuum (β → ∞).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Component {
    pub weight: f64,
    pub beta: Option<InverseTemperatureVector>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedState {
    pub mass: f64,
    pub components: Vec<Component>,
}

impl ResolvedState {
    /// Frame in which densities and 1D spectra are reported by default: the
    /// first thermal component's rest frame, or the coordinate frame.
    pub fn reference_direction(&self) -> TimeDirection {
        self.components
            .iter()
            .find_map(|c| c.beta.map(|b| b.direction()))
            .unwrap_or(TimeDirection::REST)
    }

    pub fn is_vacuum(&self) -> bool {
        self.components.iter().all(|c| c.beta.is_none())
    }
}

/// 1/(1 − e^{−x}); equals 1 for the vacuum limit x = ∞.
pub fn bose_positive(x: f64) -> f64 {
    if x.is_infinite() {
        1.0
    } else {
        -1.0 / (-x).exp_m1()
    }
}

/// 1/(e^{x} − 1); equals 0 for x = ∞.
pub fn bose_negative(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x.exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sheet {
    Positive,
    Negative,
}

/// Mass-shell weight of a state, with spatial momenta given in the rest frame
/// of a reference time direction.
#[derive(Clone, Debug)]
pub struct OnShellDensity {
    mass: f64,
    components: Vec<Component>,
    direction: TimeDirection,
    to_lab: LorentzTransform,
}

impl OnShellDensity {
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn direction(&self) -> TimeDirection {
        self.direction
    }

    pub fn weight(&self, sheet: Sheet, p: [f64; 3]) -> f64 {
        let omega = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + self.mass * self.mass).sqrt();
        let lab = self.to_lab.apply(&FourVector::from_raw([omega, p[0], p[1], p[2]]));
        self.components
            .iter()
            .map(|c| {
                let x = c.beta.map_or(f64::INFINITY, |b| minkowski_product(&b.vector(), &lab));
                c.weight
                    * match sheet {
                        Sheet::Positive => bose_positive(x),
                        Sheet::Negative => bose_negative(x),
                    }
            })
            .sum()
    }
}

/// Mass-shell weight of `spec` at base point `base_point`, in the rest frame of
/// the state's reference direction.
pub fn on_shell_density(spec: &StateSpec, base_point: &FourVector) -> Result<OnShellDensity> {
    let resolved = spec.resolve(base_point)?;
    let direction = resolved.reference_direction();
    Ok(OnShellDensity {
        mass: resolved.mass,
        to_lab: boost_to_rest_frame(&direction).inverse(),
        direction,
        components: resolved.components,
    })
}

const SPECTRUM_TOL: Tolerance = Tolerance {
    absolute: 1e-300,
    relative: 1e-13,
    max_evaluations: 100_000,
};

/// 1D spectral density of a single component along `e`, without the
/// `spectral_norm` prefactor.
fn component_axis_density(mass: f64, beta: Option<InverseTemperatureVector>, e: &TimeDirection, k: f64) -> Result<f64> {
    let kappa = k.abs();
    if kappa < mass || (kappa == 0.0 && beta.is_none()) {
        return Ok(0.0);
    }
    let positive = k > 0.0;
    if beta.is_none() && !positive {
        return Ok(0.0);
    }
    if kappa == 0.0 {
        // massless, thermal: k/(1 − e^{−βk}) → 1/β, evaluated in the β frame
        let b = beta.expect("vacuum handled above");
        let gamma = minkowski_product(&b.direction().vector(), &e.vector());
        return Ok(1.0 / (b.beta() * gamma));
    }

    let (b_scalar, gamma) = match beta {
        Some(b) => (b.beta(), minkowski_product(&b.direction().vector(), &e.vector())),
        None => (f64::INFINITY, 1.0),
    };
    let occupation = |energy: f64| {
        let x = b_scalar * energy;
        if positive {
            bose_positive(x)
        } else {
            bose_negative(x)
        }
    };

    let sinh_alpha = (gamma * gamma - 1.0).max(0.0).sqrt();
    if beta.is_none() || sinh_alpha < 1e-9 {
        // rest frame of the component (or Lorentz-invariant vacuum)
        return Ok((kappa * kappa - mass * mass).sqrt() * occupation(kappa));
    }

    // Boosted component: e has rapidity α relative to the component frame and
    // the mass shell pushes forward onto p·e = κ over a rapidity window.
    let alpha = sinh_alpha.asinh();
    let scale = 1.0 / (2.0 * sinh_alpha);
    let integral = if mass == 0.0 {
        let lo = kappa * (-alpha).exp();
        let hi = kappa * alpha.exp();
        integrate_real(occupation, lo, hi, (hi - lo).max(1e-300), &SPECTRUM_TOL)?.0
    } else {
        let a = (kappa / mass).acosh();
        let lo = (alpha - a).abs();
        let hi = alpha + a;
        integrate_real(
            |theta| mass * theta.sinh() * occupation(mass * theta.cosh()),
            lo,
            hi,
            (hi - lo).max(1e-300),
            &SPECTRUM_TOL,
        )?
        .0
    };
    Ok(scale * integral)
}

/// Fourier density û(k) of the relative-time two-point function along the
/// time direction `e`, normalized so that
/// u(t) = (2π)^{−1/2} ∫ dk û(k) e^{ikt} in the convention of `correlators`.
pub fn time_axis_spectrum_along(
    spec: &StateSpec,
    base_point: &FourVector,
    e: &TimeDirection,
    k: f64,
) -> Result<Complex64> {
    let resolved = spec.resolve(base_point)?;
    let mut total = 0.0;
    for c in &resolved.components {
        total += c.weight * component_axis_density(resolved.mass, c.beta, e, k)?;
    }
    Ok(Complex64::new(spectral_norm() * total, 0.0))
}

/// û(k) along the state's reference direction (the β rest frame for KMS).
pub fn time_axis_spectrum(spec: &StateSpec, base_point: &FourVector, k: f64) -> Result<Complex64> {
    let e = spec.resolve(base_point)?.reference_direction();
    time_axis_spectrum_along(spec, base_point, &e, k)
}

/// Ê(k) = −i ε(k) Θ(k² − m²) √(k² − m²) / (2√2 π^{3/2}).
pub fn commutator_spectrum(mass: f64, k: f64) -> Complex64 {
    let kappa = k.abs();
    if kappa <= mass || k == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let magnitude = spectral_norm() * (kappa * kappa - mass * mass).sqrt();
    Complex64::new(0.0, -k.signum() * magnitude)
}
