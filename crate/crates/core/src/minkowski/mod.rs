//! Minkowski kinematics in natural units with metric η = diag(+,−,−,−).
//!
//! Points, momenta and inverse-temperature vectors all share [`FourVector`].
//! Time directions are normalized future-pointing unit vectors; an inverse
//! temperature vector combines a positive scalar β with such a direction.

mod tensor;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use tensor::{
    polarization_reconstruct, tensor_from_timelike_diagonal, try_polarization_reconstruct, SymmetricTensor, TensorFit,
    MAX_POLARIZATION_RANK,
};

const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct FourVector {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl FourVector {
    pub const ZERO: FourVector = FourVector {
        t: 0.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };
    pub const TIME_UNIT: FourVector = FourVector {
        t: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        if [t, x, y, z].iter().all(|c| c.is_finite()) {
            Ok(FourVector { t, x, y, z })
        } else {
            Err(Error::InvalidInput(format!(
                "four-vector components must be finite, got ({t}, {x}, {y}, {z})"
            )))
        }
    }

    /// Unit vector along coordinate axis `mu`.
    pub fn basis(mu: usize) -> Self {
        let mut c = [0.0; 4];
        c[mu] = 1.0;
        Self::from_raw(c)
    }

    pub(crate) fn from_raw(c: [f64; 4]) -> Self {
        FourVector {
            t: c[0],
            x: c[1],
            y: c[2],
            z: c[3],
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn components(&self) -> [f64; 4] {
        [self.t, self.x, self.y, self.z]
    }

    pub fn component(&self, mu: usize) -> f64 {
        self.components()[mu]
    }

    pub fn spatial_norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Minkowski square v·v.
    pub fn square(&self) -> f64 {
        minkowski_product(self, self)
    }

    pub fn euclidean_norm(&self) -> f64 {
        (self.t * self.t + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Components with the index lowered, v_μ = η_μν v^ν.
    pub fn lowered(&self) -> [f64; 4] {
        let c = self.components();
        [c[0], -c[1], -c[2], -c[3]]
    }

    pub(crate) fn to_na(self) -> Vector4<f64> {
        Vector4::from(self.components())
    }

    pub(crate) fn from_na(v: &Vector4<f64>) -> Self {
        Self::from_raw([v[0], v[1], v[2], v[3]])
    }
}

impl TryFrom<[f64; 4]> for FourVector {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        FourVector::new(c[0], c[1], c[2], c[3])
    }
}

impl From<FourVector> for [f64; 4] {
    fn from(v: FourVector) -> Self {
        v.components()
    }
}

impl fmt::Display for FourVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.t, self.x, self.y, self.z)
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector::from_raw([self.t + o.t, self.x + o.x, self.y + o.y, self.z + o.z])
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector::from_raw([self.t - o.t, self.x - o.x, self.y - o.y, self.z - o.z])
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector::from_raw([-self.t, -self.x, -self.y, -self.z])
    }
}

impl Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        FourVector::from_raw([self * v.t, self * v.x, self * v.y, self * v.z])
    }
}

/// u⁰v⁰ − u¹v¹ − u²v² − u³v³.
pub fn minkowski_product(u: &FourVector, v: &FourVector) -> f64 {
    u.t * v.t - u.x * v.x - u.y * v.y - u.z * v.z
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalClass {
    TimelikeFuture,
    TimelikePast,
    Spacelike,
    NullFuture,
    NullPast,
    Zero,
}

impl CausalClass {
    pub fn is_timelike(self) -> bool {
        matches!(self, CausalClass::TimelikeFuture | CausalClass::TimelikePast)
    }
}

/// Light-cone classification. A vector whose Minkowski square is within
/// 1e−14 of its Euclidean square is treated as null.
pub fn classify(v: &FourVector) -> CausalClass {
    let scale = v.euclidean_norm().powi(2);
    if scale == 0.0 {
        return CausalClass::Zero;
    }
    let sq = v.square();
    if sq.abs() <= 1e-14 * scale {
        if v.t > 0.0 {
            CausalClass::NullFuture
        } else {
            CausalClass::NullPast
        }
    } else if sq > 0.0 {
        if v.t > 0.0 {
            CausalClass::TimelikeFuture
        } else {
            CausalClass::TimelikePast
        }
    } else {
        CausalClass::Spacelike
    }
}

/// Future-directed unit timelike vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(into = "[f64; 4]")]
pub struct TimeDirection(FourVector);

impl TimeDirection {
    pub const REST: TimeDirection = TimeDirection(FourVector::TIME_UNIT);

    /// Normalizes a future timelike vector; anything else is rejected.
    pub fn new(v: FourVector) -> Result<Self> {
        match classify(&v) {
            CausalClass::TimelikeFuture => {
                let n = v.square().sqrt();
                Ok(TimeDirection((1.0 / n) * v))
            }
            c => Err(Error::Domain(format!(
                "time direction must be future timelike, got {v} ({c:?})"
            ))),
        }
    }

    /// Unit vector with rapidity `rapidity` along spatial axis `axis` (1..=3).
    pub fn from_rapidity(axis: usize, rapidity: f64) -> Result<Self> {
        if !(1..=3).contains(&axis) {
            return Err(Error::InvalidInput(format!("spatial axis must be 1..=3, got {axis}")));
        }
        let mut c = [rapidity.cosh(), 0.0, 0.0, 0.0];
        c[axis] = rapidity.sinh();
        TimeDirection::new(FourVector::try_from(c)?)
    }

    pub fn vector(&self) -> FourVector {
        self.0
    }

    /// Lorentz factor relative to the coordinate frame, e⁰.
    pub fn gamma(&self) -> f64 {
        self.0.t
    }
}

impl From<TimeDirection> for [f64; 4] {
    fn from(e: TimeDirection) -> Self {
        e.0.components()
    }
}

/// β·e with β > 0 and e a time direction; serialized as the four-vector βe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct InverseTemperatureVector {
    beta: f64,
    direction: TimeDirection,
}

impl InverseTemperatureVector {
    pub fn new(beta: f64, direction: TimeDirection) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!(
                "inverse temperature must be positive and finite, got {beta}"
            )));
        }
        Ok(InverseTemperatureVector { beta, direction })
    }

    /// Splits a vector in the open forward cone into magnitude and direction.
    pub fn from_vector(b: FourVector) -> Result<Self> {
        match classify(&b) {
            CausalClass::TimelikeFuture => {
                let beta = b.square().sqrt();
                InverseTemperatureVector::new(beta, TimeDirection::new(b)?)
            }
            c => Err(Error::Domain(format!(
                "inverse temperature vector must lie in the forward cone, got {b} ({c:?})"
            ))),
        }
    }

    /// Rest-frame vector (β, 0, 0, 0).
    pub fn at_rest(beta: f64) -> Result<Self> {
        InverseTemperatureVector::new(beta, TimeDirection::REST)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn direction(&self) -> TimeDirection {
        self.direction
    }

    pub fn vector(&self) -> FourVector {
        self.beta * self.direction.vector()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        InverseTemperatureVector::new(self.beta * factor, self.direction)
    }
}

impl TryFrom<[f64; 4]> for InverseTemperatureVector {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        InverseTemperatureVector::from_vector(FourVector::try_from(c)?)
    }
}

impl From<InverseTemperatureVector> for [f64; 4] {
    fn from(b: InverseTemperatureVector) -> Self {
        b.vector().components()
    }
}

/// Real 4×4 matrix Λ acting on contravariant components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzTransform(Matrix4<f64>);

impl LorentzTransform {
    pub fn identity() -> Self {
        LorentzTransform(Matrix4::identity())
    }

    pub fn from_matrix(m: Matrix4<f64>) -> Self {
        LorentzTransform(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn apply(&self, v: &FourVector) -> FourVector {
        FourVector::from_na(&(self.0 * v.to_na()))
    }

    /// Inverse via Λ⁻¹ = η Λᵀ η, exact for a Lorentz matrix.
    pub fn inverse(&self) -> Self {
        let eta = metric_matrix();
        LorentzTransform(eta * self.0.transpose() * eta)
    }

    pub fn compose(&self, other: &LorentzTransform) -> Self {
        LorentzTransform(self.0 * other.0)
    }

    /// max |ΛᵀηΛ − η|.
    pub fn metric_defect(&self) -> f64 {
        let eta = metric_matrix();
        (self.0.transpose() * eta * self.0 - eta).abs().max()
    }
}

pub fn metric_matrix() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::from(METRIC))
}

/// Pure boost Λ with Λe = (1,0,0,0).
pub fn boost_to_rest_frame(e: &TimeDirection) -> LorentzTransform {
    let v = e.vector();
    let g = v.t();
    let s = v.spatial();
    let mut m = Matrix4::identity();
    m[(0, 0)] = g;
    for i in 0..3 {
        m[(0, i + 1)] = -s[i];
        m[(i + 1, 0)] = -s[i];
        for j in 0..3 {
            m[(i + 1, j + 1)] += s[i] * s[j] / (1.0 + g);
        }
    }
    LorentzTransform(m)
}
