//! Adaptive Gauss–Kronrod (G7/K15) integration of complex-valued integrands.
//!
//! The interval is first cut into panels no wider than a caller-supplied
//! width, so oscillatory integrands get a fixed number of nodes per quarter
//! period. The panel with the largest |K15 − G7| is bisected until the total
//! error estimate meets the tolerance or the evaluation budget runs out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub absolute: f64,
    pub relative: f64,
    pub max_evaluations: usize,
}

impl Tolerance {
    fn target(&self, value: Complex64) -> f64 {
        self.absolute.max(self.relative * value.norm())
    }
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// One G7/K15 pass over [a, b]; returns (Kronrod value, |K − G|).
pub fn gauss_kronrod15<F>(f: &F, a: f64, b: f64) -> (Complex64, f64)
where
    F: Fn(f64) -> Complex64,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let k = kronrod * h;
    let g = gauss * h;
    (k, (k - g).norm())
}

/// Integrates `f` over [a, b] with initial panels no wider than `max_width`.
pub fn integrate<F>(f: F, a: f64, b: f64, max_width: f64, tol: &Tolerance) -> Result<Integral>
where
    F: Fn(f64) -> Complex64,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::InvalidInput(format!("bad integration interval [{a}, {b}]")));
    }
    if b == a {
        return Ok(Integral {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }
    let width = if max_width.is_finite() && max_width > 0.0 {
        max_width
    } else {
        b - a
    };
    let count = ((b - a) / width).ceil().max(1.0) as usize;
    let step = (b - a) / count as f64;

    let mut heap = BinaryHeap::with_capacity(count);
    let mut evaluations = 0usize;
    for i in 0..count {
        let pa = a + step * i as f64;
        let pb = if i + 1 == count { b } else { a + step * (i + 1) as f64 };
        let (value, error) = gauss_kronrod15(&f, pa, pb);
        evaluations += 15;
        heap.push(Panel {
            a: pa,
            b: pb,
            value,
            error,
        });
    }

    let (mut value, mut error) = totals(&heap);
    loop {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::Convergence {
                estimate: f64::INFINITY,
                tolerance: tol.target(value),
            });
        }
        if error <= tol.target(value) {
            // running sums drift; confirm with an ordered re-summation
            let (v, e) = totals(&heap);
            (value, error) = (v, e);
            if error <= tol.target(value) {
                return Ok(Integral {
                    value,
                    error,
                    evaluations,
                });
            }
        }
        if evaluations + 30 > tol.max_evaluations {
            return Err(Error::Convergence {
                estimate: error,
                tolerance: tol.target(value),
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel collapsed to machine resolution
            heap.push(worst);
            return Err(Error::Convergence {
                estimate: error,
                tolerance: tol.target(value),
            });
        }
        value -= worst.value;
        error -= worst.error;
        for (pa, pb) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gauss_kronrod15(&f, pa, pb);
            value += v;
            error += e;
            heap.push(Panel {
                a: pa,
                b: pb,
                value: v,
                error: e,
            });
        }
        evaluations += 30;
        if evaluations.is_multiple_of(30_000) {
            (value, error) = totals(&heap);
        }
    }
}

fn totals(heap: &BinaryHeap<Panel>) -> (Complex64, f64) {
    // sum in interval order so the result does not depend on heap layout
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    panels
        .iter()
        .fold((Complex64::new(0.0, 0.0), 0.0), |(v, e), p| (v + p.value, e + p.error))
}

/// Real-valued convenience wrapper.
pub fn integrate_real<F>(f: F, a: f64, b: f64, max_width: f64, tol: &Tolerance) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let r = integrate(|x| Complex64::new(f(x), 0.0), a, b, max_width, tol)?;
    Ok((r.value.re, r.error))
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
