use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermalfield::balanced::taylor_tensor;
use thermalfield::correlators::{eval_strip, smeared_boundary, Profile, QuadratureConfig, StripPoint, TestFunction};
use thermalfield::equilibrium::{
    check_lkms_momentum, check_lte, clustering_metric, clustering_ratio, extract_temperature, fit_mixture,
    validate_time_spectrum, CLUSTERING_BOUND, CLUSTERING_SIGMA,
};
use thermalfield::minkowski::{
    polarization_reconstruct, FourVector, InverseTemperatureVector, SymmetricTensor, TimeDirection,
};
use thermalfield::spectral::{hotbang_local_beta, MixtureComponent, StateSpec, HOTBANG_FACTOR};
use thermalfield::Result;

type Outcome = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn cfg() -> QuadratureConfig {
    Profile::Default.config()
}

fn q0() -> FourVector {
    FourVector::TIME_UNIT
}

fn boosts() -> Vec<TimeDirection> {
    vec![
        TimeDirection::REST,
        TimeDirection::from_rapidity(1, 0.5).unwrap(),
        TimeDirection::from_rapidity(3, 1.0).unwrap(),
    ]
}

fn kms_gallery() -> Vec<(String, StateSpec, InverseTemperatureVector)> {
    let mut out = Vec::new();
    for beta in [0.5, 1.0, 2.0] {
        for (i, e) in boosts().into_iter().enumerate() {
            let b = InverseTemperatureVector::new(beta, e).unwrap();
            out.push((format!("kms beta={beta} boost={i}"), StateSpec::kms(0.0, b).unwrap(), b));
        }
    }
    out
}

fn ivt(b: [f64; 4]) -> InverseTemperatureVector {
    InverseTemperatureVector::try_from(b).unwrap()
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

fn wick_square() -> Outcome {
    let mut worst = 0.0f64;
    for beta in [0.5, 1.0, 2.0] {
        let s = StateSpec::kms(0.0, InverseTemperatureVector::at_rest(beta)?)?;
        let d = taylor_tensor(&s, &q0(), 0, &cfg())?.tensor.get(&[]);
        let exact = 1.0 / (12.0 * beta * beta);
        worst = worst.max((d - exact).abs() / exact);
    }
    Ok((worst < 1e-6, format!("max relative error {worst:.3e}")))
}

fn time_spectrum() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for m in [0.0, 1.0] {
        let s = StateSpec::kms(m, InverseTemperatureVector::at_rest(1.0)?)?;
        let r = validate_time_spectrum(&s, &q0(), &cfg())?;
        ok &= r.max_residual < 1e-6 && r.gap_exact;
        notes.push(format!(
            "m={m}: residual {:.3e}, gap exact {}",
            r.max_residual, r.gap_exact
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn momentum_kms() -> Outcome {
    let mut worst = 0.0f64;
    for (_, s, b) in kms_gallery() {
        let r = check_lkms_momentum(&s, &q0(), &b, 10.0 / b.beta(), 1e-8, &cfg())?;
        worst = worst.max(r.max_residual);
    }
    let b = InverseTemperatureVector::at_rest(1.0)?;
    let v = check_lkms_momentum(&StateSpec::vacuum(0.0)?, &q0(), &b, 10.0, 1e-8, &cfg())?;
    Ok((
        worst < 1e-8 && v.max_residual >= 0.5,
        format!(
            "KMS max residual {worst:.3e}, vacuum max residual {:.3}",
            v.max_residual
        ),
    ))
}

fn odd_orders() -> Outcome {
    let mut worst = 0.0f64;
    for (_, s, _) in kms_gallery() {
        for n in [1, 3] {
            let d = taylor_tensor(&s, &q0(), n, &cfg())?;
            let ratio = d.tensor.frobenius_norm() / (10.0 * d.error_estimate);
            worst = worst.max(ratio);
        }
    }
    Ok((worst < 1.0, format!("max |T_n| / (10 err) = {worst:.3e}")))
}

fn agreement() -> Outcome {
    let mut cases: Vec<(String, StateSpec, InverseTemperatureVector, FourVector)> =
        kms_gallery().into_iter().map(|(n, s, b)| (n, s, b, q0())).collect();
    let hb = StateSpec::hot_bang(0.7)?;
    for q in [[1.0, 0.0, 0.0, 0.0], [2.0, 0.5, 0.0, 0.0], [3.0, 0.0, 1.0, 1.0]] {
        let q = FourVector::new(q[0], q[1], q[2], q[3])?;
        cases.push((format!("hotbang q={q}"), hb.clone(), hotbang_local_beta(&hb, &q)?, q));
    }
    cases.push((
        "vacuum".into(),
        StateSpec::vacuum(0.0)?,
        InverseTemperatureVector::at_rest(1.0)?,
        q0(),
    ));
    for (name, m) in [
        (
            "mixture rest",
            mixture(&[(0.5, [1.0, 0.0, 0.0, 0.0]), (0.5, [2.0, 0.0, 0.0, 0.0])]),
        ),
        (
            "mixture boosted",
            mixture(&[(0.3, [1.0, 0.0, 0.0, 0.0]), (0.7, [1.5, 0.6, 0.0, 0.0])]),
        ),
    ] {
        let b = extract_temperature(&m, &q0(), 0.0, &cfg())?.beta_vec;
        cases.push((name.into(), m, b, q0()));
    }
    let mut disagreements = Vec::new();
    let mut tally = Vec::new();
    for (name, s, b, q) in &cases {
        let lte = check_lte(s, q, b, 2, 1e-6, &cfg())?.verdict.passed();
        let lkms = check_lkms_momentum(s, q, b, 10.0 / b.beta(), 1e-8, &cfg())?
            .verdict
            .passed();
        tally.push(format!("{}{}", u8::from(lte), u8::from(lkms)));
        if lte != lkms {
            disagreements.push(name.clone());
        }
    }
    Ok((
        disagreements.is_empty(),
        format!(
            "{} cases, lte/lkms verdicts [{}], disagreements {:?}",
            cases.len(),
            tally.join(" "),
            disagreements
        ),
    ))
}

fn hotbang_field() -> Outcome {
    let a = 0.8;
    let s = StateSpec::hot_bang(a)?;
    let mut ratios = Vec::new();
    let mut homogeneity = 0.0f64;
    for q in [[1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0], [2.0, 1.0, 0.0, 0.0]] {
        let q = FourVector::new(q[0], q[1], q[2], q[3])?;
        let b = extract_temperature(&s, &q, 0.0, &cfg())?.beta_vec.vector();
        let b2 = extract_temperature(&s, &(1.5 * q), 0.0, &cfg())?.beta_vec.vector();
        homogeneity = homogeneity.max((b2 - 1.5 * b).euclidean_norm() / (1.5 * b).euclidean_norm());
        // proportional to q: residual of the projection on q
        let c = b.euclidean_norm() / (a * q.euclidean_norm());
        let along = (b - (c * a) * q).euclidean_norm() / b.euclidean_norm();
        homogeneity = homogeneity.max(along);
        ratios.push(b.square().sqrt() / (a * q.square().sqrt()));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max) / mean;
    Ok((
        spread < 1e-3 && homogeneity < 1e-3 && (mean - HOTBANG_FACTOR).abs() < 1e-3,
        format!("factor c = {mean:.6} (fixed {HOTBANG_FACTOR}), spread {spread:.3e}, homogeneity/direction defect {homogeneity:.3e}"),
    ))
}

fn polarization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let basis: Vec<FourVector> = (0..4).map(FourVector::basis).collect();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let rank = 1 + i % 4;
        let t = SymmetricTensor::from_fn(rank, |_| rng.random_range(-1.0..1.0));
        let back = polarization_reconstruct(|v| t.diagonal(v), rank, &basis)?;
        worst = worst.max(back.sub(&t).max_abs());
    }
    Ok((worst < 1e-10, format!("100 tensors, max coefficient error {worst:.3e}")))
}

fn random_test_function(rng: &mut ChaCha8Rng) -> TestFunction {
    let mut h = TestFunction::gaussian([0; 4].map(|_| rng.random_range(-1.0..1.0)), rng.random_range(0.6..1.2));
    h.constant = rng.random_range(-1.0..1.0);
    h.linear = [0; 4].map(|_| rng.random_range(-0.5..0.5));
    for j in 0..4 {
        for l in j..4 {
            let v = rng.random_range(-0.2..0.2);
            h.quadratic[j][l] = v;
            h.quadratic[l][j] = v;
        }
    }
    h
}

fn commutator_independence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let mass = if i % 2 == 0 { 0.0 } else { 1.0 };
        let states = [
            StateSpec::vacuum(mass)?,
            StateSpec::kms(mass, ivt([1.0, 0.0, 0.0, 0.0]))?,
            StateSpec::mixture(
                mass,
                vec![
                    MixtureComponent {
                        weight: 0.4,
                        beta: ivt([1.0, 0.0, 0.0, 0.0]),
                    },
                    MixtureComponent {
                        weight: 0.6,
                        beta: ivt([2.0, 0.0, 0.0, 0.0]),
                    },
                ],
            )?,
        ];
        let h = random_test_function(&mut rng);
        let parts = states
            .iter()
            .map(|s| Ok(smeared_boundary(s, &q0(), &h, &cfg())? - smeared_boundary(s, &q0(), &h.reflected(), &cfg())?))
            .collect::<Result<Vec<_>>>()?;
        for p in &parts[1..] {
            worst = worst.max((p - parts[0]).norm());
        }
    }
    Ok((worst < 1e-9, format!("20 test functions, max deviation {worst:.3e}")))
}

fn mixtures() -> Outcome {
    let mut weight_error = 0.0f64;
    let pairs = [
        ([1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0], 0.3),
        ([0.8, 0.0, 0.0, 0.0], [1.5, 0.6, 0.0, 0.0], 0.65),
    ];
    for (b1, b2, w) in pairs {
        let s = mixture(&[(w, b1), (1.0 - w, b2)]);
        let fit = fit_mixture(&s, &q0(), &[ivt(b1), ivt(b2)], 2, &cfg())?;
        weight_error = weight_error
            .max((fit.weights[0] - w).abs())
            .max((fit.weights[1] - (1.0 - w)).abs());
    }
    let genuine = mixture(&[(0.5, [1.0, 0.0, 0.0, 0.0]), (0.5, [2.0, 0.0, 0.0, 0.0])]);
    let extracted = extract_temperature(&genuine, &q0(), 0.0, &cfg())?.beta_vec;
    let mut candidates = vec![extracted, ivt([1.0, 0.0, 0.0, 0.0]), ivt([2.0, 0.0, 0.0, 0.0])];
    for beta in [0.8, 1.2, 1.4, 1.6, 1.8, 2.5] {
        candidates.push(InverseTemperatureVector::at_rest(beta)?);
    }
    let mut all_fail = true;
    for b in &candidates {
        let r = check_lte(&genuine, &q0(), b, 2, 1e-6, &cfg())?;
        let decisive = r
            .per_order
            .iter()
            .any(|o| o.discrepancy > 10.0 * o.error_estimate && !o.verdict.passed());
        all_fail &= !r.verdict.passed() && decisive;
    }
    Ok((
        weight_error < 1e-4 && all_fail,
        format!(
            "max weight error {weight_error:.3e}; genuine mixture fails all {} sharp-beta checks: {all_fail}",
            candidates.len()
        ),
    ))
}

fn clustering() -> Outcome {
    let b = InverseTemperatureVector::at_rest(1.0)?;
    let s = StateSpec::kms(0.0, b)?;
    let metric = clustering_metric(&s, &q0(), &b, &cfg())?;
    let loose = QuadratureConfig {
        absolute_floor: 1e-10,
        ..cfg()
    };
    let shifted = |t: f64| -> Result<num_complex::Complex64> {
        let p = StripPoint::new(t * b.direction().vector(), CLUSTERING_SIGMA * b.beta(), &b)?;
        Ok(eval_strip(&s, &q0(), &p, &loose)?.value + 1e-3)
    };
    let polluted = clustering_ratio(shifted, b.beta())?;
    Ok((
        metric < CLUSTERING_BOUND && polluted > CLUSTERING_BOUND,
        format!("KMS ratio {metric:.3e}, with additive constant {polluted:.3e}, bound {CLUSTERING_BOUND:e}"),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("wick square 1/(12 beta^2)", wick_square),
        ("time-axis spectra and mass gap", time_spectrum),
        ("momentum-space KMS identity", momentum_kms),
        ("odd thermal functions vanish", odd_orders),
        ("LTE / LKMS agreement", agreement),
        ("hot-bang temperature field", hotbang_field),
        ("polarization round trip", polarization),
        ("state-independent commutator", commutator_independence),
        ("mixture fitting", mixtures),
        ("clustering proxy", clustering),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({detail}) [{:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
