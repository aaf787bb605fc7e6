//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cvwitness::factory;
use cvwitness::oracle::{self, FockState};
use cvwitness::sampling::{self, Layout};
use cvwitness::witness::{
    compute_cumulant_set, duan_witness, find_threshold, fourth_order_witness, loss_scaled_cumulants,
};
use cvwitness::{
    CumulantSet, EprOperatorPair, Error, Gate, GaussianSumState, Result, StateDescriptor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn pair() -> EprOperatorPair {
    EprOperatorPair::default()
}

fn desc(s: &str) -> StateDescriptor {
    s.parse().expect("descriptor")
}

fn margin4(d: &StateDescriptor) -> Result<f64> {
    Ok(fourth_order_witness(&compute_cumulant_set(&d.build()?, pair())?).margin)
}

fn margin_duan(d: &StateDescriptor) -> Result<f64> {
    Ok(duan_witness(&compute_cumulant_set(&d.build()?, pair())?, 1.0)?.margin)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn c1_vacuum() -> Result<Outcome> {
    let vac = factory::make_vacuum(2);
    let t = Instant::now();
    let w = fourth_order_witness(&compute_cumulant_set(&vac, pair())?);
    let el = t.elapsed();
    let ok = (w.lhs - 1.0).abs() <= 1e-12
        && (w.rhs - 1.0).abs() <= 1e-12
        && el < Duration::from_millis(1);
    outcome(
        ok,
        format!("lhs={:.3e} rhs={:.3e} eval={:?}", w.lhs, w.rhs, el),
    )
}

fn split_sqv_closed(r: f64) -> f64 {
    let e = |k: f64| (k * r).exp();
    (-3.0 * e(8.0) - 6.0 * e(6.0) + 2.0 * e(4.0) - 6.0 * e(2.0) + 21.0) / (8.0 * e(4.0))
}

fn tmsv_closed(r: f64) -> f64 {
    5.25 * (-4.0 * r).exp() - 0.75 * (4.0 * r).exp() - 3.5
}

fn c2_split_sqv() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut margins = Vec::new();
    for r in grid(0.0, 1.5, 31) {
        let w = fourth_order_witness(&compute_cumulant_set(
            &factory::make_split_squeezed_vacuum(r)?,
            pair(),
        )?);
        worst = worst.max((w.lhs - split_sqv_closed(r)).abs());
        margins.push(w.margin);
    }
    let decreasing = margins.windows(2).all(|w| w[1] < w[0]);
    let ok = worst <= 1e-9 && margins[0].abs() <= 1e-12 && decreasing;
    outcome(
        ok,
        format!(
            "max|lhs-closed|={worst:.2e} margin(0)={:.1e} strictly_decreasing={decreasing}",
            margins[0]
        ),
    )
}

fn c3_tmsv() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut all_negative = true;
    let mut beats_sqv = true;
    for r in grid(0.0, 1.5, 31) {
        let t = fourth_order_witness(&compute_cumulant_set(&factory::make_tmsv(r)?, pair())?);
        let s = fourth_order_witness(&compute_cumulant_set(
            &factory::make_split_squeezed_vacuum(r)?,
            pair(),
        )?);
        worst = worst.max((t.lhs - tmsv_closed(r)).abs());
        if r > 0.0 {
            all_negative &= t.margin < 0.0;
            beats_sqv &= t.margin < s.margin;
        }
    }
    outcome(
        worst <= 1e-9 && all_negative && beats_sqv,
        format!("max|lhs-closed|={worst:.2e} violated_for_r>0={all_negative} stronger_than_split_sqv={beats_sqv}"),
    )
}

fn random_single_mode(rng: &mut ChaCha8Rng) -> Result<GaussianSumState> {
    let s = factory::make_vacuum(1)
        .apply_symplectic(
            &Gate::Squeeze {
                r: rng.random_range(0.0..1.0),
                mode: 0,
            }
            .to_map(1)?,
        )?
        .apply_symplectic(
            &Gate::Rotate {
                phi: rng.random_range(0.0..std::f64::consts::TAU),
                mode: 0,
            }
            .to_map(1)?,
        )?;
    s.apply_loss(0, rng.random_range(0.2..1.0))
}

fn c4_gaussian_reduction() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_nongauss: f64 = 0.0;
    let mut worst_duan = f64::INFINITY;
    let mut worst_identity: f64 = 0.0;
    for i in 0..50 {
        let product = random_single_mode(&mut rng)?.tensor(&random_single_mode(&mut rng)?);
        let state = if i % 2 == 0 {
            product
        } else {
            // entangling gates give correlated Gaussian states as well
            product
                .apply_symplectic(
                    &Gate::TwoModeSqueeze {
                        r: rng.random_range(0.0..0.8),
                        i: 0,
                        j: 1,
                    }
                    .to_map(2)?,
                )?
                .apply_symplectic(
                    &Gate::Beamsplitter {
                        theta: rng.random_range(0.0..1.5),
                        i: 0,
                        j: 1,
                    }
                    .to_map(2)?,
                )?
        };
        let state = state.to_standard_form()?;
        let c = compute_cumulant_set(&state, pair())?;
        for v in [c.k4_u, c.k4_v, c.k22_m1, c.k22_m2] {
            worst_nongauss = worst_nongauss.max(v.abs());
        }
        let d = duan_witness(&c, 1.0)?;
        worst_identity = worst_identity.max((d.lhs - (c.k2_u + c.k2_v)).abs());
        if i % 2 == 0 {
            worst_duan = worst_duan.min(d.margin);
        }
    }
    outcome(
        worst_nongauss < 1e-11 && worst_duan >= -1e-9 && worst_identity == 0.0,
        format!("max|k4,k22|={worst_nongauss:.2e} min duan margin on products={worst_duan:.3e}"),
    )
}

fn factory_states() -> Vec<StateDescriptor> {
    [
        "vacuum",
        "tmsv:r=0.5",
        "tmsv:r=1.2",
        "split-sqv:r=0.7",
        "split-fock:n=1,eps=0.3",
        "split-fock:n=2,eps=0.4",
        "split-fock:n=3,eps=0.5",
        "split-phssv:r=0.3",
        "split-phssv:r=1",
    ]
    .iter()
    .map(|s| desc(s))
    .collect()
}

fn c5_loss_scaling() -> Result<Outcome> {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for d in factory_states() {
        let state = d.build()?;
        let base = compute_cumulant_set(&state, pair())?;
        for k in 1..=9 {
            let eta = k as f64 / 10.0;
            let direct = compute_cumulant_set(&state.apply_loss_all(eta)?, pair())?.to_array();
            let scaled = loss_scaled_cumulants(&base, eta)?.to_array();
            for (a, b) in direct.iter().zip(scaled) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let el = t.elapsed();
    outcome(
        worst <= 1e-10 && el < Duration::from_secs(1),
        format!("max deviation={worst:.2e} runtime={el:.2?}"),
    )
}

fn eta_threshold(d: &StateDescriptor) -> Result<f64> {
    find_threshold(|eta| margin4(&d.with_param("eta", eta)?), 0.05, 1.0, 1e-4)
}

fn describe_threshold(r: &Result<f64>) -> String {
    match r {
        Ok(v) => format!("{v:.4}"),
        Err(Error::NoCrossing {
            margin_lo,
            margin_hi,
            ..
        }) => {
            format!("none (margin {margin_lo:.3} at lo, {margin_hi:.3} at hi)")
        }
        Err(e) => format!("error: {e}"),
    }
}

fn c6_phssv_thresholds() -> Result<Outcome> {
    let t = Instant::now();
    let low = eta_threshold(&desc("split-phssv:r=0.001"));
    let low_ok = matches!(low, Ok(v) if (v - 0.57).abs() <= 0.01);
    let high_d = desc("split-phssv:r=1");
    let mut max_margin = f64::NEG_INFINITY;
    for k in 5..=100 {
        max_margin = max_margin.max(margin4(&high_d.with_param("eta", k as f64 / 100.0)?)?);
    }
    let high = eta_threshold(&high_d);
    let high_ok = max_margin < 0.0 && matches!(high, Err(Error::NoCrossing { .. }));
    let el = t.elapsed();
    outcome(
        low_ok && high_ok && el < Duration::from_secs(30),
        format!(
            "r=1e-3 crossing={} (want 0.57±0.01); r=1 crossing={} max margin on [0.05,1]={max_margin:.4} runtime={el:.2?}",
            describe_threshold(&low),
            describe_threshold(&high)
        ),
    )
}

fn c7_split_photon() -> Result<Outcome> {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for (infid, want) in [(1e-10, 0.57), (1e-3, 0.66)] {
        let eps = factory::calibrate_ring_epsilon(&factory::fock_coefficients(1), infid)?;
        let d = desc("split-fock:n=1").with_param("eps", eps)?;
        let th = eta_threshold(&d);
        ok &= matches!(th, Ok(v) if (v - want).abs() <= 0.01);
        parts.push(format!(
            "fid=1-{infid:e}: eps={eps:.4e} crossing={} (want {want}±0.01)",
            describe_threshold(&th)
        ));
    }
    let el = t.elapsed();
    outcome(
        ok && el < Duration::from_secs(120),
        format!("{} runtime={el:.2?}", parts.join("; ")),
    )
}

fn c8_duan_blind_spot() -> Result<Outcome> {
    let d = desc("split-phssv:eta=1");
    let mut worst4 = f64::NEG_INFINITY;
    let mut worst_r = 0.0;
    for k in 1..=100 {
        let r = k as f64 / 100.0;
        let m = margin4(&d.with_param("r", r)?)?;
        if m > worst4 {
            worst4 = m;
            worst_r = r;
        }
    }
    let duan = find_threshold(|r| margin_duan(&d.with_param("r", r)?), 0.01, 1.0, 1e-4);
    let duan_ok = matches!(duan, Ok(v) if (0.50..=0.60).contains(&v));
    outcome(
        duan_ok && worst4 < 0.0,
        format!(
            "duan crossing r={} (want [0.50,0.60]); max fourth-order margin over r in [0.01,1] = {worst4:.4} at r={worst_r}",
            describe_threshold(&duan)
        ),
    )
}

fn oracle_states() -> Vec<StateDescriptor> {
    let mut out = Vec::new();
    for eta in [1.0, 0.7] {
        let mut base = Vec::new();
        for r in [0.3, 1.0, 1.5] {
            base.push(format!("tmsv:r={r}"));
            base.push(format!("split-sqv:r={r}"));
            base.push(format!("split-phssv:r={r}"));
        }
        for n in 0..=2 {
            for eps in [0.05, 0.3] {
                base.push(format!("split-fock:n={n},eps={eps}"));
            }
        }
        for b in base {
            out.push(desc(&b).with_param("eta", eta).expect("eta"));
        }
    }
    out
}

fn c9_c10_oracle() -> Result<(Outcome, Outcome)> {
    let t = Instant::now();
    let mut worst_ratio: f64 = 0.0;
    let mut worst_state = String::new();
    let mut worst_unc = f64::INFINITY;
    let mut worst_anti = f64::INFINITY;
    let mut fock_states: Vec<FockState> = Vec::new();
    for d in oracle_states() {
        let cutoff = oracle::suggested_cutoff(&d);
        let fock = oracle::build_fock(&d, cutoff)?;
        let tol = (10.0 * fock.leakage()).max(1e-6);
        let a = compute_cumulant_set(&d.build()?, pair())?.to_array();
        let b = fock.cumulant_set(pair())?.to_array();
        for (x, y) in a.iter().zip(b) {
            let ratio = (x - y).abs() / (tol * x.abs().max(1.0));
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_state = d.to_string();
            }
        }
        fock_states.push(fock);
    }
    let el9 = t.elapsed();
    for f in &fock_states {
        for mode in 0..2 {
            worst_unc = worst_unc.min(f.fourth_moment_uncertainty_margin(mode)?);
            worst_anti = worst_anti.min(f.anticommutator_bound_margin(mode)?);
        }
    }
    let o9 = Outcome {
        pass: worst_ratio <= 1.0 && el9 < Duration::from_secs(600),
        detail: format!(
            "{} states; worst |diff|/tolerance={worst_ratio:.3} ({worst_state}) runtime={el9:.2?}",
            fock_states.len()
        ),
    };
    let residuals: Vec<f64> = (1..=3)
        .map(|k| oracle::verify_commutator_identity(k, oracle::DEFAULT_CUTOFF))
        .collect::<Result<_>>()?;
    let o10 = Outcome {
        pass: residuals.iter().all(|r| *r <= 1e-8) && worst_unc >= -1e-9 && worst_anti >= -1e-8,
        detail: format!(
            "commutator residuals k=1..3: {:.1e} {:.1e} {:.1e}; min uncertainty margin={worst_unc:.3e}; min anticommutator-bound margin={worst_anti:.3e}",
            residuals[0], residuals[1], residuals[2]
        ),
    };
    Ok((o9, o10))
}

fn c11_c12_sampling() -> Result<(Outcome, Outcome)> {
    let t = Instant::now();
    let d = desc("split-phssv:r=1");
    let state = d.build()?;
    let analytic = compute_cumulant_set(&state, pair())?;
    let sets = sampling::sample_all(&state, 1_000_000, 11, &d.to_string())?;
    let est = sampling::estimate_cumulant_set(&sets[0], &sets[1], &sets[2], &sets[3], pair())?;

    // κ₄(û) vanishes identically here, so the relative-error check uses κ₄(v̂)
    let idx = CumulantSet::FIELD_NAMES
        .iter()
        .position(|n| *n == "k4_v")
        .expect("field");
    let truth = analytic.to_array()[idx];
    let value = est.value.to_array()[idx];
    let se = est.std_error[idx];
    let rel_se = se / truth.abs();
    let rel_err = (value - truth).abs() / truth.abs();
    let k4_ok = (0.005..=0.03).contains(&rel_se) && (value - truth).abs() <= 3.0 * se;

    let a4 = fourth_order_witness(&analytic);
    let e4 = fourth_order_witness(&est.value);
    let se4 = est.fourth_order_margin_se();
    let ad = duan_witness(&analytic, 1.0)?;
    let ed = est.duan().expect("duan pair");
    let sed = est.duan_margin_se();
    let agree = |a: f64, e: f64, se: f64| a.abs() <= 5.0 * se || (a < 0.0) == (e < 0.0);
    let verdict_ok = agree(a4.margin, e4.margin, se4) && agree(ad.margin, ed.margin, sed);
    let el_main = t.elapsed();

    let t2 = Instant::now();
    let slope_state = factory::make_tmsv(0.5)?;
    let rows = sampling::variance_scaling_study(
        &slope_state,
        pair(),
        &[1_000, 10_000, 100_000, 1_000_000],
        50,
        2024,
    )?;
    let slopes: Vec<(&str, f64)> = ["k2_u", "k4_u", "k22_m1"]
        .iter()
        .map(|name| {
            let f = CumulantSet::FIELD_NAMES
                .iter()
                .position(|n| n == name)
                .expect("field");
            (*name, sampling::log_log_slope(&rows, f))
        })
        .collect();
    let slope_ok = slopes.iter().all(|(_, s)| (s + 1.0).abs() <= 0.1);
    let el = el_main + t2.elapsed();

    let o11 =
        Outcome {
            pass: k4_ok && verdict_ok && slope_ok && el < Duration::from_secs(600),
            detail: format!(
            "k4_v: analytic={truth:.5} estimate={value:.5} s.e./|k4|={:.2}% |err|/|k4|={:.2}%; \
             margin4 analytic={:.4} est={:.4}±{se4:.4}; duan analytic={:.4} est={:.4}±{sed:.4}; \
             slopes {}; runtime={el:.2?}",
            100.0 * rel_se,
            100.0 * rel_err,
            a4.margin,
            e4.margin,
            ad.margin,
            ed.margin,
            slopes.iter().map(|(n, s)| format!("{n}={s:.3}")).collect::<Vec<_>>().join(" ")
        ),
        };

    let mut parts = Vec::new();
    let mut ok = true;
    for (name, layout) in [("k22_m1", Layout::Het1), ("k22_m2", Layout::Het2)] {
        let f = CumulantSet::FIELD_NAMES
            .iter()
            .position(|n| *n == name)
            .expect("field");
        let (a, e, s) = (
            analytic.to_array()[f],
            est.value.to_array()[f],
            est.std_error[f],
        );
        ok &= (a - e).abs() <= 3.0 * s;
        parts.push(format!(
            "{layout}: wigner={a:.5} husimi-estimate={e:.5}±{s:.5}"
        ));
    }
    let o12 = Outcome {
        pass: ok,
        detail: parts.join("; "),
    };
    Ok((o11, o12))
}

fn report(id: u32, name: &str, r: Result<Outcome>, started: Instant, failures: &mut u32) {
    let (pass, detail) = match r {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if !pass {
        *failures += 1;
    }
    println!(
        "{} {id:>2} {name}: {detail} [{:.2?}]",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed()
    );
}

fn main() -> ExitCode {
    let mut failures = 0;
    type Check = fn() -> Result<Outcome>;
    let singles: [(u32, &str, Check); 8] = [
        (1, "vacuum saturation", c1_vacuum),
        (2, "split squeezed vacuum closed form", c2_split_sqv),
        (3, "two-mode squeezed vacuum closed form", c3_tmsv),
        (4, "Gaussian reduction to Duan", c4_gaussian_reduction),
        (5, "loss-scaling consistency", c5_loss_scaling),
        (
            6,
            "photon-subtracted squeezed vacuum loss thresholds",
            c6_phssv_thresholds,
        ),
        (7, "split single-photon loss thresholds", c7_split_photon),
        (8, "Duan blind spot", c8_duan_blind_spot),
    ];
    for (id, name, f) in singles {
        let t = Instant::now();
        report(id, name, f(), t, &mut failures);
    }

    let t = Instant::now();
    match c9_c10_oracle() {
        Ok((a, b)) => {
            report(9, "Fock-space oracle equivalence", Ok(a), t, &mut failures);
            report(
                10,
                "operator identities and uncertainty bound",
                Ok(b),
                t,
                &mut failures,
            );
        }
        Err(e) => {
            report(
                9,
                "Fock-space oracle equivalence",
                Err(e.clone_msg()),
                t,
                &mut failures,
            );
            report(
                10,
                "operator identities and uncertainty bound",
                Err(e),
                t,
                &mut failures,
            );
        }
    }

    let t = Instant::now();
    match c11_c12_sampling() {
        Ok((a, b)) => {
            report(11, "sampling pipeline", Ok(a), t, &mut failures);
            report(12, "heterodyne invariance", Ok(b), t, &mut failures);
        }
        Err(e) => {
            report(
                11,
                "sampling pipeline",
                Err(e.clone_msg()),
                t,
                &mut failures,
            );
            report(12, "heterodyne invariance", Err(e), t, &mut failures);
        }
    }

    println!("{} of 12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

trait CloneMsg {
    fn clone_msg(&self) -> Error;
}

impl CloneMsg for Error {
    fn clone_msg(&self) -> Error {
        Error::Precondition(self.to_string())
    }
}
