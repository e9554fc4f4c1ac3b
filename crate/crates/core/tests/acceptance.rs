//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits nonzero if any failed.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hammersley::estimators::{
    estimate_gamma, fluctuation_scan, martin_bound_check, path_count_tail, ray_study,
    scale_invariance_test, straightness_scan,
};
use hammersley::harness::{self, RunConfig};
use hammersley::oracle::oracle_suite;
use hammersley::point_process::{apply_hyperbolic_map, derive_seed, map_point};
use hammersley::report::EstimatorReport;
use hammersley::{last_passage, sample_cloud, Point, Region, WeightLaw};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn classical() -> WeightLaw {
    WeightLaw::classical()
}

fn c1() -> Verdict {
    let started = Instant::now();
    let rep = oracle_suite(1000, 10, 101).unwrap().report;
    let secs = started.elapsed().as_secs_f64();
    let mismatches = rep.get("mismatches");
    verdict(
        mismatches == 0.0 && secs < 10.0,
        format!("clouds=1000 mismatches={mismatches} runtime={secs:.2}s"),
    )
}

fn c2() -> Verdict {
    let laws = [
        classical(),
        WeightLaw::empirical(vec![1.0, 2.0, 5.0]).unwrap(),
    ];
    let side = 40.0;
    let mut triples = 0;
    let mut super_violations = 0;
    for k in 0..100u64 {
        // Integer weights: both sides of the inequality are exact.
        let law = &laws[k as usize % 2];
        let cloud = sample_cloud(
            Region::square(side).unwrap(),
            1.0,
            law,
            derive_seed(102, 0, k),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(102, 1, k));
        for _ in 0..100 {
            let mut xs: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..side)).collect();
            let mut ts: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..side)).collect();
            xs.sort_by(f64::total_cmp);
            ts.sort_by(f64::total_cmp);
            let p = Point::new(xs[0], ts[0]);
            let z = Point::new(xs[1], ts[1]);
            let q = Point::new(xs[2], ts[2]);
            let whole = last_passage(&cloud, p, q).unwrap();
            let parts = last_passage(&cloud, p, z).unwrap() + last_passage(&cloud, z, q).unwrap();
            triples += 1;
            super_violations += (whole < parts) as usize;
        }
    }
    let lambdas = [0.25, 0.5, 2.0, 3.0, 7.5];
    let map_laws = [classical(), WeightLaw::exponential(1.0).unwrap()];
    let mut map_checks = 0;
    let mut map_violations = 0;
    for k in 0..100u64 {
        let law = &map_laws[k as usize % 2];
        let cloud = sample_cloud(
            Region::square(side).unwrap(),
            1.0,
            law,
            derive_seed(102, 2, k),
        )
        .unwrap();
        let p = Point::new(1.5, 2.5);
        let q = Point::new(side, side - 1.0);
        let base = last_passage(&cloud, p, q).unwrap();
        for &l in &lambdas {
            let shift = Point::new(k as f64, -3.0);
            let mapped = apply_hyperbolic_map(&cloud, l, shift).unwrap();
            let v = last_passage(&mapped, map_point(p, l, shift), map_point(q, l, shift)).unwrap();
            map_checks += 1;
            map_violations += (v.to_bits() != base.to_bits()) as usize;
        }
    }
    verdict(
        super_violations == 0 && map_violations == 0 && triples == 10_000,
        format!(
            "triples={triples} superadditivity_violations={super_violations} map_checks={map_checks} map_violations={map_violations}"
        ),
    )
}

fn c3(dirac: &[EstimatorReport]) -> Verdict {
    let mut increasing = true;
    for w in dirac.windows(2) {
        let slack = 2.0 * w[0].std_error.hypot(w[1].std_error);
        increasing &= w[1].mean >= w[0].mean - slack;
    }
    let last = dirac.last().unwrap();
    let means: Vec<String> = dirac.iter().map(|r| format!("{:.4}", r.mean)).collect();
    verdict(
        increasing && (1.90..=2.00).contains(&last.mean) && last.std_error < 0.01,
        format!(
            "gamma_hat(250,500,1000)=[{}] se(1000)={:.4} increasing={increasing}",
            means.join(", "),
            last.std_error
        ),
    )
}

fn c4(dirac_1000: &EstimatorReport) -> Verdict {
    let bern = estimate_gamma(&WeightLaw::bernoulli(0.25).unwrap(), 2000.0, 200, 104)
        .unwrap()
        .report;
    let target = 0.5 * dirac_1000.mean;
    let se = bern.std_error.hypot(0.5 * dirac_1000.std_error);
    let gap = (bern.mean - target).abs();
    verdict(
        gap <= 3.0 * se,
        format!(
            "bernoulli(2000)={:.4} half_dirac(1000)={:.4} gap={:.4} 3se={:.4}",
            bern.mean,
            target,
            gap,
            3.0 * se
        ),
    )
}

fn c5() -> Verdict {
    let rep = martin_bound_check(&WeightLaw::exponential(1.0).unwrap(), 1000.0, 200, 105)
        .unwrap()
        .report;
    let bound = 2.0 * rep.get("gamma1");
    let ok = rep.mean <= bound + 3.0 * rep.std_error && rep.flag("pass");
    verdict(
        ok,
        format!(
            "exponential gamma_hat={:.4} se={:.4} bound=2*{:.4}={:.4} pass={}",
            rep.mean,
            rep.std_error,
            rep.get("gamma1"),
            bound,
            rep.flag("pass")
        ),
    )
}

fn c6() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, lambda) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let rep = scale_invariance_test(&classical(), 500.0, lambda, 400, 106 + i as u64)
            .unwrap()
            .report;
        let p = rep.get("ks_pvalue");
        ok &= p > 0.001 && rep.get("exact_map_violations") == 0.0;
        parts.push(format!("lambda={lambda}: p={p:.4}"));
    }
    verdict(ok, parts.join(" "))
}

fn c7() -> Verdict {
    let radii = [128.0, 256.0, 512.0, 1024.0, 2048.0];
    let rep = fluctuation_scan(&classical(), &radii, 300, 107)
        .unwrap()
        .report;
    let e = rep.get("exponent");
    let diffusive = rep.flag("diffusive_ok");
    verdict(
        e < 0.5 && diffusive,
        format!("exponent={e:.4} diffusive_ok={diffusive}"),
    )
}

fn c8() -> Verdict {
    let small = path_count_tail(&classical(), 100.0, 1000, 108)
        .unwrap()
        .report;
    let large = path_count_tail(&classical(), 500.0, 200, 109)
        .unwrap()
        .report;
    let v = small.get("violations");
    verdict(
        v == 0.0 && (1.8..=2.1).contains(&large.mean),
        format!(
            "r=100 violations={v} max_ratio={:.3}; r=500 mean_ratio={:.4}",
            small.get("max_ratio"),
            large.mean
        ),
    )
}

fn c9() -> Verdict {
    let radii = [256.0, 512.0, 1024.0, 2048.0];
    let rep = straightness_scan(&classical(), &radii, 0.2, 100, 110)
        .unwrap()
        .report;
    let w = rep.get("wander_exponent");
    let cone = rep.get("cone_ok");
    verdict(
        w < 1.0 && cone >= 0.9,
        format!("wander_exponent={w:.4} cone_ok={cone:.3}"),
    )
}

fn c10() -> Verdict {
    let starts = [Point::ORIGIN, Point::new(30.0, 0.0), Point::new(15.0, 0.0)];
    let rep = ray_study(
        &classical(),
        FRAC_PI_4,
        &starts,
        &[500.0, 1000.0, 2000.0],
        100,
        111,
    )
    .unwrap()
    .report;
    let stab = rep.get("stabilized_fraction");
    let coal = rep.get("coalesced_fraction");
    let anti = rep.get("antisymmetry_violations");
    let coc = rep.get("cocycle_violations");
    verdict(
        stab >= 0.9 && coal >= 0.9 && anti == 0.0 && coc == 0.0,
        format!(
            "stabilized={stab:.2} (per ray {:.2}) coalesced={coal:.2} antisymmetry_violations={anti} cocycle_checked={} cocycle_violations={coc}",
            rep.get("ray_stabilized_fraction"),
            rep.get("cocycle_checked")
        ),
    )
}

fn c11() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        "experiment=gamma\nlaw=exponential\nlaw.rate=1\nr=60\nreplicas=8\nseed=5\n",
        "experiment=busemann\nlaw=dirac\nlaw.value=1\nradii=40,80\nalpha=0.7\nstarts=0,0;6,0;3,0\nreplicas=4\nseed=6\n",
        "experiment=fluct\nlaw=uniform\nlaw.lo=0.5\nlaw.hi=1.5\nradii=8,16,32,64\nreplicas=6\nseed=7\n",
        "experiment=oracle-suite\nclouds=50\nseed=8\n",
    ];
    let mut identical = 0;
    for (i, text) in configs.iter().enumerate() {
        let mut cfg = RunConfig::from_manifest(text).unwrap();
        cfg.out = dir.path().join(format!("first{i}"));
        harness::run(&cfg).unwrap();
        let manifest = fs::read_to_string(cfg.out.join("manifest.txt")).unwrap();
        let mut again = RunConfig::from_manifest(&manifest).unwrap();
        assert_eq!(again.experiment, cfg.experiment);
        again.out = dir.path().join(format!("second{i}"));
        again.threads = Some(2);
        harness::run(&again).unwrap();
        let same = ["raw.csv", "report.txt"]
            .iter()
            .all(|f| fs::read(cfg.out.join(f)).unwrap() == fs::read(again.out.join(f)).unwrap());
        identical += same as usize;
    }
    verdict(
        identical == configs.len(),
        format!("byte-identical reruns {identical}/{}", configs.len()),
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut failures = 0;
    let mut report = |id: &str, title: &str, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id} {title}: {}", v.detail);
        failures += !v.pass as usize;
    };

    report("1", "oracle equivalence", c1());
    report("2", "superadditivity and map invariance", c2());
    let dirac: Vec<EstimatorReport> = [250.0, 500.0, 1000.0]
        .iter()
        .map(|&r| estimate_gamma(&classical(), r, 200, 103).unwrap().report)
        .collect();
    report("3", "shape constant", c3(&dirac));
    report("4", "thinning identity", c4(&dirac[2]));
    report("5", "square-root tail bound", c5());
    report("6", "scale invariance", c6());
    report("7", "fluctuation scaling", c7());
    report("8", "geodesic cardinality", c8());
    report("9", "straightness", c9());
    report("10", "rays and coalescence", c10());
    report("11", "determinism", c11());

    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
