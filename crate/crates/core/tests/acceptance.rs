//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use floquet_core::channels::{well_from_a, Boundary, DriveWaveform, Variant, DEFAULT_EPS_FLUX};
use floquet_core::matching::{
    conjugate_partner, continue_in_f2, critical_point, degeneracy_scan, pole_solve, scattering_grid,
    scattering_solve, static_spectrum, truncation_stability, CriticalPoint, FloquetSolution, Problem,
    SolverOptions, StepControl, SweepAxis,
};
use floquet_core::observables::{emission_density, residual_verify, SamplePoint};
use floquet_core::waves::{Parity, TruncationScheme};
use floquet_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracle;

type Check = Result<String, String>;

fn pass_if(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixed_steps(h: f64) -> StepControl {
    StepControl { initial: h, max: h, grow_after: usize::MAX, ..StepControl::default() }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct Traced {
    problem: Problem,
    trajectory: Vec<FloquetSolution>,
    critical: CriticalPoint,
}

fn trace(problem: Problem, seed: FloquetSolution, target: f64) -> Result<Traced, String> {
    let trajectory =
        continue_in_f2(&problem, &seed, target, &StepControl::default(), |_| {}).map_err(|e| e.to_string())?;
    let critical = critical_point(&problem, &trajectory)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| "no Im omega sign change on the trajectory".to_string())?;
    Ok(Traced { problem, trajectory, critical })
}

fn static_counts() -> Check {
    let values: Vec<f64> = (0..=260).map(|i| 0.4 + 0.01 * i as f64).collect();
    let table = static_spectrum(SweepAxis::AOverPi { d: 2.0 }, &values, 1);
    let mut bad = Vec::new();
    for pt in &table {
        let a = pt.parameter;
        let ns = pt.states.iter().filter(|s| s.l == 0).count();
        let np = pt.states.iter().filter(|s| s.l == 1).count();
        // skip grid points sitting on a threshold
        let frac = a - a.floor();
        if (frac - 0.5).abs() < 1e-9 || !(1e-9..=1.0 - 1e-9).contains(&frac) {
            continue;
        }
        let (want_s, want_p) = ((a + 0.5).floor() as usize, a.floor() as usize);
        if ns != want_s || np != want_p || (a > 0.5 && a < 1.0 && ns != 1) {
            bad.push(a);
        }
    }
    pass_if(bad.is_empty(), format!("{} sweep points, mismatched at {:?}", table.len(), bad))
}

fn static_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let v0 = rng.gen_range(0.5..8.0);
        let a_pi = rng.gen_range(1.1..1.45);
        for (l, parity) in [(0usize, Parity::Even), (1, Parity::Odd)] {
            let well = well_from_a(-a_pi, v0, Variant::P1).map_err(|e| e.to_string())?;
            let exact = if l == 0 { oracle::s_state(v0, well.d) } else { oracle::p_state(v0, well.d) }
                .ok_or_else(|| format!("oracle found no l={l} state at V0={v0}"))?;
            // J = 0: at zero drive the other Fourier blocks only add replicas shifted by 2
            let tr = TruncationScheme::new(0, 0, 2, 4, parity).unwrap();
            let p = Problem::new(well, DriveWaveform::new(0.0), tr, SolverOptions::default());
            let sol = pole_solve(&p, C64::new(exact * 1.01, 0.0), Boundary::Emission).map_err(|e| e.to_string())?;
            worst = worst.max((sol.omega - exact).norm());
        }
    }
    pass_if(worst < 1e-10, format!("max |d omega| = {worst:.2e} over 20 wells, s and p"))
}

fn width_law() -> Check {
    let p = common::swave(Variant::P1);
    let seed = common::swave_seed(&p, Boundary::Emission);
    let traj = continue_in_f2(&p, &seed, 0.05, &fixed_steps(2.5e-3), |_| {}).map_err(|e| e.to_string())?;
    let pts: Vec<&FloquetSolution> = traj.iter().filter(|s| s.f2 >= 0.005 - 1e-12).collect();
    let x: Vec<f64> = pts.iter().map(|s| s.f2.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|s| s.omega.im.abs().ln()).collect();
    let s = slope(&x, &y);
    pass_if((s - 2.0).abs() <= 0.05, format!("slope {s:.4} from {} points", pts.len()))
}

fn swave_critical(t: &Traced) -> Check {
    let (f, w) = (t.critical.f2, t.critical.omega);
    let check = truncation_stability(&t.problem, &t.trajectory, 10, 1e-6).map_err(|e| e.to_string())?;
    let ok = (f - 0.260).abs() <= 0.013 && (w - 3.35e-3).abs() <= 0.15 * 3.35e-3 && !check.flagged;
    pass_if(
        ok,
        format!("F2c = {f:.6}, omega_c = {w:.4e}, truncation shift {:.1e} (flagged: {})", check.max_shift, check.flagged),
    )
}

fn pwave_critical(t: &Traced) -> Check {
    let (f, w) = (t.critical.f2, t.critical.omega);
    let ok = (f - 0.0898).abs() <= 0.05 * 0.0898 && (w + 1.9995).abs() <= 5e-4;
    pass_if(ok, format!("F2c = {f:.6}, omega_c = {w:.6}"))
}

fn absorption_winding(t: &Traced) -> Check {
    let (fc, wc) = (t.critical.f2, t.critical.omega);
    let n = 50;
    let fs: Vec<f64> = (0..n).map(|i| fc - 0.015 + 0.03 * i as f64 / (n - 1) as f64).collect();
    let ws: Vec<f64> = (0..n).map(|i| wc - 1.5e-3 + 3e-3 * i as f64 / (n - 1) as f64).collect();
    let grid = scattering_grid(&t.problem, &fs, &ws, (0, 0));
    let s00 = |i: usize, k: usize| -> Result<C64, String> {
        let cell = &grid[i * n + k];
        cell.record.as_ref().and_then(|r| r.s(0, 0)).ok_or_else(|| format!("cell failed: {:?}", cell.error))
    };
    let mut min = f64::INFINITY;
    for i in 0..n {
        for k in 0..n {
            min = min.min(s00(i, k)?.norm_sqr());
        }
    }
    // counterclockwise in the (F2, omega) plane
    let mut path = Vec::new();
    path.extend((0..n).map(|i| (i, 0)));
    path.extend((1..n).map(|k| (n - 1, k)));
    path.extend((0..n - 1).rev().map(|i| (i, n - 1)));
    path.extend((0..n - 1).rev().map(|k| (0, k)));
    let mut winding = 0.0;
    for w in path.windows(2) {
        winding += (s00(w[1].0, w[1].1)? / s00(w[0].0, w[0].1)?).arg();
    }
    let ok = min < 1e-3 && (winding.abs() - 2.0 * PI).abs() <= 0.1;
    pass_if(ok, format!("min |S00|^2 = {min:.2e}, winding = {winding:.4} on a {n}x{n} grid"))
}

fn unitarity() -> Check {
    let base = common::swave(Variant::P1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases: Vec<(f64, f64)> = (0..50).map(|_| (rng.gen_range(0.0..0.3), rng.gen_range(1e-3..1.95))).collect();
    let mut devs = Vec::new();
    for l_max in [4usize, 6, 8] {
        let tr = TruncationScheme::new(6, 6, l_max, 64, Parity::Even).unwrap();
        let p = base.with_truncation(tr);
        let mut worst = 0.0f64;
        for &(f2, w) in &cases {
            let r = scattering_solve(&p.with_f2(f2), w, (0, 0)).map_err(|e| format!("F2 {f2}, omega {w}: {e}"))?;
            worst = worst.max((r.unitarity - 1.0).abs());
        }
        devs.push(worst);
    }
    // saturates once the Fourier truncation dominates; allow roundoff-level wobble there
    let monotone = devs.windows(2).all(|w| w[1] <= w[0] * 1.05 + 1e-11);
    pass_if(devs[2] < 1e-4 && monotone, format!("max |sum |S|^2 - 1| at L = 4, 6, 8: {:.2e} {:.2e} {:.2e}", devs[0], devs[1], devs[2]))
}

fn low_energy() -> Check {
    let p = common::pwave_scattering();
    let ws: Vec<f64> = (0..6).map(|i| 1e-5 * 10f64.powf(i as f64 / 5.0)).collect();
    let mut notes = Vec::new();
    let mut ok = true;
    for f2 in [0.03, 0.06] {
        let recs = ws
            .iter()
            .map(|&w| scattering_solve(&p.with_f2(f2), w, (0, 0)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let se: Vec<f64> = recs.iter().map(|r| r.sigma_e0).collect();
        let (lo, hi) = se.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        let spread = (hi - lo) / lo;
        let x: Vec<f64> = ws.iter().map(|w| w.ln()).collect();
        let y: Vec<f64> = recs.iter().map(|r| r.sigma_r0.ln()).collect();
        let s = slope(&x, &y);
        ok &= spread < 0.05 && (s + 0.5).abs() <= 0.02;
        notes.push(format!("F2 {f2}: sigma_e0 spread {spread:.2e}, sigma_r0 slope {s:.4}"));
    }
    pass_if(ok, notes.join("; "))
}

fn variants() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut problems = Vec::new();
    let mut trajs = Vec::new();
    for v in [Variant::P1, Variant::P2, Variant::P3, Variant::P4] {
        let well = well_from_a(-2.5037, 10.0, v).map_err(|e| e.to_string())?;
        let tr = TruncationScheme::new(6, 6, 8, 64, Parity::Even).unwrap();
        let p = Problem::new(well, DriveWaveform::new(0.0), tr, SolverOptions::default());
        let states = floquet_core::matching::static_bound_states(10.0, well.d, 0);
        let shallow = states.iter().map(|s| s.omega).fold(f64::NEG_INFINITY, f64::max);
        let seed = pole_solve(&p, C64::new(shallow, 0.0), Boundary::Emission).map_err(|e| e.to_string())?;
        let traj = continue_in_f2(&p, &seed, 0.15, &fixed_steps(5e-3), |_| {}).map_err(|e| e.to_string())?;
        match critical_point(&p, &traj).map_err(|e| e.to_string())? {
            Some(c) => notes.push(format!("p{} crosses at F2 {:.4}", v.index(), c.f2)),
            None => {
                ok = false;
                notes.push(format!("p{} no crossing", v.index()));
            }
        }
        problems.push(p);
        trajs.push(traj);
    }
    let (t2, t4) = (&trajs[1], &trajs[3]);
    let mut dk = 0.0f64;
    let mut shared = 0;
    for a in t2 {
        if let Some(b) = t4.iter().find(|b| (b.f2 - a.f2).abs() < 1e-12) {
            shared += 1;
            for (x, y) in a.k.iter().zip(&b.k) {
                dk = dk.max((x - y).norm());
            }
        }
    }
    ok &= dk < 1e-8 && shared > 10;
    notes.push(format!("p2/p4 max |dk| = {dk:.2e} over {shared} points"));
    pass_if(ok, notes.join("; "))
}

fn emission_switch(t: &Traced) -> Check {
    let traj = &t.trajectory;
    let i = traj
        .windows(2)
        .position(|w| w[0].f2 > 0.0 && w[0].omega.im < 0.0 && w[1].omega.im > 0.0)
        .ok_or("no crossing step")?;
    let before = &traj[i];
    let after = conjugate_partner(&t.problem, &traj[i + 1]).map_err(|e| e.to_string())?;
    let profile = |sol: &FloquetSolution| -> Result<(i32, f64), String> {
        let e = emission_density(sol, DEFAULT_EPS_FLUX).map_err(|e| e.to_string())?;
        let dom = e.dominant().ok_or("empty density")?;
        let odd: f64 = dom.amplitudes.iter().filter(|(l, _)| l % 2 == 1).map(|(_, b)| b.norm_sqr()).sum();
        Ok((dom.j, odd / dom.weight))
    };
    let (j0, odd0) = profile(before)?;
    let (j1, odd1) = profile(&after)?;
    let ok = j0 == 1 && odd0 > 0.99 && j1 == 0 && odd1 < 0.01;
    pass_if(
        ok,
        format!(
            "F2 {:.4}: j = {j0} (odd share {odd0:.3}); F2 {:.4}: j = {j1} (odd share {:.3})",
            before.f2, after.f2, odd1.abs()
        ),
    )
}

fn self_verification(traced: &[&Traced]) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut count = 0;
    for t in traced {
        let d = t.problem.well.d;
        let sols = t.trajectory.iter().chain(std::iter::once(&t.critical.solution));
        for sol in sols {
            let points: Vec<SamplePoint> = (0..20)
                .map(|_| {
                    let mut r = rng.gen_range(0.05 * d..2.0 * d);
                    if (r - d).abs() < 0.02 * d {
                        r += 0.04 * d;
                    }
                    SamplePoint { r, theta: rng.gen_range(0.0..PI), t: rng.gen_range(0.0..PI) }
                })
                .collect();
            let rep = residual_verify(sol, &points).map_err(|e| e.to_string())?;
            worst = worst.max(rep.max_relative);
            count += 1;
        }
    }
    pass_if(worst < 1e-6, format!("max relative residual {worst:.2e} over {count} solutions"))
}

fn conjugate_pairing(t: &Traced) -> Check {
    let p = &t.problem.with_f2(0.0);
    let fc = t.critical.f2;
    let target = (fc - 0.01).max(0.0);
    let em = continue_in_f2(p, &common::swave_seed(p, Boundary::Emission), target, &fixed_steps(5e-3), |_| {})
        .map_err(|e| e.to_string())?;
    let cap = continue_in_f2(p, &common::swave_seed(p, Boundary::Capture), target, &fixed_steps(5e-3), |_| {})
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut shared = 0;
    for a in &em {
        if let Some(b) = cap.iter().find(|b| (b.f2 - a.f2).abs() < 1e-12) {
            shared += 1;
            worst = worst.max((b.omega - a.omega.conj()).norm());
        }
    }
    pass_if(worst < 1e-8 && shared > 10, format!("max |w_cap - w_em*| = {worst:.2e} at {shared} shared F2 < {target:.3}"))
}

fn exceptional_scan() -> Check {
    let values: Vec<f64> = (0..=130).map(|i| 7.078 + 1e-4 * i as f64).collect();
    let found = degeneracy_scan(SweepAxis::Depth { a_over_pi: -2.565 }, &values, 1);
    let hit = found.iter().find(|d| {
        d.lower.l == 1 && d.upper.l == 0 && d.quanta == 1 && (d.lower.omega + 2.125).abs() < 0.01 && (d.upper.omega + 0.125).abs() < 0.01
    });
    match hit {
        Some(d) => pass_if(
            d.mismatch.abs() < 1e-4 && (d.parameter - 7.09).abs() < 0.01,
            format!(
                "V0 = {:.5}: p {:.5}, s {:.5}, mismatch {:.1e}",
                d.parameter, d.lower.omega, d.upper.omega, d.mismatch
            ),
        ),
        None => Err(format!("no p/s coincidence mod 2 among {} crossings", found.len())),
    }
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("criterion {n:>2} {name}: PASS ({d}) [{secs:.1} s]"),
            Err(d) => {
                failures += 1;
                println!("criterion {n:>2} {name}: FAIL ({d}) [{secs:.1} s]")
            }
        }
    };
    let needs = |t: &Result<Traced, String>| -> Result<(), String> {
        t.as_ref().map(|_| ()).map_err(|e| format!("trajectory unavailable: {e}"))
    };

    report(1, "static spectrum counts", &mut static_counts);
    report(2, "static oracle equivalence", &mut static_oracle);
    report(3, "perturbative width law", &mut width_law);

    let s_problem = common::swave(Variant::P1);
    let s_seed = common::swave_seed(&s_problem, Boundary::Emission);
    let start = Instant::now();
    let swave = trace(s_problem, s_seed, 0.3);
    let s_secs = start.elapsed().as_secs_f64();
    report(4, "s-wave critical point", &mut || {
        needs(&swave)?;
        swave_critical(swave.as_ref().unwrap()).map(|d| format!("{d}, continuation {s_secs:.1} s"))
    });

    let p_problem = common::pwave();
    let p_seed = common::pwave_seed(&p_problem);
    let pwave = trace(p_problem, p_seed, 0.12);
    report(5, "p-wave critical point", &mut || {
        needs(&pwave)?;
        pwave_critical(pwave.as_ref().unwrap())
    });

    report(6, "total absorption and winding", &mut || {
        needs(&swave)?;
        absorption_winding(swave.as_ref().unwrap())
    });
    report(7, "unitarity", &mut unitarity);
    report(8, "low-energy limits", &mut low_energy);
    report(9, "variant equivalences", &mut variants);
    report(10, "emission switch", &mut || {
        needs(&swave)?;
        emission_switch(swave.as_ref().unwrap())
    });
    report(11, "self-verification", &mut || {
        needs(&swave)?;
        needs(&pwave)?;
        self_verification(&[swave.as_ref().unwrap(), pwave.as_ref().unwrap()])
    });
    report(12, "conjugate pairing", &mut || {
        needs(&swave)?;
        conjugate_pairing(swave.as_ref().unwrap())
    });
    report(13, "exceptional-point scan", &mut exceptional_scan);

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
