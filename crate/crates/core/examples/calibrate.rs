//! Scratch calibration runs (not part of the deliverable test suite).

use nalgebra::Vector3;
use pullsim::experiments::{dnp_oracle, run_torus, run_water, CouplingModel, DnpScenario, TorusScenario, WaterScenario};

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "dnp".into());
    match mode.as_str() {
        "dnp" => dnp_sweep(),
        "dnp-bias" => dnp_bias(),
        "dnp-seed-scan" => dnp_seed_scan(),
        "dnp-run" => dnp_run(),
        "dnp-debug" => dnp_debug(),
        "dnp-ensemble" => dnp_ensemble(),
        "torus-dt" => torus_dt(),
        "torus-winding" => torus_winding(),
        "torus-bisect" => torus_bisect(),
        "water" => water_dt(),
        other => eprintln!("unknown mode {other}"),
    }
}

/// Ensemble mean of rank-2 trajectories against the dense master equation
/// across the switch-on transient.
fn dnp_ensemble() {
    use nalgebra::DMatrix;
    use num_complex::Complex64 as C64;
    use pullsim::experiments::dnp::{self};
    use pullsim::experiments::Scheme;
    use pullsim::pullback::ProjectedSse;
    use pullsim::quantum::{evolve_master, SseSystem};
    use pullsim::stochastic::{NoiseMode, NoisePath};
    use rayon::prelude::*;

    let dt: f64 = std::env::var("CAL_DT")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(2e-4);
    let n_paths: u64 = std::env::var("CAL_PATHS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let t_final = 8.0;
    let s = DnpScenario {
        total_time: t_final,
        dt,
        ..Default::default()
    };
    let (base, h_post, chans_post) = dnp::generators(&s).unwrap();
    let n_steps = (t_final / dt) as usize;
    let switch = (s.t_on / dt) as usize;

    for (name, scheme) in [
        ("corrected  ", Scheme::ItoCorrected),
        ("uncorrected", Scheme::ItoUncorrected),
        ("stratonovich", Scheme::StratonovichHeun),
    ] {
        let acc: DMatrix<C64> = (0..n_paths)
            .into_par_iter()
            .map(|path| {
                let sys_pre = SseSystem::new(None, &base).unwrap();
                let sys_post = SseSystem::new(h_post.clone(), &chans_post).unwrap();
                let pre = ProjectedSse {
                    correction: scheme != Scheme::ItoUncorrected,
                    ..ProjectedSse::new(&sys_pre)
                };
                let post = ProjectedSse {
                    correction: scheme != Scheme::ItoUncorrected,
                    ..ProjectedSse::new(&sys_post)
                };
                let mut mps = dnp::initial_state(2).unwrap();
                mps.renormalize();
                let mut noise = NoisePath::new(77, path, chans_post.len(), dt, NoiseMode::Gaussian);
                for step in 1..=n_steps {
                    let dw = noise.increments();
                    let r = if step > switch {
                        match scheme {
                            Scheme::StratonovichHeun => post.stratonovich_step(
                                &mut mps,
                                |psi| {
                                    h_post
                                        .as_ref()
                                        .map(|h| (h * psi) * C64::new(0.0, -1.0))
                                        .unwrap_or_else(|| nalgebra::DVector::zeros(psi.len()))
                                },
                                &chans_post,
                                dt,
                                &dw,
                            ),
                            _ => post.ito_step(&mut mps, dt, &dw),
                        }
                    } else {
                        match scheme {
                            Scheme::StratonovichHeun => pre.stratonovich_step(
                                &mut mps,
                                |psi| nalgebra::DVector::zeros(psi.len()),
                                &base,
                                dt,
                                &dw[..base.len()],
                            ),
                            _ => pre.ito_step(&mut mps, dt, &dw[..base.len()]),
                        }
                    };
                    if r.is_err() {
                        break;
                    }
                }
                let psi = mps.assemble_dense();
                let nrm: f64 = psi.norm_squared();
                DMatrix::from_fn(4, 4, |i, j| psi[i] * psi[j].conj() / C64::new(nrm, 0.0))
            })
            .reduce(|| DMatrix::zeros(4, 4), |a, b| a + b);
        let rho_traj = acc / C64::new(n_paths as f64, 0.0);

        // master evolution from the same pure initial state
        let mps0 = {
            let mut m = dnp::initial_state(2).unwrap();
            m.renormalize();
            m
        };
        let psi0 = mps0.assemble_dense();
        let rho0 = DMatrix::from_fn(4, 4, |i, j| psi0[i] * psi0[j].conj());
        let rho_pre = evolve_master(&rho0, None, &base, dt, switch).unwrap();
        let rho_master =
            evolve_master(&rho_pre, h_post.as_ref(), &chans_post, dt, n_steps - switch).unwrap();
        let diff = &rho_traj - &rho_master;
        let eig = nalgebra::SymmetricEigen::new(pullsim::linalg::hermitize(&diff));
        let tdist: f64 = eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>() / 2.0;
        println!("{name}: trace distance at t={t_final} = {tdist:.4} ({n_paths} paths, dt={dt})");
    }
}

/// Step-level diagnostics of the projected Itô integrator.
fn dnp_debug() {
    use nalgebra::DVector;
    use num_complex::Complex64 as C64;
    use pullsim::experiments::dnp::{self, DnpOperators};
    use pullsim::pullback::{DiagonalMps, ProjectedSse};
    use pullsim::quantum::{berezin_unchecked, SseSystem};
    use pullsim::stochastic::{NoiseMode, NoisePath};

    let rank: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let s = DnpScenario {
        rank,
        total_time: 24.0,
        seed: 11,
        ..Default::default()
    };
    let ops = DnpOperators::new();
    let (base, h_post, chans_post) = dnp::generators(&s).unwrap();
    let sys_pre = SseSystem::new(None, &base).unwrap();
    let sys_post = SseSystem::new(h_post, &chans_post).unwrap();
    let stepper_pre = ProjectedSse::new(&sys_pre);
    let stepper_post = ProjectedSse::new(&sys_post);

    let mut mps = dnp::initial_state(rank).unwrap();
    mps.renormalize();
    let n_steps = (s.total_time / s.dt) as usize;
    let switch = (s.t_on / s.dt) as usize;
    let mut noise = NoisePath::new(s.seed, 0, chans_post.len(), s.dt, NoiseMode::Gaussian);
    let mut worst_gap = 0.0_f64;
    for step in 1..=n_steps {
        let dw = noise.increments();
        let out = if step > switch {
            stepper_post.ito_step(&mut mps, s.dt, &dw)
        } else {
            stepper_pre.ito_step(&mut mps, s.dt, &dw[..base.len()])
        };
        let out = match out {
            Ok(o) => o,
            Err(e) => {
                println!("step {step}: ERROR {e}");
                break;
            }
        };
        worst_gap = worst_gap.max((out.norm_before - 1.0).abs());
        if step % 2000 == 0 {
            let psi = mps.assemble_dense();
            let z = mps.coords();
            let w = mps.gram_dense();
            let eig = nalgebra::SymmetricEigen::new(w);
            let evs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let max_ev = evs.iter().cloned().fold(0.0_f64, f64::max);
            let min_pos = evs
                .iter()
                .cloned()
                .filter(|&x| x > 1e-10 * max_ev)
                .fold(f64::INFINITY, f64::min);
            println!(
                "t={:6.2} rho_e={:+.3} rho_n={:+.3} |z|={:.2} cond={:8.1e} worst_gap={:8.1e} branch_norms={:?}",
                step as f64 * s.dt,
                2.0 * berezin_unchecked(&ops.sz_e, &psi),
                2.0 * berezin_unchecked(&ops.sz_n, &psi),
                z.norm(),
                max_ev / min_pos,
                worst_gap,
                (0..rank)
                    .map(|k| {
                        (0..2)
                            .map(|i| {
                                mps.spinor(k, i).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect::<Vec<_>>(),
            );
            worst_gap = 0.0;
            let _ = DVector::<C64>::zeros(1);
        }
    }
}

/// Desk-scale DNP trajectory runs against the dense oracle, for all三
/// schemes and both ranks.
fn dnp_run() {
    use pullsim::experiments::Scheme;
    let total: f64 = std::env::var("CAL_T")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(104.0);
    let dt: f64 = std::env::var("CAL_DT")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(5e-4);
    let configs = [
        ("r2 ito", 2, Scheme::ItoCorrected),
        ("r1 ito", 1, Scheme::ItoCorrected),
        ("r2 raw", 2, Scheme::ItoUncorrected),
        ("r2 str", 2, Scheme::StratonovichHeun),
    ];
    for (name, rank, scheme) in configs {
        let s = DnpScenario {
            rank,
            scheme,
            total_time: total,
            dt,
            seed: 11,
            ..Default::default()
        };
        let start = std::time::Instant::now();
        match pullsim::experiments::run_dnp(&s) {
            Ok((_, summary)) => println!(
                "{name}: rho_e={:+.4}+-{:.4} rho_n={:+.4}+-{:.4} (oracle {:+.4},{:+.4}) norm_gap={:.2e} [{:.1} s]",
                summary.rho_e_post.0,
                summary.rho_e_post.1,
                summary.rho_n_post.0,
                summary.rho_n_post.1,
                summary.oracle.rho_e_post,
                summary.oracle.rho_n_post,
                summary.max_norm_gap,
                start.elapsed().as_secs_f64(),
            ),
            Err(e) => println!("{name}: FAILED: {e}"),
        }
    }
}

/// Bisect the numerical separatrix direction for a family of radii, then
/// probe the twin pair at +-5e-11 about it.
fn torus_bisect() {
    let args: Vec<String> = std::env::args().collect();
    let dt: f64 = std::env::var("CAL_DT")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(5e-5);
    let t_total: f64 = std::env::var("CAL_T")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(45.0);
    let r2_list: Vec<f64> = if args.len() > 2 {
        args[2..].iter().map(|s| s.parse().unwrap()).collect()
    } else {
        vec![1.6, 1.7, 1.75, 1.8]
    };
    for r2 in r2_list {
        let base = TorusScenario {
            r1: 2.0,
            r2,
            dt,
            n_steps: (t_total / dt) as usize,
            record_every: 5000,
            ..Default::default()
        };
        let classify = |dir: f64| {
            let mut s = base.clone();
            s.direction = dir;
            let (_, summary) = run_torus(&s).unwrap();
            summary
        };
        let psi0 = base.separatrix_direction();
        // bracket the numerical separatrix
        let (mut lo, mut hi) = (psi0 - 2e-7, psi0 + 2e-7);
        let lo_sum = classify(lo);
        let hi_sum = classify(hi);
        println!(
            "r2={r2}: bracket lo={:?} hi={:?} (analytic {psi0:.12})",
            lo_sum.class, hi_sum.class
        );
        if lo_sum.class == hi_sum.class {
            println!("  bracket failed");
            continue;
        }
        for _ in 0..45 {
            let mid = 0.5 * (lo + hi);
            if hi - lo < 1e-13 {
                break;
            }
            let s = classify(mid);
            use pullsim::experiments::ThreadClass;
            let mid_threads = s.class == ThreadClass::Threads;
            let lo_threads = lo_sum.class == ThreadClass::Threads;
            if mid_threads == lo_threads {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let center = 0.5 * (lo + hi);
        println!("  numerical separatrix {center:.15} (analytic - center = {:.3e})", psi0 - center);
        let sa = classify(center + 5e-11);
        let sb = classify(center - 5e-11);
        println!(
            "  A(+5e-11): {:?} wind={} ({:.2} rad, t={:.1}, drift {:.1e})",
            sa.class, sa.winding_at_event, sa.phi_advance_at_event, sa.t_event, sa.energy_drift
        );
        println!(
            "  B(-5e-11): {:?} wind={} ({:.2} rad, t={:.1}, drift {:.1e})",
            sb.class, sb.winding_at_event, sb.phi_advance_at_event, sb.t_event, sb.energy_drift
        );
    }
}

fn dnp_sweep() {
    let e_scale: f64 = std::env::var("CAL_ESCALE")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1.0);
    let s_z_e: f64 = std::env::var("CAL_SZE")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.25);
    let s_z_n: f64 = std::env::var("CAL_SZN")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.25);
    let defaults = DnpScenario::default();
    for g in [0.5, 0.8, 1.0, 1.3, 1.6, 2.0, 2.5, 3.0, 4.0, 6.0, 8.0] {
        let s = DnpScenario {
            coupling: g,
            model: CouplingModel::FlipFlopHamiltonian,
            s_perp_e: defaults.s_perp_e * 4.0 / e_scale,
            s_z_e,
            s_z_n,
            ..Default::default()
        };
        let eq = dnp_oracle(&s).unwrap();
        println!(
            "g_c={g:5.2}  rho_e_post={:.4}  rho_n_post={:.4}",
            eq.rho_e_post, eq.rho_n_post
        );
    }
}

/// Full acceptance-bundle scan over seeds: prints the margins that the
/// DNP criteria depend on.
fn dnp_seed_scan() {
    use pullsim::experiments::Scheme;
    let seeds: Vec<u64> = std::env::args()
        .skip(2)
        .map(|s| s.parse().unwrap())
        .collect();
    let seeds = if seeds.is_empty() {
        vec![1, 2, 3, 5, 7]
    } else {
        seeds
    };
    for seed in seeds {
        let base = DnpScenario {
            total_time: 504.0,
            seed,
            ..Default::default()
        };
        let mk = |rank: usize, scheme: Scheme| {
            let s = DnpScenario {
                rank,
                scheme,
                ..base.clone()
            };
            pullsim::experiments::run_dnp(&s).unwrap().1
        };
        let r2 = mk(2, Scheme::ItoCorrected);
        let r1 = mk(1, Scheme::ItoCorrected);
        let raw = mk(2, Scheme::ItoUncorrected);
        let st = mk(2, Scheme::StratonovichHeun);
        let o = r2.oracle;
        let dev = |s: &pullsim::experiments::DnpSummary| {
            (
                (s.rho_e_post.0 - o.rho_e_post).abs(),
                (s.rho_n_post.0 - o.rho_n_post).abs(),
            )
        };
        let (c_e, c_n) = dev(&r2);
        let (u_e, u_n) = dev(&raw);
        let strat_pull_e = (r2.rho_e_post.0 - st.rho_e_post.0).abs()
            / (r2.rho_e_post.1.powi(2) + st.rho_e_post.1.powi(2)).sqrt();
        let strat_pull_n = (r2.rho_n_post.0 - st.rho_n_post.0).abs()
            / (r2.rho_n_post.1.powi(2) + st.rho_n_post.1.powi(2)).sqrt();
        println!(
            "seed {seed}: corr dev ({c_e:.3},{c_n:.3}) | uncorr dev ({u_e:.3},{u_n:.3}) max {:.3} | r1 {:.3} < r2 {:.3} gap {:.3} | strat pulls ({strat_pull_e:.2},{strat_pull_n:.2})",
            u_e.max(u_n),
            r1.rho_n_post.0,
            r2.rho_n_post.0,
            r2.rho_n_post.0 - r1.rho_n_post.0,
        );
    }
}

/// Corrected vs uncorrected long-run bias for a parameter variant.
fn dnp_bias() {
    use pullsim::experiments::Scheme;
    let e_scale: f64 = std::env::var("CAL_ESCALE")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1.0);
    let s_z_e: f64 = std::env::var("CAL_SZE")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.25);
    let s_z_n: f64 = std::env::var("CAL_SZN")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.25);
    let g_c: f64 = std::env::var("CAL_GC")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1.6);
    let total: f64 = std::env::var("CAL_T")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(304.0);
    let dt: f64 = std::env::var("CAL_DT")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(2e-4);
    let defaults = DnpScenario::default();
    for (name, scheme) in [
        ("corrected  ", Scheme::ItoCorrected),
        ("uncorrected", Scheme::ItoUncorrected),
    ] {
        let s = DnpScenario {
            coupling: g_c,
            s_perp_e: defaults.s_perp_e * 4.0 / e_scale,
            s_z_e,
            s_z_n,
            scheme,
            total_time: total,
            dt,
            seed: 11,
            ..Default::default()
        };
        let start = std::time::Instant::now();
        let (_, summary) = pullsim::experiments::run_dnp(&s).unwrap();
        println!(
            "{name}: rho_e={:+.4}+-{:.4} rho_n={:+.4}+-{:.4} (oracle {:+.4},{:+.4}) gap={:.1e} [{:.0} s]",
            summary.rho_e_post.0,
            summary.rho_e_post.1,
            summary.rho_n_post.0,
            summary.rho_n_post.1,
            summary.oracle.rho_e_post,
            summary.oracle.rho_n_post,
            summary.max_norm_gap,
            start.elapsed().as_secs_f64(),
        );
    }
}

fn torus_dt() {
    for dt in [2e-4, 1e-4, 5e-5, 2.5e-5] {
        let s = TorusScenario {
            direction: 0.42,
            dt,
            n_steps: (20.0 / dt) as usize,
            record_every: 200,
            ..Default::default()
        };
        let (_, summary) = run_torus(&s).unwrap();
        println!(
            "dt={dt:8.1e}  energy_drift={:9.2e}  gauge={:8.1e}",
            summary.energy_drift, summary.max_gauge
        );
    }
}

fn torus_winding() {
    let offset = 1.0e-10;
    for r2 in [1.0, 1.2, 1.3, 1.35, 1.4, 1.45, 1.5] {
        let base = TorusScenario {
            r1: 2.0,
            r2,
            dt: 1e-4,
            n_steps: 700_000,
            record_every: 1000,
            ..Default::default()
        };
        let (a, b) = base.twin_pair(offset);
        let (_, sa) = run_torus(&a).unwrap();
        let (_, sb) = run_torus(&b).unwrap();
        println!(
            "r2={r2:5.2}  A: {:?} wind={} ({:.2} rad, t={:.1})  B: {:?} wind={} ({:.2} rad, t={:.1})  drift={:.1e}/{:.1e}",
            sa.class,
            sa.winding_at_event,
            sa.phi_advance_at_event,
            sa.t_event,
            sb.class,
            sb.winding_at_event,
            sb.phi_advance_at_event,
            sb.t_event,
            sa.energy_drift,
            sb.energy_drift,
        );
    }
}

fn water_dt() {
    let l: f64 = std::env::var("CAL_L")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(2.0);
    for dt in [5e-4, 2e-4, 1e-4] {
        let s = WaterScenario {
            l_body0: Vector3::new(l * 1.0_f64.to_radians().sin(), 0.0, l),
            dt,
            n_steps: 100_000,
            record_every: 500,
            ..Default::default()
        };
        let (_, summary) = run_water(&s).unwrap();
        println!(
            "dt={dt:7.1e}  H={:9.2e}  L2={:9.2e}  |q|={:9.2e}  gauge={:8.1e}  flips={}",
            summary.energy_drift,
            summary.l2_drift,
            summary.qnorm_drift,
            summary.max_gauge,
            summary.mid_axis_sign_flips
        );
    }
}
