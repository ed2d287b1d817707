// Steady-state bias isolation: decoupled two-spin system (electron
// equilibrium exactly 1/2) integrated four ways.
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use pullsim::experiments::dnp::{generators, initial_state, DnpOperators, DnpScenario};
use pullsim::pullback::{DiagonalMps, ProjectedSse};
use pullsim::quantum::{berezin_unchecked, SseSystem};
use pullsim::stochastic::{NoiseMode, NoisePath};

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let dt: f64 = std::env::var("CAL_DT").ok().and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let t_total: f64 = std::env::var("CAL_T").ok().and_then(|s| s.parse().ok()).unwrap_or(204.0);
    let s = DnpScenario::default();
    let (base, _, _) = generators(&s).unwrap();
    let sys = SseSystem::new(None, &base).unwrap();
    let ops = DnpOperators::new();
    let n_steps = (t_total / dt) as usize;
    let burn = n_steps / 10;

    let run_projected = |label: &str, rebalance: bool, correction: bool| {
        let stepper = ProjectedSse {
            correction,
            rebalance,
            ..ProjectedSse::new(&sys)
        };
        let mut mps = initial_state(2).unwrap();
        mps.renormalize();
        let mut noise = NoisePath::new(11, 0, 6, dt, NoiseMode::Gaussian);
        let (mut acc_e, mut acc_n, mut count) = (0.0, 0.0, 0u64);
        let mut worst_gap = 0.0_f64;
        for step in 1..=n_steps {
            let dw = noise.increments();
            let out = stepper.ito_step(&mut mps, dt, &dw).unwrap();
            worst_gap = worst_gap.max((out.norm_before - 1.0).abs());
            if step > burn {
                let psi = mps.assemble_dense();
                acc_e += 2.0 * berezin_unchecked(&ops.sz_e, &psi);
                acc_n += 2.0 * berezin_unchecked(&ops.sz_n, &psi);
                count += 1;
            }
        }
        println!(
            "{label}: rho_e = {:+.4}, rho_n = {:+.4}, worst_gap = {:.1e}",
            acc_e / count as f64,
            acc_n / count as f64,
            worst_gap
        );
    };

    if mode == "all" || mode == "hilbert" {
        // reference: full-Hilbert SSE, same channels, dim 4
        let psi0 = {
            let mut m = initial_state(2).unwrap();
            m.renormalize();
            m.assemble_dense()
        };
        let mut noise = NoisePath::new(11, 0, 6, dt, NoiseMode::Gaussian);
        let (mut acc_e, mut count) = (0.0, 0u64);
        let mut psi = psi0;
        for step in 1..=n_steps {
            let dw = noise.increments();
            let (dpsi, _) = sys.increment(&psi, dt, &dw).unwrap();
            psi += dpsi;
            let n = psi.norm();
            psi /= C64::new(n, 0.0);
            if step > burn {
                acc_e += 2.0 * berezin_unchecked(&ops.sz_e, &psi);
                count += 1;
            }
        }
        println!("hilbert SSE : rho_e = {:+.4}", acc_e / count as f64);
        let _ = DVector::<C64>::zeros(1);
    }
    if mode == "all" || mode == "proj" {
        run_projected("proj corr  ", true, true);
        run_projected("proj nocanon", false, true);
        run_projected("proj uncorr", true, false);
    }
}
