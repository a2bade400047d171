//! Acceptance suite: every release criterion of the verification program,
//! each printing one pass/fail line (run with `--nocapture` to see them).
//!
//! The reference scenario throughout is the interval (0, pi) with
//! d1 = d2 = d3 = 1, D1 = D2 = D3 = 0.1, a = 1, b = 2, k = lambda = N = 1,
//! so gamma = 1, |O| = pi, mu = d = d0 = 1.

use brusslab::bounds;
use brusslab::integrate::{self, IntegratorConfig, Scheme};
use brusslab::model::{self, Parameters};
use brusslab::shell::{self, runner::Command};
use brusslab::spectral::{self, DomainSpec, ModalState, SineBasis};
use brusslab::tangent;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

const ENSEMBLE_SIZE: usize = 100;
const ENSEMBLE_T_END: f64 = 50.0;
const ENSEMBLE_DT: f64 = 5e-3;
const TAIL_FRACTION: f64 = 0.4;
const RADIUS: f64 = 10.0;

fn pass(criterion: usize, message: &str) {
    println!("[PASS] criterion {criterion}: {message}");
}

fn default_prm() -> Parameters {
    Parameters::default_scenario()
}

fn basis_m(m: usize) -> SineBasis {
    SineBasis::new(DomainSpec::interval(PI).unwrap(), m).unwrap()
}

struct Ensemble {
    trajs: Vec<integrate::Trajectory>,
    bounds: bounds::BoundSet,
    elapsed_seconds: f64,
}

/// The shared 100-member ensemble behind criteria 2, 3, and 4.
fn ensemble() -> &'static Ensemble {
    static CELL: OnceLock<Ensemble> = OnceLock::new();
    CELL.get_or_init(|| {
        let prm = default_prm();
        let basis = basis_m(32);
        let cfg = IntegratorConfig::new(ENSEMBLE_DT, Scheme::IfRk2, ENSEMBLE_T_END, 10)
            .unwrap()
            .with_adaptive(1e-3);
        let started = Instant::now();
        let trajs: Vec<_> = (0..ENSEMBLE_SIZE)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
                let g0 = ModalState::random_ball(&basis, RADIUS, &mut rng);
                integrate::simulate(&g0, &basis, &prm, &cfg).expect("no blow-up at defaults")
            })
            .collect();
        let elapsed_seconds = started.elapsed().as_secs_f64();
        let est = spectral::embedding_constants(&basis, 1000, 7).unwrap();
        let bounds = bounds::compute_bound_set(
            &prm,
            basis.gamma(),
            basis.domain().volume(),
            basis.dim(),
            est.delta,
            est.eta,
        );
        Ensemble {
            trajs,
            bounds,
            elapsed_seconds,
        }
    })
}

#[test]
fn criterion_01_constants_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shell::RunConfig {
        out_dir: dir.path().to_path_buf(),
        embed_budget: 1000,
        ..shell::RunConfig::default()
    };
    let started = Instant::now();
    let outcome = shell::run(Command::Constants, &cfg).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(outcome.exit_code, 0);

    let text = std::fs::read_to_string(dir.path().join("bounds.json")).unwrap();
    let bs: bounds::BoundSet = serde_json::from_str(&text).unwrap();
    // Independent hand evaluation of the closed forms at the reference
    // scenario.
    let cases = [
        ("R0", bs.r0.value, 4.0 * PI),
        ("R1", bs.r1.value, 1.0 + 36.0 * PI),
        ("R2", bs.r2.value, 1.0 + 30.0 * PI),
        ("K1", bs.k1.value, 6.0 + 226.0 * PI),
        ("K2", bs.k2.value, 1.0 + 16.0 * PI / 3.0),
        ("K3", bs.k3.value, 1.0 + 9.6 * PI),
    ];
    for (name, got, want) in cases {
        assert!(
            (got - want).abs() <= 1e-12 * want,
            "{name}: got {got}, want {want}"
        );
    }
    assert!(
        elapsed < 1.0,
        "constants took {elapsed:.3} s, budget is 1 s"
    );
    pass(
        1,
        &format!("constants match closed forms to 1e-12 relative in {elapsed:.3} s"),
    );
}

#[test]
fn criterion_02_l2_absorption_over_ensemble() {
    let ens = ensemble();
    let mut worst: Vec<(String, f64)> = Vec::new();
    for traj in &ens.trajs {
        let verdicts = bounds::verify_absorption(traj, &ens.bounds, TAIL_FRACTION, 0.0).unwrap();
        for v in verdicts {
            if ["vz_l2", "yxi_l2", "ptheta_l2", "g_l2"].contains(&v.name.as_str()) {
                assert!(
                    v.pass,
                    "{} violated: observed {} vs bound {}",
                    v.name, v.observed, v.bound
                );
                match worst.iter_mut().find(|(n, _)| *n == v.name) {
                    Some((_, m)) => *m = m.max(v.margin_ratio),
                    None => worst.push((v.name.clone(), v.margin_ratio)),
                }
            }
        }
    }
    assert!(
        ens.elapsed_seconds < 300.0,
        "ensemble took {:.1} s, budget is 300 s",
        ens.elapsed_seconds
    );
    pass(
        2,
        &format!(
            "L2 absorption holds on {} runs in {:.0} s; worst margins {:?}",
            ENSEMBLE_SIZE, ens.elapsed_seconds, worst
        ),
    );
}

#[test]
fn criterion_03_lp_absorption_over_ensemble() {
    let ens = ensemble();
    let mut worst = (0.0_f64, 0.0_f64);
    for traj in &ens.trajs {
        let verdicts = bounds::verify_absorption(traj, &ens.bounds, TAIL_FRACTION, 0.0).unwrap();
        for v in verdicts {
            match v.name.as_str() {
                "vz_l4" => {
                    assert!(v.pass, "L4 violated: {} vs {}", v.observed, v.bound);
                    worst.0 = worst.0.max(v.margin_ratio);
                }
                "vz_l6" => {
                    assert!(v.pass, "L6 violated: {} vs {}", v.observed, v.bound);
                    worst.1 = worst.1.max(v.margin_ratio);
                }
                _ => {}
            }
        }
    }
    pass(
        3,
        &format!(
            "L4/L6 absorption holds on {ENSEMBLE_SIZE} runs; worst margins {:.3e} / {:.3e}",
            worst.0, worst.1
        ),
    );
}

#[test]
fn criterion_04_transient_envelope_pointwise() {
    let ens = ensemble();
    let prm = default_prm();
    let mut max_ratio = 0.0_f64;
    for traj in &ens.trajs {
        let vz0 = traj.samples[0].norms.vz_l2_sq();
        for s in &traj.samples {
            let env = bounds::transient_envelope_vz(vz0, &prm, 1.0, PI, s.t);
            let ratio = s.norms.vz_l2_sq() / env;
            assert!(
                ratio <= 1.05,
                "envelope violated at t = {}: observed {} vs envelope {}",
                s.t,
                s.norms.vz_l2_sq(),
                env
            );
            max_ratio = max_ratio.max(ratio);
        }
    }
    pass(
        4,
        &format!("envelope holds pointwise on {ENSEMBLE_SIZE} runs; max ratio {max_ratio:.4}"),
    );
}

#[test]
fn criterion_05_inequality_residuals() {
    let prm = default_prm();
    let basis = basis_m(32);
    // Every step is stored: the residual uses central differences in time,
    // and the steep initial transient dominates the differencing error.
    let cfg = IntegratorConfig::new(1e-3, Scheme::IfRk2, 6.0, 10)
        .unwrap()
        .with_storage(1);
    let mut worst_rel = 0.0_f64;
    for i in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + i);
        let g0 = ModalState::random_ball(&basis, RADIUS, &mut rng);
        let traj = integrate::simulate(&g0, &basis, &prm, &cfg).unwrap();
        let report = bounds::inequality_residuals(&traj, &basis, &prm, TAIL_FRACTION).unwrap();
        for e in &report.entries {
            assert!(
                e.pass,
                "run {i}: residual {} exceeded: max residual {}, bound {}, excess {}",
                e.name, e.max_residual, e.bound_at_max, e.max_excess
            );
            if e.bound_at_max.abs() > 0.0 {
                worst_rel = worst_rel.max(e.max_excess / e.bound_at_max.abs());
            }
        }
    }
    pass(
        5,
        &format!("energy identity and L4/L6 ladders within 5% on 10 runs; worst relative excess {worst_rel:.3e}"),
    );
}

#[test]
fn criterion_06_oracle_equivalence() {
    let dom = DomainSpec::interval(PI).unwrap();
    let prm = default_prm();
    let basis = SineBasis::new(dom.clone(), 32).unwrap();

    // Smooth initial data shared between the two code paths.
    let amps = [0.8, -0.5, 0.3];
    let mut g0 = ModalState::zero(&basis);
    for comp in 0..6 {
        for (j, a) in amps.iter().enumerate() {
            g0.set_coeff(comp, j, a * (1.0 + 0.1 * comp as f64));
        }
    }
    let cfg = IntegratorConfig::new(5e-4, Scheme::IfRk2, 1.0, 2000).unwrap();
    let traj = integrate::simulate(&g0, &basis, &prm, &cfg).unwrap();

    let nodes = 257;
    let h = PI / (nodes as f64 - 1.0);
    let fd_g0: [Vec<f64>; 6] = std::array::from_fn(|comp| {
        (0..nodes)
            .map(|i| {
                let x = i as f64 * h;
                amps.iter()
                    .enumerate()
                    .map(|(j, a)| {
                        a * (1.0 + 0.1 * comp as f64)
                            * (2.0 / PI).sqrt()
                            * ((j as f64 + 1.0) * x).sin()
                    })
                    .sum()
            })
            .collect()
    });
    let fd_traj = integrate::fd::fd_reference_simulate(&fd_g0, &dom, &prm, &cfg).unwrap();

    let mut worst_rel = 0.0_f64;
    for comp in 0..6 {
        let coeffs = traj.final_state.block(comp);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..nodes {
            let x = i as f64 * h;
            let spectral_val: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * (2.0 / PI).sqrt() * ((j as f64 + 1.0) * x).sin())
                .sum();
            let d = spectral_val - fd_traj.final_fields[comp][i];
            num += d * d;
            den += spectral_val * spectral_val;
        }
        let rel = (num / den).sqrt();
        assert!(
            rel <= 1e-3,
            "component {comp}: relative L2 difference {rel}"
        );
        worst_rel = worst_rel.max(rel);
    }

    // Richardson self-convergence of the second-order scheme. The
    // integrating factor's error constants grow with lambda * dt, so the
    // asymptotic regime at M = 32 (lambda_max = 1024) needs dt ~ 1e-3.
    let mut rng = ChaCha8Rng::seed_from_u64(3000);
    let g0 = ModalState::random_ball(&basis, 2.0, &mut rng);
    let run = |dt: f64| {
        let cfg = IntegratorConfig::new(dt, Scheme::IfRk2, 0.5, 1 << 30)
            .unwrap()
            .with_storage(1 << 30);
        integrate::simulate(&g0, &basis, &prm, &cfg)
            .unwrap()
            .final_state
    };
    let (s1, s2, s3) = (run(1.25e-3), run(6.25e-4), run(3.125e-4));
    let ratio = s1.distance(&s2) / s2.distance(&s3);
    assert!(
        (3.5..=4.5).contains(&ratio),
        "self-convergence ratio {ratio}"
    );
    pass(
        6,
        &format!("spectral/FD relative L2 difference {worst_rel:.3e} at T = 1; rk2 self-convergence ratio {ratio:.3}"),
    );
}

#[test]
fn criterion_07_tangent_correctness() {
    // Directional derivative of the flow vs tangent propagation.
    let prm = default_prm();
    let basis = basis_m(8);
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let g = ModalState::random_ball(&basis, 1.0, &mut rng);
    let dir = ModalState::random_ball(&basis, 1.0, &mut rng);
    let cfg = IntegratorConfig::new(1e-3, Scheme::IfRk2, 0.1, 100).unwrap();
    let (_, tangent_final) = tangent::propagate_tangent(&g, &dir, 100, &basis, &prm, &cfg).unwrap();
    let eps = 1e-5;
    let run = |g0: &ModalState| {
        integrate::simulate(g0, &basis, &prm, &cfg)
            .unwrap()
            .final_state
    };
    let mut perturbed = g.clone();
    perturbed.axpy(eps, &dir);
    let mut fd = run(&perturbed);
    fd.axpy(-1.0, &run(&g));
    fd.scale(1.0 / eps);
    let rel = fd.distance(&tangent_final) / tangent_final.h_norm_sq().sqrt();
    assert!(rel <= 1e-4, "directional derivative error {rel}");

    // Equilibrium oracle: negligible feed makes the zero state stationary
    // and the linearization block-diagonal over modes; compare against a
    // dense eigensolver on the 6x6 blocks.
    let tiny = 1e-300;
    let prm0 = Parameters::new(1.0, 1.0, 1.0, 0.1, 0.1, 0.1, tiny, 2.0, 1.0, 1.0, 1.0).unwrap();
    let basis0 = basis_m(6);
    let base0 = ModalState::zero(&basis0);
    let jac0 = model::reaction_jacobian_pointwise(&model::PointState::default(), &prm0).unwrap();
    let diff = model::diffusivities(&prm0);
    let mut oracle = Vec::new();
    for &lam in basis0.eigenvalues() {
        let mut b = nalgebra::DMatrix::<f64>::zeros(6, 6);
        for r in 0..6 {
            for c in 0..6 {
                b[(r, c)] = jac0[r][c];
            }
            b[(r, r)] -= diff[r] * lam;
        }
        for ev in b.complex_eigenvalues().iter() {
            oracle.push(ev.re);
        }
    }
    oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let m = 4;
    let cfg0 = IntegratorConfig::new(1e-3, Scheme::IfRk2, 160.0, 10_000).unwrap();
    let lya = tangent::evolve_tangents(&base0, m, &cfg0, 10, 80_000, &basis0, &prm0, 99).unwrap();
    let mut worst = 0.0_f64;
    for (got, want) in lya.exponents.iter().zip(&oracle) {
        assert!(
            (got - want).abs() <= 1e-6,
            "exponent {got} vs oracle {want}"
        );
        worst = worst.max((got - want).abs());
    }
    let qm = tangent::qm_average(&base0, m, &cfg0, 10, 80_000, &basis0, &prm0, 99).unwrap();
    let mut partial = 0.0;
    for (i, q) in qm.q_m.iter().enumerate() {
        partial += oracle[i];
        assert!(
            (q - partial).abs() <= 1e-6,
            "q_{} = {q} vs oracle partial sum {partial}",
            i + 1
        );
        worst = worst.max((q - partial).abs());
    }
    pass(
        7,
        &format!("directional derivative error {rel:.3e}; exponents and q_m match the dense oracle to {worst:.3e}"),
    );
}

#[test]
fn criterion_08_dimension_pipeline() {
    let prm = default_prm();
    let basis = basis_m(32);

    // Transient, then trace averages on the attractor.
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let g0 = ModalState::random_ball(&basis, 5.0, &mut rng);
    let transient_cfg = IntegratorConfig::new(2e-3, Scheme::IfRk2, 20.0, 100).unwrap();
    let transient = integrate::simulate(&g0, &basis, &prm, &transient_cfg).unwrap();

    let m_max = 24;
    let qm_cfg = IntegratorConfig::new(2e-3, Scheme::IfRk2, 10.0, 100).unwrap();
    let qm = tangent::qm_average(
        &transient.final_state,
        m_max,
        &qm_cfg,
        10,
        500,
        &basis,
        &prm,
        77,
    )
    .unwrap();
    let m_star = qm.m_star.expect("some q_m must be negative");
    assert!(m_star <= 24, "m* = {m_star} exceeds 24");

    // Analytic bound from the trace condition, with the closed-form
    // constants and with the observed H1 witness.
    let est = spectral::embedding_constants(&basis, 1000, 7).unwrap();
    let bs = bounds::compute_bound_set(&prm, 1.0, PI, 1, est.delta, est.eta);
    let q3_analytic =
        tangent::q3_constant(1, est.delta, est.c_gn, bs.q1.value + bs.q2.value, prm.d0());
    let analytic = tangent::analytic_dimension_bound(&prm, &bs, 1.0, q3_analytic);
    assert!(
        (m_star as f64) <= analytic.m,
        "m* = {m_star} exceeds analytic m = {}",
        analytic.m
    );
    assert_eq!(analytic.d_hausdorff, analytic.m);
    assert_eq!(analytic.d_fractal, 2.0 * analytic.m);

    let h1_tail = transient
        .samples
        .iter()
        .filter(|s| s.t >= 12.0)
        .map(|s| s.norms.uw_h1_sq() + s.norms.vz_h1_sq() + s.norms.phipsi_h1_sq())
        .fold(0.0_f64, f64::max);
    let q3_witness = tangent::q3_constant(1, est.delta, est.c_gn, h1_tail, prm.d0());
    let witness = tangent::analytic_dimension_bound(&prm, &bs, 1.0, q3_witness);
    assert!(witness.m.is_finite());
    assert!(
        (m_star as f64) <= witness.m,
        "m* = {m_star} exceeds witness m = {}",
        witness.m
    );
    pass(
        8,
        &format!(
            "m* = {m_star} <= witness m = {} (analytic m = {}); d_H <= m, d_F <= 2m",
            witness.m, analytic.m
        ),
    );
}

#[test]
fn criterion_09_symmetry_invariant() {
    let prm = default_prm();
    let basis = basis_m(32);
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let mut g0 = ModalState::zero(&basis);
    for comp in 0..3 {
        for j in 0..basis.m_tot() {
            let c = rand::Rng::gen_range(&mut rng, -1.0..1.0) / ((j + 1) as f64).powi(2);
            g0.set_coeff(comp, j, c);
            g0.set_coeff(comp + 3, j, c);
        }
    }
    g0.scale(5.0 / g0.h_norm_sq().sqrt());
    let cfg = IntegratorConfig::new(1e-3, Scheme::IfRk2, 10.0, 1000)
        .unwrap()
        .with_storage(1000);
    let traj = integrate::simulate(&g0, &basis, &prm, &cfg).unwrap();
    let defect = traj.final_state.sync_defect();
    assert!(defect <= 1e-10, "synchronization defect {defect}");
    pass(
        9,
        &format!("synchronized data stays synchronized over T = 10 (defect {defect:.3e})"),
    );
}

#[test]
fn criterion_10_negative_control() {
    // A short generic run keeps every observable (including the
    // antisymmetric combinations, which decay on the attractor) bounded
    // away from zero on the tail, so each finite bound is falsifiable.
    let prm = default_prm();
    let basis = basis_m(32);
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    let g0 = ModalState::random_ball(&basis, RADIUS, &mut rng);
    let cfg = IntegratorConfig::new(1e-3, Scheme::IfRk2, 1.0, 10).unwrap();
    let traj = integrate::simulate(&g0, &basis, &prm, &cfg).unwrap();
    let est = spectral::embedding_constants(&basis, 1000, 7).unwrap();
    let bs = bounds::compute_bound_set(&prm, 1.0, PI, 1, est.delta, est.eta);

    let scaled_names = [
        ("R0", "vz_l2"),
        ("R1", "yxi_l2"),
        ("R2", "ptheta_l2"),
        ("K1", "g_l2"),
        ("K2", "vz_l4"),
        ("K3", "vz_l6"),
    ];
    for (bound_name, verdict_name) in scaled_names {
        let mut shrunk = bs.clone();
        shrunk.constant_mut(bound_name).unwrap().scale(0.01);
        let verdicts = bounds::verify_absorption(&traj, &shrunk, TAIL_FRACTION, 0.0).unwrap();
        let hit = verdicts.iter().find(|v| v.name == verdict_name).unwrap();
        assert!(
            !hit.pass,
            "scaling {bound_name} by 0.01 did not fail its verdict (observed {}, bound {})",
            hit.observed, hit.bound
        );
        assert!(
            verdicts.iter().any(|v| !v.pass),
            "no failing verdict after scaling {bound_name}"
        );
    }
    // Unscaled bounds pass on the same run.
    let verdicts = bounds::verify_absorption(&traj, &bs, TAIL_FRACTION, 0.0).unwrap();
    assert!(verdicts.iter().all(|v| v.pass));
    pass(
        10,
        "each finite bound scaled by 0.01 produces a failing verdict; unscaled bounds pass",
    );
}
