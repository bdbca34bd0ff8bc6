//! Acceptance gate. Each criterion prints one PASS/FAIL line.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use autoencode::adjoint::{control_gradient, discrete_cost, LossSpec, ParticleBatch};
use autoencode::architecture::{
    build_autoencoder_schedule, build_encoder_schedule, build_plain_schedule, build_unet_schedule, IndexSet,
    LayerSchedule, TimeGrid,
};
use autoencode::config::{preset, ActivationKind, RunConfig};
use autoencode::data_io::{gen_gaussian_classification, Dataset};
use autoencode::diagnostics::{hessian_extreme_eigs, latent_sparsity_report, wasserstein1_exact, HessianEigs};
use autoencode::dynamics::{Activation, ControlParams, Network};
use autoencode::trainer::{evaluate, gradient_descent_path, interpolate_path, train, train_from, HistoryRow, TrainerConfig};

/// Written straight to stderr so the line shows without `--nocapture`.
fn say(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn report(id: u32, name: &str, pass: bool, detail: String) {
    say(&format!("criterion {id} ({name}): {} {detail}", if pass { "PASS" } else { "FAIL" }));
    assert!(pass, "criterion {id} failed: {detail}");
}

const ACTIVATIONS: [Activation; 3] = [
    Activation::Tanh,
    Activation::SmoothRelu { sharpness: 3.0 },
    Activation::SmoothLeakyRelu {
        alpha: 0.2,
        sharpness: 4.0,
    },
];

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * rng.random_range(-1.0..1.0))
}

/// Plain, encoder or autoencoder schedule with `d ∈ 2..=4`, `3..=10` steps.
fn random_instance(seed: u64, activation: Activation) -> (Network, ParticleBatch, LossSpec, ControlParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = rng.random_range(3..=10usize);
    let d = rng.random_range(2..=4usize);
    let grid = TimeGrid::from_steps(0.2, steps).unwrap();
    let schedule = match seed % 3 {
        0 => build_plain_schedule(d, &grid).unwrap(),
        1 => build_encoder_schedule(&[(d, steps / 2), (1, steps - steps / 2)], &grid).unwrap(),
        _ => {
            let a = steps / 3;
            build_autoencoder_schedule(&[(d, a), (1, a)], 0, &[(d, steps - 2 * a)], &grid).unwrap()
        }
    };
    let net = Network::new(grid, schedule, activation).unwrap();
    let n = rng.random_range(1..=5usize);
    let target_dim = net.schedule().output_set().len();
    let batch = ParticleBatch::new(uniform(&mut rng, n, d, 1.0), uniform(&mut rng, n, target_dim, 1.0)).unwrap();
    let loss = LossSpec::for_schedule(net.schedule(), target_dim).unwrap();
    let theta = ControlParams::gaussian(net.schedule(), 0.6, seed + 1000);
    (net, batch, loss, theta)
}

#[test]
fn c01_gradient_matches_finite_differences() {
    let start = Instant::now();
    let lambda = 1e-2;
    let h = 1e-5;
    let mut worst = 0.0f64;
    let instances = 24;
    for seed in 0..instances {
        let (net, batch, loss, theta) = random_instance(seed, ACTIVATIONS[(seed / 3) as usize % 3]);
        let grad = control_gradient(&net, &batch, &theta, &loss, lambda).unwrap().to_flat();
        let mut probe = theta.clone();
        let mut fd = vec![0.0; grad.len()];
        for (p, slot) in fd.iter_mut().enumerate() {
            let orig = theta.to_flat()[p];
            *probe.flat_mut(p) = orig + h;
            let plus = discrete_cost(&net, &batch, &probe, &loss, lambda).unwrap();
            *probe.flat_mut(p) = orig - h;
            let minus = discrete_cost(&net, &batch, &probe, &loss, lambda).unwrap();
            *probe.flat_mut(p) = orig;
            *slot = (plus - minus) / (2.0 * h);
        }
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = grad.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    report(
        1,
        "gradient correctness",
        worst <= 1e-6 && elapsed < Duration::from_secs(30),
        format!("{instances} instances, max relative error {worst:.2e}, {:.1} s", elapsed.as_secs_f64()),
    );
}

fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[test]
fn c02_resolvent_is_the_flow_jacobian() {
    let h = 1e-6;
    let mut worst_fd = 0.0f64;
    let mut worst_mult = 0.0f64;
    for seed in 0..15u64 {
        let (net, _, _, theta) = random_instance(50 + seed, ACTIVATIONS[seed as usize % 3]);
        let d = net.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
        let steps = net.n_steps();
        let to = rng.random_range(1..=steps);
        let r = net.resolvent(x0.view(), &theta, 0, to).unwrap();
        let mut fd = Array2::zeros((d, d));
        for k in 0..d {
            let mut plus = x0.clone();
            plus[k] += h;
            let mut minus = x0.clone();
            minus[k] -= h;
            let xp = net.forward_flow(plus.view(), &theta).unwrap().states.row(to).to_owned();
            let xm = net.forward_flow(minus.view(), &theta).unwrap().states.row(to).to_owned();
            fd.column_mut(k).assign(&((xp - xm) / (2.0 * h)));
        }
        worst_fd = worst_fd.max(max_abs(&(&r - &fd)) / max_abs(&fd).max(1e-12));

        let from = rng.random_range(0..steps);
        let to = rng.random_range(from..=steps);
        let mid = rng.random_range(from..=to);
        let whole = net.resolvent(x0.view(), &theta, from, to).unwrap();
        let split = net
            .resolvent(x0.view(), &theta, mid, to)
            .unwrap()
            .dot(&net.resolvent(x0.view(), &theta, from, mid).unwrap());
        worst_mult = worst_mult.max(max_abs(&(&whole - &split)) / max_abs(&whole).max(1.0));
    }
    report(
        2,
        "resolvent oracle",
        worst_fd <= 1e-6 && worst_mult <= 1e-12,
        format!("fd relative error {worst_fd:.2e}, multiplicativity {worst_mult:.2e}"),
    );
}

fn all_schedules() -> Vec<LayerSchedule> {
    let grid = TimeGrid::from_steps(0.1, 12).unwrap();
    let mut out = vec![
        build_plain_schedule(3, &grid).unwrap(),
        build_encoder_schedule(&[(4, 4), (2, 4), (1, 4)], &grid).unwrap(),
        build_autoencoder_schedule(&[(2, 4), (1, 4)], 0, &[(2, 4)], &grid).unwrap(),
        build_autoencoder_schedule(&[(5, 3), (3, 3), (2, 2)], 1, &[(3, 1), (5, 2)], &grid).unwrap(),
        build_autoencoder_schedule(&[(2, 4), (1, 4)], 0, &[(2, 4)], &grid).unwrap().relabel(&[1, 0]).unwrap(),
        build_unet_schedule(&[3, 2, 1, 2, 3], &grid).unwrap(),
    ];
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(2..=6usize);
        let mut widths = vec![d];
        while *widths.last().unwrap() > 1 && rng.random_bool(0.7) {
            let w = *widths.last().unwrap();
            widths.push(rng.random_range(1..w));
        }
        if widths.len() < 2 {
            widths.push(1);
        }
        let mut enc: Vec<(usize, usize)> = widths.iter().map(|&w| (w, rng.random_range(1..=2))).collect();
        let mut dec: Vec<(usize, usize)> = widths[..widths.len() - 1].iter().rev().map(|&w| (w, 1)).collect();
        let bott = rng.random_range(0..=1);
        let used: usize = enc.iter().chain(&dec).map(|p| p.1).sum::<usize>() + bott;
        dec.last_mut().unwrap().1 += 1;
        let g = TimeGrid::from_steps(0.1, used + 1).unwrap();
        out.push(build_autoencoder_schedule(&enc, bott, &dec, &g).unwrap());
        enc.last_mut().unwrap().1 += 1;
        let g = TimeGrid::from_steps(0.1, enc.iter().map(|p| p.1).sum()).unwrap();
        out.push(build_encoder_schedule(&enc, &g).unwrap());
    }
    out
}

#[test]
fn c03_masking_invariants() {
    let mut problems = Vec::new();
    let schedules = all_schedules();
    for (s, schedule) in schedules.iter().enumerate() {
        let d = schedule.dim();
        let full = IndexSet::range(0..d);
        for (j, iv) in schedule.intervals().iter().enumerate() {
            if !iv.primal_active().intersection(&iv.shadow_active).is_empty() {
                problems.push(format!("schedule {s}: primal and shadow overlap at interval {j}"));
            }
        }
        if schedule.kind() == autoencode::architecture::ScheduleKind::Autoencoder {
            let last = schedule.intervals().last().unwrap();
            if last.primal_active().union(&last.shadow_active) != full {
                problems.push(format!("schedule {s}: final active sets do not cover the state"));
            }
        }

        let grid = TimeGrid::from_steps(0.1, schedule.n_steps()).unwrap();
        for (a, act) in ACTIVATIONS.iter().enumerate() {
            let net = Network::new(grid, schedule.clone(), *act).unwrap();
            let theta = ControlParams::gaussian(schedule, 0.8, s as u64 * 7 + a as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s as u64);
            let x0 = uniform(&mut rng, 3, d, 1.0);
            let traj = net.forward_batch(x0.view(), &theta).unwrap();
            for j in 0..schedule.n_steps() {
                let active = schedule.active_at(j).unwrap();
                for k in (0..d).filter(|k| !active.contains(*k)) {
                    for i in 0..3 {
                        let before = traj.at_node(j)[[i, k]].to_bits();
                        let after = traj.at_node(j + 1)[[i, k]].to_bits();
                        if before != after {
                            problems.push(format!("schedule {s}: component {k} moved at step {j}"));
                        }
                    }
                }
            }
            let target_dim = schedule.output_set().len();
            let batch = ParticleBatch::new(x0.clone(), uniform(&mut rng, 3, target_dim, 1.0)).unwrap();
            let loss = LossSpec::for_schedule(schedule, target_dim).unwrap();
            let grad = control_gradient(&net, &batch, &theta, &loss, 1e-3).unwrap();
            for (name, params) in [("control", &theta), ("gradient", &grad)] {
                for j in 0..schedule.n_steps() {
                    let active = schedule.active_at(j).unwrap();
                    let w = params.full_weight(schedule, j).unwrap();
                    let b = params.full_bias(schedule, j).unwrap();
                    for r in 0..d {
                        for c in 0..d {
                            if !(active.contains(r) && active.contains(c)) && w[[r, c]] != 0.0 {
                                problems.push(format!("schedule {s}: masked {name} weight ({r},{c}) at node {j}"));
                            }
                        }
                        if !active.contains(r) && b[r] != 0.0 {
                            problems.push(format!("schedule {s}: masked {name} bias {r} at node {j}"));
                        }
                    }
                }
            }
        }
    }
    report(
        3,
        "masking invariants",
        problems.is_empty(),
        format!("{} schedules, {} violations {:?}", schedules.len(), problems.len(), problems.first()),
    );
}

struct ClassificationRun {
    config: RunConfig,
    net: Network,
    dataset: Dataset,
    rows: Vec<HistoryRow>,
    accuracy: f64,
    hessian: Vec<(usize, HessianEigs)>,
}

fn classification_run() -> &'static ClassificationRun {
    static RUN: OnceLock<ClassificationRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = preset("classify2d").unwrap();
        let problem = config.problem().unwrap();
        let net = problem.net;
        let batch = problem.dataset.batch(net.dim()).unwrap();
        let obj = autoencode::adjoint::Objective::new(&net, &batch, &problem.loss, config.trainer.lambda);
        let probe = config.diagnostics.hessian_probe(config.seed);
        let every = config.diagnostics.hessian_every;
        let mut hessian = Vec::new();
        let tc = &config.trainer;
        let out = train_from(&net, &batch, &problem.loss, tc, tc.init.controls(&net), |k, at| {
            if k % every == 0 {
                hessian.push((k, hessian_extreme_eigs(&obj, &at.theta, probe, config.diagnostics.hessian_tol).unwrap()));
            }
        })
        .unwrap();
        let last = out.history.rows.len() - 1;
        if hessian.last().map(|h| h.0) != Some(last) {
            hessian.push((last, hessian_extreme_eigs(&obj, &out.theta, probe, config.diagnostics.hessian_tol).unwrap()));
        }
        let metrics = evaluate(&net, &out.theta, &batch, &problem.loss, true).unwrap();
        ClassificationRun {
            net,
            dataset: problem.dataset,
            rows: out.history.rows,
            accuracy: metrics.accuracy.unwrap(),
            hessian,
            config,
        }
    })
}

#[test]
fn c04_minimizing_movement_descent() {
    let run = classification_run();
    let mut worst = f64::NEG_INFINITY;
    let mut increases = 0;
    for w in run.rows.windows(2) {
        let lhs = w[1].cost + w[1].step_norm * w[1].step_norm / (2.0 * w[1].tau);
        worst = worst.max(lhs - w[0].cost);
        if w[1].cost > w[0].cost {
            increases += 1;
        }
    }
    report(
        4,
        "MMS descent",
        worst <= 1e-9 && increases == 0,
        format!(
            "{} steps, max J(k+1) + |step|^2/2tau - J(k) = {worst:.2e}, cost increases {increases}",
            run.rows.len() - 1
        ),
    );
}

#[test]
fn c05_classification_accuracy() {
    let run = classification_run();
    let last = run.rows.last().unwrap();
    report(
        5,
        "2D classification",
        run.accuracy >= 0.95 && run.net.n_steps() == 21,
        format!(
            "{} layers, dt {:.4}, N {}, {} steps, accuracy {:.3}, data term {:.3e}",
            run.net.n_steps(),
            run.net.dt(),
            run.dataset.len(),
            last.iter,
            run.accuracy,
            last.data_term
        ),
    );
    assert_eq!(run.config.architecture.activation, ActivationKind::Tanh);
}

#[test]
fn c06_hessian_sign_trend() {
    let run = classification_run();
    let h = &run.hessian;
    let first = h.first().unwrap().1;
    let last = h.last().unwrap().1;
    let pairs = h.len() - 1;
    let rising = h.windows(2).filter(|w| w[1].1.max > w[0].1.max).count();
    let table: Vec<String> = h.iter().map(|(k, e)| format!("{k}:[{:.2e},{:.2e}]", e.min, e.max)).collect();
    report(
        6,
        "Hessian sign trend",
        first.min < 0.0 && last.min > 0.0 && rising as f64 >= 0.8 * pairs as f64,
        format!(
            "lambda_min {:.2e} -> {:.2e}, lambda_max rises in {rising}/{pairs} pairs; {}",
            first.min,
            last.min,
            table.join(" ")
        ),
    );
}

fn parabola_final(name: &str, activation: ActivationKind) -> f64 {
    let mut cfg = preset(name).unwrap();
    cfg.architecture.activation = activation;
    let problem = cfg.problem().unwrap();
    let batch = problem.dataset.batch(problem.net.dim()).unwrap();
    let out = train(&problem.net, &batch, &problem.loss, &cfg.trainer).unwrap();
    out.history.last().unwrap().data_term
}

#[test]
fn c07_parabola_depth_and_activation() {
    let (a20, a40) = (preset("parabola20").unwrap(), preset("parabola40").unwrap());
    assert_eq!((a20.trainer.n_outer, a20.seed, a20.data.n), (a40.trainer.n_outer, a40.seed, a40.data.n));
    let leaky20 = parabola_final("parabola20", ActivationKind::SmoothLeakyRelu);
    let leaky40 = parabola_final("parabola40", ActivationKind::SmoothLeakyRelu);
    let tanh20 = parabola_final("parabola20", ActivationKind::Tanh);
    let tanh40 = parabola_final("parabola40", ActivationKind::Tanh);
    let depth = leaky40 / leaky20;
    let bounded = (tanh20 / leaky20).min(tanh40 / leaky40);
    report(
        7,
        "parabola depth effect",
        depth <= 0.5 && bounded >= 2.0,
        format!(
            "leaky 20/40 layers {leaky20:.3e}/{leaky40:.3e} (ratio {depth:.3}), tanh {tanh20:.3e}/{tanh40:.3e} (>= {bounded:.1}x leaky)"
        ),
    );
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..n {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

fn dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn c08_wasserstein_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_exact = 0.0f64;
    let mut worst_dual = f64::NEG_INFINITY;
    let mut instances = 0;
    for n in 1..=8usize {
        let perms = permutations(n);
        for _ in 0..4 {
            let dim = rng.random_range(1..=3usize);
            let mu = uniform(&mut rng, n, dim, 2.0);
            let nu = uniform(&mut rng, n, dim, 2.0);
            let w1 = wasserstein1_exact(mu.view(), nu.view()).unwrap();
            let brute = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| dist(mu.row(i), nu.row(j))).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                / n as f64;
            worst_exact = worst_exact.max((w1 - brute).abs() / brute.max(1.0));
            for t in 0..100 {
                // 1-Lipschitz test functions: distance to a point set, or a unit projection
                let f = |x: ndarray::ArrayView1<f64>, anchors: &Array2<f64>, u: &Array1<f64>| -> f64 {
                    if t % 2 == 0 {
                        anchors.rows().into_iter().map(|a| dist(x, a)).fold(f64::INFINITY, f64::min)
                    } else {
                        x.dot(u)
                    }
                };
                let anchors = uniform(&mut rng, 1 + t % 3, dim, 2.0);
                let mut u = Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0));
                let norm: f64 = u.dot(&u);
                u /= norm.sqrt().max(1e-12);
                let e_mu = mu.rows().into_iter().map(|x| f(x, &anchors, &u)).sum::<f64>() / n as f64;
                let e_nu = nu.rows().into_iter().map(|x| f(x, &anchors, &u)).sum::<f64>() / n as f64;
                worst_dual = worst_dual.max((e_mu - e_nu).abs() - w1);
            }
            instances += 1;
        }
    }
    report(
        8,
        "Wasserstein oracle",
        worst_exact <= 1e-12 && worst_dual <= 1e-12,
        format!("{instances} instances, max exact gap {worst_exact:.2e}, max dual excess {worst_dual:.2e}"),
    );
}

#[test]
fn c09_mnist_reconstruction() {
    let cfg = preset("mnist").unwrap();
    let start = Instant::now();
    let problem = cfg.problem().unwrap();
    let net = &problem.net;
    assert_eq!((net.n_steps(), net.dim(), problem.dataset.len()), (23, 784, 1000));
    assert_eq!(*net.schedule().active_sizes().iter().min().unwrap(), 32);
    assert_eq!(cfg.architecture.activation, ActivationKind::SmoothLeakyRelu);
    let batch = problem.dataset.batch(net.dim()).unwrap();
    let out = train(net, &batch, &problem.loss, &cfg.trainer).unwrap();
    let elapsed = start.elapsed();
    let (first, last) = (out.history.rows[0].data_term, out.history.last().unwrap().data_term);
    let node = net.schedule().bottleneck_node();
    let latent = latent_sparsity_report(
        net,
        &out.theta,
        problem.dataset.inputs.view(),
        problem.dataset.labels.as_deref(),
        node,
        cfg.diagnostics.zero_tol,
    )
    .unwrap();
    say(&format!(
        "  latent trend at node {node}: modal support {} of {}, consistency {:.3} (trend target: >= 0.9 with support < 32)",
        latent.modal_support.len(),
        latent.latent.len(),
        latent.consistency
    ));
    let ratio = last / first;
    report(
        9,
        "MNIST desk scale",
        ratio <= 0.3 && elapsed <= Duration::from_secs(35 * 60),
        format!(
            "data term {first:.3} -> {last:.3} (ratio {ratio:.3}) in {} steps, {:.1} min",
            out.history.last().unwrap().iter,
            elapsed.as_secs_f64() / 60.0
        ),
    );
}

#[test]
fn c10_gradient_flow_limit() {
    let grid = TimeGrid::from_steps(0.25, 4).unwrap();
    let net = Network::new(grid, build_plain_schedule(2, &grid).unwrap(), Activation::Tanh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let batch = ParticleBatch::new(uniform(&mut rng, 4, 2, 1.0), uniform(&mut rng, 4, 2, 1.0)).unwrap();
    let loss = LossSpec::for_schedule(net.schedule(), 2).unwrap();
    let theta0 = ControlParams::gaussian(net.schedule(), 0.5, 3);
    let horizon = 0.2;
    let h = 1e-4;
    let reference = gradient_descent_path(&net, &batch, &loss, 0.0, theta0.clone(), h, (horizon / h) as usize).unwrap();
    let mut sup = Vec::new();
    for tau in [1e-2, 1e-3] {
        let cfg = TrainerConfig {
            lambda: 0.0,
            tau,
            n_outer: (horizon / tau).round() as usize,
            fp_tol: 1e-13,
            fp_max_iter: 100,
            max_retries: 0,
            stop_when_stationary: false,
            ..Default::default()
        };
        let mut path = Vec::new();
        train_from(&net, &batch, &loss, &cfg, theta0.clone(), |_, at| path.push(at.theta.clone())).unwrap();
        let d = (0..reference.len())
            .map(|i| interpolate_path(&path, tau, i as f64 * h).l2_distance(&reference[i], net.dt()))
            .fold(0.0f64, f64::max);
        sup.push(d);
    }
    report(
        10,
        "gradient-flow limit",
        sup[0] >= 2.0 * sup[1],
        format!("sup distance tau=1e-2: {:.3e}, tau=1e-3: {:.3e} (shrink {:.1}x)", sup[0], sup[1], sup[0] / sup[1]),
    );
}

#[test]
fn c11_generalization_trend() {
    let sizes = [16usize, 32, 64, 128];
    let n_test = 1000;
    let mut seeds_passing = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let mut cfg = preset("classify2d").unwrap();
        cfg.trainer.n_outer = 300;
        let pool = gen_gaussian_classification(sizes[3] + n_test, 1000 + seed).unwrap();
        let test_rows: Vec<usize> = (sizes[3]..sizes[3] + n_test).collect();
        let test = pool.select(&test_rows).unwrap();
        let mut gaps = Vec::new();
        for &n in &sizes {
            let train_set = pool.head(n).unwrap();
            let problem = cfg.problem_for(train_set).unwrap();
            let batch = problem.dataset.batch(problem.net.dim()).unwrap();
            let out = train(&problem.net, &batch, &problem.loss, &cfg.trainer).unwrap();
            let fit = evaluate(&problem.net, &out.theta, &batch, &problem.loss, true).unwrap();
            let test_batch = test.batch(problem.net.dim()).unwrap();
            let held = evaluate(&problem.net, &out.theta, &test_batch, &problem.loss, true).unwrap();
            gaps.push((held.mse - fit.mse).abs());
        }
        let non_increasing = gaps.windows(2).filter(|w| w[1] <= w[0]).count();
        if non_increasing >= 2 {
            seeds_passing += 1;
        }
        lines.push(format!("seed {seed}: gaps {:?} ({non_increasing}/3)", gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()));
    }
    for l in &lines {
        say(&format!("  {l}"));
    }
    report(
        11,
        "generalization trend",
        seeds_passing >= 3,
        format!("{seeds_passing}/5 seeds with a non-increasing gap in >= 2 of 3 doublings"),
    );
}
