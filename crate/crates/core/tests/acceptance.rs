//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use gfacs::aco::{deposit_ant_system, deposit_maxmin, init_pheromone, maxmin_limits, AcoConfig};
use gfacs::construct::{count_symmetric, sample_backward_actions, sample_trajectory, sample_with_logits, solution_of, EdgeLogits};
use gfacs::experiment::{run_experiment, Arm, ExperimentConfig};
use gfacs::gfn_train::{
    collect_experiences, normalize_batch, tb_loss_and_grads, train_prior, vargrad_loss_and_grads, InstanceBatch, LossKind,
    TrainConfig,
};
use gfacs::heatmap::TrainState;
use gfacs::local_search::{destroy_and_repair, two_opt, LocalSearch, LsConfig};
use gfacs::matrix::SquareMatrix;
use gfacs::metrics::diversity;
use gfacs::parallel::with_threads;
use gfacs::problems::{
    energy, energy_unchecked, gen_bpp, gen_cvrp, gen_smtwtp, gen_tsp, tour_length, CvrpInstance, Instance, PartialState,
    ProblemKind, Solution,
};
use gfacs::seed::{rng_from_seed, role_seed};

struct Outcome {
    pass: bool,
    detail: String,
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Every complete action sequence of `inst`, by depth-first search.
fn all_trajectories(inst: &Instance) -> Vec<Vec<usize>> {
    fn rec(s: &PartialState<'_>, out: &mut Vec<Vec<usize>>) {
        if s.is_terminal() {
            out.push(s.actions().to_vec());
            return;
        }
        for a in s.feasible_actions() {
            let mut t = s.clone();
            t.apply(a).unwrap();
            rec(&t, out);
        }
    }
    let mut out = Vec::new();
    rec(&PartialState::new(inst), &mut out);
    out
}

fn c1_proportionality() -> Outcome {
    let beta = 5.0;
    let mut lines = Vec::new();
    let mut pass = true;
    for i in 0..5u64 {
        let start = Instant::now();
        let inst = Instance::Tsp(gen_tsp(6, &mut rng_from_seed(role_seed(1, "c1-instance", i))).unwrap());
        let mut target: HashMap<Solution, f64> = HashMap::new();
        for p in permutations(&[1, 2, 3, 4, 5]) {
            let tour: Vec<usize> = std::iter::once(0).chain(p).collect();
            let s = Solution::Tsp { tour }.canonical();
            let e = energy(&inst, &s).unwrap();
            target.insert(s, e);
        }
        assert_eq!(target.len(), 60);
        let emin = target.values().copied().fold(f64::INFINITY, f64::min);
        let z: f64 = target.values().map(|e| (-beta * (e - emin)).exp()).sum();
        // With the identity local search the exploitation batch only repeats
        // the exploration solutions, so training is on-policy.
        let cfg = TrainConfig {
            beta_min: beta,
            beta_max: beta,
            n_epoch: 400,
            n_flat: 0,
            steps_per_epoch: 1,
            k_samples: 32,
            lr: 0.05,
            lr_log_z: 0.1,
            loss: LossKind::Tb,
            off_policy: false,
            energy_reshaping: false,
            shared_normalization: true,
            ..TrainConfig::default()
        };
        let trained = train_prior(&inst, &cfg, &LocalSearch::none(), &mut rng_from_seed(role_seed(1, "c1-train", i))).unwrap();
        let logits = EdgeLogits::from_prior(&trained.heatmap);
        let mut rng = rng_from_seed(role_seed(1, "c1-sample", i));
        let draws = 100_000;
        let mut counts: HashMap<Solution, usize> = HashMap::new();
        for _ in 0..draws {
            let t = sample_with_logits(&inst, &logits, &mut rng);
            *counts.entry(solution_of(&inst, &t.actions).unwrap()).or_default() += 1;
        }
        let tv = 0.5
            * target
                .iter()
                .map(|(s, e)| ((-beta * (e - emin)).exp() / z - *counts.get(s).unwrap_or(&0) as f64 / draws as f64).abs())
                .sum::<f64>();
        let secs = start.elapsed().as_secs_f64();
        let ok = tv <= 0.10 && secs <= 60.0;
        pass &= ok;
        lines.push(format!("tv={tv:.4} ({secs:.1}s)"));
    }
    Outcome { pass, detail: format!("TV per instance [{}], need <= 0.10", lines.join(", ")) }
}

fn c2_gradients() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut rng = rng_from_seed(role_seed(2, "c2", 0));
    let insts = [
        Instance::Tsp(gen_tsp(6, &mut rng).unwrap()),
        Instance::Cvrp(gen_cvrp(5, &mut rng).unwrap()),
        Instance::Smtwtp(gen_smtwtp(5, &mut rng).unwrap()),
        Instance::Bpp(gen_bpp(5, &mut rng).unwrap()),
    ];
    for inst in &insts {
        for kind in [LossKind::Tb, LossKind::Vargrad] {
            let n = inst.n_nodes();
            let mut st = TrainState::from_theta(SquareMatrix::from_fn(n, |_, _| rng.gen_range(-1.5..1.5)));
            st.log_z = rng.gen_range(-3.0..3.0);
            let (a, b) = collect_experiences(inst, &st, 8, &LocalSearch::default(), 0.7, &mut rng);
            for batch in [normalize_batch(&a), normalize_batch(&b)] {
                let loss = |s: &TrainState| -> (f64, SquareMatrix, f64) {
                    let bb = [InstanceBatch { inst, state: s, experiences: &batch }];
                    let o = match kind {
                        LossKind::Tb => tb_loss_and_grads(&bb, 3.0),
                        LossKind::Vargrad => vargrad_loss_and_grads(&bb, 3.0),
                    }
                    .unwrap();
                    (o.loss, o.grad_theta[0].clone(), o.grad_log_z[0])
                };
                let (_, g, gz) = loss(&st);
                let rel = |an: f64, fd: f64| (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                for idx in 0..n * n {
                    let mut p = st.clone();
                    p.theta.as_mut_slice()[idx] += h;
                    let mut m = st.clone();
                    m.theta.as_mut_slice()[idx] -= h;
                    let fd = (loss(&p).0 - loss(&m).0) / (2.0 * h);
                    worst = worst.max(rel(g.as_slice()[idx], fd));
                }
                let mut p = st.clone();
                p.log_z += h;
                let mut m = st.clone();
                m.log_z -= h;
                worst = worst.max(rel(gz, (loss(&p).0 - loss(&m).0) / (2.0 * h)));
            }
        }
    }
    Outcome { pass: worst <= 1e-4, detail: format!("max relative error {worst:.2e} over 4 kinds x 2 losses, need <= 1e-4") }
}

fn c3_pheromone() -> Outcome {
    let tour = Solution::Tsp { tour: vec![0, 1, 2, 3, 4] };
    let mut rho = init_pheromone(5);
    deposit_ant_system(&mut rho, std::slice::from_ref(&tour), &[2.0], 0.1, 1.0);
    let on = |i: usize, j: usize| (i + 1) % 5 == j || (j + 1) % 5 == i;
    let mut exact = true;
    for i in 0..5 {
        for j in 0..5 {
            exact &= rho.get(i, j) == if on(i, j) { 1.4 } else { 0.9 };
        }
    }
    let mut rng = rng_from_seed(role_seed(3, "c3", 0));
    let inst = gen_tsp(20, &mut rng).unwrap();
    let mut rho = init_pheromone(20);
    let mut best: Option<(Solution, f64)> = None;
    let mut clamped = true;
    for round in 0..1000 {
        let mut t: Vec<usize> = (0..20).collect();
        t.shuffle(&mut rng);
        let e = tour_length(&inst, &t);
        let s = Solution::Tsp { tour: t }.canonical();
        if best.as_ref().is_none_or(|b| e < b.1) {
            best = Some((s.clone(), e));
        }
        let (bs, be) = best.clone().unwrap();
        let (lo, hi) = maxmin_limits(be, 0.1, 1.0, 20);
        deposit_maxmin(&mut rho, (&s, e), (&bs, be), 0.1, 1.0, lo, hi, (round + 1) % 10 == 0);
        clamped &= rho.matrix().as_slice().iter().all(|&v| v >= lo && v <= hi);
    }
    Outcome {
        pass: exact && clamped,
        detail: format!("worked example exact: {exact}; MAX-MIN entries within limits over 1000 rounds: {clamped}"),
    }
}

fn c4_symmetry() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for n in 2..=8usize {
        let mut rng = rng_from_seed(role_seed(4, "c4-tsp", n as u64));
        let inst = Instance::Tsp(gen_tsp(n, &mut rng).unwrap());
        let sol = Solution::Tsp { tour: (0..n).collect() }.canonical();
        let oracle = all_trajectories(&inst).iter().filter(|t| solution_of(&inst, t).unwrap() == sol).count() as u64;
        let ok = count_symmetric(&sol) == 2 * n as u64;
        if !ok {
            notes.push(format!("TSP N={n}: count {} vs 2N", count_symmetric(&sol)));
        }
        if oracle != count_symmetric(&sol) {
            notes.push(format!("TSP N={n}: enumeration finds {oracle} sequences, count_symmetric says {}", count_symmetric(&sol)));
        }
        pass &= ok;
    }
    let cvrp = CvrpInstance::new(
        [0.5, 0.5],
        vec![[0.1, 0.1], [0.2, 0.9], [0.8, 0.8], [0.9, 0.2], [0.5, 0.1]],
        vec![3, 3, 3, 3, 3],
        9,
    )
    .unwrap();
    let inst = Instance::Cvrp(cvrp);
    let traj = all_trajectories(&inst);
    for (routes, k, s) in [
        (vec![vec![1, 2]], 1u64, 0u64),
        (vec![vec![1, 2], vec![3]], 2, 1),
        (vec![vec![1, 2], vec![3], vec![4, 5]], 3, 1),
    ] {
        let sol = Solution::Cvrp { routes }.canonical();
        let fact: u64 = (1..=k).product();
        let want = fact * (1 << (k - s));
        let got = count_symmetric(&sol);
        // the enumeration oracle needs every customer served, so restrict
        // it to the instance of the served customers
        let served: Vec<usize> = match &sol {
            Solution::Cvrp { routes } => routes.iter().flatten().copied().collect(),
            _ => unreachable!(),
        };
        let oracle = if served.len() == 5 {
            traj.iter().filter(|t| solution_of(&inst, t).unwrap() == sol).count() as u64
        } else {
            let Instance::Cvrp(p) = &inst else { unreachable!() };
            let sub = CvrpInstance::new(
                p.depot,
                served.iter().map(|&c| p.coords[c - 1]).collect(),
                served.iter().map(|&c| p.demands[c - 1]).collect(),
                p.capacity,
            )
            .unwrap();
            let relabel: HashMap<usize, usize> = served.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();
            let sub_sol = match &sol {
                Solution::Cvrp { routes } => Solution::Cvrp {
                    routes: routes.iter().map(|r| r.iter().map(|c| relabel[c]).collect()).collect(),
                }
                .canonical(),
                _ => unreachable!(),
            };
            let sub_inst = Instance::Cvrp(sub);
            all_trajectories(&sub_inst).iter().filter(|t| solution_of(&sub_inst, t).unwrap() == sub_sol).count() as u64
        };
        if got != want || oracle != want {
            notes.push(format!("CVRP (K,S)=({k},{s}): count {got}, formula {want}, enumeration {oracle}"));
            pass = false;
        }
    }
    // backward sampling uniformity over the 2N readings of a 4-city tour
    let inst = Instance::Tsp(gen_tsp(4, &mut rng_from_seed(role_seed(4, "c4-chi", 0))).unwrap());
    let sol = Solution::Tsp { tour: vec![0, 1, 2, 3] };
    let mut rng = rng_from_seed(role_seed(4, "c4-chi", 1));
    let draws = 100_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(sample_backward_actions(&inst, &sol, &mut rng).unwrap()).or_default() += 1;
    }
    let expected = draws as f64 / 8.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let chi_ok = counts.len() == 8 && chi2 <= 18.475;
    pass &= chi_ok;
    notes.push(format!("chi-square {chi2:.2} over {} readings (critical 18.475, df 7)", counts.len()));
    Outcome { pass, detail: notes.join("; ") }
}

fn c5_prior_ordering() -> Outcome {
    let cfg = ExperimentConfig {
        problem: ProblemKind::Tsp,
        size: 50,
        n_test_instances: 20,
        arms: vec![Arm::Uniform, Arm::GfacsTb],
        train: Some(TrainConfig::for_problem(ProblemKind::Tsp)),
        aco: AcoConfig { n_ants: 50, n_rounds: 50, use_ls: true, ..AcoConfig::default() },
        master_seed: 5,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&cfg).unwrap();
    let energy = |i: usize, a: Arm| report.rows.iter().find(|r| r.instance_id == i && r.arm == a).unwrap().best_energy.unwrap();
    let wins = (0..20).filter(|&i| energy(i, Arm::GfacsTb) <= energy(i, Arm::Uniform)).count();
    let (g, u) = (report.mean_energy(Arm::GfacsTb).unwrap(), report.mean_energy(Arm::Uniform).unwrap());
    Outcome {
        pass: wins >= 16 && g < u,
        detail: format!("gfacs_tb <= uniform on {wins}/20 (need 16); means {g:.4} vs {u:.4}"),
    }
}

fn c6_ablation() -> Outcome {
    let cfg = ExperimentConfig {
        problem: ProblemKind::Bpp,
        size: 20,
        n_test_instances: 10,
        model_seeds: 3,
        arms: vec![Arm::GfacsTb, Arm::GfacsNoSharedNorm, Arm::GfacsNoReshaping],
        train: Some(TrainConfig::for_problem(ProblemKind::Bpp)),
        aco: AcoConfig { n_ants: 20, n_rounds: 20, ..AcoConfig::default() },
        master_seed: 6,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&cfg).unwrap();
    let m = |a| report.mean_energy(a).unwrap();
    let (full, no_norm, no_reshape) = (m(Arm::GfacsTb), m(Arm::GfacsNoSharedNorm), m(Arm::GfacsNoReshaping));
    Outcome {
        pass: no_norm > full && no_reshape >= full,
        detail: format!("mean objective full {full:.4}, no shared norm {no_norm:.4}, no reshaping {no_reshape:.4}"),
    }
}

fn c7_local_search() -> Outcome {
    let mut rng = rng_from_seed(role_seed(7, "c7-2opt", 0));
    let mut two_opt_ok = true;
    for trial in 0..100 {
        let n = 4 + trial % 9;
        let inst = gen_tsp(n, &mut rng).unwrap();
        let mut t: Vec<usize> = (0..n).collect();
        t.shuffle(&mut rng);
        let out = two_opt(&inst, t, 100_000);
        let len = tour_length(&inst, &out);
        // every segment reversal, measured by full tour length
        for i in 0..n {
            for j in i + 1..n {
                let mut c = out.clone();
                c[i..=j].reverse();
                if tour_length(&inst, &c) < len - 1e-9 {
                    two_opt_ok = false;
                }
            }
        }
    }
    let mut hits = 0;
    let mut monotone = true;
    for seed in 0..20u64 {
        let mut rng = rng_from_seed(role_seed(7, "c7-dr", seed));
        let inst = Instance::Smtwtp(gen_smtwtp(8, &mut rng).unwrap());
        let optimum = permutations(&(0..8).collect::<Vec<_>>())
            .into_iter()
            .map(|order| energy_unchecked(&inst, &Solution::Smtwtp { order }))
            .fold(f64::INFINITY, f64::min);
        let train = TrainConfig::for_problem(ProblemKind::Smtwtp);
        let eta = train_prior(&inst, &train, &LocalSearch::default(), &mut rng).unwrap().heatmap;
        let rho = init_pheromone(9);
        let start: Vec<Solution> = (0..10)
            .map(|_| solution_of(&inst, &sample_trajectory(&inst, &eta, &rho, &mut rng).actions).unwrap())
            .collect();
        // the SMTWTP reading is unique, so the retained prefix never moves; destroy
        // all but one action to let repair reach every ordering
        let cfg = LsConfig { rounds: 30, n_destroy: Some(7), top_k: 10, batch_width: 10, ..LsConfig::default() };
        let best_of = |s: &[Solution]| s.iter().map(|x| energy_unchecked(&inst, x)).fold(f64::INFINITY, f64::min);
        let mut current = start.clone();
        let mut prev = best_of(&start);
        let one = LsConfig { rounds: 1, ..cfg.clone() };
        for _ in 0..cfg.rounds {
            current = destroy_and_repair(&inst, &current, &eta, &rho, &one, &mut rng);
            let b = best_of(&current);
            monotone &= b <= prev + 1e-12;
            prev = b;
        }
        let out = destroy_and_repair(&inst, &start, &eta, &rho, &cfg, &mut rng);
        let e = energy_unchecked(&inst, &out[0]);
        monotone &= e <= best_of(&start) + 1e-12;
        if (e - optimum).abs() <= 1e-9 * optimum.max(1.0) {
            hits += 1;
        }
    }
    Outcome {
        pass: two_opt_ok && monotone && hits >= 10,
        detail: format!("2-opt local optima verified: {two_opt_ok}; monotone: {monotone}; SMTWTP optimum reached {hits}/20 (need 10)"),
    }
}

fn c8_diversity_tradeoff() -> Outcome {
    let mut div = [0.0; 2];
    let mut en = [0.0; 2];
    let runs = 15.0;
    for i in 0..5u64 {
        let inst = Instance::Tsp(gen_tsp(20, &mut rng_from_seed(role_seed(8, "c8-instance", i))).unwrap());
        for s in 0..3u64 {
            for (arm, beta_max) in [50.0, 1000.0].into_iter().enumerate() {
                // at 50 epochs the logits are still close to uniform on both arms
                let cfg = TrainConfig {
                    beta_min: beta_max / 5.0,
                    beta_max,
                    n_epoch: 200,
                    ..TrainConfig::for_problem(ProblemKind::Tsp)
                };
                let mut rng = rng_from_seed(role_seed(8, "c8-train", i * 3 + s));
                let trained = train_prior(&inst, &cfg, &LocalSearch::default(), &mut rng).unwrap();
                let logits = EdgeLogits::from_prior(&trained.heatmap);
                let sols: Vec<Solution> = (0..100)
                    .map(|_| solution_of(&inst, &sample_with_logits(&inst, &logits, &mut rng).actions).unwrap())
                    .collect();
                div[arm] += diversity(&sols) / runs;
                en[arm] += sols.iter().map(|x| energy_unchecked(&inst, x)).sum::<f64>() / 100.0 / runs;
            }
        }
    }
    Outcome {
        pass: div[0] > div[1] && en[0] > en[1],
        detail: format!(
            "beta_max=50: diversity {:.4}, energy {:.4}; beta_max=1000: diversity {:.4}, energy {:.4}",
            div[0], en[0], div[1], en[1]
        ),
    }
}

fn c9_determinism() -> Outcome {
    let cfg = ExperimentConfig {
        problem: ProblemKind::Cvrp,
        size: 15,
        n_test_instances: 3,
        model_seeds: 2,
        arms: vec![Arm::Uniform, Arm::Heuristic, Arm::GfacsTb, Arm::GfacsVargrad],
        train: Some(TrainConfig { n_epoch: 4, steps_per_epoch: 2, k_samples: 8, ..TrainConfig::for_problem(ProblemKind::Cvrp) }),
        aco: AcoConfig { n_ants: 10, n_rounds: 5, ..AcoConfig::default() },
        master_seed: 9,
        ..ExperimentConfig::default()
    };
    let tables = |threads| {
        with_threads(Some(threads), || {
            let r = run_experiment(&cfg).unwrap();
            (r.results_csv(), r.summary_csv(), r.ablation_csv())
        })
    };
    let one = tables(1);
    let eight = tables(8);
    let again = tables(8);
    Outcome {
        pass: one == eight && eight == again,
        detail: format!("results/summary tables identical for 1 and 8 threads: {}; across re-runs: {}", one == eight, eight == again),
    }
}

fn main() {
    // `cargo test` passes harness flags; a filter argument selects criteria
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome, f64); 9] = [
        ("1 GFlowNet proportionality", c1_proportionality, 300.0),
        ("2 gradient correctness", c2_gradients, 30.0),
        ("3 pheromone arithmetic", c3_pheromone, 1.0),
        ("4 symmetry propositions", c4_symmetry, 10.0),
        ("5 prior-quality ordering", c5_prior_ordering, 1200.0),
        ("6 ablation directionality", c6_ablation, 900.0),
        ("7 local-search contracts", c7_local_search, 300.0),
        ("8 diversity-optimality trade-off", c8_diversity_tradeoff, 600.0),
        ("9 determinism", c9_determinism, f64::INFINITY),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs <= budget;
        if !pass {
            failed += 1;
        }
        let status = if pass { "PASS" } else { "FAIL" };
        let budget_note = if budget.is_finite() { format!(", budget {budget:.0}s") } else { String::new() };
        println!("criterion {name}: {status} ({secs:.1}s{budget_note}) {}", out.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criterion/criteria failed");
        std::process::exit(1);
    }
}
