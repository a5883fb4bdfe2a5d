use proptest::prelude::*;
use rand::seq::SliceRandom;

use gfacs::aco::{deposit_ant_system, init_pheromone};
use gfacs::construct::{count_symmetric, sample_backward_actions, sample_trajectory, solution_of};
use gfacs::gfn_train::shared_energy_normalize;
use gfacs::heatmap::heuristic_prior;
use gfacs::local_search::{cvrp_local_search, destroy_and_repair, two_opt, LsConfig};
use gfacs::metrics::{diversity, jaccard_distance};
use gfacs::problems::{
    energy, gen_bpp, gen_cvrp, gen_smtwtp, gen_tsp, route_length, tour_length, validate, Instance, ProblemKind, Solution,
};
use gfacs::seed::rng_from_seed;

fn instance(kind: ProblemKind, n: usize, seed: u64) -> Instance {
    let mut rng = rng_from_seed(seed);
    match kind {
        ProblemKind::Tsp => Instance::Tsp(gen_tsp(n, &mut rng).unwrap()),
        ProblemKind::Cvrp => Instance::Cvrp(gen_cvrp(n, &mut rng).unwrap()),
        ProblemKind::Smtwtp => Instance::Smtwtp(gen_smtwtp(n, &mut rng).unwrap()),
        ProblemKind::Bpp => Instance::Bpp(gen_bpp(n, &mut rng).unwrap()),
    }
}

fn kind() -> impl Strategy<Value = ProblemKind> {
    prop_oneof![Just(ProblemKind::Tsp), Just(ProblemKind::Cvrp), Just(ProblemKind::Smtwtp), Just(ProblemKind::Bpp)]
}

fn samples(inst: &Instance, k: usize, seed: u64) -> Vec<Solution> {
    let mut rng = rng_from_seed(seed);
    let eta = heuristic_prior(inst);
    let rho = init_pheromone(inst.n_nodes());
    (0..k).map(|_| solution_of(inst, &sample_trajectory(inst, &eta, &rho, &mut rng).actions).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampled_solutions_are_valid(kind in kind(), n in 3usize..14, seed in any::<u64>()) {
        let inst = instance(kind, n, seed);
        for s in samples(&inst, 5, seed ^ 1) {
            prop_assert!(validate(&inst, &s).is_ok());
            prop_assert!(energy(&inst, &s).unwrap().is_finite());
        }
    }

    #[test]
    fn backward_readings_rebuild_the_solution(kind in kind(), n in 3usize..12, seed in any::<u64>()) {
        let inst = instance(kind, n, seed);
        let mut rng = rng_from_seed(seed ^ 2);
        for s in samples(&inst, 3, seed ^ 3) {
            let actions = sample_backward_actions(&inst, &s, &mut rng).unwrap();
            prop_assert_eq!(solution_of(&inst, &actions).unwrap(), s.clone());
            prop_assert!(count_symmetric(&s) >= 1);
        }
    }

    #[test]
    fn tsp_energy_ignores_rotation_and_reflection(n in 3usize..20, seed in any::<u64>(), shift in 0usize..20) {
        let Instance::Tsp(p) = instance(ProblemKind::Tsp, n, seed) else { unreachable!() };
        let mut tour: Vec<usize> = (0..n).collect();
        tour.shuffle(&mut rng_from_seed(seed));
        let base = tour_length(&p, &tour);
        let mut t = tour.clone();
        t.rotate_left(shift % n);
        prop_assert!((tour_length(&p, &t) - base).abs() < 1e-9);
        t.reverse();
        prop_assert!((tour_length(&p, &t) - base).abs() < 1e-9);
        prop_assert_eq!(Solution::Tsp { tour: t }.canonical(), Solution::Tsp { tour }.canonical());
    }

    #[test]
    fn jaccard_is_a_bounded_symmetric_metric(kind in kind(), n in 3usize..12, seed in any::<u64>()) {
        let inst = instance(kind, n, seed);
        let s = samples(&inst, 3, seed ^ 4);
        for a in &s {
            prop_assert_eq!(jaccard_distance(a, a), 0.0);
            for b in &s {
                let d = jaccard_distance(a, b);
                prop_assert!((0.0..=1.0).contains(&d));
                prop_assert_eq!(d, jaccard_distance(b, a));
                for c in &s {
                    prop_assert!(jaccard_distance(a, c) <= d + jaccard_distance(b, c) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn diversity_ignores_order(kind in kind(), n in 3usize..12, seed in any::<u64>()) {
        let inst = instance(kind, n, seed);
        let mut s = samples(&inst, 6, seed ^ 5);
        let d = diversity(&s);
        s.shuffle(&mut rng_from_seed(seed));
        prop_assert!((diversity(&s) - d).abs() < 1e-12);
    }

    #[test]
    fn deposits_keep_pheromone_positive_and_symmetric(n in 3usize..15, seed in any::<u64>(), gamma in 0.01f64..0.99) {
        let inst = instance(ProblemKind::Tsp, n, seed);
        let sols = samples(&inst, 4, seed ^ 6);
        let es: Vec<f64> = sols.iter().map(|s| energy(&inst, s).unwrap()).collect();
        let mut rho = init_pheromone(n);
        for _ in 0..50 {
            deposit_ant_system(&mut rho, &sols, &es, gamma, 1.0);
        }
        prop_assert!(rho.matrix().as_slice().iter().all(|&v| v > 0.0 && v.is_finite()));
        prop_assert!(rho.matrix().is_symmetric(1e-12));
    }

    #[test]
    fn shared_normalization_is_centred(es in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let z = shared_energy_normalize(&es);
        prop_assert_eq!(z.len(), es.len());
        prop_assert!(z.iter().sum::<f64>().abs() < 1e-9 * es.len() as f64 * 1e3);
        for w in 0..es.len() {
            prop_assert!((z[w] - z[0] - (es[w] - es[0])).abs() < 1e-9);
        }
    }

    #[test]
    fn two_opt_never_lengthens(n in 4usize..30, seed in any::<u64>()) {
        let Instance::Tsp(p) = instance(ProblemKind::Tsp, n, seed) else { unreachable!() };
        let mut tour: Vec<usize> = (0..n).collect();
        tour.shuffle(&mut rng_from_seed(seed));
        let before = tour_length(&p, &tour);
        let out = two_opt(&p, tour, 10_000);
        prop_assert!(tour_length(&p, &out) <= before + 1e-9);
        let sol = Solution::Tsp { tour: out.clone() };
        prop_assert!(validate(&Instance::Tsp(p.clone()), &sol).is_ok());
        prop_assert_eq!(two_opt(&p, out.clone(), 10_000), out);
    }

    #[test]
    fn cvrp_moves_never_lengthen(n in 3usize..20, seed in any::<u64>()) {
        let inst = instance(ProblemKind::Cvrp, n, seed);
        let Instance::Cvrp(p) = &inst else { unreachable!() };
        let Solution::Cvrp { routes } = samples(&inst, 1, seed).swap_remove(0) else { unreachable!() };
        let before: f64 = routes.iter().map(|r| route_length(p, r)).sum();
        let out = cvrp_local_search(p, routes, 10_000);
        let after: f64 = out.iter().map(|r| route_length(p, r)).sum();
        prop_assert!(after <= before + 1e-9);
        let sol = Solution::Cvrp { routes: out };
        prop_assert!(validate(&inst, &sol).is_ok());
    }

    #[test]
    fn destroy_and_repair_keeps_the_best(kind in kind(), n in 4usize..12, seed in any::<u64>()) {
        let inst = instance(kind, n, seed);
        let sols = samples(&inst, 3, seed ^ 7);
        let eta = heuristic_prior(&inst);
        let rho = init_pheromone(inst.n_nodes());
        let cfg = LsConfig { rounds: 3, top_k: 2, batch_width: 4, ..LsConfig::default() };
        let out = destroy_and_repair(&inst, &sols, &eta, &rho, &cfg, &mut rng_from_seed(seed));
        let best = |s: &[Solution]| s.iter().map(|x| energy(&inst, x).unwrap()).fold(f64::INFINITY, f64::min);
        prop_assert!(!out.is_empty() && out.len() <= 2);
        prop_assert!(best(&out) <= best(&sols) + 1e-12);
        prop_assert!(out.iter().all(|s| validate(&inst, s).is_ok()));
    }
}
