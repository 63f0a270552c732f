use super::*;
use crate::instances::sample_instance;
use crate::model::{is_solution, Dist};
use crate::stats::median;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inst(b: u32, vals: &[i64]) -> Instance {
    Instance::from_ints(b, vals).unwrap()
}

fn caps() -> Caps {
    Caps::default()
}

/// Every sign vector, exhaustively; the oracle for everything below.
fn all_vectors(n: usize) -> impl Iterator<Item = SignVector> {
    (0..1u64 << n).map(move |bits| SignVector::from_fn(n, |i| (bits >> i) & 1 == 1))
}

fn naive_min(g: &Instance) -> Wide {
    all_vectors(g.n())
        .map(|x| inner(g, &x).unwrap().abs())
        .min()
        .unwrap()
}

#[test]
fn brute_force_examples() {
    let r = brute_force(&inst(0, &[1, 2, 3, 4]), &caps()).unwrap();
    assert_eq!(r.disc_q, Wide::ZERO);
    assert_eq!(r.energy, f64::INFINITY);
    assert!(r.x.is_plus(0));
    assert_eq!(brute_force(&inst(0, &[4, 5, 6, 7, 8]), &caps()).unwrap().disc_q, Wide::ZERO);
    for b in [0, 5, 20] {
        let r = brute_force(&inst(b, &[-7]), &caps()).unwrap();
        assert_eq!(r.disc_q, Wide::from(7));
    }
}

#[test]
fn brute_force_respects_cap() {
    let g = sample_instance(12, Dist::Gaussian, 32, 1).unwrap();
    assert!(matches!(
        brute_force(&g, &Caps::uniform(8)),
        Err(NppError::CapExceeded(_))
    ));
}

#[test]
fn enumerate_examples() {
    let lvl = EnergyLevel::new(1);
    let sols = enumerate_solutions(&inst(0, &[1, 1, 2, 4]), lvl, 10, &caps()).unwrap();
    assert_eq!(sols, vec![SignVector::parse("+++-").unwrap()]);
    assert!(enumerate_solutions(&inst(0, &[1, 2, 4]), lvl, 10, &caps())
        .unwrap()
        .is_empty());
    // Threshold at least sum |q|: the whole canonical half.
    let g = inst(8, &[3, -5, 7, 11, 2]);
    let all = enumerate_solutions(&g, EnergyLevel::new(0), 1000, &caps()).unwrap();
    assert_eq!(all.len(), 16);
    assert!(all.iter().all(|x| x.is_plus(0)));
}

#[test]
fn enumerate_reports_cap_distinctly() {
    let g = inst(8, &[3, -5, 7, 11, 2]);
    assert!(matches!(
        enumerate_solutions(&g, EnergyLevel::new(0), 15, &caps()),
        Err(NppError::CapExceeded(_))
    ));
    assert_eq!(
        enumerate_solutions(&g, EnergyLevel::new(0), 16, &caps()).unwrap().len(),
        16
    );
    assert!(enumerate_solutions(&g, EnergyLevel::new(0), 0, &caps()).is_err());
}

#[test]
fn mitm_count_examples() {
    let lvl = EnergyLevel::new(1);
    assert_eq!(count_solutions_mitm(&inst(0, &[1, 1, 2, 4]), lvl, &caps()).unwrap(), 2);
    let g = inst(8, &[3, -5, 7, 11, 2, 1]);
    assert_eq!(count_solutions_mitm(&g, EnergyLevel::new(0), &caps()).unwrap(), 64);
}

#[test]
fn oracle_chain_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for t in 0..200 {
        let n = rng.random_range(1..=12);
        let g = sample_instance(n, Dist::Gaussian, 24, 1000 + t).unwrap();
        let opt = naive_min(&g);
        assert_eq!(brute_force(&g, &caps()).unwrap().disc_q, opt);
        assert_eq!(mitm_optimum(&g, &caps()).unwrap().disc_q, opt);
        let lvl = EnergyLevel::new(rng.random_range(0..14));
        let naive: Vec<SignVector> = all_vectors(n)
            .filter(|x| is_solution(&g, x, lvl).unwrap())
            .collect();
        let listed = enumerate_solutions(&g, lvl, 1 << n, &caps()).unwrap();
        assert_eq!(listed.len() * 2, naive.len());
        for x in &listed {
            assert!(naive.contains(x) && naive.contains(&x.negate()));
        }
        assert_eq!(
            count_solutions_mitm(&g, lvl, &caps()).unwrap(),
            naive.len() as u64
        );
    }
}

#[test]
fn brute_force_first_gray_optimum() {
    // Ties: the first optimum in Gray order wins.
    let g = inst(0, &[1, 1, 1, 1]);
    let r = brute_force(&g, &caps()).unwrap();
    assert_eq!(r.disc_q, Wide::ZERO);
    let first = (0u64..8)
        .map(|t| gray::state_vector(4, t))
        .find(|x| inner(&g, x).unwrap() == Wide::ZERO)
        .unwrap();
    assert_eq!(r.x, first);
}

#[test]
fn kk_reconstruction_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for t in 0..1000 {
        let n = rng.random_range(1..200);
        let dist = if t % 2 == 0 { Dist::Gaussian } else { Dist::UniformPm1 };
        let g = sample_instance(n, dist, 40, t).unwrap();
        let r = karmarkar_karp(&g);
        assert_eq!(inner(&g, &r.x).unwrap().abs(), r.disc_q);
        assert_eq!(r.work, n as u64 - 1);
        let gr = greedy_adjacent(&g);
        assert_eq!(inner(&g, &gr.x).unwrap().abs(), gr.disc_q);
    }
}

#[test]
fn heuristics_examples() {
    assert_eq!(greedy_adjacent(&inst(0, &[8, 7, 6, 5, 4])).disc_q, Wide::from(2));
    assert_eq!(karmarkar_karp(&inst(0, &[4, 5, 6, 7, 8])).disc_q, Wide::from(2));
    assert_eq!(greedy_adjacent(&inst(0, &[9, 9])).disc_q, Wide::ZERO);
    assert_eq!(karmarkar_karp(&inst(0, &[9, 9])).disc_q, Wide::ZERO);
}

#[test]
fn exact_never_worse_than_heuristics() {
    for t in 0..100 {
        let g = sample_instance(14, Dist::Gaussian, 32, 200 + t).unwrap();
        let opt = brute_force(&g, &caps()).unwrap().disc_q;
        assert!(opt <= karmarkar_karp(&g).disc_q);
        assert!(opt <= greedy_adjacent(&g).disc_q);
        assert!(opt <= restricted_hybrid(&g, 6).unwrap().disc_q);
    }
}

fn median_log2_disc(n: usize, trials: u64, seed: u64, solve: impl Fn(&Instance) -> Wide) -> f64 {
    let logs: Vec<f64> = (0..trials)
        .map(|t| {
            let g = sample_instance(n, Dist::Gaussian, 128, seed + t).unwrap();
            let d = solve(&g);
            crate::wide::log2_abs(d.max(Wide::ONE)) - 128.0
        })
        .collect();
    median(&logs)
}

#[test]
fn greedy_median_improves_with_n() {
    let small = median_log2_disc(128, 200, 5000, |g| greedy_adjacent(g).disc_q);
    let large = median_log2_disc(512, 200, 6000, |g| greedy_adjacent(g).disc_q);
    assert!(large <= small, "n=512 {large} vs n=128 {small}");
}

#[test]
fn kk_beats_greedy_in_median() {
    for n in [64, 256] {
        let kk = median_log2_disc(n, 200, 7000, |g| karmarkar_karp(g).disc_q);
        let gr = median_log2_disc(n, 200, 7000, |g| greedy_adjacent(g).disc_q);
        assert!(kk < gr, "n={n}: kk {kk} greedy {gr}");
    }
}

#[test]
fn hybrid_examples() {
    let g = inst(0, &[1, 2, 4, 8, 5, 5]);
    let r = restricted_hybrid(&g, 4).unwrap();
    assert_eq!(r.disc_q, Wide::ONE);
    for t in 0..50 {
        let n = 4 + (t as usize % 17);
        let g = sample_instance(n, Dist::Gaussian, 32, 300 + t).unwrap();
        assert_eq!(
            restricted_hybrid(&g, n).unwrap().disc_q,
            brute_force(&g, &caps()).unwrap().disc_q
        );
    }
}

#[test]
fn hybrid_rejects_bad_sizes() {
    let g = sample_instance(40, Dist::Gaussian, 32, 1).unwrap();
    for j in [0, 3, 31, 41] {
        assert!(restricted_hybrid(&g, j).is_err(), "j = {j}");
    }
    assert!(restricted_hybrid(&inst(0, &[1, 2, 3]), 4).is_err());
}

#[test]
fn hybrid_median_energy_grows_with_j() {
    let mut last = f64::NEG_INFINITY;
    for j in [10, 14, 18] {
        let energies: Vec<f64> = (0..60)
            .map(|t| {
                let g = sample_instance(64, Dist::Gaussian, 128, 400 + t).unwrap();
                restricted_hybrid(&g, j).unwrap().energy
            })
            .collect();
        let m = median(&energies);
        assert!(m >= last, "j={j}: median energy {m} below {last}");
        last = m;
    }
}

#[test]
fn local_improve_examples() {
    let g = inst(0, &[1, 2, 3, 4]);
    let out = local_improve(&g, &[0.9, -0.8, -0.9, 0.9], 0.3).unwrap();
    let r = out.corner().expect("a corner lies within 0.3");
    assert_eq!(r.x.to_string(), "+--+");
    assert_eq!(r.disc_q, Wide::ZERO);

    let y = SignVector::parse("+-++").unwrap();
    for radius in [0.5, 1.0, 1.9, 2.0] {
        let out = local_improve(&g, &y.to_f64(), radius).unwrap();
        assert_eq!(out.corner().unwrap().x, y);
    }

    let interior = local_improve(&g, &[0.0; 4], 1.0).unwrap();
    assert!(interior.corner().is_none());
    assert_eq!(interior.point(), vec![0.0; 4]);
    assert!(local_improve(&g, &[0.0; 3], 1.0).is_err());
    assert!(local_improve(&g, &[0.0; 4], -1.0).is_err());
}

#[test]
fn local_improve_large_radius_is_exact() {
    for t in 0..30 {
        let n = 2 + (t as usize % 15);
        let g = sample_instance(n, Dist::Gaussian, 32, 500 + t).unwrap();
        let y: Vec<f64> = g.to_f64();
        let r = 2.0 * (n as f64).sqrt() + 0.01;
        let out = local_improve(&g, &y, r).unwrap();
        let c = out.corner().unwrap();
        assert_eq!(c.disc_q, brute_force(&g, &caps()).unwrap().disc_q);
        assert_eq!(c.work, 1 << n);
    }
}

#[test]
fn local_improve_matches_exhaustive_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for t in 0..300 {
        let n = rng.random_range(1..=12);
        let g = sample_instance(n, Dist::Gaussian, 16, 600 + t).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let r = rng.random_range(0.0..2.5 * (n as f64).sqrt());
        let z = crate::lowdeg::clip(&y);
        let mut best: Option<(Wide, SignVector)> = None;
        for x in all_vectors(n) {
            let d2: f64 = x.to_f64().iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < r * r {
                let d = inner(&g, &x).unwrap().abs();
                let better = match &best {
                    None => true,
                    Some((bd, bx)) => d < *bd || (d == *bd && x.lex_cmp(bx).is_lt()),
                };
                if better {
                    best = Some((d, x));
                }
            }
        }
        match (local_improve(&g, &y, r).unwrap(), best) {
            (Improved::Corner(c), Some((d, x))) => {
                assert_eq!(c.disc_q, d);
                assert_eq!(c.x, x);
            }
            (Improved::Interior { z: zi, .. }, None) => assert_eq!(zi, z),
            (got, want) => panic!("mismatch: {got:?} vs {want:?}"),
        }
    }
}

#[test]
fn solver_names_round_trip() {
    for name in ["bf", "mitm", "greedy", "kk", "hybrid:12", "improve:1.5"] {
        let s: Solver = name.parse().unwrap();
        assert_eq!(s.to_string(), name);
    }
    for bad in ["", "BF", "hybrid:", "hybrid:3", "hybrid:31", "hybrid:x", "improve:-1", "improve:nan", "anneal"] {
        assert!(bad.parse::<Solver>().is_err(), "{bad}");
    }
    assert!(Solver::Mitm.is_exact() && !Solver::KarmarkarKarp.is_exact());
}

#[test]
fn solver_dispatch_is_consistent() {
    let g = sample_instance(16, Dist::Gaussian, 32, 9).unwrap();
    let bf = Solver::BruteForce.solve(&g, &caps()).unwrap();
    let mitm = Solver::Mitm.solve(&g, &caps()).unwrap();
    assert_eq!(bf.disc_q, mitm.disc_q);
    for s in [Solver::Greedy, Solver::KarmarkarKarp, Solver::Hybrid(8), Solver::Improve(0.5), Solver::Improve(3.0)] {
        let r = s.solve(&g, &caps()).unwrap();
        assert_eq!(inner(&g, &r.x).unwrap().abs(), r.disc_q, "{s}");
        assert!(r.disc_q >= bf.disc_q);
    }
}

#[test]
fn wide_lane_instances_agree() {
    // Values near 2^(B + 8) at B = 150 force the 256-bit lane.
    let g = sample_instance(14, Dist::Gaussian, 150, 77).unwrap();
    assert_eq!(g.lane(), crate::wide::LaneWidth::W256);
    let opt = naive_min(&g);
    assert_eq!(brute_force(&g, &caps()).unwrap().disc_q, opt);
    assert_eq!(mitm_optimum(&g, &caps()).unwrap().disc_q, opt);
    assert_eq!(restricted_hybrid(&g, 14).unwrap().disc_q, opt);
}
