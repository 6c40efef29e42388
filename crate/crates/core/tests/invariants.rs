use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use optstop::config::ProblemConfig;
use optstop::diffusion::{
    catalog, green, hitting_transform, BrownianMotion, Diffusion, Gbm, NamedReward, RewardBundle, Side,
};
use optstop::jump::{ou_green_hat, LevyOUSpec};
use optstop::markov::{find_root, integrate, linspace, RegionSet, SignedMeasure, StateInterval, Tolerances};
use optstop::onesided::{default_bracket, smooth_fit, solve_one_sided};
use optstop::region::{solve_general, solve_two_sided};
use optstop::solution::Solution;

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn process(idx: usize, alpha: f64) -> Arc<dyn Diffusion> {
    let (name, p): (&str, Vec<(&str, f64)>) = match idx {
        0 => ("bm", vec![]),
        1 => ("bm_drift", vec![("mu", 0.6)]),
        2 => ("gbm", vec![("mu", 0.02), ("sigma", 0.4)]),
        3 => ("reflected_bm", vec![("delta", 0.7)]),
        4 => ("skew_bm", vec![("beta", 0.3)]),
        5 => ("sticky_bm", vec![]),
        _ => ("bessel3", vec![]),
    };
    catalog(name, &params(&p), alpha).unwrap()
}

/// A point in the interior of the state space, from a unit draw.
fn interior(p: &dyn Diffusion, u: f64) -> f64 {
    let s = p.state();
    if s.left().is_finite() {
        s.left() + 0.05 + 3.0 * u
    } else {
        -2.0 + 4.0 * u
    }
}

/// `E_x[e^{-ατ}; exit at a]` and `... at b` for `x ∈ (a, b)`.
fn exit_weights(p: &dyn Diffusion, a: f64, b: f64, x: f64) -> (f64, f64) {
    let det = p.psi(b) * p.phi(a) - p.psi(a) * p.phi(b);
    let wa = (p.psi(b) * p.phi(x) - p.psi(x) * p.phi(b)) / det;
    let wb = (p.psi(x) * p.phi(a) - p.psi(a) * p.phi(x)) / det;
    (wa, wb)
}

/// `V(x) = E_x[e^{-ατ} g(X_τ)]` for the exit time of each continuation interval.
fn harmonic_defect(sol: &Solution, samples: usize) -> f64 {
    let b = sol.bundle();
    let p = b.process();
    let mut worst = 0.0f64;
    for j in sol.continuation().intervals() {
        let (a, c) = (j.left(), j.right());
        for x in linspace(a, c, samples + 2).into_iter().skip(1).take(samples) {
            if !x.is_finite() {
                continue;
            }
            let expected = match (a.is_finite(), c.is_finite()) {
                (true, true) => {
                    let (wa, wc) = exit_weights(p, a, c, x);
                    wa * b.g(a) + wc * b.g(c)
                }
                (true, false) => hitting_transform(p, x, a).unwrap() * b.g(a),
                (false, true) => hitting_transform(p, x, c).unwrap() * b.g(c),
                (false, false) => continue,
            };
            worst = worst.max((sol.value(x) - expected).abs() / expected.abs().max(1e-3));
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn integral_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, lo in -2.0f64..0.0, len in 0.1f64..4.0) {
        let tol = Tolerances::default();
        let j = StateInterval::closed(lo, lo + len).unwrap();
        let m = SignedMeasure::with_density(j, Arc::new(|y: f64| (-y * y).exp()));
        let f = |y: f64| y.sin();
        let g = |y: f64| y * y * y - y;
        let lhs = integrate(|y| a * f(y) + b * g(y), &m, &j, &tol).unwrap();
        let rhs = a * integrate(f, &m, &j, &tol).unwrap() + b * integrate(g, &m, &j, &tol).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn atom_only_integral_is_exact(at in -5.0f64..5.0, mass in -3.0f64..3.0) {
        let tol = Tolerances::default();
        let m = SignedMeasure::zero(StateInterval::real_line()).add_atom(at, mass).unwrap();
        let got = integrate(|y: f64| y.exp(), &m, &StateInterval::point(at).unwrap(), &tol).unwrap();
        prop_assert_eq!(got, at.exp() * mass);
    }

    #[test]
    fn roots_satisfy_the_equation(c in -4.0f64..4.0, k in 0.5f64..5.0) {
        let tol = Tolerances::default();
        let h = |x: f64| k * (x - c) + 0.3 * (x - c).powi(3);
        let x = find_root(h, -10.0, 10.0, &tol).unwrap();
        // Lipschitz bound of h on the bracket
        let lip = k + 0.9 * 196.0;
        prop_assert!(h(x).abs() <= 10.0 * tol.root_abs * lip);
    }

    #[test]
    fn double_complement(cuts in proptest::collection::vec(-5.0f64..5.0, 2..8), probes in proptest::collection::vec(-6.0f64..6.0, 20)) {
        let mut cuts = cuts;
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let intervals: Vec<StateInterval> = cuts
            .chunks_exact(2)
            .map(|w| StateInterval::closed(w[0], w[1]).unwrap())
            .collect();
        prop_assume!(!intervals.is_empty());
        let r = RegionSet::new(intervals).unwrap();
        let line = StateInterval::real_line();
        let back = r.complement(&line).unwrap().complement(&line).unwrap();
        for x in probes.iter().copied().chain(cuts.iter().copied()) {
            prop_assert_eq!(r.contains(x), back.contains(x), "at {}", x);
        }
    }

    #[test]
    fn green_is_psi_phi_over_w_and_matches_hitting(idx in 0usize..7, alpha in 0.2f64..3.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let p = process(idx, alpha);
        let (x, y) = (interior(p.as_ref(), u), interior(p.as_ref(), v));
        prop_assume!(x != 0.0 && y != 0.0);
        let gxy = green(p.as_ref(), x, y).unwrap();
        let gyy = green(p.as_ref(), y, y).unwrap();
        let h = hitting_transform(p.as_ref(), x, y).unwrap();
        prop_assert!((gxy / gyy - h).abs() <= 1e-10 * h.max(1e-300), "{} vs {}", gxy / gyy, h);
        prop_assert!((gxy - green(p.as_ref(), y, x).unwrap()).abs() <= 1e-12 * gxy);
    }

    #[test]
    fn taylor_and_merton_value_properties(alpha in 0.1f64..3.0, mu_frac in 0.0f64..0.6, sigma in 0.2f64..0.8) {
        // past 2μ/σ² ≈ 70 the GBM factors overflow before the tail settles
        prop_assume!(2.0 * mu_frac * alpha / (sigma * sigma) <= 60.0);
        let tol = Tolerances::default();
        let bundles = [
            RewardBundle::from_named(Arc::new(BrownianMotion::new(alpha).unwrap()), NamedReward::XPlus).unwrap(),
            RewardBundle::from_named(Arc::new(Gbm::new(alpha, mu_frac * alpha, sigma).unwrap()), NamedReward::Call { k: 1.0 }).unwrap(),
        ];
        for b in bundles {
            let (th, sol) = solve_one_sided(&b, Side::Right, default_bracket(&b), &tol).unwrap();
            let p = b.process();
            let x = th.x_star;
            // x* maximizes g/ψ
            let grid = linspace(x - 0.9 * (x - p.state().left()).min(3.0), x + 3.0, 400);
            let ratio = |y: f64| b.g(y) / p.psi(y);
            let best = grid.iter().fold(f64::NEG_INFINITY, |m, &y| m.max(ratio(y)));
            prop_assert!(ratio(x) >= best * (1.0 - 1e-9));
            // V = g on the stopping side, V > g strictly inside the continuation region where g > 0
            for &y in &grid {
                if y >= x {
                    prop_assert_eq!(sol.value(y), b.g(y));
                } else if y < x - 1e-3 {
                    prop_assert!(sol.value(y) > b.g(y));
                }
            }
            // excessive against hitting levels
            prop_assert!(sol.excessivity_defect(&grid[..100], &grid[100..300]) <= 1e-8 * b.g(x + 3.0));
            // ψ-smooth fit iff the atom at x* carries no part of V(x*)
            let sf = smooth_fit(&sol, &th);
            let atom_share = (th.atom_mass_k * green(p, x, x).unwrap() / b.g(x)).abs();
            prop_assert_eq!(sf.psi_sf, atom_share < 1e-6, "share {}", atom_share);
        }
    }

    #[test]
    fn ou_transform_tends_to_one_over_alpha(alpha in 0.2f64..3.0, gamma in 0.2f64..2.0, lambda in 0.0f64..2.0, x in -2.0f64..2.0) {
        let s = LevyOUSpec::new(gamma, 1.0, lambda, 1.0, alpha).unwrap();
        prop_assert_eq!(ou_green_hat(&s, x, 0.0).unwrap().re, 1.0 / alpha);
        let near = ou_green_hat(&s, x, 1e-6).unwrap();
        prop_assert!((near - 1.0 / alpha).norm() < 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn two_sided_value_is_harmonic_inside(mu in -3.0f64..3.0, alpha in 0.5f64..2.0) {
        let tol = Tolerances::default();
        let p = catalog("bm_drift", &params(&[("mu", mu)]), alpha).unwrap();
        let b = RewardBundle::from_named(p, NamedReward::Abs).unwrap();
        let window = optstop::onesided::Bracket::new(-20.0, 20.0).unwrap();
        let ts = solve_two_sided(&b, (-1.0, 1.0), window, &tol).unwrap();
        prop_assert!(ts.x_l < ts.x_r);
        prop_assert!(harmonic_defect(&ts.solution, 9) <= 1e-8);
        prop_assert!(ts.solution.continuity_defect() <= 1e-8);
    }

    #[test]
    fn general_solution_is_harmonic_and_idempotent(alpha in 1.4f64..2.6) {
        let tol = Tolerances::default();
        let p = Arc::new(BrownianMotion::new(alpha).unwrap());
        let b = RewardBundle::from_named(p, NamedReward::Poly { coeffs: vec![-1.0, 0.0, 5.0, 0.0, -4.0, 0.0] }).unwrap();
        let window = optstop::onesided::Bracket::new(-20.0, 20.0).unwrap();
        let gs = solve_general(&b, window, &tol).unwrap();
        prop_assert!(harmonic_defect(&gs.solution, 7) <= 1e-8);
        // growth: each expansion covers its seed
        for pair in &gs.expanded {
            prop_assert!(pair.outer.contains_interval(&pair.inner));
        }
        // rebuilding from the continuation region reproduces the solution
        let again = Solution::from_continuation(b.clone(), gs.solution.continuation().clone()).unwrap();
        for x in linspace(-4.0, 3.0, 57) {
            prop_assert_eq!(again.value(x), gs.solution.value(x));
        }
        let rerun = solve_general(&b, window, &tol).unwrap();
        prop_assert_eq!(rerun.solution.continuation(), gs.solution.continuation());
    }

    #[test]
    fn config_round_trip(alpha in 0.05f64..5.0, k in -3.0f64..3.0, side in any::<bool>(), seed in any::<u64>()) {
        let side = if side { "right" } else { "left" };
        let reward = if side == "right" { format!(r#"{{ "form": "call", "k": {k} }}"#) } else { format!(r#"{{ "form": "put", "k": {k} }}"#) };
        let text = format!(
            r#"{{ "process": {{ "name": "bm_drift", "params": {{ "mu": 0.1 }} }}, "reward": {reward},
                 "alpha": {alpha}, "solver": {{ "method": "one_sided", "side": "{side}" }},
                 "mc": {{ "seed": {seed}, "paths": 100 }} }}"#
        );
        let cfg = ProblemConfig::from_json(&text).unwrap();
        let back = ProblemConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
