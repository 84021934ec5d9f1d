mod common;

use common::{random_halfspace, random_q_instance, Lcg};

use bregkt_core::instances::{random_affine, scalar_problem, InstanceGeometry};
use bregkt_core::io::{emit, parse_str, Problem, ProblemFile};
use bregkt_core::operators::{closed_form, scalar_resolvent_newton};
use bregkt_core::oracle::{best_approx_bruteforce, kt_inclusion_residual, kt_set_affine};
use bregkt_core::prelude::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = KernelKind> {
    prop_oneof![
        Just(KernelKind::Energy),
        Just(KernelKind::BoltzmannShannon),
        Just(KernelKind::FermiDirac),
        Just(KernelKind::Hellinger),
        (1.2f64..4.0).prop_map(|p| KernelKind::PPower { p }),
    ]
}

/// Maps `u ∈ (0, 1)` to an interior point at least `margin` from the boundary.
fn interior(k: KernelKind, u: f64, margin: f64) -> f64 {
    match k {
        KernelKind::Energy | KernelKind::PPower { .. } => 10.0 * (2.0 * u - 1.0),
        KernelKind::BoltzmannShannon => margin + 20.0 * u,
        KernelKind::FermiDirac => margin + (1.0 - 2.0 * margin) * u,
        KernelKind::Hellinger => (1.0 - margin) * (2.0 * u - 1.0),
    }
}

fn kernel_value(k: KernelKind, x: f64) -> f64 {
    LegendreKernel::new(k, 1)
        .value(&DVector::from_element(1, x))
        .unwrap()
        .to_f64()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bregman_distance_nonnegative(k in kind(), u in 0.0f64..1.0, v in 0.01f64..0.99) {
        let kern = LegendreKernel::new(k, 1);
        let x = DVector::from_element(1, interior(k, u, 0.0).clamp(-1e6, 1e6));
        let y = DVector::from_element(1, interior(k, v, 1e-3));
        let d = kern.bregman_distance(&x, &y).unwrap();
        if let Some(d) = d.finite() {
            prop_assert!(d >= -1e-10);
        }
        prop_assert!(kern.bregman_distance(&y, &y).unwrap().to_f64().abs() <= 1e-10);
    }

    #[test]
    fn gradient_round_trip(k in kind(), u in 0.001f64..0.999) {
        let x = interior(k, u, 1e-6);
        let g = k.grad(x);
        prop_assert!((k.conj_grad(g) - x).abs() <= 1e-10 * (1.0 + x.abs()));
    }

    #[test]
    fn gradient_matches_finite_differences(k in kind(), u in 0.0f64..1.0) {
        let x = interior(k, u, 1e-3);
        let h = 1e-6 * x.abs().max(1e-3);
        let fd = (kernel_value(k, x + h) - kernel_value(k, x - h)) / (2.0 * h);
        let g = k.grad(x);
        prop_assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0), "fd {fd} vs {g}");
    }

    #[test]
    fn kernels_convex_along_segments(k in kind(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let (x, y) = (interior(k, u, 1e-4), interior(k, v, 1e-4));
        for t in [0.25, 0.5, 0.75] {
            let lhs = kernel_value(k, t * x + (1.0 - t) * y);
            let rhs = t * kernel_value(k, x) + (1.0 - t) * kernel_value(k, y);
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn lambert_w_monotone_and_accurate(a in -8.0f64..8.0, b in -8.0f64..8.0) {
        let (t1, t2) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
        let (w1, w2) = (lambert_w(t1).unwrap(), lambert_w(t2).unwrap());
        if t1 < t2 {
            prop_assert!(w1 < w2);
        }
        prop_assert!((w1 * w1.exp() - t1).abs() <= 1e-13 * t1.max(1.0));
    }

    #[test]
    fn separable_resolvent_inclusion(
        which in 0usize..6,
        gamma in 0.5f64..2.0,
        param in 0.0f64..1.0,
        r in -5.0f64..5.0,
    ) {
        let (h, phi) = bs_or_energy_case(which, param);
        let a = scalar_resolvent_newton(h, phi, gamma, r).unwrap();
        prop_assert!(in_graph(h, phi, gamma, r, a), "newton {a}");
        if let Some(c) = closed_form(h, phi, gamma, r).unwrap() {
            prop_assert!(in_graph(h, phi, gamma, r, c), "closed form {c}");
        }
    }

    #[test]
    fn separable_resolvent_increasing(
        which in 0usize..6,
        gamma in 0.5f64..2.0,
        param in 0.0f64..1.0,
        r in -5.0f64..5.0,
        dr in 1e-3f64..1.0,
    ) {
        let (h, phi) = bs_or_energy_case(which, param);
        let op = MonotoneOperator::separable(vec![phi]).unwrap();
        let kern = LegendreKernel::new(h, 1);
        let lo = op.resolvent(&kern, gamma, &DVector::from_element(1, r)).unwrap()[0];
        let hi = op.resolvent(&kern, gamma, &DVector::from_element(1, r + dr)).unwrap()[0];
        if matches!(phi, ScalarPotential::Power { p } if p == 1.0) && h == KernelKind::Energy {
            prop_assert!(lo <= hi);
        } else {
            prop_assert!(lo < hi, "{lo} !< {hi}");
        }
    }

    #[test]
    fn linear_map_adjoint(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let l = LinearMap::new(DMatrix::from_fn(rows, cols, |_, _| next()));
        let x = DVector::from_fn(cols, |_, _| next());
        let y = DVector::from_fn(rows, |_, _| next());
        let lhs = l.apply(&x).unwrap().dot(&y);
        let rhs = x.dot(&l.adjoint_apply(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn halfspace_projection_kkt(
        geometry in prop_oneof![Just(KernelKind::Energy), Just(KernelKind::BoltzmannShannon), Just(KernelKind::Hellinger)],
        dim in 1usize..6,
        seed in any::<u64>(),
    ) {
        let (kern, x, h) = random_halfspace(geometry, dim, seed);
        let res = project_halfspace(&kern, &h, &x).unwrap();
        let lam = res.multipliers[0];
        prop_assert!(lam >= 0.0);
        let gx = kern.gradient(&x).unwrap();
        let stat = kern.gradient(&res.point).unwrap() - &gx + &h.normal * lam;
        prop_assert!(stat.amax() <= 1e-9 * (1.0 + gx.amax()), "stationarity {}", stat.amax());
        let viol = h.violation(&res.point);
        prop_assert!(viol <= 1e-9 * (1.0 + h.offset.abs()));
        prop_assert!((lam * viol).abs() <= 1e-9);
        prop_assert!(kern.is_interior(&res.point));
    }

    #[test]
    fn q_projection_kkt(
        geometry in prop_oneof![Just(KernelKind::Energy), Just(KernelKind::BoltzmannShannon)],
        dim in 2usize..6,
        seed in any::<u64>(),
    ) {
        let Some((kern, x0, x, y)) = random_q_instance(geometry, dim, seed) else {
            return Ok(());
        };
        let res = q_projection(&kern, &x0, &x, &y).unwrap();
        let h1 = haugazeau_halfspace(&kern, &x0, &x).unwrap();
        let h2 = haugazeau_halfspace(&kern, &x, &y).unwrap();
        let g0 = kern.gradient(&x0).unwrap();
        let (l1, l2) = (res.multipliers[0], res.multipliers[1]);
        prop_assert!(l1 >= 0.0 && l2 >= 0.0);
        let stat = kern.gradient(&res.point).unwrap() - &g0 + &h1.normal * l1 + &h2.normal * l2;
        prop_assert!(stat.amax() <= 1e-9 * (1.0 + g0.amax()), "stationarity {}", stat.amax());
        for (h, l) in [(&h1, l1), (&h2, l2)] {
            let v = h.violation(&res.point);
            prop_assert!(v <= 1e-9 * (1.0 + h.offset.abs()) * h.normal.amax().max(1.0), "violation {v}");
            prop_assert!((l * v).abs() <= 1e-9, "slackness {}", l * v);
        }
    }

    #[test]
    fn problem_file_round_trip(seed in 0u64..500, positive in any::<bool>(), gamma in 0.5f64..2.0) {
        let geometry = if positive { InstanceGeometry::PositiveOrthant } else { InstanceGeometry::Euclidean };
        let file = ProblemFile {
            problem: Problem::Composite(random_affine(seed, geometry).problem),
            schedule: StepSchedule::Constant { gamma, mu: 1.0 },
            options: SolveOptions::default(),
        };
        let again = parse_str(&emit(&file)).unwrap();
        prop_assert_eq!(&again, &file);
        prop_assert_eq!(emit(&again), emit(&file));
    }
}

/// `r − h'(a) ∈ γ ∂φ(a)`; `|x|` (p = 1) has `∂φ(0) = [−1, 1]`.
fn in_graph(h: KernelKind, phi: ScalarPotential, gamma: f64, r: f64, a: f64) -> bool {
    let tol = 1e-9 * (1.0 + r.abs());
    let w = r - h.grad(a);
    if matches!(phi, ScalarPotential::Power { p } if p == 1.0) && a.abs() <= tol {
        return w.abs() <= gamma + tol;
    }
    (w - gamma * phi.derivative(a)).abs() <= tol
}

/// BS / Energy closed-form cases and the potentials they pair with.
fn bs_or_energy_case(which: usize, u: f64) -> (KernelKind, ScalarPotential) {
    match which {
        0 => (
            KernelKind::BoltzmannShannon,
            ScalarPotential::Entropy { omega: 4.0 * u - 2.0 },
        ),
        1 => (
            KernelKind::BoltzmannShannon,
            ScalarPotential::Power { p: 1.0 + 3.0 * u },
        ),
        2 => (
            KernelKind::BoltzmannShannon,
            ScalarPotential::InversePower { p: 0.2 + 2.8 * u },
        ),
        3 => (
            KernelKind::BoltzmannShannon,
            ScalarPotential::NegPower { p: 0.1 + 0.8 * u },
        ),
        4 => (KernelKind::Energy, ScalarPotential::Quadratic { center: 4.0 * u - 2.0 }),
        _ => (
            KernelKind::Energy,
            ScalarPotential::Power {
                p: if u < 0.5 { 1.0 } else { 2.0 },
            },
        ),
    }
}

#[test]
fn resolvent_closed_forms_match_bisection() {
    let mut rng = Lcg(11);
    for _ in 0..300 {
        let (h, phi) = bs_or_energy_case((rng.next() * 6.0) as usize, rng.next());
        let gamma = 0.5 + 1.5 * rng.next();
        let r = 10.0 * rng.next() - 5.0;
        let c = closed_form(h, phi, gamma, r).unwrap().unwrap();
        let b = common::resolvent_bisect(h, phi, gamma, r);
        assert!(
            (c - b).abs() <= 1e-9 * b.abs().max(1.0),
            "{h:?} {phi:?} γ={gamma} r={r}: {c} vs {b}"
        );
    }
}

#[test]
fn solver_loop_invariants() {
    let opts = SolveOptions {
        max_iters: 400,
        full_vectors: true,
        ..Default::default()
    };
    for seed in 0..6 {
        for geometry in [InstanceGeometry::Euclidean, InstanceGeometry::PositiveOrthant] {
            let inst = random_affine(seed, geometry);
            let p = &inst.problem;
            let kern = p.product_kernel().joint();
            let z = inst.kt_point.packed();
            let z0 = p.start().packed();
            let d = |a: &DVector<f64>, b: &DVector<f64>| kern.bregman_distance(a, b).unwrap().to_f64();
            let mut current = z0.clone();
            let report = solve(p, &StepSchedule::default(), &opts);
            for (n, row) in report.trace.iter().enumerate() {
                let state = step(
                    p,
                    &StepSchedule::default(),
                    n,
                    &PrimalDualPoint::unpack(&current, p.primal_dim()),
                )
                .unwrap();
                let half = state.half.packed();
                assert!(kern.is_interior(&half) && kern.is_interior(&state.next.packed()));
                assert!(
                    d(&z, &current) + d(&current, &z0) <= d(&z, &z0) + 1e-8,
                    "containment seed {seed} n {n}"
                );
                assert!(d(&z, &half) <= d(&z, &current) + 1e-8, "half-iterate seed {seed} n {n}");
                assert!(row.d_half <= row.d_full + 1e-10);
                current = row.vectors.as_ref().unwrap().packed();
                assert_eq!(current, state.next.packed());
            }
        }
    }
}

#[test]
fn oracle_outputs_are_kuhn_tucker() {
    for seed in 0..20 {
        for geometry in [InstanceGeometry::Euclidean, InstanceGeometry::PositiveOrthant] {
            let p = random_affine(seed, geometry).problem;
            let z = kt_set_affine(&p).unwrap();
            let best = best_approx_bruteforce(p.product_kernel().joint(), &z, &p.start().packed()).unwrap();
            let pt = PrimalDualPoint::unpack(&best, p.primal_dim());
            assert!(kt_inclusion_residual(&p, &pt).unwrap() <= 1e-9, "seed {seed}");
            let (resid, along) = common::affine_projection_certificate(&p, &best);
            assert!(resid <= 1e-9 && along <= 1e-7, "seed {seed}: {resid:e} {along:e}");
        }
    }
}

#[test]
fn step_is_idempotent_at_kuhn_tucker_points() {
    let p = scalar_problem();
    let kt = PrimalDualPoint::new(DVector::from_element(1, 0.5), DVector::from_element(1, 0.5));
    let st = step(&p, &StepSchedule::default(), 0, &kt).unwrap();
    assert!((st.next.packed() - kt.packed()).amax() <= 1e-12);
    for seed in 0..10 {
        let inst = random_affine(seed, InstanceGeometry::Euclidean);
        let st = step(&inst.problem, &StepSchedule::default(), 0, &inst.kt_point).unwrap();
        assert!(
            (st.next.packed() - inst.kt_point.packed()).amax() <= 1e-12,
            "seed {seed}"
        );
    }
}
