//! Acceptance suite: every shipped claim of the library, one pass/fail line
//! per criterion. Run with `cargo test -p fracdiff --test acceptance --release -- --nocapture`
//! to see the lines on success.

use std::time::Instant;

use fracdiff::diffusive::{phi_reference, step_backward_euler, step_trapezoidal, DiffusiveNode, DiffusiveState};
use fracdiff::expsum::{build_expsum, eval_expsum, kernel_exact, select_truncation, truncation_bounds, ExpSumApproximation};
use fracdiff::fast::{advance, evaluate_fast, k_weight, local_weight, HistoryAccumulator};
use fracdiff::laguerre::{build_rule, gl_evaluate, gl_step, run_gl, GLIntegratorState, SteppingMethod};
use fracdiff::oracle::{analytic_monomial, direct_integral};
use fracdiff::problem::{FractionalOrder, FractionalProblem, SourceFunction, TimeGrid};
use fracdiff::special::c_alpha;
use fracdiff::split::{local_part, mu_reference, split_evaluate, HistoryWindow};

fn order(alpha: f64) -> FractionalOrder {
    FractionalOrder::new(alpha).unwrap()
}

fn constant_problem(alpha: f64, b: f64) -> FractionalProblem {
    FractionalProblem::new(order(alpha), 0.0, b, SourceFunction::Constant(1.0)).unwrap()
}

fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

// deterministic pseudo-random stream for the nonuniform grids
struct Lcg(u64);

impl Lcg {
    fn next_unit(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Per-workload minimum over interleaved rounds: a slow system phase then
/// hits every workload equally instead of biasing one of them.
fn min_wall_seconds_interleaved<F: FnMut(usize)>(
    rounds: usize,
    count: usize,
    mut run: F,
) -> Vec<f64> {
    for i in 0..count {
        run(i); // warmup
    }
    let mut best = vec![f64::INFINITY; count];
    for _ in 0..rounds {
        for (i, b) in best.iter_mut().enumerate() {
            let clock = Instant::now();
            run(i);
            *b = b.min(clock.elapsed().as_secs_f64());
        }
    }
    best
}

fn criterion_1_analytic_reproduction() -> Result<(), String> {
    let grid = TimeGrid::uniform(0.0, 1.0, 1024).unwrap();
    for alpha in [0.25, 0.5, 0.75] {
        for p_exp in [0.0, 1.0] {
            let f = if p_exp == 0.0 {
                SourceFunction::Constant(1.0)
            } else {
                SourceFunction::monomial(p_exp).unwrap()
            };
            let problem = FractionalProblem::new(order(alpha), 0.0, 1.0, f).unwrap();
            let trace = run_gl(&problem, &grid, 40, SteppingMethod::Trapezoidal)
                .map_err(|e| e.to_string())?;
            let exact = analytic_monomial(order(alpha), p_exp, 1.0).unwrap();
            let rel = rel_err(trace.final_value(), exact);
            if rel > 1e-3 {
                return Err(format!(
                    "alpha={alpha}, f=t^{p_exp}: final-time rel err {rel:.3e} > 1e-3"
                ));
            }
            // monotone decrease in the rule order at fixed large P
            let fine = TimeGrid::uniform(0.0, 1.0, 4096).unwrap();
            let errs: Vec<f64> = [10usize, 20, 40]
                .iter()
                .map(|&l| {
                    let t = run_gl(&problem, &fine, l, SteppingMethod::Trapezoidal).unwrap();
                    rel_err(t.final_value(), exact)
                })
                .collect();
            if !(errs[0] > errs[1] && errs[1] > errs[2]) {
                return Err(format!(
                    "alpha={alpha}, f=t^{p_exp}: errors not monotone over lambda 10->40: {errs:?}"
                ));
            }
        }
    }
    Ok(())
}

fn criterion_2_expsum_kernel_accuracy() -> Result<(), String> {
    let max_rel = |approx: &ExpSumApproximation, alpha: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let t = 1e-2 * 100.0f64.powf(i as f64 / 199.0);
            let exact = kernel_exact(order(alpha), t).unwrap();
            worst = worst.max(rel_err(eval_expsum(approx, t).unwrap(), exact));
        }
        worst
    };
    for alpha in [0.25, 0.5, 0.75] {
        let o = order(alpha);
        let (m, n) = select_truncation(o, 0.25, 1e-2, 1.0, 1e-8).map_err(|e| e.to_string())?;
        let approx = build_expsum(o, 0.25, m, n).unwrap();
        let worst = max_rel(&approx, alpha);
        if worst > 1e-6 {
            return Err(format!(
                "alpha={alpha}: max rel err {worst:.3e} > 1e-6 (M={m}, N={n})"
            ));
        }
    }
    // halving the discretization step with the r-range held fixed and
    // truncation suppressed below the coarse discretization error
    let o = order(0.5);
    let (m, n) = select_truncation(o, 0.5, 1e-2, 1.0, 1e-12).map_err(|e| e.to_string())?;
    let coarse = build_expsum(o, 0.5, m, n).unwrap();
    let fine = build_expsum(o, 0.25, 2 * m, 2 * n).unwrap();
    let coarse_err = max_rel(&coarse, 0.5);
    let fine_err = max_rel(&fine, 0.5);
    if coarse_err < 10.0 * fine_err {
        return Err(format!(
            "halving rho_step improved only {:.1}x (coarse {coarse_err:.3e}, fine {fine_err:.3e})",
            coarse_err / fine_err
        ));
    }
    Ok(())
}

fn criterion_3_truncation_bound_validity() -> Result<(), String> {
    let mut checked = 0usize;
    for alpha in [0.25, 0.5, 0.75] {
        for rho in [0.25, 0.5, 1.0] {
            for (m, n) in [(5usize, 5usize), (20, 10), (50, 25)] {
                let approx = build_expsum(order(alpha), rho, m, n).unwrap();
                for t in [0.05, 0.3, 1.0, 2.0] {
                    let bounds = truncation_bounds(&approx, t).unwrap();
                    if !bounds.condition_satisfied {
                        continue;
                    }
                    checked += 1;
                    let s = 1.0 - alpha;
                    let term = |k: i64| {
                        let e = k as f64 * rho;
                        rho * (s * e).exp() * (-(e.exp()) * t).exp()
                    };
                    let brute_upper: f64 =
                        ((n as i64 + 1)..=(n as i64 + 500)).map(term).sum();
                    let brute_lower: f64 =
                        ((-(m as i64) - 500)..=(-(m as i64) - 1)).map(term).sum();
                    if brute_upper > bounds.upper_tail * (1.0 + 1e-9) + 1e-300 {
                        return Err(format!(
                            "upper tail violation at alpha={alpha}, rho={rho}, N={n}, t={t}: \
                             {brute_upper:.6e} > {:.6e}",
                            bounds.upper_tail
                        ));
                    }
                    if brute_lower > bounds.lower_tail * (1.0 + 1e-9) + 1e-300 {
                        return Err(format!(
                            "lower tail violation at alpha={alpha}, rho={rho}, M={m}, t={t}: \
                             {brute_lower:.6e} > {:.6e}",
                            bounds.lower_tail
                        ));
                    }
                }
            }
        }
    }
    if checked < 20 {
        return Err(format!("only {checked} configurations satisfied the condition"));
    }
    Ok(())
}

fn criterion_4_recursion_identity() -> Result<(), String> {
    for (seed, alpha) in [(11u64, 0.3), (42, 0.5), (97, 0.7)] {
        let mut rng = Lcg(seed);
        let mut points = vec![0.0f64];
        for _ in 0..128 {
            let u = rng.next_unit();
            points.push(points.last().unwrap() + 0.004 + 0.012 * u);
        }
        let grid = TimeGrid::new(points).unwrap();
        let o = order(alpha);
        // 43 terms
        let expsum = build_expsum(o, 0.4, 30, 12).unwrap();
        let problem =
            FractionalProblem::new(o, 0.0, grid.last(), SourceFunction::Sine).unwrap();
        let fast = evaluate_fast(&problem, &grid, &expsum, grid.min_step())
            .map_err(|e| e.to_string())?;

        // independent O(P^2) double sum with the same exponential sum and the
        // same right-endpoint piecewise-constant interpolant
        let c = c_alpha(o);
        let pts = grid.points();
        let samples: Vec<f64> = pts
            .iter()
            .map(|&t| problem.source().eval(t).unwrap())
            .collect();
        for n in 1..pts.len() {
            let mut direct = local_weight(o, grid.step(n)).unwrap() * samples[n];
            for j in 1..n {
                for term in expsum.terms() {
                    direct += k_weight(c, term.weight, -term.rate, pts[n], pts[j - 1], pts[j])
                        .unwrap()
                        * samples[j];
                }
            }
            let got = fast.values()[n];
            if (got - direct).abs() > 1e-12 * (1.0 + direct.abs()) {
                return Err(format!(
                    "seed {seed}: node {n}: fast {got:.17e} vs direct {direct:.17e}"
                ));
            }
        }
    }
    Ok(())
}

fn criterion_5_complexity() -> Result<(), String> {
    fracdiff::with_threads(1, || -> Result<(), String> {
        let o = order(0.5);
        let problem = constant_problem(0.5, 1.0);
        // fast methods: wall time at most 2.5x per grid doubling
        let (m, n) = select_truncation(o, 0.25, 1.0 / 40_000.0, 1.0, 1e-8).unwrap();
        let expsum = build_expsum(o, 0.25, m, n).unwrap();
        let grids: Vec<TimeGrid> = [10_000usize, 20_000, 40_000]
            .iter()
            .map(|&steps| TimeGrid::uniform(0.0, 1.0, steps).unwrap())
            .collect();
        let fast_times = min_wall_seconds_interleaved(5, grids.len(), |i| {
            evaluate_fast(&problem, &grids[i], &expsum, grids[i].min_step()).unwrap();
        });
        let mut fast_states = Vec::new();
        for grid in &grids {
            let trace = evaluate_fast(&problem, grid, &expsum, grid.min_step()).unwrap();
            fast_states.push((grid.interval_count(), trace.state_count(), trace.term_count()));
        }
        let gl_times = min_wall_seconds_interleaved(5, grids.len(), |i| {
            run_gl(&problem, &grids[i], 40, SteppingMethod::Trapezoidal).unwrap();
        });
        for times in [&fast_times, &gl_times] {
            let r1 = times[1] / times[0];
            let r2 = times[2] / times[1];
            if r1 > 2.5 || r2 > 2.5 {
                return Err(format!(
                    "fast-method doubling ratios {r1:.2}, {r2:.2} exceed 2.5 (times {times:?})"
                ));
            }
        }
        // accumulator footprint: exactly the term count, independent of P
        let lambda = expsum.len();
        for (steps, state, terms) in &fast_states {
            if *state != lambda || *terms != lambda {
                return Err(format!(
                    "P={steps}: state count {state} / term count {terms} != lambda {lambda}"
                ));
            }
        }
        // oracle: quadratic growth, at least 3.2x per doubling
        let oracle_grids: Vec<TimeGrid> = [1024usize, 2048, 4096]
            .iter()
            .map(|&steps| TimeGrid::uniform(0.0, 1.0, steps).unwrap())
            .collect();
        let oracle_times = min_wall_seconds_interleaved(5, oracle_grids.len(), |i| {
            direct_integral(&problem, &oracle_grids[i]).unwrap();
        });
        let r1 = oracle_times[1] / oracle_times[0];
        let r2 = oracle_times[2] / oracle_times[1];
        if r1 < 3.2 || r2 < 3.2 {
            return Err(format!(
                "oracle doubling ratios {r1:.2}, {r2:.2} below quadratic floor 3.2 \
                 (times {oracle_times:?})"
            ));
        }
        Ok(())
    })
}

fn criterion_6_stepper_orders() -> Result<(), String> {
    let problem = constant_problem(0.5, 1.0);
    for r in [-2.0, 0.0, 2.0] {
        let reference = phi_reference(&problem, 1.0, r).unwrap();
        let run = |steps: usize, trapezoidal: bool| -> f64 {
            let mut state =
                DiffusiveState::new(vec![DiffusiveNode::new(r, order(0.5))], 0.0);
            for k in 1..=steps {
                let t = k as f64 / steps as f64;
                state = if trapezoidal {
                    step_trapezoidal(state, &problem, t).unwrap()
                } else {
                    step_backward_euler(state, &problem, t).unwrap()
                };
            }
            (state.values()[0] - reference).abs()
        };
        let euler_ratio = run(32, false) / run(64, false);
        if !(1.7..=2.3).contains(&euler_ratio) {
            return Err(format!("r={r}: euler halving ratio {euler_ratio:.3} outside [1.7, 2.3]"));
        }
        let trap_ratio = run(32, true) / run(64, true);
        if !(3.4..=4.6).contains(&trap_ratio) {
            return Err(format!("r={r}: trapezoidal halving ratio {trap_ratio:.3} outside [3.4, 4.6]"));
        }
    }
    Ok(())
}

fn criterion_7_decay_bounds() -> Result<(), String> {
    let slack = 1.0 + 1e-12;
    for alpha in [0.25, 0.5, 0.75] {
        let problem = constant_problem(alpha, 1.0);
        let c = c_alpha(order(alpha));
        let window = HistoryWindow::for_problem(0.5, &problem).unwrap();
        for i in 0..=160 {
            let r = -40.0 + 0.5 * i as f64;
            let phi = phi_reference(&problem, 1.0, r).unwrap().abs();
            if r >= 0.0 && phi > c * (-alpha * r).exp() * slack {
                return Err(format!("phi envelope violated at alpha={alpha}, r={r}"));
            }
            if r <= 0.0 && phi > c * ((1.0 - alpha) * r).exp() * slack {
                return Err(format!("phi envelope violated at alpha={alpha}, r={r}"));
            }
            let mu = mu_reference(&problem, 1.0, window, r).unwrap().abs();
            if r >= 0.0 {
                let envelope = c * (-alpha * r).exp() * (-0.5 * r.exp()).exp();
                if mu > envelope * slack + 1e-300 {
                    return Err(format!("mu envelope violated at alpha={alpha}, r={r}"));
                }
            }
            if r <= 0.0 {
                let envelope = c * 0.5 * ((1.0 - alpha) * r).exp();
                if mu > envelope * slack {
                    return Err(format!("mu envelope violated at alpha={alpha}, r={r}"));
                }
            }
        }
    }
    Ok(())
}

fn criterion_8_split_identity() -> Result<(), String> {
    let full_grid = TimeGrid::uniform(0.0, 1.0, 1024).unwrap();
    let split_grid = TimeGrid::uniform(0.5, 1.0, 512).unwrap();
    for alpha in [0.25, 0.5, 0.75] {
        for p_exp in [0.0, 1.0] {
            let f = if p_exp == 0.0 {
                SourceFunction::Constant(1.0)
            } else {
                SourceFunction::monomial(p_exp).unwrap()
            };
            let problem = FractionalProblem::new(order(alpha), 0.0, 1.0, f).unwrap();
            let window = HistoryWindow::for_problem(0.5, &problem).unwrap();
            let full = run_gl(&problem, &full_grid, 40, SteppingMethod::Trapezoidal)
                .map_err(|e| e.to_string())?;
            let split = split_evaluate(&problem, &split_grid, window, 40, SteppingMethod::Trapezoidal)
                .map_err(|e| e.to_string())?;
            let rel = rel_err(split.final_value(), full.final_value());
            if rel > 2e-3 {
                return Err(format!(
                    "alpha={alpha}, f=t^{p_exp}: |split - full| rel {rel:.3e} > 2e-3"
                ));
            }
            let exact = analytic_monomial(order(alpha), p_exp, 1.0).unwrap();
            let rel = rel_err(split.final_value(), exact);
            if rel > 2e-3 {
                return Err(format!(
                    "alpha={alpha}, f=t^{p_exp}: |L+H - analytic| rel {rel:.3e} > 2e-3"
                ));
            }
            // sanity: the local part is the closed form for constant forcing
            if p_exp == 0.0 {
                let local = local_part(&problem, window, 1.0).unwrap();
                let expect = 0.5f64.powf(alpha) / fracdiff::special::gamma(alpha + 1.0).unwrap();
                if rel_err(local, expect) > 1e-12 {
                    return Err(format!("alpha={alpha}: local part off its closed form"));
                }
            }
        }
    }
    Ok(())
}

fn criterion_9_rule_integrity() -> Result<(), String> {
    for lambda in 1..=20usize {
        let rule = build_rule(lambda).map_err(|e| e.to_string())?;
        let mut factorial = 1.0f64;
        for k in 0..2 * lambda {
            if k > 0 {
                factorial *= k as f64;
            }
            let quad: f64 = rule.integrate(|x| x.powi(k as i32));
            if rel_err(quad, factorial) > 1e-12 {
                return Err(format!(
                    "lambda={lambda}, k={k}: quadrature {quad:.17e} vs {factorial:.17e}"
                ));
            }
        }
    }
    let rule = build_rule(2).unwrap();
    let sqrt2 = std::f64::consts::SQRT_2;
    let expected = [
        (2.0 - sqrt2, (2.0 + sqrt2) / 4.0),
        (2.0 + sqrt2, (2.0 - sqrt2) / 4.0),
    ];
    for (i, (x, w)) in expected.iter().enumerate() {
        if (rule.nodes()[i] - x).abs() > 1e-14 * x || (rule.weights()[i] - w).abs() > 1e-14 {
            return Err(format!(
                "two-point rule: node/weight {i} off closed form: {} {}",
                rule.nodes()[i],
                rule.weights()[i]
            ));
        }
    }
    Ok(())
}

fn criterion_10_overflow_safety() -> Result<(), String> {
    let all_finite = |vs: &[f64]| vs.iter().all(|v| v.is_finite());
    for alpha in [0.01, 0.99] {
        let o = order(alpha);
        let problem = FractionalProblem::new(o, 0.0, 1.0, SourceFunction::Sine).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 64).unwrap();

        for method in [SteppingMethod::BackwardEuler, SteppingMethod::Trapezoidal] {
            // step manually so every intermediate state is inspected
            let rule = build_rule(200).map_err(|e| e.to_string())?;
            let mut state = GLIntegratorState::init(&rule, o, 0.0);
            for &t in &grid.points()[1..] {
                state = gl_step(state, &problem, t, method).map_err(|e| e.to_string())?;
                if !all_finite(state.left().values()) || !all_finite(state.right().values()) {
                    return Err(format!("alpha={alpha}: non-finite node state at t={t}"));
                }
                if !gl_evaluate(&state, &rule, o).is_finite() {
                    return Err(format!("alpha={alpha}: non-finite quadrature at t={t}"));
                }
            }
            let trace = run_gl(&problem, &grid, 200, method).map_err(|e| e.to_string())?;
            if !all_finite(trace.values()) {
                return Err(format!("alpha={alpha}: non-finite gl trace"));
            }
        }

        let window = HistoryWindow::for_problem(0.3, &problem).unwrap();
        let split_grid = TimeGrid::uniform(0.3, 1.0, 32).unwrap();
        let trace = split_evaluate(&problem, &split_grid, window, 200, SteppingMethod::Trapezoidal)
            .map_err(|e| e.to_string())?;
        if !all_finite(trace.values()) {
            return Err(format!("alpha={alpha}: non-finite split trace"));
        }

        // the lower tail of the alpha = 0.99 kernel (t^{-0.01}) decays so
        // slowly that tolerances below ~0.1 need rates outside f64 range;
        // select_truncation reports that as an error, so use a feasible tol
        let tol = if alpha > 0.5 { 1e-1 } else { 1e-6 };
        let (m, n) =
            select_truncation(o, 0.5, 1.0 / 64.0, 1.0, tol).map_err(|e| e.to_string())?;
        let expsum = build_expsum(o, 0.5, m, n).unwrap();
        let f1 = problem.source().eval(grid.points()[1]).unwrap();
        let mut acc =
            HistoryAccumulator::init(&expsum, grid.points()[0], grid.points()[1], f1).unwrap();
        for &t in &grid.points()[2..] {
            acc = advance(acc, t, problem.source().eval(t).unwrap()).unwrap();
            if !all_finite(acc.phi()) {
                return Err(format!("alpha={alpha}: non-finite accumulator at t={t}"));
            }
        }
        let trace =
            evaluate_fast(&problem, &grid, &expsum, grid.min_step()).map_err(|e| e.to_string())?;
        if !all_finite(trace.values()) {
            return Err(format!("alpha={alpha}: non-finite fast trace"));
        }

        let trace = direct_integral(&problem, &grid).map_err(|e| e.to_string())?;
        if !all_finite(trace.values()) {
            return Err(format!("alpha={alpha}: non-finite oracle trace"));
        }
    }
    Ok(())
}

type Criterion = (&'static str, fn() -> Result<(), String>);

#[test]
fn acceptance_criteria() {
    let criteria: Vec<Criterion> = vec![
        ("analytic reproduction, Gauss-Laguerre path", criterion_1_analytic_reproduction),
        ("exponential-sum kernel accuracy", criterion_2_expsum_kernel_accuracy),
        ("truncation bound validity", criterion_3_truncation_bound_validity),
        ("fast recursion / double-sum identity", criterion_4_recursion_identity),
        ("complexity: linear fast methods, quadratic oracle", criterion_5_complexity),
        ("ODE stepper convergence orders", criterion_6_stepper_orders),
        ("diffusive decay envelopes", criterion_7_decay_bounds),
        ("local/history split identity", criterion_8_split_identity),
        ("Gauss-Laguerre rule integrity", criterion_9_rule_integrity),
        ("overflow safety at extreme orders", criterion_10_overflow_safety),
    ];
    let mut failures = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(()) => println!("criterion {:2} ({name}): PASS", i + 1),
            Err(reason) => {
                println!("criterion {:2} ({name}): FAIL - {reason}", i + 1);
                failures.push(format!("criterion {} ({name}): {reason}", i + 1));
            }
        }
    }
    assert!(
        failures.is_empty(),
        "{} acceptance criteria failed:\n{}",
        failures.len(),
        failures.join("\n")
    );
}
