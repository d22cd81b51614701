use proptest::prelude::*;
use subag_core::fixedpoint::{Component, Engine, Interpolator, Member, SystemSolution};
use subag_core::prox::{LossSpec, RegSpec};
use subag_core::randmodel::{NoiseDist, NoiseQuadrature, QuadratureConfig, SignalDist};

fn gaussian_engine(signal: SignalDist, sigma: f64) -> Engine {
    Engine::new(&signal, &NoiseDist::Gaussian { sigma }, &QuadratureConfig::default()).unwrap()
}

/// Ridge risk from the Marchenko-Pastur Stieltjes transform.
///
/// With `W = (p/k) X^T X` of ratio `gamma = p/k`, `X^T X = c delta W` and
/// `R_1 = lambda^2 E[Theta^2] m'(-lambda) + sigma^2 (m(-lambda) - lambda m'(-lambda))`
/// where `m` is the Stieltjes transform of `X^T X`.
struct MpRidge {
    c_delta: f64,
}

impl MpRidge {
    fn m_w(&self, mu: f64) -> f64 {
        let gamma = 1.0 / self.c_delta;
        let b = 1.0 + mu - gamma;
        (-b + (b * b + 4.0 * gamma * mu).sqrt()) / (2.0 * gamma * mu)
    }

    /// `m(-lambda) = (1/p) tr (X^T X + lambda)^-1`.
    fn m(&self, lambda: f64) -> f64 {
        self.m_w(lambda / self.c_delta) / self.c_delta
    }

    /// `(1/p) tr (X^T X + lambda)^-2`, by Richardson-extrapolated differences.
    fn m_prime(&self, lambda: f64) -> f64 {
        let d = |h: f64| (self.m(lambda - h) - self.m(lambda + h)) / (2.0 * h);
        let h = 1e-3 * lambda;
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    fn risk(&self, lambda: f64, sigma2: f64, m2: f64) -> f64 {
        let (m, mp) = (self.m(lambda), self.m_prime(lambda));
        lambda * lambda * m2 * mp + sigma2 * (m - lambda * mp)
    }
}

#[test]
fn ridge_matches_stieltjes_oracle_on_every_route() {
    let e = gaussian_engine(SignalDist::GaussPointMass { eps: 0.5, variance: 2.0 }, 0.8);
    for &lambda in &[0.05, 0.3, 1.0, 4.0] {
        for &cd in &[0.3, 0.9, 1.0, 1.7, 5.0] {
            let oracle = MpRidge { c_delta: cd };
            let want = oracle.risk(lambda, 0.64, 1.0);
            let sys2 = e.solve_sys2(&RegSpec::ridge(lambda), cd, false, 1.0).unwrap();
            let sys3 = e.solve_sys3(&LossSpec::Square, lambda, cd).unwrap();
            let generic = e.solve_sys1a_generic(&LossSpec::Square, &RegSpec::ridge(lambda), cd).unwrap();
            for (route, got) in [("sys2", sys2.alpha2()), ("sys3", sys3.alpha.powi(2)), ("1a", generic.alpha.powi(2))] {
                assert!((got - want).abs() < 1e-6, "{route} lambda={lambda} cd={cd}: {got} vs {want}");
            }
            assert!((sys3.kappa - oracle.m(lambda)).abs() < 1e-9);
            let mapped = sys2.to_system(cd, 0.64).unwrap();
            assert!((mapped.kappa - sys3.kappa).abs() < 1e-6);
            assert!((sys2.a - lambda / sys3.beta).abs() < 1e-6);
        }
    }
}

#[test]
fn least_squares_underparameterized_is_closed_form() {
    let e = gaussian_engine(SignalDist::TwoPointSparse { strength: 1.0, support: 0.2 }, 1.0);
    let sol = e.solve_sys1a(&LossSpec::Square, &RegSpec::None, 2.0).unwrap();
    assert!((sol.alpha.powi(2) - 1.0).abs() < 1e-12);
}

#[test]
fn homogeneous_least_squares_correlation() {
    let e = gaussian_engine(SignalDist::TwoPointSparse { strength: 1.0, support: 0.2 }, 1.0);
    let comp = Component { loss: LossSpec::Square, reg: RegSpec::None, c: 0.75 };
    let cell = e.cell_theory(&comp, 2.0).unwrap();
    assert!((cell.eta_g - 0.5).abs() < 1e-9, "{}", cell.eta_g);
}

#[test]
fn huber_with_rescaled_ridge_approaches_square_loss() {
    let e = gaussian_engine(SignalDist::GaussPointMass { eps: 1.0, variance: 1.0 }, 1.0);
    let (lambda, cd) = (0.5, 1.5);
    let square = e.solve_sys1a(&LossSpec::Square, &RegSpec::ridge(lambda), cd).unwrap();
    let mut gaps = Vec::new();
    for &rho in &[1.0, 2.0, 4.0, 10.0, 100.0, 1000.0] {
        let huber = e.solve_sys3(&LossSpec::huber(rho), lambda / rho, cd).unwrap();
        gaps.push((huber.alpha - square.alpha).abs());
    }
    for w in gaps.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "{gaps:?}");
    }
    assert!(gaps[0] > gaps[2]);
    assert!(gaps[5] < 1e-8, "{gaps:?}");
}

#[test]
fn quadrature_converges_in_node_count() {
    let loss = LossSpec::huber(1.0);
    let reg = RegSpec::elastic_net(0.1, 0.5);
    let signal = SignalDist::GaussPointMass { eps: 0.3, variance: 3.0 };
    let noise = NoiseDist::Gaussian { sigma: 0.7 };
    let solve = |nodes: usize, panel: usize| {
        let cfg = QuadratureConfig { gauss_nodes: nodes, panel_order: panel, ..QuadratureConfig::default() };
        Engine::new(&signal, &noise, &cfg).unwrap().solve_sys1a(&loss, &reg, 0.8).unwrap()
    };
    let coarse = solve(32, 8);
    let fine = solve(64, 12);
    assert!((coarse.alpha - fine.alpha).abs() < 1e-8, "{} vs {}", coarse.alpha, fine.alpha);
    assert!((coarse.nu - fine.nu).abs() < 1e-8);
}

#[test]
fn student_noise_node_rule_matches_monte_carlo() {
    let signal = SignalDist::TwoPointSparse { strength: 1.0, support: 0.3 };
    let noise = NoiseDist::StudentT { dof: 3.0, scale: 1.0 };
    let nodes = QuadratureConfig { noise: NoiseQuadrature::Nodes { count: 48 }, ..QuadratureConfig::default() };
    let mc = QuadratureConfig::default();
    let loss = LossSpec::huber(1.0);
    let reg = RegSpec::lasso(0.3);
    let a = Engine::new(&signal, &noise, &nodes).unwrap().solve_sys1a(&loss, &reg, 1.5).unwrap();
    let b = Engine::new(&signal, &noise, &mc).unwrap().solve_sys1a(&loss, &reg, 1.5).unwrap();
    assert!((a.alpha - b.alpha).abs() < 1e-2 * a.alpha, "{} vs {}", a.alpha, b.alpha);
}

#[test]
fn lassoless_optimal_subsample_is_overparameterized() {
    let e = gaussian_engine(SignalDist::TwoPointSparse { strength: 1.0, support: 0.1 }, 0.5);
    let delta = 4.0;
    let mut best = (f64::INFINITY, 0.0);
    for i in 1..=30 {
        let cd = 0.1 * i as f64 + 0.05;
        let c = cd / delta;
        if c > 1.0 {
            break;
        }
        let sol = e.solve_sys4(Interpolator::Lassoless, c, delta, true).unwrap();
        let r_inf = sol.r_inf().unwrap();
        if r_inf < best.0 {
            best = (r_inf, cd);
        }
        assert!(sol.tau.powi(2) >= 0.25 - 1e-12);
        if cd < 1.0 {
            assert!(sol.tau.powi(2) >= 0.25 / (1.0 - cd) - 1e-10);
        }
    }
    assert!(best.1 <= 1.0, "best c delta = {}", best.1);
}

fn member_cases() -> impl Strategy<Value = (LossSpec, RegSpec, f64, f64, f64)> {
    (
        prop_oneof![Just(LossSpec::Square), (0.3f64..3.0).prop_map(LossSpec::huber)],
        prop_oneof![
            (0.1f64..2.0).prop_map(RegSpec::ridge),
            (0.1f64..1.0).prop_map(RegSpec::lasso),
            (0.05f64..1.0, 0.05f64..1.0).prop_map(|(a, b)| RegSpec::elastic_net(a, b)),
        ],
        0.3f64..3.0,
        0.1f64..0.95,
        0.1f64..0.95,
    )
}

fn solve(e: &Engine, loss: &LossSpec, reg: &RegSpec, cd: f64) -> SystemSolution {
    e.solve_sys1a(loss, reg, cd).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, ..ProptestConfig::default() })]

    #[test]
    fn maps_are_bounded_monotone_and_contractive((loss, reg, delta, c, ct) in member_cases()) {
        let e = gaussian_engine(SignalDist::TwoPointSparse { strength: 1.0, support: 0.4 }, 1.0);
        let other = reg.with_level(reg.level() * 1.5);
        let sa = solve(&e, &loss, &reg, c * delta);
        let sb = solve(&e, &loss, &other, ct * delta);
        prop_assert!(sa.residual < 1e-8 && sb.residual < 1e-8);
        let a = Member { loss: &loss, reg: &reg, c, sol: &sa };
        let b = Member { loss: &loss, reg: &other, c: ct, sol: &sb };
        let bound = (c * ct).sqrt();
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..10 {
            let eta = -0.95 + 1.9 * i as f64 / 9.0;
            let fl = e.eval_f_loss(eta, &a, &b);
            let fg = e.eval_f_reg(eta, &a, &b);
            prop_assert!(fl.abs() <= bound + 1e-12 && fg.abs() <= 1.0 + 1e-12);
            prop_assert!(fl >= prev.0 - 1e-12 && fg >= prev.1 - 1e-12);
            prev = (fl, fg);
            let h = 1e-4;
            let comp = |x: f64| e.eval_f_reg(e.eval_f_loss(x, &a, &b), &a, &b);
            let slope = (comp(eta + h) - comp(eta - h)) / (2.0 * h);
            prop_assert!(slope >= -1e-4 && slope <= c.min(ct) + 1e-4, "slope {} at {}", slope, eta);
        }
        let corr = e.solve_sys1b(&a, &b).unwrap();
        prop_assert!(corr.eta_h.abs() <= bound && corr.eta_g.abs() <= 1.0);
        prop_assert!((corr.eta_g - e.eval_f_reg(corr.eta_h, &a, &b)).abs() < 1e-10);
        prop_assert!((corr.eta_h - e.eval_f_loss(corr.eta_g, &a, &b)).abs() < 1e-9);
        let (sg, sh) = e.sign_pattern(&a, &b);
        prop_assert!(sg == 0 || sg == corr.eta_g.signum() as i8);
        prop_assert!(sh == 0 || sh == corr.eta_h.signum() as i8);
    }

    #[test]
    fn homogeneous_solutions_are_nonnegative((loss, reg, delta, c, _ct) in member_cases()) {
        let e = gaussian_engine(SignalDist::GaussPointMass { eps: 0.5, variance: 2.0 }, 0.5);
        let cell = e.cell_theory(&Component { loss, reg, c }, delta).unwrap();
        prop_assert!(cell.eta_g >= 0.0 && cell.eta_h >= 0.0);
        prop_assert!(cell.r_inf <= cell.r1 + 1e-10);
        if let Some(sol) = cell.system {
            prop_assert!(sol.residual < 1e-8);
        }
    }
}
