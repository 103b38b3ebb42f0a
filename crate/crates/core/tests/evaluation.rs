use bidlab::evaluation::{parse_grid, simulate_strategy, sweep_sigma, write_sweep_csv, Algorithm, Strategy};
use bidlab::numerics::integrate;
use bidlab::BiddingFunction;

/// `E[cost(u)/u]` with `u = e^{ση}` by quadrature: the expected cost at a
/// fixed threshold is `F(B⁻(u) + 1)/u`, averaged against the normal density.
fn quadrature_nc(b: &BiddingFunction, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let g = |eta: f64| {
        let u = (sigma * eta).exp();
        let density = (-0.5 * eta * eta).exp() / (2.0 * std::f64::consts::PI).sqrt();
        b.cumulative_mass(b.inverse(u) + 1.0) / u * density
    };
    let n = 1600;
    let h = 16.0 / n as f64;
    (0..n)
        .map(|k| {
            let a = -8.0 + k as f64 * h;
            integrate(g, a, a + h, 1e-11)
        })
        .sum()
}

fn strategies(r: f64) -> Vec<Strategy> {
    Algorithm::ALL.iter().map(|&a| Strategy::new(a, r).unwrap()).collect()
}

#[test]
fn monte_carlo_matches_quadrature() {
    for s in strategies(4.0) {
        let b = s.aligned(1.0).unwrap();
        for sigma2 in [0.3, 1.5] {
            let mc = simulate_strategy(&s, sigma2, 200_000, 11).unwrap();
            let exact = quadrature_nc(&b, sigma2);
            assert!(
                (mc.mean_nc - exact).abs() <= 4.0 * mc.stderr,
                "{:?} sigma2={sigma2}: {} vs {exact} (se {})",
                s.algorithm,
                mc.mean_nc,
                mc.stderr
            );
        }
    }
}

#[test]
fn consistencies_ordered_at_zero_noise() {
    let s = strategies(4.0);
    let c: Vec<f64> = s.iter().map(|s| s.consistency).collect();
    // D, I, A order in Algorithm::ALL.
    assert!((c[2] - 1.2020377).abs() < 1e-6);
    assert!((c[1] - 1.4644051).abs() < 1e-6);
    assert!((c[0] - 2.0).abs() < 1e-12);
    assert!(c[2] < c[1] && c[1] < c[0]);
}

#[test]
fn robustness_ceiling_and_monotone_profile() {
    let grid = [0.0, 0.5, 1.0, 2.0, 4.0];
    let rows = sweep_sigma(&Algorithm::ALL, 4.0, &grid, 50_000, 5).unwrap();
    for s in strategies(4.0) {
        let mine: Vec<_> = rows.iter().filter(|r| r.algorithm == s.algorithm).collect();
        assert_eq!(mine.len(), grid.len());
        for w in mine.windows(2) {
            let slack = 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            assert!(w[1].mean_nc + slack >= w[0].mean_nc, "{w:?}");
        }
        for row in &mine {
            assert!(row.mean_nc >= s.consistency - 3.0 * row.stderr - 1e-12);
            assert!(row.mean_nc <= 4.0 + 1e-9);
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let s = Strategy::new(Algorithm::A, 4.0).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_strategy(&s, 0.8, 70_000, 9).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn sweep_csv_has_one_row_per_cell() {
    let grid = parse_grid("0:0.2:0.1").unwrap();
    let rows = sweep_sigma(&[Algorithm::A, Algorithm::I], 3.0, &grid, 2_000, 1).unwrap();
    let mut out = Vec::new();
    write_sweep_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("A,3,0,"));
    assert!(lines[6].starts_with("I,3,0.2,"));
}
