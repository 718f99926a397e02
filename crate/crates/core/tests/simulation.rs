use evbs::simulation::{format_tables, generate_replica, read_tables_csv, run_scenario, ScenarioConfig};

fn small(scenario: u8, sizes: Vec<usize>, replicas: usize) -> ScenarioConfig {
    ScenarioConfig {
        sizes,
        replicas,
        seed: 11,
        ..ScenarioConfig::preset(scenario).unwrap()
    }
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn scenario1_gumbel_responses_are_finite() {
    let cfg = small(1, vec![60], 1);
    let gumbel_cell = cfg.gammas.iter().position(|g| *g == 0.0).unwrap();
    for r in 0..20 {
        let d = generate_replica(&cfg, gumbel_cell, r).unwrap();
        assert!(d.y().iter().all(|v| v.is_finite()));
        assert!(d.column(1).iter().all(|x| *x > 0.0 && *x < 1.0));
    }
}

#[test]
fn scenario2_leverage_count() {
    for n in [60, 61, 120, 180] {
        let cfg = small(2, vec![n], 1);
        for r in 0..5 {
            let d = generate_replica(&cfg, 0, r).unwrap();
            let high = d.column(1).iter().filter(|x| **x > 5.0 && **x < 10.0).count();
            assert_eq!(high, (n as f64 / 10.0).ceil() as usize);
        }
    }
}

#[test]
fn scenario3_mixture_spread_is_between_components() {
    let mixed = small(3, vec![2000], 1);
    let pure_wide = ScenarioConfig {
        contamination_fraction: 0.0,
        ..mixed.clone()
    };
    let pure_narrow = ScenarioConfig {
        alpha: 0.7,
        ..pure_wide.clone()
    };
    let spread = |cfg: &ScenarioConfig| {
        let d = generate_replica(cfg, 1, 0).unwrap();
        let e: Vec<f64> = (0..d.n()).map(|i| d.y()[i] - d.eta(i, &cfg.beta)).collect();
        sd(&e)
    };
    let (m, w, nn) = (spread(&mixed), spread(&pure_wide), spread(&pure_narrow));
    assert!(nn < m && m < w, "narrow {nn} mixed {m} wide {w}");
}

#[test]
fn same_seed_same_result() {
    let cfg = small(1, vec![60], 40);
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(format_tables(&a).csv, format_tables(&b).csv);
    let other = run_scenario(&ScenarioConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(format_tables(&a).csv, format_tables(&other).csv);
}

#[test]
fn csv_round_trip() {
    let r = run_scenario(&small(3, vec![60], 30)).unwrap();
    let t = format_tables(&r);
    let back = read_tables_csv(&t.csv).unwrap();
    assert_eq!(back, r);
    assert_eq!(format_tables(&back).csv, t.csv);
    assert_eq!(t.estimates.lines().count(), 4);
}

#[test]
fn result_invariants_and_concentration() {
    let r = run_scenario(&small(1, vec![60, 120, 180], 300)).unwrap();
    for c in &r.cells {
        assert!(!c.flagged, "cell n={} gamma={} diverged {}", c.n, c.gamma, c.diverged);
        for j in 0..4 {
            assert!((0.0..=1.0).contains(&c.cp[j]));
            assert!(c.rmse[j] >= c.bias[j].abs());
        }
    }
    let cell = |n: usize, g: f64| r.cells.iter().find(|c| c.n == n && c.gamma == g).unwrap();
    for g in [-0.2, 0.0, 0.2] {
        for j in 0..4 {
            let (a, b, c) = (cell(60, g).rmse[j], cell(120, g).rmse[j], cell(180, g).rmse[j]);
            assert!(b <= a * 1.05 && c <= b * 1.05, "gamma {g} param {j}: {a} {b} {c}");
            let (lo, hi) = ((cell(60, g).cp[j] - 0.95).abs(), (cell(180, g).cp[j] - 0.95).abs());
            assert!(hi <= lo + 0.05 * 0.95, "gamma {g} param {j}: cp gap {lo} -> {hi}");
        }
    }
}
