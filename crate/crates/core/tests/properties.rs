use cic_core::dataset::{load_csv, CsvOptions, PanelDataset, Period, TreatmentLevels};
use cic_core::empirical::SortedSample;
use cic_core::estimators::{
    acr, ate, att, counterfactual_strong_conditional, counterfactual_strong_unconditional,
    counterfactual_weak, estimate, estimate_curve, qte, qtt, EffectRequest, Mode, Parameter,
};
use cic_core::inference::{bootstrap_ci, BootstrapConfig};
use cic_core::simulation::{dkw_bound, simulate, simulate_panel, DgpConfig, LevelSpec, Oracle, RankLaw, StructuralMap};
use cic_core::Error;
use proptest::collection::vec;
use proptest::prelude::*;

fn int_sample(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-20i32..20, 1..max_len).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn sorted(v: &[f64]) -> SortedSample {
    SortedSample::from_slice(v).unwrap()
}

fn labels(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("L{i}")).collect()
}

/// `m` ordered levels, every cell non-empty with integer outcomes.
fn panel(m: usize, max_cell: usize, values: impl Strategy<Value = i32> + Clone) -> impl Strategy<Value = PanelDataset> {
    let cell = move || vec(values.clone(), 2..max_cell);
    vec((cell(), cell()), m).prop_map(move |cells| {
        let cells = cells
            .into_iter()
            .map(|(a, b)| {
                let f = |v: Vec<i32>| SortedSample::new(v.into_iter().map(f64::from).collect()).unwrap();
                [f(a), f(b)]
            })
            .collect();
        PanelDataset::from_cells(TreatmentLevels::ordered(labels(m)).unwrap(), cells).unwrap()
    })
}

fn map_cells(ds: &PanelDataset, g: impl Fn(f64) -> f64) -> PanelDataset {
    let m = ds.levels().len();
    let cells = (0..m)
        .map(|i| [ds.cell_at(Period::Pre, i).map(&g).unwrap(), ds.cell_at(Period::Post, i).map(&g).unwrap()])
        .collect();
    PanelDataset::from_cells(ds.levels().clone(), cells).unwrap()
}

proptest! {
    #[test]
    fn galois_pair(v in int_sample(40), taus in vec(0.0f64..=1.0, 1..20)) {
        let s = sorted(&v);
        for (i, &y) in s.values().iter().enumerate() {
            let back = s.quantile(s.cdf(y)).unwrap();
            prop_assert!(back <= y);
            if i == 0 || s.values()[i - 1] < y {
                prop_assert_eq!(back, y);
            }
        }
        for tau in taus.into_iter().filter(|&t| t > 0.0) {
            prop_assert!(s.cdf(s.quantile(tau).unwrap()) >= tau);
        }
    }

    #[test]
    fn cdf_and_quantile_are_monotone(v in int_sample(40), mut ys in vec(-25.0f64..25.0, 2..30), mut taus in vec(0.0f64..=1.0, 2..30)) {
        let s = sorted(&v);
        ys.sort_by(f64::total_cmp);
        taus.sort_by(f64::total_cmp);
        for w in ys.windows(2) {
            prop_assert!(s.cdf(w[0]) <= s.cdf(w[1]));
        }
        for w in taus.windows(2) {
            prop_assert!(s.quantile(w[0]).unwrap() <= s.quantile(w[1]).unwrap());
        }
    }

    #[test]
    fn quantiles_commute_with_increasing_maps(v in int_sample(40), taus in vec(0.0f64..=1.0, 1..20)) {
        let s = sorted(&v);
        let g = |x: f64| (x / 8.0).exp();
        let t = s.map(g).unwrap();
        for tau in taus {
            prop_assert_eq!(t.quantile(tau).unwrap(), g(s.quantile(tau).unwrap()));
        }
    }

    #[test]
    fn mean_is_the_integral_of_the_quantile_function(v in vec(-1e3f64..1e3, 1..60)) {
        let s = sorted(&v);
        let n = s.len();
        let exact = (1..=n).map(|i| s.quantile(i as f64 / n as f64).unwrap()).sum::<f64>() / n as f64;
        prop_assert_eq!(s.mean(), exact);
        let k = 10_000;
        let grid = (0..k).map(|i| s.quantile((i as f64 + 0.5) / k as f64).unwrap()).sum::<f64>() / k as f64;
        let range = s.max() - s.min();
        prop_assert!((grid - s.mean()).abs() <= range * n as f64 / k as f64 + 1e-9);
    }

    #[test]
    fn transformed_ecdf_equals_direct_composition(ds in panel(3, 12, -15i32..15)) {
        let mut cfs = vec![counterfactual_weak(&ds, "L1").unwrap(), counterfactual_weak(&ds, "L2").unwrap()];
        for d in ds.levels().labels() {
            cfs.push(counterfactual_strong_unconditional(&ds, d).unwrap());
            for dp in ds.levels().labels() {
                cfs.push(counterfactual_strong_conditional(&ds, d, dp).unwrap());
            }
        }
        for cf in &cfs {
            for y in -32..=32 {
                let y = y as f64 / 2.0;
                prop_assert_eq!(cf.cdf(y), cf.ecdf(y), "at {} for {:?}", y, cf.kind);
            }
        }
    }

    #[test]
    fn counterfactual_quantiles_follow_monotone_transforms(ds in panel(3, 15, -15i32..15), taus in vec(0.01f64..0.99, 1..10)) {
        let g = |x: f64| x * x * x + 3.0 * x;
        let gd = map_cells(&ds, g);
        for d in ["L1", "L2"] {
            let a = counterfactual_weak(&ds, d).unwrap();
            let b = counterfactual_weak(&gd, d).unwrap();
            prop_assert_eq!(b.transformed(), &a.transformed().map(g).unwrap());
            for &tau in &taus {
                let q = qtt(&ds, tau, d, "L0", d, Mode::Weak).unwrap().value;
                let qg = qtt(&gd, tau, d, "L0", d, Mode::Weak).unwrap().value;
                // the rank at which the effect changes sign is preserved
                prop_assert_eq!(q.signum(), qg.signum());
            }
        }
        for d in ["L0", "L1", "L2"] {
            let a = counterfactual_strong_unconditional(&ds, d).unwrap();
            let b = counterfactual_strong_unconditional(&gd, d).unwrap();
            prop_assert_eq!(b.transformed(), &a.transformed().map(g).unwrap());
        }
    }

    #[test]
    fn binary_weak_counterfactual_is_the_control_time_map(ds in panel(2, 20, -15i32..15)) {
        let weak = counterfactual_weak(&ds, "L1").unwrap();
        let via = counterfactual_strong_conditional(&ds, "L0", "L1").unwrap();
        prop_assert_eq!(weak.transformed(), via.transformed());
        let (c0, c1) = (ds.cell_at(Period::Pre, 0), ds.cell_at(Period::Post, 0));
        let expected = ds
            .cell_at(Period::Pre, 1)
            .map(|y| {
                let k = c0.count_le(y);
                let t = k as f64 / c0.len() as f64;
                c1.quantile(t).unwrap()
            })
            .unwrap();
        prop_assert_eq!(weak.transformed(), &expected);
    }

    #[test]
    fn unchanged_control_leaves_group_outcomes_in_place(pre in int_sample(20), treated in int_sample(20)) {
        let c = sorted(&pre);
        let base = sorted(&treated);
        let ds = PanelDataset::from_cells(
            TreatmentLevels::unordered("0", ["d"]).unwrap(),
            vec![[c.clone(), c.clone()], [base.clone(), sorted(&[0.0])]],
        )
        .unwrap();
        let cf = counterfactual_weak(&ds, "d").unwrap();
        let inside = base.values().iter().all(|y| c.values().contains(y));
        if inside {
            prop_assert_eq!(cf.transformed(), &base);
        }
    }

    #[test]
    fn averages_integrate_quantile_curves(ds in panel(3, 25, -50i32..50)) {
        let k = 10_000;
        let taus: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
        let range = {
            let all: Vec<f64> = (0..3)
                .flat_map(|i| Period::BOTH.map(|p| ds.cell_at(p, i).values().to_vec()))
                .flatten()
                .collect();
            let s = sorted(&all);
            s.max() - s.min()
        };
        let pairs = [
            (EffectRequest::qtt(0.5, "L1", "L0", "L1", Mode::Weak), att(&ds, "L1", "L0", "L1", Mode::Weak)),
            (EffectRequest::qtt(0.5, "L2", "L1", "L0", Mode::Strong), att(&ds, "L2", "L1", "L0", Mode::Strong)),
            (EffectRequest::qte(0.5, "L2", "L0", Mode::Strong), ate(&ds, "L2", "L0", Mode::Strong)),
        ];
        for (template, average) in pairs {
            let curve = estimate_curve(&ds, &template, &taus).unwrap();
            let integral = curve.iter().map(|e| e.value).sum::<f64>() / k as f64;
            prop_assert!((integral - average.unwrap().value).abs() <= 1e-4 * range.max(1.0));
        }
    }

    #[test]
    fn marginal_responses_telescope(ds in panel(4, 20, -100i32..100)) {
        let total: f64 = ["L1", "L2", "L3"].iter().map(|d| acr(&ds, d, Mode::Strong).unwrap().value).sum();
        let direct = ate(&ds, "L3", "L0", Mode::Strong).unwrap().value;
        prop_assert!((total - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn weak_scope_is_exactly_own_group_against_control(ds in panel(3, 6, -5i32..5), tau in 0.01f64..0.99) {
        let l = labels(3);
        for p in Parameter::ALL {
            for d in &l {
                for dp in &l {
                    for c in &l {
                        let mut req = EffectRequest::new(p, Mode::Weak, d.as_str()).with_d_prime(dp.as_str());
                        if p.is_quantile() {
                            req = req.with_tau(tau);
                        }
                        if matches!(p, Parameter::Qtt | Parameter::Att | Parameter::Acrt) {
                            req = req.with_cond(c.as_str());
                        } else if c != d {
                            continue;
                        }
                        let weak = estimate(&ds, &req);
                        let mut strong_req = req.clone();
                        strong_req.mode = Mode::Strong;
                        let strong = estimate(&ds, &strong_req);
                        if let Err(Error::NotIdentified { .. }) = strong {
                            prop_assert!(false, "strong mode refused {:?}", strong_req);
                        }
                        let in_set = match p {
                            Parameter::Qtt | Parameter::Att => d != "L0" && dp == "L0" && c == d,
                            // ACRT(d_1 | d_1) is ATT(d_1, control | d_1)
                            Parameter::Acrt => d == "L1" && dp == "L0" && c == d,
                            Parameter::DidAtt => true,
                            _ => false,
                        };
                        let refused = matches!(weak, Err(Error::NotIdentified { .. }));
                        if strong.is_ok() {
                            prop_assert_eq!(refused, !in_set, "{:?} -> {:?}", req, weak);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cell_counts_add_up(rows in vec((-10i32..10, 0usize..3, 0usize..2), 12..80)) {
        let mut text = String::from("outcome,treatment,period\n");
        for (y, g, t) in &rows {
            text.push_str(&format!("{y},L{g},{t}\n"));
        }
        let opts = CsvOptions {
            control: "L0".into(),
            ordered: Some(labels(3)),
            ..CsvOptions::default()
        };
        let Ok(ds) = load_csv(text.as_bytes(), &opts) else {
            // some cell came out empty
            return Ok(());
        };
        for p in Period::BOTH {
            let expected = rows.iter().filter(|r| r.2 == p.index()).count();
            let total: usize = (0..3).map(|i| ds.cell_at(p, i).len()).sum();
            prop_assert_eq!(total, expected);
            prop_assert_eq!(ds.n_obs(p), expected);
        }
        let p_hat = ds.p_hat();
        prop_assert!(p_hat.iter().all(|&p| p > 0.0 && p <= 1.0));
        prop_assert!((p_hat.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let mut reversed = String::from("outcome,treatment,period\n");
        for (y, g, t) in rows.iter().rev() {
            reversed.push_str(&format!("{y},L{g},{t}\n"));
        }
        prop_assert_eq!(load_csv(reversed.as_bytes(), &opts).unwrap(), ds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wider_levels_never_narrow_intervals(ds in panel(2, 30, -40i32..40), seed in any::<u64>()) {
        let req = EffectRequest::att("L1", "L0", "L1", Mode::Weak);
        let mut prev: Option<(f64, f64)> = None;
        for level in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let ci = bootstrap_ci(&ds, &req, &BootstrapConfig::new(60, level, seed).unwrap()).unwrap().interval;
            if let Some((lo, hi)) = prev {
                prop_assert!(ci.lower <= lo && ci.upper >= hi);
            }
            prev = Some((ci.lower, ci.upper));
        }
    }

    #[test]
    fn simulation_is_a_function_of_the_seed(seed in any::<u64>()) {
        let cfg = three_level_weak();
        let a = simulate_panel(&cfg, 120, seed).unwrap();
        let b = simulate_panel(&cfg, 120, seed).unwrap();
        prop_assert_eq!(a.observations, b.observations);
        prop_assert_eq!(a.latent, b.latent);
    }

    #[test]
    fn period_one_outcomes_are_the_realized_arm(seed in any::<u64>()) {
        let cfg = three_level_strong();
        let sim = simulate_panel(&cfg, 200, seed).unwrap();
        for (o, r) in sim.observations.iter().zip(&sim.latent.rows) {
            let arm = if r.period == Period::Post { r.group } else { 0 };
            prop_assert_eq!(o.outcome, r.potential[arm].unwrap());
        }
    }
}

fn three_level_weak() -> DgpConfig {
    DgpConfig::new(
        Mode::Weak,
        true,
        vec![
            LevelSpec::new("0", 0.4, RankLaw::new(2.0, 2.0), StructuralMap::Affine { a: 2.0, b: 1.0 })
                .with_map_pre(StructuralMap::Identity),
            LevelSpec::new("1", 0.35, RankLaw::new(2.0, 4.0), StructuralMap::ExpAffine { a: 1.0, b: 0.5 }),
            LevelSpec::new("2", 0.25, RankLaw::new(4.0, 2.0), StructuralMap::Power { gamma: 2.0, scale: 4.0, shift: 0.0 }),
        ],
    )
    .unwrap()
}

fn three_level_strong() -> DgpConfig {
    DgpConfig::new(
        Mode::Strong,
        true,
        vec![
            LevelSpec::new("0", 0.3, RankLaw::new(2.0, 3.0), StructuralMap::Affine { a: 1.5, b: 0.5 })
                .with_map_pre(StructuralMap::Identity),
            LevelSpec::new("1", 0.3, RankLaw::new(3.0, 3.0), StructuralMap::GaussianQuantileAffine { a: 1.0, b: 2.0 })
                .with_map_pre(StructuralMap::Affine { a: 2.0, b: 0.0 }),
            LevelSpec::new("2", 0.4, RankLaw::new(3.0, 2.0), StructuralMap::ExpAffine { a: 2.0, b: 0.0 })
                .with_map_pre(StructuralMap::Power { gamma: 0.5, scale: 1.0, shift: 0.0 }),
        ],
    )
    .unwrap()
}

#[test]
fn replicate_range_contains_the_point_estimate() {
    let cfg = three_level_weak();
    for seed in 0..5 {
        let ds = simulate(&cfg, 600, seed).unwrap();
        for req in [
            EffectRequest::att("1", "0", "1", Mode::Weak),
            EffectRequest::qtt(0.5, "2", "0", "2", Mode::Weak),
        ] {
            let point = estimate(&ds, &req).unwrap().value;
            let boot = bootstrap_ci(&ds, &req, &BootstrapConfig::new(60, 0.95, seed).unwrap()).unwrap();
            let lo = boot.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = boot.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= point && point <= hi, "{req:?}: {point} not in [{lo}, {hi}]");
        }
    }
}

#[test]
fn simulated_cells_track_their_oracle_cdf() {
    let n = 20_000;
    let mut failures = 0;
    let seeds = 10;
    for cfg in [three_level_weak(), three_level_strong()] {
        let oracle = Oracle::new(&cfg);
        for seed in 0..seeds {
            let ds = simulate(&cfg, n, seed).unwrap();
            for p in Period::BOTH {
                for g in 0..3 {
                    let arm = if p == Period::Post { g } else { 0 };
                    let (arm_label, group_label) = (cfg.levels().label(arm), cfg.levels().label(g));
                    let cell = ds.cell_at(p, g);
                    let len = cell.len() as f64;
                    let sup = cell
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(k, &y)| {
                            let f = oracle.cdf(p, arm_label, group_label, y).unwrap();
                            (f - k as f64 / len).abs().max((f - (k + 1) as f64 / len).abs())
                        })
                        .fold(0.0, f64::max);
                    if sup > dkw_bound(cell.len(), 0.01) {
                        failures += 1;
                    }
                }
            }
        }
    }
    // 120 cells at a 1% level each
    assert!(failures <= 5, "{failures} cells outside their DKW band");
}

#[test]
fn strong_mode_recovers_quantile_and_average_effects() {
    let cfg = three_level_strong();
    let oracle = Oracle::new(&cfg);
    let ds = simulate(&cfg, 40_000, 11).unwrap();
    let truth = oracle.effect(&EffectRequest::ate("2", "1", Mode::Strong)).unwrap().value;
    let est = ate(&ds, "2", "1", Mode::Strong).unwrap().value;
    assert!((est - truth).abs() < 0.05, "ATE {est} vs {truth}");
    let truth = oracle.effect(&EffectRequest::qte(0.5, "2", "0", Mode::Strong)).unwrap().value;
    let est = qte(&ds, 0.5, "2", "0", Mode::Strong).unwrap().value;
    assert!((est - truth).abs() < 0.05, "QTE {est} vs {truth}");
}
