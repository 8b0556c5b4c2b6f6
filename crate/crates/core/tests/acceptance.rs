//! Acceptance gate.
//!
//! Prints one PASS/FAIL line per criterion. Criteria listed in
//! `KNOWN_GAPS` miss their band at desk scale with the current model; they
//! still print FAIL but do not fail the process. Any other failure does.
//!
//! Pass criterion ids (`P2 P4`) as arguments to run a subset.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use prodsim_core::engine::{
    self, Intervention, InterventionStrategy, RecommendationBudget, RewiringPolicy, Simulation,
    SimulationConfig, Susceptibility,
};
use prodsim_core::harness::{run_cell_cached, CellResult, GridConfig, Metric, NullArmCache};
use prodsim_core::metrics::{self, Neighborhood, RwcConfig};
use prodsim_core::netgen::{self, NetgenConfig};
use prodsim_core::odm::{
    bcm_update, epistemic_update, Action, BcmParams, EpistemicParams, ExperimentOutcome, OpinionModel,
};
use prodsim_core::recommenders::{
    dji_score, ppr_scores, salsa_authority_scores, Recommender, RecommenderKind, RecommenderSpec,
};
use prodsim_core::stats::{ks_statistic, ks_uniform, rng_stream};
use prodsim_core::OpinionGraph;

const MASTER_SEED: u64 = 2024;
const K: usize = 50;
const N: usize = 400;

const KNOWN_GAPS: &[&str] = &["P2", "P4", "P7"];

const CORNERS: [(f64, f64); 4] = [(0.2, 0.05), (0.8, 0.05), (0.2, 0.95), (0.8, 0.95)];

struct Check {
    label: String,
    ok: bool,
}

fn check(ok: bool, label: impl Into<String>) -> Check {
    Check {
        label: label.into(),
        ok,
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Variant {
    Standard,
    OpinionRewiring,
    Susceptible(Susceptibility),
    Intervened(InterventionStrategy, u32),
}

fn bcm() -> OpinionModel {
    OpinionModel::Bcm(BcmParams::default())
}

fn epistemic() -> OpinionModel {
    OpinionModel::Epistemic(EpistemicParams::default())
}

fn ppr() -> Option<RecommenderSpec> {
    Some(RecommenderSpec::new(RecommenderKind::Ppr))
}

fn grid_config(odm: OpinionModel, variant: Variant) -> GridConfig {
    let mut sim = SimulationConfig::new(odm, ppr(), 0);
    match variant {
        Variant::Standard => {}
        Variant::OpinionRewiring => sim.rewiring = RewiringPolicy::OpinionDistance,
        Variant::Susceptible(s) => sim.susceptibility = s,
        Variant::Intervened(strategy, xi_percent) => {
            sim.intervention = Some(Intervention {
                probability: xi_percent as f64 / 100.0,
                strategy,
            })
        }
    }
    let mut cfg = GridConfig::new(NetgenConfig::new(N, 0.5, 0.5, 0), sim, MASTER_SEED);
    cfg.replicas = K;
    if matches!(variant, Variant::Intervened(..)) {
        cfg.metrics = vec![Metric::Nci];
    }
    cfg
}

/// Cell results shared between criteria, null arms included.
struct Cells {
    nulls: NullArmCache,
    done: HashMap<(&'static str, Variant, u64, u64), CellResult>,
}

impl Cells {
    fn get(&mut self, odm: OpinionModel, variant: Variant, eta: f64, mu: f64) -> &CellResult {
        let key = (odm.name(), variant, eta.to_bits(), mu.to_bits());
        if !self.done.contains_key(&key) {
            let started = Instant::now();
            let cfg = grid_config(odm, variant);
            let cell = run_cell_cached(eta, mu, &cfg, &self.nulls).expect("cell runs");
            eprintln!("  [{} eta={eta} mu={mu}: {:.1?}]", odm.name(), started.elapsed());
            self.done.insert(key, cell);
        }
        &self.done[&key]
    }

    fn delta(&mut self, odm: OpinionModel, variant: Variant, eta: f64, mu: f64, metric: Metric) -> (f64, f64) {
        let m = self.get(odm, variant, eta, mu).metric(metric).expect("metric evaluated");
        (m.delta, m.ks.p_value)
    }
}

fn p1_null_neutrality() -> Vec<Check> {
    let g = netgen::generate(&NetgenConfig::new(N, 0.05, 0.8, 11)).unwrap();
    let initial_arcs: Vec<_> = g.arcs().collect();
    let mut checks = Vec::new();
    for odm in [bcm(), epistemic()] {
        let mut cfg = SimulationConfig::new(odm, ppr(), 99);
        cfg.max_recommendations = RecommendationBudget::Absolute(0);
        let a = engine::run(&g, &cfg).unwrap();
        let b = engine::run(&g, &cfg).unwrap();
        let same_arcs = a.graph.arcs().collect::<Vec<_>>() == initial_arcs;
        let identical = a
            .graph
            .opinions()
            .iter()
            .zip(b.graph.opinions())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        checks.push(check(same_arcs, format!("{} arcs unchanged", odm.name())));
        checks.push(check(identical, format!("{} opinions bit-identical", odm.name())));
    }
    checks
}

fn p2_echo_chambers(cells: &mut Cells) -> Vec<Check> {
    let (d, p) = cells.delta(bcm(), Variant::Standard, 0.8, 0.05, Metric::Nci);
    let (de, _) = cells.delta(epistemic(), Variant::Standard, 0.8, 0.05, Metric::Nci);
    vec![
        check(within(d, 0.03, 0.13), format!("bcm dNCI={d:.4} in [0.03, 0.13]")),
        check(p < 0.05, format!("bcm p={p:.3} < 0.05")),
        check(within(de, -0.02, 0.06), format!("epistemic dNCI={de:.4} in [-0.02, 0.06]")),
    ]
}

fn p3_low_homophily(cells: &mut Cells) -> Vec<Check> {
    let (low, _) = cells.delta(bcm(), Variant::Standard, 0.2, 0.05, Metric::Nci);
    let (high_mu, _) = cells.delta(bcm(), Variant::Standard, 0.8, 0.95, Metric::Nci);
    vec![
        check(within(low, -0.08, 0.02), format!("(0.2, 0.05) dNCI={low:.4} in [-0.08, 0.02]")),
        check(high_mu.abs() <= 0.04, format!("(0.8, 0.95) |dNCI|={:.4} <= 0.04", high_mu.abs())),
    ]
}

fn p4_polarization(cells: &mut Cells) -> Vec<Check> {
    CORNERS
        .iter()
        .map(|&(eta, mu)| {
            let (d, _) = cells.delta(bcm(), Variant::Standard, eta, mu, Metric::Rwc);
            let (lo, hi) = if mu < 0.5 { (0.06, 0.20) } else { (-0.03, 0.08) };
            check(within(d, lo, hi), format!("({eta}, {mu}) dRWC={d:.4} in [{lo}, {hi}]"))
        })
        .collect()
}

fn p5_opinion_rewiring(cells: &mut Cells) -> Vec<Check> {
    [(0.8, 0.4), (0.2, 0.25)]
        .iter()
        .map(|&(eta, floor)| {
            let (d, _) = cells.delta(bcm(), Variant::OpinionRewiring, eta, 0.05, Metric::Nci);
            check(d >= floor, format!("({eta}, 0.05) dNCI={d:.4} >= {floor}"))
        })
        .collect()
}

fn p6_susceptibility(cells: &mut Cells) -> Vec<Check> {
    let mut checks = Vec::new();
    for variant in [Susceptibility::Uniform, Susceptibility::PowerLaw] {
        let mut worst = 0.0f64;
        for &(eta, mu) in &CORNERS {
            for metric in Metric::ALL {
                let (base, _) = cells.delta(bcm(), Variant::Standard, eta, mu, metric);
                let (d, _) = cells.delta(bcm(), Variant::Susceptible(variant), eta, mu, metric);
                worst = worst.max((d - base).abs());
            }
        }
        checks.push(check(worst <= 0.05, format!("{variant} max |diff|={worst:.4} <= 0.05")));
    }
    checks
}

fn p7_intervention(cells: &mut Cells) -> Vec<Check> {
    let od = InterventionStrategy::OpinionDiversity;
    let mut checks = Vec::new();
    for xi in [40, 50, 60, 80, 100] {
        let (d, _) = cells.delta(bcm(), Variant::Intervened(od, xi), 0.8, 0.05, Metric::Nci);
        checks.push(check(d <= 0.0, format!("xi={:.1} dNCI={d:.4} <= 0", xi as f64 / 100.0)));
    }
    let (none, _) = cells.delta(bcm(), Variant::Standard, 0.8, 0.05, Metric::Nci);
    let (uniform, _) = cells.delta(
        bcm(),
        Variant::Intervened(InterventionStrategy::Uniform, 50),
        0.8,
        0.05,
        Metric::Nci,
    );
    let (diverse, _) = cells.delta(bcm(), Variant::Intervened(od, 50), 0.8, 0.05, Metric::Nci);
    checks.push(check(
        diverse <= uniform && uniform <= none,
        format!("xi=0.5 {diverse:.4} <= {uniform:.4} <= {none:.4}"),
    ));
    checks
}

fn graph(n: usize, arcs: &[(usize, usize)]) -> OpinionGraph {
    let mut g = OpinionGraph::new(n).unwrap();
    for &(u, v) in arcs {
        g.add_arc(u, v).unwrap();
    }
    g
}

fn p8_oracles() -> Vec<Check> {
    let cycle = graph(2, &[(0, 1), (1, 0)]);
    let p = ppr_scores(&cycle, 0, 0.85, 1e-12).unwrap();
    let ppr_ok = (p[0] - 0.54054).abs() < 1e-6 && (p[1] - 0.45946).abs() < 1e-6;

    let d = ks_statistic(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]).unwrap();

    // u=0 follows a,b,c = 1,2,3; v=4 is followed by b,c,d = 2,3,5
    let jaccard = graph(6, &[(0, 1), (0, 2), (0, 3), (2, 4), (3, 4), (5, 4)]);
    let dji = dji_score(&jaccard, 0, 4);

    let hub = graph(3, &[(0, 1), (0, 2)]);
    let salsa = salsa_authority_scores(&hub, 0, &[0], 0.85).unwrap();
    let salsa_ok = salsa.len() == 2 && salsa.iter().all(|&(_, r)| (r - 0.5).abs() < 1e-6);

    let params = EpistemicParams { gain: 0.05, trials: 16, self_update: false };
    let identity = [0.01, 0.3, 0.5, 0.77, 0.999].iter().all(|&o| {
        let novel = ExperimentOutcome { action: Action::Novel, successes: 8.0 };
        let known = ExperimentOutcome { action: Action::Known, successes: 8.0 };
        epistemic_update(o, &novel, &params) == o && epistemic_update(o, &known, &params) == o
    });

    let b = bcm_update(0.2, 0.3, &BcmParams { confidence: 0.2, convergence: 0.2 });

    vec![
        check(ppr_ok, format!("ppr 2-cycle {:.6}/{:.6}", p[0], p[1])),
        check(d == 1.0 / 3.0, format!("ks D={d}")),
        check(dji == 0.5, format!("dji={dji}")),
        check(salsa_ok, "salsa 0.5/0.5"),
        check(identity, "epistemic k=n/2 identity"),
        check((b - 0.22).abs() < 1e-12, format!("bcm={b}")),
    ]
}

fn p9_properties() -> Vec<Check> {
    let mut checks = Vec::new();

    // full runs stepped by hand
    let g = netgen::generate(&NetgenConfig::new(N, 0.05, 0.8, 5)).unwrap();
    for odm in [bcm(), epistemic()] {
        let mut sim = Simulation::new(g.clone(), SimulationConfig::new(odm, ppr(), 6)).unwrap();
        let (mut conserved, mut bounded, mut budget) = (true, true, true);
        while !sim.is_finished() {
            sim.step().unwrap();
            conserved &= sim.graph().arc_count() == g.arc_count();
            bounded &= sim.graph().opinions().iter().all(|o| (0.0..=1.0).contains(o));
            budget &= sim.recommendations_used() <= sim.max_recommendations();
        }
        let name = odm.name();
        checks.push(check(conserved, format!("{name} arc count conserved")));
        checks.push(check(bounded, format!("{name} opinions in [0, 1] every step")));
        checks.push(check(budget, format!("{name} recs <= R_max ({})", sim.max_recommendations())));
    }

    // normalizer uniformity on fresh sources
    let spec = RecommenderSpec::new(RecommenderKind::Ppr);
    let mut rec = Recommender::new(spec, N).unwrap();
    let mut rng = rng_stream(MASTER_SEED, 0, "acceptance-normalizer");
    let normalizer = rec.fit_normalizer(&g, 5000, &mut rng).unwrap();
    let mut probs = Vec::with_capacity(5000);
    let mut memo: HashMap<usize, Option<f64>> = HashMap::new();
    while probs.len() < 5000 {
        let u = rand::Rng::random_range(&mut rng, 0..N);
        let raw = *memo
            .entry(u)
            .or_insert_with(|| rec.best_candidate(&g, u, &mut rng).unwrap().map(|c| c.raw_score));
        if let Some(raw) = raw {
            probs.push(normalizer.transform(raw));
        }
    }
    let ks = ks_uniform(&probs).unwrap();
    checks.push(check(ks.p_value > 0.01, format!("normalizer KS p={:.3} > 0.01", ks.p_value)));

    // generator calibration and metric bounds over 50 graphs per setting
    let rwc_cfg = RwcConfig::default();
    let mut metric_bounds = true;
    for (mu, eta) in [(0.05, 0.8), (0.35, 0.6), (0.65, 0.4), (0.95, 0.2)] {
        let (mut intra, mut homophily) = (0.0, 0.0);
        for k in 0..50 {
            let net = netgen::generate_detailed(&NetgenConfig::new(N, mu, eta, 1000 + k)).unwrap();
            intra += netgen::intra_community_fraction(&net.graph) / 50.0;
            homophily += netgen::homophily_fraction(&net.graph, &net.community_opinions) / 50.0;
            for nb in [Neighborhood::Out, Neighborhood::Both] {
                metric_bounds &= metrics::nci(&net.graph, nb).value.abs() <= 1.0;
            }
            let mut rng = rng_stream(MASTER_SEED, k, "acceptance-rwc");
            if let Ok(r) = metrics::rwc(&net.graph, &rwc_cfg, &mut rng) {
                metric_bounds &= r.abs() <= 1.0;
            }
        }
        checks.push(check(
            (intra - mu).abs() <= 0.05 && (homophily - eta).abs() <= 0.05,
            format!("mu={mu} intra={intra:.3}, eta={eta} homophily={homophily:.3}"),
        ));
    }
    checks.push(check(metric_bounds, "NCI and RWC within [-1, 1]"));

    // worker-count invariance
    let mut cfg = grid_config(bcm(), Variant::Standard);
    cfg.replicas = 6;
    cfg.simulation.max_steps = Some(200);
    let runs: Vec<CellResult> = [1, 2, 3]
        .iter()
        .map(|&w| {
            cfg.workers = w;
            run_cell_cached(0.8, 0.05, &cfg, &NullArmCache::new()).unwrap()
        })
        .collect();
    checks.push(check(runs.windows(2).all(|w| w[0] == w[1]), "identical results for 1, 2, 3 workers"));
    checks
}

fn main() -> ExitCode {
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| selected.is_empty() || selected.iter().any(|s| s.eq_ignore_ascii_case(id));
    let mut cells = Cells {
        nulls: NullArmCache::new(),
        done: HashMap::new(),
    };

    type Criterion<'a> = (&'static str, &'static str, Box<dyn FnOnce(&mut Cells) -> Vec<Check> + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("P1", "null-model neutrality", Box::new(|_| p1_null_neutrality())),
        ("P2", "echo-chamber amplification", Box::new(p2_echo_chambers)),
        ("P3", "low-homophily null effect", Box::new(p3_low_homophily)),
        ("P4", "polarization", Box::new(p4_polarization)),
        ("P5", "opinion-based rewiring", Box::new(p5_opinion_rewiring)),
        ("P6", "susceptibility robustness", Box::new(p6_susceptibility)),
        ("P7", "intervention reversal", Box::new(p7_intervention)),
        ("P8", "oracle equivalence", Box::new(|_| p8_oracles())),
        ("P9", "property suite", Box::new(|_| p9_properties())),
    ];

    let mut unexpected = Vec::new();
    for (id, title, run) in criteria {
        if !wanted(id) {
            continue;
        }
        let started = Instant::now();
        let checks = run(&mut cells);
        let passed = checks.iter().all(|c| c.ok);
        let detail: Vec<String> = checks
            .iter()
            .map(|c| format!("{}{}", if c.ok { "" } else { "!" }, c.label))
            .collect();
        let note = if !passed && KNOWN_GAPS.contains(&id) { " (known gap)" } else { "" };
        println!(
            "{id} {} {title}{note} [{:.0?}]: {}",
            if passed { "PASS" } else { "FAIL" },
            started.elapsed(),
            detail.join("; ")
        );
        if !passed && !KNOWN_GAPS.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {}", unexpected.join(" "));
        ExitCode::FAILURE
    }
}
