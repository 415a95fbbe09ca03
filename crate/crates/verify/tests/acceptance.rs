//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.
//! Lines tagged `info` are diagnostics and never affect the verdict.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use mt_core::agents::ValuationDistribution;
use mt_core::auction::{clear_fcfs, clear_marginal_price, AuctionOutcome, BidBook};
use mt_core::dominance::{check_weak_dominance_with_rule, DominanceScenario, MarginRule};
use mt_core::protocol::{run_random_session, Command, LedgerView, ProtocolParams, ProtocolState};
use mt_core::simulation::{run_all, summarize, RunMetrics, ScenarioConfig, SummaryStats};
use mt_core::theorems::{theorem_sweep, SweepConfig, SweepReport};
use mt_core::welfare::economic_rents;
use mt_core::{Money, TieBreak};
use serde_json::{json, Value};

/// Collects verdicts so they print in criterion order after all checks run.
#[derive(Default)]
struct Gate {
    lines: Vec<(u8, bool, String)>,
    notes: Vec<String>,
}

impl Gate {
    fn report(&mut self, id: u8, pass: bool, detail: String) {
        self.lines.push((id, pass, detail));
    }

    fn info(&mut self, detail: String) {
        self.notes.push(detail);
    }
}

const EXAMPLE: [i64; 6] = [35, 15, 40, 20, 25, 20];

fn example_book(floor: i64) -> BidBook {
    BidBook::from_amounts(Money::whole(floor), 3, EXAMPLE.map(Money::whole)).unwrap()
}

fn seqs(o: &AuctionOutcome) -> BTreeSet<u64> {
    o.winning_seqs().into_iter().collect()
}

fn set(xs: &[u64]) -> BTreeSet<u64> {
    xs.iter().copied().collect()
}

fn criterion_1(gate: &mut Gate) {
    let book = example_book(20);
    let start = Instant::now();
    let mpa = clear_marginal_price(&book, TieBreak::Chronological);
    let fcfs = clear_fcfs(&book);
    let elapsed = start.elapsed();
    let excess = economic_rents(&mpa) - economic_rents(&fcfs);
    let pass = mpa.price == Money::whole(25)
        && seqs(&mpa) == set(&[0, 2, 4])
        && economic_rents(&mpa) == Money::whole(75)
        && seqs(&fcfs) == set(&[0, 2, 3])
        && economic_rents(&fcfs) == Money::whole(60)
        && excess == Money::whole(15)
        && elapsed < Duration::from_millis(1);
    gate.report(
        1,
        pass,
        format!(
            "price {} winners {:?} rents {} | fcfs winners {:?} rents {} | excess {} in {:?}",
            mpa.price,
            seqs(&mpa).iter().map(|s| s + 1).collect::<Vec<_>>(),
            economic_rents(&mpa),
            seqs(&fcfs).iter().map(|s| s + 1).collect::<Vec<_>>(),
            economic_rents(&fcfs),
            excess,
            elapsed
        ),
    );
}

fn criterion_2(gate: &mut Gate) {
    let book = example_book(30);
    let mpa = clear_marginal_price(&book, TieBreak::Chronological);
    let fcfs = clear_fcfs(&book);
    let pass = mpa.price == Money::whole(30)
        && fcfs.price == Money::whole(30)
        && seqs(&mpa) == set(&[0, 2])
        && seqs(&fcfs) == set(&[0, 2])
        && economic_rents(&mpa) == Money::whole(60)
        && economic_rents(&fcfs) == Money::whole(60)
        && mpa.units_unsold == 1;
    gate.report(
        2,
        pass,
        format!(
            "prices {}/{} winners {:?}/{:?} rents {}/{} unsold {}",
            mpa.price,
            fcfs.price,
            seqs(&mpa).iter().map(|s| s + 1).collect::<Vec<_>>(),
            seqs(&fcfs).iter().map(|s| s + 1).collect::<Vec<_>>(),
            economic_rents(&mpa),
            economic_rents(&fcfs),
            mpa.units_unsold
        ),
    );
}

struct Target {
    capacity: usize,
    price: f64,
    rents: f64,
    valuation: f64,
    surplus: f64,
    tol: f64,
    surplus_tol: f64,
    budget: Duration,
}

fn table_config(capacity: usize, stddev: f64) -> ScenarioConfig {
    ScenarioConfig {
        capacity,
        demand_ratio: 1.5,
        floor: Money::whole(100),
        dist: ValuationDistribution::Normal { mean: 125.0, stddev },
        runs: 1000,
        ..ScenarioConfig::default()
    }
}

fn simulate(config: &ScenarioConfig) -> (Vec<RunMetrics>, SummaryStats, Duration) {
    let start = Instant::now();
    let runs = run_all(config).unwrap();
    let stats = summarize(config, &runs);
    (runs, stats, start.elapsed())
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn describe(s: &SummaryStats) -> String {
    format!(
        "price {:.2} rents {:.2} valuation {:.2} surplus {:.2}",
        s.ticket_price.mean,
        s.excess_rents.per_person_mean,
        s.excess_valuation.per_person_mean,
        s.excess_consumer_surplus.per_person_mean
    )
}

fn criteria_3_and_7(gate: &mut Gate) {
    let mut targets = vec![
        Target {
            capacity: 100,
            price: 111.91,
            rents: 11.91,
            valuation: 5.42,
            surplus: -6.49,
            tol: 0.5,
            surplus_tol: 0.7,
            budget: Duration::from_secs(10),
        },
        Target {
            capacity: 1000,
            price: 111.57,
            rents: 11.57,
            valuation: 5.54,
            surplus: -6.03,
            tol: 0.3,
            surplus_tol: 0.4,
            budget: Duration::from_secs(10),
        },
    ];
    let large = std::env::var_os("MT_ACCEPT_LARGE").is_some();
    if large {
        targets.push(Target {
            capacity: 10_000,
            price: 111.57,
            rents: 11.57,
            valuation: 5.54,
            surplus: -6.03,
            tol: 0.15,
            surplus_tol: 0.2,
            budget: Duration::from_secs(120),
        });
    }

    let mut all_pass = true;
    let mut details = Vec::new();
    let mut identity_ok = true;
    let mut identity_runs = 0;
    let mut worst_aggregate: f64 = 0.0;
    for t in &targets {
        let (runs, s, elapsed) = simulate(&table_config(t.capacity, 25.0));
        let pass = within(s.ticket_price.mean, t.price, t.tol)
            && within(s.excess_rents.per_person_mean, t.rents, t.tol)
            && within(s.excess_valuation.per_person_mean, t.valuation, t.tol)
            && within(s.excess_consumer_surplus.per_person_mean, t.surplus, t.surplus_tol)
            && elapsed <= t.budget;
        all_pass &= pass;
        details.push(format!(
            "K={}: {} (target {:.2}/{:.2}/{:.2}/{:.2} ±{}) in {:.1?}",
            t.capacity,
            describe(&s),
            t.price,
            t.rents,
            t.valuation,
            t.surplus,
            t.tol,
            elapsed
        ));
        for r in &runs {
            identity_ok &= r.excess_consumer_surplus == r.excess_valuation - r.excess_rents;
            identity_runs += 1;
        }
        let gap = s.excess_consumer_surplus.per_person_mean
            - (s.excess_valuation.per_person_mean - s.excess_rents.per_person_mean);
        worst_aggregate = worst_aggregate.max(gap.abs());
    }
    if !large {
        details.push("K=10000 optional, set MT_ACCEPT_LARGE=1".into());
    }
    gate.report(3, all_pass, details.join("; "));

    for capacity in [100, 1000] {
        let (_, s, _) = simulate(&table_config(capacity, 31.25));
        gate.info(format!("Normal(125, 31.25), K={capacity}: {}", describe(&s)));
    }

    gate.report(
        7,
        identity_ok && worst_aggregate <= 0.01,
        format!("{identity_runs} runs exact in cents; worst aggregate gap {worst_aggregate:.2e}"),
    );
}

fn criterion_4(gate: &mut Gate) {
    let scenarios = [
        (2usize, 1usize, (0..=10).map(Money::whole).collect::<Vec<_>>()),
        (4, 2, [0, 5, 10, 15, 20].map(Money::whole).to_vec()),
    ];
    let start = Instant::now();
    let mut details = Vec::new();
    let mut total_violations = 0;
    let mut paper_rule_violations = 0;
    for (n, k, grid) in &scenarios {
        let mut violations = 0;
        let mut checked = 0;
        let mut example = None;
        for &v in grid {
            let scenario = DominanceScenario {
                n_bidders: *n,
                capacity: *k,
                floor: Money::ZERO,
                grid: grid.clone(),
                focal_valuation: v,
            };
            let verdict = check_weak_dominance_with_rule(&scenario, TieBreak::Chronological, MarginRule::WinsAtPrice).unwrap();
            violations += verdict.violations.len();
            checked += verdict.profiles_checked;
            if example.is_none() {
                example = verdict.violations.first().map(|x| (v, x.clone()));
            }
            let alt = check_weak_dominance_with_rule(&scenario, TieBreak::Chronological, MarginRule::LosesAtPrice).unwrap();
            paper_rule_violations += alt.violations.len();
        }
        total_violations += violations;
        let mut d = format!("n={n} K={k}: {violations} violations in {checked} comparisons");
        if let Some((v, x)) = example {
            d.push_str(&format!(
                " (e.g. v={v}, opponents {:?}: bid {} earns {} vs {})",
                x.opponents.iter().map(Money::to_string).collect::<Vec<_>>(),
                x.deviant_bid,
                x.deviant_payoff,
                x.truthful_payoff
            ));
        }
        details.push(d);
    }
    let elapsed = start.elapsed();
    gate.report(
        4,
        total_violations == 0 && elapsed < Duration::from_secs(30),
        format!("{} in {elapsed:.1?}", details.join("; ")),
    );
    gate.info(format!(
        "same scenarios scoring a bid at the price as losing: {paper_rule_violations} violations"
    ));
}

fn criteria_5_and_6(gate: &mut Gate) {
    let start = Instant::now();
    let report: SweepReport = theorem_sweep(&SweepConfig::default()).unwrap();
    let elapsed = start.elapsed();
    gate.report(
        5,
        report.instances == 10_000
            && report.rents_violations == 0
            && report.valuation_violations == 0
            && elapsed < Duration::from_secs(10),
        format!(
            "{} instances: rents violations {}, valuation violations {} in {elapsed:.1?}",
            report.instances, report.rents_violations, report.valuation_violations
        ),
    );
    gate.report(
        6,
        report.scalper_violations == 0 && report.losers_checked > 0,
        format!(
            "{} loser checks across markups 1.0/1.1/1.5: {} would buy",
            report.losers_checked, report.scalper_violations
        ),
    );
}

fn criterion_8(gate: &mut Gate) {
    let mut failures = Vec::new();
    let mut forfeits = 0;
    let mut rebates = 0;
    let mut steps = 0;
    for seed in 0..1000 {
        match run_random_session(seed, 150) {
            Ok(s) => {
                forfeits += s.forfeits;
                rebates += s.rebates;
                steps += s.steps;
            }
            Err(f) => failures.push(f),
        }
    }
    gate.report(
        8,
        failures.is_empty() && forfeits > 0 && rebates > 0,
        format!(
            "1000 sessions, {steps} steps, {forfeits} forfeits, {rebates} rebates, {} violations{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(" (first: seed {} step {}: {})", f.seed, f.step, f.reason))
        ),
    );
}

async fn call(client: &reqwest::Client, post: bool, url: String, body: Option<Value>) -> Value {
    let req = if post { client.post(url) } else { client.get(url) };
    let req = match body {
        Some(b) => req.json(&b),
        None => req,
    };
    req.send().await.unwrap().json().await.unwrap()
}

async fn service_checks() -> Result<String, String> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(mt_service::serve(listener, mt_service::AppState::new(), std::future::pending()));
    let client = reqwest::Client::new();

    // scripted example over the wire
    let created = call(&client, true, format!("{base}/auctions"), Some(json!({"floor": 20, "capacity": 3}))).await;
    let a = format!("{base}/auctions/{}", created["payload"]["id"]);
    let mut lib = ProtocolState::new(ProtocolParams {
        floor: Money::whole(20),
        capacity: 3,
        ..ProtocolParams::default()
    })
    .unwrap();
    for i in 1..=6 {
        call(&client, true, format!("{a}/identities"), Some(json!({"token": i.to_string()}))).await;
        lib.apply(Command::Register {
            token: i.to_string().into(),
            units: 1,
        })
        .unwrap();
    }
    call(&client, true, format!("{a}/open"), None).await;
    lib.apply(Command::Open).unwrap();
    for (i, b) in EXAMPLE.iter().enumerate() {
        call(&client, true, format!("{a}/bids"), Some(json!({"token": (i + 1).to_string(), "amount": b, "collateral": b}))).await;
        let _ = lib.apply(Command::Bid {
            token: (i + 1).to_string().into(),
            amount: Money::whole(*b),
            collateral: Money::whole(*b),
        });
    }
    call(&client, true, format!("{a}/close"), None).await;
    lib.apply(Command::Close {
        tie_break: TieBreak::Chronological,
    })
    .unwrap();
    call(&client, true, format!("{a}/settle"), None).await;
    lib.apply(Command::Settle).unwrap();
    let outcome = call(&client, false, format!("{a}/outcome"), None).await;
    let ledger = call(&client, false, format!("{a}/ledger"), None).await;
    let same_outcome = serde_json::to_string(&outcome["payload"]).unwrap()
        == serde_json::to_string(&serde_json::to_value(lib.outcome().unwrap()).unwrap()).unwrap();
    let same_ledger = serde_json::to_string(&ledger["payload"]).unwrap()
        == serde_json::to_string(&serde_json::to_value(lib.ledger_view()).unwrap()).unwrap();
    if !(same_outcome && same_ledger) {
        return Err(format!("wire/library mismatch: outcome {same_outcome}, ledger {same_ledger}"));
    }
    let price = outcome["payload"]["price"].clone();

    // concurrent flood
    const N: usize = 1000;
    let created = call(&client, true, format!("{base}/auctions"), Some(json!({"floor": 1, "capacity": 100}))).await;
    let a = format!("{base}/auctions/{}", created["payload"]["id"]);
    for i in 0..N {
        call(&client, true, format!("{a}/identities"), Some(json!({"token": format!("t{i}")}))).await;
    }
    call(&client, true, format!("{a}/open"), None).await;
    let tasks: Vec<_> = (0..N)
        .map(|i| {
            let client = client.clone();
            let url = format!("{a}/bids");
            tokio::spawn(async move {
                let amount = 1 + (i * 37) % 200;
                call(&client, true, url, Some(json!({"token": format!("t{i}"), "amount": amount, "collateral": amount})))
                    .await["payload"]["seq"]
                    .as_u64()
            })
        })
        .collect();
    let mut seqs = BTreeSet::new();
    for t in tasks {
        match t.await.unwrap() {
            Some(seq) if seqs.insert(seq) => {}
            other => return Err(format!("bad or duplicate seq {other:?}")),
        }
    }
    if seqs != (0..N as u64).collect::<BTreeSet<_>>() {
        return Err("seqs are not 0..N".into());
    }
    call(&client, true, format!("{a}/close"), None).await;
    call(&client, true, format!("{a}/settle"), None).await;
    let view: LedgerView = serde_json::from_value(call(&client, false, format!("{a}/ledger"), None).await["payload"].clone()).unwrap();
    if !(view.totals.is_conserved() && view.totals.held == Money::ZERO) {
        return Err(format!("ledger not conserved: {:?}", view.totals));
    }
    Ok(format!(
        "example over HTTP identical to library (price {price}); {N} concurrent bids got unique seqs 0..{}; ledger conserved",
        N - 1
    ))
}

fn criterion_9(gate: &mut Gate) {
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(8).enable_all().build().unwrap();
    match runtime.block_on(service_checks()) {
        Ok(detail) => gate.report(9, true, detail),
        Err(detail) => gate.report(9, false, detail),
    }
}

fn main() {
    let mut gate = Gate::default();
    criterion_1(&mut gate);
    criterion_2(&mut gate);
    criteria_3_and_7(&mut gate);
    criterion_4(&mut gate);
    criteria_5_and_6(&mut gate);
    criterion_8(&mut gate);
    criterion_9(&mut gate);
    gate.lines.sort_by_key(|(id, _, _)| *id);
    for (id, pass, detail) in &gate.lines {
        println!("criterion {id}: {} — {detail}", if *pass { "PASS" } else { "FAIL" });
    }
    for note in &gate.notes {
        println!("info: {note}");
    }
    let failed: Vec<u8> = gate.lines.iter().filter(|(_, pass, _)| !pass).map(|(id, _, _)| *id).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
