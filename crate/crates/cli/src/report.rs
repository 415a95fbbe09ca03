//! Report documents and their table / CSV / JSON renderings.

use std::fmt::Write as _;

use mt_core::auction::AuctionOutcome;
use mt_core::dominance::DominanceVerdict;
use mt_core::scalper::ScalperDecision;
use mt_core::simulation::SummaryStats;
use mt_core::theorems::SweepReport;
use mt_core::welfare::{ExcessReport, WelfareReport};
use mt_core::Money;
use serde::{Deserialize, Serialize};

use crate::args::Format;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemReport {
    pub outcome: AuctionOutcome,
    pub rents: Money,
    /// Present when the bid file carries valuations.
    pub welfare: Option<WelfareReport>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionReport {
    pub marginal_price: SystemReport,
    pub fcfs: SystemReport,
    pub excess_rents: Money,
    pub excess: Option<ExcessReport>,
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn system_table(out: &mut String, title: &str, r: &SystemReport) {
    let o = &r.outcome;
    let _ = writeln!(
        out,
        "{title}: price {}  sold {}/{}  unsold {}  rents {}",
        o.price,
        o.units_sold(),
        o.capacity,
        o.units_unsold,
        r.rents
    );
    if let Some(w) = &r.welfare {
        let _ = writeln!(out, "  valuation {}  consumer surplus {}", w.winner_valuation_sum, w.consumer_surplus);
    }
    let _ = writeln!(out, "  {:<16} {:>6} {:>12}", "bidder", "seq", "bid");
    for w in &o.winners {
        let _ = writeln!(out, "  {:<16} {:>6} {:>12}", w.bidder.as_str(), w.seq, w.amount.to_string());
    }
}

pub fn auction(report: &AuctionReport, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Csv => {
            let mut out = String::from("system,bidder_id,seq,amount,price\n");
            for (name, r) in [("marginal_price", &report.marginal_price), ("fcfs", &report.fcfs)] {
                for w in &r.outcome.winners {
                    let _ = writeln!(out, "{name},{},{},{},{}", w.bidder, w.seq, w.amount, r.outcome.price);
                }
            }
            out
        }
        Format::Table => {
            let mut out = String::new();
            system_table(&mut out, "marginal price", &report.marginal_price);
            system_table(&mut out, "first come first serve", &report.fcfs);
            let _ = writeln!(out, "excess rents {}", report.excess_rents);
            if let Some(e) = &report.excess {
                let _ = writeln!(
                    out,
                    "excess valuation {}  excess consumer surplus {}",
                    e.excess_valuation, e.excess_consumer_surplus
                );
            }
            out
        }
    }
}

pub fn summary(stats: &SummaryStats, format: Format) -> String {
    match format {
        Format::Json => json(stats),
        Format::Csv => {
            let mut buf = Vec::new();
            stats.write_csv(&mut buf).expect("writing to memory");
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "K={}  N={}  floor {}  runs {}",
                stats.capacity, stats.bidders, stats.floor, stats.runs
            );
            let _ = writeln!(out, "{:<26} {:>14} {:>14} {:>14} {:>12}", "", "min", "mean", "max", "per person");
            for (name, m) in stats.rows() {
                let _ = writeln!(
                    out,
                    "{:<26} {:>14} {:>14.2} {:>14} {:>12.2}",
                    name,
                    m.min.to_string(),
                    m.mean,
                    m.max.to_string(),
                    m.per_person_mean
                );
            }
            out
        }
    }
}

pub fn dominance(verdict: &DominanceVerdict, format: Format) -> String {
    match format {
        Format::Json => json(verdict),
        Format::Csv => {
            let mut out = String::from("opponents,deviant_bid,truthful_payoff,deviant_payoff\n");
            for v in &verdict.violations {
                let opponents: Vec<String> = v.opponents.iter().map(Money::to_string).collect();
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    opponents.join(" "),
                    v.deviant_bid,
                    v.truthful_payoff,
                    v.deviant_payoff
                );
            }
            out
        }
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "truthful_dominates: {}", verdict.truthful_dominates);
            let _ = writeln!(out, "comparisons: {}", verdict.profiles_checked);
            let _ = writeln!(out, "strict advantages: {}", verdict.strict_advantages);
            let _ = writeln!(out, "violations: {}", verdict.violations.len());
            for v in verdict.violations.iter().take(10) {
                let opponents: Vec<String> = v.opponents.iter().map(Money::to_string).collect();
                let _ = writeln!(
                    out,
                    "  opponents [{}]: bidding {} pays off {} vs {} truthful",
                    opponents.join(", "),
                    v.deviant_bid,
                    v.deviant_payoff,
                    v.truthful_payoff
                );
            }
            out
        }
    }
}

pub fn sweep(report: &SweepReport, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Csv => format!(
            "instances,losers_checked,rents_violations,valuation_violations,scalper_violations\n{},{},{},{},{}\n",
            report.instances,
            report.losers_checked,
            report.rents_violations,
            report.valuation_violations,
            report.scalper_violations
        ),
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "instances: {}", report.instances);
            let _ = writeln!(out, "losers checked: {}", report.losers_checked);
            let _ = writeln!(out, "rents ordering violations: {}", report.rents_violations);
            let _ = writeln!(out, "valuation ordering violations: {}", report.valuation_violations);
            let _ = writeln!(out, "scalper purchases by losers: {}", report.scalper_violations);
            for v in &report.examples {
                let _ = writeln!(out, "  {}: {}", v.property, v.detail);
            }
            out
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalperReport {
    pub price: Money,
    pub markup: f64,
    pub decisions: Vec<ScalperDecision>,
}

pub fn scalper(report: &ScalperReport, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Csv => {
            let mut out = String::from("bidder_id,valuation,scalper_price,surplus,buys\n");
            for d in &report.decisions {
                let _ = writeln!(out, "{},{},{},{},{}", d.bidder, d.valuation, d.scalper_price, d.surplus_at_scalper, d.buys);
            }
            out
        }
        Format::Table => {
            let mut out = String::new();
            let buyers = report.decisions.iter().filter(|d| d.buys).count();
            let scalper_price = report.decisions.first().map(|d| d.scalper_price);
            let _ = writeln!(
                out,
                "clearing price {}  markup {}  scalper price {}",
                report.price,
                report.markup,
                scalper_price.map_or_else(|| "-".to_string(), |p| p.to_string())
            );
            let _ = writeln!(out, "losers: {}  would buy: {}", report.decisions.len(), buyers);
            for d in report.decisions.iter().filter(|d| d.buys) {
                let _ = writeln!(out, "  {} values the ticket at {}", d.bidder, d.valuation);
            }
            out
        }
    }
}
