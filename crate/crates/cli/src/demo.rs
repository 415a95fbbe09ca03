//! Scripted protocol sessions.

use std::fmt::Write as _;

use mt_core::protocol::{Command, LedgerView, ProtocolError, ProtocolParams, ProtocolState, Response};
use mt_core::{Money, TieBreak};
use serde::{Deserialize, Serialize};

use crate::args::Format;
use crate::report::json;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(flatten)]
    pub command: Command,
    /// Error code this step is expected to fail with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub params: ProtocolParams,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transition {
    pub step: usize,
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<Response>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
    /// True when the step did what the script expected.
    pub as_expected: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub transitions: Vec<Transition>,
    pub ledger: LedgerView,
    pub unexpected: Vec<usize>,
}

/// Six bidders from the worked example: floor 20, three tickets, full collateral.
pub fn example_script(rebate: Money) -> Script {
    let bids = [35, 15, 40, 20, 25, 20];
    let mut steps: Vec<Step> = (1..=bids.len())
        .map(|i| Step {
            command: Command::Register {
                token: format!("bidder-{i}").into(),
                units: 1,
            },
            expect_error: None,
        })
        .collect();
    steps.push(Step {
        command: Command::Open,
        expect_error: None,
    });
    for (i, &b) in bids.iter().enumerate() {
        steps.push(Step {
            command: Command::Bid {
                token: format!("bidder-{}", i + 1).into(),
                amount: Money::whole(b),
                collateral: Money::whole(b),
            },
            expect_error: (b < 20).then(|| "BelowFloor".to_string()),
        });
    }
    for command in [
        Command::Disclose,
        Command::Close {
            tie_break: TieBreak::Chronological,
        },
        Command::Settle,
    ] {
        steps.push(Step {
            command,
            expect_error: None,
        });
    }
    Script {
        params: ProtocolParams {
            floor: Money::whole(20),
            capacity: 3,
            rebate_per_ticket: rebate,
            ..ProtocolParams::default()
        },
        steps,
    }
}

pub fn run(script: &Script) -> Result<Transcript, ProtocolError> {
    let mut state = ProtocolState::new(script.params.clone())?;
    let mut transitions = Vec::with_capacity(script.steps.len());
    let mut unexpected = Vec::new();
    for (i, step) in script.steps.iter().enumerate() {
        let result = state.apply(step.command.clone());
        let t = match result {
            Ok(response) => Transition {
                step: i,
                command: step.command.clone(),
                response: Some(response),
                error: None,
                error_code: None,
                as_expected: step.expect_error.is_none(),
            },
            Err(e) => Transition {
                step: i,
                command: step.command.clone(),
                response: None,
                error: Some(e.to_string()),
                error_code: Some(e.code().to_string()),
                as_expected: step.expect_error.as_deref() == Some(e.code()),
            },
        };
        if !t.as_expected {
            unexpected.push(i);
        }
        transitions.push(t);
    }
    Ok(Transcript {
        transitions,
        ledger: state.ledger_view(),
        unexpected,
    })
}

fn describe(command: &Command) -> String {
    serde_json::to_string(command).expect("commands serialize")
}

pub fn render(t: &Transcript, format: Format) -> String {
    match format {
        Format::Json => json(t),
        Format::Csv => {
            let mut out = String::from("index,at,kind,identity,amount\n");
            for e in &t.ledger.journal {
                let kind = serde_json::to_value(e.kind).expect("kind serializes");
                let _ = writeln!(out, "{},{},{},{},{}", e.index, e.at, kind.as_str().unwrap_or(""), e.identity, e.amount);
            }
            out
        }
        Format::Table => {
            let mut out = String::new();
            for tr in &t.transitions {
                let mark = if tr.as_expected { " " } else { "!" };
                let result = match (&tr.response, &tr.error) {
                    (Some(r), _) => serde_json::to_string(r).expect("responses serialize"),
                    (None, Some(e)) => format!("rejected: {e}"),
                    _ => String::new(),
                };
                let _ = writeln!(out, "{mark}{:>3} {}\n       -> {}", tr.step, describe(&tr.command), result);
            }
            let totals = &t.ledger.totals;
            let _ = writeln!(
                out,
                "ledger: deposits {}  refunds {}  payments {}  rebates {}  forfeited {}  held {}",
                totals.deposits, totals.refunds, totals.payments, totals.rebates, totals.forfeited, totals.held
            );
            for (id, balance) in &t.ledger.balances {
                if *balance != Money::ZERO {
                    let _ = writeln!(out, "  {id} holds {balance}");
                }
            }
            if !t.unexpected.is_empty() {
                let _ = writeln!(out, "unexpected outcome at steps {:?}", t.unexpected);
            }
            out
        }
    }
}
