//! Randomized protocol sessions for invariant checking.
//!
//! A session draws a random parameter set and a random stream of commands,
//! valid and invalid alike, applies them, and after every step checks the
//! state's structural invariants, that phases only move forward, and that a
//! rejected command leaves the state untouched. The session ends by
//! replaying the command log and comparing the result.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{AcceptAll, CollateralRatio, Command, DenyList, IdentityVerifier, Phase, ProtocolParams, ProtocolState};
use crate::auction::{BidderId, TieBreak};
use crate::money::Money;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SessionStats {
    pub steps: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub forfeits: usize,
    pub rebates: usize,
    pub final_phase: Option<Phase>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionFailure {
    pub seed: u64,
    pub step: usize,
    pub command: Option<Command>,
    pub reason: String,
}

fn random_params(rng: &mut impl Rng) -> ProtocolParams {
    ProtocolParams {
        floor: Money::whole(rng.random_range(0..50)),
        capacity: rng.random_range(1..6),
        collateral_ratio: CollateralRatio::new([1.0, 0.5, 0.4, 0.25][rng.random_range(0..4)]).expect("valid ratio"),
        settlement_deadline: rng.random_range(1..20),
        disclosure_enabled: rng.random_bool(0.7),
        rebate_per_ticket: Money::whole(rng.random_range(0..3) * 5),
    }
}

fn random_command(rng: &mut impl Rng, state: &ProtocolState, tokens: &[BidderId]) -> Command {
    let token = tokens[rng.random_range(0..tokens.len())].clone();
    let price_hint = state.outcome().map_or(Money::whole(50), |o| o.price);
    match rng.random_range(0..100) {
        0..=14 => Command::Register {
            token,
            units: rng.random_range(0..3),
        },
        15..=19 => Command::Open,
        20..=54 => {
            let amount = Money::from_cents(rng.random_range(0..10_000));
            let ratio = state.params().collateral_ratio.required_for(amount);
            let collateral = match rng.random_range(0..4) {
                0 => Money::from_cents(rng.random_range(0..=amount.cents().max(1))),
                1 => amount,
                _ => ratio + Money::from_cents(rng.random_range(0..500)),
            };
            Command::Bid {
                token,
                amount,
                collateral,
            }
        }
        55..=57 => Command::Disclose,
        58..=63 => Command::Close {
            tie_break: if rng.random_bool(0.5) {
                TieBreak::Chronological
            } else {
                TieBreak::Lottery { seed: rng.random() }
            },
        },
        64..=69 => Command::Settle,
        70..=81 => {
            let due = state
                .settlement()
                .and_then(|s| s.winners.iter().find(|w| w.token == token))
                .map_or(price_hint, |w| w.amount_due);
            let amount = if rng.random_bool(0.8) { due } else { due + Money::from_cents(1) };
            Command::Pay { token, amount }
        }
        82..=89 => Command::Expire {
            now: state.now() + rng.random_range(0..15),
        },
        _ => Command::Advance {
            to: if rng.random_bool(0.9) {
                state.now() + rng.random_range(0..8)
            } else {
                state.now().saturating_sub(1)
            },
        },
    }
}

fn phase_rank(phase: Phase) -> u8 {
    match phase {
        Phase::Announced => 0,
        Phase::Open => 1,
        Phase::Closed => 2,
        Phase::Cleared => 3,
        Phase::Settled => 4,
    }
}

/// Runs one seeded session of `steps` random commands.
pub fn run_random_session(seed: u64, steps: usize) -> Result<SessionStats, SessionFailure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = random_params(&mut rng);
    let tokens: Vec<BidderId> = (0..rng.random_range(2..12)).map(|i| BidderId::new(format!("t{i}"))).collect();
    let verifier: Arc<dyn IdentityVerifier> = if rng.random_bool(0.3) {
        Arc::new(DenyList::new([tokens[0].clone()]))
    } else {
        Arc::new(AcceptAll)
    };
    let fail = |step: usize, command: Option<Command>, reason: String| SessionFailure {
        seed,
        step,
        command,
        reason,
    };

    let mut state = ProtocolState::with_verifier(params.clone(), verifier.clone()).map_err(|e| fail(0, None, e.to_string()))?;
    let mut stats = SessionStats::default();
    for step in 0..steps {
        let command = random_command(&mut rng, &state, &tokens);
        let before_phase = state.phase();
        let before_view = state.ledger_view();
        let before_log = state.command_log().len();
        match state.apply(command.clone()) {
            Ok(response) => {
                stats.accepted += 1;
                if let super::Response::Expired(report) = &response {
                    stats.forfeits += report.forfeited.len();
                }
            }
            Err(_) => {
                stats.rejected += 1;
                if state.ledger_view() != before_view || state.command_log().len() != before_log {
                    return Err(fail(step, Some(command), "rejected command changed state".into()));
                }
            }
        }
        stats.steps += 1;
        if phase_rank(state.phase()) < phase_rank(before_phase) {
            return Err(fail(step, Some(command), format!("phase moved back from {before_phase:?}")));
        }
        state.check_invariants().map_err(|reason| fail(step, Some(command.clone()), reason))?;
    }

    stats.rebates = state
        .ledger()
        .journal()
        .iter()
        .filter(|e| e.kind == super::EntryKind::Rebate)
        .count();
    stats.final_phase = Some(state.phase());

    let replayed = ProtocolState::replay(params, verifier, state.command_log().to_vec())
        .map_err(|(i, e)| fail(steps, None, format!("replay rejected logged command {i}: {e}")))?;
    if replayed.ledger_view() != state.ledger_view() || replayed.outcome() != state.outcome() {
        return Err(fail(steps, None, "replay diverged".into()));
    }
    if replayed.settlement() != state.settlement() {
        return Err(fail(steps, None, "replayed settlement diverged".into()));
    }
    Ok(stats)
}
