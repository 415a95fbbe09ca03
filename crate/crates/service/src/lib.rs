//! HTTP facade over [`mt_core::protocol`].
//!
//! Each auction is a [`ProtocolState`] behind its own mutex; every mutation
//! goes through that single writer, so the order in which bids acquire the
//! lock is their chronological order. Reads take a snapshot under the same
//! lock. When a journal directory is configured, accepted commands are
//! appended to disk before the response is sent.

mod envelope;
mod journal;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, State};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::Router;
use mt_core::auction::{AuctionOutcome, BidderId, TieBreak};
use mt_core::protocol::{
    Command, LedgerView, Phase, ProtocolError, ProtocolParams, ProtocolState, Response, SettlementReport,
};
use mt_core::Money;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub use envelope::{ApiEnvelope, ApiError, Status};
pub use journal::{Journal, JournalError};

type Shared = Arc<Mutex<ProtocolState>>;

#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Default)]
struct Inner {
    auctions: RwLock<HashMap<u64, Shared>>,
    next_id: AtomicU64,
    journal: Option<Journal>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// State backed by a journal directory; previously journaled auctions are
    /// replayed before the state is returned.
    pub fn with_journal(journal: Journal) -> Result<Self, JournalError> {
        let restored = journal.restore()?;
        let next = restored.last().map_or(0, |(id, _)| id + 1);
        let auctions = restored
            .into_iter()
            .map(|(id, state)| (id, Arc::new(Mutex::new(state))))
            .collect();
        tracing::info!(next_id = next, "restored auctions from journal");
        Ok(AppState {
            inner: Arc::new(Inner {
                auctions: RwLock::new(auctions),
                next_id: AtomicU64::new(next),
                journal: Some(journal),
            }),
        })
    }

    pub fn create(&self, params: ProtocolParams) -> Result<(u64, Phase), ApiError> {
        let state = ProtocolState::new(params.clone())?;
        let id = self.inner.next_id.fetch_add(1, Ordering::SeqCst);
        if let Some(journal) = &self.inner.journal {
            journal.create(id, &params).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        let phase = state.phase();
        self.inner
            .auctions
            .write()
            .expect("auction map poisoned")
            .insert(id, Arc::new(Mutex::new(state)));
        tracing::info!(id, "auction created");
        Ok((id, phase))
    }

    fn auction(&self, id: u64) -> Result<Shared, ApiError> {
        self.inner
            .auctions
            .read()
            .expect("auction map poisoned")
            .get(&id)
            .cloned()
            .ok_or(ApiError::unknown_auction(id))
    }

    /// Applies one command through the auction's single writer.
    pub fn apply(&self, id: u64, command: Command) -> Result<Response, ApiError> {
        let auction = self.auction(id)?;
        let mut state = auction.lock().expect("auction state poisoned");
        let logged = state.command_log().len();
        let response = state.apply(command)?;
        if let Some(journal) = &self.inner.journal {
            if let Err(e) = journal.append(id, &state.command_log()[logged..]) {
                tracing::error!(id, error = %e, "journal append failed");
                return Err(ApiError::internal(e.to_string()));
            }
        }
        Ok(response)
    }

    /// Runs a read-only closure against a consistent snapshot.
    pub fn read<T>(&self, id: u64, f: impl FnOnce(&ProtocolState) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let auction = self.auction(id)?;
        let state = auction.lock().expect("auction state poisoned");
        f(&state)
    }
}

/// Auction id from the path; anything unparsable is an unknown auction.
struct AuctionId(u64);

impl<S: Send + Sync> FromRequestParts<S> for AuctionId {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        let Path(raw) = Path::<String>::from_request_parts(parts, state)
            .await
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        raw.parse()
            .map(AuctionId)
            .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "AuctionNotFound", format!("no auction with id {raw}")))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
    pub phase: Phase,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentityBody {
    token: BidderId,
    #[serde(default = "one")]
    units: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BidBody {
    token: BidderId,
    amount: Money,
    collateral: Money,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CloseBody {
    tie_break: TieBreak,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PaymentBody {
    token: BidderId,
    amount: Money,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpireBody {
    now: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClockBody {
    to: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub id: u64,
    pub phase: Phase,
    pub now: u64,
    pub params: ProtocolParams,
    pub bids_received: usize,
    pub identities: usize,
}

/// Parses a JSON body; an empty body reads as `{}`.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(e.to_string()))
}

type ApiResult<T> = Result<ApiEnvelope<T>, ApiError>;

async fn health() -> ApiEnvelope<&'static str> {
    ApiEnvelope::ok("up")
}

async fn create(State(app): State<AppState>, body: Bytes) -> Result<(StatusCode, ApiEnvelope<Created>), ApiError> {
    let params: ProtocolParams = parse(&body)?;
    let (id, phase) = app.create(params)?;
    Ok((StatusCode::CREATED, ApiEnvelope::ok(Created { id, phase })))
}

async fn summary(State(app): State<AppState>, AuctionId(id): AuctionId) -> ApiResult<Summary> {
    app.read(id, |s| {
        Ok(ApiEnvelope::ok(Summary {
            id,
            phase: s.phase(),
            now: s.now(),
            params: s.params().clone(),
            bids_received: s.book().len(),
            identities: s.registry().len(),
        }))
    })
}

async fn register(State(app): State<AppState>, AuctionId(id): AuctionId, body: Bytes) -> ApiResult<Response> {
    let b: IdentityBody = parse(&body)?;
    app.apply(id, Command::Register { token: b.token, units: b.units }).map(ApiEnvelope::ok)
}

async fn open(State(app): State<AppState>, AuctionId(id): AuctionId) -> ApiResult<Response> {
    app.apply(id, Command::Open).map(ApiEnvelope::ok)
}

async fn bid(State(app): State<AppState>, AuctionId(id): AuctionId, body: Bytes) -> ApiResult<Response> {
    let b: BidBody = parse(&body)?;
    app.apply(
        id,
        Command::Bid {
            token: b.token,
            amount: b.amount,
            collateral: b.collateral,
        },
    )
    .map(ApiEnvelope::ok)
}

async fn indicative(State(app): State<AppState>, AuctionId(id): AuctionId) -> ApiResult<Response> {
    app.read(id, |s| {
        let price = s.disclose_indicative()?;
        Ok(ApiEnvelope::ok(Response::Indicative { price }))
    })
}

async fn close(State(app): State<AppState>, AuctionId(id): AuctionId, body: Bytes) -> ApiResult<Response> {
    let b: CloseBody = parse(&body)?;
    app.apply(id, Command::Close { tie_break: b.tie_break }).map(ApiEnvelope::ok)
}

async fn settle(State(app): State<AppState>, AuctionId(id): AuctionId) -> ApiResult<Response> {
    app.apply(id, Command::Settle).map(ApiEnvelope::ok)
}

async fn pay(State(app): State<AppState>, AuctionId(id): AuctionId, body: Bytes) -> ApiResult<Response> {
    let b: PaymentBody = parse(&body)?;
    app.apply(id, Command::Pay { token: b.token, amount: b.amount }).map(ApiEnvelope::ok)
}

async fn expire(State(app): State<AppState>, AuctionId(id): AuctionId, body: Bytes) -> ApiResult<Response> {
    let b: ExpireBody = parse(&body)?;
    app.apply(id, Command::Expire { now: b.now }).map(ApiEnvelope::ok)
}

async fn clock(State(app): State<AppState>, AuctionId(id): AuctionId, body: Bytes) -> ApiResult<Response> {
    let b: ClockBody = parse(&body)?;
    app.apply(id, Command::Advance { to: b.to }).map(ApiEnvelope::ok)
}

fn not_cleared(phase: Phase) -> ApiError {
    ApiError::from(ProtocolError::WrongPhase {
        expected: Phase::Cleared,
        actual: phase,
    })
}

async fn outcome(State(app): State<AppState>, AuctionId(id): AuctionId) -> ApiResult<AuctionOutcome> {
    app.read(id, |s| {
        s.outcome()
            .cloned()
            .map(ApiEnvelope::ok)
            .ok_or_else(|| not_cleared(s.phase()))
    })
}

async fn settlement(State(app): State<AppState>, AuctionId(id): AuctionId) -> ApiResult<SettlementReport> {
    app.read(id, |s| {
        s.settlement().cloned().map(ApiEnvelope::ok).ok_or_else(|| {
            ApiError::from(ProtocolError::WrongPhase {
                expected: Phase::Settled,
                actual: s.phase(),
            })
        })
    })
}

async fn ledger(State(app): State<AppState>, AuctionId(id): AuctionId) -> ApiResult<LedgerView> {
    app.read(id, |s| Ok(ApiEnvelope::ok(s.ledger_view())))
}

async fn commands(State(app): State<AppState>, AuctionId(id): AuctionId) -> ApiResult<Vec<Command>> {
    app.read(id, |s| Ok(ApiEnvelope::ok(s.command_log().to_vec())))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/auctions", post(create))
        .route("/auctions/{id}", get(summary))
        .route("/auctions/{id}/identities", post(register))
        .route("/auctions/{id}/open", post(open))
        .route("/auctions/{id}/bids", post(bid))
        .route("/auctions/{id}/indicative", get(indicative))
        .route("/auctions/{id}/close", post(close))
        .route("/auctions/{id}/settle", post(settle))
        .route("/auctions/{id}/payments", post(pay))
        .route("/auctions/{id}/expire", post(expire))
        .route("/auctions/{id}/clock", post(clock))
        .route("/auctions/{id}/outcome", get(outcome))
        .route("/auctions/{id}/settlement", get(settlement))
        .route("/auctions/{id}/ledger", get(ledger))
        .route("/auctions/{id}/commands", get(commands))
        .fallback(fallback)
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
