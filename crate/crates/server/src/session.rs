//! One elicitation session: a catalog, a single-user model, the pairs asked
//! so far and the answer log the model state is rebuilt from.

use std::collections::HashSet;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use prefelicit::harness::derive_seed;
use prefelicit::models::{train_pairwise, AnyModel, MatrixFactorization, NeuralConfig, NeuralPreferenceModel, TrainConfig};
use prefelicit::prefcore::{ComparisonTriplet, ItemId, UserId};
use prefelicit::sampler::{recommend, utility_gain_query, QueryContext, QueryPair, QueryPool, SamplerConfig};
use prefelicit::utility::{AdmissionsUtility, McConfig, MediaUtility, UtilityFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::ServiceError;

const USER: UserId = UserId(0);

const SEED_INIT: u64 = 1;
const SEED_POOL: u64 = 2;
const SEED_SELECT: u64 = 3;
const SEED_ANSWER: u64 = 4;
const SEED_MENU: u64 = 5;

/// Catalog ids may be sent as JSON strings or integers; both become strings.
pub(crate) fn flexible_id<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        S(String),
        I(i64),
        U(u64),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::S(s) => s,
        Raw::I(i) => i.to_string(),
        Raw::U(u) => u.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogItem {
    #[serde(deserialize_with = "flexible_id")]
    pub id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Media,
    #[default]
    Admissions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    #[serde(rename = "R")]
    pub samples: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { samples: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub pool_size: usize,
    /// Epochs of the hypothetical fine-tune used to score each candidate.
    pub finetune_epochs: usize,
    pub replay: usize,
    /// When set, the candidate pool shrinks so selection stays near this budget.
    pub latency_budget_ms: Option<u64>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self { pool_size: 30, finetune_epochs: 5, replay: 20, latency_budget_ms: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub latent_dim: usize,
    pub init_std: f64,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    /// Epochs over the whole answer log after each answer.
    pub epochs: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { latent_dim: 4, init_std: 0.5, learning_rate: 0.1, l2_lambda: 0.01, epochs: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub utility: UtilityKind,
    /// Menu size.
    pub k: usize,
    pub mc: McSettings,
    pub sampler: SamplerSettings,
    pub model: ModelSettings,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { utility: UtilityKind::default(), k: 1, mc: McSettings::default(), sampler: SamplerSettings::default(), model: ModelSettings::default() }
    }
}

impl SessionConfig {
    pub fn validate(&self, n_items: usize) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::Validation(m));
        if self.k == 0 || self.k > n_items {
            return bad(format!("k must be between 1 and the catalog size {n_items}, got {}", self.k));
        }
        if self.mc.samples == 0 {
            return bad("mc.R must be at least 1".into());
        }
        if self.sampler.pool_size == 0 {
            return bad("sampler.pool_size must be at least 1".into());
        }
        if self.model.latent_dim == 0 {
            return bad("model.latent_dim must be at least 1".into());
        }
        if !(self.model.init_std >= 0.0 && self.model.init_std.is_finite()) {
            return bad("model.init_std must be >= 0".into());
        }
        if !(self.model.learning_rate > 0.0 && self.model.learning_rate.is_finite()) {
            return bad("model.learning_rate must be positive".into());
        }
        if !(self.model.l2_lambda >= 0.0 && self.model.l2_lambda.is_finite()) {
            return bad("model.l2_lambda must be >= 0".into());
        }
        Ok(())
    }

    fn utility(&self) -> Box<dyn UtilityFunction + Send + Sync> {
        match self.utility {
            UtilityKind::Media => Box::new(MediaUtility::default()),
            UtilityKind::Admissions => Box::new(AdmissionsUtility { k: self.k }),
        }
    }
}

/// First record of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub created_at: u64,
    pub items: Vec<CatalogItem>,
    pub config: SessionConfig,
}

/// One answered query, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub query_id: String,
    /// Catalog indices of the pair, smaller first.
    pub pair: [usize; 2],
    pub winner: usize,
    pub answered_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRef {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTicket {
    pub query_id: String,
    pub pair: [ItemRef; 2],
    pub issued_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextQuery {
    Ticket(QueryTicket),
    Complete { status: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSummary {
    pub menu: Vec<String>,
    pub expected_utility: f64,
    pub queries_so_far: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub query_id: String,
    pub winner: ItemRef,
    pub loser: ItemRef,
    pub answered_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub created_at: u64,
    pub updated_at: u64,
    pub status: String,
    pub n_items: usize,
    pub config: SessionConfig,
    pub history: Vec<HistoryEntry>,
    pub menu: Vec<ItemRef>,
    pub expected_utility: f64,
    pub remaining_pairs: usize,
    pub outstanding: Option<QueryTicket>,
}

pub fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, Clone)]
struct Outstanding {
    ticket: QueryTicket,
    pair: QueryPair,
}

#[derive(Debug, Clone)]
pub struct Session {
    header: SessionHeader,
    updated_at: u64,
    model: AnyModel,
    pool: QueryPool,
    answers: Vec<AnswerRecord>,
    triplets: Vec<ComparisonTriplet>,
    outstanding: Option<Outstanding>,
    menu: Vec<ItemId>,
    expected_utility: f64,
    issued: usize,
    cost_per_candidate: Option<Duration>,
}

fn validate_items(items: &[CatalogItem]) -> Result<Option<usize>, ServiceError> {
    if items.len() < 2 {
        return Err(ServiceError::Validation(format!("catalog needs at least 2 items, got {}", items.len())));
    }
    let mut seen = HashSet::new();
    for item in items {
        if item.id.is_empty() {
            return Err(ServiceError::Validation("item ids must be non-empty".into()));
        }
        if !seen.insert(item.id.as_str()) {
            return Err(ServiceError::Validation(format!("duplicate item id \"{}\"", item.id)));
        }
    }
    let dims: HashSet<Option<usize>> = items.iter().map(|i| i.features.as_ref().map(Vec::len)).collect();
    if dims.len() > 1 {
        return Err(ServiceError::Validation("either every item has features of the same length or none has".into()));
    }
    let dim = dims.into_iter().next().flatten();
    if dim == Some(0) {
        return Err(ServiceError::Validation("feature vectors must be non-empty".into()));
    }
    if items.iter().flat_map(|i| i.features.iter().flatten()).any(|x| !x.is_finite()) {
        return Err(ServiceError::Validation("features must be finite numbers".into()));
    }
    Ok(dim)
}

fn initial_model(header: &SessionHeader, feature_dim: Option<usize>) -> Result<AnyModel, ServiceError> {
    let cfg = &header.config;
    let n = header.items.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.mc.seed, SEED_INIT, 0));
    Ok(match feature_dim {
        Some(dim) => {
            let data: Vec<f64> = header.items.iter().flat_map(|i| i.features.clone().unwrap_or_default()).collect();
            let neural = NeuralConfig { embed_dim: cfg.model.latent_dim, hidden: [16, 8], noise_dim: 0, train_with_noise: false };
            NeuralPreferenceModel::new(1, n, Some((dim, data)), neural, cfg.model.init_std, &mut rng)?.into()
        }
        None => MatrixFactorization::new(1, n, cfg.model.latent_dim, cfg.model.init_std, &mut rng).into(),
    })
}

impl Session {
    /// A fresh session; `session_id` and `created_at` are supplied by the caller.
    pub fn create(session_id: String, created_at: u64, items: Vec<CatalogItem>, config: SessionConfig) -> Result<Self, ServiceError> {
        let header = SessionHeader { session_id, created_at, items, config };
        Self::from_header(header)
    }

    pub fn from_header(mut header: SessionHeader) -> Result<Self, ServiceError> {
        let dim = validate_items(&header.items)?;
        header.config.validate(header.items.len())?;
        for item in &mut header.items {
            if item.label.is_empty() {
                item.label = item.id.clone();
            }
        }
        let n = header.items.len();
        let model = initial_model(&header, dim)?;
        let mut session = Self {
            updated_at: header.created_at,
            pool: QueryPool::new(USER, (0..n).map(ItemId).collect()),
            header,
            model,
            answers: Vec::new(),
            triplets: Vec::new(),
            outstanding: None,
            menu: Vec::new(),
            expected_utility: 0.0,
            issued: 0,
            cost_per_candidate: None,
        };
        session.refresh_menu()?;
        Ok(session)
    }

    /// Rebuilds a session by applying a logged answer sequence to a fresh one.
    pub fn replay(header: SessionHeader, answers: &[AnswerRecord]) -> Result<Self, ServiceError> {
        let mut session = Self::from_header(header)?;
        for record in answers {
            let pair = session.pair_from_indices(record.pair)?;
            session.apply_answer(pair, record.clone())?;
        }
        session.issued = session.answers.len();
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.header.session_id
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn answers(&self) -> &[AnswerRecord] {
        &self.answers
    }

    pub fn model(&self) -> &AnyModel {
        &self.model
    }

    pub fn is_complete(&self) -> bool {
        self.pool.is_exhausted()
    }

    fn item_ref(&self, item: ItemId) -> ItemRef {
        let c = &self.header.items[item.0];
        ItemRef { id: c.id.clone(), label: c.label.clone() }
    }

    fn index_of(&self, id: &str) -> Option<ItemId> {
        self.header.items.iter().position(|i| i.id == id).map(ItemId)
    }

    fn pair_from_indices(&self, pair: [usize; 2]) -> Result<QueryPair, ServiceError> {
        let n = self.header.items.len();
        if pair[0] >= n || pair[1] >= n {
            return Err(ServiceError::Validation(format!("logged pair {pair:?} outside a catalog of {n}")));
        }
        QueryPair::new(USER, ItemId(pair[0]), ItemId(pair[1])).map_err(|e| ServiceError::Validation(e.to_string()))
    }

    fn refresh_menu(&mut self) -> Result<(), ServiceError> {
        let cfg = &self.header.config;
        let universe: Vec<ItemId> = (0..self.header.items.len()).map(ItemId).collect();
        let mc = McConfig { samples: cfg.mc.samples, seed: derive_seed(cfg.mc.seed, SEED_MENU, self.answers.len() as u64), ..McConfig::default() };
        let choice = recommend(&self.model, USER, &universe, cfg.utility().as_ref(), cfg.k, &mc)?;
        self.menu = choice.menu.items().to_vec();
        self.expected_utility = choice.expected_utility;
        Ok(())
    }

    fn effective_pool_size(&self) -> usize {
        let configured = self.header.config.sampler.pool_size;
        match (self.header.config.sampler.latency_budget_ms, self.cost_per_candidate) {
            (Some(budget), Some(cost)) if !cost.is_zero() => {
                let fits = Duration::from_millis(budget).as_secs_f64() / cost.as_secs_f64();
                configured.min((fits.floor() as usize).max(1))
            }
            _ => configured,
        }
    }

    /// Serves the next query: the pool pair with the largest expected utility gain.
    pub fn next_query(&mut self) -> Result<NextQuery, ServiceError> {
        if self.outstanding.is_some() {
            return Err(ServiceError::Conflict("a query is already outstanding; answer it first".into()));
        }
        if self.pool.is_exhausted() {
            return Ok(NextQuery::Complete { status: "complete".into() });
        }
        let cfg = &self.header.config;
        let tag = self.issued as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.mc.seed, SEED_POOL, tag));
        let candidates = self.pool.draw(self.effective_pool_size(), &mut rng);
        let universe: Vec<ItemId> = (0..self.header.items.len()).map(ItemId).collect();
        let sampler = SamplerConfig {
            pool_size: candidates.len(),
            mc: McConfig { samples: cfg.mc.samples, seed: derive_seed(cfg.mc.seed, SEED_SELECT, tag), ..McConfig::default() },
            finetune: TrainConfig {
                learning_rate: cfg.model.learning_rate,
                epochs: cfg.sampler.finetune_epochs,
                l2_lambda: cfg.model.l2_lambda,
                seed: derive_seed(cfg.mc.seed, SEED_SELECT, tag + 1),
                ..TrainConfig::default()
            },
            replay: cfg.sampler.replay,
            menu_size: cfg.k,
            seed: derive_seed(cfg.mc.seed, SEED_SELECT, tag + 2),
        };
        let ctx = QueryContext { user: USER, universe: &universe, history: &self.triplets };
        let started = Instant::now();
        let pair = utility_gain_query(&self.model, &ctx, &candidates, cfg.utility().as_ref(), &sampler)?;
        self.cost_per_candidate = Some(started.elapsed() / candidates.len() as u32);

        self.issued += 1;
        let ticket = QueryTicket { query_id: uuid::Uuid::new_v4().to_string(), pair: [self.item_ref(pair.i), self.item_ref(pair.j)], issued_at: now_millis() };
        self.outstanding = Some(Outstanding { ticket: ticket.clone(), pair });
        Ok(NextQuery::Ticket(ticket))
    }

    /// Checks an answer against the outstanding ticket and returns the record to log.
    pub fn prepare_answer(&self, query_id: &str, winner: &str) -> Result<(QueryPair, AnswerRecord), ServiceError> {
        let out = self.outstanding.as_ref().ok_or_else(|| ServiceError::Conflict("no query is outstanding".into()))?;
        if out.ticket.query_id != query_id {
            return Err(ServiceError::Conflict(format!("query {query_id} is not the outstanding query")));
        }
        let w = self.index_of(winner).filter(|w| out.pair.contains(*w)).ok_or_else(|| ServiceError::Validation(format!("winner \"{winner}\" is not one of the queried pair")))?;
        let record = AnswerRecord { query_id: query_id.to_owned(), pair: [out.pair.i.0, out.pair.j.0], winner: w.0, answered_at: now_millis() };
        Ok((out.pair, record))
    }

    /// Appends the answer, fine-tunes on the whole log and refreshes the menu.
    pub fn apply_answer(&mut self, pair: QueryPair, record: AnswerRecord) -> Result<AnswerSummary, ServiceError> {
        let triplet = pair.answer(ItemId(record.winner)).ok_or_else(|| ServiceError::Validation("winner is not one of the pair".into()))?;
        if !self.pool.mark_asked(&pair) {
            return Err(ServiceError::Conflict(format!("pair {:?} was already answered", record.pair)));
        }
        let cfg = &self.header.config;
        let train = TrainConfig {
            learning_rate: cfg.model.learning_rate,
            epochs: cfg.model.epochs,
            l2_lambda: cfg.model.l2_lambda,
            seed: derive_seed(cfg.mc.seed, SEED_ANSWER, self.answers.len() as u64),
            ..TrainConfig::default()
        };
        self.triplets.push(triplet);
        train_pairwise(&mut self.model, &self.triplets, &train)?;
        self.updated_at = record.answered_at;
        self.answers.push(record);
        self.outstanding = None;
        self.refresh_menu()?;
        Ok(self.answer_summary())
    }

    pub fn submit_answer(&mut self, query_id: &str, winner: &str) -> Result<AnswerSummary, ServiceError> {
        let (pair, record) = self.prepare_answer(query_id, winner)?;
        self.apply_answer(pair, record)
    }

    pub fn answer_summary(&self) -> AnswerSummary {
        AnswerSummary {
            menu: self.menu.iter().map(|i| self.header.items[i.0].id.clone()).collect(),
            expected_utility: self.expected_utility,
            queries_so_far: self.answers.len(),
        }
    }

    pub fn summary(&self) -> SessionSummary {
        let history = self
            .answers
            .iter()
            .map(|a| {
                let loser = if a.pair[0] == a.winner { a.pair[1] } else { a.pair[0] };
                HistoryEntry { query_id: a.query_id.clone(), winner: self.item_ref(ItemId(a.winner)), loser: self.item_ref(ItemId(loser)), answered_at: a.answered_at }
            })
            .collect();
        SessionSummary {
            session_id: self.header.session_id.clone(),
            created_at: self.header.created_at,
            updated_at: self.updated_at,
            status: if self.is_complete() { "complete" } else { "active" }.into(),
            n_items: self.header.items.len(),
            config: self.header.config.clone(),
            history,
            menu: self.menu.iter().map(|&i| self.item_ref(i)).collect(),
            expected_utility: self.expected_utility,
            remaining_pairs: self.pool.remaining(),
            outstanding: self.outstanding.as_ref().map(|o| o.ticket.clone()),
        }
    }
}
