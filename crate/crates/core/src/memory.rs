//! Session-scoped multimodal interaction memory.
//!
//! Records carry a 32-dimensional feature (unit length or zero). Retrieval
//! scores blend cosine similarity with exponential recency:
//!
//! `score = alpha * cos(q, f) + (1 - alpha) * exp(-lambda * (now - step))`
//!
//! Compression folds near-duplicates (cosine >= theta, same modality) into
//! their earliest survivor; lifecycle management evicts the unpinned record
//! with the lowest retention `weight * exp(-lambda * (now - step))` until
//! the session fits its capacity.
//!
//! Every mutation is appended to a journal of [`MemoryEvent`]s; replaying
//! the journal rebuilds an identical store.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::envelope::SessionId;
use crate::frame::decode_frame;
use crate::hash::{digest_hex, fnv1a64};
use crate::modality::Modality;

pub const FEATURE_DIM: usize = 32;
pub type Feature = [f64; FEATURE_DIM];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MemoryError {
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {0} already exists")]
    DuplicateSession(SessionId),
    #[error("record {id} does not belong to session {session}")]
    ForeignRecord { id: String, session: SessionId },
    #[error("{pinned} pinned records exceed capacity {capacity}")]
    PinnedOverCapacity { pinned: usize, capacity: usize },
    #[error("invalid memory config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub capacity: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub theta: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            capacity: 1024,
            alpha: 0.7,
            lambda: 0.05,
            theta: 0.98,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.capacity == 0 {
            return Err(MemoryError::InvalidConfig("capacity must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(MemoryError::InvalidConfig("alpha must lie in [0,1]"));
        }
        if self.lambda <= 0.0 || !self.lambda.is_finite() {
            return Err(MemoryError::InvalidConfig("lambda must be positive"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(MemoryError::InvalidConfig("theta must lie in (0,1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub id: String,
    pub session: SessionId,
    pub step: u64,
    pub modality: Modality,
    pub feature: Feature,
    pub payload_digest: String,
    pub metadata: BTreeMap<String, String>,
    pub weight: u64,
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum MemoryEvent {
    Open { session: SessionId },
    Record { record: Box<MemoryRecord> },
    Pin { session: SessionId, id: String },
    Compress { session: SessionId, ids: Vec<String> },
    Manage { session: SessionId },
    Close { session: SessionId },
}

fn l2_normalize(v: &mut Feature) {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Frames: pixels scaled to [0,1], first 32 row-major values, zero-padded.
/// Text: character-trigram counts hashed (FNV-1a 64 mod 32). Both are
/// L2-normalized; zero stays zero. Other modalities map to zero.
pub fn featurize(modality: Modality, payload: &[u8]) -> Feature {
    let mut v = [0.0; FEATURE_DIM];
    match modality {
        Modality::Image | Modality::VideoFrames => {
            if let Ok(frame) = decode_frame(payload) {
                for (slot, &p) in v.iter_mut().zip(frame.pixels()) {
                    *slot = f64::from(p) / 255.0;
                }
            }
        }
        Modality::Text => {
            let text = String::from_utf8_lossy(payload);
            let chars: Vec<char> = text.chars().collect();
            let mut buf = [0u8; 12];
            for w in chars.windows(3) {
                let mut len = 0;
                for c in w {
                    len += c.encode_utf8(&mut buf[len..]).len();
                }
                v[(fnv1a64(&buf[..len]) % FEATURE_DIM as u64) as usize] += 1.0;
            }
        }
        _ => {}
    }
    l2_normalize(&mut v);
    v
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &Feature, b: &Feature) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextQuery {
    pub feature: Feature,
    pub now_step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored<'a> {
    pub record: &'a MemoryRecord,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompressReport {
    pub survivors: Vec<String>,
    /// (absorbed id, survivor id)
    pub merged: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvictionReport {
    pub evicted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionMemory {
    next_step: u64,
    records: Vec<MemoryRecord>,
}

impl SessionMemory {
    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn next_step(&self) -> u64 {
        self.next_step
    }

    pub fn total_weight(&self) -> u64 {
        self.records.iter().map(|r| r.weight).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStore {
    config: MemoryConfig,
    sessions: BTreeMap<SessionId, SessionMemory>,
    journal: Vec<MemoryEvent>,
}

impl MemoryStore {
    pub fn new(config: MemoryConfig) -> Result<Self, MemoryError> {
        config.validate()?;
        Ok(Self {
            config,
            sessions: BTreeMap::new(),
            journal: Vec::new(),
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn journal(&self) -> &[MemoryEvent] {
        &self.journal
    }

    pub fn session(&self, id: &SessionId) -> Option<&SessionMemory> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = (&SessionId, &SessionMemory)> {
        self.sessions.iter()
    }

    fn session_mut(&mut self, id: &SessionId) -> Result<&mut SessionMemory, MemoryError> {
        self.sessions
            .get_mut(id)
            .ok_or_else(|| MemoryError::UnknownSession(id.clone()))
    }

    pub fn open_session(&mut self, id: SessionId) -> Result<(), MemoryError> {
        if self.sessions.contains_key(&id) {
            return Err(MemoryError::DuplicateSession(id));
        }
        self.sessions.insert(id.clone(), SessionMemory::default());
        self.journal.push(MemoryEvent::Open { session: id });
        Ok(())
    }

    pub fn close_session(&mut self, id: &SessionId) -> Result<SessionMemory, MemoryError> {
        let s = self
            .sessions
            .remove(id)
            .ok_or_else(|| MemoryError::UnknownSession(id.clone()))?;
        self.journal.push(MemoryEvent::Close { session: id.clone() });
        Ok(s)
    }

    /// Stores an item at the session's next step. Steps are never reused.
    pub fn record(
        &mut self,
        session: &SessionId,
        data: (Modality, &[u8]),
        metadata: BTreeMap<String, String>,
    ) -> Result<String, MemoryError> {
        let mem = self.session_mut(session)?;
        let step = mem.next_step;
        let record = MemoryRecord {
            id: format!("{session}:{step}"),
            session: session.clone(),
            step,
            modality: data.0,
            feature: featurize(data.0, data.1),
            payload_digest: digest_hex(data.1),
            metadata,
            weight: 1,
            pinned: false,
        };
        let id = record.id.clone();
        self.apply_record(record.clone())?;
        self.journal.push(MemoryEvent::Record { record: Box::new(record) });
        Ok(id)
    }

    fn apply_record(&mut self, record: MemoryRecord) -> Result<(), MemoryError> {
        let mem = self.session_mut(&record.session.clone())?;
        mem.next_step = mem.next_step.max(record.step + 1);
        mem.records.push(record);
        Ok(())
    }

    pub fn pin(&mut self, session: &SessionId, id: &str) -> Result<(), MemoryError> {
        let mem = self.session_mut(session)?;
        let rec = mem
            .records
            .iter_mut()
            .find(|r| r.id == id)
            .ok_or_else(|| MemoryError::ForeignRecord {
                id: id.into(),
                session: session.clone(),
            })?;
        rec.pinned = true;
        self.journal.push(MemoryEvent::Pin {
            session: session.clone(),
            id: id.into(),
        });
        Ok(())
    }

    pub fn score(&self, record: &MemoryRecord, query: &ContextQuery) -> f64 {
        let age = query.now_step.saturating_sub(record.step) as f64;
        self.config.alpha * cosine(&query.feature, &record.feature)
            + (1.0 - self.config.alpha) * libm::exp(-self.config.lambda * age)
    }

    /// Top-`k` records by score, ties broken by larger step then id.
    pub fn select(&self, session: &SessionId, query: &ContextQuery, k: usize) -> Result<Vec<Scored<'_>>, MemoryError> {
        let mem = self
            .sessions
            .get(session)
            .ok_or_else(|| MemoryError::UnknownSession(session.clone()))?;
        let mut scored: Vec<Scored<'_>> = mem
            .records
            .iter()
            .map(|r| Scored {
                record: r,
                score: self.score(r, query),
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.record.step.cmp(&a.record.step))
                .then_with(|| a.record.id.cmp(&b.record.id))
        });
        scored.truncate(k);
        Ok(scored)
    }

    /// Greedy near-duplicate folding in step order. Total weight is kept.
    pub fn compress(&mut self, session: &SessionId, ids: &[String]) -> Result<CompressReport, MemoryError> {
        let report = self.apply_compress(session, ids)?;
        self.journal.push(MemoryEvent::Compress {
            session: session.clone(),
            ids: ids.to_vec(),
        });
        Ok(report)
    }

    fn apply_compress(&mut self, session: &SessionId, ids: &[String]) -> Result<CompressReport, MemoryError> {
        let theta = self.config.theta;
        let mem = self.session_mut(session)?;
        for id in ids {
            if !mem.records.iter().any(|r| &r.id == id) {
                return Err(MemoryError::ForeignRecord {
                    id: id.clone(),
                    session: session.clone(),
                });
            }
        }
        let mut order: Vec<usize> = (0..mem.records.len())
            .filter(|&i| ids.contains(&mem.records[i].id))
            .collect();
        order.sort_by_key(|&i| mem.records[i].step);

        let mut report = CompressReport::default();
        let mut survivors: Vec<usize> = Vec::new();
        let mut absorbed = Vec::new();
        for i in order {
            let target = survivors.iter().copied().find(|&s| {
                mem.records[s].modality == mem.records[i].modality
                    && cosine(&mem.records[s].feature, &mem.records[i].feature) >= theta
            });
            match target {
                Some(s) => {
                    let src = mem.records[i].clone();
                    let dst = &mut mem.records[s];
                    dst.weight += src.weight;
                    dst.pinned |= src.pinned;
                    for (k, v) in src.metadata {
                        dst.metadata.entry(k).or_insert(v);
                    }
                    report.merged.push((src.id, dst.id.clone()));
                    absorbed.push(i);
                }
                None => survivors.push(i),
            }
        }
        report.survivors = survivors.iter().map(|&i| mem.records[i].id.clone()).collect();
        let mut idx = 0;
        mem.records.retain(|_| {
            let keep = !absorbed.contains(&idx);
            idx += 1;
            keep
        });
        Ok(report)
    }

    pub fn retention(&self, record: &MemoryRecord, now: u64) -> f64 {
        record.weight as f64 * libm::exp(-self.config.lambda * now.saturating_sub(record.step) as f64)
    }

    /// Evicts lowest-retention unpinned records (oldest first on ties) until
    /// the session fits its capacity. Fails without evicting anything when
    /// the pinned records alone exceed capacity.
    pub fn manage(&mut self, session: &SessionId) -> Result<EvictionReport, MemoryError> {
        let report = self.apply_manage(session)?;
        if !report.evicted.is_empty() {
            self.journal.push(MemoryEvent::Manage {
                session: session.clone(),
            });
        }
        Ok(report)
    }

    fn apply_manage(&mut self, session: &SessionId) -> Result<EvictionReport, MemoryError> {
        let capacity = self.config.capacity;
        let lambda = self.config.lambda;
        let mem = self.session_mut(session)?;
        let pinned = mem.records.iter().filter(|r| r.pinned).count();
        if mem.records.len() > capacity && pinned > capacity {
            return Err(MemoryError::PinnedOverCapacity { pinned, capacity });
        }
        let now = mem.next_step;
        let rho = |r: &MemoryRecord| r.weight as f64 * libm::exp(-lambda * now.saturating_sub(r.step) as f64);
        let mut report = EvictionReport::default();
        while mem.records.len() > capacity {
            let victim = mem
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.pinned)
                .min_by(|(_, a), (_, b)| {
                    rho(a)
                        .partial_cmp(&rho(b))
                        .unwrap_or(Ordering::Equal)
                        .then_with(|| a.step.cmp(&b.step))
                })
                .map(|(i, _)| i);
            let Some(i) = victim else { break };
            report.evicted.push(mem.records.remove(i).id);
        }
        Ok(report)
    }

    /// Rebuilds a store from its journal.
    pub fn replay(config: MemoryConfig, events: &[MemoryEvent]) -> Result<Self, MemoryError> {
        let mut store = Self::new(config)?;
        for e in events {
            match e {
                MemoryEvent::Open { session } => {
                    store.sessions.insert(session.clone(), SessionMemory::default());
                }
                MemoryEvent::Record { record } => store.apply_record((**record).clone())?,
                MemoryEvent::Pin { session, id } => {
                    let mem = store.session_mut(session)?;
                    if let Some(r) = mem.records.iter_mut().find(|r| &r.id == id) {
                        r.pinned = true;
                    }
                }
                MemoryEvent::Compress { session, ids } => {
                    store.apply_compress(session, ids)?;
                }
                MemoryEvent::Manage { session } => {
                    store.apply_manage(session)?;
                }
                MemoryEvent::Close { session } => {
                    store.sessions.remove(session);
                }
            }
            store.journal.push(e.clone());
        }
        Ok(store)
    }
}
