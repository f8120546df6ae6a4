//! Hosted-service backends and the transport they talk through.
//!
//! No network client lives in this crate. [`StubTransport`] records each
//! request and answers with a canned error.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;

use super::{
    BackendDescriptor, BackendKind, BackendSource, SynthesisArtifact, SynthesisBackend,
    SynthesisError, SynthesisRequest,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostedRequest {
    pub endpoint: String,
    pub api_key: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("hosted endpoint {0} unavailable: no transport configured")]
    Unavailable(String),
}

pub trait Transport: Send {
    fn send(&self, request: HostedRequest) -> Result<String, TransportError>;
}

#[derive(Debug, Default)]
pub struct StubTransport {
    sent: RefCell<Vec<HostedRequest>>,
}

impl StubTransport {
    pub fn requests(&self) -> Vec<HostedRequest> {
        self.sent.borrow().clone()
    }
}

impl Transport for StubTransport {
    fn send(&self, request: HostedRequest) -> Result<String, TransportError> {
        let endpoint = request.endpoint.clone();
        self.sent.borrow_mut().push(request);
        Err(TransportError::Unavailable(endpoint))
    }
}

/// Credentials bound to an endpoint, mirroring `api_init(api_key, endpoint)`.
#[derive(Debug)]
pub struct HostedBackend<T: Transport = StubTransport> {
    id: String,
    kind: BackendKind,
    endpoint: String,
    api_key: String,
    transport: T,
}

impl<T: Transport> HostedBackend<T> {
    pub fn new(descriptor: BackendDescriptor, transport: T) -> Result<Self, SynthesisError> {
        let creds = descriptor.credentials.ok_or(SynthesisError::MissingCredentials)?;
        let endpoint = match descriptor.source {
            BackendSource::Hosted { endpoint } => endpoint,
            BackendSource::Local { .. } => creds.endpoint.clone(),
        };
        Ok(Self {
            id: format!("hosted-{}", descriptor.kind),
            kind: descriptor.kind,
            endpoint,
            api_key: creds.api_key,
            transport,
        })
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Sends a free-form body; used by reasoners for untemplated queries.
    pub fn call(&self, body: String) -> Result<String, TransportError> {
        self.transport.send(HostedRequest {
            endpoint: self.endpoint.clone(),
            api_key: self.api_key.clone(),
            body,
        })
    }
}

impl<T: Transport> SynthesisBackend for HostedBackend<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        self.kind
    }

    fn predict(&self, req: &SynthesisRequest<'_>) -> Result<SynthesisArtifact, SynthesisError> {
        let body = format!(
            "kind={};actions={};text={};seed={}",
            self.kind,
            req.actions.len(),
            req.input.text.as_deref().unwrap_or(""),
            req.controls.seed
        );
        self.call(body)?;
        // A real transport would decode the response here.
        Err(SynthesisError::Transport(TransportError::Unavailable(self.endpoint.clone())))
    }
}
