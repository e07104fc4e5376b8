//! Simulated trusted execution environment.
//!
//! An instance moves through `Created -> Attested -> Provisioned -> Executed
//! -> Destroyed`. A sealed blob lets a restarted instance go straight back to
//! `Provisioned` without a new attestation. Every piece of provisioned data is
//! tracked in a [`FlowLedger`] so tests can check who ever saw what.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::TaskId;
use crate::crypto::{
    self, CryptoError, Digest, PlatformKey, ProtectedResult, ResultKeys, SealedBlob, Secret,
};
use crate::ledger::AccountId;
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnclaveError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("cannot {op} an enclave in state {state:?}")]
    InvalidState {
        op: &'static str,
        state: EnclaveState,
    },
    #[error("measurement mismatch: expected {expected}, quote has {actual}")]
    MeasurementMismatch { expected: Digest, actual: Digest },
    #[error("stale or unknown attestation nonce")]
    StaleNonce,
    #[error("enclave not attested")]
    NotAttested,
    #[error("provisioning principal is not bound to the channel")]
    WrongPrincipal,
    #[error("execution fault: {0}")]
    ExecutionFault(String),
    #[error("sealed state: {0}")]
    Seal(#[from] CryptoError),
    #[error("sealed state is malformed")]
    CorruptSealedState,
    #[error("function manifest: {0}")]
    Manifest(String),
}

/// Who can observe a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "principal", content = "id", rename_all = "camelCase")]
pub enum Principal {
    Requestor(AccountId),
    /// The untrusted operating system of an execution node.
    Host(AccountId),
    Enclave(InstanceId),
    ThirdParty(AccountId),
    /// Anyone reading the chain.
    Public,
}

/// Tracked values, per task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "label", content = "task", rename_all = "camelCase")]
pub enum Label {
    Secret(TaskId),
    Inputs(TaskId),
    EncryptionKey(TaskId),
    SigningKey(TaskId),
    PlaintextResult(TaskId),
}

impl Label {
    pub fn task(&self) -> TaskId {
        match *self {
            Label::Secret(t)
            | Label::Inputs(t)
            | Label::EncryptionKey(t)
            | Label::SigningKey(t)
            | Label::PlaintextResult(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FlowAction {
    Grant,
    Revoke,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FlowRecord {
    pub step: u64,
    pub action: FlowAction,
    pub label: Label,
    pub principal: Principal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{principal:?} attempted to read {label:?} at step {step}")]
#[serde(rename_all = "camelCase")]
pub struct FlowViolation {
    pub step: u64,
    pub principal: Principal,
    pub label: Label,
}

/// Visibility sets for every tracked value, with full grant/revoke history.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLedger {
    step: u64,
    visibility: BTreeMap<Label, BTreeSet<Principal>>,
    log: Vec<FlowRecord>,
    violations: Vec<FlowViolation>,
}

impl FlowLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stamp subsequent records with the simulation step.
    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn grant(&mut self, label: Label, principal: Principal) {
        if self.visibility.entry(label).or_default().insert(principal) {
            self.log.push(FlowRecord {
                step: self.step,
                action: FlowAction::Grant,
                label,
                principal,
            });
        }
    }

    pub fn revoke(&mut self, label: Label, principal: Principal) {
        if let Some(set) = self.visibility.get_mut(&label) {
            if set.remove(&principal) {
                self.log.push(FlowRecord {
                    step: self.step,
                    action: FlowAction::Revoke,
                    label,
                    principal,
                });
            }
        }
    }

    pub fn revoke_principal(&mut self, principal: Principal) {
        let labels: Vec<Label> = self
            .visibility
            .iter()
            .filter(|(_, set)| set.contains(&principal))
            .map(|(l, _)| *l)
            .collect();
        for label in labels {
            self.revoke(label, principal);
        }
    }

    pub fn can_see(&self, principal: Principal, label: Label) -> bool {
        self.visibility
            .get(&label)
            .is_some_and(|set| set.contains(&principal))
    }

    pub fn visible_to(&self, label: Label) -> BTreeSet<Principal> {
        self.visibility.get(&label).cloned().unwrap_or_default()
    }

    /// A read by a principal outside the visibility set is recorded and refused.
    pub fn read(&mut self, principal: Principal, label: Label) -> Result<(), FlowViolation> {
        if self.can_see(principal, label) {
            return Ok(());
        }
        let v = FlowViolation {
            step: self.step,
            principal,
            label,
        };
        self.violations.push(v);
        Err(v)
    }

    pub fn log(&self) -> &[FlowRecord] {
        &self.log
    }

    pub fn violations(&self) -> &[FlowViolation] {
        &self.violations
    }

    pub fn first_grant(&self, label: Label, principal: Principal) -> Option<u64> {
        self.log
            .iter()
            .find(|r| r.action == FlowAction::Grant && r.label == label && r.principal == principal)
            .map(|r| r.step)
    }

    pub fn ever_granted(&self, label: Label, principal: Principal) -> bool {
        self.first_grant(label, principal).is_some()
    }
}

/// Deterministic function bodies an image can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionBody {
    Identity,
    Sha256,
    Reverse,
    Uppercase,
    /// Always fails.
    Fault,
}

impl FunctionBody {
    pub fn identifier(&self) -> &'static str {
        match self {
            FunctionBody::Identity => "identity",
            FunctionBody::Sha256 => "sha256",
            FunctionBody::Reverse => "reverse",
            FunctionBody::Uppercase => "uppercase",
            FunctionBody::Fault => "fault",
        }
    }

    pub fn run(&self, inputs: &[u8]) -> Result<Vec<u8>, String> {
        match self {
            FunctionBody::Identity => Ok(inputs.to_vec()),
            FunctionBody::Sha256 => Ok(crypto::sha256(inputs).0.to_vec()),
            FunctionBody::Reverse => Ok(inputs.iter().rev().copied().collect()),
            FunctionBody::Uppercase => Ok(inputs.to_ascii_uppercase()),
            FunctionBody::Fault => Err("function body aborted".to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionImage {
    pub name: String,
    pub body: FunctionBody,
    pub version: u32,
    /// Compute cost charged to the node per execution.
    pub resource_cost: Money,
}

impl FunctionImage {
    pub fn new(
        name: impl Into<String>,
        body: FunctionBody,
        version: u32,
        resource_cost: Money,
    ) -> Self {
        FunctionImage {
            name: name.into(),
            body,
            version,
            resource_cost,
        }
    }

    /// SHA-256 over length-prefixed name, body identifier and big-endian version.
    pub fn measurement(&self) -> Digest {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"spoc-image-v1");
        for part in [self.name.as_bytes(), self.body.identifier().as_bytes()] {
            buf.extend_from_slice(&(part.len() as u32).to_be_bytes());
            buf.extend_from_slice(part);
        }
        buf.extend_from_slice(&self.version.to_be_bytes());
        crypto::sha256(&buf)
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ManifestEntry {
    name: String,
    body: FunctionBody,
    #[serde(default = "one")]
    version: u32,
    resource_cost: Money,
    measurement: Option<Digest>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    function: Vec<ManifestEntry>,
}

/// Function images an execution node can instantiate, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FunctionStore {
    images: BTreeMap<String, FunctionImage>,
}

impl FunctionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// One image per built-in body, named after the body, all at `cost`.
    pub fn builtin(cost: Money) -> Self {
        let mut store = Self::new();
        for body in [
            FunctionBody::Identity,
            FunctionBody::Sha256,
            FunctionBody::Reverse,
            FunctionBody::Uppercase,
            FunctionBody::Fault,
        ] {
            store.insert(FunctionImage::new(body.identifier(), body, 1, cost));
        }
        store
    }

    pub fn insert(&mut self, image: FunctionImage) {
        self.images.insert(image.name.clone(), image);
    }

    pub fn get(&self, name: &str) -> Result<&FunctionImage, EnclaveError> {
        self.images
            .get(name)
            .ok_or_else(|| EnclaveError::UnknownFunction(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.images.keys().map(String::as_str)
    }

    /// Parses a TOML manifest of `[[function]]` tables. A listed measurement
    /// must match the one computed from the entry.
    pub fn from_manifest(text: &str) -> Result<Self, EnclaveError> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| EnclaveError::Manifest(e.to_string()))?;
        let mut store = Self::new();
        for entry in manifest.function {
            let image =
                FunctionImage::new(entry.name, entry.body, entry.version, entry.resource_cost);
            if let Some(expected) = entry.measurement {
                let actual = image.measurement();
                if expected != actual {
                    return Err(EnclaveError::Manifest(format!(
                        "{}: listed measurement {expected} but image measures {actual}",
                        image.name
                    )));
                }
            }
            if store.images.contains_key(&image.name) {
                return Err(EnclaveError::Manifest(format!(
                    "duplicate function {:?}",
                    image.name
                )));
            }
            store.insert(image);
        }
        Ok(store)
    }

    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        for image in self.images.values() {
            out.push_str(&format!(
                "[[function]]\nname = {:?}\nbody = {:?}\nversion = {}\nresourceCost = \"{}\"\nmeasurement = \"{}\"\n\n",
                image.name,
                image.body.identifier(),
                image.version,
                image.resource_cost,
                image.measurement()
            ));
        }
        out
    }

    pub fn instantiate(
        &self,
        name: &str,
        id: InstanceId,
        host: AccountId,
    ) -> Result<EnclaveInstance, EnclaveError> {
        let image = self.get(name)?.clone();
        Ok(EnclaveInstance::new(id, host, image))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u64);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "enclave-{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EnclaveState {
    Created,
    Attested,
    Provisioned,
    Executed,
    Destroyed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttestationQuote {
    pub measurement: Digest,
    pub channel_binding_key: Digest,
    #[serde(with = "hex::serde")]
    pub nonce: [u8; 16],
}

/// Verifier side of remote attestation: issues nonces and accepts each once.
#[derive(Debug, Clone)]
pub struct AttestationVerifier {
    rng: ChaCha20Rng,
    outstanding: BTreeSet<[u8; 16]>,
    consumed: BTreeSet<[u8; 16]>,
}

impl AttestationVerifier {
    pub fn new(seed: u64) -> Self {
        AttestationVerifier {
            rng: ChaCha20Rng::seed_from_u64(seed),
            outstanding: BTreeSet::new(),
            consumed: BTreeSet::new(),
        }
    }

    pub fn fresh_nonce(&mut self) -> [u8; 16] {
        loop {
            let mut n = [0u8; 16];
            self.rng.fill_bytes(&mut n);
            if !self.consumed.contains(&n) && self.outstanding.insert(n) {
                return n;
            }
        }
    }

    /// Consumes the nonce whether or not the quote checks out.
    pub fn verify(
        &mut self,
        quote: &AttestationQuote,
        expected: &Digest,
    ) -> Result<(), EnclaveError> {
        if !self.outstanding.remove(&quote.nonce) {
            return Err(EnclaveError::StaleNonce);
        }
        self.consumed.insert(quote.nonce);
        if quote.measurement != *expected {
            return Err(EnclaveError::MeasurementMismatch {
                expected: *expected,
                actual: quote.measurement,
            });
        }
        Ok(())
    }
}

/// Compute consumed by each node host.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceMeter {
    consumed: BTreeMap<AccountId, Money>,
}

impl ResourceMeter {
    pub fn charge(&mut self, host: AccountId, cost: Money) {
        let c = self.consumed.entry(host).or_default();
        *c = c.checked_add(cost).expect("resource meter overflow");
    }

    pub fn consumed(&self, host: AccountId) -> Money {
        self.consumed.get(&host).copied().unwrap_or_default()
    }
}

#[derive(Clone)]
struct Provisioned {
    task: TaskId,
    secret: Secret,
    inputs: Vec<u8>,
    keys: ResultKeys,
}

impl Provisioned {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 32 + 64 + self.inputs.len());
        out.extend_from_slice(&self.task.0.to_be_bytes());
        out.extend_from_slice(&self.secret.0);
        out.extend_from_slice(&self.keys.to_bytes());
        out.extend_from_slice(&self.inputs);
        out
    }

    fn decode(raw: &[u8]) -> Result<Self, EnclaveError> {
        if raw.len() < 8 + 32 + 64 {
            return Err(EnclaveError::CorruptSealedState);
        }
        let task = TaskId(u64::from_be_bytes(raw[..8].try_into().expect("8 bytes")));
        let secret = Secret(raw[8..40].try_into().expect("32 bytes"));
        let keys = ResultKeys::from_bytes(raw[40..104].try_into().expect("64 bytes"));
        Ok(Provisioned {
            task,
            secret,
            inputs: raw[104..].to_vec(),
            keys,
        })
    }

    fn labels(&self) -> [Label; 4] {
        [
            Label::Secret(self.task),
            Label::Inputs(self.task),
            Label::EncryptionKey(self.task),
            Label::SigningKey(self.task),
        ]
    }
}

/// What `execute` hands to the untrusted host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Release {
    pub task: TaskId,
    pub result: ProtectedResult,
    pub secret: Secret,
}

pub struct EnclaveInstance {
    id: InstanceId,
    host: AccountId,
    image: FunctionImage,
    measurement: Digest,
    state: EnclaveState,
    channel_peer: Option<AccountId>,
    provisioned: Option<Provisioned>,
}

impl fmt::Debug for EnclaveInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnclaveInstance")
            .field("id", &self.id)
            .field("image", &self.image.name)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

impl EnclaveInstance {
    pub fn new(id: InstanceId, host: AccountId, image: FunctionImage) -> Self {
        let measurement = image.measurement();
        EnclaveInstance {
            id,
            host,
            image,
            measurement,
            state: EnclaveState::Created,
            channel_peer: None,
            provisioned: None,
        }
    }

    pub fn id(&self) -> InstanceId {
        self.id
    }

    pub fn host(&self) -> AccountId {
        self.host
    }

    pub fn image(&self) -> &FunctionImage {
        &self.image
    }

    pub fn measurement(&self) -> Digest {
        self.measurement
    }

    pub fn state(&self) -> EnclaveState {
        self.state
    }

    pub fn principal(&self) -> Principal {
        Principal::Enclave(self.id)
    }

    fn require(&self, op: &'static str, state: EnclaveState) -> Result<(), EnclaveError> {
        if self.state == state {
            Ok(())
        } else {
            Err(EnclaveError::InvalidState {
                op,
                state: self.state,
            })
        }
    }

    /// Answers a verifier's challenge. On success the instance is bound to
    /// `requestor` as the only party allowed to provision it.
    pub fn attest(
        &mut self,
        requestor: AccountId,
        expected: &Digest,
        nonce: [u8; 16],
        verifier: &mut AttestationVerifier,
    ) -> Result<AttestationQuote, EnclaveError> {
        self.require("attest", EnclaveState::Created)?;
        let mut binding = Vec::with_capacity(64);
        binding.extend_from_slice(b"spoc-channel");
        binding.extend_from_slice(&self.id.0.to_be_bytes());
        binding.extend_from_slice(&self.measurement.0);
        binding.extend_from_slice(&nonce);
        let quote = AttestationQuote {
            measurement: self.measurement,
            channel_binding_key: crypto::sha256(&binding),
            nonce,
        };
        verifier.verify(&quote, expected)?;
        self.state = EnclaveState::Attested;
        self.channel_peer = Some(requestor);
        Ok(quote)
    }

    pub fn provision(
        &mut self,
        from: AccountId,
        task: TaskId,
        secret: Secret,
        inputs: Vec<u8>,
        keys: ResultKeys,
        flow: &mut FlowLedger,
    ) -> Result<(), EnclaveError> {
        if self.state != EnclaveState::Attested {
            return Err(EnclaveError::NotAttested);
        }
        if self.channel_peer != Some(from) {
            return Err(EnclaveError::WrongPrincipal);
        }
        let p = Provisioned {
            task,
            secret,
            inputs,
            keys,
        };
        for label in p.labels() {
            flow.grant(label, Principal::Requestor(from));
            flow.grant(label, self.principal());
        }
        self.provisioned = Some(p);
        self.state = EnclaveState::Provisioned;
        Ok(())
    }

    /// Runs the body and releases the protected result and the secret to the host.
    pub fn execute<R: RngCore + ?Sized>(
        &mut self,
        meter: &mut ResourceMeter,
        flow: &mut FlowLedger,
        rng: &mut R,
    ) -> Result<Release, EnclaveError> {
        self.require("execute", EnclaveState::Provisioned)?;
        let p = self
            .provisioned
            .as_ref()
            .expect("provisioned state carries data");
        meter.charge(self.host, self.image.resource_cost);
        self.state = EnclaveState::Executed;
        let plaintext = self
            .image
            .body
            .run(&p.inputs)
            .map_err(EnclaveError::ExecutionFault)?;
        flow.grant(Label::PlaintextResult(p.task), self.principal());
        let result = crypto::protect_result(&plaintext, &p.keys, rng);
        flow.grant(Label::Secret(p.task), Principal::Host(self.host));
        Ok(Release {
            task: p.task,
            result,
            secret: p.secret,
        })
    }

    /// Erases provisioned data and temporaries.
    pub fn destroy(&mut self, flow: &mut FlowLedger) {
        flow.revoke_principal(self.principal());
        self.provisioned = None;
        self.channel_peer = None;
        self.state = EnclaveState::Destroyed;
    }

    pub fn seal<R: RngCore + ?Sized>(
        &self,
        platform: &PlatformKey,
        rng: &mut R,
    ) -> Result<SealedBlob, EnclaveError> {
        self.require("seal", EnclaveState::Provisioned)?;
        let p = self
            .provisioned
            .as_ref()
            .expect("provisioned state carries data");
        Ok(crypto::seal(platform, &self.measurement, &p.encode(), rng))
    }

    /// Restarts an instance from sealed state, skipping attestation.
    pub fn restore(
        id: InstanceId,
        host: AccountId,
        image: FunctionImage,
        platform: &PlatformKey,
        blob: &SealedBlob,
        flow: &mut FlowLedger,
    ) -> Result<Self, EnclaveError> {
        let mut instance = EnclaveInstance::new(id, host, image);
        let raw = crypto::unseal(platform, &instance.measurement, blob)?;
        let p = Provisioned::decode(&raw)?;
        for label in p.labels() {
            flow.grant(label, instance.principal());
        }
        instance.provisioned = Some(p);
        instance.state = EnclaveState::Provisioned;
        Ok(instance)
    }

    /// The host OS trying to read enclave memory.
    pub fn host_read(&self, label: Label, flow: &mut FlowLedger) -> Result<(), FlowViolation> {
        flow.read(Principal::Host(self.host), label)
    }
}
