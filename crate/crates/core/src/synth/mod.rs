//! Seeded generator of labelled bridge transactions.
//!
//! Normal deposits run `EOA -> router.deposit -> token.transferFrom -> vault.lock` and emit
//! `Lock` then `Deposit`. Normal withdrawals run `EOA -> router.withdraw -> token.withdraw ->
//! vault.release` and emit `Unlock` then `Withdrawal`. Source-chain attacks call
//! `router.deposit`, which emits `Deposit` without moving any token. Target-chain attacks
//! CREATE a contract whose constructor drives the withdrawal path and then SELFDESTRUCTs to
//! the sender.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::global::{DEPOSIT_EVENTS, WITHDRAWAL_EVENTS};
use crate::ingest::{write_trace_file, DatasetManifest, FrameId, FrameKind, IngestError, Label, ManifestEntry, RecordBuilder, TxRecord};
use crate::primitives::{keccak256, Address, Selector, Wei, B256};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Independent probability of each benign extra call (price oracle read, fee collection).
    pub extra_call_prob: f64,
    /// Probability that the entry call is routed through an aggregator or proxy.
    pub depth_jitter: f64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self { extra_call_prob: 0.0, depth_jitter: 0.0 }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { extra_call_prob: 0.3, depth_jitter: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_normal: usize,
    pub attack_rate: f64,
    /// Fraction of attacks generated as AttackSrc.
    pub src_tgt_ratio: f64,
    pub noise: NoiseConfig,
    pub seed: u64,
    pub chain_id: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { n_normal: 4000, attack_rate: 0.005, src_tgt_ratio: 0.5, noise: NoiseConfig::default(), seed: 42, chain_id: 1 }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.attack_rate > 0.0 && self.attack_rate < 1.0) {
            return Err(SynthError::InvalidConfig(format!("attack_rate {} not in (0, 1)", self.attack_rate)));
        }
        if !unit(self.src_tgt_ratio) {
            return Err(SynthError::InvalidConfig(format!("src_tgt_ratio {} not in [0, 1]", self.src_tgt_ratio)));
        }
        if !unit(self.noise.extra_call_prob) || !unit(self.noise.depth_jitter) {
            return Err(SynthError::InvalidConfig("noise probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// `(n_attack_src, n_attack_tgt)`.
    pub fn attack_counts(&self) -> (usize, usize) {
        let n_attack = (self.n_normal as f64 * self.attack_rate).round() as usize;
        let n_src = (n_attack as f64 * self.src_tgt_ratio).round() as usize;
        (n_src, n_attack - n_src)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    NormalDeposit,
    NormalWithdrawal,
    AttackSrc,
    AttackTgt,
}

impl Template {
    pub fn label(self) -> Label {
        match self {
            Template::NormalDeposit | Template::NormalWithdrawal => Label::Normal,
            Template::AttackSrc => Label::AttackSrc,
            Template::AttackTgt => Label::AttackTgt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTx {
    pub record: TxRecord,
    pub label: Label,
    pub template: Template,
}

/// Contract addresses shared by every transaction of one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BridgeAddresses {
    pub router: Address,
    pub token: Address,
    pub vault: Address,
    pub fee_collector: Address,
    pub oracle: Address,
    pub aggregator: Address,
}

fn derived_address(tag: &str, seed: u64) -> Address {
    let mut preimage = tag.as_bytes().to_vec();
    preimage.extend_from_slice(&seed.to_be_bytes());
    Address::from_slice(&keccak256(&preimage)[12..]).expect("20 bytes")
}

impl BridgeAddresses {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            router: derived_address("router", seed),
            token: derived_address("token", seed),
            vault: derived_address("vault", seed),
            fee_collector: derived_address("fee", seed),
            oracle: derived_address("oracle", seed),
            aggregator: derived_address("aggregator", seed),
        }
    }
}

fn word_address(a: &Address) -> [u8; 32] {
    let mut w = [0u8; 32];
    w[12..].copy_from_slice(a.as_bytes());
    w
}

fn word_u128(v: u128) -> [u8; 32] {
    let mut w = [0u8; 32];
    w[16..].copy_from_slice(&v.to_be_bytes());
    w
}

fn calldata(signature: &str, words: &[[u8; 32]]) -> Vec<u8> {
    let mut out = Selector::of_signature(signature).as_bytes().to_vec();
    words.iter().for_each(|w| out.extend_from_slice(w));
    out
}

fn words(ws: &[[u8; 32]]) -> Vec<u8> {
    ws.concat()
}

fn topic_address(a: &Address) -> B256 {
    B256(word_address(a))
}

struct Ctx<'a> {
    rng: ChaCha8Rng,
    addrs: &'a BridgeAddresses,
    noise: &'a NoiseConfig,
    sender: Address,
    amount: u128,
    dest_chain: u128,
}

impl Ctx<'_> {
    fn new<'a>(seed: u64, addrs: &'a BridgeAddresses, noise: &'a NoiseConfig) -> Ctx<'a> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sender = [0u8; 20];
        rng.fill_bytes(&mut sender);
        let amount = rng.gen_range(1_000_000_000_000_000u128..100_000_000_000_000_000_000);
        let dest_chain = rng.gen_range(1u128..100);
        Ctx { rng, addrs, noise, sender: Address(sender), amount, dest_chain }
    }

    fn tx_hash(&mut self) -> B256 {
        let mut h = [0u8; 32];
        self.rng.fill_bytes(&mut h);
        B256(h)
    }

    /// Root frame: the router itself, or an aggregator that forwards to it.
    fn entry(&mut self, input: Vec<u8>) -> RecordBuilder {
        if self.rng.gen_bool(self.noise.depth_jitter) {
            let wrapped = calldata("bridge(address,bytes)", &[word_address(&self.addrs.router), word_u128(self.amount)]);
            RecordBuilder::new(self.sender, FrameKind::Call, self.addrs.aggregator, wrapped, Wei::ZERO)
        } else {
            RecordBuilder::new(self.sender, FrameKind::Call, self.addrs.router, input, Wei::ZERO)
        }
    }

    /// Calls `router` from `parent` unless `parent` already is the router frame.
    fn router_frame(&mut self, b: &mut RecordBuilder, parent: FrameId, input: Vec<u8>) -> FrameId {
        if b.callee(parent) == self.addrs.router {
            parent
        } else {
            b.call(parent, FrameKind::Call, self.addrs.router, input, Wei::ZERO)
        }
    }

    fn benign_extras(&mut self, b: &mut RecordBuilder, router: FrameId) {
        if self.rng.gen_bool(self.noise.extra_call_prob) {
            b.call(router, FrameKind::StaticCall, self.addrs.oracle, calldata("latestAnswer()", &[]), Wei::ZERO);
        }
        if self.rng.gen_bool(self.noise.extra_call_prob) {
            let fee = self.amount / 1000;
            let f = b.call(
                router,
                FrameKind::Call,
                self.addrs.fee_collector,
                calldata("collect(address,uint256)", &[word_address(&self.sender), word_u128(fee)]),
                Wei::ZERO,
            );
            b.emit(f, vec![B256::of_signature("FeeCollected(address,uint256)"), topic_address(&self.sender)], words(&[word_u128(fee)]));
        }
    }

    fn deposit_input(&self) -> Vec<u8> {
        calldata(
            "deposit(address,uint256,uint256)",
            &[word_address(&self.addrs.token), word_u128(self.amount), word_u128(self.dest_chain)],
        )
    }

    fn withdraw_input(&self) -> Vec<u8> {
        calldata(
            "withdraw(address,uint256,uint256)",
            &[word_address(&self.sender), word_u128(self.amount), word_u128(self.dest_chain)],
        )
    }

    fn emit_deposit(&self, b: &mut RecordBuilder, router: FrameId) {
        b.emit(
            router,
            vec![B256::of_signature(DEPOSIT_EVENTS[0]), topic_address(&self.sender)],
            words(&[word_u128(self.amount), word_u128(self.dest_chain)]),
        );
    }

    fn emit_withdrawal(&self, b: &mut RecordBuilder, router: FrameId) {
        b.emit(
            router,
            vec![B256::of_signature(WITHDRAWAL_EVENTS[0]), topic_address(&self.sender)],
            words(&[word_u128(self.amount), word_u128(self.dest_chain)]),
        );
    }

    /// `router -> token.withdraw -> vault.release`, token emits `Unlock`.
    fn release_path(&mut self, b: &mut RecordBuilder, router: FrameId, recipient: Address) {
        let token = b.call(
            router,
            FrameKind::Call,
            self.addrs.token,
            calldata("withdraw(address,uint256)", &[word_address(&recipient), word_u128(self.amount)]),
            Wei::ZERO,
        );
        b.call(
            token,
            FrameKind::Call,
            self.addrs.vault,
            calldata("release(address,uint256)", &[word_address(&recipient), word_u128(self.amount)]),
            Wei::ZERO,
        );
        b.emit(token, vec![B256::of_signature(WITHDRAWAL_EVENTS[1]), topic_address(&recipient)], words(&[word_u128(self.amount)]));
    }
}

fn finish(ctx: &mut Ctx<'_>, b: RecordBuilder, template: Template, chain_id: u64) -> SynthTx {
    let tx_hash = ctx.tx_hash();
    let block = ctx.rng.gen_range(10_000_000u64..20_000_000);
    SynthTx { record: b.build(tx_hash, chain_id, block), label: template.label(), template }
}

pub fn gen_normal_deposit(seed: u64, addrs: &BridgeAddresses, noise: &NoiseConfig, chain_id: u64) -> SynthTx {
    let mut ctx = Ctx::new(seed, addrs, noise);
    let input = ctx.deposit_input();
    let mut b = ctx.entry(input.clone());
    let router = ctx.router_frame(&mut b, FrameId::ROOT, input);
    ctx.benign_extras(&mut b, router);
    let token = b.call(
        router,
        FrameKind::Call,
        addrs.token,
        calldata(
            "transferFrom(address,address,uint256)",
            &[word_address(&ctx.sender), word_address(&addrs.vault), word_u128(ctx.amount)],
        ),
        Wei::ZERO,
    );
    let vault = b.call(
        token,
        FrameKind::Call,
        addrs.vault,
        calldata("lock(address,uint256)", &[word_address(&ctx.sender), word_u128(ctx.amount)]),
        Wei::ZERO,
    );
    b.emit(vault, vec![B256::of_signature(DEPOSIT_EVENTS[1]), topic_address(&ctx.sender)], words(&[word_u128(ctx.amount)]));
    ctx.emit_deposit(&mut b, router);
    finish(&mut ctx, b, Template::NormalDeposit, chain_id)
}

pub fn gen_normal_withdrawal(seed: u64, addrs: &BridgeAddresses, noise: &NoiseConfig, chain_id: u64) -> SynthTx {
    let mut ctx = Ctx::new(seed, addrs, noise);
    let input = ctx.withdraw_input();
    let mut b = ctx.entry(input.clone());
    let router = ctx.router_frame(&mut b, FrameId::ROOT, input);
    ctx.benign_extras(&mut b, router);
    let recipient = ctx.sender;
    ctx.release_path(&mut b, router, recipient);
    ctx.emit_withdrawal(&mut b, router);
    finish(&mut ctx, b, Template::NormalWithdrawal, chain_id)
}

/// `router.deposit` emits `Deposit` without any token transfer underneath.
pub fn gen_attack_src(seed: u64, addrs: &BridgeAddresses, noise: &NoiseConfig, chain_id: u64) -> SynthTx {
    let mut ctx = Ctx::new(seed, addrs, noise);
    let input = ctx.deposit_input();
    let mut b = ctx.entry(input.clone());
    let router = ctx.router_frame(&mut b, FrameId::ROOT, input);
    ctx.benign_extras(&mut b, router);
    ctx.emit_deposit(&mut b, router);
    finish(&mut ctx, b, Template::AttackSrc, chain_id)
}

/// A freshly created contract initiates the withdrawal, then self-destructs to the sender.
pub fn gen_attack_tgt(seed: u64, addrs: &BridgeAddresses, noise: &NoiseConfig, chain_id: u64) -> SynthTx {
    let mut ctx = Ctx::new(seed, addrs, noise);
    let mut created = [0u8; 20];
    ctx.rng.fill_bytes(&mut created);
    let attack = Address(created);
    let mut initcode = vec![0x60, 0x80, 0x60, 0x40, 0x52];
    initcode.extend((0..64).map(|_| ctx.rng.gen::<u8>()));
    let mut b = RecordBuilder::new(ctx.sender, FrameKind::Create, attack, initcode, Wei::ZERO);
    let caller = if ctx.rng.gen_bool(noise.depth_jitter) {
        b.call(FrameId::ROOT, FrameKind::Call, addrs.aggregator, calldata("execute(bytes)", &[word_u128(ctx.amount)]), Wei::ZERO)
    } else {
        FrameId::ROOT
    };
    let input = ctx.withdraw_input();
    let router = b.call(caller, FrameKind::Call, addrs.router, input, Wei::ZERO);
    ctx.benign_extras(&mut b, router);
    ctx.release_path(&mut b, router, attack);
    ctx.emit_withdrawal(&mut b, router);
    b.call(FrameId::ROOT, FrameKind::SelfDestruct, ctx.sender, Vec::new(), Wei::ZERO);
    finish(&mut ctx, b, Template::AttackTgt, chain_id)
}

pub fn gen_template(template: Template, seed: u64, addrs: &BridgeAddresses, noise: &NoiseConfig, chain_id: u64) -> SynthTx {
    match template {
        Template::NormalDeposit => gen_normal_deposit(seed, addrs, noise, chain_id),
        Template::NormalWithdrawal => gen_normal_withdrawal(seed, addrs, noise, chain_id),
        Template::AttackSrc => gen_attack_src(seed, addrs, noise, chain_id),
        Template::AttackTgt => gen_attack_tgt(seed, addrs, noise, chain_id),
    }
}

/// Seed of sample `index`, independent of generation order.
fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut preimage = b"sample".to_vec();
    preimage.extend_from_slice(&seed.to_be_bytes());
    preimage.extend_from_slice(&(index as u64).to_be_bytes());
    u64::from_be_bytes(keccak256(&preimage)[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: GenConfig,
    pub txs: Vec<SynthTx>,
}

impl SynthCorpus {
    pub fn records(&self) -> Vec<TxRecord> {
        self.txs.iter().map(|t| t.record.clone()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.txs.iter().map(|t| t.label).collect()
    }

    /// Manifest whose sources are `traces/<tx hash>.json`.
    pub fn manifest(&self) -> DatasetManifest {
        let entries = self
            .txs
            .iter()
            .map(|t| ManifestEntry { source: trace_path(&t.record), label: t.label, chain_id: t.record.chain_id })
            .collect();
        DatasetManifest::new(entries).expect("tx hashes are unique")
    }

    /// Writes `manifest.jsonl`, `synth.json` and one trace file per transaction under `dir`.
    pub fn write(&self, dir: &Path) -> Result<DatasetManifest, SynthError> {
        fs::create_dir_all(dir.join("traces"))?;
        self.txs.par_iter().try_for_each(|t| write_trace_file(&t.record, dir.join(trace_path(&t.record))))?;
        let manifest = self.manifest();
        let mut buf = Vec::new();
        manifest.write(&mut buf)?;
        fs::write(dir.join("manifest.jsonl"), buf)?;
        let sidecar = serde_json::to_string_pretty(&self.config).expect("config serializes");
        fs::write(dir.join("synth.json"), sidecar + "\n")?;
        Ok(manifest)
    }
}

fn trace_path(record: &TxRecord) -> String {
    format!("traces/{}.json", record.tx_hash)
}

/// Exact per-class counts, generated in parallel and shuffled with the corpus seed.
/// Normal samples alternate between deposit and withdrawal templates.
pub fn gen_dataset(cfg: &GenConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let (n_src, n_tgt) = cfg.attack_counts();
    let addrs = BridgeAddresses::from_seed(cfg.seed);
    let mut plan: Vec<Template> = (0..cfg.n_normal)
        .map(|i| if i % 2 == 0 { Template::NormalDeposit } else { Template::NormalWithdrawal })
        .collect();
    plan.extend(std::iter::repeat_n(Template::AttackSrc, n_src));
    plan.extend(std::iter::repeat_n(Template::AttackTgt, n_tgt));
    let mut txs: Vec<SynthTx> = plan
        .par_iter()
        .enumerate()
        .map(|(i, t)| gen_template(*t, sample_seed(cfg.seed, i), &addrs, &cfg.noise, cfg.chain_id))
        .collect();
    txs.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    Ok(SynthCorpus { config: cfg.clone(), txs })
}
