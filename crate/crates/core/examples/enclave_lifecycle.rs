//! Attestation, provisioning, execution, sealing and destruction of one enclave,
//! with the information-flow ledger shown at each stage.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use spoc_sim::contract::TaskId;
use spoc_sim::crypto::{generate_secret, open_result, PlatformKey, ResultKeys};
use spoc_sim::enclave::{
    AttestationVerifier, FlowLedger, FunctionStore, InstanceId, Label, Principal, ResourceMeter,
};
use spoc_sim::{AccountId, Money};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let store = FunctionStore::builtin(Money::ether(3));
    let host = AccountId([0xee; 20]);
    let requestor = AccountId([0xaa; 20]);
    let task = TaskId(0);
    let mut flow = FlowLedger::new();
    let mut meter = ResourceMeter::default();
    let mut verifier = AttestationVerifier::new(7);

    let expected = store.get("uppercase")?.measurement();
    let mut enclave = store.instantiate("uppercase", InstanceId(0), host)?;
    println!("measurement {expected}");

    let nonce = verifier.fresh_nonce();
    enclave.attest(requestor, &expected, nonce, &mut verifier)?;
    println!("attested, state {:?}", enclave.state());
    println!(
        "replayed nonce rejected: {}",
        enclave_replay(&store, host, requestor, nonce, &mut verifier)
    );

    let keys = ResultKeys::generate(&mut rng);
    let secret = generate_secret(3);
    enclave.provision(
        requestor,
        task,
        secret,
        b"hello".to_vec(),
        keys.clone(),
        &mut flow,
    )?;

    let platform = PlatformKey::from_seed(9);
    let blob = enclave.seal(&platform, &mut rng)?;
    println!(
        "sealed {} bytes of provisioned state",
        blob.ciphertext.len()
    );

    let release = enclave.execute(&mut meter, &mut flow, &mut rng)?;
    let plaintext = open_result(&release.result, &keys)?;
    println!(
        "result {:?}, compute charged {}",
        String::from_utf8_lossy(&plaintext),
        meter.consumed(host)
    );

    let h = Principal::Host(host);
    println!("host sees secret {}", flow.can_see(h, Label::Secret(task)));
    println!(
        "host sees encryption key {}",
        flow.can_see(h, Label::EncryptionKey(task))
    );
    println!(
        "host sees plaintext {}",
        flow.can_see(h, Label::PlaintextResult(task))
    );
    println!(
        "host read of plaintext: {:?}",
        enclave.host_read(Label::PlaintextResult(task), &mut flow)
    );

    enclave.destroy(&mut flow);
    println!(
        "destroyed, enclave still sees inputs: {}",
        flow.can_see(enclave.principal(), Label::Inputs(task))
    );
    Ok(())
}

fn enclave_replay(
    store: &FunctionStore,
    host: AccountId,
    requestor: AccountId,
    nonce: [u8; 16],
    verifier: &mut AttestationVerifier,
) -> bool {
    let mut other = store
        .instantiate("uppercase", InstanceId(1), host)
        .expect("builtin exists");
    let expected = other.measurement();
    other.attest(requestor, &expected, nonce, verifier).is_err()
}
