//! Serves the triage API over an exported error set until Ctrl-C.
//!
//! `cargo run --release --example triage_server -- [port]`
//!
//! Then, for example:
//! `curl localhost:8080/errors?page=1`
//! `curl -X POST localhost:8080/errors/<frame_id>/category -H 'content-type: application/json' -d '{"category":"both_off"}'`
//! `curl localhost:8080/plan`

use std::net::SocketAddr;

use handsup::datasets::materialize;
use handsup::nn::{ModelConfig, ModelParams};
use handsup::pipeline::{export_errors, Dataset};
use handsup::scenegen::GenerationConfig;
use handsup::triage::{serve, TriageSession};

#[tokio::main]
async fn main() -> handsup::Result<()> {
    let port: u16 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8080);
    let work = std::env::temp_dir().join("handsup-triage");
    let mut cfg = GenerationConfig::desk_synthetic();
    cfg.num_sequences = 4;
    let data = work.join("data");
    let manifest = materialize(&cfg, &data, 0..cfg.num_sequences)?;
    let model = ModelConfig::default();
    let ds = Dataset::from_manifest(&manifest, &data, model.input_size)?;
    // An untrained model gets plenty wrong, which is all a review needs.
    let params = ModelParams::init(model, 0)?;
    let errors_path = work.join("errors/errors.tsv");
    export_errors(&params, &ds, &manifest, &data, &errors_path)?;
    let base = work.join("generation.cfg");
    cfg.write(&base)?;

    let session = TriageSession::open(&errors_path, &work.join("errors/store.jsonl"), &base, &work.join("configs"))?;
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    println!("reviewing {} errors on http://{addr}", session.page(0, 1).total);
    tokio::select! {
        r = serve(session, addr) => r,
        _ = tokio::signal::ctrl_c() => Ok(()),
    }
}
