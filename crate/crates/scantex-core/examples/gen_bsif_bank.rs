//! Regenerates the shipped BSIF bank data file from the fixed seed.
//!
//! Run with `cargo run -p scantex-core --example gen_bsif_bank`.

fn main() {
    let bank =
        scantex_core::features::BsifBank::generate(scantex_core::features::bsif::DEFAULT_BANK_SEED);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/bsif_bank.json");
    std::fs::write(path, bank.to_json()).expect("write bank");
    println!("wrote {path}");
}
