//! Drives an elicitation session the way the web UI does, minus HTTP: create
//! a session over a small catalog, then answer queries as a simulated user
//! whose taste is a fixed hidden order.
//!
//! `cargo run --release -p prefelicit-server --example session_service`
//!
//! The same flow over HTTP:
//!
//! ```text
//! prefelicit serve --bind 127.0.0.1:8080 --data-dir sessions
//! curl -XPOST localhost:8080/sessions -d '{"items":[{"id":"a"},{"id":"b"},{"id":"c"}]}'
//! curl -XPOST localhost:8080/sessions/<id>/query
//! curl -XPOST localhost:8080/sessions/<id>/answer -d '{"query_id":"<q>","winner":"a"}'
//! curl localhost:8080/sessions/<id>
//! ```

use prefelicit_server::session::{CatalogItem, NextQuery, SessionConfig};
use prefelicit_server::SessionStore;

const FILMS: [&str; 8] = ["Alien", "Brazil", "Casablanca", "Dune", "Eraserhead", "Fargo", "Gattaca", "Heat"];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let items: Vec<CatalogItem> = FILMS.iter().map(|f| CatalogItem { id: f.to_lowercase(), label: (*f).to_owned(), features: None }).collect();
    // hidden preference: position in this list, best first
    let taste = ["fargo", "alien", "heat", "brazil", "dune", "gattaca", "casablanca", "eraserhead"];
    let rank = |id: &str| taste.iter().position(|t| *t == id).unwrap_or(usize::MAX);

    let config: SessionConfig = serde_json::from_value(serde_json::json!({ "k": 2, "mc": { "R": 200, "seed": 1 } }))?;
    let dir = std::env::temp_dir().join("prefelicit-session-example");
    let _ = std::fs::remove_dir_all(&dir);
    let store = SessionStore::open(&dir)?;
    let session = store.create(items, config)?;
    println!("session {} stored under {}", session.summary().session_id, dir.display());

    for _ in 0..10 {
        let ticket = match session.next_query()? {
            NextQuery::Ticket(t) => t,
            NextQuery::Complete { .. } => break,
        };
        let [a, b] = &ticket.pair;
        let winner = if rank(&a.id) < rank(&b.id) { a } else { b };
        let summary = session.submit_answer(&ticket.query_id, &winner.id)?;
        println!("{:>10} vs {:<10} -> {:<10} menu {:?} (expected utility {:.2})", a.label, b.label, winner.label, summary.menu, summary.expected_utility);
    }
    let state = session.summary();
    println!("{} answers, {} pairs left, status {}", state.history.len(), state.remaining_pairs, state.status);
    Ok(())
}
