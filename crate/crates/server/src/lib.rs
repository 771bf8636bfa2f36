//! HTTP elicitation service and the `prefelicit` command line.
//!
//! A session holds a catalog and a single-user model. The service serves
//! the pair whose answer is expected to improve the recommended menu most,
//! fine-tunes on each answer and reports the current menu with its expected
//! utility. Sessions persist as JSON-lines answer logs and are rebuilt by
//! replay.
//!
//! | route | purpose |
//! |---|---|
//! | `POST /sessions` | create a session from `{items, config}` |
//! | `POST /sessions/{id}/query` | next query ticket, or `{status: "complete"}` |
//! | `POST /sessions/{id}/answer` | `{query_id, winner}` then menu summary |
//! | `GET /sessions/{id}` | read-only session summary |

pub mod api;
pub mod cli;
pub mod error;
pub mod session;
pub mod store;

pub use api::router;
pub use error::ServiceError;
pub use session::{Session, SessionConfig};
pub use store::SessionStore;
