//! Live teleoperation of the simulated crawler: one paced simulation thread per
//! WebSocket session, JSON commands in, decimated state frames out.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, Command, ServerMessage, StateFrame};
pub use server::{router, run, serve, AppState};
pub use session::{spawn_session, SessionCore, SessionOptions};
