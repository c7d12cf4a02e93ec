//! Framed message transport with round and byte accounting.
//!
//! Both backends carry identical frames. The simulated network never sleeps: latency
//! and bandwidth are charged afterwards from the transcript, so timings are a pure
//! function of (rounds, bytes, profile).

mod channel;
mod frame;
mod link;
mod profile;
mod transcript;

pub use channel::{channel_pair, Channel};
pub use frame::{Frame, Message, MsgKind, FRAME_HEADER_LEN, MESSAGE_HEADER_LEN, SETUP_ROUND};
pub use link::{mem_pair, Link, MemLink, TcpLink};
pub use profile::NetProfile;
pub use transcript::{MessageRecord, Phase, Transcript, TranscriptSummary};
