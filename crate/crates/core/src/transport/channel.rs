use super::frame::{Frame, Message, MsgKind, FRAME_HEADER_LEN, SETUP_ROUND};
use super::link::{mem_pair, Link};
use super::transcript::{MessageRecord, Phase, Transcript};
use crate::error::{Error, Result};
use crate::share::PartyId;

/// One party's endpoint. Every call is a protocol round; both parties must issue the
/// same sequence of calls, and a frame from the wrong round or of the wrong kind is a
/// desync error.
pub struct Channel {
    party: PartyId,
    link: Box<dyn Link>,
    next_round: u16,
    phase: Phase,
    capture: bool,
    records: Vec<MessageRecord>,
}

/// Two connected in-process endpoints, party 0 first.
pub fn channel_pair() -> (Channel, Channel) {
    let (a, b) = mem_pair();
    (Channel::new(PartyId::P0, a), Channel::new(PartyId::P1, b))
}

impl Channel {
    pub fn new(party: PartyId, link: impl Link + 'static) -> Self {
        Self {
            party,
            link: Box::new(link),
            next_round: 0,
            phase: Phase::Input,
            capture: false,
            records: Vec::new(),
        }
    }

    pub fn party(&self) -> PartyId {
        self.party
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    /// Keep the raw values of every sent message in the transcript.
    pub fn capture_values(&mut self, on: bool) {
        self.capture = on;
    }

    pub fn next_round(&self) -> u16 {
        self.next_round
    }

    /// Simultaneous send and receive: one full round trip.
    pub fn exchange(&mut self, kind: MsgKind, msg: &Message) -> Result<Message> {
        let round = self.bump()?;
        self.push(round, kind, msg, false)?;
        self.pull(round, kind)
    }

    /// One-way message to the peer.
    pub fn send(&mut self, kind: MsgKind, msg: &Message) -> Result<()> {
        let round = self.bump()?;
        self.push(round, kind, msg, true)
    }

    /// Receive the peer's one-way message.
    pub fn recv(&mut self, kind: MsgKind) -> Result<Message> {
        let round = self.bump()?;
        self.pull(round, kind)
    }

    /// Exchange opaque setup bytes. Not counted as a round and not logged.
    pub fn handshake(&mut self, hello: &[u8]) -> Result<Vec<u8>> {
        let f = Frame { round: SETUP_ROUND, kind: MsgKind::Hello, payload: hello.to_vec() };
        self.link.send_frame(f.encode())?;
        let got = Frame::decode(&self.link.recv_frame()?)?;
        if got.round != SETUP_ROUND || got.kind != MsgKind::Hello {
            return Err(Error::Desync(format!(
                "expected handshake, got {:?} in round {}",
                got.kind, got.round
            )));
        }
        Ok(got.payload)
    }

    pub fn transcript(&self) -> Transcript {
        Transcript { records: self.records.clone() }
    }

    pub fn take_transcript(&mut self) -> Transcript {
        Transcript { records: std::mem::take(&mut self.records) }
    }

    fn bump(&mut self) -> Result<u16> {
        let r = self.next_round;
        if r == SETUP_ROUND {
            return Err(Error::Channel("round counter exhausted".into()));
        }
        self.next_round += 1;
        Ok(r)
    }

    fn push(&mut self, round: u16, kind: MsgKind, msg: &Message, one_way: bool) -> Result<()> {
        let payload = msg.encode();
        let payload_bytes = payload.len() as u64;
        self.records.push(MessageRecord {
            party: self.party,
            round,
            kind,
            phase: self.phase,
            one_way,
            count: msg.len() as u32,
            payload_bits: msg.payload_bits(),
            payload_bytes,
            frame_bytes: payload_bytes + FRAME_HEADER_LEN as u64,
            values: self.capture.then(|| msg.values.clone()),
        });
        self.link.send_frame(Frame { round, kind, payload }.encode())
    }

    fn pull(&mut self, round: u16, kind: MsgKind) -> Result<Message> {
        let f = Frame::decode(&self.link.recv_frame()?)?;
        if f.round != round || f.kind != kind {
            return Err(Error::Desync(format!(
                "expected {:?} in round {round}, got {:?} in round {}",
                kind, f.kind, f.round
            )));
        }
        Message::decode(&f.payload)
    }
}
