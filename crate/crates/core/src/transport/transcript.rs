use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::frame::MsgKind;
use super::profile::NetProfile;
use crate::error::Result;
use crate::share::PartyId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Setup,
    Input,
    Basic,
    Indices,
    Bit,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Setup => "setup",
            Phase::Input => "input",
            Phase::Basic => "basic",
            Phase::Indices => "indices",
            Phase::Bit => "bit",
        }
    }
}

/// One frame sent by one party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub party: PartyId,
    pub round: u16,
    pub kind: MsgKind,
    pub phase: Phase,
    pub one_way: bool,
    pub count: u32,
    /// `count * width`, the information actually carried
    pub payload_bits: u64,
    /// frame payload including the message header
    pub payload_bytes: u64,
    pub frame_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<MessageRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSummary {
    pub rounds: usize,
    pub payload_bits: [u64; 2],
    pub payload_bytes: [u64; 2],
    pub frame_bytes: [u64; 2],
}

impl Transcript {
    /// Interleave two parties' logs into one, ordered by round then party.
    pub fn merge(a: &Transcript, b: &Transcript) -> Transcript {
        let mut records: Vec<MessageRecord> =
            a.records.iter().chain(b.records.iter()).cloned().collect();
        records.sort_by_key(|r| (r.round, r.party));
        Transcript { records }
    }

    pub fn phase(&self, phase: Phase) -> Transcript {
        Transcript { records: self.records.iter().filter(|r| r.phase == phase).cloned().collect() }
    }

    pub fn phases(&self, phases: &[Phase]) -> Transcript {
        Transcript {
            records: self.records.iter().filter(|r| phases.contains(&r.phase)).cloned().collect(),
        }
    }

    pub fn party(&self, party: PartyId) -> Transcript {
        Transcript { records: self.records.iter().filter(|r| r.party == party).cloned().collect() }
    }

    /// Number of distinct communication rounds.
    pub fn rounds(&self) -> usize {
        self.by_round().len()
    }

    pub fn payload_bits(&self, party: PartyId) -> u64 {
        self.records.iter().filter(|r| r.party == party).map(|r| r.payload_bits).sum()
    }

    pub fn payload_bytes(&self, party: PartyId) -> u64 {
        self.records.iter().filter(|r| r.party == party).map(|r| r.payload_bytes).sum()
    }

    pub fn frame_bytes(&self, party: PartyId) -> u64 {
        self.records.iter().filter(|r| r.party == party).map(|r| r.frame_bytes).sum()
    }

    pub fn summary(&self) -> TranscriptSummary {
        let p = [PartyId::P0, PartyId::P1];
        TranscriptSummary {
            rounds: self.rounds(),
            payload_bits: p.map(|x| self.payload_bits(x)),
            payload_bytes: p.map(|x| self.payload_bytes(x)),
            frame_bytes: p.map(|x| self.frame_bytes(x)),
        }
    }

    fn by_round(&self) -> BTreeMap<u16, Vec<&MessageRecord>> {
        let mut m: BTreeMap<u16, Vec<&MessageRecord>> = BTreeMap::new();
        for r in &self.records {
            m.entry(r.round).or_default().push(r);
        }
        m
    }

    /// Virtual network time in milliseconds.
    ///
    /// A request-response round costs one RTT plus the larger party's payload over the
    /// bandwidth; a round made only of one-way messages costs RTT/2 plus its payload.
    pub fn simulated_ms(&self, profile: &NetProfile) -> f64 {
        let mut total = 0.0;
        for recs in self.by_round().values() {
            let one_way = recs.iter().all(|r| r.one_way);
            let mut per_party = [0u64; 2];
            for r in recs {
                per_party[r.party.index()] += r.payload_bytes * 8;
            }
            let latency = if one_way { profile.rtt / 2.0 } else { profile.rtt };
            total += latency + profile.transfer_ms(per_party[0].max(per_party[1]));
        }
        total
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            party: usize,
            round: u16,
            kind: &'a str,
            phase: &'a str,
            one_way: bool,
            count: u32,
            payload_bits: u64,
            payload_bytes: u64,
            frame_bytes: u64,
        }
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(Row {
                party: r.party.index(),
                round: r.round,
                kind: r.kind.name(),
                phase: r.phase.name(),
                one_way: r.one_way,
                count: r.count,
                payload_bits: r.payload_bits,
                payload_bytes: r.payload_bytes,
                frame_bytes: r.frame_bytes,
            })?;
        }
        out.flush()?;
        Ok(())
    }
}
