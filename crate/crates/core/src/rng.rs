//! Named random substreams derived from a single run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Init,
    Dropout,
    Shuffle,
    Synth,
}

impl Stream {
    pub const ALL: [Stream; 4] = [Stream::Init, Stream::Dropout, Stream::Shuffle, Stream::Synth];

    pub fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Dropout => 2,
            Stream::Shuffle => 3,
            Stream::Synth => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::Init => "init",
            Stream::Dropout => "dropout",
            Stream::Shuffle => "shuffle",
            Stream::Synth => "synth",
        }
    }
}

/// ChaCha8 keyed by `seed`, on the stream reserved for `stream`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
