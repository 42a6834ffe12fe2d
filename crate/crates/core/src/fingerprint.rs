use sha2::{Digest, Sha256};

use crate::corpus::Sentence;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of sentence ids, labels and texts, in the given order.
pub fn sentences_fingerprint<'a, I>(sentences: I) -> String
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let mut hasher = Sha256::new();
    for s in sentences {
        hasher.update(s.sent_id.as_bytes());
        hasher.update([0x1f]);
        hasher.update(s.label.as_str().as_bytes());
        hasher.update([0x1f]);
        hasher.update(s.text.as_bytes());
        hasher.update([0x1e]);
    }
    hex::encode(hasher.finalize())
}
