// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Process binary container.
//!
//! All integers are little-endian.
//!
//! | offset | size | field        |
//! |--------|------|--------------|
//! | 0      | 4    | magic `KSIM` |
//! | 4      | 2    | version (1)  |
//! | 6      | 2    | header_len   |
//! | 8      | 4    | payload_len  |
//! | 12     | 4    | min_memory   |
//! | 16     | 2    | entry_len    |
//! | 18     | n    | entry name   |
//! | 18+n   | 8    | digest       |
//! | 26+n   | 2    | key_id       |
//!
//! `header_len` is therefore `28 + entry_len`; the payload follows it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hw::fnv1a64;

pub const MAGIC: &[u8; 4] = b"KSIM";
pub const VERSION: u16 = 1;
pub const FIXED_HEADER_LEN: usize = 28;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Credential {
    pub digest: u64,
    pub key_id: u16,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessBinary {
    pub version: u16,
    pub min_memory: u32,
    pub entry: String,
    pub credential: Credential,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HeaderError {
    #[error("binary shorter than its header")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u16),
    #[error("header_len {declared} does not match computed {computed}")]
    BadHeaderLen { declared: u16, computed: usize },
    #[error("payload_len {declared} does not match {actual} trailing bytes")]
    BadPayloadLen { declared: u32, actual: usize },
    #[error("entry name is empty or not UTF-8")]
    BadEntry,
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HeaderError> {
        let end = self.at.checked_add(n).ok_or(HeaderError::Truncated)?;
        let s = self.bytes.get(self.at..end).ok_or(HeaderError::Truncated)?;
        self.at = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, HeaderError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, HeaderError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, HeaderError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl ProcessBinary {
    /// Builds a binary whose credential is the payload digest.
    pub fn new(entry: &str, min_memory: u32, payload: Vec<u8>, key_id: u16) -> Self {
        ProcessBinary {
            version: VERSION,
            min_memory,
            entry: entry.into(),
            credential: Credential {
                digest: fnv1a64(&payload),
                key_id,
            },
            payload,
        }
    }

    pub fn header_len(&self) -> usize {
        FIXED_HEADER_LEN + self.entry.len()
    }

    /// Structural check of the header. Does not look at the credential.
    pub fn parse(bytes: &[u8]) -> Result<Self, HeaderError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(HeaderError::BadMagic);
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(HeaderError::BadVersion(version));
        }
        let header_len = r.u16()?;
        let payload_len = r.u32()?;
        let min_memory = r.u32()?;
        let entry_len = r.u16()? as usize;
        let computed = FIXED_HEADER_LEN + entry_len;
        if header_len as usize != computed {
            return Err(HeaderError::BadHeaderLen {
                declared: header_len,
                computed,
            });
        }
        let entry = std::str::from_utf8(r.take(entry_len)?)
            .map_err(|_| HeaderError::BadEntry)?
            .to_string();
        if entry.is_empty() {
            return Err(HeaderError::BadEntry);
        }
        let digest = r.u64()?;
        let key_id = r.u16()?;
        let payload = &bytes[r.at..];
        if payload.len() != payload_len as usize {
            return Err(HeaderError::BadPayloadLen {
                declared: payload_len,
                actual: payload.len(),
            });
        }
        Ok(ProcessBinary {
            version,
            min_memory,
            entry,
            credential: Credential { digest, key_id },
            payload: payload.to_vec(),
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header_len() + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.header_len() as u16).to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.min_memory.to_le_bytes());
        out.extend_from_slice(&(self.entry.len() as u16).to_le_bytes());
        out.extend_from_slice(self.entry.as_bytes());
        out.extend_from_slice(&self.credential.digest.to_le_bytes());
        out.extend_from_slice(&self.credential.key_id.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

/// How the integrity stage judges a computed digest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum VerifierPolicy {
    AcceptAll,
    #[default]
    DigestMatch,
    DigestAndKey {
        #[serde(default)]
        trusted_keys: Vec<u16>,
    },
}

impl VerifierPolicy {
    pub fn accepts(&self, credential: &Credential, computed: u64) -> bool {
        match self {
            VerifierPolicy::AcceptAll => true,
            VerifierPolicy::DigestMatch => credential.digest == computed,
            VerifierPolicy::DigestAndKey { trusted_keys } => {
                credential.digest == computed && trusted_keys.contains(&credential.key_id)
            }
        }
    }
}
