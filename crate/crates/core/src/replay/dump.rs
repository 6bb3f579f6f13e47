//! Length-prefixed binary transition dump.
//!
//! Layout: magic `AMRLRPL1`, then per record a little-endian `u32` byte
//! length followed by the record body:
//! `view u8 | obs bytes | action u32 | reward f64 | done u8 | view u8 | next_obs bytes`.

use std::io::{Read, Write};

use super::Transition;
use crate::env::Observation;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AMRLRPL1";

fn put_obs(out: &mut Vec<u8>, obs: &Observation) -> Result<()> {
    let view = u8::try_from(obs.view).map_err(|_| Error::Format("view larger than 255".into()))?;
    if obs.data.len() != obs.view * obs.view * 3 {
        return Err(Error::Format("observation length does not match view".into()));
    }
    out.push(view);
    out.extend_from_slice(&obs.data);
    Ok(())
}

fn encode(t: &Transition) -> Result<Vec<u8>> {
    let mut body = Vec::with_capacity(2 * t.obs.data.len() + 16);
    put_obs(&mut body, &t.obs)?;
    let action = u32::try_from(t.action).map_err(|_| Error::Format("action id overflows u32".into()))?;
    body.extend_from_slice(&action.to_le_bytes());
    body.extend_from_slice(&t.reward.to_le_bytes());
    body.push(u8::from(t.done));
    put_obs(&mut body, &t.next_obs)?;
    Ok(body)
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("record body truncated".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn obs(&mut self) -> Result<Observation> {
        let view = usize::from(self.take(1)?[0]);
        let data = self.take(view * view * 3)?.to_vec();
        Ok(Observation { view, data })
    }
}

fn decode(bytes: &[u8]) -> Result<Transition> {
    let mut cur = Cursor { bytes };
    let obs = cur.obs()?;
    let action = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes")) as usize;
    let reward = f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
    let done = match cur.take(1)?[0] {
        0 => false,
        1 => true,
        b => return Err(Error::Format(format!("bad done flag {b}"))),
    };
    let next_obs = cur.obs()?;
    if !cur.bytes.is_empty() {
        return Err(Error::Format("trailing bytes in record".into()));
    }
    Ok(Transition {
        obs,
        action,
        reward,
        next_obs,
        done,
    })
}

pub fn write_dump<'a, W: Write>(mut out: W, transitions: impl IntoIterator<Item = &'a Transition>) -> Result<usize> {
    let io = |e| Error::io("<replay dump>", e);
    out.write_all(MAGIC).map_err(io)?;
    let mut n = 0;
    for t in transitions {
        let body = encode(t)?;
        let len = u32::try_from(body.len()).map_err(|_| Error::Format("record too large".into()))?;
        out.write_all(&len.to_le_bytes()).map_err(io)?;
        out.write_all(&body).map_err(io)?;
        n += 1;
    }
    out.flush().map_err(io)?;
    Ok(n)
}

pub fn read_dump<R: Read>(mut input: R) -> Result<Vec<Transition>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<replay dump>", e))?;
    let rest = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| Error::Format("missing replay dump magic".into()))?;
    let mut cur = Cursor { bytes: rest };
    let mut out = Vec::new();
    while !cur.bytes.is_empty() {
        let len = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes")) as usize;
        out.push(decode(cur.take(len)?)?);
    }
    Ok(out)
}
