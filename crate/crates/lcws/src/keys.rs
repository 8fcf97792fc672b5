//! Key and verification-tuple files.
//!
//! `"LCWK" | version u8 | suite u8 | kind u8 | count u32 | component*`, every
//! component a 4-byte length followed by its encoding. Secret-key
//! attribute components are `name_len u16, name, D_j, D'_j`.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;

use lcws_core::algebra::SUITE_ID;
use lcws_core::scheme::{AttributeKey, EncryptionContext, MasterKey, PublicKey, SecretKey, VerificationTuple};

use crate::codec::{DecodeError, Reader, Writer};

pub const MAGIC: &[u8; 4] = b"LCWK";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum KeyKind {
    Public = 1,
    Master = 2,
    Secret = 3,
    Context = 4,
    Verification = 5,
}

impl KeyKind {
    fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => KeyKind::Public,
            2 => KeyKind::Master,
            3 => KeyKind::Secret,
            4 => KeyKind::Context,
            5 => KeyKind::Verification,
            _ => return None,
        })
    }
}

fn frame(kind: KeyKind, components: Vec<Box<dyn FnOnce(&mut Writer) + '_>>) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u8(VERSION);
    w.u8(SUITE_ID);
    w.u8(kind as u8);
    w.u32(components.len() as u32);
    for c in components {
        w.section(c);
    }
    w.buf
}

fn unframe(bytes: &[u8], want: KeyKind) -> Result<(u32, Reader<'_>), DecodeError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    match r.u8()? {
        VERSION => {}
        v => return Err(DecodeError::UnsupportedVersion(v)),
    }
    match r.u8()? {
        SUITE_ID => {}
        s => return Err(DecodeError::UnknownSuite(s)),
    }
    if KeyKind::from_u8(r.u8()?) != Some(want) {
        return Err(DecodeError::Malformed("file holds a different kind of key"));
    }
    let count = r.u32()?;
    Ok((count, r))
}

fn expect_count(count: u32, want: u32) -> Result<(), DecodeError> {
    if count != want {
        return Err(DecodeError::Malformed("wrong number of key components"));
    }
    Ok(())
}

/// Reads one section holding exactly what `read` consumes.
fn component<'a, T>(
    r: &mut Reader<'a>,
    read: impl FnOnce(&mut Reader<'a>) -> Result<T, DecodeError>,
) -> Result<T, DecodeError> {
    let mut s = r.section()?;
    let v = read(&mut s)?;
    s.finish()?;
    Ok(v)
}

pub fn encode_public(pk: &PublicKey) -> Vec<u8> {
    frame(
        KeyKind::Public,
        vec![
            Box::new(|w| w.g0(&pk.g)),
            Box::new(|w| w.g0(&pk.h)),
            Box::new(|w| w.gt(&pk.egg_alpha)),
        ],
    )
}

pub fn decode_public(bytes: &[u8]) -> Result<PublicKey, DecodeError> {
    let (count, mut r) = unframe(bytes, KeyKind::Public)?;
    expect_count(count, 3)?;
    let pk = PublicKey {
        g: component(&mut r, |s| s.g0())?,
        h: component(&mut r, |s| s.g0())?,
        egg_alpha: component(&mut r, |s| s.gt())?,
    };
    r.finish()?;
    Ok(pk)
}

pub fn encode_master(mk: &MasterKey) -> Vec<u8> {
    frame(
        KeyKind::Master,
        vec![
            Box::new(|w| w.scalar(&mk.beta)),
            Box::new(|w| w.g0(&mk.g_alpha)),
            Box::new(|w| w.scalar(&mk.q)),
            Box::new(|w| w.scalar(&mk.k)),
        ],
    )
}

pub fn decode_master(bytes: &[u8]) -> Result<MasterKey, DecodeError> {
    let (count, mut r) = unframe(bytes, KeyKind::Master)?;
    expect_count(count, 4)?;
    let mk = MasterKey {
        beta: component(&mut r, |s| s.scalar())?,
        g_alpha: component(&mut r, |s| s.g0())?,
        q: component(&mut r, |s| s.scalar())?,
        k: component(&mut r, |s| s.scalar())?,
    };
    r.finish()?;
    if mk.beta.is_zero() || mk.q.is_zero() || mk.k.is_zero() {
        return Err(DecodeError::Malformed("master key has a zero exponent"));
    }
    Ok(mk)
}

pub fn encode_context(ctx: &EncryptionContext) -> Vec<u8> {
    frame(
        KeyKind::Context,
        vec![Box::new(|w| w.scalar(&ctx.q)), Box::new(|w| w.scalar(&ctx.k))],
    )
}

pub fn decode_context(bytes: &[u8]) -> Result<EncryptionContext, DecodeError> {
    let (count, mut r) = unframe(bytes, KeyKind::Context)?;
    expect_count(count, 2)?;
    let ctx = EncryptionContext {
        q: component(&mut r, |s| s.scalar())?,
        k: component(&mut r, |s| s.scalar())?,
    };
    r.finish()?;
    if ctx.q.is_zero() || ctx.k.is_zero() {
        return Err(DecodeError::Malformed("encryption context has a zero exponent"));
    }
    Ok(ctx)
}

pub fn encode_secret(sk: &SecretKey) -> Vec<u8> {
    let mut parts: Vec<Box<dyn FnOnce(&mut Writer) + '_>> =
        vec![Box::new(|w| w.g0(&sk.d)), Box::new(|w| w.g0(&sk.d_hat))];
    for (name, key) in &sk.components {
        parts.push(Box::new(move |w| {
            w.u16(name.len() as u16);
            w.bytes(name.as_bytes());
            w.g0(&key.d);
            w.g0(&key.d_prime);
        }));
    }
    frame(KeyKind::Secret, parts)
}

pub fn decode_secret(bytes: &[u8]) -> Result<SecretKey, DecodeError> {
    let (count, mut r) = unframe(bytes, KeyKind::Secret)?;
    if count < 3 {
        return Err(DecodeError::Malformed("secret key has no attribute components"));
    }
    let d = component(&mut r, |s| s.g0())?;
    let d_hat = component(&mut r, |s| s.g0())?;
    let mut components = BTreeMap::new();
    let mut last: Option<String> = None;
    for _ in 2..count {
        let (name, key) = component(&mut r, |s| {
            let len = s.u16()? as usize;
            let name = std::str::from_utf8(s.take(len)?)
                .map_err(|_| DecodeError::Malformed("attribute is not UTF-8"))?
                .to_owned();
            let key = AttributeKey {
                d: s.g0()?,
                d_prime: s.g0()?,
            };
            Ok((name, key))
        })?;
        if last.as_ref().is_some_and(|l| *l >= name) {
            return Err(DecodeError::NonCanonical);
        }
        last = Some(name.clone());
        components.insert(name, key);
    }
    r.finish()?;
    Ok(SecretKey { d, d_hat, components })
}

pub fn encode_verification(v: &VerificationTuple) -> Vec<u8> {
    frame(
        KeyKind::Verification,
        vec![Box::new(|w| w.g0(&v.v1)), Box::new(|w| w.g0(&v.v2))],
    )
}

pub fn decode_verification(bytes: &[u8]) -> Result<VerificationTuple, DecodeError> {
    let (count, mut r) = unframe(bytes, KeyKind::Verification)?;
    expect_count(count, 2)?;
    let v = VerificationTuple {
        v1: component(&mut r, |s| s.g0())?,
        v2: component(&mut r, |s| s.g0())?,
    };
    r.finish()?;
    Ok(v)
}

/// Writes a file readable only by its owner (on Unix).
pub fn write_private(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut opts = OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        f.set_permissions(std::fs::Permissions::from_mode(0o600))?;
    }
    f.write_all(bytes)?;
    f.sync_all()
}
