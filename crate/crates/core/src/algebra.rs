//! Pairing group abstraction over BLS12-381.
//!
//! The scheme is written against a symmetric pairing `e: G0 x G0 -> GT`.
//! BLS12-381 is asymmetric, so a [`G0Element`] always carries a G1 point
//! and, when its discrete log relative to the fixed generator is shared
//! with a G2 point, that G2 "mirror" as well. Every element derived from
//! the generator by exponentiation is mirrored; hash outputs are not (their
//! discrete log is unknown), so they only pair against mirrored elements.
//! With that rule `pair(u, v) == pair(v, u)` for every pairable argument.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use ark_bls12_381::{g1, Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::scalar_mul::BatchMulPreprocessing;
use ark_ec::{CurveGroup, PrimeGroup};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{AdditiveGroup, BigInteger, Field, PrimeField, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize, Compress, Validate};
use once_cell::race::OnceBox;
use rand_core::{CryptoRng, RngCore};
use sha2::Sha256;
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

/// Identifier of the only supported group suite, embedded in every artifact.
pub const SUITE_ID: u8 = 0x01;
/// Human-readable suite name.
pub const SUITE_NAME: &str = "LCWS-BLS12381-MIRROR-V1";

/// Encoded length of a [`Scalar`] (big-endian, canonical).
pub const SCALAR_LEN: usize = 32;
const G1_LEN: usize = 48;
const G2_LEN: usize = 96;
/// Encoded length of a [`G0Element`]: tag byte, compressed G1, compressed G2 mirror.
pub const G0_LEN: usize = 1 + G1_LEN + G2_LEN;
/// Encoded length of a [`GtElement`].
pub const GT_LEN: usize = 576;

const TAG_UNMIRRORED: u8 = 0x01;
const TAG_MIRRORED: u8 = 0x03;

const KDF_DOMAIN: &[u8] = b"LCWS-V1-KDF-MASK";
const H2C_DST_PREFIX: &str = "LCWS-V1-BLS12381G1_XMD:SHA-256_SSWU_RO_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgebraError {
    /// Input shorter or longer than the fixed encoding length.
    Length { expected: usize, found: usize },
    /// Bytes decode to a value but not through its unique encoding.
    NonCanonical(&'static str),
    /// Bytes do not describe a point of the prime-order subgroup.
    InvalidElement(&'static str),
    /// Neither argument of a pairing carries a G2 mirror.
    Unpairable,
}

impl fmt::Display for AlgebraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraError::Length { expected, found } => {
                write!(f, "encoding length {found}, expected {expected}")
            }
            AlgebraError::NonCanonical(what) => write!(f, "non-canonical {what} encoding"),
            AlgebraError::InvalidElement(what) => write!(f, "invalid {what} element"),
            AlgebraError::Unpairable => write!(f, "neither pairing argument has a G2 mirror"),
        }
    }
}

impl core::error::Error for AlgebraError {}

fn check_len(bytes: &[u8], expected: usize) -> Result<(), AlgebraError> {
    if bytes.len() != expected {
        return Err(AlgebraError::Length {
            expected,
            found: bytes.len(),
        });
    }
    Ok(())
}

/// Element of the scalar field `Z_p`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Scalar(Fr);

impl Scalar {
    pub const ZERO: Scalar = Scalar(Fr::ZERO);
    pub const ONE: Scalar = Scalar(Fr::ONE);

    pub fn from_u64(v: u64) -> Self {
        Scalar(Fr::from(v))
    }

    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        Scalar(Fr::rand(rng))
    }

    /// Uniform over the nonzero scalars.
    pub fn random_nonzero<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let s = Self::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn invert(&self) -> Option<Self> {
        self.0.inverse().map(Scalar)
    }

    pub fn to_bytes(&self) -> [u8; SCALAR_LEN] {
        let be = self.0.into_bigint().to_bytes_be();
        let mut out = [0u8; SCALAR_LEN];
        out.copy_from_slice(&be);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AlgebraError> {
        check_len(bytes, SCALAR_LEN)?;
        let s = Scalar(Fr::from_be_bytes_mod_order(bytes));
        if s.to_bytes()[..] != *bytes {
            return Err(AlgebraError::NonCanonical("scalar"));
        }
        Ok(s)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar(")?;
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl From<u64> for Scalar {
    fn from(v: u64) -> Self {
        Scalar::from_u64(v)
    }
}

struct GeneratorTables {
    g1: BatchMulPreprocessing<G1Projective>,
    g2: BatchMulPreprocessing<G2Projective>,
}

fn generator_tables() -> &'static GeneratorTables {
    static TABLES: OnceBox<GeneratorTables> = OnceBox::new();
    TABLES.get_or_init(|| {
        // sized for 8-bit windows
        const SCALARS: usize = 4096;
        Box::new(GeneratorTables {
            g1: BatchMulPreprocessing::new(G1Projective::generator(), SCALARS),
            g2: BatchMulPreprocessing::new(G2Projective::generator(), SCALARS),
        })
    })
}

/// Element of the source group `G0`, written multiplicatively.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct G0Element {
    g1: G1Projective,
    mirror: Option<G2Projective>,
}

impl G0Element {
    /// The fixed public generator `g`.
    pub fn generator() -> Self {
        G0Element {
            g1: G1Projective::generator(),
            mirror: Some(G2Projective::generator()),
        }
    }

    pub fn identity() -> Self {
        G0Element {
            g1: G1Projective::zero(),
            mirror: Some(G2Projective::zero()),
        }
    }

    /// `g^x`, mirrored. Uses precomputed multiples of the generator.
    pub fn generator_pow(x: &Scalar) -> Self {
        let t = generator_tables();
        G0Element {
            g1: t.g1.batch_mul(&[x.0])[0].into(),
            mirror: Some(t.g2.batch_mul(&[x.0])[0].into()),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.g1.is_zero()
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirror.is_some()
    }

    pub fn pow(&self, x: &Scalar) -> Self {
        if *self == Self::generator() {
            return Self::generator_pow(x);
        }
        G0Element {
            g1: self.g1 * x.0,
            mirror: self.mirror.map(|m| m * x.0),
        }
    }

    pub fn inverse(&self) -> Self {
        G0Element {
            g1: -self.g1,
            mirror: self.mirror.map(|m| -m),
        }
    }

    /// Checks that the G2 mirror shares the G1 component's discrete log.
    /// Costs two pairings; not part of decoding.
    pub fn mirror_is_consistent(&self) -> bool {
        match self.mirror {
            None => true,
            Some(m) => {
                Bls12_381::pairing(self.g1, G2Projective::generator())
                    == Bls12_381::pairing(G1Projective::generator(), m)
            }
        }
    }

    pub fn to_bytes(&self) -> [u8; G0_LEN] {
        let mut out = [0u8; G0_LEN];
        out[0] = if self.mirror.is_some() {
            TAG_MIRRORED
        } else {
            TAG_UNMIRRORED
        };
        self.g1
            .into_affine()
            .serialize_compressed(&mut out[1..1 + G1_LEN])
            .expect("fixed-size G1 encoding");
        if let Some(m) = self.mirror {
            m.into_affine()
                .serialize_compressed(&mut out[1 + G1_LEN..])
                .expect("fixed-size G2 encoding");
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AlgebraError> {
        check_len(bytes, G0_LEN)?;
        let g1_bytes = &bytes[1..1 + G1_LEN];
        let g2_bytes = &bytes[1 + G1_LEN..];
        let g1 = G1Affine::deserialize_with_mode(g1_bytes, Compress::Yes, Validate::Yes)
            .map_err(|_| AlgebraError::InvalidElement("G0"))?;
        let mirror = match bytes[0] {
            TAG_MIRRORED => Some(
                G2Affine::deserialize_with_mode(g2_bytes, Compress::Yes, Validate::Yes)
                    .map_err(|_| AlgebraError::InvalidElement("G0 mirror"))?,
            ),
            TAG_UNMIRRORED => None,
            _ => return Err(AlgebraError::NonCanonical("G0 tag")),
        };
        let el = G0Element {
            g1: g1.into(),
            mirror: mirror.map(Into::into),
        };
        if el.to_bytes()[..] != *bytes {
            return Err(AlgebraError::NonCanonical("G0"));
        }
        Ok(el)
    }

    /// Orders a pair so the first component is paired against a G2 mirror.
    fn orient(u: &G0Element, v: &G0Element) -> Result<(G1Projective, G2Projective), AlgebraError> {
        if let Some(m) = v.mirror {
            Ok((u.g1, m))
        } else if let Some(m) = u.mirror {
            Ok((v.g1, m))
        } else {
            Err(AlgebraError::Unpairable)
        }
    }
}

impl Mul for G0Element {
    type Output = G0Element;

    /// Group operation. The product keeps a mirror only if both factors have one.
    fn mul(self, rhs: G0Element) -> G0Element {
        G0Element {
            g1: self.g1 + rhs.g1,
            mirror: match (self.mirror, rhs.mirror) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            },
        }
    }
}

impl fmt::Debug for G0Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bytes = self.to_bytes();
        write!(f, "G0Element(")?;
        for b in &bytes[..9] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// Element of the pairing target group, written multiplicatively.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GtElement(PairingOutput<Bls12_381>);

impl GtElement {
    pub fn identity() -> Self {
        GtElement(PairingOutput::zero())
    }

    /// `e(g, g)`.
    pub fn generator() -> Self {
        GtElement(PairingOutput::<Bls12_381>::generator())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    pub fn pow(&self, x: &Scalar) -> Self {
        GtElement(self.0 * x.0)
    }

    pub fn inverse(&self) -> Self {
        GtElement(-self.0)
    }

    pub fn div(&self, rhs: &GtElement) -> Self {
        GtElement(self.0 - rhs.0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(GT_LEN);
        self.0
            .serialize_compressed(&mut out)
            .expect("fixed-size GT encoding");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AlgebraError> {
        check_len(bytes, GT_LEN)?;
        let el = PairingOutput::<Bls12_381>::deserialize_with_mode(bytes, Compress::Yes, Validate::Yes)
            .map_err(|_| AlgebraError::InvalidElement("GT"))?;
        let el = GtElement(el);
        if el.to_bytes()[..] != *bytes {
            return Err(AlgebraError::NonCanonical("GT"));
        }
        Ok(el)
    }
}

impl Mul for GtElement {
    type Output = GtElement;
    fn mul(self, rhs: GtElement) -> GtElement {
        GtElement(self.0 + rhs.0)
    }
}

impl fmt::Debug for GtElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bytes = self.to_bytes();
        write!(f, "GtElement(")?;
        for b in &bytes[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// The bilinear map `e(u, v)`. At least one argument must be mirrored.
pub fn pair(u: &G0Element, v: &G0Element) -> Result<GtElement, AlgebraError> {
    let (a, b) = G0Element::orient(u, v)?;
    Ok(GtElement(Bls12_381::pairing(a, b)))
}

/// `e(a, b) / e(c, d)` with a single final exponentiation.
pub fn pair_ratio(
    a: &G0Element,
    b: &G0Element,
    c: &G0Element,
    d: &G0Element,
) -> Result<GtElement, AlgebraError> {
    let (p1, q1) = G0Element::orient(a, b)?;
    let (p2, q2) = G0Element::orient(c, d)?;
    Ok(GtElement(Bls12_381::multi_pairing([p1, -p2], [q1, q2])))
}

/// The two hash functions of the scheme, kept in separate domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashDomain {
    /// Message hash `H_v`.
    Message,
    /// Attribute hash `H_att`.
    Attribute,
}

impl HashDomain {
    pub fn tag(self) -> &'static str {
        match self {
            HashDomain::Message => "Hv",
            HashDomain::Attribute => "Hatt",
        }
    }
}

type G1Hasher = MapToCurveBasedHasher<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>;

/// Hash-to-curve (SSWU, random-oracle variant) into the prime-order
/// subgroup. Outputs are unmirrored.
pub fn hash_to_g0(domain: HashDomain, msg: &[u8]) -> G0Element {
    let mut dst = [0u8; 64];
    let prefix = H2C_DST_PREFIX.as_bytes();
    let tag = domain.tag().as_bytes();
    dst[..prefix.len()].copy_from_slice(prefix);
    dst[prefix.len()..prefix.len() + tag.len()].copy_from_slice(tag);
    let dst = &dst[..prefix.len() + tag.len()];
    let hasher = G1Hasher::new(dst).expect("static DST is shorter than 256 bytes");
    let point = hasher.hash(msg).expect("WB map is total on BLS12-381 G1");
    G0Element {
        g1: point.into(),
        mirror: None,
    }
}

fn mask_reader(key: &GtElement) -> impl XofReader {
    let mut xof = Shake256::default();
    xof.update(KDF_DOMAIN);
    xof.update(&key.to_bytes());
    xof.finalize_xof()
}

/// SHAKE256 keystream of `out_len` bytes keyed by the encoding of `key`.
pub fn kdf_mask(key: &GtElement, out_len: usize) -> Vec<u8> {
    let mut out = alloc::vec![0u8; out_len];
    mask_reader(key).read(&mut out);
    out
}

/// XORs the keystream of [`kdf_mask`] into `buf` without materializing it.
pub fn apply_mask(key: &GtElement, buf: &mut [u8]) {
    let mut reader = mask_reader(key);
    let mut block = [0u8; 136];
    for chunk in buf.chunks_mut(block.len()) {
        let ks = &mut block[..chunk.len()];
        reader.read(ks);
        for (b, k) in chunk.iter_mut().zip(ks.iter()) {
            *b ^= k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(7)
    }

    #[test]
    fn bilinearity_small_exponents() {
        let g = G0Element::generator();
        let lhs = pair(&g.pow(&Scalar::from(2)), &g.pow(&Scalar::from(3))).unwrap();
        let rhs = pair(&g, &g).unwrap().pow(&Scalar::from(6));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn symmetric_and_nondegenerate() {
        let mut rng = rng();
        let g = G0Element::generator();
        let a = Scalar::random(&mut rng);
        let b = Scalar::random(&mut rng);
        assert_eq!(
            pair(&g.pow(&a), &g.pow(&b)).unwrap(),
            pair(&g.pow(&b), &g.pow(&a)).unwrap()
        );
        assert!(!pair(&g, &g).unwrap().is_identity());
        assert_eq!(pair(&g, &g).unwrap(), GtElement::generator());
    }

    #[test]
    fn pairing_with_identity_is_identity() {
        let g = G0Element::generator();
        assert!(pair(&g, &G0Element::identity()).unwrap().is_identity());
    }

    #[test]
    fn hashed_elements_pair_only_against_mirrors() {
        let h = hash_to_g0(HashDomain::Attribute, b"temperature");
        assert!(!h.is_mirrored());
        assert_eq!(pair(&h, &h), Err(AlgebraError::Unpairable));
        let g = G0Element::generator();
        assert_eq!(pair(&h, &g).unwrap(), pair(&g, &h).unwrap());
        // Products with an unmirrored factor stay unmirrored.
        assert!(!(g * h).is_mirrored());
    }

    #[test]
    fn hash_determinism_and_domains() {
        let a = hash_to_g0(HashDomain::Attribute, b"temperature");
        assert_eq!(a, hash_to_g0(HashDomain::Attribute, b"temperature"));
        assert_ne!(a, hash_to_g0(HashDomain::Message, b"temperature"));
        let two = Scalar::from(2);
        assert_eq!(a.pow(&two), a * a);
    }

    #[test]
    fn exponent_laws() {
        let mut rng = rng();
        let a = Scalar::random(&mut rng);
        let b = Scalar::random_nonzero(&mut rng);
        assert_eq!((a * b) * b.invert().unwrap(), a);
        assert!(Scalar::ZERO.invert().is_none());
        let g = G0Element::generator();
        assert_eq!(g.pow(&(a + b)), g.pow(&a) * g.pow(&b));
        assert_eq!(g.pow(&a) * g.pow(&a).inverse(), G0Element::identity());
    }

    #[test]
    fn pair_ratio_matches_two_pairings() {
        let mut rng = rng();
        let g = G0Element::generator();
        let h = hash_to_g0(HashDomain::Attribute, b"x");
        let a = g.pow(&Scalar::random(&mut rng)) * h;
        let b = g.pow(&Scalar::random(&mut rng));
        let c = g.pow(&Scalar::random(&mut rng));
        let d = h.pow(&Scalar::random(&mut rng));
        let expected = pair(&a, &b).unwrap().div(&pair(&c, &d).unwrap());
        assert_eq!(pair_ratio(&a, &b, &c, &d).unwrap(), expected);
    }

    #[test]
    fn kdf_mask_properties() {
        let k = GtElement::generator().pow(&Scalar::from(11));
        assert_eq!(kdf_mask(&k, 100), kdf_mask(&k, 100));
        // prefix-stable
        assert_eq!(kdf_mask(&k, 300)[..100], kdf_mask(&k, 100)[..]);
        let payload: Vec<u8> = (0..1000u32).map(|i| (i * 7) as u8).collect();
        let mut buf = payload.clone();
        apply_mask(&k, &mut buf);
        let ks = kdf_mask(&k, buf.len());
        let direct: Vec<u8> = payload.iter().zip(&ks).map(|(a, b)| a ^ b).collect();
        assert_eq!(buf, direct);
        apply_mask(&k, &mut buf);
        assert_eq!(buf, payload);
    }

    #[test]
    fn kdf_mask_distinct_keys_differ() {
        let mut rng = rng();
        let mut seen = alloc::collections::BTreeSet::new();
        for _ in 0..100 {
            let k = GtElement::generator().pow(&Scalar::random(&mut rng));
            assert!(seen.insert(kdf_mask(&k, 32)));
        }
    }

    #[test]
    fn encodings_round_trip_and_reject_garbage() {
        let mut rng = rng();
        let s = Scalar::random(&mut rng);
        assert_eq!(Scalar::from_bytes(&s.to_bytes()).unwrap(), s);
        assert!(Scalar::from_bytes(&[0xff; SCALAR_LEN]).is_err());
        assert!(Scalar::from_bytes(&s.to_bytes()[..31]).is_err());

        let g = G0Element::generator().pow(&s);
        assert_eq!(G0Element::from_bytes(&g.to_bytes()).unwrap(), g);
        let h = hash_to_g0(HashDomain::Message, b"m");
        assert_eq!(G0Element::from_bytes(&h.to_bytes()).unwrap(), h);
        assert_eq!(
            G0Element::from_bytes(&G0Element::identity().to_bytes()).unwrap(),
            G0Element::identity()
        );
        assert!(G0Element::from_bytes(&g.to_bytes()[..G0_LEN - 1]).is_err());
        let mut bad = h.to_bytes();
        bad[G0_LEN - 1] = 1; // unmirrored element with nonzero mirror bytes
        assert!(G0Element::from_bytes(&bad).is_err());
        let mut bad = g.to_bytes();
        bad[0] = 0x02;
        assert!(G0Element::from_bytes(&bad).is_err());

        let e = GtElement::generator().pow(&s);
        assert_eq!(e.to_bytes().len(), GT_LEN);
        assert_eq!(GtElement::from_bytes(&e.to_bytes()).unwrap(), e);
        assert!(GtElement::from_bytes(&e.to_bytes()[1..]).is_err());
    }

    #[test]
    fn generator_encoding_is_stable() {
        let bytes = G0Element::generator().to_bytes();
        assert_eq!(bytes[0], TAG_MIRRORED);
        // Compressed BLS12-381 G1 generator, as published in the IETF drafts.
        assert_eq!(
            &bytes[1..9],
            &[0x97, 0xf1, 0xd3, 0xa7, 0x31, 0x97, 0xd7, 0x94]
        );
    }

    #[test]
    fn mirror_consistency_check() {
        let mut rng = rng();
        let g = G0Element::generator().pow(&Scalar::random(&mut rng));
        assert!(g.mirror_is_consistent());
        let forged = G0Element {
            g1: g.g1,
            mirror: Some(G2Projective::generator()),
        };
        assert!(!forged.mirror_is_consistent());
    }
}
