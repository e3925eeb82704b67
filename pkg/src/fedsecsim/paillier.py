"""Additive homomorphic encryption (Paillier, g = n + 1 variant).

Plaintexts are residues mod n; the product of two ciphertexts decrypts to
the sum of plaintexts, and c^k decrypts to k*m. Real-valued parameter
vectors go through a signed fixed-point encoding before encryption.

Keys here are SIMULATION-GRADE (default 512-bit modulus, seeded
randomness) so desk-scale experiments run fast and reproducibly. This is
NOT production cryptography.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import gmpy2
import numpy as np

from .rng import py_rng


class EncodingError(ValueError):
    """Fixed-point magnitude overflow."""


MIN_KEY_BITS = 64


@dataclass(frozen=True)
class PublicKey:
    n: int
    g: int
    key_bits: int

    @property
    def nsquare(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class KeyPair:
    public: PublicKey
    lambda_priv: int  # lcm(p-1, q-1)
    mu_priv: int  # (L(g^lambda mod n^2))^-1 mod n


def _random_prime(bits: int, rng: random.Random) -> int:
    candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
    return int(gmpy2.next_prime(candidate))


def keypair_from_primes(p: int, q: int) -> KeyPair:
    """Build a key from explicit primes (test hook for toy moduli)."""
    if p == q:
        raise ValueError("p and q must be distinct")
    if not (gmpy2.is_prime(p) and gmpy2.is_prime(q)):
        raise ValueError("p and q must both be prime")
    n = p * q
    if math.gcd(n, (p - 1) * (q - 1)) != 1:
        raise ValueError("gcd(n, phi(n)) != 1, pick different primes")
    g = n + 1
    lam = math.lcm(p - 1, q - 1)
    # with g = n+1, g^lam mod n^2 = 1 + lam*n, so L(.) = lam mod n
    l_value = (int(gmpy2.powmod(g, lam, n * n)) - 1) // n
    mu = int(gmpy2.invert(l_value, n))
    return KeyPair(PublicKey(n=n, g=g, key_bits=n.bit_length()), lam, mu)


def keygen(key_bits: int = 512, seed: int = 0) -> KeyPair:
    """Deterministic keypair for the given seed; key_bits >= 64 enforced."""
    if key_bits < MIN_KEY_BITS:
        raise ValueError(f"key_bits must be >= {MIN_KEY_BITS} (got {key_bits})")
    rng = py_rng("paillier-keygen", seed, key_bits)
    half = key_bits // 2
    for _ in range(64):
        p = _random_prime(half, rng)
        q = _random_prime(half, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() not in (key_bits - 1, key_bits):
            continue
        if math.gcd(n, (p - 1) * (q - 1)) != 1:
            continue
        kp = keypair_from_primes(p, q)
        return KeyPair(PublicKey(n=n, g=n + 1, key_bits=key_bits), kp.lambda_priv, kp.mu_priv)
    raise RuntimeError(f"failed to generate a {key_bits}-bit modulus")


def encrypt(pk: PublicKey, m: int, rng: random.Random) -> int:
    """Randomized encryption of a residue m in [0, n)."""
    if not 0 <= m < pk.n:
        raise ValueError(f"plaintext {m} outside [0, n)")
    n, n2 = pk.n, pk.nsquare
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            break
    return int((1 + m * n) % n2 * gmpy2.powmod(r, n, n2) % n2)


def decrypt(keys: KeyPair, c: int) -> int:
    n, n2 = keys.public.n, keys.public.nsquare
    u = int(gmpy2.powmod(c, keys.lambda_priv, n2))
    return (u - 1) // n * keys.mu_priv % n


def add_ciphertexts(pk: PublicKey, a: int, b: int) -> int:
    """Homomorphic addition: decrypts to (m_a + m_b) mod n."""
    return a * b % pk.nsquare


def scalar_mul(pk: PublicKey, a: int, k: int) -> int:
    """Homomorphic scaling: decrypts to (k * m_a) mod n. Requires 0 <= k < n."""
    if not 0 <= k < pk.n:
        raise ValueError(f"scalar {k} outside [0, n)")
    return int(gmpy2.powmod(a, k, pk.nsquare))


# ---------------------------------------------------------------------------
# fixed-point encoding of real vectors


@dataclass(frozen=True)
class FixedPointEncoding:
    """Signed fixed point: x -> round(x * 2^scale_bits), negatives as n - |q|."""

    scale_bits: int = 24
    clamp_abs: float = 64.0

    def __post_init__(self) -> None:
        if self.scale_bits < 1 or self.clamp_abs <= 0:
            raise ValueError("scale_bits must be >= 1 and clamp_abs > 0")

    @property
    def scale(self) -> int:
        return 1 << self.scale_bits


@dataclass(frozen=True)
class CipherVector:
    """Elementwise Paillier ciphertexts of a fixed-point-encoded vector."""

    entries: tuple[int, ...]
    dim: int
    encoding: FixedPointEncoding

    def __post_init__(self) -> None:
        if len(self.entries) != self.dim:
            raise ValueError("entry count does not match dim")


def encode_value(x: float, enc: FixedPointEncoding) -> int:
    """Signed fixed-point integer for one coordinate (pre-modular)."""
    if not np.isfinite(x) or abs(x) > enc.clamp_abs:
        raise EncodingError(f"value {x} exceeds clamp_abs {enc.clamp_abs}")
    return int(round(x * enc.scale))


def decode_value(q: int, enc: FixedPointEncoding) -> float:
    return q / enc.scale


def to_modular(q: int, n: int) -> int:
    """Signed integer -> residue; negatives map into (n/2, n)."""
    return q % n


def from_modular(v: int, n: int) -> int:
    """Residue -> signed integer under the symmetric convention."""
    return v - n if v > n // 2 else v


def encode_vector(
    v: np.ndarray, enc: FixedPointEncoding, pk: PublicKey, rng: random.Random
) -> CipherVector:
    """Encrypt a real vector coordinate-wise; overflow names the coordinate."""
    v = np.asarray(v, dtype=np.float64)
    entries = []
    for k, x in enumerate(v):
        try:
            q = encode_value(float(x), enc)
        except EncodingError as e:
            raise EncodingError(f"coordinate {k}: {e}") from None
        entries.append(encrypt(pk, to_modular(q, pk.n), rng))
    return CipherVector(tuple(entries), len(entries), enc)


def decrypt_vector(keys: KeyPair, cv: CipherVector) -> list[int]:
    """Raw plaintext residues of every entry."""
    return [decrypt(keys, c) for c in cv.entries]


def decode_vector(
    residues: list[int], enc: FixedPointEncoding, pk: PublicKey, extra_scale_bits: int = 0
) -> np.ndarray:
    """Residues -> reals; ``extra_scale_bits`` undoes quantized-weight scaling."""
    scale = float(1 << (enc.scale_bits + extra_scale_bits))
    return np.array([from_modular(r, pk.n) / scale for r in residues])


def check_no_wraparound(
    num_nodes: int, enc: FixedPointEncoding, pk: PublicKey, weight_bits: int = 0
) -> None:
    """Aggregated magnitudes must stay below n/2 or signed decoding breaks.

    ``weight_bits`` accounts for quantized-weight scaling during encrypted
    weighted sums (weights multiply encodings by up to 2^weight_bits).
    """
    bound = num_nodes * (1 << (enc.scale_bits + weight_bits)) * enc.clamp_abs
    if bound >= pk.n / 2:
        raise ValueError(
            f"wraparound guard violated: {num_nodes} nodes * 2^{enc.scale_bits + weight_bits}"
            f" * {enc.clamp_abs} >= n/2; increase key_bits or reduce scale/clamp"
        )


# ---------------------------------------------------------------------------
# wire format: length-prefixed big-endian magnitudes


def serialize_ciphertext(c: int) -> bytes:
    raw = c.to_bytes((c.bit_length() + 7) // 8 or 1, "big")
    return len(raw).to_bytes(4, "big") + raw


def deserialize_ciphertext(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Returns (ciphertext, next_offset)."""
    length = int.from_bytes(data[offset : offset + 4], "big")
    start = offset + 4
    return int.from_bytes(data[start : start + length], "big"), start + length


def serialize_cipher_vector(cv: CipherVector) -> bytes:
    out = [cv.dim.to_bytes(4, "big")]
    out.extend(serialize_ciphertext(c) for c in cv.entries)
    return b"".join(out)


def deserialize_cipher_vector(data: bytes, enc: FixedPointEncoding) -> CipherVector:
    dim = int.from_bytes(data[:4], "big")
    entries = []
    offset = 4
    for _ in range(dim):
        c, offset = deserialize_ciphertext(data, offset)
        entries.append(c)
    return CipherVector(tuple(entries), dim, enc)
