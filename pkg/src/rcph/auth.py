"""Enrollment/login service that never stores or transmits the secret.

A user's embedding v yields secret = h(v) and public_id = h(h(v)). The server
keeps only the public_id and a discrete-log verifier V = g^s mod P, where s is
the secret digest reduced mod q. Login is a three-move proof of knowledge of
s (Schnorr identification):

    client: t = g^r                 (fresh random r per session)
    server: e uniform in [0, 2^128)
    client: z = r + e*s mod q
    server: accept iff g^z == t * V^e (mod P)

The group is the 2048-bit safe-prime MODP group (RFC 3526 group 14) with
g = 2, which generates the order-q subgroup of quadratic residues,
q = (P-1)/2. Group elements are accepted only if they lie in that subgroup
(Jacobi symbol 1), so small-subgroup tricks are rejected outright.

Wire protocol: frames of (length u32 LE covering type+payload, type u8,
payload). Types: 0x01 REGISTER{public_id 32B, verifier*}, 0x02 REGISTER_OK,
0x10 LOGIN_START{public_id 32B, commitment*}, 0x11 CHALLENGE{e 16B BE},
0x12 RESPONSE{z*}, 0x13 LOGIN_OK, 0x14 LOGIN_FAIL, 0x7F ERROR{code u8,
utf-8 message}. Starred fields are u32-LE-length-prefixed big-endian
magnitudes. The store file is append-only records of (public_id 32B,
verifier*).
"""

from __future__ import annotations

import os
import secrets
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from typing import Callable, Optional

from .core import DiscreteEmbedding
from .hashing import chain_hash, one_way_hash

try:
    from gmpy2 import jacobi as _jacobi  # type: ignore
    from gmpy2 import powmod as _powmod  # type: ignore
except ImportError:  # pragma: no cover - environment-dependent

    def _powmod(b, e, m):
        return pow(b, e, m)

    def _jacobi(a, m):
        a %= m
        result = 1
        while a:
            while a % 2 == 0:
                a //= 2
                if m % 8 in (3, 5):
                    result = -result
            a, m = m, a
            if a % 4 == 3 and m % 4 == 3:
                result = -result
            a %= m
        return result if m == 1 else 0


# RFC 3526, 2048-bit MODP group (group 14)
MODP_2048_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)


@dataclass(frozen=True)
class GroupParams:
    p: int
    g: int

    @property
    def q(self) -> int:
        return (self.p - 1) // 2


DEFAULT_GROUP = GroupParams(p=MODP_2048_P, g=2)

CHALLENGE_BITS = 128


def in_subgroup(x: int, group: GroupParams = DEFAULT_GROUP) -> bool:
    """Membership in the order-q quadratic-residue subgroup, via Jacobi symbol."""
    return 0 < x < group.p and _jacobi(x, group.p) == 1


def derive_credentials(v: DiscreteEmbedding) -> tuple[bytes, bytes]:
    """(public_id, secret) = (h(h(v)), h(v)); only the public_id may be stored."""
    secret = one_way_hash(v.tobytes())
    return chain_hash(secret), secret


def secret_scalar(secret: bytes, group: GroupParams = DEFAULT_GROUP) -> int:
    """Secret digest as an exponent mod q (negligible bias: 256-bit vs 2047-bit q)."""
    return int.from_bytes(secret, "big") % group.q


def make_verifier(secret: bytes, group: GroupParams = DEFAULT_GROUP) -> int:
    """V = g^s mod P, safe to store and publish."""
    return int(_powmod(group.g, secret_scalar(secret, group), group.p))


class SchnorrProver:
    """Holds the secret; emits one (commitment, response) pair per session."""

    def __init__(self, secret: bytes, group: GroupParams = DEFAULT_GROUP,
                 rng: Optional[Callable[[int], int]] = None):
        self._s = secret_scalar(secret, group)
        self._group = group
        self._randbelow = rng if rng is not None else secrets.randbelow
        self._r: Optional[int] = None

    def commit(self) -> int:
        """t = g^r with fresh r; starts a new session."""
        self._r = self._randbelow(self._group.q)
        return int(_powmod(self._group.g, self._r, self._group.p))

    def respond(self, challenge: int) -> int:
        """z = r + e*s mod q; consumes the pending commitment."""
        if self._r is None:
            raise RuntimeError("respond() before commit()")
        if not 0 <= challenge < (1 << CHALLENGE_BITS):
            raise ValueError("challenge out of range")
        z = (self._r + challenge * self._s) % self._group.q
        self._r = None
        return z


def verify_transcript(
    verifier: int, commitment: int, challenge: int, response: int,
    group: GroupParams = DEFAULT_GROUP,
) -> bool:
    """Accept iff g^z == t * V^e (mod P) with all elements well-formed."""
    if not in_subgroup(verifier, group) or not in_subgroup(commitment, group):
        return False
    if not 0 <= challenge < (1 << CHALLENGE_BITS):
        return False
    if not 0 <= response < group.q:
        return False
    lhs = _powmod(group.g, response, group.p)
    rhs = (commitment * _powmod(verifier, challenge, group.p)) % group.p
    return int(lhs) == int(rhs)


# ------------------------------------------------------------------ user store

class StoreError(ValueError):
    pass


class DuplicateUserError(StoreError):
    pass


def _encode_bigint(x: int) -> bytes:
    raw = x.to_bytes((x.bit_length() + 7) // 8 or 1, "big")
    return struct.pack("<I", len(raw)) + raw


def _read_bigint(buf: bytes, off: int) -> tuple[int, int]:
    if off + 4 > len(buf):
        raise StoreError("truncated length prefix")
    (ln,) = struct.unpack_from("<I", buf, off)
    off += 4
    if off + ln > len(buf):
        raise StoreError("truncated integer")
    return int.from_bytes(buf[off : off + ln], "big"), off + ln


class UserStore:
    """Append-only persistent map public_id -> verifier.

    Concurrent lookups are lock-free; registrations serialize on a lock and
    append a record before the in-memory map is updated.
    """

    def __init__(self, path):
        self.path = os.fspath(path)
        self._users: dict[bytes, int] = {}
        self._lock = threading.Lock()
        if os.path.exists(self.path):
            self._load()

    def _load(self) -> None:
        with open(self.path, "rb") as f:
            buf = f.read()
        off = 0
        while off < len(buf):
            if off + 32 > len(buf):
                raise StoreError("truncated record")
            pid = bytes(buf[off : off + 32])
            v, off = _read_bigint(buf, off + 32)
            self._users[pid] = v
        # re-registration of an id would have raised at write time

    def register(self, public_id: bytes, verifier: int) -> None:
        if len(public_id) != 32:
            raise StoreError("public_id must be 32 bytes")
        with self._lock:
            if public_id in self._users:
                raise DuplicateUserError("public_id already registered")
            with open(self.path, "ab") as f:
                f.write(public_id + _encode_bigint(verifier))
                f.flush()
                os.fsync(f.fileno())
            self._users[public_id] = verifier

    def lookup(self, public_id: bytes) -> Optional[int]:
        return self._users.get(public_id)

    def __len__(self) -> int:
        return len(self._users)


# ---------------------------------------------------------------- wire frames

REGISTER = 0x01
REGISTER_OK = 0x02
LOGIN_START = 0x10
CHALLENGE = 0x11
RESPONSE = 0x12
LOGIN_OK = 0x13
LOGIN_FAIL = 0x14
ERROR = 0x7F

ERR_MALFORMED = 1
ERR_UNKNOWN_USER = 2
ERR_DUPLICATE = 3
ERR_PROTOCOL = 4
ERR_BAD_ELEMENT = 5

_MAX_FRAME = 1 << 20


class ProtocolError(ValueError):
    pass


def write_frame(sock: socket.socket, ftype: int, payload: bytes = b"") -> None:
    sock.sendall(struct.pack("<IB", len(payload) + 1, ftype) + payload)


def _recv_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    while count:
        part = sock.recv(count)
        if not part:
            raise ConnectionError("peer closed")
        chunks.append(part)
        count -= len(part)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    (length,) = struct.unpack("<I", _recv_exact(sock, 4))
    if not 1 <= length <= _MAX_FRAME:
        raise ProtocolError(f"bad frame length {length}")
    body = _recv_exact(sock, length)
    return body[0], body[1:]


# --------------------------------------------------------------------- server

class _SessionHandler(socketserver.BaseRequestHandler):
    def handle(self):
        self.request.settimeout(30.0)
        try:
            while True:
                try:
                    ftype, payload = read_frame(self.request)
                except (ConnectionError, socket.timeout):
                    return
                try:
                    if ftype == REGISTER:
                        self._register(payload)
                    elif ftype == LOGIN_START:
                        self._login(payload)
                    else:
                        write_frame(self.request, ERROR,
                                    bytes([ERR_PROTOCOL]) + b"unexpected frame")
                        return
                except ProtocolError as e:
                    write_frame(self.request, ERROR,
                                bytes([ERR_MALFORMED]) + str(e).encode())
                    return
        except (ConnectionError, OSError):
            return

    def _register(self, payload: bytes) -> None:
        if len(payload) < 36:
            raise ProtocolError("short REGISTER")
        pid = payload[:32]
        try:
            verifier, off = _read_bigint(payload, 32)
        except StoreError as e:
            raise ProtocolError(str(e)) from e
        if off != len(payload):
            raise ProtocolError("trailing bytes in REGISTER")
        if not in_subgroup(verifier, self.server.group):
            write_frame(self.request, ERROR,
                        bytes([ERR_BAD_ELEMENT]) + b"verifier not in subgroup")
            return
        try:
            self.server.store.register(pid, verifier)
        except DuplicateUserError:
            write_frame(self.request, ERROR,
                        bytes([ERR_DUPLICATE]) + b"already registered")
            return
        write_frame(self.request, REGISTER_OK)

    def _login(self, payload: bytes) -> None:
        if len(payload) < 36:
            raise ProtocolError("short LOGIN_START")
        pid = payload[:32]
        try:
            commitment, off = _read_bigint(payload, 32)
        except StoreError as e:
            raise ProtocolError(str(e)) from e
        if off != len(payload):
            raise ProtocolError("trailing bytes in LOGIN_START")
        verifier = self.server.store.lookup(pid)
        if verifier is None:
            write_frame(self.request, ERROR,
                        bytes([ERR_UNKNOWN_USER]) + b"unknown user")
            return
        challenge = self.server.draw_challenge()
        write_frame(self.request, CHALLENGE, challenge.to_bytes(16, "big"))
        ftype, resp = read_frame(self.request)
        if ftype != RESPONSE:
            raise ProtocolError("expected RESPONSE")
        try:
            z, off = _read_bigint(resp, 0)
        except StoreError as e:
            raise ProtocolError(str(e)) from e
        if off != len(resp):
            raise ProtocolError("trailing bytes in RESPONSE")
        ok = verify_transcript(verifier, commitment, challenge, z, self.server.group)
        write_frame(self.request, LOGIN_OK if ok else LOGIN_FAIL)


class AuthServer(socketserver.ThreadingTCPServer):
    """Threaded login/registration service around a UserStore."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, store: UserStore,
                 group: GroupParams = DEFAULT_GROUP,
                 challenge_rng: Optional[Callable[[], int]] = None):
        super().__init__(address, _SessionHandler)
        self.store = store
        self.group = group
        self._challenge_rng = challenge_rng

    def draw_challenge(self) -> int:
        if self._challenge_rng is not None:
            return self._challenge_rng() % (1 << CHALLENGE_BITS)
        return secrets.randbits(CHALLENGE_BITS)


def serve(store: UserStore, address: tuple[str, int],
          challenge_rng: Optional[Callable[[], int]] = None) -> AuthServer:
    """Bind a server and serve in a background thread; caller owns shutdown()."""
    server = AuthServer(address, store, challenge_rng=challenge_rng)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


# --------------------------------------------------------------------- client

class AuthClient:
    """Blocking client for one connection; supports many sessions in sequence."""

    def __init__(self, address: tuple[str, int], timeout: float = 10.0):
        self.sock = socket.create_connection(address, timeout=timeout)

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def register(self, public_id: bytes, verifier: int) -> None:
        write_frame(self.sock, REGISTER, public_id + _encode_bigint(verifier))
        ftype, payload = read_frame(self.sock)
        if ftype == ERROR:
            raise ProtocolError(f"register rejected: code {payload[0]}, "
                                f"{payload[1:].decode(errors='replace')}")
        if ftype != REGISTER_OK:
            raise ProtocolError(f"unexpected frame {ftype:#x}")

    def login(self, public_id: bytes, secret: bytes,
              rng: Optional[Callable[[int], int]] = None) -> bool:
        prover = SchnorrProver(secret, rng=rng)
        t = prover.commit()
        write_frame(self.sock, LOGIN_START, public_id + _encode_bigint(t))
        ftype, payload = read_frame(self.sock)
        if ftype == ERROR:
            raise ProtocolError(f"login rejected: code {payload[0]}, "
                                f"{payload[1:].decode(errors='replace')}")
        if ftype != CHALLENGE or len(payload) != 16:
            raise ProtocolError("expected CHALLENGE")
        z = prover.respond(int.from_bytes(payload, "big"))
        write_frame(self.sock, RESPONSE, _encode_bigint(z))
        ftype, _ = read_frame(self.sock)
        if ftype == LOGIN_OK:
            return True
        if ftype == LOGIN_FAIL:
            return False
        raise ProtocolError(f"unexpected frame {ftype:#x}")

    def login_raw(self, public_id: bytes, commitment: int, response_bytes: bytes) -> bool:
        """Send an arbitrary response payload (for negative-path tests)."""
        write_frame(self.sock, LOGIN_START, public_id + _encode_bigint(commitment))
        ftype, payload = read_frame(self.sock)
        if ftype == ERROR:
            raise ProtocolError(f"login rejected: code {payload[0]}")
        if ftype != CHALLENGE:
            raise ProtocolError("expected CHALLENGE")
        write_frame(self.sock, RESPONSE,
                    struct.pack("<I", len(response_bytes)) + response_bytes)
        ftype, _ = read_frame(self.sock)
        return ftype == LOGIN_OK
