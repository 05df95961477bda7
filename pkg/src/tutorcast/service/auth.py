"""Principals, password hashing, stateless signed tokens.

Tokens are self-contained (identity + role + expiry, HMAC-signed), so
any service instance can verify a request without shared session state,
the property that lets instances scale horizontally behind a balancer.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import os
import time
from dataclasses import dataclass
from typing import Optional, Protocol

from ..errors import AuthenticationError, InputError

ROLE_AUTHOR = "author"
ROLE_STUDENT = "student"
ROLES = (ROLE_AUTHOR, ROLE_STUDENT)

_PBKDF2_ITERATIONS = 30_000


@dataclass(frozen=True)
class Principal:
    user_id: str
    role: str
    auth_provider: str = "local"


def hash_password(password: str) -> str:
    salt = os.urandom(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt, _PBKDF2_ITERATIONS)
    return f"pbkdf2${_PBKDF2_ITERATIONS}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        _, iterations, salt_hex, digest_hex = stored.split("$")
    except ValueError:
        return False
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), bytes.fromhex(salt_hex), int(iterations))
    return hmac.compare_digest(digest.hex(), digest_hex)


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode()


def _unb64(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + pad)


class TokenSigner:
    def __init__(self, secret: str, ttl_s: int = 86_400):
        self._key = secret.encode()
        self.ttl_s = ttl_s

    def issue(self, principal: Principal, now: Optional[float] = None) -> str:
        now = time.time() if now is None else now
        payload = {
            "uid": principal.user_id,
            "role": principal.role,
            "provider": principal.auth_provider,
            "exp": int(now + self.ttl_s),
        }
        body = _b64(json.dumps(payload, separators=(",", ":")).encode())
        sig = _b64(hmac.new(self._key, body.encode(), hashlib.sha256).digest())
        return f"{body}.{sig}"

    def verify(self, token: str, now: Optional[float] = None) -> Principal:
        now = time.time() if now is None else now
        try:
            body, sig = token.split(".")
        except ValueError:
            raise AuthenticationError("malformed token") from None
        expected = _b64(hmac.new(self._key, body.encode(), hashlib.sha256).digest())
        if not hmac.compare_digest(sig, expected):
            raise AuthenticationError("bad token signature")
        payload = json.loads(_unb64(body))
        if payload["exp"] < now:
            raise AuthenticationError("token expired")
        return Principal(user_id=payload["uid"], role=payload["role"], auth_provider=payload["provider"])


class ExternalAuthVerifier(Protocol):
    """Pluggable third-party identity check; returns the verified email."""

    def verify(self, external_token: str) -> Optional[str]: ...


class StubExternalVerifier:
    """Accepts ``stub:<email>`` tokens; real providers are deployment config."""

    prefix = "stub:"

    def verify(self, external_token: str) -> Optional[str]:
        if external_token.startswith(self.prefix):
            email = external_token[len(self.prefix) :].strip()
            return email or None
        return None


def check_role(role: str) -> str:
    if role not in ROLES:
        raise InputError(f"role must be one of {ROLES}")
    return role
