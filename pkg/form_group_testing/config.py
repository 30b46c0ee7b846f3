"""Runtime settings, read from the environment.

No variable is required. The recognised variables are:

*   CGT_THREADS: worker processes used for seeded trial simulations (default 1).
*   CGT_MAX_VERIFY_N: largest n the brute-force verifiers accept without force.
*   CGT_MAX_VERIFY_SUBSETS: largest subset enumeration the verifiers accept.
*   CGT_OTLP_ENDPOINT: if set, the CLI exports traces there over OTLP/gRPC.
*   CGT_OTLP_HEADERS_JSON: JSON object of headers for the OTLP exporter, for
    example '{"x-honeycomb-team": "<API key>"}'.
"""
from dataclasses import dataclass
import json
import os
from typing import Dict, Mapping, Optional

from form_group_testing.errors import InputError

DEFAULT_MAX_VERIFY_N = 64
DEFAULT_MAX_VERIFY_SUBSETS = 10**7


def _int_var(environ: Mapping[str, str], key: str, default: int, minimum: int) -> int:
    raw = environ.get(key)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"{key} must be an integer, got {raw!r}.") from None
    if value < minimum:
        raise InputError(f"{key} must be at least {minimum}, got {value}.")
    return value


@dataclass(frozen=True)
class Settings:
    threads: int = 1
    max_verify_n: int = DEFAULT_MAX_VERIFY_N
    max_verify_subsets: int = DEFAULT_MAX_VERIFY_SUBSETS
    otlp_endpoint: Optional[str] = None
    otlp_headers: Optional[Dict[str, str]] = None

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> "Settings":
        environ = os.environ if environ is None else environ
        headers = None
        raw_headers = environ.get("CGT_OTLP_HEADERS_JSON")
        if raw_headers:
            try:
                headers = dict(json.loads(raw_headers))
            except (ValueError, TypeError):
                raise InputError(
                    f"CGT_OTLP_HEADERS_JSON must be a JSON object, got {raw_headers!r}."
                ) from None
        return cls(
            threads=_int_var(environ, "CGT_THREADS", 1, 1),
            max_verify_n=_int_var(
                environ, "CGT_MAX_VERIFY_N", DEFAULT_MAX_VERIFY_N, 1
            ),
            max_verify_subsets=_int_var(
                environ, "CGT_MAX_VERIFY_SUBSETS", DEFAULT_MAX_VERIFY_SUBSETS, 1
            ),
            otlp_endpoint=environ.get("CGT_OTLP_ENDPOINT") or None,
            otlp_headers=headers,
        )
