"""Shared fixtures: toy and small key material, repo paths."""

from pathlib import Path

import pytest

from fedsecsim.paillier import keygen, keypair_from_primes


@pytest.fixture(scope="session")
def toy_keys():
    """n = 35 keypair; small enough to check every residue exhaustively."""
    return keypair_from_primes(5, 7)


@pytest.fixture(scope="session")
def keys128():
    return keygen(128, seed=7)


@pytest.fixture(scope="session")
def keys256():
    return keygen(256, seed=7)


@pytest.fixture(scope="session")
def keys512():
    return keygen(512, seed=7)


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return Path(__file__).resolve().parents[1]
