"""Fingerprinting of filtered grids into dense token ids, plus the Q table."""
from __future__ import annotations

import hashlib

import numpy as np

from ..errors import RegretscopeError, TokenBudgetError
from .env import N_ACTIONS

DEFAULT_MAX_TOKENS = 200_000


def fingerprint(grid: np.ndarray) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    h.update(repr((grid.shape, grid.dtype.str)).encode())
    h.update(np.ascontiguousarray(grid).tobytes())
    return h.digest()


class TokenTable:
    """Vocabulary of filtered grids and an action-value row per token.

    Token ids are assigned densely in insertion order.  Grids that were never
    added map to ``-1``, which learners treat as "act uniformly at random".
    """

    def __init__(self, n_actions: int = N_ACTIONS, max_tokens: int = DEFAULT_MAX_TOKENS):
        self.n_actions = n_actions
        self.max_tokens = max_tokens
        self._ids: dict[bytes, int] = {}
        self._grids: list[np.ndarray] = []
        self._stack: np.ndarray | None = None
        self.q = np.zeros((0, n_actions))
        self.recognition = None  # set by the learner that filled the table

    def __len__(self) -> int:
        return len(self._grids)

    @property
    def n_tokens(self) -> int:
        return len(self._grids)

    def add(self, grid: np.ndarray) -> int:
        key = fingerprint(grid)
        tok = self._ids.get(key)
        if tok is not None:
            if not np.array_equal(self._grids[tok], grid):
                raise RegretscopeError("fingerprint collision between distinct grids")
            return tok
        if len(self._grids) >= self.max_tokens:
            raise TokenBudgetError(len(self._grids) + 1, self.max_tokens)
        tok = len(self._grids)
        self._ids[key] = tok
        self._grids.append(grid.copy())
        self._stack = None
        return tok

    def lookup(self, grid: np.ndarray) -> int:
        tok = self._ids.get(fingerprint(grid), -1)
        if tok >= 0 and not np.array_equal(self._grids[tok], grid):
            raise RegretscopeError("fingerprint collision between distinct grids")
        return tok

    def nearest(self, grid: np.ndarray) -> int:
        """Known token whose grid differs from ``grid`` in the fewest entries.

        Exact matches win; ties go to the smallest token id.
        """
        tok = self.lookup(grid)
        if tok >= 0:
            return tok
        if not self._grids:
            return -1
        if self._stack is None:
            self._stack = np.stack([g.ravel() for g in self._grids])
        dist = (self._stack != grid.ravel()[None, :]).sum(axis=1)
        return int(np.argmin(dist))

    def grid(self, token: int) -> np.ndarray:
        return self._grids[token].copy()

    def reset_values(self) -> None:
        self.q = np.zeros((len(self._grids), self.n_actions))

    def frozen_copy(self) -> "TokenTable":
        """Same vocabulary, fresh zero action values."""
        t = TokenTable(self.n_actions, self.max_tokens)
        t._ids = dict(self._ids)
        t._grids = list(self._grids)
        t._stack = self._stack
        t.recognition = self.recognition
        t.reset_values()
        return t

    def greedy_actions(self) -> np.ndarray:
        """Argmax per token, ties to the lowest action index."""
        return np.argmax(self.q, axis=1)

    def digest(self) -> str:
        h = hashlib.sha256()
        for g in self._grids:
            h.update(fingerprint(g))
        h.update(np.ascontiguousarray(self.q).tobytes())
        return h.hexdigest()
