"""User-association environment: B base stations along a road serving K users.

Statuses are K x B matrices of received SNRs derived from user positions
drawn uniformly on the road segment between the outermost BS projections.
The radio model is a standard macro-cell one: path loss
128.1 + 37.6*log10(d/1km) dB, thermal noise -174 dBm/Hz over the configured
bandwidth, no inter-cell interference. The action assigns each user to one
BS; each BS can carry at most ``capacity`` users.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .base import ModelAccessError, Observation

ORACLE_ENUMERATION_LIMIT = 10**6

# fixed affine feature map keeping tanh inputs O(1): (snr_db - 50)/10
FEATURE_DB_OFFSET = 50.0
FEATURE_DB_SCALE = 10.0


@dataclass(frozen=True)
class UserAssocConfig:
    num_bs: int = 2
    num_users: int = 3
    capacity: int = 2
    inter_bs_distance: float = 500.0  # m
    bs_road_offset: float = 100.0  # m
    tx_power: float = 20.0  # W
    bandwidth: float = 1e7  # Hz
    noise_figure_db: float = 0.0
    noise_psd_dbm_hz: float = -174.0
    rayleigh_fading: bool = False

    def __post_init__(self):
        if self.num_bs < 1 or self.num_users < 1 or self.capacity < 1:
            raise ValueError("num_bs, num_users and capacity must be positive")
        if self.num_bs * self.capacity < self.num_users:
            raise ValueError(
                f"capacity: num_bs*capacity = {self.num_bs * self.capacity} "
                f"cannot serve num_users = {self.num_users}"
            )
        for key in ("inter_bs_distance", "bs_road_offset", "tx_power", "bandwidth"):
            if getattr(self, key) <= 0:
                raise ValueError(f"{key} must be positive")


def path_loss_db(distance_m):
    return 128.1 + 37.6 * np.log10(np.asarray(distance_m, dtype=float) / 1000.0)


def sum_rate(assoc, snr, bandwidth) -> float:
    """Shannon sum-rate (bit/s) of the selected links; no interference term."""
    assoc = np.asarray(assoc)
    snr = np.asarray(snr, dtype=float)
    selected = snr[np.arange(assoc.shape[-1]), assoc]
    return float(bandwidth * np.log2(1.0 + selected).sum())


def capacity_violation(assoc, num_bs, capacity) -> np.ndarray:
    """Per-BS load minus capacity; the association is feasible iff all <= 0."""
    counts = np.bincount(np.asarray(assoc), minlength=num_bs)
    return counts.astype(float) - capacity


class UserAssocEnv:
    def __init__(self, config: UserAssocConfig = UserAssocConfig()):
        self.config = config
        self.num_users = config.num_users
        self.num_bs = config.num_bs
        self.capacity = config.capacity
        self.bandwidth = config.bandwidth
        self.bs_x = np.arange(config.num_bs) * config.inter_bs_distance
        self.road_length = (config.num_bs - 1) * config.inter_bs_distance
        self.tx_power_dbm = 10.0 * np.log10(config.tx_power * 1e3)
        self.noise_dbm = (
            config.noise_psd_dbm_hz
            + 10.0 * np.log10(config.bandwidth)
            + config.noise_figure_db
        )
        self.feature_dim = config.num_users * config.num_bs
        self.num_instant_constraints = config.num_bs
        self.num_avg_constraints = 0
        # objective O(1) scale for training: per-user spectral efficiency
        self.objective_scale = config.bandwidth * config.num_users
        self._assignments = None
        self._feasible = None

    # -- status sampling -------------------------------------------------

    def sample_positions(self, rng, n=None):
        shape = (self.num_users,) if n is None else (n, self.num_users)
        return rng.uniform(0.0, self.road_length, size=shape)

    def snr_from_positions(self, positions):
        """Linear SNR matrix (..., K, B) for user road coordinates (..., K)."""
        positions = np.asarray(positions, dtype=float)
        dx = positions[..., :, None] - self.bs_x
        dist = np.hypot(dx, self.config.bs_road_offset)
        snr_db = self.tx_power_dbm - path_loss_db(dist) - self.noise_dbm
        return 10.0 ** (snr_db / 10.0)

    def sample_status(self, rng, n=None):
        """Draw a status (K x B linear SNR matrix), or a batch of n of them."""
        snr = self.snr_from_positions(self.sample_positions(rng, n))
        if self.config.rayleigh_fading:
            snr = snr * rng.exponential(1.0, size=snr.shape)
        return snr

    def features(self, snr):
        """Network input: dB-scale SNRs, flattened, affinely squashed to O(1)."""
        snr_db = 10.0 * np.log10(np.asarray(snr, dtype=float))
        feat = (snr_db - FEATURE_DB_OFFSET) / FEATURE_DB_SCALE
        return feat.reshape(*snr.shape[:-2], self.feature_dim)

    # -- model (objective / constraints) ---------------------------------

    def sum_rate(self, assoc, snr) -> float:
        return sum_rate(assoc, snr, self.bandwidth)

    def capacity_violation(self, assoc) -> np.ndarray:
        return capacity_violation(assoc, self.num_bs, self.capacity)

    def observe(self, snr, assoc) -> Observation:
        assoc = np.asarray(assoc)
        if assoc.shape != (self.num_users,) or assoc.min() < 0 or assoc.max() >= self.num_bs:
            raise ValueError(f"invalid association {assoc!r}")
        return Observation(self.sum_rate(assoc, snr), self.capacity_violation(assoc))

    def observe_batch(self, snr_batch, assoc_batch):
        """Vectorized observe: (n,K,B) x (n,K) -> (rates (n,), g (n,B), c (n,0))."""
        snr_batch = np.asarray(snr_batch, dtype=float)
        assoc_batch = np.asarray(assoc_batch)
        n, K = assoc_batch.shape
        selected = np.take_along_axis(snr_batch, assoc_batch[:, :, None], axis=2)[:, :, 0]
        rates = self.bandwidth * np.log2(1.0 + selected).sum(axis=1)
        onehot = assoc_batch[:, :, None] == np.arange(self.num_bs)
        loads = onehot.sum(axis=1).astype(float)
        return rates, loads - self.capacity, np.zeros((n, 0))

    # -- exhaustive-search oracle ----------------------------------------

    def _enumeration_table(self):
        if self._assignments is None:
            total = self.num_bs**self.num_users
            if total > ORACLE_ENUMERATION_LIMIT:
                raise ValueError(
                    f"oracle enumeration of {total} assignments exceeds "
                    f"{ORACLE_ENUMERATION_LIMIT}"
                )
            table = np.array(
                list(itertools.product(range(self.num_bs), repeat=self.num_users)),
                dtype=np.int64,
            )
            onehot = table[:, :, None] == np.arange(self.num_bs)
            self._feasible = (onehot.sum(axis=1) <= self.capacity).all(axis=1)
            if not self._feasible.any():
                raise ValueError("no feasible assignment exists")
            self._assignments = table
        return self._assignments, self._feasible

    def oracle(self, snr):
        """Best feasible association and its rate, by exhaustive search.

        Ties resolve to the lexicographically smallest choice vector.
        """
        assoc, rate = self.oracle_batch(np.asarray(snr, dtype=float)[None])
        return assoc[0], float(rate[0])

    def oracle_batch(self, snr_batch):
        table, feasible = self._enumeration_table()
        snr_batch = np.asarray(snr_batch, dtype=float)
        per_user = self.bandwidth * np.log2(1.0 + snr_batch)  # (n, K, B)
        # (n, A): rate of every assignment; table rows are in lexicographic
        # order so argmax's first-hit rule implements the tie-break
        rates = per_user[:, np.arange(self.num_users), table].sum(axis=2)
        rates = np.where(feasible, rates, -np.inf)
        best = rates.argmax(axis=1)
        return table[best], rates[np.arange(len(best)), best]

    # -- relaxed analytic model (continuous association probabilities) ----

    def relaxed_objective(self, snr, probs) -> float:
        """Expected sum-rate when user k joins BS b with probability probs[k,b]."""
        per_user = self.bandwidth * np.log2(1.0 + np.asarray(snr, dtype=float))
        return float((np.asarray(probs, dtype=float) * per_user).sum())

    def relaxed_constraints(self, probs) -> np.ndarray:
        return np.asarray(probs, dtype=float).sum(axis=0) - self.capacity

    def analytic_gradients(self, snr, probs):
        """d(objective)/dP, d(g_b)/dP, d(c_j)/dP of the relaxed model."""
        probs = np.asarray(probs, dtype=float)
        djdp = self.bandwidth * np.log2(1.0 + np.asarray(snr, dtype=float))
        dgdp = np.zeros((self.num_bs,) + probs.shape)
        for b in range(self.num_bs):
            dgdp[b, :, b] = 1.0
        return djdp, dgdp, np.zeros((0,) + probs.shape)

    def model_free(self):
        return ModelFreeUserAssoc(self)


class ModelFreeUserAssoc:
    """Observation-only handle: statuses in, (objective, constraints) out.

    Everything a learner may touch without the analytic model lives here;
    the rate formula, the oracle and analytic gradients stay behind the wall.
    """

    def __init__(self, env: UserAssocEnv):
        self._env = env
        self.num_users = env.num_users
        self.num_bs = env.num_bs
        self.feature_dim = env.feature_dim
        self.num_instant_constraints = env.num_instant_constraints
        self.num_avg_constraints = 0
        self.objective_scale = env.objective_scale

    def sample_status(self, rng, n=None):
        return self._env.sample_status(rng, n)

    def features(self, snr):
        return self._env.features(snr)

    def observe(self, snr, assoc) -> Observation:
        return self._env.observe(snr, assoc)

    def observe_batch(self, snr_batch, assoc_batch):
        return self._env.observe_batch(snr_batch, assoc_batch)

    def analytic_gradients(self, snr, probs):
        raise ModelAccessError("model-free handle does not expose analytic gradients")
