"""Zero-forcing precoding, SINR and rate physics for NOMA and OMA clusters.

Beam ``k`` serves one NOMA cluster: good user ``k`` (direct link, row ``k``
of ``h_au``) and the poor user paired with it (reached through the RIS).
The precoder is built from the good users' direct channels only, so phase
changes on the RIS never alter it.

Decoding order is fixed: the good user first decodes and cancels the poor
user's message, then decodes its own with no intra-cluster interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import composite_channels, reflection_vector
from .numerics import as_complex_matrix, conj_transpose, invert, matmul


@dataclass(frozen=True)
class PowerAllocation:
    """Per-cluster power split ``alpha[k] = (alpha_good, alpha_poor)``."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        if alpha.shape[1] != 2:
            raise ValueError(f"alpha must have shape (K, 2), got {alpha.shape}")
        if np.any(alpha < 0):
            raise ValueError("power fractions must be non-negative")
        if not np.allclose(alpha.sum(axis=1), 1.0):
            raise ValueError("power fractions in each cluster must sum to 1")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def fixed(cls, num_clusters, alpha_good=0.2, alpha_poor=0.8):
        return cls(np.tile([alpha_good, alpha_poor], (num_clusters, 1)))

    @property
    def good(self):
        return self.alpha[:, 0]

    @property
    def poor(self):
        return self.alpha[:, 1]

    def favours_poor(self):
        """True when every poor user gets the larger share."""
        return bool(np.all(self.poor > self.good))

    def total_power(self, cluster_power):
        return float(np.sum(self.alpha) * cluster_power)


@dataclass
class RateReport:
    """Per-user SINRs and rates (bits/s/Hz) for one slot."""

    sinr_good: np.ndarray
    sinr_poor: np.ndarray
    rate_good: np.ndarray
    rate_poor: np.ndarray
    sic_feasible: np.ndarray

    @property
    def rates(self):
        return np.concatenate([self.rate_good, self.rate_poor])

    @property
    def sum_rate(self):
        return float(np.sum(self.rate_good) + np.sum(self.rate_poor))


def zf_precode(h_au):
    """Zero-forcing precoder for row-stacked user channels ``G``.

    Returns ``P = G^H (G G^H)^-1`` so that ``G @ P = I``. This is the usual
    ``H (H^H H)^-1`` form with ``H = G^H`` holding user channels as columns.
    """
    g = as_complex_matrix(h_au)
    gh = conj_transpose(g)
    return matmul(gh, invert(matmul(g, gh)))


def _interference(gains):
    """Row-wise sum of ``gains`` excluding the diagonal (own beam).

    The diagonal is masked rather than subtracted so a dominant own-beam
    term cannot swamp the (tiny) leakage through cancellation.
    """
    k = gains.shape[-1]
    return np.where(np.eye(k, dtype=bool), 0.0, gains).sum(axis=-1)


def good_gains(inst, precoder):
    """``|h_au[k] @ p_i|^2`` as a ``K x K`` matrix."""
    return np.abs(inst.h_au @ precoder) ** 2


def poor_gains(inst, q, precoder):
    """``|c_k @ p_i|^2`` where ``c_k`` is the cascade of the poor user on beam k."""
    cascade = composite_channels(inst, q)[inst.pairing]
    return np.abs(cascade @ precoder) ** 2


def sinr_good(inst, precoder, alloc, rho, k):
    g = good_gains(inst, precoder)
    own = rho * g[k, k] * alloc.good[k]
    interference = rho * sum(g[k, i] for i in range(len(g)) if i != k)
    return float(own / (interference + inst.noise_var_good[k]))


def sinr_poor(inst, q, precoder, alloc, rho, k):
    e = poor_gains(inst, q, precoder)
    s = rho * e[k, k]
    interference = rho * sum(e[k, i] for i in range(len(e)) if i != k)
    return float(s * alloc.poor[k] / (s * alloc.good[k] + interference + inst.noise_var_poor[k]))


def _noma_sinrs(g, e, alloc, rho, noise_good, noise_poor):
    own_g = np.diagonal(g, axis1=-2, axis2=-1)
    own_e = np.diagonal(e, axis1=-2, axis2=-1)
    s_good = rho * own_g * alloc.good / (rho * _interference(g) + noise_good)
    s_poor = rho * own_e * alloc.poor / (rho * own_e * alloc.good + rho * _interference(e) + noise_poor)
    # rate of the poor user's message as seen by the good user (SIC stage)
    s_sic = rho * own_g * alloc.poor / (rho * own_g * alloc.good + rho * _interference(g) + noise_good)
    return s_good, s_poor, s_sic


def sic_check(rate_poor_at_good, rate_poor_at_poor):
    """Per-cluster SIC feasibility: the good user can decode the poor message."""
    return np.asarray(rate_poor_at_good) >= np.asarray(rate_poor_at_poor)


def sum_rate(inst, q, precoder, alloc, rho):
    g = good_gains(inst, precoder)
    e = poor_gains(inst, q, precoder)
    s_good, s_poor, s_sic = _noma_sinrs(g, e, alloc, rho, inst.noise_var_good, inst.noise_var_poor)
    r_poor = np.log2(1.0 + s_poor)
    return RateReport(
        sinr_good=s_good,
        sinr_poor=s_poor,
        rate_good=np.log2(1.0 + s_good),
        rate_poor=r_poor,
        sic_feasible=sic_check(np.log2(1.0 + s_sic), r_poor),
    )


def oma_sum_rate(inst, q, precoder, rho):
    """Equal-time TDMA inside each cluster, full cluster power per user.

    Inter-cluster (inter-beam) interference is kept; the intra-cluster term
    vanishes because the two users never share a slot.
    """
    g = good_gains(inst, precoder)
    e = poor_gains(inst, q, precoder)
    own_g = np.diag(g)
    own_e = np.diag(e)
    s_good = rho * own_g / (rho * _interference(g) + inst.noise_var_good)
    s_poor = rho * own_e / (rho * _interference(e) + inst.noise_var_poor)
    k = len(own_g)
    return RateReport(
        sinr_good=s_good,
        sinr_poor=s_poor,
        rate_good=0.5 * np.log2(1.0 + s_good),
        rate_poor=0.5 * np.log2(1.0 + s_poor),
        sic_feasible=np.ones(k, dtype=bool),
    )


class DownlinkModel:
    """A frozen instance with its precoder, ready for repeated rate queries.

    ``rates(Q)`` evaluates a whole batch of reflection vectors (rows of
    ``Q``) at once, which is what exhaustive search and the environment use.
    """

    def __init__(self, inst, alloc=None, rho=1.0, scheme="noma", precoder=None):
        if scheme not in ("noma", "oma"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.inst = inst
        self.alloc = alloc or PowerAllocation.fixed(inst.num_antennas)
        self.rho = float(rho)
        self.scheme = scheme
        self.precoder = zf_precode(inst.h_au) if precoder is None else precoder
        g = good_gains(inst, self.precoder)
        self._g = g
        # A[k, n, i] = h_ru[pair_k, n] * (h_ar @ P)[n, i]
        hp = inst.h_ar @ self.precoder
        self._a = inst.h_ru[inst.pairing][:, :, None] * hp[None, :, :]
        if scheme == "noma":
            own = np.diag(g)
            s_good = rho * own * self.alloc.good / (rho * _interference(g) + inst.noise_var_good)
            self._good_rate = float(np.sum(np.log2(1.0 + s_good)))
        else:
            s_good = rho * np.diag(g) / (rho * _interference(g) + inst.noise_var_good)
            self._good_rate = float(np.sum(0.5 * np.log2(1.0 + s_good)))

    def poor_rates(self, q_batch):
        q_batch = np.atleast_2d(np.asarray(q_batch, dtype=np.complex128))
        amp = np.einsum("mn,kni->mki", q_batch, self._a)
        e = amp.real**2 + amp.imag**2
        own = np.diagonal(e, axis1=1, axis2=2)
        interf = _interference(e)
        noise = self.inst.noise_var_poor
        rho = self.rho
        if self.scheme == "noma":
            sinr = rho * own * self.alloc.poor / (rho * own * self.alloc.good + rho * interf + noise)
            return np.log2(1.0 + sinr)
        sinr = rho * own / (rho * interf + noise)
        return 0.5 * np.log2(1.0 + sinr)

    def rates(self, q_batch):
        """Sum rate for each row of ``q_batch``."""
        return self._good_rate + self.poor_rates(q_batch).sum(axis=1)

    def rate(self, q):
        return float(self.rates(reflection_vector(q)[None, :])[0])

    def report(self, q):
        if self.scheme == "noma":
            return sum_rate(self.inst, q, self.precoder, self.alloc, self.rho)
        return oma_sum_rate(self.inst, q, self.precoder, self.rho)
