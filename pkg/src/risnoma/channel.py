"""Network geometry and fading channels for the RIS-aided NOMA downlink.

The AP sits at the centre of a square. ``2K`` users are dropped uniformly;
the ``K`` closest to the AP are *good* users with a direct Rayleigh link,
the ``K`` farthest are *poor* users that are blocked and only reachable
through the RIS cascade ``h_ru @ diag(q) @ h_ar``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .numerics import COND_THRESHOLD, condition_number, dbm_to_watts, make_rng, sample_cn

GOOD = 0
POOR = 1


@dataclass(frozen=True)
class NetworkConfig:
    """Physical layer parameters. Defaults are the desk-scale reference setup."""

    num_antennas: int = 4
    num_res: int = 9
    bandwidth_hz: float = 20e6
    tx_power_dbm: float = 20.0
    noise_power_dbm: float = -138.0
    side_length_m: float = 500.0
    phase_levels: int = 4
    pathloss_exp_au: float = 3.5
    pathloss_exp_ar: float = 2.2
    pathloss_exp_ru: float = 2.2
    reference_distance_m: float = 1.0
    reference_gain: float = 1.0
    ris_position: tuple | None = None
    alpha_good: float = 0.2
    alpha_poor: float = 0.8

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ValueError("num_antennas must be >= 1")
        if self.num_res < 1:
            raise ValueError("num_res must be >= 1")
        if self.phase_levels < 2:
            raise ValueError("phase_levels must be >= 2")
        if self.side_length_m < 0:
            raise ValueError("side_length_m must be >= 0")
        if self.reference_distance_m <= 0:
            raise ValueError("reference_distance_m must be > 0")
        if self.reference_gain < 0:
            raise ValueError("reference_gain must be >= 0")
        if not (0.0 <= self.alpha_good <= 1.0) or not np.isclose(
            self.alpha_good + self.alpha_poor, 1.0
        ):
            raise ValueError("alpha_good and alpha_poor must be fractions summing to 1")
        for name in ("bandwidth_hz", "tx_power_dbm", "noise_power_dbm"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def num_users(self):
        return 2 * self.num_antennas

    @property
    def tx_power_w(self):
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def noise_power_w(self):
        return dbm_to_watts(self.noise_power_dbm)

    @property
    def cluster_power_w(self):
        """Per-cluster transmit power, the total budget split evenly over beams."""
        return self.tx_power_w / self.num_antennas

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class NetworkInstance:
    """One frozen realisation of geometry and channels.

    ``h_au`` is ``K x K`` with row ``k`` the direct channel of good user
    ``good_users[k]``. ``h_ar`` is the ``N x K`` AP-to-RIS matrix and
    ``h_ru`` is ``K x N`` with row ``j`` the RIS-to-user channel of poor
    user ``poor_users[j]``. ``pairing[k]`` is the row of ``h_ru`` served
    by beam ``k`` together with good user ``k``.
    """

    positions: np.ndarray
    groups: np.ndarray
    good_users: np.ndarray
    poor_users: np.ndarray
    h_au: np.ndarray
    h_ar: np.ndarray
    h_ru: np.ndarray
    noise_var_good: np.ndarray
    noise_var_poor: np.ndarray
    ris_position: np.ndarray
    pairing: np.ndarray = field(default=None)

    def __post_init__(self):
        k = self.h_au.shape[0]
        if self.h_au.shape != (k, k):
            raise ValueError(f"h_au must be square, got {self.h_au.shape}")
        if self.h_ar.shape[1] != k:
            raise ValueError(f"h_ar must be N x {k}, got {self.h_ar.shape}")
        if self.h_ru.shape != (k, self.h_ar.shape[0]):
            raise ValueError(f"h_ru must be {k} x N, got {self.h_ru.shape}")
        if len(self.good_users) != k or len(self.poor_users) != k:
            raise ValueError("need exactly K good and K poor users")
        if self.pairing is None:
            object.__setattr__(self, "pairing", np.arange(k))
        pairing = np.asarray(self.pairing, dtype=int)
        if sorted(pairing.tolist()) != list(range(k)):
            raise ValueError("pairing must be a permutation of range(K)")
        object.__setattr__(self, "pairing", pairing)

    @property
    def num_antennas(self):
        return self.h_au.shape[0]

    @property
    def num_res(self):
        return self.h_ar.shape[0]

    def with_pairing(self, pairing):
        return dataclasses.replace(self, pairing=np.asarray(pairing, dtype=int))

    def scaled(self, factor):
        """Copy with every channel multiplied by ``factor``."""
        return dataclasses.replace(
            self, h_au=self.h_au * factor, h_ar=self.h_ar * factor, h_ru=self.h_ru * factor
        )


def path_gain(distance, exponent, reference_distance=1.0, reference_gain=1.0):
    """Log-distance power gain ``g0 * (d / d0) ** -exponent``, with d clamped to d0."""
    d = np.maximum(np.asarray(distance, dtype=float), reference_distance)
    return reference_gain * (d / reference_distance) ** (-exponent)


def place_users(cfg, rng):
    """Drop ``2K`` users uniformly in the square centred on the AP at the origin.

    Returns ``(positions, groups)``; the ``K`` users nearest the AP are
    labelled ``GOOD`` and the rest ``POOR``.
    """
    rng = make_rng(rng)
    half = cfg.side_length_m / 2.0
    positions = rng.uniform(-half, half, size=(cfg.num_users, 2)) if half > 0 else np.zeros(
        (cfg.num_users, 2)
    )
    dist = np.linalg.norm(positions, axis=1)
    order = np.argsort(dist, kind="stable")
    groups = np.full(cfg.num_users, POOR, dtype=int)
    groups[order[: cfg.num_antennas]] = GOOD
    return positions, groups


def _rayleigh(rng, gain, shape):
    return np.sqrt(gain) * sample_cn(rng, 1.0, size=shape)


def sample_channels(cfg, positions, groups, rng, max_redraws=100):
    """Draw all small-scale Rayleigh channels scaled by log-distance path gain.

    The direct good-user matrix is redrawn while its condition number exceeds
    the inversion threshold.
    """
    rng = make_rng(rng)
    positions = np.asarray(positions, dtype=float)
    groups = np.asarray(groups, dtype=int)
    k, n = cfg.num_antennas, cfg.num_res
    ap = np.zeros(2)

    good = np.flatnonzero(groups == GOOD)
    poor = np.flatnonzero(groups == POOR)
    if len(good) != k or len(poor) != k:
        raise ValueError(f"expected {k} good and {k} poor users")
    # order each group by distance to the AP so row k is deterministic
    good = good[np.argsort(np.linalg.norm(positions[good], axis=1), kind="stable")]
    poor = poor[np.argsort(np.linalg.norm(positions[poor], axis=1), kind="stable")]

    if cfg.ris_position is not None:
        ris = np.asarray(cfg.ris_position, dtype=float)
    else:
        ris = positions[poor].mean(axis=0)

    pl = dict(reference_distance=cfg.reference_distance_m, reference_gain=cfg.reference_gain)
    g_au = path_gain(np.linalg.norm(positions[good] - ap, axis=1), cfg.pathloss_exp_au, **pl)
    g_ar = path_gain(np.linalg.norm(ris - ap), cfg.pathloss_exp_ar, **pl)
    g_ru = path_gain(np.linalg.norm(positions[poor] - ris, axis=1), cfg.pathloss_exp_ru, **pl)

    for _ in range(max_redraws):
        h_au = _rayleigh(rng, g_au[:, None], (k, k))
        if not np.any(h_au) or condition_number(h_au) <= COND_THRESHOLD:
            break
    h_ar = _rayleigh(rng, g_ar, (n, k))
    h_ru = _rayleigh(rng, g_ru[:, None], (k, n))

    noise = np.full(k, cfg.noise_power_w)
    return NetworkInstance(
        positions=positions,
        groups=groups,
        good_users=good,
        poor_users=poor,
        h_au=h_au,
        h_ar=h_ar,
        h_ru=h_ru,
        noise_var_good=noise,
        noise_var_poor=noise.copy(),
        ris_position=ris,
    )


def make_instance(cfg, rng):
    """Place users and draw channels with one generator."""
    rng = make_rng(rng)
    positions, groups = place_users(cfg, rng)
    return sample_channels(cfg, positions, groups, rng)


def reflection_vector(q):
    """Diagonal of the RIS phase matrix from a phase config or a raw vector."""
    if hasattr(q, "reflection"):
        return q.reflection()
    return np.asarray(q, dtype=np.complex128).ravel()


def composite_channel(inst, q, poor_index):
    """Reflected cascade ``h_ru[j] @ diag(q) @ h_ar`` as a length-K vector."""
    if not 0 <= poor_index < inst.h_ru.shape[0]:
        raise IndexError(f"poor user index {poor_index} out of range")
    qv = reflection_vector(q)
    if qv.shape[0] != inst.num_res:
        raise ValueError(f"phase vector has {qv.shape[0]} entries, expected {inst.num_res}")
    return (inst.h_ru[poor_index] * qv) @ inst.h_ar


def composite_channels(inst, q):
    """All poor users' cascades stacked as a ``K x K`` matrix (row per h_ru row)."""
    qv = reflection_vector(q)
    return (inst.h_ru * qv) @ inst.h_ar


def user_gains_db(inst):
    """Per-user channel power in dB, used as the clustering channel feature.

    Good users use their direct channel energy. Poor users use the
    phase-independent cascade energy ``sum_n |h_ru[n]|^2 ||h_ar[n]||^2``.
    """
    gains = np.empty(len(inst.groups))
    gains[inst.good_users] = np.sum(np.abs(inst.h_au) ** 2, axis=1)
    cascade = (np.abs(inst.h_ru) ** 2) @ np.sum(np.abs(inst.h_ar) ** 2, axis=1)
    gains[inst.poor_users] = cascade
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(gains)


# -- plain-text dump ---------------------------------------------------------
#
# One block per array:  "# <name> <rows> <cols> <kind>"  followed by <rows>
# lines. Complex entries are written as "re im" pairs, real entries as single
# numbers, all with 17 significant digits so a round trip is exact.

_COMPLEX_FIELDS = ("h_au", "h_ar", "h_ru")
_REAL_FIELDS = ("positions", "noise_var_good", "noise_var_poor", "ris_position")
_INT_FIELDS = ("groups", "good_users", "poor_users", "pairing")


def _fmt(x):
    return format(float(x), ".17g")


def dump_instance(inst, path):
    lines = []
    for name in _COMPLEX_FIELDS + _REAL_FIELDS + _INT_FIELDS:
        arr = np.asarray(getattr(inst, name))
        mat = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
        kind = "complex" if name in _COMPLEX_FIELDS else ("int" if name in _INT_FIELDS else "real")
        lines.append(f"# {name} {mat.shape[0]} {mat.shape[1]} {kind}")
        for row in mat:
            if kind == "complex":
                lines.append(" ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in row))
            elif kind == "int":
                lines.append(" ".join(str(int(v)) for v in row))
            else:
                lines.append(" ".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path):
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    fields = {}
    i = 0
    while i < len(raw):
        header = raw[i].split()
        if header[0] != "#" or len(header) != 5:
            raise ValueError(f"malformed header line: {raw[i]!r}")
        name, rows, cols, kind = header[1], int(header[2]), int(header[3]), header[4]
        body = raw[i + 1 : i + 1 + rows]
        if kind == "complex":
            vals = np.array([[float(t) for t in ln.split()] for ln in body]).reshape(rows, cols, 2)
            arr = vals[..., 0] + 1j * vals[..., 1]
        elif kind == "int":
            arr = np.array([[int(t) for t in ln.split()] for ln in body], dtype=int)
        else:
            arr = np.array([[float(t) for t in ln.split()] for ln in body], dtype=float)
        arr = arr.reshape(rows, cols)
        if name not in ("positions",) + _COMPLEX_FIELDS:
            arr = arr.ravel()
        fields[name] = arr
        i += 1 + rows
    return NetworkInstance(**fields)
